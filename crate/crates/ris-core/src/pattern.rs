//! Reradiation patterns: a probe receiver swept over an angular arc.
//!
//! Each sample rebuilds only the probe-coupled row/column of the scene's
//! impedance matrix, subtracts the free-space transmitter-probe path, folds
//! any cluster ports (short-circuited), converts to scattering parameters,
//! and evaluates the matched end-to-end channel. The pattern is therefore
//! the scattered field of the loaded surface, on an absolute scale set by a
//! unit source wave.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::em_scene::{
    mutual_impedance, nullify_direct_link, self_impedance, DipoleElement, GeometryError, Scenario,
};
use crate::linalg::norm_fro;
use crate::multipath::{reduce_cluster, MultipathError};
use crate::network::{
    h_e2e_s_matched, z_to_s, MatrixKind, NetworkError, Partition, PartitionedNetworkMatrix,
    RisLoads,
};
use crate::optimizer::OptimizeError;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Multipath(#[from] MultipathError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
}

/// Probe sweep over an arc in the z = 0 azimuth plane. The angle is
/// measured from the +x axis (the surface normal for yz-plane surfaces).
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub arc_center: Vector3<f64>,
    pub radius: f64,
    pub angles_deg: Vec<f64>,
    pub probe: DipoleElement,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), PatternError> {
        if !(self.radius > 0.0) {
            return Err(PatternError::InvalidSweep("radius must be positive".into()));
        }
        if self.angles_deg.is_empty() {
            return Err(PatternError::InvalidSweep("empty angle grid".into()));
        }
        if self.angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PatternError::InvalidSweep(
                "angle grid must be strictly increasing".into(),
            ));
        }
        self.probe.validate()?;
        Ok(())
    }

    /// Inclusive uniform grid from `lo` to `hi` degrees.
    pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PatternSample {
    pub angle_deg: f64,
    pub power_w: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone)]
pub struct PatternResult {
    pub samples: Vec<PatternSample>,
}

impl PatternResult {
    pub fn peak(&self) -> Option<&PatternSample> {
        self.samples
            .iter()
            .max_by(|a, b| a.power_w.total_cmp(&b.power_w))
    }

    /// Local maxima of the sampled pattern; endpoints count when they top
    /// their single neighbor.
    pub fn local_maxima(&self) -> Vec<PatternSample> {
        let n = self.samples.len();
        let mut out = Vec::new();
        for i in 0..n {
            let left_ok = i == 0 || self.samples[i].power_w >= self.samples[i - 1].power_w;
            let right_ok = i + 1 == n || self.samples[i].power_w >= self.samples[i + 1].power_w;
            if left_ok && right_ok {
                out.push(self.samples[i]);
            }
        }
        out
    }
}

/// Angular window for lobe extraction.
#[derive(Debug, Clone, Copy)]
pub struct AngularWindow {
    pub center_deg: f64,
    pub half_width_deg: f64,
}

impl AngularWindow {
    pub fn contains(&self, angle_deg: f64) -> bool {
        (angle_deg - self.center_deg).abs() <= self.half_width_deg
    }
}

#[derive(Debug, Clone)]
pub struct LobeMetric {
    pub window: AngularWindow,
    pub peak_angle_deg: f64,
    pub peak_power_w: f64,
    pub peak_power_db: f64,
}

/// Receiver angles `ψ_k = asin(k/4)` in degrees, k = 1..4.
pub fn psi_angle(k: u32) -> Result<f64, PatternError> {
    if !(1..=4).contains(&k) {
        return Err(PatternError::InvalidSweep(format!(
            "receiver index must be 1..=4, got {k}"
        )));
    }
    Ok((k as f64 / 4.0).asin().to_degrees())
}

fn power_db(p: f64) -> f64 {
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Moves a probe that would sit on top of another element slightly out of
/// plane; the pattern value is insensitive to a half-wavelength offset in z
/// at ranges of hundreds of wavelengths.
fn declash_probe(
    mut position: Vector3<f64>,
    others: &[&DipoleElement],
    wavelength: f64,
) -> Vector3<f64> {
    let too_close = others
        .iter()
        .any(|e| (e.position - position).norm() < wavelength / 4.0);
    if too_close {
        position.z += wavelength / 2.0;
    }
    position
}

/// Sweeps the probe over the arc and evaluates the scattered power at every
/// angle. Cluster elements, when present, are folded in short-circuited.
pub fn pattern_sweep(
    scenario: &Scenario,
    loads: &RisLoads,
    sweep: &SweepSpec,
) -> Result<PatternResult, PatternError> {
    sweep.validate()?;
    if scenario.tx_elements.len() != 1 {
        return Err(PatternError::InvalidSweep(
            "pattern sweeps drive a single transmitter port".into(),
        ));
    }
    let lambda = scenario.wavelength();
    let f = scenario.frequency;

    // Fixed part of the scene: everything except the probe, in port order
    // (T, S, O). Pairwise impedances are computed once.
    let fixed: Vec<&DipoleElement> = scenario
        .tx_elements
        .iter()
        .chain(scenario.ris_elements.iter())
        .chain(scenario.cluster_elements.iter())
        .collect();
    let n_f = fixed.len();
    let mut jobs = Vec::with_capacity(n_f * (n_f + 1) / 2);
    for i in 0..n_f {
        for j in i..n_f {
            jobs.push((i, j));
        }
    }
    let fixed_entries: Result<Vec<(usize, usize, Complex64)>, GeometryError> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let v = if i == j {
                self_impedance(fixed[i], f)?
            } else {
                mutual_impedance(fixed[i], fixed[j], f)?
            };
            Ok((i, j, v))
        })
        .collect();
    let mut fixed_z = DMatrix::<Complex64>::zeros(n_f, n_f);
    for (i, j, v) in fixed_entries? {
        fixed_z[(i, j)] = v;
        fixed_z[(j, i)] = v;
    }

    let n_t = scenario.tx_elements.len();
    let k = scenario.ris_elements.len();
    let n_o = scenario.cluster_elements.len();
    let partition = Partition {
        n_t,
        k,
        n_r: 1,
        n_o,
    };
    let cluster_loads = vec![Complex64::new(0.0, 0.0); n_o];

    let samples: Result<Vec<PatternSample>, PatternError> = sweep
        .angles_deg
        .par_iter()
        .map(|&angle_deg| {
            let psi = angle_deg.to_radians();
            let nominal = sweep.arc_center + Vector3::new(psi.cos(), psi.sin(), 0.0) * sweep.radius;
            let probe = sweep.probe.at(declash_probe(nominal, &fixed, lambda));

            // Full matrix in (T, S, R, O) order from the cached fixed part
            // plus the probe row/column.
            let n = n_f + 1;
            let r_idx = n_t + k;
            let mut data = DMatrix::<Complex64>::zeros(n, n);
            let fixed_slot = |i: usize| if i < r_idx { i } else { i + 1 };
            for i in 0..n_f {
                for j in 0..n_f {
                    data[(fixed_slot(i), fixed_slot(j))] = fixed_z[(i, j)];
                }
            }
            for (i, e) in fixed.iter().enumerate() {
                let v = mutual_impedance(e, &probe, f)?;
                data[(fixed_slot(i), r_idx)] = v;
                data[(r_idx, fixed_slot(i))] = v;
            }
            let z_rr = self_impedance(&probe, f)?;
            data[(r_idx, r_idx)] = z_rr;

            let z_full = PartitionedNetworkMatrix::new(
                MatrixKind::Impedance,
                data,
                partition,
                scenario.reference_impedance,
            )?;

            // Free-space transmitter-probe matrix for the nullification.
            let tx = &scenario.tx_elements[0];
            let z_tt = fixed_z[(0, 0)];
            let z_tr = mutual_impedance(tx, &probe, f)?;
            let z_free = DMatrix::from_row_slice(2, 2, &[z_tt, z_tr, z_tr, z_rr]);
            let nulled = nullify_direct_link(&z_full, &z_free)?;

            let reduced = reduce_cluster(&nulled, &cluster_loads)?;
            let s = z_to_s(&reduced)?;
            let h = h_e2e_s_matched(&s, loads)?;
            let power = norm_fro(&h).powi(2);
            Ok(PatternSample {
                angle_deg,
                power_w: power,
                power_db: power_db(power),
            })
        })
        .collect();

    Ok(PatternResult { samples: samples? })
}

/// Per-window peak extraction. Windows must be pairwise disjoint and each
/// must contain at least one sample.
pub fn lobe_metrics(
    result: &PatternResult,
    windows: &[AngularWindow],
) -> Result<Vec<LobeMetric>, PatternError> {
    for (i, a) in windows.iter().enumerate() {
        if !(a.half_width_deg > 0.0) {
            return Err(PatternError::InvalidWindow(
                "window half-width must be positive".into(),
            ));
        }
        for b in windows.iter().skip(i + 1) {
            if (a.center_deg - b.center_deg).abs() <= a.half_width_deg + b.half_width_deg {
                return Err(PatternError::InvalidWindow(format!(
                    "windows at {}° and {}° overlap",
                    a.center_deg, b.center_deg
                )));
            }
        }
    }
    windows
        .iter()
        .map(|w| {
            let best = result
                .samples
                .iter()
                .filter(|s| w.contains(s.angle_deg))
                .max_by(|a, b| a.power_w.total_cmp(&b.power_w))
                .ok_or_else(|| {
                    PatternError::InvalidWindow(format!(
                        "window at {}° contains no samples",
                        w.center_deg
                    ))
                })?;
            Ok(LobeMetric {
                window: *w,
                peak_angle_deg: best.angle_deg,
                peak_power_w: best.power_w,
                peak_power_db: best.power_db,
            })
        })
        .collect()
}
