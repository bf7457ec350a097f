//! Scene geometry and impedance-matrix assembly for thin-wire dipole scenes.
//!
//! Every antenna and scattering element is a z-oriented thin-wire dipole
//! carrying the sinusoidal current profile `I(z) = I0 sin(k(h − |z|))`
//! (half-length `h`). Self and mutual impedances are computed with the
//! induced-EMF method: the exact near-field tangential E-field of one
//! filament is integrated against the current of the other by adaptive
//! quadrature. This supports arbitrary parallel offsets (side-by-side,
//! collinear, staggered); non-parallel wires are not supported.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::network::{MatrixKind, Partition, PartitionedNetworkMatrix, PortGroup};
use crate::{ETA_0, SPEED_OF_LIGHT};

/// Quadrature absolute tolerance on an impedance entry, ohm.
pub const IMPEDANCE_TOLERANCE: f64 = 1e-6;

const MAX_QUAD_DEPTH: u32 = 48;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("elements overlap: separation {separation:.3e} m is below the wire radius sum {radius_sum:.3e} m")]
    Overlap { separation: f64, radius_sum: f64 },
    #[error("non-parallel or non-z orientations are not supported")]
    NonParallel,
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(
        "element length {length:.4e} m is resonant at {frequency:.4e} Hz; feed current vanishes"
    )]
    ResonantLength { length: f64, frequency: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// A z-oriented thin-wire dipole.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleElement {
    /// Feed-point (midpoint) position, m.
    pub position: Vector3<f64>,
    /// Total dipole length, m.
    pub length: f64,
    /// Wire radius, m.
    pub radius: f64,
    /// Axis direction; only `±z` is supported.
    pub orientation: Vector3<f64>,
}

impl DipoleElement {
    pub fn z_oriented(position: Vector3<f64>, length: f64, radius: f64) -> Self {
        Self {
            position,
            length,
            radius,
            orientation: Vector3::z(),
        }
    }

    /// Same element moved to `position`.
    pub fn at(&self, position: Vector3<f64>) -> Self {
        Self {
            position,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.length > 0.0) {
            return Err(GeometryError::InvalidElement(format!(
                "length must be positive, got {}",
                self.length
            )));
        }
        if !(self.radius > 0.0) {
            return Err(GeometryError::InvalidElement(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.radius / self.length >= 0.05 {
            return Err(GeometryError::InvalidElement(format!(
                "thin-wire model requires radius/length < 0.05, got {:.4}",
                self.radius / self.length
            )));
        }
        let unit = self.orientation.normalize();
        if (unit.x.abs() > 1e-12) || (unit.y.abs() > 1e-12) {
            return Err(GeometryError::NonParallel);
        }
        Ok(())
    }
}

/// Uniform planar grid of RIS elements on the yz plane.
#[derive(Debug, Clone)]
pub struct RisGridSpec {
    pub n_y: usize,
    pub n_z: usize,
    /// Element spacing along y, m.
    pub d_y: f64,
    /// Element spacing along z, m.
    pub d_z: f64,
    pub center: Vector3<f64>,
}

/// Expands a grid spec into elements, row-major with z as the outer index
/// and y as the inner index. This ordering is stable: load vector entry
/// `iz * n_y + iy` always maps to the element at row `iz`, column `iy`.
pub fn expand_grid(
    spec: &RisGridSpec,
    template: &DipoleElement,
) -> Result<Vec<DipoleElement>, GeometryError> {
    template.validate()?;
    if spec.n_y < 1 || spec.n_z < 1 {
        return Err(GeometryError::InvalidGrid(format!(
            "grid counts must be >= 1, got {}x{}",
            spec.n_y, spec.n_z
        )));
    }
    if !(spec.d_y > 0.0) || !(spec.d_z > 0.0) {
        return Err(GeometryError::InvalidGrid(
            "grid spacings must be positive".to_string(),
        ));
    }
    let diameter = 2.0 * template.radius;
    if (spec.n_y > 1 && spec.d_y < diameter) || (spec.n_z > 1 && spec.d_z < diameter) {
        return Err(GeometryError::InvalidGrid(format!(
            "spacing below wire diameter {diameter:.3e} m"
        )));
    }
    let mut elements = Vec::with_capacity(spec.n_y * spec.n_z);
    for iz in 0..spec.n_z {
        for iy in 0..spec.n_y {
            let y = spec.center.y + (iy as f64 - (spec.n_y as f64 - 1.0) / 2.0) * spec.d_y;
            let z = spec.center.z + (iz as f64 - (spec.n_z as f64 - 1.0) / 2.0) * spec.d_z;
            elements.push(template.at(Vector3::new(spec.center.x, y, z)));
        }
    }
    Ok(elements)
}

/// Full scene: port ordering is the transmitter block, then the RIS block,
/// then the receiver block, then (when present) the cluster block.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Carrier frequency, Hz.
    pub frequency: f64,
    /// Reference impedance, ohm.
    pub reference_impedance: f64,
    pub tx_elements: Vec<DipoleElement>,
    pub ris_elements: Vec<DipoleElement>,
    pub rx_elements: Vec<DipoleElement>,
    pub cluster_elements: Vec<DipoleElement>,
    /// When set, direct-link nullification is applied by the scene and
    /// pattern commands that honor it.
    pub direct_link_blocked: bool,
}

impl Scenario {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    pub fn partition(&self) -> Partition {
        Partition {
            n_t: self.tx_elements.len(),
            k: self.ris_elements.len(),
            n_r: self.rx_elements.len(),
            n_o: self.cluster_elements.len(),
        }
    }

    /// All elements in port order (T, S, R, O).
    pub fn all_elements(&self) -> Vec<&DipoleElement> {
        self.tx_elements
            .iter()
            .chain(self.ris_elements.iter())
            .chain(self.rx_elements.iter())
            .chain(self.cluster_elements.iter())
            .collect()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.frequency > 0.0) {
            return Err(GeometryError::InvalidScenario(
                "frequency must be positive".to_string(),
            ));
        }
        if !(self.reference_impedance > 0.0) {
            return Err(GeometryError::InvalidScenario(
                "reference impedance must be positive".to_string(),
            ));
        }
        let elements = self.all_elements();
        for e in &elements {
            e.validate()?;
        }
        for (i, a) in elements.iter().enumerate() {
            for b in elements.iter().skip(i + 1) {
                check_separation(a, b)?;
            }
        }
        Ok(())
    }
}

fn check_separation(a: &DipoleElement, b: &DipoleElement) -> Result<(), GeometryError> {
    // Parallel z-oriented wires intersect only if both the lateral distance
    // is below the radius sum and the z extents overlap.
    let lateral =
        ((a.position.x - b.position.x).powi(2) + (a.position.y - b.position.y).powi(2)).sqrt();
    let radius_sum = a.radius + b.radius;
    if lateral > radius_sum {
        return Ok(());
    }
    let (a_lo, a_hi) = (a.position.z - a.length / 2.0, a.position.z + a.length / 2.0);
    let (b_lo, b_hi) = (b.position.z - b.length / 2.0, b.position.z + b.length / 2.0);
    if a_lo <= b_hi && b_lo <= a_hi {
        return Err(GeometryError::Overlap {
            separation: lateral,
            radius_sum,
        });
    }
    Ok(())
}

/// Adaptive Simpson quadrature for a complex integrand.
fn adaptive_simpson(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
        (fa + fm * 4.0 + fb) * (h / 6.0)
    }
    fn recurse(
        f: &impl Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let refined = left + right;
        let err = refined - whole;
        if depth == 0 || err.norm() <= 15.0 * tol {
            return refined + err / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, MAX_QUAD_DEPTH)
}

/// Tangential near-field factor of a sinusoidal filamentary current of
/// half-length `h1`, at lateral distance `rho` and axial offset `z` from the
/// filament midpoint. The full field is `E_z = -j η/(4π) * I0 * field_factor`.
fn field_factor(k: f64, h1: f64, rho: f64, z: f64) -> Complex64 {
    let r1 = (rho * rho + (z - h1) * (z - h1)).sqrt();
    let r2 = (rho * rho + (z + h1) * (z + h1)).sqrt();
    let r0 = (rho * rho + z * z).sqrt();
    Complex64::from_polar(1.0 / r1, -k * r1) + Complex64::from_polar(1.0 / r2, -k * r2)
        - Complex64::from_polar(2.0 * (k * h1).cos() / r0, -k * r0)
}

/// Induced-EMF impedance of the (field element, observation element) pair,
/// with the observation current sampled along a line at lateral distance
/// `rho` from the field element's axis.
fn emf_integral(
    field: &DipoleElement,
    obs: &DipoleElement,
    rho: f64,
    frequency: f64,
) -> Result<Complex64, GeometryError> {
    let k = 2.0 * PI * frequency / SPEED_OF_LIGHT;
    let h1 = field.length / 2.0;
    let h2 = obs.length / 2.0;
    let s1 = (k * h1).sin();
    let s2 = (k * h2).sin();
    if s1.abs() < 1e-9 || s2.abs() < 1e-9 {
        return Err(GeometryError::ResonantLength {
            length: field.length.max(obs.length),
            frequency,
        });
    }
    let delta = obs.position.z - field.position.z;
    let prefactor = Complex64::new(0.0, ETA_0 / (4.0 * PI * s1 * s2));
    let integrand = |zeta: f64| -> Complex64 {
        field_factor(k, h1, rho, delta + zeta) * (k * (h2 - zeta.abs())).sin()
    };
    // The |zeta| kink sits at zero; integrate each half separately.
    let tol = IMPEDANCE_TOLERANCE / prefactor.norm() / 2.0;
    let integral =
        adaptive_simpson(&integrand, -h2, 0.0, tol) + adaptive_simpson(&integrand, 0.0, h2, tol);
    Ok(prefactor * integral)
}

/// Mutual impedance between two distinct parallel z-oriented dipoles.
///
/// Reciprocity holds by construction: the argument pair is canonicalized
/// before integrating, so swapping `a` and `b` returns bit-identical values.
pub fn mutual_impedance(
    a: &DipoleElement,
    b: &DipoleElement,
    frequency: f64,
) -> Result<Complex64, GeometryError> {
    a.validate()?;
    b.validate()?;
    check_separation(a, b)?;
    let lateral =
        ((a.position.x - b.position.x).powi(2) + (a.position.y - b.position.y).powi(2)).sqrt();
    let axial = (a.position.z - b.position.z).abs();
    if lateral == 0.0 && axial == 0.0 {
        return Err(GeometryError::Overlap {
            separation: 0.0,
            radius_sum: a.radius + b.radius,
        });
    }
    let (field, obs) = canonical_order(a, b);
    // Thin-wire approximation: the observation current runs on the wire
    // axis; the field is evaluated at the axis-to-axis lateral distance
    // (or at the wire surface for coaxial stacked wires).
    let rho = if lateral > 0.0 { lateral } else { obs.radius };
    emf_integral(field, obs, rho, frequency)
}

fn canonical_order<'a>(
    a: &'a DipoleElement,
    b: &'a DipoleElement,
) -> (&'a DipoleElement, &'a DipoleElement) {
    let key = |e: &DipoleElement| (e.position.x, e.position.y, e.position.z, e.length, e.radius);
    if key(a)
        .partial_cmp(&key(b))
        .unwrap_or(std::cmp::Ordering::Equal)
        == std::cmp::Ordering::Greater
    {
        (b, a)
    } else {
        (a, b)
    }
}

/// Self impedance of a dipole: the induced-EMF integral evaluated on the
/// wire surface (integration path offset by the wire radius).
pub fn self_impedance(a: &DipoleElement, frequency: f64) -> Result<Complex64, GeometryError> {
    a.validate()?;
    emf_integral(a, a, a.radius, frequency)
}

/// Assembles the partitioned impedance matrix of a scene.
///
/// The diagonal holds self impedances and the off-diagonal entries pairwise
/// mutual impedances; the matrix is symmetric by construction. Pairs are
/// evaluated in parallel; every entry is computed independently so the
/// result does not depend on scheduling.
pub fn assemble_z_matrix(scenario: &Scenario) -> Result<PartitionedNetworkMatrix, GeometryError> {
    scenario.validate()?;
    let elements = scenario.all_elements();
    let n = elements.len();
    let f = scenario.frequency;

    let mut jobs = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            jobs.push((i, j));
        }
    }
    let entries: Result<Vec<(usize, usize, Complex64)>, GeometryError> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let z = if i == j {
                self_impedance(elements[i], f)?
            } else {
                mutual_impedance(elements[i], elements[j], f)?
            };
            Ok((i, j, z))
        })
        .collect();

    let mut data = DMatrix::<Complex64>::zeros(n, n);
    for (i, j, z) in entries? {
        data[(i, j)] = z;
        data[(j, i)] = z;
    }
    PartitionedNetworkMatrix::new(
        MatrixKind::Impedance,
        data,
        scenario.partition(),
        scenario.reference_impedance,
    )
    .map_err(|e| GeometryError::ShapeMismatch(e.to_string()))
}

/// Impedance matrix of the transmitter and receiver elements alone, with the
/// RIS and cluster absent. Port order is (T, R).
pub fn free_space_tr_matrix(scenario: &Scenario) -> Result<DMatrix<Complex64>, GeometryError> {
    let elements: Vec<&DipoleElement> = scenario
        .tx_elements
        .iter()
        .chain(scenario.rx_elements.iter())
        .collect();
    let n = elements.len();
    let f = scenario.frequency;
    let mut data = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z = if i == j {
                self_impedance(elements[i], f)?
            } else {
                mutual_impedance(elements[i], elements[j], f)?
            };
            data[(i, j)] = z;
            data[(j, i)] = z;
        }
    }
    Ok(data)
}

/// Subtracts the free-space transmitter-receiver coupling from the
/// transmitter-receiver blocks, leaving the scattered contribution only.
///
/// `z_free` is the (N_T + N_R)-port matrix from [`free_space_tr_matrix`],
/// computed with the RIS and cluster absent. Only the R-T and T-R blocks
/// change; every other block is returned bit-identical. Applying the
/// operation twice keeps subtracting, so it is not idempotent.
pub fn nullify_direct_link(
    z_full: &PartitionedNetworkMatrix,
    z_free: &DMatrix<Complex64>,
) -> Result<PartitionedNetworkMatrix, GeometryError> {
    if z_full.kind() != MatrixKind::Impedance {
        return Err(GeometryError::ShapeMismatch(
            "direct-link nullification operates on impedance matrices".to_string(),
        ));
    }
    let p = z_full.partition();
    let (n_t, n_r) = (p.n_t, p.n_r);
    if z_free.nrows() != n_t + n_r || z_free.ncols() != n_t + n_r {
        return Err(GeometryError::ShapeMismatch(format!(
            "free-space matrix is {}x{}, expected {}x{}",
            z_free.nrows(),
            z_free.ncols(),
            n_t + n_r,
            n_t + n_r
        )));
    }
    let mut out = z_full.clone();
    let rt_free = z_free.view((n_t, 0), (n_r, n_t)).into_owned();
    let tr_free = z_free.view((0, n_t), (n_t, n_r)).into_owned();
    let rt = out.block(PortGroup::Rx, PortGroup::Tx).into_owned() - &rt_free;
    let tr = out.block(PortGroup::Tx, PortGroup::Rx).into_owned() - &tr_free;
    out.set_block(PortGroup::Rx, PortGroup::Tx, &rt)
        .map_err(|e| GeometryError::ShapeMismatch(e.to_string()))?;
    out.set_block(PortGroup::Tx, PortGroup::Rx, &tr)
        .map_err(|e| GeometryError::ShapeMismatch(e.to_string()))?;
    Ok(out)
}

/// Position of a virtual receiver in the specular direction: the incidence
/// direction from `tx` onto the surface center is mirrored about the surface
/// normal (the x axis for the yz-plane surfaces built here) and followed for
/// `range` meters.
pub fn specular_position(
    tx: &Vector3<f64>,
    surface_center: &Vector3<f64>,
    range: f64,
) -> Vector3<f64> {
    let normal = Vector3::x();
    let incident = (surface_center - tx).normalize();
    let reflected = incident - normal * (2.0 * incident.dot(&normal));
    surface_center + reflected * range
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const F: f64 = 28.0e9;

    fn lambda() -> f64 {
        SPEED_OF_LIGHT / F
    }

    fn dipole(pos: Vector3<f64>, len_wl: f64) -> DipoleElement {
        DipoleElement::z_oriented(pos, len_wl * lambda(), lambda() / 500.0)
    }

    // Test-only independent oracle: the classical closed-form induced-EMF
    // expressions for half-wave dipoles, built on sine/cosine integrals.
    mod classical {
        use super::*;

        /// Si(x) via power series (small x) and the auxiliary-function
        /// rational approximations (large x).
        pub fn sine_integral(x: f64) -> f64 {
            assert!(x >= 0.0);
            if x <= 4.0 {
                // sum over n of (-1)^n x^(2n+1) / ((2n+1)(2n+1)!)
                let mut total = 0.0;
                let mut t = x; // (-1)^n x^(2n+1) / (2n+1)!
                for m in 0.. {
                    total += t / (2 * m + 1) as f64;
                    let k = (2 * m + 2) as f64;
                    t *= -x * x / (k * (k + 1.0));
                    if t.abs() < 1e-18 {
                        break;
                    }
                }
                total
            } else {
                let (f, g) = aux_fg(x);
                PI / 2.0 - f * x.cos() - g * x.sin()
            }
        }

        pub fn cosine_integral(x: f64) -> f64 {
            assert!(x > 0.0);
            const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
            if x <= 4.0 {
                let mut total = 0.0;
                let mut t = -x * x / 2.0; // first term of sum (-1)^n x^(2n)/(2n (2n)!)
                for m in 1.. {
                    total += t / (2 * m) as f64;
                    let k = (2 * m + 1) as f64;
                    t *= -x * x / (k * (k + 1.0));
                    if t.abs() < 1e-18 {
                        break;
                    }
                }
                EULER_GAMMA + x.ln() + total
            } else {
                let (f, g) = aux_fg(x);
                f * x.sin() - g * x.cos()
            }
        }

        /// Auxiliary functions f(x), g(x): rational approximations in x²
        /// with absolute error below 5e-7, valid for x ≥ 1.
        fn aux_fg(x: f64) -> (f64, f64) {
            let u = x * x;
            let f = (1.0 / x)
                * ((((u + 38.027_264) * u + 265.187_033) * u + 335.677_320) * u + 38.102_495)
                / ((((u + 40.021_433) * u + 322.624_911) * u + 570.236_280) * u + 157.105_423);
            let g = (1.0 / u)
                * ((((u + 42.242_855) * u + 302.757_865) * u + 352.018_498) * u + 21.821_899)
                / ((((u + 48.196_927) * u + 482.485_984) * u + 1_114.978_885) * u + 449.690_326);
            (f, g)
        }

        /// Classical mutual impedance of two identical side-by-side
        /// half-wave dipoles separated by `d`, referred to the feed current.
        pub fn side_by_side_half_wave(d: f64, wavelength: f64) -> Complex64 {
            let k = 2.0 * PI / wavelength;
            let l = wavelength / 2.0;
            let u0 = k * d;
            let u1 = k * ((d * d + l * l).sqrt() + l);
            let u2 = k * ((d * d + l * l).sqrt() - l);
            let c = ETA_0 / (4.0 * PI);
            let r = c * (2.0 * cosine_integral(u0) - cosine_integral(u1) - cosine_integral(u2));
            let x = -c * (2.0 * sine_integral(u0) - sine_integral(u1) - sine_integral(u2));
            Complex64::new(r, x)
        }

        /// Classical self impedance of a half-wave dipole (radius-independent
        /// at exactly half-wave length), referred to the feed current.
        pub fn self_half_wave() -> Complex64 {
            const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
            let c = ETA_0 / (2.0 * PI);
            let kl = 2.0 * PI * 0.5; // k * l for l = λ/2
            let r = c
                * (EULER_GAMMA + kl.ln() - cosine_integral(kl)
                    + 0.5 * kl.sin() * (sine_integral(2.0 * kl) - 2.0 * sine_integral(kl))
                    + 0.5
                        * kl.cos()
                        * (EULER_GAMMA + (kl / 2.0).ln() + cosine_integral(2.0 * kl)
                            - 2.0 * cosine_integral(kl)));
            let x = ETA_0 / (4.0 * PI)
                * (2.0 * sine_integral(kl)
                    + kl.cos() * (2.0 * sine_integral(kl) - sine_integral(2.0 * kl)));
            Complex64::new(r, x)
        }
    }

    #[test]
    fn sine_cosine_integral_reference_values() {
        // Si(1) = 0.9460830..., Ci(1) = 0.3374039...
        assert_relative_eq!(
            classical::sine_integral(1.0),
            0.946_083_070_367_183,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            classical::cosine_integral(1.0),
            0.337_403_922_900_968,
            epsilon = 1e-9
        );
        // Si(10) = 1.658347594..., Ci(10) = -0.045456433...
        assert_relative_eq!(
            classical::sine_integral(10.0),
            1.658_347_594,
            epsilon = 1e-5
        );
        assert_relative_eq!(
            classical::cosine_integral(10.0),
            -0.045_456_433,
            epsilon = 1e-5
        );
    }

    #[test]
    fn half_wave_self_impedance_matches_classical_value() {
        let d = dipole(Vector3::zeros(), 0.5);
        let z = self_impedance(&d, F).unwrap();
        let reference = classical::self_half_wave();
        // Classical 73.1 + j42.5 ohm; the wire-surface quadrature should sit
        // within a few percent of the filamentary closed form.
        assert!(
            (z.re - reference.re).abs() / reference.re < 0.05,
            "{z} vs {reference}"
        );
        assert!(
            (z.im - reference.im).abs() / reference.im < 0.05,
            "{z} vs {reference}"
        );
        assert!(z.re > 0.0);
    }

    #[test]
    fn side_by_side_half_wave_matches_classical_curve() {
        for d_wl in [0.5, 1.0, 2.0] {
            let a = dipole(Vector3::zeros(), 0.5);
            let b = dipole(Vector3::new(0.0, d_wl * lambda(), 0.0), 0.5);
            let z = mutual_impedance(&a, &b, F).unwrap();
            let reference = classical::side_by_side_half_wave(d_wl * lambda(), lambda());
            assert!(
                (z - reference).norm() < 1e-3,
                "d = {d_wl} λ: {z} vs {reference}"
            );
        }
    }

    #[test]
    fn side_by_side_half_lambda_re_is_about_minus_12_5() {
        let a = dipole(Vector3::zeros(), 0.5);
        let b = dipole(Vector3::new(0.0, 0.5 * lambda(), 0.0), 0.5);
        let z = mutual_impedance(&a, &b, F).unwrap();
        assert_relative_eq!(z.re, -12.53, epsilon = 0.15);
        assert_relative_eq!(z.im, -29.93, epsilon = 0.15);
    }

    #[test]
    fn shorter_dipole_has_smaller_reactance_magnitude() {
        let at_half = self_impedance(&dipole(Vector3::zeros(), 0.5), F).unwrap();
        let at_046 = self_impedance(&dipole(Vector3::zeros(), 0.46), F).unwrap();
        assert!(at_046.im.abs() < at_half.im.abs());
        assert!(at_046.re > 0.0);
    }

    #[test]
    fn mutual_impedance_is_swap_invariant_and_decays() {
        let a = dipole(Vector3::zeros(), 0.46);
        let mut last = f64::INFINITY;
        for exp in 1..=6 {
            let sep = 2.0_f64.powi(exp) * lambda();
            let b = dipole(Vector3::new(0.0, sep, 0.0), 0.46);
            let z_ab = mutual_impedance(&a, &b, F).unwrap();
            let z_ba = mutual_impedance(&b, &a, F).unwrap();
            assert_eq!(z_ab, z_ba);
            assert!(z_ab.norm() < last, "no decay at separation {sep}");
            last = z_ab.norm();
        }
    }

    #[test]
    fn decay_is_bounded_by_inverse_range() {
        let a = dipole(Vector3::zeros(), 0.46);
        let at = |sep: f64| {
            mutual_impedance(&a, &dipole(Vector3::new(0.0, sep, 0.0), 0.46), F)
                .unwrap()
                .norm()
        };
        let bound = at(2.0 * lambda()) * 2.0 * lambda() * 1.2;
        let mut sep = 2.0 * lambda();
        while sep < 600.0 * lambda() {
            assert!(at(sep) * sep <= bound, "1/r envelope violated at {sep}");
            sep *= 2.51;
        }
    }

    #[test]
    fn overlapping_wires_are_rejected() {
        let a = dipole(Vector3::zeros(), 0.46);
        let b = dipole(Vector3::new(0.0, a.radius * 0.5, 0.0), 0.46);
        assert!(matches!(
            mutual_impedance(&a, &b, F),
            Err(GeometryError::Overlap { .. })
        ));
    }

    #[test]
    fn non_parallel_wires_are_rejected() {
        let a = dipole(Vector3::zeros(), 0.46);
        let mut b = dipole(Vector3::new(0.0, lambda(), 0.0), 0.46);
        b.orientation = Vector3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            mutual_impedance(&a, &b, F),
            Err(GeometryError::NonParallel)
        ));
    }

    #[test]
    fn expand_grid_single_element_sits_at_center() {
        let spec = RisGridSpec {
            n_y: 1,
            n_z: 1,
            d_y: 1.0,
            d_z: 1.0,
            center: Vector3::new(0.0, 1.0, 2.0),
        };
        let els = expand_grid(&spec, &dipole(Vector3::zeros(), 0.46)).unwrap();
        assert_eq!(els.len(), 1);
        assert_eq!(els[0].position, Vector3::new(0.0, 1.0, 2.0));
    }

    #[test]
    fn expand_grid_two_by_two_is_symmetric_about_center() {
        let spec = RisGridSpec {
            n_y: 2,
            n_z: 2,
            d_y: 1.0,
            d_z: 1.0,
            center: Vector3::zeros(),
        };
        let tpl = DipoleElement::z_oriented(Vector3::zeros(), 0.1, 0.001);
        let els = expand_grid(&spec, &tpl).unwrap();
        let expected = [
            Vector3::new(0.0, -0.5, -0.5),
            Vector3::new(0.0, 0.5, -0.5),
            Vector3::new(0.0, -0.5, 0.5),
            Vector3::new(0.0, 0.5, 0.5),
        ];
        for (e, want) in els.iter().zip(expected.iter()) {
            assert_relative_eq!((e.position - want).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn expand_grid_dense_aperture_dimensions() {
        // Q = 2: 4Q x 8 elements at d_y = λ/Q, d_z = 3λ/4 span a 4λ x 6λ
        // aperture (spacing times count).
        let q = 2.0;
        let spec = RisGridSpec {
            n_y: (4.0 * q) as usize,
            n_z: 8,
            d_y: lambda() / q,
            d_z: 0.75 * lambda(),
            center: Vector3::zeros(),
        };
        let els = expand_grid(&spec, &dipole(Vector3::zeros(), 0.46)).unwrap();
        assert_eq!(els.len(), (32.0 * q) as usize);
        let y_span = els
            .iter()
            .map(|e| e.position.y)
            .fold(f64::NEG_INFINITY, f64::max)
            - els
                .iter()
                .map(|e| e.position.y)
                .fold(f64::INFINITY, f64::min);
        // n_y points span (n_y - 1) gaps.
        assert_relative_eq!(y_span, (4.0 * q - 1.0) * lambda() / q, epsilon = 1e-12);
    }

    #[test]
    fn grid_overlap_is_rejected() {
        let tpl = dipole(Vector3::zeros(), 0.46);
        let spec = RisGridSpec {
            n_y: 2,
            n_z: 1,
            d_y: tpl.radius, // below the wire diameter
            d_z: 1.0,
            center: Vector3::zeros(),
        };
        assert!(matches!(
            expand_grid(&spec, &tpl),
            Err(GeometryError::InvalidGrid(_))
        ));
    }

    #[test]
    fn translation_leaves_mutual_impedance_unchanged() {
        let shift = Vector3::new(3.1, -2.7, 11.9);
        let a = dipole(Vector3::zeros(), 0.46);
        let b = dipole(Vector3::new(0.3, 0.9, 0.02), 0.46);
        let z0 = mutual_impedance(&a, &b, F).unwrap();
        let z1 = mutual_impedance(&a.at(a.position + shift), &b.at(b.position + shift), F).unwrap();
        assert!((z0 - z1).norm() / z0.norm() < 1e-10);
    }

    #[test]
    fn specular_position_mirrors_about_x() {
        let tx = Vector3::new(4.0, 0.0, 0.0);
        let spec = specular_position(&tx, &Vector3::zeros(), 4.0);
        assert_relative_eq!((spec - tx).norm(), 0.0, epsilon = 1e-12);
        let tx_oblique = Vector3::new(3.0, 3.0, 0.0);
        let spec = specular_position(&tx_oblique, &Vector3::zeros(), 3.0 * 2.0_f64.sqrt());
        assert_relative_eq!(spec.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(spec.y, -3.0, epsilon = 1e-12);
    }
}
