//! Partitioned network matrices, Z↔S conversion, reflection coefficients,
//! and the end-to-end channel expressions.
//!
//! Port order is fixed at construction: transmitter block, RIS block,
//! receiver block, then an optional cluster block. Block accessors are
//! views with explicit index ranges; ports are never reordered.

use nalgebra::{DMatrix, DMatrixView, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, invert, LinalgError};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{0}")]
    Linalg(#[from] LinalgError),
    #[error("partition ({n_t},{k},{n_r},{n_o}) does not tile a {n}x{n} matrix")]
    PartitionMismatch {
        n_t: usize,
        k: usize,
        n_r: usize,
        n_o: usize,
        n: usize,
    },
    #[error("expected a {expected:?} matrix, got {found:?}")]
    KindMismatch {
        expected: MatrixKind,
        found: MatrixKind,
    },
    #[error("invalid load configuration: {0}")]
    InvalidLoad(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Which network representation a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Z-parameters: port voltages against port currents.
    Impedance,
    /// S-parameters: scattered against incident traveling waves.
    Scattering,
}

/// Port groups of the partition, in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortGroup {
    Tx,
    Ris,
    Rx,
    Cluster,
}

/// Port counts per group. `n_o` is zero for free-space scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    pub n_t: usize,
    pub k: usize,
    pub n_r: usize,
    pub n_o: usize,
}

impl Partition {
    pub fn new(n_t: usize, k: usize, n_r: usize) -> Self {
        Self {
            n_t,
            k,
            n_r,
            n_o: 0,
        }
    }

    pub fn total(&self) -> usize {
        self.n_t + self.k + self.n_r + self.n_o
    }

    /// Index range of a group in the port ordering (T, S, R, O).
    pub fn range(&self, group: PortGroup) -> std::ops::Range<usize> {
        match group {
            PortGroup::Tx => 0..self.n_t,
            PortGroup::Ris => self.n_t..self.n_t + self.k,
            PortGroup::Rx => self.n_t + self.k..self.n_t + self.k + self.n_r,
            PortGroup::Cluster => self.n_t + self.k + self.n_r..self.total(),
        }
    }

    pub fn len(&self, group: PortGroup) -> usize {
        self.range(group).len()
    }
}

/// An N×N complex network matrix with the (T, S, R[, O]) port partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedNetworkMatrix {
    kind: MatrixKind,
    data: DMatrix<Complex64>,
    partition: Partition,
    z0: f64,
}

impl PartitionedNetworkMatrix {
    pub fn new(
        kind: MatrixKind,
        data: DMatrix<Complex64>,
        partition: Partition,
        z0: f64,
    ) -> Result<Self, NetworkError> {
        let n = partition.total();
        if data.nrows() != n || data.ncols() != n {
            return Err(NetworkError::PartitionMismatch {
                n_t: partition.n_t,
                k: partition.k,
                n_r: partition.n_r,
                n_o: partition.n_o,
                n: data.nrows(),
            });
        }
        Ok(Self {
            kind,
            data,
            partition,
            z0,
        })
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn reference_impedance(&self) -> f64 {
        self.z0
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// View of the sub-matrix relating the `row` group's response to the
    /// `col` group's excitation.
    pub fn block(&self, row: PortGroup, col: PortGroup) -> DMatrixView<'_, Complex64> {
        let r = self.partition.range(row);
        let c = self.partition.range(col);
        self.data.view((r.start, c.start), (r.len(), c.len()))
    }

    pub fn block_owned(&self, row: PortGroup, col: PortGroup) -> DMatrix<Complex64> {
        self.block(row, col).into_owned()
    }

    pub(crate) fn set_block(
        &mut self,
        row: PortGroup,
        col: PortGroup,
        value: &DMatrix<Complex64>,
    ) -> Result<(), NetworkError> {
        let r = self.partition.range(row);
        let c = self.partition.range(col);
        if value.nrows() != r.len() || value.ncols() != c.len() {
            return Err(NetworkError::Shape(format!(
                "block is {}x{}, expected {}x{}",
                value.nrows(),
                value.ncols(),
                r.len(),
                c.len()
            )));
        }
        self.data
            .view_mut((r.start, c.start), (r.len(), c.len()))
            .copy_from(value);
        Ok(())
    }

    /// Relative Frobenius asymmetry `‖M − Mᵀ‖/‖M‖`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.data.transpose();
        linalg::rel_diff(&self.data, &t)
    }
}

/// S = (Z + Z0·U)⁻¹ (Z − Z0·U).
pub fn z_to_s(z: &PartitionedNetworkMatrix) -> Result<PartitionedNetworkMatrix, NetworkError> {
    if z.kind() != MatrixKind::Impedance {
        return Err(NetworkError::KindMismatch {
            expected: MatrixKind::Impedance,
            found: z.kind(),
        });
    }
    let n = z.n();
    let z0u = linalg::identity(n) * Complex64::from(z.z0);
    let inv = invert("Z + Z0 U", &(z.data() + &z0u))?;
    let s = inv * (z.data() - &z0u);
    PartitionedNetworkMatrix::new(MatrixKind::Scattering, s, z.partition(), z.z0)
}

/// Z = Z0 (U + S)(U − S)⁻¹, the algebraic inverse of [`z_to_s`].
pub fn s_to_z(s: &PartitionedNetworkMatrix) -> Result<PartitionedNetworkMatrix, NetworkError> {
    if s.kind() != MatrixKind::Scattering {
        return Err(NetworkError::KindMismatch {
            expected: MatrixKind::Scattering,
            found: s.kind(),
        });
    }
    let n = s.n();
    let u = linalg::identity(n);
    let inv = invert("U - S", &(&u - s.data()))?;
    let z = (&u + s.data()) * inv * Complex64::from(s.z0);
    PartitionedNetworkMatrix::new(MatrixKind::Impedance, z, s.partition(), s.z0)
}

/// Per-port tunable RIS loads: a reactance in series with a small parasitic
/// resistance, referenced to `Z0`.
#[derive(Debug, Clone)]
pub struct LoadConfig {
    reactances: Vec<f64>,
    parasitic_resistance: f64,
    reference_impedance: f64,
}

impl LoadConfig {
    /// Parasitic resistance must satisfy `r0/Z0 < 0.1` so that the
    /// first-order treatment of the losses stays valid.
    pub fn new(reactances: Vec<f64>, r0: f64, z0: f64) -> Result<Self, NetworkError> {
        if !(z0 > 0.0) {
            return Err(NetworkError::InvalidLoad("Z0 must be positive".to_string()));
        }
        if r0 < 0.0 {
            return Err(NetworkError::InvalidLoad(
                "parasitic resistance must be non-negative".to_string(),
            ));
        }
        if r0 / z0 >= 0.1 {
            return Err(NetworkError::InvalidLoad(format!(
                "r0/Z0 = {:.3} is too large for the small-loss model (must be < 0.1)",
                r0 / z0
            )));
        }
        Ok(Self {
            reactances,
            parasitic_resistance: r0,
            reference_impedance: z0,
        })
    }

    /// Loads from reflection phases: `X = Z0·cot(φ/2)` (the lossless map),
    /// clamped far from the open-circuit pole.
    pub fn from_phases(phases: &[f64], r0: f64, z0: f64) -> Result<Self, NetworkError> {
        let reactances = phases.iter().map(|&p| reactance_for_phase(p, z0)).collect();
        Self::new(reactances, r0, z0)
    }

    pub fn len(&self) -> usize {
        self.reactances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reactances.is_empty()
    }

    pub fn reactances(&self) -> &[f64] {
        &self.reactances
    }

    pub fn parasitic_resistance(&self) -> f64 {
        self.parasitic_resistance
    }

    pub fn reference_impedance(&self) -> f64 {
        self.reference_impedance
    }

    pub fn epsilon(&self) -> f64 {
        self.parasitic_resistance / self.reference_impedance
    }

    /// Load impedances `jX_k + r0`.
    pub fn impedances(&self) -> Vec<Complex64> {
        self.reactances
            .iter()
            .map(|&x| Complex64::new(self.parasitic_resistance, x))
            .collect()
    }

    /// Γ_k = (jX_k − Z0 + r0)/(jX_k + Z0 + r0).
    pub fn gamma_k(&self, k: usize) -> Complex64 {
        gamma_for_reactance(
            self.reactances[k],
            self.parasitic_resistance,
            self.reference_impedance,
        )
    }

    /// Diagonal reflection-coefficient matrix.
    pub fn gamma(&self) -> DMatrix<Complex64> {
        let d: Vec<Complex64> = (0..self.len()).map(|k| self.gamma_k(k)).collect();
        linalg::diag(&d)
    }

    /// Lossless reflection phases `∠((jX̃ − 1)/(jX̃ + 1))`.
    pub fn phases(&self) -> Vec<f64> {
        self.reactances
            .iter()
            .map(|&x| phase_for_reactance(x, self.reference_impedance))
            .collect()
    }
}

/// Γ for a series load `jX + r0` against `Z0`.
pub fn gamma_for_reactance(x: f64, r0: f64, z0: f64) -> Complex64 {
    Complex64::new(r0 - z0, x) / Complex64::new(r0 + z0, x)
}

/// Lossless reflection phase of a pure reactance.
pub fn phase_for_reactance(x: f64, z0: f64) -> f64 {
    let xn = x / z0;
    (Complex64::new(-1.0, xn) / Complex64::new(1.0, xn)).arg()
}

/// `X = Z0·cot(φ/2)`, clamped far from the φ = 0 open-circuit pole.
pub fn reactance_for_phase(phi: f64, z0: f64) -> f64 {
    let half = 0.5 * phi;
    let cot = half.cos() / half.sin();
    if !cot.is_finite() {
        return z0 * 1e12;
    }
    z0 * cot.clamp(-1e12, 1e12)
}

/// RIS port termination as an impedance matrix: diagonal for independent
/// per-port loads, full for interconnected load networks.
#[derive(Debug, Clone)]
pub struct RisLoads {
    z_s: DMatrix<Complex64>,
    z0: f64,
}

impl RisLoads {
    pub fn from_config(cfg: &LoadConfig) -> Self {
        Self {
            z_s: linalg::diag(&cfg.impedances()),
            z0: cfg.reference_impedance(),
        }
    }

    pub fn from_impedances(z: &[Complex64], z0: f64) -> Self {
        Self {
            z_s: linalg::diag(z),
            z0,
        }
    }

    pub fn from_impedance_matrix(z_s: DMatrix<Complex64>, z0: f64) -> Result<Self, NetworkError> {
        if z_s.nrows() != z_s.ncols() {
            return Err(NetworkError::Shape(format!(
                "load matrix must be square, got {}x{}",
                z_s.nrows(),
                z_s.ncols()
            )));
        }
        Ok(Self { z_s, z0 })
    }

    /// Matched loads `Z_S = Z0·U` (zero reflection).
    pub fn matched(k: usize, z0: f64) -> Self {
        Self {
            z_s: linalg::identity(k) * Complex64::from(z0),
            z0,
        }
    }

    pub fn k(&self) -> usize {
        self.z_s.nrows()
    }

    pub fn impedance_matrix(&self) -> &DMatrix<Complex64> {
        &self.z_s
    }

    /// Γ_S = (Z_S + Z0 U)⁻¹ (Z_S − Z0 U).
    pub fn gamma(&self) -> Result<DMatrix<Complex64>, NetworkError> {
        let u = linalg::identity(self.k()) * Complex64::from(self.z0);
        let inv = invert("Z_S + Z0 U", &(&self.z_s + &u))?;
        Ok(inv * (&self.z_s - &u))
    }
}

/// Generator and receiver terminations.
#[derive(Debug, Clone)]
pub struct TerminationConfig {
    pub generator_impedances: Vec<Complex64>,
    pub receiver_loads: Vec<Complex64>,
    pub z0: f64,
}

impl TerminationConfig {
    pub fn new(
        generator_impedances: Vec<Complex64>,
        receiver_loads: Vec<Complex64>,
        z0: f64,
    ) -> Self {
        Self {
            generator_impedances,
            receiver_loads,
            z0,
        }
    }

    /// Matched terminations `Z_g = Z_R = Z0` (Γ_T = Γ_R = 0).
    pub fn matched(n_t: usize, n_r: usize, z0: f64) -> Self {
        Self {
            generator_impedances: vec![Complex64::from(z0); n_t],
            receiver_loads: vec![Complex64::from(z0); n_r],
            z0,
        }
    }

    fn gamma_of(&self, z: &[Complex64]) -> DMatrix<Complex64> {
        let d: Vec<Complex64> = z.iter().map(|zi| (zi - self.z0) / (zi + self.z0)).collect();
        linalg::diag(&d)
    }

    pub fn gamma_t(&self) -> DMatrix<Complex64> {
        self.gamma_of(&self.generator_impedances)
    }

    pub fn gamma_r(&self) -> DMatrix<Complex64> {
        self.gamma_of(&self.receiver_loads)
    }

    pub fn z_g(&self) -> DMatrix<Complex64> {
        linalg::diag(&self.generator_impedances)
    }

    pub fn z_r(&self) -> DMatrix<Complex64> {
        linalg::diag(&self.receiver_loads)
    }

    /// Generator voltages for source waves: `V_g = 2√Z0 (U − Γ_T)⁻¹ a_g`.
    pub fn generator_voltages(
        &self,
        a_g: &DVector<Complex64>,
    ) -> Result<DVector<Complex64>, NetworkError> {
        let n_t = self.generator_impedances.len();
        let inv = invert("U - Γ_T", &(linalg::identity(n_t) - self.gamma_t()))?;
        Ok(inv * a_g * Complex64::from(2.0 * self.z0.sqrt()))
    }
}

fn ris_coupling_inverse(
    s: &PartitionedNetworkMatrix,
    gamma_s: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, NetworkError> {
    let k = s.partition().k;
    if gamma_s.nrows() != k || gamma_s.ncols() != k {
        return Err(NetworkError::Shape(format!(
            "Γ_S is {}x{}, partition has K = {k}",
            gamma_s.nrows(),
            gamma_s.ncols()
        )));
    }
    let s_ss = s.block(PortGroup::Ris, PortGroup::Ris);
    invert("U - Γ_S S_SS", &(linalg::identity(k) - gamma_s * s_ss)).map_err(Into::into)
}

/// S̃_xy = S_xy + S_xS (U − Γ_S S_SS)⁻¹ Γ_S S_Sy.
fn s_tilde(
    s: &PartitionedNetworkMatrix,
    coupling_inv: &DMatrix<Complex64>,
    gamma_s: &DMatrix<Complex64>,
    x: PortGroup,
    y: PortGroup,
) -> DMatrix<Complex64> {
    s.block_owned(x, y)
        + s.block(x, PortGroup::Ris) * coupling_inv * gamma_s * s.block(PortGroup::Ris, y)
}

/// End-to-end channel `b_R = H a_g` in the scattering representation, with
/// arbitrary terminations.
pub fn h_e2e_s_exact(
    s: &PartitionedNetworkMatrix,
    loads: &RisLoads,
    terminations: &TerminationConfig,
) -> Result<DMatrix<Complex64>, NetworkError> {
    expect_kind(s, MatrixKind::Scattering)?;
    let gamma_s = loads.gamma()?;
    let coupling_inv = ris_coupling_inverse(s, &gamma_s)?;
    let gamma_t = terminations.gamma_t();
    let gamma_r = terminations.gamma_r();
    let (n_t, n_r) = (s.partition().n_t, s.partition().n_r);

    let st = |x, y| s_tilde(s, &coupling_inv, &gamma_s, x, y);
    let s_rt = st(PortGroup::Rx, PortGroup::Tx);
    let s_rr = st(PortGroup::Rx, PortGroup::Rx);
    let s_tt = st(PortGroup::Tx, PortGroup::Tx);
    let s_tr = st(PortGroup::Tx, PortGroup::Rx);

    let rr_inv = invert("U - S̃_RR Γ_R", &(linalg::identity(n_r) - &s_rr * &gamma_r))?;
    let s_bar_tt = &s_tt + &s_tr * &gamma_r * &rr_inv * &s_rt;
    let tt_inv = invert(
        "U - Γ_T S̄_TT",
        &(linalg::identity(n_t) - &gamma_t * s_bar_tt),
    )?;
    Ok(rr_inv * s_rt * tt_inv)
}

/// End-to-end channel with matched transmitter and receiver ports:
/// `H = S_RT + S_RS (U − Γ_S S_SS)⁻¹ Γ_S S_ST`.
pub fn h_e2e_s_matched(
    s: &PartitionedNetworkMatrix,
    loads: &RisLoads,
) -> Result<DMatrix<Complex64>, NetworkError> {
    expect_kind(s, MatrixKind::Scattering)?;
    let gamma_s = loads.gamma()?;
    let coupling_inv = ris_coupling_inverse(s, &gamma_s)?;
    Ok(s_tilde(
        s,
        &coupling_inv,
        &gamma_s,
        PortGroup::Rx,
        PortGroup::Tx,
    ))
}

/// Z̃_xy = Z_xy − Z_xS (Z_S + Z_SS)⁻¹ Z_Sy.
fn z_tilde(
    z: &PartitionedNetworkMatrix,
    loaded_inv: &DMatrix<Complex64>,
    x: PortGroup,
    y: PortGroup,
) -> DMatrix<Complex64> {
    z.block_owned(x, y) - z.block(x, PortGroup::Ris) * loaded_inv * z.block(PortGroup::Ris, y)
}

fn loaded_ris_inverse(
    z: &PartitionedNetworkMatrix,
    loads: &RisLoads,
) -> Result<DMatrix<Complex64>, NetworkError> {
    let k = z.partition().k;
    if loads.k() != k {
        return Err(NetworkError::Shape(format!(
            "load matrix has K = {}, partition has K = {k}",
            loads.k()
        )));
    }
    let z_ss = z.block(PortGroup::Ris, PortGroup::Ris);
    invert("Z_S + Z_SS", &(loads.impedance_matrix() + z_ss)).map_err(Into::into)
}

/// End-to-end channel `V_R = H V_g` in the impedance representation,
/// without approximations.
pub fn h_e2e_z_exact(
    z: &PartitionedNetworkMatrix,
    loads: &RisLoads,
    terminations: &TerminationConfig,
) -> Result<DMatrix<Complex64>, NetworkError> {
    expect_kind(z, MatrixKind::Impedance)?;
    let loaded_inv = loaded_ris_inverse(z, loads)?;
    let zt = |x, y| z_tilde(z, &loaded_inv, x, y);
    let z_rt = zt(PortGroup::Rx, PortGroup::Tx);
    let z_rr = zt(PortGroup::Rx, PortGroup::Rx);
    let z_tt = zt(PortGroup::Tx, PortGroup::Tx);
    let z_tr = zt(PortGroup::Tx, PortGroup::Rx);
    let z_g = terminations.z_g();
    let z_r = terminations.z_r();

    let tt_inv = invert("Z_g + Z̃_TT", &(&z_g + &z_tt))?;
    let z_bar_rr = &z_rr - &z_rt * &tt_inv * &z_tr;
    let rr_inv = invert("Z_R + Z̄_RR", &(&z_r + z_bar_rr))?;
    Ok(z_r * rr_inv * z_rt * tt_inv)
}

/// Impedance-representation channel under the weak transmitter/receiver
/// coupling approximation: `H ≈ Z_R (Z_R + Z_RR)⁻¹ Z̃_RT (Z_g + Z_TT)⁻¹`.
pub fn h_e2e_z_approx(
    z: &PartitionedNetworkMatrix,
    loads: &RisLoads,
    terminations: &TerminationConfig,
) -> Result<DMatrix<Complex64>, NetworkError> {
    expect_kind(z, MatrixKind::Impedance)?;
    let loaded_inv = loaded_ris_inverse(z, loads)?;
    let z_rt = z_tilde(z, &loaded_inv, PortGroup::Rx, PortGroup::Tx);
    let z_g = terminations.z_g();
    let z_r = terminations.z_r();
    let tt_inv = invert(
        "Z_g + Z_TT",
        &(&z_g + z.block(PortGroup::Tx, PortGroup::Tx)),
    )?;
    let rr_inv = invert(
        "Z_R + Z_RR",
        &(&z_r + z.block(PortGroup::Rx, PortGroup::Rx)),
    )?;
    Ok(z_r * rr_inv * z_rt * tt_inv)
}

/// Conventional communication-theory channel `H = H_RT + H_RS Γ_S H_ST`,
/// with the scattering blocks used as the channel matrices. `H_RT` is taken
/// as zero when the direct link is physically blocked (the model carries no
/// structural reradiation).
pub fn h_ct_conventional(
    s: &PartitionedNetworkMatrix,
    loads: &RisLoads,
    direct_link_blocked: bool,
) -> Result<DMatrix<Complex64>, NetworkError> {
    expect_kind(s, MatrixKind::Scattering)?;
    let gamma_s = loads.gamma()?;
    let reflected =
        s.block(PortGroup::Rx, PortGroup::Ris) * &gamma_s * s.block(PortGroup::Ris, PortGroup::Tx);
    if direct_link_blocked {
        Ok(reflected)
    } else {
        Ok(s.block_owned(PortGroup::Rx, PortGroup::Tx) + reflected)
    }
}

/// Structural-scattering matrix from the impedance blocks:
/// `S_StSc = −(Z_RS / 2Z0)(Z_SS + Z0 U)⁻¹ Z_ST`.
///
/// This is the signal reradiated by the surface when its loads are matched
/// to the reference impedance (Γ_S = 0); it decomposes the converted
/// scattering block as `S_RT = Z_RT/(2Z0) + S_StSc` when the transmitter and
/// receiver couple to the scene only through the surface.
pub fn structural_scattering(
    z: &PartitionedNetworkMatrix,
) -> Result<DMatrix<Complex64>, NetworkError> {
    expect_kind(z, MatrixKind::Impedance)?;
    let k = z.partition().k;
    let z0 = z.reference_impedance();
    let inv = invert(
        "Z_SS + Z0 U",
        &(z.block_owned(PortGroup::Ris, PortGroup::Ris)
            + linalg::identity(k) * Complex64::from(z0)),
    )?;
    Ok(z.block(PortGroup::Rx, PortGroup::Ris)
        * inv
        * z.block(PortGroup::Ris, PortGroup::Tx)
        * Complex64::from(-1.0 / (2.0 * z0)))
}

fn expect_kind(m: &PartitionedNetworkMatrix, expected: MatrixKind) -> Result<(), NetworkError> {
    if m.kind() != expected {
        return Err(NetworkError::KindMismatch {
            expected,
            found: m.kind(),
        });
    }
    Ok(())
}

/// Deterministic pseudo-random passive scenes for tests across the crate.
#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub fn random_passive_scattering(
        n_t: usize,
        k: usize,
        n_r: usize,
        seed: u64,
    ) -> PartitionedNetworkMatrix {
        z_to_s(&random_passive_impedance(n_t, k, n_r, seed)).unwrap()
    }

    /// Symmetric Z with positive-definite real part, so the network is
    /// passive and every conversion factor stays well conditioned.
    pub fn random_passive_impedance(
        n_t: usize,
        k: usize,
        n_r: usize,
        seed: u64,
    ) -> PartitionedNetworkMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = n_t + k + n_r;
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut x = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        x = (&x + x.transpose()) * 0.5;
        let r = &a * a.transpose() * 10.0 + DMatrix::identity(n, n) * 5.0;
        let data = DMatrix::from_fn(n, n, |i, j| Complex64::new(r[(i, j)], 30.0 * x[(i, j)]));
        PartitionedNetworkMatrix::new(
            MatrixKind::Impedance,
            data,
            Partition::new(n_t, k, n_r),
            50.0,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff;
    use approx::assert_relative_eq;

    const Z0: f64 = 50.0;

    fn one_port(z: Complex64) -> PartitionedNetworkMatrix {
        PartitionedNetworkMatrix::new(
            MatrixKind::Impedance,
            DMatrix::from_element(1, 1, z),
            Partition::new(0, 0, 1),
            Z0,
        )
        .unwrap()
    }

    #[test]
    fn one_port_conversions_match_hand_values() {
        let s = z_to_s(&one_port(Complex64::from(Z0))).unwrap();
        assert_relative_eq!(s.data()[(0, 0)].norm(), 0.0, epsilon = 1e-15);

        let s = z_to_s(&one_port(Complex64::from(3.0 * Z0))).unwrap();
        assert_relative_eq!(s.data()[(0, 0)].re, 0.5, epsilon = 1e-15);

        let z = s_to_z(&s).unwrap();
        assert_relative_eq!(z.data()[(0, 0)].re, 3.0 * Z0, epsilon = 1e-12);
    }

    #[test]
    fn s_zero_maps_to_reference_impedance() {
        let s = PartitionedNetworkMatrix::new(
            MatrixKind::Scattering,
            DMatrix::zeros(3, 3),
            Partition::new(1, 1, 1),
            Z0,
        )
        .unwrap();
        let z = s_to_z(&s).unwrap();
        assert!(rel_diff(z.data(), &(linalg::identity(3) * Complex64::from(Z0))) < 1e-14);
    }

    #[test]
    fn gamma_limits() {
        // Short at the reference plane: Γ = −1.
        let cfg = LoadConfig::new(vec![0.0], 0.0, Z0).unwrap();
        assert_relative_eq!(
            (cfg.gamma_k(0) + Complex64::from(1.0)).norm(),
            0.0,
            epsilon = 1e-15
        );
        // Open circuit limit: Γ → +1.
        let cfg = LoadConfig::new(vec![1e9], 0.0, Z0).unwrap();
        assert!((cfg.gamma_k(0) - Complex64::from(1.0)).norm() < 1e-6);
        // Matched load through a direct impedance entry.
        let loads = RisLoads::from_impedances(&[Complex64::from(Z0)], Z0);
        assert!(loads.gamma().unwrap()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn lossless_gamma_has_unit_magnitude_and_losses_shrink_it() {
        for x in [-250.0, -30.0, 0.0, 17.0, 400.0] {
            let g = gamma_for_reactance(x, 0.0, Z0);
            assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-14);
            let g = gamma_for_reactance(x, 0.2, Z0);
            assert!(g.norm() < 1.0);
        }
    }

    #[test]
    fn phase_reactance_roundtrip() {
        for phi in [-3.0, -1.2, 0.4, 2.9] {
            let x = reactance_for_phase(phi, Z0);
            assert_relative_eq!(phase_for_reactance(x, Z0), phi, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_large_parasitic_resistance() {
        assert!(LoadConfig::new(vec![0.0], 5.1, Z0).is_err());
    }

    #[test]
    fn matched_exact_channel_reduces_to_s_rt_when_gamma_s_zero() {
        let s = random_passive_scattering(1, 3, 1, 7);
        let loads = RisLoads::matched(3, Z0);
        let term = TerminationConfig::matched(1, 1, Z0);
        let h_exact = h_e2e_s_exact(&s, &loads, &term).unwrap();
        let h_matched = h_e2e_s_matched(&s, &loads).unwrap();
        assert!(rel_diff(&h_exact, &h_matched) < 1e-12);
        assert!(rel_diff(&h_matched, &s.block_owned(PortGroup::Rx, PortGroup::Tx)) < 1e-14);
    }

    #[test]
    fn ct_model_matches_matched_channel_iff_no_mutual_coupling() {
        let mut s = random_passive_scattering(1, 4, 1, 3);
        let loads = RisLoads::from_config(
            &LoadConfig::new(vec![11.0, -40.0, 95.0, -210.0], 0.0, Z0).unwrap(),
        );
        let h_ct = h_ct_conventional(&s, &loads, false).unwrap();
        let h = h_e2e_s_matched(&s, &loads).unwrap();
        assert!(rel_diff(&h_ct, &h) > 1e-6, "coupled model should differ");

        s.set_block(PortGroup::Ris, PortGroup::Ris, &DMatrix::zeros(4, 4))
            .unwrap();
        let h_ct = h_ct_conventional(&s, &loads, false).unwrap();
        let h = h_e2e_s_matched(&s, &loads).unwrap();
        assert!(rel_diff(&h_ct, &h) < 1e-13);
    }

    #[test]
    fn blocked_ct_model_without_reflection_is_exactly_zero() {
        let s = random_passive_scattering(1, 4, 1, 5);
        let loads = RisLoads::matched(4, Z0);
        let h = h_ct_conventional(&s, &loads, true).unwrap();
        assert_eq!(linalg::norm_fro(&h), 0.0);
    }

    #[test]
    fn scalar_matched_channel_matches_hand_formula() {
        let s = random_passive_scattering(1, 1, 1, 11);
        let gamma = Complex64::from_polar(1.0, 0.8);
        let loads = RisLoads::from_impedance_matrix(
            // Z from Γ for a single port: Z = Z0 (1+Γ)/(1−Γ).
            DMatrix::from_element(
                1,
                1,
                Complex64::from(Z0) * (Complex64::from(1.0) + gamma)
                    / (Complex64::from(1.0) - gamma),
            ),
            Z0,
        )
        .unwrap();
        let h = h_e2e_s_matched(&s, &loads).unwrap()[(0, 0)];
        let s_rt = s.block(PortGroup::Rx, PortGroup::Tx)[(0, 0)];
        let s_rs = s.block(PortGroup::Rx, PortGroup::Ris)[(0, 0)];
        let s_st = s.block(PortGroup::Ris, PortGroup::Tx)[(0, 0)];
        let s_ss = s.block(PortGroup::Ris, PortGroup::Ris)[(0, 0)];
        let hand = s_rt + s_rs * gamma * s_st / (Complex64::from(1.0) - gamma * s_ss);
        assert!((h - hand).norm() < 1e-12 * hand.norm());
    }

    #[test]
    fn amplitude_depends_on_phase_through_self_coupling() {
        let s_ss = Complex64::new(0.3, -0.2);
        let mags: Vec<f64> = (0..16)
            .map(|i| {
                let gamma = Complex64::from_polar(1.0, i as f64 * std::f64::consts::TAU / 16.0);
                (Complex64::from(1.0) - gamma * s_ss).norm().recip()
            })
            .collect();
        let max = mags.iter().cloned().fold(f64::MIN, f64::max);
        let min = mags.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            max / min > 1.2,
            "magnitude should vary over the phase sweep"
        );
        assert!(mags.iter().any(|&m| m < 1.0));
    }

    use super::tests_support::random_passive_scattering;

    proptest::proptest! {
        /// Conversion roundtrip on arbitrary passive partitioned networks.
        #[test]
        fn z_to_s_roundtrips(
            n_t in 1usize..3,
            k in 1usize..7,
            n_r in 1usize..3,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let z = super::tests_support::random_passive_impedance(n_t, k, n_r, seed);
            let s = z_to_s(&z).unwrap();
            let back = s_to_z(&s).unwrap();
            proptest::prop_assert!(rel_diff(back.data(), z.data()) < 1e-9);
            proptest::prop_assert_eq!(s.partition(), z.partition());
        }
    }
}
