//! Scattering-cluster augmentation of the impedance model.
//!
//! A multipath cluster is a set of loaded thin-wire dipoles occupying the
//! fourth (O) port block. Eliminating the loaded cluster ports by a Schur
//! complement folds their effect into effective (T, S, R) blocks
//! `Z_xOy = Z_xy − Z_xO (Z_US + Z_OO)⁻¹ Z_Oy`, which drop into every
//! free-space formula unchanged. The end-to-end scattering response then
//! splits into the direct link, first-order cluster scattering, the
//! surface's structural term with cluster-modified coupling, and a
//! higher-order remainder.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::em_scene::{assemble_z_matrix, DipoleElement, GeometryError, Scenario};
use crate::linalg::{self, invert};
use crate::network::{MatrixKind, NetworkError, Partition, PartitionedNetworkMatrix, PortGroup};

#[derive(Debug, Error)]
pub enum MultipathError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("cluster error: {0}")]
    Cluster(String),
}

/// Specification of one scattering cluster.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub object_count: usize,
    pub center: Vector3<f64>,
    /// Objects are placed uniformly at random within this radius, m.
    pub spread: f64,
    pub object_template: DipoleElement,
    /// Diagonal object loads; zero for short-circuited scatterers.
    pub object_loads: Vec<Complex64>,
}

impl ClusterSpec {
    /// Short-circuited scatterers, the model for natural objects.
    pub fn short_circuited(
        object_count: usize,
        center: Vector3<f64>,
        spread: f64,
        object_template: DipoleElement,
    ) -> Self {
        Self {
            object_count,
            center,
            spread,
            object_template,
            object_loads: vec![Complex64::new(0.0, 0.0); object_count],
        }
    }

    /// Places the objects with a seeded generator; rejection sampling keeps
    /// the wires from intersecting.
    pub fn place(&self, seed: u64) -> Result<Vec<DipoleElement>, MultipathError> {
        if self.object_loads.len() != self.object_count {
            return Err(MultipathError::Cluster(format!(
                "{} loads for {} objects",
                self.object_loads.len(),
                self.object_count
            )));
        }
        if self.object_count > 0 && !(self.spread > 0.0) {
            return Err(MultipathError::Cluster(
                "spread must be positive".to_string(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placed: Vec<DipoleElement> = Vec::with_capacity(self.object_count);
        let clearance = 4.0 * self.object_template.radius;
        for i in 0..self.object_count {
            let mut attempts = 0;
            loop {
                let candidate = self
                    .object_template
                    .at(self.center + sample_ball(&mut rng) * self.spread);
                let clashes = placed.iter().any(|e| wires_clash(e, &candidate, clearance));
                if !clashes {
                    placed.push(candidate);
                    break;
                }
                attempts += 1;
                if attempts > 10_000 {
                    return Err(MultipathError::Cluster(format!(
                        "could not place object {i} without intersections; spread too small"
                    )));
                }
            }
        }
        Ok(placed)
    }
}

fn sample_ball(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            return v;
        }
    }
}

fn wires_clash(a: &DipoleElement, b: &DipoleElement, clearance: f64) -> bool {
    let lateral =
        ((a.position.x - b.position.x).powi(2) + (a.position.y - b.position.y).powi(2)).sqrt();
    if lateral > (a.radius + b.radius).max(clearance) {
        return false;
    }
    let (a_lo, a_hi) = (a.position.z - a.length / 2.0, a.position.z + a.length / 2.0);
    let (b_lo, b_hi) = (b.position.z - b.length / 2.0, b.position.z + b.length / 2.0);
    a_lo <= b_hi && b_lo <= a_hi
}

/// Impedance blocks of a scene with a cluster, together with the
/// cluster-folded compositions.
#[derive(Debug, Clone)]
pub struct AugmentedBlocks {
    pub z_rt: DMatrix<Complex64>,
    pub z_rs: DMatrix<Complex64>,
    pub z_st: DMatrix<Complex64>,
    pub z_ss: DMatrix<Complex64>,
    pub z_ro: DMatrix<Complex64>,
    pub z_ot: DMatrix<Complex64>,
    pub z_so: DMatrix<Complex64>,
    pub z_os: DMatrix<Complex64>,
    pub z_oo: DMatrix<Complex64>,
    /// Diagonal cluster loads.
    pub z_us: DMatrix<Complex64>,
    /// `(Z_US + Z_OO)⁻¹`.
    pub cluster_green: DMatrix<Complex64>,
    /// `Z_ROT = Z_RT − Z_RO (Z_US + Z_OO)⁻¹ Z_OT`, and so on.
    pub z_rot: DMatrix<Complex64>,
    pub z_ros: DMatrix<Complex64>,
    pub z_sot: DMatrix<Complex64>,
    /// Cluster correction of the surface coupling (the effective coupling
    /// is `Z_SS + Z_SOS`).
    pub z_sos: DMatrix<Complex64>,
    pub z0: f64,
}

impl AugmentedBlocks {
    /// Extracts and composes the blocks of an assembled impedance matrix
    /// whose partition carries a cluster block.
    pub fn from_matrix(
        z: &PartitionedNetworkMatrix,
        object_loads: &[Complex64],
    ) -> Result<Self, MultipathError> {
        if z.kind() != MatrixKind::Impedance {
            return Err(NetworkError::KindMismatch {
                expected: MatrixKind::Impedance,
                found: z.kind(),
            }
            .into());
        }
        let p = z.partition();
        if object_loads.len() != p.n_o {
            return Err(MultipathError::Cluster(format!(
                "{} loads for {} cluster ports",
                object_loads.len(),
                p.n_o
            )));
        }
        let z_us = linalg::diag(object_loads);
        let z_oo = z.block_owned(PortGroup::Cluster, PortGroup::Cluster);
        let cluster_green = invert("Z_US + Z_OO", &(&z_us + &z_oo)).map_err(NetworkError::from)?;

        let z_rt = z.block_owned(PortGroup::Rx, PortGroup::Tx);
        let z_rs = z.block_owned(PortGroup::Rx, PortGroup::Ris);
        let z_st = z.block_owned(PortGroup::Ris, PortGroup::Tx);
        let z_ss = z.block_owned(PortGroup::Ris, PortGroup::Ris);
        let z_ro = z.block_owned(PortGroup::Rx, PortGroup::Cluster);
        let z_ot = z.block_owned(PortGroup::Cluster, PortGroup::Tx);
        let z_so = z.block_owned(PortGroup::Ris, PortGroup::Cluster);
        let z_os = z.block_owned(PortGroup::Cluster, PortGroup::Ris);

        let z_rot = &z_rt - &z_ro * &cluster_green * &z_ot;
        let z_ros = &z_rs - &z_ro * &cluster_green * &z_os;
        let z_sot = &z_st - &z_so * &cluster_green * &z_ot;
        let z_sos = -(&z_so * &cluster_green * &z_os);

        Ok(Self {
            z_rt,
            z_rs,
            z_st,
            z_ss,
            z_ro,
            z_ot,
            z_so,
            z_os,
            z_oo,
            z_us,
            cluster_green,
            z_rot,
            z_ros,
            z_sot,
            z_sos,
            z0: z.reference_impedance(),
        })
    }

    /// Effective surface coupling `Z̆_SOS = Z_SS + Z_SOS`.
    pub fn z_sos_effective(&self) -> DMatrix<Complex64> {
        &self.z_ss + &self.z_sos
    }
}

/// Assembles the impedance matrix of a scene with cluster elements and
/// composes the augmented blocks. Direct-link handling is the caller's
/// business: nullify the assembled matrix first if required.
pub fn assemble_augmented(
    scenario: &Scenario,
    object_loads: &[Complex64],
) -> Result<AugmentedBlocks, MultipathError> {
    let z = assemble_z_matrix(scenario)?;
    AugmentedBlocks::from_matrix(&z, object_loads)
}

/// Effective receiver-transmitter coupling with the surface loaded:
/// `Z̃_ROT = Z_ROT − Z_ROS (Z_S + Z̆_SOS)⁻¹ Z_SOT`.
pub fn effective_z_rt_multipath(
    blocks: &AugmentedBlocks,
    z_s: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, MultipathError> {
    let loaded =
        invert("Z_S + Z̆_SOS", &(z_s + blocks.z_sos_effective())).map_err(NetworkError::from)?;
    Ok(&blocks.z_rot - &blocks.z_ros * loaded * &blocks.z_sot)
}

/// Folds the loaded cluster ports out of a partitioned impedance matrix,
/// returning the effective (T, S, R) matrix whose blocks are the `Z_xOy`
/// compositions. With no cluster ports this is a plain copy.
pub fn reduce_cluster(
    z: &PartitionedNetworkMatrix,
    object_loads: &[Complex64],
) -> Result<PartitionedNetworkMatrix, MultipathError> {
    if z.kind() != MatrixKind::Impedance {
        return Err(NetworkError::KindMismatch {
            expected: MatrixKind::Impedance,
            found: z.kind(),
        }
        .into());
    }
    let p = z.partition();
    if object_loads.len() != p.n_o {
        return Err(MultipathError::Cluster(format!(
            "{} loads for {} cluster ports",
            object_loads.len(),
            p.n_o
        )));
    }
    let n_a = p.n_t + p.k + p.n_r;
    let data = z.data();
    let a = data.view((0, 0), (n_a, n_a)).into_owned();
    let reduced = if p.n_o == 0 {
        a
    } else {
        let b = data.view((0, n_a), (n_a, p.n_o)).into_owned();
        let c = data.view((n_a, 0), (p.n_o, n_a)).into_owned();
        let z_oo = data.view((n_a, n_a), (p.n_o, p.n_o)).into_owned();
        let green = invert("Z_US + Z_OO", &(linalg::diag(object_loads) + z_oo))
            .map_err(NetworkError::from)?;
        a - b * green * c
    };
    PartitionedNetworkMatrix::new(
        MatrixKind::Impedance,
        reduced,
        Partition::new(p.n_t, p.k, p.n_r),
        z.reference_impedance(),
    )
    .map_err(Into::into)
}

/// The four constituents of the end-to-end scattering block under
/// multipath.
#[derive(Debug, Clone)]
pub struct SRotDecomposition {
    /// `Z_RT / 2Z0`: the physical direct link.
    pub direct: DMatrix<Complex64>,
    /// First-order scattering off the cluster, surface absent.
    pub cluster_first_order: DMatrix<Complex64>,
    /// Structural scattering with the cluster-modified surface coupling.
    pub structural_modified: DMatrix<Complex64>,
    /// Everything of second and higher order, by subtraction.
    pub delta_residual: DMatrix<Complex64>,
    /// The full `S_ROT` the terms sum to.
    pub s_rot: DMatrix<Complex64>,
}

impl SRotDecomposition {
    pub fn sum(&self) -> DMatrix<Complex64> {
        &self.direct + &self.cluster_first_order + &self.structural_modified + &self.delta_residual
    }
}

/// Splits `S_ROT` into direct, first-order cluster, modified structural, and
/// higher-order parts. The first three are explicit; the remainder is exact
/// by subtraction.
pub fn s_rot_decompose(blocks: &AugmentedBlocks) -> Result<SRotDecomposition, MultipathError> {
    let z0 = blocks.z0;
    let k = blocks.z_ss.nrows();
    let scale = Complex64::from(1.0 / (2.0 * z0));
    let b = invert(
        "Z0 U + Z̆_SOS",
        &(linalg::identity(k) * Complex64::from(z0) + blocks.z_sos_effective()),
    )
    .map_err(NetworkError::from)?;

    let direct = &blocks.z_rt * scale;
    let cluster_first_order = -(&blocks.z_ro * &blocks.cluster_green * &blocks.z_ot) * scale;
    let structural_modified = -(&blocks.z_rs * &b * &blocks.z_st) * scale;
    let s_rot = (&blocks.z_rot - &blocks.z_ros * &b * &blocks.z_sot) * scale;
    let delta_residual = &s_rot - &direct - &cluster_first_order - &structural_modified;
    Ok(SRotDecomposition {
        direct,
        cluster_first_order,
        structural_modified,
        delta_residual,
        s_rot,
    })
}

/// The transmitter → cluster → surface → receiver term of the higher-order
/// remainder: `Z_RS (Z0 U + Z̆_SOS)⁻¹ Z_SO (Z_US + Z_OO)⁻¹ Z_OT / 2Z0`.
pub fn delta_first_term(blocks: &AugmentedBlocks) -> Result<DMatrix<Complex64>, MultipathError> {
    let z0 = blocks.z0;
    let k = blocks.z_ss.nrows();
    let b = invert(
        "Z0 U + Z̆_SOS",
        &(linalg::identity(k) * Complex64::from(z0) + blocks.z_sos_effective()),
    )
    .map_err(NetworkError::from)?;
    Ok(&blocks.z_rs
        * b
        * &blocks.z_so
        * &blocks.cluster_green
        * &blocks.z_ot
        * Complex64::from(1.0 / (2.0 * z0)))
}
