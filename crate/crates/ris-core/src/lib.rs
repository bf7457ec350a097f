//! Multiport network modeling and load optimization for RIS-aided channels.
//!
//! An RIS-aided wireless link (transmitter, reconfigurable intelligent
//! surface, receiver, optionally a cluster of passive scatterers) is modeled
//! as an N-port network. The crate provides:
//!
//! - [`em_scene`]: scene geometry and assembly of the partitioned impedance
//!   matrix from an analytical thin-wire dipole model (induced-EMF method),
//!   including direct-link nullification.
//! - [`network`]: partitioned Z/S matrices, Z↔S conversion, reflection
//!   coefficients, exact and approximate end-to-end channels, the
//!   conventional communication-theory baseline, and structural-scattering
//!   extraction.
//! - [`optimizer`]: iterative tunable-load optimizers working on the
//!   scattering representation (uniform-increment, jointly optimized
//!   step sizes, specular-suppression variant), an impedance-domain
//!   baseline, a coupling-ignorant closed form, and a brute-force oracle.
//! - [`multipath`]: scattering-cluster augmentation of the impedance model
//!   and decomposition of the end-to-end scattering response.
//! - [`pattern`]: reradiation patterns swept by a probe receiver over an
//!   angular arc, with lobe extraction.
//! - [`io`]: the plain-text partitioned matrix file format used to exchange
//!   matrices with external tools.
//!
//! All matrices are dense complex (`nalgebra::DMatrix<Complex64>`). Every
//! operation is a pure function over immutable inputs; matrix assembly and
//! pattern sweeps parallelize internally with deterministic results.

pub mod em_scene;
pub mod io;
pub mod linalg;
pub mod multipath;
pub mod network;
pub mod optimizer;
pub mod pattern;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space wave impedance, ohm.
pub const ETA_0: f64 = 376.730_313_668;

pub use em_scene::{DipoleElement, RisGridSpec, Scenario};
pub use network::{
    LoadConfig, MatrixKind, Partition, PartitionedNetworkMatrix, PortGroup, RisLoads,
    TerminationConfig,
};
pub use optimizer::{AlgoParams, FeasibleSet, OptState};
