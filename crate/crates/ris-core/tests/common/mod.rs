//! Shared scene builders and helpers for the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_core::em_scene::{
    assemble_z_matrix, expand_grid, free_space_tr_matrix, nullify_direct_link, DipoleElement,
    RisGridSpec, Scenario,
};
use ris_core::network::{z_to_s, MatrixKind, Partition, PartitionedNetworkMatrix};
use ris_core::optimizer::OptState;
use ris_core::SPEED_OF_LIGHT;

pub const F: f64 = 28.0e9;
pub const Z0: f64 = 50.0;

pub fn lambda() -> f64 {
    SPEED_OF_LIGHT / F
}

/// The standard dipole of the test scenes: 0.46λ long, λ/500 radius.
pub fn template() -> DipoleElement {
    DipoleElement::z_oriented(Vector3::zeros(), 0.46 * lambda(), lambda() / 500.0)
}

/// Receiver position at angle asin(k/4) on the 4 m arc.
pub fn rx_position(k: u32) -> Vector3<f64> {
    let psi = (k as f64 / 4.0).asin();
    Vector3::new(4.0 * psi.cos(), 4.0 * psi.sin(), 0.0)
}

/// Desk-scale scene: an n_y × n_z grid at the origin, transmitter at
/// (4, 0, 0), receiver on the 4 m arc.
pub fn desk_scene(n_y: usize, n_z: usize, d_y_wl: f64, rx_k: u32) -> Scenario {
    let grid = RisGridSpec {
        n_y,
        n_z,
        d_y: d_y_wl * lambda(),
        d_z: 0.75 * lambda(),
        center: Vector3::zeros(),
    };
    let ris = expand_grid(&grid, &template()).unwrap();
    Scenario {
        frequency: F,
        reference_impedance: Z0,
        tx_elements: vec![template().at(Vector3::new(4.0, 0.0, 0.0))],
        ris_elements: ris,
        rx_elements: vec![template().at(rx_position(rx_k))],
        cluster_elements: vec![],
        direct_link_blocked: true,
    }
}

/// Assembles, nullifies the direct link, and converts.
pub fn nulled_matrices(scene: &Scenario) -> (PartitionedNetworkMatrix, PartitionedNetworkMatrix) {
    let z = assemble_z_matrix(scene).unwrap();
    let z_free = free_space_tr_matrix(scene).unwrap();
    let z_nulled = nullify_direct_link(&z, &z_free).unwrap();
    let s = z_to_s(&z_nulled).unwrap();
    (z_nulled, s)
}

/// Deterministic random passive partitioned impedance matrix: symmetric
/// with positive-definite real part.
pub fn random_passive_z(n_t: usize, k: usize, n_r: usize, seed: u64) -> PartitionedNetworkMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_t + k + n_r;
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut x = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    x = (&x + x.transpose()) * 0.5;
    let r = &a * a.transpose() * 10.0 + DMatrix::identity(n, n) * 5.0;
    let data = DMatrix::from_fn(n, n, |i, j| Complex64::new(r[(i, j)], 30.0 * x[(i, j)]));
    PartitionedNetworkMatrix::new(MatrixKind::Impedance, data, Partition::new(n_t, k, n_r), Z0)
        .unwrap()
}

pub fn random_passive_s(n_t: usize, k: usize, n_r: usize, seed: u64) -> PartitionedNetworkMatrix {
    z_to_s(&random_passive_z(n_t, k, n_r, seed)).unwrap()
}

pub fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// First trace iteration whose power is within 0.5 dB of the run's final.
pub fn iterations_to_within_half_db(state: &OptState) -> usize {
    let threshold = state.final_power().unwrap() * 10f64.powf(-0.05);
    state
        .trace
        .iter()
        .find(|t| t.received_power >= threshold)
        .map(|t| t.iteration)
        .unwrap()
}
