//! Closed-form identities between the impedance and scattering
//! representations, checked on dipole scenes and random passive networks.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use ris_core::em_scene::assemble_z_matrix;
use ris_core::linalg::{identity, invert, rel_diff};
use ris_core::network::{
    h_e2e_s_matched, h_e2e_z_approx, h_e2e_z_exact, structural_scattering, z_to_s, MatrixKind,
    Partition, PartitionedNetworkMatrix, PortGroup, RisLoads, TerminationConfig,
};

/// Applies the weak-coupling premises to an assembled impedance matrix:
/// reference self-impedances at the ends, no transmitter/receiver feeds
/// except through the surface path.
fn premise_z(keep_st_rs: bool) -> PartitionedNetworkMatrix {
    let scene = desk_scene(4, 2, 0.25, 2);
    let z = assemble_z_matrix(&scene).unwrap();
    let p = z.partition();
    let k = p.k;
    let mut data = z.data().clone();
    let z0c = Complex64::from(Z0);
    let set_zero =
        |data: &mut DMatrix<Complex64>, r: std::ops::Range<usize>, c: std::ops::Range<usize>| {
            data.view_mut((r.start, c.start), (r.len(), c.len()))
                .fill(Complex64::new(0.0, 0.0));
        };
    data[(0, 0)] = z0c;
    let r_idx = 1 + k;
    data[(r_idx, r_idx)] = z0c;
    set_zero(&mut data, p.range(PortGroup::Tx), p.range(PortGroup::Ris));
    set_zero(&mut data, p.range(PortGroup::Tx), p.range(PortGroup::Rx));
    set_zero(&mut data, p.range(PortGroup::Ris), p.range(PortGroup::Rx));
    if !keep_st_rs {
        set_zero(&mut data, p.range(PortGroup::Ris), p.range(PortGroup::Tx));
        set_zero(&mut data, p.range(PortGroup::Rx), p.range(PortGroup::Ris));
    }
    PartitionedNetworkMatrix::new(MatrixKind::Impedance, data, p, Z0).unwrap()
}

#[test]
fn block_conversion_relations_under_premises() {
    let z = premise_z(true);
    let s = z_to_s(&z).unwrap();
    let k = z.partition().k;
    let z0c = Complex64::from(Z0);
    let coupling_inv = invert(
        "Z_SS + Z0 U",
        &(z.block_owned(PortGroup::Ris, PortGroup::Ris) + identity(k) * z0c),
    )
    .unwrap();

    // S_ST = (Z_SS + Z0 U)^{-1} Z_ST
    let s_st = &coupling_inv * z.block_owned(PortGroup::Ris, PortGroup::Tx);
    assert!(rel_diff(&s.block_owned(PortGroup::Ris, PortGroup::Tx), &s_st) < 1e-10);

    // S_RT = Z_RT/(2Z0) − Z_RS/(2Z0) (Z_SS + Z0 U)^{-1} Z_ST
    let s_rt = z.block_owned(PortGroup::Rx, PortGroup::Tx) * Complex64::from(1.0 / (2.0 * Z0))
        - z.block_owned(PortGroup::Rx, PortGroup::Ris)
            * Complex64::from(1.0 / (2.0 * Z0))
            * &coupling_inv
            * z.block_owned(PortGroup::Ris, PortGroup::Tx);
    assert!(rel_diff(&s.block_owned(PortGroup::Rx, PortGroup::Tx), &s_rt) < 1e-10);

    // S_SS = (Z_SS + Z0 U)^{-1}(Z_SS − Z0 U)
    let s_ss = &coupling_inv * (z.block_owned(PortGroup::Ris, PortGroup::Ris) - identity(k) * z0c);
    assert!(rel_diff(&s.block_owned(PortGroup::Ris, PortGroup::Ris), &s_ss) < 1e-10);

    // S_RS = Z_RS/(2Z0) − Z_RS/(2Z0) (Z_SS + Z0 U)^{-1}(Z_SS − Z0 U)
    let z_rs = z.block_owned(PortGroup::Rx, PortGroup::Ris);
    let s_rs = &z_rs * Complex64::from(1.0 / (2.0 * Z0))
        - &z_rs * Complex64::from(1.0 / (2.0 * Z0)) * &s_ss;
    assert!(rel_diff(&s.block_owned(PortGroup::Rx, PortGroup::Ris), &s_rs) < 1e-10);
}

#[test]
fn two_port_closed_forms_with_and_without_cross_product() {
    // SISO with matched ends: the exact impedance channel carries the
    // Z̃_RT Z̃_TR cross-product in its denominator; the approximate one
    // drops it.
    let z = random_passive_z(1, 5, 1, 2024);
    let loads = RisLoads::from_impedances(
        &(0..5)
            .map(|i| Complex64::new(0.2, 20.0 * i as f64 - 40.0))
            .collect::<Vec<_>>(),
        Z0,
    );
    let term = TerminationConfig::matched(1, 1, Z0);

    // Reduce to the two-port: Z̃_xy = Z_xy − Z_xS (Z_S + Z_SS)^{-1} Z_Sy.
    let loaded_inv = invert(
        "Z_S + Z_SS",
        &(loads.impedance_matrix() + z.block_owned(PortGroup::Ris, PortGroup::Ris)),
    )
    .unwrap();
    let zt = |x: PortGroup, y: PortGroup| -> Complex64 {
        (z.block_owned(x, y)
            - z.block_owned(x, PortGroup::Ris) * &loaded_inv * z.block_owned(PortGroup::Ris, y))
            [(0, 0)]
    };
    let (z_rt, z_tr) = (
        zt(PortGroup::Rx, PortGroup::Tx),
        zt(PortGroup::Tx, PortGroup::Rx),
    );
    let (z_rr, z_tt) = (
        zt(PortGroup::Rx, PortGroup::Rx),
        zt(PortGroup::Tx, PortGroup::Tx),
    );
    let z0c = Complex64::from(Z0);

    let exact_formula = z0c * z_rt / ((z0c + z_rr) * (z0c + z_tt) - z_rt * z_tr);
    let h_exact = h_e2e_z_exact(&z, &loads, &term).unwrap()[(0, 0)];
    assert!((h_exact - exact_formula).norm() < 1e-12 * exact_formula.norm());

    // The approximation drops the cross-product and swaps the loaded
    // self-impedances for the raw ones.
    let (raw_tt, raw_rr) = (
        z.block(PortGroup::Tx, PortGroup::Tx)[(0, 0)],
        z.block(PortGroup::Rx, PortGroup::Rx)[(0, 0)],
    );
    let approx_formula = z0c * z_rt / ((z0c + raw_rr) * (z0c + raw_tt));
    let h_approx = h_e2e_z_approx(&z, &loads, &term).unwrap()[(0, 0)];
    assert!((h_approx - approx_formula).norm() < 1e-12 * approx_formula.norm());
}

#[test]
fn z_approximation_is_tight_on_the_dipole_scene() {
    let (z, _s) = nulled_matrices(&desk_scene(8, 4, 0.125, 3));
    let loads = RisLoads::from_impedances(
        &(0..32)
            .map(|i| Complex64::new(0.2, -60.0 + 4.0 * i as f64))
            .collect::<Vec<_>>(),
        Z0,
    );
    let term = TerminationConfig::matched(1, 1, Z0);
    let exact = h_e2e_z_exact(&z, &loads, &term).unwrap();
    let approx = h_e2e_z_approx(&z, &loads, &term).unwrap();
    let rel = rel_diff(&approx, &exact);
    assert!(rel < 0.01, "approximation off by {rel:.3e}");
}

#[test]
fn z_approximation_exact_when_premises_hold() {
    let z = premise_z(true);
    let loads = RisLoads::from_impedances(
        &(0..z.partition().k)
            .map(|i| Complex64::new(0.2, 10.0 * i as f64 - 30.0))
            .collect::<Vec<_>>(),
        Z0,
    );
    let term = TerminationConfig::matched(1, 1, Z0);
    let exact = h_e2e_z_exact(&z, &loads, &term).unwrap();
    let approx = h_e2e_z_approx(&z, &loads, &term).unwrap();
    assert!(rel_diff(&approx, &exact) < 1e-12);
}

#[test]
fn generator_voltages_for_general_terminations() {
    let term = TerminationConfig::new(
        vec![Complex64::new(30.0, 12.0), Complex64::new(90.0, -40.0)],
        vec![Complex64::from(Z0)],
        Z0,
    );
    let a_g = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -2.0)]);
    let v_g = term.generator_voltages(&a_g).unwrap();
    for i in 0..2 {
        let gamma = (term.generator_impedances[i] - Z0) / (term.generator_impedances[i] + Z0);
        let expected = Complex64::from(2.0 * Z0.sqrt()) / (Complex64::from(1.0) - gamma) * a_g[i];
        assert!((v_g[i] - expected).norm() < 1e-12 * expected.norm());
    }
}

#[test]
fn empty_surface_structural_scattering_is_the_zero_map() {
    let z = PartitionedNetworkMatrix::new(
        MatrixKind::Impedance,
        DMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                Complex64::new(73.0, 40.0)
            } else {
                Complex64::new(0.01, -0.02)
            }
        }),
        Partition::new(1, 0, 1),
        Z0,
    )
    .unwrap();
    let st = structural_scattering(&z).unwrap();
    assert_eq!(st.nrows(), 1);
    assert_eq!(st.ncols(), 1);
    assert_eq!(st[(0, 0)], Complex64::new(0.0, 0.0));

    let s = z_to_s(&z).unwrap();
    let loads = RisLoads::matched(0, Z0);
    let h = h_e2e_s_matched(&s, &loads).unwrap();
    assert!((h[(0, 0)] - s.block(PortGroup::Rx, PortGroup::Tx)[(0, 0)]).norm() < 1e-15);
}
