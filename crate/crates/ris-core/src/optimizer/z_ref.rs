//! Impedance-domain baseline: the same uniform-increment iteration as the
//! scattering-domain optimizer, but perturbing the normalized reactances.
//!
//! The loaded surface factor `(Z_S + Z_SS)⁻¹` is linearized with a one-term
//! Neumann expansion in the reactance increments, the per-element signs
//! follow the linear gain, and the objective is the approximate
//! impedance-domain channel. A small phase increment moves the reactance by
//! `dX ∝ X² + Z0²`, so for the same budget the reactance walk explores the
//! load space much more slowly; this baseline exists to expose that
//! difference.

use nalgebra::{DVector, RowDVector};
use num_complex::Complex64;

use crate::linalg::{invert, norm_fro};
use crate::network::{
    reactance_for_phase, MatrixKind, NetworkError, PartitionedNetworkMatrix, PortGroup,
};

use super::feasible::wrap_angle;
use super::{run_iterative, AlgoParams, OptState, OptimizeError};

struct ZBlocks {
    z_rt: Complex64,
    z_rs: RowDVector<Complex64>,
    z_st: DVector<Complex64>,
    z_ss: nalgebra::DMatrix<Complex64>,
    /// Matched SISO prefactors of the approximate channel:
    /// `Z0/(Z0 + Z_RR)` and `1/(Z0 + Z_TT)`.
    pre: Complex64,
    post: Complex64,
    z0: f64,
}

impl ZBlocks {
    fn from_impedance(z: &PartitionedNetworkMatrix) -> Result<Self, OptimizeError> {
        if z.kind() != MatrixKind::Impedance {
            return Err(NetworkError::KindMismatch {
                expected: MatrixKind::Impedance,
                found: z.kind(),
            }
            .into());
        }
        let p = z.partition();
        if p.n_t != 1 || p.n_r != 1 {
            return Err(OptimizeError::Unsupported(format!(
                "optimizers are SISO-only; scene has N_T = {}, N_R = {}",
                p.n_t, p.n_r
            )));
        }
        if p.k == 0 {
            return Err(OptimizeError::Unsupported(
                "scene has no tunable elements".to_string(),
            ));
        }
        let z0 = z.reference_impedance();
        let z_tt = z.block(PortGroup::Tx, PortGroup::Tx)[(0, 0)];
        let z_rr = z.block(PortGroup::Rx, PortGroup::Rx)[(0, 0)];
        Ok(Self {
            z_rt: z.block(PortGroup::Rx, PortGroup::Tx)[(0, 0)],
            z_rs: RowDVector::from_iterator(
                p.k,
                z.block(PortGroup::Rx, PortGroup::Ris).iter().cloned(),
            ),
            z_st: DVector::from_iterator(
                p.k,
                z.block(PortGroup::Ris, PortGroup::Tx).iter().cloned(),
            ),
            z_ss: z.block_owned(PortGroup::Ris, PortGroup::Ris),
            pre: Complex64::from(z0) / (Complex64::from(z0) + z_rr),
            post: (Complex64::from(z0) + z_tt).inv(),
            z0,
        })
    }

    fn k(&self) -> usize {
        self.z_st.len()
    }

    /// `(Z_S + Z_SS)⁻¹` for the state's loads `jX_k + r0`.
    fn loaded_inverse(
        &self,
        state: &OptState,
        r0: f64,
    ) -> Result<nalgebra::DMatrix<Complex64>, OptimizeError> {
        let mut w = self.z_ss.clone();
        for (i, &phi) in state.phases.iter().enumerate() {
            let x = reactance_for_phase(phi, self.z0);
            w[(i, i)] += Complex64::new(r0, x);
        }
        invert("Z_S + Z_SS", &w)
            .map_err(NetworkError::from)
            .map_err(Into::into)
    }

    /// Approximate impedance-domain channel at the state.
    fn channel(&self, state: &OptState, r0: f64) -> Result<Complex64, OptimizeError> {
        let w_inv = self.loaded_inverse(state, r0)?;
        Ok(self.pre * (self.z_rt - (&self.z_rs * w_inv * &self.z_st)[(0, 0)]) * self.post)
    }
}

/// Runs the impedance-domain uniform-increment baseline.
pub fn z_ref_run(
    z: &PartitionedNetworkMatrix,
    params: &AlgoParams,
    init: &OptState,
) -> Result<OptState, OptimizeError> {
    params.validate()?;
    let blocks = ZBlocks::from_impedance(z)?;
    let r0 = params.parasitic_resistance;
    let z0 = blocks.z0;
    run_iterative(
        z0,
        params,
        init,
        |state| {
            let w_inv = blocks.loaded_inverse(state, r0)?;
            let row = &blocks.z_rs * &w_inv;
            let col = &w_inv * &blocks.z_st;
            let scale = blocks.pre * blocks.post;
            let a = scale * (blocks.z_rt - (&blocks.z_rs * &w_inv * &blocks.z_st)[(0, 0)]);
            // Perturbing Z_S by jZ0·diag(d) expands the loaded inverse to
            // first order; the Neumann budget mirrors the scattering-domain
            // rule with P replaced by Z0·(Z_S + Z_SS)⁻¹.
            let step = params.delta0 / (z0 * norm_fro(&w_inv));
            let k = blocks.k();
            let mut delta_phi = Vec::with_capacity(k);
            for i in 0..k {
                let c_i = scale * Complex64::i() * z0 * row[i] * col[i];
                let d_i = if (a * c_i.conj()).re >= 0.0 {
                    step
                } else {
                    -step
                };
                let x_old = reactance_for_phase(state.phases[i], z0);
                let x_new = x_old + z0 * d_i;
                let phi_new = crate::network::phase_for_reactance(x_new, z0);
                delta_phi.push(wrap_angle(phi_new - state.phases[i]));
            }
            Ok(delta_phi)
        },
        |state| Ok((blocks.channel(state, r0)?.norm_sqr(), None)),
    )
}
