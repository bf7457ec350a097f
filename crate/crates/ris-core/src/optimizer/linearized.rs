//! First-order model of the matched channel in the phase increments.
//!
//! With `Q = Γ⁻¹ − S_SS` the matched channel is exactly
//! `h = S_RT + S_RS Q⁻¹ S_ST`. Perturbing the phases by a small diagonal
//! `δ` and expanding the perturbed inverse to first order (a one-term
//! Neumann series, valid while `‖δ P‖ ≪ 1`) gives
//!
//! `h(δ) ≈ a + Σ_k c_k δ_k`,
//!
//! with `a = S_RT + S_RS Q⁻¹ S_ST`, `P = j Q⁻¹ Γ⁻² e^{jφ}`,
//! `b1ᵀ = S_RS P`, `b2 = Q⁻¹ S_ST`, and `c_k = b1_k b2_k`. The quadratic
//! weights `D_k = (P Pᴴ)_kk` bound the model error of a step.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::linalg::{self, invert, norm_fro};
use crate::network::{NetworkError, PartitionedNetworkMatrix};

use super::{OptState, OptimizeError, SisoBlocks, VirtualBlocks};

/// Linear terms of the channel toward the specular virtual receiver.
#[derive(Debug, Clone)]
pub struct SpecularTerms {
    pub a: Complex64,
    pub c: DVector<Complex64>,
}

#[derive(Debug, Clone)]
pub struct LinearizedProblem {
    pub a: Complex64,
    pub b1: RowDVector<Complex64>,
    pub b2: DVector<Complex64>,
    pub c: DVector<Complex64>,
    pub q: DMatrix<Complex64>,
    pub q_inv: DMatrix<Complex64>,
    pub p: DMatrix<Complex64>,
    /// Diagonal of `P Pᴴ` (non-negative).
    pub d: DVector<f64>,
    /// Frobenius norm of `P`.
    pub p_norm: f64,
    pub specular: Option<SpecularTerms>,
}

impl LinearizedProblem {
    pub fn k(&self) -> usize {
        self.c.len()
    }

    /// First-order channel prediction `a + cᵀδ`.
    pub fn predict(&self, delta: &[f64]) -> Complex64 {
        self.a
            + self
                .c
                .iter()
                .zip(delta.iter())
                .map(|(c_k, &d_k)| c_k * d_k)
                .sum::<Complex64>()
    }
}

/// Linearizes the matched channel of a SISO scene at `state`, optionally
/// carrying the specular-direction terms for the given virtual receiver.
pub fn linearize(
    s: &PartitionedNetworkMatrix,
    state: &OptState,
    virtual_rx: Option<&VirtualBlocks>,
) -> Result<LinearizedProblem, OptimizeError> {
    let blocks = SisoBlocks::from_scattering(s)?;
    linearize_blocks(&blocks, state, virtual_rx)
}

pub(crate) fn linearize_blocks(
    blocks: &SisoBlocks,
    state: &OptState,
    virtual_rx: Option<&VirtualBlocks>,
) -> Result<LinearizedProblem, OptimizeError> {
    let k = blocks.k();
    if state.phases.len() != k {
        return Err(OptimizeError::Unsupported(format!(
            "state has {} phases, scene has K = {k}",
            state.phases.len()
        )));
    }
    for (i, g) in state.gammas.iter().enumerate() {
        if g.norm() < 1e-12 {
            return Err(OptimizeError::Unsupported(format!(
                "reflection coefficient {i} is zero; the linearization needs |Γ_k| > 0"
            )));
        }
    }

    let gamma_inv: Vec<Complex64> = state.gammas.iter().map(|g| g.inv()).collect();
    let q = linalg::diag(&gamma_inv) - &blocks.s_ss;
    let q_inv = invert("Q = Γ⁻¹ - S_SS", &q).map_err(NetworkError::from)?;

    // P = j Q⁻¹ Γ⁻² e^{jφ}; the diagonal right factor scales columns.
    let col_scale: Vec<Complex64> = state
        .gammas
        .iter()
        .zip(state.phases.iter())
        .map(|(g, &phi)| Complex64::i() * Complex64::from_polar(1.0, phi) / (g * g))
        .collect();
    let mut p = q_inv.clone();
    for (j, s) in col_scale.iter().enumerate() {
        for i in 0..k {
            p[(i, j)] *= s;
        }
    }

    let a = blocks.s_rt + (&blocks.s_rs * &q_inv * &blocks.s_st)[(0, 0)];
    let b1 = &blocks.s_rs * &p;
    let b2 = &q_inv * &blocks.s_st;
    let c = DVector::from_fn(k, |i, _| b1[i] * b2[i]);
    let d = DVector::from_fn(k, |i, _| p.row(i).iter().map(|z| z.norm_sqr()).sum());
    let p_norm = norm_fro(&p);

    let specular = match virtual_rx {
        Some(v) => {
            if v.s_st.len() != k {
                return Err(OptimizeError::Unsupported(format!(
                    "virtual receiver blocks have K = {}, scene has K = {k}",
                    v.s_st.len()
                )));
            }
            let a_sp = v.s_rt + (&v.s_rs * &q_inv * &v.s_st)[(0, 0)];
            let b1_sp = &v.s_rs * &p;
            let b2_sp = &q_inv * &v.s_st;
            let c_sp = DVector::from_fn(k, |i, _| b1_sp[i] * b2_sp[i]);
            Some(SpecularTerms { a: a_sp, c: c_sp })
        }
        None => None,
    };

    Ok(LinearizedProblem {
        a,
        b1,
        b2,
        c,
        q,
        q_inv,
        p,
        d,
        p_norm,
        specular,
    })
}
