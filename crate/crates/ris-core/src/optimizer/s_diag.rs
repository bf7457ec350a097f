//! Closed-form phase choice that ignores off-diagonal mutual coupling.
//!
//! Dropping the off-diagonal part of `S_SS` decouples the channel into
//! `h = S_RT + Σ_k t_k(φ_k)` with
//! `t_k(φ) = A_k e^{jφ} / (1 − e^{jφ} s_k)`, `A_k = S_RS,k S_ST,k` and
//! `s_k = S_SS,kk`. As φ sweeps the circle, `t_k` traces a circle of center
//! `A_k s_k*/(1 − |s_k|²)` and radius `|A_k|/(1 − |s_k|²)`, so the global
//! optimum of the decoupled model is exact: point every circle toward the
//! common direction `θ = ∠(S_RT + Σ_k center_k)` and solve each phase back
//! through the Möbius map. The returned state is always evaluated on the
//! full coupled channel.

use num_complex::Complex64;

use crate::network::PartitionedNetworkMatrix;

use super::{AlgoParams, OptState, OptimizeError, SisoBlocks, TracePoint};

/// Optimal phases of the coupling-free model (lossless reflection at the
/// choice stage).
pub fn uncoupled_optimum_phases(s: &PartitionedNetworkMatrix) -> Result<Vec<f64>, OptimizeError> {
    let blocks = SisoBlocks::from_scattering(s)?;
    uncoupled_phases_from_blocks(&blocks)
}

pub(crate) fn uncoupled_phases_from_blocks(blocks: &SisoBlocks) -> Result<Vec<f64>, OptimizeError> {
    let k = blocks.k();
    let mut centers = Vec::with_capacity(k);
    let mut radii = Vec::with_capacity(k);
    for i in 0..k {
        let a_i = blocks.s_rs[i] * blocks.s_st[i];
        let s_i = blocks.s_ss[(i, i)];
        let denom = 1.0 - s_i.norm_sqr();
        if denom <= 1e-12 {
            return Err(OptimizeError::Unsupported(format!(
                "element {i} self-reflection magnitude {:.6} is at the passivity limit",
                s_i.norm()
            )));
        }
        centers.push(a_i * s_i.conj() / denom);
        radii.push(a_i.norm() / denom);
    }
    let anchor: Complex64 = blocks.s_rt + centers.iter().sum::<Complex64>();
    let theta = if anchor.norm() > 1e-300 {
        anchor.arg()
    } else {
        0.0
    };
    let direction = Complex64::from_polar(1.0, theta);

    let mut phases = Vec::with_capacity(k);
    for i in 0..k {
        let a_i = blocks.s_rs[i] * blocks.s_st[i];
        if a_i.norm() < 1e-300 {
            phases.push(0.0);
            continue;
        }
        let s_i = blocks.s_ss[(i, i)];
        // Extremal point of the circle along θ, mapped back through
        // t = A u / (1 − s u)  =>  u = t / (A + t s).
        let t_i = centers[i] + direction * radii[i];
        let u = t_i / (a_i + t_i * s_i);
        phases.push(u.arg());
    }
    Ok(phases)
}

/// Single-pass coupling-ignorant baseline. The choice assumes a diagonal
/// `S_SS`; the reported power always comes from the full coupled channel
/// with the lossy reflection coefficients.
pub fn s_diag_run(
    s: &PartitionedNetworkMatrix,
    params: &AlgoParams,
) -> Result<OptState, OptimizeError> {
    params.validate()?;
    let blocks = SisoBlocks::from_scattering(s)?;
    let phases = uncoupled_phases_from_blocks(&blocks)?;
    let mut state = OptState::from_phases(&phases, params.parasitic_resistance, blocks.z0);
    let power = blocks.channel(&state.gammas)?.norm_sqr();
    state.trace.push(TracePoint {
        iteration: 0,
        received_power: power,
        specular_power: None,
        rho: f64::NAN,
    });
    state.iteration = 1;
    state.converged = true;
    state.delta_norm = 0.0;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests_support::random_passive_scattering;
    use crate::network::PortGroup;
    use crate::optimizer::{s_opt_run, AlgoParams};

    /// Zeroes the off-diagonal of S_SS so the decoupled model is exact.
    fn diagonalized(seed: u64, k: usize) -> PartitionedNetworkMatrix {
        let mut s = random_passive_scattering(1, k, 1, seed);
        let mut ss = s.block_owned(PortGroup::Ris, PortGroup::Ris);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    ss[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        s.set_block(PortGroup::Ris, PortGroup::Ris, &ss).unwrap();
        s
    }

    #[test]
    fn phases_maximize_the_decoupled_model() {
        let s = diagonalized(61, 4);
        let blocks = SisoBlocks::from_scattering(&s).unwrap();
        let phases = uncoupled_phases_from_blocks(&blocks).unwrap();
        // Lossless evaluation of the decoupled model at the closed form.
        let eval = |ph: &[f64]| -> f64 {
            let mut h = blocks.s_rt;
            for i in 0..4 {
                let g = Complex64::from_polar(1.0, ph[i]);
                h += blocks.s_rs[i] * g * blocks.s_st[i]
                    / (Complex64::from(1.0) - g * blocks.s_ss[(i, i)]);
            }
            h.norm_sqr()
        };
        let best = eval(&phases);
        // No single-coordinate perturbation may improve the closed form.
        for i in 0..4 {
            for d in [-0.3, -0.01, 0.01, 0.3] {
                let mut ph = phases.clone();
                ph[i] += d;
                assert!(
                    eval(&ph) <= best * (1.0 + 1e-9),
                    "coordinate {i} perturbation {d} improved the decoupled model"
                );
            }
        }
    }

    #[test]
    fn matches_s_opt_on_truly_uncoupled_scene() {
        let s = diagonalized(7, 5);
        let params = AlgoParams {
            max_iterations: 600,
            noise_power: 1e-6,
            ..Default::default()
        };
        let diag = s_diag_run(&s, &params).unwrap();
        let init = OptState::from_phases(&diag.phases, params.parasitic_resistance, 50.0);
        let opt = s_opt_run(&s, &params, &init).unwrap();
        let p_diag = diag.final_power().unwrap();
        let p_opt = opt
            .trace
            .iter()
            .map(|t| t.received_power)
            .fold(f64::MIN, f64::max);
        let gap_db = 10.0 * (p_opt / p_diag).log10();
        assert!(
            gap_db.abs() < 0.1,
            "S-OPT should not find more than 0.1 dB on an uncoupled scene, got {gap_db:.3} dB"
        );
    }

    #[test]
    fn single_pass_contract() {
        let s = random_passive_scattering(1, 3, 1, 11);
        let out = s_diag_run(&s, &AlgoParams::default()).unwrap();
        assert_eq!(out.iteration, 1);
        assert!(out.converged);
        assert_eq!(out.trace.len(), 1);
    }
}
