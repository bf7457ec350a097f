//! Exhaustive phase-grid search for desk-scale verification.

use super::{gammas_for_phases, AlgoParams, OptimizeError, PartitionedNetworkMatrix, SisoBlocks};

/// Largest element count the oracle accepts.
pub const MAX_ORACLE_ELEMENTS: usize = 4;
/// Largest grid the oracle is willing to enumerate.
pub const MAX_GRID_POINTS: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub phases: Vec<f64>,
    pub power: f64,
    pub evaluations: usize,
}

/// Exhaustively sweeps every element's phase over a uniform circular grid
/// and evaluates the full coupled channel (no linearization) at each point.
///
/// Guards refuse K > 4 or grids above 10^8 points. The step is rounded so
/// the grid divides the circle evenly.
pub fn brute_force_oracle(
    s: &PartitionedNetworkMatrix,
    phase_step_deg: f64,
    params: &AlgoParams,
) -> Result<OracleResult, OptimizeError> {
    if !(phase_step_deg > 0.0) {
        return Err(OptimizeError::InvalidParams(
            "phase step must be positive".to_string(),
        ));
    }
    let blocks = SisoBlocks::from_scattering(s)?;
    let k = blocks.k();
    if k > MAX_ORACLE_ELEMENTS {
        return Err(OptimizeError::GuardRefusal(format!(
            "brute-force search is limited to K ≤ {MAX_ORACLE_ELEMENTS}, scene has K = {k}"
        )));
    }
    let steps = (360.0 / phase_step_deg).round().max(1.0) as usize;
    let total = (steps as f64).powi(k as i32);
    if total > MAX_GRID_POINTS {
        return Err(OptimizeError::GuardRefusal(format!(
            "grid of {steps}^{k} = {total:.3e} points exceeds {MAX_GRID_POINTS:.0e}"
        )));
    }

    let grid: Vec<f64> = (0..steps)
        .map(|i| -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / steps as f64)
        .collect();
    let r0 = params.parasitic_resistance;

    let mut indices = vec![0usize; k];
    let mut phases = vec![grid[0]; k];
    let mut best_phases = phases.clone();
    let mut best_power = f64::NEG_INFINITY;
    let mut evaluations = 0usize;
    loop {
        for (i, &idx) in indices.iter().enumerate() {
            phases[i] = grid[idx];
        }
        let gammas = gammas_for_phases(&phases, r0, blocks.z0);
        let power = blocks.channel(&gammas)?.norm_sqr();
        evaluations += 1;
        if power > best_power {
            best_power = power;
            best_phases.copy_from_slice(&phases);
        }
        // Odometer increment.
        let mut digit = 0;
        loop {
            indices[digit] += 1;
            if indices[digit] < steps {
                break;
            }
            indices[digit] = 0;
            digit += 1;
            if digit == k {
                return Ok(OracleResult {
                    phases: best_phases,
                    power: best_power,
                    evaluations,
                });
            }
        }
    }
}
