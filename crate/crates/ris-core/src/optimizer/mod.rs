//! Iterative tunable-load optimizers on the scattering representation,
//! an impedance-domain baseline, a coupling-ignorant closed form, and a
//! brute-force grid oracle.
//!
//! All optimizers are single-input single-output (one transmitter port, one
//! receiver port) and drive independent per-port loads, i.e. a diagonal
//! reflection matrix; matched transmitter/receiver terminations are assumed
//! throughout. Each run is deterministic for a fixed input.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, invert};
use crate::network::{
    gamma_for_reactance, reactance_for_phase, LoadConfig, MatrixKind, NetworkError,
    PartitionedNetworkMatrix, PortGroup, RisLoads,
};

mod feasible;
mod linearized;
mod oracle;
mod s_diag;
mod s_opt;
mod z_ref;

pub use feasible::{project_feasible, FeasibleSet};
pub use linearized::{linearize, LinearizedProblem, SpecularTerms};
pub use oracle::{brute_force_oracle, OracleResult};
pub use s_diag::{s_diag_run, uncoupled_optimum_phases};
pub use s_opt::{mse, mse_trace, s_opt_inner, s_opt_omega_run, s_opt_run, w_opt, InnerSolution};
pub use z_ref::z_ref_run;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("guard refusal: {0}")]
    GuardRefusal(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Lagrange-multiplier bisection failed: {0}")]
    BisectionFailure(String),
}

/// Parameters shared by the iterative optimizers.
#[derive(Debug, Clone)]
pub struct AlgoParams {
    /// Per-iteration linearization budget δ̄0 (dimensionless, ≪ 1).
    pub delta0: f64,
    /// Stop once the reflection-coefficient update norm ρ drops to η.
    pub eta: f64,
    pub max_iterations: usize,
    /// Parasitic series resistance of each tunable load, ohm.
    pub parasitic_resistance: f64,
    /// Specular-suppression weight ω (0 disables the specular term).
    pub omega: f64,
    /// Transmit power σ_s². The MSE-route optimizers normalize the channel
    /// to unit magnitude at the starting state, so this and `noise_power`
    /// are referred to a unit-scale channel.
    pub signal_power: f64,
    /// Receiver noise power σ_n² (against the unit-normalized channel; the
    /// default sets a 20 dB starting SNR).
    pub noise_power: f64,
    pub feasible_set: FeasibleSet,
    /// Record per-iteration phase vectors into the returned state.
    pub record_phase_history: bool,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            delta0: 0.01,
            eta: 1e-4,
            max_iterations: 500,
            parasitic_resistance: 0.2,
            omega: 0.0,
            signal_power: 1.0,
            noise_power: 1e-2,
            feasible_set: FeasibleSet::FullCircle,
            record_phase_history: false,
        }
    }
}

impl AlgoParams {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(self.delta0 > 0.0 && self.delta0 <= 0.1) {
            return Err(OptimizeError::InvalidParams(format!(
                "delta0 must be in (0, 0.1], got {}",
                self.delta0
            )));
        }
        if !(self.eta > 0.0) {
            return Err(OptimizeError::InvalidParams(
                "eta must be positive".to_string(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(OptimizeError::InvalidParams(
                "max_iterations must be at least 1".to_string(),
            ));
        }
        if self.parasitic_resistance < 0.0 {
            return Err(OptimizeError::InvalidParams(
                "parasitic resistance must be non-negative".to_string(),
            ));
        }
        if self.omega < 0.0 {
            return Err(OptimizeError::InvalidParams(
                "omega must be non-negative".to_string(),
            ));
        }
        if !(self.noise_power > 0.0) || !(self.signal_power > 0.0) {
            return Err(OptimizeError::InvalidParams(
                "signal and noise powers must be positive".to_string(),
            ));
        }
        self.feasible_set
            .validate()
            .map_err(OptimizeError::InvalidParams)
    }
}

/// Inner-loop tolerances of the alternating optimization. The run-level
/// parameters live in [`AlgoParams`]; these are numerical plumbing.
#[derive(Debug, Clone)]
pub struct InnerTolerances {
    /// Stop the alternation when `‖x_{l+1} − x_l‖ ≤ x_change · ε`.
    pub x_change: f64,
    /// Relative residual target of the budget constraint.
    pub constraint_residual: f64,
    pub max_inner_iterations: usize,
    pub max_bracket_doublings: usize,
    pub max_bisection_steps: usize,
}

impl Default for InnerTolerances {
    fn default() -> Self {
        Self {
            x_change: 1e-8,
            constraint_residual: 1e-10,
            max_inner_iterations: 100,
            max_bracket_doublings: 200,
            max_bisection_steps: 500,
        }
    }
}

/// One row of the per-iteration convergence trace.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub iteration: usize,
    /// Received power |H|² at the intended receiver, watt.
    pub received_power: f64,
    /// Power toward the specular virtual receiver, when tracked.
    pub specular_power: Option<f64>,
    /// Reflection-coefficient update norm ρ (NaN on the initial row).
    pub rho: f64,
}

/// Optimizer state: phases, consistent reflection coefficients, and the
/// convergence trace.
#[derive(Debug, Clone)]
pub struct OptState {
    pub phases: Vec<f64>,
    pub gammas: Vec<Complex64>,
    pub iteration: usize,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    pub delta_norm: f64,
    pub phase_history: Option<Vec<Vec<f64>>>,
    parasitic_resistance: f64,
    reference_impedance: f64,
}

impl OptState {
    /// Builds a state whose reflection coefficients follow from the phases
    /// through the reactance map `X = Z0·cot(φ/2)` and the lossy reflection
    /// formula.
    pub fn from_phases(phases: &[f64], r0: f64, z0: f64) -> Self {
        let gammas = gammas_for_phases(phases, r0, z0);
        Self {
            phases: phases.to_vec(),
            gammas,
            iteration: 0,
            trace: Vec::new(),
            converged: false,
            delta_norm: f64::NAN,
            phase_history: None,
            parasitic_resistance: r0,
            reference_impedance: z0,
        }
    }

    pub fn k(&self) -> usize {
        self.phases.len()
    }

    pub fn reactances(&self) -> Vec<f64> {
        self.phases
            .iter()
            .map(|&p| reactance_for_phase(p, self.reference_impedance))
            .collect()
    }

    pub fn load_config(&self) -> Result<LoadConfig, NetworkError> {
        LoadConfig::new(
            self.reactances(),
            self.parasitic_resistance,
            self.reference_impedance,
        )
    }

    pub fn loads(&self) -> Result<RisLoads, NetworkError> {
        Ok(RisLoads::from_config(&self.load_config()?))
    }

    pub fn final_power(&self) -> Option<f64> {
        self.trace.last().map(|t| t.received_power)
    }
}

pub(crate) fn gammas_for_phases(phases: &[f64], r0: f64, z0: f64) -> Vec<Complex64> {
    phases
        .iter()
        .map(|&p| gamma_for_reactance(reactance_for_phase(p, z0), r0, z0))
        .collect()
}

/// Scattering blocks of a single-transmitter single-receiver scene.
#[derive(Debug, Clone)]
pub struct SisoBlocks {
    pub s_rt: Complex64,
    pub s_rs: RowDVector<Complex64>,
    pub s_st: DVector<Complex64>,
    pub s_ss: DMatrix<Complex64>,
    pub z0: f64,
}

impl SisoBlocks {
    pub fn from_scattering(s: &PartitionedNetworkMatrix) -> Result<Self, OptimizeError> {
        if s.kind() != MatrixKind::Scattering {
            return Err(NetworkError::KindMismatch {
                expected: MatrixKind::Scattering,
                found: s.kind(),
            }
            .into());
        }
        let p = s.partition();
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
        Ok(Self {
            s_rt: s.block(PortGroup::Rx, PortGroup::Tx)[(0, 0)],
            s_rs: RowDVector::from_iterator(
                p.k,
                s.block(PortGroup::Rx, PortGroup::Ris).iter().cloned(),
            ),
            s_st: DVector::from_iterator(
                p.k,
                s.block(PortGroup::Ris, PortGroup::Tx).iter().cloned(),
            ),
            s_ss: s.block_owned(PortGroup::Ris, PortGroup::Ris),
            z0: s.reference_impedance(),
        })
    }

    pub fn k(&self) -> usize {
        self.s_st.len()
    }

    /// Matched-termination channel for diagonal reflection coefficients:
    /// `h = S_RT + S_RS (U − Γ S_SS)⁻¹ Γ S_ST`.
    pub fn channel(&self, gammas: &[Complex64]) -> Result<Complex64, OptimizeError> {
        let k = self.k();
        let gamma = linalg::diag(gammas);
        let inv = invert("U - Γ_S S_SS", &(linalg::identity(k) - &gamma * &self.s_ss))
            .map_err(NetworkError::from)?;
        Ok(self.s_rt + (&self.s_rs * inv * gamma * &self.s_st)[(0, 0)])
    }
}

/// Scattering blocks of the virtual receiver placed in the specular
/// direction. The surface block `S_SS` of the real scene is shared when the
/// linearization and the specular trace are evaluated.
#[derive(Debug, Clone)]
pub struct VirtualBlocks {
    pub s_rt: Complex64,
    pub s_rs: RowDVector<Complex64>,
    pub s_st: DVector<Complex64>,
}

impl VirtualBlocks {
    /// Extracts the receiver-coupled blocks of a scene whose receiver is the
    /// specular virtual probe.
    pub fn from_scattering(s: &PartitionedNetworkMatrix) -> Result<Self, OptimizeError> {
        let b = SisoBlocks::from_scattering(s)?;
        Ok(Self {
            s_rt: b.s_rt,
            s_rs: b.s_rs,
            s_st: b.s_st,
        })
    }
}

/// S-UNI per-element phase increments: the objective gain is linear in each
/// increment, so the optimum sits at the edge of the budget interval with
/// the sign of `Re{a c_k*}` (ties resolved to the positive branch).
pub fn s_uni_step(problem: &LinearizedProblem, params: &AlgoParams) -> Vec<f64> {
    let step = params.delta0 / problem.p_norm;
    problem
        .c
        .iter()
        .map(|c_k| {
            if (problem.a * c_k.conj()).re >= 0.0 {
                step
            } else {
                -step
            }
        })
        .collect()
}

/// Runs the uniform-increment scattering-domain optimizer.
pub fn s_uni_run(
    s: &PartitionedNetworkMatrix,
    params: &AlgoParams,
    init: &OptState,
) -> Result<OptState, OptimizeError> {
    params.validate()?;
    let blocks = SisoBlocks::from_scattering(s)?;
    run_iterative(
        blocks.z0,
        params,
        init,
        |state| {
            let problem = linearized::linearize_blocks(&blocks, state, None)?;
            Ok(s_uni_step(&problem, params))
        },
        scattering_objective(&blocks, None),
    )
}

/// Objective evaluation through the full coupled matched channel, plus the
/// specular-direction power when a virtual receiver is tracked.
pub(crate) fn scattering_objective<'a>(
    blocks: &'a SisoBlocks,
    virtual_rx: Option<&'a VirtualBlocks>,
) -> impl FnMut(&OptState) -> Result<(f64, Option<f64>), OptimizeError> + 'a {
    move |state| {
        let k = blocks.k();
        let gamma = linalg::diag(&state.gammas);
        let inv = invert(
            "U - Γ_S S_SS",
            &(linalg::identity(k) - &gamma * &blocks.s_ss),
        )
        .map_err(NetworkError::from)?;
        let h = blocks.s_rt + (&blocks.s_rs * &inv * &gamma * &blocks.s_st)[(0, 0)];
        let specular_power = virtual_rx.map(|v| {
            let h_sp = v.s_rt + (&v.s_rs * &inv * &gamma * &v.s_st)[(0, 0)];
            h_sp.norm_sqr()
        });
        Ok((h.norm_sqr(), specular_power))
    }
}

/// Shared outer loop: compute increments, project onto the feasible set,
/// update reactances and reflection coefficients (with losses), and record
/// the trace until ρ ≤ η or the iteration budget runs out.
pub(crate) fn run_iterative(
    z0: f64,
    params: &AlgoParams,
    init: &OptState,
    mut compute_step: impl FnMut(&OptState) -> Result<Vec<f64>, OptimizeError>,
    mut evaluate: impl FnMut(&OptState) -> Result<(f64, Option<f64>), OptimizeError>,
) -> Result<OptState, OptimizeError> {
    let r0 = params.parasitic_resistance;
    let mut state = OptState::from_phases(&init.phases, r0, z0);
    if params.record_phase_history {
        state.phase_history = Some(vec![state.phases.clone()]);
    }
    let (power, specular) = evaluate(&state)?;
    state.trace.push(TracePoint {
        iteration: 0,
        received_power: power,
        specular_power: specular,
        rho: f64::NAN,
    });

    for m in 1..=params.max_iterations {
        let delta = compute_step(&state)?;
        if delta.len() != state.phases.len() {
            return Err(OptimizeError::Unsupported(format!(
                "step produced {} increments for {} phases",
                delta.len(),
                state.phases.len()
            )));
        }
        let new_phases: Vec<f64> = state
            .phases
            .iter()
            .zip(delta.iter())
            .map(|(&phi, &d)| project_feasible(phi + d, &params.feasible_set))
            .collect();
        let new_gammas = gammas_for_phases(&new_phases, r0, z0);
        let rho = state
            .gammas
            .iter()
            .zip(new_gammas.iter())
            .map(|(old, new)| (new - old).norm_sqr())
            .sum::<f64>()
            .sqrt();

        state.phases = new_phases;
        state.gammas = new_gammas;
        state.iteration = m;
        state.delta_norm = rho;
        if let Some(history) = state.phase_history.as_mut() {
            history.push(state.phases.clone());
        }
        let (power, specular) = evaluate(&state)?;
        state.trace.push(TracePoint {
            iteration: m,
            received_power: power,
            specular_power: specular,
            rho,
        });

        if rho <= params.eta {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// |H|² through the full coupled channel at the state's reflection
/// coefficients.
pub fn received_power(
    s: &PartitionedNetworkMatrix,
    state: &OptState,
) -> Result<f64, OptimizeError> {
    let blocks = SisoBlocks::from_scattering(s)?;
    Ok(blocks.channel(&state.gammas)?.norm_sqr())
}

pub(crate) fn mse_for_power(power: f64, signal_power: f64, noise_power: f64) -> f64 {
    signal_power / (signal_power * power / noise_power + 1.0)
}
