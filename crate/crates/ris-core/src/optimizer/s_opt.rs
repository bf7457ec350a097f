//! Jointly optimized step sizes through the MSE route.
//!
//! Maximizing the received power of the linearized channel `a + cᵀx` under
//! the quadratic budget `Σ x_k² D_k ≤ ε²` is equivalent, through the MMSE
//! equalizer, to minimizing the equalized mean square error. Alternating
//! between the closed-form equalizer and the equality-constrained quadratic
//! step gives the joint update; the Lagrange multiplier of the quadratic
//! step is found by bisection.
//!
//! The specular-aware variant subtracts `ω |a_sp + c_spᵀx|²` from the
//! objective, which deflects the quadratic form and can make it indefinite;
//! the multiplier search is then restricted to the positive-definite range.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    linearized, mse_for_power, run_iterative, scattering_objective, AlgoParams, InnerTolerances,
    LinearizedProblem, OptState, OptimizeError, PartitionedNetworkMatrix, SisoBlocks,
    VirtualBlocks,
};

/// MMSE equalizer coefficient `w = σ_s² h* / (σ_s² |h|² + σ_n²)`.
pub fn w_opt(h: Complex64, signal_power: f64, noise_power: f64) -> Complex64 {
    signal_power * h.conj() / (signal_power * h.norm_sqr() + noise_power)
}

/// Equalized mean square error `E|w·y − s|²` for a fixed equalizer.
pub fn mse(w: Complex64, h: Complex64, signal_power: f64, noise_power: f64) -> f64 {
    signal_power + w.norm_sqr() * (signal_power * h.norm_sqr() + noise_power)
        - 2.0 * signal_power * (w * h).re
}

/// Result of the inner alternating optimization.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    /// Phase increments.
    pub x: DVector<f64>,
    /// Lagrange multiplier of the final quadratic step.
    pub multiplier: f64,
    /// Whether the budget constraint is active at the solution.
    pub boundary: bool,
    /// Relative constraint residual `|Σ x_k² D_k − ε²| / ε²` when active.
    pub constraint_residual: f64,
    pub iterations: usize,
}

/// Alternating minimization of the equalized MSE over (w, x) for one outer
/// iteration, starting from `x_init`.
pub fn s_opt_inner(
    problem: &LinearizedProblem,
    params: &AlgoParams,
    x_init: &[f64],
) -> Result<InnerSolution, OptimizeError> {
    let k = problem.k();
    if x_init.len() != k {
        return Err(OptimizeError::InvalidParams(format!(
            "x_init has {} entries for K = {k}",
            x_init.len()
        )));
    }
    let specular = if params.omega > 0.0 {
        Some(problem.specular.as_ref().ok_or_else(|| {
            OptimizeError::InvalidParams(
                "ω > 0 requires the specular virtual-receiver terms".to_string(),
            )
        })?)
    } else {
        None
    };
    let d = &problem.d;
    let d_floor = 1e-14 * d.max();
    if d.iter().any(|&v| !(v > d_floor)) {
        return Err(OptimizeError::Unsupported(
            "degenerate quadratic budget: a row of P vanished".to_string(),
        ));
    }

    let (sigma_s2, sigma_n2) = (params.signal_power, params.noise_power);
    let a = problem.a;
    let c = &problem.c;
    let eps = params.delta0;
    let tols = InnerTolerances::default();

    // Re{c c^H} and the constant ω-weighted pieces. Suppressing the
    // specular lobe while minimizing the equalized MSE means the penalty
    // +ω|a_sp + c_spᵀx|² joins the minimization, so its quadratic part adds
    // to the curvature and its linear part pulls against the specular
    // gradient.
    let c_gram = real_gram(c);
    let (omega_gram, omega_linear) = match specular {
        Some(sp) => {
            let g = real_gram(&sp.c) * params.omega;
            let lin = DVector::from_fn(k, |i, _| -params.omega * (sp.a.conj() * sp.c[i]).re);
            (Some(g), Some(lin))
        }
        None => (None, None),
    };

    let mut x = DVector::from_column_slice(x_init);
    let mut last = InnerSolution {
        x: x.clone(),
        multiplier: 0.0,
        boundary: false,
        constraint_residual: 0.0,
        iterations: 0,
    };
    for l in 1..=tols.max_inner_iterations {
        let cx: Complex64 = c.iter().zip(x.iter()).map(|(ci, &xi)| ci * xi).sum();
        let h = a + cx;
        let denom = sigma_s2 * h.norm_sqr() + sigma_n2;
        let beta = sigma_s2 / denom;
        let beta_n = sigma_n2 / denom;
        let w_sqr = beta * beta * h.norm_sqr();

        // m = σ_s² [Re{w c} − |w|² Re{a* c}] written without the
        // cancellation at x = 0: Re{w c_k} − |w|²Re{a* c_k}
        //   = β [Re{(cᵀx)* c_k} + β_n Re{a* c_k}].
        let mut m = DVector::from_fn(k, |i, _| {
            sigma_s2 * beta * ((cx.conj() * c[i]).re + beta_n * (a.conj() * c[i]).re)
        });
        if let Some(lin) = &omega_linear {
            m += lin;
        }
        let mut quad = &c_gram * (sigma_s2 * w_sqr);
        if let Some(g) = &omega_gram {
            quad += g;
        }

        let (x_next, multiplier, boundary, residual) =
            constrained_quadratic_step(&quad, &m, d, eps, &tols)?;
        let change = (&x_next - &x).norm();
        x = x_next;
        last = InnerSolution {
            x: x.clone(),
            multiplier,
            boundary,
            constraint_residual: residual,
            iterations: l,
        };
        if change <= tols.x_change * eps {
            break;
        }
    }
    Ok(last)
}

/// Symmetric real part of the complex outer product `c* cᵀ`.
fn real_gram(c: &DVector<Complex64>) -> DMatrix<f64> {
    let k = c.len();
    DMatrix::from_fn(k, k, |i, j| (c[i] * c[j].conj()).re)
}

/// Solves `min ½ xᵀ(2M)x − 2mᵀx`-style stationarity `(M + μD)x = m` over the
/// ellipsoid `xᵀDx ≤ ε²`: the multiplier μ ≥ 0 is bisected so the budget is
/// met with equality (the inactive case returns the interior minimizer).
///
/// Diagonalizing `D^{-1/2} M D^{-1/2} = V Λ Vᵀ` reduces every multiplier
/// probe to O(K): with ξ = Vᵀ D^{-1/2} m, the constraint value is
/// `φ(μ) = Σ ξ_i²/(λ_i + μ)²`, strictly decreasing on the admissible range
/// `μ > max(0, −λ_min)`.
fn constrained_quadratic_step(
    m_mat: &DMatrix<f64>,
    m_vec: &DVector<f64>,
    d: &DVector<f64>,
    eps: f64,
    tols: &InnerTolerances,
) -> Result<(DVector<f64>, f64, bool, f64), OptimizeError> {
    let k = m_vec.len();
    if m_vec.amax() == 0.0 {
        return Ok((DVector::zeros(k), 0.0, false, 0.0));
    }
    let d_inv_sqrt = DVector::from_fn(k, |i, _| 1.0 / d[i].sqrt());
    let a_tilde = DMatrix::from_fn(k, k, |i, j| m_mat[(i, j)] * d_inv_sqrt[i] * d_inv_sqrt[j]);
    let m_tilde = DVector::from_fn(k, |i, _| m_vec[i] * d_inv_sqrt[i]);

    let eigen = nalgebra::SymmetricEigen::new(a_tilde);
    let lambdas = &eigen.eigenvalues;
    let v = &eigen.eigenvectors;
    let xi = v.transpose() * &m_tilde;

    let lambda_min = lambdas.min();
    let mu_lo = (-lambda_min).max(0.0);
    let target = eps * eps;
    let phi = |mu: f64| -> f64 {
        (0..k)
            .map(|i| {
                if xi[i] == 0.0 {
                    0.0
                } else {
                    let q = xi[i] / (lambdas[i] + mu);
                    q * q
                }
            })
            .sum()
    };
    // Solution in the whitened coordinates: y = V (Λ + μI)⁻¹ Vᵀ m̃.
    let y_at = |mu: f64| -> DVector<f64> {
        let coeffs = DVector::from_fn(k, |i, _| {
            if xi[i] == 0.0 {
                0.0
            } else {
                xi[i] / (lambdas[i] + mu)
            }
        });
        v * coeffs
    };
    let back =
        |y: &DVector<f64>| -> DVector<f64> { DVector::from_fn(k, |i, _| y[i] * d_inv_sqrt[i]) };

    let phi_lo = phi(mu_lo);
    if phi_lo <= target {
        if mu_lo == 0.0 {
            // The unconstrained minimizer is feasible.
            let y = y_at(0.0);
            return Ok((back(&y), 0.0, false, 0.0));
        }
        // Hard case: m has no component along the most-indefinite direction.
        // Reaching the boundary needs an explicit step along it.
        let mut y = y_at(mu_lo);
        let t = (target - phi_lo).sqrt();
        let i_min = (0..k)
            .min_by(|&i, &j| lambdas[i].partial_cmp(&lambdas[j]).unwrap())
            .unwrap();
        let v_min = v.column(i_min);
        for i in 0..k {
            y[i] += t * v_min[i];
        }
        let x = back(&y);
        let residual = ((x
            .iter()
            .zip(d.iter())
            .map(|(xi, di)| xi * xi * di)
            .sum::<f64>()
            - target)
            / target)
            .abs();
        return Ok((x, mu_lo, true, residual));
    }

    // Bracket: double μ_hi away from μ_lo until the constraint is met.
    let mut mu_hi = if mu_lo > 0.0 { 2.0 * mu_lo } else { 1.0 };
    let mut doublings = 0;
    while phi(mu_hi) > target {
        mu_hi *= 2.0;
        doublings += 1;
        if doublings > tols.max_bracket_doublings {
            return Err(OptimizeError::BisectionFailure(format!(
                "no bracket after {} doublings (constraint value {:.3e} above {:.3e})",
                tols.max_bracket_doublings,
                phi(mu_hi),
                target
            )));
        }
    }

    let mut lo = mu_lo;
    let mut hi = mu_hi;
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..tols.max_bisection_steps {
        let val = phi(mu);
        if ((val - target) / target).abs() <= tols.constraint_residual {
            break;
        }
        if val > target {
            lo = mu;
        } else {
            hi = mu;
        }
        let next = 0.5 * (lo + hi);
        if next == mu {
            break;
        }
        mu = next;
    }
    let y = y_at(mu);
    let x = back(&y);
    let residual = ((x
        .iter()
        .zip(d.iter())
        .map(|(xi, di)| xi * xi * di)
        .sum::<f64>()
        - target)
        / target)
        .abs();
    if residual > 1e-6 {
        return Err(OptimizeError::BisectionFailure(format!(
            "constraint residual {residual:.3e} after bisection"
        )));
    }
    Ok((x, mu, true, residual))
}

/// Rescales the linear channel terms by 1/g, leaving the phase-space
/// quantities (P, D) untouched.
fn normalize_problem(problem: &mut LinearizedProblem, g: f64) {
    let inv = Complex64::from(1.0 / g);
    problem.a *= inv;
    problem.c.iter_mut().for_each(|v| *v *= inv);
    problem.b2.iter_mut().for_each(|v| *v *= inv);
    if let Some(sp) = problem.specular.as_mut() {
        sp.a *= inv;
        sp.c.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Normalization scale for the MSE route: the channel magnitude at the
/// starting state. Physical inter-antenna couplings are many orders of
/// magnitude below unity, which would push the MMSE weights to extreme
/// values and bury the ω-weighted specular term; working on `h/g` makes
/// `σ_s²`, `σ_n²` and ω all refer to a unit-scale channel while leaving the
/// received-power objective (and the ω = 0 fixed points) unchanged.
fn channel_scale(blocks: &SisoBlocks, init: &OptState, r0: f64) -> Result<f64, OptimizeError> {
    let gammas = super::gammas_for_phases(&init.phases, r0, blocks.z0);
    let g = blocks.channel(&gammas)?.norm();
    Ok(if g > 0.0 { g } else { 1.0 })
}

/// Runs the jointly-optimized-step scattering-domain optimizer.
pub fn s_opt_run(
    s: &PartitionedNetworkMatrix,
    params: &AlgoParams,
    init: &OptState,
) -> Result<OptState, OptimizeError> {
    params.validate()?;
    if params.omega != 0.0 {
        return Err(OptimizeError::InvalidParams(
            "ω > 0 needs the specular-aware run with virtual-receiver blocks".to_string(),
        ));
    }
    let blocks = SisoBlocks::from_scattering(s)?;
    let g = channel_scale(&blocks, init, params.parasitic_resistance)?;
    run_iterative(
        blocks.z0,
        params,
        init,
        |state| {
            let mut problem = linearized::linearize_blocks(&blocks, state, None)?;
            normalize_problem(&mut problem, g);
            let inner = s_opt_inner(&problem, params, &vec![0.0; problem.k()])?;
            Ok(inner.x.iter().cloned().collect())
        },
        scattering_objective(&blocks, None),
    )
}

/// Runs the specular-aware optimizer. With ω = 0 the trajectory coincides
/// with [`s_opt_run`]; the trace additionally records the power toward the
/// specular virtual receiver.
pub fn s_opt_omega_run(
    s: &PartitionedNetworkMatrix,
    virtual_rx: &VirtualBlocks,
    params: &AlgoParams,
    init: &OptState,
) -> Result<OptState, OptimizeError> {
    params.validate()?;
    let blocks = SisoBlocks::from_scattering(s)?;
    let g = channel_scale(&blocks, init, params.parasitic_resistance)?;
    run_iterative(
        blocks.z0,
        params,
        init,
        |state| {
            let mut problem = linearized::linearize_blocks(&blocks, state, Some(virtual_rx))?;
            normalize_problem(&mut problem, g);
            let inner = s_opt_inner(&problem, params, &vec![0.0; problem.k()])?;
            Ok(inner.x.iter().cloned().collect())
        },
        scattering_objective(&blocks, Some(virtual_rx)),
    )
}

/// MSE trace derived from a power trace.
pub fn mse_trace(state: &OptState, signal_power: f64, noise_power: f64) -> Vec<f64> {
    state
        .trace
        .iter()
        .map(|t| mse_for_power(t.received_power, signal_power, noise_power))
        .collect()
}
