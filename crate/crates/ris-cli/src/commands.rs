//! Subcommand implementations shared between the binary and its tests.

use std::fmt::Write as FmtWrite;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use nalgebra::Vector3;

use ris_core::em_scene::{
    assemble_z_matrix, free_space_tr_matrix, nullify_direct_link, specular_position, Scenario,
};
use ris_core::io::save_matrix;
use ris_core::multipath::reduce_cluster;
use ris_core::network::{z_to_s, LoadConfig, PartitionedNetworkMatrix, RisLoads};
use ris_core::optimizer::{
    brute_force_oracle, s_diag_run, s_opt_omega_run, s_opt_run, s_uni_run,
    uncoupled_optimum_phases, z_ref_run, AlgoParams, OptState, VirtualBlocks,
};
use ris_core::pattern::{lobe_metrics, pattern_sweep, AngularWindow, SweepSpec};

use crate::config::{algorithm_kind, parse_init, AlgorithmKind, InitChoice, RunConfig};
use crate::outputs::{
    loads_csv, lobes_json, parse_loads_csv, pattern_csv, trace_csv, OutputContext,
};

/// Assembled matrices of a scene, with the direct link removed when the
/// scenario is blocked and the cluster ports folded out.
pub struct SceneMatrices {
    pub z_full: PartitionedNetworkMatrix,
    /// Effective (T, S, R) impedance matrix.
    pub z: PartitionedNetworkMatrix,
    pub s: PartitionedNetworkMatrix,
}

pub fn assemble_scene(scenario: &Scenario) -> anyhow::Result<SceneMatrices> {
    let mut z_full = assemble_z_matrix(scenario)?;
    if scenario.direct_link_blocked {
        let z_free = free_space_tr_matrix(scenario)?;
        z_full = nullify_direct_link(&z_full, &z_free)?;
    }
    let n_o = scenario.cluster_elements.len();
    let z = reduce_cluster(&z_full, &vec![num_complex::Complex64::new(0.0, 0.0); n_o])?;
    let s = z_to_s(&z)?;
    Ok(SceneMatrices { z_full, z, s })
}

pub fn cmd_scene(cfg: &RunConfig, ctx: &OutputContext) -> anyhow::Result<()> {
    let scenario = cfg.build_scenario(ctx.seed)?;
    let m = assemble_scene(&scenario)?;
    ctx.ensure_dir()?;
    save_matrix(&ctx.dir.join("z_matrix.txt"), &m.z)?;
    save_matrix(&ctx.dir.join("s_matrix.txt"), &m.s)?;
    if m.z_full.partition().n_o > 0 {
        save_matrix(&ctx.dir.join("z_matrix_with_cluster.txt"), &m.z_full)?;
    }
    let p = m.z.partition();
    println!(
        "scene: wrote {} and {} (partition {},{},{})",
        ctx.dir.join("z_matrix.txt").display(),
        ctx.dir.join("s_matrix.txt").display(),
        p.n_t,
        p.k,
        p.n_r
    );
    Ok(())
}

fn initial_state(
    cfg: &RunConfig,
    s: &PartitionedNetworkMatrix,
    params: &AlgoParams,
) -> anyhow::Result<OptState> {
    let z0 = s.reference_impedance();
    let phases = match parse_init(&cfg.algorithm.init)? {
        InitChoice::Uncoupled => uncoupled_optimum_phases(s)?,
        InitChoice::Uniform(phi) => vec![phi; s.partition().k],
    };
    Ok(OptState::from_phases(
        &phases,
        params.parasitic_resistance,
        z0,
    ))
}

/// Builds the specular-direction virtual receiver blocks for a scenario:
/// the receiver is mirrored about the surface normal at the same range and
/// lifted by half a wavelength when it would collide with the transmitter.
pub fn virtual_blocks(cfg: &RunConfig, scenario: &Scenario) -> anyhow::Result<VirtualBlocks> {
    let center = Vector3::new(
        cfg.scenario.ris.center_m[0],
        cfg.scenario.ris.center_m[1],
        cfg.scenario.ris.center_m[2],
    );
    let tx = scenario.tx_elements[0].position;
    let range = (scenario.rx_elements[0].position - center).norm();
    let mut pos = specular_position(&tx, &center, range);
    if (pos - tx).norm() < scenario.wavelength() / 4.0 {
        pos.z += scenario.wavelength() / 2.0;
    }
    let mut virt = scenario.clone();
    virt.rx_elements = vec![scenario.rx_elements[0].at(pos)];
    let m = assemble_scene(&virt)?;
    Ok(VirtualBlocks::from_scattering(&m.s)?)
}

pub struct RunOutcome {
    pub state: OptState,
    pub algorithm: String,
    pub wall_seconds: f64,
}

pub fn run_algorithm(
    cfg: &RunConfig,
    name: &str,
    scenario: Option<&Scenario>,
    matrices: &SceneMatrices,
    params: &AlgoParams,
) -> anyhow::Result<RunOutcome> {
    let kind = algorithm_kind(name)?;
    let start = Instant::now();
    let state = match kind {
        AlgorithmKind::SUni => {
            let init = initial_state(cfg, &matrices.s, params)?;
            s_uni_run(&matrices.s, params, &init)?
        }
        AlgorithmKind::SOpt => {
            let mut p = params.clone();
            p.omega = 0.0;
            let init = initial_state(cfg, &matrices.s, &p)?;
            s_opt_run(&matrices.s, &p, &init)?
        }
        AlgorithmKind::SOptOmega => {
            let scenario = scenario.ok_or_else(|| {
                anyhow::anyhow!(
                    "s-opt-omega needs the scene geometry for the specular virtual receiver"
                )
            })?;
            let init = initial_state(cfg, &matrices.s, params)?;
            let virt = virtual_blocks(cfg, scenario)?;
            s_opt_omega_run(&matrices.s, &virt, params, &init)?
        }
        AlgorithmKind::ZRef => {
            let init = initial_state(cfg, &matrices.s, params)?;
            z_ref_run(&matrices.z, params, &init)?
        }
        AlgorithmKind::SDiag => s_diag_run(&matrices.s, params)?,
        AlgorithmKind::Oracle => {
            let result =
                brute_force_oracle(&matrices.s, cfg.algorithm.oracle_phase_step_deg, params)?;
            let mut state = OptState::from_phases(
                &result.phases,
                params.parasitic_resistance,
                matrices.s.reference_impedance(),
            );
            state.trace.push(ris_core::optimizer::TracePoint {
                iteration: 0,
                received_power: result.power,
                specular_power: None,
                rho: f64::NAN,
            });
            state.iteration = 1;
            state.converged = true;
            state
        }
    };
    Ok(RunOutcome {
        state,
        algorithm: name.to_string(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn db(p: f64) -> f64 {
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

pub fn iterations_to_within_half_db(state: &OptState) -> Option<usize> {
    let final_power = state.final_power()?;
    let threshold = final_power * 10f64.powf(-0.05);
    state
        .trace
        .iter()
        .find(|t| t.received_power >= threshold)
        .map(|t| t.iteration)
}

fn summary_json(ctx: &OutputContext, outcome: &RunOutcome, k: usize) -> anyhow::Result<String> {
    let state = &outcome.state;
    let value = serde_json::json!({
        "config_hash": ctx.config_hash,
        "seed": ctx.seed,
        "algorithm": outcome.algorithm,
        "elements": k,
        "final_power_w": state.final_power(),
        "final_power_db": state.final_power().map(db),
        "iterations": state.iteration,
        "converged": state.converged,
        "wall_time_s": outcome.wall_seconds,
        "iterations_to_within_half_db": iterations_to_within_half_db(state),
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

/// One optimize run at possibly overridden sweep coordinates.
fn optimize_point(
    cfg: &RunConfig,
    ctx: &OutputContext,
    label: Option<&str>,
    omega: Option<f64>,
    d_y_wl: Option<f64>,
    receiver_k: Option<u32>,
) -> anyhow::Result<()> {
    let scenario = cfg.build_scenario_with(ctx.seed, d_y_wl, receiver_k)?;
    let matrices = assemble_scene(&scenario)?;
    let mut params = cfg.algo_params()?;
    if let Some(w) = omega {
        params.omega = w;
    }
    let outcome = run_algorithm(
        cfg,
        &cfg.algorithm.name,
        Some(&scenario),
        &matrices,
        &params,
    )?;

    let sub_ctx = match label {
        Some(l) => OutputContext {
            dir: ctx.dir.join(l),
            ..ctx.clone()
        },
        None => ctx.clone(),
    };
    sub_ctx.write("trace.csv", &trace_csv(&sub_ctx, &outcome.state))?;
    sub_ctx.write(
        "loads.csv",
        &loads_csv(&sub_ctx, &outcome.state, params.parasitic_resistance),
    )?;
    sub_ctx.write(
        "summary.json",
        &summary_json(&sub_ctx, &outcome, scenario.ris_elements.len())?,
    )?;
    println!(
        "optimize{}: {} finished at {:.2} dB after {} iterations (converged: {})",
        label.map(|l| format!(" [{l}]")).unwrap_or_default(),
        outcome.algorithm,
        outcome
            .state
            .final_power()
            .map(db)
            .unwrap_or(f64::NEG_INFINITY),
        outcome.state.iteration,
        outcome.state.converged,
    );
    Ok(())
}

/// Optimize against an imported matrix file instead of assembling the
/// scene, mirroring the exchange flow where the matrices come from an
/// external solver. The file may hold either representation; the other is
/// obtained by conversion.
pub fn cmd_optimize_from_matrix(
    cfg: &RunConfig,
    ctx: &OutputContext,
    path: &Path,
) -> anyhow::Result<()> {
    use ris_core::network::MatrixKind;
    let loaded = ris_core::io::load_matrix(path)
        .with_context(|| format!("loading matrix file {}", path.display()))?;
    let (z, s) = match loaded.kind() {
        MatrixKind::Impedance => {
            let s = z_to_s(&loaded)?;
            (loaded, s)
        }
        MatrixKind::Scattering => {
            let z = ris_core::network::s_to_z(&loaded)?;
            (z, loaded)
        }
    };
    let matrices = SceneMatrices {
        z_full: z.clone(),
        z,
        s,
    };
    let params = cfg.algo_params()?;
    let outcome = run_algorithm(cfg, &cfg.algorithm.name, None, &matrices, &params)?;
    ctx.write("trace.csv", &trace_csv(ctx, &outcome.state))?;
    ctx.write(
        "loads.csv",
        &loads_csv(ctx, &outcome.state, params.parasitic_resistance),
    )?;
    ctx.write(
        "summary.json",
        &summary_json(ctx, &outcome, matrices.s.partition().k)?,
    )?;
    println!(
        "optimize [matrix {}]: {} finished at {:.2} dB after {} iterations",
        path.display(),
        outcome.algorithm,
        outcome
            .state
            .final_power()
            .map(db)
            .unwrap_or(f64::NEG_INFINITY),
        outcome.state.iteration,
    );
    Ok(())
}

pub fn cmd_optimize(cfg: &RunConfig, ctx: &OutputContext) -> anyhow::Result<()> {
    let sweep = &cfg.sweep;
    let omegas: Vec<Option<f64>> = match &sweep.omega {
        Some(v) if !v.is_empty() => v.iter().map(|&w| Some(w)).collect(),
        _ => vec![None],
    };
    let dys: Vec<Option<f64>> = match &sweep.d_y_wl {
        Some(v) if !v.is_empty() => v.iter().map(|&d| Some(d)).collect(),
        _ => vec![None],
    };
    let rks: Vec<Option<u32>> = match &sweep.receiver_k {
        Some(v) if !v.is_empty() => v.iter().map(|&k| Some(k)).collect(),
        _ => vec![None],
    };
    let single = omegas.len() == 1 && dys.len() == 1 && rks.len() == 1;
    if single {
        return optimize_point(cfg, ctx, None, omegas[0], dys[0], rks[0]);
    }
    // Sweep points are independent; run them in the worker pool but keep
    // the output layout fixed by the point labels.
    let mut points = Vec::new();
    for &w in &omegas {
        for &d in &dys {
            for &rk in &rks {
                let mut label = String::new();
                if let Some(w) = w {
                    let _ = write!(label, "omega_{w}");
                }
                if let Some(d) = d {
                    if !label.is_empty() {
                        label.push('_');
                    }
                    let _ = write!(label, "dy_{d}");
                }
                if let Some(rk) = rk {
                    if !label.is_empty() {
                        label.push('_');
                    }
                    let _ = write!(label, "p{rk}");
                }
                points.push((label, w, d, rk));
            }
        }
    }
    use rayon::prelude::*;
    let results: Vec<anyhow::Result<()>> = points
        .par_iter()
        .map(|(label, w, d, rk)| optimize_point(cfg, ctx, Some(label), *w, *d, *rk))
        .collect();
    for r in results {
        r?;
    }
    Ok(())
}

pub fn cmd_pattern(cfg: &RunConfig, ctx: &OutputContext, loads_path: &Path) -> anyhow::Result<()> {
    let scenario = cfg.build_scenario(ctx.seed)?;
    let loads = if loads_path.as_os_str() == "homogeneous" {
        RisLoads::matched(scenario.ris_elements.len(), scenario.reference_impedance)
    } else {
        let text = std::fs::read_to_string(loads_path)
            .with_context(|| format!("reading loads file {}", loads_path.display()))?;
        let phases = parse_loads_csv(&text)?;
        if phases.len() != scenario.ris_elements.len() {
            anyhow::bail!(
                "loads file has {} entries, scene has {} elements",
                phases.len(),
                scenario.ris_elements.len()
            );
        }
        RisLoads::from_config(&LoadConfig::new(
            phases
                .iter()
                .map(|&p| ris_core::network::reactance_for_phase(p, scenario.reference_impedance))
                .collect(),
            cfg.algorithm.r0_ohm,
            scenario.reference_impedance,
        )?)
    };

    let sweep = SweepSpec {
        arc_center: Vector3::new(
            cfg.scenario.ris.center_m[0],
            cfg.scenario.ris.center_m[1],
            cfg.scenario.ris.center_m[2],
        ),
        radius: cfg.pattern.arc_radius_m,
        angles_deg: SweepSpec::uniform_grid(
            cfg.pattern.angle_min_deg,
            cfg.pattern.angle_max_deg,
            cfg.pattern.angle_step_deg,
        ),
        probe: cfg.element_template(),
    };
    let result = pattern_sweep(&scenario, &loads, &sweep)?;

    // Specular direction of the transmitter about the surface normal.
    let tx = scenario.tx_elements[0].position;
    let center = sweep.arc_center;
    let specular = specular_position(&tx, &center, 1.0) - center;
    let specular_deg = specular.y.atan2(specular.x).to_degrees();
    let windows = [
        AngularWindow {
            center_deg: specular_deg,
            half_width_deg: cfg.pattern.specular_window_deg,
        },
        AngularWindow {
            center_deg: cfg.rx_angle_deg()?,
            half_width_deg: cfg.pattern.desired_window_deg,
        },
    ];
    let lobes = lobe_metrics(&result, &windows)?;

    ctx.write(
        "pattern.csv",
        &pattern_csv(ctx, &result, ctx_normalize(cfg)),
    )?;
    ctx.write(
        "lobes.json",
        &lobes_json(ctx, &[("specular", &lobes[0]), ("desired", &lobes[1])]),
    )?;
    println!(
        "pattern: specular {:.2} dB @ {:.1}°, desired {:.2} dB @ {:.1}°",
        lobes[0].peak_power_db,
        lobes[0].peak_angle_deg,
        lobes[1].peak_power_db,
        lobes[1].peak_angle_deg
    );
    Ok(())
}

fn ctx_normalize(cfg: &RunConfig) -> bool {
    cfg.output.normalize
}

pub fn cmd_compare(cfg: &RunConfig, ctx: &OutputContext) -> anyhow::Result<()> {
    let scenario = cfg.build_scenario(ctx.seed)?;
    let matrices = assemble_scene(&scenario)?;
    let params = cfg.algo_params()?;

    let mut traces = String::new();
    let _ = writeln!(traces, "{}", ctx.header());
    let _ = writeln!(traces, "algorithm,iteration,received_power_db,rho");
    let mut summary = String::new();
    let _ = writeln!(summary, "{}", ctx.header());
    let _ = writeln!(
        summary,
        "algorithm,final_power_db,iterations,converged,iterations_to_within_half_db"
    );

    for name in &cfg.compare.algorithms {
        let outcome = run_algorithm(cfg, name, Some(&scenario), &matrices, &params)?;
        for t in &outcome.state.trace {
            let _ = writeln!(
                traces,
                "{},{},{:.6},{:.6e}",
                name,
                t.iteration,
                db(t.received_power),
                t.rho
            );
        }
        let _ = writeln!(
            summary,
            "{},{:.6},{},{},{}",
            name,
            outcome
                .state
                .final_power()
                .map(db)
                .unwrap_or(f64::NEG_INFINITY),
            outcome.state.iteration,
            outcome.state.converged,
            iterations_to_within_half_db(&outcome.state)
                .map(|i| i.to_string())
                .unwrap_or_else(|| "nan".to_string()),
        );
        println!(
            "compare: {} -> {:.2} dB in {} iterations",
            name,
            outcome
                .state
                .final_power()
                .map(db)
                .unwrap_or(f64::NEG_INFINITY),
            outcome.state.iteration
        );
    }
    ctx.write("compare_traces.csv", &traces)?;
    ctx.write("compare_summary.csv", &summary)?;
    Ok(())
}
