//! Deterministic output files: CSV bodies are byte-reproducible for a fixed
//! config and seed; every file header embeds the config hash and seed.

use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

use ris_core::optimizer::OptState;
use ris_core::pattern::{LobeMetric, PatternResult};

#[derive(Debug, Clone)]
pub struct OutputContext {
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub timestamps: bool,
}

impl OutputContext {
    pub fn new(dir: &Path, config_text: &str, seed: u64, timestamps: bool) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        let digest = hasher.finalize();
        let config_hash = digest
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Self {
            dir: dir.to_path_buf(),
            config_hash,
            seed,
            timestamps,
        }
    }

    pub fn header(&self) -> String {
        let mut h = format!("# config_hash={} seed={}", self.config_hash, self.seed);
        if self.timestamps {
            let _ = write!(
                h,
                " generated_at={}",
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            );
        }
        h
    }

    pub fn ensure_dir(&self) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating output directory {}", self.dir.display()))
    }

    pub fn write(&self, name: &str, body: &str) -> anyhow::Result<PathBuf> {
        self.ensure_dir()?;
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn db(p: f64) -> f64 {
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-iteration trace: `iteration,received_power_db[,specular_power_db],rho`.
pub fn trace_csv(ctx: &OutputContext, state: &OptState) -> String {
    let with_specular = state.trace.iter().any(|t| t.specular_power.is_some());
    let mut out = String::new();
    let _ = writeln!(out, "{}", ctx.header());
    if with_specular {
        let _ = writeln!(out, "iteration,received_power_db,specular_power_db,rho");
    } else {
        let _ = writeln!(out, "iteration,received_power_db,rho");
    }
    for t in &state.trace {
        if with_specular {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6e}",
                t.iteration,
                db(t.received_power),
                db(t.specular_power.unwrap_or(0.0)),
                t.rho
            );
        } else {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6e}",
                t.iteration,
                db(t.received_power),
                t.rho
            );
        }
    }
    out
}

/// Optimized loads: one row per element with phase, reactance, and the
/// complex reflection coefficient.
pub fn loads_csv(ctx: &OutputContext, state: &OptState, r0: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", ctx.header());
    let _ = writeln!(
        out,
        "element,phase_deg,reactance_ohm,resistance_ohm,gamma_re,gamma_im"
    );
    let reactances = state.reactances();
    for (k, (&phi, &x)) in state.phases.iter().zip(reactances.iter()).enumerate() {
        let g = state.gammas[k];
        let _ = writeln!(
            out,
            "{},{:.10},{:.10e},{:.3},{:.10},{:.10}",
            k,
            phi.to_degrees(),
            x,
            r0,
            g.re,
            g.im
        );
    }
    out
}

/// Parses a loads CSV back into per-element phases (radians).
pub fn parse_loads_csv(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut phases = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("element,") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            anyhow::bail!("malformed loads row `{line}`");
        }
        let deg: f64 = fields[1]
            .parse()
            .with_context(|| format!("bad phase in `{line}`"))?;
        phases.push(deg.to_radians());
    }
    if phases.is_empty() {
        anyhow::bail!("loads file has no data rows");
    }
    Ok(phases)
}

/// Pattern samples: `angle_deg,power_w,power_db`. With `normalize` the dB
/// column is referenced to the sweep peak.
pub fn pattern_csv(ctx: &OutputContext, result: &PatternResult, normalize: bool) -> String {
    let peak_db = result.peak().map(|p| p.power_db).unwrap_or(0.0);
    let offset = if normalize && peak_db.is_finite() {
        peak_db
    } else {
        0.0
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", ctx.header());
    let _ = writeln!(out, "angle_deg,power_w,power_db");
    for s in &result.samples {
        let _ = writeln!(
            out,
            "{:.4},{:.10e},{:.6}",
            s.angle_deg,
            s.power_w,
            s.power_db - offset
        );
    }
    out
}

pub fn lobes_json(ctx: &OutputContext, lobes: &[(&str, &LobeMetric)]) -> String {
    let entries: Vec<serde_json::Value> = lobes
        .iter()
        .map(|(label, m)| {
            serde_json::json!({
                "label": label,
                "window_center_deg": m.window.center_deg,
                "window_half_width_deg": m.window.half_width_deg,
                "peak_angle_deg": m.peak_angle_deg,
                "peak_power_w": m.peak_power_w,
                "peak_power_db": m.peak_power_db,
            })
        })
        .collect();
    let value = serde_json::json!({
        "config_hash": ctx.config_hash,
        "seed": ctx.seed,
        "lobes": entries,
    });
    serde_json::to_string_pretty(&value).expect("lobe summary serialization")
}
