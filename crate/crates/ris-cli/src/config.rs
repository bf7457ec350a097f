//! Run configuration: a TOML file of flat `section.key = value` entries.
//! Key names and units are normative; unknown keys are rejected.

use anyhow::{bail, Context};
use nalgebra::Vector3;
use serde::Deserialize;

use ris_core::em_scene::{expand_grid, DipoleElement, RisGridSpec, Scenario};
use ris_core::multipath::ClusterSpec;
use ris_core::optimizer::{AlgoParams, FeasibleSet};
use ris_core::SPEED_OF_LIGHT;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub pattern: PatternConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Carrier frequency, Hz.
    pub frequency_hz: f64,
    /// Reference impedance, ohm.
    pub reference_impedance_ohm: f64,
    /// Transmitter feed-point position, m.
    pub tx_position_m: [f64; 3],
    /// Receiver placement: index k puts it at angle asin(k/4) on a circle
    /// of `rx_radius_m` around the surface center.
    pub receiver_k: Option<u32>,
    /// Explicit receiver position, m (overrides `receiver_k`).
    pub rx_position_m: Option<[f64; 3]>,
    pub rx_radius_m: f64,
    /// Dipole length in wavelengths.
    pub dipole_length_wl: f64,
    /// Dipole wire radius in wavelengths.
    pub dipole_radius_wl: f64,
    pub direct_link_blocked: bool,
    pub ris: RisConfig,
    pub cluster: Option<ClusterConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 28.0e9,
            reference_impedance_ohm: 50.0,
            tx_position_m: [4.0, 0.0, 0.0],
            receiver_k: Some(3),
            rx_position_m: None,
            rx_radius_m: 4.0,
            dipole_length_wl: 0.46,
            dipole_radius_wl: 1.0 / 500.0,
            direct_link_blocked: true,
            ris: RisConfig::default(),
            cluster: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisConfig {
    pub n_y: usize,
    pub n_z: usize,
    /// Element spacing along y, wavelengths.
    pub d_y_wl: f64,
    /// Element spacing along z, wavelengths.
    pub d_z_wl: f64,
    pub center_m: [f64; 3],
}

impl Default for RisConfig {
    fn default() -> Self {
        Self {
            n_y: 8,
            n_z: 4,
            d_y_wl: 0.125,
            d_z_wl: 0.75,
            center_m: [0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub object_count: usize,
    pub center_m: [f64; 3],
    /// Placement radius around the center, m.
    pub spread_m: f64,
    /// Scatterer dipole length, wavelengths (short-circuited thin wires).
    pub object_length_wl: f64,
    /// Placement seed; defaults to the output seed.
    pub seed: Option<u64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            object_count: 100,
            center_m: [2.0, 2.0, 0.0],
            spread_m: 0.5,
            object_length_wl: 0.5,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// One of: s-uni, s-opt, s-opt-omega, z-ref, s-diag, oracle.
    pub name: String,
    pub delta0: f64,
    pub eta: f64,
    pub max_iterations: usize,
    pub r0_ohm: f64,
    pub omega: f64,
    /// Transmit power against the unit-normalized channel.
    pub sigma_s2: f64,
    /// Noise power against the unit-normalized channel.
    pub sigma_n2: f64,
    /// `full`, `interval:<lo_deg>:<hi_deg>`, `discrete:<deg>,<deg>,...`,
    /// or `varactor-mavr011020`.
    pub feasible: String,
    /// `uncoupled` (coupling-free optimum) or `uniform:<deg>`.
    pub init: String,
    /// Grid step for the oracle, degrees.
    pub oracle_phase_step_deg: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            name: "s-opt".to_string(),
            delta0: 0.01,
            eta: 1e-4,
            max_iterations: 500,
            r0_ohm: 0.2,
            omega: 0.0,
            sigma_s2: 1.0,
            sigma_n2: 0.01,
            feasible: "full".to_string(),
            init: "uncoupled".to_string(),
            oracle_phase_step_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub omega: Option<Vec<f64>>,
    pub d_y_wl: Option<Vec<f64>>,
    pub receiver_k: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub algorithms: Vec<String>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![
                "s-uni".to_string(),
                "s-opt".to_string(),
                "s-diag".to_string(),
            ],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub arc_radius_m: f64,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
    /// Lobe windows: half-widths around the specular direction and the
    /// target receiver angle.
    pub specular_window_deg: f64,
    pub desired_window_deg: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            arc_radius_m: 4.0,
            angle_min_deg: -90.0,
            angle_max_deg: 90.0,
            angle_step_deg: 0.5,
            specular_window_deg: 10.0,
            desired_window_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub seed: u64,
    /// Normalize pattern dB columns to the sweep peak.
    pub normalize: bool,
    /// Embed a generation timestamp in output headers (off keeps outputs
    /// byte-reproducible).
    pub timestamps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            seed: 1,
            normalize: false,
            timestamps: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let s = &self.scenario;
        if !(s.frequency_hz > 0.0) {
            bail!("scenario.frequency_hz must be positive");
        }
        if s.receiver_k.is_none() && s.rx_position_m.is_none() {
            bail!("scenario needs receiver_k or rx_position_m");
        }
        if let Some(k) = s.receiver_k {
            if !(1..=4).contains(&k) {
                bail!("scenario.receiver_k must be 1..=4");
            }
        }
        algorithm_kind(&self.algorithm.name)?;
        parse_feasible(
            &self.algorithm.feasible,
            s.frequency_hz,
            s.reference_impedance_ohm,
        )?;
        parse_init(&self.algorithm.init)?;
        if self.pattern.angle_step_deg <= 0.0
            || self.pattern.angle_max_deg <= self.pattern.angle_min_deg
        {
            bail!("pattern grid must be increasing with a positive step");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.scenario.frequency_hz
    }

    pub fn element_template(&self) -> DipoleElement {
        let wl = self.wavelength();
        DipoleElement::z_oriented(
            Vector3::zeros(),
            self.scenario.dipole_length_wl * wl,
            self.scenario.dipole_radius_wl * wl,
        )
    }

    pub fn rx_position(&self) -> anyhow::Result<Vector3<f64>> {
        if let Some(p) = self.scenario.rx_position_m {
            return Ok(Vector3::new(p[0], p[1], p[2]));
        }
        let k = self.scenario.receiver_k.unwrap();
        let psi = (k as f64 / 4.0).asin();
        let c = Vector3::new(
            self.scenario.ris.center_m[0],
            self.scenario.ris.center_m[1],
            self.scenario.ris.center_m[2],
        );
        Ok(c + Vector3::new(psi.cos(), psi.sin(), 0.0) * self.scenario.rx_radius_m)
    }

    /// Target angle of the receiver for lobe windows, degrees.
    pub fn rx_angle_deg(&self) -> anyhow::Result<f64> {
        let c = Vector3::new(
            self.scenario.ris.center_m[0],
            self.scenario.ris.center_m[1],
            self.scenario.ris.center_m[2],
        );
        let r = self.rx_position()? - c;
        Ok(r.y.atan2(r.x).to_degrees())
    }

    /// Builds the scenario, placing the cluster with the given seed when one
    /// is configured.
    pub fn build_scenario(&self, seed: u64) -> anyhow::Result<Scenario> {
        self.build_scenario_with(seed, None, None)
    }

    /// Variant with per-sweep-point overrides.
    pub fn build_scenario_with(
        &self,
        seed: u64,
        d_y_wl: Option<f64>,
        receiver_k: Option<u32>,
    ) -> anyhow::Result<Scenario> {
        let wl = self.wavelength();
        let template = self.element_template();
        let ris_cfg = &self.scenario.ris;
        let grid = RisGridSpec {
            n_y: ris_cfg.n_y,
            n_z: ris_cfg.n_z,
            d_y: d_y_wl.unwrap_or(ris_cfg.d_y_wl) * wl,
            d_z: ris_cfg.d_z_wl * wl,
            center: Vector3::new(
                ris_cfg.center_m[0],
                ris_cfg.center_m[1],
                ris_cfg.center_m[2],
            ),
        };
        let ris_elements = expand_grid(&grid, &template)?;

        let rx = match receiver_k {
            Some(k) => {
                let psi = (k as f64 / 4.0).asin();
                grid.center + Vector3::new(psi.cos(), psi.sin(), 0.0) * self.scenario.rx_radius_m
            }
            None => self.rx_position()?,
        };

        let cluster_elements = match &self.scenario.cluster {
            Some(c) => {
                let object = DipoleElement::z_oriented(
                    Vector3::zeros(),
                    c.object_length_wl * wl,
                    self.scenario.dipole_radius_wl * wl,
                );
                let spec = ClusterSpec::short_circuited(
                    c.object_count,
                    Vector3::new(c.center_m[0], c.center_m[1], c.center_m[2]),
                    c.spread_m,
                    object,
                );
                spec.place(c.seed.unwrap_or(seed))?
            }
            None => Vec::new(),
        };

        Ok(Scenario {
            frequency: self.scenario.frequency_hz,
            reference_impedance: self.scenario.reference_impedance_ohm,
            tx_elements: vec![template.at(Vector3::new(
                self.scenario.tx_position_m[0],
                self.scenario.tx_position_m[1],
                self.scenario.tx_position_m[2],
            ))],
            ris_elements,
            rx_elements: vec![template.at(rx)],
            cluster_elements,
            direct_link_blocked: self.scenario.direct_link_blocked,
        })
    }

    pub fn algo_params(&self) -> anyhow::Result<AlgoParams> {
        let a = &self.algorithm;
        Ok(AlgoParams {
            delta0: a.delta0,
            eta: a.eta,
            max_iterations: a.max_iterations,
            parasitic_resistance: a.r0_ohm,
            omega: a.omega,
            signal_power: a.sigma_s2,
            noise_power: a.sigma_n2,
            feasible_set: parse_feasible(
                &a.feasible,
                self.scenario.frequency_hz,
                self.scenario.reference_impedance_ohm,
            )?,
            record_phase_history: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    SUni,
    SOpt,
    SOptOmega,
    ZRef,
    SDiag,
    Oracle,
}

pub fn algorithm_kind(name: &str) -> anyhow::Result<AlgorithmKind> {
    Ok(match name {
        "s-uni" => AlgorithmKind::SUni,
        "s-opt" => AlgorithmKind::SOpt,
        "s-opt-omega" => AlgorithmKind::SOptOmega,
        "z-ref" => AlgorithmKind::ZRef,
        "s-diag" => AlgorithmKind::SDiag,
        "oracle" => AlgorithmKind::Oracle,
        other => bail!(
            "unknown algorithm `{other}` (expected s-uni, s-opt, s-opt-omega, z-ref, s-diag, oracle)"
        ),
    })
}

#[derive(Debug, Clone, Copy)]
pub enum InitChoice {
    Uncoupled,
    Uniform(f64),
}

pub fn parse_init(text: &str) -> anyhow::Result<InitChoice> {
    if text == "uncoupled" {
        return Ok(InitChoice::Uncoupled);
    }
    if let Some(rest) = text.strip_prefix("uniform:") {
        let deg: f64 = rest.parse().context("parsing uniform init angle")?;
        return Ok(InitChoice::Uniform(deg.to_radians()));
    }
    bail!("unknown init `{text}` (expected `uncoupled` or `uniform:<deg>`)")
}

/// Parses the feasible-set key. The varactor preset maps the device's
/// usable reactance range through a 0.1-wavelength line offset into a
/// symmetric phase window.
pub fn parse_feasible(text: &str, frequency: f64, z0: f64) -> anyhow::Result<FeasibleSet> {
    if text == "full" {
        return Ok(FeasibleSet::FullCircle);
    }
    if let Some(rest) = text.strip_prefix("interval:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            bail!("interval feasible set needs `interval:<lo_deg>:<hi_deg>`");
        }
        let lo: f64 = parts[0].parse().context("interval low edge")?;
        let hi: f64 = parts[1].parse().context("interval high edge")?;
        let set = FeasibleSet::interval_deg(lo, hi);
        set.validate().map_err(anyhow::Error::msg)?;
        return Ok(set);
    }
    if let Some(rest) = text.strip_prefix("discrete:") {
        let values: Result<Vec<f64>, _> =
            rest.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let values = values.context("discrete phase list")?;
        let set = FeasibleSet::discrete_deg(&values);
        set.validate().map_err(anyhow::Error::msg)?;
        return Ok(set);
    }
    if text == "varactor-mavr011020" {
        return Ok(varactor_preset(frequency, z0));
    }
    bail!("unknown feasible set `{text}`")
}

/// MAVR-011020-1141 preset: capacitance 0.025–0.19 pF gives reactances
/// −227…−30 Ω at 28 GHz; a 0.1λ series line rotates the reflection phase by
/// +72°, centering the achievable window around zero.
pub fn varactor_preset(frequency: f64, z0: f64) -> FeasibleSet {
    let (c_min, c_max) = (0.025e-12, 0.19e-12);
    let x_lo = -1.0 / (2.0 * std::f64::consts::PI * frequency * c_max);
    let x_hi = -1.0 / (2.0 * std::f64::consts::PI * frequency * c_min);
    let line = 2.0 * (2.0 * std::f64::consts::PI * 0.1); // reflection phase of a 0.1λ line
    let phi = |x: f64| ris_core::network::phase_for_reactance(x, z0) + line;
    let wrap = |p: f64| {
        let mut w = p.rem_euclid(2.0 * std::f64::consts::PI);
        if w > std::f64::consts::PI {
            w -= 2.0 * std::f64::consts::PI;
        }
        w
    };
    let (mut lo, mut hi) = (wrap(phi(x_hi)), wrap(phi(x_lo)));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    FeasibleSet::Interval { lo, hi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_build() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.scenario.ris.n_y, 8);
        let scene = cfg.build_scenario(1).unwrap();
        assert_eq!(scene.ris_elements.len(), 32);
        assert!(scene.cluster_elements.is_empty());
        // P3: y = 3 m exactly.
        assert!((scene.rx_elements[0].position.y - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[scenario]\nfrequenzy_hz = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("parsing configuration"));
    }

    #[test]
    fn varactor_preset_matches_the_documented_window() {
        let set = varactor_preset(28.0e9, 50.0);
        match set {
            FeasibleSet::Interval { lo, hi } => {
                // ±46.7° documented window, loose tolerance for the exact
                // line length and capacitance endpoints.
                assert!(
                    (lo.to_degrees() + 46.7).abs() < 1.5,
                    "lo = {}",
                    lo.to_degrees()
                );
                assert!(
                    (hi.to_degrees() - 47.6).abs() < 1.5,
                    "hi = {}",
                    hi.to_degrees()
                );
            }
            other => panic!("expected interval, got {other:?}"),
        }
    }

    #[test]
    fn feasible_parsers() {
        assert!(matches!(
            parse_feasible("full", 28e9, 50.0).unwrap(),
            FeasibleSet::FullCircle
        ));
        assert!(matches!(
            parse_feasible("interval:-36:36", 28e9, 50.0).unwrap(),
            FeasibleSet::Interval { .. }
        ));
        assert!(matches!(
            parse_feasible("discrete:0,90,180", 28e9, 50.0).unwrap(),
            FeasibleSet::Discrete(_)
        ));
        assert!(parse_feasible("interval:40:-40", 28e9, 50.0).is_err());
        assert!(parse_feasible("nope", 28e9, 50.0).is_err());
    }
}
