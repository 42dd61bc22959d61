//! Scenario files: a sectioned TOML document mirroring the core parameter
//! structs, plus the built-in presets.

use std::fs;
use std::path::Path;

use nvreadout_core::experiment::ReadoutModel;
use nvreadout_core::physics::{MagneticField, NuclearDistribution, PhysicsParams};
use nvreadout_core::protocol::TimingBudget;
use nvreadout_core::pulse::{GateParams, ReadoutParams};
use nvreadout_core::simulator::SystemParams;
use nvreadout_core::ProtocolKind;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub d_es: f64,
    pub a_es: f64,
    pub gyromag: f64,
    pub p_e0: f64,
    pub charge_fidelity: f64,
    pub residual_minus_share: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        let p = PhysicsParams::default();
        PhysicsSection {
            d_es: p.d_es,
            a_es: p.a_es,
            gyromag: p.gyromag,
            p_e0: p.p_e0,
            charge_fidelity: p.charge_fidelity,
            residual_minus_share: p.residual_minus_share,
        }
    }
}

impl From<&PhysicsSection> for PhysicsParams {
    fn from(s: &PhysicsSection) -> Self {
        PhysicsParams {
            d_es: s.d_es,
            a_es: s.a_es,
            gyromag: s.gyromag,
            p_e0: s.p_e0,
            charge_fidelity: s.charge_fidelity,
            residual_minus_share: s.residual_minus_share,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSection {
    pub alpha0: f64,
    pub contrast: f64,
    pub kappa: f64,
    pub repump_prob: f64,
    pub t_read: f64,
    pub t_init: f64,
    pub background: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dark_brightness: Option<f64>,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        let r = ReadoutParams::default();
        ReadoutSection {
            alpha0: r.alpha0,
            contrast: r.contrast,
            kappa: r.kappa,
            repump_prob: r.repump_prob,
            t_read: r.t_read,
            t_init: r.t_init,
            background: r.background,
            dark_brightness: r.dark_brightness,
        }
    }
}

impl From<&ReadoutSection> for ReadoutParams {
    fn from(s: &ReadoutSection) -> Self {
        ReadoutParams {
            alpha0: s.alpha0,
            contrast: s.contrast,
            kappa: s.kappa,
            repump_prob: s.repump_prob,
            t_read: s.t_read,
            t_init: s.t_init,
            background: s.background,
            dark_brightness: s.dark_brightness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatesSection {
    pub pi_fidelity: f64,
    pub crosstalk: f64,
}

impl Default for GatesSection {
    fn default() -> Self {
        let g = GateParams::default();
        GatesSection {
            pi_fidelity: g.pi_fidelity,
            crosstalk: g.crosstalk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub b0_mt: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { b0_mt: 244.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuclearSection {
    /// Initial populations of m_I = −1, 0, +1.
    pub populations: [f64; 3],
}

impl Default for NuclearSection {
    fn default() -> Self {
        NuclearSection {
            populations: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Plain,
    ErrorCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolName,
    /// Readout slots simulated; fidelity is reported for every prefix.
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nr: Option<usize>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            kind: ProtocolName::Plain,
            n: 6000,
            nr: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Expectation,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub backend: Backend,
    pub shots: usize,
    pub seed: u64,
    /// Bootstrap resamples for the error bar on F_max (Monte Carlo only; 0 disables).
    pub bootstrap: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            backend: Backend::Expectation,
            shots: 10_000,
            seed: 1,
            bootstrap: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub t_mw_selective: f64,
    pub t_mw_hard: f64,
    pub t_rf_ringdown: f64,
    pub t_ec: f64,
    pub t_readout_dead: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        let t = TimingBudget::default();
        TimingSection {
            t_mw_selective: t.t_mw_selective,
            t_mw_hard: t.t_mw_hard,
            t_rf_ringdown: t.t_rf_ringdown,
            t_ec: t.t_ec,
            t_readout_dead: t.t_readout_dead,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Per-shot CSVs (Monte Carlo only). Large for long sequences.
    pub write_shots: bool,
    pub write_sequence: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            write_shots: false,
            write_sequence: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    B0Mt,
    Nr,
    N,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::B0Mt => "b0_mt",
            SweepAxis::Nr => "nr",
            SweepAxis::N => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Correction periods compared against plain readout at each value
    /// (ignored on the `nr` axis). Defaults to `protocol.nr`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub periods: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub physics: PhysicsSection,
    pub readout: ReadoutSection,
    pub gates: GatesSection,
    pub field: FieldSection,
    pub nuclear: NuclearSection,
    pub protocol: ProtocolSection,
    pub simulation: SimulationSection,
    pub timing: TimingSection,
    pub output: OutputSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
    ("fig3c", include_str!("../presets/fig3c.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
];

pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| AppError::UnknownPreset(name.into()))
}

pub fn parse_table(text: &str, source_name: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| AppError::ConfigParse {
        source_name: source_name.into(),
        message: e.to_string(),
    })
}

pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io_path(path, e))?;
    parse_table(&text, &path.display().to_string())
}

/// Overlays `top` onto `base`: tables merge key by key, anything else is replaced.
pub fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// Deserializes and range-checks a merged table. Errors carry the dotted key path.
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            AppError::invalid(
                if path == "." { String::new() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        Self::from_table(parse_table(text, source_name)?)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::from_toml(preset_source(name)?, name)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let scoped = |section: &str, r: std::result::Result<(), nvreadout_core::Error>| {
            r.map_err(|e| match e {
                nvreadout_core::Error::InvalidParameter { name, reason } => {
                    AppError::invalid(format!("{section}.{name}"), reason)
                }
                other => AppError::invalid(section, other.to_string()),
            })
        };
        scoped("physics", PhysicsParams::from(&self.physics).validate())?;
        scoped("readout", ReadoutParams::from(&self.readout).validate())?;
        scoped("gates", self.gate_params().validate())?;
        scoped("timing", self.timing_budget().validate())?;
        scoped("field", MagneticField::from_millitesla(self.field.b0_mt).map(|_| ()))?;
        NuclearDistribution::new(
            self.nuclear.populations[0],
            self.nuclear.populations[1],
            self.nuclear.populations[2],
        )
        .map_err(|_| {
            AppError::invalid(
                "nuclear.populations",
                "need three non-negative weights with a positive sum",
            )
        })?;
        if self.protocol.n == 0 {
            return Err(AppError::invalid("protocol.n", "at least one readout is required"));
        }
        if self.protocol.nr == Some(0) {
            return Err(AppError::invalid(
                "protocol.nr",
                "the correction period must be at least 1",
            ));
        }
        if self.protocol.kind == ProtocolName::ErrorCorrected && self.protocol.nr.is_none() {
            return Err(AppError::invalid(
                "protocol.nr",
                "required for kind = \"error_corrected\"",
            ));
        }
        if self.simulation.backend == Backend::Montecarlo && self.simulation.shots == 0 {
            return Err(AppError::invalid("simulation.shots", "at least one shot is required"));
        }
        if self.simulation.bootstrap > 0 && self.simulation.shots < nvreadout_core::analysis::BOOTSTRAP_MIN_SHOTS {
            return Err(AppError::invalid(
                "simulation.bootstrap",
                "bootstrap needs at least 100 shots",
            ));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(AppError::invalid("sweep.values", "must not be empty"));
            }
            for (i, &v) in sw.values.iter().enumerate() {
                let path = format!("sweep.values[{i}]");
                let ok = match sw.axis {
                    SweepAxis::B0Mt => MagneticField::from_millitesla(v).is_ok(),
                    SweepAxis::Nr | SweepAxis::N => v >= 1.0 && v.fract() == 0.0,
                };
                if !ok {
                    return Err(AppError::invalid(path, "value out of range for this axis"));
                }
            }
            if sw.periods.contains(&0) {
                return Err(AppError::invalid("sweep.periods", "periods must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn gate_params(&self) -> GateParams {
        GateParams {
            pi_fidelity: self.gates.pi_fidelity,
            crosstalk: self.gates.crosstalk,
        }
    }

    pub fn timing_budget(&self) -> TimingBudget {
        TimingBudget {
            t_init: self.readout.t_init,
            t_read: self.readout.t_read,
            t_mw_selective: self.timing.t_mw_selective,
            t_mw_hard: self.timing.t_mw_hard,
            t_rf_ringdown: self.timing.t_rf_ringdown,
            t_ec: self.timing.t_ec,
            t_readout_dead: self.timing.t_readout_dead,
        }
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        Ok(SystemParams {
            field: MagneticField::from_millitesla(self.field.b0_mt)
                .map_err(|_| AppError::invalid("field.b0_mt", "|B0| must not exceed 1000 mT"))?,
            physics: (&self.physics).into(),
            readout: (&self.readout).into(),
            gates: self.gate_params(),
        })
    }

    pub fn model(&self) -> Result<ReadoutModel> {
        let [a, b, c] = self.nuclear.populations;
        let nuclear = NuclearDistribution::new(a, b, c).map_err(|_| {
            AppError::invalid(
                "nuclear.populations",
                "need three non-negative weights with a positive sum",
            )
        })?;
        Ok(ReadoutModel::new(self.system_params()?, nuclear))
    }

    pub fn protocol_kind(&self) -> ProtocolKind {
        match self.protocol.kind {
            ProtocolName::Plain => ProtocolKind::Plain,
            ProtocolName::ErrorCorrected => ProtocolKind::ErrorCorrected {
                period: self.protocol.nr.unwrap_or(1),
            },
        }
    }
}

/// Where a scenario comes from and what is layered on top of it.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource<'a> {
    pub preset: Option<&'a str>,
    pub file: Option<&'a Path>,
    pub params: Option<&'a Path>,
}

/// Preset (or defaults), then the config file, then the `--params` overlay.
pub fn load(src: &ConfigSource<'_>) -> Result<ScenarioConfig> {
    let mut table = match src.preset {
        Some(name) => parse_table(preset_source(name)?, name)?,
        None => toml::Table::new(),
    };
    if let Some(path) = src.file {
        merge(&mut table, read_table(path)?);
    }
    if let Some(path) = src.params {
        merge(&mut table, read_table(path)?);
    }
    ScenarioConfig::from_table(table)
}
