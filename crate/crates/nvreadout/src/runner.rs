//! Scenario execution behind the `run`, `sweep` and `calibrate` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use nvreadout_core::analysis::{self, FidelityCurve, JointFit, JointTargets, Resample};
use nvreadout_core::physics::MagneticField;
use nvreadout_core::protocol::{sequence_duration, ElectronPrep};
use nvreadout_core::{ProtocolKind, ShotTraces};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Backend, ProtocolName, ScenarioConfig, SweepAxis};
use crate::csvio::{self, SummaryRow, SweepRow, TraceRow};
use crate::error::{AppError, Result};
use crate::parallel;
use crate::seqfmt::format_sequence;

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub kind: ProtocolKind,
}

impl Variant {
    pub fn new(kind: ProtocolKind) -> Self {
        let name = match kind {
            ProtocolKind::Plain => "plain".to_string(),
            ProtocolKind::ErrorCorrected { period } => format!("ec_nr{period}"),
        };
        Variant { name, kind }
    }
}

/// Plain readout always, plus the configured corrected protocol.
pub fn run_variants(cfg: &ScenarioConfig) -> Vec<Variant> {
    let mut v = vec![Variant::new(ProtocolKind::Plain)];
    if cfg.protocol.kind == ProtocolName::ErrorCorrected {
        v.push(Variant::new(cfg.protocol_kind()));
    }
    v
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    /// Per-slot counts for |0⟩ and |−1⟩ preparations (shot means on Monte Carlo).
    pub bright: Vec<f64>,
    pub dark: Vec<f64>,
    pub shots: Option<(ShotTraces, ShotTraces)>,
    pub curve: FidelityCurve,
    pub summary: SummaryRow,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub variants: Vec<VariantResult>,
}

/// Seed for one (variant, preparation) pair so no two runs share a stream.
fn derive_seed(seed: u64, variant: usize, prep: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(1 + 2 * variant as u64 + prep as u64)
}

fn prep_index(prep: ElectronPrep) -> usize {
    match prep {
        ElectronPrep::Zero => 0,
        ElectronPrep::MinusOne => 1,
    }
}

/// Per-shot totals of the first `n` slots as a one-column shot set.
fn totals(shots: &ShotTraces, n: usize) -> ShotTraces {
    ShotTraces {
        n_shots: shots.n_shots,
        n_readouts: 1,
        counts: shots.rows().map(|r| r[..n].iter().sum()).collect(),
        seed: shots.seed,
    }
}

pub fn evaluate(cfg: &ScenarioConfig, variant: &Variant, index: usize, n: usize) -> Result<VariantResult> {
    let model = cfg.model()?;
    let timing = cfg.timing_budget();
    let (bright, dark, shots) = match cfg.simulation.backend {
        Backend::Expectation => {
            let t = model.traces(variant.kind, n)?;
            (t.bright, t.dark, None)
        }
        Backend::Montecarlo => {
            let ic = model.initial_condition();
            let run = |prep: ElectronPrep| -> Result<ShotTraces> {
                let seq = variant.kind.build(prep, n)?;
                let seed = derive_seed(cfg.simulation.seed, index, prep_index(prep));
                Ok(parallel::sample(&seq, &ic, &model.system, cfg.simulation.shots, seed)?)
            };
            let a = run(ElectronPrep::Zero)?;
            let b = run(ElectronPrep::MinusOne)?;
            (a.column_means(), b.column_means(), Some((a, b)))
        }
    };
    let curve = analysis::fidelity_vs_n(&bright, &dark)?;
    let (n_opt, f_max) = curve.peak();
    let signal = analysis::cumulative_signal(&bright, &dark)?;
    let fit = analysis::fit_saturation(&signal).ok();
    let f_max_se = match (&shots, cfg.simulation.bootstrap) {
        (Some((a, b)), r) if r > 0 => {
            let (ta, tb) = (totals(a, n_opt), totals(b, n_opt));
            let stat = |x: &Resample, y: &Resample| analysis::readout_fidelity(x.mean_total(1), y.mean_total(1));
            Some(parallel::bootstrap_se(&ta, &tb, stat, r, cfg.simulation.seed)?)
        }
        _ => None,
    };
    let duration_us = sequence_duration(&variant.kind.build(ElectronPrep::Zero, n)?, &timing);
    let summary = SummaryRow {
        variant: variant.name.clone(),
        f_max,
        n_opt,
        n_1e: fit.map(|f| f.n_1e),
        n_1e_low_confidence: fit.map(|f| f.low_confidence),
        duration_us,
        f_max_se,
    };
    Ok(VariantResult {
        variant: variant.clone(),
        bright,
        dark,
        shots,
        curve,
        summary,
    })
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let variants = run_variants(cfg)
        .iter()
        .enumerate()
        .map(|(i, v)| evaluate(cfg, v, i, cfg.protocol.n))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        config: cfg.clone(),
        variants,
    })
}

impl RunOutput {
    pub fn trace_rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::new();
        for v in &self.variants {
            let mut signal = 0.0;
            let mut c0 = 0.0;
            let mut c1 = 0.0;
            for (k, (a, b)) in v.bright.iter().zip(&v.dark).enumerate() {
                c0 += a;
                c1 += b;
                signal += a - b;
                rows.push(TraceRow {
                    variant: v.variant.name.clone(),
                    n: k + 1,
                    c0,
                    c1,
                    signal,
                    fidelity: v.curve.f[k],
                    fidelity_se: None,
                });
            }
        }
        rows
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.variants.iter().map(|v| v.summary.clone()).collect()
    }

    /// Listing of the configured protocol for the |−1⟩ preparation.
    pub fn sequence_text(&self) -> Result<String> {
        let cfg = &self.config;
        let seq = cfg.protocol_kind().build(ElectronPrep::MinusOne, cfg.protocol.n)?;
        Ok(format_sequence(&seq, &cfg.timing_budget()))
    }

    /// Writes every output file into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| AppError::io_path(dir, e))?;
        let mut written = Vec::new();
        let p = csvio::out_path(dir, "traces.csv");
        csvio::write_rows(&p, &self.trace_rows())?;
        written.push(p);
        let p = csvio::out_path(dir, "summary.csv");
        csvio::write_rows(&p, &self.summary_rows())?;
        written.push(p);
        if self.config.output.write_sequence {
            let p = csvio::out_path(dir, "sequence.txt");
            csvio::write_text(&p, &self.sequence_text()?)?;
            written.push(p);
        }
        if self.config.output.write_shots {
            for v in &self.variants {
                if let Some((a, b)) = &v.shots {
                    for (prep, s) in [("0", a), ("m1", b)] {
                        let p = csvio::out_path(dir, &format!("shots_{}_{prep}.csv", v.variant.name));
                        csvio::write_shots(&p, s)?;
                        written.push(p);
                    }
                }
            }
        }
        Ok(written)
    }
}

/// One point of a sweep: the base config with the axis value substituted,
/// and the variants compared there.
fn sweep_point(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> (ScenarioConfig, Vec<Variant>) {
    let mut c = cfg.clone();
    let periods: Vec<usize> = match axis {
        SweepAxis::Nr => vec![value as usize],
        _ => {
            let sw = cfg.sweep.as_ref().map(|s| s.periods.clone()).unwrap_or_default();
            if !sw.is_empty() {
                sw
            } else if cfg.protocol.kind == ProtocolName::ErrorCorrected {
                cfg.protocol.nr.into_iter().collect()
            } else {
                Vec::new()
            }
        }
    };
    match axis {
        SweepAxis::B0Mt => c.field.b0_mt = value,
        SweepAxis::Nr => {
            c.protocol.kind = ProtocolName::ErrorCorrected;
            c.protocol.nr = Some(value as usize);
        }
        SweepAxis::N => c.protocol.n = value as usize,
    }
    let mut variants = vec![Variant::new(ProtocolKind::Plain)];
    variants.extend(
        periods
            .into_iter()
            .map(|period| Variant::new(ProtocolKind::ErrorCorrected { period })),
    );
    (c, variants)
}

/// Long-format sweep table, ordered by axis value then variant.
pub fn sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| AppError::invalid("sweep", "a [sweep] section is required"))?;
    let per_value: Vec<Result<Vec<SweepRow>>> = spec
        .values
        .par_iter()
        .map(|&value| {
            let (c, variants) = sweep_point(cfg, spec.axis, value);
            let mut rows = Vec::with_capacity(variants.len());
            let mut plain_f = f64::NAN;
            for (i, v) in variants.iter().enumerate() {
                let r = evaluate(&c, v, i, c.protocol.n)?;
                if i == 0 {
                    plain_f = r.summary.f_max;
                }
                rows.push(SweepRow {
                    axis: spec.axis.as_str().into(),
                    value,
                    variant: v.name.clone(),
                    f_max: r.summary.f_max,
                    n_opt: r.summary.n_opt,
                    improvement: if plain_f > 0.0 {
                        r.summary.f_max / plain_f
                    } else {
                        f64::NAN
                    },
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_value {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_sweep(rows: &[SweepRow], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| AppError::io_path(dir, e))?;
    let p = csvio::out_path(dir, "sweep.csv");
    csvio::write_rows(&p, rows)?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastMethod {
    /// Match the simulated conventional readout of the base scenario.
    #[default]
    Model,
    /// Invert F for C₀ = alpha0 and C₁ = alpha0·(1 − c).
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastTarget {
    pub f_single: f64,
    pub alpha0: f64,
    #[serde(default)]
    pub method: ContrastMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaTarget {
    pub n_1e: f64,
    pub b0_mt: f64,
}

fn default_n_max() -> usize {
    3000
}
fn default_a_min() -> f64 {
    0.02
}
fn default_a_max() -> f64 {
    2.0
}

/// Moderate-field peaks for the joint (κ, A_es) fit. Needs `[kappa]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointTarget {
    pub b0_mt: f64,
    pub nr: usize,
    pub plain_f: f64,
    pub plain_n: f64,
    pub ec_f: f64,
    pub ec_n: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_a_min")]
    pub a_es_min: f64,
    #[serde(default = "default_a_max")]
    pub a_es_max: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    pub contrast: Option<ContrastTarget>,
    pub kappa: Option<KappaTarget>,
    pub joint: Option<JointTarget>,
}

pub const DEFAULT_TARGETS: &str = include_str!("../presets/targets.toml");

impl Targets {
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        let table = crate::config::parse_table(text, source_name)?;
        let t: Targets = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            AppError::invalid(path, e.into_inner().to_string())
        })?;
        if t.joint.is_some() && t.kappa.is_none() {
            return Err(AppError::invalid("joint", "the joint fit also needs a [kappa] target"));
        }
        if t.contrast.is_none() && t.kappa.is_none() {
            return Err(AppError::invalid("", "no calibration targets given"));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationReport {
    pub contrast: Option<f64>,
    pub kappa: Option<f64>,
    pub n_1e: Option<f64>,
    pub joint: Option<JointFit>,
}

impl CalibrationReport {
    /// Parameter overlay for `--params`.
    pub fn overlay(&self, targets: &Targets) -> toml::Table {
        let mut readout = toml::Table::new();
        let mut physics = toml::Table::new();
        if let (Some(c), Some(t)) = (self.contrast, &targets.contrast) {
            readout.insert("alpha0".into(), t.alpha0.into());
            readout.insert("contrast".into(), c.into());
        }
        if let Some(j) = &self.joint {
            readout.insert("kappa".into(), j.kappa.into());
            physics.insert("a_es".into(), j.a_es.into());
        } else if let Some(k) = self.kappa {
            readout.insert("kappa".into(), k.into());
        }
        let mut out = toml::Table::new();
        if !physics.is_empty() {
            out.insert("physics".into(), physics.into());
        }
        if !readout.is_empty() {
            out.insert("readout".into(), readout.into());
        }
        out
    }
}

fn field(path: &str, mt: f64) -> Result<MagneticField> {
    MagneticField::from_millitesla(mt).map_err(|_| AppError::invalid(path, "|B0| must not exceed 1000 mT"))
}

/// Contrast first (it does not depend on κ), then κ, then the optional joint fit.
pub fn calibrate(base: &ScenarioConfig, targets: &Targets) -> Result<CalibrationReport> {
    let mut model = base.model()?;
    let mut report = CalibrationReport::default();
    if let Some(t) = &targets.contrast {
        model.system.readout.alpha0 = t.alpha0;
        let c = match t.method {
            ContrastMethod::Model => analysis::calibrate_contrast_model(&model, t.f_single)?,
            ContrastMethod::ClosedForm => analysis::calibrate_contrast(t.f_single, t.alpha0)?,
        };
        model.system.readout.contrast = c;
        report.contrast = Some(c);
    }
    if let Some(t) = &targets.kappa {
        let mut high = model;
        high.system.field = field("kappa.b0_mt", t.b0_mt)?;
        let cal = analysis::calibrate_kappa(&high, t.n_1e)?;
        report.kappa = Some(cal.kappa);
        report.n_1e = Some(cal.fit.n_1e);
        if let Some(j) = &targets.joint {
            let jt = JointTargets {
                high_field: high.system.field,
                n_1e: t.n_1e,
                moderate_field: field("joint.b0_mt", j.b0_mt)?,
                period: j.nr,
                plain_f: j.plain_f,
                plain_n: j.plain_n,
                ec_f: j.ec_f,
                ec_n: j.ec_n,
                n_max: j.n_max,
                a_es_range: (j.a_es_min, j.a_es_max),
            };
            report.joint = Some(analysis::calibrate_joint(&model, &jt)?);
        }
    }
    Ok(report)
}
