//! Readout fidelity, saturation fits, error-correction metrics and the
//! calibrations that pin κ, the contrast and A_es.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::experiment::{ProtocolKind, ReadoutModel};
use crate::math::{exp, linear_regression, ln, sqrt};
use crate::physics::{FlipFlopProbs, MagneticField};
use crate::simulator::{shard_rng, ShotTraces};

/// F = (1 + (C₀+C₁)/(C₀−C₁)²)^(−1/2), and 0 when the counts coincide.
pub fn readout_fidelity(c0: f64, c1: f64) -> f64 {
    let d = c0 - c1;
    if d == 0.0 {
        return 0.0;
    }
    1.0 / sqrt(1.0 + (c0 + c1) / (d * d))
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), Error> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Prefix sums of `trace0 − trace1`.
pub fn cumulative_signal(trace0: &[f64], trace1: &[f64]) -> Result<Vec<f64>, Error> {
    check_lengths(trace0, trace1)?;
    let mut acc = 0.0;
    Ok(trace0
        .iter()
        .zip(trace1)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityCurve {
    pub n: Vec<usize>,
    pub f: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    /// Cumulative (C₀, C₁) behind each point. Empty when the curve was built from F alone.
    pub totals: Vec<(f64, f64)>,
}

impl FidelityCurve {
    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &f) in self.f.iter().enumerate() {
            if f > self.f[best] {
                best = i;
            }
        }
        best
    }

    /// `(N_opt, F_max)`; the first N wins ties. Panics on an empty curve.
    pub fn peak(&self) -> (usize, f64) {
        let i = self.argmax();
        (self.n[i], self.f[i])
    }

    /// Cumulative counts at the peak, when known.
    pub fn peak_totals(&self) -> Option<(f64, f64)> {
        self.totals.get(self.argmax()).copied()
    }
}

pub fn fidelity_vs_n(trace0: &[f64], trace1: &[f64]) -> Result<FidelityCurve, Error> {
    check_lengths(trace0, trace1)?;
    let mut c0 = 0.0;
    let mut c1 = 0.0;
    let mut curve = FidelityCurve {
        n: Vec::with_capacity(trace0.len()),
        f: Vec::with_capacity(trace0.len()),
        sigma: None,
        totals: Vec::with_capacity(trace0.len()),
    };
    for (k, (a, b)) in trace0.iter().zip(trace1).enumerate() {
        c0 += a;
        c1 += b;
        curve.n.push(k + 1);
        curve.f.push(readout_fidelity(c0, c1));
        curve.totals.push((c0, c1));
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationFit {
    pub amplitude: f64,
    pub n_1e: f64,
    /// Euclidean norm of the residuals.
    pub residual_norm: f64,
    /// Set when N_1e lies beyond the data window, so only a lower bound is meaningful.
    pub low_confidence: bool,
    pub iterations: usize,
}

const FIT_MAX_ITER: usize = 200;

/// Fits `A·(1 − exp(−N/N_1e))` to `signal[k]` at N = k + 1.
pub fn fit_saturation(signal: &[f64]) -> Result<SaturationFit, Error> {
    let x: Vec<f64> = (1..=signal.len()).map(|k| k as f64).collect();
    fit_saturation_xy(&x, signal)
}

/// Least squares on arbitrary abscissae. For fixed N_1e the best A is
/// linear, so only ln N_1e is searched: a downhill bracket from the
/// starting guess, then golden-section refinement.
pub fn fit_saturation_xy(x: &[f64], y: &[f64]) -> Result<SaturationFit, Error> {
    check_lengths(x, y)?;
    if x.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "signal",
            reason: "at least 3 points are required",
        });
    }
    let x_max = x.iter().copied().fold(f64::MIN, f64::max);
    let x_min = x.iter().copied().fold(f64::MAX, f64::min);
    if x_min.is_nan() || x_min <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: "abscissae must be positive",
        });
    }
    let diverged = |iterations| Error::FitDiverged { iterations };

    let a0 = y[y.len() - 1];
    if !a0.is_finite() || a0 == 0.0 {
        return Err(diverged(0));
    }
    let third = a0 / 3.0;
    let x_third = x
        .iter()
        .zip(y)
        .find(|(_, &v)| (a0 > 0.0 && v >= third) || (a0 < 0.0 && v <= third))
        .map(|(&xi, _)| xi)
        .unwrap_or(x_max);
    let lt_lo = ln(1e-3 * x_min);
    let lt_hi = ln(1e4 * x_max);
    // A(1 − e^{−x/τ}) = A/3 at x = τ ln 1.5.
    let start = ln(x_third / ln(1.5)).clamp(lt_lo, lt_hi);

    // (cost, A) at ln τ.
    let profile = |lt: f64| -> (f64, f64) {
        let tau = exp(lt);
        let (mut gg, mut gy) = (0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let g = 1.0 - exp(-xi / tau);
            gg += g * g;
            gy += g * yi;
        }
        let a = gy / gg;
        let c = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let r = a * (1.0 - exp(-xi / tau)) - yi;
                r * r
            })
            .sum();
        (c, a)
    };

    let mut iterations = 0;
    // Bracket: walk downhill in steps that double.
    let mut mid = (start, profile(start).0);
    let mut step = 0.25;
    let probe = |lt: f64| (lt, profile(lt).0);
    let mut left = probe((mid.0 - step).max(lt_lo));
    let mut right = probe((mid.0 + step).min(lt_hi));
    loop {
        iterations += 1;
        if iterations > FIT_MAX_ITER || !mid.1.is_finite() {
            return Err(diverged(iterations));
        }
        if left.1 >= mid.1 && right.1 >= mid.1 {
            break;
        }
        step *= 2.0;
        if left.1 < right.1 {
            if left.0 <= lt_lo {
                right = mid;
                break;
            }
            right = mid;
            mid = left;
            left = probe((mid.0 - step).max(lt_lo));
        } else {
            if right.0 >= lt_hi {
                left = mid;
                break;
            }
            left = mid;
            mid = right;
            right = probe((mid.0 + step).min(lt_hi));
        }
    }

    let inv_phi = (sqrt(5.0) - 1.0) / 2.0;
    let (mut lo, mut hi) = (left.0, right.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = profile(x1).0;
    let mut f2 = profile(x2).0;
    while hi - lo > 1e-10 {
        iterations += 1;
        if iterations > FIT_MAX_ITER {
            return Err(diverged(iterations));
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = profile(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = profile(x2).0;
        }
    }
    let lt = 0.5 * (lo + hi);
    let (c, amplitude) = profile(lt);
    if !c.is_finite() || !amplitude.is_finite() {
        return Err(diverged(iterations));
    }
    let n_1e = exp(lt);
    Ok(SaturationFit {
        amplitude,
        n_1e,
        residual_norm: sqrt(c),
        low_confidence: n_1e > x_max || lt >= lt_hi - 1e-6,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementResult {
    pub f_plain_max: f64,
    pub n_plain_opt: usize,
    pub f_ec_max: f64,
    pub n_ec_opt: usize,
    pub ratio: f64,
    pub percent: f64,
}

/// Peak-to-peak comparison of two fidelity curves.
pub fn improvement(plain: &FidelityCurve, ec: &FidelityCurve) -> Result<ImprovementResult, Error> {
    if plain.is_empty() || ec.is_empty() {
        return Err(Error::InvalidN { n: 0 });
    }
    let (n_plain_opt, f_plain_max) = plain.peak();
    let (n_ec_opt, f_ec_max) = ec.peak();
    let ratio = if f_plain_max > 0.0 {
        f_ec_max / f_plain_max
    } else {
        f64::INFINITY
    };
    Ok(ImprovementResult {
        f_plain_max,
        n_plain_opt,
        f_ec_max,
        n_ec_opt,
        ratio,
        percent: (ratio - 1.0) * 100.0,
    })
}

/// Brightness factor `s` with F(s·C₀, s·C₁) = `f_target`.
///
/// F² = 1/(1 + K/s) with K = (C₀+C₁)/(C₀−C₁)², so s = K/(1/F² − 1).
pub fn brightness_equivalent(c0: f64, c1: f64, f_target: f64) -> Result<f64, Error> {
    if !(f_target > 0.0 && f_target < 1.0) {
        return Err(Error::InvalidParameter {
            name: "f_target",
            reason: "must lie in (0, 1)",
        });
    }
    let d = c0 - c1;
    if d == 0.0 {
        return Err(Error::Unreachable { target: f_target });
    }
    let k = (c0 + c1) / (d * d);
    Ok(k / (1.0 / (f_target * f_target) - 1.0))
}

/// Signal unit of the ideal error-correction chain: a code state gives
/// `alpha0·(1 − contrast)` counts per step, every other state `alpha0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealReadout {
    pub alpha0: f64,
    pub contrast: f64,
}

impl Default for IdealReadout {
    fn default() -> Self {
        IdealReadout {
            alpha0: 1e-4,
            contrast: 0.3,
        }
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    core::array::from_fn(|i| core::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// exp(Q) by scaling and squaring of a Taylor series.
fn expm3(q: &Mat3) -> Mat3 {
    let norm = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a: Mat3 = core::array::from_fn(|i| core::array::from_fn(|j| q[i][j] * scale));
    let mut out: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = out;
    for k in 1..=20 {
        // term = a^k / k!
        term = mat3_mul(&term, &a);
        for t in term.iter_mut().flatten() {
            *t /= k as f64;
        }
        for (o, t) in out.iter_mut().flatten().zip(term.iter().flatten()) {
            *o += t;
        }
    }
    for _ in 0..squarings {
        out = mat3_mul(&out, &out);
    }
    out
}

/// Population-level chain of the ideal protocol over m_I ∈ {−1, 0, +1}
/// (index 0 is the code state −1).
struct IdealChain {
    step: Mat3,
    period: Option<usize>,
    unit: IdealReadout,
}

impl IdealChain {
    fn new(period: Option<usize>, flips: FlipFlopProbs, unit: IdealReadout) -> Self {
        let u = flips.p_minus;
        let v = flips.p_plus;
        let q = [[-u, v, 0.0], [u, -u - v, v], [0.0, u, -v]];
        IdealChain {
            step: expm3(&q),
            period,
            unit,
        }
    }

    fn counts(&self, p: &[f64; 3]) -> f64 {
        self.unit.alpha0 * (1.0 - self.unit.contrast * p[0])
    }

    /// Calls `visit(n, F)` for n = 1, 2, … until it returns false or `n_max` is reached.
    fn run(&self, n_max: usize, mut visit: impl FnMut(usize, f64) -> bool) {
        let mut dark = [1.0, 0.0, 0.0];
        let mut bright = [0.0, 0.0, 1.0];
        let (mut c0, mut c1) = (0.0, 0.0);
        for k in 1..=n_max {
            c0 += self.counts(&bright);
            c1 += self.counts(&dark);
            if !visit(k, readout_fidelity(c0, c1)) {
                return;
            }
            for p in [&mut dark, &mut bright] {
                *p = core::array::from_fn(|i| (0..3).map(|j| self.step[i][j] * p[j]).sum());
            }
            if let Some(nr) = self.period {
                if k % nr == 0 {
                    for p in [&mut dark, &mut bright] {
                        p[0] += p[1];
                        p[1] = 0.0;
                    }
                }
            }
        }
    }
}

fn check_probs(flips: FlipFlopProbs) -> Result<(), Error> {
    for p in [flips.p_plus, flips.p_minus] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "flip_probability",
                reason: "must lie in [0, 1]",
            });
        }
    }
    Ok(())
}

/// F after `n` steps of the ideal chain; `period = None` means no correction.
pub fn ideal_ec_model(n: usize, period: Option<usize>, flips: FlipFlopProbs, unit: IdealReadout) -> Result<f64, Error> {
    check_probs(flips)?;
    if n == 0 || period == Some(0) {
        return Err(Error::InvalidN { n: 0 });
    }
    let mut out = 0.0;
    IdealChain::new(period, flips, unit).run(n, |_, f| {
        out = f;
        true
    });
    Ok(out)
}

/// Peak `(N_opt, F_max)` of the ideal chain. The scan stops once F has
/// dropped below 90% of the running maximum, or at `n_max`.
pub fn ideal_ec_peak(
    period: Option<usize>,
    flips: FlipFlopProbs,
    unit: IdealReadout,
    n_max: usize,
) -> Result<(usize, f64), Error> {
    check_probs(flips)?;
    if period == Some(0) {
        return Err(Error::InvalidN { n: 0 });
    }
    let mut best = (0, 0.0);
    IdealChain::new(period, flips, unit).run(n_max, |k, f| {
        if f > best.1 {
            best = (k, f);
        }
        f >= 0.9 * best.1
    });
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub periods: Vec<usize>,
    /// Peak-fidelity ratio, corrected over uncorrected, per period.
    pub improvements: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// Log-log regression of the ideal-chain improvement against the correction period.
pub fn ideal_ec_scaling(
    periods: &[usize],
    flips: FlipFlopProbs,
    unit: IdealReadout,
    n_max: usize,
) -> Result<ScalingFit, Error> {
    if periods.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "periods",
            reason: "at least two periods are required",
        });
    }
    let (_, f_plain) = ideal_ec_peak(None, flips, unit, n_max)?;
    let mut improvements = Vec::with_capacity(periods.len());
    for &nr in periods {
        improvements.push(ideal_ec_peak(Some(nr), flips, unit, n_max)?.1 / f_plain);
    }
    let lx: Vec<f64> = periods.iter().map(|&p| ln(p as f64)).collect();
    let ly: Vec<f64> = improvements.iter().map(|&r| ln(r)).collect();
    let (slope, intercept) = linear_regression(&lx, &ly);
    Ok(ScalingFit {
        periods: periods.to_vec(),
        improvements,
        slope,
        intercept,
    })
}

/// Result of fitting κ to a saturation scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaCalibration {
    pub kappa: f64,
    pub fit: SaturationFit,
    pub iterations: usize,
}

pub const KAPPA_RANGE: (f64, f64) = (1e-3, 1e3);
const FIT_WINDOW_CAP: usize = 200_000;

/// Plain-readout signal window used when fitting N_1e for a given target.
pub fn fit_window(target_n1e: f64) -> usize {
    let w = libm::ceil(4.0 * target_n1e);
    if w.is_finite() && w < FIT_WINDOW_CAP as f64 {
        (w as usize).max(64)
    } else {
        FIT_WINDOW_CAP
    }
}

/// Fitted N_1e of the plain readout signal over `window` slots.
pub fn fitted_n1e(model: &ReadoutModel, window: usize) -> Result<SaturationFit, Error> {
    let traces = model.traces(ProtocolKind::Plain, window)?;
    fit_saturation(&traces.signal())
}

/// Bisection in ln κ so the fitted N_1e of `model` (at its own field) hits `target_n1e` within 0.1%.
pub fn calibrate_kappa(model: &ReadoutModel, target_n1e: f64) -> Result<KappaCalibration, Error> {
    if !(target_n1e > 0.0 && target_n1e.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "target_n1e",
            reason: "must be positive and finite",
        });
    }
    model.validate()?;
    let window = fit_window(target_n1e);
    let eval = |ln_kappa: f64| -> Result<SaturationFit, Error> {
        let mut m = *model;
        m.system.readout.kappa = exp(ln_kappa);
        fitted_n1e(&m, window)
    };
    // Larger κ means faster depolarization and a smaller N_1e.
    let mut lo = ln(KAPPA_RANGE.0);
    let mut hi = ln(KAPPA_RANGE.1);
    let at_lo = eval(lo)?;
    let at_hi = eval(hi)?;
    if !(target_n1e <= at_lo.n_1e && target_n1e >= at_hi.n_1e) {
        return Err(Error::NoBracket {
            target: target_n1e,
            low: at_hi.n_1e,
            high: at_lo.n_1e,
        });
    }
    let mut best = (hi, at_hi);
    for iterations in 1..=100 {
        let mid = 0.5 * (lo + hi);
        let fit = eval(mid)?;
        best = (mid, fit);
        let rel = fit.n_1e / target_n1e - 1.0;
        if rel.abs() < 1e-3 || hi - lo < 1e-12 {
            return Ok(KappaCalibration {
                kappa: exp(mid),
                fit,
                iterations,
            });
        }
        if rel > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(KappaCalibration {
        kappa: exp(best.0),
        fit: best.1,
        iterations: 100,
    })
}

/// Contrast `c` with F(alpha0, alpha0·(1−c)) = `target_f`.
pub fn calibrate_contrast(target_f: f64, alpha0: f64) -> Result<f64, Error> {
    calibrate_contrast_with(target_f, alpha0, 1.0, 0.0)
}

/// Closed-form inversion when the two preparations leave bright (m_s = 0)
/// fractions `bright0` and `bright1` at the readout:
/// C_j = alpha0·(1 − c·(1 − bright_j)).
pub fn calibrate_contrast_with(target_f: f64, alpha0: f64, bright0: f64, bright1: f64) -> Result<f64, Error> {
    if !(target_f > 0.0 && target_f < 1.0) {
        return Err(Error::InvalidParameter {
            name: "target_f",
            reason: "must lie in (0, 1)",
        });
    }
    if alpha0.is_nan() || alpha0 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "alpha0",
            reason: "must be positive",
        });
    }
    let v = bright0 - bright1;
    if v <= 0.0 {
        return Err(Error::Unreachable { target: target_f });
    }
    // With D = alpha0·c·v and S = C₀+C₁ = alpha0·(2 − c·w):
    // D²·(1/F² − 1) = S  ⇒  alpha0·v²·k·c² + w·c − 2 = 0, k = 1/F² − 1.
    let w = 2.0 - bright0 - bright1;
    let k = 1.0 / (target_f * target_f) - 1.0;
    let a = alpha0 * v * v * k;
    let c = (-w + sqrt(w * w + 8.0 * a)) / (2.0 * a);
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Unreachable { target: target_f });
    }
    Ok(c)
}

/// Contrast for which the model's own conventional single readout
/// (pumped start, hard π, charge state) reaches `target_f`. F rises
/// monotonically with the contrast, so a bisection on (0, 1] suffices.
pub fn calibrate_contrast_model(model: &ReadoutModel, target_f: f64) -> Result<f64, Error> {
    if !(target_f > 0.0 && target_f < 1.0) {
        return Err(Error::InvalidParameter {
            name: "target_f",
            reason: "must lie in (0, 1)",
        });
    }
    let eval = |c: f64| {
        let mut m = *model;
        m.system.readout.contrast = c;
        m.conventional_fidelity()
    };
    if eval(1.0) < target_f {
        return Err(Error::Unreachable { target: target_f });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < target_f {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Targets of the joint (κ, A_es) fit: a saturation scale at a high field
/// plus the plain and corrected peaks at a moderate field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTargets {
    pub high_field: MagneticField,
    pub n_1e: f64,
    pub moderate_field: MagneticField,
    pub period: usize,
    pub plain_f: f64,
    pub plain_n: f64,
    pub ec_f: f64,
    pub ec_n: f64,
    /// Longest readout train scanned at the moderate field.
    pub n_max: usize,
    /// Search interval for A_es (GHz).
    pub a_es_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFit {
    pub kappa: f64,
    pub a_es: f64,
    /// Sum of squared log errors over the four moderate-field targets.
    pub loss: f64,
    pub improvement: ImprovementResult,
}

fn joint_loss(model: &ReadoutModel, t: &JointTargets, a_es: f64) -> Result<JointFit, Error> {
    let mut high = *model;
    high.system.physics.a_es = a_es;
    high.system.field = t.high_field;
    let kappa = calibrate_kappa(&high, t.n_1e)?.kappa;
    let mut moderate = high;
    moderate.system.readout.kappa = kappa;
    moderate.system.field = t.moderate_field;
    let imp = moderate.improvement(t.period, t.n_max)?;
    let sq = |got: f64, want: f64| {
        let e = ln(got / want);
        e * e
    };
    let loss = sq(imp.f_plain_max, t.plain_f)
        + sq(imp.n_plain_opt as f64, t.plain_n)
        + sq(imp.f_ec_max, t.ec_f)
        + sq(imp.n_ec_opt as f64, t.ec_n);
    Ok(JointFit {
        kappa,
        a_es,
        loss,
        improvement: imp,
    })
}

/// Golden-section search over ln A_es, re-fitting κ at the high field for each trial.
pub fn calibrate_joint(model: &ReadoutModel, targets: &JointTargets) -> Result<JointFit, Error> {
    let (a_lo, a_hi) = targets.a_es_range;
    if !(a_lo > 0.0 && a_hi > a_lo) {
        return Err(Error::InvalidParameter {
            name: "a_es_range",
            reason: "must be an increasing pair of positive values",
        });
    }
    let inv_phi = (sqrt(5.0) - 1.0) / 2.0;
    let mut lo = ln(a_lo);
    let mut hi = ln(a_hi);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = joint_loss(model, targets, exp(x1))?;
    let mut f2 = joint_loss(model, targets, exp(x2))?;
    while hi - lo > 1e-3 {
        if f1.loss <= f2.loss {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = joint_loss(model, targets, exp(x1))?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = joint_loss(model, targets, exp(x2))?;
        }
    }
    Ok(if f1.loss <= f2.loss { f1 } else { f2 })
}

/// A bootstrap resample: shot indices drawn with replacement from one run.
pub struct Resample<'a> {
    traces: &'a ShotTraces,
    idx: &'a [usize],
}

impl<'a> Resample<'a> {
    pub fn new(traces: &'a ShotTraces, idx: &'a [usize]) -> Self {
        Resample { traces, idx }
    }

    pub fn n_shots(&self) -> usize {
        self.idx.len()
    }

    pub fn n_readouts(&self) -> usize {
        self.traces.n_readouts
    }

    pub fn row(&self, i: usize) -> &[u32] {
        self.traces.row(self.idx[i])
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.traces.n_readouts];
        for &i in self.idx {
            for (s, &c) in sums.iter_mut().zip(self.traces.row(i)) {
                *s += c as f64;
            }
        }
        let n = self.idx.len() as f64;
        sums.iter().map(|s| s / n).collect()
    }

    /// Mean over shots of the summed counts of the first `n` slots.
    pub fn mean_total(&self, n: usize) -> f64 {
        let sum: u64 = self
            .idx
            .iter()
            .map(|&i| self.traces.row(i)[..n].iter().map(|&c| c as u64).sum::<u64>())
            .sum();
        sum as f64 / self.idx.len() as f64
    }
}

pub const BOOTSTRAP_MIN_SHOTS: usize = 100;
pub const DEFAULT_RESAMPLES: usize = 1000;

fn check_shots(t: &ShotTraces) -> Result<(), Error> {
    if t.n_shots < BOOTSTRAP_MIN_SHOTS {
        return Err(Error::InsufficientShots {
            required: BOOTSTRAP_MIN_SHOTS,
            got: t.n_shots,
        });
    }
    Ok(())
}

/// Statistic of resample `r`. Each resample has its own random stream, so
/// replicates may be computed in any order or in parallel.
pub fn bootstrap_replicate<F>(a: &ShotTraces, b: &ShotTraces, statistic: &F, r: usize, seed: u64) -> f64
where
    F: Fn(&Resample, &Resample) -> f64,
{
    let mut rng = shard_rng(seed, r);
    let ia: Vec<usize> = (0..a.n_shots).map(|_| rng.random_range(0..a.n_shots)).collect();
    let ib: Vec<usize> = (0..b.n_shots).map(|_| rng.random_range(0..b.n_shots)).collect();
    statistic(&Resample::new(a, &ia), &Resample::new(b, &ib))
}

/// Sample standard deviation of bootstrap replicates.
pub fn standard_error(replicates: &[f64]) -> f64 {
    let n = replicates.len();
    if n < 2 {
        return 0.0;
    }
    let mean = replicates.iter().sum::<f64>() / n as f64;
    let ss: f64 = replicates.iter().map(|v| (v - mean) * (v - mean)).sum();
    sqrt(ss / (n - 1) as f64)
}

/// Nonparametric bootstrap standard error of `statistic` over a pair of shot sets.
pub fn bootstrap_se<F>(a: &ShotTraces, b: &ShotTraces, statistic: F, resamples: usize, seed: u64) -> Result<f64, Error>
where
    F: Fn(&Resample, &Resample) -> f64,
{
    check_shots(a)?;
    check_shots(b)?;
    let reps: Vec<f64> = (0..resamples)
        .map(|r| bootstrap_replicate(a, b, &statistic, r, seed))
        .collect();
    Ok(standard_error(&reps))
}

/// Checks the bootstrap preconditions without running it.
pub fn bootstrap_check(a: &ShotTraces, b: &ShotTraces) -> Result<(), Error> {
    check_shots(a)?;
    check_shots(b)
}
