//! State space and pulse primitives.
//!
//! The system is represented by populations only: nine NV⁻ levels
//! `(m_s, m_I)` in lexicographic order followed by one aggregate NV⁰ level.
//! Every primitive is a column-stochastic 10×10 matrix acting on that
//! vector, optionally paired with the mean detected photon number emitted
//! from each input level.

use core::fmt;
use core::str::FromStr;

use crate::error::Error;
use crate::physics::{self, FlipFlopProbs, MagneticField, PhysicsParams};

pub const N_LEVELS: usize = 10;
/// Index of the aggregate NV⁰ (dark) level.
pub const DARK: usize = 9;

/// One NV⁻ ground-state level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Level {
    pub m_s: i8,
    pub m_i: i8,
}

impl Level {
    pub const fn new(m_s: i8, m_i: i8) -> Self {
        Level { m_s, m_i }
    }

    pub const fn index(self) -> usize {
        ((self.m_s + 1) * 3 + (self.m_i + 1)) as usize
    }

    /// Inverse of [`Level::index`]; `None` for the dark level and beyond.
    pub fn from_index(i: usize) -> Option<Self> {
        (i < DARK).then(|| Level::new(i as i8 / 3 - 1, i as i8 % 3 - 1))
    }

    pub fn bright() -> impl Iterator<Item = Level> {
        (0..DARK).filter_map(Level::from_index)
    }
}

/// Population vector over the nine NV⁻ levels and the NV⁰ level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState(pub [f64; N_LEVELS]);

impl PopulationState {
    pub fn pure(level: Level) -> Self {
        let mut p = [0.0; N_LEVELS];
        p[level.index()] = 1.0;
        PopulationState(p)
    }

    pub fn dark() -> Self {
        let mut p = [0.0; N_LEVELS];
        p[DARK] = 1.0;
        PopulationState(p)
    }

    pub fn get(&self, level: Level) -> f64 {
        self.0[level.index()]
    }

    pub fn dark_population(&self) -> f64 {
        self.0[DARK]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.0.iter().all(|&x| x >= -tol) && (self.total() - 1.0).abs() <= tol
    }

    /// Nuclear distribution of the NV⁻ part, renormalized. Uniform if the
    /// state is entirely dark.
    pub fn nuclear_marginal(&self) -> physics::NuclearDistribution {
        let mut w = [0.0; 3];
        for level in Level::bright() {
            w[(level.m_i + 1) as usize] += self.get(level);
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return physics::NuclearDistribution::UNIFORM;
        }
        physics::NuclearDistribution::from_array([w[0] / total, w[1] / total, w[2] / total])
    }

    /// Unnormalized electron populations (m_s = −1, 0, +1) of the NV⁻ part.
    pub fn electron_marginal(&self) -> [f64; 3] {
        let mut w = [0.0; 3];
        for level in Level::bright() {
            w[(level.m_s + 1) as usize] += self.get(level);
        }
        w
    }
}

/// Electron branch of a microwave transition out of m_s = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// 0 ↔ −1
    Minus,
    /// 0 ↔ +1
    Plus,
}

impl Branch {
    pub fn m_s(self) -> i8 {
        match self {
            Branch::Minus => -1,
            Branch::Plus => 1,
        }
    }
}

/// Nuclear transition driven by an RF pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NuclearPair {
    /// +1 ↔ 0
    Upper,
    /// 0 ↔ −1
    Lower,
}

impl NuclearPair {
    fn levels(self) -> (i8, i8) {
        match self {
            NuclearPair::Upper => (1, 0),
            NuclearPair::Lower => (0, -1),
        }
    }
}

/// Nuclear-spin selective electron transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MwTransition {
    pub branch: Branch,
    pub m_i: i8,
}

/// Nuclear transition within one electron manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RfTransition {
    pub manifold: i8,
    pub pair: NuclearPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionLabel {
    Mw(MwTransition),
    /// Non-selective electron π pulse on every m_I at once.
    MwHard(Branch),
    Rf(RfTransition),
}

impl TransitionLabel {
    pub const MWB: TransitionLabel = TransitionLabel::Mw(MwTransition {
        branch: Branch::Minus,
        m_i: 1,
    });
    pub const MWC: TransitionLabel = TransitionLabel::Mw(MwTransition {
        branch: Branch::Minus,
        m_i: 0,
    });
    pub const MWE: TransitionLabel = TransitionLabel::Mw(MwTransition {
        branch: Branch::Minus,
        m_i: -1,
    });
    pub const RFA: TransitionLabel = TransitionLabel::Rf(RfTransition {
        manifold: -1,
        pair: NuclearPair::Upper,
    });
    pub const RFB: TransitionLabel = TransitionLabel::Rf(RfTransition {
        manifold: -1,
        pair: NuclearPair::Lower,
    });

    const ALIASES: [(&'static str, TransitionLabel); 5] = [
        ("MWB", Self::MWB),
        ("MWC", Self::MWC),
        ("MWE", Self::MWE),
        ("RFA", Self::RFA),
        ("RFB", Self::RFB),
    ];

    pub fn is_rf(&self) -> bool {
        matches!(self, TransitionLabel::Rf(_))
    }
}

fn fmt_signed(v: i8) -> &'static str {
    match v {
        -1 => "-1",
        0 => "0",
        _ => "+1",
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((name, _)) = Self::ALIASES.iter().find(|(_, l)| l == self) {
            return f.write_str(name);
        }
        match self {
            TransitionLabel::Mw(t) => write!(f, "MW:{}:{}", fmt_signed(t.branch.m_s()), fmt_signed(t.m_i)),
            TransitionLabel::MwHard(b) => write!(f, "MWHARD:{}", fmt_signed(b.m_s())),
            TransitionLabel::Rf(t) => {
                let pair = match t.pair {
                    NuclearPair::Upper => "upper",
                    NuclearPair::Lower => "lower",
                };
                write!(f, "RF:{}:{}", fmt_signed(t.manifold), pair)
            }
        }
    }
}

fn parse_unit(s: &str) -> Option<i8> {
    match s {
        "-1" => Some(-1),
        "0" => Some(0),
        "+1" | "1" => Some(1),
        _ => None,
    }
}

fn parse_branch(s: &str) -> Option<Branch> {
    match parse_unit(s)? {
        -1 => Some(Branch::Minus),
        1 => Some(Branch::Plus),
        _ => None,
    }
}

impl FromStr for TransitionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidParameter {
            name: "label",
            reason: "unrecognized transition label",
        };
        if let Some((_, l)) = Self::ALIASES.iter().find(|(n, _)| *n == s) {
            return Ok(*l);
        }
        let mut parts = s.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let a = parts.next();
        let b = parts.next();
        if parts.next().is_some() {
            return Err(bad());
        }
        match (kind, a, b) {
            ("MW", Some(a), Some(b)) => {
                let m_i = parse_unit(b).ok_or_else(bad)?;
                Ok(TransitionLabel::Mw(MwTransition {
                    branch: parse_branch(a).ok_or_else(bad)?,
                    m_i,
                }))
            }
            ("MWHARD", Some(a), None) => Ok(TransitionLabel::MwHard(parse_branch(a).ok_or_else(bad)?)),
            ("RF", Some(a), Some(b)) => {
                let pair = match b {
                    "upper" => NuclearPair::Upper,
                    "lower" => NuclearPair::Lower,
                    _ => return Err(bad()),
                };
                Ok(TransitionLabel::Rf(RfTransition {
                    manifold: parse_unit(a).ok_or_else(bad)?,
                    pair,
                }))
            }
            _ => Err(bad()),
        }
    }
}

/// Gate error model shared by every MW and RF π pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    /// Probability a π pulse transfers population between its two levels.
    pub pi_fidelity: f64,
    /// Probability of also driving the nearest off-resonant transition.
    pub crosstalk: f64,
}

impl GateParams {
    pub const PERFECT: GateParams = GateParams {
        pi_fidelity: 1.0,
        crosstalk: 0.0,
    };

    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.pi_fidelity) {
            return Err(Error::InvalidParameter {
                name: "pi_fidelity",
                reason: "must be a probability in [0, 1]",
            });
        }
        if !(self.crosstalk >= 0.0 && self.crosstalk <= 1.0 - self.pi_fidelity + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "crosstalk",
                reason: "must lie in [0, 1 - pi_fidelity]",
            });
        }
        Ok(())
    }
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams {
            pi_fidelity: 0.95,
            crosstalk: 0.01,
        }
    }
}

/// Optical readout parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutParams {
    /// Mean detected photons per readout pulse from m_s = 0.
    pub alpha0: f64,
    /// Relative brightness reduction of m_s = ±1.
    pub contrast: f64,
    /// Effective optical cycles per readout pulse.
    pub kappa: f64,
    /// Probability a readout pulse re-pumps the electron.
    pub repump_prob: f64,
    /// Readout pulse length (ns).
    pub t_read: f64,
    /// Initialization pulse length (ns).
    pub t_init: f64,
    /// Constant background counts added to every readout pulse.
    pub background: f64,
    /// NV⁰ brightness relative to `alpha0`; `None` uses the m_s = ±1 value.
    pub dark_brightness: Option<f64>,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        ReadoutParams {
            alpha0: 0.02,
            contrast: DEFAULT_CONTRAST,
            kappa: DEFAULT_KAPPA,
            repump_prob: 0.9,
            t_read: 350.0,
            t_init: 850.0,
            background: 0.0,
            dark_brightness: None,
        }
    }
}

/// Contrast that gives a single conventional readout F = 0.03 at
/// `alpha0 = 0.02` with the default polarization, charge and gate errors.
pub const DEFAULT_CONTRAST: f64 = 0.48744;
/// κ reproducing N_1/e = 1700 at 244 mT with all other defaults.
pub const DEFAULT_KAPPA: f64 = 6.5011;

impl ReadoutParams {
    pub fn validate(&self) -> Result<(), Error> {
        let err = |name, reason| Err(Error::InvalidParameter { name, reason });
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return err("alpha0", "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return err("contrast", "must lie in [0, 1]");
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return err("kappa", "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.repump_prob) {
            return err("repump_prob", "must be a probability in [0, 1]");
        }
        if !(self.t_read > 0.0 && self.t_read.is_finite()) {
            return err("t_read", "must be a positive duration");
        }
        if !(self.t_init >= 0.0 && self.t_init.is_finite()) {
            return err("t_init", "must be a non-negative duration");
        }
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return err("background", "must be finite and >= 0");
        }
        if let Some(d) = self.dark_brightness {
            if !(d >= 0.0 && d.is_finite()) {
                return err("dark_brightness", "must be finite and >= 0");
            }
        }
        Ok(())
    }

    /// Mean photons per readout pulse for each input level.
    pub fn photon_yield(&self) -> [f64; N_LEVELS] {
        let dim = self.alpha0 * (1.0 - self.contrast);
        let mut y = [dim + self.background; N_LEVELS];
        for level in Level::bright().filter(|l| l.m_s == 0) {
            y[level.index()] = self.alpha0 + self.background;
        }
        y[DARK] = self.alpha0 * self.dark_brightness.unwrap_or(1.0 - self.contrast) + self.background;
        y
    }
}

/// Column-stochastic transition matrix (`matrix[to][from]`) plus the mean
/// photon number emitted from each input level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticMap {
    pub matrix: [[f64; N_LEVELS]; N_LEVELS],
    pub photon_yield: [f64; N_LEVELS],
}

impl StochasticMap {
    pub fn identity() -> Self {
        let mut matrix = [[0.0; N_LEVELS]; N_LEVELS];
        for (i, row) in matrix.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        StochasticMap {
            matrix,
            photon_yield: [0.0; N_LEVELS],
        }
    }

    pub fn apply(&self, state: &PopulationState) -> PopulationState {
        let mut out = [0.0; N_LEVELS];
        for (o, row) in out.iter_mut().zip(&self.matrix) {
            *o = row.iter().zip(&state.0).map(|(m, p)| m * p).sum();
        }
        PopulationState(out)
    }

    /// Expected photons emitted when the map acts on `state`.
    pub fn expected_photons(&self, state: &PopulationState) -> f64 {
        self.photon_yield.iter().zip(&state.0).map(|(y, p)| y * p).sum()
    }

    /// The map that applies `self` first and `next` second. Photon yields
    /// add, with the second map's yield carried back through `self`.
    pub fn then(&self, next: &StochasticMap) -> StochasticMap {
        let mut matrix = [[0.0; N_LEVELS]; N_LEVELS];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..N_LEVELS).map(|k| next.matrix[i][k] * self.matrix[k][j]).sum();
            }
        }
        let mut photon_yield = self.photon_yield;
        for (j, y) in photon_yield.iter_mut().enumerate() {
            *y += (0..N_LEVELS)
                .map(|k| next.photon_yield[k] * self.matrix[k][j])
                .sum::<f64>();
        }
        StochasticMap { matrix, photon_yield }
    }

    /// `self` applied `k` times.
    pub fn power(&self, k: u32) -> StochasticMap {
        let mut out = StochasticMap::identity();
        for _ in 0..k {
            out = out.then(self);
        }
        out
    }

    pub fn column_sum(&self, from: usize) -> f64 {
        self.matrix.iter().map(|row| row[from]).sum()
    }

    pub fn is_column_stochastic(&self, tol: f64) -> bool {
        self.matrix.iter().flatten().all(|&m| m >= 0.0)
            && (0..N_LEVELS).all(|j| (self.column_sum(j) - 1.0).abs() <= tol)
    }

    /// True if every entry is exactly 0 or 1 and the matrix is stochastic.
    pub fn is_permutation(&self) -> bool {
        self.matrix.iter().flatten().all(|&m| m == 0.0 || m == 1.0) && self.is_column_stochastic(0.0)
    }

    fn swap_with(mut self, a: Level, b: Level, prob: f64) -> Self {
        let (a, b) = (a.index(), b.index());
        // The pairs this is called with are disjoint, so the columns are fresh.
        self.matrix[a][a] = 1.0 - prob;
        self.matrix[b][b] = 1.0 - prob;
        self.matrix[b][a] = prob;
        self.matrix[a][b] = prob;
        self
    }
}

/// Nuclear-selective MW π pulse with crosstalk onto the neighbouring m_I
/// transitions of the same branch.
pub fn mw_pi_map(t: MwTransition, g: &GateParams) -> StochasticMap {
    let m_s = t.branch.m_s();
    let mut map = StochasticMap::identity().swap_with(Level::new(0, t.m_i), Level::new(m_s, t.m_i), g.pi_fidelity);
    for m_i in [t.m_i - 1, t.m_i + 1] {
        if (-1..=1).contains(&m_i) && g.crosstalk > 0.0 {
            map = map.swap_with(Level::new(0, m_i), Level::new(m_s, m_i), g.crosstalk);
        }
    }
    map
}

/// Non-selective MW π pulse acting on all three m_I at once.
pub fn mw_hard_pi_map(branch: Branch, g: &GateParams) -> StochasticMap {
    (-1..=1).fold(StochasticMap::identity(), |map, m_i| {
        map.swap_with(Level::new(0, m_i), Level::new(branch.m_s(), m_i), g.pi_fidelity)
    })
}

/// RF π pulse on one nuclear pair, conditional on the electron manifold.
/// Crosstalk drives the same nuclear pair in the neighbouring manifolds.
pub fn rf_pi_map(t: RfTransition, g: &GateParams) -> StochasticMap {
    let (hi, lo) = t.pair.levels();
    let mut map =
        StochasticMap::identity().swap_with(Level::new(t.manifold, hi), Level::new(t.manifold, lo), g.pi_fidelity);
    for m_s in [t.manifold - 1, t.manifold + 1] {
        if (-1..=1).contains(&m_s) && g.crosstalk > 0.0 {
            map = map.swap_with(Level::new(m_s, hi), Level::new(m_s, lo), g.crosstalk);
        }
    }
    map
}

pub fn gate_map(label: TransitionLabel, g: &GateParams) -> StochasticMap {
    match label {
        TransitionLabel::Mw(t) => mw_pi_map(t, g),
        TransitionLabel::MwHard(b) => mw_hard_pi_map(b, g),
        TransitionLabel::Rf(t) => rf_pi_map(t, g),
    }
}

/// Stores the electron state in the nucleus: RFA followed by RFB.
pub fn cnot_store_map(g: &GateParams) -> StochasticMap {
    gate_map(TransitionLabel::RFA, g).then(&gate_map(TransitionLabel::RFB, g))
}

/// Coherent-feedback correction: MWC followed by RFB.
pub fn swap_correct_map(g: &GateParams) -> StochasticMap {
    gate_map(TransitionLabel::MWC, g).then(&gate_map(TransitionLabel::RFB, g))
}

/// Role of a laser pulse within a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LaserRole {
    /// Long pulse: fully re-pumps the electron; its flip-flop exposure is
    /// scaled by `t_init / t_read` relative to a readout pulse.
    Init,
    Readout,
}

/// Electron distribution (m_s = −1, 0, +1) left by optical pumping.
pub fn pumped_electron(phys: &PhysicsParams) -> [f64; 3] {
    let residual = 1.0 - phys.p_e0;
    [
        residual * phys.residual_minus_share,
        phys.p_e0,
        residual * (1.0 - phys.residual_minus_share),
    ]
}

/// Laser pulse: electron re-pumping combined with flip-flop backaction on
/// the nucleus. The dark level is left untouched.
///
/// With probability `repump_prob` (1 for [`LaserRole::Init`]) the electron
/// is reset to [`pumped_electron`]: `p_e0` on m_s = 0, the remainder split
/// over m_s = ±1 by `residual_minus_share`. Independently, m_I rises by one with the per-pulse
/// `p_minus` and falls by one with `p_plus`. If the two exceed 1 together
/// both are scaled down by their sum, which keeps their ratio and hence the
/// polarization steady state.
pub fn laser_pulse_map(b0: MagneticField, phys: &PhysicsParams, r: &ReadoutParams, role: LaserRole) -> StochasticMap {
    let (repump, cycles) = match role {
        LaserRole::Readout => (r.repump_prob, r.kappa),
        LaserRole::Init => (1.0, r.kappa * r.t_init / r.t_read),
    };
    let flips = physics::scale_probs(physics::flip_flop_probabilities(b0, phys), cycles);
    let pumped = pumped_electron(phys);
    laser_map_from(flips, pumped, repump, r.photon_yield())
}

pub(crate) fn laser_map_from(
    flips: FlipFlopProbs,
    pumped: [f64; 3],
    repump: f64,
    photon_yield: [f64; N_LEVELS],
) -> StochasticMap {
    let (mut up, mut down) = (flips.p_minus, flips.p_plus);
    let total = up + down;
    if total > 1.0 {
        up /= total;
        down = 1.0 - up;
    }
    let mut matrix = [[0.0; N_LEVELS]; N_LEVELS];
    matrix[DARK][DARK] = 1.0;
    for from in Level::bright() {
        // Electron part.
        let mut electron = [0.0; 3];
        for (k, w) in electron.iter_mut().enumerate() {
            *w = repump * pumped[k];
        }
        electron[(from.m_s + 1) as usize] += 1.0 - repump;
        // Nuclear part.
        let mut nuclear = [0.0; 3];
        let go_up = if from.m_i < 1 { up } else { 0.0 };
        let go_down = if from.m_i > -1 { down } else { 0.0 };
        nuclear[(from.m_i + 1) as usize] = (1.0 - go_up - go_down).max(0.0);
        if go_up > 0.0 {
            nuclear[(from.m_i + 2) as usize] = go_up;
        }
        if go_down > 0.0 {
            nuclear[from.m_i as usize] = go_down;
        }
        for (es, we) in electron.iter().enumerate() {
            for (ns, wn) in nuclear.iter().enumerate() {
                let to = Level::new(es as i8 - 1, ns as i8 - 1);
                matrix[to.index()][from.index()] += we * wn;
            }
        }
    }
    StochasticMap { matrix, photon_yield }
}
