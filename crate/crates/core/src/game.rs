//! Game instances: players, strategy boxes, sampled scenarios and the
//! cost/subgradient oracles the solver consumes.
//!
//! Two families are built in. [`QuadraticGame`] uses the scenario cost
//! `h(x; xi) = 0.5 * xi1 * |x|^2 + xi2 * c.x` directly and is smooth and
//! monotone. [`CvarGame`] wraps the same `h` in the CVaR expectation form
//! `phi(h, u) = u + (h - u)_+ / (1 - alpha)` with one private auxiliary
//! coordinate `u_i` appended to each player's block.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Layout;
use crate::projection::BoxSet;

/// Distance from the CVaR kink below which both branches are treated as active.
pub const KINK_TOL: f64 = 1e-9;

/// Which element of the subdifferential to return at a kink of `(h - u)_+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KinkRule {
    /// Indicator `1{h > u}`: the flat branch wins ties.
    #[default]
    Strict,
    /// Indicator `1{h > u - KINK_TOL}`: the sloped branch wins near-ties.
    Upper,
}

impl KinkRule {
    #[inline]
    pub fn indicator(self, h: f64, u: f64) -> bool {
        match self {
            KinkRule::Strict => h > u,
            KinkRule::Upper => h > u - KINK_TOL,
        }
    }
}

/// A DRNE game over sampled scenarios.
///
/// `x` arguments are always the full joint strategy vector laid out by
/// [`Game::layout`]. Oracles must be pure.
pub trait Game: Sync {
    fn layout(&self) -> &Layout;

    fn strategy_set(&self, player: usize) -> &BoxSet;

    /// Writes `f_i(x; xi_ij)` for each `j` in `scenarios` into `out`.
    fn scenario_costs(&self, player: usize, x: &[f64], scenarios: &[usize], out: &mut [f64]);

    /// Adds `sum_k weights[k] * s_i(x; xi_{i, scenarios[k]})` to `out`, where
    /// `s_i` is the partial subgradient in player `i`'s block selected by `rule`.
    fn accumulate_subgradients(
        &self,
        player: usize,
        x: &[f64],
        scenarios: &[usize],
        weights: &[f64],
        rule: KinkRule,
        out: &mut [f64],
    );

    /// True when some scenario sits within [`KINK_TOL`] of a kink for `player` at `x`.
    fn has_active_kink(&self, _player: usize, _x: &[f64]) -> bool {
        false
    }

    fn num_players(&self) -> usize {
        self.layout().players()
    }

    fn num_scenarios(&self) -> usize {
        self.layout().scenarios()
    }
}

/// One sampled scenario `xi_ij = (xi1, xi2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub xi1: f64,
    pub xi2: f64,
}

/// Per-player scenarios plus the shared cost vector `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    players: usize,
    scenarios: usize,
    records: Vec<Scenario>,
    c: Vec<f64>,
}

impl ScenarioSet {
    /// `records` is player-major: record `(i, j)` lives at `i * m + j`.
    pub fn new(players: usize, scenarios: usize, records: Vec<Scenario>, c: Vec<f64>) -> Result<Self> {
        if players == 0 || scenarios == 0 {
            return Err(Error::param("scenario set needs at least one player and one scenario"));
        }
        if records.len() != players * scenarios {
            return Err(Error::shape("scenario records", players * scenarios, records.len()));
        }
        if records.iter().any(|s| !s.xi1.is_finite() || !s.xi2.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("scenario data must be finite".into()));
        }
        Ok(Self {
            players,
            scenarios,
            records,
            c,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    #[inline]
    pub fn get(&self, player: usize, j: usize) -> Scenario {
        self.records[player * self.scenarios + j]
    }

    pub fn player(&self, player: usize) -> &[Scenario] {
        &self.records[player * self.scenarios..(player + 1) * self.scenarios]
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }
}

/// `h(x; xi) = 0.5 * xi1 * |x|^2 + xi2 * c.x` over the decision coordinates.
pub fn quadratic_cost(x_dec: &[f64], scenario: Scenario, c: &[f64]) -> f64 {
    let sq: f64 = x_dec.iter().map(|v| v * v).sum();
    let cx: f64 = x_dec.iter().zip(c).map(|(a, b)| a * b).sum();
    0.5 * scenario.xi1 * sq + scenario.xi2 * cx
}

/// `phi(h, u) = u + (h - u)_+ / (1 - alpha)`.
#[inline]
pub fn phi(h: f64, u: f64, alpha: f64) -> f64 {
    u + (h - u).max(0.0) / (1.0 - alpha)
}

/// CVaR-wrapped scenario cost `phi(h(x; xi), u)`.
pub fn cvar_cost(x_dec: &[f64], u: f64, scenario: Scenario, alpha: f64, c: &[f64]) -> f64 {
    phi(quadratic_cost(x_dec, scenario, c), u, alpha)
}

/// Strict-rule subgradient of [`cvar_cost`] with respect to the decision
/// coordinates in `block` and the auxiliary `u`.
pub fn cvar_subgradient(
    x_dec: &[f64],
    block: Range<usize>,
    u: f64,
    scenario: Scenario,
    alpha: f64,
    c: &[f64],
) -> (Vec<f64>, f64) {
    let h = quadratic_cost(x_dec, scenario, c);
    let scale = if KinkRule::Strict.indicator(h, u) {
        1.0 / (1.0 - alpha)
    } else {
        0.0
    };
    let gx = block
        .map(|k| scale * (scenario.xi1 * x_dec[k] + scenario.xi2 * c[k]))
        .collect();
    (gx, 1.0 - scale)
}

/// Sum of squares and `c.x` over decision coordinates, skipping the
/// auxiliary coordinate at the end of each block when `aux` is set.
fn decision_stats(layout: &Layout, aux: bool, x: &[f64], c: &[f64]) -> (f64, f64) {
    let mut sq = 0.0;
    let mut cx = 0.0;
    let mut ci = 0;
    for i in 0..layout.players() {
        let r = layout.x_range(i);
        let end = if aux { r.end - 1 } else { r.end };
        for &v in &x[r.start..end] {
            sq += v * v;
            cx += v * c[ci];
            ci += 1;
        }
    }
    (sq, cx)
}

/// The smooth quadratic game with scenario cost `h` and no risk wrapper.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    layout: Layout,
    sets: Vec<BoxSet>,
    data: ScenarioSet,
    c_offsets: Vec<usize>,
}

impl QuadraticGame {
    pub fn new(sets: Vec<BoxSet>, data: ScenarioSet) -> Result<Self> {
        if sets.len() != data.players() {
            return Err(Error::shape("strategy sets", data.players(), sets.len()));
        }
        let dims: Vec<usize> = sets.iter().map(BoxSet::dim).collect();
        let layout = Layout::new(&dims, data.scenarios());
        if data.c().len() != layout.x_dim() {
            return Err(Error::shape("cost vector c", layout.x_dim(), data.c().len()));
        }
        let c_offsets = (0..sets.len()).map(|i| layout.x_range(i).start).collect();
        Ok(Self {
            layout,
            sets,
            data,
            c_offsets,
        })
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.data
    }
}

impl Game for QuadraticGame {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn strategy_set(&self, player: usize) -> &BoxSet {
        &self.sets[player]
    }

    fn scenario_costs(&self, player: usize, x: &[f64], scenarios: &[usize], out: &mut [f64]) {
        let (sq, cx) = decision_stats(&self.layout, false, x, self.data.c());
        for (o, &j) in out.iter_mut().zip(scenarios) {
            let s = self.data.get(player, j);
            *o = 0.5 * s.xi1 * sq + s.xi2 * cx;
        }
    }

    fn accumulate_subgradients(
        &self,
        player: usize,
        x: &[f64],
        scenarios: &[usize],
        weights: &[f64],
        _rule: KinkRule,
        out: &mut [f64],
    ) {
        let (mut a, mut b) = (0.0, 0.0);
        for (&j, &w) in scenarios.iter().zip(weights) {
            let s = self.data.get(player, j);
            a += w * s.xi1;
            b += w * s.xi2;
        }
        let r = self.layout.x_range(player);
        let c = &self.data.c()[self.c_offsets[player]..self.c_offsets[player] + r.len()];
        for ((o, xv), cv) in out.iter_mut().zip(&x[r]).zip(c) {
            *o += a * xv + b * cv;
        }
    }
}

/// Parameters of the CVaR risk-averse instance family. Serializes to the
/// instance file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvarInstance {
    pub n: usize,
    pub n_i: usize,
    pub m: usize,
    pub alpha: f64,
    pub bounds: f64,
    pub seed: u64,
    #[serde(default = "default_xi1_range")]
    pub xi1_range: [f64; 2],
    #[serde(default = "default_xi2_range")]
    pub xi2_range: [f64; 2],
}

fn default_xi1_range() -> [f64; 2] {
    [0.5, 1.5]
}

fn default_xi2_range() -> [f64; 2] {
    [-1.0, 1.0]
}

impl Default for CvarInstance {
    fn default() -> Self {
        Self {
            n: 5,
            n_i: 10,
            m: 100,
            alpha: 0.95,
            bounds: 10.0,
            seed: 2025,
            xi1_range: default_xi1_range(),
            xi2_range: default_xi2_range(),
        }
    }
}

impl CvarInstance {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_i == 0 || self.m == 0 {
            return Err(Error::param("n, n_i and m must all be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.bounds > 0.0 && self.bounds.is_finite()) {
            return Err(Error::param(format!("bounds must be positive, got {}", self.bounds)));
        }
        let [lo1, hi1] = self.xi1_range;
        if !(lo1 > 0.0 && lo1 < hi1 && hi1.is_finite()) {
            return Err(Error::param("xi1_range must satisfy 0 < lo < hi"));
        }
        let [lo2, hi2] = self.xi2_range;
        if !(lo2 < hi2 && lo2.is_finite() && hi2.is_finite()) {
            return Err(Error::param("xi2_range must satisfy lo < hi"));
        }
        Ok(())
    }

    /// Draws `c ~ N(0, I)` then `(xi1, xi2)` player by player from the seeded stream.
    pub fn sample_scenarios(&self) -> Result<ScenarioSet> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let c: Vec<f64> = (0..self.n * self.n_i)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let [lo1, hi1] = self.xi1_range;
        let [lo2, hi2] = self.xi2_range;
        let records = (0..self.n * self.m)
            .map(|_| Scenario {
                xi1: rng.random_range(lo1..hi1),
                xi2: rng.random_range(lo2..hi2),
            })
            .collect();
        ScenarioSet::new(self.n, self.m, records, c)
    }

    pub fn build(&self) -> Result<CvarGame> {
        let data = self.sample_scenarios()?;
        CvarGame::new(data, self.alpha, self.bounds)
    }

    /// The same scenarios without the CVaR wrapper.
    pub fn build_quadratic(&self) -> Result<QuadraticGame> {
        let data = self.sample_scenarios()?;
        let sets = (0..self.n)
            .map(|_| BoxSet::symmetric(self.n_i, self.bounds))
            .collect::<Result<_>>()?;
        QuadraticGame::new(sets, data)
    }
}

/// Builds the CVaR risk-averse game with default scenario ranges.
pub fn build_cvar_game(n: usize, n_i: usize, m: usize, alpha: f64, seed: u64, bounds: f64) -> Result<CvarGame> {
    CvarInstance {
        n,
        n_i,
        m,
        alpha,
        bounds,
        seed,
        ..CvarInstance::default()
    }
    .build()
}

/// Risk-averse game: player `i` minimizes `phi(h_i(x; xi_ij), u_i)` over
/// `(x_i, u_i)`, against the worst-case weights on its simplex.
#[derive(Debug, Clone)]
pub struct CvarGame {
    layout: Layout,
    sets: Vec<BoxSet>,
    data: ScenarioSet,
    alpha: f64,
    decision_dim: usize,
}

impl CvarGame {
    /// The auxiliary `u_i` is confined to `[-U_i, U_i]` with `U_i` the largest
    /// `|h_ij|` attainable on the decision box, so the CVaR minimizer over
    /// `u_i` (which lies between the smallest and largest `h_ij`) stays feasible.
    pub fn new(data: ScenarioSet, alpha: f64, bounds: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(bounds > 0.0 && bounds.is_finite()) {
            return Err(Error::param(format!("bounds must be positive, got {bounds}")));
        }
        let n = data.players();
        if !data.c().len().is_multiple_of(n) || data.c().is_empty() {
            return Err(Error::shape("cost vector c", n, data.c().len()));
        }
        if data.player(0).is_empty() {
            return Err(Error::param("at least one scenario required"));
        }
        let n_i = data.c().len() / n;
        if (0..n).any(|i| data.player(i).iter().any(|s| s.xi1 <= 0.0)) {
            return Err(Error::Domain("xi1 must be positive for every scenario".into()));
        }
        let radius = bounds * ((n * n_i) as f64).sqrt();
        let c_norm = data.c().iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut sets = Vec::with_capacity(n);
        for i in 0..n {
            let u_bound = data
                .player(i)
                .iter()
                .map(|s| 0.5 * s.xi1 * radius * radius + s.xi2.abs() * c_norm * radius)
                .fold(0.0, f64::max);
            let mut lower = vec![-bounds; n_i];
            let mut upper = vec![bounds; n_i];
            lower.push(-u_bound);
            upper.push(u_bound);
            sets.push(BoxSet::new(lower, upper)?);
        }
        let layout = Layout::new(&vec![n_i + 1; n], data.scenarios());
        Ok(Self {
            layout,
            sets,
            data,
            alpha,
            decision_dim: n_i,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.data
    }

    /// Decision coordinates per player, excluding the auxiliary.
    pub fn decision_dim(&self) -> usize {
        self.decision_dim
    }

    /// Bound `U_i` on the auxiliary coordinate.
    pub fn aux_bound(&self, player: usize) -> f64 {
        *self.sets[player].upper().last().unwrap()
    }

    /// Decision coordinates of a joint strategy vector, auxiliaries dropped.
    pub fn decision_part(&self, x: &[f64]) -> Vec<f64> {
        (0..self.layout.players())
            .flat_map(|i| {
                let r = self.layout.x_range(i);
                x[r.start..r.end - 1].iter().copied()
            })
            .collect()
    }

    /// Auxiliary coordinate `u_i` of a joint strategy vector.
    #[inline]
    pub fn aux(&self, player: usize, x: &[f64]) -> f64 {
        x[self.layout.x_range(player).end - 1]
    }

    /// Uncapped scenario values `h_ij(x)` for all `j`.
    pub fn risk_values(&self, player: usize, x: &[f64]) -> Vec<f64> {
        let (sq, cx) = decision_stats(&self.layout, true, x, self.data.c());
        self.data
            .player(player)
            .iter()
            .map(|s| 0.5 * s.xi1 * sq + s.xi2 * cx)
            .collect()
    }
}

impl Game for CvarGame {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn strategy_set(&self, player: usize) -> &BoxSet {
        &self.sets[player]
    }

    fn scenario_costs(&self, player: usize, x: &[f64], scenarios: &[usize], out: &mut [f64]) {
        let (sq, cx) = decision_stats(&self.layout, true, x, self.data.c());
        let u = self.aux(player, x);
        for (o, &j) in out.iter_mut().zip(scenarios) {
            let s = self.data.get(player, j);
            *o = phi(0.5 * s.xi1 * sq + s.xi2 * cx, u, self.alpha);
        }
    }

    fn accumulate_subgradients(
        &self,
        player: usize,
        x: &[f64],
        scenarios: &[usize],
        weights: &[f64],
        rule: KinkRule,
        out: &mut [f64],
    ) {
        let (sq, cx) = decision_stats(&self.layout, true, x, self.data.c());
        let u = self.aux(player, x);
        let inv = 1.0 / (1.0 - self.alpha);
        // Active scenarios contribute (xi1 x_i + xi2 c_i) / (1 - alpha) to the
        // decision part and -1/(1 - alpha) to the auxiliary; all contribute +1
        // to the auxiliary.
        let (mut a, mut b, mut active, mut total) = (0.0, 0.0, 0.0, 0.0);
        for (&j, &w) in scenarios.iter().zip(weights) {
            let s = self.data.get(player, j);
            total += w;
            if rule.indicator(0.5 * s.xi1 * sq + s.xi2 * cx, u) {
                a += w * s.xi1;
                b += w * s.xi2;
                active += w;
            }
        }
        let r = self.layout.x_range(player);
        let n_dec = r.len() - 1;
        let c = &self.data.c()[player * self.decision_dim..player * self.decision_dim + n_dec];
        let xi = &x[r.start..r.end - 1];
        for ((o, xv), cv) in out[..n_dec].iter_mut().zip(xi).zip(c) {
            *o += (a * xv + b * cv) * inv;
        }
        out[n_dec] += total - active * inv;
    }

    fn has_active_kink(&self, player: usize, x: &[f64]) -> bool {
        let u = self.aux(player, x);
        self.risk_values(player, x)
            .into_iter()
            .any(|h| (h - u).abs() <= KINK_TOL)
    }
}
