//! Solution-quality metrics and empirical checks of the convergence assumptions.
//!
//! The gap `sup_{y in Z} sup_{g in F(y)} <g, z - y>` is not computable, so
//! [`restricted_gap`] takes the sup over a finite [`ProbeSet`]. Any probe set
//! gives a lower bound; the standard set mixes global samples with probes
//! anchored at the evaluated point, which track the local descent and
//! best-response directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, KinkRule};
use crate::operator::{batch_operator, full_g1, full_g2, full_operator, BatchSampler, MiniBatch, OperatorValue};
use crate::par::Execution;
use crate::point::JointPoint;
use crate::projection::project_joint;
use crate::solver::{ergodic_average, RunHistory};

/// Uniform point of the boxes with Dirichlet(1) ambiguity weights.
pub fn sample_feasible<G: Game + ?Sized, R: Rng + ?Sized>(game: &G, rng: &mut R) -> JointPoint {
    let layout = game.layout();
    let mut z = JointPoint::zeros(layout);
    for i in 0..layout.players() {
        let set = game.strategy_set(i);
        let r = layout.x_range(i);
        for (k, v) in z.x_mut()[r].iter_mut().enumerate() {
            *v = rng.random_range(set.lower()[k]..=set.upper()[k]);
        }
        let block = &mut z.p_mut()[layout.p_range(i)];
        let mut total = 0.0;
        for v in block.iter_mut() {
            *v = rng.sample::<f64, _>(Exp1);
            total += *v;
        }
        for v in block.iter_mut() {
            *v /= total;
        }
    }
    z
}

/// Where a probe came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Caller-supplied grid.
    Grid,
    /// Uniform feasible sample.
    Sampled,
    /// Box and simplex vertices substituted into a random block.
    Vertex,
    /// Earlier iterates of a run.
    History,
    /// Derived from the evaluated point itself.
    Anchored,
}

/// Coarse provenance tag reported with a gap estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    Grid,
    Sampled,
    HistoryAugmented,
}

impl ProbeKind {
    pub fn method(self) -> GapMethod {
        match self {
            ProbeKind::Grid => GapMethod::Grid,
            ProbeKind::Sampled | ProbeKind::Vertex => GapMethod::Sampled,
            ProbeKind::History | ProbeKind::Anchored => GapMethod::HistoryAugmented,
        }
    }
}

/// Number of uniform samples in the standard probe set.
pub const STANDARD_SAMPLES: usize = 512;
/// Number of vertex probes in the standard probe set.
pub const STANDARD_VERTICES: usize = 64;

/// Step lengths for anchored probes: `10^-4 .. 10^2` in half decades.
fn anchor_steps() -> impl Iterator<Item = f64> {
    (0..=12).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64))
}

/// Feasible points at which the operator is probed.
#[derive(Debug, Clone, Default)]
pub struct ProbeSet {
    points: Vec<JointPoint>,
    kinds: Vec<ProbeKind>,
}

impl ProbeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[JointPoint] {
        &self.points
    }

    pub fn kind(&self, k: usize) -> ProbeKind {
        self.kinds[k]
    }

    /// Probe counts per kind, in a fixed order.
    pub fn provenance(&self) -> Vec<(ProbeKind, usize)> {
        [
            ProbeKind::Grid,
            ProbeKind::Sampled,
            ProbeKind::Vertex,
            ProbeKind::History,
            ProbeKind::Anchored,
        ]
        .into_iter()
        .map(|kind| (kind, self.kinds.iter().filter(|k| **k == kind).count()))
        .filter(|(_, n)| *n > 0)
        .collect()
    }

    pub fn push(&mut self, kind: ProbeKind, point: JointPoint) {
        self.points.push(point);
        self.kinds.push(kind);
    }

    pub fn with_sampled<G: Game + ?Sized>(mut self, game: &G, count: usize, rng: &mut ChaCha8Rng) -> Self {
        for _ in 0..count {
            self.push(ProbeKind::Sampled, sample_feasible(game, rng));
        }
        self
    }

    /// Random feasible points with one player's blocks moved to a box vertex
    /// and a simplex vertex.
    pub fn with_vertices<G: Game + ?Sized>(mut self, game: &G, count: usize, rng: &mut ChaCha8Rng) -> Self {
        let layout = game.layout();
        for _ in 0..count {
            let mut z = sample_feasible(game, rng);
            let i = rng.random_range(0..layout.players());
            let set = game.strategy_set(i);
            let r = layout.x_range(i);
            for (k, v) in z.x_mut()[r].iter_mut().enumerate() {
                *v = if rng.random_bool(0.5) { set.lower()[k] } else { set.upper()[k] };
            }
            let block = &mut z.p_mut()[layout.p_range(i)];
            block.fill(0.0);
            block[rng.random_range(0..layout.scenarios())] = 1.0;
            self.push(ProbeKind::Vertex, z);
        }
        self
    }

    pub fn with_history<'a>(mut self, points: impl IntoIterator<Item = &'a JointPoint>) -> Self {
        for z in points {
            self.push(ProbeKind::History, z.clone());
        }
        self
    }

    /// Probes built from `z`: `z` itself, the ambiguity best response at `z`'s
    /// strategies, and projected operator steps from `z` along the full
    /// operator, the primal block only and the dual block only.
    pub fn with_anchored<G: Game + ?Sized>(mut self, game: &G, z: &JointPoint) -> Result<Self> {
        let layout = game.layout();
        self.push(ProbeKind::Anchored, z.clone());

        let g1 = full_g1(game, z)?;
        let g2 = full_g2(game, z)?;
        let mut best_response = z.clone();
        for i in 0..layout.players() {
            let r = layout.p_range(i);
            // g2 = -f, so the worst case sits on the smallest entry.
            let k = (0..r.len())
                .min_by(|&a, &b| g2[r.start + a].total_cmp(&g2[r.start + b]))
                .unwrap();
            let block = &mut best_response.p_mut()[r];
            block.fill(0.0);
            block[k] = 1.0;
        }
        self.push(ProbeKind::Anchored, best_response.clone());

        for s in anchor_steps() {
            let x: Vec<f64> = z.x().iter().zip(&g1).map(|(a, g)| a - s * g).collect();
            let p: Vec<f64> = z.p().iter().zip(&g2).map(|(a, g)| a - s * g).collect();
            let both = project_joint(&JointPoint::new(x.clone(), p.clone()), game)?;
            let primal = project_joint(&JointPoint::new(x, z.p().to_vec()), game)?;
            let dual = project_joint(&JointPoint::new(z.x().to_vec(), p), game)?;
            let primal_br = JointPoint::new(primal.x().to_vec(), best_response.p().to_vec());
            for y in [both, primal, dual, primal_br] {
                self.push(ProbeKind::Anchored, y);
            }
        }
        Ok(self)
    }

    /// Seeded global probes: [`STANDARD_SAMPLES`] uniform samples plus
    /// [`STANDARD_VERTICES`] vertex probes. Shared by every point evaluated
    /// against the same instance and seed.
    pub fn global<G: Game + ?Sized>(game: &G, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ProbeSet::new()
            .with_sampled(game, STANDARD_SAMPLES, &mut rng)
            .with_vertices(game, STANDARD_VERTICES, &mut rng)
    }

    /// The standard probe set for evaluating `z`: global probes, the given
    /// history iterates, and probes anchored at `z`.
    pub fn standard<'a, G: Game + ?Sized>(
        game: &G,
        z: &JointPoint,
        history: impl IntoIterator<Item = &'a JointPoint>,
        seed: u64,
    ) -> Result<Self> {
        Self::global(game, seed).with_history(history).with_anchored(game, z)
    }

    /// Appends every probe of `other`.
    pub fn extend(&mut self, other: &ProbeSet) {
        self.points.extend(other.points.iter().cloned());
        self.kinds.extend(other.kinds.iter().copied());
    }
}

/// Restricted gap value and its maximizer.
#[derive(Debug, Clone)]
pub struct GapEstimate {
    pub value: f64,
    pub probe_index: usize,
    pub probe: JointPoint,
    pub selection: OperatorValue,
    pub probe_count: usize,
    pub method: GapMethod,
    pub provenance: Vec<(ProbeKind, usize)>,
}

/// `max_y max_g <g, z - y>` over the probes, with `g` ranging over the strict
/// kink selection and, where a kink is active at `y`, the upper one too.
pub fn restricted_gap<G: Game + ?Sized>(
    game: &G,
    z: &JointPoint,
    probes: &ProbeSet,
    exec: Execution,
) -> Result<GapEstimate> {
    if probes.is_empty() {
        return Err(Error::param("probe set is empty"));
    }
    z.check_shape(game)?;
    let evaluated: Vec<Result<(f64, KinkRule)>> = exec.map(probes.points(), |y| {
        let strict = full_operator(game, y, KinkRule::Strict)?;
        let mut best = (strict.pairing(z, y), KinkRule::Strict);
        if (0..game.num_players()).any(|i| game.has_active_kink(i, y.x())) {
            let upper = full_operator(game, y, KinkRule::Upper)?;
            let v = upper.pairing(z, y);
            if v > best.0 {
                best = (v, KinkRule::Upper);
            }
        }
        Ok(best)
    });
    let mut best: Option<(usize, f64, KinkRule)> = None;
    for (k, r) in evaluated.into_iter().enumerate() {
        let (v, rule) = r?;
        if best.is_none_or(|(_, bv, _)| v > bv) {
            best = Some((k, v, rule));
        }
    }
    let (k, value, rule) = best.unwrap();
    let probe = probes.points()[k].clone();
    Ok(GapEstimate {
        value,
        probe_index: k,
        selection: full_operator(game, &probe, rule)?,
        probe,
        probe_count: probes.len(),
        method: probes.kind(k).method(),
        provenance: probes.provenance(),
    })
}

/// `|z - P_Z(z - step * g(z))| / step` with the strict selection.
pub fn projected_residual<G: Game + ?Sized>(game: &G, z: &JointPoint, step: f64) -> Result<f64> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::param("residual step must be positive"));
    }
    let g = full_operator(game, z, KinkRule::Strict)?;
    let x: Vec<f64> = z.x().iter().zip(&g.g1).map(|(a, v)| a - step * v).collect();
    let p: Vec<f64> = z.p().iter().zip(&g.g2).map(|(a, v)| a - step * v).collect();
    let projected = project_joint(&JointPoint::new(x, p), game)?;
    Ok(z.distance(&projected) / step)
}

/// Gap and residual of the step-weighted average at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub gap: f64,
    pub residual: f64,
}

/// Evaluates the restricted gap of the ergodic average at each checkpoint
/// `t`, probing with the global set for `probe_seed`, the run's recorded
/// iterates up to `t`, and probes anchored at the average itself.
pub fn gap_curve<G: Game + ?Sized>(
    game: &G,
    history: &RunHistory,
    checkpoints: &[usize],
    probe_seed: u64,
    residual_step: f64,
    exec: Execution,
) -> Result<Vec<CurvePoint>> {
    let global = ProbeSet::global(game, probe_seed);
    checkpoints
        .iter()
        .map(|&t| {
            let average = ergodic_average(history, t)?;
            let mut probes = global.clone();
            probes.push(ProbeKind::History, history.initial.clone());
            let recorded = history.checkpoints.iter().filter(|c| c.t <= t).map(|c| &c.iterate);
            let probes = probes.with_history(recorded).with_anchored(game, &average)?;
            Ok(CurvePoint {
                t,
                gap: restricted_gap(game, &average, &probes, exec)?.value,
                residual: projected_residual(game, &average, residual_step)?,
            })
        })
        .collect()
}

/// Least-squares fit of `ln(metric)` against `ln(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    /// Points dropped for a nonpositive metric.
    pub excluded: usize,
}

/// Fits a power law to `(T, metric)` pairs. Needs at least five positive
/// points spanning two decades of `T`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, v)| t > 0.0 && v > 0.0 && v.is_finite())
        .collect();
    let excluded = points.len() - kept.len();
    if excluded > 0 {
        log::warn!("rate fit: excluded {excluded} nonpositive or non-finite points");
    }
    if kept.len() < 5 {
        return Err(Error::param(format!("rate fit needs at least 5 positive points, got {}", kept.len())));
    }
    let (t_min, t_max) = kept
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(t, _)| (lo.min(t), hi.max(t)));
    if t_max / t_min < 100.0 * (1.0 - 1e-9) {
        return Err(Error::param("rate fit checkpoints must span at least two decades"));
    }
    let xs: Vec<f64> = kept.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        points: kept,
        slope,
        intercept,
        residual,
        excluded,
    })
}

/// Log-spaced checkpoint grid `10^lo, 10^(lo+step), ...` up to `10^hi`, rounded.
pub fn log_grid(lo: f64, hi: f64, step: f64) -> Vec<usize> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut out: Vec<usize> = (0..=count)
        .map(|k| 10f64.powf(lo + step * k as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Settings for [`probe_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Random point pairs for the monotonicity probe and points for the
    /// second-moment maxima.
    pub samples: usize,
    pub seed: u64,
    /// Batch sizes for the variance table.
    pub batch_sizes: Vec<usize>,
    /// Points at which estimator variance is averaged.
    pub variance_points: usize,
    /// Batches drawn per point and batch size.
    pub batches_per_point: usize,
}

impl ProbeConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            batch_sizes: vec![5, 10, 20, 40],
            variance_points: 32,
            batches_per_point: 256,
        }
    }
}

/// Mean squared estimator error `E|g_B - g|^2` at one batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub batch: usize,
    pub primal: f64,
    pub dual: f64,
}

/// Empirical monotonicity, variance and second-moment constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub monotonicity_min: f64,
    pub monotonicity_pairs: usize,
    pub variance: Vec<VarianceRow>,
    /// `max_b b * E|g1_B - g1|^2`.
    pub nu1_sq: f64,
    /// `max_b b * E|g2_B - g2|^2`.
    pub nu2_sq: f64,
    /// Largest observed `|g1_B|^2`.
    pub mx_sq: f64,
    /// Largest observed `|g2_B|^2`.
    pub mp_sq: f64,
    pub seed: u64,
    pub samples: usize,
}

impl AssumptionReport {
    pub fn variance_at(&self, batch: usize) -> Option<&VarianceRow> {
        self.variance.iter().find(|r| r.batch == batch)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Samples the monotonicity inequality (at shared ambiguity weights), the
/// estimator variance across batch sizes and the estimator second moments.
pub fn probe_assumptions<G: Game + ?Sized>(game: &G, config: &ProbeConfig, exec: Execution) -> Result<AssumptionReport> {
    if config.samples == 0 {
        return Err(Error::param("assumption probe needs at least one sample"));
    }
    let m = game.num_scenarios();
    let batch_sizes: Vec<usize> = config.batch_sizes.iter().copied().filter(|&b| b >= 1 && b <= m).collect();
    if batch_sizes.is_empty() {
        return Err(Error::param(format!("no batch size in {:?} fits m = {m}", config.batch_sizes)));
    }
    let b_min = *batch_sizes.iter().min().unwrap();

    // Stream 0..samples: monotonicity pairs and second moments.
    let pair_results: Vec<Result<(f64, f64, f64)>> = exec.map_range(config.samples, |k| {
        let mut rng = stream_rng(config.seed, k as u64);
        let a = sample_feasible(game, &mut rng);
        let mut b = sample_feasible(game, &mut rng);
        b.p_mut().copy_from_slice(a.p());
        let ga = full_g1(game, &a)?;
        let gb = full_g1(game, &b)?;
        let mono: f64 = ga
            .iter()
            .zip(&gb)
            .zip(a.x().iter().zip(b.x()))
            .map(|((u, v), (x, y))| (u - v) * (x - y))
            .sum();
        let mut sampler = BatchSampler::new(m);
        let batch = MiniBatch {
            primal: sampler.sample(b_min, &mut rng)?,
            dual: sampler.sample(b_min, &mut rng)?,
        };
        let (n1, n2) = batch_operator(game, &a, &batch)?.norm_sq();
        Ok((mono, n1, n2))
    });
    let mut monotonicity_min = f64::INFINITY;
    let (mut mx_sq, mut mp_sq) = (0.0f64, 0.0f64);
    for r in pair_results {
        let (mono, n1, n2) = r?;
        monotonicity_min = monotonicity_min.min(mono);
        mx_sq = mx_sq.max(n1);
        mp_sq = mp_sq.max(n2);
    }

    // Streams after the pair streams: variance points.
    let offset = config.samples as u64;
    let per_point: Vec<Result<Vec<(f64, f64)>>> = exec.map_range(config.variance_points, |k| {
        let mut rng = stream_rng(config.seed, offset + k as u64);
        let z = sample_feasible(game, &mut rng);
        let full = full_operator(game, &z, KinkRule::Strict)?;
        let mut sampler = BatchSampler::new(m);
        batch_sizes
            .iter()
            .map(|&b| {
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..config.batches_per_point {
                    let batch = MiniBatch {
                        primal: sampler.sample(b, &mut rng)?,
                        dual: sampler.sample(b, &mut rng)?,
                    };
                    let est = batch_operator(game, &z, &batch)?;
                    s1 += sq_dist(&est.g1, &full.g1);
                    s2 += sq_dist(&est.g2, &full.g2);
                }
                let n = config.batches_per_point.max(1) as f64;
                Ok((s1 / n, s2 / n))
            })
            .collect()
    });
    let mut sums = vec![(0.0, 0.0); batch_sizes.len()];
    for r in per_point {
        for (acc, (a, b)) in sums.iter_mut().zip(r?) {
            acc.0 += a;
            acc.1 += b;
        }
    }
    let pts = config.variance_points.max(1) as f64;
    let variance: Vec<VarianceRow> = batch_sizes
        .iter()
        .zip(&sums)
        .map(|(&batch, &(a, b))| VarianceRow {
            batch,
            primal: a / pts,
            dual: b / pts,
        })
        .collect();
    let nu1_sq = variance.iter().map(|r| r.batch as f64 * r.primal).fold(0.0, f64::max);
    let nu2_sq = variance.iter().map(|r| r.batch as f64 * r.dual).fold(0.0, f64::max);

    Ok(AssumptionReport {
        monotonicity_min,
        monotonicity_pairs: config.samples,
        variance,
        nu1_sq,
        nu2_sq,
        mx_sq,
        mp_sq,
        seed: config.seed,
        samples: config.samples,
    })
}

/// Exported diagnostics summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DiagnosticsReport {
    pub monotonicity_min: f64,
    pub nu1_sq: f64,
    pub nu2_sq: f64,
    pub Mx_sq: f64,
    pub Mp_sq: f64,
    pub gap_curve: Vec<(usize, f64)>,
    pub slope: Option<f64>,
    pub seeds: Vec<u64>,
}

impl DiagnosticsReport {
    pub fn new(assumptions: &AssumptionReport, gap_curve: Vec<(usize, f64)>, seeds: Vec<u64>) -> Self {
        let pts: Vec<(f64, f64)> = gap_curve.iter().map(|&(t, v)| (t as f64, v)).collect();
        Self {
            monotonicity_min: assumptions.monotonicity_min,
            nu1_sq: assumptions.nu1_sq,
            nu2_sq: assumptions.nu2_sq,
            Mx_sq: assumptions.mx_sq,
            Mp_sq: assumptions.mp_sq,
            slope: fit_rate(&pts).ok().map(|f| f.slope),
            gap_curve,
            seeds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Entropy of each player's ambiguity weights, averaged over players.
pub fn mean_entropy<G: Game + ?Sized>(game: &G, z: &JointPoint) -> f64 {
    let layout = game.layout();
    let total: f64 = (0..layout.players())
        .map(|i| {
            z.p()[layout.p_range(i)]
                .iter()
                .filter(|v| **v > 0.0)
                .map(|v| -v * v.ln())
                .sum::<f64>()
        })
        .sum();
    total / layout.players() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_cvar_game, CvarInstance, QuadraticGame, Scenario, ScenarioSet};
    use crate::projection::BoxSet;

    fn square_game() -> QuadraticGame {
        let data = ScenarioSet::new(1, 1, vec![Scenario { xi1: 2.0, xi2: 0.0 }], vec![0.0]).unwrap();
        QuadraticGame::new(vec![BoxSet::symmetric(1, 1.0).unwrap()], data).unwrap()
    }

    fn grid_probes(values: &[f64]) -> ProbeSet {
        let mut probes = ProbeSet::new();
        for &y in values {
            probes.push(ProbeKind::Grid, JointPoint::new(vec![y], vec![1.0]));
        }
        probes
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect()
    }

    #[test]
    fn gap_at_solution_is_zero() {
        let g = square_game();
        let z = JointPoint::new(vec![0.0], vec![1.0]);
        let est = restricted_gap(&g, &z, &grid_probes(&grid(200)), Execution::Sequential).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.probe.x(), &[0.0]);
        assert_eq!(est.method, GapMethod::Grid);
    }

    #[test]
    fn gap_away_from_solution() {
        let g = square_game();
        let z = JointPoint::new(vec![1.0], vec![1.0]);
        // Single probe y = 1/2: <2 * 1/2, 1 - 1/2> = 0.5.
        let est = restricted_gap(&g, &z, &grid_probes(&[0.5]), Execution::Sequential).unwrap();
        assert!((est.value - 0.5).abs() < 1e-15);
        let est = restricted_gap(&g, &z, &grid_probes(&grid(200)), Execution::Parallel).unwrap();
        assert!((est.value - 0.5).abs() < 1e-12);
        assert!((est.probe.x()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn self_probe_contributes_zero() {
        let g = build_cvar_game(2, 2, 4, 0.9, 1, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = sample_feasible(&g, &mut rng);
        let mut probes = ProbeSet::new();
        probes.push(ProbeKind::Anchored, z.clone());
        let est = restricted_gap(&g, &z, &probes, Execution::Sequential).unwrap();
        assert_eq!(est.value, 0.0);
        let est = restricted_gap(&g, &z, &ProbeSet::standard(&g, &z, [], 5).unwrap(), Execution::Parallel).unwrap();
        assert!(est.value >= 0.0);
    }

    #[test]
    fn empty_probe_set_is_rejected() {
        let g = square_game();
        let z = JointPoint::new(vec![0.0], vec![1.0]);
        assert!(matches!(
            restricted_gap(&g, &z, &ProbeSet::new(), Execution::Sequential),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn gap_is_monotone_in_probe_set() {
        let g = build_cvar_game(2, 3, 6, 0.9, 2, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = sample_feasible(&g, &mut rng);
        let mut probes = ProbeSet::new().with_sampled(&g, 10, &mut rng);
        let mut last = restricted_gap(&g, &z, &probes, Execution::Sequential).unwrap().value;
        for _ in 0..5 {
            probes = probes.with_sampled(&g, 10, &mut rng);
            let v = restricted_gap(&g, &z, &probes, Execution::Sequential).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        let anchored = probes.clone().with_anchored(&g, &z).unwrap();
        assert!(restricted_gap(&g, &z, &anchored, Execution::Sequential).unwrap().value >= last);
    }

    #[test]
    fn sequential_and_parallel_gaps_agree() {
        let g = build_cvar_game(3, 2, 10, 0.9, 4, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = sample_feasible(&g, &mut rng);
        let probes = ProbeSet::standard(&g, &z, [], 9).unwrap();
        let a = restricted_gap(&g, &z, &probes, Execution::Sequential).unwrap();
        let b = restricted_gap(&g, &z, &probes, Execution::Parallel).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.probe_index, b.probe_index);
    }

    #[test]
    fn sampled_points_are_feasible() {
        let g = build_cvar_game(3, 2, 10, 0.9, 4, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probes = ProbeSet::global(&g, 2).with_anchored(&g, &sample_feasible(&g, &mut rng)).unwrap();
        assert_eq!(probes.len(), STANDARD_SAMPLES + STANDARD_VERTICES + 2 + 4 * 13);
        for z in probes.points() {
            assert!(z.is_feasible(&g, 1e-12));
        }
    }

    #[test]
    fn residual_examples() {
        let g = square_game();
        let r = projected_residual(&g, &JointPoint::new(vec![0.0], vec![1.0]), 0.1).unwrap();
        assert!(r <= 1e-10);
        // Interior point, inactive projection: residual = |g| = 2 * 0.3.
        let r = projected_residual(&g, &JointPoint::new(vec![0.3], vec![1.0]), 0.1).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
        assert!(projected_residual(&g, &JointPoint::new(vec![0.3], vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn fit_rate_examples() {
        let grid = log_grid(2.0, 5.0, 0.5);
        assert_eq!(grid, vec![100, 316, 1000, 3162, 10000, 31623, 100000]);
        assert_eq!(log_grid(2.0, 20_000f64.log10(), 0.5), vec![100, 316, 1000, 3162, 10000]);
        let exact: Vec<(f64, f64)> = grid.iter().map(|&t| (t as f64, (t as f64).powf(-0.5))).collect();
        assert!((fit_rate(&exact).unwrap().slope + 0.5).abs() < 1e-9);
        let constant: Vec<(f64, f64)> = grid.iter().map(|&t| (t as f64, 3.0)).collect();
        assert!(fit_rate(&constant).unwrap().slope.abs() < 1e-12);
        let log_rate: Vec<(f64, f64)> = grid
            .iter()
            .map(|&t| (t as f64, (t as f64).ln() / (t as f64).sqrt()))
            .collect();
        let s = fit_rate(&log_rate).unwrap().slope;
        assert!(s > -0.5 && s < -0.35, "slope {s}");
    }

    #[test]
    fn fit_rate_preconditions() {
        let few: Vec<(f64, f64)> = (1..=4).map(|k| (10f64.powi(k), 1.0)).collect();
        assert!(fit_rate(&few).is_err());
        let narrow: Vec<(f64, f64)> = (0..6).map(|k| (100.0 + k as f64, 1.0)).collect();
        assert!(fit_rate(&narrow).is_err());
        let mut with_zero: Vec<(f64, f64)> = log_grid(2.0, 5.0, 0.5).iter().map(|&t| (t as f64, 1.0 / t as f64)).collect();
        with_zero.push((5.0, 0.0));
        let fit = fit_rate(&with_zero).unwrap();
        assert_eq!(fit.excluded, 1);
        assert!((fit.slope + 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_game_is_monotone() {
        let g = CvarInstance { n: 3, n_i: 4, m: 20, ..Default::default() }.build_quadratic().unwrap();
        let cfg = ProbeConfig {
            variance_points: 4,
            batches_per_point: 32,
            ..ProbeConfig::new(500, 3)
        };
        let report = probe_assumptions(&g, &cfg, Execution::Parallel).unwrap();
        assert!(report.monotonicity_min >= -1e-10);
        assert!(report.mx_sq.is_finite() && report.mp_sq.is_finite());
    }

    #[test]
    fn full_batch_variance_is_zero() {
        let g = build_cvar_game(2, 2, 8, 0.9, 1, 2.0).unwrap();
        let cfg = ProbeConfig {
            batch_sizes: vec![2, 8],
            variance_points: 3,
            batches_per_point: 10,
            ..ProbeConfig::new(10, 1)
        };
        let report = probe_assumptions(&g, &cfg, Execution::Sequential).unwrap();
        let full = report.variance_at(8).unwrap();
        assert_eq!(full.primal, 0.0);
        assert_eq!(full.dual, 0.0);
        assert!(report.variance_at(2).unwrap().dual > 0.0);
    }

    #[test]
    fn probe_report_is_order_independent() {
        let g = build_cvar_game(2, 2, 8, 0.9, 1, 2.0).unwrap();
        let cfg = ProbeConfig {
            batch_sizes: vec![2, 4],
            variance_points: 4,
            batches_per_point: 8,
            ..ProbeConfig::new(20, 5)
        };
        let a = probe_assumptions(&g, &cfg, Execution::Sequential).unwrap();
        let b = probe_assumptions(&g, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_json_has_documented_fields() {
        let a = AssumptionReport {
            monotonicity_min: 0.0,
            monotonicity_pairs: 1,
            variance: vec![],
            nu1_sq: 1.0,
            nu2_sq: 2.0,
            mx_sq: 3.0,
            mp_sq: 4.0,
            seed: 0,
            samples: 1,
        };
        let json = DiagnosticsReport::new(&a, vec![(1, 0.5)], vec![1, 2]).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["monotonicity_min", "nu1_sq", "nu2_sq", "Mx_sq", "Mp_sq", "gap_curve", "slope", "seeds"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
