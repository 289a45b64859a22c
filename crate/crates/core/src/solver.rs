//! Stochastic projected gradient descent-ascent with step-weighted averaging.
//!
//! Each iteration draws one primal and one dual scenario batch shared by all
//! players, evaluates both estimators at the current point, and updates
//! `x <- P_K(x - lambda_t g1)` and `p <- P_P(p - gamma_t g2)` simultaneously.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, KinkRule};
use crate::operator::{g1_into, g2_into, BatchSampler, MiniBatch, Scratch};
use crate::par::Execution;
use crate::point::JointPoint;
use crate::projection::project_joint_in_place;

/// Tolerance for the per-iteration feasibility assertion.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Step-size sequence indexed from `t = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `1 / (sqrt(1 + t) * ln(t + 2))`.
    #[default]
    Theorem1,
    Constant(f64),
    /// `scale / (1 + t)^exponent`.
    PowerLaw { scale: f64, exponent: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Theorem1 => Ok(()),
            StepSchedule::Constant(v) if v > 0.0 && v.is_finite() => Ok(()),
            StepSchedule::PowerLaw { scale, exponent }
                if scale > 0.0 && scale.is_finite() && exponent >= 0.0 && exponent.is_finite() =>
            {
                Ok(())
            }
            _ => Err(Error::param(format!("step schedule {self:?} must be strictly positive"))),
        }
    }

    #[inline]
    pub fn value(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            StepSchedule::Theorem1 => 1.0 / ((1.0 + tf).sqrt() * (tf + 2.0).ln()),
            StepSchedule::Constant(v) => v,
            StepSchedule::PowerLaw { scale, exponent } => scale / (1.0 + tf).powf(exponent),
        }
    }
}

/// Step size at iteration `t`.
pub fn step_value(schedule: &StepSchedule, t: usize) -> f64 {
    schedule.value(t)
}

/// Which iterations are recorded in the history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogCadence {
    /// `t` in `{1, 2, 4, 8, ...}`.
    #[default]
    Geometric,
    /// Every `k`-th iteration.
    Every(usize),
    /// Every iteration, with the full iterate trace kept.
    Full,
}

impl LogCadence {
    fn logs(&self, t: usize) -> bool {
        match *self {
            LogCadence::Geometric => t.is_power_of_two(),
            LogCadence::Every(k) => k > 0 && t.is_multiple_of(k),
            LogCadence::Full => true,
        }
    }
}

/// Solver settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub iterations: usize,
    pub primal_batch: usize,
    pub dual_batch: usize,
    pub primal_schedule: StepSchedule,
    /// Falls back to `primal_schedule` when unset.
    pub dual_schedule: Option<StepSchedule>,
    pub seed: u64,
    pub cadence: LogCadence,
    /// Additional iteration counts to checkpoint regardless of cadence.
    pub extra_checkpoints: Vec<usize>,
    /// Record `|g_B - g|` at each checkpoint (costs one full evaluation each).
    pub record_noise: bool,
}

impl RunConfig {
    pub fn new(iterations: usize, batch: usize, seed: u64) -> Self {
        Self {
            iterations,
            primal_batch: batch,
            dual_batch: batch,
            primal_schedule: StepSchedule::Theorem1,
            dual_schedule: None,
            seed,
            cadence: LogCadence::Geometric,
            extra_checkpoints: Vec::new(),
            record_noise: false,
        }
    }

    pub fn dual_schedule(&self) -> &StepSchedule {
        self.dual_schedule.as_ref().unwrap_or(&self.primal_schedule)
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("iteration count must be at least 1"));
        }
        for (name, b) in [("primal", self.primal_batch), ("dual", self.dual_batch)] {
            if b == 0 || b > m {
                return Err(Error::param(format!("{name} batch size {b} must lie in 1..={m}")));
            }
        }
        self.primal_schedule.validate()?;
        self.dual_schedule().validate()
    }
}

/// Norms of the stochastic errors `w1 = g1_B - g1`, `w2 = g2_B - g2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub primal: f64,
    pub dual: f64,
}

/// State recorded after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: usize,
    /// `z^t`.
    pub iterate: JointPoint,
    /// Step-weighted average of `z^0 .. z^{t-1}`.
    pub average: JointPoint,
    /// Steps used to produce `z^t` from `z^{t-1}`.
    pub lambda: f64,
    pub gamma: f64,
    /// `|z^t - z^{t-1}|`.
    pub step_norm: f64,
    /// Batches drawn for the step into `z^t`.
    pub batch: MiniBatch,
    /// Stochastic error norms at `z^{t-1}`, when requested.
    pub noise: Option<NoiseRecord>,
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunHistory {
    pub seed: u64,
    pub iterations: usize,
    pub primal_schedule: StepSchedule,
    pub dual_schedule: StepSchedule,
    pub initial: JointPoint,
    pub checkpoints: Vec<Checkpoint>,
    /// `z^0 .. z^T`, only with [`LogCadence::Full`].
    pub trace: Option<Vec<JointPoint>>,
}

impl RunHistory {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("runs record at least the final iteration")
    }

    pub fn final_iterate(&self) -> &JointPoint {
        &self.final_checkpoint().iterate
    }

    pub fn final_average(&self) -> &JointPoint {
        &self.final_checkpoint().average
    }

    pub fn checkpoint(&self, t: usize) -> Option<&Checkpoint> {
        self.checkpoints
            .binary_search_by_key(&t, |c| c.t)
            .ok()
            .map(|k| &self.checkpoints[k])
    }
}

/// Running step-weighted sums of the iterates.
#[derive(Debug, Clone)]
struct Averager {
    sum_x: Vec<f64>,
    sum_p: Vec<f64>,
    weight_x: f64,
    weight_p: f64,
}

impl Averager {
    fn new(z: &JointPoint) -> Self {
        Self {
            sum_x: vec![0.0; z.x().len()],
            sum_p: vec![0.0; z.p().len()],
            weight_x: 0.0,
            weight_p: 0.0,
        }
    }

    fn add(&mut self, z: &JointPoint, lambda: f64, gamma: f64) {
        for (s, v) in self.sum_x.iter_mut().zip(z.x()) {
            *s += lambda * v;
        }
        for (s, v) in self.sum_p.iter_mut().zip(z.p()) {
            *s += gamma * v;
        }
        self.weight_x += lambda;
        self.weight_p += gamma;
    }

    fn mean(&self) -> JointPoint {
        JointPoint::new(
            self.sum_x.iter().map(|s| s / self.weight_x).collect(),
            self.sum_p.iter().map(|s| s / self.weight_p).collect(),
        )
    }
}

/// Buffers reused across iterations.
#[derive(Debug, Default)]
struct Stepper {
    scratch: Scratch,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl Stepper {
    fn step<G: Game + ?Sized>(
        &mut self,
        game: &G,
        z: &JointPoint,
        lambda: f64,
        gamma: f64,
        batch: &MiniBatch,
        iteration: usize,
    ) -> Result<JointPoint> {
        let layout = game.layout();
        self.g1.resize(layout.x_dim(), 0.0);
        self.g2.resize(layout.p_dim(), 0.0);
        // Both estimators read the old point.
        g1_into(game, z, Some(&batch.primal), KinkRule::Strict, &mut self.scratch, &mut self.g1);
        g2_into(game, z, Some(&batch.dual), &mut self.scratch, &mut self.g2);
        if let Some(k) = self.g1.iter().chain(&self.g2).position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                iteration,
                detail: format!("operator component {k} is not finite"),
            });
        }
        let x: Vec<f64> = z.x().iter().zip(&self.g1).map(|(a, g)| a - lambda * g).collect();
        let p: Vec<f64> = z.p().iter().zip(&self.g2).map(|(a, g)| a - gamma * g).collect();
        let mut next = JointPoint::new(x, p);
        project_joint_in_place(&mut next, game)?;
        Ok(next)
    }
}

fn require_feasible<G: Game + ?Sized>(game: &G, z: &JointPoint, what: &str) -> Result<()> {
    z.check_shape(game)?;
    if !z.is_feasible(game, FEASIBILITY_TOL) {
        return Err(Error::Contract(format!("{what} is not in K x P")));
    }
    Ok(())
}

/// One simultaneous projected descent-ascent step from a feasible `z`.
pub fn gda_step<G: Game + ?Sized>(
    game: &G,
    z: &JointPoint,
    lambda: f64,
    gamma: f64,
    batch: &MiniBatch,
) -> Result<JointPoint> {
    require_feasible(game, z, "iterate")?;
    if !(lambda > 0.0 && gamma > 0.0) {
        return Err(Error::param("step sizes must be strictly positive"));
    }
    let batch = MiniBatch::new(batch.primal.clone(), batch.dual.clone(), game.num_scenarios())?;
    Stepper::default().step(game, z, lambda, gamma, &batch, 0)
}

/// Runs `config.iterations` steps from `z0` (projected onto `K x P` first).
pub fn run<G: Game + ?Sized>(game: &G, z0: &JointPoint, config: &RunConfig) -> Result<RunHistory> {
    let m = game.num_scenarios();
    config.validate(m)?;
    let mut z = z0.clone();
    project_joint_in_place(&mut z, game)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut primal_sampler = BatchSampler::new(m);
    let mut dual_sampler = BatchSampler::new(m);
    let mut stepper = Stepper::default();
    let mut averager = Averager::new(&z);
    let dual_schedule = config.dual_schedule().clone();
    let full = config.cadence == LogCadence::Full;
    let mut trace = full.then(|| vec![z.clone()]);
    let mut extra = config.extra_checkpoints.clone();
    extra.sort_unstable();
    extra.dedup();

    let initial = z.clone();
    let mut checkpoints = Vec::new();
    for t in 0..config.iterations {
        let lambda = config.primal_schedule.value(t);
        let gamma = dual_schedule.value(t);
        averager.add(&z, lambda, gamma);

        let batch = MiniBatch {
            primal: primal_sampler.sample(config.primal_batch, &mut rng)?,
            dual: dual_sampler.sample(config.dual_batch, &mut rng)?,
        };
        let next = stepper.step(game, &z, lambda, gamma, &batch, t)?;
        if !next.is_feasible(game, FEASIBILITY_TOL) {
            return Err(Error::Contract(format!("iterate {} left K x P", t + 1)));
        }

        let done = t + 1;
        if config.cadence.logs(done) || done == config.iterations || extra.binary_search(&done).is_ok() {
            let noise = if config.record_noise {
                Some(noise_at(game, &z, &batch)?)
            } else {
                None
            };
            checkpoints.push(Checkpoint {
                t: done,
                step_norm: next.distance(&z),
                iterate: next.clone(),
                average: averager.mean(),
                lambda,
                gamma,
                batch,
                noise,
            });
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(next.clone());
        }
        z = next;
    }

    Ok(RunHistory {
        seed: config.seed,
        iterations: config.iterations,
        primal_schedule: config.primal_schedule.clone(),
        dual_schedule,
        initial,
        checkpoints,
        trace,
    })
}

fn noise_at<G: Game + ?Sized>(game: &G, z: &JointPoint, batch: &MiniBatch) -> Result<NoiseRecord> {
    let full = crate::operator::full_operator(game, z, KinkRule::Strict)?;
    let sampled = crate::operator::batch_operator(game, z, batch)?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    Ok(NoiseRecord {
        primal: dist(&sampled.g1, &full.g1),
        dual: dist(&sampled.g2, &full.g2),
    })
}

/// Independent runs for several seeds, in seed order.
pub fn run_seeds<G: Game + ?Sized>(
    game: &G,
    z0: &JointPoint,
    config: &RunConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<RunHistory>> {
    exec.map(seeds, |&seed| {
        let cfg = RunConfig {
            seed,
            ..config.clone()
        };
        run(game, z0, &cfg)
    })
    .into_iter()
    .collect()
}

/// Step-weighted average of `z^0 .. z^{T-1}`.
///
/// Uses the stored checkpoint at `T` if there is one, otherwise recomputes
/// from the full trace.
pub fn ergodic_average(history: &RunHistory, t: usize) -> Result<JointPoint> {
    if t == 0 || t > history.iterations {
        return Err(Error::Range {
            what: "averaging horizon",
            requested: t,
            available: history.iterations,
        });
    }
    if let Some(cp) = history.checkpoint(t) {
        return Ok(cp.average.clone());
    }
    let trace = history.trace.as_ref().ok_or(Error::Range {
        what: "unlogged averaging horizon",
        requested: t,
        available: history.iterations,
    })?;
    let mut avg = Averager::new(&trace[0]);
    for (k, z) in trace[..t].iter().enumerate() {
        avg.add(z, history.primal_schedule.value(k), history.dual_schedule.value(k));
    }
    Ok(avg.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_cvar_game, QuadraticGame, Scenario, ScenarioSet};
    use crate::projection::BoxSet;

    /// `f(x) = x^2` on `[-1, 1]` with one scenario.
    fn square_game() -> QuadraticGame {
        let data = ScenarioSet::new(1, 1, vec![Scenario { xi1: 2.0, xi2: 0.0 }], vec![0.0]).unwrap();
        QuadraticGame::new(vec![BoxSet::symmetric(1, 1.0).unwrap()], data).unwrap()
    }

    fn one_d_game(bound: f64, m: usize) -> QuadraticGame {
        let data = ScenarioSet::new(1, m, vec![Scenario { xi1: 1.0, xi2: 0.0 }; m], vec![0.0]).unwrap();
        QuadraticGame::new(vec![BoxSet::symmetric(1, bound).unwrap()], data).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn theorem1_values() {
        let s = StepSchedule::Theorem1;
        assert!((step_value(&s, 0) - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((step_value(&s, 0) - 1.442695).abs() < 1e-6);
        assert!((step_value(&s, 1) - 0.643636).abs() < 1e-6);
        assert!((step_value(&s, 99) - 0.021668).abs() < 1e-6);
        assert_eq!(step_value(&StepSchedule::Constant(0.1), 12345), 0.1);
    }

    #[test]
    fn theorem1_schedule_properties() {
        let s = StepSchedule::Theorem1;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut prev = f64::INFINITY;
        for t in 0..1_000_000 {
            let v = s.value(t);
            assert!(v > 0.0 && v < prev);
            prev = v;
            sum += v;
            sum_sq += v * v;
        }
        assert!(sum_sq <= 4.0, "sum of squares {sum_sq}");
        // Partial sums keep growing like sqrt(T)/ln(T).
        assert!(sum > 150.0);
    }

    #[test]
    fn invalid_schedules() {
        assert!(StepSchedule::Constant(0.0).validate().is_err());
        assert!(StepSchedule::Constant(-1.0).validate().is_err());
        assert!(StepSchedule::PowerLaw { scale: 1.0, exponent: -0.5 }.validate().is_err());
    }

    #[test]
    fn one_dimensional_step() {
        // x = 1, lambda = 0.5, g1 = 2 (f = x^2 / 2 * 2 at x = 1) -> 0.
        let g = square_game();
        let z = JointPoint::new(vec![1.0], vec![1.0]);
        let next = gda_step(&g, &z, 0.5, 0.5, &MiniBatch::full(1)).unwrap();
        assert_eq!(next.x(), &[0.0]);
    }

    #[test]
    fn zero_operator_is_fixed_point() {
        let g = square_game();
        let z = JointPoint::new(vec![0.0], vec![1.0]);
        assert_eq!(gda_step(&g, &z, 0.7, 0.7, &MiniBatch::full(1)).unwrap(), z);
    }

    #[test]
    fn dual_step_example() {
        // Costs (1, 3) at x: g2 = (-1, -3); p = (1/2, 1/2), gamma = 0.1
        // -> project(0.6, 0.8) = (0.4, 0.6).
        let data = ScenarioSet::new(
            1,
            2,
            vec![Scenario { xi1: 2.0, xi2: 0.0 }, Scenario { xi1: 6.0, xi2: 0.0 }],
            vec![0.0],
        )
        .unwrap();
        let g = QuadraticGame::new(vec![BoxSet::symmetric(1, 10.0).unwrap()], data).unwrap();
        let z = JointPoint::new(vec![1.0], vec![0.5, 0.5]);
        let next = gda_step(&g, &z, 1e-9, 0.1, &MiniBatch::full(2)).unwrap();
        assert!((next.p()[0] - 0.4).abs() < 1e-12);
        assert!((next.p()[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_infeasible_and_bad_steps() {
        let g = square_game();
        let z = JointPoint::new(vec![2.0], vec![1.0]);
        assert!(matches!(gda_step(&g, &z, 0.1, 0.1, &MiniBatch::full(1)), Err(Error::Contract(_))));
        let z = JointPoint::new(vec![0.5], vec![1.0]);
        assert!(gda_step(&g, &z, 0.0, 0.1, &MiniBatch::full(1)).is_err());
    }

    #[test]
    fn empty_run_is_rejected() {
        let g = square_game();
        let cfg = RunConfig::new(0, 1, 0);
        assert!(matches!(run(&g, &JointPoint::initial(&g), &cfg), Err(Error::Parameter(_))));
        let cfg = RunConfig::new(10, 2, 0);
        assert!(matches!(run(&g, &JointPoint::initial(&g), &cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn full_batch_runs_ignore_the_seed() {
        let g = build_cvar_game(2, 2, 6, 0.9, 3, 2.0).unwrap();
        let z0 = JointPoint::initial(&g);
        let a = run(&g, &z0, &RunConfig::new(200, 6, 1)).unwrap();
        let b = run(&g, &z0, &RunConfig::new(200, 6, 2)).unwrap();
        assert_eq!(a.final_iterate(), b.final_iterate());
        assert_eq!(a.final_average(), b.final_average());
    }

    #[test]
    fn replay_is_bitwise() {
        let g = build_cvar_game(2, 3, 10, 0.9, 3, 5.0).unwrap();
        let z0 = JointPoint::initial(&g);
        let cfg = RunConfig {
            cadence: LogCadence::Full,
            ..RunConfig::new(300, 3, 77)
        };
        let a = run(&g, &z0, &cfg).unwrap();
        let b = run(&g, &z0, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.checkpoints, b.checkpoints);
        let c = run(&g, &z0, &RunConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(a.final_iterate(), c.final_iterate());
    }

    #[test]
    fn logging_cadence_does_not_change_iterates() {
        let g = build_cvar_game(2, 3, 10, 0.9, 3, 5.0).unwrap();
        let z0 = JointPoint::initial(&g);
        let geo = run(&g, &z0, &RunConfig::new(257, 4, 5)).unwrap();
        let every = run(
            &g,
            &z0,
            &RunConfig {
                cadence: LogCadence::Every(7),
                record_noise: true,
                ..RunConfig::new(257, 4, 5)
            },
        )
        .unwrap();
        assert_eq!(geo.final_iterate(), every.final_iterate());
        assert_eq!(geo.final_average(), every.final_average());
        let ts: Vec<usize> = geo.checkpoints.iter().map(|c| c.t).collect();
        assert_eq!(ts, vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 257]);
        assert!(every.checkpoints.iter().all(|c| c.noise.is_some()));
    }

    #[test]
    fn every_iterate_is_feasible() {
        let g = build_cvar_game(3, 2, 8, 0.95, 4, 3.0).unwrap();
        let cfg = RunConfig {
            cadence: LogCadence::Full,
            ..RunConfig::new(500, 2, 9)
        };
        let h = run(&g, &JointPoint::initial(&g), &cfg).unwrap();
        for z in h.trace.as_ref().unwrap() {
            assert!(z.is_feasible(&g, FEASIBILITY_TOL));
        }
    }

    #[test]
    fn update_is_simultaneous_across_players() {
        // Reversing the player order yields the same step because every block
        // is computed from the old point.
        let inst = crate::game::CvarInstance {
            n: 3,
            n_i: 2,
            m: 5,
            alpha: 0.9,
            seed: 31,
            bounds: 4.0,
            ..Default::default()
        };
        let g = inst.build().unwrap();
        let data = g.scenarios();
        let rev_records: Vec<Scenario> = (0..3).rev().flat_map(|i| data.player(i).to_vec()).collect();
        let c = data.c();
        let rev_c: Vec<f64> = (0..3).rev().flat_map(|i| c[2 * i..2 * i + 2].to_vec()).collect();
        let rev = crate::game::CvarGame::new(ScenarioSet::new(3, 5, rev_records, rev_c).unwrap(), 0.9, 4.0).unwrap();

        let mut z = JointPoint::initial(&g);
        for (k, v) in z.x_mut().iter_mut().enumerate() {
            *v = 0.3 * (k as f64) - 1.0;
        }
        let permute_x = |x: &[f64]| -> Vec<f64> { (0..3).rev().flat_map(|i| x[3 * i..3 * i + 3].to_vec()).collect() };
        let permute_p = |p: &[f64]| -> Vec<f64> { (0..3).rev().flat_map(|i| p[5 * i..5 * i + 5].to_vec()).collect() };
        let z_rev = JointPoint::new(permute_x(z.x()), permute_p(z.p()));
        let batch = MiniBatch::new(vec![0, 2], vec![1, 3, 4], 5).unwrap();
        let a = gda_step(&g, &z, 0.3, 0.2, &batch).unwrap();
        let b = gda_step(&rev, &z_rev, 0.3, 0.2, &batch).unwrap();
        let tol = 1e-12;
        for (u, v) in permute_x(a.x()).iter().zip(b.x()) {
            assert!((u - v).abs() < tol);
        }
        for (u, v) in permute_p(a.p()).iter().zip(b.p()) {
            assert!((u - v).abs() < tol);
        }
    }

    #[test]
    fn ergodic_average_examples() {
        // Constant schedule: arithmetic mean.
        let cfg = RunConfig {
            primal_schedule: StepSchedule::Constant(0.1),
            cadence: LogCadence::Full,
            ..RunConfig::new(20, 1, 0)
        };
        let g = one_d_game(10.0, 1);
        let z0 = JointPoint::new(vec![5.0], vec![1.0]);
        let h = run(&g, &z0, &cfg).unwrap();
        let trace = h.trace.as_ref().unwrap();
        for t in [1, 7, 20] {
            let mean: f64 = trace[..t].iter().map(|z| z.x()[0]).sum::<f64>() / t as f64;
            let avg = ergodic_average(&h, t).unwrap();
            assert!((avg.x()[0] - mean).abs() < 1e-12);
        }
        // T = 1 is z^0 itself.
        assert_eq!(ergodic_average(&h, 1).unwrap().x(), &[5.0]);
        assert!(matches!(ergodic_average(&h, 21), Err(Error::Range { .. })));
        assert!(matches!(ergodic_average(&h, 0), Err(Error::Range { .. })));
    }

    #[test]
    fn theorem1_weighted_average_of_two_iterates() {
        // 1-D iterates z^0 = 0, z^1 = 1 with theorem1 weights:
        // lambda_1 / (lambda_0 + lambda_1).
        let l0 = StepSchedule::Theorem1.value(0);
        // f = x^2 / 2 has g = x; start at 0 and use a linear term to push to 1.
        let data = ScenarioSet::new(1, 1, vec![Scenario { xi1: 1e-12, xi2: 1.0 }], vec![-1.0 / l0]).unwrap();
        let push = QuadraticGame::new(vec![BoxSet::symmetric(1, 10.0).unwrap()], data).unwrap();
        let cfg = RunConfig {
            cadence: LogCadence::Full,
            ..RunConfig::new(2, 1, 0)
        };
        let h = run(&push, &JointPoint::new(vec![0.0], vec![1.0]), &cfg).unwrap();
        let trace = h.trace.as_ref().unwrap();
        assert!(trace[0].x()[0] == 0.0);
        assert!((trace[1].x()[0] - 1.0).abs() < 1e-12);
        let avg = ergodic_average(&h, 2).unwrap();
        let l1 = 1.0 / (2f64.sqrt() * 3f64.ln());
        let expect = l1 / (l0 + l1);
        assert!((avg.x()[0] - expect).abs() < 1e-12);
        assert!((expect - 0.308501).abs() < 1e-6);
    }

    #[test]
    fn averages_are_recomputable_from_trace() {
        let g = build_cvar_game(2, 2, 6, 0.9, 3, 2.0).unwrap();
        let cfg = RunConfig {
            cadence: LogCadence::Full,
            ..RunConfig::new(64, 2, 4)
        };
        let h = run(&g, &JointPoint::initial(&g), &cfg).unwrap();
        let stored = h.checkpoint(64).unwrap().average.clone();
        let mut trimmed = h.clone();
        trimmed.checkpoints.clear();
        assert_eq!(ergodic_average(&trimmed, 64).unwrap(), stored);
    }

    #[test]
    fn square_game_converges() {
        let g = square_game();
        for x0 in [0.0, 1.0, -0.8] {
            let h = run(&g, &JointPoint::new(vec![x0], vec![1.0]), &RunConfig::new(10_000, 1, 0)).unwrap();
            assert!(h.final_average().x()[0].abs() <= 5e-2, "x0 = {x0}");
        }
    }

    #[test]
    fn run_seeds_matches_individual_runs() {
        let g = build_cvar_game(2, 2, 6, 0.9, 3, 2.0).unwrap();
        let z0 = JointPoint::initial(&g);
        let cfg = RunConfig::new(100, 2, 0);
        let many = run_seeds(&g, &z0, &cfg, &[3, 4], Execution::Parallel).unwrap();
        let single = run(&g, &z0, &RunConfig { seed: 4, ..cfg }).unwrap();
        assert_eq!(many[1].final_iterate(), single.final_iterate());
    }
}
