//! The VI operator `F = [F1; F2]` and its mini-batch estimators.
//!
//! `g1` stacks `sum_j p_ij * s_i(x; xi_ij)` per player (a selection from the
//! weighted partial subdifferential) and `g2` stacks `-f_i(x; xi_ij)`. The
//! batch versions rescale by `m / b` so both are unbiased under uniform
//! sampling without replacement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, KinkRule};
use crate::point::JointPoint;

/// Scenario indices (0-based) for the primal and dual estimators of one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniBatch {
    pub primal: Vec<usize>,
    pub dual: Vec<usize>,
}

impl MiniBatch {
    /// Validates both index sets against `m` scenarios.
    pub fn new(primal: Vec<usize>, dual: Vec<usize>, m: usize) -> Result<Self> {
        validate_batch(&primal, m)?;
        validate_batch(&dual, m)?;
        Ok(Self { primal, dual })
    }

    pub fn full(m: usize) -> Self {
        Self {
            primal: (0..m).collect(),
            dual: (0..m).collect(),
        }
    }
}

fn validate_batch(indices: &[usize], m: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::param("mini-batch must be non-empty"));
    }
    if indices.len() > m {
        return Err(Error::param(format!("batch size {} exceeds m = {m}", indices.len())));
    }
    let mut seen = vec![false; m];
    for &j in indices {
        if j >= m {
            return Err(Error::param(format!("scenario index {j} out of range for m = {m}")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::param(format!("duplicate scenario index {j} in batch")));
        }
    }
    Ok(())
}

/// Draws index subsets uniformly without replacement via partial Fisher-Yates.
///
/// The permutation buffer persists between draws so each draw is `O(b)`
/// (plus the sort of the returned indices). Any starting arrangement yields a
/// uniform subset, so reusing the buffer keeps draws exact.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    perm: Vec<usize>,
}

impl BatchSampler {
    pub fn new(m: usize) -> Self {
        Self {
            perm: (0..m).collect(),
        }
    }

    pub fn population(&self) -> usize {
        self.perm.len()
    }

    /// Returns `b` distinct indices in ascending order.
    pub fn sample<R: Rng + ?Sized>(&mut self, b: usize, rng: &mut R) -> Result<Vec<usize>> {
        let m = self.perm.len();
        if b == 0 || b > m {
            return Err(Error::param(format!("batch size {b} must lie in 1..={m}")));
        }
        if b == m {
            return Ok((0..m).collect());
        }
        for k in 0..b {
            let swap = rng.random_range(k..m);
            self.perm.swap(k, swap);
        }
        let mut out = self.perm[..b].to_vec();
        out.sort_unstable();
        Ok(out)
    }
}

/// One uniform `b`-subset of `0..m`.
pub fn sample_batch<R: Rng + ?Sized>(m: usize, b: usize, rng: &mut R) -> Result<Vec<usize>> {
    BatchSampler::new(m).sample(b, rng)
}

/// A selection `(g1, g2)` from `F` at some point.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorValue {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

impl OperatorValue {
    /// `<g, z - y>`.
    pub fn pairing(&self, z: &JointPoint, y: &JointPoint) -> f64 {
        let px: f64 = self
            .g1
            .iter()
            .zip(z.x().iter().zip(y.x()))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        let pp: f64 = self
            .g2
            .iter()
            .zip(z.p().iter().zip(y.p()))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        px + pp
    }

    pub fn norm_sq(&self) -> (f64, f64) {
        (
            self.g1.iter().map(|v| v * v).sum(),
            self.g2.iter().map(|v| v * v).sum(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.g1.iter().chain(&self.g2).all(|v| v.is_finite())
    }
}

/// Reusable buffers for the weighted-subgradient accumulation.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    weights: Vec<f64>,
    all: Vec<usize>,
}

pub(crate) fn g1_into<G: Game + ?Sized>(
    game: &G,
    z: &JointPoint,
    indices: Option<&[usize]>,
    rule: KinkRule,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    let layout = game.layout();
    let m = layout.scenarios();
    if scratch.all.len() != m {
        scratch.all = (0..m).collect();
    }
    let idx: &[usize] = indices.unwrap_or(&scratch.all);
    let scale = m as f64 / idx.len() as f64;
    out.fill(0.0);
    for i in 0..layout.players() {
        let p = &z.p()[layout.p_range(i)];
        scratch.weights.clear();
        scratch.weights.extend(idx.iter().map(|&j| scale * p[j]));
        game.accumulate_subgradients(i, z.x(), idx, &scratch.weights, rule, &mut out[layout.x_range(i)]);
    }
}

pub(crate) fn g2_into<G: Game + ?Sized>(
    game: &G,
    z: &JointPoint,
    indices: Option<&[usize]>,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    let layout = game.layout();
    let m = layout.scenarios();
    if scratch.all.len() != m {
        scratch.all = (0..m).collect();
    }
    let idx: &[usize] = indices.unwrap_or(&scratch.all);
    let scale = m as f64 / idx.len() as f64;
    out.fill(0.0);
    scratch.weights.resize(idx.len(), 0.0);
    for i in 0..layout.players() {
        game.scenario_costs(i, z.x(), idx, &mut scratch.weights);
        let block = &mut out[layout.p_range(i)];
        for (&j, &f) in idx.iter().zip(&scratch.weights) {
            block[j] = -scale * f;
        }
    }
}

fn checked<G: Game + ?Sized>(game: &G, z: &JointPoint) -> Result<()> {
    z.check_shape(game)
}

/// Full-batch `g1` with the strict kink selection.
pub fn full_g1<G: Game + ?Sized>(game: &G, z: &JointPoint) -> Result<Vec<f64>> {
    full_g1_with(game, z, KinkRule::Strict)
}

pub fn full_g1_with<G: Game + ?Sized>(game: &G, z: &JointPoint, rule: KinkRule) -> Result<Vec<f64>> {
    checked(game, z)?;
    let mut out = vec![0.0; game.layout().x_dim()];
    g1_into(game, z, None, rule, &mut Scratch::default(), &mut out);
    Ok(out)
}

/// Full-batch `g2 = [-f_i(x; xi_ij)]`. Independent of `p`.
pub fn full_g2<G: Game + ?Sized>(game: &G, z: &JointPoint) -> Result<Vec<f64>> {
    checked(game, z)?;
    let mut out = vec![0.0; game.layout().p_dim()];
    g2_into(game, z, None, &mut Scratch::default(), &mut out);
    Ok(out)
}

/// Mini-batch `g1`: `(m / b) * sum_{j in B} p_ij * s_i(x; xi_ij)` per player.
pub fn batch_g1<G: Game + ?Sized>(game: &G, z: &JointPoint, batch: &[usize]) -> Result<Vec<f64>> {
    checked(game, z)?;
    validate_batch(batch, game.num_scenarios())?;
    let mut out = vec![0.0; game.layout().x_dim()];
    g1_into(game, z, Some(batch), KinkRule::Strict, &mut Scratch::default(), &mut out);
    Ok(out)
}

/// Mini-batch `g2`: `-(m / b) * f_i(x; xi_ij)` on `B`, zero elsewhere.
pub fn batch_g2<G: Game + ?Sized>(game: &G, z: &JointPoint, batch: &[usize]) -> Result<Vec<f64>> {
    checked(game, z)?;
    validate_batch(batch, game.num_scenarios())?;
    let mut out = vec![0.0; game.layout().p_dim()];
    g2_into(game, z, Some(batch), &mut Scratch::default(), &mut out);
    Ok(out)
}

/// Full operator value under a kink rule.
pub fn full_operator<G: Game + ?Sized>(game: &G, z: &JointPoint, rule: KinkRule) -> Result<OperatorValue> {
    Ok(OperatorValue {
        g1: full_g1_with(game, z, rule)?,
        g2: full_g2(game, z)?,
    })
}

/// Mini-batch operator value for a drawn batch pair.
pub fn batch_operator<G: Game + ?Sized>(game: &G, z: &JointPoint, batch: &MiniBatch) -> Result<OperatorValue> {
    Ok(OperatorValue {
        g1: batch_g1(game, z, &batch.primal)?,
        g2: batch_g2(game, z, &batch.dual)?,
    })
}
