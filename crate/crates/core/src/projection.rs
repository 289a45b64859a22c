//! Euclidean projections onto boxes, probability simplices and their product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::point::JointPoint;

/// Above this dimension the simplex threshold uses compensated summation.
pub const COMPENSATED_SUM_THRESHOLD: usize = 10_000;

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    /// Builds a box, requiring finite bounds with `lower < upper` componentwise.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::shape("box bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::param("box dimension must be at least 1"));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Domain(format!(
                    "box coordinate {k} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Squared Euclidean diameter.
    pub fn diameter_sq(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.len() == self.dim()
            && v
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol)
    }

    /// In-place clamp. Caller guarantees matching length.
    pub(crate) fn clamp_in_place(&self, v: &mut [f64]) {
        for (x, (lo, hi)) in v.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

/// A set the projections know how to handle.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionTarget {
    Box(BoxSet),
    Simplex(usize),
}

impl ProjectionTarget {
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            ProjectionTarget::Box(b) => project_box(v, b.lower(), b.upper()),
            ProjectionTarget::Simplex(m) => {
                if v.len() != *m {
                    return Err(Error::shape("simplex projection", *m, v.len()));
                }
                project_simplex(v)
            }
        }
    }
}

/// Componentwise clamp of `v` into `[lower, upper]`.
pub fn project_box(v: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != upper.len() {
        return Err(Error::shape("box bounds", lower.len(), upper.len()));
    }
    if v.len() != lower.len() {
        return Err(Error::shape("box projection", lower.len(), v.len()));
    }
    if let Some(k) = (0..v.len()).find(|&k| lower[k] > upper[k]) {
        return Err(Error::Domain(format!(
            "box coordinate {k}: lower {} exceeds upper {}",
            lower[k], upper[k]
        )));
    }
    Ok(v.iter()
        .zip(lower.iter().zip(upper))
        .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
        .collect())
}

/// Projection onto the probability simplex `{p >= 0, sum p = 1}`.
///
/// Sort-and-threshold: with `v` sorted descending, the support size is the
/// largest `k` for which `v_(k) - (sum_{l<=k} v_(l) - 1) / k > 0`, and the
/// result is `(v - tau)_+` with `tau` the threshold at that `k`.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    project_simplex_into(v, &mut out)?;
    Ok(out)
}

pub(crate) fn project_simplex_into(v: &[f64], out: &mut [f64]) -> Result<()> {
    let m = v.len();
    if m == 0 {
        return Err(Error::shape("simplex projection", 1, 0));
    }
    if let Some(k) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!(
            "simplex projection input has non-finite entry {} at index {k}",
            v[k]
        )));
    }
    if m == 1 {
        out[0] = 1.0;
        return Ok(());
    }

    // Stable sort: ties keep original index order.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));

    let tau = if m >= COMPENSATED_SUM_THRESHOLD {
        threshold_compensated(v, &order)
    } else {
        threshold_plain(v, &order)
    };
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x - tau).max(0.0);
    }
    // For large |v| the threshold carries an absolute error near ulp(|v|),
    // which shows up in the sum; rescale it away.
    let total: f64 = out.iter().sum();
    if total != 1.0 && total > 0.0 {
        for o in out.iter_mut() {
            *o /= total;
        }
    }
    Ok(())
}

fn threshold_plain(v: &[f64], order: &[usize]) -> f64 {
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &idx) in order.iter().enumerate() {
        cumsum += v[idx];
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v[idx] - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}

// Neumaier summation for the running prefix sums.
fn threshold_compensated(v: &[f64], order: &[usize]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut tau = 0.0;
    for (k, &idx) in order.iter().enumerate() {
        let x = v[idx];
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        let candidate = ((sum - 1.0) + comp) / (k + 1) as f64;
        if x - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}

/// Projects every strategy block onto its box and every ambiguity block onto its simplex.
pub fn project_joint<G: Game + ?Sized>(z: &JointPoint, game: &G) -> Result<JointPoint> {
    let mut out = z.clone();
    project_joint_in_place(&mut out, game)?;
    Ok(out)
}

pub(crate) fn project_joint_in_place<G: Game + ?Sized>(z: &mut JointPoint, game: &G) -> Result<()> {
    z.check_shape(game)?;
    let layout = game.layout();
    let m = game.num_scenarios();
    let mut scratch = vec![0.0; m];
    for i in 0..game.num_players() {
        game.strategy_set(i)
            .clamp_in_place(&mut z.x_mut()[layout.x_range(i)]);
        let block = &mut z.p_mut()[layout.p_range(i)];
        project_simplex_into(block, &mut scratch)?;
        block.copy_from_slice(&scratch);
    }
    Ok(())
}
