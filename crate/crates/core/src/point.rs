use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;

/// Where each player's blocks live inside a [`JointPoint`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    x_offsets: Vec<usize>,
    scenarios: usize,
}

impl Layout {
    pub fn new(block_dims: &[usize], scenarios: usize) -> Self {
        let mut x_offsets = Vec::with_capacity(block_dims.len() + 1);
        x_offsets.push(0);
        for d in block_dims {
            x_offsets.push(x_offsets.last().unwrap() + d);
        }
        Self {
            x_offsets,
            scenarios,
        }
    }

    pub fn players(&self) -> usize {
        self.x_offsets.len() - 1
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn x_dim(&self) -> usize {
        *self.x_offsets.last().unwrap()
    }

    pub fn p_dim(&self) -> usize {
        self.players() * self.scenarios
    }

    pub fn x_range(&self, player: usize) -> Range<usize> {
        self.x_offsets[player]..self.x_offsets[player + 1]
    }

    pub fn p_range(&self, player: usize) -> Range<usize> {
        player * self.scenarios..(player + 1) * self.scenarios
    }
}

/// The variational-inequality variable: all strategy blocks followed by all
/// ambiguity weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    x: Vec<f64>,
    p: Vec<f64>,
}

impl JointPoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        Self { x, p }
    }

    /// Box centers and uniform ambiguity weights.
    pub fn initial<G: Game + ?Sized>(game: &G) -> Self {
        let layout = game.layout();
        let mut x = Vec::with_capacity(layout.x_dim());
        for i in 0..layout.players() {
            x.extend(game.strategy_set(i).center());
        }
        let m = layout.scenarios();
        let p = vec![1.0 / m as f64; layout.p_dim()];
        Self { x, p }
    }

    pub fn zeros(layout: &Layout) -> Self {
        Self {
            x: vec![0.0; layout.x_dim()],
            p: vec![0.0; layout.p_dim()],
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.p)
    }

    pub fn dim(&self) -> usize {
        self.x.len() + self.p.len()
    }

    pub fn check_shape<G: Game + ?Sized>(&self, game: &G) -> Result<()> {
        let layout = game.layout();
        if self.x.len() != layout.x_dim() {
            return Err(Error::shape("strategy vector", layout.x_dim(), self.x.len()));
        }
        if self.p.len() != layout.p_dim() {
            return Err(Error::shape("ambiguity vector", layout.p_dim(), self.p.len()));
        }
        Ok(())
    }

    /// Box and simplex membership, each within `tol`.
    pub fn is_feasible<G: Game + ?Sized>(&self, game: &G, tol: f64) -> bool {
        if self.check_shape(game).is_err() {
            return false;
        }
        let layout = game.layout();
        (0..layout.players()).all(|i| {
            let block = &self.p[layout.p_range(i)];
            let sum: f64 = block.iter().sum();
            game.strategy_set(i).contains(&self.x[layout.x_range(i)], tol)
                && block.iter().all(|v| *v >= -tol)
                && (sum - 1.0).abs() <= tol
        })
    }

    pub fn all_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }

    pub fn distance(&self, other: &JointPoint) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &JointPoint) -> f64 {
        let dx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| (a - b) * (a - b)).sum();
        let dp: f64 = self.p.iter().zip(&other.p).map(|(a, b)| (a - b) * (a - b)).sum();
        dx + dp
    }

    pub fn norm(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.p)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean diameter of the feasible set `K x P`.
pub fn feasible_diameter<G: Game + ?Sized>(game: &G) -> f64 {
    let layout = game.layout();
    let boxes: f64 = (0..layout.players())
        .map(|i| game.strategy_set(i).diameter_sq())
        .sum();
    // Each simplex with at least two vertices has diameter sqrt(2).
    let simplices = if layout.scenarios() > 1 {
        2.0 * layout.players() as f64
    } else {
        0.0
    };
    (boxes + simplices).sqrt()
}
