//! Stochastic gradient descent-ascent for distributionally robust Nash
//! equilibria of finite-scenario games.
//!
//! A game is a [`Game`]: players with box strategy sets and per-scenario
//! costs. Each player also picks ambiguity weights on the scenario simplex,
//! and the whole problem becomes a monotone variational inequality over the
//! joint point `(x, p)`. [`solver::run`] applies projected mini-batch
//! descent-ascent and tracks the step-weighted average, and
//! [`diagnostics`] measures how far a point is from equilibrium.

pub mod artifact;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod game;
pub mod operator;
pub mod oracle;
pub mod par;
pub mod plot;
pub mod point;
pub mod projection;
pub mod selftest;
pub mod solver;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use game::{build_cvar_game, CvarGame, CvarInstance, Game, KinkRule, QuadraticGame, Scenario, ScenarioSet};
pub use operator::{batch_operator, full_operator, BatchSampler, MiniBatch, OperatorValue};
pub use par::Execution;
pub use point::{JointPoint, Layout};
pub use projection::{project_box, project_simplex, BoxSet};
pub use solver::{run, run_seeds, RunConfig, RunHistory, StepSchedule};
