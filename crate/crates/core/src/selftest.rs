//! Built-in correctness checks run by `drne selftest`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::artifact::write_file;
use crate::diagnostics::{projected_residual, sample_feasible};
use crate::error::Result;
use crate::game::{CvarInstance, QuadraticGame, Scenario, ScenarioSet};
use crate::operator::{batch_g1, batch_g2, full_g1, full_g2};
use crate::oracle::{combinations, simplex_projection_bruteforce};
use crate::point::JointPoint;
use crate::projection::{project_simplex, BoxSet};
use crate::solver::{run, step_value, RunConfig, StepSchedule};

/// Fault injection for exercising the failure path.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelftestHooks {
    /// Added to the first coordinate of every simplex projection checked
    /// against the oracle.
    pub simplex_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckOutcome>,
}

pub const REPORT_FILE: &str = "selftest_report.txt";

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(s, "{status}  {:width$}  {}", c.name, c.detail).unwrap();
        }
        s
    }

    /// Writes the table to `dir/selftest_report.txt`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(REPORT_FILE);
        write_file(&path, self.table())?;
        Ok(path)
    }
}

fn simplex_oracle(hooks: &SelftestHooks) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut got = match project_simplex(&v) {
            Ok(p) => p,
            Err(e) => {
                return CheckOutcome { name: "simplex-oracle", passed: false, detail: e.to_string() };
            }
        };
        got[0] += hooks.simplex_perturbation;
        let want = simplex_projection_bruteforce(&v);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    CheckOutcome {
        name: "simplex-oracle",
        passed: worst <= 1e-9,
        detail: format!("max error {worst:.3e} over 1000 inputs (tol 1e-9)"),
    }
}

fn batch_enumeration() -> CheckOutcome {
    let run_check = || -> Result<f64> {
        let game = CvarInstance { n: 2, n_i: 2, m: 6, alpha: 0.9, bounds: 5.0, seed: 3, ..Default::default() }.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let z = sample_feasible(&game, &mut rng);
            let g1 = full_g1(&game, &z)?;
            let g2 = full_g2(&game, &z)?;
            for b in 1..=3 {
                let subsets = combinations(6, b);
                let mut m1 = vec![0.0; g1.len()];
                let mut m2 = vec![0.0; g2.len()];
                for s in &subsets {
                    for (a, v) in m1.iter_mut().zip(batch_g1(&game, &z, s)?) {
                        *a += v;
                    }
                    for (a, v) in m2.iter_mut().zip(batch_g2(&game, &z, s)?) {
                        *a += v;
                    }
                }
                let n = subsets.len() as f64;
                for (mean, full) in m1.iter().zip(&g1).chain(m2.iter().zip(&g2)) {
                    worst = worst.max((mean / n - full).abs());
                }
            }
        }
        Ok(worst)
    };
    match run_check() {
        Ok(worst) => CheckOutcome {
            name: "batch-unbiasedness",
            passed: worst <= 1e-12,
            detail: format!("max deviation {worst:.3e} over all batches at m = 6 (tol 1e-12)"),
        },
        Err(e) => CheckOutcome { name: "batch-unbiasedness", passed: false, detail: e.to_string() },
    }
}

#[allow(clippy::approx_constant)]
fn schedule_values() -> CheckOutcome {
    let s = StepSchedule::Theorem1;
    let cases = [(0usize, 1.442695), (1, 0.643636), (99, 0.021668)];
    let worst = cases
        .iter()
        .map(|&(t, want)| (step_value(&s, t) - want).abs())
        .fold(0.0, f64::max);
    CheckOutcome {
        name: "step-schedule",
        passed: worst <= 1e-6,
        detail: format!("max error {worst:.3e} at t in {{0, 1, 99}} (tol 1e-6)"),
    }
}

fn square_run() -> CheckOutcome {
    let run_check = || -> Result<(f64, f64)> {
        let data = ScenarioSet::new(1, 1, vec![Scenario { xi1: 2.0, xi2: 0.0 }], vec![0.0])?;
        let game = QuadraticGame::new(vec![BoxSet::symmetric(1, 1.0)?], data)?;
        let h = run(&game, &JointPoint::new(vec![0.9], vec![1.0]), &RunConfig::new(10_000, 1, 0))?;
        let avg = h.final_average();
        Ok((avg.x()[0].abs(), projected_residual(&game, avg, 0.1)?))
    };
    match run_check() {
        Ok((x, r)) => CheckOutcome {
            name: "square-run",
            passed: x <= 5e-2 && r <= 1e-1,
            detail: format!("|avg x| = {x:.3e} (tol 5e-2), residual {r:.3e} (tol 1e-1)"),
        },
        Err(e) => CheckOutcome { name: "square-run", passed: false, detail: e.to_string() },
    }
}

pub fn run_selftest(hooks: &SelftestHooks) -> SelftestReport {
    SelftestReport {
        checks: vec![simplex_oracle(hooks), batch_enumeration(), schedule_values(), square_run()],
    }
}
