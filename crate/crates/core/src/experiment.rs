//! Runs every `(batch size, seed)` combination of an [`ExperimentConfig`]
//! and writes the result files listed in a [`Manifest`].

use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::artifact::{
    c_vector_csv, encode_trace, gap_curve_csv, history_csv, instance_toml, parse_gap_curve_csv, scenarios_csv, summarize,
    summary_csv, write_checkpoint, write_file, ArtifactEntry, ArtifactKind, FailureRecord, GapRow, HistoryRow,
    Manifest, RunRecord, MANIFEST_FILE,
};
use crate::config::ExperimentConfig;
use crate::diagnostics::{gap_curve, mean_entropy};
use crate::error::Result;
use crate::game::Game;
use crate::par::Execution;
use crate::plot::render_gap_svg;
use crate::point::JointPoint;
use crate::solver::{run, RunConfig, RunHistory};

pub const GAP_CURVE_FILE: &str = "gap_curve.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "gap_curve.svg";

/// One `(batch size, seed)` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub batch_size: usize,
    pub dual_batch_size: usize,
    pub seed: u64,
}

/// Jobs ordered by batch size, then seed.
pub fn jobs(config: &ExperimentConfig) -> Vec<Job> {
    let mut seeds = config.solver.seeds.clone();
    seeds.sort_unstable();
    let mut pairs = config.batch_pairs();
    pairs.sort_unstable();
    pairs
        .into_iter()
        .flat_map(|(b1, b2)| {
            seeds.iter().map(move |&seed| Job {
                batch_size: b1,
                dual_batch_size: b2,
                seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub job: Job,
    pub curve: Vec<GapRow>,
    pub history: Vec<HistoryRow>,
    pub final_iterate: JointPoint,
    pub final_average: JointPoint,
    /// `z^0` followed by every recorded iterate.
    pub iterates: Vec<JointPoint>,
}

pub fn history_rows<G: Game + ?Sized>(game: &G, history: &RunHistory) -> Vec<HistoryRow> {
    let last = history.final_iterate();
    std::iter::once((0, &history.initial))
        .chain(history.checkpoints.iter().map(|c| (c.t, &c.iterate)))
        .map(|(t, z)| HistoryRow {
            t,
            lambda: history.primal_schedule.value(t),
            x_norm: z.x().iter().map(|v| v * v).sum::<f64>().sqrt(),
            p_entropy: mean_entropy(game, z),
            dist_to_final: z.distance(last),
        })
        .collect()
}

/// Runs one job and evaluates its gap curve.
pub fn run_job<G: Game + ?Sized>(config: &ExperimentConfig, game: &G, job: Job, exec: Execution) -> Result<JobOutcome> {
    let s = &config.solver;
    let checkpoints = config.gap_checkpoints();
    let run_config = RunConfig {
        primal_batch: job.batch_size,
        dual_batch: job.dual_batch_size,
        primal_schedule: s.schedule.clone(),
        dual_schedule: s.dual_schedule.clone(),
        cadence: s.cadence.clone(),
        extra_checkpoints: checkpoints.clone(),
        ..RunConfig::new(s.iterations, job.batch_size, job.seed)
    };
    let history = run(game, &JointPoint::initial(game), &run_config)?;
    let curve = gap_curve(game, &history, &checkpoints, s.probe_seed, s.residual_step, exec)?
        .into_iter()
        .map(|p| GapRow {
            batch_size: job.batch_size,
            seed: job.seed,
            t: p.t,
            gap: p.gap,
            residual: p.residual,
        })
        .collect();
    Ok(JobOutcome {
        job,
        curve,
        history: history_rows(game, &history),
        final_iterate: history.final_iterate().clone(),
        final_average: history.final_average().clone(),
        iterates: std::iter::once(&history.initial)
            .chain(history.checkpoints.iter().map(|c| &c.iterate))
            .cloned()
            .collect(),
    })
}

/// Files written by an experiment, plus its manifest.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub gap_rows: Vec<GapRow>,
}

impl ResultBundle {
    pub fn is_complete(&self) -> bool {
        self.manifest.complete
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<ArtifactEntry>,
}

impl Writer {
    fn write(&mut self, name: impl Into<PathBuf>, kind: ArtifactKind, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let name = name.into();
        write_file(&self.dir.join(&name), contents)?;
        self.files.push(ArtifactEntry { path: name.clone(), kind });
        Ok(name)
    }

    fn checkpoint(&mut self, name: String, kind: ArtifactKind, z: &JointPoint) -> Result<PathBuf> {
        let name = PathBuf::from(name);
        write_checkpoint(&self.dir.join(&name), z)?;
        self.files.push(ArtifactEntry { path: name.clone(), kind });
        Ok(name)
    }
}

/// Builds the configured instance, writes its files, and runs every job.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<ResultBundle> {
    config.validate()?;
    let game = config.instance.build()?;
    let mut writer = Writer {
        dir: config.output.dir.clone(),
        files: Vec::new(),
    };
    writer.write("config.toml", ArtifactKind::Config, config.to_toml_string())?;
    writer.write("instance.toml", ArtifactKind::Instance, instance_toml(&config.instance))?;
    if config.output.emit_csv {
        writer.write("scenarios.csv", ArtifactKind::Scenarios, scenarios_csv(&game))?;
        writer.write("c_vector.csv", ArtifactKind::CVector, c_vector_csv(&game))?;
    }
    execute(config, &game, writer, exec)
}

/// Runs every job of `config` against `game` and writes the results under
/// `config.output.dir`. A job that fails leaves a failure record and an
/// incomplete manifest; the other jobs still run.
pub fn run_experiment_on<G: Game + ?Sized>(config: &ExperimentConfig, game: &G, exec: Execution) -> Result<ResultBundle> {
    config.validate()?;
    let writer = Writer {
        dir: config.output.dir.clone(),
        files: Vec::new(),
    };
    execute(config, game, writer, exec)
}

fn execute<G: Game + ?Sized>(
    config: &ExperimentConfig,
    game: &G,
    mut writer: Writer,
    exec: Execution,
) -> Result<ResultBundle> {
    let all = jobs(config);
    info!("running {} jobs", all.len());
    let outcomes = exec.map(&all, |job| run_job(config, game, *job, Execution::Sequential));

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut gap_rows = Vec::new();
    for (job, outcome) in all.iter().zip(outcomes) {
        match outcome {
            Ok(out) => {
                let stem = format!("{}_{}", job.seed, job.batch_size);
                let history = if config.output.emit_csv {
                    Some(writer.write(format!("history_{stem}.csv"), ArtifactKind::History, history_csv(&out.history))?)
                } else {
                    None
                };
                let final_iterate =
                    writer.checkpoint(format!("final_{stem}.bin"), ArtifactKind::FinalIterate, &out.final_iterate)?;
                let final_average =
                    writer.checkpoint(format!("average_{stem}.bin"), ArtifactKind::FinalAverage, &out.final_average)?;
                let iterates = writer.write(
                    format!("iterates_{stem}.bin"),
                    ArtifactKind::IterateTrace,
                    encode_trace(&out.iterates)?,
                )?;
                runs.push(RunRecord {
                    batch_size: job.batch_size,
                    dual_batch_size: job.dual_batch_size,
                    seed: job.seed,
                    history,
                    final_iterate,
                    final_average,
                    iterates,
                    curve: out.curve.iter().map(|r| (r.t, r.gap)).collect(),
                });
                gap_rows.extend(out.curve);
            }
            Err(e) => {
                warn!("run b={} seed={} failed: {e}", job.batch_size, job.seed);
                failures.push(FailureRecord {
                    batch_size: job.batch_size,
                    seed: job.seed,
                    message: e.to_string(),
                });
            }
        }
    }

    // Plots are drawn from the CSV text so they can be regenerated from it.
    let curve_text = gap_curve_csv(&gap_rows);
    let summary = summarize(&parse_gap_curve_csv(&curve_text)?);
    if config.output.emit_csv {
        writer.write(GAP_CURVE_FILE, ArtifactKind::GapCurve, &curve_text)?;
        writer.write(SUMMARY_FILE, ArtifactKind::Summary, summary_csv(&summary))?;
    }
    if config.output.emit_svg {
        writer.write(PLOT_FILE, ArtifactKind::Plot, render_gap_svg(&summary))?;
    }

    let manifest = Manifest {
        complete: failures.is_empty(),
        files: writer.files,
        runs,
        summary,
        failures,
    };
    write_file(&writer.dir.join(MANIFEST_FILE), manifest.to_json())?;
    Ok(ResultBundle {
        dir: writer.dir,
        manifest,
        gap_rows,
    })
}

/// Redraws the plot of a finished experiment from its `gap_curve.csv`.
pub fn regenerate_plot(dir: &Path) -> Result<String> {
    let path = dir.join(GAP_CURVE_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| crate::error::Error::io(&path, e))?;
    Ok(render_gap_svg(&summarize(&parse_gap_curve_csv(&text)?)))
}
