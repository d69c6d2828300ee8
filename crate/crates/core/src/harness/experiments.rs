//! Experiment runners: single configured runs, the nominal and disturbed
//! case studies, and the cross-solver gain comparison.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actor_critic::{train_online, WeightSnapshot};
use crate::error::{Error, Result};
use crate::harness::config::{ControllerMode, DisturbanceConfig, ExperimentConfig, ResolvedExperiment};
use crate::harness::output::{write_json_file, write_trajectory_file, write_weights_file};
use crate::harness::presets::{self, Subsystem};
use crate::hdp::hdp_solve;
use crate::linalg::Matrix;
use crate::plant::{simulate, InputForm, LinearFeedback, PlantModel, Trajectory};
use crate::qkernel::{collect_random_transitions, parameter_count, vi_solve, Evaluator, ViConfig};
use crate::riccati::{dare_solve, riccati_solve, RiccatiVariant};
use crate::spectral::{closed_loop_poles, open_loop_poles, Feedback, PoleSet};

/// Fraction of `‖Z_0‖₂` used by the settling criterion.
pub const SETTLING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct PoleSnapshot {
    pub k: usize,
    pub poles: PoleSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolesReport {
    pub open_loop: PoleSet,
    /// Closed loop of the final controller.
    pub closed_loop: PoleSet,
    /// Closed loop of the learning actor along the run.
    pub snapshots: Vec<PoleSnapshot>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub settling_time: Option<f64>,
    pub spectral_radius: f64,
    /// Final gain `K` of `u = −K Z` (row-major).
    pub gain: Vec<f64>,
    pub converged_at: Option<usize>,
    pub saturation_events: usize,
    pub skipped_actor_updates: usize,
    /// Largest per-entry weight change over the final 5 % of steps.
    pub tail_weight_change: Option<f64>,
    /// Solver residual per iteration, or the mean critic error per
    /// 100-step window for learning runs.
    pub residual_history: Vec<f64>,
    pub total_cost: f64,
}

/// Outcome of one configured run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: ControllerMode,
    pub model: PlantModel,
    pub trajectory: Trajectory,
    pub weights: Option<Vec<WeightSnapshot>>,
    pub poles: PolesReport,
    pub report: ConvergenceReport,
    /// Not written to any output file.
    pub wall_clock: Duration,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    name: &'a str,
    config_hash: &'a str,
    seed: u64,
    mode: String,
    steps: usize,
    dt: f64,
    report: &'a ConvergenceReport,
}

impl RunRecord {
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.name, self.seed)
    }

    /// Writes `<stem>_trajectory.csv`, `<stem>_weights.csv` (learning runs),
    /// `<stem>_poles.json` and `<stem>_report.json`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let stem = self.file_stem();
        let mut paths = Vec::new();
        let path = dir.join(format!("{stem}_trajectory.csv"));
        write_trajectory_file(&path, &self.model, &self.trajectory)?;
        paths.push(path);
        if let Some(weights) = &self.weights {
            let path = dir.join(format!("{stem}_weights.csv"));
            write_weights_file(&path, weights)?;
            paths.push(path);
        }
        let path = dir.join(format!("{stem}_poles.json"));
        write_json_file(&path, &self.poles)?;
        paths.push(path);
        let path = dir.join(format!("{stem}_report.json"));
        write_json_file(
            &path,
            &ReportFile {
                name: &self.name,
                config_hash: &self.config_hash,
                seed: self.seed,
                mode: self.mode.to_string(),
                steps: self.trajectory.len(),
                dt: self.trajectory.dt,
                report: &self.report,
            },
        )?;
        paths.push(path);
        Ok(paths)
    }
}

/// Fixed gain for the non-learning modes, with the solver's residual history.
pub fn design_gain(config: &ExperimentConfig, resolved: &ResolvedExperiment, seed: u64) -> Result<(Matrix, Vec<f64>)> {
    let (model, cost) = (&resolved.model, &resolved.cost);
    let (tol, max_iter) = (config.solver_tol, config.solver_max_iter);
    let vi_config = ViConfig {
        tol,
        max_iter,
        ..ViConfig::default()
    };
    match config.mode {
        ControllerMode::Hdp => hdp_solve(model, cost, tol, max_iter).map(|s| (s.gain, vec![s.residual])),
        ControllerMode::Riccati => {
            riccati_solve(model, cost, config.variant, tol, max_iter).map(|s| (s.gain, vec![s.residual]))
        }
        ControllerMode::ModelfreeExact => vi_solve(
            Evaluator::Exact {
                model,
                variant: config.variant,
            },
            cost,
            &vi_config,
        )
        .map(|s| (s.gain, s.history)),
        ControllerMode::ModelfreeLsq => {
            let mut source = model.clone();
            let dim = model.n() + model.m();
            let count = if config.lsq_samples == 0 {
                4 * parameter_count(dim)
            } else {
                config.lsq_samples
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = collect_random_transitions(&mut source, cost, count, config.lsq_amplitude, &mut rng)?;
            let lsq_config = ViConfig {
                tol: tol.max(1e-10),
                ..vi_config
            };
            vi_solve(Evaluator::LeastSquares { samples }, cost, &lsq_config).map(|s| (s.gain, s.history))
        }
        ControllerMode::Dare | ControllerMode::Combined => {
            dare_solve(model, cost, tol, max_iter).map(|s| (s.gain, Vec::new()))
        }
        ControllerMode::ActorCritic => Err(Error::Config("actor-critic mode has no fixed design gain".into())),
    }
}

fn window_means(values: &[f64], window: usize) -> Vec<f64> {
    values
        .chunks(window)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Runs one configured experiment for one seed.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let started = Instant::now();
    let resolved = config.resolve()?;
    let model = &resolved.model;
    let open_loop = open_loop_poles(model)?;

    let (trajectory, weights, closed_loop, snapshots, report) = if config.mode.is_learning() {
        let mut train = config.train_config(seed)?;
        if config.mode == ControllerMode::Combined {
            train.riccati_gain = Some(design_gain(config, &resolved, seed)?.0);
        }
        let run = train_online(model, &resolved.cost, &resolved.weights, &resolved.z0, &train)?;
        let every = config.snapshot_every.max(1);
        let snapshots = run
            .weights
            .iter()
            .filter(|s| s.k % every == 0 || s.k + 1 == run.weights.len())
            .map(|s| {
                Ok(PoleSnapshot {
                    k: s.k,
                    poles: closed_loop_poles(model, Feedback::Actor(&s.wa))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // With an assist the applied law is u = (W_aᵀ − K^R) Z while unsaturated.
        // In the literal input form the model-free channel only reaches the plant
        // through the disturbed input matrix, so the nominal loop sees K^R alone.
        let literal = train
            .disturbance
            .as_ref()
            .is_some_and(|d| d.input_form == InputForm::Literal && train.riccati_gain.is_some());
        let mut gain = if literal {
            Matrix::zeros(model.m(), model.n())
        } else {
            -run.final_weights.wa.transpose()
        };
        if let Some(k) = &train.riccati_gain {
            gain += k * config.riccati_weight;
        }
        let closed_loop = closed_loop_poles(model, Feedback::Gain(&gain))?;
        let report = ConvergenceReport {
            settling_time: run.report.settling_time,
            spectral_radius: closed_loop.spectral_radius,
            gain: gain.transpose().iter().copied().collect(),
            converged_at: run.report.converged_at,
            saturation_events: run.report.saturation_events,
            skipped_actor_updates: run.report.skipped_actor_updates,
            tail_weight_change: Some(run.report.tail_weight_change),
            residual_history: window_means(&run.report.critic_errors, 100),
            total_cost: run.trajectory.total_cost(),
        };
        (run.trajectory, Some(run.weights), closed_loop, snapshots, report)
    } else {
        let (gain, history) = design_gain(config, &resolved, seed)?;
        let spec = config.disturbance_spec(seed)?;
        let trajectory = simulate(
            model,
            &mut LinearFeedback(gain.clone()),
            &resolved.cost,
            &resolved.z0,
            config.steps,
            config.dt,
            spec.as_ref(),
        )?;
        let closed_loop = closed_loop_poles(model, Feedback::Gain(&gain))?;
        let bound = model.control_bound().map(|b| b[0]).unwrap_or(f64::INFINITY);
        let report = ConvergenceReport {
            settling_time: trajectory.settling_time(SETTLING_FRACTION),
            spectral_radius: closed_loop.spectral_radius,
            gain: gain.transpose().iter().copied().collect(),
            converged_at: None,
            saturation_events: trajectory
                .samples
                .iter()
                .filter(|s| s.u.iter().any(|u| u.abs() >= bound - 1e-12))
                .count(),
            skipped_actor_updates: 0,
            tail_weight_change: None,
            residual_history: history,
            total_cost: trajectory.total_cost(),
        };
        (trajectory, None, closed_loop, Vec::new(), report)
    };

    Ok(RunRecord {
        name: config.name.clone(),
        config_hash: config.hash(),
        seed,
        mode: config.mode,
        model: model.clone(),
        trajectory,
        weights,
        poles: PolesReport {
            open_loop,
            closed_loop,
            snapshots,
        },
        report,
        wall_clock: started.elapsed(),
    })
}

/// Overrides shared by the case-study runners.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: u64,
    /// Horizon override in steps.
    pub steps: Option<usize>,
}

/// Nominal actor-critic configuration of one subsystem.
pub fn case1_config(subsystem: Subsystem, options: &RunOptions) -> ExperimentConfig {
    let mut config = ExperimentConfig::preset(subsystem);
    config.name = format!("case1_{}", subsystem.short_name());
    config.seeds = vec![options.seed];
    if let Some(steps) = options.steps {
        config.steps = steps;
    }
    config
}

/// Nominal actor-critic training on both subsystems.
pub fn run_case_study_1(options: &RunOptions) -> Result<[RunRecord; 2]> {
    let lon = run_experiment(&case1_config(Subsystem::Longitudinal, options), options.seed)?;
    let lat = run_experiment(&case1_config(Subsystem::Lateral, options), options.seed)?;
    Ok([lon, lat])
}

/// Controller arrangement for the disturbed runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case2Mode {
    /// DARE assist through `B` plus the learner through the perturbed input path.
    Combined,
    /// The learner alone, applied through `B + ΔB`.
    ModelfreeOnly,
    /// DARE gain alone.
    RiccatiOnly,
}

impl Case2Mode {
    pub const ALL: [Case2Mode; 3] = [Case2Mode::Combined, Case2Mode::ModelfreeOnly, Case2Mode::RiccatiOnly];

    /// Settling deadline in seconds used for the pass fraction.
    pub fn deadline(self, subsystem: Subsystem) -> f64 {
        match (self, subsystem) {
            (Case2Mode::Combined | Case2Mode::RiccatiOnly, Subsystem::Longitudinal) => 6.0,
            (Case2Mode::Combined | Case2Mode::RiccatiOnly, Subsystem::Lateral) => 12.0,
            (Case2Mode::ModelfreeOnly, Subsystem::Longitudinal) => 20.0,
            (Case2Mode::ModelfreeOnly, Subsystem::Lateral) => 30.0,
        }
    }
}

impl std::fmt::Display for Case2Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case2Mode::Combined => "combined",
            Case2Mode::ModelfreeOnly => "modelfree-only",
            Case2Mode::RiccatiOnly => "riccati-only",
        })
    }
}

impl std::str::FromStr for Case2Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combined" => Ok(Case2Mode::Combined),
            "modelfree-only" | "modelfree" => Ok(Case2Mode::ModelfreeOnly),
            "riccati-only" | "riccati" => Ok(Case2Mode::RiccatiOnly),
            other => Err(Error::Config(format!("unknown case-2 mode `{other}`"))),
        }
    }
}

/// Disturbed configuration of one subsystem.
pub fn case2_config(
    subsystem: Subsystem,
    mode: Case2Mode,
    input_form: InputForm,
    steps: Option<usize>,
) -> ExperimentConfig {
    let mut config = ExperimentConfig::preset(subsystem);
    config.name = format!("case2_{mode}_{}", subsystem.short_name());
    config.steps = steps.unwrap_or(match subsystem {
        Subsystem::Longitudinal => 3000,
        Subsystem::Lateral => 4000,
    });
    // The random perturbations already excite the loop.
    config.probe_amplitude = 0.0;
    let input_form = match mode {
        Case2Mode::ModelfreeOnly => InputForm::Additive,
        _ => input_form,
    };
    config.disturbance = Some(DisturbanceConfig {
        input_form,
        ..DisturbanceConfig::default()
    });
    config.mode = match mode {
        Case2Mode::Combined => ControllerMode::Combined,
        Case2Mode::ModelfreeOnly => ControllerMode::ActorCritic,
        Case2Mode::RiccatiOnly => ControllerMode::Dare,
    };
    config
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub settling_time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Case2Summary {
    pub subsystem: Subsystem,
    pub mode: Case2Mode,
    pub deadline: f64,
    pub outcomes: Vec<SeedOutcome>,
    /// Fraction of seeds settled within the deadline.
    pub pass_fraction: f64,
}

pub struct Case2Result {
    pub summaries: Vec<Case2Summary>,
    pub records: Vec<RunRecord>,
}

/// Disturbed runs over `seeds` for both subsystems. Individual seed
/// failures are recorded; the call fails only if every run fails.
pub fn run_case_study_2(
    mode: Case2Mode,
    seeds: &[u64],
    input_form: InputForm,
    steps: Option<usize>,
) -> Result<Case2Result> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    let mut last_error = None;
    for subsystem in Subsystem::ALL {
        let mut config = case2_config(subsystem, mode, input_form, steps);
        config.seeds = seeds.to_vec();
        let deadline = mode.deadline(subsystem);
        let mut outcomes = Vec::new();
        for &seed in seeds {
            match run_experiment(&config, seed) {
                Ok(record) => {
                    outcomes.push(SeedOutcome {
                        seed,
                        settling_time: record.report.settling_time,
                        error: None,
                    });
                    records.push(record);
                }
                Err(e) => {
                    outcomes.push(SeedOutcome {
                        seed,
                        settling_time: None,
                        error: Some(e.to_string()),
                    });
                    last_error = Some(e);
                }
            }
        }
        let passed = outcomes
            .iter()
            .filter(|o| o.settling_time.is_some_and(|t| t <= deadline))
            .count();
        summaries.push(Case2Summary {
            subsystem,
            mode,
            deadline,
            pass_fraction: passed as f64 / outcomes.len() as f64,
            outcomes,
        });
    }
    if records.is_empty() {
        return Err(last_error.unwrap_or_else(|| Error::Config("no runs executed".into())));
    }
    Ok(Case2Result { summaries, records })
}

#[derive(Debug, Clone, Serialize)]
pub struct GainRow {
    pub source: String,
    /// `K` of `u = −K Z`, row-major.
    pub gain: Option<Vec<f64>>,
    pub spectral_radius: Option<f64>,
    /// Max-abs difference to the DARE gain.
    pub diff_to_lqr: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainComparison {
    pub subsystem: Subsystem,
    pub rows: Vec<GainRow>,
    /// Largest pairwise max-abs gain difference among the standard solvers.
    pub standard_spread: f64,
}

fn gain_row(source: &str, model: &PlantModel, lqr: &Matrix, gain: Result<Matrix>) -> GainRow {
    match gain.and_then(|k| Ok((closed_loop_poles(model, Feedback::Gain(&k))?, k))) {
        Ok((poles, k)) => GainRow {
            source: source.into(),
            diff_to_lqr: Some((&k - lqr).amax()),
            gain: Some(k.transpose().iter().copied().collect()),
            spectral_radius: Some(poles.spectral_radius),
            error: None,
        },
        Err(e) => GainRow {
            source: source.into(),
            gain: None,
            spectral_radius: None,
            diff_to_lqr: None,
            error: Some(e.to_string()),
        },
    }
}

/// Gains from every solver on both subsystems, plus the learned and
/// published actor weights.
pub fn compare_gains(options: &RunOptions) -> Result<Vec<GainComparison>> {
    const TOL: f64 = 1e-12;
    const MAX_ITER: usize = 200_000;
    let vi = ViConfig {
        tol: TOL,
        max_iter: MAX_ITER,
        ..ViConfig::default()
    };
    let mut out = Vec::new();
    for subsystem in Subsystem::ALL {
        let preset = subsystem.preset();
        let (model, cost) = (&preset.model, &preset.cost);
        let lqr = dare_solve(model, cost, TOL, MAX_ITER)?.gain;

        let standard = vec![
            ("dare", Ok(lqr.clone())),
            ("hdp", hdp_solve(model, cost, TOL, MAX_ITER).map(|s| s.gain)),
            (
                "vi-exact-standard",
                vi_solve(
                    Evaluator::Exact {
                        model,
                        variant: RiccatiVariant::Standard,
                    },
                    cost,
                    &vi,
                )
                .map(|s| s.gain),
            ),
            (
                "riccati-standard",
                riccati_solve(model, cost, RiccatiVariant::Standard, TOL, MAX_ITER).map(|s| s.gain),
            ),
        ];
        let finite: Vec<&Matrix> = standard.iter().filter_map(|(_, g)| g.as_ref().ok()).collect();
        let mut standard_spread = if finite.len() == standard.len() {
            0.0
        } else {
            f64::INFINITY
        };
        for (i, a) in finite.iter().enumerate() {
            for b in &finite[i + 1..] {
                standard_spread = f64::max(standard_spread, (*a - *b).amax());
            }
        }

        let mut rows: Vec<GainRow> = standard
            .into_iter()
            .map(|(name, gain)| gain_row(name, model, &lqr, gain))
            .collect();
        rows.push(gain_row(
            "vi-exact-literal",
            model,
            &lqr,
            vi_solve(
                Evaluator::Exact {
                    model,
                    variant: RiccatiVariant::Literal,
                },
                cost,
                &vi,
            )
            .map(|s| s.gain),
        ));
        rows.push(gain_row(
            "riccati-literal",
            model,
            &lqr,
            riccati_solve(model, cost, RiccatiVariant::Literal, TOL, MAX_ITER).map(|s| s.gain),
        ));
        let trained = run_experiment(&case1_config(subsystem, options), options.seed)
            .map(|r| Matrix::from_row_slice(1, r.report.gain.len(), &r.report.gain));
        rows.push(gain_row("trained-actor", model, &lqr, trained));
        rows.push(gain_row(
            "published-actor",
            model,
            &lqr,
            Ok(-presets::final_actor(subsystem).transpose()),
        ));
        out.push(GainComparison {
            subsystem,
            rows,
            standard_spread,
        });
    }
    Ok(out)
}
