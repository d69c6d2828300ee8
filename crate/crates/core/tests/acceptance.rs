//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use flexwing_rl::harness::experiments::{run_case_study_1, run_case_study_2, run_experiment, Case2Mode, RunOptions};
use flexwing_rl::harness::presets::{self, Subsystem};
use flexwing_rl::harness::ExperimentConfig;
use flexwing_rl::hdp::hdp_solve;
use flexwing_rl::plant::{CostWeights, InputForm, PlantModel};
use flexwing_rl::qkernel::{collect_random_transitions, parameter_count, vi_solve, vi_solve_with, Evaluator, ViConfig};
use flexwing_rl::riccati::{dare_solve, riccati_solve, RiccatiVariant};
use flexwing_rl::spectral::{closed_loop_poles, open_loop_poles, Feedback};
use flexwing_rl::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Name, check and runtime budget.
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn expected_open_loop(sub: Subsystem) -> Vec<(f64, f64)> {
    match sub {
        Subsystem::Longitudinal => vec![(0.9801, 0.0219), (0.9801, -0.0219), (1.0009, 0.0116), (1.0009, -0.0116)],
        Subsystem::Lateral => vec![
            (0.7978, 0.0),
            (0.9949, 0.0),
            (0.9973, 0.0088),
            (0.9973, -0.0088),
            (1.0000, 0.0),
        ],
    }
}

fn expected_closed_loop(sub: Subsystem) -> Vec<(f64, f64)> {
    match sub {
        Subsystem::Longitudinal => vec![(0.8771, 0.0), (0.8884, 0.0), (0.9975, 0.0123), (0.9975, -0.0123)],
        Subsystem::Lateral => vec![
            (0.7825, 0.0),
            (0.9727, 0.0),
            (0.9960, 0.0),
            (0.9969, 0.0082),
            (0.9969, -0.0082),
        ],
    }
}

fn open_loop_poles_match() -> Check {
    for sub in Subsystem::ALL {
        let poles = open_loop_poles(&sub.preset().model).map_err(err)?;
        ensure(
            poles.matches_polar(&expected_open_loop(sub), 5e-3),
            format!("{sub}: got {:?}", poles.polar_summary()),
        )?;
    }
    Ok("both subsystems within 5e-3".into())
}

fn closed_loop_poles_match() -> Check {
    for sub in Subsystem::ALL {
        let wa = presets::final_actor(sub);
        let poles = closed_loop_poles(&sub.preset().model, Feedback::Actor(&wa)).map_err(err)?;
        ensure(
            poles.matches_polar(&expected_closed_loop(sub), 1e-2),
            format!("{sub}: got {:?}", poles.polar_summary()),
        )?;
    }
    Ok("both subsystems within 1e-2".into())
}

fn solvers_agree() -> Check {
    let (tol, max_iter) = (1e-12, 200_000);
    let mut worst: f64 = 0.0;
    for sub in Subsystem::ALL {
        let p = sub.preset();
        let dare = dare_solve(&p.model, &p.cost, tol, max_iter).map_err(err)?.gain;
        let gains = [
            riccati_solve(&p.model, &p.cost, RiccatiVariant::Standard, tol, max_iter)
                .map_err(err)?
                .gain,
            hdp_solve(&p.model, &p.cost, tol, max_iter).map_err(err)?.gain,
            vi_solve(
                Evaluator::Exact {
                    model: &p.model,
                    variant: RiccatiVariant::Standard,
                },
                &p.cost,
                &ViConfig::default(),
            )
            .map_err(err)?
            .gain,
        ];
        for g in &gains {
            worst = worst.max((g - &dare).amax());
        }
    }
    ensure(worst < 1e-6, format!("max gain difference {worst:e}"))?;

    let scalar = PlantModel::new(Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0)).map_err(err)?;
    let cost = CostWeights::diagonal(&[1.0], &[1.0]);
    let k = riccati_solve(&scalar, &cost, RiccatiVariant::Standard, tol, max_iter)
        .map_err(err)?
        .gain[(0, 0)];
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    ensure(
        (k - golden).abs() < 1e-6 && (k - 0.618034).abs() < 1e-6,
        format!("scalar gain {k}"),
    )?;
    Ok(format!("max difference {worst:.1e}, scalar gain {k:.6}"))
}

fn random_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

fn value_iteration_monotone() -> Check {
    let mut iterations = 0;
    for sub in Subsystem::ALL {
        let p = sub.preset();
        let dim = p.model.n() + p.model.m();
        let chis = random_vectors(dim, 100, 7);
        let initial = Matrix::identity(dim, dim) * ViConfig::default().initial_scale;
        let mut previous: Vec<f64> = chis.iter().map(|c| c.dot(&(&initial * c))).collect();
        let mut violation: Option<String> = None;
        let solution = vi_solve_with(
            Evaluator::Exact {
                model: &p.model,
                variant: RiccatiVariant::Standard,
            },
            &p.cost,
            &ViConfig::default(),
            |it| {
                for (chi, prev) in chis.iter().zip(previous.iter_mut()) {
                    let value = chi.dot(&(&it.kernel.m * chi));
                    if value < *prev - 1e-10 && violation.is_none() {
                        violation = Some(format!(
                            "{sub}: iteration {} drops by {:e}",
                            it.kernel.iteration,
                            *prev - value
                        ));
                    }
                    *prev = value;
                }
            },
        )
        .map_err(err)?;
        if let Some(v) = violation {
            return Err(v);
        }
        iterations += solution.iterations;
    }
    Ok(format!("{iterations} iterations checked"))
}

fn value_iteration_stabilizes() -> Check {
    let mut report = Vec::new();
    for sub in Subsystem::ALL {
        let p = sub.preset();
        let mut first: Option<usize> = None;
        let mut failure: Option<String> = None;
        let mut worst: f64 = 0.0;
        let mut index = 0;
        vi_solve_with(
            Evaluator::Exact {
                model: &p.model,
                variant: RiccatiVariant::Standard,
            },
            &p.cost,
            &ViConfig::default(),
            |it| {
                index += 1;
                if first.is_none() && it.residual < 1e-3 {
                    first = Some(index);
                }
                if first.is_some() && failure.is_none() {
                    match closed_loop_poles(&p.model, Feedback::Gain(it.gain)) {
                        Ok(poles) if poles.stable => worst = worst.max(poles.spectral_radius),
                        Ok(poles) => {
                            failure = Some(format!("{sub}: iteration {index} has radius {}", poles.spectral_radius))
                        }
                        Err(e) => failure = Some(format!("{sub}: {e}")),
                    }
                }
            },
        )
        .map_err(err)?;
        if let Some(f) = failure {
            return Err(f);
        }
        let first = first.ok_or_else(|| format!("{sub}: residual never fell below 1e-3"))?;
        report.push(format!(
            "{} from iteration {first}, max radius {worst:.4}",
            sub.short_name()
        ));
    }
    Ok(report.join("; "))
}

fn case_study_1() -> Check {
    let records = run_case_study_1(&RunOptions::default()).map_err(err)?;
    let mut report = Vec::new();
    for (record, limit) in records.iter().zip([30.0, 40.0]) {
        let name = &record.name;
        let r = &record.report;
        ensure(
            r.spectral_radius < 1.0,
            format!("{name}: spectral radius {}", r.spectral_radius),
        )?;
        let settle = r.settling_time.ok_or_else(|| format!("{name}: never settled"))?;
        ensure(settle <= limit, format!("{name}: settled at {settle} s"))?;

        let bound = presets::CONTROL_BOUND;
        let transient = record.trajectory.len() / 10;
        let saturated = record.trajectory.samples[..transient]
            .iter()
            .any(|s| s.u.iter().any(|u| u.abs() >= bound - 1e-12));
        ensure(
            saturated,
            format!("{name}: no saturation in the first {transient} steps"),
        )?;

        let weights = record
            .weights
            .as_ref()
            .ok_or_else(|| format!("{name}: no weight history"))?;
        let tail = &weights[weights.len() - weights.len() / 20 - 1..];
        let mut change: f64 = 0.0;
        for w in tail {
            change = change
                .max((&w.wa - &tail[0].wa).amax())
                .max((&w.wc - &tail[0].wc).amax());
        }
        ensure(change < 1e-6, format!("{name}: weights still moving by {change:e}"))?;
        report.push(format!(
            "{name} settles at {settle:.2} s, radius {:.4}",
            r.spectral_radius
        ));
    }
    Ok(report.join("; "))
}

fn case_study_2() -> Check {
    let seeds: Vec<u64> = (0..20).collect();
    let mut report = Vec::new();
    for mode in [Case2Mode::Combined, Case2Mode::ModelfreeOnly] {
        let result = run_case_study_2(mode, &seeds, InputForm::Literal, None).map_err(err)?;
        for s in &result.summaries {
            ensure(
                s.pass_fraction >= 0.9,
                format!("{mode} {}: pass fraction {}", s.subsystem, s.pass_fraction),
            )?;
            report.push(format!(
                "{mode} {} {:.0}%",
                s.subsystem.short_name(),
                100.0 * s.pass_fraction
            ));
        }
    }
    Ok(report.join(", "))
}

fn least_squares_matches_exact() -> Check {
    let mut worst: f64 = 0.0;
    for sub in Subsystem::ALL {
        let p = sub.preset();
        let config = ViConfig::default();
        let exact = vi_solve(
            Evaluator::Exact {
                model: &p.model,
                variant: RiccatiVariant::Standard,
            },
            &p.cost,
            &config,
        )
        .map_err(err)?
        .gain;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let count = 4 * parameter_count(p.model.n() + p.model.m());
        let samples = collect_random_transitions(&mut p.model.clone(), &p.cost, count, 1.0, &mut rng).map_err(err)?;
        let lsq_config = ViConfig { tol: 1e-10, ..config };
        let lsq = vi_solve(Evaluator::LeastSquares { samples }, &p.cost, &lsq_config)
            .map_err(err)?
            .gain;
        worst = worst.max((&lsq - &exact).amax());
    }
    ensure(worst < 1e-4, format!("max gain difference {worst:e}"))?;
    Ok(format!("max gain difference {worst:.1e}"))
}

fn read_dir_sorted(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.push((name, std::fs::read(&path).map_err(err)?));
    }
    files.sort();
    Ok(files)
}

fn deterministic_outputs() -> Check {
    let mut configs = vec![
        ExperimentConfig::preset(Subsystem::Longitudinal),
        flexwing_rl::harness::experiments::case2_config(
            Subsystem::Lateral,
            Case2Mode::Combined,
            InputForm::Literal,
            None,
        ),
        flexwing_rl::harness::experiments::case2_config(
            Subsystem::Longitudinal,
            Case2Mode::ModelfreeOnly,
            InputForm::Literal,
            None,
        ),
    ];
    let mut lsq = ExperimentConfig::preset(Subsystem::Lateral);
    lsq.name = "lsq".into();
    lsq.mode = flexwing_rl::harness::ControllerMode::ModelfreeLsq;
    lsq.steps = 500;
    configs.push(lsq);

    let dirs = [tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?];
    for dir in &dirs {
        for config in &configs {
            run_experiment(config, 42)
                .map_err(err)?
                .write(dir.path())
                .map_err(err)?;
        }
    }
    let first = read_dir_sorted(dirs[0].path())?;
    let second = read_dir_sorted(dirs[1].path())?;
    ensure(!first.is_empty(), "no files written")?;
    ensure(first.len() == second.len(), "different file sets")?;
    for (a, b) in first.iter().zip(&second) {
        ensure(a == b, format!("{} differs between runs", a.0))?;
    }
    Ok(format!("{} files identical", first.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("open-loop poles", open_loop_poles_match, Duration::from_secs(1)),
        ("closed-loop poles", closed_loop_poles_match, Duration::from_secs(1)),
        ("riccati duality", solvers_agree, Duration::from_secs(1)),
        (
            "value-iteration monotonicity",
            value_iteration_monotone,
            Duration::from_secs(5),
        ),
        (
            "value-iteration stabilization",
            value_iteration_stabilizes,
            Duration::from_secs(5),
        ),
        ("nominal actor-critic learning", case_study_1, Duration::from_secs(120)),
        ("disturbed robustness", case_study_2, Duration::from_secs(300)),
        (
            "least-squares model-free path",
            least_squares_matches_exact,
            Duration::from_secs(30),
        ),
        ("determinism", deterministic_outputs, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} ({elapsed:.2?})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
