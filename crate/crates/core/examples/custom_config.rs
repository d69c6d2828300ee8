//! Runs an experiment on a user-defined two-state plant described in TOML.

use flexwing_rl::harness::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
name = "double_integrator"
plant = "custom"
a = [[1.0, 0.01], [0.0, 1.0]]
b = [[0.0], [0.01]]
q = [1.0, 0.1]
r = [0.01]
z0 = [1.0, 0.0]
mode = "modelfree-lsq"
steps = 1500
control_bound = 10.0
"#;

fn main() -> flexwing_rl::Result<()> {
    let config = ExperimentConfig::from_toml_str(CONFIG)?;
    println!("config hash {}", config.hash());
    let record = run_experiment(&config, 0)?;
    println!("gain {:?}", record.report.gain);
    println!(
        "closed-loop poles {}",
        record.poles.closed_loop.polar_summary().join(", ")
    );
    println!("settling time {:?} s", record.report.settling_time);
    Ok(())
}
