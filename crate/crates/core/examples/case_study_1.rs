//! Online actor-critic training on both nominal subsystems.
//!
//! Pass a directory as the first argument to write the CSV and JSON outputs.

use flexwing_rl::harness::{run_case_study_1, RunOptions};

fn main() -> flexwing_rl::Result<()> {
    let records = run_case_study_1(&RunOptions::default())?;
    for record in &records {
        let r = &record.report;
        println!("{}", record.name);
        println!("  settling time     {:?} s", r.settling_time);
        println!("  critic converged  step {:?}", r.converged_at);
        println!("  saturated steps   {}", r.saturation_events);
        println!(
            "  closed-loop poles {}",
            record.poles.closed_loop.polar_summary().join(", ")
        );
    }
    if let Some(dir) = std::env::args().nth(1) {
        for record in &records {
            for path in record.write(dir.as_ref())? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
