//! Disturbed runs over 20 seeds for each controller arrangement.

use flexwing_rl::harness::{run_case_study_2, Case2Mode};
use flexwing_rl::plant::InputForm;

fn main() -> flexwing_rl::Result<()> {
    let seeds: Vec<u64> = (0..20).collect();
    for mode in Case2Mode::ALL {
        let result = run_case_study_2(mode, &seeds, InputForm::Literal, None)?;
        for s in &result.summaries {
            let times: Vec<f64> = s.outcomes.iter().filter_map(|o| o.settling_time).collect();
            let worst = times.iter().copied().fold(0.0, f64::max);
            println!(
                "{mode:<15} {:<12} settled within {:>4} s: {:>5.1}%  (slowest {worst:.2} s)",
                s.subsystem.to_string(),
                s.deadline,
                100.0 * s.pass_fraction
            );
        }
    }
    Ok(())
}
