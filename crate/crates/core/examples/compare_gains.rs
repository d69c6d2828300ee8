//! Gains from every solver, the trained actor and the published actor.

use flexwing_rl::harness::{compare_gains, RunOptions};

fn main() -> flexwing_rl::Result<()> {
    for table in compare_gains(&RunOptions::default())? {
        println!(
            "{} (spread among standard solvers {:.1e})",
            table.subsystem, table.standard_spread
        );
        for row in &table.rows {
            match (&row.gain, row.spectral_radius) {
                (Some(gain), Some(radius)) => {
                    let gain: Vec<String> = gain.iter().map(|g| format!("{g:>9.5}")).collect();
                    println!("  {:<24} [{}] radius {radius:.4}", row.source, gain.join(" "));
                }
                _ => println!("  {:<24} failed: {}", row.source, row.error.as_deref().unwrap_or("")),
            }
        }
    }
    Ok(())
}
