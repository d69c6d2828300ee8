//! CSV and JSON writers for run records.
//!
//! Trajectory CSV columns: `k, t, Z_1..Z_n, u_1..u_m, utility`.
//! Weight CSV columns: `k, Wa_1..Wa_{n·m}, Wc_i_j` for `i <= j`.
//! Each CSV starts with one `#` comment line describing the layout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::actor_critic::WeightSnapshot;
use crate::error::Result;
use crate::plant::{PlantModel, Trajectory};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Formats a value with `-0` printed as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("Z_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.push("utility".into());
    header
}

/// Writes the trajectory including a final row holding the last state
/// (control and utility left empty).
pub fn write_trajectory_csv<W: Write>(out: W, model: &PlantModel, trajectory: &Trajectory) -> Result<()> {
    let (n, m) = (model.n(), model.m());
    let mut out = out;
    writeln!(
        out,
        "# states: {}; controls: {}; dt = {}",
        model.state_labels().join(", "),
        model.control_labels().join(", "),
        trajectory.dt
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(trajectory_header(n, m))?;
    for s in &trajectory.samples {
        let mut row = vec![s.k.to_string(), (s.k as f64 * trajectory.dt).to_string()];
        row.extend(s.z.iter().copied().map(num));
        row.extend(s.u.iter().copied().map(num));
        row.push(num(s.utility));
        csv.write_record(&row)?;
    }
    let k = trajectory.samples.len();
    let mut row = vec![k.to_string(), (k as f64 * trajectory.dt).to_string()];
    row.extend(trajectory.final_state.iter().copied().map(num));
    row.extend(std::iter::repeat_n(String::new(), m + 1));
    csv.write_record(&row)?;
    csv.flush()?;
    Ok(())
}

pub fn weights_header(n: usize, m: usize) -> Vec<String> {
    let d = n + m;
    let mut header = vec!["k".to_string()];
    header.extend((1..=n * m).map(|i| format!("Wa_{i}")));
    for i in 1..=d {
        for j in i..=d {
            header.push(format!("Wc_{i}_{j}"));
        }
    }
    header
}

pub fn write_weights_csv<W: Write>(out: W, snapshots: &[WeightSnapshot]) -> Result<()> {
    let Some(first) = snapshots.first() else {
        return Ok(());
    };
    let (n, m) = first.wa.shape();
    let mut out = out;
    writeln!(
        out,
        "# Wa flattened column-major ({n}x{m}); Wc upper triangle row-major (i <= j)"
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(weights_header(n, m))?;
    for s in snapshots {
        let mut row = vec![s.k.to_string()];
        row.extend(s.wa.iter().copied().map(num));
        for i in 0..n + m {
            for j in i..n + m {
                row.push(num(s.wc[(i, j)]));
            }
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_trajectory_file(path: &Path, model: &PlantModel, trajectory: &Trajectory) -> Result<()> {
    write_trajectory_csv(create(path)?, model, trajectory)
}

pub fn write_weights_file(path: &Path, snapshots: &[WeightSnapshot]) -> Result<()> {
    write_weights_csv(create(path)?, snapshots)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
