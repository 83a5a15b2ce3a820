//! Episode record to CSV tables.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::formation::SHAPE_DIM;
use crate::sim::EpisodeRecord;

const SHAPE_NAMES: [&str; SHAPE_DIM] = ["pcx", "pcy", "phi", "zeta", "beta"];

fn per_defender(n: usize, names: &[&str]) -> Vec<String> {
    (0..n).flat_map(|i| names.iter().map(move |c| format!("d{i}_{c}"))).collect()
}

/// Write `trajectories.csv`, `theta.csv`, `commands.csv` and
/// `consensus.csv` into `dir`. Commands are blank on the final row.
pub fn export(rec: &EpisodeRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    let n = rec.header.n_defenders;
    let paths: Vec<PathBuf> = ["trajectories.csv", "theta.csv", "commands.csv", "consensus.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    let mut traj = csv::Writer::from_path(&paths[0])?;
    let mut theta = csv::Writer::from_path(&paths[1])?;
    let mut cmd = csv::Writer::from_path(&paths[2])?;
    let mut cons = csv::Writer::from_path(&paths[3])?;

    let state = ["px", "py", "vx", "vy"];
    let mut head: Vec<String> = vec!["t".into(), "status".into()];
    head.extend(state.iter().map(|c| format!("attacker_{c}")));
    head.extend(per_defender(n, &state));
    traj.write_record(&head)?;
    let shape_head: Vec<String> = std::iter::once("t".to_string()).chain(per_defender(n, &SHAPE_NAMES)).collect();
    theta.write_record(&shape_head)?;
    let rate_names: Vec<String> = SHAPE_NAMES.iter().map(|c| format!("d{c}")).collect();
    let rate_refs: Vec<&str> = rate_names.iter().map(String::as_str).collect();
    let rate_head: Vec<String> = std::iter::once("t".to_string()).chain(per_defender(n, &rate_refs)).collect();
    cmd.write_record(&rate_head)?;
    cons.write_record(["t", "consensus_error", "model_loss", "actor_loss"])?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &rec.rows {
        let t = r.t.to_string();
        let mut row = vec![t.clone(), r.status.label().to_string()];
        for s in std::iter::once(&r.attacker).chain(&r.defenders) {
            row.extend([s.p.x, s.p.y, s.v.x, s.v.y].map(|x| x.to_string()));
        }
        traj.write_record(&row)?;

        let mut row = vec![t.clone()];
        row.extend(r.thetas.iter().flatten().map(f64::to_string));
        theta.write_record(&row)?;

        let mut row = vec![t.clone()];
        if r.commands.len() == n {
            row.extend(r.commands.iter().flatten().map(f64::to_string));
        } else {
            row.extend(std::iter::repeat_n(String::new(), n * SHAPE_DIM));
        }
        cmd.write_record(&row)?;

        cons.write_record([t, r.consensus_error.to_string(), opt(r.model_loss), opt(r.actor_loss)])?;
    }
    for w in [&mut traj, &mut theta, &mut cmd, &mut cons] {
        w.flush()?;
    }
    Ok(paths)
}
