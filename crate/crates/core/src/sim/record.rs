//! Episode records: one JSON header line followed by one JSON line per
//! logged physics step.
//!
//! Units: times in s, positions in m, velocities in m/s, angles in rad,
//! rates in the units of the corresponding shape component per second.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Mode;
use crate::error::{Error, Result};
use crate::formation::SHAPE_DIM;
use crate::world::{AgentState, EpisodeStatus};

pub const RECORD_SCHEMA: &str = "arcpursuit-episode";
pub const RECORD_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    /// s
    pub t: f64,
    pub status: EpisodeStatus,
    pub attacker: AgentState,
    pub defenders: Vec<AgentState>,
    /// Each defender's own shape estimate `[p_cx, p_cy, phi, zeta, beta]`.
    pub thetas: Vec<[f64; SHAPE_DIM]>,
    /// Negotiated rates applied during this step; empty on the final row.
    pub commands: Vec<[f64; SHAPE_DIM]>,
    /// Largest pairwise distance between shape estimates.
    pub consensus_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema: String,
    pub version: u32,
    pub n_defenders: usize,
    pub mode: Mode,
    pub seed: u64,
    pub status: EpisodeStatus,
    /// s
    pub duration: f64,
    /// Set when the episode stopped on a runtime error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub header: RecordHeader,
    pub rows: Vec<StepRow>,
}

impl EpisodeRecord {
    pub fn status(&self) -> EpisodeStatus {
        self.header.status
    }

    /// `episode_<mode>_n<n>_seed<seed>.jsonl`
    pub fn file_name(&self) -> String {
        format!(
            "episode_{}_n{}_seed{}.jsonl",
            self.header.mode, self.header.n_defenders, self.header.seed
        )
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        serde_json::to_writer(&mut *w, &self.header)?;
        w.write_all(b"\n")?;
        for row in &self.rows {
            serde_json::to_writer(&mut *w, row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        let mut w = BufWriter::new(File::create(&path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or(Error::Empty("episode record: no header line"))??;
        let header: RecordHeader = serde_json::from_str(&first)?;
        if header.schema != RECORD_SCHEMA {
            return Err(Error::Schema(format!("not an episode record (schema {:?})", header.schema)));
        }
        if header.version != RECORD_VERSION {
            return Err(Error::Schema(format!(
                "record version {} not supported (expected {RECORD_VERSION})",
                header.version
            )));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: StepRow = serde_json::from_str(&line)
                .map_err(|e| Error::Schema(format!("record line {}: {e}", i + 2)))?;
            if row.defenders.len() != header.n_defenders || row.thetas.len() != header.n_defenders {
                return Err(Error::Schema(format!("record line {}: wrong defender count", i + 2)));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    fn record() -> EpisodeRecord {
        let row = |t: f64, status| StepRow {
            t,
            status,
            attacker: AgentState::new(Vec2::new(10.0, 0.1), Vec2::new(-1.0, 0.0)),
            defenders: vec![AgentState::at_rest(Vec2::new(3.0, 0.0)); 2],
            thetas: vec![[0.1, 0.2, 0.3, 1.5, 1.0 / 3.0]; 2],
            commands: vec![[0.0; 5]; 2],
            consensus_error: 0.0,
            model_loss: Some(0.25),
            actor_loss: None,
        };
        EpisodeRecord {
            header: RecordHeader {
                schema: RECORD_SCHEMA.into(),
                version: RECORD_VERSION,
                n_defenders: 2,
                mode: Mode::Actor,
                seed: 7,
                status: EpisodeStatus::Captured(0.1),
                duration: 0.1,
                error: None,
            },
            rows: vec![row(0.0, EpisodeStatus::Running), row(0.05, EpisodeStatus::Captured(0.1))],
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let r = record();
        let mut buf = Vec::new();
        r.write_jsonl(&mut buf).unwrap();
        let back = EpisodeRecord::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, r);
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut r = record();
        r.header.version = 2;
        let mut buf = Vec::new();
        r.write_jsonl(&mut buf).unwrap();
        assert!(matches!(EpisodeRecord::read_jsonl(&buf[..]), Err(Error::Schema(_))));
    }
}
