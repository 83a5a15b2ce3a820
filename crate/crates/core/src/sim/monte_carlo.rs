//! Independent evaluation episodes with per-index seeds.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::EpisodeConfig;
use super::episode::{run_episode, Brain};
use super::record::{EpisodeRecord, RecordHeader};
use crate::error::{Error, Result};
use crate::learning::{ActorWeights, ModelWeights};
use crate::world::EpisodeStatus;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub episodes: usize,
    pub captured: usize,
    pub breached: usize,
    pub timeout: usize,
    /// Episodes stopped by a runtime error.
    pub failed: usize,
    pub success_rate: f64,
    pub breach_rate: f64,
    pub timeout_rate: f64,
    /// Mean capture time over captured episodes, s. NaN when none.
    pub mean_capture_time: f64,
    /// Mean duration over all episodes, s.
    pub mean_duration: f64,
}

impl McSummary {
    pub fn from_headers(headers: &[RecordHeader]) -> Self {
        let mut s = McSummary {
            episodes: headers.len(),
            ..Default::default()
        };
        let mut capture_time = 0.0;
        let mut duration = 0.0;
        for h in headers {
            duration += h.duration;
            match h.status {
                EpisodeStatus::Captured(t) => {
                    s.captured += 1;
                    capture_time += t;
                }
                EpisodeStatus::Breached(_) => s.breached += 1,
                EpisodeStatus::Timeout => s.timeout += 1,
                EpisodeStatus::Running => s.failed += 1,
            }
        }
        let n = s.episodes.max(1) as f64;
        s.success_rate = s.captured as f64 / n;
        s.breach_rate = s.breached as f64 / n;
        s.timeout_rate = s.timeout as f64 / n;
        s.mean_capture_time = if s.captured > 0 {
            capture_time / s.captured as f64
        } else {
            f64::NAN
        };
        s.mean_duration = duration / n;
        s
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "episodes",
        "captured",
        "breached",
        "timeout",
        "failed",
        "success_rate",
        "breach_rate",
        "timeout_rate",
        "mean_capture_time_s",
        "mean_duration_s",
    ];

    pub fn csv_row(&self) -> [String; 10] {
        [
            self.episodes.to_string(),
            self.captured.to_string(),
            self.breached.to_string(),
            self.timeout.to_string(),
            self.failed.to_string(),
            self.success_rate.to_string(),
            self.breach_rate.to_string(),
            self.timeout_rate.to_string(),
            self.mean_capture_time.to_string(),
            self.mean_duration.to_string(),
        ]
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        out.write_record(self.csv_row())?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    pub summary: McSummary,
    /// Per-episode headers in index order.
    pub headers: Vec<RecordHeader>,
}

/// Run `episodes` independent episodes on `workers` threads. Episode `i`
/// uses `derive_seed(cfg.seed, i)`; results are gathered in index order.
/// Per-step rows are kept only when `cfg.record_rows` is set.
pub fn run_batch(
    cfg: &EpisodeConfig,
    model: &ModelWeights,
    actor: Option<&ActorWeights>,
    episodes: usize,
    workers: usize,
) -> Result<Vec<EpisodeRecord>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    if cfg.train {
        return Err(Error::Config("batch runs use fixed weights; set train = false".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..episodes)
            .into_par_iter()
            .map(|i| {
                let mut ep = cfg.clone();
                ep.seed = derive_seed(cfg.seed, i as u64);
                run_episode(&ep, Brain::Fixed { model, actor })
            })
            .collect()
    })
}

/// Summary statistics over `episodes` runs of [`run_batch`], without rows.
pub fn monte_carlo(
    cfg: &EpisodeConfig,
    model: &ModelWeights,
    actor: Option<&ActorWeights>,
    episodes: usize,
    workers: usize,
) -> Result<McResult> {
    let mut base = cfg.clone();
    base.record_rows = false;
    let headers: Vec<RecordHeader> = run_batch(&base, model, actor, episodes, workers)?
        .into_iter()
        .map(|r| r.header)
        .collect();
    Ok(McResult {
        summary: McSummary::from_headers(&headers),
        headers,
    })
}
