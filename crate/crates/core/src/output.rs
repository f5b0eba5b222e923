//! On-disk run artifacts: versioned CSV series, `summary.json`, and
//! checkpoint/resume that reproduces byte-identical CSVs.
//!
//! A run directory holds:
//!
//! * `critical_events.csv`, one row per critical time;
//! * `snapshots.csv`, one row per snapshot;
//! * `summary.json`, written when the run stops;
//! * `checkpoint.bin` and `checkpoint.json`, the engine state and the CSV byte
//!   lengths at the moment it was taken.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{CriticalEvent, Engine, EngineConfig, RunObserver, RunSummary, SnapshotKind, StatSnapshot};
use crate::error::{Error, Result};

pub const CRITICAL_FILE: &str = "critical_events.csv";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CHECKPOINT_META_FILE: &str = "checkpoint.json";

pub const CRITICAL_HEADER: &str = "# critical_events v1\nt,s_lrp,s_norm1,s_norm2,s_ep1,s_ep2,s_com,ratio,max_w\n";
pub const SNAPSHOT_HEADER: &str = "# snapshots v1\nt,kind,ratio_lrp,ratio_norm,ratio_ep1,ratio_ep2,max_shape_norm,ep2_mean_hw,ep2_count,sigma_hat,one_plus_sigma,s_com,area_residual\n";

/// Shortest decimal that round-trips, in exponent form outside `[1e-4, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn critical_row(e: &CriticalEvent) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        e.t,
        fmt_f64(e.s_lrp),
        fmt_f64(e.s_norm1),
        fmt_f64(e.s_norm2),
        fmt_f64(e.s_ep1),
        fmt_f64(e.s_ep2),
        fmt_f64(e.s_com),
        fmt_f64(e.ratio),
        fmt_f64(e.max_w)
    )
}

pub fn snapshot_row(s: &StatSnapshot) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        s.t,
        match s.kind {
            SnapshotKind::Stride => "stride",
            SnapshotKind::Critical => "critical",
        },
        fmt_f64(s.ratio_lrp),
        fmt_f64(s.ratio_norm),
        fmt_f64(s.ratio_ep1),
        fmt_f64(s.ratio_ep2),
        fmt_opt(s.max_shape_norm),
        fmt_opt(s.ep2_mean_hw),
        s.ep2_count,
        fmt_opt(s.sigma_hat()),
        fmt_opt(s.one_plus_sigma),
        fmt_f64(s.s_com),
        fmt_f64(s.area_residual)
    )
}

/// Parse a `snapshots.csv` produced by [`RunWriter`].
pub fn parse_snapshots(text: &str) -> Result<Vec<StatSnapshot>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("t,") || line.is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("snapshots.csv line {}: malformed row", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(bad());
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
        let opt = |k: usize| if f[k].is_empty() { Ok(None) } else { num(k).map(Some) };
        out.push(StatSnapshot {
            t: f[0].parse().map_err(|_| bad())?,
            kind: match f[1] {
                "stride" => SnapshotKind::Stride,
                "critical" => SnapshotKind::Critical,
                _ => return Err(bad()),
            },
            ratio_lrp: num(2)?,
            ratio_norm: num(3)?,
            ratio_ep1: num(4)?,
            ratio_ep2: num(5)?,
            max_shape_norm: opt(6)?,
            ep2_mean_hw: opt(7)?,
            ep2_count: f[8].parse().map_err(|_| bad())?,
            one_plus_sigma: opt(10)?,
            s_com: num(11)?,
            area_residual: num(12)?,
        });
    }
    Ok(out)
}

/// Parse a `critical_events.csv` produced by [`RunWriter`]. The stripe
/// endpoint height sum is not stored and reads back as 0.
pub fn parse_critical_events(text: &str) -> Result<Vec<CriticalEvent>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("t,") || line.is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("critical_events.csv line {}: malformed row", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad());
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
        out.push(CriticalEvent {
            t: f[0].parse().map_err(|_| bad())?,
            s_lrp: num(1)?,
            s_norm1: num(2)?,
            s_norm2: num(3)?,
            s_ep1: num(4)?,
            s_ep2: num(5)?,
            s_com: num(6)?,
            ratio: num(7)?,
            max_w: num(8)?,
            stripe_ep_height_sum: 0.0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: u32,
    pub t: u64,
    pub critical_bytes: u64,
    pub snapshot_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub format: String,
    pub config: EngineConfig,
    pub summary: RunSummary,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Streams a run into a directory.
pub struct RunWriter {
    dir: PathBuf,
    critical: BufWriter<File>,
    snapshots: BufWriter<File>,
    critical_bytes: u64,
    snapshot_bytes: u64,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<RunWriter> {
        std::fs::create_dir_all(dir)?;
        let mut w = RunWriter {
            dir: dir.to_path_buf(),
            critical: BufWriter::new(File::create(dir.join(CRITICAL_FILE))?),
            snapshots: BufWriter::new(File::create(dir.join(SNAPSHOT_FILE))?),
            critical_bytes: 0,
            snapshot_bytes: 0,
        };
        w.critical.write_all(CRITICAL_HEADER.as_bytes())?;
        w.critical_bytes = CRITICAL_HEADER.len() as u64;
        w.snapshots.write_all(SNAPSHOT_HEADER.as_bytes())?;
        w.snapshot_bytes = SNAPSHOT_HEADER.len() as u64;
        Ok(w)
    }

    /// Reopen the CSVs truncated to the lengths recorded with the checkpoint.
    pub fn reopen(dir: &Path, meta: &CheckpointMeta) -> Result<RunWriter> {
        let open = |name: &str, len: u64| -> Result<BufWriter<File>> {
            let f = OpenOptions::new().write(true).open(dir.join(name))?;
            if f.metadata()?.len() < len {
                return Err(Error::Checkpoint(format!("{name} is shorter than its checkpoint record")));
            }
            f.set_len(len)?;
            let mut f = f;
            std::io::Seek::seek(&mut f, std::io::SeekFrom::End(0))?;
            Ok(BufWriter::new(f))
        };
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            critical: open(CRITICAL_FILE, meta.critical_bytes)?,
            snapshots: open(SNAPSHOT_FILE, meta.snapshot_bytes)?,
            critical_bytes: meta.critical_bytes,
            snapshot_bytes: meta.snapshot_bytes,
        })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.critical.flush()?;
        self.snapshots.flush()?;
        Ok(())
    }

    pub fn finish(mut self, config: &EngineConfig, summary: &RunSummary) -> Result<()> {
        self.flush()?;
        let file = SummaryFile { format: "summary v1".into(), config: *config, summary: summary.clone() };
        let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(&self.dir.join(SUMMARY_FILE), json.as_bytes())
    }

    fn checkpoint(&mut self, engine: &Engine) -> Result<()> {
        self.flush()?;
        engine.save_checkpoint(&self.dir.join(CHECKPOINT_FILE))?;
        let meta = CheckpointMeta {
            format: crate::engine::CHECKPOINT_VERSION,
            t: engine.t(),
            critical_bytes: self.critical_bytes,
            snapshot_bytes: self.snapshot_bytes,
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(&self.dir.join(CHECKPOINT_META_FILE), json.as_bytes())
    }
}

impl RunObserver for RunWriter {
    fn on_critical(&mut self, ev: &CriticalEvent) -> Result<()> {
        let row = critical_row(ev);
        self.critical.write_all(row.as_bytes())?;
        self.critical_bytes += row.len() as u64;
        Ok(())
    }

    fn on_snapshot(&mut self, snap: &StatSnapshot) -> Result<()> {
        let row = snapshot_row(snap);
        self.snapshots.write_all(row.as_bytes())?;
        self.snapshot_bytes += row.len() as u64;
        Ok(())
    }

    fn on_checkpoint(&mut self, engine: &Engine) -> Result<()> {
        self.checkpoint(engine)
    }
}

fn drive_to_dir(mut engine: Engine, mut w: RunWriter, stop_at: Option<u64>) -> Result<RunSummary> {
    let summary = engine.drive(stop_at, &mut w)?;
    if summary.status == crate::engine::RunStatus::BudgetExhausted {
        w.checkpoint(&engine)?;
    }
    w.finish(engine.config(), &summary)?;
    Ok(summary)
}

/// Run `cfg` into `dir`. With `stop_at`, stop at that time and leave a checkpoint.
pub fn run_to_dir(cfg: EngineConfig, dir: &Path, stop_at: Option<u64>) -> Result<RunSummary> {
    let engine = Engine::new(cfg)?;
    let w = RunWriter::create(dir)?;
    drive_to_dir(engine, w, stop_at)
}

/// Continue the run in `dir` from its last checkpoint.
pub fn resume_dir(dir: &Path, stop_at: Option<u64>) -> Result<RunSummary> {
    let meta_text = std::fs::read_to_string(dir.join(CHECKPOINT_META_FILE))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::Checkpoint(format!("checkpoint.json: {e}")))?;
    let engine = Engine::load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
    if engine.t() != meta.t {
        return Err(Error::Checkpoint(format!(
            "checkpoint.bin is at t={} but checkpoint.json records t={}",
            engine.t(),
            meta.t
        )));
    }
    let w = RunWriter::reopen(dir, &meta)?;
    drive_to_dir(engine, w, stop_at)
}
