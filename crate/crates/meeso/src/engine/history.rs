//! Append-only evaluation history and checkpoint files. Both are JSON-lines;
//! the checkpoint carries a JSON header line (run config plus cursor) ahead
//! of the history lines so an interrupted run can be reconstructed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::logging;
use crate::pareto::ParetoArchive;
use crate::types::EvaluationRecord;

/// In-memory view of the append-only history database.
#[derive(Debug, Clone, Default)]
pub struct HistoryDB {
    records: Vec<EvaluationRecord>,
}

impl HistoryDB {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<EvaluationRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: EvaluationRecord) {
        self.records.push(record);
    }

    pub fn into_records(self) -> Vec<EvaluationRecord> {
        self.records
    }

    /// Strict JSON-lines load; any unparseable line is an error naming its
    /// 1-based line number.
    pub fn load_jsonl(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let content = fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (index, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: EvaluationRecord =
                serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                    line: index + 1,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(Self { records })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        for record in &self.records {
            serde_json::to_writer(&mut writer, record)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// First line of a checkpoint file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: RunConfig,
    pub cursor: u64,
}

/// Line-buffered writers for the run's `history.jsonl` and
/// `checkpoint.jsonl`; every committed record is flushed to both.
#[derive(Debug)]
pub struct RunSink {
    history: BufWriter<File>,
    checkpoint: BufWriter<File>,
    pub history_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

impl RunSink {
    /// Create (truncating) both files under `out_dir` and write the
    /// checkpoint header.
    pub fn create(out_dir: &Path, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        let history_path = out_dir.join("history.jsonl");
        let checkpoint_path = out_dir.join("checkpoint.jsonl");
        let history = BufWriter::new(File::create(&history_path)?);
        let mut checkpoint = BufWriter::new(File::create(&checkpoint_path)?);
        let header = CheckpointHeader {
            config: config.clone(),
            cursor: 0,
        };
        serde_json::to_writer(&mut checkpoint, &header)?;
        checkpoint.write_all(b"\n")?;
        checkpoint.flush()?;
        Ok(Self {
            history,
            checkpoint,
            history_path,
            checkpoint_path,
        })
    }

    pub fn append(&mut self, record: &EvaluationRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        self.history.write_all(line.as_bytes())?;
        self.history.write_all(b"\n")?;
        self.history.flush()?;
        self.checkpoint.write_all(line.as_bytes())?;
        self.checkpoint.write_all(b"\n")?;
        self.checkpoint.flush()?;
        Ok(())
    }
}

/// Engine state reconstructed from a checkpoint file.
#[derive(Debug)]
pub struct ResumedState {
    pub config: RunConfig,
    pub history: HistoryDB,
    pub archive: ParetoArchive,
    pub cursor: usize,
}

/// Parse a checkpoint: header line, then one record per line. A corrupt or
/// partial final record is dropped with a warning (the last complete record
/// wins); corruption anywhere else is an error.
pub fn read_checkpoint(path: &Path) -> Result<ResumedState> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| Error::MalformedLine {
        line: 1,
        message: "empty checkpoint".into(),
    })?;
    let header: CheckpointHeader =
        serde_json::from_str(header_line).map_err(|e| Error::MalformedLine {
            line: 1,
            message: format!("bad checkpoint header: {e}"),
        })?;

    let remaining: Vec<(usize, &str)> = lines.filter(|(_, line)| !line.trim().is_empty()).collect();
    let mut records = Vec::with_capacity(remaining.len());
    for (position, (index, line)) in remaining.iter().enumerate() {
        match serde_json::from_str::<EvaluationRecord>(line) {
            Ok(record) => records.push(record),
            Err(e) if position + 1 == remaining.len() => {
                logging::info(&format!(
                    "checkpoint line {}: dropping partial final record ({e})",
                    index + 1
                ));
            }
            Err(e) => {
                return Err(Error::MalformedLine {
                    line: index + 1,
                    message: e.to_string(),
                });
            }
        }
    }

    let mut archive = ParetoArchive::new(header.config.dedupe_archive);
    for record in &records {
        archive.insert(record.clone());
    }
    let cursor = records.len();
    Ok(ResumedState {
        config: header.config,
        history: HistoryDB::from_records(records),
        archive,
        cursor,
    })
}
