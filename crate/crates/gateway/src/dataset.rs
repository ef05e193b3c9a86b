use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use pacroute_core::{CalibrationRecord, RoutingDecision};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, Result};

/// One line of an input dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

/// Sizes and seed of a calibration/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub cal_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub const MATH500: Self = Self::new(300, 200);
    pub const ZEBRA_LOGIC: Self = Self::new(500, 500);
    pub const ARENA_HARD: Self = Self::new(450, 300);

    pub const fn new(cal_size: usize, test_size: usize) -> Self {
        Self {
            cal_size,
            test_size,
            seed: 0,
        }
    }

    pub const fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Parses JSON Lines, skipping blank lines. Errors carry 1-based line numbers.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| GatewayError::Ingest {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

fn check_ids<'a>(ids: impl Iterator<Item = (usize, &'a str)>) -> Result<()> {
    let mut seen = HashSet::new();
    for (line, id) in ids {
        if id.is_empty() {
            return Err(GatewayError::Ingest {
                line,
                message: "empty id".into(),
            });
        }
        if !seen.insert(id) {
            return Err(GatewayError::Ingest {
                line,
                message: format!("duplicate id {id:?}"),
            });
        }
    }
    Ok(())
}

/// Line numbers of the non-blank lines, in order.
fn content_lines(text: &str) -> Vec<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn parse_input_jsonl(text: &str) -> Result<Vec<InputRecord>> {
    let items: Vec<InputRecord> = parse_jsonl(text)?;
    let lines = content_lines(text);
    check_ids(lines.iter().copied().zip(items.iter().map(|r| r.id.as_str())))?;
    Ok(items)
}

pub fn parse_records_jsonl(text: &str) -> Result<Vec<CalibrationRecord>> {
    let items: Vec<CalibrationRecord> = parse_jsonl(text)?;
    let lines = content_lines(text);
    check_ids(lines.iter().copied().zip(items.iter().map(|r| r.id.as_str())))?;
    for (line, r) in lines.iter().zip(&items) {
        if !(0.0..=1.0).contains(&r.uncertainty) {
            return Err(GatewayError::Ingest {
                line: *line,
                message: format!("uncertainty {} outside [0, 1]", r.uncertainty),
            });
        }
        if let Some(loss) = r.loss {
            if !(loss.is_finite() && loss >= 0.0) {
                return Err(GatewayError::Ingest {
                    line: *line,
                    message: format!("loss {loss} must be finite and non-negative"),
                });
            }
        }
    }
    Ok(items)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GatewayError::io(path, e))
}

pub fn read_input(path: &Path) -> Result<Vec<InputRecord>> {
    parse_input_jsonl(&read_text(path)?)
}

pub fn read_records(path: &Path) -> Result<Vec<CalibrationRecord>> {
    parse_records_jsonl(&read_text(path)?)
}

pub fn read_decisions(path: &Path) -> Result<Vec<RoutingDecision>> {
    parse_jsonl(&read_text(path)?)
}

/// JSON Lines encoding, one compact object per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| GatewayError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| GatewayError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| GatewayError::io(path, e))?;
    tmp.persist(path).map_err(|e| GatewayError::io(path, e.error))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic(path, to_jsonl(items).as_bytes())
}

/// Seeded random partition into calibration and test subsets. Each subset
/// keeps the input order of its members.
pub fn split_dataset<T: Clone>(items: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    let requested = spec.cal_size + spec.test_size;
    if requested > items.len() {
        return Err(GatewayError::Size {
            requested,
            available: items.len(),
        });
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut cal_idx = idx[..spec.cal_size].to_vec();
    let mut test_idx = idx[spec.cal_size..requested].to_vec();
    cal_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        cal_idx.into_iter().map(|i| items[i].clone()).collect(),
        test_idx.into_iter().map(|i| items[i].clone()).collect(),
    ))
}

pub fn ingest_dataset(path: &Path, spec: SplitSpec) -> Result<(Vec<InputRecord>, Vec<InputRecord>)> {
    split_dataset(&read_input(path)?, spec)
}
