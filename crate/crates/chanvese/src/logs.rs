//! CSV outputs: comma separated, header row, `\n` line endings.

use std::path::Path;

use chanvese_core::segmentation::TraceRow;
use chanvese_core::trainer::EpochRecord;
use serde::{Deserialize, Serialize};

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
}

/// Writes `rows` atomically; `header` is used when `rows` is empty so the
/// file still names its columns.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let bytes = if rows.is_empty() { format!("{}\n", header.join(",")).into_bytes() } else { to_csv(rows)? };
    write_atomic(path, &bytes)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        kind => Error::Invalid(format!("{}: {kind:?}", path.display())),
    })?;
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub iteration: usize,
    pub data: f64,
    pub length: f64,
    pub area: f64,
    pub total: f64,
    pub grad_norm: f64,
}

pub const ENERGY_HEADER: [&str; 6] = ["iteration", "data", "length", "area", "total", "grad_norm"];

impl From<&TraceRow> for EnergyRow {
    fn from(r: &TraceRow) -> Self {
        Self {
            iteration: r.iteration,
            data: r.energy.data,
            length: r.energy.length,
            area: r.energy.area,
            total: r.energy.total,
            grad_norm: r.grad_norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub const EPOCH_HEADER: [&str; 3] = ["epoch", "train_loss", "val_loss"];

impl From<&EpochRecord> for EpochRow {
    fn from(r: &EpochRecord) -> Self {
        Self { epoch: r.epoch, train_loss: r.train_loss, val_loss: r.val_loss }
    }
}

/// One line per segmented image. `dice` is empty when no ground truth was
/// supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub image: String,
    pub seed: u64,
    pub iterations: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub dice: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 6] = ["image", "seed", "iterations", "initial_energy", "final_energy", "dice"];

/// Paired comparison of two runs on the same image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub image: String,
    pub energy_a: f64,
    pub energy_b: f64,
    pub dice_a: Option<f64>,
    pub dice_b: Option<f64>,
    pub b_lower: bool,
}

pub const REPORT_HEADER: [&str; 6] = ["image", "energy_a", "energy_b", "dice_a", "dice_b", "b_lower"];

/// Reads a run as summary rows. An energy trace counts as a single row
/// named after its file, with the last `total` as final energy.
pub fn read_run(path: &Path) -> Result<Vec<SummaryRow>> {
    let head = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let first = head.lines().next().unwrap_or_default();
    if first.starts_with("iteration,") {
        let rows: Vec<EnergyRow> = read_csv(path)?;
        let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let last = rows.last().ok_or_else(|| Error::Invalid(format!("{}: empty energy trace", path.display())))?;
        Ok(vec![SummaryRow {
            image: stem,
            seed: 0,
            iterations: last.iteration,
            initial_energy: rows[0].total,
            final_energy: last.total,
            dice: None,
        }])
    } else {
        read_csv(path)
    }
}

/// Pairs rows by image name, in the order of `a`.
pub fn pair_runs(a: &[SummaryRow], b: &[SummaryRow]) -> Result<Vec<ReportRow>> {
    if a.len() == 1 && b.len() == 1 {
        return Ok(vec![report_row(a[0].image.clone(), &a[0], &b[0])]);
    }
    a.iter()
        .map(|ra| {
            let rb = b
                .iter()
                .find(|r| r.image == ra.image)
                .ok_or_else(|| Error::Invalid(format!("image {} missing from the second run", ra.image)))?;
            Ok(report_row(ra.image.clone(), ra, rb))
        })
        .collect()
}

fn report_row(image: String, a: &SummaryRow, b: &SummaryRow) -> ReportRow {
    ReportRow {
        image,
        energy_a: a.final_energy,
        energy_b: b.final_energy,
        dice_a: a.dice,
        dice_b: b.dice,
        b_lower: b.final_energy < a.final_energy,
    }
}
