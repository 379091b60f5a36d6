use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClassifierError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One row of training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: SplitMetrics,
    pub val: SplitMetrics,
}

const HEADER: &str = "epoch,train_loss,train_acc,train_prec,train_rec,val_loss,val_acc,val_prec,val_rec";

pub fn history_csv(history: &[EpochMetrics]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for row in history {
        let (t, v) = (&row.train, &row.val);
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.epoch, t.loss, t.accuracy, t.precision, t.recall, v.loss, v.accuracy, v.precision, v.recall
        );
    }
    s
}

pub fn emit_history_csv(history: &[EpochMetrics], path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    if history.is_empty() {
        return Err(ClassifierError::Config("history is empty".into()));
    }
    std::fs::write(path, history_csv(history))?;
    Ok(())
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<EpochMetrics>, ClassifierError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(ClassifierError::Config("history header mismatch".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || ClassifierError::Config(format!("history line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad());
            }
            let n = |j: usize| f[j].parse::<f64>().map_err(|_| bad());
            let split = |j: usize| -> Result<SplitMetrics, ClassifierError> {
                Ok(SplitMetrics {
                    loss: n(j)?,
                    accuracy: n(j + 1)?,
                    precision: n(j + 2)?,
                    recall: n(j + 3)?,
                })
            };
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|_| bad())?,
                train: split(1)?,
                val: split(5)?,
            })
        })
        .collect()
}
