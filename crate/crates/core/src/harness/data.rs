//! Loading multiclass CSV datasets and splitting them.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::types::{Context, MulticlassExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Append a constant-1 feature to every context.
    pub bias: bool,
    /// Z-score every feature column before the bias is appended.
    pub standardize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { bias: true, standardize: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassDataset {
    pub examples: Vec<MulticlassExample>,
    pub num_classes: usize,
}

impl MulticlassDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.context.dim())
    }
}

/// Rows of comma-separated numeric features with a 1-based integer class
/// label in the last column. Labels become 0-based and `k` is the largest
/// label seen.
pub fn parse_csv_dataset(text: &str, opts: LoadOptions) -> Result<MulticlassDataset> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cols.len() < 2 {
            return Err(perr(line, "need at least one feature and a label".into()));
        }
        match width {
            None => width = Some(cols.len()),
            Some(w) if w != cols.len() => {
                return Err(perr(line, format!("expected {w} columns, found {}", cols.len())));
            }
            _ => {}
        }
        let (label_tok, feats) = cols.split_last().expect("at least two columns");
        let features = feats
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(perr(line, format!("non-numeric feature '{t}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let label: usize = label_tok.parse().map_err(|_| perr(line, format!("bad class label '{label_tok}'")))?;
        if label == 0 {
            return Err(perr(line, "class labels are 1-based; found 0".into()));
        }
        rows.push(features);
        labels.push(label - 1);
    }
    if rows.is_empty() {
        return Err(perr(1, "dataset is empty".into()));
    }
    if opts.standardize {
        standardize(&mut rows);
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let examples = rows
        .into_iter()
        .zip(labels)
        .map(|(mut f, label)| {
            if opts.bias {
                f.push(1.0);
            }
            Ok(MulticlassExample { context: Context::new(f)?, label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassDataset { examples, num_classes })
}

pub fn load_csv_dataset(path: impl AsRef<Path>, opts: LoadOptions) -> Result<MulticlassDataset> {
    parse_csv_dataset(&std::fs::read_to_string(path)?, opts)
}

fn standardize(rows: &mut [Vec<f64>]) {
    let d = rows[0].len();
    for j in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (mean, var) = crate::numeric::mean_and_variance(&col);
        let sd = var.sqrt();
        for r in rows.iter_mut() {
            r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
        }
    }
}

/// Shuffled split into `(train, test)` index lists, with
/// `round(train_fraction·n)` training items.
pub fn split_indices<R: Rng + ?Sized>(n: usize, train_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid("train fraction must lie in (0, 1)"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}
