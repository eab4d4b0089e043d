//! Dataset readers and writers plus the synthetic generators.

mod readers;
mod synth;

pub use readers::{read_csv_wide, read_ucr_pair, read_ucr_tsv, write_csv_wide, write_ucr_tsv};
pub use synth::{synth_classes, synth_toy, ClassShape, ClassesConfig, Toy, ToyConfig};

use crate::error::{ensure, Result};
use crate::series::Series;

/// Labeled univariate series of one split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSplit {
    pub series: Vec<Series>,
    pub labels: Vec<usize>,
}

impl LabeledSplit {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub train: LabeledSplit,
    pub test: LabeledSplit,
    pub n_classes: usize,
    /// Original label of each class id, as written in the source.
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.train.is_empty(), "training split is empty");
        for split in [&self.train, &self.test] {
            ensure!(
                split.series.len() == split.labels.len(),
                "{} series but {} labels",
                split.series.len(),
                split.labels.len()
            );
            ensure!(
                split.labels.iter().all(|&l| l < self.n_classes),
                "label outside [0, {})",
                self.n_classes
            );
        }
        Ok(())
    }
}

/// Timestamped multivariate stream with optional per-step anomaly labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamDataset {
    pub timestamps: Vec<String>,
    pub timestamp_column: String,
    pub columns: Vec<String>,
    pub series: Series,
    pub labels: Option<Vec<bool>>,
}

/// Name of the recognized label column in wide CSV files.
pub const LABEL_COLUMN: &str = "is_anomaly";
