//! Input loading by file extension: `.tsv` is a UCR-style labeled split,
//! anything else a wide CSV stream.

use std::path::Path;

use coincept::datasets::{read_csv_wide, read_ucr_tsv, LabeledDataset, StreamDataset};
use coincept::{Error, Result, Series};

pub enum Data {
    Stream(StreamDataset),
    Labeled(LabeledDataset),
}

pub fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

pub fn load(path: &Path, timestamp: Option<&str>) -> Result<Data> {
    if is_tsv(path) {
        Ok(Data::Labeled(read_ucr_tsv(path)?))
    } else {
        Ok(Data::Stream(read_csv_wide(path, timestamp)?))
    }
}

pub fn load_stream(path: &Path, timestamp: Option<&str>) -> Result<StreamDataset> {
    match load(path, timestamp)? {
        Data::Stream(s) => Ok(s),
        Data::Labeled(_) => Err(Error::InvalidArgument(format!(
            "{} is a labeled TSV; this command expects a wide CSV stream",
            path.display()
        ))),
    }
}

impl Data {
    pub fn series(&self) -> Vec<Series> {
        match self {
            Data::Stream(s) => vec![s.series.clone()],
            Data::Labeled(d) => d.train.series.clone(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Data::Stream(s) => s.series.n_features(),
            Data::Labeled(d) => d.train.series.first().map_or(1, Series::n_features),
        }
    }
}

pub fn check_features(expected: usize, found: usize, path: &Path) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ArtifactMismatch(format!(
            "checkpoint expects {expected} feature(s), {} has {found}",
            path.display()
        )))
    }
}
