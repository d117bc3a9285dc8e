//! Experiment harness behind the `lazyattack` binary: file formats,
//! campaign configuration, attack campaigns and reports.

pub mod campaign;
pub mod config;
pub mod formats;
pub mod report;

use std::fs;
use std::path::Path;

use lazyattack::models::{gen_synthetic, LabeledDataset, ModelError};

use crate::campaign::Campaign;
use crate::config::DataSource;
use crate::formats::{write_curve, write_noise, write_records, FormatError};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Loads IDX files or draws `synthetic_count` synthetic images.
pub fn load_data(src: &DataSource, synthetic_count: usize) -> Result<LabeledDataset, DataError> {
    Ok(match src {
        DataSource::Idx { images, labels } => formats::read_dataset(images, labels, None)?,
        DataSource::Synthetic {
            classes,
            spec,
            seed,
            sample_seed,
            params,
        } => gen_synthetic(*classes, *spec, synthetic_count, *seed, *sample_seed, *params)?,
    })
}

/// Writes `per_image.csv`, `curve.csv` and `noise.csv` into `dir`.
pub fn write_campaign(dir: &Path, campaign: &Campaign) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(|source| FormatError::Io {
        path: dir.to_owned(),
        source,
    })?;
    write_records(&dir.join("per_image.csv"), &campaign.records)?;
    write_curve(&dir.join("curve.csv"), &campaign::success_curve(&campaign.records))?;
    write_noise(&dir.join("noise.csv"), campaign.epsilon, &campaign.noise)
}
