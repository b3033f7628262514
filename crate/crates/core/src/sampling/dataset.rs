use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pdf::{AnglePdfVariant, AngleSampler};
use super::sobol::SobolStream;
use crate::degradation::{DegradationParams, Pipeline};
use crate::error::{Error, Result};
use crate::geometry::AnglePair;
use crate::plate::render_plate;
use crate::rng::{domain, keyed, random_digits};

pub const MANIFEST_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub variant: AnglePdfVariant,
    pub total_pairs: usize,
    /// Train, validation and test counts, assigned by contiguous index ranges.
    pub splits: [usize; 3],
    pub seed: u64,
}

impl DatasetSpec {
    /// 10,240 pairs split 8,192 / 1,024 / 1,024.
    pub fn table1(variant: AnglePdfVariant, seed: u64) -> Self {
        DatasetSpec {
            variant,
            total_pairs: 10_240,
            splits: [8_192, 1_024, 1_024],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_pairs == 0 {
            return Err(Error::OutOfRange("dataset must contain at least one pair".into()));
        }
        if self.splits.iter().sum::<usize>() != self.total_pairs {
            return Err(Error::OutOfRange(format!(
                "splits {:?} do not sum to {}",
                self.splits, self.total_pairs
            )));
        }
        if self.total_pairs > 100_000 {
            return Err(Error::OutOfRange("file names hold at most 5 digits".into()));
        }
        if !(self.variant.emphasis_c >= 0.0 && self.variant.emphasis_s > 0.0) {
            return Err(Error::OutOfRange("angle density parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.splits[0] {
            Split::Train
        } else if index < self.splits[0] + self.splits[1] {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: usize,
    pub digits: String,
    pub alpha: f64,
    pub beta: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub blur_sigma: f64,
    pub jpeg_q: u8,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub spec: DatasetSpec,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_slice(&text)?;
        crate::recoverability::io::check_version(&m.format_version)?;
        Ok(m)
    }
}

/// Draws the full description of dataset pair `index`.
pub fn dataset_record(spec: &DatasetSpec, sobol: &SobolStream, sampler: &AngleSampler, index: usize) -> Result<(ManifestRecord, DegradationParams)> {
    let [u, v] = sobol.point(index as u64)?;
    let angles = AnglePair::new(sampler.angle(u), sampler.angle(v));
    let mut rng = keyed(spec.seed, domain::DATASET_SAMPLE, index as u64);
    let digits = random_digits(&mut rng);
    let params = DegradationParams::sample(angles, &mut rng);
    let record = ManifestRecord {
        index,
        digits,
        alpha: angles.alpha,
        beta: angles.beta,
        brightness: params.brightness,
        contrast: params.contrast,
        saturation: params.saturation,
        blur_sigma: params.blur_sigma,
        jpeg_q: params.jpeg_quality,
        split: spec.split_of(index),
    };
    Ok((record, params))
}

/// The manifest of a dataset without rendering any images.
pub fn plan_dataset(spec: &DatasetSpec) -> Result<Manifest> {
    spec.validate()?;
    let sobol = SobolStream::scrambled(spec.seed);
    let sampler = AngleSampler::new(spec.variant);
    let records = (0..spec.total_pairs)
        .map(|i| dataset_record(spec, &sobol, &sampler, i).map(|(r, _)| r))
        .collect::<Result<_>>()?;
    Ok(Manifest {
        format_version: MANIFEST_FORMAT_VERSION.to_string(),
        spec: spec.clone(),
        records,
    })
}

/// Renders every (clean, distorted) pair into `out_dir/clean` and `out_dir/distorted`
/// and writes `out_dir/manifest.json`.
pub fn build_dataset(spec: &DatasetSpec, pipeline: &Pipeline, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let manifest = plan_dataset(spec)?;
    let clean_dir = out_dir.join("clean");
    let distorted_dir = out_dir.join("distorted");
    for d in [&clean_dir, &distorted_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let sobol = SobolStream::scrambled(spec.seed);
    let sampler = AngleSampler::new(spec.variant);
    (0..spec.total_pairs).into_par_iter().try_for_each(|i| -> Result<()> {
        let (record, params) = dataset_record(spec, &sobol, &sampler, i)?;
        let truth = render_plate(&record.digits)?;
        let sample = pipeline.degrade(&truth, &params, spec.seed)?;
        let name = format!("{i:05}.png");
        truth.image.save_png(clean_dir.join(&name))?;
        sample.input.save_png(distorted_dir.join(&name))?;
        Ok(())
    })?;
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
