//! IoU metrics and dataset-level evaluation.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::manifest::{Dataset, SampleManifest};
use crate::pipeline::segment;

/// Pixel counts `(|pred ∧ gt|, |pred ∨ gt|)`.
pub fn overlap_counts(pred: &Mask, gt: &Mask) -> Result<(u64, u64)> {
    pred.ensure_same_dims(gt)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        let (p, g) = (p != 0, g != 0);
        inter += u64::from(p && g);
        union += u64::from(p || g);
    }
    Ok((inter, union))
}

/// Intersection over union; two empty masks score 1.0.
pub fn iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    let (i, u) = overlap_counts(pred, gt)?;
    Ok(ratio(i, u))
}

fn ratio(inter: u64, union: u64) -> f64 {
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub manifest_path: String,
    pub iou: f64,
    pub selected_index: Option<usize>,
    pub s_best: Option<f64>,
    pub intersection: u64,
    pub union: u64,
    /// Prediction and ground truth were both empty.
    #[serde(default)]
    pub degenerate: bool,
    /// Error code of a non-fatal sample failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub miou: f64,
    pub oiou: f64,
    pub per_sample: Vec<SampleResult>,
    pub config: RunConfig,
}

impl EvalReport {
    /// Aggregate per-sample results: mIoU is the mean of per-sample IoUs,
    /// oIoU the ratio of summed intersections to summed unions.
    pub fn aggregate(per_sample: Vec<SampleResult>, config: &RunConfig) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::EmptyDataset);
        }
        // summed in sorted order so the mean does not depend on sample order
        let mut ious: Vec<f64> = per_sample.iter().map(|s| s.iou).collect();
        ious.sort_by(f64::total_cmp);
        let miou = ious.iter().sum::<f64>() / ious.len() as f64;
        let inter: u64 = per_sample.iter().map(|s| s.intersection).sum();
        let union: u64 = per_sample.iter().map(|s| s.union).sum();
        Ok(EvalReport {
            mode: config.mode,
            miou,
            oiou: ratio(inter, union),
            per_sample,
            config: config.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Segment and score one manifest. `NoValidProposal` is recorded as a
/// flagged zero-IoU sample; every other error is returned.
pub fn evaluate_sample(entry: &str, path: &Path, config: &RunConfig) -> Result<SampleResult> {
    let manifest = SampleManifest::parse(path)?;
    if manifest.gt_mask_path.is_none() {
        return Err(Error::MissingInput {
            mode: config.mode,
            field: "gt_mask_path",
        });
    }
    let gt = manifest.load_gt()?;
    match segment(&manifest, config) {
        Ok(outcome) => {
            let (intersection, union) = overlap_counts(&outcome.selection.selected_mask, &gt)?;
            Ok(SampleResult {
                manifest_path: entry.to_string(),
                iou: ratio(intersection, union),
                selected_index: Some(outcome.selected_origin()),
                s_best: Some(outcome.selection.best_score()),
                intersection,
                union,
                degenerate: union == 0,
                failure: None,
            })
        }
        Err(e @ Error::NoValidProposal) => Ok(SampleResult {
            manifest_path: entry.to_string(),
            iou: 0.0,
            selected_index: None,
            s_best: None,
            intersection: 0,
            union: gt.count_ones(),
            degenerate: false,
            failure: Some(e.code().to_string()),
        }),
        Err(e) => Err(e),
    }
}

/// Evaluate every manifest of `dataset` using up to `jobs` worker threads.
/// Results are ordered as in the dataset index regardless of `jobs`.
pub fn evaluate_dataset(dataset: &Dataset, config: &RunConfig, jobs: usize) -> Result<EvalReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let run = || -> Vec<Result<SampleResult>> {
        dataset
            .entries
            .par_iter()
            .map(|entry| evaluate_sample(entry, &dataset.resolve(entry), config))
            .collect()
    };
    let results = if jobs <= 1 {
        dataset
            .entries
            .iter()
            .map(|entry| evaluate_sample(entry, &dataset.resolve(entry), config))
            .collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)
    };
    let per_sample = results.into_iter().collect::<Result<Vec<_>>>()?;
    EvalReport::aggregate(per_sample, config)
}

pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}
