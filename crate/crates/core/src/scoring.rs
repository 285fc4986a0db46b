//! Generative and discriminative proposal scores, score fusion and the final
//! argmax selection.

use std::cmp::Ordering;

use serde::Serialize;

use crate::config::BiasProfile;
use crate::error::{Error, Result};
use crate::grid::{Map, Mask};
use crate::refexpr::{Direction, DirectionSet};

/// Mean of `c` inside `mask` minus mean of `c` outside it.
///
/// Requires `0 < |mask| < W·H`. Both sums are accumulated in one pass in
/// pixel order, so `score(c, M) == -score(c, 1 - M)` bit for bit.
pub fn generative_score(c: &Map, mask: &Mask) -> Result<f64> {
    c.ensure_same_dims(mask)?;
    let (mut sum_in, mut sum_out) = (0.0f64, 0.0f64);
    let (mut n_in, mut n_out) = (0u64, 0u64);
    for (&v, &m) in c.as_slice().iter().zip(mask.as_slice()) {
        if m != 0 {
            sum_in += v;
            n_in += 1;
        } else {
            sum_out += v;
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 {
        return Err(Error::DegenerateMask);
    }
    Ok(sum_in / n_in as f64 - sum_out / n_out as f64)
}

/// Soft spatial prior multiplied into the image before discriminative
/// encoding. Single channel; broadcast over colour channels by the consumer.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionalBias(pub Map);

fn ramp(t: f64, profile: BiasProfile) -> f64 {
    match profile {
        BiasProfile::Linear => 1.0 - t,
        BiasProfile::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * t).cos()),
    }
}

/// Value of the directional ramp at position `i` of `n` along one axis,
/// where `toward_start` means the favoured side is index 0.
fn axis_weight(i: usize, n: usize, toward_start: bool, profile: BiasProfile) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let t = i as f64 / (n - 1) as f64;
    ramp(if toward_start { t } else { 1.0 - t }, profile)
}

/// All ones when `directions` is empty; otherwise the elementwise product of
/// one 1→0 ramp per direction. Left/Right ramp along the width axis,
/// Top/Bottom along the height axis.
pub fn build_positional_bias(
    directions: &DirectionSet,
    width: usize,
    height: usize,
    profile: BiasProfile,
) -> PositionalBias {
    PositionalBias(Map::from_fn(width, height, |x, y| {
        directions
            .iter()
            .map(|d| match d {
                Direction::Left => axis_weight(x, width, true, profile),
                Direction::Right => axis_weight(x, width, false, profile),
                Direction::Top => axis_weight(y, height, true, profile),
                Direction::Bottom => axis_weight(y, height, false, profile),
            })
            .product()
    }))
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!(
            "vector dims {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// `β·e_attn + (1 − β)·e_crop`, without normalization.
pub fn mix_embeddings(e_attn: &[f64], e_crop: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_dims(e_attn, e_crop)?;
    Ok(e_attn
        .iter()
        .zip(e_crop)
        .map(|(a, c)| beta * a + (1.0 - beta) * c)
        .collect())
}

/// Proposal representation `v_i`: the convex mix, L2-normalized.
pub fn combine_proposal_embedding(e_attn: &[f64], e_crop: &[f64], beta: f64) -> Result<Vec<f64>> {
    l2_normalize(&mix_embeddings(e_attn, e_crop, beta)?)
}

/// `v · r`.
pub fn discriminative_score(v: &[f64], r: &[f64]) -> Result<f64> {
    check_dims(v, r)?;
    Ok(v.iter().zip(r).map(|(a, b)| a * b).sum())
}

/// `s_i = α·sG_i + (1 − α)·sD_i`.
pub fn fuse_scores(sg: &[f64], sd: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if sg.len() != sd.len() {
        return Err(Error::LengthMismatch {
            left: sg.len(),
            right: sd.len(),
        });
    }
    Ok(sg
        .iter()
        .zip(sd)
        .map(|(g, d)| alpha * g + (1.0 - alpha) * d)
        .collect())
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax(s: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in s.iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Greater) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyProposalSet)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredSelection {
    pub generative: Option<Vec<f64>>,
    pub discriminative: Option<Vec<f64>>,
    pub fused: Vec<f64>,
    pub selected_index: usize,
    #[serde(skip)]
    pub selected_mask: Mask,
}

impl ScoredSelection {
    pub fn best_score(&self) -> f64 {
        self.fused[self.selected_index]
    }

    pub fn best_generative(&self) -> Option<f64> {
        self.generative.as_ref().map(|g| g[self.selected_index])
    }

    pub fn best_discriminative(&self) -> Option<f64> {
        self.discriminative.as_ref().map(|d| d[self.selected_index])
    }
}

/// Pick the highest-scoring mask.
pub fn select_best(
    fused: Vec<f64>,
    masks: &[Mask],
    generative: Option<Vec<f64>>,
    discriminative: Option<Vec<f64>>,
) -> Result<ScoredSelection> {
    if masks.is_empty() {
        return Err(Error::EmptyProposalSet);
    }
    if fused.len() != masks.len() {
        return Err(Error::LengthMismatch {
            left: fused.len(),
            right: masks.len(),
        });
    }
    let selected_index = argmax(&fused)?;
    Ok(ScoredSelection {
        generative,
        discriminative,
        selected_mask: masks[selected_index].clone(),
        fused,
        selected_index,
    })
}
