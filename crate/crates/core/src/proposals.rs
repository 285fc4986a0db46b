//! Candidate mask sets: weight-free thresholding of the correlation map, or
//! masks ingested from an external segmentor.

use std::collections::HashSet;

use crate::attnmap::CorrelationMap;
use crate::config::ThresholdMode;
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalSource {
    WeightFree,
    External,
}

/// Per-proposal embedding pair from the exporter.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalEmbedding {
    /// Masked-attention encoder on the position-biased image.
    pub attn: Vec<f64>,
    /// Vanilla encoder on the masked crop.
    pub crop: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProposalSet {
    pub masks: Vec<Mask>,
    pub source: ProposalSource,
    pub embeddings: Option<Vec<ProposalEmbedding>>,
    /// Index each surviving mask had before sanitization (threshold index
    /// for weight-free sets, stack index for external ones).
    pub origins: Vec<usize>,
}

impl ProposalSet {
    pub fn new(masks: Vec<Mask>, source: ProposalSource) -> Self {
        let origins = (0..masks.len()).collect();
        ProposalSet {
            masks,
            source,
            embeddings: None,
            origins,
        }
    }

    pub fn with_embeddings(mut self, embeddings: Vec<ProposalEmbedding>) -> Result<Self> {
        if embeddings.len() != self.masks.len() {
            return Err(Error::LengthMismatch {
                left: self.masks.len(),
                right: embeddings.len(),
            });
        }
        self.embeddings = Some(embeddings);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    fn retain_indices(self, keep: &[usize]) -> Self {
        let pick = |v: &Vec<Mask>| keep.iter().map(|&i| v[i].clone()).collect();
        ProposalSet {
            masks: pick(&self.masks),
            source: self.source,
            embeddings: self
                .embeddings
                .map(|e| keep.iter().map(|&i| e[i].clone()).collect()),
            origins: keep.iter().map(|&i| self.origins[i]).collect(),
        }
    }
}

/// `ψ(c ≥ μ)` for every threshold, before any sanitization.
pub fn threshold_masks(c: &CorrelationMap, thresholds: &[f64], mode: ThresholdMode) -> Vec<Mask> {
    let cutoffs: Vec<f64> = match mode {
        ThresholdMode::Absolute => thresholds.to_vec(),
        ThresholdMode::Percentile => {
            let mut sorted = c.map.as_slice().to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            thresholds
                .iter()
                .map(|&q| {
                    // nearest-rank quantile
                    let rank = (q * n as f64).ceil() as usize;
                    sorted[rank.clamp(1, n) - 1]
                })
                .collect()
        }
    };
    cutoffs
        .iter()
        .map(|&mu| c.map.map(|v| u8::from(v >= mu)))
        .collect()
}

/// Weight-free proposals from the correlation map, sanitized.
pub fn weight_free_proposals(c: &CorrelationMap, thresholds: &[f64]) -> Result<ProposalSet> {
    weight_free_proposals_with(c, thresholds, ThresholdMode::Absolute)
}

pub fn weight_free_proposals_with(
    c: &CorrelationMap,
    thresholds: &[f64],
    mode: ThresholdMode,
) -> Result<ProposalSet> {
    let masks = threshold_masks(c, thresholds, mode);
    sanitize(ProposalSet::new(masks, ProposalSource::WeightFree))
}

/// Ingest a `P × W × H` u8 mask stack, optionally with one embedding pair
/// per mask, and sanitize it.
pub fn ingest_external_proposals(
    stack: &Tensor,
    dims: (usize, usize),
    embeddings: Option<Vec<ProposalEmbedding>>,
) -> Result<ProposalSet> {
    if stack.dims().len() != 3 || (stack.dims()[1], stack.dims()[2]) != dims {
        return Err(Error::DimMismatch(format!(
            "mask stack {:?} vs image {}x{}",
            stack.dims(),
            dims.0,
            dims.1
        )));
    }
    ingest_masks(stack.to_mask_stack()?, embeddings)
}

/// Like [`ingest_external_proposals`] for masks already split out.
pub fn ingest_masks(
    masks: Vec<Mask>,
    embeddings: Option<Vec<ProposalEmbedding>>,
) -> Result<ProposalSet> {
    if let Some(first) = masks.first() {
        for (i, m) in masks.iter().enumerate() {
            first.ensure_same_dims(m)?;
            if !m.is_binary() {
                return Err(Error::NonBinaryMask(format!("proposal {i}")));
            }
        }
    }
    let mut set = ProposalSet::new(masks, ProposalSource::External);
    if let Some(e) = embeddings {
        set = set.with_embeddings(e)?;
    }
    sanitize(set)
}

/// Exact-equality dedup keeping the first occurrence, order preserved.
pub fn dedup_proposals(set: ProposalSet) -> ProposalSet {
    let keep: Vec<usize> = {
        let mut seen: HashSet<&[u8]> = HashSet::with_capacity(set.len());
        set.masks
            .iter()
            .enumerate()
            .filter(|(_, m)| seen.insert(m.as_slice()))
            .map(|(i, _)| i)
            .collect()
    };
    set.retain_indices(&keep)
}

/// Drop empty and full masks, then dedup. Fails when nothing survives.
pub fn sanitize(set: ProposalSet) -> Result<ProposalSet> {
    let keep: Vec<usize> = set
        .masks
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let ones = m.count_ones();
            ones > 0 && ones < m.len() as u64
        })
        .map(|(i, _)| i)
        .collect();
    let set = dedup_proposals(set.retain_indices(&keep));
    if set.is_empty() {
        return Err(Error::NoValidProposal);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_thresholds;
    use crate::grid::Map;
    use proptest::prelude::*;

    fn cmap(w: usize, h: usize, v: Vec<f64>) -> CorrelationMap {
        CorrelationMap {
            map: Map::from_vec(w, h, v).unwrap(),
            source_token: 0,
        }
    }

    fn mask(w: usize, h: usize, v: &[u8]) -> Mask {
        Mask::from_vec(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn zero_map_has_no_valid_proposal() {
        let c = cmap(3, 3, vec![0.0; 9]);
        assert!(matches!(
            weight_free_proposals(&c, &default_thresholds()),
            Err(Error::NoValidProposal)
        ));
    }

    #[test]
    fn three_levels_give_two_proposals() {
        // regions: level 0.0 on x=0, 0.5 on x=1, 1.0 on x=2
        let c = cmap(3, 2, vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
        let thresholds = default_thresholds();

        // brute-force enumeration of all 19 thresholds
        let mut distinct: Vec<Vec<u8>> = Vec::new();
        for &mu in &thresholds {
            let m: Vec<u8> = c
                .map
                .as_slice()
                .iter()
                .map(|&v| u8::from(v >= mu))
                .collect();
            let ones = m.iter().filter(|&&b| b == 1).count();
            if ones > 0 && ones < m.len() && !distinct.contains(&m) {
                distinct.push(m);
            }
        }
        assert_eq!(distinct.len(), 2);

        let set = weight_free_proposals(&c, &thresholds).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.masks[0].as_slice(), &[0, 0, 1, 1, 1, 1]);
        assert_eq!(set.masks[1].as_slice(), &[0, 0, 0, 0, 1, 1]);
        // 0.05 is the lowest threshold for the first, 0.55 for the second
        assert_eq!(set.origins, vec![0, 10]);
        assert_eq!(set.source, ProposalSource::WeightFree);
    }

    #[test]
    fn percentile_mode_thresholds_on_quantiles() {
        let v: Vec<f64> = (0..10).map(|i| f64::from(i) * 10.0).collect();
        let c = cmap(10, 1, v);
        let masks = threshold_masks(&c, &[0.5], ThresholdMode::Percentile);
        // nearest-rank 50% of 10 values is the 5th smallest (40.0)
        assert_eq!(masks[0].count_ones(), 6);
        let abs = threshold_masks(&c, &[0.5], ThresholdMode::Absolute);
        assert_eq!(abs[0].count_ones(), 9);
    }

    #[test]
    fn external_examples() {
        let a = mask(2, 2, &[1, 0, 0, 0]);
        let b = mask(2, 2, &[0, 1, 0, 0]);
        let c = mask(2, 2, &[0, 0, 1, 1]);
        let set = ingest_masks(vec![a.clone(), b.clone(), c.clone()], None).unwrap();
        assert_eq!(set.len(), 3);

        let emb = |k: f64| ProposalEmbedding {
            attn: vec![k],
            crop: vec![-k],
        };
        let set = ingest_masks(
            vec![a.clone(), b.clone(), a.clone()],
            Some(vec![emb(0.0), emb(1.0), emb(2.0)]),
        )
        .unwrap();
        assert_eq!(set.masks, vec![a.clone(), b.clone()]);
        assert_eq!(set.embeddings.unwrap(), vec![emb(0.0), emb(1.0)]);
        assert_eq!(set.origins, vec![0, 1]);

        let full = mask(2, 2, &[1, 1, 1, 1]);
        let set = ingest_masks(vec![full, c.clone()], None).unwrap();
        assert_eq!(set.masks, vec![c]);
    }

    #[test]
    fn external_stack_checks() {
        let t = Tensor::from_u8(vec![2, 2, 2], vec![1, 0, 0, 0, 0, 1, 1, 0]).unwrap();
        assert_eq!(
            ingest_external_proposals(&t, (2, 2), None).unwrap().len(),
            2
        );
        assert!(matches!(
            ingest_external_proposals(&t, (3, 2), None),
            Err(Error::DimMismatch(_))
        ));
        let only_empty = Tensor::from_u8(vec![1, 2, 2], vec![0; 4]).unwrap();
        assert!(matches!(
            ingest_external_proposals(&only_empty, (2, 2), None),
            Err(Error::NoValidProposal)
        ));
        let emb = vec![ProposalEmbedding {
            attn: vec![1.0],
            crop: vec![1.0],
        }];
        assert!(matches!(
            ingest_external_proposals(&t, (2, 2), Some(emb)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dedup_basics() {
        let empty = ProposalSet::new(vec![], ProposalSource::External);
        assert!(dedup_proposals(empty).is_empty());
        let a = mask(1, 2, &[1, 0]);
        let b = mask(1, 2, &[0, 1]);
        let set = dedup_proposals(ProposalSet::new(
            vec![a.clone(), b.clone(), a.clone()],
            ProposalSource::External,
        ));
        assert_eq!(set.masks, vec![a, b]);
    }

    #[test]
    fn dedup_matches_pairwise_oracle() {
        // 100 pseudo-random 3x3 masks drawn from a small pool so duplicates occur
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let masks: Vec<Mask> = (0..100)
            .map(|_| {
                let bits = next() % 24;
                Mask::from_fn(3, 3, |x, y| ((bits >> ((x * 3 + y) % 5)) & 1) as u8)
            })
            .collect();
        let mut oracle = 0;
        for i in 0..masks.len() {
            if (0..i).all(|j| masks[j] != masks[i]) {
                oracle += 1;
            }
        }
        let set = dedup_proposals(ProposalSet::new(masks, ProposalSource::External));
        assert_eq!(set.len(), oracle);
    }

    fn random_map() -> impl Strategy<Value = CorrelationMap> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..1.0, w * h).prop_map(move |v| cmap(w, h, v))
        })
    }

    proptest! {
        #[test]
        fn threshold_masks_are_nested(c in random_map()) {
            for mode in [ThresholdMode::Absolute, ThresholdMode::Percentile] {
                let masks = threshold_masks(&c, &default_thresholds(), mode);
                prop_assert_eq!(masks.len(), 19);
                for pair in masks.windows(2) {
                    prop_assert!(pair[1].is_subset_of(&pair[0]));
                }
            }
        }

        #[test]
        fn sanitized_masks_are_valid(c in random_map()) {
            if let Ok(set) = weight_free_proposals(&c, &default_thresholds()) {
                prop_assert!(set.len() <= 19);
                for m in &set.masks {
                    let ones = m.count_ones();
                    prop_assert!(ones > 0 && ones < m.len() as u64);
                }
            }
        }
    }
}
