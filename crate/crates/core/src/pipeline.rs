//! Per-sample segmentation in one of the four modes.

use crate::attnmap::{correlation_matrix, CorrelationMap};
use crate::config::{Mode, RunConfig};
use crate::error::Result;
use crate::manifest::SampleManifest;
use crate::proposals::{ingest_masks, weight_free_proposals_with, ProposalEmbedding, ProposalSet};
use crate::refexpr::find_root_token;
use crate::scoring::{
    combine_proposal_embedding, discriminative_score, fuse_scores, generative_score, l2_normalize,
    mix_embeddings, select_best, ScoredSelection,
};

#[derive(Clone, Debug)]
pub struct SegmentOutcome {
    pub selection: ScoredSelection,
    pub proposals: ProposalSet,
    /// Root token used for the correlation map; `None` in modes that do not
    /// read attention.
    pub root_index: Option<usize>,
    pub correlation: Option<CorrelationMap>,
}

impl SegmentOutcome {
    /// Index of the selected proposal before sanitization (stack row for
    /// external proposals, threshold index for weight-free ones).
    pub fn selected_origin(&self) -> usize {
        self.proposals.origins[self.selection.selected_index]
    }
}

/// Root token: the manifest's value when present, else the heuristic.
pub fn root_index(manifest: &SampleManifest) -> usize {
    manifest
        .root_index
        .unwrap_or_else(|| find_root_token(&manifest.tokens))
}

/// Run the configured mode on one sample. Only files the mode needs are
/// read.
pub fn segment(manifest: &SampleManifest, config: &RunConfig) -> Result<SegmentOutcome> {
    config.validate()?;
    let mode = config.mode;
    manifest.validate_for(mode)?;
    let (width, height) = manifest.dims();

    let (correlation, root) = if mode.needs_attention() {
        let stack = manifest.load_attention()?;
        let k = root_index(manifest);
        (
            Some(correlation_matrix(
                &stack,
                k,
                width,
                height,
                config.epsilon,
            )?),
            Some(k),
        )
    } else {
        (None, None)
    };

    let mut text_vec = None;
    let proposals = match (mode, &correlation) {
        (Mode::G, Some(c)) => {
            weight_free_proposals_with(c, &config.threshold_set, config.threshold_mode)?
        }
        _ => {
            let masks = manifest.load_proposals()?;
            let embeddings = if mode.needs_embeddings() {
                let e = manifest.load_embeddings()?;
                text_vec = Some(e.text);
                Some(
                    e.attn
                        .into_iter()
                        .zip(e.crop)
                        .map(|(attn, crop)| ProposalEmbedding { attn, crop })
                        .collect(),
                )
            } else {
                None
            };
            ingest_masks(masks, embeddings)?
        }
    };

    let generative = match &correlation {
        Some(c) => Some(
            proposals
                .masks
                .iter()
                .map(|m| generative_score(&c.map, m))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    let discriminative = match (&text_vec, &proposals.embeddings) {
        (Some(r), Some(pairs)) => Some(discriminative_scores(r, pairs, config)?),
        _ => None,
    };

    let fused = match (mode, &generative, &discriminative) {
        (Mode::G | Mode::GS, Some(g), _) => g.clone(),
        (Mode::DS, _, Some(d)) => d.clone(),
        (Mode::FULL, Some(g), Some(d)) => fuse_scores(g, d, config.alpha)?,
        _ => unreachable!("mode inputs validated above"),
    };

    let selection = select_best(fused, &proposals.masks, generative, discriminative)?;
    Ok(SegmentOutcome {
        selection,
        proposals,
        root_index: root,
        correlation,
    })
}

fn discriminative_scores(
    text: &[f64],
    pairs: &[ProposalEmbedding],
    config: &RunConfig,
) -> Result<Vec<f64>> {
    if config.raw_dot {
        pairs
            .iter()
            .map(|p| discriminative_score(&mix_embeddings(&p.attn, &p.crop, config.beta)?, text))
            .collect()
    } else {
        let r = l2_normalize(text)?;
        pairs
            .iter()
            .map(|p| {
                discriminative_score(
                    &combine_proposal_embedding(&p.attn, &p.crop, config.beta)?,
                    &r,
                )
            })
            .collect()
    }
}
