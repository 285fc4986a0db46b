//! Deterministic synthetic samples with a planted target.
//!
//! Every sample holds an axis-aligned target rectangle plus disjoint
//! distractor rectangles on the latent grid. The root token attends to the
//! target footprint, every other token to one distractor. External proposals
//! are the exact rectangle masks plus one random mask, in shuffled order,
//! and embeddings are built so the target's combined embedding has the
//! highest cosine with the text vector for any `β`.
//!
//! # Random numbers
//!
//! Streams come from SplitMix64 (Steele, Lea & Flood 2014):
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! Sample `i` of seed `s` starts from `state = s ^ mix(i + 1)` where `mix`
//! is the output function above applied to `(i + 1) * 0x9E3779B97F4A7C15`.
//! Unit floats are `(next >> 11) * 2^-53`. All arithmetic wraps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::manifest::{write_dataset_index, EmbeddingPaths, SampleManifest};
use crate::tensor::{save_tensor, Tensor};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent stream number `index` derived from `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        SplitMix64::new(seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.range(0, i);
            items.swap(i, j);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub image_width: usize,
    pub image_height: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub tokens: usize,
    pub heads: usize,
    pub embedding_dim: usize,
    pub n_samples: usize,
    pub n_distractors: usize,
    pub noise: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 42,
            image_width: 64,
            image_height: 64,
            grid_width: 16,
            grid_height: 16,
            tokens: 6,
            heads: 4,
            embedding_dim: 32,
            n_samples: 20,
            n_distractors: 2,
            noise: 0.0,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("fixture spec: {m}")));
        if self.grid_width == 0 || self.grid_height == 0 {
            return bad("grid dims must be positive");
        }
        if self.grid_width > self.image_width || self.grid_height > self.image_height {
            return bad("latent grid must not exceed the image size");
        }
        if self.grid_width < 6 || self.grid_height < 6 {
            return bad("latent grid must be at least 6x6");
        }
        if self.tokens == 0 || self.heads == 0 {
            return bad("tokens and heads must be positive");
        }
        if self.embedding_dim < 2 {
            return bad("embedding dim must be at least 2");
        }
        if self.n_distractors == 0 {
            return bad("at least one distractor is required");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and non-negative");
        }
        Ok(())
    }
}

/// Half-open rectangle on the latent grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn cells(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// Overlap test with a one-cell margin.
    fn near(&self, other: &CellRect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    /// Pixel mask of this rectangle at image resolution.
    pub fn to_mask(&self, spec: &FixtureSpec) -> Mask {
        let px = |c: usize| c * spec.image_width / spec.grid_width;
        let py = |c: usize| c * spec.image_height / spec.grid_height;
        let (x0, x1, y0, y1) = (px(self.x0), px(self.x1), py(self.y0), py(self.y1));
        Mask::from_fn(spec.image_width, spec.image_height, |x, y| {
            u8::from(x >= x0 && x < x1 && y >= y0 && y < y1)
        })
    }
}

/// The planted layout of one sample, before anything is written.
#[derive(Clone, Debug)]
pub struct SampleLayout {
    pub target: CellRect,
    pub distractors: Vec<CellRect>,
    pub tokens: Vec<String>,
    pub root_index: usize,
}

pub const MIN_TARGET_SIDE: usize = 4;

const NOUNS: &[&str] = &[
    "horse", "broccoli", "sandwich", "dog", "cup", "umbrella", "giraffe", "bus",
];
const ADJECTIVES: &[&str] = &[
    "black", "small", "striped", "wooden", "tall", "green", "old",
];
const TAIL: &[&str] = &[
    "on", "the", "table", "near", "a", "window", "with", "two", "cups",
];

fn make_tokens(rng: &mut SplitMix64, l: usize) -> (Vec<String>, usize) {
    let noun = NOUNS[rng.range(0, NOUNS.len() - 1)].to_string();
    let adj = ADJECTIVES[rng.range(0, ADJECTIVES.len() - 1)].to_string();
    match l {
        1 => (vec![noun], 0),
        2 => (vec!["the".into(), noun], 1),
        _ => {
            let mut tokens = vec!["the".to_string(), adj, noun];
            tokens.extend(TAIL.iter().cycle().take(l - 3).map(|s| s.to_string()));
            (tokens, 2)
        }
    }
}

fn place_rect(
    rng: &mut SplitMix64,
    spec: &FixtureSpec,
    min: usize,
    max_w: usize,
    max_h: usize,
    taken: &[CellRect],
) -> Result<CellRect> {
    for _ in 0..10_000 {
        let rw = rng.range(min, max_w.max(min));
        let rh = rng.range(min, max_h.max(min));
        if rw > spec.grid_width || rh > spec.grid_height {
            continue;
        }
        let x0 = rng.range(0, spec.grid_width - rw);
        let y0 = rng.range(0, spec.grid_height - rh);
        let r = CellRect {
            x0,
            y0,
            x1: x0 + rw,
            y1: y0 + rh,
        };
        if taken.iter().all(|t| !t.near(&r)) {
            return Ok(r);
        }
    }
    Err(Error::InvalidConfig(
        "fixture spec: cannot place disjoint rectangles; enlarge the grid or use fewer distractors"
            .into(),
    ))
}

pub fn layout(spec: &FixtureSpec, rng: &mut SplitMix64) -> Result<SampleLayout> {
    spec.validate()?;
    let (gw, gh) = (spec.grid_width, spec.grid_height);
    // Generative scoring favours the fully saturated core of the upsampled
    // footprint, which spans (k - 1)/k of a k-cell side; four cells per side
    // keeps that core at IoU >= 0.5625 with the target.
    let target = place_rect(
        rng,
        spec,
        MIN_TARGET_SIDE,
        (gw / 2).max(MIN_TARGET_SIDE),
        (gh / 2).max(MIN_TARGET_SIDE),
        &[],
    )?;
    let mut taken = vec![target];
    for _ in 0..spec.n_distractors {
        let r = place_rect(rng, spec, 1, (gw / 4).max(1), (gh / 4).max(1), &taken)?;
        taken.push(r);
    }
    let (tokens, root_index) = make_tokens(rng, spec.tokens);
    Ok(SampleLayout {
        target,
        distractors: taken[1..].to_vec(),
        tokens,
        root_index,
    })
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn random_vec(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            return v;
        }
    }
}

/// Unit vector orthogonal to the unit vector `r`.
fn orthogonal_to(rng: &mut SplitMix64, r: &[f64]) -> Vec<f64> {
    loop {
        let q = random_vec(rng, r.len());
        let dot: f64 = q.iter().zip(r).map(|(a, b)| a * b).sum();
        let perp: Vec<f64> = q.iter().zip(r).map(|(a, b)| a - dot * b).collect();
        if perp.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            return unit(&perp);
        }
    }
}

fn along(r: &[f64], gamma: f64, q: &[f64]) -> Vec<f32> {
    unit(
        &r.iter()
            .zip(q)
            .map(|(a, b)| gamma * a + b)
            .collect::<Vec<_>>(),
    )
    .into_iter()
    .map(|v| v as f32)
    .collect()
}

/// Generate sample `index` under `out_dir/sample_NNNN/` and return the
/// manifest path relative to `out_dir`.
pub fn gen_sample(spec: &FixtureSpec, index: usize, out_dir: impl AsRef<Path>) -> Result<String> {
    let mut rng = SplitMix64::stream(spec.seed, index as u64);
    let lay = layout(spec, &mut rng)?;
    let name = format!("sample_{index:04}");
    let dir = out_dir.as_ref().join(&name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (w, h, l, n) = (spec.grid_width, spec.grid_height, spec.tokens, spec.heads);

    // attention: root token on the target, token t != root on distractor t mod D
    let mut attn = Vec::with_capacity(w * h * l * n);
    for x in 0..w {
        for y in 0..h {
            for t in 0..l {
                let rect = if t == lay.root_index {
                    &lay.target
                } else {
                    &lay.distractors[t % lay.distractors.len()]
                };
                let base = if rect.contains(x, y) { 1.0 } else { 0.0 };
                for _ in 0..n {
                    attn.push((base + spec.noise * rng.next_f64()) as f32);
                }
            }
        }
    }
    save_tensor(
        &Tensor::from_f32(vec![w, h, l, n], attn)?,
        dir.join("attention.rdtf"),
    )?;

    // proposals: target, distractors, one random mask; shuffled
    let gt = lay.target.to_mask(spec);
    let mut masks: Vec<(bool, Mask)> = vec![(true, gt.clone())];
    masks.extend(lay.distractors.iter().map(|r| (false, r.to_mask(spec))));
    let total = (spec.image_width * spec.image_height) as u64;
    let random = loop {
        let m = Mask::from_fn(spec.image_width, spec.image_height, |_, _| {
            u8::from(rng.next_f64() < 0.5)
        });
        let ones = m.count_ones();
        if ones > 0 && ones < total && masks.iter().all(|(_, o)| *o != m) {
            break m;
        }
    };
    masks.push((false, random));
    rng.shuffle(&mut masks);
    let stack: Vec<Mask> = masks.iter().map(|(_, m)| m.clone()).collect();
    save_tensor(
        &Tensor::from_mask_stack(&stack)?,
        dir.join("proposals.rdtf"),
    )?;
    save_tensor(&Tensor::from(&gt), dir.join("gt.rdtf"))?;

    // embeddings: distractors share one orthogonal direction between their
    // attn and crop vectors, which caps their cosine with r at 1/sqrt(5)
    let d = spec.embedding_dim;
    let r = unit(&random_vec(&mut rng, d));
    let mut attn_rows = Vec::with_capacity(stack.len() * d);
    let mut crop_rows = Vec::with_capacity(stack.len() * d);
    for (is_target, _) in &masks {
        let q = orthogonal_to(&mut rng, &r);
        let (ga, gc) = if *is_target {
            (10.0, 10.0)
        } else {
            (rng.next_f64() - 0.5, rng.next_f64() - 0.5)
        };
        attn_rows.extend(along(&r, ga, &q));
        crop_rows.extend(along(&r, gc, &q));
    }
    let p = stack.len();
    save_tensor(
        &Tensor::from_f32(vec![d], r.iter().map(|&v| v as f32).collect())?,
        dir.join("text.rdtf"),
    )?;
    save_tensor(
        &Tensor::from_f32(vec![p, d], attn_rows)?,
        dir.join("attn_emb.rdtf"),
    )?;
    save_tensor(
        &Tensor::from_f32(vec![p, d], crop_rows)?,
        dir.join("crop_emb.rdtf"),
    )?;

    // image: background tint, target red, distractors teal
    let bg = [
        90 + rng.range(0, 60) as u8,
        90 + rng.range(0, 60) as u8,
        90 + rng.range(0, 60) as u8,
    ];
    let distractor_masks: Vec<Mask> = lay.distractors.iter().map(|r| r.to_mask(spec)).collect();
    let mut image = Vec::with_capacity(spec.image_width * spec.image_height * 3);
    for x in 0..spec.image_width {
        for y in 0..spec.image_height {
            let px = if gt.get(x, y) == 1 {
                [200, 40, 40]
            } else if distractor_masks.iter().any(|m| m.get(x, y) == 1) {
                [40, 160, 160]
            } else {
                bg
            };
            image.extend_from_slice(&px);
        }
    }
    save_tensor(
        &Tensor::from_u8(vec![spec.image_width, spec.image_height, 3], image)?,
        dir.join("image.rdtf"),
    )?;

    let mut manifest = SampleManifest::new(
        spec.image_width,
        spec.image_height,
        lay.tokens,
        "attention.rdtf",
        &dir,
    );
    manifest.root_index = Some(lay.root_index);
    manifest.directions = Some(vec![]);
    manifest.proposals_path = Some("proposals.rdtf".into());
    manifest.embeddings = Some(EmbeddingPaths {
        text_vec_path: "text.rdtf".into(),
        attn_vec_path: "attn_emb.rdtf".into(),
        crop_vec_path: "crop_emb.rdtf".into(),
        dim: d,
    });
    manifest.gt_mask_path = Some("gt.rdtf".into());
    manifest.image_path = Some("image.rdtf".into());
    manifest.save(dir.join("manifest.json"))?;
    Ok(format!("{name}/manifest.json"))
}

/// Generate `spec.n_samples` samples and the `dataset.json` index.
pub fn gen_dataset(spec: &FixtureSpec, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = (0..spec.n_samples)
        .map(|i| gen_sample(spec, i, out_dir))
        .collect::<Result<Vec<_>>>()?;
    write_dataset_index(out_dir, &entries)
}
