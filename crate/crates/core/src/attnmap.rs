//! From the exported cross-attention stack to the image-resolution
//! correlation map of the root token.

use crate::error::{Error, Result};
use crate::grid::Map;
use crate::tensor::Tensor;

/// Post-softmax cross-attention `a[x, y, token, head]`, shape `w × h × l × N`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStack {
    w: usize,
    h: usize,
    l: usize,
    n: usize,
    data: Vec<f32>,
}

impl AttentionStack {
    pub fn new(w: usize, h: usize, l: usize, n: usize, data: Vec<f32>) -> Result<Self> {
        if w == 0 || h == 0 || l == 0 || n == 0 {
            return Err(Error::DimOverflow(vec![
                w as u32, h as u32, l as u32, n as u32,
            ]));
        }
        if data.len() != w * h * l * n {
            return Err(Error::DimMismatch(format!(
                "attention {w}x{h}x{l}x{n} needs {} values, got {}",
                w * h * l * n,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidTensor(format!(
                "attention values must be finite and non-negative, found {bad}"
            )));
        }
        Ok(AttentionStack { w, h, l, n, data })
    }

    pub fn from_tensor(tensor: &Tensor) -> Result<Self> {
        let values = tensor
            .as_f32()
            .ok_or_else(|| Error::DimMismatch("attention must be f32".into()))?;
        match *tensor.dims() {
            [w, h, l, n] => AttentionStack::new(w, h, l, n, values.to_vec()),
            ref other => Err(Error::DimMismatch(format!(
                "attention must be 4-D, got {other:?}"
            ))),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_f32(vec![self.w, self.h, self.l, self.n], self.data.clone())
            .expect("validated dims")
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.w, self.h)
    }

    pub fn tokens(&self) -> usize {
        self.l
    }

    pub fn heads(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, token: usize, head: usize) -> f32 {
        self.data[((x * self.h + y) * self.l + token) * self.n + head]
    }

    /// Multiply every value by `factor` (must be positive to stay valid).
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        AttentionStack::new(
            self.w,
            self.h,
            self.l,
            self.n,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Head-averaged attention `ā[x, y, token]`, shape `w × h × l`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadAverage {
    w: usize,
    h: usize,
    l: usize,
    data: Vec<f64>,
}

impl HeadAverage {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w, self.h, self.l)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, token: usize) -> f64 {
        self.data[(x * self.h + y) * self.l + token]
    }
}

/// Mean over the head axis.
pub fn average_heads(stack: &AttentionStack) -> HeadAverage {
    let inv = 1.0 / stack.n as f64;
    let data = stack
        .data
        .chunks_exact(stack.n)
        .map(|heads| heads.iter().map(|&v| f64::from(v)).sum::<f64>() * inv)
        .collect();
    HeadAverage {
        w: stack.w,
        h: stack.h,
        l: stack.l,
        data,
    }
}

/// The `w × h` slice of token `k`.
pub fn select_token_map(avg: &HeadAverage, k: usize) -> Result<Map> {
    if k >= avg.l {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: avg.l,
        });
    }
    Ok(Map::from_fn(avg.w, avg.h, |x, y| avg.get(x, y, k)))
}

/// `(m − min m) / (max m − min m + ε)`. A constant map becomes all zeros.
pub fn normalize_minmax(m: &Map, epsilon: f64) -> Map {
    let (lo, hi) = m
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let denom = hi - lo + epsilon;
    m.map(|v| (v - lo) / denom)
}

/// Per-axis sampling plan: for each output index, the two source indices and
/// the weight of the second one.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let u = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = u.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, u - i0 as f64)
        })
        .collect()
}

/// Bilinear resize to `width × height` with half-pixel centers: output index
/// `U` samples source coordinate `(U + 0.5)·w/W − 0.5`, clamped to the
/// source extent.
pub fn resize_bilinear(m: &Map, width: usize, height: usize) -> Map {
    let xs = axis_taps(m.width(), width);
    let ys = axis_taps(m.height(), height);
    Map::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let top = m.get(x0, y0) * (1.0 - fy) + m.get(x0, y1) * fy;
        let bottom = m.get(x1, y0) * (1.0 - fy) + m.get(x1, y1) * fy;
        top * (1.0 - fx) + bottom * fx
    })
}

/// Normalized, image-resolution attention map of one token.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMap {
    pub map: Map,
    pub source_token: usize,
}

impl CorrelationMap {
    pub fn dims(&self) -> (usize, usize) {
        self.map.dims()
    }
}

pub fn correlation_matrix(
    stack: &AttentionStack,
    k: usize,
    width: usize,
    height: usize,
    epsilon: f64,
) -> Result<CorrelationMap> {
    let avg = average_heads(stack);
    let slice = select_token_map(&avg, k)?;
    let map = resize_bilinear(&normalize_minmax(&slice, epsilon), width, height);
    Ok(CorrelationMap {
        map,
        source_token: k,
    })
}
