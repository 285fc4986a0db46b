//! Binary PPM (P6) rendering of a predicted mask over the sample image.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::manifest::SampleManifest;

pub type Rgb = [u8; 3];

pub const CANVAS_GRAY: Rgb = [128, 128, 128];
pub const TINT: Rgb = [0, 0, 255];
pub const OUTLINE: Rgb = [0, 255, 0];

/// 50% blend toward `target`, rounding half up.
pub fn blend(p: Rgb, target: Rgb) -> Rgb {
    [0, 1, 2].map(|c| (u16::from(p[c]) + u16::from(target[c])).div_ceil(2) as u8)
}

/// Pixels of `mask` with at least one 4-neighbour outside it (or on the
/// image border).
pub fn boundary(mask: &Mask) -> Mask {
    let (w, h) = mask.dims();
    Mask::from_fn(w, h, |x, y| {
        if mask.get(x, y) == 0 {
            return 0;
        }
        let edge = x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || mask.get(x - 1, y) == 0
            || mask.get(x + 1, y) == 0
            || mask.get(x, y - 1) == 0
            || mask.get(x, y + 1) == 0;
        u8::from(edge)
    })
}

/// Tint `mask` onto `canvas` and outline `gt` when given.
pub fn render(canvas: &Grid<Rgb>, mask: &Mask, gt: Option<&Mask>) -> Result<Grid<Rgb>> {
    canvas.ensure_same_dims(mask)?;
    let mut out = Grid::from_fn(canvas.width(), canvas.height(), |x, y| {
        let p = canvas.get(x, y);
        if mask.get(x, y) != 0 {
            blend(p, TINT)
        } else {
            p
        }
    });
    if let Some(gt) = gt {
        canvas.ensure_same_dims(gt)?;
        let edge = boundary(gt);
        for x in 0..out.width() {
            for y in 0..out.height() {
                if edge.get(x, y) != 0 {
                    out.set(x, y, OUTLINE);
                }
            }
        }
    }
    Ok(out)
}

/// Encode as binary PPM: rows top to bottom, pixels left to right.
pub fn encode_ppm(img: &Grid<Rgb>) -> Vec<u8> {
    let (w, h) = img.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            out.extend_from_slice(&img.get(x, y));
        }
    }
    out
}

/// Base canvas for a manifest: its image when it has one, else gray.
pub fn canvas_for(manifest: &SampleManifest) -> Result<Grid<Rgb>> {
    let (w, h) = manifest.dims();
    if manifest.image_path.is_none() {
        return Ok(Grid::filled(w, h, CANVAS_GRAY));
    }
    let image = manifest.load_image()?;
    let px = image.as_u8().expect("validated u8 image");
    Ok(Grid::from_fn(w, h, |x, y| {
        let i = (x * h + y) * 3;
        [px[i], px[i + 1], px[i + 2]]
    }))
}

/// Render `mask` for `manifest` and write the PPM to `out`.
pub fn write_overlay(manifest: &SampleManifest, mask: &Mask, out: impl AsRef<Path>) -> Result<()> {
    let canvas = canvas_for(manifest)?;
    let gt = match manifest.gt_mask_path {
        Some(_) => Some(manifest.load_gt()?),
        None => None,
    };
    let img = render(&canvas, mask, gt.as_ref())?;
    let out = out.as_ref();
    fs::write(out, encode_ppm(&img)).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas() -> Grid<Rgb> {
        Grid::from_fn(4, 3, |x, y| [(x * 40) as u8, (y * 60) as u8, 17])
    }

    #[test]
    fn empty_mask_leaves_canvas() {
        let c = canvas();
        let out = render(&c, &Mask::filled(4, 3, 0), None).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn full_mask_blends_everything() {
        let c = canvas();
        let out = render(&c, &Mask::filled(4, 3, 1), None).unwrap();
        for x in 0..4 {
            for y in 0..3 {
                assert_eq!(out.get(x, y), blend(c.get(x, y), TINT));
                assert_ne!(out.get(x, y), c.get(x, y));
            }
        }
    }

    #[test]
    fn single_pixel_diff() {
        let c = Grid::filled(5, 4, CANVAS_GRAY);
        let mut m = Mask::filled(5, 4, 0);
        m.set(0, 0, 1);
        let a = encode_ppm(&c);
        let b = encode_ppm(&render(&c, &m, None).unwrap());
        assert_eq!(a.len(), b.len());
        let header = b"P6\n5 4\n255\n".len();
        let diff: Vec<usize> = (header..a.len())
            .step_by(3)
            .filter(|&i| a[i..i + 3] != b[i..i + 3])
            .collect();
        assert_eq!(diff, vec![header]);
        assert_eq!(&b[header..header + 3], &[64, 64, 192]);
    }

    #[test]
    fn gt_outline() {
        let c = Grid::filled(5, 5, CANVAS_GRAY);
        let gt = Mask::from_fn(5, 5, |x, y| {
            u8::from((1..4).contains(&x) && (1..4).contains(&y))
        });
        let out = render(&c, &Mask::filled(5, 5, 0), Some(&gt)).unwrap();
        assert_eq!(out.get(1, 1), OUTLINE);
        assert_eq!(out.get(2, 2), CANVAS_GRAY);
        assert_eq!(out.get(0, 0), CANVAS_GRAY);
    }

    #[test]
    fn ppm_header() {
        let bytes = encode_ppm(&Grid::filled(2, 1, [1, 2, 3]));
        assert_eq!(bytes, b"P6\n2 1\n255\n\x01\x02\x03\x01\x02\x03");
    }
}
