//! Heatmap overlays in the usual figure style: a perceptually uniform ramp
//! blended over the input image.

use crate::error::Result;
use crate::image::{Image, SaliencyMap};

pub const DEFAULT_ALPHA: f64 = 0.5;

/// RGB8 raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Rgb8 {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Rgb8 {
    /// RGBA with opaque alpha, as canvases expect.
    pub fn to_rgba(&self) -> Vec<u8> {
        self.data
            .chunks_exact(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect()
    }
}

fn byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn image_to_rgb8(x: &Image) -> Rgb8 {
    let data = if x.channels() == 3 {
        x.data().iter().map(|&v| byte(v)).collect()
    } else {
        x.data().iter().flat_map(|&v| [byte(v); 3]).collect()
    };
    Rgb8 {
        height: x.height(),
        width: x.width(),
        data,
    }
}

/// Ramp position in `[0, 1]` per pixel, or `None` for an all-zero map.
fn intensities(map: &SaliencyMap) -> Option<Vec<f64>> {
    if map.data().iter().all(|&v| v == 0.0) {
        return None;
    }
    let (min, max) = (map.min(), map.max());
    Some(if max > min {
        map.data().iter().map(|v| (v - min) / (max - min)).collect()
    } else {
        vec![1.0; map.len()]
    })
}

/// Colorize a map on its own (min-max normalized).
pub fn colorize(map: &SaliencyMap) -> Rgb8 {
    let t = intensities(map).unwrap_or_else(|| vec![0.0; map.len()]);
    let data = t
        .into_iter()
        .flat_map(|v| {
            let c = colorous::VIRIDIS.eval_continuous(v);
            [c.r, c.g, c.b]
        })
        .collect();
    Rgb8 {
        height: map.height(),
        width: map.width(),
        data,
    }
}

/// Blend the colorized map over `x` at `alpha`. The map is resampled to the
/// image size; an all-zero map leaves the image untouched.
pub fn overlay(x: &Image, map: &SaliencyMap, alpha: f64) -> Result<Rgb8> {
    let base = image_to_rgb8(x);
    let map = map.resized(x.height(), x.width())?;
    let Some(t) = intensities(&map) else {
        return Ok(base);
    };
    let data = base
        .data
        .chunks_exact(3)
        .zip(t)
        .flat_map(|(px, v)| {
            let c = colorous::VIRIDIS.eval_continuous(v);
            let mix = |a: u8, b: u8| {
                ((1.0 - alpha) * a as f64 + alpha * b as f64)
                    .round()
                    .clamp(0.0, 255.0) as u8
            };
            [mix(px[0], c.r), mix(px[1], c.g), mix(px[2], c.b)]
        })
        .collect();
    Ok(Rgb8 { data, ..base })
}

#[cfg(feature = "io")]
pub fn write_rgb8_png(path: &std::path::Path, img: &Rgb8) -> Result<()> {
    let x = Image::new(
        img.height,
        img.width,
        3,
        img.data.iter().map(|&b| b as f64 / 255.0).collect(),
    )?;
    crate::io::write_png(path, &x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn picture() -> Image {
        Image::new(4, 6, 3, (0..72).map(|i| (i % 17) as f64 / 16.0).collect()).unwrap()
    }

    #[test]
    fn zero_map_leaves_image_unchanged() {
        let x = picture();
        let out = overlay(&x, &SaliencyMap::zeros(2, 3), DEFAULT_ALPHA).unwrap();
        assert_eq!(out, image_to_rgb8(&x));
    }

    #[test]
    fn constant_map_tints_uniformly() {
        let x = Image::filled(4, 6, 3, 0.2).unwrap();
        let out = overlay(&x, &SaliencyMap::constant(4, 6, 3.0), DEFAULT_ALPHA).unwrap();
        let first = &out.data[..3];
        assert!(out.data.chunks_exact(3).all(|p| p == first));
        assert_ne!(first, &image_to_rgb8(&x).data[..3]);
    }

    #[test]
    fn output_matches_input_dimensions() {
        let x = picture();
        let out = overlay(&x, &SaliencyMap::new(1, 2, vec![0.0, 1.0]).unwrap(), 0.5).unwrap();
        assert_eq!((out.height, out.width, out.data.len()), (4, 6, 72));
        let gray = Image::filled(3, 5, 1, 0.5).unwrap();
        assert_eq!(overlay(&gray, &SaliencyMap::constant(3, 5, 1.0), 0.5).unwrap().data.len(), 45);
    }
}
