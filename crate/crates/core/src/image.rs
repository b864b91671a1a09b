//! Raster types shared by every stage: input images, saliency maps and the
//! resampling/ranking helpers that connect them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("image has zero area".into()));
        }
        if height * width * channels != data.len() {
            return Err(Error::mismatch(
                format!("{} values for {height}x{width}x{channels}", height * width * channels),
                data.len(),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidInput(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel values of pixel `index` (row-major).
    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub(crate) fn pixel_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += v;
            }
        }
        let n = self.num_pixels() as f64;
        sums.into_iter().map(|s| s / n).collect()
    }

    /// Blend with a constant fill: `x * mask + fill * (1 - mask)` per pixel.
    pub fn blend_with_fill(&self, mask: &[f64], fill: &[f64]) -> Result<Image> {
        if mask.len() != self.num_pixels() {
            return Err(Error::mismatch(self.num_pixels(), mask.len()));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for (px, &m) in self.data.chunks_exact(self.channels).zip(mask) {
            for (v, f) in px.iter().zip(fill) {
                data.push((v * m + f * (1.0 - m)).clamp(0.0, 1.0));
            }
        }
        Ok(Image { data, ..*self })
    }
}

/// How removed or masked-out pixels are filled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind", content = "rgb")]
pub enum Fill {
    Zero,
    /// Per-channel mean of the original image.
    #[default]
    Mean,
    /// Fixed color; a single value is broadcast over all channels.
    Color(Vec<f64>),
}

impl Fill {
    pub fn values_for(&self, image: &Image) -> Result<Vec<f64>> {
        let c = image.channels();
        match self {
            Fill::Zero => Ok(vec![0.0; c]),
            Fill::Mean => Ok(image.channel_means()),
            Fill::Color(rgb) if rgb.len() == 1 => Ok(vec![rgb[0]; c]),
            Fill::Color(rgb) if rgb.len() == c => Ok(rgb.clone()),
            Fill::Color(rgb) => Err(Error::mismatch(format!("{c} fill channels"), rgb.len())),
        }
    }
}

/// Real-valued per-pixel importance grid, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height * width != data.len() {
            return Err(Error::mismatch(
                format!("{} values for {height}x{width}", height * width),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("saliency values must be finite".into()));
        }
        Ok(SaliencyMap {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        SaliencyMap {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        SaliencyMap {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_shape(&self, other: &SaliencyMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn check_shape(&self, other: &SaliencyMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ))
        }
    }

    /// Element-wise map producing a new grid of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SaliencyMap {
        SaliencyMap {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn zip_with(&self, other: &SaliencyMap, f: impl Fn(f64, f64) -> f64) -> Result<SaliencyMap> {
        self.check_shape(other)?;
        Ok(SaliencyMap {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        })
    }

    /// Upsample (or downsample) to `target_h x target_w`.
    pub fn resized(&self, target_h: usize, target_w: usize) -> Result<SaliencyMap> {
        upsample(self, target_h, target_w)
    }
}

/// Bilinear resampling with the align-corners=false convention: output pixel
/// centers map to `(i + 0.5) * in / out - 0.5` in source coordinates, clamped
/// to the source grid.
pub fn upsample(map: &SaliencyMap, target_h: usize, target_w: usize) -> Result<SaliencyMap> {
    if map.is_empty() {
        return Err(Error::EmptyMap);
    }
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidInput("target dimensions must be >= 1".into()));
    }
    if map.height == target_h && map.width == target_w {
        return Ok(map.clone());
    }
    let data = bilinear(&map.data, map.height, map.width, target_h, target_w);
    Ok(SaliencyMap {
        height: target_h,
        width: target_w,
        data,
    })
}

pub(crate) fn bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let rows: Vec<(usize, usize, f64)> = (0..out_h).map(|i| source_coord(i, h, out_h)).collect();
    let cols: Vec<(usize, usize, f64)> = (0..out_w).map(|j| source_coord(j, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bottom = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let x = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let lo = (x.floor() as usize).min(src_len - 1);
    let hi = (lo + 1).min(src_len - 1);
    let frac = if hi == lo { 0.0 } else { x - lo as f64 };
    (lo, hi, frac)
}

/// Pixel indices in descending saliency order. Ties keep ascending row-major
/// index so that deletion curves are reproducible.
pub fn pixel_order(map: &SaliencyMap) -> Vec<usize> {
    let mut order: Vec<usize> = (0..map.data.len()).collect();
    order.sort_by(|&a, &b| map.data[b].total_cmp(&map.data[a]).then(a.cmp(&b)));
    order
}
