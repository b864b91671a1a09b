//! File formats: NPY heatmaps, PNG images, JSONL documents, and atomic
//! writes (temp file + rename in the destination directory).

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use ndarray::Array2;
use ndarray_npy::{ReadNpyExt, WriteNpyExt};

use crate::error::{Error, Result};
use crate::image::{Image, SaliencyMap};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// NPY v1.0, little-endian float32, shape `(H, W)`, C order.
pub fn encode_npy(map: &SaliencyMap) -> Result<Vec<u8>> {
    let data: Vec<f32> = map.data().iter().map(|&v| v as f32).collect();
    let arr = Array2::from_shape_vec((map.height(), map.width()), data)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    arr.write_npy(&mut out)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out)
}

/// Reads float32 (or float64) 2-D arrays.
pub fn decode_npy(bytes: &[u8]) -> Result<SaliencyMap> {
    let (shape, data) = match Array2::<f32>::read_npy(Cursor::new(bytes)) {
        Ok(a) => (a.dim(), a.iter().map(|&v| v as f64).collect::<Vec<_>>()),
        Err(_) => {
            let a = Array2::<f64>::read_npy(Cursor::new(bytes))
                .map_err(|e| Error::Format(format!("npy: {e}")))?;
            (a.dim(), a.iter().copied().collect())
        }
    };
    SaliencyMap::new(shape.0, shape.1, data)
}

pub fn write_npy(path: &Path, map: &SaliencyMap) -> Result<()> {
    write_atomic(path, &encode_npy(map)?)
}

pub fn read_npy(path: &Path) -> Result<SaliencyMap> {
    decode_npy(&fs::read(path)?)
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// 8-bit PNG, grayscale or RGB matching the image's channel count.
pub fn encode_png(x: &Image) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = x.data().iter().map(|&v| to_u8(v)).collect();
    let (w, h) = (x.width() as u32, x.height() as u32);
    let dynamic = if x.channels() == 1 {
        DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).expect("buffer size matches"),
        )
    } else {
        DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).expect("buffer size matches"),
        )
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decodes to grayscale when the PNG has a single color channel, RGB
/// otherwise (alpha dropped). Values are `byte / 255`.
pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let (channels, raw) = if gray {
        (1, img.to_luma8().into_raw())
    } else {
        (3, img.to_rgb8().into_raw())
    };
    Image::new(h, w, channels, raw.into_iter().map(|b| b as f64 / 255.0).collect())
}

pub fn read_png(path: &Path) -> Result<Image> {
    decode_png(&fs::read(path)?)
}

pub fn write_png(path: &Path, x: &Image) -> Result<()> {
    write_atomic(path, &encode_png(x)?)
}
