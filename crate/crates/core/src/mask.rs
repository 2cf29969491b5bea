//! Mask data model and file I/O.
//!
//! Masks are held as `f64` values in `[0, 1]`; 8-bit quantization only
//! happens at the file boundary (`g / 255` on load, `round(v * 255)` on save).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageReader};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `width x height` grid of real values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("zero-sized mask {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "{} values for a {width}x{height} mask",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidMask(format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// All-zero mask. Panics on a zero dimension.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Constant mask. Panics on a zero dimension or a value outside `[0, 1]`.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "zero-sized mask");
        assert!((0.0..=1.0).contains(&value), "value outside [0, 1]");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    /// Builds a mask from `f(x, y)`, clamping results into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "zero-sized mask");
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn from_gray_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let values = bytes.iter().map(|&g| f64::from(g) / 255.0).collect();
        Self::new(width, height, values)
    }

    pub fn to_gray_bytes(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn same_shape(&self, other: &SaliencyMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_same_shape(&self, other: &SaliencyMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            })
        }
    }

    /// Pixelwise maximum of two equally sized masks.
    pub fn union(&self, other: &SaliencyMap) -> Result<SaliencyMap> {
        self.ensure_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max(*b))
            .collect();
        Ok(SaliencyMap {
            width: self.width,
            height: self.height,
            values,
        })
    }

    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> SaliencyMap {
        SaliencyMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// 1 where the input is strictly greater than `threshold`, else 0.
pub fn binarize(mask: &SaliencyMap, threshold: f64) -> SaliencyMap {
    mask.map_values(|v| if v > threshold { 1.0 } else { 0.0 })
}

/// Loads a PNG (or any format the `image` crate decodes) as a saliency map.
///
/// 8-bit grayscale is read as `g / 255`. 8-bit RGB(A) and gray-alpha inputs are
/// reduced to the mean of their color channels first; alpha is ignored.
pub fn load_mask(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: "zero-sized image".into(),
        });
    }
    let values: Vec<f64> = match &img {
        DynamicImage::ImageLuma8(buf) => buf.as_raw().iter().map(|&g| f64::from(g) / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf
            .as_raw()
            .chunks_exact(2)
            .map(|px| f64::from(px[0]) / 255.0)
            .collect(),
        DynamicImage::ImageRgb8(buf) => rgb_mean(buf.as_raw(), 3),
        DynamicImage::ImageRgba8(buf) => rgb_mean(buf.as_raw(), 4),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                reason: format!("unsupported pixel format {:?}", other.color()),
            })
        }
    };
    SaliencyMap::new(width, height, values)
}

fn rgb_mean(raw: &[u8], stride: usize) -> Vec<f64> {
    raw.chunks_exact(stride)
        .map(|px| (f64::from(px[0]) + f64::from(px[1]) + f64::from(px[2])) / (3.0 * 255.0))
        .collect()
}

/// Writes the mask as an 8-bit grayscale PNG.
pub fn save_mask(mask: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = GrayImage::from_raw(mask.width as u32, mask.height as u32, mask.to_gray_bytes())
        .expect("buffer length matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// A predicted mask with an optional quality score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mask: SaliencyMap,
    pub quality_score: Option<f64>,
}

impl Prediction {
    pub fn new(mask: SaliencyMap, quality_score: Option<f64>) -> Result<Self> {
        if let Some(s) = quality_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "quality score {s} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            mask,
            quality_score,
        })
    }

    pub fn unscored(mask: SaliencyMap) -> Self {
        Self {
            mask,
            quality_score: None,
        }
    }
}

/// One evaluation unit: an image's ground truths and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub gts: Vec<SaliencyMap>,
    pub preds: Vec<Prediction>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, gts: Vec<SaliencyMap>, preds: Vec<Prediction>) -> Result<Self> {
        let record = Self {
            id: id.into(),
            gts,
            preds,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        let first = self
            .gts
            .first()
            .ok_or_else(|| invalid("no ground-truth masks".into()))?;
        if self.preds.is_empty() {
            return Err(invalid("no predicted masks".into()));
        }
        let masks = self.gts.iter().chain(self.preds.iter().map(|p| &p.mask));
        for m in masks {
            if !m.same_shape(first) {
                return Err(invalid(format!(
                    "dimension mismatch: {}x{} vs {}x{}",
                    m.width(),
                    m.height(),
                    first.width(),
                    first.height()
                )));
            }
        }
        for (i, p) in self.preds.iter().enumerate() {
            if let Some(s) = p.quality_score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(invalid(format!("prediction {i} score {s} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.gts[0].width()
    }

    pub fn height(&self) -> usize {
        self.gts[0].height()
    }
}

/// Manifest document as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    pub images: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub gts: Vec<String>,
    pub preds: Vec<PredEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredEntry {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// A parsed manifest with its path-resolution root.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Loads every referenced mask, in file order.
    pub fn load_records(&self) -> Result<Vec<ImageRecord>> {
        self.entries
            .par_iter()
            .map(|entry| {
                let gts = entry
                    .gts
                    .iter()
                    .map(|p| load_mask(self.resolve(p)))
                    .collect::<Result<Vec<_>>>()?;
                let preds = entry
                    .preds
                    .iter()
                    .map(|p| {
                        Ok(Prediction {
                            mask: load_mask(self.resolve(&p.path))?,
                            quality_score: p.score,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ImageRecord::new(entry.id.clone(), gts, preds)
            })
            .collect()
    }
}

/// Parses a manifest document without touching the referenced masks.
pub fn parse_manifest(text: &str, manifest_dir: &Path) -> Result<Manifest> {
    let doc: ManifestFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidManifest(format!("malformed document: {e}")))?;
    let root = match &doc.root {
        Some(r) => manifest_dir.join(r),
        None => manifest_dir.to_path_buf(),
    };
    let manifest = Manifest {
        root,
        entries: doc.images,
    };
    validate_entries(&manifest)?;
    Ok(manifest)
}

fn validate_entries(manifest: &Manifest) -> Result<()> {
    if manifest.entries.is_empty() {
        return Err(Error::InvalidManifest("no images".into()));
    }
    let mut seen = HashSet::new();
    for entry in &manifest.entries {
        if !seen.insert(entry.id.as_str()) {
            return Err(Error::InvalidManifest(format!("duplicate id `{}`", entry.id)));
        }
        if entry.gts.is_empty() {
            return Err(Error::InvalidRecord {
                id: entry.id.clone(),
                reason: "no ground-truth masks".into(),
            });
        }
        if entry.preds.is_empty() {
            return Err(Error::InvalidRecord {
                id: entry.id.clone(),
                reason: "no predicted masks".into(),
            });
        }
        let paths = entry.gts.iter().chain(entry.preds.iter().map(|p| &p.path));
        for p in paths {
            if !manifest.resolve(p).is_file() {
                return Err(Error::InvalidManifest(format!(
                    "`{}` references missing file {}",
                    entry.id,
                    manifest.resolve(p).display()
                )));
            }
        }
    }
    Ok(())
}

/// Reads a manifest and loads and validates all of its records.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(Manifest, Vec<ImageRecord>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    let manifest = parse_manifest(&text, dir)?;
    let records = manifest.load_records()?;
    Ok((manifest, records))
}

pub fn write_manifest(doc: &ManifestFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(doc).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
