//! Deterministic synthetic multi-ground-truth benchmarks.
//!
//! A scene holds 2 or 3 non-overlapping shapes; its ground truths are object
//! subsets (single objects, a pair, the full union). Predictions are exact
//! copies of each ground truth plus degraded variants whose quality score is
//! their match score against the source ground truth.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::{save_mask, write_manifest, ImageRecord, ManifestEntry, ManifestFile, PredEntry, Prediction, SaliencyMap};
use crate::metrics::{match_score, MetricConfig};
use crate::preference::{MaskPair, Superior};

/// Minimum gap in pixels between object bounding boxes.
pub const OBJECT_MARGIN: usize = 2;
const PLACEMENT_ATTEMPTS: usize = 200;
const SCENE_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disk,
    Rectangle,
    Ring,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Disk, Shape::Rectangle, Shape::Ring];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// One shape per object; 2 or 3 objects.
    pub shapes: Vec<Shape>,
    pub seed: u64,
    /// Limit three-object scenes to three ground truths.
    pub cap_gts: bool,
}

impl SceneSpec {
    pub fn n_objects(&self) -> usize {
        self.shapes.len()
    }

    fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.shapes.len()) {
            return Err(Error::InvalidArgument(format!(
                "scenes hold 2 or 3 objects, got {}",
                self.shapes.len()
            )));
        }
        if self.width < 4 || self.height < 4 {
            return Err(Error::InvalidArgument("scenes need at least 4x4 pixels".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub gts: Vec<SaliencyMap>,
    pub objects: Vec<SaliencyMap>,
}

#[derive(Debug, Clone, Copy)]
struct BoundingBox {
    x0: usize,
    y0: usize,
    side_x: usize,
    side_y: usize,
}

impl BoundingBox {
    fn separated(&self, other: &BoundingBox) -> bool {
        self.x0 + self.side_x + OBJECT_MARGIN <= other.x0
            || other.x0 + other.side_x + OBJECT_MARGIN <= self.x0
            || self.y0 + self.side_y + OBJECT_MARGIN <= other.y0
            || other.y0 + other.side_y + OBJECT_MARGIN <= self.y0
    }
}

fn rasterize(shape: Shape, b: &BoundingBox, width: usize, height: usize) -> SaliencyMap {
    let cx = b.x0 as f64 + b.side_x as f64 / 2.0;
    let cy = b.y0 as f64 + b.side_y as f64 / 2.0;
    let r = b.side_x.min(b.side_y) as f64 / 2.0;
    SaliencyMap::from_fn(width, height, |x, y| {
        let inside_box = (b.x0..b.x0 + b.side_x).contains(&x) && (b.y0..b.y0 + b.side_y).contains(&y);
        if !inside_box {
            return 0.0;
        }
        let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
        let hit = match shape {
            Shape::Rectangle => true,
            Shape::Disk => d <= r,
            Shape::Ring => d <= r && d > r / 2.0,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    })
}

fn foreground_count(m: &SaliencyMap) -> usize {
    m.values().iter().filter(|&&v| v > 0.5).count()
}

/// Places the objects and builds the ground-truth set.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let min_area = ((w * h) as f64 * 0.01).ceil() as usize;
    let min_side = ((0.04 * (w * h) as f64).sqrt().ceil() as usize).max(3);
    let max_side = ((w.min(h) as f64 * 0.45) as usize).max(min_side);

    'scene: for _ in 0..SCENE_ATTEMPTS {
        let mut boxes: Vec<BoundingBox> = Vec::new();
        let mut objects = Vec::new();
        for &shape in &spec.shapes {
            let mut placed = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let side_x = rng.random_range(min_side..=max_side);
                let side_y = match shape {
                    Shape::Rectangle => rng.random_range(min_side..=max_side),
                    _ => side_x,
                };
                if side_x > w || side_y > h {
                    continue;
                }
                let b = BoundingBox {
                    x0: rng.random_range(0..=w - side_x),
                    y0: rng.random_range(0..=h - side_y),
                    side_x,
                    side_y,
                };
                if boxes.iter().all(|o| o.separated(&b)) {
                    let m = rasterize(shape, &b, w, h);
                    if foreground_count(&m) >= min_area {
                        placed = Some((b, m));
                        break;
                    }
                }
            }
            match placed {
                Some((b, m)) => {
                    boxes.push(b);
                    objects.push(m);
                }
                None => continue 'scene,
            }
        }
        let gts = ground_truths(&objects, spec.cap_gts)?;
        return Ok(Scene { gts, objects });
    }
    Err(Error::InvalidArgument(format!(
        "could not place {} objects in {w}x{h} without overlap",
        spec.n_objects()
    )))
}

fn ground_truths(objects: &[SaliencyMap], cap: bool) -> Result<Vec<SaliencyMap>> {
    let union_all = objects[1..]
        .iter()
        .try_fold(objects[0].clone(), |acc, o| acc.union(o))?;
    if objects.len() == 2 {
        return Ok(vec![objects[0].clone(), objects[1].clone(), union_all]);
    }
    let areas: Vec<usize> = objects.iter().map(foreground_count).collect();
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let (a, b) = pairs
        .iter()
        .copied()
        .fold(None::<(usize, usize)>, |best, p| match best {
            Some(q) if areas[q.0] + areas[q.1] >= areas[p.0] + areas[p.1] => Some(q),
            _ => Some(p),
        })
        .expect("three candidate pairs");
    let largest_pair = objects[a].union(&objects[b])?;
    if cap {
        let largest = (0..objects.len())
            .fold(0, |best, i| if areas[i] > areas[best] { i } else { best });
        Ok(vec![objects[largest].clone(), largest_pair, union_all])
    } else {
        let mut gts = objects.to_vec();
        gts.push(largest_pair);
        gts.push(union_all);
        Ok(gts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradationKind {
    Erode,
    Dilate,
    Holes,
    GrayWash,
    DropComponent,
}

impl DegradationKind {
    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Erode => "erode",
            DegradationKind::Dilate => "dilate",
            DegradationKind::Holes => "holes",
            DegradationKind::GrayWash => "gray_wash",
            DegradationKind::DropComponent => "drop_component",
        }
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "erode" => DegradationKind::Erode,
            "dilate" => DegradationKind::Dilate,
            "holes" => DegradationKind::Holes,
            "gray_wash" => DegradationKind::GrayWash,
            "drop_component" => DegradationKind::DropComponent,
            other => return Err(Error::InvalidArgument(format!("unknown degradation `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degradation {
    pub kind: DegradationKind,
    pub severity: u32,
}

impl Degradation {
    pub fn new(kind: DegradationKind, severity: u32) -> Self {
        Self { kind, severity }
    }
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.severity)
    }
}

/// Parses `kind:severity`.
impl FromStr for Degradation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, sev) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("expected kind:severity, got `{s}`")))?;
        let severity = sev
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad severity in `{s}`")))?;
        Ok(Self {
            kind: kind.trim().parse()?,
            severity,
        })
    }
}

/// Parses a comma-separated degradation schedule; empty input is an empty schedule.
pub fn parse_schedule(s: &str) -> Result<Vec<Degradation>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

/// Applies a degradation to a binary mask. Severity 0 returns the input.
pub fn degrade(mask: &SaliencyMap, d: Degradation, seed: u64) -> SaliencyMap {
    if d.severity == 0 {
        return mask.clone();
    }
    let s = d.severity as usize;
    match d.kind {
        DegradationKind::Erode => (0..s).fold(mask.clone(), |m, _| morph_step(&m, false)),
        DegradationKind::Dilate => (0..s).fold(mask.clone(), |m, _| morph_step(&m, true)),
        DegradationKind::Holes => patches(mask, s, 1, seed, |_| 0.0),
        DegradationKind::GrayWash => patches(mask, s, 2, seed, |v| if v > 0.5 { 0.5 } else { v }),
        DegradationKind::DropComponent => drop_components(mask, s),
    }
}

/// One 4-neighborhood erosion (`grow = false`) or dilation step.
/// Pixels outside the image count as background.
fn morph_step(m: &SaliencyMap, grow: bool) -> SaliencyMap {
    let (w, h) = (m.width(), m.height());
    let fg = |x: isize, y: isize| -> bool {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && m.get(x as usize, y as usize) > 0.5
    };
    SaliencyMap::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let cross = [fg(x, y), fg(x - 1, y), fg(x + 1, y), fg(x, y - 1), fg(x, y + 1)];
        let on = if grow {
            cross.iter().any(|&b| b)
        } else {
            cross.iter().all(|&b| b)
        };
        if on {
            1.0
        } else {
            0.0
        }
    })
}

/// `count` square patches of radius `radius`, centered on foreground pixels
/// of the input drawn with replacement; each patch pixel is mapped by `f`.
/// Patch centers form a prefix-stable sequence for a given seed, so higher
/// severities affect a superset of pixels.
fn patches(mask: &SaliencyMap, count: usize, radius: usize, seed: u64, f: impl Fn(f64) -> f64) -> SaliencyMap {
    let (w, h) = (mask.width(), mask.height());
    let fg: Vec<usize> = (0..mask.len()).filter(|&i| mask.values()[i] > 0.5).collect();
    let mut out = mask.clone();
    if fg.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = out.values_mut();
    for _ in 0..count {
        let c = fg[rng.random_range(0..fg.len())];
        let (cx, cy) = (c % w, c / w);
        for y in cy.saturating_sub(radius)..=(cy + radius).min(h - 1) {
            for x in cx.saturating_sub(radius)..=(cx + radius).min(w - 1) {
                let i = y * w + x;
                values[i] = f(mask.values()[i]);
            }
        }
    }
    out
}

/// 4-connected foreground components as pixel index lists, in scan order of
/// their first pixel.
pub fn components(mask: &SaliencyMap) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if seen[start] || mask.values()[start] <= 0.5 {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && mask.values()[j] > 0.5 {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        out.push(comp);
    }
    out
}

fn drop_components(mask: &SaliencyMap, count: usize) -> SaliencyMap {
    let mut comps = components(mask);
    // stable: equal sizes keep scan order
    comps.sort_by_key(Vec::len);
    let mut out = mask.clone();
    let values = out.values_mut();
    for comp in comps.iter().take(count) {
        for &i in comp {
            values[i] = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    /// Objects per scene (2 or 3).
    pub n_objects: usize,
    pub cap_gts: bool,
    pub seed: u64,
    /// Degraded variants added per image; variant `i` degrades ground truth `i mod J`.
    pub schedule: Vec<Degradation>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_images: 100,
            width: 512,
            height: 512,
            n_objects: 2,
            cap_gts: true,
            seed: 42,
            schedule: vec![
                Degradation::new(DegradationKind::Erode, 20),
                Degradation::new(DegradationKind::Holes, 400),
            ],
        }
    }
}

/// A generated prediction and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPrediction {
    pub mask: SaliencyMap,
    pub score: f64,
    pub source_gt: usize,
    pub degradation: Option<Degradation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedImage {
    pub id: String,
    pub gts: Vec<SaliencyMap>,
    pub preds: Vec<GeneratedPrediction>,
}

impl GeneratedImage {
    pub fn to_record(&self) -> ImageRecord {
        ImageRecord {
            id: self.id.clone(),
            gts: self.gts.clone(),
            preds: self
                .preds
                .iter()
                .map(|p| Prediction {
                    mask: p.mask.clone(),
                    quality_score: Some(p.score),
                })
                .collect(),
        }
    }
}

/// Independent per-image seed; the image stream does not depend on how many
/// images are generated or in which order.
fn image_seed(seed: u64, index: usize, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Round trip through 8-bit so in-memory masks equal what a reader loads back.
fn quantize(m: &SaliencyMap) -> SaliencyMap {
    SaliencyMap::from_gray_bytes(m.width(), m.height(), &m.to_gray_bytes()).expect("same dimensions")
}

pub fn generate_image(cfg: &BenchmarkConfig, index: usize, metric_cfg: &MetricConfig) -> Result<GeneratedImage> {
    let mut shape_rng = ChaCha8Rng::seed_from_u64(image_seed(cfg.seed, index, 1));
    let shapes = (0..cfg.n_objects)
        .map(|_| Shape::ALL[shape_rng.random_range(0..Shape::ALL.len())])
        .collect();
    let spec = SceneSpec {
        width: cfg.width,
        height: cfg.height,
        shapes,
        seed: image_seed(cfg.seed, index, 2),
        cap_gts: cfg.cap_gts,
    };
    let scene = generate_scene(&spec)?;
    let j = scene.gts.len();
    let mut preds = Vec::with_capacity(j + cfg.schedule.len());
    for (g, gt) in scene.gts.iter().enumerate() {
        preds.push(GeneratedPrediction {
            mask: gt.clone(),
            score: match_score(gt, gt, metric_cfg)?,
            source_gt: g,
            degradation: None,
        });
    }
    for (i, d) in cfg.schedule.iter().enumerate() {
        let g = i % j;
        let mask = quantize(&degrade(&scene.gts[g], *d, image_seed(cfg.seed, index, 100 + i as u64)));
        preds.push(GeneratedPrediction {
            score: match_score(&mask, &scene.gts[g], metric_cfg)?,
            mask,
            source_gt: g,
            degradation: Some(*d),
        });
    }
    Ok(GeneratedImage {
        id: format!("img_{index:05}"),
        gts: scene.gts,
        preds,
    })
}

fn validate_benchmark(cfg: &BenchmarkConfig) -> Result<()> {
    if cfg.n_images == 0 {
        return Err(Error::InvalidArgument("n_images must be positive".into()));
    }
    if !(2..=3).contains(&cfg.n_objects) {
        return Err(Error::InvalidArgument("n_objects must be 2 or 3".into()));
    }
    Ok(())
}

/// Generates all images in memory, in index order.
pub fn generate_images(cfg: &BenchmarkConfig, metric_cfg: &MetricConfig) -> Result<Vec<GeneratedImage>> {
    validate_benchmark(cfg)?;
    (0..cfg.n_images)
        .into_par_iter()
        .map(|i| generate_image(cfg, i, metric_cfg))
        .collect()
}

pub fn generate_records(cfg: &BenchmarkConfig, metric_cfg: &MetricConfig) -> Result<Vec<ImageRecord>> {
    Ok(generate_images(cfg, metric_cfg)?
        .iter()
        .map(GeneratedImage::to_record)
        .collect())
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes masks under `out_dir/{gt,pred}/` and `out_dir/manifest.json`;
/// returns the manifest path.
pub fn generate_benchmark(cfg: &BenchmarkConfig, metric_cfg: &MetricConfig, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    validate_benchmark(cfg)?;
    let out_dir = out_dir.as_ref();
    for sub in ["gt", "pred"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let entries = (0..cfg.n_images)
        .into_par_iter()
        .map(|i| {
            let img = generate_image(cfg, i, metric_cfg)?;
            let mut gts = Vec::with_capacity(img.gts.len());
            for (j, gt) in img.gts.iter().enumerate() {
                let rel = format!("gt/{}_gt{j}.png", img.id);
                save_mask(gt, out_dir.join(&rel))?;
                gts.push(rel);
            }
            let mut preds = Vec::with_capacity(img.preds.len());
            for (k, p) in img.preds.iter().enumerate() {
                let rel = format!("pred/{}_p{k}.png", img.id);
                save_mask(&p.mask, out_dir.join(&rel))?;
                preds.push(PredEntry {
                    path: rel,
                    score: Some(p.score),
                });
            }
            Ok(ManifestEntry {
                id: img.id,
                gts,
                preds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out_dir.join(MANIFEST_NAME);
    write_manifest(&ManifestFile { root: None, images: entries }, &path)?;
    Ok(path)
}

/// Preference pairs from generator ordering: for each image's first ground
/// truth, `kind` at `severity` (label A) against `severity + gap` (B side),
/// shuffled so that the superior side alternates.
pub fn ordered_degradation_pairs(
    cfg: &BenchmarkConfig,
    kind: DegradationKind,
    severity: u32,
    gap: u32,
) -> Result<Vec<MaskPair>> {
    validate_benchmark(cfg)?;
    let plain = BenchmarkConfig {
        schedule: Vec::new(),
        ..cfg.clone()
    };
    let metric_cfg = MetricConfig::default();
    (0..cfg.n_images)
        .into_par_iter()
        .map(|i| {
            let img = generate_image(&plain, i, &metric_cfg)?;
            let gt = img.gts[0].clone();
            let seed = image_seed(cfg.seed, i, 7);
            let better = quantize(&degrade(&gt, Degradation::new(kind, severity), seed));
            let worse = quantize(&degrade(&gt, Degradation::new(kind, severity + gap), seed));
            let (a, b, label) = if i % 2 == 0 {
                (better, worse, Superior::A)
            } else {
                (worse, better, Superior::B)
            };
            Ok(MaskPair {
                id: img.id,
                a,
                b,
                gt,
                label,
            })
        })
        .collect()
}
