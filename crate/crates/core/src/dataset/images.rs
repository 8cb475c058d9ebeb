//! 28×28 grayscale images: IDX and CSV loaders and augmentation.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
/// Labels are class ids below this.
pub const CLASSES: u32 = 10;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Idx,
    Csv,
}

impl FromStr for ImageFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(ImageFormat::Idx),
            "csv" => Ok(ImageFormat::Csv),
            other => Err(Error::InvalidParams(format!(
                "unknown image format `{other}`"
            ))),
        }
    }
}

impl ImageFormat {
    /// Guess from the file name: `.csv` is CSV, anything else IDX.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ImageFormat::Csv,
            _ => ImageFormat::Idx,
        }
    }
}

/// Flattened row-major images with one label each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledImages {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// The first `n` images (all of them if fewer).
    pub fn truncated(mut self, n: usize) -> Self {
        self.vectors.truncate(n);
        self.labels.truncate(n);
        self
    }
}

/// Load images and labels. For IDX, `path` is the image file and the label
/// file is found by [`idx_labels_path`].
pub fn load_images(path: &Path, format: ImageFormat) -> Result<LabeledImages> {
    match format {
        ImageFormat::Idx => {
            let labels = idx_labels_path(path).ok_or_else(|| {
                Error::format(
                    path,
                    "cannot derive the label file name (expected `images` in the name)",
                )
            })?;
            load_idx(path, &labels)
        }
        ImageFormat::Csv => load_csv(path),
    }
}

/// `train-images.idx3-ubyte` → `train-labels.idx1-ubyte`, and the same for
/// the `train-images-idx3-ubyte` spelling.
pub fn idx_labels_path(images: &Path) -> Option<PathBuf> {
    let name = images.file_name()?.to_str()?;
    if !name.contains("images") {
        return None;
    }
    let renamed = name.replace("images", "labels").replace("idx3", "idx1");
    Some(images.with_file_name(renamed))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_be_bytes(bytes.get(at..at + 4)?.try_into().ok()?))
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledImages> {
    let img = read(images)?;
    let lab = read(labels)?;
    let magic = be_u32(&img, 0).ok_or_else(|| Error::format(images, "file too short"))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            images,
            format!("bad IDX image magic {magic:#010x}"),
        ));
    }
    let count = be_u32(&img, 4).ok_or_else(|| Error::format(images, "file too short"))? as usize;
    let rows = be_u32(&img, 8).ok_or_else(|| Error::format(images, "file too short"))? as usize;
    let cols = be_u32(&img, 12).ok_or_else(|| Error::format(images, "file too short"))? as usize;
    if rows * cols != PIXELS {
        return Err(Error::format(
            images,
            format!("images are {rows}×{cols}, expected {SIDE}×{SIDE}"),
        ));
    }
    if img.len() != 16 + count * PIXELS {
        return Err(Error::format(
            images,
            format!(
                "expected {} bytes for {count} images, found {}",
                16 + count * PIXELS,
                img.len()
            ),
        ));
    }
    let magic = be_u32(&lab, 0).ok_or_else(|| Error::format(labels, "file too short"))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            labels,
            format!("bad IDX label magic {magic:#010x}"),
        ));
    }
    let n_labels = be_u32(&lab, 4).ok_or_else(|| Error::format(labels, "file too short"))? as usize;
    if n_labels != count || lab.len() != 8 + count {
        return Err(Error::format(
            labels,
            format!("{n_labels} labels for {count} images"),
        ));
    }
    let vectors = img[16..]
        .chunks_exact(PIXELS)
        .map(|c| c.iter().map(|&b| f64::from(b)).collect())
        .collect();
    let ids: Vec<u32> = lab[8..].iter().map(|&b| u32::from(b)).collect();
    if let Some(k) = ids.iter().position(|&l| l >= CLASSES) {
        return Err(Error::format(
            labels,
            format!("label {} at record {k} is not a class id", ids[k]),
        ));
    }
    Ok(LabeledImages {
        vectors,
        labels: ids,
    })
}

/// Rows of `label,pixel0,…,pixel783`. A first line that does not start with
/// a number is taken as a header.
pub fn load_csv(path: &Path) -> Result<LabeledImages> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = LabeledImages::default();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let first = fields.next().unwrap_or("");
        if k == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        let bad = |m: String| Error::format(path, format!("line {}: {m}", k + 1));
        let label = first
            .parse::<u32>()
            .ok()
            .filter(|&l| l < CLASSES)
            .ok_or_else(|| bad(format!("bad label `{first}`")))?;
        let pixels: Vec<f64> = fields
            .map(|f| match f.parse::<f64>() {
                Ok(v) if (0.0..=255.0).contains(&v) => Ok(v),
                _ => Err(bad(format!("bad pixel `{f}`"))),
            })
            .collect::<Result<_>>()?;
        if pixels.len() != PIXELS {
            return Err(bad(format!("{} pixels, expected {PIXELS}", pixels.len())));
        }
        out.vectors.push(pixels);
        out.labels.push(label);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Augmentation {
    Rotate,
    RotateCrop,
    RotateCropShift,
}

impl Augmentation {
    pub const ALL: [Augmentation; 3] = [
        Augmentation::Rotate,
        Augmentation::RotateCrop,
        Augmentation::RotateCropShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Augmentation::Rotate => "rotate",
            Augmentation::RotateCrop => "rotate-crop",
            Augmentation::RotateCropShift => "rotate-crop-shift",
        }
    }
}

impl FromStr for Augmentation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Augmentation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown augmentation `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    /// Rotation angle is uniform in `[-max, max]` degrees.
    pub max_degrees: f64,
    /// Side of the square cut out before scaling back to 28×28.
    pub crop: usize,
    /// Shift is uniform in `-max..=max` pixels on each axis.
    pub max_shift: i32,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            max_degrees: 50.0,
            crop: 24,
            max_shift: 3,
        }
    }
}

/// A random transform of `image`, fixed by `seed`.
pub fn augment(image: &[f64], op: Augmentation, params: &AugmentParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degrees = rng.gen_range(-params.max_degrees..=params.max_degrees);
    let mut out = rotate(image, degrees);
    if op != Augmentation::Rotate {
        let room = SIDE.saturating_sub(params.crop.clamp(1, SIDE));
        let (top, left) = (rng.gen_range(0..=room), rng.gen_range(0..=room));
        out = crop_resize(&out, top, left, params.crop.clamp(1, SIDE));
    }
    if op == Augmentation::RotateCropShift {
        let m = params.max_shift;
        let (dx, dy) = (rng.gen_range(-m..=m), rng.gen_range(-m..=m));
        out = shift(&out, dx, dy);
    }
    out
}

/// Bilinear sample with zeros outside the image.
fn sample(image: &[f64], y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let pixel = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= SIDE as f64 || c >= SIDE as f64 {
            0.0
        } else {
            image[r as usize * SIDE + c as usize]
        }
    };
    let mut v = 0.0;
    for (r, wy) in [(y0, 1.0 - fy), (y0 + 1.0, fy)] {
        for (c, wx) in [(x0, 1.0 - fx), (x0 + 1.0, fx)] {
            if wy * wx != 0.0 {
                v += wy * wx * pixel(r, c);
            }
        }
    }
    v
}

/// Rotate counter-clockwise (as displayed, rows running down) about the
/// image center, bilinear, zero fill.
pub fn rotate(image: &[f64], degrees: f64) -> Vec<f64> {
    let (s, c) = degrees.to_radians().sin_cos();
    let mid = (SIDE as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; PIXELS];
    for r in 0..SIDE {
        for col in 0..SIDE {
            let (y, x) = (r as f64 - mid, col as f64 - mid);
            // inverse rotation gives the source point
            let sy = c * y + s * x + mid;
            let sx = -s * y + c * x + mid;
            out[r * SIDE + col] = sample(image, sy, sx);
        }
    }
    out
}

/// Cut the `size`×`size` block at `(top, left)` and scale it back to 28×28.
pub fn crop_resize(image: &[f64], top: usize, left: usize, size: usize) -> Vec<f64> {
    let scale = size as f64 / SIDE as f64;
    let mut out = vec![0.0; PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            // pixel centers map onto pixel centers
            let sy = top as f64 + (r as f64 + 0.5) * scale - 0.5;
            let sx = left as f64 + (c as f64 + 0.5) * scale - 0.5;
            out[r * SIDE + c] = sample(image, sy, sx);
        }
    }
    out
}

/// Translate by whole pixels (`dx` right, `dy` down), zero fill.
pub fn shift(image: &[f64], dx: i32, dy: i32) -> Vec<f64> {
    let mut out = vec![0.0; PIXELS];
    for r in 0..SIDE as i32 {
        for c in 0..SIDE as i32 {
            let (sr, sc) = (r - dy, c - dx);
            if (0..SIDE as i32).contains(&sr) && (0..SIDE as i32).contains(&sc) {
                out[(r * SIDE as i32 + c) as usize] = image[(sr * SIDE as i32 + sc) as usize];
            }
        }
    }
    out
}
