//! Tissue patch sampling from an RGB slide raster: tile, drop background
//! tiles by an HSV color test, cluster the rest on a coarse color descriptor
//! and draw a fixed fraction of every cluster.

use std::io::Write;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::diffcore::Rng;
use crate::error::{Error, Result};

use super::kmeans::kmeans;

pub const KMEANS_ITERATIONS: usize = 25;
/// Descriptor grid: each patch is summarized by the mean RGB of a 3x3 grid
/// of blocks (27 values, scaled to [0, 1]).
pub const DESCRIPTOR_GRID: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    pub patch_size: u32,
    pub sat_threshold: f64,
    pub bright_threshold: f64,
    pub k: usize,
    pub fraction: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            patch_size: 64,
            sat_threshold: 0.05,
            bright_threshold: 0.9,
            k: 9,
            fraction: 0.10,
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < DESCRIPTOR_GRID {
            return Err(Error::config("patch_size", format!("must be at least {DESCRIPTOR_GRID}")));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::config("fraction", "must be in (0, 1]"));
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PatchPick {
    pub x: u32,
    pub y: u32,
    pub cluster_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSelection {
    pub patch_size: u32,
    /// Sorted by `(y, x)`.
    pub selections: Vec<PatchPick>,
    pub clusters: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub total_patches: usize,
    pub tissue_patches: usize,
    /// Set when no tile passed the tissue test.
    pub no_tissue: bool,
}

/// True for bright, unsaturated (white-ish) pixels.
pub fn is_background(rgb: [u8; 3], config: &PatchConfig) -> bool {
    let max = *rgb.iter().max().unwrap() as f64;
    let min = *rgb.iter().min().unwrap() as f64;
    let value = max / 255.0;
    let saturation = if max == 0.0 { 0.0 } else { (max - min) / max };
    value > config.bright_threshold && saturation < config.sat_threshold
}

fn tissue_fraction(img: &RgbImage, x0: u32, y0: u32, s: u32, config: &PatchConfig) -> f64 {
    let mut tissue = 0usize;
    for y in y0..y0 + s {
        for x in x0..x0 + s {
            if !is_background(img.get_pixel(x, y).0, config) {
                tissue += 1;
            }
        }
    }
    tissue as f64 / (s * s) as f64
}

fn descriptor(img: &RgbImage, x0: u32, y0: u32, s: u32) -> Vec<f64> {
    let g = DESCRIPTOR_GRID;
    let mut out = Vec::with_capacity((g * g * 3) as usize);
    for by in 0..g {
        for bx in 0..g {
            let (xa, xb) = (x0 + bx * s / g, x0 + (bx + 1) * s / g);
            let (ya, yb) = (y0 + by * s / g, y0 + (by + 1) * s / g);
            let mut sum = [0.0f64; 3];
            for y in ya..yb {
                for x in xa..xb {
                    let p = img.get_pixel(x, y).0;
                    (0..3).for_each(|c| sum[c] += p[c] as f64);
                }
            }
            let count = ((xb - xa) * (yb - ya)) as f64 * 255.0;
            out.extend(sum.iter().map(|v| v / count));
        }
    }
    out
}

/// Number drawn from a cluster of `size` patches. The small offset keeps
/// products such as `0.1 * 30` from rounding up past an integer.
pub fn per_cluster_quota(fraction: f64, size: usize) -> usize {
    ((fraction * size as f64 - 1e-9).ceil().max(0.0) as usize).min(size)
}

pub fn sample_patches(img: &RgbImage, config: &PatchConfig, rng: &mut Rng) -> Result<PatchSelection> {
    config.validate()?;
    let s = config.patch_size;
    if img.width() < s || img.height() < s {
        return Err(Error::Data(format!(
            "image {}x{} is smaller than patch size {s}",
            img.width(),
            img.height()
        )));
    }
    let mut origins = Vec::new();
    let mut total = 0;
    for y in (0..=img.height() - s).step_by(s as usize) {
        for x in (0..=img.width() - s).step_by(s as usize) {
            total += 1;
            if tissue_fraction(img, x, y, s, config) >= 0.5 {
                origins.push((x, y));
            }
        }
    }
    if origins.is_empty() {
        log::warn!("sample_patches: no tissue patches found");
        return Ok(PatchSelection {
            patch_size: s,
            selections: Vec::new(),
            clusters: Vec::new(),
            cluster_sizes: Vec::new(),
            total_patches: total,
            tissue_patches: 0,
            no_tissue: true,
        });
    }

    let descriptors: Vec<Vec<f64>> = origins.iter().map(|&(x, y)| descriptor(img, x, y, s)).collect();
    let km = kmeans(&descriptors, config.k.min(origins.len()), KMEANS_ITERATIONS, rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); km.centroids.len()];
    for (i, &c) in km.assignments.iter().enumerate() {
        members[c].push(i);
    }
    let mut selections = Vec::new();
    for (c, m) in members.iter_mut().enumerate() {
        let quota = per_cluster_quota(config.fraction, m.len());
        rng.shuffle(m);
        for &i in &m[..quota] {
            let (x, y) = origins[i];
            selections.push(PatchPick { x, y, cluster_id: c });
        }
    }
    selections.sort_by_key(|p| (p.y, p.x));
    Ok(PatchSelection {
        patch_size: s,
        selections,
        clusters: km.centroids,
        cluster_sizes: members.iter().map(Vec::len).collect(),
        total_patches: total,
        tissue_patches: origins.len(),
        no_tissue: false,
    })
}

pub fn write_selection_csv(selection: &PatchSelection, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "cluster_id"])?;
    for p in &selection.selections {
        w.serialize((p.x, p.y, p.cluster_id))?;
    }
    w.flush().map_err(|e| Error::io("<patch csv>", e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SelectionSidecar<'a> {
    pub config: &'a PatchConfig,
    pub image_width: u32,
    pub image_height: u32,
    pub total_patches: usize,
    pub tissue_patches: usize,
    pub selected: usize,
    pub clusters: usize,
    pub cluster_sizes: &'a [usize],
    pub selected_per_cluster: Vec<usize>,
    pub no_tissue: bool,
}

impl PatchSelection {
    pub fn sidecar<'a>(&'a self, config: &'a PatchConfig, img: &RgbImage) -> SelectionSidecar<'a> {
        let mut per = vec![0; self.clusters.len()];
        self.selections.iter().for_each(|p| per[p.cluster_id] += 1);
        SelectionSidecar {
            config,
            image_width: img.width(),
            image_height: img.height(),
            total_patches: self.total_patches,
            tissue_patches: self.tissue_patches,
            selected: self.selections.len(),
            clusters: self.clusters.len(),
            cluster_sizes: &self.cluster_sizes,
            selected_per_cluster: per,
            no_tissue: self.no_tissue,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn half_white(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            if x < w / 2 {
                Rgb([255, 255, 255])
            } else {
                let shade = ((x / 64 + y / 64) % 3) as u8 * 30;
                Rgb([230 - shade, 150 - shade, 190 - shade])
            }
        })
    }

    #[test]
    fn background_test() {
        let c = PatchConfig::default();
        assert!(is_background([255, 255, 255], &c));
        assert!(is_background([240, 240, 235], &c));
        assert!(!is_background([255, 192, 203], &c));
        assert!(!is_background([20, 20, 20], &c));
    }

    #[test]
    fn white_half_never_selected() {
        let img = half_white(512, 512);
        let c = PatchConfig { fraction: 1.0, ..Default::default() };
        let sel = sample_patches(&img, &c, &mut Rng::new(0)).unwrap();
        assert_eq!(sel.total_patches, 64);
        assert_eq!(sel.tissue_patches, 32);
        assert_eq!(sel.selections.len(), 32);
        assert!(sel.selections.iter().all(|p| p.x >= 256 && p.x % 64 == 0 && p.y % 64 == 0));
    }

    #[test]
    fn tenth_of_each_cluster() {
        let img = half_white(512, 512);
        let sel = sample_patches(&img, &PatchConfig::default(), &mut Rng::new(1)).unwrap();
        for (c, &size) in sel.cluster_sizes.iter().enumerate() {
            let got = sel.selections.iter().filter(|p| p.cluster_id == c).count();
            assert_eq!(got, (size as f64 / 10.0).ceil() as usize);
        }
    }

    #[test]
    fn quota_rounding() {
        assert_eq!(per_cluster_quota(0.1, 30), 3);
        assert_eq!(per_cluster_quota(0.1, 31), 4);
        assert_eq!(per_cluster_quota(0.1, 1), 1);
        assert_eq!(per_cluster_quota(1.0, 7), 7);
        assert_eq!(per_cluster_quota(0.1, 0), 0);
    }

    #[test]
    fn all_white_flags_no_tissue() {
        let img = RgbImage::from_pixel(128, 128, Rgb([255, 255, 255]));
        let sel = sample_patches(&img, &PatchConfig::default(), &mut Rng::new(0)).unwrap();
        assert!(sel.no_tissue && sel.selections.is_empty());
    }

    #[test]
    fn partial_tiles_dropped_and_small_images_rejected() {
        let img = RgbImage::from_pixel(100, 70, Rgb([200, 100, 150]));
        let sel = sample_patches(&img, &PatchConfig { fraction: 1.0, ..Default::default() }, &mut Rng::new(0)).unwrap();
        assert_eq!(sel.total_patches, 1);
        let small = RgbImage::from_pixel(10, 10, Rgb([0, 0, 0]));
        assert!(sample_patches(&small, &PatchConfig::default(), &mut Rng::new(0)).is_err());
    }
}
