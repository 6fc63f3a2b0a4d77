//! Deterministic synthetic scenes.
//!
//! Ground truth is a tiling of the raster into axis-aligned rectangles, each a
//! fronto-parallel plane or a linear ramp. The scaleless map warps each region
//! with its own monotone curve
//!
//! ```text
//! z_raw = gain · d_max · (d / d_max)^gamma + offset
//! ```
//!
//! and is then min-max rescaled to `[0, 1]` over the whole raster. Within a
//! region `z` is strictly increasing in depth, but per-region gains, gammas and
//! offsets misalign regions against each other, which is exactly what a single
//! scale-and-shift cannot undo.
//!
//! Radar points are drawn at random valid pixels with Gaussian depth noise; a
//! fixed fraction is replaced by uniform range outliers along the same ray.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{join_list, KvConfig};
use crate::datamodel::{
    write_scene, DepthKind, DepthMap, Projection, RadarCloud, SceneSample, MANIFEST,
};
use crate::error::{Error, Result};

/// Monotone warp applied to one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionWarp {
    pub gamma: f64,
    /// Additive offset in meters.
    pub offset: f64,
    pub gain: f64,
}

impl RegionWarp {
    pub const IDENTITY: RegionWarp = RegionWarp {
        gamma: 1.0,
        offset: 0.0,
        gain: 1.0,
    };

    pub fn apply(&self, depth: f64, d_max: f64) -> f64 {
        self.gain * d_max * (depth / d_max).powf(self.gamma) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub regions: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// One warp per region.
    pub warps: Vec<RegionWarp>,
    pub points: usize,
    /// Standard deviation of radar depth noise, meters.
    pub depth_noise: f64,
    /// Fraction of radar points replaced by uniform outliers, in `[0, 1)`.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    /// 64×64, 3 regions, depths in [5, 80] m, 100 radar points, σ = 0.5 m,
    /// 10 % outliers.
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            regions: 3,
            d_min: 5.0,
            d_max: 80.0,
            warps: vec![RegionWarp::IDENTITY; 3],
            points: 100,
            depth_noise: 0.5,
            outlier_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.height == 0 || self.width == 0 {
            return fail(format!("raster {}×{} is empty", self.height, self.width));
        }
        if self.regions == 0 {
            return fail("need at least one region".into());
        }
        if self.regions > self.height * self.width {
            return fail(format!(
                "{} regions cannot tile a {}×{} raster",
                self.regions, self.height, self.width
            ));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max && self.d_max.is_finite()) {
            return fail(format!("need 0 < d_min < d_max, got [{}, {}]", self.d_min, self.d_max));
        }
        if self.warps.len() != self.regions {
            return fail(format!("{} warps for {} regions", self.warps.len(), self.regions));
        }
        for w in &self.warps {
            if !(w.gamma > 0.0 && w.gain > 0.0 && w.offset.is_finite()) {
                return fail(format!("invalid warp {w:?}"));
            }
        }
        if !(self.depth_noise >= 0.0 && self.depth_noise.is_finite()) {
            return fail(format!("depth noise must be ≥ 0, got {}", self.depth_noise));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return fail(format!("outlier fraction must be in [0, 1), got {}", self.outlier_fraction));
        }
        Ok(())
    }

    pub fn to_config(&self) -> KvConfig {
        let mut c = KvConfig::new();
        c.set("height", self.height);
        c.set("width", self.width);
        c.set("regions", self.regions);
        c.set("d_min", self.d_min);
        c.set("d_max", self.d_max);
        c.set("gammas", join_list(&self.warps.iter().map(|w| w.gamma).collect::<Vec<_>>()));
        c.set("offsets", join_list(&self.warps.iter().map(|w| w.offset).collect::<Vec<_>>()));
        c.set("gains", join_list(&self.warps.iter().map(|w| w.gain).collect::<Vec<_>>()));
        c.set("points", self.points);
        c.set("depth_noise", self.depth_noise);
        c.set("outlier_fraction", self.outlier_fraction);
        c.set("seed", self.seed);
        c
    }

    /// Reads a spec, falling back to [`SceneSpec::default`] for absent keys.
    /// Missing warp lists default to identity warps.
    pub fn from_config(c: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let regions = c.get_or("regions", d.regions)?;
        let gammas = c.get_list::<f64>("gammas")?.unwrap_or_else(|| vec![1.0; regions]);
        let offsets = c.get_list::<f64>("offsets")?.unwrap_or_else(|| vec![0.0; regions]);
        let gains = c.get_list::<f64>("gains")?.unwrap_or_else(|| vec![1.0; regions]);
        if gammas.len() != offsets.len() || gammas.len() != gains.len() {
            return Err(Error::Spec("gammas, offsets and gains differ in length".into()));
        }
        let spec = Self {
            height: c.get_or("height", d.height)?,
            width: c.get_or("width", d.width)?,
            regions,
            d_min: c.get_or("d_min", d.d_min)?,
            d_max: c.get_or("d_max", d.d_max)?,
            warps: gammas
                .into_iter()
                .zip(offsets)
                .zip(gains)
                .map(|((gamma, offset), gain)| RegionWarp { gamma, offset, gain })
                .collect(),
            points: c.get_or("points", d.points)?,
            depth_noise: c.get_or("depth_noise", d.depth_noise)?,
            outlier_fraction: c.get_or("outlier_fraction", d.outlier_fraction)?,
            seed: c.get_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Plane { depth: f64 },
    /// Linear in the column index, `start` at the left edge, `end` at the right.
    RampHorizontal { start: f64, end: f64 },
    /// Linear in the row index, `start` at the top edge, `end` at the bottom.
    RampVertical { start: f64, end: f64 },
}

/// Axis-aligned rectangle `[row, row + rows) × [col, col + cols)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    pub surface: Surface,
}

impl Region {
    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row + self.rows && c >= self.col && c < self.col + self.cols
    }

    pub fn depth_at(&self, r: usize, c: usize) -> f64 {
        let t = |pos: usize, len: usize| if len > 1 { pos as f64 / (len - 1) as f64 } else { 0.0 };
        match self.surface {
            Surface::Plane { depth } => depth,
            Surface::RampHorizontal { start, end } => start + (end - start) * t(c - self.col, self.cols),
            Surface::RampVertical { start, end } => start + (end - start) * t(r - self.row, self.rows),
        }
    }
}

/// Region layout plus the region index of every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub regions: Vec<Region>,
    pub labels: Vec<usize>,
}

/// Guillotine split of the raster into `spec.regions` rectangles with random
/// plane or ramp surfaces.
pub fn random_layout(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Region>> {
    spec.validate()?;
    let mut rects = vec![(0usize, 0usize, spec.height, spec.width)];
    while rects.len() < spec.regions {
        // Largest splittable rectangle; ties go to the earliest.
        let (idx, _) = rects
            .iter()
            .enumerate()
            .filter(|(_, r)| r.2 * r.3 >= 2)
            .max_by(|a, b| (a.1 .2 * a.1 .3).cmp(&(b.1 .2 * b.1 .3)).then(b.0.cmp(&a.0)))
            .expect("regions ≤ pixels guarantees a splittable rectangle");
        let (r, c, h, w) = rects.remove(idx);
        let split_rows = if h > 1 && w > 1 { h > w || (h == w && rng.random_bool(0.5)) } else { h > 1 };
        if split_rows {
            let cut = rng.random_range(1..h);
            rects.push((r, c, cut, w));
            rects.push((r + cut, c, h - cut, w));
        } else {
            let cut = rng.random_range(1..w);
            rects.push((r, c, h, cut));
            rects.push((r, c + cut, h, w - cut));
        }
    }
    Ok(rects
        .into_iter()
        .map(|(row, col, rows, cols)| {
            let kind = rng.random_range(0..4);
            let mut depth = || rng.random_range(spec.d_min..=spec.d_max);
            let surface = match kind {
                0 | 1 => Surface::Plane { depth: depth() },
                2 => Surface::RampHorizontal {
                    start: depth(),
                    end: depth(),
                },
                _ => Surface::RampVertical {
                    start: depth(),
                    end: depth(),
                },
            };
            Region {
                row,
                col,
                rows,
                cols,
                surface,
            }
        })
        .collect())
}

fn label_pixels(spec: &SceneSpec, regions: &[Region]) -> Result<Vec<usize>> {
    let mut labels = vec![usize::MAX; spec.height * spec.width];
    for (k, reg) in regions.iter().enumerate() {
        for r in reg.row..(reg.row + reg.rows).min(spec.height) {
            for c in reg.col..(reg.col + reg.cols).min(spec.width) {
                labels[r * spec.width + c] = k;
            }
        }
    }
    if labels.contains(&usize::MAX) {
        return Err(Error::Spec("regions do not cover the raster".into()));
    }
    Ok(labels)
}

/// Renders a scene from an explicit layout. Radar sampling draws from `rng`.
pub fn render_scene(
    spec: &SceneSpec,
    regions: &[Region],
    id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(SceneSample, SceneLayout)> {
    spec.validate()?;
    if regions.len() != spec.regions {
        return Err(Error::Spec(format!("{} regions given, spec says {}", regions.len(), spec.regions)));
    }
    let labels = label_pixels(spec, regions)?;
    let (h, w) = (spec.height, spec.width);

    let mut gt = vec![0.0; h * w];
    let mut z_raw = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let k = labels[i];
            let d = regions[k].depth_at(r, c).clamp(spec.d_min, spec.d_max);
            gt[i] = d;
            z_raw[i] = spec.warps[k].apply(d, spec.d_max);
        }
    }
    let lo = z_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: Vec<f64> = if hi > lo {
        z_raw.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
    } else {
        vec![1.0; h * w]
    };

    let scaleless = DepthMap::new(h, w, z, DepthKind::Scaleless)?;
    let ground_truth = DepthMap::new(h, w, gt, DepthKind::GroundTruth)?;
    let cloud = sample_radar(&ground_truth, spec.points, &RadarNoise::of(spec), rng)?;
    let sample = SceneSample::new(id, Some(spec.seed), scaleless, cloud, ground_truth)?;
    Ok((
        sample,
        SceneLayout {
            regions: regions.to_vec(),
            labels,
        },
    ))
}

/// Radar measurement model: Gaussian depth noise plus uniform outliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarNoise {
    pub depth_noise: f64,
    pub outlier_fraction: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl RadarNoise {
    pub fn of(spec: &SceneSpec) -> Self {
        Self {
            depth_noise: spec.depth_noise,
            outlier_fraction: spec.outlier_fraction,
            d_min: spec.d_min,
            d_max: spec.d_max,
        }
    }
}

impl Default for RadarNoise {
    fn default() -> Self {
        Self::of(&SceneSpec::default())
    }
}

/// `count` points at uniform-random valid pixels of `gt`, without replacement
/// while there are enough pixels; exactly `round(ρ·count)` of them are outliers.
pub fn sample_radar(gt: &DepthMap, count: usize, noise: &RadarNoise, rng: &mut ChaCha8Rng) -> Result<RadarCloud> {
    let valid: Vec<usize> = (0..gt.len()).filter(|&i| gt.values()[i] > 0.0).collect();
    if valid.is_empty() || count == 0 {
        return Ok(RadarCloud::default());
    }
    let picks: Vec<usize> = if count <= valid.len() {
        index::sample(rng, valid.len(), count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..valid.len())).collect()
    };
    let n_out = (noise.outlier_fraction * count as f64).round() as usize;
    let mut is_outlier = vec![false; count];
    for i in index::sample(rng, count, n_out.min(count)) {
        is_outlier[i] = true;
    }
    let normal = Normal::new(0.0, noise.depth_noise).map_err(|e| Error::Spec(e.to_string()))?;
    let proj = Projection::for_raster(gt.height(), gt.width());

    let points = picks
        .iter()
        .zip(&is_outlier)
        .map(|(&p, &outlier)| {
            let pix = valid[p];
            let (row, col) = (pix / gt.width(), pix % gt.width());
            let depth = if outlier {
                rng.random_range(noise.d_min..=noise.d_max)
            } else {
                (gt.values()[pix] + normal.sample(rng)).max(0.1)
            };
            proj.unproject(row, col, depth)
        })
        .collect();
    RadarCloud::new(points)
}

/// Three near-equal vertical strips, for hand-built fixtures.
fn strip_layout(surfaces: [Surface; 3], width: usize, height: usize) -> Vec<Region> {
    let w3 = width / 3;
    let widths = [w3, w3, width - 2 * w3];
    let mut col = 0;
    surfaces
        .iter()
        .zip(widths)
        .map(|(&surface, cols)| {
            let r = Region {
                row: 0,
                col,
                rows: height,
                cols,
                surface,
            };
            col += cols;
            r
        })
        .collect()
}

fn ramps(r: [(f64, f64); 3]) -> [Surface; 3] {
    r.map(|(start, end)| Surface::RampHorizontal { start, end })
}

fn fixture(surfaces: [Surface; 3], warps: [RegionWarp; 3], id: &str) -> Result<(SceneSample, SceneLayout)> {
    let spec = SceneSpec {
        warps: warps.to_vec(),
        depth_noise: 0.5,
        outlier_fraction: 0.0,
        seed: 1,
        ..SceneSpec::default()
    };
    let regions = strip_layout(surfaces, spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    render_scene(&spec, &regions, id, &mut rng)
}

/// Fixed 64×64 scene of three shallow ramps whose scaleless depth keeps the
/// true ordering but places the middle object at half its distance.
pub fn misalignment_fixture() -> Result<(SceneSample, SceneLayout)> {
    fixture(
        ramps([(10.0, 12.0), (48.0, 51.0), (60.0, 64.0)]),
        [
            RegionWarp::IDENTITY,
            RegionWarp {
                gamma: 1.0,
                offset: 0.0,
                gain: 0.5,
            },
            RegionWarp::IDENTITY,
        ],
        "misalignment",
    )
}

/// Fixed 64×64 three-object scene where the nearest object appears farthest
/// in the scaleless map, inverting the region ordering.
pub fn inversion_fixture() -> Result<(SceneSample, SceneLayout)> {
    fixture(
        ramps([(8.0, 14.0), (30.0, 40.0), (55.0, 70.0)]),
        [
            RegionWarp {
                gamma: 1.0,
                offset: 60.0,
                gain: 1.0,
            },
            RegionWarp::IDENTITY,
            RegionWarp {
                gamma: 1.0,
                offset: -10.0,
                gain: 1.0,
            },
        ],
        "inversion",
    )
}

/// Fixed 64×64 scene of three planes at 20, 40 and 60 m with offsets
/// 0, +12 and −12 m: no scale and shift gets within half the smallest
/// offset gap on average.
pub fn offset_fixture() -> Result<(SceneSample, SceneLayout)> {
    let warp = |offset| RegionWarp { offset, ..RegionWarp::IDENTITY };
    fixture(
        [20.0, 40.0, 60.0].map(|depth| Surface::Plane { depth }),
        [warp(0.0), warp(12.0), warp(-12.0)],
        "offsets",
    )
}

/// Scene with a seeded random layout.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneSample> {
    generate_scene_with_layout(spec, &format!("scene_{}", spec.seed)).map(|(s, _)| s)
}

pub fn generate_scene_with_layout(spec: &SceneSpec, id: &str) -> Result<(SceneSample, SceneLayout)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let regions = random_layout(spec, &mut rng)?;
    render_scene(spec, &regions, id, &mut rng)
}

/// Uniform ranges for per-scene warp draws in [`generate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpRanges {
    pub gamma: (f64, f64),
    /// Offsets as a fraction of `d_max`.
    pub offset_frac: (f64, f64),
    pub gain: (f64, f64),
}

impl Default for WarpRanges {
    fn default() -> Self {
        Self {
            gamma: (0.6, 1.6),
            offset_frac: (-0.15, 0.15),
            gain: (0.7, 1.3),
        }
    }
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:04}")
}

/// Numeric suffix of a scene id (`scene_0007` → 7).
pub fn scene_index(id: &str) -> Option<u64> {
    let digits: String = id
        .chars()
        .rev()
        .take_while(char::is_ascii_digit)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Spec of scene `index`: seed `seed + index`, warps drawn from `ranges`.
pub fn dataset_scene_spec(base: &SceneSpec, seed: u64, index: usize, ranges: &WarpRanges) -> SceneSpec {
    let scene_seed = seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
    rng.set_stream(1);
    let warps = (0..base.regions)
        .map(|_| RegionWarp {
            gamma: rng.random_range(ranges.gamma.0..=ranges.gamma.1),
            offset: rng.random_range(ranges.offset_frac.0..=ranges.offset_frac.1) * base.d_max,
            gain: rng.random_range(ranges.gain.0..=ranges.gain.1),
        })
        .collect();
    SceneSpec {
        warps,
        seed: scene_seed,
        ..base.clone()
    }
}

/// Generates `count` scenes in memory, identical to what [`generate_dataset`]
/// writes.
pub fn generate_scenes(base: &SceneSpec, count: usize, seed: u64) -> Result<Vec<SceneSample>> {
    if count == 0 {
        return Err(Error::Usage("scene count must be ≥ 1".into()));
    }
    let ranges = WarpRanges::default();
    (0..count)
        .map(|i| {
            let spec = dataset_scene_spec(base, seed, i, &ranges);
            generate_scene_with_layout(&spec, &scene_id(i)).map(|(s, _)| s)
        })
        .collect()
}

/// Writes `count` scenes, `manifest.txt` and `generator.cfg` into `dir`.
pub fn generate_dataset(dir: &Path, base: &SceneSpec, count: usize, seed: u64) -> Result<Vec<String>> {
    let scenes = generate_scenes(base, count, seed)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for s in &scenes {
        write_scene(dir, s)?;
        manifest.push_str(&s.id);
        manifest.push('\n');
    }
    let mpath = dir.join(MANIFEST);
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;

    let mut cfg = base.to_config();
    cfg.set("seed", seed);
    cfg.set("count", count);
    cfg.save(&dir.join("generator.cfg"))?;
    Ok(scenes.into_iter().map(|s| s.id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_many_regions_is_spec_error() {
        let spec = SceneSpec {
            height: 2,
            width: 2,
            regions: 5,
            warps: vec![RegionWarp::IDENTITY; 5],
            ..SceneSpec::default()
        };
        assert!(matches!(generate_scene(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn layout_tiles_every_pixel_once() {
        for seed in 0..20 {
            let spec = SceneSpec {
                height: 13,
                width: 9,
                regions: 7,
                warps: vec![RegionWarp::IDENTITY; 7],
                seed,
                ..SceneSpec::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let regions = random_layout(&spec, &mut rng).unwrap();
            assert_eq!(regions.iter().map(Region::area).sum::<usize>(), 13 * 9);
            assert!(label_pixels(&spec, &regions).is_ok());
        }
    }

    #[test]
    fn every_pixel_can_be_its_own_region() {
        let spec = SceneSpec {
            height: 2,
            width: 3,
            regions: 6,
            warps: vec![RegionWarp::IDENTITY; 6],
            points: 3,
            ..SceneSpec::default()
        };
        assert!(generate_scene(&spec).is_ok());
    }

    #[test]
    fn outlier_count_matches_fraction() {
        let spec = SceneSpec {
            depth_noise: 0.0,
            outlier_fraction: 0.25,
            points: 40,
            ..SceneSpec::default()
        };
        let s = generate_scene(&spec).unwrap();
        let proj = s.projection();
        let off = s
            .cloud
            .points()
            .iter()
            .filter(|p| {
                let (r, c) = proj.project(p).unwrap();
                (p.z - s.ground_truth.get(r, c)).abs() > 1e-9
            })
            .count();
        // Uniform outliers can land on the true depth only with probability 0.
        assert_eq!(off, 10);
    }

    #[test]
    fn scene_index_parses_suffix() {
        assert_eq!(scene_index("scene_0007"), Some(7));
        assert_eq!(scene_index("abc"), None);
    }

    #[test]
    fn config_round_trip() {
        let spec = dataset_scene_spec(&SceneSpec::default(), 3, 2, &WarpRanges::default());
        let back = SceneSpec::from_config(&KvConfig::parse(&spec.to_config().render()).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
