use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{DepthMap, Mask, Point3, RadarCloud, SceneSample};
use crate::error::Result;
use crate::synthgen::{sample_radar, RadarNoise};

/// Per-step training-time augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Augmentation {
    /// Random flips, plus transposes on square rasters.
    pub flips: bool,
    /// Redraw the radar cloud from ground truth with this measurement model,
    /// keeping the point count.
    pub radar: Option<RadarNoise>,
    /// Raise the scaleless input to a power drawn uniformly from this range,
    /// a global monotone re-warp on top of the generator's.
    pub z_gamma: Option<(f64, f64)>,
    /// Multiply ground truth and radar depths by a factor drawn uniformly from
    /// this range.
    pub depth_scale: Option<(f64, f64)>,
}

impl Augmentation {
    pub fn is_noop(&self) -> bool {
        !self.flips && self.radar.is_none() && self.z_gamma.is_none() && self.depth_scale.is_none()
    }
}

/// Pixel symmetry: optional transpose, then optional row/column flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Symmetry {
    pub transpose: bool,
    pub flip_rows: bool,
    pub flip_cols: bool,
}

impl Symmetry {
    fn source(&self, row: usize, col: usize, out_h: usize, out_w: usize) -> (usize, usize) {
        let r = if self.flip_rows { out_h - 1 - row } else { row };
        let c = if self.flip_cols { out_w - 1 - col } else { col };
        if self.transpose {
            (c, r)
        } else {
            (r, c)
        }
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        if self.transpose {
            (w, h)
        } else {
            (h, w)
        }
    }

    fn gather<T: Copy>(&self, values: &[T], h: usize, w: usize) -> Vec<T> {
        let (oh, ow) = self.out_dims(h, w);
        let mut out = Vec::with_capacity(values.len());
        for row in 0..oh {
            for col in 0..ow {
                let (r, c) = self.source(row, col, oh, ow);
                out.push(values[r * w + c]);
            }
        }
        out
    }

    pub fn apply_raster(&self, map: &DepthMap) -> Result<DepthMap> {
        let (oh, ow) = self.out_dims(map.height(), map.width());
        DepthMap::new(oh, ow, self.gather(map.values(), map.height(), map.width()), map.kind())
    }

    pub fn apply_mask(&self, mask: &Mask) -> Result<Mask> {
        let (h, w) = mask.dims();
        let (oh, ow) = self.out_dims(h, w);
        Mask::new(oh, ow, self.gather(mask.bits(), h, w))
    }

    /// Camera-frame image of a point; exact because pixel centers are
    /// symmetric about the principal point.
    pub fn apply_point(&self, p: &Point3) -> Point3 {
        let (mut x, mut y) = if self.transpose { (p.y, p.x) } else { (p.x, p.y) };
        if self.flip_cols {
            x = -x;
        }
        if self.flip_rows {
            y = -y;
        }
        Point3 { x, y, z: p.z }
    }

    pub fn apply(&self, s: &SceneSample) -> Result<SceneSample> {
        let cloud = RadarCloud::new(s.cloud.points().iter().map(|p| self.apply_point(p)).collect())?;
        Ok(SceneSample {
            id: s.id.clone(),
            seed: s.seed,
            scaleless: self.apply_raster(&s.scaleless)?,
            cloud,
            ground_truth: self.apply_raster(&s.ground_truth)?,
            mask: self.apply_mask(&s.mask)?,
        })
    }
}

pub fn augment(s: &SceneSample, aug: &Augmentation, rng: &mut ChaCha8Rng) -> Result<SceneSample> {
    let mut out = if aug.flips {
        let square = s.scaleless.height() == s.scaleless.width();
        let sym = Symmetry {
            transpose: square && rng.random_bool(0.5),
            flip_rows: rng.random_bool(0.5),
            flip_cols: rng.random_bool(0.5),
        };
        sym.apply(s)?
    } else {
        s.clone()
    };
    if let Some((lo, hi)) = aug.z_gamma {
        let g = rng.random_range(lo..=hi);
        let z = &out.scaleless;
        out.scaleless = DepthMap::new(
            z.height(),
            z.width(),
            z.values().iter().map(|v| v.max(0.0).powf(g)).collect(),
            z.kind(),
        )?;
    }
    let scale = match aug.depth_scale {
        Some((lo, hi)) => rng.random_range(lo..=hi),
        None => 1.0,
    };
    if scale != 1.0 {
        let gt = &out.ground_truth;
        out.ground_truth = DepthMap::new(
            gt.height(),
            gt.width(),
            gt.values().iter().map(|v| v * scale).collect(),
            gt.kind(),
        )?;
    }
    match &aug.radar {
        Some(noise) => {
            let noise = RadarNoise {
                d_min: noise.d_min * scale,
                d_max: noise.d_max * scale,
                ..*noise
            };
            out.cloud = sample_radar(&out.ground_truth, s.cloud.len(), &noise, rng)?;
        }
        None if scale != 1.0 => {
            out.cloud = RadarCloud::new(
                out.cloud
                    .points()
                    .iter()
                    .map(|p| Point3 {
                        x: p.x * scale,
                        y: p.y * scale,
                        z: p.z * scale,
                    })
                    .collect(),
            )?;
        }
        None => {}
    }
    Ok(out)
}
