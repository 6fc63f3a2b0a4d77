//! Depth rasters, point clouds, scene bundles and their on-disk formats.
//!
//! - `.prad` rasters: ASCII header `PRAD1 <H> <W> <kind>\n`, then `H·W`
//!   little-endian `f64` values in row-major order.
//! - `.pts.csv` point clouds: header `x,y,z`, one point per line, 17
//!   significant digits.
//! - A dataset directory holds `{id}.z.prad`, `{id}.gt.prad`, `{id}.pts.csv`
//!   per scene and a `manifest.txt` with one scene id per line.

mod dataset;
mod points;
mod raster;

use std::fmt;
use std::str::FromStr;

pub use dataset::{load_dataset, write_scene, MANIFEST};
pub use points::{read_points, write_points};
pub use raster::{read_raster, write_raster};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    Scaleless,
    Metric,
    GroundTruth,
}

impl DepthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DepthKind::Scaleless => "scaleless",
            DepthKind::Metric => "metric",
            DepthKind::GroundTruth => "ground-truth",
        }
    }
}

impl fmt::Display for DepthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DepthKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "scaleless" => Ok(DepthKind::Scaleless),
            "metric" => Ok(DepthKind::Metric),
            "ground-truth" => Ok(DepthKind::GroundTruth),
            other => Err(format!("unknown depth kind `{other}`")),
        }
    }
}

/// `H×W` raster of non-negative depths, row-major.
///
/// Ground-truth maps use `0` for "no measurement".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    kind: DepthKind,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>, kind: DepthKind) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!("raster must be at least 1×1, got {height}×{width}")));
        }
        if values.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}×{width} raster needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Dimension(format!("depth values must be finite and ≥ 0, found {bad}")));
        }
        Ok(Self {
            height,
            width,
            values,
            kind,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
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

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Mask of pixels with a measurement (`> 0`).
    pub fn valid_mask(&self) -> Mask {
        Mask {
            height: self.height,
            width: self.width,
            bits: self.values.iter().map(|v| *v > 0.0).collect(),
        }
    }

    pub(crate) fn same_dims(&self, other: &DepthMap, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "{what}: {}×{} vs {}×{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Boolean raster of valid pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}×{width} mask needs {} entries, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn all(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub(crate) fn check_dims(&self, map: &DepthMap) -> Result<()> {
        if self.dims() != map.dims() {
            return Err(Error::Dimension(format!(
                "mask {}×{} vs raster {}×{}",
                self.height,
                self.width,
                map.height(),
                map.width()
            )));
        }
        Ok(())
    }
}

/// Camera-frame 3D point, meters; `z` is the depth coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Unordered set of radar points. Consumers must not depend on point order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadarCloud {
    points: Vec<Point3>,
}

impl RadarCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        for p in &points {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) || p.z <= 0.0 {
                return Err(Error::Dimension(format!(
                    "radar point ({}, {}, {}) must be finite with positive depth",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points, reordered by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> RadarCloud {
        RadarCloud {
            points: order.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

/// Pinhole rule relating synthetic radar points to their source pixel.
///
/// Pixel `(row, col)` at depth `d` maps to
/// `x = (col + 0.5 - W/2)·d/f`, `y = (row + 0.5 - H/2)·d/f`, `z = d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub height: usize,
    pub width: usize,
    pub focal_px: f64,
}

impl Projection {
    /// Focal length equal to the image width.
    pub fn for_raster(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            focal_px: width as f64,
        }
    }

    pub fn unproject(&self, row: usize, col: usize, depth: f64) -> Point3 {
        let f = self.focal_px;
        Point3 {
            x: (col as f64 + 0.5 - self.width as f64 / 2.0) * depth / f,
            y: (row as f64 + 0.5 - self.height as f64 / 2.0) * depth / f,
            z: depth,
        }
    }

    /// Source pixel `(row, col)`, or `None` if it falls outside the raster.
    pub fn project(&self, p: &Point3) -> Option<(usize, usize)> {
        let col = (p.x * self.focal_px / p.z + self.width as f64 / 2.0 - 0.5).round();
        let row = (p.y * self.focal_px / p.z + self.height as f64 / 2.0 - 0.5).round();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }
}

/// One scene: scaleless input, radar cloud and (possibly sparse) ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub id: String,
    pub seed: Option<u64>,
    pub scaleless: DepthMap,
    pub cloud: RadarCloud,
    pub ground_truth: DepthMap,
    pub mask: Mask,
}

impl SceneSample {
    /// Builds a sample; the validity mask is derived from `ground_truth > 0`.
    pub fn new(
        id: impl Into<String>,
        seed: Option<u64>,
        scaleless: DepthMap,
        cloud: RadarCloud,
        ground_truth: DepthMap,
    ) -> Result<Self> {
        scaleless.same_dims(&ground_truth, "scaleless vs ground truth")?;
        let mask = ground_truth.valid_mask();
        Ok(Self {
            id: id.into(),
            seed,
            scaleless,
            cloud,
            ground_truth,
            mask,
        })
    }

    pub fn projection(&self) -> Projection {
        Projection::for_raster(self.scaleless.height(), self.scaleless.width())
    }
}

/// Coefficients `c0..cN` of `d(z) = Σ c_i (z / z_max)^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoefficients {
    coeffs: Vec<f64>,
    z_max: f64,
}

impl PolyCoefficients {
    pub fn new(coeffs: Vec<f64>, z_max: f64) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Usage(format!(
                "polynomial degree must be ≥ 1, got {} coefficient(s)",
                coeffs.len()
            )));
        }
        if !(z_max.is_finite() && z_max > 0.0) {
            return Err(Error::Usage(format!("z_max must be positive, got {z_max}")));
        }
        Ok(Self { coeffs, z_max })
    }

    /// `d = z`: `c1 = z_max`, every other coefficient zero.
    pub fn identity(degree: usize, z_max: f64) -> Result<Self> {
        let mut c = vec![0.0; degree + 1];
        if degree >= 1 {
            c[1] = z_max;
        }
        Self::new(c, z_max)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_map_rejects_negative_and_bad_dims() {
        assert!(DepthMap::new(1, 2, vec![1.0, -0.5], DepthKind::Metric).is_err());
        assert!(DepthMap::new(0, 2, vec![], DepthKind::Metric).is_err());
        assert!(DepthMap::new(2, 2, vec![1.0; 3], DepthKind::Metric).is_err());
        assert!(DepthMap::new(1, 1, vec![f64::NAN], DepthKind::Metric).is_err());
    }

    #[test]
    fn mask_follows_ground_truth_sentinel() {
        let gt = DepthMap::new(1, 3, vec![0.0, 4.0, 2.0], DepthKind::GroundTruth).unwrap();
        let z = DepthMap::new(1, 3, vec![0.1, 0.2, 0.3], DepthKind::Scaleless).unwrap();
        let s = SceneSample::new("a", None, z, RadarCloud::default(), gt).unwrap();
        assert_eq!(s.mask.bits(), &[false, true, true]);
    }

    #[test]
    fn radar_points_need_positive_depth() {
        assert!(RadarCloud::new(vec![Point3 { x: 0.0, y: 0.0, z: 0.0 }]).is_err());
        assert!(RadarCloud::new(vec![Point3 { x: 0.0, y: 0.0, z: 1.0 }]).is_ok());
    }

    #[test]
    fn projection_round_trips_pixels() {
        let p = Projection::for_raster(48, 64);
        for (row, col) in [(0, 0), (47, 63), (10, 33)] {
            for d in [0.1, 7.3, 80.0] {
                assert_eq!(p.project(&p.unproject(row, col, d)), Some((row, col)));
            }
        }
    }

    #[test]
    fn poly_coefficients_contract() {
        assert!(PolyCoefficients::new(vec![1.0], 1.0).is_err());
        assert!(PolyCoefficients::new(vec![1.0, 2.0], 0.0).is_err());
        let id = PolyCoefficients::identity(3, 2.0).unwrap();
        assert_eq!(id.coeffs(), &[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(id.degree(), 3);
    }
}
