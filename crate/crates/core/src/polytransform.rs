//! Polynomial depth transforms: evaluation, slope and inflection points.
//!
//! The polynomial variable is always `u = z / z_max`. Slopes are returned with
//! respect to the un-normalized `z`, so the identity transform has slope 1 for
//! every `z_max`.

use crate::datamodel::{DepthKind, DepthMap, PolyCoefficients};
use crate::error::{Error, Result};

/// Grid resolution used to bracket roots of the second derivative.
pub const INFLECTION_GRID: usize = 4096;

/// Number of samples in [`sample_curve`].
pub const CURVE_SAMPLES: usize = 512;

fn check_degree(c: &PolyCoefficients) -> Result<()> {
    if c.degree() < 1 {
        return Err(Error::Usage("polynomial degree must be ≥ 1".into()));
    }
    Ok(())
}

/// Horner evaluation of `Σ c_i u^i`.
pub fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// `d(z)` at a single scaleless value, without clamping.
pub fn value_at(c: &PolyCoefficients, z: f64) -> f64 {
    horner(c.coeffs(), z / c.z_max())
}

/// `dd/dz` at a single scaleless value.
pub fn slope_at(c: &PolyCoefficients, z: f64) -> f64 {
    let u = z / c.z_max();
    let d = c.coeffs();
    let mut acc = 0.0;
    for i in (1..d.len()).rev() {
        acc = acc * u + i as f64 * d[i];
    }
    acc / c.z_max()
}

/// Second derivative in the normalized variable, `Σ i(i-1) c_i u^(i-2)`.
pub fn curvature_normalized(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for i in (2..coeffs.len()).rev() {
        acc = acc * u + (i * (i - 1)) as f64 * coeffs[i];
    }
    acc
}

/// Metric prediction plus the number of pixels clamped up to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub depth: DepthMap,
    pub clamped: usize,
}

/// `d(x, y) = Σ c_i (z(x, y) / z_max)^i`, clamped at 0 from below.
pub fn eval_poly(c: &PolyCoefficients, z: &DepthMap) -> Result<Evaluated> {
    check_degree(c)?;
    let mut clamped = 0;
    let values = z
        .values()
        .iter()
        .map(|&zv| {
            let d = value_at(c, zv);
            if d < 0.0 {
                clamped += 1;
                0.0
            } else {
                d
            }
        })
        .collect();
    Ok(Evaluated {
        depth: DepthMap::new(z.height(), z.width(), values, DepthKind::Metric)?,
        clamped,
    })
}

/// Per-pixel slope raster. Unlike depths, slopes may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

pub fn eval_derivative(c: &PolyCoefficients, z: &DepthMap) -> Result<SlopeMap> {
    check_degree(c)?;
    Ok(SlopeMap {
        height: z.height(),
        width: z.width(),
        values: z.values().iter().map(|&zv| slope_at(c, zv)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureChange {
    /// `f''` goes from negative to positive.
    ConcaveToConvex,
    /// `f''` goes from positive to negative.
    ConvexToConcave,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflection {
    /// Location in un-normalized `z`.
    pub z: f64,
    pub change: CurvatureChange,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InflectionSet {
    pub points: Vec<Inflection>,
}

impl InflectionSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sign changes of `f''` in `(0, z_max]`, bracketed on a uniform grid and
/// refined by bisection.
pub fn inflection_points(c: &PolyCoefficients) -> InflectionSet {
    let coeffs = c.coeffs();
    if c.degree() < 2 {
        return InflectionSet::default();
    }
    let f = |u: f64| curvature_normalized(coeffs, u);
    let step = 1.0 / INFLECTION_GRID as f64;

    let mut points = Vec::new();
    // Last nonzero sample; exact zeros on the grid are skipped over so a
    // crossing through a grid point still counts once.
    let mut last: Option<(f64, f64)> = None;
    let mut zero_run: Option<f64> = None;
    for j in 1..=INFLECTION_GRID {
        let u = j as f64 * step;
        let v = f(u);
        if v == 0.0 {
            zero_run.get_or_insert(u);
            continue;
        }
        if let Some((lu, lv)) = last {
            if v.signum() != lv.signum() {
                let root = zero_run.unwrap_or_else(|| bisect(&f, lu, u, lv));
                points.push(Inflection {
                    z: root * c.z_max(),
                    change: if v > 0.0 {
                        CurvatureChange::ConcaveToConvex
                    } else {
                        CurvatureChange::ConvexToConcave
                    },
                });
            }
        }
        last = Some((u, v));
        zero_run = None;
    }
    InflectionSet { points }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_sign = f_lo.signum();
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < 1e-10 || mid <= lo || mid >= hi {
            break;
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// One row of a sampled transform curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub z: f64,
    pub depth: f64,
    pub slope: f64,
}

/// `n` evenly spaced samples of `(z, d(z), dd/dz)` over `[0, z_max]`.
pub fn sample_curve(c: &PolyCoefficients, n: usize) -> Vec<CurveSample> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let z = c.z_max() * k as f64 / (n - 1) as f64;
            CurveSample {
                z,
                depth: value_at(c, z),
                slope: slope_at(c, z),
            }
        })
        .collect()
}

/// Whether the transform's slope is negative anywhere on the
/// [`CURVE_SAMPLES`]-point grid over `[0, z_max]`.
pub fn has_negative_slope(c: &PolyCoefficients) -> bool {
    sample_curve(c, CURVE_SAMPLES).iter().any(|s| s.slope < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<f64>) -> DepthMap {
        let n = values.len();
        DepthMap::new(1, n, values, DepthKind::Scaleless).unwrap()
    }

    #[test]
    fn identity_transform() {
        let c = PolyCoefficients::new(vec![0.0, 1.0], 1.0).unwrap();
        let z = map(vec![0.0, 0.3, 0.9]);
        assert_eq!(eval_poly(&c, &z).unwrap().depth.values(), z.values());
        assert_eq!(eval_derivative(&c, &z).unwrap().values, vec![1.0; 3]);
    }

    #[test]
    fn quadratic_value_and_slope() {
        let c = PolyCoefficients::new(vec![1.0, 2.0, 3.0], 1.0).unwrap();
        let z = map(vec![2.0]);
        assert_eq!(eval_poly(&c, &z).unwrap().depth.values(), &[17.0]);
        assert_eq!(eval_derivative(&c, &z).unwrap().values, vec![14.0]);
    }

    #[test]
    fn identity_slope_is_one_for_any_z_max() {
        for z_max in [0.5, 1.0, 80.0] {
            let c = PolyCoefficients::identity(6, z_max).unwrap();
            for z in [0.0, 0.1 * z_max, z_max] {
                assert_eq!(slope_at(&c, z), 1.0);
            }
        }
    }

    #[test]
    fn negative_predictions_are_clamped_and_counted() {
        let c = PolyCoefficients::new(vec![-1.0, 2.0], 1.0).unwrap();
        let out = eval_poly(&c, &map(vec![0.0, 0.25, 1.0])).unwrap();
        assert_eq!(out.depth.values(), &[0.0, 0.0, 1.0]);
        assert_eq!(out.clamped, 2);
    }

    #[test]
    fn linear_has_no_inflections() {
        let c = PolyCoefficients::new(vec![3.0, -2.0], 1.0).unwrap();
        assert!(inflection_points(&c).is_empty());
    }

    #[test]
    fn cubic_root_at_origin_is_excluded() {
        let c = PolyCoefficients::new(vec![0.0, -1.0, 0.0, 1.0], 1.0).unwrap();
        assert!(inflection_points(&c).is_empty());
    }

    #[test]
    fn quartic_inflection_closed_form() {
        let c = PolyCoefficients::new(vec![0.0, 0.0, -1.0, 0.0, 1.0], 1.0).unwrap();
        let set = inflection_points(&c);
        assert_eq!(set.len(), 1);
        assert!((set.points[0].z - 1.0 / 6f64.sqrt()).abs() < 1e-9);
        assert_eq!(set.points[0].change, CurvatureChange::ConcaveToConvex);
    }

    #[test]
    fn inflections_scale_with_z_max() {
        let c = PolyCoefficients::new(vec![0.0, 0.0, -1.0, 0.0, 1.0], 4.0).unwrap();
        let set = inflection_points(&c);
        assert!((set.points[0].z - 4.0 / 6f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn touching_root_is_not_reported() {
        // f'' = 2·(u - 0.5)^2·... via c2..c4: f''(u) = 12u² - 12u + 3 = 3(2u-1)²
        let c = PolyCoefficients::new(vec![0.0, 0.0, 1.5, -2.0, 1.0], 1.0).unwrap();
        assert!(inflection_points(&c).is_empty());
    }

    #[test]
    fn degree_zero_rejected() {
        assert!(PolyCoefficients::new(vec![1.0], 1.0).is_err());
    }
}
