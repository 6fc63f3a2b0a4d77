//! Closed-form alignment baselines and oracles.
//!
//! Polynomial fits work in `u = z / z_max` with `z_max` the largest scaleless
//! value in the raster (1 for min-max normalized inputs), so the returned
//! [`PolyCoefficients`] evaluate directly on the same raster.

use nalgebra::{DMatrix, DVector};

use crate::datamodel::{DepthMap, Mask, PolyCoefficients, Projection, RadarCloud};
use crate::error::{Error, Result};
use crate::polytransform::horner;

/// Relative ridge added to the normal-equation diagonal.
pub const RIDGE: f64 = 1e-10;

/// Refinement passes after the first normal-equation solve.
const REFINE_STEPS: usize = 8;

fn masked_pairs(z: &DepthMap, target: &DepthMap, mask: &Mask) -> Result<Vec<(f64, f64)>> {
    z.same_dims(target, "scaleless vs target")?;
    mask.check_dims(z)?;
    Ok(z
        .values()
        .iter()
        .zip(target.values())
        .zip(mask.bits())
        .filter(|(_, m)| **m)
        .map(|((a, b), _)| (*a, *b))
        .collect())
}

/// Median with the even-count convention of averaging the two middle values.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// `median(target) / median(z)` over masked pixels.
pub fn median_scale(z: &DepthMap, target: &DepthMap, mask: &Mask) -> Result<f64> {
    let pairs = masked_pairs(z, target, mask)?;
    let (mut zs, mut ts): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mz = median(&mut zs).ok_or_else(|| Error::Degenerate("median scaling: empty mask".into()))?;
    let mt = median(&mut ts).expect("same length");
    if mz <= 0.0 {
        return Err(Error::Degenerate("median scaling: median of z is zero".into()));
    }
    Ok(mt / mz)
}

/// Scale-and-shift `d = scale·z + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub scale: f64,
    pub shift: f64,
}

impl LinearFit {
    /// The same map as degree-1 coefficients over `z_max`.
    pub fn to_poly(self, z_max: f64) -> Result<PolyCoefficients> {
        PolyCoefficients::new(vec![self.shift, self.scale * z_max], z_max)
    }
}

fn linear_from_pairs(pairs: &[(f64, f64)]) -> Result<LinearFit> {
    if pairs.len() < 2 {
        return Err(Error::Rank(format!("linear fit needs ≥ 2 pixels, got {}", pairs.len())));
    }
    let n = pairs.len() as f64;
    let mz = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mt = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut szz, mut szt) = (0.0, 0.0);
    for &(z, t) in pairs {
        szz += (z - mz) * (z - mz);
        szt += (z - mz) * (t - mt);
    }
    if szz <= 0.0 {
        return Err(Error::Rank("linear fit: z is constant over the mask".into()));
    }
    let scale = szt / szz;
    Ok(LinearFit {
        scale,
        shift: mt - scale * mz,
    })
}

/// Ordinary least squares scale and shift over masked pixels.
pub fn fit_linear(z: &DepthMap, target: &DepthMap, mask: &Mask) -> Result<LinearFit> {
    linear_from_pairs(&masked_pairs(z, target, mask)?)
}

/// Largest scaleless value, the polynomial normalizer for baseline fits.
pub fn raster_z_max(z: &DepthMap) -> f64 {
    let m = z.values().iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Least squares over `(z, target)` pairs in the normalized variable.
///
/// Normal equations with a relative ridge, solved by Cholesky, followed by a
/// few steps of iterative refinement against the true residual. The ridge
/// also absorbs exact rank deficiency (fewer distinct `z` values than
/// coefficients, as on all-planar scenes): the fit then interpolates every
/// distinct level.
pub fn fit_pairs(pairs: &[(f64, f64)], degree: usize, z_max: f64) -> Result<PolyCoefficients> {
    if degree < 1 {
        return Err(Error::Usage("polynomial degree must be ≥ 1".into()));
    }
    let k = degree + 1;
    if pairs.len() < k {
        return Err(Error::Underdetermined {
            have: pairs.len(),
            need: k,
        });
    }
    let rows = pairs.len();
    let a = DMatrix::from_fn(rows, k, |r, c| (pairs[r].0 / z_max).powi(c as i32));
    let b = DVector::from_iterator(rows, pairs.iter().map(|p| p.1));
    let mut gram = a.tr_mul(&a);
    let damping = RIDGE * gram.diagonal().max();
    for i in 0..k {
        gram[(i, i)] += damping;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Conditioning(format!("degree-{degree} normal equations are not positive definite")))?;

    let mut x = chol.solve(&a.tr_mul(&b));
    for _ in 0..REFINE_STEPS {
        let r = &b - &a * &x;
        x += chol.solve(&a.tr_mul(&r));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning(format!("degree-{degree} solve produced non-finite coefficients")));
    }
    PolyCoefficients::new(x.iter().copied().collect(), z_max)
}

/// Dense least-squares polynomial against a target raster.
pub fn fit_poly_dense(z: &DepthMap, target: &DepthMap, mask: &Mask, degree: usize) -> Result<PolyCoefficients> {
    fit_pairs(&masked_pairs(z, target, mask)?, degree, raster_z_max(z))
}

/// `(z at source pixel, radar depth)` pairs; points projecting outside the
/// raster are dropped.
pub fn radar_pairs(z: &DepthMap, cloud: &RadarCloud, projection: &Projection) -> Vec<(f64, f64)> {
    cloud
        .points()
        .iter()
        .filter_map(|p| projection.project(p).map(|(r, c)| (z.get(r, c), p.z)))
        .collect()
}

/// Least-squares polynomial using only radar depths as targets.
pub fn fit_poly_sparse(
    z: &DepthMap,
    cloud: &RadarCloud,
    projection: &Projection,
    degree: usize,
) -> Result<PolyCoefficients> {
    fit_pairs(&radar_pairs(z, cloud, projection), degree, raster_z_max(z))
}

/// Sum of squared residuals of `c` over masked pixels (no clamping).
pub fn residual_sse(c: &PolyCoefficients, z: &DepthMap, target: &DepthMap, mask: &Mask) -> Result<f64> {
    Ok(masked_pairs(z, target, mask)?
        .iter()
        .map(|&(zv, t)| {
            let e = horner(c.coeffs(), zv / c.z_max()) - t;
            e * e
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::DepthKind;

    fn row(values: &[f64]) -> DepthMap {
        DepthMap::new(1, values.len(), values.to_vec(), DepthKind::Metric).unwrap()
    }

    #[test]
    fn median_scale_examples() {
        let z = row(&[1.0, 2.0, 3.0]);
        let all = Mask::all(1, 3);
        assert_eq!(median_scale(&z, &row(&[2.0, 4.0, 6.0]), &all).unwrap(), 2.0);
        assert_eq!(median_scale(&z, &z, &all).unwrap(), 1.0);
        let none = Mask::new(1, 3, vec![false; 3]).unwrap();
        assert!(matches!(median_scale(&z, &z, &none), Err(Error::Degenerate(_))));
        let zero = row(&[0.0, 0.0, 1.0]);
        assert!(matches!(median_scale(&zero, &z, &all), Err(Error::Degenerate(_))));
    }

    #[test]
    fn median_even_count_averages_middles() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn linear_examples() {
        let z = row(&[0.0, 0.5, 1.0, 0.25]);
        let t = row(&[1.0, 2.5, 4.0, 1.75]);
        let f = fit_linear(&z, &t, &Mask::all(1, 4)).unwrap();
        assert!((f.scale - 3.0).abs() < 1e-12 && (f.shift - 1.0).abs() < 1e-12);

        let f = fit_linear(&row(&[0.0, 1.0]), &row(&[1.0, 0.0]), &Mask::all(1, 2)).unwrap();
        assert_eq!((f.scale, f.shift), (-1.0, 1.0));

        let c = row(&[0.5, 0.5]);
        assert!(matches!(fit_linear(&c, &row(&[1.0, 2.0]), &Mask::all(1, 2)), Err(Error::Rank(_))));
    }

    #[test]
    fn cubic_recovered() {
        let zs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let truth = [2.0, -1.0, 4.0, 3.0];
        let ts: Vec<f64> = zs.iter().map(|&z| horner(&truth, z)).collect();
        let c = fit_poly_dense(&row(&zs), &row(&ts), &Mask::all(1, 50), 3).unwrap();
        for (a, b) in c.coeffs().iter().zip(truth) {
            assert!((a - b).abs() < 1e-6, "{:?}", c.coeffs());
        }
    }

    #[test]
    fn too_few_pairs() {
        let z = row(&[0.1, 0.2]);
        assert!(matches!(
            fit_poly_dense(&z, &z, &Mask::all(1, 2), 2),
            Err(Error::Underdetermined { have: 2, need: 3 })
        ));
        // Two distinct levels, three coefficients: the ridge still yields an
        // exact fit.
        let rep = row(&[0.1, 0.1, 0.2, 0.2]);
        let t = row(&[5.0, 5.0, 9.0, 9.0]);
        let c = fit_poly_dense(&rep, &t, &Mask::all(1, 4), 2).unwrap();
        assert!(residual_sse(&c, &rep, &t, &Mask::all(1, 4)).unwrap() < 1e-12);
    }
}
