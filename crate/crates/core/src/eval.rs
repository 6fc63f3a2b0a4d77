//! MAE/RMSE with distance caps and per-method reports.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::baselines::{fit_linear, fit_poly_dense, fit_poly_sparse, median, median_scale, radar_pairs};
use crate::datamodel::{DepthKind, DepthMap, Mask, PolyCoefficients, SceneSample};
use crate::error::{Error, Result};
use crate::network::{nominal, predict_depth, ModelParams};
use crate::polytransform::eval_poly;

/// Distance caps, meters.
pub const DEFAULT_CAPS: [f64; 3] = [50.0, 70.0, 80.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Meters,
    Millimeters,
}

impl Unit {
    pub fn factor(self) -> f64 {
        match self {
            Unit::Meters => 1.0,
            Unit::Millimeters => 1000.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Meters => "m",
            Unit::Millimeters => "mm",
        }
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "m" => Ok(Unit::Meters),
            "mm" => Ok(Unit::Millimeters),
            other => Err(format!("unknown unit `{other}` (expected m or mm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Eligible pixels.
    pub count: usize,
}

/// Pixels with `mask` set and `0 < gt ≤ cap`.
pub fn eligible(gt: &DepthMap, mask: &Mask, cap: f64) -> Result<Vec<usize>> {
    mask.check_dims(gt)?;
    Ok((0..gt.len())
        .filter(|&i| mask.bits()[i] && gt.values()[i] <= cap)
        .collect())
}

pub fn mae_rmse(pred: &DepthMap, gt: &DepthMap, mask: &Mask, cap: f64, unit: Unit) -> Result<Metrics> {
    pred.same_dims(gt, "prediction vs ground truth")?;
    let idx = eligible(gt, mask, cap)?;
    if idx.is_empty() {
        return Err(Error::Degenerate(format!("no valid pixels within {cap} m")));
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    for &i in &idx {
        let e = pred.values()[i] - gt.values()[i];
        abs += e.abs();
        sq += e * e;
    }
    let n = idx.len() as f64;
    let f = unit.factor();
    Ok(Metrics {
        mae: f * abs / n,
        rmse: f * (sq / n).sqrt(),
        count: idx.len(),
    })
}

/// Alignment method under evaluation.
#[derive(Debug, Clone)]
pub enum Method {
    Network(Box<ModelParams>),
    /// `z` scaled by `median(radar depth) / median(z at radar pixels)`, over
    /// points whose pixel has `z > 0`.
    Median,
    /// Dense least-squares scale and shift against ground truth (oracle).
    Linear,
    /// Dense least-squares polynomial against ground truth (oracle).
    PolyDense(usize),
    /// Least-squares polynomial against radar depths.
    PolySparse(usize),
    /// `z` median-scaled against dense ground truth over pixels with `z > 0`.
    Raw,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Network(p) => format!("network-n{}", p.config().degree),
            Method::Median => "median".into(),
            Method::Linear => "linear".into(),
            Method::PolyDense(n) => format!("poly-dense-n{n}"),
            Method::PolySparse(n) => format!("poly-sparse-n{n}"),
            Method::Raw => "raw".into(),
        }
    }
}

fn scaled(z: &DepthMap, s: f64) -> Result<DepthMap> {
    DepthMap::new(z.height(), z.width(), z.values().iter().map(|v| v * s).collect(), DepthKind::Metric)
}

fn apply(c: &PolyCoefficients, z: &DepthMap) -> Result<DepthMap> {
    Ok(eval_poly(c, z)?.depth)
}

/// Metric prediction of `method` on one scene.
pub fn predict(method: &Method, s: &SceneSample) -> Result<DepthMap> {
    let z = &s.scaleless;
    match method {
        Method::Network(p) => match predict_depth(p, z, &s.cloud) {
            Ok(e) => Ok(e.depth),
            // No radar: fall back to the identity transform.
            Err(Error::NoRadar) => nominal(z, p.config().d_scale),
            Err(e) => Err(e),
        },
        Method::Median => {
            // z = 0 maps to 0 under any scale, so those pairs carry no information.
            let pairs: Vec<(f64, f64)> = radar_pairs(z, &s.cloud, &s.projection())
                .into_iter()
                .filter(|p| p.0 > 0.0)
                .collect();
            let (mut zs, mut ds): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let mz = median(&mut zs).ok_or(Error::NoRadar)?;
            let md = median(&mut ds).expect("same length");
            if mz <= 0.0 {
                return Err(Error::Degenerate("median of z at radar pixels is zero".into()));
            }
            scaled(z, md / mz)
        }
        Method::Linear => {
            let f = fit_linear(z, &s.ground_truth, &s.mask)?;
            apply(&f.to_poly(1.0)?, z)
        }
        Method::PolyDense(n) => apply(&fit_poly_dense(z, &s.ground_truth, &s.mask, *n)?, z),
        Method::PolySparse(n) => apply(&fit_poly_sparse(z, &s.cloud, &s.projection(), *n)?, z),
        Method::Raw => {
            let positive: Vec<bool> = s.mask.bits().iter().zip(z.values()).map(|(m, v)| *m && *v > 0.0).collect();
            let mask = Mask::new(z.height(), z.width(), positive)?;
            scaled(z, median_scale(z, &s.ground_truth, &mask)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    /// Scene id, or `mean` for the per-cap average over scenes.
    pub scene: String,
    pub cap: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub unit: Unit,
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Mean rows only.
    pub fn means(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.scene == "mean")
    }

    pub fn mean_at(&self, method: &str, cap: f64) -> Option<Metrics> {
        self.means().find(|r| r.method == method && r.cap == cap).map(|r| r.metrics)
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let u = self.unit.as_str();
        let mut out = format!("method,scene,cap_m,mae_{u},rmse_{u},pixels\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{}",
                r.method, r.scene, r.cap, r.metrics.mae, r.metrics.rmse, r.metrics.count
            )
            .expect("string write");
        }
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

/// Per-scene and mean metrics of `method` at each cap.
///
/// Scenes with no pixels under a cap are skipped for that cap; the mean
/// averages per-scene metrics.
pub fn evaluate_method(method: &Method, samples: &[SceneSample], caps: &[f64], unit: Unit) -> Result<Report> {
    if samples.is_empty() {
        return Err(Error::Usage("no scenes to evaluate".into()));
    }
    let label = method.label();
    let preds = samples.iter().map(|s| predict(method, s)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &cap in caps {
        let mut per_scene = Vec::new();
        for (s, p) in samples.iter().zip(&preds) {
            match mae_rmse(p, &s.ground_truth, &s.mask, cap, unit) {
                Ok(m) => per_scene.push(ReportRow {
                    method: label.clone(),
                    scene: s.id.clone(),
                    cap,
                    metrics: m,
                }),
                Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if per_scene.is_empty() {
            return Err(Error::Degenerate(format!("no scene has pixels within {cap} m")));
        }
        let n = per_scene.len() as f64;
        let mean = Metrics {
            mae: per_scene.iter().map(|r| r.metrics.mae).sum::<f64>() / n,
            rmse: per_scene.iter().map(|r| r.metrics.rmse).sum::<f64>() / n,
            count: per_scene.iter().map(|r| r.metrics.count).sum(),
        };
        rows.extend(per_scene);
        rows.push(ReportRow {
            method: label.clone(),
            scene: "mean".into(),
            cap,
            metrics: mean,
        });
    }
    Ok(Report { unit, rows })
}
