use std::fmt::Write as _;

use super::{train, Augmentation, LossConfig, TrainConfig, TrainOutcome};
use crate::config::KvConfig;
use crate::datamodel::SceneSample;
use crate::error::{Error, Result};
use crate::eval::{evaluate_method, Method, Unit};
use crate::network::{predict_coefficients, ModelParams, NetConfig};
use crate::polytransform::has_negative_slope;
use crate::synthgen::scene_index;

/// Train/validation/test scenes.
///
/// Odd scene indices are test scenes. Even indices train, except every
/// `val_every`-th even scene, which is held out for validation.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<SceneSample>,
    pub val: Vec<SceneSample>,
    pub test: Vec<SceneSample>,
}

pub fn split_dataset(samples: &[SceneSample], val_every: usize) -> Result<DatasetSplit> {
    let mut split = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for s in samples {
        let idx = scene_index(&s.id).ok_or_else(|| Error::Dataset {
            id: s.id.clone(),
            reason: "scene id has no numeric suffix for the parity split".into(),
        })?;
        if idx % 2 == 1 {
            split.test.push(s.clone());
        } else if val_every > 0 && (idx / 2) % val_every as u64 == 0 {
            split.val.push(s.clone());
        } else {
            split.train.push(s.clone());
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::Usage(format!(
            "split left {} train and {} test scenes; need at least one of each",
            split.train.len(),
            split.test.len()
        )));
    }
    Ok(split)
}

/// Everything needed to train and score one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    /// Evaluation cap, meters.
    pub cap: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            cap: 80.0,
        }
    }
}

/// Split parameter used with [`ExperimentConfig::benchmark`].
pub const BENCHMARK_VAL_EVERY: usize = 5;

/// Range of the extra z-power augmentation.
pub const Z_GAMMA_RANGE: (f64, f64) = (0.7, 1.4);
/// Range of the global depth-scale augmentation.
pub const DEPTH_SCALE_RANGE: (f64, f64) = (0.8, 1.2);

impl ExperimentConfig {
    /// Training recipe for the standard 200-scene benchmark: 32-wide layers,
    /// 200 cosine-annealed epochs, every augmentation on. A few minutes per
    /// model on one core.
    pub fn benchmark() -> Self {
        let w = 32;
        Self {
            net: NetConfig {
                c_r: w,
                c_z: w,
                c_v: w,
                c_s: w,
                ..NetConfig::default()
            },
            train: TrainConfig {
                epochs: 200,
                cosine: true,
                augment: Augmentation {
                    flips: true,
                    radar: Some(Default::default()),
                    z_gamma: Some(Z_GAMMA_RANGE),
                    depth_scale: Some(DEPTH_SCALE_RANGE),
                },
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    /// Reads every key of [`ExperimentConfig::keys`] present in `c`; absent
    /// keys keep the values of `self`. `seed` seeds both initialization and
    /// shuffling.
    pub fn overridden(&self, c: &KvConfig) -> Result<Self> {
        let n = &self.net;
        let t = &self.train;
        let l = &self.loss;
        let seed = c.get_or("seed", t.seed)?;
        let radar = c.get_or("augment_radar", t.augment.radar.is_some())?;
        let z_gamma = c.get_or("augment_z_gamma", t.augment.z_gamma.is_some())?;
        let depth_scale = c.get_or("augment_depth_scale", t.augment.depth_scale.is_some())?;
        let out = Self {
            net: NetConfig {
                c_r: c.get_or("c_r", n.c_r)?,
                c_z: c.get_or("c_z", n.c_z)?,
                c_v: c.get_or("c_v", n.c_v)?,
                c_s: c.get_or("c_s", n.c_s)?,
                prototypes: c.get_or("prototypes", n.prototypes)?,
                degree: c.get_or("degree", n.degree)?,
                seed,
                d_scale: c.get_or("d_scale", n.d_scale)?,
                disable_prototypes: n.disable_prototypes,
                disable_fusion: n.disable_fusion,
            },
            train: TrainConfig {
                lr: c.get_or("lr", t.lr)?,
                beta1: c.get_or("beta1", t.beta1)?,
                beta2: c.get_or("beta2", t.beta2)?,
                eps: c.get_or("eps", t.eps)?,
                epochs: c.get_or("epochs", t.epochs)?,
                seed,
                checkpoint_every: c.get_or("checkpoint_every", t.checkpoint_every)?,
                cosine: c.get_or("cosine", t.cosine)?,
                out_dir: t.out_dir.clone(),
                augment: Augmentation {
                    flips: c.get_or("augment_flips", t.augment.flips)?,
                    radar: if radar {
                        Some(t.augment.radar.unwrap_or_default())
                    } else {
                        None
                    },
                    z_gamma: z_gamma.then(|| t.augment.z_gamma.unwrap_or(Z_GAMMA_RANGE)),
                    depth_scale: depth_scale.then(|| t.augment.depth_scale.unwrap_or(DEPTH_SCALE_RANGE)),
                },
            },
            loss: LossConfig {
                lambda1: c.get_or("lambda1", l.lambda1)?,
                lambda2: c.get_or("lambda2", l.lambda2)?,
                lambda3: c.get_or("lambda3", l.lambda3)?,
                disable_monotonicity: c.get_or("disable_monotonicity", l.disable_monotonicity)?,
                disable_prototypes: c.get_or("disable_prototypes", l.disable_prototypes)?,
                disable_fusion: c.get_or("disable_fusion", l.disable_fusion)?,
            },
            cap: c.get_or("cap", self.cap)?,
        };
        out.net.validate()?;
        out.train.validate()?;
        out.loss.validate()?;
        Ok(out)
    }

    /// Keys understood by [`ExperimentConfig::overridden`].
    pub fn keys() -> &'static [&'static str] {
        &[
            "seed",
            "c_r",
            "c_z",
            "c_v",
            "c_s",
            "prototypes",
            "degree",
            "d_scale",
            "lr",
            "beta1",
            "beta2",
            "eps",
            "epochs",
            "checkpoint_every",
            "cosine",
            "augment_flips",
            "augment_radar",
            "augment_z_gamma",
            "augment_depth_scale",
            "lambda1",
            "lambda2",
            "lambda3",
            "disable_monotonicity",
            "disable_prototypes",
            "disable_fusion",
            "cap",
        ]
    }

    pub fn to_config(&self) -> KvConfig {
        let mut c = KvConfig::new();
        c.set("seed", self.train.seed);
        c.set("c_r", self.net.c_r);
        c.set("c_z", self.net.c_z);
        c.set("c_v", self.net.c_v);
        c.set("c_s", self.net.c_s);
        c.set("prototypes", self.net.prototypes);
        c.set("degree", self.net.degree);
        c.set("d_scale", self.net.d_scale);
        c.set("lr", self.train.lr);
        c.set("beta1", self.train.beta1);
        c.set("beta2", self.train.beta2);
        c.set("eps", self.train.eps);
        c.set("epochs", self.train.epochs);
        c.set("checkpoint_every", self.train.checkpoint_every);
        c.set("cosine", self.train.cosine);
        c.set("augment_flips", self.train.augment.flips);
        c.set("augment_radar", self.train.augment.radar.is_some());
        c.set("augment_z_gamma", self.train.augment.z_gamma.is_some());
        c.set("augment_depth_scale", self.train.augment.depth_scale.is_some());
        c.set("lambda1", self.loss.lambda1);
        c.set("lambda2", self.loss.lambda2);
        c.set("lambda3", self.loss.lambda3);
        c.set("disable_monotonicity", self.loss.disable_monotonicity);
        c.set("disable_prototypes", self.loss.disable_prototypes);
        c.set("disable_fusion", self.loss.disable_fusion);
        c.set("cap", self.cap);
        c
    }
}

/// A trained model and its test-split scores.
#[derive(Debug, Clone)]
pub struct Scored {
    pub outcome: TrainOutcome,
    pub mae_mm: f64,
    pub rmse_mm: f64,
    /// Test scenes whose predicted transform has a negative slope somewhere
    /// on the evaluation grid.
    pub negative_slope_scenes: usize,
}

/// Trains on `split.train` (validating on `split.val`) and scores the best
/// checkpoint on `split.test` at `cfg.cap`.
pub fn train_and_score(split: &DatasetSplit, cfg: &ExperimentConfig) -> Result<Scored> {
    let net = NetConfig {
        disable_prototypes: cfg.loss.disable_prototypes,
        disable_fusion: cfg.loss.disable_fusion,
        ..cfg.net
    };
    let model = ModelParams::init(net)?;
    let outcome = train(model, &split.train, &split.val, &cfg.train, &cfg.loss)?;
    if let Some(reason) = &outcome.diverged {
        return Err(Error::Numerical(reason.clone()));
    }
    let method = Method::Network(Box::new(outcome.best.clone()));
    let report = evaluate_method(&method, &split.test, &[cfg.cap], Unit::Millimeters)?;
    let mean = report.mean_at(&method.label(), cfg.cap).expect("mean row present");
    let mut negative = 0;
    for s in &split.test {
        if has_negative_slope(&predict_coefficients(&outcome.best, &s.scaleless, &s.cloud)?) {
            negative += 1;
        }
    }
    Ok(Scored {
        outcome,
        mae_mm: mean.mae,
        rmse_mm: mean.rmse,
        negative_slope_scenes: negative,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub degree: usize,
    pub mae_mm: f64,
    pub rmse_mm: f64,
    pub negative_slope_scenes: usize,
    pub best_epoch: usize,
    pub model: ModelParams,
}

/// One model per degree under the same budget and seed; test MAE/RMSE in mm.
pub fn run_degree_sweep(split: &DatasetSplit, degrees: &[usize], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    degrees
        .iter()
        .map(|&degree| {
            let c = ExperimentConfig {
                net: NetConfig { degree, ..cfg.net },
                ..cfg.clone()
            };
            let s = train_and_score(split, &c)?;
            Ok(SweepRow {
                degree,
                mae_mm: s.mae_mm,
                rmse_mm: s.rmse_mm,
                negative_slope_scenes: s.negative_slope_scenes,
                best_epoch: s.outcome.best_epoch,
                model: s.outcome.best,
            })
        })
        .collect()
}

pub fn sweep_table_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("degree,test_mae_mm,test_rmse_mm,negative_slope_scenes,best_epoch\n");
    for r in rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{},{}",
            r.degree, r.mae_mm, r.rmse_mm, r.negative_slope_scenes, r.best_epoch
        )
        .expect("string write");
    }
    out
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub name: &'static str,
    pub mae_mm: f64,
    pub rmse_mm: f64,
    /// Test scenes whose predicted transform has a negative slope somewhere
    /// on the evaluation grid.
    pub negative_slope_scenes: usize,
    pub model: ModelParams,
}

/// The unablated loss config followed by each ablation toggled on its own.
pub fn ablation_variants(loss: &LossConfig) -> [(&'static str, LossConfig); 4] {
    let base = LossConfig {
        disable_monotonicity: false,
        disable_prototypes: false,
        disable_fusion: false,
        ..*loss
    };
    [
        ("full", base),
        (
            "no-prototypes",
            LossConfig {
                disable_prototypes: true,
                ..base
            },
        ),
        (
            "no-fusion",
            LossConfig {
                disable_fusion: true,
                ..base
            },
        ),
        (
            "no-monotonicity",
            LossConfig {
                disable_monotonicity: true,
                ..base
            },
        ),
    ]
}

/// The unablated model followed by each ablation toggled on its own.
pub fn run_ablations(split: &DatasetSplit, cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    ablation_variants(&cfg.loss)
        .iter()
        .map(|(name, loss)| {
            let s = train_and_score(split, &ExperimentConfig { loss: *loss, ..cfg.clone() })?;
            Ok(AblationRow {
                name,
                mae_mm: s.mae_mm,
                rmse_mm: s.rmse_mm,
                negative_slope_scenes: s.negative_slope_scenes,
                model: s.outcome.best,
            })
        })
        .collect()
}

pub fn ablation_table_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,test_mae_mm,test_rmse_mm,negative_slope_scenes\n");
    for r in rows {
        writeln!(out, "{},{:.3},{:.3},{}", r.name, r.mae_mm, r.rmse_mm, r.negative_slope_scenes)
            .expect("string write");
    }
    out
}
