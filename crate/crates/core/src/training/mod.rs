//! Loss, optimizer, training loop, degree sweep and ablations.

mod augment;
mod experiments;
mod loss;
mod pipeline_check;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use augment::{augment, Augmentation, Symmetry};
pub use experiments::{
    ablation_table_csv, ablation_variants, run_ablations, run_degree_sweep, split_dataset, sweep_table_csv,
    train_and_score, AblationRow, DatasetSplit, ExperimentConfig, Scored, SweepRow, BENCHMARK_VAL_EVERY, DEPTH_SCALE_RANGE, Z_GAMMA_RANGE,
};
pub use loss::{compute_loss, loss_graph, LossConfig, LossNodes, LossTerms, SceneTensors};
pub use pipeline_check::{pipeline_gradcheck, PIPELINE_SAMPLES_PER_TENSOR};

use crate::autodiff::{Graph, Tensor};
use crate::datamodel::SceneSample;
use crate::error::{Error, Result};
use crate::eval::{mae_rmse, Unit};
use crate::network::{forward, predict_depth, save_checkpoint, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Write `epoch_{k}.ckpt` every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    /// Where logs and checkpoints go; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub augment: Augmentation,
    /// Cosine-anneal the learning rate from `lr` toward 0 over the epochs.
    pub cosine: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 10,
            seed: 0,
            checkpoint_every: 0,
            out_dir: None,
            augment: Augmentation::default(),
            cosine: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Usage(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Usage("epochs must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Usage("Adam decays must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Learning rate used throughout epoch `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if !self.cosine {
            return self.lr;
        }
        let t = (epoch - 1) as f64 / self.epochs as f64;
        0.5 * self.lr * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, params: &[Tensor]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|t| vec![0.0; t.numel()]).collect();
        Self {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, (w, gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gv;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gv * gv;
                *w -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// One gradient step on one scene; returns the loss terms before the update.
pub fn train_step(
    params: &mut ModelParams,
    opt: &mut Adam,
    sample: &SceneSample,
    scene: &SceneTensors,
    loss_cfg: &LossConfig,
) -> Result<LossTerms> {
    let mut g = Graph::new();
    let nodes = params.bind(&mut g, true);
    let cfg = *params.config();
    let out = forward(&mut g, &nodes, &cfg, &sample.scaleless, &sample.cloud)?;
    let loss = loss_graph(&mut g, out.head, scene, loss_cfg)?;
    let terms = loss.terms(&g);
    if !terms.total.is_finite() {
        return Ok(terms);
    }
    g.backward(loss.total)?;
    let grads: Vec<Tensor> = nodes.ids().iter().map(|&id| g.grad(id)).collect();
    opt.step(params.tensors_mut(), &grads);
    Ok(terms)
}

/// Mean per-scene MAE and RMSE in meters over all valid pixels.
pub fn validate(params: &ModelParams, samples: &[SceneSample]) -> Result<(f64, f64)> {
    let (mut mae, mut rmse) = (0.0, 0.0);
    for s in samples {
        let pred = predict_depth(params, &s.scaleless, &s.cloud)?;
        let m = mae_rmse(&pred.depth, &s.ground_truth, &s.mask, f64::INFINITY, Unit::Meters)?;
        mae += m.mae;
        rmse += m.rmse;
    }
    let n = samples.len() as f64;
    Ok((mae / n, rmse / n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Epoch means of the unweighted loss terms.
    pub terms: LossTerms,
    pub val_mae: f64,
    pub val_rmse: f64,
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,term1_l1,term2_l2,term3_slope,total,val_mae_m,val_rmse_m\n");
    for e in log {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            e.epoch, e.terms.l1, e.terms.l2, e.terms.slope, e.terms.total, e.val_mae, e.val_rmse
        )
        .expect("string write");
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation MAE.
    pub best: ModelParams,
    pub best_epoch: usize,
    /// Parameters after the last completed epoch (last finite state on divergence).
    pub last: ModelParams,
    pub log: Vec<EpochLog>,
    /// Set when training stopped on a non-finite loss.
    pub diverged: Option<String>,
}

fn write_out(dir: &Path, name: &str, params: &ModelParams) -> Result<()> {
    save_checkpoint(&dir.join(name), params)
}

/// Trains `model` on `train` scenes, one scene per step, shuffled per epoch.
///
/// Validation runs after every epoch; the best-validation parameters are kept.
/// A non-finite loss stops training and returns the last finite parameters
/// with `diverged` set.
pub fn train(
    model: ModelParams,
    train: &[SceneSample],
    val: &[SceneSample],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let val = if val.is_empty() { train } else { val };
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let net = *model.config();
    let scenes = train
        .iter()
        .map(|s| SceneTensors::for_network(s, &net))
        .collect::<Result<Vec<_>>>()?;

    let mut params = model;
    let mut opt = Adam::new(cfg, params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut aug_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    aug_rng.set_stream(2);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = (params.clone(), 0usize, f64::INFINITY);
    let mut diverged = None;

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        opt.set_lr(cfg.lr_at(epoch));
        let mut sum = LossTerms::default();
        let snapshot = params.clone();
        for &i in &order {
            let t = if cfg.augment.is_noop() {
                train_step(&mut params, &mut opt, &train[i], &scenes[i], loss_cfg)?
            } else {
                let s = augment(&train[i], &cfg.augment, &mut aug_rng)?;
                let st = SceneTensors::for_network(&s, &net)?;
                train_step(&mut params, &mut opt, &s, &st, loss_cfg)?
            };
            if !t.total.is_finite() || !params.all_finite() {
                diverged = Some(format!("non-finite loss in epoch {epoch} on scene `{}`", train[i].id));
                params = snapshot;
                break 'epochs;
            }
            sum.l1 += t.l1;
            sum.l2 += t.l2;
            sum.slope += t.slope;
            sum.total += t.total;
        }
        let n = train.len() as f64;
        let terms = LossTerms {
            l1: sum.l1 / n,
            l2: sum.l2 / n,
            slope: sum.slope / n,
            total: sum.total / n,
        };
        let (val_mae, val_rmse) = validate(&params, val)?;
        log.push(EpochLog {
            epoch,
            terms,
            val_mae,
            val_rmse,
        });
        if val_mae < best.2 {
            best = (params.clone(), epoch, val_mae);
            if let Some(dir) = &cfg.out_dir {
                write_out(dir, "best.ckpt", &params)?;
            }
        }
        if let Some(dir) = &cfg.out_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                write_out(dir, &format!("epoch_{epoch}.ckpt"), &params)?;
            }
        }
    }

    if let Some(dir) = &cfg.out_dir {
        write_out(dir, "last.ckpt", &params)?;
        let path = dir.join("log.csv");
        fs::write(&path, log_csv(&log)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(TrainOutcome {
        best: best.0,
        best_epoch: best.1,
        last: params,
        log,
        diverged,
    })
}
