//! Command-line front end.
//!
//! Every subcommand reads an optional `--config` key-value file; flags and
//! repeated `--set key=value` pairs override it, and `--seed` overrides the
//! `seed` key. Exit codes: 0 success, 1 usage error, 2 data error, 3
//! numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::autodiff::gradcheck::{op_suite, GradCheckReport, MAX_REL_ERROR};
use crate::baselines::{fit_poly_dense, fit_poly_sparse, residual_sse};
use crate::config::KvConfig;
use crate::datamodel::{load_dataset, PolyCoefficients, SceneSample};
use crate::error::{Error, Result};
use crate::eval::{evaluate_method, predict, Method, Unit, DEFAULT_CAPS};
use crate::network::{load_checkpoint, predict_coefficients, save_checkpoint, ModelParams, NetConfig};
use crate::polytransform::{inflection_points, sample_curve, CurvatureChange, CURVE_SAMPLES};
use crate::synthgen::{generate_dataset, SceneSpec};
use crate::training::{
    ablation_table_csv, log_csv, pipeline_gradcheck, run_ablations, run_degree_sweep, split_dataset, sweep_table_csv,
    train, DatasetSplit, ExperimentConfig, BENCHMARK_VAL_EVERY,
};

/// Default validation stride of the parity split.
pub const DEFAULT_VAL_EVERY: usize = BENCHMARK_VAL_EVERY;

/// Degrees swept when `degrees` is not configured.
pub const DEFAULT_SWEEP_DEGREES: [usize; 6] = [1, 2, 4, 6, 8, 10];

#[derive(Debug, Parser)]
#[command(name = "polydepth", version, about = "Polynomial metric alignment of scaleless depth maps")]
struct Cli {
    /// Key-value config file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on the parity split of a dataset.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Output directory for checkpoints and `log.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one alignment method.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// network, median, linear, poly-dense, poly-sparse or raw.
        #[arg(long)]
        method: String,
        /// Degree for the polynomial methods.
        #[arg(long)]
        degree: Option<usize>,
        /// Checkpoint for `--method network`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Scenes to score: all, train, val or test.
        #[arg(long)]
        split: Option<String>,
        /// Comma-separated caps in meters.
        #[arg(long)]
        caps: Option<String>,
        /// m or mm.
        #[arg(long)]
        unit: Option<String>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form polynomial fit per scene.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        degree: Option<usize>,
        /// dense (against ground truth) or sparse (against radar depths).
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degree sensitivity sweep.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated degrees.
        #[arg(long)]
        degrees: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Architecture and loss ablations.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient checks of every operation and of the full training loss.
    Gradcheck,
    /// Sample a transform curve and its inflection points.
    Inspect {
        /// Comma-separated coefficients `c0..cN`.
        #[arg(long, conflicts_with = "checkpoint")]
        coeffs: Option<String>,
        /// Normalizer of explicit coefficients.
        #[arg(long, requires = "coeffs")]
        z_max: Option<f64>,
        /// Checkpoint whose prediction on `--scene` is inspected.
        #[arg(long, requires_all = ["data", "scene"])]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        scene: Option<String>,
        /// Directory for `curve.csv` and `inflections.csv`; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset directory with a manifest.
    #[arg(long)]
    data: PathBuf,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 1,
        Error::Conditioning(_) | Error::Numerical(_) => 3,
        Error::Dimension(_)
        | Error::Format { .. }
        | Error::Dataset { .. }
        | Error::Spec(_)
        | Error::Degenerate(_)
        | Error::Rank(_)
        | Error::Underdetermined { .. }
        | Error::NoRadar
        | Error::Io { .. } => 2,
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn settings(cli: &Cli) -> Result<KvConfig> {
    let mut c = match &cli.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::new(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        c.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        c.set("seed", seed);
    }
    Ok(c)
}

fn set_opt<T: ToString>(c: &mut KvConfig, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        c.set(key, v.to_string());
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(p, text).map_err(|e| Error::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_split(dir: &Path, c: &KvConfig) -> Result<DatasetSplit> {
    split_dataset(&load_dataset(dir)?, c.get_or("val_every", DEFAULT_VAL_EVERY)?)
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut c = settings(&cli)?;
    match &cli.command {
        Command::Synth { count, out } => {
            set_opt(&mut c, "count", count);
            let spec = SceneSpec::from_config(&c)?;
            let count = c.get_or("count", 200usize)?;
            let ids = generate_dataset(out, &spec, count, spec.seed)?;
            println!("wrote {} scenes to {}", ids.len(), out.display());
        }
        Command::Train {
            data,
            degree,
            epochs,
            out,
        } => {
            set_opt(&mut c, "degree", degree);
            set_opt(&mut c, "epochs", epochs);
            let mut exp = ExperimentConfig::benchmark().overridden(&c)?;
            exp.train.out_dir = Some(out.clone());
            let split = load_split(&data.data, &c)?;
            let net = NetConfig {
                disable_prototypes: exp.loss.disable_prototypes,
                disable_fusion: exp.loss.disable_fusion,
                ..exp.net
            };
            let outcome = train(ModelParams::init(net)?, &split.train, &split.val, &exp.train, &exp.loss)?;
            exp.to_config().save(&out.join("train.cfg"))?;
            print!("{}", log_csv(&outcome.log));
            if let Some(reason) = outcome.diverged {
                return Err(Error::Numerical(format!("{reason}; last finite checkpoint kept")));
            }
            println!("best epoch {} written to {}", outcome.best_epoch, out.join("best.ckpt").display());
        }
        Command::Eval {
            data,
            method,
            degree,
            checkpoint,
            split,
            caps,
            unit,
            out,
        } => {
            set_opt(&mut c, "degree", degree);
            set_opt(&mut c, "split", split);
            set_opt(&mut c, "caps", caps);
            set_opt(&mut c, "unit", unit);
            let method = parse_method(method, &c, checkpoint.as_deref())?;
            let samples = select_split(&data.data, &c)?;
            let caps = c.get_list::<f64>("caps")?.unwrap_or_else(|| DEFAULT_CAPS.to_vec());
            let unit: Unit = c.get_or("unit", "mm".to_string())?.parse().map_err(Error::Usage)?;
            let report = evaluate_method(&method, &samples, &caps, unit)?;
            write_or_print(out.as_deref(), &report.to_csv())?;
        }
        Command::Fit { data, degree, kind, out } => {
            set_opt(&mut c, "degree", degree);
            set_opt(&mut c, "kind", kind);
            let degree = c.get_or("degree", 3usize)?;
            let kind = c.get_or("kind", "dense".to_string())?;
            let samples = select_split(&data.data, &c)?;
            write_or_print(out.as_deref(), &fit_table(&samples, degree, &kind)?)?;
        }
        Command::Sweep {
            data,
            degrees,
            epochs,
            out,
        } => {
            set_opt(&mut c, "degrees", degrees);
            set_opt(&mut c, "epochs", epochs);
            let exp = ExperimentConfig::benchmark().overridden(&c)?;
            let degrees = c
                .get_list::<usize>("degrees")?
                .unwrap_or_else(|| DEFAULT_SWEEP_DEGREES.to_vec());
            let split = load_split(&data.data, &c)?;
            let rows = run_degree_sweep(&split, &degrees, &exp)?;
            create_dir(out)?;
            for r in &rows {
                save_checkpoint(&out.join(format!("degree_{}.ckpt", r.degree)), &r.model)?;
            }
            let table = sweep_table_csv(&rows);
            write_or_print(Some(&out.join("sweep.csv")), &table)?;
            print!("{table}");
        }
        Command::Ablate { data, epochs, out } => {
            set_opt(&mut c, "epochs", epochs);
            let exp = ExperimentConfig::benchmark().overridden(&c)?;
            let split = load_split(&data.data, &c)?;
            let rows = run_ablations(&split, &exp)?;
            create_dir(out)?;
            for r in &rows {
                save_checkpoint(&out.join(format!("{}.ckpt", r.name)), &r.model)?;
            }
            let table = ablation_table_csv(&rows);
            write_or_print(Some(&out.join("ablations.csv")), &table)?;
            print!("{table}");
        }
        Command::Gradcheck => return gradcheck(&c),
        Command::Inspect {
            coeffs,
            z_max,
            checkpoint,
            data,
            scene,
            out,
        } => {
            let c = match (coeffs, checkpoint) {
                (Some(list), _) => {
                    let values = list
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::Usage(format!("--coeffs: {e}")))?;
                    PolyCoefficients::new(values, z_max.unwrap_or(1.0))?
                }
                (None, Some(ckpt)) => {
                    let params = load_checkpoint(ckpt)?;
                    let dir = data.as_ref().expect("clap enforces --data");
                    let id = scene.as_ref().expect("clap enforces --scene");
                    let samples = load_dataset(dir)?;
                    let s = samples.iter().find(|s| &s.id == id).ok_or_else(|| Error::Dataset {
                        id: id.clone(),
                        reason: "not in the manifest".into(),
                    })?;
                    predict_coefficients(&params, &s.scaleless, &s.cloud)?
                }
                (None, None) => return Err(Error::Usage("inspect needs --coeffs or --checkpoint".into())),
            };
            let (curve, roots) = inspect_tables(&c);
            match out {
                Some(dir) => {
                    create_dir(dir)?;
                    write_or_print(Some(&dir.join("curve.csv")), &curve)?;
                    write_or_print(Some(&dir.join("inflections.csv")), &roots)?;
                }
                None => write_or_print(None, &format!("{curve}\n{roots}"))?,
            }
        }
    }
    Ok(0)
}

fn parse_method(name: &str, c: &KvConfig, checkpoint: Option<&Path>) -> Result<Method> {
    let degree = || -> Result<usize> {
        c.get("degree")?
            .ok_or_else(|| Error::Usage(format!("--method {name} needs --degree")))
    };
    Ok(match name {
        "network" => {
            let path = checkpoint.ok_or_else(|| Error::Usage("--method network needs --checkpoint".into()))?;
            Method::Network(Box::new(load_checkpoint(path)?))
        }
        "median" => Method::Median,
        "linear" => Method::Linear,
        "raw" => Method::Raw,
        "poly-dense" => Method::PolyDense(degree()?),
        "poly-sparse" => Method::PolySparse(degree()?),
        other => {
            return Err(Error::Usage(format!(
                "unknown method `{other}` (network, median, linear, poly-dense, poly-sparse, raw)"
            )))
        }
    })
}

fn select_split(dir: &Path, c: &KvConfig) -> Result<Vec<SceneSample>> {
    let which = c.get_or("split", "all".to_string())?;
    if which == "all" {
        return load_dataset(dir);
    }
    let split = load_split(dir, c)?;
    match which.as_str() {
        "train" => Ok(split.train),
        "val" => Ok(split.val),
        "test" => Ok(split.test),
        other => Err(Error::Usage(format!("unknown split `{other}` (all, train, val, test)"))),
    }
}

/// Per-scene coefficients, SSE and MAE (meters) of a closed-form fit.
pub fn fit_table(samples: &[SceneSample], degree: usize, kind: &str) -> Result<String> {
    let mut out = String::from("scene,kind,degree,z_max");
    for i in 0..=degree {
        write!(out, ",c{i}").expect("string write");
    }
    out.push_str(",sse_m2,mae_m\n");
    for s in samples {
        let c = match kind {
            "dense" => fit_poly_dense(&s.scaleless, &s.ground_truth, &s.mask, degree)?,
            "sparse" => fit_poly_sparse(&s.scaleless, &s.cloud, &s.projection(), degree)?,
            other => return Err(Error::Usage(format!("unknown fit kind `{other}` (dense, sparse)"))),
        };
        let sse = residual_sse(&c, &s.scaleless, &s.ground_truth, &s.mask)?;
        let method = if kind == "dense" {
            Method::PolyDense(degree)
        } else {
            Method::PolySparse(degree)
        };
        let pred = predict(&method, s)?;
        let mae = crate::eval::mae_rmse(&pred, &s.ground_truth, &s.mask, f64::INFINITY, Unit::Meters)?.mae;
        write!(out, "{},{kind},{degree},{}", s.id, c.z_max()).expect("string write");
        for v in c.coeffs() {
            write!(out, ",{v:e}").expect("string write");
        }
        writeln!(out, ",{sse:e},{mae:.6}").expect("string write");
    }
    Ok(out)
}

/// `z,depth,slope` on [`CURVE_SAMPLES`] points, and `z,change` per inflection.
pub fn inspect_tables(c: &PolyCoefficients) -> (String, String) {
    let mut curve = String::from("z,depth,slope\n");
    for s in sample_curve(c, CURVE_SAMPLES) {
        writeln!(curve, "{:e},{:e},{:e}", s.z, s.depth, s.slope).expect("string write");
    }
    let mut roots = String::from("z,change\n");
    for p in inflection_points(c).points {
        let change = match p.change {
            CurvatureChange::ConcaveToConvex => "concave-to-convex",
            CurvatureChange::ConvexToConcave => "convex-to-concave",
        };
        writeln!(roots, "{:e},{change}", p.z).expect("string write");
    }
    (curve, roots)
}

fn gradcheck(c: &KvConfig) -> Result<i32> {
    let seed = c.get_or("seed", 0u64)?;
    let mut reports: Vec<GradCheckReport> = op_suite(seed)?;
    reports.extend(pipeline_gradcheck(seed, NetConfig::default())?);
    let mut table = String::from("check,entries,max_rel_error,passed\n");
    let mut worst = 0.0_f64;
    for r in &reports {
        worst = worst.max(r.max_rel_error);
        writeln!(table, "{},{},{:e},{}", r.name, r.checked, r.max_rel_error, r.passed()).expect("string write");
    }
    print!("{table}");
    println!("max relative error {worst:e} (threshold {MAX_REL_ERROR:e})");
    Ok(if worst < MAX_REL_ERROR { 0 } else { 3 })
}
