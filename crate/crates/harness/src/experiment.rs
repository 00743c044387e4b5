//! Experiment drivers: single training runs, truncation-length sweeps and
//! the series-accelerator comparison.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sfn_core::linalg::{random_symmetric, random_vector, Vector};
use sfn_core::model::{Batch, LossKind, MlpObjective, MlpSpec, Objective, QuadraticProblem};
use sfn_core::optim::{optimizer_step, OptimizerConfig, TrainerState};
use sfn_core::oracle::exact_abs_inv_sqrt_apply;
use sfn_core::rng::{stream_seed, SplitMix64, STREAM_BATCH, STREAM_INIT, STREAM_PROBLEM, STREAM_SPLIT};
use sfn_core::series::{
    damped_squared_hvp, partial_sums, v_lower_bound, DenseHvp, SeriesConfig, SeriesState,
    DEFAULT_V_INIT,
};

use crate::config::{BatchSize, DatasetConfig, ModelConfig, RunConfig};
use crate::dataset::{load_csv_dataset, Dataset};
use crate::error::{io_err, HarnessError, Result};
use crate::logging::{
    write_records, write_series_records, write_summary, LossTriple, SeriesLogRecord, StepRecord,
    Summary,
};
use crate::synth::{make_synthetic, Synthetic};

/// A fully prepared problem instance. One lives per run, so the variant
/// size imbalance is harmless.
#[allow(clippy::large_enum_variant)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    Mlp {
        spec: MlpSpec,
        dataset: Dataset,
        train_batch: Batch,
        val_batch: Batch,
        test_batch: Batch,
    },
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim(),
            Problem::Mlp { spec, .. } => spec.param_count(),
        }
    }

    /// Seeded initial parameters: Glorot-style for MLPs, standard normal for
    /// quadratics.
    pub fn initial_params(&self, seed: u64) -> Vector {
        let mut rng = SplitMix64::new(stream_seed(seed, STREAM_INIT));
        match self {
            Problem::Quadratic(q) => random_vector(q.dim(), &mut rng),
            Problem::Mlp { spec, .. } => spec.init_params(&mut rng).into_flat(),
        }
    }

    pub fn eval_losses(&self, params: &Vector) -> Result<LossTriple> {
        Ok(match self {
            Problem::Quadratic(q) => {
                let f = q.loss(params)?;
                LossTriple {
                    train: f,
                    val: f,
                    test: f,
                }
            }
            Problem::Mlp {
                spec,
                train_batch,
                val_batch,
                test_batch,
                ..
            } => {
                let eval = |batch: &Batch| -> Result<f64> {
                    Ok(MlpObjective { spec, batch }.loss(params)?)
                };
                LossTriple {
                    train: eval(train_batch)?,
                    val: eval(val_batch)?,
                    test: eval(test_batch)?,
                }
            }
        })
    }
}

/// Resolves dataset and model configuration into a runnable problem.
pub fn prepare(cfg: &RunConfig) -> Result<Problem> {
    match (&cfg.dataset, &cfg.model) {
        (DatasetConfig::Synthetic { name, params }, ModelConfig::Quadratic) => {
            match make_synthetic(name, params, cfg.seed)? {
                Synthetic::Quadratic(q) => Ok(Problem::Quadratic(q)),
                Synthetic::Regression(_) => Err(HarnessError::Config(format!(
                    "synthetic problem '{name}' is a dataset; pair it with an mlp model"
                ))),
            }
        }
        (DatasetConfig::Synthetic { name, params }, ModelConfig::Mlp { .. }) => {
            match make_synthetic(name, params, cfg.seed)? {
                Synthetic::Regression(dataset) => build_mlp_problem(cfg, dataset),
                Synthetic::Quadratic(_) => Err(HarnessError::Config(format!(
                    "synthetic problem '{name}' is a quadratic; pair it with the quadratic model"
                ))),
            }
        }
        (
            DatasetConfig::Csv {
                path,
                split,
                standardise,
                target_cols,
            },
            ModelConfig::Mlp { .. },
        ) => {
            let dataset = load_csv_dataset(
                path,
                *split,
                *standardise,
                *target_cols,
                stream_seed(cfg.seed, STREAM_SPLIT),
            )?;
            build_mlp_problem(cfg, dataset)
        }
        (DatasetConfig::Csv { .. }, ModelConfig::Quadratic) => Err(HarnessError::Config(
            "csv datasets require an mlp model".into(),
        )),
    }
}

fn build_mlp_problem(cfg: &RunConfig, dataset: Dataset) -> Result<Problem> {
    let ModelConfig::Mlp {
        layer_sizes,
        activation,
        loss,
    } = &cfg.model
    else {
        unreachable!("caller matched on the mlp arm")
    };
    let spec = MlpSpec::new(layer_sizes.clone(), activation.to_core(), loss.to_core())
        .map_err(HarnessError::Core)?;
    if spec.input_width() != dataset.feature_width() {
        return Err(HarnessError::Config(format!(
            "model expects {} input features but the dataset provides {}",
            spec.input_width(),
            dataset.feature_width()
        )));
    }
    if spec.loss == LossKind::Mse && spec.output_width() != dataset.target_width() {
        return Err(HarnessError::Config(format!(
            "model produces {} outputs but the dataset has {} target columns",
            spec.output_width(),
            dataset.target_width()
        )));
    }
    let loss_kind = spec.loss;
    let train_batch = dataset.train.batch(loss_kind);
    let val_batch = dataset.val.batch(loss_kind);
    let test_batch = dataset.test.batch(loss_kind);
    Ok(Problem::Mlp {
        spec,
        dataset,
        train_batch,
        val_batch,
        test_batch,
    })
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub records: Vec<StepRecord>,
    /// Per-step series diagnostics; empty for non-series optimisers.
    pub series_records: Vec<SeriesLogRecord>,
    pub final_params: Vec<f64>,
}

/// Runs the configured experiment without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let opt_cfg: OptimizerConfig = cfg.optimizer.to_core();
    let problem = prepare(cfg)?;

    if let BatchSize::Size(b) = cfg.batch_size {
        if let Problem::Mlp { dataset, .. } = &problem {
            if b > dataset.train.len() {
                return Err(HarnessError::Config(format!(
                    "batch_size {b} exceeds the training set size {}",
                    dataset.train.len()
                )));
            }
        }
    }

    let mut state = TrainerState::new(problem.initial_params(cfg.seed), &opt_cfg, cfg.seed);
    let initial = problem.eval_losses(&state.params)?;

    let start = Instant::now();
    let mut logs = RunLogs {
        records: Vec::new(),
        series_records: Vec::new(),
        start,
    };
    let mut batch_rng = SplitMix64::new(stream_seed(cfg.seed, STREAM_BATCH));

    for _epoch in 0..cfg.epochs {
        match &problem {
            Problem::Quadratic(q) => {
                let info = optimizer_step(&mut state, q, &opt_cfg)?;
                logs.push(&problem, &state, info)?;
            }
            Problem::Mlp {
                spec,
                dataset,
                train_batch,
                ..
            } => match cfg.batch_size {
                BatchSize::Full => {
                    let objective = MlpObjective {
                        spec,
                        batch: train_batch,
                    };
                    let info = optimizer_step(&mut state, &objective, &opt_cfg)?;
                    logs.push(&problem, &state, info)?;
                }
                BatchSize::Size(batch_size) => {
                    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
                    batch_rng.shuffle(&mut order);
                    for rows in order.chunks(batch_size) {
                        let batch = dataset.train.batch_of_rows(rows, spec.loss);
                        let objective = MlpObjective {
                            spec,
                            batch: &batch,
                        };
                        let info = optimizer_step(&mut state, &objective, &opt_cfg)?;
                        logs.push(&problem, &state, info)?;
                    }
                }
            },
        }
    }
    let RunLogs {
        records,
        series_records,
        ..
    } = logs;

    let final_losses = records
        .last()
        .map(|r| LossTriple {
            train: r.train_loss,
            val: r.val_loss,
            test: r.test_loss,
        })
        .unwrap_or(initial);
    let min = records.iter().fold(initial, |acc, r| LossTriple {
        train: acc.train.min(r.train_loss),
        val: acc.val.min(r.val_loss),
        test: acc.test.min(r.test_loss),
    });

    Ok(RunOutput {
        summary: Summary {
            seed: cfg.seed,
            steps: records.len(),
            wall_ms: start.elapsed().as_millis() as u64,
            initial,
            final_losses,
            min,
        },
        records,
        series_records,
        final_params: state.params.as_slice().to_vec(),
    })
}

struct RunLogs {
    records: Vec<StepRecord>,
    series_records: Vec<SeriesLogRecord>,
    start: Instant,
}

impl RunLogs {
    fn push(
        &mut self,
        problem: &Problem,
        state: &TrainerState,
        info: sfn_core::optim::StepInfo,
    ) -> Result<()> {
        let losses = problem.eval_losses(&state.params)?;
        self.records.push(StepRecord {
            step: state.step,
            wall_ms: self.start.elapsed().as_millis() as u64,
            train_loss: losses.train,
            val_loss: losses.val,
            test_loss: losses.test,
            v: info.v,
            lambda: info.lambda,
            eta: info.eta,
            mu: info.mu,
            flags: info.flags.iter().map(|f| f.as_str().to_string()).collect(),
        });
        if let Some(d) = info.series_diagnostics {
            self.series_records.push(SeriesLogRecord {
                step: state.step,
                v: d.v,
                terms: d.terms,
                accel_order: d.accel_order,
                accel_fallback: d.accel_fallback,
                term_norms: d.term_norms,
            });
        }
        Ok(())
    }
}

/// Runs an experiment and writes `config.json`, `log.csv`, `summary.json`
/// and `params_final.json` into the configured output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    let output = execute(cfg)?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(cfg)?,
    )
    .map_err(io_err(dir.join("config.json")))?;
    write_records(&dir.join("log.csv"), &output.records)?;
    if !output.series_records.is_empty() {
        write_series_records(&dir.join("series_log.csv"), &output.series_records)?;
    }
    write_summary(&dir.join("summary.json"), &output.summary)?;
    std::fs::write(
        dir.join("params_final.json"),
        serde_json::to_string(&output.final_params)?,
    )
    .map_err(io_err(dir.join("params_final.json")))?;
    Ok(output)
}

/// Result of one truncation length in a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub terms: usize,
    pub seeds: Vec<u64>,
    pub final_train_losses: Vec<f64>,
    pub median_final_train: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

/// One run per truncation length per seed, sharing everything else. Runs
/// land in `out_dir/k{K}/seed{S}`; the report is written to
/// `out_dir/sweep.json`.
pub fn truncation_sweep(
    base: &RunConfig,
    k_list: &[usize],
    seeds: &[u64],
) -> Result<SweepReport> {
    if k_list.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one K".into()));
    }
    let mut entries = Vec::new();
    for &terms in k_list {
        let mut final_train_losses = Vec::new();
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.optimizer.series.terms = terms;
            cfg.seed = seed;
            cfg.out_dir = base.out_dir.join(format!("k{terms}")).join(format!("seed{seed}"));
            let out = run_experiment(&cfg)?;
            final_train_losses.push(out.summary.final_losses.train);
        }
        entries.push(SweepEntry {
            terms,
            seeds: seeds.to_vec(),
            median_final_train: median(&final_train_losses),
            final_train_losses,
        });
    }
    let report = SweepReport { entries };
    std::fs::create_dir_all(&base.out_dir).map_err(io_err(&base.out_dir))?;
    let path = base.out_dir.join("sweep.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(io_err(path))?;
    Ok(report)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Which accelerators to compare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcceleratorSpec {
    /// Raw partial sums.
    Raw,
    /// Modified epsilon algorithm of the given order.
    Sablonniere(usize),
    /// Plain Wynn epsilon algorithm of the given order.
    Wynn(usize),
}

impl AcceleratorSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let lower = text.trim().to_lowercase();
        if lower == "raw" {
            return Ok(AcceleratorSpec::Raw);
        }
        if let Some((name, order)) = lower.split_once(':') {
            let order: usize = order.parse().map_err(|_| {
                HarnessError::Config(format!("bad accelerator order in '{text}'"))
            })?;
            return match name {
                "sablonniere" => Ok(AcceleratorSpec::Sablonniere(order)),
                "wynn" => Ok(AcceleratorSpec::Wynn(order)),
                _ => Err(HarnessError::Config(format!("unknown accelerator '{text}'"))),
            };
        }
        Err(HarnessError::Config(format!(
            "unknown accelerator '{text}' (expected raw, sablonniere:N or wynn:N)"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            AcceleratorSpec::Raw => "raw".into(),
            AcceleratorSpec::Sablonniere(n) => format!("sablonniere:{n}"),
            AcceleratorSpec::Wynn(n) => format!("wynn:{n}"),
        }
    }
}

/// One (seed, accelerator, budget) measurement against the exact update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccelRow {
    pub seed: u64,
    pub accelerator: String,
    /// Number of partial sums consumed.
    pub terms: usize,
    pub cosine: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccelReport {
    pub dim: usize,
    pub n_terms: usize,
    pub rows: Vec<AccelRow>,
    /// Median cosine similarity per accelerator at the full term budget.
    pub median_final_cosine: Vec<(String, f64)>,
}

/// For each seed, draws a dense random symmetric Hessian and gradient,
/// computes the exact saddle-free update, and measures every accelerator's
/// direction (cosine) and magnitude (2-norm) against it as the term budget
/// grows.
pub fn accelerator_comparison(
    dim: usize,
    n_terms: usize,
    accelerators: &[AcceleratorSpec],
    n_seeds: u64,
    base_seed: u64,
) -> Result<AccelReport> {
    if dim > 500 {
        return Err(HarnessError::Config(format!(
            "dim {dim} exceeds the dense-oracle cap of 500"
        )));
    }
    let mut rows = Vec::new();
    for seed_idx in 0..n_seeds {
        let seed = base_seed.wrapping_add(seed_idx);
        let mut rng = SplitMix64::new(stream_seed(seed, STREAM_PROBLEM));
        // resample in the unlikely event of a numerically singular draw
        let (h, g, target) = loop {
            let h = random_symmetric(dim, &mut rng);
            let g = random_vector(dim, &mut rng);
            match exact_abs_inv_sqrt_apply(&h, &g) {
                Ok(target) => break (h, g, target),
                Err(sfn_core::Error::SingularMatrix { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        };

        // mirror the optimiser's scaling-factor rule
        let mut oracle = DenseHvp::new(&h);
        let h2g = damped_squared_hvp(&mut oracle, &g, 0.0)?;
        let mut state = SeriesState::new(DEFAULT_V_INIT);
        state.update_v(v_lower_bound(&g, &h2g)?);
        let v = state.v();
        let scale = 1.0 / v.sqrt();

        let cfg = SeriesConfig {
            terms: n_terms,
            accel_order: 0,
            damping: 0.0,
            v_init: v,
        };
        let sums = partial_sums(&g, &cfg, &mut state, &mut oracle)?;

        for accel in accelerators {
            for used in 1..=n_terms {
                let estimate = match accel {
                    AcceleratorSpec::Raw => Some(sums[used - 1].scaled(scale)),
                    AcceleratorSpec::Sablonniere(order) => {
                        let window = 2 * order + 1;
                        (used >= window).then(|| {
                            sfn_core::accel::epsilon_accelerate(
                                &sums[used - window..used],
                                *order,
                            )
                            .map(|x| x.scaled(scale))
                        })
                        .transpose()?
                    }
                    AcceleratorSpec::Wynn(order) => {
                        let window = 2 * order + 1;
                        (used >= window).then(|| {
                            sfn_core::accel::plain_wynn(&sums[used - window..used], *order)
                                .map(|x| x.scaled(scale))
                        })
                        .transpose()?
                    }
                };
                if let Some(estimate) = estimate {
                    rows.push(AccelRow {
                        seed,
                        accelerator: accel.label(),
                        terms: used,
                        cosine: estimate.cosine(&target),
                        norm: estimate.norm2(),
                    });
                }
            }
        }
    }

    let median_final_cosine = accelerators
        .iter()
        .map(|a| {
            let label = a.label();
            let finals: Vec<f64> = rows
                .iter()
                .filter(|r| r.accelerator == label && r.terms == n_terms)
                .map(|r| r.cosine)
                .collect();
            (label, median(&finals))
        })
        .collect();

    Ok(AccelReport {
        dim,
        n_terms,
        rows,
        median_final_cosine,
    })
}

/// Serialises an accelerator report: a CSV of raw rows plus a JSON summary.
pub fn write_accel_report(dir: &Path, report: &AccelReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut csv = String::from("seed,accelerator,terms,cosine,norm\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed, r.accelerator, r.terms, r.cosine, r.norm
        ));
    }
    std::fs::write(dir.join("accel_comparison.csv"), csv)
        .map_err(io_err(dir.join("accel_comparison.csv")))?;
    std::fs::write(
        dir.join("accel_report.json"),
        serde_json::to_string_pretty(report)?,
    )
    .map_err(io_err(dir.join("accel_report.json")))?;
    Ok(())
}
