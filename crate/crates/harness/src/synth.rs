//! Synthetic problem generators, all deterministic in the seed.

use serde_json::Value;
use sfn_core::linalg::{random_symmetric, random_vector, symmetric_with_spectrum, SymMatrix, Vector};
use sfn_core::model::{Activation, LossKind, MlpSpec, ParamVector, QuadraticProblem};
use sfn_core::rng::{stream_seed, SplitMix64, STREAM_PROBLEM, STREAM_SPLIT};

use crate::dataset::{split_rows, Dataset};
use crate::error::{HarnessError, Result};

/// A generated problem: either an explicit quadratic or a regression
/// dataset for an MLP.
#[derive(Debug, Clone)]
pub enum Synthetic {
    Quadratic(QuadraticProblem),
    Regression(Dataset),
}

fn param_f64(params: &Value, key: &str, default: f64) -> f64 {
    params.get(key).and_then(Value::as_f64).unwrap_or(default)
}

fn param_usize(params: &Value, key: &str, default: usize) -> usize {
    params
        .get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .unwrap_or(default)
}

/// Builds a named synthetic problem.
///
/// Kinds:
/// - `random_sym_hessian {dim}`: dense standard-normal matrix symmetrised
///   as `(G + G^T)/2`, with a standard-normal linear term.
/// - `quadratic_spectrum {eigenvalues}`: `Q diag(eigenvalues) Q^T` for a
///   seeded random orthonormal `Q`, zero linear term unless `b` is given.
/// - `saddle_2d`: the quadratic with Hessian `diag(1, -1)`.
/// - `mlp_regression {rows, features, noise, teacher_hidden}`: inputs drawn
///   standard normal, targets from a seeded tanh teacher network plus
///   noise, standardised, split 0.8/0.1/0.1.
pub fn make_synthetic(kind: &str, params: &Value, seed: u64) -> Result<Synthetic> {
    let mut rng = SplitMix64::new(stream_seed(seed, STREAM_PROBLEM));
    match kind {
        "random_sym_hessian" => {
            let dim = param_usize(params, "dim", 100);
            let h = random_symmetric(dim, &mut rng);
            let b = random_vector(dim, &mut rng);
            Ok(Synthetic::Quadratic(QuadraticProblem::new(h, b)?))
        }
        "quadratic_spectrum" => {
            let eigenvalues: Vec<f64> = params
                .get("eigenvalues")
                .and_then(Value::as_array)
                .ok_or_else(|| {
                    HarnessError::Config("quadratic_spectrum needs an 'eigenvalues' array".into())
                })?
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        HarnessError::Config("eigenvalues must be numbers".into())
                    })
                })
                .collect::<Result<_>>()?;
            let h = symmetric_with_spectrum(&eigenvalues, &mut rng);
            let b = match params.get("b").and_then(Value::as_array) {
                Some(arr) => Vector::from_vec(
                    arr.iter().filter_map(Value::as_f64).collect::<Vec<_>>(),
                ),
                None => Vector::zeros(eigenvalues.len()),
            };
            Ok(Synthetic::Quadratic(QuadraticProblem::new(h, b)?))
        }
        "saddle_2d" => Ok(Synthetic::Quadratic(QuadraticProblem::new(
            SymMatrix::diag(&[1.0, -1.0]),
            Vector::zeros(2),
        )?)),
        "mlp_regression" => {
            let rows = param_usize(params, "rows", 256);
            let features = param_usize(params, "features", 8);
            let noise = param_f64(params, "noise", 0.05);
            let teacher_hidden = param_usize(params, "teacher_hidden", 16);
            Ok(Synthetic::Regression(mlp_regression(
                rows,
                features,
                noise,
                teacher_hidden,
                &mut rng,
                seed,
            )?))
        }
        other => Err(HarnessError::UnknownSynthetic(other.to_string())),
    }
}

/// Regression data from a random tanh teacher network.
fn mlp_regression(
    rows: usize,
    features: usize,
    noise: f64,
    teacher_hidden: usize,
    rng: &mut SplitMix64,
    seed: u64,
) -> Result<Dataset> {
    let teacher = MlpSpec::new(
        vec![features, teacher_hidden, 1],
        Activation::Tanh,
        LossKind::Mse,
    )?;
    // widen the init so the teacher is distinctly non-linear
    let teacher_params = {
        let mut p = teacher.init_params(rng).into_flat();
        p.scale_in_place(2.0);
        ParamVector::from_flat(&teacher, p)?
    };

    let inputs: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..features).map(|_| rng.next_normal()).collect())
        .collect();
    let input_matrix = sfn_core::linalg::DenseMatrix::from_rows(inputs.clone());
    let outputs = teacher.predict(&teacher_params, &input_matrix)?;

    let mut raw: Vec<f64> = (0..rows).map(|i| outputs[(i, 0)]).collect();
    for y in &mut raw {
        *y += noise * rng.next_normal();
    }
    // standardise targets so losses are comparable across seeds
    let mean = raw.iter().sum::<f64>() / rows as f64;
    let std = (raw.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / rows as f64)
        .sqrt()
        .max(1e-12);

    let mut table = inputs;
    for (row, y) in table.iter_mut().zip(&raw) {
        row.push((y - mean) / std);
    }
    split_rows(table, [0.8, 0.1, 0.1], false, 1, stream_seed(seed, STREAM_SPLIT))
}
