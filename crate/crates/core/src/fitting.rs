//! Joint maximum-likelihood fits of production and comprehension data.
//!
//! Comprehension sliders are scored with a tobit (censored normal)
//! likelihood around the model's posterior; production choices with an
//! ε-smoothed categorical. Parameters are searched with Nelder–Mead on an
//! unconstrained scale, restarted from a Latin hypercube of starting points.
//!
//! ```
//! use rsa_exh::fitting::{comprehension_loglik, production_loglik};
//! use rsa_exh::scenario::{Message, MessageDist};
//!
//! assert!((comprehension_loglik(1.0, 1.0, 0.2) - 0.5f64.ln()).abs() < 1e-12);
//! let pred = MessageDist([0.0, 1.0, 0.0]);
//! let ll = production_loglik(&pred, Message::A, 0.022).unwrap();
//! assert!((ll - (0.022f64 / 1.066).ln()).abs() < 1e-12);
//! ```

use std::io::Write;

use argmin::core::{CostFunction, Error as ArgminError, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{smoothed, Condition, Dataset, NoiseParams};
use crate::math::{fmt_sig, log_ndtr, log_npdf, logistic};
use crate::models::{predict, ModelError, ModelId};
use crate::scenario::{Message, MessageDist, ModelParams, Prior, World};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("message {message} has probability 0 and epsilon is 0")]
    NonfiniteLikelihood { message: Message },
    #[error("row {index}: {source}")]
    Row { index: usize, source: Box<FitError> },
    #[error("production response {0} must be merged into a model message first")]
    UnmergedMessage(String),
    #[error("row has no usable response")]
    MissingResponse,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid noise parameters {0:?}")]
    InvalidNoise(NoiseParams),
    #[error("no restart of {model} reached a finite likelihood")]
    NoConvergence { model: ModelId },
    #[error("dataset has no rows")]
    EmptyDataset,
}

/// `ln((S(u) + ε) / (1 + 3ε))`.
pub fn production_loglik(
    pred: &MessageDist,
    observed: Message,
    epsilon: f64,
) -> Result<f64, FitError> {
    let s = pred[observed];
    if s <= 0.0 && epsilon <= 0.0 {
        return Err(FitError::NonfiniteLikelihood { message: observed });
    }
    Ok(smoothed(pred.0, epsilon)[observed.index()].ln())
}

/// Tobit log-likelihood of a slider response censored to `[0, 1]`.
pub fn comprehension_loglik(pred: f64, observed: f64, sigma: f64) -> f64 {
    if observed <= 0.0 {
        log_ndtr(-pred / sigma)
    } else if observed >= 1.0 {
        log_ndtr((pred - 1.0) / sigma)
    } else {
        log_npdf((observed - pred) / sigma) - sigma.ln()
    }
}

#[derive(Debug, Clone, Copy)]
enum Response {
    Comprehension { condition: Condition, value: f64 },
    Production { world: World, message: Message },
}

/// Rows with their prior replaced by an index into the distinct priors,
/// so predictions are computed once per prior level.
#[derive(Debug, Clone)]
struct Prepared {
    priors: Vec<Prior>,
    /// First row at each prior, for error reporting.
    first_row: Vec<usize>,
    rows: Vec<(usize, Response)>,
}

fn prepare(dataset: &Dataset) -> Result<Prepared, FitError> {
    let mut prepared = Prepared {
        priors: Vec::new(),
        first_row: Vec::new(),
        rows: Vec::new(),
    };
    for (index, row) in dataset.rows.iter().enumerate() {
        let wrap = |e: FitError| FitError::Row {
            index,
            source: Box::new(e),
        };
        let response = match row.condition {
            Condition::UttA | Condition::UttAB => {
                let value = row
                    .posterior
                    .ok_or_else(|| wrap(FitError::MissingResponse))?;
                Response::Comprehension {
                    condition: row.condition,
                    value,
                }
            }
            Condition::WorldA | Condition::WorldAB => {
                let raw = row.message.ok_or_else(|| wrap(FitError::MissingResponse))?;
                let message = raw
                    .model_message()
                    .ok_or_else(|| wrap(FitError::UnmergedMessage(raw.to_string())))?;
                let world = row.condition.world().expect("production condition");
                Response::Production { world, message }
            }
        };
        let prior = Prior::new(row.prior).map_err(|e| wrap(ModelError::from(e).into()))?;
        let level = match prepared.priors.iter().position(|q| *q == prior) {
            Some(k) => k,
            None => {
                prepared.priors.push(prior);
                prepared.first_row.push(index);
                prepared.priors.len() - 1
            }
        };
        prepared.rows.push((level, response));
    }
    Ok(prepared)
}

fn check_noise(noise: &NoiseParams) -> Result<(), FitError> {
    let ok = noise.sigma_a > 0.0
        && noise.sigma_ab > 0.0
        && noise.epsilon >= 0.0
        && [noise.sigma_a, noise.sigma_ab, noise.epsilon]
            .iter()
            .all(|x| x.is_finite());
    if ok {
        Ok(())
    } else {
        Err(FitError::InvalidNoise(*noise))
    }
}

fn loglik_prepared(
    model: ModelId,
    params: &ModelParams,
    noise: &NoiseParams,
    data: &Prepared,
) -> Result<f64, FitError> {
    let predictions = data
        .priors
        .iter()
        .zip(&data.first_row)
        .map(|(&p, &index)| {
            predict(model, params, p).map_err(|e| FitError::Row {
                index,
                source: Box::new(e.into()),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    for (index, (level, response)) in data.rows.iter().enumerate() {
        let pred = &predictions[*level];
        total += match *response {
            Response::Comprehension {
                condition: Condition::UttA,
                value,
            } => comprehension_loglik(pred.post_a, value, noise.sigma_a),
            Response::Comprehension { value, .. } => {
                comprehension_loglik(pred.post_ab, value, noise.sigma_ab)
            }
            Response::Production { world, message } => {
                production_loglik(pred.production(world), message, noise.epsilon).map_err(|e| {
                    FitError::Row {
                        index,
                        source: Box::new(e),
                    }
                })?
            }
        };
    }
    Ok(total)
}

/// Log-likelihood of a preprocessed dataset. Comprehension rows are scored
/// against `post_A` (with `sigma_a`) or `post_AB` (with `sigma_ab`),
/// production rows against the model's production in the row's world, all
/// at the row's prior.
pub fn dataset_loglik(
    model: ModelId,
    params: &ModelParams,
    noise: &NoiseParams,
    dataset: &Dataset,
) -> Result<f64, FitError> {
    check_noise(noise)?;
    loglik_prepared(model, params, noise, &prepare(dataset)?)
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    lo: f64,
    hi: f64,
    /// Range Latin-hypercube starting points are drawn from.
    start: (f64, f64),
    log_start: bool,
}

impl Bound {
    fn to_natural(self, z: f64) -> f64 {
        self.lo + (self.hi - self.lo) * logistic(z)
    }

    fn to_free(self, x: f64) -> f64 {
        let u = ((x - self.lo) / (self.hi - self.lo)).clamp(1e-12, 1.0 - 1e-12);
        (u / (1.0 - u)).ln()
    }

    fn start_at(self, u: f64) -> f64 {
        let (a, b) = self.start;
        if self.log_start {
            (a.ln() + u * (b.ln() - a.ln())).exp()
        } else {
            a + u * (b - a)
        }
    }
}

const LAMBDA: Bound = Bound {
    lo: 0.0,
    hi: 1e3,
    start: (0.3, 30.0),
    log_start: true,
};
const DELTA: Bound = Bound {
    lo: 0.0,
    hi: 200.0,
    start: (0.0, 3.0),
    log_start: false,
};
const UNIT: Bound = Bound {
    lo: 0.0,
    hi: 1.0,
    start: (0.02, 0.98),
    log_start: false,
};
const SIGMA: Bound = Bound {
    lo: 0.0,
    hi: 5.0,
    start: (0.05, 1.0),
    log_start: false,
};
const EPSILON: Bound = Bound {
    lo: 0.0,
    hi: 1.0,
    start: (0.002, 0.2),
    log_start: false,
};

/// Which parameters are free for a given fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub model: ModelId,
    pub equal_costs: bool,
}

impl Layout {
    fn bounds(&self) -> Vec<Bound> {
        let mut b = vec![LAMBDA, DELTA];
        if !self.equal_costs {
            b.push(DELTA);
        }
        if self.model.uses_xi() {
            b.push(UNIT);
        }
        b.extend([SIGMA, SIGMA, EPSILON]);
        b
    }

    /// Number of free parameters, noise included.
    pub fn n_params(&self) -> usize {
        self.bounds().len()
    }

    fn decode(&self, z: &[f64]) -> (ModelParams, NoiseParams) {
        let x: Vec<f64> = self
            .bounds()
            .iter()
            .zip(z)
            .map(|(b, z)| b.to_natural(*z))
            .collect();
        let mut it = x.into_iter();
        let mut next = || it.next().expect("layout length");
        let lambda = next();
        let delta_ab = next();
        let delta_anb = if self.equal_costs { delta_ab } else { next() };
        let mut params = ModelParams::new(lambda, delta_ab, delta_anb);
        if self.model.uses_xi() {
            params = params.with_xi(next());
        }
        let noise = NoiseParams {
            sigma_a: next(),
            sigma_ab: next(),
            epsilon: next(),
        };
        (params, noise)
    }

    #[cfg(test)]
    fn encode(&self, params: &ModelParams, noise: &NoiseParams) -> Vec<f64> {
        let mut x = vec![params.lambda, params.delta_ab];
        if !self.equal_costs {
            x.push(params.delta_anb);
        }
        if self.model.uses_xi() {
            x.push(params.xi.unwrap_or(0.5));
        }
        x.extend([noise.sigma_a, noise.sigma_ab, noise.epsilon]);
        self.bounds()
            .iter()
            .zip(x)
            .map(|(b, x)| b.to_free(x))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: u64,
    /// Nelder–Mead stops when the standard deviation of the simplex's
    /// negative log-likelihoods falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 32,
            max_iters: 3000,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub params: ModelParams,
    pub noise: NoiseParams,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub converged: bool,
    pub n_restarts_used: usize,
    pub equal_costs: bool,
}

/// `2k - 2 ln L`.
pub fn aic(n_params: usize, loglik: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

/// Returned in place of `+inf` so the simplex ordering stays well defined.
const PENALTY: f64 = 1e300;

#[derive(Clone, Copy)]
struct Objective<'a> {
    layout: Layout,
    data: &'a Prepared,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> Result<f64, ArgminError> {
        let (params, noise) = self.layout.decode(z);
        Ok(
            match loglik_prepared(self.layout.model, &params, &noise, self.data) {
                Ok(ll) if ll.is_finite() => -ll,
                _ => PENALTY,
            },
        )
    }
}

struct Run {
    z: Vec<f64>,
    cost: f64,
    converged: bool,
}

fn nelder_mead(objective: Objective, start: Vec<f64>, options: &FitOptions) -> Option<Run> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += 1.0;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(options.tolerance)
        .ok()?;
    let result = Executor::new(objective, solver)
        .configure(|state| state.max_iters(options.max_iters))
        .run()
        .ok()?;
    let state = result.state();
    let z = state.get_best_param()?.clone();
    let converged = matches!(
        state.get_termination_reason(),
        Some(TerminationReason::SolverConverged)
    );
    Some(Run {
        z,
        cost: state.get_best_cost(),
        converged,
    })
}

fn latin_hypercube(n: usize, dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (point, s) in points.iter_mut().zip(strata) {
            point[d] = (s as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    points
}

/// Fits `model` to a preprocessed dataset. Each restart runs Nelder–Mead
/// and then once more from a fresh simplex around its optimum; the best
/// restart wins, ties going to the lower restart index.
pub fn fit(model: ModelId, dataset: &Dataset, options: &FitOptions) -> Result<FitResult, FitError> {
    fit_layout(
        Layout {
            model,
            equal_costs: false,
        },
        dataset,
        options,
    )
}

/// As [`fit`], with `Δ_ab = Δ_anb` sharing a single parameter.
pub fn fit_equal_costs(
    model: ModelId,
    dataset: &Dataset,
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    fit_layout(
        Layout {
            model,
            equal_costs: true,
        },
        dataset,
        options,
    )
}

fn fit_layout(
    layout: Layout,
    dataset: &Dataset,
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    if dataset.rows.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let data = prepare(dataset)?;
    let objective = Objective {
        layout,
        data: &data,
    };
    let bounds = layout.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let restarts = options.restarts.max(1);
    let starts: Vec<Vec<f64>> = latin_hypercube(restarts, bounds.len(), &mut rng)
        .into_iter()
        .map(|u| {
            bounds
                .iter()
                .zip(u)
                .map(|(b, u)| b.to_free(b.start_at(u)))
                .collect()
        })
        .collect();

    let runs: Vec<Option<Run>> = starts
        .into_par_iter()
        .map(|z0| {
            let first = nelder_mead(objective, z0, options)?;
            match nelder_mead(objective, first.z.clone(), options) {
                Some(second) if second.cost <= first.cost => Some(second),
                _ => Some(first),
            }
        })
        .collect();

    let mut best: Option<&Run> = None;
    for run in runs.iter().flatten() {
        if run.cost < PENALTY && best.is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let best = best.ok_or(FitError::NoConvergence {
        model: layout.model,
    })?;
    let (params, noise) = layout.decode(&best.z);
    let loglik = -best.cost;
    let n_params = layout.n_params();
    Ok(FitResult {
        model: layout.model,
        params,
        noise,
        loglik,
        n_params,
        aic: aic(n_params, loglik),
        converged: best.converged,
        n_restarts_used: restarts,
        equal_costs: layout.equal_costs,
    })
}

/// One row of a model comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: ModelId,
    pub outcome: Result<FitResult, FitError>,
}

/// Fits every model and sorts by AIC, failed fits last.
pub fn compare(
    models: &[ModelId],
    dataset: &Dataset,
    options: &FitOptions,
    equal_costs: bool,
) -> Vec<CompareRow> {
    let mut rows: Vec<CompareRow> = models
        .iter()
        .map(|&model| CompareRow {
            model,
            outcome: fit_layout(Layout { model, equal_costs }, dataset, options),
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &CompareRow| r.outcome.as_ref().map(|f| f.aic).unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b))
    });
    rows
}

pub const FIT_COLUMNS: [&str; 12] = [
    "model",
    "lambda",
    "delta_ab",
    "delta_anb",
    "xi",
    "sigma_a",
    "sigma_ab",
    "epsilon",
    "loglik",
    "n_params",
    "aic",
    "converged",
];

/// Flat record of a fit, as written to CSV and JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: ModelId,
    pub lambda: Option<f64>,
    pub delta_ab: Option<f64>,
    pub delta_anb: Option<f64>,
    pub xi: Option<f64>,
    pub sigma_a: Option<f64>,
    pub sigma_ab: Option<f64>,
    pub epsilon: Option<f64>,
    pub loglik: Option<f64>,
    pub n_params: Option<usize>,
    pub aic: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&FitResult> for FitRecord {
    fn from(r: &FitResult) -> Self {
        FitRecord {
            model: r.model,
            lambda: Some(r.params.lambda),
            delta_ab: Some(r.params.delta_ab),
            delta_anb: Some(r.params.delta_anb),
            xi: r.params.xi,
            sigma_a: Some(r.noise.sigma_a),
            sigma_ab: Some(r.noise.sigma_ab),
            epsilon: Some(r.noise.epsilon),
            loglik: Some(r.loglik),
            n_params: Some(r.n_params),
            aic: Some(r.aic),
            converged: r.converged,
            error: None,
        }
    }
}

impl From<&CompareRow> for FitRecord {
    fn from(row: &CompareRow) -> Self {
        match &row.outcome {
            Ok(r) => r.into(),
            Err(e) => FitRecord {
                model: row.model,
                lambda: None,
                delta_ab: None,
                delta_anb: None,
                xi: None,
                sigma_a: None,
                sigma_ab: None,
                epsilon: None,
                loglik: None,
                n_params: None,
                aic: None,
                converged: false,
                error: Some(e.to_string()),
            },
        }
    }
}

pub fn write_fits_csv<W: Write>(records: &[FitRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_COLUMNS)?;
    let num = |x: Option<f64>| x.map(|v| fmt_sig(v, 9)).unwrap_or_default();
    for r in records {
        w.write_record([
            r.model.name().to_string(),
            num(r.lambda),
            num(r.delta_ab),
            num(r.delta_anb),
            num(r.xi),
            num(r.sigma_a),
            num(r.sigma_ab),
            num(r.epsilon),
            num(r.loglik),
            r.n_params.map(|k| k.to_string()).unwrap_or_default(),
            num(r.aic),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{preprocess, synth_generate, Design, ObservationRow, Survey};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn production_examples() {
        let certain = MessageDist([1.0, 0.0, 0.0]);
        assert_eq!(production_loglik(&certain, Message::A, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            production_loglik(&certain, Message::AAndB, 0.022).unwrap(),
            -3.881,
            epsilon = 1e-3
        );
        assert_eq!(
            production_loglik(&certain, Message::AAndB, 0.0),
            Err(FitError::NonfiniteLikelihood {
                message: Message::AAndB
            })
        );
    }

    #[test]
    fn comprehension_examples() {
        assert_abs_diff_eq!(
            comprehension_loglik(1.0, 1.0, 0.7),
            -std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let expected = (1.0 / (0.33 * (2.0 * std::f64::consts::PI).sqrt())).ln();
        assert_abs_diff_eq!(
            comprehension_loglik(0.5, 0.5, 0.33),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 0.1895, epsilon = 5e-4);
        // Lower censoring mirrors upper censoring.
        assert_abs_diff_eq!(
            comprehension_loglik(0.2, 0.0, 0.3),
            comprehension_loglik(0.8, 1.0, 0.3),
            epsilon = 1e-15
        );
    }

    #[test]
    fn aic_arithmetic() {
        assert_eq!(aic(7, -239.0), 492.0);
    }

    #[test]
    fn layout_counts() {
        let k = |model, equal_costs| Layout { model, equal_costs }.n_params();
        assert_eq!(k(ModelId::Wrsa, false), 7);
        assert_eq!(k(ModelId::Svrsa1, false), 7);
        assert_eq!(k(ModelId::BaseRsa, false), 6);
        assert_eq!(k(ModelId::RsaLi2, true), 5);
    }

    #[test]
    fn layout_round_trip() {
        let layout = Layout {
            model: ModelId::Wrsa,
            equal_costs: false,
        };
        let params = ModelParams::new(3.9, 0.01, 0.37).with_xi(0.86);
        let noise = NoiseParams {
            sigma_a: 0.33,
            sigma_ab: 0.22,
            epsilon: 0.022,
        };
        let (p2, n2) = layout.decode(&layout.encode(&params, &noise));
        assert_abs_diff_eq!(p2.lambda, 3.9, epsilon = 1e-9);
        assert_abs_diff_eq!(p2.delta_anb, 0.37, epsilon = 1e-9);
        assert_abs_diff_eq!(p2.xi.unwrap(), 0.86, epsilon = 1e-9);
        assert_abs_diff_eq!(n2.epsilon, 0.022, epsilon = 1e-9);
    }

    fn comprehension_row(prior: f64, posterior: f64) -> ObservationRow {
        ObservationRow {
            participant_id: "p".into(),
            survey: Survey::Comprehension,
            prior,
            condition: Condition::UttA,
            posterior: Some(posterior),
            message: None,
            length: None,
        }
    }

    #[test]
    fn dataset_loglik_examples() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        let noise = NoiseParams {
            sigma_a: 0.3,
            sigma_ab: 0.2,
            epsilon: 0.02,
        };
        assert_eq!(
            dataset_loglik(ModelId::BaseRsa, &params, &noise, &Dataset::default()).unwrap(),
            0.0
        );

        let pred = predict(ModelId::BaseRsa, &params, Prior::new(0.4).unwrap()).unwrap();
        let d = Dataset::new(vec![comprehension_row(0.4, pred.post_a)]);
        assert_abs_diff_eq!(
            dataset_loglik(ModelId::BaseRsa, &params, &noise, &d).unwrap(),
            comprehension_loglik(pred.post_a, pred.post_a, 0.3),
            epsilon = 1e-15
        );
    }

    #[test]
    fn unmerged_messages_are_row_errors() {
        let row = ObservationRow {
            participant_id: "p".into(),
            survey: Survey::Production,
            prior: 0.5,
            condition: Condition::WorldA,
            posterior: None,
            message: Some(crate::data::ResponseMessage::NotB),
            length: None,
        };
        let d = Dataset::new(vec![comprehension_row(0.5, 0.5), row]);
        let noise = NoiseParams {
            sigma_a: 0.3,
            sigma_ab: 0.2,
            epsilon: 0.02,
        };
        match dataset_loglik(
            ModelId::BaseRsa,
            &ModelParams::new(1.0, 0.0, 0.0),
            &noise,
            &d,
        ) {
            Err(FitError::Row { index: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_fit_is_deterministic_and_consistent() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        let noise = NoiseParams {
            sigma_a: 0.2,
            sigma_ab: 0.1,
            epsilon: 0.03,
        };
        let data = preprocess(
            &synth_generate(ModelId::BaseRsa, &params, &noise, &Design::default(), 5).unwrap(),
        );
        let options = FitOptions {
            restarts: 4,
            ..FitOptions::default()
        };
        let a = fit(ModelId::BaseRsa, &data, &options).unwrap();
        let b = fit(ModelId::BaseRsa, &data, &options).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.aic, aic(a.n_params, a.loglik));
        let truth = dataset_loglik(ModelId::BaseRsa, &params, &noise, &data).unwrap();
        assert!(a.loglik >= truth - 1e-6);
        let eq = fit_equal_costs(ModelId::BaseRsa, &data, &options).unwrap();
        assert!(eq.loglik <= a.loglik + 1e-6);
        assert_eq!(eq.n_params, 5);
    }

    #[test]
    fn csv_columns_are_exact() {
        let record = FitRecord::from(&FitResult {
            model: ModelId::Wrsa,
            params: ModelParams::new(3.9, 0.0, 0.37).with_xi(0.86),
            noise: NoiseParams {
                sigma_a: 0.33,
                sigma_ab: 0.22,
                epsilon: 0.022,
            },
            loglik: -239.0,
            n_params: 7,
            aic: 492.0,
            converged: true,
            n_restarts_used: 32,
            equal_costs: false,
        });
        let mut buf = Vec::new();
        write_fits_csv(&[record], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "model,lambda,delta_ab,delta_anb,xi,sigma_a,sigma_ab,epsilon,loglik,n_params,aic,converged\n\
             wrsa,3.9,0,0.37,0.86,0.33,0.22,0.022,-239,7,492,true\n"
        );
    }

    proptest! {
        #[test]
        fn loglik_ignores_row_order(seed in 0u64..50, shift in 1usize..100) {
            let params = ModelParams::new(2.0, 0.3, 0.6).with_xi(0.4);
            let noise = NoiseParams { sigma_a: 0.3, sigma_ab: 0.2, epsilon: 0.05 };
            let d = preprocess(&synth_generate(ModelId::Svrsa2, &params, &noise, &Design::default(), seed).unwrap());
            let mut rotated = d.clone();
            rotated.rows.rotate_left(shift);
            let a = dataset_loglik(ModelId::Svrsa2, &params, &noise, &d).unwrap();
            let b = dataset_loglik(ModelId::Svrsa2, &params, &noise, &rotated).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }
}
