//! Each model variant expressed as a [`GenericScenario`] and evaluated by
//! brute-force recursion. Used to pin the closed forms in
//! [`crate::models`].
//!
//! ```
//! use rsa_exh::models::{predict, ModelId};
//! use rsa_exh::oracle::engine_predict;
//! use rsa_exh::scenario::{ModelParams, Prior};
//!
//! let params = ModelParams::new(3.0, 1.0, 1.2).with_xi(0.1);
//! let p = Prior::new(0.7).unwrap();
//! let closed = predict(ModelId::Wrsa, &params, p).unwrap();
//! let brute = engine_predict(ModelId::Wrsa, &params, p).unwrap();
//! assert!((closed.post_a - brute.post_a).abs() < 1e-9);
//! ```

use thiserror::Error;

use crate::engine::{
    EngineError, GenericScenario, LiftedRole, ListenerPrior, Recursion, ScenarioBuilder,
};
use crate::models::{ModelError, ModelId, Predictions};
use crate::scenario::{
    truth_value, Interpretation, Message, MessageDist, ModelParams, Prior, World,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn costs(params: &ModelParams) -> Vec<f64> {
    Message::ALL.iter().map(|&m| params.cost(m)).collect()
}

fn world_prior(p: f64) -> Vec<f64> {
    vec![1.0 - p, p]
}

fn literal(m: usize, w: usize) -> bool {
    truth_value(Message::ALL[m], World::ALL[w], Interpretation::Literal)
}

fn xi(model: ModelId, params: &ModelParams) -> Result<f64, ModelError> {
    params
        .xi
        .ok_or(ModelError::MissingParameter { model, name: "xi" })
}

/// The scenario a model variant reasons over, at prior `p`.
pub fn scenario_for(
    model: ModelId,
    params: &ModelParams,
    p: f64,
) -> Result<GenericScenario, OracleError> {
    let mut b = ScenarioBuilder::new(world_prior(p), costs(params));
    let scenario = match model {
        ModelId::BaseRsa => b.build(|m, w, _| literal(m, w))?,
        ModelId::Wrsa | ModelId::Bwrsa => {
            let omega = xi(model, params)?;
            let bg = b.lifted("background", vec![omega, 1.0 - omega], LiftedRole::Inferred);
            b.literal_prior_by(bg, vec![vec![0.5, 0.5], world_prior(p)]);
            if model == ModelId::Wrsa {
                b.listener_prior(ListenerPrior::Literal);
            }
            b.build(|m, w, _| literal(m, w))?
        }
        ModelId::Svrsa1 | ModelId::Svrsa2 => {
            let q = xi(model, params)?;
            let qud = b.lifted("qud", vec![1.0 - q, q], LiftedRole::Inferred);
            let interp = b.lifted(
                "interpretation",
                vec![1.0 - params.chi, params.chi],
                LiftedRole::Averaged,
            );
            b.keep(qud).goal_by(qud, vec![vec![0, 0], vec![0, 1]]);
            let readings = [Interpretation::Literal, Interpretation::Exhaustive];
            b.build(|m, w, v| truth_value(Message::ALL[m], World::ALL[w], readings[v[interp]]))?
        }
        ModelId::FreeLu | ModelId::ExhLu => {
            let rho = model.fixed_rho().expect("LU model");
            return lu_scenario(params, p, rho);
        }
        ModelId::RsaLi1 | ModelId::RsaLi2 => {
            let interp = b.lifted("intention", vec![0.5, 0.5], LiftedRole::SpeakerChoice);
            let readings = [Interpretation::Literal, Interpretation::Exhaustive];
            b.build(|m, w, v| truth_value(Message::ALL[m], World::ALL[w], readings[v[interp]]))?
        }
    };
    Ok(scenario)
}

/// Lexical uncertainty with arbitrary interpretation priors.
pub fn lu_scenario(
    params: &ModelParams,
    p: f64,
    rho: [f64; 3],
) -> Result<GenericScenario, OracleError> {
    let mut b = ScenarioBuilder::new(world_prior(p), costs(params));
    let interp = b.lifted("interpretation", rho.to_vec(), LiftedRole::Inferred);
    Ok(b.build(|m, w, v| {
        truth_value(
            Message::ALL[m],
            World::ALL[w],
            Interpretation::ALL[v[interp]],
        )
    })?)
}

fn dist(values: Vec<f64>) -> MessageDist {
    MessageDist([values[0], values[1], values[2]])
}

fn comprehension(rec: &Recursion) -> Result<(f64, f64), OracleError> {
    let l1 = rec.listener(1);
    let post = |m: Message| {
        l1.marginal_world(m.index())
            .map(|d| d[World::AB.index()])
            .ok_or(EngineError::UnreachableMessage { message: m.index() })
    };
    Ok((post(Message::A)?, post(Message::AAndB)?))
}

/// Predictions of `model` computed by running the generic recursion.
pub fn engine_predict(
    model: ModelId,
    params: &ModelParams,
    p: Prior,
) -> Result<Predictions, OracleError> {
    params.validate().map_err(ModelError::from)?;
    let scenario = scenario_for(model, params, p.p())?;
    recursion_predictions(model, params, &scenario)
}

/// Predictions of lexical uncertainty with arbitrary `rho`, computed by the engine.
pub fn engine_lu_predict(
    params: &ModelParams,
    p: Prior,
    rho: [f64; 3],
) -> Result<Predictions, OracleError> {
    let scenario = lu_scenario(params, p.p(), rho)?;
    recursion_predictions(ModelId::FreeLu, params, &scenario)
}

fn recursion_predictions(
    model: ModelId,
    params: &ModelParams,
    scenario: &GenericScenario,
) -> Result<Predictions, OracleError> {
    let rec = scenario.iterate(2, params.lambda)?;
    let (post_a, post_ab) = comprehension(&rec)?;
    let (wa, wab) = (World::A.index(), World::AB.index());
    let (prod_wa, prod_wab) = match model {
        ModelId::RsaLi1 => {
            let s1 = rec.speaker(1);
            (dist(s1.message_dist(wa, 0)), dist(s1.message_dist(wab, 0)))
        }
        ModelId::Svrsa1 | ModelId::Svrsa2 => {
            let s2 = rec.speaker(2);
            let (partial, total) = (0, 1);
            if model == ModelId::Svrsa2 {
                (
                    dist(s2.message_dist(wa, total)),
                    dist(s2.message_dist(wab, total)),
                )
            } else {
                let q = params.xi.expect("checked when building");
                let mix = |w| {
                    let a = s2.message_dist(w, partial);
                    let b = s2.message_dist(w, total);
                    dist((0..3).map(|u| (1.0 - q) * a[u] + q * b[u]).collect())
                };
                (mix(wa), mix(wab))
            }
        }
        _ => {
            let s2 = rec.speaker(2);
            (dist(s2.message_dist(wa, 0)), dist(s2.message_dist(wab, 0)))
        }
    };
    Ok(Predictions {
        post_a,
        post_ab,
        prod_wa,
        prod_wab,
    })
}
