//! Closed-form predictions for the nine model variants.
//!
//! Every model answers the same four questions at a given prior `p`: how
//! likely is `W_AB` after hearing `A` and after hearing `A∧B`, and which
//! message does the speaker pick in each world.
//!
//! ```
//! use rsa_exh::models::{predict, ModelId};
//! use rsa_exh::scenario::{Message, ModelParams, Prior};
//!
//! let params = ModelParams::new(3.0, 0.5, 1.0);
//! let pred = predict(ModelId::BaseRsa, &params, Prior::new(0.9).unwrap()).unwrap();
//! assert!(pred.post_a > 0.9); // anti-exhaustive at a high prior
//! assert_eq!(pred.prod_wab[Message::AAndNotB], 0.0);
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{fmt_sig, ln0, log_logistic, log_sum_exp, logistic, softplus};
use crate::scenario::{Message, MessageDist, ModelParams, ParamError, Prior, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "base")]
    BaseRsa,
    #[serde(rename = "wrsa")]
    Wrsa,
    #[serde(rename = "bwrsa")]
    Bwrsa,
    #[serde(rename = "svrsa1")]
    Svrsa1,
    #[serde(rename = "svrsa2")]
    Svrsa2,
    #[serde(rename = "free-lu")]
    FreeLu,
    #[serde(rename = "exh-lu")]
    ExhLu,
    #[serde(rename = "li1")]
    RsaLi1,
    #[serde(rename = "li2")]
    RsaLi2,
}

impl ModelId {
    pub const ALL: [ModelId; 9] = [
        ModelId::BaseRsa,
        ModelId::Wrsa,
        ModelId::Bwrsa,
        ModelId::Svrsa1,
        ModelId::Svrsa2,
        ModelId::FreeLu,
        ModelId::ExhLu,
        ModelId::RsaLi1,
        ModelId::RsaLi2,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            ModelId::BaseRsa => "base",
            ModelId::Wrsa => "wrsa",
            ModelId::Bwrsa => "bwrsa",
            ModelId::Svrsa1 => "svrsa1",
            ModelId::Svrsa2 => "svrsa2",
            ModelId::FreeLu => "free-lu",
            ModelId::ExhLu => "exh-lu",
            ModelId::RsaLi1 => "li1",
            ModelId::RsaLi2 => "li2",
        }
    }

    /// Whether the model has the extra prior `xi` as a free parameter.
    pub fn uses_xi(self) -> bool {
        matches!(
            self,
            ModelId::Wrsa | ModelId::Bwrsa | ModelId::Svrsa1 | ModelId::Svrsa2
        )
    }

    /// Interpretation priors fixed by the LU variants.
    pub fn fixed_rho(self) -> Option<[f64; 3]> {
        match self {
            ModelId::FreeLu => Some([1.0 / 3.0; 3]),
            ModelId::ExhLu => Some([0.5, 0.5, 0.0]),
            _ => None,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model {model} requires parameter {name}")]
    MissingParameter { model: ModelId, name: &'static str },
    #[error("unknown model {0:?} (expected one of base, wrsa, bwrsa, svrsa1, svrsa2, free-lu, exh-lu, li1, li2)")]
    UnknownModel(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Comprehension posteriors and production distributions at one prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    /// `L1(W_AB | A)`.
    pub post_a: f64,
    /// `L1(W_AB | A∧B)`.
    pub post_ab: f64,
    pub prod_wa: MessageDist,
    pub prod_wab: MessageDist,
}

impl Predictions {
    pub fn production(&self, world: World) -> &MessageDist {
        match world {
            World::A => &self.prod_wa,
            World::AB => &self.prod_wab,
        }
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "model",
        "p",
        "post_A",
        "post_AB",
        "prod_wa_A",
        "prod_wa_AB",
        "prod_wa_AnB",
        "prod_wab_A",
        "prod_wab_AB",
        "prod_wab_AnB",
    ];

    /// One CSV record matching [`Predictions::CSV_HEADER`].
    pub fn csv_record(&self, model: ModelId, p: f64) -> Vec<String> {
        let mut row = vec![model.name().to_string(), fmt_sig(p, 9)];
        row.extend(
            [self.post_a, self.post_ab]
                .into_iter()
                .chain(self.prod_wa.0)
                .chain(self.prod_wab.0)
                .map(|x| fmt_sig(x, 9)),
        );
        row
    }
}

/// `f_λ(x) = 1 / (1 + e^{-λx})`.
fn f(lambda: f64, x: f64) -> f64 {
    logistic(lambda * x)
}

/// Posterior of `W_AB` given the speaker's likelihood of a message in each
/// world. If the prior excludes every world that could have produced the
/// message, the posterior follows the likelihoods alone.
///
/// Written as `p / (p + (1-p)·lik_a/lik_ab)` so that rounding never moves the
/// result to the wrong side of `p`: `lik_a ≥ lik_ab` gives a result `≤ p`.
pub fn bayes_post(p: f64, lik_ab: f64, lik_a: f64) -> f64 {
    if lik_ab > 0.0 {
        if p == 1.0 {
            return 1.0;
        }
        let den = p + (1.0 - p) * (lik_a / lik_ab);
        if den > 0.0 {
            p / den
        } else {
            1.0
        }
    } else if lik_a > 0.0 {
        0.0
    } else {
        f64::NAN
    }
}

/// Production of the standard level-2 speaker on top of a listener whose
/// posterior after `A` is `l1` and who decodes both conjunctions
/// unambiguously.
pub fn baseline_s2(params: &ModelParams, l1: f64) -> (MessageDist, MessageDist) {
    let lambda = params.lambda;
    let a_in_wa = f(lambda, ln0(1.0 - l1) + params.delta_anb);
    let a_in_wab = f(lambda, ln0(l1) + params.delta_ab);
    (
        MessageDist([a_in_wa, 0.0, 1.0 - a_in_wa]),
        MessageDist([a_in_wab, 1.0 - a_in_wab, 0.0]),
    )
}

fn with_baseline_s2(params: &ModelParams, post_a: f64) -> Predictions {
    let (prod_wa, prod_wab) = baseline_s2(params, post_a);
    Predictions {
        post_a,
        post_ab: 1.0,
        prod_wa,
        prod_wab,
    }
}

/// Level-1 speaker of the baseline model in `world`.
pub fn base_rsa_s1(params: &ModelParams, p: f64, world: World) -> MessageDist {
    let lambda = params.lambda;
    match world {
        World::A => {
            let a = f(lambda, ln0(1.0 - p) + params.delta_anb);
            MessageDist([a, 0.0, 1.0 - a])
        }
        World::AB => {
            let a = f(lambda, ln0(p) + params.delta_ab);
            MessageDist([a, 1.0 - a, 0.0])
        }
    }
}

/// `L1(W_AB | A)` in the baseline model.
pub fn base_rsa_l1(params: &ModelParams, p: f64) -> f64 {
    let s_ab = base_rsa_s1(params, p, World::AB)[Message::A];
    let s_a = base_rsa_s1(params, p, World::A)[Message::A];
    bayes_post(p, s_ab, s_a)
}

/// Production of the baseline level-2 speaker in `world`.
pub fn base_rsa_s2(params: &ModelParams, p: f64, world: World) -> MessageDist {
    let (wa, wab) = baseline_s2(params, base_rsa_l1(params, p));
    match world {
        World::A => wa,
        World::AB => wab,
    }
}

/// Level-1 speaker probabilities of `A` in each world when the speaker
/// assumes the uniform (wonky) prior `(1/2, 1/2)`.
fn wonky_s1(params: &ModelParams) -> (f64, f64) {
    let ln_half = -std::f64::consts::LN_2;
    (
        f(params.lambda, ln_half + params.delta_anb),
        f(params.lambda, ln_half + params.delta_ab),
    )
}

/// `L1(W_AB | A)` in wRSA: the listener's world prior follows whichever
/// background assumption she entertains.
pub fn wrsa_l1(params: &ModelParams, p: f64, omega: f64) -> f64 {
    let (wonky_a, wonky_ab) = wonky_s1(params);
    let usual_ab = f(params.lambda, ln0(p) + params.delta_ab);
    let usual_a = f(params.lambda, ln0(1.0 - p) + params.delta_anb);
    let num = p * (1.0 - omega) * usual_ab + 0.5 * omega * wonky_ab;
    let den_a = (1.0 - p) * (1.0 - omega) * usual_a + 0.5 * omega * wonky_a;
    if num + den_a > 0.0 {
        num / (num + den_a)
    } else {
        // ω = 0 with a prior that rules out both terms; defer to Bayes' limit.
        bayes_post(p, usual_ab, usual_a)
    }
}

/// `L1(W_AB | A)` in BwRSA: the listener keeps the measured prior and only
/// the speaker's likelihood is a mixture.
pub fn bwrsa_l1(params: &ModelParams, p: f64, omega: f64) -> f64 {
    let (wonky_a, wonky_ab) = wonky_s1(params);
    let usual_ab = f(params.lambda, ln0(p) + params.delta_ab);
    let usual_a = f(params.lambda, ln0(1.0 - p) + params.delta_anb);
    let lik_ab = (1.0 - omega) * usual_ab + omega * wonky_ab;
    let lik_a = (1.0 - omega) * usual_a + omega * wonky_a;
    bayes_post(p, lik_ab, lik_a)
}

/// Log-odds shift `logit L1(W_AB | A) - logit p` of the svRSA listener.
///
/// Equals `-ln(1 + q·s_t(A|W_A) / ((1-q)·s_QA(A)))`. Unlike the posterior
/// itself it stays resolvable when the update is smaller than one ulp of `p`.
pub fn svrsa_listener_shift(params: &ModelParams, p: f64, q: f64) -> f64 {
    let lambda = params.lambda;
    let ln_sqa_a = -log_sum_exp(&[0.0, -lambda * params.delta_ab, -lambda * params.delta_anb]);
    let x = (1.0 - params.chi) * (1.0 - p.clamp(P_CLAMP, 1.0 - P_CLAMP)).ln() + params.delta_anb;
    let t = ln0(q) + log_logistic(lambda * x) - ln0(1.0 - q) - ln_sqa_a;
    -softplus(t)
}

/// Which production speaker an svRSA variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvVariant {
    /// Mixture over QUDs.
    One,
    /// Total-QUD speaker only.
    Two,
}

const P_CLAMP: f64 = 1e-12;

/// The supervaluationist model with total-QUD prior `q`.
///
/// For the level-2 speaker `p` is clamped to `[1e-12, 1 - 1e-12]`: at the
/// endpoints some QUD/world pairs lose all prior mass and the utilities are
/// defined by continuity.
pub fn svrsa_predict(params: &ModelParams, p_raw: f64, q: f64, variant: SvVariant) -> Predictions {
    let p = p_raw.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let lambda = params.lambda;
    let chi = params.chi;

    // Partial QUD: only costs matter.
    let costs = [0.0, params.delta_ab, params.delta_anb];
    let partial_logits: Vec<f64> = costs.iter().map(|c| -lambda * c).collect();
    let z = log_sum_exp(&partial_logits);
    let ln_sqa: [f64; 3] = [
        partial_logits[0] - z,
        partial_logits[1] - z,
        partial_logits[2] - z,
    ];
    let sqa = ln_sqa.map(f64::exp);

    // Total QUD in W_A: literal A against the explicit message.
    let x = (1.0 - chi) * (1.0 - p).ln() + params.delta_anb;
    let ln_st_a = log_logistic(lambda * x);
    let ln_st_anb = log_logistic(-lambda * x);
    let st_a = ln_st_a.exp();

    let post_a = bayes_post(p_raw, (1.0 - q) * sqa[0], (1.0 - q) * sqa[0] + q * st_a);
    let post_ab = bayes_post(p_raw, (1.0 - q) * sqa[1] + q, (1.0 - q) * sqa[1]);

    // Evidence for each message, in logs.
    let (ln_q, ln_not_q) = (ln0(q), ln0(1.0 - q));
    let ln_z = [
        log_sum_exp(&[ln_not_q + ln_sqa[0], ln_q + (1.0 - p).ln() + ln_st_a]),
        log_sum_exp(&[ln_not_q + ln_sqa[1], ln_q + p.ln()]),
        log_sum_exp(&[ln_not_q + ln_sqa[2], ln_q + (1.0 - p).ln() + ln_st_anb]),
    ];

    // S2 under the partial QUD uses L1(Q_A | u) / (1 - q).
    let partial_utils: Vec<f64> = (0..3)
        .map(|u| lambda * (ln_sqa[u] - ln_z[u] - costs[u]))
        .collect();
    let zs = log_sum_exp(&partial_utils);
    let s2_partial = MessageDist([
        (partial_utils[0] - zs).exp(),
        (partial_utils[1] - zs).exp(),
        (partial_utils[2] - zs).exp(),
    ]);

    // S2 under the total QUD: A against A∧¬B in W_A, A∧B forced in W_AB.
    let margin = ln_st_a - ln_z[0] - ln_st_anb + ln_z[2] + params.delta_anb;
    let a_total = logistic(lambda * margin);
    let s2_total_wa = MessageDist([a_total, 0.0, logistic(-lambda * margin)]);
    let s2_total_wab = MessageDist([0.0, 1.0, 0.0]);

    let (prod_wa, prod_wab) = match variant {
        SvVariant::Two => (s2_total_wa, s2_total_wab),
        SvVariant::One => {
            let mix = |a: &MessageDist, b: &MessageDist| {
                MessageDist([0, 1, 2].map(|u| (1.0 - q) * a.0[u] + q * b.0[u]))
            };
            (
                mix(&s2_partial, &s2_total_wa),
                mix(&s2_partial, &s2_total_wab),
            )
        }
    };
    Predictions {
        post_a,
        post_ab,
        prod_wa,
        prod_wab,
    }
}

/// Lexical uncertainty with interpretation priors `rho = (lit, exh, anti)`.
pub fn lu_predict(params: &ModelParams, p: f64, rho: [f64; 3]) -> Predictions {
    let lambda = params.lambda;
    let lit_ab = f(lambda, ln0(p) + params.delta_ab);
    let lit_a = f(lambda, ln0(1.0 - p) + params.delta_anb);
    let exh_a = f(lambda, params.delta_anb);
    let anti_ab = f(lambda, params.delta_ab);
    let lik_ab = rho[0] * lit_ab + rho[2] * anti_ab;
    let lik_a = rho[0] * lit_a + rho[1] * exh_a;
    with_baseline_s2(params, bayes_post(p, lik_ab, lik_a))
}

/// Which production speaker an LI variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiVariant {
    /// The level-1 speaker, with intentions summed out.
    One,
    /// The standard level-2 speaker.
    Two,
}

/// Marginal level-1 speaker of the lexical-intentions model in each world.
pub fn li_s1(params: &ModelParams, p: f64) -> (MessageDist, MessageDist) {
    let lambda = params.lambda;
    let ln2 = std::f64::consts::LN_2;
    let lit_a = lambda * ln0(1.0 - p);
    let a_in_wa = (log_sum_exp(&[0.0, lit_a])
        - log_sum_exp(&[0.0, lit_a, ln2 - lambda * params.delta_anb]))
    .exp();
    let anb_in_wa = (ln2
        - log_sum_exp(&[
            ln2,
            lambda * (ln0(1.0 - p) + params.delta_anb),
            lambda * params.delta_anb,
        ]))
    .exp();
    let a_in_wab = (-log_sum_exp(&[0.0, ln2 - lambda * (ln0(p) + params.delta_ab)])).exp();
    let ab_in_wab = (ln2 - log_sum_exp(&[ln2, lambda * (ln0(p) + params.delta_ab)])).exp();
    (
        MessageDist([a_in_wa, 0.0, anb_in_wa]),
        MessageDist([a_in_wab, ab_in_wab, 0.0]),
    )
}

pub fn li_predict(params: &ModelParams, p: f64, variant: LiVariant) -> Predictions {
    let (s1_wa, s1_wab) = li_s1(params, p);
    let post_a = bayes_post(p, s1_wab[Message::A], s1_wa[Message::A]);
    match variant {
        LiVariant::Two => with_baseline_s2(params, post_a),
        LiVariant::One => Predictions {
            post_a,
            post_ab: 1.0,
            prod_wa: s1_wa,
            prod_wab: s1_wab,
        },
    }
}

fn require_xi(model: ModelId, params: &ModelParams) -> Result<f64, ModelError> {
    params
        .xi
        .ok_or(ModelError::MissingParameter { model, name: "xi" })
}

/// Predictions of `model` at prior `p`.
pub fn predict(model: ModelId, params: &ModelParams, p: Prior) -> Result<Predictions, ModelError> {
    params.validate()?;
    let p = p.p();
    Ok(match model {
        ModelId::BaseRsa => with_baseline_s2(params, base_rsa_l1(params, p)),
        ModelId::Wrsa => with_baseline_s2(params, wrsa_l1(params, p, require_xi(model, params)?)),
        ModelId::Bwrsa => with_baseline_s2(params, bwrsa_l1(params, p, require_xi(model, params)?)),
        ModelId::Svrsa1 => svrsa_predict(params, p, require_xi(model, params)?, SvVariant::One),
        ModelId::Svrsa2 => svrsa_predict(params, p, require_xi(model, params)?, SvVariant::Two),
        ModelId::FreeLu | ModelId::ExhLu => {
            lu_predict(params, p, model.fixed_rho().expect("LU model"))
        }
        ModelId::RsaLi1 => li_predict(params, p, LiVariant::One),
        ModelId::RsaLi2 => li_predict(params, p, LiVariant::Two),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn prior(p: f64) -> Prior {
        Prior::new(p).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for m in ModelId::ALL {
            assert_eq!(m.name().parse::<ModelId>().unwrap(), m);
        }
        assert!("rsa".parse::<ModelId>().is_err());
    }

    #[test]
    fn base_exhaustive_at_even_prior() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        assert!(
            predict(ModelId::BaseRsa, &params, prior(0.5))
                .unwrap()
                .post_a
                < 0.5
        );
    }

    #[test]
    fn post_ab_is_one_outside_svrsa() {
        let params = ModelParams::new(2.0, 0.3, 0.7).with_xi(0.4);
        for m in ModelId::ALL {
            if matches!(m, ModelId::Svrsa1 | ModelId::Svrsa2) {
                continue;
            }
            for p in [0.0, 0.2, 0.9, 1.0] {
                assert_eq!(
                    predict(m, &params, prior(p)).unwrap().post_ab,
                    1.0,
                    "{m} at {p}"
                );
            }
        }
    }

    #[test]
    fn base_symmetry_and_limits() {
        for lambda in [0.5, 3.0, 10.0] {
            let params = ModelParams::new(lambda, 0.7, 0.7);
            assert_abs_diff_eq!(base_rsa_l1(&params, 0.5), 0.5, epsilon = 1e-15);
        }
        let params = ModelParams::new(3.0, 0.5, 1.0);
        assert_eq!(base_rsa_l1(&params, 1.0), 1.0);
        assert_eq!(base_rsa_l1(&params, 0.0), 0.0);
    }

    #[test]
    fn base_threshold_matches_log_odds() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        let threshold = 0.5f64.exp() / (1.0 + 0.5f64.exp());
        assert!(base_rsa_l1(&params, threshold - 1e-4) < threshold - 1e-4);
        assert!(base_rsa_l1(&params, threshold + 1e-4) > threshold + 1e-4);
    }

    #[test]
    fn base_s2_examples() {
        let params = ModelParams::new(1.0, 0.0, 0.0);
        let (wa, wab) = baseline_s2(&params, 0.5);
        assert_abs_diff_eq!(wa[Message::A], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(wab[Message::AAndNotB], 0.0);
        // Large λ: A wins in W_A exactly when Δ_anb exceeds -ln(1 - L1) = ln 2.
        let (wa, _) = baseline_s2(&ModelParams::new(500.0, 0.0, 0.8), 0.5);
        assert!(wa[Message::A] > 1.0 - 1e-12);
        let (wa, _) = baseline_s2(&ModelParams::new(500.0, 0.0, 0.6), 0.5);
        assert!(wa[Message::A] < 1e-12);
    }

    #[test]
    fn wrsa_limits() {
        let params = ModelParams::new(3.0, 1.0, 1.2);
        for p in [0.0, 0.05, 0.3, 0.77, 1.0] {
            assert_abs_diff_eq!(
                wrsa_l1(&params, p, 0.0),
                base_rsa_l1(&params, p),
                epsilon = 1e-15
            );
            assert_abs_diff_eq!(
                bwrsa_l1(&params, p, 0.0),
                base_rsa_l1(&params, p),
                epsilon = 1e-15
            );
        }
        let at = |p| wrsa_l1(&params, p, 1.0);
        assert_abs_diff_eq!(at(0.1), at(0.9), epsilon = 1e-15);
        assert_eq!(bwrsa_l1(&params, 0.0, 0.5), 0.0);
        assert_eq!(bwrsa_l1(&params, 1.0, 0.5), 1.0);
    }

    #[test]
    fn svrsa_total_qud_speaker_avoids_a_in_wab() {
        let params = ModelParams::new(2.0, 0.3, 0.6).with_xi(1.0);
        let pred = svrsa_predict(&params, 0.4, 1.0, SvVariant::Two);
        assert_eq!(pred.prod_wab.0, [0.0, 1.0, 0.0]);
        assert!(pred.post_a < 0.4);
    }

    #[test]
    fn svrsa_conjunction_can_suggest_wa() {
        // At a low prior the partial-QUD reading of A∧B leaves mass on W_A.
        let params = ModelParams::new(3.0, 0.0, 0.0).with_xi(0.1);
        let pred = predict(ModelId::Svrsa1, &params, prior(0.05)).unwrap();
        assert!(pred.post_ab < 0.9);
    }

    #[test]
    fn lu_reductions() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        for p in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(
                lu_predict(&params, p, [1.0, 0.0, 0.0]).post_a,
                base_rsa_l1(&params, p),
                epsilon = 1e-15
            );
        }
        // Without the anti-exhaustive reading and with Δ_ab ≤ Δ_anb.
        let params = ModelParams::new(2.0, 0.2, 0.9);
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert!(lu_predict(&params, p, [0.5, 0.5, 0.0]).post_a <= p + 1e-15);
        }
        // FREE-LU can still be anti-exhaustive.
        let params = ModelParams::new(3.0, 0.5, 0.5);
        assert!(lu_predict(&params, 0.9, [1.0 / 3.0; 3]).post_a > 0.9);
    }

    #[test]
    fn li_s1_limit_at_certain_prior() {
        let params = ModelParams::new(2.0, 0.0, 0.4);
        let (wa, _) = li_s1(&params, 1.0);
        let expected = 1.0 / (1.0 + 2.0 * (-2.0f64 * 0.4).exp());
        assert_abs_diff_eq!(wa[Message::A], expected, epsilon = 1e-15);
    }

    #[test]
    fn missing_xi_is_reported() {
        let params = ModelParams::new(1.0, 0.0, 0.0);
        assert_eq!(
            predict(ModelId::Wrsa, &params, prior(0.5)),
            Err(ModelError::MissingParameter {
                model: ModelId::Wrsa,
                name: "xi"
            })
        );
        assert!(predict(ModelId::FreeLu, &params, prior(0.5)).is_ok());
    }

    #[test]
    fn csv_record_shape() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        let pred = predict(ModelId::BaseRsa, &params, prior(0.5)).unwrap();
        let rec = pred.csv_record(ModelId::BaseRsa, 0.5);
        assert_eq!(rec.len(), Predictions::CSV_HEADER.len());
        assert_eq!(rec[0], "base");
    }

    fn any_params() -> impl Strategy<Value = (ModelParams, f64)> {
        (
            0.05f64..50.0,
            0.0f64..5.0,
            0.0f64..5.0,
            0.0f64..=1.0,
            0.0f64..=1.0,
        )
            .prop_map(|(l, a, b, xi, p)| (ModelParams::new(l, a, b).with_xi(xi), p))
    }

    #[test]
    fn svrsa_shift_matches_posterior_odds() {
        let params = ModelParams::new(2.5, 0.4, 0.9);
        for (p, q) in [(0.3, 0.2), (0.7, 0.6), (0.95, 0.05)] {
            let post = svrsa_predict(&params, p, q, SvVariant::One).post_a;
            let logit = |x: f64| (x / (1.0 - x)).ln();
            assert!((logit(post) - logit(p) - svrsa_listener_shift(&params, p, q)).abs() < 1e-10);
        }
        assert_eq!(svrsa_listener_shift(&params, 0.5, 0.0), 0.0);
        assert_eq!(svrsa_listener_shift(&params, 0.5, 1.0), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn predictions_are_finite_probabilities((params, p) in any_params()) {
            for m in ModelId::ALL {
                let pred = predict(m, &params, prior(p)).unwrap();
                for x in [pred.post_a, pred.post_ab].into_iter().chain(pred.prod_wa.0).chain(pred.prod_wab.0) {
                    prop_assert!(x.is_finite() && (0.0..=1.0).contains(&x), "{m}: {pred:?}");
                }
                prop_assert!((pred.prod_wa.total() - 1.0).abs() < 1e-12);
                prop_assert!((pred.prod_wab.total() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn li_speaker_prefers_a_in_wa_when_conjunction_cheaper((params, p) in any_params()) {
            let (ab, anb) = (params.delta_ab.min(params.delta_anb), params.delta_ab.max(params.delta_anb));
            let params = ModelParams::new(params.lambda, ab, anb);
            let (wa, wab) = li_s1(&params, p);
            prop_assert!(wab[Message::A] <= wa[Message::A] + 1e-12);
        }
    }
}
