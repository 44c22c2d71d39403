//! Generic recursive RSA evaluator over finite, index-based scenarios.
//!
//! Worlds and messages are plain indices. A scenario may carry any number of
//! lifted variables, each with a prior and a role:
//!
//! * [`LiftedRole::Inferred`]: the speaker knows its value and conditions on
//!   it; the first pragmatic listener infers it jointly with the world
//!   (background assumptions, interpretation functions in lexical
//!   uncertainty, the QUD).
//! * [`LiftedRole::SpeakerChoice`]: the level-1 speaker picks a value
//!   together with the message and the listener infers it (lexical
//!   intentions). Its prior is taken to be uniform.
//! * [`LiftedRole::Averaged`]: the level-1 speaker maximizes expected
//!   utility over it; nobody infers it (supervaluationist interpretations).
//!
//! Inferred variables are integrated out after the first pragmatic listener
//! unless marked as kept, in which case higher speakers condition on them
//! and higher listeners keep inferring them.
//!
//! Everything runs in log space; a zero probability is `-inf` and
//! exponentiates back to exactly zero.

use thiserror::Error;

use crate::math::{ln0, log_sum_exp};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("message {message} is false in every world under context {context}")]
    DegenerateMessage { message: usize, context: usize },
    #[error("every message has utility -inf")]
    AllMessagesUnusable,
    #[error("no world/context produces message {message}")]
    UnreachableMessage { message: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// A normalized probability vector over some indexed support.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Normalizes nonnegative weights. Returns `None` if they are all zero.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return None;
        }
        Some(Distribution {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Exp-normalizes log weights with max subtraction.
    pub fn from_log_weights(log_weights: &[f64]) -> Option<Self> {
        let z = log_sum_exp(log_weights);
        if z == f64::NEG_INFINITY || !z.is_finite() {
            return None;
        }
        Some(Distribution {
            probs: log_weights.iter().map(|l| (l - z).exp()).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftedRole {
    Inferred,
    SpeakerChoice,
    Averaged,
}

#[derive(Debug, Clone)]
pub struct LiftedVar {
    pub name: String,
    pub prior: Vec<f64>,
    pub role: LiftedRole,
    pub keep: bool,
}

/// Which world prior the first pragmatic listener combines with the speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListenerPrior {
    /// The scenario's own world prior.
    Shared,
    /// The context-dependent prior the literal listener used.
    Literal,
}

/// Mixed-radix enumeration of value tuples for a subset of variables.
#[derive(Debug, Clone)]
struct Radix {
    vars: Vec<usize>,
    dims: Vec<usize>,
}

impl Radix {
    fn count(&self) -> usize {
        self.dims.iter().product()
    }

    fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GenericScenario {
    n_worlds: usize,
    costs: Vec<f64>,
    world_prior: Vec<f64>,
    lifted: Vec<LiftedVar>,
    /// `truth[(m * n_worlds + w) * n_ctx + ctx]` over the full context product.
    truth: Vec<bool>,
    literal_prior: Option<(usize, Vec<Vec<f64>>)>,
    goal: Option<(usize, Vec<Vec<usize>>)>,
    listener_prior: ListenerPrior,
    full: Radix,
    inferred: Radix,
    chosen: Radix,
    averaged: Radix,
    kept: Radix,
}

pub struct ScenarioBuilder {
    n_worlds: usize,
    costs: Vec<f64>,
    world_prior: Vec<f64>,
    lifted: Vec<LiftedVar>,
    literal_prior: Option<(usize, Vec<Vec<f64>>)>,
    goal: Option<(usize, Vec<Vec<usize>>)>,
    listener_prior: ListenerPrior,
}

impl ScenarioBuilder {
    pub fn new(world_prior: Vec<f64>, costs: Vec<f64>) -> Self {
        ScenarioBuilder {
            n_worlds: world_prior.len(),
            costs,
            world_prior,
            lifted: Vec::new(),
            literal_prior: None,
            goal: None,
            listener_prior: ListenerPrior::Shared,
        }
    }

    /// Adds a lifted variable and returns its index.
    pub fn lifted(&mut self, name: &str, prior: Vec<f64>, role: LiftedRole) -> usize {
        self.lifted.push(LiftedVar {
            name: name.to_string(),
            prior,
            role,
            keep: false,
        });
        self.lifted.len() - 1
    }

    /// Keeps an inferred variable in the listener's joint beyond level 1.
    pub fn keep(&mut self, var: usize) -> &mut Self {
        self.lifted[var].keep = true;
        self
    }

    /// Literal listener prior depends on the value of `var`.
    pub fn literal_prior_by(&mut self, var: usize, priors: Vec<Vec<f64>>) -> &mut Self {
        self.literal_prior = Some((var, priors));
        self
    }

    /// The speaker communicates the cell of the world in the partition
    /// selected by `var`; `cells[value][world]` is a cell label.
    pub fn goal_by(&mut self, var: usize, cells: Vec<Vec<usize>>) -> &mut Self {
        self.goal = Some((var, cells));
        self
    }

    pub fn listener_prior(&mut self, mode: ListenerPrior) -> &mut Self {
        self.listener_prior = mode;
        self
    }

    /// Finalizes with a truth function `truth(message, world, lifted_values)`.
    pub fn build(
        &self,
        truth: impl Fn(usize, usize, &[usize]) -> bool,
    ) -> Result<GenericScenario, EngineError> {
        let invalid = |msg: String| Err(EngineError::InvalidScenario(msg));
        if self.n_worlds == 0 || self.costs.is_empty() {
            return invalid("empty world or message set".into());
        }
        check_simplex("world prior", &self.world_prior)?;
        if self.costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return invalid("costs must be finite and nonnegative".into());
        }
        for var in &self.lifted {
            if var.prior.is_empty() {
                return invalid(format!("lifted variable {} has no values", var.name));
            }
            check_simplex(&var.name, &var.prior)?;
            if var.keep && var.role != LiftedRole::Inferred {
                return invalid(format!(
                    "only inferred variables can be kept ({})",
                    var.name
                ));
            }
        }
        if let Some((var, priors)) = &self.literal_prior {
            if *var >= self.lifted.len() || priors.len() != self.lifted[*var].prior.len() {
                return invalid("literal prior table does not match its variable".into());
            }
            for p in priors {
                if p.len() != self.n_worlds {
                    return invalid("literal prior has the wrong length".into());
                }
                check_simplex("literal prior", p)?;
            }
        }
        if let Some((var, cells)) = &self.goal {
            if *var >= self.lifted.len() || cells.len() != self.lifted[*var].prior.len() {
                return invalid("goal table does not match its variable".into());
            }
            if self.lifted[*var].role != LiftedRole::Inferred {
                return invalid("the goal variable must be inferred".into());
            }
            if cells.iter().any(|c| c.len() != self.n_worlds) {
                return invalid("goal partition has the wrong length".into());
            }
        }

        let radix = |pred: &dyn Fn(&LiftedVar) -> bool| {
            let vars: Vec<usize> = (0..self.lifted.len())
                .filter(|&i| pred(&self.lifted[i]))
                .collect();
            let dims = vars.iter().map(|&i| self.lifted[i].prior.len()).collect();
            Radix { vars, dims }
        };
        let full = radix(&|_| true);
        let n_ctx = full.count();
        let n_msg = self.costs.len();
        let mut table = vec![false; n_msg * self.n_worlds * n_ctx];
        for m in 0..n_msg {
            let mut somewhere = false;
            for w in 0..self.n_worlds {
                for ctx in 0..n_ctx {
                    let t = truth(m, w, &full.decode(ctx));
                    table[(m * self.n_worlds + w) * n_ctx + ctx] = t;
                    somewhere |= t;
                }
            }
            if !somewhere {
                return invalid(format!("message {m} is never true"));
            }
        }

        Ok(GenericScenario {
            n_worlds: self.n_worlds,
            costs: self.costs.clone(),
            world_prior: self.world_prior.clone(),
            lifted: self.lifted.clone(),
            truth: table,
            literal_prior: self.literal_prior.clone(),
            goal: self.goal.clone(),
            listener_prior: self.listener_prior,
            inferred: radix(&|v| v.role == LiftedRole::Inferred),
            chosen: radix(&|v| v.role == LiftedRole::SpeakerChoice),
            averaged: radix(&|v| v.role == LiftedRole::Averaged),
            kept: radix(&|v| v.keep),
            full,
        })
    }
}

fn check_simplex(name: &str, v: &[f64]) -> Result<(), EngineError> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (sum - 1.0).abs() > SUM_TOL {
        return Err(EngineError::InvalidScenario(format!(
            "{name} is not a probability vector: {v:?}"
        )));
    }
    Ok(())
}

/// `L0`-style conditioning. Falls back to a uniform prior over the true
/// worlds when they all carry zero prior mass (the continuity limit for a
/// singleton; an equal-rate limit otherwise).
fn condition(prior: &[f64], truth: impl Fn(usize) -> bool) -> Option<Distribution> {
    let weights: Vec<f64> = prior
        .iter()
        .enumerate()
        .map(|(w, p)| if truth(w) { *p } else { 0.0 })
        .collect();
    Distribution::from_weights(weights).or_else(|| {
        Distribution::from_weights(
            (0..prior.len())
                .map(|w| if truth(w) { 1.0 } else { 0.0 })
                .collect(),
        )
    })
}

/// Bayes' rule over an indexed joint support. When the prior puts no mass on
/// any state that can produce the observation, the posterior is taken
/// proportional to the likelihood alone.
pub fn bayes(prior: &[f64], likelihood: &[f64]) -> Option<Distribution> {
    let weights = prior.iter().zip(likelihood).map(|(p, l)| p * l).collect();
    Distribution::from_weights(weights).or_else(|| Distribution::from_weights(likelihood.to_vec()))
}

/// `ln listener(target) - cost`; `-inf` when the listener rules the target out.
pub fn utility(listener: &Distribution, target: usize, cost: f64) -> f64 {
    ln0(listener.get(target)) - cost
}

/// Softmax choice rule `∝ exp(λ·U)` computed in log space.
pub fn softmax_speaker(utilities: &[f64], lambda: f64) -> Result<Distribution, EngineError> {
    let scaled: Vec<f64> = utilities
        .iter()
        .map(|u| {
            if *u == f64::NEG_INFINITY {
                *u
            } else {
                lambda * u
            }
        })
        .collect();
    Distribution::from_log_weights(&scaled).ok_or(EngineError::AllMessagesUnusable)
}

/// Speaker probabilities at one recursion level.
///
/// States are `(world, speaker context)`; alternatives are
/// `(message, chosen context)`. Above level 1 the chosen context is trivial
/// and the speaker context ranges over the kept variables.
#[derive(Debug, Clone)]
pub struct SpeakerTable {
    pub level: usize,
    n_ctx: usize,
    n_alt_ctx: usize,
    n_msg: usize,
    probs: Vec<f64>,
}

impl SpeakerTable {
    fn idx(&self, world: usize, ctx: usize, message: usize, alt_ctx: usize) -> usize {
        ((world * self.n_ctx + ctx) * self.n_msg + message) * self.n_alt_ctx + alt_ctx
    }

    pub fn n_contexts(&self) -> usize {
        self.n_ctx
    }

    pub fn n_alt_contexts(&self) -> usize {
        self.n_alt_ctx
    }

    /// Probability of the `(message, alt_ctx)` alternative.
    pub fn joint(&self, message: usize, alt_ctx: usize, world: usize, ctx: usize) -> f64 {
        self.probs[self.idx(world, ctx, message, alt_ctx)]
    }

    /// Message probability with speaker-chosen variables summed out.
    pub fn prob(&self, message: usize, world: usize, ctx: usize) -> f64 {
        (0..self.n_alt_ctx)
            .map(|a| self.joint(message, a, world, ctx))
            .sum()
    }

    pub fn message_dist(&self, world: usize, ctx: usize) -> Vec<f64> {
        (0..self.n_msg).map(|m| self.prob(m, world, ctx)).collect()
    }
}

/// Listener posteriors at one recursion level over `(world, kept context)`.
#[derive(Debug, Clone)]
pub struct ListenerTable {
    pub level: usize,
    n_worlds: usize,
    n_ctx: usize,
    /// Normalized joint, `None` for messages that are never produced.
    joint: Vec<Option<Vec<f64>>>,
    /// Joint divided by the prior of the kept context: the input to the
    /// next speaker's utility, finite even where that prior is zero.
    conditional: Vec<Option<Vec<f64>>>,
}

impl ListenerTable {
    pub fn n_contexts(&self) -> usize {
        self.n_ctx
    }

    pub fn joint(&self, message: usize, world: usize, ctx: usize) -> Option<f64> {
        self.joint[message]
            .as_ref()
            .map(|j| j[world * self.n_ctx + ctx])
    }

    pub fn marginal_world(&self, message: usize) -> Option<Vec<f64>> {
        self.joint[message].as_ref().map(|j| {
            (0..self.n_worlds)
                .map(|w| (0..self.n_ctx).map(|k| j[w * self.n_ctx + k]).sum())
                .collect()
        })
    }

    pub fn marginal_context(&self, message: usize) -> Option<Vec<f64>> {
        self.joint[message].as_ref().map(|j| {
            (0..self.n_ctx)
                .map(|k| (0..self.n_worlds).map(|w| j[w * self.n_ctx + k]).sum())
                .collect()
        })
    }
}

/// All levels `1..=depth` of a recursion.
#[derive(Debug, Clone)]
pub struct Recursion {
    pub speakers: Vec<SpeakerTable>,
    pub listeners: Vec<ListenerTable>,
}

impl Recursion {
    pub fn speaker(&self, level: usize) -> &SpeakerTable {
        &self.speakers[level - 1]
    }

    pub fn listener(&self, level: usize) -> &ListenerTable {
        &self.listeners[level - 1]
    }
}

/// Joint posterior of a pragmatic listener over `(world, inferred values)`.
#[derive(Debug, Clone)]
pub struct JointPosterior {
    pub dist: Distribution,
    n_ctx: usize,
}

impl JointPosterior {
    pub fn get(&self, world: usize, inferred_ctx: usize) -> f64 {
        self.dist.get(world * self.n_ctx + inferred_ctx)
    }

    pub fn marginal_world(&self) -> Vec<f64> {
        let n_worlds = self.dist.len() / self.n_ctx;
        (0..n_worlds)
            .map(|w| (0..self.n_ctx).map(|k| self.get(w, k)).sum())
            .collect()
    }
}

impl GenericScenario {
    pub fn n_worlds(&self) -> usize {
        self.n_worlds
    }

    pub fn n_messages(&self) -> usize {
        self.costs.len()
    }

    pub fn cost(&self, message: usize) -> f64 {
        self.costs[message]
    }

    pub fn world_prior(&self) -> &[f64] {
        &self.world_prior
    }

    pub fn lifted(&self) -> &[LiftedVar] {
        &self.lifted
    }

    pub fn n_inferred_contexts(&self) -> usize {
        self.inferred.count()
    }

    pub fn n_chosen_contexts(&self) -> usize {
        self.chosen.count()
    }

    pub fn n_kept_contexts(&self) -> usize {
        self.kept.count()
    }

    /// Decodes an inferred-context index into `(variable, value)` pairs.
    pub fn inferred_values(&self, ctx: usize) -> Vec<(usize, usize)> {
        self.inferred
            .vars
            .iter()
            .copied()
            .zip(self.inferred.decode(ctx))
            .collect()
    }

    pub fn kept_values(&self, ctx: usize) -> Vec<(usize, usize)> {
        self.kept
            .vars
            .iter()
            .copied()
            .zip(self.kept.decode(ctx))
            .collect()
    }

    pub fn chosen_values(&self, ctx: usize) -> Vec<(usize, usize)> {
        self.chosen
            .vars
            .iter()
            .copied()
            .zip(self.chosen.decode(ctx))
            .collect()
    }

    fn compose(&self, parts: &[(&Radix, usize)]) -> usize {
        let mut values = vec![0; self.lifted.len()];
        for (radix, idx) in parts {
            for (var, val) in radix.vars.iter().zip(radix.decode(*idx)) {
                values[*var] = val;
            }
        }
        values
            .iter()
            .zip(&self.full.dims)
            .fold(0, |acc, (v, d)| acc * d + v)
    }

    fn full_ctx(&self, inferred: usize, chosen: usize, averaged: usize) -> usize {
        self.compose(&[
            (&self.inferred, inferred),
            (&self.chosen, chosen),
            (&self.averaged, averaged),
        ])
    }

    fn value_of(&self, var: usize, full_ctx: usize) -> usize {
        self.full.decode(full_ctx)[var]
    }

    pub fn truth(&self, message: usize, world: usize, full_ctx: usize) -> bool {
        self.truth[(message * self.n_worlds + world) * self.full.count() + full_ctx]
    }

    fn literal_prior_for(&self, full_ctx: usize) -> &[f64] {
        match &self.literal_prior {
            Some((var, table)) => &table[self.value_of(*var, full_ctx)],
            None => &self.world_prior,
        }
    }

    fn cells_for(&self, full_ctx: usize) -> Vec<usize> {
        match &self.goal {
            Some((var, cells)) => cells[self.value_of(*var, full_ctx)].clone(),
            None => (0..self.n_worlds).collect(),
        }
    }

    fn prior_of(&self, radix: &Radix, idx: usize) -> f64 {
        radix
            .vars
            .iter()
            .zip(radix.decode(idx))
            .map(|(&v, val)| self.lifted[v].prior[val])
            .product()
    }

    /// Literal listener posterior over worlds for `message` in a full context.
    pub fn literal_listener(
        &self,
        message: usize,
        full_ctx: usize,
    ) -> Result<Distribution, EngineError> {
        condition(self.literal_prior_for(full_ctx), |w| {
            self.truth(message, w, full_ctx)
        })
        .ok_or(EngineError::DegenerateMessage {
            message,
            context: full_ctx,
        })
    }

    /// Level-1 utility of `(message, chosen)` for a speaker in `world` with
    /// inferred context `inferred`: the expectation over averaged variables
    /// of the log literal-listener mass on the goal cell, minus cost. Terms
    /// with zero prior weight are skipped.
    pub fn speaker_utility(
        &self,
        message: usize,
        chosen: usize,
        world: usize,
        inferred: usize,
    ) -> f64 {
        let mut total = 0.0;
        for v in 0..self.averaged.count() {
            let weight = self.prior_of(&self.averaged, v);
            if weight == 0.0 {
                continue;
            }
            let ctx = self.full_ctx(inferred, chosen, v);
            let log_mass = match self.literal_listener(message, ctx) {
                Ok(l0) => {
                    let cells = self.cells_for(ctx);
                    let mass: f64 = (0..self.n_worlds)
                        .filter(|&u| cells[u] == cells[world])
                        .map(|u| l0.get(u))
                        .sum();
                    ln0(mass)
                }
                Err(_) => f64::NEG_INFINITY,
            };
            if log_mass == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += weight * log_mass;
        }
        total - self.costs[message]
    }

    fn level1_speaker(&self, lambda: f64) -> Result<SpeakerTable, EngineError> {
        let n_msg = self.n_messages();
        let (n_ctx, n_alt) = (self.inferred.count(), self.chosen.count());
        let mut probs = vec![0.0; self.n_worlds * n_ctx * n_msg * n_alt];
        for w in 0..self.n_worlds {
            for i in 0..n_ctx {
                let utilities: Vec<f64> = (0..n_msg)
                    .flat_map(|m| (0..n_alt).map(move |c| (m, c)))
                    .map(|(m, c)| self.speaker_utility(m, c, w, i))
                    .collect();
                let dist = softmax_speaker(&utilities, lambda)?;
                let base = (w * n_ctx + i) * n_msg * n_alt;
                probs[base..base + n_msg * n_alt].copy_from_slice(dist.probs());
            }
        }
        Ok(SpeakerTable {
            level: 1,
            n_ctx,
            n_alt_ctx: n_alt,
            n_msg,
            probs,
        })
    }

    /// Prior of the first pragmatic listener over `(world, inferred)`.
    fn level1_prior(&self) -> Vec<f64> {
        let n_ctx = self.inferred.count();
        let mut prior = vec![0.0; self.n_worlds * n_ctx];
        for w in 0..self.n_worlds {
            for i in 0..n_ctx {
                let world_p = match self.listener_prior {
                    ListenerPrior::Shared => self.world_prior[w],
                    ListenerPrior::Literal => self.literal_prior_for(self.full_ctx(i, 0, 0))[w],
                };
                prior[w * n_ctx + i] = world_p * self.prior_of(&self.inferred, i);
            }
        }
        prior
    }

    /// Joint posterior over `(world, inferred values)` for a listener who
    /// believes `speaker(world, inferred_ctx)` is the probability of `message`.
    pub fn pragmatic_listener(
        &self,
        message: usize,
        speaker: impl Fn(usize, usize) -> f64,
    ) -> Result<JointPosterior, EngineError> {
        let n_ctx = self.inferred.count();
        let prior = self.level1_prior();
        let likelihood: Vec<f64> = (0..self.n_worlds * n_ctx)
            .map(|s| speaker(s / n_ctx, s % n_ctx))
            .collect();
        let dist = bayes(&prior, &likelihood).ok_or(EngineError::UnreachableMessage { message })?;
        Ok(JointPosterior { dist, n_ctx })
    }

    /// Index of the kept projection of an inferred context.
    fn kept_of_inferred(&self, inferred: usize) -> usize {
        let values = self.inferred.decode(inferred);
        self.kept.vars.iter().fold(0, |acc, var| {
            let pos = self
                .inferred
                .vars
                .iter()
                .position(|v| v == var)
                .expect("kept ⊆ inferred");
            acc * self.lifted[*var].prior.len() + values[pos]
        })
    }

    fn level1_listener(&self, speaker: &SpeakerTable) -> ListenerTable {
        let n_inf = self.inferred.count();
        let n_kept = self.kept.count();
        let prior = self.level1_prior();
        let mut joint = Vec::with_capacity(self.n_messages());
        let mut conditional = Vec::with_capacity(self.n_messages());
        for m in 0..self.n_messages() {
            let likelihood: Vec<f64> = (0..self.n_worlds * n_inf)
                .map(|s| speaker.prob(m, s / n_inf, s % n_inf))
                .collect();
            let Some(post) = bayes(&prior, &likelihood) else {
                joint.push(None);
                conditional.push(None);
                continue;
            };
            let fallback = prior.iter().zip(&likelihood).all(|(p, l)| p * l == 0.0);
            let z: f64 = if fallback {
                likelihood.iter().sum()
            } else {
                prior.iter().zip(&likelihood).map(|(p, l)| p * l).sum()
            };
            let mut j = vec![0.0; self.n_worlds * n_kept];
            let mut c = vec![0.0; self.n_worlds * n_kept];
            for w in 0..self.n_worlds {
                for i in 0..n_inf {
                    let k = self.kept_of_inferred(i);
                    let s = w * n_inf + i;
                    j[w * n_kept + k] += post.get(s);
                    // Same weight with the kept variables' prior divided out.
                    let kept_free = if fallback {
                        likelihood[s]
                    } else {
                        self.listener_world_prior(w, i) * self.prior_without_kept(i) * likelihood[s]
                    };
                    c[w * n_kept + k] += kept_free / z;
                }
            }
            joint.push(Some(j));
            conditional.push(Some(c));
        }
        ListenerTable {
            level: 1,
            n_worlds: self.n_worlds,
            n_ctx: n_kept,
            joint,
            conditional,
        }
    }

    fn listener_world_prior(&self, world: usize, inferred: usize) -> f64 {
        match self.listener_prior {
            ListenerPrior::Shared => self.world_prior[world],
            ListenerPrior::Literal => self.literal_prior_for(self.full_ctx(inferred, 0, 0))[world],
        }
    }

    /// Prior of the inferred variables that are not kept.
    fn prior_without_kept(&self, inferred: usize) -> f64 {
        self.inferred
            .vars
            .iter()
            .zip(self.inferred.decode(inferred))
            .filter(|(v, _)| !self.lifted[**v].keep)
            .map(|(&v, val)| self.lifted[v].prior[val])
            .product()
    }

    fn kept_cells(&self, kept: usize) -> Vec<usize> {
        // Goal variable (if kept) selects the partition; otherwise total.
        match &self.goal {
            Some((var, cells)) if self.lifted[*var].keep => {
                let values = self.kept.decode(kept);
                let pos = self
                    .kept
                    .vars
                    .iter()
                    .position(|v| v == var)
                    .expect("goal kept");
                cells[values[pos]].clone()
            }
            _ => (0..self.n_worlds).collect(),
        }
    }

    fn higher_speaker(
        &self,
        listener: &ListenerTable,
        lambda: f64,
    ) -> Result<SpeakerTable, EngineError> {
        let n_msg = self.n_messages();
        let n_kept = self.kept.count();
        let mut probs = vec![0.0; self.n_worlds * n_kept * n_msg];
        for w in 0..self.n_worlds {
            for k in 0..n_kept {
                let cells = self.kept_cells(k);
                let utilities: Vec<f64> = (0..n_msg)
                    .map(|m| match &listener.conditional[m] {
                        None => f64::NEG_INFINITY,
                        Some(c) => {
                            let mass: f64 = (0..self.n_worlds)
                                .filter(|&v| cells[v] == cells[w])
                                .map(|v| c[v * n_kept + k])
                                .sum();
                            ln0(mass) - self.costs[m]
                        }
                    })
                    .collect();
                let dist = softmax_speaker(&utilities, lambda)?;
                let base = (w * n_kept + k) * n_msg;
                probs[base..base + n_msg].copy_from_slice(dist.probs());
            }
        }
        Ok(SpeakerTable {
            level: listener.level + 1,
            n_ctx: n_kept,
            n_alt_ctx: 1,
            n_msg,
            probs,
        })
    }

    fn higher_listener(&self, speaker: &SpeakerTable) -> ListenerTable {
        let n_kept = self.kept.count();
        let prior: Vec<f64> = (0..self.n_worlds * n_kept)
            .map(|s| self.world_prior[s / n_kept] * self.prior_of(&self.kept, s % n_kept))
            .collect();
        let mut joint = Vec::new();
        let mut conditional = Vec::new();
        for m in 0..self.n_messages() {
            let likelihood: Vec<f64> = (0..self.n_worlds * n_kept)
                .map(|s| speaker.prob(m, s / n_kept, s % n_kept))
                .collect();
            match bayes(&prior, &likelihood) {
                None => {
                    joint.push(None);
                    conditional.push(None);
                }
                Some(post) => {
                    let fallback = prior.iter().zip(&likelihood).all(|(p, l)| p * l == 0.0);
                    let cond: Vec<f64> = if fallback {
                        post.probs().to_vec()
                    } else {
                        let z: f64 = prior.iter().zip(&likelihood).map(|(p, l)| p * l).sum();
                        (0..self.n_worlds * n_kept)
                            .map(|s| self.world_prior[s / n_kept] * likelihood[s] / z)
                            .collect()
                    };
                    joint.push(Some(post.probs().to_vec()));
                    conditional.push(Some(cond));
                }
            }
        }
        ListenerTable {
            level: speaker.level,
            n_worlds: self.n_worlds,
            n_ctx: n_kept,
            joint,
            conditional,
        }
    }

    /// Runs the recursion up to speaker and listener level `depth`.
    pub fn iterate(&self, depth: usize, lambda: f64) -> Result<Recursion, EngineError> {
        if depth == 0 {
            return Err(EngineError::InvalidScenario(
                "depth must be at least 1".into(),
            ));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(EngineError::InvalidScenario(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let s1 = self.level1_speaker(lambda)?;
        let l1 = self.level1_listener(&s1);
        let mut rec = Recursion {
            speakers: vec![s1],
            listeners: vec![l1],
        };
        for _ in 1..depth {
            let s = self.higher_speaker(rec.listeners.last().expect("nonempty"), lambda)?;
            let l = self.higher_listener(&s);
            rec.speakers.push(s);
            rec.listeners.push(l);
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_world(prior: Vec<f64>, costs: Vec<f64>, truth: [[bool; 2]; 3]) -> GenericScenario {
        ScenarioBuilder::new(prior, costs)
            .build(|m, w, _| truth[m][w])
            .unwrap()
    }

    #[test]
    fn literal_listener_examples() {
        let s = two_world(
            vec![0.5, 0.5],
            vec![0.0, 0.0, 0.0],
            [[true, true], [false, true], [true, false]],
        );
        assert_eq!(s.literal_listener(0, 0).unwrap().probs(), &[0.5, 0.5]);
        let s = two_world(
            vec![0.3, 0.7],
            vec![0.0, 0.0, 0.0],
            [[true, true], [false, true], [true, false]],
        );
        assert_eq!(s.literal_listener(1, 0).unwrap().probs(), &[0.0, 1.0]);
        let s = two_world(
            vec![0.25, 0.75],
            vec![0.0; 3],
            [[true, true], [false, true], [true, false]],
        );
        assert_eq!(s.literal_listener(0, 0).unwrap().probs(), &[0.25, 0.75]);
    }

    #[test]
    fn degenerate_message_is_an_error() {
        let mut b = ScenarioBuilder::new(vec![0.5, 0.5], vec![0.0, 0.0]);
        let i = b.lifted("i", vec![0.5, 0.5], LiftedRole::Inferred);
        let s = b.build(|m, w, v| m == 0 || (v[i] == 1 && w == 0)).unwrap();
        // Message 1 is false everywhere under i = 0.
        let ctx0 = 0;
        assert_eq!(
            s.literal_listener(1, ctx0),
            Err(EngineError::DegenerateMessage {
                message: 1,
                context: 0
            })
        );
        assert!(s.literal_listener(1, 1).is_ok());
    }

    #[test]
    fn never_true_message_rejected() {
        let r = ScenarioBuilder::new(vec![0.5, 0.5], vec![0.0, 0.0]).build(|m, _, _| m == 0);
        assert!(matches!(r, Err(EngineError::InvalidScenario(_))));
        let r = ScenarioBuilder::new(vec![0.5, 0.6], vec![0.0]).build(|_, _, _| true);
        assert!(matches!(r, Err(EngineError::InvalidScenario(_))));
    }

    #[test]
    fn utility_examples() {
        let d = Distribution::from_weights(vec![1.0, 0.0]).unwrap();
        assert_eq!(utility(&d, 0, 0.0), 0.0);
        assert_eq!(utility(&d, 1, 3.0), f64::NEG_INFINITY);
        let d = Distribution::from_weights(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            utility(&d, 0, 0.5),
            -1.193_147_180_559_945_3,
            epsilon = 1e-12
        );
        let d = Distribution::from_weights(vec![0.0, 1.0]).unwrap();
        assert_eq!(utility(&d, 0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(
            softmax_speaker(&[0.0, 0.0], 3.0).unwrap().probs(),
            &[0.5, 0.5]
        );
        assert_eq!(
            softmax_speaker(&[0.0, f64::NEG_INFINITY], 1.0)
                .unwrap()
                .probs(),
            &[1.0, 0.0]
        );
        // exp(ln .5) = .5 and exp(-.5) = .60653; normalized by hand.
        let d = softmax_speaker(&[0.5f64.ln(), -0.5], 1.0).unwrap();
        assert_abs_diff_eq!(d.get(0), 0.5 / (0.5 + (-0.5f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(d.get(0), 0.4519, epsilon = 1e-4);
        assert_abs_diff_eq!(d.get(1), 0.5481, epsilon = 1e-4);
        assert_eq!(
            softmax_speaker(&[f64::NEG_INFINITY; 2], 1.0),
            Err(EngineError::AllMessagesUnusable)
        );
    }

    #[test]
    fn softmax_survives_huge_lambda() {
        let d = softmax_speaker(&[-0.1, -0.2, f64::NEG_INFINITY], 1e3).unwrap();
        assert!(d.get(0) > 0.999_999);
        assert_eq!(d.get(2), 0.0);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pragmatic_listener_examples() {
        let s = two_world(
            vec![0.4, 0.6],
            vec![0.0; 3],
            [[true, true], [false, true], [true, false]],
        );
        let post = s
            .pragmatic_listener(0, |w, _| if w == 0 { 1.0 } else { 0.0 })
            .unwrap();
        assert_eq!(post.marginal_world(), vec![1.0, 0.0]);
        let post = s.pragmatic_listener(0, |_, _| 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(post.marginal_world()[1], 0.6, epsilon = 1e-15);

        let s = two_world(
            vec![0.5, 0.5],
            vec![0.0; 3],
            [[true, true], [false, true], [true, false]],
        );
        let post = s.pragmatic_listener(0, |w, _| [0.2, 0.6][w]).unwrap();
        assert_abs_diff_eq!(post.marginal_world()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(post.marginal_world()[1], 0.75, epsilon = 1e-15);

        assert_eq!(
            s.pragmatic_listener(2, |_, _| 0.0).unwrap_err(),
            EngineError::UnreachableMessage { message: 2 }
        );
    }

    #[test]
    fn depth_one_unrolls_definitions() {
        let p = 0.7;
        let costs = vec![0.0, 0.5, 1.0];
        let s = two_world(
            vec![1.0 - p, p],
            costs.clone(),
            [[true, true], [false, true], [true, false]],
        );
        let rec = s.iterate(1, 2.0).unwrap();
        for w in 0..2 {
            let utilities: Vec<f64> = (0..3)
                .map(|m| utility(&s.literal_listener(m, 0).unwrap(), w, costs[m]))
                .collect();
            let expected = softmax_speaker(&utilities, 2.0).unwrap();
            for m in 0..3 {
                assert_abs_diff_eq!(
                    rec.speaker(1).prob(m, w, 0),
                    expected.get(m),
                    epsilon = 1e-15
                );
            }
        }
        let post = s
            .pragmatic_listener(0, |w, k| rec.speaker(1).prob(0, w, k))
            .unwrap();
        assert_abs_diff_eq!(
            rec.listener(1).marginal_world(0).unwrap()[1],
            post.marginal_world()[1],
            epsilon = 1e-15
        );
    }

    #[test]
    fn large_lambda_picks_most_informative_true_message() {
        let s = two_world(
            vec![0.5, 0.5],
            vec![0.0; 3],
            [[true, true], [false, true], [true, false]],
        );
        let rec = s.iterate(1, 200.0).unwrap();
        assert!(rec.speaker(1).prob(1, 1, 0) > 1.0 - 1e-12);
        assert!(rec.speaker(1).prob(2, 0, 0) > 1.0 - 1e-12);
    }

    #[test]
    fn expected_utility_skips_zero_prior_terms() {
        let mut b = ScenarioBuilder::new(vec![0.5, 0.5], vec![0.0, 0.0]);
        let i = b.lifted("i", vec![1.0, 0.0], LiftedRole::Averaged);
        // Message 0 is false in world 1 under the zero-prior value.
        let s = b.build(|m, w, v| m == 1 || v[i] == 0 || w == 0).unwrap();
        assert_abs_diff_eq!(s.speaker_utility(0, 0, 1, 0), 0.5f64.ln(), epsilon = 1e-15);
    }
}
