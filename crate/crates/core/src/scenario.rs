//! The two-world, three-message universe shared by every model.
//!
//! `A` is true in both worlds under its literal reading. The conjunctive
//! messages `A∧B` and `A∧¬B` are unambiguous; only `A` can be strengthened
//! by an interpretation function.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum World {
    /// `A` true, `B` false.
    A,
    /// `A` and `B` both true.
    AB,
}

impl World {
    pub const ALL: [World; 2] = [World::A, World::AB];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Message {
    A,
    AAndB,
    AAndNotB,
}

impl Message {
    pub const ALL: [Message; 3] = [Message::A, Message::AAndB, Message::AAndNotB];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Message::A => "A",
            Message::AAndB => "A_AND_B",
            Message::AAndNotB => "A_AND_NOT_B",
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Interpretation {
    Literal,
    Exhaustive,
    AntiExhaustive,
}

impl Interpretation {
    pub const ALL: [Interpretation; 3] = [
        Interpretation::Literal,
        Interpretation::Exhaustive,
        Interpretation::AntiExhaustive,
    ];
}

/// A question under discussion: a partition of the two worlds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qud {
    /// One cell `{W_A, W_AB}`: only the truth of `A` matters.
    Partial,
    /// Two singleton cells.
    Total,
}

impl Qud {
    pub const ALL: [Qud; 2] = [Qud::Partial, Qud::Total];

    pub fn cells(self) -> Vec<Vec<World>> {
        match self {
            Qud::Partial => vec![vec![World::A, World::AB]],
            Qud::Total => vec![vec![World::A], vec![World::AB]],
        }
    }

    /// Cell label of `world`, usable as an index into [`Qud::cells`].
    pub fn cell_of(self, world: World) -> usize {
        match self {
            Qud::Partial => 0,
            Qud::Total => world.index(),
        }
    }

    pub fn distinguishes(self, a: World, b: World) -> bool {
        self.cell_of(a) != self.cell_of(b)
    }
}

/// Truth value of `message` in `world` under `interpretation`.
pub fn truth_value(message: Message, world: World, interpretation: Interpretation) -> bool {
    match message {
        Message::AAndB => world == World::AB,
        Message::AAndNotB => world == World::A,
        Message::A => match interpretation {
            Interpretation::Literal => true,
            Interpretation::Exhaustive => world == World::A,
            Interpretation::AntiExhaustive => world == World::AB,
        },
    }
}

/// Conditional prior of `W_AB` given `{W_A, W_AB}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Prior(f64);

impl Prior {
    pub fn new(p: f64) -> Result<Self, ParamError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Prior(p))
        } else {
            Err(ParamError::OutOfRange {
                name: "p",
                value: p,
            })
        }
    }

    pub fn p(self) -> f64 {
        self.0
    }

    pub fn of(self, world: World) -> f64 {
        match world {
            World::A => 1.0 - self.0,
            World::AB => self.0,
        }
    }
}

impl TryFrom<f64> for Prior {
    type Error = ParamError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Prior::new(value)
    }
}

impl From<Prior> for f64 {
    fn from(value: Prior) -> Self {
        value.0
    }
}

/// Probability vector over `[A, A∧B, A∧¬B]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MessageDist(pub [f64; 3]);

impl MessageDist {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Message, f64)> + '_ {
        Message::ALL.iter().map(move |&m| (m, self[m]))
    }
}

impl Index<Message> for MessageDist {
    type Output = f64;

    fn index(&self, m: Message) -> &f64 {
        &self.0[m.index()]
    }
}

impl IndexMut<Message> for MessageDist {
    fn index_mut(&mut self, m: Message) -> &mut f64 {
        &mut self.0[m.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("interpretation priors {0:?} do not sum to 1")]
    BadSimplex([f64; 3]),
    #[error("malformed parameter file: {0}")]
    Format(String),
}

/// The fit-free knobs of every model.
///
/// `xi` is the wonkiness prior for wRSA/BwRSA and the total-QUD prior for
/// svRSA; the other models ignore it. `chi` (prior on the exhaustive
/// reading in svRSA) and `rho` (interpretation priors in the LU family) are
/// normally fixed by the model and left at their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub delta_ab: f64,
    pub delta_anb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default = "default_chi", skip_serializing_if = "is_default_chi")]
    pub chi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 3]>,
}

fn default_chi() -> f64 {
    0.5
}

fn is_default_chi(chi: &f64) -> bool {
    *chi == 0.5
}

impl ModelParams {
    pub fn new(lambda: f64, delta_ab: f64, delta_anb: f64) -> Self {
        ModelParams {
            lambda,
            delta_ab,
            delta_anb,
            xi: None,
            chi: 0.5,
            rho: None,
        }
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_rho(mut self, rho: [f64; 3]) -> Self {
        self.rho = Some(rho);
        self
    }

    /// Cost of each message; `A` costs nothing.
    pub fn cost(&self, message: Message) -> f64 {
        match message {
            Message::A => 0.0,
            Message::AAndB => self.delta_ab,
            Message::AAndNotB => self.delta_anb,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let check = |name, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::OutOfRange { name, value })
            }
        };
        check("lambda", self.lambda, self.lambda > 0.0)?;
        check("delta_ab", self.delta_ab, self.delta_ab >= 0.0)?;
        check("delta_anb", self.delta_anb, self.delta_anb >= 0.0)?;
        if let Some(xi) = self.xi {
            check("xi", xi, (0.0..=1.0).contains(&xi))?;
        }
        check("chi", self.chi, (0.0..=1.0).contains(&self.chi))?;
        if let Some(rho) = self.rho {
            if rho.iter().any(|r| !(0.0..=1.0).contains(r))
                || (rho.iter().sum::<f64>() - 1.0).abs() > 1e-12
            {
                return Err(ParamError::BadSimplex(rho));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        let params: ModelParams =
            serde_json::from_str(text).map_err(|e| ParamError::Format(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

impl FromStr for ModelParams {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelParams::from_json(s)
    }
}
