//! Where in the prior range do models become anti-exhaustive?
//!
//! The baseline checkers are the analytic conditions; [`scan_regions`]
//! finds the same regions numerically for any model.
//!
//! ```
//! use rsa_exh::analysis::{scan_regions, Predicate};
//! use rsa_exh::models::ModelId;
//! use rsa_exh::scenario::ModelParams;
//!
//! let params = ModelParams::new(3.0, 0.5, 1.0);
//! let report = scan_regions(ModelId::BaseRsa, &params, Predicate::ListenerAntiExh, 0.01).unwrap();
//! let (lo, hi) = report.intervals[0];
//! assert!((lo - 0.6225).abs() < 1e-3 && hi == 1.0);
//! ```

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{fmt_sig, logistic, LOG_2};
use crate::models::{predict, ModelError, ModelId, Predictions};
use crate::scenario::{Message, ModelParams, Prior};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("grid step must lie in (0, 0.01], got {0}")]
    BadGridStep(f64),
    #[error("grid must be nonempty and lie in [0, 1]")]
    BadGrid,
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("output failed: {0}")]
    Io(#[from] std::io::Error),
}

/// `W_AB` becomes more likely after `A` than before: `ln p - ln(1-p) > Δ_anb - Δ_ab`.
pub fn check_listener_antiexh_base(params: &ModelParams, p: f64) -> bool {
    p.ln() - (1.0 - p).ln() > params.delta_anb - params.delta_ab
}

/// The level-1 speaker in `W_AB` prefers `A` over `A∧B`: `-ln p < Δ_ab`.
pub fn check_speaker_antiexh_base(params: &ModelParams, p: f64) -> bool {
    -p.ln() < params.delta_ab
}

/// The level-1 speaker in `W_A` prefers `A∧¬B` over `A`: `-ln(1-p) > Δ_anb`.
pub fn check_explicit_preferred(params: &ModelParams, p: f64) -> bool {
    -(1.0 - p).ln() > params.delta_anb
}

/// Largest wonkiness prior for which BwRSA is anti-exhaustive at some prior.
/// Values above 1 mean every `ω ∈ [0, 1]` qualifies.
pub fn bwrsa_antiexh_threshold(params: &ModelParams) -> f64 {
    let f = |x: f64| logistic(params.lambda * x);
    let (c_ab, c_anb) = (params.delta_ab, params.delta_anb);
    f(c_ab) / (f(c_ab) - f(c_ab - LOG_2) + f(c_anb - LOG_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    /// `L1(W_AB | A) > p`.
    ListenerAntiExh,
    /// The production speaker in `W_AB` prefers `A` over `A∧B`.
    SpeakerAntiExh,
    /// The production speaker in `W_A` prefers `A∧¬B` over `A`.
    ProductionExplicitPreferred,
}

impl Predicate {
    pub const ALL: [Predicate; 3] = [
        Predicate::ListenerAntiExh,
        Predicate::SpeakerAntiExh,
        Predicate::ProductionExplicitPreferred,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::ListenerAntiExh => "listener-anti-exh",
            Predicate::SpeakerAntiExh => "speaker-anti-exh",
            Predicate::ProductionExplicitPreferred => "production-explicit-preferred",
        }
    }

    pub fn holds(self, pred: &Predictions, p: f64) -> bool {
        match self {
            Predicate::ListenerAntiExh => pred.post_a > p,
            Predicate::SpeakerAntiExh => pred.prod_wab[Message::A] > pred.prod_wab[Message::AAndB],
            Predicate::ProductionExplicitPreferred => {
                pred.prod_wa[Message::AAndNotB] > pred.prod_wa[Message::A]
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predicate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown predicate {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub model: ModelId,
    pub params: ModelParams,
    pub predicate: Predicate,
    /// Disjoint, sorted sub-intervals of `[0, 1]` where the predicate holds.
    pub intervals: Vec<(f64, f64)>,
}

const BISECTION_TOL: f64 = 1e-6;
const ENDPOINT_OFFSET: f64 = 1e-9;

fn predicate_at(
    model: ModelId,
    params: &ModelParams,
    predicate: Predicate,
    p: f64,
) -> Result<bool, ModelError> {
    let prior = Prior::new(p)?;
    Ok(predicate.holds(&predict(model, params, prior)?, p))
}

/// Finds the sub-intervals of `[0, 1]` where `predicate` holds, on a grid of
/// step `grid_step` refined by bisection at every sign change.
pub fn scan_regions(
    model: ModelId,
    params: &ModelParams,
    predicate: Predicate,
    grid_step: f64,
) -> Result<RegionReport, AnalysisError> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(AnalysisError::BadGridStep(grid_step));
    }
    let n = (1.0 / grid_step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).min(1.0)).collect();
    // Comparisons against the prior are ties at p ∈ {0, 1}; the endpoints
    // take the value of their immediate neighbourhood.
    let probe = |p: f64| p.clamp(ENDPOINT_OFFSET, 1.0 - ENDPOINT_OFFSET);
    let values = grid
        .iter()
        .map(|&p| predicate_at(model, params, predicate, probe(p)))
        .collect::<Result<Vec<_>, _>>()?;

    let boundary = |mut lo: f64, mut hi: f64, lo_value: bool| -> Result<f64, ModelError> {
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if predicate_at(model, params, predicate, probe(mid))? == lo_value {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    let mut intervals = Vec::new();
    let mut start = if values[0] { Some(0.0) } else { None };
    for i in 0..n {
        if values[i] == values[i + 1] {
            continue;
        }
        let b = boundary(grid[i], grid[i + 1], values[i])?;
        match start.take() {
            Some(s) => intervals.push((s, b)),
            None => start = Some(b),
        }
    }
    if let Some(s) = start {
        intervals.push((s, 1.0));
    }
    Ok(RegionReport {
        model,
        params: *params,
        predicate,
        intervals,
    })
}

/// `n` evenly spaced interior priors `i / (n + 1)`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelId,
    pub p: f64,
    pub listener_anti_exh: bool,
    pub speaker_anti_exh: bool,
    pub production_explicit_preferred: bool,
    #[serde(flatten)]
    pub predictions: Predictions,
}

/// Predictions and predicate values of `model` at every prior in `grid`.
pub fn sweep(
    model: ModelId,
    params: &ModelParams,
    grid: &[f64],
) -> Result<Vec<SweepRow>, AnalysisError> {
    if grid.is_empty() || grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(AnalysisError::BadGrid);
    }
    grid.iter()
        .map(|&p| {
            let predictions = predict(model, params, Prior::new(p).map_err(ModelError::from)?)?;
            Ok(SweepRow {
                model,
                p,
                listener_anti_exh: Predicate::ListenerAntiExh.holds(&predictions, p),
                speaker_anti_exh: Predicate::SpeakerAntiExh.holds(&predictions, p),
                production_explicit_preferred: Predicate::ProductionExplicitPreferred
                    .holds(&predictions, p),
                predictions,
            })
        })
        .collect()
}

/// Writes sweep rows as CSV with a header and 9 significant digits.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = vec!["model", "p"];
    header.extend(Predicate::ALL.iter().map(|p| p.name()));
    header.extend(&Predictions::CSV_HEADER[2..]);
    w.write_record(&header)?;
    for row in rows {
        let mut record = row.predictions.csv_record(row.model, row.p);
        let flags = [
            row.listener_anti_exh,
            row.speaker_anti_exh,
            row.production_explicit_preferred,
        ];
        for (k, flag) in flags.iter().enumerate() {
            record.insert(2 + k, flag.to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes region reports as CSV, one row per interval (or one empty row
/// when a report has no intervals).
pub fn write_regions_csv<W: Write>(reports: &[RegionReport], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "predicate", "lo", "hi"])?;
    for r in reports {
        if r.intervals.is_empty() {
            w.write_record([r.model.name(), r.predicate.name(), "", ""])?;
        }
        for (lo, hi) in &r.intervals {
            w.write_record([
                r.model.name(),
                r.predicate.name(),
                &fmt_sig(*lo, 9),
                &fmt_sig(*hi, 9),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::base_rsa_s1;
    use crate::scenario::World;
    use approx::assert_abs_diff_eq;

    #[test]
    fn checker_examples() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        assert!(check_listener_antiexh_base(&params, 0.9));
        assert!(!check_listener_antiexh_base(
            &ModelParams::new(3.0, 0.7, 0.7),
            0.5
        ));
        assert!(check_speaker_antiexh_base(&params, 0.9));
        assert!(!check_speaker_antiexh_base(
            &ModelParams::new(3.0, 0.0, 1.0),
            0.99
        ));
        assert!(check_explicit_preferred(&params, 0.9));
        assert!(check_explicit_preferred(
            &ModelParams::new(3.0, 0.5, 0.0),
            0.01
        ));
    }

    #[test]
    fn speaker_checker_matches_s1() {
        let params = ModelParams::new(2.0, 0.5, 1.0);
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let s1 = base_rsa_s1(&params, p, World::AB);
            assert_eq!(
                check_speaker_antiexh_base(&params, p),
                s1[Message::A] > s1[Message::AAndB]
            );
        }
    }

    #[test]
    fn threshold_example() {
        let t = bwrsa_antiexh_threshold(&ModelParams::new(3.0, 1.0, 1.2));
        assert!(t > 0.9 && t < 1.0, "{t}");
        // Equal costs put the threshold at exactly 1.
        let t = bwrsa_antiexh_threshold(&ModelParams::new(3.0, 0.8, 0.8));
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn base_region_is_upper_interval() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        let r = scan_regions(ModelId::BaseRsa, &params, Predicate::ListenerAntiExh, 0.01).unwrap();
        assert_eq!(r.intervals.len(), 1);
        let threshold = logistic(0.5);
        assert_abs_diff_eq!(r.intervals[0].0, threshold, epsilon = 2e-6);
        assert_eq!(r.intervals[0].1, 1.0);
    }

    #[test]
    fn svrsa_has_no_listener_region() {
        let params = ModelParams::new(4.0, 0.2, 1.5).with_xi(0.6);
        let r = scan_regions(ModelId::Svrsa1, &params, Predicate::ListenerAntiExh, 0.01).unwrap();
        assert!(r.intervals.is_empty());
    }

    #[test]
    fn bad_step_rejected() {
        let params = ModelParams::new(1.0, 0.0, 0.0);
        assert!(scan_regions(ModelId::BaseRsa, &params, Predicate::ListenerAntiExh, 0.05).is_err());
        assert!(scan_regions(ModelId::BaseRsa, &params, Predicate::ListenerAntiExh, 0.0).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let params = ModelParams::new(3.0, 0.5, 1.0);
        let rows = sweep(ModelId::BaseRsa, &params, &uniform_grid(3)).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("model,p,listener-anti-exh,"));
        assert!(lines[2].starts_with("base,0.5,false,"));
        assert_eq!(lines[1].split(',').count(), 13);
    }

    #[test]
    fn symmetric_models_keep_even_prior() {
        let params = ModelParams::new(3.0, 0.4, 0.4).with_xi(0.3);
        for m in [
            ModelId::BaseRsa,
            ModelId::Wrsa,
            ModelId::Bwrsa,
            ModelId::FreeLu,
        ] {
            let rows = sweep(m, &params, &[0.5]).unwrap();
            assert_abs_diff_eq!(rows[0].predictions.post_a, 0.5, epsilon = 1e-12);
        }
    }
}
