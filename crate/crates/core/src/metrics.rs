//! Scalar evaluation functions and the classification decision rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decision threshold on the scaled tree output for binary problems.
pub const CLASS_THRESHOLD: f64 = 0.5;

fn check_lengths(d: &[f64], y: &[f64]) -> Result<()> {
    if d.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: d.len(),
            right: y.len(),
        });
    }
    if d.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    Ok(())
}

/// Mean squared error between desired outputs `d` and model outputs `y`.
pub fn mse(d: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(d, y)?;
    let sum: f64 = d.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / d.len() as f64)
}

/// Half of the MSE, the convention used for the regression benchmarks.
pub fn half_mse(d: &[f64], y: &[f64]) -> Result<f64> {
    Ok(0.5 * mse(d, y)?)
}

pub fn rmse(d: &[f64], y: &[f64]) -> Result<f64> {
    Ok(mse(d, y)?.sqrt())
}

/// Pearson correlation. `None` when either vector has zero variance.
pub fn correlation(d: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if d.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: d.len(),
            right: y.len(),
        });
    }
    if d.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two pairs".into(),
        ));
    }
    let n = d.len() as f64;
    let md = d.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sdy, mut sdd, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in d.iter().zip(y) {
        let (da, db) = (a - md, b - my);
        sdy += da * db;
        sdd += da * da;
        syy += db * db;
    }
    if sdd == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sdy / (sdd * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Class decision for one model.
///
/// A single output is a binary decision (class 1 iff `output >= 0.5`).
/// Several outputs are one-hot scores, one tree per class, decided by argmax
/// with ties going to the lowest class id.
pub fn classify(outputs: &[f64]) -> usize {
    match outputs {
        [] => 0,
        [single] => usize::from(*single >= CLASS_THRESHOLD),
        many => {
            let mut best = 0;
            for (i, v) in many.iter().enumerate().skip(1) {
                if *v > many[best] {
                    best = i;
                }
            }
            best
        }
    }
}

/// Binary confusion counts, class 1 taken as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Confusion { tp, tn, fp, fn_ }
    }

    pub fn from_labels(actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: actual.len(),
                right: predicted.len(),
            });
        }
        let mut c = Confusion::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a != 0, p != 0) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// `(tp + tn) / (tp + fn + fp + tn)`.
pub fn accuracy(c: &Confusion) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

/// Weighted-sum scalarization `alpha * e + (1 - alpha) * d`.
pub fn scalarized(e: f64, d: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    Ok(alpha * e + (1.0 - alpha) * d)
}

/// Evaluation record for one model (or ensemble) on one data split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub samples: usize,
    pub mse: f64,
    pub rmse: f64,
    pub half_mse: f64,
    /// `None` when undefined (a constant vector).
    pub correlation: Option<f64>,
    pub accuracy: Option<f64>,
    pub confusion: Option<Confusion>,
}

impl EvalResult {
    /// Regression record from desired and predicted values (same units).
    pub fn regression(d: &[f64], y: &[f64]) -> Result<Self> {
        let mse = mse(d, y)?;
        let correlation = if d.len() >= 2 { correlation(d, y)? } else { None };
        Ok(EvalResult {
            samples: d.len(),
            mse,
            rmse: mse.sqrt(),
            half_mse: 0.5 * mse,
            correlation,
            accuracy: None,
            confusion: None,
        })
    }

    /// Classification record. `d`/`y` are the encoded targets and raw
    /// scores used for the error; `actual`/`predicted` are class ids.
    pub fn classification(
        d: &[f64],
        y: &[f64],
        actual: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        let mut r = EvalResult::regression(d, y)?;
        if actual.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: actual.len(),
                right: predicted.len(),
            });
        }
        let binary = actual.iter().chain(predicted).all(|&c| c < 2);
        if binary {
            let c = Confusion::from_labels(actual, predicted)?;
            r.accuracy = Some(accuracy(&c)?);
            r.confusion = Some(c);
        } else {
            let hits = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
            r.accuracy = Some(hits as f64 / actual.len().max(1) as f64);
        }
        Ok(r)
    }
}
