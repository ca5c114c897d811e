//! Class scores from detector signals.
//!
//! Three readout schemes share the [`ClassScores`] result:
//!
//! * differential: raw_m = (I+ − I−) / (I+ + I−), always in [−1, 1];
//! * non-differential: raw_m = I_m / max(I);
//! * generalized: raw_m = (p_m·I+ − n_m·I−) / (I+ + I−), which reduces
//!   exactly to the differential form at p = n = 1.
//!
//! The temperature T only rescales scores for the softmax during training
//! (`scaled = raw / T`); predictions always use the raw scores.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    raw: Vec<f64>,
    scaled: Vec<f64>,
    temperature: f64,
}

impl ClassScores {
    fn from_raw(raw: Vec<f64>, temperature: f64) -> Result<Self> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::Numeric(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let scaled = raw.iter().map(|r| r / temperature).collect();
        Ok(Self {
            raw,
            scaled,
            temperature,
        })
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn scaled(&self) -> &[f64] {
        &self.scaled
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn num_classes(&self) -> usize {
        self.raw.len()
    }
}

/// Per-class scaling coefficients for the generalized differential readout.
/// `p = n = 1` reproduces balanced differential detection bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCoefficients {
    pub p: Vec<f64>,
    pub n: Vec<f64>,
    pub learnable: bool,
}

impl DetectorCoefficients {
    pub fn balanced(num_classes: usize) -> Self {
        Self {
            p: vec![1.0; num_classes],
            n: vec![1.0; num_classes],
            learnable: false,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.p.len()
    }
}

fn check_signals(signals: &[f64], what: &str) -> Result<()> {
    if let Some(bad) = signals.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Numeric(format!(
            "{what} signals must be finite and non-negative, got {bad}"
        )));
    }
    Ok(())
}

/// Normalized difference of the positive/negative detector pair per class,
/// scaled by the training temperature. A class whose pair received no light
/// at all scores 0.
pub fn differential_scores(pos: &[f64], neg: &[f64], temperature: f64) -> Result<ClassScores> {
    if pos.len() != neg.len() {
        return Err(Error::Shape(format!(
            "positive/negative signal counts differ: {} vs {}",
            pos.len(),
            neg.len()
        )));
    }
    check_signals(pos, "positive")?;
    check_signals(neg, "negative")?;
    let raw = pos
        .iter()
        .zip(neg)
        .map(|(&ip, &inn)| {
            let total = ip + inn;
            if total > 0.0 {
                (ip - inn) / total
            } else {
                0.0
            }
        })
        .collect();
    ClassScores::from_raw(raw, temperature)
}

/// d(loss)/d(I+), d(loss)/d(I−) given d(loss)/d(raw score).
pub fn differential_backward(pos: &[f64], neg: &[f64], d_raw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut d_pos = Vec::with_capacity(pos.len());
    let mut d_neg = Vec::with_capacity(neg.len());
    for ((&ip, &inn), &g) in pos.iter().zip(neg).zip(d_raw) {
        let total = ip + inn;
        if total > 0.0 {
            let t2 = total * total;
            d_pos.push(g * 2.0 * inn / t2);
            d_neg.push(g * -2.0 * ip / t2);
        } else {
            d_pos.push(0.0);
            d_neg.push(0.0);
        }
    }
    (d_pos, d_neg)
}

/// Per-detector signals normalized by the system-wide maximum. With all
/// signals zero the scores are uniform (1/M each).
pub fn nondifferential_scores(signals: &[f64], temperature: f64) -> Result<ClassScores> {
    if signals.is_empty() {
        return Err(Error::Shape("no detector signals".into()));
    }
    check_signals(signals, "detector")?;
    let max = signals.iter().cloned().fold(0.0, f64::max);
    let raw = if max > 0.0 {
        signals.iter().map(|&s| s / max).collect()
    } else {
        vec![1.0 / signals.len() as f64; signals.len()]
    };
    ClassScores::from_raw(raw, temperature)
}

/// Gradient of the non-differential scores, routing the max() subgradient
/// to the first maximal detector.
pub fn nondifferential_backward(signals: &[f64], d_raw: &[f64]) -> Vec<f64> {
    let max = signals.iter().cloned().fold(0.0, f64::max);
    let mut grads = vec![0.0; signals.len()];
    if max <= 0.0 {
        return grads;
    }
    let argmax = signals
        .iter()
        .position(|&s| s == max)
        .expect("max exists");
    for (m, (&s, &g)) in signals.iter().zip(d_raw).enumerate() {
        // raw_m = I_m / I_k with k = argmax
        grads[m] += g / max;
        grads[argmax] -= g * s / (max * max);
    }
    grads
}

/// Generalized differential readout with per-class coefficients:
/// raw_m = (p_m·I+ − n_m·I−) / (I+ + I−).
pub fn generalized_scores(
    pos: &[f64],
    neg: &[f64],
    coefficients: &DetectorCoefficients,
    temperature: f64,
) -> Result<ClassScores> {
    if pos.len() != neg.len() || pos.len() != coefficients.num_classes() {
        return Err(Error::Shape(format!(
            "signal/coefficient counts differ: {} pos, {} neg, {} coefficients",
            pos.len(),
            neg.len(),
            coefficients.num_classes()
        )));
    }
    check_signals(pos, "positive")?;
    check_signals(neg, "negative")?;
    let raw = pos
        .iter()
        .zip(neg)
        .zip(coefficients.p.iter().zip(&coefficients.n))
        .map(|((&ip, &inn), (&p, &n))| {
            let total = ip + inn;
            if total > 0.0 {
                (p * ip - n * inn) / total
            } else {
                0.0
            }
        })
        .collect();
    ClassScores::from_raw(raw, temperature)
}

/// Gradients of the generalized scores with respect to the signals and,
/// when training them, the coefficients.
pub struct GeneralizedGrads {
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<f64>,
    pub d_p: Vec<f64>,
    pub d_n: Vec<f64>,
}

pub fn generalized_backward(
    pos: &[f64],
    neg: &[f64],
    coefficients: &DetectorCoefficients,
    d_raw: &[f64],
) -> GeneralizedGrads {
    let m = pos.len();
    let mut out = GeneralizedGrads {
        d_pos: vec![0.0; m],
        d_neg: vec![0.0; m],
        d_p: vec![0.0; m],
        d_n: vec![0.0; m],
    };
    for i in 0..m {
        let (ip, inn, g) = (pos[i], neg[i], d_raw[i]);
        let total = ip + inn;
        if total <= 0.0 {
            continue;
        }
        let (p, n) = (coefficients.p[i], coefficients.n[i]);
        let t2 = total * total;
        // d raw/d I+ = (p·total − numerator)/total² = (p + n)·I− / total²
        out.d_pos[i] = g * (p + n) * inn / t2;
        out.d_neg[i] = g * -(p + n) * ip / t2;
        out.d_p[i] = g * ip / total;
        out.d_n[i] = g * -inn / total;
    }
    out
}

/// Blind prediction: the class with the highest raw score, ties broken by
/// the lowest class id. The temperature never matters here.
pub fn predict(scores: &ClassScores) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &s) in scores.raw().iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}
