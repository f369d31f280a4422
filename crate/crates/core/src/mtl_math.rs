//! Training-side math as pure functions: softmax head, cross-entropy,
//! weighted two-task loss, linear learning-rate decay, checkpoint choice and
//! a one-sample t-test.
//!
//! Logs are natural logs throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight of the auxiliary-question task loss.
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BASE_LR: f64 = 1e-5;
pub const DEFAULT_EPOCHS: usize = 5;
pub const DEFAULT_BATCH_SIZE: usize = 8;
/// Floor applied to predicted probabilities inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits, "logits")?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `log(softmax(logits))` without forming the probabilities.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits, "logits")?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|x| x - lse).collect())
}

/// `-Σ y_i ln(max(ŷ_i, 1e-12))`.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::invalid(format!("target has {} classes, prediction has {}", target.len(), predicted.len())));
    }
    Ok(-target.iter().zip(predicted).filter(|(y, _)| **y != 0.0).map(|(y, p)| y * p.max(PROB_FLOOR).ln()).sum::<f64>())
}

/// One-hot vector of length `classes` with a 1 at `class`.
pub fn one_hot(class: usize, classes: usize) -> Result<Vec<f64>> {
    if class >= classes {
        return Err(Error::invalid(format!("class {class} out of range for {classes} classes")));
    }
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    Ok(v)
}

/// Per-task losses and the auxiliary weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPair {
    /// Auxiliary-question task.
    pub l1: f64,
    /// Title-question task.
    pub l2: f64,
    pub alpha: f64,
}

impl LossPair {
    pub fn new(l1: f64, l2: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("l1", l1), ("l2", l2), ("alpha", alpha)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(Self { l1, l2, alpha })
    }
}

/// `l2 + alpha * l1`.
pub fn combined_loss(pair: LossPair) -> f64 {
    pair.l2 + pair.alpha * pair.l1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub base_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub total_steps: usize,
}

impl TrainSchedule {
    /// `total_steps = ceil(n_train / batch_size) * epochs`.
    pub fn new(n_train: usize, batch_size: usize, epochs: usize, base_lr: f64) -> Result<Self> {
        if n_train == 0 || batch_size == 0 || epochs == 0 {
            return Err(Error::invalid("n_train, batch_size and epochs must be positive"));
        }
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::invalid(format!("base_lr must be positive, got {base_lr}")));
        }
        let total_steps = n_train.div_ceil(batch_size) * epochs;
        Ok(Self { base_lr, epochs, batch_size, total_steps })
    }

    pub fn with_defaults(n_train: usize) -> Result<Self> {
        Self::new(n_train, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_BASE_LR)
    }
}

/// `base_lr * (1 - step / total_steps)`, no warmup.
pub fn linear_lr(schedule: &TrainSchedule, step: usize) -> Result<f64> {
    if step > schedule.total_steps {
        return Err(Error::invalid(format!("step {step} beyond total_steps {}", schedule.total_steps)));
    }
    Ok(schedule.base_lr * (1.0 - step as f64 / schedule.total_steps as f64))
}

/// Index of the lowest validation loss, first one on ties.
pub fn select_checkpoint(val_losses: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in val_losses.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::invalid(format!("validation loss {i} is NaN")));
        }
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| Error::invalid("no validation losses"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// H1: mean > mu0.
    Greater,
    /// H1: mean < mu0.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
    pub alternative: Alternative,
}

/// One-sample Student t-test of `mean(samples) == mu0`.
pub fn one_sample_ttest(samples: &[f64], mu0: f64, alternative: Alternative) -> Result<TTestResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!("t-test needs at least 2 samples, got {n}")));
    }
    check_finite(samples, "samples")?;
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t = (mean - mu0) / (var.sqrt() / (n as f64).sqrt());
    let df = n - 1;
    let nu = df as f64;
    let p_value = match alternative {
        Alternative::TwoSided => 2.0 * student_t_sf(t.abs(), nu),
        Alternative::Greater => student_t_sf(t, nu),
        Alternative::Less => student_t_cdf(t, nu),
    };
    Ok(TTestResult { t_statistic: t, p_value: p_value.clamp(0.0, 1.0), df, alternative })
}

/// Student t CDF with `nu` degrees of freedom.
pub fn student_t_cdf(t: f64, nu: f64) -> f64 {
    1.0 - student_t_sf(t, nu)
}

/// Upper tail `P(T > t)`.
pub fn student_t_sf(t: f64, nu: f64) -> f64 {
    let x = nu / (nu + t * t);
    let tail = 0.5 * regularized_incomplete_beta(x, nu / 2.0, 0.5);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` via the modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // The fraction converges fast only below the mean; use the symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        for coef in [even, -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))] {
            d = 1.0 + coef * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + coef / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
