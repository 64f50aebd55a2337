//! Hoeffding's inequality for the mean of `n` independent variables in `[a, b]`:
//!
//! ```text
//! P( mean - mu >=  t ) <= exp(-2 n t^2 / (b - a)^2)      (upper tail)
//! P( mean - mu <= -t ) <= exp(-2 n t^2 / (b - a)^2)      (lower tail)
//! ```
//!
//! The lower tail is the one that matters here: outside an event of that
//! probability, `mean + t` is an upper bound on the true mean `mu`.

use crate::error::{Error, Result};

/// Which deviation a tail bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Empirical mean exceeds the true mean by at least `t`.
    Upper,
    /// Empirical mean falls short of the true mean by at least `t`.
    Lower,
}

/// Sample size, correction and score range `b - a` of one Hoeffding bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingParams {
    n: usize,
    t: f64,
    range: f64,
}

impl HoeffdingParams {
    pub fn new(n: usize, t: f64, range: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!(
                "correction t = {t} must be finite and >= 0"
            )));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::invalid(format!(
                "range {range} must be finite and > 0"
            )));
        }
        Ok(Self { n, t, range })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    fn exponent(&self) -> f64 {
        let scaled = self.t / self.range;
        2.0 * self.n as f64 * scaled * scaled
    }

    /// Bound on the probability of the given tail event. Both tails share the
    /// same expression.
    pub fn tail_probability(&self, tail: Tail) -> f64 {
        match tail {
            Tail::Upper | Tail::Lower => (-self.exponent()).exp(),
        }
    }

    /// `exp(-2 n t^2 / range^2)`: probability that `mean + t` fails to bound the true mean.
    pub fn failure_probability(&self) -> f64 {
        self.tail_probability(Tail::Lower)
    }

    /// `1 - failure_probability()`, computed without cancellation.
    pub fn confidence(&self) -> f64 {
        -(-self.exponent()).exp_m1()
    }
}

/// Smallest `t` whose failure probability is `1 - confidence`:
/// `t = range * sqrt(ln(1 / (1 - confidence)) / (2 n))`.
pub fn correction_for_confidence(n: usize, confidence: f64, range: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!(
            "confidence {confidence} not in (0, 1)"
        )));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid(format!(
            "range {range} must be finite and > 0"
        )));
    }
    // ln(1 / (1 - c)) = -ln_1p(-c), accurate for c near 0 as well.
    let log_inverse_failure = -(-confidence).ln_1p();
    Ok(range * (log_inverse_failure / (2.0 * n as f64)).sqrt())
}

/// `empirical_mean + t`. Deliberately not clamped to the score range.
pub fn mean_upper_bound(empirical_mean: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0, "negative Hoeffding correction {t}");
    empirical_mean + t
}
