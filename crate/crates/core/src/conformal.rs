//! Calibrate once, predict many times.
//!
//! A [`CalibrationSummary`] holds everything a prediction needs: calibration
//! size, empirical mean score, Hoeffding correction and score bounds. The
//! inclusion cutoff for level `alpha_tilde` is `(mean + t) / alpha_tilde`;
//! labels whose score is at most the cutoff form the prediction set.
//!
//! The summary does not remember `K`. Callers must feed probability vectors
//! of the width the calibration data had.

use std::fmt::Write as _;

use crate::data::{validate_probs, LabeledProbabilityDataset};
use crate::error::{Error, Result};
use crate::hoeffding::{mean_upper_bound, HoeffdingParams};
use crate::nonconformity::{
    empirical_mean, score_true, NonconformityMeasure, OneMinusProbability, ScoreBounds,
};

/// Version written to and required from summary files.
pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// Tolerance when checking a persisted `reuse_confidence` against `n`, `t`, `a`, `b`.
const CONFIDENCE_CHECK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSummary {
    n: usize,
    empirical_mean: f64,
    t: f64,
    bounds: ScoreBounds,
    reuse_confidence: f64,
}

/// Builds a summary from calibration scores. Every score must lie in `bounds`.
pub fn calibrate(scores: &[f64], t: f64, bounds: ScoreBounds) -> Result<CalibrationSummary> {
    if scores.is_empty() {
        return Err(Error::Empty("calibration scores"));
    }
    bounds.check_all(scores)?;
    let mean = empirical_mean(scores)?;
    CalibrationSummary::from_parts(scores.len(), mean, t, bounds)
}

impl CalibrationSummary {
    /// Assembles a summary, deriving the reuse confidence from `n`, `t` and the bounds.
    pub fn from_parts(n: usize, empirical_mean: f64, t: f64, bounds: ScoreBounds) -> Result<Self> {
        let params = HoeffdingParams::new(n, t, bounds.range())?;
        if !bounds.contains(empirical_mean) {
            return Err(Error::invalid(format!(
                "empirical mean {empirical_mean} outside [{}, {}]",
                bounds.lower(),
                bounds.upper()
            )));
        }
        Ok(Self {
            n,
            empirical_mean,
            t,
            bounds,
            reuse_confidence: params.confidence(),
        })
    }

    /// Scores the true labels of `data` with `1 - p` and calibrates on them.
    pub fn from_dataset(data: &LabeledProbabilityDataset, t: f64) -> Result<Self> {
        let scores: Vec<f64> = data.records().iter().map(score_true).collect();
        calibrate(&scores, t, OneMinusProbability.bounds())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn empirical_mean(&self) -> f64 {
        self.empirical_mean
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn bounds(&self) -> ScoreBounds {
        self.bounds
    }

    /// Probability that `mean + t` upper-bounds the true mean score.
    pub fn reuse_confidence(&self) -> f64 {
        self.reuse_confidence
    }

    pub fn hoeffding(&self) -> HoeffdingParams {
        HoeffdingParams::new(self.n, self.t, self.bounds.range())
            .expect("summary invariants guarantee valid Hoeffding parameters")
    }

    /// `mean + t`, the bound on the expected score.
    pub fn mean_upper_bound(&self) -> f64 {
        mean_upper_bound(self.empirical_mean, self.t)
    }

    /// Inclusion cutoff `(mean + t) / alpha_tilde`. Not clamped: a cutoff at
    /// or above the upper score bound admits every label.
    pub fn threshold(&self, alpha_tilde: f64) -> Result<f64> {
        check_alpha(alpha_tilde)?;
        Ok(self.mean_upper_bound() / alpha_tilde)
    }

    /// Prediction set for class probabilities `probs` under `1 - p`.
    pub fn predict_set(&self, probs: &[f64], alpha_tilde: f64) -> Result<PredictionSet> {
        validate_probs(probs)?;
        self.predict_from_scores(&OneMinusProbability.score_all(probs), alpha_tilde)
    }

    /// Prediction set from precomputed per-label scores; label `k` is kept
    /// when `scores[k] <= threshold`.
    pub fn predict_from_scores(&self, scores: &[f64], alpha_tilde: f64) -> Result<PredictionSet> {
        let threshold = self.threshold(alpha_tilde)?;
        let labels = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= threshold)
            .map(|(k, _)| k)
            .collect();
        Ok(PredictionSet {
            labels,
            threshold,
            alpha_tilde,
        })
    }

    /// Serializes to the `key = value` summary file format.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format_version = {SUMMARY_FORMAT_VERSION}");
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "empirical_mean = {}", self.empirical_mean);
        let _ = writeln!(out, "t = {}", self.t);
        let _ = writeln!(out, "a = {}", self.bounds.lower());
        let _ = writeln!(out, "b = {}", self.bounds.upper());
        let _ = writeln!(out, "reuse_confidence = {}", self.reuse_confidence);
        out
    }

    /// Parses a summary file. Blank lines and `#` comments are ignored; every
    /// key must appear exactly once and `reuse_confidence` must agree with the
    /// other fields.
    pub fn from_kv(text: &str) -> Result<Self> {
        const KEYS: [&str; 7] = [
            "format_version",
            "n",
            "empirical_mean",
            "t",
            "a",
            "b",
            "reuse_confidence",
        ];
        let mut values: [Option<(usize, &str)>; 7] = [None; 7];
        let mut last_line = 1;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::parse(line_no, format!("unknown key `{key}`")))?;
            if values[slot].is_some() {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
            values[slot] = Some((line_no, value.trim()));
        }

        let field = |slot: usize| -> Result<(usize, &str)> {
            values[slot]
                .ok_or_else(|| Error::parse(last_line, format!("missing key `{}`", KEYS[slot])))
        };
        let float = |slot: usize| -> Result<f64> {
            let (line, v) = field(slot)?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    Error::parse(line, format!("invalid number `{v}` for `{}`", KEYS[slot]))
                })
        };

        let (version_line, version) = field(0)?;
        if version != SUMMARY_FORMAT_VERSION.to_string() {
            return Err(Error::parse(
                version_line,
                format!("unsupported format_version `{version}`"),
            ));
        }
        let (n_line, n_raw) = field(1)?;
        let n: usize = n_raw
            .parse()
            .map_err(|_| Error::parse(n_line, format!("invalid n `{n_raw}`")))?;
        let mean = float(2)?;
        let t = float(3)?;
        let bounds = ScoreBounds::new(float(4)?, float(5)?)?;
        let stored_confidence = float(6)?;

        let summary = Self::from_parts(n, mean, t, bounds)?;
        if (summary.reuse_confidence - stored_confidence).abs() > CONFIDENCE_CHECK_TOLERANCE {
            return Err(Error::parse(
                field(6)?.0,
                format!(
                    "reuse_confidence {stored_confidence} inconsistent with n, t, a, b (expected {})",
                    summary.reuse_confidence
                ),
            ));
        }
        Ok(summary)
    }
}

fn check_alpha(alpha_tilde: f64) -> Result<()> {
    if alpha_tilde > 0.0 && alpha_tilde < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "alpha_tilde {alpha_tilde} not in (0, 1)"
        )))
    }
}

/// Labels retained for one instance, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    labels: Vec<usize>,
    threshold: f64,
    alpha_tilde: f64,
}

impl PredictionSet {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    pub fn threshold_used(&self) -> f64 {
        self.threshold
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_tilde
    }

    pub fn is_subset_of(&self, other: &PredictionSet) -> bool {
        self.labels.iter().all(|k| other.contains(*k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(mean: f64, t: f64) -> CalibrationSummary {
        CalibrationSummary::from_parts(5000, mean, t, ScoreBounds::unit()).unwrap()
    }

    #[test]
    fn threshold_values() {
        let s = summary(0.15795493, 0.02);
        assert!((s.threshold(0.2).unwrap() - 0.88977465).abs() < 1e-12);
        assert_eq!(summary(0.0, 0.0).threshold(0.3).unwrap(), 0.0);
        assert!((summary(0.3, 0.02).threshold(0.1).unwrap() - 3.2).abs() < 1e-12);
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(s.threshold(bad).is_err());
        }
    }

    #[test]
    fn calibrate_single_score() {
        let s = calibrate(&[0.5], 0.0, ScoreBounds::unit()).unwrap();
        assert_eq!(s.n(), 1);
        assert_eq!(s.empirical_mean(), 0.5);
        assert_eq!(s.reuse_confidence(), 0.0);
    }

    #[test]
    fn calibrate_errors() {
        assert_eq!(
            calibrate(&[], 0.02, ScoreBounds::unit()),
            Err(Error::Empty("calibration scores"))
        );
        assert!(matches!(
            calibrate(&[0.2, 1.2], 0.02, ScoreBounds::unit()),
            Err(Error::ScoreOutOfBounds { index: 1, .. })
        ));
        assert!(calibrate(&[0.2], -0.01, ScoreBounds::unit()).is_err());
    }

    #[test]
    fn reuse_confidence_matches_hoeffding() {
        let s = calibrate(&vec![0.1; 5000], 0.02, ScoreBounds::unit()).unwrap();
        assert!((s.reuse_confidence() - (1.0 - (-4.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let s = summary(0.15795493, 0.02);
        let set = s.predict_set(&[0.05, 0.95], 0.2).unwrap();
        assert_eq!(set.labels(), &[1]);
        assert!((set.threshold_used() - 0.88977465).abs() < 1e-12);
        assert_eq!(set.alpha_tilde(), 0.2);

        let uniform = s.predict_set(&[0.1; 10], 0.2).unwrap();
        assert!(uniform.is_empty());
    }

    #[test]
    fn saturated_threshold_admits_all() {
        let s = summary(0.3, 0.02);
        let set = s.predict_set(&[1.0, 0.0, 0.0], 0.1).unwrap();
        assert_eq!(set.labels(), &[0, 1, 2]);
    }

    #[test]
    fn score_at_threshold_is_included() {
        // mean + t = 0.25, alpha 0.5 -> cutoff 0.5 exactly.
        let s = summary(0.25, 0.0);
        let set = s.predict_set(&[0.5, 0.5], 0.5).unwrap();
        assert_eq!(set.labels(), &[0, 1]);
    }

    #[test]
    fn invalid_probs_rejected() {
        let s = summary(0.2, 0.02);
        assert!(s.predict_set(&[0.7, 0.7], 0.2).is_err());
        assert!(s.predict_set(&[], 0.2).is_err());
    }

    #[test]
    fn kv_round_trip_is_exact() {
        let s = calibrate(&[0.1, 0.2, 0.35, 0.015], 0.0173, ScoreBounds::unit()).unwrap();
        let text = s.to_kv();
        assert!(text.starts_with("format_version = 1\n"));
        assert_eq!(CalibrationSummary::from_kv(&text).unwrap(), s);
    }

    #[test]
    fn kv_rejects_bad_files() {
        let good = summary(0.15795493, 0.02).to_kv();
        let missing = good.replace("t = 0.02\n", "");
        assert!(matches!(
            CalibrationSummary::from_kv(&missing),
            Err(Error::Parse { .. })
        ));
        let version = good.replace("format_version = 1", "format_version = 2");
        assert!(matches!(
            CalibrationSummary::from_kv(&version),
            Err(Error::Parse { line: 1, .. })
        ));
        let tampered = good.replace("t = 0.02", "t = 0.03");
        assert!(matches!(
            CalibrationSummary::from_kv(&tampered),
            Err(Error::Parse { line: 7, .. })
        ));
        let extra = format!("{good}bogus = 1\n");
        assert!(CalibrationSummary::from_kv(&extra).is_err());
        let dup = format!("{good}n = 5000\n");
        assert!(CalibrationSummary::from_kv(&dup).is_err());
        let commented = format!("# reusable calibration\n\n{good}");
        assert!(CalibrationSummary::from_kv(&commented).is_ok());
    }
}
