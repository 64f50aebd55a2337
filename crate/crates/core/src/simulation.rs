//! Monte Carlo checks of the two probabilistic claims behind calibration reuse.
//!
//! Each trial draws `n` i.i.d. calibration scores from a distribution with a
//! known mean, calibrates, and draws one fresh score. Three events are
//! counted:
//!
//! * reuse failure: `mean + t < mu`, bounded by `exp(-2 n t^2)`;
//! * joint miscoverage: the fresh score lies strictly above the cutoff,
//!   bounded by `alpha_tilde + exp(-2 n t^2)`;
//! * conditional miscoverage: the same, among trials where reuse held.
//!
//! Trial `i` draws from ChaCha8 seeded with `seed` on stream `i`, so results do
//! not depend on thread count or scheduling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::conformal::calibrate;
use crate::data::{LabeledProbabilityDataset, ProbabilityRecord};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::hoeffding::HoeffdingParams;
use crate::nonconformity::ScoreBounds;

/// Score distribution on `[0, 1]` with a closed-form mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDistribution {
    Uniform01,
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// `first` with probability `p`, otherwise `second`.
    TwoPoint {
        p: f64,
        first: f64,
        second: f64,
    },
}

impl ScoreDistribution {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta({alpha},{beta}) needs positive finite shapes"
            )));
        }
        Ok(Self::Beta { alpha, beta })
    }

    pub fn two_point(p: f64, first: f64, second: f64) -> Result<Self> {
        let unit = 0.0..=1.0;
        if !(unit.contains(&p) && unit.contains(&first) && unit.contains(&second)) {
            return Err(Error::invalid(format!(
                "two-point({p},{first},{second}) needs p and both values in [0, 1]"
            )));
        }
        Ok(Self::TwoPoint { p, first, second })
    }

    /// The exact expectation `mu`.
    pub fn true_mean(&self) -> f64 {
        match *self {
            Self::Uniform01 => 0.5,
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::TwoPoint { p, first, second } => p * first + (1.0 - p) * second,
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            Self::Uniform01 => Sampler::Uniform,
            Self::Beta { alpha, beta } => {
                Sampler::Beta(Beta::new(alpha, beta).expect("shapes validated on construction"))
            }
            Self::TwoPoint { p, first, second } => Sampler::TwoPoint { p, first, second },
        }
    }
}

/// Parses `uniform01`, `beta(a,b)` or `two-point(p,v1,v2)`.
impl FromStr for ScoreDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tag: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if tag == "uniform01" {
            return Ok(Self::Uniform01);
        }
        let unknown = || Error::UnknownDistribution(s.to_string());
        let (name, rest) = tag.split_once('(').ok_or_else(unknown)?;
        let args = rest.strip_suffix(')').ok_or_else(unknown)?;
        let params = args
            .split(',')
            .map(|a| a.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::invalid(format!("non-numeric parameter in `{s}`")))?;
        match (name, params.as_slice()) {
            ("beta", &[a, b]) => Self::beta(a, b),
            ("two-point", &[p, v1, v2]) => Self::two_point(p, v1, v2),
            ("beta" | "two-point", _) => {
                Err(Error::invalid(format!("wrong parameter count in `{s}`")))
            }
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for ScoreDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform01 => write!(f, "uniform01"),
            Self::Beta { alpha, beta } => write!(f, "beta({alpha},{beta})"),
            Self::TwoPoint { p, first, second } => write!(f, "two-point({p},{first},{second})"),
        }
    }
}

enum Sampler {
    Uniform,
    Beta(Beta<f64>),
    TwoPoint { p: f64, first: f64, second: f64 },
}

impl Sampler {
    #[inline]
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform => rng.random::<f64>(),
            Sampler::Beta(beta) => beta.sample(rng),
            Sampler::TwoPoint { p, first, second } => {
                if rng.random::<f64>() < *p {
                    *first
                } else {
                    *second
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub t: f64,
    pub alpha_tilde: f64,
    pub num_trials: usize,
    pub distribution: ScoreDistribution,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        HoeffdingParams::new(self.n, self.t, 1.0)?;
        if !(self.alpha_tilde > 0.0 && self.alpha_tilde < 1.0) {
            return Err(Error::invalid(format!(
                "alpha_tilde {} not in (0, 1)",
                self.alpha_tilde
            )));
        }
        if self.num_trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        Ok(())
    }
}

/// Event counts over all trials. Rates are exact ratios of these counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationResult {
    pub num_trials: usize,
    pub reuse_failures: usize,
    pub joint_miscoverages: usize,
    /// Miscoverages among trials where `mean + t >= mu`.
    pub conditional_miscoverages: usize,
    pub hoeffding_bound: f64,
    pub alpha_tilde: f64,
    pub true_mean: f64,
}

impl SimulationResult {
    pub fn reuse_held(&self) -> usize {
        self.num_trials - self.reuse_failures
    }

    pub fn reuse_failure_rate(&self) -> f64 {
        self.reuse_failures as f64 / self.num_trials as f64
    }

    pub fn joint_miscoverage_rate(&self) -> f64 {
        self.joint_miscoverages as f64 / self.num_trials as f64
    }

    /// `NaN` when reuse failed in every trial.
    pub fn conditional_miscoverage_rate(&self) -> f64 {
        self.conditional_miscoverages as f64 / self.reuse_held() as f64
    }

    pub fn to_kv(&self) -> String {
        [
            ("num_trials", self.num_trials.to_string()),
            ("true_mean", sig9(self.true_mean)),
            ("alpha_tilde", sig9(self.alpha_tilde)),
            ("hoeffding_bound", sig9(self.hoeffding_bound)),
            ("reuse_failures", self.reuse_failures.to_string()),
            ("reuse_failure_rate", sig9(self.reuse_failure_rate())),
            ("joint_miscoverages", self.joint_miscoverages.to_string()),
            (
                "joint_miscoverage_rate",
                sig9(self.joint_miscoverage_rate()),
            ),
            (
                "conditional_miscoverages",
                self.conditional_miscoverages.to_string(),
            ),
            (
                "conditional_miscoverage_rate",
                sig9(self.conditional_miscoverage_rate()),
            ),
        ]
        .iter()
        .map(|(k, v)| format!("#kv {k}={v}\n"))
        .collect()
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    reuse_failures: usize,
    joint_miscoverages: usize,
    conditional_miscoverages: usize,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            reuse_failures: self.reuse_failures + o.reuse_failures,
            joint_miscoverages: self.joint_miscoverages + o.joint_miscoverages,
            conditional_miscoverages: self.conditional_miscoverages + o.conditional_miscoverages,
        }
    }
}

/// Random generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `config.num_trials` independent trials on the current rayon pool.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let mu = config.distribution.true_mean();
    let sampler = config.distribution.sampler();
    let bounds = ScoreBounds::unit();

    let tally = (0..config.num_trials as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(config.n),
            |scores, trial| -> Result<Tally> {
                let mut rng = trial_rng(config.seed, trial);
                scores.clear();
                scores.extend((0..config.n).map(|_| sampler.sample(&mut rng)));
                let summary = calibrate(scores, config.t, bounds)?;
                let reuse_failed = summary.mean_upper_bound() < mu;
                let fresh = sampler.sample(&mut rng);
                let miscovered = fresh > summary.threshold(config.alpha_tilde)?;
                Ok(Tally {
                    reuse_failures: usize::from(reuse_failed),
                    joint_miscoverages: usize::from(miscovered),
                    conditional_miscoverages: usize::from(miscovered && !reuse_failed),
                })
            },
        )
        .try_reduce(Tally::default, |a, b| Ok(a + b))?;

    Ok(SimulationResult {
        num_trials: config.num_trials,
        reuse_failures: tally.reuse_failures,
        joint_miscoverages: tally.joint_miscoverages,
        conditional_miscoverages: tally.conditional_miscoverages,
        hoeffding_bound: HoeffdingParams::new(config.n, config.t, bounds.range())?
            .failure_probability(),
        alpha_tilde: config.alpha_tilde,
        true_mean: mu,
    })
}

/// A synthetic classifier output: softmax of Gaussian logits with standard
/// deviation `logit_scale`, true label drawn from the resulting probabilities
/// (so the synthetic model is perfectly calibrated).
pub fn synthetic_dataset(
    num_records: usize,
    num_classes: usize,
    logit_scale: f64,
    seed: u64,
) -> Result<LabeledProbabilityDataset> {
    if num_classes == 0 {
        return Err(Error::invalid("a dataset needs at least one class"));
    }
    if !(logit_scale >= 0.0 && logit_scale.is_finite()) {
        return Err(Error::invalid(format!(
            "logit scale {logit_scale} must be finite and >= 0"
        )));
    }
    let records = (0..num_records as u64)
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let logits: Vec<f64> = (0..num_classes)
                .map(|_| logit_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let label = probs
                .iter()
                .position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(num_classes - 1);
            ProbabilityRecord::new(probs, label)
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledProbabilityDataset::new(records, num_classes, None)
}
