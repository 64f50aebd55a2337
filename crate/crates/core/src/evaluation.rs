//! Coverage and set-size statistics over a labeled test split.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::conformal::CalibrationSummary;
use crate::data::LabeledProbabilityDataset;
use crate::error::{Error, Result};
use crate::format::sig9;

const KV_PREFIX: &str = "#kv ";

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    num_instances: usize,
    num_classes: usize,
    covered: usize,
    /// `size_histogram[s]` = number of instances whose set has `s` labels, `s` in `0..=K`.
    size_histogram: Vec<usize>,
    alpha_tilde: f64,
    threshold: f64,
}

impl EvaluationReport {
    /// Assembles a report from raw counts, checking that they are consistent.
    pub fn from_counts(
        covered: usize,
        size_histogram: Vec<usize>,
        alpha_tilde: f64,
        threshold: f64,
    ) -> Result<Self> {
        if size_histogram.len() < 2 {
            return Err(Error::invalid(
                "histogram needs buckets for sizes 0..=K with K >= 1",
            ));
        }
        let num_instances: usize = size_histogram.iter().sum();
        if num_instances == 0 {
            return Err(Error::Empty("test set"));
        }
        if covered > num_instances - size_histogram[0] {
            return Err(Error::invalid(format!(
                "{covered} covered instances but only {} non-empty sets",
                num_instances - size_histogram[0]
            )));
        }
        Ok(Self {
            num_instances,
            num_classes: size_histogram.len() - 1,
            covered,
            size_histogram,
            alpha_tilde,
            threshold,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.num_instances
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Instances whose prediction set contains the true label.
    pub fn covered(&self) -> usize {
        self.covered
    }

    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.num_instances as f64
    }

    pub fn size_histogram(&self) -> &[usize] {
        &self.size_histogram
    }

    pub fn total_set_size(&self) -> usize {
        self.size_histogram
            .iter()
            .enumerate()
            .map(|(size, count)| size * count)
            .sum()
    }

    pub fn mean_set_size(&self) -> f64 {
        self.total_set_size() as f64 / self.num_instances as f64
    }

    /// Largest set size with a non-zero count.
    pub fn max_observed_size(&self) -> usize {
        self.size_histogram
            .iter()
            .rposition(|&c| c > 0)
            .unwrap_or(0)
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_tilde
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Predicts a set for every test record with [`CalibrationSummary::predict_set`]
/// and tallies coverage and set sizes. Empty sets count as misses.
pub fn evaluate(
    test: &LabeledProbabilityDataset,
    summary: &CalibrationSummary,
    alpha_tilde: f64,
) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let threshold = summary.threshold(alpha_tilde)?;
    let outcomes = test
        .records()
        .par_iter()
        .map(|record| {
            let set = summary.predict_set(record.probs(), alpha_tilde)?;
            Ok((set.len(), set.contains(record.label())))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut histogram = vec![0usize; test.num_classes() + 1];
    let mut covered = 0;
    for (size, hit) in outcomes {
        histogram[size] += 1;
        covered += usize::from(hit);
    }
    EvaluationReport::from_counts(covered, histogram, alpha_tilde, threshold)
}

/// Human-readable set-size table followed by `#kv key=value` lines.
///
/// The table lists sizes `0..=max observed`; the `#kv` block lists every
/// bucket up to `K` so the report can be parsed back with [`parse_report_kv`].
pub fn render_report(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Label set size distribution");
    let _ = writeln!(out, "alpha_tilde    {}", sig9(report.alpha_tilde));
    let _ = writeln!(out, "threshold      {}", sig9(report.threshold));
    let _ = writeln!(out, "instances      {}", report.num_instances);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>8} | {:>10}", "set size", "count");
    let _ = writeln!(out, "{:-<8}-+-{:-<10}", "", "");
    for (size, count) in report.size_histogram[..=report.max_observed_size()]
        .iter()
        .enumerate()
    {
        let _ = writeln!(out, "{size:>8} | {count:>10}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "coverage       {}", sig9(report.coverage()));
    let _ = writeln!(out, "mean set size  {}", sig9(report.mean_set_size()));

    let mut kv = |key: &str, value: String| {
        let _ = writeln!(out, "{KV_PREFIX}{key}={value}");
    };
    kv("num_instances", report.num_instances.to_string());
    kv("num_classes", report.num_classes.to_string());
    kv("alpha_tilde", sig9(report.alpha_tilde));
    kv("threshold", sig9(report.threshold));
    kv("covered", report.covered.to_string());
    kv("coverage", sig9(report.coverage()));
    kv("mean_set_size", sig9(report.mean_set_size()));
    for (size, count) in report.size_histogram.iter().enumerate() {
        kv(&format!("size_{size}"), count.to_string());
    }
    out
}

/// Rebuilds a report from the `#kv` lines of [`render_report`] output; other
/// lines are ignored. Derived values (`coverage`, `mean_set_size`) are
/// recomputed from the counts and checked against the printed ones.
pub fn parse_report_kv(text: &str) -> Result<EvaluationReport> {
    let mut num_instances = None;
    let mut num_classes = None;
    let mut alpha_tilde = None;
    let mut threshold = None;
    let mut covered = None;
    let mut coverage = None;
    let mut mean_set_size = None;
    let mut buckets: Vec<(usize, usize)> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let Some(body) = line.strip_prefix(KV_PREFIX) else {
            continue;
        };
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, "expected `#kv key=value`"))?;
        let int = || {
            value.parse::<usize>().map_err(|_| {
                Error::parse(line_no, format!("invalid integer `{value}` for `{key}`"))
            })
        };
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("invalid number `{value}` for `{key}`")))
        };
        match key {
            "num_instances" => num_instances = Some(int()?),
            "num_classes" => num_classes = Some(int()?),
            "alpha_tilde" => alpha_tilde = Some(float()?),
            "threshold" => threshold = Some(float()?),
            "covered" => covered = Some(int()?),
            "coverage" => coverage = Some((line_no, float()?)),
            "mean_set_size" => mean_set_size = Some((line_no, float()?)),
            _ => match key
                .strip_prefix("size_")
                .and_then(|s| s.parse::<usize>().ok())
            {
                Some(size) => buckets.push((size, int()?)),
                None => return Err(Error::parse(line_no, format!("unknown key `{key}`"))),
            },
        }
    }

    let last = text.lines().count().max(1);
    let missing = |key: &str| Error::parse(last, format!("missing `#kv {key}`"));
    let num_classes = num_classes.ok_or_else(|| missing("num_classes"))?;
    let mut histogram = vec![None; num_classes + 1];
    for (size, count) in buckets {
        let slot = histogram
            .get_mut(size)
            .ok_or_else(|| Error::parse(last, format!("bucket size_{size} exceeds num_classes")))?;
        *slot = Some(count);
    }
    let histogram = histogram
        .into_iter()
        .enumerate()
        .map(|(size, c)| c.ok_or_else(|| missing(&format!("size_{size}"))))
        .collect::<Result<Vec<_>>>()?;

    let report = EvaluationReport::from_counts(
        covered.ok_or_else(|| missing("covered"))?,
        histogram,
        alpha_tilde.ok_or_else(|| missing("alpha_tilde"))?,
        threshold.ok_or_else(|| missing("threshold"))?,
    )?;
    if num_instances.ok_or_else(|| missing("num_instances"))? != report.num_instances {
        return Err(Error::parse(
            last,
            "num_instances disagrees with histogram total",
        ));
    }
    for (printed, derived, name) in [
        (coverage, report.coverage(), "coverage"),
        (mean_set_size, report.mean_set_size(), "mean_set_size"),
    ] {
        let (line, value) = printed.ok_or_else(|| missing(name))?;
        if sig9(value) != sig9(derived) {
            return Err(Error::parse(line, format!("{name} disagrees with counts")));
        }
    }
    Ok(report)
}
