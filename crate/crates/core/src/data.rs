//! Labeled probability datasets and the `probset-csv v1` ingest format.
//!
//! ```text
//! p0,p1,...,p{K-1},label
//! # classes: name0,name1,...        (optional)
//! 0.1,0.9,...,1
//! ```
//!
//! Probabilities are kept exactly as parsed. Rows must sum to one within
//! [`ROW_SUM_TOLERANCE`], which absorbs the rounding of 32-bit softmax
//! outputs written as decimal text.

use std::io::{self, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::sig9_trimmed;

/// Maximum allowed `|sum(probs) - 1|` for a record.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

const CLASSES_PREFIX: &str = "# classes:";

/// Per-class probabilities for one instance together with its true label.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRecord {
    probs: Vec<f64>,
    label: usize,
}

impl ProbabilityRecord {
    pub fn new(probs: Vec<f64>, label: usize) -> Result<Self> {
        validate_probs(&probs)?;
        if label >= probs.len() {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                probs.len()
            )));
        }
        Ok(Self { probs, label })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }
}

/// Checks the probability-vector invariants shared by records and bare
/// prediction inputs: non-empty, every entry in `[0, 1]`, sum within tolerance.
pub fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    if let Some((k, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::invalid(format!(
            "probability {p} for class {k} outside [0, 1]"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::invalid(format!(
            "row sum {} exceeds tolerance",
            sig9_trimmed(sum)
        )));
    }
    Ok(())
}

/// An ordered collection of records over a fixed number of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProbabilityDataset {
    records: Vec<ProbabilityRecord>,
    num_classes: usize,
    class_names: Option<Vec<String>>,
}

impl LabeledProbabilityDataset {
    pub fn new(
        records: Vec<ProbabilityRecord>,
        num_classes: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("a dataset needs at least one class"));
        }
        if let Some(names) = &class_names {
            if names.len() != num_classes {
                return Err(Error::invalid(format!(
                    "{} class names given for {num_classes} classes",
                    names.len()
                )));
            }
        }
        if let Some((i, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| r.num_classes() != num_classes)
        {
            return Err(Error::invalid(format!(
                "record {i} has {} classes, expected {num_classes}",
                r.num_classes()
            )));
        }
        Ok(Self {
            records,
            num_classes,
            class_names,
        })
    }

    pub fn records(&self) -> &[ProbabilityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Display name for class `k`; `class_<k>` when no names were supplied.
    pub fn class_name(&self, k: usize) -> String {
        match &self.class_names {
            Some(names) if k < names.len() => names[k].clone(),
            _ => format!("class_{k}"),
        }
    }

    /// A new dataset holding the records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            num_classes: self.num_classes,
            class_names: self.class_names.clone(),
        }
    }
}

/// Parses a `probset-csv v1` stream. `K` is taken from the header and record
/// order follows file order. Errors carry the 1-based line number.
pub fn parse_dataset<R: Read>(mut source: R) -> Result<LabeledProbabilityDataset> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::parse(0, format!("read failure: {e}")))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        Error::parse(line, "invalid UTF-8")
    })?;
    parse_dataset_str(&text)
}

pub fn parse_dataset_str(text: &str) -> Result<LabeledProbabilityDataset> {
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .peekable();

    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.trim().is_empty())
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let num_classes = parse_header(header)?;

    let mut class_names = None;
    if let Some((line_no, line)) = lines.peek().copied() {
        if let Some(rest) = line.trim_start().strip_prefix(CLASSES_PREFIX) {
            let names: Vec<String> = rest.split(',').map(|s| s.trim().to_string()).collect();
            if names.len() != num_classes || names.iter().any(String::is_empty) {
                return Err(Error::parse(
                    line_no,
                    format!("expected {num_classes} class names"),
                ));
            }
            class_names = Some(names);
            lines.next();
        }
    }

    let mut records = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_row(line, num_classes).map_err(|m| Error::parse(line_no, m))?);
    }
    LabeledProbabilityDataset::new(records, num_classes, class_names)
}

fn parse_header(header: &str) -> Result<usize> {
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let malformed = || Error::parse(1, "malformed header (expected p0,...,p{K-1},label)");
    let (last, probs) = columns.split_last().ok_or_else(malformed)?;
    if *last != "label" || probs.is_empty() {
        return Err(malformed());
    }
    for (k, column) in probs.iter().enumerate() {
        if *column != format!("p{k}") {
            return Err(malformed());
        }
    }
    Ok(probs.len())
}

fn parse_row(line: &str, num_classes: usize) -> std::result::Result<ProbabilityRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != num_classes + 1 {
        return Err(format!(
            "expected {} columns, found {}",
            num_classes + 1,
            fields.len()
        ));
    }
    let mut probs = Vec::with_capacity(num_classes);
    for (k, field) in fields[..num_classes].iter().enumerate() {
        let p: f64 = field
            .parse()
            .map_err(|_| format!("invalid probability `{field}` in column p{k}"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability {field} in column p{k} outside [0, 1]"));
        }
        probs.push(p);
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(format!("row sum {} exceeds tolerance", sig9_trimmed(sum)));
    }
    let raw_label = fields[num_classes];
    let label: usize = raw_label
        .parse()
        .map_err(|_| format!("invalid label `{raw_label}`"))?;
    if label >= num_classes {
        return Err(format!(
            "label {label} out of range for {num_classes} classes"
        ));
    }
    Ok(ProbabilityRecord { probs, label })
}

/// Writes `data` as `probset-csv v1` with LF line endings and probabilities at
/// nine significant digits.
pub fn write_dataset<W: Write>(data: &LabeledProbabilityDataset, mut out: W) -> io::Result<()> {
    let header: Vec<String> = (0..data.num_classes).map(|k| format!("p{k}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    if let Some(names) = &data.class_names {
        writeln!(out, "{CLASSES_PREFIX} {}", names.join(","))?;
    }
    let mut row = String::new();
    for record in &data.records {
        row.clear();
        for p in &record.probs {
            row.push_str(&sig9_trimmed(*p));
            row.push(',');
        }
        row.push_str(&record.label.to_string());
        writeln!(out, "{row}")?;
    }
    out.flush()
}

/// How to partition a dataset into calibration and test parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    calibration_fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(calibration_fraction: f64, seed: u64) -> Result<Self> {
        if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "calibration fraction {calibration_fraction} not in (0, 1)"
            )));
        }
        Ok(Self {
            calibration_fraction,
            seed,
        })
    }

    pub fn calibration_fraction(&self) -> f64 {
        self.calibration_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of calibration records for a dataset of `total` records.
    pub fn calibration_size(&self, total: usize) -> usize {
        (self.calibration_fraction * total as f64).round() as usize
    }
}

/// Row indices of a seeded random partition, each side in ascending order.
///
/// Indices are shuffled with a Fisher-Yates pass driven by ChaCha8 seeded from
/// `spec.seed()`; the first `round(fraction * total)` go to calibration.
pub fn split_indices(total: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let calibration_size = spec.calibration_size(total);
    if calibration_size == 0 || calibration_size >= total {
        return Err(Error::EmptySplit {
            fraction: spec.calibration_fraction,
            total,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut indices: Vec<usize> = (0..total).collect();
    indices.shuffle(&mut rng);
    let mut test = indices.split_off(calibration_size);
    indices.sort_unstable();
    test.sort_unstable();
    Ok((indices, test))
}

/// Splits `data` into `(calibration, test)`. Both sides keep file order.
pub fn split_dataset(
    data: &LabeledProbabilityDataset,
    spec: &SplitSpec,
) -> Result<(LabeledProbabilityDataset, LabeledProbabilityDataset)> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let (calibration, test) = split_indices(data.len(), spec)?;
    Ok((data.select(&calibration), data.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LabeledProbabilityDataset> {
        parse_dataset(text.as_bytes())
    }

    fn parse_err(text: &str) -> (usize, String) {
        match parse(text).unwrap_err() {
            Error::Parse { line, message } => (line, message),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn minimal_file() {
        let data = parse("p0,p1,label\n0.25,0.75,1\n").unwrap();
        assert_eq!(data.num_classes(), 2);
        assert_eq!(data.len(), 1);
        assert_eq!(data.records()[0].label(), 1);
        assert_eq!(data.records()[0].probs(), &[0.25, 0.75]);
        assert_eq!(data.class_name(1), "class_1");
    }

    #[test]
    fn row_sum_error_names_line() {
        let err = parse("p0,p1,label\n0.6,0.6,0\n").unwrap_err();
        assert_eq!(err.to_string(), "row sum 1.2 exceeds tolerance at line 2");
    }

    #[test]
    fn crlf_and_class_names() {
        let data = parse("p0,p1,p2,label\r\n# classes: cat,dog,bird\r\n0.2,0.3,0.5,2\r\n").unwrap();
        assert_eq!(data.num_classes(), 3);
        assert_eq!(data.class_name(0), "cat");
        assert_eq!(data.class_names().unwrap().len(), 3);
        assert_eq!(data.records()[0].label(), 2);
    }

    #[test]
    fn malformed_header() {
        assert_eq!(parse_err("").0, 1);
        assert_eq!(parse_err("p0,p2,label\n").0, 1);
        assert_eq!(parse_err("p0,p1\n").0, 1);
        assert_eq!(parse_err("label\n").0, 1);
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let header = "p0,p1,label\n0.5,0.5,0\n";
        assert_eq!(parse_err(&format!("{header}0.5,0.5\n")).0, 3);
        assert_eq!(parse_err(&format!("{header}1.5,-0.5,0\n")).0, 3);
        assert_eq!(parse_err(&format!("{header}0.5,0.5,2\n")).0, 3);
        assert_eq!(parse_err(&format!("{header}0.5,abc,1\n")).0, 3);
        assert_eq!(parse_err(&format!("{header}0.5,0.5,-1\n")).0, 3);
        assert_eq!(parse_err(&format!("{header}NaN,0.5,0\n")).0, 3);
        let with_names = "p0,p1,label\n# classes: a,b\n0.5,0.5,0\n0.7,0.7,1\n";
        assert_eq!(parse_err(with_names).0, 4);
    }

    #[test]
    fn wrong_class_name_count() {
        assert_eq!(parse_err("p0,p1,label\n# classes: a,b,c\n0.5,0.5,0\n").0, 2);
    }

    #[test]
    fn tolerance_accepts_float32_rounding() {
        let data = parse("p0,p1,label\n0.33335,0.66670,0\n").unwrap();
        assert_eq!(data.len(), 1);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let data = parse("p0,p1,label\n").unwrap();
        assert!(data.is_empty());
    }

    #[test]
    fn duplicates_allowed() {
        let data = parse("p0,p1,label\n0.5,0.5,0\n0.5,0.5,0\n").unwrap();
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn write_then_parse() {
        let text = "p0,p1,p2,label\n# classes: a,b,c\n0.2,0.3,0.5,2\n1,0,0,0\n";
        let data = parse(text).unwrap();
        let mut out = Vec::new();
        write_dataset(&data, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn record_constructor_validates() {
        assert!(ProbabilityRecord::new(vec![0.5, 0.5], 1).is_ok());
        assert!(ProbabilityRecord::new(vec![0.5, 0.5], 2).is_err());
        assert!(ProbabilityRecord::new(vec![0.9, 0.9], 0).is_err());
        assert!(ProbabilityRecord::new(vec![], 0).is_err());
    }

    fn dataset(n: usize) -> LabeledProbabilityDataset {
        let records = (0..n)
            .map(|i| {
                let p = (i % 101) as f64 / 100.0;
                ProbabilityRecord::new(vec![p, 1.0 - p], i % 2).unwrap()
            })
            .collect();
        LabeledProbabilityDataset::new(records, 2, None).unwrap()
    }

    #[test]
    fn split_two_records() {
        let data = dataset(2);
        let (cal, test) = split_dataset(&data, &SplitSpec::new(0.5, 7).unwrap()).unwrap();
        assert_eq!((cal.len(), test.len()), (1, 1));
    }

    #[test]
    fn split_equal_halves() {
        let (cal, test) = split_indices(10_000, &SplitSpec::new(0.5, 2025).unwrap()).unwrap();
        assert_eq!(cal.len(), 5_000);
        assert_eq!(test.len(), 5_000);
        let mut all: Vec<usize> = cal.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10_000).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_empty_side() {
        let data = dataset(2);
        let err = split_dataset(&data, &SplitSpec::new(0.999, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::EmptySplit { .. }));
        assert!(split_dataset(&data, &SplitSpec::new(0.1, 1).unwrap()).is_err());
        assert!(SplitSpec::new(0.0, 1).is_err());
        assert!(SplitSpec::new(1.0, 1).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let spec = SplitSpec::new(0.5, 11).unwrap();
        assert_eq!(
            split_indices(500, &spec).unwrap(),
            split_indices(500, &spec).unwrap()
        );
        let other = SplitSpec::new(0.5, 12).unwrap();
        assert_ne!(
            split_indices(500, &spec).unwrap(),
            split_indices(500, &other).unwrap()
        );
    }
}
