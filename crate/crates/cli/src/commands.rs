use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use econformal::format::sig9;
use econformal::{
    correction_for_confidence, parse_dataset, render_report, run_simulation, split_dataset,
    write_dataset, CalibrationSummary, HoeffdingParams, LabeledProbabilityDataset,
    ScoreDistribution, SimulationConfig, SplitSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        source: econformal::Error,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn data_err(context: impl Into<String>) -> impl FnOnce(econformal::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Data { context, source }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_dataset(path: &Path) -> Result<LabeledProbabilityDataset, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_dataset(bytes.as_slice()).map_err(data_err(path.display().to_string()))
}

fn read_summary(path: &Path) -> Result<CalibrationSummary, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    CalibrationSummary::from_kv(&text).map_err(data_err(path.display().to_string()))
}

/// Writes `body` to `path`, or stdout when no path is given.
fn emit(
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            let mut out = BufWriter::new(file);
            body(&mut out)
                .and_then(|_| out.flush())
                .map_err(io_err(path))
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            match body(&mut out) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => other.map_err(io_err(Path::new("<stdout>"))),
            }
        }
    }
}

pub fn split(
    input: &Path,
    fraction: f64,
    seed: u64,
    out_calib: &Path,
    out_test: &Path,
) -> Result<(), CliError> {
    let data = read_dataset(input)?;
    let spec = SplitSpec::new(fraction, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let (calibration, test) = split_dataset(&data, &spec).map_err(data_err("split"))?;
    emit(Some(out_calib), |w| write_dataset(&calibration, w))?;
    emit(Some(out_test), |w| write_dataset(&test, w))?;
    println!("calibration = {}", calibration.len());
    println!("test = {}", test.len());
    Ok(())
}

pub fn calibrate(
    calib: &Path,
    t: Option<f64>,
    confidence: Option<f64>,
    out_summary: &Path,
) -> Result<(), CliError> {
    let data = read_dataset(calib)?;
    if data.is_empty() {
        return Err(CliError::Data {
            context: calib.display().to_string(),
            source: econformal::Error::Empty("calibration set"),
        });
    }
    let t = match (t, confidence) {
        (Some(t), None) => t,
        (None, Some(c)) => {
            correction_for_confidence(data.len(), c, 1.0).map_err(data_err("--confidence"))?
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --t and --confidence is required".into(),
            ))
        }
    };
    let summary = CalibrationSummary::from_dataset(&data, t).map_err(data_err("calibrate"))?;
    let kv = summary.to_kv();
    emit(Some(out_summary), |w| w.write_all(kv.as_bytes()))?;
    println!("n = {}", summary.n());
    println!("empirical_mean = {}", sig9(summary.empirical_mean()));
    println!("t = {}", sig9(summary.t()));
    println!("reuse_confidence = {}", sig9(summary.reuse_confidence()));
    Ok(())
}

pub fn predict(
    input: &Path,
    summary: &Path,
    alpha_tilde: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = read_dataset(input)?;
    let summary = read_summary(summary)?;
    let threshold = summary
        .threshold(alpha_tilde)
        .map_err(data_err("--alpha-tilde"))?;
    let sets = data
        .records()
        .iter()
        .map(|r| summary.predict_set(r.probs(), alpha_tilde))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data_err("predict"))?;
    let threshold_text = sig9(threshold);
    emit(out, |w| {
        writeln!(w, "# alpha_tilde = {}", sig9(alpha_tilde))?;
        writeln!(w, "# threshold = {threshold_text}")?;
        writeln!(w, "index,threshold,set_size,labels")?;
        for (i, set) in sets.iter().enumerate() {
            let labels: Vec<String> = set.labels().iter().map(usize::to_string).collect();
            writeln!(w, "{i},{threshold_text},{},{}", set.len(), labels.join(";"))?;
        }
        Ok(())
    })
}

pub fn evaluate(
    input: &Path,
    summary: &Path,
    alpha_tilde: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = read_dataset(input)?;
    let summary = read_summary(summary)?;
    let report =
        econformal::evaluate(&data, &summary, alpha_tilde).map_err(data_err("evaluate"))?;
    let text = render_report(&report);
    emit(out, |w| w.write_all(text.as_bytes()))
}

pub fn hoeffding(
    n: usize,
    t: Option<f64>,
    confidence: Option<f64>,
    range: f64,
) -> Result<(), CliError> {
    let t = match (t, confidence) {
        (Some(t), None) => t,
        (None, Some(c)) => {
            correction_for_confidence(n, c, range).map_err(data_err("--confidence"))?
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --t and --confidence is required".into(),
            ))
        }
    };
    let params = HoeffdingParams::new(n, t, range).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("n = {n}");
    println!("t = {}", sig9(t));
    println!("range = {}", sig9(range));
    println!(
        "failure_probability = {}",
        sig9(params.failure_probability())
    );
    println!("confidence = {}", sig9(params.confidence()));
    Ok(())
}

pub fn simulate(
    n: usize,
    t: f64,
    alpha_tilde: f64,
    trials: usize,
    dist: &str,
    seed: u64,
) -> Result<(), CliError> {
    let distribution: ScoreDistribution = dist
        .parse()
        .map_err(|e: econformal::Error| CliError::Usage(e.to_string()))?;
    let config = SimulationConfig {
        n,
        t,
        alpha_tilde,
        num_trials: trials,
        distribution,
        seed,
    };
    let result = run_simulation(&config).map_err(data_err("simulate"))?;
    println!("#kv n={n}");
    println!("#kv t={}", sig9(t));
    println!("#kv distribution={distribution}");
    println!("#kv seed={seed}");
    print!("{}", result.to_kv());
    Ok(())
}
