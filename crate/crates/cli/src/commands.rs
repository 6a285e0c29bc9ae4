use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use decaylab_core::io::{self as docs, ExpansionFile, LoadedSpec};
use decaylab_core::numeric::{self, InitialCondition, Verdict, Verification, VerifyProtocol};
use decaylab_core::{Engine, Error, Expansion, ProblemSpec, Scalar};
use log::info;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot serialize output: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("verification failed for orders {0:?}")]
    VerificationFailed(Vec<usize>),
}

impl CliError {
    /// 2 bad input, 3 engine or integrator failure, 4 failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Read { .. } => 2,
            CliError::VerificationFailed(_) => 4,
            _ => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

/// Writes a document to `path`, or to stdout.
fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => write_file(path, text),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn load_spec(path: &Path, float: bool) -> CliResult<LoadedSpec> {
    let spec = docs::parse_spec(&read(path)?, float)?;
    match &spec {
        LoadedSpec::Exact(s) => s.validate()?,
        LoadedSpec::Float(s) => s.validate()?,
    };
    info!(
        "loaded {} spec ({} arithmetic)",
        spec.regime(),
        if spec.is_exact() { "rational" } else { "float" }
    );
    Ok(spec)
}

fn summarize<S: Scalar>(exp: &Expansion<S>) {
    for (k, t) in exp.terms.iter().enumerate() {
        eprintln!("  μ_{} = {}  ({} monomials)", k + 1, t.mu, t.q.len());
    }
    for note in exp.resonance_notes.iter().filter(|n| n.resonant) {
        eprintln!(
            "  resonant: term {}, eigenvalue {} (constant {:?})",
            note.k,
            note.j,
            note.source
        );
    }
}

fn expand_in<S: Scalar>(spec: ProblemSpec<S>, order: usize) -> Result<String, Error> {
    let exp = Engine::new(spec)?.expand(order)?;
    summarize(&exp);
    docs::expansion_to_json(&exp)
}

pub fn expand(spec_path: &Path, order: usize, output: Option<&Path>, float: bool) -> CliResult<()> {
    let spec = load_spec(spec_path, float)?;
    let text = match &spec {
        LoadedSpec::Exact(s) => match expand_in(s.clone(), order) {
            Err(Error::ExactUnavailable(why)) => {
                info!("falling back to float arithmetic: {why}");
                expand_in(s.to_f64(), order)
            }
            other => other,
        },
        LoadedSpec::Float(s) => expand_in(s.clone(), order),
    }?;
    emit(output, &text)
}

pub struct VerifyArgs {
    pub spec: PathBuf,
    pub expansion: PathBuf,
    pub output: Option<PathBuf>,
    pub float: bool,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
    pub margin: Option<f64>,
    pub trace: Option<PathBuf>,
    pub random_y0: Option<f64>,
    pub seed: u64,
    pub calibrate: bool,
}

fn verify_in<S: Scalar>(
    spec: &ProblemSpec<S>,
    doc: &ExpansionFile,
    protocol: &VerifyProtocol,
) -> Result<Verification, Error> {
    let exp = doc.to_expansion(spec)?;
    numeric::verify(spec, &exp, exp.order(), protocol)
}

pub fn verify(args: &VerifyArgs) -> CliResult<()> {
    let spec = load_spec(&args.spec, args.float)?;
    let doc = docs::parse_expansion_file(&read(&args.expansion)?)?;
    let mut protocol = VerifyProtocol::for_regime(spec.regime());
    if let Some(t) = args.t_max {
        protocol.t_max = t;
    }
    if let Some(n) = args.samples {
        protocol.samples = n;
    }
    if let Some(m) = args.margin {
        protocol.margin = m;
    }
    if let Some(amplitude) = args.random_y0 {
        protocol.initial = InitialCondition::Random {
            amplitude,
            seed: args.seed,
        };
    }
    protocol.calibrate = args.calibrate;
    let verification = match &spec {
        LoadedSpec::Exact(s) => match verify_in(s, &doc, &protocol) {
            // an expansion written in float arithmetic against a rational spec
            Err(Error::ExactUnavailable(_)) => verify_in(&s.to_f64(), &doc, &protocol),
            other => other,
        },
        LoadedSpec::Float(s) => verify_in(s, &doc, &protocol),
    }?;
    let report = &verification.report;
    for r in &report.records {
        let slope = r.fitted_slope.map_or("-".to_string(), |s| format!("{s:.4}"));
        eprintln!(
            "  M = {}: μ_M = {:.4}, slope {slope}, threshold {:.4}, residual order {:.4} -> {:?}",
            r.order, r.predicted_exponent, r.threshold, r.residual_order, r.verdict
        );
    }
    if let Some(path) = &args.trace {
        let file = fs::File::create(path).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        verification
            .trace
            .write_csv(io::BufWriter::new(file))
            .map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?;
    }
    emit(args.output.as_deref(), &serde_json::to_string_pretty(report)?)?;
    let failed: Vec<usize> = report
        .records
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .map(|r| r.order)
        .collect();
    if failed.is_empty() && report.passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(failed))
    }
}

pub fn thresholds(spec_path: &Path, r_star: f64, output: Option<&Path>, float: bool) -> CliResult<()> {
    let spec = load_spec(spec_path, float)?;
    let th = numeric::smallness_thresholds(&spec.to_f64(), r_star)?;
    let capped = if th.c_star_capped { "  (capped: G vanishes)" } else { "" };
    eprintln!("  epsilon_0  {:.6e}", th.epsilon_0);
    eprintln!("  epsilon_1  {:.6e}", th.epsilon_1);
    eprintln!("  C_0        {:.6e}", th.c0);
    eprintln!("  c_*        {:.6e}{capped}", th.c_star);
    eprintln!("  r_*        {:.6e}", th.r_star);
    emit(output, &serde_json::to_string_pretty(&th)?)
}
