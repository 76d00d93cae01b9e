//! Command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 inputs that do
//! not fit together (dimensions, spectra, non-Hermitian base point), 4 a
//! soundness violation in a norm report.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::derivative::{finite_difference, moi_derivative, relative_error, ScalarFunction};
use crate::error::Error;
use crate::json::{self, MatrixJson};
use crate::linalg::{op_norm, CMatrix};
use crate::moi::moi_apply;
use crate::norms::{verify_theorem, Budget};
use crate::schur::{apply_multiplier, SymbolTensor};
use crate::spectral::{NormalOperator, WeightedSpectrum, DEFAULT_CLUSTER_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_UNSOUND: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "moikit", version, about = "Multilinear Schur multipliers and multiple operator integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a symbol to kernels (Schur multiplier) or to operators (operator integral).
    Apply(ApplyArgs),
    /// Certify upper and lower bounds for the multiplier norm of a symbol.
    Norm(NormArgs),
    /// Compare the operator-integral derivative of f(A + sX) with finite differences.
    Derivative(DerivativeArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("inputs").required(true).args(["kernels", "operators"])))]
struct ApplyArgs {
    #[arg(long)]
    symbol: PathBuf,
    /// Kernel files K_1,...,K_(n-1).
    #[arg(long, value_delimiter = ',')]
    kernels: Vec<PathBuf>,
    /// Matrix files A_1,X_1,A_2,...,X_(n-1),A_n (normal A_i, operands X_i).
    #[arg(long, value_delimiter = ',')]
    operators: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NormArgs {
    #[arg(long)]
    symbol: PathBuf,
    /// Auxiliary space dimensions (default: the trivially sufficient ranks).
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accepted fit residual of an upper certificate, relative to max|phi|.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also run the exact semidefinite oracle (bilinear symbols only).
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 80)]
    max_iter: usize,
    /// Random contraction tuples tried per lower-bound restart.
    #[arg(long, default_value_t = 4)]
    samples: usize,
    /// Multiplicity of each atom in the lower-bound operators.
    #[arg(long, default_value_t = 1)]
    copies: usize,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DerivativeArgs {
    /// exp, square or reciprocal-shift (x -> 1/(x+i)).
    #[arg(long)]
    function: ScalarFunction,
    /// Matrix files A,X: Hermitian base point and direction.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    operators: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Mismatch(String),
    Unsound,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::InvalidData(_) | Error::InvalidSpectrum(_) => Failure::Input(e.to_string()),
            _ => Failure::Mismatch(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: crate::error::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
fn write_atomic(path: &Path, contents: &str) -> CliResult {
    let io = |e: std::io::Error| Failure::Input(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, contents: &str) -> CliResult {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Re-indexes `phi` onto the atoms of decomposed operators. Each symbol atom
/// must lie within the clustering tolerance of exactly one operator atom.
fn align_symbol(phi: &SymbolTensor, ops: &[NormalOperator]) -> crate::error::Result<SymbolTensor> {
    if ops.len() != phi.order() {
        return Err(Error::OrderMismatch {
            expected: phi.order(),
            found: ops.len(),
        });
    }
    let mut perms = Vec::with_capacity(ops.len());
    let mut spectra = Vec::with_capacity(ops.len());
    for (slot, (op, s)) in ops.iter().zip(phi.spectra()).enumerate() {
        let atoms = op.spectrum().atoms();
        if atoms.len() != s.len() {
            return Err(Error::SpectrumMismatch { slot });
        }
        let tol = DEFAULT_CLUSTER_TOL * op_norm(op.matrix()).max(1.0);
        // perm[j] = symbol atom sitting at operator atom j
        let mut perm = vec![usize::MAX; atoms.len()];
        for (i, z) in s.atoms().iter().enumerate() {
            let j = atoms
                .iter()
                .position(|w| (w - z).norm() <= tol)
                .ok_or(Error::SpectrumMismatch { slot })?;
            if perm[j] != usize::MAX {
                return Err(Error::SpectrumMismatch { slot });
            }
            perm[j] = i;
        }
        let weights = perm.iter().map(|&i| s.weights()[i]).collect();
        spectra.push(WeightedSpectrum::new(atoms.to_vec(), weights)?);
        perms.push(perm);
    }
    let mut src = vec![0; phi.order()];
    SymbolTensor::from_fn(spectra, |idx| {
        for (k, &j) in idx.iter().enumerate() {
            src[k] = perms[k][j];
        }
        phi.get(&src)
    })
}

fn cmd_apply(args: &ApplyArgs) -> CliResult {
    let phi = with_path(&args.symbol, json::parse_symbol(&read(&args.symbol)?))?;
    if !args.kernels.is_empty() {
        let kernels = args
            .kernels
            .iter()
            .map(|p| with_path(p, json::parse_kernel(&read(p)?)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let out = apply_multiplier(&phi, &kernels)?;
        return emit(&args.out, &json::to_pretty(&json::kernel_json(&out)));
    }
    let mats = args
        .operators
        .iter()
        .map(|p| with_path(p, json::parse_matrix(&read(p)?)))
        .collect::<std::result::Result<Vec<CMatrix>, _>>()?;
    let n = phi.order();
    if mats.len() != 2 * n - 1 {
        return Err(Failure::Mismatch(format!(
            "a symbol of order {n} needs {} matrices A_1,X_1,...,A_{n}, got {}",
            2 * n - 1,
            mats.len()
        )));
    }
    let ops = mats.iter().step_by(2).map(NormalOperator::decompose).collect::<crate::error::Result<Vec<_>>>()?;
    let xs: Vec<CMatrix> = mats.iter().skip(1).step_by(2).cloned().collect();
    let phi = align_symbol(&phi, &ops)?;
    let out = moi_apply(&phi, &ops, &xs)?;
    emit(&args.out, &json::to_pretty(&MatrixJson::from(&out)))
}

fn cmd_norm(args: &NormArgs) -> CliResult {
    let phi = with_path(&args.symbol, json::parse_symbol(&read(&args.symbol)?))?;
    let budget = Budget {
        restarts: args.restarts,
        seed: args.seed,
        max_iter: args.max_iter,
        tol: args.tol,
        samples: args.samples,
        copies: args.copies,
        oracle: args.oracle,
    };
    let report = verify_theorem(&phi, args.ranks.as_deref(), &budget);
    print!("{report}");
    if args.oracle && phi.order() != 2 {
        println!("oracle skipped: symbol has order {}", phi.order());
    }
    if let Some(path) = &args.out {
        write_atomic(path, &json::to_pretty(&report))?;
    }
    if report.sound {
        Ok(())
    } else {
        Err(Failure::Unsound)
    }
}

#[derive(Serialize)]
struct DerivativeReport {
    function: String,
    step: f64,
    derivative: MatrixJson,
    finite_difference: MatrixJson,
    relative_error: f64,
}

fn cmd_derivative(args: &DerivativeArgs) -> CliResult {
    let [a_path, x_path] = args.operators.as_slice() else {
        return Err(Failure::Input(format!(
            "--operators takes two files (A,X), got {}",
            args.operators.len()
        )));
    };
    let a = with_path(a_path, json::parse_matrix(&read(a_path)?))?;
    let x = with_path(x_path, json::parse_matrix(&read(x_path)?))?;
    if x.shape() != a.shape() {
        return Err(Failure::Mismatch(format!("A is {:?} but X is {:?}", a.shape(), x.shape())));
    }
    let d = moi_derivative(args.function, &a, &x)?;
    let fd = finite_difference(args.function, &a, &x, args.step);
    let err = relative_error(&d, &fd);
    println!("function: {}", args.function);
    println!("step: {:e}", args.step);
    println!("relative error: {err:.6e}");
    if let Some(path) = &args.out {
        let report = DerivativeReport {
            function: args.function.to_string(),
            step: args.step,
            derivative: (&d).into(),
            finite_difference: (&fd).into(),
            relative_error: err,
        };
        write_atomic(path, &json::to_pretty(&report))?;
    }
    Ok(())
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("MOIKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Input(format!("MOIKIT_THREADS must be a positive integer, got {value:?}")))?;
    // A pool may already exist when called repeatedly in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Runs the CLI on the given arguments (program name first) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Apply(a) => cmd_apply(a),
        Command::Norm(a) => cmd_norm(a),
        Command::Derivative(a) => cmd_derivative(a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            EXIT_INPUT
        }
        Err(Failure::Mismatch(m)) => {
            eprintln!("error: {m}");
            EXIT_MISMATCH
        }
        Err(Failure::Unsound) => {
            eprintln!("error: soundness check failed (lower bound exceeds upper bound)");
            EXIT_UNSOUND
        }
    }
}
