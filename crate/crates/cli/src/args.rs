use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crreduce_core::Mode;

#[derive(Parser, Debug)]
#[command(
    name = "crreduce",
    version,
    about = "Reduce almost CR / almost Lagrangian instances to partially integrable form",
    after_help = "Exit codes: 0 pass, 1 input error, 2 not generic, 3 property failure, \
                  4 generation failure.\n\
                  CRREDUCE_TOL overrides the default tolerances: a single value sets \
                  tau_verify, three comma-separated values set tau_rank,tau_eig,tau_verify. \
                  Per-file tolerance sections and --tol-* flags take precedence, in that order."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reduce an instance and write a full report.
    Reduce {
        /// Instance file.
        input: PathBuf,
        /// Seed for the random basis choices (the result does not depend on it).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Classify an instance; split it into blocks when it is mixed.
    Classify {
        /// Instance file.
        input: PathBuf,
        /// Seed for the block reductions of a mixed instance.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the classification here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Check uniqueness, scale invariance, idempotence and the stabilizer
    /// action on one instance; print a per-property table.
    Verify {
        /// Instance file.
        input: PathBuf,
        /// Seeds to compare, comma separated or an inclusive range a..b.
        #[arg(long, default_value = "0..9", value_parser = parse_seeds)]
        seeds: Seeds,
        /// Write the property table here as well.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Corrupt the computed structure before checking; the hermitian
        /// identity must then fail. Negative control for the harness.
        #[arg(long)]
        debug_corrupt_k: bool,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Generate an instance file.
    Generate {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long, value_enum, default_value_t = ModeArg::Cr)]
        mode: ModeArg,
        /// Half-dimension of the instance.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// CR metric signature as p,q with p + q = n. Defaults to definite.
        #[arg(long, value_parser = parse_signature)]
        signature: Option<Signature>,
        /// Perturbation size for --kind generic.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the instance here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Walk an ordered family of instances: classification at every sample,
    /// the reduced structure at every generic one, and the discrete modulus
    /// of continuity between consecutive generic samples.
    Path {
        /// Instance files forming the path, in order.
        inputs: Vec<PathBuf>,
        /// Family file (base instance, direction matrix, parameter grid)
        /// instead of explicit sample files.
        #[arg(long, conflicts_with = "inputs")]
        family: Option<PathBuf>,
        /// Seed used at every sample, so the structure varies only
        /// through the data.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the path report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
}

#[derive(Args, Debug, Default, Clone)]
pub struct TolArgs {
    /// Override tau_rank (relative rank cutoff).
    #[arg(long)]
    pub tol_rank: Option<f64>,
    /// Override tau_eig (eigenvalue clustering radius and genericity margin).
    #[arg(long)]
    pub tol_eig: Option<f64>,
    /// Override tau_verify (residual bound for verified identities).
    #[arg(long)]
    pub tol_verify: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Cr,
    Lagrangian,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Cr => Mode::Cr,
            ModeArg::Lagrangian => Mode::Lagrangian,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Integrable,
    Generic,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub usize, pub usize);

fn parse_signature(s: &str) -> Result<Signature, String> {
    let (p, q) = s
        .split_once(',')
        .ok_or_else(|| format!("expected p,q, got \"{s}\""))?;
    let p = p.trim().parse().map_err(|e| format!("bad p: {e}"))?;
    let q = q.trim().parse().map_err(|e| format!("bad q: {e}"))?;
    Ok(Signature(p, q))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

/// "3", "0,4,7", or an inclusive range "0..9".
fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if b < a {
            return Err(format!("empty seed range {a}..{b}"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    let seeds = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("bad seed \"{p}\": {e}")))
        .collect::<Result<Vec<u64>, String>>()?;
    if seeds.is_empty() {
        return Err("at least one seed is required".into());
    }
    Ok(Seeds(seeds))
}
