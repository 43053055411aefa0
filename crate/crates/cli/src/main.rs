//! `latent-split` command-line pipeline.
//!
//! Exit codes: 0 success, 2 data or validation error, 64 usage error,
//! 70 numerical failure.

mod artifacts;
mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_split::decomposition::DEFAULT_K;
use latent_split::metrics::Space;

const EXIT_DATA: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_NUMERICAL: u8 = 70;

#[derive(Parser, Debug)]
#[command(name = "latent-split", version, about = "Style/content subspace analysis of frame embeddings")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a features/metadata (and optional targets) set loads cleanly.
    Validate {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Generate a synthetic dataset with a planted style subspace.
    Synth(SynthArgs),
    /// Split each genre into style and content subspaces.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep k and pick the one with the largest style/content gap.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated k values; defaults to 1,2,4,…,256 (out-of-range values dropped).
        #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
        candidates: Option<Vec<u64>>,
        #[arg(long, default_value = "raw")]
        space: Space,
        #[command(flatten)]
        tsne: TsneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Domain-gap silhouette report for latent, content and style embeddings.
    Gap {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value = "raw")]
        space: Space,
        /// Extra row-aligned embedding to score, as NAME=PATH.gemb (repeatable).
        #[arg(long = "extra", value_parser = parse_extra)]
        extras: Vec<(String, PathBuf)>,
        #[command(flatten)]
        tsne: TsneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linear regression probe of the target variables.
    ProbeReg {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// `fraction:F` (seeded random hold-out) or `games:ID,ID,...`.
        #[arg(long = "test-split", value_parser = parse_row_split)]
        test_split: RowSplitSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Style-label classification probe under held-out-game folds.
    ProbeCls {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = latent_split::probes::DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-dimensional t-SNE coordinates for plotting.
    Tsne {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Which embedding to map: latent, content or style.
        #[arg(long, default_value = "latent")]
        embedding: Variant,
        #[command(flatten)]
        tsne: TsneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge gap CSVs into one genres × variants table.
    Report {
        /// gap_*.csv files, or directories to scan for them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    metadata: PathBuf,
    /// Target values (`.gemb`); names are read from the `.csv` beside it.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Restrict to one genre; all genres when omitted.
    #[arg(long)]
    genre: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct SplitArgs {
    #[arg(long, default_value_t = DEFAULT_K as u64, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// top, random, last or top-half-random.
    #[arg(long, default_value = "top", value_parser = ["top", "random", "last", "top-half-random"])]
    strategy: String,
}

#[derive(Args, Debug, Clone)]
struct TsneArgs {
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    iterations: u64,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    genres: usize,
    #[arg(long, default_value_t = 9)]
    games_per_genre: usize,
    #[arg(long, default_value_t = 200)]
    samples_per_game: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    style_dim: usize,
    #[arg(long, default_value_t = 16)]
    content_dim: usize,
    #[arg(long, default_value_t = 10.0)]
    style_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    content_scale: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    label_offset_scale: f64,
    #[arg(long, default_value_t = 8)]
    target_vars: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Variant {
    Latent,
    Content,
    Style,
}

impl Variant {
    fn as_str(self) -> &'static str {
        match self {
            Variant::Latent => "latent",
            Variant::Content => "content",
            Variant::Style => "style",
        }
    }
}

#[derive(Clone, Debug)]
enum RowSplitSpec {
    Fraction(f64),
    Games(Vec<String>),
}

fn parse_row_split(s: &str) -> Result<RowSplitSpec, String> {
    match s.split_once(':') {
        Some(("fraction", f)) => {
            let f: f64 = f.parse().map_err(|_| format!("bad fraction `{f}`"))?;
            if f > 0.0 && f < 1.0 {
                Ok(RowSplitSpec::Fraction(f))
            } else {
                Err(format!("fraction {f} must lie in (0, 1)"))
            }
        }
        Some(("games", list)) => {
            let games: Vec<String> = list.split(',').filter(|g| !g.is_empty()).map(str::to_owned).collect();
            if games.is_empty() {
                Err("games: needs at least one game id".into())
            } else {
                Ok(RowSplitSpec::Games(games))
            }
        }
        _ => Err(format!("expected `fraction:F` or `games:ID,...`, got `{s}`")),
    }
}

fn parse_extra(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

/// Failure of a command, already classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<latent_split::Error> for Failure {
    fn from(e: latent_split::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("LATENT_SPLIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("LATENT_SPLIT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|()| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use latent_split::Error;

    #[test]
    fn core_errors_map_to_documented_codes() {
        let numerical = [
            Error::ConvergenceFailure { sweeps: 100, tolerance: 1e-12 },
            Error::NonFiniteGradient { iteration: 3 },
            Error::DegenerateDesign("singular".into()),
        ];
        for e in numerical {
            assert_eq!(Failure::from(e).exit_code(), EXIT_NUMERICAL);
        }
        assert_eq!(Failure::from(Error::TooFewGames(1)).exit_code(), EXIT_DATA);
        assert_eq!(Failure::from(Error::UnknownStyleLabel { row: 0 }).exit_code(), EXIT_DATA);
        assert_eq!(Failure::Usage(String::new()).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn split_specs() {
        assert!(matches!(parse_row_split("fraction:0.25"), Ok(RowSplitSpec::Fraction(f)) if f == 0.25));
        assert!(matches!(parse_row_split("games:a,b"), Ok(RowSplitSpec::Games(g)) if g == ["a", "b"]));
        for bad in ["fraction:1", "fraction:x", "games:", "0.2", "rows:1"] {
            assert!(parse_row_split(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_extra("attn=a.gemb").unwrap(), ("attn".to_owned(), PathBuf::from("a.gemb")));
        assert!(parse_extra("=a").is_err());
    }
}
