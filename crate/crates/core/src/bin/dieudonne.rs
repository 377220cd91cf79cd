use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dieudonne::io::{self, Format, Options, Report, Status};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Analysis {
    Slopes,
    Decompose,
    Ominus,
    Axioms,
    Dual,
    Slices,
    Connection,
    Trivialize,
    Correction,
    Strata,
    Traverso,
    Polarized,
    ReportAll,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "dieudonne", about = "Lattice invariants and certificates for Dieudonné modules")]
struct Cli {
    #[arg(value_enum)]
    analysis: Analysis,
    /// Problem files.
    files: Vec<PathBuf>,
    /// Run every `*.json` file in this directory.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Override the working precision N.
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Override the series truncation degree.
    #[arg(long, global = true)]
    degree: Option<u32>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: OutFormat,
}

fn corpus_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    v.sort();
    Ok(v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut files = cli.files.clone();
    if let Some(dir) = &cli.corpus {
        match corpus_files(dir) {
            Ok(v) => files.extend(v),
            Err(e) => {
                eprintln!("cannot read corpus {}: {e}", dir.display());
                return ExitCode::from(2);
            }
        }
    }
    if files.is_empty() {
        eprintln!("no problem files given");
        return ExitCode::from(2);
    }
    let analyses: Vec<String> = match cli.analysis {
        Analysis::ReportAll => vec![],
        a => vec![a.to_possible_value().unwrap().get_name().to_string()],
    };
    let opts = Options { precision: cli.precision, degree: cli.degree, seed: cli.seed };
    let mut reports: Vec<Report> = Vec::new();
    let mut status = Status::Pass;
    for f in &files {
        match io::parse(f) {
            Ok(spec) => {
                let rep = io::run(&spec, &analyses, &opts);
                status = status.max(rep.status);
                reports.push(rep);
            }
            Err(e) => {
                eprintln!("{}: {e}", f.display());
                status = Status::InputError;
            }
        }
    }
    let format = match cli.format {
        OutFormat::Text => Format::Text,
        OutFormat::Json => Format::Structured,
    };
    if !reports.is_empty() {
        print!("{}", io::emit(&reports, format));
    }
    ExitCode::from(status.exit_code() as u8)
}
