use std::path::PathBuf;

use clap::Args;
use sparsefeas::problems::{build, GeneratorKind, GeneratorSpec};

use crate::{write_file, CliError, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: GeneratorKind,
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub s: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub solution_scale: f64,
    /// Destination file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    s.parse()
}

pub(crate) fn run(args: &GenerateArgs) -> Result<u8, CliError> {
    let spec = if args.kind.is_builtin() {
        GeneratorSpec::builtin(args.kind)
    } else {
        GeneratorSpec {
            kind: args.kind,
            m: args.m,
            n: args.n,
            s: args.s,
            seed: args.seed,
            solution_scale: args.solution_scale,
        }
    };
    for w in spec.validate()? {
        eprintln!("warning: {w:?}");
    }
    let json = build(&spec)?.to_document().to_json();
    match &args.out {
        Some(path) => write_file(path, &json)?,
        None => println!("{json}"),
    }
    Ok(EXIT_OK)
}
