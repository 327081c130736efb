//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::criteria::Criterion;
use crate::error::{Error, Result};
use crate::fim::Frame;
use crate::graph::{Parsed, ParseOptions, PoseGraph};
use crate::lie::Dim;
use crate::replay::{complexity_probe, replay, summarize, ReplayConfig, Weighting};
use crate::report::{
    self, format_summary, indices_report, markdown_summary, validate_report, IndexWeighting,
    ReplayDocument, ReplayWeighting, DEFAULT_ANOMALY_FACTOR,
};
use crate::synth::{generate, InfoModel, SynthSpec};

#[derive(Parser, Debug)]
#[command(
    name = "spectral-pgo",
    about = "Pose-graph uncertainty metrics from the information matrix and from graph connectivity",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a pose-graph file and report structural/numerical health.
    Validate(ValidateArgs),
    /// Connectivity indices of a (weighted) pose graph.
    Indices(IndicesArgs),
    /// Incremental replay comparing both evaluation routes per criterion.
    Replay(ReplayArgs),
    /// Generate a synthetic pose-graph file.
    Synth(SynthArgs),
    /// Time both routes on synthetic chains of growing size.
    Probe(ProbeArgs),
}

#[derive(Args, Debug)]
struct ValidateArgs {
    file: PathBuf,
    /// Report edges whose spectral norm exceeds the median by this factor.
    #[arg(long, default_value_t = DEFAULT_ANOMALY_FACTOR)]
    anomaly_factor: f64,
    /// Repair marginally indefinite information matrices with a tiny jitter.
    #[arg(long)]
    jitter: bool,
}

#[derive(Args, Debug)]
struct IndicesArgs {
    file: PathBuf,
    /// Edge weighting: t|d|e|emax|inf|unit.
    #[arg(long, default_value = "unit")]
    weighting: String,
    /// Frame for edge information matrices: raw|world.
    #[arg(long, default_value = "world")]
    frame: String,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    file: PathBuf,
    /// Comma-separated criteria subset of t,d,a,e,emax.
    #[arg(long, default_value = "t,d,e,emax")]
    criteria: String,
    /// Edge weighting: criterion|infinity.
    #[arg(long, default_value = "criterion")]
    weighting: String,
    /// Replace every edge information matrix with this constant block,
    /// given as comma-separated upper-triangular entries (6 or 21 values).
    #[arg(long, value_name = "VALUES")]
    constant_fim: Option<String>,
    /// Frame for edge information matrices: raw|world.
    #[arg(long, default_value = "world")]
    frame: String,
    /// Evaluate every Nth vertex count.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// First vertex count evaluated.
    #[arg(long, default_value_t = 3)]
    start: usize,
    /// Near-zero eigenvalue threshold, relative to the largest eigenvalue.
    #[arg(long, default_value_t = 1e-9)]
    tau_rel: f64,
    /// Write per-step CSV to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the full run (records + summary) as JSON.
    #[arg(long)]
    json: bool,
    /// Print a one-row summary table in Markdown.
    #[arg(long)]
    markdown: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    /// 2 or 3.
    #[arg(long, default_value_t = 2)]
    dim: u32,
    #[arg(long, default_value_t = 0.1)]
    loop_prob: f64,
    /// Maximum loop-closure span in vertices.
    #[arg(long, default_value_t = 10)]
    span: usize,
    /// Information model: iso|diag|corr.
    #[arg(long, default_value = "diag")]
    info: String,
    /// Off-diagonal fraction for the corr model.
    #[arg(long, default_value_t = 0.3)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Comma-separated ascending chain sizes.
    #[arg(long, default_value = "100,200,400,800")]
    sizes: String,
    /// 2 or 3.
    #[arg(long, default_value_t = 2)]
    dim: u32,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version on stdout with status 0 by convention
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Indices(args) => cmd_indices(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Probe(args) => cmd_probe(args),
    }
}

fn load(path: &PathBuf, jitter: bool) -> Result<Parsed> {
    PoseGraph::from_file(path, &ParseOptions { repair_jitter: jitter })
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let parsed = load(&args.file, args.jitter)?;
    let report = validate_report(&parsed, args.anomaly_factor)?;
    println!("{report}");
    Ok(())
}

fn cmd_indices(args: IndicesArgs) -> Result<()> {
    let parsed = load(&args.file, false)?;
    let weighting: IndexWeighting = args.weighting.parse()?;
    let frame: Frame = args.frame.parse()?;
    let report = indices_report(&parsed.graph, weighting, frame)?;
    println!("{report}");
    Ok(())
}

fn parse_criteria(text: &str) -> Result<Vec<Criterion>> {
    let mut criteria = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let c: Criterion = part.parse()?;
        if !criteria.contains(&c) {
            criteria.push(c);
        }
    }
    if criteria.is_empty() {
        return Err(Error::invalid("empty criteria set"));
    }
    Ok(criteria)
}

fn parse_constant_block(text: &str, ell: usize) -> Result<nalgebra::DMatrix<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("malformed constant-block entry {t:?}")))
        })
        .collect::<Result<_>>()?;
    let expected = ell * (ell + 1) / 2;
    if values.len() != expected {
        return Err(Error::invalid(format!(
            "constant block needs {expected} upper-triangular entries for tangent dimension {ell}, got {}",
            values.len()
        )));
    }
    let mut m = nalgebra::DMatrix::zeros(ell, ell);
    let mut idx = 0;
    for r in 0..ell {
        for c in r..ell {
            m[(r, c)] = values[idx];
            m[(c, r)] = values[idx];
            idx += 1;
        }
    }
    Ok(m)
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let parsed = load(&args.file, false)?;
    let g = parsed.graph;

    let (weighting, weighting_name) = match &args.constant_fim {
        Some(text) => {
            let block = parse_constant_block(text, g.tangent_dim())?;
            (Weighting::ConstantFim(block), "constant".to_string())
        }
        None => match args.weighting.parse::<ReplayWeighting>()? {
            ReplayWeighting::Criterion => (Weighting::MatchCriterion, "criterion".to_string()),
            ReplayWeighting::Infinity => (Weighting::Infinity, "infinity".to_string()),
        },
    };

    let mut criteria = parse_criteria(&args.criteria)?;
    if args.constant_fim.is_some() && args.criteria == "t,d,e,emax" {
        // default set widens in constant mode where the harmonic mean is valid
        criteria = Criterion::ALL.to_vec();
    }

    let mut config = ReplayConfig::new(criteria, weighting);
    config.frame = args.frame.parse()?;
    config.stride = args.stride;
    config.start = args.start;
    config.spectral.tau_rel = args.tau_rel;
    let run = replay(&g, &config)?;
    let summary = summarize(&run.records, config.zero_delta_agrees)?;

    let name = args
        .file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    if let Some(path) = &args.out {
        let file = std::fs::File::create(path)?;
        report::write_records_csv(std::io::BufWriter::new(file), &run.records)?;
    }
    if args.json {
        let doc = ReplayDocument {
            dataset: name.clone(),
            frame: run.frame,
            weighting: weighting_name,
            summary: summary.clone(),
            records: run.records.clone(),
            skipped: run.skipped.clone(),
        };
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        serde_json::to_writer_pretty(&mut lock, &doc)
            .map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(lock)?;
        return Ok(());
    }
    if args.markdown {
        print!("{}", markdown_summary(&name, &g, &summary));
        return Ok(());
    }
    print!(
        "{}",
        format_summary(&name, &summary, run.skipped.len(), run.frame)
    );
    Ok(())
}

fn parse_dim(dim: u32) -> Result<Dim> {
    match dim {
        2 => Ok(Dim::Two),
        3 => Ok(Dim::Three),
        other => Err(Error::invalid(format!("dimension must be 2 or 3, got {other}"))),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let info = match args.info.to_ascii_lowercase().as_str() {
        "iso" => InfoModel::Isotropic,
        "diag" => InfoModel::Diagonal,
        "corr" => InfoModel::Correlated { eta: args.eta },
        other => return Err(Error::invalid(format!("unknown info model {other:?}"))),
    };
    let spec = SynthSpec {
        nodes: args.nodes,
        dim: parse_dim(args.dim)?,
        loop_prob: args.loop_prob,
        loop_span: args.span,
        info,
        seed: args.seed,
    };
    let g = generate(&spec)?;
    match &args.out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            g.write_g2o(&mut file)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            g.write_g2o(&mut lock)?;
        }
    }
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<()> {
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("malformed size {t:?}")))
        })
        .collect::<Result<_>>()?;
    let rows = complexity_probe(&sizes, parse_dim(args.dim)?)?;
    println!("n,fim_time_ns,graph_time_ns,ratio");
    for row in &rows {
        println!(
            "{},{},{},{:.2}",
            row.n,
            row.fim_time_ns,
            row.graph_time_ns,
            row.fim_time_ns as f64 / row.graph_time_ns as f64
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_lists_parse() {
        let c = parse_criteria("t,d,e,emax").unwrap();
        assert_eq!(
            c,
            vec![Criterion::T, Criterion::D, Criterion::E, Criterion::Emax]
        );
        assert!(parse_criteria("t,q").is_err());
        assert!(parse_criteria("").is_err());
    }

    #[test]
    fn constant_block_parser_checks_count() {
        let m = parse_constant_block("11.11,-3,0,6.25,0,250", 3).unwrap();
        assert_eq!(m[(0, 1)], -3.0);
        assert_eq!(m[(1, 0)], -3.0);
        assert_eq!(m[(2, 2)], 250.0);
        assert!(parse_constant_block("1,2,3", 3).is_err());
    }
}
