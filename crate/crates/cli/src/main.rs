mod error;
mod oracle;
mod run;

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use extsketch::em::{cost, BlockDevice, EmParams};
use extsketch::stream::{parse_stream, Stream, Updates};
use extsketch::validate::{validate_graph_stream, validate_hyper_stream};

use error::CliError;
use run::{Ingestion, Outcome};

/// Graph sketching on a simulated external-memory machine.
///
/// Reads a dynamic edge stream, builds linear vertex sketches through a
/// block device that counts every block transfer, and answers one query.
/// A one-line JSON summary goes to stdout.
///
/// Exit codes: 0 success, 1 usage, 2 stream parse or validation error,
/// 3 failed precondition, 4 sampling saturation or incomplete extraction.
#[derive(Debug, Parser)]
#[command(name = "extsketch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Connected components; the result file holds `vertex label` lines.
    Cc {
        #[command(flatten)]
        common: Common,
        /// Also write the spanning forest as `u v` lines.
        #[arg(long, value_name = "PATH")]
        forest: Option<PathBuf>,
    },
    /// Bipartiteness through the double cover; writes `bipartite true|false`.
    Bipartite {
        #[command(flatten)]
        common: Common,
    },
    /// Minimum spanning forest weight within a factor 1 + epsilon; writes
    /// `mst_weight <float>`.
    Mstweight {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        /// Largest edge weight; defaults to the stream header's W, else 1.
        #[arg(long)]
        max_weight: Option<f64>,
    },
    /// k edge-disjoint forests; the result file holds `u v forest` lines.
    Kconn {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        k: usize,
    },
    /// Approximate global minimum cut.
    Mincut {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Also write the recovered cut edges as `u v` lines.
        #[arg(long, value_name = "PATH")]
        cut_edges: Option<PathBuf>,
    },
    /// Cut sparsifier; the result file holds `u v weight` lines.
    Sparsify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Answer an s-t minimum cut query on the sparsifier.
        #[arg(long, num_args = 2, value_names = ["S", "T"])]
        st: Option<Vec<u32>>,
    },
    /// Connected components of a hypergraph stream (header `H V W r`).
    Hypercc {
        #[command(flatten)]
        common: Common,
    },
    /// Densest subgraph estimate by sampling and greedy peeling; writes
    /// `density <float>`.
    Densest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Also write the reported vertex set, one id per line.
        #[arg(long, value_name = "PATH")]
        vertices: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Stream file.
    stream: PathBuf,
    /// RAM size M in words.
    #[arg(short = 'M', long, default_value_t = 1 << 20)]
    ram_words: usize,
    /// Block size B in words.
    #[arg(short = 'B', long, default_value_t = 256)]
    block_words: usize,
    /// Random seed.
    #[arg(long, env = "EXTSKETCH_SEED", default_value_t = 1)]
    seed: u64,
    /// Result file.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Write a JSON I/O report.
    #[arg(long, value_name = "PATH")]
    io_report: Option<PathBuf>,
    /// Check stream legality (inserts and deletes alternate per edge) first.
    #[arg(long)]
    validate: bool,
    /// Compare against an in-memory exact answer (small inputs only).
    #[arg(long)]
    oracle_check: bool,
    /// Keep device blocks in this file instead of memory.
    #[arg(long, value_name = "PATH")]
    device_file: Option<PathBuf>,
}

/// The `--io-report` document.
#[derive(Debug, Serialize)]
struct IoReport {
    command: String,
    blocks_read: u64,
    blocks_written: u64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "V")]
    v: u32,
    phi: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "B")]
    b: usize,
    /// Sum over the run's ingestions of `vsketch(N, S, φ) + sort(S φ)`.
    predicted_bound: f64,
    /// `(blocks_read + blocks_written) / predicted_bound`.
    ratio: f64,
    seed: u64,
    ingestions: Vec<Ingestion>,
    ram_peak: usize,
}

fn predicted_bound(p: &EmParams, ingestions: &[Ingestion]) -> f64 {
    ingestions
        .iter()
        .map(|g| {
            cost::vsketch(g.updates as f64, g.slots as f64, g.phi as f64, p)
                + cost::sort((g.slots * g.phi) as f64, p)
        })
        .sum()
}

fn read_stream(path: &Path) -> Result<Stream, CliError> {
    let f = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(parse_stream(BufReader::new(f))?)
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), CliError> {
    fs::write(path, data).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn execute(cmd: Command) -> Result<bool, CliError> {
    let (name, common) = match &cmd {
        Command::Cc { common, .. } => ("cc", common),
        Command::Bipartite { common } => ("bipartite", common),
        Command::Mstweight { common, .. } => ("mstweight", common),
        Command::Kconn { common, .. } => ("kconn", common),
        Command::Mincut { common, .. } => ("mincut", common),
        Command::Sparsify { common, .. } => ("sparsify", common),
        Command::Hypercc { common } => ("hypercc", common),
        Command::Densest { common, .. } => ("densest", common),
    };
    let params = EmParams::new(common.ram_words, common.block_words)?;
    let stream = read_stream(&common.stream)?;
    let n = stream.header.num_vertices;
    let mut dev = match &common.device_file {
        Some(p) => BlockDevice::with_file(params, p)?,
        None => BlockDevice::new(params)?,
    };
    let graph = |u: &Updates| match u {
        Updates::Graph(g) => Ok(g.clone()),
        Updates::Hyper(_) => Err(CliError::Parse(format!("`{name}` needs a graph stream, got a hypergraph header"))),
    };
    if common.validate {
        let violation = match &stream.updates {
            Updates::Graph(g) => validate_graph_stream(&mut dev, n, g)?,
            Updates::Hyper(h) => validate_hyper_stream(&mut dev, n, stream.header.rank.unwrap(), h)?,
        };
        if let Some(v) = violation {
            return Err(CliError::Parse(format!("{}: {v}", common.stream.display())));
        }
        dev.io_reset();
    }
    let seed = common.seed;
    let check = common.oracle_check;
    let out: Outcome = match &cmd {
        Command::Cc { .. } => run::cc(&mut dev, n, &graph(&stream.updates)?, seed, check)?,
        Command::Bipartite { .. } => run::bipartite(&mut dev, n, &graph(&stream.updates)?, seed, check)?,
        Command::Mstweight { epsilon, max_weight, .. } => {
            let w = max_weight.or(stream.header.max_weight).unwrap_or(1.0);
            run::mstweight(&mut dev, n, &graph(&stream.updates)?, *epsilon, w, seed, check)?
        }
        Command::Kconn { k, .. } => run::kconn(&mut dev, n, &graph(&stream.updates)?, *k, seed, check)?,
        Command::Mincut { epsilon, .. } => run::mincut(&mut dev, n, &graph(&stream.updates)?, *epsilon, seed, check)?,
        Command::Sparsify { epsilon, st, .. } => {
            let st = st.as_ref().map(|v| (v[0], v[1]));
            run::sparsify(&mut dev, n, &graph(&stream.updates)?, *epsilon, st, seed, check)?
        }
        Command::Hypercc { .. } => {
            let Updates::Hyper(h) = &stream.updates else {
                return Err(CliError::Parse("`hypercc` needs a header `H V W r` with a rank".into()));
            };
            run::hypercc(&mut dev, n, stream.header.rank.unwrap(), h, seed, check)?
        }
        Command::Densest { epsilon, .. } => run::densest(&mut dev, n, &graph(&stream.updates)?, *epsilon, seed, check)?,
    };

    if let Some(p) = &common.output {
        write_file(p, &out.result)?;
    }
    let extra_path = match &cmd {
        Command::Cc { forest, .. } => forest.as_ref(),
        Command::Mincut { cut_edges, .. } => cut_edges.as_ref(),
        Command::Densest { vertices, .. } => vertices.as_ref(),
        _ => None,
    };
    if let (Some(p), Some(data)) = (extra_path, &out.extra) {
        write_file(p, data)?;
    }
    let io = dev.io_snapshot();
    let predicted = predicted_bound(&params, &out.ingestions);
    let ratio = io.total() as f64 / predicted.max(1.0);
    log::info!("measured/predicted I/O: {ratio:.3}");
    if let Some(p) = &common.io_report {
        let report = IoReport {
            command: name.into(),
            blocks_read: io.blocks_read,
            blocks_written: io.blocks_written,
            n: stream.updates.len(),
            v: n,
            phi: out.ingestions[0].phi,
            m: params.ram_words,
            b: params.block_words,
            predicted_bound: predicted,
            ratio,
            seed,
            ingestions: out.ingestions.clone(),
            ram_peak: dev.ram_peak(),
        };
        let mut data = serde_json::to_vec_pretty(&report).unwrap();
        data.push(b'\n');
        write_file(p, &data)?;
    }
    let mut summary = out.summary;
    summary["complete"] = json!(out.complete);
    if let Some(o) = out.oracle {
        summary["oracle"] = o;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{summary}")?;
    Ok(out.complete)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: extraction stopped with unresolved components; results may be incomplete");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
