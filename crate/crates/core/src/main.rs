use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sbmtc::analysis::{posterior_predictive_clustering, predictive_zscore, PosteriorSummary};
use sbmtc::generators::{
    apply_triadic_closure, sample_geometric_degree_graph, sample_pp_graph, ClosureProbability, EdgeControl,
};
use sbmtc::prediction::{make_holdout, precision_recall, run_reconstruction_chain, Prior};
use sbmtc::sampler::{AcceptanceStats, Chain, ChainCollectors, ChainConfig, Checkpoint, Snapshot};
use sbmtc::sbm::PPSpec;
use sbmtc::state::Support;
use sbmtc::{global_clustering, Error, SimpleGraph};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "sbmtc", version, about = "Block model plus triadic closure inference for networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample synthetic networks.
    #[command(subcommand)]
    Generate(Generate),
    /// Sample the posterior of a network's decomposition and partition.
    Infer(InferArgs),
    /// Posterior predictive check of the global clustering coefficient.
    Ppc(PpcArgs),
    /// Held-out edge prediction over replicated holdouts.
    Predict(PredictArgs),
}

#[derive(Subcommand)]
enum Generate {
    /// Planted-partition substrate with equal group sizes.
    Pp {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        mean_degree: f64,
        /// Fraction of edges inside groups.
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes PREFIX.el and PREFIX.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Configuration model with geometric degrees.
    Geometric {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mean_degree: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triadic closure generations on top of a substrate.
    Closure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        generations: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sbm,
    Sbmtc,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, default_value_t = 2000)]
    sweeps: u64,
    #[arg(long, default_value_t = 1000)]
    burn_in: u64,
    #[arg(long, default_value_t = 10)]
    thin: u64,
    /// Closure generations; ignored by the plain block model.
    #[arg(long = "L", default_value_t = 1)]
    layers: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ChainArgs {
    fn config(&self, layers: u8, seed: u64) -> ChainConfig {
        ChainConfig { sweeps: self.sweeps, burn_in: self.burn_in, thin: self.thin, layers, seed, ..Default::default() }
    }
}

#[derive(Args)]
struct InferArgs {
    mode: Mode,
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, default_value_t = 1)]
    chains: u32,
    /// Summary JSON; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Writes the final state of every chain here for later resumption.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct PpcArgs {
    /// Summary written by `infer`.
    #[arg(long)]
    summary: PathBuf,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Fraction of edges held out, in (0, 1].
    #[arg(long)]
    f: f64,
    #[arg(long, default_value_t = 1)]
    replicates: u32,
    #[arg(long, value_enum, default_value = "sbmtc")]
    prior: PriorArg,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Sbm,
    Sbmtc,
}

/// Failures mapped onto exit codes.
enum Failure {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Io(_) => Failure::Io(m),
            Error::Parse { .. } | Error::SelfLoop { .. } | Error::Json(_) => Failure::Io(m),
            Error::Argument(_) => Failure::Usage(m),
            Error::Infeasible(_) | Error::Constraint(_) | Error::Numerical(_) => Failure::Numerical(m),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(g) => generate(g),
        Command::Infer(a) => infer(a),
        Command::Ppc(a) => ppc(a),
        Command::Predict(a) => predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn invocation() -> Vec<String> {
    std::env::args().collect()
}

/// Fields shared by every JSON output.
fn header(schema: &str, seeds: &[u64]) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(schema));
    m.insert("version".into(), json!(VERSION));
    m.insert("invocation".into(), json!(invocation()));
    m.insert("seeds".into(), json!(seeds));
    m
}

fn read_graph(path: &Path) -> Outcome<SimpleGraph> {
    let f = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    SimpleGraph::parse_edge_list(BufReader::new(f)).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Outcome<()> {
    let io = |e: std::io::Error| Failure::Io(e.to_string());
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
            w.write_all(b"\n").map_err(io)?;
            w.flush().map_err(io)
        }
        None => {
            let out = std::io::stdout();
            let mut w = out.lock();
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
            w.write_all(b"\n").map_err(io)
        }
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn generate(cmd: Generate) -> Outcome<()> {
    match cmd {
        Generate::Pp { n, b, mean_degree, c, seed, out } => {
            let spec = PPSpec::from_mean_degree(b, n, mean_degree, c);
            spec.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (g, truth) = sample_pp_graph(&spec, &mut rng)?;
            write_text(&with_ext(&out, "el"), &g.to_edge_list())?;
            let mut doc = header("sbmtc.provenance/1", &[seed]);
            doc.insert("nodes".into(), json!(g.node_count()));
            doc.insert("edges".into(), json!(g.edge_count()));
            doc.insert("partition".into(), json!(truth.labels()));
            write_json(Some(&with_ext(&out, "json")), &doc)
        }
        Generate::Geometric { n, mean_degree, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_geometric_degree_graph(n, mean_degree, EdgeControl::Expected, &mut rng)?;
            write_text(&with_ext(&out, "el"), &g.to_edge_list())?;
            let mut doc = header("sbmtc.provenance/1", &[seed]);
            doc.insert("nodes".into(), json!(g.node_count()));
            doc.insert("edges".into(), json!(g.edge_count()));
            write_json(Some(&with_ext(&out, "json")), &doc)
        }
        Generate::Closure { input, p, generations, seed, out } => {
            let a = read_graph(&input)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (g, origins) = apply_triadic_closure(&a, &ClosureProbability::Uniform(p), generations, &mut rng)?;
            write_text(&with_ext(&out, "el"), &g.to_edge_list())?;
            let mut doc = header("sbmtc.provenance/1", &[seed]);
            doc.insert("nodes".into(), json!(g.node_count()));
            doc.insert("edges".into(), json!(g.edge_count()));
            doc.insert(
                "provenance".into(),
                json!(origins
                    .iter()
                    .map(|o| json!({
                        "i": o.i,
                        "j": o.j,
                        "generation": o.generation,
                        "ego": o.ego,
                        "seminal": o.is_seminal(),
                    }))
                    .collect::<Vec<_>>()),
            );
            write_json(Some(&with_ext(&out, "json")), &doc)
        }
    }
}

/// What `ppc` needs from an inference run.
#[derive(Serialize, Deserialize)]
struct PredictiveInputs {
    layers: u8,
    observed_clustering: f64,
    snapshots: Vec<Snapshot>,
}

fn infer(a: InferArgs) -> Outcome<()> {
    if a.chains == 0 {
        return Err(Failure::Usage("--chains must be at least 1".into()));
    }
    let g = read_graph(&a.input)?;
    let layers = match a.mode {
        Mode::Sbm => 0,
        Mode::Sbmtc => a.chain.layers,
    };
    let seeds: Vec<u64> = (0..a.chains as u64).map(|k| a.chain.seed.wrapping_add(k)).collect();
    let base = a.chain.config(layers, a.chain.seed);
    base.validate()?;
    let support = Arc::new(Support::observed(&g));
    let want_checkpoint = a.checkpoint.is_some();
    let runs: Vec<(ChainCollectors, Option<Checkpoint>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut chain = Chain::new(Arc::clone(&support), ChainConfig { seed, ..base.clone() }, None, None)?;
            chain.run()?;
            let ck = want_checkpoint.then(|| chain.checkpoint());
            Ok((chain.into_collectors(), ck))
        })
        .collect::<sbmtc::Result<_>>()?;
    let (collectors, checkpoints): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let merged = ChainCollectors::merge(&collectors)?;
    let summary = PosteriorSummary::new(&g, layers, &merged);
    let per_chain: Vec<AcceptanceStats> = collectors.iter().map(|c| c.stats).collect();
    let mut doc = header("sbmtc.summary/1", &seeds);
    doc.insert("mode".into(), json!(if layers == 0 { "sbm" } else { "sbmtc" }));
    doc.insert("config".into(), json!(base));
    doc.insert("nodes".into(), json!(g.node_count()));
    doc.insert("edges".into(), json!(g.edge_count()));
    doc.insert("summary".into(), json!(summary));
    doc.insert("acceptance".into(), json!({ "total": merged.stats, "per_chain": per_chain }));
    doc.insert(
        "predictive".into(),
        json!(PredictiveInputs {
            layers,
            observed_clustering: global_clustering(&g).value,
            snapshots: merged.snapshots.clone(),
        }),
    );
    if let Some(path) = &a.checkpoint {
        let mut ck = header("sbmtc.checkpoint/1", &seeds);
        ck.insert("chains".into(), json!(checkpoints.into_iter().flatten().collect::<Vec<_>>()));
        write_json(Some(path), &ck)?;
    }
    write_json(a.out.as_deref(), &doc)
}

fn ppc(a: PpcArgs) -> Outcome<()> {
    if a.draws < 2 {
        return Err(Failure::Usage("--draws must be at least 2".into()));
    }
    let f = File::open(&a.summary).map_err(|e| Failure::Io(format!("{}: {e}", a.summary.display())))?;
    let doc: Value = serde_json::from_reader(BufReader::new(f)).map_err(|e| Failure::Io(e.to_string()))?;
    let inputs: PredictiveInputs = doc
        .get("predictive")
        .cloned()
        .ok_or_else(|| Failure::Usage("summary has no predictive section".into()))
        .and_then(|v| serde_json::from_value(v).map_err(|e| Failure::Io(format!("predictive section: {e}"))))?;
    if inputs.snapshots.is_empty() {
        return Err(Failure::Usage("summary holds no retained snapshots".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samples = posterior_predictive_clustering(&inputs.snapshots, inputs.layers, a.draws, &mut rng)?;
    let z = predictive_zscore(&samples, inputs.observed_clustering)?;
    let mut out = header("sbmtc.ppc/1", &[a.seed]);
    out.insert("layers".into(), json!(inputs.layers));
    out.insert("observed_clustering".into(), json!(inputs.observed_clustering));
    out.insert("predictive_clustering".into(), json!(samples));
    out.insert("zscore".into(), json!(z));
    write_json(a.out.as_deref(), &out)
}

#[derive(Serialize)]
struct ReplicateRecord {
    replicate: u32,
    seed: u64,
    held_out: usize,
    precision: f64,
    recall: f64,
}

fn predict(a: PredictArgs) -> Outcome<()> {
    if !(a.f > 0.0 && a.f <= 1.0) {
        return Err(Failure::Usage(format!("--f {} must lie in (0, 1]", a.f)));
    }
    if a.replicates == 0 {
        return Err(Failure::Usage("--replicates must be at least 1".into()));
    }
    let g = read_graph(&a.input)?;
    let (prior, layers) = match a.prior {
        PriorArg::Sbm => (Prior::Sbm, 0),
        PriorArg::Sbmtc => (Prior::Sbmtc, a.chain.layers),
    };
    a.chain.config(layers, a.chain.seed).validate()?;
    let seeds: Vec<u64> = (0..a.replicates as u64).map(|r| a.chain.seed.wrapping_add(r)).collect();
    let records: Vec<ReplicateRecord> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (data, spec) = make_holdout(&g, a.f, seed, &mut rng)?;
            let rec = run_reconstruction_chain(&data, &a.chain.config(layers, seed), prior)?;
            let (precision, recall) = precision_recall(&rec.marginals, &spec)?;
            Ok(ReplicateRecord { replicate: r as u32, seed, held_out: spec.positives.len(), precision, recall })
        })
        .collect::<sbmtc::Result<_>>()?;
    let mut doc = header("sbmtc.predict/1", &seeds);
    doc.insert("prior".into(), json!(prior));
    doc.insert("f".into(), json!(a.f));
    doc.insert("records".into(), json!(records));
    write_json(a.out.as_deref(), &doc)
}
