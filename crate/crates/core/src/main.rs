use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tdpmm::config::{MetricSpace, RunConfig};
use tdpmm::corpus::{self, TimeFormat};
use tdpmm::dpmm;
use tdpmm::eval;
use tdpmm::generator::{self, DocLength, GenerativeSpec, Mixture};
use tdpmm::pipeline::{self, write_lines, Grid, PipelineError};

#[derive(Parser)]
#[command(
    name = "tdpmm",
    version,
    about = "Cluster passengers by their origin-destination-time trip bags",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw trip file into indexed trips.csv and vocab.csv.
    Ingest(ConfigArgs),
    /// Build station graphs, detect communities and remap the corpus.
    Graphs(ConfigArgs),
    /// Run the sampler on the corpus as given.
    Cluster(ConfigArgs),
    /// Score an existing assignment file.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// passenger_id,cluster_id file.
        #[arg(long)]
        assignments: PathBuf,
    },
    /// Full pipeline: ingest, graphs, cluster, eval, export.
    Run(ConfigArgs),
    /// One run per point of a model-parameter grid.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// e.g. `r=15,25,35;alpha=0.01,0.05`
        #[arg(long)]
        grid: String,
        /// Run grid points in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Sample a synthetic corpus with known labels.
    Synth(SynthArgs),
}

/// `--config` plus one override flag per config key.
#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trips: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    hops: Option<PathBuf>,
    #[arg(long)]
    poi: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    passenger_col: Option<String>,
    #[arg(long)]
    origin_col: Option<String>,
    #[arg(long)]
    destination_col: Option<String>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long, value_enum)]
    time_format: Option<TimeFormatArg>,
    #[arg(long)]
    slot_hours: Option<u32>,
    #[arg(long)]
    min_trips: Option<usize>,
    #[arg(long)]
    use_graphs: Option<bool>,
    #[arg(long)]
    h: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta_o: Option<f64>,
    #[arg(long)]
    beta_d: Option<f64>,
    #[arg(long)]
    beta_t: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    crp_prior: Option<bool>,
    #[arg(long)]
    disband_every_sweep: Option<bool>,
    #[arg(long)]
    normalize_docs: Option<bool>,
    #[arg(long)]
    weighted_ch: Option<bool>,
    #[arg(long, value_enum)]
    metric_space: Option<MetricSpaceArg>,
    #[arg(long)]
    top_words: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeFormatArg {
    Hour,
    Label,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricSpaceArg {
    Original,
    Remapped,
}

macro_rules! apply {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

impl ConfigArgs {
    fn resolve(self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(PipelineError::Config)?,
            None => RunConfig::default(),
        };
        let a = self;
        if a.trips.is_some() {
            cfg.trips = a.trips;
        }
        if a.vocab.is_some() {
            cfg.vocab = a.vocab;
        }
        if a.hops.is_some() {
            cfg.hops = a.hops;
        }
        if a.poi.is_some() {
            cfg.poi = a.poi;
        }
        if a.labels.is_some() {
            cfg.labels = a.labels;
        }
        apply!(
            cfg, a, out_dir, passenger_col, origin_col, destination_col, time_col, delimiter, slot_hours, min_trips,
            use_graphs, h, gamma, alpha, beta_o, beta_d, beta_t, r, max_iter, k0, seed, crp_prior,
            disband_every_sweep, normalize_docs, weighted_ch, top_words
        );
        if let Some(t) = a.time_format {
            cfg.time_format = match t {
                TimeFormatArg::Hour => TimeFormat::Hour,
                TimeFormatArg::Label => TimeFormat::Label,
            };
        }
        if let Some(m) = a.metric_space {
            cfg.metric_space = match m {
                MetricSpaceArg::Original => MetricSpace::Original,
                MetricSpaceArg::Remapped => MetricSpace::Remapped,
            };
        }
        cfg.validate().map_err(PipelineError::Config)?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthMode {
    /// Equal-weight mixture of planted block topics.
    Planted,
    /// CRP seating with Dirichlet-drawn topics.
    Crp,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "planted")]
    mode: SynthMode,
    /// Planted cluster count.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Mass each planted topic puts on its own word block.
    #[arg(long, default_value_t = 0.9)]
    peak: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Dirichlet concentration of CRP topics.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    n_docs: usize,
    #[arg(long, default_value_t = 8.0)]
    mean_len: f64,
    /// Vocabulary sizes, origin,destination,time.
    #[arg(long, value_delimiter = ',', default_values_t = [20, 20, 24])]
    vocab: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth")]
    out_dir: PathBuf,
}

fn create_dir(dir: &std::path::Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

fn ingest(cfg: &RunConfig) -> Result<(), PipelineError> {
    let corpus = pipeline::load_corpus(cfg)?;
    create_dir(&cfg.out_dir)?;
    corpus.write(&cfg.out_dir.join("trips.csv"), &cfg.out_dir.join("vocab.csv"))?;
    println!(
        "{} passengers, {} trips, vocabulary {:?}",
        corpus.len(),
        corpus.total_words(),
        corpus.vocab_sizes()
    );
    Ok(())
}

fn graphs(cfg: &RunConfig) -> Result<(), PipelineError> {
    if cfg.hops.is_none() || cfg.poi.is_none() {
        return Err(PipelineError::Config("graphs requires both `hops` and `poi`".into()));
    }
    let corpus = pipeline::load_corpus(cfg)?;
    let stage = pipeline::graph_stage(cfg, &corpus)?;
    create_dir(&cfg.out_dir)?;
    write_lines(&cfg.out_dir.join("communities.csv"), stage.export_lines())?;
    stage
        .remapped
        .corpus
        .write(&cfg.out_dir.join("remapped_trips.csv"), &cfg.out_dir.join("remapped_vocab.csv"))?;
    println!(
        "proximity: {} communities (Q = {:.4}); functional: {} communities (Q = {:.4}); {} spatial symbols",
        stage.proximity.n_communities,
        stage.proximity.modularity,
        stage.functional.n_communities,
        stage.functional.modularity,
        stage.remapped.corpus.vocab_sizes()[0]
    );
    Ok(())
}

fn cluster(cfg: &RunConfig) -> Result<(), PipelineError> {
    let corpus = pipeline::load_corpus(cfg)?;
    let out = dpmm::run(&corpus, &cfg.hyperparams())?;
    let dir = &cfg.out_dir;
    create_dir(dir)?;
    corpus::write_passenger_column(
        &dir.join("assignments.csv"),
        &corpus,
        "cluster_id",
        &out.state.compact_assignments(),
    )?;
    write_lines(&dir.join("clusters.txt"), dpmm::cluster_summary_lines(&out.state, &corpus, cfg.top_words))?;
    write_lines(&dir.join("k_trace.csv"), dpmm::k_trace_lines(&out.k_trace))?;
    println!("K = {}{}", out.state.n_clusters(), if out.fallback_fired() { " (fallback)" } else { "" });
    Ok(())
}

fn evaluate(cfg: &RunConfig, assignments: &std::path::Path) -> Result<(), PipelineError> {
    let corpus = pipeline::load_corpus(cfg)?;
    let z = corpus::read_passenger_column(assignments, &corpus)?;
    let report = eval::evaluate(&corpus, &z, cfg.eval_options())?;
    let mut external = Vec::new();
    if let Some(p) = &cfg.labels {
        let truth = corpus::read_passenger_column(p, &corpus)?;
        external.push(("NMI", eval::nmi(&truth, &z)?));
        external.push(("ARI", eval::ari(&truth, &z)?));
    }
    let lines = report.lines(&external);
    for l in &lines {
        println!("{l}");
    }
    create_dir(&cfg.out_dir)?;
    write_lines(&cfg.out_dir.join("metrics.csv"), lines)
}

fn synth(args: SynthArgs) -> Result<(), PipelineError> {
    let vocab: [usize; 3] = args.vocab.as_slice().try_into().map_err(|_| {
        PipelineError::Config(format!("--vocab needs three sizes, got {}", args.vocab.len()))
    })?;
    let spec = match args.mode {
        SynthMode::Planted => generator::planted_spec(args.k, vocab, args.peak, args.mean_len, args.n_docs, args.seed)?,
        SynthMode::Crp => GenerativeSpec {
            mixture: Mixture::Crp {
                alpha: args.alpha,
                beta: [args.beta; 3],
            },
            vocab_sizes: vocab,
            doc_length: DocLength::ShiftedPoisson { mean: args.mean_len },
            n_docs: args.n_docs,
            seed: args.seed,
        },
    };
    let syn = match args.mode {
        SynthMode::Planted => generator::sample_finite_corpus(&spec)?,
        SynthMode::Crp => generator::sample_dp_corpus(&spec)?,
    };
    let dir = &args.out_dir;
    create_dir(dir)?;
    syn.corpus.write(&dir.join("trips.csv"), &dir.join("vocab.csv"))?;
    corpus::write_passenger_column(&dir.join("labels.csv"), &syn.corpus, "true_cluster", &syn.labels)?;
    println!(
        "{} passengers, {} trips, {} true clusters",
        syn.corpus.len(),
        syn.corpus.total_words(),
        syn.n_true_clusters()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest(a) => ingest(&a.resolve()?),
        Command::Graphs(a) => graphs(&a.resolve()?),
        Command::Cluster(a) => cluster(&a.resolve()?),
        Command::Eval { cfg, assignments } => evaluate(&cfg.resolve()?, &assignments),
        Command::Run(a) => {
            let cfg = a.resolve()?;
            let out = pipeline::run_pipeline(&cfg)?;
            for l in out.metric_lines() {
                println!("{l}");
            }
            Ok(())
        }
        Command::Sweep { cfg, grid, parallel } => {
            let cfg = cfg.resolve()?;
            let grid = Grid::parse(&grid).map_err(PipelineError::Config)?;
            let rows = pipeline::sweep(&cfg, &grid, parallel)?;
            for l in pipeline::sweep_table_lines(&grid, &rows) {
                println!("{l}");
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} grid point(s) failed; see sweep.csv");
            }
            Ok(())
        }
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
