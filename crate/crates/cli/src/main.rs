//! `gbn`: train, evaluate and explore gamma belief networks.

mod config;
mod error;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use gbn::corpus::{load_uci_bow, split_tokens};
use gbn::exploration::{top_words_report, NodeId, TreeSpec};
use gbn::{
    extract_features, extract_subnetwork, generate_synthetic, heldout_perplexity, project, top_words, train_layerwise,
    DenseNonnegMatrix, Layer1Mode, Link, Network, Observations, RngStream, SamplerConfig, TrainSchedule, Vocabulary,
};

use config::{parse_assignment, DataFormat, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "gbn", version, about = "Gamma belief networks: training, evaluation and exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow networks of depth 1..=tmax; writes one model file per depth.
    Train(Args),
    /// Held-out-word perplexity of a count model on a token split.
    Perplexity(Args),
    /// Posterior-mean first-layer feature proportions per document.
    Features(Args),
    /// Tree rooted at one node, as DOT and JSON.
    Tree(Args),
    /// Union of the trees of several roots, as DOT and JSON.
    Subnetwork(Args),
    /// Synthetic documents drawn down through a trained network.
    Generate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// `uci` (counts or binary) or `csv` (nonnegative reals).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    vocab: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// `count`, `binary` or `prg`.
    #[arg(long)]
    link: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// More than one thread forces explicit layer-one sampling.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    k1max: Option<String>,
    #[arg(long)]
    tmax: Option<String>,
    /// Root nodes as `layer:index`, comma separated.
    #[arg(long, alias = "root")]
    roots: Option<String>,
    /// Per-layer thresholds; `inf` allowed.
    #[arg(long)]
    tau: Option<String>,
    /// Number of synthetic documents.
    #[arg(long)]
    docs: Option<String>,
    /// Any other key, e.g. `--set burnin=200`.
    #[arg(short = 's', long = "set", value_parser = parse_assignment)]
    set: Vec<(String, String)>,
}

impl Args {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = self.set.clone();
        let named = [
            ("data", &self.data),
            ("format", &self.format),
            ("vocab", &self.vocab),
            ("model", &self.model),
            ("out", &self.out),
            ("link", &self.link),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("k1max", &self.k1max),
            ("tmax", &self.tmax),
            ("roots", &self.roots),
            ("tau", &self.tau),
            ("docs", &self.docs),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        out
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Train(a) => ("train", a),
        Command::Perplexity(a) => ("perplexity", a),
        Command::Features(a) => ("features", a),
        Command::Tree(a) => ("tree", a),
        Command::Subnetwork(a) => ("subnetwork", a),
        Command::Generate(a) => ("generate", a),
    };
    let result = RunConfig::resolve(name, args.config.as_deref(), &args.overrides()).and_then(|cfg| match name {
        "train" => cmd_train(&cfg),
        "perplexity" => cmd_perplexity(&cfg),
        "features" => cmd_features(&cfg),
        "tree" | "subnetwork" => cmd_tree(&cfg),
        _ => cmd_generate(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gbn {name}: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn sampler_config(cfg: &RunConfig) -> Result<SamplerConfig, CliError> {
    Ok(SamplerConfig {
        mode: Layer1Mode::Auto,
        threads: cfg.get("threads")?,
        validate: cfg.bool("validate")?,
        freeze_global: false,
        seed: cfg.get("seed")?,
    })
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.path("out").ok_or_else(|| CliError::Config("`out` is required".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("cannot write {}: {e}", path.display()))
}

fn load_vocab(cfg: &RunConfig, n_rows: usize) -> Result<Vocabulary, CliError> {
    match cfg.path("vocab") {
        Some(p) => {
            let v = Vocabulary::load(&p).map_err(|e| in_file(&p, e))?;
            if v.len() != n_rows {
                return Err(CliError::Data(format!("vocabulary has {} terms, expected {n_rows}", v.len())));
            }
            Ok(v)
        }
        None => Ok(Vocabulary::numbered(n_rows)),
    }
}

fn in_file(path: &Path, e: gbn::GbnError) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn load_data(cfg: &RunConfig, link: Link) -> Result<(Observations<f64>, Vocabulary), CliError> {
    cfg.check_modality(link)?;
    let path = cfg.path("data").ok_or_else(|| CliError::Config("`data` is required".into()))?;
    match cfg.format()? {
        DataFormat::Uci => {
            let vocab_path = cfg.path("vocab");
            let (vocab, m) = load_uci_bow(&path, vocab_path.as_deref()).map_err(|e| in_file(&path, e))?;
            let data = if link == Link::BernoulliPoisson {
                if !m.is_binary() {
                    info!("binarizing counts for the binary link");
                }
                Observations::Binary(m.binarize())
            } else {
                Observations::Counts(m)
            };
            Ok((data, vocab))
        }
        DataFormat::Csv => {
            let m = DenseNonnegMatrix::load_csv(&path).map_err(|e| in_file(&path, e))?;
            let vocab = load_vocab(cfg, m.n_rows())?;
            Ok((Observations::NonnegReal(m), vocab))
        }
    }
}

fn load_model(cfg: &RunConfig) -> Result<Network, CliError> {
    let path = cfg.path("model").ok_or_else(|| CliError::Config("`model` is required".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::Model(format!("cannot read {}: {e}", path.display())))?;
    Network::from_json(&text).map_err(CliError::model)
}

fn echo_lines(cfg: &RunConfig, prefix: &str) -> String {
    cfg.echo().iter().map(|(k, v)| format!("{prefix} {k}={v}\n")).collect()
}

fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.require(&["data", "out"])?;
    let link = cfg.link()?;
    let hyper = cfg.hyper()?;
    let early: u64 = cfg.get("early_stop")?;
    let schedule = TrainSchedule {
        t_max: cfg.get("tmax")?,
        k1max: cfg.get("k1max")?,
        burnin: cfg.list("b")?,
        post: cfg.list("c")?,
        seed: cfg.get("seed")?,
        threads: cfg.get("threads")?,
        mode: Layer1Mode::Auto,
        validate: cfg.bool("validate")?,
        early_stop_floor: (early > 0).then_some(early),
    };
    schedule.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (data, _) = load_data(cfg, link)?;
    let dir = out_dir(cfg)?;
    if schedule.threads > 1 && link == Link::PoissonCount {
        warn!("threads > 1: explicit layer-one sampling; runs are reproducible for a fixed seed but differ from single-threaded ones");
    }

    let log_path = dir.join("train_log.jsonl");
    let mut log = create(&log_path)?;
    let header = serde_json::json!({ "config": cfg.echo() });
    writeln!(log, "{header}").map_err(io_err(&log_path))?;
    let mut log_err = None;
    let out = train_layerwise(&data, link, hyper, &schedule, &mut |rec| {
        if log_err.is_none() {
            let line = serde_json::to_string(rec).expect("record serializes");
            if let Err(e) = writeln!(log, "{line}") {
                log_err = Some(e);
            }
        }
    })
    .map_err(CliError::data)?;
    if let Some(e) = log_err {
        return Err(io_err(&log_path)(e));
    }
    log.flush().map_err(io_err(&log_path))?;

    for (t, net) in out.networks.into_iter().enumerate() {
        let mut net = net;
        net.config = cfg.echo();
        let path = dir.join(format!("model_T{}.json", t + 1));
        let text = net.to_json().map_err(CliError::model)?;
        fs::write(&path, text).map_err(io_err(&path))?;
        println!("{}\twidths {:?}", path.display(), net.widths());
    }
    Ok(())
}

fn cmd_perplexity(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.require(&["data", "model", "out"])?;
    let burnin: usize = cfg.get("burnin")?;
    let collect: usize = cfg.get("collect")?;
    let thin: usize = cfg.get("thin")?;
    let fraction: f64 = cfg.get("train_fraction")?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::Config("`train_fraction` must lie in (0, 1)".into()));
    }
    let sampler = sampler_config(cfg)?;
    let network = load_model(cfg)?;
    if network.link != Link::PoissonCount {
        return Err(CliError::Config(format!("perplexity needs a count model, got {}", network.link)));
    }
    let (data, _) = load_data(cfg, network.link)?;
    let Observations::Counts(counts) = data else {
        unreachable!("count link loads counts")
    };
    let dir = out_dir(cfg)?;
    let mut rng = RngStream::substream(sampler.seed, 2);
    let split = split_tokens(&counts, fraction, &mut rng).map_err(CliError::data)?;
    let report = heldout_perplexity(&network, &split, burnin, collect, thin, sampler).map_err(CliError::data)?;

    let path = dir.join("perplexity.jsonl");
    let mut w = create(&path)?;
    let mut write = |v: serde_json::Value| writeln!(w, "{v}").map_err(io_err(&path));
    write(serde_json::json!({ "config": cfg.echo() }))?;
    for (i, p) in report.per_sample.iter().enumerate() {
        write(serde_json::json!({ "sample": i, "perplexity": p }))?;
    }
    write(serde_json::json!({ "summary": report }))?;
    w.flush().map_err(io_err(&path))?;
    println!("perplexity {:.4} ({} samples)", report.perplexity, report.samples);
    Ok(())
}

fn cmd_features(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.require(&["data", "model", "out"])?;
    let burnin: usize = cfg.get("burnin")?;
    let collect: usize = cfg.get("collect")?;
    let sampler = sampler_config(cfg)?;
    let network = load_model(cfg)?;
    let (data, _) = load_data(cfg, network.link)?;
    let dir = out_dir(cfg)?;
    let features = extract_features(&network, &data, burnin, collect, sampler).map_err(CliError::data)?;
    let path = dir.join("features.csv");
    let mut w = create(&path)?;
    w.write_all(echo_lines(cfg, "#").as_bytes()).map_err(io_err(&path))?;
    features.write_csv(&mut w).map_err(|e| CliError::Config(e.to_string()))?;
    w.flush().map_err(io_err(&path))?;
    let empty = features.empty.iter().filter(|&&e| e).count();
    if empty > 0 {
        warn!("{empty} empty documents; their rows are prior-driven");
    }
    println!("{}\t{} x {}", path.display(), features.rows.len(), network.width(1));
    Ok(())
}

fn node_labels(network: &Network, vocab: &Vocabulary, n: usize) -> Result<BTreeMap<NodeId, String>, CliError> {
    let mut labels = BTreeMap::new();
    for t in 1..=network.depth() {
        let proj = project(network, t).map_err(CliError::model)?;
        for k in 0..network.width(t) {
            let words: Vec<&str> = top_words(&proj, k, n)
                .map_err(CliError::model)?
                .into_iter()
                .map(|(v, _)| vocab.term(v))
                .collect();
            labels.insert(NodeId::new(t, k), format!("{}\n{}", NodeId::new(t, k), words.join(" ")));
        }
    }
    Ok(labels)
}

fn write_graph(cfg: &RunConfig, dir: &Path, stem: &str, spec: &TreeSpec, labels: &BTreeMap<NodeId, String>) -> Result<(), CliError> {
    let dot_path = dir.join(format!("{stem}.dot"));
    let dot = spec.to_dot(&|n| labels.get(&n).cloned().unwrap_or_else(|| n.to_string()));
    fs::write(&dot_path, format!("{}{dot}", echo_lines(cfg, "//"))).map_err(io_err(&dot_path))?;
    let json_path = dir.join(format!("{stem}.json"));
    let json = serde_json::json!({ "config": cfg.echo(), "graph": spec });
    fs::write(&json_path, serde_json::to_string_pretty(&json).expect("graph serializes")).map_err(io_err(&json_path))?;
    println!("{}\t{} nodes, {} edges", dot_path.display(), spec.nodes.len(), spec.edges.len());
    Ok(())
}

fn cmd_tree(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.require(&["model", "out", "roots", "tau"])?;
    let roots = cfg.roots()?;
    if cfg.command == "tree" && roots.len() != 1 {
        return Err(CliError::Config("`tree` takes exactly one root; use `subnetwork` for several".into()));
    }
    let tau = cfg.tau()?;
    let n: usize = cfg.get("top")?;
    let network = load_model(cfg)?;
    let vocab = load_vocab(cfg, network.n_rows())?;
    let dir = out_dir(cfg)?;
    let spec = extract_subnetwork(&network, &roots, &tau).map_err(|e| CliError::Config(e.to_string()))?;
    let labels = node_labels(&network, &vocab, n.min(5))?;
    write_graph(cfg, &dir, &cfg.command, &spec, &labels)?;

    let report_path = dir.join("topics.txt");
    let mut report = echo_lines(cfg, "#");
    for t in 1..=network.depth() {
        let proj = project(&network, t).map_err(CliError::model)?;
        report.push_str(&top_words_report(&proj, &vocab, n).map_err(CliError::model)?);
    }
    fs::write(&report_path, report).map_err(io_err(&report_path))?;
    Ok(())
}

fn cmd_generate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.require(&["model", "out"])?;
    let docs: usize = cfg.get("docs")?;
    let n: usize = cfg.get("top")?;
    let seed: u64 = cfg.get("seed")?;
    let scales: Vec<f64> = cfg.list("scales")?;
    let network = load_model(cfg)?;
    let vocab = load_vocab(cfg, network.n_rows())?;
    let dir = out_dir(cfg)?;
    let mut rng = RngStream::substream(seed, 3);
    let c = (!scales.is_empty()).then_some(scales.as_slice());
    let syn = generate_synthetic(&network, docs, c, &mut rng).map_err(CliError::model)?;

    if let Some(obs) = &syn.observations {
        let path = dir.join("synthetic.uci");
        let w = create(&path)?;
        obs.write_uci(w).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let path = dir.join("synthetic_top_words.txt");
    let mut text = echo_lines(cfg, "#");
    for (j, rows) in syn.top_rows(n).into_iter().enumerate() {
        let total: f64 = syn.rates[j].iter().sum();
        let words: Vec<&str> = rows.into_iter().map(|v| vocab.term(v)).collect();
        text.push_str(&format!("{j}\t{total:.4}\t{}\n", words.join(" ")));
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    println!("{}\t{docs} documents", path.display());
    Ok(())
}
