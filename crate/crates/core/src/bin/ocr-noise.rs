use std::fs;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ocr_noise::config::PipelineConfig;
use ocr_noise::confusion::estimate_confusion_with_stats;
use ocr_noise::manifest::Manifest;
use ocr_noise::noise::{resolve_uniform_rate, ExportFormat, NoiseKind, NoiseSpec, ParallelDataset};
use ocr_noise::{
    cluster_spans, detect_pairs, evaluate, export_dataset, filter_clusters, load_corpus, reuse, synthesize, train_lm, CharLM,
    ConfusionModel, Corpus, Decoder, Error, Result,
};

/// Estimate OCR noise from text reuse, synthesize training data, correct and evaluate.
#[derive(Parser)]
#[command(name = "ocr-noise", version)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find repeated spans in an OCR corpus.
    Detect(DetectArgs),
    /// Cluster detected pairs and keep clusters with enough spans.
    Cluster(ClusterArgs),
    /// Estimate a confusion model from reuse clusters.
    Estimate(EstimateArgs),
    /// Noise a clean corpus into a parallel dataset.
    Synth(SynthArgs),
    /// Train a character n-gram language model on a clean corpus.
    TrainLm(TrainLmArgs),
    /// Correct one token per line with the noisy-channel decoder.
    Correct(CorrectArgs),
    /// Compute CER/WER of hypotheses against references.
    Evaluate(EvaluateArgs),
    /// Run detect, cluster, estimate and synth in sequence.
    Pipeline(PipelineArgs),
}

#[derive(Args, Default)]
struct AlignFlags {
    #[arg(long)]
    seed_len: Option<usize>,
    #[arg(long)]
    x_drop: Option<i32>,
    #[arg(long)]
    min_span_len: Option<usize>,
    #[arg(long)]
    min_score: Option<i32>,
    #[arg(long)]
    overlap_merge: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    match_score: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    mismatch: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    gap: Option<i32>,
}

impl AlignFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let a = &mut cfg.align;
        set(&mut a.seed_len, self.seed_len);
        set(&mut a.x_drop, self.x_drop);
        set(&mut a.min_span_len, self.min_span_len);
        set(&mut a.min_score, self.min_score);
        set(&mut a.overlap_merge, self.overlap_merge);
        set(&mut a.match_score, self.match_score);
        set(&mut a.mismatch, self.mismatch);
        set(&mut a.gap, self.gap);
    }
}

#[derive(Args, Default)]
struct GroupingFlags {
    #[arg(long)]
    dist_threshold: Option<f64>,
    #[arg(long)]
    support_fraction: Option<f64>,
}

impl GroupingFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.grouping.dist_threshold, self.dist_threshold);
        set(&mut cfg.grouping.support_fraction, self.support_fraction);
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Uniform,
    Realistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Plain,
    CharSpaced,
}

#[derive(Args, Default)]
struct NoiseFlags {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Uniform noise rate (default: the model's average CER).
    #[arg(long)]
    rate: Option<f64>,
    /// Characters uniform noise draws from (default: ASCII letters and digits).
    #[arg(long)]
    replacement_set: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    seed: Option<u64>,
}

impl NoiseFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(k) = self.kind {
            cfg.noise.kind = match k {
                KindArg::Uniform => NoiseKind::Uniform,
                KindArg::Realistic => NoiseKind::Realistic,
            };
        }
        if let Some(f) = self.format {
            cfg.noise.format = match f {
                FormatArg::Plain => ExportFormat::Plain,
                FormatArg::CharSpaced => ExportFormat::CharSpaced,
            };
        }
        if self.rate.is_some() {
            cfg.noise.rate = self.rate;
        }
        if self.replacement_set.is_some() {
            cfg.noise.replacement_set.clone_from(&self.replacement_set);
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    align: AlignFlags,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    overlap_merge: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grouping: GroupingFlags,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output path; with `--format char-spaced`, `.src`/`.tgt` are appended.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseFlags,
}

#[derive(Args)]
struct TrainLmArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    lm: Option<PathBuf>,
    /// One token per line; stdin when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Corrected tokens; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    candidate_floor: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Hypotheses, one item per line.
    #[arg(long)]
    hyp: Option<PathBuf>,
    /// References, line-parallel to `--hyp`.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Alternatively, one `hyp<TAB>ref` pair per line.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
}

#[derive(Args)]
struct PipelineArgs {
    /// OCR-read corpus the noise model is estimated from.
    #[arg(long)]
    ocr_corpus: Option<PathBuf>,
    /// Clean corpus to noise.
    #[arg(long)]
    clean_corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[command(flatten)]
    align: AlignFlags,
    #[command(flatten)]
    grouping: GroupingFlags,
    #[command(flatten)]
    noise: NoiseFlags,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn pick(flag: &Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.clone())
        .ok_or_else(|| Error::validation(format!("missing required --{name} (or paths.{} in the config file)", name.replace('-', "_"))))
}

fn require_seed(cfg: &PipelineConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| Error::validation("this stage is randomized: pass --seed (or set seed in the config file)"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    apply_flags(&cli.command, &mut cfg);
    cfg.validate()?;
    log::info!("resolved config: {}", serde_json::to_string(&cfg).unwrap_or_default());

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Detect(a) => cmd_detect(a, &cfg),
        Command::Cluster(a) => cmd_cluster(a, &cfg),
        Command::Estimate(a) => cmd_estimate(a, &cfg),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::TrainLm(a) => cmd_train_lm(a, &cfg),
        Command::Correct(a) => cmd_correct(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg),
        Command::Pipeline(a) => cmd_pipeline(a, &cfg),
    })
}

fn apply_flags(command: &Command, cfg: &mut PipelineConfig) {
    match command {
        Command::Detect(a) => a.align.apply(cfg),
        Command::Cluster(a) => {
            set(&mut cfg.min_cluster_size, a.min_cluster_size);
            set(&mut cfg.align.overlap_merge, a.overlap_merge);
        }
        Command::Estimate(a) => a.grouping.apply(cfg),
        Command::Synth(a) => a.noise.apply(cfg),
        Command::TrainLm(a) => {
            set(&mut cfg.lm.order, a.order);
            set(&mut cfg.lm.k, a.k);
        }
        Command::Correct(a) => {
            set(&mut cfg.decoder.beam_width, a.beam_width);
            set(&mut cfg.decoder.lambda, a.lambda);
            set(&mut cfg.decoder.candidate_floor, a.candidate_floor);
        }
        Command::Evaluate(_) => {}
        Command::Pipeline(a) => {
            set(&mut cfg.min_cluster_size, a.min_cluster_size);
            a.align.apply(cfg);
            a.grouping.apply(cfg);
            a.noise.apply(cfg);
        }
    }
}

fn stage_detect(corpus_path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<String> {
    let corpus = load_corpus(corpus_path)?;
    log::info!("loaded {} documents", corpus.len());
    let pairs = detect_pairs(&corpus, &cfg.align)?;
    log::info!("found {} reuse pairs", pairs.len());
    reuse::write_pairs(out, &pairs)?;
    let mut m = Manifest::new("detect", None, cfg.align);
    let hash = corpus.content_hash();
    m.input_hash("corpus", hash.clone());
    m.output_file(out)?.detail("pair_count", pairs.len());
    m.write_for(out)?;
    Ok(hash)
}

fn stage_cluster(pairs_path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let pairs = reuse::read_pairs(pairs_path)?;
    let clusters = cluster_spans(&pairs, &cfg.align);
    let total = clusters.len();
    let kept = filter_clusters(clusters, cfg.min_cluster_size);
    log::info!("{} clusters, {} with at least {} spans", total, kept.len(), cfg.min_cluster_size);
    reuse::write_clusters(out, &kept)?;
    let mut m = Manifest::new(
        "cluster",
        None,
        serde_json::json!({ "min_cluster_size": cfg.min_cluster_size, "overlap_merge": cfg.align.overlap_merge }),
    );
    m.input_file("pairs", pairs_path)?;
    m.output_file(out)?.detail("clusters_before_filter", total).detail("cluster_count", kept.len());
    m.write_for(out)?;
    Ok(())
}

fn stage_estimate(clusters_path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let clusters = reuse::read_clusters(clusters_path)?;
    let (model, stats) = estimate_confusion_with_stats(&clusters, &cfg.grouping);
    if model.is_empty() {
        log::warn!("no replacement evidence found; the confusion model is empty");
    }
    log::info!(
        "{} clusters, {} word groups, {} aligned characters, average CER {:.4}",
        stats.clusters,
        stats.word_groups,
        stats.aligned_chars,
        model.avg_cer()
    );
    model.save(out)?;
    let mut m = Manifest::new("estimate", None, cfg.grouping);
    m.input_file("clusters", clusters_path)?;
    m.output_file(out)?.detail("stats", stats).detail("empty_model", model.is_empty());
    m.write_for(out)?;
    Ok(())
}

fn stage_synth(corpus_path: &Path, model_path: Option<&Path>, out: &Path, cfg: &PipelineConfig) -> Result<(String, Vec<PathBuf>)> {
    let seed = require_seed(cfg)?;
    let corpus: Corpus = load_corpus(corpus_path)?;
    let model = model_path.map(ConfusionModel::load).transpose()?;
    let spec = NoiseSpec { kind: cfg.noise.kind, rate: cfg.noise.rate, replacement_set: cfg.replacement_set(), seed };
    let dataset: ParallelDataset = synthesize(&corpus, &spec, model.as_ref())?;
    let files = export_dataset(&dataset, cfg.noise.format, out)?;
    log::info!("wrote {} pairs", dataset.len());

    let mut m = Manifest::new("synth", Some(seed), &spec);
    m.input_hash("corpus", corpus.content_hash());
    if let Some(p) = model_path {
        m.input_file("model", p)?;
    }
    for f in &files {
        m.output_file(f)?;
    }
    m.detail("pair_count", dataset.len()).detail("format", cfg.noise.format);
    if spec.kind == NoiseKind::Uniform {
        m.detail("effective_rate_nominal", resolve_uniform_rate(&spec, model.as_ref())?);
    }
    m.write_for(out)?;
    Ok((corpus.content_hash(), files))
}

fn cmd_detect(a: &DetectArgs, cfg: &PipelineConfig) -> Result<()> {
    let corpus = pick(&a.corpus, &cfg.paths.corpus, "corpus")?;
    let out = pick(&a.out, &cfg.paths.out, "out")?;
    stage_detect(&corpus, &out, cfg).map(drop)
}

fn cmd_cluster(a: &ClusterArgs, cfg: &PipelineConfig) -> Result<()> {
    let pairs = pick(&a.pairs, &cfg.paths.pairs, "pairs")?;
    let out = pick(&a.out, &cfg.paths.out, "out")?;
    stage_cluster(&pairs, &out, cfg)
}

fn cmd_estimate(a: &EstimateArgs, cfg: &PipelineConfig) -> Result<()> {
    let clusters = pick(&a.clusters, &cfg.paths.clusters, "clusters")?;
    let out = pick(&a.out, &cfg.paths.out, "out")?;
    stage_estimate(&clusters, &out, cfg)
}

fn cmd_synth(a: &SynthArgs, cfg: &PipelineConfig) -> Result<()> {
    let corpus = pick(&a.corpus, &cfg.paths.corpus, "corpus")?;
    let out = pick(&a.out, &cfg.paths.out, "out")?;
    let model = a.model.clone().or_else(|| cfg.paths.model.clone());
    stage_synth(&corpus, model.as_deref(), &out, cfg).map(drop)
}

fn cmd_train_lm(a: &TrainLmArgs, cfg: &PipelineConfig) -> Result<()> {
    let corpus_path = pick(&a.corpus, &cfg.paths.corpus, "corpus")?;
    let out = pick(&a.out, &cfg.paths.out, "out")?;
    let corpus = load_corpus(&corpus_path)?;
    let lm = train_lm(&corpus, cfg.lm.order, cfg.lm.k)?;
    lm.save(&out)?;
    let mut m = Manifest::new("train-lm", None, cfg.lm);
    m.input_hash("corpus", corpus.content_hash());
    m.output_file(&out)?;
    m.write_for(&out)?;
    Ok(())
}

fn cmd_correct(a: &CorrectArgs, cfg: &PipelineConfig) -> Result<()> {
    let model_path = pick(&a.model, &cfg.paths.model, "model")?;
    let lm_path = pick(&a.lm, &cfg.paths.lm, "lm")?;
    let model = ConfusionModel::load(&model_path)?;
    let lm = CharLM::load(&lm_path)?;
    let decoder = Decoder::new(&model, &lm, cfg.decoder)?;

    let input = a.input.clone().or_else(|| cfg.paths.input.clone());
    let text = match &input {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
            s
        }
    };
    let lines: Vec<&str> = text.lines().collect();
    let corrected: Vec<String> = lines.par_iter().map(|t| decoder.correct(t).text).collect();

    let out = a.out.clone().or_else(|| cfg.paths.out.clone());
    match &out {
        Some(p) => {
            write_lines(p, &corrected)?;
            let mut m = Manifest::new("correct", None, cfg.decoder);
            m.input_file("model", &model_path)?.input_file("lm", &lm_path)?;
            if let Some(i) = &input {
                m.input_file("input", i)?;
            }
            m.output_file(p)?.detail("token_count", corrected.len());
            m.write_for(p)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            for line in &corrected {
                writeln!(w, "{line}").map_err(|e| Error::io("<stdout>", e))?;
            }
            w.flush().map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    io::BufReader::new(file).lines().collect::<std::io::Result<Vec<_>>>().map_err(|e| Error::io(path, e))
}

fn cmd_evaluate(a: &EvaluateArgs, cfg: &PipelineConfig) -> Result<()> {
    let tsv = a.tsv.clone().or_else(|| cfg.paths.tsv.clone());
    let (hyps, refs, mut manifest) = match tsv {
        Some(p) => {
            let mut hyps = Vec::new();
            let mut refs = Vec::new();
            for (i, line) in read_lines(&p)?.into_iter().enumerate() {
                let (h, r) =
                    line.split_once('\t').ok_or_else(|| Error::validation(format!("{}:{}: expected hyp<TAB>ref", p.display(), i + 1)))?;
                hyps.push(h.to_owned());
                refs.push(r.to_owned());
            }
            let mut m = Manifest::new("evaluate", None, serde_json::Value::Null);
            m.input_file("tsv", &p)?;
            (hyps, refs, m)
        }
        None => {
            let hp = pick(&a.hyp, &cfg.paths.hyp, "hyp")?;
            let rp = pick(&a.reference, &cfg.paths.reference, "ref")?;
            let mut m = Manifest::new("evaluate", None, serde_json::Value::Null);
            m.input_file("hyp", &hp)?.input_file("ref", &rp)?;
            (read_lines(&hp)?, read_lines(&rp)?, m)
        }
    };
    let report = evaluate(&hyps, &refs)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::validation(e.to_string()))?;
    if let Some(out) = a.out.clone().or_else(|| cfg.paths.out.clone()) {
        fs::write(&out, format!("{json}\n")).map_err(|e| Error::io(&out, e))?;
        manifest.output_file(&out)?;
        manifest.write_for(&out)?;
    }
    match a.format {
        ReportFormat::Json => println!("{json}"),
        ReportFormat::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

fn cmd_pipeline(a: &PipelineArgs, cfg: &PipelineConfig) -> Result<()> {
    let ocr = pick(&a.ocr_corpus, &cfg.paths.ocr_corpus, "ocr-corpus")?;
    let clean = pick(&a.clean_corpus, &cfg.paths.clean_corpus, "clean-corpus")?;
    let out_dir = pick(&a.out_dir, &cfg.paths.out_dir, "out-dir")?;
    require_seed(cfg)?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let pairs = out_dir.join("pairs.jsonl");
    let clusters = out_dir.join("clusters.jsonl");
    let model = out_dir.join("model.json");
    let dataset = out_dir.join(match cfg.noise.format {
        ExportFormat::Plain => "dataset.tsv",
        ExportFormat::CharSpaced => "dataset",
    });
    let ocr_hash = stage_detect(&ocr, &pairs, cfg)?;
    stage_cluster(&pairs, &clusters, cfg)?;
    stage_estimate(&clusters, &model, cfg)?;
    let (clean_hash, dataset_files) = stage_synth(&clean, Some(&model), &dataset, cfg)?;

    // Record the resolved configuration minus the worker count, which does
    // not influence any output.
    let mut resolved = cfg.clone();
    resolved.workers = None;
    resolved.paths = Default::default();
    let mut m = Manifest::new("pipeline", cfg.seed, &resolved);
    m.input_hash("ocr_corpus", ocr_hash).input_hash("clean_corpus", clean_hash);
    for f in [&pairs, &clusters, &model].into_iter().chain(&dataset_files) {
        m.output_file(f)?;
    }
    let config_path = out_dir.join("pipeline.toml");
    let text = toml::to_string(&resolved).map_err(|e| Error::validation(e.to_string()))?;
    fs::write(&config_path, text).map_err(|e| Error::io(&config_path, e))?;
    m.output_file(&config_path)?;
    m.write_for(out_dir.join("pipeline"))?;
    Ok(())
}
