use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use resumetune::evaluator::ModelTag;
use resumetune::llm_gateway::{HttpCompletionClient, ResumeParser};
use resumetune::pipeline::{self, ModelSpec, PipelineConfig, WorkdirLock};
use resumetune::PipelineError;

#[derive(Parser)]
#[command(name = "resumetune", version, about = "Build resume-parsing datasets and evaluate parsers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file; its keys override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// train,val,test fractions, e.g. 0.8,0.1,0.1
    #[arg(long, global = true, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    #[arg(long, global = true)]
    endpoint_url: Option<String>,
    /// Model id; repeat to evaluate several models.
    #[arg(long, global = true)]
    model: Vec<String>,
    #[arg(long, global = true)]
    alias_map: Option<PathBuf>,
    #[arg(long, global = true)]
    profiles: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of plain-text resumes.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Generate template resumes.
    Synth {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Merge, normalize, split and export the dataset.
    Build {
        #[arg(long)]
        stratify: bool,
        #[arg(long)]
        base_model: Option<String>,
    },
    /// Score models on the test split.
    Evaluate {
        /// Tag for models given with --model.
        #[arg(long, default_value = "fine-tuned")]
        tag: String,
        #[arg(long)]
        min_em: Option<f64>,
        #[arg(long)]
        min_f1: Option<f64>,
        #[arg(long)]
        min_bleu: Option<f64>,
        #[arg(long)]
        min_rouge: Option<f64>,
        #[arg(long)]
        min_overall: Option<f64>,
    },
    /// Compare rows from report.json or CSV files.
    Compare { inputs: Vec<PathBuf> },
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three comma-separated fractions".to_owned())
}

fn config(common: &Common, command: &Command) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::default();
    if let Some(v) = &common.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.ratios {
        cfg.ratios = v;
    }
    cfg.endpoint_url = common.endpoint_url.clone().or(cfg.endpoint_url);
    cfg.alias_map = common.alias_map.clone().or(cfg.alias_map);
    cfg.profiles_dir = common.profiles.clone().or(cfg.profiles_dir);
    match command {
        Command::Ingest { input } => cfg.input_dir = input.clone(),
        Command::Synth { count } => cfg.synth_count = count.unwrap_or(cfg.synth_count),
        Command::Build { stratify, base_model } => {
            cfg.stratify = *stratify;
            if let Some(m) = base_model {
                cfg.base_model_id = m.clone();
            }
        }
        Command::Evaluate {
            tag,
            min_em,
            min_f1,
            min_bleu,
            min_rouge,
            min_overall,
        } => {
            let tag: ModelTag = tag.parse()?;
            cfg.models = common.model.iter().map(|m| ModelSpec::new(m, tag)).collect();
            cfg.thresholds.em = *min_em;
            cfg.thresholds.f1 = *min_f1;
            cfg.thresholds.bleu = *min_bleu;
            cfg.thresholds.rouge = *min_rouge;
            cfg.thresholds.overall = *min_overall;
        }
        Command::Compare { .. } => {}
    }
    if let Some(path) = &common.config {
        cfg = cfg.overlay_file(path)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = config(&cli.common, &cli.command)?;
    let out = cfg.out_dir.as_path();
    if let Command::Compare { inputs } = &cli.command {
        let output = pipeline::cmd_compare(inputs, cli.common.out.as_deref())?;
        print!("{}", output.render_text());
        return Ok(());
    }
    let _lock = WorkdirLock::acquire(out)?;
    match &cli.command {
        Command::Ingest { .. } => {
            let input = cfg
                .input_dir
                .as_deref()
                .ok_or_else(|| PipelineError::Config("ingest needs --input".into()))?;
            let model = cli.common.model.first().map(String::as_str).unwrap_or("default");
            let client = HttpCompletionClient::new(cfg.endpoint(None, model)?)?;
            let parser = ResumeParser::new(Arc::new(client), model, cfg.aliases()?);
            let m = pipeline::cmd_ingest(input, out, &parser)?;
            println!("{} file(s): {} parsed, {} unchanged, {} failed", m.files, m.parsed, m.skipped, m.failed);
        }
        Command::Synth { .. } => {
            let m = pipeline::cmd_synth(out, &pipeline::synth_spec(&cfg)?)?;
            println!("{} synthetic record(s) with seed {}", m.count, m.seed);
        }
        Command::Build { .. } => {
            let m = pipeline::cmd_build(out, &cfg)?;
            println!(
                "{} record(s): train {}, val {}, test {} ({} duplicate(s) removed)",
                m.bundle.total, m.bundle.train, m.bundle.val, m.bundle.test, m.bundle.merge.duplicates_removed
            );
        }
        Command::Evaluate { .. } => {
            let (bundle, _) = pipeline::load_dataset(out)?;
            let samples = resumetune::evaluator::test_samples(&bundle)?;
            let models = pipeline::eval_models(&cfg, &samples)?;
            let embedder = cfg.embedder()?;
            let result =
                pipeline::cmd_evaluate(out, &models, embedder.as_ref(), cfg.max_parallel_requests, &cfg.thresholds);
            if let Ok(text) = std::fs::read_to_string(out.join("eval").join("report.txt")) {
                print!("{text}");
            }
            result?;
        }
        Command::Compare { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
