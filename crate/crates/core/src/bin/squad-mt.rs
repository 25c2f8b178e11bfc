use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use squad_mt::backend::{BackendConfig, BackendKind};
use squad_mt::dataset::{dataset_stats, parse_dataset_with, ParseOptions};
use squad_mt::eval::{aggregate_review, sample_review, score, LangProfile, PredictionSet, ReviewSheet};
use squad_mt::pipeline::{estimate_characters, PipelineOptions, StripMode};
use squad_mt::run::{read_manifest, resume_run, start_run, RunMode, RunOverrides, RunReport, RunSpec};
use squad_mt::synth::{synthesize, SynthConfig};
use squad_mt::Lang;

/// Exit status for a completed run whose retention is below the floor.
const EXIT_LOW_RETENTION: u8 = 3;

#[derive(Parser)]
#[command(name = "squad-mt", version, about = "Translate SQuAD2.0-style datasets and carry answer spans across")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a dataset into another language.
    Translate(RunArgs),
    /// Translate a dataset and the result back to the source language.
    Backtranslate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the target-language leg here.
        #[arg(long)]
        intermediate: Option<PathBuf>,
    },
    /// Continue an interrupted run from its run directory.
    Resume {
        #[arg(long)]
        run_dir: PathBuf,
        /// Refuse unless the recorded run targets this language.
        #[arg(long)]
        target_lang: Option<Lang>,
        #[arg(long)]
        source_lang: Option<Lang>,
        #[arg(long)]
        backend: Option<BackendKind>,
        #[arg(long, default_value_t = 0.0)]
        min_retention: f64,
        #[arg(long)]
        yes: bool,
    },
    /// Print dataset statistics as JSON.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        squad1_compat: bool,
    },
    /// Score a prediction file (JSON map of id to answer) against a dataset.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Language of the answers; selects the article list.
        #[arg(long, default_value = "en")]
        lang: String,
        /// Print the full report, per-question scores included, as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Draw questions for manual error review into a TSV sheet.
    SampleReview {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        translated: PathBuf,
        #[arg(short = 'n', long, default_value_t = 321)]
        questions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = squad_mt::eval::DEFAULT_PASSAGES_PER_ARTICLE)]
        passages_per_article: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Count the categories of a reviewed sheet.
    AggregateReview {
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic dataset for testing.
    Synth {
        #[arg(long)]
        output: PathBuf,
        /// "dev" (about 12k questions) or "small".
        #[arg(long, default_value = "dev")]
        scale: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Holds the run manifest; defaults to `<output>.run`.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Translation cache; defaults to `<run-dir>/cache`.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    source_lang: Option<Lang>,
    #[arg(long)]
    target_lang: Option<Lang>,
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Environment variable holding the service API key.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    mock_seed: Option<u64>,
    #[arg(long)]
    mock_drop: Option<f64>,
    #[arg(long)]
    mock_split: Option<f64>,
    #[arg(long)]
    mock_swap: Option<f64>,
    #[arg(long)]
    mock_punct: Option<f64>,
    /// Make the mock reverse word order (its stand-in for translation).
    #[arg(long)]
    mock_reverse: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Trailing punctuation to remove from answers: all, or only what the
    /// source answer did not end with (added).
    #[arg(long)]
    strip_punctuation: Option<StripMode>,
    /// Exit with a failure status when fewer questions survive.
    #[arg(long)]
    min_retention: Option<f64>,
    /// Accept input without is_impossible (SQuAD1.1).
    #[arg(long)]
    squad1_compat: bool,
    /// Leave answer_pieces out of the output.
    #[arg(long)]
    no_pieces: bool,
    /// Skip the cost confirmation for the paid service.
    #[arg(long)]
    yes: bool,
}

/// Settings file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    source_lang: Option<Lang>,
    target_lang: Option<Lang>,
    jobs: Option<usize>,
    batch_size: Option<usize>,
    strip_punctuation: Option<StripMode>,
    min_retention: Option<f64>,
    extended: Option<bool>,
    cache_dir: Option<PathBuf>,
    backend: Option<BackendConfig>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn build_spec(mode: RunMode, a: &RunArgs, intermediate: Option<PathBuf>) -> Result<(RunSpec, PathBuf, f64)> {
    let cfg = load_config(a.config.as_deref())?;
    let source_lang = a.source_lang.clone().or(cfg.source_lang).unwrap_or_else(|| "en".parse().unwrap());
    let Some(target_lang) = a.target_lang.clone().or(cfg.target_lang) else {
        bail!("--target-lang is required (or target_lang in the config file)");
    };
    let mut options = PipelineOptions::new(source_lang, target_lang);
    if let Some(j) = a.jobs.or(cfg.jobs) {
        options.jobs = j.max(1);
    }
    if let Some(b) = a.batch_size.or(cfg.batch_size) {
        options.batch_size = b.max(1);
    }
    if let Some(s) = a.strip_punctuation.or(cfg.strip_punctuation) {
        options.strip = s;
    }

    let mut backend = cfg.backend.unwrap_or_default();
    if let Some(k) = a.backend {
        backend.kind = k;
    }
    if let Some(e) = &a.endpoint {
        backend.endpoint = e.clone();
    }
    if let Some(e) = &a.api_key_env {
        backend.api_key_env = e.clone();
    }
    backend.max_concurrent = options.jobs;
    let m = &mut backend.mock;
    if let Some(s) = a.mock_seed {
        m.seed = s;
    }
    if let Some(p) = a.mock_drop {
        m.drop = p;
    }
    if let Some(p) = a.mock_split {
        m.split = p;
    }
    if let Some(p) = a.mock_swap {
        m.swap = p;
    }
    if let Some(p) = a.mock_punct {
        m.punct = p;
    }
    m.reverse_words |= a.mock_reverse;

    let run_dir = a.run_dir.clone().unwrap_or_else(|| {
        let mut name = a.output.file_name().unwrap_or_default().to_os_string();
        name.push(".run");
        a.output.with_file_name(name)
    });
    let spec = RunSpec {
        mode,
        input: a.input.clone(),
        output: a.output.clone(),
        intermediate,
        options,
        backend,
        extended: !a.no_pieces && cfg.extended.unwrap_or(true),
        squad1_compat: a.squad1_compat,
        cache_dir: a.cache_dir.clone().or(cfg.cache_dir),
    };
    let floor = a.min_retention.or(cfg.min_retention).unwrap_or(0.0);
    Ok((spec, run_dir, floor))
}

/// Prints the cost estimate for the paid service and asks for confirmation.
fn confirm_cost(spec: &RunSpec, yes: bool) -> Result<()> {
    if spec.backend.kind != BackendKind::Service {
        return Ok(());
    }
    let raw = std::fs::read(&spec.input).with_context(|| format!("reading {}", spec.input.display()))?;
    let d = parse_dataset_with(&raw, ParseOptions { squad1_compat: spec.squad1_compat })?;
    let per_leg = estimate_characters(&d);
    let legs = if spec.mode == RunMode::Backtranslate { 2 } else { 1 };
    eprintln!(
        "about {} characters will be sent to {} ({} leg(s), cached requests are free)",
        per_leg * legs,
        spec.backend.endpoint,
        legs
    );
    if yes {
        return Ok(());
    }
    if !std::io::stdin().is_terminal() {
        bail!("refusing to start a paid run without confirmation; pass --yes");
    }
    eprint!("proceed? [y/N] ");
    std::io::stderr().flush()?;
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line)?;
    if !matches!(line.trim(), "y" | "Y" | "yes") {
        bail!("aborted");
    }
    Ok(())
}

fn print_report(report: &RunReport) {
    for (i, leg) in report.legs.iter().enumerate() {
        println!(
            "leg {} {}→{}: kept {}/{} questions ({:.1}%), answerable {}/{}; lost: {} missing span, {} emptied by punctuation stripping, {} decode failure",
            i + 1,
            leg.source_lang,
            leg.target_lang,
            leg.retained_questions,
            leg.input_questions,
            100.0 * leg.retained_fraction,
            leg.answerable_retained,
            leg.answerable_input,
            leg.losses.missing_span,
            leg.losses.empty_after_stripping,
            leg.losses.decode_failure,
        );
        println!(
            "  segments missing {}/{}, discontinuous answers {}",
            leg.segments_missing, leg.segments_total, leg.discontinuous_answers
        );
    }
    println!(
        "overall retention {:.1}%; cache {} hits, {} misses",
        100.0 * report.retained_fraction(),
        report.cache_hits,
        report.cache_misses
    );
}

fn finish(report: &RunReport, floor: f64) -> ExitCode {
    print_report(report);
    if report.retained_fraction() < floor {
        eprintln!("retention {:.4} is below the floor {floor}", report.retained_fraction());
        ExitCode::from(EXIT_LOW_RETENTION)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Translate(a) => {
            let (spec, run_dir, floor) = build_spec(RunMode::Translate, &a, None)?;
            confirm_cost(&spec, a.yes)?;
            let report = start_run(&run_dir, &spec)?;
            Ok(finish(&report, floor))
        }
        Command::Backtranslate { run: a, intermediate } => {
            let (spec, run_dir, floor) = build_spec(RunMode::Backtranslate, &a, intermediate)?;
            confirm_cost(&spec, a.yes)?;
            let report = start_run(&run_dir, &spec)?;
            Ok(finish(&report, floor))
        }
        Command::Resume { run_dir, target_lang, source_lang, backend, min_retention, yes } => {
            let manifest = read_manifest(&run_dir)?;
            confirm_cost(&manifest.spec, yes)?;
            let overrides = RunOverrides { source_lang, target_lang, backend, ..Default::default() };
            let report = resume_run(&run_dir, &overrides)?;
            Ok(finish(&report, min_retention))
        }
        Command::Stats { input, squad1_compat } => {
            let raw = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let d = parse_dataset_with(&raw, ParseOptions { squad1_compat })?;
            d.validate()?;
            println!("{}", serde_json::to_string_pretty(&dataset_stats(&d))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { dataset, predictions, lang, json } => {
            let raw = std::fs::read(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let d = parse_dataset_with(&raw, ParseOptions::default())?;
            let preds = PredictionSet::from_json(
                &std::fs::read(&predictions).with_context(|| format!("reading {}", predictions.display()))?,
            )?;
            let r = score(&d, &preds, &LangProfile::for_lang(&lang));
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("exact {:.4}  f1 {:.4}  total {}", r.exact, r.f1, r.total);
                if let (Some(em), Some(f1)) = (r.has_ans_exact, r.has_ans_f1) {
                    println!("answerable   exact {em:.4}  f1 {f1:.4}  total {}", r.has_ans_total);
                }
                if let (Some(em), Some(f1)) = (r.no_ans_exact, r.no_ans_f1) {
                    println!("unanswerable exact {em:.4}  f1 {f1:.4}  total {}", r.no_ans_total);
                }
            }
            if !r.missing.is_empty() {
                eprintln!("warning: {} question(s) have no prediction and score 0", r.missing.len());
            }
            if !r.unknown.is_empty() {
                eprintln!("warning: {} prediction(s) for unknown ids ignored", r.unknown.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SampleReview { source, translated, questions, seed, passages_per_article, output } => {
            let read = |p: &Path| -> Result<_> {
                let raw = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(parse_dataset_with(&raw, ParseOptions::default())?)
            };
            let sheet = sample_review(&read(&source)?, &read(&translated)?, questions, seed, passages_per_article)?;
            let mut buf = Vec::new();
            sheet.write_tsv(&mut buf)?;
            squad_mt::run::write_atomic(&output, &buf)?;
            println!("wrote {} rows to {}", sheet.rows.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::AggregateReview { sheet, json } => {
            let f = std::fs::File::open(&sheet).with_context(|| format!("opening {}", sheet.display()))?;
            let report = aggregate_review(&ReviewSheet::read_tsv(f)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { output, scale, seed } => {
            let mut cfg = match scale.as_str() {
                "dev" => SynthConfig::dev_scale(),
                "small" => SynthConfig::small(),
                other => bail!("unknown scale {other:?} (expected dev or small)"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let d = synthesize(&cfg);
            squad_mt::run::write_atomic(&output, &squad_mt::serialize_dataset(&d, false))?;
            println!("wrote {} questions to {}", d.qas().count(), output.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
