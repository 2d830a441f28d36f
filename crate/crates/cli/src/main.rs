use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mvd::depgraph::build_ipdg;
use mvd::depgraph::dot::ipdg_to_dot;
use mvd::frontend::LabelMode;
use mvd::pipeline::{
    analyze_paths, detect_sources, evaluate_scores, gen_corpus, read_jsonl, score_records, train,
    write_jsonl, AnalyzeOptions, LossNorm, TrainConfig, TrainedModel,
};
use mvd::slicer::{PoiConfig, SliceOptions};

#[derive(Parser)]
#[command(
    name = "mvd",
    version,
    about = "Statement-level memory vulnerability detector for C sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slice source files into labeled dependence graphs.
    Analyze {
        files: Vec<PathBuf>,
        /// Print each file's dependence graph in DOT format.
        #[arg(long)]
        emit_dot: bool,
        /// Write graphs as JSON lines here (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sensitive API names, one per line.
        #[arg(long)]
        api_list: Option<PathBuf>,
        /// Keep forward slices inside the function of the slicing point.
        #[arg(long)]
        no_interproc_forward: bool,
        /// Leave files without markers unlabeled instead of non-vulnerable.
        #[arg(long)]
        unlabeled: bool,
    },
    /// Generate the synthetic labeled corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a detector on analyzed graphs.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configuration's loss normalization.
        #[arg(long)]
        loss_norm: Option<LossNorm>,
    },
    /// Report statements predicted vulnerable.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Score labeled graphs and print metrics.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn poi_config(path: Option<&Path>) -> Result<PoiConfig> {
    Ok(match path {
        Some(p) => PoiConfig::from_file(p)?,
        None => PoiConfig::default(),
    })
}

fn analyze(
    files: &[PathBuf],
    emit_dot: bool,
    out: Option<&Path>,
    api_list: Option<&Path>,
    no_interproc_forward: bool,
    unlabeled: bool,
) -> Result<ExitCode> {
    if files.is_empty() {
        bail!("no input files");
    }
    let opts = AnalyzeOptions {
        poi: poi_config(api_list)?,
        slice: SliceOptions {
            interproc_forward: !no_interproc_forward,
        },
        label_mode: if unlabeled {
            LabelMode::Detection
        } else {
            LabelMode::Training
        },
    };
    let mut records = Vec::new();
    let mut failed = false;
    let stdout = std::io::stdout();
    for result in analyze_paths(files, &opts) {
        match result {
            Ok(a) => {
                for w in &a.warnings {
                    eprintln!("{}:{}: warning: {}", a.file, w.line, w.message);
                }
                if emit_dot {
                    writeln!(stdout.lock(), "{}", ipdg_to_dot(&build_ipdg(&a.program)))?;
                }
                records.extend(a.records());
            }
            Err(e) => {
                eprintln!("error: {e}");
                failed = true;
            }
        }
    }
    match out {
        Some(p) => {
            let f = std::fs::File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))?;
            write_jsonl(std::io::BufWriter::new(f), &records)?;
        }
        None if !emit_dot => write_jsonl(stdout.lock(), &records)?,
        None => {}
    }
    eprintln!("{} graphs from {} files", records.len(), files.len());
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            files,
            emit_dot,
            out,
            api_list,
            no_interproc_forward,
            unlabeled,
        } => analyze(
            &files,
            emit_dot,
            out.as_deref(),
            api_list.as_deref(),
            no_interproc_forward,
            unlabeled,
        ),
        Command::GenCorpus { out, n, seed } => {
            let manifest = gen_corpus(&out, n, seed)?;
            eprintln!("wrote {} files to {}", manifest.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            data,
            config,
            out,
            loss_norm,
        } => {
            let mut cfg = match config {
                Some(p) => TrainConfig::from_file(&p)?,
                None => TrainConfig::default(),
            };
            if let Some(n) = loss_norm {
                cfg.loss_norm = n;
            }
            let poi = poi_config(cfg.api_list.as_deref())?;
            let records = read_jsonl(&data)?;
            let model = train(&records, &cfg, poi)?;
            model.save(&out)?;
            eprintln!(
                "trained on {} graphs for {} epochs, final loss {:.6}",
                records.len(),
                model.loss_history.len(),
                model.loss_history.last().copied().unwrap_or(f64::NAN)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect { model, files, json } => {
            let model = TrainedModel::load(&model)?;
            let mut sources = Vec::new();
            let mut unreadable = Vec::new();
            for f in &files {
                match std::fs::read_to_string(f) {
                    Ok(text) => sources.push((f.display().to_string(), text)),
                    Err(e) => unreadable.push(format!("{}: {e}", f.display())),
                }
            }
            let report = detect_sources(&model, &sources);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for f in &report.findings {
                    println!(
                        "{}:{}: {} (p={:.3}, slice from line {})",
                        f.file, f.line, f.text, f.probability, f.origin_line
                    );
                }
            }
            for e in &report.errors {
                eprintln!("error: {}: {}", e.file, e.message);
            }
            for e in &unreadable {
                eprintln!("error: {e}");
            }
            Ok(if !report.errors.is_empty() || !unreadable.is_empty() {
                ExitCode::from(2)
            } else if report.findings.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Eval { model, data } => {
            let model = TrainedModel::load(&model)?;
            let records = read_jsonl(&data)?;
            let mut scores = score_records(&model, &records)?;
            fill_functions(&mut scores);
            let report = evaluate_scores(&scores)?;
            println!("statements: {}", report.statements);
            match report.function_recall {
                Some(r) => println!(
                    "functions: {}/{} detected, recall={r:.4}",
                    report.functions_detected, report.functions_vulnerable
                ),
                None => println!("functions: source files unavailable, recall not computed"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Looks up enclosing functions by re-reading the sources named in the graphs.
fn fill_functions(scores: &mut [mvd::pipeline::StatementScore]) {
    let files: std::collections::BTreeSet<String> = scores.iter().map(|s| s.file.clone()).collect();
    let paths: Vec<PathBuf> = files.iter().map(PathBuf::from).collect();
    let analyzed = analyze_paths(&paths, &AnalyzeOptions::default());
    let programs: std::collections::BTreeMap<String, _> = analyzed
        .into_iter()
        .flatten()
        .map(|a| (a.file.clone(), a.program))
        .collect();
    for s in scores {
        s.function = programs
            .get(&s.file)
            .and_then(|p| p.statement(s.id))
            .map(|st| st.function.clone());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
