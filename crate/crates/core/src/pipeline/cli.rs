use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::PipelineConfig;
use super::fixture::write_fixture;
use super::report::{cmd_report, render_table};
use super::stages::{AnnotationFormat, Pipeline, QueryFileFormat, StageRun, SubsetKind};
use super::workdir::Workdir;
use super::PipelineError;
use crate::corpus::LengthUnit;
use crate::metrics::Gain;

#[derive(Debug, Parser)]
#[command(name = "ssra", version, about = "Relevance-aware synthetic query pipeline")]
pub struct Cli {
    /// Pipeline config (JSON)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory; overrides paths.workdir
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use the offline mock models instead of endpoints
    #[arg(long, global = true)]
    pub mock: bool,
    /// Maximum in-flight model requests
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub concurrency: Option<u64>,
    /// Rerun stages even when their inputs are unchanged
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitArg {
    Chars,
    Tokens,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GainArg {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubsetArg {
    Binary,
    Balanced,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QueryFormatArg {
    Auto,
    Text,
    Corpus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnnotationFormatArg {
    Auto,
    Tsv,
    Decisions,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and copy labeled, unlabeled and document inputs
    Ingest,
    /// Corpus statistics (defaults to the ingested labeled corpus)
    Stats {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        docs: Option<PathBuf>,
        #[arg(long, value_enum)]
        unit: Option<UnitArg>,
    },
    /// Build documents from raw OCR/ASR items
    Rewrite,
    /// Deduplicate the labeled corpus on (query, label)
    Dedup,
    /// Pseudo-label unlabeled pairs and merge with the labeled corpus
    Stage1,
    /// Generate label-conditioned queries
    Synth,
    /// Keep synthetic queries whose predicted label matches the target
    FilterScore,
    /// Drop synthetic query pairs whose judged order contradicts their labels
    FilterPairwise,
    /// Merge refined synthetic queries into the stage-1 corpus
    Assemble,
    /// Binary (labels 0/3) or balanced (n per label) subset
    Subset {
        #[arg(value_enum)]
        kind: SubsetArg,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Records per label for the balanced subset
        #[arg(long)]
        n: Option<usize>,
    },
    /// nDCG@k of a run against qrels
    EvalRetrieval {
        #[arg(long)]
        qrels: Option<PathBuf>,
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        gain: Option<GainArg>,
    },
    /// Average precision at label thresholds 1, 2 and 3
    EvalPairclass {
        #[arg(long)]
        qrels: Option<PathBuf>,
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Duplicate rate of a query list (defaults to the synth output)
    Diversity {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        format: QueryFormatArg,
    },
    /// Target/judged label consistency (defaults to filter-score decisions)
    Consistency {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        format: AnnotationFormatArg,
    },
    /// Weighted InfoNCE loss and gradient norms for a batch file
    LossCheck {
        #[arg(long)]
        input: PathBuf,
    },
    /// Collect relevance rationales for labeled pairs
    Reasoning {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Consolidated report over all stage manifests
    Report,
    /// ingest -> dedup -> stage1 -> synth -> filters -> assemble -> eval
    Run,
    /// Write a synthetic offline fixture
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        docs: usize,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn print_runs(runs: &[StageRun]) {
    for run in runs {
        println!("{}", serde_json::to_string(run).expect("serializable"));
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let config = load_config(&cli)?;
    if let Command::Fixture { out, docs } = &cli.command {
        let summary = write_fixture(out, *docs, config.seed)?;
        println!("{}", serde_json::to_string(&summary).expect("serializable"));
        return Ok(());
    }

    let root = cli
        .workdir
        .clone()
        .or_else(|| config.paths.workdir.clone())
        .ok_or_else(|| PipelineError::Config("no workdir (--workdir or paths.workdir)".into()))?;
    let workdir = Workdir::open(root)?;
    if let Command::Report = cli.command {
        let report = cmd_report(&workdir)?;
        print!("{}", render_table(&report));
        return Ok(());
    }

    let _lock = workdir.lock()?;
    let mut config = config;
    if let Command::EvalRetrieval { gain: Some(g), .. } = &cli.command {
        config.eval.gain = match g {
            GainArg::Linear => Gain::Linear,
            GainArg::Exponential => Gain::Exponential,
        };
    }
    let pipeline = Pipeline {
        seed: config.seed,
        config,
        workdir,
        mock: cli.mock,
        concurrency: cli.concurrency.map(|c| c as usize),
        force: cli.force,
    };

    let run = match cli.command {
        Command::Ingest => pipeline.ingest()?,
        Command::Stats { input, docs, unit } => {
            let unit = unit.map(|u| match u {
                UnitArg::Chars => LengthUnit::Chars,
                UnitArg::Tokens => LengthUnit::WhitespaceTokens,
            });
            pipeline.stats(input.as_deref(), docs.as_deref(), unit)?
        }
        Command::Rewrite => pipeline.rewrite()?,
        Command::Dedup => pipeline.dedup()?,
        Command::Stage1 => pipeline.stage1()?,
        Command::Synth => pipeline.synth()?,
        Command::FilterScore => pipeline.filter_score()?,
        Command::FilterPairwise => pipeline.filter_pairwise()?,
        Command::Assemble => pipeline.assemble()?,
        Command::Subset { kind, input, n } => {
            let kind = match kind {
                SubsetArg::Binary => SubsetKind::Binary,
                SubsetArg::Balanced => SubsetKind::Balanced,
            };
            pipeline.subset(kind, input.as_deref(), n)?
        }
        Command::EvalRetrieval { qrels, run, k, .. } => pipeline.eval_retrieval(qrels.as_deref(), run.as_deref(), k)?,
        Command::EvalPairclass { qrels, run } => pipeline.eval_pairclass(qrels.as_deref(), run.as_deref())?,
        Command::Diversity { input, baseline, format } => {
            let format = match format {
                QueryFormatArg::Auto => QueryFileFormat::Auto,
                QueryFormatArg::Text => QueryFileFormat::Text,
                QueryFormatArg::Corpus => QueryFileFormat::Corpus,
            };
            pipeline.diversity(input.as_deref(), baseline.as_deref(), format)?
        }
        Command::Consistency { input, baseline, format } => {
            let format = match format {
                AnnotationFormatArg::Auto => AnnotationFormat::Auto,
                AnnotationFormatArg::Tsv => AnnotationFormat::Tsv,
                AnnotationFormatArg::Decisions => AnnotationFormat::Decisions,
            };
            pipeline.consistency(input.as_deref(), baseline.as_deref(), format)?
        }
        Command::LossCheck { input } => pipeline.loss_check(&input)?,
        Command::Reasoning { input } => pipeline.reasoning(input.as_deref())?,
        Command::Run => {
            print_runs(&pipeline.run_all()?);
            return Ok(());
        }
        Command::Report | Command::Fixture { .. } => unreachable!("handled above"),
    };
    print_runs(&[run]);
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures are printed to stderr as a JSON error document.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
