//! `propeval` command-line front end. Exit status is 0 on success, 1 when the
//! request was valid but failed, 2 on a usage error.

mod bound;
mod cost;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use propeval_core::game24::generate_dataset;
use propeval_core::harness::{
    load_tasks, load_transcripts, run_experiment, run_scaling, verify_answers, write_verdicts,
    HarnessConfig, HarnessError, ProposerSpec,
};
use propeval_core::metrics::{avg_step_time, index_tasks, scaling_csv, summarize, summary_csv, throughput};
use propeval_core::engine::Outcome;
use propeval_core::tasks::{LoadMode, TaskKind};

#[derive(Debug, Parser)]
#[command(name = "propeval", version, about = "Propose-evaluate reasoning experiments and analytic tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate Game-of-24 solutions for every multiset up to a bound.
    Gen24 {
        #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..=100))]
        max_value: u32,
        /// Output file for the solution records (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare DLM and LLM compute, memory and batch capacity.
    Cost(cost::CostArgs),
    /// Fano bound and entropy calculators.
    #[command(subcommand)]
    Bound(bound::BoundCommand),
    /// Run the propose-evaluate loop over a dataset.
    Run(RunArgs),
    /// Sweep the number of proposals per step and report accuracy.
    Scaling {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        m_min: Option<usize>,
        #[arg(long)]
        m_max: Option<usize>,
    },
    /// Check offline answers against a dataset.
    Verify {
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        /// Skip malformed instance records instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Summarize a transcript file.
    Report {
        #[arg(long)]
        transcripts: PathBuf,
        /// Dataset the transcripts came from; enables re-verified accuracy.
        #[arg(long, requires = "task")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        task: Option<TaskKind>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<TaskKind>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Proposals per step.
    #[arg(short = 'm', long = "proposals")]
    proposals: Option<usize>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Mock proposer accuracy; switches the proposer to the mock backend.
    #[arg(long)]
    p_correct: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> Result<HarnessConfig, HarnessError> {
        let mut cfg = match (&self.config, self.task) {
            (Some(path), _) => HarnessConfig::load(path)?,
            (None, Some(task)) => HarnessConfig::new(task),
            (None, None) => return Err(HarnessError::Usage("either --config or --task is required".into())),
        };
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.engine.seed = s;
        }
        if let Some(m) = self.proposals {
            cfg.engine.proposals_per_step = m;
        }
        if let Some(b) = self.beam_width {
            cfg.engine.beam_width = b;
        }
        if let Some(s) = self.max_steps {
            cfg.engine.max_steps = s;
        }
        if self.sample.is_some() {
            cfg.sample = self.sample;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(p) = self.p_correct {
            let latency = match cfg.proposer {
                ProposerSpec::Mock { latency, .. } => latency,
                _ => Default::default(),
            };
            cfg.proposer = ProposerSpec::Mock { p_correct: p, latency };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse `argv` (program name first) and run the command.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_max_level(tracing_subscriber::filter::LevelFilter::WARN)
        .try_init();
    let stdout = io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(e: io::Error) -> HarnessError {
    HarnessError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), HarnessError> {
    match cmd {
        Command::Gen24 { max_value, out: path } => {
            let report = match &path {
                Some(p) => {
                    let f = File::create(p).map_err(|e| HarnessError::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    let mut w = BufWriter::new(f);
                    let r = generate_dataset(max_value, Some(&mut w));
                    w.flush().map_err(|e| HarnessError::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    r
                }
                None => generate_dataset(max_value, Some(out)),
            }
            .map_err(|e| HarnessError::Domain(e.to_string()))?;
            eprintln!(
                "max_value {}: {} multisets, {} solvable, {} raw solutions, {} distinct step paths, {} distinct expressions, {} canonical solutions",
                report.max_value,
                report.multisets,
                report.solvable_multisets,
                report.raw_solutions,
                report.distinct_step_paths,
                report.distinct_expressions,
                report.canonical_solutions,
            );
            Ok(())
        }
        Command::Cost(args) => cost::run(&args, out),
        Command::Bound(b) => bound::run(&b, out),
        Command::Run(args) => {
            let cfg = args.config()?;
            let res = run_experiment(&cfg)?;
            out.write_all(summary_csv(&res.summary).as_bytes()).map_err(io_err)?;
            eprintln!("artifacts in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Scaling { run, m_min, m_max } => {
            let mut cfg = run.config()?;
            if let Some(m) = m_min {
                cfg.scaling.m_min = m;
            }
            if let Some(m) = m_max {
                cfg.scaling.m_max = m;
            }
            let res = run_scaling(&cfg)?;
            out.write_all(scaling_csv(&res.points).as_bytes()).map_err(io_err)?;
            Ok(())
        }
        Command::Verify {
            task,
            instances,
            answers,
            lenient,
        } => {
            let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
            let res = verify_answers(task, &instances, &answers, mode)?;
            write_verdicts(&res, &mut *out).map_err(io_err)?;
            let acc = res.accuracy.map_or("n/a".to_string(), |a| format!("{a:.6}"));
            writeln!(out, "accuracy {}/{} = {acc}", res.correct, res.verdicts.len()).map_err(io_err)?;
            Ok(())
        }
        Command::Report {
            transcripts,
            dataset,
            task,
        } => report(&transcripts, dataset, task, out),
    }
}

fn report(
    path: &std::path::Path,
    dataset: Option<PathBuf>,
    task: Option<TaskKind>,
    out: &mut dyn Write,
) -> Result<(), HarnessError> {
    if !path.is_file() {
        return Err(HarnessError::Usage(format!("transcripts {} not found", path.display())));
    }
    let runs = load_transcripts(path)?;
    if runs.is_empty() {
        writeln!(out, "no runs").map_err(io_err)?;
        return Ok(());
    }
    let domain = |e: propeval_core::metrics::MetricsError| HarnessError::Domain(e.to_string());
    let count = |o: Outcome| runs.iter().filter(|r| r.outcome == o).count();
    let mut text = format!(
        "runs {}\nsolved {}\nfailed {}\nexhausted {}\nerrors {}\nthroughput_per_min {:.6}\navg_step_time_s {:.6}\n",
        runs.len(),
        count(Outcome::Solved),
        count(Outcome::Failed),
        count(Outcome::Exhausted),
        runs.iter().filter(|r| r.error.is_some()).count(),
        throughput(&runs).map_err(domain)?,
        avg_step_time(&runs).map_err(domain)?,
    );
    if let (Some(dataset), Some(task)) = (dataset, task) {
        let mut cfg = HarnessConfig::new(task);
        cfg.dataset = Some(dataset);
        let tasks = load_tasks(&cfg)?;
        let s = summarize(&runs, &index_tasks(&tasks)).map_err(domain)?;
        text.push_str(&format!("accuracy {:.6}\nmismatches {}\n", s.accuracy, s.mismatches));
        if let Some(p) = s.pass_at_5 {
            text.push_str(&format!("pass_at_5 {p:.6}\n"));
        }
    }
    out.write_all(text.as_bytes()).map_err(io_err)
}
