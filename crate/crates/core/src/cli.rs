//! Command-line front end: train, classify, evaluate, feedback, gen-corpus
//! and inspect. Exit codes are 0 on success, 1 on usage errors and 2 on data
//! errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    gen_corpus, load_corpus, load_state, save_corpus, save_state, CorpusError, CorpusSpec, Label,
    FORMAT_VERSION,
};
use crate::encoding::Codebook;
use crate::immune::{classify, ClassifierState, ImmuneError, Params, Verdict};
use crate::repertoire::{build_microorganism, CellRole, RepertoireError};
use crate::training::{normal_step, relearn, test_evaluate, train, FeedbackEvent, TrainingError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Immune(#[from] ImmuneError),
    #[error(transparent)]
    Repertoire(#[from] RepertoireError),
    #[error("{path}: line {line}: {reason}")]
    Events {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Immune(ImmuneError::InvalidParams(_)) => 1,
            _ => 2,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "immunofilter", version, about = "Immune-inspired spam filter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a model from a labeled JSONL corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Label messages and print one JSON verdict per line.
    Classify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Learn from the verdicts and save the state (needed for feedback).
        #[arg(long)]
        update: bool,
    },
    /// Score the model on a labeled corpus and print metrics as JSON.
    Evaluate {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Save the weights and populations updated during the run.
        #[arg(long)]
        update: bool,
    },
    /// Apply user corrections from a JSONL file of {message_id, given_label}.
    Feedback {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Counter value given to the cells behind each wrong verdict.
        #[arg(long, default_value_t = 0)]
        reset_value: u64,
    },
    /// Write a synthetic labeled corpus.
    GenCorpus {
        #[arg(long)]
        seed: u64,
        /// JSON corpus spec; omitted fields take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print parameters, library sizes and population statistics as JSON.
    Inspect {
        #[arg(long)]
        state: PathBuf,
    },
}

/// Model parameters. Defaults match [`Params::default`].
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Content activation threshold in bits.
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..))]
    r: u32,
    /// Sender threshold in bits; exact full-length match when omitted.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    r_pattern: Option<u32>,
    /// Initial cell lifetime, in encounters.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    lifetime: u32,
    /// Lifetime gained by a stimulated cell.
    #[arg(long, default_value_t = 4)]
    reward: u32,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    b_cells: u32,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..))]
    helper_t: u32,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..))]
    controller_t: u32,
    /// Clones per activated B cell.
    #[arg(long, default_value_t = 3)]
    clones: u32,
    /// Most peptides joined into one receptor.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    k_max: u32,
    /// Replace cells that matched nothing after this many encounters.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    prune_after: Option<u32>,
    /// Classifications kept for feedback.
    #[arg(long, default_value_t = 10_000)]
    replay_capacity: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConfigArgs {
    fn params(&self) -> Params {
        Params {
            r: self.r as usize,
            r_pattern: self.r_pattern.map(|v| v as usize),
            lifetime: self.lifetime,
            reward: self.reward,
            b_cells: self.b_cells as usize,
            helper_t: self.helper_t as usize,
            controller_t: self.controller_t as usize,
            clones: self.clones as usize,
            k_max: self.k_max as usize,
            prune_after: self.prune_after,
            replay_capacity: self.replay_capacity as usize,
            seed: self.seed,
        }
    }
}

/// One line of `classify` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    pub label: Label,
    pub route: String,
    pub helper_stimulations: u32,
    pub controller_stimulations: u32,
    pub evidence: Vec<u64>,
}

impl VerdictRecord {
    pub fn new(id: impl Into<String>, v: &Verdict) -> Self {
        Self {
            id: id.into(),
            label: v.label,
            route: v.route.as_str().to_string(),
            helper_stimulations: v.signal_tally.helper_stimulations,
            controller_stimulations: v.signal_tally.controller_stimulations,
            evidence: v.evidence.iter().map(|c| c.0).collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdict records always serialize")
    }
}

#[derive(Debug, Deserialize)]
struct FeedbackLine {
    message_id: String,
    given_label: Label,
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Train {
            corpus,
            out: path,
            config,
        } => {
            let params = config.params();
            params.validate()?;
            let messages = load_corpus(&corpus)?;
            let (state, report) = train(&messages, Codebook::builtin(), params)?;
            save_state(&state, &path)?;
            let summary = serde_json::json!({
                "state": path.display().to_string(),
                "report": report,
                "macrophages": state.macrophages().len(),
                "b_cells": state.b_cells().len(),
                "helper_t": state.helper_t().len(),
                "controller_t": state.controller_t().len(),
            });
            emit(out, &summary)
        }
        Command::Classify {
            state: state_path,
            input,
            out: out_path,
            update,
        } => {
            let mut state = load_state(&state_path)?;
            let messages = load_corpus(&input)?;
            let mut lines = String::new();
            for message in &messages {
                let verdict = if update {
                    normal_step(message, &mut state)?
                } else {
                    classify(&build_microorganism(message, state.codebook())?, &state)?
                };
                lines.push_str(&VerdictRecord::new(&message.id, &verdict).to_json_line());
                lines.push('\n');
            }
            match out_path {
                Some(p) => std::fs::write(&p, lines).map_err(|e| CliError::io(&p, e))?,
                None => out
                    .write_all(lines.as_bytes())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
            }
            if update {
                save_state(&state, &state_path)?;
            }
            Ok(())
        }
        Command::Evaluate {
            state: state_path,
            corpus,
            update,
        } => {
            let mut state = load_state(&state_path)?;
            let messages = load_corpus(&corpus)?;
            let (metrics, _) = test_evaluate(&messages, &mut state)?;
            if update {
                save_state(&state, &state_path)?;
            }
            emit(out, &metrics)
        }
        Command::Feedback {
            state: state_path,
            events,
            reset_value,
        } => {
            let mut state = load_state(&state_path)?;
            let lines = read_feedback(&events)?;
            let (mut processed, mut confirmations, mut library_changes, mut weight_updates) =
                (0, 0, 0, 0);
            for line in lines {
                match FeedbackEvent::from_log(&state, &line.message_id, line.given_label)? {
                    None => confirmations += 1,
                    Some(event) => {
                        let report =
                            relearn(std::slice::from_ref(&event), reset_value, &mut state)?;
                        processed += report.processed;
                        library_changes += report.library_changes;
                        weight_updates += report.weight_updates;
                    }
                }
            }
            save_state(&state, &state_path)?;
            let summary = serde_json::json!({
                "corrections": processed,
                "confirmations": confirmations,
                "library_changes": library_changes,
                "weight_updates": weight_updates,
            });
            emit(out, &summary)
        }
        Command::GenCorpus {
            seed,
            spec,
            out: path,
        } => {
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
                    serde_json::from_str::<CorpusSpec>(&text).map_err(|e| CliError::Events {
                        path: p.display().to_string(),
                        line: e.line(),
                        reason: e.to_string(),
                    })?
                }
                None => CorpusSpec::default(),
            };
            save_corpus(&path, &gen_corpus(seed, &spec))?;
            Ok(())
        }
        Command::Inspect { state } => {
            let state = load_state(&state)?;
            emit(out, &inspect(&state))
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports always serialize");
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn read_feedback(path: &Path) -> Result<Vec<FeedbackLine>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::Events {
            path: path.display().to_string(),
            line: idx + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Power-of-two buckets: "0", "1", "2-3", "4-7", ...
fn histogram(values: impl Iterator<Item = u64>) -> BTreeMap<u32, (String, usize)> {
    let mut buckets: BTreeMap<u32, (String, usize)> = BTreeMap::new();
    for v in values {
        let bucket = if v == 0 { 0 } else { 64 - v.leading_zeros() };
        let name = match bucket {
            0 => "0".to_string(),
            1 => "1".to_string(),
            b => format!("{}-{}", 1u64 << (b - 1), (1u128 << b) - 1),
        };
        buckets.entry(bucket).or_insert((name, 0)).1 += 1;
    }
    buckets
}

fn inspect(state: &ClassifierState) -> serde_json::Value {
    let population = |role: CellRole| {
        let cells = state.population(role);
        let lifetimes: Vec<u32> = cells.iter().map(|c| c.lifetime).collect();
        let hist = |f: &dyn Fn(&crate::repertoire::Lymphocyte) -> u64| -> serde_json::Value {
            histogram(cells.iter().map(f))
                .into_values()
                .map(|(name, n)| (name, serde_json::Value::from(n)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        serde_json::json!({
            "count": cells.len(),
            "lifetime": {
                "min": lifetimes.iter().min(),
                "max": lifetimes.iter().max(),
                "mean": (!lifetimes.is_empty())
                    .then(|| lifetimes.iter().map(|&l| l as f64).sum::<f64>() / lifetimes.len() as f64),
            },
            "replication_attack_match": hist(&|c| c.weights.replication_attack_match),
            "transaction_match": hist(&|c| c.weights.transaction_match),
        })
    };
    let lib = state.library();
    serde_json::json!({
        "format_version": FORMAT_VERSION,
        "codebook_version": state.codebook().version(),
        "params": state.params(),
        "mode": state.mode(),
        "encounter_count": state.encounter_count(),
        "replay_entries": state.replay_log().len(),
        "library": {
            "self_patterns": lib.self_patterns().len(),
            "self_peptides": lib.self_peptides().len(),
            "nonself_patterns": lib.nonself_patterns().len(),
            "nonself_peptides": lib.nonself_peptides().len(),
        },
        "macrophages": state.macrophages().len(),
        "b_cells": population(CellRole::BCell),
        "helper_t": population(CellRole::HelperT),
        "controller_t": population(CellRole::ControllerT),
    })
}
