use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use brem::estimation::fit_mle;
use brem::harness::serve::{serve, ServeOptions};
use brem::harness::{grounding_run, replay, run_compare, run_trial, HarnessConfig};
use brem::rem::io::{read_event_log, AttributeDocument};
use brem::rem::{AttributeSet, Dyad, LikelihoodMode, RateModel, StatisticSpec};
use brem::sim::{read_log, write_log, Condition};
use brem::trust::infer_offline;
use brem::{Error, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "brem", version, about = "Trust-preserved shared autonomy: fit, infer, simulate, compare, serve, replay")]
struct Cli {
    /// TOML configuration with sections model, inference, controller, scenario, operator, experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Temporal,
    Ordinal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConditionArg {
    Baseline,
    TrustPreserved,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fits rate coefficients to an event log.
    Fit {
        #[arg(long)]
        events: PathBuf,
        /// Attribute document (one snapshot or time segments).
        #[arg(long)]
        attrs: Option<PathBuf>,
        /// JSON list of statistic specs; defaults to the configured model.
        #[arg(long)]
        specs: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Runs windowed trust inference over an event log.
    Infer {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        attrs: Option<PathBuf>,
        /// Output of `fit`; otherwise the configured coefficients are used.
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Sender of the tracked dyads.
        #[arg(long, default_value = "H")]
        human: String,
        /// Reported trust per tracked receiver, in actor order.
        #[arg(long, value_delimiter = ',')]
        priors: Vec<f64>,
        /// End of the last window; defaults to the last event time.
        #[arg(long)]
        until: Option<f64>,
    },
    /// Runs one practiced episode with the synthetic operator and writes its log.
    Simulate {
        #[arg(long, value_enum, default_value = "trust-preserved")]
        condition: ConditionArg,
    },
    /// Runs the paired-seed experiment and writes per-trial and summary tables.
    Compare {
        /// Also write every episode log.
        #[arg(long)]
        logs: bool,
    },
    /// Serves one live operator session over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, value_enum, default_value = "trust-preserved")]
        condition: ConditionArg,
        /// Milliseconds per simulation tick.
        #[arg(long, default_value_t = 500)]
        tick_ms: u64,
        #[arg(long)]
        max_episodes: Option<usize>,
    },
    /// Re-derives the trust telemetry of an episode log and compares it with the logged one.
    Replay { log: PathBuf },
}

#[derive(Debug, Serialize, Deserialize)]
struct FitOutput {
    theta: Vec<f64>,
    std_errors: Option<Vec<f64>>,
    log_lik: f64,
    converged: bool,
}

enum Outcome {
    Done,
    NotConverged,
    Mismatch,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("error: fit did not converge");
            ExitCode::from(EXIT_NO_CONVERGENCE)
        }
        Ok(Outcome::Mismatch) => {
            eprintln!("error: replayed telemetry differs from the log");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parse { .. } => EXIT_PARSE,
                Error::Protocol(_) => EXIT_PROTOCOL,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn load_config(cli: &Cli) -> Result<HarnessConfig> {
    let mut cfg = match &cli.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Writes `name` under `--out`, or to stdout without one.
fn emit(out: Option<&Path>, name: &str, body: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), body)?;
        }
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| Error::InvalidState(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn condition(arg: ConditionArg) -> Condition {
    match arg {
        ConditionArg::Baseline => Condition::baseline(),
        ConditionArg::TrustPreserved => Condition::TrustPreservedSa,
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Fit {
            events,
            attrs,
            specs,
            mode,
        } => {
            let (vocab, history) = read_event_log(BufReader::new(File::open(&events)?))?;
            let doc: AttributeDocument = match &attrs {
                Some(p) => json_file(p)?,
                None => AttributeDocument::Single(Default::default()),
            };
            let timeline = doc.timeline(&vocab, &history)?;
            let specs: Vec<StatisticSpec> = match &specs {
                Some(p) => json_file(p)?,
                None => cfg.model.specs.clone(),
            };
            let mut fit_cfg = cfg.experiment.fit.clone();
            if let Some(m) = mode {
                fit_cfg.mode = match m {
                    Mode::Temporal => LikelihoodMode::Temporal,
                    Mode::Ordinal => LikelihoodMode::Ordinal,
                };
            }
            let fit = fit_mle(&history, timeline.as_slice(), &specs, &fit_cfg)?;
            let doc = FitOutput {
                theta: fit.theta_star,
                std_errors: fit.std_errors,
                log_lik: fit.log_lik,
                converged: fit.converged,
            };
            emit(out, "fit.json", &pretty(&doc)?)?;
            Ok(if doc.converged { Outcome::Done } else { Outcome::NotConverged })
        }
        Command::Infer {
            events,
            attrs,
            fit,
            human,
            priors,
            until,
        } => {
            let (vocab, history) = read_event_log(BufReader::new(File::open(&events)?))?;
            let attrs: AttributeSet = match &attrs {
                Some(p) => match json_file::<AttributeDocument>(p)? {
                    AttributeDocument::Single(s) => s.resolve(&vocab)?,
                    AttributeDocument::Segmented { .. } => {
                        return Err(Error::InvalidInput(
                            "inference takes one attribute snapshot; trust is the inferred quantity".into(),
                        ))
                    }
                },
                None => AttributeSet::new(),
            };
            let model = match &fit {
                Some(p) => {
                    let f: FitOutput = json_file(p)?;
                    RateModel::new(cfg.model.specs.clone(), f.theta, cfg.model.baseline)?
                }
                None if cfg.model.theta.is_some() => cfg.model.model()?,
                None => {
                    return Err(Error::InvalidInput(
                        "no coefficients: pass --fit or set model.theta in the config".into(),
                    ))
                }
            };
            let h = vocab
                .actor(&human)
                .ok_or_else(|| Error::InvalidInput(format!("actor {human:?} is not in the event log")))?;
            let dyads: Vec<Dyad> = (0..vocab.actors.len())
                .filter(|&a| a != h.0)
                .map(|a| Dyad::new(h, brem::rem::ActorId(a)))
                .collect::<Result<_>>()?;
            if !priors.is_empty() && priors.len() != dyads.len() {
                return Err(Error::InvalidInput(format!(
                    "{} priors given for {} tracked dyads",
                    priors.len(),
                    dyads.len()
                )));
            }
            let priors: Vec<(Dyad, Option<f64>)> =
                dyads.iter().enumerate().map(|(i, d)| (*d, priors.get(i).copied())).collect();
            let t_final = until.unwrap_or_else(|| history.events().last().map_or(0.0, |e| e.time));
            let telemetry = infer_offline(cfg.inference.clone(), model, &priors, &history, &attrs, 0.0, t_final)?;
            let mut body = Vec::new();
            for t in &telemetry {
                serde_json::to_writer(&mut body, t).map_err(|e| Error::InvalidState(e.to_string()))?;
                body.push(b'\n');
            }
            emit(out, "telemetry.jsonl", &body)?;
            Ok(Outcome::Done)
        }
        Command::Simulate { condition: c } => {
            let grounding = grounding_run(&cfg)?;
            let c = condition(c);
            let seed = cfg.experiment.seed;
            let mut sim_cfg = cfg.clone();
            sim_cfg.experiment.conditions = vec![c];
            let (_, _, outcome) = run_trial(&sim_cfg, &grounding.model, seed)?
                .pop()
                .ok_or_else(|| Error::InvalidState("trial produced no episode".into()))?;
            let mut body = Vec::new();
            write_log(&mut body, &outcome.log)?;
            emit(out, &format!("episode_{seed}_{}.jsonl", c.name()), &body)?;
            if out.is_some() {
                println!("{}", serde_json::to_string(&outcome.metrics).map_err(|e| Error::InvalidState(e.to_string()))?);
            }
            Ok(Outcome::Done)
        }
        Command::Compare { logs } => {
            let grounding = grounding_run(&cfg)?;
            if grounding.fit.as_ref().is_some_and(|f| !f.converged) {
                eprintln!("warning: grounding fit did not converge");
            }
            let run = run_compare(&cfg, &grounding, logs)?;
            let table = &run.table;
            match out {
                Some(dir) => {
                    emit(out, "trials.csv", table.to_csv().as_bytes())?;
                    emit(out, "summary.csv", table.summary_csv().as_bytes())?;
                    emit(out, "summary.json", &pretty(table)?)?;
                    if logs {
                        let log_dir = dir.join("logs");
                        fs::create_dir_all(&log_dir)?;
                        for l in &run.logs {
                            let f = File::create(log_dir.join(format!("episode_{}_{}.jsonl", l.seed, l.condition.name())))?;
                            write_log(BufWriter::new(f), &l.records)?;
                        }
                    }
                }
                None => {
                    print!("{}", table.summary_csv());
                    for c in &table.comparisons {
                        println!(
                            "{} {} vs {}: +{} -{} ={} p={:.4}",
                            c.metric, c.a, c.b, c.test.positive, c.test.negative, c.test.ties, c.test.p_value
                        );
                    }
                }
            }
            Ok(Outcome::Done)
        }
        Command::Serve {
            host,
            port,
            condition: c,
            tick_ms,
            max_episodes,
        } => {
            let grounding = grounding_run(&cfg)?;
            let opts = ServeOptions {
                host,
                port,
                tick: Duration::from_millis(tick_ms),
                condition: condition(c),
                seed: cfg.experiment.seed,
                scenario: cfg.scenario.clone(),
                setup: brem::harness::grounding::setup_from(&cfg, Some(&grounding.model)),
                log_dir: cli.out.clone(),
                max_episodes,
            };
            serve(opts)?;
            Ok(Outcome::Done)
        }
        Command::Replay { log } => {
            let records = read_log(BufReader::new(File::open(&log)?))?;
            let inference = cli.config.as_ref().map(|_| &cfg.inference);
            let report = replay(&records, inference)?;
            let mut body = Vec::new();
            for t in &report.replayed {
                serde_json::to_writer(&mut body, t).map_err(|e| Error::InvalidState(e.to_string()))?;
                body.push(b'\n');
            }
            emit(out, "replay.jsonl", &body)?;
            eprintln!(
                "{} logged windows, {} replayed, {}",
                report.logged.len(),
                report.replayed.len(),
                if report.identical() { "identical" } else { "DIFFERENT" }
            );
            Ok(if report.identical() { Outcome::Done } else { Outcome::Mismatch })
        }
    }
}
