//! apicalc: run applied pi calculus models — parse and check model files,
//! certify rewrite-system convergence, normalize terms, search traces, check
//! static equivalence and bounded bisimilarity, and step processes
//! interactively.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use apicalc_core::equivalence::{
    bisim, trace_search, BisimConfig, BisimVerdict, Trace, TracePredicate,
};
use apicalc_core::rewriting::{check_convergence, normalize, TerminationVerdict};
use apicalc_core::semantics::{internal_steps, labelled_steps_simple, Label, TransitionResult};
use apicalc_core::statics::{static_equiv, EquivVerdict, RecipeBudget};
use apicalc_core::{
    frame_of, parse_model, parse_term_in, to_config, Configuration, Model, Query,
};

#[derive(Parser)]
#[command(name = "apicalc", about = "applied pi calculus workbench", version)]
struct Cli {
    /// Emit machine-readable JSON verdicts.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Bounds {
    /// Recipe synthesis depth.
    #[arg(long)]
    depth: Option<u32>,
    /// Cap on enumerated recipes per sort.
    #[arg(long)]
    count: Option<usize>,
    /// Internal steps allowed around each matched move / trace length bound.
    #[arg(long)]
    steps: Option<u32>,
    /// Replication unfoldings per path.
    #[arg(long)]
    unfold: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and run its sort and cycle checks.
    Check { file: PathBuf },
    /// Certify the model's rewrite rules convergent (LPO + critical pairs).
    Convergent {
        file: PathBuf,
        #[arg(long)]
        expect: Option<String>,
    },
    /// Normalize a term under the model's theory.
    Normalize {
        file: PathBuf,
        #[arg(short = 'e', long = "expr")]
        expr: String,
    },
    /// Search for a trace of the named process satisfying a goal.
    Trace {
        file: PathBuf,
        process: String,
        /// Goal: output(c) or forged(c, a). Defaults to the model's first
        /// trace query for this process.
        #[arg(long)]
        goal: Option<String>,
        #[command(flatten)]
        bounds: Bounds,
        #[arg(long)]
        expect: Option<String>,
    },
    /// Check static equivalence of the frames of two processes.
    Stateq {
        file: PathBuf,
        left: String,
        right: String,
        #[command(flatten)]
        bounds: Bounds,
        #[arg(long)]
        expect: Option<String>,
    },
    /// Check bounded labelled bisimilarity of two processes.
    Bisim {
        file: PathBuf,
        left: String,
        right: String,
        #[command(flatten)]
        bounds: Bounds,
        #[arg(long)]
        expect: Option<String>,
    },
    /// Step a process interactively, one transition at a time.
    Step {
        file: PathBuf,
        process: String,
        /// Replay commands from a file instead of stdin.
        #[arg(long)]
        script: Option<PathBuf>,
        #[command(flatten)]
        bounds: Bounds,
    },
}

struct Outcome {
    query: String,
    verdict: String,
    witness: Option<String>,
    bounds: String,
    matches_expectation: Option<bool>,
    human: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = run(&cli.command);
    match result {
        Ok(outcome) => {
            let millis = started.elapsed().as_millis();
            if cli.json {
                let obj = serde_json::json!({
                    "query": outcome.query,
                    "verdict": outcome.verdict,
                    "witness": outcome.witness,
                    "bounds": outcome.bounds,
                    "millis": millis,
                });
                println!("{obj}");
            } else {
                println!("{}", outcome.human);
            }
            match outcome.matches_expectation {
                Some(false) => ExitCode::from(1),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(file: &PathBuf) -> Result<Model, String> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    let mut model = parse_model(&text).map_err(|e| e.to_string())?;
    if let Ok(budget) = std::env::var("APICALC_STEP_BUDGET") {
        match budget.parse::<u64>() {
            Ok(b) => model.theory.step_budget = b,
            Err(_) => return Err(format!("invalid APICALC_STEP_BUDGET {budget}")),
        }
    }
    Ok(model)
}

fn config_of(model: &Model, name: &str) -> Result<Configuration, String> {
    let p = model.process(name).map_err(|e| e.to_string())?;
    to_config(p).map_err(|e| e.to_string())
}

fn stateq_budget(model: &Model, bounds: &Bounds) -> RecipeBudget {
    let mut b = model.recipe_budget(bounds.depth.unwrap_or(4));
    if bounds.count.is_some() {
        b.max_count = bounds.count;
    }
    b
}

fn bisim_config(model: &Model, bounds: &Bounds) -> BisimConfig {
    let mut budget = model.recipe_budget(bounds.depth.unwrap_or(2));
    if bounds.count.is_some() {
        budget.max_count = bounds.count;
    }
    BisimConfig::new(budget, bounds.steps.unwrap_or(6), bounds.unfold.unwrap_or(2))
}

fn parse_goal(model: &Model, text: &str) -> Result<TracePredicate, String> {
    let text = text.trim();
    let chan = |n: &str| {
        model
            .free_names
            .get(n.trim())
            .filter(|c| c.sort.is_channel())
            .cloned()
            .ok_or_else(|| format!("unknown free channel {n}"))
    };
    if let Some(rest) = text.strip_prefix("output(").and_then(|r| r.strip_suffix(')')) {
        return Ok(TracePredicate::OutputOn(chan(rest)?));
    }
    if let Some(rest) = text.strip_prefix("forged(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            return Ok(TracePredicate::Forged {
                out_chan: chan(parts[0])?,
                in_chan: chan(parts[1])?,
            });
        }
    }
    Err(format!("cannot parse goal {text}; use output(c) or forged(c, a)"))
}

fn expectation(expect: &Option<String>, verdict_tag: &str) -> Option<bool> {
    expect.as_ref().map(|want| want == verdict_tag)
}

fn render_trace(trace: &Trace) -> String {
    format!("{trace}")
}

fn run(cmd: &Command) -> Result<Outcome, String> {
    match cmd {
        Command::Check { file } => {
            let model = load(file)?;
            let mut human = format!(
                "ok: {} sorts, {} symbols, {} rules, {} permutative equations, {} processes, {} queries",
                model.theory.signature.sorts().count(),
                model.theory.signature.symbols().count(),
                model.theory.rules().len(),
                model.theory.perms().len(),
                model.processes.len(),
                model.queries.len(),
            );
            for w in &model.warnings {
                human.push_str(&format!("\nwarning: {w}"));
            }
            Ok(Outcome {
                query: format!("check {}", file.display()),
                verdict: "ok".to_string(),
                witness: None,
                bounds: String::new(),
                matches_expectation: None,
                human,
            })
        }
        Command::Convergent { file, expect } => {
            let model = load(file)?;
            let report = check_convergence(&model.theory).map_err(|e| e.to_string())?;
            let tag = if report.convergent { "convergent" } else { "not-convergent" };
            let mut human = String::new();
            match &report.termination {
                TerminationVerdict::LpoOriented { lex_status } => {
                    human.push_str("termination: all rules LPO-oriented\n");
                    for (sym, perm) in lex_status {
                        if perm.iter().enumerate().any(|(i, &p)| i != p) {
                            human.push_str(&format!(
                                "  argument order for {sym}: {perm:?}\n"
                            ));
                        }
                    }
                }
                TerminationVerdict::NotOrientable { unorientable } => {
                    human.push_str(&format!(
                        "termination: rules {unorientable:?} not LPO-orientable (possibly non-terminating)\n"
                    ));
                }
                TerminationVerdict::AssertedOnly { unorientable } => {
                    human.push_str(&format!(
                        "termination: asserted by the model author (rules {unorientable:?} unoriented)\n"
                    ));
                }
            }
            human.push_str(&format!("critical pairs: {}\n", report.joins.len()));
            for j in &report.joins {
                human.push_str(&format!(
                    "  {}: {} {}\n",
                    j.pair,
                    if j.joinable { "joins at" } else { "DOES NOT JOIN:" },
                    if j.joinable {
                        format!("{}", j.left_nf)
                    } else {
                        format!("{} vs {}", j.left_nf, j.right_nf)
                    }
                ));
            }
            human.push_str(&format!("verdict: {tag}"));
            Ok(Outcome {
                query: format!("convergent {}", file.display()),
                verdict: tag.to_string(),
                witness: None,
                bounds: String::new(),
                matches_expectation: expectation(expect, tag),
                human,
            })
        }
        Command::Normalize { file, expr } => {
            let model = load(file)?;
            let term = parse_term_in(&model, &BTreeMap::new(), expr).map_err(|e| e.to_string())?;
            let nf = normalize(&term, &model.theory).map_err(|e| e.to_string())?;
            Ok(Outcome {
                query: format!("normalize {expr}"),
                verdict: format!("{nf}"),
                witness: None,
                bounds: format!("steps {}", model.theory.step_budget),
                matches_expectation: None,
                human: format!("{nf}"),
            })
        }
        Command::Trace { file, process, goal, bounds, expect } => {
            let model = load(file)?;
            let cfg = bisim_config(&model, bounds);
            let goal = match goal {
                Some(g) => parse_goal(&model, g)?,
                None => model
                    .queries
                    .iter()
                    .find_map(|q| match q {
                        Query::Trace { process: p, goal } if p == process => Some(goal.clone()),
                        _ => None,
                    })
                    .ok_or_else(|| {
                        format!("no --goal given and no trace query for {process} in the model")
                    })?,
            };
            let c = config_of(&model, process)?;
            let found = trace_search(&c, &goal, &cfg, &model.theory).map_err(|e| e.to_string())?;
            let (tag, witness, human) = match &found {
                Some(trace) => {
                    let text = render_trace(trace);
                    ("found", Some(text.clone()), format!("TRACE FOUND\n{text}"))
                }
                None => ("not-found", None, "NOT FOUND within bounds".to_string()),
            };
            Ok(Outcome {
                query: format!("trace {process}"),
                verdict: tag.to_string(),
                witness,
                bounds: format!(
                    "depth {} steps {} unfold {}",
                    cfg.recipe_budget.max_depth, cfg.max_trace_depth, cfg.max_repl_unfold
                ),
                matches_expectation: expectation(expect, tag),
                human,
            })
        }
        Command::Stateq { file, left, right, bounds, expect } => {
            let model = load(file)?;
            let budget = stateq_budget(&model, bounds);
            let cl = config_of(&model, left)?;
            let cr = config_of(&model, right)?;
            let fl = frame_of(&cl);
            let fr = frame_of(&cr);
            let verdict =
                static_equiv(&fl, &fr, &budget, &model.theory).map_err(|e| e.to_string())?;
            let (tag, witness) = match &verdict {
                EquivVerdict::EquivalentUpToBudget { .. } => ("equivalent", None),
                EquivVerdict::Distinguished { test } => {
                    ("distinguished", Some(format!("{} == {}", test.0, test.1)))
                }
                EquivVerdict::DomainMismatch { .. } => ("distinguished", Some("domains differ".to_string())),
            };
            Ok(Outcome {
                query: format!("stateq {left} {right}"),
                verdict: tag.to_string(),
                witness: witness.clone(),
                bounds: format!(
                    "depth {} count {}",
                    budget.max_depth,
                    budget.max_count.map(|c| c.to_string()).unwrap_or_else(|| "none".into())
                ),
                matches_expectation: expectation(expect, tag),
                human: format!("{verdict}"),
            })
        }
        Command::Bisim { file, left, right, bounds, expect } => {
            let model = load(file)?;
            let cfg = bisim_config(&model, bounds);
            let cl = config_of(&model, left)?;
            let cr = config_of(&model, right)?;
            let verdict = bisim(&cl, &cr, &cfg, &model.theory).map_err(|e| e.to_string())?;
            let (tag, witness) = match &verdict {
                BisimVerdict::BisimilarUpToBounds { .. } => ("bisimilar", None),
                BisimVerdict::NotBisimilar { trace, .. } => (
                    "not-bisimilar",
                    Some(trace.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ; ")),
                ),
            };
            Ok(Outcome {
                query: format!("bisim {left} {right}"),
                verdict: tag.to_string(),
                witness: witness.clone(),
                bounds: format!(
                    "depth {} steps {} unfold {}",
                    cfg.recipe_budget.max_depth, cfg.max_trace_depth, cfg.max_repl_unfold
                ),
                matches_expectation: expectation(expect, tag),
                human: format!("{verdict}"),
            })
        }
        Command::Step { file, process, script, bounds } => {
            let model = load(file)?;
            let cfg = bisim_config(&model, bounds);
            let c = config_of(&model, process)?;
            let transcript = step_repl(&model, c, &cfg, script)?;
            Ok(Outcome {
                query: format!("step {process}"),
                verdict: "done".to_string(),
                witness: None,
                bounds: String::new(),
                matches_expectation: None,
                human: transcript,
            })
        }
    }
}

/// One move in the stepping interface.
enum Move {
    Internal(Configuration),
    Labelled(TransitionResult),
}

fn enabled_moves(
    model: &Model,
    c: &Configuration,
    cfg: &BisimConfig,
) -> Result<Vec<(String, Move)>, String> {
    let mut moves = Vec::new();
    for succ in internal_steps(c, &model.theory).map_err(|e| e.to_string())? {
        moves.push(("tau".to_string(), Move::Internal(succ)));
    }
    for t in
        labelled_steps_simple(c, &model.theory, &cfg.recipe_budget).map_err(|e| e.to_string())?
    {
        moves.push((format!("{}", t.label), Move::Labelled(t)));
    }
    Ok(moves)
}

fn step_repl(
    model: &Model,
    start: Configuration,
    cfg: &BisimConfig,
    script: &Option<PathBuf>,
) -> Result<String, String> {
    let mut transcript = String::new();
    let emit = |s: &str, transcript: &mut String| {
        println!("{s}");
        transcript.push_str(s);
        transcript.push('\n');
    };
    let script_lines: Option<Vec<String>> = match script {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read script: {e}"))?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        ),
        None => None,
    };
    let mut script_ix = 0;
    let mut history = vec![start];
    let stdin = std::io::stdin();
    loop {
        let current = history.last().unwrap().clone();
        emit(&format!("frame: {}", frame_of(&current)), &mut transcript);
        let moves = enabled_moves(model, &current, cfg)?;
        if moves.is_empty() {
            emit("no transitions enabled", &mut transcript);
        }
        for (i, (desc, _)) in moves.iter().enumerate() {
            emit(&format!("  [{i}] {desc}"), &mut transcript);
        }
        let line = match &script_lines {
            Some(lines) => {
                if script_ix >= lines.len() {
                    emit("script exhausted", &mut transcript);
                    return Ok(transcript);
                }
                let l = lines[script_ix].clone();
                script_ix += 1;
                emit(&format!("> {l}"), &mut transcript);
                l
            }
            None => {
                print!("> ");
                std::io::stdout().flush().ok();
                let mut buf = String::new();
                if stdin.lock().read_line(&mut buf).map_err(|e| e.to_string())? == 0 {
                    return Ok(transcript);
                }
                buf.trim().to_string()
            }
        };
        match line.as_str() {
            "quit" | "q" => return Ok(transcript),
            "undo" => {
                if history.len() > 1 {
                    history.pop();
                } else {
                    emit("nothing to undo", &mut transcript);
                }
            }
            "" => {}
            other => {
                if let Ok(ix) = other.parse::<usize>() {
                    match moves.into_iter().nth(ix) {
                        Some((desc, mv)) => {
                            emit(&format!("took {desc}"), &mut transcript);
                            let next = match mv {
                                Move::Internal(c) => c,
                                Move::Labelled(t) => t.target,
                            };
                            history.push(next);
                        }
                        None => emit("no such transition", &mut transcript),
                    }
                } else if let Some(rest) = other.strip_prefix("in ") {
                    // custom input: `in <chan> <recipe>`
                    let mut parts = rest.splitn(2, ' ');
                    let chan_txt = parts.next().unwrap_or_default();
                    let recipe_txt = parts.next().unwrap_or_default();
                    match custom_input(model, &current, cfg, chan_txt, recipe_txt) {
                        Ok(Some(t)) => {
                            emit(&format!("took {}", t.label), &mut transcript);
                            history.push(t.target);
                        }
                        Ok(None) => emit("input not enabled on that channel", &mut transcript),
                        Err(e) => emit(&format!("rejected: {e}"), &mut transcript),
                    }
                } else {
                    emit("commands: <number>, in <chan> <recipe>, undo, quit", &mut transcript);
                }
            }
        }
    }
}

/// Build an input transition from a user-typed recipe, rejecting variables
/// outside the frame domain.
fn custom_input(
    model: &Model,
    c: &Configuration,
    cfg: &BisimConfig,
    chan_txt: &str,
    recipe_txt: &str,
) -> Result<Option<TransitionResult>, String> {
    let frame = frame_of(c);
    let dom_vars: BTreeMap<String, apicalc_core::Var> =
        frame.dom().into_iter().map(|v| (v.to_string(), v)).collect();
    let chan =
        parse_term_in(model, &dom_vars, chan_txt).map_err(|e| format!("channel: {e}"))?;
    let recipe =
        parse_term_in(model, &dom_vars, recipe_txt).map_err(|e| format!("recipe: {e}"))?;
    for v in recipe.fv() {
        if !frame.dom().contains(&v) {
            return Err(format!("unknown variable {v} (frame domain: {:?})", frame.dom()));
        }
    }
    let mut cands = apicalc_core::semantics::LabelCandidates::for_config(
        c,
        &model.theory,
        &cfg.recipe_budget,
    )
    .map_err(|e| e.to_string())?;
    cands.chans = vec![chan.clone()];
    cands.msgs = BTreeMap::from([(recipe.sort().clone(), vec![recipe.clone()])]);
    let steps = apicalc_core::semantics::labelled_steps_given(c, &model.theory, &cands)
        .map_err(|e| e.to_string())?;
    Ok(steps.into_iter().find(|t| matches!(&t.label, Label::In { msg, .. } if *msg == recipe)))
}
