//! `pbcheck`: command-line front end.
//!
//! Exit codes: 0 safe or verified, 1 usage or model error, 2 property
//! violated, 3 inconclusive.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use pbcheck_core::export::{export, write_files};
use pbcheck_core::failure::{failure_mode_workflow, time_to_failure, FailureSet, WorkflowConfig};
use pbcheck_core::lang::{parse, parse_expr, parse_expr_in, print_machine, typecheck, Diagnostic, Machine};
use pbcheck_core::mdp::{build_mdp, unfold_failure_tree, BuildOptions, ExplicitMdp};
use pbcheck_core::models::{
    controller_atoms, controller_failure, controller_model, faulty_model, loop_model, mincut_model,
    ControllerParams,
};
use pbcheck_core::report::{self, Format, Style};
use pbcheck_core::safety::{
    check_safety_bounded, conclude_safety_from_inductivity, find_inductivity_counterexamples,
    verify_inductive_exhaustive, BoundedVerdict, SafetyConclusion, SafetySpec,
};
use pbcheck_core::wp::check_obligations;
use pbcheck_core::{Expr, Name, Rational};

#[derive(Parser)]
#[command(name = "pbcheck", version, about = "Quantitative safety and failure-mode analysis of probabilistic machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and typecheck a model file.
    Parse {
        path: PathBuf,
    },
    /// Check the proof obligations of the expectations clause.
    Check(Common),
    /// Bounded check of the expectations clause for K = 0..=K.
    Bmc(Common),
    /// Report inductivity counterexamples (or failure traces with --fail).
    Cex(Common),
    /// Exhaustive inductivity verification.
    Verify(Common),
    /// Failure-tree traces, candidate failure modes and critical sets.
    FailureModes(Common),
    /// Time-to-failure profile of one failure mode.
    Ttf(Common),
    /// Write the explicit MDP as .sta/.tra/.lab files.
    Export(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Mincut,
    Controller,
    Loop,
    Faulty,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Tsv,
}

#[derive(Args)]
struct Common {
    /// Model file in the machine language.
    path: Option<PathBuf>,
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    /// Initial vertex count of the min-cut model.
    #[arg(long = "NN", default_value_t = 10)]
    nn: u32,
    /// Use the faulty merge probability in the min-cut model.
    #[arg(long)]
    bug: bool,
    #[arg(long, default_value_t = 6)]
    maxtime: u32,
    /// Availability of every controller component (decimal or fraction).
    #[arg(long, default_value = "19/20")]
    avail: String,
    #[arg(long)]
    primary_requires_both: bool,
    /// Let the monitor and backup re-fire while their trigger holds.
    #[arg(long)]
    refire: bool,
    /// Step probability of the faulty counter.
    #[arg(long = "p", default_value = "1/2")]
    p: String,
    /// Upper bound of the faulty counter.
    #[arg(long, default_value_t = 10)]
    max: u32,
    /// Clamp the faulty counter to its domain.
    #[arg(long)]
    clamp: bool,
    /// Horizon.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Failure mode for `ttf`: comma-separated atom names.
    #[arg(long)]
    mode: Option<String>,
    /// Atoms as `NAME=PREDICATE` items separated by `;`.
    #[arg(long)]
    atoms: Option<String>,
    /// Failure predicate.
    #[arg(long)]
    fail: Option<String>,
    /// Largest conjunction searched for critical sets.
    #[arg(long, default_value_t = 3)]
    max_size: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Drop failure-tree branches below this probability.
    #[arg(long)]
    prune: Option<String>,
    /// Digits after the point in scientific renderings.
    #[arg(long, default_value_t = 5)]
    precision: usize,
    /// Output prefix for `export`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carried to `main`: exit code and message.
struct Fail(u8, String);

type Outcome = Result<u8, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(1, msg.into())
}

fn diagnostics(ds: &[Diagnostic]) -> Fail {
    Fail(1, ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))
}

fn rational(what: &str, s: &str) -> Result<Rational, Fail> {
    parse_expr(s)
        .ok()
        .and_then(|e| e.eval(&pbcheck_core::State::new()).ok())
        .and_then(|v| v.as_rational())
        .ok_or_else(|| usage(format!("{what}: expected a number, got `{s}`")))
}

impl Common {
    fn style(&self) -> Style {
        let format = match self.format {
            FormatArg::Text => Format::Text,
            FormatArg::Tsv => Format::Tsv,
        };
        Style { format, precision: self.precision }
    }

    fn machine(&self) -> Result<Machine, Fail> {
        let m = match (&self.path, self.builtin) {
            (Some(_), Some(_)) => return Err(usage("give a model path or --builtin, not both")),
            (None, None) => return Err(usage("no model: give a path or --builtin")),
            (Some(p), None) => {
                let src = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                parse(&src).map_err(|d| diagnostics(&d))?
            }
            (None, Some(Builtin::Mincut)) => mincut_model(self.nn, self.bug).map_err(|d| diagnostics(&d))?,
            (None, Some(Builtin::Controller)) => controller_model(&self.controller_params()?).map_err(|d| diagnostics(&d))?,
            (None, Some(Builtin::Loop)) => loop_model(),
            (None, Some(Builtin::Faulty)) => {
                faulty_model(&rational("--p", &self.p)?, self.max, self.clamp).map_err(|d| diagnostics(&d))?
            }
        };
        let ds = typecheck(&m);
        if !ds.is_empty() {
            return Err(diagnostics(&ds));
        }
        Ok(m)
    }

    fn controller_params(&self) -> Result<ControllerParams, Fail> {
        let avail = rational("--avail", &self.avail)?;
        if avail < Rational::zero() || avail > Rational::from_integer(1.into()) {
            return Err(usage("--avail must lie in [0, 1]"));
        }
        let mut p = ControllerParams::uniform(self.maxtime, avail);
        p.primary_requires_both = self.primary_requires_both;
        p.refire = self.refire;
        Ok(p)
    }

    fn is_controller(&self) -> bool {
        matches!(self.builtin, Some(Builtin::Controller))
    }

    /// Default horizon: enough steps for the controller to decide.
    fn horizon(&self, fallback: usize) -> usize {
        self.k.unwrap_or(if self.is_controller() { self.maxtime as usize } else { fallback })
    }

    fn failure(&self, m: &Machine) -> Result<Option<Expr>, Fail> {
        match &self.fail {
            Some(src) => parse_expr_in(m, src).map(Some).map_err(|d| diagnostics(&d)),
            None if self.is_controller() => Ok(Some(controller_failure(m))),
            None => Ok(None),
        }
    }

    fn atoms(&self, m: &Machine) -> Result<Vec<(Name, Expr)>, Fail> {
        match &self.atoms {
            Some(spec) => spec
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|item| {
                    let (n, p) = item
                        .split_once('=')
                        .ok_or_else(|| usage(format!("atom `{item}`: expected NAME=PREDICATE")))?;
                    let e = parse_expr_in(m, p).map_err(|d| diagnostics(&d))?;
                    Ok((Name::from(n.trim()), e))
                })
                .collect(),
            None if self.is_controller() => Ok(controller_atoms(m)),
            None => Ok(Vec::new()),
        }
    }
}

type Mdp = ExplicitMdp<Rational>;

fn build(m: &Machine) -> Result<Mdp, Fail> {
    build_mdp(m, BuildOptions::default()).map_err(|e| usage(e.to_string()))
}

fn spec(m: &Machine) -> Result<SafetySpec, Fail> {
    SafetySpec::of_machine(m).map_err(|e| usage(e.to_string()))
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Parse { path } => {
            let src = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let m = parse(&src).map_err(|d| diagnostics(&d))?;
            let ds = typecheck(&m);
            if !ds.is_empty() {
                return Err(diagnostics(&ds));
            }
            print!("{}", print_machine(&m));
            Ok(0)
        }
        Command::Check(c) => {
            let m = c.machine()?;
            let results = check_obligations::<Rational>(&m).map_err(|e| usage(e.to_string()))?;
            print!("{}", report::obligations(&results, &c.style()));
            Ok(if results.iter().all(|(_, v)| v.valid) { 0 } else { 2 })
        }
        Command::Bmc(c) => {
            let m = c.machine()?;
            let mdp = build(&m)?;
            let r = check_safety_bounded(&mdp, &spec(&m)?, c.horizon(10)).map_err(|e| usage(e.to_string()))?;
            print!("{}", report::bounded(&r, &c.style()));
            Ok(match r.verdict {
                BoundedVerdict::SafeUpTo(_) => 0,
                BoundedVerdict::FailureTreeFound { .. } => 2,
            })
        }
        Command::Cex(c) => cex(&c),
        Command::Verify(c) => {
            let m = c.machine()?;
            let mdp = build(&m)?;
            let sp = spec(&m)?;
            let r = verify_inductive_exhaustive(&mdp, &sp.expt).map_err(|e| usage(e.to_string()))?;
            let conclusion = conclude_safety_from_inductivity(&mdp, &sp, &r).map_err(|e| usage(e.to_string()))?;
            print!("{}", report::verification(&mdp, &r, &conclusion, &c.style()));
            Ok(match conclusion {
                SafetyConclusion::Verified { .. } => 0,
                SafetyConclusion::Inconclusive { .. } => 3,
            })
        }
        Command::FailureModes(c) => {
            let m = c.machine()?;
            let mdp = build(&m)?;
            let sp = spec(&m)?;
            let fail = c.failure(&m)?.ok_or_else(|| usage("no failure predicate: give --fail"))?;
            let atoms = c.atoms(&m)?;
            if atoms.is_empty() {
                return Err(usage("no atoms: give --atoms"));
            }
            let fail_set = FailureSet::certain(&mdp, &fail).map_err(|e| usage(e.to_string()))?;
            let cfg = WorkflowConfig {
                spec: &sp,
                failure: &fail,
                fail_set: &fail_set,
                atoms: &atoms,
                kmax: c.horizon(10),
                max_size: c.max_size,
            };
            let r = failure_mode_workflow(&mdp, &cfg).map_err(|e| usage(e.to_string()))?;
            let names: Vec<Name> = atoms.iter().map(|(n, _)| n.clone()).collect();
            print!("{}", report::workflow(&mdp, &names, &r, &c.style()));
            Ok(if r.modes.is_empty() { 0 } else { 2 })
        }
        Command::Ttf(c) => {
            let m = c.machine()?;
            let mdp = build(&m)?;
            let fail = c.failure(&m)?.ok_or_else(|| usage("no failure predicate: give --fail"))?;
            let atoms = c.atoms(&m)?;
            let mode = c.mode.as_deref().ok_or_else(|| usage("give --mode NAME[,NAME...]"))?;
            let pick = mode
                .split(',')
                .map(|n| {
                    atoms
                        .iter()
                        .position(|(a, _)| &**a == n.trim())
                        .ok_or_else(|| usage(format!("unknown atom `{n}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let fail_set = FailureSet::certain(&mdp, &fail).map_err(|e| usage(e.to_string()))?;
            let p = time_to_failure(&mdp, &fail_set, &atoms, &pick, c.horizon(10)).map_err(|e| usage(e.to_string()))?;
            print!("{}", report::ttf(&p, &c.style()));
            Ok(if p.first_failure_step.is_some() { 2 } else { 0 })
        }
        Command::Export(c) => {
            let m = c.machine()?;
            let mdp = build(&m)?;
            let out = c.out.clone().ok_or_else(|| usage("give --out PREFIX"))?;
            let mut labels = Vec::new();
            if let Some(f) = c.failure(&m)? {
                labels.push((Name::from("F"), mdp.satisfying(&f).map_err(|e| usage(e.to_string()))?));
            }
            for (n, p) in c.atoms(&m)? {
                labels.push((n, mdp.satisfying(&p).map_err(|e| usage(e.to_string()))?));
            }
            let files = export(&mdp, &labels);
            for p in write_files(&out, &files).map_err(|e| usage(e.to_string()))? {
                println!("wrote {}", p.display());
            }
            println!(
                "{} states, {} choices, {} transitions",
                mdp.num_states(),
                mdp.num_choices(),
                mdp.num_transitions()
            );
            Ok(0)
        }
    }
}

fn cex(c: &Common) -> Outcome {
    let m = c.machine()?;
    let mdp = build(&m)?;
    let sp = spec(&m)?;
    let style = c.style();
    let r = check_safety_bounded(&mdp, &sp, c.horizon(10)).map_err(|e| usage(e.to_string()))?;
    let BoundedVerdict::FailureTreeFound { k, scheduler, .. } = &r.verdict else {
        print!("{}", report::bounded(&r, &style));
        return Ok(0);
    };
    let prune = c.prune.as_deref().map(|s| rational("--prune", s)).transpose()?;
    match c.failure(&m)? {
        Some(fail) if c.fail.is_some() || c.is_controller() => {
            let tree = unfold_failure_tree(&mdp, scheduler, *k, prune.as_ref()).map_err(|e| usage(e.to_string()))?;
            let bad = mdp.satisfying(&fail).map_err(|e| usage(e.to_string()))?;
            let traces: Vec<_> = tree.leaf_traces().into_iter().filter(|t| bad[t.last()]).collect();
            print!("{}", report::failure_traces(&mdp, *k, &traces, &style));
        }
        _ => {
            let cexs = find_inductivity_counterexamples(&mdp, &sp.expt, scheduler, *k)
                .map_err(|e| usage(e.to_string()))?;
            // The initialisation counts as the first step.
            print!("{}", report::counterexamples(&mdp, k + 1, &cexs, &style));
        }
    }
    Ok(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
