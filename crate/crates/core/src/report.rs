//! Text and tab-separated renderings of analysis results.
//!
//! Text output mirrors the classic error-report layout; TSV output drops
//! the banners and prints one record per line with a leading record kind.

use std::fmt::Write as _;

use num_rational::BigRational;

use crate::failure::{Conditional, TtfProfile, WorkflowReport};
use crate::mdp::{ExplicitMdp, Trace};
use crate::safety::{BoundedReport, BoundedVerdict, Counterexample, InductiveReport, SafetyConclusion};
use crate::scalar::{render_exact, render_scientific};
use crate::wp::{AnnotationVerdict, Obligation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Tsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Style {
    pub format: Format,
    /// Digits after the point in scientific renderings.
    pub precision: usize,
}

impl Default for Style {
    fn default() -> Self {
        Style { format: Format::Text, precision: 5 }
    }
}

impl Style {
    pub fn sci(&self, x: &BigRational) -> String {
        render_scientific(x, self.precision)
    }

    /// `n` for integers, otherwise `n/d (d.ddddE-x)`.
    pub fn num(&self, x: &BigRational) -> String {
        if x.is_integer() {
            render_exact(x)
        } else {
            format!("{} ({})", render_exact(x), self.sci(x))
        }
    }
}

const BANNER_END: &str = "************ Finished Error Reporting ************";

fn header(step: usize) -> String {
    format!("******* Starting Error Reporting for Failure Traces located on step {step} *******")
}

fn write_trace(out: &mut String, mdp: &ExplicitMdp<BigRational>, t: &Trace<BigRational>, style: &Style) {
    let _ = writeln!(out, "Sequence of operations leading to bad state ::>>>");
    let _ = writeln!(out, "{}", t.render(mdp));
    let _ = writeln!(out, "Probability mass of failure trace is: {}", style.num(&t.prob));
}

/// Inductivity counterexamples; `step` counts the initialisation as step 1.
pub fn counterexamples(
    mdp: &ExplicitMdp<BigRational>,
    step: usize,
    cexs: &[Counterexample<BigRational>],
    style: &Style,
) -> String {
    let mut out = String::new();
    match style.format {
        Format::Text => {
            let _ = writeln!(out, "{}", header(step));
            for c in cexs {
                write_trace(&mut out, mdp, &c.trace, style);
                let _ = writeln!(
                    out,
                    "Witness {}: {} yields {} < invariant {}",
                    mdp.tuple(c.state),
                    c.action,
                    style.num(&c.wp),
                    style.num(&c.expt)
                );
            }
            let _ = writeln!(out, "{BANNER_END}");
        }
        Format::Tsv => {
            let _ = writeln!(out, "kind\tstep\twitness\taction\twp\texpt\tprob\ttrace");
            for c in cexs {
                let _ = writeln!(
                    out,
                    "counterexample\t{step}\t{}\t{}\t{}\t{}\t{}\t{}",
                    mdp.tuple(c.state),
                    c.action,
                    render_exact(&c.wp),
                    render_exact(&c.expt),
                    render_exact(&c.trace.prob),
                    c.trace.render(mdp)
                );
            }
        }
    }
    out
}

/// Failure-tree traces ending in a failed state at depth `k`.
pub fn failure_traces(
    mdp: &ExplicitMdp<BigRational>,
    k: usize,
    traces: &[Trace<BigRational>],
    style: &Style,
) -> String {
    let mut out = String::new();
    let total = traces.iter().fold(BigRational::from_integer(0.into()), |a, t| a + &t.prob);
    match style.format {
        Format::Text => {
            let _ = writeln!(out, "{}", header(k));
            for t in traces {
                write_trace(&mut out, mdp, t, style);
            }
            let _ = writeln!(out, "{} failure traces; total probability {}", traces.len(), style.num(&total));
            let _ = writeln!(out, "{BANNER_END}");
        }
        Format::Tsv => {
            let _ = writeln!(out, "kind\tstep\tprob\ttrace");
            for t in traces {
                let _ = writeln!(out, "trace\t{k}\t{}\t{}", render_exact(&t.prob), t.render(mdp));
            }
            let _ = writeln!(out, "total\t{k}\t{}\t", render_exact(&total));
        }
    }
    out
}

/// Per-horizon table of minimal expected values against the threshold.
pub fn bounded(report: &BoundedReport<BigRational>, style: &Style) -> String {
    let mut out = String::new();
    let t = &report.threshold;
    match style.format {
        Format::Text => {
            let _ = writeln!(out, "threshold {}", style.num(t));
            for (k, v) in &report.values {
                let mark = if v < t { "below" } else { "ok" };
                let _ = writeln!(out, "K={k}: min {} {mark}", style.num(v));
            }
            match &report.verdict {
                BoundedVerdict::SafeUpTo(k) => {
                    let _ = writeln!(out, "Safe up to K={k}");
                }
                BoundedVerdict::FailureTreeFound { k, value, .. } => {
                    let _ = writeln!(out, "Failure tree at K={k}: min {} < threshold {}", style.num(value), style.num(t));
                }
            }
        }
        Format::Tsv => {
            let _ = writeln!(out, "kind\tK\tmin\tdecimal\tthreshold");
            for (k, v) in &report.values {
                let _ = writeln!(out, "value\t{k}\t{}\t{}\t{}", render_exact(v), style.sci(v), render_exact(t));
            }
            let verdict = match &report.verdict {
                BoundedVerdict::SafeUpTo(k) => format!("safe\t{k}"),
                BoundedVerdict::FailureTreeFound { k, .. } => format!("failure\t{k}"),
            };
            let _ = writeln!(out, "verdict\t{verdict}");
        }
    }
    out
}

/// Proof obligations with their witnesses.
pub fn obligations(results: &[(Obligation, AnnotationVerdict<BigRational>)], style: &Style) -> String {
    let mut out = String::new();
    if style.format == Format::Tsv {
        let _ = writeln!(out, "kind\tobligation\tstate\tpre\twp");
    }
    for (o, v) in results {
        let a = &o.annotation;
        match style.format {
            Format::Text => {
                let verdict = if v.valid { "valid" } else { "INVALID" };
                let _ = writeln!(out, "{}: {{{}}} ... {{{}}}: {verdict}", o.name, a.pre, a.post);
                for w in &v.witnesses {
                    let _ = writeln!(out, "  at {}: pre {} > wp {}", w.state, style.num(&w.pre), style.num(&w.wp));
                }
            }
            Format::Tsv => {
                if v.valid {
                    let _ = writeln!(out, "valid\t{}\t\t\t", o.name);
                }
                for w in &v.witnesses {
                    let _ = writeln!(
                        out,
                        "witness\t{}\t{}\t{}\t{}",
                        o.name,
                        w.state,
                        render_exact(&w.pre),
                        render_exact(&w.wp)
                    );
                }
            }
        }
    }
    out
}

/// Exhaustive inductivity result and its unbounded conclusion.
pub fn verification(
    mdp: &ExplicitMdp<BigRational>,
    report: &InductiveReport<BigRational>,
    conclusion: &SafetyConclusion<BigRational>,
    style: &Style,
) -> String {
    let mut out = String::new();
    match (style.format, conclusion) {
        (Format::Text, SafetyConclusion::Verified { initial_bound }) => {
            let _ = writeln!(
                out,
                "Verified; states visited: {}; initial bound {}",
                report.visited,
                style.sci(initial_bound)
            );
            let _ = writeln!(out, "initial bound (exact): {}", render_exact(initial_bound));
        }
        (Format::Text, SafetyConclusion::Inconclusive { reason }) => {
            let _ = writeln!(out, "Inconclusive; states visited: {}; {reason}", report.visited);
            if !report.counterexamples.is_empty() {
                let step = report.counterexamples.iter().map(|c| c.trace.steps.len()).min().unwrap_or(1) + 1;
                out.push_str(&counterexamples(mdp, step, &report.counterexamples, style));
            }
        }
        (Format::Tsv, c) => {
            let _ = writeln!(out, "kind\tvisited\tbound\tdetail");
            match c {
                SafetyConclusion::Verified { initial_bound } => {
                    let _ = writeln!(out, "verified\t{}\t{}\t", report.visited, render_exact(initial_bound));
                }
                SafetyConclusion::Inconclusive { reason } => {
                    let _ = writeln!(out, "inconclusive\t{}\t\t{reason}", report.visited);
                }
            }
            for c in &report.counterexamples {
                let _ = writeln!(
                    out,
                    "counterexample\t{}\t{}\t{}",
                    mdp.tuple(c.state),
                    render_exact(&c.wp),
                    render_exact(&c.expt)
                );
            }
        }
    }
    out
}

fn conditional(c: &Conditional<BigRational>, style: &Style) -> String {
    match c {
        Conditional::Defined(v) => style.num(v),
        Conditional::UndefinedMaximal => "undefined (maximal)".into(),
    }
}

/// Time-to-failure profile.
pub fn ttf(profile: &TtfProfile<BigRational>, style: &Style) -> String {
    let mut out = String::new();
    let mode = profile.mode.iter().map(|n| &**n).collect::<Vec<_>>().join(",");
    match style.format {
        Format::Text => {
            let _ = writeln!(out, "mode {{{mode}}}");
            for e in &profile.entries {
                let _ = writeln!(
                    out,
                    "K={}: P(failure and mode) {}; P(failure | mode) {}",
                    e.k,
                    style.num(&e.joint),
                    conditional(&e.conditional, style)
                );
            }
            match profile.first_failure_step {
                Some(k) => {
                    let _ = writeln!(
                        out,
                        "first failure at step {k}; max probability {}",
                        style.sci(&profile.max_failure_probability)
                    );
                }
                None => {
                    let _ = writeln!(out, "no failure within {} steps", profile.entries.len().saturating_sub(1));
                }
            }
        }
        Format::Tsv => {
            let _ = writeln!(out, "kind\tmode\tK\tjoint\tconditional");
            for e in &profile.entries {
                let c = match &e.conditional {
                    Conditional::Defined(v) => render_exact(v),
                    Conditional::UndefinedMaximal => "undefined".into(),
                };
                let _ = writeln!(out, "entry\t{mode}\t{}\t{}\t{c}", e.k, render_exact(&e.joint));
            }
            let first = profile.first_failure_step.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(out, "summary\t{mode}\t{first}\t{}\t", render_exact(&profile.max_failure_probability));
        }
    }
    out
}

/// The consolidated failure-mode workflow report.
pub fn workflow(
    mdp: &ExplicitMdp<BigRational>,
    atoms: &[crate::value::Name],
    r: &WorkflowReport<BigRational>,
    style: &Style,
) -> String {
    let names = |ix: &[usize]| ix.iter().map(|&i| &*atoms[i]).collect::<Vec<_>>().join(",");
    let mut out = String::new();
    match (r.failure_k, style.format) {
        (Some(k), _) => out.push_str(&failure_traces(mdp, k, &r.traces, style)),
        (None, Format::Text) => {
            let _ = writeln!(out, "No failure tree within {} steps", r.horizon);
        }
        (None, Format::Tsv) => {}
    }
    match style.format {
        Format::Text => {
            for c in &r.candidates {
                let v = if c.is_mode { "failure mode" } else { "not a failure mode" };
                let _ = writeln!(out, "candidate {{{}}}: {v} at K={}", names(&c.atoms), r.horizon);
            }
            let _ = writeln!(out, "minimal failure modes:");
            for (m, p) in r.modes.iter().zip(&r.profiles) {
                let first = p.first_failure_step.map(|k| format!("step {k}")).unwrap_or_else(|| "never".into());
                let _ = writeln!(
                    out,
                    "  {{{}}}: first failure at {first}; max probability {}",
                    names(&m.atoms),
                    style.sci(&p.max_failure_probability)
                );
            }
        }
        Format::Tsv => {
            for c in &r.candidates {
                let _ = writeln!(out, "candidate\t{}\t{}", names(&c.atoms), c.is_mode);
            }
            for (m, p) in r.modes.iter().zip(&r.profiles) {
                let first = p.first_failure_step.map(|k| k.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "mode\t{}\t{first}\t{}",
                    names(&m.atoms),
                    render_exact(&p.max_failure_probability)
                );
            }
        }
    }
    out
}
