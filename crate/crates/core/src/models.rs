//! Built-in case-study machines, generated as source text and parsed, so
//! they exercise the same front end as user files.

use num_rational::BigRational;

use crate::expr::Expr;
use crate::lang::{parse, parse_expr_in, Diagnostic, Machine};
use crate::scalar::{ratio, render_exact};
use crate::value::Name;

/// Karger-style contraction loop that preserves a fixed minimum cut with
/// probability `2 / (n (n - 1))`. With `bug`, a merge may destroy the cut
/// with probability up to `3/4` instead of `2/nn`.
pub fn mincut_source(nn: u32, bug: bool) -> String {
    let p = if bug { "3/4".to_string() } else { "2/nn".to_string() };
    format!(
        "// Contraction of a multigraph with {nn} vertices down to two.\n\
         machine MinCut\n\
         const NN = {nn}\n\
         var nn : 2..{nn}\n\
         var ans : bool\n\
         init nn := NN; ans := true\n\
         op merge\n  while nn > 2 do (ans := false pchoice<= {p} or skip); nn := nn - 1 od\n\
         expectations 2 / (NN * (NN - 1)) => lift[ans] * 2 / (nn * (nn - 1))\n"
    )
}

pub fn mincut_model(nn: u32, bug: bool) -> Result<Machine, Vec<Diagnostic>> {
    if nn < 3 {
        return Err(vec![Diagnostic::semantic(format!("NN must be at least 3, got {nn}"))]);
    }
    parse(&mincut_source(nn, bug))
}

/// Which expectations clause the controller carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControllerClause {
    /// `q => max(p * lift[sg != 3], lift[sg = 2])`; `q = p = 1` asks for
    /// the probability of never failing.
    Reliability { q: BigRational, p: BigRational },
    /// `rr => (lift[sg in {0, 1}] * rr + lift[sg = 2]) * lift[t = maxtime]`.
    Timed { rr: BigRational },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControllerParams {
    pub maxtime: u32,
    pub s1p: BigRational,
    pub s2p: BigRational,
    pub a1p: BigRational,
    pub a2p: BigRational,
    pub mp: BigRational,
    /// The primary actuator activates only when both sensors are live.
    pub primary_requires_both: bool,
    /// Monitor and backup re-fire while their trigger holds instead of
    /// acting once from idle.
    pub refire: bool,
    pub clause: ControllerClause,
}

impl ControllerParams {
    /// Every component available with the same probability.
    pub fn uniform(maxtime: u32, avail: BigRational) -> Self {
        ControllerParams {
            maxtime,
            s1p: avail.clone(),
            s2p: avail.clone(),
            a1p: avail.clone(),
            a2p: avail.clone(),
            mp: avail,
            primary_requires_both: false,
            refire: false,
            clause: ControllerClause::Reliability { q: ratio(1, 1), p: ratio(1, 1) },
        }
    }
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams::uniform(6, ratio(19, 20))
    }
}

/// Two sensors, a primary actuator, a monitor and a backup actuator.
///
/// Component states: 0 idle, 1 live, 2 dead. A component action makes it
/// live with its availability and dead otherwise. Each acts once from idle;
/// with `refire` the monitor re-fires while the primary is dead and the
/// backup while the monitor is live. `Skip`
/// only runs when no component can act. At `t = maxtime - 1` the signal is
/// sent: `sg` becomes 2 when a live actuator is paired with a live sensor
/// and 3 (failure) otherwise. Every operation advances `t`.
pub fn controller_source(p: &ControllerParams) -> String {
    let last = p.maxtime.saturating_sub(1);
    let primary = if p.primary_requires_both {
        "a1 = 0 && s1 = 1 && s2 = 1"
    } else {
        "a1 = 0 && (s1 = 1 || s2 = 1)"
    };
    let (monitor, backup) = if p.refire {
        ("a1 = 2", "m = 1")
    } else {
        ("a1 = 2 && m = 0", "m = 1 && a2 = 0")
    };
    let components = [
        ("Sensor1Action", "s1 = 0", "s1", "s1p"),
        ("Sensor2Action", "s2 = 0", "s2", "s2p"),
        ("PrimaryAction", primary, "a1", "a1p"),
        ("MonitorAction", monitor, "m", "mp"),
        ("BackupAction", backup, "a2", "a2p"),
    ];
    let live = format!("sg = 1 && t < {last}");
    let mut src = String::new();
    src.push_str("// Redundant sensor/actuator controller with a monitored backup.\n");
    src.push_str("machine Controller\n");
    src.push_str(&format!("const maxtime = {}\n", p.maxtime));
    for (name, v) in [("s1p", &p.s1p), ("s2p", &p.s2p), ("a1p", &p.a1p), ("a2p", &p.a2p), ("mp", &p.mp)] {
        src.push_str(&format!("const {name} = {}\n", render_exact(v)));
    }
    match &p.clause {
        ControllerClause::Reliability { q, p } => {
            src.push_str(&format!("const q = {}\nconst p = {}\n", render_exact(q), render_exact(p)));
        }
        ControllerClause::Timed { rr } => src.push_str(&format!("const rr = {}\n", render_exact(rr))),
    }
    src.push_str("var sg : 0..3\n");
    for v in ["s1", "s2", "a1", "a2", "m"] {
        src.push_str(&format!("var {v} : 0..2\n"));
    }
    src.push_str(&format!("var t : 0..{}\n", p.maxtime));
    src.push_str("init sg := 1; s1 := 0; s2 := 0; a1 := 0; a2 := 0; m := 0; t := 0\n");
    for (name, guard, var, prob) in components {
        src.push_str(&format!(
            "op {name} when {live} && {guard}\n  ({var} := 1 pchoice {prob} or {var} := 2); t := t + 1\n"
        ));
    }
    let idle: Vec<String> = components.iter().map(|(_, g, _, _)| format!("({g})")).collect();
    src.push_str(&format!("op Skip when {live} && !({})\n  t := t + 1\n", idle.join(" || ")));
    src.push_str(&format!(
        "op SendSignal when sg = 1 && t = {last}\n  \
         (if a2 = 1 && s2 = 1 then sg := 2\n   \
         else if a1 = 1 && s1 = 1 then sg := 2\n   \
         else if a1 = 1 && s2 = 1 then sg := 2\n   \
         else sg := 3 fi fi fi); t := t + 1\n"
    ));
    match p.clause {
        ControllerClause::Reliability { .. } => {
            src.push_str("expectations q => max(p * lift[sg != 3], lift[sg = 2])\n");
        }
        ControllerClause::Timed { .. } => src.push_str(
            "expectations rr => (lift[sg in {0, 1}] * rr + lift[sg = 2]) * lift[t = maxtime]\n",
        ),
    }
    src
}

pub fn controller_model(p: &ControllerParams) -> Result<Machine, Vec<Diagnostic>> {
    if p.maxtime < 1 {
        return Err(vec![Diagnostic::semantic("maxtime must be at least 1")]);
    }
    parse(&controller_source(p))
}

/// Component-death atoms `S1, S2, A1, A2, M`.
pub fn controller_atoms(m: &Machine) -> Vec<(Name, Expr)> {
    [("S1", "s1 = 2"), ("S2", "s2 = 2"), ("A1", "a1 = 2"), ("A2", "a2 = 2"), ("M", "m = 2")]
        .into_iter()
        .map(|(n, src)| (Name::from(n), parse_expr_in(m, src).expect("atoms parse")))
        .collect()
}

/// The failure predicate `sg = 3`.
pub fn controller_failure(m: &Machine) -> Expr {
    parse_expr_in(m, "sg = 3").expect("failure predicate parses")
}

/// A loop that leaves `x = 1` for `0` or `2` with probability `2/3` per
/// iteration; `x / 2` is invariant in expectation.
pub fn loop_source() -> String {
    "// Symmetric exit from the middle state.\n\
     machine Loop\n\
     var x : 0..2\n\
     init x := 1\n\
     op body\n  while x = 1 do x := 0 pchoice 1/3 or (x := 1 pchoice 1/2 or x := 2) od\n\
     expectations 1/2 => x / 2\n"
        .to_string()
}

pub fn loop_model() -> Machine {
    parse(&loop_source()).expect("built-in loop parses")
}

/// A counter nudged up with probability `p` and down otherwise, or reset.
pub fn faulty_source(p: &BigRational, max: u32, clamp: bool) -> String {
    let policy = if clamp { " clamp" } else { "" };
    format!(
        "machine Faulty\n\
         const p = {}\n\
         var cc : 0..{max}{policy}\n\
         init cc := 0\n\
         op OpX cc := cc + 1 pchoice p or cc := cc - 1\n\
         op OpY cc := 0\n\
         expectations 0 => cc\n",
        render_exact(p)
    )
}

pub fn faulty_model(p: &BigRational, max: u32, clamp: bool) -> Result<Machine, Vec<Diagnostic>> {
    parse(&faulty_source(p, max, clamp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{print_machine, typecheck};

    #[test]
    fn builtins_parse_and_typecheck() {
        for m in [
            mincut_model(5, false).unwrap(),
            mincut_model(3, true).unwrap(),
            controller_model(&ControllerParams::default()).unwrap(),
            loop_model(),
        ] {
            assert_eq!(typecheck(&m), vec![], "{}", print_machine(&m));
            assert_eq!(parse(&print_machine(&m)).unwrap(), m);
        }
    }

    #[test]
    fn faulty_domain_diagnostic() {
        let m = faulty_model(&ratio(1, 2), 10, false).unwrap();
        let d = typecheck(&m);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("OpX") && d[0].message.contains("yields -1"), "{}", d[0]);
        assert!(typecheck(&faulty_model(&ratio(1, 2), 10, true).unwrap()).is_empty());
    }
}
