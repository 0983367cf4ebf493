//! Explicit-state export in three text files.
//!
//! * `.sta`: header `(v1,v2,...)`, then `i:(x1,x2,...)` per state.
//! * `.tra`: header `states choices transitions`, an optional
//!   `init i:p ...` line when the initial distribution is not a point, then
//!   `src action dst num/den decimal label` per transition.
//! * `.lab`: header `0="init" 1="name" ...`, then `i: l1 l2 ...` for every
//!   state carrying at least one label.
//!
//! Ordering is by state index, then action index, then successor index, so
//! the output is a pure function of the MDP.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::mdp::{Action, ExplicitMdp, SKIP};
use crate::scalar::{render_exact, render_scientific};
use crate::value::{Name, State, Value};

/// Digits after the point in the decimal column.
const DECIMAL_DIGITS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportFiles {
    pub sta: String,
    pub tra: String,
    pub lab: String,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{file} line {line}: {message}")]
    Syntax { file: &'static str, line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// A labelled MDP read back from disk.
#[derive(Clone, Debug)]
pub struct Imported {
    pub mdp: ExplicitMdp<BigRational>,
    /// User labels in header order, excluding `init`.
    pub labels: Vec<(Name, Vec<bool>)>,
}

pub fn export(mdp: &ExplicitMdp<BigRational>, labels: &[(Name, Vec<bool>)]) -> ExportFiles {
    let mut sta = String::new();
    let names: Vec<&str> = mdp.vars.iter().map(|v| &**v).collect();
    let _ = writeln!(sta, "({})", names.join(","));
    for i in 0..mdp.num_states() {
        let _ = writeln!(sta, "{i}:{}", mdp.tuple(i));
    }

    let mut tra = String::new();
    let _ = writeln!(tra, "{} {} {}", mdp.num_states(), mdp.num_choices(), mdp.num_transitions());
    if mdp.initial.len() != 1 {
        let items: Vec<String> = mdp.initial.iter().map(|(i, p)| format!("{i}:{}", render_exact(p))).collect();
        let _ = writeln!(tra, "init {}", items.join(" "));
    }
    for (s, acts) in mdp.actions.iter().enumerate() {
        for (a, act) in acts.iter().enumerate() {
            for (t, p) in &act.dist {
                let _ = writeln!(
                    tra,
                    "{s} {a} {t} {} {} {}",
                    render_exact(p),
                    render_scientific(p, DECIMAL_DIGITS),
                    act.label
                );
            }
        }
    }

    let mut lab = String::new();
    let mut header = vec!["0=\"init\"".to_string()];
    header.extend(labels.iter().enumerate().map(|(k, (n, _))| format!("{}=\"{n}\"", k + 1)));
    let _ = writeln!(lab, "{}", header.join(" "));
    let init: Vec<bool> = {
        let mut v = vec![false; mdp.num_states()];
        for (i, _) in &mdp.initial {
            v[*i] = true;
        }
        v
    };
    for i in 0..mdp.num_states() {
        let mut ids = Vec::new();
        if init[i] {
            ids.push("0".to_string());
        }
        ids.extend(labels.iter().enumerate().filter(|(_, (_, m))| m[i]).map(|(k, _)| (k + 1).to_string()));
        if !ids.is_empty() {
            let _ = writeln!(lab, "{i}: {}", ids.join(" "));
        }
    }
    ExportFiles { sta, tra, lab }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<prefix>.sta`, `<prefix>.tra` and `<prefix>.lab`.
pub fn write_files(prefix: &Path, files: &ExportFiles) -> Result<Vec<PathBuf>, ExportError> {
    let mut out = Vec::new();
    for (ext, body) in [("sta", &files.sta), ("tra", &files.tra), ("lab", &files.lab)] {
        let path = with_ext(prefix, ext);
        std::fs::write(&path, body).map_err(|source| ExportError::Io { path: path.clone(), source })?;
        out.push(path);
    }
    Ok(out)
}

pub fn read_files(prefix: &Path) -> Result<ExportFiles, ExportError> {
    let read = |ext: &str| {
        let path = with_ext(prefix, ext);
        std::fs::read_to_string(&path).map_err(|source| ExportError::Io { path, source })
    };
    Ok(ExportFiles { sta: read("sta")?, tra: read("tra")?, lab: read("lab")? })
}

fn syntax(file: &'static str, line: usize, message: impl Into<String>) -> ExportError {
    ExportError::Syntax { file, line, message: message.into() }
}

fn parse_value(s: &str) -> Option<Value> {
    match s {
        "true" => return Some(Value::Bool(true)),
        "false" => return Some(Value::Bool(false)),
        _ => {}
    }
    if s.contains('/') {
        return parse_ratio(s).map(Value::number);
    }
    s.parse::<i64>().ok().map(Value::Int)
}

fn parse_ratio(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let (n, d): (BigInt, BigInt) = (n.parse().ok()?, d.parse().ok()?);
            (d != BigInt::from(0)).then(|| BigRational::new(n, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

fn tuple_items(s: &str) -> Option<Vec<&str>> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    Some(if inner.is_empty() { Vec::new() } else { inner.split(',').collect() })
}

pub fn import(files: &ExportFiles) -> Result<Imported, ExportError> {
    let mut sta = files.sta.lines().enumerate();
    let (_, head) = sta.next().ok_or_else(|| syntax("sta", 1, "missing header"))?;
    let vars: Vec<Name> = tuple_items(head)
        .ok_or_else(|| syntax("sta", 1, "expected `(v1,...)`"))?
        .into_iter()
        .map(Name::from)
        .collect();
    let mut states = Vec::new();
    for (ln, line) in sta {
        let (idx, tup) = line.split_once(':').ok_or_else(|| syntax("sta", ln + 1, "expected `i:(...)`"))?;
        if idx.parse::<usize>().ok() != Some(states.len()) {
            return Err(syntax("sta", ln + 1, format!("expected index {}", states.len())));
        }
        let items = tuple_items(tup).ok_or_else(|| syntax("sta", ln + 1, "malformed tuple"))?;
        if items.len() != vars.len() {
            return Err(syntax("sta", ln + 1, format!("expected {} values", vars.len())));
        }
        let mut s = State::new();
        for (v, it) in vars.iter().zip(items) {
            let val = parse_value(it).ok_or_else(|| syntax("sta", ln + 1, format!("bad value `{it}`")))?;
            s.set(v.clone(), val);
        }
        states.push(s);
    }
    let n = states.len();

    let mut tra = files.tra.lines().enumerate().peekable();
    let (_, head) = tra.next().ok_or_else(|| syntax("tra", 1, "missing header"))?;
    let counts: Vec<usize> = head.split_whitespace().filter_map(|x| x.parse().ok()).collect();
    if counts.len() != 3 || counts[0] != n {
        return Err(syntax("tra", 1, format!("expected `{n} choices transitions`")));
    }
    let mut initial = None;
    if let Some((ln, line)) = tra.peek().copied() {
        if let Some(rest) = line.strip_prefix("init ") {
            let mut d = Vec::new();
            for item in rest.split_whitespace() {
                let (i, p) = item.split_once(':').ok_or_else(|| syntax("tra", ln + 1, "expected `i:p`"))?;
                let i: usize = i.parse().map_err(|_| syntax("tra", ln + 1, "bad state index"))?;
                let p = parse_ratio(p).ok_or_else(|| syntax("tra", ln + 1, "bad probability"))?;
                d.push((i, p));
            }
            initial = Some(d);
            tra.next();
        }
    }
    let mut actions: Vec<Vec<Action<BigRational>>> = vec![Vec::new(); n];
    let mut op_ids: BTreeMap<Name, usize> = BTreeMap::new();
    for (ln, line) in tra {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(syntax("tra", ln + 1, "expected `src action dst p decimal label`"));
        }
        let bad = |what: &str| syntax("tra", ln + 1, format!("bad {what}"));
        let s: usize = f[0].parse().map_err(|_| bad("source"))?;
        let a: usize = f[1].parse().map_err(|_| bad("action index"))?;
        let t: usize = f[2].parse().map_err(|_| bad("target"))?;
        let p = parse_ratio(f[3]).ok_or_else(|| bad("probability"))?;
        if s >= n || t >= n {
            return Err(bad("state index"));
        }
        let label = Name::from(f[5]);
        let acts = &mut actions[s];
        if a == acts.len() {
            let next = op_ids.len();
            let op = (&*label != SKIP).then(|| *op_ids.entry(label.clone()).or_insert(next));
            acts.push(Action { label, op, dist: Vec::new() });
        } else if a + 1 != acts.len() || acts[a].label != label {
            return Err(bad("action ordering"));
        }
        let dist = &mut acts[a].dist;
        if dist.last().is_some_and(|(u, _)| *u >= t) {
            return Err(bad("successor ordering"));
        }
        dist.push((t, p));
    }

    let mut lab = files.lab.lines().enumerate();
    let (_, head) = lab.next().ok_or_else(|| syntax("lab", 1, "missing header"))?;
    let mut names: Vec<Name> = Vec::new();
    for (k, item) in head.split_whitespace().enumerate() {
        let (id, name) = item.split_once('=').ok_or_else(|| syntax("lab", 1, "expected `i=\"name\"`"))?;
        let name = name.strip_prefix('"').and_then(|x| x.strip_suffix('"'));
        match (id.parse::<usize>(), name) {
            (Ok(i), Some(nm)) if i == k => names.push(Name::from(nm)),
            _ => return Err(syntax("lab", 1, format!("bad label declaration `{item}`"))),
        }
    }
    if names.first().map(|x| &**x) != Some("init") {
        return Err(syntax("lab", 1, "label 0 must be `init`"));
    }
    let mut member = vec![vec![false; n]; names.len()];
    for (ln, line) in lab {
        let (i, ids) = line.split_once(':').ok_or_else(|| syntax("lab", ln + 1, "expected `i: ids`"))?;
        let i: usize = i.parse().ok().filter(|i| *i < n).ok_or_else(|| syntax("lab", ln + 1, "bad state index"))?;
        for id in ids.split_whitespace() {
            let k: usize = id.parse().ok().filter(|k| *k < names.len()).ok_or_else(|| syntax("lab", ln + 1, "bad label id"))?;
            member[k][i] = true;
        }
    }
    let initial = match initial {
        Some(d) => d,
        None => {
            let init: Vec<usize> = (0..n).filter(|&i| member[0][i]).collect();
            match init.as_slice() {
                [i] => vec![(*i, BigRational::one())],
                _ => return Err(ExportError::Invalid(format!("{} initial states without an `init` line", init.len()))),
            }
        }
    };
    let mdp = ExplicitMdp::from_parts(vars, states, initial, actions).map_err(|e| ExportError::Invalid(e.to_string()))?;
    let labels = names.into_iter().zip(member).skip(1).collect();
    Ok(Imported { mdp, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_mdp, BuildOptions};
    use crate::models::loop_model;

    #[test]
    fn loop_export_round_trip() {
        let mdp: ExplicitMdp<BigRational> = build_mdp(&loop_model(), BuildOptions::default()).unwrap();
        let zero = mdp.satisfying(&crate::expr::Expr::eq(crate::expr::Expr::var("x"), crate::expr::Expr::int(0))).unwrap();
        let files = export(&mdp, &[(Name::from("zero"), zero)]);
        assert_eq!(files.tra.lines().count(), 1 + 5);
        assert_eq!(files.sta.lines().count(), 1 + 3);
        let back = import(&files).unwrap();
        assert_eq!(export(&back.mdp, &back.labels), files);
    }
}
