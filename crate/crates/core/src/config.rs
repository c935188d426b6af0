//! The configuration normal form (restricted names, frame substitution,
//! multiset of plain processes) and the partial-normal-form machinery that
//! turns closed extended processes into configurations.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::process::{ExtendedProcess, Process};
use crate::terms::{fresh_name, Name, Substitution, Term, Var};

/// A frame: restricted names over an exported substitution. The substitution
/// is kept fully resolved, so no domain variable occurs in its range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub restricted: BTreeSet<Name>,
    pub subst: Substitution,
}

impl Frame {
    pub fn empty() -> Self {
        Frame { restricted: BTreeSet::new(), subst: Substitution::new() }
    }

    pub fn new(restricted: BTreeSet<Name>, subst: Substitution) -> Result<Self> {
        let subst = subst.resolved()?;
        Ok(Frame { restricted, subst })
    }

    pub fn dom(&self) -> BTreeSet<Var> {
        self.subst.domain().cloned().collect()
    }

    /// Free names of the range terms that are not restricted.
    pub fn public_names(&self) -> BTreeSet<Name> {
        self.subst
            .iter()
            .flat_map(|(_, t)| t.fn_())
            .filter(|n| !self.restricted.contains(n))
            .collect()
    }
}

/// The execution form of a closed extended process: a set of restricted
/// names, the exported frame substitution, and a multiset of plain processes
/// with the frame already applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub restricted: BTreeSet<Name>,
    pub frame: Substitution,
    pub procs: Vec<Process>,
}

impl Configuration {
    pub fn new() -> Self {
        Configuration { restricted: BTreeSet::new(), frame: Substitution::new(), procs: Vec::new() }
    }

    pub fn dom(&self) -> BTreeSet<Var> {
        self.frame.domain().cloned().collect()
    }

    /// All names in use: restricted, in the frame range, or in processes.
    pub fn used_names(&self) -> BTreeSet<Name> {
        let mut used = self.restricted.clone();
        for (_, t) in self.frame.iter() {
            used.extend(t.fn_());
        }
        for p in &self.procs {
            used.extend(p.fn_());
        }
        used
    }

    /// Extend the frame with one ground binding.
    pub fn bind_frame(&mut self, v: Var, t: Term) -> Result<()> {
        if self.frame.contains(&v) {
            return Err(Error::model(format!("duplicate frame binding for {v}")));
        }
        self.frame.bind(v, t)
    }
}

impl Default for Configuration {
    fn default() -> Self {
        Configuration::new()
    }
}

/// Dependency-ordered, fully resolved parallel composition of two cycle-free
/// substitutions with disjoint domains.
pub fn compose_subst(s1: &Substitution, s2: &Substitution) -> Result<Substitution> {
    let mut merged = Substitution::new();
    for (v, t) in s1.iter() {
        merged.bind_unchecked(v.clone(), t.clone());
    }
    for (v, t) in s2.iter() {
        if merged.contains(v) {
            return Err(Error::model(format!("substitutions share the variable {v}")));
        }
        merged.bind_unchecked(v.clone(), t.clone());
    }
    merged.resolved()
}

/// Split a plain process into its top-level parallel components, dropping
/// nils and pulling top-level restrictions into `restricted` with fresh
/// names. This realizes the multiset view of configurations.
pub fn flatten_process(
    p: Process,
    restricted: &mut BTreeSet<Name>,
    used_names: &mut BTreeSet<Name>,
    out: &mut Vec<Process>,
) {
    match p {
        Process::Nil => {}
        Process::Par(a, b) => {
            flatten_process(*a, restricted, used_names, out);
            flatten_process(*b, restricted, used_names, out);
        }
        Process::ResName(n, body) => {
            let fresh = fresh_name(&n.base, &n.sort, used_names);
            used_names.insert(fresh.clone());
            restricted.insert(fresh.clone());
            let body = if fresh == n { *body } else { body.rename_name(&n, &fresh) };
            flatten_process(body, restricted, used_names, out);
        }
        other => out.push(other),
    }
}

struct Pnf {
    restricted: Vec<Name>,
    subst: Substitution,
    procs: Vec<Process>,
}

/// Partial normal form, computed by induction on the extended process. The
/// invariant is that no domain variable of `subst` occurs in `procs` or in
/// the range of `subst`.
fn pnf(a: &ExtendedProcess, used_names: &mut BTreeSet<Name>) -> Result<Pnf> {
    match a {
        ExtendedProcess::Plain(p) => Ok(Pnf {
            restricted: Vec::new(),
            subst: Substitution::new(),
            procs: vec![p.clone()],
        }),
        ExtendedProcess::Active(v, t) => {
            let mut subst = Substitution::new();
            subst.bind(v.clone(), t.clone())?;
            Ok(Pnf { restricted: Vec::new(), subst, procs: Vec::new() })
        }
        ExtendedProcess::ResName(n, body) => {
            let mut inner = pnf(body, used_names)?;
            // freshen the bound name so it cannot clash with anything seen
            let fresh = fresh_name(&n.base, &n.sort, used_names);
            used_names.insert(fresh.clone());
            if fresh != *n {
                let t = Term::Name(fresh.clone());
                inner.subst = inner
                    .subst
                    .iter()
                    .map(|(v, m)| (v.clone(), m.subst_name(n, &t)))
                    .collect();
                inner.procs = inner.procs.iter().map(|p| p.rename_name(n, &fresh)).collect();
            }
            inner.restricted.push(fresh);
            Ok(inner)
        }
        ExtendedProcess::ResVar(v, body) => {
            let mut inner = pnf(body, used_names)?;
            if inner.subst.remove(v).is_none() {
                return Err(Error::model(format!(
                    "restricted variable {v} has no active substitution"
                )));
            }
            Ok(inner)
        }
        ExtendedProcess::Par(x, y) => {
            let left = pnf(x, used_names)?;
            let right = pnf(y, used_names)?;
            // bound names were freshened on the way up, so the two sides are
            // already renamed apart
            let subst = compose_subst(&left.subst, &right.subst)?;
            let mut restricted = left.restricted;
            restricted.extend(right.restricted);
            let procs = left
                .procs
                .into_iter()
                .chain(right.procs)
                .map(|p| p.apply_subst(&subst))
                .collect();
            Ok(Pnf { restricted, subst, procs })
        }
    }
}

/// Convert a closed, well-sorted extended process into its configuration,
/// following the partial normal form construction.
pub fn to_config(a: &ExtendedProcess) -> Result<Configuration> {
    if !a.is_closed() {
        let fv = a.fv();
        let dom = a.dom();
        let missing: Vec<String> = fv.difference(&dom).map(|v| v.to_string()).collect();
        return Err(Error::precondition(format!(
            "process is not closed: free variables {{{}}}",
            missing.join(", ")
        )));
    }
    let mut used_names = a.fn_();
    let normal = pnf(a, &mut used_names)?;
    let subst = normal.subst.resolved()?;
    let mut restricted: BTreeSet<Name> = normal.restricted.into_iter().collect();
    let mut procs = Vec::new();
    for p in normal.procs {
        let applied = p.apply_subst(&subst);
        flatten_process(applied, &mut restricted, &mut used_names, &mut procs);
    }
    Ok(Configuration { restricted, frame: subst, procs })
}

/// The frame of a configuration: the exported substitution under the
/// restricted names that actually occur in its range.
pub fn frame_of(c: &Configuration) -> Frame {
    let range_names: BTreeSet<Name> = c.frame.iter().flat_map(|(_, t)| t.fn_()).collect();
    Frame {
        restricted: c.restricted.intersection(&range_names).cloned().collect(),
        subst: c.frame.clone(),
    }
}

/// Rebuild an extended process from a configuration: the restrictions over
/// the frame substitution in parallel with the processes.
pub fn reconstruct(c: &Configuration) -> ExtendedProcess {
    let mut body: Option<ExtendedProcess> = None;
    for (v, t) in c.frame.iter() {
        let a = ExtendedProcess::Active(v.clone(), t.clone());
        body = Some(match body {
            None => a,
            Some(b) => ExtendedProcess::par(b, a),
        });
    }
    for p in &c.procs {
        let a = ExtendedProcess::Plain(p.clone());
        body = Some(match body {
            None => a,
            Some(b) => ExtendedProcess::par(b, a),
        });
    }
    let mut out = body.unwrap_or(ExtendedProcess::Plain(Process::Nil));
    for n in c.restricted.iter().rev() {
        out = ExtendedProcess::res(n.clone(), out);
    }
    out
}
