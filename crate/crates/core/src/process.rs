//! Process and extended-process syntax, sort checking, free names and
//! variables, domain, closedness, and alpha renaming.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::terms::{FunSymbol, Name, Signature, Sort, Substitution, Term, Var};

/// Plain processes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Nil,
    Par(Box<Process>, Box<Process>),
    Repl(Box<Process>),
    ResName(Name, Box<Process>),
    If { lhs: Term, rhs: Term, then_p: Box<Process>, else_p: Box<Process> },
    In { chan: Term, var: Var, body: Box<Process> },
    Out { chan: Term, msg: Term, body: Box<Process> },
}

impl Process {
    pub fn par(a: Process, b: Process) -> Process {
        Process::Par(Box::new(a), Box::new(b))
    }

    pub fn res(n: Name, p: Process) -> Process {
        Process::ResName(n, Box::new(p))
    }

    pub fn repl(p: Process) -> Process {
        Process::Repl(Box::new(p))
    }

    pub fn if_then_else(lhs: Term, rhs: Term, then_p: Process, else_p: Process) -> Process {
        Process::If {
            lhs,
            rhs,
            then_p: Box::new(then_p),
            else_p: Box::new(else_p),
        }
    }

    pub fn input(chan: Term, var: Var, body: Process) -> Process {
        Process::In { chan, var, body: Box::new(body) }
    }

    pub fn output(chan: Term, msg: Term, body: Process) -> Process {
        Process::Out { chan, msg, body: Box::new(body) }
    }

    pub fn fv(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Var>) {
        match self {
            Process::Nil => {}
            Process::Par(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Process::Repl(p) | Process::ResName(_, p) => p.collect_fv(out),
            Process::If { lhs, rhs, then_p, else_p } => {
                out.extend(lhs.fv());
                out.extend(rhs.fv());
                then_p.collect_fv(out);
                else_p.collect_fv(out);
            }
            Process::In { chan, var, body } => {
                out.extend(chan.fv());
                let mut inner = BTreeSet::new();
                body.collect_fv(&mut inner);
                inner.remove(var);
                out.extend(inner);
            }
            Process::Out { chan, msg, body } => {
                out.extend(chan.fv());
                out.extend(msg.fv());
                body.collect_fv(out);
            }
        }
    }

    pub fn fn_(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_fn(&mut out);
        out
    }

    fn collect_fn(&self, out: &mut BTreeSet<Name>) {
        match self {
            Process::Nil => {}
            Process::Par(a, b) => {
                a.collect_fn(out);
                b.collect_fn(out);
            }
            Process::Repl(p) => p.collect_fn(out),
            Process::ResName(n, p) => {
                let mut inner = BTreeSet::new();
                p.collect_fn(&mut inner);
                inner.remove(n);
                out.extend(inner);
            }
            Process::If { lhs, rhs, then_p, else_p } => {
                out.extend(lhs.fn_());
                out.extend(rhs.fn_());
                then_p.collect_fn(out);
                else_p.collect_fn(out);
            }
            Process::In { chan, body, .. } => {
                out.extend(chan.fn_());
                body.collect_fn(out);
            }
            Process::Out { chan, msg, body } => {
                out.extend(chan.fn_());
                out.extend(msg.fn_());
                body.collect_fn(out);
            }
        }
    }

    /// Capture-avoiding substitution of terms for free variables.
    pub fn apply_subst(&self, s: &Substitution) -> Process {
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::par(a.apply_subst(s), b.apply_subst(s)),
            Process::Repl(p) => Process::repl(p.apply_subst(s)),
            Process::ResName(n, p) => {
                // names cannot be captured by a variable substitution, but a
                // bound name colliding with range names must be freshened
                let range_names: BTreeSet<Name> =
                    s.iter().flat_map(|(_, t)| t.fn_()).collect();
                if range_names.contains(n) {
                    let mut used = range_names;
                    used.extend(p.fn_());
                    let fresh = crate::terms::fresh_name(&n.base, &n.sort, &used);
                    let renamed = p.rename_name(n, &fresh);
                    Process::res(fresh, renamed.apply_subst(s))
                } else {
                    Process::res(n.clone(), p.apply_subst(s))
                }
            }
            Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
                s.apply_simultaneous(lhs),
                s.apply_simultaneous(rhs),
                then_p.apply_subst(s),
                else_p.apply_subst(s),
            ),
            Process::In { chan, var, body } => {
                let chan = s.apply_simultaneous(chan);
                let mut inner = s.clone();
                inner.remove(var); // binder shadows
                let range_vars: BTreeSet<Var> =
                    inner.iter().flat_map(|(_, t)| t.fv()).collect();
                if range_vars.contains(var) {
                    let mut used = range_vars;
                    used.extend(body.fv());
                    used.extend(inner.domain().cloned());
                    let fresh = crate::terms::fresh_var(&var.base, &var.sort, &used);
                    let renamed = body.rename_var(var, &fresh);
                    Process::In { chan, var: fresh, body: Box::new(renamed.apply_subst(&inner)) }
                } else {
                    Process::In {
                        chan,
                        var: var.clone(),
                        body: Box::new(body.apply_subst(&inner)),
                    }
                }
            }
            Process::Out { chan, msg, body } => Process::output(
                s.apply_simultaneous(chan),
                s.apply_simultaneous(msg),
                body.apply_subst(s),
            ),
        }
    }

    /// Rename every free occurrence of a name.
    pub fn rename_name(&self, from: &Name, to: &Name) -> Process {
        let t = Term::Name(to.clone());
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::par(a.rename_name(from, to), b.rename_name(from, to)),
            Process::Repl(p) => Process::repl(p.rename_name(from, to)),
            Process::ResName(n, p) => {
                if n == from {
                    Process::res(n.clone(), (**p).clone())
                } else {
                    Process::res(n.clone(), p.rename_name(from, to))
                }
            }
            Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
                lhs.subst_name(from, &t),
                rhs.subst_name(from, &t),
                then_p.rename_name(from, to),
                else_p.rename_name(from, to),
            ),
            Process::In { chan, var, body } => Process::In {
                chan: chan.subst_name(from, &t),
                var: var.clone(),
                body: Box::new(body.rename_name(from, to)),
            },
            Process::Out { chan, msg, body } => Process::output(
                chan.subst_name(from, &t),
                msg.subst_name(from, &t),
                body.rename_name(from, to),
            ),
        }
    }

    /// Rename every free occurrence of a variable.
    pub fn rename_var(&self, from: &Var, to: &Var) -> Process {
        let s = Substitution::from_iter([(from.clone(), Term::Var(to.clone()))]);
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::par(a.rename_var(from, to), b.rename_var(from, to)),
            Process::Repl(p) => Process::repl(p.rename_var(from, to)),
            Process::ResName(n, p) => Process::res(n.clone(), p.rename_var(from, to)),
            Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
                s.apply_simultaneous(lhs),
                s.apply_simultaneous(rhs),
                then_p.rename_var(from, to),
                else_p.rename_var(from, to),
            ),
            Process::In { chan, var, body } => {
                if var == from {
                    Process::In {
                        chan: s.apply_simultaneous(chan),
                        var: var.clone(),
                        body: body.clone(),
                    }
                } else {
                    Process::In {
                        chan: s.apply_simultaneous(chan),
                        var: var.clone(),
                        body: Box::new(body.rename_var(from, to)),
                    }
                }
            }
            Process::Out { chan, msg, body } => Process::output(
                s.apply_simultaneous(chan),
                s.apply_simultaneous(msg),
                body.rename_var(from, to),
            ),
        }
    }
}

/// Extended processes: plain processes plus active substitutions and
/// variable restriction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedProcess {
    Plain(Process),
    Par(Box<ExtendedProcess>, Box<ExtendedProcess>),
    ResName(Name, Box<ExtendedProcess>),
    ResVar(Var, Box<ExtendedProcess>),
    Active(Var, Term),
}

impl ExtendedProcess {
    pub fn par(a: ExtendedProcess, b: ExtendedProcess) -> ExtendedProcess {
        ExtendedProcess::Par(Box::new(a), Box::new(b))
    }

    pub fn res(n: Name, p: ExtendedProcess) -> ExtendedProcess {
        ExtendedProcess::ResName(n, Box::new(p))
    }

    pub fn res_var(v: Var, p: ExtendedProcess) -> ExtendedProcess {
        ExtendedProcess::ResVar(v, Box::new(p))
    }

    pub fn fv(&self) -> BTreeSet<Var> {
        match self {
            ExtendedProcess::Plain(p) => p.fv(),
            ExtendedProcess::Par(a, b) => {
                let mut out = a.fv();
                out.extend(b.fv());
                out
            }
            ExtendedProcess::ResName(_, p) => p.fv(),
            ExtendedProcess::ResVar(v, p) => {
                let mut out = p.fv();
                out.remove(v);
                out
            }
            ExtendedProcess::Active(v, t) => {
                let mut out = t.fv();
                out.insert(v.clone());
                out
            }
        }
    }

    pub fn fn_(&self) -> BTreeSet<Name> {
        match self {
            ExtendedProcess::Plain(p) => p.fn_(),
            ExtendedProcess::Par(a, b) => {
                let mut out = a.fn_();
                out.extend(b.fn_());
                out
            }
            ExtendedProcess::ResName(n, p) => {
                let mut out = p.fn_();
                out.remove(n);
                out
            }
            ExtendedProcess::ResVar(_, p) => p.fn_(),
            ExtendedProcess::Active(_, t) => t.fn_(),
        }
    }

    pub fn dom(&self) -> BTreeSet<Var> {
        match self {
            ExtendedProcess::Plain(_) => BTreeSet::new(),
            ExtendedProcess::Par(a, b) => {
                let mut out = a.dom();
                out.extend(b.dom());
                out
            }
            ExtendedProcess::ResName(_, p) => p.dom(),
            ExtendedProcess::ResVar(v, p) => {
                let mut out = p.dom();
                out.remove(v);
                out
            }
            ExtendedProcess::Active(v, _) => BTreeSet::from([v.clone()]),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.fv() == self.dom()
    }
}

/// `fv`, `fn`, and `dom` of an extended process in one call.
pub fn fv_fn_dom(a: &ExtendedProcess) -> (BTreeSet<Var>, BTreeSet<Name>, BTreeSet<Var>) {
    (a.fv(), a.fn_(), a.dom())
}

/// Sorting context: the signature plus sorts for the free names and
/// variables a model declares.
#[derive(Debug, Clone, Default)]
pub struct SortContext {
    pub names: BTreeMap<String, Sort>,
    pub vars: BTreeMap<String, Sort>,
    pub funs: BTreeMap<String, FunSymbol>,
}

impl SortContext {
    fn _key(name: &crate::terms::IStr) -> String {
        name.to_string()
    }
}

impl SortContext {
    pub fn from_signature(sig: &Signature) -> Self {
        SortContext {
            names: BTreeMap::new(),
            vars: BTreeMap::new(),
            funs: sig.symbols().map(|s| (s.name.to_string(), s.clone())).collect(),
        }
    }
}

struct SortChecker<'a> {
    sig: &'a Signature,
    path: Vec<String>,
}

impl<'a> SortChecker<'a> {
    fn err(&self, msg: String) -> Error {
        Error::sort_at(msg, self.path.clone())
    }

    fn check_term(&self, t: &Term) -> Result<()> {
        self.sig.check_term(t).map_err(|e| match e {
            Error::Sort { msg, .. } => self.err(msg),
            other => other,
        })
    }

    fn check_channel(&self, t: &Term) -> Result<()> {
        self.check_term(t)?;
        if !t.sort().is_channel() {
            return Err(self.err(format!("channel term {t} has sort {}, expected Channel", t.sort())));
        }
        Ok(())
    }

    fn check_process(&mut self, p: &Process) -> Result<()> {
        match p {
            Process::Nil => Ok(()),
            Process::Par(a, b) => {
                self.path.push("par.left".into());
                self.check_process(a)?;
                self.path.pop();
                self.path.push("par.right".into());
                self.check_process(b)?;
                self.path.pop();
                Ok(())
            }
            Process::Repl(q) => {
                self.path.push("repl".into());
                self.check_process(q)?;
                self.path.pop();
                Ok(())
            }
            Process::ResName(_, q) => {
                self.path.push("new".into());
                self.check_process(q)?;
                self.path.pop();
                Ok(())
            }
            Process::If { lhs, rhs, then_p, else_p } => {
                self.check_term(lhs)?;
                self.check_term(rhs)?;
                if lhs.sort() != rhs.sort() {
                    return Err(self.err(format!(
                        "comparison between sorts {} and {}",
                        lhs.sort(),
                        rhs.sort()
                    )));
                }
                self.path.push("then".into());
                self.check_process(then_p)?;
                self.path.pop();
                self.path.push("else".into());
                self.check_process(else_p)?;
                self.path.pop();
                Ok(())
            }
            Process::In { chan, body, .. } => {
                self.check_channel(chan)?;
                self.path.push("in".into());
                self.check_process(body)?;
                self.path.pop();
                Ok(())
            }
            Process::Out { chan, msg, body } => {
                self.check_channel(chan)?;
                self.check_term(msg)?;
                self.path.push("out".into());
                self.check_process(body)?;
                self.path.pop();
                Ok(())
            }
        }
    }

    fn check_extended(&mut self, a: &ExtendedProcess) -> Result<()> {
        match a {
            ExtendedProcess::Plain(p) => self.check_process(p),
            ExtendedProcess::Par(x, y) => {
                let dx = x.dom();
                let dy = y.dom();
                if let Some(v) = dx.intersection(&dy).next() {
                    return Err(self.err(format!("two active substitutions for {v}")));
                }
                self.path.push("par.left".into());
                self.check_extended(x)?;
                self.path.pop();
                self.path.push("par.right".into());
                self.check_extended(y)?;
                self.path.pop();
                Ok(())
            }
            ExtendedProcess::ResName(_, q) => {
                self.path.push("new".into());
                self.check_extended(q)?;
                self.path.pop();
                Ok(())
            }
            ExtendedProcess::ResVar(v, q) => {
                if !q.dom().contains(v) {
                    return Err(self.err(format!(
                        "restricted variable {v} has no active substitution"
                    )));
                }
                self.path.push("new-var".into());
                self.check_extended(q)?;
                self.path.pop();
                Ok(())
            }
            ExtendedProcess::Active(v, t) => {
                self.check_term(t)?;
                if &v.sort != t.sort() {
                    return Err(self.err(format!(
                        "active substitution {{{t}/{v}}} maps sort {} to {}",
                        v.sort,
                        t.sort()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Underlying substitution of an extended process, ignoring restrictions.
fn underlying_subst(a: &ExtendedProcess, out: &mut Substitution) {
    match a {
        ExtendedProcess::Plain(_) => {}
        ExtendedProcess::Par(x, y) => {
            underlying_subst(x, out);
            underlying_subst(y, out);
        }
        ExtendedProcess::ResName(_, q) | ExtendedProcess::ResVar(_, q) => {
            underlying_subst(q, out)
        }
        ExtendedProcess::Active(v, t) => out.bind_unchecked(v.clone(), t.clone()),
    }
}

/// Check that an extended process is well-sorted and well-formed: Fig. 2
/// judgements, at most one active substitution per variable (exactly one
/// under a variable restriction), and a cycle-free underlying substitution.
pub fn sort_check(a: &ExtendedProcess, ctx: &SortContext) -> Result<()> {
    let mut sig = Signature::new();
    for s in ctx.funs.values().flat_map(|f| {
        f.arg_sorts.iter().chain(std::iter::once(&f.result_sort)).cloned()
    }) {
        sig.add_sort(s);
    }
    for s in ctx.names.values().chain(ctx.vars.values()) {
        sig.add_sort(s.clone());
    }
    for f in ctx.funs.values() {
        sig.add_symbol(f.clone())?;
    }
    sort_check_sig(a, &sig)
}

/// As [`sort_check`] with the signature given directly.
pub fn sort_check_sig(a: &ExtendedProcess, sig: &Signature) -> Result<()> {
    let mut checker = SortChecker { sig, path: Vec::new() };
    checker.check_extended(a)?;
    let mut underlying = Substitution::new();
    underlying_subst(a, &mut underlying);
    underlying.dependency_order().map_err(|_| Error::cycle("underlying substitution of extended process".to_string()))?;
    Ok(())
}

/// Alpha-rename all bound names and variables to fresh ones outside `avoid`.
pub fn alpha_rename(
    a: &ExtendedProcess,
    avoid_names: &BTreeSet<Name>,
    avoid_vars: &BTreeSet<Var>,
) -> ExtendedProcess {
    let mut used_names: BTreeSet<Name> = avoid_names.clone();
    used_names.extend(a.fn_());
    let mut used_vars: BTreeSet<Var> = avoid_vars.clone();
    used_vars.extend(a.fv());
    alpha_ext(a, &mut used_names, &mut used_vars)
}

fn alpha_ext(
    a: &ExtendedProcess,
    used_names: &mut BTreeSet<Name>,
    used_vars: &mut BTreeSet<Var>,
) -> ExtendedProcess {
    match a {
        ExtendedProcess::Plain(p) => ExtendedProcess::Plain(alpha_plain(p, used_names, used_vars)),
        ExtendedProcess::Par(x, y) => ExtendedProcess::par(
            alpha_ext(x, used_names, used_vars),
            alpha_ext(y, used_names, used_vars),
        ),
        ExtendedProcess::ResName(n, q) => {
            let fresh = crate::terms::fresh_name(&n.base, &n.sort, used_names);
            used_names.insert(fresh.clone());
            let renamed = rename_name_ext(q, n, &fresh);
            ExtendedProcess::res(fresh, alpha_ext(&renamed, used_names, used_vars))
        }
        ExtendedProcess::ResVar(v, q) => {
            let fresh = crate::terms::fresh_var(&v.base, &v.sort, used_vars);
            used_vars.insert(fresh.clone());
            let renamed = rename_var_ext(q, v, &fresh);
            ExtendedProcess::res_var(fresh, alpha_ext(&renamed, used_names, used_vars))
        }
        ExtendedProcess::Active(v, t) => ExtendedProcess::Active(v.clone(), t.clone()),
    }
}

fn alpha_plain(
    p: &Process,
    used_names: &mut BTreeSet<Name>,
    used_vars: &mut BTreeSet<Var>,
) -> Process {
    match p {
        Process::Nil => Process::Nil,
        Process::Par(a, b) => Process::par(
            alpha_plain(a, used_names, used_vars),
            alpha_plain(b, used_names, used_vars),
        ),
        Process::Repl(q) => Process::repl(alpha_plain(q, used_names, used_vars)),
        Process::ResName(n, q) => {
            let fresh = crate::terms::fresh_name(&n.base, &n.sort, used_names);
            used_names.insert(fresh.clone());
            let renamed = q.rename_name(n, &fresh);
            Process::res(fresh, alpha_plain(&renamed, used_names, used_vars))
        }
        Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
            lhs.clone(),
            rhs.clone(),
            alpha_plain(then_p, used_names, used_vars),
            alpha_plain(else_p, used_names, used_vars),
        ),
        Process::In { chan, var, body } => {
            let fresh = crate::terms::fresh_var(&var.base, &var.sort, used_vars);
            used_vars.insert(fresh.clone());
            let renamed = body.rename_var(var, &fresh);
            Process::In {
                chan: chan.clone(),
                var: fresh,
                body: Box::new(alpha_plain(&renamed, used_names, used_vars)),
            }
        }
        Process::Out { chan, msg, body } => Process::output(
            chan.clone(),
            msg.clone(),
            alpha_plain(body, used_names, used_vars),
        ),
    }
}

fn rename_name_ext(a: &ExtendedProcess, from: &Name, to: &Name) -> ExtendedProcess {
    let t = Term::Name(to.clone());
    match a {
        ExtendedProcess::Plain(p) => ExtendedProcess::Plain(p.rename_name(from, to)),
        ExtendedProcess::Par(x, y) => ExtendedProcess::par(
            rename_name_ext(x, from, to),
            rename_name_ext(y, from, to),
        ),
        ExtendedProcess::ResName(n, q) => {
            if n == from {
                a.clone()
            } else {
                ExtendedProcess::res(n.clone(), rename_name_ext(q, from, to))
            }
        }
        ExtendedProcess::ResVar(v, q) => {
            ExtendedProcess::res_var(v.clone(), rename_name_ext(q, from, to))
        }
        ExtendedProcess::Active(v, body) => {
            ExtendedProcess::Active(v.clone(), body.subst_name(from, &t))
        }
    }
}

fn rename_var_ext(a: &ExtendedProcess, from: &Var, to: &Var) -> ExtendedProcess {
    match a {
        ExtendedProcess::Plain(p) => ExtendedProcess::Plain(p.rename_var(from, to)),
        ExtendedProcess::Par(x, y) => {
            ExtendedProcess::par(rename_var_ext(x, from, to), rename_var_ext(y, from, to))
        }
        ExtendedProcess::ResName(n, q) => {
            ExtendedProcess::res(n.clone(), rename_var_ext(q, from, to))
        }
        ExtendedProcess::ResVar(v, q) => {
            if v == from {
                a.clone()
            } else {
                ExtendedProcess::res_var(v.clone(), rename_var_ext(q, from, to))
            }
        }
        ExtendedProcess::Active(v, body) => {
            let s = Substitution::from_iter([(from.clone(), Term::Var(to.clone()))]);
            let v = if v == from { to.clone() } else { v.clone() };
            ExtendedProcess::Active(v, s.apply_simultaneous(body))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{FunSymbol, Signature};

    fn data() -> Sort {
        Sort::new("Data")
    }

    fn chan() -> Sort {
        Sort::channel()
    }

    fn sig() -> Signature {
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_symbol(FunSymbol::new("pair", vec![data(), data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("fst", vec![data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("snd", vec![data()], data())).unwrap();
        sig
    }

    fn cn(s: &str) -> Term {
        Term::Name(Name::new(s, chan()))
    }

    fn dn(s: &str) -> Term {
        Term::Name(Name::new(s, data()))
    }

    fn dv(s: &str) -> Var {
        Var::new(s, data())
    }

    /// new s; (out(a, (M, s)) | in(a, z); if snd(z) = s then out(b, fst(z)))
    fn capability_process(sig: &Signature) -> ExtendedProcess {
        let s = Name::new("s", data());
        let z = dv("z");
        let sender = Process::output(
            cn("a"),
            sig.app("pair", vec![dn("m"), Term::Name(s.clone())]).unwrap(),
            Process::Nil,
        );
        let receiver = Process::input(
            cn("a"),
            z.clone(),
            Process::if_then_else(
                sig.app("snd", vec![Term::Var(z.clone())]).unwrap(),
                Term::Name(s.clone()),
                Process::output(cn("b"), sig.app("fst", vec![Term::Var(z)]).unwrap(), Process::Nil),
                Process::Nil,
            ),
        );
        ExtendedProcess::Plain(Process::res(s, Process::par(sender, receiver)))
    }

    #[test]
    fn capability_process_sort_checks() {
        let sig = sig();
        assert!(sort_check_sig(&capability_process(&sig), &sig).is_ok());
    }

    #[test]
    fn nil_sort_checks() {
        let sig = sig();
        assert!(sort_check_sig(&ExtendedProcess::Plain(Process::Nil), &sig).is_ok());
    }

    #[test]
    fn data_channel_rejected() {
        let sig = sig();
        let p = ExtendedProcess::Plain(Process::output(dn("d"), dn("m"), Process::Nil));
        let err = sort_check_sig(&p, &sig);
        assert!(matches!(err, Err(Error::Sort { .. })));
    }

    #[test]
    fn fig1_dom_and_fv_of_active() {
        let sig = sig();
        let m = sig.app("fst", vec![Term::Var(dv("w"))]).unwrap();
        let a = ExtendedProcess::Active(dv("x"), m);
        assert_eq!(a.dom(), BTreeSet::from([dv("x")]));
        assert_eq!(a.fv(), BTreeSet::from([dv("x"), dv("w")]));
    }

    #[test]
    fn fn_of_restricted_output() {
        // fn(new n; out(a, n)) = {a}
        let n = Name::new("n", data());
        let p = ExtendedProcess::Plain(Process::res(
            n.clone(),
            Process::output(cn("a"), Term::Name(n), Process::Nil),
        ));
        assert_eq!(p.fn_(), BTreeSet::from([Name::new("a", chan())]));
    }

    #[test]
    fn closedness() {
        // {m/x} closed; out(a, x) open; new x; ({n/x} | out(a, x)) closed
        let ground = ExtendedProcess::Active(dv("x"), dn("m"));
        assert!(ground.is_closed());

        let open = ExtendedProcess::Plain(Process::output(cn("a"), Term::Var(dv("x")), Process::Nil));
        assert!(!open.is_closed());

        let resolved = ExtendedProcess::res_var(
            dv("x"),
            ExtendedProcess::par(
                ExtendedProcess::Active(dv("x"), dn("n")),
                ExtendedProcess::Plain(Process::output(cn("a"), Term::Var(dv("x")), Process::Nil)),
            ),
        );
        assert!(resolved.is_closed());
    }

    #[test]
    fn alpha_rename_avoids() {
        let n = Name::new("n", data());
        let p = ExtendedProcess::Plain(Process::res(
            n.clone(),
            Process::output(cn("a"), Term::Name(n.clone()), Process::Nil),
        ));
        let avoid = BTreeSet::from([n.clone()]);
        let renamed = alpha_rename(&p, &avoid, &BTreeSet::new());
        let expect = Name::indexed("n", 1, data());
        let want = ExtendedProcess::Plain(Process::res(
            expect.clone(),
            Process::output(cn("a"), Term::Name(expect), Process::Nil),
        ));
        assert_eq!(renamed, want);
    }

    #[test]
    fn alpha_rename_binder_var() {
        let sigv = sig();
        let x = dv("x");
        let p = ExtendedProcess::Plain(Process::input(
            cn("a"),
            x.clone(),
            Process::output(cn("b"), Term::Var(x.clone()), Process::Nil),
        ));
        let avoid = BTreeSet::from([x]);
        let renamed = alpha_rename(&p, &BTreeSet::new(), &avoid);
        let x1 = Var::indexed("x", 1, data());
        let want = ExtendedProcess::Plain(Process::input(
            cn("a"),
            x1.clone(),
            Process::output(cn("b"), Term::Var(x1), Process::Nil),
        ));
        assert_eq!(renamed, want);
        assert!(sort_check_sig(&renamed, &sigv).is_ok());
    }

    #[test]
    fn fv_fn_invariant_under_alpha() {
        let sig = sig();
        let p = capability_process(&sig);
        let renamed = alpha_rename(&p, &p.fn_(), &p.fv());
        assert_eq!(p.fv(), renamed.fv());
        assert_eq!(p.fn_(), renamed.fn_());
        assert_eq!(p.dom(), renamed.dom());
    }

    #[test]
    fn duplicate_active_substitution_rejected() {
        let sig = sig();
        let a = ExtendedProcess::par(
            ExtendedProcess::Active(dv("x"), dn("m")),
            ExtendedProcess::Active(dv("x"), dn("n")),
        );
        assert!(matches!(sort_check_sig(&a, &sig), Err(Error::Sort { .. })));
    }

    #[test]
    fn restricted_var_without_subst_rejected() {
        let sig = sig();
        let a = ExtendedProcess::res_var(dv("x"), ExtendedProcess::Plain(Process::Nil));
        assert!(matches!(sort_check_sig(&a, &sig), Err(Error::Sort { .. })));
    }

    #[test]
    fn cyclic_underlying_subst_rejected() {
        let sig = sig();
        let fx = sig.app("fst", vec![Term::Var(dv("x"))]).unwrap();
        let fy = sig.app("fst", vec![Term::Var(dv("y"))]).unwrap();
        let a = ExtendedProcess::par(
            ExtendedProcess::Active(dv("x"), fy),
            ExtendedProcess::Active(dv("y"), fx),
        );
        assert!(matches!(sort_check_sig(&a, &sig), Err(Error::Cycle { .. })));
    }
}
