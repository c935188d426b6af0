//! Sorted term algebra: names, variables, function application, substitutions,
//! matching and unification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Interned string: cheap to clone and share across terms.
pub type IStr = Arc<str>;

/// A nominal sort. `Channel` is distinguished and always present in a signature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sort(pub IStr);

impl Sort {
    pub fn new(name: impl AsRef<str>) -> Self {
        Sort(Arc::from(name.as_ref()))
    }

    pub fn channel() -> Self {
        Sort::new("Channel")
    }

    pub fn is_channel(&self) -> bool {
        &*self.0 == "Channel"
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A function symbol with its argument and result sorts. Arity-0 symbols are constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunSymbol {
    pub name: IStr,
    pub arg_sorts: Vec<Sort>,
    pub result_sort: Sort,
}

impl FunSymbol {
    pub fn new(name: impl AsRef<str>, arg_sorts: Vec<Sort>, result_sort: Sort) -> Self {
        FunSymbol { name: Arc::from(name.as_ref()), arg_sorts, result_sort }
    }

    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }
}

/// A name. Fresh names share a base and carry a distinguishing index;
/// index 0 prints as the bare base, index i > 0 as `base#i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    pub base: IStr,
    pub index: u32,
    pub sort: Sort,
}

impl Name {
    pub fn new(base: impl AsRef<str>, sort: Sort) -> Self {
        Name { base: Arc::from(base.as_ref()), index: 0, sort }
    }

    pub fn indexed(base: impl AsRef<str>, index: u32, sort: Sort) -> Self {
        Name { base: Arc::from(base.as_ref()), index, sort }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            f.write_str(&self.base)
        } else {
            write!(f, "{}#{}", self.base, self.index)
        }
    }
}

/// A variable, structured like [`Name`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub base: IStr,
    pub index: u32,
    pub sort: Sort,
}

impl Var {
    pub fn new(base: impl AsRef<str>, sort: Sort) -> Self {
        Var { base: Arc::from(base.as_ref()), index: 0, sort }
    }

    pub fn indexed(base: impl AsRef<str>, index: u32, sort: Sort) -> Self {
        Var { base: Arc::from(base.as_ref()), index, sort }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            f.write_str(&self.base)
        } else {
            write!(f, "{}#{}", self.base, self.index)
        }
    }
}

/// First-order terms over a signature. Applications cache their result sort so
/// that sort queries need no signature lookup.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Name(Name),
    Var(Var),
    App { sym: IStr, sort: Sort, args: Arc<[Term]> },
}

impl Term {
    pub fn name(n: Name) -> Self {
        Term::Name(n)
    }

    pub fn var(v: Var) -> Self {
        Term::Var(v)
    }

    pub fn sort(&self) -> &Sort {
        match self {
            Term::Name(n) => &n.sort,
            Term::Var(v) => &v.sort,
            Term::App { sort, .. } => sort,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Name(_) => true,
            Term::Var(_) => false,
            Term::App { args, .. } => args.iter().all(|a| a.is_ground()),
        }
    }

    /// Number of function applications of positive arity along the deepest path.
    /// Atoms and constants have depth 0.
    pub fn depth(&self) -> u32 {
        match self {
            Term::Name(_) | Term::Var(_) => 0,
            Term::App { args, .. } => {
                if args.is_empty() {
                    0
                } else {
                    1 + args.iter().map(|a| a.depth()).max().unwrap_or(0)
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Name(_) | Term::Var(_) => 1,
            Term::App { args, .. } => 1 + args.iter().map(|a| a.size()).sum::<usize>(),
        }
    }

    pub fn fv(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Name(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App { args, .. } => {
                for a in args.iter() {
                    a.collect_fv(out);
                }
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
            Term::Name(n) => {
                out.insert(n.clone());
            }
            Term::Var(_) => {}
            Term::App { args, .. } => {
                for a in args.iter() {
                    a.collect_fn(out);
                }
            }
        }
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        match self {
            Term::Var(w) => w == v,
            Term::Name(_) => false,
            Term::App { args, .. } => args.iter().any(|a| a.contains_var(v)),
        }
    }

    pub fn contains_name(&self, n: &Name) -> bool {
        match self {
            Term::Name(m) => m == n,
            Term::Var(_) => false,
            Term::App { args, .. } => args.iter().any(|a| a.contains_name(n)),
        }
    }

    /// Subterms in pre-order, including the term itself.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.collect_subterms(&mut out);
        out
    }

    fn collect_subterms<'a>(&'a self, out: &mut Vec<&'a Term>) {
        out.push(self);
        if let Term::App { args, .. } = self {
            for a in args.iter() {
                a.collect_subterms(out);
            }
        }
    }

    /// Replace every occurrence of name `n` by `t`. Used for theory closure
    /// under substitution of terms for names.
    pub fn subst_name(&self, n: &Name, t: &Term) -> Term {
        match self {
            Term::Name(m) if m == n => t.clone(),
            Term::Name(_) | Term::Var(_) => self.clone(),
            Term::App { sym, sort, args } => Term::App {
                sym: sym.clone(),
                sort: sort.clone(),
                args: args.iter().map(|a| a.subst_name(n, t)).collect::<Vec<_>>().into(),
            },
        }
    }
}

impl From<Name> for Term {
    fn from(n: Name) -> Self {
        Term::Name(n)
    }
}

impl From<Var> for Term {
    fn from(v: Var) -> Self {
        Term::Var(v)
    }
}

/// A signature: the declared sorts plus the function symbols over them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    sorts: BTreeSet<Sort>,
    symbols: BTreeMap<IStr, FunSymbol>,
    /// Declaration order of symbols; later declarations take higher precedence
    /// in the default term ordering.
    decl_order: Vec<IStr>,
}

impl Signature {
    pub fn new() -> Self {
        let mut sig = Signature::default();
        sig.sorts.insert(Sort::channel());
        sig
    }

    pub fn add_sort(&mut self, sort: Sort) {
        self.sorts.insert(sort);
    }

    pub fn has_sort(&self, sort: &Sort) -> bool {
        self.sorts.contains(sort)
    }

    pub fn sorts(&self) -> impl Iterator<Item = &Sort> {
        self.sorts.iter()
    }

    pub fn add_symbol(&mut self, sym: FunSymbol) -> Result<()> {
        if self.symbols.contains_key(&*sym.name) {
            return Err(Error::model(format!("duplicate function symbol {}", sym.name)));
        }
        for s in sym.arg_sorts.iter().chain(std::iter::once(&sym.result_sort)) {
            if !self.sorts.contains(s) {
                return Err(Error::sort(format!("unknown sort {} in symbol {}", s, sym.name)));
            }
        }
        self.decl_order.push(sym.name.clone());
        self.symbols.insert(sym.name.clone(), sym);
        Ok(())
    }

    pub fn symbol(&self, name: &str) -> Option<&FunSymbol> {
        self.symbols.get(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FunSymbol> {
        self.decl_order.iter().map(|n| &self.symbols[&**n])
    }

    /// Position in declaration order; later symbols are greater in the default precedence.
    pub fn decl_index(&self, name: &str) -> Option<usize> {
        self.decl_order.iter().position(|n| &**n == name)
    }

    /// Build a well-sorted application.
    pub fn app(&self, name: &str, args: Vec<Term>) -> Result<Term> {
        let sym = self
            .symbol(name)
            .ok_or_else(|| Error::sort(format!("unknown function symbol {name}")))?;
        if sym.arity() != args.len() {
            return Err(Error::sort(format!(
                "{name} expects {} arguments, got {}",
                sym.arity(),
                args.len()
            )));
        }
        for (i, (arg, want)) in args.iter().zip(&sym.arg_sorts).enumerate() {
            if arg.sort() != want {
                return Err(Error::sort(format!(
                    "argument {} of {name} has sort {}, expected {}",
                    i + 1,
                    arg.sort(),
                    want
                )));
            }
        }
        Ok(Term::App { sym: sym.name.clone(), sort: sym.result_sort.clone(), args: args.into() })
    }

    /// Verify that a term is well-sorted under this signature, including the
    /// cached sorts on applications.
    pub fn check_term(&self, t: &Term) -> Result<()> {
        match t {
            Term::Name(n) => {
                if self.sorts.contains(&n.sort) {
                    Ok(())
                } else {
                    Err(Error::sort(format!("name {n} has unknown sort {}", n.sort)))
                }
            }
            Term::Var(v) => {
                if self.sorts.contains(&v.sort) {
                    Ok(())
                } else {
                    Err(Error::sort(format!("variable {v} has unknown sort {}", v.sort)))
                }
            }
            Term::App { sym, sort, args } => {
                let decl = self
                    .symbol(sym)
                    .ok_or_else(|| Error::sort(format!("unknown function symbol {sym}")))?;
                let args: &[Term] = args;
                if decl.arity() != args.len() {
                    return Err(Error::sort(format!(
                        "{sym} expects {} arguments, got {}",
                        decl.arity(),
                        args.len()
                    )));
                }
                if &decl.result_sort != sort {
                    return Err(Error::sort(format!(
                        "application of {sym} carries sort {sort}, declared {}",
                        decl.result_sort
                    )));
                }
                for (i, (arg, want)) in args.iter().zip(&decl.arg_sorts).enumerate() {
                    if arg.sort() != want {
                        return Err(Error::sort(format!(
                            "argument {} of {sym} has sort {}, expected {}",
                            i + 1,
                            arg.sort(),
                            want
                        )));
                    }
                    self.check_term(arg)?;
                }
                Ok(())
            }
        }
    }
}

/// A sort-preserving, cycle-free substitution from variables to terms.
///
/// Bindings are kept as given; [`Substitution::resolved`] computes the
/// dependency-ordered, fully applied form in which no domain variable occurs
/// in any range term.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn singleton(v: Var, t: Term) -> Result<Self> {
        let mut s = Substitution::new();
        s.bind(v, t)?;
        Ok(s)
    }

    /// Insert a binding, checking sort preservation.
    pub fn bind(&mut self, v: Var, t: Term) -> Result<()> {
        if &v.sort != t.sort() {
            return Err(Error::sort(format!(
                "binding {{{t}/{v}}} maps sort {} to sort {}",
                v.sort,
                t.sort()
            )));
        }
        self.bindings.insert(v, t);
        Ok(())
    }

    pub(crate) fn bind_unchecked(&mut self, v: Var, t: Term) {
        self.bindings.insert(v, t);
    }

    pub fn remove(&mut self, v: &Var) -> Option<Term> {
        self.bindings.remove(v)
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.bindings.get(v)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.bindings.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.bindings.contains_key(v)
    }

    /// Order the bindings as {M1/x1, ..., Ml/xl} with xi not free in Mj for
    /// i <= j, the cycle-freedom witness of the paper's convention.
    pub fn dependency_order(&self) -> Result<Vec<(Var, Term)>> {
        let mut remaining: BTreeMap<Var, Term> = self.bindings.clone();
        let mut ordered = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            // pick a variable not occurring in any remaining range term
            let next = remaining
                .keys()
                .find(|v| !remaining.values().any(|t| t.contains_var(v)))
                .cloned();
            match next {
                Some(v) => {
                    let t = remaining.remove(&v).unwrap();
                    ordered.push((v, t));
                }
                None => {
                    let cyc: Vec<String> =
                        remaining.keys().map(|v| v.to_string()).collect();
                    return Err(Error::cycle(format!(
                        "no dependency order for {{{}}}",
                        cyc.join(", ")
                    )));
                }
            }
        }
        Ok(ordered)
    }

    /// Fully resolved form: every binding has the later bindings applied, so
    /// no domain variable occurs in the range. Errors on cyclic bindings.
    pub fn resolved(&self) -> Result<Substitution> {
        let ordered = self.dependency_order()?;
        let mut resolved = Substitution::new();
        // xi may occur in Mj only for j < i, so resolve back to front
        for (v, t) in ordered.into_iter().rev() {
            let t = resolved.apply_simultaneous(&t);
            resolved.bind_unchecked(v, t);
        }
        Ok(resolved)
    }

    pub fn is_resolved(&self) -> bool {
        self.bindings
            .values()
            .all(|t| !self.bindings.keys().any(|v| t.contains_var(v)))
    }

    /// One simultaneous replacement pass, no resolution.
    pub fn apply_simultaneous(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Name(_) => t.clone(),
            Term::App { sym, sort, args } => Term::App {
                sym: sym.clone(),
                sort: sort.clone(),
                args: args.iter().map(|a| self.apply_simultaneous(a)).collect::<Vec<_>>().into(),
            },
        }
    }
}

impl FromIterator<(Var, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Var, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (v, t) in iter {
            s.bind_unchecked(v, t);
        }
        s
    }
}

/// Apply a cycle-free substitution, iterating in dependency order so the
/// result contains no domain variable.
pub fn apply_subst(t: &Term, s: &Substitution) -> Result<Term> {
    if s.is_resolved() {
        return Ok(s.apply_simultaneous(t));
    }
    Ok(s.resolved()?.apply_simultaneous(t))
}

/// Syntactic matching: find the minimal substitution with
/// `apply(pattern) == subject`, or report that none exists.
pub fn match_term(pattern: &Term, subject: &Term) -> Option<Substitution> {
    let mut s = Substitution::new();
    if match_into(pattern, subject, &mut s) {
        Some(s)
    } else {
        None
    }
}

fn match_into(pattern: &Term, subject: &Term, s: &mut Substitution) -> bool {
    match (pattern, subject) {
        (Term::Var(v), _) => {
            if v.sort != *subject.sort() {
                return false;
            }
            match s.get(v) {
                Some(prev) => prev == subject,
                None => {
                    s.bind_unchecked(v.clone(), subject.clone());
                    true
                }
            }
        }
        (Term::Name(a), Term::Name(b)) => a == b,
        (
            Term::App { sym: f, args: pa, .. },
            Term::App { sym: g, args: sa, .. },
        ) => f == g && pa.len() == sa.len() && pa.iter().zip(sa.iter()).all(|(p, t)| match_into(p, t, s)),
        _ => false,
    }
}

/// Most general unifier with occurs check; `None` when no unifier exists.
pub fn unify(t1: &Term, t2: &Term) -> Option<Substitution> {
    let mut s = Substitution::new();
    let mut work = vec![(t1.clone(), t2.clone())];
    while let Some((a, b)) = work.pop() {
        let a = resolve_walk(&a, &s);
        let b = resolve_walk(&b, &s);
        match (a, b) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), other) | (other, Term::Var(v)) => {
                if v.sort != *other.sort() {
                    return None;
                }
                let other = apply_current(&other, &s);
                if other.contains_var(&v) {
                    return None; // occurs check
                }
                // keep earlier bindings fully substituted
                let single = Substitution::from_iter([(v.clone(), other.clone())]);
                let updated: Vec<(Var, Term)> = s
                    .iter()
                    .map(|(x, t)| (x.clone(), single.apply_simultaneous(t)))
                    .collect();
                s = Substitution::from_iter(updated);
                s.bind_unchecked(v, other);
            }
            (Term::Name(m), Term::Name(n)) => {
                if m != n {
                    return None;
                }
            }
            (
                Term::App { sym: f, args: fa, .. },
                Term::App { sym: g, args: ga, .. },
            ) => {
                if f != g || fa.len() != ga.len() {
                    return None;
                }
                for (x, y) in fa.iter().zip(ga.iter()) {
                    work.push((x.clone(), y.clone()));
                }
            }
            _ => return None,
        }
    }
    Some(s)
}

fn resolve_walk(t: &Term, s: &Substitution) -> Term {
    let mut cur = t.clone();
    while let Term::Var(v) = &cur {
        match s.get(v) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

fn apply_current(t: &Term, s: &Substitution) -> Term {
    match t {
        Term::Var(v) => match s.get(v) {
            Some(next) => apply_current(next, s),
            None => t.clone(),
        },
        Term::Name(_) => t.clone(),
        Term::App { sym, sort, args } => Term::App {
            sym: sym.clone(),
            sort: sort.clone(),
            args: args.iter().map(|a| apply_current(a, s)).collect::<Vec<_>>().into(),
        },
    }
}

/// Free variables of a term (operation form of Fig. 1 restricted to terms).
pub fn fv(t: &Term) -> BTreeSet<Var> {
    t.fv()
}

/// Free names of a term.
pub fn fn_(t: &Term) -> BTreeSet<Name> {
    t.fn_()
}

/// Pick the smallest index >= the base's current maximum so that the name is
/// fresh with respect to `used`.
pub fn fresh_name(base: &str, sort: &Sort, used: &BTreeSet<Name>) -> Name {
    let mut index = 0;
    while used.iter().any(|n| &*n.base == base && n.index == index) {
        index += 1;
    }
    Name::indexed(base, index, sort.clone())
}

pub fn fresh_var(base: &str, sort: &Sort, used: &BTreeSet<Var>) -> Var {
    let mut index = 0;
    while used.iter().any(|v| &*v.base == base && v.index == index) {
        index += 1;
    }
    Var::indexed(base, index, sort.clone())
}
