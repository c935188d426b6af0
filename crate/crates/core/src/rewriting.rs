//! Equational theories as convergent rewrite systems plus permutative
//! equations: normalization, equality modulo, critical pairs, and convergence
//! certification via a lexicographic path ordering.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::terms::{match_term, unify, Signature, Term, Var};

/// An oriented rewrite rule l -> r. Left-hand sides are never variables,
/// right-hand variables occur on the left, and neither side contains names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub lhs: Term,
    pub rhs: Term,
}

impl RewriteRule {
    pub fn new(lhs: Term, rhs: Term) -> Result<Self> {
        if matches!(lhs, Term::Var(_)) {
            return Err(Error::model("rewrite rule left-hand side is a variable"));
        }
        if lhs.sort() != rhs.sort() {
            return Err(Error::sort(format!(
                "rule sides have sorts {} and {}",
                lhs.sort(),
                rhs.sort()
            )));
        }
        if !rhs.fv().is_subset(&lhs.fv()) {
            return Err(Error::model("rule right-hand side has variables not on the left"));
        }
        if !lhs.fn_().is_empty() || !rhs.fn_().is_empty() {
            return Err(Error::model("names do not occur in rewrite rules"));
        }
        Ok(RewriteRule { lhs, rhs })
    }
}

/// An equation whose sides are variable-permutation variants of one shape,
/// applied only as ordered rewriting with respect to the canonical term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermEquation {
    pub lhs: Term,
    pub rhs: Term,
}

impl PermEquation {
    pub fn new(lhs: Term, rhs: Term) -> Result<Self> {
        let fwd = match_term(&lhs, &rhs);
        let bwd = match_term(&rhs, &lhs);
        let variant = |s: &crate::terms::Substitution| {
            s.iter().all(|(_, t)| matches!(t, Term::Var(_)))
        };
        match (fwd, bwd) {
            (Some(f), Some(b)) if variant(&f) && variant(&b) => {}
            _ => {
                return Err(Error::model(
                    "permutative equation sides are not variable-permutation variants",
                ))
            }
        }
        if !lhs.fn_().is_empty() || !rhs.fn_().is_empty() {
            return Err(Error::model("names do not occur in permutative equations"));
        }
        Ok(PermEquation { lhs, rhs })
    }
}

/// Default rewrite-step budget per `normalize` call.
pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

/// A signature equipped with oriented rules, permutative equations, a total
/// precedence on function symbols, and per-symbol argument permutations for
/// the lexicographic path ordering.
#[derive(Debug, Clone)]
pub struct TheorySpec {
    pub signature: Signature,
    rules: Vec<RewriteRule>,
    rules_by_root: BTreeMap<String, Vec<usize>>,
    perms: Vec<PermEquation>,
    precedence: BTreeMap<String, usize>,
    lex_status: BTreeMap<String, Vec<usize>>,
    pub step_budget: u64,
    pub asserted_convergent: bool,
}

impl TheorySpec {
    pub fn new(signature: Signature) -> Self {
        let precedence = signature
            .symbols()
            .enumerate()
            .map(|(i, s)| (s.name.to_string(), i))
            .collect();
        TheorySpec {
            signature,
            rules: Vec::new(),
            rules_by_root: BTreeMap::new(),
            perms: Vec::new(),
            precedence,
            lex_status: BTreeMap::new(),
            step_budget: DEFAULT_STEP_BUDGET,
            asserted_convergent: false,
        }
    }

    pub fn add_rule(&mut self, lhs: Term, rhs: Term) -> Result<()> {
        self.signature.check_term(&lhs)?;
        self.signature.check_term(&rhs)?;
        let rule = RewriteRule::new(lhs, rhs)?;
        let root = match &rule.lhs {
            Term::App { sym, .. } => sym.to_string(),
            _ => unreachable!("rule left-hand sides are applications"),
        };
        self.rules_by_root.entry(root).or_default().push(self.rules.len());
        self.rules.push(rule);
        Ok(())
    }

    pub fn add_perm(&mut self, lhs: Term, rhs: Term) -> Result<()> {
        self.signature.check_term(&lhs)?;
        self.signature.check_term(&rhs)?;
        self.perms.push(PermEquation::new(lhs, rhs)?);
        Ok(())
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn perms(&self) -> &[PermEquation] {
        &self.perms
    }

    /// Later position = greater symbol. Defaults to declaration order.
    pub fn set_precedence(&mut self, order: &[&str]) {
        for (i, name) in order.iter().enumerate() {
            self.precedence.insert((*name).to_string(), i);
        }
    }

    pub fn precedence_rank(&self, sym: &str) -> usize {
        self.precedence.get(sym).copied().unwrap_or(0)
    }

    /// Argument comparison order for `sym` in the LPO, as a permutation of
    /// 0..arity. Identity when unset.
    pub fn set_lex_status(&mut self, sym: &str, perm: Vec<usize>) {
        self.lex_status.insert(sym.to_string(), perm);
    }

    pub fn lex_status(&self, sym: &str) -> Option<&Vec<usize>> {
        self.lex_status.get(sym)
    }

    /// Non-triviality: two distinct ground normal forms exist in each sort.
    /// Names never occur in rules, so two fresh names of a sort stay distinct.
    pub fn check_nontrivial(&self) -> Result<()> {
        for sort in self.signature.sorts() {
            let n1 = Term::Name(crate::terms::Name::indexed("%w", 0, sort.clone()));
            let n2 = Term::Name(crate::terms::Name::indexed("%w", 1, sort.clone()));
            if eq_mod(&n1, &n2, self)? {
                return Err(Error::model(format!("theory is trivial at sort {sort}")));
            }
        }
        Ok(())
    }
}

struct Budget {
    left: u64,
    total: u64,
}

impl Budget {
    fn new(total: u64) -> Self {
        Budget { left: total, total }
    }

    fn step(&mut self) -> Result<()> {
        if self.left == 0 {
            return Err(Error::StepLimitExceeded { budget: self.total });
        }
        self.left -= 1;
        Ok(())
    }
}

/// Unique normal form under the oriented rules (innermost-leftmost), with
/// permutative equations then applied as ordered rewriting until the result
/// is a fixpoint of both phases.
pub fn normalize(t: &Term, th: &TheorySpec) -> Result<Term> {
    let mut budget = Budget::new(th.step_budget);
    let mut cur = normalize_rules(t, th, &mut budget)?;
    if th.perms.is_empty() {
        return Ok(cur);
    }
    loop {
        let permed = perm_pass(&cur, th, &mut budget)?;
        if permed == cur {
            return Ok(cur);
        }
        cur = normalize_rules(&permed, th, &mut budget)?;
        if cur == permed {
            return Ok(cur);
        }
    }
}

fn normalize_rules(t: &Term, th: &TheorySpec, budget: &mut Budget) -> Result<Term> {
    match t {
        Term::Name(_) | Term::Var(_) => Ok(t.clone()),
        Term::App { sym, sort, args } => {
            // rebuild only if some argument actually changed
            let mut new_args: Option<Vec<Term>> = None;
            for (i, a) in args.iter().enumerate() {
                let na = normalize_rules(a, th, budget)?;
                if new_args.is_none() && na != *a {
                    new_args = Some(args[..i].to_vec());
                }
                if let Some(v) = new_args.as_mut() {
                    v.push(na);
                }
            }
            let cur = match new_args {
                None => t.clone(),
                Some(v) => Term::App { sym: sym.clone(), sort: sort.clone(), args: v.into() },
            };
            if let Some(candidates) = th.rules_by_root.get(&**sym) {
                for &ri in candidates {
                    let rule = &th.rules[ri];
                    if let Some(s) = match_term(&rule.lhs, &cur) {
                        budget.step()?;
                        let reduced = s.apply_simultaneous(&rule.rhs);
                        return normalize_rules(&reduced, th, budget);
                    }
                }
            }
            Ok(cur)
        }
    }
}

fn perm_pass(t: &Term, th: &TheorySpec, budget: &mut Budget) -> Result<Term> {
    let mut cur = t.clone();
    loop {
        match perm_step(&cur, th)? {
            Some(next) => {
                budget.step()?;
                cur = next;
            }
            None => return Ok(cur),
        }
    }
}

fn perm_step(t: &Term, th: &TheorySpec) -> Result<Option<Term>> {
    if let Term::App { sym, sort, args } = t {
        for (i, a) in args.iter().enumerate() {
            if let Some(next) = perm_step(a, th)? {
                let mut new_args = args.to_vec();
                new_args[i] = next;
                return Ok(Some(Term::App {
                    sym: sym.clone(),
                    sort: sort.clone(),
                    args: new_args.into(),
                }));
            }
        }
    }
    for eq in &th.perms {
        for (l, r) in [(&eq.lhs, &eq.rhs), (&eq.rhs, &eq.lhs)] {
            if let Some(s) = match_term(l, t) {
                let candidate = s.apply_simultaneous(r);
                if canonical_cmp(&candidate, t, th) == Ordering::Less {
                    return Ok(Some(candidate));
                }
            }
        }
    }
    Ok(None)
}

/// Equality modulo the theory: syntactic equality of normal forms.
pub fn eq_mod(t1: &Term, t2: &Term, th: &TheorySpec) -> Result<bool> {
    if t1 == t2 {
        return Ok(true);
    }
    Ok(normalize(t1, th)? == normalize(t2, th)?)
}

/// Total canonical order on terms: symbol precedence first, then arity, then
/// arguments lexicographically; names before variables, atoms below
/// applications, atoms of one kind ordered by (base, index).
pub fn canonical_cmp(a: &Term, b: &Term, th: &TheorySpec) -> Ordering {
    match (a, b) {
        (Term::App { sym: f, args: fa, .. }, Term::App { sym: g, args: ga, .. }) => {
            let pf = th.precedence_rank(f);
            let pg = th.precedence_rank(g);
            pf.cmp(&pg)
                .then_with(|| f.cmp(g))
                .then_with(|| fa.len().cmp(&ga.len()))
                .then_with(|| {
                    for (x, y) in fa.iter().zip(ga.iter()) {
                        let c = canonical_cmp(x, y, th);
                        if c != Ordering::Equal {
                            return c;
                        }
                    }
                    Ordering::Equal
                })
        }
        (Term::App { .. }, _) => Ordering::Greater,
        (_, Term::App { .. }) => Ordering::Less,
        (Term::Name(m), Term::Name(n)) => (&m.base, m.index).cmp(&(&n.base, n.index)),
        (Term::Var(v), Term::Var(w)) => (&v.base, v.index).cmp(&(&w.base, w.index)),
        (Term::Name(_), Term::Var(_)) => Ordering::Less,
        (Term::Var(_), Term::Name(_)) => Ordering::Greater,
    }
}

fn permute<'a>(args: &'a [Term], status: Option<&Vec<usize>>) -> Vec<&'a Term> {
    match status {
        Some(perm) if perm.len() == args.len() => perm.iter().map(|&i| &args[i]).collect(),
        _ => args.iter().collect(),
    }
}

/// Strict lexicographic path ordering with per-symbol argument permutations.
/// Variables compare as variables: s > x iff x occurs strictly inside s.
pub fn lpo_gt(s: &Term, t: &Term, th: &TheorySpec) -> bool {
    lpo_gt_with(s, t, th, &th.lex_status)
}

fn lpo_gt_with(
    s: &Term,
    t: &Term,
    th: &TheorySpec,
    status: &BTreeMap<String, Vec<usize>>,
) -> bool {
    if s == t {
        return false;
    }
    match t {
        Term::Var(x) => s.contains_var(x),
        _ => match s {
            Term::Var(_) | Term::Name(_) => false,
            Term::App { sym: f, args: sa, .. } => {
                // subterm case
                if sa.iter().any(|si| si == t || lpo_gt_with(si, t, th, status)) {
                    return true;
                }
                match t {
                    Term::Name(_) => true, // applications above name constants
                    Term::App { sym: g, args: ta, .. } => {
                        if f != g {
                            let pf = (th.precedence_rank(f), f);
                            let pg = (th.precedence_rank(g), g);
                            pf > pg && ta.iter().all(|tj| lpo_gt_with(s, tj, th, status))
                        } else {
                            let ps = permute(sa, status.get(&**f));
                            let pt = permute(ta, status.get(&**f));
                            let mut lex = false;
                            for (x, y) in ps.iter().zip(&pt) {
                                if x != y {
                                    lex = lpo_gt_with(x, y, th, status);
                                    break;
                                }
                            }
                            lex && ta.iter().all(|tj| lpo_gt_with(s, tj, th, status))
                        }
                    }
                    Term::Var(_) => unreachable!(),
                }
            }
        },
    }
}

/// One critical pair: the two one-step reducts of an overlapped instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalPair {
    pub left: Term,
    pub right: Term,
    /// Rule whose left-hand side was overlapped into.
    pub outer_rule: usize,
    /// Rule rewriting the overlapped subterm.
    pub inner_rule: usize,
    /// Position of the overlap in the outer left-hand side.
    pub position: Vec<usize>,
}

impl fmt::Display for CriticalPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule {} into rule {} at {:?}",
            self.inner_rule + 1,
            self.outer_rule + 1,
            self.position
        )
    }
}

fn nonvar_positions(t: &Term) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn walk(t: &Term, here: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match t {
            Term::Var(_) => {}
            Term::Name(_) | Term::App { .. } => {
                out.push(here.clone());
                if let Term::App { args, .. } = t {
                    for (i, a) in args.iter().enumerate() {
                        here.push(i);
                        walk(a, here, out);
                        here.pop();
                    }
                }
            }
        }
    }
    walk(t, &mut Vec::new(), &mut out);
    out
}

fn subterm_at<'a>(t: &'a Term, pos: &[usize]) -> &'a Term {
    let mut cur = t;
    for &i in pos {
        match cur {
            Term::App { args, .. } => cur = &args[i],
            _ => unreachable!("position out of term"),
        }
    }
    cur
}

fn replace_at(t: &Term, pos: &[usize], new: &Term) -> Term {
    if pos.is_empty() {
        return new.clone();
    }
    match t {
        Term::App { sym, sort, args } => {
            let mut args = args.to_vec();
            args[pos[0]] = replace_at(&args[pos[0]], &pos[1..], new);
            Term::App { sym: sym.clone(), sort: sort.clone(), args: args.into() }
        }
        _ => unreachable!("position out of term"),
    }
}

fn rename_rule_apart(rule: &RewriteRule, bump: u32) -> RewriteRule {
    fn rn(t: &Term, bump: u32) -> Term {
        match t {
            Term::Var(v) => Term::Var(Var::indexed(
                v.base.clone(),
                v.index + bump,
                v.sort.clone(),
            )),
            Term::Name(_) => t.clone(),
            Term::App { sym, sort, args } => Term::App {
                sym: sym.clone(),
                sort: sort.clone(),
                args: args.iter().map(|a| rn(a, bump)).collect::<Vec<_>>().into(),
            },
        }
    }
    RewriteRule { lhs: rn(&rule.lhs, bump), rhs: rn(&rule.rhs, bump) }
}

/// All overlaps of one rule's left-hand side with a non-variable subterm of
/// another (or the same) rule's left-hand side, with the trivial root
/// self-overlap excluded.
pub fn critical_pairs(th: &TheorySpec) -> Vec<CriticalPair> {
    let mut out = Vec::new();
    let rules = th.rules();
    let max_index = rules
        .iter()
        .flat_map(|r| r.lhs.fv().into_iter().chain(r.rhs.fv()))
        .map(|v| v.index)
        .max()
        .unwrap_or(0);
    for (i, inner) in rules.iter().enumerate() {
        let inner = rename_rule_apart(inner, max_index + 1);
        for (j, outer) in rules.iter().enumerate() {
            for pos in nonvar_positions(&outer.lhs) {
                if pos.is_empty() && i == j {
                    continue;
                }
                let sub = subterm_at(&outer.lhs, &pos);
                if let Some(mgu) = unify(&inner.lhs, sub) {
                    let peak_reduced_inner =
                        mgu.apply_simultaneous(&replace_at(&outer.lhs, &pos, &inner.rhs));
                    let peak_reduced_outer = mgu.apply_simultaneous(&outer.rhs);
                    out.push(CriticalPair {
                        left: peak_reduced_inner,
                        right: peak_reduced_outer,
                        outer_rule: j,
                        inner_rule: i,
                        position: pos,
                    });
                }
            }
        }
    }
    out
}

/// How termination was established, if it was.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerminationVerdict {
    /// Every rule decreases under the LPO with the recorded argument orders.
    LpoOriented { lex_status: BTreeMap<String, Vec<usize>> },
    /// Some rules cannot be oriented by any searched LPO.
    NotOrientable { unorientable: Vec<usize> },
    /// LPO failed but the theory was asserted convergent by its author.
    AssertedOnly { unorientable: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinReport {
    pub pair: CriticalPair,
    pub left_nf: Term,
    pub right_nf: Term,
    pub joinable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergenceReport {
    pub termination: TerminationVerdict,
    pub joins: Vec<JoinReport>,
    pub locally_confluent: bool,
    pub convergent: bool,
    /// Set when convergence rests on the author's assertion rather than LPO.
    pub asserted: bool,
}

impl ConvergenceReport {
    pub fn lex_status_used(&self) -> Option<&BTreeMap<String, Vec<usize>>> {
        match &self.termination {
            TerminationVerdict::LpoOriented { lex_status } => Some(lex_status),
            _ => None,
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permutations(&mut items, n, &mut out);
    // identity first, then lexicographic
    out.sort();
    out
}

fn heap_permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

const STATUS_SEARCH_CAP: usize = 100_000;

/// Try to orient every rule, searching per-symbol argument permutations when
/// the supplied statuses fail. Returns the statuses used on success.
fn orient_rules(th: &TheorySpec) -> std::result::Result<BTreeMap<String, Vec<usize>>, Vec<usize>> {
    let all_oriented = |status: &BTreeMap<String, Vec<usize>>| {
        th.rules()
            .iter()
            .enumerate()
            .filter(|(_, r)| !lpo_gt_with(&r.lhs, &r.rhs, th, status))
            .map(|(i, _)| i)
            .collect::<Vec<usize>>()
    };

    let supplied = th.lex_status.clone();
    if all_oriented(&supplied).is_empty() {
        return Ok(supplied);
    }

    // symbols of arity >= 2 occurring in the rules, candidate statuses each
    let mut syms: Vec<(String, usize)> = Vec::new();
    for rule in th.rules() {
        for t in rule.lhs.subterms().into_iter().chain(rule.rhs.subterms()) {
            if let Term::App { sym, args, .. } = t {
                if args.len() >= 2 && !syms.iter().any(|(s, _)| s.as_str() == &**sym) {
                    syms.push((sym.to_string(), args.len()));
                }
            }
        }
    }
    syms.sort();
    let candidates: Vec<Vec<Vec<usize>>> =
        syms.iter().map(|(_, arity)| permutations(*arity)).collect();

    let mut combo_count: usize = 1;
    for c in &candidates {
        combo_count = combo_count.saturating_mul(c.len());
        if combo_count > STATUS_SEARCH_CAP {
            return Err(all_oriented(&supplied));
        }
    }

    let mut indices = vec![0usize; syms.len()];
    loop {
        let mut status = supplied.clone();
        for (k, (sym, _)) in syms.iter().enumerate() {
            status.insert(sym.clone(), candidates[k][indices[k]].clone());
        }
        let missing = all_oriented(&status);
        if missing.is_empty() {
            return Ok(status);
        }
        // advance odometer
        let mut k = 0;
        loop {
            if k == syms.len() {
                return Err(all_oriented(&supplied));
            }
            indices[k] += 1;
            if indices[k] < candidates[k].len() {
                break;
            }
            indices[k] = 0;
            k += 1;
        }
    }
}

/// Certify convergence: LPO termination (searching argument permutations as
/// needed) plus joinability of every critical pair.
pub fn check_convergence(th: &TheorySpec) -> Result<ConvergenceReport> {
    let termination = match orient_rules(th) {
        Ok(lex_status) => TerminationVerdict::LpoOriented { lex_status },
        Err(unorientable) => {
            if th.asserted_convergent {
                TerminationVerdict::AssertedOnly { unorientable }
            } else {
                TerminationVerdict::NotOrientable { unorientable }
            }
        }
    };

    let mut joins = Vec::new();
    let mut locally_confluent = true;
    for pair in critical_pairs(th) {
        let left_nf = normalize(&pair.left, th)?;
        let right_nf = normalize(&pair.right, th)?;
        let joinable = left_nf == right_nf;
        locally_confluent &= joinable;
        joins.push(JoinReport { pair, left_nf, right_nf, joinable });
    }

    let (terminates, asserted) = match &termination {
        TerminationVerdict::LpoOriented { .. } => (true, false),
        TerminationVerdict::AssertedOnly { .. } => (true, true),
        TerminationVerdict::NotOrientable { .. } => (false, false),
    };
    Ok(ConvergenceReport {
        termination,
        joins,
        locally_confluent,
        convergent: terminates && locally_confluent,
        asserted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{FunSymbol, Name, Signature, Sort};

    fn data() -> Sort {
        Sort::new("Data")
    }

    fn v(s: &str) -> Term {
        Term::Var(Var::new(s, data()))
    }

    fn n(s: &str) -> Term {
        Term::Name(Name::new(s, data()))
    }

    /// Pairs plus symmetric encryption, all one Data sort.
    fn pairs_enc_theory() -> TheorySpec {
        let mut sig = Signature::new();
        sig.add_sort(data());
        for (name, arity) in [("pair", 2), ("fst", 1), ("snd", 1), ("enc", 2), ("dec", 2), ("h", 1)]
        {
            sig.add_symbol(FunSymbol::new(name, vec![data(); arity], data())).unwrap();
        }
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        let pair_xy = sg.app("pair", vec![v("x"), v("y")]).unwrap();
        th.add_rule(sg.app("fst", vec![pair_xy.clone()]).unwrap(), v("x")).unwrap();
        th.add_rule(sg.app("snd", vec![pair_xy]).unwrap(), v("y")).unwrap();
        th.add_rule(
            sg.app("dec", vec![sg.app("enc", vec![v("x"), v("y")]).unwrap(), v("y")]).unwrap(),
            v("x"),
        )
        .unwrap();
        th
    }

    /// The Diffie-Hellman theory: f(x, g(y)) = f(y, g(x)) as a permutative
    /// equation, no rules.
    fn dh_theory() -> TheorySpec {
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_symbol(FunSymbol::new("g", vec![data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("f", vec![data(), data()], data())).unwrap();
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        th.add_perm(
            sg.app("f", vec![v("x"), sg.app("g", vec![v("y")]).unwrap()]).unwrap(),
            sg.app("f", vec![v("y"), sg.app("g", vec![v("x")]).unwrap()]).unwrap(),
        )
        .unwrap();
        th
    }

    /// The MAC theory: pairs of (list, block), list operations, append, and
    /// the iterated keyed hash.
    pub(crate) fn mac_theory() -> TheorySpec {
        let block = Sort::new("Block");
        let list = Sort::new("BlockList");
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_sort(block.clone());
        sig.add_sort(list.clone());
        sig.add_symbol(FunSymbol::new("pair", vec![list.clone(), block.clone()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("fst", vec![data()], list.clone())).unwrap();
        sig.add_symbol(FunSymbol::new("snd", vec![data()], block.clone())).unwrap();
        sig.add_symbol(FunSymbol::new("nil", vec![], list.clone())).unwrap();
        sig.add_symbol(FunSymbol::new("cons", vec![block.clone(), list.clone()], list.clone()))
            .unwrap();
        sig.add_symbol(FunSymbol::new("hd", vec![list.clone()], block.clone())).unwrap();
        sig.add_symbol(FunSymbol::new("tl", vec![list.clone()], list.clone())).unwrap();
        sig.add_symbol(FunSymbol::new("append", vec![list.clone(), block.clone()], list.clone()))
            .unwrap();
        sig.add_symbol(FunSymbol::new("f", vec![block.clone(), block.clone()], block.clone()))
            .unwrap();
        sig.add_symbol(FunSymbol::new("h", vec![block.clone(), list.clone()], block.clone()))
            .unwrap();
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        let bv = |s: &str| Term::Var(Var::new(s, block.clone()));
        let lv = |s: &str| Term::Var(Var::new(s, list.clone()));
        let cons = |a: Term, b: Term| sg.app("cons", vec![a, b]).unwrap();
        th.add_rule(
            sg.app("fst", vec![sg.app("pair", vec![lv("x"), bv("y")]).unwrap()]).unwrap(),
            lv("x"),
        )
        .unwrap();
        th.add_rule(
            sg.app("snd", vec![sg.app("pair", vec![lv("x"), bv("y")]).unwrap()]).unwrap(),
            bv("y"),
        )
        .unwrap();
        th.add_rule(sg.app("hd", vec![cons(bv("x"), lv("y"))]).unwrap(), bv("x")).unwrap();
        th.add_rule(sg.app("tl", vec![cons(bv("x"), lv("y"))]).unwrap(), lv("y")).unwrap();
        th.add_rule(
            sg.app("append", vec![sg.app("nil", vec![]).unwrap(), bv("x")]).unwrap(),
            cons(bv("x"), sg.app("nil", vec![]).unwrap()),
        )
        .unwrap();
        th.add_rule(
            sg.app("append", vec![cons(bv("x"), lv("y")), bv("z")]).unwrap(),
            cons(bv("x"), sg.app("append", vec![lv("y"), bv("z")]).unwrap()),
        )
        .unwrap();
        th.add_rule(
            sg.app("h", vec![bv("x"), cons(bv("y0"), cons(bv("y1"), lv("z")))]).unwrap(),
            sg.app(
                "h",
                vec![sg.app("f", vec![bv("x"), bv("y0")]).unwrap(), cons(bv("y1"), lv("z"))],
            )
            .unwrap(),
        )
        .unwrap();
        th.add_rule(
            sg.app("h", vec![bv("x"), cons(bv("y"), sg.app("nil", vec![]).unwrap())]).unwrap(),
            sg.app("f", vec![bv("x"), bv("y")]).unwrap(),
        )
        .unwrap();
        th
    }

    #[test]
    fn normalize_fst_projection() {
        let th = pairs_enc_theory();
        let sg = &th.signature;
        let t = sg.app("fst", vec![sg.app("pair", vec![n("a"), n("b")]).unwrap()]).unwrap();
        assert_eq!(normalize(&t, &th).unwrap(), n("a"));
    }

    #[test]
    fn normalize_irreducible_identity() {
        let th = pairs_enc_theory();
        assert_eq!(normalize(&n("a"), &th).unwrap(), n("a"));
    }

    #[test]
    fn normalize_three_block_mac() {
        // h(k, M1::M2::M3::nil) -> f(f(f(k,M1),M2),M3)
        let th = mac_theory();
        let sg = &th.signature;
        let block = Sort::new("Block");
        let bn = |s: &str| Term::Name(Name::new(s, block.clone()));
        let nil = sg.app("nil", vec![]).unwrap();
        let msg = sg
            .app(
                "cons",
                vec![
                    bn("m1"),
                    sg.app("cons", vec![bn("m2"), sg.app("cons", vec![bn("m3"), nil]).unwrap()])
                        .unwrap(),
                ],
            )
            .unwrap();
        let t = sg.app("h", vec![bn("k"), msg]).unwrap();
        let want = sg
            .app(
                "f",
                vec![
                    sg.app(
                        "f",
                        vec![sg.app("f", vec![bn("k"), bn("m1")]).unwrap(), bn("m2")],
                    )
                    .unwrap(),
                    bn("m3"),
                ],
            )
            .unwrap();
        assert_eq!(normalize(&t, &th).unwrap(), want);
    }

    #[test]
    fn perm_equation_orders_instances() {
        // f(b, g(a)) and f(a, g(b)) share the canonical representative f(a, g(b))
        let th = dh_theory();
        let sg = &th.signature;
        let t1 = sg.app("f", vec![n("b"), sg.app("g", vec![n("a")]).unwrap()]).unwrap();
        let t2 = sg.app("f", vec![n("a"), sg.app("g", vec![n("b")]).unwrap()]).unwrap();
        let n1 = normalize(&t1, &th).unwrap();
        let n2 = normalize(&t2, &th).unwrap();
        assert_eq!(n1, n2);
        assert_eq!(n1, t2, "representative is the canonically smaller instance");
    }

    #[test]
    fn eq_mod_dh_equation() {
        let th = dh_theory();
        let sg = &th.signature;
        let t1 = sg.app("f", vec![n("n0"), sg.app("g", vec![n("n1")]).unwrap()]).unwrap();
        let t2 = sg.app("f", vec![n("n1"), sg.app("g", vec![n("n0")]).unwrap()]).unwrap();
        assert!(eq_mod(&t1, &t2, &th).unwrap());
    }

    #[test]
    fn eq_mod_free_hash_distinct() {
        let th = pairs_enc_theory();
        let sg = &th.signature;
        let t = sg.app("h", vec![n("s")]).unwrap();
        assert!(!eq_mod(&t, &n("s"), &th).unwrap());
        assert!(eq_mod(&t, &t, &th).unwrap());
    }

    #[test]
    fn critical_pairs_empty_rule_set() {
        let th = dh_theory();
        assert!(critical_pairs(&th).is_empty());
    }

    #[test]
    fn critical_pairs_fst_with_surjective_pairing() {
        // rules fst((x,y)) -> x and (fst(z), snd(z)) -> z overlap twice: the
        // pairing rule inside fst's argument joins trivially as
        // (fst(z), fst(z)); fst inside the pairing rule's first argument
        // yields ((x,y), (x, snd((x,y)))), not joinable without the snd rule.
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_symbol(FunSymbol::new("pair", vec![data(), data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("fst", vec![data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("snd", vec![data()], data())).unwrap();
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        let pair_xy = sg.app("pair", vec![v("x"), v("y")]).unwrap();
        th.add_rule(sg.app("fst", vec![pair_xy]).unwrap(), v("x")).unwrap();
        th.add_rule(
            sg.app(
                "pair",
                vec![sg.app("fst", vec![v("z")]).unwrap(), sg.app("snd", vec![v("z")]).unwrap()],
            )
            .unwrap(),
            v("z"),
        )
        .unwrap();
        let cps = critical_pairs(&th);
        assert_eq!(cps.len(), 2);
        let trivial: Vec<_> = cps.iter().filter(|cp| cp.left == cp.right).collect();
        assert_eq!(trivial.len(), 1);
        assert!(matches!(&trivial[0].left, Term::App { sym, .. } if &**sym == "fst"));
        let report = check_convergence(&th).unwrap();
        assert!(!report.locally_confluent, "the pair-into-fst overlap needs the snd rule");
    }

    #[test]
    fn full_pairing_system_confluent() {
        // adding the snd rule joins all four fst/snd/pair overlaps
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_symbol(FunSymbol::new("pair", vec![data(), data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("fst", vec![data()], data())).unwrap();
        sig.add_symbol(FunSymbol::new("snd", vec![data()], data())).unwrap();
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        let pair_xy = sg.app("pair", vec![v("x"), v("y")]).unwrap();
        th.add_rule(sg.app("fst", vec![pair_xy.clone()]).unwrap(), v("x")).unwrap();
        th.add_rule(sg.app("snd", vec![pair_xy]).unwrap(), v("y")).unwrap();
        th.add_rule(
            sg.app(
                "pair",
                vec![sg.app("fst", vec![v("z")]).unwrap(), sg.app("snd", vec![v("z")]).unwrap()],
            )
            .unwrap(),
            v("z"),
        )
        .unwrap();
        let cps = critical_pairs(&th);
        assert_eq!(cps.len(), 4);
        let report = check_convergence(&th).unwrap();
        assert!(report.convergent, "{report:?}");
    }

    #[test]
    fn corollary2_system_convergent() {
        let th = mac_theory();
        assert!(critical_pairs(&th).is_empty());
        let report = check_convergence(&th).unwrap();
        assert!(report.convergent);
        assert!(!report.asserted);
        let status = report.lex_status_used().unwrap();
        // the second argument of h is compared before the first
        assert_eq!(status.get("h"), Some(&vec![1, 0]));
    }

    #[test]
    fn embedding_rule_not_orientable() {
        // f(x) -> f(f(x)) embeds its left side; LPO must fail
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_symbol(FunSymbol::new("f", vec![data()], data())).unwrap();
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        th.add_rule(
            sg.app("f", vec![v("x")]).unwrap(),
            sg.app("f", vec![sg.app("f", vec![v("x")]).unwrap()]).unwrap(),
        )
        .unwrap();
        let report = check_convergence(&th).unwrap();
        assert!(matches!(report.termination, TerminationVerdict::NotOrientable { .. }));
        assert!(!report.convergent);
    }

    #[test]
    fn step_budget_guards_looping_rules() {
        let mut sig = Signature::new();
        sig.add_sort(data());
        sig.add_symbol(FunSymbol::new("f", vec![data()], data())).unwrap();
        let mut th = TheorySpec::new(sig);
        let sg = th.signature.clone();
        th.add_rule(
            sg.app("f", vec![v("x")]).unwrap(),
            sg.app("f", vec![sg.app("f", vec![v("x")]).unwrap()]).unwrap(),
        )
        .unwrap();
        th.step_budget = 100;
        let t = sg.app("f", vec![n("a")]).unwrap();
        assert!(matches!(normalize(&t, &th), Err(Error::StepLimitExceeded { .. })));
    }

    #[test]
    fn normalize_idempotent_on_samples() {
        let th = mac_theory();
        let sg = &th.signature;
        let block = Sort::new("Block");
        let bn = |s: &str| Term::Name(Name::new(s, block.clone()));
        let nil = sg.app("nil", vec![]).unwrap();
        let samples = vec![
            sg.app("h", vec![bn("k"), sg.app("cons", vec![bn("m"), nil.clone()]).unwrap()])
                .unwrap(),
            sg.app("append", vec![nil.clone(), bn("m")]).unwrap(),
            sg.app("hd", vec![sg.app("append", vec![nil, bn("m")]).unwrap()]).unwrap(),
        ];
        for t in samples {
            let once = normalize(&t, &th).unwrap();
            assert_eq!(normalize(&once, &th).unwrap(), once);
        }
    }

    #[test]
    fn nontrivial_theory_check() {
        assert!(mac_theory().check_nontrivial().is_ok());
    }
}
