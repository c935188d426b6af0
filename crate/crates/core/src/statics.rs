//! Frame reasoning: equality tests in a frame, attacker recipe enumeration,
//! deducibility, static equivalence with distinguishing-test extraction, and
//! the alias-elimination / name-disclosure frame simplifiers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::config::{Configuration, Frame};
use crate::error::{Error, Result};
use crate::rewriting::{eq_mod, normalize, TheorySpec};
use crate::terms::{apply_subst, fresh_name, Name, Sort, Term, Var};

/// Bounds for attacker-term synthesis.
///
/// `max_depth` counts synthesis layers over the attacker's base knowledge:
/// frame-domain variables, public names, and constants, closed under
/// extraction (applications whose normal form under the frame is a strict
/// subterm of a known value, which cost the attacker nothing). `max_count`
/// caps how many recipes are enumerated per sort; enumeration proceeds layer
/// by layer in a deterministic order, so a count cap truncates the deepest
/// layer last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecipeBudget {
    pub max_depth: u32,
    pub allowed_symbols: Option<BTreeSet<String>>,
    pub max_count: Option<usize>,
    /// Names the attacker may use in recipes; by convention the free names of
    /// the model under analysis.
    pub public_names: BTreeSet<Name>,
}

impl RecipeBudget {
    pub fn depth(max_depth: u32) -> Self {
        RecipeBudget {
            max_depth,
            allowed_symbols: None,
            max_count: Some(100_000),
            public_names: BTreeSet::new(),
        }
    }

    pub fn with_public_names(mut self, names: impl IntoIterator<Item = Name>) -> Self {
        self.public_names.extend(names);
        self
    }

    pub fn with_count(mut self, cap: Option<usize>) -> Self {
        self.max_count = cap;
        self
    }

    pub fn allows(&self, sym: &str) -> bool {
        match &self.allowed_symbols {
            Some(set) => set.contains(sym),
            None => true,
        }
    }
}

impl Default for RecipeBudget {
    fn default() -> Self {
        RecipeBudget::depth(4)
    }
}

/// Outcome of a bounded static-equivalence check. Refutations are
/// unconditional; equivalence is always relative to the budget searched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivVerdict {
    Distinguished { test: (Term, Term) },
    DomainMismatch { left_only: Vec<Var>, right_only: Vec<Var> },
    EquivalentUpToBudget { budget: RecipeBudget },
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivVerdict::EquivalentUpToBudget { .. })
    }
}

/// Rename restricted names of a frame away from the given names, returning
/// the adjusted substitution.
fn rename_restricted_away(f: &Frame, avoid: &BTreeSet<Name>) -> Frame {
    let clashing: Vec<Name> =
        f.restricted.iter().filter(|n| avoid.contains(*n)).cloned().collect();
    if clashing.is_empty() {
        return f.clone();
    }
    let mut used: BTreeSet<Name> = avoid.clone();
    used.extend(f.restricted.iter().cloned());
    for (_, t) in f.subst.iter() {
        used.extend(t.fn_());
    }
    let mut restricted = f.restricted.clone();
    let mut subst = f.subst.clone();
    for n in clashing {
        let fresh = fresh_name(&n.base, &n.sort, &used);
        used.insert(fresh.clone());
        restricted.remove(&n);
        restricted.insert(fresh.clone());
        let t = Term::Name(fresh);
        subst = subst.iter().map(|(v, m)| (v.clone(), m.subst_name(&n, &t))).collect();
    }
    Frame { restricted, subst }
}

/// Equality of two attacker terms in a frame: `(M = N)phi`.
pub fn test_holds(m: &Term, n: &Term, f: &Frame, th: &TheorySpec) -> Result<bool> {
    let mut vars = m.fv();
    vars.extend(n.fv());
    let dom = f.dom();
    if !vars.is_subset(&dom) {
        let outside: Vec<String> =
            vars.difference(&dom).map(|v| v.to_string()).collect();
        return Err(Error::Domain { msg: outside.join(", ") });
    }
    let mut test_names = m.fn_();
    test_names.extend(n.fn_());
    let f = rename_restricted_away(f, &test_names);
    let ms = apply_subst(m, &f.subst)?;
    let ns = apply_subst(n, &f.subst)?;
    eq_mod(&ms, &ns, th)
}

#[derive(Debug, Clone)]
struct RecipeEntry {
    recipe: Term,
    /// normal form of the recipe applied under each frame
    values: Vec<Term>,
    /// synthesis layer; base atoms and extractions are layer 0
    layer: u32,
}

/// Attacker base knowledge and synthesis layers for one or two frames.
struct Enumerator<'a> {
    th: &'a TheorySpec,
    frames: Vec<Frame>,
    budget: &'a RecipeBudget,
    by_sort: BTreeMap<Sort, Vec<RecipeEntry>>,
    seen: BTreeMap<Sort, HashSet<Vec<Term>>>,
}

impl<'a> Enumerator<'a> {
    fn new(frames: Vec<Frame>, budget: &'a RecipeBudget, th: &'a TheorySpec) -> Result<Self> {
        let mut e = Enumerator {
            th,
            frames,
            budget,
            by_sort: BTreeMap::new(),
            seen: BTreeMap::new(),
        };
        e.seed()?;
        e.extraction_closure()?;
        for depth in 1..=e.budget.max_depth {
            e.synthesis_layer(depth)?;
        }
        Ok(e)
    }

    fn values_of(&self, recipe: &Term) -> Result<Vec<Term>> {
        let mut out = Vec::with_capacity(self.frames.len());
        for f in &self.frames {
            out.push(normalize(&apply_subst(recipe, &f.subst)?, self.th)?);
        }
        Ok(out)
    }

    fn insert(&mut self, recipe: Term, layer: u32) -> Result<bool> {
        if self.sort_full(recipe.sort()) {
            return Ok(false);
        }
        let values = self.values_of(&recipe)?;
        Ok(self.insert_with_values(recipe, values, layer))
    }

    fn sort_full(&self, sort: &Sort) -> bool {
        match self.budget.max_count {
            Some(cap) => self.by_sort.get(sort).map(|v| v.len()).unwrap_or(0) >= cap,
            None => false,
        }
    }

    fn insert_with_values(&mut self, recipe: Term, values: Vec<Term>, layer: u32) -> bool {
        let sort = recipe.sort().clone();
        let seen = self.seen.entry(sort.clone()).or_default();
        if seen.contains(&values) {
            return false;
        }
        seen.insert(values.clone());
        self.by_sort.entry(sort).or_default().push(RecipeEntry { recipe, values, layer });
        true
    }

    fn seed(&mut self) -> Result<()> {
        let mut atoms: Vec<Term> = Vec::new();
        for f in &self.frames {
            for v in f.subst.domain() {
                atoms.push(Term::Var(v.clone()));
            }
        }
        let mut names: BTreeSet<Name> = self.budget.public_names.clone();
        for f in &self.frames {
            names.extend(f.public_names());
        }
        for n in names {
            atoms.push(Term::Name(n));
        }
        for sym in self.th.signature.symbols() {
            if sym.arity() == 0 && self.budget.allows(&sym.name) {
                atoms.push(self.th.signature.app(&sym.name, vec![])?);
            }
        }
        atoms.sort();
        atoms.dedup();
        for a in atoms {
            self.insert(a, 0)?;
        }
        Ok(())
    }

    /// Close the base under applications that extract strict subterms of
    /// known values. These cost the attacker nothing and seed depth 0.
    fn extraction_closure(&mut self) -> Result<()> {
        const MAX_ROUNDS: usize = 32;
        const MAX_BASE: usize = 512;
        for _ in 0..MAX_ROUNDS {
            let mut added = false;
            let symbols: Vec<_> = self
                .th
                .signature
                .symbols()
                .filter(|s| s.arity() >= 1 && self.budget.allows(&s.name))
                .cloned()
                .collect();
            for sym in symbols {
                let candidate_args: Vec<Vec<(Term, Vec<Term>)>> = sym
                    .arg_sorts
                    .iter()
                    .map(|s| {
                        self.by_sort
                            .get(s)
                            .map(|v| {
                                v.iter().map(|e| (e.recipe.clone(), e.values.clone())).collect()
                            })
                            .unwrap_or_default()
                    })
                    .collect();
                if candidate_args.iter().any(|c: &Vec<_>| c.is_empty()) {
                    continue;
                }
                let mut idx = vec![0usize; sym.arity()];
                'tuples: loop {
                    let args: Vec<&(Term, Vec<Term>)> =
                        idx.iter().enumerate().map(|(k, &i)| &candidate_args[k][i]).collect();
                    let recipe = self
                        .th
                        .signature
                        .app(&sym.name, args.iter().map(|(r, _)| r.clone()).collect())?;
                    let values = self.values_of(&recipe)?;
                    // extraction: in every frame, the value is a strict
                    // subterm of some argument's value
                    let extracts = values.iter().enumerate().all(|(fi, v)| {
                        args.iter().any(|(_, arg_vals)| {
                            let av = &arg_vals[fi];
                            av != v && av.subterms().iter().any(|s| *s == v)
                        })
                    });
                    if extracts {
                        added |= self.insert(recipe, 0)?;
                    }
                    let mut k = 0;
                    loop {
                        if k == idx.len() {
                            break 'tuples;
                        }
                        idx[k] += 1;
                        if idx[k] < candidate_args[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                }
            }
            let base_size: usize = self.by_sort.values().map(|v| v.len()).sum();
            if !added || base_size > MAX_BASE {
                break;
            }
        }
        Ok(())
    }

    fn synthesis_layer(&mut self, depth: u32) -> Result<()> {
        let nframes = self.frames.len();
        let snapshot: BTreeMap<Sort, Vec<RecipeEntry>> = self.by_sort.clone();
        let symbols: Vec<_> = self
            .th
            .signature
            .symbols()
            .filter(|s| s.arity() >= 1 && self.budget.allows(&s.name))
            .cloned()
            .collect();
        for sym in symbols {
            if self.sort_full(&sym.result_sort) {
                continue;
            }
            let candidate_args: Vec<&Vec<RecipeEntry>> = match sym
                .arg_sorts
                .iter()
                .map(|s| snapshot.get(s))
                .collect::<Option<Vec<_>>>()
            {
                Some(v) => v,
                None => continue,
            };
            if candidate_args.iter().any(|c| c.is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; sym.arity()];
            'tuples: loop {
                // at least one argument from the previous layer keeps tuples new
                let max_layer = idx
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| candidate_args[k][i].layer)
                    .max()
                    .unwrap();
                if max_layer == depth - 1 {
                    let args: Vec<Term> = idx
                        .iter()
                        .enumerate()
                        .map(|(k, &i)| candidate_args[k][i].recipe.clone())
                        .collect();
                    let recipe = self.th.signature.app(&sym.name, args)?;
                    // the value under each frame comes from the argument
                    // values, which are already in normal form
                    let mut values = Vec::with_capacity(nframes);
                    for fi in 0..nframes {
                        let arg_values: Vec<Term> = idx
                            .iter()
                            .enumerate()
                            .map(|(k, &i)| candidate_args[k][i].values[fi].clone())
                            .collect();
                        let applied = self.th.signature.app(&sym.name, arg_values)?;
                        values.push(normalize(&applied, self.th)?);
                    }
                    self.insert_with_values(recipe, values, depth);
                    if self.sort_full(&sym.result_sort) {
                        break 'tuples;
                    }
                }
                let mut k = 0;
                loop {
                    if k == idx.len() {
                        break 'tuples;
                    }
                    idx[k] += 1;
                    if idx[k] < candidate_args[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        Ok(())
    }
}

/// Enumerate well-sorted attacker recipes of a sort over the frame domain,
/// the public names, and the allowed symbols, deduplicated modulo the
/// equational theory under the frame.
pub fn enum_recipes(
    f: &Frame,
    sort: &Sort,
    budget: &RecipeBudget,
    th: &TheorySpec,
) -> Result<Vec<Term>> {
    let e = Enumerator::new(vec![f.clone()], budget, th)?;
    Ok(e.by_sort
        .get(sort)
        .map(|v| v.iter().map(|entry| entry.recipe.clone()).collect())
        .unwrap_or_default())
}

/// Enumerate recipes over two frames with one representative kept per pair
/// of normal forms. The shared list keeps labels aligned when comparing the
/// behaviour of two configurations with equal domains.
pub fn enum_recipes_joint(
    f1: &Frame,
    f2: &Frame,
    sort: &Sort,
    budget: &RecipeBudget,
    th: &TheorySpec,
) -> Result<Vec<Term>> {
    let e = Enumerator::new(vec![f1.clone(), f2.clone()], budget, th)?;
    Ok(e.by_sort
        .get(sort)
        .map(|v| v.iter().map(|entry| entry.recipe.clone()).collect())
        .unwrap_or_default())
}

/// Find a recipe equal to `target` in the frame, or report failure.
pub fn deduce(
    f: &Frame,
    target: &Term,
    budget: &RecipeBudget,
    th: &TheorySpec,
) -> Result<Option<Term>> {
    if !target.fv().is_subset(&f.dom()) {
        return Err(Error::Domain {
            msg: format!("deduction target {target} has variables outside the frame domain"),
        });
    }
    let want = normalize(&apply_subst(target, &f.subst)?, th)?;
    let e = Enumerator::new(vec![f.clone()], budget, th)?;
    if let Some(entries) = e.by_sort.get(target.sort()) {
        for entry in entries {
            if entry.values[0] == want {
                return Ok(Some(entry.recipe.clone()));
            }
        }
    }
    Ok(None)
}

/// Bounded static-equivalence check together with the joint recipe classes
/// it enumerated, for callers that reuse the recipes as label candidates.
pub fn static_equiv_with_recipes(
    f1: &Frame,
    f2: &Frame,
    budget: &RecipeBudget,
    th: &TheorySpec,
) -> Result<(EquivVerdict, BTreeMap<Sort, Vec<Term>>)> {
    let d1 = f1.dom();
    let d2 = f2.dom();
    if d1 != d2 {
        return Ok((
            EquivVerdict::DomainMismatch {
                left_only: d1.difference(&d2).cloned().collect(),
                right_only: d2.difference(&d1).cloned().collect(),
            },
            BTreeMap::new(),
        ));
    }
    let e = Enumerator::new(vec![f1.clone(), f2.clone()], budget, th)?;
    let recipes: BTreeMap<Sort, Vec<Term>> = e
        .by_sort
        .iter()
        .map(|(s, v)| (s.clone(), v.iter().map(|entry| entry.recipe.clone()).collect()))
        .collect();
    for entries in e.by_sort.values() {
        let mut by_left: HashMap<&Term, &Term> = HashMap::new();
        let mut by_right: HashMap<&Term, &Term> = HashMap::new();
        for entry in entries {
            let recipe = &entry.recipe;
            let (left_nf, right_nf) = (&entry.values[0], &entry.values[1]);
            if let Some(other) = by_left.get(left_nf) {
                // equal on the left, and distinct joint keys force a
                // difference on the right
                let test = ((*other).clone(), recipe.clone());
                if verify_test(&test, f1, f2, th)? {
                    return Ok((EquivVerdict::Distinguished { test }, recipes));
                }
            } else {
                by_left.insert(left_nf, recipe);
            }
            if let Some(other) = by_right.get(right_nf) {
                let test = ((*other).clone(), recipe.clone());
                if verify_test(&test, f1, f2, th)? {
                    return Ok((EquivVerdict::Distinguished { test }, recipes));
                }
            } else {
                by_right.insert(right_nf, recipe);
            }
        }
    }
    Ok((EquivVerdict::EquivalentUpToBudget { budget: budget.clone() }, recipes))
}

/// Bounded static-equivalence check. Enumerates recipes jointly over both
/// frames, keeping one representative per pair of normal forms; any two
/// representatives that collide in exactly one frame form a distinguishing
/// test, which is re-verified before being reported.
pub fn static_equiv(
    f1: &Frame,
    f2: &Frame,
    budget: &RecipeBudget,
    th: &TheorySpec,
) -> Result<EquivVerdict> {
    Ok(static_equiv_with_recipes(f1, f2, budget, th)?.0)
}

fn verify_test(test: &(Term, Term), f1: &Frame, f2: &Frame, th: &TheorySpec) -> Result<bool> {
    let in1 = test_holds(&test.0, &test.1, f1, th)?;
    let in2 = test_holds(&test.0, &test.1, f2, th)?;
    Ok(in1 != in2)
}

/// Budget used internally for alias elimination in `simplify_frame`.
fn simplifier_budget(f: &Frame) -> RecipeBudget {
    RecipeBudget {
        max_depth: 2,
        allowed_symbols: None,
        max_count: Some(2_000),
        public_names: f.public_names(),
    }
}

/// Remove frame bindings the environment can rebuild from the rest of the
/// frame (alias elimination) and disclose restricted names that occur only
/// as the direct value of an exported variable (name disclosure). Both are
/// equivalence-preserving.
pub fn simplify_frame(c: &Configuration, th: &TheorySpec) -> Result<Configuration> {
    let mut out = c.clone();
    // alias elimination, later bindings first
    loop {
        let mut removed = false;
        let vars: Vec<Var> = out.frame.domain().cloned().collect();
        for v in vars.iter().rev() {
            let value = out.frame.get(v).cloned().unwrap();
            let mut without = out.frame.clone();
            without.remove(v);
            let candidate = Frame {
                restricted: out.restricted.clone(),
                subst: without.clone(),
            };
            let budget = simplifier_budget(&candidate);
            if deduce(&candidate, &value, &budget, th)?.is_some() {
                out.frame = without;
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }
    // name disclosure: new n; {n/x} with n used nowhere else
    let bindings: Vec<(Var, Term)> =
        out.frame.iter().map(|(v, t)| (v.clone(), t.clone())).collect();
    for (v, t) in bindings {
        if let Term::Name(n) = &t {
            if !out.restricted.contains(n) {
                continue;
            }
            let elsewhere = out
                .frame
                .iter()
                .any(|(w, m)| *w != v && m.contains_name(n))
                || out.procs.iter().any(|p| p.fn_().contains(n));
            if !elsewhere {
                out.restricted.remove(n);
            }
        }
    }
    Ok(out)
}

/// Frame view of `simplify_frame` for callers holding a frame.
pub fn simplify_frame_only(f: &Frame, th: &TheorySpec) -> Result<Frame> {
    let c = Configuration {
        restricted: f.restricted.clone(),
        frame: f.subst.clone(),
        procs: Vec::new(),
    };
    let s = simplify_frame(&c, th)?;
    Ok(Frame { restricted: s.restricted, subst: s.frame })
}
