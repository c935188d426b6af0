//! Operational semantics on configurations: internal reduction, barbs,
//! simple and refined labelled transitions, and variable resolution.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{flatten_process, frame_of, Configuration, Frame};
use crate::error::Result;
use crate::process::Process;
use crate::rewriting::{eq_mod, normalize, TheorySpec};
use crate::statics::{deduce, enum_recipes, RecipeBudget};
use crate::terms::{apply_subst, fresh_var, Name, Sort, Substitution, Term, Var};

/// Transition labels. Recipes are attacker terms over the frame domain and
/// public names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    Tau,
    /// `N(M)`: input of the message recipe on the channel recipe.
    In { chan: Term, msg: Term },
    /// `nu x. N<x>`: output of a fresh handle for the sent term.
    OutVar { chan: Term, fresh: Var },
    /// `nu x~. N<M>`: output exposing payload structure; the opened variables
    /// become frame bindings.
    OutRefined { chan: Term, payload: Term, opened: Vec<Var> },
}

impl Label {
    pub fn fv(&self) -> BTreeSet<Var> {
        match self {
            Label::Tau => BTreeSet::new(),
            Label::In { chan, msg } => {
                let mut out = chan.fv();
                out.extend(msg.fv());
                out
            }
            Label::OutVar { chan, .. } => chan.fv(),
            Label::OutRefined { chan, payload, opened } => {
                let mut out = chan.fv();
                out.extend(payload.fv());
                for v in opened {
                    out.remove(v);
                }
                out
            }
        }
    }

    pub fn fn_(&self) -> BTreeSet<Name> {
        match self {
            Label::Tau => BTreeSet::new(),
            Label::In { chan, msg } => {
                let mut out = chan.fn_();
                out.extend(msg.fn_());
                out
            }
            Label::OutVar { chan, .. } => chan.fn_(),
            Label::OutRefined { chan, payload, .. } => {
                let mut out = chan.fn_();
                out.extend(payload.fn_());
                out
            }
        }
    }
}

/// A labelled transition and its target configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionResult {
    pub label: Label,
    pub target: Configuration,
}

fn flatten_into(c: &Configuration, replaced: usize, new_procs: Vec<Process>) -> Configuration {
    let mut out = c.clone();
    let mut used = out.used_names();
    let mut procs: Vec<Process> = Vec::new();
    for (i, p) in c.procs.iter().enumerate() {
        if i == replaced {
            for np in &new_procs {
                flatten_process(np.clone(), &mut out.restricted, &mut used, &mut procs);
            }
        } else {
            procs.push(p.clone());
        }
    }
    out.procs = procs;
    out
}

/// What produced an internal step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InternalKind {
    Cond,
    Comm,
    Unfold,
}

/// All one-step internal successors: communication between matching outputs
/// and inputs, conditional resolution, and one replication unfolding, each
/// tagged with its kind.
pub fn internal_steps_tagged(
    c: &Configuration,
    th: &TheorySpec,
) -> Result<Vec<(InternalKind, Configuration)>> {
    let mut out = Vec::new();
    for (i, p) in c.procs.iter().enumerate() {
        match p {
            Process::If { lhs, rhs, then_p, else_p } => {
                let branch = if eq_mod(lhs, rhs, th)? { then_p } else { else_p };
                out.push((InternalKind::Cond, flatten_into(c, i, vec![(**branch).clone()])));
            }
            Process::Repl(body) => {
                let unfolded = flatten_into(c, i, vec![(**body).clone(), p.clone()]);
                out.push((InternalKind::Unfold, unfolded));
            }
            _ => {}
        }
    }
    // communication
    for (i, p) in c.procs.iter().enumerate() {
        let (out_chan, msg, cont) = match p {
            Process::Out { chan, msg, body } => (chan, msg, body),
            _ => continue,
        };
        for (j, q) in c.procs.iter().enumerate() {
            if i == j {
                continue;
            }
            let (in_chan, var, body) = match q {
                Process::In { chan, var, body } => (chan, var, body),
                _ => continue,
            };
            if eq_mod(out_chan, in_chan, th)? {
                let s = Substitution::from_iter([(var.clone(), msg.clone())]);
                let receiver = body.apply_subst(&s);
                // rebuild with both i and j replaced
                let mut tmp = c.clone();
                let mut used = tmp.used_names();
                let mut procs = Vec::new();
                for (k, r) in c.procs.iter().enumerate() {
                    if k == i {
                        flatten_process(
                            (**cont).clone(),
                            &mut tmp.restricted,
                            &mut used,
                            &mut procs,
                        );
                    } else if k == j {
                        flatten_process(
                            receiver.clone(),
                            &mut tmp.restricted,
                            &mut used,
                            &mut procs,
                        );
                    } else {
                        procs.push(r.clone());
                    }
                }
                tmp.procs = procs;
                out.push((InternalKind::Comm, tmp));
            }
        }
    }
    Ok(out)
}

/// All one-step internal successors.
pub fn internal_steps(c: &Configuration, th: &TheorySpec) -> Result<Vec<Configuration>> {
    Ok(internal_steps_tagged(c, th)?.into_iter().map(|(_, c)| c).collect())
}

/// Does some state reachable within `depth` internal steps enable an output
/// whose channel equals the name `a` modulo the theory?
pub fn barb(c: &Configuration, a: &Name, depth: u32, th: &TheorySpec) -> Result<bool> {
    if c.restricted.contains(a) {
        return Ok(false);
    }
    let chan = Term::Name(a.clone());
    let mut frontier = vec![c.clone()];
    let mut visited: BTreeSet<String> = BTreeSet::new();
    for _ in 0..=depth {
        let mut next = Vec::new();
        for state in frontier {
            let key = format!("{state}");
            if visited.contains(&key) {
                continue;
            }
            visited.insert(key);
            for p in &state.procs {
                if let Process::Out { chan: n, .. } = p {
                    if eq_mod(n, &chan, th)? {
                        return Ok(true);
                    }
                }
            }
            next.extend(internal_steps(&state, th)?);
        }
        if next.is_empty() {
            return Ok(false);
        }
        frontier = next;
    }
    Ok(false)
}

/// Recipes evaluating to each distinct channel in use, for building labels.
fn channel_recipes(
    c: &Configuration,
    th: &TheorySpec,
    budget: &RecipeBudget,
) -> Result<Vec<(Term, Term)>> {
    let frame = frame_of(c);
    let mut budget = budget.clone();
    budget.max_depth = budget.max_depth.min(2);
    let recipes = enum_recipes(&frame, &Sort::channel(), &budget, th)?;
    let mut out = Vec::new();
    for r in recipes {
        let value = normalize(&apply_subst(&r, &frame.subst)?, th)?;
        out.push((r, value));
    }
    Ok(out)
}

fn fresh_label_var(c: &Configuration, sort: &Sort, taken: &BTreeSet<Var>) -> Var {
    let mut used: BTreeSet<Var> = c.dom();
    used.extend(taken.iter().cloned());
    for p in &c.procs {
        used.extend(p.fv());
    }
    fresh_var("z", sort, &used)
}

/// Precomputed label ingredients: candidate channel recipes and message
/// recipes per sort. Sharing one candidate set across two configurations
/// keeps their labels aligned for bisimulation matching.
#[derive(Debug, Clone, Default)]
pub struct LabelCandidates {
    pub chans: Vec<Term>,
    pub msgs: BTreeMap<Sort, Vec<Term>>,
}

impl LabelCandidates {
    /// Candidates from a single configuration's own frame.
    pub fn for_config(
        c: &Configuration,
        th: &TheorySpec,
        budget: &RecipeBudget,
    ) -> Result<Self> {
        let frame = frame_of(c);
        let chans = {
            let mut b = budget.clone();
            b.max_depth = b.max_depth.min(2);
            enum_recipes(&frame, &Sort::channel(), &b, th)?
        };
        let mut msgs = BTreeMap::new();
        for p in &c.procs {
            if let Process::In { var, .. } = p {
                if !msgs.contains_key(&var.sort) {
                    msgs.insert(var.sort.clone(), enum_recipes(&frame, &var.sort, budget, th)?);
                }
            }
        }
        Ok(LabelCandidates { chans, msgs })
    }
}

/// Simple labelled transitions driven by the given candidate recipes.
pub fn labelled_steps_given(
    c: &Configuration,
    th: &TheorySpec,
    cands: &LabelCandidates,
) -> Result<Vec<TransitionResult>> {
    let frame = frame_of(c);
    let mut chans: Vec<(Term, Term)> = Vec::new();
    for r in &cands.chans {
        if !r.fv().is_subset(&frame.dom()) {
            continue;
        }
        let value = normalize(&apply_subst(r, &frame.subst)?, th)?;
        chans.push((r.clone(), value));
    }
    let mut out = Vec::new();
    for (i, p) in c.procs.iter().enumerate() {
        match p {
            Process::Out { chan, msg, body } => {
                let chan_nf = normalize(chan, th)?;
                for (recipe, value) in &chans {
                    if *value != chan_nf {
                        continue;
                    }
                    let fresh = fresh_label_var(c, msg.sort(), &BTreeSet::new());
                    let mut target = flatten_into(c, i, vec![(**body).clone()]);
                    target.bind_frame(fresh.clone(), msg.clone())?;
                    out.push(TransitionResult {
                        label: Label::OutVar { chan: recipe.clone(), fresh },
                        target,
                    });
                }
            }
            Process::In { chan, var, body } => {
                let chan_nf = normalize(chan, th)?;
                for (recipe, value) in &chans {
                    if *value != chan_nf {
                        continue;
                    }
                    let msgs = cands.msgs.get(&var.sort).cloned().unwrap_or_default();
                    for m in msgs {
                        if !m.fv().is_subset(&frame.dom()) {
                            continue;
                        }
                        let value = apply_subst(&m, &frame.subst)?;
                        let s = Substitution::from_iter([(var.clone(), value)]);
                        let target = flatten_into(c, i, vec![body.apply_subst(&s)]);
                        out.push(TransitionResult {
                            label: Label::In { chan: recipe.clone(), msg: m },
                            target,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    debug_assert!(out.iter().all(|t| label_side_conditions(&t.label, c)));
    Ok(out)
}

/// Simple labelled transitions: inputs of recipe messages and outputs by
/// fresh variable, with recipes enumerated from the configuration's frame.
pub fn labelled_steps_simple(
    c: &Configuration,
    th: &TheorySpec,
    recipes: &RecipeBudget,
) -> Result<Vec<TransitionResult>> {
    let cands = LabelCandidates::for_config(c, th, recipes)?;
    labelled_steps_given(c, th, &cands)
}

/// Side conditions on labels: free variables inside the source domain and no
/// restricted name mentioned.
pub fn label_side_conditions(label: &Label, source: &Configuration) -> bool {
    let dom = source.dom();
    label.fv().is_subset(&dom) && label.fn_().is_disjoint(&source.restricted)
}

/// Resolve variables to recipes over the rest of the frame: each variable's
/// value must be computable without it, and jointly the replacement is
/// cycle-free because resolved recipes avoid all requested variables.
pub fn resolve(
    vars: &[Var],
    f: &Frame,
    th: &TheorySpec,
    budget: &RecipeBudget,
) -> Result<Option<Vec<Term>>> {
    let dom = f.dom();
    for v in vars {
        if !dom.contains(v) {
            return Err(crate::error::Error::Domain {
                msg: format!("{v} is not exported by the frame"),
            });
        }
    }
    let mut rest = f.subst.clone();
    for v in vars {
        rest.remove(v);
    }
    let restricted_view = Frame { restricted: f.restricted.clone(), subst: rest };
    // free names of the full frame stay available to recipes even when the
    // only binding mentioning them was removed
    let budget = budget.clone().with_public_names(f.public_names());
    let mut recipes = Vec::with_capacity(vars.len());
    for v in vars {
        let value = f.subst.get(v).unwrap().clone();
        match deduce(&restricted_view, &value, &budget, th)? {
            Some(r) => recipes.push(r),
            None => return Ok(None),
        }
    }
    Ok(Some(recipes))
}

/// Resolve against a configuration's frame.
pub fn resolve_config(
    vars: &[Var],
    c: &Configuration,
    th: &TheorySpec,
    budget: &RecipeBudget,
) -> Result<Option<Vec<Term>>> {
    resolve(vars, &frame_of(c), th, budget)
}

/// A payload pattern: a term over fresh pattern variables together with the
/// value each variable abstracts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Pattern {
    term: Term,
    bindings: Vec<(Var, Term)>,
}

/// Enumerate payload patterns for a ground term: at every subterm either
/// abstract it behind a variable or, budget permitting, expose the head
/// symbol and recurse. Subterms containing restricted names must end up
/// abstracted. Equal abstracted values share one variable.
fn patterns_for(
    value: &Term,
    restricted: &BTreeSet<Name>,
    depth: u32,
    used_vars: &BTreeSet<Var>,
) -> Vec<Pattern> {
    let mut raw = expand(value, restricted, depth);
    // assign canonical variables: equal values share a variable, in order of
    // first appearance
    let mut out = Vec::new();
    for skeleton in raw.drain(..) {
        let mut assignment: Vec<(Term, Var)> = Vec::new();
        let mut taken = used_vars.clone();
        let term = assign_vars(&skeleton, &mut assignment, &mut taken);
        out.push(Pattern {
            term,
            bindings: assignment.into_iter().map(|(val, var)| (var, val)).collect(),
        });
    }
    out.sort();
    out.dedup();
    out
}

/// Skeletons mark abstraction points with the value to abstract.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Skeleton {
    Abstract(Term),
    Node { sym: crate::terms::IStr, sort: Sort, args: Vec<Skeleton> },
    Leaf(Term),
}

fn expand(value: &Term, restricted: &BTreeSet<Name>, depth: u32) -> Vec<Skeleton> {
    let mut out = vec![Skeleton::Abstract(value.clone())];
    match value {
        Term::Name(n) => {
            if !restricted.contains(n) {
                out.push(Skeleton::Leaf(value.clone()));
            }
        }
        Term::Var(_) => {
            out.push(Skeleton::Leaf(value.clone()));
        }
        Term::App { sym, sort, args } => {
            if depth > 0 {
                let arg_options: Vec<Vec<Skeleton>> =
                    args.iter().map(|a| expand(a, restricted, depth - 1)).collect();
                let mut idx = vec![0usize; args.len()];
                if args.is_empty() {
                    out.push(Skeleton::Node {
                        sym: sym.clone(),
                        sort: sort.clone(),
                        args: Vec::new(),
                    });
                } else {
                    'tuples: loop {
                        let chosen: Vec<Skeleton> = idx
                            .iter()
                            .enumerate()
                            .map(|(k, &i)| arg_options[k][i].clone())
                            .collect();
                        out.push(Skeleton::Node {
                            sym: sym.clone(),
                            sort: sort.clone(),
                            args: chosen,
                        });
                        let mut k = 0;
                        loop {
                            if k == idx.len() {
                                break 'tuples;
                            }
                            idx[k] += 1;
                            if idx[k] < arg_options[k].len() {
                                break;
                            }
                            idx[k] = 0;
                            k += 1;
                        }
                    }
                }
            }
        }
    }
    out
}

fn assign_vars(
    sk: &Skeleton,
    assignment: &mut Vec<(Term, Var)>,
    taken: &mut BTreeSet<Var>,
) -> Term {
    match sk {
        Skeleton::Leaf(t) => t.clone(),
        Skeleton::Abstract(value) => {
            if let Some((_, v)) = assignment.iter().find(|(val, _)| val == value) {
                return Term::Var(v.clone());
            }
            let v = fresh_var("w", value.sort(), taken);
            taken.insert(v.clone());
            assignment.push((value.clone(), v.clone()));
            Term::Var(v)
        }
        Skeleton::Node { sym, sort, args } => Term::App {
            sym: sym.clone(),
            sort: sort.clone(),
            args: args.iter().map(|a| assign_vars(a, assignment, taken)).collect::<Vec<_>>().into(),
        },
    }
}

/// Refined labelled transitions: outputs expose payload structure, opening
/// only variables that are solvable in the target extended by the payload
/// binding. Inputs are as in the simple semantics.
pub fn labelled_steps_refined(
    c: &Configuration,
    th: &TheorySpec,
    recipes: &RecipeBudget,
) -> Result<Vec<TransitionResult>> {
    let chans = channel_recipes(c, th, recipes)?;
    let mut out = Vec::new();
    for (i, p) in c.procs.iter().enumerate() {
        let (chan, msg, body) = match p {
            Process::Out { chan, msg, body } => (chan, msg, body),
            _ => continue,
        };
        for (recipe, value) in &chans {
            if !eq_mod(value, chan, th)? {
                continue;
            }
            let payload = normalize(msg, th)?;
            let mut taken: BTreeSet<Var> = c.dom();
            for q in &c.procs {
                taken.extend(q.fv());
            }
            for pattern in patterns_for(&payload, &c.restricted, recipes.max_depth, &taken) {
                let continuation = flatten_into(c, i, vec![(**body).clone()]);
                let opened: Vec<Var> =
                    pattern.bindings.iter().map(|(v, _)| v.clone()).collect();
                // frame of the solvability check: target bindings plus a
                // handle for the full payload
                let mut check = continuation.frame.clone();
                for (v, val) in &pattern.bindings {
                    check.bind(v.clone(), val.clone())?;
                }
                let mut taken_z = taken.clone();
                taken_z.extend(opened.iter().cloned());
                let z = fresh_var("z", payload.sort(), &taken_z);
                check.bind(z, payload.clone())?;
                let check_frame =
                    Frame { restricted: continuation.restricted.clone(), subst: check };
                if !opened.is_empty()
                    && resolve(&opened, &check_frame, th, recipes)?.is_none()
                {
                    continue;
                }
                let mut target = continuation;
                for (v, val) in &pattern.bindings {
                    target.bind_frame(v.clone(), val.clone())?;
                }
                out.push(TransitionResult {
                    label: Label::OutRefined {
                        chan: recipe.clone(),
                        payload: pattern.term.clone(),
                        opened,
                    },
                    target,
                });
            }
        }
    }
    debug_assert!(out.iter().all(|t| label_side_conditions(&t.label, c)));
    Ok(out)
}
