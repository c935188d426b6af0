//! Bounded labelled-bisimilarity checking, goal-directed trace search, and
//! the MAC-expansion translation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::config::{frame_of, Configuration};
use crate::error::{Error, Result};
use crate::process::{ExtendedProcess, Process};
use crate::rewriting::{eq_mod, normalize, TheorySpec};
use crate::semantics::{
    internal_steps_tagged, labelled_steps_given, InternalKind, Label, LabelCandidates,
    TransitionResult,
};
use crate::statics::{
    enum_recipes_joint, static_equiv_with_recipes, EquivVerdict, RecipeBudget,
};
use crate::terms::{Name, Sort, Term, Var};

/// Bounds for the bisimulation game: attacker recipes, internal steps on
/// either side of a matched move, and replication unfoldings per path.
#[derive(Debug, Clone)]
pub struct BisimConfig {
    pub recipe_budget: RecipeBudget,
    pub max_trace_depth: u32,
    pub max_repl_unfold: u32,
}

impl BisimConfig {
    pub fn new(recipe_budget: RecipeBudget, max_trace_depth: u32, max_repl_unfold: u32) -> Self {
        BisimConfig { recipe_budget, max_trace_depth, max_repl_unfold }
    }
}

impl Default for BisimConfig {
    fn default() -> Self {
        BisimConfig { recipe_budget: RecipeBudget::depth(2), max_trace_depth: 6, max_repl_unfold: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BisimFailure {
    BarbMismatch { chan: Term },
    StaticInequiv { test: (Term, Term) },
    NoMatchingMove { label: Label },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BisimVerdict {
    NotBisimilar { trace: Vec<Label>, reason: BisimFailure },
    BisimilarUpToBounds { relation_size: usize },
}

impl BisimVerdict {
    pub fn is_bisimilar(&self) -> bool {
        matches!(self, BisimVerdict::BisimilarUpToBounds { .. })
    }
}

/// Resolve ground conditionals at the top of the process multiset. The
/// resolution step is deterministic and interacts with nothing else, so
/// states differing only in unresolved conditionals are weakly equivalent.
fn resolve_conditionals(c: &Configuration, th: &TheorySpec) -> Result<Configuration> {
    let mut out = c.clone();
    loop {
        let ix = out
            .procs
            .iter()
            .position(|p| matches!(p, Process::If { .. }));
        let Some(i) = ix else { return Ok(out) };
        let Process::If { lhs, rhs, then_p, else_p } = out.procs[i].clone() else {
            unreachable!()
        };
        let branch = if eq_mod(&lhs, &rhs, th)? { then_p } else { else_p };
        let mut used = out.used_names();
        let mut procs = Vec::new();
        for (k, p) in out.procs.iter().enumerate() {
            if k == i {
                crate::config::flatten_process(
                    (*branch).clone(),
                    &mut out.restricted,
                    &mut used,
                    &mut procs,
                );
            } else {
                procs.push(p.clone());
            }
        }
        out.procs = procs;
    }
}

/// Normalize all terms of a configuration, prune unused restrictions, and
/// sort the process multiset, yielding a stable comparison form.
fn canonical_config(c: &Configuration, th: &TheorySpec) -> Result<Configuration> {
    fn canon_proc(p: &Process, th: &TheorySpec) -> Result<Process> {
        Ok(match p {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::par(canon_proc(a, th)?, canon_proc(b, th)?),
            Process::Repl(q) => Process::repl(canon_proc(q, th)?),
            Process::ResName(n, q) => Process::res(n.clone(), canon_proc(q, th)?),
            Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
                normalize(lhs, th)?,
                normalize(rhs, th)?,
                canon_proc(then_p, th)?,
                canon_proc(else_p, th)?,
            ),
            Process::In { chan, var, body } => Process::In {
                chan: normalize(chan, th)?,
                var: var.clone(),
                body: Box::new(canon_proc(body, th)?),
            },
            Process::Out { chan, msg, body } => Process::output(
                normalize(chan, th)?,
                normalize(msg, th)?,
                canon_proc(body, th)?,
            ),
        })
    }
    let mut out = c.clone();
    let frame: Vec<(Var, Term)> = out
        .frame
        .iter()
        .map(|(v, t)| Ok((v.clone(), normalize(t, th)?)))
        .collect::<Result<_>>()?;
    out.frame = frame.into_iter().collect();
    out.procs = c.procs.iter().map(|p| canon_proc(p, th)).collect::<Result<_>>()?;
    out.procs.sort();
    let used: BTreeSet<Name> = out
        .frame
        .iter()
        .flat_map(|(_, t)| t.fn_())
        .chain(out.procs.iter().flat_map(|p| p.fn_()))
        .collect();
    out.restricted = out.restricted.intersection(&used).cloned().collect();
    Ok(out)
}

/// Memoization key: canonical form printed with restricted names replaced by
/// their order of first appearance.
fn canonical_key(c: &Configuration, th: &TheorySpec) -> Result<String> {
    let canon = canonical_config(c, th)?;
    let mut printed = String::new();
    for (v, t) in canon.frame.iter() {
        printed.push_str(&format!("{t}/{v};"));
    }
    for p in &canon.procs {
        printed.push_str(&format!("{p};"));
    }
    // rename restricted names by first appearance in the print
    let mut order: Vec<&Name> = canon.restricted.iter().collect();
    order.sort_by_key(|n| {
        let token = n.to_string();
        printed.find(&token).unwrap_or(usize::MAX)
    });
    let mut key = printed;
    for (i, n) in order.iter().enumerate() {
        key = key.replace(&n.to_string(), &format!("%r{i}"));
    }
    Ok(key)
}

/// One side's state in the game: the configuration and the replication
/// unfoldings spent reaching it.
#[derive(Debug, Clone)]
struct SideState {
    cfg: Configuration,
    unfolds: u32,
}

struct SideGraph {
    states: Vec<SideState>,
    by_key: std::collections::HashMap<String, usize>,
    /// tau successors per state
    tau: BTreeMap<usize, Vec<usize>>,
    /// weak tau closure per state
    closure: BTreeMap<usize, Vec<usize>>,
    /// labelled successors per (state, candidate-set id)
    labelled_cache: BTreeMap<(usize, u64), Vec<(Label, usize)>>,
    /// weak matcher answers per (state, candidate-set id): for each label,
    /// the states reachable by tau* label tau*
    weak_answer_cache: BTreeMap<(usize, u64), BTreeMap<Label, Vec<usize>>>,
}

impl SideGraph {
    fn new() -> Self {
        SideGraph {
            states: Vec::new(),
            by_key: std::collections::HashMap::new(),
            tau: BTreeMap::new(),
            closure: BTreeMap::new(),
            labelled_cache: BTreeMap::new(),
            weak_answer_cache: BTreeMap::new(),
        }
    }

    /// Deterministic conditional resolution is absorbed into the stored
    /// state: weak moves are computed from the resolved form, so states
    /// differing only in pending conditionals share one node and one move
    /// set.
    fn intern(&mut self, st: SideState, th: &TheorySpec) -> Result<usize> {
        let resolved = canonical_config(&resolve_conditionals(&st.cfg, th)?, th)?;
        let key = format!("{}#{}", canonical_key(&resolved, th)?, st.unfolds);
        if let Some(&i) = self.by_key.get(&key) {
            return Ok(i);
        }
        let i = self.states.len();
        self.states.push(SideState { cfg: resolved, unfolds: st.unfolds });
        self.by_key.insert(key, i);
        Ok(i)
    }

    fn tau_succs(&mut self, i: usize, cfg: &BisimConfig, th: &TheorySpec) -> Result<Vec<usize>> {
        if let Some(v) = self.tau.get(&i) {
            return Ok(v.clone());
        }
        let state = self.states[i].clone();
        let mut out = Vec::new();
        for (kind, succ) in internal_steps_tagged(&state.cfg, th)? {
            let unfolds = match kind {
                InternalKind::Unfold => {
                    if state.unfolds >= cfg.max_repl_unfold {
                        continue; // truncated rather than erroring
                    }
                    state.unfolds + 1
                }
                _ => state.unfolds,
            };
            out.push(self.intern(SideState { cfg: succ, unfolds }, th)?);
        }
        self.tau.insert(i, out.clone());
        Ok(out)
    }

    /// States reachable by at most `max_trace_depth` internal steps.
    fn weak_closure(&mut self, i: usize, cfg: &BisimConfig, th: &TheorySpec) -> Result<Vec<usize>> {
        if let Some(v) = self.closure.get(&i) {
            return Ok(v.clone());
        }
        let mut seen = BTreeSet::from([i]);
        let mut order = vec![i];
        let mut frontier = vec![i];
        for _ in 0..cfg.max_trace_depth {
            let mut next = Vec::new();
            for s in frontier {
                for t in self.tau_succs(s, cfg, th)? {
                    if seen.insert(t) {
                        order.push(t);
                        next.push(t);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        self.closure.insert(i, order.clone());
        Ok(order)
    }

    fn labelled(
        &mut self,
        i: usize,
        cands_id: u64,
        cands: &LabelCandidates,
        th: &TheorySpec,
    ) -> Result<Vec<(Label, usize)>> {
        if let Some(v) = self.labelled_cache.get(&(i, cands_id)) {
            return Ok(v.clone());
        }
        let state = self.states[i].clone();
        let steps = labelled_steps_given(&state.cfg, th, cands)?;
        let mut out = Vec::new();
        for TransitionResult { label, target } in steps {
            let j = self.intern(SideState { cfg: target, unfolds: state.unfolds }, th)?;
            out.push((label, j));
        }
        self.labelled_cache.insert((i, cands_id), out.clone());
        Ok(out)
    }

    /// For each label, the states reachable by tau* label tau* from `i`.
    fn weak_answers(
        &mut self,
        i: usize,
        cands_id: u64,
        cands: &LabelCandidates,
        cfg: &BisimConfig,
        th: &TheorySpec,
    ) -> Result<BTreeMap<Label, Vec<usize>>> {
        if let Some(v) = self.weak_answer_cache.get(&(i, cands_id)) {
            return Ok(v.clone());
        }
        let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for mid in self.weak_closure(i, cfg, th)? {
            for (label, next) in self.labelled(mid, cands_id, cands, th)? {
                for fin in self.weak_closure(next, cfg, th)? {
                    by_label.entry(label.clone()).or_default().push(fin);
                }
            }
        }
        for v in by_label.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        self.weak_answer_cache.insert((i, cands_id), by_label.clone());
        Ok(by_label)
    }
}

#[derive(Debug, Clone)]
enum FailInfo {
    Immediate(BisimFailure),
    ViaMove { label: Label, candidates: Vec<usize> },
}

struct PairNode {
    a: usize,
    b: usize,
    /// moves: label (tau or visible) on one side, with candidate pairs that
    /// would match it
    moves: Vec<(Label, Vec<usize>)>,
    fail: Option<FailInfo>,
    path: Vec<Label>,
}

fn pair_frame_key(a: &Configuration, b: &Configuration, th: &TheorySpec) -> Result<String> {
    let mut key = CandidateCache::frame_key(a, th)?;
    key.push_str("||");
    key.push_str(&CandidateCache::frame_key(b, th)?);
    Ok(key)
}

const MAX_PAIRS: usize = 200_000;
const MAX_SIDE_STATES: usize = 300_000;

/// Bounded weak-bisimilarity check between two closed configurations with
/// equal domains, exploring the reachable product space.
pub fn bisim(
    a: &Configuration,
    b: &Configuration,
    cfg: &BisimConfig,
    th: &TheorySpec,
) -> Result<BisimVerdict> {
    if a.dom() != b.dom() {
        return Err(Error::precondition(
            "bisimulation requires equal frame domains".to_string(),
        ));
    }
    let mut ga = SideGraph::new();
    let mut gb = SideGraph::new();
    let a0 = ga.intern(SideState { cfg: a.clone(), unfolds: 0 }, th)?;
    let b0 = gb.intern(SideState { cfg: b.clone(), unfolds: 0 }, th)?;

    let mut pairs: Vec<PairNode> = Vec::new();
    let mut pair_ix: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut equiv_cache: BTreeMap<String, Option<(Term, Term)>> = BTreeMap::new();
    let mut cand_cache: BTreeMap<String, (u64, LabelCandidates)> = BTreeMap::new();

    let intern_pair = |pairs: &mut Vec<PairNode>,
                       pair_ix: &mut BTreeMap<(usize, usize), usize>,
                       queue: &mut VecDeque<usize>,
                       a: usize,
                       b: usize,
                       path: Vec<Label>|
     -> Result<usize> {
        if let Some(&i) = pair_ix.get(&(a, b)) {
            return Ok(i);
        }
        if pairs.len() >= MAX_PAIRS {
            return Err(Error::BoundExceeded { what: "bisimulation pair count".to_string() });
        }
        let i = pairs.len();
        pairs.push(PairNode { a, b, moves: Vec::new(), fail: None, path });
        pair_ix.insert((a, b), i);
        queue.push_back(i);
        Ok(i)
    };

    intern_pair(&mut pairs, &mut pair_ix, &mut queue, a0, b0, Vec::new())?;

    while let Some(p) = queue.pop_front() {
        if ga.states.len() + gb.states.len() > MAX_SIDE_STATES {
            return Err(Error::BoundExceeded { what: "bisimulation state count".to_string() });
        }
        let (ia, ib) = (pairs[p].a, pairs[p].b);
        let path = pairs[p].path.clone();

        // clause 1: static equivalence of the frames. The joint enumeration
        // doubles as the label candidate pool; both are cached per frame
        // pair.
        let fkey = pair_frame_key(&ga.states[ia].cfg, &gb.states[ib].cfg, th)?;
        let (distinguishing, cands_id, cands) = match equiv_cache.get(&fkey) {
            Some(v) => {
                let (id, c) = cand_cache.get(&fkey).expect("caches filled together");
                (v.clone(), *id, c.clone())
            }
            None => {
                let fa = frame_of(&ga.states[ia].cfg);
                let fb = frame_of(&gb.states[ib].cfg);
                let (verdict, recipes) =
                    static_equiv_with_recipes(&fa, &fb, &cfg.recipe_budget, th)?;
                let v = match verdict {
                    EquivVerdict::EquivalentUpToBudget { .. } => None,
                    EquivVerdict::Distinguished { test } => Some(test),
                    // domains only grow in lockstep on matched labels
                    EquivVerdict::DomainMismatch { .. } => Some((
                        Term::Var(Var::new("domain", Sort::channel())),
                        Term::Var(Var::new("domain", Sort::channel())),
                    )),
                };
                equiv_cache.insert(fkey.clone(), v.clone());
                let mut chan_budget = cfg.recipe_budget.clone();
                chan_budget.max_depth = chan_budget.max_depth.min(2);
                let chans = enum_recipes_joint(&fa, &fb, &Sort::channel(), &chan_budget, th)?;
                let c = LabelCandidates { chans, msgs: recipes };
                let id = cand_cache.len() as u64;
                cand_cache.insert(fkey, (id, c.clone()));
                (v, id, c)
            }
        };
        if let Some(test) = distinguishing {
            pairs[p].fail = Some(FailInfo::Immediate(BisimFailure::StaticInequiv { test }));
            continue;
        }

        let mut moves: Vec<(Label, Vec<(usize, usize)>)> = Vec::new();
        let mut failure: Option<FailInfo> = None;

        // side A moves matched by B, then side B moves matched by A
        for swap in [false, true] {
            let (gs, gt, is, it) = if swap {
                (&mut gb, &mut ga, ib, ia)
            } else {
                (&mut ga, &mut gb, ia, ib)
            };
            // internal moves
            for s_next in gs.tau_succs(is, cfg, th)? {
                let mut cand = Vec::new();
                for t_next in gt.weak_closure(it, cfg, th)? {
                    cand.push(pack_pair(swap, s_next, t_next));
                }
                moves.push((Label::Tau, cand));
            }
            // labelled moves against the matcher's cached weak answers
            let s_steps = gs.labelled(is, cands_id, &cands, th)?;
            let t_by_label = if s_steps.is_empty() {
                BTreeMap::new()
            } else {
                gt.weak_answers(it, cands_id, &cands, cfg, th)?
            };
            if failure.is_none() {
                for (label, s_next) in &s_steps {
                    let mut cand: Vec<(usize, usize)> = t_by_label
                        .get(label)
                        .map(|fins| {
                            fins.iter().map(|&t_fin| pack_pair(swap, *s_next, t_fin)).collect()
                        })
                        .unwrap_or_default();
                    if cand.is_empty() {
                        let reason = match label {
                            Label::OutVar { chan, .. } => {
                                BisimFailure::BarbMismatch { chan: chan.clone() }
                            }
                            other => BisimFailure::NoMatchingMove { label: other.clone() },
                        };
                        failure = Some(FailInfo::Immediate(reason));
                        // record the unmatched label on the path for the trace
                        let mut fail_path = path.clone();
                        fail_path.push(label.clone());
                        pairs[p].path = path.clone();
                        pairs[p].fail = Some(FailInfo::Immediate(match failure.clone().unwrap() {
                            FailInfo::Immediate(r) => r,
                            _ => unreachable!(),
                        }));
                        pairs[p].moves = Vec::new();
                        // stash the label so trace extraction can append it
                        pairs[p].moves.push((label.clone(), Vec::new()));
                        break;
                    }
                    cand.sort();
                    cand.dedup();
                    moves.push((label.clone(), cand));
                }
            }
            if failure.is_some() {
                break;
            }
        }
        if pairs[p].fail.is_some() {
            continue;
        }

        // intern candidate pairs
        let mut resolved_moves: Vec<(Label, Vec<usize>)> = Vec::new();
        for (label, cand) in moves {
            let mut ixs = Vec::new();
            for &(pa, pb) in cand.iter() {
                let mut next_path = path.clone();
                next_path.push(label.clone());
                let ix = intern_pair(&mut pairs, &mut pair_ix, &mut queue, pa, pb, next_path)?;
                ixs.push(ix);
            }
            ixs.sort_unstable();
            ixs.dedup();
            resolved_moves.push((label, ixs));
        }
        pairs[p].moves = resolved_moves;
    }

    // refinement: a pair fails when some move has only failed candidates
    let mut failed: BTreeSet<usize> = pairs
        .iter()
        .enumerate()
        .filter(|(_, n)| n.fail.is_some())
        .map(|(i, _)| i)
        .collect();
    loop {
        let mut changed = false;
        for i in 0..pairs.len() {
            if failed.contains(&i) {
                continue;
            }
            for (label, cand) in &pairs[i].moves {
                if !cand.is_empty() && cand.iter().all(|c| failed.contains(c)) {
                    failed.insert(i);
                    pairs[i].fail = Some(FailInfo::ViaMove {
                        label: label.clone(),
                        candidates: cand.clone(),
                    });
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }

    if std::env::var("APICALC_BISIM_STATS").is_ok() {
        eprintln!(
            "bisim stats: pairs={} a_states={} b_states={} equiv_cache={} failed={}",
            pairs.len(),
            ga.states.len(),
            gb.states.len(),
            equiv_cache.len(),
            failed.len()
        );
        for k in equiv_cache.keys().take(40) {
            eprintln!("  key: {k}");
        }
    }
    if !failed.contains(&0) {
        return Ok(BisimVerdict::BisimilarUpToBounds { relation_size: pairs.len() - failed.len() });
    }

    // failure depth: how long a best defence survives. Immediate failures
    // have depth 0; a killing move's depth is one plus the depth of the
    // defender's longest-lived answer.
    let mut depth: BTreeMap<usize, u32> = pairs
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n.fail, Some(FailInfo::Immediate(_))))
        .map(|(i, _)| (i, 0))
        .collect();
    loop {
        let mut changed = false;
        for (i, node) in pairs.iter().enumerate() {
            if depth.contains_key(&i) {
                continue;
            }
            if let Some(FailInfo::ViaMove { candidates, .. }) = &node.fail {
                if let Some(d) =
                    candidates.iter().map(|c| depth.get(c).copied()).collect::<Option<Vec<_>>>()
                {
                    depth.insert(i, 1 + d.into_iter().max().unwrap_or(0));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // extract the failing trace by following killing moves against the
    // longest-lived defender answers
    let mut trace: Vec<Label> = Vec::new();
    let mut cur = 0usize;
    let reason = loop {
        match pairs[cur].fail.clone().expect("failed pair has fail info") {
            FailInfo::Immediate(r) => {
                if let Some((label, cand)) = pairs[cur].moves.first() {
                    if cand.is_empty() && matches!(r, BisimFailure::BarbMismatch { .. } | BisimFailure::NoMatchingMove { .. }) {
                        if !matches!(label, Label::Tau) {
                            trace.push(label.clone());
                        }
                    }
                }
                break r;
            }
            FailInfo::ViaMove { label, candidates } => {
                if !matches!(label, Label::Tau) {
                    trace.push(label.clone());
                }
                let next = candidates
                    .iter()
                    .filter(|c| depth.contains_key(c))
                    .max_by_key(|c| depth[c])
                    .or_else(|| candidates.first())
                    .copied()
                    .expect("killing move has candidates");
                if trace.len() > pairs.len() {
                    // cyclically-failed pairs: stop with the pending move
                    break BisimFailure::NoMatchingMove { label: label.clone() };
                }
                cur = next;
            }
        }
    };
    Ok(BisimVerdict::NotBisimilar { trace, reason })
}

fn pack_pair(swap: bool, s: usize, t: usize) -> (usize, usize) {
    if swap {
        (t, s)
    } else {
        (s, t)
    }
}

/// Replace `mac(k, M)` with `f(k, h(k, M))` throughout, requiring that the
/// key appears only as the first argument of `mac`.
pub fn mac_translate(c: &ExtendedProcess, k: &Name, th: &TheorySpec) -> Result<ExtendedProcess> {
    let sig = &th.signature;
    for name in ["mac", "f", "h"] {
        if sig.symbol(name).is_none() {
            return Err(Error::precondition(format!(
                "mac translation needs the symbol {name} in the signature"
            )));
        }
    }
    tr_extended(c, k, th)
}

fn tr_term(t: &Term, k: &Name, th: &TheorySpec) -> Result<Term> {
    match t {
        Term::Name(n) => {
            if n == k {
                Err(Error::precondition(format!(
                    "key {k} occurs outside the first argument of mac"
                )))
            } else {
                Ok(t.clone())
            }
        }
        Term::Var(_) => Ok(t.clone()),
        Term::App { sym, args, .. } => {
            if &**sym == "mac" && args.len() == 2 && args[0] == Term::Name(k.clone()) {
                let inner = tr_term(&args[1], k, th)?;
                let hashed = th.signature.app("h", vec![args[0].clone(), inner])?;
                th.signature.app("f", vec![args[0].clone(), hashed])
            } else {
                let args = args.iter().map(|a| tr_term(a, k, th)).collect::<Result<_>>()?;
                th.signature.app(sym, args)
            }
        }
    }
}

fn tr_process(p: &Process, k: &Name, th: &TheorySpec) -> Result<Process> {
    Ok(match p {
        Process::Nil => Process::Nil,
        Process::Par(a, b) => Process::par(tr_process(a, k, th)?, tr_process(b, k, th)?),
        Process::Repl(q) => Process::repl(tr_process(q, k, th)?),
        Process::ResName(n, q) => {
            if n == k {
                // shadowed: the inner k is a different name
                Process::res(n.clone(), (**q).clone())
            } else {
                Process::res(n.clone(), tr_process(q, k, th)?)
            }
        }
        Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
            tr_term(lhs, k, th)?,
            tr_term(rhs, k, th)?,
            tr_process(then_p, k, th)?,
            tr_process(else_p, k, th)?,
        ),
        Process::In { chan, var, body } => Process::In {
            chan: tr_term(chan, k, th)?,
            var: var.clone(),
            body: Box::new(tr_process(body, k, th)?),
        },
        Process::Out { chan, msg, body } => Process::output(
            tr_term(chan, k, th)?,
            tr_term(msg, k, th)?,
            tr_process(body, k, th)?,
        ),
    })
}

fn tr_extended(a: &ExtendedProcess, k: &Name, th: &TheorySpec) -> Result<ExtendedProcess> {
    Ok(match a {
        ExtendedProcess::Plain(p) => ExtendedProcess::Plain(tr_process(p, k, th)?),
        ExtendedProcess::Par(x, y) => {
            ExtendedProcess::par(tr_extended(x, k, th)?, tr_extended(y, k, th)?)
        }
        ExtendedProcess::ResName(n, q) => {
            if n == k {
                a.clone()
            } else {
                ExtendedProcess::res(n.clone(), tr_extended(q, k, th)?)
            }
        }
        ExtendedProcess::ResVar(v, q) => ExtendedProcess::res_var(v.clone(), tr_extended(q, k, th)?),
        ExtendedProcess::Active(v, t) => ExtendedProcess::Active(v.clone(), tr_term(t, k, th)?),
    })
}

/// Goal of a trace search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TracePredicate {
    /// Reach an output on the named channel.
    OutputOn(Name),
    /// Reach an output on `out_chan` whose payload differs, modulo the
    /// theory, from every value previously input on `in_chan`.
    Forged { out_chan: Name, in_chan: Name },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub label: Label,
    pub target: Configuration,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn labels(&self) -> Vec<&Label> {
        self.steps.iter().map(|s| &s.label).collect()
    }
}

/// Cache of label candidates keyed by the frame's normalized print and the
/// input sorts present. States reached by inputs and conditionals share
/// their frame, so enumeration is reused across them.
#[derive(Default)]
struct CandidateCache {
    map: BTreeMap<String, LabelCandidates>,
}

impl CandidateCache {
    fn frame_key(c: &Configuration, th: &TheorySpec) -> Result<String> {
        let f = frame_of(c);
        let mut printed = String::new();
        for (v, t) in f.subst.iter() {
            printed.push_str(&format!("{}/{v};", normalize(t, th)?));
        }
        // restricted names renamed by first appearance, so alpha-variant
        // frames share their key
        let mut order: Vec<&Name> = f.restricted.iter().collect();
        order.sort_by_key(|n| {
            printed.find(&n.to_string()).unwrap_or(usize::MAX)
        });
        let mut key = printed;
        for (i, n) in order.iter().enumerate() {
            key = key.replace(&n.to_string(), &format!("%n{i}"));
        }
        let mut sorts: BTreeSet<&Sort> = BTreeSet::new();
        for p in &c.procs {
            if let Process::In { var, .. } = p {
                sorts.insert(&var.sort);
            }
        }
        for s in sorts {
            key.push_str(&format!("?{s}"));
        }
        Ok(key)
    }

    fn for_config(
        &mut self,
        c: &Configuration,
        th: &TheorySpec,
        budget: &RecipeBudget,
    ) -> Result<LabelCandidates> {
        let key = Self::frame_key(c, th)?;
        if let Some(cands) = self.map.get(&key) {
            return Ok(cands.clone());
        }
        let cands = LabelCandidates::for_config(c, th, budget)?;
        self.map.insert(key, cands.clone());
        Ok(cands)
    }
}

#[derive(Clone)]
struct SearchNode {
    cfg: Configuration,
    unfolds: u32,
    inputs_seen: Vec<Term>,
    steps: Vec<TraceStep>,
}

/// Breadth-first search for the shortest trace satisfying the goal, using
/// internal steps and simple labelled transitions within the given bounds.
/// `None` means exhaustion of the bounded space.
pub fn trace_search(
    a: &Configuration,
    goal: &TracePredicate,
    cfg: &BisimConfig,
    th: &TheorySpec,
) -> Result<Option<Trace>> {
    let mut queue = VecDeque::new();
    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut cache = CandidateCache::default();
    queue.push_back(SearchNode {
        cfg: a.clone(),
        unfolds: 0,
        inputs_seen: Vec::new(),
        steps: Vec::new(),
    });
    while let Some(node) = queue.pop_front() {
        let mut key = format!("{}#{}", canonical_key(&node.cfg, th)?, node.unfolds);
        if let TracePredicate::Forged { .. } = goal {
            let mut hist: Vec<String> = node.inputs_seen.iter().map(|t| t.to_string()).collect();
            hist.sort();
            key.push_str(&hist.join(","));
        }
        if !visited.insert(key) {
            continue;
        }
        if node.steps.len() as u32 >= cfg.max_trace_depth {
            continue;
        }

        // internal moves
        for (kind, succ) in internal_steps_tagged(&node.cfg, th)? {
            let unfolds = match kind {
                InternalKind::Unfold => {
                    if node.unfolds >= cfg.max_repl_unfold {
                        continue;
                    }
                    node.unfolds + 1
                }
                _ => node.unfolds,
            };
            let mut steps = node.steps.clone();
            steps.push(TraceStep { label: Label::Tau, target: succ.clone() });
            queue.push_back(SearchNode {
                cfg: succ,
                unfolds,
                inputs_seen: node.inputs_seen.clone(),
                steps,
            });
        }

        // labelled moves
        let cands = cache.for_config(&node.cfg, th, &cfg.recipe_budget)?;
        for TransitionResult { label, target } in
            labelled_steps_given(&node.cfg, th, &cands)?
        {
            let mut inputs_seen = node.inputs_seen.clone();
            match (&label, goal) {
                (Label::In { chan, msg }, TracePredicate::Forged { in_chan, .. }) => {
                    let chan_val =
                        normalize(&crate::terms::apply_subst(chan, &frame_of(&node.cfg).subst)?, th)?;
                    if chan_val == Term::Name(in_chan.clone()) {
                        let val = normalize(
                            &crate::terms::apply_subst(msg, &frame_of(&node.cfg).subst)?,
                            th,
                        )?;
                        inputs_seen.push(val);
                    }
                }
                _ => {}
            }
            let mut steps = node.steps.clone();
            steps.push(TraceStep { label: label.clone(), target: target.clone() });
            // goal test on output events
            if let Label::OutVar { chan, fresh } = &label {
                let chan_val =
                    normalize(&crate::terms::apply_subst(chan, &frame_of(&node.cfg).subst)?, th)?;
                let payload = target.frame.get(fresh).cloned();
                let hits = match goal {
                    TracePredicate::OutputOn(c) => chan_val == Term::Name(c.clone()),
                    TracePredicate::Forged { out_chan, in_chan: _ } => {
                        if chan_val == Term::Name(out_chan.clone()) {
                            let payload = normalize(&payload.unwrap(), th)?;
                            let mut differs = true;
                            for seen in &inputs_seen {
                                if eq_mod(&payload, seen, th)? {
                                    differs = false;
                                    break;
                                }
                            }
                            differs
                        } else {
                            false
                        }
                    }
                };
                if hits {
                    return Ok(Some(Trace { steps }));
                }
            }
            queue.push_back(SearchNode {
                cfg: target,
                unfolds: node.unfolds,
                inputs_seen,
                steps,
            });
        }
    }
    Ok(None)
}

/// Replay a reported trace on a configuration: every label must be enabled
/// in order, with internal steps taken as given. Returns the final
/// configuration reached.
pub fn replay_trace(
    a: &Configuration,
    labels: &[Label],
    cfg: &BisimConfig,
    th: &TheorySpec,
) -> Result<Option<Configuration>> {
    // weak replay: internal steps are absorbed around each visible label
    let weak_close = |frontier: &[(Configuration, u32)],
                      th: &TheorySpec|
     -> Result<Vec<(Configuration, u32)>> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut out: Vec<(Configuration, u32)> = Vec::new();
        let mut work: Vec<(Configuration, u32)> = frontier.to_vec();
        let mut steps = 0;
        while let Some((c, unfolds)) = work.pop() {
            let key = format!("{}#{unfolds}", canonical_key(&c, th)?);
            if !seen.insert(key) {
                continue;
            }
            out.push((c.clone(), unfolds));
            if steps >= cfg.max_trace_depth as usize * 64 {
                continue;
            }
            steps += 1;
            for (kind, succ) in internal_steps_tagged(&c, th)? {
                let u = match kind {
                    InternalKind::Unfold => {
                        if unfolds >= cfg.max_repl_unfold {
                            continue;
                        }
                        unfolds + 1
                    }
                    _ => unfolds,
                };
                work.push((succ, u));
            }
        }
        Ok(out)
    };
    let mut frontier: Vec<(Configuration, u32)> = vec![(a.clone(), 0)];
    for label in labels {
        frontier = weak_close(&frontier, th)?;
        let mut next = Vec::new();
        for (c, unfolds) in &frontier {
            match label {
                Label::Tau => {
                    // taus were already absorbed by the closure
                    next.push((c.clone(), *unfolds));
                }
                visible => {
                    let cands = LabelCandidates::for_config(c, th, &cfg.recipe_budget)?;
                    for TransitionResult { label: l, target } in
                        labelled_steps_given(c, th, &cands)?
                    {
                        if &l == visible {
                            next.push((target, *unfolds));
                        }
                    }
                }
            }
        }
        if next.is_empty() {
            return Ok(None);
        }
        frontier = next;
    }
    Ok(frontier.into_iter().next().map(|(c, _)| c))
}
