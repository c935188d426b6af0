//! Random generators and independent oracles for the property suites.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use apicalc_core::process::{ExtendedProcess, Process};
use apicalc_core::rewriting::TheorySpec;
use apicalc_core::statics::{test_holds, RecipeBudget};
use apicalc_core::terms::{apply_subst, match_term};
use apicalc_core::{normalize, Configuration, Frame, Model, Name, Sort, Substitution, Term, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn block() -> Sort {
    Sort::new("Block")
}

fn list() -> Sort {
    Sort::new("BlockList")
}

fn data() -> Sort {
    Sort::new("Data")
}

/// Ground term of the given sort over the MAC signature.
fn mac_term_of(rng: &mut ChaCha8Rng, th: &TheorySpec, sort: &Sort, depth: u32) -> Term {
    let sg = &th.signature;
    if sort == &block() {
        if depth == 0 || rng.gen_bool(0.3) {
            let base = ["m", "n", "k"][rng.gen_range(0..3)];
            return Term::Name(Name::new(base, block()));
        }
        match rng.gen_range(0..4) {
            0 => sg
                .app(
                    "f",
                    vec![
                        mac_term_of(rng, th, &block(), depth - 1),
                        mac_term_of(rng, th, &block(), depth - 1),
                    ],
                )
                .unwrap(),
            1 => sg
                .app(
                    "h",
                    vec![
                        mac_term_of(rng, th, &block(), depth - 1),
                        mac_term_of(rng, th, &list(), depth - 1),
                    ],
                )
                .unwrap(),
            2 => sg.app("hd", vec![mac_term_of(rng, th, &list(), depth - 1)]).unwrap(),
            _ => sg.app("snd", vec![mac_term_of(rng, th, &data(), depth - 1)]).unwrap(),
        }
    } else if sort == &list() {
        if depth == 0 || rng.gen_bool(0.3) {
            return sg.app("nil", vec![]).unwrap();
        }
        match rng.gen_range(0..4) {
            0 => sg
                .app(
                    "cons",
                    vec![
                        mac_term_of(rng, th, &block(), depth - 1),
                        mac_term_of(rng, th, &list(), depth - 1),
                    ],
                )
                .unwrap(),
            1 => sg
                .app(
                    "append",
                    vec![
                        mac_term_of(rng, th, &list(), depth - 1),
                        mac_term_of(rng, th, &block(), depth - 1),
                    ],
                )
                .unwrap(),
            2 => sg.app("tl", vec![mac_term_of(rng, th, &list(), depth - 1)]).unwrap(),
            _ => sg.app("fst", vec![mac_term_of(rng, th, &data(), depth - 1)]).unwrap(),
        }
    } else {
        sg.app(
            "pair",
            vec![
                mac_term_of(rng, th, &list(), depth.saturating_sub(1)),
                mac_term_of(rng, th, &block(), depth.saturating_sub(1)),
            ],
        )
        .unwrap()
    }
}

pub fn random_mac_term(rng: &mut ChaCha8Rng, th: &TheorySpec, depth: u32) -> Term {
    let sort = [block(), list(), data()][rng.gen_range(0..3)].clone();
    mac_term_of(rng, th, &sort, depth)
}

/// As `random_mac_term` but leaves in some variables.
pub fn random_mac_term_with_vars(rng: &mut ChaCha8Rng, th: &TheorySpec, depth: u32) -> Term {
    let t = random_mac_term(rng, th, depth);
    sprinkle_vars(rng, &t)
}

fn sprinkle_vars(rng: &mut ChaCha8Rng, t: &Term) -> Term {
    match t {
        Term::Name(n) if rng.gen_bool(0.25) => {
            Term::Var(Var::new(format!("v{}", rng.gen_range(0..3)), n.sort.clone()))
        }
        Term::App { sym, sort, args } => Term::App {
            sym: sym.clone(),
            sort: sort.clone(),
            args: args.iter().map(|a| sprinkle_vars(rng, a)).collect::<Vec<_>>().into(),
        },
        other => other.clone(),
    }
}

pub fn random_dh_term(rng: &mut ChaCha8Rng, th: &TheorySpec, depth: u32) -> Term {
    let sg = &th.signature;
    if depth == 0 || rng.gen_bool(0.3) {
        let base = ["n0", "n1", "s"][rng.gen_range(0..3)];
        return Term::Name(Name::new(base, data()));
    }
    if rng.gen_bool(0.5) {
        sg.app("g", vec![random_dh_term(rng, th, depth - 1)]).unwrap()
    } else {
        sg.app(
            "f",
            vec![random_dh_term(rng, th, depth - 1), random_dh_term(rng, th, depth - 1)],
        )
        .unwrap()
    }
}

fn redexes(t: &Term, th: &TheorySpec) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    fn walk(t: &Term, th: &TheorySpec, here: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
        if let Term::App { args, .. } = t {
            for (ri, rule) in th.rules().iter().enumerate() {
                if match_term(&rule.lhs, t).is_some() {
                    out.push((here.clone(), ri));
                }
            }
            for (i, a) in args.iter().enumerate() {
                here.push(i);
                walk(a, th, here, out);
                here.pop();
            }
        }
    }
    walk(t, th, &mut Vec::new(), &mut out);
    out
}

fn subterm_at(t: &Term, pos: &[usize]) -> Term {
    let mut cur = t.clone();
    for &i in pos {
        match cur {
            Term::App { ref args, .. } => cur = args[i].clone(),
            _ => unreachable!(),
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
        _ => unreachable!(),
    }
}

/// One rewrite step at a randomly chosen redex, if any.
pub fn random_rewrite_step(rng: &mut ChaCha8Rng, t: &Term, th: &TheorySpec) -> Option<Term> {
    let rs = redexes(t, th);
    if rs.is_empty() {
        return None;
    }
    let (pos, ri) = rs[rng.gen_range(0..rs.len())].clone();
    let rule = &th.rules()[ri];
    let sub = subterm_at(t, &pos);
    let binding = match_term(&rule.lhs, &sub).expect("redex matches");
    Some(replace_at(t, &pos, &binding.apply_simultaneous(&rule.rhs)))
}

/// Normalize by random redex choices; an independent route to the normal
/// form used as the confluence oracle.
pub fn random_normalize(rng: &mut ChaCha8Rng, t: &Term, th: &TheorySpec) -> Term {
    let mut cur = t.clone();
    for _ in 0..100_000 {
        match random_rewrite_step(rng, &cur, th) {
            Some(next) => cur = next,
            None => return cur,
        }
    }
    panic!("random normalization did not terminate for {t}");
}

/// Put the two terms into one randomly chosen single-symbol context.
pub fn wrap_in_context(
    rng: &mut ChaCha8Rng,
    th: &TheorySpec,
    a: &Term,
    b: &Term,
) -> (Term, Term) {
    let sg = &th.signature;
    let candidates: Vec<_> = sg
        .symbols()
        .filter(|s| s.arg_sorts.iter().any(|x| x == a.sort()))
        .cloned()
        .collect();
    if candidates.is_empty() {
        return (a.clone(), b.clone());
    }
    let sym = &candidates[rng.gen_range(0..candidates.len())];
    let hole = sym.arg_sorts.iter().position(|x| x == a.sort()).unwrap();
    let mut args_a = Vec::new();
    let mut args_b = Vec::new();
    for (i, s) in sym.arg_sorts.iter().enumerate() {
        if i == hole {
            args_a.push(a.clone());
            args_b.push(b.clone());
        } else {
            let filler = mac_term_of(rng, th, s, 1);
            args_a.push(filler.clone());
            args_b.push(filler);
        }
    }
    (sg.app(&sym.name, args_a).unwrap(), sg.app(&sym.name, args_b).unwrap())
}

/// Ground substitution covering the free variables of a term.
pub fn random_ground_subst(rng: &mut ChaCha8Rng, th: &TheorySpec, t: &Term) -> Substitution {
    let mut s = Substitution::new();
    for v in t.fv() {
        let g = mac_term_of(rng, th, &v.sort, 2);
        s.bind(v, g).unwrap();
    }
    s
}

/// Random closed extended process over the pairs signature: restricted
/// names, exported bindings, and plain outputs referring to the exports.
pub fn random_extended_process(rng: &mut ChaCha8Rng, th: &TheorySpec) -> ExtendedProcess {
    let sg = &th.signature;
    let a = Term::Name(Name::new("a", Sort::channel()));
    let k = Name::new("k", data());
    let s = Name::new("s", data());
    let ground = |rng: &mut ChaCha8Rng| -> Term {
        match rng.gen_range(0..4) {
            0 => Term::Name(k.clone()),
            1 => Term::Name(s.clone()),
            2 => Term::Name(Name::new("m", data())),
            _ => sg
                .app("pair", vec![Term::Name(k.clone()), Term::Name(s.clone())])
                .unwrap(),
        }
    };
    let n_bindings = rng.gen_range(0..3usize);
    let mut parts: Vec<ExtendedProcess> = Vec::new();
    let mut dom: Vec<Var> = Vec::new();
    for i in 0..n_bindings {
        let v = Var::new(format!("x{i}"), data());
        // later bindings may reference earlier exports
        let value = if !dom.is_empty() && rng.gen_bool(0.3) {
            let w = dom[rng.gen_range(0..dom.len())].clone();
            sg.app("fst", vec![Term::Var(w)]).unwrap()
        } else {
            ground(rng)
        };
        parts.push(ExtendedProcess::Active(v.clone(), value));
        dom.push(v);
    }
    let n_procs = rng.gen_range(0..3usize);
    for _ in 0..n_procs {
        let msg = if !dom.is_empty() && rng.gen_bool(0.5) {
            Term::Var(dom[rng.gen_range(0..dom.len())].clone())
        } else {
            ground(rng)
        };
        parts.push(ExtendedProcess::Plain(Process::output(a.clone(), msg, Process::Nil)));
    }
    let mut body = parts
        .into_iter()
        .reduce(ExtendedProcess::par)
        .unwrap_or(ExtendedProcess::Plain(Process::Nil));
    if rng.gen_bool(0.8) {
        body = ExtendedProcess::res(k.clone(), body);
    }
    if rng.gen_bool(0.5) {
        body = ExtendedProcess::res(s.clone(), body);
    }
    body
}

/// Stable print of a configuration: values normalized, processes sorted,
/// restricted names renamed by first appearance. Independent of the
/// library's own canonicalization.
pub fn canonical_print(c: &Configuration, th: &TheorySpec) -> String {
    let mut bindings: Vec<String> = Vec::new();
    for (v, t) in c.frame.iter() {
        bindings.push(format!("{}/{v}", normalize(t, th).unwrap()));
    }
    bindings.sort();
    let mut procs: Vec<String> = c.procs.iter().map(|p| format!("{p}")).collect();
    procs.sort();
    let mut printed = format!("{};{}", bindings.join(","), procs.join(","));
    let mut order: Vec<&Name> = c.restricted.iter().collect();
    order.sort_by_key(|n| printed.find(&n.to_string()).unwrap_or(usize::MAX));
    for (i, n) in order.iter().enumerate() {
        printed = printed.replace(&n.to_string(), &format!("~{i}"));
    }
    printed
}

/// Random frame with domain {x, y} over the pairs signature.
pub fn random_small_frame(rng: &mut ChaCha8Rng, th: &TheorySpec) -> Frame {
    let sg = &th.signature;
    let k = Name::new("k", data());
    let s = Name::new("s", data());
    let m = Name::new("m", data());
    let pool: Vec<Term> = vec![
        Term::Name(k.clone()),
        Term::Name(s.clone()),
        Term::Name(m.clone()),
        sg.app("pair", vec![Term::Name(k.clone()), Term::Name(s.clone())]).unwrap(),
        sg.app("pair", vec![Term::Name(m.clone()), Term::Name(k.clone())]).unwrap(),
        sg.app("pair", vec![Term::Name(k.clone()), Term::Name(k.clone())]).unwrap(),
        sg.app("fst", vec![Term::Name(k.clone())]).unwrap(),
    ];
    let mut subst = Substitution::new();
    for v in ["x", "y"] {
        let t = pool[rng.gen_range(0..pool.len())].clone();
        subst.bind(Var::new(v, data()), t).unwrap();
    }
    let mut restricted = BTreeSet::new();
    if rng.gen_bool(0.9) {
        restricted.insert(k);
    }
    if rng.gen_bool(0.5) {
        restricted.insert(s);
    }
    Frame { restricted, subst }
}

/// Naive oracle: is there any pair of recipes up to the depth, enumerated
/// without deduplication, that separates the frames?
pub fn brute_force_distinguishable(
    f1: &Frame,
    f2: &Frame,
    depth: u32,
    budget: &RecipeBudget,
    th: &TheorySpec,
) -> bool {
    let sg = &th.signature;
    let mut atoms: Vec<Term> = Vec::new();
    for v in f1.dom() {
        atoms.push(Term::Var(v));
    }
    let mut publics: BTreeSet<Name> = budget.public_names.clone();
    publics.extend(f1.public_names());
    publics.extend(f2.public_names());
    for n in publics {
        atoms.push(Term::Name(n));
    }
    for sym in sg.symbols().filter(|s| s.arity() == 0) {
        atoms.push(sg.app(&sym.name, vec![]).unwrap());
    }

    let value = |r: &Term, f: &Frame| -> Term {
        normalize(&apply_subst(r, &f.subst).unwrap(), th).unwrap()
    };

    // extraction closure, mirroring the budget semantics
    let mut base = atoms.clone();
    loop {
        let mut added: Vec<Term> = Vec::new();
        for sym in sg.symbols().filter(|s| s.arity() >= 1) {
            let choices: Vec<Vec<&Term>> = sym
                .arg_sorts
                .iter()
                .map(|s| base.iter().filter(|t| t.sort() == s).collect())
                .collect();
            if choices.iter().any(|c| c.is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; sym.arity()];
            'tuples: loop {
                let args: Vec<Term> =
                    idx.iter().enumerate().map(|(k, &i)| choices[k][i].clone()).collect();
                let recipe = sg.app(&sym.name, args.clone()).unwrap();
                let extracts = [f1, f2].iter().all(|f| {
                    let v = value(&recipe, f);
                    args.iter().any(|arg| {
                        let av = value(arg, f);
                        av != v && av.subterms().iter().any(|s| *s == &v)
                    })
                });
                if extracts && !base.contains(&recipe) && !added.contains(&recipe) {
                    added.push(recipe);
                }
                let mut k = 0;
                loop {
                    if k == idx.len() {
                        break 'tuples;
                    }
                    idx[k] += 1;
                    if idx[k] < choices[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        if added.is_empty() || base.len() > 128 {
            break;
        }
        base.extend(added);
    }

    // synthesis layers without deduplication
    let mut all = base.clone();
    let mut frontier = base;
    for _ in 0..depth {
        let mut next = Vec::new();
        for sym in sg.symbols().filter(|s| s.arity() >= 1) {
            let choices: Vec<Vec<&Term>> = sym
                .arg_sorts
                .iter()
                .map(|s| all.iter().filter(|t| t.sort() == s).collect())
                .collect();
            if choices.iter().any(|c| c.is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; sym.arity()];
            'tuples: loop {
                let args: Vec<&Term> =
                    idx.iter().enumerate().map(|(k, &i)| choices[k][i]).collect();
                if args.iter().any(|a| frontier.contains(a)) {
                    let recipe =
                        sg.app(&sym.name, args.into_iter().cloned().collect()).unwrap();
                    next.push(recipe);
                }
                let mut k = 0;
                loop {
                    if k == idx.len() {
                        break 'tuples;
                    }
                    idx[k] += 1;
                    if idx[k] < choices[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        all.extend(next.clone());
        frontier = next;
    }

    // all pairs of same-sorted recipes, no dedup
    let mut sorted: BTreeMap<&Sort, Vec<&Term>> = BTreeMap::new();
    for r in &all {
        sorted.entry(r.sort()).or_default().push(r);
    }
    for group in sorted.values() {
        for m in group {
            for n in group {
                let in1 = test_holds(m, n, f1, th).unwrap();
                let in2 = test_holds(m, n, f2, th).unwrap();
                if in1 != in2 {
                    return true;
                }
            }
        }
    }
    false
}

/// Small pool of closed processes over the smoke-test signature.
pub fn process_pool(model: &Model) -> Vec<Configuration> {
    let th = &model.theory;
    let sg = &th.signature;
    let a = Term::Name(model.free_names["a"].clone());
    let b = Term::Name(model.free_names["b"].clone());
    let m = Term::Name(model.free_names["m"].clone());
    let s = Name::new("s", data());
    let hm = sg.app("h", vec![m.clone()]).unwrap();
    let hs = sg.app("h", vec![Term::Name(s.clone())]).unwrap();
    let x = Var::new("x", data());
    let raw: Vec<Process> = vec![
        Process::Nil,
        Process::output(a.clone(), m.clone(), Process::Nil),
        Process::output(b.clone(), m.clone(), Process::Nil),
        Process::output(a.clone(), hm.clone(), Process::Nil),
        Process::res(s.clone(), Process::output(a.clone(), Term::Name(s.clone()), Process::Nil)),
        Process::res(s.clone(), Process::output(a.clone(), hs.clone(), Process::Nil)),
        Process::output(a.clone(), m.clone(), Process::output(b.clone(), m.clone(), Process::Nil)),
        Process::output(a.clone(), m.clone(), Process::output(a.clone(), m.clone(), Process::Nil)),
        Process::input(a.clone(), x.clone(), Process::output(b.clone(), Term::Var(x.clone()), Process::Nil)),
        Process::input(a.clone(), x.clone(), Process::Nil),
        Process::par(
            Process::output(a.clone(), m.clone(), Process::Nil),
            Process::output(b.clone(), m.clone(), Process::Nil),
        ),
        Process::if_then_else(m.clone(), hm.clone(), Process::output(a.clone(), m.clone(), Process::Nil), Process::Nil),
    ];
    raw.into_iter()
        .map(|p| apicalc_core::to_config(&ExtendedProcess::Plain(p)).unwrap())
        .collect()
}

pub fn pick(rng: &mut ChaCha8Rng, pool: &[Configuration]) -> Configuration {
    pool[rng.gen_range(0..pool.len())].clone()
}
