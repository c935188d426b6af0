//! Theory builders shared by unit tests across modules.

use crate::rewriting::TheorySpec;
use crate::terms::{FunSymbol, Signature, Sort, Term, Var};

/// The MAC system theory: pairs of (list, block), list operations, append,
/// the iterated keyed hash, and a free primitive `mac`.
pub(crate) fn mac_theory() -> TheorySpec {
    let data = Sort::new("Data");
    let block = Sort::new("Block");
    let list = Sort::new("BlockList");
    let mut sig = Signature::new();
    sig.add_sort(data.clone());
    sig.add_sort(block.clone());
    sig.add_sort(list.clone());
    sig.add_symbol(FunSymbol::new("pair", vec![list.clone(), block.clone()], data)).unwrap();
    sig.add_symbol(FunSymbol::new("fst", vec![Sort::new("Data")], list.clone())).unwrap();
    sig.add_symbol(FunSymbol::new("snd", vec![Sort::new("Data")], block.clone())).unwrap();
    sig.add_symbol(FunSymbol::new("nil", vec![], list.clone())).unwrap();
    sig.add_symbol(FunSymbol::new("cons", vec![block.clone(), list.clone()], list.clone()))
        .unwrap();
    sig.add_symbol(FunSymbol::new("hd", vec![list.clone()], block.clone())).unwrap();
    sig.add_symbol(FunSymbol::new("tl", vec![list.clone()], list.clone())).unwrap();
    sig.add_symbol(FunSymbol::new("append", vec![list.clone(), block.clone()], list.clone()))
        .unwrap();
    sig.add_symbol(FunSymbol::new("mac", vec![block.clone(), list.clone()], block.clone()))
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
        sg.app("h", vec![sg.app("f", vec![bv("x"), bv("y0")]).unwrap(), cons(bv("y1"), lv("z"))])
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
