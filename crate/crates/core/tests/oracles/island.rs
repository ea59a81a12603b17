//! Deletion-subset oracle for threshold-free island parsing.
//!
//! A rule derives a set of token indices when the tokens at those indices,
//! read in order, derive the rule body as a plain context-free string, with
//! `:` requiring consecutive original indices. Every subset is checked, so
//! this is only usable on short inputs.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use lhip::grammar::{Grammar, RhsExpr};
use lhip::term::{Rational, Symbol, Term};

pub type Triple = ((usize, usize), Vec<usize>, String);

const WORDS: [&str; 2] = ["a", "b"];

/// Random grammar over `n0..n2`. Every rule body carries at least one
/// mandatory terminal, so nothing is nullable.
pub fn random_grammar(rng: &mut ChaCha8Rng) -> String {
    let n_rules = rng.gen_range(2..=5);
    let mut src = String::new();
    for k in 0..n_rules {
        let lhs = if k < 2 { k } else { rng.gen_range(0..3) };
        let threshold = match rng.gen_range(0..6) {
            0 => " #1.0",
            1 => " #0.5",
            2 => " #0.0",
            3 => " #0.75",
            _ => "",
        };
        let n_items = rng.gen_range(1..=3);
        let anchor = rng.gen_range(0..n_items);
        let head = rng.gen_range(0..=n_items);
        let mut items = Vec::new();
        for i in 0..n_items {
            let mut item = if i == anchor { term(rng) } else { item(rng, 0) };
            if i == head {
                item = format!("* {item}");
            }
            items.push(item);
        }
        src.push_str(&format!("n{lhs}(r{k}){threshold} ~~> {}.\n", items.join(", ")));
    }
    src
}

fn term(rng: &mut ChaCha8Rng) -> String {
    format!("@{}", WORDS[rng.gen_range(0..WORDS.len())])
}

fn atom_item(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.5) {
        term(rng)
    } else {
        format!("n{}(_)", rng.gen_range(0..2))
    }
}

fn item(rng: &mut ChaCha8Rng, depth: u32) -> String {
    match rng.gen_range(0..if depth > 0 { 1 } else { 5 }) {
        0 => atom_item(rng),
        1 => format!("(? {} ?)", atom_item(rng)),
        2 => format!("{} : {}", atom_item(rng), atom_item(rng)),
        3 => format!("({} ; {})", atom_item(rng), atom_item(rng)),
        _ => format!("({}, {})", atom_item(rng), item(rng, depth + 1)),
    }
}

pub fn random_input(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<&'static str> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect()
}

pub struct Oracle<'g> {
    g: &'g Grammar,
    words: Vec<Symbol>,
    memo: HashMap<(Symbol, Vec<usize>), Vec<usize>>,
}

impl<'g> Oracle<'g> {
    pub fn new(g: &'g Grammar, words: &[&str]) -> Self {
        Oracle { g, words: words.iter().map(|w| Symbol::intern(w)).collect(), memo: HashMap::new() }
    }

    /// Every (span, covered, term) a predicate yields at global threshold 0.
    pub fn triples(&mut self, pred: &str) -> BTreeSet<Triple> {
        let n = self.words.len();
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            for rule in self.rules_deriving(Symbol::intern(pred), &idx) {
                let r = &self.g.rules[rule];
                let span = (idx[0], idx[idx.len() - 1] + 1);
                out.insert((span, idx.clone(), r.lhs.to_string()));
            }
        }
        out
    }

    fn rules_deriving(&mut self, nt: Symbol, idx: &[usize]) -> Vec<usize> {
        let key = (nt, idx.to_vec());
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        // Nothing is nullable, so no derivation of this key can use the key
        // itself; the placeholder only cuts the search.
        self.memo.insert(key.clone(), Vec::new());
        let mut found = Vec::new();
        let g = self.g;
        for r in g.rules.iter().filter(|r| r.pred() == (nt, 1)) {
            let t = r.threshold.unwrap_or_else(|| Rational::from_integer(0));
            if !passes(idx, t) {
                continue;
            }
            if self.derives(&r.body, idx) {
                found.push(r.index);
            }
        }
        self.memo.insert(key, found.clone());
        found
    }

    fn derives(&mut self, e: &RhsExpr, idx: &[usize]) -> bool {
        match e {
            RhsExpr::Terminal { word, .. } => {
                idx.len() == 1 && *word == Term::Atom(self.words[idx[0]])
            }
            RhsExpr::Call(t) => {
                let (f, _) = t.functor().unwrap();
                !idx.is_empty() && !self.rules_deriving(f, idx).is_empty()
            }
            RhsExpr::Head(x) => self.derives(x, idx),
            RhsExpr::Optional(x) => idx.is_empty() || self.derives(x, idx),
            RhsExpr::Disjunction(l, r) => self.derives(l, idx) || self.derives(r, idx),
            RhsExpr::Adjacent(l, r) => (0..=idx.len()).any(|k| {
                let (a, b) = idx.split_at(k);
                let touching = a.is_empty() || b.is_empty() || a[a.len() - 1] + 1 == b[0];
                touching && self.derives(l, a) && self.derives(r, b)
            }),
            RhsExpr::Seq(items) => self.derives_seq(items, idx),
            other => panic!("oracle does not handle {other:?}"),
        }
    }

    fn derives_seq(&mut self, items: &[RhsExpr], idx: &[usize]) -> bool {
        match items.split_first() {
            None => idx.is_empty(),
            Some((first, rest)) => (0..=idx.len()).any(|k| {
                let (a, b) = idx.split_at(k);
                self.derives(first, a) && self.derives_seq(rest, b)
            }),
        }
    }
}

fn passes(idx: &[usize], t: Rational) -> bool {
    if idx.is_empty() {
        return true;
    }
    let span = idx[idx.len() - 1] + 1 - idx[0];
    Rational::new(idx.len() as i64, span as i64) >= t
}
