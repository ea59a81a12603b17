//! Random stratified ground-decidable programs and a naive forward-chaining
//! least-model computation.

use std::collections::BTreeSet;

use rand::Rng;

#[derive(Clone, Copy)]
enum Arg {
    Const(usize),
    Var(usize),
}

struct Atom {
    pred: usize,
    args: Vec<Arg>,
}

struct Rule {
    head: Atom,
    body: Vec<Atom>,
}

pub struct Program {
    arity: Vec<usize>,
    facts: Vec<(usize, Vec<usize>)>,
    rules: Vec<Rule>,
}

const PREDS: usize = 5;
const CONSTS: usize = 5;
const VARS: [&str; 3] = ["X", "Y", "Z"];

impl Program {
    pub fn generate(rng: &mut impl Rng) -> Self {
        let arity: Vec<usize> = (0..PREDS).map(|_| rng.gen_range(1..=2)).collect();
        let n_facts = rng.gen_range(1..=50);
        let facts = (0..n_facts)
            .map(|_| {
                // facts only for the lower strata so rules have something to join
                let p = rng.gen_range(0..3);
                (p, (0..arity[p]).map(|_| rng.gen_range(0..CONSTS)).collect())
            })
            .collect();
        let n_rules = rng.gen_range(0..=10);
        let mut rules = Vec::new();
        for _ in 0..n_rules {
            let head_pred = rng.gen_range(1..PREDS);
            let body_len = rng.gen_range(1..=2);
            let body: Vec<Atom> = (0..body_len)
                .map(|_| {
                    let p = rng.gen_range(0..head_pred);
                    let args = (0..arity[p])
                        .map(|_| {
                            if rng.gen_bool(0.8) {
                                Arg::Var(rng.gen_range(0..VARS.len()))
                            } else {
                                Arg::Const(rng.gen_range(0..CONSTS))
                            }
                        })
                        .collect();
                    Atom { pred: p, args }
                })
                .collect();
            let body_vars: Vec<usize> = body
                .iter()
                .flat_map(|a| a.args.iter())
                .filter_map(|a| match a {
                    Arg::Var(v) => Some(*v),
                    Arg::Const(_) => None,
                })
                .collect();
            let head_args = (0..arity[head_pred])
                .map(|_| {
                    if body_vars.is_empty() || rng.gen_bool(0.15) {
                        Arg::Const(rng.gen_range(0..CONSTS))
                    } else {
                        Arg::Var(body_vars[rng.gen_range(0..body_vars.len())])
                    }
                })
                .collect();
            rules.push(Rule { head: Atom { pred: head_pred, args: head_args }, body });
        }
        Program { arity, facts, rules }
    }

    pub fn source(&self, name: &str) -> String {
        let mut s = format!("theory {name}.\n");
        for (p, args) in &self.facts {
            let args: Vec<String> = args.iter().map(|c| format!("c{c}")).collect();
            s.push_str(&format!("p{p}({}).\n", args.join(", ")));
        }
        for r in &self.rules {
            let body: Vec<String> = r.body.iter().map(atom_text).collect();
            s.push_str(&format!("{} :- {}.\n", atom_text(&r.head), body.join(", ")));
        }
        s
    }

    pub fn goal(&self, pred: usize) -> String {
        let args: Vec<&str> = VARS[..self.arity[pred]].to_vec();
        format!("p{pred}({})", args.join(","))
    }

    pub fn preds(&self) -> usize {
        PREDS
    }

    /// Ground atoms of `pred` in the least model, as `p1(c0,c3)`.
    pub fn model(&self, pred: usize) -> BTreeSet<String> {
        let mut known: BTreeSet<(usize, Vec<usize>)> = self.facts.iter().cloned().collect();
        loop {
            let mut new = Vec::new();
            for r in &self.rules {
                let mut envs: Vec<[Option<usize>; 3]> = vec![[None; 3]];
                for b in &r.body {
                    let mut next = Vec::new();
                    for env in &envs {
                        for (p, args) in &known {
                            if *p != b.pred {
                                continue;
                            }
                            if let Some(e) = matches(&b.args, args, *env) {
                                next.push(e);
                            }
                        }
                    }
                    envs = next;
                }
                for env in envs {
                    let args = r
                        .head
                        .args
                        .iter()
                        .map(|a| match a {
                            Arg::Const(c) => *c,
                            Arg::Var(v) => env[*v].expect("range restricted"),
                        })
                        .collect();
                    let f = (r.head.pred, args);
                    if !known.contains(&f) {
                        new.push(f);
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            known.extend(new);
        }
        known
            .into_iter()
            .filter(|(p, _)| *p == pred)
            .map(|(p, args)| {
                let args: Vec<String> = args.iter().map(|c| format!("c{c}")).collect();
                format!("p{p}({})", args.join(","))
            })
            .collect()
    }
}

fn matches(pattern: &[Arg], fact: &[usize], mut env: [Option<usize>; 3]) -> Option<[Option<usize>; 3]> {
    for (a, &c) in pattern.iter().zip(fact) {
        match a {
            Arg::Const(k) if *k != c => return None,
            Arg::Const(_) => {}
            Arg::Var(v) => match env[*v] {
                Some(bound) if bound != c => return None,
                Some(_) => {}
                None => env[*v] = Some(c),
            },
        }
    }
    Some(env)
}

fn atom_text(a: &Atom) -> String {
    let args: Vec<String> = a
        .args
        .iter()
        .map(|x| match x {
            Arg::Const(c) => format!("c{c}"),
            Arg::Var(v) => VARS[*v].to_owned(),
        })
        .collect();
    format!("p{}({})", a.pred, args.join(", "))
}
