//! Theory composition: defaults under `isa`, derived values under union.

use lhip::syntax::parse_term;
use lhip::theory::{compose, demo_values, env_from, parse_theories, TheoryExpr, DEFAULT_BUDGET};

fn main() {
    let mut all = Vec::new();
    for src in [
        include_str!("../data/theories/kb.theory"),
        include_str!("../data/theories/rules.theory"),
        include_str!("../data/theories/query_defaults.theory"),
        "theory query.\nphone_type(mobile).\n",
    ] {
        all.extend(parse_theories(src).expect("theory parses"));
    }
    let env = env_from(all);

    for (expr, goal) in [
        ("query isa query_defaults", "phone_type(X)"),
        ("query isa query_defaults", "identification(X)"),
        ("query ∪ rules ∪ kb", "locality(X)"),
        ("query ∪ rules ∪ kb", "loc_type(X)"),
        ("(query isa query_defaults) ∪ rules ∪ kb", "loc_type(X)"),
    ] {
        let e = TheoryExpr::parse(expr).expect("expression parses");
        let g = parse_term(goal).expect("goal parses");
        let vals: Vec<String> =
            demo_values(&e, &g, &env, DEFAULT_BUDGET).expect("within budget").iter().map(ToString::to_string).collect();
        println!("{expr:<42} {goal:<18} {vals:?}");
    }

    let composed = compose(&TheoryExpr::parse("query isa query_defaults").unwrap(), &env).unwrap();
    print!("{composed}");
}
