//! Island analyses of a conjoined sentence at two coverage thresholds.

use std::collections::BTreeSet;

use lhip::engine::{maximal_coverage, tokens, EngineConfig, Parser};
use lhip::grammar::parse_grammar;
use lhip::term::{Rational, Symbol};

fn main() {
    let grammar = parse_grammar(include_str!("../data/john_saw.lhip")).expect("grammar parses");
    let input = tokens("john saw mary and mark saw them");
    let start = (Symbol::intern("s"), 1);

    for t in [0, 1] {
        let cfg = EngineConfig::default().with_threshold(Rational::from_integer(t));
        let out = Parser::new(&grammar).with_config(cfg).parse(start, &input).expect("s/1 is defined");
        let texts: BTreeSet<String> = out.analyses.iter().map(|a| a.covered_text(&input)).collect();
        println!("T={t}: {} analyses, {} distinct covered texts", out.analyses.len(), texts.len());
        for text in &texts {
            println!("  {text}");
        }
        if let Some(best) = maximal_coverage(&out.analyses).first() {
            println!("  widest: {}", best.term);
        }
        println!("  steps: {}", out.stats().steps);
    }
}
