//! Grammar-writer feedback: rules that never fire and words no analysis covers.

use lhip::engine::EngineConfig;
use lhip::frame::Discourse;
use lhip::pipeline::{corpus_feedback, parse_corpus};

fn main() {
    let d = Discourse::builtin();
    let records = parse_corpus(include_str!("../data/corpus/synthetic.txt")).expect("corpus parses");
    let cfg = EngineConfig { max_analyses: Some(20_000), ..EngineConfig::for_grammar(&d.grammar) };
    let fb = corpus_feedback(&d.grammar, &d.thesaurus, &cfg, None, &records).expect("start symbol defined");
    println!("{} records, coverage {:.3}", fb.records, fb.coverage);
    println!("most frequent uncovered words:");
    for (w, n) in fb.uncovered_words.iter().take(10) {
        println!("  {n:>3} {w}");
    }
    let idle: Vec<String> = fb.rules.iter().filter(|r| r.successes == 0).map(|r| format!("{}#{}", r.pred, r.rule)).collect();
    println!("rules that never succeeded: {}", idle.join(", "));
}
