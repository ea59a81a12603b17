//! Runs the whole pipeline on a corpus record and prints the JSON report.
//!
//! `cargo run --example extract -- data/corpus/synthetic.txt`

use lhip::pipeline::{load_corpus_file, parse_record, Pipeline};

fn main() {
    let records = match std::env::args().nth(1) {
        Some(path) => load_corpus_file(path.as_ref()).unwrap_or_else(|e| panic!("{e}")),
        None => vec![parse_record(include_str!("../data/corpus/mottaz.txt")).expect("record parses")],
    };
    let p = Pipeline::builtin();
    let report = p.extract(&records);
    for r in &report.records {
        let status = r.class.as_ref().map_or("-", |c| c.class.request_status());
        println!("{} {status} {:?}", r.id, r.matches);
    }
    println!("{}", serde_json::to_string_pretty(&report.records[0].frame).expect("serializes"));
    println!("{}", serde_json::to_string_pretty(&report.metrics).expect("serializes"));
}
