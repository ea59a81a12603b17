//! Parses a grammar file and prints its diagnostics.
//!
//! `cargo run --example validate_grammar -- path/to/grammar.lhip`

use lhip::grammar::{parse_grammar, validate};

fn main() {
    let src = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}")),
        None => lhip::frame::DISCOURSE_GRAMMAR.to_owned(),
    };
    match parse_grammar(&src) {
        Ok(g) => {
            let diags = validate(&g);
            println!("{} rules, start symbols {:?}", g.rules.len(), g.start.iter().map(lhip::grammar::pred_name).collect::<Vec<_>>());
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("no diagnostics");
            }
        }
        Err(e) => {
            for d in &e.0 {
                println!("{d}");
            }
            std::process::exit(1);
        }
    }
}
