//! Ranked frame hypotheses for one utterance, with per-slot confidences.

use lhip::frame::{assemble_frames, structural_filter, to_full_frame, Discourse};
use lhip::pipeline::tokenize;
use lhip::treepath::PathSentence;

fn main() {
    let utterance = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "le numéro de téléphone de madame Plant rue des alpes numéro trois à Delemont".into());
    let d = Discourse::builtin();
    let toks = tokenize(&utterance);
    let sentence = PathSentence::flat(toks.tokens.iter().map(String::as_str));
    let hyps = structural_filter(assemble_frames(&d, &sentence).expect("frame/8 is defined"), &sentence);
    println!("{} hypotheses", hyps.len());
    for h in hyps.iter().take(3) {
        println!("weight {} covering {} tokens", h.weight, h.covered);
        for c in h.chunks.iter().filter(|c| !c.is_empty()) {
            println!("  {:<14} {:<24} {}", c.slot.as_str(), c.text(), c.confidence);
        }
    }
    if let Some(best) = hyps.first() {
        let frame = to_full_frame(best, &d.thesaurus);
        println!("{}", serde_json::to_string_pretty(&frame).expect("frame serializes"));
    }
}
