//! Encodes a bracketed tree as path-annotated words and lists the word
//! groups that sit in a common proper subtree.

use lhip::treepath::{encode_tree, group_ranges, lca, parse_tree, path_text};

fn main() {
    let tree = parse_tree("(P (ADV ici) (SN (N madame) (NPR Plant)) (SP (P à) (NPR Delemont)))").expect("tree parses");
    let sentence = encode_tree(&tree).expect("tree encodes");
    for w in &sentence.words {
        println!("{:<10} {}", w.surface, path_text(&w.path));
    }
    println!("lca of all: {}", path_text(&lca(&sentence.words).expect("non-empty")));
    for (s, e) in group_ranges(&sentence.words) {
        let words: Vec<&str> = sentence.words[s..e].iter().map(|w| w.surface.as_str()).collect();
        println!("group [{s}, {e}): {}", words.join(" "));
    }
}
