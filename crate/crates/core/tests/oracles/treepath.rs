//! Random bracketed trees with an explicit parent-pointer arena, used to check
//! path-based lca and grouping against direct tree walks.

use rand::Rng;

const LABELS: [&str; 5] = ["P", "SN", "N", "ADV", "SV"];

pub struct RandomTree {
    /// Bracketed source, `(P (N w0) ...)`.
    pub text: String,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    /// Preorder number of each internal node, from 1.
    pub preorder: Vec<u32>,
    /// Arena index of the internal node directly above each leaf.
    leaf_parent: Vec<usize>,
}

impl RandomTree {
    pub fn generate(rng: &mut impl Rng, max_leaves: usize) -> Self {
        let leaves = rng.gen_range(1..=max_leaves);
        let mut t = RandomTree {
            text: String::new(),
            parent: Vec::new(),
            depth: Vec::new(),
            preorder: Vec::new(),
            leaf_parent: Vec::new(),
        };
        let mut next_word = 0;
        let mut next_id = 1;
        t.node(rng, None, leaves, &mut next_word, &mut next_id);
        t
    }

    fn node(&mut self, rng: &mut impl Rng, parent: Option<usize>, leaves: usize, word: &mut usize, id: &mut u32) {
        let me = self.parent.len();
        self.parent.push(parent);
        self.depth.push(parent.map_or(0, |p| self.depth[p] + 1));
        self.preorder.push(*id);
        *id += 1;
        let label = LABELS[rng.gen_range(0..LABELS.len())];
        self.text.push_str(&format!("({label}"));
        let mut parts = Vec::new();
        if leaves == 1 {
            if rng.gen_bool(0.6) {
                parts.push(0);
            } else {
                parts.push(1);
            }
        } else if rng.gen_bool(0.2) {
            parts.push(leaves);
        } else {
            let k = rng.gen_range(2..=leaves.min(3));
            let mut left = leaves;
            for i in 0..k {
                let remaining = k - i - 1;
                let take = if remaining == 0 { left } else { rng.gen_range(1..=left - remaining) };
                parts.push(take);
                left -= take;
            }
        }
        for n in parts {
            self.text.push(' ');
            if n == 0 {
                self.text.push_str(&format!("w{word}"));
                *word += 1;
                self.leaf_parent.push(me);
            } else {
                self.node(rng, Some(me), n, word, id);
            }
        }
        self.text.push(')');
    }

    pub fn leaves(&self) -> usize {
        self.leaf_parent.len()
    }

    fn lca_pair(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("deeper node has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("deeper node has a parent");
        }
        while a != b {
            a = self.parent[a].expect("not the root");
            b = self.parent[b].expect("not the root");
        }
        a
    }

    /// Arena index of the least common ancestor of leaves `lo..hi`, counting a
    /// leaf's own position as its preterminal.
    pub fn lca(&self, lo: usize, hi: usize) -> usize {
        let mut acc = self.leaf_parent[lo];
        for &p in &self.leaf_parent[lo + 1..hi] {
            acc = self.lca_pair(acc, p);
        }
        acc
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    /// Contiguous runs of at least two leaves whose lca is deeper than the
    /// lca of all leaves, longest first then leftmost.
    pub fn groups(&self) -> Vec<(usize, usize)> {
        let n = self.leaves();
        let whole = self.depth[self.lca(0, n)];
        let mut out = Vec::new();
        for len in (2..=n).rev() {
            for lo in 0..=n - len {
                if self.depth[self.lca(lo, lo + len)] > whole {
                    out.push((lo, lo + len));
                }
            }
        }
        out
    }
}
