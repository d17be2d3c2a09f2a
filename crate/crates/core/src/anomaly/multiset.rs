//! Ordered multiset of `f64` with O(log n) insertion and rank queries.
//!
//! A treap over an index arena; each node holds one value (duplicates are
//! separate nodes) and the size of its subtree. Priorities come from a fixed
//! xorshift sequence, so the shape of the tree is deterministic.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    value: f64,
    priority: u64,
    left: u32,
    right: u32,
    size: u32,
}

#[derive(Debug, Clone)]
pub struct OrderedMultiset {
    nodes: Vec<Node>,
    root: u32,
    prio_state: u64,
}

impl Default for OrderedMultiset {
    fn default() -> Self {
        Self::new()
    }
}

impl OrderedMultiset {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            root: NIL,
            prio_state: 0x2545_F491_4F6C_DD1D,
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut s = Self::new();
        s.nodes.reserve(n);
        s
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn next_priority(&mut self) -> u64 {
        let mut x = self.prio_state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.prio_state = x;
        x
    }

    fn size(&self, i: u32) -> u32 {
        if i == NIL {
            0
        } else {
            self.nodes[i as usize].size
        }
    }

    fn pull(&mut self, i: u32) {
        let (l, r) = {
            let n = &self.nodes[i as usize];
            (n.left, n.right)
        };
        self.nodes[i as usize].size = 1 + self.size(l) + self.size(r);
    }

    fn rotate_right(&mut self, i: u32) -> u32 {
        let l = self.nodes[i as usize].left;
        self.nodes[i as usize].left = self.nodes[l as usize].right;
        self.nodes[l as usize].right = i;
        self.pull(i);
        self.pull(l);
        l
    }

    fn rotate_left(&mut self, i: u32) -> u32 {
        let r = self.nodes[i as usize].right;
        self.nodes[i as usize].right = self.nodes[r as usize].left;
        self.nodes[r as usize].left = i;
        self.pull(i);
        self.pull(r);
        r
    }

    fn insert_at(&mut self, at: u32, new: u32) -> u32 {
        if at == NIL {
            return new;
        }
        let go_left = self.nodes[new as usize]
            .value
            .total_cmp(&self.nodes[at as usize].value)
            .is_lt();
        if go_left {
            let l = self.insert_at(self.nodes[at as usize].left, new);
            self.nodes[at as usize].left = l;
            self.pull(at);
            if self.nodes[l as usize].priority > self.nodes[at as usize].priority {
                return self.rotate_right(at);
            }
        } else {
            let r = self.insert_at(self.nodes[at as usize].right, new);
            self.nodes[at as usize].right = r;
            self.pull(at);
            if self.nodes[r as usize].priority > self.nodes[at as usize].priority {
                return self.rotate_left(at);
            }
        }
        at
    }

    pub fn insert(&mut self, value: f64) {
        assert!(self.nodes.len() < NIL as usize, "multiset full");
        let priority = self.next_priority();
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            value,
            priority,
            left: NIL,
            right: NIL,
            size: 1,
        });
        self.root = self.insert_at(self.root, idx);
    }

    /// The `k`-th smallest value (0-based).
    pub fn select(&self, mut k: usize) -> Option<f64> {
        if k >= self.len() {
            return None;
        }
        let mut at = self.root;
        loop {
            let n = &self.nodes[at as usize];
            let left = self.size(n.left) as usize;
            if k < left {
                at = n.left;
            } else if k == left {
                return Some(n.value);
            } else {
                k -= left + 1;
                at = n.right;
            }
        }
    }

    /// Values in ascending order.
    pub fn to_sorted_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut at = self.root;
        while at != NIL || !stack.is_empty() {
            while at != NIL {
                stack.push(at);
                at = self.nodes[at as usize].left;
            }
            let i = stack.pop().expect("stack nonempty");
            out.push(self.nodes[i as usize].value);
            at = self.nodes[i as usize].right;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn select_matches_sorted(values in prop::collection::vec(-1e6f64..1e6, 1..300)) {
            let mut ms = OrderedMultiset::new();
            for &v in &values {
                ms.insert(v);
            }
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert_eq!(ms.to_sorted_vec(), sorted.clone());
            for (k, v) in sorted.iter().enumerate() {
                prop_assert_eq!(ms.select(k), Some(*v));
            }
            prop_assert_eq!(ms.select(values.len()), None);
        }
    }

    #[test]
    fn duplicates_kept() {
        let mut ms = OrderedMultiset::new();
        for v in [3.0, 1.0, 3.0, 3.0, 2.0] {
            ms.insert(v);
        }
        assert_eq!(ms.to_sorted_vec(), vec![1.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn sorted_input_stays_shallow() {
        // Insertion of a monotone run must not degrade to a linked list.
        let mut ms = OrderedMultiset::new();
        for i in 0..100_000 {
            ms.insert(i as f64);
        }
        assert_eq!(ms.select(54_321), Some(54_321.0));
    }
}
