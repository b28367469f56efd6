//! Cooperation-path enumeration and incremental costing.
//!
//! Items are numbered densely: nodes first (`0..n_nodes`), then hyper-arcs.
//! Each path is stored as a row of bits over items, and each item keeps the
//! set of paths containing it, so cost updates touch only affected paths.

use fixedbitset::FixedBitSet;

/// Structure of `CP(G)`, shared between runtime instances of one graph.
#[derive(Debug, Clone)]
pub struct PathIndex {
    n_nodes: usize,
    n_items: usize,
    words_per_path: usize,
    rows: Vec<u64>,
    containing: Vec<FixedBitSet>,
}

/// Adjacency needed to enumerate paths: incoming hyper-arcs per node and
/// children per hyper-arc, all by dense index.
pub struct Topology<'a> {
    pub arcs_into: &'a [Vec<usize>],
    pub children: &'a [Vec<usize>],
    pub root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TooManyPaths(pub usize);

impl PathIndex {
    /// Enumerates every distinct way to reach the root: each reached node
    /// uses exactly one of its incoming hyper-arcs (the same one wherever the
    /// node is shared), together with the closure over that arc's children.
    pub fn enumerate(topo: &Topology<'_>, cap: usize) -> Result<PathIndex, TooManyPaths> {
        let n_nodes = topo.arcs_into.len();
        let n_items = n_nodes + topo.children.len();
        let words_per_path = n_items.div_ceil(64).max(1);
        let mut e = Enumerator {
            topo,
            n_nodes,
            words_per_path,
            rows: Vec::new(),
            count: 0,
            cap,
        };
        e.expand(vec![topo.root], vec![0u64; words_per_path])?;

        let rows = e.rows;
        let n_paths = e.count;
        let mut containing = vec![FixedBitSet::with_capacity(n_paths); n_items];
        for (p, row) in rows.chunks(words_per_path).enumerate() {
            for item in ones(row) {
                containing[item].insert(p);
            }
        }
        Ok(PathIndex {
            n_nodes,
            n_items,
            words_per_path,
            rows,
            containing,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.words_per_path
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Dense item indices of path `p`, ascending.
    pub fn members(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        ones(&self.rows[p * self.words_per_path..(p + 1) * self.words_per_path])
    }

    pub fn paths_with(&self, item: usize) -> &FixedBitSet {
        &self.containing[item]
    }
}

fn ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &bits)| {
        let mut b = bits;
        std::iter::from_fn(move || {
            if b == 0 {
                return None;
            }
            let t = b.trailing_zeros() as usize;
            b &= b - 1;
            Some(w * 64 + t)
        })
    })
}

struct Enumerator<'t, 'a> {
    topo: &'t Topology<'a>,
    n_nodes: usize,
    words_per_path: usize,
    rows: Vec<u64>,
    count: usize,
    cap: usize,
}

fn test_bit(bits: &[u64], i: usize) -> bool {
    bits[i / 64] & (1 << (i % 64)) != 0
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

impl Enumerator<'_, '_> {
    fn expand(&mut self, mut stack: Vec<usize>, mut bits: Vec<u64>) -> Result<(), TooManyPaths> {
        let node = loop {
            match stack.pop() {
                None => {
                    self.count += 1;
                    if self.count > self.cap {
                        return Err(TooManyPaths(self.cap));
                    }
                    debug_assert_eq!(bits.len(), self.words_per_path);
                    self.rows.extend_from_slice(&bits);
                    return Ok(());
                }
                Some(n) if test_bit(&bits, n) => continue,
                Some(n) => break n,
            }
        };
        set_bit(&mut bits, node);
        let incoming = &self.topo.arcs_into[node];
        if incoming.is_empty() {
            return self.expand(stack, bits);
        }
        let last = incoming.len() - 1;
        for (k, &arc) in incoming.iter().enumerate() {
            let (mut s, mut b) = if k == last {
                (std::mem::take(&mut stack), std::mem::take(&mut bits))
            } else {
                (stack.clone(), bits.clone())
            };
            set_bit(&mut b, self.n_nodes + arc);
            s.extend(self.topo.children[arc].iter().rev().copied());
            self.expand(s, b)?;
        }
        Ok(())
    }
}

/// Per-instance path costs. A path dies when it contains an item that can no
/// longer be completed; dead paths are ignored by minimum queries.
#[derive(Debug, Clone)]
pub struct PathCosts {
    costs: Vec<f64>,
    alive: FixedBitSet,
}

impl PathCosts {
    pub fn new(index: &PathIndex, weights: &[f64]) -> Self {
        let n = index.len();
        let costs = (0..n)
            .map(|p| index.members(p).map(|i| weights[i]).sum())
            .collect();
        let mut alive = FixedBitSet::with_capacity(n);
        alive.insert_range(..);
        PathCosts { costs, alive }
    }

    pub fn cost(&self, p: usize) -> f64 {
        self.costs[p]
    }

    pub fn is_alive(&self, p: usize) -> bool {
        self.alive.contains(p)
    }

    pub fn add(&mut self, index: &PathIndex, item: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        for p in index.paths_with(item).ones() {
            self.costs[p] += delta;
        }
    }

    pub fn kill(&mut self, index: &PathIndex, item: usize) {
        self.alive.difference_with(index.paths_with(item));
    }

    /// Minimum cost over live paths that contain `item`.
    pub fn min_with(&self, index: &PathIndex, item: usize) -> Option<f64> {
        index
            .paths_with(item)
            .intersection(&self.alive)
            .map(|p| self.costs[p])
            .min_by(f64::total_cmp)
    }

    /// Minimum cost over all live paths.
    pub fn min(&self) -> Option<f64> {
        self.alive.ones().map(|p| self.costs[p]).min_by(f64::total_cmp)
    }
}
