//! Symmetric, loop-free binary adjacency stored as packed bit rows.
//!
//! Rows are `u64` words so that common-neighbour counts (the transitivity
//! delta in the simulator hot loop) reduce to a popcount over `n / 64` words.

use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    degree: Vec<u32>,
    ties: usize,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self {
            n,
            words,
            bits: vec![0; n * words],
            degree: vec![0; n],
            ties: 0,
        }
    }

    /// Builds a network from undirected pairs. Duplicate pairs and self-loops
    /// are ignored here; validation belongs to the loader.
    pub fn from_edges<I>(n: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = Self::empty(n);
        for (i, j) in edges {
            if i != j && !adj.has_tie(i, j) {
                adj.add_tie(i, j);
            }
        }
        adj
    }

    #[inline]
    pub fn n_actors(&self) -> usize {
        self.n
    }

    /// Number of undirected ties.
    #[inline]
    pub fn tie_count(&self) -> usize {
        self.ties
    }

    #[inline]
    pub fn degree(&self, i: usize) -> u32 {
        self.degree[i]
    }

    #[inline]
    pub fn has_tie(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    /// Adds the undirected tie `i -- j`. Returns `false` if it already existed.
    pub fn add_tie(&mut self, i: usize, j: usize) -> bool {
        assert!(i != j, "self-loop {i}");
        if self.has_tie(i, j) {
            return false;
        }
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
        self.degree[i] += 1;
        self.degree[j] += 1;
        self.ties += 1;
        true
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Number of actors tied to both `i` and `j`.
    #[inline]
    pub fn common_neighbors(&self, i: usize, j: usize) -> u32 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Neighbours of `i` in increasing order.
    pub fn neighbors(&self, i: usize) -> Neighbors<'_> {
        Neighbors {
            row: self.row(i),
            word: 0,
            current: self.row(i)[0],
        }
    }

    /// Actors `j != i` not yet tied to `i`, in increasing order.
    pub fn non_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| j != i && !self.has_tie(i, j))
    }

    /// Undirected ties as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// True when every tie of `self` is also present in `later`.
    pub fn is_subset_of(&self, later: &Adjacency) -> bool {
        self.n == later.n && self.bits.iter().zip(&later.bits).all(|(a, b)| a & !b == 0)
    }

    /// Ties of `later` absent from `self`, counted once per pair.
    pub fn ties_added_by(&self, later: &Adjacency) -> usize {
        let directed: u32 = self
            .bits
            .iter()
            .zip(&later.bits)
            .map(|(a, b)| (b & !a).count_ones())
            .sum();
        directed as usize / 2
    }

    /// Number of ties `i` gained between `self` and `later`.
    pub fn actor_ties_added_by(&self, later: &Adjacency, i: usize) -> u32 {
        self.row(i)
            .iter()
            .zip(later.row(i))
            .map(|(a, b)| (b & !a).count_ones())
            .sum()
    }

    /// Pairs tied in both networks, counted once per pair.
    pub fn shared_ties(&self, other: &Adjacency) -> usize {
        let directed: u32 = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        directed as usize / 2
    }
}

impl fmt::Debug for Adjacency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Adjacency")
            .field("n", &self.n)
            .field("ties", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

pub struct Neighbors<'a> {
    row: &'a [u64],
    word: usize,
    current: u64,
}

impl Iterator for Neighbors<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word * 64 + bit);
            }
            self.word += 1;
            if self.word >= self.row.len() {
                return None;
            }
            self.current = self.row[self.word];
        }
    }
}
