use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("resilience {t} needs 1 <= t < n/2 (n = {n})")]
    BadResilience { n: usize, t: usize },
    #[error("node {0} out of range")]
    BadNode(usize),
    #[error("{0} crashes exceed the resilience")]
    TooManyCrashes(usize),
    #[error("malformed wire: {0}")]
    MalformedWire(String),
    #[error("source and destination are both node {0}")]
    SelfSend(usize),
}

/// Ring where node `i` also links to its next `t` nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub n: usize,
    pub t: usize,
    /// `out[i-1]` lists the successors of node `i`, nearest first.
    pub out: Vec<Vec<usize>>,
}

pub fn augmented_ring(n: usize, t: usize) -> Result<Topology, RingError> {
    if t < 1 || 2 * t >= n {
        return Err(RingError::BadResilience { n, t });
    }
    let out = (1..=n).map(|i| (1..=t + 1).map(|j| (i - 1 + j) % n + 1).collect()).collect();
    Ok(Topology { n, t, out })
}

impl Topology {
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.out[i - 1]
    }

    /// Predecessor of `j` at distance `m+1`: `j` is its `m`-th successor.
    pub fn predecessor(&self, j: usize, m: usize) -> usize {
        (j - 1 + self.n - (m + 1)) % self.n + 1
    }

    /// Nodes reachable from `src` without passing through `removed`.
    pub fn reachable(&self, src: usize, removed: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([src]);
        let mut stack = vec![src];
        while let Some(v) = stack.pop() {
            for &w in self.successors(v) {
                if !removed.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Survivors stay mutually reachable for every removal of `k` nodes.
    pub fn survives_removals(&self, k: usize) -> bool {
        subsets(self.n, k).into_iter().all(|removed| {
            let alive: BTreeSet<usize> = (1..=self.n).filter(|v| !removed.contains(v)).collect();
            alive.iter().all(|&s| self.reachable(s, &removed).is_superset(&alive))
        })
    }
}

/// All subsets of `1..=n` with at most `k` elements.
pub fn subsets(n: usize, k: usize) -> Vec<BTreeSet<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (1..=n).filter(|i| m >> (i - 1) & 1 == 1).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_two() {
        let g = augmented_ring(7, 2).unwrap();
        assert_eq!(g.successors(1), &[2, 3, 4]);
        assert_eq!(g.successors(6), &[7, 1, 2]);
        assert_eq!(g.predecessor(1, 0), 7);
        assert_eq!(g.predecessor(1, 2), 5);
        assert!(g.out.iter().all(|s| s.len() == 3));
        assert!(g.survives_removals(2));
        assert!(augmented_ring(4, 2).is_err());
    }
}
