use std::collections::BTreeSet;
use std::ops::{ControlFlow, Range};

use super::fullinfo::{fullinfo_system, Mode};
use super::view::{View, ViewRef};
use crate::shmem::{explore_states, Bounds, ExecError, Pid};

/// One view per process.
pub type Config = Vec<ViewRef>;

/// Reachable configurations of the full-information protocol, per round, with a
/// round-preserving global numbering (round `r` sets occupy a contiguous block,
/// each block in lexicographic order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigTable {
    pub n: usize,
    pub rounds: Vec<Vec<Config>>,
}

impl ConfigTable {
    /// Rounds covered (`C^0 .. C^k` gives `k`).
    pub fn k(&self) -> u32 {
        self.rounds.len() as u32 - 1
    }

    /// Global indices of round `r`'s block (0-based).
    pub fn window(&self, r: u32) -> Range<usize> {
        let start: usize = self.rounds[..r as usize].iter().map(Vec::len).sum();
        start..start + self.rounds[r as usize].len()
    }

    pub fn total(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn get(&self, global: usize) -> &Config {
        let mut g = global;
        for round in &self.rounds {
            if g < round.len() {
                return &round[g];
            }
            g -= round.len();
        }
        panic!("configuration index {global} out of range")
    }

    pub fn contains(&self, r: u32, c: &[ViewRef]) -> bool {
        self.rounds.get(r as usize).is_some_and(|set| set.binary_search_by(|x| x.as_slice().cmp(c)).is_ok())
    }

    /// Iterations the 1-bit simulation of `k` rounds performs.
    pub fn simulation_iterations(&self, k: u32) -> usize {
        self.rounds[..k as usize].iter().map(Vec::len).sum()
    }
}

pub fn input_config(inputs: &[u64]) -> Config {
    inputs.iter().enumerate().map(|(i, &x)| View::input(Pid::from_idx(i), x)).collect()
}

/// Exhaustively collect `C^0 .. C^k` for the given input vectors, running the
/// full-information protocol with ascending-order collects and no crashes.
pub fn enumerate_configurations(inputs: &[Vec<u64>], k: u32) -> Result<ConfigTable, ExecError> {
    let n = inputs.first().map_or(0, Vec::len);
    let mut rounds: Vec<BTreeSet<Config>> = vec![BTreeSet::new(); k as usize + 1];
    for x in inputs {
        rounds[0].insert(input_config(x));
    }
    if k > 0 {
        let sys = fullinfo_system(n, k, Mode::Collect);
        for x in inputs {
            explore_states(&sys, x, Bounds::new(usize::MAX, 0), |leaf| {
                for r in 1..=k as usize {
                    let c: Config = leaf.exec.slots().iter().map(|s| s.state.history[r].clone()).collect();
                    rounds[r].insert(c);
                }
                ControlFlow::Continue(())
            })?;
        }
    }
    Ok(ConfigTable { n, rounds: rounds.into_iter().map(|s| s.into_iter().collect()).collect() })
}

/// All binary input vectors of length `n`.
pub fn binary_inputs(n: usize) -> Vec<Vec<u64>> {
    (0..1u64 << n).map(|m| (0..n).map(|i| m >> i & 1).collect()).collect()
}
