use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::Arc;

use thiserror::Error;

use super::labelling::{Label, Labelling};
use super::sim::sim_system;
use crate::shmem::{explore_states, Bounds, ExecError, Pid, ProtocolGraph};
use crate::Frac;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("label graph is disconnected")]
    Disconnected,
    #[error("solo labels are {found} apart, {needed} needed")]
    InsufficientResolution { found: u64, needed: u64 },
}

/// Values for the labels of the constant-size simulation, taken from its own
/// protocol graph: a label sits at its distance from the first process's solo
/// label, scaled by the distance between the two solo labels and capped at 1.
#[derive(Clone, Debug)]
pub struct LabelTable {
    pub delta: u32,
    pub rounds: u32,
    pub span: u64,
    pub values: HashMap<Label, Frac>,
    pub vertices: usize,
    pub edges: usize,
    pub is_path: bool,
}

impl LabelTable {
    pub fn build<L: Labelling>(labelling: Arc<L>, delta: u32, rounds: u32) -> Result<Self, TableError> {
        let sys = sim_system(labelling, delta, rounds);
        let mut g: ProtocolGraph<Label, Label> = ProtocolGraph::new();
        explore_states(&sys, &[(), ()], Bounds::new(usize::MAX, 0), |leaf| {
            let o: Vec<(Pid, Label, Label)> = leaf.exec.outcome().into_iter().map(|(p, _, l)| (p, l, l)).collect();
            g.add_outcome(&o);
            ControlFlow::Continue(())
        })?;
        if !g.is_connected() {
            return Err(TableError::Disconnected);
        }
        let find = |pid: Pid| {
            g.vertices()
                .iter()
                .position(|v| v.0 == pid && v.2.round == delta.min(rounds) && v.2.position == solo_position(pid, v.2.round))
                .expect("solo label present")
        };
        let (s1, s2) = (find(Pid(1)), find(Pid(2)));
        let dist = g.distances_from(s1);
        let span = dist[s2].unwrap() as u64;
        let values = g
            .vertices()
            .iter()
            .zip(&dist)
            .map(|(v, d)| (v.2, Frac::new(d.unwrap().min(span as usize) as i64, span as i64)))
            .collect();
        Ok(LabelTable { delta, rounds, span, values, vertices: g.vertices().len(), edges: g.edge_count(), is_path: g.is_simple_path() })
    }

    /// As [`LabelTable::build`], failing when the solo labels are fewer than
    /// `needed` edges apart.
    pub fn with_resolution<L: Labelling>(labelling: Arc<L>, delta: u32, rounds: u32, needed: u64) -> Result<Self, TableError> {
        let t = Self::build(labelling, delta, rounds)?;
        if t.span < needed {
            return Err(TableError::InsufficientResolution { found: t.span, needed });
        }
        Ok(t)
    }

    pub fn value(&self, l: &Label) -> Option<Frac> {
        self.values.get(l).copied()
    }
}

/// Position reached by a process that is solo in each of `round` rounds.
pub fn solo_position(pid: Pid, round: u32) -> u64 {
    pid.idx() as u64 * 3u64.pow(round)
}

/// Value obtained by extending an early label with solo rounds up to the full
/// round count and reading it on that round's path.
pub fn solo_extended_value(l: &Label) -> Frac {
    Frac::new(l.position as i64, 3i64.pow(l.round))
}
