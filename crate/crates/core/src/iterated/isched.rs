use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::ops::ControlFlow;

use crate::shmem::{Action, ExecError, Execution, Pid, ProcessProgram, System};

/// All ordered partitions of `items` into nonempty blocks.
pub fn ordered_partitions<T: Clone>(items: &[T]) -> Vec<Vec<Vec<T>>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let m = items.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << m) {
        let block: Vec<T> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| items[i].clone()).collect();
        let rest: Vec<T> = (0..m).filter(|i| mask >> i & 1 == 0).map(|i| items[i].clone()).collect();
        for mut tail in ordered_partitions(&rest) {
            tail.insert(0, block.clone());
            out.push(tail);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IsSummary {
    pub leaves: u64,
    pub rounds_played: u64,
}

/// Hash of the process slots only. Under round-by-round scheduling, memories
/// of finished rounds are never accessed again, so two executions with equal
/// slots at a round boundary have the same futures.
fn slot_fingerprint<P: ProcessProgram>(exec: &Execution<'_, P>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    exec.slots().hash(&mut h);
    h.finish()
}

fn play_round<P: ProcessProgram>(exec: &mut Execution<'_, P>, blocks: &[Vec<Pid>]) -> Result<(), ExecError> {
    for block in blocks {
        for &p in block {
            if !matches!(exec.pending(p), Some(Action::Write { .. })) {
                return Err(ExecError::IllegalSchedule {
                    position: exec.schedule().len(),
                    reason: format!("{p:?} does not start its round with a write"),
                });
            }
            exec.step(p)?;
        }
        for &p in block {
            if !matches!(exec.pending(p), Some(Action::Snapshot { .. })) {
                return Err(ExecError::IllegalSchedule {
                    position: exec.schedule().len(),
                    reason: format!("{p:?} does not snapshot after its write"),
                });
            }
            exec.step(p)?;
        }
    }
    Ok(())
}

/// Run a write/snapshot program under immediate-snapshot semantics: each round
/// the adversary orders the live processes into concurrency classes; a class
/// writes, then snapshots. Up to `max_crashes` processes may stop at round
/// boundaries. With `dedup`, configurations already seen at a round boundary
/// are not expanded again, so leaves are distinct configurations rather than
/// executions.
pub fn enumerate_is<P, F>(
    system: &System<P>,
    inputs: &[P::Input],
    max_crashes: usize,
    dedup: bool,
    mut visit: F,
) -> Result<IsSummary, ExecError>
where
    P: ProcessProgram,
    F: FnMut(&Execution<'_, P>) -> ControlFlow<()>,
{
    let root = Execution::new(system, inputs)?;
    let mut seen = HashSet::new();
    let mut summary = IsSummary::default();
    let mut stack = vec![root];
    while let Some(exec) = stack.pop() {
        let live: Vec<Pid> = exec.running().collect();
        if live.is_empty() {
            summary.leaves += 1;
            if visit(&exec).is_break() {
                break;
            }
            continue;
        }
        let budget = max_crashes - exec.crashes();
        for mask in 0u32..(1 << live.len()) {
            if mask.count_ones() as usize > budget {
                continue;
            }
            let mut base = exec.clone();
            for (i, &p) in live.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    base.crash(p)?;
                }
            }
            let movers: Vec<Pid> = live.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 0).map(|(_, &p)| p).collect();
            if movers.is_empty() {
                stack.push(base);
                continue;
            }
            for blocks in ordered_partitions(&movers) {
                let mut child = base.clone();
                play_round(&mut child, &blocks)?;
                summary.rounds_played += 1;
                if dedup && !seen.insert(slot_fingerprint(&child)) {
                    continue;
                }
                stack.push(child);
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fubini_numbers() {
        let counts: Vec<usize> = (0..5).map(|m| ordered_partitions(&(0..m).collect::<Vec<_>>()).len()).collect();
        assert_eq!(counts, vec![1, 1, 3, 13, 75]);
    }
}
