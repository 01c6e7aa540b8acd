use std::sync::Arc;

use super::view::{View, ViewRef};
use crate::shmem::{
    Action, Observation, Pid, ProcessProgram, ProtocolFault, RegId, RegisterSpec, StepResult, System, Width,
};

/// How a round's memory is read back.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One atomic snapshot of the round's array (immediate snapshot under the
    /// round scheduler of [`super::enumerate_is`]).
    Snapshot,
    /// Individual reads in ascending register order.
    Collect,
}

/// Register of process `j` in round `r` (1-based round).
pub fn cell(n: usize, round: u32, j: Pid) -> RegId {
    (round as usize - 1) * n + j.idx()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FiPhase {
    Write,
    Read { next: usize, acc: Vec<Option<ViewRef>> },
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiState {
    pub me: Pid,
    pub round: u32,
    pub phase: FiPhase,
    /// Views at the end of rounds 0, 1, ...
    pub history: Vec<ViewRef>,
}

impl FiState {
    pub fn view(&self) -> &ViewRef {
        self.history.last().expect("round-0 view present")
    }
}

/// Write the current view, read the round's memory back, repeat `k` times.
#[derive(Clone, Debug)]
pub struct FullInfo {
    pub n: usize,
    pub k: u32,
    pub mode: Mode,
}

impl FullInfo {
    fn next_round_action(&self, mut s: FiState) -> StepResult<Self> {
        if s.round > self.k {
            let v = s.view().clone();
            return Ok((Action::Decide(v), s));
        }
        s.phase = FiPhase::Write;
        let value = s.view().clone();
        Ok((Action::Write { reg: cell(self.n, s.round, s.me), value }, s))
    }

    fn finish_round(&self, mut s: FiState, entries: Vec<Option<ViewRef>>) -> StepResult<Self> {
        let v = Arc::new(View::Round { owner: s.me, round: s.round, entries });
        s.history.push(v);
        s.round += 1;
        self.next_round_action(s)
    }
}

impl ProcessProgram for FullInfo {
    type Input = u64;
    type State = FiState;
    type Value = ViewRef;
    type Output = ViewRef;

    fn init(&self, pid: Pid, input: &u64) -> FiState {
        FiState { me: pid, round: 1, phase: FiPhase::Write, history: vec![View::input(pid, *input)] }
    }

    fn step(&self, s: FiState, obs: Observation<ViewRef>) -> StepResult<Self> {
        let base = cell(self.n, s.round.max(1), Pid(1));
        match (&s.phase, obs) {
            (_, Observation::Start) => self.next_round_action(s),
            (FiPhase::Write, Observation::Written) => {
                let mut s = s;
                match self.mode {
                    Mode::Snapshot => {
                        s.phase = FiPhase::Snapshot;
                        Ok((Action::Snapshot { regs: base..base + self.n }, s))
                    }
                    Mode::Collect => {
                        s.phase = FiPhase::Read { next: 0, acc: Vec::with_capacity(self.n) };
                        Ok((Action::Read { reg: base }, s))
                    }
                }
            }
            (FiPhase::Snapshot, Observation::Snapshot(vals)) => self.finish_round(s, vals),
            (FiPhase::Read { .. }, Observation::Value(v)) => {
                let mut s = s;
                let FiPhase::Read { next, mut acc } = std::mem::replace(&mut s.phase, FiPhase::Write) else {
                    unreachable!()
                };
                acc.push(v);
                if next + 1 == self.n {
                    self.finish_round(s, acc)
                } else {
                    s.phase = FiPhase::Read { next: next + 1, acc };
                    Ok((Action::Read { reg: base + next + 1 }, s))
                }
            }
            (_, obs) => Err(ProtocolFault::unexpected(&obs)),
        }
    }
}

/// `n` full-information processes with a fresh array of `n` write-once cells per round.
pub fn fullinfo_system(n: usize, k: u32, mode: Mode) -> System<FullInfo> {
    let mut registers = Vec::new();
    for r in 1..=k {
        for j in 1..=n {
            registers.push(RegisterSpec::new(format!("M{r}[{j}]"), Pid(j), Width::Unbounded).write_once());
        }
    }
    System::new(vec![FullInfo { n, k, mode }; n], registers)
}
