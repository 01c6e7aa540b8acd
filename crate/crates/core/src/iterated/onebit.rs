use std::sync::Arc;

use std::ops::ControlFlow;

use super::config::{binary_inputs, enumerate_configurations, ConfigTable};
use super::isched::enumerate_is;
use super::validate::{replay_round, validate_round, Realizability, RoundMode};
use super::view::{View, ViewRef};
use crate::shmem::{
    Action, ExecError, Observation, Pid, ProcessProgram, ProtocolFault, RegisterSpec, StepResult, Status, System, Width,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimPhase {
    Write,
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimState {
    pub me: Pid,
    /// Simulated round, 1-based.
    pub round: u32,
    /// Current iteration, 0-based global configuration index.
    pub iter: usize,
    pub phase: SimPhase,
    /// Views gathered so far for the current round, indexed by owner.
    pub gathered: Vec<Option<ViewRef>>,
    /// Whether some configuration of this window matched the own view.
    pub matched: bool,
    /// Simulated views at the end of rounds 0, 1, ...
    pub history: Vec<ViewRef>,
}

/// Simulates `k` rounds of the full-information collect protocol with one-bit
/// immediate-snapshot iterations, one iteration per configuration of the
/// previous round.
#[derive(Clone, Debug)]
pub struct OneBitSim {
    pub table: Arc<ConfigTable>,
    pub k: u32,
}

impl OneBitSim {
    fn n(&self) -> usize {
        self.table.n
    }

    fn write_action(&self, s: SimState) -> StepResult<Self> {
        let c = self.table.get(s.iter);
        let own = s.history.last().expect("round-0 view");
        let bit = (&c[s.me.idx()] == own) as u64;
        let mut s = s;
        s.matched |= bit == 1;
        s.phase = SimPhase::Write;
        let reg = s.iter * self.n() + s.me.idx();
        Ok((Action::Write { reg, value: bit }, s))
    }
}

impl ProcessProgram for OneBitSim {
    type Input = u64;
    type State = SimState;
    type Value = u64;
    type Output = ViewRef;

    fn init(&self, pid: Pid, input: &u64) -> SimState {
        SimState {
            me: pid,
            round: 1,
            iter: 0,
            phase: SimPhase::Write,
            gathered: vec![None; self.n()],
            matched: false,
            history: vec![View::input(pid, *input)],
        }
    }

    fn step(&self, mut s: SimState, obs: Observation<u64>) -> StepResult<Self> {
        let n = self.n();
        match (s.phase, obs) {
            (_, Observation::Start) => {
                if self.k == 0 {
                    let v = s.history[0].clone();
                    return Ok((Action::Decide(v), s));
                }
                self.write_action(s)
            }
            (SimPhase::Write, Observation::Written) => {
                s.phase = SimPhase::Snapshot;
                let base = s.iter * n;
                Ok((Action::Snapshot { regs: base..base + n }, s))
            }
            (SimPhase::Snapshot, Observation::Snapshot(bits)) => {
                let c = self.table.get(s.iter);
                for (j, b) in bits.iter().enumerate() {
                    if *b == Some(1) {
                        match &s.gathered[j] {
                            Some(v) if v != &c[j] => {
                                return Err(ProtocolFault::new(
                                    "ConflictingViews",
                                    format!("two different views of p{} in round {}", j + 1, s.round),
                                ))
                            }
                            _ => s.gathered[j] = Some(c[j].clone()),
                        }
                    }
                }
                s.iter += 1;
                if s.iter == self.table.window(s.round - 1).end {
                    if !s.matched || s.gathered[s.me.idx()].is_none() {
                        return Err(ProtocolFault::new(
                            "ConfigMiss",
                            format!("{:?} found no configuration holding its view in round {}", s.me, s.round),
                        ));
                    }
                    let entries = std::mem::replace(&mut s.gathered, vec![None; n]);
                    s.history.push(Arc::new(View::Round { owner: s.me, round: s.round, entries }));
                    s.matched = false;
                    s.round += 1;
                    if s.round > self.k {
                        let v = s.history.last().unwrap().clone();
                        return Ok((Action::Decide(v), s));
                    }
                }
                self.write_action(s)
            }
            (_, obs) => Err(ProtocolFault::unexpected(&obs)),
        }
    }
}

/// Processes plus one array of `n` one-bit registers per iteration.
pub fn onebit_system(table: Arc<ConfigTable>, k: u32) -> System<OneBitSim> {
    let n = table.n;
    assert!(k <= table.k(), "table covers {} rounds, {k} requested", table.k());
    let iters = table.simulation_iterations(k);
    let mut registers = Vec::with_capacity(iters * n);
    for it in 0..iters {
        for j in 1..=n {
            registers.push(RegisterSpec::new(format!("B{}[{j}]", it + 1), Pid(j), Width::Bits(1)).init(0));
        }
    }
    System::new(vec![OneBitSim { table, k }; n], registers)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OneBitReport {
    /// Configurations per simulated round, round 0 first.
    pub configurations: Vec<usize>,
    pub iterations: usize,
    pub leaves: u64,
    pub violations: Vec<String>,
}

/// Run the one-bit simulation of `k` rounds on every binary input under every
/// immediate-snapshot schedule (configurations deduplicated) and check that
/// each simulated round is a reachable, realizable collect round.
pub fn check_onebit(n: usize, k: u32, max_crashes: usize) -> Result<OneBitReport, ExecError> {
    let inputs = binary_inputs(n);
    let table = Arc::new(enumerate_configurations(&inputs, k)?);
    let sys = onebit_system(table.clone(), k);
    let mut rep = OneBitReport {
        configurations: table.rounds.iter().map(Vec::len).collect(),
        iterations: table.simulation_iterations(k),
        ..Default::default()
    };
    for x in &inputs {
        enumerate_is(&sys, x, max_crashes, true, |e| {
            rep.leaves += 1;
            let mut full = true;
            for s in e.slots() {
                match s.status {
                    Status::Decided(_) => {
                        if s.state.iter != rep.iterations {
                            rep.violations.push(format!("{:?} stopped at iteration {}", s.state.me, s.state.iter));
                        }
                        for r in 1..=k {
                            let v = &s.state.history[r as usize];
                            if !table.rounds[r as usize].iter().any(|c| &c[s.state.me.idx()] == v) {
                                rep.violations.push(format!("{:?} round {r} view unreachable", s.state.me));
                            }
                        }
                    }
                    _ => full = false,
                }
            }
            if full {
                let hs: Vec<&Vec<ViewRef>> = e.slots().iter().map(|s| &s.state.history).collect();
                for r in 1..=k as usize {
                    let prev: Vec<ViewRef> = hs.iter().map(|h| h[r - 1].clone()).collect();
                    let cur: Vec<ViewRef> = hs.iter().map(|h| h[r].clone()).collect();
                    if !table.contains(r as u32, &cur) {
                        rep.violations.push(format!("round {r} configuration unreachable"));
                    }
                    let outs: Vec<Vec<Option<ViewRef>>> =
                        cur.iter().map(|v| v.entries().map(<[_]>::to_vec).unwrap_or_default()).collect();
                    match validate_round(&prev, &outs, RoundMode::Collect) {
                        Ok(Realizability::Realizable(w)) => {
                            if replay_round(&prev, &w).as_ref() != Ok(&outs) {
                                rep.violations.push(format!("round {r} witness does not replay"));
                            }
                        }
                        Ok(Realizability::NotRealizable(why)) => rep.violations.push(format!("round {r}: {why}")),
                        Err(e) => rep.violations.push(format!("round {r}: {e}")),
                    }
                }
            }
            ControlFlow::Continue(())
        })?;
    }
    Ok(rep)
}
