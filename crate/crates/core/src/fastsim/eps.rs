use std::ops::ControlFlow;
use std::sync::Arc;

use super::labelling::{Labelling, ParityLabelling};
use super::sim::{sim_registers, Packing, SimCore, SimPhase, SIM_REG};
use super::table::{LabelTable, TableError};
use crate::shmem::{explore_states, Action, Bounds, Observation, Pid, ProcessProgram, ProtocolFault, RegId, RegisterSpec, StepResult, System, Width};
use crate::Frac;

/// Input registers `I1`, `I2` follow the simulation registers.
pub const FAST_INPUT_REG: [RegId; 2] = [2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FastPhase {
    WriteInput,
    Sim,
    ReadOther,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FastState {
    pub input: u8,
    pub sim: SimCore,
    pub phase: FastPhase,
}

/// How a label is turned into a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    /// Distance along the simulation's own label graph.
    Graph,
    /// Early labels extended by solo rounds.
    SoloExtension,
}

/// Binary ε-agreement on top of the constant-size simulation.
#[derive(Debug)]
pub struct FastEps<L> {
    pub labelling: Arc<L>,
    pub table: Arc<LabelTable>,
    pub pack: Packing,
    pub valuation: Valuation,
}

impl<L> Clone for FastEps<L> {
    fn clone(&self) -> Self {
        FastEps { labelling: self.labelling.clone(), table: self.table.clone(), pack: self.pack, valuation: self.valuation }
    }
}

/// Decision from the label value and both inputs, seen from `p1`/`p2` order.
pub fn fast_decide(f: Frac, x1: u8, x2: u8) -> Frac {
    let half = Frac::new(1, 2);
    let keep = if f < half { x1 == 0 } else { x2 == 1 };
    if keep {
        f
    } else {
        Frac::ONE - f
    }
}

impl<L: Labelling> FastEps<L> {
    fn value(&self, s: &SimCore) -> Result<Frac, ProtocolFault> {
        let l = s.label(self.labelling.as_ref())?;
        match self.valuation {
            Valuation::Graph => {
                self.table.value(&l).ok_or_else(|| ProtocolFault::new("UnknownLabel", format!("{l} not in table")))
            }
            Valuation::SoloExtension => Ok(super::table::solo_extended_value(&l)),
        }
    }

    fn sim_write(&self, mut s: FastState) -> StepResult<Self> {
        let w = s.sim.begin_round(self.labelling.as_ref(), &self.pack)?;
        s.phase = FastPhase::Sim;
        Ok((Action::Write { reg: SIM_REG[s.sim.me.idx()], value: w }, s))
    }
}

impl<L: Labelling> ProcessProgram for FastEps<L> {
    type Input = u8;
    type State = FastState;
    type Value = u64;
    type Output = Frac;

    fn init(&self, pid: Pid, input: &u8) -> FastState {
        FastState { input: *input, sim: SimCore::new(pid, self.table.delta, self.table.rounds), phase: FastPhase::WriteInput }
    }

    fn step(&self, mut s: FastState, obs: Observation<u64>) -> StepResult<Self> {
        let me = s.sim.me;
        match (s.phase, obs) {
            (FastPhase::WriteInput, Observation::Start) => {
                Ok((Action::Write { reg: FAST_INPUT_REG[me.idx()], value: s.input as u64 }, s))
            }
            (FastPhase::WriteInput, Observation::Written) => self.sim_write(s),
            (FastPhase::Sim, Observation::Written) if s.sim.phase == SimPhase::Read => {
                Ok((Action::Read { reg: SIM_REG[me.other().idx()] }, s))
            }
            (FastPhase::Sim, Observation::Value(v)) => {
                if s.sim.absorb::<L>(v.unwrap_or(0), &self.pack)? {
                    s.phase = FastPhase::ReadOther;
                    return Ok((Action::Read { reg: FAST_INPUT_REG[me.other().idx()] }, s));
                }
                self.sim_write(s)
            }
            (FastPhase::ReadOther, Observation::Value(v)) => {
                let own = s.input;
                let out = match v {
                    Some(o) if o as u8 != own => {
                        let (x1, x2) = if me == Pid(1) { (own, o as u8) } else { (o as u8, own) };
                        fast_decide(self.value(&s.sim)?, x1, x2)
                    }
                    _ => Frac::from_int(own as i64),
                };
                Ok((Action::Decide(out), s))
            }
            (_, obs) => Err(ProtocolFault::unexpected(&obs)),
        }
    }
}

/// Smallest `R` with `2^R >= 1/eps`.
pub fn rounds_for(eps: Frac) -> u32 {
    let mut r = 0;
    while Frac::new(1, 1i64 << r) > eps {
        r += 1;
    }
    r.max(1)
}

pub fn fast_eps_system<L: Labelling>(
    labelling: Arc<L>,
    table: Arc<LabelTable>,
    valuation: Valuation,
) -> System<FastEps<L>> {
    let pack = Packing { delta: table.delta, b: labelling.max_bits(table.rounds) };
    let mut regs: Vec<RegisterSpec<u64>> = sim_registers(&pack);
    for i in 1..=2 {
        regs.push(RegisterSpec::new(format!("I{i}"), Pid(i), Width::Bits(1)).write_once());
    }
    let p = FastEps { labelling, table, pack, valuation };
    System::new(vec![p.clone(), p], regs)
}

/// Per-process step bound of the fast protocol.
pub fn fast_step_bound(rounds: u32) -> usize {
    2 * rounds as usize + 8
}

/// What an exhaustive run of the fast protocol found.
#[derive(Clone, Debug, Default)]
pub struct FastSummary {
    pub span: u64,
    pub terminals: u64,
    pub max_gap: Frac,
    pub max_ops: usize,
    pub register_bits: u32,
    pub violations: Vec<String>,
}

/// Explore every reachable configuration of the fast protocol with the parity
/// labelling on all binary inputs, with at most `max_crashes` crashes.
pub fn fast_summary(delta: u32, rounds: u32, valuation: Valuation, max_crashes: usize) -> Result<FastSummary, TableError> {
    let l = Arc::new(ParityLabelling);
    let table = LabelTable::with_resolution(l.clone(), delta, rounds, 1 << rounds)?;
    let span = table.span;
    let sys = fast_eps_system(l, Arc::new(table), valuation);
    let mut sum = FastSummary { span, ..Default::default() };
    sum.register_bits = sys.programs[0].pack.width();
    for x in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        let lo = Frac::from_int(x[0].min(x[1]) as i64);
        let hi = Frac::from_int(x[0].max(x[1]) as i64);
        explore_states(&sys, &x, Bounds::new(usize::MAX, max_crashes), |leaf| {
            sum.terminals += 1;
            let d = leaf.exec.decisions();
            for (i, y) in d.iter().enumerate() {
                if let Some(y) = y {
                    if *y < lo || *y > hi {
                        sum.violations.push(format!("p{} decided {y} on inputs {x:?}", i + 1));
                    }
                }
            }
            if let (Some(a), Some(b)) = (d[0], d[1]) {
                sum.max_gap = sum.max_gap.max(a.abs_diff(b));
            }
            for s in leaf.exec.slots() {
                sum.max_ops = sum.max_ops.max(s.ops);
            }
            ControlFlow::Continue(())
        })?;
    }
    Ok(sum)
}
