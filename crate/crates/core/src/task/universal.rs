use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::sync::Arc;

use super::model::{show, PartialVector, Task, TaskError, Vector};
use super::paths::{pad_front, PathTable};
use crate::eps2::{AkOp, AkState};
use crate::frac::Frac;
use crate::shmem::{
    enumerate_executions, explore_states, Action, Bounds, ExecError, Leaf, Observation, Pid, ProcessProgram,
    ProtocolFault, RegId, RegisterSpec, StepResult, System, Width,
};

/// Width of the combined agreement cell: input code in {⊥, 0, 1} times one bit.
pub const CELL_BITS: u32 = 3;

/// Pack (agreement input or ⊥, communication bit) into one cell.
pub fn pack_cell(input: Option<u8>, bit: u8) -> u64 {
    let code = input.map_or(0, |x| x as u64 + 1);
    code * 2 + bit as u64
}

pub fn unpack_cell(cell: u64) -> (Option<u8>, u8) {
    let code = cell >> 1;
    ((code > 0).then(|| (code - 1) as u8), (cell & 1) as u8)
}

/// Pre-processed data shared by both processes.
#[derive(Debug)]
pub struct Solver {
    pub task: Task,
    pub table: PathTable,
    /// Agreement parameter.
    pub k: u32,
    /// Paths re-padded to `2k + 2` nodes.
    pub padded: std::collections::BTreeMap<(Vector, usize), Vec<Vector>>,
    values: Vec<String>,
    value_bits: u32,
}

impl Solver {
    pub fn new(task: Task, restriction: &BTreeSet<Vector>) -> Result<Self, TaskError> {
        if task.n != 2 {
            return Err(TaskError::Invalid("the universal solver handles two processes".into()));
        }
        let table = PathTable::build(&task, restriction)?;
        let k = table.len.div_ceil(2) as u32;
        let nodes = 2 * k as usize + 2;
        let padded = table
            .paths
            .iter()
            .map(|(key, p)| {
                let mut p = p.clone();
                pad_front(&mut p, nodes);
                (key.clone(), p)
            })
            .collect();
        let values = task.input_values();
        let value_bits = (usize::BITS - (values.len().max(2) - 1).leading_zeros()).max(1);
        Ok(Solver { task, table, k, padded, values, value_bits })
    }

    fn code(&self, v: &str) -> Option<u64> {
        self.values.binary_search_by(|x| x.as_str().cmp(v)).ok().map(|i| i as u64)
    }

    fn value(&self, code: u64) -> Result<&String, ProtocolFault> {
        self.values
            .get(code as usize)
            .ok_or_else(|| ProtocolFault::new("BadInputCode", format!("code {code}")))
    }
}

/// Register layout: two agreement cells, then two write-once task-input registers.
pub const CELL_REG: [RegId; 2] = [0, 1];
pub const TASK_INPUT_REG: [RegId; 2] = [2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UniPhase {
    WriteInput,
    ReadOtherInput,
    Agree,
    RereadOtherInput,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UniState {
    pub me: Pid,
    pub x: u64,
    pub phase: UniPhase,
    pub x_other: Option<u64>,
    /// 1 if the first read of the other's input found nothing.
    pub eps_input: u8,
    pub ak: AkState,
    pub d: Option<Frac>,
    /// Path index selected, when the middle case runs.
    pub index: Option<u64>,
    pub partial: Option<PartialVector>,
    /// Largest cell value this process wrote.
    pub max_cell: u64,
    pub output: Option<String>,
}

#[derive(Clone, Debug)]
pub struct UniversalProgram {
    pub solver: Arc<Solver>,
}

impl UniversalProgram {
    fn decide(&self, s: &mut UniState) -> Result<String, ProtocolFault> {
        let sv = &self.solver;
        let me = s.me.idx();
        let full = |s: &UniState| -> Result<Vector, ProtocolFault> {
            let xo = s.x_other.ok_or_else(|| ProtocolFault::new("MissingInput", "other input still ⊥"))?;
            let mut v = vec![String::new(); 2];
            v[me] = sv.value(s.x)?.clone();
            v[1 - me] = sv.value(xo)?.clone();
            Ok(v)
        };
        let d = s.d.expect("agreement finished");
        let out = if d == Frac::ZERO {
            let x = full(s)?;
            sv.table
                .delta_full
                .get(&x)
                .ok_or_else(|| ProtocolFault::new("UnknownInput", show(&x)))?[me]
                .clone()
        } else if d < Frac::ONE {
            let x = full(s)?;
            let missing = if s.eps_input == 1 { 1 - me } else { me };
            s.partial = Some(PartialVector::hide(&x, missing));
            let path = sv
                .padded
                .get(&(x.clone(), missing))
                .ok_or_else(|| ProtocolFault::new("UnknownInput", show(&x)))?;
            let idx = d * Frac::from_int(2 * sv.k as i64 + 1);
            let idx = idx.to_integer().ok_or_else(|| ProtocolFault::new("OffGrid", d.to_string()))? as u64;
            s.index = Some(idx);
            path[idx as usize][me].clone()
        } else {
            let mut entries = vec![None, None];
            entries[me] = Some(sv.value(s.x)?.clone());
            let p = PartialVector { entries };
            s.partial = Some(p.clone());
            s.index = Some(2 * sv.k as u64 + 1);
            sv.table.delta_partial.get(&p).ok_or_else(|| ProtocolFault::new("UnknownInput", p.to_string()))?[me]
                .clone()
        };
        Ok(out)
    }

    /// Translate the agreement machine's next operation into an action.
    fn agree_action(&self, s: &mut UniState) -> Result<Option<Action<u64, String>>, ProtocolFault> {
        let me = s.me.idx();
        let other = 1 - me;
        Ok(Some(match s.ak.next_op() {
            AkOp::WriteInput(b) => {
                let v = pack_cell(Some(b), 0);
                s.max_cell = s.max_cell.max(v);
                Action::Write { reg: CELL_REG[me], value: v }
            }
            AkOp::WriteBit(bit) => {
                let v = pack_cell(Some(s.eps_input), bit);
                s.max_cell = s.max_cell.max(v);
                Action::Write { reg: CELL_REG[me], value: v }
            }
            AkOp::ReadOtherBit | AkOp::ReadOtherInput => Action::Read { reg: CELL_REG[other] },
            AkOp::ReadOwnInput => Action::Read { reg: CELL_REG[me] },
            AkOp::Decide(d) => {
                s.d = Some(d.value);
                return Ok(None);
            }
        }))
    }
}

impl ProcessProgram for UniversalProgram {
    type Input = String;
    type State = UniState;
    type Value = u64;
    type Output = String;

    fn init(&self, pid: Pid, input: &String) -> UniState {
        let x = self.solver.code(input).unwrap_or(u64::MAX);
        UniState {
            me: pid,
            x,
            phase: UniPhase::WriteInput,
            x_other: None,
            eps_input: 0,
            ak: AkState::new(self.solver.k, pid, 0),
            d: None,
            index: None,
            partial: None,
            max_cell: 0,
            output: None,
        }
    }

    fn step(&self, mut s: UniState, obs: Observation<u64>) -> StepResult<Self> {
        let me = s.me.idx();
        let other = 1 - me;
        if s.x == u64::MAX {
            return Err(ProtocolFault::new("UnknownInput", "input value not in the task"));
        }
        match (s.phase, obs) {
            (UniPhase::WriteInput, Observation::Start) => {
                return Ok((Action::Write { reg: TASK_INPUT_REG[me], value: s.x }, s));
            }
            (UniPhase::WriteInput, Observation::Written) => {
                s.phase = UniPhase::ReadOtherInput;
                return Ok((Action::Read { reg: TASK_INPUT_REG[other] }, s));
            }
            (UniPhase::ReadOtherInput, Observation::Value(v)) => {
                s.x_other = v;
                s.eps_input = v.is_none() as u8;
                s.ak = AkState::new(self.solver.k, s.me, s.eps_input);
                s.phase = UniPhase::Agree;
            }
            (UniPhase::Agree, Observation::Written) => s.ak.absorb(None)?,
            (UniPhase::Agree, Observation::Value(v)) => {
                let cell = v.unwrap_or(0);
                let (input, bit) = unpack_cell(cell);
                let reading_bit = matches!(s.ak.next_op(), AkOp::ReadOtherBit);
                s.ak.absorb(if reading_bit { Some(bit) } else { input })?;
            }
            (UniPhase::RereadOtherInput, Observation::Value(v)) => {
                s.x_other = v;
                let out = self.decide(&mut s)?;
                s.phase = UniPhase::Done;
                s.output = Some(out.clone());
                return Ok((Action::Decide(out), s));
            }
            (_, obs) => return Err(ProtocolFault::unexpected(&obs)),
        }
        match self.agree_action(&mut s)? {
            Some(a) => Ok((a, s)),
            None => {
                let d = s.d.expect("set on decide");
                if d > Frac::ZERO && d < Frac::ONE {
                    s.phase = UniPhase::RereadOtherInput;
                    Ok((Action::Read { reg: TASK_INPUT_REG[other] }, s))
                } else {
                    let out = self.decide(&mut s)?;
                    s.phase = UniPhase::Done;
                    s.output = Some(out.clone());
                    Ok((Action::Decide(out), s))
                }
            }
        }
    }
}

pub fn universal_system(solver: Arc<Solver>) -> System<UniversalProgram> {
    let w = Width::Bits(solver.value_bits);
    let registers = vec![
        RegisterSpec::new("C1", Pid(1), Width::Bits(CELL_BITS)).init(0),
        RegisterSpec::new("C2", Pid(2), Width::Bits(CELL_BITS)).init(0),
        RegisterSpec::new("I1", Pid(1), w).write_once(),
        RegisterSpec::new("I2", Pid(2), w).write_once(),
    ];
    let prog = UniversalProgram { solver };
    System::new(vec![prog.clone(), prog], registers)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Every interleaving.
    AllSchedules,
    /// Every reachable configuration once.
    AllStates,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConformanceReport {
    pub inputs: usize,
    pub leaves: u64,
    pub truncated: u64,
    pub max_cell: u64,
    pub violations: Vec<String>,
}

fn check_leaf(solver: &Solver, x: &Vector, leaf: &Leaf<'_, '_, UniversalProgram>, rep: &mut ConformanceReport) {
    let legal = solver.task.legal(x);
    let outcome = leaf.exec.outcome();
    for s in leaf.exec.slots() {
        rep.max_cell = rep.max_cell.max(s.state.max_cell);
    }
    let tag = || format!("input {} schedule {:?}", show(x), leaf.exec.schedule());
    match &outcome[..] {
        [(_, s1, y1), (_, s2, y2)] => {
            if !legal.contains(&vec![y1.clone(), y2.clone()]) {
                rep.violations.push(format!("{}: decided ({y1},{y2}) not legal", tag()));
            }
            let top = 2 * solver.k as u64 + 1;
            if s1.index == Some(top) && s2.index == Some(top) {
                rep.violations.push(format!("{}: both selected the last path node", tag()));
            }
            if let (Some(p1), Some(p2)) = (&s1.partial, &s2.partial) {
                if p1 != p2 {
                    rep.violations.push(format!("{}: partial views {p1} and {p2} differ", tag()));
                }
            }
        }
        [(p, _, y)] => {
            if !legal.iter().any(|v| &v[p.idx()] == y) {
                rep.violations.push(format!("{}: lone decision {y} of {p:?} extends no legal output", tag()));
            }
        }
        _ => {}
    }
    if leaf.truncated {
        rep.truncated += 1;
    }
    rep.leaves += 1;
}

/// Exhaustively run the solver on every input with at most `max_crashes` crashes.
pub fn check_conformance(
    solver: Arc<Solver>,
    max_crashes: usize,
    coverage: Coverage,
) -> Result<ConformanceReport, ExecError> {
    let sys = universal_system(solver.clone());
    let mut rep = ConformanceReport::default();
    let bounds = Bounds::new(10_000, max_crashes);
    for x in &solver.task.inputs {
        rep.inputs += 1;
        let visit = |leaf: &Leaf<'_, '_, UniversalProgram>| {
            check_leaf(&solver, x, leaf, &mut rep);
            ControlFlow::Continue(())
        };
        match coverage {
            Coverage::AllSchedules => {
                enumerate_executions(&sys, x, bounds, visit)?;
            }
            Coverage::AllStates => {
                explore_states(&sys, x, bounds, visit)?;
            }
        }
    }
    Ok(rep)
}
