use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::program::{Action, Observation, ProcessProgram, ProtocolFault, System};
use super::register::{register_word, Pid, RegId, RegisterValue, Width};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("{pid:?} wrote a value that does not fit register {reg} ({width})")]
    WidthViolation { pid: Pid, reg: RegId, width: Width },
    #[error("{pid:?} wrote register {reg} owned by {owner:?}")]
    OwnershipViolation { pid: Pid, reg: RegId, owner: Pid },
    #[error("{pid:?} wrote write-once register {reg} twice")]
    WriteOnceViolation { pid: Pid, reg: RegId },
    #[error("{pid:?} accessed nonexistent register {reg}")]
    UnknownRegister { pid: Pid, reg: RegId },
    #[error("illegal schedule at event {position}: {reason}")]
    IllegalSchedule { position: usize, reason: String },
    #[error("protocol fault in {pid:?}: {fault}")]
    Protocol { pid: Pid, fault: ProtocolFault },
}

/// One entry of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    Step(Pid),
    Crash(Pid),
}

impl Event {
    pub fn pid(self) -> Pid {
        match self {
            Event::Step(p) | Event::Crash(p) => p,
        }
    }
}

pub type Schedule = Vec<Event>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Status<O> {
    Running,
    Decided(O),
    Crashed,
}

pub type Slot<P> =
    SlotOf<<P as ProcessProgram>::State, <P as ProcessProgram>::Value, <P as ProcessProgram>::Output>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SlotOf<S, V, O> {
    pub state: S,
    pub pending: Option<Action<V, O>>,
    pub status: Status<O>,
    /// Shared-memory operations performed so far.
    pub ops: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep<V, O> {
    pub seq: usize,
    pub pid: Pid,
    pub action: Action<V, O>,
    pub observation: Option<Observation<V>>,
    pub post_bank: Vec<Option<V>>,
}

pub struct Trace<P: ProcessProgram> {
    pub schedule: Schedule,
    pub initial_bank: Vec<Option<P::Value>>,
    pub steps: Vec<TraceStep<P::Value, P::Output>>,
    pub slots: Vec<Slot<P>>,
}

impl<P: ProcessProgram> Clone for Trace<P> {
    fn clone(&self) -> Self {
        Trace {
            schedule: self.schedule.clone(),
            initial_bank: self.initial_bank.clone(),
            steps: self.steps.clone(),
            slots: self.slots.clone(),
        }
    }
}

impl<P: ProcessProgram> PartialEq for Trace<P> {
    fn eq(&self, other: &Self) -> bool {
        self.schedule == other.schedule
            && self.initial_bank == other.initial_bank
            && self.steps == other.steps
            && self.slots == other.slots
    }
}

impl<P: ProcessProgram> std::fmt::Debug for Trace<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trace")
            .field("schedule", &self.schedule)
            .field("steps", &self.steps)
            .field("slots", &self.slots)
            .finish()
    }
}

impl<P: ProcessProgram> Trace<P> {
    pub fn pre_bank(&self, i: usize) -> &[Option<P::Value>] {
        if i == 0 {
            &self.initial_bank
        } else {
            &self.steps[i - 1].post_bank
        }
    }

    pub fn post_bank(&self, i: usize) -> &[Option<P::Value>] {
        &self.steps[i].post_bank
    }

    pub fn final_bank(&self) -> &[Option<P::Value>] {
        self.steps.last().map(|s| s.post_bank.as_slice()).unwrap_or(&self.initial_bank)
    }

    pub fn decisions(&self) -> Vec<Option<P::Output>> {
        decisions_of::<P>(&self.slots)
    }

    pub fn final_states(&self) -> Vec<&P::State> {
        self.slots.iter().map(|s| &s.state).collect()
    }

    /// Bit string of the register subset after `at_step` steps (0 = initial memory).
    pub fn register_word(&self, system: &System<P>, at_step: usize, subset: &[RegId]) -> String {
        let bank = if at_step == 0 { &self.initial_bank[..] } else { self.post_bank(at_step - 1) };
        register_word(&system.registers, bank, subset)
    }
}

pub(crate) fn decisions_of<P: ProcessProgram>(slots: &[Slot<P>]) -> Vec<Option<P::Output>> {
    slots
        .iter()
        .map(|s| match &s.status {
            Status::Decided(o) => Some(o.clone()),
            _ => None,
        })
        .collect()
}

/// Apply one atomic action to the memory.
pub fn apply_action<V: RegisterValue, O>(
    specs: &[super::register::RegisterSpec<V>],
    bank: &mut [Option<V>],
    pid: Pid,
    action: &Action<V, O>,
) -> Result<Observation<V>, ExecError> {
    match action {
        Action::Write { reg, value } => {
            let spec = specs.get(*reg).ok_or(ExecError::UnknownRegister { pid, reg: *reg })?;
            if spec.owner != pid {
                return Err(ExecError::OwnershipViolation { pid, reg: *reg, owner: spec.owner });
            }
            if !value.fits(spec.width) {
                return Err(ExecError::WidthViolation { pid, reg: *reg, width: spec.width });
            }
            if spec.write_once && bank[*reg].is_some() {
                return Err(ExecError::WriteOnceViolation { pid, reg: *reg });
            }
            bank[*reg] = Some(value.clone());
            Ok(Observation::Written)
        }
        Action::Read { reg } => {
            let v = bank.get(*reg).ok_or(ExecError::UnknownRegister { pid, reg: *reg })?;
            Ok(Observation::Value(v.clone()))
        }
        Action::Snapshot { regs } => {
            if regs.end > bank.len() {
                return Err(ExecError::UnknownRegister { pid, reg: regs.end - 1 });
            }
            Ok(Observation::Snapshot(bank[regs.clone()].to_vec()))
        }
        Action::Decide(_) | Action::Crash => Ok(Observation::Written),
    }
}

/// An execution in progress: memory, process slots and the schedule so far.
pub struct Execution<'s, P: ProcessProgram> {
    system: &'s System<P>,
    bank: Vec<Option<P::Value>>,
    slots: Vec<Slot<P>>,
    schedule: Schedule,
    crashes: usize,
    record: Option<Vec<TraceStep<P::Value, P::Output>>>,
    seq: usize,
    /// Stand-in states swapped into a slot while its program steps.
    spare: Vec<Option<P::State>>,
}

impl<P: ProcessProgram> Clone for Execution<'_, P> {
    fn clone(&self) -> Self {
        Execution {
            system: self.system,
            bank: self.bank.clone(),
            slots: self.slots.clone(),
            schedule: self.schedule.clone(),
            crashes: self.crashes,
            record: self.record.clone(),
            seq: self.seq,
            spare: self.spare.clone(),
        }
    }
}

impl<'s, P: ProcessProgram> Execution<'s, P> {
    pub fn new(system: &'s System<P>, inputs: &[P::Input]) -> Result<Self, ExecError> {
        Self::build(system, inputs, false)
    }

    /// Same as [`Execution::new`] but keeps a full step log.
    pub fn recording(system: &'s System<P>, inputs: &[P::Input]) -> Result<Self, ExecError> {
        Self::build(system, inputs, true)
    }

    fn build(system: &'s System<P>, inputs: &[P::Input], record: bool) -> Result<Self, ExecError> {
        if inputs.len() != system.n() {
            return Err(ExecError::IllegalSchedule {
                position: 0,
                reason: format!("{} inputs for {} processes", inputs.len(), system.n()),
            });
        }
        let mut exec = Execution {
            system,
            bank: system.initial_bank(),
            slots: Vec::with_capacity(system.n()),
            schedule: Vec::new(),
            crashes: 0,
            record: record.then(Vec::new),
            seq: 0,
            spare: Vec::with_capacity(system.n()),
        };
        for (idx, (prog, input)) in system.programs.iter().zip(inputs).enumerate() {
            let pid = Pid::from_idx(idx);
            let state = prog.init(pid, input);
            exec.slots.push(SlotOf { state: state.clone(), pending: None, status: Status::Running, ops: 0 });
            let old = exec.advance(pid, state, Observation::Start)?;
            exec.spare.push(Some(old));
        }
        Ok(exec)
    }

    /// Feed an observation to the program and install its next action.
    /// Returns the state previously held by the slot.
    fn advance(&mut self, pid: Pid, state: P::State, obs: Observation<P::Value>) -> Result<P::State, ExecError> {
        let prog = &self.system.programs[pid.idx()];
        let (action, state) = prog.step(state, obs).map_err(|fault| ExecError::Protocol { pid, fault })?;
        let slot = &mut self.slots[pid.idx()];
        let old = std::mem::replace(&mut slot.state, state);
        match action {
            Action::Decide(o) => {
                slot.status = Status::Decided(o.clone());
                slot.pending = None;
                self.log(pid, Action::Decide(o), None);
            }
            Action::Crash => {
                slot.status = Status::Crashed;
                slot.pending = None;
                self.log(pid, Action::Crash, None);
            }
            other => slot.pending = Some(other),
        }
        Ok(old)
    }

    fn log(&mut self, pid: Pid, action: Action<P::Value, P::Output>, obs: Option<Observation<P::Value>>) {
        if let Some(rec) = self.record.as_mut() {
            rec.push(TraceStep { seq: self.seq, pid, action, observation: obs, post_bank: self.bank.clone() });
        }
        self.seq += 1;
    }

    pub fn system(&self) -> &'s System<P> {
        self.system
    }

    pub fn bank(&self) -> &[Option<P::Value>] {
        &self.bank
    }

    pub fn slots(&self) -> &[Slot<P>] {
        &self.slots
    }

    pub fn slot(&self, pid: Pid) -> &Slot<P> {
        &self.slots[pid.idx()]
    }

    pub fn schedule(&self) -> &[Event] {
        &self.schedule
    }

    pub fn crashes(&self) -> usize {
        self.crashes
    }

    pub fn pending(&self, pid: Pid) -> Option<&Action<P::Value, P::Output>> {
        self.slots[pid.idx()].pending.as_ref()
    }

    pub fn is_running(&self, pid: Pid) -> bool {
        matches!(self.slots[pid.idx()].status, Status::Running)
    }

    pub fn running(&self) -> impl Iterator<Item = Pid> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.status, Status::Running))
            .map(|(i, _)| Pid::from_idx(i))
    }

    pub fn all_done(&self) -> bool {
        self.slots.iter().all(|s| !matches!(s.status, Status::Running))
    }

    pub fn decisions(&self) -> Vec<Option<P::Output>> {
        decisions_of::<P>(&self.slots)
    }

    /// Decided processes with their final states.
    pub fn outcome(&self) -> Vec<(Pid, P::State, P::Output)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match &s.status {
                Status::Decided(o) => Some((Pid::from_idx(i), s.state.clone(), o.clone())),
                _ => None,
            })
            .collect()
    }

    fn check_alive(&self, pid: Pid, what: &str) -> Result<(), ExecError> {
        let position = self.schedule.len();
        if pid.0 == 0 || pid.0 > self.slots.len() {
            return Err(ExecError::IllegalSchedule { position, reason: format!("no process {pid:?}") });
        }
        match self.slots[pid.idx()].status {
            Status::Running => Ok(()),
            Status::Decided(_) => Err(ExecError::IllegalSchedule {
                position,
                reason: format!("{what} for decided {pid:?}"),
            }),
            Status::Crashed => Err(ExecError::IllegalSchedule {
                position,
                reason: format!("{what} for crashed {pid:?}"),
            }),
        }
    }

    /// Grant one atomic step to `pid`. After an error the execution should be
    /// discarded: the failing process's slot no longer holds its state.
    pub fn step(&mut self, pid: Pid) -> Result<(), ExecError> {
        self.check_alive(pid, "step")?;
        let slot = &mut self.slots[pid.idx()];
        let action = slot.pending.take().expect("running process always has a pending action");
        let obs = apply_action(&self.system.registers, &mut self.bank, pid, &action)?;
        slot.ops += 1;
        let stand_in = self.spare[pid.idx()].take().unwrap_or_else(|| slot.state.clone());
        let state = std::mem::replace(&mut slot.state, stand_in);
        self.schedule.push(Event::Step(pid));
        self.log(pid, action, Some(obs.clone()));
        let old = self.advance(pid, state, obs)?;
        self.spare[pid.idx()] = Some(old);
        Ok(())
    }

    pub fn crash(&mut self, pid: Pid) -> Result<(), ExecError> {
        self.check_alive(pid, "crash")?;
        if let Some(t) = self.system.resiliency {
            if self.crashes >= t {
                return Err(ExecError::IllegalSchedule {
                    position: self.schedule.len(),
                    reason: format!("more than {t} crashes"),
                });
            }
        }
        self.crashes += 1;
        let slot = &mut self.slots[pid.idx()];
        slot.status = Status::Crashed;
        slot.pending = None;
        self.schedule.push(Event::Crash(pid));
        self.log(pid, Action::Crash, None);
        Ok(())
    }

    pub fn apply(&mut self, event: Event) -> Result<(), ExecError> {
        match event {
            Event::Step(p) => self.step(p),
            Event::Crash(p) => self.crash(p),
        }
    }

    /// Consume into a trace. Only recording executions carry steps.
    pub fn into_trace(self) -> Trace<P> {
        Trace {
            schedule: self.schedule,
            initial_bank: self.system.initial_bank(),
            steps: self.record.unwrap_or_default(),
            slots: self.slots,
        }
    }

    /// Hash of the global configuration (memory plus all slots).
    pub fn fingerprint(&self) -> u128 {
        let mut a = DefaultHasher::new();
        let mut b = DefaultHasher::new();
        0xa5u8.hash(&mut b);
        for h in [&mut a, &mut b] {
            self.bank.hash(h);
            self.slots.hash(h);
        }
        ((a.finish() as u128) << 64) | b.finish() as u128
    }
}

/// Run a schedule from the initial configuration and return the full trace.
pub fn run<P: ProcessProgram>(
    system: &System<P>,
    inputs: &[P::Input],
    schedule: &[Event],
) -> Result<Trace<P>, ExecError> {
    let mut exec = Execution::recording(system, inputs)?;
    for &ev in schedule {
        exec.apply(ev)?;
    }
    Ok(exec.into_trace())
}

/// Run by repeatedly asking `pick` for the next event until everyone is done or
/// `max_events` is reached.
pub fn run_with<P: ProcessProgram>(
    system: &System<P>,
    inputs: &[P::Input],
    max_events: usize,
    mut pick: impl FnMut(&Execution<'_, P>) -> Option<Event>,
) -> Result<Trace<P>, ExecError> {
    let mut exec = Execution::recording(system, inputs)?;
    while !exec.all_done() && exec.schedule().len() < max_events {
        match pick(&exec) {
            Some(ev) => exec.apply(ev)?,
            None => break,
        }
    }
    Ok(exec.into_trace())
}
