use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::Range;

use super::register::{Pid, RegId, RegisterSpec, RegisterValue};

/// One atomic operation requested by a process.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action<V, O> {
    Write { reg: RegId, value: V },
    Read { reg: RegId },
    /// Atomic read of a contiguous block of registers.
    Snapshot { regs: Range<RegId> },
    Decide(O),
    Crash,
}

impl<V, O> Action<V, O> {
    pub fn code(&self) -> char {
        match self {
            Action::Write { .. } => 'W',
            Action::Read { .. } => 'R',
            Action::Snapshot { .. } => 'S',
            Action::Decide(_) => 'D',
            Action::Crash => 'C',
        }
    }
}

/// What a process learns from its previous action.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Observation<V> {
    Start,
    Written,
    Value(Option<V>),
    Snapshot(Vec<Option<V>>),
}

impl<V: Clone> Observation<V> {
    pub fn value(&self) -> Option<Option<V>> {
        match self {
            Observation::Value(v) => Some(v.clone()),
            _ => None,
        }
    }
}

/// A bug in a protocol implementation, surfaced while stepping it.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind}: {detail}")]
pub struct ProtocolFault {
    pub kind: &'static str,
    pub detail: String,
}

impl ProtocolFault {
    pub fn new(kind: &'static str, detail: impl Into<String>) -> Self {
        ProtocolFault { kind, detail: detail.into() }
    }

    pub fn unexpected<V: Debug>(obs: &Observation<V>) -> Self {
        ProtocolFault::new("UnexpectedObservation", format!("{obs:?}"))
    }
}

pub type StepResult<P> = Result<
    (
        Action<<P as ProcessProgram>::Value, <P as ProcessProgram>::Output>,
        <P as ProcessProgram>::State,
    ),
    ProtocolFault,
>;

/// A deterministic process state machine.
pub trait ProcessProgram: Send + Sync {
    type Input: Clone + Debug + Send + Sync;
    type State: Clone + Eq + Hash + Debug + Send + Sync;
    type Value: RegisterValue;
    type Output: Clone + Eq + Hash + Debug + Display + Send + Sync;

    fn init(&self, pid: Pid, input: &Self::Input) -> Self::State;

    /// Consume the observation of the previous action and pick the next one.
    fn step(&self, state: Self::State, obs: Observation<Self::Value>) -> StepResult<Self>;
}

/// Programs plus the shared memory layout they run against.
pub struct System<P: ProcessProgram> {
    pub programs: Vec<P>,
    pub registers: Vec<RegisterSpec<P::Value>>,
    /// Maximum number of crash events a schedule may contain.
    pub resiliency: Option<usize>,
}

impl<P: ProcessProgram> System<P> {
    pub fn new(programs: Vec<P>, registers: Vec<RegisterSpec<P::Value>>) -> Self {
        System { programs, registers, resiliency: None }
    }

    pub fn with_resiliency(mut self, t: usize) -> Self {
        self.resiliency = Some(t);
        self
    }

    pub fn n(&self) -> usize {
        self.programs.len()
    }

    pub fn initial_bank(&self) -> Vec<Option<P::Value>> {
        self.registers.iter().map(|s| s.initial.clone()).collect()
    }
}
