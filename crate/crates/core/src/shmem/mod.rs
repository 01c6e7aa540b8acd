//! Atomic-step semantics for single-writer registers, crash faults, schedules,
//! traces and exploration.

mod exec;
mod explore;
mod graph;
mod jsonl;
mod program;
mod register;

pub use exec::{apply_action, run, run_with, Event, ExecError, Execution, Schedule, Slot, SlotOf, Status, Trace, TraceStep};
pub use explore::{enumerate_executions, explore_states, is_complete, run_random, Bounds, EnumSummary, ExploreSummary, Leaf};
pub use graph::{state_hash, ProtocolGraph};
pub use jsonl::trace_to_jsonl;
pub use program::{Action, Observation, ProcessProgram, ProtocolFault, StepResult, System};
pub use register::{register_word, Pid, RegId, RegisterSpec, RegisterValue, Width};
