//! Finite two-process tasks, their solvability conditions, and a universal
//! solver built on the 1-bit agreement protocol.

mod conditions;
mod model;
mod paths;
mod universal;

pub use conditions::{
    adjacent, check_conditions, covering_value, find_restriction, legal_within, OutputGraph, Restriction, Verdict,
};
pub use model::{consensus, discretized_agreement, identity3, show, weak_leader, PartialVector, Task, TaskError, Vector};
pub use paths::{pad_front, PathTable};
pub use universal::{
    check_conformance, pack_cell, universal_system, unpack_cell, ConformanceReport, Coverage, Solver, UniPhase,
    UniState, UniversalProgram, CELL_BITS, CELL_REG, TASK_INPUT_REG,
};
