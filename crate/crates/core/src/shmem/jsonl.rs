use serde::Serialize;

use super::exec::Trace;
use super::program::{Action, Observation, ProcessProgram};
use super::register::RegisterValue;

#[derive(Serialize)]
struct Line {
    seq: usize,
    pid: usize,
    act: char,
    reg: Option<usize>,
    val: Option<u64>,
}

/// One JSON object per step: `{"seq","pid","act","reg","val"}`.
///
/// Writes carry the written word, reads the word read (`null` for unwritten),
/// snapshots their first register. Decide and crash lines have `reg: null`.
pub fn trace_to_jsonl<P: ProcessProgram>(trace: &Trace<P>) -> String {
    let mut out = String::new();
    for step in &trace.steps {
        let (reg, val) = match (&step.action, &step.observation) {
            (Action::Write { reg, value }, _) => (Some(*reg), value.word()),
            (Action::Read { reg }, Some(Observation::Value(v))) => {
                (Some(*reg), v.as_ref().and_then(RegisterValue::word))
            }
            (Action::Read { reg }, _) => (Some(*reg), None),
            (Action::Snapshot { regs }, _) => (Some(regs.start), None),
            _ => (None, None),
        };
        let line = Line { seq: step.seq, pid: step.pid.0, act: step.action.code(), reg, val };
        out.push_str(&serde_json::to_string(&line).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}
