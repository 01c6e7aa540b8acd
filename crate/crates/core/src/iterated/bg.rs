use super::view::WordVec;
use crate::shmem::{Action, Observation, Pid, ProcessProgram, ProtocolFault, RegisterSpec, StepResult, System, Width};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BgPhase {
    Write,
    Read { next: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BgState {
    pub me: Pid,
    pub input: u64,
    /// Current iteration, 1-based.
    pub iter: usize,
    pub phase: BgPhase,
    pub collected: Vec<Option<u64>>,
    pub snapshot: Vec<Option<u64>>,
    /// Iteration in which the snapshot was frozen.
    pub got_at: Option<usize>,
}

impl BgState {
    pub fn done(&self) -> bool {
        self.got_at.is_some()
    }
}

/// Register word for the pair (input, has-snapshot).
pub fn pack(x: u64, done: bool) -> u64 {
    x * 2 + done as u64
}

pub fn unpack(w: u64) -> (u64, bool) {
    (w / 2, w & 1 == 1)
}

/// Snapshot built from `n` write/collect iterations on fresh memories.
#[derive(Clone, Debug)]
pub struct BgSnapshot {
    pub n: usize,
}

impl BgSnapshot {
    fn base(&self, iter: usize) -> usize {
        (iter - 1) * self.n
    }

    fn write(&self, mut s: BgState) -> StepResult<Self> {
        if s.iter > self.n {
            let out = WordVec(s.snapshot.clone());
            return Ok((Action::Decide(out), s));
        }
        s.phase = BgPhase::Write;
        let reg = self.base(s.iter) + s.me.idx();
        Ok((Action::Write { reg, value: pack(s.input, s.done()) }, s))
    }

    fn end_iteration(&self, mut s: BgState) -> StepResult<Self> {
        let fresh: Vec<Option<u64>> = s
            .collected
            .iter()
            .map(|w| w.and_then(|w| match unpack(w) {
                (x, false) => Some(x),
                _ => None,
            }))
            .collect();
        let count = fresh.iter().filter(|e| e.is_some()).count();
        if !s.done() && count == self.n + 1 - s.iter {
            s.snapshot = fresh;
            s.got_at = Some(s.iter);
        }
        s.collected.clear();
        s.iter += 1;
        self.write(s)
    }
}

impl ProcessProgram for BgSnapshot {
    type Input = u64;
    type State = BgState;
    type Value = u64;
    type Output = WordVec;

    fn init(&self, pid: Pid, input: &u64) -> BgState {
        BgState {
            me: pid,
            input: *input,
            iter: 1,
            phase: BgPhase::Write,
            collected: Vec::with_capacity(self.n),
            snapshot: vec![None; self.n],
            got_at: None,
        }
    }

    fn step(&self, mut s: BgState, obs: Observation<u64>) -> StepResult<Self> {
        match (s.phase, obs) {
            (_, Observation::Start) => self.write(s),
            (BgPhase::Write, Observation::Written) => {
                s.phase = BgPhase::Read { next: 0 };
                Ok((Action::Read { reg: self.base(s.iter) }, s))
            }
            (BgPhase::Read { next }, Observation::Value(v)) => {
                s.collected.push(v);
                if next + 1 == self.n {
                    self.end_iteration(s)
                } else {
                    s.phase = BgPhase::Read { next: next + 1 };
                    Ok((Action::Read { reg: self.base(s.iter) + next + 1 }, s))
                }
            }
            (_, obs) => Err(ProtocolFault::unexpected(&obs)),
        }
    }
}

/// `n` processes and `n` fresh arrays of `n` write-once cells.
pub fn bg_system(n: usize) -> System<BgSnapshot> {
    let mut registers = Vec::with_capacity(n * n);
    for it in 1..=n {
        for j in 1..=n {
            registers.push(RegisterSpec::new(format!("M{it}[{j}]"), Pid(j), Width::Unbounded).write_once());
        }
    }
    System::new(vec![BgSnapshot { n }; n], registers)
}

/// Snapshot properties over the outputs of processes that finished.
/// Returns a description of the first violation.
pub fn check_snapshots(inputs: &[u64], outputs: &[Option<(WordVec, Option<usize>)>]) -> Option<String> {
    use super::view::below_or_equal;
    for (i, o) in outputs.iter().enumerate() {
        let Some((s, _)) = o else { continue };
        for (j, e) in s.0.iter().enumerate() {
            if let Some(v) = e {
                if *v != inputs[j] {
                    return Some(format!("p{} holds {v} for p{}", i + 1, j + 1));
                }
            }
        }
        if s.0[i].is_none() {
            return Some(format!("p{} misses its own value in {s}", i + 1));
        }
    }
    for (i, a) in outputs.iter().enumerate() {
        for (j, b) in outputs.iter().enumerate().skip(i + 1) {
            let (Some((sa, ga)), Some((sb, gb))) = (a, b) else { continue };
            if !below_or_equal(&sa.0, &sb.0) && !below_or_equal(&sb.0, &sa.0) {
                return Some(format!("p{} and p{} are incomparable: {sa} {sb}", i + 1, j + 1));
            }
            if ga == gb && sa != sb {
                return Some(format!("p{} and p{} differ in the same iteration: {sa} {sb}", i + 1, j + 1));
            }
            if let (Some(ga), Some(gb)) = (ga, gb) {
                let later_smaller = if ga < gb { below_or_equal(&sb.0, &sa.0) } else { below_or_equal(&sa.0, &sb.0) };
                if ga != gb && !later_smaller {
                    return Some(format!("later snapshot not smaller: {sa} {sb}"));
                }
            }
        }
    }
    None
}
