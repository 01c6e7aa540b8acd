//! Two-process approximate agreement over two 1-bit registers.
//!
//! Each process writes its input once, then alternately writes 1, 0, 1, ... into
//! its own bit while watching the other's bit, and leaves the loop as soon as it
//! reads the same value twice. How far it got, plus the two inputs, fixes an output
//! on the grid `m/(2k+1)`.

use std::fmt;
use std::ops::ControlFlow;

use crate::frac::Frac;
use crate::shmem::{
    enumerate_executions, Action, Bounds, ExecError, Observation, Pid, ProcessProgram, ProtocolFault, ProtocolGraph,
    RegId, RegisterSpec, StepResult, System, Width,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AkPhase {
    WriteInput,
    LoopWrite,
    LoopRead,
    ReadOwnInput,
    ReadOtherInput,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoopExit {
    /// Read the same bit twice.
    Break,
    /// Ran all `k` iterations.
    Completed,
}

/// Which return statement produced a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionSite {
    SameOrBot,
    FullK,
    EarlyBreak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EpsDecision {
    pub value: Frac,
    pub site: DecisionSite,
}

impl fmt::Display for EpsDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.value, f)
    }
}

/// One operation the protocol wants next, independent of register layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AkOp {
    WriteInput(u8),
    WriteBit(u8),
    ReadOtherBit,
    ReadOwnInput,
    ReadOtherInput,
    Decide(EpsDecision),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AkState {
    pub k: u32,
    pub me: Pid,
    pub other: Pid,
    pub input: u8,
    pub r: u32,
    pub prec: u8,
    pub new: u8,
    pub x_me: Option<u8>,
    pub x_other: Option<u8>,
    pub phase: AkPhase,
    pub exit: Option<LoopExit>,
}

impl AkState {
    pub fn new(k: u32, me: Pid, input: u8) -> Self {
        assert!(k >= 1, "k must be positive");
        AkState {
            k,
            me,
            other: me.other(),
            input,
            r: 1,
            prec: 0,
            new: 0,
            x_me: None,
            x_other: None,
            phase: AkPhase::WriteInput,
            exit: None,
        }
    }

    /// Loop-exit state without the input observations; distinct processes'
    /// vertices of the protocol graph are keyed by this.
    pub fn loop_key(&self) -> (u32, u8, Option<LoopExit>) {
        (self.r, self.new, self.exit)
    }

    pub fn next_op(&self) -> AkOp {
        match self.phase {
            AkPhase::WriteInput => AkOp::WriteInput(self.input),
            AkPhase::LoopWrite => AkOp::WriteBit((self.r % 2) as u8),
            AkPhase::LoopRead => AkOp::ReadOtherBit,
            AkPhase::ReadOwnInput => AkOp::ReadOwnInput,
            AkPhase::ReadOtherInput => AkOp::ReadOtherInput,
            AkPhase::Done => AkOp::Decide(ak_decide(self)),
        }
    }

    /// Record the result of the operation returned by [`AkState::next_op`].
    /// Writes pass `None`.
    pub fn absorb(&mut self, value: Option<u8>) -> Result<(), ProtocolFault> {
        match self.phase {
            AkPhase::WriteInput => {
                self.phase = AkPhase::LoopWrite;
                self.r = 1;
            }
            AkPhase::LoopWrite => self.phase = AkPhase::LoopRead,
            AkPhase::LoopRead => {
                let bit = value.ok_or_else(|| ProtocolFault::new("UnwrittenBit", "read ⊥ from a bit register"))?;
                self.new = bit;
                if self.new != self.prec {
                    self.prec = self.new;
                    if self.r == self.k {
                        self.exit = Some(LoopExit::Completed);
                        self.phase = AkPhase::ReadOwnInput;
                    } else {
                        self.r += 1;
                        self.phase = AkPhase::LoopWrite;
                    }
                } else {
                    self.exit = Some(LoopExit::Break);
                    self.phase = AkPhase::ReadOwnInput;
                }
            }
            AkPhase::ReadOwnInput => {
                self.x_me = value;
                self.phase = AkPhase::ReadOtherInput;
            }
            AkPhase::ReadOtherInput => {
                self.x_other = value;
                self.phase = AkPhase::Done;
            }
            AkPhase::Done => return Err(ProtocolFault::new("StepAfterDone", "absorb after decision")),
        }
        Ok(())
    }
}

/// The three return statements.
pub fn ak_decide(s: &AkState) -> EpsDecision {
    let k = s.k as i64;
    let denom = 2 * k + 1;
    let x_me = s.x_me.unwrap_or(s.input);
    let x_of = |who: Pid| if who == s.me { x_me } else { s.x_other.unwrap_or(x_me) } as i64;
    match s.x_other {
        None => return EpsDecision { value: Frac::from_int(x_me as i64), site: DecisionSite::SameOrBot },
        Some(x) if x == x_me => {
            return EpsDecision { value: Frac::from_int(x_me as i64), site: DecisionSite::SameOrBot }
        }
        _ => {}
    }
    if s.r == s.k && s.new as u32 == s.k % 2 {
        let who = if s.r % 2 == 0 { s.me } else { s.other };
        let value = Frac::new(x_of(who) + k, denom);
        EpsDecision { value, site: DecisionSite::FullK }
    } else {
        let who = if s.r % 2 == 0 { s.other } else { s.me };
        let x = x_of(who);
        let sign = if x == 0 { 1 } else { -1 };
        let value = Frac::from_int(x) + Frac::new(sign * (s.r as i64 - 1), denom);
        EpsDecision { value, site: DecisionSite::EarlyBreak }
    }
}

/// Protocol-graph outcome of an execution, keyed by [`AkState::loop_key`].
pub fn loop_outcome(
    outcome: &[(Pid, AkState, EpsDecision)],
) -> Vec<(Pid, (u32, u8, Option<LoopExit>), EpsDecision)> {
    outcome.iter().map(|(p, s, d)| (*p, s.loop_key(), *d)).collect()
}

/// Register indices of the standalone layout.
pub const BIT_REG: [RegId; 2] = [0, 1];
pub const INPUT_REG: [RegId; 2] = [2, 3];

/// One process of `A_k` over the standalone layout: two 1-bit registers plus two
/// write-once input registers.
#[derive(Clone, Debug)]
pub struct AkProgram {
    pub k: u32,
}

impl ProcessProgram for AkProgram {
    type Input = u8;
    type State = AkState;
    type Value = u64;
    type Output = EpsDecision;

    fn init(&self, pid: Pid, input: &u8) -> AkState {
        AkState::new(self.k, pid, *input)
    }

    fn step(&self, mut state: AkState, obs: Observation<u64>) -> StepResult<Self> {
        match obs {
            Observation::Start => {}
            Observation::Written => state.absorb(None)?,
            Observation::Value(v) => state.absorb(v.map(|w| w as u8))?,
            other => return Err(ProtocolFault::unexpected(&other)),
        }
        let me = state.me.idx();
        let other = state.other.idx();
        let action = match state.next_op() {
            AkOp::WriteInput(x) => Action::Write { reg: INPUT_REG[me], value: x as u64 },
            AkOp::WriteBit(b) => Action::Write { reg: BIT_REG[me], value: b as u64 },
            AkOp::ReadOtherBit => Action::Read { reg: BIT_REG[other] },
            AkOp::ReadOwnInput => Action::Read { reg: INPUT_REG[me] },
            AkOp::ReadOtherInput => Action::Read { reg: INPUT_REG[other] },
            AkOp::Decide(d) => Action::Decide(d),
        };
        Ok((action, state))
    }
}

/// Both processes of `A_k` with their memory.
pub fn ak_system(k: u32) -> System<AkProgram> {
    let registers = vec![
        RegisterSpec::new("R1", Pid(1), Width::Bits(1)).init(0),
        RegisterSpec::new("R2", Pid(2), Width::Bits(1)).init(0),
        RegisterSpec::new("I1", Pid(1), Width::Bits(1)).write_once(),
        RegisterSpec::new("I2", Pid(2), Width::Bits(1)).write_once(),
    ];
    System::new(vec![AkProgram { k }, AkProgram { k }], registers)
}

/// Upper bound on register operations per process.
pub fn step_bound(k: u32) -> usize {
    2 * k as usize + 3
}

/// Smallest `k` with `1/(2k+1) <= eps`.
pub fn k_for_epsilon(eps: Frac) -> u32 {
    assert!(eps > Frac::ZERO, "epsilon must be positive");
    let mut k = 1;
    while Frac::new(1, 2 * k as i64 + 1) > eps {
        k += 1;
    }
    k
}

/// Violations of the structural facts about final loop counters, for one
/// execution in which both processes decided.
pub fn pair_lemma_violations(a: &AkState, b: &AkState) -> Vec<String> {
    let mut out = Vec::new();
    if a.r.abs_diff(b.r) > 1 {
        out.push(format!("round gap: r1={} r2={}", a.r, b.r));
    }
    if a.r == b.r && a.r != a.k {
        out.push(format!("equal exit below k: r={}", a.r));
    }
    if a.exit == Some(LoopExit::Break) && b.exit == Some(LoopExit::Break) && a.r == b.r {
        out.push(format!("both broke in iteration {}", a.r));
    }
    out
}

/// A process that decided 0 or 1 must have had that input.
pub fn boundary_violation(s: &AkState, d: &EpsDecision) -> Option<String> {
    let v = d.value;
    ((v == Frac::ZERO || v == Frac::ONE) && v != Frac::from_int(s.input as i64))
        .then(|| format!("{:?} decided {} with input {}", s.me, v, s.input))
}

/// What an exhaustive run of `A_k` on one input pair found.
#[derive(Clone, Debug)]
pub struct EpsSummary {
    pub executions: u64,
    /// Executions in which both processes decided.
    pub complete: u64,
    pub max_gap: Frac,
    pub max_ops: usize,
    pub violations: Vec<String>,
    pub graph: ProtocolGraph<(u32, u8, Option<LoopExit>), EpsDecision>,
}

/// Enumerate every schedule with at most `max_crashes` crashes and check
/// validity, the grid gap, the step bound and the loop-counter facts.
pub fn exhaustive_summary(k: u32, inputs: [u8; 2], max_crashes: usize) -> Result<EpsSummary, ExecError> {
    let sys = ak_system(k);
    let gap = Frac::new(1, 2 * k as i64 + 1);
    let lo = Frac::from_int(inputs[0].min(inputs[1]) as i64);
    let hi = Frac::from_int(inputs[0].max(inputs[1]) as i64);
    let mut sum = EpsSummary {
        executions: 0,
        complete: 0,
        max_gap: Frac::ZERO,
        max_ops: 0,
        violations: Vec::new(),
        graph: ProtocolGraph::new(),
    };
    enumerate_executions(&sys, &inputs, Bounds::new(usize::MAX, max_crashes), |leaf| {
        sum.executions += 1;
        let outcome = leaf.exec.outcome();
        for (p, s, d) in &outcome {
            if d.value < lo || d.value > hi {
                sum.violations.push(format!("{p:?} decided {} outside [{lo}, {hi}]", d.value));
            }
            sum.violations.extend(boundary_violation(s, d));
        }
        for s in leaf.exec.slots() {
            sum.max_ops = sum.max_ops.max(s.ops);
        }
        if let [(_, a, da), (_, b, db)] = &outcome[..] {
            sum.complete += 1;
            sum.max_gap = sum.max_gap.max(da.value.abs_diff(db.value));
            sum.violations.extend(pair_lemma_violations(a, b));
            sum.graph.add_outcome(&loop_outcome(&outcome));
        }
        ControlFlow::Continue(())
    })?;
    if sum.max_gap > gap {
        sum.violations.push(format!("gap {} exceeds {gap}", sum.max_gap));
    }
    if sum.max_ops > step_bound(k) {
        sum.violations.push(format!("{} operations exceed {}", sum.max_ops, step_bound(k)));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shmem::{run, Event};

    fn done(k: u32, me: u32, r: u32, new: u8, x_me: u8, x_other: Option<u8>) -> AkState {
        let mut s = AkState::new(k, Pid(me as usize), x_me);
        s.r = r;
        s.new = new;
        s.prec = new;
        s.x_me = Some(x_me);
        s.x_other = x_other;
        s.phase = AkPhase::Done;
        s
    }

    #[test]
    fn early_break_values() {
        // r=3 odd, who=me; new equal to prec but not k mod 2 path
        let d = ak_decide(&done(4, 1, 3, 1, 0, Some(1)));
        assert_eq!(d.value, Frac::new(2, 9));
        assert_eq!(d.site, DecisionSite::EarlyBreak);
        let d = ak_decide(&done(4, 1, 3, 1, 1, Some(0)));
        assert_eq!(d.value, Frac::new(7, 9));
    }

    #[test]
    fn solo_and_equal() {
        assert_eq!(ak_decide(&done(3, 2, 1, 0, 1, None)).value, Frac::ONE);
        let d = ak_decide(&done(3, 2, 2, 0, 0, Some(0)));
        assert_eq!((d.value, d.site), (Frac::ZERO, DecisionSite::SameOrBot));
    }

    #[test]
    fn lockstep_k1() {
        let sys = ak_system(1);
        let p1 = Event::Step(Pid(1));
        let p2 = Event::Step(Pid(2));
        let sched = [p1, p2, p1, p2, p1, p2, p1, p1, p2, p2];
        let t = run(&sys, &[0, 1], &sched).unwrap();
        let d: Vec<_> = t.decisions().into_iter().map(|d| d.unwrap().value).collect();
        assert_eq!(d, vec![Frac::new(2, 3), Frac::new(1, 3)]);
    }

    #[test]
    fn solo_run_decides_own_input() {
        let sys = ak_system(1);
        let sched = vec![Event::Step(Pid(1)); 5];
        let t = run(&sys, &[0, 1], &sched).unwrap();
        assert_eq!(t.decisions()[0].map(|d| d.value), Some(Frac::ZERO));
        assert!(t.decisions()[1].is_none());
    }

    #[test]
    fn k_for_eps() {
        assert_eq!(k_for_epsilon(Frac::new(1, 9)), 4);
        assert_eq!(k_for_epsilon(Frac::new(1, 8)), 4);
        assert_eq!(k_for_epsilon(Frac::new(1, 3)), 1);
    }
}
