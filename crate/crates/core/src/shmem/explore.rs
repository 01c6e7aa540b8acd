use std::collections::HashSet;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::exec::{run_with, Event, ExecError, Execution, Status, Trace};
use super::program::{ProcessProgram, System};
use super::register::Pid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    /// Maximum number of step grants in one execution.
    pub max_steps: usize,
    pub max_crashes: usize,
    /// Maximum shared-memory operations per process; `None` means `4 * n * max_steps`.
    pub loop_cap: Option<usize>,
    /// Stop after this many maximal executions.
    pub budget: Option<u64>,
}

impl Bounds {
    pub fn new(max_steps: usize, max_crashes: usize) -> Self {
        Bounds { max_steps, max_crashes, loop_cap: None, budget: None }
    }

    pub fn loop_cap(mut self, cap: usize) -> Self {
        self.loop_cap = Some(cap);
        self
    }

    pub fn budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    fn cap(&self, n: usize) -> usize {
        self.loop_cap.unwrap_or(self.max_steps.saturating_mul(4 * n))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnumSummary {
    /// Maximal executions reported to the visitor.
    pub executions: u64,
    /// Of which cut short by a bound.
    pub truncated: u64,
    /// The budget ran out (or the visitor stopped) before the tree was covered.
    pub budget_exhausted: bool,
}

/// A leaf of the enumeration tree.
pub struct Leaf<'a, 's, P: ProcessProgram> {
    pub exec: &'a Execution<'s, P>,
    pub inputs: &'a [P::Input],
    /// Some process was stopped by `max_steps` or the loop cap.
    pub truncated: bool,
}

impl<P: ProcessProgram> Leaf<'_, '_, P> {
    /// Replay the leaf's schedule with full step recording.
    pub fn trace(&self) -> Trace<P> {
        super::exec::run(self.exec.system(), self.inputs, self.exec.schedule())
            .expect("replay of an enumerated schedule")
    }
}

/// Depth-first enumeration of every maximal schedule within `bounds`.
///
/// Each distinct execution is produced once: a crash of `p` is only placed right
/// after `p`'s own last step, or at the very start in ascending pid order.
pub fn enumerate_executions<P, F>(
    system: &System<P>,
    inputs: &[P::Input],
    bounds: Bounds,
    mut visit: F,
) -> Result<EnumSummary, ExecError>
where
    P: ProcessProgram,
    F: FnMut(&Leaf<'_, '_, P>) -> ControlFlow<()>,
{
    let root = Execution::new(system, inputs)?;
    let mut summary = EnumSummary::default();
    let cap = bounds.cap(system.n());
    let mut stack = vec![root];
    while let Some(exec) = stack.pop() {
        let steps = exec.schedule().iter().filter(|e| matches!(e, Event::Step(_))).count();
        let movable: Vec<Pid> = exec.running().filter(|&p| exec.slot(p).ops < cap).collect();
        let blocked = exec.running().count() > movable.len();
        if movable.is_empty() || steps >= bounds.max_steps {
            let truncated = blocked || !movable.is_empty();
            summary.executions += 1;
            summary.truncated += truncated as u64;
            let leaf = Leaf { exec: &exec, inputs, truncated };
            if visit(&leaf).is_break() {
                summary.budget_exhausted = true;
                return Ok(summary);
            }
            if bounds.budget.is_some_and(|b| summary.executions >= b) && !stack.is_empty() {
                summary.budget_exhausted = true;
                return Ok(summary);
            }
            continue;
        }
        let mut children = Vec::new();
        for &p in &movable {
            let mut child = exec.clone();
            child.step(p)?;
            children.push(child);
        }
        if exec.crashes() < bounds.max_crashes {
            for p in exec.running() {
                if crash_is_canonical(&exec, p) {
                    let mut child = exec.clone();
                    child.crash(p)?;
                    children.push(child);
                }
            }
        }
        // Reverse so that the first child is explored first.
        stack.extend(children.into_iter().rev());
    }
    Ok(summary)
}

fn crash_is_canonical<P: ProcessProgram>(exec: &Execution<'_, P>, p: Pid) -> bool {
    let sched = exec.schedule();
    match sched.last() {
        Some(Event::Step(q)) if *q == p => true,
        _ => {
            exec.slot(p).ops == 0
                && sched.iter().all(|e| matches!(e, Event::Crash(q) if *q < p))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExploreSummary {
    pub states: u64,
    pub terminals: u64,
    pub truncated: u64,
}

/// Explore every reachable global configuration once, reporting each distinct
/// terminal configuration (nobody running, or a bound hit) to `visit`.
///
/// Much cheaper than [`enumerate_executions`] when many interleavings commute;
/// the reported schedule is one witness among those reaching the configuration.
pub fn explore_states<P, F>(
    system: &System<P>,
    inputs: &[P::Input],
    bounds: Bounds,
    mut visit: F,
) -> Result<ExploreSummary, ExecError>
where
    P: ProcessProgram,
    F: FnMut(&Leaf<'_, '_, P>) -> ControlFlow<()>,
{
    let root = Execution::new(system, inputs)?;
    let cap = bounds.cap(system.n());
    let mut seen: HashSet<u128> = HashSet::new();
    let mut summary = ExploreSummary::default();
    seen.insert(root.fingerprint());
    let mut stack = vec![root];
    while let Some(exec) = stack.pop() {
        summary.states += 1;
        let steps = exec.schedule().iter().filter(|e| matches!(e, Event::Step(_))).count();
        let movable: Vec<Pid> = exec.running().filter(|&p| exec.slot(p).ops < cap).collect();
        if movable.is_empty() || steps >= bounds.max_steps {
            let truncated = exec.running().next().is_some();
            summary.terminals += 1;
            summary.truncated += truncated as u64;
            if visit(&Leaf { exec: &exec, inputs, truncated }).is_break() {
                return Ok(summary);
            }
            if bounds.budget.is_some_and(|b| summary.states >= b) {
                return Ok(summary);
            }
            continue;
        }
        for &p in &movable {
            let mut child = exec.clone();
            child.step(p)?;
            if seen.insert(child.fingerprint()) {
                stack.push(child);
            }
        }
        if exec.crashes() < bounds.max_crashes {
            for p in movable {
                let mut child = exec.clone();
                child.crash(p)?;
                if seen.insert(child.fingerprint()) {
                    stack.push(child);
                }
            }
        }
    }
    Ok(summary)
}

/// Run with a seeded scheduler that picks a running process uniformly at random.
pub fn run_random<P: ProcessProgram>(
    system: &System<P>,
    inputs: &[P::Input],
    seed: u64,
    max_events: usize,
) -> Result<Trace<P>, ExecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_with(system, inputs, max_events, |e| {
        let live: Vec<Pid> = e.running().collect();
        live.choose(&mut rng).map(|&p| Event::Step(p))
    })
}

/// True if every process either decided or crashed.
pub fn is_complete<P: ProcessProgram>(exec: &Execution<'_, P>) -> bool {
    exec.slots().iter().all(|s| !matches!(s.status, Status::Running))
}
