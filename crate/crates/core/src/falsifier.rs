//! Counterexample search for approximate agreement with small registers and a
//! crash-tolerant majority.
//!
//! The search runs the first `n - t + 1` processes alone until their decided
//! outputs form a pair of adjacent grid values, remembers what their registers
//! hold at that moment, and looks for two disjoint pairs that leave the same
//! register contents. The remaining processes cannot tell those two runs apart,
//! so whatever they decide clashes with one of them.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::eps2::{AkProgram, AkState, EpsDecision, BIT_REG};
use crate::frac::Frac;
use crate::shmem::{
    register_word, run, Action, Event, ExecError, Execution, Observation, Pid, ProcessProgram, ProtocolFault, RegId,
    RegisterSpec, StepResult, System, Trace, Width,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FalsifyError {
    #[error("need n/2 < t < n, got n={n} t={t}")]
    BadResilience { n: usize, t: usize },
    #[error("unknown candidate protocol {0:?}")]
    UnknownProtocol(String),
    #[error("candidate {name} is defined for n={expected}, not {n}")]
    WrongSize { name: String, expected: usize, n: usize },
    #[error("epsilon must be 1/k for a positive integer k, got {0}")]
    BadEpsilon(Frac),
    #[error("{0} inputs given for {1} processes")]
    BadInputs(usize, usize),
    #[error("no two even slabs share a register word ({witnessed} witnessed, {words} distinct words)")]
    NoCollision { witnessed: usize, words: usize },
    #[error("no extender decided within {0} steps")]
    ExtensionUndecided(usize),
    #[error("slabs {0} and {1} overlap")]
    SlabsOverlap(usize, usize),
    #[error("extenders decided {first} and {second} after the same register contents")]
    Distinguishable { first: Frac, second: Frac },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// `2 (2^s)^(n-t+1) + 1`.
pub fn threshold_k(s: u32, n: usize, t: usize) -> u64 {
    assert!(2 * t > n && t < n, "need n/2 < t < n");
    let exp = s as u64 * (n - t + 1) as u64;
    assert!(exp < 62, "threshold overflows");
    2 * (1u64 << exp) + 1
}

/// The adjacent pair `{l/k, (l+1)/k}`.
pub fn slab_outputs(l: usize, k: usize) -> BTreeSet<Frac> {
    BTreeSet::from([Frac::new(l as i64, k as i64), Frac::new(l as i64 + 1, k as i64)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FalsifyBudget {
    /// Configurations visited while searching for witnesses.
    pub max_executions: u64,
    pub max_extension_steps: usize,
}

impl Default for FalsifyBudget {
    fn default() -> Self {
        FalsifyBudget { max_executions: 1_000_000, max_extension_steps: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputSlab {
    pub index: usize,
    pub outputs: BTreeSet<Frac>,
    /// Schedule of a restricted run deciding exactly `outputs`.
    pub witness: Option<Vec<Event>>,
    /// Contents of the restricted processes' registers when all of them decided.
    pub word: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SlabSearch {
    pub k: usize,
    pub slabs: Vec<OutputSlab>,
    pub explored: u64,
    /// The budget ran out before the restricted runs were covered.
    pub budget_hit: bool,
}

impl SlabSearch {
    pub fn witnessed(&self) -> impl Iterator<Item = &OutputSlab> {
        self.slabs.iter().filter(|s| s.witness.is_some())
    }
}

/// Candidate protocols: every process is one of these.
#[derive(Clone, Debug)]
pub enum CandidateProgram {
    /// A process of the two-process grid protocol.
    Pair(AkProgram),
    /// Same, but writes its decision numerator to `reg` before deciding.
    Announce { ak: AkProgram, reg: RegId },
    /// Reads `regs` once each, then decides `rule` on what it saw.
    Reader { regs: Vec<RegId>, rule: ReaderRule },
    /// Decides a constant without touching memory.
    Fixed(Frac),
}

#[derive(Clone, Debug)]
pub enum ReaderRule {
    /// Concatenate the bits read (first register most significant) and index the table.
    Table(Vec<Frac>),
    /// Take the first announced numerator over `denom`, else 0.
    FirstAnnounced { denom: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CandidateState {
    Pair(AkState),
    Announce { ak: AkState, decided: Option<EpsDecision> },
    Reader { seen: Vec<Option<u64>> },
    Fixed,
}

impl ProcessProgram for CandidateProgram {
    type Input = u8;
    type State = CandidateState;
    type Value = u64;
    type Output = Frac;

    fn init(&self, pid: Pid, input: &u8) -> CandidateState {
        match self {
            CandidateProgram::Pair(p) => CandidateState::Pair(p.init(pid, input)),
            CandidateProgram::Announce { ak, .. } => CandidateState::Announce { ak: ak.init(pid, input), decided: None },
            CandidateProgram::Reader { .. } => CandidateState::Reader { seen: Vec::new() },
            CandidateProgram::Fixed(_) => CandidateState::Fixed,
        }
    }

    fn step(&self, state: CandidateState, obs: Observation<u64>) -> StepResult<Self> {
        match (self, state) {
            (CandidateProgram::Pair(p), CandidateState::Pair(s)) => {
                let (action, s) = p.step(s, obs)?;
                Ok((lift(action), CandidateState::Pair(s)))
            }
            (CandidateProgram::Announce { ak, reg }, CandidateState::Announce { ak: s, decided }) => {
                if let Some(d) = decided {
                    return Ok((Action::Decide(d.value), CandidateState::Announce { ak: s, decided }));
                }
                match ak.step(s, obs)? {
                    (Action::Decide(d), s) => {
                        let denom = 2 * ak.k as i64 + 1;
                        let m = (d.value * Frac::from_int(denom)).numer() as u64;
                        Ok((Action::Write { reg: *reg, value: m }, CandidateState::Announce { ak: s, decided: Some(d) }))
                    }
                    (action, s) => Ok((lift(action), CandidateState::Announce { ak: s, decided: None })),
                }
            }
            (CandidateProgram::Reader { regs, rule }, CandidateState::Reader { mut seen }) => {
                match obs {
                    Observation::Start => {}
                    Observation::Value(v) => seen.push(v),
                    other => return Err(ProtocolFault::unexpected(&other)),
                }
                if seen.len() < regs.len() {
                    let reg = regs[seen.len()];
                    return Ok((Action::Read { reg }, CandidateState::Reader { seen }));
                }
                let out = match rule {
                    ReaderRule::Table(table) => {
                        let idx = seen.iter().fold(0usize, |acc, v| (acc << 1) | (v.unwrap_or(0) & 1) as usize);
                        table[idx]
                    }
                    ReaderRule::FirstAnnounced { denom } => match seen.iter().flatten().next() {
                        Some(&m) => Frac::new(m as i64, *denom),
                        None => Frac::ZERO,
                    },
                };
                Ok((Action::Decide(out), CandidateState::Reader { seen }))
            }
            (CandidateProgram::Fixed(v), CandidateState::Fixed) => Ok((Action::Decide(*v), CandidateState::Fixed)),
            (_, s) => Err(ProtocolFault::new("StateMismatch", format!("{s:?}"))),
        }
    }
}

fn lift(action: Action<u64, EpsDecision>) -> Action<u64, Frac> {
    match action {
        Action::Write { reg, value } => Action::Write { reg, value },
        Action::Read { reg } => Action::Read { reg },
        Action::Snapshot { regs } => Action::Snapshot { regs },
        Action::Decide(d) => Action::Decide(d.value),
        Action::Crash => Action::Crash,
    }
}

/// A candidate protocol plus the register each process is charged for.
pub struct Candidate {
    pub name: String,
    pub system: System<CandidateProgram>,
    /// `word_regs[i]` is the `s`-bit register of process `i + 1`.
    pub word_regs: Vec<RegId>,
    pub s: u32,
}

pub const CANDIDATES: [&str; 3] = ["naive3", "announce3", "fixed"];

/// Build a named candidate for `n` processes tolerating `t` crashes and
/// aiming at `eps`.
pub fn candidate(name: &str, n: usize, t: usize, eps: Frac) -> Result<Candidate, FalsifyError> {
    let k = grid_of(eps)?;
    let need3 = |expected: usize| {
        if n == expected {
            Ok(())
        } else {
            Err(FalsifyError::WrongSize { name: name.to_string(), expected, n })
        }
    };
    let ak_k = (k.saturating_sub(1) / 2).max(1) as u32;
    let pair_regs = || {
        vec![
            RegisterSpec::new("R1", Pid(1), Width::Bits(1)).init(0),
            RegisterSpec::new("R2", Pid(2), Width::Bits(1)).init(0),
            RegisterSpec::new("I1", Pid(1), Width::Bits(1)).write_once(),
            RegisterSpec::new("I2", Pid(2), Width::Bits(1)).write_once(),
        ]
    };
    let (programs, registers, word_regs, s) = match name {
        "naive3" => {
            need3(3)?;
            let table = [0, 1, 2, 3].map(|m| Frac::new(m, 3)).to_vec();
            let mut regs = pair_regs();
            regs.push(RegisterSpec::new("R3", Pid(3), Width::Bits(1)).init(0));
            let programs = vec![
                CandidateProgram::Pair(AkProgram { k: ak_k }),
                CandidateProgram::Pair(AkProgram { k: ak_k }),
                CandidateProgram::Reader { regs: BIT_REG.to_vec(), rule: ReaderRule::Table(table) },
            ];
            (programs, regs, vec![BIT_REG[0], BIT_REG[1], 4], 1)
        }
        "announce3" => {
            need3(3)?;
            let denom = 2 * ak_k as i64 + 1;
            let bits = 64 - (denom as u64).leading_zeros();
            let mut regs = pair_regs();
            regs.push(RegisterSpec::new("S1", Pid(1), Width::Bits(bits)).write_once());
            regs.push(RegisterSpec::new("S2", Pid(2), Width::Bits(bits)).write_once());
            regs.push(RegisterSpec::new("S3", Pid(3), Width::Bits(bits)).write_once());
            let programs = vec![
                CandidateProgram::Announce { ak: AkProgram { k: ak_k }, reg: 4 },
                CandidateProgram::Announce { ak: AkProgram { k: ak_k }, reg: 5 },
                CandidateProgram::Reader { regs: vec![4, 5], rule: ReaderRule::FirstAnnounced { denom } },
            ];
            (programs, regs, vec![4, 5, 6], bits)
        }
        "fixed" => {
            let programs =
                (0..n).map(|i| CandidateProgram::Fixed(Frac::new(i.min(k) as i64, k as i64))).collect();
            let regs = (1..=n).map(|p| RegisterSpec::new(format!("R{p}"), Pid(p), Width::Bits(1)).init(0)).collect();
            (programs, regs, (0..n).collect(), 1)
        }
        other => return Err(FalsifyError::UnknownProtocol(other.to_string())),
    };
    if !(2 * t > n && t < n) {
        return Err(FalsifyError::BadResilience { n, t });
    }
    let system = System::new(programs, registers).with_resiliency(t);
    Ok(Candidate { name: name.to_string(), system, word_regs, s })
}

/// `k` with `eps = 1/k`.
pub fn grid_of(eps: Frac) -> Result<usize, FalsifyError> {
    if eps.numer() != 1 || eps.denom() < 1 {
        return Err(FalsifyError::BadEpsilon(eps));
    }
    Ok(eps.denom() as usize)
}

/// Inputs 0 for p1, 1 for p2 and 0 for everyone else.
pub fn default_inputs(n: usize) -> Vec<u8> {
    (0..n).map(|i| u8::from(i == 1)).collect()
}

/// Explore every run in which only processes `1..=n-t+1` step, keeping one
/// witness per slab.
pub fn find_slab_witnesses(
    cand: &Candidate,
    t: usize,
    k: usize,
    inputs: &[u8],
    budget: &FalsifyBudget,
) -> Result<SlabSearch, FalsifyError> {
    let n = cand.system.n();
    if !(2 * t > n && t < n) {
        return Err(FalsifyError::BadResilience { n, t });
    }
    if inputs.len() != n {
        return Err(FalsifyError::BadInputs(inputs.len(), n));
    }
    let restricted: Vec<Pid> = (1..=n - t + 1).map(Pid).collect();
    let word_regs = &cand.word_regs[..restricted.len()];
    let mut slabs: Vec<OutputSlab> =
        (0..k).map(|l| OutputSlab { index: l, outputs: slab_outputs(l, k), witness: None, word: None }).collect();
    let by_outputs: BTreeMap<BTreeSet<Frac>, usize> = slabs.iter().map(|s| (s.outputs.clone(), s.index)).collect();
    let mut seen = HashSet::new();
    let mut stack = vec![Execution::new(&cand.system, inputs)?];
    let mut explored = 0u64;
    let mut found = 0;
    let mut budget_hit = false;
    while let Some(exec) = stack.pop() {
        if !seen.insert(exec.fingerprint()) {
            continue;
        }
        explored += 1;
        if explored > budget.max_executions {
            budget_hit = true;
            break;
        }
        let live: Vec<Pid> = restricted.iter().copied().filter(|&p| exec.is_running(p)).collect();
        if live.is_empty() {
            let decisions = exec.decisions();
            let outs: BTreeSet<Frac> = restricted.iter().filter_map(|p| decisions[p.idx()]).collect();
            if let Some(&l) = by_outputs.get(&outs) {
                if slabs[l].witness.is_none() {
                    slabs[l].witness = Some(exec.schedule().to_vec());
                    slabs[l].word = Some(register_word(&cand.system.registers, exec.bank(), word_regs));
                    found += 1;
                    if found == k {
                        break;
                    }
                }
            }
            continue;
        }
        for &p in live.iter().rev() {
            let mut next = exec.clone();
            next.step(p)?;
            stack.push(next);
        }
    }
    Ok(SlabSearch { k, slabs, explored, budget_hit })
}

/// Even slabs must be pairwise disjoint.
pub fn check_even_slabs(search: &SlabSearch) -> Result<(), FalsifyError> {
    let evens: Vec<&OutputSlab> = search.witnessed().filter(|s| s.index % 2 == 0).collect();
    for (a, x) in evens.iter().enumerate() {
        for y in &evens[a + 1..] {
            if !x.outputs.is_disjoint(&y.outputs) {
                return Err(FalsifyError::SlabsOverlap(x.index, y.index));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub inputs: Vec<u8>,
    pub schedule: Vec<Event>,
    /// Slab of the prefix that the extender's decision falls outside of.
    pub slab: usize,
    /// The other slab sharing the register word.
    pub twin: usize,
    pub word: String,
    pub decisions: Vec<Option<Frac>>,
    pub crashes: usize,
    pub reason: String,
    pub trace: Trace<CandidateProgram>,
}

/// Why a set of decisions breaks `eps`-agreement, if it does.
pub fn agreement_violation(inputs: &[u8], decisions: &[Option<Frac>], eps: Frac) -> Option<String> {
    let lo = Frac::from_int(*inputs.iter().min()? as i64);
    let hi = Frac::from_int(*inputs.iter().max()? as i64);
    let outs: Vec<(usize, Frac)> = decisions.iter().enumerate().filter_map(|(i, d)| d.map(|d| (i, d))).collect();
    if let Some((i, d)) = outs.iter().find(|(_, d)| *d < lo || *d > hi) {
        return Some(format!("p{} decided {d} outside [{lo}, {hi}]", i + 1));
    }
    for (a, &(i, x)) in outs.iter().enumerate() {
        for &(j, y) in &outs[a + 1..] {
            if x.abs_diff(y) > eps {
                return Some(format!("p{} decided {x} and p{} decided {y}, more than {eps} apart", i + 1, j + 1));
            }
        }
    }
    None
}

/// Run the extenders round-robin after `prefix` until one of them decides.
fn extend(
    cand: &Candidate,
    inputs: &[u8],
    prefix: &[Event],
    extenders: &[Pid],
    max_steps: usize,
) -> Result<(Vec<Event>, Pid, Frac), FalsifyError> {
    let mut exec = Execution::new(&cand.system, inputs)?;
    for &ev in prefix {
        exec.apply(ev)?;
    }
    let mut suffix = Vec::new();
    for _ in 0..max_steps {
        let live: Vec<Pid> = extenders.iter().copied().filter(|&p| exec.is_running(p)).collect();
        if live.is_empty() {
            break;
        }
        let p = live[suffix.len() % live.len()];
        exec.step(p)?;
        suffix.push(Event::Step(p));
        if let Some(d) = exec.decisions()[p.idx()] {
            return Ok((suffix, p, d));
        }
    }
    Err(FalsifyError::ExtensionUndecided(max_steps))
}

/// Replay `prefix` + `suffix`, then crash whoever is still running.
fn replay_suffix<'c>(
    cand: &'c Candidate,
    inputs: &[u8],
    prefix: &[Event],
    suffix: &[Event],
) -> Result<Execution<'c, CandidateProgram>, FalsifyError> {
    let mut exec = Execution::new(&cand.system, inputs)?;
    for &ev in prefix.iter().chain(suffix) {
        exec.apply(ev)?;
    }
    Ok(exec)
}

/// Look for two even slabs with the same word and extend one of them into a
/// violation.
pub fn pigeonhole_and_extend(
    cand: &Candidate,
    search: &SlabSearch,
    t: usize,
    inputs: &[u8],
    eps: Frac,
    budget: &FalsifyBudget,
) -> Result<Option<Counterexample>, FalsifyError> {
    check_even_slabs(search)?;
    let n = cand.system.n();
    let extenders: Vec<Pid> = (n - t + 2..=n).map(Pid).collect();
    let mut groups: BTreeMap<&str, Vec<&OutputSlab>> = BTreeMap::new();
    for s in search.witnessed().filter(|s| s.index % 2 == 0) {
        groups.entry(s.word.as_deref().unwrap_or_default()).or_default().push(s);
    }
    let witnessed: usize = groups.values().map(Vec::len).sum();
    if groups.values().all(|g| g.len() < 2) {
        return Err(FalsifyError::NoCollision { witnessed, words: groups.len() });
    }
    for (word, group) in &groups {
        for (a, first) in group.iter().enumerate() {
            for second in &group[a + 1..] {
                let (e1, e2) = (first.witness.as_ref().unwrap(), second.witness.as_ref().unwrap());
                let (suffix, who, d) = extend(cand, inputs, e1, &extenders, budget.max_extension_steps)?;
                let mut runs = Vec::new();
                for (slab, prefix) in [(first, e1), (second, e2)] {
                    let before = replay_suffix(cand, inputs, prefix, &[])?;
                    if extenders.iter().any(|&p| before.slot(p).ops > 0) {
                        return Err(FalsifyError::Exec(ExecError::IllegalSchedule {
                            position: prefix.len(),
                            reason: "extender stepped inside a witness".into(),
                        }));
                    }
                    let exec = replay_suffix(cand, inputs, prefix, &suffix)?;
                    let got = exec.decisions()[who.idx()].expect("suffix ends with a decision");
                    runs.push((slab, prefix, got));
                }
                if runs[0].2 != runs[1].2 {
                    return Err(FalsifyError::Distinguishable { first: runs[0].2, second: runs[1].2 });
                }
                for (slab, prefix, _) in &runs {
                    if slab.outputs.contains(&d) {
                        continue;
                    }
                    let mut exec = replay_suffix(cand, inputs, prefix, &suffix)?;
                    let leftover: Vec<Pid> = exec.running().collect();
                    for p in leftover {
                        exec.crash(p)?;
                    }
                    let decisions = exec.decisions();
                    let Some(reason) = agreement_violation(inputs, &decisions, eps) else { continue };
                    let schedule = exec.schedule().to_vec();
                    let trace = run(&cand.system, inputs, &schedule)?;
                    let twin = if slab.index == first.index { second.index } else { first.index };
                    return Ok(Some(Counterexample {
                        inputs: inputs.to_vec(),
                        crashes: exec.crashes(),
                        schedule,
                        slab: slab.index,
                        twin,
                        word: word.to_string(),
                        decisions,
                        reason,
                        trace,
                    }));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug)]
pub enum FalsifyOutcome {
    Counterexample(Box<Counterexample>),
    Inconclusive(String),
}

#[derive(Clone, Debug)]
pub struct FalsifyReport {
    pub k: usize,
    pub threshold: u64,
    pub search: SlabSearch,
    pub outcome: FalsifyOutcome,
}

/// Full search on a named candidate.
pub fn falsify(
    name: &str,
    n: usize,
    t: usize,
    eps: Frac,
    inputs: Option<Vec<u8>>,
    budget: &FalsifyBudget,
) -> Result<FalsifyReport, FalsifyError> {
    let cand = candidate(name, n, t, eps)?;
    let k = grid_of(eps)?;
    let inputs = inputs.unwrap_or_else(|| default_inputs(n));
    let search = find_slab_witnesses(&cand, t, k, &inputs, budget)?;
    let threshold = threshold_k(cand.s, n, t);
    let outcome = match pigeonhole_and_extend(&cand, &search, t, &inputs, eps, budget) {
        Ok(Some(cx)) => FalsifyOutcome::Counterexample(Box::new(cx)),
        Ok(None) => FalsifyOutcome::Inconclusive("colliding slabs found but no extension violates agreement".into()),
        Err(e @ (FalsifyError::NoCollision { .. } | FalsifyError::ExtensionUndecided(_))) => {
            let mut msg = e.to_string();
            if search.budget_hit {
                msg.push_str("; witness search budget exhausted");
            }
            FalsifyOutcome::Inconclusive(msg)
        }
        Err(e) => return Err(e),
    };
    Ok(FalsifyReport { k, threshold, search, outcome })
}
