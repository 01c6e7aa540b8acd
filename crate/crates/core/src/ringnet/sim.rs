use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::codec::bytes_to_bits;
use super::node::{register_bits, ring_system, Delivery, NodeInput, RingNode};
use super::topology::{augmented_ring, RingError};
use crate::shmem::{ExecError, Execution, Pid, Trace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SendSpec {
    pub src: usize,
    pub dst: usize,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RingConfig {
    pub n: usize,
    pub t: usize,
    /// Nodes crashed before anything happens.
    pub crashed: Vec<usize>,
    pub sends: Vec<SendSpec>,
    pub seed: u64,
    pub max_steps: usize,
    pub record: bool,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum RingRunError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Received {
    pub src: usize,
    pub dst: usize,
    pub seq: u32,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RingReport {
    pub delivered: Vec<Received>,
    /// Messages between surviving nodes that never arrived.
    pub missing: Vec<SendSpec>,
    /// Deliveries out of send order, duplicated, or altered.
    pub fifo_violations: Vec<String>,
    pub duplicates_suppressed: u64,
    pub steps: usize,
    pub register_bits: u32,
    pub trace: Option<Trace<RingNode>>,
}

impl RingReport {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.fifo_violations.is_empty()
    }
}

/// Messages expected at each surviving destination, per source, in send order.
fn expectations(cfg: &RingConfig, dead: &BTreeSet<usize>) -> BTreeMap<(usize, usize), Vec<Vec<bool>>> {
    let mut exp: BTreeMap<(usize, usize), Vec<Vec<bool>>> = BTreeMap::new();
    for s in &cfg.sends {
        if !dead.contains(&s.src) && !dead.contains(&s.dst) {
            exp.entry((s.src, s.dst)).or_default().push(bytes_to_bits(&s.payload));
        }
    }
    exp
}

fn all_arrived(exec: &Execution<'_, RingNode>, exp: &BTreeMap<(usize, usize), Vec<Vec<bool>>>) -> bool {
    exp.iter().all(|(&(src, dst), msgs)| {
        exec.slot(Pid(dst)).state.delivered.iter().filter(|d| d.src == src).count() >= msgs.len()
    })
}

/// Run the ring under a seeded uniformly random scheduler until every message
/// between survivors is delivered or the step budget runs out.
pub fn run_ring(cfg: &RingConfig) -> Result<RingReport, RingRunError> {
    let topo = augmented_ring(cfg.n, cfg.t)?;
    let dead: BTreeSet<usize> = cfg.crashed.iter().copied().collect();
    if let Some(&bad) = dead.iter().chain(cfg.sends.iter().flat_map(|s| [&s.src, &s.dst])).find(|&&v| v == 0 || v > cfg.n) {
        return Err(RingError::BadNode(bad).into());
    }
    if dead.len() > cfg.t {
        return Err(RingError::TooManyCrashes(dead.len()).into());
    }
    if let Some(s) = cfg.sends.iter().find(|s| s.src == s.dst) {
        return Err(RingError::SelfSend(s.src).into());
    }
    let sys = ring_system(topo);
    let mut inputs = vec![NodeInput::default(); cfg.n];
    for s in &cfg.sends {
        inputs[s.src - 1].sends.push((s.dst, bytes_to_bits(&s.payload)));
    }
    let mut exec = if cfg.record { Execution::recording(&sys, &inputs)? } else { Execution::new(&sys, &inputs)? };
    for &v in &dead {
        exec.crash(Pid(v))?;
    }
    let exp = expectations(cfg, &dead);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let live: Vec<Pid> = exec.running().collect();
    let mut steps = 0;
    while steps < cfg.max_steps && !all_arrived(&exec, &exp) {
        let p = live[rng.gen_range(0..live.len())];
        exec.step(p)?;
        steps += 1;
    }
    let mut delivered = Vec::new();
    let mut fifo_violations = Vec::new();
    let mut missing = Vec::new();
    let mut duplicates_suppressed = 0;
    for dst in 1..=cfg.n {
        let st = &exec.slot(Pid(dst)).state;
        duplicates_suppressed += st.duplicates;
        let mut per_src: BTreeMap<usize, Vec<&Delivery>> = BTreeMap::new();
        for d in &st.delivered {
            per_src.entry(d.src).or_default().push(d);
            delivered.push(Received { src: d.src, dst, seq: d.seq, payload: super::codec::bits_to_bytes(&d.payload) });
        }
        for (src, ds) in per_src {
            let want = exp.get(&(src, dst)).cloned().unwrap_or_default();
            for (i, d) in ds.iter().enumerate() {
                if d.seq as usize != i || want.get(i) != Some(&d.payload) {
                    fifo_violations.push(format!("{src}->{dst}: delivery {i} is seq {} with unexpected content", d.seq));
                }
            }
        }
    }
    for ((src, dst), msgs) in &exp {
        let got = exec.slot(Pid(*dst)).state.delivered.iter().filter(|d| d.src == *src).count();
        let bytes: Vec<&SendSpec> = cfg.sends.iter().filter(|s| s.src == *src && s.dst == *dst).collect();
        for s in bytes.into_iter().skip(got).take(msgs.len().saturating_sub(got)) {
            missing.push(s.clone());
        }
    }
    let trace = cfg.record.then(|| exec.into_trace());
    Ok(RingReport {
        delivered,
        missing,
        fifo_violations,
        duplicates_suppressed,
        steps,
        register_bits: register_bits(cfg.t),
        trace,
    })
}

/// Random traffic among the survivors: `pairs` ordered pairs, each sending
/// `per_pair` one-byte messages.
pub fn random_sends(n: usize, dead: &BTreeSet<usize>, pairs: usize, per_pair: usize, seed: u64) -> Vec<SendSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let alive: Vec<usize> = (1..=n).filter(|v| !dead.contains(v)).collect();
    let mut out = Vec::new();
    for _ in 0..pairs {
        let src = alive[rng.gen_range(0..alive.len())];
        let mut dst = src;
        while dst == src {
            dst = alive[rng.gen_range(0..alive.len())];
        }
        for _ in 0..per_pair {
            out.push(SendSpec { src, dst, payload: vec![rng.gen()] });
        }
    }
    out
}
