//! Exhaustive checks of the two-process 1-bit agreement protocol against an
//! independent interpreter written straight from the pseudocode.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use boundreg::eps2::{ak_system, loop_outcome, pair_lemma_violations, step_bound, AkProgram};
use boundreg::frac::Frac;
use boundreg::shmem::{enumerate_executions, run, Bounds, Event, Pid, ProtocolGraph};
use proptest::prelude::*;

/// Straight-line interpreter: program counter based, no shared code with the crate.
#[derive(Clone, Debug)]
struct Oracle {
    k: i64,
    me: usize,
    input: i64,
    pc: u8, // 0 write input, 1 write bit, 2 read bit, 3 read own, 4 read other, 5 done
    r: i64,
    prec: i64,
    new: i64,
    xm: i64,
    xo: Option<i64>,
}

#[derive(Clone, Debug)]
struct Mem {
    bits: [i64; 2],
    inputs: [Option<i64>; 2],
}

impl Oracle {
    fn new(k: i64, me: usize, input: i64) -> Self {
        Oracle { k, me, input, pc: 0, r: 1, prec: 0, new: 0, xm: -1, xo: None }
    }

    fn step(&mut self, m: &mut Mem) {
        let o = 1 - self.me;
        match self.pc {
            0 => {
                m.inputs[self.me] = Some(self.input);
                self.pc = 1;
            }
            1 => {
                m.bits[self.me] = self.r % 2;
                self.pc = 2;
            }
            2 => {
                self.new = m.bits[o];
                if self.new != self.prec {
                    self.prec = self.new;
                    if self.r < self.k {
                        self.r += 1;
                        self.pc = 1;
                    } else {
                        self.pc = 3;
                    }
                } else {
                    self.pc = 3;
                }
            }
            3 => {
                self.xm = m.inputs[self.me].unwrap();
                self.pc = 4;
            }
            4 => {
                self.xo = m.inputs[o];
                self.pc = 5;
            }
            _ => unreachable!(),
        }
    }

    /// Output as (numerator, denominator) with denominator 2k+1.
    fn output(&self) -> Frac {
        let d = 2 * self.k + 1;
        let xo = match self.xo {
            None => return Frac::from_int(self.xm),
            Some(x) if x == self.xm => return Frac::from_int(self.xm),
            Some(x) => x,
        };
        let x = |who_is_me: bool| if who_is_me { self.xm } else { xo };
        if self.r == self.k && self.new == self.k % 2 {
            Frac::new(x(self.r % 2 == 0) + self.k, d)
        } else {
            let xw = x(self.r % 2 != 0);
            let sign = if xw == 0 { 1 } else { -1 };
            Frac::new(xw * d + sign * (self.r - 1), d)
        }
    }
}

/// Counts step sequences with at most `crashes` undecided processes at the end,
/// and collects the decision pairs of complete ones.
fn oracle_count(k: i64, inputs: [i64; 2], crashes: usize) -> (u64, BTreeSet<(Frac, Frac)>) {
    fn go(ps: [Oracle; 2], m: Mem, crashes: usize, n: &mut u64, pairs: &mut BTreeSet<(Frac, Frac)>) {
        let undecided = ps.iter().filter(|p| p.pc != 5).count();
        if undecided <= crashes {
            *n += 1;
        }
        if undecided == 0 {
            pairs.insert((ps[0].output(), ps[1].output()));
        }
        for i in 0..2 {
            if ps[i].pc != 5 {
                let mut ps2 = ps.clone();
                let mut m2 = m.clone();
                ps2[i].step(&mut m2);
                go(ps2, m2, crashes, n, pairs);
            }
        }
    }
    let mut n = 0;
    let mut pairs = BTreeSet::new();
    let ps = [Oracle::new(k, 0, inputs[0]), Oracle::new(k, 1, inputs[1])];
    go(ps, Mem { bits: [0, 0], inputs: [None, None] }, crashes, &mut n, &mut pairs);
    (n, pairs)
}

fn crate_count(k: u32, inputs: [u8; 2], crashes: usize) -> (u64, BTreeSet<(Frac, Frac)>) {
    let sys = ak_system(k);
    let mut pairs = BTreeSet::new();
    let s = enumerate_executions(&sys, &inputs, Bounds::new(1000, crashes), |leaf| {
        if let [Some(a), Some(b)] = leaf.exec.decisions()[..] {
            pairs.insert((a.value, b.value));
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    assert_eq!(s.truncated, 0);
    (s.executions, pairs)
}

#[test]
fn execution_counts_match_oracle() {
    for k in 1..=3 {
        for inputs in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            for crashes in 0..=2 {
                let (n, pairs) = crate_count(k, inputs, crashes);
                let (on, opairs) = oracle_count(k as i64, [inputs[0] as i64, inputs[1] as i64], crashes);
                assert_eq!(n, on, "k={k} inputs={inputs:?} crashes={crashes}");
                assert_eq!(pairs, opairs);
            }
        }
    }
}

#[test]
fn frozen_counts() {
    // Frozen from the interpreter above.
    assert_eq!(oracle_count(1, [0, 1], 1).0, 672);
    assert_eq!(oracle_count(2, [0, 1], 0).1.len(), crate_count(2, [0, 1], 0).1.len());
}

#[test]
fn k1_agreement_everywhere() {
    let (_, pairs) = crate_count(1, [0, 1], 1);
    for (a, b) in pairs {
        assert!(a.abs_diff(b) <= Frac::new(1, 3));
    }
}

#[test]
fn k4_protocol_graph_is_a_path_over_all_ninths() {
    let sys = ak_system(4);
    let mut g = ProtocolGraph::new();
    enumerate_executions(&sys, &[0, 1], Bounds::new(1000, 0), |leaf| {
        g.add_outcome(&loop_outcome(&leaf.exec.outcome()));
        ControlFlow::Continue(())
    })
    .unwrap();
    let order = g.path_order().expect("simple path");
    let vals: Vec<Frac> = order.iter().map(|&v| g.vertices()[v].2.value).collect();
    let ends = [vals[0], *vals.last().unwrap()];
    assert!(ends.contains(&Frac::ZERO) && ends.contains(&Frac::ONE));
    let set: BTreeSet<Frac> = vals.into_iter().collect();
    let want: BTreeSet<Frac> = (0..=9).map(|m| Frac::new(m, 9)).collect();
    assert_eq!(set, want);
}

#[test]
fn equal_inputs_graph_connected() {
    let sys = ak_system(4);
    let mut g = ProtocolGraph::new();
    enumerate_executions(&sys, &[0, 0], Bounds::new(1000, 0), |leaf| {
        g.add_outcome(&loop_outcome(&leaf.exec.outcome()));
        ControlFlow::Continue(())
    })
    .unwrap();
    assert!(g.is_connected());
    assert!(g.vertices().iter().all(|v| v.2.value == Frac::ZERO));
}

#[test]
fn trace_is_deterministic() {
    let sys = ak_system(3);
    let sched: Vec<Event> = [1, 2, 2, 1, 1, 2, 1, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 1, 2]
        .iter()
        .map(|&p| Event::Step(Pid(p)))
        .collect();
    let a = run(&sys, &[1, 0], &sched);
    let b = run(&sys, &[1, 0], &sched);
    assert_eq!(a, b);
}

fn random_run(k: u32, inputs: [u8; 2], picks: &[bool], crash_at: Option<(usize, usize)>) -> Vec<String> {
    let sys = ak_system(k);
    let mut exec = boundreg::shmem::Execution::new(&sys, &inputs).unwrap();
    let mut i = 0;
    while !exec.all_done() {
        if let Some((at, who)) = crash_at {
            if i == at && exec.is_running(Pid(who)) {
                exec.crash(Pid(who)).unwrap();
            }
        }
        let running: Vec<Pid> = exec.running().collect();
        if running.is_empty() {
            break;
        }
        let p = running[picks.get(i).copied().unwrap_or(false) as usize % running.len()];
        exec.step(p).unwrap();
        i += 1;
    }
    let mut bad = Vec::new();
    for s in exec.slots() {
        if s.ops > step_bound(k) {
            bad.push(format!("ops {}", s.ops));
        }
    }
    let out = exec.outcome();
    if let [(_, s1, d1), (_, s2, d2)] = &out[..] {
        if d1.value.abs_diff(d2.value) > Frac::new(1, 2 * k as i64 + 1) {
            bad.push(format!("gap {} {}", d1, d2));
        }
        bad.extend(pair_lemma_violations(s1, s2));
    }
    for (_, s, d) in &out {
        bad.extend(boundreg::eps2::boundary_violation(s, d));
    }
    bad
}

proptest! {
    #[test]
    fn random_schedules_keep_agreement(
        k in 1u32..8,
        a in 0u8..2,
        b in 0u8..2,
        picks in proptest::collection::vec(any::<bool>(), 0..40),
        crash in proptest::option::of((0usize..30, 1usize..3)),
    ) {
        let bad = random_run(k, [a, b], &picks, crash);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}

#[test]
fn program_is_shareable() {
    fn assert_sync<T: Send + Sync>() {}
    assert_sync::<AkProgram>();
}
