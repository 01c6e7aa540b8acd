use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use boundreg::eps2::{ak_system, exhaustive_summary, loop_outcome, LoopExit};
use boundreg::falsifier::{agreement_violation, candidate, falsify, FalsifyBudget, FalsifyOutcome};
use boundreg::fastsim::{check_witnesses, fast_summary, ParityLabelling, Valuation};
use boundreg::iterated::{bg_system, check_onebit, check_snapshots, enumerate_is, fullinfo_system, Mode, WordVec};
use boundreg::ringnet::{decode, encode, random_sends, run_ring, subsets, RingConfig};
use boundreg::shmem::{enumerate_executions, explore_states, run, Bounds, Event, Execution, ProtocolGraph, Status};
use boundreg::task::{check_conformance, consensus, discretized_agreement, find_restriction, identity3, weak_leader};
use boundreg::task::{Coverage, Restriction, Solver};
use boundreg::Frac;

const EPS_TIME_LIMIT: Duration = Duration::from_secs(60);
const FALSIFY_TIME_LIMIT: Duration = Duration::from_secs(300);
const WITNESS_BITS: u32 = 6;
const RING_RUNS: u64 = 100;

type Outcome = Result<String, String>;

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn eps_exhaustive() -> Outcome {
    let mut notes = Vec::new();
    for k in 1..=6u32 {
        let start = Instant::now();
        let mut executions = 0;
        for inputs in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let s = exhaustive_summary(k, inputs, 1).map_err(|e| e.to_string())?;
            ensure(s.violations.is_empty(), || format!("k={k} {inputs:?}: {}", s.violations[0]))?;
            if inputs == [0, 1] {
                let want = Frac::new(1, 2 * k as i64 + 1);
                ensure(s.max_gap == want, || format!("k={k}: max gap {} != {want}", s.max_gap))?;
            }
            executions += s.executions;
        }
        let took = start.elapsed();
        ensure(took < EPS_TIME_LIMIT, || format!("k={k} took {took:?}"))?;
        notes.push(format!("k={k}:{executions}/{:.1}s", took.as_secs_f64()));
    }
    Ok(notes.join(" "))
}

fn eps_lemmas() -> Outcome {
    let mut checked = 0u64;
    for k in 1..=5u32 {
        let sys = ak_system(k);
        for inputs in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let mut bad = None;
            enumerate_executions(&sys, &inputs, Bounds::new(usize::MAX, 1), |leaf| {
                checked += 1;
                let out = leaf.exec.outcome();
                for (_, s, d) in &out {
                    if (d.value == Frac::ZERO || d.value == Frac::ONE) && d.value != Frac::from_int(s.input as i64) {
                        bad = Some(format!("k={k}: boundary output {} with input {}", d.value, s.input));
                    }
                }
                for slot in leaf.exec.slots() {
                    if slot.ops > 2 * k as usize + 3 {
                        bad = Some(format!("k={k}: {} operations", slot.ops));
                    }
                }
                if let [(_, a, _), (_, b, _)] = &out[..] {
                    if a.r.abs_diff(b.r) > 1 {
                        bad = Some(format!("k={k}: exit rounds {} and {}", a.r, b.r));
                    }
                    if a.r == b.r && a.r != k {
                        bad = Some(format!("k={k}: both exit at {}", a.r));
                    }
                    if a.exit == Some(LoopExit::Break) && b.exit == Some(LoopExit::Break) && a.r == b.r {
                        bad = Some(format!("k={k}: both broke out in iteration {}", a.r));
                    }
                }
                match bad {
                    Some(_) => ControlFlow::Break(()),
                    None => ControlFlow::Continue(()),
                }
            })
            .map_err(|e| e.to_string())?;
            if let Some(b) = bad {
                return Err(format!("{b} on {inputs:?}"));
            }
        }
    }
    Ok(format!("{checked} executions, k<=5, <=1 crash"))
}

fn eps_graph() -> Outcome {
    let sys = ak_system(4);
    let mut g = ProtocolGraph::new();
    enumerate_executions(&sys, &[0, 1], Bounds::new(usize::MAX, 0), |leaf| {
        g.add_outcome(&loop_outcome(&leaf.exec.outcome()));
        ControlFlow::Continue(())
    })
    .map_err(|e| e.to_string())?;
    let order = g.path_order().ok_or("graph is not a simple path")?;
    let vals: Vec<Frac> = order.iter().map(|&v| g.vertices()[v].2.value).collect();
    let ends = BTreeSet::from([vals[0], vals[vals.len() - 1]]);
    ensure(ends == BTreeSet::from([Frac::ZERO, Frac::ONE]), || format!("endpoints {ends:?}"))?;
    let got: BTreeSet<Frac> = vals.iter().copied().collect();
    let want: BTreeSet<Frac> = (0..=9).map(|m| Frac::new(m, 9)).collect();
    ensure(got == want, || format!("decisions {got:?}"))?;
    Ok(format!("{} vertices, {} edges", g.vertices().len(), g.edge_count()))
}

fn universal() -> Outcome {
    let mut notes = Vec::new();
    for t in [discretized_agreement(3), identity3(), weak_leader()] {
        let name = t.name.clone();
        let r = match find_restriction(&t, 100_000).map_err(|e| e.to_string())? {
            Restriction::Solvable(o) => o,
            other => return Err(format!("{name}: {other:?}")),
        };
        let solver = Arc::new(Solver::new(t, &r).map_err(|e| e.to_string())?);
        let rep = check_conformance(solver, 1, Coverage::AllSchedules).map_err(|e| e.to_string())?;
        ensure(rep.violations.is_empty(), || format!("{name}: {}", rep.violations[0]))?;
        ensure(rep.truncated == 0, || format!("{name}: {} truncated", rep.truncated))?;
        notes.push(format!("{name}:{}", rep.leaves));
    }
    match find_restriction(&consensus(), 100_000).map_err(|e| e.to_string())? {
        Restriction::Unsolvable(_) => notes.push("consensus unsolvable".into()),
        other => return Err(format!("consensus: {other:?}")),
    }
    Ok(notes.join(" "))
}

fn is_counts() -> Outcome {
    for r in 1..=7u32 {
        let sys = fullinfo_system(2, r, Mode::Snapshot);
        let mut g = ProtocolGraph::new();
        let s = enumerate_is(&sys, &[0, 1], 0, false, |e| {
            g.add_outcome(&e.outcome());
            ControlFlow::Continue(())
        })
        .map_err(|e| e.to_string())?;
        let want = 3u64.pow(r);
        ensure(s.leaves == want, || format!("r={r}: {} executions", s.leaves))?;
        let v = g.vertices().len() as u64;
        ensure(v == want + 1, || format!("r={r}: {v} vertices"))?;
    }
    Ok("r=1..7".into())
}

fn onebit() -> Outcome {
    let mut notes = Vec::new();
    for k in 1..=2u32 {
        let rep = check_onebit(2, k, 0).map_err(|e| e.to_string())?;
        ensure(rep.violations.is_empty(), || format!("k={k}: {}", rep.violations[0]))?;
        ensure(rep.leaves > 0, || format!("k={k}: nothing ran"))?;
        notes.push(format!("k={k}:{} runs", rep.leaves));
    }
    Ok(notes.join(" "))
}

fn bg_outputs(e: &Execution<'_, boundreg::iterated::BgSnapshot>) -> Vec<Option<(WordVec, Option<usize>)>> {
    e.slots()
        .iter()
        .map(|s| match &s.status {
            Status::Decided(o) => Some((o.clone(), s.state.got_at)),
            _ => None,
        })
        .collect()
}

fn bg() -> Outcome {
    let mut leaves = 0u64;
    for n in 2..=3usize {
        let sys = bg_system(n);
        let inputs: Vec<u64> = (0..n as u64).map(|i| 3 + i).collect();
        let mut bad = None;
        let s = explore_states(&sys, &inputs, Bounds::new(usize::MAX, n - 1), |leaf| {
            leaves += 1;
            let outs = bg_outputs(leaf.exec);
            bad = check_snapshots(&inputs, &outs).map(|w| format!("n={n}: {w}"));
            // same iteration means equal snapshots
            for (i, a) in outs.iter().enumerate() {
                for b in &outs[i + 1..] {
                    if let (Some((sa, Some(ga))), Some((sb, Some(gb)))) = (a, b) {
                        if ga == gb && sa != sb {
                            bad = Some(format!("n={n}: iteration {ga} gave {sa} and {sb}"));
                        }
                    }
                }
            }
            match bad {
                Some(_) => ControlFlow::Break(()),
                None => ControlFlow::Continue(()),
            }
        })
        .map_err(|e| e.to_string())?;
        if let Some(b) = bad {
            return Err(b);
        }
        ensure(s.truncated == 0, || format!("n={n}: truncated"))?;
    }
    Ok(format!("{leaves} terminal configurations"))
}

fn witnesses() -> Outcome {
    for r in 1..=10u32 {
        let rep = check_witnesses(Arc::new(ParityLabelling), 2, r).map_err(|e| e.to_string())?;
        ensure(rep.failures.is_empty(), || format!("R={r}: {}", rep.failures[0]))?;
        ensure(rep.distinct == 1 << r, || format!("R={r}: {} distinct", rep.distinct))?;
        ensure(rep.max_word_bits <= WITNESS_BITS, || format!("R={r}: {} bits", rep.max_word_bits))?;
        ensure(rep.register_bits <= WITNESS_BITS, || format!("R={r}: {} register bits", rep.register_bits))?;
    }
    Ok("R=1..10".into())
}

fn fast() -> Outcome {
    let mut notes = Vec::new();
    for r in 1..=6u32 {
        let s = fast_summary(2, r, Valuation::Graph, 1).map_err(|e| e.to_string())?;
        ensure(s.violations.is_empty(), || format!("R={r}: {}", s.violations[0]))?;
        let eps = Frac::new(1, 1 << r);
        ensure(s.max_gap <= eps, || format!("R={r}: gap {}", s.max_gap))?;
        let bound = 2 * r as usize + 8;
        ensure(s.max_ops <= bound, || format!("R={r}: {} steps > {bound}", s.max_ops))?;
        notes.push(format!("R={r}:{}", s.max_gap));
    }
    Ok(notes.join(" "))
}

fn ring() -> Outcome {
    for len in 0..=16usize {
        for m in 0u32..1 << len {
            let bits: Vec<bool> = (0..len).map(|i| m >> i & 1 == 1).collect();
            let wire = encode(&bits);
            let (back, used) = decode(&wire).map_err(|e| e.to_string())?;
            ensure(back == bits && used == wire.len(), || format!("codec fails on {bits:?}"))?;
        }
    }
    let start = Instant::now();
    let mut runs = 0u64;
    for (n, t) in [(5usize, 1usize), (7, 2), (9, 3)] {
        for dead in subsets(n, t) {
            for seed in 0..RING_RUNS {
                let cfg = RingConfig {
                    n,
                    t,
                    crashed: dead.iter().copied().collect(),
                    sends: random_sends(n, &dead, 2, 2, seed),
                    seed,
                    max_steps: 2_000_000,
                    record: false,
                };
                let r = run_ring(&cfg).map_err(|e| e.to_string())?;
                let tag = || format!("n={n} t={t} crashed={dead:?} seed={seed}");
                ensure(r.missing.is_empty(), || format!("{}: {} undelivered", tag(), r.missing.len()))?;
                ensure(r.fifo_violations.is_empty(), || format!("{}: {}", tag(), r.fifo_violations[0]))?;
                ensure(r.register_bits == 3 * (t as u32 + 1), || format!("{}: {} bits", tag(), r.register_bits))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs in {:.0}s", start.elapsed().as_secs_f64()))
}

fn falsifier() -> Outcome {
    let start = Instant::now();
    let eps = Frac::new(1, 9);
    let report = falsify("naive3", 3, 2, eps, None, &FalsifyBudget::default()).map_err(|e| e.to_string())?;
    let FalsifyOutcome::Counterexample(cx) = report.outcome else {
        return Err(format!("{:?}", report.outcome));
    };
    // replay independently
    let cand = candidate("naive3", 3, 2, eps).map_err(|e| e.to_string())?;
    let trace = run(&cand.system, &cx.inputs, &cx.schedule).map_err(|e| e.to_string())?;
    let crashes = cx.schedule.iter().filter(|e| matches!(e, Event::Crash(_))).count();
    ensure(crashes <= 2, || format!("{crashes} crashes"))?;
    let why = agreement_violation(&cx.inputs, &trace.decisions(), eps).ok_or("replay shows no violation")?;
    let took = start.elapsed();
    ensure(took < FALSIFY_TIME_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{why}; {crashes} crashes; {:.2}s", took.as_secs_f64()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("two-process agreement, exhaustive, k=1..6", eps_exhaustive),
        ("loop-counter and step facts", eps_lemmas),
        ("k=4 protocol graph is the path over ninths", eps_graph),
        ("universal solver conformance", universal),
        ("immediate-snapshot counts", is_counts),
        ("one-bit collect simulation", onebit),
        ("snapshot from collects", bg),
        ("constant-size witnesses", witnesses),
        ("fast agreement, exhaustive", fast),
        ("ring codec and delivery sweep", ring),
        ("falsifier on naive3", falsifier),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(note) => println!("PASS {:>2} {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
