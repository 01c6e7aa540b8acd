use std::collections::{BTreeSet, HashSet};
use std::ops::ControlFlow;
use std::sync::Arc;

use boundreg::iterated::*;
use boundreg::shmem::{explore_states, run, Bounds, Event, Pid, ProtocolGraph, Status};

fn is_outcomes(n: usize, r: u32, inputs: &[u64]) -> (u64, ProtocolGraph<FiState, ViewRef>) {
    let sys = fullinfo_system(n, r, Mode::Snapshot);
    let mut g = ProtocolGraph::new();
    let s = enumerate_is(&sys, inputs, 0, false, |e| {
        g.add_outcome(&e.outcome());
        ControlFlow::Continue(())
    })
    .unwrap();
    (s.leaves, g)
}

#[test]
fn two_process_is_counts() {
    for r in 1..=7u32 {
        let (leaves, g) = is_outcomes(2, r, &[0, 1]);
        assert_eq!(leaves, 3u64.pow(r), "executions after {r} rounds");
        assert_eq!(g.vertices().len() as u64, 3u64.pow(r) + 1, "vertices after {r} rounds");
        assert!(g.is_simple_path());
    }
}

#[test]
fn single_process_sees_itself() {
    let (leaves, g) = is_outcomes(1, 3, &[7]);
    assert_eq!(leaves, 1);
    let v = &g.vertices()[0].2;
    let mut cur = v.clone();
    while let Some(e) = cur.entries() {
        let next = e[0].clone().unwrap();
        cur = next;
    }
    assert_eq!(*cur, *View::input(Pid(1), 7));
}

/// Every output pattern reachable in one round where each process writes, then
/// reads all registers in any order (collect) or takes an atomic snapshot.
fn reachable_patterns(n: usize, mode: RoundMode, ascending: bool) -> HashSet<Vec<Vec<bool>>> {
    #[derive(Clone, Hash, PartialEq, Eq)]
    struct St {
        written: Vec<bool>,
        seen: Vec<Vec<Option<bool>>>,
    }
    let mut out = HashSet::new();
    let mut seen_states = HashSet::new();
    let mut stack = vec![St { written: vec![false; n], seen: vec![vec![None; n]; n] }];
    while let Some(s) = stack.pop() {
        if !seen_states.insert(s.clone()) {
            continue;
        }
        if s.seen.iter().all(|v| v.iter().all(Option::is_some)) {
            out.insert(s.seen.iter().map(|v| v.iter().map(|b| b.unwrap()).collect()).collect());
            continue;
        }
        for p in 0..n {
            if !s.written[p] {
                let mut c = s.clone();
                c.written[p] = true;
                stack.push(c);
                continue;
            }
            match mode {
                RoundMode::Snapshot => {
                    if s.seen[p][0].is_none() {
                        let mut c = s.clone();
                        c.seen[p] = s.written.iter().map(|&w| Some(w)).collect();
                        stack.push(c);
                    }
                }
                RoundMode::Collect => {
                    let regs: Vec<usize> = if ascending {
                        s.seen[p].iter().position(Option::is_none).into_iter().collect()
                    } else {
                        (0..n).filter(|&j| s.seen[p][j].is_none()).collect()
                    };
                    for j in regs {
                        let mut c = s.clone();
                        c.seen[p][j] = Some(s.written[j]);
                        stack.push(c);
                    }
                }
            }
        }
    }
    out
}

fn all_patterns(n: usize) -> Vec<Vec<Vec<bool>>> {
    let free = n * (n - 1);
    (0..1u32 << free)
        .map(|m| {
            let mut bit = 0;
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                true
                            } else {
                                bit += 1;
                                m >> (bit - 1) & 1 == 1
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn to_outputs(values: &[u64], pat: &[Vec<bool>]) -> Vec<Vec<Option<u64>>> {
    pat.iter().map(|row| row.iter().zip(values).map(|(&s, &v)| s.then_some(v)).collect()).collect()
}

#[test]
fn validate_round_matches_brute_force() {
    for n in 2..=3 {
        let values: Vec<u64> = (0..n as u64).map(|i| 10 + i).collect();
        for mode in [RoundMode::Snapshot, RoundMode::Collect] {
            let reach = reachable_patterns(n, mode, false);
            for pat in all_patterns(n) {
                let outs = to_outputs(&values, &pat);
                let verdict = validate_round(&values, &outs, mode).unwrap();
                assert_eq!(verdict.is_realizable(), reach.contains(&pat), "n={n} {mode:?} {pat:?}");
                if let Realizability::Realizable(w) = verdict {
                    assert_eq!(replay_round(&values, &w).unwrap(), outs);
                }
            }
        }
    }
}

#[test]
fn ascending_collects_are_a_strict_subset_for_three() {
    let asc = reachable_patterns(3, RoundMode::Collect, true);
    let any = reachable_patterns(3, RoundMode::Collect, false);
    assert!(asc.is_subset(&any));
    let missing: Vec<_> = any.difference(&asc).collect();
    assert!(missing.contains(&&vec![vec![true, true, false], vec![true, true, true], vec![true, false, true]]));
    assert_eq!(reachable_patterns(2, RoundMode::Collect, true), reachable_patterns(2, RoundMode::Collect, false));
}

#[test]
fn validate_round_examples() {
    let v = [1u64, 2];
    let r = validate_round(&v, &[vec![Some(1), None], vec![Some(1), Some(2)]], RoundMode::Collect).unwrap();
    assert!(r.is_realizable());
    for mode in [RoundMode::Snapshot, RoundMode::Collect] {
        let r = validate_round(&v, &[vec![Some(1), None], vec![None, Some(2)]], mode).unwrap();
        assert!(!r.is_realizable());
    }
    assert!(validate_round(&v, &[vec![None, None], vec![Some(1), Some(2)]], RoundMode::Collect).is_err());
    assert!(validate_round(&v, &[vec![Some(3), None], vec![Some(1), Some(2)]], RoundMode::Collect).is_err());
}

fn table(k: u32) -> Arc<ConfigTable> {
    Arc::new(enumerate_configurations(&binary_inputs(2), k).unwrap())
}

#[test]
fn configuration_counts() {
    let t = table(1);
    assert_eq!(t.rounds[0].len(), 4);
    assert_eq!(t.rounds[1].len(), 12);
    assert_eq!(t.window(0), 0..4);
    assert_eq!(t.window(1), 4..16);
    for c in &t.rounds[1] {
        let prev: Vec<ViewRef> = c.iter().map(|v| input_of(v)).collect();
        let outs: Vec<Vec<Option<ViewRef>>> = c.iter().map(|v| v.entries().unwrap().to_vec()).collect();
        assert!(validate_round(&prev, &outs, RoundMode::Collect).unwrap().is_realizable());
    }
}

fn input_of(v: &ViewRef) -> ViewRef {
    let me = v.owner().idx();
    v.entries().unwrap()[me].clone().unwrap()
}

/// Check one finished simulation against the table and the round oracle.
fn check_simulation(t: &ConfigTable, k: u32, histories: &[Vec<ViewRef>]) {
    for r in 1..=k as usize {
        let prev: Vec<ViewRef> = histories.iter().map(|h| h[r - 1].clone()).collect();
        let cur: Vec<ViewRef> = histories.iter().map(|h| h[r].clone()).collect();
        assert!(t.contains(r as u32, &cur), "round {r} configuration not reachable");
        let outs: Vec<Vec<Option<ViewRef>>> = cur.iter().map(|v| v.entries().unwrap().to_vec()).collect();
        match validate_round(&prev, &outs, RoundMode::Collect).unwrap() {
            Realizability::Realizable(w) => assert_eq!(replay_round(&prev, &w).unwrap(), outs),
            Realizability::NotRealizable(why) => panic!("round {r}: {why}"),
        }
    }
}

#[test]
fn onebit_simulation_conforms() {
    let t = table(2);
    for k in 1..=2u32 {
        let sys = onebit_system(t.clone(), k);
        for inputs in binary_inputs(2) {
            let mut leaves = 0;
            enumerate_is(&sys, &inputs, 0, true, |e| {
                leaves += 1;
                let hs: Vec<Vec<ViewRef>> = e.slots().iter().map(|s| s.state.history.clone()).collect();
                for s in e.slots() {
                    assert!(matches!(s.status, Status::Decided(_)));
                    assert_eq!(s.state.iter, t.simulation_iterations(k));
                }
                check_simulation(&t, k, &hs);
                ControlFlow::Continue(())
            })
            .unwrap();
            assert!(leaves > 0);
        }
    }
}

#[test]
fn onebit_simulation_with_a_crash_never_faults() {
    let t = table(2);
    let sys = onebit_system(t.clone(), 2);
    enumerate_is(&sys, &[0, 1], 1, true, |e| {
        for s in e.slots() {
            if matches!(s.status, Status::Decided(_)) {
                assert!(t.rounds[2].iter().any(|c| c[s.state.me.idx()] == s.state.history[2]));
            }
        }
        ControlFlow::Continue(())
    })
    .unwrap();
}

#[test]
fn onebit_solo_sees_only_itself() {
    let t = table(1);
    let sys = onebit_system(t.clone(), 1);
    let n_iter = t.simulation_iterations(1);
    let mut sched: Vec<Event> = Vec::new();
    for p in [1, 2] {
        for _ in 0..2 * n_iter {
            sched.push(Event::Step(Pid(p)));
        }
    }
    let trace = run(&sys, &[0, 1], &sched).unwrap();
    let d = trace.decisions();
    let w1 = d[0].clone().unwrap();
    assert_eq!(w1.entries().unwrap(), &[Some(View::input(Pid(1), 0)), None]);
    let w2 = d[1].clone().unwrap();
    assert!(w2.entries().unwrap().iter().all(Option::is_some));
}

fn bg_outputs(e: &boundreg::shmem::Execution<'_, BgSnapshot>) -> Vec<Option<(WordVec, Option<usize>)>> {
    e.slots()
        .iter()
        .map(|s| match &s.status {
            Status::Decided(o) => Some((o.clone(), s.state.got_at)),
            _ => None,
        })
        .collect()
}

#[test]
fn bg_exhaustive_without_crashes() {
    for n in 2..=3usize {
        let sys = bg_system(n);
        let inputs: Vec<u64> = (0..n as u64).map(|i| 5 + i).collect();
        let mut finals = BTreeSet::new();
        let s = explore_states(&sys, &inputs, Bounds::new(usize::MAX, 0), |leaf| {
            let outs = bg_outputs(leaf.exec);
            assert!(outs.iter().all(|o| o.as_ref().is_some_and(|(_, g)| g.is_some())));
            if let Some(why) = check_snapshots(&inputs, &outs) {
                panic!("n={n}: {why}");
            }
            finals.insert(outs.into_iter().map(|o| o.unwrap().0).collect::<Vec<_>>());
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(s.truncated, 0);
        // every immediate-snapshot outcome is produced
        let expected = if n == 2 { 3 } else { 13 };
        assert_eq!(finals.len(), expected, "n={n}");
    }
}

#[test]
fn bg_examples() {
    let sys = bg_system(2);
    let p = |i| Event::Step(Pid(i));
    let mut sched = vec![p(1); 6];
    sched.extend(vec![p(2); 6]);
    let d = run(&sys, &[3, 4], &sched).unwrap().decisions();
    assert_eq!(d[0].as_ref().unwrap().to_string(), "[3,⊥]");
    assert_eq!(d[1].as_ref().unwrap().to_string(), "[3,4]");
    let lock = vec![p(1), p(2), p(1), p(1), p(2), p(2), p(1), p(1), p(1), p(2), p(2), p(2)];
    let trace = run(&sys, &[3, 4], &lock).unwrap();
    assert!(trace.decisions().iter().all(|o| o.as_ref().unwrap().to_string() == "[3,4]"));
    assert!(trace.final_states().iter().all(|s| s.got_at == Some(1)));
}

#[test]
fn bg_with_crashes_keeps_inclusion() {
    for n in 2..=3usize {
        let sys = bg_system(n);
        let inputs: Vec<u64> = (0..n as u64).collect();
        let mut lost = 0u64;
        explore_states(&sys, &inputs, Bounds::new(usize::MAX, n - 1), |leaf| {
            let outs = bg_outputs(leaf.exec);
            let decided: Vec<_> = outs.iter().map(|o| o.clone().filter(|(_, g)| g.is_some())).collect();
            lost += outs.iter().filter(|o| o.as_ref().is_some_and(|(_, g)| g.is_none())).count() as u64;
            if let Some(why) = check_snapshots(&inputs, &decided) {
                panic!("n={n}: {why}");
            }
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(lost, 0, "n={n}");
    }
}
