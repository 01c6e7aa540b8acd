use std::collections::HashSet;

use super::labelling::{Labelling, RoundView};
use super::sim::{sim_system, SimCore};
use crate::iterated::{validate_round, RoundMode};
use crate::shmem::{run, Event, ExecError, Pid, Schedule, Status};

/// Round kinds of a witness: both processes see each other, or one is solo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WitnessRound {
    Shared,
    Solo(Pid),
}

/// Witness number `code` (bit `r` selects a solo round `r+1`). A solo round is
/// given to the process that was not solo in the round before, or to `p1`.
pub fn witness_rounds(code: u64, rounds: u32) -> Vec<WitnessRound> {
    let mut out = Vec::with_capacity(rounds as usize);
    let mut last_solo: Option<Pid> = None;
    for r in 0..rounds {
        if code >> r & 1 == 0 {
            out.push(WitnessRound::Shared);
            last_solo = None;
        } else {
            let p = last_solo.map_or(Pid(1), Pid::other);
            out.push(WitnessRound::Solo(p));
            last_solo = Some(p);
        }
    }
    out
}

pub fn witness_schedule(rounds: &[WitnessRound]) -> Schedule {
    let (p1, p2) = (Pid(1), Pid(2));
    rounds
        .iter()
        .flat_map(|w| match *w {
            WitnessRound::Shared => [p1, p2, p1, p2],
            WitnessRound::Solo(j) => [j, j, j.other(), j.other()],
        })
        .map(Event::Step)
        .collect()
}

/// Check that both view histories form a valid two-process IS execution.
pub fn valid_is_views(h1: &[RoundView], h2: &[RoundView]) -> Result<(), String> {
    if h1.len() != h2.len() {
        return Err(format!("round counts differ: {} vs {}", h1.len(), h2.len()));
    }
    for (r, (a, b)) in h1.iter().zip(h2).enumerate() {
        let values = [(1, a[0].ok_or("p1 misses itself")?), (2, b[1].ok_or("p2 misses itself")?)];
        let outs = vec![
            vec![a[0].map(|v| (1, v)), a[1].map(|v| (2, v))],
            vec![b[0].map(|v| (1, v)), b[1].map(|v| (2, v))],
        ];
        let ok = validate_round(&values, &outs, RoundMode::Snapshot).map_err(|e| format!("round {}: {e:?}", r + 1))?;
        if !ok.is_realizable() {
            return Err(format!("round {} is not an immediate snapshot round", r + 1));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WitnessReport {
    pub schedules: u64,
    pub distinct: u64,
    pub max_word_bits: u32,
    pub register_bits: u32,
    pub failures: Vec<String>,
}

fn pattern(h: &[RoundView], me: Pid) -> Vec<bool> {
    h.iter().map(|v| v[me.other().idx()].is_some()).collect()
}

/// Replay all `2^rounds` witness schedules and check each is a full-length
/// valid IS execution, pairwise distinct, with register words in budget.
pub fn check_witnesses<L: Labelling>(labelling: std::sync::Arc<L>, delta: u32, rounds: u32) -> Result<WitnessReport, ExecError> {
    let sys = sim_system(labelling, delta, rounds);
    let register_bits = sys.programs[0].pack.width();
    let mut seen = HashSet::new();
    let mut rep = WitnessReport { register_bits, ..Default::default() };
    for code in 0..1u64 << rounds {
        let kinds = witness_rounds(code, rounds);
        let trace = run(&sys, &[(), ()], &witness_schedule(&kinds))?;
        rep.schedules += 1;
        for st in &trace.steps {
            if let crate::shmem::Action::Write { value, .. } = st.action {
                rep.max_word_bits = rep.max_word_bits.max(super::labelling::bit_length(value));
            }
        }
        let states: Vec<&SimCore> = trace.final_states();
        if !trace.slots.iter().all(|s| matches!(s.status, Status::Decided(_))) {
            rep.failures.push(format!("witness {code:b}: a process did not finish"));
            continue;
        }
        let (h1, h2) = (&states[0].views, &states[1].views);
        if h1.len() != rounds as usize {
            rep.failures.push(format!("witness {code:b}: stopped after {} rounds", h1.len()));
            continue;
        }
        if let Err(e) = valid_is_views(h1, h2) {
            rep.failures.push(format!("witness {code:b}: {e}"));
        }
        let expected: Vec<(bool, bool)> = kinds
            .iter()
            .map(|k| match k {
                WitnessRound::Shared => (true, true),
                WitnessRound::Solo(p) => (*p != Pid(1), *p != Pid(2)),
            })
            .collect();
        let got: Vec<(bool, bool)> = pattern(h1, Pid(1)).into_iter().zip(pattern(h2, Pid(2))).collect();
        if got != expected {
            rep.failures.push(format!("witness {code:b}: simulated rounds differ from the schedule"));
        }
        seen.insert(got);
    }
    rep.distinct = seen.len() as u64;
    Ok(rep)
}
