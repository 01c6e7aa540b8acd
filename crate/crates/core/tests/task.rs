use std::sync::Arc;

use boundreg::task::*;
use proptest::prelude::*;

fn solver(t: Task) -> Arc<Solver> {
    let r = match find_restriction(&t, 100_000).unwrap() {
        Restriction::Solvable(o) => o,
        other => panic!("{} unsolvable: {other:?}", t.name),
    };
    Arc::new(Solver::new(t, &r).unwrap())
}

#[test]
fn shipped_task_files_parse_and_match_builders() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../tasks");
    for (file, t) in [
        ("consensus.json", consensus()),
        ("agreement3.json", discretized_agreement(3)),
        ("identity3.json", identity3()),
        ("weak_leader.json", weak_leader()),
    ] {
        let text = std::fs::read_to_string(format!("{dir}/{file}")).unwrap();
        let parsed = Task::from_json(t.name.clone(), &text).unwrap();
        assert_eq!(parsed, t, "{file}");
    }
}

#[test]
fn conformance_all_schedules() {
    for t in [discretized_agreement(3), identity3(), weak_leader()] {
        let name = t.name.clone();
        let rep = check_conformance(solver(t), 1, Coverage::AllSchedules).unwrap();
        assert!(rep.violations.is_empty(), "{name}: {:?}", &rep.violations[..1]);
        assert_eq!(rep.truncated, 0);
        assert!(rep.max_cell < 8);
    }
}

#[test]
fn dedup_and_full_enumeration_agree_on_outcomes() {
    // Same verdicts both ways; the state explorer is the cheap route.
    let s = solver(discretized_agreement(5));
    let a = check_conformance(s.clone(), 1, Coverage::AllStates).unwrap();
    assert!(a.violations.is_empty());
    assert!(a.leaves > 0);
}

#[test]
fn corrupted_path_is_caught() {
    let t = discretized_agreement(3);
    let mut s = Solver::new(t.clone(), &t.outputs).unwrap();
    // Shift every middle path node to an illegal far-away output.
    let far = vec!["0/1".to_string(), "1/3".to_string()];
    for p in s.padded.values_mut() {
        let mid = p.len() / 2;
        p[mid] = far.clone();
        p[mid + 1] = vec!["1/1".to_string(), "1/1".to_string()];
    }
    let rep = check_conformance(Arc::new(s), 0, Coverage::AllStates).unwrap();
    assert!(!rep.violations.is_empty());
}

#[test]
fn consensus_is_unsolvable() {
    assert!(matches!(find_restriction(&consensus(), 1000).unwrap(), Restriction::Unsolvable(_)));
    let t = consensus();
    assert!(Solver::new(t.clone(), &t.outputs).is_err());
}

proptest! {
    /// A singleton output set is always solvable; its paths are constant.
    #[test]
    fn constant_tasks(n_inputs in 1usize..4) {
        let mut legal = std::collections::BTreeMap::new();
        for a in 0..n_inputs {
            for b in 0..n_inputs {
                legal.insert(vec![a.to_string(), b.to_string()],
                    std::collections::BTreeSet::from([vec!["z".to_string(), "z".to_string()]]));
            }
        }
        let t = Task::new("const", 2, legal).unwrap();
        prop_assert_eq!(check_conditions(&t, &t.outputs), Verdict::Ok);
        let table = PathTable::build(&t, &t.outputs).unwrap();
        for p in table.paths.values() {
            prop_assert!(p.iter().all(|y| y == &p[0]));
        }
    }

    /// Discretized agreement at any granularity passes and yields sound paths.
    #[test]
    fn agreement_grids(q in 1i64..9) {
        let t = discretized_agreement(q);
        prop_assert_eq!(check_conditions(&t, &t.outputs), Verdict::Ok);
        let table = PathTable::build(&t, &t.outputs).unwrap();
        prop_assert!(table.violations(&t).is_empty());
    }
}
