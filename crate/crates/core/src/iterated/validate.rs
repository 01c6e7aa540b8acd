use super::view::below_or_equal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundMode {
    Snapshot,
    Collect,
}

/// One event of a single-round witness schedule (0-based process indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundEvent {
    Write(usize),
    Read { reader: usize, reg: usize },
    Snapshot(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Realizability {
    Realizable(Vec<RoundEvent>),
    NotRealizable(String),
}

impl Realizability {
    pub fn is_realizable(&self) -> bool {
        matches!(self, Realizability::Realizable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed views: {0}")]
pub struct MalformedViews(pub String);

fn check_shape<T: PartialEq>(values: &[T], outputs: &[Vec<Option<T>>]) -> Result<(), MalformedViews> {
    let n = values.len();
    if outputs.len() != n {
        return Err(MalformedViews(format!("{} outputs for {n} values", outputs.len())));
    }
    for (i, x) in outputs.iter().enumerate() {
        if x.len() != n {
            return Err(MalformedViews(format!("output {} has {} entries", i + 1, x.len())));
        }
        if x[i].is_none() {
            return Err(MalformedViews(format!("output {} misses its own entry", i + 1)));
        }
        for (j, e) in x.iter().enumerate() {
            if e.as_ref().is_some_and(|e| e != &values[j]) {
                return Err(MalformedViews(format!("output {} entry {} is not the written value", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// Decide whether one round of writes followed by snapshots (or collects) can
/// produce the given outputs, and if so build a witness schedule.
///
/// For collects the write order is forced by the gaps (`X_i[j] = ⊥` puts `i`'s
/// write first); a topological order gives a chain of written prefixes, and
/// every read is placed right after the last prefix contained in the reader's
/// output, or right after the write it must observe.
pub fn validate_round<T: Clone + PartialEq>(
    values: &[T],
    outputs: &[Vec<Option<T>>],
    mode: RoundMode,
) -> Result<Realizability, MalformedViews> {
    check_shape(values, outputs)?;
    let n = values.len();
    match mode {
        RoundMode::Snapshot => {
            for i in 0..n {
                for j in i + 1..n {
                    if !below_or_equal(&outputs[i], &outputs[j]) && !below_or_equal(&outputs[j], &outputs[i]) {
                        return Ok(Realizability::NotRealizable(format!(
                            "outputs of {} and {} are incomparable",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| (outputs[i].iter().filter(|e| e.is_some()).count(), i));
            let mut written = vec![false; n];
            let mut events = Vec::new();
            for &i in &order {
                for j in 0..n {
                    if outputs[i][j].is_some() && !written[j] {
                        written[j] = true;
                        events.push(RoundEvent::Write(j));
                    }
                }
                events.push(RoundEvent::Snapshot(i));
            }
            Ok(Realizability::Realizable(events))
        }
        RoundMode::Collect => {
            let Some(order) = write_order(outputs) else {
                return Ok(Realizability::NotRealizable("cyclic write-order constraints".into()));
            };
            Ok(Realizability::Realizable(block_schedule(outputs, &order)))
        }
    }
}

/// A write order where `i` precedes `j` whenever `i` missed `j`.
fn write_order<T>(outputs: &[Vec<Option<T>>]) -> Option<Vec<usize>> {
    let n = outputs.len();
    let mut indeg = vec![0; n];
    for i in 0..n {
        for j in 0..n {
            if outputs[i][j].is_none() {
                indeg[j] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];
    while order.len() < n {
        let next = (0..n).find(|&v| !done[v] && indeg[v] == 0)?;
        done[next] = true;
        order.push(next);
        for j in 0..n {
            if outputs[next][j].is_none() {
                indeg[j] -= 1;
            }
        }
    }
    Some(order)
}

/// Singleton blocks in `order`; chain `S_l` = first `l` writers.
fn block_schedule<T>(outputs: &[Vec<Option<T>>], order: &[usize]) -> Vec<RoundEvent> {
    let n = outputs.len();
    let mut pos = vec![0; n];
    for (l, &p) in order.iter().enumerate() {
        pos[p] = l;
    }
    // after_block[l]: reads scheduled right after the (l+1)-th write
    let mut after_block: Vec<Vec<RoundEvent>> = vec![Vec::new(); n];
    for i in 0..n {
        // largest prefix contained in X_i
        let mut j = 0;
        while j < n && outputs[i][order[j]].is_some() {
            j += 1;
        }
        let last = j - 1;
        for reg in 0..n {
            let slot = if pos[reg] <= last || outputs[i][reg].is_none() { last } else { pos[reg] };
            after_block[slot].push(RoundEvent::Read { reader: i, reg });
        }
    }
    let mut events = Vec::new();
    for (l, &p) in order.iter().enumerate() {
        events.push(RoundEvent::Write(p));
        events.append(&mut after_block[l]);
    }
    events
}

/// Replay a witness: returns the outputs it produces, or an error if it is not
/// a legal one-round schedule (read before own write, double write, ...).
pub fn replay_round<T: Clone>(values: &[T], events: &[RoundEvent]) -> Result<Vec<Vec<Option<T>>>, String> {
    let n = values.len();
    let mut mem: Vec<Option<T>> = vec![None; n];
    let mut out: Vec<Vec<Option<T>>> = vec![vec![None; n]; n];
    let mut read: Vec<Vec<bool>> = vec![vec![false; n]; n];
    let mut snapped = vec![false; n];
    for ev in events {
        match *ev {
            RoundEvent::Write(p) => {
                if mem[p].is_some() {
                    return Err(format!("process {} writes twice", p + 1));
                }
                mem[p] = Some(values[p].clone());
            }
            RoundEvent::Read { reader, reg } => {
                if mem[reader].is_none() {
                    return Err(format!("process {} reads before writing", reader + 1));
                }
                if std::mem::replace(&mut read[reader][reg], true) {
                    return Err(format!("process {} reads register {} twice", reader + 1, reg + 1));
                }
                out[reader][reg] = mem[reg].clone();
            }
            RoundEvent::Snapshot(p) => {
                if mem[p].is_none() {
                    return Err(format!("process {} snapshots before writing", p + 1));
                }
                snapped[p] = true;
                out[p] = mem.clone();
                read[p] = vec![true; n];
            }
        }
    }
    if let Some(p) = (0..n).find(|&p| !read[p].iter().all(|&r| r)) {
        return Err(format!("process {} did not read every register", p + 1));
    }
    let _ = snapped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_process_cases() {
        let x = [1u64, 2];
        let ok = vec![vec![Some(1), None], vec![Some(1), Some(2)]];
        for mode in [RoundMode::Snapshot, RoundMode::Collect] {
            let Realizability::Realizable(w) = validate_round(&x, &ok, mode).unwrap() else { panic!() };
            assert_eq!(replay_round(&x, &w).unwrap(), ok);
        }
        let bad = vec![vec![Some(1), None], vec![None, Some(2)]];
        for mode in [RoundMode::Snapshot, RoundMode::Collect] {
            assert!(!validate_round(&x, &bad, mode).unwrap().is_realizable());
        }
    }

    #[test]
    fn three_process_chain() {
        let x = [1u64, 2, 3];
        let outs = vec![vec![Some(1), None, None], vec![Some(1), Some(2), Some(3)], vec![Some(1), Some(2), Some(3)]];
        let Realizability::Realizable(w) = validate_round(&x, &outs, RoundMode::Collect).unwrap() else { panic!() };
        assert_eq!(replay_round(&x, &w).unwrap(), outs);
    }

    #[test]
    fn collect_only_outcome() {
        // p1 sees p2 only, p2 sees p3 only, p3 sees p1 only: no chain for snapshots,
        // but the cycle of gaps also blocks collects.
        let x = [1u64, 2, 3];
        let outs = vec![vec![Some(1), Some(2), None], vec![None, Some(2), Some(3)], vec![Some(1), None, Some(3)]];
        assert!(!validate_round(&x, &outs, RoundMode::Collect).unwrap().is_realizable());
        // incomparable but realizable with collects
        let outs = vec![vec![Some(1), Some(2), None], vec![None, Some(2), Some(3)], vec![Some(1), Some(2), Some(3)]];
        assert!(!validate_round(&x, &outs, RoundMode::Snapshot).unwrap().is_realizable());
        let Realizability::Realizable(w) = validate_round(&x, &outs, RoundMode::Collect).unwrap() else { panic!() };
        assert_eq!(replay_round(&x, &w).unwrap(), outs);
    }

    #[test]
    fn malformed() {
        let x = [1u64, 2];
        assert!(validate_round(&x, &[vec![None, None], vec![None, Some(2)]], RoundMode::Collect).is_err());
        assert!(validate_round(&x, &[vec![Some(5), None], vec![None, Some(2)]], RoundMode::Collect).is_err());
    }
}
