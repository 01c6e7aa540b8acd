use std::collections::{BTreeMap, BTreeSet};

use super::conditions::{adjacent, check_conditions, covering_value, legal_within, present_coordinate, OutputGraph, Verdict};
use super::model::{show, PartialVector, Task, TaskError, Vector};

/// Chosen outputs for full and partial inputs and the connecting paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathTable {
    pub restriction: BTreeSet<Vector>,
    pub delta_full: BTreeMap<Vector, Vector>,
    pub delta_partial: BTreeMap<PartialVector, Vector>,
    /// Keyed by (full input, missing coordinate); all of length `len + 1`.
    pub paths: BTreeMap<(Vector, usize), Vec<Vector>>,
    /// Common number of edges of every path.
    pub len: usize,
}

impl PathTable {
    pub fn build(task: &Task, restriction: &BTreeSet<Vector>) -> Result<Self, TaskError> {
        let verdict = check_conditions(task, restriction);
        if verdict != Verdict::Ok {
            return Err(TaskError::Unsolvable(verdict.to_string()));
        }
        let mut delta_full = BTreeMap::new();
        for x in &task.inputs {
            let first = legal_within(task, restriction, x).into_iter().next().expect("nonempty by connectivity");
            delta_full.insert(x.clone(), first);
        }
        let mut delta_partial = BTreeMap::new();
        let mut cover = BTreeMap::new();
        for p in task.partial_inputs() {
            let j = present_coordinate(&p);
            let v = covering_value(task, restriction, &p).expect("covering holds");
            let y = restriction.iter().find(|y| y[j] == v).expect("covering value comes from the restriction");
            delta_partial.insert(p.clone(), y.clone());
            cover.insert(p, v);
        }
        let mut paths = BTreeMap::new();
        for x in &task.inputs {
            let graph = OutputGraph::new(&legal_within(task, restriction, x));
            for i in 0..task.n {
                let p = PartialVector::hide(x, i);
                let j = present_coordinate(&p);
                let v = &cover[&p];
                let mut path = graph
                    .shortest_path(&delta_full[x], |y| &y[j] == v)
                    .ok_or_else(|| TaskError::Invalid(format!("no path inside legal set of {}", show(x))))?;
                path.push(delta_partial[&p].clone());
                paths.insert((x.clone(), i), path);
            }
        }
        let longest = paths.values().map(|p| p.len() - 1).max().unwrap_or(0);
        let len = longest.max(2);
        for path in paths.values_mut() {
            pad_front(path, len + 1);
        }
        Ok(PathTable { restriction: restriction.clone(), delta_full, delta_partial, paths, len })
    }

    pub fn path(&self, full: &[String], missing: usize) -> &[Vector] {
        &self.paths[&(full.to_vec(), missing)]
    }

    /// Violations of the structural path requirements (empty when sound).
    pub fn violations(&self, task: &Task) -> Vec<String> {
        let mut out = Vec::new();
        for ((x, i), path) in &self.paths {
            let tag = format!("path {} missing {}", show(x), i + 1);
            let p = PartialVector::hide(x, *i);
            if path.len() != self.len + 1 {
                out.push(format!("{tag}: length {}", path.len()));
            }
            if path[0] != self.delta_full[x] {
                out.push(format!("{tag}: does not start at the chosen output"));
            }
            if path.last() != Some(&self.delta_partial[&p]) {
                out.push(format!("{tag}: does not end at the chosen partial output"));
            }
            for w in path.windows(2) {
                if w[0] != w[1] && !adjacent(&w[0], &w[1]) {
                    out.push(format!("{tag}: {} and {} differ in two places", show(&w[0]), show(&w[1])));
                }
            }
            for y in &path[..path.len() - 1] {
                if !task.legal(x).contains(y) || !self.restriction.contains(y) {
                    out.push(format!("{tag}: {} not legal", show(y)));
                }
            }
            let (a, b) = (&path[path.len() - 2], &path[path.len() - 1]);
            if (0..task.n).any(|c| c != *i && a[c] != b[c]) {
                out.push(format!("{tag}: last two nodes differ away from the missing coordinate"));
            }
        }
        out
    }
}

/// Prepend copies of the first node until the path has `nodes` entries.
pub fn pad_front(path: &mut Vec<Vector>, nodes: usize) {
    if path.len() < nodes {
        let first = path[0].clone();
        let extra = nodes - path.len();
        path.splice(0..0, std::iter::repeat(first).take(extra));
    }
}

#[cfg(test)]
mod tests {
    use super::super::model::{discretized_agreement, identity3};
    use super::*;

    #[test]
    fn agreement_paths_are_sound() {
        let t = discretized_agreement(3);
        let table = PathTable::build(&t, &t.outputs).unwrap();
        assert!(table.violations(&t).is_empty(), "{:?}", table.violations(&t));
        assert!(table.len >= 2);
    }

    #[test]
    fn identity_paths_are_short() {
        let t = identity3();
        let table = PathTable::build(&t, &t.outputs).unwrap();
        assert_eq!(table.len, 2);
        assert!(table.violations(&t).is_empty());
    }

    #[test]
    fn padding_repeats_first() {
        let a: Vector = vec!["a".into()];
        let b: Vector = vec!["b".into()];
        let c: Vector = vec!["c".into()];
        let mut p = vec![a.clone(), b.clone(), c.clone()];
        pad_front(&mut p, 5);
        assert_eq!(p, vec![a.clone(), a.clone(), a, b, c]);
    }
}
