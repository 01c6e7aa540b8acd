use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use super::model::{show, PartialVector, Task, TaskError, Vector};

/// Vectors at Hamming distance exactly one.
pub fn adjacent(a: &[String], b: &[String]) -> bool {
    a.len() == b.len() && a.iter().zip(b).filter(|(x, y)| x != y).count() == 1
}

/// The graph on a set of output vectors with Hamming-distance-one edges.
#[derive(Clone, Debug)]
pub struct OutputGraph {
    nodes: Vec<Vector>,
    adj: Vec<Vec<usize>>,
}

impl OutputGraph {
    pub fn new<'a>(nodes: impl IntoIterator<Item = &'a Vector>) -> Self {
        let mut nodes: Vec<Vector> = nodes.into_iter().cloned().collect();
        nodes.sort();
        nodes.dedup();
        let adj = (0..nodes.len())
            .map(|i| (0..nodes.len()).filter(|&j| adjacent(&nodes[i], &nodes[j])).collect())
            .collect();
        OutputGraph { nodes, adj }
    }

    pub fn nodes(&self) -> &[Vector] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn index(&self, v: &[String]) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_slice().cmp(v)).ok()
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        self.distances(&[0]).iter().all(Option::is_some)
    }

    fn distances(&self, sources: &[usize]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        let mut q = VecDeque::new();
        for &s in sources {
            dist[s] = Some(0);
            q.push_back(s);
        }
        while let Some(v) = q.pop_front() {
            for &w in &self.adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dist[v].unwrap() + 1);
                    q.push_back(w);
                }
            }
        }
        dist
    }

    /// Lexicographically smallest among the shortest paths from `from` to any
    /// node satisfying `is_target`.
    pub fn shortest_path(&self, from: &[String], is_target: impl Fn(&Vector) -> bool) -> Option<Vec<Vector>> {
        let src = self.index(from)?;
        let targets: Vec<usize> = (0..self.nodes.len()).filter(|&i| is_target(&self.nodes[i])).collect();
        let dist = self.distances(&targets);
        let mut cur = src;
        let mut path = vec![self.nodes[cur].clone()];
        let mut d = dist[cur]?;
        while d > 0 {
            // adjacency lists are ascending, so the first hit is the smallest node
            cur = *self.adj[cur].iter().find(|&&w| dist[w] == Some(d - 1))?;
            path.push(self.nodes[cur].clone());
            d -= 1;
        }
        Some(path)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    FailsConnectivity(Vector),
    FailsCovering(PartialVector),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Ok => write!(f, "ok"),
            Verdict::FailsConnectivity(x) => write!(f, "fails-connectivity{}", show(x)),
            Verdict::FailsCovering(p) => write!(f, "fails-covering{p}"),
        }
    }
}

/// Outputs of `candidate` legal for `x`.
pub fn legal_within(task: &Task, candidate: &BTreeSet<Vector>, x: &[String]) -> BTreeSet<Vector> {
    task.legal(x).intersection(candidate).cloned().collect()
}

/// For a partial input, the smallest value `v` of the present coordinate such
/// that every extension has a legal output in `candidate` carrying `v` there.
pub fn covering_value(task: &Task, candidate: &BTreeSet<Vector>, p: &PartialVector) -> Option<String> {
    let j = present_coordinate(p);
    let values: BTreeSet<&String> = candidate.iter().map(|y| &y[j]).collect();
    values
        .into_iter()
        .find(|v| {
            task.extensions(p)
                .all(|x| task.legal(x).iter().any(|y| candidate.contains(y) && &y[j] == *v))
        })
        .cloned()
}

/// The coordinate that is present in a two-process partial vector.
pub fn present_coordinate(p: &PartialVector) -> usize {
    1 - p.missing()
}

/// Check the connectivity and covering conditions for a two-process task.
pub fn check_conditions(task: &Task, candidate: &BTreeSet<Vector>) -> Verdict {
    assert_eq!(task.n, 2, "conditions are implemented for two processes");
    for x in &task.inputs {
        if !OutputGraph::new(&legal_within(task, candidate, x)).is_connected() {
            return Verdict::FailsConnectivity(x.clone());
        }
    }
    for p in task.partial_inputs() {
        if covering_value(task, candidate, &p).is_none() {
            return Verdict::FailsCovering(p);
        }
    }
    Verdict::Ok
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Restriction {
    Solvable(BTreeSet<Vector>),
    /// Every subset was tried; carries the verdict for the full output set.
    Unsolvable(Verdict),
}

/// Search for an output subset passing both conditions, largest subsets first.
pub fn find_restriction(task: &Task, budget: u64) -> Result<Restriction, TaskError> {
    let useful: Vec<Vector> = task.outputs.iter().filter(|y| task.legal.values().any(|ys| ys.contains(*y))).cloned().collect();
    let full: BTreeSet<Vector> = useful.iter().cloned().collect();
    let first = check_conditions(task, &full);
    if first == Verdict::Ok {
        return Ok(Restriction::Solvable(full));
    }
    let m = useful.len();
    if m >= 63 {
        return Err(TaskError::BudgetExhausted(budget));
    }
    let mut tried = 1u64;
    // subsets by decreasing size; within a size, in combination order
    for size in (1..m).rev() {
        let mut comb: Vec<usize> = (0..size).collect();
        loop {
            if tried >= budget {
                return Err(TaskError::BudgetExhausted(budget));
            }
            tried += 1;
            let cand: BTreeSet<Vector> = comb.iter().map(|&i| useful[i].clone()).collect();
            if check_conditions(task, &cand) == Verdict::Ok {
                return Ok(Restriction::Solvable(cand));
            }
            if !next_combination(&mut comb, m) {
                break;
            }
        }
    }
    Ok(Restriction::Unsolvable(first))
}

fn next_combination(comb: &mut [usize], m: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < m - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::super::model::{consensus, discretized_agreement, identity3, weak_leader};
    use super::*;
    use std::collections::BTreeMap;

    fn v(a: &str, b: &str) -> Vector {
        vec![a.into(), b.into()]
    }

    #[test]
    fn consensus_fails_connectivity_at_mixed_input() {
        let t = consensus();
        assert_eq!(check_conditions(&t, &t.outputs), Verdict::FailsConnectivity(v("0", "1")));
        assert!(matches!(find_restriction(&t, 1000).unwrap(), Restriction::Unsolvable(_)));
    }

    #[test]
    fn agreement_passes_with_all_outputs() {
        let t = discretized_agreement(3);
        assert_eq!(check_conditions(&t, &t.outputs), Verdict::Ok);
        assert_eq!(find_restriction(&t, 10).unwrap(), Restriction::Solvable(t.outputs.clone()));
    }

    #[test]
    fn singleton_output_task() {
        let mut legal = BTreeMap::new();
        for x in [v("0", "0"), v("0", "1"), v("1", "0"), v("1", "1")] {
            legal.insert(x, BTreeSet::from([v("z", "z")]));
        }
        let t = Task::new("const", 2, legal).unwrap();
        assert_eq!(check_conditions(&t, &t.outputs), Verdict::Ok);
    }

    #[test]
    fn toy_tasks_are_solvable() {
        for t in [identity3(), weak_leader()] {
            assert!(matches!(find_restriction(&t, 10_000).unwrap(), Restriction::Solvable(_)), "{}", t.name);
        }
    }

    #[test]
    fn shortest_path_is_lexicographic() {
        let g = OutputGraph::new(&[v("0", "0"), v("0", "1"), v("1", "0"), v("1", "1")]);
        let p = g.shortest_path(&v("0", "0"), |y| y == &v("1", "1")).unwrap();
        assert_eq!(p, vec![v("0", "0"), v("0", "1"), v("1", "1")]);
    }

    #[test]
    fn combinations_enumerate() {
        let mut c = vec![0, 1];
        let mut n = 1;
        while next_combination(&mut c, 4) {
            n += 1;
        }
        assert_eq!(n, 6);
    }
}
