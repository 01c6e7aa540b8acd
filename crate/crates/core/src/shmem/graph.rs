use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{Debug, Display, Write as _};
use std::hash::Hash;

use super::register::Pid;

/// Final local states as vertices, joined when they end a common execution.
#[derive(Clone, Debug)]
pub struct ProtocolGraph<S, O> {
    vertices: Vec<(Pid, S, O)>,
    index: HashMap<(Pid, S), usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl<S: Clone + Eq + Hash + Debug, O: Clone + Eq + Display> Default for ProtocolGraph<S, O> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Clone + Eq + Hash + Debug, O: Clone + Eq + Display> ProtocolGraph<S, O> {
    pub fn new() -> Self {
        ProtocolGraph { vertices: Vec::new(), index: HashMap::new(), edges: BTreeSet::new() }
    }

    fn vertex(&mut self, pid: Pid, state: &S, out: &O) -> usize {
        if let Some(&v) = self.index.get(&(pid, state.clone())) {
            return v;
        }
        let v = self.vertices.len();
        self.vertices.push((pid, state.clone(), out.clone()));
        self.index.insert((pid, state.clone()), v);
        v
    }

    /// Add the decided processes of one execution.
    pub fn add_outcome(&mut self, outcome: &[(Pid, S, O)]) {
        let ids: Vec<usize> = outcome.iter().map(|(p, s, o)| self.vertex(*p, s, o)).collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                if outcome[i].0 != outcome[j].0 {
                    let (a, b) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                    self.edges.insert((a, b));
                }
            }
        }
    }

    pub fn from_outcomes<'a, I>(outcomes: I) -> Self
    where
        I: IntoIterator<Item = &'a [(Pid, S, O)]>,
        S: 'a,
        O: 'a,
    {
        let mut g = Self::new();
        for o in outcomes {
            g.add_outcome(o);
        }
        g
    }

    pub fn vertices(&self) -> &[(Pid, S, O)] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
            .collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        self.distances_from(0).iter().all(|d| d.is_some())
    }

    /// BFS hop counts from `src`.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let mut dist = vec![None; self.vertices.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dist[v].unwrap() + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Vertices in path order if the graph is a simple path.
    pub fn path_order(&self) -> Option<Vec<usize>> {
        let n = self.vertices.len();
        if n == 0 || self.edges.len() != n - 1 || !self.is_connected() {
            return None;
        }
        let adj = self.adjacency();
        if adj.iter().any(|a| a.len() > 2) {
            return None;
        }
        let start = (0..n).find(|&v| adj[v].len() <= 1)?;
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(&next) = adj[cur].iter().find(|&&w| w != prev) {
            order.push(next);
            prev = cur;
            cur = next;
        }
        Some(order)
    }

    pub fn is_simple_path(&self) -> bool {
        self.path_order().is_some()
    }

    /// Graphviz rendering; vertex labels are `pid:state-hash:decision`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph protocol {\n  edge [dir=none];\n");
        for (i, (pid, state, o)) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "  v{i} [label=\"{}:{:016x}:{}\"];", pid, state_hash(state), o);
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  v{a} -> v{b};");
        }
        out.push_str("}\n");
        out
    }
}

/// Stable FNV-1a hash of a state's debug rendering.
pub fn state_hash<S: Debug>(state: &S) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in format!("{state:?}").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_detection() {
        let mut g: ProtocolGraph<u8, u8> = ProtocolGraph::new();
        g.add_outcome(&[(Pid(1), 0, 0), (Pid(2), 0, 0)]);
        g.add_outcome(&[(Pid(1), 1, 1), (Pid(2), 0, 0)]);
        assert_eq!(g.path_order().map(|o| o.len()), Some(3));
        g.add_outcome(&[(Pid(1), 2, 1), (Pid(2), 0, 0)]);
        assert!(!g.is_simple_path());
    }

    #[test]
    fn solo_graph() {
        let g: ProtocolGraph<u8, u8> = ProtocolGraph::from_outcomes([&[(Pid(1), 7, 0)][..]]);
        assert_eq!(g.vertices().len(), 1);
        assert_eq!(g.edge_count(), 0);
        assert!(g.is_simple_path());
        assert!(g.to_dot().contains("1:"));
    }
}
