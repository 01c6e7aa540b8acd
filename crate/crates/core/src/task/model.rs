use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A full vector of per-process values.
pub type Vector = Vec<String>;

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("task JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed task: {0}")]
    Invalid(String),
    #[error("search budget of {0} candidate subsets exhausted")]
    BudgetExhausted(u64),
    #[error("task is not solvable: {0}")]
    Unsolvable(String),
}

/// A vector with exactly one missing coordinate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartialVector {
    pub entries: Vec<Option<String>>,
}

impl PartialVector {
    /// Drop coordinate `missing` (0-based) of a full vector.
    pub fn hide(full: &[String], missing: usize) -> Self {
        let entries = full
            .iter()
            .enumerate()
            .map(|(i, v)| (i != missing).then(|| v.clone()))
            .collect();
        PartialVector { entries }
    }

    pub fn missing(&self) -> usize {
        self.entries.iter().position(Option::is_none).expect("one coordinate is missing")
    }

    pub fn is_extended_by(&self, full: &[String]) -> bool {
        self.entries.len() == full.len()
            && self.entries.iter().zip(full).all(|(p, f)| p.as_ref().is_none_or(|p| p == f))
    }
}

impl fmt::Display for PartialVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.entries.iter().map(|e| e.as_deref().unwrap_or("⊥")).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn show(v: &[String]) -> String {
    format!("({})", v.join(","))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct LegalEntry {
    input: Vector,
    outputs: Vec<Vector>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct TaskFile {
    n: usize,
    inputs: Vec<Vector>,
    outputs: Vec<Vector>,
    legal: Vec<LegalEntry>,
}

/// A finite task: input vectors, output vectors and the legal outputs of each input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub n: usize,
    pub inputs: BTreeSet<Vector>,
    pub outputs: BTreeSet<Vector>,
    pub legal: BTreeMap<Vector, BTreeSet<Vector>>,
}

impl Task {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        legal: BTreeMap<Vector, BTreeSet<Vector>>,
    ) -> Result<Self, TaskError> {
        let inputs = legal.keys().cloned().collect();
        let outputs = legal.values().flatten().cloned().collect();
        let t = Task { name: name.into(), n, inputs, outputs, legal };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: String| Err(TaskError::Invalid(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        for v in self.inputs.iter().chain(&self.outputs) {
            if v.len() != self.n {
                return bad(format!("vector {} has length {}, expected {}", show(v), v.len(), self.n));
            }
        }
        for x in &self.inputs {
            match self.legal.get(x) {
                None => return bad(format!("no legal outputs for input {}", show(x))),
                Some(ys) if ys.is_empty() => return bad(format!("empty legal set for {}", show(x))),
                Some(ys) => {
                    if let Some(y) = ys.iter().find(|y| !self.outputs.contains(*y)) {
                        return bad(format!("legal output {} not among outputs", show(y)));
                    }
                }
            }
        }
        if let Some(x) = self.legal.keys().find(|x| !self.inputs.contains(*x)) {
            return bad(format!("legal entry for unknown input {}", show(x)));
        }
        Ok(())
    }

    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self, TaskError> {
        let f: TaskFile = serde_json::from_str(text)?;
        let mut legal = BTreeMap::new();
        for e in f.legal {
            let set: BTreeSet<Vector> = e.outputs.into_iter().collect();
            if legal.insert(e.input.clone(), set).is_some() {
                return Err(TaskError::Invalid(format!("duplicate legal entry for {}", show(&e.input))));
            }
        }
        let t = Task {
            name: name.into(),
            n: f.n,
            inputs: f.inputs.into_iter().collect(),
            outputs: f.outputs.into_iter().collect(),
            legal,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        let f = TaskFile {
            n: self.n,
            inputs: self.inputs.iter().cloned().collect(),
            outputs: self.outputs.iter().cloned().collect(),
            legal: self
                .legal
                .iter()
                .map(|(x, ys)| LegalEntry { input: x.clone(), outputs: ys.iter().cloned().collect() })
                .collect(),
        };
        serde_json::to_string_pretty(&f).expect("task serializes")
    }

    pub fn legal(&self, x: &[String]) -> &BTreeSet<Vector> {
        &self.legal[x]
    }

    /// Every partial input obtained by hiding one coordinate of an input.
    pub fn partial_inputs(&self) -> BTreeSet<PartialVector> {
        self.inputs
            .iter()
            .flat_map(|x| (0..self.n).map(move |i| PartialVector::hide(x, i)))
            .collect()
    }

    pub fn extensions<'a>(&'a self, p: &'a PartialVector) -> impl Iterator<Item = &'a Vector> + 'a {
        self.inputs.iter().filter(move |x| p.is_extended_by(x))
    }

    /// Sorted list of every value appearing in some input vector.
    pub fn input_values(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.inputs.iter().flatten().collect();
        set.into_iter().cloned().collect()
    }
}

fn vec2(a: &str, b: &str) -> Vector {
    vec![a.to_string(), b.to_string()]
}

/// Binary consensus for two processes.
pub fn consensus() -> Task {
    let mut legal = BTreeMap::new();
    for a in ["0", "1"] {
        for b in ["0", "1"] {
            let ys: BTreeSet<Vector> = [a, b].iter().map(|v| vec2(v, v)).collect();
            legal.insert(vec2(a, b), ys);
        }
    }
    Task::new("consensus", 2, legal).expect("well-formed")
}

/// Binary inputs; outputs on the grid `m/q`, pairwise within `1/q`, equal to
/// the common input when inputs agree.
pub fn discretized_agreement(q: i64) -> Task {
    let grid: Vec<String> = (0..=q).map(|m| crate::Frac::new(m, q).to_string()).collect();
    let mut all = BTreeSet::new();
    for a in 0..=q {
        for b in 0..=q {
            if (a - b).abs() <= 1 {
                all.insert(vec![grid[a as usize].clone(), grid[b as usize].clone()]);
            }
        }
    }
    let mut legal = BTreeMap::new();
    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let x = vec2(&a.to_string(), &b.to_string());
        let ys = if a == b {
            let g = &grid[(a * q) as usize];
            BTreeSet::from([vec![g.clone(), g.clone()]])
        } else {
            all.clone()
        };
        legal.insert(x, ys);
    }
    Task::new(format!("agreement-1/{q}"), 2, legal).expect("well-formed")
}

/// Each process outputs its own input; three input values per process.
pub fn identity3() -> Task {
    let vals = ["a", "b", "c"];
    let mut legal = BTreeMap::new();
    for a in vals {
        for b in vals {
            legal.insert(vec2(a, b), BTreeSet::from([vec2(a, b)]));
        }
    }
    Task::new("identity3", 2, legal).expect("well-formed")
}

/// Two-process binary inputs; a process must output a value some process started
/// with, and both may not output the "low" value 0 unless both inputs are 0.
/// Outputs range over {0,1,2} where 2 means "defer".
pub fn weak_leader() -> Task {
    let mut legal = BTreeMap::new();
    for a in ["0", "1"] {
        for b in ["0", "1"] {
            let mut ys = BTreeSet::new();
            for ya in ["0", "1", "2"] {
                for yb in ["0", "1", "2"] {
                    let seen_ok = |y: &str| y == "2" || y == a || y == b;
                    let not_both_deferring = !(ya == "2" && yb == "2");
                    let low_ok = !(ya == "0" && yb == "0") || (a == "0" && b == "0");
                    if seen_ok(ya) && seen_ok(yb) && not_both_deferring && low_ok {
                        ys.insert(vec2(ya, yb));
                    }
                }
            }
            legal.insert(vec2(a, b), ys);
        }
    }
    Task::new("weak-leader", 2, legal).expect("well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let t = discretized_agreement(3);
        let back = Task::from_json("agreement-1/3", &t.to_json()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn rejects_missing_legal() {
        let bad = r#"{"n":2,"inputs":[["0","0"]],"outputs":[["0","0"]],"legal":[]}"#;
        assert!(matches!(Task::from_json("x", bad), Err(TaskError::Invalid(_))));
    }

    #[test]
    fn partial_inputs_and_extensions() {
        let t = consensus();
        let ps = t.partial_inputs();
        assert_eq!(ps.len(), 4);
        let p = PartialVector::hide(&vec2("0", "1"), 0);
        assert_eq!(p.to_string(), "(⊥,1)");
        assert_eq!(t.extensions(&p).count(), 2);
    }

    #[test]
    fn agreement_sizes() {
        let t = discretized_agreement(3);
        assert_eq!(t.outputs.len(), 10);
        assert_eq!(t.legal(&vec2("1", "1")).len(), 1);
    }
}
