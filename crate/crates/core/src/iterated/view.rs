use std::fmt;
use std::sync::Arc;

use crate::shmem::Pid;

/// A process's knowledge after some number of rounds, tagged with its owner so
/// that equal views of different processes stay distinct.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum View {
    Input { owner: Pid, value: u64 },
    Round { owner: Pid, round: u32, entries: Vec<Option<ViewRef>> },
}

pub type ViewRef = Arc<View>;

impl View {
    pub fn input(owner: Pid, value: u64) -> ViewRef {
        Arc::new(View::Input { owner, value })
    }

    pub fn owner(&self) -> Pid {
        match self {
            View::Input { owner, .. } | View::Round { owner, .. } => *owner,
        }
    }

    pub fn round(&self) -> u32 {
        match self {
            View::Input { .. } => 0,
            View::Round { round, .. } => *round,
        }
    }

    pub fn entries(&self) -> Option<&[Option<ViewRef>]> {
        match self {
            View::Input { .. } => None,
            View::Round { entries, .. } => Some(entries),
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            View::Input { value, .. } => write!(f, "{value}"),
            View::Round { entries, .. } => {
                write!(f, "[")?;
                for (i, e) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    match e {
                        Some(v) => write!(f, "{v}")?,
                        None => write!(f, "_")?,
                    }
                }
                write!(f, "]")
            }
        }
    }
}

impl fmt::Debug for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.owner(), self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VecOrder {
    Subset,
    Superset,
    Equal,
    Incomparable,
}

/// `a ⊂ b`: `b`'s gaps are gaps of `a`, `a`'s entries agree with `b`, and
/// `b` has an entry where `a` has a gap.
pub fn strictly_below<T: PartialEq>(a: &[Option<T>], b: &[Option<T>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (_, None) => x.is_none(),
            (Some(x), Some(y)) => x == y,
            (None, Some(_)) => true,
        })
        && a.iter().zip(b).any(|(x, y)| x.is_none() && y.is_some())
}

pub fn vector_order<T: PartialEq>(a: &[Option<T>], b: &[Option<T>]) -> VecOrder {
    if a == b {
        VecOrder::Equal
    } else if strictly_below(a, b) {
        VecOrder::Subset
    } else if strictly_below(b, a) {
        VecOrder::Superset
    } else {
        VecOrder::Incomparable
    }
}

/// `a ⊆ b`.
pub fn below_or_equal<T: PartialEq>(a: &[Option<T>], b: &[Option<T>]) -> bool {
    matches!(vector_order(a, b), VecOrder::Subset | VecOrder::Equal)
}

/// A vector of optional words, printed as `[1,⊥,3]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordVec(pub Vec<Option<u64>>);

impl fmt::Display for WordVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.map_or("⊥".into(), |v| v.to_string())).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl fmt::Debug for WordVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_examples() {
        assert_eq!(vector_order(&[None, Some(5)], &[Some(3), Some(5)]), VecOrder::Subset);
        assert_eq!(vector_order(&[Some(3), None], &[None, Some(5)]), VecOrder::Incomparable);
        assert_eq!(vector_order(&[Some(3), None], &[Some(3), None]), VecOrder::Equal);
        assert_eq!(vector_order(&[Some(3), Some(5)], &[None, Some(5)]), VecOrder::Superset);
        assert_eq!(vector_order(&[Some(4), None], &[Some(3), Some(5)]), VecOrder::Incomparable);
    }
}
