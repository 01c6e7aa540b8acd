use std::fmt;

use thiserror::Error;

use crate::shmem::Pid;

/// One simulated round as seen by a process: entry `j` is what process `j+1`
/// wrote, or `None` when unseen.
pub type RoundView = [Option<u64>; 2];

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unrealizable history at round {round}: {reason}")]
pub struct UnrealizableHistory {
    pub round: usize,
    pub reason: String,
}

/// Final label of a (possibly shortened) two-process IS run: the process, the
/// number of rounds it completed, and its vertex on that round's path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub pid: Pid,
    pub round: u32,
    pub position: u64,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}:{}", self.pid, self.round, self.position)
    }
}

/// A two-process IS protocol whose per-round writes are a function of the
/// views so far and whose labels locate the final state on the path.
pub trait Labelling: fmt::Debug + Send + Sync {
    /// Width of the value written in `round` (1-based).
    fn bits(&self, round: u32) -> u32;

    /// Value written in round `views.len() + 1`.
    fn write(&self, me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory>;

    /// Vertex index after `views.len()` rounds, in `0..=3^rounds`.
    fn position(&self, me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory>;

    fn label(&self, me: Pid, views: &[RoundView]) -> Result<Label, UnrealizableHistory> {
        Ok(Label { pid: me, round: views.len() as u32, position: self.position(me, views)? })
    }

    /// Largest per-round width up to `rounds`.
    fn max_bits(&self, rounds: u32) -> u32 {
        (1..=rounds).map(|r| self.bits(r)).max().unwrap_or(1)
    }
}

pub fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

fn pow3(r: usize) -> u64 {
    3u64.pow(r as u32)
}

/// One round of subdivision: solo keeps to the own end (`3a`), seeing the
/// neighbour `b` moves next to it (`a + 2b`).
fn advance(a: u64, other: Option<u64>, round: usize) -> Result<u64, UnrealizableHistory> {
    match other {
        None => Ok(3 * a),
        Some(b) if a.abs_diff(b) == 1 && b <= pow3(round - 1) => Ok(a + 2 * b),
        Some(b) => Err(UnrealizableHistory { round, reason: format!("position {a} cannot see neighbour {b}") }),
    }
}

/// Path position from a history whose entries are the previous positions.
pub fn path_position(me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory> {
    let mut a = me.idx() as u64;
    for (i, v) in views.iter().enumerate() {
        let round = i + 1;
        if v[me.idx()] != Some(a) {
            return Err(UnrealizableHistory { round, reason: format!("own entry {:?} is not {a}", v[me.idx()]) });
        }
        a = advance(a, v[me.other().idx()], round)?;
    }
    Ok(a)
}

/// Writes the whole previous position each round.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullInfoLabelling;

impl Labelling for FullInfoLabelling {
    fn bits(&self, round: u32) -> u32 {
        bit_length(pow3(round as usize - 1))
    }

    fn write(&self, me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory> {
        path_position(me, views)
    }

    fn position(&self, me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory> {
        path_position(me, views)
    }
}

/// Writes one bit per round, bit 1 of the previous position. The two possible
/// neighbours `a-1` and `a+1` differ in that bit, so the reader recovers the
/// writer's position from it.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParityLabelling;

fn parity_bit(pos: u64) -> u64 {
    pos >> 1 & 1
}

impl Labelling for ParityLabelling {
    fn bits(&self, _round: u32) -> u32 {
        1
    }

    fn write(&self, me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory> {
        Ok(parity_bit(self.position(me, views)?))
    }

    fn position(&self, me: Pid, views: &[RoundView]) -> Result<u64, UnrealizableHistory> {
        let mut a = me.idx() as u64;
        for (i, v) in views.iter().enumerate() {
            let round = i + 1;
            if v[me.idx()] != Some(parity_bit(a)) {
                return Err(UnrealizableHistory { round, reason: "own bit does not match own position".into() });
            }
            let other = match v[me.other().idx()] {
                None => None,
                Some(bit) => {
                    let b = [a.checked_sub(1), Some(a + 1)]
                        .into_iter()
                        .flatten()
                        .find(|&b| b <= pow3(round - 1) && parity_bit(b) == bit)
                        .ok_or_else(|| UnrealizableHistory { round, reason: format!("no neighbour of {a} writes {bit}") })?;
                    Some(b)
                }
            };
            a = advance(a, other, round)?;
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_round_positions() {
        let (p1, p2) = (Pid(1), Pid(2));
        assert_eq!(path_position(p1, &[[Some(0), None]]), Ok(0));
        assert_eq!(path_position(p2, &[[None, Some(1)]]), Ok(3));
        assert_eq!(path_position(p1, &[[Some(0), Some(1)]]), Ok(2));
        assert_eq!(path_position(p2, &[[Some(0), Some(1)]]), Ok(1));
        assert!(path_position(p1, &[[Some(0), Some(3)]]).is_err());
    }

    #[test]
    fn solo_ends() {
        for r in 1..6 {
            let solo1: Vec<RoundView> = (0..r).map(|_| [Some(0), None]).collect();
            assert_eq!(path_position(Pid(1), &solo1), Ok(0));
            let mut a = 1;
            let mut solo2 = Vec::new();
            for _ in 0..r {
                solo2.push([None, Some(a)]);
                a *= 3;
            }
            assert_eq!(path_position(Pid(2), &solo2), Ok(3u64.pow(r)));
        }
    }
}
