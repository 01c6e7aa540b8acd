use std::fmt::{self, Debug};
use std::hash::Hash;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Process identifier, 1-based as in the usual `p_1 .. p_n` naming.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pid(pub usize);

impl Pid {
    pub fn from_idx(idx: usize) -> Pid {
        Pid(idx + 1)
    }

    /// Zero-based slot index.
    pub fn idx(self) -> usize {
        self.0 - 1
    }

    /// The other process of a two-process system.
    pub fn other(self) -> Pid {
        Pid(3 - self.0)
    }
}

impl fmt::Debug for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type RegId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Width {
    Bits(u32),
    /// Registers holding structured values (full-information views).
    Unbounded,
}

impl Width {
    pub fn bits(self) -> Option<u32> {
        match self {
            Width::Bits(b) => Some(b),
            Width::Unbounded => None,
        }
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Width::Bits(b) => write!(f, "{b} bits"),
            Width::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// Anything a register may hold.
pub trait RegisterValue: Clone + Eq + Hash + Debug + Send + Sync + 'static {
    fn fits(&self, width: Width) -> bool;

    /// Integer encoding, when the value is a plain word.
    fn word(&self) -> Option<u64>;
}

impl RegisterValue for u64 {
    fn fits(&self, width: Width) -> bool {
        match width {
            Width::Bits(b) if b >= 64 => true,
            Width::Bits(b) => *self < (1u64 << b),
            Width::Unbounded => true,
        }
    }

    fn word(&self) -> Option<u64> {
        Some(*self)
    }
}

impl<T: Clone + Eq + Hash + Debug + Send + Sync + 'static> RegisterValue for Arc<T> {
    fn fits(&self, width: Width) -> bool {
        width == Width::Unbounded
    }

    fn word(&self) -> Option<u64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegisterSpec<V> {
    pub name: String,
    pub owner: Pid,
    pub width: Width,
    pub write_once: bool,
    /// `None` is the unwritten sentinel.
    pub initial: Option<V>,
}

impl<V: RegisterValue> RegisterSpec<V> {
    pub fn new(name: impl Into<String>, owner: Pid, width: Width) -> Self {
        RegisterSpec { name: name.into(), owner, width, write_once: false, initial: None }
    }

    pub fn write_once(mut self) -> Self {
        self.write_once = true;
        self
    }

    pub fn init(mut self, value: V) -> Self {
        self.initial = Some(value);
        self
    }
}

/// Render the given registers as a fixed-width bit string, MSB first.
///
/// Unwritten registers render as `-` per bit; unbounded registers take 64 columns.
pub fn register_word<V: RegisterValue>(
    specs: &[RegisterSpec<V>],
    bank: &[Option<V>],
    subset: &[RegId],
) -> String {
    let mut out = String::new();
    for &reg in subset {
        let width = specs[reg].width.bits().unwrap_or(64).min(64) as usize;
        match bank[reg].as_ref().and_then(|v| v.word()) {
            Some(w) => {
                for bit in (0..width).rev() {
                    out.push(if (w >> bit) & 1 == 1 { '1' } else { '0' });
                }
            }
            None => out.extend(std::iter::repeat('-').take(width)),
        }
    }
    out
}
