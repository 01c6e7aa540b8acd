use super::topology::RingError;

/// Data bits interleaved with separators: 0 after every bit but the last,
/// which is followed by 1. The empty message is the single bit 1.
pub fn encode(bits: &[bool]) -> Vec<bool> {
    if bits.is_empty() {
        return vec![true];
    }
    let mut out = Vec::with_capacity(2 * bits.len());
    for (i, &b) in bits.iter().enumerate() {
        out.push(b);
        out.push(i + 1 == bits.len());
    }
    out
}

/// Decode one message from the front of `wire`; returns it with the number of
/// wire bits consumed. A lone `1` is the empty message, so the empty message
/// can only be recognised as a whole wire.
pub fn decode(wire: &[bool]) -> Result<(Vec<bool>, usize), RingError> {
    if wire == [true] {
        return Ok((Vec::new(), 1));
    }
    let mut out = Vec::new();
    for (k, pair) in wire.chunks(2).enumerate() {
        let [b, sep] = pair else {
            return Err(RingError::MalformedWire("stream ends mid-pair".into()));
        };
        out.push(*b);
        if *sep {
            return Ok((out, 2 * k + 2));
        }
    }
    Err(RingError::MalformedWire("missing terminator".into()))
}

/// Incremental decoder for one link carrying nonempty messages.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Deframer {
    data: Vec<bool>,
    pending: Option<bool>,
}

impl Deframer {
    /// Feed one wire bit; returns a message when its terminator arrives.
    pub fn push(&mut self, bit: bool) -> Option<Vec<bool>> {
        match self.pending.take() {
            None => {
                self.pending = Some(bit);
                None
            }
            Some(d) => {
                self.data.push(d);
                bit.then(|| std::mem::take(&mut self.data))
            }
        }
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

/// Bytes MSB-first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&b| (0..8).rev().map(move |k| b >> k & 1 == 1)).collect()
}

pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().fold(0u8, |acc, &b| acc << 1 | b as u8) << (8 - c.len())).collect()
}

pub fn parse_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
