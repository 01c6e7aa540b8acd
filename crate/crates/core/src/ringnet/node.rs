use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::codec::{encode, Deframer};
use super::topology::Topology;
use crate::shmem::{Action, Observation, Pid, ProcessProgram, ProtocolFault, RegisterSpec, StepResult, System, Width};

/// Alternating-bit sender: when the ack equals the alternation bit, the next
/// bit goes out tagged with the flipped alternation bit.
pub fn abp_send(a: bool, ack: bool, bit: bool) -> Option<(bool, bool)> {
    (ack == a).then_some((bit, !a))
}

/// Alternating-bit receiver: a tag different from the last ack carries a new bit.
pub fn abp_receive(ack: bool, data: bool, tag: bool) -> Option<bool> {
    (tag != ack).then_some(data)
}

pub const SEQ_BITS: u32 = 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    pub src: usize,
    pub dst: usize,
    pub seq: u32,
    pub payload: Vec<bool>,
}

fn push_num(out: &mut Vec<bool>, v: u64, width: u32) {
    out.extend((0..width).rev().map(|k| v >> k & 1 == 1));
}

fn take_num(bits: &[bool], at: &mut usize, width: u32) -> Option<u64> {
    let s = bits.get(*at..*at + width as usize)?;
    *at += width as usize;
    Some(s.iter().fold(0, |acc, &b| acc << 1 | b as u64))
}

pub fn node_bits(n: usize) -> u32 {
    64 - (n as u64).leading_zeros()
}

impl Frame {
    pub fn to_bits(&self, n: usize) -> Vec<bool> {
        let w = node_bits(n);
        let mut out = Vec::new();
        push_num(&mut out, self.src as u64, w);
        push_num(&mut out, self.dst as u64, w);
        push_num(&mut out, self.seq as u64, SEQ_BITS);
        out.extend(&self.payload);
        out
    }

    pub fn from_bits(bits: &[bool], n: usize) -> Option<Frame> {
        let w = node_bits(n);
        let mut at = 0;
        let src = take_num(bits, &mut at, w)? as usize;
        let dst = take_num(bits, &mut at, w)? as usize;
        let seq = take_num(bits, &mut at, SEQ_BITS)? as u32;
        Some(Frame { src, dst, seq, payload: bits[at..].to_vec() })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NodeInput {
    /// Messages this node originates, as (destination, payload bits).
    pub sends: Vec<(usize, Vec<bool>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Port {
    Out(usize),
    In(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeOp {
    ReadSucc(usize),
    WriteOut(usize),
    ReadPred(usize),
    WriteAck(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Delivery {
    pub src: usize,
    pub seq: u32,
    pub payload: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeState {
    pub me: usize,
    pub word: u64,
    pub alt: Vec<bool>,
    pub ack: Vec<bool>,
    pub outq: Vec<VecDeque<bool>>,
    pub inbox: Vec<Deframer>,
    pub seen: BTreeSet<(usize, usize, u32)>,
    pub next_seq: BTreeMap<usize, u32>,
    pub expected: BTreeMap<usize, u32>,
    pub holdback: BTreeMap<(usize, u32), Vec<bool>>,
    pub delivered: Vec<Delivery>,
    pub duplicates: u64,
    pub cursor: usize,
    pub op: Option<NodeOp>,
}

/// One ring node: forwards unseen frames on all out-links, delivers frames
/// addressed to it in per-source sequence order.
#[derive(Clone, Debug)]
pub struct RingNode {
    pub topo: Topology,
}

fn bit(w: u64, k: usize) -> bool {
    w >> k & 1 == 1
}

fn set_bit(w: &mut u64, k: usize, v: bool) {
    *w = *w & !(1 << k) | (v as u64) << k;
}

impl RingNode {
    fn links(&self) -> usize {
        self.topo.t + 1
    }

    fn ack_bit(&self, m: usize) -> usize {
        2 * self.links() + m
    }

    fn flood(&self, s: &mut NodeState, f: &Frame) {
        let wire = encode(&f.to_bits(self.topo.n));
        for q in &mut s.outq {
            q.extend(&wire);
        }
    }

    fn on_frame(&self, s: &mut NodeState, f: Frame) {
        if !s.seen.insert((f.src, f.dst, f.seq)) {
            s.duplicates += 1;
            return;
        }
        if f.dst != s.me {
            self.flood(s, &f);
            return;
        }
        s.holdback.insert((f.src, f.seq), f.payload);
        let next = s.expected.entry(f.src).or_insert(0);
        while let Some(p) = s.holdback.remove(&(f.src, *next)) {
            s.delivered.push(Delivery { src: f.src, seq: *next, payload: p });
            *next += 1;
        }
    }

    /// Next operation from the port after the cursor, skipping idle out-links.
    fn next_op(&self, mut s: NodeState) -> StepResult<Self> {
        let ports = 2 * self.links();
        for _ in 0..ports {
            s.cursor = (s.cursor + 1) % ports;
            let port = if s.cursor < self.links() { Port::Out(s.cursor) } else { Port::In(s.cursor - self.links()) };
            match port {
                Port::Out(k) if !s.outq[k].is_empty() => {
                    s.op = Some(NodeOp::ReadSucc(k));
                    let reg = self.topo.successors(s.me)[k] - 1;
                    return Ok((Action::Read { reg }, s));
                }
                Port::Out(_) => {}
                Port::In(m) => {
                    s.op = Some(NodeOp::ReadPred(m));
                    let reg = self.topo.predecessor(s.me, m) - 1;
                    return Ok((Action::Read { reg }, s));
                }
            }
        }
        unreachable!("an in-port is always available")
    }

    fn write_own(&self, mut s: NodeState, op: NodeOp) -> StepResult<Self> {
        s.op = Some(op);
        let reg = s.me - 1;
        let value = s.word;
        Ok((Action::Write { reg, value }, s))
    }
}

impl ProcessProgram for RingNode {
    type Input = NodeInput;
    type State = NodeState;
    type Value = u64;
    type Output = String;

    fn init(&self, pid: Pid, input: &NodeInput) -> NodeState {
        let l = self.links();
        let mut s = NodeState {
            me: pid.0,
            word: 0,
            alt: vec![false; l],
            ack: vec![false; l],
            outq: vec![VecDeque::new(); l],
            inbox: vec![Deframer::default(); l],
            seen: BTreeSet::new(),
            next_seq: BTreeMap::new(),
            expected: BTreeMap::new(),
            holdback: BTreeMap::new(),
            delivered: Vec::new(),
            duplicates: 0,
            cursor: 2 * l - 1,
            op: None,
        };
        for (dst, payload) in &input.sends {
            let seq = s.next_seq.entry(*dst).or_insert(0);
            let f = Frame { src: s.me, dst: *dst, seq: *seq, payload: payload.clone() };
            *seq += 1;
            s.seen.insert((f.src, f.dst, f.seq));
            self.flood(&mut s, &f);
        }
        s
    }

    fn step(&self, mut s: NodeState, obs: Observation<u64>) -> StepResult<Self> {
        match (s.op, obs) {
            (None, Observation::Start) => self.next_op(s),
            (Some(NodeOp::ReadSucc(k)), Observation::Value(w)) => {
                let ack = bit(w.unwrap_or(0), self.ack_bit(k));
                let front = *s.outq[k].front().expect("busy out-link");
                match abp_send(s.alt[k], ack, front) {
                    Some((data, tag)) => {
                        set_bit(&mut s.word, 2 * k, data);
                        set_bit(&mut s.word, 2 * k + 1, tag);
                        self.write_own(s, NodeOp::WriteOut(k))
                    }
                    None => self.next_op(s),
                }
            }
            (Some(NodeOp::WriteOut(k)), Observation::Written) => {
                s.alt[k] = !s.alt[k];
                s.outq[k].pop_front();
                self.next_op(s)
            }
            (Some(NodeOp::ReadPred(m)), Observation::Value(w)) => {
                let w = w.unwrap_or(0);
                match abp_receive(s.ack[m], bit(w, 2 * m), bit(w, 2 * m + 1)) {
                    Some(b) => {
                        s.ack[m] = !s.ack[m];
                        let at = self.ack_bit(m);
                        let v = s.ack[m];
                        set_bit(&mut s.word, at, v);
                        if let Some(bits) = s.inbox[m].push(b) {
                            let f = Frame::from_bits(&bits, self.topo.n)
                                .ok_or_else(|| ProtocolFault::new("MalformedFrame", format!("{} bits", bits.len())))?;
                            self.on_frame(&mut s, f);
                        }
                        self.write_own(s, NodeOp::WriteAck(m))
                    }
                    None => self.next_op(s),
                }
            }
            (Some(NodeOp::WriteAck(_)), Observation::Written) => self.next_op(s),
            (_, obs) => Err(ProtocolFault::unexpected(&obs)),
        }
    }
}

/// Bits of shared state each node owns.
pub fn register_bits(t: usize) -> u32 {
    3 * (t as u32 + 1)
}

pub fn ring_system(topo: Topology) -> System<RingNode> {
    let regs = (1..=topo.n)
        .map(|i| RegisterSpec::new(format!("N{i}"), Pid(i), Width::Bits(register_bits(topo.t))).init(0))
        .collect();
    let t = topo.t;
    System::new(vec![RingNode { topo: topo.clone() }; topo.n], regs).with_resiliency(t)
}
