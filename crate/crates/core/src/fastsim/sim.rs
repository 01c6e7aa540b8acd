use std::sync::Arc;

use super::labelling::{bit_length, Label, Labelling, RoundView};
use crate::shmem::{Action, Observation, Pid, ProcessProgram, ProtocolFault, RegId, RegisterSpec, StepResult, System, Width};

/// Steps from `from` to `to` on the oriented ring of `2*delta + 1` nodes.
pub fn ring_distance(from: u64, to: u64, delta: u64) -> u64 {
    let m = 2 * delta + 1;
    (to + m - from % m) % m
}

/// Field layout of a simulation register: ring position in the low bits, then
/// the history oldest-to-newest, `b` bits per entry, unwritten entries as 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Packing {
    pub delta: u32,
    pub b: u32,
}

impl Packing {
    pub fn x_bits(&self) -> u32 {
        bit_length(2 * self.delta as u64)
    }

    pub fn width(&self) -> u32 {
        self.x_bits() + self.b * (self.delta + 1)
    }

    /// `h[0]` is the newest entry.
    pub fn pack(&self, x: u64, h: &[Option<u64>]) -> u64 {
        let mut w = 0u64;
        for e in h.iter() {
            w = w << self.b | e.unwrap_or(0);
        }
        w << self.x_bits() | x
    }

    pub fn unpack(&self, w: u64) -> (u64, Vec<u64>) {
        let x = w & ((1 << self.x_bits()) - 1);
        let mask = (1u64 << self.b) - 1;
        let body = w >> self.x_bits();
        let h = (0..=self.delta).rev().map(|k| body >> (self.b * k) & mask).collect();
        (x, h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimPhase {
    Write,
    Read,
    Done,
}

/// Local state of the constant-size simulation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimCore {
    pub me: Pid,
    pub delta: u32,
    pub rounds: u32,
    pub r: u32,
    pub x: u64,
    pub estr: u64,
    pub xprec: u64,
    pub c: u32,
    pub h: Vec<Option<u64>>,
    pub views: Vec<RoundView>,
    pub phase: SimPhase,
}

impl SimCore {
    pub fn new(me: Pid, delta: u32, rounds: u32) -> Self {
        SimCore {
            me,
            delta,
            rounds,
            r: 0,
            x: 0,
            estr: 0,
            xprec: 0,
            c: 0,
            h: vec![None; delta as usize + 1],
            views: Vec::new(),
            phase: SimPhase::Write,
        }
    }

    /// Start the next round; returns the word to write.
    pub fn begin_round<L: Labelling + ?Sized>(&mut self, l: &L, pack: &Packing) -> Result<u64, ProtocolFault> {
        self.r += 1;
        self.x = self.r as u64 % (2 * self.delta as u64 + 1);
        let v = l.write(self.me, &self.views).map_err(|e| ProtocolFault::new("UnrealizableHistory", e.to_string()))?;
        self.h.rotate_right(1);
        self.h[0] = Some(v);
        let mut view = [None, None];
        view[self.me.idx()] = Some(v);
        self.views.push(view);
        self.phase = SimPhase::Read;
        Ok(pack.pack(self.x, &self.h))
    }

    /// Absorb the other's register; `true` when the simulation is over.
    pub fn absorb<L: Labelling + ?Sized>(&mut self, word: u64, pack: &Packing) -> Result<bool, ProtocolFault> {
        let (xo, ho) = pack.unpack(word);
        self.estr += ring_distance(self.xprec, xo, self.delta as u64);
        self.xprec = xo;
        let r = self.r as u64;
        let other = self.me.other().idx();
        if r <= self.estr {
            let d = self.estr - r;
            if d > self.delta as u64 {
                return Err(ProtocolFault::new(
                    "HistoryIndexOut",
                    format!("{:?} round {r}: estimate {} is {d} rounds ahead", self.me, self.estr),
                ));
            }
            self.views.last_mut().unwrap()[other] = Some(ho[d as usize]);
            self.c = 0;
        } else {
            self.c += 1;
        }
        let done = self.c == self.delta || self.r == self.rounds;
        self.phase = if done { SimPhase::Done } else { SimPhase::Write };
        Ok(done)
    }

    pub fn label<L: Labelling + ?Sized>(&self, l: &L) -> Result<Label, ProtocolFault> {
        l.label(self.me, &self.views).map_err(|e| ProtocolFault::new("UnrealizableHistory", e.to_string()))
    }
}

/// Registers `R1`, `R2` of the simulation start at index 0.
pub const SIM_REG: [RegId; 2] = [0, 1];

pub fn sim_registers(pack: &Packing) -> Vec<RegisterSpec<u64>> {
    (1..=2)
        .map(|i| RegisterSpec::new(format!("R{i}"), Pid(i), Width::Bits(pack.width())).init(0))
        .collect()
}

/// The simulation on its own: returns the label.
#[derive(Debug)]
pub struct SimProgram<L> {
    pub labelling: Arc<L>,
    pub delta: u32,
    pub rounds: u32,
    pub pack: Packing,
}

impl<L> Clone for SimProgram<L> {
    fn clone(&self) -> Self {
        SimProgram { labelling: self.labelling.clone(), delta: self.delta, rounds: self.rounds, pack: self.pack }
    }
}

impl<L: Labelling> SimProgram<L> {
    pub fn new(labelling: Arc<L>, delta: u32, rounds: u32) -> Self {
        assert!(delta >= 2 && rounds >= 1, "window must be at least 2 and rounds at least 1");
        let pack = Packing { delta, b: labelling.max_bits(rounds) };
        SimProgram { labelling, delta, rounds, pack }
    }
}

impl<L: Labelling> ProcessProgram for SimProgram<L> {
    type Input = ();
    type State = SimCore;
    type Value = u64;
    type Output = Label;

    fn init(&self, pid: Pid, _: &()) -> SimCore {
        SimCore::new(pid, self.delta, self.rounds)
    }

    fn step(&self, mut s: SimCore, obs: Observation<u64>) -> StepResult<Self> {
        match (s.phase, obs) {
            (SimPhase::Write, Observation::Start) => {
                let w = s.begin_round(self.labelling.as_ref(), &self.pack)?;
                Ok((Action::Write { reg: SIM_REG[s.me.idx()], value: w }, s))
            }
            (SimPhase::Read, Observation::Written) => Ok((Action::Read { reg: SIM_REG[s.me.other().idx()] }, s)),
            (SimPhase::Read, Observation::Value(v)) => {
                let word = v.unwrap_or(0);
                if s.absorb::<L>(word, &self.pack)? {
                    let label = s.label(self.labelling.as_ref())?;
                    return Ok((Action::Decide(label), s));
                }
                let w = s.begin_round(self.labelling.as_ref(), &self.pack)?;
                Ok((Action::Write { reg: SIM_REG[s.me.idx()], value: w }, s))
            }
            (_, obs) => Err(ProtocolFault::unexpected(&obs)),
        }
    }
}

pub fn sim_system<L: Labelling>(labelling: Arc<L>, delta: u32, rounds: u32) -> System<SimProgram<L>> {
    let p = SimProgram::new(labelling, delta, rounds);
    let regs = sim_registers(&p.pack);
    System::new(vec![p.clone(), p], regs)
}
