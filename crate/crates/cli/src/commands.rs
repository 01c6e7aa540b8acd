use std::collections::BTreeSet;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;
use std::sync::Arc;

use boundreg::eps2::{ak_system, exhaustive_summary, step_bound};
use boundreg::falsifier::{falsify, FalsifyBudget, FalsifyError, FalsifyOutcome};
use boundreg::fastsim::{
    check_witnesses, fast_step_bound, fast_summary, sim_system, Label, LabelTable, ParityLabelling, TableError,
    Valuation,
};
use boundreg::iterated::{check_onebit, enumerate_is, fullinfo_system, FiState, Mode, ViewRef};
use boundreg::ringnet::{parse_hex, run_ring, to_hex, RingConfig, RingRunError, SendSpec};
use boundreg::shmem::{
    explore_states, run, run_random, run_with, trace_to_jsonl, Bounds, Event, ExecError, Pid, ProcessProgram,
    ProtocolGraph, Trace,
};
use boundreg::task::{check_conformance, find_restriction, show, universal_system, Coverage, Restriction, Solver, Task, TaskError};
use boundreg::Frac;

use crate::config::RunConfig;
use crate::{CliError, Status};

type Out<'a> = &'a mut dyn Write;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| usage(format!("--{flag} is required")))
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::IllegalSchedule { .. } => CliError::Usage(e.to_string()),
            other => CliError::Fault(other.to_string()),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Exec(x) => x.into(),
            other => CliError::Fault(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_frac(s: &str) -> Result<Frac, CliError> {
    s.parse::<Frac>().map_err(|e| usage(e.to_string()))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| usage(format!("bad {what} {x:?}"))))
        .collect()
}

fn binary_inputs(s: &str, n: usize) -> Result<Vec<u8>, CliError> {
    let v: Vec<u8> = parse_list(s, "input")?;
    if v.len() != n || v.iter().any(|&x| x > 1) {
        return Err(usage(format!("--inputs needs {n} comma-separated bits, got {s:?}")));
    }
    Ok(v)
}

/// Tokens `1` or `p1` grant a step, `c1` crashes; separated by spaces, commas or newlines.
pub fn parse_schedule(text: &str) -> Result<Vec<Event>, CliError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (crash, num) = match t.as_bytes()[0] {
                b'c' | b'C' => (true, &t[1..]),
                b'p' | b'P' => (false, &t[1..]),
                _ => (false, t),
            };
            let p: usize = num.parse().map_err(|_| usage(format!("bad schedule token {t:?}")))?;
            if p == 0 {
                return Err(usage("processes are numbered from 1"));
            }
            Ok(if crash { Event::Crash(Pid(p)) } else { Event::Step(Pid(p)) })
        })
        .collect()
}

pub fn format_schedule(s: &[Event]) -> String {
    s.iter()
        .map(|e| match e {
            Event::Step(p) => format!("p{}", p.0),
            Event::Crash(p) => format!("c{}", p.0),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// JSONL goes to `--jsonl` if given, otherwise to stdout after a `trace:` line.
fn emit_trace<P: ProcessProgram>(cfg: &RunConfig, trace: &Trace<P>, out: Out) -> Result<(), CliError> {
    let text = trace_to_jsonl(trace);
    match &cfg.jsonl {
        Some(path) => {
            std::fs::write(path, text)?;
            writeln!(out, "trace: {}", path.display())?;
        }
        None => {
            writeln!(out, "trace:")?;
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_dot(cfg: &RunConfig, dot: impl FnOnce() -> String, out: Out) -> Result<(), CliError> {
    if let Some(path) = &cfg.dot {
        std::fs::write(path, dot())?;
        writeln!(out, "graph: {}", path.display())?;
    }
    Ok(())
}

fn decisions_line(d: &[Option<Frac>]) -> String {
    d.iter()
        .enumerate()
        .map(|(i, x)| format!("p{}={}", i + 1, x.map_or("⊥".to_string(), |v| v.to_string())))
        .collect::<Vec<_>>()
        .join(" ")
}

fn check_eps(inputs: &[u8], d: &[Option<Frac>], eps: Frac) -> Vec<String> {
    let lo = Frac::from_int(*inputs.iter().min().unwrap() as i64);
    let hi = Frac::from_int(*inputs.iter().max().unwrap() as i64);
    let outs: Vec<Frac> = d.iter().flatten().copied().collect();
    let mut bad: Vec<String> = outs.iter().filter(|&&v| v < lo || v > hi).map(|v| format!("{v} is not valid")).collect();
    if let (Some(a), Some(b)) = (outs.iter().min(), outs.iter().max()) {
        if b.abs_diff(*a) > eps {
            bad.push(format!("{a} and {b} are more than {eps} apart"));
        }
    }
    bad
}

fn finish(out: Out, violations: &[String]) -> Result<Status, CliError> {
    writeln!(out, "violations: {}", violations.len())?;
    for v in violations.iter().take(20) {
        writeln!(out, "  {v}")?;
    }
    Ok(if violations.is_empty() { Status::Ok } else { Status::Violation })
}

pub fn epsagree(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let k = need(&cfg.k, "k")?;
    if k == 0 {
        return Err(usage("--k must be positive"));
    }
    let inputs = binary_inputs(cfg.inputs.as_deref().unwrap_or("0,1"), 2)?;
    let modes = [cfg.schedule.is_some(), cfg.exhaustive, cfg.random.is_some()];
    if modes.iter().filter(|&&m| m).count() > 1 {
        return Err(usage("--schedule, --exhaustive and --random are exclusive"));
    }
    let eps = Frac::new(1, 2 * k as i64 + 1);
    writeln!(out, "protocol: A_{k} inputs {},{} grid {eps}", inputs[0], inputs[1])?;
    if cfg.exhaustive {
        let crashes = cfg.crashes.unwrap_or(1);
        let sum = exhaustive_summary(k, [inputs[0], inputs[1]], crashes)?;
        writeln!(out, "executions: {} (at most {crashes} crash)", sum.executions)?;
        writeln!(out, "complete: {}", sum.complete)?;
        writeln!(out, "max gap: {}", sum.max_gap)?;
        writeln!(out, "max ops: {} (bound {})", sum.max_ops, step_bound(k))?;
        writeln!(
            out,
            "graph: {} vertices, {} edges, simple path: {}",
            sum.graph.vertices().len(),
            sum.graph.edge_count(),
            sum.graph.is_simple_path()
        )?;
        emit_dot(cfg, || sum.graph.to_dot(), out)?;
        return finish(out, &sum.violations);
    }
    let sys = ak_system(k);
    let trace = if let Some(path) = &cfg.schedule {
        run(&sys, &inputs, &parse_schedule(&read(path)?)?)?
    } else if let Some(seed) = cfg.random {
        run_random(&sys, &inputs, seed, cfg.max_steps.unwrap_or(10_000))?
    } else {
        let mut turn = 0usize;
        run_with(&sys, &inputs, cfg.max_steps.unwrap_or(10_000), |e| {
            let live: Vec<Pid> = e.running().collect();
            turn += 1;
            live.get(turn % live.len().max(1)).map(|&p| Event::Step(p))
        })?
    };
    let d: Vec<Option<Frac>> = trace.decisions().iter().map(|o| o.map(|x| x.value)).collect();
    writeln!(out, "schedule: {}", format_schedule(&trace.schedule))?;
    writeln!(out, "decisions: {}", decisions_line(&d))?;
    let bad = check_eps(&inputs, &d, eps);
    let status = finish(out, &bad)?;
    emit_trace(cfg, &trace, out)?;
    Ok(status)
}

fn load_task(path: &Path) -> Result<Task, CliError> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Task::from_json(name, &read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

enum Restricted {
    Solvable(BTreeSet<Vec<String>>),
    Unsolvable(String),
    Budget(String),
}

fn restrict(task: &Task, budget: u64) -> Result<Restricted, CliError> {
    match find_restriction(task, budget) {
        Ok(Restriction::Solvable(set)) => Ok(Restricted::Solvable(set)),
        Ok(Restriction::Unsolvable(v)) => Ok(Restricted::Unsolvable(v.to_string())),
        Err(e @ TaskError::BudgetExhausted(_)) => Ok(Restricted::Budget(e.to_string())),
        Err(e) => Err(usage(e.to_string())),
    }
}

pub fn taskcheck(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let task = load_task(&need(&cfg.task, "task")?)?;
    writeln!(out, "task: {} ({} inputs, {} outputs)", task.name, task.inputs.len(), task.outputs.len())?;
    match restrict(&task, cfg.budget.unwrap_or(1_000_000))? {
        Restricted::Solvable(set) => {
            writeln!(out, "verdict: ok")?;
            writeln!(out, "restriction: {} outputs", set.len())?;
            for y in &set {
                writeln!(out, "  {}", show(y))?;
            }
            Ok(Status::Ok)
        }
        Restricted::Unsolvable(why) => {
            writeln!(out, "verdict: unsolvable")?;
            writeln!(out, "witness: {why}")?;
            Ok(Status::Ok)
        }
        Restricted::Budget(why) => {
            writeln!(out, "verdict: inconclusive ({why})")?;
            Ok(Status::Inconclusive)
        }
    }
}

pub fn universal(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let task = load_task(&need(&cfg.task, "task")?)?;
    if task.n != 2 {
        return Err(usage("the universal solver handles two-process tasks"));
    }
    writeln!(out, "task: {}", task.name)?;
    let set = match restrict(&task, cfg.budget.unwrap_or(1_000_000))? {
        Restricted::Solvable(set) => set,
        Restricted::Unsolvable(why) => {
            writeln!(out, "verdict: unsolvable")?;
            writeln!(out, "witness: {why}")?;
            return Ok(Status::Ok);
        }
        Restricted::Budget(why) => {
            writeln!(out, "verdict: inconclusive ({why})")?;
            return Ok(Status::Inconclusive);
        }
    };
    let solver = Arc::new(Solver::new(task, &set).map_err(|e| CliError::Fault(e.to_string()))?);
    writeln!(out, "agreement parameter: {}", solver.k)?;
    if let Some(seed) = cfg.random {
        let runs = cfg.runs.unwrap_or(100);
        let sys = universal_system(solver.clone());
        let mut bad = Vec::new();
        let all: Vec<&Vec<String>> = solver.task.inputs.iter().collect();
        for i in 0..runs {
            let x = all[(i % all.len() as u64) as usize];
            let trace = run_random(&sys, x, seed.wrapping_add(i), cfg.max_steps.unwrap_or(100_000))?;
            let d: Vec<String> = trace.decisions().into_iter().flatten().collect();
            if d.len() != 2 {
                bad.push(format!("run {i}: not everyone decided"));
            } else if !solver.task.legal(x).contains(&d) {
                bad.push(format!("run {i}: {} is not legal for {}", show(&d), show(x)));
            }
        }
        writeln!(out, "random runs: {runs} (seed {seed})")?;
        return finish(out, &bad);
    }
    let coverage = if cfg.exhaustive { Coverage::AllSchedules } else { Coverage::AllStates };
    let rep = check_conformance(solver, cfg.crashes.unwrap_or(1), coverage)?;
    writeln!(out, "inputs: {}", rep.inputs)?;
    writeln!(out, "executions: {}", rep.leaves)?;
    writeln!(out, "truncated: {}", rep.truncated)?;
    writeln!(out, "max cell: {}", rep.max_cell)?;
    let mut bad = rep.violations.clone();
    if rep.truncated > 0 {
        bad.push(format!("{} executions hit the step bound", rep.truncated));
    }
    finish(out, &bad)
}

pub fn iterate(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let n = need(&cfg.n, "n")?;
    let k = need(&cfg.rounds, "rounds")?;
    if n == 0 || k == 0 {
        return Err(usage("--n and --rounds must be positive"));
    }
    if cfg.simulate_1bit {
        let rep = check_onebit(n, k, cfg.crashes.unwrap_or(0))?;
        writeln!(out, "configurations per round: {:?}", rep.configurations)?;
        writeln!(out, "one-bit iterations: {}", rep.iterations)?;
        writeln!(out, "simulated executions: {}", rep.leaves)?;
        return finish(out, &rep.violations);
    }
    let inputs: Vec<u64> = match &cfg.inputs {
        Some(s) => parse_list(s, "input")?,
        None => (0..n as u64).collect(),
    };
    if inputs.len() != n {
        return Err(usage(format!("--inputs needs {n} values")));
    }
    let mut g: ProtocolGraph<FiState, ViewRef> = ProtocolGraph::new();
    let executions = match cfg.mode.as_deref().unwrap_or("is") {
        "is" => {
            let sys = fullinfo_system(n, k, Mode::Snapshot);
            let s = enumerate_is(&sys, &inputs, cfg.crashes.unwrap_or(0), false, |e| {
                g.add_outcome(&e.outcome());
                ControlFlow::Continue(())
            })?;
            writeln!(out, "mode: immediate snapshot")?;
            s.leaves
        }
        "ic" => {
            let sys = fullinfo_system(n, k, Mode::Collect);
            let s = explore_states(&sys, &inputs, Bounds::new(usize::MAX, cfg.crashes.unwrap_or(0)), |leaf| {
                g.add_outcome(&leaf.exec.outcome());
                ControlFlow::Continue(())
            })?;
            writeln!(out, "mode: collect (distinct final configurations)")?;
            s.terminals
        }
        other => return Err(usage(format!("--mode must be is or ic, got {other:?}"))),
    };
    writeln!(out, "executions: {executions}")?;
    writeln!(out, "vertices: {}", g.vertices().len())?;
    writeln!(out, "edges: {}", g.edge_count())?;
    writeln!(out, "simple path: {}", g.is_simple_path())?;
    emit_dot(cfg, || g.to_dot(), out)?;
    Ok(Status::Ok)
}

pub fn fastsim(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let delta = cfg.delta.unwrap_or(2);
    let rounds = need(&cfg.rounds, "rounds")?;
    if delta == 0 || rounds == 0 || rounds > 40 {
        return Err(usage("--delta must be positive and --rounds in 1..=40"));
    }
    let mut bad = Vec::new();
    if cfg.count_executions {
        let l = Arc::new(ParityLabelling);
        if rounds <= 8 {
            let sys = sim_system(l.clone(), delta, rounds);
            let mut pairs = BTreeSet::new();
            let mut g: ProtocolGraph<Label, Label> = ProtocolGraph::new();
            explore_states(&sys, &[(), ()], Bounds::new(usize::MAX, 0), |leaf| {
                let o: Vec<(Pid, Label, Label)> = leaf.exec.outcome().into_iter().map(|(p, _, l)| (p, l, l)).collect();
                if let [a, b] = &o[..] {
                    pairs.insert((a.2, b.2));
                }
                g.add_outcome(&o);
                ControlFlow::Continue(())
            })?;
            writeln!(out, "distinct final label pairs: {}", pairs.len())?;
            writeln!(out, "labels: {}, simple path: {}", g.vertices().len(), g.is_simple_path())?;
            emit_dot(cfg, || g.to_dot(), out)?;
        }
        let rep = check_witnesses(l, delta, rounds)?;
        writeln!(out, "witness executions: {} distinct of {}", rep.distinct, rep.schedules)?;
        writeln!(out, "register bits: {} (widest word written: {})", rep.register_bits, rep.max_word_bits)?;
        bad.extend(rep.failures);
        if rep.distinct != 1 << rounds {
            bad.push(format!("expected {} distinct witnesses", 1u64 << rounds));
        }
    }
    if let Some(eps) = &cfg.check_agreement {
        let eps = parse_frac(eps)?;
        let sum = fast_summary(delta, rounds, Valuation::Graph, cfg.crashes.unwrap_or(1))?;
        writeln!(out, "label span: {}", sum.span)?;
        writeln!(out, "terminal configurations: {}", sum.terminals)?;
        writeln!(out, "max gap: {} (target {eps})", sum.max_gap)?;
        writeln!(out, "max ops: {} (bound {})", sum.max_ops, fast_step_bound(rounds))?;
        writeln!(out, "register bits: {}", sum.register_bits)?;
        bad.extend(sum.violations);
        if sum.max_gap > eps {
            bad.push(format!("gap {} exceeds {eps}", sum.max_gap));
        }
        if sum.max_ops > fast_step_bound(rounds) {
            bad.push(format!("{} operations exceed the bound", sum.max_ops));
        }
    }
    if !cfg.count_executions && cfg.check_agreement.is_none() {
        let t = LabelTable::build(Arc::new(ParityLabelling), delta, rounds)?;
        writeln!(out, "labels: {}, simple path: {}, span: {}", t.vertices, t.is_path, t.span)?;
    }
    finish(out, &bad)
}

fn parse_send(s: &str) -> Result<SendSpec, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [src, dst, hex] = parts[..] else {
        return Err(usage(format!("--send expects src:dst:hexmsg, got {s:?}")));
    };
    let node = |x: &str| x.parse::<usize>().map_err(|_| usage(format!("bad node {x:?}")));
    let payload = parse_hex(hex).ok_or_else(|| usage(format!("bad hex message {hex:?}")))?;
    Ok(SendSpec { src: node(src)?, dst: node(dst)?, payload })
}

pub fn ring(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let n = need(&cfg.n, "n")?;
    let t = need(&cfg.t, "t")?;
    let crashed: Vec<usize> = parse_list(cfg.crash.as_deref().unwrap_or(""), "node")?;
    let sends = cfg
        .send
        .as_deref()
        .unwrap_or("")
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_send(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let rc = RingConfig {
        n,
        t,
        crashed,
        sends,
        seed: cfg.seed.unwrap_or(0),
        max_steps: cfg.max_steps.unwrap_or(2_000_000),
        record: true,
    };
    let rep = match run_ring(&rc) {
        Ok(r) => r,
        Err(RingRunError::Ring(e)) => return Err(usage(e.to_string())),
        Err(RingRunError::Exec(e)) => return Err(e.into()),
    };
    writeln!(out, "ring: n={n} t={t} register bits {}", rep.register_bits)?;
    for d in &rep.delivered {
        writeln!(out, "delivered: {} -> {} #{} {}", d.src, d.dst, d.seq, to_hex(&d.payload))?;
    }
    for m in &rep.missing {
        writeln!(out, "missing: {} -> {} {}", m.src, m.dst, to_hex(&m.payload))?;
    }
    writeln!(out, "steps: {}", rep.steps)?;
    writeln!(out, "duplicates suppressed: {}", rep.duplicates_suppressed)?;
    let mut bad = rep.fifo_violations.clone();
    if !rep.missing.is_empty() {
        bad.push(format!("{} messages between live nodes not delivered", rep.missing.len()));
    }
    let status = finish(out, &bad)?;
    if let Some(trace) = &rep.trace {
        emit_trace(cfg, trace, out)?;
    }
    Ok(status)
}

pub fn falsify_cmd(cfg: &RunConfig, out: Out) -> Result<Status, CliError> {
    let name = cfg.protocol.clone().unwrap_or_else(|| "naive3".into());
    let n = cfg.n.unwrap_or(3);
    let t = cfg.t.unwrap_or(2);
    let eps = parse_frac(cfg.eps.as_deref().unwrap_or("1/9"))?;
    let inputs = cfg.inputs.as_deref().map(|s| binary_inputs(s, n)).transpose()?;
    let mut budget = FalsifyBudget::default();
    if let Some(b) = cfg.budget {
        budget.max_executions = b;
    }
    if let Some(s) = cfg.max_steps {
        budget.max_extension_steps = s;
    }
    let report = match falsify(&name, n, t, eps, inputs, &budget) {
        Ok(r) => r,
        Err(e @ FalsifyError::Exec(_)) => return Err(CliError::Fault(e.to_string())),
        Err(e) => return Err(usage(e.to_string())),
    };
    writeln!(out, "candidate: {name} n={n} t={t} eps={eps}")?;
    writeln!(out, "grid: {} (pigeonhole guaranteed from {})", report.k, report.threshold)?;
    let witnessed: Vec<String> = report.search.witnessed().map(|s| s.index.to_string()).collect();
    writeln!(out, "slabs witnessed: [{}] after {} configurations", witnessed.join(" "), report.search.explored)?;
    for s in report.search.witnessed().filter(|s| s.index % 2 == 0) {
        writeln!(out, "  slab {} word {}", s.index, s.word.as_deref().unwrap_or(""))?;
    }
    match &report.outcome {
        FalsifyOutcome::Counterexample(cx) => {
            writeln!(out, "counterexample: slab {} shares word {} with slab {}", cx.slab, cx.word, cx.twin)?;
            writeln!(out, "inputs: {:?}", cx.inputs)?;
            writeln!(out, "decisions: {}", decisions_line(&cx.decisions))?;
            writeln!(out, "violation: {}", cx.reason)?;
            writeln!(out, "crashes: {}", cx.crashes)?;
            writeln!(out, "schedule: {}", format_schedule(&cx.schedule))?;
            emit_trace(cfg, &cx.trace, out)?;
            Ok(Status::Ok)
        }
        FalsifyOutcome::Inconclusive(why) => {
            writeln!(out, "inconclusive: {why}")?;
            Ok(Status::Inconclusive)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_tokens() {
        let s = parse_schedule("1 p2,c1\n2").unwrap();
        assert_eq!(s, vec![Event::Step(Pid(1)), Event::Step(Pid(2)), Event::Crash(Pid(1)), Event::Step(Pid(2))]);
        assert_eq!(format_schedule(&s), "p1 p2 c1 p2");
        assert!(parse_schedule("x").is_err());
        assert!(parse_schedule("0").is_err());
    }

    #[test]
    fn send_specs() {
        let s = parse_send("1:3:a5").unwrap();
        assert_eq!((s.src, s.dst, s.payload), (1, 3, vec![0xa5]));
        assert!(parse_send("1:3").is_err());
        assert!(parse_send("1:3:zz").is_err());
    }
}
