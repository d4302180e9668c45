//! Seeded random models and the bulk equivalence checks built on them.
//!
//! The structural results behind this crate all have the same shape: two
//! independently computed trace sets must coincide exactly. Unit tests pin
//! them on hand-written examples; the functions here stress them on many
//! pseudo-random instances instead. Every generator is deterministic in
//! its seed, so a reported failure is reproducible from the seed alone.

use crate::event::Event;
use crate::hashing::fnv1a64;
use crate::iosl::{theorem4_oracle, IoslError};
use crate::kernel::compose::{compose_parallel, compose_trace_sets, SyncMap};
use crate::kernel::es::{enumerate_traces, EventSystem};
use crate::process::guarded::{proc_of_ges, IoEvent, IoGuardedEs};
use crate::process::proc::{enumerate_process_traces, Process};
use crate::process::typing::Typing;
use crate::value::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::rc::Rc;

/// Event names the random generators draw from.
const NAMES: [&str; 6] = ["ping", "ask", "tick", "mark", "push", "halt"];

/// Outcome of a batch of randomized equivalence trials.
#[derive(Debug, Clone, Serialize)]
pub struct OracleRun {
    pub trials: usize,
    pub failures: usize,
    /// Seed and a short description of the first divergence, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl OracleRun {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn record(&mut self, detail: String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(detail);
        }
    }
}

/// A random finite event system: up to `max_states` states, out-degree at
/// most three per state, events over a small name alphabet with zero or
/// one integer parameter. State 0 is initial.
pub fn random_event_system(seed: u64, max_states: usize) -> EventSystem<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states.max(1)) as u32;
    let mut edges: BTreeMap<u32, Vec<(Event, u32)>> = BTreeMap::new();
    for s in 0..n {
        let degree = rng.gen_range(0..=3);
        let list = edges.entry(s).or_default();
        for _ in 0..degree {
            let name = NAMES[rng.gen_range(0..NAMES.len())];
            let params = if rng.gen_bool(0.5) {
                vec![Value::Int(rng.gen_range(0..3))]
            } else {
                Vec::new()
            };
            list.push((Event::new(name, params), rng.gen_range(0..n)));
        }
    }
    EventSystem::new(vec![0], move |s| edges.get(s).cloned().unwrap_or_default())
}

/// A random synchronization map. The decision for a pair of events depends
/// only on the two names (hashed with the seed), so the map is a function;
/// the skip pair is always pinned to skip. Joint events either drop one
/// side or merge both names and concatenate the parameter lists.
pub fn random_sync_map(seed: u64) -> SyncMap {
    SyncMap::new(format!("random-{seed}"), move |l, r| {
        if l.is_skip() && r.is_skip() {
            return Some(Event::skip());
        }
        let h = fnv1a64(format!("{seed}|{}|{}", l.name, r.name).as_bytes());
        match h % 4 {
            0 => None,
            1 if !l.is_skip() => Some(l.clone()),
            2 if !r.is_skip() => Some(r.clone()),
            _ => {
                let mut params = l.params.clone();
                params.extend(r.params.iter().cloned());
                Some(Event::new(format!("{}+{}", l.name, r.name), params))
            }
        }
    })
}

/// One batch of composition trials: for random system pairs and a random
/// synchronization map, the bounded traces of the composed system must
/// equal the position-wise composition of the component trace sets.
pub fn composition_equivalence_trials(trials: usize, base_seed: u64, depth: usize) -> OracleRun {
    let mut run = OracleRun {
        trials,
        failures: 0,
        first_failure: None,
    };
    for k in 0..trials {
        let seed = base_seed.wrapping_add(k as u64);
        let left = random_event_system(fnv1a64(format!("L{seed}").as_bytes()), 15);
        let right = random_event_system(fnv1a64(format!("R{seed}").as_bytes()), 15);
        let chi = random_sync_map(seed);
        // Vary the bound but stay cheap; equality at every smaller depth
        // follows from equality at the larger one on prefix-closed sets.
        let d = 2 + (k % depth.max(1)).min(depth.saturating_sub(2));
        let composed = compose_parallel(&left, &right, &chi);
        let got = enumerate_traces(&composed, composed.initial(), d);
        let want = compose_trace_sets(
            &enumerate_traces(&left, left.initial(), d),
            &enumerate_traces(&right, right.initial(), d),
            &chi,
        );
        if got != want {
            let only_composed = got.difference(&want).next().cloned();
            let only_sets = want.difference(&got).next().cloned();
            run.record(format!(
                "seed {seed} depth {d}: composed system has {} traces, trace composition {}; \
                 first only in system: {only_composed:?}; first only in sets: {only_sets:?}",
                got.len(),
                want.len()
            ));
        }
    }
    run
}

/// A random guarded component over integer states. Guards read only the
/// state and the chosen output, never the input, so guard independence
/// holds by construction; updates fold the input in and wrap the state
/// into a five-value window to keep exploration finite.
pub fn random_guarded_system(seed: u64) -> IoGuardedEs<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut typing = Typing::new();
    let mut events: Vec<IoEvent<i64>> = Vec::new();
    let fams = ["step", "query", "note"];
    let n_fams = rng.gen_range(1..=fams.len());
    for bio in fams.iter().take(n_fams) {
        let ghost = rng.gen_bool(0.3);
        let takes_input = rng.gen_bool(0.5);
        let outputs: Vec<Value> = if takes_input {
            typing.add(*bio, Value::Unit, (0..=2).map(Value::Int));
            vec![Value::Unit]
        } else {
            let outs: Vec<Value> = (0..rng.gen_range(1..=2)).map(Value::Int).collect();
            for v in &outs {
                typing.add_signal(*bio, v.clone());
            }
            outs
        };
        let modulus = rng.gen_range(2..=3);
        let residue = rng.gen_range(0..modulus);
        let always = rng.gen_bool(0.4);
        let coef_w = rng.gen_range(0..=1);
        let shift = rng.gen_range(0..=2);
        events.push(IoEvent {
            bio: (*bio).to_string(),
            outputs,
            ghost,
            guard: Rc::new(move |s: &i64, v: &Value, _w: &Value| {
                always || (s + v.as_int().unwrap_or(0)).rem_euclid(modulus) == residue
            }),
            update: Rc::new(move |s: &i64, v: &Value, w: &Value| {
                let v = v.as_int().unwrap_or(0);
                let w = w.as_int().unwrap_or(0);
                (s + v + coef_w * w + shift).rem_euclid(5)
            }),
            render: None,
        });
    }
    IoGuardedEs::new(0, typing, events).expect("generated component is well formed")
}

/// One batch of translation trials: a random guarded component's bounded
/// action traces must equal those of its process translation.
pub fn translation_equivalence_trials(trials: usize, base_seed: u64, depth: usize) -> OracleRun {
    let mut run = OracleRun {
        trials,
        failures: 0,
        first_failure: None,
    };
    for k in 0..trials {
        let seed = base_seed.wrapping_add(k as u64);
        let ges = random_guarded_system(seed);
        let from_system = ges.enumerate_io_traces(ges.initial(), depth);
        let p = match proc_of_ges(&ges, ges.initial(), depth) {
            Ok(p) => p,
            Err(e) => {
                run.record(format!("seed {seed}: translation rejected: {e}"));
                continue;
            }
        };
        let from_process = enumerate_process_traces(&p, ges.typing(), depth);
        if from_system != from_process {
            let only_system = from_system.difference(&from_process).next().cloned();
            let only_process = from_process.difference(&from_system).next().cloned();
            run.record(format!(
                "seed {seed} depth {depth}: system side {} traces, process side {}; \
                 first only in system: {only_system:?}; first only in process: {only_process:?}",
                from_system.len(),
                from_process.len()
            ));
        }
    }
    run
}

/// The typing the random process generator works against: one input
/// operation with a three-value domain and two signal families.
pub fn sample_typing() -> Typing {
    let mut ty = Typing::new();
    ty.add("poll", Value::Unit, (0..=2).map(Value::Int));
    for v in 0..=2 {
        ty.add_signal("emit", Value::Int(v));
    }
    ty.add_signal("halt", Value::Unit);
    ty
}

/// A random finite process over [`sample_typing`]: prefix chains of length
/// at most three, binary choices, and input continuations that dispatch on
/// the received value.
pub fn random_process(seed: u64) -> (Process, Typing) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = gen_process(&mut rng, 3);
    (p, sample_typing())
}

fn gen_process(rng: &mut ChaCha8Rng, fuel: usize) -> Process {
    if fuel == 0 {
        return Process::Inactive;
    }
    match rng.gen_range(0..10) {
        0 => Process::Inactive,
        1..=3 => {
            let (bio, out) = if rng.gen_bool(0.7) {
                ("emit", Value::Int(rng.gen_range(0..=2)))
            } else {
                ("halt", Value::Unit)
            };
            Process::action(bio, out, gen_process(rng, fuel - 1))
        }
        4..=6 => {
            // Dispatch on the input: one pre-built continuation per value.
            let conts: Vec<Process> = (0..3).map(|_| gen_process(rng, fuel - 1)).collect();
            Process::prefix("poll", Value::Unit, move |w| {
                conts[w.as_int().unwrap_or(0).rem_euclid(3) as usize].clone()
            })
        }
        _ => Process::choice(gen_process(rng, fuel - 1), gen_process(rng, fuel - 1)),
    }
}

/// One batch of canonical-model trials: every random process must pass the
/// three-way cross-check of [`theorem4_oracle`], including the embedding
/// sub-check on each sampled schedule.
pub fn canonical_model_trials(trials: usize, base_seed: u64, depth: usize) -> OracleRun {
    let mut run = OracleRun {
        trials,
        failures: 0,
        first_failure: None,
    };
    for k in 0..trials {
        let seed = base_seed.wrapping_add(k as u64);
        let (p, ty) = random_process(seed);
        match theorem4_oracle(&p, &ty, depth, 2) {
            Ok(report) => {
                if !(report.pass && report.containment_ok && report.embedding_ok) {
                    run.record(format!(
                        "seed {seed} depth {depth}: pass={} containment={} embedding={} \
                         (process {} traces, canonical {})",
                        report.pass,
                        report.containment_ok,
                        report.embedding_ok,
                        report.process_trace_count,
                        report.canonical_trace_count
                    ));
                }
            }
            Err(e) => run.record(format!("seed {seed}: oracle error: {e}")),
        }
    }
    run
}

/// The store-and-forward relay: receive a value, then either forward it,
/// fold in one more received value and forward the sum, or drop it; the
/// initial receive competes with a failure signal.
///
/// in(x).Q(x) + fail.Null where
/// Q(x) = out(x).Null + (in(y).out(x+y).Null + drop.Null).
pub fn relay_process() -> Process {
    fn q(x: i64) -> Process {
        Process::choice(
            Process::action("out", Value::Int(x), Process::Inactive),
            Process::choice(
                Process::prefix("in", Value::Unit, move |y| {
                    Process::action(
                        "out",
                        Value::Int(x + y.as_int().unwrap()),
                        Process::Inactive,
                    )
                }),
                Process::action("drop", Value::Unit, Process::Inactive),
            ),
        )
    }
    Process::choice(
        Process::prefix("in", Value::Unit, |x| q(x.as_int().unwrap())),
        Process::action("fail", Value::Unit, Process::Inactive),
    )
}

/// The typing for [`relay_process`]: inputs range over 1..=3, so forwarded
/// sums range over 2..=6; fail and drop are signals.
pub fn relay_typing() -> Typing {
    let mut ty = Typing::new();
    ty.add("in", Value::Unit, (1..=3).map(Value::Int));
    for out in 1..=6 {
        ty.add_signal("out", Value::Int(out));
    }
    ty.add_signal("fail", Value::Unit);
    ty.add_signal("drop", Value::Unit);
    ty
}

/// Runs [`theorem4_oracle`] on the relay process.
pub fn relay_canonical_check(depth: usize) -> Result<crate::iosl::CanonicalReport, IoslError> {
    theorem4_oracle(&relay_process(), &relay_typing(), depth, 5)
}
