//! The work behind each binary subcommand, kept in the library so the C
//! ABI and the integration tests drive exactly the code the command line
//! does.

use crate::cli::render::dump_iospec;
use crate::cli::report::{ConfigError, Report, Status};
use crate::cli::scenario::{load, Scenario};
use crate::event::{render_trace, Event};
use crate::kernel::es::enumerate_traces;
use crate::kernel::refine::{
    check_refinement, preimage_property, RefinementVerdict, DEFAULT_PAIR_BUDGET,
};
use crate::monitor::{monitor_new, Backend};
use crate::protocols::auth::{build_auth_stack, build_unnamed_reply_stack, AuthStack};
use crate::protocols::leader::{
    decompose_leader, gamma, interface_model, pi_hat, unique_leader_property, RingConfig,
};
use crate::protocols::repl::{build_no_ack_wait_stack, build_repl_stack, ReplStack};
use crate::sampling::{
    canonical_model_trials, composition_equivalence_trials, relay_canonical_check,
    translation_equivalence_trials, OracleRun,
};
use crate::simnet::leader::{
    elected_nodes, interface_events_of_log, replay_against_model, run_leader_sim,
};
use crate::simnet::repl::run_repl_sim;
use crate::simnet::{
    check_no_fabrication, random_walk, FaultPlan, ScriptedCrash, SimMode, TraceLog,
};
use serde_json::json;

fn build_stack(scenario: &Scenario) -> ReplStack {
    match scenario {
        Scenario::Repl {
            servers,
            clients,
            ops,
            skip_ack_wait,
            ..
        } => {
            if *skip_ack_wait {
                build_no_ack_wait_stack(*servers, *clients, ops)
            } else {
                build_repl_stack(*servers, *clients, ops)
            }
        }
        _ => unreachable!("caller matched the scenario kind"),
    }
}

fn build_auth(scenario: &Scenario) -> AuthStack {
    match scenario {
        Scenario::Auth {
            initiator,
            responder,
            runs,
            unnamed_reply,
        } => {
            let agents = [initiator.as_str(), responder.as_str()];
            if *unnamed_reply {
                build_unnamed_reply_stack(&agents, *runs)
            } else {
                build_auth_stack(&agents, *runs)
            }
        }
        _ => unreachable!("caller matched the scenario kind"),
    }
}

fn push_refinement(report: &mut Report, name: &str, verdict: &RefinementVerdict) {
    match verdict {
        RefinementVerdict::Pass { pairs_explored } => {
            report.push(name, true, format!("{pairs_explored} state pairs explored"));
        }
        RefinementVerdict::Fail { failure } => {
            report.push(name, false, format!("{failure:?}"));
        }
        RefinementVerdict::BudgetExceeded { pairs_explored } => {
            report.push_status(
                name,
                Status::BudgetExceeded,
                format!("pair budget exhausted after {pairs_explored} pairs"),
            );
        }
    }
}

/// `check-refinement`: both steps of the scenario's layer chain.
pub fn check_refinement_cmd(
    scenario_arg: &str,
    depth: usize,
    budget: Option<usize>,
) -> Result<Report, ConfigError> {
    let (scenario, label) = load(scenario_arg)?;
    let Scenario::Leader { ring, .. } = &scenario else {
        return Err(ConfigError(format!(
            "check-refinement: scenario {label} has no refinement chain; use a leader scenario"
        )));
    };
    let budget = budget.unwrap_or(DEFAULT_PAIR_BUDGET);
    let stack = crate::protocols::leader::build_leader_stack(&RingConfig::ring(*ring));
    let mut report = Report::new("check-refinement", Some(label));
    let first = check_refinement(
        &stack.protocol,
        &stack.abstract_model,
        &stack.r_pa,
        &stack.pi_pa,
        depth,
        budget,
    );
    push_refinement(&mut report, "protocol-refines-abstract", &first);
    let second = check_refinement(
        &stack.interface,
        &stack.protocol,
        &stack.r_ip,
        &stack.pi_ip,
        depth,
        budget,
    );
    push_refinement(&mut report, "interface-refines-protocol", &second);
    report.data = json!({ "depth": depth, "pair-budget": budget });
    Ok(report)
}

fn push_oracle(report: &mut Report, name: &str, run: &OracleRun) {
    let detail = match &run.first_failure {
        None => format!("{} trials, all exact", run.trials),
        Some(first) => format!("{} of {} trials diverged; first: {first}", run.failures, run.trials),
    };
    report.push(name, run.passed(), detail);
    report.data = serde_json::to_value(run).expect("oracle run serializes");
}

/// `check-composition`: composed-system traces against composed trace sets
/// on random instances.
pub fn check_composition_cmd(trials: usize, seed: u64, depth: usize) -> Report {
    let mut report = Report::new("check-composition", None);
    let run = composition_equivalence_trials(trials, seed, depth);
    push_oracle(&mut report, "trace-composition-equivalence", &run);
    report
}

/// `check-theorem3`: guarded components against their process translations
/// on random instances.
pub fn check_theorem3_cmd(trials: usize, seed: u64, depth: usize) -> Report {
    let mut report = Report::new("check-theorem3", None);
    let run = translation_equivalence_trials(trials, seed, depth);
    push_oracle(&mut report, "translation-equivalence", &run);
    report
}

/// `check-theorem4`: processes against their canonical heap models; either
/// a batch of random processes or the named example.
pub fn check_theorem4_cmd(
    process: &str,
    trials: usize,
    seed: u64,
    depth: usize,
) -> Result<Report, ConfigError> {
    let mut report = Report::new("check-theorem4", None);
    match process {
        "random" => {
            let run = canonical_model_trials(trials, seed, depth);
            push_oracle(&mut report, "canonical-model-equivalence", &run);
        }
        "example8" => match relay_canonical_check(depth) {
            Ok(r) => {
                report.push(
                    "trace-equivalence",
                    r.pass,
                    format!(
                        "process side {} traces, canonical side {}",
                        r.process_trace_count, r.canonical_trace_count
                    ),
                );
                report.push(
                    "containment-under-sampled-schedules",
                    r.containment_ok,
                    String::new(),
                );
                report.push("embedding-satisfied", r.embedding_ok, String::new());
                report.data = json!({
                    "process": "example8",
                    "depth": r.depth,
                    "process-traces": r.process_trace_count,
                    "canonical-traces": r.canonical_trace_count,
                });
            }
            Err(e) => {
                report.push_status("canonical-model", Status::BudgetExceeded, e.to_string());
            }
        },
        other => {
            return Err(ConfigError(format!(
                "check-theorem4: unknown process {other}; known: example8, random"
            )));
        }
    }
    Ok(report)
}

/// `enumerate`: bounded trace sets of the scenario's models.
pub fn enumerate_cmd(
    scenario_arg: &str,
    depth: usize,
    limit: usize,
) -> Result<Report, ConfigError> {
    let (scenario, label) = load(scenario_arg)?;
    let mut report = Report::new("enumerate", Some(label));
    let (counts, sample) = match &scenario {
        Scenario::Leader { ring, .. } => {
            let stack = crate::protocols::leader::build_leader_stack(&RingConfig::ring(*ring));
            let abstract_traces =
                enumerate_traces(&stack.abstract_model, stack.abstract_model.initial(), depth);
            let protocol = enumerate_traces(&stack.protocol, stack.protocol.initial(), depth);
            let interface = enumerate_traces(&stack.interface, stack.interface.initial(), depth);
            let sample: Vec<String> =
                interface.iter().take(limit).map(|t| render_trace(t)).collect();
            (
                json!({
                    "abstract": abstract_traces.len(),
                    "protocol": protocol.len(),
                    "interface": interface.len(),
                }),
                sample,
            )
        }
        Scenario::Repl { .. } => {
            let stack = build_stack(&scenario);
            let traces = enumerate_traces(&stack.protocol, stack.protocol.initial(), depth);
            let sample: Vec<String> = traces.iter().take(limit).map(|t| render_trace(t)).collect();
            (json!({ "protocol": traces.len() }), sample)
        }
        Scenario::Auth { .. } => {
            let stack = build_auth(&scenario);
            let traces = enumerate_traces(&stack.protocol, stack.protocol.initial(), depth);
            let sample: Vec<String> = traces.iter().take(limit).map(|t| render_trace(t)).collect();
            (json!({ "protocol": traces.len() }), sample)
        }
    };
    report.push(
        "enumerated",
        true,
        format!("depth {depth}, trace counts {counts}"),
    );
    report.data = json!({ "depth": depth, "counts": counts, "sample": sample });
    Ok(report)
}

/// `simulate`: a monitored run plus the log checks that make it evidence.
pub fn simulate_cmd(
    scenario_arg: &str,
    seed: u64,
    steps: usize,
    audit: bool,
) -> Result<Report, ConfigError> {
    let (scenario, label) = load(scenario_arg)?;
    let mode = if audit { SimMode::Audit } else { SimMode::Strict };
    let mut report = Report::new("simulate", Some(label));
    match &scenario {
        Scenario::Leader {
            ring,
            loss_percent,
            program,
        } => {
            let cfg = RingConfig::ring(*ring);
            let run = run_leader_sim(
                &cfg,
                *program,
                *loss_percent,
                seed,
                steps,
                mode,
                Backend::EsGuard,
            );
            let log = &run.outcome.log;
            report.push(
                "monitor-violations",
                run.outcome.summary.violations == 0,
                format!(
                    "{} denial(s) in {} steps",
                    run.outcome.summary.violations, run.outcome.summary.steps
                ),
            );
            report.push("no-fabrication", check_no_fabrication(log).is_ok(), String::new());
            let replay = replay_against_model(log, &interface_model(&cfg), &gamma(&cfg));
            report.push(
                "replay-against-model",
                replay.passed(),
                format!("{replay:?}"),
            );
            let lifted = preimage_property(&pi_hat(), &unique_leader_property());
            let unique = match interface_events_of_log(log, &gamma(&cfg)) {
                Ok(events) => lifted.accepts(&events),
                Err(_) => false,
            };
            report.push("unique-leader-property", unique, String::new());
            let elected = elected_nodes(log);
            let max = format!("node:{}", cfg.max_id());
            report.push(
                "elected-has-max-id",
                elected.iter().all(|n| *n == max),
                format!("elected {elected:?}"),
            );
            report.data = json!({ "outcome": run.outcome });
        }
        Scenario::Repl {
            crash,
            detect_delay,
            ..
        } => {
            let stack = build_stack(&scenario);
            let plan = FaultPlan {
                crashes: crash
                    .iter()
                    .map(|c| ScriptedCrash {
                        node: c.node.clone(),
                        at_step: c.at_step,
                    })
                    .collect(),
                max_detect_delay: *detect_delay,
            };
            let run = run_repl_sim(&stack, &plan, seed, steps, mode, Backend::EsGuard);
            report.push(
                "monitor-violations",
                run.outcome.summary.violations == 0,
                format!(
                    "{} denial(s), {} replies, termination {:?}",
                    run.outcome.summary.violations,
                    run.outcome.summary.replies,
                    run.outcome.termination
                ),
            );
            report.push(
                "state-predicates",
                run.breaches.is_empty(),
                match run.breaches.first() {
                    Some(b) => format!("first breach: {b}"),
                    None => "consistency and liveness-record held at every step".into(),
                },
            );
            report.push(
                "no-fabrication",
                check_no_fabrication(&run.outcome.log).is_ok(),
                String::new(),
            );
            report.data = json!({ "outcome": run.outcome });
        }
        Scenario::Auth { .. } => {
            let stack = build_auth(&scenario);
            let start = stack.protocol.initial()[0].clone();
            let (trace, _) = random_walk(&stack.protocol, &start, seed, steps);
            report.push(
                "injective-agreement-along-walk",
                stack.agreement.accepts(&trace),
                format!("{} events", trace.len()),
            );
            report.data = json!({ "events": trace });
        }
    }
    Ok(report)
}

/// Digs the trace log out of a previously written report (or accepts a
/// bare one).
fn extract_trace_log(log_text: &str) -> Result<TraceLog, ConfigError> {
    let v: serde_json::Value = serde_json::from_str(log_text)
        .map_err(|e| ConfigError(format!("replay: log is not JSON: {e}")))?;
    for candidate in [&v["data"]["outcome"]["log"], &v["log"], &v] {
        if let Ok(log) = serde_json::from_value::<TraceLog>((*candidate).clone()) {
            return Ok(log);
        }
    }
    Err(ConfigError(
        "replay: no trace log found in the file (expected a simulate report or a bare log)"
            .into(),
    ))
}

fn extract_events(log_text: &str) -> Result<Vec<Event>, ConfigError> {
    let v: serde_json::Value = serde_json::from_str(log_text)
        .map_err(|e| ConfigError(format!("replay: log is not JSON: {e}")))?;
    for candidate in [&v["data"]["events"], &v["events"], &v] {
        if let Ok(events) = serde_json::from_value::<Vec<Event>>((*candidate).clone()) {
            return Ok(events);
        }
    }
    Err(ConfigError(
        "replay: no event list found in the file (expected an authentication simulate report)"
            .into(),
    ))
}

/// `replay`: validate a recorded log against the scenario's models.
pub fn replay_cmd(scenario_arg: &str, log_text: &str) -> Result<Report, ConfigError> {
    let (scenario, label) = load(scenario_arg)?;
    let mut report = Report::new("replay", Some(label));
    match &scenario {
        Scenario::Leader { ring, .. } => {
            let cfg = RingConfig::ring(*ring);
            let log = extract_trace_log(log_text)?;
            report.push("no-fabrication", check_no_fabrication(&log).is_ok(), String::new());
            let verdict = replay_against_model(&log, &interface_model(&cfg), &gamma(&cfg));
            report.push("replay-against-model", verdict.passed(), format!("{verdict:?}"));
            let lifted = preimage_property(&pi_hat(), &unique_leader_property());
            let unique = match interface_events_of_log(&log, &gamma(&cfg)) {
                Ok(events) => lifted.accepts(&events),
                Err(_) => false,
            };
            report.push("unique-leader-property", unique, String::new());
            report.data = json!({ "records": log.records.len() });
        }
        Scenario::Repl { .. } => {
            let stack = build_stack(&scenario);
            let log = extract_trace_log(log_text)?;
            report.push("no-fabrication", check_no_fabrication(&log).is_ok(), String::new());
            let mut all_ok = true;
            let mut detail = String::new();
            for node in log.nodes() {
                let Some(ges) = stack.components.get(&node) else {
                    all_ok = false;
                    detail = format!("log node {node} is not a component of this scenario");
                    break;
                };
                let mut monitor =
                    monitor_new(ges, ges.initial(), ges.typing(), Backend::EsGuard)
                        .expect("component models pass the independence check");
                for (idx, (bio, out, input, ghost)) in
                    log.node_actions(&node).into_iter().enumerate()
                {
                    let verdict = if ghost {
                        monitor.commit_ghost(&bio, &out, &input)
                    } else {
                        monitor.commit(&bio, &out, &input)
                    };
                    if !verdict.is_permit() {
                        all_ok = false;
                        detail =
                            format!("{node}: action {idx} ({bio}) denied: {}", verdict.code());
                        break;
                    }
                }
                if !all_ok {
                    break;
                }
            }
            report.push(
                "components-accept-log",
                all_ok,
                if detail.is_empty() {
                    "every logged action re-admitted by a fresh monitor".into()
                } else {
                    detail
                },
            );
            report.data = json!({ "records": log.records.len() });
        }
        Scenario::Auth { .. } => {
            let stack = build_auth(&scenario);
            let events = extract_events(log_text)?;
            let verdict = crate::simnet::replay::replay_events(&stack.protocol, &events);
            report.push("replay-against-model", verdict.passed(), format!("{verdict:?}"));
            report.push(
                "injective-agreement",
                stack.agreement.accepts(&events),
                String::new(),
            );
            report.data = json!({ "events": events.len() });
        }
    }
    Ok(report)
}

/// `dump-iospec`: one unfolding of a component's specification predicate.
pub fn dump_iospec_cmd(
    scenario_arg: &str,
    component: Option<&str>,
) -> Result<Report, ConfigError> {
    let (scenario, label) = load(scenario_arg)?;
    let (name, text, available) = match &scenario {
        Scenario::Leader { ring, .. } => {
            let decomp = decompose_leader(&RingConfig::ring(*ring));
            let available: Vec<String> =
                decomp.components.keys().map(|i| format!("node:{i}")).collect();
            let requested = component.map(str::to_string).unwrap_or_else(|| available[0].clone());
            let id: Option<i64> = requested
                .strip_prefix("node:")
                .unwrap_or(&requested)
                .parse()
                .ok();
            match id.and_then(|i| decomp.components.get(&i).map(|c| (i, c))) {
                Some((i, c)) => (format!("node:{i}"), dump_iospec(c, "(i, a)"), available),
                None => return Err(unknown_component(&label, &requested, &available)),
            }
        }
        Scenario::Repl { .. } => {
            let stack = build_stack(&scenario);
            let available: Vec<String> = stack.components.keys().cloned().collect();
            let requested = component.map(str::to_string).unwrap_or_else(|| available[0].clone());
            match stack.components.get(&requested) {
                Some(c) => {
                    let params = if requested.starts_with("srv:") { "(p)" } else { "(c)" };
                    (requested.clone(), dump_iospec(c, params), available)
                }
                None => return Err(unknown_component(&label, &requested, &available)),
            }
        }
        Scenario::Auth { .. } => {
            let stack = build_auth(&scenario);
            let available: Vec<String> = stack.components.keys().cloned().collect();
            let requested = component.map(str::to_string).unwrap_or_else(|| available[0].clone());
            match stack.components.get(&requested) {
                Some(c) => (requested.clone(), dump_iospec(c, "(a)"), available),
                None => return Err(unknown_component(&label, &requested, &available)),
            }
        }
    };
    let mut report = Report::new("dump-iospec", Some(label));
    report.push("rendered", true, format!("component {name}"));
    report.data = json!({ "component": name, "available": available, "text": text });
    Ok(report)
}

fn unknown_component(label: &str, requested: &str, available: &[String]) -> ConfigError {
    ConfigError(format!(
        "dump-iospec: scenario {label} has no component {requested}; available: {}",
        available.join(", ")
    ))
}
