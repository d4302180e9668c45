//! Leader election on a unidirectional ring.
//!
//! Nodes circulate identifiers clockwise; a node forwards only identifiers
//! larger than its own and becomes leader when its own identifier returns
//! to it. The stack has three layers: an abstract one-shot election, a
//! protocol layer with per-node channels, and an interface layer that
//! splits each node's channel interaction into explicit buffers and
//! addressed sends and receives. Each layer forward-simulates the one
//! above it modulo a mediator, and the interface layer decomposes into
//! per-node components plus a network environment.

use super::ProtocolError;
use crate::event::Event;
use crate::kernel::compose::{compose_parallel, interleave_family, SyncMap};
use crate::kernel::es::{EventSystem, TraceProperty};
use crate::kernel::refine::{Mediator, SimulationRelation};
use crate::process::guarded::{EventRender, IoEvent, IoGuardedEs};
use crate::process::typing::Typing;
use crate::value::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

/// Ring topology: node identifiers, the clockwise successor map, and an
/// injective assignment of network addresses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingConfig {
    ids: Vec<i64>,
    next: BTreeMap<i64, i64>,
    addr: BTreeMap<i64, i64>,
}

impl RingConfig {
    /// Validates that `next` is a single cycle over its domain and `addr`
    /// an injective map on the same domain.
    pub fn new(
        next: BTreeMap<i64, i64>,
        addr: BTreeMap<i64, i64>,
    ) -> Result<RingConfig, ProtocolError> {
        let ids: Vec<i64> = next.keys().copied().collect();
        if ids.is_empty() {
            return Err(ProtocolError::InvalidRing("no nodes".into()));
        }
        if addr.keys().copied().collect::<Vec<_>>() != ids {
            return Err(ProtocolError::InvalidRing(
                "addr domain differs from next domain".into(),
            ));
        }
        let distinct_addrs: BTreeSet<i64> = addr.values().copied().collect();
        if distinct_addrs.len() != ids.len() {
            return Err(ProtocolError::InvalidRing("addr is not injective".into()));
        }
        // Follow the cycle from the least id; a single cycle visits every
        // node exactly once before returning.
        let start = ids[0];
        let mut seen = BTreeSet::from([start]);
        let mut at = start;
        loop {
            let Some(succ) = next.get(&at).copied() else {
                return Err(ProtocolError::InvalidRing(format!(
                    "next({at}) leaves the id set"
                )));
            };
            if !next.contains_key(&succ) {
                return Err(ProtocolError::InvalidRing(format!(
                    "next({at}) = {succ} leaves the id set"
                )));
            }
            if succ == start {
                break;
            }
            if !seen.insert(succ) {
                return Err(ProtocolError::InvalidRing(format!(
                    "next revisits {succ} before closing the cycle"
                )));
            }
            at = succ;
        }
        if seen.len() != ids.len() {
            return Err(ProtocolError::InvalidRing(format!(
                "next splits into more than one cycle ({} of {} nodes reached)",
                seen.len(),
                ids.len()
            )));
        }
        Ok(RingConfig { ids, next, addr })
    }

    /// The standard ring over ids 1..=n with addresses offset by 100.
    pub fn ring(n: usize) -> RingConfig {
        assert!(n >= 1);
        let n = n as i64;
        let next = (1..=n).map(|i| (i, i % n + 1)).collect();
        let addr = (1..=n).map(|i| (i, 100 + i)).collect();
        RingConfig::new(next, addr).expect("constructed ring is valid")
    }

    pub fn ids(&self) -> &[i64] {
        &self.ids
    }

    pub fn next(&self, i: i64) -> i64 {
        self.next[&i]
    }

    pub fn addr(&self, i: i64) -> i64 {
        self.addr[&i]
    }

    pub fn addrs(&self) -> Vec<i64> {
        self.ids.iter().map(|i| self.addr[i]).collect()
    }

    pub fn max_id(&self) -> i64 {
        *self.ids.iter().max().expect("non-empty")
    }

    /// Node ids strictly between `i` and `j`, walking the ring clockwise
    /// from `i`; empty when `j` directly follows `i`.
    pub fn between(&self, i: i64, j: i64) -> Vec<i64> {
        let mut out = Vec::new();
        let mut at = self.next(i);
        while at != j {
            out.push(at);
            at = self.next(at);
        }
        out
    }
}

fn int(i: i64) -> Value {
    Value::Int(i)
}

/// Abstract layer: each node only has a leader flag, and election is
/// guarded by no other node having been elected.
pub type AbstractState = BTreeMap<i64, bool>;

pub fn abstract_model(cfg: &RingConfig) -> EventSystem<AbstractState> {
    let ids = cfg.ids.clone();
    let initial: AbstractState = ids.iter().map(|i| (*i, false)).collect();
    EventSystem::new(vec![initial], move |s| {
        let mut out = Vec::new();
        for i in &ids {
            if s.iter().all(|(j, lead)| !lead || j == i) {
                let mut t = s.clone();
                t.insert(*i, true);
                out.push((Event::new("elect", vec![int(*i)]), t));
            }
        }
        out
    })
}

/// Protocol layer node: the leader flag plus the incoming channel,
/// a set because the network neither orders nor deduplicates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct ProtoNode {
    pub leader: bool,
    pub chan: BTreeSet<i64>,
}

pub type ProtocolState = BTreeMap<i64, ProtoNode>;

pub fn protocol_model(cfg: &RingConfig) -> EventSystem<ProtocolState> {
    let cfg = cfg.clone();
    let initial: ProtocolState = cfg.ids.iter().map(|i| (*i, ProtoNode::default())).collect();
    EventSystem::new(vec![initial], move |s| {
        let mut out = Vec::new();
        for i in cfg.ids.iter().copied() {
            // setup(i): announce the own id to the clockwise neighbor.
            let mut t = s.clone();
            t.get_mut(&cfg.next(i)).unwrap().chan.insert(i);
            out.push((Event::new("setup", vec![int(i)]), t));
            // accept(i, j): forward a larger id onwards.
            for j in s[&i].chan.iter().copied().filter(|j| *j > i) {
                let mut t = s.clone();
                t.get_mut(&cfg.next(i)).unwrap().chan.insert(j);
                out.push((Event::new("accept", vec![int(i), int(j)]), t));
            }
            // elect(i): the own id came back around.
            if s[&i].chan.contains(&i) {
                let mut t = s.clone();
                t.get_mut(&i).unwrap().leader = true;
                out.push((Event::new("elect", vec![int(i)]), t));
            }
        }
        out
    })
}

/// Interface layer node: the channel interaction is split into input and
/// output buffers feeding addressed receives and sends.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct IfaceNode {
    pub leader: bool,
    pub ibuf: BTreeSet<i64>,
    pub obuf: BTreeSet<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InterfaceState {
    pub nodes: BTreeMap<i64, IfaceNode>,
    /// Per-address channel contents.
    pub chans: BTreeMap<i64, BTreeSet<i64>>,
}

pub fn interface_initial(cfg: &RingConfig) -> InterfaceState {
    InterfaceState {
        nodes: cfg.ids.iter().map(|i| (*i, IfaceNode::default())).collect(),
        chans: cfg.addrs().into_iter().map(|a| (a, BTreeSet::new())).collect(),
    }
}

pub fn interface_model(cfg: &RingConfig) -> EventSystem<InterfaceState> {
    let cfg = cfg.clone();
    let initial = interface_initial(&cfg);
    EventSystem::new(vec![initial], move |s| {
        let mut out = Vec::new();
        for i in cfg.ids.iter().copied() {
            let node = &s.nodes[&i];
            // setup_i(): queue the own id for sending.
            let mut t = s.clone();
            t.nodes.get_mut(&i).unwrap().obuf.insert(i);
            out.push((Event::new("setup", vec![int(i)]), t));
            // receive_i(j): take any id addressed to this node.
            for j in s.chans[&cfg.addr(i)].iter().copied() {
                let mut t = s.clone();
                t.nodes.get_mut(&i).unwrap().ibuf.insert(j);
                out.push((Event::new("receive", vec![int(i), int(j)]), t));
            }
            // accept_i(j): queue a larger received id for forwarding.
            for j in node.ibuf.iter().copied().filter(|j| *j > i) {
                let mut t = s.clone();
                t.nodes.get_mut(&i).unwrap().obuf.insert(j);
                out.push((Event::new("accept", vec![int(i), int(j)]), t));
            }
            // send_i(j, a): emit a buffered id to the neighbor's address.
            let a = cfg.addr(cfg.next(i));
            for j in node.obuf.iter().copied() {
                let mut t = s.clone();
                t.chans.get_mut(&a).unwrap().insert(j);
                out.push((Event::new("send", vec![int(i), int(j), int(a)]), t));
            }
            // elect_i(): the own id made it back.
            if node.ibuf.contains(&i) {
                let mut t = s.clone();
                t.nodes.get_mut(&i).unwrap().leader = true;
                out.push((Event::new("elect", vec![int(i)]), t));
            }
        }
        out
    })
}

/// Protocol states refine abstract states by dropping the channels.
pub fn r_pa() -> SimulationRelation<AbstractState, ProtocolState> {
    SimulationRelation::new(|a: &AbstractState, c: &ProtocolState| {
        a.len() == c.len() && a.iter().all(|(i, lead)| c[i].leader == *lead)
    })
}

/// Interface states refine protocol states by merging the buffers away:
/// leader flags agree and each node's channel is the one at its address.
pub fn r_ip(cfg: &RingConfig) -> SimulationRelation<ProtocolState, InterfaceState> {
    let cfg = cfg.clone();
    SimulationRelation::new(move |p: &ProtocolState, c: &InterfaceState| {
        cfg.ids.iter().all(|i| {
            p[i].leader == c.nodes[i].leader && p[i].chan == c.chans[&cfg.addr(*i)]
        })
    })
}

/// Protocol-to-abstract mediator: elections survive, the rest stutters.
pub fn pi_pa() -> Mediator {
    Mediator::new("pa", |e: &Event| {
        if e.name == "elect" {
            e.clone()
        } else {
            Event::skip()
        }
    })
}

/// Interface-to-protocol mediator: a send effects the protocol-level
/// channel update (its own id announces, a forwarded id accepts); buffer
/// moves stutter.
pub fn pi_ip() -> Mediator {
    Mediator::new("ip", |e: &Event| match e.name.as_str() {
        "elect" => e.clone(),
        "send" => {
            let (i, j) = (e.params[0].clone(), e.params[1].clone());
            if i == j {
                Event::new("setup", vec![i])
            } else {
                Event::new("accept", vec![i, j])
            }
        }
        _ => Event::skip(),
    })
}

/// Interface events straight to abstract events.
pub fn pi_hat() -> Mediator {
    pi_pa().after(&pi_ip())
}

/// At most one node is ever elected.
pub fn unique_leader_property() -> TraceProperty {
    TraceProperty::new("unique-leader", |trace| {
        let elected: BTreeSet<&Value> = trace
            .iter()
            .filter(|e| e.name == "elect")
            .map(|e| &e.params[0])
            .collect();
        elected.len() <= 1
    })
}

/// The three models with their simulation relations and mediators.
pub struct LeaderStack {
    pub cfg: RingConfig,
    pub abstract_model: EventSystem<AbstractState>,
    pub protocol: EventSystem<ProtocolState>,
    pub interface: EventSystem<InterfaceState>,
    pub r_pa: SimulationRelation<AbstractState, ProtocolState>,
    pub r_ip: SimulationRelation<ProtocolState, InterfaceState>,
    pub pi_pa: Mediator,
    pub pi_ip: Mediator,
}

pub fn build_leader_stack(cfg: &RingConfig) -> LeaderStack {
    LeaderStack {
        cfg: cfg.clone(),
        abstract_model: abstract_model(cfg),
        protocol: protocol_model(cfg),
        interface: interface_model(cfg),
        r_pa: r_pa(),
        r_ip: r_ip(cfg),
        pi_pa: pi_pa(),
        pi_ip: pi_ip(),
    }
}

/// The component model of one node: the interface-layer events with the
/// network interaction turned into genuine I/O. Receives input an id,
/// sends output an (id, address) pair constrained to the node's clockwise
/// neighbor; setup, accept, and elect are ghost events.
pub fn leader_component(cfg: &RingConfig, i: i64) -> IoGuardedEs<IfaceNode> {
    let mut typing = Typing::new();
    typing.add("receive", Value::Unit, cfg.ids.iter().map(|j| int(*j)));
    for m in cfg.ids.iter().copied() {
        for a in cfg.addrs() {
            typing.add_signal("send", Value::pair(int(m), int(a)));
        }
    }
    typing.add_signal("setup", Value::Unit);
    for j in cfg.ids.iter().copied() {
        typing.add_signal("accept", int(j));
    }
    typing.add_signal("elect", Value::Unit);

    let out_addr = cfg.addr(cfg.next(i));
    let send_outputs: Vec<Value> = cfg
        .ids
        .iter()
        .flat_map(|m| cfg.addrs().into_iter().map(|a| Value::pair(int(*m), int(a))))
        .collect();

    let events = vec![
        IoEvent {
            bio: "receive".into(),
            outputs: vec![Value::Unit],
            ghost: false,
            guard: Rc::new(|_: &IfaceNode, _, _| true),
            update: Rc::new(|s: &IfaceNode, _, w: &Value| {
                let mut t = s.clone();
                t.ibuf.insert(w.as_int().expect("id input"));
                t
            }),
            render: Some(EventRender {
                binders: vec![],
                guard: None,
                args: "m".into(),
                update: "s[ibuf := ibuf(s) ∪ {m}]".into(),
                op: Some("UDP_receive_int".into()),
                input: Some("m".into()),
            }),
        },
        IoEvent {
            bio: "send".into(),
            outputs: send_outputs,
            ghost: false,
            guard: Rc::new(move |s: &IfaceNode, v: &Value, _| {
                let Value::List(parts) = v else { return false };
                let (m, a) = (parts[0].as_int().unwrap(), parts[1].as_int().unwrap());
                s.obuf.contains(&m) && a == out_addr
            }),
            update: Rc::new(|s: &IfaceNode, _, _| s.clone()),
            render: Some(EventRender {
                binders: vec!["m".into(), "a′".into()],
                guard: Some("m ∈ obuf(s) ∧ a′ = a".into()),
                args: "(m, a′)".into(),
                update: "s".into(),
                op: Some("UDP_send_int".into()),
                input: None,
            }),
        },
        IoEvent {
            bio: "setup".into(),
            outputs: vec![Value::Unit],
            ghost: true,
            guard: Rc::new(|_: &IfaceNode, _, _| true),
            update: Rc::new(move |s: &IfaceNode, _, _| {
                let mut t = s.clone();
                t.obuf.insert(i);
                t
            }),
            render: Some(EventRender {
                binders: vec![],
                guard: None,
                args: String::new(),
                update: "s[obuf := obuf(s) ∪ {i}]".into(),
                op: None,
                input: None,
            }),
        },
        IoEvent {
            bio: "accept".into(),
            outputs: cfg.ids.iter().map(|j| int(*j)).collect(),
            ghost: true,
            guard: Rc::new(move |s: &IfaceNode, v: &Value, _| {
                let j = v.as_int().expect("id output");
                s.ibuf.contains(&j) && j > i
            }),
            update: Rc::new(|s: &IfaceNode, v: &Value, _| {
                let mut t = s.clone();
                t.obuf.insert(v.as_int().expect("id output"));
                t
            }),
            render: Some(EventRender {
                binders: vec!["m".into()],
                guard: Some("m ∈ ibuf(s) ∧ m > i".into()),
                args: "m".into(),
                update: "s[obuf := obuf(s) ∪ {m}]".into(),
                op: None,
                input: None,
            }),
        },
        IoEvent {
            bio: "elect".into(),
            outputs: vec![Value::Unit],
            ghost: true,
            guard: Rc::new(move |s: &IfaceNode, _, _| s.ibuf.contains(&i)),
            update: Rc::new(|s: &IfaceNode, _, _| {
                let mut t = s.clone();
                t.leader = true;
                t
            }),
            render: Some(EventRender {
                binders: vec![],
                guard: Some("i ∈ ibuf(s)".into()),
                args: String::new(),
                update: "s[leader := true]".into(),
                op: None,
                input: None,
            }),
        },
    ];
    IoGuardedEs::new(IfaceNode::default(), typing, events).expect("valid component model")
}

/// The environment: per-address channel sets. A receive hands a channel
/// element to a node without removing it; a send adds to any channel.
pub type EnvState = BTreeMap<i64, BTreeSet<i64>>;

pub fn leader_env(cfg: &RingConfig) -> EventSystem<EnvState> {
    let cfg = cfg.clone();
    let initial: EnvState = cfg.addrs().into_iter().map(|a| (a, BTreeSet::new())).collect();
    EventSystem::new(vec![initial], move |s| {
        let mut out = Vec::new();
        for i in cfg.ids.iter().copied() {
            for m in s[&cfg.addr(i)].iter().copied() {
                out.push((Event::new("receive_e", vec![int(i), int(m)]), s.clone()));
            }
            for m in cfg.ids.iter().copied() {
                for a in cfg.addrs() {
                    let mut t = s.clone();
                    t.get_mut(&a).unwrap().insert(m);
                    out.push((Event::new("send_e", vec![int(i), int(m), int(a)]), t));
                }
            }
        }
        out
    })
}

/// Encodes a component action as a tagged event carrying the node id, for
/// synchronization with the environment.
pub fn encode_component_event(i: i64) -> impl Fn(&crate::process::typing::Action, bool) -> Event {
    move |action, _ghost| match action.bio.as_str() {
        "receive" => Event::new("receive_s", vec![int(i), action.input.clone()]),
        "send" => {
            let Value::List(parts) = &action.output else {
                panic!("send output is a pair")
            };
            Event::new("send_s", vec![int(i), parts[0].clone(), parts[1].clone()])
        }
        "setup" => Event::new("setup_s", vec![int(i)]),
        "accept" => Event::new("accept_s", vec![int(i), action.output.clone()]),
        "elect" => Event::new("elect_s", vec![int(i)]),
        other => panic!("unexpected component action {other}"),
    }
}

/// Synchronization map joining the interleaved components with the
/// environment: receives and sends pair up on node, message, and address;
/// ghost events interleave against an idle environment.
pub fn chi_e() -> SyncMap {
    SyncMap::new("leader-net", |l: &Event, r: &Event| {
        match (l.name.as_str(), r.name.as_str()) {
            ("skip", "skip") => Some(Event::skip()),
            ("receive_s", "receive_e") if l.params == r.params => {
                Some(Event::new("receive", l.params.clone()))
            }
            ("send_s", "send_e") if l.params == r.params => {
                Some(Event::new("send", l.params.clone()))
            }
            ("setup_s", "skip") => Some(Event::new("setup", l.params.clone())),
            ("accept_s", "skip") => Some(Event::new("accept", l.params.clone())),
            ("elect_s", "skip") => Some(Event::new("elect", l.params.clone())),
            _ => None,
        }
    })
}

/// Per-node deployment data: γ(i) = (i, addr(next(i))).
pub fn gamma(cfg: &RingConfig) -> BTreeMap<i64, (i64, i64)> {
    cfg.ids
        .iter()
        .map(|i| (*i, (*i, cfg.addr(cfg.next(*i)))))
        .collect()
}

pub struct LeaderDecomposition {
    pub cfg: RingConfig,
    pub components: BTreeMap<i64, IoGuardedEs<IfaceNode>>,
    pub env: EventSystem<EnvState>,
    pub chi_e: SyncMap,
    pub gamma: BTreeMap<i64, (i64, i64)>,
}

pub fn decompose_leader(cfg: &RingConfig) -> LeaderDecomposition {
    LeaderDecomposition {
        cfg: cfg.clone(),
        components: cfg
            .ids
            .iter()
            .map(|i| (*i, leader_component(cfg, *i)))
            .collect(),
        env: leader_env(cfg),
        chi_e: chi_e(),
        gamma: gamma(cfg),
    }
}

impl LeaderDecomposition {
    /// Recomposes the node components with the environment; trace-equal to
    /// the interface model.
    pub fn recomposed(&self) -> EventSystem<(Vec<IfaceNode>, EnvState)> {
        let members: Vec<EventSystem<IfaceNode>> = self
            .components
            .iter()
            .map(|(i, ges)| ges.as_event_system_with(encode_component_event(*i)))
            .collect();
        compose_parallel(&interleave_family(members), &self.env, &self.chi_e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::es::{enumerate_traces, satisfies};
    use crate::kernel::refine::{check_refinement, preimage_property, DEFAULT_PAIR_BUDGET};

    #[test]
    fn ring_validation() {
        assert!(RingConfig::ring(1).ids() == [1]);
        let cfg = RingConfig::ring(4);
        assert_eq!(cfg.next(4), 1);
        assert_eq!(cfg.between(2, 1), vec![3, 4]);
        assert!(cfg.between(1, 2).is_empty());

        // Two disjoint 2-cycles.
        let split = BTreeMap::from([(1, 2), (2, 1), (3, 4), (4, 3)]);
        let addr: BTreeMap<i64, i64> = (1..=4).map(|i| (i, 100 + i)).collect();
        assert!(matches!(
            RingConfig::new(split, addr.clone()),
            Err(ProtocolError::InvalidRing(_))
        ));
        // Non-injective addresses.
        let next: BTreeMap<i64, i64> = BTreeMap::from([(1, 2), (2, 3), (3, 1)]);
        let dup = BTreeMap::from([(1, 7), (2, 7), (3, 8)]);
        assert!(matches!(
            RingConfig::new(next.clone(), dup),
            Err(ProtocolError::InvalidRing(_))
        ));
        // next leaving the id set.
        let escape = BTreeMap::from([(1, 2), (2, 3), (3, 9)]);
        let addr3: BTreeMap<i64, i64> = (1..=3).map(|i| (i, 100 + i)).collect();
        assert!(matches!(
            RingConfig::new(escape, addr3),
            Err(ProtocolError::InvalidRing(_))
        ));
    }

    #[test]
    fn protocol_refines_abstract() {
        let stack = build_leader_stack(&RingConfig::ring(3));
        let verdict = check_refinement(
            &stack.protocol,
            &stack.abstract_model,
            &stack.r_pa,
            &stack.pi_pa,
            5,
            DEFAULT_PAIR_BUDGET,
        );
        assert!(verdict.passed(), "{verdict:?}");
    }

    #[test]
    fn interface_refines_protocol() {
        let stack = build_leader_stack(&RingConfig::ring(2));
        let verdict = check_refinement(
            &stack.interface,
            &stack.protocol,
            &stack.r_ip,
            &stack.pi_ip,
            5,
            DEFAULT_PAIR_BUDGET,
        );
        assert!(verdict.passed(), "{verdict:?}");
    }

    #[test]
    fn abstract_elections_are_unique() {
        let stack = build_leader_stack(&RingConfig::ring(3));
        let outcome = satisfies(
            &stack.abstract_model,
            stack.abstract_model.initial(),
            &unique_leader_property(),
            4,
        );
        assert!(outcome.holds, "{:?}", outcome.violation);
    }

    #[test]
    fn interface_mediated_traces_satisfy_uniqueness() {
        let stack = build_leader_stack(&RingConfig::ring(2));
        let prop = preimage_property(&pi_hat(), &unique_leader_property());
        let outcome = satisfies(&stack.interface, stack.interface.initial(), &prop, 4);
        assert!(outcome.holds, "{:?}", outcome.violation);
    }

    #[test]
    fn single_node_ring_elects_itself() {
        let cfg = RingConfig::ring(1);
        let interface = interface_model(&cfg);
        let traces = enumerate_traces(&interface, interface.initial(), 4);
        let run = vec![
            Event::new("setup", vec![int(1)]),
            Event::new("send", vec![int(1), int(1), int(cfg.addr(1))]),
            Event::new("receive", vec![int(1), int(1)]),
            Event::new("elect", vec![int(1)]),
        ];
        assert!(traces.contains(&run));
    }

    fn reachable_protocol_states(cfg: &RingConfig, depth: usize) -> Vec<ProtocolState> {
        let es = protocol_model(cfg);
        let mut seen: BTreeSet<ProtocolState> = es.initial().iter().cloned().collect();
        let mut frontier: Vec<ProtocolState> = es.initial().to_vec();
        for _ in 0..depth {
            let mut next = Vec::new();
            for s in &frontier {
                for (_, t) in es.successors(s) {
                    if seen.insert(t.clone()) {
                        next.push(t);
                    }
                }
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    /// The inductive invariant behind "only the maximum is elected": a
    /// circulating id outranks every node it has passed.
    fn interval_nodes_invariant(cfg: &RingConfig, s: &ProtocolState) -> bool {
        cfg.ids().iter().all(|j| {
            s[j].chan
                .iter()
                .all(|i| cfg.between(*i, *j).iter().all(|x| x < i))
        })
    }

    /// The over-strong misreading quantifying over the contents of the
    /// passed channels instead of the passed nodes.
    fn interval_contents_misreading(cfg: &RingConfig, s: &ProtocolState) -> bool {
        cfg.ids().iter().all(|j| {
            s[j].chan.iter().all(|i| {
                cfg.between(*i, *j)
                    .iter()
                    .all(|x| s[x].chan.iter().all(|k| k < i))
            })
        })
    }

    #[test]
    fn circulating_ids_outrank_passed_nodes() {
        // An id-order-scrambled ring exercises intervals properly.
        let next = BTreeMap::from([(3, 4), (4, 2), (2, 1), (1, 3)]);
        let addr: BTreeMap<i64, i64> = (1..=4).map(|i| (i, 100 + i)).collect();
        let scrambled = RingConfig::new(next, addr).unwrap();
        for cfg in [RingConfig::ring(3), scrambled] {
            let states = reachable_protocol_states(&cfg, 5);
            assert!(states.iter().all(|s| interval_nodes_invariant(&cfg, s)));
            // Leaders are always the maximum id.
            assert!(states.iter().all(|s| s
                .iter()
                .all(|(i, n)| !n.leader || *i == cfg.max_id())));
        }
    }

    #[test]
    fn contents_misreading_is_refuted() {
        let next = BTreeMap::from([(3, 4), (4, 2), (2, 1), (1, 3)]);
        let addr: BTreeMap<i64, i64> = (1..=4).map(|i| (i, 100 + i)).collect();
        let cfg = RingConfig::new(next, addr).unwrap();
        let states = reachable_protocol_states(&cfg, 5);
        assert!(states.iter().any(|s| !interval_contents_misreading(&cfg, s)));
    }

    #[test]
    fn received_ids_were_sent_to_this_address() {
        let cfg = RingConfig::ring(3);
        let es = interface_model(&cfg);
        let mut seen: BTreeSet<InterfaceState> = es.initial().iter().cloned().collect();
        let mut frontier: Vec<InterfaceState> = es.initial().to_vec();
        for _ in 0..5 {
            let mut next = Vec::new();
            for s in &frontier {
                for (_, t) in es.successors(s) {
                    if seen.insert(t.clone()) {
                        next.push(t);
                    }
                }
            }
            frontier = next;
        }
        for s in &seen {
            for (i, node) in &s.nodes {
                for j in &node.ibuf {
                    assert!(
                        s.chans[&cfg.addr(*i)].contains(j),
                        "{j} buffered at {i} but never sent to its address"
                    );
                }
            }
        }
    }

    #[test]
    fn recomposition_matches_the_interface_model() {
        let cfg = RingConfig::ring(2);
        let interface = interface_model(&cfg);
        let recomposed = decompose_leader(&cfg).recomposed();
        for depth in 0..=4 {
            let want = enumerate_traces(&interface, interface.initial(), depth);
            let got = enumerate_traces(&recomposed, recomposed.initial(), depth);
            assert_eq!(got, want, "depth {depth}");
        }
    }

    #[test]
    fn component_send_is_pinned_to_the_ring_neighbor() {
        let cfg = RingConfig::ring(3);
        let comp = leader_component(&cfg, 2);
        let mut state = IfaceNode::default();
        state.obuf.insert(2);
        state.obuf.insert(3);
        let sends: Vec<Value> = comp
            .action_successors(&state)
            .into_iter()
            .filter(|(a, _, _)| a.bio == "send")
            .map(|(a, _, _)| a.output)
            .collect();
        // Only buffered ids, only to addr(next(2)) = addr(3).
        let a = int(cfg.addr(3));
        assert_eq!(
            sends,
            vec![
                Value::pair(int(2), a.clone()),
                Value::pair(int(3), a.clone())
            ]
        );
        // Ghost accept requires a buffered id exceeding the own id.
        let mut st = IfaceNode::default();
        st.ibuf.extend([1, 3]);
        let accepts: Vec<Value> = comp
            .action_successors(&st)
            .into_iter()
            .filter(|(a, _, _)| a.bio == "accept")
            .map(|(a, _, _)| a.output)
            .collect();
        assert_eq!(accepts, vec![int(3)]);
    }

    #[test]
    fn environment_receive_requires_channel_membership() {
        let cfg = RingConfig::ring(2);
        let env = leader_env(&cfg);
        let mut state: EnvState = cfg.addrs().into_iter().map(|a| (a, BTreeSet::new())).collect();
        state.get_mut(&cfg.addr(1)).unwrap().insert(2);
        let receives: Vec<Event> = env
            .successors(&state)
            .into_iter()
            .map(|(e, _)| e)
            .filter(|e| e.name == "receive_e")
            .collect();
        assert_eq!(receives, vec![Event::new("receive_e", vec![int(1), int(2)])]);
    }
}
