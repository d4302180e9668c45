//! Message terms and attacker derivability for authentication protocols.
//!
//! Terms form a free algebra of agent names, nonces, key atoms, pairs, and
//! signatures. The attacker is an active network: everything sent passes
//! through it, and it can inject anything derivable from its knowledge by
//! pairing, projection, signing with a held private key, and reading the
//! payload out of any signature (signatures authenticate, they do not
//! encrypt). Derivability is computed as a least fixpoint inside an
//! explicit finite, subterm-closed universe, which keeps every check a
//! terminating set computation.

use super::ProtocolError;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgTerm {
    Agent(String),
    Nonce { owner: String, index: u32 },
    PubKey(String),
    PriKey(String),
    Pair(Box<MsgTerm>, Box<MsgTerm>),
    Sign { key: Box<MsgTerm>, payload: Box<MsgTerm> },
    Junk(u32),
}

pub fn agent(name: &str) -> MsgTerm {
    MsgTerm::Agent(name.into())
}

pub fn nonce(owner: &str, index: u32) -> MsgTerm {
    MsgTerm::Nonce {
        owner: owner.into(),
        index,
    }
}

pub fn pubkey(owner: &str) -> MsgTerm {
    MsgTerm::PubKey(owner.into())
}

pub fn prikey(owner: &str) -> MsgTerm {
    MsgTerm::PriKey(owner.into())
}

pub fn msg_pair(left: MsgTerm, right: MsgTerm) -> MsgTerm {
    MsgTerm::Pair(Box::new(left), Box::new(right))
}

/// A payload signed with `owner`'s private key.
pub fn sign(owner: &str, payload: MsgTerm) -> MsgTerm {
    MsgTerm::Sign {
        key: Box::new(prikey(owner)),
        payload: Box::new(payload),
    }
}

impl fmt::Display for MsgTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MsgTerm::Agent(a) => write!(f, "{a}"),
            MsgTerm::Nonce { owner, index } => write!(f, "n{owner}{index}"),
            MsgTerm::PubKey(a) => write!(f, "pub({a})"),
            MsgTerm::PriKey(a) => write!(f, "pri({a})"),
            MsgTerm::Pair(l, r) => write!(f, "({l}, {r})"),
            MsgTerm::Sign { key, payload } => write!(f, "sign({key}, {payload})"),
            MsgTerm::Junk(n) => write!(f, "junk{n}"),
        }
    }
}

impl MsgTerm {
    /// The term itself plus all terms it is built from.
    pub fn subterms(&self) -> BTreeSet<MsgTerm> {
        let mut out = BTreeSet::from([self.clone()]);
        match self {
            MsgTerm::Pair(l, r) => {
                out.extend(l.subterms());
                out.extend(r.subterms());
            }
            MsgTerm::Sign { key, payload } => {
                out.extend(key.subterms());
                out.extend(payload.subterms());
            }
            _ => {}
        }
        out
    }

    /// Encoding into the event value algebra, injective on terms.
    pub fn to_value(&self) -> Value {
        match self {
            MsgTerm::Agent(a) => Value::app("agent", vec![Value::str(a)]),
            MsgTerm::Nonce { owner, index } => {
                Value::app("nonce", vec![Value::str(owner), Value::Int(*index as i64)])
            }
            MsgTerm::PubKey(a) => Value::app("pub", vec![Value::str(a)]),
            MsgTerm::PriKey(a) => Value::app("pri", vec![Value::str(a)]),
            MsgTerm::Pair(l, r) => Value::app("pair", vec![l.to_value(), r.to_value()]),
            MsgTerm::Sign { key, payload } => {
                Value::app("sign", vec![key.to_value(), payload.to_value()])
            }
            MsgTerm::Junk(n) => Value::app("junk", vec![Value::Int(*n as i64)]),
        }
    }
}

/// The subterm closure of a seed set, the canonical way to build a
/// universe for [`dy_closure`].
pub fn universe_from(seeds: impl IntoIterator<Item = MsgTerm>) -> BTreeSet<MsgTerm> {
    let mut out = BTreeSet::new();
    for t in seeds {
        out.extend(t.subterms());
    }
    out
}

fn subterm_gap(universe: &BTreeSet<MsgTerm>) -> Option<MsgTerm> {
    for t in universe {
        for s in t.subterms() {
            if !universe.contains(&s) {
                return Some(s);
            }
        }
    }
    None
}

/// Everything the attacker can derive from `known`, restricted to the
/// given subterm-closed universe.
///
/// Rules: public keys come for free; pairs project; signature payloads can
/// be read; pairs and signatures can be built when their parts (and, for
/// signatures, the private key) are known and the composite stays inside
/// the universe. The result is the least such fixpoint, so the function is
/// extensive on `known ∩ universe`, monotone, and idempotent.
pub fn dy_closure(
    known: &BTreeSet<MsgTerm>,
    universe: &BTreeSet<MsgTerm>,
) -> Result<BTreeSet<MsgTerm>, ProtocolError> {
    if let Some(missing) = subterm_gap(universe) {
        return Err(ProtocolError::UniverseNotClosed(format!(
            "universe misses subterm {missing}"
        )));
    }
    let mut derived: BTreeSet<MsgTerm> = known.intersection(universe).cloned().collect();
    derived.extend(
        universe
            .iter()
            .filter(|t| matches!(t, MsgTerm::PubKey(_)))
            .cloned(),
    );
    loop {
        let mut grown = derived.clone();
        for t in &derived {
            match t {
                MsgTerm::Pair(l, r) => {
                    grown.insert((**l).clone());
                    grown.insert((**r).clone());
                }
                MsgTerm::Sign { payload, .. } => {
                    grown.insert((**payload).clone());
                }
                _ => {}
            }
        }
        for t in universe {
            if grown.contains(t) {
                continue;
            }
            match t {
                MsgTerm::Pair(l, r) => {
                    if grown.contains(l) && grown.contains(r) {
                        grown.insert(t.clone());
                    }
                }
                MsgTerm::Sign { key, payload } => {
                    if grown.contains(key) && grown.contains(payload) {
                        grown.insert(t.clone());
                    }
                }
                _ => {}
            }
        }
        if grown.len() == derived.len() {
            return Ok(derived);
        }
        derived = grown;
    }
}

/// Membership in the attacker's derivable set.
pub fn can_derive(
    known: &BTreeSet<MsgTerm>,
    universe: &BTreeSet<MsgTerm>,
    target: &MsgTerm,
) -> Result<bool, ProtocolError> {
    Ok(dy_closure(known, universe)?.contains(target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::IteratorRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m1(a: &str, b: &str) -> MsgTerm {
        msg_pair(agent(a), msg_pair(agent(b), nonce(a, 1)))
    }

    fn m2(a: &str, b: &str) -> MsgTerm {
        sign(b, msg_pair(nonce(b, 1), msg_pair(nonce(a, 1), agent(a))))
    }

    fn demo_universe() -> BTreeSet<MsgTerm> {
        // Both protocol messages over a grid of claimed senders (the
        // attacker included) and honest receivers.
        let mut seeds = Vec::new();
        for a in ["A", "B", "E"] {
            for b in ["A", "B"] {
                seeds.push(m1(a, b));
                seeds.push(m2(a, b));
            }
        }
        seeds.extend([
            prikey("A"),
            prikey("B"),
            prikey("E"),
            pubkey("A"),
            pubkey("B"),
            pubkey("E"),
            MsgTerm::Junk(1),
            MsgTerm::Junk(2),
            nonce("E", 1),
        ]);
        // A second responder nonce and the signature the attacker would
        // need to forge for it.
        seeds.push(sign("B", msg_pair(nonce("B", 2), msg_pair(nonce("A", 1), agent("A")))));
        universe_from(seeds)
    }

    #[test]
    fn subterms_include_every_part() {
        let t = m2("A", "B");
        let subs = t.subterms();
        assert!(subs.contains(&nonce("B", 1)));
        assert!(subs.contains(&nonce("A", 1)));
        assert!(subs.contains(&agent("A")));
        assert!(subs.contains(&prikey("B")));
        assert!(subs.contains(&t));
        assert_eq!(t.subterms().len(), 7);
    }

    #[test]
    fn unclosed_universe_is_rejected() {
        let leaky = BTreeSet::from([m1("A", "B")]);
        assert!(matches!(
            dy_closure(&BTreeSet::new(), &leaky),
            Err(ProtocolError::UniverseNotClosed(_))
        ));
    }

    #[test]
    fn projection_extraction_and_construction() {
        let universe = demo_universe();
        // From the two protocol messages the attacker learns both nonces
        // and can reassemble the first message.
        let known = BTreeSet::from([m1("A", "B"), m2("A", "B")]);
        let derived = dy_closure(&known, &universe).unwrap();
        assert!(derived.contains(&nonce("A", 1)));
        assert!(derived.contains(&nonce("B", 1)));
        assert!(derived.contains(&agent("A")));
        assert!(derived.contains(&pubkey("B")), "public keys are free");
        assert!(!derived.contains(&prikey("B")), "signing leaks no key");
        // With B's private key the fresh-nonce signature becomes buildable.
        let mut with_key = known.clone();
        with_key.insert(prikey("B"));
        with_key.insert(nonce("B", 2));
        let target = sign("B", msg_pair(nonce("B", 2), msg_pair(nonce("A", 1), agent("A"))));
        assert!(!derived.contains(&target));
        assert!(can_derive(&with_key, &universe, &target).unwrap());
    }

    #[test]
    fn signatures_cannot_be_forged_without_the_key() {
        let universe = demo_universe();
        assert!(universe.len() >= 40, "universe has {} terms", universe.len());
        // Knowing a signed message and the fresh nonce does not let the
        // attacker re-sign the fresh nonce in B's name.
        let known = BTreeSet::from([nonce("A", 1), m2("A", "B"), nonce("B", 2)]);
        let forged = sign("B", msg_pair(nonce("B", 2), msg_pair(nonce("A", 1), agent("A"))));
        assert!(!can_derive(&known, &universe, &forged).unwrap());
        // The attacker can replay the signature it has seen.
        assert!(can_derive(&known, &universe, &m2("A", "B")).unwrap());
    }

    #[test]
    fn closure_laws_hold_on_random_knowledge_sets() {
        let universe = demo_universe();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k1: BTreeSet<MsgTerm> = universe
                .iter()
                .cloned()
                .choose_multiple(&mut rng, 4)
                .into_iter()
                .collect();
            let extra: BTreeSet<MsgTerm> = universe
                .iter()
                .cloned()
                .choose_multiple(&mut rng, 2)
                .into_iter()
                .collect();
            let k2: BTreeSet<MsgTerm> = k1.union(&extra).cloned().collect();
            let c1 = dy_closure(&k1, &universe).unwrap();
            let c2 = dy_closure(&k2, &universe).unwrap();
            assert!(k1.is_subset(&c1), "extensive");
            assert!(c1.is_subset(&c2), "monotone");
            assert_eq!(dy_closure(&c1, &universe).unwrap(), c1, "idempotent");
            assert!(c1.is_subset(&universe), "confined to the universe");
        }
    }

    #[test]
    fn value_encoding_is_injective_on_the_universe() {
        let universe = demo_universe();
        let encoded: BTreeSet<String> = universe.iter().map(|t| t.to_value().to_string()).collect();
        assert_eq!(encoded.len(), universe.len());
    }
}
