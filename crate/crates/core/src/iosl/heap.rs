//! Permission heaps and their transition semantics.
//!
//! A heap is a finite multiset of chunks: I/O permissions
//! `bio(t, v, w, t')` and tokens `token(t)` over binary-tree places. A
//! permission is an edge from place `t` to place `t'`; executing the action
//! `bio(v, w)` pushes a token along a matching edge and consumes the
//! permission. An action whose input differs from the well-typed one a
//! permission predicts collapses the heap into the chaos state, which
//! permits every well-typed action from then on.

use crate::process::typing::{Action, Typing};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IoslError {
    #[error("satisfaction search exceeded its budget of {budget} steps")]
    BudgetExceeded { budget: usize },
    #[error("trace intersection over an empty heap family is undefined")]
    EmptySet,
    #[error("canonical model construction passed the place-length bound {bound}")]
    BoundExceeded { bound: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    L,
    R,
}

/// A position in a binary tree, read left to right from the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Place(Vec<Dir>);

impl Place {
    pub fn root() -> Place {
        Place(Vec::new())
    }

    pub fn from_dirs(dirs: impl IntoIterator<Item = Dir>) -> Place {
        Place(dirs.into_iter().collect())
    }

    /// Parses strings like "LLR"; the empty string is the root.
    pub fn parse(s: &str) -> Option<Place> {
        s.chars()
            .map(|c| match c {
                'L' => Some(Dir::L),
                'R' => Some(Dir::R),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Place)
    }

    pub fn child(&self, d: Dir) -> Place {
        let mut dirs = self.0.clone();
        dirs.push(d);
        Place(dirs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Prefix order on positions: whether `self` lies on the path to `other`.
    pub fn is_prefix_of(&self, other: &Place) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn as_string(&self) -> String {
        self.0
            .iter()
            .map(|d| match d {
                Dir::L => 'L',
                Dir::R => 'R',
            })
            .collect()
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "\u{03b5}")
        } else {
            write!(f, "{}", self.as_string())
        }
    }
}

impl Serialize for Place {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_string())
    }
}

impl<'de> Deserialize<'de> for Place {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Place::parse(&s).ok_or_else(|| D::Error::custom(format!("bad place string {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chunk {
    Perm {
        bio: String,
        source: Place,
        #[serde(rename = "out")]
        output: crate::value::Value,
        #[serde(rename = "in")]
        input: crate::value::Value,
        target: Place,
    },
    Token { at: Place },
}

impl Chunk {
    pub fn perm(
        bio: impl Into<String>,
        source: Place,
        output: crate::value::Value,
        input: crate::value::Value,
        target: Place,
    ) -> Chunk {
        Chunk::Perm {
            bio: bio.into(),
            source,
            output,
            input,
            target,
        }
    }

    pub fn token(at: Place) -> Chunk {
        Chunk::Token { at }
    }

    /// Tokens are always well-typed; a permission must predict an input in
    /// its operation's type.
    pub fn is_well_typed(&self, typing: &Typing) -> bool {
        match self {
            Chunk::Token { .. } => true,
            Chunk::Perm {
                bio, output, input, ..
            } => typing
                .inputs(bio, output)
                .is_some_and(|ws| ws.contains(input)),
        }
    }

    pub fn places(&self) -> Vec<&Place> {
        match self {
            Chunk::Token { at } => vec![at],
            Chunk::Perm { source, target, .. } => vec![source, target],
        }
    }
}

impl fmt::Display for Chunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chunk::Token { at } => write!(f, "token({at})"),
            Chunk::Perm {
                bio,
                source,
                output,
                input,
                target,
            } => write!(f, "{bio}({source}, {output}, {input}, {target})"),
        }
    }
}

/// A finite multiset of chunks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Heap(BTreeMap<Chunk, usize>);

impl Heap {
    pub fn new() -> Heap {
        Heap::default()
    }

    pub fn from_chunks(chunks: impl IntoIterator<Item = Chunk>) -> Heap {
        let mut h = Heap::new();
        for c in chunks {
            h.insert(c);
        }
        h
    }

    pub fn insert(&mut self, chunk: Chunk) {
        *self.0.entry(chunk).or_insert(0) += 1;
    }

    pub fn count(&self, chunk: &Chunk) -> usize {
        self.0.get(chunk).copied().unwrap_or(0)
    }

    pub fn contains(&self, chunk: &Chunk) -> bool {
        self.count(chunk) > 0
    }

    /// Removes one copy; false if the chunk is absent.
    pub fn remove_one(&mut self, chunk: &Chunk) -> bool {
        match self.0.get_mut(chunk) {
            Some(n) if *n > 1 => {
                *n -= 1;
                true
            }
            Some(_) => {
                self.0.remove(chunk);
                true
            }
            None => false,
        }
    }

    /// Multiset sum.
    pub fn sum(&self, other: &Heap) -> Heap {
        let mut h = self.clone();
        for (c, n) in &other.0 {
            *h.0.entry(c.clone()).or_insert(0) += n;
        }
        h
    }

    /// Multiset difference, truncating at zero.
    pub fn minus(&self, other: &Heap) -> Heap {
        let mut h = self.clone();
        for (c, n) in &other.0 {
            match h.0.get_mut(c) {
                Some(m) if *m > *n => *m -= n,
                Some(_) => {
                    h.0.remove(c);
                }
                None => {}
            }
        }
        h
    }

    pub fn is_subheap_of(&self, other: &Heap) -> bool {
        self.0.iter().all(|(c, n)| other.count(c) >= *n)
    }

    /// Total multiplicity.
    pub fn size(&self) -> usize {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counted(&self) -> impl Iterator<Item = (&Chunk, usize)> {
        self.0.iter().map(|(c, n)| (c, *n))
    }

    /// Every copy of every chunk, in canonical order.
    pub fn chunks(&self) -> impl Iterator<Item = &Chunk> {
        self.0.iter().flat_map(|(c, n)| std::iter::repeat(c).take(*n))
    }

    pub fn distinct_chunks(&self) -> impl Iterator<Item = &Chunk> {
        self.0.keys()
    }

    /// All places mentioned by any chunk.
    pub fn places(&self) -> BTreeSet<Place> {
        self.0
            .keys()
            .flat_map(|c| c.places().into_iter().cloned())
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.0
            .iter()
            .filter(|(c, _)| matches!(c, Chunk::Token { .. }))
            .map(|(_, n)| n)
            .sum()
    }

    pub fn perm_count(&self) -> usize {
        self.size() - self.token_count()
    }
}

impl fmt::Display for Heap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, c) in self.chunks().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Heap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.chunks())
    }
}

impl<'de> Deserialize<'de> for Heap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let chunks = Vec::<Chunk>::deserialize(deserializer)?;
        Ok(Heap::from_chunks(chunks))
    }
}

/// A live heap or the chaos state reached through a contradicted
/// prediction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum HeapState {
    Live(Heap),
    Chaos,
}

impl HeapState {
    pub fn live(chunks: impl IntoIterator<Item = Chunk>) -> HeapState {
        HeapState::Live(Heap::from_chunks(chunks))
    }

    pub fn as_live(&self) -> Option<&Heap> {
        match self {
            HeapState::Live(h) => Some(h),
            HeapState::Chaos => None,
        }
    }
}

impl fmt::Display for HeapState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeapState::Live(h) => h.fmt(f),
            HeapState::Chaos => write!(f, "\u{22a5}"),
        }
    }
}

/// All successor heap states under `action`. An empty result means the
/// action is not executable here.
///
/// A permission whose source carries a token fires normally when the action
/// carries exactly the predicted well-typed input, and collapses to chaos
/// when the action carries a different well-typed input. Chaos loops on
/// every well-typed action.
pub fn heap_step(hs: &HeapState, action: &Action, typing: &Typing) -> BTreeSet<HeapState> {
    let mut out = BTreeSet::new();
    let well_typed = typing
        .inputs(&action.bio, &action.output)
        .is_some_and(|ws| ws.contains(&action.input));
    if !well_typed {
        return out;
    }
    let h = match hs {
        HeapState::Chaos => {
            out.insert(HeapState::Chaos);
            return out;
        }
        HeapState::Live(h) => h,
    };
    for chunk in h.distinct_chunks() {
        let Chunk::Perm {
            bio,
            source,
            output,
            input,
            target,
        } = chunk
        else {
            continue;
        };
        if *bio != action.bio || *output != action.output {
            continue;
        }
        if !h.contains(&Chunk::token(source.clone())) {
            continue;
        }
        if *input == action.input {
            let mut succ = h.clone();
            succ.remove_one(&Chunk::token(source.clone()));
            succ.remove_one(chunk);
            succ.insert(Chunk::token(target.clone()));
            out.insert(HeapState::Live(succ));
        } else if chunk.is_well_typed(typing) {
            out.insert(HeapState::Chaos);
        }
    }
    out
}

/// The actions executable in `hs`, in canonical order.
pub fn enabled_actions(hs: &HeapState, typing: &Typing) -> BTreeSet<Action> {
    match hs {
        HeapState::Chaos => typing.actions().into_iter().collect(),
        HeapState::Live(h) => {
            let mut out = BTreeSet::new();
            for chunk in h.distinct_chunks() {
                let Chunk::Perm {
                    bio,
                    source,
                    output,
                    ..
                } = chunk
                else {
                    continue;
                };
                if !chunk.is_well_typed(typing) || !h.contains(&Chunk::token(source.clone())) {
                    continue;
                }
                // The predicted input fires Bio; every other well-typed
                // input fires Contradict. Either way the action executes.
                for w in typing.inputs(bio, output).expect("well-typed chunk") {
                    out.insert(Action::new(bio.clone(), output.clone(), w.clone()));
                }
            }
            out
        }
    }
}

/// All action traces of length at most `depth` executable from `hs`.
pub fn heap_traces(hs: &HeapState, typing: &Typing, depth: usize) -> BTreeSet<Vec<Action>> {
    let mut traces = BTreeSet::new();
    let mut frontier: Vec<(HeapState, Vec<Action>)> = vec![(hs.clone(), Vec::new())];
    while let Some((state, trace)) = frontier.pop() {
        traces.insert(trace.clone());
        if trace.len() == depth {
            continue;
        }
        for action in enabled_actions(&state, typing) {
            for succ in heap_step(&state, &action, typing) {
                let mut t = trace.clone();
                t.push(action.clone());
                frontier.push((succ, t));
            }
        }
    }
    traces
}

/// Traces executable in every member of a heap family.
pub fn heapset_traces(
    family: &[HeapState],
    typing: &Typing,
    depth: usize,
) -> Result<BTreeSet<Vec<Action>>, IoslError> {
    let mut it = family.iter();
    let first = it.next().ok_or(IoslError::EmptySet)?;
    let mut common = heap_traces(first, typing, depth);
    for hs in it {
        let t = heap_traces(hs, typing, depth);
        common.retain(|tau| t.contains(tau));
    }
    Ok(common)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn v(n: i64) -> Value {
        Value::Int(n)
    }

    fn recv(source: &str, input: i64, target: &str) -> Chunk {
        Chunk::perm(
            "recv",
            Place::parse(source).unwrap(),
            Value::Unit,
            v(input),
            Place::parse(target).unwrap(),
        )
    }

    fn send(source: &str, output: i64, target: &str) -> Chunk {
        Chunk::perm(
            "send",
            Place::parse(source).unwrap(),
            v(output),
            Value::Unit,
            Place::parse(target).unwrap(),
        )
    }

    fn tok(at: &str) -> Chunk {
        Chunk::token(Place::parse(at).unwrap())
    }

    fn recv_a(input: i64) -> Action {
        Action::new("recv", Value::Unit, v(input))
    }

    fn send_a(output: i64) -> Action {
        Action::new("send", v(output), Value::Unit)
    }

    /// Typing for the receive-then-send-double example; `recv` accepts the
    /// given inputs, each `send` output takes the unit result.
    fn doubling_typing(recv_inputs: &[i64], send_outputs: &[i64]) -> Typing {
        let mut ty = Typing::new();
        ty.add("recv", Value::Unit, recv_inputs.iter().map(|n| v(*n)));
        for out in send_outputs {
            ty.add_signal("send", v(*out));
        }
        ty
    }

    fn h1() -> HeapState {
        HeapState::live([tok(""), recv("", 12, "L"), send("L", 24, "LL")])
    }

    fn h2() -> HeapState {
        HeapState::live([tok(""), recv("", 12, ""), send("", 24, "")])
    }

    fn h3() -> HeapState {
        HeapState::live([
            tok(""),
            recv("", 12, "L"),
            send("L", 24, "LL"),
            send("L", 35, "LL"),
        ])
    }

    fn prefixes(runs: &[Vec<Action>]) -> BTreeSet<Vec<Action>> {
        let mut out = BTreeSet::new();
        for run in runs {
            for k in 0..=run.len() {
                out.insert(run[..k].to_vec());
            }
        }
        out
    }

    #[test]
    fn regular_traces_of_the_three_doubling_heaps() {
        let ty = doubling_typing(&[12], &[24, 35]);
        assert_eq!(
            heap_traces(&h1(), &ty, 3),
            prefixes(&[vec![recv_a(12), send_a(24)]])
        );
        assert_eq!(
            heap_traces(&h2(), &ty, 3),
            prefixes(&[
                vec![recv_a(12), send_a(24)],
                vec![send_a(24), recv_a(12)]
            ])
        );
        assert_eq!(
            heap_traces(&h3(), &ty, 3),
            prefixes(&[
                vec![recv_a(12), send_a(24)],
                vec![recv_a(12), send_a(35)]
            ])
        );
    }

    #[test]
    fn family_intersection_keeps_only_shared_behavior() {
        let ty = doubling_typing(&[12], &[24, 35]);
        let family = [h1(), h2(), h3()];
        assert_eq!(
            heapset_traces(&family, &ty, 2).unwrap(),
            prefixes(&[vec![recv_a(12), send_a(24)]])
        );
        assert!(matches!(
            heapset_traces(&[], &ty, 2),
            Err(IoslError::EmptySet)
        ));
    }

    #[test]
    fn contradicted_prediction_collapses_to_chaos() {
        let ty = doubling_typing(&[12, 19], &[24, 38]);
        let succ = heap_step(&h1(), &recv_a(19), &ty);
        assert_eq!(succ, BTreeSet::from([HeapState::Chaos]));
        // Chaos loops on well-typed actions and refuses ill-typed ones.
        assert_eq!(
            heap_step(&HeapState::Chaos, &send_a(24), &ty),
            BTreeSet::from([HeapState::Chaos])
        );
        assert!(heap_step(&HeapState::Chaos, &send_a(99), &ty).is_empty());
        // With the narrow typing 19 is ill-typed, so nothing fires at all.
        let narrow = doubling_typing(&[12], &[24]);
        assert!(heap_step(&h1(), &recv_a(19), &narrow).is_empty());
    }

    #[test]
    fn mixed_prediction_family_union_of_regular_traces() {
        let ty = doubling_typing(&[12, 19], &[24, 38]);
        let h1p = HeapState::live([tok(""), recv("", 19, "L"), send("L", 38, "LL")]);
        let family = [h1(), h1p.clone()];
        let expected = prefixes(&[
            vec![recv_a(12), send_a(24)],
            vec![recv_a(19), send_a(38)],
        ]);
        for depth in 2..=3 {
            assert_eq!(
                heapset_traces(&family, &ty, depth).unwrap(),
                expected,
                "depth {depth}"
            );
        }
    }

    #[test]
    fn bio_conserves_tokens_and_consumes_one_permission() {
        let ty = doubling_typing(&[12], &[24, 35]);
        let mut frontier = vec![h1(), h2(), h3()];
        let mut seen = 0;
        while let Some(hs) = frontier.pop() {
            let HeapState::Live(h) = &hs else { continue };
            for action in enabled_actions(&hs, &ty) {
                for succ in heap_step(&hs, &action, &ty) {
                    if let HeapState::Live(g) = &succ {
                        seen += 1;
                        assert_eq!(g.token_count(), h.token_count());
                        assert_eq!(g.perm_count(), h.perm_count() - 1);
                        frontier.push(succ);
                    }
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn tokenless_heaps_are_stuck() {
        let ty = doubling_typing(&[12], &[24]);
        let hs = HeapState::live([recv("", 12, "L")]);
        assert_eq!(heap_traces(&hs, &ty, 4), BTreeSet::from([vec![]]));
        // A token alone enables nothing either.
        let only_tok = HeapState::live([tok("")]);
        assert!(enabled_actions(&only_tok, &ty).is_empty());
    }

    #[test]
    fn ill_typed_permissions_are_inert() {
        let ty = doubling_typing(&[12], &[24]);
        let hs = HeapState::live([tok(""), recv("", 77, "L")]);
        assert!(enabled_actions(&hs, &ty).is_empty());
        assert!(heap_step(&hs, &recv_a(12), &ty).is_empty());
    }

    #[test]
    fn chunks_and_heaps_round_trip_through_json() {
        let c = recv("LL", 12, "LLR");
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(
            json,
            "{\"kind\":\"perm\",\"bio\":\"recv\",\"source\":\"LL\",\"out\":null,\"in\":12,\"target\":\"LLR\"}"
        );
        assert_eq!(serde_json::from_str::<Chunk>(&json).unwrap(), c);

        let t = tok("");
        assert_eq!(
            serde_json::to_string(&t).unwrap(),
            "{\"kind\":\"token\",\"at\":\"\"}"
        );

        let mut h = Heap::from_chunks([c.clone(), t.clone()]);
        h.insert(c.clone());
        let json = serde_json::to_string(&h).unwrap();
        let back: Heap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.count(&c), 2);
    }

    #[test]
    fn place_order_and_prefixes() {
        let root = Place::root();
        let ll = Place::parse("LL").unwrap();
        assert!(root.is_prefix_of(&ll));
        assert!(!ll.is_prefix_of(&root));
        assert!(ll.is_prefix_of(&ll));
        assert_eq!(ll.child(Dir::R), Place::parse("LLR").unwrap());
        assert_eq!(format!("{root}"), "\u{03b5}");
        assert_eq!(format!("{ll}"), "LL");
    }
}
