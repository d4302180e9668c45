//! Assertions over permission heaps.
//!
//! The language is intuitionistic and negation-free: boolean literals,
//! chunk atoms, separating conjunction, and finite existentials over values
//! and places. Bodies of existentials are closures so that assertions
//! embedding corecursive processes stay productive; satisfaction search is
//! budgeted and reports exhaustion instead of diverging.

use super::heap::{Chunk, Heap, IoslError, Place};
use crate::process::typing::Typing;
use crate::process::Process;
use crate::value::Value;
use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

/// Where a place existential draws its candidates from.
#[derive(Clone)]
pub enum PlaceDomain {
    Explicit(Vec<Place>),
    /// Every place mentioned by the heap under test, plus one fresh place
    /// not mentioned by it. Sufficient for chunk targets: a target place
    /// either already occurs in the heap or its identity is irrelevant.
    HeapPlacesPlusFresh,
}

#[derive(Clone)]
pub enum Assertion {
    Bool(bool),
    Atom(Chunk),
    Star(Rc<Assertion>, Rc<Assertion>),
    ExistsValue {
        domain: Vec<Value>,
        body: Rc<dyn Fn(&Value) -> Assertion>,
    },
    ExistsPlace {
        domain: PlaceDomain,
        body: Rc<dyn Fn(&Place) -> Assertion>,
    },
}

impl Assertion {
    pub fn tt() -> Assertion {
        Assertion::Bool(true)
    }

    pub fn atom(chunk: Chunk) -> Assertion {
        Assertion::Atom(chunk)
    }

    pub fn star(lhs: Assertion, rhs: Assertion) -> Assertion {
        Assertion::Star(Rc::new(lhs), Rc::new(rhs))
    }

    /// Iterated separating conjunction; the empty family is `true`.
    pub fn star_all(parts: impl IntoIterator<Item = Assertion>) -> Assertion {
        let mut parts: Vec<Assertion> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Assertion::tt();
        };
        while let Some(part) = parts.pop() {
            acc = Assertion::star(part, acc);
        }
        acc
    }

    pub fn exists_value(
        domain: impl IntoIterator<Item = Value>,
        body: impl Fn(&Value) -> Assertion + 'static,
    ) -> Assertion {
        Assertion::ExistsValue {
            domain: domain.into_iter().collect(),
            body: Rc::new(body),
        }
    }

    pub fn exists_place(body: impl Fn(&Place) -> Assertion + 'static) -> Assertion {
        Assertion::ExistsPlace {
            domain: PlaceDomain::HeapPlacesPlusFresh,
            body: Rc::new(body),
        }
    }

    pub fn exists_place_in(
        domain: impl IntoIterator<Item = Place>,
        body: impl Fn(&Place) -> Assertion + 'static,
    ) -> Assertion {
        Assertion::ExistsPlace {
            domain: PlaceDomain::Explicit(domain.into_iter().collect()),
            body: Rc::new(body),
        }
    }
}

impl fmt::Debug for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Bool(b) => write!(f, "{b}"),
            Assertion::Atom(c) => write!(f, "{c}"),
            Assertion::Star(l, r) => write!(f, "({l:?} \u{22c6} {r:?})"),
            Assertion::ExistsValue { domain, .. } => {
                write!(f, "\u{2203}v\u{2208}{{..{}}}. _", domain.len())
            }
            Assertion::ExistsPlace { .. } => write!(f, "\u{2203}t. _"),
        }
    }
}

struct SearchCtx<'a> {
    typing: &'a Typing,
    place_pool: Vec<Place>,
    fuel: usize,
    budget: usize,
}

impl SearchCtx<'_> {
    fn spend(&mut self) -> Result<(), IoslError> {
        if self.fuel == 0 {
            return Err(IoslError::BudgetExceeded {
                budget: self.budget,
            });
        }
        self.fuel -= 1;
        Ok(())
    }
}

/// The sub-multisets of `h` that support `phi`. Soundness: every returned
/// heap satisfies `phi`. Completeness: any sub-multiset of `h` satisfying
/// `phi` contains a returned one, which together with monotonicity makes
/// `h` satisfy `phi` exactly when the result is non-empty.
fn usages(h: &Heap, phi: &Assertion, ctx: &mut SearchCtx) -> Result<BTreeSet<Heap>, IoslError> {
    ctx.spend()?;
    match phi {
        Assertion::Bool(true) => Ok(BTreeSet::from([Heap::new()])),
        Assertion::Bool(false) => Ok(BTreeSet::new()),
        Assertion::Atom(c) => {
            if h.contains(c) && c.is_well_typed(ctx.typing) {
                Ok(BTreeSet::from([Heap::from_chunks([c.clone()])]))
            } else {
                Ok(BTreeSet::new())
            }
        }
        Assertion::Star(lhs, rhs) => {
            let mut out = BTreeSet::new();
            for left in usages(h, lhs, ctx)? {
                let rest = h.minus(&left);
                for right in usages(&rest, rhs, ctx)? {
                    out.insert(left.sum(&right));
                }
            }
            Ok(out)
        }
        Assertion::ExistsValue { domain, body } => {
            let mut out = BTreeSet::new();
            for v in domain {
                out.extend(usages(h, &body(v), ctx)?);
            }
            Ok(out)
        }
        Assertion::ExistsPlace { domain, body } => {
            let mut out = BTreeSet::new();
            match domain {
                PlaceDomain::Explicit(places) => {
                    for t in places {
                        out.extend(usages(h, &body(t), ctx)?);
                    }
                }
                PlaceDomain::HeapPlacesPlusFresh => {
                    let pool = ctx.place_pool.clone();
                    for t in &pool {
                        out.extend(usages(h, &body(t), ctx)?);
                    }
                }
            }
            Ok(out)
        }
    }
}

/// A place not mentioned by the heap: one step right of its rightmost place.
fn fresh_place(h: &Heap) -> Place {
    let deepest = h.places().into_iter().max().unwrap_or_default();
    deepest.child(super::heap::Dir::R)
}

/// Whether `h` satisfies `phi`, searching at most `budget` assertion nodes.
pub fn assert_sat(
    h: &Heap,
    phi: &Assertion,
    typing: &Typing,
    budget: usize,
) -> Result<bool, IoslError> {
    let mut pool: Vec<Place> = h.places().into_iter().collect();
    pool.push(fresh_place(h));
    let mut ctx = SearchCtx {
        typing,
        place_pool: pool,
        fuel: budget,
        budget,
    };
    Ok(!usages(h, phi, &mut ctx)?.is_empty())
}

/// The assertion carving out the permission structure of `p` rooted at
/// token place `t`: inactive processes claim nothing, a prefix claims one
/// permission for some well-typed input plus the continuation's claim from
/// the permission's target, and a choice claims both branches separately.
pub fn emb(p: &Process, t: &Place, typing: &Typing) -> Assertion {
    emb_rc(p, t, &Rc::new(typing.clone()))
}

fn emb_rc(p: &Process, t: &Place, typing: &Rc<Typing>) -> Assertion {
    match p {
        Process::Inactive => Assertion::tt(),
        Process::Prefix { bio, output, cont } => {
            let inputs: Vec<Value> = typing
                .inputs(bio, output)
                .map(|ws| ws.iter().cloned().collect())
                .unwrap_or_default();
            let bio = bio.clone();
            let output = output.clone();
            let cont = cont.clone();
            let typing = typing.clone();
            let source = t.clone();
            Assertion::exists_value(inputs, move |w| {
                let chunk_bio = bio.clone();
                let chunk_out = output.clone();
                let chunk_in = w.clone();
                let source = source.clone();
                let next = cont(w);
                let typing = typing.clone();
                Assertion::exists_place(move |t_next| {
                    Assertion::star(
                        Assertion::atom(Chunk::perm(
                            chunk_bio.clone(),
                            source.clone(),
                            chunk_out.clone(),
                            chunk_in.clone(),
                            t_next.clone(),
                        )),
                        emb_rc(&next, t_next, &typing),
                    )
                })
            })
        }
        Process::Choice(lhs, rhs) => {
            Assertion::star(emb_rc(lhs, t, typing), emb_rc(rhs, t, typing))
        }
    }
}

/// `emb` closed under the token: some place holds the token and anchors the
/// process's permission structure.
pub fn emb_tok(p: &Process, typing: &Typing) -> Assertion {
    let p = p.clone();
    let typing_rc = Rc::new(typing.clone());
    Assertion::exists_place(move |t| {
        Assertion::star(
            Assertion::atom(Chunk::token(t.clone())),
            emb_rc(&p, t, &typing_rc),
        )
    })
}
