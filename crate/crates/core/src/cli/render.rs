//! Renders a guarded component as its I/O specification: the assertion a
//! verified implementation of the component must satisfy.
//!
//! The specification has the form `φ(par) = ∃t. token(t) ⋆ P(t, par, s₀)`
//! with a co-recursive predicate `P` carrying one conjunct per event
//! family: universally iterated over the guarded output values, one
//! permission atom for the family's I/O operation, and a recursive call at
//! the operation's target place with the updated state. The rendering
//! shows a single unfolding of `P` with the state left symbolic, so it is
//! deterministic and independent of the component's reachable state space.

use crate::process::guarded::{EventRender, IoEvent, IoGuardedEs};
use crate::value::Value;

/// Renders one unfolding of the component's specification predicate.
/// `params` is the parameter tuple text, e.g. `"(i, a)"`.
pub fn dump_iospec<S: Ord + Clone + std::fmt::Debug + 'static>(ges: &IoGuardedEs<S>, params: &str) -> String {
    let mut out = format!("φ{params} = ∃t. token(t) ⋆ P(t, {params}, s₀)\n\n");
    if ges.events().is_empty() {
        out.push_str(&format!("P(t, {params}, s) = true\n"));
        return out;
    }
    out.push_str(&format!("P(t, {params}, s) =\n"));
    let conjuncts: Vec<String> = ges
        .events()
        .iter()
        .map(|ev| conjunct(&resolve(ges, ev), params))
        .collect();
    out.push_str("    ");
    out.push_str(&conjuncts.join("\n  ⋆ "));
    out.push('\n');
    out
}

/// The rendering hints for a family: the authored ones, or hints
/// synthesized from the family's shape with opaque guard and update names.
/// Either way the operation name defaults to the family name.
fn resolve<S: Ord + Clone + std::fmt::Debug + 'static>(ges: &IoGuardedEs<S>, ev: &IoEvent<S>) -> EventRender {
    let mut r = ev.render.clone().unwrap_or_else(|| synthesize(ges, ev));
    if r.op.is_none() {
        r.op = Some(ev.bio.clone());
    }
    r
}

fn synthesize<S: Ord + Clone + std::fmt::Debug + 'static>(ges: &IoGuardedEs<S>, ev: &IoEvent<S>) -> EventRender {
    let out_var = (ev.outputs.len() > 1 || ev.outputs != [Value::Unit]).then_some("v");
    let in_var = ges
        .typing()
        .inputs(&ev.bio, &ev.outputs[0])
        .is_some_and(|dom| dom.iter().any(|w| *w != Value::Unit))
        .then_some("w");
    let args = match (out_var, in_var) {
        (Some(v), Some(w)) => format!("{v}, {w}"),
        (Some(v), None) => v.to_string(),
        (None, Some(w)) => w.to_string(),
        (None, None) => String::new(),
    };
    EventRender {
        binders: out_var.map(str::to_string).into_iter().collect(),
        guard: Some(match out_var {
            Some(v) => format!("en_{}(s, {v})", ev.bio),
            None => format!("en_{}(s)", ev.bio),
        }),
        args,
        update: format!(
            "next_{}(s{})",
            ev.bio,
            [out_var, in_var]
                .iter()
                .flatten()
                .map(|x| format!(", {x}"))
                .collect::<String>()
        ),
        op: None,
        input: in_var.map(str::to_string),
    }
}

fn conjunct(r: &EventRender, params: &str) -> String {
    let op = r.op.clone().expect("resolve fills the operation name");
    let exists = match &r.input {
        Some(w) => format!("∃{w}, t′."),
        None => "∃t′.".to_string(),
    };
    let atom_args = if r.args.is_empty() {
        "t, t′".to_string()
    } else {
        format!("t, {}, t′", r.args)
    };
    let body = format!("{exists} {op}({atom_args}) ⋆ P(t′, {params}, {})", r.update);
    let guarded = match &r.guard {
        Some(g) => format!("if {g} then {body} else true"),
        None => body,
    };
    if r.binders.is_empty() {
        format!("({guarded})")
    } else {
        format!("(∀⋆ {}. {guarded})", r.binders.join(", "))
    }
}
