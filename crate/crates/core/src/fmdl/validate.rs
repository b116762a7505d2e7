//! Static checks over a parsed world.

use std::collections::HashSet;

use super::{Diagnostic, ParsedWorld, SourceSpan};
use crate::expr::Expression;
use crate::model::{Action, FrameDef, FrameKind, WorldBuilder, BUILTIN_FUNCTIONS, PARENT_SLOT};

/// Errors for unknown parents, inheritance cycles, mistyped defaults and
/// constraints over undeclared slots; warnings for rule references to slots
/// declared nowhere on the static chain and for undeclared functions.
pub fn validate(parsed: &ParsedWorld) -> Vec<Diagnostic> {
    let b = &parsed.builder;
    let spans = &parsed.spans;
    let mut out = Vec::new();
    let frame_span = |name: &str| spans.frames.get(name).cloned().unwrap_or_else(|| fallback_span());

    for f in b.frames() {
        if let Some(p) = &f.parent {
            if b.frame(p).is_none() {
                let span = spans.parents.get(&f.name).cloned().unwrap_or_else(|| frame_span(&f.name));
                out.push(Diagnostic::error(span, "UnknownParent", format!("frame `{}` has unknown parent `{p}`", f.name)));
            }
        }
    }

    let mut in_cycle: HashSet<String> = HashSet::new();
    for f in b.frames() {
        if in_cycle.contains(&f.name) {
            continue;
        }
        let mut path = vec![f.name.clone()];
        let mut cur = f;
        while let Some(p) = cur.parent.as_ref().and_then(|p| b.frame(p)) {
            if let Some(i) = path.iter().position(|x| *x == p.name) {
                let cycle = path[i..].to_vec();
                if cycle[0] == f.name {
                    out.push(Diagnostic::error(
                        frame_span(&f.name),
                        "InheritanceCycle",
                        format!("inheritance cycle: {}", cycle.join(" -> ")),
                    ));
                    in_cycle.extend(cycle);
                }
                break;
            }
            path.push(p.name.clone());
            cur = p;
        }
    }

    for f in b.frames() {
        for s in f.slots.values() {
            if let Some(d) = &s.default {
                if !d.conforms_to(s.kind) {
                    let key = (f.name.clone(), s.name.clone());
                    let span = spans.defaults.get(&key).or_else(|| spans.slots.get(&key)).cloned().unwrap_or_else(|| frame_span(&f.name));
                    out.push(Diagnostic::error(
                        span,
                        "DefaultTypeMismatch",
                        format!("default of {}.{} is {}, expected {}", f.name, s.name, d.kind(), s.kind),
                    ));
                }
            }
        }

        let declared = static_slot_names(b, f, &in_cycle);
        for (i, c) in f.constraints.iter().enumerate() {
            let span = spans.constraints.get(&(f.name.clone(), i)).cloned().unwrap_or_else(|| frame_span(&f.name));
            if let Some(declared) = &declared {
                for name in c.unqualified_slots() {
                    if !declared.contains(name) {
                        out.push(Diagnostic::error(
                            span.clone(),
                            "UnknownSlotInConstraint",
                            format!("constraint in frame `{}` references undeclared slot `{name}`", f.name),
                        ));
                    }
                }
            }
            check_calls(b, c, &span, &mut out);
        }

        for (i, a) in f.actions.iter().enumerate() {
            let span = spans.actions.get(&(f.name.clone(), i)).cloned().unwrap_or_else(|| frame_span(&f.name));
            let mut names: Vec<&str> = vec![a.slot.as_str()];
            let mut exprs: Vec<&Expression> = Vec::new();
            match &a.action {
                Action::BackwardRule(r) | Action::ForwardRule(r) => {
                    exprs.extend(r.condition.iter());
                    for (slot, e) in &r.assignments {
                        names.push(slot);
                        exprs.push(e);
                    }
                }
                Action::ExternalCall { args, .. } => exprs.extend(args.iter()),
                Action::QueryValue(q) => exprs.extend(q.predicate.iter().map(|(_, _, e)| e)),
                Action::AskUser { .. } | Action::Specialize { .. } => {}
            }
            for e in &exprs {
                names.extend(e.unqualified_slots());
                check_calls(b, e, &span, &mut out);
            }
            if let Some(declared) = &declared {
                let mut seen = HashSet::new();
                for n in names {
                    if !declared.contains(n) && seen.insert(n) {
                        out.push(Diagnostic::warning(
                            span.clone(),
                            "UnknownSlotRef",
                            format!("slot `{n}` is not declared on the static chain of `{}`", f.name),
                        ));
                    }
                }
            }
        }
    }
    out
}

fn fallback_span() -> SourceSpan {
    SourceSpan { file: String::new(), line: 1, column: 1, length: 0 }
}

fn check_calls(b: &WorldBuilder, e: &Expression, span: &SourceSpan, out: &mut Vec<Diagnostic>) {
    e.walk(&mut |node| {
        let Expression::Call { name, args } = node else { return };
        if BUILTIN_FUNCTIONS.contains(&name.as_str()) {
            return;
        }
        match b.externs().find(|(n, _)| n == name) {
            Some((_, arity)) if arity != args.len() => out.push(Diagnostic::error(
                span.clone(),
                "ExternArityMismatch",
                format!("`{name}` takes {arity} arguments, called with {}", args.len()),
            )),
            Some(_) => {}
            None => out.push(Diagnostic::warning(
                span.clone(),
                "UnknownFunction",
                format!("function `{name}` is not declared"),
            )),
        }
    });
}

/// Slot names declared on the static chain of `f`, or `None` when the chain
/// is incomplete or leaves the local world.
fn static_slot_names<'a>(b: &'a WorldBuilder, f: &'a FrameDef, in_cycle: &HashSet<String>) -> Option<HashSet<&'a str>> {
    if in_cycle.contains(&f.name) {
        return None;
    }
    let mut names: HashSet<&str> = HashSet::from([PARENT_SLOT]);
    let mut cur = Some(f);
    let mut steps = 0;
    while let Some(frame) = cur {
        if !matches!(frame.kind, FrameKind::Local) || steps > 10_000 {
            return None;
        }
        names.extend(frame.slots.keys().map(String::as_str));
        cur = match &frame.parent {
            Some(p) => Some(b.frame(p)?),
            None => None,
        };
        steps += 1;
    }
    Some(names)
}
