//! Canonical FMDL rendering.

use std::fmt::Write;

use crate::expr::quote;
use crate::model::{Action, Direction, FrameDef, FrameKind, FrameWorld, WorldBuilder};

pub fn pretty_print(world: &FrameWorld) -> String {
    render(world.externs(), world.frames())
}

pub fn pretty_print_builder(builder: &WorldBuilder) -> String {
    render(builder.externs(), builder.frames())
}

fn render<'a>(externs: impl Iterator<Item = (&'a str, usize)>, frames: impl Iterator<Item = &'a FrameDef>) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let externs: Vec<String> = externs.map(|(n, a)| format!("extern function {n}/{a};\n")).collect();
    if !externs.is_empty() {
        blocks.push(externs.concat());
    }
    blocks.extend(frames.map(frame));
    blocks.join("\n")
}

fn parent_suffix(f: &FrameDef) -> String {
    f.parent.as_ref().map(|p| format!(" : {p}")).unwrap_or_default()
}

fn frame(f: &FrameDef) -> String {
    match &f.kind {
        FrameKind::RemoteStub { url } => return format!("remote frame {}{} at {};\n", f.name, parent_suffix(f), quote(url)),
        FrameKind::ExternalObject => return format!("extern frame {}{};\n", f.name, parent_suffix(f)),
        FrameKind::Frameset { table, key } => {
            let parent = f.parent.as_ref().map(|p| format!(" parent {p}")).unwrap_or_default();
            return format!("frameset {} from table {} key {key}{parent};\n", f.name, quote(table));
        }
        FrameKind::Local => {}
    }
    let mut members: Vec<String> = Vec::new();
    for s in f.slots.values() {
        let mut line = format!("slot {}: {}", s.name, s.kind);
        if let Some(d) = &s.default {
            write!(line, " default {d}").unwrap();
        }
        line.push(';');
        members.push(line);
    }
    for c in &f.constraints {
        members.push(format!("constraint {c};"));
    }
    for a in &f.actions {
        members.push(match &a.action {
            Action::AskUser { prompt } => format!("ask {}: {};", a.slot, quote(prompt)),
            other => {
                let rule = other.as_rule(&a.slot).expect("non-ask actions have a rule form");
                match rule.direction {
                    Direction::Backward => {
                        let mut line = format!("{} := {}", a.slot, rule.assignments[0].1);
                        if let Some(c) = &rule.condition {
                            write!(line, " if {c}").unwrap();
                        }
                        line.push(';');
                        line
                    }
                    Direction::Forward => {
                        let mut line = format!("on {}", a.slot);
                        if let Some(c) = &rule.condition {
                            write!(line, " if {c}").unwrap();
                        }
                        line.push_str(" {");
                        for (slot, e) in &rule.assignments {
                            write!(line, " {slot} := {e};").unwrap();
                        }
                        line.push_str(" }");
                        line
                    }
                }
            }
        });
    }
    if let Some(url) = &f.rules_from {
        members.push(format!("rules from {};", quote(url)));
    }
    let mut out = format!("frame {}{} {{", f.name, parent_suffix(f));
    if members.is_empty() {
        out.push_str("}\n");
        return out;
    }
    out.push('\n');
    for m in members {
        writeln!(out, "  {m}").unwrap();
    }
    out.push_str("}\n");
    out
}
