//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::HashMap;
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use framekit_core::datasources::CmpOp;
use framekit_core::fmdl::{compile, pretty_print};
use framekit_core::inference::{select_actions, ConflictResolver, FirstApplicable, FireFirst, MostComplexFirst, TraceKind};
use framekit_core::interchange::{snapshot_from_xml, snapshot_to_xml, world_from_xml, world_to_xml};
use framekit_core::load::load_world;
use framekit_core::model::QuerySpec;
use framekit_core::{
    Action, BinaryOp, Engine, Expression, FrameDef, FrameKind, FrameWorld, InferenceError, InferenceSession, ListValue,
    Outcome, Question, Rule, ScalarKind, SlotDef, UnaryOp, Value, ValueKind, WorldBuilder,
};
use framekit_net::{Cluster, Node, Server};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const PROPTEST_CASES: u32 = 256;
const ORACLE_WORLDS: usize = 120;
const F4_DEADLINE: Duration = Duration::from_secs(1);
const CASCADE_LIMIT: usize = 100;
const TABLE_ROWS: usize = 100;
const MAX_ROWS_READ: u64 = 4;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

macro_rules! ensure_eq {
    ($got:expr, $want:expr, $($msg:tt)+) => {
        match (&$got, &$want) {
            (got, want) => {
                if got != want {
                    return Err(format!("{}: got {:?}, want {:?}", format!($($msg)+), got, want));
                }
            }
        }
    };
}

fn fixtures_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join(name)).unwrap()
}

fn world(src: &str) -> FrameWorld {
    let (b, _) = compile("acceptance.fmdl", src).unwrap_or_else(|d| panic!("{d:?}"));
    b.freeze().unwrap()
}

fn engine(src: &str) -> Arc<Engine> {
    Arc::new(Engine::new(world(src)))
}

fn int(i: i64) -> Outcome {
    Outcome::Resolved(Value::Integer(i))
}

fn boolean(b: bool) -> Outcome {
    Outcome::Resolved(Value::Boolean(b))
}

fn text(s: &str) -> Outcome {
    Outcome::Resolved(Value::String(s.into()))
}

fn reference(s: &str) -> Outcome {
    Outcome::Resolved(Value::Reference(s.into()))
}

// Random worlds covering every frame kind and action kind.

const NAMES: [&str; 6] = ["Alpha", "Beta", "Gamma", "Delta", "Eps", "Zeta"];
const SLOT_NAMES: [&str; 5] = ["s0", "s1", "s2", "s3", "s4"];
const TEXTS: [&str; 5] = ["", "plain", "a \"q\" \\ b", "<&>'", "größe ✓"];

fn random_kind(rng: &mut StdRng) -> ValueKind {
    match rng.gen_range(0..7) {
        0 | 1 => ValueKind::Integer,
        2 => ValueKind::Boolean,
        3 => ValueKind::String,
        4 => ValueKind::Reference,
        5 => ValueKind::List(ScalarKind::Integer),
        _ => ValueKind::List(ScalarKind::String),
    }
}

fn random_value(rng: &mut StdRng, kind: ValueKind) -> Value {
    match kind {
        ValueKind::Integer => Value::Integer(rng.gen_range(-1000..1000)),
        ValueKind::Boolean => Value::Boolean(rng.gen()),
        ValueKind::String => Value::String(TEXTS[rng.gen_range(0..TEXTS.len())].into()),
        ValueKind::Reference => Value::Reference(NAMES[rng.gen_range(0..NAMES.len())].into()),
        ValueKind::List(ScalarKind::Integer) => {
            Value::List(ListValue::Integer((0..rng.gen_range(0..3)).map(|_| rng.gen_range(-5..5)).collect()))
        }
        ValueKind::List(_) => Value::List(ListValue::String(
            (0..rng.gen_range(0..3)).map(|_| TEXTS[rng.gen_range(0..TEXTS.len())].to_string()).collect(),
        )),
        ValueKind::Unknown => Value::Unknown,
    }
}

fn random_expr(rng: &mut StdRng, slots: &[String], depth: u32) -> Expression {
    if depth == 0 || rng.gen_bool(0.35) {
        return match rng.gen_range(0..6) {
            0 if !slots.is_empty() => Expression::slot(&slots[rng.gen_range(0..slots.len())]),
            1 => Expression::qualified(NAMES[rng.gen_range(0..NAMES.len())], SLOT_NAMES[rng.gen_range(0..5)]),
            2 => Expression::Literal(Value::Unknown),
            3 => Expression::lit(TEXTS[rng.gen_range(0..TEXTS.len())]),
            4 => Expression::lit(rng.gen::<bool>()),
            _ => Expression::lit(rng.gen_range(-50i64..50)),
        };
    }
    let ops = [
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::In,
    ];
    match rng.gen_range(0..10) {
        0 => Expression::unary(UnaryOp::Not, random_expr(rng, slots, depth - 1)),
        1 => Expression::unary(UnaryOp::Neg, random_expr(rng, slots, depth - 1)),
        2 => Expression::List((0..rng.gen_range(0..3)).map(|_| random_expr(rng, slots, 0)).collect()),
        3 => Expression::Exists {
            var: "c".into(),
            root: NAMES[rng.gen_range(0..NAMES.len())].into(),
            condition: Box::new(random_expr(rng, slots, depth - 1)),
        },
        4 => Expression::Call { name: "f".into(), args: vec![random_expr(rng, slots, depth - 1)] },
        _ => Expression::binary(
            ops[rng.gen_range(0..ops.len())],
            random_expr(rng, slots, depth - 1),
            random_expr(rng, slots, depth - 1),
        ),
    }
}

fn random_world(seed: u64) -> FrameWorld {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut b = WorldBuilder::new();
    b.declare_extern("f", 1).unwrap();
    let n = rng.gen_range(1..=6);
    for (i, name) in NAMES.iter().enumerate().take(n) {
        let mut f = FrameDef::new(name);
        if i > 0 && rng.gen_bool(0.6) {
            f.parent = Some(NAMES[rng.gen_range(0..i)].into());
        }
        match rng.gen_range(0..12) {
            0 => f.kind = FrameKind::RemoteStub { url: format!("kb://127.0.0.1:{}/{name}", 7000 + i) },
            1 => f.kind = FrameKind::ExternalObject,
            2 if f.parent.is_some() => f.kind = FrameKind::Frameset { table: format!("{name}.csv"), key: "id".into() },
            _ => {}
        }
        if f.kind != FrameKind::Local {
            b.add_frame(f).unwrap();
            continue;
        }
        let mut slots: Vec<String> = Vec::new();
        for s in SLOT_NAMES.iter().take(rng.gen_range(0..=5)) {
            let kind = random_kind(&mut rng);
            let mut def = SlotDef::new(s, kind);
            if rng.gen_bool(0.4) {
                def = def.with_default(random_value(&mut rng, kind));
            }
            f.add_slot(def).unwrap();
            slots.push(s.to_string());
        }
        if slots.is_empty() {
            b.add_frame(f).unwrap();
            continue;
        }
        for _ in 0..rng.gen_range(0..=4) {
            let target = slots[rng.gen_range(0..slots.len())].clone();
            let action = match rng.gen_range(0..8) {
                0 => Action::AskUser { prompt: TEXTS[rng.gen_range(0..TEXTS.len())].into() },
                1 => {
                    let sets: Vec<(String, Expression)> = (0..rng.gen_range(1..3))
                        .map(|_| (slots[rng.gen_range(0..slots.len())].clone(), random_expr(&mut rng, &slots, 2)))
                        .collect();
                    let cond = rng.gen_bool(0.5).then(|| random_expr(&mut rng, &slots, 2));
                    Action::ForwardRule(Rule::forward(&target, cond, sets))
                }
                2 => Action::Specialize { root: NAMES[rng.gen_range(0..n)].into() },
                3 => Action::ExternalCall { name: "f".into(), args: vec![random_expr(&mut rng, &slots, 1)] },
                4 => Action::QueryValue(QuerySpec {
                    table: "T".into(),
                    column: "c".into(),
                    predicate: rng.gen_bool(0.5).then(|| ("k".to_string(), CmpOp::Ge, Expression::lit(3i64))),
                }),
                _ => {
                    let cond = rng.gen_bool(0.5).then(|| random_expr(&mut rng, &slots, 2));
                    Action::BackwardRule(Rule::backward(&target, random_expr(&mut rng, &slots, 3), cond))
                }
            };
            f = f.action(&target, action);
        }
        if rng.gen_bool(0.3) {
            let s = &slots[rng.gen_range(0..slots.len())];
            f = f.constraint(Expression::binary(BinaryOp::Ne, Expression::slot(s), random_expr(&mut rng, &[], 1)));
        }
        if rng.gen_bool(0.1) {
            f.rules_from = Some(format!("kb://127.0.0.1:7100/{name}"));
        }
        b.add_frame(f).unwrap();
    }
    b.freeze().unwrap()
}

fn round_trips(name: &str, w: &FrameWorld) -> Result<(), String> {
    let xml = world_to_xml(w);
    let back = world_from_xml(&xml).map_err(|e| format!("{name}: {e}"))?;
    ensure!(&back == w, "{name}: xml round trip changed the world");
    ensure!(world_to_xml(&back) == xml, "{name}: xml not stable");
    let printed = pretty_print(w);
    let (b, _) = compile(name, &printed).map_err(|d| format!("{name}: {d:?}\n{printed}"))?;
    let again = b.freeze().map_err(|e| format!("{name}: {e}"))?;
    ensure!(&again == w, "{name}: parse(print(w)) != w\n{printed}");
    ensure!(pretty_print(&again) == printed, "{name}: print not idempotent");
    Ok(())
}

fn c1_round_trip() -> Check {
    let mut names: Vec<_> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "fmdl"))
        .collect();
    names.sort();
    ensure!(names.len() >= 20, "only {} fixtures", names.len());
    for p in &names {
        let name = p.file_name().unwrap().to_string_lossy();
        round_trips(&name, &world(&std::fs::read_to_string(p).unwrap()))?;
    }
    let mut runner = TestRunner::new(Config { cases: PROPTEST_CASES, failure_persistence: None, ..Config::default() });
    runner
        .run(&any::<u64>(), |seed| round_trips(&format!("seed {seed}"), &random_world(seed)).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())?;
    Ok(format!("{} fixtures, {PROPTEST_CASES} generated worlds", names.len()))
}

// Reference evaluator: per level, rules in declaration order, then the
// level's default, then the parent. Cycles give Unknown.

#[derive(Debug, Clone)]
enum Cond {
    Cmp(usize, char, i64),
    And(Box<Cond>, Box<Cond>),
}

#[derive(Debug, Clone)]
enum Val {
    Lit(i64),
    Add(usize, i64),
}

#[derive(Debug, Clone)]
struct RRule {
    target: usize,
    cond: Option<Cond>,
    value: Val,
}

#[derive(Debug, Clone)]
struct RFrame {
    parent: Option<usize>,
    defaults: Vec<Option<i64>>,
    rules: Vec<RRule>,
}

const OSLOTS: [&str; 3] = ["a", "b", "c"];

fn random_cond(rng: &mut StdRng, depth: usize) -> Cond {
    if depth < 1 && rng.gen_bool(0.3) {
        return Cond::And(Box::new(random_cond(rng, depth + 1)), Box::new(random_cond(rng, depth + 1)));
    }
    Cond::Cmp(rng.gen_range(0..3), ['>', '<', '='][rng.gen_range(0..3)], rng.gen_range(-2..6))
}

fn random_oracle_world(rng: &mut StdRng) -> Vec<RFrame> {
    let n = rng.gen_range(1..=4);
    let mut frames: Vec<RFrame> = (0..n)
        .map(|i| RFrame {
            parent: if i > 0 && rng.gen_bool(0.7) { Some(rng.gen_range(0..i)) } else { None },
            defaults: (0..3).map(|_| rng.gen_bool(0.3).then(|| rng.gen_range(0..5))).collect(),
            rules: Vec::new(),
        })
        .collect();
    for _ in 0..rng.gen_range(0..=6) {
        let f = rng.gen_range(0..n);
        let rule = RRule {
            target: rng.gen_range(0..3),
            cond: rng.gen_bool(0.6).then(|| random_cond(rng, 0)),
            value: if rng.gen_bool(0.5) {
                Val::Lit(rng.gen_range(0..5))
            } else {
                Val::Add(rng.gen_range(0..3), rng.gen_range(-1..3))
            },
        };
        frames[f].rules.push(rule);
    }
    frames
}

fn cond_src(c: &Cond) -> String {
    match c {
        Cond::Cmp(s, op, k) => format!("{} {op} {k}", OSLOTS[*s]),
        Cond::And(l, r) => format!("({}) and ({})", cond_src(l), cond_src(r)),
    }
}

fn oracle_fmdl(frames: &[RFrame]) -> String {
    let mut out = String::new();
    for (i, f) in frames.iter().enumerate() {
        out += &format!("frame F{i}");
        if let Some(p) = f.parent {
            out += &format!(" : F{p}");
        }
        out += " {\n";
        for (s, d) in f.defaults.iter().enumerate() {
            match (d, f.parent) {
                (Some(d), _) => out += &format!("  slot {}: integer default {d};\n", OSLOTS[s]),
                (None, None) => out += &format!("  slot {}: integer;\n", OSLOTS[s]),
                (None, Some(_)) => {}
            }
        }
        for r in &f.rules {
            let value = match r.value {
                Val::Lit(k) => k.to_string(),
                Val::Add(s, k) => format!("{} + {k}", OSLOTS[s]),
            };
            out += &format!("  {} := {value}", OSLOTS[r.target]);
            if let Some(c) = &r.cond {
                out += &format!(" if {}", cond_src(c));
            }
            out += ";\n";
        }
        out += "}\n";
    }
    out
}

struct Oracle<'a> {
    frames: &'a [RFrame],
    memo: HashMap<(usize, usize), i64>,
    stack: Vec<(usize, usize)>,
}

impl<'a> Oracle<'a> {
    fn new(frames: &'a [RFrame]) -> Self {
        Oracle { frames, memo: HashMap::new(), stack: Vec::new() }
    }

    fn infer(&mut self, origin: usize, slot: usize) -> Option<i64> {
        if let Some(v) = self.memo.get(&(origin, slot)) {
            return Some(*v);
        }
        if self.stack.contains(&(origin, slot)) {
            return None;
        }
        self.stack.push((origin, slot));
        let r = self.levels(origin, slot);
        self.stack.pop();
        r
    }

    fn levels(&mut self, origin: usize, slot: usize) -> Option<i64> {
        let mut level = Some(origin);
        while let Some(l) = level {
            let frame = &self.frames[l];
            for rule in frame.rules.iter().filter(|r| r.target == slot) {
                if let Some(c) = &rule.cond {
                    if self.cond(origin, c) != Some(true) {
                        continue;
                    }
                }
                let v = match rule.value {
                    Val::Lit(k) => Some(k),
                    Val::Add(s, k) => self.infer(origin, s).map(|v| v + k),
                };
                if let Some(v) = v {
                    self.memo.insert((origin, slot), v);
                    return Some(v);
                }
            }
            if let Some(d) = frame.defaults[slot] {
                self.memo.insert((origin, slot), d);
                return Some(d);
            }
            level = frame.parent;
        }
        None
    }

    fn cond(&mut self, origin: usize, c: &Cond) -> Option<bool> {
        match c {
            Cond::Cmp(s, op, k) => self.infer(origin, *s).map(|v| match op {
                '>' => v > *k,
                '<' => v < *k,
                _ => v == *k,
            }),
            Cond::And(l, r) => {
                let lb = self.cond(origin, l);
                if lb == Some(false) {
                    return Some(false);
                }
                match (lb, self.cond(origin, r)) {
                    (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                }
            }
        }
    }
}

const F1_BOX_GOLDEN: &str = "   1 goal_pushed    Box.big
   2 rule_tried     Box.big @Thing #0 (backward_rule)
   3 goal_pushed    Box.size
   4 value_assigned Box.size = 3 (default)
   5 rule_skipped   Box.big @Thing #0 (condition false)
   6 rule_tried     Box.big @Thing #1 (backward_rule)
   7 rule_fired     Box.big @Thing #1 = false
   8 value_assigned Box.big = false (rule)";

const F1_THING_GOLDEN: &str = "   1 goal_pushed    Thing.big
   2 rule_tried     Thing.big #0 (backward_rule)
   3 goal_pushed    Thing.size
   4 rule_tried     Thing.size #2 (ask_user)
   5 question       Thing.size (Enter size)
   6 answer         Thing.size = 12
   7 value_assigned Thing.size = 12 (answer)
   8 goal_pushed    Thing.big
   9 rule_tried     Thing.big #0 (backward_rule)
  10 rule_fired     Thing.big #0 = true
  11 value_assigned Thing.big = true (rule)";

fn rendered(s: &InferenceSession) -> String {
    s.trace().iter().map(|t| t.to_string()).collect::<Vec<_>>().join("\n")
}

fn c2_semantics() -> Check {
    let f1 = engine(&fixture("f1.fmdl"));
    ensure_eq!(f1.session().infer("Box", "big").unwrap(), boolean(false), "F1 Box.big");
    ensure_eq!(f1.session().infer("Crate", "big").unwrap(), boolean(true), "F1 Crate.big");
    let mut s = f1.session();
    let q = s.infer("Thing", "big").unwrap().question().cloned().ok_or("F1 Thing.big asked nothing")?;
    ensure_eq!(s.answer(&q.id, Value::Integer(12)).unwrap(), boolean(true), "F1 Thing.big after 12");
    ensure_eq!(rendered(&s), F1_THING_GOLDEN, "F1 Thing golden trace");
    let mut s = f1.session();
    s.infer("Box", "big").unwrap();
    ensure_eq!(rendered(&s), F1_BOX_GOLDEN, "F1 Box golden trace");

    let f2 = engine(&fixture("f2.fmdl"));
    ensure_eq!(f2.session().infer("P", "x").unwrap(), int(5), "F2 P.x");

    let f3 = engine(&fixture("f3.fmdl"));
    let mut s = f3.session();
    s.assign("S", "speed", Value::Integer(120)).unwrap();
    ensure_eq!(s.infer("S", "alert").unwrap(), boolean(true), "F3 alert after 120");
    let mut s = f3.session();
    s.assign("S", "speed", Value::Integer(50)).unwrap();
    ensure_eq!(s.infer("S", "alert").unwrap(), boolean(false), "F3 alert after 50");

    let f4 = engine(&fixture("f4.fmdl"));
    ensure_eq!(f4.session().infer("C", "p").unwrap(), Outcome::Unknown, "F4 C.p");

    let f7 = engine(&fixture("f7.fmdl"));
    let mut s = f7.session();
    ensure_eq!(s.infer("Obs", "kind").unwrap(), text("bike"), "F7 Obs.kind");
    ensure_eq!(s.value("Obs", "parent").cloned(), Some(Value::Reference("Bike".into())), "F7 Obs.parent");

    let animal = engine(&format!(
        "{}\nframe Zoo7 {{ slot seven: reference; seven := exists c in Animal where c.legs = 7; }}",
        fixture("animal.fmdl")
    ));
    ensure_eq!(animal.session().infer("Zoo", "two").unwrap(), reference("Bird"), "Animal Zoo.two");
    ensure_eq!(animal.session().infer("Zoo7", "seven").unwrap(), Outcome::Unknown, "Animal Zoo7.seven");

    let mut rng = StdRng::seed_from_u64(0xacce97);
    let mut goals = 0;
    for _ in 0..ORACLE_WORLDS {
        let frames = random_oracle_world(&mut rng);
        let src = oracle_fmdl(&frames);
        let e = engine(&src);
        let mut shared = e.session();
        let mut shared_oracle = Oracle::new(&frames);
        for f in 0..frames.len() {
            for (s, name) in OSLOTS.iter().enumerate() {
                let frame = format!("F{f}");
                let want = Oracle::new(&frames).infer(f, s).map_or(Outcome::Unknown, int);
                ensure_eq!(e.session().infer(&frame, name).unwrap(), want, "{frame}.{name} in\n{src}");
                let want = shared_oracle.infer(f, s).map_or(Outcome::Unknown, int);
                ensure_eq!(shared.infer(&frame, name).unwrap(), want, "shared {frame}.{name} in\n{src}");
                goals += 1;
            }
        }
    }
    Ok(format!("F1-F4, F7, Animal, 2 golden traces, {ORACLE_WORLDS} oracle worlds ({goals} goals)"))
}

fn c3_polymorphism() -> Check {
    let src = fixture("f1_split.fmdl");
    let w = world(&src);
    // Box overrides size with 30; rules live on Thing.
    let (size, big, scaled) = (30, 30 > 10, 30 * 10);
    let local = Arc::new(Engine::new(w.clone()));
    ensure_eq!(local.session().infer("Box", "big").unwrap(), boolean(big), "local Box.big");
    ensure_eq!(local.session().infer("Box", "scaled").unwrap(), int(scaled), "local Box.scaled");
    ensure_eq!(local.session().infer("Box", "size").unwrap(), int(size), "local Box.size");
    let cluster = Cluster::start(&w, &[0, 1], 2).map_err(|e| e.to_string())?;
    let b = cluster.node_of("Box");
    ensure_eq!(b.session().infer("Box", "big").unwrap(), boolean(big), "remote Box.big");
    ensure_eq!(b.session().infer("Box", "scaled").unwrap(), int(scaled), "remote Box.scaled");
    ensure_eq!(b.session().infer("Thing", "big").unwrap(), boolean(false), "remote Thing.big");
    Ok("Box.big and Box.scaled equal locally and with Thing remote".into())
}

fn show_question(q: &Question) -> String {
    format!("question {} {}.{} {:?} {} {:?} {:?}", q.id, q.frame, q.slot, q.prompt, q.kind, q.choices, q.violations)
}

fn transcript(mut s: InferenceSession, frame: &str, slot: &str, answers: &[i64]) -> Vec<String> {
    let mut out = Vec::new();
    let mut answers = answers.iter();
    let mut step = s.infer(frame, slot);
    loop {
        let q = match step {
            Ok(Outcome::Suspended(q)) => q,
            Err(InferenceError::ConstraintViolation { violations, question: Some(q) }) => {
                out.push(format!("violation {violations:?}"));
                *q
            }
            Ok(o) => {
                out.push(o.to_string());
                break;
            }
            Err(e) => {
                out.push(format!("error {e}"));
                break;
            }
        };
        out.push(show_question(&q));
        match answers.next() {
            Some(a) => step = s.answer(&q.id, Value::Integer(*a)),
            None => break,
        }
    }
    out
}

type Script = &'static [(&'static str, &'static str, &'static [i64])];

const F1_SCRIPT: Script = &[
    ("Box", "big", &[]),
    ("Crate", "big", &[]),
    ("Thing", "big", &[12]),
    ("Thing", "big", &[4]),
    ("Box", "size", &[]),
    ("Thing", "size", &[7]),
];

const F7_SCRIPT: Script = &[
    ("Obs", "kind", &[]),
    ("Obs", "parent", &[]),
    ("Bike", "wheels", &[3, 2]),
    ("Car", "kind", &[]),
    ("Bike", "kind", &[]),
    ("Vehicle", "kind", &[]),
    ("Car", "wheels", &[2, 4]),
];

fn assignments(frames: usize, instances: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..frames {
        out = out.into_iter().flat_map(|a| (0..instances).map(move |i| [a.clone(), vec![i]].concat())).collect();
    }
    out
}

fn transparent(src: &str, script: Script, hosts: &[usize], instances: usize) -> Result<(), String> {
    let w = world(src);
    let mono = Arc::new(Engine::new(w.clone()));
    let cluster = Cluster::start(&w, hosts, instances).map_err(|e| e.to_string())?;
    for (frame, slot, answers) in script {
        let want = transcript(mono.session(), frame, slot, answers);
        for (i, node) in cluster.nodes.iter().enumerate() {
            let got = transcript(node.session(), frame, slot, answers);
            ensure_eq!(got, want, "{frame}.{slot} from instance {i}, hosts {hosts:?}");
        }
    }
    Ok(())
}

fn c4_transparency() -> Check {
    let (f1, f7) = (fixture("f1.fmdl"), fixture("f7.fmdl"));
    let f1_two = assignments(3, 2);
    let f7_two = assignments(4, 2);
    ensure_eq!((f1_two.len(), f7_two.len()), (8, 16), "two-instance partition counts");
    for h in &f1_two {
        transparent(&f1, F1_SCRIPT, h, 2)?;
    }
    for h in &f7_two {
        transparent(&f7, F7_SCRIPT, h, 2)?;
    }
    let f7_three: [[usize; 4]; 6] = [[0, 1, 2, 0], [1, 0, 2, 2], [2, 2, 0, 1], [0, 1, 1, 2], [2, 1, 0, 0], [1, 2, 2, 0]];
    for h in [[0, 1, 2], [2, 0, 1], [1, 2, 0], [0, 2, 2], [2, 1, 1]] {
        transparent(&f1, F1_SCRIPT, &h, 3)?;
    }
    for h in &f7_three {
        transparent(&f7, F7_SCRIPT, h, 3)?;
    }
    Ok(format!("{} two-instance and {} three-instance partitions", f1_two.len() + f7_two.len(), 5 + f7_three.len()))
}

fn c5_message_counts() -> Check {
    // Thing and Crate on instance 0, Box on instance 1.
    let cluster = Cluster::start(&world(&fixture("f1.fmdl")), &[0, 1, 0], 2).map_err(|e| e.to_string())?;
    let b = &cluster.nodes[1];
    let mut s = b.session();
    s.preconnect().map_err(|e| e.to_string())?;
    let before = cluster.total_sent();
    ensure_eq!(s.infer("Box", "big").unwrap(), boolean(false), "Box.big");
    let first = cluster.total_sent() - before;
    ensure_eq!(first, 4, "messages for the first query");
    let mid = cluster.total_sent();
    ensure_eq!(s.infer("Box", "big").unwrap(), boolean(false), "repeated Box.big");
    let repeat = cluster.total_sent() - mid;
    ensure_eq!(repeat, 0, "messages for the repeated query");
    ensure!(s.trace().iter().any(|t| t.kind == TraceKind::CacheHit), "no cache hit traced");
    Ok(format!("first query {first} messages, repeat delta {repeat}"))
}

const THING_SANS_RULES: &str = r#"
frame Thing {
  slot size: integer;
  slot big: boolean;
  rules from "URL";
}
frame Box : Thing { slot size: integer default 3; }
frame Crate : Thing { slot size: integer default 20; }
"#;

fn c6_remote_rules() -> Check {
    let repo = Node::serve(
        world(r#"frame Thing { slot size: integer; slot big: boolean; big := true if size > 10; big := false; ask size: "Enter size"; }"#),
        "127.0.0.1:0",
    )
    .map_err(|e| e.to_string())?;
    let local = world(&THING_SANS_RULES.replace("URL", &repo.url("Thing")));
    let node = Server::bind("127.0.0.1:0").unwrap().start(Engine::new(local)).map_err(|e| e.to_string())?;
    let mono = Arc::new(Engine::new(world(&fixture("f1.fmdl"))));
    for (frame, slot, answers) in F1_SCRIPT {
        ensure_eq!(
            transcript(node.session(), frame, slot, answers),
            transcript(mono.session(), frame, slot, answers),
            "{frame}.{slot}"
        );
    }
    for round in 0..2 {
        let mut s = node.session();
        for (frame, slot, _) in F1_SCRIPT {
            s.infer(frame, slot).unwrap();
            if let Some(q) = s.pending().cloned() {
                s.answer(&q.id, Value::Integer(12)).unwrap();
            }
        }
        ensure_eq!(s.counters().rule_fetches, 1, "rule fetches in session {round}");
    }
    Ok(format!("{} goals identical, 1 fetch per session", F1_SCRIPT.len()))
}

/// Returns a fixed index list regardless of the candidates.
struct Fixed(Vec<usize>);

impl ConflictResolver for Fixed {
    fn id(&self) -> &str {
        "fixed"
    }

    fn order(&self, _: &[&Action]) -> Vec<usize> {
        self.0.clone()
    }
}

/// Backward rule whose complexity is `nots + 2`, or 1 without a condition.
fn rule_of(nots: Option<usize>) -> Action {
    let cond = nots.map(|k| (0..k).fold(Expression::lit(true), |e, _| Expression::unary(UnaryOp::Not, e)));
    Action::BackwardRule(Rule::backward("x", Expression::lit(1i64), cond))
}

fn c7_resolvers() -> Check {
    let src = fixture("f2.fmdl");
    let e = engine(&src);
    ensure_eq!(e.session().infer("P", "x").unwrap(), int(5), "F2 under first");
    let mut s = e.session();
    s.set_default_resolver("complex").unwrap();
    ensure_eq!(s.infer("P", "x").unwrap(), int(10), "F2 under complex");

    let two = format!("{src}\n{}", src.replace("frame P", "frame Q"));
    let mut eng = Engine::new(world(&two));
    eng.set_frame_resolver("Q", "complex").unwrap();
    let eng = Arc::new(eng);
    ensure_eq!(eng.session().infer("P", "x").unwrap(), int(5), "per-frame P");
    ensure_eq!(eng.session().infer("Q", "x").unwrap(), int(10), "per-frame Q");

    let mut runner = TestRunner::new(Config { cases: PROPTEST_CASES, failure_persistence: None, ..Config::default() });
    let strategy = (prop::collection::vec(prop::option::of(0usize..6), 0..8), prop::collection::vec(0usize..12, 0..20));
    runner
        .run(&strategy, |(shape, raw)| {
            let actions: Vec<Action> = shape
                .iter()
                .map(|s| match s {
                    Some(5) => Action::AskUser { prompt: "?".into() },
                    Some(k) => rule_of(Some(*k)),
                    None => rule_of(None),
                })
                .collect();
            let refs: Vec<&Action> = actions.iter().collect();
            let n = refs.len();

            let got = select_actions(&Fixed(raw.clone()), &refs);
            let mut want = Vec::new();
            for i in raw {
                if i < n && !want.contains(&i) {
                    want.push(i);
                }
            }
            prop_assert_eq!(&got, &want);

            let all: Vec<usize> = (0..n).collect();
            prop_assert_eq!(select_actions(&FirstApplicable, &refs), all.clone());
            prop_assert_eq!(select_actions(&FireFirst, &refs), all.clone());

            let weight = |i: usize| match shape[i] {
                Some(5) => None,
                Some(k) => Some(k + 2),
                None => Some(1),
            };
            let mut rules: Vec<usize> = all.iter().copied().filter(|&i| weight(i).is_some()).collect();
            rules.sort_by_key(|&i| std::cmp::Reverse(weight(i)));
            let asks = all.iter().copied().filter(|&i| weight(i).is_none());
            let want: Vec<usize> = rules.into_iter().chain(asks).collect();
            prop_assert_eq!(select_actions(&MostComplexFirst, &refs), want);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("F2 5/10, per-frame resolver, {PROPTEST_CASES} resolver cases"))
}

fn c8_cycles_and_cascades() -> Check {
    let e = engine(&fixture("f4.fmdl"));
    let start = Instant::now();
    ensure_eq!(e.session().infer("C", "p").unwrap(), Outcome::Unknown, "F4 C.p");
    ensure_eq!(e.session().infer("C", "q").unwrap(), Outcome::Unknown, "F4 C.q");
    let took = start.elapsed();
    ensure!(took < F4_DEADLINE, "F4 took {took:?}");

    let e = engine(&fixture("cascade.fmdl"));
    ensure_eq!(e.cascade_limit(), CASCADE_LIMIT, "default cascade limit");
    let mut s = e.session();
    ensure_eq!(
        s.assign("Counter", "n", Value::Integer(0)),
        Err(InferenceError::CascadeLimitExceeded { limit: CASCADE_LIMIT }),
        "cascade"
    );
    // Value k is stored by the rule running at depth k.
    ensure_eq!(s.value("Counter", "n").cloned(), Some(Value::Integer(CASCADE_LIMIT as i64)), "last stored value");
    Ok(format!("F4 Unknown in {took:?} (limit {F4_DEADLINE:?}), cascade stops at depth {CASCADE_LIMIT}"))
}

const VEHICLES: &str = r#"
frame Vehicle {
  slot wheels: integer;
  slot many: boolean;
  many := wheels > 3;
}
frameset V from table "wheels.csv" key id parent Vehicle;
frame Q {
  slot one: integer;
  slot all: list of integer;
  slot none: integer;
  one := query("V", "wheels", "name", "=", "n42");
  all := query("V", "wheels", "wheels", ">", 3);
  none := query("V", "wheels", "name", "=", "boat");
}
"#;

fn c9_datasources() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(usize, String, i64)> = (1..=TABLE_ROWS).map(|i| (i, format!("n{i}"), (i * 13 % 7) as i64)).collect();
    let mut f = std::fs::File::create(dir.path().join("wheels.csv")).unwrap();
    writeln!(f, "id,name,wheels").unwrap();
    for (id, name, wheels) in &rows {
        writeln!(f, "{id},{name},{wheels}").unwrap();
    }
    drop(f);
    let kb = dir.path().join("kb.fmdl");
    std::fs::write(&kb, VEHICLES).unwrap();
    let load = || Arc::new(Engine::new(load_world(&kb).unwrap().world));

    let e = load();
    let members = e.world().children("Vehicle").len();
    ensure_eq!(members, TABLE_ROWS, "member frames");
    ensure_eq!(e.world().member_count("V"), TABLE_ROWS, "member count");
    let table = e.world().table("V").unwrap().clone();
    ensure_eq!(table.rows_read(), 0, "rows read before access");
    let mut s = e.session();
    for k in [7usize, 50, 93] {
        let wheels = rows[k - 1].2;
        ensure_eq!(s.infer(&format!("V_{k}"), "wheels").unwrap(), int(wheels), "V_{k}.wheels");
        ensure_eq!(s.infer(&format!("V_{k}"), "name").unwrap(), text(&rows[k - 1].1), "V_{k}.name");
    }
    let read = table.rows_read();
    ensure!(read <= MAX_ROWS_READ, "{read} rows read for 3 members");

    let e = load();
    let one = rows.iter().find(|r| r.1 == "n42").map(|r| r.2).unwrap();
    let many: Vec<i64> = rows.iter().filter(|r| r.2 > 3).map(|r| r.2).collect();
    ensure!(many.len() > 1, "table has too few matches");
    ensure_eq!(e.session().infer("Q", "one").unwrap(), int(one), "one row");
    ensure_eq!(e.session().infer("Q", "all").unwrap(), Outcome::Resolved(Value::List(ListValue::Integer(many))), "many rows");
    ensure_eq!(e.session().infer("Q", "none").unwrap(), Outcome::Unknown, "no rows");
    Ok(format!("{members} lazy frames, {read} rows read for 3 members (limit {MAX_ROWS_READ}), 0/1/many"))
}

fn framekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framekit")).args(args).output().unwrap()
}

fn c10_sessions() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let answers = dir.path().join("answers");
    std::fs::write(&answers, "size=20\n").unwrap();
    let empty = dir.path().join("empty");
    std::fs::write(&empty, "").unwrap();
    let snap = dir.path().join("s.xml");
    let kb = fixtures_dir().join("f1.fmdl");
    let (kb, answers, empty, snap) =
        (kb.to_str().unwrap(), answers.to_str().unwrap(), empty.to_str().unwrap(), snap.to_str().unwrap());

    let full = framekit(&["--json", "consult", kb, "--goal", "Thing.big", "--answers", answers, "--trace"]);
    ensure_eq!(full.status.code(), Some(0), "uninterrupted run");
    let part = framekit(&["--json", "consult", kb, "--goal", "Thing.big", "--answers", empty, "--snapshot", snap]);
    ensure_eq!(part.status.code(), Some(1), "interrupted run");
    let resumed = framekit(&["--json", "consult", kb, "--resume", snap, "--answers", answers, "--trace"]);
    ensure_eq!(resumed.status.code(), Some(0), "resumed run");
    ensure!(resumed.stdout == full.stdout, "resumed --json output differs from the uninterrupted run");
    let again = framekit(&["--json", "consult", kb, "--goal", "Thing.big", "--answers", answers, "--trace"]);
    ensure!(again.stdout == full.stdout, "replayed CLI output differs");

    let e = engine(&fixture("f1.fmdl"));
    let run = |size: i64| {
        let mut s = e.session();
        s.infer("Thing", "big").unwrap();
        s.answer("q1", Value::Integer(size)).unwrap();
        (s.trace().to_vec(), snapshot_to_xml(&s.snapshot()).replace(s.token(), "TOKEN"))
    };
    ensure!(run(20) == run(20), "engine replay differs");

    let mut s = e.session();
    s.infer("Thing", "big").unwrap();
    let restored_snap = snapshot_from_xml(&snapshot_to_xml(&s.snapshot())).map_err(|e| e.to_string())?;
    let mut r = InferenceSession::restore(&e, &restored_snap).map_err(|e| e.to_string())?;
    ensure_eq!(r.answer("q1", Value::Integer(20)).unwrap(), boolean(true), "restored session");
    ensure_eq!(r.trace(), run(20).0.as_slice(), "restored trace");

    let mut a = e.session();
    let mut b = e.session();
    a.infer("Thing", "big").unwrap();
    b.infer("Thing", "big").unwrap();
    ensure_eq!(b.answer("q1", Value::Integer(1)).unwrap(), boolean(false), "session b");
    ensure_eq!(a.answer("q1", Value::Integer(50)).unwrap(), boolean(true), "session a");
    ensure_eq!(a.value("Thing", "size").cloned(), Some(Value::Integer(50)), "a.size");
    ensure_eq!(b.value("Thing", "size").cloned(), Some(Value::Integer(1)), "b.size");
    let threads: Vec<_> = [3i64, 30]
        .into_iter()
        .map(|size| {
            let e = e.clone();
            std::thread::spawn(move || {
                let mut s = e.session();
                s.infer("Thing", "big").unwrap();
                s.answer("q1", Value::Integer(size)).unwrap()
            })
        })
        .collect();
    let got: Vec<Outcome> = threads.into_iter().map(|t| t.join().unwrap()).collect();
    ensure_eq!(got, vec![boolean(false), boolean(true)], "threaded sessions");
    Ok(format!("resumed --json output bit-equal ({} bytes), replay deterministic, sessions isolated", full.stdout.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("model round trip", c1_round_trip),
        ("inference semantics", c2_semantics),
        ("polymorphism", c3_polymorphism),
        ("distribution transparency", c4_transparency),
        ("message counts", c5_message_counts),
        ("remote rules", c6_remote_rules),
        ("conflict resolution", c7_resolvers),
        ("cycles and cascades", c8_cycles_and_cascades),
        ("data sources", c9_datasources),
        ("sessions", c10_sessions),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason}", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
