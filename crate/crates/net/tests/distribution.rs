use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::{Duration, Instant};

use framekit_core::fmdl::compile;
use framekit_core::inference::{Engine, RemoteConnector, TraceKind};
use framekit_core::{FrameWorld, InferenceError, InferenceSession, Outcome, Question, Value};
use framekit_net::framing::{read_frame, write_frame};
use framekit_net::{Cluster, Connector, Envelope, Message, Node, Server, Stats};

const F1: &str = include_str!("../../../fixtures/f1.fmdl");
const F1_SPLIT: &str = include_str!("../../../fixtures/f1_split.fmdl");
const F7: &str = include_str!("../../../fixtures/f7.fmdl");

fn world(src: &str) -> FrameWorld {
    let (b, _) = compile("test.fmdl", src).unwrap_or_else(|d| panic!("{d:?}"));
    b.freeze().unwrap()
}

fn show_question(q: &Question) -> String {
    format!("question {} {}.{} {:?} {} {:?} {:?}", q.id, q.frame, q.slot, q.prompt, q.kind, q.choices, q.violations)
}

/// Observable course of one consultation: results, questions and errors,
/// feeding `answers` to questions in order.
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

/// Every assignment of `frames` frames to `instances` instances.
fn assignments(frames: usize, instances: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..frames {
        out = out.into_iter().flat_map(|a| (0..instances).map(move |i| [a.clone(), vec![i]].concat())).collect();
    }
    out
}

fn check_transparency(src: &str, script: Script, hosts: &[usize], instances: usize) -> usize {
    let w = world(src);
    let mono = Arc::new(Engine::new(w.clone()));
    let cluster = Cluster::start(&w, hosts, instances).unwrap();
    let mut runs = 0;
    for (frame, slot, answers) in script {
        let expected = transcript(mono.session(), frame, slot, answers);
        for (i, node) in cluster.nodes.iter().enumerate() {
            let got = transcript(node.session(), frame, slot, answers);
            assert_eq!(got, expected, "{frame}.{slot} from instance {i}, hosts {hosts:?}");
            runs += 1;
        }
    }
    runs
}

#[test]
fn f1_all_two_instance_partitions() {
    let all = assignments(3, 2);
    assert_eq!(all.len(), 8);
    let runs: usize = all.iter().map(|h| check_transparency(F1, F1_SCRIPT, h, 2)).sum();
    assert_eq!(runs, 8 * F1_SCRIPT.len() * 2);
}

#[test]
fn f7_all_two_instance_partitions() {
    let all = assignments(4, 2);
    assert_eq!(all.len(), 16);
    for h in &all {
        check_transparency(F7, F7_SCRIPT, h, 2);
    }
}

#[test]
fn three_instance_partitions() {
    for h in [[0, 1, 2], [2, 0, 1], [1, 2, 0], [0, 2, 2]] {
        check_transparency(F1, F1_SCRIPT, &h, 3);
    }
    for h in [[0, 1, 2, 0], [1, 0, 2, 2], [2, 2, 0, 1], [0, 1, 1, 2]] {
        check_transparency(F7, F7_SCRIPT, &h, 3);
    }
}

#[test]
fn polymorphism_across_the_wire() {
    let w = world(F1_SPLIT);
    let local = Arc::new(Engine::new(w.clone()));
    assert_eq!(local.session().infer("Box", "big").unwrap(), Outcome::Resolved(Value::Boolean(true)));
    assert_eq!(local.session().infer("Box", "scaled").unwrap(), Outcome::Resolved(Value::Integer(300)));
    let cluster = Cluster::start(&w, &[0, 1], 2).unwrap();
    let b = cluster.node_of("Box");
    assert_eq!(b.session().infer("Box", "big").unwrap(), Outcome::Resolved(Value::Boolean(true)));
    assert_eq!(b.session().infer("Box", "scaled").unwrap(), Outcome::Resolved(Value::Integer(300)));
    assert_eq!(b.session().infer("Thing", "big").unwrap(), Outcome::Resolved(Value::Boolean(false)));
}

#[test]
fn f5_wire_trace() {
    let cluster = Cluster::start(&world(F1), &[0, 1, 0], 2).unwrap();
    let (a, b) = (&cluster.nodes[0], &cluster.nodes[1]);
    let mut s = b.session();
    s.preconnect().unwrap();
    let before = cluster.total_sent();
    let (a0, b0) = (a.stats(), b.stats());
    assert_eq!(s.infer("Box", "big").unwrap(), Outcome::Resolved(Value::Boolean(false)));
    assert_eq!(cluster.total_sent() - before, 4);
    let (a1, b1) = (a.stats(), b.stats());
    assert_eq!(b1.sent("get_slot") - b0.sent("get_slot"), 1);
    assert_eq!(b1.received("get_slot") - b0.received("get_slot"), 1);
    assert_eq!(b1.sent("slot_value") - b0.sent("slot_value"), 1);
    assert_eq!(b1.received("slot_value") - b0.received("slot_value"), 1);
    assert_eq!(a1.received("get_slot") - a0.received("get_slot"), 1);
    assert_eq!(a1.sent("get_slot") - a0.sent("get_slot"), 1);
    assert_eq!(a1.rules_served - a0.rules_served, 1, "{a0:?} {a1:?}");

    let after = (a.stats(), b.stats());
    assert_eq!(s.infer("Box", "big").unwrap(), Outcome::Resolved(Value::Boolean(false)));
    assert_eq!(cluster.total_sent() - before, 4);
    assert_eq!(a.stats().kinds, after.0.kinds);
    assert_eq!(b.stats().kinds, after.1.kinds);
    assert_eq!(s.counters().cache_hits, 1);
    assert_eq!(b.stats().cache_hits, after.1.cache_hits + 1);
    assert!(s.trace().iter().any(|t| t.kind == TraceKind::CacheHit));
}

#[test]
fn cached_values_match_fresh_queries() {
    let w = world(F1);
    let cluster = Cluster::start(&w, &[0, 1, 1], 2).unwrap();
    let b = &cluster.nodes[1];
    let mut s = b.session();
    for goal in ["Box", "Crate"] {
        let first = s.infer(goal, "big").unwrap();
        let cached = s.infer(goal, "big").unwrap();
        let fresh = b.session().infer(goal, "big").unwrap();
        assert_eq!(first, cached);
        assert_eq!(cached, fresh);
    }
    assert_eq!(s.counters().cache_hits, 2);
}

#[test]
fn fresh_node_stats_are_zero() {
    let node = Node::serve(world(F1), "127.0.0.1:0").unwrap();
    let st = node.stats();
    assert_eq!((st.total_sent(), st.total_received(), st.rules_served, st.cache_hits, st.cache_misses, st.errors), (0, 0, 0, 0, 0, 0));
}

#[test]
fn remote_question_surfaces_at_origin() {
    let cluster = Cluster::start(&world(F1), &[0, 1, 1], 2).unwrap();
    let mut s = cluster.nodes[1].session();
    let q = s.infer("Thing", "big").unwrap().question().cloned().unwrap();
    assert_eq!((q.id.as_str(), q.frame.as_str(), q.slot.as_str(), q.prompt.as_str()), ("q1", "Thing", "size", "Enter size"));
    assert_eq!(q.source.as_deref(), Some(cluster.nodes[0].url("Thing").as_str()));
    assert_eq!(s.answer("q1", Value::Integer(12)).unwrap(), Outcome::Resolved(Value::Boolean(true)));
}

#[test]
fn callback_chain_of_depth_eight() {
    let mut src = String::from("frame L0 { slot w: integer default 1; slot v: integer; v := w + 1; }\n");
    for i in 1..=8 {
        src += &format!("frame L{i} : L{} {{ }}\n", i - 1);
    }
    src = src.replace("frame L8 : L7 { }", "frame L8 : L7 { slot w: integer default 5; }");
    let w = world(&src);
    let expected = Arc::new(Engine::new(w.clone())).session().infer("L8", "v").unwrap();
    assert_eq!(expected, Outcome::Resolved(Value::Integer(6)));
    let hosts: Vec<usize> = (0..9).map(|i| i % 3).collect();
    let cluster = Cluster::start(&w, &hosts, 3).unwrap();
    let start = Instant::now();
    let mut s = cluster.node_of("L8").session();
    assert_eq!(s.infer("L8", "v").unwrap(), expected);
    assert!(start.elapsed() < Duration::from_secs(10));
    let callbacks: u64 = cluster.nodes.iter().map(|n| n.stats().sent("get_slot")).sum();
    // Eight hops up the chain and eight callbacks back to the origin.
    assert_eq!(callbacks, 16);
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

#[test]
fn remote_rules_match_local_rules() {
    let repo = Node::serve(world("frame Thing { slot size: integer; slot big: boolean; big := true if size > 10; big := false; ask size: \"Enter size\"; }"), "127.0.0.1:0").unwrap();
    let local = world(&THING_SANS_RULES.replace("URL", &repo.url("Thing")));
    let node = Server::bind("127.0.0.1:0").unwrap().start(Engine::new(local)).unwrap();
    let mono = Arc::new(Engine::new(world(F1)));
    for (frame, slot, answers) in F1_SCRIPT {
        assert_eq!(
            transcript(node.session(), frame, slot, answers),
            transcript(mono.session(), frame, slot, answers),
            "{frame}.{slot}"
        );
    }
    let served = repo.stats().received("get_rules");
    let mut s = node.session();
    s.infer("Box", "big").unwrap();
    s.infer("Crate", "big").unwrap();
    s.infer("Thing", "big").unwrap();
    assert_eq!(s.counters().rule_fetches, 1);
    assert_eq!(repo.stats().received("get_rules"), served + 1);
    assert!(repo.stats().rules_served >= 3);
}

#[test]
fn unreachable_repository_degrades() {
    let local = world(&THING_SANS_RULES.replace("URL", "kb://127.0.0.1:1/Thing"));
    let node = Server::bind("127.0.0.1:0").unwrap().start(Engine::new(local)).unwrap();
    let mut s = node.session();
    assert_eq!(s.infer("Box", "big").unwrap(), Outcome::Unknown);
    assert!(s.trace().iter().any(|t| t.kind == TraceKind::Note && t.detail.contains("unavailable")));
    assert_eq!(s.infer("Crate", "big").unwrap(), Outcome::Unknown);
    assert_eq!(s.counters().rule_fetches, 1);
}

#[test]
fn get_rules_serves_backward_rules() {
    let node = Node::serve(world(F1), "127.0.0.1:0").unwrap();
    let c = Connector::new(Arc::new(Stats::new()));
    let doc = c.get_rules("t", &node.url("Thing")).unwrap();
    assert_eq!(doc.matches("kind=\"backward\"").count(), 2);
    assert_eq!(c.get_rules("t", &node.url("Box")).unwrap(), "<rules frame=\"Box\"/>");
}

#[test]
fn connect_errors() {
    let node = Node::serve(world(F1), "127.0.0.1:0").unwrap();
    let c = Connector::new(Arc::new(Stats::new()));
    assert_eq!(c.connect("t", &node.url("Nope")).unwrap_err().code, "UnknownRemoteFrame");
    assert_eq!(c.connect("t", "kb://127.0.0.1:1/Thing").unwrap_err().code, "ConnectionError");
    c.connect("t", &node.url("Thing")).unwrap();
    c.connect("t", &node.url("Box")).unwrap();
    assert_eq!(c.connections(), 1);
    c.close("t");
    assert_eq!(c.connections(), 0);
}

fn raw_request(stream: &mut TcpStream, body: &[u8]) -> Envelope {
    write_frame(stream, body).unwrap();
    Envelope::from_bytes(&read_frame(stream).unwrap().unwrap()).unwrap()
}

#[test]
fn version_mismatch() {
    let node = Node::serve(world(F1), "127.0.0.1:0").unwrap();
    let mut stream = TcpStream::connect(node.addr()).unwrap();
    let reply = raw_request(&mut stream, br#"<hello id="1" version="2" token="t" frame="Thing"/>"#);
    assert_eq!(reply.id, 1);
    assert!(matches!(reply.message, Message::Error { ref code, .. } if code == "VersionMismatch"));
}

#[test]
fn malformed_message_gets_error_reply() {
    let node = Node::serve(world(F1), "127.0.0.1:0").unwrap();
    let mut stream = TcpStream::connect(node.addr()).unwrap();
    let reply = raw_request(&mut stream, b"<garbage");
    assert!(matches!(reply.message, Message::Error { ref code, .. } if code == "SchemaError"));
    let st = node.stats();
    assert_eq!(st.errors, 1);
    assert_eq!(st.total_received(), 0);
    let hello = raw_request(&mut stream, br#"<hello id="2" version="1" token="t" frame="Thing"/>"#);
    assert_eq!(hello.id, 2);
    assert!(matches!(hello.message, Message::Hello { .. }));
    let v = raw_request(&mut stream, br#"<get_slot id="3" token="t" frame="Crate" slot="big"/>"#);
    assert_eq!(v.message, Message::SlotValue(Value::Boolean(true)));
    let wrong = raw_request(&mut stream, br#"<get_slot id="4" token="other" frame="Crate" slot="big"/>"#);
    assert!(matches!(wrong.message, Message::Error { ref code, .. } if code == "UnknownToken"));
    write_frame(&mut stream, br#"<bye id="5"/>"#).unwrap();
    let mut rest = Vec::new();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    assert_eq!(stream.read_to_end(&mut rest).unwrap(), 0);
    stream.flush().unwrap();
}
