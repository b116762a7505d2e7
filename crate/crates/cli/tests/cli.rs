use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value as Json;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn framekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framekit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn check_clean_fixture() {
    let o = framekit(&["check", fixture("f1.fmdl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
    assert_eq!(stderr(&o), "");
}

#[test]
fn check_reports_diagnostics() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.fmdl", "frame A { slot x: integer; x := 1 + ; }\n");
    let o = framekit(&["check", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":1:37: error[SyntaxError]"), "{}", stderr(&o));
    let o = framekit(&["--json", "check", &bad]);
    let d: Json = serde_json::from_str(stderr(&o).lines().next().unwrap()).unwrap();
    assert_eq!(d["type"], "diagnostic");
    assert_eq!((d["payload"]["line"].as_u64(), d["payload"]["column"].as_u64()), (Some(1), Some(37)));
    let warn = write(&dir, "warn.fmdl", "frame A { slot x: integer; x := y; }\n");
    let o = framekit(&["check", &warn]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning[UnknownSlotRef]"), "{}", stderr(&o));
}

#[test]
fn consult_without_questions() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty", "");
    let o = framekit(&["consult", fixture("f1.fmdl").to_str().unwrap(), "--goal", "Crate.big", "--answers", &empty]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "big = true\n");
}

#[test]
fn consult_with_scripted_answers() {
    let dir = TempDir::new().unwrap();
    let answers = write(&dir, "answers", "size=12\n");
    let f1 = fixture("f1.fmdl");
    let o = framekit(&["consult", f1.to_str().unwrap(), "--goal", "Thing.big", "--answers", &answers]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().last(), Some("big = true"));
    let o = framekit(&["--json", "consult", f1.to_str().unwrap(), "--goal", "Thing.big", "--answers", &answers]);
    let lines: Vec<Json> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let kinds: Vec<&str> = lines.iter().map(|l| l["type"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["question", "answer", "result"]);
    assert_eq!(lines[0]["payload"]["prompt"], "Enter size");
    assert_eq!(lines[2]["payload"]["result"]["value"], true);
    assert!(lines.iter().all(|l| l.as_object().unwrap().len() == 2));
}

#[test]
fn consult_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_framekit"))
        .args(["consult", fixture("f1.fmdl").to_str().unwrap(), "--goal", "Thing.big"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"abc\n4\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().last(), Some("big = false"));
    assert!(stderr(&o).contains("expected integer"));
}

#[test]
fn constraint_violations_are_reasked() {
    let dir = TempDir::new().unwrap();
    let answers = write(&dir, "answers", "wheels=3\nwheels=2\n");
    let o = framekit(&["consult", fixture("f7.fmdl").to_str().unwrap(), "--goal", "Bike.wheels", "--answers", &answers]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("! ")), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("? ")).count(), 2);
    assert_eq!(text.lines().last(), Some("wheels = 2"));
}

#[test]
fn usage_and_failure_exit_codes() {
    let f1 = fixture("f1.fmdl");
    let f1 = f1.to_str().unwrap();
    assert_eq!(framekit(&["consult", f1]).status.code(), Some(2));
    assert_eq!(framekit(&["consult", f1, "--goal", "Crate"]).status.code(), Some(2));
    assert_eq!(framekit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(framekit(&["--help"]).status.code(), Some(0));
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty", "");
    let o = framekit(&["consult", f1, "--goal", "Thing.big", "--answers", &empty]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Enter size"));
    assert!(stderr(&o).contains("no answer for q1"));
    let wrong = write(&dir, "wrong", "colour=red\n");
    assert_eq!(framekit(&["consult", f1, "--goal", "Thing.big", "--answers", &wrong]).status.code(), Some(1));
    assert_eq!(framekit(&["consult", f1, "--goal", "Nope.big", "--answers", &empty]).status.code(), Some(1));
    assert_eq!(framekit(&["check", "/nonexistent.fmdl"]).status.code(), Some(1));
}

#[test]
fn compiled_artifact_consults_identically() {
    let dir = TempDir::new().unwrap();
    let fwx = dir.path().join("f1.fwx").display().to_string();
    let answers = write(&dir, "answers", "size=12\n");
    let f1 = fixture("f1.fmdl");
    assert_eq!(framekit(&["compile", f1.to_str().unwrap(), "-o", &fwx]).status.code(), Some(0));
    let args = |kb: &str| {
        framekit(&["--json", "consult", kb, "--goal", "Thing.big", "--answers", &answers, "--trace"]).stdout
    };
    let direct = args(f1.to_str().unwrap());
    assert!(!direct.is_empty());
    assert_eq!(args(&fwx), direct);
    assert_eq!(args(f1.to_str().unwrap()), direct);
}

#[test]
fn resumed_consultation_matches_uninterrupted() {
    let dir = TempDir::new().unwrap();
    let answers = write(&dir, "answers", "size=20\n");
    let empty = write(&dir, "empty", "");
    let snap = dir.path().join("s.xml").display().to_string();
    let f1 = fixture("f1.fmdl");
    let f1 = f1.to_str().unwrap();
    let full = framekit(&["--json", "consult", f1, "--goal", "Thing.big", "--answers", &answers, "--trace"]);
    let part = framekit(&["--json", "consult", f1, "--goal", "Thing.big", "--answers", &empty, "--snapshot", &snap]);
    assert_eq!(part.status.code(), Some(1));
    let resumed = framekit(&["--json", "consult", f1, "--resume", &snap, "--answers", &answers, "--trace"]);
    assert_eq!(resumed.status.code(), Some(0));
    assert_eq!(resumed.stdout, full.stdout);

    let trace = framekit(&["export-trace", &snap]);
    assert_eq!(trace.status.code(), Some(0));
    assert_eq!(stdout(&trace).lines().count(), 5);
    let changed = write(&dir, "changed.fmdl", &std::fs::read_to_string(f1).unwrap().replace("20", "21"));
    let o = framekit(&["consult", &changed, "--resume", &snap, "--answers", &answers]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("snapshot was taken against world"), "{}", stderr(&o));
}

#[test]
fn resolver_flag() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty", "");
    let f2 = fixture("f2.fmdl");
    let run = |r: &str| stdout(&framekit(&["consult", f2.to_str().unwrap(), "--goal", "P.x", "--answers", &empty, "--resolver", r]));
    assert_eq!(run("first"), "x = 5\n");
    assert_eq!(run("complex"), "x = 10\n");
    assert_eq!(framekit(&["consult", f2.to_str().unwrap(), "--goal", "P.x", "--resolver", "nope"]).status.code(), Some(1));
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Starts `serve` and returns the addresses it reports.
fn serve(args: &[&str], lines: usize) -> (Served, Vec<String>) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_framekit"))
        .arg("serve")
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut out = BufReader::new(child.stdout.take().unwrap());
    let mut addrs = Vec::new();
    for _ in 0..lines {
        let mut line = String::new();
        out.read_line(&mut line).unwrap();
        addrs.push(line.trim().rsplit("://").next().unwrap().to_string());
    }
    (Served(child), addrs)
}

#[test]
fn serve_and_query() {
    let (_server, addrs) = serve(&[fixture("f1.fmdl").to_str().unwrap(), "--listen", "127.0.0.1:0"], 1);
    let url = |frame: &str| format!("kb://{}/{frame}", addrs[0]);
    let o = framekit(&["query", &url("Crate"), "big"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "big = true\n");
    let o = framekit(&["--json", "query", &url("Box"), "size"]);
    let line: Json = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(line["payload"]["result"]["value"], 3);
    let o = framekit(&["query", &url("Thing"), "big"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Enter size"));
    assert_eq!(framekit(&["query", &url("Nope"), "big"]).status.code(), Some(1));
    assert_eq!(framekit(&["query", "http://x/y", "big"]).status.code(), Some(2));
}

fn http(addr: &str, request: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    s.write_all(request.as_bytes()).unwrap();
    let mut text = String::new();
    s.read_to_string(&mut text).unwrap();
    text
}

#[test]
fn serve_http() {
    let (_server, addrs) =
        serve(&[fixture("f1.fmdl").to_str().unwrap(), "--listen", "127.0.0.1:0", "--http", "127.0.0.1:0"], 2);
    let body = r#"{"goal":"Crate.big"}"#;
    let reply = http(
        &addrs[1],
        &format!(
            "POST /api/sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    );
    assert!(reply.starts_with("HTTP/1.1 201"), "{reply}");
    assert!(reply.contains(r#""result":{"kind":"boolean","value":true}"#), "{reply}");
    let reply = http(&addrs[1], "GET /api/metrics HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert!(reply.contains(r#""sessions_started":1"#), "{reply}");
}
