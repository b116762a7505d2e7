//! `framekit`: compile, check, consult, serve and query knowledge bases.

mod answers;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use framekit_core::fmdl::Diagnostic;
use framekit_core::inference::new_token;
use framekit_core::interchange::{snapshot_from_xml, snapshot_to_xml, world_to_xml};
use framekit_core::load::{load_world, LoadError};
use framekit_core::value::is_identifier;
use framekit_core::{Engine, FrameDef, FrameKind, FrameWorld, InferenceError, InferenceSession, Outcome, WorldBuilder};
use framekit_net::{Connector, KbUrl, Server, Stats};
use framekit_service::json::{question_json, result_json, trace_event_json, value_to_json};
use framekit_service::{Config, Service};
use serde_json::json;

use answers::{parse_answer, Answers};
use output::Out;

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "framekit", version, about = "Frame-based knowledge system shell")]
struct Cli {
    /// Print every output line as a JSON object {type, payload}.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile FMDL to interchange XML.
    Compile {
        input: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Report diagnostics for an FMDL file.
    Check { input: PathBuf },
    /// Run a consultation.
    Consult {
        /// `.fmdl` source or compiled interchange file.
        kb: PathBuf,
        /// Goal as Frame.slot.
        #[arg(long)]
        goal: Option<String>,
        /// Scripted answers, one `slot=value` per line; questions are read
        /// from standard input without it.
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Continue a consultation saved with --snapshot.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Save the session here when it stops.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Print the inference trace after the result.
        #[arg(long)]
        trace: bool,
        /// Default conflict resolver (first, complex, fire-first).
        #[arg(long)]
        resolver: Option<String>,
    },
    /// Serve a knowledge base over the wire protocol and optionally HTTP.
    Serve {
        /// `.fmdl` source or compiled interchange file.
        kb: PathBuf,
        /// Wire protocol address, e.g. 127.0.0.1:7000.
        #[arg(long)]
        listen: String,
        /// HTTP API address.
        #[arg(long)]
        http: Option<String>,
        /// Origin allowed to call the HTTP API from a browser.
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Ask a remote instance for a slot value.
    Query {
        /// Remote frame as kb://host:port/Frame.
        url: String,
        slot: String,
    },
    /// Print the trace stored in a session snapshot.
    ExportTrace { snapshot: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Out { json: cli.json };
    ExitCode::from(match cli.command {
        Command::Compile { input, output } => compile(&out, &input, &output),
        Command::Check { input } => check(&out, &input),
        Command::Consult { kb, goal, answers, resume, snapshot, trace, resolver } => {
            let opts = ConsultOptions { goal, answers, resume, snapshot, trace, resolver };
            consult(&out, &kb, opts)
        }
        Command::Serve { kb, listen, http, cors_origin } => serve(&out, &kb, &listen, http.as_deref(), cors_origin),
        Command::Query { url, slot } => query(&out, &url, &slot),
        Command::ExportTrace { snapshot } => export_trace(&out, &snapshot),
    })
}

fn report_load_error(out: &Out, e: &LoadError) {
    match e {
        LoadError::Diagnostics { diagnostics, .. } => diagnostics.iter().for_each(|d| out.diagnostic(d)),
        other => out.error("LoadError", other),
    }
}

fn report_warnings(out: &Out, warnings: &[Diagnostic]) {
    warnings.iter().for_each(|d| out.diagnostic(d));
}

fn load(out: &Out, path: &Path) -> Option<FrameWorld> {
    match load_world(path) {
        Ok(l) => {
            report_warnings(out, &l.warnings);
            Some(l.world)
        }
        Err(e) => {
            report_load_error(out, &e);
            None
        }
    }
}

fn compile(out: &Out, input: &Path, output: &Path) -> u8 {
    let Some(world) = load(out, input) else { return FAILED };
    if let Err(e) = fs::write(output, world_to_xml(&world)) {
        out.error("IoError", format!("cannot write {}: {e}", output.display()));
        return FAILED;
    }
    OK
}

fn check(out: &Out, input: &Path) -> u8 {
    if load(out, input).is_some() {
        OK
    } else {
        FAILED
    }
}

struct ConsultOptions {
    goal: Option<String>,
    answers: Option<PathBuf>,
    resume: Option<PathBuf>,
    snapshot: Option<PathBuf>,
    trace: bool,
    resolver: Option<String>,
}

fn parse_goal(goal: &str) -> Option<(String, String)> {
    let (frame, slot) = goal.split_once('.')?;
    (is_identifier(frame) && is_identifier(slot)).then(|| (frame.to_string(), slot.to_string()))
}

/// Engine whose remote frames are reached through a fresh connector.
fn connected_engine(world: FrameWorld) -> Arc<Engine> {
    let mut engine = Engine::new(world);
    let connector = Arc::new(Connector::new(Arc::new(Stats::new())));
    connector.set_world(engine.world().clone());
    engine.set_connector(connector);
    Arc::new(engine)
}

fn save_snapshot(out: &Out, path: Option<&Path>, session: &InferenceSession) -> bool {
    let Some(path) = path else { return true };
    match fs::write(path, snapshot_to_xml(&session.snapshot())) {
        Ok(()) => true,
        Err(e) => {
            out.error("IoError", format!("cannot write {}: {e}", path.display()));
            false
        }
    }
}

fn consult(out: &Out, kb: &Path, opts: ConsultOptions) -> u8 {
    let goal = match (&opts.goal, &opts.resume) {
        (Some(g), _) => match parse_goal(g) {
            Some(g) => Some(g),
            None => {
                out.error("BadGoal", format!("goal `{g}` is not Frame.slot"));
                return USAGE;
            }
        },
        (None, Some(_)) => None,
        (None, None) => {
            out.error("Usage", "consult needs --goal or --resume");
            return USAGE;
        }
    };
    let mut answers = match &opts.answers {
        Some(path) => match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| Answers::parse_script(&t)) {
            Ok(a) => a,
            Err(e) => {
                out.error("BadAnswers", format!("{}: {e}", path.display()));
                return FAILED;
            }
        },
        None => Answers::Stdin,
    };
    let Some(world) = load(out, kb) else { return FAILED };
    let engine = connected_engine(world);

    let (mut session, goal) = match &opts.resume {
        Some(path) => {
            let restored = fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|t| snapshot_from_xml(&t).map_err(|e| e.to_string()))
                .and_then(|snap| InferenceSession::restore(&engine, &snap).map_err(|e| e.to_string()));
            match restored {
                Ok(s) => match goal.or_else(|| s.goal().map(|(f, sl)| (f.to_string(), sl.to_string()))) {
                    Some(g) => (s, g),
                    None => {
                        out.error("BadSnapshot", "snapshot has no goal; pass --goal");
                        return FAILED;
                    }
                },
                Err(e) => {
                    out.error("BadSnapshot", format!("{}: {e}", path.display()));
                    return FAILED;
                }
            }
        }
        None => (engine.session(), goal.expect("goal checked above")),
    };
    if let Some(id) = &opts.resolver {
        if let Err(e) = session.set_default_resolver(id) {
            out.error(e.code(), e);
            return FAILED;
        }
    }

    let mut step = match session.pending().cloned() {
        Some(q) => Ok(Outcome::Suspended(q)),
        None => session.infer(&goal.0, &goal.1),
    };
    loop {
        let q = match step {
            Ok(Outcome::Suspended(q)) => q,
            Err(InferenceError::ConstraintViolation { violations, question: Some(q) }) => {
                out.emit("violation", format!("! {}", violations.join("; ")), json!({ "violations": violations }));
                *q
            }
            Ok(outcome) => {
                let value = outcome.value().cloned().unwrap_or_default();
                let payload = json!({ "frame": goal.0, "slot": goal.1, "result": result_json(&value) });
                out.emit("result", format!("{} = {value}", goal.1), payload);
                if opts.trace {
                    for e in session.trace() {
                        out.emit("trace", e, trace_event_json(e));
                    }
                }
                return if save_snapshot(out, opts.snapshot.as_deref(), &session) { OK } else { FAILED };
            }
            Err(e) => {
                out.error(e.code(), &e);
                save_snapshot(out, opts.snapshot.as_deref(), &session);
                return FAILED;
            }
        };
        out.emit("question", format!("? {} [{}.{}: {}]", q.prompt, q.frame, q.slot, q.kind.name()), question_json(&q));
        let value = loop {
            let Some(reply) = answers.next() else {
                out.error("Unanswered", format!("no answer for {} ({})", q.id, q.prompt));
                save_snapshot(out, opts.snapshot.as_deref(), &session);
                return FAILED;
            };
            if let Some(slot) = reply.slot.as_deref().filter(|s| *s != q.slot) {
                out.error("BadAnswers", format!("line {}: answer for `{slot}` but the question asks for `{}`", reply.line, q.slot));
                return FAILED;
            }
            match parse_answer(q.kind, &reply.text) {
                Ok(v) => break v,
                Err(e) if answers.is_script() => {
                    out.error("AnswerTypeMismatch", format!("line {}: {e}", reply.line));
                    return FAILED;
                }
                Err(e) => out.error("AnswerTypeMismatch", e),
            }
        };
        let payload = json!({ "question_id": q.id, "slot": q.slot, "value": value_to_json(&value) });
        out.emit("answer", format!("> {} = {value}", q.slot), payload);
        step = session.answer(&q.id, value);
    }
}

fn serve(out: &Out, kb: &Path, listen: &str, http: Option<&str>, cors_origin: Option<String>) -> u8 {
    let Some(world) = load(out, kb) else { return FAILED };
    let node = match Server::bind(listen).and_then(|s| s.start(Engine::new(world))) {
        Ok(n) => n,
        Err(e) => {
            out.error("IoError", format!("cannot listen on {listen}: {e}"));
            return FAILED;
        }
    };
    let addr = node.addr();
    out.emit("listening", format!("listening on kb://{addr}"), json!({ "protocol": "kb", "address": addr.to_string() }));
    let Some(http) = http else {
        loop {
            std::thread::park();
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            out.error("IoError", e);
            return FAILED;
        }
    };
    let result = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(http).await?;
        let addr = listener.local_addr()?;
        out.emit("listening", format!("listening on http://{addr}"), json!({ "protocol": "http", "address": addr.to_string() }));
        let config = Config { cors_origin, ..Config::default() };
        framekit_service::serve(listener, Service::new(node.engine().clone(), config)).await
    });
    match result {
        Ok(()) => OK,
        Err(e) => {
            out.error("IoError", format!("http on {http}: {e}"));
            FAILED
        }
    }
}

fn query(out: &Out, url: &str, slot: &str) -> u8 {
    let target = match KbUrl::parse(url) {
        Ok(t) => t,
        Err(e) => {
            out.error(&e.code, &e.message);
            return USAGE;
        }
    };
    let mut stub = FrameDef::new(&target.frame);
    stub.kind = FrameKind::RemoteStub { url: url.to_string() };
    let mut builder = WorldBuilder::new();
    let world = builder.add_frame(stub).and_then(|_| builder.freeze()).expect("a single stub frame is a valid world");
    let engine = connected_engine(world);
    let token = new_token();
    if let Err(e) = engine.connector().expect("connector installed").connect(&token, url) {
        out.error(&e.code, &e.message);
        return FAILED;
    }
    let mut session = engine.session_with_token(&token);
    match session.infer(&target.frame, slot) {
        Ok(Outcome::Suspended(q)) => {
            out.emit("question", format!("? {} [{}.{}: {}]", q.prompt, q.frame, q.slot, q.kind.name()), question_json(&q));
            out.error("Unanswered", "the remote instance asked a question");
            FAILED
        }
        Ok(o) => {
            let value = o.value().cloned().unwrap_or_default();
            let payload = json!({ "frame": target.frame, "slot": slot, "result": result_json(&value) });
            out.emit("result", format!("{slot} = {value}"), payload);
            OK
        }
        Err(e) => {
            out.error(e.code(), e);
            FAILED
        }
    }
}

fn export_trace(out: &Out, path: &Path) -> u8 {
    let snap = match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| snapshot_from_xml(&t).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => {
            out.error("BadSnapshot", format!("{}: {e}", path.display()));
            return FAILED;
        }
    };
    for e in &snap.trace {
        out.emit("trace", e, trace_event_json(e));
    }
    OK
}
