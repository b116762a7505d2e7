use std::io::{self, Read};

use framekit_core::interchange::Element;
use framekit_core::{ListValue, Question, Value, ValueKind};
use framekit_net::framing::{read_frame, write_frame, FrameDecoder, MAX_FRAME};
use framekit_net::{Envelope, KbUrl, Message};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn sample_messages() -> Vec<Envelope> {
    let q = Question {
        id: "q3".into(),
        frame: "Box".into(),
        slot: "size".into(),
        prompt: "Enter <size> & \"units\"".into(),
        kind: ValueKind::Integer,
        choices: Some(vec![Value::Integer(1), Value::Integer(2)]),
        violations: vec!["size < 10".into()],
        source: Some("kb://127.0.0.1:1/Thing".into()),
    };
    let msgs = vec![
        Message::Hello { version: "1".into(), token: "abc".into(), frame: "Thing".into() },
        Message::GetSlot { token: "abc".into(), frame: "Thing".into(), slot: "big".into(), origin: Some("Box".into()) },
        Message::GetSlot { token: "abc".into(), frame: "Box".into(), slot: "size".into(), origin: None },
        Message::SlotValue(Value::Integer(3)),
        Message::SlotValue(Value::Unknown),
        Message::SlotValue(Value::List(ListValue::String(vec!["a".into(), "ü ✓".into()]))),
        Message::GetRules { token: "abc".into(), frame: "Thing".into() },
        Message::Rules(Element::new("rules").attr("frame", "Thing")),
        Message::Question(q),
        Message::Answer { token: "abc".into(), frame: "Box".into(), slot: "size".into(), value: Value::Integer(12) },
        Message::error("UnknownFrame", "no frame `X`"),
        Message::Bye,
    ];
    msgs.into_iter().enumerate().map(|(i, message)| Envelope { id: i as u64 + 1, message }).collect()
}

#[test]
fn messages_round_trip() {
    for env in sample_messages() {
        let back = Envelope::from_bytes(&env.to_bytes()).unwrap();
        assert_eq!(back, env);
    }
}

#[test]
fn malformed_messages_rejected() {
    for bad in [
        "<nonsense id=\"1\"/>",
        "<get_slot id=\"x\" token=\"t\" frame=\"A\" slot=\"s\"/>",
        "<get_slot id=\"1\" token=\"t\" frame=\"A\"/>",
        "<slot_value id=\"1\"/>",
        "<hello id=\"1\" version=\"1\" token=\"t\" frame=\"A\" extra=\"1\"/>",
        "not xml",
    ] {
        assert!(Envelope::from_bytes(bad.as_bytes()).is_err(), "{bad}");
    }
    assert!(Envelope::from_bytes(&[0xff, 0xfe]).is_err());
}

/// Reader returning between one and seven bytes per call.
struct Chunked {
    data: Vec<u8>,
    pos: usize,
    rng: StdRng,
}

impl Read for Chunked {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.data.len() {
            return Ok(0);
        }
        let n = self.rng.gen_range(1..=7).min(buf.len()).min(self.data.len() - self.pos);
        buf[..n].copy_from_slice(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

#[test]
fn framing_is_independent_of_chunking() {
    let envs = sample_messages();
    let mut stream = Vec::new();
    for e in &envs {
        write_frame(&mut stream, &e.to_bytes()).unwrap();
    }
    write_frame(&mut stream, b"").unwrap();
    let mut expected: Vec<Vec<u8>> = envs.iter().map(Envelope::to_bytes).collect();
    expected.push(Vec::new());

    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..300 {
        let mut dec = FrameDecoder::new();
        let mut got = Vec::new();
        let mut pos = 0;
        while pos < stream.len() {
            let n = rng.gen_range(0..=40).min(stream.len() - pos);
            got.extend(dec.push(&stream[pos..pos + n]).unwrap());
            pos += n;
        }
        assert_eq!(got, expected);
        assert_eq!(dec.pending(), 0);

        let mut r = Chunked { data: stream.clone(), pos: 0, rng: StdRng::seed_from_u64(rng.gen()) };
        let mut got = Vec::new();
        while let Some(f) = read_frame(&mut r).unwrap() {
            got.push(f);
        }
        assert_eq!(got, expected);
    }
    let decoded: Vec<Envelope> = expected[..envs.len()].iter().map(|b| Envelope::from_bytes(b).unwrap()).collect();
    assert_eq!(decoded, envs);
}

#[test]
fn framing_errors() {
    let mut truncated = Vec::new();
    write_frame(&mut truncated, b"hello").unwrap();
    truncated.pop();
    assert!(read_frame(&mut truncated.as_slice()).is_err());
    assert!(read_frame(&mut [0u8, 0].as_slice()).is_err());
    assert_eq!(read_frame(&mut [].as_slice()).unwrap(), None);
    let huge = ((MAX_FRAME + 1) as u32).to_be_bytes();
    assert!(read_frame(&mut huge.as_slice()).is_err());
    assert!(FrameDecoder::new().push(&huge).is_err());
}

#[test]
fn kb_urls() {
    assert_eq!(
        KbUrl::parse("kb://127.0.0.1:7001/Box").unwrap(),
        KbUrl { authority: "127.0.0.1:7001".into(), frame: "Box".into() }
    );
    assert_eq!(KbUrl::parse("kb://localhost:9/Thing").unwrap().authority, "localhost:9");
    for bad in ["http://a:1/B", "kb://a/B", "kb://a:1/", "kb://a:1/B/C", "nonsense"] {
        assert_eq!(KbUrl::parse(bad).unwrap_err().code, "BadUrl", "{bad}");
    }
}
