//! Wire messages and their XML encoding.

use framekit_core::interchange::{decode_question, decode_value, encode_question, encode_value, Cursor, Element, InterchangeError};
use framekit_core::{Question, Value};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello { version: String, token: String, frame: String },
    GetSlot { token: String, frame: String, slot: String, origin: Option<String> },
    SlotValue(Value),
    GetRules { token: String, frame: String },
    Rules(Element),
    Question(Question),
    Answer { token: String, frame: String, slot: String, value: Value },
    Error { code: String, message: String },
    Bye,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::GetSlot { .. } => "get_slot",
            Message::SlotValue(_) => "slot_value",
            Message::GetRules { .. } => "get_rules",
            Message::Rules(_) => "rules",
            Message::Question(_) => "question",
            Message::Answer { .. } => "answer",
            Message::Error { .. } => "error",
            Message::Bye => "bye",
        }
    }

    /// Kinds that expect a reply.
    pub fn is_request(&self) -> bool {
        matches!(self, Message::Hello { .. } | Message::GetSlot { .. } | Message::GetRules { .. } | Message::Answer { .. })
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error { code: code.to_string(), message: message.into() }
    }
}

/// A message with its correlation id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub id: u64,
    pub message: Message,
}

impl Envelope {
    pub fn to_element(&self) -> Element {
        let el = Element::new(self.message.kind()).attr("id", self.id.to_string());
        match &self.message {
            Message::Hello { version, token, frame } => {
                el.attr("version", version.clone()).attr("token", token.clone()).attr("frame", frame.clone())
            }
            Message::GetSlot { token, frame, slot, origin } => el
                .attr("token", token.clone())
                .attr("frame", frame.clone())
                .attr("slot", slot.clone())
                .attr_opt("origin", origin.clone()),
            Message::SlotValue(v) => el.child(encode_value(v)),
            Message::GetRules { token, frame } => el.attr("token", token.clone()).attr("frame", frame.clone()),
            Message::Rules(doc) => el.child(doc.clone()),
            Message::Question(q) => el.child(encode_question("ask", q)),
            Message::Answer { token, frame, slot, value } => el
                .attr("token", token.clone())
                .attr("frame", frame.clone())
                .attr("slot", slot.clone())
                .child(encode_value(value)),
            Message::Error { code, message } => el.attr("code", code.clone()).attr("message", message.clone()),
            Message::Bye => el,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_element().to_xml().into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, InterchangeError> {
        let text = std::str::from_utf8(bytes).map_err(|e| InterchangeError::Xml(e.to_string()))?;
        Self::from_element(&Element::parse(text)?)
    }

    pub fn from_element(root: &Element) -> Result<Self, InterchangeError> {
        let c = Cursor::root(root);
        let id: u64 = c.required("id")?.parse().map_err(|_| c.error("bad correlation id"))?;
        let s = |k: &str| c.required(k).map(str::to_string);
        let only_child = || -> Result<Cursor<'_>, InterchangeError> {
            let kids = c.children();
            match kids.as_slice() {
                [one] => Ok(one.clone()),
                _ => Err(c.error("expected exactly one child element")),
            }
        };
        let message = match c.name() {
            "hello" => {
                c.only_attrs(&["id", "version", "token", "frame"])?;
                c.no_children()?;
                Message::Hello { version: s("version")?, token: s("token")?, frame: s("frame")? }
            }
            "get_slot" => {
                c.only_attrs(&["id", "token", "frame", "slot", "origin"])?;
                c.no_children()?;
                Message::GetSlot {
                    token: s("token")?,
                    frame: s("frame")?,
                    slot: s("slot")?,
                    origin: c.attr("origin").map(str::to_string),
                }
            }
            "slot_value" => {
                c.only_attrs(&["id"])?;
                Message::SlotValue(decode_value(&only_child()?)?)
            }
            "get_rules" => {
                c.only_attrs(&["id", "token", "frame"])?;
                c.no_children()?;
                Message::GetRules { token: s("token")?, frame: s("frame")? }
            }
            "rules" => {
                c.only_attrs(&["id"])?;
                Message::Rules(only_child()?.el().clone())
            }
            "question" => {
                c.only_attrs(&["id"])?;
                let q = only_child()?;
                if q.name() != "ask" {
                    return Err(q.unexpected());
                }
                Message::Question(decode_question(&q)?)
            }
            "answer" => {
                c.only_attrs(&["id", "token", "frame", "slot"])?;
                Message::Answer {
                    token: s("token")?,
                    frame: s("frame")?,
                    slot: s("slot")?,
                    value: decode_value(&only_child()?)?,
                }
            }
            "error" => {
                c.only_attrs(&["id", "code", "message"])?;
                c.no_children()?;
                Message::Error { code: s("code")?, message: s("message")? }
            }
            "bye" => {
                c.only_attrs(&["id"])?;
                c.no_children()?;
                Message::Bye
            }
            _ => return Err(c.unexpected()),
        };
        Ok(Envelope { id, message })
    }
}
