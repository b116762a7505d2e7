//! Minimal element tree with a deterministic writer and a safe reader.

use super::InterchangeError;

/// Default upper bound on accepted document size.
pub const DEFAULT_MAX_DOCUMENT: usize = 16 * 1024 * 1024;

/// An XML element. Elements hold either text or child elements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Element { name: name.to_string(), ..Default::default() }
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attrs.push((key.to_string(), value.into()));
        self
    }

    pub fn attr_opt(self, key: &str, value: Option<impl Into<String>>) -> Self {
        match value {
            Some(v) => self.attr(key, v),
            None => self,
        }
    }

    pub fn child(mut self, e: Element) -> Self {
        self.children.push(e);
        self
    }

    pub fn with_children(mut self, es: impl IntoIterator<Item = Element>) -> Self {
        self.children.extend(es);
        self
    }

    pub fn with_text(mut self, t: impl Into<String>) -> Self {
        self.text = t.into();
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Serializes with two-space indentation and no XML declaration.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out, 0);
        out.truncate(out.trim_end_matches('\n').len());
        out
    }

    fn write_into(&self, out: &mut String, indent: usize) {
        for _ in 0..indent {
            out.push_str("  ");
        }
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            escape_into(out, v, true);
            out.push('"');
        }
        if self.children.is_empty() {
            if self.text.is_empty() {
                out.push_str("/>\n");
            } else {
                out.push('>');
                escape_into(out, &self.text, false);
                out.push_str("</");
                out.push_str(&self.name);
                out.push_str(">\n");
            }
            return;
        }
        debug_assert!(self.text.is_empty(), "element with both text and children");
        out.push_str(">\n");
        for c in &self.children {
            c.write_into(out, indent + 1);
        }
        for _ in 0..indent {
            out.push_str("  ");
        }
        out.push_str("</");
        out.push_str(&self.name);
        out.push_str(">\n");
    }

    /// Parses a document. DTDs (and with them external entities) are
    /// rejected.
    pub fn parse(text: &str) -> Result<Element, InterchangeError> {
        Self::parse_limited(text, DEFAULT_MAX_DOCUMENT)
    }

    pub fn parse_limited(text: &str, limit: usize) -> Result<Element, InterchangeError> {
        if text.len() > limit {
            return Err(InterchangeError::TooLarge { size: text.len(), limit });
        }
        let opts = roxmltree::ParsingOptions { allow_dtd: false, ..Default::default() };
        let doc = roxmltree::Document::parse_with_options(text, opts).map_err(|e| InterchangeError::Xml(e.to_string()))?;
        convert(doc.root_element(), &format!("/{}", doc.root_element().tag_name().name()))
    }
}

fn convert(node: roxmltree::Node<'_, '_>, path: &str) -> Result<Element, InterchangeError> {
    let mut el = Element::new(node.tag_name().name());
    for a in node.attributes() {
        el.attrs.push((a.name().to_string(), a.value().to_string()));
    }
    let mut text = String::new();
    let mut counts: Vec<(String, usize)> = Vec::new();
    for c in node.children() {
        if c.is_element() {
            let name = c.tag_name().name();
            let n = match counts.iter_mut().find(|(k, _)| k == name) {
                Some((_, n)) => {
                    *n += 1;
                    *n
                }
                None => {
                    counts.push((name.to_string(), 1));
                    1
                }
            };
            el.children.push(convert(c, &format!("{path}/{name}[{n}]"))?);
        } else if c.is_text() {
            text.push_str(c.text().unwrap_or(""));
        }
    }
    if el.children.is_empty() {
        el.text = text;
    } else if !text.trim().is_empty() {
        return Err(InterchangeError::Schema { path: path.to_string(), reason: "unexpected text content".into() });
    }
    Ok(el)
}

fn escape_into(out: &mut String, s: &str, attr: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attr => out.push_str("&#10;"),
            '\t' if attr => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

/// An element under decoding together with its path, for error reports.
#[derive(Debug, Clone)]
pub struct Cursor<'a> {
    el: &'a Element,
    pub path: String,
}

impl<'a> Cursor<'a> {
    pub fn root(el: &'a Element) -> Self {
        Cursor { el, path: format!("/{}", el.name) }
    }

    pub fn name(&self) -> &'a str {
        &self.el.name
    }

    pub fn el(&self) -> &'a Element {
        self.el
    }

    pub fn text(&self) -> &'a str {
        &self.el.text
    }

    /// Child cursors with `name[i]` paths, `i` counting same-named siblings.
    pub fn children(&self) -> Vec<Cursor<'a>> {
        let mut counts: Vec<(&str, usize)> = Vec::new();
        let el: &'a Element = self.el;
        el.children
            .iter()
            .map(|c| {
                let n = match counts.iter_mut().find(|(k, _)| *k == c.name) {
                    Some((_, n)) => {
                        *n += 1;
                        *n
                    }
                    None => {
                        counts.push((c.name.as_str(), 1));
                        1
                    }
                };
                Cursor { el: c, path: format!("{}/{}[{}]", self.path, c.name, n) }
            })
            .collect()
    }

    pub fn attr(&self, key: &str) -> Option<&'a str> {
        self.el.get(key)
    }

    pub fn required(&self, key: &str) -> Result<&'a str, InterchangeError> {
        self.attr(key).ok_or_else(|| self.error(format!("missing attribute `{key}`")))
    }

    pub fn error(&self, reason: impl Into<String>) -> InterchangeError {
        InterchangeError::Schema { path: self.path.clone(), reason: reason.into() }
    }

    /// Error for an element that is not allowed here; the path ends in the
    /// bare element name.
    pub fn unexpected(&self) -> InterchangeError {
        let base = self.path.rsplit_once('/').map(|(b, _)| b).unwrap_or("");
        InterchangeError::Schema {
            path: format!("{base}/{}", self.el.name),
            reason: format!("unexpected element `{}`", self.el.name),
        }
    }

    pub fn only_attrs(&self, allowed: &[&str]) -> Result<(), InterchangeError> {
        for (k, _) in &self.el.attrs {
            if !allowed.contains(&k.as_str()) {
                return Err(self.error(format!("unexpected attribute `{k}`")));
            }
        }
        Ok(())
    }

    pub fn no_children(&self) -> Result<(), InterchangeError> {
        match self.children().into_iter().next() {
            Some(c) => Err(c.unexpected()),
            None => Ok(()),
        }
    }
}
