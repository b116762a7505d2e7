//! Recursive-descent parser producing a [`WorldBuilder`].

use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::{Diagnostic, ParsedWorld, SourceMap, SourceSpan};
use crate::expr::{BinaryOp, Expression, UnaryOp};
use crate::model::{Action, FrameDef, FrameKind, ModelError, Rule, SlotDef, WorldBuilder};
use crate::value::{ListValue, ScalarKind, Value, ValueKind};

const MAX_DEPTH: usize = 200;

/// Syntax error already recorded in the diagnostics list.
struct Reported;

type PResult<T> = Result<T, Reported>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    builder: WorldBuilder,
    spans: SourceMap,
    depth: usize,
}

/// Parses a whole FMDL source text.
pub fn parse(file: &str, text: &str) -> Result<ParsedWorld, Vec<Diagnostic>> {
    let toks = tokenize(file, text).map_err(|d| vec![d])?;
    let mut p = Parser {
        toks,
        pos: 0,
        diags: Vec::new(),
        builder: WorldBuilder::new(),
        spans: SourceMap::default(),
        depth: 0,
    };
    p.world();
    if p.diags.is_empty() {
        Ok(ParsedWorld { builder: p.builder, spans: p.spans })
    } else {
        Err(p.diags)
    }
}

/// Parses a single expression, e.g. for goals or interactive use.
pub fn parse_expression(text: &str) -> Result<Expression, Diagnostic> {
    let toks = tokenize("<expr>", text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        diags: Vec::new(),
        builder: WorldBuilder::new(),
        spans: SourceMap::default(),
        depth: 0,
    };
    let e = p.expr();
    if e.is_ok() && !p.at(&TokenKind::Eof) {
        p.error_expected("end of expression");
    }
    match (e, p.diags.into_iter().next()) {
        (Ok(e), None) => Ok(e),
        (_, Some(d)) => Err(d),
        (Err(_), None) => unreachable!("a failed parse records a diagnostic"),
    }
}

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.toks[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].kind
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, k: &TokenKind) -> bool {
        self.peek() == k
    }

    fn at_kw(&self, k: Keyword) -> bool {
        self.peek() == &TokenKind::Keyword(k)
    }

    fn eat(&mut self, k: &TokenKind) -> bool {
        if self.at(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        self.eat(&TokenKind::Keyword(k))
    }

    /// Span for a diagnostic at the current token; at end of input the last
    /// real token is used so that spans stay inside the text.
    fn error_span(&self) -> SourceSpan {
        if self.at(&TokenKind::Eof) && self.pos > 0 {
            self.toks[self.pos - 1].span.clone()
        } else {
            self.span()
        }
    }

    fn error_expected(&mut self, expected: &str) -> Reported {
        let found = self.peek().describe();
        let span = self.error_span();
        self.diags.push(Diagnostic::error(span, "SyntaxError", format!("expected {expected}, found {found}")));
        Reported
    }

    fn error_at(&mut self, span: SourceSpan, code: &str, message: String) -> Reported {
        self.diags.push(Diagnostic::error(span, code, message));
        Reported
    }

    fn expect(&mut self, k: TokenKind) -> PResult<Token> {
        if self.at(&k) {
            Ok(self.bump())
        } else {
            let what = match &k {
                TokenKind::Keyword(kw) => format!("`{}`", kw.text()),
                other => format!("`{}`", super::lexer::punct_text(other)),
            };
            Err(self.error_expected(&what))
        }
    }

    fn expect_kw(&mut self, k: Keyword) -> PResult<Token> {
        self.expect(TokenKind::Keyword(k))
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.error_expected(what)),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            TokenKind::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error_expected(what)),
        }
    }

    fn world(&mut self) {
        while !self.at(&TokenKind::Eof) {
            let r = match self.peek() {
                TokenKind::Keyword(Keyword::Frame) => self.frame_decl(),
                TokenKind::Keyword(Keyword::Remote) => self.remote_decl(),
                TokenKind::Keyword(Keyword::Frameset) => self.frameset_decl(),
                TokenKind::Keyword(Keyword::Extern) => self.extern_decl(),
                _ => Err(self.error_expected("`frame`, `remote`, `frameset` or `extern`")),
            };
            if r.is_err() {
                self.recover_item();
            }
        }
    }

    /// Skips to the next top-level declaration keyword.
    fn recover_item(&mut self) {
        let mut depth = 0usize;
        let start = self.pos;
        loop {
            match self.peek() {
                TokenKind::Eof => return,
                TokenKind::Keyword(Keyword::Frame | Keyword::Remote | Keyword::Frameset | Keyword::Extern)
                    if depth == 0 && self.pos > start =>
                {
                    return
                }
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => depth = depth.saturating_sub(1),
                _ => {}
            }
            self.bump();
        }
    }

    /// Skips the rest of a frame member: through the next `;` or balanced
    /// `{}` block, stopping before the frame's closing brace.
    fn recover_member(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                TokenKind::Eof => return,
                TokenKind::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return;
                    }
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn register(&mut self, frame: FrameDef, name_span: SourceSpan) {
        let name = frame.name.clone();
        match self.builder.add_frame(frame) {
            Ok(()) => {
                self.spans.frames.insert(name, name_span);
            }
            Err(e) => {
                self.error_at(name_span, model_code(&e), e.to_string());
            }
        }
    }

    fn optional_parent(&mut self, frame: &mut FrameDef) -> PResult<()> {
        if self.eat(&TokenKind::Colon) {
            let (p, span) = self.ident("parent frame name")?;
            frame.parent = Some(p);
            self.spans.parents.insert(frame.name.clone(), span);
        }
        Ok(())
    }

    fn frame_decl(&mut self) -> PResult<()> {
        self.expect_kw(Keyword::Frame)?;
        let (name, name_span) = self.ident("frame name")?;
        let mut frame = FrameDef::new(&name);
        self.optional_parent(&mut frame)?;
        self.expect(TokenKind::LBrace)?;
        loop {
            match self.peek() {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Eof => {
                    self.error_expected("`}`");
                    break;
                }
                _ => {
                    if self.member(&mut frame).is_err() {
                        self.recover_member();
                    }
                }
            }
        }
        self.register(frame, name_span);
        Ok(())
    }

    fn remote_decl(&mut self) -> PResult<()> {
        self.expect_kw(Keyword::Remote)?;
        self.expect_kw(Keyword::Frame)?;
        let (name, name_span) = self.ident("frame name")?;
        let mut frame = FrameDef::new(&name);
        self.optional_parent(&mut frame)?;
        self.expect_kw(Keyword::At)?;
        let url = self.string("remote url string")?;
        self.expect(TokenKind::Semi)?;
        frame.kind = FrameKind::RemoteStub { url };
        self.register(frame, name_span);
        Ok(())
    }

    fn frameset_decl(&mut self) -> PResult<()> {
        self.expect_kw(Keyword::Frameset)?;
        let (name, name_span) = self.ident("frameset name")?;
        self.expect_kw(Keyword::From)?;
        self.expect_kw(Keyword::Table)?;
        let table = self.string("table location string")?;
        self.expect_kw(Keyword::Key)?;
        let (key, _) = self.ident("key column name")?;
        let mut frame = FrameDef::new(&name);
        if matches!(self.peek(), TokenKind::Ident(s) if s == "parent") {
            self.bump();
            let (p, span) = self.ident("parent frame name")?;
            frame.parent = Some(p);
            self.spans.parents.insert(name.clone(), span);
        }
        self.expect(TokenKind::Semi)?;
        frame.kind = FrameKind::Frameset { table, key };
        self.register(frame, name_span);
        Ok(())
    }

    fn extern_decl(&mut self) -> PResult<()> {
        self.expect_kw(Keyword::Extern)?;
        if self.eat_kw(Keyword::Frame) {
            let (name, name_span) = self.ident("frame name")?;
            let mut frame = FrameDef::new(&name);
            self.optional_parent(&mut frame)?;
            self.expect(TokenKind::Semi)?;
            frame.kind = FrameKind::ExternalObject;
            self.register(frame, name_span);
            return Ok(());
        }
        if !self.at_kw(Keyword::Function) {
            return Err(self.error_expected("`function` or `frame`"));
        }
        self.bump();
        let (name, span) = self.ident("function name")?;
        self.expect(TokenKind::Slash)?;
        let arity = match self.peek().clone() {
            TokenKind::Int(n) => {
                self.bump();
                n as usize
            }
            _ => return Err(self.error_expected("arity")),
        };
        self.expect(TokenKind::Semi)?;
        match self.builder.declare_extern(&name, arity) {
            Ok(()) => {
                self.spans.externs.insert(name, span);
            }
            Err(e) => {
                self.error_at(span, model_code(&e), e.to_string());
            }
        }
        Ok(())
    }

    fn member(&mut self, frame: &mut FrameDef) -> PResult<()> {
        let start = self.span();
        match self.peek().clone() {
            TokenKind::Keyword(Keyword::Slot) => self.slot_decl(frame),
            TokenKind::Keyword(Keyword::On) => {
                self.bump();
                let (trigger, _) = self.ident("trigger slot name")?;
                let condition = if self.eat_kw(Keyword::If) { Some(self.expr()?) } else { None };
                self.expect(TokenKind::LBrace)?;
                let mut assignments = Vec::new();
                loop {
                    let (slot, _) = self.ident("slot name")?;
                    self.expect(TokenKind::Assign)?;
                    let value = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    assignments.push((slot, value));
                    if self.eat(&TokenKind::RBrace) {
                        break;
                    }
                }
                self.push_action(frame, &trigger, Action::ForwardRule(Rule::forward(&trigger, condition, assignments)), start);
                Ok(())
            }
            TokenKind::Keyword(Keyword::Constraint) => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::Semi)?;
                self.spans.constraints.insert((frame.name.clone(), frame.constraints.len()), start);
                frame.constraints.push(e);
                Ok(())
            }
            TokenKind::Keyword(Keyword::Ask) => {
                self.bump();
                let (slot, _) = self.ident("slot name")?;
                self.expect(TokenKind::Colon)?;
                let prompt = self.string("prompt string")?;
                self.expect(TokenKind::Semi)?;
                self.push_action(frame, &slot, Action::AskUser { prompt }, start);
                Ok(())
            }
            TokenKind::Keyword(Keyword::Rules) => {
                self.bump();
                self.expect_kw(Keyword::From)?;
                let url = self.string("rule repository url")?;
                self.expect(TokenKind::Semi)?;
                if frame.rules_from.is_some() {
                    return Err(self.error_at(start, "DuplicateRulesFrom", format!("frame `{}` already has a rule source", frame.name)));
                }
                frame.rules_from = Some(url);
                Ok(())
            }
            TokenKind::Ident(slot) if self.peek_at(1) == &TokenKind::Assign => {
                self.bump();
                self.bump();
                let value = self.expr()?;
                let condition = if self.eat_kw(Keyword::If) { Some(self.expr()?) } else { None };
                self.expect(TokenKind::Semi)?;
                self.push_action(frame, &slot, Action::BackwardRule(Rule::backward(&slot, value, condition)), start);
                Ok(())
            }
            _ => Err(self.error_expected("member declaration")),
        }
    }

    fn push_action(&mut self, frame: &mut FrameDef, slot: &str, action: Action, span: SourceSpan) {
        self.spans.actions.insert((frame.name.clone(), frame.actions.len()), span);
        frame.actions.push(crate::model::SlotAction { slot: slot.to_string(), action });
    }

    fn slot_decl(&mut self, frame: &mut FrameDef) -> PResult<()> {
        self.expect_kw(Keyword::Slot)?;
        let (name, span) = self.ident("slot name")?;
        self.expect(TokenKind::Colon)?;
        let kind = self.type_()?;
        let mut def = SlotDef::new(&name, kind);
        if self.at_kw(Keyword::Default) {
            let dspan = self.bump().span;
            let v = self.literal(kind)?;
            self.spans.defaults.insert((frame.name.clone(), name.clone()), dspan);
            def.default = Some(v);
        }
        self.expect(TokenKind::Semi)?;
        match frame.add_slot(def) {
            Ok(()) => {
                self.spans.slots.insert((frame.name.clone(), name), span);
                Ok(())
            }
            Err(e) => Err(self.error_at(span, model_code(&e), e.to_string())),
        }
    }

    fn scalar_type(&mut self) -> PResult<ScalarKind> {
        let k = match self.peek() {
            TokenKind::Keyword(Keyword::Integer) => ScalarKind::Integer,
            TokenKind::Keyword(Keyword::Boolean) => ScalarKind::Boolean,
            TokenKind::Keyword(Keyword::String) => ScalarKind::String,
            _ => return Err(self.error_expected("`integer`, `boolean` or `string`")),
        };
        self.bump();
        Ok(k)
    }

    fn type_(&mut self) -> PResult<ValueKind> {
        match self.peek() {
            TokenKind::Keyword(Keyword::Reference) => {
                self.bump();
                Ok(ValueKind::Reference)
            }
            TokenKind::Keyword(Keyword::List) => {
                self.bump();
                self.expect_kw(Keyword::Of)?;
                Ok(ValueKind::List(self.scalar_type()?))
            }
            TokenKind::Keyword(Keyword::Integer | Keyword::Boolean | Keyword::String) => Ok(self.scalar_type()?.into()),
            _ => Err(self.error_expected("type")),
        }
    }

    fn int_literal(&mut self, negative: bool) -> PResult<i64> {
        let span = self.span();
        let TokenKind::Int(n) = self.peek().clone() else {
            return Err(self.error_expected("integer"));
        };
        self.bump();
        let v = if negative {
            if n == 1u64 << 63 {
                Some(i64::MIN)
            } else {
                i64::try_from(n).ok().map(|v| -v)
            }
        } else {
            i64::try_from(n).ok()
        };
        v.ok_or_else(|| self.error_at(span, "IntegerOverflow", "integer literal out of range".into()))
    }

    /// A default value. `declared` decides the element kind of `[]`.
    fn literal(&mut self, declared: ValueKind) -> PResult<Value> {
        match self.peek().clone() {
            TokenKind::LBracket => {
                let span = self.bump().span;
                let mut items = Vec::new();
                if !self.at(&TokenKind::RBracket) {
                    loop {
                        items.push(self.scalar_literal()?);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RBracket)?;
                let elem = match items.first() {
                    Some(v) => match v.kind() {
                        ValueKind::Integer => ScalarKind::Integer,
                        ValueKind::Boolean => ScalarKind::Boolean,
                        ValueKind::String => ScalarKind::String,
                        _ => return Err(self.error_at(span, "SyntaxError", "list elements must be scalars".into())),
                    },
                    None => declared.elem().unwrap_or(ScalarKind::Integer),
                };
                ListValue::from_values(elem, &items)
                    .map(Value::List)
                    .map_err(|i| self.error_at(span, "MixedList", format!("list element {i} has a different kind")))
            }
            _ => self.scalar_literal(),
        }
    }

    fn scalar_literal(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            TokenKind::Minus => {
                self.bump();
                Ok(Value::Integer(self.int_literal(true)?))
            }
            TokenKind::Int(_) => Ok(Value::Integer(self.int_literal(false)?)),
            TokenKind::Str(s) => {
                self.bump();
                Ok(Value::String(s))
            }
            TokenKind::Keyword(Keyword::True) => {
                self.bump();
                Ok(Value::Boolean(true))
            }
            TokenKind::Keyword(Keyword::False) => {
                self.bump();
                Ok(Value::Boolean(false))
            }
            TokenKind::Keyword(Keyword::Frame) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let (name, _) = self.ident("frame name")?;
                self.expect(TokenKind::RParen)?;
                Ok(Value::Reference(name))
            }
            _ => Err(self.error_expected("literal")),
        }
    }

    fn expr(&mut self) -> PResult<Expression> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let span = self.error_span();
            self.depth -= 1;
            return Err(self.error_at(span, "NestingTooDeep", "expression nested too deeply".into()));
        }
        let r = self.or_expr();
        self.depth -= 1;
        r
    }

    fn or_expr(&mut self) -> PResult<Expression> {
        let mut l = self.and_expr()?;
        while self.eat_kw(Keyword::Or) {
            let r = self.and_expr()?;
            l = Expression::binary(BinaryOp::Or, l, r);
        }
        Ok(l)
    }

    fn and_expr(&mut self) -> PResult<Expression> {
        let mut l = self.not_expr()?;
        while self.eat_kw(Keyword::And) {
            let r = self.not_expr()?;
            l = Expression::binary(BinaryOp::And, l, r);
        }
        Ok(l)
    }

    fn not_expr(&mut self) -> PResult<Expression> {
        if self.eat_kw(Keyword::Not) {
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                let span = self.error_span();
                return Err(self.error_at(span, "NestingTooDeep", "expression nested too deeply".into()));
            }
            let e = self.not_expr();
            self.depth -= 1;
            return Ok(Expression::unary(UnaryOp::Not, e?));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expression> {
        let l = self.additive()?;
        let op = match self.peek() {
            TokenKind::Eq => BinaryOp::Eq,
            TokenKind::Ne => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            TokenKind::Keyword(Keyword::In) => BinaryOp::In,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.additive()?;
        Ok(Expression::binary(op, l, r))
    }

    fn additive(&mut self) -> PResult<Expression> {
        let mut l = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.multiplicative()?;
            l = Expression::binary(op, l, r);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expression> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.unary()?;
            l = Expression::binary(op, l, r);
        }
    }

    fn unary(&mut self) -> PResult<Expression> {
        if self.at(&TokenKind::Minus) {
            self.bump();
            if matches!(self.peek(), TokenKind::Int(_)) {
                return Ok(Expression::Literal(Value::Integer(self.int_literal(true)?)));
            }
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                let span = self.error_span();
                return Err(self.error_at(span, "NestingTooDeep", "expression nested too deeply".into()));
            }
            let e = self.unary();
            self.depth -= 1;
            return Ok(Expression::unary(UnaryOp::Neg, e?));
        }
        self.primary()
    }

    fn args(&mut self, close: TokenKind) -> PResult<Vec<Expression>> {
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(&close) {
                return Ok(out);
            }
            if !self.eat(&TokenKind::Comma) {
                let what = format!("`,` or `{}`", super::lexer::punct_text(&close));
                return Err(self.error_expected(&what));
            }
        }
    }

    fn primary(&mut self) -> PResult<Expression> {
        match self.peek().clone() {
            TokenKind::Int(_) => Ok(Expression::Literal(Value::Integer(self.int_literal(false)?))),
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expression::lit(s.as_str()))
            }
            TokenKind::Keyword(Keyword::True) => {
                self.bump();
                Ok(Expression::lit(true))
            }
            TokenKind::Keyword(Keyword::False) => {
                self.bump();
                Ok(Expression::lit(false))
            }
            TokenKind::Keyword(Keyword::Unknown) => {
                self.bump();
                Ok(Expression::Literal(Value::Unknown))
            }
            TokenKind::Keyword(Keyword::Frame) => Ok(Expression::Literal(self.scalar_literal()?)),
            TokenKind::Ident(name) => {
                self.bump();
                if self.eat(&TokenKind::LParen) {
                    let args = self.args(TokenKind::RParen)?;
                    Ok(Expression::Call { name, args })
                } else if self.eat(&TokenKind::Dot) {
                    let (slot, _) = self.ident("slot name")?;
                    Ok(Expression::SlotRef { frame: Some(name), slot })
                } else {
                    Ok(Expression::SlotRef { frame: None, slot: name })
                }
            }
            TokenKind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::LBracket => {
                self.bump();
                Ok(Expression::List(self.args(TokenKind::RBracket)?))
            }
            TokenKind::Keyword(Keyword::Exists) => {
                self.bump();
                let (var, _) = self.ident("variable name")?;
                self.expect_kw(Keyword::In)?;
                let (root, _) = self.ident("frame name")?;
                self.expect_kw(Keyword::Where)?;
                let condition = self.expr()?;
                Ok(Expression::Exists { var, root, condition: Box::new(condition) })
            }
            TokenKind::Keyword(Keyword::Specialize) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let (root, _) = self.ident("frame name")?;
                self.expect(TokenKind::RParen)?;
                Ok(Expression::Specialize { root })
            }
            _ => Err(self.error_expected("expression")),
        }
    }
}

pub(super) fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::DuplicateFrame(_) => "DuplicateFrame",
        ModelError::DuplicateSlot { .. } => "DuplicateSlot",
        ModelError::ReservedSlot { .. } => "ReservedSlot",
        ModelError::DuplicateExtern(_) => "DuplicateExtern",
        ModelError::InvalidIdentifier(_) => "InvalidIdentifier",
        ModelError::ReservedName(_) => "ReservedName",
        ModelError::InheritanceCycle(_) => "InheritanceCycle",
        ModelError::DynamicInheritanceCycle(_) => "DynamicInheritanceCycle",
        ModelError::UnknownParent { .. } => "UnknownParent",
        ModelError::DefaultTypeMismatch { .. } => "DefaultTypeMismatch",
        ModelError::UnknownSlotInConstraint { .. } => "UnknownSlotInConstraint",
        ModelError::InvalidAction { .. } => "InvalidAction",
        ModelError::UnknownFrame(_) => "UnknownFrame",
        ModelError::UnknownSlot { .. } => "UnknownSlot",
    }
}
