//! Recursive-descent parser for the `.lbc` / `.lbm` surface syntax.
//!
//! Context files:
//!
//! ```text
//! CONTEXT name
//! [EXTENDS ctx...]
//! [SETS ident...]
//! [CONSTANTS ident...]
//! [AXIOMS (@label: expr [@Class ...])...]
//! END
//! ```
//!
//! Machine files:
//!
//! ```text
//! MACHINE name
//! SEES ctx
//! [VARIABLES ident...]
//! [INVARIANTS (@label: expr)...]
//! EVENTS
//!   initialisation begin (@label: action)... end
//!   (event name [any ident... where (@label: expr)...] then (@label: action)... end)...
//! END
//! ```
//!
//! Expression precedence, weakest first: quantifiers, `=>`, `or`, `&`, `not`,
//! comparisons, `-->`/`+->`, set operators (`\/ /\ \ <+`), `**`, `..`, `+ -`,
//! `* /`, unary minus, `|->`, application.

mod lexer;
pub mod pretty;

use std::collections::BTreeSet;
use std::path::Path;

use crate::ast::*;
use crate::diag::{codes, Diagnostic, SourceSpan};

pub use lexer::{tokenize, Tok, Token};
pub use pretty::{pretty_context, pretty_expr, pretty_machine};

type PResult<T> = Result<T, Diagnostic>;

/// Parses a context file.
pub fn parse_context(text: &str, file: &Path) -> Result<ContextModel, Vec<Diagnostic>> {
    let tokens = tokenize(text, file).map_err(|d| vec![d])?;
    let mut p = Parser::new(tokens, file);
    let ctx = p.context().map_err(|d| vec![d])?;
    let dups = check_context_duplicates(&ctx);
    if dups.is_empty() {
        Ok(ctx)
    } else {
        Err(dups)
    }
}

/// Parses a machine file.
pub fn parse_machine(text: &str, file: &Path) -> Result<MachineModel, Vec<Diagnostic>> {
    let tokens = tokenize(text, file).map_err(|d| vec![d])?;
    let mut p = Parser::new(tokens, file);
    let (mch, init_span) = p.machine().map_err(|d| vec![d])?;
    let mut diags = check_machine_duplicates(&mch);
    for var in &mch.variables {
        if !mch
            .initialisation
            .iter()
            .any(|a| a.value.target() == Some(var))
        {
            diags.push(Diagnostic::error(
                codes::E_UNINITIALISED,
                init_span.clone(),
                format!("initialisation does not assign variable `{var}`"),
            ));
        }
    }
    if diags.is_empty() {
        Ok(mch)
    } else {
        Err(diags)
    }
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str) -> Result<Expr, Vec<Diagnostic>> {
    let file = Path::new("<expr>");
    let tokens = tokenize(text, file).map_err(|d| vec![d])?;
    let mut p = Parser::new(tokens, file);
    let e = p.expr().map_err(|d| vec![d])?;
    p.expect_eof().map_err(|d| vec![d])?;
    Ok(e)
}

fn check_context_duplicates(ctx: &ContextModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut names = BTreeSet::new();
    for n in ctx.sets.iter().chain(&ctx.constants) {
        if !names.insert(n.clone()) {
            diags.push(Diagnostic::error(
                codes::E_DUPLICATE_DECL,
                SourceSpan {
                    file: ctx
                        .axioms
                        .first()
                        .map(|a| a.span.file.clone())
                        .unwrap_or_default(),
                    ..SourceSpan::default()
                },
                format!("`{n}` is declared more than once"),
            ));
        }
    }
    let mut labels = BTreeSet::new();
    for a in &ctx.axioms {
        if !labels.insert(a.label.clone()) {
            diags.push(Diagnostic::error(
                codes::E_DUPLICATE_DECL,
                a.span.clone(),
                format!("duplicate axiom label `{}`", a.label),
            ));
        }
    }
    diags
}

fn check_machine_duplicates(mch: &MachineModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut vars = BTreeSet::new();
    for v in &mch.variables {
        if !vars.insert(v) {
            diags.push(Diagnostic::error(
                codes::E_DUPLICATE_DECL,
                SourceSpan::default(),
                format!("variable `{v}` is declared more than once"),
            ));
        }
    }
    let mut labels = BTreeSet::new();
    for i in &mch.invariants {
        if !labels.insert(&i.label) {
            diags.push(Diagnostic::error(
                codes::E_DUPLICATE_DECL,
                i.span.clone(),
                format!("duplicate invariant label `{}`", i.label),
            ));
        }
    }
    let mut events = BTreeSet::new();
    for e in &mch.events {
        if !events.insert(&e.name) {
            diags.push(Diagnostic::error(
                codes::E_DUPLICATE_DECL,
                e.span.clone(),
                format!("duplicate event `{}`", e.name),
            ));
        }
        let mut params = BTreeSet::new();
        for p in &e.params {
            if !params.insert(p) {
                diags.push(Diagnostic::error(
                    codes::E_DUPLICATE_DECL,
                    e.span.clone(),
                    format!("duplicate parameter `{p}` in event `{}`", e.name),
                ));
            }
        }
        let mut labels = BTreeSet::new();
        for l in e
            .guards
            .iter()
            .map(|g| (&g.label, &g.span))
            .chain(e.actions.iter().map(|a| (&a.label, &a.span)))
        {
            if !labels.insert(l.0) {
                diags.push(Diagnostic::error(
                    codes::E_DUPLICATE_DECL,
                    l.1.clone(),
                    format!("duplicate label `{}` in event `{}`", l.0, e.name),
                ));
            }
        }
    }
    diags
}

const CONTEXT_SECTIONS: &[&str] = &["EXTENDS", "SETS", "CONSTANTS", "AXIOMS", "END"];
const MACHINE_SECTIONS: &[&str] = &["SEES", "VARIABLES", "INVARIANTS", "EVENTS", "END"];

struct Parser<'f> {
    tokens: Vec<Token>,
    pos: usize,
    file: &'f Path,
}

impl<'f> Parser<'f> {
    fn new(tokens: Vec<Token>, file: &'f Path) -> Self {
        Parser {
            tokens,
            pos: 0,
            file,
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn span_here(&self) -> SourceSpan {
        let t = &self.tokens[self.pos];
        SourceSpan {
            file: self.file.to_path_buf(),
            line: t.line,
            column: t.column,
            length: t.length.max(1),
        }
    }

    fn error(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(codes::E_SYNTAX, self.span_here(), msg)
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        self.error(format!(
            "expected {wanted}, found {}",
            self.peek().describe()
        ))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn at_word(&self, word: &str) -> bool {
        self.peek_word() == Some(word)
    }

    fn at_any_word(&self, words: &[&str]) -> bool {
        self.peek_word().is_some_and(|w| words.contains(&w))
    }

    fn expect_word(&mut self, word: &str) -> PResult<()> {
        if self.at_word(word) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Ident::new(s).expect("lexer yields valid identifiers"))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// Identifiers up to the next keyword in `stop`.
    fn ident_list(&mut self, stop: &[&str]) -> PResult<Vec<Ident>> {
        let mut out = Vec::new();
        while let Tok::Ident(w) = self.peek() {
            if stop.contains(&w.as_str()) {
                break;
            }
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn section_keyword(&self, allowed: &[&str]) -> PResult<()> {
        match self.peek() {
            Tok::Ident(w) if allowed.contains(&w.as_str()) => Ok(()),
            Tok::Ident(w) => Err(Diagnostic::error(
                codes::E_UNKNOWN_KEYWORD,
                self.span_here(),
                format!(
                    "unknown keyword `{w}`, expected one of {}",
                    allowed.join(", ")
                ),
            )),
            _ => Err(self.unexpected(&format!("one of {}", allowed.join(", ")))),
        }
    }

    // ---- files ----

    fn context(&mut self) -> PResult<ContextModel> {
        self.expect_word("CONTEXT")?;
        let name = self.ident()?;
        let mut ctx = ContextModel {
            name,
            extends: vec![],
            sets: vec![],
            constants: vec![],
            axioms: vec![],
        };
        let mut stage = 0;
        loop {
            self.section_keyword(&CONTEXT_SECTIONS[stage..])?;
            let kw = self.peek_word().unwrap().to_string();
            self.bump();
            stage = CONTEXT_SECTIONS.iter().position(|s| *s == kw).unwrap() + 1;
            match kw.as_str() {
                "EXTENDS" => ctx.extends = self.ident_list(CONTEXT_SECTIONS)?,
                "SETS" => ctx.sets = self.ident_list(CONTEXT_SECTIONS)?,
                "CONSTANTS" => ctx.constants = self.ident_list(CONTEXT_SECTIONS)?,
                "AXIOMS" => {
                    while *self.peek() == Tok::At {
                        ctx.axioms.push(self.axiom()?);
                    }
                }
                "END" => break,
                _ => unreachable!(),
            }
        }
        self.expect_eof()?;
        Ok(ctx)
    }

    fn label(&mut self) -> PResult<(Ident, SourceSpan)> {
        let span = self.span_here();
        self.expect(Tok::At)?;
        let label = self.ident()?;
        self.expect(Tok::Colon)?;
        Ok((label, span))
    }

    fn axiom(&mut self) -> PResult<Axiom> {
        let (label, span) = self.label()?;
        let predicate = self.expr()?;
        let mut annotations = Vec::new();
        // `@Name` not followed by `:` is an annotation; `@name:` starts the next axiom.
        while *self.peek() == Tok::At && *self.peek_at(2) != Tok::Colon {
            self.bump();
            let a = self.ident()?;
            if !annotations.contains(&a) {
                annotations.push(a);
            }
        }
        Ok(Axiom {
            label,
            predicate,
            annotations,
            span,
        })
    }

    fn labeled_expr(&mut self) -> PResult<Labeled<Expr>> {
        let (label, span) = self.label()?;
        let value = self.expr()?;
        Ok(Labeled { label, value, span })
    }

    fn machine(&mut self) -> PResult<(MachineModel, SourceSpan)> {
        self.expect_word("MACHINE")?;
        let name = self.ident()?;
        self.section_keyword(&["SEES"])?;
        self.bump();
        let sees = self.ident()?;
        let mut variables = Vec::new();
        let mut invariants = Vec::new();
        let mut stage = 1;
        loop {
            self.section_keyword(&MACHINE_SECTIONS[stage..])?;
            let kw = self.peek_word().unwrap().to_string();
            stage = MACHINE_SECTIONS.iter().position(|s| *s == kw).unwrap() + 1;
            match kw.as_str() {
                "VARIABLES" => {
                    self.bump();
                    variables = self.ident_list(MACHINE_SECTIONS)?;
                }
                "INVARIANTS" => {
                    self.bump();
                    while *self.peek() == Tok::At {
                        invariants.push(self.labeled_expr()?);
                    }
                }
                _ => break,
            }
        }
        self.section_keyword(&["EVENTS"])?;
        self.bump();
        if !self.at_any_word(&["initialisation", "Initialisation", "INITIALISATION"]) {
            return Err(self.unexpected("`initialisation`"));
        }
        let init_span = self.span_here();
        self.bump();
        self.expect_word("begin")?;
        let initialisation = self.actions()?;
        self.expect_word("end")?;
        let mut events = Vec::new();
        while self.at_word("event") {
            events.push(self.event()?);
        }
        if !self.at_word("END") {
            return Err(self.unexpected("`event` or `END`"));
        }
        self.bump();
        self.expect_eof()?;
        Ok((
            MachineModel {
                name,
                sees,
                variables,
                invariants,
                initialisation,
                events,
            },
            init_span,
        ))
    }

    fn event(&mut self) -> PResult<EventDecl> {
        let span = self.span_here();
        self.expect_word("event")?;
        let name = self.ident()?;
        let mut params = Vec::new();
        let mut guards = Vec::new();
        if self.at_word("any") {
            self.bump();
            params = self.ident_list(&["where"])?;
            self.expect_word("where")?;
            guards = self.guards()?;
            self.expect_word("then")?;
        } else if self.at_word("where") {
            self.bump();
            guards = self.guards()?;
            self.expect_word("then")?;
        } else if self.at_word("then") || self.at_word("begin") {
            self.bump();
        } else {
            return Err(self.unexpected("`any`, `where`, `then` or `begin`"));
        }
        let actions = self.actions()?;
        self.expect_word("end")?;
        Ok(EventDecl {
            name,
            params,
            guards,
            actions,
            span,
        })
    }

    fn guards(&mut self) -> PResult<Vec<Labeled<Expr>>> {
        let mut out = Vec::new();
        while *self.peek() == Tok::At {
            out.push(self.labeled_expr()?);
        }
        Ok(out)
    }

    fn actions(&mut self) -> PResult<Vec<Labeled<Action>>> {
        let mut out = Vec::new();
        while *self.peek() == Tok::At {
            let (label, span) = self.label()?;
            let value = self.action()?;
            out.push(Labeled { label, value, span });
        }
        Ok(out)
    }

    fn action(&mut self) -> PResult<Action> {
        let var = self.ident()?;
        if self.eat(&Tok::LParen) {
            let index = self.expr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Assign)?;
            let rhs = self.expr()?;
            return Ok(Action::LocalAssign { var, index, rhs });
        }
        self.expect(Tok::Assign)?;
        let rhs_span = self.span_here();
        let rhs = self.expr()?;
        if var == "channels" {
            if let Expr::ChannelCall {
                kind,
                src,
                dst,
                msg,
            } = &rhs
            {
                let op = match kind {
                    ChannelKind::Send => ChannelOp::Send,
                    ChannelKind::Receive => ChannelOp::Receive,
                    other => {
                        return Err(Diagnostic::error(
                            codes::E_SYNTAX,
                            rhs_span,
                            format!("`channels := {}(...)` is not an action form", other.name()),
                        ))
                    }
                };
                return Ok(Action::ChannelAssign {
                    op,
                    src: (**src).clone(),
                    dst: (**dst).clone(),
                    msg: (**msg).clone(),
                });
            }
        }
        Ok(Action::Assign { var, rhs })
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.implies()
    }

    fn implies(&mut self) -> PResult<Expr> {
        let l = self.or()?;
        if self.eat(&Tok::Implies) {
            let r = self.implies()?;
            return Ok(Expr::binary(BinOp::Implies, l, r));
        }
        Ok(l)
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut l = self.and()?;
        while self.eat(&Tok::Or) {
            let r = self.and()?;
            l = Expr::binary(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut l = self.not()?;
        while self.eat(&Tok::And) {
            let r = self.not()?;
            l = Expr::binary(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Not) {
            let e = self.not()?;
            return Ok(Expr::Not(Box::new(e)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let l = self.fun_space()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Neq => BinOp::Neq,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::In => BinOp::In,
            Tok::NotIn => BinOp::NotIn,
            Tok::Subset => BinOp::Subset,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.fun_space()?;
        Ok(Expr::binary(op, l, r))
    }

    fn fun_space(&mut self) -> PResult<Expr> {
        let l = self.set_ops()?;
        let op = match self.peek() {
            Tok::TotalFn => BinOp::TotalFn,
            Tok::PartialFn => BinOp::PartialFn,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.fun_space()?;
        Ok(Expr::binary(op, l, r))
    }

    fn set_ops(&mut self) -> PResult<Expr> {
        let mut l = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Union => Some(BinOp::Union),
                Tok::Inter => Some(BinOp::Inter),
                Tok::Diff => Some(BinOp::Diff),
                Tok::Override => None,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.product()?;
            l = match op {
                Some(op) => Expr::binary(op, l, r),
                None => Expr::FuncOverride(Box::new(l), Box::new(r)),
            };
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut l = self.range()?;
        while self.eat(&Tok::Product) {
            let r = self.range()?;
            l = Expr::binary(BinOp::Product, l, r);
        }
        Ok(l)
    }

    fn range(&mut self) -> PResult<Expr> {
        let l = self.additive()?;
        if self.eat(&Tok::DotDot) {
            let r = self.additive()?;
            return Ok(Expr::Interval(Box::new(l), Box::new(r)));
        }
        Ok(l)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut l = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.multiplicative()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.unary()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            return Ok(match e {
                Expr::Int(v) => Expr::Int(-v),
                other => Expr::binary(BinOp::Sub, Expr::Int(0), other),
            });
        }
        self.maplet()
    }

    fn maplet(&mut self) -> PResult<Expr> {
        let mut l = self.postfix()?;
        while self.eat(&Tok::Maplet) {
            let r = self.postfix()?;
            l = Expr::maplet(l, r);
        }
        Ok(l)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        while *self.peek() == Tok::LParen && matches!(e, Expr::Var(_) | Expr::Apply(..)) {
            self.bump();
            let arg = self.expr()?;
            self.expect(Tok::RParen)?;
            e = Expr::apply(e, arg);
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let span = self.span_here();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::EmptySet => {
                self.bump();
                Ok(Expr::SetExt(vec![]))
            }
            Tok::LBrace => self.brace(),
            Tok::Forall | Tok::Exists => self.quantifier(),
            Tok::Ident(word) => {
                if let Some(kind) = ChannelKind::from_name(&word) {
                    if *self.peek_at(1) == Tok::LParen {
                        return self.channel_call(kind, span);
                    }
                }
                if let Some(b) = BuiltinSet::from_name(&word) {
                    self.bump();
                    return Ok(Expr::Builtin(b));
                }
                match word.as_str() {
                    "TRUE" => {
                        self.bump();
                        Ok(Expr::Bool(true))
                    }
                    "FALSE" => {
                        self.bump();
                        Ok(Expr::Bool(false))
                    }
                    "POW" | "card" if *self.peek_at(1) == Tok::LParen => {
                        self.bump();
                        self.bump();
                        let e = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(if word == "POW" {
                            Expr::PowerSet(Box::new(e))
                        } else {
                            Expr::Card(Box::new(e))
                        })
                    }
                    "partition" if *self.peek_at(1) == Tok::LParen => {
                        self.bump();
                        self.bump();
                        let set = self.expr()?;
                        let mut blocks = Vec::new();
                        while self.eat(&Tok::Comma) {
                            blocks.push(self.expr()?);
                        }
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Partition {
                            set: Box::new(set),
                            blocks,
                        })
                    }
                    _ => Ok(Expr::Var(self.ident()?)),
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn brace(&mut self) -> PResult<Expr> {
        self.expect(Tok::LBrace)?;
        if self.eat(&Tok::RBrace) {
            return Ok(Expr::SetExt(vec![]));
        }
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Dot {
            let span = self.span_here();
            let binder = self.ident()?;
            self.expect(Tok::Dot)?;
            let pred = self.expr()?;
            self.expect(Tok::Bar)?;
            let body = self.expr()?;
            self.expect(Tok::RBrace)?;
            let (domain, filter) = split_comprehension(&binder, pred).ok_or_else(|| {
                Diagnostic::error(
                    codes::E_SYNTAX,
                    span,
                    format!("comprehension over `{binder}` must start with `{binder} in S`"),
                )
            })?;
            return Ok(Expr::SetComprehension {
                binder,
                domain: Box::new(domain),
                filter: filter.map(Box::new),
                body: Box::new(body),
            });
        }
        let mut items = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            items.push(self.expr()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(Expr::SetExt(items))
    }

    fn quantifier(&mut self) -> PResult<Expr> {
        let span = self.span_here();
        let kind = match self.bump().tok {
            Tok::Forall => QuantKind::Forall,
            _ => QuantKind::Exists,
        };
        let mut names = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            names.push(self.ident()?);
        }
        self.expect(Tok::Dot)?;
        let body = self.expr()?;
        split_quantifier(kind, &names, body).ok_or_else(|| {
            let shape = match kind {
                QuantKind::Forall => "x in S => P",
                QuantKind::Exists => "x in S & P",
            };
            Diagnostic::error(
                codes::E_SYNTAX,
                span,
                format!("quantifier body must have the shape `{shape}` for every bound variable"),
            )
        })
    }

    fn channel_call(&mut self, kind: ChannelKind, span: SourceSpan) -> PResult<Expr> {
        self.bump();
        self.expect(Tok::LParen)?;
        let arg = self.expr()?;
        self.expect(Tok::RParen)?;
        let malformed = || {
            Diagnostic::error(
                codes::E_SYNTAX,
                span.clone(),
                format!(
                    "`{}` expects `channels |-> (src |-> dst) |-> msg`",
                    kind.name()
                ),
            )
        };
        // Left spine: channels, (src |-> dst), msg parts...
        let mut spine = Vec::new();
        let mut cur = arg;
        while let Expr::Maplet(l, r) = cur {
            spine.push(*r);
            cur = *l;
        }
        spine.reverse();
        if cur.as_var().map(Ident::as_str) != Some("channels") || spine.len() < 2 {
            return Err(malformed());
        }
        let mut parts = spine.into_iter();
        let (src, dst) = match parts.next() {
            Some(Expr::Maplet(s, d)) => (s, d),
            _ => return Err(malformed()),
        };
        let msg = parts
            .reduce(Expr::maplet)
            .expect("at least one message part");
        Ok(Expr::ChannelCall {
            kind,
            src,
            dst,
            msg: Box::new(msg),
        })
    }
}

/// `x in D [& F]` → (D, F).
fn split_comprehension(binder: &Ident, pred: Expr) -> Option<(Expr, Option<Expr>)> {
    if let Some((v, d)) = pred.as_membership() {
        return (v == binder).then(|| (d.clone(), None));
    }
    if let Expr::Binary(BinOp::And, l, r) = &pred {
        let mut conj = l.conjuncts();
        let first = conj.remove(0);
        let (v, d) = first.as_membership()?;
        if v != binder {
            return None;
        }
        let filter = if conj.is_empty() {
            (**r).clone()
        } else {
            Expr::binary(
                BinOp::And,
                Expr::conjunction(conj.into_iter().cloned()),
                (**r).clone(),
            )
        };
        return Some((d.clone(), Some(filter)));
    }
    None
}

/// Peels the leading `x_i in S_i` conjuncts off a quantifier body.
fn split_quantifier(kind: QuantKind, names: &[Ident], body: Expr) -> Option<Expr> {
    let (guard, rest) = match (kind, &body) {
        (QuantKind::Forall, Expr::Binary(BinOp::Implies, a, b)) => {
            ((**a).clone(), Some((**b).clone()))
        }
        (QuantKind::Forall, _) => return None,
        (QuantKind::Exists, _) => (body.clone(), None),
    };
    let memberships = |e: &Expr| -> Option<Vec<(Ident, Expr)>> {
        let conj = e.conjuncts();
        if conj.len() != names.len() {
            return None;
        }
        conj.iter()
            .zip(names)
            .map(|(c, n)| match c.as_membership() {
                Some((v, d)) if v == n => Some((n.clone(), d.clone())),
                _ => None,
            })
            .collect()
    };
    let (binders, extra) = if let Some(b) = memberships(&guard) {
        (b, None)
    } else if let Some(b) = match &guard {
        Expr::Binary(BinOp::And, l, _) => memberships(l),
        _ => None,
    } {
        let Expr::Binary(BinOp::And, _, r) = &guard else {
            unreachable!()
        };
        (b, Some((**r).clone()))
    } else {
        // Flat conjunction: first n conjuncts are memberships, rest is residue.
        let conj = guard.conjuncts();
        if conj.len() < names.len() {
            return None;
        }
        let head = Expr::conjunction(conj[..names.len()].iter().map(|e| (*e).clone()));
        let b = memberships(&head)?;
        let residue = Expr::conjunction(conj[names.len()..].iter().map(|e| (*e).clone()));
        (b, Some(residue))
    };
    let body = match (kind, extra, rest) {
        (QuantKind::Forall, None, Some(r)) => r,
        (QuantKind::Forall, Some(x), Some(r)) => Expr::binary(BinOp::Implies, x, r),
        (QuantKind::Exists, None, _) => Expr::Bool(true),
        (QuantKind::Exists, Some(x), _) => x,
        (QuantKind::Forall, _, None) => unreachable!(),
    };
    Some(Expr::Quantifier {
        kind,
        binders,
        body: Box::new(body),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap_or_else(|d| panic!("{s}: {d:?}"))
    }

    #[test]
    fn precedence_arithmetic() {
        assert_eq!(
            e("1 + 2 * 3"),
            Expr::binary(
                BinOp::Add,
                Expr::Int(1),
                Expr::binary(BinOp::Mul, Expr::Int(2), Expr::Int(3))
            )
        );
    }

    #[test]
    fn sent_history_guard() {
        let got = e("sent(channels |-> (p |-> q) |-> (request |-> 0)) = 1");
        let want = Expr::binary(
            BinOp::Eq,
            Expr::ChannelCall {
                kind: ChannelKind::Sent,
                src: Box::new(Expr::var("p")),
                dst: Box::new(Expr::var("q")),
                msg: Box::new(Expr::maplet(Expr::var("request"), Expr::Int(0))),
            },
            Expr::Int(1),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn unparenthesized_message_tail_is_regrouped() {
        let a = e("sent(channels |-> (p |-> q) |-> answer |-> r)");
        let b = e("sent(channels |-> (p |-> q) |-> (answer |-> r))");
        assert_eq!(a, b);
    }

    #[test]
    fn comprehension() {
        assert_eq!(
            e("{proc . proc in P | proc |-> sr}"),
            Expr::SetComprehension {
                binder: Ident::from("proc"),
                domain: Box::new(Expr::var("P")),
                filter: None,
                body: Box::new(Expr::maplet(Expr::var("proc"), Expr::var("sr"))),
            }
        );
        let filtered = e("{x . x in S & x > 1 | x}");
        match filtered {
            Expr::SetComprehension {
                filter: Some(f), ..
            } => {
                assert_eq!(*f, e("x > 1"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unicode_comprehension_matches_ascii() {
        assert_eq!(
            e("{proc · proc ∈ P | proc ↦ sr} ∪ {proc · proc ∈ Q | proc ↦ wr}"),
            e("{proc . proc in P | proc |-> sr} \\/ {proc . proc in Q | proc |-> wr}")
        );
    }

    #[test]
    fn maplet_left_assoc() {
        assert_eq!(
            e("a |-> b |-> c"),
            Expr::maplet(Expr::maplet(Expr::var("a"), Expr::var("b")), Expr::var("c"))
        );
    }

    #[test]
    fn quantifier_binders_take_domains() {
        let q = e("!q . q in network(proc) => sent(channels |-> (proc |-> q) |-> request) > 0");
        match q {
            Expr::Quantifier {
                kind: QuantKind::Forall,
                binders,
                body,
            } => {
                assert_eq!(binders[0].0, "q");
                assert_eq!(binders[0].1, e("network(proc)"));
                assert!(matches!(*body, Expr::Binary(BinOp::Gt, ..)));
            }
            other => panic!("{other:?}"),
        }
        let ex = e("#x . x in S");
        assert!(matches!(ex, Expr::Quantifier { ref body, .. } if **body == Expr::Bool(true)));
        assert!(parse_expr("!x . x > 0").is_err());
    }

    #[test]
    fn function_space_and_product() {
        assert_eq!(
            e("Channels = Nodes ** Nodes --> (Messages --> NAT)"),
            Expr::binary(
                BinOp::Eq,
                Expr::var("Channels"),
                Expr::binary(
                    BinOp::TotalFn,
                    Expr::binary(BinOp::Product, Expr::var("Nodes"), Expr::var("Nodes")),
                    Expr::binary(
                        BinOp::TotalFn,
                        Expr::var("Messages"),
                        Expr::Builtin(BuiltinSet::Nat)
                    )
                )
            )
        );
    }

    #[test]
    fn syntax_error_has_span() {
        let d = parse_expr("1 + ").unwrap_err();
        assert_eq!(d[0].code, codes::E_SYNTAX);
        assert_eq!(d[0].span.column, 5);
    }

    #[test]
    fn empty_context_sections() {
        let ctx =
            parse_context("CONTEXT C SETS S CONSTANTS AXIOMS END", Path::new("c.lbc")).unwrap();
        assert_eq!(ctx.name, "C");
        assert_eq!(ctx.sets, vec![Ident::from("S")]);
        assert!(ctx.constants.is_empty());
        assert!(ctx.axioms.is_empty());
    }

    #[test]
    fn axiom_annotations() {
        let ctx = parse_context(
            "CONTEXT C SETS MessagePrefixes CONSTANTS request answer AXIOMS\n\
             @MessagePrefixes: partition(MessagePrefixes, {request}, {answer}) @P @Q\n\
             @other: request /= answer\nEND",
            Path::new("c.lbc"),
        )
        .unwrap();
        assert_eq!(
            ctx.axioms[0].annotations,
            vec![Ident::from("P"), Ident::from("Q")]
        );
        assert!(ctx.axioms[1].annotations.is_empty());
        assert_eq!(ctx.axioms[1].span.line, 3);
    }

    #[test]
    fn unknown_keyword() {
        let d = parse_context("CONTEXT C CONSTNTS a END", Path::new("c.lbc")).unwrap_err();
        assert_eq!(d[0].code, codes::E_UNKNOWN_KEYWORD);
    }

    #[test]
    fn duplicate_declarations() {
        let d = parse_context("CONTEXT C SETS S CONSTANTS S END", Path::new("c.lbc")).unwrap_err();
        assert_eq!(d[0].code, codes::E_DUPLICATE_DECL);
    }

    #[test]
    fn machine_requires_full_initialisation() {
        let src = "MACHINE M SEES C VARIABLES x y INVARIANTS @x_typing: x in NAT \
                   @y_typing: y in NAT EVENTS initialisation begin @a: x := 0 end END";
        let d = parse_machine(src, Path::new("m.lbm")).unwrap_err();
        assert_eq!(d[0].code, codes::E_UNINITIALISED);
    }

    #[test]
    fn machine_accepts_two_channel_actions() {
        let src = "MACHINE M SEES C VARIABLES channels INVARIANTS @channels_typing: channels in Channels \
                   EVENTS initialisation begin @a: channels := emptyChannel end \
                   event e any proc q where @g: proc in P then \
                   @a1: channels := send(channels |-> (proc |-> q) |-> m) \
                   @a2: channels := receive(channels |-> (q |-> proc) |-> m) end END";
        let m = parse_machine(src, Path::new("m.lbm")).unwrap();
        assert_eq!(m.events[0].channel_actions().count(), 2);
    }
}
