//! Recursive-descent parser for MIR source.

use super::lexer::{lex, Tok, Token};
use super::*;

/// Names that cannot be used for locals, params or methods because they are
/// statement keywords or builtin callees.
const RESERVED: &[&str] = &[
    "app", "manifest", "class", "extends", "method", "const", "new", "Intent", "PendingIntent",
    "call", "invoke", "getIntent", "if", "goto", "label", "return", "filter", "action",
    "category", "scheme", "exported", "activity", "service", "receiver", "true", "false",
];

/// Parse MIR source text into a validated [`AppModel`].
///
/// Never panics on malformed input: every failure is reported as a
/// [`MirError::Parse`] with line/column, or [`MirError::Validation`] when the
/// grammar is fine but a model invariant does not hold.
pub fn parse_app(text: &str) -> Result<AppModel, MirError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let model = parser.app()?;
    validate(&model)?;
    Ok(model)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    fn here(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, MirError> {
        let (line, col) = self.here();
        Err(MirError::Parse {
            line,
            col,
            message: message.into(),
        })
    }

    fn expect_tok(&mut self, tok: Tok, what: &str) -> Result<(), MirError> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected {}", what)),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, MirError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(format!("expected {}", what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), MirError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected '{}'", kw)),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s == kw)
    }

    fn string(&mut self, what: &str) -> Result<String, MirError> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(format!("expected {}", what)),
        }
    }

    /// Dotted name: `IDENT ('.' IDENT)*`.
    fn qname(&mut self, what: &str) -> Result<String, MirError> {
        let mut name = self.ident(what)?;
        while matches!(self.peek().map(|t| &t.tok), Some(Tok::Dot)) {
            self.pos += 1;
            name.push('.');
            name.push_str(&self.ident("name segment")?);
        }
        Ok(name)
    }

    fn local_name(&mut self, what: &str) -> Result<String, MirError> {
        let (line, col) = self.here();
        let name = self.ident(what)?;
        if RESERVED.contains(&name.as_str()) {
            return Err(MirError::Parse {
                line,
                col,
                message: format!("reserved word '{}' cannot name a local", name),
            });
        }
        Ok(name)
    }

    fn app(&mut self) -> Result<AppModel, MirError> {
        self.keyword("app")?;
        let package_name = self.string("app name string")?;
        let manifest = self.manifest()?;
        let mut classes = Vec::new();
        while self.at_keyword("class") {
            classes.push(self.class()?);
        }
        if self.peek().is_some() {
            return self.fail("expected 'class' or end of input");
        }
        Ok(AppModel {
            package_name,
            manifest,
            classes,
        })
    }

    fn manifest(&mut self) -> Result<Manifest, MirError> {
        self.keyword("manifest")?;
        self.expect_tok(Tok::LBrace, "'{'")?;
        let mut components = Vec::new();
        loop {
            let kind = match self.peek() {
                Some(Token { tok: Tok::RBrace, .. }) => break,
                Some(Token { tok: Tok::Ident(s), .. }) => match s.as_str() {
                    "activity" => ComponentKind::Activity,
                    "service" => ComponentKind::Service,
                    "receiver" => ComponentKind::BroadcastReceiver,
                    other => return self.fail(format!("unknown component kind '{}'", other)),
                },
                _ => return self.fail("expected component declaration or '}'"),
            };
            self.pos += 1;
            let class_name = self.qname("component class name")?;
            self.expect_tok(Tok::LBrace, "'{'")?;
            let mut exported_attr = None;
            if self.at_keyword("exported") {
                self.pos += 1;
                self.expect_tok(Tok::Colon, "':' after 'exported'")?;
                let b = self.ident("'true' or 'false'")?;
                exported_attr = match b.as_str() {
                    "true" => Some(true),
                    "false" => Some(false),
                    _ => return self.fail("expected 'true' or 'false'"),
                };
            }
            let mut filters = Vec::new();
            while self.at_keyword("filter") {
                filters.push(self.filter()?);
            }
            self.expect_tok(Tok::RBrace, "'}' closing component")?;
            components.push(ComponentDecl {
                kind,
                class_name,
                exported_attr,
                filters,
            });
        }
        self.expect_tok(Tok::RBrace, "'}' closing manifest")?;
        Ok(Manifest { components })
    }

    fn filter(&mut self) -> Result<IntentFilter, MirError> {
        self.keyword("filter")?;
        self.expect_tok(Tok::LBrace, "'{'")?;
        let mut f = IntentFilter::default();
        loop {
            match self.peek() {
                Some(Token { tok: Tok::RBrace, .. }) => break,
                Some(Token { tok: Tok::Ident(s), .. }) => {
                    let which = s.clone();
                    self.pos += 1;
                    let value = self.string("string value")?;
                    match which.as_str() {
                        "action" => f.actions.insert(value),
                        "category" => f.categories.insert(value),
                        "scheme" => f.data_schemes.insert(value),
                        other => {
                            return self.fail(format!("unknown filter entry '{}'", other))
                        }
                    };
                }
                _ => return self.fail("expected filter entry or '}'"),
            }
        }
        self.expect_tok(Tok::RBrace, "'}' closing filter")?;
        Ok(f)
    }

    fn class(&mut self) -> Result<ClassDef, MirError> {
        self.keyword("class")?;
        let name = self.qname("class name")?;
        self.keyword("extends")?;
        let extends = match self.ident("superclass")?.as_str() {
            "Activity" => ClassKind::Activity,
            "Service" => ClassKind::Service,
            "BroadcastReceiver" => ClassKind::BroadcastReceiver,
            "Plain" => ClassKind::Plain,
            other => return self.fail(format!("unknown superclass '{}'", other)),
        };
        self.expect_tok(Tok::LBrace, "'{'")?;
        let mut methods = Vec::new();
        while self.at_keyword("method") {
            methods.push(self.method(&name)?);
        }
        self.expect_tok(Tok::RBrace, "'}' closing class")?;
        Ok(ClassDef {
            name,
            extends,
            methods,
        })
    }

    fn method(&mut self, class_name: &str) -> Result<MethodDef, MirError> {
        self.keyword("method")?;
        let name = self.local_name("method name")?;
        self.expect_tok(Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen)) {
            loop {
                params.push(self.local_name("parameter name")?);
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect_tok(Tok::RParen, "')'")?;
        self.expect_tok(Tok::LBrace, "'{'")?;
        let mut body = Vec::new();
        while !matches!(self.peek().map(|t| &t.tok), Some(Tok::RBrace) | None) {
            let stmt = self.statement(class_name, &name, body.len())?;
            body.push(stmt);
        }
        self.expect_tok(Tok::RBrace, "'}' closing method")?;
        let mut m = MethodDef {
            name,
            params,
            body,
            labels: BTreeMap::new(),
        };
        m.rebuild_labels();
        Ok(m)
    }

    fn operand(&mut self) -> Result<Operand, MirError> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Operand::Str(s))
            }
            Some(Token { tok: Tok::Int(v), .. }) => {
                let v = *v;
                self.pos += 1;
                Ok(Operand::Int(v))
            }
            Some(Token { tok: Tok::Ident(_), .. }) => Ok(Operand::Local(self.local_name("operand")?)),
            _ => self.fail("expected operand"),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<Operand>, MirError> {
        self.expect_tok(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen)) {
            loop {
                args.push(self.operand()?);
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect_tok(Tok::RParen, "')'")?;
        Ok(args)
    }

    fn statement(
        &mut self,
        class_name: &str,
        method_name: &str,
        index: usize,
    ) -> Result<Statement, MirError> {
        let kind = self.statement_kind()?;
        // Trailing annotations, at most one of each.
        let mut site = None;
        let mut synthetic = None;
        while let Some(Token {
            tok: Tok::Annotation { kind: k, value },
            ..
        }) = self.peek()
        {
            let (k, value) = (k.clone(), value.clone());
            match k.as_str() {
                "site" if site.is_none() => {
                    if value.is_empty() {
                        return self.fail("empty @site id");
                    }
                    site = Some(value);
                }
                "synthetic" if synthetic.is_none() => {
                    if value.is_empty() {
                        return self.fail("empty @synthetic tag");
                    }
                    synthetic = Some(value);
                }
                other => return self.fail(format!("duplicate '@{}' annotation", other)),
            }
            self.pos += 1;
        }
        let site_id = SiteId(site.unwrap_or_else(|| {
            format!("{}.{}#{}", class_name, method_name, index)
        }));
        Ok(Statement {
            kind,
            site_id,
            synthetic_tag: synthetic,
        })
    }

    fn statement_kind(&mut self) -> Result<StatementKind, MirError> {
        let first = match self.peek() {
            Some(t) => t.clone(),
            None => return self.fail("expected statement"),
        };
        let word = match &first.tok {
            Tok::Ident(s) => s.clone(),
            _ => return self.fail("expected statement"),
        };
        match word.as_str() {
            "if" => {
                self.pos += 1;
                let cond = self.local_name("condition local")?;
                self.keyword("goto")?;
                let target = self.local_name("label name")?;
                Ok(StatementKind::IfGoto { cond, target })
            }
            "goto" => {
                self.pos += 1;
                let target = self.local_name("label name")?;
                Ok(StatementKind::Goto { target })
            }
            "label" => {
                self.pos += 1;
                let name = self.local_name("label name")?;
                Ok(StatementKind::Label { name })
            }
            "return" => {
                self.pos += 1;
                // A value belongs to the return only when it sits on the same
                // line; otherwise it starts the next statement.
                let value = match self.peek() {
                    Some(t)
                        if t.line == first.line
                            && matches!(t.tok, Tok::Ident(_) | Tok::Str(_) | Tok::Int(_)) =>
                    {
                        Some(self.operand()?)
                    }
                    _ => None,
                };
                Ok(StatementKind::Return { value })
            }
            "call" => {
                self.pos += 1;
                let callee = self.qname("callee name")?;
                let args = self.arg_list()?;
                Ok(StatementKind::ApiCall {
                    dest: None,
                    callee,
                    args,
                })
            }
            "invoke" => {
                self.pos += 1;
                let target = self.qname("invoke target")?;
                let args = self.arg_list()?;
                Ok(StatementKind::LocalCall {
                    dest: None,
                    target,
                    args,
                })
            }
            _ => {
                // Starts with a local: either `x = ...` or `x.method(...)`.
                match self.peek2().map(|t| &t.tok) {
                    Some(Tok::Eq) => self.assignment(),
                    Some(Tok::Dot) => self.receiver_statement(),
                    _ => self.fail("expected '=' or '.' after identifier"),
                }
            }
        }
    }

    fn assignment(&mut self) -> Result<StatementKind, MirError> {
        let dest = self.local_name("local name")?;
        self.expect_tok(Tok::Eq, "'='")?;
        let word = match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => s.clone(),
            _ => return self.fail("expected assignment right-hand side"),
        };
        match word.as_str() {
            "const" => {
                self.pos += 1;
                let value = match self.peek() {
                    Some(Token { tok: Tok::Str(s), .. }) => {
                        let v = ConstValue::Str(s.clone());
                        self.pos += 1;
                        v
                    }
                    Some(Token { tok: Tok::Int(v), .. }) => {
                        let v = ConstValue::Int(*v);
                        self.pos += 1;
                        v
                    }
                    _ => return self.fail("expected string or integer constant"),
                };
                Ok(StatementKind::ConstAssign { dest, value })
            }
            "new" => {
                self.pos += 1;
                self.keyword("Intent")?;
                Ok(StatementKind::NewIntent { dest })
            }
            "PendingIntent" => {
                self.pos += 1;
                self.expect_tok(Tok::Dot, "'.'")?;
                let method = match self.ident("PendingIntent factory method")?.as_str() {
                    "getActivity" => PendingIntentKind::GetActivity,
                    "getService" => PendingIntentKind::GetService,
                    "getForegroundService" => PendingIntentKind::GetForegroundService,
                    "getBroadcast" => PendingIntentKind::GetBroadcast,
                    other => {
                        return self.fail(format!("unknown PendingIntent method '{}'", other))
                    }
                };
                self.expect_tok(Tok::LParen, "'('")?;
                let intent = self.local_name("intent local")?;
                self.expect_tok(Tok::Comma, "','")?;
                let flags = self.operand()?;
                self.expect_tok(Tok::RParen, "')'")?;
                Ok(StatementKind::PendingIntentCreate {
                    dest,
                    method,
                    intent,
                    flags,
                })
            }
            "call" => {
                self.pos += 1;
                let callee = self.qname("callee name")?;
                let args = self.arg_list()?;
                Ok(StatementKind::ApiCall {
                    dest: Some(dest),
                    callee,
                    args,
                })
            }
            "invoke" => {
                self.pos += 1;
                let target = self.qname("invoke target")?;
                let args = self.arg_list()?;
                Ok(StatementKind::LocalCall {
                    dest: Some(dest),
                    target,
                    args,
                })
            }
            "getIntent" => {
                self.pos += 1;
                self.expect_tok(Tok::LParen, "'('")?;
                self.expect_tok(Tok::RParen, "')'")?;
                Ok(StatementKind::GetIncomingIntent { dest })
            }
            _ => {
                // `x = other.getIntentSender()` or `x = other.getExtra("k")`
                let receiver = self.local_name("receiver local")?;
                self.expect_tok(Tok::Dot, "'.'")?;
                let method = self.ident("method name")?;
                match method.as_str() {
                    "getIntentSender" => {
                        self.expect_tok(Tok::LParen, "'('")?;
                        self.expect_tok(Tok::RParen, "')'")?;
                        Ok(StatementKind::IntentSenderGet {
                            dest,
                            pending: receiver,
                        })
                    }
                    "getExtra" => {
                        self.expect_tok(Tok::LParen, "'('")?;
                        let key = self.string("extra key string")?;
                        self.expect_tok(Tok::RParen, "')'")?;
                        Ok(StatementKind::GetExtra {
                            dest,
                            intent: receiver,
                            key,
                        })
                    }
                    other => self.fail(format!("unknown assignment method '{}'", other)),
                }
            }
        }
    }

    fn receiver_statement(&mut self) -> Result<StatementKind, MirError> {
        let receiver = self.local_name("receiver local")?;
        self.expect_tok(Tok::Dot, "'.'")?;
        let method = self.ident("method name")?;
        let mutation = match method.as_str() {
            "setAction" | "addCategory" | "setClass" | "setScheme" => {
                self.expect_tok(Tok::LParen, "'('")?;
                let v = self.operand()?;
                self.expect_tok(Tok::RParen, "')'")?;
                match method.as_str() {
                    "setAction" => Mutation::SetAction(v),
                    "addCategory" => Mutation::AddCategory(v),
                    "setClass" => Mutation::SetClass(v),
                    _ => Mutation::SetScheme(v),
                }
            }
            "putExtra" => {
                self.expect_tok(Tok::LParen, "'('")?;
                let key = self.string("extra key string")?;
                self.expect_tok(Tok::Comma, "','")?;
                let v = self.operand()?;
                self.expect_tok(Tok::RParen, "')'")?;
                Mutation::PutExtra(key, v)
            }
            other => return self.fail(format!("unknown mutation method '{}'", other)),
        };
        Ok(StatementKind::IntentMutate { receiver, mutation })
    }
}
