//! Lexer, term grammar and the scenario syntax tree.
//!
//! The grammar is documented in `docs/scenario-format.md`. Everything except
//! the site block is parsed into generic [`Term`]s; their meaning is assigned
//! by [`crate::compile`].

use std::fmt;

use serde::Serialize;

/// A 1-based source position. Positions never take part in equality, so a
/// re-serialized scenario compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Pos {}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            pos,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

/// One or more positioned errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Eq,
    Colon,
    Arrow,
    Plus,
    Star,
    Newline,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Newline => f.write_str("end of line"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos { line: ln + 1, col: i + 1 };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let single = match c {
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '=' => Some(Tok::Eq),
                ':' => Some(Tok::Colon),
                '+' => Some(Tok::Plus),
                '*' => Some(Tok::Star),
                _ => None,
            };
            if let Some(t) = single {
                out.push((t, pos));
                i += 1;
                continue;
            }
            if c == '-' && chars.get(i + 1) == Some(&'>') {
                out.push((Tok::Arrow, pos));
                i += 2;
                continue;
            }
            if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let n = s
                    .parse::<i64>()
                    .map_err(|_| Diagnostic::new(pos, format!("integer {s} is out of range")))?;
                out.push((Tok::Int(n), pos));
                continue;
            }
            if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
                continue;
            }
            return Err(Diagnostic::new(pos, format!("unexpected character `{c}`")));
        }
        out.push((Tok::Newline, Pos { line: ln + 1, col: chars.len() + 1 }));
    }
    let last = text.lines().count() + 1;
    out.push((Tok::Eof, Pos { line: last, col: 1 }));
    Ok(out)
}

/// A generic term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub kind: TermKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermKind {
    Int(i64),
    Ident(String),
    /// `name(arg, key = value, ...)`
    Call(String, Vec<Arg>),
    /// `name [..]` or `name { .. }`
    Tagged(String, Box<Term>),
    List(Vec<Term>),
    Brace(Vec<Entry>),
    /// `a + b + ...`
    Sum(Vec<Term>),
    /// `2g` or `2*g`
    Scaled(i64, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub key: Option<String>,
    pub value: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Bare(Term),
    Assign(String, Term, Pos),
    Map(Term, Term),
}

impl Term {
    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TermKind::Ident(s) => Some(s),
            _ => None,
        }
    }

    /// Head name of an identifier, call or tagged term.
    pub fn head(&self) -> Option<&str> {
        match &self.kind {
            TermKind::Ident(s) | TermKind::Call(s, _) | TermKind::Tagged(s, _) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TermKind::Int(n) => write!(f, "{n}"),
            TermKind::Ident(s) => f.write_str(s),
            TermKind::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    if let Some(k) = &a.key {
                        write!(f, "{k} = ")?;
                    }
                    write!(f, "{}", a.value)?;
                }
                f.write_str(")")
            }
            TermKind::Tagged(name, body) => write!(f, "{name} {body}"),
            TermKind::List(items) => {
                f.write_str("[")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str("]")
            }
            TermKind::Brace(entries) => {
                if entries.is_empty() {
                    return f.write_str("{}");
                }
                f.write_str("{ ")?;
                for (i, e) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match e {
                        Entry::Bare(t) => write!(f, "{t}")?,
                        Entry::Assign(k, v, _) => write!(f, "{k} = {v}")?,
                        Entry::Map(a, b) => write!(f, "{a} -> {b}")?,
                    }
                }
                f.write_str(" }")
            }
            TermKind::Sum(parts) => {
                for (i, t) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            TermKind::Scaled(n, s) => write!(f, "{n}{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Name {
    pub text: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectDecl {
    pub name: Name,
    pub elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphismDecl {
    pub name: Name,
    pub src: Name,
    pub dst: Name,
    pub images: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SiteDecl {
    pub objects: Vec<ObjectDecl>,
    pub morphisms: Vec<MorphismDecl>,
    pub mode: Option<Name>,
    pub closure_depth: Option<(i64, Pos)>,
    pub pos: Pos,
}

/// `keyword NAME = term`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: Name,
    pub def: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub site: SiteDecl,
    pub functor: Option<Term>,
    pub probes: Option<Term>,
    pub ops: Vec<Decl>,
    pub elements: Vec<Decl>,
    pub families: Vec<Decl>,
    pub transforms: Vec<Decl>,
    /// The definition is a brace of `OP -> OP` entries.
    pub correspondences: Vec<Decl>,
    pub checks: Vec<Term>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn unexpected<T>(&self, what: &str) -> PResult<T> {
        Err(Diagnostic::new(self.pos(), format!("expected {what}, found {}", self.peek())))
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<Pos> {
        if *self.peek() == t {
            Ok(self.bump().1)
        } else {
            self.unexpected(what)
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().1;
                Ok(Name { text: s, pos })
            }
            _ => self.unexpected(what),
        }
    }

    /// Element labels may be identifiers or integers.
    fn label(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().1;
                Ok(Name { text: s, pos })
            }
            Tok::Int(n) => {
                let pos = self.bump().1;
                Ok(Name { text: n.to_string(), pos })
            }
            // the point of `pt`
            Tok::Star => {
                let pos = self.bump().1;
                Ok(Name { text: "*".into(), pos })
            }
            _ => self.unexpected("an element label"),
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline | Tok::Eof => Ok(()),
            _ => self.unexpected("end of line"),
        }
    }

    /// Inside brackets, braces and parentheses line breaks are insignificant.
    fn term(&mut self) -> PResult<Term> {
        self.skip_newlines();
        let first = self.atom()?;
        self.skip_newlines_if(|t| *t == Tok::Plus);
        if *self.peek() != Tok::Plus {
            return Ok(first);
        }
        let pos = first.pos;
        let mut parts = vec![first];
        while *self.peek() == Tok::Plus {
            self.bump();
            self.skip_newlines();
            parts.push(self.atom()?);
        }
        Ok(Term {
            kind: TermKind::Sum(parts),
            pos,
        })
    }

    /// Skips newlines only when the next significant token satisfies `pred`.
    fn skip_newlines_if(&mut self, pred: impl Fn(&Tok) -> bool) {
        let mut j = self.i;
        while self.toks[j].0 == Tok::Newline && j + 1 < self.toks.len() {
            j += 1;
        }
        if pred(&self.toks[j].0) {
            self.i = j;
        }
    }

    fn atom(&mut self) -> PResult<Term> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                if let Tok::Star = self.peek() {
                    self.bump();
                    let s = self.name("an element label after `*`")?;
                    return Ok(Term {
                        kind: TermKind::Scaled(n, s.text),
                        pos,
                    });
                }
                if let Tok::Ident(s) = self.peek().clone() {
                    // `2g`: a coefficient written against a label
                    let next = self.pos();
                    if next.line == pos.line && next.col == pos.col + n.to_string().len() {
                        self.bump();
                        return Ok(Term {
                            kind: TermKind::Scaled(n, s),
                            pos,
                        });
                    }
                }
                Ok(Term {
                    kind: TermKind::Int(n),
                    pos,
                })
            }
            Tok::Ident(s) => {
                self.bump();
                let kind = match self.peek() {
                    Tok::LParen => {
                        self.bump();
                        TermKind::Call(s, self.args()?)
                    }
                    Tok::LBracket | Tok::LBrace => TermKind::Tagged(s, Box::new(self.atom()?)),
                    _ => TermKind::Ident(s),
                };
                Ok(Term { kind, pos })
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_newlines();
                    if *self.peek() == Tok::RBracket {
                        self.bump();
                        break;
                    }
                    items.push(self.term()?);
                    self.skip_newlines();
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RBracket => {}
                        _ => return self.unexpected("`,` or `]`"),
                    }
                }
                Ok(Term {
                    kind: TermKind::List(items),
                    pos,
                })
            }
            Tok::LBrace => {
                self.bump();
                let mut entries = Vec::new();
                loop {
                    self.skip_newlines();
                    if *self.peek() == Tok::RBrace {
                        self.bump();
                        break;
                    }
                    entries.push(self.entry()?);
                    // entries are separated by commas or line breaks
                    let had_newline = *self.peek() == Tok::Newline;
                    self.skip_newlines();
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RBrace => {}
                        _ if had_newline => {}
                        _ => return self.unexpected("`,`, a line break or `}`"),
                    }
                }
                Ok(Term {
                    kind: TermKind::Brace(entries),
                    pos,
                })
            }
            _ => self.unexpected("a value"),
        }
    }

    fn entry(&mut self) -> PResult<Entry> {
        let pos = self.pos();
        if let (Tok::Ident(k), Tok::Eq) = (self.peek().clone(), self.toks[self.i + 1].0.clone()) {
            self.bump();
            self.bump();
            return Ok(Entry::Assign(k, self.term()?, pos));
        }
        let lhs = self.term()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            return Ok(Entry::Map(lhs, self.term()?));
        }
        Ok(Entry::Bare(lhs))
    }

    fn args(&mut self) -> PResult<Vec<Arg>> {
        let mut args = Vec::new();
        loop {
            self.skip_newlines();
            if *self.peek() == Tok::RParen {
                self.bump();
                return Ok(args);
            }
            let key = match (self.peek().clone(), self.toks[self.i + 1].0.clone()) {
                (Tok::Ident(k), Tok::Eq) => {
                    self.bump();
                    self.bump();
                    Some(k)
                }
                _ => None,
            };
            args.push(Arg { key, value: self.term()? });
            self.skip_newlines();
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {}
                _ => return self.unexpected("`,` or `)`"),
            }
        }
    }

    fn site_block(&mut self, site: &mut SiteDecl) -> PResult<()> {
        self.expect(Tok::LBrace, "`{` after `site`")?;
        loop {
            self.skip_newlines();
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(());
                }
                Tok::Ident(word) if word == "object" => {
                    self.bump();
                    let name = self.name("an object name")?;
                    self.expect(Tok::Eq, "`=` after the object name")?;
                    self.expect(Tok::LBracket, "`[` opening the element list")?;
                    let mut elements = Vec::new();
                    loop {
                        self.skip_newlines();
                        if *self.peek() == Tok::RBracket {
                            self.bump();
                            break;
                        }
                        elements.push(self.label()?.text);
                        self.skip_newlines();
                        match self.peek() {
                            Tok::Comma => {
                                self.bump();
                            }
                            Tok::RBracket => {}
                            _ => return self.unexpected("`,` or `]`"),
                        }
                    }
                    site.objects.push(ObjectDecl { name, elements });
                }
                Tok::Ident(word) if word == "mode" && self.toks[self.i + 1].0 == Tok::Eq => {
                    self.bump();
                    self.bump();
                    site.mode = Some(self.name("`full` or `generated`")?);
                }
                Tok::Ident(word) if word == "closure_depth" && self.toks[self.i + 1].0 == Tok::Eq => {
                    self.bump();
                    self.bump();
                    let pos = self.pos();
                    match self.peek().clone() {
                        Tok::Int(n) => {
                            self.bump();
                            site.closure_depth = Some((n, pos));
                        }
                        _ => return self.unexpected("an integer"),
                    }
                }
                Tok::Ident(_) => {
                    let name = self.name("a morphism name")?;
                    if *self.peek() != Tok::Colon {
                        return Err(Diagnostic::new(
                            name.pos,
                            format!(
                                "unknown site entry `{}`; expected `object`, `mode`, `closure_depth` or `NAME: SRC -> DST [...]`",
                                name.text
                            ),
                        ));
                    }
                    self.bump();
                    let src = self.name("a source object")?;
                    self.expect(Tok::Arrow, "`->`")?;
                    let dst = self.name("a target object")?;
                    self.expect(Tok::LBracket, "`[` opening the image list")?;
                    let mut images = Vec::new();
                    loop {
                        self.skip_newlines();
                        if *self.peek() == Tok::RBracket {
                            self.bump();
                            break;
                        }
                        images.push(self.label()?);
                        self.skip_newlines();
                        match self.peek() {
                            Tok::Comma => {
                                self.bump();
                            }
                            Tok::RBracket => {}
                            _ => return self.unexpected("`,` or `]`"),
                        }
                    }
                    site.morphisms.push(MorphismDecl { name, src, dst, images });
                }
                _ => return self.unexpected("a site entry or `}`"),
            }
            match self.peek() {
                Tok::Newline | Tok::Comma | Tok::RBrace => {
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    }
                }
                _ => return self.unexpected("end of line"),
            }
        }
    }

    fn decl(&mut self, keyword: &str) -> PResult<Decl> {
        let name = self.name(&format!("a name after `{keyword}`"))?;
        self.expect(Tok::Eq, "`=`")?;
        let def = self.term()?;
        Ok(Decl { name, def })
    }

    fn scenario(&mut self) -> Result<Scenario, Diagnostics> {
        let mut sc = Scenario::default();
        let mut errors = Vec::new();
        let mut seen_site = false;
        loop {
            self.skip_newlines();
            if *self.peek() == Tok::Eof {
                break;
            }
            let res = self.statement(&mut sc, &mut seen_site);
            match res.and_then(|_| self.end_of_statement()) {
                Ok(()) => {}
                Err(d) => {
                    errors.push(d);
                    // resynchronise at the next line that starts a statement
                    while !matches!(self.peek(), Tok::Eof) {
                        if *self.peek() == Tok::Newline {
                            self.bump();
                            if matches!(self.peek(), Tok::Ident(s) if KEYWORDS.contains(&s.as_str())) {
                                break;
                            }
                        } else {
                            self.bump();
                        }
                    }
                }
            }
        }
        if !seen_site && errors.is_empty() {
            errors.push(Diagnostic::new(Pos { line: 1, col: 1 }, "missing `site { ... }` block"));
        }
        if sc.functor.is_none() && errors.is_empty() {
            errors.push(Diagnostic::new(Pos { line: 1, col: 1 }, "missing `functor = ...` line"));
        }
        if errors.is_empty() {
            Ok(sc)
        } else {
            Err(Diagnostics(errors))
        }
    }

    fn statement(&mut self, sc: &mut Scenario, seen_site: &mut bool) -> PResult<()> {
        let pos = self.pos();
        let word = match self.peek().clone() {
            Tok::Ident(w) => w,
            _ => return self.unexpected("a statement keyword"),
        };
        self.bump();
        match word.as_str() {
            "site" => {
                if *seen_site {
                    return Err(Diagnostic::new(pos, "second `site` block"));
                }
                *seen_site = true;
                sc.site.pos = pos;
                self.site_block(&mut sc.site)
            }
            "functor" => {
                if sc.functor.is_some() {
                    return Err(Diagnostic::new(pos, "second `functor` line"));
                }
                self.expect(Tok::Eq, "`=` after `functor`")?;
                sc.functor = Some(self.term()?);
                Ok(())
            }
            "probes" => {
                if sc.probes.is_some() {
                    return Err(Diagnostic::new(pos, "second `probes` block"));
                }
                if *self.peek() != Tok::LBrace {
                    return self.unexpected("`{` after `probes`");
                }
                sc.probes = Some(self.atom()?);
                Ok(())
            }
            "op" => {
                let d = self.decl("op")?;
                sc.ops.push(d);
                Ok(())
            }
            "element" => {
                let d = self.decl("element")?;
                sc.elements.push(d);
                Ok(())
            }
            "family" => {
                let d = self.decl("family")?;
                sc.families.push(d);
                Ok(())
            }
            "transform" => {
                let d = self.decl("transform")?;
                sc.transforms.push(d);
                Ok(())
            }
            "correspond" => {
                let name = self.name("a correspondence name")?;
                if *self.peek() != Tok::LBrace {
                    return self.unexpected("`{` after the correspondence name");
                }
                let def = self.atom()?;
                sc.correspondences.push(Decl { name, def });
                Ok(())
            }
            "checks" => {
                if *self.peek() != Tok::LBrace {
                    return self.unexpected("`{` after `checks`");
                }
                let body = self.atom()?;
                let TermKind::Brace(entries) = body.kind else { unreachable!() };
                for e in entries {
                    match e {
                        Entry::Bare(t) => sc.checks.push(t),
                        Entry::Assign(_, _, p) => return Err(Diagnostic::new(p, "a check cannot be an assignment")),
                        Entry::Map(t, _) => return Err(Diagnostic::new(t.pos, "a check cannot be a mapping")),
                    }
                }
                Ok(())
            }
            other => Err(Diagnostic::new(
                pos,
                format!(
                    "unknown statement `{other}`; expected one of {}",
                    KEYWORDS.join(", ")
                ),
            )),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "site",
    "functor",
    "probes",
    "op",
    "element",
    "family",
    "transform",
    "correspond",
    "checks",
];

/// Parses scenario text into its syntax tree. Names are not resolved here;
/// see [`crate::compile::validate`].
pub fn parse(text: &str) -> Result<Scenario, Diagnostics> {
    let toks = lex(text)?;
    Parser { toks, i: 0 }.scenario()
}

impl Scenario {
    /// Canonical text. Parsing it gives back an equal scenario.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("site {\n");
        for o in &self.site.objects {
            out.push_str(&format!("  object {} = [{}]\n", o.name.text, o.elements.join(", ")));
        }
        for m in &self.site.morphisms {
            let imgs: Vec<&str> = m.images.iter().map(|n| n.text.as_str()).collect();
            out.push_str(&format!(
                "  {}: {} -> {} [{}]\n",
                m.name.text,
                m.src.text,
                m.dst.text,
                imgs.join(", ")
            ));
        }
        if let Some(mode) = &self.site.mode {
            out.push_str(&format!("  mode = {}\n", mode.text));
        }
        if let Some((d, _)) = &self.site.closure_depth {
            out.push_str(&format!("  closure_depth = {d}\n"));
        }
        out.push_str("}\n");
        if let Some(f) = &self.functor {
            out.push_str(&format!("functor = {f}\n"));
        }
        if let Some(p) = &self.probes {
            out.push_str(&format!("probes {p}\n"));
        }
        for (kw, decls) in [
            ("op", &self.ops),
            ("element", &self.elements),
            ("family", &self.families),
            ("transform", &self.transforms),
        ] {
            for d in decls {
                out.push_str(&format!("{kw} {} = {}\n", d.name.text, d.def));
            }
        }
        for d in &self.correspondences {
            out.push_str(&format!("correspond {} {}\n", d.name.text, d.def));
        }
        out.push_str("checks {\n");
        for c in &self.checks {
            out.push_str(&format!("  {c}\n"));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal() {
        let sc = parse("site {\n}\nfunctor = rankvect { max_rank = 3 }\nop sq = poly [0, 0, 1]\n").unwrap();
        assert_eq!(sc.ops.len(), 1);
        assert_eq!(sc.ops[0].def.to_string(), "poly [0, 0, 1]");
    }

    #[test]
    fn positions_point_at_the_offending_token() {
        let err = parse("site {\n  object X = [a, b]\n  f: X -> Y [a b]\n}\n").unwrap_err();
        assert_eq!(err.0[0].pos.line, 3);
        assert_eq!(err.0[0].pos.col, 16);
    }

    #[test]
    fn monoid_sums() {
        let sc = parse("site {\n}\nfunctor = rankvect {}\nelement e = phi_sum([2g + e, 3*e], pt)\n").unwrap();
        assert_eq!(sc.elements[0].def.to_string(), "phi_sum([2g + e, 3e], pt)");
    }

    #[test]
    fn unknown_statement() {
        let err = parse("site {\n}\nfunctor = rankvect {}\nfoo bar\n").unwrap_err();
        assert_eq!((err.0[0].pos.line, err.0[0].pos.col), (4, 1));
        assert!(err.0[0].message.contains("unknown statement"));
    }

    #[test]
    fn multi_line_blocks() {
        let text = "site {\n  object X = [a, b]\n  mode = full\n}\nfunctor = rankvect { max_rank = 3 }\nprobes {\n  policy = exhaustive\n  bound = 2\n}\nchecks {\n  functor_laws\n  naturality(\n    sq\n  )\n}\n";
        let sc = parse(text).unwrap();
        assert_eq!(sc.checks.len(), 2);
        assert_eq!(parse(&sc.to_text()).unwrap(), sc);
    }
}
