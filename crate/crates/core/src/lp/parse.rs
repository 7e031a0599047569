//! Textual L_p.
//!
//! ```text
//! program := block
//! block   := { sep } [ instr { sep { sep } instr } { sep } ]
//! instr   := "new" ident | "set" ident | "get" ident
//!          | "async" "[" [ ident { "," ident } ] "]" "{" block "}"
//! sep     := newline | ";"
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use std::collections::HashSet;

use thiserror::Error;

use super::ast::{Instr, Program};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum WellFormednessError {
    #[error("promise `{0}` is created more than once")]
    DuplicateNew(String),
    #[error("promise `{0}` is used where no earlier `new {0}` is in scope")]
    UseBeforeNew(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("ill-formed program: {0}")]
    WellFormedness(#[from] WellFormednessError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    New,
    Set,
    Get,
    Async,
    LBracket,
    RBracket,
    Comma,
    LBrace,
    RBrace,
    Sep,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::New => "`new`".into(),
            Tok::Set => "`set`".into(),
            Tok::Get => "`get`".into(),
            Tok::Async => "`async`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Sep => "end of line".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let code = raw.split('#').next().unwrap_or("");
        let chars: Vec<(usize, char)> = code.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            let column = i + 1;
            let single = match c {
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                ';' => Some(Tok::Sep),
                _ => None,
            };
            if let Some(tok) = single {
                out.push(Spanned { tok, line, column });
                i += 1;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                let tok = match word.as_str() {
                    "new" => Tok::New,
                    "set" => Tok::Set,
                    "get" => Tok::Get,
                    "async" => Tok::Async,
                    _ => Tok::Ident(word),
                };
                out.push(Spanned { tok, line, column });
            } else {
                return Err(ParseError {
                    line,
                    column,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
        out.push(Spanned {
            tok: Tok::Sep,
            line,
            column: chars.len() + 1,
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn error(&self, message: String) -> ParseError {
        let (line, column) = self
            .toks
            .get(self.pos)
            .map_or(self.end, |s| (s.line, s.column));
        ParseError {
            line,
            column,
            message,
        }
    }

    fn found(&self) -> String {
        self.peek().map_or("end of input".into(), Tok::describe)
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.found())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected a promise name, found {}", self.found()))),
        }
    }

    fn skip_seps(&mut self) {
        while self.peek() == Some(&Tok::Sep) {
            self.pos += 1;
        }
    }

    /// Parses instructions up to (not including) `}` or the end of input.
    fn block(&mut self) -> Result<Vec<Instr>, ParseError> {
        let mut body = Vec::new();
        self.skip_seps();
        while !matches!(self.peek(), None | Some(Tok::RBrace)) {
            body.push(self.instr()?);
            match self.peek() {
                None | Some(Tok::RBrace) => {}
                Some(Tok::Sep) => self.skip_seps(),
                _ => {
                    return Err(self.error(format!(
                        "expected a new line or `;` after an instruction, found {}",
                        self.found()
                    )))
                }
            }
        }
        Ok(body)
    }

    fn instr(&mut self) -> Result<Instr, ParseError> {
        match self.peek() {
            Some(Tok::New) => {
                self.pos += 1;
                Ok(Instr::New(self.ident()?))
            }
            Some(Tok::Set) => {
                self.pos += 1;
                Ok(Instr::Set(self.ident()?))
            }
            Some(Tok::Get) => {
                self.pos += 1;
                Ok(Instr::Get(self.ident()?))
            }
            Some(Tok::Async) => {
                self.pos += 1;
                self.expect(Tok::LBracket)?;
                let mut moved = Vec::new();
                if self.peek() != Some(&Tok::RBracket) {
                    moved.push(self.ident()?);
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        moved.push(self.ident()?);
                    }
                }
                self.expect(Tok::RBracket)?;
                self.expect(Tok::LBrace)?;
                let body = self.block()?;
                self.expect(Tok::RBrace)?;
                Ok(Instr::Async { moved, body })
            }
            _ => Err(self.error(format!(
                "expected `new`, `set`, `get` or `async`, found {}",
                self.found()
            ))),
        }
    }
}

/// Parses and statically checks a program.
pub fn parse_program(text: &str) -> Result<Program, LpError> {
    let toks = lex(text)?;
    let end = toks.last().map_or((1, 1), |s| (s.line, s.column));
    let mut parser = Parser { toks, pos: 0, end };
    let body = parser.block()?;
    if parser.peek().is_some() {
        return Err(parser.error(format!("unmatched {}", parser.found())).into());
    }
    let program = Program::new(body);
    check_well_formed(&program)?;
    Ok(program)
}

/// Every name has at most one `new`, and every use of a name is preceded by
/// its `new`, either earlier in the same body or earlier in an enclosing body
/// before the `async` that leads to the use.
pub fn check_well_formed(program: &Program) -> Result<(), WellFormednessError> {
    fn walk(
        body: &[Instr],
        scope: &mut Vec<String>,
        created: &mut HashSet<String>,
    ) -> Result<(), WellFormednessError> {
        let mark = scope.len();
        let need = |scope: &Vec<String>, p: &String| {
            if scope.contains(p) {
                Ok(())
            } else {
                Err(WellFormednessError::UseBeforeNew(p.clone()))
            }
        };
        for instr in body {
            match instr {
                Instr::New(p) => {
                    if !created.insert(p.clone()) {
                        return Err(WellFormednessError::DuplicateNew(p.clone()));
                    }
                    scope.push(p.clone());
                }
                Instr::Set(p) | Instr::Get(p) => need(scope, p)?,
                Instr::Async { moved, body } => {
                    for p in moved {
                        need(scope, p)?;
                    }
                    walk(body, scope, created)?;
                }
            }
        }
        scope.truncate(mark);
        Ok(())
    }
    walk(&program.body, &mut Vec::new(), &mut HashSet::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_nested_asyncs_and_separators() {
        let p = parse_program(
            "new p; new q   # two promises\n\
             async [] {}\n\
             async [q] {\n  get p\n  set q\n}\n\
             get q; set p\n",
        )
        .unwrap();
        assert_eq!(
            p.body,
            vec![
                Instr::New("p".into()),
                Instr::New("q".into()),
                Instr::Async {
                    moved: vec![],
                    body: vec![]
                },
                Instr::Async {
                    moved: names(&["q"]),
                    body: vec![Instr::Get("p".into()), Instr::Set("q".into())]
                },
                Instr::Get("q".into()),
                Instr::Set("p".into()),
            ]
        );
        assert_eq!(p.task_count(), 3);
        assert_eq!(p.promise_count(), 2);
    }

    #[test]
    fn empty_program_is_valid() {
        assert_eq!(parse_program("").unwrap(), Program::default());
        assert_eq!(parse_program("\n # nothing\n;\n").unwrap(), Program::default());
    }

    #[test]
    fn rendering_round_trips() {
        let text = "new a\nasync [a] {\n    new b\n    async [b] {}\n    set a\n}\nget a\n";
        let p = parse_program(text).unwrap();
        assert_eq!(p.to_string(), text);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn reports_positions() {
        let e = parse_program("new p\nset\n").unwrap_err();
        assert_eq!(
            e,
            LpError::Parse(ParseError {
                line: 2,
                column: 4,
                message: "expected a promise name, found end of line".into()
            })
        );
        let e = parse_program("new p new q").unwrap_err();
        assert!(matches!(e, LpError::Parse(ParseError { line: 1, column: 7, .. })), "{e}");
        let e = parse_program("async [] {\nnew p\n").unwrap_err();
        assert!(matches!(e, LpError::Parse(ParseError { line: 2, .. })), "{e}");
        let e = parse_program("}").unwrap_err();
        assert!(e.to_string().contains("unmatched"), "{e}");
        let e = parse_program("new p$").unwrap_err();
        assert!(matches!(e, LpError::Parse(ParseError { line: 1, column: 6, .. })), "{e}");
    }

    #[test]
    fn duplicate_new_is_ill_formed() {
        assert_eq!(
            parse_program("new p\nnew p\n").unwrap_err(),
            LpError::WellFormedness(WellFormednessError::DuplicateNew("p".into()))
        );
        assert_eq!(
            parse_program("new p\nasync [] { new p }\n").unwrap_err(),
            LpError::WellFormedness(WellFormednessError::DuplicateNew("p".into()))
        );
    }

    #[test]
    fn use_before_new_is_ill_formed() {
        for text in [
            "set p",
            "get p\nnew p",
            "async [p] {}\nnew p",
            "async [] { new p }\nget p",
            "async [] { get p }\nnew p",
        ] {
            assert_eq!(
                parse_program(text).unwrap_err(),
                LpError::WellFormedness(WellFormednessError::UseBeforeNew("p".into())),
                "{text}"
            );
        }
        assert!(parse_program("new p\nasync [] { get p }\nset p").is_ok());
    }
}
