use super::lexer::{tokenize, Token, TokenKind};
use super::{check_ast, Alternative, AssemblageAst, Diagnostic, DiagnosticKind, Ident, StateDef};

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<Diagnostic>,
}

enum Terminator {
    Comma,
    Dot,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let tok = self.peek();
        Diagnostic::new(
            tok.span,
            DiagnosticKind::Expected { expected: expected.to_string(), found: tok.kind.describe() },
        )
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<Token, Diagnostic> {
        if self.peek().kind == kind {
            Ok(self.advance())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn state_ident(&mut self, what: &str) -> Result<Ident, Diagnostic> {
        match &self.peek().kind {
            TokenKind::State(name) => {
                let ident = Ident { name: name.clone(), span: self.peek().span };
                self.advance();
                Ok(ident)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn releaser_ident(&mut self) -> Result<Ident, Diagnostic> {
        match &self.peek().kind {
            TokenKind::Releaser(name) => {
                let ident = Ident { name: name.clone(), span: self.peek().span };
                self.advance();
                Ok(ident)
            }
            _ => Err(self.unexpected("releaser name")),
        }
    }

    /// Skips to just past the next `,`, or stops before `.`/EOF.
    fn recover(&mut self) {
        loop {
            match self.peek().kind {
                TokenKind::Eof | TokenKind::Dot => return,
                TokenKind::Comma => {
                    self.advance();
                    return;
                }
                _ => {
                    self.advance();
                }
            }
        }
    }

    fn header(&mut self) -> Result<(Ident, Ident), Diagnostic> {
        let name = self.state_ident("process name")?;
        self.expect(TokenKind::Eq, "`=`")?;
        let start = self.state_ident("start state reference")?;
        self.expect(TokenKind::Comma, "`,`")?;
        Ok((name, start))
    }

    fn alternative(&mut self) -> Result<Alternative, Diagnostic> {
        let releaser = self.releaser_ident()?;
        self.expect(TokenKind::Arrow, "`->`")?;
        let target = self.state_ident("target state")?;
        Ok(Alternative { releaser, target })
    }

    fn definition(&mut self) -> Result<(StateDef, Terminator), Diagnostic> {
        let name = self.state_ident("state definition")?;
        self.expect(TokenKind::Eq, "`=`")?;
        self.expect(TokenKind::LParen, "`(`")?;
        let mut alternatives = vec![self.alternative()?];
        while self.peek().kind == TokenKind::Bar {
            self.advance();
            alternatives.push(self.alternative()?);
        }
        self.expect(TokenKind::RParen, "`|` or `)`")?;
        let term = match self.peek().kind {
            TokenKind::Comma => Terminator::Comma,
            TokenKind::Dot => Terminator::Dot,
            _ => return Err(self.unexpected("`,` or `.`")),
        };
        self.advance();
        Ok((StateDef { name, alternatives }, term))
    }
}

/// Parses assemblage notation into an AST, reporting every diagnostic found.
pub fn parse_assemblage(source: &str) -> Result<AssemblageAst, Vec<Diagnostic>> {
    let (tokens, lex_errors) = tokenize(source);
    let mut p = Parser { tokens, pos: 0, errors: lex_errors };

    let header = match p.header() {
        Ok(h) => Some(h),
        Err(e) => {
            p.errors.push(e);
            p.recover();
            None
        }
    };

    let mut defs = Vec::new();
    let mut finished = false;
    while !p.at_eof() {
        if finished {
            p.errors.push(Diagnostic::new(p.peek().span, DiagnosticKind::TrailingInput));
            break;
        }
        match p.definition() {
            Ok((def, term)) => {
                defs.push(def);
                finished = matches!(term, Terminator::Dot);
            }
            Err(e) => {
                p.errors.push(e);
                p.recover();
                if p.peek().kind == TokenKind::Dot {
                    p.advance();
                    finished = true;
                }
            }
        }
    }
    if defs.is_empty() && p.errors.is_empty() {
        p.errors.push(p.unexpected("state definition"));
    }

    let Some((process_name, start_ref)) = header else {
        return Err(p.errors);
    };
    let ast = AssemblageAst { process_name, start_ref, state_defs: defs };
    if p.errors.is_empty() {
        p.errors = check_ast(&ast);
    }
    if p.errors.is_empty() {
        Ok(ast)
    } else {
        Err(p.errors)
    }
}

/// Byte-level entry point: invalid UTF-8 is reported as a lexical error at
/// the first offending byte.
pub fn parse_assemblage_bytes(bytes: &[u8]) -> Result<AssemblageAst, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_assemblage(text),
        Err(e) => {
            // The valid prefix is guaranteed to decode.
            let prefix = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or_default();
            let line = prefix.matches('\n').count() + 1;
            let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(vec![Diagnostic::new(
                super::SourceSpan::new(line, column, 1),
                DiagnosticKind::InvalidUtf8,
            )])
        }
    }
}
