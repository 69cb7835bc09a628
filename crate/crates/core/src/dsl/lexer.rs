use super::{Diagnostic, DiagnosticKind, SourceSpan};
use crate::fsm::{is_releaser_name, is_state_name};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    State(String),
    Releaser(String),
    Eq,
    Comma,
    Dot,
    LParen,
    RParen,
    Bar,
    Arrow,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::State(s) => format!("state `{s}`"),
            TokenKind::Releaser(r) => format!("releaser `{r}`"),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Bar => "`|`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

/// Splits source text into tokens. Lexical problems are collected rather
/// than aborting, so one pass reports every bad character.
pub fn tokenize(source: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor { chars: source.chars().peekable(), line: 1, column: 1 };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        let single = |kind| Token { kind, span: SourceSpan::new(line, column, 1) };
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            '/' => {
                cur.bump();
                if cur.peek() == Some('/') {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                } else {
                    errors.push(Diagnostic::new(
                        SourceSpan::new(line, column, 1),
                        DiagnosticKind::UnexpectedChar('/'),
                    ));
                }
            }
            '-' => {
                cur.bump();
                if cur.peek() == Some('>') {
                    cur.bump();
                    tokens.push(Token { kind: TokenKind::Arrow, span: SourceSpan::new(line, column, 2) });
                } else {
                    errors.push(Diagnostic::new(
                        SourceSpan::new(line, column, 1),
                        DiagnosticKind::UnexpectedChar('-'),
                    ));
                }
            }
            '=' | ',' | '.' | '(' | ')' | '|' => {
                cur.bump();
                tokens.push(single(match c {
                    '=' => TokenKind::Eq,
                    ',' => TokenKind::Comma,
                    '.' => TokenKind::Dot,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    _ => TokenKind::Bar,
                }));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                let span = SourceSpan::new(line, column, word.chars().count());
                if is_state_name(&word) {
                    tokens.push(Token { kind: TokenKind::State(word), span });
                } else if is_releaser_name(&word) {
                    tokens.push(Token { kind: TokenKind::Releaser(word), span });
                } else {
                    // Keep a best-guess token so the parser does not cascade.
                    let first = word.chars().next().unwrap_or('_');
                    if first.is_ascii_uppercase() {
                        tokens.push(Token { kind: TokenKind::State(word.clone()), span });
                    } else if first.is_ascii_lowercase() {
                        tokens.push(Token { kind: TokenKind::Releaser(word.clone()), span });
                    }
                    errors.push(Diagnostic::new(span, DiagnosticKind::BadIdentifier(word)));
                }
            }
            other => {
                cur.bump();
                errors.push(Diagnostic::new(
                    SourceSpan::new(line, column, 1),
                    DiagnosticKind::UnexpectedChar(other),
                ));
            }
        }
    }
    tokens.push(Token { kind: TokenKind::Eof, span: SourceSpan::new(cur.line, cur.column, 1) });
    (tokens, errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).0.into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn arrows_and_punctuation() {
        assert_eq!(
            kinds("A=(on->B|x->C)."),
            vec![
                TokenKind::State("A".into()),
                TokenKind::Eq,
                TokenKind::LParen,
                TokenKind::Releaser("on".into()),
                TokenKind::Arrow,
                TokenKind::State("B".into()),
                TokenKind::Bar,
                TokenKind::Releaser("x".into()),
                TokenKind::Arrow,
                TokenKind::State("C".into()),
                TokenKind::RParen,
                TokenKind::Dot,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("// hello\nA // tail"), vec![TokenKind::State("A".into()), TokenKind::Eof]);
    }

    #[test]
    fn spans_are_one_based() {
        let (tokens, _) = tokenize("P = A,\n  A");
        assert_eq!(tokens[4].span, SourceSpan::new(2, 3, 1));
    }

    #[test]
    fn mixed_case_identifier_is_an_error() {
        let (_, errors) = tokenize("Wander");
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].span, SourceSpan::new(1, 1, 6));
    }

    #[test]
    fn stray_characters_each_reported() {
        let (_, errors) = tokenize("A # - ~");
        assert_eq!(errors.len(), 3);
        assert_eq!(errors[1].span.column, 5);
    }
}
