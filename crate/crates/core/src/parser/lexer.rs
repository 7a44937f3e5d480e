use std::path::Path;

use crate::diag::{codes, Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Bar,
    Colon,
    Assign,
    At,
    Maplet,
    TotalFn,
    PartialFn,
    Override,
    Union,
    Inter,
    Diff,
    And,
    Or,
    Not,
    Implies,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
    Subset,
    Plus,
    Minus,
    Star,
    Slash,
    DotDot,
    Product,
    Forall,
    Exists,
    EmptySet,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.spelling()),
        }
    }

    fn spelling(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Bar => "|",
            Tok::Colon => ":",
            Tok::Assign => ":=",
            Tok::At => "@",
            Tok::Maplet => "|->",
            Tok::TotalFn => "-->",
            Tok::PartialFn => "+->",
            Tok::Override => "<+",
            Tok::Union => "\\/",
            Tok::Inter => "/\\",
            Tok::Diff => "\\",
            Tok::And => "&",
            Tok::Or => "or",
            Tok::Not => "not",
            Tok::Implies => "=>",
            Tok::Eq => "=",
            Tok::Neq => "/=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::In => "in",
            Tok::NotIn => "/:",
            Tok::Subset => "<:",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::DotDot => "..",
            Tok::Product => "**",
            Tok::Forall => "!",
            Tok::Exists => "#",
            Tok::EmptySet => "{}",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

// Longest match first within each leading character.
const ASCII_SYMBOLS: &[(&str, Tok)] = &[
    ("|->", Tok::Maplet),
    ("-->", Tok::TotalFn),
    ("+->", Tok::PartialFn),
    ("<+", Tok::Override),
    ("<:", Tok::Subset),
    ("<=", Tok::Le),
    ("\\/", Tok::Union),
    ("/\\", Tok::Inter),
    ("/=", Tok::Neq),
    ("/:", Tok::NotIn),
    ("=>", Tok::Implies),
    (">=", Tok::Ge),
    (":=", Tok::Assign),
    ("..", Tok::DotDot),
    ("**", Tok::Product),
    ("(", Tok::LParen),
    (")", Tok::RParen),
    ("{", Tok::LBrace),
    ("}", Tok::RBrace),
    (",", Tok::Comma),
    (".", Tok::Dot),
    ("|", Tok::Bar),
    (":", Tok::Colon),
    ("@", Tok::At),
    ("\\", Tok::Diff),
    ("&", Tok::And),
    ("=", Tok::Eq),
    ("<", Tok::Lt),
    (">", Tok::Gt),
    ("+", Tok::Plus),
    ("-", Tok::Minus),
    ("*", Tok::Star),
    ("/", Tok::Slash),
    ("!", Tok::Forall),
    ("#", Tok::Exists),
];

fn unicode_symbol(c: char) -> Option<Tok> {
    Some(match c {
        '∈' => Tok::In,
        '∉' => Tok::NotIn,
        '⊆' => Tok::Subset,
        '∪' => Tok::Union,
        '∩' => Tok::Inter,
        '∖' => Tok::Diff,
        '∧' => Tok::And,
        '∨' => Tok::Or,
        '⇒' => Tok::Implies,
        '¬' => Tok::Not,
        '↦' => Tok::Maplet,
        '→' => Tok::TotalFn,
        '⇸' => Tok::PartialFn,
        '\u{E103}' => Tok::Override,
        '∀' => Tok::Forall,
        '∃' => Tok::Exists,
        '·' => Tok::Dot,
        '×' => Tok::Product,
        '≠' => Tok::Neq,
        '≤' => Tok::Le,
        '≥' => Tok::Ge,
        '∅' => Tok::EmptySet,
        '÷' => Tok::Slash,
        '−' => Tok::Minus,
        '‥' => Tok::DotDot,
        _ => return None,
    })
}

fn unicode_ident(c: char) -> Option<&'static str> {
    match c {
        'ℕ' => Some("NAT"),
        'ℤ' => Some("INT"),
        'ℙ' => Some("POW"),
        _ => None,
    }
}

/// Splits `text` into tokens. `//` comments run to end of line.
pub fn tokenize(text: &str, file: &Path) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (byte, c) = chars[i];
            let column = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let rest = &line[byte..];
            if rest.starts_with("//") {
                break;
            }
            if c.is_ascii_alphabetic() {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().map(|(_, c)| c).collect();
                let tok = match word.as_str() {
                    "in" => Tok::In,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(word),
                };
                out.push(Token {
                    tok,
                    line: line_no,
                    column,
                    length: i - start,
                });
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().map(|(_, c)| c).collect();
                let value = digits.parse::<i64>().map_err(|_| {
                    Diagnostic::error(
                        codes::E_SYNTAX,
                        span(file, line_no, column, i - start),
                        format!("integer literal `{digits}` out of range"),
                    )
                })?;
                out.push(Token {
                    tok: Tok::Int(value),
                    line: line_no,
                    column,
                    length: i - start,
                });
                continue;
            }
            if let Some((sym, tok)) = ASCII_SYMBOLS.iter().find(|(s, _)| rest.starts_with(s)) {
                let len = sym.chars().count();
                out.push(Token {
                    tok: tok.clone(),
                    line: line_no,
                    column,
                    length: len,
                });
                i += len;
                continue;
            }
            if let Some(tok) = unicode_symbol(c) {
                out.push(Token {
                    tok,
                    line: line_no,
                    column,
                    length: 1,
                });
                i += 1;
                continue;
            }
            if let Some(word) = unicode_ident(c) {
                out.push(Token {
                    tok: Tok::Ident(word.to_string()),
                    line: line_no,
                    column,
                    length: 1,
                });
                i += 1;
                continue;
            }
            return Err(Diagnostic::error(
                codes::E_SYNTAX,
                span(file, line_no, column, 1),
                format!("unexpected character `{c}`"),
            ));
        }
    }
    let last_line = text.lines().count().max(1);
    out.push(Token {
        tok: Tok::Eof,
        line: last_line,
        column: text.lines().last().map_or(1, |l| l.chars().count() + 1),
        length: 1,
    });
    Ok(out)
}

fn span(file: &Path, line: usize, column: usize, length: usize) -> SourceSpan {
    SourceSpan {
        file: file.to_path_buf(),
        line,
        column,
        length: length.max(1),
    }
}
