//! Source locations and diagnostics with stable codes.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

/// A 1-based location inside one file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceSpan {
    pub file: PathBuf,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl Default for SourceSpan {
    fn default() -> Self {
        SourceSpan {
            file: PathBuf::new(),
            line: 1,
            column: 1,
            length: 1,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file.display(), self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable diagnostic codes. Negative tests match on these strings.
pub mod codes {
    pub const E_SYNTAX: &str = "E_SYNTAX";
    pub const E_UNKNOWN_KEYWORD: &str = "E_UNKNOWN_KEYWORD";
    pub const E_DUPLICATE_DECL: &str = "E_DUPLICATE_DECL";
    pub const E_UNINITIALISED: &str = "E_UNINITIALISED";

    pub const E_NO_NODES_AXIOM: &str = "E_NO_NODES_AXIOM";
    pub const E_MALFORMED_PARTITION: &str = "E_MALFORMED_PARTITION";
    pub const E_NO_STATES_AXIOM: &str = "E_NO_STATES_AXIOM";
    pub const E_NO_DONE_STATE: &str = "E_NO_DONE_STATE";
    pub const E_MISSING_BUILTIN: &str = "E_MISSING_BUILTIN";
    pub const E_NO_TOPOLOGY: &str = "E_NO_TOPOLOGY";
    pub const E_BAD_TOPOLOGY: &str = "E_BAD_TOPOLOGY";
    pub const E_UNKNOWN_ANNOTATION: &str = "E_UNKNOWN_ANNOTATION";
    pub const E_UNDECLARED: &str = "E_UNDECLARED";
    pub const E_BAD_VALUE_AXIOM: &str = "E_BAD_VALUE_AXIOM";

    pub const E_MISSING_VARIABLE: &str = "E_MISSING_VARIABLE";
    pub const E_UNTYPED_VARIABLE: &str = "E_UNTYPED_VARIABLE";
    pub const E_BAD_INITIALISATION: &str = "E_BAD_INITIALISATION";

    pub const E_NO_PROC_PARAM: &str = "E_NO_PROC_PARAM";
    pub const E_NO_PC_GUARD: &str = "E_NO_PC_GUARD";
    pub const E_MULTI_PC_GUARD: &str = "E_MULTI_PC_GUARD";
    pub const E_UNKNOWN_STATE: &str = "E_UNKNOWN_STATE";
    pub const E_PARAM_UNTYPED: &str = "E_PARAM_UNTYPED";
    pub const E_NONLOCAL_REF: &str = "E_NONLOCAL_REF";
    pub const E_FOREIGN_ASSIGN: &str = "E_FOREIGN_ASSIGN";
    pub const E_BAD_ACTION: &str = "E_BAD_ACTION";
    pub const E_DUPLICATE_ASSIGN: &str = "E_DUPLICATE_ASSIGN";
    pub const E_MULTI_CHANNEL_ACTION: &str = "E_MULTI_CHANNEL_ACTION";
    pub const E_AMBIGUOUS_KIND: &str = "E_AMBIGUOUS_KIND";
    pub const E_CHANNEL_ORIENTATION: &str = "E_CHANNEL_ORIENTATION";
    pub const E_RECV_GENERAL_GUARD: &str = "E_RECV_GENERAL_GUARD";
    pub const E_UNSUPPORTED_HISTORY: &str = "E_UNSUPPORTED_HISTORY";

    pub const E_MISSING_CONFIG: &str = "E_MISSING_CONFIG";
    pub const E_BAD_CONFIG: &str = "E_BAD_CONFIG";
    pub const E_INFINITE_DOMAIN: &str = "E_INFINITE_DOMAIN";
    pub const E_EVAL: &str = "E_EVAL";
    pub const E_NEGATIVE_COUNTER: &str = "E_NEGATIVE_COUNTER";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: &'static str, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: &'static str, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// One line: `file:line:col: error[CODE]: message`.
    pub fn render(&self, color: bool) -> String {
        let sev = match (self.severity, color) {
            (Severity::Error, true) => "\x1b[1;31merror\x1b[0m",
            (Severity::Warning, true) => "\x1b[1;33mwarning\x1b[0m",
            (Severity::Error, false) => "error",
            (Severity::Warning, false) => "warning",
        };
        format!("{}: {}[{}]: {}", self.span, sev, self.code, self.message)
    }

    fn record(&self) -> DiagnosticRecord<'_> {
        DiagnosticRecord {
            severity: self.severity,
            code: self.code,
            message: &self.message,
            file: self.span.file.to_string_lossy().into_owned(),
            line: self.span.line,
            column: self.span.column,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(false))
    }
}

#[derive(Serialize)]
struct DiagnosticRecord<'a> {
    severity: Severity,
    code: &'a str,
    message: &'a str,
    file: String,
    line: usize,
    column: usize,
}

/// Renders diagnostics as a JSON array of `{severity, code, message, file, line, column}`.
pub fn to_json(diags: &[Diagnostic]) -> String {
    let records: Vec<_> = diags.iter().map(Diagnostic::record).collect();
    serde_json::to_string_pretty(&records).expect("diagnostic records serialize")
}

/// Renders diagnostics one per line.
pub fn to_text(diags: &[Diagnostic], color: bool) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&d.render(color));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_forms() {
        let d = Diagnostic::error(
            codes::E_NO_PC_GUARD,
            SourceSpan {
                file: "m.lbm".into(),
                line: 3,
                column: 5,
                length: 4,
            },
            "event `e` has no pc guard",
        );
        assert_eq!(
            d.render(false),
            "m.lbm:3:5: error[E_NO_PC_GUARD]: event `e` has no pc guard"
        );
        let json: serde_json::Value = serde_json::from_str(&to_json(&[d])).unwrap();
        assert_eq!(json[0]["code"], "E_NO_PC_GUARD");
        assert_eq!(json[0]["line"], 3);
        assert_eq!(json[0]["column"], 5);
        assert_eq!(json[0]["file"], "m.lbm");
    }
}
