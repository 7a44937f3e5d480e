use crate::ast::{Expr, Ident};
use crate::diag::{codes, Diagnostic, SourceSpan};

use super::Scope;

/// Checks that an expression only mentions symbols local to one process.
pub(crate) struct LocalityCheck<'a> {
    scope: &'a Scope,
    class: &'a Ident,
    proc: &'a Ident,
    params: Vec<Ident>,
    /// Local variables may be read (false for initialisation expressions).
    pub allow_variables: bool,
    /// Carrier sets and class names may appear (typing-guard domains).
    pub allow_sets: bool,
}

impl<'a> LocalityCheck<'a> {
    pub fn new(scope: &'a Scope, class: &'a Ident, proc: &'a Ident) -> Self {
        LocalityCheck {
            scope,
            class,
            proc,
            params: vec![proc.clone()],
            allow_variables: true,
            allow_sets: false,
        }
    }

    pub fn with_params(mut self, params: &[Ident]) -> Self {
        self.params = params.to_vec();
        self
    }

    pub fn check(&self, e: &Expr, span: &SourceSpan, diags: &mut Vec<Diagnostic>) {
        self.go(e, &mut Vec::new(), span, diags);
    }

    fn is_variable(&self, name: &str) -> bool {
        self.scope.lv(self.class.as_str()).iter().any(|v| v == name)
    }

    fn nonlocal(&self, span: &SourceSpan, msg: String) -> Diagnostic {
        Diagnostic::error(codes::E_NONLOCAL_REF, span.clone(), msg)
    }

    fn go(&self, e: &Expr, bound: &mut Vec<Ident>, span: &SourceSpan, diags: &mut Vec<Diagnostic>) {
        let class = self.class.as_str();
        match e {
            Expr::Var(x) => {
                if bound.contains(x) || self.params.contains(x) {
                    return;
                }
                let class_level = self.scope.is_local_scalar(class, x.as_str())
                    || (self.allow_sets
                        && (self.scope.sets.contains(x) || self.scope.is_class(x.as_str())));
                if self.scope.is_local_function(class, x.as_str()) {
                    diags.push(self.nonlocal(
                        span,
                        format!(
                            "`{x}` must be applied to the process parameter `{}`",
                            self.proc
                        ),
                    ));
                } else if !class_level {
                    diags.push(self.nonlocal(
                        span,
                        format!("`{x}` is not local to process class `{class}`"),
                    ));
                }
            }
            Expr::Apply(f, arg) => {
                if let Some(name) = f.as_var().filter(|n| !bound.contains(n)) {
                    if self.scope.is_local_function(class, name.as_str()) {
                        if !self.allow_variables && self.is_variable(name.as_str()) {
                            diags.push(
                                self.nonlocal(
                                    span,
                                    format!("variable `{name}` cannot be read here"),
                                ),
                            );
                        }
                        let own = arg.as_var() == Some(self.proc) && !bound.contains(self.proc);
                        if !own {
                            diags.push(self.nonlocal(
                                span,
                                format!(
                                    "`{name}` is only readable at `{name}({})`, the executing process",
                                    self.proc
                                ),
                            ));
                        }
                        return;
                    }
                }
                self.go(f, bound, span, diags);
                self.go(arg, bound, span, diags);
            }
            Expr::EnumElem { set, elem } => {
                if !self.scope.enum_is_local(class, set.as_str()) {
                    diags.push(self.nonlocal(
                        span,
                        format!("`{elem}` belongs to `{set}`, which is not annotated @{class}"),
                    ));
                }
            }
            Expr::SetComprehension {
                binder,
                domain,
                filter,
                body,
            } => {
                self.go(domain, bound, span, diags);
                bound.push(binder.clone());
                if let Some(f) = filter {
                    self.go(f, bound, span, diags);
                }
                self.go(body, bound, span, diags);
                bound.pop();
            }
            Expr::Quantifier { binders, body, .. } => {
                let depth = bound.len();
                for (n, d) in binders {
                    self.go(d, bound, span, diags);
                    bound.push(n.clone());
                }
                self.go(body, bound, span, diags);
                bound.truncate(depth);
            }
            other => {
                for c in other.children() {
                    self.go(c, bound, span, diags);
                }
            }
        }
    }
}
