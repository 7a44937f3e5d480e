//! ASCII pretty-printer. Output reparses to a structurally identical tree.

use crate::ast::*;

const P_QUANT: u8 = 0;
const P_IMPLIES: u8 = 1;
const P_OR: u8 = 2;
const P_AND: u8 = 3;
const P_NOT: u8 = 4;
const P_CMP: u8 = 5;
const P_FUN: u8 = 6;
const P_SET: u8 = 7;
const P_PROD: u8 = 8;
const P_RANGE: u8 = 9;
const P_ADD: u8 = 10;
const P_MUL: u8 = 11;
const P_NEG: u8 = 12;
const P_MAPLET: u8 = 13;
const P_APPLY: u8 = 14;
const P_ATOM: u8 = 15;

enum Assoc {
    Left,
    Right,
    None,
}

fn binop_prec(op: BinOp) -> (u8, Assoc) {
    match op {
        BinOp::Implies => (P_IMPLIES, Assoc::Right),
        BinOp::Or => (P_OR, Assoc::Left),
        BinOp::And => (P_AND, Assoc::Left),
        BinOp::TotalFn | BinOp::PartialFn => (P_FUN, Assoc::Right),
        BinOp::Union | BinOp::Inter | BinOp::Diff => (P_SET, Assoc::Left),
        BinOp::Product => (P_PROD, Assoc::Left),
        BinOp::Add | BinOp::Sub => (P_ADD, Assoc::Left),
        BinOp::Mul | BinOp::Div => (P_MUL, Assoc::Left),
        _ => (P_CMP, Assoc::None),
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Quantifier { .. } => P_QUANT,
        Expr::Binary(op, ..) => binop_prec(*op).0,
        Expr::FuncOverride(..) => P_SET,
        Expr::Not(_) => P_NOT,
        Expr::Interval(..) => P_RANGE,
        Expr::Int(v) if *v < 0 => P_NEG,
        Expr::Maplet(..) => P_MAPLET,
        Expr::Apply(..) => P_APPLY,
        _ => P_ATOM,
    }
}

/// Renders an expression in the ASCII surface syntax.
pub fn pretty_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, 0, &mut out);
    out
}

fn write_expr(e: &Expr, min: u8, out: &mut String) {
    let p = prec(e);
    let paren = p < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Int(v) => out.push_str(&v.to_string()),
        Expr::Bool(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
        Expr::Var(v) => out.push_str(v.as_str()),
        // Enum elements print as their bare name; the analyzer re-resolves them.
        Expr::EnumElem { elem, .. } => out.push_str(elem.as_str()),
        Expr::Builtin(b) => out.push_str(b.name()),
        Expr::Apply(f, a) => {
            write_expr(f, P_APPLY, out);
            out.push('(');
            write_expr(a, 0, out);
            out.push(')');
        }
        Expr::Maplet(l, r) => {
            write_expr(l, P_MAPLET, out);
            out.push_str(" |-> ");
            write_expr(r, P_MAPLET + 1, out);
        }
        Expr::Binary(op, l, r) => {
            let (p, assoc) = binop_prec(*op);
            let (lm, rm) = match assoc {
                Assoc::Left => (p, p + 1),
                Assoc::Right => (p + 1, p),
                Assoc::None => (p + 1, p + 1),
            };
            write_expr(l, lm, out);
            out.push(' ');
            out.push_str(op.ascii());
            out.push(' ');
            write_expr(r, rm, out);
        }
        Expr::FuncOverride(l, r) => {
            write_expr(l, P_SET, out);
            out.push_str(" <+ ");
            write_expr(r, P_SET + 1, out);
        }
        Expr::Not(x) => {
            out.push_str("not ");
            write_expr(x, P_NOT, out);
        }
        Expr::SetExt(items) => {
            out.push('{');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(x, 0, out);
            }
            out.push('}');
        }
        Expr::SetComprehension {
            binder,
            domain,
            filter,
            body,
        } => {
            out.push('{');
            out.push_str(binder.as_str());
            out.push_str(" . ");
            out.push_str(binder.as_str());
            out.push_str(" in ");
            write_expr(domain, P_CMP + 1, out);
            if let Some(f) = filter {
                out.push_str(" & ");
                write_expr(f, P_AND + 1, out);
            }
            out.push_str(" | ");
            write_expr(body, 0, out);
            out.push('}');
        }
        Expr::Quantifier {
            kind,
            binders,
            body,
        } => {
            out.push_str(match kind {
                QuantKind::Forall => "!",
                QuantKind::Exists => "#",
            });
            let names: Vec<&str> = binders.iter().map(|(n, _)| n.as_str()).collect();
            out.push_str(&names.join(", "));
            out.push_str(" . ");
            let members = Expr::conjunction(
                binders
                    .iter()
                    .map(|(n, d)| Expr::binary(BinOp::In, Expr::Var(n.clone()), d.clone())),
            );
            write_expr(&members, P_AND, out);
            match kind {
                QuantKind::Forall => {
                    out.push_str(" => ");
                    write_expr(body, P_IMPLIES, out);
                }
                QuantKind::Exists => {
                    if **body != Expr::Bool(true) {
                        out.push_str(" & ");
                        write_expr(body, P_AND + 1, out);
                    }
                }
            }
        }
        Expr::Interval(lo, hi) => {
            write_expr(lo, P_ADD, out);
            out.push_str(" .. ");
            write_expr(hi, P_ADD, out);
        }
        Expr::Card(x) => {
            out.push_str("card(");
            write_expr(x, 0, out);
            out.push(')');
        }
        Expr::PowerSet(x) => {
            out.push_str("POW(");
            write_expr(x, 0, out);
            out.push(')');
        }
        Expr::Partition { set, blocks } => {
            out.push_str("partition(");
            write_expr(set, 0, out);
            for b in blocks {
                out.push_str(", ");
                write_expr(b, 0, out);
            }
            out.push(')');
        }
        Expr::ChannelCall {
            kind,
            src,
            dst,
            msg,
        } => {
            out.push_str(kind.name());
            out.push_str("(channels |-> (");
            write_expr(src, P_MAPLET, out);
            out.push_str(" |-> ");
            write_expr(dst, P_MAPLET + 1, out);
            out.push_str(") |-> ");
            write_expr(msg, P_MAPLET + 1, out);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

fn pretty_action(a: &Action) -> String {
    match a {
        Action::LocalAssign { var, index, rhs } => {
            format!("{var}({}) := {}", pretty_expr(index), pretty_expr(rhs))
        }
        Action::Assign { var, rhs } => format!("{var} := {}", pretty_expr(rhs)),
        Action::ChannelAssign { op, src, dst, msg } => {
            let kind = match op {
                ChannelOp::Send => ChannelKind::Send,
                ChannelOp::Receive => ChannelKind::Receive,
            };
            let call = Expr::ChannelCall {
                kind,
                src: Box::new(src.clone()),
                dst: Box::new(dst.clone()),
                msg: Box::new(msg.clone()),
            };
            format!("channels := {}", pretty_expr(&call))
        }
    }
}

fn words(out: &mut String, keyword: &str, items: &[Ident]) {
    out.push_str(keyword);
    out.push('\n');
    if !items.is_empty() {
        let names: Vec<&str> = items.iter().map(Ident::as_str).collect();
        out.push_str("  ");
        out.push_str(&names.join(" "));
        out.push('\n');
    }
}

pub fn pretty_context(ctx: &ContextModel) -> String {
    let mut out = format!("CONTEXT {}\n", ctx.name);
    if !ctx.extends.is_empty() {
        words(&mut out, "EXTENDS", &ctx.extends);
    }
    words(&mut out, "SETS", &ctx.sets);
    words(&mut out, "CONSTANTS", &ctx.constants);
    out.push_str("AXIOMS\n");
    for a in &ctx.axioms {
        out.push_str(&format!("  @{}: {}", a.label, pretty_expr(&a.predicate)));
        for ann in &a.annotations {
            out.push_str(&format!(" @{ann}"));
        }
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

pub fn pretty_machine(m: &MachineModel) -> String {
    let mut out = format!("MACHINE {}\nSEES {}\n", m.name, m.sees);
    words(&mut out, "VARIABLES", &m.variables);
    out.push_str("INVARIANTS\n");
    for i in &m.invariants {
        out.push_str(&format!("  @{}: {}\n", i.label, pretty_expr(&i.value)));
    }
    out.push_str("EVENTS\n  initialisation\n  begin\n");
    for a in &m.initialisation {
        out.push_str(&format!("    @{}: {}\n", a.label, pretty_action(&a.value)));
    }
    out.push_str("  end\n");
    for e in &m.events {
        out.push_str(&format!("\n  event {}\n", e.name));
        if !e.params.is_empty() {
            let names: Vec<&str> = e.params.iter().map(Ident::as_str).collect();
            out.push_str(&format!("  any {} where\n", names.join(" ")));
        } else {
            out.push_str("  where\n");
        }
        for g in &e.guards {
            out.push_str(&format!("    @{}: {}\n", g.label, pretty_expr(&g.value)));
        }
        out.push_str("  then\n");
        for a in &e.actions {
            out.push_str(&format!("    @{}: {}\n", a.label, pretty_action(&a.value)));
        }
        out.push_str("  end\n");
    }
    out.push_str("END\n");
    out
}
