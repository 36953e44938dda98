//! Pre-order traversal over statements and expressions. Inline assembly is
//! not entered.

use solang_parser::pt::{CatchClause, Expression, Statement, Type};

/// Calls `f` on `e` and every expression nested inside it.
pub fn walk_expr<'a>(e: &'a Expression, f: &mut impl FnMut(&'a Expression)) {
    use Expression as E;
    f(e);
    match e {
        E::PostIncrement(_, x)
        | E::PostDecrement(_, x)
        | E::New(_, x)
        | E::Parenthesis(_, x)
        | E::MemberAccess(_, x, _)
        | E::Not(_, x)
        | E::BitwiseNot(_, x)
        | E::Delete(_, x)
        | E::PreIncrement(_, x)
        | E::PreDecrement(_, x)
        | E::UnaryPlus(_, x)
        | E::Negate(_, x) => walk_expr(x, f),
        E::ArraySubscript(_, b, k) => {
            walk_expr(b, f);
            if let Some(k) = k {
                walk_expr(k, f);
            }
        }
        E::ArraySlice(_, b, from, to) => {
            walk_expr(b, f);
            for x in [from, to].into_iter().flatten() {
                walk_expr(x, f);
            }
        }
        E::FunctionCall(_, c, args) => {
            walk_expr(c, f);
            args.iter().for_each(|a| walk_expr(a, f));
        }
        E::FunctionCallBlock(_, c, block) => {
            walk_expr(c, f);
            walk_stmt_exprs(block, f);
        }
        E::NamedFunctionCall(_, c, args) => {
            walk_expr(c, f);
            args.iter().for_each(|a| walk_expr(&a.expr, f));
        }
        E::Power(_, l, r)
        | E::Multiply(_, l, r)
        | E::Divide(_, l, r)
        | E::Modulo(_, l, r)
        | E::Add(_, l, r)
        | E::Subtract(_, l, r)
        | E::ShiftLeft(_, l, r)
        | E::ShiftRight(_, l, r)
        | E::BitwiseAnd(_, l, r)
        | E::BitwiseXor(_, l, r)
        | E::BitwiseOr(_, l, r)
        | E::Less(_, l, r)
        | E::More(_, l, r)
        | E::LessEqual(_, l, r)
        | E::MoreEqual(_, l, r)
        | E::Equal(_, l, r)
        | E::NotEqual(_, l, r)
        | E::And(_, l, r)
        | E::Or(_, l, r)
        | E::Assign(_, l, r)
        | E::AssignOr(_, l, r)
        | E::AssignAnd(_, l, r)
        | E::AssignXor(_, l, r)
        | E::AssignShiftLeft(_, l, r)
        | E::AssignShiftRight(_, l, r)
        | E::AssignAdd(_, l, r)
        | E::AssignSubtract(_, l, r)
        | E::AssignMultiply(_, l, r)
        | E::AssignDivide(_, l, r)
        | E::AssignModulo(_, l, r) => {
            walk_expr(l, f);
            walk_expr(r, f);
        }
        E::ConditionalOperator(_, c, a, b) => {
            walk_expr(c, f);
            walk_expr(a, f);
            walk_expr(b, f);
        }
        E::List(_, params) => {
            for p in params.iter().filter_map(|(_, p)| p.as_ref()) {
                walk_expr(&p.ty, f);
            }
        }
        E::ArrayLiteral(_, items) => items.iter().for_each(|i| walk_expr(i, f)),
        E::Type(_, Type::Mapping { key, value, .. }) => {
            walk_expr(key, f);
            walk_expr(value, f);
        }
        _ => {}
    }
}

/// Calls `f` on every expression in `s`, nested statements included.
pub fn walk_stmt_exprs<'a>(s: &'a Statement, f: &mut impl FnMut(&'a Expression)) {
    walk_stmts(s, &mut |s| match s {
        Statement::Expression(_, e) | Statement::Emit(_, e) => walk_expr(e, f),
        Statement::VariableDefinition(_, decl, init) => {
            walk_expr(&decl.ty, f);
            if let Some(i) = init {
                walk_expr(i, f);
            }
        }
        Statement::If(_, c, ..) | Statement::While(_, c, _) | Statement::DoWhile(_, _, c) => walk_expr(c, f),
        Statement::For(_, _, c, n, _) => {
            for x in [c, n].into_iter().flatten() {
                walk_expr(x, f);
            }
        }
        Statement::Return(_, Some(e)) => walk_expr(e, f),
        Statement::Revert(_, _, args) => args.iter().for_each(|a| walk_expr(a, f)),
        Statement::RevertNamedArgs(_, _, args) | Statement::Args(_, args) => {
            args.iter().for_each(|a| walk_expr(&a.expr, f))
        }
        Statement::Try(_, e, ret, _) => {
            walk_expr(e, f);
            if let Some((params, _)) = ret {
                for p in params.iter().filter_map(|(_, p)| p.as_ref()) {
                    walk_expr(&p.ty, f);
                }
            }
        }
        _ => {}
    });
}

/// Calls `f` on `s` and every statement nested inside it.
pub fn walk_stmts<'a>(s: &'a Statement, f: &mut impl FnMut(&'a Statement)) {
    f(s);
    match s {
        Statement::Block { statements, .. } => statements.iter().for_each(|s| walk_stmts(s, f)),
        Statement::If(_, _, a, b) => {
            walk_stmts(a, f);
            if let Some(b) = b {
                walk_stmts(b, f);
            }
        }
        Statement::While(_, _, b) | Statement::DoWhile(_, b, _) => walk_stmts(b, f),
        Statement::For(_, init, _, _, body) => {
            for x in [init, body].into_iter().flatten() {
                walk_stmts(x, f);
            }
        }
        Statement::Try(_, _, ret, catches) => {
            if let Some((_, body)) = ret {
                walk_stmts(body, f);
            }
            for c in catches {
                match c {
                    CatchClause::Simple(_, _, body) | CatchClause::Named(_, _, _, body) => walk_stmts(body, f),
                }
            }
        }
        _ => {}
    }
}
