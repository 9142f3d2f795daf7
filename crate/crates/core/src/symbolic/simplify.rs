//! Canonical simplification.
//!
//! Sums are flattened into `coefficient * monomial` terms and like terms are
//! combined; products are flattened into `base^exponent` factors with a
//! numeric coefficient. Both are sorted with [`canonical_cmp`] before being
//! rebuilt as left-associated binary chains. Products over sums are never
//! expanded.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::expr::{canonical_cmp, Expr};

type Factors = Vec<(Expr, f64)>;

/// Simplifies `e`: constant folding, 0/1 identities, flattening and
/// canonical ordering of sums and products. Idempotent.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Add(..) | Expr::Sub(..) => build_sum(sum_terms(e)),
        Expr::Neg(_) | Expr::Mul(..) | Expr::Div(..) | Expr::Pow(..) => {
            let (coef, factors) = product_parts(e);
            build_product(coef, &factors)
        }
        Expr::Exp(a) => {
            let inner = simplify(a);
            match inner {
                Expr::Const(c) if libm::exp(c).is_finite() => Expr::Const(libm::exp(c)),
                Expr::Log(x) => *x,
                other => Expr::exp(other),
            }
        }
        Expr::Log(a) => {
            let inner = simplify(a);
            match inner {
                Expr::Const(c) if c > 0.0 => Expr::Const(libm::log(c)),
                Expr::Exp(x) => *x,
                other => Expr::log(other),
            }
        }
    }
}

fn is_integer(x: f64) -> bool {
    libm::trunc(x) == x && x.abs() < 9.0e15
}

fn cmp_factors(a: &[(Expr, f64)], b: &[(Expr, f64)]) -> Ordering {
    for ((ea, xa), (eb, xb)) in a.iter().zip(b.iter()) {
        let ord = canonical_cmp(ea, eb).then(xa.total_cmp(xb));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

fn collect_sum(e: &Expr, sign: f64, out: &mut Vec<(f64, Factors)>) {
    match e {
        Expr::Add(a, b) => {
            collect_sum(a, sign, out);
            collect_sum(b, sign, out);
        }
        Expr::Sub(a, b) => {
            collect_sum(a, sign, out);
            collect_sum(b, -sign, out);
        }
        Expr::Neg(a) => collect_sum(a, -sign, out),
        _ => {
            let (coef, factors) = product_parts(e);
            // Unit multiples of a sum are flattened (matching `Neg`); other
            // numeric multiples stay as a single term.
            if coef.abs() == 1.0
                && factors.len() == 1
                && factors[0].1 == 1.0
                && matches!(factors[0].0, Expr::Add(..) | Expr::Sub(..))
            {
                let mut inner = Vec::new();
                collect_sum(&factors[0].0, 1.0, &mut inner);
                out.extend(inner.into_iter().map(|(c, f)| (c * coef * sign, f)));
            } else {
                out.push((coef * sign, factors));
            }
        }
    }
}

fn sum_terms(e: &Expr) -> Vec<(f64, Factors)> {
    let mut raw = Vec::new();
    collect_sum(e, 1.0, &mut raw);
    // Constants sort last.
    raw.sort_by(|(_, a), (_, b)| a.is_empty().cmp(&b.is_empty()).then_with(|| cmp_factors(a, b)));
    let mut merged: Vec<(f64, Factors)> = Vec::with_capacity(raw.len());
    for (coef, factors) in raw {
        match merged.last_mut() {
            Some((c, f)) if *f == factors => *c += coef,
            _ => merged.push((coef, factors)),
        }
    }
    merged.retain(|(c, _)| *c != 0.0);
    merged
}

fn build_sum(terms: Vec<(f64, Factors)>) -> Expr {
    let mut iter = terms.into_iter();
    let Some((c0, f0)) = iter.next() else {
        return Expr::Const(0.0);
    };
    let mut acc = build_product(c0, &f0);
    for (c, f) in iter {
        acc = if c < 0.0 { Expr::sub(acc, build_product(-c, &f)) } else { Expr::add(acc, build_product(c, &f)) };
    }
    acc
}

/// Splits `e` into a numeric coefficient and sorted, merged factors.
fn product_parts(e: &Expr) -> (f64, Factors) {
    let mut coef = 1.0;
    let mut raw = Vec::new();
    collect_product(e, 1.0, &mut coef, &mut raw);
    if coef == 0.0 {
        return (0.0, Vec::new());
    }
    raw.sort_by(|(a, _), (b, _)| canonical_cmp(a, b));
    let mut merged: Factors = Vec::with_capacity(raw.len());
    for (base, exponent) in raw {
        match merged.last_mut() {
            Some((b, x)) if *b == base => *x += exponent,
            _ => merged.push((base, exponent)),
        }
    }
    merged.retain(|(_, x)| *x != 0.0);
    (coef, merged)
}

fn fold_const(c: f64, exponent: f64, coef: &mut f64, out: &mut Factors) {
    let value = if exponent == 1.0 { c } else { libm::pow(c, exponent) };
    if value.is_finite() {
        *coef *= value;
    } else {
        out.push((Expr::Const(c), exponent));
    }
}

// `mult` is always an integer: only integer powers are pushed inside their base.
fn collect_product(e: &Expr, mult: f64, coef: &mut f64, out: &mut Factors) {
    match e {
        Expr::Const(c) => fold_const(*c, mult, coef, out),
        Expr::Var(_) => out.push((e.clone(), mult)),
        Expr::Neg(a) => {
            if libm::fmod(mult, 2.0) != 0.0 {
                *coef = -*coef;
            }
            collect_product(a, mult, coef, out);
        }
        Expr::Mul(a, b) => {
            collect_product(a, mult, coef, out);
            collect_product(b, mult, coef, out);
        }
        Expr::Div(a, b) => {
            collect_product(a, mult, coef, out);
            collect_product(b, -mult, coef, out);
        }
        Expr::Pow(a, k) => {
            if is_integer(*k) && is_integer(k * mult) {
                collect_product(a, k * mult, coef, out);
            } else {
                let base = simplify(a);
                match base {
                    Expr::Const(c) => {
                        let v = libm::pow(c, *k);
                        if v.is_finite() {
                            fold_const(v, mult, coef, out);
                        } else {
                            out.push((Expr::Const(c), k * mult));
                        }
                    }
                    other => out.push((other, k * mult)),
                }
            }
        }
        Expr::Add(..) | Expr::Sub(..) | Expr::Exp(_) | Expr::Log(_) => {
            let n = simplify(e);
            match n {
                Expr::Const(c) => fold_const(c, mult, coef, out),
                Expr::Neg(_) | Expr::Mul(..) | Expr::Div(..) | Expr::Pow(..) | Expr::Var(_) => {
                    collect_product(&n, mult, coef, out)
                }
                other => out.push((other, mult)),
            }
        }
    }
}

fn factor_expr(base: &Expr, exponent: f64) -> Expr {
    if exponent == 1.0 {
        base.clone()
    } else {
        Expr::pow(base.clone(), exponent)
    }
}

fn build_product(coef: f64, factors: &[(Expr, f64)]) -> Expr {
    if coef == 0.0 {
        return Expr::Const(0.0);
    }
    let mut num = factors.iter().filter(|(_, x)| *x > 0.0).map(|(b, x)| factor_expr(b, *x));
    let den: Vec<Expr> = factors.iter().filter(|(_, x)| *x < 0.0).map(|(b, x)| factor_expr(b, -*x)).collect();

    let numerator = match num.next() {
        None => Expr::Const(coef),
        Some(first) => {
            let head = if coef == 1.0 {
                first
            } else if coef == -1.0 {
                Expr::neg(first)
            } else {
                Expr::mul(Expr::Const(coef), first)
            };
            num.fold(head, Expr::mul)
        }
    };
    let mut den = den.into_iter();
    match den.next() {
        None => numerator,
        Some(first) => Expr::div(numerator, den.fold(first, Expr::mul)),
    }
}
