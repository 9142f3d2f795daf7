use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::parser::{RawBody, RawDefinition, RawModel, Role};
use super::{Diagnostic, Pos};
use crate::expr::Expr;
use crate::symbolic;

pub(crate) const DISTRIBUTIONS: [&str; 4] = ["Bernoulli", "Normal", "Uniform", "PointMass"];

/// Marginal law of an exogenous variable. All exogenous variables are
/// mutually independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Bernoulli { p: f64 },
    Normal { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
    PointMass { c: f64 },
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Bernoulli { .. } => "Bernoulli",
            Distribution::Normal { .. } => "Normal",
            Distribution::Uniform { .. } => "Uniform",
            Distribution::PointMass { .. } => "PointMass",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Distribution::Bernoulli { p } => alloc::vec![p],
            Distribution::Normal { mu, sigma } => alloc::vec![mu, sigma],
            Distribution::Uniform { a, b } => alloc::vec![a, b],
            Distribution::PointMass { c } => alloc::vec![c],
        }
    }

    pub fn from_parts(name: &str, args: &[f64]) -> Result<Distribution, String> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{name} takes {n} parameter(s), got {}", args.len()))
            }
        };
        let dist = match name {
            "Bernoulli" => {
                arity(1)?;
                Distribution::Bernoulli { p: args[0] }
            }
            "Normal" => {
                arity(2)?;
                Distribution::Normal { mu: args[0], sigma: args[1] }
            }
            "Uniform" => {
                arity(2)?;
                Distribution::Uniform { a: args[0], b: args[1] }
            }
            "PointMass" => {
                arity(1)?;
                Distribution::PointMass { c: args[0] }
            }
            _ => return Err(format!("unknown distribution `{name}`")),
        };
        dist.check()?;
        Ok(dist)
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            Distribution::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(format!("Bernoulli probability {p} is outside [0, 1]"))
            }
            Distribution::Normal { sigma, .. } if sigma <= 0.0 => {
                Err(format!("Normal standard deviation {sigma} must be positive"))
            }
            Distribution::Uniform { a, b } if a >= b => {
                Err(format!("Uniform bounds require a < b, got a = {a}, b = {b}"))
            }
            _ => Ok(()),
        }
    }

    /// True when every draw lies in {0, 1}.
    pub fn is_binary(&self) -> bool {
        match *self {
            Distribution::Bernoulli { .. } => true,
            Distribution::PointMass { c } => c == 0.0 || c == 1.0,
            _ => false,
        }
    }

    /// Finite support, when there is one.
    pub fn finite_support(&self) -> Option<Vec<f64>> {
        match *self {
            Distribution::Bernoulli { p: 0.0 } => Some(alloc::vec![0.0]),
            Distribution::Bernoulli { p: 1.0 } => Some(alloc::vec![1.0]),
            Distribution::Bernoulli { .. } => Some(alloc::vec![0.0, 1.0]),
            Distribution::PointMass { c } => Some(alloc::vec![c]),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Bernoulli { p } => p,
            Distribution::Normal { mu, .. } => mu,
            Distribution::Uniform { a, b } => 0.5 * (a + b),
            Distribution::PointMass { c } => c,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        for (i, p) in self.params().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Exogenous(Distribution),
    Endogenous(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub name: String,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roles {
    pub instrument: String,
    pub exposure: String,
    pub outcome: String,
}

/// A validated structural causal model.
///
/// Definitions are stored in source order, which is a topological order of
/// the implied graph. Instances can only be obtained through validation.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    definitions: Vec<Definition>,
    roles: Roles,
}

impl StructuralModel {
    /// Validates a model assembled in code. Diagnostics point at the lines the
    /// canonical printed form would occupy.
    pub fn new(definitions: Vec<Definition>, roles: Roles) -> Result<StructuralModel, Vec<Diagnostic>> {
        let mut raw = RawModel { definitions: Vec::new(), roles: Vec::new(), line_count: 0 };
        for (i, def) in definitions.into_iter().enumerate() {
            let pos = Pos::new(i + 1, 1);
            let body = match def.body {
                Body::Exogenous(d) => RawBody::Exogenous { dist: d.name().into(), args: d.params(), pos },
                Body::Endogenous(expr) => {
                    let mut refs = Vec::new();
                    expr.for_each_var(&mut |v| refs.push((String::from(v), pos)));
                    RawBody::Endogenous { expr, refs }
                }
            };
            raw.definitions.push(RawDefinition { name: def.name, pos, body });
        }
        let base = raw.definitions.len();
        for (i, (role, name)) in
            [(Role::Instrument, roles.instrument), (Role::Exposure, roles.exposure), (Role::Outcome, roles.outcome)]
                .into_iter()
                .enumerate()
        {
            raw.roles.push((role, name, Pos::new(base + i + 1, 1)));
        }
        raw.line_count = base + 3;
        validate(&raw)
    }

    pub fn definitions(&self) -> &[Definition] {
        &self.definitions
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn instrument(&self) -> &str {
        &self.roles.instrument
    }

    pub fn exposure(&self) -> &str {
        &self.roles.exposure
    }

    pub fn outcome(&self) -> &str {
        &self.roles.outcome
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.definitions.iter().position(|d| d.name == name)
    }

    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name == name)
    }

    /// Exogenous definitions in source order, with their definition index.
    pub fn exogenous(&self) -> impl Iterator<Item = (usize, &str, &Distribution)> + '_ {
        self.definitions.iter().enumerate().filter_map(|(i, d)| match &d.body {
            Body::Exogenous(dist) => Some((i, d.name.as_str(), dist)),
            Body::Endogenous(_) => None,
        })
    }

    pub fn equation(&self, name: &str) -> Option<&Expr> {
        match &self.definition(name)?.body {
            Body::Endogenous(e) => Some(e),
            Body::Exogenous(_) => None,
        }
    }

    /// Equation for `name` with every endogenous reference inlined, except
    /// those listed in `keep`. The result mentions only exogenous variables
    /// and kept names.
    pub fn inline(&self, name: &str, keep: &[&str]) -> Option<Expr> {
        let expr = self.equation(name)?;
        Some(inline_expr(&self.definitions, expr, keep))
    }

    /// The exposure as a function of exogenous variables only (f_X).
    pub fn exposure_equation(&self) -> Expr {
        self.inline(self.exposure(), &[]).expect("validated exposure is endogenous")
    }

    /// The outcome as a function of the exposure and exogenous variables (f_Y).
    pub fn outcome_equation(&self) -> Expr {
        self.inline(self.outcome(), &[self.exposure()]).expect("validated outcome is endogenous")
    }

    /// The outcome with the exposure equation substituted in (reduced form).
    pub fn reduced_form(&self) -> Expr {
        self.inline(self.outcome(), &[]).expect("validated outcome is endogenous")
    }
}

fn inline_expr(defs: &[Definition], expr: &Expr, keep: &[&str]) -> Expr {
    let mut out = expr.clone();
    // Walk definitions backwards: later definitions may refer to earlier ones only.
    for def in defs.iter().rev() {
        if keep.contains(&def.name.as_str()) || !out.references(&def.name) {
            continue;
        }
        if let Body::Endogenous(body) = &def.body {
            out = symbolic::substitute_raw(&out, &def.name, body);
        }
    }
    out
}

/// Semantic validation of a parsed model.
pub fn validate(raw: &RawModel) -> Result<StructuralModel, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut defined: BTreeMap<&str, usize> = BTreeMap::new();
    let mut definitions = Vec::new();

    for (idx, def) in raw.definitions.iter().enumerate() {
        if defined.contains_key(def.name.as_str()) {
            diags.push(Diagnostic::error(format!("`{}` is defined more than once", def.name), def.pos));
            continue;
        }
        match &def.body {
            RawBody::Exogenous { dist, args, pos } => match Distribution::from_parts(dist, args) {
                Ok(d) => definitions.push(Definition { name: def.name.clone(), body: Body::Exogenous(d) }),
                Err(msg) => diags.push(Diagnostic::error(msg, *pos)),
            },
            RawBody::Endogenous { expr, refs } => {
                let mut ok = true;
                for (r, pos) in refs {
                    if defined.contains_key(r.as_str()) {
                        continue;
                    }
                    ok = false;
                    let msg = if r == &def.name {
                        format!("`{r}` refers to itself (cycle)")
                    } else if raw.definitions[idx + 1..].iter().any(|d| &d.name == r) {
                        format!("`{r}` is used before its definition")
                    } else {
                        format!("undefined variable `{r}`")
                    };
                    diags.push(Diagnostic::error(msg, *pos));
                }
                if ok {
                    definitions.push(Definition { name: def.name.clone(), body: Body::Endogenous(expr.clone()) });
                }
            }
        }
        defined.insert(def.name.as_str(), idx);
    }

    let last = Pos::new(raw.line_count.max(1), 1);
    let mut role_names: [Option<(String, Pos)>; 3] = [None, None, None];
    for (role, name, pos) in &raw.roles {
        let slot = &mut role_names[*role as usize];
        if slot.is_some() {
            diags.push(Diagnostic::error(format!("role @{} is given more than once", role.directive()), *pos));
            continue;
        }
        if !defined.contains_key(name.as_str()) {
            diags.push(Diagnostic::error(format!("@{} names undefined variable `{name}`", role.directive()), *pos));
        }
        *slot = Some((name.clone(), *pos));
    }
    for role in [Role::Instrument, Role::Exposure, Role::Outcome] {
        if role_names[role as usize].is_none() {
            diags.push(Diagnostic::error(format!("missing role @{}", role.directive()), last));
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let [Some((z, z_pos)), Some((x, x_pos)), Some((y, y_pos))] = role_names else {
        unreachable!("missing roles reported above");
    };
    if z == x {
        diags.push(Diagnostic::error("instrument and exposure must differ", x_pos));
    }
    if y == z || y == x {
        diags.push(Diagnostic::error("outcome must differ from instrument and exposure", y_pos));
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let model = StructuralModel { definitions, roles: Roles { instrument: z, exposure: x, outcome: y } };
    let line_of = |name: &str| raw.definitions.iter().find(|d| d.name == name).map(|d| d.pos);

    match &model.definition(model.instrument()).map(|d| &d.body) {
        Some(Body::Exogenous(d)) if d.is_binary() => {}
        Some(Body::Exogenous(d)) => diags.push(Diagnostic::error(
            format!("instrument `{}` must be binary (Bernoulli or PointMass at 0/1), found {d}", model.instrument()),
            line_of(model.instrument()).unwrap_or(z_pos),
        )),
        _ => diags.push(Diagnostic::error(
            format!("instrument `{}` must be exogenous", model.instrument()),
            line_of(model.instrument()).unwrap_or(z_pos),
        )),
    }

    match model.equation(model.exposure()) {
        None => diags.push(Diagnostic::error(
            format!("exposure `{}` must be defined by an equation", model.exposure()),
            line_of(model.exposure()).unwrap_or(x_pos),
        )),
        Some(_) => {
            if !model.exposure_equation().references(model.instrument()) {
                diags.push(Diagnostic::error(
                    format!("exposure `{}` does not depend on instrument `{}`", model.exposure(), model.instrument()),
                    line_of(model.exposure()).unwrap_or(x_pos),
                ));
            }
        }
    }

    match model.equation(model.outcome()) {
        None => diags.push(Diagnostic::error(
            format!("outcome `{}` must be defined by an equation", model.outcome()),
            line_of(model.outcome()).unwrap_or(y_pos),
        )),
        Some(eq) => {
            let at = line_of(model.outcome()).unwrap_or(y_pos);
            if eq.references(model.instrument()) {
                diags.push(Diagnostic::error(
                    format!(
                        "instrument appears in outcome equation (`{}` references `{}`)",
                        model.outcome(),
                        model.instrument()
                    ),
                    at,
                ));
            } else if diags.is_empty() && model.outcome_equation().references(model.instrument()) {
                diags.push(Diagnostic::error(
                    format!(
                        "instrument appears in outcome equation through an intermediate variable bypassing `{}`",
                        model.exposure()
                    ),
                    at,
                ));
            }
        }
    }

    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::parse_model;

    fn errors(src: &str) -> Vec<String> {
        parse_model(src).unwrap_err().into_iter().map(|d| d.message).collect()
    }

    const ROLES: &str = "@instrument Z\n@exposure X\n@outcome Y\n";

    #[test]
    fn distribution_parameters_are_checked() {
        assert!(Distribution::from_parts("Bernoulli", &[1.5]).is_err());
        assert!(Distribution::from_parts("Normal", &[0.0, 0.0]).is_err());
        assert!(Distribution::from_parts("Uniform", &[1.0, 1.0]).is_err());
        assert!(Distribution::from_parts("Normal", &[0.0]).is_err());
        assert!(Distribution::from_parts("PointMass", &[-4.0]).is_ok());
    }

    #[test]
    fn use_before_definition_and_self_reference() {
        let msgs = errors(&format!("Z ~ Bernoulli(0.5)\nX = Z + W\nW ~ Normal(0,1)\nY = Y + X\n{ROLES}"));
        assert!(msgs.iter().any(|m| m.contains("`W` is used before its definition")));
        assert!(msgs.iter().any(|m| m.contains("refers to itself")));
    }

    #[test]
    fn redefinition_is_rejected() {
        let msgs = errors(&format!("Z ~ Bernoulli(0.5)\nX = Z\nX = 2*Z\nY = X\n{ROLES}"));
        assert!(msgs[0].contains("defined more than once"));
    }

    #[test]
    fn role_errors() {
        let msgs = errors("Z ~ Bernoulli(0.5)\nX = Z\nY = X\n@instrument Z\n@exposure X\n");
        assert_eq!(msgs, vec![String::from("missing role @outcome")]);
        let msgs = errors("Z ~ Bernoulli(0.5)\nX = Z\nY = X\n@instrument Z\n@exposure Z\n@outcome Y");
        assert!(msgs[0].contains("must differ"));
        let msgs = errors(&format!("Z ~ Normal(0,1)\nX = Z\nY = X\n{ROLES}"));
        assert!(msgs[0].contains("must be binary"));
        let msgs = errors(&format!("Z ~ Bernoulli(0.5)\nU ~ Normal(0,1)\nX = U\nY = X\n{ROLES}"));
        assert!(msgs[0].contains("does not depend on instrument"));
    }

    #[test]
    fn exclusion_restriction_is_structural() {
        let msgs = errors(&format!("Z ~ Bernoulli(0.5)\nX = Z\nY = 2*X^2 + Z\n{ROLES}"));
        assert!(msgs[0].contains("instrument appears in outcome equation"));
        let msgs = errors(&format!("Z ~ Bernoulli(0.5)\nX = Z\nW = Z + 1\nY = X + W\n{ROLES}"));
        assert!(msgs[0].contains("instrument appears in outcome equation"));
        // A mediator downstream of the exposure is fine.
        assert!(parse_model(&format!("Z ~ Bernoulli(0.5)\nX = Z\nW = 2*X\nY = W + 1\n{ROLES}")).is_ok());
    }

    #[test]
    fn point_mass_instrument_at_one_is_binary() {
        assert!(parse_model(&format!("Z ~ PointMass(1)\nX = Z\nY = X\n{ROLES}")).is_ok());
        assert!(parse_model(&format!("Z ~ PointMass(2)\nX = Z\nY = X\n{ROLES}")).is_err());
    }

    #[test]
    fn inlining_stops_at_kept_names() {
        let m = parse_model(&format!(
            "Z ~ Bernoulli(0.5)\nU ~ Normal(0,1)\nW = 2*U\nX = Z + W\nM = X * U\nY = M + W\n{ROLES}"
        ))
        .unwrap();
        let fy = m.outcome_equation();
        assert!(fy.references("X") && fy.references("U") && !fy.references("M") && !fy.references("W"));
        let fx = m.exposure_equation();
        assert!(fx.references("Z") && !fx.references("W"));
        assert!(!m.reduced_form().references("X"));
    }

    #[test]
    fn programmatic_construction_validates() {
        let defs = alloc::vec![
            Definition { name: "Z".into(), body: Body::Exogenous(Distribution::Bernoulli { p: 0.5 }) },
            Definition { name: "X".into(), body: Body::Endogenous(Expr::var("Z")) },
            Definition { name: "Y".into(), body: Body::Endogenous(Expr::var("Z")) },
        ];
        let roles = Roles { instrument: "Z".into(), exposure: "X".into(), outcome: "Y".into() };
        let err = StructuralModel::new(defs, roles).unwrap_err();
        assert_eq!(err[0].line, 3);
    }
}
