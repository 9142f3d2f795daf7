//! Draws of exogenous noise, evaluation under interventions, and per-unit
//! potential-outcome effects.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{apply_div, apply_log, apply_pow, check_finite, EvalError, Expr};
use crate::rng;
use crate::scm::{Body, Distribution, StructuralModel};
use crate::symbolic::{differentiate, simplify, substitute};

/// Expression with variables resolved to definition slots.
#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Slot(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Exp(Box<Node>),
    Log(Box<Node>),
}

impl Node {
    fn compile(e: &Expr, model: &StructuralModel) -> Node {
        let go = |x: &Expr| Box::new(Node::compile(x, model));
        match e {
            Expr::Const(c) => Node::Const(*c),
            Expr::Var(name) => Node::Slot(model.index_of(name).expect("validated model resolves every name")),
            Expr::Neg(a) => Node::Neg(go(a)),
            Expr::Add(a, b) => Node::Add(go(a), go(b)),
            Expr::Sub(a, b) => Node::Sub(go(a), go(b)),
            Expr::Mul(a, b) => Node::Mul(go(a), go(b)),
            Expr::Div(a, b) => Node::Div(go(a), go(b)),
            Expr::Pow(a, k) => Node::Pow(go(a), *k),
            Expr::Exp(a) => Node::Exp(go(a)),
            Expr::Log(a) => Node::Log(go(a)),
        }
    }

    fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Node::Const(c) => return Ok(*c),
            Node::Slot(i) => return Ok(values[*i]),
            Node::Neg(a) => -a.eval(values)?,
            Node::Add(a, b) => a.eval(values)? + b.eval(values)?,
            Node::Sub(a, b) => a.eval(values)? - b.eval(values)?,
            Node::Mul(a, b) => a.eval(values)? * b.eval(values)?,
            Node::Div(a, b) => apply_div(a.eval(values)?, b.eval(values)?)?,
            Node::Pow(a, k) => apply_pow(a.eval(values)?, *k)?,
            Node::Exp(a) => libm::exp(a.eval(values)?),
            Node::Log(a) => apply_log(a.eval(values)?)?,
        };
        check_finite(v)
    }
}

/// Exogenous values for one unit, in exogenous definition order.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDraw {
    pub unit_index: u64,
    pub values: Vec<f64>,
}

impl UnitDraw {
    /// Builds a draw from explicit values; every exogenous variable must be given.
    pub fn from_pairs(model: &StructuralModel, unit_index: u64, pairs: &[(&str, f64)]) -> Option<UnitDraw> {
        let values = model
            .exogenous()
            .map(|(_, name, _)| pairs.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
            .collect::<Option<Vec<f64>>>()?;
        Some(UnitDraw { unit_index, values })
    }

    pub fn get(&self, model: &StructuralModel, name: &str) -> Option<f64> {
        model.exogenous().position(|(_, n, _)| n == name).map(|k| self.values[k])
    }

    pub fn to_map(&self, model: &StructuralModel) -> BTreeMap<String, f64> {
        model.exogenous().zip(&self.values).map(|((_, n, _), v)| (String::from(n), *v)).collect()
    }
}

/// Forced values for a set of variables (the do-operator).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Intervention {
    assignments: Vec<(String, f64)>,
}

impl Intervention {
    pub fn none() -> Intervention {
        Intervention::default()
    }

    pub fn set(target: &str, value: f64) -> Intervention {
        Intervention { assignments: alloc::vec![(String::from(target), value)] }
    }

    /// Adds an assignment; later assignments to the same target replace earlier ones.
    pub fn and(mut self, target: &str, value: f64) -> Intervention {
        self.assignments.retain(|(t, _)| t != target);
        self.assignments.push((String::from(target), value));
        self
    }

    pub fn assignments(&self) -> &[(String, f64)] {
        &self.assignments
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    UnknownTarget(String),
    Eval(EvalError),
}

impl core::fmt::Display for EngineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EngineError::UnknownTarget(t) => write!(f, "intervention target `{t}` is not a model variable"),
            EngineError::Eval(e) => write!(f, "evaluation failed: {e}"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<EvalError> for EngineError {
    fn from(e: EvalError) -> Self {
        EngineError::Eval(e)
    }
}

/// One unit's potential outcomes under do(Z=0) and do(Z=1) and its
/// unit-level effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitEffects {
    pub z: f64,
    pub x: f64,
    pub y: f64,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub beta_zx: f64,
    pub beta_zy: f64,
    /// Structural dY/dX at the unit's natural values.
    pub dydx: f64,
    /// Structural dX/dZ at the unit's natural values.
    pub dxdz: f64,
    /// Reduced-form dY/dZ at the unit's natural values.
    pub dydz: f64,
    /// Chord slope beta_zy / beta_zx; absent when |beta_zx| <= 1e-12.
    pub slope: Option<f64>,
}

pub const SLOPE_EPSILON: f64 = 1e-12;

/// Scratch buffers reused across units.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub(crate) natural: Vec<f64>,
    pub(crate) under0: Vec<f64>,
    pub(crate) under1: Vec<f64>,
}

/// A model compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: StructuralModel,
    equations: Vec<Option<Node>>,
    exogenous: Vec<(usize, Distribution)>,
    z: usize,
    x: usize,
    y: usize,
    beta_zx: Node,
    dydx: Node,
    dxdz: Node,
    dydz: Node,
}

impl Simulator {
    pub fn new(model: &StructuralModel) -> Simulator {
        let compile = |e: &Expr| Node::compile(e, model);
        let equations = model
            .definitions()
            .iter()
            .map(|d| match &d.body {
                Body::Endogenous(e) => Some(compile(e)),
                Body::Exogenous(_) => None,
            })
            .collect();
        let exogenous = model.exogenous().map(|(i, _, d)| (i, *d)).collect();
        let z = model.instrument();
        let fx = model.exposure_equation();
        let fy = model.outcome_equation();
        let reduced = model.reduced_form();
        // Evaluating the simplified chord keeps homogeneous effects exact.
        let chord = simplify(&Expr::sub(substitute(&fx, z, &Expr::Const(1.0)), substitute(&fx, z, &Expr::Const(0.0))));
        Simulator {
            equations,
            exogenous,
            z: model.index_of(z).expect("instrument"),
            x: model.index_of(model.exposure()).expect("exposure"),
            y: model.index_of(model.outcome()).expect("outcome"),
            beta_zx: compile(&chord),
            dydx: compile(&differentiate(&fy, model.exposure())),
            dxdz: compile(&differentiate(&fx, z)),
            dydz: compile(&differentiate(&reduced, z)),
            model: model.clone(),
        }
    }

    pub fn model(&self) -> &StructuralModel {
        &self.model
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.equations.len();
        Workspace { natural: alloc::vec![0.0; n], under0: alloc::vec![0.0; n], under1: alloc::vec![0.0; n] }
    }

    pub fn new_draw(&self) -> UnitDraw {
        UnitDraw { unit_index: 0, values: alloc::vec![0.0; self.exogenous.len()] }
    }

    /// Fills `draw` for `unit_index`; exogenous variable `k` reads stream `k`.
    pub fn draw_into(&self, unit_index: u64, seed: u64, draw: &mut UnitDraw) {
        draw.unit_index = unit_index;
        draw.values.resize(self.exogenous.len(), 0.0);
        for (k, (_, dist)) in self.exogenous.iter().enumerate() {
            draw.values[k] = match *dist {
                Distribution::PointMass { c } => c,
                _ => sample(dist, rng::uniform(seed, unit_index, k as u64)),
            };
        }
    }

    pub fn resolve(&self, iv: &Intervention) -> Result<Vec<(usize, f64)>, EngineError> {
        iv.assignments()
            .iter()
            .map(|(t, v)| self.model.index_of(t).map(|i| (i, *v)).ok_or_else(|| EngineError::UnknownTarget(t.clone())))
            .collect()
    }

    /// Evaluates all definitions in order into `out`, honouring forced slots.
    pub(crate) fn evaluate_slots(
        &self,
        draw: &UnitDraw,
        forced: &[(usize, f64)],
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        let mut exo = 0;
        for (i, eq) in self.equations.iter().enumerate() {
            let natural = match eq {
                None => {
                    exo += 1;
                    None
                }
                Some(node) => Some(node),
            };
            if let Some(&(_, v)) = forced.iter().find(|(s, _)| *s == i) {
                out[i] = v;
                continue;
            }
            out[i] = match natural {
                None => draw.values[exo - 1],
                Some(node) => node.eval(out)?,
            };
        }
        Ok(())
    }

    pub fn evaluate(&self, draw: &UnitDraw, iv: &Intervention) -> Result<BTreeMap<String, f64>, EngineError> {
        let forced = self.resolve(iv)?;
        let mut out = alloc::vec![0.0; self.equations.len()];
        self.evaluate_slots(draw, &forced, &mut out)?;
        Ok(self.model.definitions().iter().zip(out).map(|(d, v)| (d.name.clone(), v)).collect())
    }

    pub(crate) fn exposure_slot(&self) -> usize {
        self.x
    }

    pub(crate) fn outcome_slot(&self) -> usize {
        self.y
    }

    /// Potential outcomes under do(Z=0) and do(Z=1) sharing the same draw.
    pub fn unit_effects_with(&self, draw: &UnitDraw, ws: &mut Workspace) -> Result<UnitEffects, EvalError> {
        self.evaluate_slots(draw, &[], &mut ws.natural)?;
        self.evaluate_slots(draw, &[(self.z, 0.0)], &mut ws.under0)?;
        self.evaluate_slots(draw, &[(self.z, 1.0)], &mut ws.under1)?;
        let nat = &ws.natural;
        let (x0, x1) = (ws.under0[self.x], ws.under1[self.x]);
        let (y0, y1) = (ws.under0[self.y], ws.under1[self.y]);
        let beta_zx = self.beta_zx.eval(nat)?;
        let beta_zy = y1 - y0;
        Ok(UnitEffects {
            z: nat[self.z],
            x: nat[self.x],
            y: nat[self.y],
            x0,
            x1,
            y0,
            y1,
            beta_zx,
            beta_zy,
            dydx: self.dydx.eval(nat)?,
            dxdz: self.dxdz.eval(nat)?,
            dydz: self.dydz.eval(nat)?,
            slope: (beta_zx.abs() > SLOPE_EPSILON).then(|| beta_zy / beta_zx),
        })
    }

    pub fn unit_effects(&self, draw: &UnitDraw) -> Result<UnitEffects, EvalError> {
        let mut ws = self.workspace();
        self.unit_effects_with(draw, &mut ws)
    }
}

fn sample(dist: &Distribution, u: f64) -> f64 {
    match *dist {
        Distribution::Bernoulli { p } => {
            if u < p {
                1.0
            } else {
                0.0
            }
        }
        Distribution::Normal { mu, sigma } => mu + sigma * rng::normal_quantile(u),
        Distribution::Uniform { a, b } => a + (b - a) * u,
        Distribution::PointMass { c } => c,
    }
}

/// Exogenous values of unit `unit_index` under `seed`.
pub fn draw_exogenous(model: &StructuralModel, unit_index: u64, seed: u64) -> UnitDraw {
    let mut draw = UnitDraw { unit_index, values: Vec::new() };
    for (k, (_, _, dist)) in model.exogenous().enumerate() {
        draw.values.push(sample(dist, rng::uniform(seed, unit_index, k as u64)));
    }
    draw
}

/// Evaluates every variable of `model` for `draw` under intervention `iv`.
pub fn evaluate(
    model: &StructuralModel,
    draw: &UnitDraw,
    iv: &Intervention,
) -> Result<BTreeMap<String, f64>, EngineError> {
    Simulator::new(model).evaluate(draw, iv)
}

/// Unit-level effects of the instrument for one draw.
pub fn unit_effects(model: &StructuralModel, draw: &UnitDraw) -> Result<UnitEffects, EvalError> {
    Simulator::new(model).unit_effects(draw)
}
