//! The report document and its renderers.
//!
//! JSON and CSV are stable output surfaces; the text form is for people and
//! may change. Every number in a document is finite.

use std::fmt::Write;

use estimand_lab_core::estimands::Estimate;
use estimand_lab_core::scm::Diagnostic;
use estimand_lab_core::symbolic::{AssumptionCheck, AssumptionReport};
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "kind,value,mc_se,n,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ConfigEcho,
    pub diagnostics: Vec<DiagnosticRow>,
    pub assumptions: Option<AssumptionsDoc>,
    pub estimates: Vec<EstimateRow>,
    pub gap: Option<GapSummary>,
    pub comparison: Vec<ComparisonRow>,
    pub scan_points: Vec<ScanPoint>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn new(command: &str, config: ConfigEcho) -> ReportDocument {
        ReportDocument {
            tool: "estimand-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            diagnostics: Vec::new(),
            assumptions: None,
            estimates: Vec::new(),
            gap: None,
            comparison: Vec::new(),
            scan_points: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub model: String,
    pub n: u64,
    pub seed: u64,
    pub estimands: Vec<String>,
    pub ace_from: Option<f64>,
    pub ace_to: Option<f64>,
    pub params: Vec<ParamRangeEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRangeEcho {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub severity: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl From<&Diagnostic> for DiagnosticRow {
    fn from(d: &Diagnostic) -> Self {
        DiagnosticRow { severity: "error".into(), line: d.line, column: d.column, message: d.message.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDoc {
    pub verdict: String,
    pub witness: String,
    pub slope: Option<String>,
}

impl From<&AssumptionCheck> for CheckDoc {
    fn from(c: &AssumptionCheck) -> Self {
        CheckDoc {
            verdict: c.verdict.as_str().into(),
            witness: c.witness.to_string(),
            slope: c.slope.as_ref().map(|s| s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionsDoc {
    pub homogeneity_zx: CheckDoc,
    pub linearity_yx: CheckDoc,
    pub exclusion_structural: bool,
    pub notes: Vec<String>,
}

impl From<&AssumptionReport> for AssumptionsDoc {
    fn from(r: &AssumptionReport) -> Self {
        AssumptionsDoc {
            homogeneity_zx: (&r.homogeneity_zx).into(),
            linearity_yx: (&r.linearity_yx).into(),
            exclusion_structural: r.exclusion_structural,
            notes: r.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub name: String,
    pub value: f64,
}

/// One CSV row. `kind` names the quantity (`ade`, `wald_true`, `gap`,
/// `nosh_cov`, ...). Failed scan points have kind `error` and no value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub kind: String,
    pub value: Option<f64>,
    pub mc_se: Option<f64>,
    pub n: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamValue>,
}

impl EstimateRow {
    pub fn named(kind: &str, e: &Estimate) -> EstimateRow {
        EstimateRow {
            kind: kind.into(),
            value: Some(e.value),
            mc_se: Some(e.mc_se),
            n: e.n,
            seed: e.seed,
            params: Vec::new(),
        }
    }

    pub fn of(e: &Estimate) -> EstimateRow {
        EstimateRow::named(e.kind.as_str(), e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub wald_true: f64,
    pub ade: f64,
    /// wald_true - ade
    pub gap: f64,
    /// Delta-method SE of the gap from the coupled run.
    pub gap_mc_se: f64,
    /// sqrt(se_wald^2 + se_ade^2), ignoring the coupling.
    pub combined_mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub expected: f64,
    pub computed: f64,
    pub mc_se: f64,
    /// Allowed |computed - expected|; 0 for rows that must match exactly.
    pub band: f64,
    pub exact: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub index: usize,
    pub seed: u64,
    pub params: Vec<ParamValue>,
    pub error: Option<String>,
}

pub fn render_json(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> serde_json::Result<ReportDocument> {
    serde_json::from_str(text)
}

fn csv_number(x: Option<f64>) -> String {
    // Debug gives the shortest round-trip form and switches to exponents for
    // very large or small magnitudes
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header `kind,value,mc_se,n,seed` plus `param_<name>` for each scanned
/// parameter.
pub fn render_csv(doc: &ReportDocument) -> String {
    let mut out = String::from(CSV_HEADER);
    for p in &doc.config.params {
        write!(out, ",param_{}", csv_field(&p.name)).unwrap();
    }
    out.push('\n');
    for row in &doc.estimates {
        write!(
            out,
            "{},{},{},{},{}",
            csv_field(&row.kind),
            csv_number(row.value),
            csv_number(row.mc_se),
            row.n,
            row.seed
        )
        .unwrap();
        for p in &doc.config.params {
            let v = row.params.iter().find(|q| q.name == p.name).map(|q| q.value);
            write!(out, ",{}", csv_number(v)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-3 && x.abs() < 1e6 {
        format!("{x:.6}")
    } else {
        format!("{x:.4e}")
    }
}

pub fn render_text(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let c = &doc.config;
    writeln!(out, "estimand-lab {}  {}  model={}", doc.version, doc.command, c.model).unwrap();
    if doc.command != "validate" && doc.command != "check" {
        writeln!(out, "n={}  seed={}", c.n, c.seed).unwrap();
    }
    for d in &doc.diagnostics {
        writeln!(out, "{}: {} at {}:{}", d.severity, d.message, d.line, d.column).unwrap();
    }
    if doc.command == "validate" && doc.diagnostics.is_empty() {
        writeln!(out, "model is valid").unwrap();
    }
    if let Some(a) = &doc.assumptions {
        writeln!(out, "\nassumptions").unwrap();
        let slope = |c: &CheckDoc| c.slope.as_ref().map(|s| format!("  slope: {s}")).unwrap_or_default();
        writeln!(
            out,
            "  homogeneity Z->X : {:<12} dX/dZ = {}{}",
            a.homogeneity_zx.verdict,
            a.homogeneity_zx.witness,
            slope(&a.homogeneity_zx)
        )
        .unwrap();
        writeln!(
            out,
            "  linearity X->Y   : {:<12} d2Y/dX2 = {}{}",
            a.linearity_yx.verdict,
            a.linearity_yx.witness,
            slope(&a.linearity_yx)
        )
        .unwrap();
        writeln!(out, "  exclusion        : {}", if a.exclusion_structural { "holds" } else { "fails" }).unwrap();
        for n in &a.notes {
            writeln!(out, "  note: {n}").unwrap();
        }
    }
    if !doc.comparison.is_empty() {
        writeln!(
            out,
            "\n{:<12} {:>10} {:>12} {:>12} {:>10}  result",
            "quantity", "expected", "computed", "mc_se", "band"
        )
        .unwrap();
        for r in &doc.comparison {
            let band = if r.exact { "exact".to_string() } else { num(r.band) };
            writeln!(
                out,
                "{:<12} {:>10} {:>12} {:>12} {:>10}  {}",
                r.quantity,
                num(r.expected),
                num(r.computed),
                num(r.mc_se),
                band,
                if r.pass { "PASS" } else { "FAIL" }
            )
            .unwrap();
        }
    }
    if !doc.estimates.is_empty() {
        writeln!(out).unwrap();
        let params: Vec<&str> = doc.config.params.iter().map(|p| p.name.as_str()).collect();
        let mut header = String::new();
        for p in &params {
            write!(header, "{p:>8} ").unwrap();
        }
        writeln!(out, "{header}{:<18} {:>14} {:>12}", "estimate", "value", "mc_se").unwrap();
        for r in &doc.estimates {
            let mut line = String::new();
            for p in &params {
                let v = r.params.iter().find(|q| &q.name == p).map(|q| num(q.value)).unwrap_or_default();
                write!(line, "{v:>8} ").unwrap();
            }
            let value = r.value.map(num).unwrap_or_else(|| "-".into());
            let se = r.mc_se.map(num).unwrap_or_else(|| "-".into());
            writeln!(out, "{line}{:<18} {:>14} {:>12}", r.kind, value, se).unwrap();
        }
    }
    if let Some(g) = &doc.gap {
        writeln!(
            out,
            "\nwald_true - ade = {} (mc_se {}, {:.1} standard errors)",
            num(g.gap),
            num(g.gap_mc_se),
            if g.gap_mc_se > 0.0 { g.gap / g.gap_mc_se } else { 0.0 }
        )
        .unwrap();
    }
    for p in doc.scan_points.iter().filter(|p| p.error.is_some()) {
        let at: Vec<String> = p.params.iter().map(|q| format!("{}={}", q.name, q.value)).collect();
        writeln!(out, "point {} ({}) failed: {}", p.index, at.join(", "), p.error.as_deref().unwrap_or("")).unwrap();
    }
    for w in &doc.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    out
}
