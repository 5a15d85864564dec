use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::spec::{ConfigSource, ExperimentKind, ExperimentSpec};
use crate::error::Result;
use crate::fit::LineFit;

/// CSV schema `N,seed,E_N,dinf_lower,dinf_upper,grid_m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanFieldRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    #[serde(rename = "E_N")]
    pub e_n: f64,
    pub dinf_lower: f64,
    pub dinf_upper: f64,
    pub grid_m: usize,
    #[serde(skip)]
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub source: ConfigSource,
    #[serde(rename = "E_N")]
    pub e_n: f64,
    /// `N^{-λ}`, or `N^{-1} ln² N` when `s = 0`.
    pub rate: f64,
    pub dinf_lower: f64,
    pub grid_m: usize,
    /// `E_N + rate`.
    pub base: f64,
    /// `dinf_lower / base^γ`; empty when `base <= 0`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MollifyRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    #[serde(rename = "E_N")]
    pub e_n: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub chosen_k: usize,
    pub eps: f64,
    pub increment: f64,
    /// `increment / rate`, with the rate of the case at hand.
    pub normalized: f64,
    pub rho_m: usize,
    pub rho_dinf: f64,
    pub within_half_eps: bool,
    /// `d_∞(ρ, ρ_N) <= N^{-λ}` (`N^{-1}` when `s = 0`).
    pub within_rate: bool,
    pub positive_regime: bool,
    #[serde(skip)]
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub deletion_average: f64,
    pub full_energy: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialRow {
    pub check: String,
    pub point: Vec<f64>,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rows {
    MeanField(Vec<MeanFieldRow>),
    Stability(Vec<StabilityRow>),
    Mollify(Vec<MollifyRow>),
    Identity(Vec<IdentityRow>),
    Potential(Vec<PotentialRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::MeanField(r) => r.len(),
            Rows::Stability(r) => r.len(),
            Rows::Mollify(r) => r.len(),
            Rows::Identity(r) => r.len(),
            Rows::Potential(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let res = match self {
            Rows::MeanField(r) => r.iter().try_for_each(|x| w.serialize(x)),
            Rows::Stability(r) => r.iter().try_for_each(|x| w.serialize(x)),
            Rows::Mollify(r) => r.iter().try_for_each(|x| w.serialize(x)),
            Rows::Identity(r) => r.iter().try_for_each(|x| w.serialize(x)),
            Rows::Potential(r) => r.iter().try_for_each(|x| w.serialize((&x.check, format!("{:?}", x.point), x.value, x.reference, x.error))),
        };
        res.map_err(|e| crate::Error::Parse(e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| crate::Error::Parse(e.to_string()))?;
        let mut out = String::from_utf8(bytes).expect("csv output is utf-8");
        if matches!(self, Rows::Potential(_)) {
            out.insert_str(0, "check,point,value,reference,error\n");
        }
        Ok(out)
    }
}

/// JSON fit record `{kind,d,s,slope,stderr,corridor,pass}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub kind: ExperimentKind,
    pub d: usize,
    pub s: f64,
    pub slope: f64,
    pub stderr: f64,
    pub corridor: [f64; 2],
    pub pass: bool,
}

impl FitRecord {
    pub fn new(spec: &ExperimentSpec, fit: &LineFit, corridor: [f64; 2]) -> Self {
        let pass = fit.slope >= corridor[0] && fit.slope <= corridor[1];
        Self { kind: spec.kind, d: spec.d, s: spec.s, slope: fit.slope, stderr: fit.slope_stderr, corridor, pass }
    }
}

/// One named pass/fail test of a report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, threshold: format!("<= {bound:e}"), pass: value <= bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, threshold: format!(">= {bound:e}"), pass: value >= bound }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, threshold: "true".into(), pass: ok }
    }
}

/// Points for the optional scatter plot, in log-log coordinates.
#[derive(Clone, Debug, Default)]
pub struct PlotData {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub d: usize,
    pub s: f64,
    pub version: String,
    /// The full input, seeds and tolerances included.
    pub spec: ExperimentSpec,
    pub rows: Rows,
    pub fit: Option<FitRecord>,
    /// Run-specific derived quantities (fitted constants, `λ`, `γ`, ...).
    pub derived: serde_json::Map<String, serde_json::Value>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub pass: bool,
    #[serde(skip)]
    pub plot: Option<PlotData>,
}

impl Report {
    pub(crate) fn new(spec: &ExperimentSpec, rows: Rows) -> Self {
        Self {
            kind: spec.kind,
            d: spec.d,
            s: spec.s,
            version: env!("CARGO_PKG_VERSION").into(),
            spec: spec.clone(),
            rows,
            fit: None,
            derived: Default::default(),
            checks: Vec::new(),
            notes: Vec::new(),
            pass: false,
            plot: None,
        }
    }

    pub(crate) fn derive(&mut self, key: &str, value: impl Serialize) {
        self.derived.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub(crate) fn finish(mut self) -> Self {
        self.pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn stem(&self) -> String {
        format!("{}_d{}_s{}", self.kind.name(), self.d, self.s)
    }

    /// Writes `<stem>.csv`, `<stem>.json` and, when asked, `<stem>.svg`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = self.stem();
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, self.rows.to_csv()?)?;
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&json_path, serde_json::to_string_pretty(self)?)?;
        let mut out = vec![csv_path, json_path];
        if self.spec.svg {
            if let Some(plot) = &self.plot {
                let p = dir.join(format!("{stem}.svg"));
                fs::write(&p, render_svg(plot, self.fit.as_ref()))?;
                out.push(p);
            }
        }
        Ok(out)
    }
}

pub fn render_svg(plot: &PlotData, fit: Option<&FitRecord>) -> String {
    let (w, h, pad) = (480.0, 360.0, 48.0);
    let pts = &plot.points;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - pad, w - pad);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{0}" stroke="black"/>"#, h - pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, plot.x_label);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {0})" text-anchor="middle">{}</text>"#, h / 2.0, plot.y_label);
    for &(x, y) in pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    if let (Some(f), false) = (fit, pts.is_empty()) {
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let line = |x: f64| my + f.slope * (x - mx);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick"/>"#, sx(x0), sy(line(x0)), sx(x1), sy(line(x1)));
        let _ = writeln!(s, r#"<text x="{}" y="{}">slope {:.3} ± {:.3}</text>"#, pad + 8.0, pad, f.slope, f.stderr);
    }
    s.push_str("</svg>\n");
    s
}
