//! Scenario files: TOML descriptions of a problem, its solver settings and
//! outputs. Every field has a default; the resolved copy with all defaults
//! filled is what an output directory records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bernoulli::{BernoulliSpec, FourierTerm};
use crate::dump::read_field_file;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Constants, Expr};
use crate::field::ScalarField3;
use crate::grid::{Grid, GridSpec};
use crate::linsolve::ContinuationSchedule;
use crate::nash_moser::{Method, NashMoserParams};
use crate::problem::ProblemData;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "P1")]
    pub period_y: f64,
    #[serde(rename = "P2")]
    pub period_z: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { length: 1.0, period_y: 1.0, period_z: 1.0, nx: 32, ny: 32, nz: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseBlock {
    pub grad_f: [f64; 3],
    pub grad_g: [f64; 3],
}

impl Default for BaseBlock {
    fn default() -> Self {
        BaseBlock { grad_f: [0.0, 1.0, 0.0], grad_g: [0.0, 0.0, 1.0] }
    }
}

/// f0 and g0 as expressions or as field-dump paths (relative to the
/// scenario file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryBlock {
    pub f0: String,
    pub g0: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0_dump: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0_dump: Option<PathBuf>,
}

impl Default for BoundaryBlock {
    fn default() -> Self {
        BoundaryBlock { f0: "0".into(), g0: "0".into(), f0_dump: None, g0_dump: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BernoulliBlock {
    pub c1: f64,
    pub c2: f64,
    pub terms: Vec<FourierTerm>,
}

/// Optional overrides of [`NashMoserParams`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NashMoserOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_tilde: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub method: String,
    pub tol: f64,
    pub eps_schedule: Vec<f64>,
    pub inner_tol: f64,
    pub nash_moser: NashMoserOverrides,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let s = ContinuationSchedule::default();
        SolverBlock { method: "newton".into(), tol: 1e-10, eps_schedule: s.eps_list, inner_tol: s.inner_tol, nash_moser: NashMoserOverrides::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsBlock {
    pub directory: PathBuf,
    /// Any of f, g, v, p.
    pub dumps: Vec<String>,
    pub tables: bool,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        OutputsBlock { directory: PathBuf::from("out"), dumps: ["f", "g", "v", "p"].map(String::from).to_vec(), tables: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsBlock {
    pub epsilon: f64,
    /// Empty means powers of two below the z Nyquist index.
    pub n_list: Vec<usize>,
    pub tame_order: usize,
    pub tame_samples: usize,
    pub seed: u64,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        DiagnosticsBlock { epsilon: 0.0, n_list: Vec::new(), tame_order: 1, tame_samples: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub parameters: BTreeMap<String, f64>,
    pub grid: GridBlock,
    pub base: BaseBlock,
    pub boundary: BoundaryBlock,
    pub bernoulli: BernoulliBlock,
    pub solver: SolverBlock,
    pub outputs: OutputsBlock,
    pub diagnostics: DiagnosticsBlock,
    /// Directory that relative dump paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
struct ExprSpans {
    #[serde(default)]
    boundary: Option<BoundarySpans>,
}

#[derive(Deserialize)]
struct BoundarySpans {
    f0: Option<toml::Spanned<String>>,
    g0: Option<toml::Spanned<String>>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.chars().count(), |p| before[p + 1..].chars().count()) + 1;
    (line, col)
}

const RESERVED: [&str; 10] = ["x", "y", "z", "pi", "L", "P1", "P2", "sin", "cos", "exp"];

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario_str(&text, &path.display().to_string(), base_dir)
}

/// Parses and validates a scenario. `origin` names the source in messages.
pub fn parse_scenario_str(text: &str, origin: &str, base_dir: PathBuf) -> Result<Scenario> {
    let mut sc: Scenario = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Parse(format!("{origin}:{line}:{col}: {}", e.message()))
    })?;
    sc.base_dir = base_dir;
    let spans: ExprSpans = toml::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {}", e.message())))?;
    let constants = sc.constants()?;
    let b = spans.boundary.as_ref();
    for (name, spanned) in [("f0", b.and_then(|b| b.f0.as_ref())), ("g0", b.and_then(|b| b.g0.as_ref()))] {
        if let Some(s) = spanned {
            if let Err(e) = parse_expr(s.get_ref(), &constants) {
                // +1 skips the opening quote.
                let (line, col) = line_col(text, s.span().start + 1 + e.offset);
                return Err(Error::Parse(format!("{origin}:{line}:{col}: boundary.{name}: {}", e.message)));
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    /// L, P1, P2 and the parameter table.
    pub fn constants(&self) -> Result<Constants> {
        let mut c = Constants::new();
        for (k, v) in &self.parameters {
            if RESERVED.contains(&k.as_str()) {
                return Err(Error::Invariant { name: "parameter names avoid reserved words", detail: format!("parameter '{k}'") });
            }
            c.insert(k.clone(), *v);
        }
        c.insert("L".into(), self.grid.length);
        c.insert("P1".into(), self.grid.period_y);
        c.insert("P2".into(), self.grid.period_z);
        Ok(c)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.length, self.grid.period_y, self.grid.period_z, self.grid.nx, self.grid.ny, self.grid.nz)
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid_spec()?)
    }

    pub fn method(&self) -> Result<Method> {
        match self.solver.method.as_str() {
            "newton" => Ok(Method::Newton),
            "nash-moser" => Ok(Method::NashMoser),
            m => Err(Error::Invariant { name: "solver.method is newton or nash-moser", detail: format!("got '{m}'") }),
        }
    }

    pub fn schedule(&self) -> Result<ContinuationSchedule> {
        ContinuationSchedule::new(self.solver.eps_schedule.clone(), self.solver.inner_tol)
    }

    pub fn nash_moser_params(&self) -> Result<NashMoserParams> {
        let o = &self.solver.nash_moser;
        let d = NashMoserParams::default();
        let p = NashMoserParams {
            d0: o.d0.unwrap_or(d.d0),
            s_tilde: o.s_tilde.unwrap_or(d.s_tilde),
            theta0: o.theta0.unwrap_or(d.theta0),
            sigma: o.sigma.unwrap_or(d.sigma),
            r0: o.r0.unwrap_or(d.r0),
            max_outer: o.max_outer.unwrap_or(d.max_outer),
            gate: o.gate.unwrap_or(d.gate),
            schedule: self.schedule()?,
            ..d
        };
        p.validate()?;
        Ok(p)
    }

    pub fn bernoulli_spec(&self) -> Result<BernoulliSpec> {
        let r = BernoulliSpec::lattice_matrix(self.base.grad_f, self.base.grad_g);
        BernoulliSpec::new(self.bernoulli.c1, self.bernoulli.c2, self.bernoulli.terms.clone(), r, [self.grid.period_y, self.grid.period_z])
    }

    fn boundary_field(&self, grid: &Arc<Grid>, expr: &str, dump: Option<&PathBuf>, name: &str) -> Result<ScalarField3> {
        if let Some(p) = dump {
            let path = if p.is_absolute() { p.clone() } else { self.base_dir.join(p) };
            return read_field_file(&path)?.into_field(grid);
        }
        let e: Expr = parse_expr(expr, &self.constants()?).map_err(|e| Error::Parse(format!("boundary.{name}: {e}")))?;
        let f = ScalarField3::from_fn(grid, |x, y, z| e.eval(x, y, z));
        f.ensure_finite("boundary expression")?;
        Ok(f)
    }

    pub fn problem_data(&self) -> Result<ProblemData> {
        let grid = self.build_grid()?;
        let f0 = self.boundary_field(&grid, &self.boundary.f0, self.boundary.f0_dump.as_ref(), "f0")?;
        let g0 = self.boundary_field(&grid, &self.boundary.g0, self.boundary.g0_dump.as_ref(), "g0")?;
        ProblemData::new(self.base.grad_f, self.base.grad_g, f0, g0, self.bernoulli_spec()?)
    }

    /// All invariants that can be checked before compute.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.method()?;
        self.nash_moser_params()?;
        if !(self.solver.tol > 0.0) {
            return Err(Error::Invariant { name: "solver.tol > 0", detail: format!("tol = {}", self.solver.tol) });
        }
        for d in &self.outputs.dumps {
            if !["f", "g", "v", "p"].contains(&d.as_str()) {
                return Err(Error::Invariant { name: "outputs.dumps within {f, g, v, p}", detail: format!("got '{d}'") });
            }
        }
        if !(0.0..=1.0).contains(&self.diagnostics.epsilon) {
            return Err(Error::Invariant { name: "diagnostics.epsilon in [0, 1]", detail: format!("{}", self.diagnostics.epsilon) });
        }
        if !(1..=2).contains(&self.diagnostics.tame_order) {
            return Err(Error::Invariant { name: "diagnostics.tame_order in {1, 2}", detail: format!("{}", self.diagnostics.tame_order) });
        }
        self.problem_data()?;
        Ok(())
    }

    /// Noncoercive mode list, defaulting to powers of two below Nyquist.
    pub fn n_list(&self) -> Vec<usize> {
        if !self.diagnostics.n_list.is_empty() {
            return self.diagnostics.n_list.clone();
        }
        std::iter::successors(Some(2usize), |n| Some(n * 2)).take_while(|n| *n < self.grid.nz / 2).collect()
    }

    /// Applies command-line overrides and revalidates.
    pub fn with_overrides(mut self, grid: Option<[usize; 3]>, tol: Option<f64>, method: Option<&str>, seed: Option<u64>) -> Result<Self> {
        if let Some([nx, ny, nz]) = grid {
            self.grid.nx = nx;
            self.grid.ny = ny;
            self.grid.nz = nz;
        }
        if let Some(t) = tol {
            self.solver.tol = t;
        }
        if let Some(m) = method {
            self.solver.method = m.to_string();
        }
        if let Some(s) = seed {
            self.diagnostics.seed = s;
        }
        self.validate()?;
        Ok(self)
    }

    /// Scenario with every default filled in, as TOML. Dump paths are made
    /// absolute so the copy is usable from any directory.
    pub fn resolved_toml(&self) -> String {
        let mut sc = self.clone();
        for p in [&mut sc.boundary.f0_dump, &mut sc.boundary.g0_dump].into_iter().flatten() {
            if p.is_relative() {
                *p = self.base_dir.join(&*p);
            }
        }
        toml::to_string_pretty(&sc).expect("scenario serialises")
    }
}

/// Parses "NxNyNz" as in `32x32x64`.
pub fn parse_grid_override(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || Error::Parse(format!("grid override '{s}' is not of the form NxxNyxNz"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| bad())?;
    }
    Ok(out)
}
