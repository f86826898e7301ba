//! Experiment configuration: JSON parsing and validation.
//!
//! Every object is closed: unknown keys are errors, and tag fields
//! (`space.kind`, `space.density.family`, `kernel.family`,
//! `filtration.mode`, `study`) are checked against their known values
//! before anything is built, so errors name the offending field.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use mtrace_core::filtration::dyadic_bfs_schedule;
use mtrace_core::kernel::DEFAULT_SERIES_TERMS;
use mtrace_core::martingale::DN_ATOM_BUDGET;
use mtrace_core::spectral::DENSE_ATOM_BUDGET;
use mtrace_core::{
    CosineCoeffs, Cover, Density, DomainKind, Filtration, Kernel, MeasureSpace, Region, SampledGrid,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    TraceStudy,
    Spectrum,
    DoobConvergence,
    MaximalFunction,
    SandwichIdentity,
    TruncationStudy,
    PropertySuite,
}

impl Study {
    pub const ALL: [Study; 7] = [
        Study::TraceStudy,
        Study::Spectrum,
        Study::DoobConvergence,
        Study::MaximalFunction,
        Study::SandwichIdentity,
        Study::TruncationStudy,
        Study::PropertySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::TraceStudy => "trace_study",
            Study::Spectrum => "spectrum",
            Study::DoobConvergence => "doob_convergence",
            Study::MaximalFunction => "maximal_function",
            Study::SandwichIdentity => "sandwich_identity",
            Study::TruncationStudy => "truncation_study",
            Study::PropertySuite => "property_suite",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Study::TraceStudy => "diagonal averages t_n and averaged-operator spectra across levels, with a verdict",
            Study::Spectrum => "eigendecomposition of the discretized operator and singular-value convergence",
            Study::DoobConvergence => "L2 distance of E_n f to f across levels for the seeded function suite",
            Study::MaximalFunction => "maximal function norms against the L2 Doob bound",
            Study::SandwichIdentity => "entrywise gap between D_n K D_n and the averaged kernel",
            Study::TruncationStudy => "truncated traces over a half-line exhaustion",
            Study::PropertySuite => "invariant rows over the standard catalog or one configured kernel",
        }
    }

    fn needs_kernel(self) -> bool {
        !matches!(self, Study::DoobConvergence | Study::MaximalFunction | Study::PropertySuite)
    }

    fn dense(self) -> bool {
        matches!(
            self,
            Study::TraceStudy | Study::Spectrum | Study::SandwichIdentity | Study::TruncationStudy
        )
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Study::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

pub const SPACE_KINDS: [&str; 4] = ["interval", "circle", "torus2", "half_line"];
pub const DENSITY_FAMILIES: [&str; 3] = ["uniform", "polynomial", "exponential_decay"];
pub const KERNEL_FAMILIES: [&str; 7] =
    ["brownian_min", "exp_abs", "gaussian_rbf", "cosine_series", "rank_one_exp", "constant", "sampled"];
pub const FILTRATION_MODES: [&str; 2] = ["dyadic", "cover"];

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub top_k: Option<usize>,
    pub j_max: Option<usize>,
    pub stages: Option<usize>,
    /// Filtration level for single-level studies.
    pub level: Option<usize>,
    /// Size of the seeded function suite.
    pub functions: Option<usize>,
    pub tol: Option<f64>,
    /// Atom level of the standard catalog for `property_suite`.
    pub catalog_level: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    space: Option<Value>,
    kernel: Option<Value>,
    filtration: Option<Value>,
    study: Value,
    #[serde(default)]
    params: Params,
    #[serde(default)]
    seed: u64,
    output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFields {
    #[allow(dead_code)]
    kind: String,
    atom_level: u32,
    a: Option<f64>,
    b: Option<f64>,
    circumference: Option<f64>,
    circumferences: Option<[f64; 2]>,
    window: Option<f64>,
    density: Option<Value>,
    /// Rescale a uniform density so that μ(X) = 1.
    #[serde(default)]
    normalized: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformFields {
    c: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialFields {
    coeffs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayFields {
    rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaFields {
    alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaFields {
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantFields {
    c: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CosineFields {
    coeffs: Value,
    #[serde(rename = "M")]
    m: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampledFields {
    path: PathBuf,
    #[serde(default)]
    psd: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DyadicFields {
    depth: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverFields {
    cover: Vec<Region>,
    basis: Value,
    depth: Option<usize>,
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub study: Study,
    pub space: Option<Arc<MeasureSpace>>,
    pub kernel: Option<Kernel>,
    pub filtration: Option<Filtration>,
    pub params: Params,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// The configuration as parsed, echoed into the manifest.
    pub echo: Value,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn object<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>, CliError> {
    value.as_object().ok_or_else(|| invalid(format!("{path}: expected an object")))
}

/// Reads the tag field of `value` and checks it against `known`.
fn tag<'a>(value: &'a Value, path: &str, field: &str, known: &[&str]) -> Result<&'a str, CliError> {
    let map = object(value, path)?;
    let tag = map
        .get(field)
        .ok_or_else(|| invalid(format!("{path}.{field}: missing")))?
        .as_str()
        .ok_or_else(|| invalid(format!("{path}.{field}: expected a string")))?;
    if !known.contains(&tag) {
        return Err(invalid(format!(
            "{path}.{field}: unknown value \"{tag}\" (expected one of: {})",
            known.join(", ")
        )));
    }
    Ok(tag)
}

/// Deserializes `value` without its tag field into `T`.
fn fields<T: DeserializeOwned>(value: &Value, path: &str, drop: &str) -> Result<T, CliError> {
    let mut map = object(value, path)?.clone();
    map.remove(drop);
    serde_json::from_value(Value::Object(map)).map_err(|e| invalid(format!("{path}: {e}")))
}

fn core_err(path: &str) -> impl Fn(mtrace_core::Error) -> CliError + '_ {
    move |e| invalid(format!("{path}: {e}"))
}

/// Parses JSON text, reporting syntax errors with line and column.
pub fn parse_json(text: &str, origin: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| {
        invalid(format!("{origin}: malformed JSON at line {}, column {}: {e}", e.line(), e.column()))
    })
}

pub fn load(path: &Path) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, &path.display().to_string(), &base)
}

/// Parses and validates a configuration; relative sampled-grid paths
/// resolve against `base`.
pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Experiment, CliError> {
    let echo = parse_json(text, origin)?;
    object(&echo, "config")?;
    if let Some(study) = echo.get("study") {
        tag(&serde_json::json!({ "study": study }), "config", "study", &Study::ALL.map(Study::name))?;
    }
    let raw: RawConfig = serde_json::from_value(echo.clone()).map_err(|e| invalid(format!("config: {e}")))?;
    let study: Study = raw.study.as_str().and_then(|s| s.parse().ok()).expect("checked above");

    let space = raw.space.as_ref().map(parse_space).transpose()?;
    let kernel = match (&raw.kernel, &space) {
        (Some(k), Some(s)) => Some(parse_kernel(k, s, base)?),
        (Some(k), None) => {
            tag(k, "kernel", "family", &KERNEL_FAMILIES)?;
            return Err(invalid("space: required when a kernel is given"));
        }
        (None, _) => None,
    };
    let filtration = match (&raw.filtration, &space) {
        (Some(f), Some(s)) => Some(parse_filtration(f, s)?),
        (Some(f), None) => {
            tag(f, "filtration", "mode", &FILTRATION_MODES)?;
            return Err(invalid("space: required when a filtration is given"));
        }
        (None, Some(s)) => Some(Filtration::dyadic(s.clone(), s.atom_level() as usize).map_err(core_err("filtration"))?),
        (None, None) => None,
    };

    if study != Study::PropertySuite && space.is_none() {
        return Err(invalid(format!("space: required by study {study}")));
    }
    if study.needs_kernel() && kernel.is_none() {
        return Err(invalid(format!("kernel: required by study {study}")));
    }
    if let Some(s) = &space {
        let dense = study.dense() || (study == Study::PropertySuite && kernel.is_some());
        if dense && s.len() > DENSE_ATOM_BUDGET {
            return Err(invalid(format!(
                "space.atom_level: {} atoms exceed the dense budget of {DENSE_ATOM_BUDGET}",
                s.len()
            )));
        }
        if study == Study::SandwichIdentity && s.len() > DN_ATOM_BUDGET {
            return Err(invalid(format!("space.atom_level: {} atoms exceed the D_n budget of {DN_ATOM_BUDGET}", s.len())));
        }
    }
    validate_params(study, &raw.params, filtration.as_ref(), space.as_deref())?;

    Ok(Experiment {
        study,
        space,
        kernel,
        filtration,
        params: raw.params,
        seed: raw.seed,
        out_dir: raw.output.map(|o| o.dir),
        echo,
    })
}

fn parse_space(value: &Value) -> Result<Arc<MeasureSpace>, CliError> {
    let kind = tag(value, "space", "kind", &SPACE_KINDS)?;
    let f: SpaceFields = fields(value, "space", "")?;
    let used: &[&str] = match kind {
        "interval" => &["a", "b"],
        "circle" => &["circumference"],
        "torus2" => &["circumferences"],
        _ => &["window"],
    };
    let present = [
        ("a", f.a.is_some()),
        ("b", f.b.is_some()),
        ("circumference", f.circumference.is_some()),
        ("circumferences", f.circumferences.is_some()),
        ("window", f.window.is_some()),
    ];
    for (name, set) in present {
        if set && !used.contains(&name) {
            return Err(invalid(format!("space.{name}: not used by kind {kind}")));
        }
        if !set && used.contains(&name) {
            return Err(invalid(format!("space.{name}: required by kind {kind}")));
        }
    }
    let domain = match kind {
        "interval" => DomainKind::Interval { a: f.a.unwrap(), b: f.b.unwrap() },
        "circle" => DomainKind::Circle { circumference: f.circumference.unwrap() },
        "torus2" => DomainKind::Torus2 { circumferences: f.circumferences.unwrap() },
        _ => DomainKind::HalfLine,
    };
    let density = match &f.density {
        None => Density::Uniform { c: 1.0 },
        Some(d) => match tag(d, "space.density", "family", &DENSITY_FAMILIES)? {
            "uniform" => Density::Uniform { c: fields::<UniformFields>(d, "space.density", "family")?.c },
            "polynomial" => {
                Density::Polynomial { coeffs: fields::<PolynomialFields>(d, "space.density", "family")?.coeffs }
            }
            _ => Density::ExponentialDecay { rate: fields::<DecayFields>(d, "space.density", "family")?.rate },
        },
    };
    let density = if f.normalized {
        let Density::Uniform { c } = density else {
            return Err(invalid("space.normalized: only applies to a uniform density"));
        };
        let probe = MeasureSpace::build(domain, Density::Uniform { c }, 1, f.window).map_err(core_err("space"))?;
        if matches!(domain, DomainKind::HalfLine) {
            return Err(invalid("space.normalized: the half-line has infinite measure"));
        }
        Density::Uniform { c: c / probe.closed_form_measure() }
    } else {
        density
    };
    MeasureSpace::build(domain, density, f.atom_level, f.window).map(Arc::new).map_err(core_err("space"))
}

fn parse_coeffs(value: &Value) -> Result<CosineCoeffs, CliError> {
    let path = "kernel.coeffs";
    match value {
        Value::String(s) => match s.as_str() {
            "inverse_square" => Ok(CosineCoeffs::InverseSquare),
            "inverse" => Ok(CosineCoeffs::Inverse),
            other => Err(invalid(format!(
                "{path}: unknown value \"{other}\" (expected inverse_square, inverse, {{\"geometric\": r}} or a list)"
            ))),
        },
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| invalid(format!("{path}: expected numbers"))))
            .collect::<Result<_, _>>()
            .map(CosineCoeffs::Explicit),
        Value::Object(map) => match (map.len(), map.get("geometric").and_then(Value::as_f64)) {
            (1, Some(r)) => Ok(CosineCoeffs::Geometric(r)),
            _ => Err(invalid(format!("{path}: expected {{\"geometric\": r}}"))),
        },
        _ => Err(invalid(format!("{path}: expected a name, a list or {{\"geometric\": r}}"))),
    }
}

fn parse_kernel(value: &Value, space: &Arc<MeasureSpace>, base: &Path) -> Result<Kernel, CliError> {
    let family = tag(value, "kernel", "family", &KERNEL_FAMILIES)?;
    let p = "kernel";
    let kernel = match family {
        "brownian_min" => fields::<Empty>(value, p, "family").map(|_| Kernel::BrownianMin)?,
        "rank_one_exp" => fields::<Empty>(value, p, "family").map(|_| Kernel::RankOneExp)?,
        "exp_abs" => Kernel::exp_abs(fields::<AlphaFields>(value, p, "family")?.alpha).map_err(core_err(p))?,
        "gaussian_rbf" => Kernel::gaussian_rbf(fields::<GammaFields>(value, p, "family")?.gamma).map_err(core_err(p))?,
        "constant" => Kernel::constant(fields::<ConstantFields>(value, p, "family")?.c).map_err(core_err(p))?,
        "cosine_series" => {
            let f: CosineFields = fields(value, p, "family")?;
            let coeffs = parse_coeffs(&f.coeffs)?;
            let terms = match (&coeffs, f.m) {
                (CosineCoeffs::Explicit(v), None) => v.len(),
                (CosineCoeffs::Explicit(_), Some(_)) => {
                    return Err(invalid("kernel.M: not used with explicit coefficients"))
                }
                (_, m) => m.unwrap_or(DEFAULT_SERIES_TERMS),
            };
            Kernel::cosine_series(coeffs, terms).map_err(core_err(p))?
        }
        _ => {
            let f: SampledFields = fields(value, p, "family")?;
            let path = if f.path.is_absolute() { f.path } else { base.join(f.path) };
            Kernel::SampledGrid(Arc::new(load_grid(&path, space, f.psd)?))
        }
    };
    // surfaces kernel/domain mismatches before any study runs
    kernel.diagonal_integral(space).map_err(core_err("kernel"))?;
    Ok(kernel)
}

/// Row-major `atoms × atoms` CSV, one matrix row per line.
pub fn load_grid(path: &Path, space: &Arc<MeasureSpace>, psd: bool) -> Result<SampledGrid, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("kernel.path: cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                invalid(format!("kernel.path: {}:{}: not a number: {:?}", path.display(), i + 1, cell.trim()))
            })?;
            values.push(v);
        }
    }
    SampledGrid::new(space.clone(), values, psd).map_err(core_err("kernel.path"))
}

fn parse_filtration(value: &Value, space: &Arc<MeasureSpace>) -> Result<Filtration, CliError> {
    let p = "filtration";
    match tag(value, p, "mode", &FILTRATION_MODES)? {
        "dyadic" => {
            let f: DyadicFields = fields(value, p, "mode")?;
            Filtration::dyadic(space.clone(), f.depth.unwrap_or(space.atom_level() as usize)).map_err(core_err(p))
        }
        _ => {
            let f: CoverFields = fields(value, p, "mode")?;
            let basis = match &f.basis {
                Value::String(s) if s == "dyadic_bfs" => {
                    let count = f.depth.ok_or_else(|| invalid("filtration.depth: required with basis dyadic_bfs"))?;
                    dyadic_bfs_schedule(space, count)
                }
                Value::String(s) => {
                    return Err(invalid(format!(
                        "filtration.basis: unknown value \"{s}\" (expected dyadic_bfs or a list of sets)"
                    )))
                }
                other => serde_json::from_value::<Vec<Region>>(other.clone())
                    .map_err(|e| invalid(format!("filtration.basis: {e}")))?,
            };
            let depth = f.depth.unwrap_or(basis.len());
            Filtration::from_cover(space.clone(), &Cover { sets: f.cover }, &basis, depth).map_err(core_err(p))
        }
    }
}

fn validate_params(
    study: Study,
    params: &Params,
    filtration: Option<&Filtration>,
    space: Option<&MeasureSpace>,
) -> Result<(), CliError> {
    let depth = filtration.map(Filtration::depth).unwrap_or(0);
    let range = |name: &str, v: Option<usize>, lo: usize, hi: usize| -> Result<(), CliError> {
        match v {
            Some(x) if x < lo || x > hi => Err(invalid(format!("params.{name}: {x} outside {lo}..={hi}"))),
            _ => Ok(()),
        }
    };
    range("n_min", params.n_min, 0, depth)?;
    range("n_max", params.n_max, 0, depth)?;
    range("level", params.level, 0, depth)?;
    range("j_max", params.j_max, 1, 16)?;
    range("stages", params.stages, 1, 1 << 16)?;
    range("functions", params.functions, 1, 100_000)?;
    if let (Some(a), Some(b)) = (params.n_min, params.n_max) {
        if a > b {
            return Err(invalid(format!("params.n_min: {a} exceeds n_max {b}")));
        }
    }
    if let Some(t) = params.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("params.tol: must be positive, got {t}")));
        }
    }
    if let Some(l) = params.catalog_level {
        if !(1..=12).contains(&l) {
            return Err(invalid(format!("params.catalog_level: {l} outside 1..=12")));
        }
    }
    if study == Study::TruncationStudy && !matches!(space.map(|s| s.kind()), Some(DomainKind::HalfLine)) {
        return Err(invalid("space.kind: truncation_study needs a half_line space"));
    }
    if study == Study::TraceStudy {
        let n_min = params.n_min.unwrap_or(1.min(depth));
        let n_max = params.n_max.unwrap_or(depth);
        if n_min > n_max {
            return Err(invalid(format!("params.n_min: {n_min} exceeds n_max {n_max}")));
        }
    }
    Ok(())
}
