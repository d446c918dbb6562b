//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "product-s1-t2"
//! bandwidth = 3
//!
//! [tolerances]        # optional, all positive
//! residual = 1e-10
//! rank = 1e-9
//!
//! [domain]            # flat torus; metric row-major, defaults to the identity
//! dim = 3
//!
//! [couple]            # gamma and the components of X
//! gamma = { terms = [{ k = [0, 0, 0], I = [3], re = 1.0 }] }
//! x = [{ terms = [] }, { terms = [] }, { terms = [{ k = [0, 0, 0], I = [], re = 1.0 }] }]
//!
//! [[analysis]]
//! kind = "frobenius"
//! ```
//!
//! Instead of `[domain]` and `[couple]` a scenario may give `[levi]` with
//! `m` (complex dimension), `axis` (1-based ambient axis of `r`) and `scale`:
//! the hypersurface `{r = 0}` of the standard complex torus, with `r = scale * axis`.
//! Forms on it use the coordinates of `L`.
//!
//! Terms carry a frequency `k`, a 1-based increasing index set `I` and the
//! coefficient `re` (+ `im`, default 0). Numbers are decimal doubles.

use folideform::dgla::DefiningCouple;
use folideform::forms::{FormLiteral, TermLiteral};
use folideform::levi::{ComplexTorusAmbient, DefiningFunction, LeviHypersurface};
use folideform::{Domain, FlatTorusDomain, TrigForm, VectorField};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub k: Vec<i32>,
    #[serde(rename = "I")]
    pub axes: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// A form; the degree may be omitted when some term fixes it.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    #[serde(default)]
    pub degree: Option<usize>,
    pub terms: Vec<TermSpec>,
}

impl FormSpec {
    pub fn build(&self, domain: &Domain, expected: Option<usize>) -> Result<TrigForm, ConfigError> {
        let from_terms = self.terms.first().map(|t| t.axes.len());
        let degree = self.degree.or(from_terms).or(expected).ok_or_else(|| invalid("form with no terms needs a degree"))?;
        if let Some(e) = expected {
            if degree != e {
                return Err(invalid(format!("expected a {e}-form, found degree {degree}")));
            }
        }
        for t in &self.terms {
            if t.axes.len() != degree {
                return Err(invalid(format!("term {:?} does not have degree {degree}", t.axes)));
            }
            if t.k.len() != domain.dim() {
                return Err(invalid(format!("frequency {:?} has the wrong length for dimension {}", t.k, domain.dim())));
            }
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(invalid("coefficients must be finite"));
            }
        }
        let lit = FormLiteral {
            degree,
            terms: self
                .terms
                .iter()
                .map(|t| TermLiteral { k: t.k.clone(), axes: t.axes.clone(), re: t.re, im: t.im })
                .collect(),
        };
        lit.build(domain).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    #[serde(default)]
    pub metric: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub orientation: i32,
}

fn one() -> i32 {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoupleSpec {
    pub gamma: FormSpec,
    pub x: Vec<FormSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LeviSpec {
    pub m: usize,
    pub axis: usize,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual threshold for Frobenius, Maurer-Cartan and identity checks.
    #[serde(default = "default_residual")]
    pub residual: f64,
    /// Singular values at or below this count as zero.
    #[serde(default = "default_rank")]
    pub rank: f64,
}

fn default_residual() -> f64 {
    1e-10
}

fn default_rank() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: default_residual(), rank: default_rank() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Analysis {
    Frobenius,
    CClass,
    McResidual {
        form: FormSpec,
        #[serde(default = "unit_scales")]
        scales: Vec<f64>,
    },
    FormalExtend {
        beta: FormSpec,
        order: usize,
    },
    Cohomology {
        degrees: Vec<usize>,
        #[serde(default)]
        bandwidths: Option<Vec<usize>>,
    },
    TangentCone {
        beta: FormSpec,
        tau: Vec<FormSpec>,
    },
    LeviScan {
        graphs: Vec<FormSpec>,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    DeformationDerivative {
        p: FormSpec,
        #[serde(default)]
        formal: bool,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    Rigidity {
        #[serde(default = "default_samples")]
        samples: usize,
        /// 1-based leaf axes; required without `[levi]`.
        #[serde(default)]
        leaf_axes: Option<Vec<usize>>,
    },
    Uniqueness {
        beta: FormSpec,
        #[serde(default)]
        seed: u64,
    },
    Spectrum {
        #[serde(default = "default_count")]
        count: usize,
    },
    GammaWedgeOmega,
}

fn unit_scales() -> Vec<f64> {
    vec![1.0]
}

fn default_grid() -> usize {
    33
}

fn default_samples() -> usize {
    17
}

fn default_count() -> usize {
    6
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::Frobenius => "frobenius",
            Analysis::CClass => "c-class",
            Analysis::McResidual { .. } => "mc-residual",
            Analysis::FormalExtend { .. } => "formal-extend",
            Analysis::Cohomology { .. } => "cohomology",
            Analysis::TangentCone { .. } => "tangent-cone",
            Analysis::LeviScan { .. } => "levi-scan",
            Analysis::DeformationDerivative { .. } => "deformation-derivative",
            Analysis::Rigidity { .. } => "rigidity",
            Analysis::Uniqueness { .. } => "uniqueness",
            Analysis::Spectrum { .. } => "spectrum",
            Analysis::GammaWedgeOmega => "gamma-wedge-omega",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub bandwidth: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub couple: Option<CoupleSpec>,
    #[serde(default)]
    pub levi: Option<LeviSpec>,
    #[serde(default)]
    pub analysis: Vec<Analysis>,
    /// Free-form annotations copied into the report.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// Where the analyses run.
pub enum Geometry {
    /// A flat torus, optionally with a couple.
    Torus { domain: Domain, couple: Option<DefiningCouple> },
    Levi(Box<LeviHypersurface>),
}

impl Geometry {
    pub fn domain(&self) -> &Domain {
        match self {
            Geometry::Torus { domain, .. } => domain,
            Geometry::Levi(h) => h.domain(),
        }
    }

    pub fn couple(&self) -> Option<&DefiningCouple> {
        match self {
            Geometry::Torus { couple, .. } => couple.as_ref(),
            Geometry::Levi(h) => Some(h.couple()),
        }
    }

    pub fn levi(&self) -> Option<&LeviHypersurface> {
        match self {
            Geometry::Levi(h) => Some(h),
            Geometry::Torus { .. } => None,
        }
    }
}

/// A parsed scenario with its geometry built and every input checked.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub geometry: Geometry,
}

fn build_domain(spec: &DomainSpec) -> Result<Domain, ConfigError> {
    if spec.dim == 0 {
        return Err(invalid("domain dimension must be positive"));
    }
    match &spec.metric {
        None if spec.orientation == 1 => FlatTorusDomain::euclidean(spec.dim),
        None => FlatTorusDomain::new(nalgebra::DMatrix::identity(spec.dim, spec.dim), spec.orientation),
        Some(m) => {
            if m.len() != spec.dim * spec.dim {
                return Err(invalid(format!("metric needs {} entries", spec.dim * spec.dim)));
            }
            FlatTorusDomain::new(nalgebra::DMatrix::from_row_slice(spec.dim, spec.dim, m), spec.orientation)
        }
    }
    .map_err(|e| invalid(e.to_string()))
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig) -> Result<Self, ConfigError> {
        let tol = &config.tolerances;
        if !(tol.residual > 0.0 && tol.rank > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if config.analysis.is_empty() {
            return Err(invalid("no analyses requested"));
        }
        if config.bandwidth == 0 {
            return Err(invalid("bandwidth must be positive"));
        }
        let geometry = match (&config.domain, &config.couple, &config.levi) {
            (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
                return Err(invalid("[levi] excludes [domain] and [couple]"));
            }
            (None, _, None) => return Err(invalid("a scenario needs [domain] or [levi]")),
            (None, None, Some(l)) => {
                if l.axis == 0 || l.axis > 2 * l.m {
                    return Err(invalid(format!("levi axis {} outside 1..={}", l.axis, 2 * l.m)));
                }
                let amb = ComplexTorusAmbient::standard(l.m).map_err(|e| invalid(e.to_string()))?;
                let r = DefiningFunction::linear(l.axis - 1, l.scale).map_err(|e| invalid(e.to_string()))?;
                Geometry::Levi(Box::new(LeviHypersurface::new(&amb, &r).map_err(|e| invalid(e.to_string()))?))
            }
            (Some(d), c, None) => {
                let domain = build_domain(d)?;
                let couple = match c {
                    None => None,
                    Some(c) => {
                        let gamma = c.gamma.build(&domain, Some(1))?;
                        if c.x.len() != domain.dim() {
                            return Err(invalid("X needs one component per axis"));
                        }
                        let comps =
                            c.x.iter().map(|f| f.build(&domain, Some(0))).collect::<Result<Vec<_>, _>>()?;
                        let x = VectorField::new(comps).map_err(|e| invalid(e.to_string()))?;
                        Some(DefiningCouple::new(gamma, x).map_err(|e| invalid(e.to_string()))?)
                    }
                };
                Geometry::Torus { domain, couple }
            }
        };
        let scenario = Scenario { config, geometry };
        scenario.validate_analyses()?;
        Ok(scenario)
    }

    fn check_form(&self, f: &FormSpec, degree: usize, what: &str) -> Result<TrigForm, ConfigError> {
        let form = f.build(self.geometry.domain(), Some(degree)).map_err(|e| invalid(format!("{what}: {e}")))?;
        if form.bandwidth() > self.config.bandwidth {
            return Err(invalid(format!(
                "{what} has bandwidth {} above the scenario bandwidth {}",
                form.bandwidth(),
                self.config.bandwidth
            )));
        }
        Ok(form)
    }

    fn validate_analyses(&self) -> Result<(), ConfigError> {
        let n = self.geometry.domain().dim();
        if let Some(c) = self.geometry.couple() {
            if c.bandwidth() > self.config.bandwidth {
                return Err(invalid("couple bandwidth exceeds the scenario bandwidth"));
            }
        }
        for a in &self.config.analysis {
            let kind = a.kind();
            let needs_couple = !matches!(a, Analysis::Uniqueness { .. } | Analysis::Spectrum { .. });
            if needs_couple && self.geometry.couple().is_none() {
                return Err(invalid(format!("{kind} needs a couple")));
            }
            match a {
                Analysis::McResidual { form, scales } => {
                    self.check_form(form, 1, kind)?;
                    if scales.is_empty() || scales.iter().any(|s| !s.is_finite()) {
                        return Err(invalid("mc-residual scales must be finite and nonempty"));
                    }
                }
                Analysis::FormalExtend { beta, order } => {
                    self.check_form(beta, 1, kind)?;
                    if *order < 2 {
                        return Err(invalid("formal-extend order must be at least 2"));
                    }
                }
                Analysis::Cohomology { degrees, bandwidths } => {
                    if degrees.is_empty() || degrees.iter().any(|d| *d >= n) {
                        return Err(invalid(format!("cohomology degrees must lie in 0..{n}")));
                    }
                    if bandwidths.as_ref().is_some_and(|b| b.is_empty() || b.contains(&0)) {
                        return Err(invalid("cohomology bandwidths must be positive"));
                    }
                }
                Analysis::TangentCone { beta, tau } => {
                    self.check_form(beta, 1, kind)?;
                    if tau.is_empty() {
                        return Err(invalid("tangent-cone needs at least one tau"));
                    }
                    for t in tau {
                        self.check_form(t, 1, kind)?;
                    }
                }
                Analysis::LeviScan { graphs, grid } => {
                    if self.geometry.levi().is_none() {
                        return Err(invalid("levi-scan needs [levi]"));
                    }
                    if graphs.is_empty() || *grid < 3 {
                        return Err(invalid("levi-scan needs graphs and a grid of at least 3"));
                    }
                    for g in graphs {
                        self.check_form(g, 0, kind)?;
                    }
                }
                Analysis::DeformationDerivative { p, grid, .. } => {
                    if self.geometry.levi().is_none() {
                        return Err(invalid("deformation-derivative needs [levi]"));
                    }
                    if *grid < 3 {
                        return Err(invalid("grid must be at least 3"));
                    }
                    self.check_form(p, 0, kind)?;
                }
                Analysis::Rigidity { samples, leaf_axes } => {
                    if *samples == 0 {
                        return Err(invalid("rigidity needs at least one sample"));
                    }
                    match (self.geometry.levi(), leaf_axes) {
                        (Some(_), None) => {}
                        (Some(_), Some(_)) => return Err(invalid("leaf_axes is implied by [levi]")),
                        (None, None) => return Err(invalid("rigidity on a torus needs leaf_axes")),
                        (None, Some(ax)) => {
                            if ax.len() + 1 != n || ax.iter().any(|i| *i == 0 || *i > n) {
                                return Err(invalid("leaf_axes must list all but one axis, 1-based"));
                            }
                        }
                    }
                }
                Analysis::Uniqueness { beta, .. } => {
                    if self.geometry.levi().is_some() || n % 2 != 0 {
                        return Err(invalid("uniqueness runs on an even-dimensional torus"));
                    }
                    self.check_form(beta, 1, kind)?;
                }
                Analysis::Spectrum { count } => {
                    if *count == 0 {
                        return Err(invalid("spectrum count must be positive"));
                    }
                }
                Analysis::GammaWedgeOmega => {
                    if self.geometry.levi().is_none() {
                        return Err(invalid("gamma-wedge-omega needs [levi]"));
                    }
                }
                Analysis::Frobenius | Analysis::CClass => {}
            }
        }
        Ok(())
    }
}
