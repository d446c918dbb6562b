use crate::config::{Analysis, ConfigError, Geometry, Scenario, ScenarioConfig, Tolerances};
use folideform::dgla::{c_class, delta, frobenius_checks, DefiningCouple};
use folideform::hodge::{cohomology_dims, laplace_spectrum, LeafSpec, SpectralOperator, SpectrumConstraint};
use folideform::levi::{
    rigidity_certificate, uniform_samples, uniqueness_kernel_test, GraphFunction, DEFAULT_T_STEPS,
};
use folideform::mc::{formal_mc_extend, mc_residual, tangent_cone_test_product};
use folideform::{ext_d, wedge, TrigForm};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Command-line overrides applied on top of a scenario file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub bandwidth: Option<usize>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisOutcome {
    pub index: usize,
    pub kind: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub description: String,
    pub config_sha256: String,
    pub bandwidth: usize,
    pub tolerances: Tolerances,
    pub status: Status,
    pub analyses: Vec<AnalysisOutcome>,
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub notes: std::collections::BTreeMap<String, String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per scalar leaf of the JSON report: `analysis,kind,path,value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["analysis", "kind", "path", "value"]).expect("in-memory write");
        let header = json!({
            "scenario": self.scenario,
            "config_sha256": self.config_sha256,
            "bandwidth": self.bandwidth,
            "tolerances": self.tolerances,
            "status": self.status,
        });
        let mut rows = Vec::new();
        flatten(&header, String::new(), &mut rows);
        for (path, v) in rows {
            w.write_record(["", "", &path, &v]).expect("in-memory write");
        }
        for a in &self.analyses {
            let mut rows = Vec::new();
            let body = serde_json::to_value(a).expect("outcome serializes");
            flatten(&body, String::new(), &mut rows);
            for (path, v) in rows {
                w.write_record([&a.index.to_string(), &a.kind, &path, &v]).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn flatten(v: &Value, prefix: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(x, join(k), out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(x, join(&i.to_string()), out);
            }
        }
        Value::String(s) => out.push((prefix, s.clone())),
        other => out.push((prefix, other.to_string())),
    }
}

pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Parses, validates and runs a scenario. Validation problems are returned as
/// errors; analysis failures are recorded in the report, which stops at the
/// first one.
pub fn run_scenario(text: &str, overrides: &Overrides) -> Result<Report, ConfigError> {
    let mut config = ScenarioConfig::parse(text)?;
    if let Some(t) = overrides.tol {
        config.tolerances.residual = t;
    }
    if let Some(b) = overrides.bandwidth {
        config.bandwidth = b;
    }
    let scenario = Scenario::from_config(config)?;
    let mut analyses = Vec::new();
    let mut status = Status::Ok;
    for (index, a) in scenario.config.analysis.iter().enumerate() {
        let outcome = match run_analysis(&scenario, a) {
            Ok(v) => AnalysisOutcome { index, kind: a.kind().into(), status: Status::Ok, result: Some(v), error: None },
            Err(e) => AnalysisOutcome {
                index,
                kind: a.kind().into(),
                status: Status::Failed,
                result: None,
                error: Some(e.to_string()),
            },
        };
        let failed = outcome.status == Status::Failed;
        analyses.push(outcome);
        if failed {
            status = Status::Failed;
            break;
        }
    }
    let c = &scenario.config;
    Ok(Report {
        scenario: c.name.clone(),
        description: c.description.clone(),
        config_sha256: config_hash(text),
        bandwidth: c.bandwidth,
        tolerances: c.tolerances.clone(),
        status,
        analyses,
        notes: c.notes.clone(),
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn form(spec: &crate::config::FormSpec, s: &Scenario, degree: usize) -> folideform::Result<TrigForm> {
    spec.build(s.geometry.domain(), Some(degree)).map_err(|e| folideform::Error::Precondition(e.to_string()))
}

fn cohomology(c: &DefiningCouple, degree: usize, b: usize, threshold: f64) -> folideform::Result<Value> {
    let n = c.domain().dim();
    let mid = c.z_space(degree, b)?;
    let prev = if degree > 0 {
        Some(SpectralOperator::assemble(&c.z_space(degree - 1, b)?, &mid, |f| delta(f, c))?)
    } else {
        None
    };
    let next = if degree + 1 < n {
        Some(SpectralOperator::assemble(&mid, &c.z_space(degree + 1, b)?, |f| delta(f, c))?)
    } else {
        None
    };
    Ok(to_value(&cohomology_dims(prev.as_ref(), next.as_ref(), threshold)?))
}

fn run_analysis(s: &Scenario, a: &Analysis) -> folideform::Result<Value> {
    let tol = &s.config.tolerances;
    let bw = s.config.bandwidth;
    let couple = || s.geometry.couple().expect("validated");
    let levi = || s.geometry.levi().expect("validated");
    match a {
        Analysis::Frobenius => {
            let c = couple();
            let rep = frobenius_checks(c, tol.residual)?;
            let n = c.domain().dim();
            let mut v = to_value(&rep);
            if n >= 3 {
                let top = wedge(&ext_d(c.gamma()), c.gamma())?;
                let mean: Vec<Value> = c
                    .domain()
                    .basis(3)
                    .iter()
                    .map(|set| json!({ "I": set.axes().iter().map(|i| i + 1).collect::<Vec<_>>(), "re": top.mean_coeff(*set).re }))
                    .collect();
                v["dgamma_wedge_gamma_mean"] = Value::Array(mean);
            }
            Ok(v)
        }
        Analysis::CClass => Ok(to_value(&c_class(couple(), bw, tol.residual)?)),
        Analysis::McResidual { form: f, scales } => {
            let base = form(f, s, 1)?;
            let rows = scales
                .iter()
                .map(|t| {
                    let (r, n) = mc_residual(&base.scale_real(*t), couple())?;
                    Ok(json!({ "scale": t, "residual_norm": n, "maurer_cartan": n <= tol.residual, "residual": r }))
                })
                .collect::<folideform::Result<Vec<_>>>()?;
            Ok(Value::Array(rows))
        }
        Analysis::FormalExtend { beta, order } => {
            let series = formal_mc_extend(&form(beta, s, 1)?, *order, couple(), bw, tol.residual)?;
            let mut v = to_value(&series);
            if let Some(ob) = &series.obstruction {
                let dom = ob.witness.domain();
                let harmonic: Vec<Value> = dom
                    .basis(2)
                    .iter()
                    .filter_map(|set| {
                        let c = ob.witness.mean_coeff(*set);
                        (c.norm() > 0.0)
                            .then(|| json!({ "I": set.axes().iter().map(|i| i + 1).collect::<Vec<_>>(), "re": c.re, "im": c.im }))
                    })
                    .collect();
                v["harmonic_witness"] = Value::Array(harmonic);
            }
            Ok(v)
        }
        Analysis::Cohomology { degrees, bandwidths } => {
            let bws = bandwidths.clone().unwrap_or_else(|| vec![bw]);
            let mut out = Vec::new();
            for b in bws {
                for d in degrees {
                    out.push(json!({ "bandwidth": b, "degree": d, "report": cohomology(couple(), *d, b, tol.rank)? }));
                }
            }
            Ok(Value::Array(out))
        }
        Analysis::TangentCone { beta, tau } => {
            let tau = tau.iter().map(|t| form(t, s, 1)).collect::<folideform::Result<Vec<_>>>()?;
            Ok(to_value(&tangent_cone_test_product(&form(beta, s, 1)?, &tau, couple(), tol.residual)?))
        }
        Analysis::LeviScan { graphs, grid } => {
            let h = levi();
            let cap = (grid - 1) / 4;
            let rows = graphs
                .iter()
                .map(|g| {
                    let a = GraphFunction::with_default_radius(form(g, s, 0)?)?;
                    let v = h.levi_flat_check(&a, tol.residual, *grid, cap)?;
                    Ok(json!({ "graph": a.a(), "sup": a.sup(), "verdict": v }))
                })
                .collect::<folideform::Result<Vec<_>>>()?;
            Ok(Value::Array(rows))
        }
        Analysis::DeformationDerivative { p, formal, grid } => {
            let h = levi();
            Ok(to_value(&h.deformation_derivative_check(&form(p, s, 0)?, &DEFAULT_T_STEPS, *formal, *grid, (grid - 1) / 4)?))
        }
        Analysis::Rigidity { samples, leaf_axes } => {
            let values = uniform_samples(*samples);
            let leaves = match &s.geometry {
                Geometry::Levi(h) => values.iter().map(|v| h.leaf(*v)).collect::<folideform::Result<Vec<_>>>()?,
                Geometry::Torus { domain, .. } => {
                    let axes: Vec<usize> = leaf_axes.as_ref().expect("validated").iter().map(|i| i - 1).collect();
                    values
                        .iter()
                        .map(|v| LeafSpec::new(domain, &axes, &[*v])?.with_standard_complex())
                        .collect::<folideform::Result<Vec<_>>>()?
                }
            };
            Ok(to_value(&rigidity_certificate(couple(), &leaves, bw)?))
        }
        Analysis::Uniqueness { beta, seed } => {
            let d = s.geometry.domain();
            let axes: Vec<usize> = (0..d.dim()).collect();
            let leaf = LeafSpec::new(d, &axes, &[])?.with_standard_complex()?;
            Ok(to_value(&uniqueness_kernel_test(&leaf, &form(beta, s, 1)?, bw, *seed)?))
        }
        Analysis::Spectrum { count } => {
            let leaf = match &s.geometry {
                Geometry::Levi(h) => h.leaf(0.0)?,
                Geometry::Torus { domain, .. } => {
                    let axes: Vec<usize> = (0..domain.dim()).collect();
                    LeafSpec::new(domain, &axes, &[])?
                }
            };
            Ok(json!({ "eigenvalues": laplace_spectrum(&leaf, *count, &SpectrumConstraint::All, bw)? }))
        }
        Analysis::GammaWedgeOmega => Ok(json!({ "integral": levi().gamma_wedge_omega()? })),
    }
}
