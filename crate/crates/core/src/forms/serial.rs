//! JSON literals for domains and forms.
//!
//! Index sets are written 1-based, as in `{"k": [0, 1], "I": [1], "re": 0.5, "im": 0.0}`.

use super::{Domain, FlatTorusDomain, IndexSet, TrigForm, C64};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainLiteral {
    pub dim: usize,
    /// Row-major `dim x dim` metric.
    pub metric: Vec<f64>,
    pub orientation: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermLiteral {
    pub k: Vec<i32>,
    #[serde(rename = "I")]
    pub axes: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormLiteral {
    pub degree: usize,
    pub terms: Vec<TermLiteral>,
}

impl DomainLiteral {
    pub fn from_domain(d: &FlatTorusDomain) -> Self {
        let n = d.dim();
        let metric = (0..n * n).map(|i| d.metric()[(i / n, i % n)]).collect();
        DomainLiteral { dim: n, metric, orientation: d.orientation() }
    }

    pub fn build(&self) -> Result<Domain> {
        if self.metric.len() != self.dim * self.dim {
            return Err(Error::InvalidMetric(format!(
                "{} metric entries for dimension {}",
                self.metric.len(),
                self.dim
            )));
        }
        FlatTorusDomain::new(DMatrix::from_row_slice(self.dim, self.dim, &self.metric), self.orientation)
    }
}

impl FormLiteral {
    pub fn from_form(a: &TrigForm) -> Self {
        let terms = a
            .terms()
            .map(|(k, s, c)| TermLiteral {
                k: k.clone(),
                axes: s.axes().into_iter().map(|i| i + 1).collect(),
                re: c.re,
                im: c.im,
            })
            .collect();
        FormLiteral { degree: a.degree(), terms }
    }

    /// Builds the form; axes must be strictly increasing and 1-based.
    pub fn build(&self, domain: &Domain) -> Result<TrigForm> {
        let n = domain.dim();
        let mut raw = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if t.axes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidTerm(format!("index set {:?} is not strictly increasing", t.axes)));
            }
            if t.axes.iter().any(|&i| i == 0 || i > n) {
                return Err(Error::InvalidTerm(format!("index set {:?} outside 1..={n}", t.axes)));
            }
            let zero_based: Vec<usize> = t.axes.iter().map(|i| i - 1).collect();
            let (set, _) = IndexSet::from_unordered(&zero_based, n)?;
            raw.push((t.k.clone(), set, C64::new(t.re, t.im)));
        }
        TrigForm::from_terms(domain, self.degree, raw)
    }
}

impl Serialize for TrigForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FormLiteral::from_form(self).serialize(s)
    }
}

impl Serialize for super::VectorField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let comps: Vec<FormLiteral> = self.components().iter().map(FormLiteral::from_form).collect();
        comps.serialize(s)
    }
}

impl TrigForm {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FormLiteral::from_form(self)).expect("literal serializes")
    }

    pub fn from_json(domain: &Domain, text: &str) -> Result<TrigForm> {
        let lit: FormLiteral = serde_json::from_str(text).map_err(|e| Error::InvalidTerm(e.to_string()))?;
        lit.build(domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let d = FlatTorusDomain::euclidean(3).unwrap();
        let f = TrigForm::monomial(&d, &[1, -2, 0], &[0, 2], C64::new(0.1 + 0.2, -1.0 / 3.0)).unwrap();
        let back = TrigForm::from_json(&d, &f.to_json()).unwrap();
        assert_eq!(back, f);
        let lit = DomainLiteral::from_domain(&d);
        assert_eq!(*lit.build().unwrap(), *d);
    }

    #[test]
    fn rejects_unsorted_axes() {
        let d = FlatTorusDomain::euclidean(2).unwrap();
        let text = r#"{"degree":2,"terms":[{"k":[0,0],"I":[2,1],"re":1.0,"im":0.0}]}"#;
        assert!(TrigForm::from_json(&d, text).is_err());
    }
}
