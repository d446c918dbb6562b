//! Sufficient rigidity certificates from sampled compact leaves.

use crate::dgla::{b_form, DefiningCouple};
use crate::error::{Error, Result};
use crate::forms::sup_norm_sq;
use crate::hodge::{first_positive, harmonic_b_f, laplace_spectrum, LeafSpec, SpectrumConstraint};
use rayon::prelude::*;
use serde::Serialize;

/// Below this `sup |b_F|^2` a leaf counts as parallelizable.
const PARALLEL_TOL: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafBranch {
    /// `b_F = 0`.
    Parallelizable,
    /// `sup |b_F|^2 < lambda_F` holds.
    Pass,
    /// The sufficient criterion does not hold.
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafCertificate {
    pub transverse: Vec<f64>,
    pub branch: LeafBranch,
    pub b_f_sup_sq: (f64, f64),
    pub lambda: Option<f64>,
    /// `lambda_F - sup |b_F|^2` (upper bound); infinite on parallelizable leaves.
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RigidityVerdict {
    /// Every sampled leaf has `b_F = 0`.
    StronglyRigid,
    /// Every sampled leaf passes.
    Rigid,
    /// Some leaf fails the sufficient criterion; nothing is asserted.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityCertificate {
    pub verdict: RigidityVerdict,
    pub leaves: Vec<LeafCertificate>,
    pub min_margin: f64,
    pub bandwidth: usize,
}

/// Checks every sampled leaf: parallelizable when `b_F = 0`, otherwise
/// compares `sup |b_F|^2` with the first positive Laplace eigenvalue on the
/// zero-moment subspace of `b_F`. Leaves must be tangent to `ker gamma` and
/// carry a complex structure.
pub fn rigidity_certificate(c: &DefiningCouple, leaves: &[LeafSpec], bandwidth: usize) -> Result<RigidityCertificate> {
    if leaves.is_empty() {
        return Err(Error::Precondition("no leaves sampled".into()));
    }
    let b = b_form(c);
    let certs: Vec<LeafCertificate> = leaves
        .par_iter()
        .map(|leaf| -> Result<LeafCertificate> {
            if leaf.restrict(c.gamma())?.norm() > 1e-10 {
                return Err(Error::Precondition(format!(
                    "{:?} is not a leaf: gamma does not vanish on it",
                    leaf.transverse()
                )));
            }
            leaf.complex()?;
            let transverse = leaf.transverse().iter().map(|(_, v)| *v).collect();
            let bf = harmonic_b_f(&b, leaf)?;
            let sup = sup_norm_sq(&bf, 9)?;
            if sup.1 <= PARALLEL_TOL {
                return Ok(LeafCertificate {
                    transverse,
                    branch: LeafBranch::Parallelizable,
                    b_f_sup_sq: sup,
                    lambda: None,
                    margin: f64::INFINITY,
                });
            }
            let w = leaf.moment_weight(&bf)?;
            let ev = laplace_spectrum(leaf, 4, &SpectrumConstraint::Moment(w), bandwidth.max(1))?;
            let lambda = first_positive(&ev).ok_or_else(|| Error::Numerical("no positive eigenvalue".into()))?;
            let margin = lambda - sup.1;
            Ok(LeafCertificate {
                transverse,
                branch: if margin > 0.0 { LeafBranch::Pass } else { LeafBranch::Fail },
                b_f_sup_sq: sup,
                lambda: Some(lambda),
                margin,
            })
        })
        .collect::<Result<_>>()?;
    let verdict = if certs.iter().all(|l| l.branch == LeafBranch::Parallelizable) {
        RigidityVerdict::StronglyRigid
    } else if certs.iter().all(|l| l.branch != LeafBranch::Fail) {
        RigidityVerdict::Rigid
    } else {
        RigidityVerdict::Inconclusive
    };
    let min_margin = certs.iter().map(|l| l.margin).fold(f64::INFINITY, f64::min);
    Ok(RigidityCertificate { verdict, leaves: certs, min_margin, bandwidth })
}

/// `count` equally spaced values in `[0, 1)`.
pub fn uniform_samples(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / count as f64).collect()
}
