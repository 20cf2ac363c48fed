//! Computational checks that modified rejection sampling is lossless.
//!
//! Three independent angles:
//!
//! * [`rejection_identity`]: the pointwise algebra behind a single accept /
//!   resample step, `min(p, q) + max(0, q − p) = q`, and the matching
//!   rejection mass `1 − Σ min(p, q) = Σ max(0, q − p)`.
//! * [`enumerate_sps_joint`] vs [`enumerate_ars_joint`]: exact joints of
//!   whole multi-loop runs on small tabular models.
//! * [`chi_square_gof`]: sampled runs of the real sampler against the exact
//!   target marginal.

mod enumerate;
mod gof;
mod suite;

pub use enumerate::{
    enumerate_ars_joint, enumerate_loop, enumerate_sps_joint, enumerate_sps_joint_with_stats, first_token_marginal,
    joint_tv, Branch, EnumerationStats, Joint, OutcomeTree, MAX_HORIZON, MAX_LOOKAHEAD, MAX_VOCAB,
};
pub use gof::{chi_square_gof, critical_value, GofResult, MIN_SAMPLES, SIGNIFICANCE};
pub use suite::{
    build_instance, identity_suite, losslessness_suite, random_distribution, random_tabular_pair, run_instance,
    run_verify, sps_first_token_gof, IdentitySummary, Instance, InstanceResult, VerifyOptions, VerifyReport,
    SUITE_METHODS,
};

use serde::Serialize;

use crate::dist::{Distribution, KahanSum};
use crate::error::{Error, Result};

/// TV bound between enumerated SpS and ArS joints.
pub const JOINT_TV_TOLERANCE: f64 = 1e-9;
/// Bound on the single-step algebraic identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `maxₓ |min(p, q) + max(0, q − p) − q|`.
    pub pointwise_deviation: f64,
    /// `1 − Σ min(p, q)`.
    pub rejection_mass: f64,
    /// `|(1 − Σ min(p, q)) − Σ max(0, q − p)|`.
    pub rejection_mass_gap: f64,
}

impl IdentityCheck {
    pub fn max_deviation(&self) -> f64 {
        self.pointwise_deviation.max(self.rejection_mass_gap)
    }
}

/// Evaluates the accept-or-resample identities for one `(q, p)` pair.
pub fn rejection_identity(q: &Distribution, p: &Distribution) -> Result<IdentityCheck> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch { left: q.len(), right: p.len() });
    }
    let mut pointwise: f64 = 0.0;
    let mut overlap = KahanSum::new();
    let mut positive = KahanSum::new();
    for (&qx, &px) in q.probs().iter().zip(p.probs()) {
        let kept = px.min(qx);
        let extra = (qx - px).max(0.0);
        pointwise = pointwise.max((kept + extra - qx).abs());
        overlap.add(kept);
        positive.add(extra);
    }
    let rejection_mass = 1.0 - overlap.value();
    Ok(IdentityCheck {
        pointwise_deviation: pointwise,
        rejection_mass,
        rejection_mass_gap: (rejection_mass - positive.value()).abs(),
    })
}
