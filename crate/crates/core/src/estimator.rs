//! Adjacency probability estimation.
//!
//! Node `q` estimates `p(i, j)` for a pair `i != j` from the first source of
//! information that applies, in this order:
//!
//! 1. `q` is an endpoint: its own neighbor table is exact.
//! 2. The pair was last seen adjacent at distance `d`, and not enough time has
//!    passed for the nodes to have separated beyond range at top speed.
//! 3. Both nodes have fresh location information. Each node's position is
//!    modelled as Gaussian around its plan, or around its PLI report if the
//!    report is inconsistent with the plan; the probability that the two are
//!    within range is a non-central chi-square CDF.
//! 4. A fresh social tie: `R / R_mem`.
//! 5. A small default `p0`.

use crate::chisq::{chi2_quantile_2, noncentral_chi2_cdf_2};
use crate::geometry::Point2;
use crate::linkstate::LinkStateStore;
use crate::mobility::MobilityPlan;
use crate::pli::{PliParams, PliRecord};
use crate::radio::NodeId;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// One minus the hypothesis-test confidence level.
    pub alpha: f64,
    pub pli_staleness_threshold: f64,
    pub social_staleness_threshold: f64,
    pub p0: f64,
    pub sigma_n: Vec<f64>,
    pub v_max: Vec<f64>,
    pub d_max: Vec<f64>,
    pub pli: PliParams,
}

impl EstimatorParams {
    pub fn uniform(n: usize, sigma_n: f64, v_max: f64, d_max: f64) -> Self {
        Self {
            alpha: 0.05,
            pli_staleness_threshold: 10.0,
            social_staleness_threshold: 60.0,
            p0: 0.01,
            sigma_n: vec![sigma_n; n],
            v_max: vec![v_max; n],
            d_max: vec![d_max; n],
            pli: PliParams::default(),
        }
    }

    pub fn effective_range(&self, i: NodeId, j: NodeId) -> f64 {
        self.d_max[i].min(self.d_max[j])
    }
}

/// Which rule produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimateCase {
    OwnNeighborTable = 1,
    RecentAdjacency = 2,
    Location = 3,
    SocialTie = 4,
    Default = 5,
}

impl EstimateCase {
    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyEstimate {
    pub p_hat: f64,
    pub case_used: EstimateCase,
}

/// Rejects "node follows its plan" when the PLI is too far from the plan.
pub fn deviation_test<T: Real>(phi: Point2<T>, theta: Point2<T>, sigma_p: T, sigma_n: T, alpha: T) -> bool {
    let sigma = (sigma_p * sigma_p + sigma_n * sigma_n).sqrt();
    let Ok(q) = chi2_quantile_2(T::one() - alpha) else {
        return false;
    };
    phi.distance(theta) > sigma * q.sqrt()
}

/// `P(|X_i - X_j| <= d_max)` for independent isotropic Gaussian positions.
pub fn location_adjacency<T: Real>(mu_i: Point2<T>, sigma_i: T, mu_j: Point2<T>, sigma_j: T, d_max: T) -> T {
    let var = sigma_i * sigma_i + sigma_j * sigma_j;
    let lambda = mu_i.distance_sq(mu_j) / var;
    noncentral_chi2_cdf_2(d_max * d_max / var, lambda).unwrap_or_else(|_| T::zero())
}

/// Everything node `q` knows at time `now`.
pub struct NodeView<'a> {
    pub q: NodeId,
    pub now: f64,
    pub store: &'a LinkStateStore,
    /// Latest PLI held by `q`, indexed by subject.
    pub pli: &'a [Option<PliRecord>],
    /// `q`'s own exact position.
    pub own_position: Point2<f64>,
    /// Plans as visible to `q`, indexed by node.
    pub plans: &'a [MobilityPlan<f64>],
    pub params: &'a EstimatorParams,
}

struct LocationFix {
    phi: Point2<f64>,
    sampled_at: f64,
    staleness: f64,
}

impl NodeView<'_> {
    fn location_fix(&self, k: NodeId) -> Option<LocationFix> {
        if k == self.q {
            return Some(LocationFix { phi: self.own_position, sampled_at: self.now, staleness: 0.0 });
        }
        let rec = self.pli.get(k).copied().flatten()?;
        let staleness = rec.staleness(self.now);
        (staleness <= self.params.pli_staleness_threshold).then_some(LocationFix {
            phi: rec.phi,
            sampled_at: rec.timestamp,
            staleness,
        })
    }

    /// Gaussian model `(mean, sigma)` for node `k`'s current position.
    fn location_model(&self, k: NodeId, fix: &LocationFix) -> (Point2<f64>, f64) {
        let p = self.params;
        let sigma_p = p.pli.sigma_p(fix.staleness);
        let plan = self.plans.get(k);
        let planned_now = plan.and_then(|pl| pl.visible_position(self.now));
        let planned_at_fix = plan.and_then(|pl| pl.visible_position(fix.sampled_at));
        match (planned_now, planned_at_fix) {
            (Some(theta_now), Some(theta_fix)) => {
                if deviation_test(fix.phi, theta_fix, sigma_p, p.sigma_n[k], p.alpha) {
                    (fix.phi, sigma_p)
                } else {
                    (theta_now, p.sigma_n[k])
                }
            }
            _ => (fix.phi, sigma_p),
        }
    }

    pub fn estimate(&self, i: NodeId, j: NodeId) -> AdjacencyEstimate {
        estimate(self, i, j)
    }
}

/// Case 2 staleness bound `(d_max - d) / (v_i + v_j)`.
pub fn recent_adjacency_threshold(d_max: f64, d: f64, v_i: f64, v_j: f64) -> f64 {
    (d_max - d) / (v_i + v_j)
}

pub fn estimate(view: &NodeView<'_>, i: NodeId, j: NodeId) -> AdjacencyEstimate {
    debug_assert_ne!(i, j);
    let store = view.store;
    let p = view.params;
    let now = view.now;

    if view.q == i || view.q == j {
        let a = store.adjacency.value(i, j);
        return AdjacencyEstimate { p_hat: a, case_used: EstimateCase::OwnNeighborTable };
    }

    if store.adjacency.value(i, j) == 1.0 && store.distance.is_set(i, j) && store.adjacency.is_set(i, j) {
        let d = store.distance.value(i, j);
        let tau = now - store.distance.stamp(i, j);
        let thresh = recent_adjacency_threshold(p.effective_range(i, j), d, p.v_max[i], p.v_max[j]);
        if d.is_finite() && tau <= thresh {
            return AdjacencyEstimate { p_hat: 1.0, case_used: EstimateCase::RecentAdjacency };
        }
    }

    if let (Some(fi), Some(fj)) = (view.location_fix(i), view.location_fix(j)) {
        let (mu_i, s_i) = view.location_model(i, &fi);
        let (mu_j, s_j) = view.location_model(j, &fj);
        let p_hat = location_adjacency(mu_i, s_i, mu_j, s_j, p.effective_range(i, j));
        return AdjacencyEstimate { p_hat, case_used: EstimateCase::Location };
    }

    if now - store.social.stamp(i, j) <= p.social_staleness_threshold {
        let r_mem = store.r_mem.max(1) as f64;
        let p_hat = (store.social.value(i, j) / r_mem).clamp(0.0, 1.0);
        return AdjacencyEstimate { p_hat, case_used: EstimateCase::SocialTie };
    }

    AdjacencyEstimate { p_hat: p.p0, case_used: EstimateCase::Default }
}
