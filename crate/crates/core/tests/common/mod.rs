#![allow(dead_code)]

use std::sync::Arc;

use bivariant_core::bivariant::{Bivariant, ElementOf};
use bivariant_core::derived::{all_values, delta_family, phi_sum, phi_tensor};
use bivariant_core::functor::{FunctorInstance, ProbePolicy, ProbeSet, RankVect};
use bivariant_core::operations::OpExpr;
use bivariant_core::site::{Site, SiteBuilder, SiteMode};

/// pt, X = {a, b}, Z = {u, v, w}; every function between them.
pub fn s1() -> Arc<Site> {
    SiteBuilder::new()
        .object("X", ["a", "b"])
        .object("Z", ["u", "v", "w"])
        .mode(SiteMode::Full)
        .closure_depth(2)
        .build()
        .unwrap()
}

pub fn rank_theory(site: Arc<Site>) -> Bivariant<RankVect> {
    Bivariant::new(FunctorInstance::new(RankVect, site))
}

pub fn exhaustive(bound: u64) -> ProbePolicy {
    ProbePolicy {
        bound,
        ..ProbePolicy::default()
    }
}

pub fn rank_probes() -> ProbeSet<RankVect> {
    ProbeSet::new(exhaustive(3))
}

pub fn family_ops() -> Vec<Arc<OpExpr>> {
    vec![
        Arc::new(OpExpr::Ident),
        Arc::new(OpExpr::poly(vec![0, 0, 1])),
        Arc::new(OpExpr::poly(vec![0, 2])),
    ]
}

pub struct Family {
    pub deltas: Vec<Arc<ElementOf<RankVect>>>,
    pub phi_sums: Vec<Arc<ElementOf<RankVect>>>,
    pub phi_tensors: Vec<Arc<ElementOf<RankVect>>>,
    pub units: Vec<Arc<ElementOf<RankVect>>>,
    pub zeros: Vec<Arc<ElementOf<RankVect>>>,
}

impl Family {
    pub fn all(&self) -> Vec<Arc<ElementOf<RankVect>>> {
        [&self.deltas, &self.phi_sums, &self.phi_tensors, &self.units, &self.zeros]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }

    /// Members whose components send zero to zero.
    pub fn zero_preserving(&self) -> Vec<Arc<ElementOf<RankVect>>> {
        [&self.deltas, &self.phi_tensors, &self.units, &self.zeros]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

/// δ-elements for every sectional base morphism and section, Φ⊕ and Φ⊗ of
/// every rank ≤ 2 bundle on X, units on declared objects, and the zero
/// element on every declared identity and on the maps to pt.
pub fn s1_family(th: &Bivariant<RankVect>) -> Family {
    let site = th.site();
    let x = site.object_id("X").unwrap();
    let bundles = all_values(x, 2, &[0u64, 1, 2]);
    let zeros = site
        .base_objects()
        .iter()
        .flat_map(|&o| [site.identity(o), site.to_terminal(o)])
        .map(|m| th.zero(&m))
        .collect();
    Family {
        deltas: delta_family(th, &family_ops()).unwrap(),
        phi_sums: bundles.iter().map(|e| phi_sum(th, e)).collect(),
        phi_tensors: bundles.iter().map(|e| phi_tensor(th, e)).collect(),
        units: site.base_objects().iter().map(|&o| th.unit(o)).collect(),
        zeros,
    }
}
