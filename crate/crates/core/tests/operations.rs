mod common;

use std::sync::Arc;

use bivariant_core::functor::{FunctorInstance, ProbePolicy, ProbeSet, RankVect, TableCoh};
use bivariant_core::operations::{
    check_generalized_naturality, check_naturality, check_quillen, derive_generalized, FiberSum, OpExpr,
};
use bivariant_core::site::SiteBuilder;

fn all_tables(n: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t: Vec<u32>| {
                (0..n).map(move |j| {
                    let mut t = t.clone();
                    t.push(j);
                    t
                })
            })
            .collect();
    }
    out
}

#[test]
fn polynomial_operations_are_natural() {
    let fun = FunctorInstance::new(RankVect, common::s1());
    let probes = common::rank_probes();
    let a = OpExpr::poly(vec![0, 2, 1]);
    let b = OpExpr::poly(vec![0, 3]);
    for op in [a.clone(), b.clone(), OpExpr::compose(a, b)] {
        let r = check_naturality(&op, &fun, &probes);
        assert!(r.passed, "{}", r.check);
    }
}

#[test]
fn every_pointwise_table_over_z4_is_natural() {
    let z4 = TableCoh::zmod(4).unwrap();
    let fun = FunctorInstance::new(z4.clone(), common::s1());
    let probes = ProbeSet::new(ProbePolicy::default());
    let tables = all_tables(4);
    assert_eq!(tables.len(), 256);
    for t in tables {
        let op = OpExpr::table(&z4, t).unwrap();
        assert!(check_naturality(&op, &fun, &probes).passed, "{op}");
    }
}

#[test]
fn non_pointwise_family_fails_with_witness() {
    let fun = FunctorInstance::new(RankVect, common::s1());
    let r = check_naturality(&FiberSum, &fun, &common::rank_probes());
    assert!(!r.passed);
    let cx = r.first().unwrap();
    assert!(cx.diagram.iter().any(|b| b.role == "f"));
    assert_ne!(cx.lhs, cx.rhs);
}

#[test]
fn table_op_rejects_wrong_size() {
    let z4 = TableCoh::zmod(4).unwrap();
    assert!(OpExpr::table(&z4, vec![0, 1, 2]).is_err());
    assert!(OpExpr::table(&z4, vec![0, 1, 2, 4]).is_err());
    let shifted = OpExpr::table(&z4, vec![1, 2, 3, 0]).unwrap();
    assert!(!shifted.zero_zero());
}

#[test]
fn quillen_on_b_times_x() {
    let site = SiteBuilder::new()
        .object("B", ["b1", "b2"])
        .object("X", ["a", "b"])
        .build()
        .unwrap();
    let fun = FunctorInstance::new(RankVect, site.clone());
    let probes = common::rank_probes();
    let b = site.object_id("B").unwrap();
    let x = site.object_id("X").unwrap();
    let r = check_quillen(&fun, Arc::new(OpExpr::poly(vec![0, 0, 1])), b, x, &probes).unwrap();
    assert!(r.passed, "{:?}", r.first());
    assert!(r.instances > 0);
}

#[test]
fn generalized_operation_needs_a_section() {
    let site = common::s1();
    let fun = FunctorInstance::new(RankVect, site.clone());
    let x = site.object_id("X").unwrap();
    let z = site.object_id("Z").unwrap();
    let f = site.intern_morphism(z, x, vec![0, 0, 1]).unwrap();
    let bad = site.intern_morphism(x, z, vec![0, 1]).unwrap();
    assert!(derive_generalized(&fun, Arc::new(OpExpr::Ident), &f, &bad).is_err());
    let probes = common::rank_probes();
    for s in site.sections_of(&f) {
        let op = derive_generalized(&fun, Arc::new(OpExpr::poly(vec![0, 0, 1])), &f, &s).unwrap();
        assert!(check_generalized_naturality(&op, &fun, &probes).passed);
    }
}
