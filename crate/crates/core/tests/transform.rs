mod common;

use std::sync::Arc;

use bivariant_core::derived::delta_family;
use bivariant_core::functor::{FunctorInstance, MonoidVect, Polynomial, ProbePolicy, ProbeSet, RankVect, TableCoh};
use bivariant_core::operations::OpExpr;
use bivariant_core::transform::{
    augmentation_transform, check_cubic, check_grothendieck_laws, exp_transform, rank_transform, OpCorrespondence,
};

fn source() -> Arc<FunctorInstance<RankVect>> {
    Arc::new(FunctorInstance::new(RankVect, common::s1()))
}

#[test]
fn rank_into_z7() {
    let t = rank_transform(source(), TableCoh::zmod(7).unwrap()).unwrap();
    let probes = common::rank_probes();
    assert!(t.check_naturality(&probes).passed);
    assert!(t.check_additive(&probes).passed);
    assert!(t.check_multiplicative(&probes).passed);
    for p in [Polynomial::new(vec![0, 0, 1]), Polynomial::new(vec![0, 2, 0, 1])] {
        let r = t.check_polynomial(&p, &probes);
        assert!(r.passed, "{}", r.check);
    }
    // rank 3 + rank 5 lands on 1 in ℤ/7
    assert_eq!(t.elem(&8), 1);
}

#[test]
fn exp_two_into_z15() {
    let t = exp_transform(source(), TableCoh::zmod(15).unwrap(), 2).unwrap();
    let probes = common::rank_probes();
    assert!(t.check_naturality(&probes).passed);
    assert!(t.check_exponential(&probes).passed);
    // sums go to products, not sums
    assert!(!t.check_additive(&probes).passed);
    for a in [2u64, 3] {
        let ell = OpExpr::poly(vec![0, a]);
        let mu = OpExpr::Poly(Polynomial::monomial(1, a as usize));
        let r = check_cubic(&t, &ell, &mu, &probes);
        assert!(r.passed, "{:?}", r.first());
    }
    // 2^r mod 15 for r = 0..4, computed by hand
    let expected = [1u32, 2, 4, 8, 1];
    for (r, e) in expected.iter().enumerate() {
        assert_eq!(t.elem(&(r as u64)), *e);
    }
}

#[test]
fn wrong_correspondence_fails_cubic() {
    let t = exp_transform(source(), TableCoh::zmod(15).unwrap(), 2).unwrap();
    let probes = common::rank_probes();
    let ell = OpExpr::poly(vec![0, 2]);
    let r = check_cubic(&t, &ell, &ell, &probes);
    assert!(!r.passed);
    let cx = r.first().unwrap();
    assert!(cx.diagram.iter().any(|b| b.role == "face" && b.value.starts_with("T∘θ")));
}

#[test]
fn augmentation_is_a_rig_map() {
    let c2 = MonoidVect::cyclic(2, &["e", "g"]).unwrap();
    let t = augmentation_transform(Arc::new(FunctorInstance::new(c2, common::s1()))).unwrap();
    let probes = ProbeSet::new(ProbePolicy::default());
    assert!(t.check_naturality(&probes).passed);
    assert!(t.check_additive(&probes).passed);
    assert!(t.check_multiplicative(&probes).passed);
}

fn identity_correspondence() -> OpCorrespondence {
    OpCorrespondence::new(
        "same polynomial",
        vec![
            (OpExpr::poly(vec![0, 0, 1]), OpExpr::poly(vec![0, 0, 1])),
            (OpExpr::poly(vec![0, 2]), OpExpr::poly(vec![0, 2])),
        ],
    )
}

#[test]
fn grothendieck_laws_for_the_delta_family() {
    let th = common::rank_theory(common::s1());
    let family = delta_family(&th, &common::family_ops()).unwrap();
    let t = rank_transform(th.fun.clone(), TableCoh::zmod(7).unwrap()).unwrap();
    let sp = common::rank_probes();
    let tp = ProbeSet::new(ProbePolicy::default());
    let r = check_grothendieck_laws(&t, &identity_correspondence(), &family, &sp, &tp);
    assert!(r.passed, "{:?}", r.first());
    assert!(r.instances > 0);
}

#[test]
fn grothendieck_pairing_square_rejects_a_bad_correspondence() {
    let th = common::rank_theory(common::s1());
    let family = delta_family(&th, &common::family_ops()[1..2]).unwrap();
    let t = rank_transform(th.fun.clone(), TableCoh::zmod(7).unwrap()).unwrap();
    let corr = OpCorrespondence::new("squares to doubling", vec![(OpExpr::poly(vec![0, 0, 1]), OpExpr::poly(vec![0, 2]))]);
    let r = check_grothendieck_laws(&t, &corr, &family, &common::rank_probes(), &ProbeSet::new(ProbePolicy::default()));
    assert!(!r.passed);
}

#[test]
fn unmapped_operation_is_an_error() {
    let corr = identity_correspondence();
    assert!(corr.lookup(&OpExpr::poly(vec![0, 5])).is_err());
    assert!(corr.lookup(&OpExpr::compose(OpExpr::poly(vec![0, 2]), OpExpr::Ident)).is_ok());
}
