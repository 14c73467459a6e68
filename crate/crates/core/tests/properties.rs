mod common;

use std::sync::Arc;

use proptest::prelude::*;

use bivariant_core::bivariant::{MapBody, ValueMap, Verifier};
use bivariant_core::derived::{delta, delta_product_identity};
use bivariant_core::functor::{finiteness_witness, FunctorInstance, Polynomial, RankVect, TableCoh, Value};
use bivariant_core::operations::{check_naturality, OpExpr};
use bivariant_core::site::{ObjId, Site};
use bivariant_core::transform::exp_transform;

fn eval_op(op: &OpExpr, x: u64) -> u64 {
    match op {
        OpExpr::Zero => 0,
        OpExpr::Ident => x,
        OpExpr::Poly(p) => p.coeffs().iter().rev().fold(0, |acc, &c| acc * x + c),
        OpExpr::Compose(a, b) => eval_op(a, eval_op(b, x)),
        OpExpr::PointwiseTable { .. } => unreachable!("rank values have no table"),
    }
}

/// Direct interpretation of a value map, bypassing the normal form.
fn interpret(site: &Site, m: &ValueMap<u64>, v: &[u64]) -> Vec<u64> {
    match &m.body {
        MapBody::Id => v.to_vec(),
        MapBody::ZeroMap => vec![0; site.object(m.dst).len()],
        MapBody::PullbackAlong(g) => g.map.iter().map(|&i| v[i as usize]).collect(),
        MapBody::ApplyOpAt(op) => v.iter().map(|&e| eval_op(op, e)).collect(),
        MapBody::SumConst(c) => v.iter().zip(&c.entries).map(|(a, b)| a + b).collect(),
        MapBody::MulConst(c) => v.iter().zip(&c.entries).map(|(a, b)| a * b).collect(),
        MapBody::Pipe(a, b) => interpret(site, b, &interpret(site, a, v)),
    }
}

#[derive(Debug, Clone)]
enum Stage {
    /// Pull back along a map into the current object, chosen by index.
    Pull(usize, Vec<u32>),
    Op(Vec<u64>),
    Add(Vec<u64>),
    Mul(Vec<u64>),
    Zero,
}

fn stage() -> impl Strategy<Value = Stage> {
    prop_oneof![
        4 => (0usize..3, prop::collection::vec(0u32..3, 3)).prop_map(|(o, m)| Stage::Pull(o, m)),
        2 => prop::collection::vec(0u64..3, 0..3).prop_map(|mut c| {
            if !c.is_empty() {
                c[0] = 0;
            }
            Stage::Op(c)
        }),
        2 => prop::collection::vec(0u64..3, 3).prop_map(Stage::Add),
        2 => prop::collection::vec(0u64..3, 3).prop_map(Stage::Mul),
        1 => Just(Stage::Zero),
    ]
}

fn build(site: &Arc<Site>, start: ObjId, stages: &[Stage]) -> Arc<ValueMap<u64>> {
    let objs = site.base_objects().to_vec();
    let mut acc = ValueMap::id(start);
    for st in stages {
        let cur = acc.dst;
        let n = site.object(cur).len() as u32;
        let next = match st {
            Stage::Pull(o, m) => {
                let src = objs[*o % objs.len()];
                let len = site.object(src).len();
                let map = m[..len].iter().map(|&i| i % n).collect();
                ValueMap::pullback(site.intern_morphism(src, cur, map).unwrap())
            }
            Stage::Op(c) => ValueMap::op(Arc::new(OpExpr::poly(c.clone())), cur),
            Stage::Add(c) => ValueMap::sum_const(Value::new(cur, c[..n as usize].to_vec())),
            Stage::Mul(c) => ValueMap::mul_const(Value::new(cur, c[..n as usize].to_vec())),
            Stage::Zero => ValueMap::zero(cur, cur),
        };
        acc = ValueMap::pipe(acc, next).unwrap();
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn normal_form_agrees_with_direct_evaluation(
        start in 0usize..3,
        stages in prop::collection::vec(stage(), 0..5),
        input in prop::collection::vec(0u64..3, 3),
    ) {
        let site = common::s1();
        let x0 = site.base_objects()[start];
        let m = build(&site, x0, &stages);
        let v = Value::new(x0, input[..site.object(x0).len()].to_vec());
        let fast = m.eval(&site, &RankVect, &v).unwrap();
        prop_assert_eq!(fast.entries, interpret(&site, &m, &v.entries));
    }

    #[test]
    fn composition_is_associative(a in prop::collection::vec(0u32..3, 3), b in prop::collection::vec(0u32..3, 3), c in prop::collection::vec(0u32..3, 3)) {
        let site = common::s1();
        let z = site.object_id("Z").unwrap();
        let (f, g, h) = (
            site.intern_morphism(z, z, a).unwrap(),
            site.intern_morphism(z, z, b).unwrap(),
            site.intern_morphism(z, z, c).unwrap(),
        );
        let l = site.compose(&site.compose(&h, &g).unwrap(), &f).unwrap();
        let r = site.compose(&h, &site.compose(&g, &f).unwrap()).unwrap();
        prop_assert_eq!(l.id, r.id);
    }

    #[test]
    fn fiber_square_commutes_and_counts_pairs(a in prop::collection::vec(0u32..2, 3), b in prop::collection::vec(0u32..2, 3)) {
        let site = common::s1();
        let z = site.object_id("Z").unwrap();
        let x = site.object_id("X").unwrap();
        let f = site.intern_morphism(z, x, a.clone()).unwrap();
        let g = site.intern_morphism(z, x, b.clone()).unwrap();
        let sq = site.fiber_product(&f, &g).unwrap();
        let expected = b.iter().flat_map(|gy| a.iter().filter(move |fx| *fx == gy)).count();
        prop_assert_eq!(site.object(sq.apex).len(), expected);
        if expected > 0 {
            let l = site.compose(&f, &sq.top).unwrap();
            let r = site.compose(&g, &sq.left).unwrap();
            prop_assert_eq!(l.id, r.id);
        }
    }

    #[test]
    fn sections_split_and_pull_back(a in prop::collection::vec(0u32..2, 3), b in prop::collection::vec(0u32..2, 2)) {
        let site = common::s1();
        let z = site.object_id("Z").unwrap();
        let x = site.object_id("X").unwrap();
        let f = site.intern_morphism(z, x, a.clone()).unwrap();
        let g = site.intern_morphism(x, x, b).unwrap();
        let sections = site.sections_of(&f);
        let fibers: usize = (0..2u32).map(|y| a.iter().filter(|&&v| v == y).count()).product();
        prop_assert_eq!(sections.len(), fibers);
        for s in &sections {
            prop_assert!(site.is_section(&f, s));
            let sp = site.pullback_section(&f, &g, s).unwrap();
            let left = site.fiber_product(&f, &g).unwrap().left;
            prop_assert!(site.is_section(&left, &sp));
        }
    }

    #[test]
    fn rank_witness_polynomials_agree(v in prop::collection::vec(0u64..6, 1..4)) {
        let site = common::s1();
        let obj = site.base_objects().iter().copied().find(|&o| site.object(o).len() == v.len()).unwrap();
        let fun = FunctorInstance::new(RankVect, site.clone());
        let val = fun.value(obj, v.clone()).unwrap();
        let (p, q) = finiteness_witness(&fun, &val).unwrap();
        prop_assert_ne!(&p, &q);
        for &r in &v {
            prop_assert_eq!(p.eval_int(r as i128), q.eval_int(r as i128));
        }
    }

    #[test]
    fn exp_class_turns_sums_into_products(a in 0u64..40, b in 0u64..40, base in 0u32..15) {
        let fun = Arc::new(FunctorInstance::new(RankVect, common::s1()));
        let z15 = TableCoh::zmod(15).unwrap();
        let t = exp_transform(fun, z15, base).unwrap();
        let pow = |r: u64| (0..r).fold(1u64, |acc, _| acc * base as u64 % 15) as u32;
        prop_assert_eq!(t.elem(&(a + b)), pow(a) * pow(b) % 15);
    }

    #[test]
    fn polynomial_operations_are_natural(c in prop::collection::vec(0u64..4, 0..4)) {
        let fun = FunctorInstance::new(RankVect, common::s1());
        let probes = common::rank_probes();
        let op = OpExpr::Poly(Polynomial::new(c));
        prop_assert!(check_naturality(&op, &fun, &probes).passed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn delta_products_close(
        a in prop::collection::vec(0u64..3, 1..3),
        b in prop::collection::vec(0u64..3, 1..3),
        fi in 0usize..64,
        gi in 0usize..64,
    ) {
        let th = common::rank_theory(common::s1());
        let site = th.site().clone();
        let theta = Arc::new(OpExpr::poly([vec![0], a].concat()));
        let psi = Arc::new(OpExpr::poly([vec![0], b].concat()));
        let sectional: Vec<_> = site.base_morphisms().iter().filter(|f| site.is_sectional(f)).cloned().collect();
        let f = &sectional[fi % sectional.len()];
        let gs: Vec<_> = sectional.iter().filter(|g| g.src == f.dst).collect();
        let g = gs[gi % gs.len()];
        let probes = common::rank_probes();
        let v = Verifier::new(&th, &probes);
        let s1 = &site.sections_of(f)[0];
        let s2 = &site.sections_of(g)[0];
        let r = delta_product_identity(&v, &theta, f, s1, &psi, g, s2);
        prop_assert!(r.passed);
        prop_assert!(delta(&th, theta, f, None).is_ok());
    }
}
