//! The δ- and Δ-subtheories: elements built from operations (or identity-
//! supported elements) and sections, their closure identities, the
//! pushforward identity, and the `Φ` elements that separate the
//! co-operational theory from the operation-induced part.

use std::sync::Arc;

use crate::bivariant::{is_identity, Bivariant, Element, ElementOf, Provenance, Rule, Verifier};
use crate::error::{Error, Result};
use crate::functor::{Polynomial, Rig, Value};
use crate::operations::OpExpr;
use crate::report::{CheckReport, Counterexample};
use crate::site::Morphism;

fn pick_section<R: Rig>(th: &Bivariant<R>, f: &Morphism, s: Option<&Arc<Morphism>>) -> Result<Option<Arc<Morphism>>> {
    let site = th.site();
    match s {
        Some(s) => {
            site.require_section(f, s)?;
            Ok(Some(s.clone()))
        }
        None => Ok(site.sections_of(f).into_iter().next()),
    }
}

/// `δ(θ, f, s)`: `s'* ∘ θ` at every base change when `f` is sectional, the
/// zero element otherwise. Without an explicit section the
/// lexicographically least one is used.
pub fn delta<R: Rig>(
    th: &Bivariant<R>,
    op: Arc<OpExpr>,
    f: &Arc<Morphism>,
    s: Option<&Arc<Morphism>>,
) -> Result<Arc<ElementOf<R>>> {
    if !op.zero_zero() {
        return Err(Error::Precondition(format!("{op} does not send zero to zero")));
    }
    let site = th.site();
    let fname = site.render_morphism(f);
    Ok(match pick_section(th, f, s)? {
        Some(section) => Element::new(
            f.clone(),
            Provenance::Delta,
            format!("δ({op}, {fname}, {})", site.render_morphism(&section)),
            Rule::Delta { op, section },
        ),
        None => Element::new(f.clone(), Provenance::Delta, format!("δ({op}, {fname})=0"), Rule::Zero),
    })
}

/// `Δ(c, f, s)` for `c` over `id_X`: components `s'* ∘ c_{g'}`.
pub fn delta_cap<R: Rig>(
    th: &Bivariant<R>,
    c: &Arc<ElementOf<R>>,
    f: &Arc<Morphism>,
    s: Option<&Arc<Morphism>>,
) -> Result<Arc<ElementOf<R>>> {
    let site = th.site();
    if !is_identity(&c.support) || c.support.src != f.src {
        return Err(Error::Precondition(format!(
            "{} is not supported on the identity of {}",
            c.label,
            site.object_name(f.src)
        )));
    }
    let fname = site.render_morphism(f);
    Ok(match pick_section(th, f, s)? {
        Some(section) => Element::new(
            f.clone(),
            Provenance::DeltaCap,
            format!("Δ({}, {fname}, {})", c.label, site.render_morphism(&section)),
            Rule::DeltaCap {
                inner: c.clone(),
                section,
            },
        ),
        None => Element::new(f.clone(), Provenance::DeltaCap, format!("Δ({}, {fname})=0", c.label), Rule::Zero),
    })
}

/// `Φ_⊕(E)`: `F ↦ F ⊕ g*E` over `id_X`.
pub fn phi_sum<R: Rig>(th: &Bivariant<R>, e: &Value<R::Elem>) -> Arc<ElementOf<R>> {
    let site = th.site();
    Element::new(
        site.identity(e.object),
        Provenance::PhiSum,
        format!("Φ⊕({})", th.fun.render(e)),
        Rule::SumConst(e.clone()),
    )
}

/// `Φ_⊗(E)`: `F ↦ F ⊗ g*E` over `id_X`.
pub fn phi_tensor<R: Rig>(th: &Bivariant<R>, e: &Value<R::Elem>) -> Arc<ElementOf<R>> {
    let site = th.site();
    Element::new(
        site.identity(e.object),
        Provenance::PhiTensor,
        format!("Φ⊗({})", th.fun.render(e)),
        Rule::MulConst(e.clone()),
    )
}

/// `(−) ⊕ g*p(E)`.
pub fn phi_poly_sum<R: Rig>(th: &Bivariant<R>, p: &Polynomial, e: &Value<R::Elem>) -> Arc<ElementOf<R>> {
    let pe = th.fun.poly_apply(p, e);
    let site = th.site();
    Element::new(
        site.identity(e.object),
        Provenance::PhiSum,
        format!("Φ⊕({p})({})", th.fun.render(e)),
        Rule::SumConst(pe),
    )
}

/// `(−) ⊗ g*p(E)`.
pub fn phi_poly_tensor<R: Rig>(th: &Bivariant<R>, p: &Polynomial, e: &Value<R::Elem>) -> Arc<ElementOf<R>> {
    let pe = th.fun.poly_apply(p, e);
    let site = th.site();
    Element::new(
        site.identity(e.object),
        Provenance::PhiTensor,
        format!("Φ⊗({p})({})", th.fun.render(e)),
        Rule::MulConst(pe),
    )
}

/// `(−) + g*p(α)` in a cohomology-valued functor.
pub fn phi_poly_add<R: Rig>(th: &Bivariant<R>, p: &Polynomial, a: &Value<R::Elem>) -> Arc<ElementOf<R>> {
    phi_poly_sum(th, p, a)
}

/// `(−) ∪ g*p(α)` in a cohomology-valued functor.
pub fn phi_poly_cup<R: Rig>(th: &Bivariant<R>, p: &Polynomial, a: &Value<R::Elem>) -> Arc<ElementOf<R>> {
    phi_poly_tensor(th, p, a)
}

fn absorb_equal<R: Rig>(
    v: &Verifier<'_, R>,
    report: &mut CheckReport,
    lhs: Result<Arc<ElementOf<R>>>,
    rhs: Result<Arc<ElementOf<R>>>,
    context: &str,
) {
    match lhs.and_then(|l| rhs.and_then(|r| v.equal_elements(&l, &r))) {
        Ok(r) => report.absorb(r),
        Err(e) => report.error(context, &e),
    }
}

/// `δ(θ, f, s1) • δ(ψ, g, s2) = δ(ψ∘θ, g∘f, s1∘s2)`.
pub fn delta_product_identity<R: Rig>(
    v: &Verifier<'_, R>,
    theta: &Arc<OpExpr>,
    f: &Arc<Morphism>,
    s1: &Arc<Morphism>,
    psi: &Arc<OpExpr>,
    g: &Arc<Morphism>,
    s2: &Arc<Morphism>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new("δ product identity", v.universe());
    let lhs = delta(th, theta.clone(), f, Some(s1))
        .and_then(|a| th.product(&a, &delta(th, psi.clone(), g, Some(s2))?));
    let rhs = (|| {
        let gf = site.compose(g, f)?;
        let s = site.compose(s1, s2)?;
        delta(th, Arc::new(OpExpr::Compose(psi.clone(), theta.clone())), &gf, Some(&s))
    })();
    absorb_equal(v, &mut report, lhs, rhs, "δ•δ");
    report.finish()
}

/// `h* δ(θ, f, s) = δ(θ, f', s')` with `f'` the left map of `(f, h)` and
/// `s'` the pulled-back section.
pub fn delta_pullback_identity<R: Rig>(
    v: &Verifier<'_, R>,
    theta: &Arc<OpExpr>,
    f: &Arc<Morphism>,
    s: &Arc<Morphism>,
    h: &Arc<Morphism>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new("δ pullback identity", v.universe());
    let lhs = delta(th, theta.clone(), f, Some(s)).and_then(|d| th.pullback(h, &d));
    let rhs = (|| {
        let fp = site.fiber_product(f, h)?.left;
        let sp = site.pullback_section(f, h, s)?;
        delta(th, theta.clone(), &fp, Some(&sp))
    })();
    absorb_equal(v, &mut report, lhs, rhs, "h*δ");
    report.finish()
}

/// `f_* δ(θ, g∘f, s) = δ(θ, g, f∘s)` for a section `s` of `g ∘ f`.
pub fn delta_pushforward_identity<R: Rig>(
    v: &Verifier<'_, R>,
    theta: &Arc<OpExpr>,
    f: &Arc<Morphism>,
    g: &Arc<Morphism>,
    s: &Arc<Morphism>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new("δ pushforward identity", v.universe());
    let lhs = site
        .compose(g, f)
        .and_then(|gf| delta(th, theta.clone(), &gf, Some(s)))
        .and_then(|d| th.pushforward(f, g, &d));
    let rhs = site
        .compose(f, s)
        .and_then(|fs| delta(th, theta.clone(), g, Some(&fs)));
    absorb_equal(v, &mut report, lhs, rhs, "f_*δ");
    report.finish()
}

/// `f_* δ(θ, f, s) = θ̃` over `id_Y` for sectional `f`; for non-sectional
/// `f` the pushforward of the zero element is the zero element.
pub fn pushforward_identity<R: Rig>(
    v: &Verifier<'_, R>,
    theta: &Arc<OpExpr>,
    f: &Arc<Morphism>,
    s: Option<&Arc<Morphism>>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new(
        format!("pushforward identity[{theta}, {}]", site.render_morphism(f)),
        v.universe(),
    );
    let id_y = site.identity(f.dst);
    let lhs = delta(th, theta.clone(), f, s).and_then(|d| th.pushforward(f, &id_y, &d));
    let rhs = if site.is_sectional(f) {
        Ok(th.induced(theta.clone(), f.dst))
    } else {
        Ok(th.zero(&id_y))
    };
    absorb_equal(v, &mut report, lhs, rhs, "f_*δ");
    report.finish()
}

/// `c • 0 = 0` and `0 • d = 0`; the second needs `d` to send zero to zero.
pub fn zero_absorption<R: Rig>(v: &Verifier<'_, R>, c: &Arc<ElementOf<R>>, d: &Arc<ElementOf<R>>) -> CheckReport {
    let th = v.th;
    let mut report = CheckReport::new(format!("zero absorption[{} ; {}]", c.label, d.label), v.universe());
    let right_zero = th.zero(&d.support);
    let left_zero = th.zero(&c.support);
    let cd_support = th.site().compose(&d.support, &c.support);
    let zero_cd = cd_support.map(|m| th.zero(&m));
    absorb_equal(
        v,
        &mut report,
        th.product(c, &right_zero),
        zero_cd.clone(),
        "c•0",
    );
    absorb_equal(v, &mut report, th.product(&left_zero, d), zero_cd, "0•d");
    report.finish()
}

/// `Δ(c, f, s1) • Δ(d, g, s2) = Δ(c • f^♭d, g∘f, s1∘s2)`.
pub fn delta_cap_product_identity<R: Rig>(
    v: &Verifier<'_, R>,
    c: &Arc<ElementOf<R>>,
    f: &Arc<Morphism>,
    s1: &Arc<Morphism>,
    d: &Arc<ElementOf<R>>,
    g: &Arc<Morphism>,
    s2: &Arc<Morphism>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new("Δ product identity", v.universe());
    let lhs = delta_cap(th, c, f, Some(s1)).and_then(|a| th.product(&a, &delta_cap(th, d, g, Some(s2))?));
    let rhs = (|| {
        let inner = th.product(c, &th.restrict(f, d)?)?;
        delta_cap(th, &inner, &site.compose(g, f)?, Some(&site.compose(s1, s2)?))
    })();
    absorb_equal(v, &mut report, lhs, rhs, "Δ•Δ");
    report.finish()
}

/// `h* Δ(c, f, s) = Δ(g'^♭c, f', s')` with `g'` the top map of `(f, h)`.
pub fn delta_cap_pullback_identity<R: Rig>(
    v: &Verifier<'_, R>,
    c: &Arc<ElementOf<R>>,
    f: &Arc<Morphism>,
    s: &Arc<Morphism>,
    h: &Arc<Morphism>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new("Δ pullback identity", v.universe());
    let lhs = delta_cap(th, c, f, Some(s)).and_then(|a| th.pullback(h, &a));
    let rhs = (|| {
        let sq = site.fiber_product(f, h)?;
        let sp = site.pullback_section(f, h, s)?;
        delta_cap(th, &th.restrict(&sq.top, c)?, &sq.left, Some(&sp))
    })();
    absorb_equal(v, &mut report, lhs, rhs, "h*Δ");
    report.finish()
}

/// `f_* Δ(c, g∘f, s) = Δ((s∘g)^♭c, g, f∘s)`.
pub fn delta_cap_pushforward_identity<R: Rig>(
    v: &Verifier<'_, R>,
    c: &Arc<ElementOf<R>>,
    f: &Arc<Morphism>,
    g: &Arc<Morphism>,
    s: &Arc<Morphism>,
) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let mut report = CheckReport::new("Δ pushforward identity", v.universe());
    let lhs = site
        .compose(g, f)
        .and_then(|gf| delta_cap(th, c, &gf, Some(s)))
        .and_then(|a| th.pushforward(f, g, &a));
    let rhs = (|| {
        let inner = th.restrict(&site.compose(s, g)?, c)?;
        delta_cap(th, &inner, g, Some(&site.compose(f, s)?))
    })();
    absorb_equal(v, &mut report, lhs, rhs, "f_*Δ");
    report.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    Sum,
    Tensor,
}

/// `Φ(E) ≠ Φ(E')` for all distinct `E, E'` of `universe`, each pair
/// separated at the zero probe (sum) or the unit probe (tensor).
pub fn injectivity_check<R: Rig>(v: &Verifier<'_, R>, kind: PhiKind, universe: &[Value<R::Elem>]) -> CheckReport {
    let th = v.th;
    let site = th.site();
    let fun = &th.fun;
    let name = match kind {
        PhiKind::Sum => "injectivity[Φ⊕]",
        PhiKind::Tensor => "injectivity[Φ⊗]",
    };
    let mut report = CheckReport::new(name, v.universe());
    let build = |e: &Value<R::Elem>| match kind {
        PhiKind::Sum => phi_sum(th, e),
        PhiKind::Tensor => phi_tensor(th, e),
    };
    for (i, e1) in universe.iter().enumerate() {
        for e2 in &universe[i + 1..] {
            report.tick();
            if e1 == e2 {
                continue;
            }
            let (c1, c2) = (build(e1), build(e2));
            let x = e1.object;
            let probe = match kind {
                PhiKind::Sum => fun.zero(x),
                PhiKind::Tensor => fun.one(x),
            };
            let separated = (|| -> Result<Option<String>> {
                for g in site.morphisms_into(x)?.iter() {
                    let m1 = th.component_on_source(&c1, g)?;
                    let m2 = th.component_on_source(&c2, g)?;
                    let p = fun.pullback(g, &probe)?;
                    if m1.eval(site, &fun.rig, &p)? != m2.eval(site, &fun.rig, &p)? {
                        return Ok(Some(site.render_morphism(g)));
                    }
                }
                Ok(None)
            })();
            match separated {
                Ok(Some(_)) => {}
                Ok(None) => report.fail(
                    Counterexample::new(fun.render(&probe), c1.label.clone(), c2.label.clone())
                        .bind("E", fun.render(e1))
                        .bind("E'", fun.render(e2)),
                ),
                Err(e) => report.error("injectivity", &e),
            }
        }
    }
    report.finish()
}

/// Two base changes with one source on which an identity-supported element
/// differs; such a pair shows the element is not induced by an operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InductionWitness<E> {
    pub g1: Arc<Morphism>,
    pub g2: Arc<Morphism>,
    pub probe: Value<E>,
    pub out1: Value<E>,
    pub out2: Value<E>,
}

/// Searches sources from smallest to largest, pairs of maps in site order,
/// probes in probe order. `None` is inconclusive.
pub fn not_operation_induced<R: Rig>(
    v: &Verifier<'_, R>,
    c: &Arc<ElementOf<R>>,
) -> Result<Option<InductionWitness<R::Elem>>> {
    let th = v.th;
    let site = th.site();
    if !is_identity(&c.support) {
        return Err(Error::Precondition(format!("{} is not supported on an identity", c.label)));
    }
    let into = site.morphisms_into(c.support.dst)?;
    let mut sources: Vec<_> = site.base_objects().to_vec();
    sources.sort_by_key(|&o| site.object(o).len());
    for src in sources {
        let maps: Vec<_> = into.iter().filter(|g| g.src == src).collect();
        let probes = v.probes.on(&th.fun, src);
        for (i, g1) in maps.iter().enumerate() {
            let m1 = th.component_on_source(c, g1)?;
            for g2 in &maps[i + 1..] {
                let m2 = th.component_on_source(c, g2)?;
                for p in probes.iter() {
                    let out1 = m1.eval(site, th.rig(), p)?;
                    let out2 = m2.eval(site, th.rig(), p)?;
                    if out1 != out2 {
                        return Ok(Some(InductionWitness {
                            g1: (*g1).clone(),
                            g2: (*g2).clone(),
                            probe: p.clone(),
                            out1,
                            out2,
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// `δ(θ, f, s)` for every operation, every sectional base morphism `f`
/// and every section `s` of `f`, in declaration order.
pub fn delta_family<R: Rig>(th: &Bivariant<R>, ops: &[Arc<OpExpr>]) -> Result<Vec<Arc<ElementOf<R>>>> {
    let site = th.site();
    let mut out = Vec::new();
    for op in ops {
        for f in site.base_morphisms() {
            for s in site.sections_of(f) {
                out.push(delta(th, op.clone(), f, Some(&s))?);
            }
        }
    }
    Ok(out)
}

/// Every value on `x` whose entries come from `carrier`.
pub fn all_values<E: Clone>(x: crate::site::ObjId, len: usize, carrier: &[E]) -> Vec<Value<E>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<E>| {
                carrier.iter().map(move |e| {
                    let mut v = prefix.clone();
                    v.push(e.clone());
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(|entries| Value::new(x, entries)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functor::{FunctorInstance, ProbePolicy, ProbeSet, RankVect};
    use crate::site::SiteBuilder;

    fn setup() -> (Bivariant<RankVect>, ProbeSet<RankVect>) {
        let site = SiteBuilder::new().object("X", ["a", "b"]).build().unwrap();
        (
            Bivariant::new(FunctorInstance::new(RankVect, site)),
            ProbeSet::new(ProbePolicy::default()),
        )
    }

    #[test]
    fn delta_restricts_through_the_section() {
        let (th, _) = setup();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let f = site.to_terminal(x);
        let s_a = site.point(x, 0).unwrap();
        let d = delta(&th, Arc::new(OpExpr::poly(vec![0, 0, 1])), &f, Some(&s_a)).unwrap();
        let id = site.identity(site.terminal());
        let apex = site.fiber_product(&f, &id).unwrap().apex;
        let v = th.fun.value(apex, vec![1, 2]).unwrap();
        assert_eq!(th.eval_component(&d, &id, &v).unwrap().entries, vec![1]);
    }

    #[test]
    fn delta_requires_zero_zero() {
        let (th, _) = setup();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let f = site.identity(x);
        assert!(delta(&th, Arc::new(OpExpr::poly(vec![1, 1])), &f, None).is_err());
    }

    #[test]
    fn non_sectional_delta_is_zero() {
        let (th, _) = setup();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let g = site.point(x, 0).unwrap();
        let d = delta(&th, Arc::new(OpExpr::Ident), &g, None).unwrap();
        assert!(matches!(d.rule, Rule::Zero));
    }

    #[test]
    fn phi_sum_witnesses_strict_inclusion() {
        let (th, probes) = setup();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let v = Verifier::new(&th, &probes);
        let e = th.fun.value(x, vec![1, 2]).unwrap();
        let w = not_operation_induced(&v, &phi_sum(&th, &e)).unwrap().unwrap();
        assert_eq!(w.probe.entries, vec![0]);
        assert_eq!((w.out1.entries[0], w.out2.entries[0]), (1, 2));
        let constant = th.fun.value(x, vec![2, 2]).unwrap();
        assert!(not_operation_induced(&v, &phi_sum(&th, &constant)).unwrap().is_none());
    }
}
