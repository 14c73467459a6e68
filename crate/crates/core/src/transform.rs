//! Natural transformations between functors, correspondences of operations,
//! the cubic compatibility check, and the induced Grothendieck
//! transformation on δ-elements.

use std::fmt;
use std::sync::Arc;

use crate::bivariant::{Bivariant, ElementOf, Provenance, Rule, Verifier};
use crate::derived::delta;
use crate::error::{Error, Result};
use crate::functor::{FunctorInstance, MonoidVect, Polynomial, ProbeSet, RankVect, Rig, TableCoh, Value};
use crate::operations::OpExpr;
use crate::report::{CheckReport, Counterexample};
use crate::site::Morphism;

type Carrier<S, T> = Arc<dyn Fn(&<S as Rig>::Elem) -> <T as Rig>::Elem + Send + Sync>;

/// `T: F* -> G*` given pointwise by a carrier map.
pub struct NatTransform<S: Rig, T: Rig> {
    pub name: String,
    pub source: Arc<FunctorInstance<S>>,
    pub target: Arc<FunctorInstance<T>>,
    carrier: Carrier<S, T>,
}

impl<S: Rig, T: Rig> fmt::Debug for NatTransform<S, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NatTransform").field("name", &self.name).finish()
    }
}

impl<S: Rig, T: Rig> NatTransform<S, T> {
    pub fn new(
        name: impl Into<String>,
        source: Arc<FunctorInstance<S>>,
        target: Arc<FunctorInstance<T>>,
        carrier: impl Fn(&S::Elem) -> T::Elem + Send + Sync + 'static,
    ) -> Result<Self> {
        if !Arc::ptr_eq(&source.site, &target.site) {
            return Err(Error::Config("transformation between functors on different sites".into()));
        }
        Ok(NatTransform {
            name: name.into(),
            source,
            target,
            carrier: Arc::new(carrier),
        })
    }

    pub fn elem(&self, e: &S::Elem) -> T::Elem {
        (self.carrier)(e)
    }

    pub fn apply(&self, v: &Value<S::Elem>) -> Value<T::Elem> {
        Value::new(v.object, v.entries.iter().map(|e| self.elem(e)).collect())
    }

    fn universe(&self, probes: &ProbeSet<S>) -> String {
        format!(
            "{} => {}; {}",
            self.source.describe(),
            self.target.rig.describe(),
            probes.describe()
        )
    }

    /// `g* ∘ T = T ∘ g*` for every base morphism.
    pub fn check_naturality(&self, probes: &ProbeSet<S>) -> CheckReport {
        let site = &self.source.site;
        let mut report = CheckReport::new(format!("naturality[{}]", self.name), self.universe(probes));
        for g in site.base_morphisms() {
            for v in probes.on(&self.source, g.dst).iter() {
                report.tick();
                let lhs = self.target.pullback(g, &self.apply(v));
                let rhs = self.source.pullback(g, v).map(|p| self.apply(&p));
                match (lhs, rhs) {
                    (Ok(l), Ok(r)) if l == r => {}
                    (Ok(l), Ok(r)) => report.fail(
                        Counterexample::new(self.source.render(v), self.target.render(&l), self.target.render(&r))
                            .bind("g", site.render_morphism(g)),
                    ),
                    (Err(e), _) | (_, Err(e)) => report.error("naturality", &e),
                }
            }
        }
        report.finish()
    }

    fn pairwise(
        &self,
        check: &str,
        probes: &ProbeSet<S>,
        law: impl Fn(&Value<S::Elem>, &Value<S::Elem>) -> Result<(Value<T::Elem>, Value<T::Elem>)>,
    ) -> CheckReport {
        let site = &self.source.site;
        let mut report = CheckReport::new(format!("{check}[{}]", self.name), self.universe(probes));
        for &x in site.base_objects() {
            let vals = probes.on(&self.source, x);
            for v in vals.iter() {
                for w in vals.iter() {
                    report.tick();
                    match law(v, w) {
                        Ok((l, r)) if l == r => {}
                        Ok((l, r)) => report.fail(Counterexample::new(
                            format!("{} ; {}", self.source.render(v), self.source.render(w)),
                            self.target.render(&l),
                            self.target.render(&r),
                        )),
                        Err(e) => report.error(check, &e),
                    }
                }
            }
        }
        report.finish()
    }

    /// `T(v ⊕ w) = T(v) + T(w)` and `T(0) = 0`.
    pub fn check_additive(&self, probes: &ProbeSet<S>) -> CheckReport {
        let mut r = self.pairwise("additive", probes, |v, w| {
            Ok((self.apply(&self.source.add(v, w)?), self.target.add(&self.apply(v), &self.apply(w))?))
        });
        self.unit_law(&mut r, self.source.rig.zero(), self.target.rig.zero(), "T(0) = 0");
        r.finish()
    }

    /// `T(v ⊗ w) = T(v) · T(w)` and `T(𝟙) = 1`.
    pub fn check_multiplicative(&self, probes: &ProbeSet<S>) -> CheckReport {
        let mut r = self.pairwise("multiplicative", probes, |v, w| {
            Ok((self.apply(&self.source.mul(v, w)?), self.target.mul(&self.apply(v), &self.apply(w))?))
        });
        self.unit_law(&mut r, self.source.rig.one(), self.target.rig.one(), "T(1) = 1");
        r.finish()
    }

    /// `T(v ⊕ w) = T(v) · T(w)` and `T(0) = 1`, the law of a multiplicative
    /// characteristic class.
    pub fn check_exponential(&self, probes: &ProbeSet<S>) -> CheckReport {
        let mut r = self.pairwise("exponential", probes, |v, w| {
            Ok((self.apply(&self.source.add(v, w)?), self.target.mul(&self.apply(v), &self.apply(w))?))
        });
        self.unit_law(&mut r, self.source.rig.zero(), self.target.rig.one(), "T(0) = 1");
        r.finish()
    }

    fn unit_law(&self, report: &mut CheckReport, from: S::Elem, to: T::Elem, law: &str) {
        report.tick();
        let got = self.elem(&from);
        if got != to {
            report.fail(
                Counterexample::new(self.source.rig.render(&from), self.target.rig.render(&got), self.target.rig.render(&to))
                    .bind("law", law),
            );
        }
    }

    /// `T(p(v)) = p(T(v))`.
    pub fn check_polynomial(&self, p: &Polynomial, probes: &ProbeSet<S>) -> CheckReport {
        let site = &self.source.site;
        let mut report = CheckReport::new(format!("polynomial[{}, {p}]", self.name), self.universe(probes));
        for &x in site.base_objects() {
            for v in probes.on(&self.source, x).iter() {
                report.tick();
                let l = self.apply(&self.source.poly_apply(p, v));
                let r = self.target.poly_apply(p, &self.apply(v));
                if l != r {
                    report.fail(Counterexample::new(
                        self.source.render(v),
                        self.target.render(&l),
                        self.target.render(&r),
                    ));
                }
            }
        }
        report.finish()
    }
}

/// `r ↦ r · 1_A`: the rank, the Chern character of a bundle over a discrete
/// space.
pub fn rank_transform(
    source: Arc<FunctorInstance<RankVect>>,
    ring: TableCoh,
) -> Result<NatTransform<RankVect, TableCoh>> {
    let target = Arc::new(FunctorInstance::new(ring.clone(), source.site.clone()));
    NatTransform::new(format!("rank→{}", ring.describe()), source, target, move |r| ring.nat(*r))
}

/// `r ↦ c^r`, a multiplicative class: sums go to products.
pub fn exp_transform(
    source: Arc<FunctorInstance<RankVect>>,
    ring: TableCoh,
    base: u32,
) -> Result<NatTransform<RankVect, TableCoh>> {
    if base as usize >= ring.len() {
        return Err(Error::Config(format!("base {base} is not an element of {}", ring.describe())));
    }
    let target = Arc::new(FunctorInstance::new(ring.clone(), source.site.clone()));
    let name = format!("exp[{}]→{}", ring.render(&base), ring.describe());
    NatTransform::new(name, source, target, move |r| {
        // square-and-multiply
        let (mut acc, mut sq, mut k) = (ring.one(), base, *r);
        while k > 0 {
            if k & 1 == 1 {
                acc = ring.mul(&acc, &sq);
            }
            sq = ring.mul(&sq, &sq);
            k >>= 1;
        }
        acc
    })
}

/// `Σ n_m · m ↦ Σ n_m`.
pub fn augmentation_transform(source: Arc<FunctorInstance<MonoidVect>>) -> Result<NatTransform<MonoidVect, RankVect>> {
    let target = Arc::new(FunctorInstance::new(RankVect, source.site.clone()));
    NatTransform::new("augmentation", source, target, |v: &Vec<u64>| v.iter().sum())
}

/// A finite table `θ ↦ θ^T`.
///
/// Lookup is extended to `Ident ↦ Ident`, `Zero ↦ Zero` and composites
/// `ψ ∘ θ ↦ ψ^T ∘ θ^T`, which is what products of δ-elements need.
#[derive(Debug, Clone, Default)]
pub struct OpCorrespondence {
    pub name: String,
    pub pairs: Vec<(Arc<OpExpr>, Arc<OpExpr>)>,
}

impl OpCorrespondence {
    pub fn new(name: impl Into<String>, pairs: Vec<(OpExpr, OpExpr)>) -> Self {
        OpCorrespondence {
            name: name.into(),
            pairs: pairs.into_iter().map(|(a, b)| (Arc::new(a), Arc::new(b))).collect(),
        }
    }

    pub fn lookup(&self, op: &OpExpr) -> Result<Arc<OpExpr>> {
        if let Some((_, t)) = self.pairs.iter().find(|(s, _)| s.as_ref() == op) {
            return Ok(t.clone());
        }
        match op {
            OpExpr::Ident => Ok(Arc::new(OpExpr::Ident)),
            OpExpr::Zero => Ok(Arc::new(OpExpr::Zero)),
            OpExpr::Compose(a, b) => Ok(Arc::new(OpExpr::Compose(self.lookup(a)?, self.lookup(b)?))),
            _ => Err(Error::UnmappedOperation(op.to_string())),
        }
    }
}

/// The faces of the cubic diagram for every base `f: X -> Y` and probe `u`
/// on `Y`: naturality of `T` (on `u` and on `θ(u)`), of `θ` and of `θ^T`,
/// and `T ∘ θ = θ^T ∘ T` at `Y` and at `X`.
pub fn check_cubic<S: Rig, T: Rig>(
    t: &NatTransform<S, T>,
    theta: &OpExpr,
    theta_t: &OpExpr,
    probes: &ProbeSet<S>,
) -> CheckReport {
    let (src, tgt) = (&t.source, &t.target);
    let site = &src.site;
    let mut report = CheckReport::new(format!("cubic[{}: {theta} ↦ {theta_t}]", t.name), t.universe(probes));
    for f in site.base_morphisms() {
        for u in probes.on(src, f.dst).iter() {
            let faces = (|| -> Result<Vec<(&str, Value<T::Elem>, Value<T::Elem>)>> {
                let fu = src.pullback(f, u)?;
                let th_u = theta.apply(src, u)?;
                let tu = t.apply(u);
                Ok(vec![
                    ("T natural", t.apply(&fu), tgt.pullback(f, &tu)?),
                    ("T natural on θ", t.apply(&src.pullback(f, &th_u)?), tgt.pullback(f, &t.apply(&th_u))?),
                    ("θ natural", t.apply(&theta.apply(src, &fu)?), t.apply(&src.pullback(f, &th_u)?)),
                    (
                        "θ^T natural",
                        theta_t.apply(tgt, &tgt.pullback(f, &tu)?)?,
                        tgt.pullback(f, &theta_t.apply(tgt, &tu)?)?,
                    ),
                    ("T∘θ = θ^T∘T at target", t.apply(&th_u), theta_t.apply(tgt, &tu)?),
                    (
                        "T∘θ = θ^T∘T at source",
                        t.apply(&theta.apply(src, &fu)?),
                        theta_t.apply(tgt, &t.apply(&fu))?,
                    ),
                ])
            })();
            match faces {
                Ok(faces) => {
                    for (face, l, r) in faces {
                        report.tick();
                        if l != r {
                            report.fail(
                                Counterexample::new(src.render(u), tgt.render(&l), tgt.render(&r))
                                    .bind("face", face)
                                    .bind("f", site.render_morphism(f)),
                            );
                        }
                    }
                }
                Err(e) => report.error(&site.render_morphism(f), &e),
            }
        }
    }
    report.finish()
}

/// An element of the δ-subtheory written as `δ(θ, f, s)`, or zero.
#[derive(Debug, Clone)]
pub enum DeltaForm {
    Zero,
    Delta { op: Arc<OpExpr>, section: Arc<Morphism> },
}

/// Rewrites a δ-element, unit, or an element built from them by the three
/// operations into `δ(θ, f, s)` form, following the closure identities.
pub fn delta_form<R: Rig>(th: &Bivariant<R>, c: &ElementOf<R>) -> Result<DeltaForm> {
    let site = th.site();
    let not_delta = || Error::Precondition(format!("{} is not in the δ-subtheory", c.label));
    Ok(match &c.rule {
        Rule::Zero => DeltaForm::Zero,
        Rule::Unit => DeltaForm::Delta {
            op: Arc::new(OpExpr::Ident),
            section: c.support.clone(),
        },
        Rule::Delta { op, section } => DeltaForm::Delta {
            op: op.clone(),
            section: section.clone(),
        },
        Rule::Induced(op) if op.zero_zero() => DeltaForm::Delta {
            op: op.clone(),
            section: c.support.clone(),
        },
        Rule::Product(a, b) => match (delta_form(th, a)?, delta_form(th, b)?) {
            (DeltaForm::Delta { op: t1, section: s1 }, DeltaForm::Delta { op: t2, section: s2 }) => DeltaForm::Delta {
                op: Arc::new(OpExpr::Compose(t2, t1)),
                section: site.compose(&s1, &s2)?,
            },
            _ => DeltaForm::Zero,
        },
        Rule::Pushforward(f, _, a) => match delta_form(th, a)? {
            DeltaForm::Delta { op, section } => DeltaForm::Delta {
                op,
                section: site.compose(f, &section)?,
            },
            DeltaForm::Zero => DeltaForm::Zero,
        },
        Rule::Pullback(h, a) => match delta_form(th, a)? {
            DeltaForm::Delta { op, section } => DeltaForm::Delta {
                op,
                section: site.pullback_section(&a.support, h, &section)?,
            },
            DeltaForm::Zero => DeltaForm::Zero,
        },
        _ => return Err(not_delta()),
    })
}

/// `γ_T(δ(θ, f, s)) = δ(θ^T, f, s)` in the target theory; zero goes to zero.
pub fn gamma<S: Rig, T: Rig>(
    source: &Bivariant<S>,
    target: &Bivariant<T>,
    corr: &OpCorrespondence,
    c: &ElementOf<S>,
) -> Result<Arc<ElementOf<T>>> {
    match delta_form(source, c)? {
        DeltaForm::Zero => Ok(target.zero(&c.support)),
        DeltaForm::Delta { op, section } => {
            let e = delta(target, corr.lookup(&op)?, &c.support, Some(&section))?;
            Ok(e)
        }
    }
}

/// Preservation of product, pushforward and pullback by `γ_T` on the
/// family, and the pairing square `T ∘ c_g = (c^T)_g ∘ T`.
pub fn check_grothendieck_laws<S: Rig, T: Rig>(
    t: &NatTransform<S, T>,
    corr: &OpCorrespondence,
    family: &[Arc<ElementOf<S>>],
    source_probes: &ProbeSet<S>,
    target_probes: &ProbeSet<T>,
) -> CheckReport {
    let source = Bivariant {
        fun: t.source.clone(),
    };
    let target = Bivariant {
        fun: t.target.clone(),
    };
    let site = source.site().clone();
    let tv = Verifier::new(&target, target_probes);
    let mut report = CheckReport::new(
        format!("grothendieck[{}, {}]", t.name, corr.name),
        format!("{}; {}", t.universe(source_probes), target_probes.describe()),
    );
    let g = |c: &ElementOf<S>| gamma(&source, &target, corr, c);
    let equal = |report: &mut CheckReport, law: &str, l: Result<Arc<ElementOf<T>>>, r: Result<Arc<ElementOf<T>>>| {
        match l.and_then(|l| r.and_then(|r| tv.equal_elements(&l, &r))) {
            Ok(mut sub) => {
                sub.check = format!("{law}: {}", sub.check);
                report.absorb(sub)
            }
            Err(e) => report.error(law, &e),
        }
    };

    for c in family {
        for d in family.iter().filter(|d| d.support.src == c.support.dst) {
            let lhs = source.product(c, d).and_then(|cd| g(&cd));
            let rhs = g(c).and_then(|a| target.product(&a, &g(d)?));
            equal(&mut report, "product", lhs, rhs);
        }
    }
    for c in family {
        let u = &c.support;
        for f in site.morphisms_from(u.src) {
            for k in site.morphisms_from(f.dst) {
                match site.compose(&k, &f) {
                    Ok(kf) if kf.id == u.id => {}
                    _ => continue,
                }
                let lhs = source.pushforward(&f, &k, c).and_then(|e| g(&e));
                let rhs = g(c).and_then(|a| target.pushforward(&f, &k, &a));
                equal(&mut report, "pushforward", lhs, rhs);
            }
        }
    }
    for c in family {
        let hs = match site.morphisms_into(c.support.dst) {
            Ok(hs) => hs,
            Err(e) => {
                report.error("universe", &e);
                continue;
            }
        };
        for h in hs.iter() {
            let lhs = source.pullback(h, c).and_then(|e| g(&e));
            let rhs = g(c).and_then(|a| target.pullback(h, &a));
            equal(&mut report, "pullback", lhs, rhs);
        }
    }

    let mut pairing = CheckReport::new("pairing square", "");
    for c in family {
        let ct = match g(c) {
            Ok(e) => e,
            Err(e) => {
                pairing.error(&c.label, &e);
                continue;
            }
        };
        let hs = match site.morphisms_into(c.support.dst) {
            Ok(hs) => hs,
            Err(e) => {
                pairing.error("universe", &e);
                continue;
            }
        };
        for h in hs.iter() {
            let maps = source.component(c, h).and_then(|m| Ok((m, target.component(&ct, h)?)));
            let (m, mt) = match maps {
                Ok(p) => p,
                Err(e) => {
                    pairing.error(&c.label, &e);
                    continue;
                }
            };
            for v in source_probes.on(&t.source, m.src).iter() {
                pairing.tick();
                let sides = m
                    .eval(&site, &t.source.rig, v)
                    .and_then(|out| Ok((t.apply(&out), mt.eval(&site, &t.target.rig, &t.apply(v))?)));
                match sides {
                    Ok((l, r)) if l == r => {}
                    Ok((l, r)) => pairing.fail(
                        Counterexample::new(t.source.render(v), t.target.render(&l), t.target.render(&r))
                            .bind("element", c.label.clone())
                            .bind("h", site.render_morphism(h)),
                    ),
                    Err(e) => pairing.error(&c.label, &e),
                }
            }
        }
    }
    report.absorb(pairing.finish());
    report.finish()
}

/// Whether `c` is in the δ-subtheory as recorded by its construction.
pub fn is_delta_built<R: Rig>(th: &Bivariant<R>, c: &ElementOf<R>) -> bool {
    matches!(c.provenance, Provenance::Delta | Provenance::Unit | Provenance::Zero) || delta_form(th, c).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functor::ProbePolicy;
    use crate::site::SiteBuilder;

    fn source() -> Arc<FunctorInstance<RankVect>> {
        let site = SiteBuilder::new().object("X", ["a", "b"]).build().unwrap();
        Arc::new(FunctorInstance::new(RankVect, site))
    }

    #[test]
    fn rank_transform_reduces_mod_n() {
        let src = source();
        let t = rank_transform(src.clone(), TableCoh::zmod(7).unwrap()).unwrap();
        assert_eq!(t.elem(&3), 3);
        assert_eq!(t.elem(&10), 3);
    }

    #[test]
    fn exp_transform_powers() {
        let src = source();
        let t = exp_transform(src, TableCoh::zmod(15).unwrap(), 2).unwrap();
        assert_eq!(t.elem(&3), 8);
        assert_eq!(t.elem(&0), 1);
    }

    #[test]
    fn augmentation_sums_coefficients() {
        let site = SiteBuilder::new().build().unwrap();
        let m = MonoidVect::cyclic(2, &["e", "g"]).unwrap();
        let t = augmentation_transform(Arc::new(FunctorInstance::new(m, site))).unwrap();
        assert_eq!(t.elem(&vec![2, 3]), 5);
    }

    #[test]
    fn additive_op_does_not_correspond_under_exp() {
        let src = source();
        let t = exp_transform(src, TableCoh::zmod(15).unwrap(), 2).unwrap();
        let probes = ProbeSet::new(ProbePolicy::default());
        let op = OpExpr::poly(vec![1, 1]);
        let r = check_cubic(&t, &op, &op, &probes);
        assert!(!r.passed);
    }
}
