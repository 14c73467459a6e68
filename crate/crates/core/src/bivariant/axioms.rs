//! The seven bivariant axioms and the unit laws, checked on every
//! configuration that can be assembled from a family of elements.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::functor::{ProbeSet, Rig};
use crate::report::CheckReport;
use crate::site::{MorId, Morphism, ObjId};

use super::{Bivariant, ElementOf, Verifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Built {
    Product,
    Pushforward,
    Pullback,
}

/// Axiom runner over a fixed element family.
pub struct AxiomSuite<'a, R: Rig> {
    pub verifier: Verifier<'a, R>,
    elements: Vec<Arc<ElementOf<R>>>,
    by_src: BTreeMap<ObjId, Vec<usize>>,
    built: Mutex<HashMap<(Built, u64, u64, MorId), Arc<ElementOf<R>>>>,
    units: Mutex<HashMap<ObjId, Arc<ElementOf<R>>>>,
}

fn label<R: Rig>(c: &ElementOf<R>) -> String {
    c.label.clone()
}

impl<'a, R: Rig> AxiomSuite<'a, R> {
    pub fn new(th: &'a Bivariant<R>, elements: Vec<Arc<ElementOf<R>>>, probes: &'a ProbeSet<R>) -> Self {
        let mut by_src: BTreeMap<ObjId, Vec<usize>> = BTreeMap::new();
        for (i, e) in elements.iter().enumerate() {
            by_src.entry(e.support.src).or_default().push(i);
        }
        AxiomSuite {
            verifier: Verifier::new(th, probes),
            elements,
            by_src,
            built: Mutex::new(HashMap::new()),
            units: Mutex::new(HashMap::new()),
        }
    }

    fn th(&self) -> &'a Bivariant<R> {
        self.verifier.th
    }

    pub fn elements(&self) -> &[Arc<ElementOf<R>>] {
        &self.elements
    }

    fn starting_at(&self, obj: ObjId) -> impl Iterator<Item = &Arc<ElementOf<R>>> {
        self.by_src
            .get(&obj)
            .into_iter()
            .flat_map(move |v| v.iter().map(move |&i| &self.elements[i]))
    }

    fn memo(
        &self,
        key: (Built, u64, u64, MorId),
        make: impl FnOnce() -> Result<Arc<ElementOf<R>>>,
    ) -> Result<Arc<ElementOf<R>>> {
        if let Some(e) = self.built.lock().unwrap().get(&key) {
            return Ok(e.clone());
        }
        let e = make()?;
        self.built.lock().unwrap().insert(key, e.clone());
        Ok(e)
    }

    fn product(&self, c: &Arc<ElementOf<R>>, d: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        self.memo((Built::Product, c.uid(), d.uid(), MorId(0)), || self.th().product(c, d))
    }

    fn pushforward(&self, f: &Arc<Morphism>, g: &Arc<Morphism>, c: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        self.memo((Built::Pushforward, c.uid(), g.id.0 as u64, f.id), || {
            self.th().pushforward(f, g, c)
        })
    }

    fn pullback(&self, g: &Arc<Morphism>, c: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        self.memo((Built::Pullback, c.uid(), 0, g.id), || self.th().pullback(g, c))
    }

    fn unit(&self, x: ObjId) -> Arc<ElementOf<R>> {
        self.units
            .lock()
            .unwrap()
            .entry(x)
            .or_insert_with(|| self.th().unit(x))
            .clone()
    }

    fn into(&self, obj: ObjId, report: &mut CheckReport) -> Arc<Vec<Arc<Morphism>>> {
        match self.th().site().morphisms_into(obj) {
            Ok(v) => v,
            Err(e) => {
                report.error("universe", &e);
                Arc::new(Vec::new())
            }
        }
    }

    fn from(&self, obj: ObjId) -> Vec<Arc<Morphism>> {
        self.th().site().morphisms_from(obj)
    }

    fn name(&self, m: &Morphism) -> String {
        self.th().site().render_morphism(m)
    }

    /// Every element of the family satisfies the compatibility condition.
    pub fn compatibility(&self) -> CheckReport {
        let mut report = CheckReport::new("compatibility", self.verifier.universe());
        for c in &self.elements {
            report.absorb(self.verifier.check_compatibility(c));
        }
        report.finish()
    }

    /// (A1) `(α • β) • γ = α • (β • γ)`.
    pub fn a1(&self) -> CheckReport {
        let th = self.th();
        let mut report = CheckReport::new("A1 product is associative", self.verifier.universe());
        for a in &self.elements {
            for b in self.starting_at(a.support.dst) {
                let ab = match self.product(a, b) {
                    Ok(e) => e,
                    Err(e) => {
                        report.error("α•β", &e);
                        continue;
                    }
                };
                for c in self.starting_at(b.support.dst) {
                    let bc = match self.product(b, c) {
                        Ok(e) => e,
                        Err(e) => {
                            report.error("β•γ", &e);
                            continue;
                        }
                    };
                    for h in self.into(c.support.dst, &mut report).iter() {
                        self.verifier.compare(
                            &mut report,
                            th.product_at(&ab, c, h),
                            th.product_at(a, &bc, h),
                            || vec![("α", label::<R>(a)), ("β", label::<R>(b)), ("γ", label::<R>(c)), ("h", self.name(h))],
                        );
                    }
                }
            }
        }
        report.finish()
    }

    /// (A2) `(g ∘ f)_* α = g_*(f_* α)` for `α` over `k ∘ g ∘ f`.
    pub fn a2(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("A2 pushforward is functorial", self.verifier.universe());
        for a in &self.elements {
            let u = &a.support;
            for f in self.from(u.src) {
                for g in self.from(f.dst) {
                    let Ok(gf) = site.compose(&g, &f) else { continue };
                    for k in self.from(g.dst) {
                        match site.compose(&k, &gf) {
                            Ok(kgf) if kgf.id == u.id => {}
                            _ => continue,
                        }
                        let kg = match site.compose(&k, &g) {
                            Ok(m) => m,
                            Err(e) => {
                                report.error("k∘g", &e);
                                continue;
                            }
                        };
                        let fa = match self.pushforward(&f, &kg, a) {
                            Ok(e) => e,
                            Err(e) => {
                                report.error("f_*α", &e);
                                continue;
                            }
                        };
                        for h in self.into(k.dst, &mut report).iter() {
                            self.verifier.compare(
                                &mut report,
                                th.pushforward_at(&gf, &k, a, h),
                                th.pushforward_at(&g, &k, &fa, h),
                                || {
                                    vec![
                                        ("α", label::<R>(a)),
                                        ("f", self.name(&f)),
                                        ("g", self.name(&g)),
                                        ("k", self.name(&k)),
                                        ("h", self.name(h)),
                                    ]
                                },
                            );
                        }
                    }
                }
            }
        }
        report.finish()
    }

    /// (A3) `(g ∘ h)* α ≅ h*(g* α)`, identified along the inverse of the
    /// pullback bridge.
    pub fn a3(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("A3 pullback is functorial", self.verifier.universe());
        for a in &self.elements {
            for g in self.into(a.support.dst, &mut report).iter() {
                for h in self.into(g.src, &mut report).iter() {
                    let res = (|| -> Result<()> {
                        let gh = site.compose(g, h)?;
                        let lhs = self.pullback(&gh, a)?;
                        let ga = self.pullback(g, a)?;
                        let rhs = self.pullback(h, &ga)?;
                        let phi = site.inverse(&*site.pullback_bridge(&a.support, g, h)?)?;
                        self.verifier.compare_up_to_iso(&mut report, &lhs, &rhs, &phi, || {
                            vec![("α", label::<R>(a)), ("g", self.name(g)), ("h", self.name(h))]
                        })
                    })();
                    if let Err(e) = res {
                        report.error("A3", &e);
                    }
                }
            }
        }
        report.finish()
    }

    /// (A12) `f_*(α • β) = (f_* α) • β` for `α` over `g ∘ f`.
    pub fn a12(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("A12 product and pushforward commute", self.verifier.universe());
        for a in &self.elements {
            let u = &a.support;
            for f in self.from(u.src) {
                for g in self.from(f.dst) {
                    match site.compose(&g, &f) {
                        Ok(gf) if gf.id == u.id => {}
                        _ => continue,
                    }
                    let fa = match self.pushforward(&f, &g, a) {
                        Ok(e) => e,
                        Err(e) => {
                            report.error("f_*α", &e);
                            continue;
                        }
                    };
                    for b in self.starting_at(u.dst) {
                        let res = (|| -> Result<()> {
                            let ab = self.product(a, b)?;
                            let kg = site.compose(&b.support, &g)?;
                            for h in self.into(b.support.dst, &mut report).iter() {
                                self.verifier.compare(
                                    &mut report,
                                    th.pushforward_at(&f, &kg, &ab, h),
                                    th.product_at(&fa, b, h),
                                    || {
                                        vec![
                                            ("α", label::<R>(a)),
                                            ("β", label::<R>(b)),
                                            ("f", self.name(&f)),
                                            ("g", self.name(&g)),
                                            ("h", self.name(h)),
                                        ]
                                    },
                                );
                            }
                            Ok(())
                        })();
                        if let Err(e) = res {
                            report.error("A12", &e);
                        }
                    }
                }
            }
        }
        report.finish()
    }

    /// (A13) `h*(α • β) ≅ h'* α • h* β`, identified along the product bridge.
    pub fn a13(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("A13 product and pullback commute", self.verifier.universe());
        for a in &self.elements {
            for b in self.starting_at(a.support.dst) {
                let ab = match self.product(a, b) {
                    Ok(e) => e,
                    Err(e) => {
                        report.error("α•β", &e);
                        continue;
                    }
                };
                for h in self.into(b.support.dst, &mut report).iter() {
                    let res = (|| -> Result<()> {
                        let lhs = self.pullback(h, &ab)?;
                        let hp = site.fiber_product(&b.support, h)?.top;
                        let rhs = self.product(&self.pullback(&hp, a)?, &self.pullback(h, b)?)?;
                        let phi = site.product_bridge(&a.support, &b.support, h)?;
                        self.verifier.compare_up_to_iso(&mut report, &lhs, &rhs, &phi, || {
                            vec![("α", label::<R>(a)), ("β", label::<R>(b)), ("h", self.name(h))]
                        })
                    })();
                    if let Err(e) = res {
                        report.error("A13", &e);
                    }
                }
            }
        }
        report.finish()
    }

    /// (A23) `f'_*(h* α) = h*(f_* α)` for `α` over `g ∘ f` and `h` into the
    /// target of `g`.
    pub fn a23(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("A23 pushforward and pullback commute", self.verifier.universe());
        for a in &self.elements {
            let u = &a.support;
            for f in self.from(u.src) {
                for g in self.from(f.dst) {
                    match site.compose(&g, &f) {
                        Ok(gf) if gf.id == u.id => {}
                        _ => continue,
                    }
                    for h in self.into(g.dst, &mut report).iter() {
                        let res = (|| -> Result<()> {
                            let fa = self.pushforward(&f, &g, a)?;
                            let rhs = self.pullback(h, &fa)?;
                            let ha = self.pullback(h, a)?;
                            let fp = site.pushforward_map(&f, &g, h)?;
                            let gp = site.fiber_product(&g, h)?.left;
                            let lhs = self.pushforward(&fp, &gp, &ha)?;
                            for k in self.into(h.src, &mut report).iter() {
                                self.verifier.compare(&mut report, th.component(&lhs, k), th.component(&rhs, k), || {
                                    vec![
                                        ("α", label::<R>(a)),
                                        ("f", self.name(&f)),
                                        ("g", self.name(&g)),
                                        ("h", self.name(h)),
                                        ("k", self.name(k)),
                                    ]
                                });
                            }
                            Ok(())
                        })();
                        if let Err(e) = res {
                            report.error("A23", &e);
                        }
                    }
                }
            }
        }
        report.finish()
    }

    /// (A123) `g'_*(g* α • β) = α • g_* β` for `α` over `f: X -> Y`,
    /// `g: Y' -> Y` and `β` over `m ∘ g`.
    pub fn a123(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("A123 projection formula", self.verifier.universe());
        for a in &self.elements {
            let f = &a.support;
            for g in self.into(f.dst, &mut report).iter() {
                let ms = self.from(f.dst);
                for b in self.starting_at(g.src) {
                    for m in ms.iter() {
                        match site.compose(m, g) {
                            Ok(mg) if mg.id == b.support.id => {}
                            _ => continue,
                        }
                        let res = (|| -> Result<()> {
                            let ga = self.pullback(g, a)?;
                            let lhs_inner = self.product(&ga, b)?;
                            let gp = site.fiber_product(f, g)?.top;
                            let mf = site.compose(m, f)?;
                            let gb = self.pushforward(g, m, b)?;
                            for h in self.into(m.dst, &mut report).iter() {
                                self.verifier.compare(
                                    &mut report,
                                    th.pushforward_at(&gp, &mf, &lhs_inner, h),
                                    th.product_at(a, &gb, h),
                                    || {
                                        vec![
                                            ("α", label::<R>(a)),
                                            ("β", label::<R>(b)),
                                            ("g", self.name(g)),
                                            ("m", self.name(m)),
                                            ("h", self.name(h)),
                                        ]
                                    },
                                );
                            }
                            Ok(())
                        })();
                        if let Err(e) = res {
                            report.error("A123", &e);
                        }
                    }
                }
            }
        }
        report.finish()
    }

    /// `α • 1_Y = α`, `1_X • α = α` for every family element, and
    /// `g* 1_X ≅ 1_{X'}` for every `g` into a declared object.
    pub fn units(&self) -> CheckReport {
        let th = self.th();
        let site = th.site();
        let mut report = CheckReport::new("units", self.verifier.universe());
        for a in &self.elements {
            let right = self.unit(a.support.dst);
            let left = self.unit(a.support.src);
            for h in self.into(a.support.dst, &mut report).iter() {
                self.verifier.compare(&mut report, th.product_at(a, &right, h), th.component(a, h), || {
                    vec![("clause", "α•1".into()), ("α", label::<R>(a)), ("h", self.name(h))]
                });
                self.verifier.compare(&mut report, th.product_at(&left, a, h), th.component(a, h), || {
                    vec![("clause", "1•α".into()), ("α", label::<R>(a)), ("h", self.name(h))]
                });
            }
        }
        for &x in site.base_objects() {
            let one = self.unit(x);
            for g in self.into(x, &mut report).iter() {
                let res = (|| -> Result<()> {
                    let pulled = self.pullback(g, &one)?;
                    let target = self.unit(g.src);
                    let phi = site.diagonal(g)?;
                    self.verifier.compare_up_to_iso(&mut report, &pulled, &target, &phi, || {
                        vec![("clause", "g*1".into()), ("g", self.name(g))]
                    })
                })();
                if let Err(e) = res {
                    report.error("g*1", &e);
                }
            }
        }
        report.finish()
    }

    /// All axioms in a fixed order.
    pub fn run_all(&self) -> Vec<CheckReport> {
        vec![
            self.compatibility(),
            self.a1(),
            self.a2(),
            self.a3(),
            self.a12(),
            self.a13(),
            self.a23(),
            self.a123(),
            self.units(),
        ]
    }
}

/// The full suite folded into one report.
pub fn check_axioms<R: Rig>(
    th: &Bivariant<R>,
    elements: Vec<Arc<ElementOf<R>>>,
    probes: &ProbeSet<R>,
) -> CheckReport {
    let suite = AxiomSuite::new(th, elements, probes);
    let mut report = CheckReport::new("axioms", suite.verifier.universe());
    for r in suite.run_all() {
        report.absorb(r);
    }
    report.finish()
}
