//! Extensional comparison of value maps on probes, compatibility checking and
//! element equality.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::functor::{ProbeSet, Rig, Value};
use crate::report::{CheckReport, Counterexample};
use crate::site::{Morphism, ObjId};

use super::{Bivariant, ElementOf, MapOf, Program, ValueMap};

type MemoKey<E> = (ObjId, Arc<Program<E>>, Arc<Program<E>>);

/// A probe on which two maps disagree, with both outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch<E> {
    pub probe: Value<E>,
    pub lhs: Value<E>,
    pub rhs: Value<E>,
}

/// Compares value maps on every probe of their common source.
///
/// Outcomes are memoised per pair of normal forms, so a comparison that
/// recurs across diagram instances is evaluated once.
pub struct Verifier<'a, R: Rig> {
    pub th: &'a Bivariant<R>,
    pub probes: &'a ProbeSet<R>,
    memo: Mutex<HashMap<MemoKey<R::Elem>, Option<usize>>>,
}

impl<'a, R: Rig> Verifier<'a, R> {
    pub fn new(th: &'a Bivariant<R>, probes: &'a ProbeSet<R>) -> Self {
        Verifier {
            th,
            probes,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn universe(&self) -> String {
        format!("{}; {}", self.th.fun.describe(), self.probes.describe())
    }

    /// First probe on which `lhs` and `rhs` differ, and the number of probes.
    pub fn disagreement(&self, lhs: &MapOf<R>, rhs: &MapOf<R>) -> Result<(Option<Mismatch<R::Elem>>, usize)> {
        let site = self.th.site();
        let rig = self.th.rig();
        if lhs.src != rhs.src || lhs.dst != rhs.dst {
            return Err(Error::Domain {
                expected: format!("{} -> {}", site.object_name(lhs.src), site.object_name(lhs.dst)),
                found: format!("{} -> {}", site.object_name(rhs.src), site.object_name(rhs.dst)),
            });
        }
        let probes = self.probes.on(&self.th.fun, lhs.src);
        let lp = lhs.program(site, rig)?;
        let rp = rhs.program(site, rig)?;
        let key = (lhs.src, lp.clone(), rp.clone());
        let cached = self.memo.lock().unwrap().get(&key).copied();
        let bad = match cached {
            Some(b) => b,
            None => {
                let mut bad = None;
                for (i, v) in probes.iter().enumerate() {
                    if lp.run(rig, &v.entries)? != rp.run(rig, &v.entries)? {
                        bad = Some(i);
                        break;
                    }
                }
                self.memo.lock().unwrap().insert(key, bad);
                bad
            }
        };
        let mismatch = match bad {
            None => None,
            Some(i) => {
                let v = &probes[i];
                Some(Mismatch {
                    probe: v.clone(),
                    lhs: Value::new(lhs.dst, lp.run(rig, &v.entries)?),
                    rhs: Value::new(rhs.dst, rp.run(rig, &v.entries)?),
                })
            }
        };
        Ok((mismatch, probes.len()))
    }

    /// Compares and records the outcome in `report`; `diagram` names the
    /// instance.
    pub fn compare(
        &self,
        report: &mut CheckReport,
        lhs: Result<Arc<MapOf<R>>>,
        rhs: Result<Arc<MapOf<R>>>,
        diagram: impl FnOnce() -> Vec<(&'static str, String)>,
    ) {
        let outcome = lhs.and_then(|l| rhs.and_then(|r| self.disagreement(&l, &r)));
        match outcome {
            Ok((None, n)) => report.instances += n as u64,
            Ok((Some(m), n)) => {
                report.instances += n as u64;
                let fun = &self.th.fun;
                let mut cx = Counterexample::new(fun.render(&m.probe), fun.render(&m.lhs), fun.render(&m.rhs));
                for (role, value) in diagram() {
                    cx = cx.bind(role, value);
                }
                report.fail(cx);
            }
            Err(e) => {
                let ctx: Vec<String> = diagram().into_iter().map(|(r, v)| format!("{r}={v}")).collect();
                report.error(&ctx.join(" "), &e);
            }
        }
    }

    /// `h* ∘ c_g = c_{g∘h} ∘ h'*` for every `g` into the target and every
    /// `h` into the source of `g`, with `h' = paste(f, g, h)`.
    pub fn check_compatibility(&self, c: &ElementOf<R>) -> CheckReport {
        let th = self.th;
        let site = th.site();
        let mut report = CheckReport::new(format!("compatibility[{}]", c.label), self.universe());
        let gs = match site.morphisms_into(c.support.dst) {
            Ok(gs) => gs,
            Err(e) => {
                report.error("universe", &e);
                return report.finish();
            }
        };
        for g in gs.iter() {
            let hs = match site.morphisms_into(g.src) {
                Ok(hs) => hs,
                Err(e) => {
                    report.error(&site.render_morphism(g), &e);
                    continue;
                }
            };
            for h in hs.iter() {
                let lhs = th
                    .component(c, g)
                    .and_then(|cg| ValueMap::pipe(cg, ValueMap::pullback(h.clone())));
                let rhs = (|| {
                    let gh = site.compose(g, h)?;
                    let hp = site.paste(&c.support, g, h)?;
                    ValueMap::pipe(ValueMap::pullback(hp), th.component(c, &gh)?)
                })();
                self.compare(&mut report, lhs, rhs, || {
                    vec![
                        ("element", c.label.clone()),
                        ("g", site.render_morphism(g)),
                        ("h", site.render_morphism(h)),
                    ]
                });
            }
        }
        report.finish()
    }

    /// Components agree at every `g` into the common target.
    pub fn equal_elements(&self, c: &ElementOf<R>, d: &ElementOf<R>) -> Result<CheckReport> {
        let th = self.th;
        let site = th.site();
        if c.support.id != d.support.id {
            return Err(Error::Type(format!(
                "{} and {} have different supports {} and {}",
                c.label,
                d.label,
                site.render_morphism(&c.support),
                site.render_morphism(&d.support)
            )));
        }
        let mut report = CheckReport::new(format!("{} = {}", c.label, d.label), self.universe());
        for g in site.morphisms_into(c.support.dst)?.iter() {
            self.compare(&mut report, th.component(c, g), th.component(d, g), || {
                vec![("g", site.render_morphism(g))]
            });
        }
        Ok(report.finish())
    }

    /// Equality after identifying the sources of the supports along a
    /// bijection `phi: src(d) -> src(c)` with `c.f ∘ phi = d.f`.
    pub fn equal_up_to_iso(&self, c: &ElementOf<R>, d: &ElementOf<R>, phi: &Morphism) -> Result<CheckReport> {
        let mut report = CheckReport::new(format!("{} ≅ {}", c.label, d.label), self.universe());
        self.compare_up_to_iso(&mut report, c, d, phi, Vec::new)?;
        Ok(report.finish())
    }

    pub(crate) fn compare_up_to_iso(
        &self,
        report: &mut CheckReport,
        c: &ElementOf<R>,
        d: &ElementOf<R>,
        phi: &Morphism,
        diagram: impl Fn() -> Vec<(&'static str, String)>,
    ) -> Result<()> {
        let th = self.th;
        let site = th.site();
        let transported = site.compose(&c.support, phi)?;
        if transported.id != d.support.id {
            return Err(Error::Precondition(format!(
                "{} does not identify the supports of {} and {}",
                site.render_morphism(phi),
                c.label,
                d.label
            )));
        }
        for k in site.morphisms_into(c.support.dst)?.iter() {
            let rhs = site
                .apex_transport(&c.support, phi, k)
                .and_then(|t| ValueMap::pipe(ValueMap::pullback(t), th.component(d, k)?));
            self.compare(report, th.component(c, k), rhs, || {
                let mut v = diagram();
                v.push(("k", site.render_morphism(k)));
                v
            });
        }
        Ok(())
    }
}
