//! Rule-based bivariant elements, the product / pushforward / pullback
//! operations, units, and the axiom suite.
//!
//! An element over a support `f: X -> Y` is a rule that, for every
//! `g: Y' -> Y`, produces a value map from `F` of the canonical apex of
//! `(f, g)` to `F(Y')`. Mismatches between iterated and direct canonical
//! apexes are bridged by the explicit bijections of [`crate::site::Site`].

mod axioms;
mod check;
mod program;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functor::{FunctorInstance, Rig, Value};
use crate::operations::OpExpr;
use crate::site::{MorId, Morphism, ObjId, Site};

pub use axioms::{check_axioms, AxiomSuite};
pub use check::{Mismatch, Verifier};
pub use program::Program;

#[derive(Debug, Clone)]
pub enum MapBody<E> {
    Id,
    ZeroMap,
    PullbackAlong(Arc<Morphism>),
    ApplyOpAt(Arc<OpExpr>),
    SumConst(Value<E>),
    MulConst(Value<E>),
    Pipe(Arc<ValueMap<E>>, Arc<ValueMap<E>>),
}

/// A map `F(src) -> F(dst)`.
#[derive(Debug)]
pub struct ValueMap<E> {
    pub src: ObjId,
    pub dst: ObjId,
    pub body: MapBody<E>,
    program: OnceLock<Arc<Program<E>>>,
}

impl<E: Clone + Eq + fmt::Debug> ValueMap<E> {
    fn make(src: ObjId, dst: ObjId, body: MapBody<E>) -> Arc<Self> {
        Arc::new(ValueMap {
            src,
            dst,
            body,
            program: OnceLock::new(),
        })
    }

    pub fn id(obj: ObjId) -> Arc<Self> {
        Self::make(obj, obj, MapBody::Id)
    }

    pub fn zero(src: ObjId, dst: ObjId) -> Arc<Self> {
        Self::make(src, dst, MapBody::ZeroMap)
    }

    /// `m*: F(dst m) -> F(src m)`.
    pub fn pullback(m: Arc<Morphism>) -> Arc<Self> {
        Self::make(m.dst, m.src, MapBody::PullbackAlong(m))
    }

    pub fn op(op: Arc<OpExpr>, obj: ObjId) -> Arc<Self> {
        Self::make(obj, obj, MapBody::ApplyOpAt(op))
    }

    /// `v ↦ v ⊕ c`.
    pub fn sum_const(c: Value<E>) -> Arc<Self> {
        Self::make(c.object, c.object, MapBody::SumConst(c))
    }

    /// `v ↦ v ⊗ c`.
    pub fn mul_const(c: Value<E>) -> Arc<Self> {
        Self::make(c.object, c.object, MapBody::MulConst(c))
    }

    /// `first` then `then`.
    pub fn pipe(first: Arc<Self>, then: Arc<Self>) -> Result<Arc<Self>> {
        if first.dst != then.src {
            return Err(Error::Domain {
                expected: format!("object #{}", then.src.0),
                found: format!("object #{}", first.dst.0),
            });
        }
        Ok(Self::make(first.src, then.dst, MapBody::Pipe(first, then)))
    }

    pub fn chain(stages: impl IntoIterator<Item = Arc<Self>>) -> Result<Arc<Self>> {
        let mut it = stages.into_iter();
        let mut acc = it.next().expect("chain needs a stage");
        for s in it {
            acc = Self::pipe(acc, s)?;
        }
        Ok(acc)
    }

    /// Normal form, compiled once.
    pub fn program<R: Rig<Elem = E>>(&self, site: &Site, rig: &R) -> Result<Arc<Program<E>>> {
        if let Some(p) = self.program.get() {
            return Ok(p.clone());
        }
        let src_len = site.object(self.src).len();
        let p = match &self.body {
            MapBody::Id => Program::identity(src_len),
            MapBody::ZeroMap => Program::constant(src_len, vec![rig.zero(); site.object(self.dst).len()]),
            MapBody::PullbackAlong(m) => Program::gather(src_len, &m.map),
            MapBody::ApplyOpAt(op) => Program::op(rig, src_len, op.clone())?,
            MapBody::SumConst(c) => Program::add(rig, c.entries.clone())?,
            MapBody::MulConst(c) => Program::mul(rig, c.entries.clone())?,
            MapBody::Pipe(a, b) => a.program(site, rig)?.then(&*b.program(site, rig)?, rig)?,
        };
        Ok(self.program.get_or_init(|| Arc::new(p)).clone())
    }

    pub fn eval<R: Rig<Elem = E>>(&self, site: &Site, rig: &R, v: &Value<E>) -> Result<Value<E>> {
        if v.object != self.src {
            return Err(Error::Domain {
                expected: site.object_name(self.src),
                found: site.object_name(v.object),
            });
        }
        Ok(Value::new(self.dst, self.program(site, rig)?.run(rig, &v.entries)?))
    }

    pub fn describe(&self, site: &Site) -> String {
        match &self.body {
            MapBody::Id => "id".into(),
            MapBody::ZeroMap => "zero".into(),
            MapBody::PullbackAlong(m) => format!("pullback({})", site.render_morphism(m)),
            MapBody::ApplyOpAt(op) => format!("{op}@{}", site.object_name(self.src)),
            MapBody::SumConst(c) => format!("(+{:?})", c.entries),
            MapBody::MulConst(c) => format!("(*{:?})", c.entries),
            MapBody::Pipe(a, b) => format!("{} ; {}", a.describe(site), b.describe(site)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Provenance {
    Delta,
    DeltaCap,
    PhiSum,
    PhiTensor,
    Unit,
    Zero,
    Induced,
    Product,
    Pushforward,
    Pullback,
    Custom,
}

type CustomRule<E> = Arc<dyn Fn(&Site, &Morphism) -> Result<Arc<ValueMap<E>>> + Send + Sync>;

#[derive(Clone)]
pub enum Rule<E> {
    /// `diag_g*`, the identity under `apex(id, g) ≅ X'`.
    Unit,
    Zero,
    /// `θ_{X'}` at every `g: X' -> X`.
    Induced(Arc<OpExpr>),
    /// `s'* ∘ θ_{apex}` with `s'` the pulled-back section.
    Delta { op: Arc<OpExpr>, section: Arc<Morphism> },
    /// `s'* ∘ c_{g'}` with `g'` the top map of the square.
    DeltaCap { inner: Arc<Element<E>>, section: Arc<Morphism> },
    /// `v ↦ v ⊕ g*E` on identity supports.
    SumConst(Value<E>),
    /// `v ↦ v ⊗ g*E` on identity supports.
    MulConst(Value<E>),
    Product(Arc<Element<E>>, Arc<Element<E>>),
    /// Pushforward along the first morphism; the second is the remaining
    /// factor of the support.
    Pushforward(Arc<Morphism>, Arc<Morphism>, Arc<Element<E>>),
    Pullback(Arc<Morphism>, Arc<Element<E>>),
    /// For `m: A -> B` and an element over `id_B`, the element over `id_A`
    /// with components `d_{m∘k}`.
    Restrict(Arc<Morphism>, Arc<Element<E>>),
    Custom(CustomRule<E>),
}

impl<E> fmt::Debug for Rule<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Unit => f.write_str("Unit"),
            Rule::Zero => f.write_str("Zero"),
            Rule::Induced(op) => write!(f, "Induced({op})"),
            Rule::Delta { op, section } => write!(f, "Delta({op}, s=#{})", section.id.0),
            Rule::DeltaCap { inner, section } => write!(f, "DeltaCap({}, s=#{})", inner.label, section.id.0),
            Rule::SumConst(_) => f.write_str("SumConst"),
            Rule::MulConst(_) => f.write_str("MulConst"),
            Rule::Product(a, b) => write!(f, "Product({}, {})", a.label, b.label),
            Rule::Pushforward(m, _, c) => write!(f, "Pushforward(#{}, {})", m.id.0, c.label),
            Rule::Pullback(m, c) => write!(f, "Pullback(#{}, {})", m.id.0, c.label),
            Rule::Restrict(m, c) => write!(f, "Restrict(#{}, {})", m.id.0, c.label),
            Rule::Custom(_) => f.write_str("Custom"),
        }
    }
}

pub fn is_identity(m: &Morphism) -> bool {
    m.src == m.dst && m.map.iter().enumerate().all(|(i, &j)| i as u32 == j)
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// An element of the co-operational theory over `support`.
pub struct Element<E> {
    id: u64,
    pub support: Arc<Morphism>,
    pub provenance: Provenance,
    pub label: String,
    pub rule: Rule<E>,
    cache: Mutex<HashMap<MorId, Arc<ValueMap<E>>>>,
}

impl<E> fmt::Debug for Element<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Element")
            .field("label", &self.label)
            .field("support", &self.support.id)
            .field("provenance", &self.provenance)
            .field("rule", &self.rule)
            .finish()
    }
}

impl<E> Element<E> {
    pub fn new(support: Arc<Morphism>, provenance: Provenance, label: impl Into<String>, rule: Rule<E>) -> Arc<Self> {
        Arc::new(Element {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            support,
            provenance,
            label: label.into(),
            rule,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Process-unique identity, for memo keys.
    pub fn uid(&self) -> u64 {
        self.id
    }
}

/// The co-operational theory of one functor: element constructors and
/// component evaluation.
#[derive(Debug, Clone)]
pub struct Bivariant<R: Rig> {
    pub fun: Arc<FunctorInstance<R>>,
}

pub type ElementOf<R> = Element<<R as Rig>::Elem>;
pub type MapOf<R> = ValueMap<<R as Rig>::Elem>;

impl<R: Rig> Bivariant<R> {
    pub fn new(fun: FunctorInstance<R>) -> Self {
        Bivariant { fun: Arc::new(fun) }
    }

    pub fn site(&self) -> &Arc<Site> {
        &self.fun.site
    }

    pub fn rig(&self) -> &R {
        &self.fun.rig
    }

    pub fn unit(&self, x: ObjId) -> Arc<ElementOf<R>> {
        let site = self.site();
        Element::new(site.identity(x), Provenance::Unit, format!("1_{}", site.object_name(x)), Rule::Unit)
    }

    pub fn zero(&self, f: &Arc<Morphism>) -> Arc<ElementOf<R>> {
        Element::new(f.clone(), Provenance::Zero, format!("0[{}]", self.site().render_morphism(f)), Rule::Zero)
    }

    /// `θ̃ = {θ_{X'} | g: X' -> X}` over `id_X`.
    pub fn induced(&self, op: Arc<OpExpr>, x: ObjId) -> Arc<ElementOf<R>> {
        let site = self.site();
        let label = format!("induced({op}, {})", site.object_name(x));
        Element::new(site.identity(x), Provenance::Induced, label, Rule::Induced(op))
    }

    /// `c • d` for `c` over `f: X -> Y` and `d` over `g: Y -> Z`.
    pub fn product(&self, c: &Arc<ElementOf<R>>, d: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        let support = self.site().compose(&d.support, &c.support)?;
        Ok(Element::new(
            support,
            Provenance::Product,
            format!("({} • {})", c.label, d.label),
            Rule::Product(c.clone(), d.clone()),
        ))
    }

    /// `f_* c` for `c` over `g ∘ f`; the result lies over `g`.
    pub fn pushforward(&self, f: &Arc<Morphism>, g: &Arc<Morphism>, c: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        let site = self.site();
        let gf = site.compose(g, f)?;
        if gf.id != c.support.id {
            return Err(Error::Precondition(format!(
                "support {} of {} does not factor as {} after {}",
                site.render_morphism(&c.support),
                c.label,
                site.render_morphism(g),
                site.render_morphism(f)
            )));
        }
        Ok(Element::new(
            g.clone(),
            Provenance::Pushforward,
            format!("{}_*{}", site.render_morphism(f), c.label),
            Rule::Pushforward(f.clone(), g.clone(), c.clone()),
        ))
    }

    /// `g* c` for `g: Y' -> Y`; the result lies over the left map of the
    /// square of `(support, g)`.
    pub fn pullback(&self, g: &Arc<Morphism>, c: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        let site = self.site();
        let sq = site.fiber_product(&c.support, g)?;
        Ok(Element::new(
            sq.left,
            Provenance::Pullback,
            format!("{}^*{}", site.render_morphism(g), c.label),
            Rule::Pullback(g.clone(), c.clone()),
        ))
    }

    /// For `m: A -> B` and `d` over `id_B`: the element over `id_A` whose
    /// component at `k` is `d_{m∘k}`.
    pub fn restrict(&self, m: &Arc<Morphism>, d: &Arc<ElementOf<R>>) -> Result<Arc<ElementOf<R>>> {
        let site = self.site();
        if !is_identity(&d.support) || d.support.src != m.dst {
            return Err(Error::Precondition(format!(
                "{} is not supported on the identity of {}",
                d.label,
                site.object_name(m.dst)
            )));
        }
        Ok(Element::new(
            site.identity(m.src),
            Provenance::Pullback,
            format!("{}^♭{}", site.render_morphism(m), d.label),
            Rule::Restrict(m.clone(), d.clone()),
        ))
    }

    pub fn custom(
        &self,
        support: Arc<Morphism>,
        label: impl Into<String>,
        rule: impl Fn(&Site, &Morphism) -> Result<Arc<MapOf<R>>> + Send + Sync + 'static,
    ) -> Arc<ElementOf<R>> {
        Element::new(support, Provenance::Custom, label, Rule::Custom(Arc::new(rule)))
    }

    /// The component `c_g: F(apex(f, g)) -> F(Y')`.
    pub fn component(&self, c: &ElementOf<R>, g: &Morphism) -> Result<Arc<MapOf<R>>> {
        let site = self.site();
        if g.dst != c.support.dst {
            return Err(Error::Index {
                g: site.render_morphism(g),
                target: site.object_name(c.support.dst),
            });
        }
        if let Some(m) = c.cache.lock().unwrap().get(&g.id) {
            return Ok(m.clone());
        }
        let m = self.build_component(c, g)?;
        c.cache.lock().unwrap().insert(g.id, m.clone());
        Ok(m)
    }

    fn build_component(&self, c: &ElementOf<R>, g: &Morphism) -> Result<Arc<MapOf<R>>> {
        let site = self.site();
        let f = &c.support;
        Ok(match &c.rule {
            Rule::Unit => ValueMap::pullback(site.diagonal(g)?),
            Rule::Zero => ValueMap::zero(site.fiber_product(f, g)?.apex, g.src),
            Rule::Induced(op) => ValueMap::pipe(ValueMap::pullback(site.diagonal(g)?), ValueMap::op(op.clone(), g.src))?,
            Rule::Delta { op, section } => {
                let sq = site.fiber_product(f, g)?;
                let sp = site.pullback_section(f, g, section)?;
                ValueMap::pipe(ValueMap::op(op.clone(), sq.apex), ValueMap::pullback(sp))?
            }
            Rule::DeltaCap { inner, section } => {
                let sq = site.fiber_product(f, g)?;
                let sp = site.pullback_section(f, g, section)?;
                let over_top = site.fiber_product(&inner.support, &sq.top)?;
                ValueMap::chain([
                    ValueMap::pullback(over_top.left),
                    self.component(inner, &sq.top)?,
                    ValueMap::pullback(sp),
                ])?
            }
            Rule::SumConst(e) => ValueMap::pipe(
                ValueMap::pullback(site.diagonal(g)?),
                ValueMap::sum_const(self.fun.pullback(g, e)?),
            )?,
            Rule::MulConst(e) => ValueMap::pipe(
                ValueMap::pullback(site.diagonal(g)?),
                ValueMap::mul_const(self.fun.pullback(g, e)?),
            )?,
            Rule::Product(a, b) => self.product_at(a, b, g)?,
            Rule::Pushforward(fm, k, a) => self.pushforward_at(fm, k, a, g)?,
            Rule::Pullback(gm, a) => self.pullback_at(gm, a, g)?,
            Rule::Restrict(m, a) => {
                let mg = site.compose(m, g)?;
                ValueMap::chain([
                    ValueMap::pullback(site.diagonal(g)?),
                    ValueMap::pullback(site.inverse(&*site.diagonal(&mg)?)?),
                    self.component(a, &mg)?,
                ])?
            }
            Rule::Custom(rule) => {
                let m = rule(site, g)?;
                let apex = site.fiber_product(f, g)?.apex;
                if m.src != apex || m.dst != g.src {
                    return Err(Error::Domain {
                        expected: format!("{} -> {}", site.object_name(apex), site.object_name(g.src)),
                        found: format!("{} -> {}", site.object_name(m.src), site.object_name(m.dst)),
                    });
                }
                m
            }
        })
    }

    /// `(c • d)_h = d_h ∘ c_{h'}` with `h'` the top map of `(g, h)`,
    /// precomposed with the bridge onto the direct apex.
    pub fn product_at(&self, c: &ElementOf<R>, d: &ElementOf<R>, h: &Morphism) -> Result<Arc<MapOf<R>>> {
        let site = self.site();
        let lower = site.fiber_product(&d.support, h)?;
        let bridge = site.product_bridge(&c.support, &d.support, h)?;
        ValueMap::chain([
            ValueMap::pullback(bridge),
            self.component(c, &lower.top)?,
            self.component(d, h)?,
        ])
    }

    /// `(f_* c)_h = c_h ∘ f'^*` for `c` over `k ∘ f`.
    pub fn pushforward_at(&self, f: &Morphism, k: &Morphism, c: &ElementOf<R>, h: &Morphism) -> Result<Arc<MapOf<R>>> {
        let fp = self.site().pushforward_map(f, k, h)?;
        ValueMap::pipe(ValueMap::pullback(fp), self.component(c, h)?)
    }

    /// `(g* c)_h = c_{g∘h}`, transported to the iterated apex.
    pub fn pullback_at(&self, g: &Morphism, c: &ElementOf<R>, h: &Morphism) -> Result<Arc<MapOf<R>>> {
        let site = self.site();
        let bridge = site.pullback_bridge(&c.support, g, h)?;
        let gh = site.compose(g, h)?;
        ValueMap::pipe(ValueMap::pullback(bridge), self.component(c, &gh)?)
    }

    pub fn eval_component(&self, c: &ElementOf<R>, g: &Morphism, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        let site = self.site();
        let m = self.component(c, g)?;
        m.eval(site, self.rig(), v)
    }

    /// For identity-supported `c` and `g: X' -> X`, the component read on
    /// `F(X')` through the bijection `X' ≅ apex(id_X, g)`.
    pub fn component_on_source(&self, c: &ElementOf<R>, g: &Morphism) -> Result<Arc<MapOf<R>>> {
        let site = self.site();
        if !is_identity(&c.support) {
            return Err(Error::Precondition(format!("{} is not supported on an identity", c.label)));
        }
        let inv = site.inverse(&*site.diagonal(g)?)?;
        ValueMap::pipe(ValueMap::pullback(inv), self.component(c, g)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functor::RankVect;
    use crate::site::SiteBuilder;

    fn theory() -> Bivariant<RankVect> {
        let site = SiteBuilder::new()
            .object("X", ["a", "b"])
            .build()
            .unwrap();
        Bivariant::new(FunctorInstance::new(RankVect, site))
    }

    #[test]
    fn unit_component_is_identity() {
        let th = theory();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let pt = site.terminal();
        let one = th.unit(x);
        let g = site.point(x, 1).unwrap();
        let apex = site.fiber_product(&one.support, &g).unwrap().apex;
        let v = th.fun.value(apex, vec![7]).unwrap();
        let out = th.eval_component(&one, &g, &v).unwrap();
        assert_eq!(out, Value::new(pt, vec![7]));
    }

    #[test]
    fn zero_component_is_zero() {
        let th = theory();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let f = site.to_terminal(x);
        let z = th.zero(&f);
        let id = site.identity(site.terminal());
        let apex = site.fiber_product(&f, &id).unwrap().apex;
        let v = th.fun.value(apex, vec![3, 2]).unwrap();
        assert_eq!(th.eval_component(&z, &id, &v).unwrap().entries, vec![0]);
    }

    #[test]
    fn component_index_error() {
        let th = theory();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let one = th.unit(x);
        let id_pt = site.identity(site.terminal());
        assert!(matches!(th.component(&one, &id_pt), Err(Error::Index { .. })));
    }

    #[test]
    fn pipe_rejects_mistyped_stages() {
        let th = theory();
        let site = th.site().clone();
        let x = site.object_id("X").unwrap();
        let a = ValueMap::<u64>::id(x);
        let b = ValueMap::<u64>::id(site.terminal());
        assert!(ValueMap::pipe(a, b).is_err());
    }
}
