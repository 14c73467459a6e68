//! Cohomology operations as natural self-families, generalized operations
//! along sectional maps, and the Quillen-style `P`/`S` constructions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functor::{FunctorInstance, Polynomial, ProbeSet, Rig, TableCoh, Value};
use crate::report::{CheckReport, Counterexample};
use crate::site::{Morphism, ObjId};

/// Closed expression language for operations. Every constructor acts
/// pointwise, so every expression is natural for precomposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpExpr {
    Zero,
    Ident,
    Poly(Polynomial),
    /// A carrier map on a table ring, given by element indices.
    PointwiseTable { table: Vec<u32>, zero_zero: bool },
    /// `outer ∘ inner`.
    Compose(Arc<OpExpr>, Arc<OpExpr>),
}

impl OpExpr {
    pub fn poly(coeffs: Vec<u64>) -> Self {
        OpExpr::Poly(Polynomial::new(coeffs))
    }

    /// Builds a table operation on `ring`, recording whether it fixes zero.
    pub fn table(ring: &TableCoh, table: Vec<u32>) -> Result<Self> {
        if table.len() != ring.len() || table.iter().any(|&t| t as usize >= ring.len()) {
            return Err(Error::Config(format!(
                "operation table must map each of the {} ring elements into the ring",
                ring.len()
            )));
        }
        let zero = ring.zero() as usize;
        let zero_zero = table[zero] as usize == zero;
        Ok(OpExpr::PointwiseTable { table, zero_zero })
    }

    pub fn compose(outer: OpExpr, inner: OpExpr) -> Self {
        OpExpr::Compose(Arc::new(outer), Arc::new(inner))
    }

    /// Whether every component sends the zero value to zero.
    pub fn zero_zero(&self) -> bool {
        match self {
            OpExpr::Zero | OpExpr::Ident => true,
            OpExpr::Poly(p) => p.constant_term() == 0,
            OpExpr::PointwiseTable { zero_zero, .. } => *zero_zero,
            OpExpr::Compose(a, b) => a.zero_zero() && b.zero_zero(),
        }
    }

    pub(crate) fn eval_elem<R: Rig>(&self, rig: &R, e: &R::Elem) -> Result<R::Elem> {
        Ok(match self {
            OpExpr::Zero => rig.zero(),
            OpExpr::Ident => e.clone(),
            OpExpr::Poly(p) => p.eval_in(rig, e),
            OpExpr::PointwiseTable { table, .. } => {
                let i = rig
                    .table_index(e)
                    .ok_or_else(|| Error::Type(format!("table operation on {}", rig.describe())))?;
                let j = *table
                    .get(i)
                    .ok_or_else(|| Error::Type("table operation on a smaller ring".into()))?;
                rig.table_elem(j as usize)
                    .ok_or_else(|| Error::Type("table operation on a smaller ring".into()))?
            }
            OpExpr::Compose(outer, inner) => outer.eval_elem(rig, &inner.eval_elem(rig, e)?)?,
        })
    }

    /// `θ_X(v)`.
    pub fn apply<R: Rig>(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        if let OpExpr::PointwiseTable { table, .. } = self {
            if fun.rig.table_size() != Some(table.len()) {
                return Err(Error::Type(format!(
                    "table operation over {} elements applied to {}",
                    table.len(),
                    fun.rig.describe()
                )));
            }
        }
        let entries = v
            .entries
            .iter()
            .map(|e| self.eval_elem(&fun.rig, e))
            .collect::<Result<_>>()?;
        Ok(Value::new(v.object, entries))
    }
}

impl fmt::Display for OpExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpExpr::Zero => f.write_str("zero"),
            OpExpr::Ident => f.write_str("ident"),
            OpExpr::Poly(p) => write!(f, "poly({p})"),
            OpExpr::PointwiseTable { table, .. } => {
                let t: Vec<String> = table.iter().enumerate().map(|(i, j)| format!("{i}->{j}")).collect();
                write!(f, "table{{{}}}", t.join(","))
            }
            OpExpr::Compose(a, b) => write!(f, "compose({a},{b})"),
        }
    }
}

/// `θ_X(v)` as a free function.
pub fn apply_op<R: Rig>(op: &OpExpr, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
    op.apply(fun, v)
}

/// A family of self-maps `F(X) -> F(X)`; used to run the naturality checker
/// against families outside the expression language.
pub trait SelfFamily<R: Rig> {
    fn label(&self) -> String;
    fn component(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>>;
}

impl<R: Rig> SelfFamily<R> for OpExpr {
    fn label(&self) -> String {
        self.to_string()
    }
    fn component(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.apply(fun, v)
    }
}

/// `v ↦ (Σ v, ..., Σ v)`: reads every point of the object, so it is not
/// natural for maps that are not bijections.
#[derive(Debug, Clone, Copy, Default)]
pub struct FiberSum;

impl<R: Rig> SelfFamily<R> for FiberSum {
    fn label(&self) -> String {
        "fiber-sum".into()
    }
    fn component(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        let total = v.entries.iter().fold(fun.rig.zero(), |acc, e| fun.rig.add(&acc, e));
        Ok(Value::new(v.object, vec![total; v.entries.len()]))
    }
}

/// `f*(θ(u)) = θ(f*(u))` for every base morphism `f` and probe `u` on its target.
pub fn check_naturality<R: Rig, T: SelfFamily<R> + ?Sized>(
    op: &T,
    fun: &FunctorInstance<R>,
    probes: &ProbeSet<R>,
) -> CheckReport {
    let site = &fun.site;
    let mut report = CheckReport::new(
        format!("naturality[{}]", op.label()),
        format!("{}; {}", fun.describe(), probes.describe()),
    );
    for f in site.base_morphisms() {
        for u in probes.on(fun, f.dst).iter() {
            report.tick();
            let lhs = op.component(fun, u).and_then(|t| fun.pullback(f, &t));
            let rhs = fun.pullback(f, u).and_then(|p| op.component(fun, &p));
            match (lhs, rhs) {
                (Ok(l), Ok(r)) if l == r => {}
                (Ok(l), Ok(r)) => report.fail(
                    Counterexample::new(fun.render(u), fun.render(&l), fun.render(&r))
                        .bind("f", site.render_morphism(f)),
                ),
                (Err(e), _) | (_, Err(e)) => report.error(&site.render_morphism(f), &e),
            }
        }
    }
    report.finish()
}

/// Checks `θ(v + w) = θ(v) + θ(w)` on every declared object. Operations are
/// bare maps in general; this audit is informational.
pub fn check_additivity<R: Rig>(op: &OpExpr, fun: &FunctorInstance<R>, probes: &ProbeSet<R>) -> CheckReport {
    let mut report = CheckReport::new(
        format!("additivity[{op}]"),
        format!("{}; {}", fun.describe(), probes.describe()),
    );
    for &x in fun.site.base_objects() {
        let vals = probes.on(fun, x);
        for v in vals.iter() {
            for w in vals.iter() {
                report.tick();
                let lhs = fun.add(v, w).and_then(|s| op.apply(fun, &s));
                let rhs = op
                    .apply(fun, v)
                    .and_then(|a| fun.add(&a, &op.apply(fun, w)?));
                match (lhs, rhs) {
                    (Ok(l), Ok(r)) if l == r => {}
                    (Ok(l), Ok(r)) => report.fail(Counterexample::new(
                        format!("{} ; {}", fun.render(v), fun.render(w)),
                        fun.render(&l),
                        fun.render(&r),
                    )),
                    (Err(e), _) | (_, Err(e)) => report.error("additivity", &e),
                }
            }
        }
    }
    report.finish()
}

/// `θ_f := s* ∘ θ_X : F(X) -> F(Y)` for a sectional `f: X -> Y` with section `s`.
#[derive(Debug, Clone)]
pub struct GeneralizedOp {
    pub f: Arc<Morphism>,
    pub section: Arc<Morphism>,
    pub body: Arc<OpExpr>,
}

impl GeneralizedOp {
    pub fn apply<R: Rig>(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        fun.pullback(&self.section, &self.body.apply(fun, v)?)
    }
}

/// Refuses anything but a genuine section: there is no generalized operation
/// for maps without one.
pub fn derive_generalized<R: Rig>(
    fun: &FunctorInstance<R>,
    op: Arc<OpExpr>,
    f: &Arc<Morphism>,
    s: &Arc<Morphism>,
) -> Result<GeneralizedOp> {
    fun.site.require_section(f, s)?;
    Ok(GeneralizedOp {
        f: f.clone(),
        section: s.clone(),
        body: op,
    })
}

/// Base-change compatibility of a generalized operation: for every `g` into
/// `Y`, `g* ∘ θ_f = θ_{f'} ∘ g'*` with `θ_{f'}` built from the pulled-back
/// section.
pub fn check_generalized_naturality<R: Rig>(
    op: &GeneralizedOp,
    fun: &FunctorInstance<R>,
    probes: &ProbeSet<R>,
) -> CheckReport {
    check_generalized_naturality_with(op, fun, probes, |g| {
        fun.site.pullback_section(&op.f, g, &op.section)
    })
}

/// As [`check_generalized_naturality`], with the section used over each `Y'`
/// supplied by `section_over`.
pub fn check_generalized_naturality_with<R: Rig>(
    op: &GeneralizedOp,
    fun: &FunctorInstance<R>,
    probes: &ProbeSet<R>,
    section_over: impl Fn(&Morphism) -> Result<Arc<Morphism>>,
) -> CheckReport {
    let site = &fun.site;
    let mut report = CheckReport::new(
        format!(
            "generalized-naturality[{} along {}]",
            op.body,
            site.render_morphism(&op.f)
        ),
        format!("{}; {}", fun.describe(), probes.describe()),
    );
    let into = match site.morphisms_into(op.f.dst) {
        Ok(v) => v,
        Err(e) => {
            report.error("universe", &e);
            return report.finish();
        }
    };
    for g in into.iter() {
        let prepared = site
            .fiber_product(&op.f, g)
            .and_then(|sq| Ok((sq, section_over(g)?)));
        let (sq, sp) = match prepared {
            Ok(x) => x,
            Err(e) => {
                report.error(&site.render_morphism(g), &e);
                continue;
            }
        };
        let pulled = GeneralizedOp {
            f: sq.left.clone(),
            section: sp.clone(),
            body: op.body.clone(),
        };
        for v in probes.on(fun, op.f.src).iter() {
            report.tick();
            let lhs = op.apply(fun, v).and_then(|t| fun.pullback(g, &t));
            let rhs = fun.pullback(&sq.top, v).and_then(|p| pulled.apply(fun, &p));
            match (lhs, rhs) {
                (Ok(l), Ok(r)) if l == r => {}
                (Ok(l), Ok(r)) => report.fail(
                    Counterexample::new(fun.render(v), fun.render(&l), fun.render(&r))
                        .bind("f", site.render_morphism(&op.f))
                        .bind("s", site.render_morphism(&op.section))
                        .bind("g", site.render_morphism(g))
                        .bind("s'", site.render_morphism(&sp)),
                ),
                (Err(e), _) | (_, Err(e)) => report.error(&site.render_morphism(g), &e),
            }
        }
    }
    report.finish()
}

/// `P(v) = θ(π*(v))` for the second projection `π: B × X -> X`.
#[derive(Debug, Clone)]
pub struct QuillenP {
    pub op: Arc<OpExpr>,
    pub projection: Arc<Morphism>,
    pub product: ObjId,
}

impl QuillenP {
    pub fn apply<R: Rig>(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.op.apply(fun, &fun.pullback(&self.projection, v)?)
    }

    /// The exchanged form `π*(θ(v))`.
    pub fn apply_exchanged<R: Rig>(&self, fun: &FunctorInstance<R>, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        fun.pullback(&self.projection, &self.op.apply(fun, v)?)
    }
}

/// The product `B × X` as the fiber product over the terminal object, with
/// elements `(b, x)`, and its second projection.
pub fn product_projection<R: Rig>(
    fun: &FunctorInstance<R>,
    b: ObjId,
    x: ObjId,
) -> Result<(ObjId, Arc<Morphism>)> {
    let site = &fun.site;
    let sq = site.fiber_product(&site.to_terminal(x), &site.to_terminal(b))?;
    Ok((sq.apex, sq.top))
}

pub fn quillen_p<R: Rig>(fun: &FunctorInstance<R>, op: Arc<OpExpr>, b: ObjId, x: ObjId) -> Result<QuillenP> {
    let (product, projection) = product_projection(fun, b, x)?;
    Ok(QuillenP {
        op,
        projection,
        product,
    })
}

/// `S(w) = θ(s*(w))` for a section `s: X -> B × X` of the projection.
#[derive(Debug, Clone)]
pub struct QuillenS {
    pub op: Arc<OpExpr>,
    pub section: Arc<Morphism>,
    pub projection: Arc<Morphism>,
}

impl QuillenS {
    pub fn apply<R: Rig>(&self, fun: &FunctorInstance<R>, w: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.op.apply(fun, &fun.pullback(&self.section, w)?)
    }

    /// The exchanged form `s*(θ(w))`.
    pub fn apply_exchanged<R: Rig>(&self, fun: &FunctorInstance<R>, w: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        fun.pullback(&self.section, &self.op.apply(fun, w)?)
    }

    /// `S` viewed as a generalized operation for the projection.
    pub fn as_generalized(&self) -> GeneralizedOp {
        GeneralizedOp {
            f: self.projection.clone(),
            section: self.section.clone(),
            body: self.op.clone(),
        }
    }
}

pub fn quillen_s<R: Rig>(fun: &FunctorInstance<R>, op: Arc<OpExpr>, s: &Arc<Morphism>) -> Result<QuillenS> {
    let site = &fun.site;
    let prod = site.object(s.dst);
    let info = prod
        .apex
        .as_ref()
        .ok_or_else(|| Error::Site(format!("{} is not a product B x X", prod.name)))?;
    let (product, projection) = product_projection(fun, info.left, s.src)?;
    if product != s.dst {
        return Err(Error::Site(format!("{} is not the product B x X", prod.name)));
    }
    site.require_section(&projection, s)?;
    Ok(QuillenS {
        op,
        section: s.clone(),
        projection,
    })
}

/// The section `x ↦ (b, x)` of `π: B × X -> X`.
pub fn constant_section<R: Rig>(fun: &FunctorInstance<R>, b: ObjId, b_index: u32, x: ObjId) -> Result<Arc<Morphism>> {
    let site = &fun.site;
    let (product, _) = product_projection(fun, b, x)?;
    let n = site.object(x).len() as u32;
    let map = (0..n)
        .map(|i| {
            site.apex_position(product, b_index, i)
                .ok_or_else(|| Error::Site("point outside B".into()))
        })
        .collect::<Result<_>>()?;
    site.intern_morphism(x, product, map)
}

/// Exchange laws for `P` and `S`, and base-change naturality of `S` for the
/// projection, exhaustively on probes.
pub fn check_quillen<R: Rig>(
    fun: &FunctorInstance<R>,
    op: Arc<OpExpr>,
    b: ObjId,
    x: ObjId,
    probes: &ProbeSet<R>,
) -> Result<CheckReport> {
    let site = &fun.site;
    let p = quillen_p(fun, op.clone(), b, x)?;
    let mut report = CheckReport::new(
        format!("quillen[{op}]"),
        format!("{}; {}", fun.describe(), probes.describe()),
    );

    let mut exchange_p = CheckReport::new("P = θ∘π* = π*∘θ", "");
    for v in probes.on(fun, x).iter() {
        exchange_p.tick();
        let l = p.apply(fun, v)?;
        let r = p.apply_exchanged(fun, v)?;
        if l != r {
            exchange_p.fail(Counterexample::new(fun.render(v), fun.render(&l), fun.render(&r)));
        }
    }
    report.absorb(exchange_p.finish());

    let b_len = site.object(b).len() as u32;
    for bi in 0..b_len {
        let s = constant_section(fun, b, bi, x)?;
        let sop = quillen_s(fun, op.clone(), &s)?;
        let mut exchange_s = CheckReport::new(format!("S = θ∘s* = s*∘θ [s = {}]", site.render_morphism(&s)), "");
        for w in probes.on(fun, p.product).iter() {
            exchange_s.tick();
            let l = sop.apply(fun, w)?;
            let r = sop.apply_exchanged(fun, w)?;
            if l != r {
                exchange_s.fail(Counterexample::new(fun.render(w), fun.render(&l), fun.render(&r)));
            }
        }
        // s* ∘ π* = id, so S(π*v) = θ(v)
        for v in probes.on(fun, x).iter() {
            exchange_s.tick();
            let l = sop.apply(fun, &fun.pullback(&p.projection, v)?)?;
            let r = op.apply(fun, v)?;
            if l != r {
                exchange_s.fail(
                    Counterexample::new(fun.render(v), fun.render(&l), fun.render(&r)).bind("law", "S(π*v) = θ(v)"),
                );
            }
        }
        report.absorb(exchange_s.finish());
        report.absorb(check_generalized_naturality(&sop.as_generalized(), fun, probes));
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functor::{ProbePolicy, RankVect};
    use crate::site::{Site, SiteBuilder};

    fn setup() -> (Arc<Site>, FunctorInstance<RankVect>, ProbeSet<RankVect>) {
        let site = SiteBuilder::new()
            .object("X", ["a", "b"])
            .object("B", ["b1", "b2"])
            .build()
            .unwrap();
        let fun = FunctorInstance::new(RankVect, site.clone());
        (site, fun, ProbeSet::new(ProbePolicy::default()))
    }

    #[test]
    fn apply_examples() {
        let (site, fun, _) = setup();
        let x = site.object_id("X").unwrap();
        let v = fun.value(x, vec![2, 3]).unwrap();
        assert_eq!(OpExpr::Ident.apply(&fun, &v).unwrap(), v);
        assert_eq!(OpExpr::poly(vec![0, 0, 1]).apply(&fun, &v).unwrap().entries, vec![4, 9]);
        assert_eq!(OpExpr::Zero.apply(&fun, &v).unwrap(), fun.zero(x));
        let table = OpExpr::PointwiseTable { table: vec![0, 1], zero_zero: true };
        assert!(matches!(table.apply(&fun, &v), Err(Error::Type(_))));
    }

    #[test]
    fn zero_zero_flags() {
        assert!(OpExpr::poly(vec![0, 2]).zero_zero());
        assert!(!OpExpr::poly(vec![1, 1]).zero_zero());
        let ring = TableCoh::zmod(4).unwrap();
        assert!(OpExpr::table(&ring, vec![0, 3, 2, 1]).unwrap().zero_zero());
        assert!(!OpExpr::table(&ring, vec![1, 1, 1, 1]).unwrap().zero_zero());
        assert!(!OpExpr::compose(OpExpr::Ident, OpExpr::poly(vec![1])).zero_zero());
    }

    #[test]
    fn polynomial_ops_are_natural() {
        let (_, fun, probes) = setup();
        let r = check_naturality(&OpExpr::poly(vec![0, 2, 1]), &fun, &probes);
        assert!(r.passed, "{r}");
        assert!(r.instances > 0);
    }

    #[test]
    fn generalized_example() {
        let (site, fun, probes) = setup();
        let x = site.object_id("X").unwrap();
        let ax = site.to_terminal(x);
        let sa = site.point(x, 0).unwrap();
        let op = derive_generalized(&fun, Arc::new(OpExpr::poly(vec![0, 0, 1])), &ax, &sa).unwrap();
        let v = fun.value(x, vec![1, 2]).unwrap();
        assert_eq!(op.apply(&fun, &v).unwrap().entries, vec![1]);
        assert!(check_generalized_naturality(&op, &fun, &probes).passed);
        assert!(derive_generalized(&fun, Arc::new(OpExpr::Ident), &ax, &ax).is_err());
    }

    #[test]
    fn quillen_examples() {
        let (site, fun, probes) = setup();
        let b = site.object_id("B").unwrap();
        let pt = site.terminal();
        let p = quillen_p(&fun, Arc::new(OpExpr::poly(vec![0, 0, 0, 1])), b, pt).unwrap();
        let v = fun.value(pt, vec![3]).unwrap();
        assert_eq!(p.apply(&fun, &v).unwrap().entries, vec![27, 27]);

        let s = constant_section(&fun, b, 0, pt).unwrap();
        let sq = quillen_s(&fun, Arc::new(OpExpr::poly(vec![0, 0, 1])), &s).unwrap();
        let w = fun.value(p.product, vec![2, 5]).unwrap();
        assert_eq!(sq.apply(&fun, &w).unwrap().entries, vec![4]);

        let x = site.object_id("X").unwrap();
        let r = check_quillen(&fun, Arc::new(OpExpr::poly(vec![0, 0, 1])), b, x, &probes).unwrap();
        assert!(r.passed, "{r}");
    }
}
