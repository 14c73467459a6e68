//! Resolution of a parsed scenario into a site, a functor, probes and named
//! operations, elements, families, transformations and checks.
//!
//! Every error carries the position of the offending term.

use std::collections::BTreeMap;
use std::sync::Arc;

use bivariant_core::bivariant::{Bivariant, ElementOf};
use bivariant_core::derived::{all_values, delta, delta_cap, phi_sum, phi_tensor, PhiKind};
use bivariant_core::functor::{
    FunctorInstance, MonoidVect, Polynomial, ProbeKind, ProbePolicy, ProbeSet, RankVect, Rig, TableCoh, Value,
};
use bivariant_core::operations::OpExpr;
use bivariant_core::site::{Morphism, ObjId, Site, SiteBuilder, SiteMode};
use bivariant_core::transform::OpCorrespondence;

use crate::syntax::{Arg, Decl, Diagnostic, Diagnostics, Entry, Pos, Scenario, Term, TermKind};

type D<T> = Result<T, Diagnostic>;

fn err<T>(pos: Pos, msg: impl Into<String>) -> D<T> {
    Err(Diagnostic::new(pos, msg))
}

fn core_err(pos: Pos) -> impl Fn(bivariant_core::Error) -> Diagnostic {
    move |e| Diagnostic::new(pos, e.to_string())
}

/// Positional and keyed arguments of a call.
struct Args<'a> {
    head: &'a str,
    pos: Pos,
    positional: Vec<&'a Term>,
    keyed: Vec<(&'a str, &'a Term)>,
}

impl<'a> Args<'a> {
    fn of(t: &'a Term) -> Self {
        let (head, args): (&str, &[Arg]) = match &t.kind {
            TermKind::Call(h, a) => (h, a),
            TermKind::Ident(h) => (h, &[]),
            _ => ("", &[]),
        };
        let mut positional = Vec::new();
        let mut keyed = Vec::new();
        for a in args {
            match &a.key {
                Some(k) => keyed.push((k.as_str(), &a.value)),
                None => positional.push(&a.value),
            }
        }
        Args {
            head,
            pos: t.pos,
            positional,
            keyed,
        }
    }

    fn get(&self, idx: usize, key: &str) -> Option<&'a Term> {
        self.keyed
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .or_else(|| self.positional.get(idx).copied())
    }

    fn need(&self, idx: usize, key: &str) -> D<&'a Term> {
        self.get(idx, key)
            .ok_or_else(|| Diagnostic::new(self.pos, format!("`{}` needs argument `{key}`", self.head)))
    }

    /// Rejects surplus positional arguments and unknown keys.
    fn only(&self, keys: &[&str]) -> D<()> {
        if self.positional.len() > keys.len() {
            return err(
                self.positional[keys.len()].pos,
                format!("`{}` takes at most {} arguments", self.head, keys.len()),
            );
        }
        for (k, v) in &self.keyed {
            if !keys.contains(k) {
                return err(v.pos, format!("`{}` has no argument `{k}`", self.head));
            }
        }
        Ok(())
    }
}

fn int(t: &Term, what: &str) -> D<i64> {
    match t.kind {
        TermKind::Int(n) => Ok(n),
        _ => err(t.pos, format!("expected an integer for {what}, found `{t}`")),
    }
}

fn nat(t: &Term, what: &str) -> D<u64> {
    let n = int(t, what)?;
    u64::try_from(n).or_else(|_| err(t.pos, format!("{what} must not be negative")))
}

fn ident<'a>(t: &'a Term, what: &str) -> D<&'a str> {
    t.ident()
        .ok_or_else(|| Diagnostic::new(t.pos, format!("expected {what}, found `{t}`")))
}

fn list<'a>(t: &'a Term, what: &str) -> D<&'a [Term]> {
    match &t.kind {
        TermKind::List(items) => Ok(items),
        _ => err(t.pos, format!("expected a list for {what}, found `{t}`")),
    }
}

/// Entries of `name { k = v, ... }` (or a bare brace), as a key map.
fn brace_fields<'a>(t: &'a Term, allowed: &[&str], what: &str) -> D<BTreeMap<&'a str, &'a Term>> {
    let body = match &t.kind {
        TermKind::Tagged(_, b) => b.as_ref(),
        TermKind::Brace(_) => t,
        TermKind::Ident(_) => return Ok(BTreeMap::new()),
        _ => return err(t.pos, format!("expected {what}")),
    };
    let TermKind::Brace(entries) = &body.kind else {
        return err(body.pos, format!("expected `{{ ... }}` for {what}"));
    };
    let mut out = BTreeMap::new();
    for e in entries {
        match e {
            Entry::Assign(k, v, p) => {
                if !allowed.contains(&k.as_str()) {
                    return err(*p, format!("unknown key `{k}` in {what}; expected one of {}", allowed.join(", ")));
                }
                if out.insert(k.as_str(), v).is_some() {
                    return err(*p, format!("key `{k}` given twice"));
                }
            }
            Entry::Bare(t) | Entry::Map(t, _) => return err(t.pos, format!("expected `key = value` in {what}")),
        }
    }
    Ok(out)
}

/// Label text of an element-list entry.
fn label_of(t: &Term) -> D<String> {
    match &t.kind {
        TermKind::Ident(s) => Ok(s.clone()),
        TermKind::Int(n) => Ok(n.to_string()),
        _ => err(t.pos, format!("expected an element label, found `{t}`")),
    }
}

fn label_list(t: &Term, what: &str) -> D<Vec<String>> {
    list(t, what)?.iter().map(label_of).collect()
}

/// Square table given either as rows or as one flat list.
fn label_table(t: &Term, n: usize, what: &str) -> D<Vec<Vec<String>>> {
    let items = list(t, what)?;
    if items.iter().all(|i| matches!(i.kind, TermKind::List(_))) {
        let rows: Vec<Vec<String>> = items.iter().map(|r| label_list(r, what)).collect::<D<_>>()?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return err(t.pos, format!("{what} must be {n}x{n}"));
        }
        Ok(rows)
    } else {
        let flat: Vec<String> = items.iter().map(label_of).collect::<D<_>>()?;
        if flat.len() != n * n {
            return err(t.pos, format!("{what} must list {} entries, found {}", n * n, flat.len()));
        }
        Ok(flat.chunks(n).map(|c| c.to_vec()).collect())
    }
}

fn index_table(t: &Term, labels: &[String], what: &str) -> D<Vec<Vec<u32>>> {
    let rows = label_table(t, labels.len(), what)?;
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|l| {
                    labels
                        .iter()
                        .position(|x| x == l)
                        .map(|i| i as u32)
                        .ok_or_else(|| Diagnostic::new(t.pos, format!("{what} mentions unknown element `{l}`")))
                })
                .collect()
        })
        .collect()
}

/// `zmod(N)`.
pub fn ring(t: &Term) -> D<TableCoh> {
    match &t.kind {
        TermKind::Call(h, args) if h == "zmod" && args.len() == 1 => {
            let n = nat(&args[0].value, "the modulus")?;
            if !(2..=256).contains(&n) {
                return err(t.pos, "modulus must lie between 2 and 256");
            }
            TableCoh::zmod(n as u32).map_err(core_err(t.pos))
        }
        _ => err(t.pos, format!("expected a ring `zmod(N)`, found `{t}`")),
    }
}

/// A rig that can be named in a scenario.
pub trait LabRig: Rig + Clone + Sized + 'static {
    /// One entry of a value literal.
    fn entry(&self, t: &Term) -> D<Self::Elem>;

    /// Element index for a label in a table operation.
    fn label_index(&self, label: &str) -> Option<u32> {
        label.parse().ok()
    }

    /// Carriers used for Φ families and injectivity universes.
    fn bundle_carriers(&self, max: u64) -> Vec<Self::Elem> {
        self.carriers(&ProbePolicy {
            bound: max,
            coeff: max,
            ..ProbePolicy::default()
        })
    }
}

impl LabRig for RankVect {
    fn entry(&self, t: &Term) -> D<u64> {
        nat(t, "a rank")
    }
}

impl LabRig for TableCoh {
    fn entry(&self, t: &Term) -> D<u32> {
        let l = label_of(t)?;
        self.element(&l)
            .ok_or_else(|| Diagnostic::new(t.pos, format!("`{l}` is not an element of {}", self.describe())))
    }

    fn label_index(&self, label: &str) -> Option<u32> {
        self.element(label)
    }

    fn bundle_carriers(&self, max: u64) -> Vec<u32> {
        (0..self.len().min(max as usize + 1) as u32).collect()
    }
}

impl LabRig for MonoidVect {
    fn entry(&self, t: &Term) -> D<Vec<u64>> {
        let basis = |l: &str, pos: Pos| {
            self.element(l)
                .map(|m| self.delta(m))
                .ok_or_else(|| Diagnostic::new(pos, format!("`{l}` is not an element of the monoid")))
        };
        let scale = |v: Vec<u64>, n: i64, pos: Pos| -> D<Vec<u64>> {
            let n = u64::try_from(n).or_else(|_| err(pos, "coefficients must not be negative"))?;
            Ok(v.into_iter().map(|c| c * n).collect())
        };
        match &t.kind {
            TermKind::Int(n) => scale(self.one(), *n, t.pos),
            TermKind::Ident(l) => basis(l, t.pos),
            TermKind::Scaled(n, l) => scale(basis(l, t.pos)?, *n, t.pos),
            TermKind::Sum(parts) => {
                let mut acc = self.zero();
                for p in parts {
                    acc = self.add(&acc, &self.entry(p)?);
                }
                Ok(acc)
            }
            _ => err(t.pos, format!("expected a monoid combination such as `2e + g`, found `{t}`")),
        }
    }

    fn label_index(&self, _label: &str) -> Option<u32> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum TransformKind {
    Rank(TableCoh),
    Exp(TableCoh, u32),
    Augmentation,
}

#[derive(Debug, Clone)]
pub struct TransformDef {
    pub name: String,
    pub kind: TransformKind,
}

#[derive(Debug, Clone)]
pub struct Named<T> {
    pub name: String,
    pub value: T,
}

pub type ElementSet<R> = Named<Vec<Arc<ElementOf<R>>>>;

#[derive(Clone)]
pub enum NatTarget {
    Op(Named<Arc<OpExpr>>),
    FiberSum,
    AllTables,
}

/// A validated check.
#[derive(Clone)]
pub enum CheckSpec<R: LabRig> {
    FunctorLaws,
    RigLaws,
    Naturality(NatTarget),
    Compatibility(ElementSet<R>),
    Axioms(ElementSet<R>),
    Equal(Arc<ElementOf<R>>, Arc<ElementOf<R>>),
    DeltaClosure(ElementSet<R>),
    PushforwardIdentity(Vec<Arc<OpExpr>>),
    DeltaCapClosure(Arc<ElementOf<R>>, Arc<ElementOf<R>>),
    NotInduced(Arc<ElementOf<R>>),
    Injectivity(PhiKind, ObjId, u64),
    TransformNaturality(TransformDef),
    Additive(TransformDef),
    Multiplicative(TransformDef),
    Exponential(TransformDef),
    Polynomial(TransformDef, Polynomial),
    Cubic(TransformDef, Named<OpCorrespondence>),
    Grothendieck(TransformDef, Named<OpCorrespondence>, ElementSet<R>),
    Quillen(Arc<OpExpr>, ObjId, ObjId),
    Finiteness(Value<R::Elem>, Option<u64>),
    ExpectFail(Box<CheckSpec<R>>),
}

#[derive(Clone)]
pub struct CheckEntry<R: LabRig> {
    /// Canonical text of the check as written.
    pub text: String,
    pub spec: CheckSpec<R>,
}

/// A resolved scenario over the rig `R`.
pub struct World<R: LabRig> {
    pub th: Bivariant<R>,
    pub probes: ProbeSet<R>,
    pub ops: BTreeMap<String, Arc<OpExpr>>,
    pub elements: BTreeMap<String, Arc<ElementOf<R>>>,
    pub families: BTreeMap<String, Vec<Arc<ElementOf<R>>>>,
    pub transforms: BTreeMap<String, TransformDef>,
    pub correspondences: BTreeMap<String, OpCorrespondence>,
    pub checks: Vec<CheckEntry<R>>,
}

/// A world over whichever functor the scenario declares.
pub enum AnyWorld {
    Rank(World<RankVect>),
    Monoid(World<MonoidVect>),
    Table(World<TableCoh>),
}

impl std::fmt::Debug for AnyWorld {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AnyWorld({} checks)", self.check_count())
    }
}

impl AnyWorld {
    pub fn site(&self) -> &Arc<Site> {
        match self {
            AnyWorld::Rank(w) => w.th.site(),
            AnyWorld::Monoid(w) => w.th.site(),
            AnyWorld::Table(w) => w.th.site(),
        }
    }

    pub fn check_count(&self) -> usize {
        match self {
            AnyWorld::Rank(w) => w.checks.len(),
            AnyWorld::Monoid(w) => w.checks.len(),
            AnyWorld::Table(w) => w.checks.len(),
        }
    }
}

fn build_site(sc: &Scenario) -> D<Arc<Site>> {
    let decl = &sc.site;
    let mut objects: BTreeMap<&str, &Vec<String>> = BTreeMap::new();
    let mut b = SiteBuilder::new();
    for o in &decl.objects {
        if objects.insert(o.name.text.as_str(), &o.elements).is_some() {
            return err(o.name.pos, format!("object `{}` declared twice", o.name.text));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &o.elements {
            if !seen.insert(e) {
                return err(o.name.pos, format!("object `{}` repeats element `{e}`", o.name.text));
            }
        }
        if o.name.text == "pt" && o.elements.len() != 1 {
            return err(o.name.pos, "`pt` is the terminal object and must have exactly one element");
        }
        b = b.object(&o.name.text, o.elements.clone());
    }
    let star = vec!["*".to_string()];
    let lookup = |n: &crate::syntax::Name| -> D<&Vec<String>> {
        if n.text == "pt" && !objects.contains_key("pt") {
            return Ok(&star);
        }
        objects
            .get(n.text.as_str())
            .copied()
            .ok_or_else(|| Diagnostic::new(n.pos, format!("unknown object `{}`", n.text)))
    };
    let mut names = std::collections::BTreeSet::new();
    for m in &decl.morphisms {
        if !names.insert(m.name.text.as_str()) {
            return err(m.name.pos, format!("morphism `{}` declared twice", m.name.text));
        }
        let src = lookup(&m.src)?;
        let dst = lookup(&m.dst)?;
        if m.images.len() != src.len() {
            return err(
                m.name.pos,
                format!(
                    "`{}` lists {} images but `{}` has {} elements",
                    m.name.text,
                    m.images.len(),
                    m.src.text,
                    src.len()
                ),
            );
        }
        for img in &m.images {
            if !dst.contains(&img.text) {
                return err(img.pos, format!("`{}` is not an element of `{}`", img.text, m.dst.text));
            }
        }
        b = b.morphism(
            &m.name.text,
            &m.src.text,
            &m.dst.text,
            m.images.iter().map(|n| n.text.clone()),
        );
    }
    if let Some(mode) = &decl.mode {
        b = b.mode(match mode.text.as_str() {
            "full" => SiteMode::Full,
            "generated" => SiteMode::Generated,
            other => return err(mode.pos, format!("unknown mode `{other}`; expected `full` or `generated`")),
        });
    }
    if let Some((d, pos)) = decl.closure_depth {
        if !(0..=8).contains(&d) {
            return err(pos, "closure_depth must lie between 0 and 8");
        }
        b = b.closure_depth(d as u32);
    }
    b.build().map_err(core_err(decl.pos))
}

fn probe_policy(sc: &Scenario, default_bound: Option<u64>, seed: Option<u64>) -> D<ProbePolicy> {
    let mut p = ProbePolicy::default();
    if let Some(b) = default_bound {
        p.bound = b;
    }
    if let Some(t) = &sc.probes {
        let f = brace_fields(t, &["policy", "bound", "coeff", "support", "samples", "seed", "cap"], "the probe block")?;
        if let Some(v) = f.get("policy") {
            p.kind = match ident(v, "`exhaustive` or `random`")? {
                "exhaustive" => ProbeKind::Exhaustive,
                "random" => ProbeKind::Random,
                other => return err(v.pos, format!("unknown probe policy `{other}`")),
            };
        }
        if let Some(v) = f.get("bound") {
            p.bound = nat(v, "bound")?;
        }
        if let Some(v) = f.get("coeff") {
            p.coeff = nat(v, "coeff")?;
        }
        if let Some(v) = f.get("support") {
            p.support = nat(v, "support")?;
        }
        if let Some(v) = f.get("samples") {
            p.samples = nat(v, "samples")? as usize;
        }
        if let Some(v) = f.get("seed") {
            p.seed = nat(v, "seed")?;
        }
        if let Some(v) = f.get("cap") {
            p.cap = nat(v, "cap")? as usize;
        }
    }
    if p.bound > 64 {
        return err(sc.probes.as_ref().map(|t| t.pos).unwrap_or_default(), "probe bound must be at most 64");
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    Ok(p)
}

/// Resolves and validates a scenario. `seed` overrides the probe seed.
pub fn compile(sc: &Scenario, seed: Option<u64>) -> Result<AnyWorld, Diagnostics> {
    let site = build_site(sc)?;
    let functor = sc
        .functor
        .as_ref()
        .ok_or_else(|| Diagnostic::new(Pos { line: 1, col: 1 }, "missing `functor = ...` line"))?;
    match functor.head() {
        Some("rankvect") => {
            let f = brace_fields(functor, &["max_rank"], "rankvect")?;
            let bound = f.get("max_rank").map(|t| nat(t, "max_rank")).transpose()?;
            let policy = probe_policy(sc, bound, seed)?;
            Ok(AnyWorld::Rank(World::build(sc, RankVect, site, policy)?))
        }
        Some("monoidvect") => {
            let f = brace_fields(functor, &["elements", "table"], "monoidvect")?;
            let need = |k: &str| {
                f.get(k)
                    .copied()
                    .ok_or_else(|| Diagnostic::new(functor.pos, format!("monoidvect needs `{k}`")))
            };
            let labels = label_list(need("elements")?, "monoid elements")?;
            let table = index_table(need("table")?, &labels, "the monoid table")?;
            let m = MonoidVect::new(labels, table).map_err(core_err(functor.pos))?;
            let policy = probe_policy(sc, None, seed)?;
            Ok(AnyWorld::Monoid(World::build(sc, m, site, policy)?))
        }
        Some("tablecoh") => {
            let f = brace_fields(functor, &["elements", "add", "mul", "deg", "ring"], "tablecoh")?;
            let ring = if let Some(r) = f.get("ring") {
                ring(r)?
            } else {
                let need = |k: &str| {
                    f.get(k)
                        .copied()
                        .ok_or_else(|| Diagnostic::new(functor.pos, format!("tablecoh needs `{k}` or `ring`")))
                };
                let labels = label_list(need("elements")?, "ring elements")?;
                let add = index_table(need("add")?, &labels, "the addition table")?;
                let mul = index_table(need("mul")?, &labels, "the multiplication table")?;
                let deg = f
                    .get("deg")
                    .map(|t| {
                        let ds: Vec<i32> = list(t, "degrees")?
                            .iter()
                            .map(|d| int(d, "a degree").map(|v| v as i32))
                            .collect::<D<_>>()?;
                        if ds.len() != labels.len() {
                            return err(t.pos, "one degree per ring element");
                        }
                        Ok(ds)
                    })
                    .transpose()?;
                TableCoh::new(labels, add, mul, deg).map_err(core_err(functor.pos))?
            };
            let policy = probe_policy(sc, None, seed)?;
            Ok(AnyWorld::Table(World::build(sc, ring, site, policy)?))
        }
        _ => Err(Diagnostic::new(
            functor.pos,
            format!("unknown functor `{functor}`; expected rankvect, monoidvect or tablecoh"),
        )
        .into()),
    }
}

/// Parses and resolves without running anything.
pub fn validate(text: &str) -> Result<(Scenario, AnyWorld), Diagnostics> {
    let sc = crate::syntax::parse(text)?;
    let w = compile(&sc, None)?;
    Ok((sc, w))
}

impl<R: LabRig> World<R> {
    fn build(sc: &Scenario, rig: R, site: Arc<Site>, policy: ProbePolicy) -> Result<Self, Diagnostics> {
        let mut w = World {
            th: Bivariant::new(FunctorInstance::new(rig, site)),
            probes: ProbeSet::new(policy),
            ops: BTreeMap::new(),
            elements: BTreeMap::new(),
            families: BTreeMap::new(),
            transforms: BTreeMap::new(),
            correspondences: BTreeMap::new(),
            checks: Vec::new(),
        };
        let mut errors = Vec::new();
        let mut declared = std::collections::BTreeSet::new();
        let mut fresh = |d: &Decl, errors: &mut Vec<Diagnostic>| {
            if declared.insert(d.name.text.clone()) {
                true
            } else {
                errors.push(Diagnostic::new(d.name.pos, format!("`{}` is already declared", d.name.text)));
                false
            }
        };
        for d in &sc.ops {
            if fresh(d, &mut errors) {
                match w.op_def(&d.def) {
                    Ok(op) => {
                        w.ops.insert(d.name.text.clone(), op);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
        for d in &sc.elements {
            if fresh(d, &mut errors) {
                match w.element_def(&d.def) {
                    Ok(e) => {
                        w.elements.insert(d.name.text.clone(), e);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
        for d in &sc.families {
            if fresh(d, &mut errors) {
                match w.family_def(&d.def) {
                    Ok(f) => {
                        w.families.insert(d.name.text.clone(), f);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
        for d in &sc.transforms {
            if fresh(d, &mut errors) {
                match w.transform_def(&d.name.text, &d.def) {
                    Ok(t) => {
                        w.transforms.insert(d.name.text.clone(), t);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
        for d in &sc.correspondences {
            if fresh(d, &mut errors) {
                match w.correspondence_def(&d.name.text, &d.def) {
                    Ok(c) => {
                        w.correspondences.insert(d.name.text.clone(), c);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
        for c in &sc.checks {
            match w.check_def(c) {
                Ok(spec) => w.checks.push(CheckEntry {
                    text: c.to_string(),
                    spec,
                }),
                Err(e) => errors.push(e),
            }
        }
        if errors.is_empty() {
            Ok(w)
        } else {
            Err(Diagnostics(errors))
        }
    }

    fn site(&self) -> &Arc<Site> {
        self.th.site()
    }

    fn object(&self, t: &Term) -> D<ObjId> {
        let name = ident(t, "an object name")?;
        self.site()
            .object_id(name)
            .map_err(|_| Diagnostic::new(t.pos, format!("unknown object `{name}`")))
    }

    /// A declared morphism, `id(X)`, `terminal(X)` or `compose(G, F)`.
    fn morphism(&self, t: &Term) -> D<Arc<Morphism>> {
        let site = self.site();
        match &t.kind {
            TermKind::Ident(name) => site
                .morphism_by_name(name)
                .map_err(|_| Diagnostic::new(t.pos, format!("unknown morphism `{name}`"))),
            TermKind::Call(h, _) if h == "id" => {
                let a = Args::of(t);
                a.only(&["object"])?;
                Ok(site.identity(self.object(a.need(0, "object")?)?))
            }
            TermKind::Call(h, _) if h == "terminal" => {
                let a = Args::of(t);
                a.only(&["object"])?;
                Ok(site.to_terminal(self.object(a.need(0, "object")?)?))
            }
            TermKind::Call(h, _) if h == "compose" => {
                let a = Args::of(t);
                a.only(&["outer", "inner"])?;
                let g = self.morphism(a.need(0, "outer")?)?;
                let f = self.morphism(a.need(1, "inner")?)?;
                site.compose(&g, &f).map_err(core_err(t.pos))
            }
            _ => err(t.pos, format!("expected a morphism, found `{t}`")),
        }
    }

    fn op_ref(&self, t: &Term) -> D<Arc<OpExpr>> {
        let name = ident(t, "an operation name")?;
        self.ops
            .get(name)
            .cloned()
            .ok_or_else(|| Diagnostic::new(t.pos, format!("unknown operation `{name}`")))
    }

    fn op_def(&self, t: &Term) -> D<Arc<OpExpr>> {
        let op = match (&t.kind, t.head()) {
            (TermKind::Ident(_), Some("zero")) => OpExpr::Zero,
            (TermKind::Ident(_), Some("ident")) => OpExpr::Ident,
            (TermKind::Tagged(_, body), Some("poly")) => {
                let cs = list(body, "polynomial coefficients")?
                    .iter()
                    .map(|c| nat(c, "a coefficient"))
                    .collect::<D<Vec<u64>>>()?;
                OpExpr::poly(cs)
            }
            (TermKind::Tagged(_, body), Some("table")) => {
                let TermKind::Brace(entries) = &body.kind else {
                    return err(body.pos, "expected `table { x -> y, ... }`");
                };
                let mut pairs = BTreeMap::new();
                for e in entries {
                    let Entry::Map(a, b) = e else {
                        return err(body.pos, "table entries are written `x -> y`");
                    };
                    let idx = |t: &Term| -> D<u32> {
                        let l = label_of(t)?;
                        self.th
                            .rig()
                            .label_index(&l)
                            .ok_or_else(|| Diagnostic::new(t.pos, format!("`{l}` is not a ring element")))
                    };
                    let (x, y) = (idx(a)?, idx(b)?);
                    if pairs.insert(x, y).is_some() {
                        return err(a.pos, format!("`{a}` is mapped twice"));
                    }
                }
                let n = pairs.len() as u32;
                if (0..n).any(|i| !pairs.contains_key(&i)) {
                    return err(body.pos, "a table operation must map every ring element");
                }
                if let Some(size) = self.th.rig().table_size() {
                    if size != pairs.len() {
                        return err(body.pos, format!("table maps {} elements but the ring has {size}", pairs.len()));
                    }
                }
                let table: Vec<u32> = pairs.into_values().collect();
                let rig = self.th.rig();
                let zero_zero = rig
                    .table_index(&rig.zero())
                    .is_some_and(|z| table.get(z) == Some(&(z as u32)));
                OpExpr::PointwiseTable { table, zero_zero }
            }
            (TermKind::Call(..), Some("compose")) => {
                let a = Args::of(t);
                a.only(&["outer", "inner"])?;
                let outer = self.op_ref(a.need(0, "outer")?)?;
                let inner = self.op_ref(a.need(1, "inner")?)?;
                OpExpr::Compose(outer, inner)
            }
            _ => {
                return err(
                    t.pos,
                    format!("unknown operation `{t}`; expected poly [..], table {{..}}, compose(..), zero or ident"),
                )
            }
        };
        Ok(Arc::new(op))
    }

    fn value(&self, t: &Term, obj: ObjId) -> D<Value<R::Elem>> {
        let entries = list(t, "a value")?
            .iter()
            .map(|e| self.th.rig().entry(e))
            .collect::<D<Vec<_>>>()?;
        self.th.fun.value(obj, entries).map_err(core_err(t.pos))
    }

    fn element_ref(&self, t: &Term) -> D<Arc<ElementOf<R>>> {
        let name = ident(t, "an element name")?;
        self.elements
            .get(name)
            .cloned()
            .ok_or_else(|| Diagnostic::new(t.pos, format!("unknown element `{name}`")))
    }

    fn element_def(&self, t: &Term) -> D<Arc<ElementOf<R>>> {
        let th = &self.th;
        let site = self.site();
        let a = Args::of(t);
        let ce = core_err(t.pos);
        match (&t.kind, a.head) {
            (TermKind::Call(..), "delta") => {
                a.only(&["op", "f", "section"])?;
                let op = self.op_ref(a.need(0, "op")?)?;
                let f = self.morphism(a.need(1, "f")?)?;
                let s = a.get(2, "section").map(|s| self.morphism(s)).transpose()?;
                delta(th, op, &f, s.as_ref()).map_err(ce)
            }
            (TermKind::Call(..), "delta_cap") => {
                a.only(&["inner", "f", "section"])?;
                let c = self.element_ref(a.need(0, "inner")?)?;
                let f = self.morphism(a.need(1, "f")?)?;
                let s = a.get(2, "section").map(|s| self.morphism(s)).transpose()?;
                delta_cap(th, &c, &f, s.as_ref()).map_err(ce)
            }
            (TermKind::Call(..), "unit") => {
                a.only(&["object"])?;
                Ok(th.unit(self.object(a.need(0, "object")?)?))
            }
            (TermKind::Call(..), "zero") => {
                a.only(&["f"])?;
                Ok(th.zero(&self.morphism(a.need(0, "f")?)?))
            }
            (TermKind::Call(..), "induced") => {
                a.only(&["op", "object"])?;
                let op = self.op_ref(a.need(0, "op")?)?;
                Ok(th.induced(op, self.object(a.need(1, "object")?)?))
            }
            (TermKind::Call(..), "phi_sum" | "phi_tensor") => {
                a.only(&["bundle", "object"])?;
                let x = self.object(a.need(1, "object")?)?;
                let e = self.value(a.need(0, "bundle")?, x)?;
                Ok(if a.head == "phi_sum" {
                    phi_sum(th, &e)
                } else {
                    phi_tensor(th, &e)
                })
            }
            (TermKind::Call(..), "product") => {
                a.only(&["left", "right"])?;
                let c = self.element_ref(a.need(0, "left")?)?;
                let d = self.element_ref(a.need(1, "right")?)?;
                th.product(&c, &d).map_err(ce)
            }
            (TermKind::Call(..), "pushforward") => {
                a.only(&["f", "element", "g"])?;
                let f = self.morphism(a.need(0, "f")?)?;
                let c = self.element_ref(a.need(1, "element")?)?;
                let g = match a.get(2, "g") {
                    Some(g) => self.morphism(g)?,
                    None => factor_through(site, &f, &c.support).map_err(|m| Diagnostic::new(t.pos, m))?,
                };
                th.pushforward(&f, &g, &c).map_err(ce)
            }
            (TermKind::Call(..), "pullback") => {
                a.only(&["g", "element"])?;
                let g = self.morphism(a.need(0, "g")?)?;
                let c = self.element_ref(a.need(1, "element")?)?;
                th.pullback(&g, &c).map_err(ce)
            }
            _ => err(
                t.pos,
                format!(
                    "unknown element `{t}`; expected delta, delta_cap, unit, zero, induced, phi_sum, phi_tensor, product, pushforward or pullback"
                ),
            ),
        }
    }

    /// An element name as a singleton, or a family.
    fn set_ref(&self, t: &Term) -> D<ElementSet<R>> {
        let name = ident(t, "an element or family name")?;
        if let Some(f) = self.families.get(name) {
            return Ok(Named {
                name: name.to_string(),
                value: f.clone(),
            });
        }
        if let Some(e) = self.elements.get(name) {
            return Ok(Named {
                name: name.to_string(),
                value: vec![e.clone()],
            });
        }
        err(t.pos, format!("unknown element or family `{name}`"))
    }

    fn phi_bundles(&self, a: &Args) -> D<(ObjId, Vec<Value<R::Elem>>)> {
        a.only(&["object", "max_rank"])?;
        let x = self.object(a.need(0, "object")?)?;
        let max = a.get(1, "max_rank").map(|t| nat(t, "max_rank")).transpose()?.unwrap_or(2);
        let carriers = self.th.rig().bundle_carriers(max);
        let n = self.site().object(x).len();
        if (carriers.len() as f64).powi(n as i32) > 4096.0 {
            return err(a.pos, "the bundle universe is larger than 4096");
        }
        Ok((x, all_values(x, n, &carriers)))
    }

    fn family_def(&self, t: &Term) -> D<Vec<Arc<ElementOf<R>>>> {
        let th = &self.th;
        let site = self.site();
        let a = Args::of(t);
        match a.head {
            "deltas" => {
                if !a.keyed.is_empty() {
                    return err(a.keyed[0].1.pos, "`deltas` takes operation names");
                }
                let ops = a.positional.iter().map(|o| self.op_ref(o)).collect::<D<Vec<_>>>()?;
                bivariant_core::derived::delta_family(th, &ops).map_err(core_err(t.pos))
            }
            "phi_sums" => {
                let (_, bundles) = self.phi_bundles(&a)?;
                Ok(bundles.iter().map(|e| phi_sum(th, e)).collect())
            }
            "phi_tensors" => {
                let (_, bundles) = self.phi_bundles(&a)?;
                Ok(bundles.iter().map(|e| phi_tensor(th, e)).collect())
            }
            "units" => {
                a.only(&[])?;
                Ok(site.base_objects().iter().map(|&o| th.unit(o)).collect())
            }
            "zeros" => {
                a.only(&[])?;
                Ok(site
                    .base_objects()
                    .iter()
                    .flat_map(|&o| [site.identity(o), site.to_terminal(o)])
                    .map(|m| th.zero(&m))
                    .collect())
            }
            "union" => {
                if !a.keyed.is_empty() {
                    return err(a.keyed[0].1.pos, "`union` takes element and family names");
                }
                let mut out = Vec::new();
                for p in &a.positional {
                    out.extend(self.set_ref(p)?.value);
                }
                Ok(out)
            }
            _ => err(
                t.pos,
                format!("unknown family `{t}`; expected deltas, phi_sums, phi_tensors, units, zeros or union"),
            ),
        }
    }

    fn transform_def(&self, name: &str, t: &Term) -> D<TransformDef> {
        let kind = match t.head() {
            Some("rank") => {
                let f = brace_fields(t, &["ring"], "rank")?;
                let r = f.get("ring").ok_or_else(|| Diagnostic::new(t.pos, "rank needs `ring`"))?;
                TransformKind::Rank(ring(r)?)
            }
            Some("exp") => {
                let f = brace_fields(t, &["ring", "base"], "exp")?;
                let r = ring(f.get("ring").ok_or_else(|| Diagnostic::new(t.pos, "exp needs `ring`"))?)?;
                let b = f.get("base").ok_or_else(|| Diagnostic::new(t.pos, "exp needs `base`"))?;
                let base = nat(b, "base")?;
                if base as usize >= r.len() {
                    return err(b.pos, format!("base {base} is not an element of {}", r.describe()));
                }
                TransformKind::Exp(r, base as u32)
            }
            Some("augmentation") => TransformKind::Augmentation,
            _ => return err(t.pos, format!("unknown transform `{t}`; expected rank, exp or augmentation")),
        };
        let source = self.th.rig().describe();
        let ok = match &kind {
            TransformKind::Rank(_) | TransformKind::Exp(..) => source == RankVect.describe(),
            TransformKind::Augmentation => source.starts_with("monoidvect"),
        };
        if !ok {
            return err(t.pos, format!("transform `{t}` does not apply to {source}"));
        }
        Ok(TransformDef {
            name: name.to_string(),
            kind,
        })
    }

    fn correspondence_def(&self, name: &str, t: &Term) -> D<OpCorrespondence> {
        let TermKind::Brace(entries) = &t.kind else {
            return err(t.pos, "expected `{ OP -> OP, ... }`");
        };
        let mut pairs = Vec::new();
        for e in entries {
            let Entry::Map(a, b) = e else {
                return err(t.pos, "correspondence entries are written `OP -> OP`");
            };
            pairs.push((self.op_ref(a)?, self.op_ref(b)?));
        }
        Ok(OpCorrespondence {
            name: name.to_string(),
            pairs,
        })
    }

    fn transform_ref(&self, t: &Term) -> D<TransformDef> {
        let name = ident(t, "a transform name")?;
        self.transforms
            .get(name)
            .cloned()
            .ok_or_else(|| Diagnostic::new(t.pos, format!("unknown transform `{name}`")))
    }

    fn correspondence_ref(&self, t: &Term) -> D<Named<OpCorrespondence>> {
        let name = ident(t, "a correspondence name")?;
        self.correspondences
            .get(name)
            .cloned()
            .map(|value| Named {
                name: name.to_string(),
                value,
            })
            .ok_or_else(|| Diagnostic::new(t.pos, format!("unknown correspondence `{name}`")))
    }

    fn check_def(&self, t: &Term) -> D<CheckSpec<R>> {
        let a = Args::of(t);
        if !matches!(t.kind, TermKind::Ident(_) | TermKind::Call(..)) {
            return err(t.pos, format!("expected a check, found `{t}`"));
        }
        let one_transform = |a: &Args| -> D<TransformDef> {
            a.only(&["transform"])?;
            self.transform_ref(a.need(0, "transform")?)
        };
        Ok(match a.head {
            "functor_laws" => {
                a.only(&[])?;
                CheckSpec::FunctorLaws
            }
            "rig_laws" => {
                a.only(&[])?;
                CheckSpec::RigLaws
            }
            "naturality" => {
                a.only(&["op"])?;
                let o = a.need(0, "op")?;
                CheckSpec::Naturality(match o.ident() {
                    Some("fiber_sum") if !self.ops.contains_key("fiber_sum") => NatTarget::FiberSum,
                    Some("all_tables") if !self.ops.contains_key("all_tables") => {
                        if self.th.rig().table_size().is_none() {
                            return err(o.pos, "`all_tables` needs a tablecoh functor");
                        }
                        NatTarget::AllTables
                    }
                    _ => NatTarget::Op(Named {
                        name: ident(o, "an operation name")?.to_string(),
                        value: self.op_ref(o)?,
                    }),
                })
            }
            "compatibility" => {
                a.only(&["elements"])?;
                CheckSpec::Compatibility(self.set_ref(a.need(0, "elements")?)?)
            }
            "axioms" => {
                a.only(&["elements"])?;
                CheckSpec::Axioms(self.set_ref(a.need(0, "elements")?)?)
            }
            "equal" => {
                a.only(&["left", "right"])?;
                let c = self.element_ref(a.need(0, "left")?)?;
                let d = self.element_ref(a.need(1, "right")?)?;
                if c.support.id != d.support.id {
                    return err(t.pos, "`equal` needs elements over the same morphism");
                }
                CheckSpec::Equal(c, d)
            }
            "delta_closure" => {
                a.only(&["elements"])?;
                CheckSpec::DeltaClosure(self.set_ref(a.need(0, "elements")?)?)
            }
            "pushforward_identity" => {
                if !a.keyed.is_empty() || a.positional.is_empty() {
                    return err(t.pos, "`pushforward_identity` takes one or more operation names");
                }
                let ops = a.positional.iter().map(|o| self.op_ref(o)).collect::<D<Vec<_>>>()?;
                for (o, op) in a.positional.iter().zip(&ops) {
                    if !op.zero_zero() {
                        return err(o.pos, format!("{op} does not send zero to zero"));
                    }
                }
                CheckSpec::PushforwardIdentity(ops)
            }
            "delta_cap_closure" => {
                a.only(&["left", "right"])?;
                let c = self.element_ref(a.need(0, "left")?)?;
                let d = self.element_ref(a.need(1, "right")?)?;
                for (e, p) in [(&c, a.need(0, "left")?.pos), (&d, a.need(1, "right")?.pos)] {
                    if !bivariant_core::bivariant::is_identity(&e.support) {
                        return err(p, format!("{} is not over an identity", e.label));
                    }
                }
                CheckSpec::DeltaCapClosure(c, d)
            }
            "not_induced" => {
                a.only(&["element"])?;
                let c = self.element_ref(a.need(0, "element")?)?;
                if !bivariant_core::bivariant::is_identity(&c.support) {
                    return err(t.pos, format!("{} is not over an identity", c.label));
                }
                CheckSpec::NotInduced(c)
            }
            "injectivity" => {
                a.only(&["kind", "object", "max_rank"])?;
                let k = a.need(0, "kind")?;
                let kind = match ident(k, "`sum` or `tensor`")? {
                    "sum" => PhiKind::Sum,
                    "tensor" => PhiKind::Tensor,
                    other => return err(k.pos, format!("unknown kind `{other}`; expected `sum` or `tensor`")),
                };
                let x = self.object(a.need(1, "object")?)?;
                let max = a.get(2, "max_rank").map(|t| nat(t, "max_rank")).transpose()?.unwrap_or(2);
                CheckSpec::Injectivity(kind, x, max)
            }
            "transform_naturality" => CheckSpec::TransformNaturality(one_transform(&a)?),
            "additive" => CheckSpec::Additive(one_transform(&a)?),
            "multiplicative" => CheckSpec::Multiplicative(one_transform(&a)?),
            "exponential" => CheckSpec::Exponential(one_transform(&a)?),
            "polynomial" => {
                a.only(&["transform", "coeffs"])?;
                let tr = self.transform_ref(a.need(0, "transform")?)?;
                let cs = list(a.need(1, "coeffs")?, "coefficients")?
                    .iter()
                    .map(|c| nat(c, "a coefficient"))
                    .collect::<D<Vec<_>>>()?;
                CheckSpec::Polynomial(tr, Polynomial::new(cs))
            }
            "cubic" => {
                a.only(&["transform", "correspondence"])?;
                let tr = self.transform_ref(a.need(0, "transform")?)?;
                let c = self.correspondence_ref(a.need(1, "correspondence")?)?;
                CheckSpec::Cubic(tr, c)
            }
            "grothendieck" => {
                a.only(&["transform", "correspondence", "elements"])?;
                let tr = self.transform_ref(a.need(0, "transform")?)?;
                let c = self.correspondence_ref(a.need(1, "correspondence")?)?;
                let set = self.set_ref(a.need(2, "elements")?)?;
                CheckSpec::Grothendieck(tr, c, set)
            }
            "quillen" => {
                a.only(&["op", "b", "x"])?;
                let op = self.op_ref(a.need(0, "op")?)?;
                let b = self.object(a.need(1, "b")?)?;
                let x = self.object(a.need(2, "x")?)?;
                CheckSpec::Quillen(op, b, x)
            }
            "finiteness" => {
                a.only(&["bundle", "object", "degree"])?;
                let x = self.object(a.need(1, "object")?)?;
                let v = self.value(a.need(0, "bundle")?, x)?;
                let d = a.get(2, "degree").map(|t| nat(t, "degree")).transpose()?;
                if d == Some(0) {
                    return err(t.pos, "degree must be at least 1");
                }
                CheckSpec::Finiteness(v, d)
            }
            "expect_fail" => {
                a.only(&["check"])?;
                CheckSpec::ExpectFail(Box::new(self.check_def(a.need(0, "check")?)?))
            }
            other => {
                return err(
                    t.pos,
                    format!("unknown check `{other}`; see docs/scenario-format.md for the list of checks"),
                )
            }
        })
    }
}

/// The map `g` with `g ∘ f = u`, when `f` is surjective.
fn factor_through(site: &Site, f: &Morphism, u: &Morphism) -> Result<Arc<Morphism>, String> {
    if f.src != u.src {
        return Err(format!(
            "{} and the support {} have different sources",
            site.render_morphism(f),
            site.render_morphism(u)
        ));
    }
    let n = site.object(f.dst).len();
    let mut map: Vec<Option<u32>> = vec![None; n];
    for (x, &y) in f.map.iter().enumerate() {
        let z = u.map[x];
        match map[y as usize] {
            Some(prev) if prev != z => {
                return Err(format!(
                    "the support {} does not factor through {}",
                    site.render_morphism(u),
                    site.render_morphism(f)
                ))
            }
            _ => map[y as usize] = Some(z),
        }
    }
    let map: Option<Vec<u32>> = map.into_iter().collect();
    match map {
        Some(m) => site.intern_morphism(f.dst, u.dst, m).map_err(|e| e.to_string()),
        None => Err(format!(
            "{} is not surjective, so the remaining factor is not determined; pass it as a third argument",
            site.render_morphism(f)
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compile_text(text: &str) -> Result<AnyWorld, Diagnostics> {
        compile(&crate::syntax::parse(text)?, None)
    }

    const BASE: &str = "site {\n  object X = [a, b]\n  p: X -> pt [*, *]\n}\nfunctor = rankvect { max_rank = 3 }\n";

    #[test]
    fn minimal_scenario_compiles() {
        let w = compile_text("site {\n}\nfunctor = rankvect { max_rank = 2 }\nop sq = poly [0, 0, 1]\n").unwrap();
        assert_eq!(w.check_count(), 0);
    }

    #[test]
    fn undeclared_morphism_is_reported_with_position() {
        let text = format!("{BASE}op id = ident\nelement d = delta(op = id, f = q)\n");
        let e = compile_text(&text).unwrap_err();
        assert_eq!((e.0[0].pos.line, e.0[0].pos.col), (7, 32));
        assert!(e.0[0].message.contains("unknown morphism `q`"));
    }

    #[test]
    fn bad_image_is_positioned() {
        let e = compile_text("site {\n  object X = [a, b]\n  f: X -> X [a, c]\n}\nfunctor = rankvect {}\n").unwrap_err();
        assert_eq!((e.0[0].pos.line, e.0[0].pos.col), (3, 17));
    }

    #[test]
    fn pushforward_factor_is_inferred_for_surjections() {
        let text = format!("{BASE}op id = ident\nelement d = delta(op = id, f = p)\nelement q = pushforward(p, d)\n");
        assert!(compile_text(&text).is_ok());
    }

    #[test]
    fn transform_source_is_checked() {
        let text = "site {\n}\nfunctor = tablecoh { ring = zmod(4) }\ntransform t = rank { ring = zmod(7) }\n";
        let e = compile_text(text).unwrap_err();
        assert!(e.0[0].message.contains("does not apply"));
    }

    #[test]
    fn invalid_table_is_positioned() {
        let text = "site {\n}\nfunctor = tablecoh { ring = zmod(3) }\nop t = table { 0 -> 1, 1 -> 5, 2 -> 0 }\n";
        let e = compile_text(text).unwrap_err();
        assert_eq!(e.0[0].pos.line, 4);
        assert!(e.0[0].message.contains("`5`"));
    }

    #[test]
    fn table_zero_is_read_from_the_ring() {
        // Z/2 with its zero listed second
        let text = "site {\n  object X = [a, b]\n}\nfunctor = tablecoh { elements = [o, z], add = [[z, o], [o, z]], mul = [[o, z], [z, z]] }\nop t = table { o -> o, z -> z }\nelement d = delta(t, id(X))\n";
        assert!(compile_text(text).is_ok());
        let bad = text.replace("o -> o, z -> z", "o -> z, z -> o");
        assert!(compile_text(&bad).unwrap_err().0[0].message.contains("zero to zero"));
    }
}
