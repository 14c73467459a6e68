//! Executes the checks of a compiled scenario and renders the results.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Duration;

use bivariant_core::bivariant::{check_axioms, ElementOf, Rule, Verifier};
use bivariant_core::derived::{
    all_values, delta_cap_product_identity, delta_cap_pullback_identity, delta_cap_pushforward_identity,
    delta_product_identity, delta_pullback_identity, delta_pushforward_identity, injectivity_check,
    not_operation_induced, pushforward_identity, zero_absorption,
};
use bivariant_core::functor::{
    bounded_finiteness_search, check_functor_laws, check_rig_laws, finiteness_witness, MonoidVect, Polynomial,
    ProbeSet, RankVect, Rig, TableCoh, Value,
};
use bivariant_core::operations::{check_naturality, check_quillen, FiberSum, OpExpr};
use bivariant_core::report::{CheckReport, Counterexample};
use bivariant_core::site::{all_functions, Morphism};
use bivariant_core::transform::{
    augmentation_transform, check_cubic, check_grothendieck_laws, exp_transform, rank_transform, NatTransform,
};
use serde::{Deserialize, Serialize};

use crate::compile::{compile, AnyWorld, CheckEntry, CheckSpec, LabRig, NatTarget, TransformDef, TransformKind, World};
use crate::syntax::{parse, Diagnostics};

/// Exit status of a run.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_COUNTEREXAMPLE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Degree bound for the finiteness search when none is given.
const DEFAULT_FINITENESS_DEGREE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    /// The check as written in the scenario, in canonical form.
    pub check: String,
    pub expect: Expect,
    /// Whether the outcome matched the expectation.
    pub ok: bool,
    /// Lines describing a witness the check exhibits on success.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<String>,
    pub report: CheckReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub name: String,
    pub size: usize,
    pub probes: usize,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Universe {
    pub functor: String,
    pub objects: Vec<ObjectSummary>,
    pub morphisms: usize,
    pub mode: String,
    pub closure_depth: u32,
    pub policy: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Counterexample,
}

/// Everything a run produced. Contains no timings, so that two runs with
/// the same seed serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub status: Status,
    pub universe: Universe,
    pub checks: Vec<CheckResult>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => EXIT_PASS,
            Status::Counterexample => EXIT_COUNTEREXAMPLE,
        }
    }

    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.ok).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Human-readable form. Failing checks get a counterexample block.
    pub fn to_text(&self, elapsed: Option<Duration>) -> String {
        let mut out = String::new();
        let u = &self.universe;
        let _ = writeln!(out, "scenario {} (seed {})", self.scenario, self.seed);
        let _ = writeln!(out, "  functor  {}", u.functor);
        let objs: Vec<String> = u
            .objects
            .iter()
            .map(|o| {
                let tag = if o.exhaustive { "all" } else { "sampled" };
                format!("{}[{}]: {} probes ({tag})", o.name, o.size, o.probes)
            })
            .collect();
        let _ = writeln!(out, "  objects  {}", objs.join(", "));
        let _ = writeln!(
            out,
            "  site     {} morphisms, mode {}, closure depth {}",
            u.morphisms, u.mode, u.closure_depth
        );
        let _ = writeln!(out, "  policy   {}", u.policy);
        out.push('\n');
        for c in &self.checks {
            let tag = match (c.ok, c.expect) {
                (true, Expect::Pass) => "PASS",
                (true, Expect::Fail) => "PASS (fails as expected)",
                (false, Expect::Pass) => "FAIL",
                (false, Expect::Fail) => "FAIL (expected a failure)",
            };
            let r = &c.report;
            let _ = writeln!(
                out,
                "[{tag}] {}  ({} instances, {} violations)",
                c.check, r.instances, r.violations
            );
            for n in &r.notes {
                let _ = writeln!(out, "    note: {n}");
            }
            if !c.witness.is_empty() {
                let _ = writeln!(out, "    witness:");
                for w in &c.witness {
                    let _ = writeln!(out, "      {w}");
                }
            }
            if !c.ok && c.expect == Expect::Pass {
                let _ = writeln!(out, "    universe: {}", r.universe);
                for cx in r.counterexamples.iter().take(3) {
                    write_counterexample(&mut out, cx);
                }
                if r.counterexamples.len() > 3 {
                    let _ = writeln!(out, "    ... {} more kept in the machine report", r.counterexamples.len() - 3);
                }
            }
        }
        out.push('\n');
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Counterexample => "COUNTEREXAMPLE",
        };
        let _ = writeln!(out, "{status}: {}/{} checks ok", self.passed(), self.checks.len());
        if let Some(t) = elapsed {
            let _ = writeln!(out, "time {:.3}s", t.as_secs_f64());
        }
        out
    }
}

fn write_counterexample(out: &mut String, cx: &Counterexample) {
    let _ = writeln!(out, "    counterexample:");
    for b in &cx.diagram {
        let _ = writeln!(out, "      {} = {}", b.role, b.value);
    }
    let _ = writeln!(out, "      probe = {}", cx.probe);
    let _ = writeln!(out, "      lhs   = {}", cx.lhs);
    let _ = writeln!(out, "      rhs   = {}", cx.rhs);
}

/// Parses, compiles and runs a scenario.
pub fn run_text(name: &str, text: &str, seed: Option<u64>) -> Result<RunReport, Diagnostics> {
    let sc = parse(text)?;
    let world = compile(&sc, seed)?;
    Ok(run_world(name, &world))
}

pub fn run_world(name: &str, world: &AnyWorld) -> RunReport {
    match world {
        AnyWorld::Rank(w) => run(name, w),
        AnyWorld::Monoid(w) => run(name, w),
        AnyWorld::Table(w) => run(name, w),
    }
}

fn universe<R: Runnable>(w: &World<R>) -> Universe {
    let site = w.th.site();
    let fun = &w.th.fun;
    Universe {
        functor: w.th.rig().describe(),
        objects: site
            .base_objects()
            .iter()
            .map(|&o| ObjectSummary {
                name: site.object_name(o),
                size: site.object(o).len(),
                probes: w.probes.on(fun, o).len(),
                exhaustive: w.probes.is_exhaustive_on(fun, o),
            })
            .collect(),
        morphisms: site.base_morphisms().len(),
        mode: site.mode().to_string(),
        closure_depth: site.closure_depth(),
        policy: w.probes.describe(),
    }
}

pub fn run<R: Runnable>(name: &str, w: &World<R>) -> RunReport {
    let checks: Vec<CheckResult> = w.checks.iter().map(|c| run_check(w, c)).collect();
    let status = if checks.iter().all(|c| c.ok) {
        Status::Pass
    } else {
        Status::Counterexample
    };
    RunReport {
        scenario: name.to_string(),
        seed: w.probes.policy.seed,
        status,
        universe: universe(w),
        checks,
    }
}

fn run_check<R: Runnable>(w: &World<R>, entry: &CheckEntry<R>) -> CheckResult {
    let (expect, spec) = match &entry.spec {
        CheckSpec::ExpectFail(inner) => (Expect::Fail, inner.as_ref()),
        s => (Expect::Pass, s),
    };
    let (report, mut witness) = execute(w, spec);
    let ok = match expect {
        Expect::Pass => report.passed,
        Expect::Fail => !report.passed,
    };
    if expect == Expect::Fail && ok {
        if let Some(cx) = report.first() {
            witness.extend(cx.diagram.iter().map(|b| format!("{} = {}", b.role, b.value)));
            witness.push(format!("probe = {}", cx.probe));
            witness.push(format!("lhs = {}", cx.lhs));
            witness.push(format!("rhs = {}", cx.rhs));
        }
    }
    CheckResult {
        check: entry.text.clone(),
        expect,
        ok,
        witness,
        report,
    }
}

/// Rig-specific parts of the runner: transformations and finiteness.
pub trait Runnable: LabRig {
    fn transform_check(w: &World<Self>, def: &TransformDef, _spec: &CheckSpec<Self>) -> CheckReport {
        let mut r = CheckReport::new(format!("transform[{}]", def.name), w.th.rig().describe());
        r.fail(Counterexample::new("-", "transform does not apply to this functor", "-"));
        r.finish()
    }

    fn finiteness(w: &World<Self>, v: &Value<Self::Elem>, degree: Option<u64>) -> (Option<(Polynomial, Polynomial)>, String) {
        let d = degree.unwrap_or(DEFAULT_FINITENESS_DEGREE);
        (
            bounded_finiteness_search(&w.th.fun, v, d),
            format!("search over degree and coefficients at most {d}"),
        )
    }
}

impl Runnable for RankVect {
    fn transform_check(w: &World<Self>, def: &TransformDef, spec: &CheckSpec<Self>) -> CheckReport {
        let built = match &def.kind {
            TransformKind::Rank(ring) => rank_transform(w.th.fun.clone(), ring.clone()),
            TransformKind::Exp(ring, base) => exp_transform(w.th.fun.clone(), ring.clone(), *base),
            TransformKind::Augmentation => unreachable!("rejected at compile time"),
        };
        match built {
            Ok(t) => transform_report::<RankVect, TableCoh>(w, &t, spec),
            Err(e) => error_report(&def.name, &e),
        }
    }

    fn finiteness(w: &World<Self>, v: &Value<u64>, degree: Option<u64>) -> (Option<(Polynomial, Polynomial)>, String) {
        match degree {
            None => (
                finiteness_witness(&w.th.fun, v).ok(),
                "closed form from the product of (x - r) over the ranks r".into(),
            ),
            Some(d) => (
                bounded_finiteness_search(&w.th.fun, v, d),
                format!("search over degree and coefficients at most {d}"),
            ),
        }
    }
}

impl Runnable for MonoidVect {
    fn transform_check(w: &World<Self>, def: &TransformDef, spec: &CheckSpec<Self>) -> CheckReport {
        match augmentation_transform(w.th.fun.clone()) {
            Ok(t) => transform_report::<MonoidVect, RankVect>(w, &t, spec),
            Err(e) => error_report(&def.name, &e),
        }
    }
}

impl Runnable for TableCoh {}

fn error_report(name: &str, e: &bivariant_core::Error) -> CheckReport {
    let mut r = CheckReport::new(name, "-");
    r.error(name, e);
    r.finish()
}

fn transform_report<S: Runnable, T: Rig>(w: &World<S>, t: &NatTransform<S, T>, spec: &CheckSpec<S>) -> CheckReport {
    let probes = &w.probes;
    match spec {
        CheckSpec::TransformNaturality(_) => t.check_naturality(probes),
        CheckSpec::Additive(_) => t.check_additive(probes),
        CheckSpec::Multiplicative(_) => t.check_multiplicative(probes),
        CheckSpec::Exponential(_) => t.check_exponential(probes),
        CheckSpec::Polynomial(_, p) => t.check_polynomial(p, probes),
        CheckSpec::Cubic(_, corr) => {
            let mut r = CheckReport::new(
                format!("cubic[{}, {}]", t.name, corr.name),
                format!("{}; {}", w.th.fun.describe(), probes.describe()),
            );
            for (a, b) in &corr.value.pairs {
                r.absorb(check_cubic(t, a, b, probes));
            }
            r.finish()
        }
        CheckSpec::Grothendieck(_, corr, set) => {
            let target_probes = ProbeSet::<T>::new(probes.policy.clone());
            check_grothendieck_laws(t, &corr.value, &set.value, probes, &target_probes)
        }
        _ => unreachable!("not a transform check"),
    }
}

fn transform_of<R: LabRig>(spec: &CheckSpec<R>) -> Option<&TransformDef> {
    match spec {
        CheckSpec::TransformNaturality(d)
        | CheckSpec::Additive(d)
        | CheckSpec::Multiplicative(d)
        | CheckSpec::Exponential(d)
        | CheckSpec::Polynomial(d, _)
        | CheckSpec::Cubic(d, _)
        | CheckSpec::Grothendieck(d, _, _) => Some(d),
        _ => None,
    }
}

fn execute<R: Runnable>(w: &World<R>, spec: &CheckSpec<R>) -> (CheckReport, Vec<String>) {
    let th = &w.th;
    let site = th.site();
    let fun = &th.fun;
    let probes = &w.probes;
    let v = Verifier::new(th, probes);
    let mut witness = Vec::new();
    if let Some(def) = transform_of(spec) {
        return (R::transform_check(w, def, spec), witness);
    }
    let report = match spec {
        CheckSpec::FunctorLaws => check_functor_laws(fun.as_ref(), probes),
        CheckSpec::RigLaws => check_rig_laws(fun, probes),
        CheckSpec::Naturality(NatTarget::Op(op)) => check_naturality(op.value.as_ref(), fun, probes),
        CheckSpec::Naturality(NatTarget::FiberSum) => check_naturality(&FiberSum, fun, probes),
        CheckSpec::Naturality(NatTarget::AllTables) => {
            let n = th.rig().table_size().unwrap_or(0);
            let mut r = CheckReport::new(format!("naturality[all {} pointwise tables]", n.pow(n as u32)), v.universe());
            for table in all_functions(n, n as u32) {
                let zero_zero = th
                    .rig()
                    .table_index(&th.rig().zero())
                    .is_some_and(|z| table.get(z) == Some(&(z as u32)));
                let op = OpExpr::PointwiseTable { table, zero_zero };
                r.absorb(check_naturality(&op, fun, probes));
            }
            r.finish()
        }
        CheckSpec::Compatibility(set) => {
            let mut r = CheckReport::new(format!("compatibility[{}]", set.name), v.universe());
            for c in &set.value {
                r.absorb(v.check_compatibility(c));
            }
            r.note(format!("{} elements", set.value.len()));
            r.finish()
        }
        CheckSpec::Axioms(set) => {
            let mut r = check_axioms(th, set.value.clone(), probes);
            r.note(format!("{} elements", set.value.len()));
            r
        }
        CheckSpec::Equal(c, d) => v.equal_elements(c, d).unwrap_or_else(|e| error_report("equal", &e)),
        CheckSpec::DeltaClosure(set) => delta_closure(&v, &set.value),
        CheckSpec::PushforwardIdentity(ops) => {
            let mut r = CheckReport::new("pushforward identity", v.universe());
            let (mut sectioned, mut other) = (0, 0);
            for theta in ops {
                for f in site.base_morphisms() {
                    let sections = site.sections_of(f);
                    if sections.is_empty() {
                        r.absorb(pushforward_identity(&v, theta, f, None));
                        other += 1;
                    }
                    for s in &sections {
                        r.absorb(pushforward_identity(&v, theta, f, Some(s)));
                        sectioned += 1;
                    }
                }
            }
            r.note(format!(
                "{sectioned} (operation, map, section) triples give the induced element, {other} (operation, map) pairs without a section give zero"
            ));
            r.finish()
        }
        CheckSpec::DeltaCapClosure(c, d) => delta_cap_closure(&v, c, d),
        CheckSpec::NotInduced(c) => {
            let mut r = CheckReport::new(format!("not induced[{}]", c.label), v.universe());
            r.tick();
            match not_operation_induced(&v, c) {
                Ok(Some(wt)) => {
                    witness.push(format!("probe = {}", fun.render(&wt.probe)));
                    witness.push(format!("g1 = {}", site.render_morphism(&wt.g1)));
                    witness.push(format!("g2 = {}", site.render_morphism(&wt.g2)));
                    witness.push(format!("c_g1(probe) = {}", fun.render(&wt.out1)));
                    witness.push(format!("c_g2(probe) = {}", fun.render(&wt.out2)));
                    r.note("an operation would give equal outputs for maps with a common source");
                }
                Ok(None) => r.fail(Counterexample::new(
                    "-",
                    "no separating pair of maps",
                    "inconclusive on these probes",
                )),
                Err(e) => r.error("not induced", &e),
            }
            r.finish()
        }
        CheckSpec::Injectivity(kind, x, max) => {
            let carriers = th.rig().bundle_carriers(*max);
            let universe = all_values(*x, site.object(*x).len(), &carriers);
            let mut r = injectivity_check(&v, *kind, &universe);
            r.note(format!(
                "{} bundles on {}, {} pairs",
                universe.len(),
                site.object_name(*x),
                universe.len() * universe.len().saturating_sub(1) / 2
            ));
            r
        }
        CheckSpec::Quillen(op, b, x) => {
            check_quillen(fun, op.clone(), *b, *x, probes).unwrap_or_else(|e| error_report("quillen", &e))
        }
        CheckSpec::Finiteness(val, degree) => {
            let mut r = CheckReport::new(format!("finiteness[{}]", fun.render(val)), v.universe());
            r.tick();
            let (found, method) = R::finiteness(w, val, *degree);
            r.note(method);
            match found {
                Some((p, q)) => {
                    let (pv, qv) = (fun.poly_apply(&p, val), fun.poly_apply(&q, val));
                    witness.push(format!("p = {p}"));
                    witness.push(format!("q = {q}"));
                    witness.push(format!("p(v) = q(v) = {}", fun.render(&pv)));
                    if p == q || pv != qv {
                        r.fail(Counterexample::new(fun.render(val), fun.render(&pv), fun.render(&qv)));
                    }
                }
                None => r.fail(Counterexample::new(fun.render(val), "no pair found", "-")),
            }
            r.finish()
        }
        CheckSpec::ExpectFail(inner) => return execute(w, inner),
        _ => unreachable!("transform checks handled above"),
    };
    (report, witness)
}

/// Closure of the δ-subtheory on a family: products and pushforwards of
/// δ-pairs, pullbacks of every δ-member, and zero absorption on the
/// zero-preserving members.
fn delta_closure<R: Rig>(v: &Verifier<'_, R>, set: &[Arc<ElementOf<R>>]) -> CheckReport {
    let site = v.th.site();
    let mut r = CheckReport::new("δ closure", v.universe());
    let deltas: Vec<(Arc<OpExpr>, &Arc<Morphism>, &Arc<Morphism>)> = set
        .iter()
        .filter_map(|c| match &c.rule {
            Rule::Delta { op, section } => Some((op.clone(), &c.support, section)),
            _ => None,
        })
        .collect();
    let mut products = 0;
    for (theta, f, s1) in &deltas {
        for (psi, g, s2) in deltas.iter().filter(|(_, g, _)| g.src == f.dst) {
            r.absorb(delta_product_identity(v, theta, f, s1, psi, g, s2));
            products += 1;
        }
    }
    let mut pullbacks = 0;
    for (theta, f, s) in &deltas {
        match site.morphisms_into(f.dst) {
            Ok(hs) => {
                for h in hs.iter() {
                    r.absorb(delta_pullback_identity(v, theta, f, s, h));
                    pullbacks += 1;
                }
            }
            Err(e) => r.error("pullback", &e),
        }
    }
    let mut pushforwards = 0;
    for (theta, u, s) in &deltas {
        for f in site.morphisms_from(u.src) {
            for g in site.morphisms_from(f.dst) {
                if site.compose(&g, &f).map(|m| m.id) == Ok(u.id) {
                    r.absorb(delta_pushforward_identity(v, theta, &f, &g, s));
                    pushforwards += 1;
                }
            }
        }
    }
    let zp: Vec<&Arc<ElementOf<R>>> = set.iter().filter(|c| preserves_zero(c)).collect();
    let mut absorptions = 0;
    for c in &zp {
        for d in zp.iter().filter(|d| d.support.src == c.support.dst) {
            r.absorb(zero_absorption(v, c, d));
            absorptions += 1;
        }
    }
    r.note(format!(
        "{products} δ products, {pullbacks} pullbacks, {pushforwards} pushforwards, {absorptions} zero-absorption pairs over {} zero-preserving members",
        zp.len()
    ));
    r.finish()
}

/// Sends zero to zero at every component, so that `0 • d = 0`.
fn preserves_zero<E>(c: &bivariant_core::bivariant::Element<E>) -> bool {
    match &c.rule {
        Rule::Unit | Rule::Zero | Rule::MulConst(_) => true,
        Rule::Delta { op, .. } | Rule::Induced(op) => op.zero_zero(),
        _ => false,
    }
}

/// Product, pullback and pushforward identities for `Δ(c, -, -)` and
/// `Δ(d, -, -)` over every sectioned base map they fit.
fn delta_cap_closure<R: Rig>(v: &Verifier<'_, R>, c: &Arc<ElementOf<R>>, d: &Arc<ElementOf<R>>) -> CheckReport {
    let site = v.th.site();
    let mut r = CheckReport::new(format!("Δ closure[{} ; {}]", c.label, d.label), v.universe());
    let sectioned: Vec<(Arc<Morphism>, Arc<Morphism>)> = site
        .base_morphisms()
        .iter()
        .flat_map(|f| site.sections_of(f).into_iter().map(move |s| (f.clone(), s)))
        .collect();
    let (mut products, mut pullbacks, mut pushforwards) = (0, 0, 0);
    for (f, s1) in sectioned.iter().filter(|(f, _)| f.src == c.support.src) {
        for (g, s2) in sectioned.iter().filter(|(g, _)| g.src == f.dst && g.src == d.support.src) {
            r.absorb(delta_cap_product_identity(v, c, f, s1, d, g, s2));
            products += 1;
        }
    }
    for e in [c, d] {
        for (f, s) in sectioned.iter().filter(|(f, _)| f.src == e.support.src) {
            match site.morphisms_into(f.dst) {
                Ok(hs) => {
                    for h in hs.iter() {
                        r.absorb(delta_cap_pullback_identity(v, e, f, s, h));
                        pullbacks += 1;
                    }
                }
                Err(err) => r.error("pullback", &err),
            }
        }
        for (u, s) in sectioned.iter().filter(|(u, _)| u.src == e.support.src) {
            for f in site.morphisms_from(u.src) {
                for g in site.morphisms_from(f.dst) {
                    if site.compose(&g, &f).map(|m| m.id) == Ok(u.id) {
                        r.absorb(delta_cap_pushforward_identity(v, e, &f, &g, s));
                        pushforwards += 1;
                    }
                }
            }
        }
    }
    r.note(format!("{products} products, {pullbacks} pullbacks, {pushforwards} pushforwards"));
    r.finish()
}
