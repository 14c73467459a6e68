//! Contravariant functors on a site with concrete value rigs.
//!
//! Three carriers are provided: [`RankVect`] (bundles over a discrete space
//! are rank functions), [`MonoidVect`] (formal natural combinations of line
//! classes in a finite commutative monoid) and [`TableCoh`] (functions into a
//! finite commutative ring given by tables). Pullback is precomposition.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{CheckReport, Counterexample};
use crate::site::{Morphism, ObjId, Site};

/// A commutative rig: commutative monoids under `add` and `mul` with `mul`
/// distributing over `add`.
pub trait Rig: fmt::Debug + Send + Sync {
    type Elem: Clone + PartialEq + Eq + Hash + Ord + fmt::Debug + Send + Sync;

    fn describe(&self) -> String;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn render(&self, a: &Self::Elem) -> String;

    /// Carrier values used to build probes.
    fn carriers(&self, bounds: &ProbePolicy) -> Vec<Self::Elem>;

    /// `n · 1`.
    fn nat(&self, n: u64) -> Self::Elem {
        // double-and-add
        let mut acc = self.zero();
        let mut base = self.one();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(&acc, &base);
            }
            base = self.add(&base, &base);
            k >>= 1;
        }
        acc
    }

    fn pow(&self, a: &Self::Elem, k: u32) -> Self::Elem {
        let mut acc = self.one();
        for _ in 0..k {
            acc = self.mul(&acc, a);
        }
        acc
    }

    /// Index of `a` in a finite carrier table, for table-driven operations.
    fn table_index(&self, _a: &Self::Elem) -> Option<usize> {
        None
    }

    fn table_elem(&self, _i: usize) -> Option<Self::Elem> {
        None
    }

    fn table_size(&self) -> Option<usize> {
        None
    }
}

/// Vector bundles over a discrete finite space, recorded by rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVect;

impl Rig for RankVect {
    type Elem = u64;

    fn describe(&self) -> String {
        "rankvect".into()
    }
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        a.checked_add(*b).expect("rank overflow in direct sum")
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a.checked_mul(*b).expect("rank overflow in tensor product")
    }
    fn render(&self, a: &u64) -> String {
        a.to_string()
    }
    fn carriers(&self, bounds: &ProbePolicy) -> Vec<u64> {
        (0..=bounds.bound).collect()
    }
    fn nat(&self, n: u64) -> u64 {
        n
    }
}

/// Formal natural-number combinations of elements of a finite commutative
/// monoid; tensor is convolution along the monoid law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoidVect {
    labels: Vec<String>,
    table: Vec<Vec<u32>>,
    identity: u32,
}

impl MonoidVect {
    /// Validates the table: closed, associative, commutative, unital.
    pub fn new(labels: Vec<String>, table: Vec<Vec<u32>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Config("monoid must have at least one element".into()));
        }
        if table.len() != n || table.iter().any(|r| r.len() != n || r.iter().any(|&x| x as usize >= n)) {
            return Err(Error::Config(format!("monoid table must be {n}x{n} over its elements")));
        }
        for a in 0..n {
            for b in 0..n {
                if table[a][b] != table[b][a] {
                    return Err(Error::Config(format!(
                        "monoid is not commutative at ({}, {})",
                        labels[a], labels[b]
                    )));
                }
                for c in 0..n {
                    let l = table[table[a][b] as usize][c];
                    let r = table[a][table[b][c] as usize];
                    if l != r {
                        return Err(Error::Config(format!(
                            "monoid is not associative at ({}, {}, {})",
                            labels[a], labels[b], labels[c]
                        )));
                    }
                }
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| table[e][a] as usize == a))
            .ok_or_else(|| Error::Config("monoid has no identity element".into()))? as u32;
        Ok(MonoidVect {
            labels,
            table,
            identity,
        })
    }

    /// The cyclic group of order `n` written multiplicatively, identity first.
    pub fn cyclic(n: usize, names: &[&str]) -> Result<Self> {
        let labels: Vec<String> = if names.len() == n {
            names.iter().map(|s| s.to_string()).collect()
        } else {
            (0..n).map(|i| format!("g{i}")).collect()
        };
        let table = (0..n)
            .map(|a| (0..n).map(|b| ((a + b) % n) as u32).collect())
            .collect();
        Self::new(labels, table)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn element(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|i| i as u32)
    }

    /// The line class `δ_m`.
    pub fn delta(&self, m: u32) -> Vec<u64> {
        let mut v = vec![0; self.labels.len()];
        v[m as usize] = 1;
        v
    }

    pub fn table(&self) -> &[Vec<u32>] {
        &self.table
    }
}

impl Rig for MonoidVect {
    type Elem = Vec<u64>;

    fn describe(&self) -> String {
        format!("monoidvect[{}]", self.labels.join(","))
    }
    fn zero(&self) -> Vec<u64> {
        vec![0; self.labels.len()]
    }
    fn one(&self) -> Vec<u64> {
        self.delta(self.identity)
    }
    fn add(&self, a: &Vec<u64>, b: &Vec<u64>) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.checked_add(*y).expect("coefficient overflow"))
            .collect()
    }
    fn mul(&self, a: &Vec<u64>, b: &Vec<u64>) -> Vec<u64> {
        let mut out = vec![0u64; self.labels.len()];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                if y == 0 {
                    continue;
                }
                let k = self.table[i][j] as usize;
                out[k] = out[k]
                    .checked_add(x.checked_mul(y).expect("coefficient overflow"))
                    .expect("coefficient overflow");
            }
        }
        out
    }
    fn render(&self, a: &Vec<u64>) -> String {
        let terms: Vec<String> = a
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| {
                if c == 1 {
                    self.labels[i].clone()
                } else {
                    format!("{c}{}", self.labels[i])
                }
            })
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join("+")
        }
    }
    fn carriers(&self, bounds: &ProbePolicy) -> Vec<Vec<u64>> {
        let n = self.labels.len();
        let mut out = Vec::new();
        let mut cur = vec![0u64; n];
        loop {
            if cur.iter().filter(|&&c| c > 0).count() as u64 <= bounds.support {
                out.push(cur.clone());
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                cur[i] += 1;
                if cur[i] <= bounds.coeff {
                    break;
                }
                cur[i] = 0;
            }
        }
    }
    fn nat(&self, n: u64) -> Vec<u64> {
        let mut v = self.zero();
        v[self.identity as usize] = n;
        v
    }
}

/// A finite commutative ring with 1 given by addition and multiplication
/// tables, with an optional degree map carried as metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableCoh {
    labels: Vec<String>,
    add: Vec<Vec<u32>>,
    mul: Vec<Vec<u32>>,
    zero: u32,
    one: u32,
    degrees: Option<Vec<i32>>,
}

impl TableCoh {
    /// Validates the ring axioms exhaustively.
    pub fn new(
        labels: Vec<String>,
        add: Vec<Vec<u32>>,
        mul: Vec<Vec<u32>>,
        degrees: Option<Vec<i32>>,
    ) -> Result<Self> {
        let n = labels.len();
        let square = |t: &Vec<Vec<u32>>| t.len() == n && t.iter().all(|r| r.len() == n && r.iter().all(|&x| (x as usize) < n));
        if n == 0 || !square(&add) || !square(&mul) {
            return Err(Error::Config(format!("ring tables must be {n}x{n} over the listed elements")));
        }
        if let Some(d) = &degrees {
            if d.len() != n {
                return Err(Error::Config("degree map must list one degree per element".into()));
            }
        }
        let zero = (0..n)
            .find(|&e| (0..n).all(|a| add[e][a] as usize == a))
            .ok_or_else(|| Error::Config("ring has no additive identity".into()))?;
        let one = (0..n)
            .find(|&e| (0..n).all(|a| mul[e][a] as usize == a))
            .ok_or_else(|| Error::Config("ring has no multiplicative identity".into()))?;
        let bad = |what: &str| Err(Error::Config(format!("ring tables violate {what}")));
        for a in 0..n {
            if !(0..n).any(|b| add[a][b] as usize == zero) {
                return bad("additive inverses");
            }
            for b in 0..n {
                if add[a][b] != add[b][a] {
                    return bad("commutativity of addition");
                }
                if mul[a][b] != mul[b][a] {
                    return bad("commutativity of multiplication");
                }
                for c in 0..n {
                    if add[add[a][b] as usize][c] != add[a][add[b][c] as usize] {
                        return bad("associativity of addition");
                    }
                    if mul[mul[a][b] as usize][c] != mul[a][mul[b][c] as usize] {
                        return bad("associativity of multiplication");
                    }
                    if mul[a][add[b][c] as usize] != add[mul[a][b] as usize][mul[a][c] as usize] {
                        return bad("distributivity");
                    }
                }
            }
        }
        Ok(TableCoh {
            labels,
            add,
            mul,
            zero: zero as u32,
            one: one as u32,
            degrees,
        })
    }

    /// `Z/n` with elements labelled `0..n-1`.
    pub fn zmod(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("Z/n needs n >= 2".into()));
        }
        let labels = (0..n).map(|i| i.to_string()).collect();
        let add = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let mul = (0..n)
            .map(|a| (0..n).map(|b| ((a as u64 * b as u64) % n as u64) as u32).collect())
            .collect();
        Self::new(labels, add, mul, None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn element(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|i| i as u32)
    }

    pub fn degree(&self, a: u32) -> Option<i32> {
        self.degrees.as_ref().map(|d| d[a as usize])
    }
}

impl Rig for TableCoh {
    type Elem = u32;

    fn describe(&self) -> String {
        format!("tablecoh[{}]", self.labels.join(","))
    }
    fn zero(&self) -> u32 {
        self.zero
    }
    fn one(&self) -> u32 {
        self.one
    }
    fn add(&self, a: &u32, b: &u32) -> u32 {
        self.add[*a as usize][*b as usize]
    }
    fn mul(&self, a: &u32, b: &u32) -> u32 {
        self.mul[*a as usize][*b as usize]
    }
    fn render(&self, a: &u32) -> String {
        self.labels[*a as usize].clone()
    }
    fn carriers(&self, _bounds: &ProbePolicy) -> Vec<u32> {
        (0..self.labels.len() as u32).collect()
    }
    fn table_index(&self, a: &u32) -> Option<usize> {
        Some(*a as usize)
    }
    fn table_elem(&self, i: usize) -> Option<u32> {
        (i < self.labels.len()).then_some(i as u32)
    }
    fn table_size(&self) -> Option<usize> {
        Some(self.labels.len())
    }
}

/// Runtime choice of value rig, as declared in a scenario.
#[derive(Debug, Clone)]
pub enum ValueRig {
    RankVect,
    MonoidVect(MonoidVect),
    TableCoh(TableCoh),
}

/// A value of the functor on one object: one carrier element per point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value<E> {
    pub object: ObjId,
    pub entries: Vec<E>,
}

impl<E> Value<E> {
    pub fn new(object: ObjId, entries: Vec<E>) -> Self {
        Value { object, entries }
    }
}

/// Natural-coefficient polynomial, coefficients listed from degree 0 up.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Polynomial(Vec<u64>);

impl Polynomial {
    pub fn new(mut coeffs: Vec<u64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Polynomial(coeffs)
    }

    /// `c · x^k`.
    pub fn monomial(c: u64, k: usize) -> Self {
        let mut v = vec![0; k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn constant(c: u64) -> Self {
        Self::new(vec![c])
    }

    /// Parses signed coefficients, rejecting negative ones.
    pub fn from_signed(coeffs: &[i64]) -> Result<Self> {
        let mut out = Vec::with_capacity(coeffs.len());
        for &c in coeffs {
            if c < 0 {
                return Err(Error::Config(format!("polynomial coefficient {c} is negative")));
            }
            out.push(c as u64);
        }
        Ok(Self::new(out))
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.0
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn constant_term(&self) -> u64 {
        self.0.first().copied().unwrap_or(0)
    }

    pub fn eval_int(&self, x: i128) -> i128 {
        self.0.iter().rev().fold(0i128, |acc, &c| acc * x + c as i128)
    }

    /// Horner evaluation in an arbitrary commutative rig.
    pub fn eval_in<R: Rig>(&self, rig: &R, x: &R::Elem) -> R::Elem {
        let mut acc = rig.zero();
        for &c in self.0.iter().rev() {
            acc = rig.add(&rig.mul(&acc, x), &rig.nat(c));
        }
        acc
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (k, &c) in self.0.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let t = match (k, c) {
                (0, c) => c.to_string(),
                (1, 1) => "x".to_string(),
                (1, c) => format!("{c}x"),
                (k, 1) => format!("x^{k}"),
                (k, c) => format!("{c}x^{k}"),
            };
            terms.push(t);
        }
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join("+"))
        }
    }
}

/// A contravariant functor `F*` on a site with values in a rig; pullback
/// along `g` is precomposition with `g`.
#[derive(Debug, Clone)]
pub struct FunctorInstance<R: Rig> {
    pub rig: R,
    pub site: Arc<Site>,
}

impl<R: Rig> FunctorInstance<R> {
    pub fn new(rig: R, site: Arc<Site>) -> Self {
        FunctorInstance { rig, site }
    }

    pub fn constant(&self, obj: ObjId, e: R::Elem) -> Value<R::Elem> {
        Value::new(obj, vec![e; self.site.object(obj).len()])
    }

    pub fn zero(&self, obj: ObjId) -> Value<R::Elem> {
        self.constant(obj, self.rig.zero())
    }

    /// The trivial line bundle `𝟙`.
    pub fn one(&self, obj: ObjId) -> Value<R::Elem> {
        self.constant(obj, self.rig.one())
    }

    /// Builds a value, checking that it has one entry per element of `obj`.
    pub fn value(&self, obj: ObjId, entries: Vec<R::Elem>) -> Result<Value<R::Elem>> {
        let o = self.site.object(obj);
        if entries.len() != o.len() {
            return Err(Error::Domain {
                expected: format!("{} entries on {}", o.len(), o.name),
                found: format!("{} entries", entries.len()),
            });
        }
        Ok(Value::new(obj, entries))
    }

    fn expect_on(&self, v: &Value<R::Elem>, obj: ObjId) -> Result<()> {
        if v.object == obj {
            Ok(())
        } else {
            Err(Error::Domain {
                expected: self.site.object_name(obj),
                found: self.site.object_name(v.object),
            })
        }
    }

    /// `g*(v) = v ∘ g`.
    pub fn pullback(&self, g: &Morphism, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.expect_on(v, g.dst)?;
        Ok(Value::new(
            g.src,
            g.map.iter().map(|&j| v.entries[j as usize].clone()).collect(),
        ))
    }

    pub fn add(&self, v: &Value<R::Elem>, w: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.expect_on(w, v.object)?;
        Ok(Value::new(
            v.object,
            v.entries.iter().zip(&w.entries).map(|(a, b)| self.rig.add(a, b)).collect(),
        ))
    }

    pub fn mul(&self, v: &Value<R::Elem>, w: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.expect_on(w, v.object)?;
        Ok(Value::new(
            v.object,
            v.entries.iter().zip(&w.entries).map(|(a, b)| self.rig.mul(a, b)).collect(),
        ))
    }

    /// `Σ a_i · v^{⊗i}` with `v^{⊗0} = 𝟙`.
    pub fn poly_apply(&self, p: &Polynomial, v: &Value<R::Elem>) -> Value<R::Elem> {
        Value::new(
            v.object,
            v.entries.iter().map(|e| p.eval_in(&self.rig, e)).collect(),
        )
    }

    pub fn render(&self, v: &Value<R::Elem>) -> String {
        let o = self.site.object(v.object);
        let body: Vec<String> = v.entries.iter().map(|e| self.rig.render(e)).collect();
        format!("{}:({})", o.name, body.join(","))
    }

    pub fn describe(&self) -> String {
        format!("{} on {}", self.rig.describe(), self.site.describe())
    }
}

/// Anything with a pullback action, so that functor-law checking can run
/// against deliberately broken fixtures as well as real functors.
pub trait Presheaf<R: Rig> {
    fn functor(&self) -> &FunctorInstance<R>;
    fn pull(&self, g: &Morphism, v: &Value<R::Elem>) -> Result<Value<R::Elem>>;
}

impl<R: Rig> Presheaf<R> for FunctorInstance<R> {
    fn functor(&self) -> &FunctorInstance<R> {
        self
    }
    fn pull(&self, g: &Morphism, v: &Value<R::Elem>) -> Result<Value<R::Elem>> {
        self.pullback(g, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    /// Every tuple of bounded carriers when the object is small enough,
    /// otherwise a seeded sample.
    Exhaustive,
    /// Seeded sample on every object.
    Random,
}

/// Probe generation policy and bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbePolicy {
    pub kind: ProbeKind,
    /// Maximum rank (RankVect).
    pub bound: u64,
    /// Maximum coefficient (MonoidVect).
    pub coeff: u64,
    /// Maximum number of nonzero coefficients (MonoidVect).
    pub support: u64,
    /// Random tuples drawn when an object is not enumerated exhaustively.
    pub samples: usize,
    pub seed: u64,
    /// Largest per-object tuple count that is enumerated exhaustively.
    pub cap: usize,
}

impl Default for ProbePolicy {
    fn default() -> Self {
        ProbePolicy {
            kind: ProbeKind::Exhaustive,
            bound: 3,
            coeff: 2,
            support: 2,
            samples: 24,
            seed: 42,
            cap: 256,
        }
    }
}

impl ProbePolicy {
    pub fn describe(&self) -> String {
        let kind = match self.kind {
            ProbeKind::Exhaustive => "exhaustive",
            ProbeKind::Random => "random",
        };
        format!(
            "probes({kind}, bound={}, coeff={}, support={}, cap={}, samples={}, seed={})",
            self.bound, self.coeff, self.support, self.cap, self.samples, self.seed
        )
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-object finite probe values, generated lazily and memoised.
///
/// Every probe list contains the zero value and the unit value first.
pub struct ProbeSet<R: Rig> {
    pub policy: ProbePolicy,
    cache: Mutex<HashMap<ObjId, Arc<Vec<Value<R::Elem>>>>>,
}

impl<R: Rig> fmt::Debug for ProbeSet<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProbeSet").field("policy", &self.policy).finish()
    }
}

impl<R: Rig> ProbeSet<R> {
    pub fn new(policy: ProbePolicy) -> Self {
        ProbeSet {
            policy,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn describe(&self) -> String {
        self.policy.describe()
    }

    /// Probe values on `obj`.
    pub fn on(&self, fun: &FunctorInstance<R>, obj: ObjId) -> Arc<Vec<Value<R::Elem>>> {
        if let Some(v) = self.cache.lock().unwrap().get(&obj) {
            return v.clone();
        }
        let generated = Arc::new(self.generate(fun, obj));
        self.cache
            .lock()
            .unwrap()
            .entry(obj)
            .or_insert(generated)
            .clone()
    }

    /// Whether `obj` is covered exhaustively rather than sampled.
    pub fn is_exhaustive_on(&self, fun: &FunctorInstance<R>, obj: ObjId) -> bool {
        if self.policy.kind != ProbeKind::Exhaustive {
            return false;
        }
        let k = fun.rig.carriers(&self.policy).len();
        let n = fun.site.object(obj).len();
        tuple_count(k, n).is_some_and(|c| c <= self.policy.cap)
    }

    fn generate(&self, fun: &FunctorInstance<R>, obj: ObjId) -> Vec<Value<R::Elem>> {
        let carriers = fun.rig.carriers(&self.policy);
        let n = fun.site.object(obj).len();
        let mut out = vec![fun.zero(obj), fun.one(obj)];
        let mut seen: std::collections::HashSet<Vec<R::Elem>> =
            out.iter().map(|v| v.entries.clone()).collect();
        let mut push = |entries: Vec<R::Elem>, out: &mut Vec<Value<R::Elem>>| {
            if seen.insert(entries.clone()) {
                out.push(Value::new(obj, entries));
            }
        };
        if self.is_exhaustive_on(fun, obj) {
            let mut idx = vec![0usize; n];
            loop {
                push(idx.iter().map(|&i| carriers[i].clone()).collect(), &mut out);
                let mut i = n;
                loop {
                    if i == 0 {
                        return out;
                    }
                    i -= 1;
                    idx[i] += 1;
                    if idx[i] < carriers.len() {
                        break;
                    }
                    idx[i] = 0;
                }
            }
        }
        for c in &carriers {
            push(vec![c.clone(); n], &mut out);
        }
        let name = fun.site.object(obj).name.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.policy.seed ^ fnv1a(name.as_bytes()));
        let target = out.len() + self.policy.samples;
        let mut attempts = 0;
        while out.len() < target && attempts < 20 * self.policy.samples + 20 {
            attempts += 1;
            let entries = (0..n)
                .map(|_| carriers[rng.gen_range(0..carriers.len())].clone())
                .collect();
            push(entries, &mut out);
        }
        out
    }
}

fn tuple_count(k: usize, n: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc.checked_mul(k)?;
    }
    Some(acc)
}

/// Checks `id* = id` on every declared object and `(g∘h)* = h*∘g*` on every
/// composable pair of base morphisms, over all probes.
pub fn check_functor_laws<R: Rig, P: Presheaf<R>>(presheaf: &P, probes: &ProbeSet<R>) -> CheckReport {
    let fun = presheaf.functor();
    let site = &fun.site;
    let mut report = CheckReport::new(
        "functor-laws",
        format!("{}; {}", fun.describe(), probes.describe()),
    );
    for &x in site.base_objects() {
        let id = site.identity(x);
        for v in probes.on(fun, x).iter() {
            report.tick();
            match presheaf.pull(&id, v) {
                Ok(w) if &w == v => {}
                Ok(w) => report.fail(
                    Counterexample::new(fun.render(v), fun.render(&w), fun.render(v))
                        .bind("law", "identity")
                        .bind("id", site.render_morphism(&id)),
                ),
                Err(e) => report.error("identity", &e),
            }
        }
    }
    for g in site.base_morphisms() {
        for h in site.base_morphisms().iter().filter(|h| h.dst == g.src) {
            let gh = match site.compose(g, h) {
                Ok(c) => c,
                Err(e) => {
                    report.error("compose", &e);
                    continue;
                }
            };
            for v in probes.on(fun, g.dst).iter() {
                report.tick();
                let lhs = presheaf.pull(&gh, v);
                let rhs = presheaf.pull(g, v).and_then(|w| presheaf.pull(h, &w));
                match (lhs, rhs) {
                    (Ok(l), Ok(r)) if l == r => {}
                    (Ok(l), Ok(r)) => report.fail(
                        Counterexample::new(fun.render(v), fun.render(&l), fun.render(&r))
                            .bind("law", "composition")
                            .bind("g", site.render_morphism(g))
                            .bind("h", site.render_morphism(h)),
                    ),
                    (Err(e), _) | (_, Err(e)) => report.error("composition", &e),
                }
            }
        }
    }
    report.finish()
}

/// Rig laws pointwise on probe values of every declared object, and the
/// homomorphism property of pullback along every base morphism.
pub fn check_rig_laws<R: Rig>(fun: &FunctorInstance<R>, probes: &ProbeSet<R>) -> CheckReport {
    let site = &fun.site;
    let mut report = CheckReport::new("rig-laws", format!("{}; {}", fun.describe(), probes.describe()));
    let r = &fun.rig;
    let mut carriers = r.carriers(&probes.policy);
    carriers.truncate(12);
    for a in &carriers {
        for b in &carriers {
            for c in &carriers {
                report.tick();
                let checks = [
                    ("add-assoc", r.add(&r.add(a, b), c), r.add(a, &r.add(b, c))),
                    ("mul-assoc", r.mul(&r.mul(a, b), c), r.mul(a, &r.mul(b, c))),
                    ("add-comm", r.add(a, b), r.add(b, a)),
                    ("mul-comm", r.mul(a, b), r.mul(b, a)),
                    ("add-unit", r.add(a, &r.zero()), a.clone()),
                    ("mul-unit", r.mul(a, &r.one()), a.clone()),
                    ("distrib", r.mul(a, &r.add(b, c)), r.add(&r.mul(a, b), &r.mul(a, c))),
                ];
                for (law, l, rr) in checks {
                    if l != rr {
                        report.fail(
                            Counterexample::new(
                                format!("({}, {}, {})", r.render(a), r.render(b), r.render(c)),
                                r.render(&l),
                                r.render(&rr),
                            )
                            .bind("law", law),
                        );
                    }
                }
            }
        }
    }
    for g in site.base_morphisms() {
        let vals = probes.on(fun, g.dst);
        let vals: Vec<_> = vals.iter().take(16).collect();
        for v in &vals {
            for w in &vals {
                report.tick();
                let pairs = [
                    ("pullback-add", fun.add(v, w).and_then(|s| fun.pullback(g, &s)), fun.pullback(g, v).and_then(|a| fun.add(&a, &fun.pullback(g, w)?))),
                    ("pullback-mul", fun.mul(v, w).and_then(|s| fun.pullback(g, &s)), fun.pullback(g, v).and_then(|a| fun.mul(&a, &fun.pullback(g, w)?))),
                ];
                for (law, l, rr) in pairs {
                    match (l, rr) {
                        (Ok(l), Ok(rr)) if l == rr => {}
                        (Ok(l), Ok(rr)) => report.fail(
                            Counterexample::new(
                                format!("{} ; {}", fun.render(v), fun.render(w)),
                                fun.render(&l),
                                fun.render(&rr),
                            )
                            .bind("law", law)
                            .bind("g", site.render_morphism(g)),
                        ),
                        (Err(e), _) | (_, Err(e)) => report.error(law, &e),
                    }
                }
            }
        }
        report.tick();
        let zero_ok = fun.pullback(g, &fun.zero(g.dst)).map(|z| z == fun.zero(g.src));
        let one_ok = fun.pullback(g, &fun.one(g.dst)).map(|z| z == fun.one(g.src));
        if zero_ok != Ok(true) || one_ok != Ok(true) {
            report.fail(
                Counterexample::new("0 / 1", format!("{zero_ok:?} / {one_ok:?}"), "Ok(true) / Ok(true)")
                    .bind("law", "pullback-units")
                    .bind("g", site.render_morphism(g)),
            );
        }
    }
    report.finish()
}

/// Two distinct natural-coefficient polynomials agreeing on a rank value.
///
/// With `d(x) = Π (x - r)` over the distinct ranks `r` of `v`, `p` collects
/// the positive coefficients of `d` and `q` the negated negative ones, so
/// `p - q = d` vanishes at every rank while `p ≠ q` since `d` is monic.
pub fn finiteness_witness(
    fun: &FunctorInstance<RankVect>,
    v: &Value<u64>,
) -> Result<(Polynomial, Polynomial)> {
    if v.entries.is_empty() {
        return Err(Error::Precondition("finiteness witness needs a nonempty object".into()));
    }
    let mut ranks: Vec<u64> = v.entries.clone();
    ranks.sort_unstable();
    ranks.dedup();
    let mut d: Vec<i128> = vec![1];
    for &r in &ranks {
        // multiply by (x - r)
        let mut next = vec![0i128; d.len() + 1];
        for (k, &c) in d.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r as i128;
        }
        d = next;
    }
    let to_u64 = |c: i128| {
        u64::try_from(c).map_err(|_| Error::Overflow("finiteness witness coefficients".into()))
    };
    let p = Polynomial::new(d.iter().map(|&c| to_u64(c.max(0))).collect::<Result<_>>()?);
    let q = Polynomial::new(d.iter().map(|&c| to_u64((-c).max(0))).collect::<Result<_>>()?);
    debug_assert_eq!(fun.poly_apply(&p, v), fun.poly_apply(&q, v));
    Ok((p, q))
}

/// Bounded search for `p ≠ q` with `p(v) = q(v)`, degrees and coefficients
/// at most `bound`.
///
/// Polynomials are enumerated by degree, then by coefficient vector
/// `(a0, a1, ...)` lexicographically; the first polynomial whose value was
/// already produced is returned together with the earliest polynomial
/// producing that value.
pub fn bounded_finiteness_search<R: Rig>(
    fun: &FunctorInstance<R>,
    v: &Value<R::Elem>,
    bound: u64,
) -> Option<(Polynomial, Polynomial)> {
    let mut seen: HashMap<Vec<R::Elem>, Polynomial> = HashMap::new();
    for degree in 0..=bound as usize {
        let mut coeffs = vec![0u64; degree + 1];
        if degree > 0 {
            coeffs[degree] = 1;
        }
        loop {
            let p = Polynomial::new(coeffs.clone());
            let value = fun.poly_apply(&p, v).entries;
            match seen.get(&value) {
                Some(q) => return Some((p, q.clone())),
                None => {
                    seen.insert(value, p);
                }
            }
            // next coefficient vector, a0 most significant, leading coeff >= 1
            let mut i = degree + 1;
            let advanced = loop {
                if i == 0 {
                    break false;
                }
                i -= 1;
                coeffs[i] += 1;
                if coeffs[i] <= bound {
                    break true;
                }
                coeffs[i] = if degree > 0 && i == degree { 1 } else { 0 };
            };
            if !advanced {
                break;
            }
        }
    }
    None
}

/// [`bounded_finiteness_search`] for monoid-valued bundles.
pub fn finiteness_witness_monoid(
    fun: &FunctorInstance<MonoidVect>,
    v: &Value<Vec<u64>>,
    bound: u64,
) -> Result<Option<(Polynomial, Polynomial)>> {
    if bound == 0 {
        return Err(Error::Precondition("degree bound must be at least 1".into()));
    }
    Ok(bounded_finiteness_search(fun, v, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::SiteBuilder;

    fn site() -> Arc<Site> {
        SiteBuilder::new().object("X", ["a", "b"]).build().unwrap()
    }

    #[test]
    fn pullback_is_precomposition() {
        let site = site();
        let fun = FunctorInstance::new(RankVect, site.clone());
        let x = site.object_id("X").unwrap();
        let v = fun.value(x, vec![1, 2]).unwrap();
        let at_b = site.point(x, 1).unwrap();
        assert_eq!(fun.pullback(&at_b, &v).unwrap().entries, vec![2]);
        assert_eq!(fun.pullback(&site.identity(x), &v).unwrap(), v);
        let c = fun.constant(x, 5);
        assert_eq!(fun.pullback(&at_b, &c).unwrap().entries, vec![5]);
        let wrong = fun.one(site.terminal());
        assert!(matches!(fun.pullback(&at_b, &wrong), Err(Error::Domain { .. })));
    }

    #[test]
    fn arithmetic() {
        let site = site();
        let pt = site.terminal();
        let fun = FunctorInstance::new(RankVect, site.clone());
        let v = fun.value(pt, vec![2]).unwrap();
        let w = fun.value(pt, vec![3]).unwrap();
        assert_eq!(fun.mul(&v, &w).unwrap().entries, vec![6]);
        assert_eq!(fun.add(&v, &fun.zero(pt)).unwrap(), v);

        let c2 = MonoidVect::cyclic(2, &["e", "g"]).unwrap();
        let mfun = FunctorInstance::new(c2.clone(), site.clone());
        let dg = mfun.value(pt, vec![c2.delta(1)]).unwrap();
        assert_eq!(mfun.mul(&dg, &dg).unwrap().entries, vec![c2.delta(0)]);
    }

    #[test]
    fn poly_apply_examples() {
        let site = site();
        let pt = site.terminal();
        let fun = FunctorInstance::new(RankVect, site.clone());
        let v = fun.value(pt, vec![3]).unwrap();
        let p = Polynomial::new(vec![0, 2, 1]);
        assert_eq!(fun.poly_apply(&p, &v).entries, vec![15]);
        assert_eq!(fun.poly_apply(&Polynomial::monomial(1, 1), &v), v);
        let r4 = fun.constant(pt, 4);
        assert_eq!(fun.poly_apply(&Polynomial::constant(7), &r4).entries, vec![7]);
        assert!(Polynomial::from_signed(&[1, -2]).is_err());
    }

    #[test]
    fn polynomial_display() {
        assert_eq!(Polynomial::new(vec![2, 0, 1]).to_string(), "x^2+2");
        assert_eq!(Polynomial::new(vec![0, 3]).to_string(), "3x");
        assert_eq!(Polynomial::new(vec![]).to_string(), "0");
    }

    #[test]
    fn rank_finiteness_witness() {
        let site = site();
        let fun = FunctorInstance::new(RankVect, site.clone());
        let x = site.object_id("X").unwrap();
        let v = fun.value(x, vec![1, 2]).unwrap();
        let (p, q) = finiteness_witness(&fun, &v).unwrap();
        assert_eq!(p, Polynomial::new(vec![2, 0, 1]));
        assert_eq!(q, Polynomial::new(vec![0, 3]));
        let zero = fun.zero(site.terminal());
        let (p, q) = finiteness_witness(&fun, &zero).unwrap();
        assert_eq!((p, q), (Polynomial::monomial(1, 1), Polynomial::new(vec![])));
    }

    #[test]
    fn monoid_finiteness_search() {
        let site = site();
        let pt = site.terminal();
        let c2 = MonoidVect::cyclic(2, &["e", "g"]).unwrap();
        let fun = FunctorInstance::new(c2.clone(), site.clone());
        let dg = fun.value(pt, vec![c2.delta(1)]).unwrap();
        let (p, q) = finiteness_witness_monoid(&fun, &dg, 3).unwrap().unwrap();
        assert_eq!(p, Polynomial::monomial(1, 2));
        assert_eq!(q, Polynomial::constant(1));
        let one = fun.one(pt);
        let (p, q) = finiteness_witness_monoid(&fun, &one, 3).unwrap().unwrap();
        assert_eq!((p, q), (Polynomial::monomial(1, 1), Polynomial::constant(1)));
        assert!(finiteness_witness_monoid(&fun, &one, 0).is_err());
    }

    #[test]
    fn monoid_without_repetition_has_no_witness() {
        let site = site();
        let pt = site.terminal();
        // 1, m, m^2, m^3 and an absorbing z = m^4 = m^5 = ...
        let labels: Vec<String> = ["1", "m", "m2", "m3", "z"].iter().map(|s| s.to_string()).collect();
        let table = (0..5u32)
            .map(|a| {
                (0..5u32)
                    .map(|b| if a == 4 || b == 4 || a + b > 3 { 4 } else { a + b })
                    .collect()
            })
            .collect();
        let m = MonoidVect::new(labels, table).unwrap();
        let fun = FunctorInstance::new(m.clone(), site.clone());
        let v = fun.value(pt, vec![m.delta(1)]).unwrap();
        assert_eq!(finiteness_witness_monoid(&fun, &v, 3).unwrap(), None);
    }

    #[test]
    fn invalid_tables_rejected() {
        let labels: Vec<String> = vec!["0".into(), "1".into()];
        // multiplication not distributive
        let add = vec![vec![0, 1], vec![1, 0]];
        let mul = vec![vec![1, 1], vec![1, 1]];
        assert!(TableCoh::new(labels.clone(), add, mul, None).is_err());
        assert!(MonoidVect::new(labels, vec![vec![0, 0], vec![1, 1]]).is_err());
        assert!(TableCoh::zmod(4).is_ok());
    }

    #[test]
    fn probes_contain_zero_and_unit() {
        let site = site();
        let fun = FunctorInstance::new(RankVect, site.clone());
        let probes = ProbeSet::new(ProbePolicy::default());
        let x = site.object_id("X").unwrap();
        let vals = probes.on(&fun, x);
        assert_eq!(vals.len(), 16);
        assert_eq!(vals[0], fun.zero(x));
        assert_eq!(vals[1], fun.one(x));
    }

    #[test]
    fn functor_laws_hold_for_precomposition() {
        let site = site();
        let fun = FunctorInstance::new(TableCoh::zmod(4).unwrap(), site.clone());
        let probes = ProbeSet::new(ProbePolicy::default());
        let r = check_functor_laws(&fun, &probes);
        assert!(r.passed, "{r}");
        assert!(check_rig_laws(&fun, &probes).passed);
    }
}
