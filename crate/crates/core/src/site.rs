//! Finite base category: finite sets and total functions, with canonical
//! fiber products, pasting and section enumeration.
//!
//! Objects and morphisms are interned in an append-only arena. Declared
//! ("base") objects and morphisms are fixed when the site is built; fiber
//! products are materialised on first request and memoised, so repeated
//! requests always return the same canonical square.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of morphisms a `full` site may enumerate.
pub const MAX_FULL_MORPHISMS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MorId(pub u32);

/// Pair structure of a canonical fiber-product apex: the elements are the
/// listed `(left, right)` index pairs, in lexicographic order.
#[derive(Debug)]
pub struct ApexInfo {
    pub left: ObjId,
    pub right: ObjId,
    pub pairs: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), u32>,
}

impl ApexInfo {
    pub fn position(&self, left: u32, right: u32) -> Option<u32> {
        self.index.get(&(left, right)).copied()
    }
}

#[derive(Debug)]
pub struct FinObject {
    pub id: ObjId,
    pub name: String,
    pub labels: Vec<String>,
    /// 0 for declared objects, otherwise one more than the deepest factor.
    pub depth: u32,
    pub apex: Option<ApexInfo>,
}

impl FinObject {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A total function between two finite objects. Morphisms with equal
/// `(src, dst, map)` are interned to the same id.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct Morphism {
    pub id: MorId,
    pub src: ObjId,
    pub dst: ObjId,
    pub map: Vec<u32>,
}

impl Morphism {
    #[inline]
    pub fn apply(&self, i: u32) -> u32 {
        self.map[i as usize]
    }

    pub fn is_surjective(&self, dst_len: usize) -> bool {
        let mut hit = vec![false; dst_len];
        for &j in &self.map {
            hit[j as usize] = true;
        }
        hit.into_iter().all(|b| b)
    }
}

/// Canonical fiber square of the cospan `f: X -> Y <- Y': g`.
///
/// ```text
///   apex --top--> X
///    |            |
///   left          f
///    v            v
///    Y' ---g----> Y
/// ```
#[derive(Debug, Clone)]
pub struct FiberSquare {
    pub f: Arc<Morphism>,
    pub g: Arc<Morphism>,
    pub apex: ObjId,
    pub top: Arc<Morphism>,
    pub left: Arc<Morphism>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteMode {
    /// Every function between declared objects.
    Full,
    /// Closure of the declared generators under composition.
    Generated,
}

impl fmt::Display for SiteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteMode::Full => f.write_str("full"),
            SiteMode::Generated => f.write_str("generated"),
        }
    }
}

type ApexKey = (ObjId, ObjId, Vec<(u32, u32)>);
type MorKey = (ObjId, ObjId, Vec<u32>);

#[derive(Default)]
struct Arena {
    objects: Vec<Arc<FinObject>>,
    apex_index: HashMap<ApexKey, ObjId>,
    morphisms: Vec<Arc<Morphism>>,
    mor_index: HashMap<MorKey, MorId>,
    squares: HashMap<(MorId, MorId), FiberSquare>,
    into: HashMap<ObjId, Arc<Vec<Arc<Morphism>>>>,
    derived: HashMap<(Derived, MorId, MorId, MorId), Arc<Morphism>>,
}

/// Memo keys for morphisms derived from fiber-square data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Derived {
    Paste,
    PulledSection,
    ProductBridge,
    PullbackBridge,
    Transport,
    PushforwardMap,
}

/// A finite site. Shareable across threads; all interior state is append-only.
pub struct Site {
    arena: RwLock<Arena>,
    mode: SiteMode,
    closure_depth: u32,
    terminal: ObjId,
    base_objects: Vec<ObjId>,
    base_morphisms: Vec<Arc<Morphism>>,
    object_names: HashMap<String, ObjId>,
    morphism_names: HashMap<String, MorId>,
    display_names: HashMap<MorId, String>,
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Site")
            .field("mode", &self.mode)
            .field("closure_depth", &self.closure_depth)
            .field("objects", &self.base_objects.len())
            .field("morphisms", &self.base_morphisms.len())
            .finish()
    }
}

/// Declarative description of a site; see [`SiteBuilder::build`].
#[derive(Debug, Clone)]
pub struct SiteBuilder {
    objects: Vec<(String, Vec<String>)>,
    morphisms: Vec<(String, String, String, Vec<String>)>,
    mode: SiteMode,
    closure_depth: u32,
    terminal: Option<String>,
}

impl Default for SiteBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl SiteBuilder {
    pub fn new() -> Self {
        SiteBuilder {
            objects: Vec::new(),
            morphisms: Vec::new(),
            mode: SiteMode::Full,
            closure_depth: 2,
            terminal: None,
        }
    }

    pub fn object<S: Into<String>>(mut self, name: &str, labels: impl IntoIterator<Item = S>) -> Self {
        self.objects
            .push((name.to_string(), labels.into_iter().map(Into::into).collect()));
        self
    }

    /// Declares a named morphism by listing images in source-element order.
    pub fn morphism<S: Into<String>>(
        mut self,
        name: &str,
        src: &str,
        dst: &str,
        images: impl IntoIterator<Item = S>,
    ) -> Self {
        self.morphisms.push((
            name.to_string(),
            src.to_string(),
            dst.to_string(),
            images.into_iter().map(Into::into).collect(),
        ));
        self
    }

    pub fn mode(mut self, mode: SiteMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn closure_depth(mut self, depth: u32) -> Self {
        self.closure_depth = depth;
        self
    }

    pub fn terminal(mut self, name: &str) -> Self {
        self.terminal = Some(name.to_string());
        self
    }

    pub fn build(self) -> Result<Arc<Site>> {
        let mut objects = self.objects;
        let terminal_name = match self.terminal {
            Some(t) => t,
            None => {
                if !objects.iter().any(|(n, _)| n == "pt") {
                    objects.insert(0, ("pt".to_string(), vec!["*".to_string()]));
                }
                "pt".to_string()
            }
        };

        let mut arena = Arena::default();
        let mut object_names = HashMap::new();
        let mut base_objects = Vec::new();
        for (name, labels) in &objects {
            if object_names.contains_key(name) {
                return Err(Error::Config(format!("object {name} declared twice")));
            }
            let mut seen = std::collections::HashSet::new();
            for l in labels {
                if !seen.insert(l) {
                    return Err(Error::Config(format!("object {name} repeats element {l}")));
                }
            }
            let id = ObjId(arena.objects.len() as u32);
            arena.objects.push(Arc::new(FinObject {
                id,
                name: name.clone(),
                labels: labels.clone(),
                depth: 0,
                apex: None,
            }));
            object_names.insert(name.clone(), id);
            base_objects.push(id);
        }
        let terminal = *object_names
            .get(&terminal_name)
            .ok_or_else(|| Error::Config(format!("terminal object {terminal_name} is not declared")))?;
        if arena.objects[terminal.0 as usize].len() != 1 {
            return Err(Error::Config(format!(
                "terminal object {terminal_name} must have exactly one element"
            )));
        }

        let mut site = Site {
            arena: RwLock::new(arena),
            mode: self.mode,
            closure_depth: self.closure_depth,
            terminal,
            base_objects: base_objects.clone(),
            base_morphisms: Vec::new(),
            object_names,
            morphism_names: HashMap::new(),
            display_names: HashMap::new(),
        };

        // declared generators
        let mut declared = Vec::new();
        for (name, src, dst, images) in &self.morphisms {
            let s = site.object_id(src)?;
            let d = site.object_id(dst)?;
            let src_obj = site.object(s);
            let dst_obj = site.object(d);
            if images.len() != src_obj.len() {
                return Err(Error::Config(format!(
                    "morphism {name}: {} images given for {} source elements",
                    images.len(),
                    src_obj.len()
                )));
            }
            let mut map = Vec::with_capacity(images.len());
            for img in images {
                let j = dst_obj.labels.iter().position(|l| l == img).ok_or_else(|| {
                    Error::Config(format!("morphism {name}: {img} is not an element of {dst}"))
                })?;
                map.push(j as u32);
            }
            if site.morphism_names.contains_key(name) {
                return Err(Error::Config(format!("morphism {name} declared twice")));
            }
            let m = site.intern_morphism(s, d, map)?;
            site.morphism_names.insert(name.clone(), m.id);
            site.display_names.entry(m.id).or_insert_with(|| name.clone());
            declared.push(m);
        }

        let base = match self.mode {
            SiteMode::Full => {
                let mut total = 0usize;
                for &s in &base_objects {
                    for &d in &base_objects {
                        let n = site.object(d).len();
                        let k = site.object(s).len() as u32;
                        total = total.saturating_add(n.saturating_pow(k));
                    }
                }
                if total > MAX_FULL_MORPHISMS {
                    return Err(Error::Config(format!(
                        "full site would contain {total} morphisms (limit {MAX_FULL_MORPHISMS}); use mode = generated"
                    )));
                }
                let mut all = Vec::new();
                for &s in &base_objects {
                    for &d in &base_objects {
                        let k = site.object(s).len();
                        let n = site.object(d).len() as u32;
                        for map in all_functions(k, n) {
                            all.push(site.intern_morphism(s, d, map)?);
                        }
                    }
                }
                all
            }
            SiteMode::Generated => {
                let mut set: Vec<Arc<Morphism>> = Vec::new();
                let mut have = std::collections::HashSet::new();
                let mut push = |m: Arc<Morphism>, set: &mut Vec<Arc<Morphism>>| {
                    if have.insert(m.id) {
                        set.push(m);
                    }
                };
                for &o in &base_objects {
                    push(site.identity(o), &mut set);
                    push(site.to_terminal(o), &mut set);
                }
                for m in declared {
                    push(m, &mut set);
                }
                loop {
                    let before = set.len();
                    let snapshot = set.clone();
                    for f in &snapshot {
                        for g in &snapshot {
                            if f.dst == g.src {
                                let c = site.compose(g, f)?;
                                push(c, &mut set);
                            }
                        }
                    }
                    if set.len() == before {
                        break;
                    }
                }
                set.sort_by(|a, b| (a.src, a.dst, &a.map).cmp(&(b.src, b.dst, &b.map)));
                set
            }
        };
        site.base_morphisms = base;
        Ok(Arc::new(site))
    }
}

/// All functions `k -> n` as image vectors, in lexicographic order.
pub fn all_functions(k: usize, n: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return if k == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; k];
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < n {
                break;
            }
            cur[i] = 0;
        }
    }
}

impl Site {
    pub fn mode(&self) -> SiteMode {
        self.mode
    }

    pub fn closure_depth(&self) -> u32 {
        self.closure_depth
    }

    pub fn terminal(&self) -> ObjId {
        self.terminal
    }

    pub fn base_objects(&self) -> &[ObjId] {
        &self.base_objects
    }

    pub fn base_morphisms(&self) -> &[Arc<Morphism>] {
        &self.base_morphisms
    }

    pub fn object_count(&self) -> usize {
        self.arena.read().unwrap().objects.len()
    }

    pub fn morphism_count(&self) -> usize {
        self.arena.read().unwrap().morphisms.len()
    }

    pub fn object(&self, id: ObjId) -> Arc<FinObject> {
        self.arena.read().unwrap().objects[id.0 as usize].clone()
    }

    pub fn morphism(&self, id: MorId) -> Arc<Morphism> {
        self.arena.read().unwrap().morphisms[id.0 as usize].clone()
    }

    pub fn object_id(&self, name: &str) -> Result<ObjId> {
        self.object_names
            .get(name)
            .copied()
            .ok_or_else(|| Error::Site(format!("unknown object {name}")))
    }

    pub fn morphism_by_name(&self, name: &str) -> Result<Arc<Morphism>> {
        self.morphism_names
            .get(name)
            .map(|&id| self.morphism(id))
            .ok_or_else(|| Error::Site(format!("unknown morphism {name}")))
    }

    pub fn object_name(&self, id: ObjId) -> String {
        self.object(id).name.clone()
    }

    /// Replayable rendering: declared name when there is one, otherwise
    /// `SRC->DST[images]` with images as element labels.
    pub fn render_morphism(&self, m: &Morphism) -> String {
        if let Some(n) = self.display_names.get(&m.id) {
            return n.clone();
        }
        let src = self.object(m.src);
        let dst = self.object(m.dst);
        let imgs: Vec<&str> = m.map.iter().map(|&j| dst.labels[j as usize].as_str()).collect();
        format!("{}->{}[{}]", src.name, dst.name, imgs.join(","))
    }

    /// Interns the function `src -> dst` given by `map`, validating totality.
    pub fn intern_morphism(&self, src: ObjId, dst: ObjId, map: Vec<u32>) -> Result<Arc<Morphism>> {
        {
            let arena = self.arena.read().unwrap();
            if let Some(&id) = arena.mor_index.get(&(src, dst, map.clone())) {
                return Ok(arena.morphisms[id.0 as usize].clone());
            }
            let s = &arena.objects[src.0 as usize];
            let d = &arena.objects[dst.0 as usize];
            if map.len() != s.len() || map.iter().any(|&j| j as usize >= d.len()) {
                return Err(Error::Site(format!(
                    "mapping is not a total function {} -> {}",
                    s.name, d.name
                )));
            }
        }
        let mut arena = self.arena.write().unwrap();
        let key = (src, dst, map);
        if let Some(&id) = arena.mor_index.get(&key) {
            return Ok(arena.morphisms[id.0 as usize].clone());
        }
        let id = MorId(arena.morphisms.len() as u32);
        let m = Arc::new(Morphism {
            id,
            src,
            dst,
            map: key.2.clone(),
        });
        arena.morphisms.push(m.clone());
        arena.mor_index.insert(key, id);
        Ok(m)
    }

    pub fn identity(&self, obj: ObjId) -> Arc<Morphism> {
        let n = self.object(obj).len() as u32;
        self.intern_morphism(obj, obj, (0..n).collect())
            .expect("identity is total")
    }

    /// The unique map `X -> pt`.
    pub fn to_terminal(&self, obj: ObjId) -> Arc<Morphism> {
        let n = self.object(obj).len();
        self.intern_morphism(obj, self.terminal, vec![0; n])
            .expect("terminal map is total")
    }

    /// The point inclusion `pt -> X` picking element `index`.
    pub fn point(&self, obj: ObjId, index: u32) -> Result<Arc<Morphism>> {
        self.intern_morphism(self.terminal, obj, vec![index])
    }

    /// `g ∘ f`.
    pub fn compose(&self, g: &Morphism, f: &Morphism) -> Result<Arc<Morphism>> {
        if f.dst != g.src {
            return Err(Error::Composition {
                outer: self.render_morphism(g),
                inner: self.render_morphism(f),
            });
        }
        let map = f.map.iter().map(|&i| g.map[i as usize]).collect();
        self.intern_morphism(f.src, g.dst, map)
    }

    fn memo(
        &self,
        kind: Derived,
        ids: (MorId, MorId, MorId),
        make: impl FnOnce() -> Result<Arc<Morphism>>,
    ) -> Result<Arc<Morphism>> {
        let key = (kind, ids.0, ids.1, ids.2);
        if let Some(m) = self.arena.read().unwrap().derived.get(&key) {
            return Ok(m.clone());
        }
        let m = make()?;
        self.arena.write().unwrap().derived.insert(key, m.clone());
        Ok(m)
    }

    fn intern_apex(&self, left: ObjId, right: ObjId, pairs: Vec<(u32, u32)>) -> ObjId {
        let key = (left, right, pairs);
        if let Some(&id) = self.arena.read().unwrap().apex_index.get(&key) {
            return id;
        }
        let l = self.object(left);
        let r = self.object(right);
        let labels = key
            .2
            .iter()
            .map(|&(a, b)| format!("({},{})", l.labels[a as usize], r.labels[b as usize]))
            .collect();
        let pair_text: Vec<String> = key.2.iter().map(|(a, b)| format!("{a}.{b}")).collect();
        let name = format!("({}x{})[{}]", l.name, r.name, pair_text.join(","));
        let index = key
            .2
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        let depth = 1 + l.depth.max(r.depth);

        let mut arena = self.arena.write().unwrap();
        if let Some(&id) = arena.apex_index.get(&key) {
            return id;
        }
        let id = ObjId(arena.objects.len() as u32);
        arena.objects.push(Arc::new(FinObject {
            id,
            name,
            labels,
            depth,
            apex: Some(ApexInfo {
                left,
                right,
                pairs: key.2.clone(),
                index,
            }),
        }));
        arena.apex_index.insert(key, id);
        id
    }

    /// Canonical fiber square of `f: X -> Y` and `g: Y' -> Y`. The apex lists
    /// the pairs `(y', x)` with `g(y') = f(x)` in lexicographic order.
    pub fn fiber_product(&self, f: &Morphism, g: &Morphism) -> Result<FiberSquare> {
        if let Some(sq) = self.arena.read().unwrap().squares.get(&(f.id, g.id)) {
            return Ok(sq.clone());
        }
        if f.dst != g.dst {
            return Err(Error::Cospan {
                f: self.render_morphism(f),
                g: self.render_morphism(g),
            });
        }
        let mut pairs = Vec::new();
        for (yp, &gy) in g.map.iter().enumerate() {
            for (x, &fx) in f.map.iter().enumerate() {
                if gy == fx {
                    pairs.push((yp as u32, x as u32));
                }
            }
        }
        let lefts = pairs.iter().map(|p| p.0).collect();
        let tops = pairs.iter().map(|p| p.1).collect();
        let apex = self.intern_apex(g.src, f.src, pairs);
        let sq = FiberSquare {
            f: self.morphism(f.id),
            g: self.morphism(g.id),
            apex,
            top: self.intern_morphism(apex, f.src, tops)?,
            left: self.intern_morphism(apex, g.src, lefts)?,
        };
        self.arena
            .write()
            .unwrap()
            .squares
            .insert((f.id, g.id), sq.clone());
        Ok(sq)
    }

    /// Position of the pair `(left, right)` in the apex object, if present.
    pub fn apex_position(&self, apex: ObjId, left: u32, right: u32) -> Option<u32> {
        self.object(apex).apex.as_ref()?.position(left, right)
    }

    fn pair_at(&self, apex: &FinObject, i: u32) -> (u32, u32) {
        apex.apex.as_ref().expect("apex object").pairs[i as usize]
    }

    /// The induced map `h': X'' -> X'` between the apex over `g ∘ h` and the
    /// apex over `g`, `h'(y'', x) = (h(y''), x)`.
    pub fn paste(&self, f: &Morphism, g: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        self.memo(Derived::Paste, (f.id, g.id, h.id), || self.paste_uncached(f, g, h))
    }

    fn paste_uncached(&self, f: &Morphism, g: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        if h.dst != g.src {
            return Err(Error::Pasting {
                g: self.render_morphism(g),
                h: self.render_morphism(h),
            });
        }
        let outer = self.fiber_product(f, &*self.compose(g, h)?)?;
        let inner = self.fiber_product(f, g)?;
        let outer_obj = self.object(outer.apex);
        let inner_obj = self.object(inner.apex);
        let info = inner_obj.apex.as_ref().expect("apex");
        let map = (0..outer_obj.len() as u32)
            .map(|i| {
                let (ypp, x) = self.pair_at(&outer_obj, i);
                info.position(h.apply(ypp), x).expect("pasted pair lies in the apex")
            })
            .collect();
        self.intern_morphism(outer.apex, inner.apex, map)
    }

    /// All sections of `f`, in lexicographic order of choice functions.
    pub fn sections_of(&self, f: &Morphism) -> Vec<Arc<Morphism>> {
        let ylen = self.object(f.dst).len();
        let mut fibers: Vec<Vec<u32>> = vec![Vec::new(); ylen];
        for (x, &y) in f.map.iter().enumerate() {
            fibers[y as usize].push(x as u32);
        }
        if fibers.iter().any(|fib| fib.is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut choice = vec![0usize; ylen];
        loop {
            let map = choice.iter().enumerate().map(|(y, &c)| fibers[y][c]).collect();
            out.push(
                self.intern_morphism(f.dst, f.src, map)
                    .expect("section is total"),
            );
            let mut i = ylen;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                choice[i] += 1;
                if choice[i] < fibers[i].len() {
                    break;
                }
                choice[i] = 0;
            }
        }
    }

    pub fn is_section(&self, f: &Morphism, s: &Morphism) -> bool {
        s.src == f.dst
            && s.dst == f.src
            && s.map.iter().enumerate().all(|(y, &x)| f.apply(x) == y as u32)
    }

    /// True iff `f` admits a section; for finite sets, iff `f` is surjective.
    pub fn is_sectional(&self, f: &Morphism) -> bool {
        f.is_surjective(self.object(f.dst).len())
    }

    pub fn require_section(&self, f: &Morphism, s: &Morphism) -> Result<()> {
        if self.is_section(f, s) {
            Ok(())
        } else {
            Err(Error::NotASection {
                f: self.render_morphism(f),
                s: self.render_morphism(s),
            })
        }
    }

    /// The pulled-back section `s': Y' -> X'`, `s'(y') = (y', s(g(y')))`.
    pub fn pullback_section(&self, f: &Morphism, g: &Morphism, s: &Morphism) -> Result<Arc<Morphism>> {
        self.memo(Derived::PulledSection, (f.id, g.id, s.id), || self.pullback_section_uncached(f, g, s))
    }

    fn pullback_section_uncached(&self, f: &Morphism, g: &Morphism, s: &Morphism) -> Result<Arc<Morphism>> {
        self.require_section(f, s)?;
        let sq = self.fiber_product(f, g)?;
        let map = (0..g.map.len() as u32)
            .map(|yp| {
                self.apex_position(sq.apex, yp, s.apply(g.apply(yp)))
                    .expect("section lands in the fiber")
            })
            .collect();
        self.intern_morphism(g.src, sq.apex, map)
    }

    /// For `g: Y' -> Y`, the canonical bijection `Y' -> apex(id_Y, g)`.
    pub fn diagonal(&self, g: &Morphism) -> Result<Arc<Morphism>> {
        let id = self.identity(g.dst);
        self.pullback_section(&id, g, &id)
    }

    /// For `f: X -> Y`, `g: Y -> Z`, `h: Z' -> Z`: the bijection from the
    /// iterated apex `apex(f, h')` (with `h'` the top map of `(g, h)`) onto
    /// the direct apex `apex(g ∘ f, h)`, `((z', y), x) ↦ (z', x)`.
    pub fn product_bridge(&self, f: &Morphism, g: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        self.memo(Derived::ProductBridge, (f.id, g.id, h.id), || self.product_bridge_uncached(f, g, h))
    }

    fn product_bridge_uncached(&self, f: &Morphism, g: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        let lower = self.fiber_product(g, h)?;
        let upper = self.fiber_product(f, &lower.top)?;
        let direct = self.fiber_product(&*self.compose(g, f)?, h)?;
        let upper_obj = self.object(upper.apex);
        let lower_obj = self.object(lower.apex);
        let map = (0..upper_obj.len() as u32)
            .map(|i| {
                let (yp, x) = self.pair_at(&upper_obj, i);
                let (zp, _) = self.pair_at(&lower_obj, yp);
                self.apex_position(direct.apex, zp, x)
                    .expect("iterated pair lies in the direct apex")
            })
            .collect();
        self.intern_morphism(upper.apex, direct.apex, map)
    }

    /// For `f: X -> Y`, `g: Y' -> Y`, `h: Y'' -> Y'` with `f'` the left map of
    /// `(f, g)`: the bijection `apex(f, g ∘ h) -> apex(f', h)`,
    /// `(y'', x) ↦ (y'', (h(y''), x))`.
    pub fn pullback_bridge(&self, f: &Morphism, g: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        self.memo(Derived::PullbackBridge, (f.id, g.id, h.id), || self.pullback_bridge_uncached(f, g, h))
    }

    fn pullback_bridge_uncached(&self, f: &Morphism, g: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        let first = self.fiber_product(f, g)?;
        let iterated = self.fiber_product(&first.left, h)?;
        let direct = self.fiber_product(f, &*self.compose(g, h)?)?;
        let direct_obj = self.object(direct.apex);
        let map = (0..direct_obj.len() as u32)
            .map(|i| {
                let (ypp, x) = self.pair_at(&direct_obj, i);
                let mid = self
                    .apex_position(first.apex, h.apply(ypp), x)
                    .expect("pair lies in the first apex");
                self.apex_position(iterated.apex, ypp, mid)
                    .expect("pair lies in the iterated apex")
            })
            .collect();
        self.intern_morphism(direct.apex, iterated.apex, map)
    }

    /// For a bijection `phi: A -> B` and any `k: W -> Y` with `u: B -> Y`,
    /// the induced bijection `apex(u ∘ phi, k) -> apex(u, k)`,
    /// `(w, a) ↦ (w, phi(a))`.
    pub fn apex_transport(&self, u: &Morphism, phi: &Morphism, k: &Morphism) -> Result<Arc<Morphism>> {
        self.memo(Derived::Transport, (u.id, phi.id, k.id), || self.apex_transport_uncached(u, phi, k))
    }

    fn apex_transport_uncached(&self, u: &Morphism, phi: &Morphism, k: &Morphism) -> Result<Arc<Morphism>> {
        let from = self.fiber_product(&*self.compose(u, phi)?, k)?;
        let to = self.fiber_product(u, k)?;
        let from_obj = self.object(from.apex);
        let map = (0..from_obj.len() as u32)
            .map(|i| {
                let (w, a) = self.pair_at(&from_obj, i);
                self.apex_position(to.apex, w, phi.apply(a))
                    .expect("transported pair lies in the apex")
            })
            .collect();
        self.intern_morphism(from.apex, to.apex, map)
    }

    /// For `f: X -> Y`, `k: Y -> Z` and `h: Z' -> Z`: the map
    /// `apex(k ∘ f, h) -> apex(k, h)`, `(z', x) ↦ (z', f(x))`.
    pub fn pushforward_map(&self, f: &Morphism, k: &Morphism, h: &Morphism) -> Result<Arc<Morphism>> {
        self.memo(Derived::PushforwardMap, (f.id, k.id, h.id), || {
            let from = self.fiber_product(&*self.compose(k, f)?, h)?;
            let to = self.fiber_product(k, h)?;
            let from_obj = self.object(from.apex);
            let map = (0..from_obj.len() as u32)
                .map(|i| {
                    let (zp, x) = self.pair_at(&from_obj, i);
                    self.apex_position(to.apex, zp, f.apply(x))
                        .expect("pushed pair lies in the apex")
                })
                .collect();
            self.intern_morphism(from.apex, to.apex, map)
        })
    }

    /// Inverse of a bijective morphism.
    pub fn inverse(&self, m: &Morphism) -> Result<Arc<Morphism>> {
        let n = self.object(m.dst).len();
        if m.map.len() != n {
            return Err(Error::Precondition(format!("{} is not a bijection", self.render_morphism(m))));
        }
        let mut inv = vec![u32::MAX; n];
        for (i, &j) in m.map.iter().enumerate() {
            if inv[j as usize] != u32::MAX {
                return Err(Error::Precondition(format!("{} is not a bijection", self.render_morphism(m))));
            }
            inv[j as usize] = i as u32;
        }
        self.intern_morphism(m.dst, m.src, inv)
    }

    /// The quantification universe of morphisms into `obj`.
    ///
    /// For declared objects this is every base morphism into `obj`. For an
    /// apex of depth at most `closure_depth` it is every map from a declared
    /// object induced by a cone of universe morphisms into the two factors.
    pub fn morphisms_into(&self, obj: ObjId) -> Result<Arc<Vec<Arc<Morphism>>>> {
        if let Some(v) = self.arena.read().unwrap().into.get(&obj) {
            return Ok(v.clone());
        }
        let o = self.object(obj);
        let list: Vec<Arc<Morphism>> = match &o.apex {
            None => self
                .base_morphisms
                .iter()
                .filter(|m| m.dst == obj)
                .cloned()
                .collect(),
            Some(info) => {
                if o.depth > self.closure_depth {
                    return Err(Error::Site(format!(
                        "object {} has fiber-product depth {} beyond closure_depth {}",
                        o.name, o.depth, self.closure_depth
                    )));
                }
                let lefts = self.morphisms_into(info.left)?;
                let rights = self.morphisms_into(info.right)?;
                let mut out = Vec::new();
                for u in lefts.iter() {
                    for v in rights.iter().filter(|v| v.src == u.src) {
                        let map: Option<Vec<u32>> = u
                            .map
                            .iter()
                            .zip(&v.map)
                            .map(|(&a, &b)| info.position(a, b))
                            .collect();
                        if let Some(map) = map {
                            out.push(self.intern_morphism(u.src, obj, map)?);
                        }
                    }
                }
                out
            }
        };
        let list = Arc::new(list);
        self.arena.write().unwrap().into.insert(obj, list.clone());
        Ok(list)
    }

    /// Base morphisms with the given source.
    pub fn morphisms_from(&self, obj: ObjId) -> Vec<Arc<Morphism>> {
        self.base_morphisms
            .iter()
            .filter(|m| m.src == obj)
            .cloned()
            .collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "site(mode={}, closure_depth={}, objects={}, base_morphisms={})",
            self.mode,
            self.closure_depth,
            self.base_objects.len(),
            self.base_morphisms.len()
        )
    }
}
