//! Normal form for value maps.
//!
//! Every map built from pullbacks, pointwise operations and constant
//! sums/products is an index gather followed by pointwise steps, or a
//! constant. Composing normal forms pushes gathers to the front (pointwise
//! steps commute with precomposition) and fuses adjacent gathers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functor::Rig;
use crate::operations::OpExpr;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Step<E> {
    Op(Arc<OpExpr>),
    Add(Arc<[E]>),
    Mul(Arc<[E]>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Body<E> {
    Const(Arc<[E]>),
    /// `None` is the identity gather.
    Map {
        gather: Option<Arc<[u32]>>,
        steps: Vec<Step<E>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program<E> {
    src_len: usize,
    len: usize,
    body: Body<E>,
}

impl<E: Clone + Eq> Program<E> {
    pub fn identity(n: usize) -> Self {
        Program {
            src_len: n,
            len: n,
            body: Body::Map {
                gather: None,
                steps: Vec::new(),
            },
        }
    }

    pub fn constant(src_len: usize, c: Vec<E>) -> Self {
        Program {
            src_len,
            len: c.len(),
            body: Body::Const(c.into()),
        }
    }

    /// `v ↦ v ∘ map`, with `map` indexing a source of length `src_len`.
    pub fn gather(src_len: usize, map: &[u32]) -> Self {
        Program {
            src_len,
            len: map.len(),
            body: Body::Map {
                gather: normalize_gather(src_len, map.into()),
                steps: Vec::new(),
            },
        }
    }

    pub fn op<R: Rig<Elem = E>>(rig: &R, n: usize, op: Arc<OpExpr>) -> Result<Self> {
        let mut p = Program::identity(n);
        p.push(rig, Step::Op(op))?;
        Ok(p)
    }

    pub fn add<R: Rig<Elem = E>>(rig: &R, c: Vec<E>) -> Result<Self> {
        let mut p = Program::identity(c.len());
        p.push(rig, Step::Add(c.into()))?;
        Ok(p)
    }

    pub fn mul<R: Rig<Elem = E>>(rig: &R, c: Vec<E>) -> Result<Self> {
        let mut p = Program::identity(c.len());
        p.push(rig, Step::Mul(c.into()))?;
        Ok(p)
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.body, Body::Const(_))
    }

    /// `self` followed by `next`.
    pub fn then<R: Rig<Elem = E>>(&self, next: &Program<E>, rig: &R) -> Result<Program<E>> {
        if self.len != next.src_len {
            return Err(Error::Domain {
                expected: format!("{} entries", next.src_len),
                found: format!("{} entries", self.len),
            });
        }
        let (gather, steps) = match (&self.body, &next.body) {
            (_, Body::Const(c)) => {
                return Ok(Program {
                    src_len: self.src_len,
                    len: next.len,
                    body: Body::Const(c.clone()),
                })
            }
            (Body::Const(c), _) => {
                return Ok(Program {
                    src_len: self.src_len,
                    len: next.len,
                    body: Body::Const(next.run(rig, c)?.into()),
                })
            }
            (Body::Map { gather: g1, steps: s1 }, Body::Map { gather: g2, steps: s2 }) => {
                let gather = match (g1, g2) {
                    (g, None) => g.clone(),
                    (None, g) => g.clone(),
                    (Some(a), Some(b)) => {
                        normalize_gather(self.src_len, b.iter().map(|&i| a[i as usize]).collect())
                    }
                };
                let moved: Vec<Step<E>> = match g2 {
                    None => s1.clone(),
                    Some(b) => s1.iter().map(|s| transport(s, b)).collect(),
                };
                (gather, (moved, s2))
            }
        };
        let mut out = Program {
            src_len: self.src_len,
            len: next.len,
            body: Body::Map {
                gather,
                steps: steps.0,
            },
        };
        for s in steps.1 {
            out.push(rig, s.clone())?;
        }
        Ok(out)
    }

    fn push<R: Rig<Elem = E>>(&mut self, rig: &R, step: Step<E>) -> Result<()> {
        let zeros = || -> Arc<[E]> { vec![rig.zero(); self.len].into() };
        match &mut self.body {
            Body::Const(c) => {
                let mut v = c.to_vec();
                apply_step(rig, &step, &mut v)?;
                self.body = Body::Const(v.into());
            }
            Body::Map { steps, .. } => match step {
                Step::Op(op) => match op.as_ref() {
                    OpExpr::Ident => {}
                    OpExpr::Zero => self.body = Body::Const(zeros()),
                    _ => steps.push(Step::Op(op)),
                },
                Step::Add(c) => {
                    if c.iter().all(|e| *e == rig.zero()) {
                        return Ok(());
                    }
                    if let Some(Step::Add(d)) = steps.last() {
                        let merged: Arc<[E]> = d.iter().zip(c.iter()).map(|(a, b)| rig.add(a, b)).collect();
                        *steps.last_mut().unwrap() = Step::Add(merged);
                    } else {
                        steps.push(Step::Add(c));
                    }
                }
                Step::Mul(c) => {
                    if c.iter().all(|e| *e == rig.one()) {
                        return Ok(());
                    }
                    if c.iter().all(|e| *e == rig.zero()) {
                        self.body = Body::Const(zeros());
                        return Ok(());
                    }
                    if let Some(Step::Mul(d)) = steps.last() {
                        let merged: Arc<[E]> = d.iter().zip(c.iter()).map(|(a, b)| rig.mul(a, b)).collect();
                        *steps.last_mut().unwrap() = Step::Mul(merged);
                    } else {
                        steps.push(Step::Mul(c));
                    }
                }
            },
        }
        Ok(())
    }

    pub fn run<R: Rig<Elem = E>>(&self, rig: &R, input: &[E]) -> Result<Vec<E>> {
        if input.len() != self.src_len {
            return Err(Error::Domain {
                expected: format!("{} entries", self.src_len),
                found: format!("{} entries", input.len()),
            });
        }
        match &self.body {
            Body::Const(c) => Ok(c.to_vec()),
            Body::Map { gather, steps } => {
                let mut v: Vec<E> = match gather {
                    None => input.to_vec(),
                    Some(g) => g.iter().map(|&i| input[i as usize].clone()).collect(),
                };
                for s in steps {
                    apply_step(rig, s, &mut v)?;
                }
                Ok(v)
            }
        }
    }
}

fn normalize_gather(src_len: usize, map: Arc<[u32]>) -> Option<Arc<[u32]>> {
    if map.len() == src_len && map.iter().enumerate().all(|(i, &j)| i as u32 == j) {
        None
    } else {
        Some(map)
    }
}

fn transport<E: Clone>(s: &Step<E>, g: &[u32]) -> Step<E> {
    let pick = |c: &Arc<[E]>| -> Arc<[E]> { g.iter().map(|&i| c[i as usize].clone()).collect() };
    match s {
        Step::Op(op) => Step::Op(op.clone()),
        Step::Add(c) => Step::Add(pick(c)),
        Step::Mul(c) => Step::Mul(pick(c)),
    }
}

fn apply_step<R: Rig>(rig: &R, s: &Step<R::Elem>, v: &mut [R::Elem]) -> Result<()> {
    match s {
        Step::Op(op) => {
            for e in v.iter_mut() {
                *e = op.eval_elem(rig, e)?;
            }
        }
        Step::Add(c) => {
            for (e, k) in v.iter_mut().zip(c.iter()) {
                *e = rig.add(e, k);
            }
        }
        Step::Mul(c) => {
            for (e, k) in v.iter_mut().zip(c.iter()) {
                *e = rig.mul(e, k);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functor::RankVect;

    #[test]
    fn gathers_fuse_and_identities_vanish() {
        let r = RankVect;
        let swap = Program::<u64>::gather(2, &[1, 0]);
        let p = swap.then(&swap, &r).unwrap();
        assert_eq!(p, Program::identity(2));
    }

    #[test]
    fn pointwise_steps_commute_past_gathers() {
        let r = RankVect;
        let add = Program::add(&r, vec![1, 5]).unwrap();
        let pick = Program::gather(2, &[1]);
        let p = add.then(&pick, &r).unwrap();
        assert_eq!(p.run(&r, &[10, 20]).unwrap(), vec![25]);
        let q = pick.then(&Program::add(&r, vec![5]).unwrap(), &r).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn constants_absorb() {
        let r = RankVect;
        let zero = Program::constant(3, vec![0, 0]);
        let sq = Program::op(&r, 2, Arc::new(OpExpr::poly(vec![1, 0, 1]))).unwrap();
        let p = zero.then(&sq, &r).unwrap();
        assert!(p.is_constant());
        assert_eq!(p.run(&r, &[4, 4, 4]).unwrap(), vec![1, 1]);
    }
}
