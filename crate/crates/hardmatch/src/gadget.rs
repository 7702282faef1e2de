use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::cube::{Codec, Compiled, ConstraintSystem, Dims, IntervalSet, Label, Product};
use crate::params::{GadgetBlocks, ToyParams};
use crate::{Error, Result};

/// One sampled gadget: its blocks and the direction J_k chosen in each block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetSpec {
    pub ell: usize,
    pub j: Vec<usize>,
    pub blocks: GadgetBlocks,
    pub phases: usize,
}

/// m·(1 − 1/(K−s)).
pub fn lower_bound(p: &ToyParams, s: usize) -> BigUint {
    let d = BigUint::from(p.k as u64 - s as u64);
    &p.m - &p.m / d
}

/// W/(K−k).
pub fn residue_bound(p: &ToyParams, k: usize) -> BigUint {
    &p.w / BigUint::from(p.k as u64 - k as u64)
}

impl GadgetSpec {
    /// Property q-k: J_k must be a basic coordinate of block k.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.j.len() != self.phases + 1 {
            v.push(format!("J^{} has {} entries, expected {}", self.ell, self.j.len(), self.phases + 1));
        }
        for (k, &jk) in self.j.iter().enumerate().take(self.phases + 1) {
            if !self.blocks.breve(k).contains(&jk) {
                v.push(format!("J^{}_{} = {} ∉ B̆^{}_{}", self.ell, k, jk, self.ell, k));
            }
        }
        v
    }

    fn check_k(&self, k: usize, max: usize) -> Result<()> {
        if k > max {
            return Err(Error::Range(format!("phase {k} > {max}")));
        }
        Ok(())
    }

    /// T_k: y_{J_s} < m(1 − 1/(K−s)) for every s < k.
    pub fn t_k(&self, p: &ToyParams, k: usize) -> Result<ConstraintSystem> {
        self.check_k(k, self.phases)?;
        let mut cs = ConstraintSystem::new();
        for s in 0..k {
            cs.restrict(self.j[s], IntervalSet::range(0u32, lower_bound(p, s)));
        }
        Ok(cs)
    }

    pub fn t_star(&self, p: &ToyParams) -> ConstraintSystem {
        self.t_k(p, self.phases).unwrap()
    }

    /// S_k: T_k with wt(x) mod W ∈ [0, W/(K−k)).
    pub fn s_k(&self, p: &ToyParams, k: usize) -> Result<ConstraintSystem> {
        self.check_k(k, self.phases.saturating_sub(1))?;
        Ok(self.t_k(p, k)?.with_residues(IntervalSet::range(0u32, residue_bound(p, k))))
    }

    pub fn t_kj(&self, p: &ToyParams, k: usize, j: usize) -> Result<ConstraintSystem> {
        self.check_dir(k, j)?;
        Ok(self.t_k(p, k)?.with(j, IntervalSet::range(0u32, lower_bound(p, k))))
    }

    pub fn s_kj(&self, p: &ToyParams, k: usize, j: usize) -> Result<ConstraintSystem> {
        self.check_dir(k, j)?;
        Ok(self.s_k(p, k)?.with(j, IntervalSet::range(0u32, lower_bound(p, k))))
    }

    fn check_dir(&self, k: usize, j: usize) -> Result<()> {
        self.check_k(k, self.phases.saturating_sub(1))?;
        if !self.blocks.blocks[k].contains(&j) {
            return Err(Error::Range(format!("coordinate {j} ∉ B^{}_{k}", self.ell)));
        }
        Ok(())
    }

    /// DownSet_k(U) for a constraint-defined U.
    pub fn downset_system(&self, p: &ToyParams, u: &ConstraintSystem, k: usize) -> Result<ConstraintSystem> {
        Ok(u.intersect(&self.s_k(p, k)?))
    }
}

/// A gadget with thresholds resolved to machine integers.
#[derive(Clone, Debug)]
pub struct GadgetView {
    pub spec: GadgetSpec,
    pub codec: Codec,
    pub m: u64,
    pub w: u64,
    thr: Vec<u64>,
    res_hi: Vec<u64>,
    s_sys: Vec<Compiled>,
    t_star: Compiled,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct GadgetEdge {
    pub k: usize,
    pub s: Label,
    pub t: Label,
    pub j: usize,
    pub rep: Label,
}

impl GadgetView {
    pub fn new(p: &ToyParams, spec: &GadgetSpec) -> Result<Self> {
        let codec = Codec::for_params(p)?;
        let m = codec.m;
        let w = p.w_u64().unwrap();
        let k = p.k as u64;
        let thr = (0..spec.phases).map(|s| m - m / (k - s as u64)).collect();
        let res_hi = (0..spec.phases).map(|s| w / (k - s as u64)).collect();
        let dims = Dims::from(p);
        let s_sys = (0..spec.phases).map(|s| spec.s_k(p, s).unwrap().compile(&dims)).collect::<Result<Vec<_>>>()?;
        let t_star = spec.t_star(p).compile(&dims)?;
        Ok(GadgetView { spec: spec.clone(), codec, m, w, thr, res_hi, s_sys, t_star })
    }

    pub fn phases(&self) -> usize {
        self.spec.phases
    }

    pub fn threshold(&self, k: usize) -> u64 {
        self.thr[k]
    }

    pub fn residue_hi(&self, k: usize) -> u64 {
        self.res_hi[k]
    }

    /// Largest d with x ∈ T_d; `phases` means x ∈ T_*.
    #[inline]
    pub fn depth(&self, x: Label) -> usize {
        for s in 0..self.spec.phases {
            if self.codec.get(x, self.spec.j[s]) >= self.thr[s] {
                return s;
            }
        }
        self.spec.phases
    }

    #[inline]
    pub fn in_t(&self, k: usize, x: Label) -> bool {
        self.depth(x) >= k
    }

    #[inline]
    pub fn in_t_star(&self, x: Label) -> bool {
        self.depth(x) == self.spec.phases
    }

    #[inline]
    pub fn in_s(&self, k: usize, x: Label) -> bool {
        self.in_t(k, x) && self.codec.weight(x) % self.w < self.res_hi[k]
    }

    pub fn s_system(&self, k: usize) -> &Compiled {
        &self.s_sys[k]
    }

    pub fn t_star_system(&self) -> &Compiled {
        &self.t_star
    }

    /// Lines of T_k in direction j, as representatives with coordinate j zeroed.
    pub fn lines(&self, k: usize, j: usize) -> Result<Product> {
        if self.spec.j[..k].contains(&j) {
            return Err(Error::Range(format!("direction {j} is constrained in T_{k}")));
        }
        let mut spec = Vec::new();
        for c in 0..self.codec.n {
            if c == j {
                continue;
            }
            let hi = match self.spec.j[..k].iter().position(|&x| x == c) {
                Some(s) => self.thr[s],
                None => self.m,
            };
            spec.push((c, (0..hi as u32).collect()));
        }
        Ok(Product::new(&self.codec, Label(0), spec))
    }

    /// On one line: S_k^j members (coordinate j < threshold, residue in range), ascending.
    pub fn line_s_points(&self, k: usize, j: usize, rep: Label, out: &mut Vec<Label>) {
        out.clear();
        let w0 = self.codec.weight(rep) % self.w;
        for v in 0..self.thr[k] {
            if (w0 + v) % self.w < self.res_hi[k] {
                out.push(self.codec.set(rep, j, v));
            }
        }
    }

    /// On one line: T_k ∖ T_k^j, ascending.
    pub fn line_t_points(&self, j: usize, k: usize, rep: Label, out: &mut Vec<Label>) {
        out.clear();
        for v in self.thr[k]..self.m {
            out.push(self.codec.set(rep, j, v));
        }
    }

    /// E_{k,j}: per line of T_k in direction j, (line ∩ S_k^j) × (line ∖ T_k^j).
    pub fn edges(&self, k: usize, j: usize) -> Result<EdgeIter<'_>> {
        if k >= self.spec.phases {
            return Err(Error::Range(format!("phase {k} ≥ {}", self.spec.phases)));
        }
        if !self.spec.blocks.breve(k).contains(&j) {
            return Err(Error::Range(format!("direction {j} ∉ B̆^{}_{k}", self.spec.ell)));
        }
        Ok(EdgeIter { view: self, k, j, lines: self.lines(k, j)?, s: vec![], t: vec![], si: 0, ti: 0, rep: Label(0) })
    }

    /// Per line in direction J_k, the i-th S_k^{J_k} point is matched to the i-th point of line ∖ T_k^{J_k}.
    pub fn matching(&self) -> Vec<GadgetEdge> {
        let mut out = Vec::new();
        let (mut s, mut t) = (vec![], vec![]);
        for k in 0..self.spec.phases {
            let j = self.spec.j[k];
            for rep in self.lines(k, j).expect("J_k lies outside J_{<k}") {
                self.line_s_points(k, j, rep, &mut s);
                self.line_t_points(j, k, rep, &mut t);
                for (a, b) in s.iter().zip(t.iter()) {
                    out.push(GadgetEdge { k, s: *a, t: *b, j, rep });
                }
            }
        }
        out
    }

    /// DownSet_k(U) for U given as a bitset over dense label indices.
    pub fn downset_explicit(&self, u: &FixedBitSet) -> Vec<FixedBitSet> {
        (0..self.spec.phases)
            .map(|k| {
                let mut d = FixedBitSet::with_capacity(u.len());
                for i in u.ones() {
                    if self.in_s(k, self.codec.from_index(i as u64)) {
                        d.insert(i);
                    }
                }
                d
            })
            .collect()
    }
}

pub struct EdgeIter<'a> {
    view: &'a GadgetView,
    k: usize,
    j: usize,
    lines: Product,
    s: Vec<Label>,
    t: Vec<Label>,
    si: usize,
    ti: usize,
    rep: Label,
}

impl Iterator for EdgeIter<'_> {
    type Item = GadgetEdge;

    fn next(&mut self) -> Option<GadgetEdge> {
        loop {
            if self.si < self.s.len() {
                let e = GadgetEdge { k: self.k, s: self.s[self.si], t: self.t[self.ti], j: self.j, rep: self.rep };
                self.ti += 1;
                if self.ti == self.t.len() {
                    self.ti = 0;
                    self.si += 1;
                }
                return Some(e);
            }
            let rep = self.lines.next()?;
            self.rep = rep;
            self.view.line_s_points(self.k, self.j, rep, &mut self.s);
            self.view.line_t_points(self.j, self.k, rep, &mut self.t);
            self.si = 0;
            self.ti = 0;
            if self.t.is_empty() {
                self.s.clear();
            }
        }
    }
}

/// |E_{k,j}| = (|T_k|/m)·|line ∩ S_k^j|·|line ∖ T_k^j|.
pub fn edge_count(p: &ToyParams, spec: &GadgetSpec, k: usize) -> Result<BigUint> {
    let lines = spec.t_k(p, k)?.count(&Dims::from(p))? / &p.m;
    let d = BigUint::from(p.k as u64 - k as u64);
    let block = &p.m / &d;
    let s_per_line = &block - &block / &d;
    Ok(lines * s_per_line * block)
}

/// Size of the constructive matching: Σ_k (#lines)·min(|line ∩ S_k^{J_k}|, |line ∖ T_k^{J_k}|).
pub fn matching_size(p: &ToyParams, spec: &GadgetSpec) -> Result<BigUint> {
    let mut total = BigUint::from(0u32);
    for k in 0..spec.phases {
        let lines = spec.t_k(p, k)?.count(&Dims::from(p))? / &p.m;
        let d = BigUint::from(p.k as u64 - k as u64);
        let block = &p.m / &d;
        let s_per_line = &block - &block / &d;
        total += lines * s_per_line.min(block);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::line_cover;
    use crate::params::{minimal_layout, LayoutStyle, Mode};
    use std::collections::HashSet;

    fn fix_a() -> (ToyParams, GadgetSpec) {
        let p = ToyParams::new(2, 1, 3, Mode::Standalone, None, 0).unwrap();
        let l = minimal_layout(&p, &[2, 1], LayoutStyle::Uniform).unwrap();
        let spec = GadgetSpec { ell: 0, j: vec![0, 2], blocks: l.gadgets[0].clone(), phases: 1 };
        (p, spec)
    }

    fn count(p: &ToyParams, cs: &ConstraintSystem) -> u64 {
        cs.count(&Dims::from(p)).unwrap().try_into().unwrap()
    }

    #[test]
    fn fix_a_sizes() {
        let (p, g) = fix_a();
        assert_eq!(count(&p, &g.t_k(&p, 0).unwrap()), 64);
        assert_eq!(count(&p, &g.t_k(&p, 1).unwrap()), 32);
        assert_eq!(count(&p, &g.s_k(&p, 0).unwrap()), 32);
        assert_eq!(count(&p, &g.s_kj(&p, 0, 0).unwrap()), 16);
        assert_eq!(count(&p, &g.s_kj(&p, 0, 1).unwrap()), 16);
        assert!(g.s_k(&p, 1).is_err());
        assert!(g.t_kj(&p, 0, 2).is_err());
    }

    #[test]
    fn fix_a_edges_and_disjointness() {
        let (p, g) = fix_a();
        let v = GadgetView::new(&p, &g).unwrap();
        let e0: Vec<_> = v.edges(0, 0).unwrap().collect();
        let e1: Vec<_> = v.edges(0, 1).unwrap().collect();
        assert_eq!(e0.len(), 32);
        assert_eq!(e1.len(), 32);
        assert_eq!(edge_count(&p, &g, 0).unwrap(), BigUint::from(32u32));
        let a: HashSet<_> = e0.iter().map(|e| (e.s, e.t)).collect();
        assert!(e1.iter().all(|e| !a.contains(&(e.s, e.t))));
        for e in e0.iter().chain(&e1) {
            let (s, t) = (v.codec.unpack(e.s), v.codec.unpack(e.t));
            let diff: Vec<_> = (0..3).filter(|&c| s[c] != t[c]).collect();
            assert_eq!(diff, vec![e.j]);
            assert!(v.in_s(0, e.s) && s[e.j] < v.threshold(0));
            assert!(t[e.j] >= v.threshold(0));
        }
        assert!(v.edges(0, 2).is_err());
    }

    #[test]
    fn fix_a_matching() {
        let (p, g) = fix_a();
        let v = GadgetView::new(&p, &g).unwrap();
        let mm = v.matching();
        assert_eq!(mm.len(), 16);
        assert_eq!(matching_size(&p, &g).unwrap(), BigUint::from(16u32));
        let mut used = HashSet::new();
        for e in &mm {
            assert!(used.insert((0, e.s)) && used.insert((1, e.t)));
            assert!(!v.in_t_star(e.t));
        }
    }

    #[test]
    fn fix_a_downset_of_terminal() {
        let (p, g) = fix_a();
        let v = GadgetView::new(&p, &g).unwrap();
        let mut u = FixedBitSet::with_capacity(64);
        for x in v.codec.all().unwrap() {
            if v.in_t_star(x) {
                u.insert(v.codec.index(x) as usize);
            }
        }
        let d = v.downset_explicit(&u);
        assert_eq!(d[0].count_ones(..), 16);
        let empty = v.downset_explicit(&FixedBitSet::with_capacity(64));
        assert_eq!(empty[0].count_ones(..), 0);
        let sys = g.downset_system(&p, &g.t_star(&p), 0).unwrap();
        assert_eq!(count(&p, &sys), 16);
    }

    #[test]
    fn truncated_downset() {
        // α-mode K=4: two phases; U ⊆ T_0∖T_1 has no S_1 members.
        let p = ToyParams::new(4, 1, 3, Mode::Standalone, Some(2), 0).unwrap();
        let l = minimal_layout(&p, &[1], LayoutStyle::Uniform).unwrap();
        let g = GadgetSpec { ell: 0, j: vec![0, 1, 2], blocks: l.gadgets[0].clone(), phases: 2 };
        let u = ConstraintSystem::new().with(0, IntervalSet::range(lower_bound(&p, 0), p.m.clone()));
        let d1 = g.downset_system(&p, &u, 1).unwrap();
        assert_eq!(count(&p, &d1), 0);
        let d0 = g.downset_system(&p, &u, 0).unwrap();
        assert_eq!(count(&p, &d0) * 4, count(&p, &u));
    }

    #[test]
    fn line_cover_of_region_matches_gadget_lines() {
        let (p, g) = fix_a();
        let v = GadgetView::new(&p, &g).unwrap();
        let t0 = g.t_k(&p, 0).unwrap().compile(&Dims::from(&p)).unwrap();
        let a: Vec<_> = line_cover(0, &t0).map(|l| l.rep).collect();
        let b: Vec<_> = v.lines(0, 0).unwrap().collect();
        assert_eq!(a, b);
    }
}
