use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cube::{ConstraintSystem, Dims, IntervalSet, Label, EXPLICIT_CAP};
use crate::gadget::{lower_bound, residue_bound};
use crate::instance::{HardInstance, Layer, Side, StreamedEdge};
use crate::{Error, Result};

/// Where a T^ℓ label traces back to: ν_{ℓ+d,d}(T^{ℓ+d}∖T_*^{ℓ+d}), or the terminal D-term.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Class {
    Tail { depth: usize, source: usize },
    Terminal,
}

/// Follows τ-inverses out of terminal subcubes until the label leaves one.
pub fn classify(inst: &HardInstance, ell: usize, x: Label) -> Class {
    let (mut ell, mut x, mut d) = (ell, x, 0);
    loop {
        if !inst.view(ell).in_t_star(x) {
            return Class::Tail { depth: d, source: ell };
        }
        if ell + 1 >= inst.gadgets() || !inst.params.is_glued() {
            return Class::Terminal;
        }
        let (_, y) = inst.glue[ell].tau_invert(&inst.codec, x).expect("τ^{ℓ+1} is onto T_*^ℓ");
        x = y;
        ell += 1;
        d += 1;
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Witness {
    None = 0,
    AP = 1,
    BP = 2,
    AQ = 3,
    BQ = 4,
}

/// Membership of one vertex of Ĝ in A_P, B_P, A_Q or B_Q.
pub fn vertex_witness(inst: &HardInstance, side: Side, id: u32) -> Result<Witness> {
    let v = inst.vertex_at(side, id)?;
    Ok(match v.layer {
        Layer::T => match classify(inst, v.gadget as usize, v.label) {
            Class::Tail { depth, .. } => match (side, depth % 2 == 0) {
                (Side::P, true) => Witness::AP,
                (Side::P, false) => Witness::BP,
                (Side::Q, true) => Witness::AQ,
                (Side::Q, false) => Witness::BQ,
            },
            Class::Terminal => Witness::None,
        },
        // τ_* is the identity on S^0, so S^0 ∩ B_Q = ⋃_{even ℓ} μ_{ℓ,ℓ}(T^ℓ∖T_*^ℓ).
        Layer::S(_) => match classify(inst, 0, v.label) {
            Class::Tail { depth, .. } if depth % 2 == 0 => Witness::BQ,
            _ => Witness::None,
        },
        Layer::Terminal => Witness::None,
    })
}

/// Side cap for explicit witness tables.
pub const WITNESS_CAP: u64 = 1 << 27;

/// Witness membership for every vertex, or on demand when the instance is too large.
pub struct WitnessOracle<'a> {
    inst: &'a HardInstance,
    p: Option<Vec<u8>>,
    q: Option<Vec<u8>>,
}

fn table(inst: &HardInstance, side: Side, n: u64) -> Vec<u8> {
    (0..n as u32).into_par_iter().map(|id| vertex_witness(inst, side, id).unwrap() as u8).collect()
}

impl<'a> WitnessOracle<'a> {
    pub fn new(inst: &'a HardInstance) -> Self {
        let explicit = inst.params.is_glued() && inst.n_p() <= WITNESS_CAP && inst.n_q() <= WITNESS_CAP;
        let (p, q) = if explicit { (Some(table(inst, Side::P, inst.n_p())), Some(table(inst, Side::Q, inst.n_q()))) } else { (None, None) };
        WitnessOracle { inst, p, q }
    }

    pub fn on_demand(inst: &'a HardInstance) -> Self {
        WitnessOracle { inst, p: None, q: None }
    }

    pub fn is_explicit(&self) -> bool {
        self.p.is_some()
    }

    fn get(&self, side: Side, id: u32) -> Witness {
        let t = match side {
            Side::P => &self.p,
            Side::Q => &self.q,
        };
        match t {
            Some(t) => match t[id as usize] {
                1 => Witness::AP,
                2 => Witness::BP,
                3 => Witness::AQ,
                4 => Witness::BQ,
                _ => Witness::None,
            },
            None => vertex_witness(self.inst, side, id).unwrap_or(Witness::None),
        }
    }

    pub fn in_a_p(&self, p: u32) -> bool {
        self.get(Side::P, p) == Witness::AP
    }

    pub fn in_b_p(&self, p: u32) -> bool {
        self.get(Side::P, p) == Witness::BP
    }

    pub fn in_a_q(&self, q: u32) -> bool {
        self.get(Side::Q, q) == Witness::AQ
    }

    pub fn in_b_q(&self, q: u32) -> bool {
        self.get(Side::Q, q) == Witness::BQ
    }

    /// Edge in A_P × (Q∖B_Q).
    pub fn crosses(&self, e: &StreamedEdge) -> bool {
        self.in_a_p(e.p) && !self.in_b_q(e.q)
    }

    /// Counts from the explicit tables.
    pub fn counts(&self) -> Option<WitnessCounts> {
        let (p, q) = (self.p.as_ref()?, self.q.as_ref()?);
        let c = |t: &[u8], v: Witness| t.iter().filter(|&&x| x == v as u8).count() as u64;
        Some(WitnessCounts::new(
            p.len() as u64,
            q.len() as u64,
            [c(p, Witness::AP), c(p, Witness::BP), c(q, Witness::AQ), c(q, Witness::BQ)],
        ))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WitnessCounts {
    pub n_p: u64,
    pub n_q: u64,
    pub a_p: u64,
    pub b_p: u64,
    pub a_q: u64,
    pub b_q: u64,
}

impl WitnessCounts {
    fn new(n_p: u64, n_q: u64, [a_p, b_p, a_q, b_q]: [u64; 4]) -> Self {
        WitnessCounts { n_p, n_q, a_p, b_p, a_q, b_q }
    }

    /// |P∖(A_P∪B_P)|; A_P and B_P are disjoint.
    pub fn residual_p(&self) -> u64 {
        self.n_p - self.a_p - self.b_p
    }

    pub fn residual_q(&self) -> u64 {
        self.n_q - self.a_q - self.b_q
    }

    /// |P∖A_P| + |B_Q|: the matching-independent part of the cover.
    pub fn base_cover(&self) -> u64 {
        self.n_p - self.a_p + self.b_q
    }
}

fn need_explicit(inst: &HardInstance) -> Result<()> {
    if inst.n_labels() > EXPLICIT_CAP {
        return Err(Error::Cap { what: "explicit predecessor set".into(), size: inst.n_labels().to_string(), cap: EXPLICIT_CAP });
    }
    Ok(())
}

/// T^ℓ ∖ T_*^ℓ over dense label indices.
pub fn t_minus_tstar_explicit(inst: &HardInstance, ell: usize) -> Result<FixedBitSet> {
    need_explicit(inst)?;
    let n = inst.n_labels() as usize;
    let v = inst.view(ell);
    let mut b = FixedBitSet::with_capacity(n);
    for i in 0..n {
        if !v.in_t_star(inst.codec.from_index(i as u64)) {
            b.insert(i);
        }
    }
    Ok(b)
}

/// DownSet^ℓ(U), one bitset per phase k over label indices.
pub fn downset_explicit(inst: &HardInstance, ell: usize, u: &FixedBitSet) -> Vec<FixedBitSet> {
    inst.view(ell).downset_explicit(u)
}

/// τ^ℓ of an S^ℓ subset, over T^{ℓ−1} label indices.
pub fn tau_explicit(inst: &HardInstance, ell: usize, parts: &[FixedBitSet]) -> Result<FixedBitSet> {
    if ell == 0 || ell >= inst.gadgets() {
        return Err(Error::Range(format!("τ^{ell} is not a gluing map")));
    }
    let mut out = FixedBitSet::with_capacity(inst.n_labels() as usize);
    for (k, part) in parts.iter().enumerate() {
        for i in part.ones() {
            let x = inst.codec.from_index(i as u64);
            let y = inst.glue[ell - 1].tau_apply(&inst.codec, k, x)?;
            out.insert(inst.codec.index(y) as usize);
        }
    }
    Ok(out)
}

fn check_nu(inst: &HardInstance, ell: usize, j: usize) -> Result<()> {
    if ell >= inst.gadgets() || j > ell {
        return Err(Error::Range(format!("ν_{{{ell},{j}}} needs 0 ≤ j ≤ ℓ < L")));
    }
    Ok(())
}

/// ν_{ℓ,j}(U) ⊆ T^{ℓ−j}, straight from the definition.
pub fn nu_explicit(inst: &HardInstance, ell: usize, j: usize, u: &FixedBitSet) -> Result<FixedBitSet> {
    check_nu(inst, ell, j)?;
    need_explicit(inst)?;
    let mut cur = u.clone();
    for step in 1..=j {
        let layer = ell + 1 - step;
        cur = tau_explicit(inst, layer, &downset_explicit(inst, layer, &cur))?;
    }
    Ok(cur)
}

/// μ_{ℓ,j}(U) ⊆ S^{ℓ−j}, per phase.
pub fn mu_explicit(inst: &HardInstance, ell: usize, j: usize, u: &FixedBitSet) -> Result<Vec<FixedBitSet>> {
    let nu = nu_explicit(inst, ell, j, u)?;
    Ok(downset_explicit(inst, ell - j, &nu))
}

/// A constraint-system piece of T^layer (k = None) or of S^layer_k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub k: Option<usize>,
    pub cs: ConstraintSystem,
}

#[derive(Clone, Debug)]
pub enum Repr {
    /// Bitsets over label indices: one for a T-set, one per phase for an S-set.
    Explicit(Vec<FixedBitSet>),
    /// Disjoint pieces.
    Pieces(Vec<Piece>),
}

/// A subset of T^layer or S^layer, tagged by the (ℓ, j) it came from and its side of Ĝ.
#[derive(Clone, Debug)]
pub struct PredecessorSet {
    pub layer: usize,
    pub ell: usize,
    pub j: usize,
    pub on_s: bool,
    pub side: Side,
    pub repr: Repr,
}

fn side_of(layer: usize, on_s: bool) -> Side {
    match (HardInstance::side_of_t(layer), on_s) {
        (s, false) => s,
        (Side::P, true) => Side::Q,
        (Side::Q, true) => Side::P,
    }
}

impl PredecessorSet {
    pub fn t_set(layer: usize, repr: Repr) -> Self {
        PredecessorSet { layer, ell: layer, j: 0, on_s: false, side: side_of(layer, false), repr }
    }

    /// T^ℓ ∖ T_*^ℓ as the pieces {y_{J_s} < thr_s, s < d; y_{J_d} ≥ thr_d}.
    pub fn t_minus_tstar_pieces(inst: &HardInstance, ell: usize) -> Self {
        let p = &inst.params;
        let spec = &inst.specs[ell];
        let m = p.m.clone();
        let pieces = (0..spec.phases)
            .map(|d| {
                let mut cs = ConstraintSystem::new();
                for s in 0..d {
                    cs.restrict(spec.j[s], IntervalSet::range(0u32, lower_bound(p, s)));
                }
                cs.restrict(spec.j[d], IntervalSet::range(lower_bound(p, d), m.clone()));
                Piece { k: None, cs }
            })
            .collect();
        Self::t_set(ell, Repr::Pieces(pieces))
    }

    pub fn t_star_pieces(inst: &HardInstance, ell: usize) -> Self {
        Self::t_set(ell, Repr::Pieces(vec![Piece { k: None, cs: inst.specs[ell].t_star(&inst.params) }]))
    }

    pub fn t_minus_tstar_explicit(inst: &HardInstance, ell: usize) -> Result<Self> {
        Ok(Self::t_set(ell, Repr::Explicit(vec![t_minus_tstar_explicit(inst, ell)?])))
    }

    pub fn count(&self, inst: &HardInstance) -> Result<BigUint> {
        match &self.repr {
            Repr::Explicit(b) => Ok(BigUint::from(b.iter().map(|x| x.count_ones(..) as u64).sum::<u64>())),
            Repr::Pieces(ps) => {
                let d = Dims::from(&inst.params);
                let mut t = BigUint::zero();
                for p in ps {
                    t += p.cs.count(&d)?;
                }
                Ok(t)
            }
        }
    }

    /// Membership of label x (in phase k for S-sets).
    pub fn contains(&self, inst: &HardInstance, k: Option<usize>, x: Label) -> bool {
        match &self.repr {
            Repr::Explicit(b) => b[k.unwrap_or(0)].contains(inst.codec.index(x) as usize),
            Repr::Pieces(ps) => {
                let d = Dims::from(&inst.params);
                let coords: Vec<u64> = inst.codec.unpack(x);
                ps.iter().any(|p| p.k == k && p.cs.contains_coords(&d, &coords))
            }
        }
    }

    /// Explicit bitsets of a piecewise set.
    pub fn to_explicit(&self, inst: &HardInstance) -> Result<Vec<FixedBitSet>> {
        match &self.repr {
            Repr::Explicit(b) => Ok(b.clone()),
            Repr::Pieces(ps) => {
                need_explicit(inst)?;
                let n = inst.n_labels() as usize;
                let parts = if self.on_s { inst.phases() } else { 1 };
                let mut out = vec![FixedBitSet::with_capacity(n); parts];
                let d = Dims::from(&inst.params);
                for p in ps {
                    let c = p.cs.compile(&d)?;
                    for x in c.members()? {
                        out[p.k.unwrap_or(0)].insert(inst.codec.index(x) as usize);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn pieces_downset(inst: &HardInstance, layer: usize, ps: &[Piece]) -> Result<Vec<Piece>> {
    let d = Dims::from(&inst.params);
    let mut out = Vec::new();
    for p in ps {
        for k in 0..inst.phases() {
            let cs = inst.specs[layer].downset_system(&inst.params, &p.cs, k)?;
            if !cs.is_trivially_empty() && !cs.count(&d)?.is_zero() {
                out.push(Piece { k: Some(k), cs });
            }
        }
    }
    Ok(out)
}

fn pieces_tau(inst: &HardInstance, layer: usize, ps: &[Piece]) -> Result<Vec<Piece>> {
    let g = &inst.glue[layer - 1];
    let p = &inst.params;
    let m = p.m_u64().unwrap();
    let mut out = Vec::new();
    for piece in ps {
        let k = piece.k.ok_or_else(|| Error::Range("τ needs an S-piece".into()))?;
        let lambda = p.k as u64 - k as u64;
        let q = g.rho[k].r;
        let mut cs = piece.cs.clone();
        if cs.residues != Some(IntervalSet::range(0u32, residue_bound(p, k))) {
            return Err(Error::Glue(format!("piece residue is not [0, W/{lambda})")));
        }
        if cs.coords.get(&q).is_some_and(|s| *s != IntervalSet::range(0u32, m)) {
            return Err(Error::Glue(format!("piece constrains q^{layer}_{k}")));
        }
        cs.residues = None;
        cs.coords.insert(q, IntervalSet::range(0u32, m / lambda));
        let ip = &g.i_prime[k];
        let lists: Vec<Vec<u32>> = ip
            .iter()
            .zip(&g.d_limits[k])
            .map(|(c, &lim)| cs.coords.get(c).map_or_else(|| (0..lim as u32).collect(), |s| s.values_u64(lim)))
            .collect();
        let carried: Vec<IntervalSet> =
            g.i_set.iter().map(|c| cs.coords.get(c).cloned().unwrap_or_else(|| IntervalSet::range(0u32, m))).collect();
        if lists.iter().any(|l| l.is_empty()) {
            continue;
        }
        let mut digits = vec![0usize; lists.len()];
        let mut tuple: Vec<u64> = lists.iter().map(|l| l[0] as u64).collect();
        'tuples: loop {
            let a = g.m_tuple(k, &tuple);
            let mut img = cs.clone();
            for (i, (&ic, &pc)) in g.i_set.iter().zip(ip).enumerate() {
                img.coords.insert(pc, carried[i].clone());
                img.coords.insert(ic, IntervalSet::point(a[i]));
            }
            out.push(Piece { k: None, cs: img });
            let mut i = lists.len();
            loop {
                if i == 0 {
                    break 'tuples;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < lists[i].len() {
                    tuple[i] = lists[i][digits[i]] as u64;
                    break;
                }
                digits[i] = 0;
                tuple[i] = lists[i][0] as u64;
            }
        }
    }
    Ok(out)
}

/// ν_{ℓ,j}(U) for U ⊆ T^ℓ, in U's representation.
pub fn nu(inst: &HardInstance, ell: usize, j: usize, u: &PredecessorSet) -> Result<PredecessorSet> {
    check_nu(inst, ell, j)?;
    if u.on_s || u.layer != ell {
        return Err(Error::Range(format!("ν_{{{ell},{j}}} needs a subset of T^{ell}")));
    }
    let repr = match &u.repr {
        Repr::Explicit(b) => Repr::Explicit(vec![nu_explicit(inst, ell, j, &b[0])?]),
        Repr::Pieces(ps) => {
            let mut cur = ps.clone();
            for step in 1..=j {
                let layer = ell + 1 - step;
                cur = pieces_tau(inst, layer, &pieces_downset(inst, layer, &cur)?)?;
            }
            Repr::Pieces(cur)
        }
    };
    let layer = ell - j;
    Ok(PredecessorSet { layer, ell, j, on_s: false, side: side_of(layer, false), repr })
}

/// μ_{ℓ,j}(U) = DownSet^{ℓ−j}(ν_{ℓ,j}(U)).
pub fn mu(inst: &HardInstance, ell: usize, j: usize, u: &PredecessorSet) -> Result<PredecessorSet> {
    let v = nu(inst, ell, j, u)?;
    let layer = v.layer;
    let repr = match &v.repr {
        Repr::Explicit(b) => Repr::Explicit(downset_explicit(inst, layer, &b[0])),
        Repr::Pieces(ps) => Repr::Pieces(pieces_downset(inst, layer, ps)?),
    };
    Ok(PredecessorSet { layer, ell, j, on_s: true, side: side_of(layer, true), repr })
}

/// Witness counts from the piecewise engine: A/B sizes as sums over the disjoint (ℓ, j) families.
pub fn witness_counts_piecewise(inst: &HardInstance) -> Result<WitnessCounts> {
    if !inst.params.is_glued() {
        return Err(Error::Params("witness sets need a glued instance".into()));
    }
    let mut s = [BigUint::zero(), BigUint::zero(), BigUint::zero(), BigUint::zero()];
    for ell in 0..inst.gadgets() {
        let u = PredecessorSet::t_minus_tstar_pieces(inst, ell);
        let even = ell % 2 == 0;
        for j in (0..=ell).step_by(2) {
            s[if even { 0 } else { 2 }] += nu(inst, ell, j, &u)?.count(inst)?;
            // |τ_*(μ_{ℓ,j})| = |μ_{ℓ,j}| since τ_* is injective.
            s[if even { 3 } else { 1 }] += mu(inst, ell, j, &u)?.count(inst)?;
        }
    }
    let c = |x: &BigUint| x.to_u64().ok_or_else(|| Error::Count("witness count overflows".into()));
    Ok(WitnessCounts::new(inst.n_p(), inst.n_q(), [c(&s[0])?, c(&s[1])?, c(&s[2])?, c(&s[3])?]))
}

/// Explicit tables when they fit, else piecewise.
pub fn witness_counts(inst: &HardInstance, oracle: &WitnessOracle) -> Result<WitnessCounts> {
    match oracle.counts() {
        Some(c) => Ok(c),
        None => witness_counts_piecewise(inst),
    }
}

/// Γ: every J, r, Ext and q coordinate of every gadget.
pub fn gamma(inst: &HardInstance) -> BTreeSet<usize> {
    let mut g = BTreeSet::new();
    for (spec, b) in inst.specs.iter().zip(&inst.layout.gadgets) {
        g.extend(spec.j.iter().copied());
        g.extend(b.r);
        g.extend(b.ext.iter().flatten().copied());
        g.extend(b.q.iter().flatten().copied());
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeReport {
    pub flips: u64,
    pub changes: u64,
    pub off_gamma: Vec<usize>,
}

/// Random off-Γ coordinate flips; counts flips that change the predecessor class.
pub fn gamma_probe(inst: &HardInstance, flips: u64, seed: u64) -> ProbeReport {
    let g = gamma(inst);
    let off: Vec<usize> = (0..inst.params.n).filter(|c| !g.contains(c)).collect();
    let mut changes = 0;
    if off.is_empty() {
        return ProbeReport { flips: 0, changes: 0, off_gamma: off };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.n_labels();
    let m = inst.codec.m;
    for _ in 0..flips {
        let ell = rng.gen_range(0..inst.gadgets());
        let x = inst.codec.from_index(rng.gen_range(0..n));
        let c = off[rng.gen_range(0..off.len())];
        let y = inst.codec.set(x, c, rng.gen_range(0..m));
        if classify(inst, ell, x) != classify(inst, ell, y) {
            changes += 1;
        }
    }
    ProbeReport { flips, changes, off_gamma: off }
}

#[derive(Clone, Debug, Default)]
pub struct FilterReport {
    pub scanned: u64,
    /// Edges in A_P × (Q∖B_Q).
    pub crossing: Vec<StreamedEdge>,
    /// Crossing edges with j ≠ J^ℓ_k.
    pub counterexamples: Vec<StreamedEdge>,
}

pub fn special_edges_filter(inst: &HardInstance, oracle: &WitnessOracle, edges: impl IntoIterator<Item = StreamedEdge>) -> FilterReport {
    let mut r = FilterReport::default();
    for e in edges {
        r.scanned += 1;
        if oracle.crosses(&e) {
            if !inst.is_special(&e) {
                r.counterexamples.push(e);
            }
            r.crossing.push(e);
        }
    }
    r
}

/// Explicit vertex cover of a matching and its size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverCertificate {
    pub matching: u64,
    /// P endpoints of matching edges in A_P × (Q∖B_Q) (glued), or in DownSet(T_*) × (T∖T_*) (α-mode).
    pub endpoints: Vec<u32>,
    /// |P∖A_P| (glued) or |S∖DownSet(T_*)| (α-mode).
    pub first: u64,
    /// |B_Q| (glued) or |T_*| (α-mode).
    pub second: u64,
    pub non_special: u64,
}

impl CoverCertificate {
    pub fn bound(&self) -> u64 {
        self.endpoints.len() as u64 + self.first + self.second
    }
}

fn check_matching(inst: &HardInstance, m: &[StreamedEdge]) -> Result<()> {
    let mut p = BTreeSet::new();
    let mut q = BTreeSet::new();
    for e in m {
        if !p.insert(e.p) || !q.insert(e.q) {
            return Err(Error::Matching(format!("edge ({}, {}) reuses a vertex", e.p, e.q)));
        }
        if !inst.edge_in_graph(e) {
            return Err(Error::Matching(format!("edge ({}, {}) is not in Ê", e.p, e.q)));
        }
    }
    Ok(())
}

/// Glued: one endpoint per edge of M ∩ (A_P×(Q∖B_Q)), plus P∖A_P, plus B_Q.
pub fn cover_bound(inst: &HardInstance, oracle: &WitnessOracle, counts: &WitnessCounts, m: &[StreamedEdge]) -> Result<CoverCertificate> {
    if !inst.params.is_glued() {
        return alpha_cover(inst, m);
    }
    check_matching(inst, m)?;
    let mut endpoints = Vec::new();
    let mut non_special = 0;
    for e in m {
        if oracle.crosses(e) {
            endpoints.push(e.p);
            non_special += u64::from(!inst.is_special(e));
        } else if oracle.in_a_p(e.p) && !oracle.in_b_q(e.q) {
            return Err(Error::Matching("cover certificate misses an edge".into()));
        }
    }
    Ok(CoverCertificate { matching: m.len() as u64, endpoints, first: counts.n_p - counts.a_p, second: counts.b_q, non_special })
}

/// |S∖DownSet(T_*)| and |T_*| for the single gadget, from the counting oracle.
pub fn alpha_components(inst: &HardInstance) -> Result<(BigUint, BigUint)> {
    let p = &inst.params;
    let d = Dims::from(p);
    let spec = &inst.specs[0];
    let t_star = spec.t_star(p);
    let mut s = BigUint::zero();
    let mut down = BigUint::zero();
    for k in 0..spec.phases {
        s += spec.s_k(p, k)?.count(&d)?;
        down += spec.downset_system(p, &t_star, k)?.count(&d)?;
    }
    Ok((s - down, t_star.count(&d)?))
}

/// Single gadget: one endpoint per edge of M in DownSet(T_*)×(T∖T_*), plus S∖DownSet(T_*), plus T_*.
pub fn alpha_cover(inst: &HardInstance, m: &[StreamedEdge]) -> Result<CoverCertificate> {
    check_matching(inst, m)?;
    let v = inst.view(0);
    let mut endpoints = Vec::new();
    let mut non_special = 0;
    for e in m {
        if e.is_terminal() {
            continue;
        }
        let s = inst.vertex_at(Side::Q, e.q)?.label;
        let t = inst.vertex_at(Side::P, e.p)?.label;
        if v.in_t_star(s) && !v.in_t_star(t) {
            endpoints.push(e.p);
            non_special += u64::from(!inst.is_special(e));
        }
    }
    let (first, second) = alpha_components(inst)?;
    let c = |x: BigUint| x.to_u64().ok_or_else(|| Error::Count("cover overflows".into()));
    Ok(CoverCertificate { matching: m.len() as u64, endpoints, first: c(first)?, second: c(second)?, non_special })
}

/// Edges of DownSet(T_*)×(T∖T_*) outside ⋃_k E_{k,J_k}, over the whole stream. Returns (checked, violations).
pub fn key_violations(inst: &HardInstance) -> (u64, Vec<StreamedEdge>) {
    let v = inst.view(0);
    let mut checked = 0;
    let mut bad = Vec::new();
    for e in inst.stream().filter(|e| !e.is_terminal() && e.ell == 0) {
        let s = inst.vertex_at(Side::Q, e.q).unwrap().label;
        let t = inst.vertex_at(Side::P, e.p).unwrap().label;
        if v.in_t_star(s) && !v.in_t_star(t) {
            checked += 1;
            if !inst.is_special(&e) {
                bad.push(e);
            }
        }
    }
    (checked, bad)
}
