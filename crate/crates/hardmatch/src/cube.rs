use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::params::ToyParams;
use crate::{Error, Result};

/// Labels beyond this many points are never enumerated.
pub const EXPLICIT_CAP: u64 = 1 << 25;
/// Largest alphabet for which per-coordinate lookup tables are built.
const TABLE_CAP: u64 = 1 << 20;

/// A point of [m]^n, packed little-endian with ⌈log2 m⌉ bits per coordinate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(pub u64);

pub fn weight(coords: &[u64]) -> u64 {
    coords.iter().sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codec {
    pub n: usize,
    pub m: u64,
    pub bits: u32,
    mask: u64,
}

impl Codec {
    pub fn new(n: usize, m: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Params(format!("alphabet size m={m} < 2")));
        }
        let bits = 64 - (m - 1).leading_zeros();
        if bits as usize * n > 64 {
            return Err(Error::Cap {
                what: format!("packed label ({n} coordinates of {bits} bits)"),
                size: format!("2^{}", bits as usize * n),
                cap: u64::MAX,
            });
        }
        Ok(Codec { n, m, bits, mask: (1u64 << bits) - 1 })
    }

    pub fn for_params(p: &ToyParams) -> Result<Self> {
        let m = p.m_u64().ok_or_else(|| Error::Params("m does not fit in 64 bits; this operation needs explicit labels".into()))?;
        Codec::new(p.n, m)
    }

    #[inline]
    pub fn get(&self, x: Label, j: usize) -> u64 {
        (x.0 >> (j as u32 * self.bits)) & self.mask
    }

    #[inline]
    pub fn set(&self, x: Label, j: usize, v: u64) -> Label {
        let sh = j as u32 * self.bits;
        Label((x.0 & !(self.mask << sh)) | (v << sh))
    }

    pub fn pack(&self, coords: &[u64]) -> Label {
        debug_assert_eq!(coords.len(), self.n);
        let mut x = 0u64;
        for (j, &c) in coords.iter().enumerate() {
            debug_assert!(c < self.m);
            x |= c << (j as u32 * self.bits);
        }
        Label(x)
    }

    pub fn unpack(&self, x: Label) -> Vec<u64> {
        (0..self.n).map(|j| self.get(x, j)).collect()
    }

    #[inline]
    pub fn weight(&self, x: Label) -> u64 {
        let mut v = x.0;
        let mut s = 0;
        for _ in 0..self.n {
            s += v & self.mask;
            v >>= self.bits;
        }
        s
    }

    pub fn is_valid(&self, x: Label) -> bool {
        (self.bits as usize * self.n == 64 || x.0 >> (self.bits as usize * self.n) == 0) && (0..self.n).all(|j| self.get(x, j) < self.m)
    }

    /// m^n when it fits in u64.
    pub fn size(&self) -> Option<u64> {
        let mut s = 1u64;
        for _ in 0..self.n {
            s = s.checked_mul(self.m)?;
        }
        Some(s)
    }

    /// Mixed-radix index with coordinate 0 least significant; equals the
    /// packed value when m is a power of two.
    pub fn index(&self, x: Label) -> u64 {
        let mut i = 0;
        for j in (0..self.n).rev() {
            i = i * self.m + self.get(x, j);
        }
        i
    }

    pub fn from_index(&self, mut i: u64) -> Label {
        let mut x = Label(0);
        for j in 0..self.n {
            x = self.set(x, j, i % self.m);
            i /= self.m;
        }
        x
    }

    pub fn all(&self) -> Result<impl Iterator<Item = Label> + '_> {
        let n = self.size().filter(|&s| s <= EXPLICIT_CAP).ok_or_else(|| Error::Cap {
            what: "cube".into(),
            size: format!("{}^{}", self.m, self.n),
            cap: EXPLICIT_CAP,
        })?;
        Ok((0..n).map(move |i| self.from_index(i)))
    }
}

/// Disjoint, sorted half-open integer intervals.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IntervalSet {
    ivs: Vec<(BigUint, BigUint)>,
}

impl IntervalSet {
    pub fn new(ivs: impl IntoIterator<Item = (BigUint, BigUint)>) -> Self {
        let mut v: Vec<_> = ivs.into_iter().filter(|(a, b)| a < b).collect();
        v.sort();
        let mut out: Vec<(BigUint, BigUint)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => out.push((a, b)),
            }
        }
        IntervalSet { ivs: out }
    }

    pub fn range(lo: impl Into<BigUint>, hi: impl Into<BigUint>) -> Self {
        Self::new([(lo.into(), hi.into())])
    }

    pub fn point(v: impl Into<BigUint>) -> Self {
        let v = v.into();
        let h = &v + 1u32;
        Self::new([(v, h)])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_values(vals: impl IntoIterator<Item = u64>) -> Self {
        Self::new(vals.into_iter().map(|v| (BigUint::from(v), BigUint::from(v + 1))))
    }

    pub fn intervals(&self) -> &[(BigUint, BigUint)] {
        &self.ivs
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn mass(&self) -> BigUint {
        self.ivs.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, v: &BigUint) -> bool {
        self.ivs.iter().any(|(a, b)| a <= v && v < b)
    }

    pub fn intersect(&self, o: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for (a, b) in &self.ivs {
            for (c, d) in &o.ivs {
                let lo = a.max(c).clone();
                let hi = b.min(d).clone();
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        IntervalSet::new(out)
    }

    pub fn clip(&self, bound: &BigUint) -> IntervalSet {
        self.intersect(&IntervalSet::range(BigUint::zero(), bound.clone()))
    }

    pub fn values_u64(&self, bound: u64) -> Vec<u32> {
        let mut v = Vec::new();
        for (a, b) in &self.clip(&BigUint::from(bound)).ivs {
            let (a, b) = (a.to_u64().unwrap(), b.to_u64().unwrap());
            v.extend((a..b).map(|x| x as u32));
        }
        v
    }
}

/// Dimensions needed to count: n, m, W.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: BigUint,
    pub w: BigUint,
}

impl From<&ToyParams> for Dims {
    fn from(p: &ToyParams) -> Self {
        Dims { n: p.n, m: p.m.clone(), w: p.w.clone() }
    }
}

/// Per-coordinate interval constraints and an optional residue set for wt(x) mod W.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConstraintSystem {
    pub coords: BTreeMap<usize, IntervalSet>,
    pub residues: Option<IntervalSet>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn restrict(&mut self, j: usize, set: IntervalSet) {
        let s = match self.coords.remove(&j) {
            Some(old) => old.intersect(&set),
            None => set,
        };
        self.coords.insert(j, s);
    }

    pub fn with(mut self, j: usize, set: IntervalSet) -> Self {
        self.restrict(j, set);
        self
    }

    pub fn with_residues(mut self, set: IntervalSet) -> Self {
        self.residues = Some(match self.residues.take() {
            Some(old) => old.intersect(&set),
            None => set,
        });
        self
    }

    pub fn intersect(&self, o: &ConstraintSystem) -> ConstraintSystem {
        let mut r = self.clone();
        for (j, s) in &o.coords {
            r.restrict(*j, s.clone());
        }
        if let Some(res) = &o.residues {
            r = r.with_residues(res.clone());
        }
        r
    }

    pub fn is_trivially_empty(&self) -> bool {
        self.coords.values().any(|s| s.is_empty()) || self.residues.as_ref().is_some_and(|r| r.is_empty())
    }

    /// Exact cardinality. A residue constraint needs a free coordinate, whose
    /// weight residue is then uniform because W | m.
    pub fn count(&self, d: &Dims) -> Result<BigUint> {
        let mut total = BigUint::one();
        for (&j, s) in &self.coords {
            if j >= d.n {
                return Err(Error::Range(format!("coordinate {j} ≥ n={}", d.n)));
            }
            total *= s.clip(&d.m).mass();
        }
        let free = d.n - self.coords.len();
        match &self.residues {
            None => Ok(total * num_traits::pow(d.m.clone(), free)),
            Some(res) => {
                if free == 0 {
                    let size = num_traits::pow(d.m.clone(), d.n);
                    if size <= BigUint::from(EXPLICIT_CAP) {
                        return Ok(BigUint::from(self.compile(d)?.count()));
                    }
                    return Err(Error::Count("residue constraint with no free coordinate".into()));
                }
                if d.w.is_zero() || !(&d.m % &d.w).is_zero() {
                    return Err(Error::Count("W ∤ m".into()));
                }
                let per_free = (&d.m / &d.w) * res.clip(&d.w).mass();
                Ok(total * num_traits::pow(d.m.clone(), free - 1) * per_free)
            }
        }
    }

    pub fn contains_coords(&self, d: &Dims, x: &[u64]) -> bool {
        for (&j, s) in &self.coords {
            if !s.contains(&BigUint::from(x[j])) {
                return false;
            }
        }
        match &self.residues {
            None => true,
            Some(r) => {
                let wt: BigUint = x.iter().map(|&c| BigUint::from(c)).sum();
                r.contains(&(wt % &d.w))
            }
        }
    }

    pub fn compile(&self, d: &Dims) -> Result<Compiled> {
        Compiled::new(self, d)
    }
}

#[inline]
fn select_nth(ivs: &[(u64, u64)], mut i: u64) -> u64 {
    for &(a, b) in ivs {
        if i < b - a {
            return a + i;
        }
        i -= b - a;
    }
    unreachable!("select past the end of a residue set")
}

/// A constraint system with lookup tables for fast membership, ranking and enumeration.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub codec: Codec,
    w: u64,
    constrained: Vec<usize>,
    pos: Vec<Vec<u32>>,
    allowed: Vec<Vec<u32>>,
    order: Vec<usize>,
    pivot: Option<usize>,
    res_ivs: Vec<(u64, u64)>,
    res_prefix: Vec<u64>,
    res_count: u64,
    count: u64,
}

const NONE: u32 = u32::MAX;

impl Compiled {
    fn new(cs: &ConstraintSystem, d: &Dims) -> Result<Self> {
        let m = d.m.to_u64().filter(|&m| m <= TABLE_CAP).ok_or_else(|| Error::Cap {
            what: "alphabet for compiled constraint system".into(),
            size: d.m.to_string(),
            cap: TABLE_CAP,
        })?;
        let w =
            d.w.to_u64()
                .filter(|&w| w <= TABLE_CAP && w > 0 && m % w == 0)
                .ok_or_else(|| Error::Count(format!("W={} unusable with m={m}", d.w)))?;
        let codec = Codec::new(d.n, m)?;
        let mut pos = vec![Vec::new(); d.n];
        let mut allowed = vec![Vec::new(); d.n];
        let mut constrained = Vec::new();
        for j in 0..d.n {
            let vals: Vec<u32> = match cs.coords.get(&j) {
                Some(s) => {
                    constrained.push(j);
                    s.values_u64(m)
                }
                None => (0..m as u32).collect(),
            };
            let mut p = vec![NONE; m as usize];
            for (i, &v) in vals.iter().enumerate() {
                p[v as usize] = i as u32;
            }
            pos[j] = p;
            allowed[j] = vals;
        }
        let (pivot, res_ivs) = match &cs.residues {
            None => (None, vec![]),
            Some(r) => {
                let ivs: Vec<(u64, u64)> =
                    r.clip(&BigUint::from(w)).intervals().iter().map(|(a, b)| (a.to_u64().unwrap(), b.to_u64().unwrap())).collect();
                ((0..d.n).find(|j| !cs.coords.contains_key(j)), ivs)
            }
        };
        if cs.residues.is_some() && pivot.is_none() {
            // No free coordinate: fall back to filtering an enumeration without a pivot.
            return Self::without_pivot(cs, d, codec, w, pos, allowed, constrained, res_ivs);
        }
        let mut res_prefix = vec![0u64; w as usize + 1];
        if cs.residues.is_some() {
            let mut ok = vec![false; w as usize];
            for &(a, b) in &res_ivs {
                for u in a..b {
                    ok[u as usize] = true;
                }
            }
            for u in 0..w as usize {
                res_prefix[u + 1] = res_prefix[u] + ok[u] as u64;
            }
        }
        let res_count = res_prefix[w as usize];
        let order: Vec<usize> = (0..d.n).rev().filter(|&j| Some(j) != pivot).collect();
        let mut count: u128 = 1;
        for &j in &order {
            count *= allowed[j].len() as u128;
        }
        if pivot.is_some() {
            count *= (m / w) as u128 * res_count as u128;
        }
        let count =
            u64::try_from(count).map_err(|_| Error::Cap { what: "compiled system".into(), size: count.to_string(), cap: u64::MAX })?;
        Ok(Compiled { codec, w, constrained, pos, allowed, order, pivot, res_ivs, res_prefix, res_count, count })
    }

    #[allow(clippy::too_many_arguments)]
    fn without_pivot(
        cs: &ConstraintSystem,
        d: &Dims,
        codec: Codec,
        w: u64,
        pos: Vec<Vec<u32>>,
        allowed: Vec<Vec<u32>>,
        constrained: Vec<usize>,
        res_ivs: Vec<(u64, u64)>,
    ) -> Result<Self> {
        let size: u128 = allowed.iter().map(|a| a.len() as u128).product();
        if size > EXPLICIT_CAP as u128 {
            return Err(Error::Count("residue constraint with no free coordinate".into()));
        }
        let base = Compiled {
            codec,
            w,
            constrained,
            pos,
            allowed,
            order: (0..d.n).rev().collect(),
            pivot: None,
            res_ivs: vec![],
            res_prefix: vec![0; w as usize + 1],
            res_count: 0,
            count: size as u64,
        };
        let _ = cs;
        let under: Vec<Label> = (0..base.count).map(|r| base.unrank(r)).collect();
        let keep = under.into_iter().filter(|&x| res_ivs.iter().any(|&(a, b)| (a..b).contains(&(base.codec.weight(x) % w))));
        Ok(Compiled { count: keep.count() as u64, res_ivs, ..base }.mark_unrankable())
    }

    fn mark_unrankable(mut self) -> Self {
        self.res_count = u64::MAX;
        self
    }

    fn rankable(&self) -> bool {
        self.res_count != u64::MAX
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    fn residue_ok(&self, r: u64) -> bool {
        self.res_ivs.iter().any(|&(a, b)| a <= r && r < b)
    }

    #[inline]
    pub fn contains(&self, x: Label) -> bool {
        for &j in &self.constrained {
            if self.pos[j][self.codec.get(x, j) as usize] == NONE {
                return false;
            }
        }
        if self.pivot.is_some() || !self.rankable() {
            return self.residue_ok(self.codec.weight(x) % self.w);
        }
        true
    }

    #[inline]
    fn cum(&self, x: u64) -> u64 {
        (x / self.w) * self.res_count + self.res_prefix[(x % self.w) as usize]
    }

    /// Dense rank in 0..count; None if x is outside the set.
    pub fn rank(&self, x: Label) -> Option<u64> {
        if !self.rankable() {
            panic!("rank on a residue system without a free coordinate");
        }
        if !self.contains(x) {
            return None;
        }
        let mut r = 0u64;
        for &j in &self.order {
            r = r * self.allowed[j].len() as u64 + self.pos[j][self.codec.get(x, j) as usize] as u64;
        }
        if let Some(p) = self.pivot {
            let xp = self.codec.get(x, p);
            let s = (self.codec.weight(x) - xp) % self.w;
            let idx = (xp / self.w) * self.res_count + self.cum(s + xp % self.w) - self.cum(s);
            r = r * (self.codec.m / self.w * self.res_count) + idx;
        }
        Some(r)
    }

    pub fn unrank(&self, mut r: u64) -> Label {
        debug_assert!(r < self.count);
        let mut idx = 0;
        if self.pivot.is_some() {
            let pv = self.codec.m / self.w * self.res_count;
            idx = r % pv;
            r /= pv;
        }
        let mut x = Label(0);
        let mut s = 0u64;
        for &j in self.order.iter().rev() {
            let rad = self.allowed[j].len() as u64;
            let v = self.allowed[j][(r % rad) as usize] as u64;
            r /= rad;
            x = self.codec.set(x, j, v);
            s += v;
        }
        if let Some(p) = self.pivot {
            let s = s % self.w;
            let a = idx / self.res_count;
            let target = self.cum(s) + idx % self.res_count;
            let u = (target / self.res_count) * self.w + select_nth(&self.res_ivs, target % self.res_count);
            x = self.codec.set(x, p, a * self.w + (u - s));
        }
        x
    }

    pub fn members(&self) -> Result<Box<dyn Iterator<Item = Label> + '_>> {
        if self.count > EXPLICIT_CAP {
            return Err(Error::Cap { what: "constraint system".into(), size: self.count.to_string(), cap: EXPLICIT_CAP });
        }
        if self.rankable() {
            Ok(Box::new((0..self.count).map(move |r| self.unrank(r))))
        } else {
            let total: u64 = self.allowed.iter().map(|a| a.len() as u64).product();
            let base = Compiled { pivot: None, res_count: 0, count: total, ..self.clone() };
            let v: Vec<Label> = (0..total).map(|r| base.unrank(r)).filter(|&x| self.contains(x)).collect();
            Ok(Box::new(v.into_iter()))
        }
    }

    /// Allowed values of one coordinate, ascending.
    pub fn allowed(&self, j: usize) -> &[u32] {
        &self.allowed[j]
    }

    pub fn constrains(&self, j: usize) -> bool {
        self.constrained.contains(&j)
    }

    pub fn has_residues(&self) -> bool {
        self.pivot.is_some() || !self.rankable()
    }
}

/// Axis-parallel line: all points agreeing with `rep` off `direction`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Line {
    pub direction: usize,
    pub rep: Label,
}

impl Line {
    pub fn through(codec: &Codec, x: Label, j: usize) -> Line {
        Line { direction: j, rep: codec.set(x, j, 0) }
    }

    pub fn members<'a>(&self, codec: &'a Codec) -> impl Iterator<Item = Label> + 'a {
        let (rep, j) = (self.rep, self.direction);
        (0..codec.m).map(move |v| codec.set(rep, j, v))
    }
}

/// Odometer over a product of per-coordinate value lists, coordinate 0 fastest.
pub struct Product {
    codec: Codec,
    coords: Vec<usize>,
    lists: Vec<Vec<u32>>,
    digits: Vec<usize>,
    cur: Label,
    done: bool,
}

impl Product {
    pub fn new(codec: &Codec, base: Label, mut spec: Vec<(usize, Vec<u32>)>) -> Self {
        spec.sort_by_key(|(j, _)| *j);
        let done = spec.iter().any(|(_, l)| l.is_empty());
        let mut cur = base;
        for (j, l) in &spec {
            if let Some(&v) = l.first() {
                cur = codec.set(cur, *j, v as u64);
            }
        }
        let (coords, lists): (Vec<_>, Vec<_>) = spec.into_iter().unzip();
        Product { codec: codec.clone(), digits: vec![0; coords.len()], coords, lists, cur, done }
    }
}

impl Iterator for Product {
    type Item = Label;

    fn next(&mut self) -> Option<Label> {
        if self.done {
            return None;
        }
        let out = self.cur;
        let mut i = 0;
        loop {
            if i == self.coords.len() {
                self.done = true;
                break;
            }
            self.digits[i] += 1;
            if self.digits[i] < self.lists[i].len() {
                self.cur = self.codec.set(self.cur, self.coords[i], self.lists[i][self.digits[i]] as u64);
                break;
            }
            self.digits[i] = 0;
            self.cur = self.codec.set(self.cur, self.coords[i], self.lists[i][0] as u64);
            i += 1;
        }
        Some(out)
    }
}

/// Lines in direction j meeting `region`, in increasing order of representative.
pub fn line_cover<'a>(j: usize, region: &'a Compiled) -> impl Iterator<Item = Line> + 'a {
    let codec = region.codec.clone();
    let spec: Vec<(usize, Vec<u32>)> = (0..codec.n).filter(|&c| c != j).map(|c| (c, region.allowed(c).to_vec())).collect();
    let check = region.constrains(j) || region.has_residues();
    let codec2 = codec.clone();
    Product::new(&codec, Label(0), spec)
        .map(move |rep| Line { direction: j, rep })
        .filter(move |l| !check || l.members(&codec2).any(|x| region.contains(x)))
}

pub fn biguint_to_u64(x: &BigUint, what: &str) -> Result<u64> {
    x.to_u64().ok_or_else(|| Error::Cap { what: what.into(), size: x.to_string(), cap: u64::MAX })
}

pub fn is_multiple(a: &BigUint, b: &BigUint) -> bool {
    !b.is_zero() && a.is_multiple_of(b)
}
