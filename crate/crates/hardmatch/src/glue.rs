use serde::{Deserialize, Serialize};

use crate::cube::{Codec, Label};
use crate::gadget::GadgetSpec;
use crate::params::ToyParams;
use crate::{Error, Result};

/// Explicit M tables are kept up to this many points of A.
pub const TABLE_LIMIT: u64 = 1 << 20;

/// The (λ, r)-densifying map: x_r = aW + b(W/λ) + c ↦ aW/λ + c.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensifyingMap {
    pub lambda: u64,
    pub r: usize,
}

impl DensifyingMap {
    pub fn new(lambda: u64, r: usize, w: u64) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::Glue(format!("densifying map needs λ ≥ 2, got {lambda}")));
        }
        if w % lambda != 0 {
            return Err(Error::Glue(format!("λ={lambda} ∤ W={w}")));
        }
        Ok(DensifyingMap { lambda, r })
    }

    #[inline]
    pub fn apply(&self, codec: &Codec, w: u64, x: Label) -> Label {
        let step = w / self.lambda;
        let v = codec.get(x, self.r);
        codec.set(x, self.r, (v / w) * step + v % step)
    }

    /// Inverse on inputs whose weight residue lies in [0, W/λ).
    #[inline]
    pub fn invert(&self, codec: &Codec, w: u64, y: Label) -> Label {
        let step = w / self.lambda;
        let v = codec.get(y, self.r);
        let (a, c) = (v / step, v % step);
        let rest = (codec.weight(y) - v) % w;
        let level = ((rest + c) % w) / step;
        let b = (self.lambda - level) % self.lambda;
        codec.set(y, self.r, a * w + b * step + c)
    }
}

fn rank_tuple(vals: impl Iterator<Item = u64>, limits: &[u64]) -> u64 {
    vals.zip(limits).fold(0, |r, (v, &lim)| r * lim + v)
}

fn unrank_tuple(mut r: u64, limits: &[u64], out: &mut [u64]) {
    for i in (0..limits.len()).rev() {
        out[i] = r % limits[i];
        r /= limits[i];
    }
}

/// Maps identifying S^ℓ with the terminal subcube of gadget ℓ−1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlueTables {
    pub ell: usize,
    pub m: u64,
    pub w: u64,
    /// I = J^{ℓ−1} ∪ {r^{ℓ−1}}, sorted.
    pub i_set: Vec<usize>,
    /// A = ∏ [0, a_limits[i]) over I.
    pub a_limits: Vec<u64>,
    pub a_size: u64,
    /// I'_k = J^ℓ_{<k} ∪ Ext^ℓ_k ∪ {q^ℓ_k}, sorted; η_k sends I[i] to I'_k[i].
    pub i_prime: Vec<Vec<usize>>,
    pub d_limits: Vec<Vec<u64>>,
    pub d_offset: Vec<u64>,
    pub rho: Vec<DensifyingMap>,
    /// Rank in ⊎D_k to rank in A; absent means the rank-order identity.
    pub m_table: Option<Vec<u32>>,
    pub m_inv: Option<Vec<u32>>,
}

impl GlueTables {
    pub fn build(p: &ToyParams, prev: &GadgetSpec, cur: &GadgetSpec) -> Result<Self> {
        let m = p.m_u64().ok_or_else(|| Error::Glue("m too large for glue tables".into()))?;
        let w = p.w_u64().unwrap();
        let k_par = p.k as u64;
        let half = p.phases as usize;
        if prev.phases != half || cur.phases != half {
            return Err(Error::Glue("gluing needs K/2 phases per gadget".into()));
        }
        let thr = |s: usize| m - m / (k_par - s as u64);
        let r = prev.blocks.r.ok_or_else(|| Error::Glue(format!("gadget {} has no r", prev.ell)))?;
        let mut i_pairs: Vec<(usize, u64)> = Vec::new();
        for (s, &js) in prev.j.iter().enumerate() {
            i_pairs.push((js, if s < half { thr(s) } else { m }));
        }
        i_pairs.push((r, m));
        i_pairs.sort();
        if i_pairs.windows(2).any(|x| x[0].0 == x[1].0) {
            return Err(Error::Glue(format!("I^{} has repeated coordinates", prev.ell)));
        }
        if i_pairs.len() != half + 2 {
            return Err(Error::Glue(format!("|I| = {} ≠ K/2+2", i_pairs.len())));
        }
        let (i_set, a_limits): (Vec<usize>, Vec<u64>) = i_pairs.into_iter().unzip();
        let a_size = checked_product(&a_limits)?;

        let mut i_prime = Vec::new();
        let mut d_limits = Vec::new();
        let mut d_offset = vec![0u64];
        let mut rho = Vec::new();
        for k in 0..half {
            let q = cur.blocks.q.get(k).copied().flatten().ok_or_else(|| Error::Glue(format!("q^{}_{k} missing", cur.ell)))?;
            let ext = cur.blocks.ext.get(k).cloned().unwrap_or_default();
            let mut pairs: Vec<(usize, u64)> = (0..k).map(|s| (cur.j[s], thr(s))).collect();
            pairs.extend(ext.iter().map(|&e| (e, m)));
            pairs.push((q, m / (k_par - k as u64)));
            pairs.sort();
            if pairs.windows(2).any(|x| x[0].0 == x[1].0) {
                return Err(Error::Glue(format!("I'^{}_{k} has repeated coordinates", cur.ell)));
            }
            if pairs.len() != half + 2 {
                return Err(Error::Glue(format!("|I'^{}_{k}| = {} ≠ K/2+2", cur.ell, pairs.len())));
            }
            if pairs.iter().any(|(c, _)| i_set.contains(c)) {
                return Err(Error::Glue(format!("I'^{}_{k} meets I^{}", cur.ell, prev.ell)));
            }
            let (ip, lim): (Vec<usize>, Vec<u64>) = pairs.into_iter().unzip();
            let size = checked_product(&lim)?;
            d_offset.push(d_offset[k] + size);
            i_prime.push(ip);
            d_limits.push(lim);
            rho.push(DensifyingMap::new(k_par - k as u64, q, w)?);
        }
        if d_offset[half] != a_size {
            return Err(Error::Glue(format!("Σ|D_k| = {} ≠ |A| = {a_size}", d_offset[half])));
        }
        let (m_table, m_inv) = if a_size <= TABLE_LIMIT {
            let t: Vec<u32> = (0..a_size as u32).collect();
            (Some(t.clone()), Some(t))
        } else {
            (None, None)
        };
        Ok(GlueTables { ell: cur.ell, m, w, i_set, a_limits, a_size, i_prime, d_limits, d_offset, rho, m_table, m_inv })
    }

    pub fn phases(&self) -> usize {
        self.i_prime.len()
    }

    pub fn d_size(&self, k: usize) -> u64 {
        self.d_offset[k + 1] - self.d_offset[k]
    }

    /// Structural problems with a (possibly loaded) table set.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let (Some(t), Some(inv)) = (&self.m_table, &self.m_inv) {
            if t.len() as u64 != self.a_size || inv.len() as u64 != self.a_size {
                v.push(format!("M table size {} ≠ |A| = {}", t.len(), self.a_size));
            } else {
                let mut seen = vec![false; t.len()];
                for (i, &x) in t.iter().enumerate() {
                    if x as u64 >= self.a_size || seen[x as usize] {
                        v.push(format!("M^{} is not a bijection", self.ell));
                        break;
                    }
                    seen[x as usize] = true;
                    if inv[x as usize] as usize != i {
                        v.push(format!("M^{} inverse table disagrees at {i}", self.ell));
                        break;
                    }
                }
            }
        }
        if *self.d_offset.last().unwrap() != self.a_size {
            v.push(format!("Σ|D_k| ≠ |A| for gadget {}", self.ell));
        }
        v
    }

    #[inline]
    fn m_fwd(&self, i: u64) -> u64 {
        self.m_table.as_ref().map_or(i, |t| t[i as usize] as u64)
    }

    #[inline]
    fn m_back(&self, i: u64) -> u64 {
        self.m_inv.as_ref().map_or(i, |t| t[i as usize] as u64)
    }

    pub fn in_d(&self, codec: &Codec, k: usize, z: Label) -> bool {
        self.i_prime[k].iter().zip(&self.d_limits[k]).all(|(&c, &lim)| codec.get(z, c) < lim)
    }

    pub fn in_a(&self, codec: &Codec, t: Label) -> bool {
        self.i_set.iter().zip(&self.a_limits).all(|(&c, &lim)| codec.get(t, c) < lim)
    }

    /// M applied to the I'_k-part of z, as a tuple over I.
    pub fn m_of(&self, codec: &Codec, k: usize, z: Label) -> Vec<u64> {
        let rd = rank_tuple(self.i_prime[k].iter().map(|&c| codec.get(z, c)), &self.d_limits[k]);
        let ra = self.m_fwd(self.d_offset[k] + rd);
        let mut a = vec![0; self.i_set.len()];
        unrank_tuple(ra, &self.a_limits, &mut a);
        a
    }

    /// M on a D_k tuple (ordered as I'_k), returned as an A tuple (ordered as I).
    pub fn m_tuple(&self, k: usize, d: &[u64]) -> Vec<u64> {
        let rd = rank_tuple(d.iter().copied(), &self.d_limits[k]);
        let ra = self.m_fwd(self.d_offset[k] + rd);
        let mut a = vec![0; self.i_set.len()];
        unrank_tuple(ra, &self.a_limits, &mut a);
        a
    }

    /// Π_k: z_{I'_k} ← z_I via η_k, z_I ← M(z_{I'_k}); nothing else moves.
    pub fn pi_apply(&self, codec: &Codec, k: usize, z: Label) -> Result<Label> {
        if !self.in_d(codec, k, z) {
            return Err(Error::Glue(format!("z_{{I'_{k}}} ∉ D_{k}")));
        }
        let a = self.m_of(codec, k, z);
        let mut out = z;
        for (idx, (&i, &ip)) in self.i_set.iter().zip(&self.i_prime[k]).enumerate() {
            out = codec.set(out, ip, codec.get(z, i));
            out = codec.set(out, i, a[idx]);
        }
        Ok(out)
    }

    /// Inverse of Π over the union of the k-pieces; returns the piece index.
    pub fn pi_invert(&self, codec: &Codec, t: Label) -> Result<(usize, Label)> {
        if !self.in_a(codec, t) {
            return Err(Error::Glue("t_I ∉ A".into()));
        }
        let ra = rank_tuple(self.i_set.iter().map(|&c| codec.get(t, c)), &self.a_limits);
        let idx = self.m_back(ra);
        let k = self.d_offset.partition_point(|&o| o <= idx) - 1;
        let mut d = vec![0; self.i_prime[k].len()];
        unrank_tuple(idx - self.d_offset[k], &self.d_limits[k], &mut d);
        let mut out = t;
        for (n, (&i, &ip)) in self.i_set.iter().zip(&self.i_prime[k]).enumerate() {
            out = codec.set(out, i, codec.get(t, ip));
            out = codec.set(out, ip, d[n]);
        }
        Ok((k, out))
    }

    /// τ_k = Π_k ∘ ρ_k on S^ℓ_k.
    #[inline]
    pub fn tau_apply(&self, codec: &Codec, k: usize, x: Label) -> Result<Label> {
        self.pi_apply(codec, k, self.rho[k].apply(codec, self.w, x))
    }

    pub fn tau_invert(&self, codec: &Codec, t: Label) -> Result<(usize, Label)> {
        let (k, y) = self.pi_invert(codec, t).map_err(|_| Error::Glue("t ∉ T_*".into()))?;
        Ok((k, self.rho[k].invert(codec, self.w, y)))
    }

    /// Coordinates τ may change.
    pub fn support(&self, k: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.i_set.iter().chain(&self.i_prime[k]).copied().collect();
        s.sort();
        s
    }
}

fn checked_product(v: &[u64]) -> Result<u64> {
    v.iter().try_fold(1u64, |a, &b| a.checked_mul(b)).ok_or_else(|| Error::Glue("table size overflows u64".into()))
}
