use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_K_CAP: u32 = 64;

pub fn lcm_upto(k: u32) -> BigUint {
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc = acc.lcm(&BigUint::from(i));
    }
    acc
}

/// W = lcm(1..=K) and m = W².
pub fn derive_params(k: u32) -> Result<(BigUint, BigUint)> {
    derive_params_capped(k, DEFAULT_K_CAP)
}

pub fn derive_params_capped(k: u32, cap: u32) -> Result<(BigUint, BigUint)> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::Params(format!("K must be an even integer ≥ 2, got {k}")));
    }
    if k > cap {
        return Err(Error::Params(format!("K={k} exceeds the cap of {cap}; m = lcm(1..K)² would be too large")));
    }
    let w = lcm_upto(k);
    let m = &w * &w;
    Ok((m, w))
}

/// ⌊(1 − 1/e)·K⌋, the phase count of the single-gadget α-mode.
pub fn alpha_tilde(k: u32) -> u32 {
    ((1.0 - (-1.0f64).exp()) * k as f64).floor() as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Glued,
    Standalone,
}

/// Where glue-only coordinates go. `Uniform` gives every gadget Ext/q/r;
/// `Trimmed` drops Ext/q on gadget 0 and r on gadget L−1, which no map reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LayoutStyle {
    #[default]
    Uniform,
    Trimmed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyParams {
    pub k: u32,
    pub l: u32,
    pub n: usize,
    pub m: BigUint,
    pub w: BigUint,
    pub phases: u32,
    pub alpha_phases: Option<u32>,
    pub seed: u64,
    pub mode: Mode,
}

impl ToyParams {
    pub fn new(k: u32, l: u32, n: usize, mode: Mode, alpha_phases: Option<u32>, seed: u64) -> Result<Self> {
        let (m, w) = derive_params(k)?;
        let p = ToyParams { k, l, n, m, w, phases: k / 2, alpha_phases, seed, mode };
        let bad = p.param_violations();
        if !bad.is_empty() {
            return Err(Error::Params(bad.join("; ")));
        }
        Ok(p)
    }

    /// Number of phases a gadget runs: K/2, or K̃ in α-mode.
    pub fn gadget_phases(&self) -> usize {
        self.alpha_phases.unwrap_or(self.phases) as usize
    }

    pub fn is_glued(&self) -> bool {
        self.mode == Mode::Glued
    }

    pub fn m_u64(&self) -> Option<u64> {
        self.m.to_u64()
    }

    pub fn w_u64(&self) -> Option<u64> {
        self.w.to_u64()
    }

    /// N = m^n.
    pub fn n_labels(&self) -> BigUint {
        num_traits::pow(self.m.clone(), self.n)
    }

    pub fn param_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.k < 2 || self.k % 2 != 0 {
            v.push(format!("K={} is not an even integer ≥ 2", self.k));
        }
        match self.mode {
            Mode::Glued => {
                if self.l < 2 || self.l % 2 != 0 {
                    v.push(format!("glued mode needs even L ≥ 2, got L={}", self.l));
                }
                if self.alpha_phases.is_some() {
                    v.push("α-phases are only available in standalone mode".into());
                }
            }
            Mode::Standalone => {
                if self.l != 1 {
                    v.push(format!("standalone mode needs L=1, got L={}", self.l));
                }
            }
        }
        if let Some(a) = self.alpha_phases {
            if a == 0 || a > self.k {
                v.push(format!("α-phases K̃={a} must lie in 1..=K"));
            }
        }
        if self.m < BigUint::from(2u32) {
            v.push("m < 2".into());
        }
        let k = self.k as u64;
        let top = self.gadget_phases() as u64;
        for s in 0..top.min(k) {
            let d = BigUint::from(k - s);
            if !(&self.w % &d).is_zero() {
                v.push(format!("(K−{s}) ∤ W"));
            }
            if !(&self.m % &d).is_zero() {
                v.push(format!("(K−{s}) ∤ m"));
            } else if self.w.is_zero() || !((&self.m / &d) % &self.w).is_zero() {
                v.push(format!("W ∤ m/(K−{s})"));
            }
        }
        v
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.is_glued() && self.l > self.k {
            w.push(format!("L={} > K={}: the O(1/K) slack terms lose their guarantee", self.l, self.k));
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetBlocks {
    pub blocks: Vec<Vec<usize>>,
    /// Ext_k for the phase blocks k < K/2; empty when the gadget is not glued onto.
    pub ext: Vec<Vec<usize>>,
    pub q: Vec<Option<usize>>,
    pub r: Option<usize>,
}

impl GadgetBlocks {
    /// B̆_k: the block minus Ext_k, q_k and (last block) r.
    pub fn breve(&self, k: usize) -> Vec<usize> {
        let mut drop: BTreeSet<usize> = BTreeSet::new();
        if let Some(e) = self.ext.get(k) {
            drop.extend(e.iter().copied());
        }
        if let Some(Some(q)) = self.q.get(k) {
            drop.insert(*q);
        }
        if k + 1 == self.blocks.len() {
            if let Some(r) = self.r {
                drop.insert(r);
            }
        }
        self.blocks[k].iter().copied().filter(|c| !drop.contains(c)).collect()
    }

    pub fn has_ext(&self) -> bool {
        self.q.iter().any(|q| q.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n: usize,
    pub gadgets: Vec<GadgetBlocks>,
}

fn expand_slack(slack: &[usize], blocks: usize) -> Result<Vec<usize>> {
    let s = match slack.len() {
        0 => vec![1; blocks],
        1 => vec![slack[0]; blocks],
        x if x == blocks => slack.to_vec(),
        x => {
            return Err(Error::Layout(format!("slack has {x} entries, expected 1 or {blocks}")));
        }
    };
    if s.contains(&0) {
        return Err(Error::Layout("slack 0 leaves a B̆ set empty".into()));
    }
    Ok(s)
}

/// Contiguous layout: per gadget and block, Ext first, then q (or r), then the slack coordinates.
pub fn minimal_layout(params: &ToyParams, slack: &[usize], style: LayoutStyle) -> Result<BlockLayout> {
    let p = params.gadget_phases();
    let slack = expand_slack(slack, p + 1)?;
    let l = params.l as usize;
    let glued = params.is_glued();
    let half = params.phases as usize;
    let mut next = 0usize;
    let mut gadgets = Vec::with_capacity(l);
    let mut take = |c: usize| {
        let v: Vec<usize> = (next..next + c).collect();
        next += c;
        v
    };
    for ell in 0..l {
        let with_ext = glued && (style == LayoutStyle::Uniform || ell > 0);
        let with_r = glued && (style == LayoutStyle::Uniform || ell + 1 < l);
        let mut g = GadgetBlocks { blocks: vec![], ext: vec![], q: vec![], r: None };
        for k in 0..=p {
            let mut block = Vec::new();
            if k < p {
                if with_ext {
                    let e = take(half + 1 - k);
                    let q = take(1)[0];
                    block.extend(&e);
                    block.push(q);
                    g.ext.push(e);
                    g.q.push(Some(q));
                } else {
                    g.ext.push(vec![]);
                    g.q.push(None);
                }
            } else if with_r {
                let r = take(1)[0];
                block.push(r);
                g.r = Some(r);
            }
            block.extend(take(slack[k]));
            g.blocks.push(block);
        }
        gadgets.push(g);
    }
    if next > params.n {
        return Err(Error::Layout(format!("n={} too small: the layout needs {next} coordinates", params.n)));
    }
    Ok(BlockLayout { n: params.n, gadgets })
}

fn layout_violations(params: &ToyParams, layout: &BlockLayout) -> Vec<String> {
    let mut v = Vec::new();
    let p = params.gadget_phases();
    let half = params.phases as usize;
    if layout.n != params.n {
        v.push(format!("layout dimension {} ≠ n={}", layout.n, params.n));
    }
    if layout.gadgets.len() != params.l as usize {
        v.push(format!("layout has {} gadgets, L={}", layout.gadgets.len(), params.l));
    }
    let mut seen = BTreeSet::new();
    let mut overlap = false;
    for (ell, g) in layout.gadgets.iter().enumerate() {
        if g.blocks.len() != p + 1 {
            v.push(format!("gadget {ell} has {} blocks, expected {}", g.blocks.len(), p + 1));
            continue;
        }
        for (k, b) in g.blocks.iter().enumerate() {
            for &c in b {
                if c >= params.n {
                    v.push(format!("B^{ell}_{k} contains coordinate {c} ≥ n"));
                }
                if !seen.insert(c) {
                    overlap = true;
                }
            }
            if g.breve(k).is_empty() {
                v.push(format!("B̆^{ell}_{k} is empty"));
            }
        }
        let needs_ext = params.is_glued() && ell > 0;
        let needs_r = params.is_glued() && ell + 1 < params.l as usize;
        for k in 0..p {
            let ext = g.ext.get(k).cloned().unwrap_or_default();
            let q = g.q.get(k).copied().flatten();
            if needs_ext && (q.is_none() || ext.is_empty()) {
                v.push(format!("gadget {ell} is glued onto but lacks Ext/q in block {k}"));
            }
            if !ext.is_empty() || q.is_some() {
                if ext.len() != half + 1 - k {
                    v.push(format!("|Ext^{ell}_{k}| = {}, expected {}", ext.len(), half + 1 - k));
                }
                if ext.iter().any(|c| !g.blocks[k].contains(c)) {
                    v.push(format!("Ext^{ell}_{k} ⊄ B^{ell}_{k}"));
                }
                match q {
                    Some(q) if !g.blocks[k].contains(&q) || ext.contains(&q) => {
                        v.push(format!("q^{ell}_{k} ∉ B^{ell}_{k}∖Ext^{ell}_{k}"));
                    }
                    None => v.push(format!("gadget {ell} block {k} has Ext but no q")),
                    _ => {}
                }
            }
        }
        match g.r {
            Some(r) if !g.blocks[p].contains(&r) => v.push(format!("r^{ell} ∉ B^{ell}_{p}")),
            None if needs_r => v.push(format!("gadget {ell} is glued from but has no r")),
            _ => {}
        }
        if !params.is_glued() && (g.r.is_some() || g.has_ext()) {
            v.push(format!("standalone gadget {ell} carries Ext/q/r"));
        }
    }
    if overlap {
        v.push("blocks not disjoint".into());
    }
    v
}

/// Every violated divisibility or layout constraint, by name.
pub fn validate(params: &ToyParams, layout: &BlockLayout) -> Vec<String> {
    let mut v = params.param_violations();
    v.extend(layout_violations(params, layout));
    v
}

fn default_slack() -> Vec<usize> {
    vec![1]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "L")]
    pub l: u32,
    pub n: usize,
    #[serde(default = "default_slack")]
    pub slack: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub alpha_phases: Option<u32>,
    #[serde(default)]
    pub layout: LayoutStyle,
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn params(&self) -> Result<ToyParams> {
        ToyParams::new(self.k, self.l, self.n, self.mode, self.alpha_phases, self.seed)
    }

    pub fn build(&self) -> Result<(ToyParams, BlockLayout)> {
        let p = self.params()?;
        let layout = minimal_layout(&p, &self.slack, self.layout)?;
        let bad = validate(&p, &layout);
        if !bad.is_empty() {
            return Err(Error::Layout(bad.join("; ")));
        }
        Ok((p, layout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn derive_small_k() {
        assert_eq!(derive_params(2).unwrap(), (big(4), big(2)));
        assert_eq!(derive_params(4).unwrap(), (big(144), big(12)));
        assert!(derive_params(3).is_err());
        assert!(derive_params(0).is_err());
        assert!(derive_params(66).is_err());
        assert!(derive_params_capped(200, 400).is_ok());
    }

    #[test]
    fn derived_params_pass_divisibility_up_to_cap() {
        for k in (2..=DEFAULT_K_CAP).step_by(2) {
            let p = ToyParams::new(k, 2, 1, Mode::Glued, None, 0);
            assert!(p.is_ok(), "K={k}: {:?}", p.err());
        }
    }

    #[test]
    fn bad_modulus_is_named() {
        let mut p = ToyParams::new(2, 1, 3, Mode::Standalone, None, 0).unwrap();
        p.m = big(6);
        let v = p.param_violations();
        assert_eq!(v, vec!["W ∤ m/(K−0)".to_string()]);
    }

    #[test]
    fn fix_a_layout() {
        let p = ToyParams::new(2, 1, 3, Mode::Standalone, None, 0).unwrap();
        let l = minimal_layout(&p, &[2, 1], LayoutStyle::Uniform).unwrap();
        assert_eq!(l.gadgets[0].blocks, vec![vec![0, 1], vec![2]]);
        assert!(l.gadgets[0].r.is_none() && !l.gadgets[0].has_ext());
        assert!(validate(&p, &l).is_empty());
    }

    #[test]
    fn fix_b_layout_and_minimum() {
        let p = ToyParams::new(2, 2, 12, Mode::Glued, None, 0).unwrap();
        let l = minimal_layout(&p, &[1], LayoutStyle::Uniform).unwrap();
        for g in &l.gadgets {
            assert_eq!(g.blocks[0].len(), 4);
            assert_eq!(g.ext[0].len(), 2);
            assert_eq!(g.breve(0).len(), 1);
            assert_eq!(g.blocks[1].len(), 2);
            assert_eq!(g.breve(1).len(), 1);
        }
        assert!(validate(&p, &l).is_empty());
        let p11 = ToyParams::new(2, 2, 11, Mode::Glued, None, 0).unwrap();
        assert!(minimal_layout(&p11, &[1], LayoutStyle::Uniform).is_err());
    }

    #[test]
    fn overlap_is_named() {
        let p = ToyParams::new(2, 2, 12, Mode::Glued, None, 0).unwrap();
        let mut l = minimal_layout(&p, &[1], LayoutStyle::Uniform).unwrap();
        let c = l.gadgets[0].blocks[0][3];
        l.gadgets[1].blocks[0].push(c);
        assert!(validate(&p, &l).iter().any(|s| s == "blocks not disjoint"));
    }

    #[test]
    fn layout_is_deterministic() {
        let p = ToyParams::new(2, 2, 14, Mode::Glued, None, 0).unwrap();
        let a = minimal_layout(&p, &[2, 1], LayoutStyle::Uniform).unwrap();
        let b = minimal_layout(&p, &[2, 1], LayoutStyle::Uniform).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gadgets[0].blocks[0].len(), 5);
    }

    #[test]
    fn trimmed_layout_is_smaller() {
        let p = ToyParams::new(2, 2, 10, Mode::Glued, None, 0).unwrap();
        let l = minimal_layout(&p, &[2, 1], LayoutStyle::Trimmed).unwrap();
        assert!(validate(&p, &l).is_empty(), "{:?}", validate(&p, &l));
        assert_eq!(l.gadgets[0].breve(0).len(), 2);
        assert_eq!(l.gadgets[1].breve(0).len(), 2);
    }

    #[test]
    fn config_rejects_user_m() {
        assert!(Config::from_json(r#"{"K":2,"L":2,"n":12,"m":4}"#).is_err());
        let c = Config::from_json(r#"{"K":2,"L":2,"n":12,"slack":[1],"seed":7,"mode":"glued","alphaPhases":null}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert!(c.build().is_ok());
    }

    #[test]
    fn alpha_phase_counts() {
        assert_eq!(alpha_tilde(2), 1);
        assert_eq!(alpha_tilde(4), 2);
        assert_eq!(alpha_tilde(10), 6);
        assert_eq!(alpha_tilde(50), 31);
    }
}
