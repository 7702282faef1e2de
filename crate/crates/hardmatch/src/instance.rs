use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cube::{Codec, Label};
use crate::gadget::{edge_count, EdgeIter, GadgetEdge, GadgetSpec, GadgetView};
use crate::glue::GlueTables;
use crate::params::{validate, BlockLayout, Config, ToyParams};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"HMINST\0\x01";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    P,
    Q,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::P => "P",
            Side::Q => "Q",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    T,
    S(u32),
    /// Partner of a T_* vertex in the α-mode terminal matching.
    Terminal,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layer::T => write!(f, "T"),
            Layer::S(k) => write!(f, "S{k}"),
            Layer::Terminal => write!(f, "X"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub side: Side,
    pub gadget: u32,
    pub layer: Layer,
    pub label: Label,
}

pub const TERMINAL_J: u16 = u16::MAX;

/// An edge of Ĝ with side-local dense endpoint ids and its (ℓ, k, j) provenance.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamedEdge {
    pub p: u32,
    pub q: u32,
    pub ell: u16,
    pub k: u16,
    pub j: u16,
}

impl StreamedEdge {
    pub fn is_terminal(&self) -> bool {
        self.j == TERMINAL_J
    }
}

#[derive(Clone, Debug)]
pub struct HardInstance {
    pub config: Config,
    pub params: ToyParams,
    pub layout: BlockLayout,
    pub specs: Vec<GadgetSpec>,
    /// glue[ℓ−1] identifies S^ℓ with T_*^{ℓ−1}.
    pub glue: Vec<GlueTables>,
    pub codec: Codec,
    views: Vec<GadgetView>,
    n_labels: u64,
    s0_offset: Vec<u64>,
}

/// J^ℓ_k uniform on B̆^ℓ_k, independently, from a ChaCha8 stream seeded by `seed`.
pub fn sample_j(params: &ToyParams, layout: &BlockLayout, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params.gadget_phases();
    layout
        .gadgets
        .iter()
        .map(|g| {
            (0..=p)
                .map(|k| {
                    let b = g.breve(k);
                    b[rng.gen_range(0..b.len())]
                })
                .collect()
        })
        .collect()
}

pub fn sample_instance(config: &Config, seed: u64) -> Result<HardInstance> {
    let (params, layout) = config.build()?;
    let j = sample_j(&params, &layout, seed);
    let mut cfg = config.clone();
    cfg.seed = seed;
    HardInstance::assemble(cfg, params, layout, j, None)
}

impl HardInstance {
    pub fn from_config(config: &Config) -> Result<Self> {
        sample_instance(config, config.seed)
    }

    /// Builds an instance from explicit J vectors. Glue tables are derived unless given.
    pub fn assemble(
        config: Config,
        mut params: ToyParams,
        layout: BlockLayout,
        j: Vec<Vec<usize>>,
        glue: Option<Vec<GlueTables>>,
    ) -> Result<Self> {
        params.seed = config.seed;
        let bad = validate(&params, &layout);
        if !bad.is_empty() {
            return Err(Error::Layout(bad.join("; ")));
        }
        let codec = Codec::for_params(&params)?;
        let n_labels = codec.size().ok_or_else(|| Error::Params("m^n overflows u64".into()))?;
        let phases = params.gadget_phases();
        if j.len() != layout.gadgets.len() {
            return Err(Error::Params("one J vector per gadget is required".into()));
        }
        let specs: Vec<GadgetSpec> =
            j.into_iter().zip(&layout.gadgets).enumerate().map(|(ell, (j, b))| GadgetSpec { ell, j, blocks: b.clone(), phases }).collect();
        for s in &specs {
            if s.j.len() != phases + 1 || s.j.iter().any(|&c| c >= params.n) {
                return Err(Error::Params(format!("J^{} malformed", s.ell)));
            }
        }
        let glue = match glue {
            Some(g) => g,
            None => (1..specs.len()).map(|l| GlueTables::build(&params, &specs[l - 1], &specs[l])).collect::<Result<_>>()?,
        };
        if params.is_glued() && glue.len() + 1 != specs.len() {
            return Err(Error::Glue("one glue table per consecutive gadget pair is required".into()));
        }
        let views = specs.iter().map(|s| GadgetView::new(&params, s)).collect::<Result<Vec<_>>>()?;
        let mut s0_offset = vec![0u64];
        for k in 0..phases {
            let c = views[0].s_system(k).count();
            s0_offset.push(s0_offset[k] + c);
        }
        let inst = HardInstance { config, params, layout, specs, glue, codec, views, n_labels, s0_offset };
        let total = inst.n_p().max(inst.n_q());
        if total > u32::MAX as u64 {
            return Err(Error::Params(format!("{total} vertices on one side exceed 32-bit ids")));
        }
        Ok(inst)
    }

    pub fn view(&self, ell: usize) -> &GadgetView {
        &self.views[ell]
    }

    pub fn gadgets(&self) -> usize {
        self.specs.len()
    }

    pub fn phases(&self) -> usize {
        self.params.gadget_phases()
    }

    /// N = m^n.
    pub fn n_labels(&self) -> u64 {
        self.n_labels
    }

    pub fn is_alpha(&self) -> bool {
        self.params.alpha_phases.is_some()
    }

    pub fn s0_size(&self) -> u64 {
        *self.s0_offset.last().unwrap()
    }

    pub fn t_star_size(&self, ell: usize) -> u64 {
        self.views[ell].t_star_system().count()
    }

    pub fn n_p(&self) -> u64 {
        let evens = self.gadgets().div_ceil(2) as u64;
        evens * self.n_labels
    }

    pub fn n_q(&self) -> u64 {
        let odds = (self.gadgets() / 2) as u64;
        let term = if self.is_alpha() { self.t_star_size(0) } else { 0 };
        self.s0_size() + odds * self.n_labels + term
    }

    pub fn side_of_t(ell: usize) -> Side {
        if ell % 2 == 0 {
            Side::P
        } else {
            Side::Q
        }
    }

    #[inline]
    pub fn t_index(&self, ell: usize, x: Label) -> u32 {
        let i = self.codec.index(x);
        let base = if ell % 2 == 0 { (ell / 2) as u64 * self.n_labels } else { self.s0_size() + (ell / 2) as u64 * self.n_labels };
        (base + i) as u32
    }

    #[inline]
    pub fn s0_index(&self, k: usize, x: Label) -> Option<u32> {
        self.views[0].s_system(k).rank(x).map(|r| (self.s0_offset[k] + r) as u32)
    }

    pub fn terminal_index(&self, x: Label) -> Option<u32> {
        let r = self.views[0].t_star_system().rank(x)?;
        Some((self.s0_size() + (self.gadgets() / 2) as u64 * self.n_labels + r) as u32)
    }

    pub fn vertex_index(&self, v: &VertexId) -> Result<u32> {
        let ell = v.gadget as usize;
        let bad = || Error::Range(format!("{v:?} is not a vertex of Ĝ"));
        if ell >= self.gadgets() || !self.codec.is_valid(v.label) {
            return Err(bad());
        }
        match v.layer {
            Layer::T if v.side == Self::side_of_t(ell) => Ok(self.t_index(ell, v.label)),
            Layer::S(k) if ell == 0 && v.side == Side::Q && (k as usize) < self.phases() => {
                self.s0_index(k as usize, v.label).ok_or_else(bad)
            }
            Layer::Terminal if self.is_alpha() && ell == 0 && v.side == Side::Q => self.terminal_index(v.label).ok_or_else(bad),
            _ => Err(bad()),
        }
    }

    pub fn vertex_at(&self, side: Side, idx: u32) -> Result<VertexId> {
        let idx = idx as u64;
        let n = self.n_labels;
        match side {
            Side::P => {
                if idx >= self.n_p() {
                    return Err(Error::Range(format!("P id {idx}")));
                }
                let ell = 2 * (idx / n) as u32;
                Ok(VertexId { side, gadget: ell, layer: Layer::T, label: self.codec.from_index(idx % n) })
            }
            Side::Q => {
                if idx >= self.n_q() {
                    return Err(Error::Range(format!("Q id {idx}")));
                }
                if idx < self.s0_size() {
                    let k = self.s0_offset.partition_point(|&o| o <= idx) - 1;
                    let label = self.views[0].s_system(k).unrank(idx - self.s0_offset[k]);
                    return Ok(VertexId { side, gadget: 0, layer: Layer::S(k as u32), label });
                }
                let rest = idx - self.s0_size();
                let odd = (self.gadgets() / 2) as u64;
                if rest < odd * n {
                    let ell = 2 * (rest / n) as u32 + 1;
                    return Ok(VertexId { side, gadget: ell, layer: Layer::T, label: self.codec.from_index(rest % n) });
                }
                let label = self.views[0].t_star_system().unrank(rest - odd * n);
                Ok(VertexId { side, gadget: 0, layer: Layer::Terminal, label })
            }
        }
    }

    /// Phases in stream order: rounds ℓ ascending, phases k ascending, directions j ∈ B̆^ℓ_k ascending.
    pub fn plan(&self) -> Vec<(usize, usize, usize)> {
        let mut v = Vec::new();
        for (ell, s) in self.specs.iter().enumerate() {
            for k in 0..self.phases() {
                for j in s.blocks.breve(k) {
                    v.push((ell, k, j));
                }
            }
        }
        v
    }

    /// τ_* of a gadget-ℓ S-vertex: identity on S^0, τ^ℓ otherwise. Returns (side, id).
    #[inline]
    pub fn s_endpoint(&self, ell: usize, k: usize, s: Label) -> (Side, u32) {
        if ell == 0 {
            (Side::Q, self.s0_index(k, s).expect("S^0 vertex"))
        } else {
            let y = self.glue[ell - 1].tau_apply(&self.codec, k, s).expect("τ defined on S^ℓ_k");
            (Self::side_of_t(ell - 1), self.t_index(ell - 1, y))
        }
    }

    #[inline]
    pub fn map_edge(&self, ell: usize, e: &GadgetEdge) -> StreamedEdge {
        let (side_s, s) = self.s_endpoint(ell, e.k, e.s);
        let t = self.t_index(ell, e.t);
        let (p, q) = match side_s {
            Side::Q => (t, s),
            Side::P => (s, t),
        };
        debug_assert_eq!(side_s == Side::Q, Self::side_of_t(ell) == Side::P);
        StreamedEdge { p, q, ell: ell as u16, k: e.k as u16, j: e.j as u16 }
    }

    pub fn stream(&self) -> Stream<'_> {
        Stream {
            inst: self,
            plan: self.plan(),
            pos: 0,
            cur: None,
            terminal: 0,
            terminal_total: if self.is_alpha() { self.t_star_size(0) } else { 0 },
        }
    }

    /// The stream with each phase's edges shuffled by a seeded permutation. Buffers one phase at a time.
    pub fn stream_shuffled(&self, seed: u64) -> impl Iterator<Item = StreamedEdge> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phases: Vec<(usize, usize)> = self.plan().iter().map(|&(l, k, _)| (l, k)).collect();
        phases.dedup();
        let term = self.stream().filter(|e| e.is_terminal());
        phases
            .into_iter()
            .flat_map(move |(l, k)| {
                let mut buf: Vec<StreamedEdge> = self.specs[l]
                    .blocks
                    .breve(k)
                    .into_iter()
                    .flat_map(|j| self.views[l].edges(k, j).unwrap().map(move |e| self.map_edge(l, &e)))
                    .collect();
                buf.shuffle(&mut rng);
                buf
            })
            .chain(term)
    }

    /// |Ê| from the counting oracle.
    pub fn total_edges(&self) -> Result<u64> {
        let mut t = num_bigint::BigUint::from(0u32);
        for (ell, k, _) in self.plan() {
            t += edge_count(&self.params, &self.specs[ell], k)?;
        }
        let t = t.to_u64().ok_or_else(|| Error::Params("edge count overflows".into()))?;
        Ok(t + if self.is_alpha() { self.t_star_size(0) } else { 0 })
    }

    /// The S_*–T_* perfect matching of α-mode, in rank order of T_*.
    pub fn terminal_edges(&self) -> impl Iterator<Item = StreamedEdge> + '_ {
        let n = if self.is_alpha() { self.t_star_size(0) } else { 0 };
        (0..n).map(move |r| self.terminal_edge(r))
    }

    fn terminal_edge(&self, r: u64) -> StreamedEdge {
        let x = self.views[0].t_star_system().unrank(r);
        let q = (self.s0_size() + (self.gadgets() / 2) as u64 * self.n_labels + r) as u32;
        StreamedEdge { p: self.t_index(0, x), q, ell: 0, k: self.phases() as u16, j: TERMINAL_J }
    }

    /// Glued: ⋃_{ℓ>0} τ^ℓ(M^ℓ). Standalone: M^0, plus the terminal matching in α-mode.
    pub fn opt_matching(&self) -> Vec<StreamedEdge> {
        let mut out = Vec::new();
        let first = if self.params.is_glued() { 1 } else { 0 };
        for ell in first..self.gadgets() {
            out.extend(self.views[ell].matching().iter().map(|e| self.map_edge(ell, e)));
        }
        out.extend(self.terminal_edges());
        out
    }

    /// Whether `e` is an edge of Ĝ with the provenance it carries.
    pub fn edge_in_graph(&self, e: &StreamedEdge) -> bool {
        let (Ok(pv), Ok(qv)) = (self.vertex_at(Side::P, e.p), self.vertex_at(Side::Q, e.q)) else {
            return false;
        };
        if e.is_terminal() {
            return self.is_alpha() && pv.gadget == 0 && qv.layer == Layer::Terminal && pv.label == qv.label;
        }
        let (ell, k, j) = (e.ell as usize, e.k as usize, e.j as usize);
        if ell >= self.gadgets() || k >= self.phases() || !self.specs[ell].blocks.breve(k).contains(&j) {
            return false;
        }
        let (tv, sv) = if Self::side_of_t(ell) == Side::P { (pv, qv) } else { (qv, pv) };
        if tv.layer != Layer::T || tv.gadget as usize != ell {
            return false;
        }
        let s = if ell == 0 {
            if sv.layer != Layer::S(k as u32) {
                return false;
            }
            sv.label
        } else {
            if sv.layer != Layer::T || sv.gadget as usize != ell - 1 {
                return false;
            }
            match self.glue[ell - 1].tau_invert(&self.codec, sv.label) {
                Ok((k2, x)) if k2 == k => x,
                _ => return false,
            }
        };
        let v = &self.views[ell];
        let t = tv.label;
        if self.codec.set(s, j, 0) != self.codec.set(t, j, 0) {
            return false;
        }
        v.in_s(k, s) && v.in_t(k, t) && self.codec.get(s, j) < v.threshold(k) && self.codec.get(t, j) >= v.threshold(k)
    }

    pub fn j_vectors(&self) -> Vec<Vec<usize>> {
        self.specs.iter().map(|s| s.j.clone()).collect()
    }

    pub fn is_special(&self, e: &StreamedEdge) -> bool {
        !e.is_terminal() && self.specs[e.ell as usize].j[e.k as usize] == e.j as usize
    }
}

pub struct Stream<'a> {
    inst: &'a HardInstance,
    plan: Vec<(usize, usize, usize)>,
    pos: usize,
    cur: Option<(usize, EdgeIter<'a>)>,
    terminal: u64,
    terminal_total: u64,
}

impl Iterator for Stream<'_> {
    type Item = StreamedEdge;

    fn next(&mut self) -> Option<StreamedEdge> {
        loop {
            if let Some((ell, it)) = &mut self.cur {
                if let Some(e) = it.next() {
                    return Some(self.inst.map_edge(*ell, &e));
                }
                self.cur = None;
            }
            if self.pos < self.plan.len() {
                let (ell, k, j) = self.plan[self.pos];
                self.pos += 1;
                self.cur = Some((ell, self.inst.views[ell].edges(k, j).expect("planned direction")));
                continue;
            }
            if self.terminal < self.terminal_total {
                self.terminal += 1;
                return Some(self.inst.terminal_edge(self.terminal - 1));
            }
            return None;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: Config,
    layout: BlockLayout,
    j: Vec<Vec<usize>>,
    glue: Vec<GlueTables>,
    payload_len: u64,
    payload_sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl HardInstance {
    /// Magic, version, header length, JSON header, then the M tables as little-endian u32.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut glue = self.glue.clone();
        for g in &mut glue {
            for t in [g.m_table.take(), g.m_inv.take()].into_iter().flatten() {
                payload.extend((t.len() as u64).to_le_bytes());
                for x in t {
                    payload.extend(x.to_le_bytes());
                }
            }
        }
        let header = Header {
            version: FORMAT_VERSION,
            config: self.config.clone(),
            layout: self.layout.clone(),
            j: self.j_vectors(),
            glue,
            payload_len: payload.len() as u64,
            payload_sha256: hex(&Sha256::digest(&payload)),
        };
        let h = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(h.len() + payload.len() + 20);
        out.extend(MAGIC);
        out.extend(FORMAT_VERSION.to_le_bytes());
        out.extend((h.len() as u64).to_le_bytes());
        out.extend(h);
        out.extend(payload);
        Ok(out)
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let corrupt = |s: &str| Error::Format(s.to_string());
        if b.len() < 20 || &b[..8] != MAGIC {
            return Err(corrupt("not an instance file"));
        }
        let version = u32::from_le_bytes(b[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("format version {version}, this build reads {FORMAT_VERSION}")));
        }
        let hlen = u64::from_le_bytes(b[12..20].try_into().unwrap()) as usize;
        let body = &b[20..];
        if body.len() < hlen {
            return Err(corrupt("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        if header.version != FORMAT_VERSION {
            return Err(corrupt("header version disagrees with preamble"));
        }
        let payload = &body[hlen..];
        if payload.len() as u64 != header.payload_len {
            return Err(corrupt("truncated or oversized table payload"));
        }
        if hex(&Sha256::digest(payload)) != header.payload_sha256 {
            return Err(corrupt("table payload checksum mismatch"));
        }
        let mut glue = header.glue;
        let mut at = 0usize;
        let take = |at: &mut usize| -> Result<Vec<u32>> {
            let n = u64::from_le_bytes(payload.get(*at..*at + 8).ok_or_else(|| corrupt("table length"))?.try_into().unwrap()) as usize;
            *at += 8;
            let bytes = payload.get(*at..*at + 4 * n).ok_or_else(|| corrupt("table body"))?;
            *at += 4 * n;
            Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
        };
        for g in &mut glue {
            if g.a_size <= crate::glue::TABLE_LIMIT {
                g.m_table = Some(take(&mut at)?);
                g.m_inv = Some(take(&mut at)?);
            }
        }
        if at != payload.len() {
            return Err(corrupt("trailing table bytes"));
        }
        let params = header.config.params()?;
        HardInstance::assemble(header.config, params, header.layout, header.j, Some(glue))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut b = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut b)?;
        Self::from_bytes(&b)
    }

    /// `p bipartite |P| |Q| #edges`, then `e <pId> <qId> <ℓ> <k> <j>` (j = -1 for terminal edges).
    pub fn export_edges(&self, w: impl Write) -> Result<u64> {
        let mut w = BufWriter::new(w);
        let total = self.total_edges()?;
        writeln!(w, "p bipartite {} {} {}", self.n_p(), self.n_q(), total)?;
        let mut n = 0;
        for e in self.stream() {
            let j = if e.is_terminal() { -1 } else { e.j as i64 };
            writeln!(w, "e {} {} {} {} {}", e.p, e.q, e.ell, e.k, j)?;
            n += 1;
        }
        w.flush()?;
        Ok(n)
    }

    /// `v <id> <side> <ℓ> <layer> <packedLabel>` for every vertex, P first.
    pub fn export_registry(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        for (side, count) in [(Side::P, self.n_p()), (Side::Q, self.n_q())] {
            for id in 0..count as u32 {
                let v = self.vertex_at(side, id)?;
                writeln!(w, "v {} {} {} {} {}", id, side, v.gadget, v.layer, v.label.0)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_bytes() {
        let c = fixtures::fix_b().config;
        let a = sample_instance(&c, 11).unwrap().to_bytes().unwrap();
        let b = sample_instance(&c, 11).unwrap().to_bytes().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn round_trip_and_corruption() {
        let inst = fixtures::fix_d().instance(3).unwrap();
        let bytes = inst.to_bytes().unwrap();
        let back = HardInstance::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.glue, inst.glue);
        assert!(HardInstance::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(HardInstance::from_bytes(&bytes[..30]).is_err());
        let mut v2 = bytes.clone();
        v2[8] = 9;
        assert!(matches!(HardInstance::from_bytes(&v2), Err(Error::Format(m)) if m.contains("version")));
    }

    #[test]
    fn registry_round_trip_fix_a_alpha() {
        let inst = fixtures::fix_a_alpha().instance(0).unwrap();
        assert_eq!(inst.n_p(), 64);
        assert_eq!(inst.n_q(), 32 + 32);
        for side in [Side::P, Side::Q] {
            let n = if side == Side::P { inst.n_p() } else { inst.n_q() };
            for id in 0..n as u32 {
                let v = inst.vertex_at(side, id).unwrap();
                assert_eq!(inst.vertex_index(&v).unwrap(), id);
            }
        }
    }

    #[test]
    fn stream_order_and_counts_fix_a_alpha() {
        let inst = fixtures::fix_a_alpha().instance(0).unwrap();
        let edges: Vec<_> = inst.stream().collect();
        assert_eq!(edges.len() as u64, inst.total_edges().unwrap());
        assert_eq!(edges.len(), 64 + 32);
        assert!(edges[64..].iter().all(|e| e.is_terminal()));
        let set: HashSet<_> = edges.iter().map(|e| (e.p, e.q)).collect();
        assert_eq!(set.len(), edges.len());
        assert!(edges.iter().all(|e| inst.edge_in_graph(e)));
        let mut fake = edges[0];
        fake.j = 1 - fake.j;
        assert!(!inst.edge_in_graph(&fake));
        let opt = inst.opt_matching();
        assert_eq!(opt.len(), 16 + 32);
    }

    #[test]
    fn j_marginal_is_uniform() {
        let f = fixtures::fix_c();
        let (params, layout) = f.config.build().unwrap();
        let breve = layout.gadgets[0].breve(0);
        let mut counts = vec![0u32; breve.len()];
        for seed in 0..1000 {
            let j = sample_j(&params, &layout, seed);
            counts[breve.iter().position(|&c| c == j[0][0]).unwrap()] += 1;
        }
        let e = 1000.0 / breve.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // One degree of freedom: p > 0.01 iff χ² < 6.635.
        assert!(chi2 < 6.635, "χ² = {chi2}, counts {counts:?}");
    }

    #[test]
    fn phases_are_contiguous_in_the_stream() {
        let inst = fixtures::fix_d().instance(5).unwrap();
        let mut last = (0u16, 0u16);
        let mut n = 0u64;
        for e in inst.stream() {
            assert!((e.ell, e.k) >= last);
            last = (e.ell, e.k);
            n += 1;
        }
        assert_eq!(n, inst.total_edges().unwrap());
    }

    #[test]
    fn shuffled_stream_is_a_permutation_within_phases() {
        let inst = fixtures::fix_a_alpha().instance(1).unwrap();
        let a: Vec<_> = inst.stream().collect();
        let b: Vec<_> = inst.stream_shuffled(9).collect();
        assert_eq!(a.len(), b.len());
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort();
        sb.sort();
        assert_eq!(sa, sb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.ell, x.k), (y.ell, y.k));
        }
    }
}
