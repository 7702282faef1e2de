//! Budgeted generalized-online execution over the stream of Ĝ.

use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use fixedbitset::FixedBitSet;
use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::gadget::edge_count;
use crate::instance::{sample_instance, sample_j, HardInstance, StreamedEdge};
use crate::matching::{max_matching, validate_matching, BipartiteGraph};
use crate::params::{BlockLayout, Config, ToyParams};
use crate::predecessor::{cover_bound, WitnessCounts, WitnessOracle};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Discard,
    Keep,
    /// Overwrite kept slot `i` with the current edge; the old edge is forgotten.
    Replace(usize),
}

/// Everything an algorithm may see before the stream: no J.
#[derive(Clone, Debug)]
pub struct PublicInfo {
    pub config: Config,
    pub params: ToyParams,
    pub layout: BlockLayout,
    pub n_p: u64,
    pub n_q: u64,
    pub total_edges: u64,
}

impl PublicInfo {
    pub fn of(inst: &HardInstance) -> Result<Self> {
        Ok(PublicInfo {
            config: inst.config.clone(),
            params: inst.params.clone(),
            layout: inst.layout.clone(),
            n_p: inst.n_p(),
            n_q: inst.n_q(),
            total_edges: inst.total_edges()?,
        })
    }
}

pub trait BudgetedAlgorithm: Send {
    fn name(&self) -> &'static str;

    /// Uses J out of band.
    fn j_aware(&self) -> bool {
        false
    }

    fn init(&mut self, info: &PublicInfo, budget: usize);

    fn on_edge(&mut self, e: &StreamedEdge) -> Decision;

    /// An own matching over the kept edges; `None` lets the harness solve.
    fn finalize(&mut self, _kept: &[StreamedEdge]) -> Option<Vec<StreamedEdge>> {
        None
    }

    /// The returned matching is maximal in the whole stream.
    fn maximal(&self) -> bool {
        false
    }
}

#[derive(Default)]
pub struct Greedy {
    budget: usize,
    kept: usize,
    saturated: bool,
    p: FixedBitSet,
    q: FixedBitSet,
    matching: Vec<StreamedEdge>,
}

impl BudgetedAlgorithm for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn init(&mut self, info: &PublicInfo, budget: usize) {
        *self = Greedy {
            budget,
            p: FixedBitSet::with_capacity(info.n_p as usize),
            q: FixedBitSet::with_capacity(info.n_q as usize),
            ..Default::default()
        };
    }

    fn on_edge(&mut self, e: &StreamedEdge) -> Decision {
        if self.p.contains(e.p as usize) || self.q.contains(e.q as usize) {
            return Decision::Discard;
        }
        if self.kept == self.budget {
            self.saturated = true;
            return Decision::Discard;
        }
        self.p.insert(e.p as usize);
        self.q.insert(e.q as usize);
        self.kept += 1;
        self.matching.push(*e);
        Decision::Keep
    }

    fn finalize(&mut self, _kept: &[StreamedEdge]) -> Option<Vec<StreamedEdge>> {
        Some(std::mem::take(&mut self.matching))
    }

    fn maximal(&self) -> bool {
        !self.saturated
    }
}

/// Keeps the `s` edges of smallest seeded priority: a uniform `s`-subset of the
/// stream seen so far. One priority is drawn per edge whatever `s` is, so the
/// kept sets of one seed are nested in `s`.
pub struct UniformSample {
    seed: u64,
    budget: usize,
    rng: ChaCha8Rng,
    heap: BinaryHeap<(u64, usize)>,
}

impl UniformSample {
    pub fn new(seed: u64) -> Self {
        UniformSample { seed, budget: 0, rng: ChaCha8Rng::seed_from_u64(seed), heap: BinaryHeap::new() }
    }
}

impl BudgetedAlgorithm for UniformSample {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn init(&mut self, _info: &PublicInfo, budget: usize) {
        *self = UniformSample::new(self.seed);
        self.budget = budget;
    }

    fn on_edge(&mut self, _e: &StreamedEdge) -> Decision {
        let pr = self.rng.next_u64();
        if self.heap.len() < self.budget {
            let slot = self.heap.len();
            self.heap.push((pr, slot));
            return Decision::Keep;
        }
        match self.heap.peek() {
            Some(&(top, slot)) if pr < top => {
                self.heap.pop();
                self.heap.push((pr, slot));
                Decision::Replace(slot)
            }
            _ => Decision::Discard,
        }
    }
}

/// Knows J. Keeps the constructive matching first, then other special edges.
pub struct Clairvoyant {
    j: Vec<Vec<usize>>,
    constructive: HashSet<(u32, u32)>,
    budget: usize,
    kept: usize,
    /// Slots holding special edges outside the constructive matching.
    spare: Vec<usize>,
}

impl Clairvoyant {
    pub fn new(inst: &HardInstance) -> Self {
        Clairvoyant {
            j: inst.j_vectors(),
            constructive: inst.opt_matching().iter().map(|e| (e.p, e.q)).collect(),
            budget: 0,
            kept: 0,
            spare: Vec::new(),
        }
    }
}

impl BudgetedAlgorithm for Clairvoyant {
    fn name(&self) -> &'static str {
        "clairvoyant"
    }

    fn j_aware(&self) -> bool {
        true
    }

    fn init(&mut self, _info: &PublicInfo, budget: usize) {
        self.budget = budget;
        self.kept = 0;
        self.spare.clear();
    }

    fn on_edge(&mut self, e: &StreamedEdge) -> Decision {
        let constructive = self.constructive.contains(&(e.p, e.q));
        let special = !e.is_terminal() && self.j[e.ell as usize][e.k as usize] == e.j as usize;
        if !constructive && !special {
            return Decision::Discard;
        }
        if self.kept < self.budget {
            if !constructive {
                self.spare.push(self.kept);
            }
            self.kept += 1;
            return Decision::Keep;
        }
        if !constructive {
            return Decision::Discard;
        }
        self.spare.pop().map_or(Decision::Discard, Decision::Replace)
    }
}

#[derive(Default)]
pub struct StoreAll {
    budget: usize,
    kept: usize,
}

impl BudgetedAlgorithm for StoreAll {
    fn name(&self) -> &'static str {
        "store-all"
    }

    fn init(&mut self, _info: &PublicInfo, budget: usize) {
        *self = StoreAll { budget, kept: 0 };
    }

    fn on_edge(&mut self, _e: &StreamedEdge) -> Decision {
        if self.kept < self.budget {
            self.kept += 1;
            Decision::Keep
        } else {
            Decision::Discard
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgKind {
    Greedy,
    Uniform,
    Clairvoyant,
    StoreAll,
}

impl AlgKind {
    pub const ALL: [AlgKind; 4] = [AlgKind::Greedy, AlgKind::Uniform, AlgKind::Clairvoyant, AlgKind::StoreAll];

    pub fn make(self, inst: &HardInstance, seed: u64) -> Box<dyn BudgetedAlgorithm> {
        match self {
            AlgKind::Greedy => Box::<Greedy>::default(),
            AlgKind::Uniform => Box::new(UniformSample::new(seed ^ 0x5eed_0fa1_6000)),
            AlgKind::Clairvoyant => Box::new(Clairvoyant::new(inst)),
            AlgKind::StoreAll => Box::<StoreAll>::default(),
        }
    }
}

impl FromStr for AlgKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "greedy" => AlgKind::Greedy,
            "uniform" => AlgKind::Uniform,
            "clairvoyant" => AlgKind::Clairvoyant,
            "store-all" => AlgKind::StoreAll,
            _ => return Err(Error::Harness(format!("unknown algorithm `{s}`"))),
        })
    }
}

/// An edge budget, absolute or relative to |P| or |Ê|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Edges(u64),
    TimesP(f64),
    TimesE(f64),
}

impl Budget {
    pub fn resolve(&self, n_p: u64, total_edges: u64) -> u64 {
        match *self {
            Budget::Edges(s) => s,
            Budget::TimesP(f) => (f * n_p as f64).floor() as u64,
            Budget::TimesE(f) => (f * total_edges as f64).floor() as u64,
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    /// `1000`, `P`, `2P`, `0.5E`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Harness(format!("bad budget `{s}`"));
        let t = s.trim();
        let scale = |x: &str| -> Result<f64> {
            if x.is_empty() {
                return Ok(1.0);
            }
            let f: f64 = x.parse().map_err(|_| bad())?;
            if f.is_finite() && f >= 0.0 {
                Ok(f)
            } else {
                Err(bad())
            }
        };
        if let Some(x) = t.strip_suffix(['P', 'p']) {
            Ok(Budget::TimesP(scale(x)?))
        } else if let Some(x) = t.strip_suffix(['E', 'e']) {
            Ok(Budget::TimesE(scale(x)?))
        } else {
            t.parse().map(Budget::Edges).map_err(|_| bad())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Retention {
    pub ell: usize,
    pub k: usize,
    pub breve: usize,
    /// |E' ∩ E_{k,J_k}| in this phase.
    pub special_kept: u64,
    /// |E' ∩ E_k| in this phase.
    pub phase_kept: u64,
    /// s/|B̆^ℓ_k|.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub alg: String,
    pub seed: u64,
    pub k: u32,
    pub l: u32,
    pub n: usize,
    pub budget: u64,
    pub kept: u64,
    pub m_alg: u64,
    pub opt: u64,
    pub ratio: f64,
    pub cover_bound: u64,
    pub special_kept: u64,
    pub retention: Vec<Retention>,
    pub runtime_ms: f64,
    pub j_aware: bool,
    pub maximal: bool,
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Per-instance state shared by runs: witness sets and OPT.
pub struct Runner<'a> {
    pub inst: &'a HardInstance,
    pub info: PublicInfo,
    oracle: WitnessOracle<'a>,
    counts: Option<WitnessCounts>,
    edges: Vec<StreamedEdge>,
    pub opt: u64,
}

impl<'a> Runner<'a> {
    pub fn new(inst: &'a HardInstance) -> Result<Self> {
        let info = PublicInfo::of(inst)?;
        let oracle = WitnessOracle::new(inst);
        let counts = if inst.params.is_glued() {
            Some(oracle.counts().ok_or_else(|| Error::Harness("instance too large for witness tables".into()))?)
        } else {
            None
        };
        let edges: Vec<StreamedEdge> = inst.stream().collect();
        let g = BipartiteGraph::new(nid(info.n_p)?, nid(info.n_q)?, edges.iter().map(|e| (e.p, e.q)))?;
        let opt = max_matching(&g).size() as u64;
        Ok(Runner { inst, info, oracle, counts, edges, opt })
    }

    pub fn run(&self, alg: &mut dyn BudgetedAlgorithm, budget: u64, seed: u64) -> ExperimentRecord {
        let start = Instant::now();
        let mut violations = Vec::new();
        let cap = budget.min(self.info.total_edges) as usize;
        alg.init(&self.info, budget.min(usize::MAX as u64) as usize);
        let mut kept: Vec<StreamedEdge> = Vec::with_capacity(cap);
        for &e in &self.edges {
            match alg.on_edge(&e) {
                Decision::Discard => {}
                Decision::Keep if (kept.len() as u64) < budget => kept.push(e),
                Decision::Keep => {
                    violations.push(format!("Keep beyond budget {budget}"));
                    break;
                }
                Decision::Replace(i) if i < kept.len() => kept[i] = e,
                Decision::Replace(i) => {
                    violations.push(format!("Replace of empty slot {i}"));
                    break;
                }
            }
        }
        let m = if violations.is_empty() { self.matching(alg, &kept, &mut violations) } else { Vec::new() };
        let cover = match &self.counts {
            Some(c) => cover_bound(self.inst, &self.oracle, c, &m),
            None => cover_bound(self.inst, &self.oracle, &WitnessCounts::default(), &m),
        };
        let cover_bound = match cover {
            Ok(c) => {
                if violations.is_empty() && c.non_special > 0 {
                    violations.push(format!("{} matched edges cross the witness cut off the special set", c.non_special));
                }
                c.bound()
            }
            Err(e) => {
                violations.push(e.to_string());
                0
            }
        };
        let m_alg = m.len() as u64;
        if m_alg > cover_bound && violations.is_empty() {
            violations.push(format!("|M_ALG| = {m_alg} exceeds cover bound {cover_bound}"));
        }
        let maximal = violations.is_empty() && alg.maximal();
        if maximal && 2 * m_alg < self.opt {
            violations.push(format!("maximal matching of size {m_alg} below OPT/2 = {}/2", self.opt));
        }
        let retention = self.retention(&kept, budget);
        ExperimentRecord {
            alg: alg.name().to_string(),
            seed,
            k: self.info.params.k,
            l: self.info.params.l,
            n: self.info.params.n,
            budget,
            kept: kept.len() as u64,
            m_alg,
            opt: self.opt,
            ratio: if self.opt == 0 { 1.0 } else { m_alg as f64 / self.opt as f64 },
            cover_bound,
            special_kept: m.iter().filter(|e| self.inst.is_special(e)).count() as u64,
            retention,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            j_aware: alg.j_aware(),
            maximal,
            valid: violations.is_empty(),
            violations,
        }
    }

    fn matching(&self, alg: &mut dyn BudgetedAlgorithm, kept: &[StreamedEdge], violations: &mut Vec<String>) -> Vec<StreamedEdge> {
        let by_pair: HashMap<(u32, u32), StreamedEdge> = kept.iter().map(|e| ((e.p, e.q), *e)).collect();
        let g = match BipartiteGraph::new(self.info.n_p as u32, self.info.n_q as u32, kept.iter().map(|e| (e.p, e.q))) {
            Ok(g) => g,
            Err(e) => {
                violations.push(e.to_string());
                return Vec::new();
            }
        };
        let pairs = match alg.finalize(kept) {
            Some(own) => {
                let pairs: Vec<(u32, u32)> = own.iter().map(|e| (e.p, e.q)).collect();
                if let Err(v) = validate_matching(&g, &pairs) {
                    violations.push(format!("returned matching: {v}"));
                    return Vec::new();
                }
                pairs
            }
            None => max_matching(&g).edges(),
        };
        let m: Vec<StreamedEdge> = pairs.iter().map(|k| by_pair[k]).collect();
        if let Some(e) = m.iter().find(|e| !self.inst.edge_in_graph(e)) {
            violations.push(format!("matched edge ({}, {}) not in Ê", e.p, e.q));
        }
        m
    }

    fn retention(&self, kept: &[StreamedEdge], budget: u64) -> Vec<Retention> {
        let mut rows = phase_rows(self.inst, budget);
        for e in kept.iter().filter(|e| !e.is_terminal()) {
            let r = &mut rows[e.ell as usize * self.inst.phases() + e.k as usize];
            r.phase_kept += 1;
            r.special_kept += u64::from(self.inst.is_special(e));
        }
        rows
    }
}

fn nid(n: u64) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Cap { what: "side size".into(), size: n.to_string(), cap: u32::MAX as u64 })
}

fn phase_rows(inst: &HardInstance, budget: u64) -> Vec<Retention> {
    let mut rows = Vec::new();
    for (ell, spec) in inst.specs.iter().enumerate() {
        for k in 0..inst.phases() {
            let breve = spec.blocks.breve(k).len();
            rows.push(Retention { ell, k, breve, special_kept: 0, phase_kept: 0, bound: budget as f64 / breve as f64 });
        }
    }
    rows
}

/// Per-phase keeps of a uniform `s`-subset of Ê, drawn from its exact law by
/// sequential hypergeometric splits over the (ℓ, k, j) classes. Needs only the
/// counting oracle, so it scales to instances that cannot be streamed.
pub fn uniform_class_counts(inst: &HardInstance, budget: u64, seed: u64) -> Result<Vec<Retention>> {
    let mut classes = Vec::new();
    for (ell, k, j) in inst.plan() {
        let c = edge_count(&inst.params, &inst.specs[ell], k)?;
        classes.push((ell, k, j, c.to_u64().ok_or_else(|| Error::Count("class size overflows".into()))?));
    }
    let terminal = if inst.is_alpha() { inst.t_star_size(0) } else { 0 };
    let mut remaining: u64 = classes.iter().map(|c| c.3).sum::<u64>() + terminal;
    let mut draws = budget.min(remaining);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = phase_rows(inst, budget);
    for (ell, k, j, size) in classes {
        let x = if draws == 0 || size == 0 {
            0
        } else {
            Hypergeometric::new(remaining, size, draws).map_err(|e| Error::Harness(e.to_string()))?.sample(&mut rng)
        };
        remaining -= size;
        draws -= x;
        let r = &mut rows[ell * inst.phases() + k];
        r.phase_kept += x;
        if inst.specs[ell].j[k] == j {
            r.special_kept += x;
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct RetentionRow {
    pub ell: usize,
    pub k: usize,
    pub breve: usize,
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
    /// mean ≤ bound + 3·std_err.
    pub within: bool,
    /// Some record came from a J-aware algorithm; `within` is informational only.
    pub flagged: bool,
}

/// Observed mean keeps of E_{k,J_k} against s/|B̆^ℓ_k|, per phase, over trials at one budget.
pub fn retention_report(trials: &[(bool, Vec<Retention>)]) -> Vec<RetentionRow> {
    let Some((_, first)) = trials.first() else {
        return Vec::new();
    };
    let flagged = trials.iter().any(|t| t.0);
    first
        .iter()
        .enumerate()
        .map(|(i, r0)| {
            let xs: Vec<f64> = trials.iter().map(|t| t.1[i].special_kept as f64).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let std_err = (var / n).sqrt();
            RetentionRow {
                ell: r0.ell,
                k: r0.k,
                breve: r0.breve,
                trials: xs.len(),
                mean,
                std_err,
                bound: r0.bound,
                within: mean <= r0.bound + 3.0 * std_err,
                flagged,
            }
        })
        .collect()
}

pub fn records_retention(records: &[ExperimentRecord]) -> Vec<RetentionRow> {
    let t: Vec<(bool, Vec<Retention>)> = records.iter().map(|r| (r.j_aware, r.retention.clone())).collect();
    retention_report(&t)
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub config: Config,
    pub algs: Vec<AlgKind>,
    pub budgets: Vec<Budget>,
    pub trials: u64,
    pub base_seed: u64,
}

/// Every (trial, algorithm, budget) run. Trial `t` samples J with seed `base_seed + t`.
/// The instance is a function of J, so trials sharing J share one instance, OPT and witness sets.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<ExperimentRecord>> {
    if spec.budgets.is_empty() || spec.algs.is_empty() {
        return Ok(Vec::new());
    }
    let (params, layout) = spec.config.build()?;
    let mut groups: BTreeMap<Vec<Vec<usize>>, Vec<u64>> = BTreeMap::new();
    for t in 0..spec.trials {
        let seed = spec.base_seed.wrapping_add(t);
        groups.entry(sample_j(&params, &layout, seed)).or_default().push(seed);
    }
    let per_group: Vec<Result<Vec<ExperimentRecord>>> = groups
        .into_par_iter()
        .map(|(_, seeds)| {
            let inst = sample_instance(&spec.config, seeds[0])?;
            let runner = Runner::new(&inst)?;
            let mut out = Vec::new();
            for seed in seeds {
                for &a in &spec.algs {
                    for b in &spec.budgets {
                        let s = b.resolve(runner.info.n_p, runner.info.total_edges);
                        let mut alg = a.make(&inst, seed);
                        out.push(runner.run(alg.as_mut(), s, seed));
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_group {
        all.extend(r?);
    }
    all.sort_by_key(|r| r.seed);
    Ok(all)
}

pub const CSV_HEADER: [&str; 13] =
    ["alg", "seed", "K", "L", "n", "budget", "kept", "m_alg", "opt", "ratio", "cover_bound", "special_kept", "runtime_ms"];

pub fn write_csv(records: &[ExperimentRecord], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(e.to_string());
    out.write_record(CSV_HEADER).map_err(err)?;
    for r in records {
        out.write_record([
            r.alg.clone(),
            r.seed.to_string(),
            r.k.to_string(),
            r.l.to_string(),
            r.n.to_string(),
            r.budget.to_string(),
            r.kept.to_string(),
            r.m_alg.to_string(),
            r.opt.to_string(),
            format!("{:.6}", r.ratio),
            r.cover_bound.to_string(),
            r.special_kept.to_string(),
            format!("{:.3}", r.runtime_ms),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean ratio per (algorithm, budget), in first-seen order.
pub fn mean_ratios(records: &[ExperimentRecord]) -> Vec<(String, u64, f64, usize)> {
    let mut acc: Vec<(String, u64, f64, usize)> = Vec::new();
    for r in records {
        match acc.iter_mut().find(|a| a.0 == r.alg && a.1 == r.budget) {
            Some(a) => {
                a.2 += r.ratio;
                a.3 += 1;
            }
            None => acc.push((r.alg.clone(), r.budget, r.ratio, 1)),
        }
    }
    for a in &mut acc {
        a.2 /= a.3 as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fix_a, fix_a_alpha, fix_d};

    #[test]
    fn store_all_recovers_opt_on_alpha_gadget() {
        let inst = fix_a_alpha().instance(3).unwrap();
        let r = Runner::new(&inst).unwrap();
        let e = r.info.total_edges;
        let rec = r.run(&mut StoreAll::default(), e, 3);
        assert!(rec.valid, "{:?}", rec.violations);
        assert_eq!(rec.kept, e);
        assert_eq!(rec.ratio, 1.0);
        assert!(rec.opt >= inst.opt_matching().len() as u64);
        assert!(rec.m_alg <= rec.cover_bound);
    }

    #[test]
    fn greedy_is_maximal_and_half_approximate() {
        for seed in 0..5 {
            let inst = fix_a().instance(seed).unwrap();
            let r = Runner::new(&inst).unwrap();
            let rec = r.run(&mut Greedy::default(), r.info.n_p, seed);
            assert!(rec.valid && rec.maximal, "{:?}", rec.violations);
            assert!(rec.kept <= r.info.n_p);
            assert!(2 * rec.m_alg >= rec.opt);
        }
    }

    #[test]
    fn greedy_under_tight_budget_is_not_claimed_maximal() {
        let inst = fix_a().instance(0).unwrap();
        let r = Runner::new(&inst).unwrap();
        let rec = r.run(&mut Greedy::default(), 1, 0);
        assert!(rec.valid);
        assert_eq!(rec.m_alg, 1);
        assert!(!rec.maximal);
    }

    struct Cheater;

    impl BudgetedAlgorithm for Cheater {
        fn name(&self) -> &'static str {
            "cheater"
        }
        fn init(&mut self, _: &PublicInfo, _: usize) {}
        fn on_edge(&mut self, _: &StreamedEdge) -> Decision {
            Decision::Keep
        }
    }

    struct BadReturn;

    impl BudgetedAlgorithm for BadReturn {
        fn name(&self) -> &'static str {
            "bad-return"
        }
        fn init(&mut self, _: &PublicInfo, _: usize) {}
        fn on_edge(&mut self, _: &StreamedEdge) -> Decision {
            Decision::Discard
        }
        fn finalize(&mut self, _: &[StreamedEdge]) -> Option<Vec<StreamedEdge>> {
            Some(vec![StreamedEdge { p: 0, q: 0, ell: 0, k: 0, j: 0 }])
        }
    }

    #[test]
    fn harness_aborts_interface_violations() {
        let inst = fix_a().instance(0).unwrap();
        let r = Runner::new(&inst).unwrap();
        let rec = r.run(&mut Cheater, 5, 0);
        assert!(!rec.valid);
        assert_eq!(rec.kept, 5);
        assert!(rec.violations[0].contains("budget"));
        let rec = r.run(&mut BadReturn, 5, 0);
        assert!(!rec.valid);
        assert!(rec.violations[0].contains("returned matching"));
    }

    #[test]
    fn zero_budget_keeps_nothing() {
        let inst = fix_d().instance(0).unwrap();
        let r = Runner::new(&inst).unwrap();
        for a in AlgKind::ALL {
            let rec = r.run(a.make(&inst, 0).as_mut(), 0, 0);
            assert!(rec.valid);
            assert_eq!(rec.kept, 0);
            assert!(rec.retention.iter().all(|x| x.special_kept == 0));
        }
    }

    #[test]
    fn reservoir_inclusion_is_uniform() {
        // Each of the 64 edges survives with probability s/|Ê| = 1/4.
        let inst = fix_a().instance(0).unwrap();
        let info = PublicInfo::of(&inst).unwrap();
        let edges: Vec<StreamedEdge> = inst.stream().collect();
        assert_eq!(edges.len(), 64);
        let trials = 500;
        let mut hits = vec![0u32; edges.len()];
        for t in 0..trials {
            let mut a = UniformSample::new(t);
            a.init(&info, 16);
            let mut kept: Vec<usize> = Vec::new();
            for (i, e) in edges.iter().enumerate() {
                match a.on_edge(e) {
                    Decision::Keep => kept.push(i),
                    Decision::Replace(s) => kept[s] = i,
                    Decision::Discard => {}
                }
            }
            assert_eq!(kept.len(), 16);
            for i in kept {
                hits[i] += 1;
            }
        }
        let p = 0.25;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        for h in hits {
            let f = h as f64 / trials as f64;
            assert!((f - p).abs() < 4.5 * sd, "inclusion frequency {f}");
        }
    }

    #[test]
    fn uniform_kept_sets_are_nested_in_budget() {
        let inst = fix_a().instance(0).unwrap();
        let info = PublicInfo::of(&inst).unwrap();
        let kept = |s: usize| {
            let mut a = UniformSample::new(9);
            a.init(&info, s);
            let mut v = Vec::new();
            for e in inst.stream() {
                match a.on_edge(&e) {
                    Decision::Keep => v.push(e),
                    Decision::Replace(i) => v[i] = e,
                    Decision::Discard => {}
                }
            }
            v.into_iter().collect::<HashSet<_>>()
        };
        let (a, b) = (kept(10), kept(20));
        assert!(a.is_subset(&b));
    }

    #[test]
    fn clairvoyant_contains_constructive_matching() {
        let inst = fix_d().instance(2).unwrap();
        let r = Runner::new(&inst).unwrap();
        let constructive = inst.opt_matching().len() as u64;
        let rec = r.run(&mut Clairvoyant::new(&inst), 2 * r.info.n_p, 2);
        assert!(rec.valid, "{:?}", rec.violations);
        assert!(rec.j_aware);
        assert!(rec.m_alg >= constructive);
        let tight = r.run(&mut Clairvoyant::new(&inst), constructive, 2);
        assert_eq!(tight.m_alg, constructive);
    }

    #[test]
    fn budgets_parse() {
        assert_eq!("100".parse::<Budget>().unwrap(), Budget::Edges(100));
        assert_eq!("P".parse::<Budget>().unwrap(), Budget::TimesP(1.0));
        assert_eq!("0.5E".parse::<Budget>().unwrap(), Budget::TimesE(0.5));
        assert!("-1P".parse::<Budget>().is_err());
        assert!("x".parse::<Budget>().is_err());
        assert_eq!(Budget::TimesP(2.0).resolve(10, 99), 20);
    }

    #[test]
    fn class_counts_follow_the_budget() {
        let inst = fix_d().instance(1).unwrap();
        let total = inst.total_edges().unwrap();
        let rows = uniform_class_counts(&inst, total / 2, 4).unwrap();
        assert_eq!(rows.iter().map(|r| r.phase_kept).sum::<u64>(), total / 2);
        let all = uniform_class_counts(&inst, total, 4).unwrap();
        assert_eq!(all.iter().map(|r| r.phase_kept).sum::<u64>(), total);
        assert!(uniform_class_counts(&inst, 0, 4).unwrap().iter().all(|r| r.special_kept == 0));
    }

    #[test]
    fn empty_sweep_and_csv() {
        let spec = SweepSpec { config: fix_a().config, algs: vec![AlgKind::Greedy], budgets: vec![], trials: 3, base_seed: 0 };
        let recs = sweep(&spec).unwrap();
        assert!(recs.is_empty());
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_HEADER.join(","));
    }

    #[test]
    fn sweep_is_deterministic_and_monotone() {
        let spec = SweepSpec {
            config: fix_a().config,
            algs: vec![AlgKind::Uniform],
            budgets: vec![Budget::Edges(4), Budget::Edges(16), Budget::Edges(32)],
            trials: 6,
            base_seed: 11,
        };
        let a = sweep(&spec).unwrap();
        let b = sweep(&spec).unwrap();
        let key = |r: &ExperimentRecord| (r.seed, r.budget, r.kept, r.m_alg, r.opt);
        assert_eq!(a.iter().map(key).collect::<Vec<_>>(), b.iter().map(key).collect::<Vec<_>>());
        let means = mean_ratios(&a);
        assert!(means.windows(2).all(|w| w[0].2 <= w[1].2), "{means:?}");
    }
}
