//! Exact checks of an instance's structure, grouped into suites.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{analytic_ratios, sigma};
use crate::cube::{Compiled, Dims, IntervalSet, Label, EXPLICIT_CAP};
use crate::glue::GlueTables;
use crate::instance::{HardInstance, Side};
use crate::matching::{max_matching, BipartiteGraph};
use crate::predecessor::{
    alpha_components, alpha_cover, cover_bound, downset_explicit, gamma_probe, key_violations, mu, nu, nu_explicit, special_edges_filter,
    t_minus_tstar_explicit, tau_explicit, witness_counts_piecewise, PredecessorSet, WitnessOracle,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Sizes,
    Lines,
    Glue,
    Predecessor,
    Cover,
    Key,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Sizes, Suite::Lines, Suite::Glue, Suite::Predecessor, Suite::Cover, Suite::Key];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sizes => "sizes",
            Suite::Lines => "lines",
            Suite::Glue => "glue",
            Suite::Predecessor => "predecessor",
            Suite::Cover => "cover",
            Suite::Key => "key",
        }
    }

    /// One suite name, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        s.split(',').map(|x| x.trim().parse()).collect()
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Params(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub status: Status,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn count(&self, s: Status) -> usize {
        self.checks.iter().filter(|c| c.status == s).count()
    }

    pub fn suite(&self, s: Suite) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |c| c.suite == s)
    }

    pub fn suite_passed(&self, s: Suite) -> bool {
        self.suite(s).all(|c| c.status != Status::Fail)
    }

    fn eq<T: PartialEq + fmt::Display>(&mut self, suite: Suite, name: impl Into<String>, expected: T, actual: T) {
        let status = if expected == actual { Status::Pass } else { Status::Fail };
        self.checks.push(Check { suite, name: name.into(), expected: expected.to_string(), actual: actual.to_string(), status });
    }

    fn holds(&mut self, suite: Suite, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.checks.push(Check { suite, name: name.into(), expected: "holds".into(), actual: detail.into(), status });
    }

    fn skip(&mut self, suite: Suite, name: impl Into<String>, why: impl Into<String>) {
        self.checks.push(Check { suite, name: name.into(), expected: "-".into(), actual: why.into(), status: Status::Skip });
    }

    fn error(&mut self, suite: Suite, name: impl Into<String>, e: Error) {
        self.checks.push(Check { suite, name: name.into(), expected: "no error".into(), actual: e.to_string(), status: Status::Fail });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            writeln!(f, "{tag} [{}] {}: expected {}, got {}", c.suite.name(), c.name, c.expected, c.actual)?;
        }
        write!(f, "{} passed, {} failed, {} skipped", self.count(Status::Pass), self.count(Status::Fail), self.count(Status::Skip))
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Exhaustive enumeration up to the explicit cap instead of a small one.
    pub deep: bool,
    pub seed: u64,
    pub line_samples: usize,
    pub probe_flips: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { deep: false, seed: 0, line_samples: 10_000, probe_flips: 100_000 }
    }
}

const SHALLOW_CAP: u64 = 1 << 20;
const EDGE_CAP: u64 = 1 << 22;
const ALL_LINES_CAP: u64 = 1 << 16;

impl VerifyOptions {
    fn enumerable(&self, inst: &HardInstance) -> bool {
        inst.n_labels() <= if self.deep { EXPLICIT_CAP } else { SHALLOW_CAP }
    }
}

pub fn verify(inst: &HardInstance, suites: &[Suite], opts: &VerifyOptions) -> Report {
    let mut r = Report::default();
    for &s in suites {
        match s {
            Suite::Sizes => sizes(inst, opts, &mut r),
            Suite::Lines => lines(inst, opts, &mut r),
            Suite::Glue => glue(inst, opts, &mut r),
            Suite::Predecessor => predecessor(inst, opts, &mut r),
            Suite::Cover => cover(inst, opts, &mut r),
            Suite::Key => key(inst, &mut r),
        }
    }
    r
}

fn big(x: u64) -> BigUint {
    BigUint::from(x)
}

/// N·a/b when exact, else the fraction as text.
fn scaled(n: &BigUint, a: u64, b: u64) -> String {
    let num = n * big(a);
    if (&num % big(b)).is_zero() {
        (num / big(b)).to_string()
    } else {
        format!("{num}/{b}")
    }
}

/// Depth and weight residue of every label, straight from the definitions.
struct Census {
    /// t[k] = |T_k|, s[k] = |S_k|, down[k] = |DownSet_k(T_*)|.
    t: Vec<u64>,
    s: Vec<u64>,
    down: Vec<u64>,
}

fn census(inst: &HardInstance, ell: usize) -> Census {
    let p = &inst.params;
    let spec = &inst.specs[ell];
    let (m, w, kk) = (inst.codec.m, p.w_u64().unwrap(), p.k as u64);
    let phases = spec.phases;
    let thr: Vec<u64> = (0..phases).map(|s| m - m / (kk - s as u64)).collect();
    let res: Vec<u64> = (0..phases).map(|s| w / (kk - s as u64)).collect();
    let jv = spec.j.clone();
    let zero = || (vec![0u64; phases + 1], vec![0u64; phases + 1], vec![0u64; phases + 1]);
    let (t, s, down) = (0..inst.n_labels())
        .into_par_iter()
        .fold(zero, |mut acc, i| {
            let c = inst.codec.unpack(inst.codec.from_index(i));
            let depth = (0..phases).find(|&s| c[jv[s]] >= thr[s]).unwrap_or(phases);
            let r = c.iter().sum::<u64>() % w;
            for k in 0..=depth {
                acc.0[k] += 1;
                if k < phases && r < res[k] {
                    acc.1[k] += 1;
                    if depth == phases {
                        acc.2[k] += 1;
                    }
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for i in 0..=phases {
                a.0[i] += b.0[i];
                a.1[i] += b.1[i];
                a.2[i] += b.2[i];
            }
            a
        });
    Census { t, s, down }
}

fn sizes(inst: &HardInstance, opts: &VerifyOptions, r: &mut Report) {
    let p = &inst.params;
    let d = Dims::from(p);
    let n = p.n_labels();
    let kk = p.k as u64;
    for (ell, spec) in inst.specs.iter().enumerate() {
        let census = opts.enumerable(inst).then(|| census(inst, ell));
        let t_star = spec.t_star(p).count(&d);
        for k in 0..=spec.phases {
            let expected = scaled(&n, kk - k as u64, kk);
            match spec.t_k(p, k).and_then(|cs| cs.count(&d)) {
                Ok(c) => r.eq(Suite::Sizes, format!("|T^{ell}_{k}| (counting)"), expected.clone(), c.to_string()),
                Err(e) => r.error(Suite::Sizes, format!("|T^{ell}_{k}|"), e),
            }
            match &census {
                Some(c) => r.eq(Suite::Sizes, format!("|T^{ell}_{k}| (enumeration)"), expected, c.t[k].to_string()),
                None => r.skip(Suite::Sizes, format!("|T^{ell}_{k}| (enumeration)"), format!("N = {n} above enumeration cap")),
            }
        }
        for k in 0..spec.phases {
            let expected = scaled(&n, 1, kk);
            match spec.s_k(p, k).and_then(|cs| cs.count(&d)) {
                Ok(c) => r.eq(Suite::Sizes, format!("|S^{ell}_{k}| (counting)"), expected.clone(), c.to_string()),
                Err(e) => r.error(Suite::Sizes, format!("|S^{ell}_{k}|"), e),
            }
            if let Some(c) = &census {
                r.eq(Suite::Sizes, format!("|S^{ell}_{k}| (enumeration)"), expected, c.s[k].to_string());
            }
            if inst.is_alpha() {
                let Ok(ts) = &t_star else { continue };
                let lambda = kk - k as u64;
                let expected = if (ts % big(lambda)).is_zero() { (ts / big(lambda)).to_string() } else { format!("{ts}/{lambda}") };
                match spec.downset_system(p, &spec.t_star(p), k).and_then(|cs| cs.count(&d)) {
                    Ok(c) => r.eq(Suite::Sizes, format!("|DownSet_{k}(T_*)| = |T_*|/(K−{k}) (counting)"), expected.clone(), c.to_string()),
                    Err(e) => r.error(Suite::Sizes, "downset", e),
                }
                if let Some(c) = &census {
                    r.eq(Suite::Sizes, format!("|DownSet_{k}(T_*)| = |T_*|/(K−{k}) (enumeration)"), expected, c.down[k].to_string());
                }
            }
        }
    }
}

fn compile(inst: &HardInstance, cs: Result<crate::cube::ConstraintSystem>) -> Result<Compiled> {
    cs?.compile(&Dims::from(&inst.params))
}

fn lines(inst: &HardInstance, opts: &VerifyOptions, r: &mut Report) {
    let p = &inst.params;
    let m = inst.codec.m;
    let kk = p.k as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x11e5);
    for (ell, spec) in inst.specs.iter().enumerate() {
        let view = inst.view(ell);
        for k in 0..spec.phases {
            let lam = kk - k as u64;
            let Ok(t_k) = compile(inst, spec.t_k(p, k)) else {
                r.error(Suite::Lines, format!("T^{ell}_{k}"), Error::Count("compile".into()));
                continue;
            };
            let s_k = view.s_system(k);
            for &j in &spec.blocks.blocks[k] {
                let name = format!("line properties (1)-(4), ℓ={ell} k={k} j={j}");
                let (t_kj, s_kj) = match (compile(inst, spec.t_kj(p, k, j)), compile(inst, spec.s_kj(p, k, j))) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => {
                        r.error(Suite::Lines, name, e);
                        continue;
                    }
                };
                let n_lines = t_k.count() / m;
                let reps: Vec<Label> = if n_lines <= ALL_LINES_CAP {
                    match view.lines(k, j) {
                        Ok(l) => l.collect(),
                        Err(e) => {
                            r.error(Suite::Lines, name, e);
                            continue;
                        }
                    }
                } else {
                    (0..opts.line_samples).map(|_| inst.codec.set(t_k.unrank(rng.gen_range(0..t_k.count())), j, 0)).collect()
                };
                let bad = reps
                    .par_iter()
                    .filter(|&&y| {
                        let line: Vec<Label> = (0..m).map(|v| inst.codec.set(y, j, v)).collect();
                        let c = |f: &dyn Fn(Label) -> bool| line.iter().filter(|&&x| f(x)).count() as u64;
                        let in_t = c(&|x| t_k.contains(x));
                        let top = c(&|x| !t_kj.contains(x));
                        let in_s = c(&|x| s_k.contains(x));
                        let in_skj = c(&|x| s_kj.contains(x));
                        !(in_t == m && top * lam == m && in_s * lam == m && in_skj * lam * lam == m * (lam - 1))
                    })
                    .count();
                let scope = if n_lines <= ALL_LINES_CAP { "all" } else { "sampled" };
                r.eq(Suite::Lines, format!("{name}, {scope} {} lines: failing lines", reps.len()), 0, bad);
            }
        }
        edge_disjointness(inst, ell, opts, r);
    }
    stream_disjointness(inst, opts, r);
}

/// E^ℓ_{k,j} pairwise disjoint; endpoints differ exactly in coordinate j.
fn edge_disjointness(inst: &HardInstance, ell: usize, opts: &VerifyOptions, r: &mut Report) {
    let view = inst.view(ell);
    let spec = &inst.specs[ell];
    let total: u64 = (0..spec.phases).map(|k| spec.blocks.breve(k).len() as u64 * edge_count_u64(inst, ell, k)).sum();
    let name = format!("E^{ell}_{{k,j}} pairwise disjoint");
    if total > if opts.deep { EXPLICIT_CAP } else { EDGE_CAP } {
        r.skip(Suite::Lines, name, format!("{total} edges above cap"));
        return;
    }
    let mut keys: Vec<u128> = Vec::with_capacity(total as usize);
    let mut off_j = 0u64;
    for k in 0..spec.phases {
        for j in spec.blocks.breve(k) {
            for e in view.edges(k, j).unwrap() {
                let (s, t) = (inst.codec.index(e.s), inst.codec.index(e.t));
                if inst.codec.set(e.s, j, 0) != inst.codec.set(e.t, j, 0) || e.s == e.t {
                    off_j += 1;
                }
                keys.push(((k as u128) << 100) | ((s as u128) << 50) | t as u128);
            }
        }
    }
    r.eq(Suite::Lines, format!("|E^{ell}| enumerated vs counted"), total, keys.len() as u64);
    r.eq(Suite::Lines, format!("E^{ell} edges whose endpoints differ off their direction"), 0, off_j);
    keys.par_sort_unstable();
    let dup = keys.windows(2).filter(|w| w[0] == w[1]).count();
    r.eq(Suite::Lines, format!("{name}: shared edges"), 0, dup);
}

fn edge_count_u64(inst: &HardInstance, ell: usize, k: usize) -> u64 {
    crate::gadget::edge_count(&inst.params, &inst.specs[ell], k).ok().and_then(|c| c.to_u64()).unwrap_or(u64::MAX / 4)
}

fn stream_disjointness(inst: &HardInstance, opts: &VerifyOptions, r: &mut Report) {
    let name = "Ê has no repeated (p, q) pair";
    let total = match inst.total_edges() {
        Ok(t) => t,
        Err(e) => return r.error(Suite::Lines, name, e),
    };
    if total > if opts.deep { EXPLICIT_CAP } else { EDGE_CAP } {
        return r.skip(Suite::Lines, name, format!("|Ê| = {total} above cap"));
    }
    let mut keys: Vec<u64> = inst.stream().map(|e| ((e.p as u64) << 32) | e.q as u64).collect();
    r.eq(Suite::Lines, "|Ê| streamed vs counted", total, keys.len() as u64);
    keys.par_sort_unstable();
    r.eq(Suite::Lines, name, 0, keys.windows(2).filter(|w| w[0] == w[1]).count());
}

fn glue(inst: &HardInstance, opts: &VerifyOptions, r: &mut Report) {
    for s in &inst.specs {
        let v = s.violations();
        r.holds(Suite::Glue, format!("Property q-k for J^{}", s.ell), v.is_empty(), if v.is_empty() { "ok".into() } else { v.join("; ") });
    }
    if !inst.params.is_glued() {
        r.skip(Suite::Glue, "gluing maps", "single gadget");
        return;
    }
    let half = inst.params.phases as usize;
    for ell in 1..inst.gadgets() {
        let g = &inst.glue[ell - 1];
        match GlueTables::build(&inst.params, &inst.specs[ell - 1], &inst.specs[ell]) {
            Ok(b) => r.holds(
                Suite::Glue,
                format!("stored glue^{ell} equals tables rebuilt from J"),
                &b == g,
                if &b == g { "equal" } else { "differ" },
            ),
            Err(e) => r.error(Suite::Glue, format!("rebuild glue^{ell} from J"), e),
        }
        let v = g.violations();
        r.holds(Suite::Glue, format!("glue^{ell} tables well formed"), v.is_empty(), if v.is_empty() { "ok".into() } else { v.join("; ") });
        r.eq(Suite::Glue, format!("|I^{}|", ell - 1), half + 2, g.i_set.len());
        for k in 0..g.phases() {
            r.eq(Suite::Glue, format!("|I'^{ell}_{k}|"), half + 2, g.i_prime[k].len());
        }
        r.eq(Suite::Glue, format!("Σ_k |D^{ell}_k| = |A^{}|", ell - 1), g.a_size, *g.d_offset.last().unwrap());
        if !v.is_empty() {
            continue;
        }
        tau_bijection(inst, ell, opts, r);
        densification(inst, ell, opts, r);
        pi_pushforward(inst, ell, opts, r);
    }
}

fn tau_bijection(inst: &HardInstance, ell: usize, opts: &VerifyOptions, r: &mut Report) {
    let g = &inst.glue[ell - 1];
    let view = inst.view(ell);
    let prev = inst.view(ell - 1);
    let t_star = inst.t_star_size(ell - 1);
    let dom: u64 = (0..view.phases()).map(|k| view.s_system(k).count()).sum();
    r.eq(Suite::Glue, format!("|⊎_k S^{ell}_k| = |T_*^{}|", ell - 1), t_star, dom);
    let name = format!("τ^{ell}: ⊎S^{ell}_k → T_*^{} bijective", ell - 1);
    if !opts.enumerable(inst) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7a0);
        let mut bad = 0;
        for _ in 0..opts.line_samples {
            let k = rng.gen_range(0..view.phases());
            let s = view.s_system(k);
            let x = s.unrank(rng.gen_range(0..s.count()));
            match g.tau_apply(&inst.codec, k, x) {
                Ok(y) if prev.in_t_star(y) && g.tau_invert(&inst.codec, y).ok() == Some((k, x)) => {}
                _ => bad += 1,
            }
        }
        r.eq(Suite::Glue, format!("{name}: sampled round-trip failures"), 0, bad);
        return;
    }
    let mut image = FixedBitSet::with_capacity(inst.n_labels() as usize);
    let (mut collisions, mut outside, mut roundtrip) = (0u64, 0u64, 0u64);
    for k in 0..view.phases() {
        let s = view.s_system(k);
        let ys: Vec<(Label, Option<Label>)> = (0..s.count())
            .into_par_iter()
            .map(|i| {
                let x = s.unrank(i);
                (x, g.tau_apply(&inst.codec, k, x).ok())
            })
            .collect();
        for (x, y) in ys {
            let Some(y) = y else {
                outside += 1;
                continue;
            };
            if !prev.in_t_star(y) {
                outside += 1;
            }
            let i = inst.codec.index(y) as usize;
            if image.put(i) {
                collisions += 1;
            }
            if g.tau_invert(&inst.codec, y).ok() != Some((k, x)) {
                roundtrip += 1;
            }
        }
    }
    r.eq(Suite::Glue, format!("{name}: image size"), t_star, image.count_ones(..) as u64);
    r.eq(Suite::Glue, format!("{name}: collisions"), 0, collisions);
    r.eq(Suite::Glue, format!("{name}: images outside T_*"), 0, outside);
    r.eq(Suite::Glue, format!("{name}: τ⁻¹∘τ failures"), 0, roundtrip);
}

/// ρ_k(S^ℓ_k) = {x ∈ T^ℓ_k : x_{q_k} < m/(K−k)}, injectively.
fn densification(inst: &HardInstance, ell: usize, opts: &VerifyOptions, r: &mut Report) {
    let g = &inst.glue[ell - 1];
    let p = &inst.params;
    let spec = &inst.specs[ell];
    let view = inst.view(ell);
    for k in 0..view.phases() {
        let rho = &g.rho[k];
        let q = spec.blocks.q[k].unwrap();
        let lam = p.k as u64 - k as u64;
        let target = compile(inst, spec.t_k(p, k).map(|cs| cs.with(q, IntervalSet::range(0u32, inst.codec.m / lam))));
        let Ok(target) = target else {
            r.error(Suite::Glue, format!("densification target ℓ={ell} k={k}"), Error::Count("compile".into()));
            continue;
        };
        let s = view.s_system(k);
        r.eq(Suite::Glue, format!("|ρ_{k}(S^{ell}_{k})| target size"), s.count(), target.count());
        let name = format!("ρ_{k} on S^{ell}_{k} (λ={lam}, r={q})");
        let exhaustive = opts.enumerable(inst);
        let n_pts = if exhaustive { s.count() } else { opts.line_samples as u64 };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xde5);
        let pts: Vec<u64> = if exhaustive { (0..n_pts).collect() } else { (0..n_pts).map(|_| rng.gen_range(0..s.count())).collect() };
        let imgs: Vec<(u64, bool, bool)> = pts
            .par_iter()
            .map(|&i| {
                let x = s.unrank(i);
                let y = rho.apply(&inst.codec, g.w, x);
                let only_r = (0..inst.codec.n).all(|c| c == q || inst.codec.get(x, c) == inst.codec.get(y, c));
                (inst.codec.index(y), target.contains(y), only_r && rho.invert(&inst.codec, g.w, y) == x)
            })
            .collect();
        let outside = imgs.iter().filter(|t| !t.1).count();
        let bad_inv = imgs.iter().filter(|t| !t.2).count();
        r.eq(Suite::Glue, format!("{name}: images outside target"), 0, outside);
        r.eq(Suite::Glue, format!("{name}: moved coordinates other than r, or not inverted"), 0, bad_inv);
        if exhaustive {
            let mut seen = FixedBitSet::with_capacity(inst.n_labels() as usize);
            let col = imgs.iter().filter(|t| seen.put(t.0 as usize)).count();
            r.eq(Suite::Glue, format!("{name}: collisions (exhaustive)"), 0, col);
        }
    }
}

/// Π_k({x}×R×[m]^rest) = {M(x)}×R×[m]^rest on the coordinates I ∪ I'_k ∪ {λ}.
fn pi_pushforward(inst: &HardInstance, ell: usize, opts: &VerifyOptions, r: &mut Report) {
    let g = &inst.glue[ell - 1];
    let codec = &inst.codec;
    let m = codec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x919);
    for k in 0..g.phases() {
        let ip = &g.i_prime[k];
        let lam = (0..codec.n).find(|c| !g.i_set.contains(c) && !ip.contains(c));
        let rset: Vec<u64> = match lam {
            Some(_) => {
                let v: Vec<u64> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
                if v.is_empty() {
                    vec![0]
                } else {
                    v
                }
            }
            None => vec![0],
        };
        let d_size = g.d_size(k);
        let b_count = m.pow(g.i_set.len() as u32);
        let mut bad = 0u64;
        let mut d = vec![0u64; ip.len()];
        for rank in 0..d_size {
            unrank(rank, &g.d_limits[k], &mut d);
            let mx = g.m_tuple(k, &d);
            let mut image: HashSet<(Vec<u64>, u64)> = HashSet::new();
            let mut b = vec![0u64; g.i_set.len()];
            for br in 0..b_count {
                unrank(br, &vec![m; g.i_set.len()], &mut b);
                for &rv in &rset {
                    let mut z = Label(0);
                    for (c, v) in ip.iter().zip(&d) {
                        z = codec.set(z, *c, *v);
                    }
                    for (c, v) in g.i_set.iter().zip(&b) {
                        z = codec.set(z, *c, *v);
                    }
                    if let Some(c) = lam {
                        z = codec.set(z, c, rv);
                    }
                    let Ok(out) = g.pi_apply(codec, k, z) else {
                        bad += 1;
                        continue;
                    };
                    let on_i: Vec<u64> = g.i_set.iter().map(|&c| codec.get(out, c)).collect();
                    let on_ip: Vec<u64> = ip.iter().map(|&c| codec.get(out, c)).collect();
                    let rest_zero =
                        (0..codec.n).all(|c| g.i_set.contains(&c) || ip.contains(&c) || Some(c) == lam || codec.get(out, c) == 0);
                    let lam_v = lam.map_or(0, |c| codec.get(out, c));
                    if on_i != mx || on_ip != b || lam_v != rv || !rest_zero {
                        bad += 1;
                    }
                    image.insert((on_ip, lam_v));
                }
            }
            if image.len() as u64 != b_count * rset.len() as u64 {
                bad += 1;
            }
        }
        r.eq(Suite::Glue, format!("Π^{ell}_{k} rectangle pushforward over all {d_size} points of D_{k}: failures"), 0, bad);
    }
}

fn unrank(mut r: u64, limits: &[u64], out: &mut [u64]) {
    for i in (0..limits.len()).rev() {
        out[i] = r % limits[i];
        r /= limits[i];
    }
}

/// σ^j·c·N as an exact rational.
fn sigma_pow_times(k: u32, j: usize, c: &BigRational, n: &BigUint) -> BigRational {
    num_traits::pow(sigma(k), j) * c * BigRational::from_integer(n.clone().into())
}

fn rational_eq(r: &mut Report, name: String, expected: BigRational, actual: &BigUint) {
    let a = BigRational::from_integer(actual.clone().into());
    r.eq(Suite::Predecessor, name, expected.to_string(), a.to_string());
}

fn predecessor(inst: &HardInstance, opts: &VerifyOptions, r: &mut Report) {
    if !inst.params.is_glued() {
        r.skip(Suite::Predecessor, "predecessor maps", "single gadget");
        return;
    }
    let n = inst.params.n_labels();
    let kk = inst.params.k;
    let half_sigma = (BigRational::from_integer(1.into()) - sigma(kk)) / BigRational::from_integer(2.into());
    let explicit = opts.enumerable(inst);
    for ell in 0..inst.gadgets() {
        let pw = PredecessorSet::t_minus_tstar_pieces(inst, ell);
        let base = match pw.count(inst) {
            Ok(c) => c,
            Err(e) => return r.error(Suite::Predecessor, "T∖T_*", e),
        };
        let ex = if explicit { PredecessorSet::t_minus_tstar_explicit(inst, ell).ok() } else { None };
        for j in 0..=ell {
            let (a, b) = (nu(inst, ell, j, &pw), mu(inst, ell, j, &pw));
            let (Ok(a), Ok(b)) = (a, b) else {
                r.error(Suite::Predecessor, format!("ν/μ_{{{ell},{j}}}"), Error::Range("piecewise engine".into()));
                continue;
            };
            let (ca, cb) = (a.count(inst).unwrap_or_default(), b.count(inst).unwrap_or_default());
            let base_q = BigRational::from_integer(base.clone().into()) / BigRational::from_integer(n.clone().into());
            rational_eq(
                r,
                format!("|ν_{{{ell},{j}}}(T^{ell}∖T_*^{ell})| = σ^{j}·|T^{ell}∖T_*^{ell}|"),
                sigma_pow_times(kk, j, &base_q, &n),
                &ca,
            );
            rational_eq(r, format!("|μ_{{{ell},{j}}}(T^{ell}∖T_*^{ell})| = σ^{j}·γ·N"), sigma_pow_times(kk, j, &half_sigma, &n), &cb);
            if j < ell {
                if let Ok(next) = nu(inst, ell, j + 1, &pw).and_then(|x| x.count(inst)) {
                    r.eq(Suite::Predecessor, format!("|μ_{{{ell},{j}}}| = |ν_{{{ell},{}}}|", j + 1), cb.to_string(), next.to_string());
                }
            }
            if let Some(ex) = &ex {
                let same = |x: &PredecessorSet, y: Result<PredecessorSet>| match (x.to_explicit(inst), y.and_then(|y| y.to_explicit(inst)))
                {
                    (Ok(a), Ok(b)) => a == b,
                    _ => false,
                };
                r.holds(
                    Suite::Predecessor,
                    format!("ν_{{{ell},{j}}} piecewise = explicit"),
                    same(&a, nu(inst, ell, j, ex)),
                    "set equality",
                );
                r.holds(
                    Suite::Predecessor,
                    format!("μ_{{{ell},{j}}} piecewise = explicit"),
                    same(&b, mu(inst, ell, j, ex)),
                    "set equality",
                );
            }
        }
    }
    if explicit {
        if let Err(e) = explicit_families(inst, r) {
            r.error(Suite::Predecessor, "explicit witness families", e);
        }
        if let Err(e) = t_star_recursion(inst, r) {
            r.error(Suite::Predecessor, "T_* decomposition", e);
        }
    } else {
        r.skip(Suite::Predecessor, "explicit witness families and T_* decomposition", format!("N = {n} above enumeration cap"));
    }
    let probe = gamma_probe(inst, opts.probe_flips, opts.seed);
    if probe.off_gamma.is_empty() {
        r.skip(Suite::Predecessor, "Γ-measurability probe", "Γ covers every coordinate");
    } else {
        r.eq(
            Suite::Predecessor,
            format!("Γ-measurability: class changes over {} off-Γ flips on {:?}", probe.flips, probe.off_gamma),
            0,
            probe.changes,
        );
    }
}

/// A_P, B_P, A_Q, B_Q built from ν/μ images by definition, compared to the traceback oracle.
fn explicit_families(inst: &HardInstance, r: &mut Report) -> Result<()> {
    let (np, nq) = (inst.n_p() as usize, inst.n_q() as usize);
    let mut a_p = FixedBitSet::with_capacity(np);
    let mut b_p = FixedBitSet::with_capacity(np);
    let mut a_q = FixedBitSet::with_capacity(nq);
    let mut b_q = FixedBitSet::with_capacity(nq);
    let mut overlaps = 0u64;
    let mut wrong_side = 0u64;
    let mut put = |set: &mut FixedBitSet, id: u32| {
        if set.put(id as usize) {
            overlaps += 1;
        }
    };
    for ell in 0..inst.gadgets() {
        let u = t_minus_tstar_explicit(inst, ell)?;
        for j in (0..=ell).step_by(2) {
            let layer = ell - j;
            let v = nu_explicit(inst, ell, j, &u)?;
            let side = HardInstance::side_of_t(layer);
            wrong_side += u64::from((side == Side::P) != (ell % 2 == 0));
            for i in v.ones() {
                let id = inst.t_index(layer, inst.codec.from_index(i as u64));
                match side {
                    Side::P => put(&mut a_p, id),
                    Side::Q => put(&mut a_q, id),
                }
            }
            let parts = downset_explicit(inst, layer, &v);
            if layer == 0 {
                for (k, part) in parts.iter().enumerate() {
                    for i in part.ones() {
                        let id = inst.s0_index(k, inst.codec.from_index(i as u64)).expect("S^0 member");
                        put(&mut b_q, id);
                    }
                }
                wrong_side += u64::from(ell % 2 != 0);
            } else {
                let t = tau_explicit(inst, layer, &parts)?;
                let side = HardInstance::side_of_t(layer - 1);
                wrong_side += u64::from((side == Side::Q) != (ell % 2 == 0));
                for i in t.ones() {
                    let id = inst.t_index(layer - 1, inst.codec.from_index(i as u64));
                    match side {
                        Side::P => put(&mut b_p, id),
                        Side::Q => put(&mut b_q, id),
                    }
                }
            }
        }
    }
    r.eq(Suite::Predecessor, "families land on the side their parity names", 0, wrong_side);
    r.eq(Suite::Predecessor, "pairwise overlaps among ν/μ images of distinct (ℓ, j)", 0, overlaps);
    r.eq(Suite::Predecessor, "|A_P ∩ B_P|", 0, a_p.intersection(&b_p).count());
    r.eq(Suite::Predecessor, "|A_Q ∩ B_Q|", 0, a_q.intersection(&b_q).count());
    let oracle = WitnessOracle::new(inst);
    let mism_p = (0..np as u32)
        .into_par_iter()
        .filter(|&i| oracle.in_a_p(i) != a_p.contains(i as usize) || oracle.in_b_p(i) != b_p.contains(i as usize))
        .count();
    let mism_q = (0..nq as u32)
        .into_par_iter()
        .filter(|&i| oracle.in_a_q(i) != a_q.contains(i as usize) || oracle.in_b_q(i) != b_q.contains(i as usize))
        .count();
    r.eq(Suite::Predecessor, "P vertices where traceback and definition disagree", 0, mism_p);
    r.eq(Suite::Predecessor, "Q vertices where traceback and definition disagree", 0, mism_q);
    Ok(())
}

/// T_*^ℓ = ν_{L−1,L−1−ℓ}(T_*^{L−1}) ⊎ ⋃_{j≥1} ν_{ℓ+j,j}(T^{ℓ+j}∖T_*^{ℓ+j}).
fn t_star_recursion(inst: &HardInstance, r: &mut Report) -> Result<()> {
    let l = inst.gadgets();
    let mut last = t_minus_tstar_explicit(inst, l - 1)?;
    last.toggle_range(..);
    for ell in 0..l {
        let mut lhs = t_minus_tstar_explicit(inst, ell)?;
        lhs.toggle_range(..);
        let mut rhs = nu_explicit(inst, l - 1, l - 1 - ell, &last)?;
        let mut overlap = 0usize;
        for j in 1..l - ell {
            let u = t_minus_tstar_explicit(inst, ell + j)?;
            let v = nu_explicit(inst, ell + j, j, &u)?;
            overlap += rhs.intersection(&v).count();
            rhs.union_with(&v);
        }
        r.holds(
            Suite::Predecessor,
            format!("T_*^{ell} decomposition"),
            lhs == rhs && overlap == 0,
            format!("|T_*| = {}, |rhs| = {}, overlaps = {overlap}", lhs.count_ones(..), rhs.count_ones(..)),
        );
    }
    Ok(())
}

fn cover(inst: &HardInstance, opts: &VerifyOptions, r: &mut Report) {
    let c = Suite::Cover;
    let matchings = |r: &mut Report| -> Vec<(&'static str, Vec<crate::instance::StreamedEdge>)> {
        let mut v = vec![("empty matching", Vec::new()), ("constructive matching", inst.opt_matching())];
        match inst.total_edges() {
            Ok(t) if t <= if opts.deep { EXPLICIT_CAP } else { EDGE_CAP } => {
                let edges: Vec<_> = inst.stream().collect();
                if let Ok(g) = BipartiteGraph::new(inst.n_p() as u32, inst.n_q() as u32, edges.iter().map(|e| (e.p, e.q))) {
                    let by: std::collections::HashMap<(u32, u32), _> = edges.iter().map(|e| ((e.p, e.q), *e)).collect();
                    v.push(("maximum matching of Ê", max_matching(&g).edges().iter().map(|k| by[k]).collect()));
                }
            }
            _ => r.skip(c, "maximum matching of Ê", "above cap"),
        }
        v
    };
    if !inst.params.is_glued() {
        match alpha_components(inst) {
            Ok((a, b)) => r.holds(c, "cover components", true, format!("|S∖DownSet(T_*)| = {a}, |T_*| = {b}")),
            Err(e) => return r.error(c, "cover components", e),
        }
        for (name, m) in matchings(r) {
            match alpha_cover(inst, &m) {
                Ok(cert) => r.holds(
                    c,
                    format!("|M| ≤ cover bound, {name}"),
                    cert.matching <= cert.bound(),
                    format!("{} ≤ {}", cert.matching, cert.bound()),
                ),
                Err(e) => r.error(c, name, e),
            }
        }
        return;
    }
    let oracle = WitnessOracle::new(inst);
    let counts = match oracle.counts() {
        Some(x) => x,
        None => {
            r.skip(c, "explicit witness tables", "sides above cap; using piecewise counts");
            match witness_counts_piecewise(inst) {
                Ok(x) => x,
                Err(e) => return r.error(c, "witness counts", e),
            }
        }
    };
    match witness_counts_piecewise(inst) {
        Ok(pw) => r.holds(c, "witness counts: traceback = piecewise", pw == counts, format!("{counts:?}")),
        Err(e) => r.error(c, "piecewise witness counts", e),
    }
    if let Ok(a) = analytic_ratios(inst.params.k, inst.params.l) {
        let n = BigRational::from_integer(inst.params.n_labels().into());
        let as_q = |x: u64| BigRational::from_integer(x.into());
        r.eq(c, "|B_P| = analytic B_P·N", (&a.b_p * &n).to_string(), as_q(counts.b_p).to_string());
        r.eq(c, "|B_Q| = analytic B_Q·N", (&a.b_q * &n).to_string(), as_q(counts.b_q).to_string());
    }
    r.holds(c, "A_P, B_P fit in P", counts.a_p + counts.b_p <= counts.n_p, format!("{} + {} ≤ {}", counts.a_p, counts.b_p, counts.n_p));
    r.holds(c, "A_Q, B_Q fit in Q", counts.a_q + counts.b_q <= counts.n_q, format!("{} + {} ≤ {}", counts.a_q, counts.b_q, counts.n_q));
    r.holds(c, "residual |P∖(A_P∪B_P)| (reported)", true, format!("{} of |P| = {}", counts.residual_p(), counts.n_p));
    for (name, m) in matchings(r) {
        match cover_bound(inst, &oracle, &counts, &m) {
            Ok(cert) => r.holds(
                c,
                format!("|M| ≤ cover bound, {name}"),
                cert.matching <= cert.bound() && cert.non_special == 0,
                format!("{} ≤ {} ({} crossing, {} non-special)", cert.matching, cert.bound(), cert.endpoints.len(), cert.non_special),
            ),
            Err(e) => r.error(c, name, e),
        }
    }
}

fn key(inst: &HardInstance, r: &mut Report) {
    if !inst.params.is_glued() {
        let (checked, bad) = key_violations(inst);
        r.eq(Suite::Key, format!("edges of DownSet(T_*)×(T∖T_*) outside ⋃_k E_{{k,J_k}} (of {checked})"), 0, bad.len());
        return;
    }
    let oracle = WitnessOracle::new(inst);
    let f = special_edges_filter(inst, &oracle, inst.stream());
    r.eq(
        Suite::Key,
        format!("crossing edges of A_P×(Q∖B_Q) not special (scanned {}, crossing {})", f.scanned, f.crossing.len()),
        0,
        f.counterexamples.len(),
    );
}
