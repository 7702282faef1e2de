//! One line per acceptance criterion. Pass criterion numbers as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hardmatch::analytic::{alpha_report, analytic_ratios, inv_e_enclosure, ln2_enclosure, sigma_enclosed};
use hardmatch::fixtures::{fix_a, fix_a_alpha, fix_b, fix_c, fix_d};
use hardmatch::fvec::{build_family, verify_family, BuildOptions, FamilyViolation};
use hardmatch::harness::{retention_report, sweep, uniform_class_counts, AlgKind, Budget, ExperimentRecord, SweepSpec};
use hardmatch::instance::HardInstance;
use hardmatch::matching::{max_matching, min_vertex_cover};
use hardmatch::predecessor::gamma_probe;
use hardmatch::verify::{verify, Check, Report, Status, Suite, VerifyOptions};
use hardmatch_validation::{brute_force_cover, SmallGraph};
use num_rational::{BigRational, Ratio};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TRIALS: u64 = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

/// Shared between criteria so FIX-B and the FIX-D sweep are built once.
#[derive(Default)]
struct Ctx {
    fix_b: Option<HardInstance>,
    sweep: Option<Vec<ExperimentRecord>>,
}

impl Ctx {
    fn fix_b(&mut self) -> &HardInstance {
        self.fix_b.get_or_insert_with(|| fix_b().instance(0).unwrap())
    }

    fn sweep(&mut self) -> &[ExperimentRecord] {
        self.sweep.get_or_insert_with(|| {
            let spec = SweepSpec {
                config: fix_d().config,
                algs: vec![AlgKind::Greedy, AlgKind::Uniform, AlgKind::Clairvoyant],
                budgets: vec![Budget::TimesP(1.0)],
                trials: TRIALS,
                base_seed: 1000,
            };
            sweep(&spec).unwrap()
        })
    }
}

fn deep() -> VerifyOptions {
    VerifyOptions { deep: true, ..Default::default() }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let x = f();
    (x, t.elapsed())
}

fn checks<'a>(r: &'a Report, pred: impl Fn(&Check) -> bool) -> Vec<&'a Check> {
    r.checks.iter().filter(|c| pred(c)).collect()
}

/// Every selected check passed, and there was at least one.
fn all_pass(cs: &[&Check]) -> bool {
    !cs.is_empty() && cs.iter().all(|c| c.status == Status::Pass)
}

fn first_failure(r: &Report) -> String {
    r.failures().next().map_or(String::new(), |c| format!("; first failure: {} (expected {}, got {})", c.name, c.expected, c.actual))
}

fn c1(ctx: &mut Ctx) -> Outcome {
    let a = fix_a().instance(0).unwrap();
    let (ra, ta) = timed(|| verify(&a, &[Suite::Sizes], &VerifyOptions::default()));
    let b = ctx.fix_b();
    let (rb, tb) = timed(|| verify(b, &[Suite::Sizes], &deep()));
    fn sized<'a>(r: &'a Report, how: &str) -> Vec<&'a Check> {
        checks(r, |c| c.name.contains(how) && (c.name.starts_with("|T^") || c.name.starts_with("|S^")))
    }
    let ok = [&ra, &rb].iter().all(|r| all_pass(&sized(r, "(counting)")) && all_pass(&sized(r, "(enumeration)")) && r.passed());
    let fast = ta < Duration::from_secs(1) && tb < Duration::from_secs(60);
    Outcome::new(
        ok && fast,
        format!(
            "FIX-A {} checks in {ta:.2?}, FIX-B {} checks in {tb:.2?}{}{}",
            ra.checks.len(),
            rb.checks.len(),
            first_failure(&ra),
            first_failure(&rb)
        ),
    )
}

fn c2(ctx: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;
    for (name, inst, scope) in [("FIX-A", &fix_a().instance(0).unwrap(), "all 16 lines"), ("FIX-B", ctx.fix_b(), "sampled 10000 lines")] {
        let r = verify(inst, &[Suite::Lines], &VerifyOptions::default());
        let lp = checks(&r, |c| c.name.starts_with("line properties"));
        let scoped = lp.iter().all(|c| c.name.contains(scope));
        ok &= all_pass(&lp) && scoped;
        out.push(format!("{name}: {} directions, {scope}", lp.len()));
    }
    Outcome::new(ok, out.join("; "))
}

fn c3(ctx: &mut Ctx) -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;
    for (name, inst) in [("FIX-A", &fix_a().instance(0).unwrap()), ("FIX-B", ctx.fix_b())] {
        let r = verify(inst, &[Suite::Lines], &deep());
        let d = checks(&r, |c| c.name.contains("pairwise disjoint") || c.name.contains("repeated (p, q)") || c.name.contains("differ off"));
        ok &= all_pass(&d) && d.iter().all(|c| c.status != Status::Skip);
        out.push(format!(
            "{name}: {} exhaustive checks, shared edges {}",
            d.len(),
            d.iter().map(|c| c.actual.as_str()).collect::<Vec<_>>().join("/")
        ));
    }
    Outcome::new(ok, out.join("; "))
}

fn c4(ctx: &mut Ctx) -> Outcome {
    let b = ctx.fix_b();
    let (r, t) = timed(|| verify(b, &[Suite::Glue], &deep()));
    let half = (b.n_labels() / 2).to_string();
    let image = checks(&r, |c| c.name.contains("bijective: image size"));
    let image_ok = all_pass(&image) && image.iter().all(|c| c.actual == half);
    let dens = checks(&r, |c| c.name.contains("collisions (exhaustive)") || c.name.contains("images outside target"));
    let pi = checks(&r, |c| c.name.contains("rectangle pushforward"));
    let ok = r.passed() && image_ok && all_pass(&dens) && all_pass(&pi) && t < Duration::from_secs(120);
    Outcome::new(ok, format!("τ image {half}, {} checks, {t:.2?}{}", r.checks.len(), first_failure(&r)))
}

fn c5(ctx: &mut Ctx) -> Outcome {
    let a = fix_a_alpha().instance(0).unwrap();
    let ra = verify(&a, &[Suite::Key], &VerifyOptions::default());
    let rb = verify(ctx.fix_b(), &[Suite::Key], &VerifyOptions::default());
    let ok = all_pass(&checks(&ra, |_| true)) && all_pass(&checks(&rb, |_| true));
    Outcome::new(ok, format!("FIX-A α: {}; FIX-B: {}", ra.checks[0].name, rb.checks[0].name))
}

fn c6(_: &mut Ctx) -> Outcome {
    let t = Instant::now();
    let a = fix_a_alpha().instance(0).unwrap();
    let r = verify(&a, &[Suite::Sizes], &VerifyOptions::default());
    let mut ok = all_pass(&checks(&r, |c| c.name.starts_with("|DownSet_")));
    let inv_e = inv_e_enclosure(40);
    let mut out = Vec::new();
    for k in [10, 20, 50] {
        let rep = alpha_report(k, 7).unwrap();
        let (first, second) = rep.within_bounds(&inv_e);
        ok &= rep.downsets_exact() && first && second;
        out.push(format!("K={k}: S∖D {:.4}, cover {:.4}", f(&rep.s_minus_downset), f(&rep.cover)));
    }
    let el = t.elapsed();
    Outcome::new(ok && el < Duration::from_secs(1), format!("{} in {el:.2?}", out.join(", ")))
}

fn f(x: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap()
}

fn c7(_: &mut Ctx) -> Outcome {
    let t = Instant::now();
    let ln2 = ln2_enclosure(60);
    let a = analytic_ratios(200, 200).unwrap();
    let gap = a.gap_to_limit(&ln2);
    let bad: Vec<u32> = (2..=1000).step_by(2).filter(|&k| !sigma_enclosed(k, &ln2)).collect();
    let el = t.elapsed();
    let ok = f(&gap) < 0.02 && bad.is_empty() && el < Duration::from_secs(5);
    Outcome::new(ok, format!("ratio {:.6}, |ratio − 1/(1+ln 2)| ≤ {:.6}, σ outside enclosure for {bad:?}, {el:.2?}", f(&a.ratio), f(&gap)))
}

fn c8(ctx: &mut Ctx) -> Outcome {
    let b = ctx.fix_b();
    let n = b.n_labels();
    let r = verify(b, &[Suite::Predecessor], &deep());
    let mu10 = checks(&r, |c| c.name.starts_with("|μ_{1,0}(T^1"));
    let mu11 = checks(&r, |c| c.name.starts_with("|μ_{1,1}(T^1"));
    let exact = all_pass(&mu10) && all_pass(&mu11) && mu10[0].actual == (n / 4).to_string() && mu11[0].actual == (n / 8).to_string();
    let pw = checks(&r, |c| c.name.contains("piecewise = explicit"));
    let d = fix_d().instance(0).unwrap();
    let probe = gamma_probe(&d, 100_000, 5);
    let probe_ok = !probe.off_gamma.is_empty() && probe.flips == 100_000 && probe.changes == 0;
    let ok = exact && all_pass(&pw) && r.passed() && probe_ok;
    Outcome::new(
        ok,
        format!(
            "|μ_1,0| = {}, |μ_1,1| = {} (N = {n}), {} piecewise/explicit matches, FIX-D probe {} flips on {:?}: {} changes{}",
            mu10[0].actual,
            mu11[0].actual,
            pw.len(),
            probe.flips,
            probe.off_gamma,
            probe.changes,
            first_failure(&r)
        ),
    )
}

fn c9(ctx: &mut Ctx) -> Outcome {
    let recs = ctx.sweep();
    let invalid = recs.iter().filter(|r| !r.valid).count();
    let over_cover = recs.iter().filter(|r| r.m_alg > r.cover_bound).count();
    let over_budget = recs.iter().filter(|r| r.kept > r.budget).count();
    let greedy: Vec<_> = recs.iter().filter(|r| r.alg == "greedy").collect();
    let greedy_bad = greedy.iter().filter(|r| 2 * r.m_alg < r.opt).count();
    let c = fix_c().instance(0).unwrap();
    let s = c.n_p();
    let trials: Vec<_> = (0..TRIALS)
        .map(|t| {
            let inst = fix_c().instance(t).unwrap();
            (false, uniform_class_counts(&inst, s, 77 + t).unwrap())
        })
        .collect();
    let rows = retention_report(&trials);
    let ret_ok = !rows.is_empty() && rows.iter().all(|r| r.within && r.trials as u64 == TRIALS);
    let worst = rows.iter().map(|r| (r.mean - r.bound) / r.std_err.max(1e-12)).fold(f64::NEG_INFINITY, f64::max);
    let ok = invalid == 0 && over_cover == 0 && over_budget == 0 && greedy_bad == 0 && !greedy.is_empty() && ret_ok;
    Outcome::new(
        ok,
        format!(
            "{} FIX-D runs: invalid {invalid}, |M| > cover {over_cover}, over budget {over_budget}, greedy < 1/2 {greedy_bad}; FIX-C retention {} phases over {TRIALS} trials, worst (mean − s/|B̆|)/se = {worst:.2}",
            recs.len(),
            rows.len()
        ),
    )
}

fn c10(ctx: &mut Ctx) -> Outcome {
    let recs = ctx.sweep();
    let mean = |alg: &str| {
        let v: Vec<f64> = recs.iter().filter(|r| r.alg == alg).map(|r| r.ratio).collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (cv, nc) = mean("clairvoyant");
    let (un, nu) = mean("uniform");
    let ok = nc as u64 >= TRIALS && nu as u64 >= TRIALS && cv - un >= 0.05;
    Outcome::new(ok, format!("FIX-D, s = |P|: clairvoyant {cv:.4} vs uniform {un:.4} over {nc} trials, gap {:.4} (need ≥ 0.05)", cv - un))
}

fn c11(_: &mut Ctx) -> Outcome {
    let t = Instant::now();
    let fam = build_family(&BuildOptions { n: 64, eps: Ratio::new(1, 2), target: 16, seed: 11, max_retries: 1000, cap_c: None }).unwrap();
    let valid = verify_family(&fam).is_ok() && fam.vectors.len() == 16 && fam.w == 16;
    let max_dot = (0..16)
        .flat_map(|i| (i + 1..16).map(move |j| (i, j)))
        .map(|(i, j)| fam.vectors[i].iter().filter(|x| fam.vectors[j].contains(x)).count())
        .max()
        .unwrap();
    let mut planted = fam.clone();
    planted.vectors[5] = planted.vectors[2].clone();
    let rejected = matches!(verify_family(&planted), Err(FamilyViolation::Pair { .. }));
    let el = t.elapsed();
    let ok = valid && max_dot < 8 && rejected && el < Duration::from_secs(10);
    Outcome::new(ok, format!("16 vectors, max dot {max_dot} < 8, planted duplicate rejected: {rejected}, {el:.2?}"))
}

fn c12(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut size_bad, mut konig_bad, mut cover_bad) = (0, 0, 0);
    for _ in 0..1000 {
        let g = SmallGraph::random(&mut rng, 20);
        let bg = g.graph();
        let m = max_matching(&bg);
        let expected = g.brute_force();
        size_bad += usize::from(m.size() != expected);
        match min_vertex_cover(&bg, &m) {
            Ok(c) => {
                konig_bad += usize::from(c.size() != m.size() || !c.covers_all(&bg));
                cover_bad += usize::from(c.size() != brute_force_cover(&g));
            }
            Err(_) => konig_bad += 1,
        }
    }
    Outcome::new(
        size_bad + konig_bad + cover_bad == 0,
        format!("1000 graphs: size mismatches {size_bad}, König mismatches {konig_bad}, cover not minimum {cover_bad}"),
    )
}

fn main() {
    let all: [(u32, &str, fn(&mut Ctx) -> Outcome); 12] = [
        (1, "exact size identities", c1),
        (2, "per-line identities", c2),
        (3, "edge-set disjointness", c3),
        (4, "glue correctness", c4),
        (5, "key structural property", c5),
        (6, "single-gadget arithmetic", c6),
        (7, "analytic limit", c7),
        (8, "predecessor cross-check", c8),
        (9, "harness soundness", c9),
        (10, "experiment gap", c10),
        (11, "F-family", c11),
        (12, "solver oracle equivalence", c12),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut ctx = Ctx::default();
    let mut failed = Vec::new();
    for (id, name, run) in all {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| run(&mut ctx))).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}: {name} | {} | {:.1?}", out.detail, t.elapsed());
        if !out.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
