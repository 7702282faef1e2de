use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Constant-weight binary vectors on [n] with one support element per block, stored as sorted supports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FVectorFamily {
    pub n: usize,
    pub eps_num: u64,
    pub eps_den: u64,
    pub w: usize,
    pub blocks: Vec<Vec<usize>>,
    pub vectors: Vec<Vec<usize>>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilyViolation {
    Structural { index: usize, reason: String },
    Pair { a: usize, b: usize, dot: usize },
}

impl std::fmt::Display for FamilyViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyViolation::Structural { index, reason } => write!(f, "vector {index}: {reason}"),
            FamilyViolation::Pair { a, b, dot } => write!(f, "vectors {a} and {b} have ⟨u,v⟩ = {dot} ≥ εw"),
        }
    }
}

/// w = (ε/2)·n, which must be a positive integer dividing n.
pub fn weight_for(n: usize, eps: Ratio<u64>) -> Result<usize> {
    let w = eps * Ratio::from_integer(n as u64) / Ratio::from_integer(2);
    if *eps.numer() == 0 || !w.is_integer() || w.to_integer() == 0 {
        return Err(Error::Family(format!("(ε/2)·n = {w} is not a positive integer")));
    }
    let w = w.to_integer() as usize;
    if n % w != 0 {
        return Err(Error::Family(format!("w = {w} ∤ n = {n}")));
    }
    Ok(w)
}

fn dot(u: &[usize], v: &[usize]) -> usize {
    u.iter().zip(v).filter(|(a, b)| a == b).count()
}

impl FVectorFamily {
    pub fn eps(&self) -> Ratio<u64> {
        Ratio::new(self.eps_num, self.eps_den)
    }

    /// ⟨u,v⟩ < εw, in exact arithmetic.
    pub fn dot_ok(&self, d: usize) -> bool {
        (d as u64) * self.eps_den < self.eps_num * self.w as u64
    }

    fn violating_pairs(&self) -> Vec<(usize, usize)> {
        let v = &self.vectors;
        (0..v.len())
            .into_par_iter()
            .flat_map_iter(|a| (a + 1..v.len()).filter(move |&b| !self.dot_ok(dot(&v[a], &v[b]))).map(move |b| (a, b)))
            .collect()
    }
}

/// Structure (one element per block) and every pairwise product, O(|F|²·w).
pub fn verify_family(f: &FVectorFamily) -> std::result::Result<(), FamilyViolation> {
    for (i, v) in f.vectors.iter().enumerate() {
        if v.len() != f.w {
            return Err(FamilyViolation::Structural { index: i, reason: format!("weight {} ≠ {}", v.len(), f.w) });
        }
        for (s, (&x, block)) in v.iter().zip(&f.blocks).enumerate() {
            if !block.contains(&x) {
                return Err(FamilyViolation::Structural { index: i, reason: format!("block {s} has no support element") });
            }
        }
    }
    match f.violating_pairs().first() {
        Some(&(a, b)) => Err(FamilyViolation::Pair { a, b, dot: dot(&f.vectors[a], &f.vectors[b]) }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub n: usize,
    pub eps: Ratio<u64>,
    pub target: usize,
    pub seed: u64,
    pub max_retries: u32,
    /// Refuse targets above 2^{c·ε²·n} when set.
    pub cap_c: Option<f64>,
}

fn draw(rng: &mut ChaCha8Rng, blocks: &[Vec<usize>]) -> Vec<usize> {
    blocks.iter().map(|b| b[rng.gen_range(0..b.len())]).collect()
}

/// Random picks per block, then repeated resampling of one vector from every offending pair.
pub fn build_family(o: &BuildOptions) -> Result<FVectorFamily> {
    let w = weight_for(o.n, o.eps)?;
    if let Some(c) = o.cap_c {
        let e = *o.eps.numer() as f64 / *o.eps.denom() as f64;
        let cap = (c * e * e * o.n as f64).exp2();
        if o.target as f64 > cap {
            return Err(Error::Family(format!("target {} exceeds 2^(c·ε²·n) = {cap:.1}", o.target)));
        }
    }
    let size = o.n / w;
    let blocks: Vec<Vec<usize>> = (0..w).map(|s| (s * size..(s + 1) * size).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let vectors = (0..o.target).map(|_| draw(&mut rng, &blocks)).collect();
    let mut f = FVectorFamily { n: o.n, eps_num: *o.eps.numer(), eps_den: *o.eps.denom(), w, blocks, vectors, seed: o.seed };
    for _ in 0..=o.max_retries {
        let bad = f.violating_pairs();
        if bad.is_empty() {
            return Ok(f);
        }
        let mut redo: Vec<usize> = bad.iter().map(|&(_, b)| b).collect();
        redo.sort_unstable();
        redo.dedup();
        for i in redo {
            f.vectors[i] = draw(&mut rng, &f.blocks);
        }
    }
    let mut kept: Vec<&Vec<usize>> = Vec::new();
    for v in &f.vectors {
        if kept.iter().all(|u| f.dot_ok(dot(u, v))) {
            kept.push(v);
        }
    }
    Err(Error::Family(format!("retries exhausted; achieved size {} of {}", kept.len(), o.target)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(n: usize, eps: Ratio<u64>, vectors: Vec<Vec<usize>>) -> FVectorFamily {
        let w = weight_for(n, eps).unwrap();
        let size = n / w;
        FVectorFamily {
            n,
            eps_num: *eps.numer(),
            eps_den: *eps.denom(),
            w,
            blocks: (0..w).map(|s| (s * size..(s + 1) * size).collect()).collect(),
            vectors,
            seed: 0,
        }
    }

    #[test]
    fn hand_example() {
        let f = fam(4, Ratio::from_integer(1), vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(f.w, 2);
        assert!(verify_family(&f).is_ok());
        assert!(verify_family(&fam(4, Ratio::from_integer(1), vec![vec![0, 2]])).is_ok());
    }

    #[test]
    fn rejections() {
        let one = Ratio::from_integer(1);
        assert!(matches!(verify_family(&fam(4, one, vec![vec![0, 2], vec![0, 2]])), Err(FamilyViolation::Pair { .. })));
        assert!(matches!(verify_family(&fam(4, one, vec![vec![0, 1]])), Err(FamilyViolation::Structural { .. })));
        assert!(weight_for(5, one).is_err());
    }

    #[test]
    fn n64_half() {
        let o = BuildOptions { n: 64, eps: Ratio::new(1, 2), target: 16, seed: 1, max_retries: 100, cap_c: None };
        let f = build_family(&o).unwrap();
        assert_eq!((f.w, f.blocks[0].len(), f.vectors.len()), (16, 4, 16));
        assert!(verify_family(&f).is_ok());
        for a in 0..16 {
            for b in a + 1..16 {
                assert!(dot(&f.vectors[a], &f.vectors[b]) < 8);
            }
        }
        assert_eq!(build_family(&o).unwrap(), f);
    }

    #[test]
    fn exhausted_retries_report_size() {
        let o = BuildOptions { n: 4, eps: Ratio::from_integer(1), target: 10, seed: 0, max_retries: 3, cap_c: None };
        let e = build_family(&o).unwrap_err().to_string();
        assert!(e.contains("achieved size"), "{e}");
    }

    #[test]
    fn mean_intersection_is_w_squared_over_n() {
        // Per block a match has probability 1/size, so ⟨u,v⟩ ~ Bin(w, w/n).
        let (n, w) = (64usize, 16usize);
        let p = w as f64 / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let o = BuildOptions { n, eps: Ratio::new(1, 2), target: 2, seed: 0, max_retries: 0, cap_c: None };
        let blocks = fam(n, o.eps, vec![]).blocks;
        let trials = 200;
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += dot(&draw(&mut rng, &blocks), &draw(&mut rng, &blocks)) as f64;
        }
        let mean = sum / trials as f64;
        let sd = (w as f64 * p * (1.0 - p) / trials as f64).sqrt();
        assert!((mean - (w * w) as f64 / n as f64).abs() < 3.0 * sd, "mean {mean}");
    }
}
