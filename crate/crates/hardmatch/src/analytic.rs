use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::cube::Dims;
use crate::gadget::GadgetSpec;
use crate::instance::sample_j;
use crate::params::{alpha_tilde, minimal_layout, LayoutStyle, Mode, ToyParams};
use crate::{Error, Result};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// σ = Σ_{k<K/2} 1/(K−k).
pub fn sigma(k: u32) -> BigRational {
    let dens: Vec<BigInt> = (k / 2 + 1..=k).map(BigInt::from).collect();
    let l = dens.iter().fold(BigInt::one(), |a, d| num_integer::Integer::lcm(&a, d));
    let num: BigInt = dens.iter().map(|d| &l / d).sum();
    BigRational::new(num, l)
}

/// Rational enclosure of a constant: lo ≤ c ≤ hi.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Enclosure {
    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }
}

/// ln 2 = Σ_{k≥1} 1/(k·2^k); the tail after n terms is below 1/((n+1)·2^n).
pub fn ln2_enclosure(terms: u32) -> Enclosure {
    let mut lo = BigRational::zero();
    let mut pow = BigInt::one();
    for k in 1..=terms {
        pow *= 2;
        lo += BigRational::new(BigInt::one(), BigInt::from(k) * &pow);
    }
    let tail = BigRational::new(BigInt::one(), BigInt::from(terms + 1) * &pow);
    Enclosure { hi: &lo + tail, lo }
}

/// e^{−1} = Σ (−1)^k/k!; consecutive partial sums bracket it.
pub fn inv_e_enclosure(terms: u32) -> Enclosure {
    let mut s = BigRational::zero();
    let mut fact = BigInt::one();
    let mut prev = BigRational::zero();
    for k in 0..=terms.max(1) {
        if k > 0 {
            fact *= k;
        }
        prev = s.clone();
        let t = BigRational::new(BigInt::one(), fact.clone());
        if k % 2 == 0 {
            s += t;
        } else {
            s -= t;
        }
    }
    if s < prev {
        Enclosure { lo: s, hi: prev }
    } else {
        Enclosure { lo: prev, hi: s }
    }
}

/// Whether ln 2 − 1/K ≤ σ ≤ ln 2 is certified by the enclosure.
pub fn sigma_enclosed(k: u32, ln2: &Enclosure) -> bool {
    let s = sigma(k);
    s <= ln2.lo && &ln2.hi - q(1, k as i64) <= s
}

/// Exact ratios in units of N = m^n.
#[derive(Clone, Debug)]
pub struct AnalyticRatios {
    pub k: u32,
    pub l: u32,
    pub sigma: BigRational,
    pub gamma: BigRational,
    pub b_p: BigRational,
    pub b_q: BigRational,
    /// (B_P + B_Q)/|P| with |P| = L·N/2.
    pub ratio: BigRational,
}

impl AnalyticRatios {
    /// μ(ℓ, j) = σ^j·γ, per unit N.
    pub fn mu(&self, j: u32) -> BigRational {
        num_traits::pow(self.sigma.clone(), j as usize) * &self.gamma
    }

    /// An upper bound on |ratio − 1/(1+ln 2)| certified by the ln 2 enclosure.
    pub fn gap_to_limit(&self, ln2: &Enclosure) -> BigRational {
        let one = BigRational::one();
        let a = &one / (&one + &ln2.hi);
        let b = &one / (&one + &ln2.lo);
        let da = (&self.ratio - a).abs();
        let db = (&self.ratio - b).abs();
        if da > db {
            da
        } else {
            db
        }
    }
}

/// B_Q = Σ_{even ℓ<L} Σ_{even j≤ℓ} σ^j γ and the mirror over odd ℓ for B_P.
pub fn analytic_ratios(k: u32, l: u32) -> Result<AnalyticRatios> {
    if k < 2 || k % 2 != 0 || l < 2 || l % 2 != 0 {
        return Err(Error::Params(format!("K and L must be even and ≥ 2, got K={k}, L={l}")));
    }
    let s = sigma(k);
    let half = q(1, 2);
    let gamma = &half - &s * &half;
    // Both sides see the partial sums G_0..G_{L/2−1} of Σ σ^{2t}, so B_P = B_Q = γ·Σ_t (L/2 − t)·σ^{2t}.
    let b_q = &gamma * weighted_powers(&(&s * &s), l as u64 / 2);
    let b_p = b_q.clone();
    let ratio = (&b_p + &b_q) / q(l as i64 / 2, 1);
    Ok(AnalyticRatios { k, l, sigma: s, gamma, b_p, b_q, ratio })
}

/// Σ_{t<n} (n − t)·x^t over a single common denominator.
fn weighted_powers(x: &BigRational, n: u64) -> BigRational {
    let (a, b) = (x.numer(), x.denom());
    let mut num = BigInt::zero();
    let mut bpow = BigInt::one();
    for t in (0..n).rev() {
        num = num * a + BigInt::from(n - t) * &bpow;
        bpow *= b;
    }
    BigRational::new(num, bpow / b)
}

/// Truncated decimal expansion.
pub fn decimal(x: &BigRational, digits: usize) -> String {
    let neg = x.is_negative();
    let x = x.abs();
    let int = x.numer() / x.denom();
    let mut rem = x.numer() % x.denom();
    let mut s = format!("{}{}", if neg { "-" } else { "" }, int);
    if digits > 0 {
        s.push('.');
        for _ in 0..digits {
            rem *= 10;
            s.push_str(&(&rem / x.denom()).to_string());
            rem %= x.denom();
        }
    }
    s
}

/// The single α-mode gadget, counted exactly without materializing it.
#[derive(Clone, Debug)]
pub struct AlphaReport {
    pub k: u32,
    pub phases: u32,
    pub n_labels: BigUint,
    pub t_star: BigUint,
    /// (|DownSet_k(T_*)|, |T_*|/(K−k)) per phase.
    pub downsets: Vec<(BigUint, BigUint)>,
    pub s_minus_downset: BigRational,
    pub cover: BigRational,
}

impl AlphaReport {
    pub fn downsets_exact(&self) -> bool {
        self.downsets.iter().all(|(a, b)| a == b)
    }

    /// |S∖DownSet(T_*)|/|T_0| within 2/K of 2α−1, and cover/|T_0| within 3/K of 1−e^{−1}, with α = 1−e^{−1}.
    pub fn within_bounds(&self, inv_e: &Enclosure) -> (bool, bool) {
        let one = BigRational::one();
        let two = q(2, 1);
        let k = q(self.k as i64, 1);
        let first =
            self.s_minus_downset >= &one - &two * &inv_e.hi - &two / &k && self.s_minus_downset <= &one - &two * &inv_e.lo + &two / &k;
        let three = q(3, 1);
        let second = self.cover >= &one - &inv_e.hi - &three / &k && self.cover <= &one - &inv_e.lo + &three / &k;
        (first, second)
    }
}

pub fn alpha_report(k: u32, seed: u64) -> Result<AlphaReport> {
    let phases = alpha_tilde(k);
    let n = phases as usize + 1;
    let p = ToyParams::new(k, 1, n, Mode::Standalone, Some(phases), seed)?;
    let layout = minimal_layout(&p, &[1], LayoutStyle::Uniform)?;
    let j = sample_j(&p, &layout, seed).remove(0);
    let spec = GadgetSpec { ell: 0, j, blocks: layout.gadgets[0].clone(), phases: phases as usize };
    let d = Dims::from(&p);
    let total = p.n_labels();
    let t_star_cs = spec.t_star(&p);
    let t_star = t_star_cs.count(&d)?;
    let mut downsets = Vec::new();
    let mut s = BigUint::zero();
    let mut down = BigUint::zero();
    for kk in 0..phases as usize {
        let ds = spec.downset_system(&p, &t_star_cs, kk)?.count(&d)?;
        downsets.push((ds.clone(), &t_star / BigUint::from(k as u64 - kk as u64)));
        down += ds;
        s += spec.s_k(&p, kk)?.count(&d)?;
    }
    let big = |x: &BigUint| BigInt::from(x.clone());
    let n_int = big(&total);
    let s_minus_downset = BigRational::new(big(&(&s - &down)), n_int.clone());
    let cover = BigRational::new(big(&(&s - &down + &t_star)), n_int);
    Ok(AlphaReport { k, phases, n_labels: total, t_star, downsets, s_minus_downset, cover })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratios_by_layers(k: u32, l: u32) -> (BigRational, BigRational) {
        let s = sigma(k);
        let gamma = (BigRational::one() - &s) / q(2, 1);
        let (mut b_p, mut b_q) = (BigRational::zero(), BigRational::zero());
        for ell in 0..l {
            let mut sum = BigRational::zero();
            for j in (0..=ell).step_by(2) {
                sum += num_traits::pow(s.clone(), j as usize) * &gamma;
            }
            if ell % 2 == 0 {
                b_q += sum;
            } else {
                b_p += sum;
            }
        }
        (b_p, b_q)
    }

    #[test]
    fn closed_form_matches_layer_sums() {
        for k in [2, 4, 6, 10, 16] {
            for l in [2, 4, 6, 12, 20] {
                let r = analytic_ratios(k, l).unwrap();
                assert_eq!((r.b_p.clone(), r.b_q.clone()), ratios_by_layers(k, l), "K={k} L={l}");
            }
        }
    }

    #[test]
    fn k2_l2_by_hand() {
        let r = analytic_ratios(2, 2).unwrap();
        assert_eq!(r.sigma, q(1, 2));
        assert_eq!(r.gamma, q(1, 4));
        assert_eq!(r.ratio, q(1, 2));
        assert_eq!(r.mu(1), q(1, 8));
        assert!(analytic_ratios(3, 2).is_err());
    }

    #[test]
    fn ln2_enclosure_is_tight_and_correct() {
        let e = ln2_enclosure(40);
        assert!(e.lo < q(6932, 10000) && q(6931, 10000) < e.lo);
        assert!(e.width() < q(1, 1_000_000_000_000));
        let f = 2f64.ln();
        let lo: f64 = decimal(&e.lo, 17).parse().unwrap();
        assert!((lo - f).abs() < 1e-13);
    }

    #[test]
    fn inv_e_enclosure_brackets() {
        let e = inv_e_enclosure(20);
        let lo: f64 = decimal(&e.lo, 17).parse().unwrap();
        assert!((lo - (-1f64).exp()).abs() < 1e-15);
        assert!(e.lo < e.hi);
    }

    #[test]
    fn sigma_matches_harmonic_difference() {
        for k in (2..40).step_by(2) {
            let h = |n: u32| (1..=n).map(|i| q(1, i as i64)).fold(BigRational::zero(), |a, b| a + b);
            assert_eq!(sigma(k), h(k) - h(k / 2));
        }
        assert!(sigma_enclosed(2, &ln2_enclosure(60)));
    }

    #[test]
    fn alpha_k10() {
        let r = alpha_report(10, 0).unwrap();
        assert_eq!(r.phases, 6);
        assert!(r.downsets_exact());
        assert_eq!(&r.t_star * 10u32, &r.n_labels * 4u32);
        assert_eq!(r.within_bounds(&inv_e_enclosure(30)), (true, true));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal(&q(1, 3), 4), "0.3333");
        assert_eq!(decimal(&q(-7, 2), 1), "-3.5");
    }
}
