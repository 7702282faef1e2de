//! Exhaustive reference answers for small inputs.

use hardmatch::matching::BipartiteGraph;
use rand::Rng;

/// Maximum matching size by memoized search over used right vertices.
pub fn brute_force_matching(n_left: usize, n_right: usize, adj: &[Vec<usize>]) -> usize {
    assert!(n_right <= 20);
    let mut memo = vec![vec![u8::MAX; 1 << n_right]; n_left + 1];
    fn go(i: usize, mask: usize, n_left: usize, adj: &[Vec<usize>], memo: &mut [Vec<u8>]) -> u8 {
        if i == n_left {
            return 0;
        }
        if memo[i][mask] != u8::MAX {
            return memo[i][mask];
        }
        let mut best = go(i + 1, mask, n_left, adj, memo);
        for &r in &adj[i] {
            if mask & (1 << r) == 0 {
                best = best.max(1 + go(i + 1, mask | (1 << r), n_left, adj, memo));
            }
        }
        memo[i][mask] = best;
        best
    }
    go(0, 0, n_left, adj, &mut memo) as usize
}

pub struct SmallGraph {
    pub n_left: usize,
    pub n_right: usize,
    pub edges: Vec<(u32, u32)>,
}

impl SmallGraph {
    /// At most `max_vertices` vertices in total, random sides and density.
    pub fn random(rng: &mut impl Rng, max_vertices: usize) -> Self {
        let n_left = rng.gen_range(0..=max_vertices / 2);
        let n_right = rng.gen_range(0..=max_vertices - n_left).min(max_vertices / 2 + 2);
        let p: f64 = rng.gen_range(0.0..1.0);
        let mut edges = Vec::new();
        for l in 0..n_left {
            for r in 0..n_right {
                if rng.gen_bool(p) {
                    edges.push((l as u32, r as u32));
                }
            }
        }
        SmallGraph { n_left, n_right, edges }
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_left];
        for &(l, r) in &self.edges {
            adj[l as usize].push(r as usize);
        }
        adj
    }

    pub fn graph(&self) -> BipartiteGraph {
        BipartiteGraph::new(self.n_left as u32, self.n_right as u32, self.edges.iter().copied()).unwrap()
    }

    pub fn brute_force(&self) -> usize {
        brute_force_matching(self.n_left, self.n_right, &self.adjacency())
    }
}

/// Smallest vertex cover by exhaustive subset search.
pub fn brute_force_cover(g: &SmallGraph) -> usize {
    let n = g.n_left + g.n_right;
    (0u32..1 << n)
        .filter(|s| g.edges.iter().all(|&(l, r)| s & (1 << l) != 0 || s & (1 << (g.n_left as u32 + r)) != 0))
        .map(|s| s.count_ones() as usize)
        .min()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n_left: usize, n_right: usize, edges: &[(u32, u32)]) -> SmallGraph {
        SmallGraph { n_left, n_right, edges: edges.to_vec() }
    }

    #[test]
    fn hand_checked_graphs() {
        let k33: Vec<(u32, u32)> = (0..3).flat_map(|l| (0..3).map(move |r| (l, r))).collect();
        assert_eq!(g(3, 3, &k33).brute_force(), 3);
        assert_eq!(brute_force_cover(&g(3, 3, &k33)), 3);
        let star = g(3, 1, &[(0, 0), (1, 0), (2, 0)]);
        assert_eq!(star.brute_force(), 1);
        assert_eq!(brute_force_cover(&star), 1);
        let path = g(2, 2, &[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(path.brute_force(), 2);
        assert_eq!(g(0, 5, &[]).brute_force(), 0);
        assert_eq!(brute_force_cover(&g(2, 2, &[])), 0);
    }

    #[test]
    fn random_graphs_stay_small() {
        let mut rng = rand::rngs::mock::StepRng::new(7, 0x9e37_79b9_7f4a_7c15);
        for _ in 0..200 {
            let s = SmallGraph::random(&mut rng, 20);
            assert!(s.n_left + s.n_right <= 20);
            assert!(s.edges.iter().all(|&(l, r)| (l as usize) < s.n_left && (r as usize) < s.n_right));
        }
    }
}
