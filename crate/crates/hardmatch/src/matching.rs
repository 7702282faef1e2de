use std::collections::VecDeque;
use std::io::BufRead;

use crate::{Error, Result};

pub const NIL: u32 = u32::MAX;

/// Left ids in 0..n_left, right ids in 0..n_right, adjacency sorted by id.
#[derive(Clone, Debug)]
pub struct BipartiteGraph {
    n_left: u32,
    n_right: u32,
    off: Vec<usize>,
    adj: Vec<u32>,
}

impl BipartiteGraph {
    pub fn new(n_left: u32, n_right: u32, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let edges: Vec<(u32, u32)> = edges.into_iter().collect();
        let mut deg = vec![0usize; n_left as usize + 1];
        for &(l, r) in &edges {
            if l >= n_left || r >= n_right {
                return Err(Error::Matching(format!("edge ({l}, {r}) outside {n_left}×{n_right}")));
            }
            deg[l as usize + 1] += 1;
        }
        for i in 0..n_left as usize {
            deg[i + 1] += deg[i];
        }
        let off = deg;
        let mut fill = off.clone();
        let mut adj = vec![0u32; edges.len()];
        for &(l, r) in &edges {
            adj[fill[l as usize]] = r;
            fill[l as usize] += 1;
        }
        drop(edges);
        for l in 0..n_left as usize {
            let row = &mut adj[off[l]..off[l + 1]];
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Matching(format!("duplicate edge ({l}, {})", w[0])));
            }
        }
        Ok(BipartiteGraph { n_left, n_right, off, adj })
    }

    pub fn n_left(&self) -> u32 {
        self.n_left
    }

    pub fn n_right(&self) -> u32 {
        self.n_right
    }

    pub fn n_edges(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, l: u32) -> &[u32] {
        &self.adj[self.off[l as usize]..self.off[l as usize + 1]]
    }

    pub fn has_edge(&self, l: u32, r: u32) -> bool {
        l < self.n_left && self.neighbors(l).binary_search(&r).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_left).flat_map(move |l| self.neighbors(l).iter().map(move |&r| (l, r)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub mate_left: Vec<u32>,
    pub mate_right: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateVertex { left: bool, id: u32 },
    ForeignEdge(u32, u32),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DuplicateVertex { left, id } => {
                write!(f, "{} vertex {id} is matched twice", if *left { "left" } else { "right" })
            }
            Violation::ForeignEdge(l, r) => write!(f, "edge ({l}, {r}) is not in the graph"),
        }
    }
}

impl Matching {
    pub fn empty(n_left: u32, n_right: u32) -> Self {
        Matching { mate_left: vec![NIL; n_left as usize], mate_right: vec![NIL; n_right as usize] }
    }

    pub fn size(&self) -> usize {
        self.mate_left.iter().filter(|&&r| r != NIL).count()
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.mate_left.iter().enumerate().filter(|(_, &r)| r != NIL).map(|(l, &r)| (l as u32, r)).collect()
    }
}

/// Every edge present in `g` and no vertex used twice.
pub fn validate_matching(g: &BipartiteGraph, edges: &[(u32, u32)]) -> std::result::Result<Matching, Violation> {
    let mut m = Matching::empty(g.n_left, g.n_right);
    for &(l, r) in edges {
        if !g.has_edge(l, r) {
            return Err(Violation::ForeignEdge(l, r));
        }
        if m.mate_left[l as usize] != NIL {
            return Err(Violation::DuplicateVertex { left: true, id: l });
        }
        if m.mate_right[r as usize] != NIL {
            return Err(Violation::DuplicateVertex { left: false, id: r });
        }
        m.mate_left[l as usize] = r;
        m.mate_right[r as usize] = l;
    }
    Ok(m)
}

const INF: u32 = u32::MAX;

/// Hopcroft–Karp with an iterative DFS. Deterministic for a given graph.
pub fn max_matching(g: &BipartiteGraph) -> Matching {
    let n = g.n_left as usize;
    let mut m = Matching::empty(g.n_left, g.n_right);
    for l in 0..g.n_left {
        if let Some(&r) = g.neighbors(l).iter().find(|&&r| m.mate_right[r as usize] == NIL) {
            m.mate_left[l as usize] = r;
            m.mate_right[r as usize] = l;
        }
    }
    let mut dist = vec![INF; n];
    let mut it = vec![0usize; n];
    let mut queue = VecDeque::new();
    let mut stack: Vec<u32> = Vec::new();
    loop {
        queue.clear();
        for l in 0..n {
            if m.mate_left[l] == NIL {
                dist[l] = 0;
                queue.push_back(l as u32);
            } else {
                dist[l] = INF;
            }
        }
        let mut dist_free = INF;
        while let Some(v) = queue.pop_front() {
            let dv = dist[v as usize];
            if dv >= dist_free {
                continue;
            }
            for &w in g.neighbors(v) {
                let u = m.mate_right[w as usize];
                if u == NIL {
                    if dist_free == INF {
                        dist_free = dv + 1;
                    }
                } else if dist[u as usize] == INF {
                    dist[u as usize] = dv + 1;
                    queue.push_back(u);
                }
            }
        }
        if dist_free == INF {
            return m;
        }
        for l in 0..n {
            it[l] = g.off[l];
        }
        for root in 0..n as u32 {
            if m.mate_left[root as usize] != NIL || dist[root as usize] != 0 {
                continue;
            }
            stack.clear();
            stack.push(root);
            let mut found = false;
            while let Some(&v) = stack.last() {
                let vi = v as usize;
                if it[vi] == g.off[vi + 1] {
                    dist[vi] = INF;
                    stack.pop();
                    continue;
                }
                let w = g.adj[it[vi]];
                let u = m.mate_right[w as usize];
                if u == NIL {
                    if dist_free == dist[vi] + 1 {
                        found = true;
                        break;
                    }
                    it[vi] += 1;
                } else if dist[u as usize] == dist[vi] + 1 {
                    stack.push(u);
                } else {
                    it[vi] += 1;
                }
            }
            if found {
                for &v in &stack {
                    let w = g.adj[it[v as usize]];
                    m.mate_left[v as usize] = w;
                    m.mate_right[w as usize] = v;
                    it[v as usize] += 1;
                    dist[v as usize] = INF;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct VertexCover {
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

impl VertexCover {
    pub fn size(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn covers_all(&self, g: &BipartiteGraph) -> bool {
        let mut l = vec![false; g.n_left as usize];
        let mut r = vec![false; g.n_right as usize];
        self.left.iter().for_each(|&x| l[x as usize] = true);
        self.right.iter().for_each(|&x| r[x as usize] = true);
        g.edges().all(|(a, b)| l[a as usize] || r[b as usize])
    }
}

/// König: Z = vertices alternating-reachable from free left vertices; cover (L∖Z) ∪ (R∩Z).
pub fn min_vertex_cover(g: &BipartiteGraph, m: &Matching) -> Result<VertexCover> {
    let mut zl = vec![false; g.n_left as usize];
    let mut zr = vec![false; g.n_right as usize];
    let mut queue: VecDeque<u32> = (0..g.n_left).filter(|&l| m.mate_left[l as usize] == NIL).collect();
    for &l in &queue {
        zl[l as usize] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if zr[w as usize] || m.mate_left[v as usize] == w {
                continue;
            }
            zr[w as usize] = true;
            let u = m.mate_right[w as usize];
            if u == NIL {
                return Err(Error::Matching(format!("matching is not maximum: augmenting path ends at right vertex {w}")));
            }
            if !zl[u as usize] {
                zl[u as usize] = true;
                queue.push_back(u);
            }
        }
    }
    Ok(VertexCover {
        left: (0..g.n_left).filter(|&l| !zl[l as usize]).collect(),
        right: (0..g.n_right).filter(|&r| zr[r as usize]).collect(),
    })
}

/// Optional (ℓ, k, j) carried on each `e` line.
pub type Provenance = Option<(u32, u32, i64)>;

/// Reads `p bipartite <L> <R> <E>` followed by `e <l> <r> [ℓ k j]` lines. `c` and `v` lines are skipped.
pub fn read_edge_text(input: impl BufRead) -> Result<(BipartiteGraph, Vec<Provenance>)> {
    let mut header: Option<(u32, u32, usize)> = None;
    let mut edges = Vec::new();
    let mut prov = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        let mut f = line.split_whitespace();
        let bad = |what: &str| Error::Format(format!("line {}: {what}", no + 1));
        match f.next() {
            None | Some("c") | Some("v") => {}
            Some("p") => {
                if f.next() != Some("bipartite") {
                    return Err(bad("expected `p bipartite`"));
                }
                let mut num = || f.next().and_then(|x| x.parse::<u64>().ok()).ok_or_else(|| bad("bad header"));
                let (l, r, e) = (num()?, num()?, num()?);
                if l > u32::MAX as u64 || r > u32::MAX as u64 {
                    return Err(bad("vertex count exceeds 32-bit ids"));
                }
                header = Some((l as u32, r as u32, e as usize));
                edges.reserve(e as usize);
            }
            Some("e") => {
                if header.is_none() {
                    return Err(bad("edge before header"));
                }
                let v: Vec<&str> = f.collect();
                let id = |s: &str| s.parse::<u32>().map_err(|_| bad("bad vertex id"));
                match v.len() {
                    2 => prov.push(None),
                    5 => {
                        let a = v[2].parse().map_err(|_| bad("bad ℓ"))?;
                        let b = v[3].parse().map_err(|_| bad("bad k"))?;
                        let c = v[4].parse().map_err(|_| bad("bad j"))?;
                        prov.push(Some((a, b, c)));
                    }
                    _ => return Err(bad("expected `e <l> <r>` or `e <l> <r> <ℓ> <k> <j>`")),
                }
                edges.push((id(v[0])?, id(v[1])?));
            }
            Some(t) => return Err(bad(&format!("unknown record `{t}`"))),
        }
    }
    let (l, r, e) = header.ok_or_else(|| Error::Format("missing header".into()))?;
    if edges.len() != e {
        return Err(Error::Format(format!("header declares {e} edges, found {}", edges.len())));
    }
    Ok((BipartiteGraph::new(l, r, edges)?, prov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kuhn(g: &BipartiteGraph) -> usize {
        fn go(g: &BipartiteGraph, v: u32, seen: &mut [bool], mr: &mut [u32]) -> bool {
            for &w in g.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    if mr[w as usize] == NIL || go(g, mr[w as usize], seen, mr) {
                        mr[w as usize] = v;
                        return true;
                    }
                }
            }
            false
        }
        let mut mr = vec![NIL; g.n_right() as usize];
        (0..g.n_left()).filter(|&v| go(g, v, &mut vec![false; g.n_right() as usize], &mut mr)).count()
    }

    #[test]
    fn small_graphs() {
        let g = BipartiteGraph::new(1, 1, [(0, 0)]).unwrap();
        assert_eq!(max_matching(&g).size(), 1);
        let k33 = BipartiteGraph::new(3, 3, (0..3).flat_map(|a| (0..3).map(move |b| (a, b)))).unwrap();
        assert_eq!(max_matching(&k33).size(), 3);
        let path = BipartiteGraph::new(2, 2, [(0, 0), (1, 0), (1, 1)]).unwrap();
        let m = max_matching(&path);
        let c = min_vertex_cover(&path, &m).unwrap();
        assert_eq!(c.size(), 2);
        assert!(c.covers_all(&path));
        let empty = BipartiteGraph::new(3, 2, []).unwrap();
        let c = min_vertex_cover(&empty, &max_matching(&empty)).unwrap();
        assert_eq!(c.size(), 0);
    }

    #[test]
    fn bad_graphs_rejected() {
        assert!(BipartiteGraph::new(2, 2, [(0, 1), (0, 1)]).is_err());
        assert!(BipartiteGraph::new(2, 2, [(2, 0)]).is_err());
    }

    #[test]
    fn validation() {
        let g = BipartiteGraph::new(2, 2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        assert!(validate_matching(&g, &[(0, 0), (1, 1)]).is_ok());
        assert_eq!(validate_matching(&g, &[(0, 0), (0, 1)]), Err(Violation::DuplicateVertex { left: true, id: 0 }));
        assert_eq!(validate_matching(&g, &[(1, 0)]), Err(Violation::ForeignEdge(1, 0)));
    }

    #[test]
    fn non_maximum_matching_detected() {
        let g = BipartiteGraph::new(2, 2, [(0, 0), (1, 0), (1, 1)]).unwrap();
        let m = validate_matching(&g, &[(1, 0)]).unwrap();
        assert!(min_vertex_cover(&g, &m).is_err());
    }

    #[test]
    fn edge_text_round_trip() {
        let txt = "c x\np bipartite 2 3 2\ne 0 2 1 0 -1\ne 1 0\n";
        let (g, prov) = read_edge_text(txt.as_bytes()).unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(prov, vec![Some((1, 0, -1)), None]);
        assert!(read_edge_text("p bipartite 1 1 2\ne 0 0\n".as_bytes()).is_err());
        assert!(read_edge_text("e 0 0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn hk_matches_kuhn_and_konig((nl, nr, edges) in (1u32..26, 1u32..26).prop_flat_map(|(a, b)| {
            (Just(a), Just(b), proptest::collection::btree_set((0..a, 0..b), 0..120))
        })) {
            let g = BipartiteGraph::new(nl, nr, edges).unwrap();
            let m = max_matching(&g);
            prop_assert!(validate_matching(&g, &m.edges()).is_ok());
            prop_assert_eq!(m.size(), kuhn(&g));
            let c = min_vertex_cover(&g, &m).unwrap();
            prop_assert_eq!(c.size(), m.size());
            prop_assert!(c.covers_all(&g));
        }
    }
}
