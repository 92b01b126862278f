//! Planted clique instances and the index maps used by the reduction.
//!
//! Vertices are 0-based. With `n2 = n / 2`, the reduction reads the block
//! `A0 = A[n2.., ..n2]`; a clique `V` splits into `V1 = {v - n2 : v >= n2}`
//! (rows of `A0`) and `V2 = {v < n2}` (columns), and `fold(x, p) = x mod p`
//! maps `0..n2` onto `0..p`.

use std::io::{BufRead, Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Dense 0/1 matrix with packed rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix { rows, cols, words_per_row, data: vec![0; rows * words_per_row] }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, true);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        (self.data[i * self.words_per_row + j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let w = &mut self.data[i * self.words_per_row + j / 64];
        if v {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.data[i * self.words_per_row..(i + 1) * self.words_per_row]
    }
}

/// Symmetric graph adjacency with zero diagonal and an optional planted set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    bits: BitMatrix,
    planted: Option<Vec<usize>>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix { bits: BitMatrix::zeros(n, n), planted: None }
    }

    pub fn n(&self) -> usize {
        self.bits.rows()
    }

    pub fn planted(&self) -> Option<&[usize]> {
        self.planted.as_deref()
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.bits.get(i, j)
    }

    /// Adds or removes the undirected edge `{i, j}`; self-loops are ignored.
    pub fn set_edge(&mut self, i: usize, j: usize, v: bool) {
        if i != j {
            self.bits.set(i, j, v);
            self.bits.set(j, i, v);
        }
    }

    pub fn edge_count(&self) -> u64 {
        self.bits.count_ones() / 2
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| !self.edge(i, i) && (i + 1..n).all(|j| self.edge(i, j) == self.edge(j, i)))
    }

    /// Connects every pair in `vertices` and records them as planted.
    pub fn plant(&mut self, vertices: &[usize]) -> Result<()> {
        let n = self.n();
        if let Some(&v) = vertices.iter().find(|&&v| v >= n) {
            return Err(Error::IndexOutOfRange { index: v, dim: n });
        }
        for (a, &u) in vertices.iter().enumerate() {
            for &v in &vertices[a + 1..] {
                self.set_edge(u, v, true);
            }
        }
        let mut v = vertices.to_vec();
        v.sort_unstable();
        v.dedup();
        self.planted = Some(v);
        Ok(())
    }

    /// `A0 = A[n2.., ..n2]`, the block the reduction consumes.
    pub fn lower_left_quarter(&self) -> Result<BitMatrix> {
        let n = self.n();
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("graph size {n} must be even")));
        }
        let n2 = n / 2;
        let mut q = BitMatrix::zeros(n2, n2);
        for i in 0..n2 {
            for j in 0..n2 {
                if self.edge(n2 + i, j) {
                    q.set(i, j, true);
                }
            }
        }
        Ok(q)
    }
}

/// `G(n, 1/2)`: the edge `{i, j}`, `i < j`, is the bit drawn from the row
/// stream of `i` at position `j`.
pub fn sample_er(n: usize, key: StreamKey) -> AdjacencyMatrix {
    let mut g = AdjacencyMatrix::empty(n);
    for i in 0..n {
        let mut rng = key.child(0xE0).child(i as u64).rng();
        let mut word = 0u64;
        for j in (i + 1)..n {
            let off = (j - i - 1) % 64;
            if off == 0 {
                word = rng.gen();
            }
            if (word >> off) & 1 == 1 {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Uniform `kappa`-subset of `0..n` by partial Fisher-Yates, sorted.
pub fn sample_clique_vertices(n: usize, kappa: usize, key: StreamKey) -> Result<Vec<usize>> {
    if kappa > n {
        return Err(Error::InvalidParameter(format!("clique size {kappa} exceeds graph size {n}")));
    }
    let mut rng = key.child(0xC1).rng();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..kappa {
        let j = rng.gen_range(i..n);
        perm.swap(i, j);
    }
    let mut v = perm[..kappa].to_vec();
    v.sort_unstable();
    Ok(v)
}

/// `G(n, 1/2, kappa)`: the graph of [`sample_er`] with the same key plus a
/// uniformly placed clique.
pub fn sample_planted(n: usize, kappa: usize, key: StreamKey) -> Result<AdjacencyMatrix> {
    if kappa == 0 {
        return Err(Error::InvalidParameter("clique size must be at least 1".into()));
    }
    let v = sample_clique_vertices(n, kappa, key)?;
    let mut g = sample_er(n, key);
    g.plant(&v)?;
    Ok(g)
}

/// `(V1, V2)` for a clique `vertices` in a graph on `n` vertices.
pub fn split_clique(vertices: &[usize], n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("graph size {n} must be even")));
    }
    let n2 = n / 2;
    let mut v1: Vec<usize> = vertices.iter().filter(|&&v| v >= n2).map(|&v| v - n2).collect();
    let mut v2: Vec<usize> = vertices.iter().filter(|&&v| v < n2).copied().collect();
    v1.sort_unstable();
    v2.sort_unstable();
    Ok((v1, v2))
}

#[inline]
pub fn fold(x: usize, p: usize) -> usize {
    x % p
}

/// Sorted image of `set` under [`fold`].
pub fn fold_set(set: &[usize], p: usize) -> Vec<usize> {
    let mut u: Vec<usize> = set.iter().map(|&x| fold(x, p)).collect();
    u.sort_unstable();
    u.dedup();
    u
}

pub fn image_supports(v1: &[usize], v2: &[usize], p: usize) -> (Vec<usize>, Vec<usize>) {
    (fold_set(v1, p), fold_set(v2, p))
}

/// `|U1| >= k` and `|U2| >= k`.
pub fn event_e(u1: &[usize], u2: &[usize], k: usize) -> bool {
    u1.len() >= k && u2.len() >= k
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldReport {
    pub v1: Vec<usize>,
    pub v2: Vec<usize>,
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    pub event_e: bool,
}

pub fn fold_report(vertices: &[usize], n: usize, p: usize, k: usize) -> Result<FoldReport> {
    let (v1, v2) = split_clique(vertices, n)?;
    let (u1, u2) = image_supports(&v1, &v2, p);
    let e = event_e(&u1, &u2, k);
    Ok(FoldReport { v1, v2, u1, u2, event_e: e })
}

/// Pairs of `fold^-1(a) x fold^-1(b)` outside and inside `V1 x V2`.
pub fn block_sets(v1: &[usize], v2: &[usize], p: usize, ell: usize, a: usize, b: usize) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut outside = Vec::new();
    let mut inside = Vec::new();
    for i in (0..ell).map(|r| r * p + a) {
        for j in (0..ell).map(|r| r * p + b) {
            if v1.binary_search(&i).is_ok() && v2.binary_search(&j).is_ok() {
                inside.push((i, j));
            } else {
                outside.push((i, j));
            }
        }
    }
    (outside, inside)
}

/// `40k (e/4)^(5k) + 2k exp(-4k log(p / 20k))`.
pub fn event_e_failure_bound(k: usize, p: usize) -> f64 {
    let kf = k as f64;
    40.0 * kf * (std::f64::consts::E / 4.0).powf(5.0 * kf) + 2.0 * kf * (-4.0 * kf * (p as f64 / (20.0 * kf)).ln()).exp()
}

/// Edge-list text: header `n` or `n kappa`, an optional `# planted ...`
/// line, then one `i j` line per edge with `i < j`.
pub fn write_edge_list(g: &AdjacencyMatrix, w: &mut impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    match g.planted() {
        Some(v) => {
            writeln!(w, "{} {}", g.n(), v.len()).map_err(io)?;
            let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "# planted {}", list.join(" ")).map_err(io)?;
        }
        None => writeln!(w, "{}", g.n()).map_err(io)?,
    }
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            if g.edge(i, j) {
                writeln!(w, "{i} {j}").map_err(io)?;
            }
        }
    }
    Ok(())
}

pub fn read_edge_list(r: impl BufRead) -> Result<AdjacencyMatrix> {
    let bad = |m: String| Error::Format(m);
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty edge list".into()))?.map_err(|e| bad(e.to_string()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| bad(format!("header: {e}"))))
        .collect::<Result<_>>()?;
    let (n, kappa) = match head.as_slice() {
        [n] => (*n, None),
        [n, k] => (*n, Some(*k)),
        _ => return Err(bad(format!("bad header '{header}'"))),
    };
    let mut g = AdjacencyMatrix::empty(n);
    let mut planted = None;
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(list) = rest.trim().strip_prefix("planted") {
                let v: Vec<usize> = list
                    .split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|e| bad(format!("planted: {e}"))))
                    .collect::<Result<_>>()?;
                planted = Some(v);
            }
            continue;
        }
        let mut it = line.split_whitespace().map(|t| t.parse::<usize>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) if i < n && j < n && i != j => g.set_edge(i, j, true),
            _ => return Err(bad(format!("bad edge line '{line}'"))),
        }
    }
    if let Some(v) = planted {
        if kappa.is_some_and(|k| k != v.len()) {
            return Err(bad("planted list length disagrees with header".into()));
        }
        g.plant(&v)?;
    }
    Ok(g)
}

pub const GRAPH_MAGIC: &[u8; 4] = b"PCGR";

/// Packed binary graph: magic, `n` (u64), planted count (u64), planted
/// vertices (u64 each), then the full row-packed bitset as u64 words, all
/// little-endian.
pub fn write_packed(g: &AdjacencyMatrix, w: &mut impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    w.write_all(GRAPH_MAGIC).map_err(io)?;
    w.write_all(&(g.n() as u64).to_le_bytes()).map_err(io)?;
    let planted = g.planted().unwrap_or(&[]);
    w.write_all(&(planted.len() as u64).to_le_bytes()).map_err(io)?;
    for &v in planted {
        w.write_all(&(v as u64).to_le_bytes()).map_err(io)?;
    }
    for word in &g.bits.data {
        w.write_all(&word.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_packed(r: &mut impl Read) -> Result<AdjacencyMatrix> {
    let mut b8 = [0u8; 8];
    let mut rd = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut b8).map_err(|e| Error::Format(e.to_string()))?;
        Ok(u64::from_le_bytes(b8))
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::Format(e.to_string()))?;
    if &magic != GRAPH_MAGIC {
        return Err(Error::Format(format!("bad graph magic {magic:?}")));
    }
    let n = rd(r)? as usize;
    let kappa = rd(r)? as usize;
    let mut planted = Vec::with_capacity(kappa);
    for _ in 0..kappa {
        planted.push(rd(r)? as usize);
    }
    let mut bits = BitMatrix::zeros(n, n);
    for w in bits.data.iter_mut() {
        *w = rd(r)?;
    }
    let mut g = AdjacencyMatrix { bits, planted: None };
    if !g.is_symmetric() {
        return Err(Error::Format("adjacency is not symmetric with zero diagonal".into()));
    }
    if kappa > 0 {
        g.plant(&planted)?;
    }
    Ok(g)
}

/// Loads either format, sniffing the binary magic.
pub fn load_graph(path: &std::path::Path) -> Result<AdjacencyMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::Format(e.to_string()))?;
    if bytes.starts_with(GRAPH_MAGIC) {
        read_packed(&mut bytes.as_slice())
    } else {
        read_edge_list(bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_is_symmetric_and_fair() {
        let mut present = 0;
        for s in 0..4000 {
            let g = sample_er(2, StreamKey::new(s));
            assert!(g.is_symmetric());
            present += g.edge(0, 1) as u32;
        }
        assert!((f64::from(present) / 4000.0 - 0.5).abs() < 4.0 * (0.25f64 / 4000.0).sqrt());
    }

    #[test]
    fn er_edge_count_mean() {
        let trials = 10_000;
        let total: u64 = (0..trials).map(|s| sample_er(20, StreamKey::new(s)).edge_count()).sum();
        let mean = total as f64 / trials as f64;
        // 190 Bernoulli(1/2) edges: mean 95, variance 47.5
        assert!((mean - 95.0).abs() < 4.0 * (47.5f64 / trials as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn planted_examples() {
        let g = sample_planted(9, 9, StreamKey::new(1)).unwrap();
        assert_eq!(g.edge_count(), 36);
        for s in 0..50 {
            let key = StreamKey::new(s);
            let g1 = sample_planted(12, 1, key).unwrap();
            let g0 = sample_er(12, key);
            assert_eq!(g1.bits, g0.bits);
            let g = sample_planted(30, 7, key).unwrap();
            let v = g.planted().unwrap();
            assert_eq!(v.len(), 7);
            for &a in v {
                for &b in v {
                    if a != b {
                        assert!(g.edge(a, b));
                    }
                }
            }
            assert!(g.is_symmetric());
        }
        assert!(sample_planted(5, 6, StreamKey::new(0)).is_err());
    }

    #[test]
    fn split_examples() {
        // 1-based {1, 2, 7} in N = 8 is 0-based {0, 1, 6}; V1 = {3} -> {2}
        let (v1, v2) = split_clique(&[0, 1, 6], 8).unwrap();
        assert_eq!(v1, vec![2]);
        assert_eq!(v2, vec![0, 1]);
        let (v1, v2) = split_clique(&[0, 3], 8).unwrap();
        assert!(v1.is_empty());
        assert_eq!(v2, vec![0, 3]);
        assert!(split_clique(&[0], 7).is_err());
    }

    #[test]
    fn split_size_is_hypergeometric() {
        // |V1| for a uniform 6-subset of 0..20 is hypergeometric(20, 10, 6)
        let (n, kappa, trials) = (20usize, 6usize, 40_000u64);
        let mut counts = [0u64; 7];
        for s in 0..trials {
            let v = sample_clique_vertices(n, kappa, StreamKey::new(s)).unwrap();
            counts[split_clique(&v, n).unwrap().0.len()] += 1;
        }
        let choose = |a: u64, b: u64| crate::normal::choose_u128(a, b) as f64;
        for (j, &c) in counts.iter().enumerate() {
            let pmf = choose(10, j as u64) * choose(10, (kappa - j) as u64) / choose(20, kappa as u64);
            let sd = (pmf * (1.0 - pmf) / trials as f64).sqrt();
            assert!((c as f64 / trials as f64 - pmf).abs() <= 4.0 * sd + 1e-12, "j={j}");
        }
    }

    #[test]
    fn fold_examples() {
        let p = 5;
        assert_eq!(fold(0, p), 0);
        assert_eq!(fold(p - 1, p), p - 1);
        assert_eq!(fold(p, p), 0);
        assert_eq!(fold(2 * p + 2, p), 2);
        let ell = 4;
        let mut sizes = vec![0; p];
        for x in 0..p * ell {
            sizes[fold(x, p)] += 1;
        }
        assert!(sizes.iter().all(|&s| s == ell));
    }

    #[test]
    fn image_examples() {
        let p = 6;
        let (u1, _) = image_supports(&[0, p], &[], p);
        assert_eq!(u1, vec![0]);
        let v1: Vec<usize> = (0..5).map(|i| i * (p + 1)).collect();
        assert_eq!(fold_set(&v1, p).len(), 5);
        assert!(event_e(&[0, 1], &[2, 3, 4], 2));
        assert!(!event_e(&[0], &[2, 3], 2));
    }

    #[test]
    fn fold_report_is_consistent() {
        let (n, p, k) = (80, 10, 2);
        for s in 0..100 {
            let v = sample_clique_vertices(n, 20, StreamKey::new(s)).unwrap();
            let r = fold_report(&v, n, p, k).unwrap();
            assert_eq!(r.v1.len() + r.v2.len(), 20);
            assert_eq!(r.u1, fold_set(&r.v1, p));
            assert_eq!(r.u2, fold_set(&r.v2, p));
            assert_eq!(r.event_e, r.u1.len() >= k && r.u2.len() >= k);
        }
    }

    #[test]
    fn block_sets_partition_preimages() {
        let (p, ell) = (4, 3);
        let v1 = vec![0, 5, 9];
        let v2 = vec![1, 4, 8, 11];
        let mut total_inside = 0;
        for a in 0..p {
            for b in 0..p {
                let (out, ins) = block_sets(&v1, &v2, p, ell, a, b);
                assert_eq!(out.len() + ins.len(), ell * ell);
                for &(i, j) in out.iter().chain(&ins) {
                    assert_eq!((fold(i, p), fold(j, p)), (a, b));
                }
                total_inside += ins.len();
            }
        }
        assert_eq!(total_inside, v1.len() * v2.len());
    }

    #[test]
    fn quarter_contains_clique_cross_block() {
        let n = 16;
        let g = sample_planted(n, 6, StreamKey::new(3)).unwrap();
        let (v1, v2) = split_clique(g.planted().unwrap(), n).unwrap();
        let a0 = g.lower_left_quarter().unwrap();
        for &i in &v1 {
            for &j in &v2 {
                assert!(a0.get(i, j));
            }
        }
    }

    #[test]
    fn graph_formats_roundtrip() {
        let g = sample_planted(13 * 2, 5, StreamKey::new(8)).unwrap();
        let mut txt = Vec::new();
        write_edge_list(&g, &mut txt).unwrap();
        assert_eq!(read_edge_list(txt.as_slice()).unwrap(), g);
        let mut bin = Vec::new();
        write_packed(&g, &mut bin).unwrap();
        assert_eq!(read_packed(&mut bin.as_slice()).unwrap(), g);
        let h = sample_er(7, StreamKey::new(2));
        let mut txt = Vec::new();
        write_edge_list(&h, &mut txt).unwrap();
        assert_eq!(read_edge_list(txt.as_slice()).unwrap(), h);
        assert!(read_edge_list(&b"3\n0 3\n"[..]).is_err());
    }

    #[test]
    fn failure_bound_values() {
        let b = event_e_failure_bound(1, 40);
        let expect = 40.0 * (std::f64::consts::E / 4.0).powi(5) + 2.0 * (-4.0 * 2f64.ln()).exp();
        assert!((b - expect).abs() < 1e-12);
    }
}
