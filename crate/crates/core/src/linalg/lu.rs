//! Sparse direct solver: reverse Cuthill-McKee ordering followed by a banded
//! LU factorization with partial pivoting.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use std::collections::VecDeque;

/// Reverse Cuthill-McKee ordering of the symmetrized pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for nb in adj.iter_mut() {
        nb.sort_unstable();
        nb.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = peripheral_node(&adj, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (adj[w].len(), w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Pseudo-peripheral node in the component of `seed` (George-Liu).
fn peripheral_node(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut root = seed;
    let (mut levels, mut depth) = bfs_levels(adj, root);
    loop {
        let cand = (0..adj.len())
            .filter(|&v| levels[v] == Some(depth))
            .min_by_key(|&v| adj[v].len())
            .unwrap_or(root);
        let (l2, d2) = bfs_levels(adj, cand);
        if d2 <= depth {
            return root;
        }
        root = cand;
        levels = l2;
        depth = d2;
    }
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> (Vec<Option<usize>>, usize) {
    let mut lvl = vec![None; adj.len()];
    lvl[root] = Some(0);
    let mut depth = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = lvl[v].unwrap();
        depth = depth.max(d);
        for &w in &adj[v] {
            if lvl[w].is_none() {
                lvl[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    (lvl, depth)
}

/// LU factors `P A P^T = L U` in band storage, with row interchanges recorded
/// in `ipiv`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
}

impl LuFactors {
    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        self.kl + self.ku + r - c + c * self.ldab
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Symmetric permutation applied before factoring (`perm[new] = old`).
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                y.swap(j, p);
            }
            let yj = y[j];
            if yj != 0.0 {
                let km = self.kl.min(n - 1 - j);
                let base = self.idx(j, j);
                for r in 1..=km {
                    y[j + r] -= self.ab[base + r] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let base = self.idx(j, j);
            y[j] /= self.ab[base];
            let yj = y[j];
            if yj != 0.0 {
                let lo = j.saturating_sub(kv);
                for r in lo..j {
                    y[r] -= self.ab[base - (j - r)] * yj;
                }
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

/// Factors a square sparse matrix.
pub fn lu_factor(a: &SparseMatrix) -> Result<LuFactors> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let perm = rcm_ordering(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0usize, 0usize);
    for i in 0..n {
        for &j in a.row(i).0 {
            let (r, c) = (inv[i], inv[j]);
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
    }
    let ldab = 2 * kl + ku + 1;
    let mut f = LuFactors {
        n,
        kl,
        ku,
        ldab,
        ab: vec![0.0; ldab * n],
        ipiv: vec![0; n],
        perm,
    };
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let k = f.idx(inv[i], inv[j]);
            f.ab[k] += v;
        }
    }
    let tol = f64::EPSILON * a.max_abs();
    let mut ju = 0usize;
    for j in 0..n {
        let km = kl.min(n - 1 - j);
        let diag = f.idx(j, j);
        let mut p = 0;
        let mut best = f.ab[diag].abs();
        for r in 1..=km {
            let v = f.ab[diag + r].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= tol || n == 0 {
            return Err(Error::SingularPivot(f.perm[j]));
        }
        f.ipiv[j] = j + p;
        ju = ju.max((j + ku + p).min(n - 1));
        if p != 0 {
            for c in j..=ju {
                let a1 = f.idx(j, c);
                let a2 = f.idx(j + p, c);
                f.ab.swap(a1, a2);
            }
        }
        let piv = f.ab[diag];
        for r in 1..=km {
            f.ab[diag + r] /= piv;
        }
        for c in j + 1..=ju {
            let ujc = f.ab[f.idx(j, c)];
            if ujc == 0.0 {
                continue;
            }
            let base_c = f.idx(j, c);
            for r in 1..=km {
                let l = f.ab[diag + r];
                f.ab[base_c + r] -= l * ujc;
            }
        }
    }
    Ok(f)
}
