//! Sparse symmetric positive-definite solves: minimum-degree ordering and an
//! up-looking Cholesky factorization over compressed columns.

use std::collections::BTreeSet;

use crate::scalar::Real;

/// Upper triangle of a symmetric matrix in compressed-column form. Row indices are
/// sorted within each column and duplicates are summed.
#[derive(Debug, Clone)]
pub struct CscUpper<T> {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CscUpper<T> {
    /// Builds the permuted matrix `P A Pᵀ` from symmetric triplets (either triangle).
    /// `pinv[old] = new`.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)], pinv: Option<&[usize]>) -> Self {
        let map = |i: usize| pinv.map_or(i, |p| p[i]);
        let mut entries: Vec<(usize, usize, T)> = triplets
            .iter()
            .map(|&(i, j, v)| {
                let (a, b) = (map(i), map(j));
                if a <= b {
                    (b, a, v)
                } else {
                    (a, b, v)
                }
            })
            .collect();
        // (col, row) lexicographic
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut colptr = vec![0usize; n + 1];
        let mut rowidx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (col, row, v) in entries {
            if last == Some((col, row)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                rowidx.push(row);
                values.push(v);
                colptr[col + 1] += 1;
                last = Some((col, row));
            }
        }
        for c in 0..n {
            colptr[c + 1] += colptr[c];
        }
        Self {
            n,
            colptr,
            rowidx,
            values,
        }
    }

    /// Matrix with a prescribed upper-triangular pattern and zero values. Row indices
    /// must be sorted within each column.
    pub fn with_pattern(n: usize, colptr: Vec<usize>, rowidx: Vec<usize>) -> Self {
        assert_eq!(colptr.len(), n + 1);
        let values = vec![T::zero(); rowidx.len()];
        Self {
            n,
            colptr,
            rowidx,
            values,
        }
    }

    /// Storage position of entry `(row, col)` with `row ≤ col`.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let r = self.colptr[col]..self.colptr[col + 1];
        self.rowidx[r.clone()].binary_search(&row).ok().map(|k| r.start + k)
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    fn column(&self, k: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.colptr[k]..self.colptr[k + 1];
        self.rowidx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Elimination tree of the matrix.
    fn etree(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n];
        let mut ancestor: Vec<Option<usize>> = vec![None; self.n];
        for k in 0..self.n {
            for (row, _) in self.column(k) {
                let mut i = Some(row);
                while let Some(ii) = i {
                    if ii >= k {
                        break;
                    }
                    let next = ancestor[ii];
                    ancestor[ii] = Some(k);
                    if next.is_none() {
                        parent[ii] = Some(k);
                    }
                    i = next;
                }
            }
        }
        parent
    }
}

/// Nonzero pattern of row `k` of L, written to `stack[top..]` in topological order.
fn ereach<T: Real>(
    a: &CscUpper<T>,
    k: usize,
    parent: &[Option<usize>],
    stack: &mut [usize],
    mark: &mut [usize],
    path: &mut Vec<usize>,
) -> usize {
    let n = a.n;
    let mut top = n;
    let stamp = k + 1;
    mark[k] = stamp;
    for (row, _) in a.column(k) {
        if row > k {
            continue;
        }
        let mut i = row;
        path.clear();
        while mark[i] != stamp {
            path.push(i);
            mark[i] = stamp;
            match parent[i] {
                Some(p) => i = p,
                None => break,
            }
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

/// Failure of the numeric factorization at a pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub column: usize,
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`, stored by columns with the diagonal first.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
}

/// Elimination tree and column layout of `L`; depends only on the pattern of `A`.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    parent: Vec<Option<usize>>,
    lp: Vec<usize>,
}

impl SymbolicCholesky {
    pub fn analyze<T: Real>(a: &CscUpper<T>) -> Self {
        let n = a.n;
        let parent = a.etree();
        let mut stack = vec![0usize; n];
        let mut mark = vec![0usize; n];
        let mut path = Vec::new();
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(a, k, &parent, &mut stack, &mut mark, &mut path);
            for &i in &stack[top..n] {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + counts[k];
        }
        Self { n, parent, lp }
    }

    pub fn nnz(&self) -> usize {
        self.lp[self.n]
    }
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &CscUpper<T>) -> Result<Self, NotPositiveDefinite> {
        Self::factor_with(&SymbolicCholesky::analyze(a), a)
    }

    /// Numeric factorization reusing an analysis of the same pattern.
    pub fn factor_with(sym: &SymbolicCholesky, a: &CscUpper<T>) -> Result<Self, NotPositiveDefinite> {
        let n = a.n;
        assert_eq!(sym.n, n, "symbolic analysis is for a different matrix");
        let parent = &sym.parent;
        let lp = sym.lp.clone();
        let mut stack = vec![0usize; n];
        let mut mark = vec![0usize; n];
        let mut path = Vec::new();
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut next: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![T::zero(); n];

        for k in 0..n {
            let top = ereach(a, k, parent, &mut stack, &mut mark, &mut path);
            x[k] = T::zero();
            for (row, v) in a.column(k) {
                if row <= k {
                    x[row] += v;
                }
            }
            let mut d = x[k];
            x[k] = T::zero();
            for &i in &stack[top..n] {
                let lki = x[i] / lx[lp[i]];
                x[i] = T::zero();
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(NotPositiveDefinite { column: k });
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(Self { n, lp, li, lx })
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        for j in 0..self.n {
            let (start, end) = (self.lp[j], self.lp[j + 1]);
            b[j] /= self.lx[start];
            let bj = b[j];
            for p in start + 1..end {
                b[self.li[p]] -= self.lx[p] * bj;
            }
        }
        for j in (0..self.n).rev() {
            let (start, end) = (self.lp[j], self.lp[j + 1]);
            let mut s = b[j];
            for p in start + 1..end {
                s -= self.lx[p] * b[self.li[p]];
            }
            b[j] = s / self.lx[start];
        }
    }
}

/// Minimum-degree elimination ordering of an undirected graph given as adjacency
/// lists. Returns `perm` with `perm[new] = old`. Ties break on the lowest vertex id,
/// so the result is deterministic.
pub fn minimum_degree_ordering(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut adj: Vec<BTreeSet<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(v, nb)| nb.iter().copied().filter(|&u| u != v && u < n).collect())
        .collect();
    // make symmetric
    for v in 0..n {
        let nbs: Vec<usize> = adj[v].iter().copied().collect();
        for u in nbs {
            adj[u].insert(v);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        // eliminated vertex's neighbours become a clique
        for (a_i, &a) in nbs.iter().enumerate() {
            for &b in &nbs[a_i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &u in &nbs {
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

/// Inverse of a permutation.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
