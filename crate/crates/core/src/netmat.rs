//! Connectivity matrices of dispersal networks and their structural
//! classification.
//!
//! Orientation is fixed crate-wide: `a[(i, j)]` is the movement rate **from**
//! patch `j` **to** patch `i`. In the weighted digraph this is an arc with
//! source `j` and target `i`, present exactly when `a[(i, j)] > 0`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square};

/// How the diagonal of a [`DispersalNetwork`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagRule {
    /// Supplied by the caller.
    Supplied,
    /// Filled as `a[j][j] = -Σ_{i≠j} a[i][j]`, so every column sums to zero.
    Auto,
}

/// A validated connectivity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersalNetwork {
    a: DMatrix<f64>,
    diag_rule: DiagRule,
}

impl DispersalNetwork {
    /// Build from an arc list of `(target, source, rate)` triplets with
    /// 0-based indices. Self arcs and duplicate arcs are rejected; zero rates
    /// are accepted and simply leave the arc absent.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize, f64)], diag: Option<&[f64]>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("patch count must be at least 1"));
        }
        let mut off = DMatrix::zeros(n, n);
        let mut seen = DMatrix::from_element(n, n, false);
        for (k, &(target, source, rate)) in arcs.iter().enumerate() {
            if target >= n || source >= n {
                return Err(Error::validation(format!("arc {k}: index ({target}, {source}) out of range for n = {n}")));
            }
            if target == source {
                return Err(Error::validation(format!("arc {k}: self arc on patch {target} is not allowed")));
            }
            if seen[(target, source)] {
                return Err(Error::validation(format!("arc {k}: duplicate arc {source} -> {target}")));
            }
            seen[(target, source)] = true;
            off[(target, source)] = rate;
        }
        build_network(n, &off, diag)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// The connectivity matrix `A`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn diag_rule(&self) -> DiagRule {
        self.diag_rule
    }

    /// Present arcs as `(target, source, rate)`, ordered by target then source.
    pub fn arcs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.a[(i, j)] > 0.0 {
                    out.push((i, j, self.a[(i, j)]));
                }
            }
        }
        out
    }

    pub fn classify(&self) -> MatrixClass {
        classify_matrix(&self.a)
    }

    pub fn is_strongly_connected(&self) -> bool {
        strongly_connected(&self.a)
    }
}

/// Validate the off-diagonal rates and assemble `A`.
///
/// `offdiag` must be `n×n`; its diagonal has to be zero (self arcs are not
/// rates). When `diag` is `None` the diagonal is filled so that each column
/// sums to zero.
pub fn build_network(n: usize, offdiag: &DMatrix<f64>, diag: Option<&[f64]>) -> Result<DispersalNetwork> {
    if n == 0 {
        return Err(Error::validation("patch count must be at least 1"));
    }
    if offdiag.nrows() != n || offdiag.ncols() != n {
        return Err(Error::validation(format!(
            "off-diagonal rates must be {n}x{n}, got {}x{}",
            offdiag.nrows(),
            offdiag.ncols()
        )));
    }
    ensure_finite(offdiag, "offdiag")?;
    for i in 0..n {
        if offdiag[(i, i)] != 0.0 {
            return Err(Error::validation(format!(
                "offdiag[{i}][{i}] = {} is a self arc; supply the diagonal separately",
                offdiag[(i, i)]
            )));
        }
        for j in 0..n {
            if offdiag[(i, j)] < 0.0 {
                return Err(Error::validation(format!(
                    "offdiag[{i}][{j}] = {} is a negative movement rate",
                    offdiag[(i, j)]
                )));
            }
        }
    }
    let mut a = offdiag.clone();
    let diag_rule = match diag {
        Some(d) => {
            if d.len() != n {
                return Err(Error::validation(format!("diagonal has {} entries, expected {n}", d.len())));
            }
            for (j, &v) in d.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::validation(format!("diag[{j}] is not finite")));
                }
                a[(j, j)] = v;
            }
            DiagRule::Supplied
        }
        None => {
            for j in 0..n {
                let out: f64 = (0..n).filter(|&i| i != j).map(|i| a[(i, j)]).sum();
                a[(j, j)] = -out;
            }
            DiagRule::Auto
        }
    };
    Ok(DispersalNetwork { a, diag_rule })
}

/// Structural flags of a square matrix `A`.
///
/// The Laplacian family is read off `-A` with column sums: `laplacian` means
/// `-A` is a Laplacian (off-diagonals of `A` non-negative, every column of
/// `A` sums to zero), `sub_laplacian` allows column sums `≤ 0`, `strictly_sub`
/// needs at least one negative column sum and `strongly_sub` needs all of them
/// negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixClass {
    pub quasi_positive: bool,
    pub laplacian: bool,
    pub sub_laplacian: bool,
    pub strictly_sub: bool,
    pub strongly_sub: bool,
    pub irreducible: bool,
}

/// Column sums within this many units of rounding of the summation count as
/// zero.
const COLUMN_SUM_ULPS: f64 = 8.0;

fn column_sum_sign(m: &DMatrix<f64>, j: usize) -> std::cmp::Ordering {
    let col = m.column(j);
    let sum: f64 = col.iter().sum();
    let mag: f64 = col.iter().map(|x| x.abs()).sum();
    let tol = COLUMN_SUM_ULPS * f64::EPSILON * mag;
    if sum > tol {
        std::cmp::Ordering::Greater
    } else if sum < -tol {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Equal
    }
}

pub fn is_quasi_positive(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0))
}

pub fn classify_matrix(m: &DMatrix<f64>) -> MatrixClass {
    use std::cmp::Ordering::*;
    let n = m.nrows();
    let quasi_positive = m.nrows() == m.ncols() && is_quasi_positive(m);
    let irreducible = m.nrows() == m.ncols() && n > 0 && strongly_connected(m);
    if !quasi_positive {
        return MatrixClass {
            quasi_positive,
            laplacian: false,
            sub_laplacian: false,
            strictly_sub: false,
            strongly_sub: false,
            irreducible,
        };
    }
    let signs: Vec<_> = (0..n).map(|j| column_sum_sign(m, j)).collect();
    let sub_laplacian = signs.iter().all(|s| *s != Greater);
    let laplacian = signs.iter().all(|s| *s == Equal);
    let strictly_sub = sub_laplacian && signs.contains(&Less);
    let strongly_sub = sub_laplacian && signs.iter().all(|s| *s == Less);
    MatrixClass { quasi_positive, laplacian, sub_laplacian, strictly_sub, strongly_sub, irreducible }
}

/// Out-neighbour lists of the digraph of `m`: `j -> i` whenever `m[(i, j)] > 0`.
pub(crate) fn out_neighbours(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    (0..n).map(|j| (0..n).filter(|&i| i != j && m[(i, j)] > 0.0).collect()).collect()
}

/// Tarjan's algorithm, iterative. Components come out sink-first: a component
/// is emitted only after every component reachable from it.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::with_capacity(n);
    let mut comps = Vec::new();
    let mut counter = 0usize;
    // (vertex, next edge position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos == 0 && index[v] == UNVISITED {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// `true` iff the weighted digraph of `m` (arc `j -> i` iff `m[(i, j)] > 0`)
/// is strongly connected, i.e. `m` is irreducible.
pub fn strongly_connected(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n <= 1 {
        return n == 1;
    }
    tarjan(&out_neighbours(m)).len() == 1
}

/// Strongly connected components arranged so that the permuted matrix is
/// block upper triangular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDecomposition {
    /// Vertex sets, each sorted ascending, in block order.
    pub blocks: Vec<Vec<usize>>,
    /// Concatenation of `blocks`: new position `k` holds old vertex
    /// `permutation[k]`.
    pub permutation: Vec<usize>,
}

impl BlockDecomposition {
    /// `P m Pᵀ` for the stored permutation.
    pub fn permute(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let p = &self.permutation;
        DMatrix::from_fn(p.len(), p.len(), |r, c| m[(p[r], p[c])])
    }

    /// Principal submatrix of `m` on block `k`.
    pub fn block_matrix(&self, m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
        let b = &self.blocks[k];
        DMatrix::from_fn(b.len(), b.len(), |r, c| m[(b[r], b[c])])
    }
}

/// Arcs only run from later blocks to earlier ones, which for the convention
/// `a[(i, j)]: j -> i` is exactly block upper triangularity.
pub fn scc_blocks(m: &DMatrix<f64>) -> BlockDecomposition {
    let blocks = tarjan(&out_neighbours(m));
    let permutation = blocks.iter().flatten().copied().collect();
    BlockDecomposition { blocks, permutation }
}

/// Validate that `m` is a finite, square, quasi-positive matrix.
pub(crate) fn ensure_quasi_positive(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    let n = ensure_square(m, what)?;
    ensure_finite(m, what)?;
    if !is_quasi_positive(m) {
        return Err(Error::validation(format!("{what} has a negative off-diagonal entry (not quasi-positive)")));
    }
    Ok(n)
}
