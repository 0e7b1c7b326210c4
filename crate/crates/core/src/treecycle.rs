//! Exhaustive enumeration of spanning in-trees and unicyclic subgraphs, the
//! Matrix-Tree cofactors and the Tree-Cycle identity, plus the k-vector
//! construction for ordered positive vectors.
//!
//! Arcs are written `(source, target)`; the weight of arc `j -> i` is
//! `a[(i, j)]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::principal_minor;
use crate::netmat::{out_neighbours, DispersalNetwork};

pub const DEFAULT_TREE_GUARD: usize = 8;
pub const DEFAULT_UNICYCLIC_GUARD: usize = 7;

/// Relative agreement required between determinant and enumeration cofactors.
const COFACTOR_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InTree {
    pub root: usize,
    /// `(source, target)` pairs sorted by source.
    pub arcs: Vec<(usize, usize)>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnicyclicSubgraph {
    /// One `(source, target)` arc per vertex, sorted by source.
    pub arcs: Vec<(usize, usize)>,
    /// The directed cycle, starting at its smallest vertex.
    pub cycle: Vec<(usize, usize)>,
    pub weight: f64,
}

fn check_guard(n: usize, guard: usize) -> Result<()> {
    if n > guard {
        Err(Error::Capacity { n, guard })
    } else {
        Ok(())
    }
}

/// Calls `visit` with every function `succ` that picks, for each vertex in
/// `free`, one of its out-neighbours. Vertices not in `free` keep
/// `usize::MAX`. Choices are visited in lexicographic order.
fn for_each_choice(n: usize, out: &[Vec<usize>], free: &[usize], mut visit: impl FnMut(&[usize])) {
    if free.iter().any(|&v| out[v].is_empty()) {
        return;
    }
    let mut succ = vec![usize::MAX; n];
    let mut pos = vec![0usize; free.len()];
    for &v in free {
        succ[v] = out[v][0];
    }
    loop {
        visit(&succ);
        // odometer, last free vertex fastest
        let mut k = free.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let v = free[k];
            pos[k] += 1;
            if pos[k] < out[v].len() {
                succ[v] = out[v][pos[k]];
                break;
            }
            pos[k] = 0;
            succ[v] = out[v][0];
        }
    }
}

fn weight_of(a: &DMatrix<f64>, arcs: &[(usize, usize)]) -> f64 {
    arcs.iter().map(|&(s, t)| a[(t, s)]).product()
}

/// All spanning in-trees rooted at `root`: every other vertex picks one
/// outgoing arc, and the choice is kept iff it has no directed cycle.
pub fn enumerate_in_trees(g: &DispersalNetwork, root: usize, guard: usize) -> Result<Vec<InTree>> {
    let n = g.n();
    check_guard(n, guard)?;
    if root >= n {
        return Err(Error::validation(format!("root {root} out of range for n = {n}")));
    }
    let a = g.matrix();
    let out = out_neighbours(a);
    let free: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut trees = Vec::new();
    for_each_choice(n, &out, &free, |succ| {
        let reaches_root = free.iter().all(|&start| {
            let mut v = start;
            for _ in 0..n {
                if v == root {
                    return true;
                }
                v = succ[v];
            }
            v == root
        });
        if reaches_root {
            let arcs: Vec<_> = free.iter().map(|&v| (v, succ[v])).collect();
            trees.push(InTree { root, weight: weight_of(a, &arcs), arcs });
        }
    });
    Ok(trees)
}

/// The single directed cycle of a functional graph, if there is exactly one.
fn unique_cycle(succ: &[usize]) -> Option<Vec<(usize, usize)>> {
    let n = succ.len();
    // 0 = unseen, 1 = on current walk, 2 = done
    let mut state = vec![0u8; n];
    let mut cycle_start = None;
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = succ[v];
        }
        if state[v] == 1 {
            if cycle_start.is_some() {
                return None;
            }
            cycle_start = Some(v);
        }
        for p in path {
            state[p] = 2;
        }
    }
    let first = cycle_start?;
    let mut members = vec![first];
    let mut v = succ[first];
    while v != first {
        members.push(v);
        v = succ[v];
    }
    let lowest = (0..members.len()).min_by_key(|&k| members[k]).unwrap_or(0);
    members.rotate_left(lowest);
    Some(members.iter().map(|&v| (v, succ[v])).collect())
}

/// All spanning subgraphs in which every vertex has exactly one outgoing arc
/// and there is exactly one directed cycle.
pub fn enumerate_unicyclic(g: &DispersalNetwork, guard: usize) -> Result<Vec<UnicyclicSubgraph>> {
    let n = g.n();
    check_guard(n, guard)?;
    let a = g.matrix();
    let out = out_neighbours(a);
    let all: Vec<usize> = (0..n).collect();
    let mut found = Vec::new();
    for_each_choice(n, &out, &all, |succ| {
        if let Some(cycle) = unique_cycle(succ) {
            let arcs: Vec<_> = (0..n).map(|v| (v, succ[v])).collect();
            found.push(UnicyclicSubgraph { weight: weight_of(a, &arcs), arcs, cycle });
        }
    });
    Ok(found)
}

/// `ℓ_ij = −a_ij` off the diagonal and `ℓ_ii = Σ_{k≠i} a_ki`, so every column
/// sums to zero whatever the supplied diagonal of `A`.
pub fn laplacian(g: &DispersalNetwork) -> DMatrix<f64> {
    let a = g.matrix();
    let n = g.n();
    DMatrix::from_fn(n, n, |i, j| if i == j { (0..n).filter(|&k| k != i).map(|k| a[(k, i)]).sum() } else { -a[(i, j)] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cofactors {
    /// Diagonal cofactors `C_ii` of the Laplacian.
    pub c: DVector<f64>,
    /// `C / Σ C`, the sum-1 right null vector of the Laplacian.
    pub alpha: DVector<f64>,
    /// Whether the determinants were cross-checked against in-tree sums.
    pub enumerated: bool,
}

fn minor_determinant(l: &DMatrix<f64>, k: usize) -> f64 {
    if l.nrows() == 1 {
        1.0
    } else {
        principal_minor(l, k).determinant()
    }
}

/// Diagonal cofactors of the Laplacian of a strongly connected `g`.
///
/// Each cofactor is a principal-minor determinant. For `n ≤ guard` it is also
/// summed over the in-trees rooted at that vertex, and a disagreement beyond
/// `1e-9` relative is an error.
pub fn principal_cofactors(g: &DispersalNetwork, guard: usize) -> Result<Cofactors> {
    if !g.is_strongly_connected() {
        return Err(Error::structure("network is not strongly connected; some cofactors vanish"));
    }
    let n = g.n();
    let l = laplacian(g);
    let c = DVector::from_iterator(n, (0..n).map(|k| minor_determinant(&l, k)));
    let enumerated = n <= guard;
    if enumerated {
        for k in 0..n {
            let sum: f64 = enumerate_in_trees(g, k, guard)?.iter().map(|t| t.weight).sum();
            if (sum - c[k]).abs() > COFACTOR_RTOL * sum.abs().max(c[k].abs()) {
                return Err(Error::numeric(
                    format!("cofactor {k}: determinant {} but in-tree sum {sum}", c[k]),
                    (sum - c[k]).abs(),
                ));
            }
        }
    }
    let total = c.sum();
    if !(total > 0.0) {
        return Err(Error::structure("cofactors sum to zero"));
    }
    let alpha = &c / total;
    Ok(Cofactors { c, alpha, enumerated })
}

/// Values `F_ij(x_i, x_j)` attached to arcs `j -> i`.
pub trait ArcFunction {
    /// `None` when the function has no entry for the arc.
    fn eval(&self, target: usize, source: usize, x_target: f64, x_source: f64) -> Option<f64>;
}

impl<F: Fn(usize, usize, f64, f64) -> f64> ArcFunction for F {
    fn eval(&self, target: usize, source: usize, x_target: f64, x_source: f64) -> Option<f64> {
        Some(self(target, source, x_target, x_source))
    }
}

/// Constant arc values keyed by `(target, source)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArcTable(pub BTreeMap<(usize, usize), f64>);

impl ArcFunction for ArcTable {
    fn eval(&self, target: usize, source: usize, _: f64, _: f64) -> Option<f64> {
        self.0.get(&(target, source)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeCycleReport {
    /// `Σ C_j a_ij F_ij(x_i, x_j)` over arcs `j -> i`, unnormalized cofactors.
    pub lhs: f64,
    /// `Σ_Q w(Q) Σ_{arcs of the cycle of Q} F`.
    pub rhs: f64,
    pub residual: f64,
    /// `lhs / Σ C`, the same sum with the normalized null vector.
    pub normalized: f64,
    pub cofactor_sum: f64,
}

/// Evaluate both sides of the Tree-Cycle identity.
pub fn tree_cycle_residual(
    g: &DispersalNetwork,
    f: &impl ArcFunction,
    x: &[f64],
    guard: usize,
) -> Result<TreeCycleReport> {
    let n = g.n();
    check_guard(n, guard)?;
    if x.len() != n {
        return Err(Error::validation(format!("x has {} entries, expected {n}", x.len())));
    }
    let cof = principal_cofactors(g, guard)?;
    let arc_value = |t: usize, s: usize| {
        f.eval(t, s, x[t], x[s]).ok_or_else(|| Error::validation(format!("no F entry for arc {s} -> {t}")))
    };
    let mut lhs = 0.0;
    for (t, s, w) in g.arcs() {
        lhs += cof.c[s] * w * arc_value(t, s)?;
    }
    let mut rhs = 0.0;
    for q in enumerate_unicyclic(g, guard)? {
        let mut cyc = 0.0;
        for &(s, t) in &q.cycle {
            cyc += arc_value(t, s)?;
        }
        rhs += q.weight * cyc;
    }
    let total = cof.c.sum();
    Ok(TreeCycleReport { lhs, rhs, residual: (lhs - rhs).abs(), normalized: lhs / total, cofactor_sum: total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KVector {
    pub k: Vec<f64>,
    pub mu: f64,
    pub mu_prime: f64,
    pub u: Vec<f64>,
}

/// Open interval that `k_i / k_j` has to lie in.
pub fn k_ratio_bounds(ui: f64, uj: f64, mu: f64, mu_prime: f64) -> (f64, f64) {
    let lo = uj * (mu + mu_prime) / (mu_prime * ui + mu * uj);
    let hi = (mu_prime * uj + mu * ui) / (ui * (mu + mu_prime));
    (lo, hi)
}

fn ensure_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {x} must be positive")))
    }
}

/// Positive `k` with `k_i / k_j` strictly inside [`k_ratio_bounds`] for every
/// pair with `u_i ≠ u_j` and `k_i = k_j` when `u_i = u_j`.
///
/// Walks `u` in ascending order and takes each ratio between neighbouring
/// distinct values at the geometric mean of its interval.
///
/// ```
/// use spectral_dispersal::treecycle::{construct_k_vector, verify_k_vector};
///
/// let kv = construct_k_vector(&[1.0, 2.0], 1.0, 1.0).unwrap();
/// assert!((kv.k[1] - 0.5f64.sqrt()).abs() < 1e-15);
/// assert!(verify_k_vector(&kv));
/// ```
pub fn construct_k_vector(u: &[f64], mu: f64, mu_prime: f64) -> Result<KVector> {
    ensure_positive("mu", mu)?;
    ensure_positive("mu_prime", mu_prime)?;
    for (i, &ui) in u.iter().enumerate() {
        ensure_positive(&format!("u[{i}]"), ui)?;
    }
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[i].total_cmp(&u[j]));
    let mut k = vec![0.0; u.len()];
    let mut current = 1.0;
    let mut prev: Option<f64> = None;
    for &i in &order {
        if let Some(p) = prev {
            if u[i] != p {
                let (lo, hi) = k_ratio_bounds(u[i], p, mu, mu_prime);
                current *= (lo * hi).sqrt();
            }
        }
        k[i] = current;
        prev = Some(u[i]);
    }
    Ok(KVector { k, mu, mu_prime, u: u.to_vec() })
}

/// Check every ordered pair against [`k_ratio_bounds`].
pub fn verify_k_vector(kv: &KVector) -> bool {
    let n = kv.u.len();
    if kv.k.len() != n {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if kv.u[i] == kv.u[j] {
                if kv.k[i] != kv.k[j] {
                    return false;
                }
                continue;
            }
            let (lo, hi) = k_ratio_bounds(kv.u[i], kv.u[j], kv.mu, kv.mu_prime);
            let r = kv.k[i] / kv.k[j];
            if !(lo < r && r < hi) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_patch() -> DispersalNetwork {
        // a12 = 2 (2 -> 1), a21 = 3 (1 -> 2)
        DispersalNetwork::from_arcs(2, &[(0, 1, 2.0), (1, 0, 3.0)], None).unwrap()
    }

    #[test]
    fn in_trees_two_patch() {
        let t = enumerate_in_trees(&two_patch(), 0, DEFAULT_TREE_GUARD).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].arcs, vec![(1, 0)]);
        assert_eq!(t[0].weight, 2.0);
    }

    #[test]
    fn in_trees_path() {
        let g = DispersalNetwork::from_arcs(3, &[(0, 1, 1.5), (1, 0, 2.0), (1, 2, 3.0), (2, 1, 5.0)], None).unwrap();
        let t = enumerate_in_trees(&g, 1, DEFAULT_TREE_GUARD).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].arcs, vec![(0, 1), (2, 1)]);
        assert_eq!(t[0].weight, 2.0 * 3.0);
    }

    #[test]
    fn sink_vertex_has_no_trees_elsewhere() {
        let g = DispersalNetwork::from_arcs(2, &[(0, 1, 1.0)], None).unwrap();
        assert!(enumerate_in_trees(&g, 1, DEFAULT_TREE_GUARD).unwrap().is_empty());
        assert!(enumerate_unicyclic(&g, DEFAULT_UNICYCLIC_GUARD).unwrap().is_empty());
    }

    #[test]
    fn guard_is_enforced() {
        let g = DispersalNetwork::from_arcs(9, &[], None).unwrap();
        assert_eq!(enumerate_in_trees(&g, 0, 8), Err(Error::Capacity { n: 9, guard: 8 }));
    }

    #[test]
    fn cofactors_two_patch() {
        let c = principal_cofactors(&two_patch(), DEFAULT_TREE_GUARD).unwrap();
        assert_eq!(c.c.as_slice(), &[2.0, 3.0]);
        assert!((c.alpha[0] - 0.4).abs() < 1e-15);
        assert!(c.enumerated);
    }

    #[test]
    fn cofactors_symmetric_ring() {
        let arcs: Vec<_> = (0..3).flat_map(|i| [((i + 1) % 3, i, 1.0), (i, (i + 1) % 3, 1.0)]).collect();
        let g = DispersalNetwork::from_arcs(3, &arcs, None).unwrap();
        let c = principal_cofactors(&g, DEFAULT_TREE_GUARD).unwrap();
        for x in c.alpha.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disconnected_is_structure_error() {
        let g = DispersalNetwork::from_arcs(2, &[(0, 1, 1.0)], None).unwrap();
        assert!(matches!(principal_cofactors(&g, 8), Err(Error::Structure(_))));
    }

    #[test]
    fn unicyclic_two_patch() {
        let u = enumerate_unicyclic(&two_patch(), DEFAULT_UNICYCLIC_GUARD).unwrap();
        assert_eq!(u.len(), 1);
        assert_eq!(u[0].cycle, vec![(0, 1), (1, 0)]);
        assert_eq!(u[0].weight, 6.0);
    }

    #[test]
    fn hand_case_tree_cycle() {
        let mut t = ArcTable::default();
        t.0.insert((0, 1), 5.0);
        t.0.insert((1, 0), 7.0);
        let r = tree_cycle_residual(&two_patch(), &t, &[0.0, 0.0], 7).unwrap();
        assert_eq!(r.lhs, 72.0);
        assert_eq!(r.rhs, 72.0);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.cofactor_sum, 5.0);
    }

    #[test]
    fn missing_arc_value() {
        let mut t = ArcTable::default();
        t.0.insert((0, 1), 5.0);
        assert!(matches!(tree_cycle_residual(&two_patch(), &t, &[0.0, 0.0], 7), Err(Error::Validation(_))));
    }

    #[test]
    fn k_vector_examples() {
        let kv = construct_k_vector(&[3.0, 3.0, 3.0], 1.0, 2.0).unwrap();
        assert_eq!(kv.k, vec![1.0, 1.0, 1.0]);
        let kv = construct_k_vector(&[1.0, 2.0, 5.0], 1.0, 2.0).unwrap();
        assert!(verify_k_vector(&kv));
        let bad = KVector { k: vec![1.0, 1.0], mu: 1.0, mu_prime: 1.0, u: vec![1.0, 2.0] };
        assert!(!verify_k_vector(&bad));
        let single = KVector { k: vec![2.0], mu: 1.0, mu_prime: 1.0, u: vec![4.0] };
        assert!(verify_k_vector(&single));
        assert!(matches!(construct_k_vector(&[1.0, 0.0], 1.0, 1.0), Err(Error::Domain(_))));
    }
}
