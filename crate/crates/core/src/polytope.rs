//! Vertex geometry of polytopes `{π ∈ Δ_K : a_i·π ≤ b_i}`.
//!
//! Row indexing convention: rows `0..K` are the nonnegativity rows
//! `−π_a ≤ 0`, rows `K..K+d` are the extra constraints in insertion order.
//! The equality `Σπ = 1` is implicit and never counted as a row.

use itertools::Itertools;

use crate::error::{PexError, Result};
use crate::model::Policy;

/// Largest arm count accepted by the combinatorial enumerator.
pub const MAX_ARMS: usize = 16;
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const DEDUP_TOL: f64 = 1e-7;
pub const ACTIVE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-12;

pub const PROJECTION_MAX_ITERS: usize = 2000;
pub const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Halfspace {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Halfspace { coeffs, rhs }
    }

    /// `a·x − b`; positive means violated.
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.rhs
    }
}

/// Which system produced a vertex: the arms allowed to be nonzero and the
/// extra-constraint rows held tight. `|support| = |tight| + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub support: Vec<usize>,
    pub tight: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub point: Vec<f64>,
    /// Indices of all rows tight at this vertex (see module docs).
    pub active: Vec<usize>,
    pub basis: Basis,
}

#[derive(Debug, Clone)]
pub struct FeasiblePolytope {
    k: usize,
    constraints: Vec<Halfspace>,
    vertices: Vec<Vertex>,
    adjacency: Vec<Vec<usize>>,
    /// Vertex coordinates, row-major `n × k`.
    points: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub policy: Policy,
    pub converged: bool,
    pub iterations: usize,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the square system `m x = rhs` in place by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `PIVOT_TOL`.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col].abs() < PIVOT_TOL {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for c in col..n {
                    m[row][c] -= factor * m[col][c];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Solves the basis system against `constraints`: tight rows hold with
/// equality, coordinates outside the support are zero, `Σπ = 1`.
pub fn solve_basis(k: usize, constraints: &[Halfspace], basis: &Basis) -> Option<Vec<f64>> {
    let n = basis.support.len();
    let mut m = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for &i in &basis.tight {
        m.push(basis.support.iter().map(|&a| constraints[i].coeffs[a]).collect());
        rhs.push(constraints[i].rhs);
    }
    m.push(vec![1.0; n]);
    rhs.push(1.0);
    let xs = solve_dense(m, rhs)?;
    let mut point = vec![0.0; k];
    for (&a, x) in basis.support.iter().zip(xs) {
        point[a] = x;
    }
    Some(point)
}

/// Allocation-free variant of [`solve_basis`] for the enumeration loop.
/// `scratch` holds the augmented system row-major with stride `n + 1`.
/// Writes the point into `out` and returns false on a singular system.
fn solve_basis_into(
    constraints: &[Halfspace],
    support: &[usize],
    tight: &[usize],
    scratch: &mut [f64],
    out: &mut [f64],
) -> bool {
    let n = support.len();
    let w = n + 1;
    let m = &mut scratch[..n * w];
    for (r, &i) in tight.iter().enumerate() {
        for (c, &a) in support.iter().enumerate() {
            m[r * w + c] = constraints[i].coeffs[a];
        }
        m[r * w + n] = constraints[i].rhs;
    }
    m[(n - 1) * w..n * w].fill(1.0);
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row * w + col].abs() > m[piv * w + col].abs() {
                piv = row;
            }
        }
        if m[piv * w + col].abs() < PIVOT_TOL {
            return false;
        }
        if piv != col {
            for c in 0..w {
                m.swap(col * w + c, piv * w + c);
            }
        }
        for row in col + 1..n {
            let factor = m[row * w + col] / m[col * w + col];
            if factor != 0.0 {
                for c in col..w {
                    m[row * w + c] -= factor * m[col * w + c];
                }
            }
        }
    }
    out.fill(0.0);
    for row in (0..n).rev() {
        let mut acc = m[row * w + n];
        for c in row + 1..n {
            acc -= m[row * w + c] * out[support[c]];
        }
        out[support[row]] = acc / m[row * w + row];
    }
    true
}

impl FeasiblePolytope {
    /// Enumerates the vertices of `{π ∈ Δ_K : rows}`.
    pub fn enumerate(k: usize, constraints: Vec<Halfspace>) -> Result<Self> {
        if k > MAX_ARMS {
            return Err(PexError::TooManyArms { k, max: MAX_ARMS });
        }
        if k == 0 {
            return Err(PexError::InvalidArgument("polytope needs at least one arm".into()));
        }
        if let Some(bad) = constraints.iter().position(|h| h.coeffs.len() != k) {
            return Err(PexError::InvalidArgument(format!(
                "constraint {bad} has wrong length"
            )));
        }
        let d = constraints.len();
        let mut vertices: Vec<Vertex> = Vec::new();
        let mut scratch = vec![0.0; (MAX_ARMS + 1) * (MAX_ARMS + 2)];
        let mut buf = vec![0.0; k];
        // A vertex with support S has |S|−1 linearly independent tight rows
        // among the extra constraints; enumerate (T, S) pairs directly rather
        // than (K−1)-subsets of all rows.
        for size in 0..=d.min(k - 1) {
            for tight in (0..d).combinations(size) {
                for support in (0..k).combinations(size + 1) {
                    if !solve_basis_into(&constraints, &support, &tight, &mut scratch, &mut buf) {
                        continue;
                    }
                    let candidate = &buf[..];
                    if candidate.iter().any(|&x| x < -FEASIBILITY_TOL) {
                        continue;
                    }
                    if constraints.iter().any(|h| h.excess(candidate) > FEASIBILITY_TOL) {
                        continue;
                    }
                    let mut point = candidate.to_vec();
                    let basis = Basis {
                        support,
                        tight: tight.clone(),
                    };
                    for x in point.iter_mut() {
                        if *x < 0.0 {
                            *x = 0.0;
                        }
                    }
                    let duplicate = vertices.iter().any(|v| {
                        v.point
                            .iter()
                            .zip(&point)
                            .all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
                    });
                    if duplicate {
                        continue;
                    }
                    let active = active_rows(k, &constraints, &point);
                    vertices.push(Vertex {
                        point,
                        active,
                        basis,
                    });
                }
            }
        }
        if vertices.is_empty() {
            return Err(PexError::Infeasible);
        }
        let adjacency = adjacency(k, &vertices);
        let points = vertices.iter().flat_map(|v| v.point.iter().copied()).collect();
        Ok(FeasiblePolytope {
            k,
            constraints,
            vertices,
            adjacency,
            points,
        })
    }

    /// Polytope `{π ∈ Δ_K : A π ≤ 0}` for a homogeneous matrix.
    pub fn from_matrix(k: usize, a: &[Vec<f64>]) -> Result<Self> {
        let rows = a.iter().map(|row| Halfspace::new(row.clone(), 0.0)).collect();
        Self::enumerate(k, rows)
    }

    pub fn simplex(k: usize) -> Result<Self> {
        Self::enumerate(k, Vec::new())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    /// All rows including the `K` nonnegativity rows.
    pub fn rows(&self) -> Vec<Halfspace> {
        let mut rows: Vec<Halfspace> = (0..self.k)
            .map(|a| {
                let mut c = vec![0.0; self.k];
                c[a] = -1.0;
                Halfspace::new(c, 0.0)
            })
            .collect();
        rows.extend(self.constraints.iter().cloned());
        rows
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Maximizes `c·π` over the vertex set. Ties go to the lowest index.
    pub fn argmax_linear(&self, c: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.points.chunks_exact(self.k).enumerate() {
            let val = dot(c, p);
            if val > best.1 + 1e-12 {
                best = (i, val);
            }
        }
        best
    }

    /// Vertices whose value is within `r` of the best vertex value.
    pub fn r_good_vertices(&self, means: &[f64], r: f64) -> Vec<usize> {
        let (_, best) = self.argmax_linear(means);
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| dot(means, &v.point) + r >= best - 1e-12)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn contains(&self, pi: &[f64], tol: f64) -> bool {
        pi.len() == self.k
            && pi.iter().all(|&x| x >= -tol)
            && (pi.iter().sum::<f64>() - 1.0).abs() <= tol
            && self.constraints.iter().all(|h| h.excess(pi) <= tol)
    }

    /// True when some point satisfies every extra constraint strictly.
    /// The vertex centroid is strict for every row that is strict at some
    /// vertex, so checking it suffices.
    pub fn has_strict_interior(&self) -> bool {
        let n = self.vertices.len() as f64;
        let mut centroid = vec![0.0; self.k];
        for v in &self.vertices {
            for (c, x) in centroid.iter_mut().zip(&v.point) {
                *c += x / n;
            }
        }
        self.constraints
            .iter()
            .all(|h| h.excess(&centroid) < -FEASIBILITY_TOL)
    }

    /// Euclidean projection onto the polytope by Dykstra's alternating
    /// projections (each halfspace, then the simplex).
    pub fn project(&self, x: &[f64]) -> Projection {
        assert_eq!(x.len(), self.k);
        let m = self.constraints.len() + 1;
        let mut increments = vec![vec![0.0; self.k]; m];
        let mut cur = x.to_vec();
        let mut y = vec![0.0; self.k];
        for iter in 1..=PROJECTION_MAX_ITERS {
            let start = cur.clone();
            let previous = increments.clone();
            for (set, inc) in increments.iter_mut().enumerate() {
                for ((yi, ci), pi) in y.iter_mut().zip(&cur).zip(inc.iter()) {
                    *yi = ci + pi;
                }
                let next = if set < self.constraints.len() {
                    project_halfspace(&self.constraints[set], &y)
                } else {
                    project_simplex(&y)
                };
                for ((pi, yi), ni) in inc.iter_mut().zip(&y).zip(&next) {
                    *pi = yi - ni;
                }
                cur = next;
            }
            let change = cur
                .iter()
                .zip(&start)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let drift = increments
                .iter()
                .flatten()
                .zip(previous.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(change, f64::max);
            if drift < PROJECTION_TOL && self.contains(&cur, 1e-7) {
                return Projection {
                    policy: Policy::from_vec_unchecked(cur),
                    converged: true,
                    iterations: iter,
                };
            }
        }
        let exact = self.project_hull(x);
        let converged = self.contains(&exact, 1e-7);
        Projection {
            policy: Policy::from_vec_unchecked(exact),
            converged,
            iterations: PROJECTION_MAX_ITERS,
        }
    }

    /// Projection onto the convex hull of the vertices by Wolfe's
    /// minimum-norm-point method. Used when Dykstra stalls on thin sets.
    fn project_hull(&self, x: &[f64]) -> Vec<f64> {
        let pts: Vec<Vec<f64>> = self
            .vertices
            .iter()
            .map(|v| v.point.iter().zip(x).map(|(p, xi)| p - xi).collect())
            .collect();
        let scale = pts.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1.0);
        let first = (0..pts.len())
            .min_by(|&a, &b| dot(&pts[a], &pts[a]).total_cmp(&dot(&pts[b], &pts[b])))
            .expect("polytope has vertices");
        let mut set = vec![first];
        let mut lambda = vec![1.0];
        let mut z = pts[first].clone();
        for _ in 0..10 * pts.len() + 100 {
            let (j, proj) = (0..pts.len())
                .map(|j| (j, dot(&pts[j], &z)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if dot(&z, &z) - proj <= 1e-14 * scale || set.contains(&j) {
                break;
            }
            set.push(j);
            lambda.push(0.0);
            loop {
                let n = set.len();
                let mut m = vec![vec![0.0; n + 1]; n + 1];
                for (r, &a) in set.iter().enumerate() {
                    for (c, &b) in set.iter().enumerate() {
                        m[r][c] = dot(&pts[a], &pts[b]);
                    }
                    m[r][n] = 1.0;
                    m[n][r] = 1.0;
                }
                let mut rhs = vec![0.0; n + 1];
                rhs[n] = 1.0;
                let Some(sol) = solve_dense(m, rhs) else {
                    break;
                };
                let alpha = &sol[..n];
                if alpha.iter().all(|&a| a > 1e-15) {
                    lambda = alpha.to_vec();
                    break;
                }
                let theta = (0..n)
                    .filter(|&i| alpha[i] <= 1e-15)
                    .map(|i| lambda[i] / (lambda[i] - alpha[i]))
                    .fold(1.0, f64::min);
                for (l, a) in lambda.iter_mut().zip(alpha) {
                    *l += theta * (a - *l);
                }
                let keep: Vec<bool> = lambda.iter().map(|&l| l > 1e-15).collect();
                set = set.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| *s).collect();
                lambda = lambda.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| *l).collect();
            }
            let total: f64 = lambda.iter().sum();
            z = vec![0.0; self.k];
            for (&s, &l) in set.iter().zip(&lambda) {
                for (zi, p) in z.iter_mut().zip(&pts[s]) {
                    *zi += l / total * p;
                }
            }
        }
        let mut out: Vec<f64> = z.iter().zip(x).map(|(zi, xi)| (zi + xi).max(0.0)).collect();
        let sum: f64 = out.iter().sum();
        for o in out.iter_mut() {
            *o /= sum;
        }
        out
    }
}

fn active_rows(k: usize, constraints: &[Halfspace], point: &[f64]) -> Vec<usize> {
    let mut active: Vec<usize> = (0..k).filter(|&a| point[a].abs() <= ACTIVE_TOL).collect();
    active.extend(
        constraints
            .iter()
            .enumerate()
            .filter(|(_, h)| h.excess(point).abs() <= ACTIVE_TOL)
            .map(|(i, _)| k + i),
    );
    active
}

fn adjacency(k: usize, vertices: &[Vertex]) -> Vec<Vec<usize>> {
    let need = k.saturating_sub(2);
    let n = vertices.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let shared = vertices[i]
                .active
                .iter()
                .filter(|r| vertices[j].active.binary_search(r).is_ok())
                .count();
            if shared >= need {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    adj
}

fn project_halfspace(h: &Halfspace, y: &[f64]) -> Vec<f64> {
    let excess = h.excess(y);
    if excess <= 0.0 {
        return y.to_vec();
    }
    let norm2 = dot(&h.coeffs, &h.coeffs);
    if norm2 == 0.0 {
        return y.to_vec();
    }
    let scale = excess / norm2;
    y.iter().zip(&h.coeffs).map(|(yi, ai)| yi - scale * ai).collect()
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup1_rows() -> Vec<Halfspace> {
        vec![
            Halfspace::new(vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.5),
            Halfspace::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0], 0.5),
        ]
    }

    /// Independent route: every (K−1)-subset of all rows plus `Σπ = 1`,
    /// solved as a full K×K system.
    fn brute_force_vertices(k: usize, rows: &[Halfspace]) -> Vec<Vec<f64>> {
        let mut all: Vec<Halfspace> = (0..k)
            .map(|a| {
                let mut c = vec![0.0; k];
                c[a] = -1.0;
                Halfspace::new(c, 0.0)
            })
            .collect();
        all.extend(rows.iter().cloned());
        let mut out: Vec<Vec<f64>> = Vec::new();
        for subset in (0..all.len()).combinations(k - 1) {
            let mut m = DMatrix::zeros(k, k);
            let mut b = DVector::zeros(k);
            for (r, &i) in subset.iter().enumerate() {
                for c in 0..k {
                    m[(r, c)] = all[i].coeffs[c];
                }
                b[r] = all[i].rhs;
            }
            for c in 0..k {
                m[(k - 1, c)] = 1.0;
            }
            b[k - 1] = 1.0;
            let Some(x) = m.lu().solve(&b) else { continue };
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().any(|v| !v.is_finite()) {
                continue;
            }
            if all.iter().any(|h| h.excess(&x) > 1e-9) {
                continue;
            }
            if !out
                .iter()
                .any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-7))
            {
                out.push(x);
            }
        }
        out
    }

    fn same_vertex_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
        a.len() == b.len()
            && a.iter().all(|v| {
                b.iter()
                    .any(|w| v.iter().zip(w).all(|(x, y)| (x - y).abs() < 1e-7))
            })
    }

    fn has_point(poly: &FeasiblePolytope, p: &[f64]) -> bool {
        poly.vertices()
            .iter()
            .any(|v| v.point.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-9))
    }

    #[test]
    fn simplex_vertices_are_basis_vectors() {
        let poly = FeasiblePolytope::simplex(3).unwrap();
        assert_eq!(poly.num_vertices(), 3);
        for a in 0..3 {
            assert!(has_point(&poly, Policy::basis(3, a).weights()));
        }
        for i in 0..3 {
            assert_eq!(poly.neighbors(i).len(), 2);
        }
    }

    #[test]
    fn capped_first_arm_k3() {
        let rows = vec![Halfspace::new(vec![1.0, 0.0, 0.0], 0.5)];
        let poly = FeasiblePolytope::enumerate(3, rows.clone()).unwrap();
        let expected = brute_force_vertices(3, &rows);
        let got: Vec<Vec<f64>> = poly.vertices().iter().map(|v| v.point.clone()).collect();
        assert!(same_vertex_sets(&got, &expected));
        assert_eq!(got.len(), 4);
        for p in [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.5, 0.0, 0.5],
        ] {
            assert!(has_point(&poly, &p));
        }
    }

    #[test]
    fn setup1_vertex_enumeration_matches_oracle() {
        let rows = setup1_rows();
        let poly = FeasiblePolytope::enumerate(7, rows.clone()).unwrap();
        let got: Vec<Vec<f64>> = poly.vertices().iter().map(|v| v.point.clone()).collect();
        assert!(same_vertex_sets(&got, &brute_force_vertices(7, &rows)));
        assert!(has_point(&poly, &[0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn random_polytopes_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let k = rng.gen_range(3..6);
            let d = rng.gen_range(1..4);
            let rows: Vec<Halfspace> = (0..d)
                .map(|_| {
                    Halfspace::new(
                        (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        rng.gen_range(0.0..0.5),
                    )
                })
                .collect();
            let expected = brute_force_vertices(k, &rows);
            match FeasiblePolytope::enumerate(k, rows) {
                Ok(poly) => {
                    let got: Vec<Vec<f64>> =
                        poly.vertices().iter().map(|v| v.point.clone()).collect();
                    assert!(same_vertex_sets(&got, &expected));
                }
                Err(PexError::Infeasible) => assert!(expected.is_empty()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn empty_polytope_is_reported() {
        let rows = vec![Halfspace::new(vec![-1.0, 0.0, 0.0], -2.0)];
        assert!(matches!(
            FeasiblePolytope::enumerate(3, rows),
            Err(PexError::Infeasible)
        ));
    }

    #[test]
    fn arm_bound_is_enforced() {
        assert!(matches!(
            FeasiblePolytope::simplex(17),
            Err(PexError::TooManyArms { .. })
        ));
    }

    #[test]
    fn argmax_on_simplex_is_best_arm() {
        let poly = FeasiblePolytope::simplex(7).unwrap();
        let mu = [1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1];
        let (i, val) = poly.argmax_linear(&mu);
        assert_eq!(poly.vertex(i), Policy::basis(7, 0).weights());
        assert_eq!(val, 1.5);
    }

    #[test]
    fn argmax_setup1_hard() {
        let poly = FeasiblePolytope::enumerate(7, setup1_rows()).unwrap();
        let mu = [1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1];
        let (i, val) = poly.argmax_linear(&mu);
        assert_eq!(poly.vertex(i), &[0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]);
        assert!((val - 0.95).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        let poly = FeasiblePolytope::simplex(3).unwrap();
        let (i, _) = poly.argmax_linear(&[1.0, 1.0, 0.0]);
        let first = (0..3)
            .find(|&j| poly.vertex(j)[0] == 1.0 || poly.vertex(j)[1] == 1.0)
            .unwrap();
        assert_eq!(i, first);
    }

    #[test]
    fn r_good_sets() {
        let poly = FeasiblePolytope::enumerate(7, setup1_rows()).unwrap();
        let mu = [1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1];
        let good = poly.r_good_vertices(&mu, 0.0);
        assert_eq!(good.len(), 1);
        let good = poly.r_good_vertices(&mu, 0.01);
        assert_eq!(good.len(), 1);
        assert_eq!(poly.vertex(good[0]), &[0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]);
        // Vertex-value oracle: the runner-up is more than 0.01 away.
        let mut vals: Vec<f64> = poly.vertices().iter().map(|v| dot(&mu, &v.point)).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        assert!(vals[0] - vals[1] > 0.01);
        let all = poly.r_good_vertices(&mu, 10.0);
        assert_eq!(all.len(), poly.num_vertices());
    }

    #[test]
    fn projection_examples() {
        let simplex = FeasiblePolytope::simplex(2).unwrap();
        let p = simplex.project(&[2.0, 0.0]);
        assert!(p.converged);
        assert!((p.policy.weights()[0] - 1.0).abs() < 1e-9);
        assert!(p.policy.weights()[1].abs() < 1e-9);

        let capped =
            FeasiblePolytope::enumerate(3, vec![Halfspace::new(vec![1.0, 0.0, 0.0], 0.5)]).unwrap();
        let p = capped.project(&[1.0, 0.0, 0.0]);
        assert!(p.converged);
        for (got, want) in p.policy.weights().iter().zip([0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-7, "{:?}", p.policy);
        }

        let inside = [0.3, 0.3, 0.4];
        let p = capped.project(&inside);
        for (got, want) in p.policy.weights().iter().zip(inside) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn contains_examples() {
        let capped =
            FeasiblePolytope::enumerate(3, vec![Halfspace::new(vec![1.0, 0.0, 0.0], 0.5)]).unwrap();
        for v in capped.vertices() {
            assert!(capped.contains(&v.point, 1e-9));
        }
        assert!(!capped.contains(&[1.0, 0.0, 0.0], 1e-9));
        let a = capped.vertex(0);
        let b = capped.vertex(1);
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        assert!(capped.contains(&mid, 1e-9));
    }

    #[test]
    fn vertex_lp_dominates_projected_samples() {
        let poly = FeasiblePolytope::enumerate(7, setup1_rows()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let (_, best) = poly.argmax_linear(&c);
        let mut sample_best = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let p = poly.project(&x);
            assert!(poly.contains(p.policy.weights(), 1e-7));
            sample_best = sample_best.max(dot(&c, p.policy.weights()));
        }
        assert!(sample_best <= best + 1e-6);
    }

    #[test]
    fn hull_projection_agrees_with_dykstra() {
        let poly = FeasiblePolytope::enumerate(7, setup1_rows()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let a = poly.project(&x);
            assert!(a.converged);
            let b = poly.project_hull(&x);
            for (p, q) in a.policy.weights().iter().zip(&b) {
                assert!((p - q).abs() < 1e-6, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn adjacency_shares_active_rows() {
        let poly = FeasiblePolytope::enumerate(7, setup1_rows()).unwrap();
        for (i, nbrs) in poly.adjacency().iter().enumerate() {
            for &j in nbrs {
                let shared = poly.vertices()[i]
                    .active
                    .iter()
                    .filter(|r| poly.vertices()[j].active.contains(r))
                    .count();
                assert!(shared >= 5);
            }
        }
    }

    #[test]
    fn solve_basis_reproduces_vertices() {
        let poly = FeasiblePolytope::enumerate(7, setup1_rows()).unwrap();
        for v in poly.vertices() {
            let p = solve_basis(7, poly.constraints(), &v.basis).unwrap();
            for (a, b) in p.iter().zip(&v.point) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn random_rows(k: usize) -> impl Strategy<Value = Vec<Halfspace>> {
        prop::collection::vec(
            (prop::collection::vec(-1.0f64..1.0, k), 0.05f64..0.6),
            1..4,
        )
        .prop_map(|rows| rows.into_iter().map(|(c, b)| Halfspace::new(c, b)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adjacency_is_symmetric(rows in random_rows(5)) {
            if let Ok(poly) = FeasiblePolytope::enumerate(5, rows) {
                for (i, nbrs) in poly.adjacency().iter().enumerate() {
                    for &j in nbrs {
                        prop_assert!(poly.neighbors(j).contains(&i));
                    }
                }
            }
        }

        #[test]
        fn vertices_are_feasible(rows in random_rows(5)) {
            if let Ok(poly) = FeasiblePolytope::enumerate(5, rows) {
                for v in poly.vertices() {
                    prop_assert!(poly.contains(&v.point, 1e-9));
                }
            }
        }

        #[test]
        fn relaxed_rhs_keeps_vertices_inside(rows in random_rows(5), extra in 0.0f64..0.3) {
            let relaxed: Vec<Halfspace> = rows
                .iter()
                .map(|h| Halfspace::new(h.coeffs.clone(), h.rhs + extra))
                .collect();
            if let (Ok(tight), Ok(loose)) = (
                FeasiblePolytope::enumerate(5, rows),
                FeasiblePolytope::enumerate(5, relaxed),
            ) {
                for v in tight.vertices() {
                    prop_assert!(loose.contains(&v.point, 1e-9));
                }
            }
        }

        #[test]
        fn projection_is_feasible(rows in random_rows(4), x in prop::collection::vec(-1.0f64..2.0, 4)) {
            if let Ok(poly) = FeasiblePolytope::enumerate(4, rows) {
                let p = poly.project(&x);
                prop_assert!(p.converged);
                prop_assert!(poly.contains(p.policy.weights(), 1e-7));
                let exact = poly.project_hull(&x);
                let dp: f64 = p.policy.weights().iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                let de: f64 = exact.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                prop_assert!(dp <= de + 1e-6);
            }
        }
    }
}
