//! Ground-truth network construction: Laplacians, ground-node reduction,
//! lattice-structured difference matrices and random base matrices.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, SymmetricMatrix};
use crate::rng::rng_from_seed;

/// Diagonal slack added on top of the absolute row sum in [`grid_delta`].
pub const DELTA_DIAGONAL_MARGIN: f64 = 0.1;
/// Smallest admissible `|eigenvalue|` of either Laplacian in a scenario.
pub const INVERTIBILITY_MARGIN: f64 = 1e-6;

/// Undirected graph on nodes `0..node_count` with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Builds the graph, merging parallel edges by summing their weights.
    /// Edges are stored with `i < j`, sorted.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidInput("graph needs at least one node".into()));
        }
        let mut merged: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for (i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop on node {i}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
        }
        Ok(WeightedGraph {
            node_count,
            edges: merged.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}

/// Weighted Laplacian: off-diagonals `-a_ij`, diagonal the weighted degree,
/// so every row sums to zero and the matrix is PSD.
pub fn laplacian_from_graph(g: &WeightedGraph) -> SymmetricMatrix {
    let n = g.node_count;
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, w) in &g.edges {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    SymmetricMatrix::symmetrize(l).expect("square by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionMode {
    /// Principal submatrix without the ground row and column (grounded Laplacian).
    #[default]
    Delete,
    /// Schur complement onto the remaining nodes.
    Kron,
}

/// Removes the ground node from a Laplacian.
///
/// `Delete` returns the grounded Laplacian, which is positive definite for
/// a connected graph. `Kron` eliminates the ground node by Schur complement;
/// the result is again a Laplacian (zero row sums) of the reduced graph and
/// is therefore only positive semidefinite, so connectivity is checked on its
/// second-smallest eigenvalue instead.
pub fn reduce_ground_node(l: &SymmetricMatrix, ground: usize, mode: ReductionMode) -> Result<SymmetricMatrix> {
    let n = l.dim();
    if ground >= n {
        return Err(Error::InvalidInput(format!(
            "ground node {ground} out of range for {n} nodes"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("cannot reduce a single-node graph".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|&k| k != ground).collect();
    let m = keep.len();
    let mut reduced = DMatrix::from_fn(m, m, |i, j| l[(keep[i], keep[j])]);
    match mode {
        ReductionMode::Delete => {
            let reduced = SymmetricMatrix::symmetrize(reduced)?;
            let eig = eig_sym(&reduced)?;
            if eig.min_value() <= 1e-12 {
                return Err(Error::ReductionFailed {
                    min_eigenvalue: eig.min_value(),
                });
            }
            Ok(reduced)
        }
        ReductionMode::Kron => {
            let pivot = l[(ground, ground)];
            if pivot <= 1e-12 {
                return Err(Error::ReductionFailed { min_eigenvalue: pivot });
            }
            for i in 0..m {
                for j in 0..m {
                    reduced[(i, j)] -= l[(keep[i], ground)] * l[(ground, keep[j])] / pivot;
                }
            }
            let reduced = SymmetricMatrix::symmetrize(reduced)?;
            let eig = eig_sym(&reduced)?;
            let fiedler = if m > 1 { eig.values[1] } else { eig.values[0] };
            if eig.min_value() < -1e-10 * eig.max_value().max(1.0) || (m > 1 && fiedler <= 1e-12) {
                return Err(Error::ReductionFailed {
                    min_eigenvalue: fiedler,
                });
            }
            Ok(reduced)
        }
    }
}

/// Sign pattern of the off-diagonal entries of a generated difference matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignMode {
    #[default]
    Mixed,
    Positive,
}

/// Closed magnitude interval `[min, max]` for random edge weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub min: f64,
    pub max: f64,
}

impl WeightRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0) || !(max >= min) || !max.is_finite() {
            return Err(Error::param(
                "weight_range",
                format!("need 0 < w_min <= w_max, got ({min}, {max})"),
            ));
        }
        Ok(WeightRange { min, max })
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

impl Default for WeightRange {
    fn default() -> Self {
        WeightRange { min: 0.4, max: 1.0 }
    }
}

/// Rows and columns of the most nearly square lattice with `p` nodes.
pub fn lattice_shape(p: usize) -> Result<(usize, usize)> {
    let mut rows = (p as f64).sqrt() as usize;
    while rows > 1 && !p.is_multiple_of(rows) {
        rows -= 1;
    }
    if rows < 2 {
        return Err(Error::param(
            "p",
            format!("{p} nodes cannot be arranged on a lattice with at least two rows"),
        ));
    }
    Ok((rows, p / rows))
}

/// Undirected 4-neighbour edges of a `rows × cols` lattice; node `(r, c)` has
/// index `r·cols + c`.
pub fn lattice_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            if c + 1 < cols {
                edges.push((k, k + 1));
            }
            if r + 1 < rows {
                edges.push((k, k + cols));
            }
        }
    }
    edges
}

/// Difference matrix supported on a square `√p × √p` lattice.
pub fn grid_delta(p: usize, weights: WeightRange, sign: SignMode, seed: u64) -> Result<SymmetricMatrix> {
    let k = (p as f64).sqrt().round() as usize;
    if k < 2 || k * k != p {
        return Err(Error::param(
            "p",
            format!("grid difference needs a perfect square p = k*k with k >= 2, got {p}"),
        ));
    }
    grid_delta_rect(k, k, weights, sign, seed)
}

/// Difference matrix supported on a `rows × cols` lattice: off-diagonal
/// lattice entries uniform in `±[min, max]`, diagonal set to the absolute
/// off-diagonal row sum plus [`DELTA_DIAGONAL_MARGIN`].
pub fn grid_delta_rect(
    rows: usize,
    cols: usize,
    weights: WeightRange,
    sign: SignMode,
    seed: u64,
) -> Result<SymmetricMatrix> {
    if rows < 1 || cols < 1 || rows * cols < 2 {
        return Err(Error::param("lattice", format!("degenerate {rows}x{cols} lattice")));
    }
    let p = rows * cols;
    let mut rng = rng_from_seed(seed);
    let mut delta = DMatrix::zeros(p, p);
    for (i, j) in lattice_edges(rows, cols) {
        let magnitude = weights.sample(&mut rng);
        let value = match sign {
            SignMode::Positive => magnitude,
            SignMode::Mixed if rng.random_bool(0.5) => magnitude,
            SignMode::Mixed => -magnitude,
        };
        delta[(i, j)] = value;
        delta[(j, i)] = value;
    }
    set_dominant_diagonal(&mut delta, DELTA_DIAGONAL_MARGIN);
    SymmetricMatrix::symmetrize(delta)
}

fn set_dominant_diagonal(m: &mut DMatrix<f64>, margin: f64) {
    for i in 0..m.nrows() {
        let row_sum: f64 = (0..m.ncols()).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        m[(i, i)] = row_sum + margin;
    }
}

/// Random symmetric matrix with off-diagonal density `density` (each
/// unordered pair kept with that probability, weight uniform in `±[0.5, 1]`)
/// and a diagonal making it strictly diagonally dominant by `margin`, so
/// every eigenvalue is at least `margin`.
pub fn random_base_matrix(p: usize, density: f64, margin: f64, seed: u64) -> Result<SymmetricMatrix> {
    if p == 0 {
        return Err(Error::param("p", "must be positive"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::param("density", format!("must lie in (0, 1], got {density}")));
    }
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::param("margin", format!("must be positive, got {margin}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut b = DMatrix::zeros(p, p);
    for j in 1..p {
        for i in 0..j {
            if density < 1.0 && !rng.random_bool(density) {
                continue;
            }
            let magnitude = rng.random_range(0.5..=1.0);
            let value = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            b[(i, j)] = value;
            b[(j, i)] = value;
        }
    }
    set_dominant_diagonal(&mut b, margin);
    SymmetricMatrix::symmetrize(b)
}

/// Random symmetric positive definite matrix with eigenvalues log-spaced
/// between 1 and `condition`, in a Haar-random orthonormal basis.
pub fn random_pd_matrix(p: usize, condition: f64, seed: u64) -> Result<SymmetricMatrix> {
    if p == 0 {
        return Err(Error::param("p", "must be positive"));
    }
    if !(condition >= 1.0) || !condition.is_finite() {
        return Err(Error::param("condition", format!("must be >= 1, got {condition}")));
    }
    let mut rng = rng_from_seed(seed);
    let gaussian: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let q = gaussian.qr().q();
    let spectrum: Vec<f64> = (0..p)
        .map(|k| {
            let t = if p == 1 { 0.0 } else { k as f64 / (p - 1) as f64 };
            condition.powf(t)
        })
        .collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum));
    SymmetricMatrix::symmetrize(&q * d * q.transpose())
}

/// Largest number of off-diagonal nonzeros in any row.
pub fn max_degree(m: &DMatrix<f64>) -> usize {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).filter(|&j| j != i && m[(i, j)] != 0.0).count())
        .max()
        .unwrap_or(0)
}

/// A pair of ground-truth networks, their injection covariances and the
/// true difference `b2 - b1`.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    b1: SymmetricMatrix,
    b2: SymmetricMatrix,
    delta_true: SymmetricMatrix,
    sigma_x1: SymmetricMatrix,
    sigma_x2: SymmetricMatrix,
    seed: u64,
}

impl NetworkScenario {
    pub fn b1(&self) -> &SymmetricMatrix {
        &self.b1
    }
    pub fn b2(&self) -> &SymmetricMatrix {
        &self.b2
    }
    pub fn delta_true(&self) -> &SymmetricMatrix {
        &self.delta_true
    }
    pub fn sigma_x1(&self) -> &SymmetricMatrix {
        &self.sigma_x1
    }
    pub fn sigma_x2(&self) -> &SymmetricMatrix {
        &self.sigma_x2
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn dim(&self) -> usize {
        self.b1.dim()
    }
}

/// Checks and packages a scenario with `b2 = b1 + delta`.
pub fn assemble_scenario(
    b1: SymmetricMatrix,
    delta: SymmetricMatrix,
    sigma_x1: SymmetricMatrix,
    sigma_x2: SymmetricMatrix,
    seed: u64,
) -> Result<NetworkScenario> {
    let p = b1.dim();
    for (name, m) in [("delta", &delta), ("sigma_x1", &sigma_x1), ("sigma_x2", &sigma_x2)] {
        if m.dim() != p {
            return Err(Error::InvalidInput(format!(
                "{name} is {0}x{0}, expected {p}x{p}",
                m.dim()
            )));
        }
    }
    for (name, sigma) in [("sigma_x1", &sigma_x1), ("sigma_x2", &sigma_x2)] {
        let eig = eig_sym(sigma)?;
        if crate::linalg::check_pd(&eig).is_err() {
            return Err(Error::InvalidInput(format!(
                "{name} is not positive definite (min eigenvalue {:e})",
                eig.min_value()
            )));
        }
    }
    let b2 = b1.add(&delta)?;
    for b in [&b1, &b2] {
        let eig = eig_sym(b)?;
        let smallest = eig.values.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
        if smallest < INVERTIBILITY_MARGIN {
            return Err(Error::NearSingularScenario {
                min_abs_eigenvalue: smallest,
            });
        }
    }
    Ok(NetworkScenario {
        b1,
        b2,
        delta_true: delta,
        sigma_x1,
        sigma_x2,
        seed,
    })
}
