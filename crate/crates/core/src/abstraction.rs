//! State abstraction: PCA projection onto `k` dominant components followed by
//! quantization into `m` equal-width intervals per projected axis.
//!
//! Abstract cells carry signed indices. A vector below the profiled lower
//! bound gets a negative index and one above the upper bound gets an index
//! `>= m`, so the space outside the profiled box is addressable too.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Orthonormal basis of the `k` leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// `k` rows of length `D`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl Projection {
    pub fn new(mean: Vec<f64>, components: Vec<Vec<f64>>, explained_variance: Vec<f64>) -> Result<Self> {
        let p = Projection {
            mean,
            components,
            explained_variance,
        };
        p.validate()?;
        Ok(p)
    }

    /// Keeps the first `k` coordinates unchanged (zero mean, unit axes).
    pub fn axis_aligned(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::Config(format!("k = {k} must be in 1..={dim}")));
        }
        let components = (0..k)
            .map(|i| {
                let mut row = vec![0.0; dim];
                row[i] = 1.0;
                row
            })
            .collect();
        Projection::new(vec![0.0; dim], components, vec![0.0; k])
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        let k = self.components.len();
        if d == 0 || k == 0 || k > d {
            return Err(Error::Validation(format!("projection shape {k}x{d} is invalid")));
        }
        if self.explained_variance.len() != k {
            return Err(Error::Validation("explained variance length differs from k".into()));
        }
        if self.components.iter().any(|c| c.len() != d) {
            return Err(Error::Validation("component length differs from the mean".into()));
        }
        let all_finite = self
            .mean
            .iter()
            .chain(self.components.iter().flatten())
            .chain(&self.explained_variance)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Validation("projection has non-finite entries".into()));
        }
        for i in 0..k {
            for j in i..k {
                let dot = dot(&self.components[i], &self.components[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > ORTHONORMAL_TOL {
                    return Err(Error::Validation(format!(
                        "components {i} and {j} are not orthonormal (dot = {dot})"
                    )));
                }
            }
        }
        if self.explained_variance.iter().any(|v| *v < 0.0) || self.explained_variance.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation(
                "explained variance must be non-negative and non-increasing".into(),
            ));
        }
        Ok(())
    }

    /// `result_d = components_d · (s − mean)`
    pub fn project<T: Copy + Into<f64>>(&self, s: &[T]) -> Result<Vec<f64>> {
        if s.len() != self.mean.len() {
            return Err(Error::Validation(format!(
                "vector has dimension {}, projection expects {}",
                s.len(),
                self.mean.len()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(s.iter().zip(&self.mean))
                    .map(|(w, (v, mu))| w * ((*v).into() - mu))
                    .sum()
            })
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a PCA projection from an `N x D` sample matrix given as rows.
pub fn fit_projection<R, T>(rows: &[R], k: usize) -> Result<Projection>
where
    R: AsRef<[T]>,
    T: Copy + Into<f64>,
{
    fit_projection_rows(rows.iter().map(AsRef::as_ref), k)
}

/// Same as [`fit_projection`] over any re-iterable row source. Two passes
/// are made: one for the mean, one for the covariance.
pub fn fit_projection_rows<'a, I, T>(rows: I, k: usize) -> Result<Projection>
where
    I: Iterator<Item = &'a [T]> + Clone,
    T: Copy + Into<f64> + 'a,
{
    let mut n = 0usize;
    let mut dim = None;
    let mut sum: Vec<f64> = Vec::new();
    for row in rows.clone() {
        let d = *dim.get_or_insert_with(|| {
            sum = vec![0.0; row.len()];
            row.len()
        });
        if row.len() != d {
            return Err(Error::Validation(format!(
                "row {n} has dimension {}, expected {d}",
                row.len()
            )));
        }
        for (acc, v) in sum.iter_mut().zip(row) {
            let v: f64 = (*v).into();
            if !v.is_finite() {
                return Err(Error::Validation(format!("row {n} has a non-finite value")));
            }
            *acc += v;
        }
        n += 1;
    }
    let d = dim.unwrap_or(0);
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 samples, got {n}")));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::Config(format!("k = {k} must be in 1..={}", n.min(d))));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();

    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for row in rows {
        for ((c, v), mu) in centered.iter_mut().zip(row).zip(&mean) {
            *c = (*v).into() - mu;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let dst = &mut cov[i * d..(i + 1) * d];
            for j in i..d {
                dst[j] += ci * centered[j];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    let cov = DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        cov[a * d + b] * scale
    });

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        apply_sign_convention(&mut v);
        components.push(v);
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Projection::new(mean, components, explained_variance)
}

/// Flips `v` so that its entry of largest magnitude (first one on ties) is
/// positive.
pub fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `m` equal-width partitions per axis between per-axis bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub k: usize,
    pub m: usize,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl GridConfig {
    pub fn new(m: usize, lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        let g = GridConfig { k: lb.len(), m, lb, ub };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Config("partitions m must be >= 1".into()));
        }
        if self.k == 0 || self.lb.len() != self.k || self.ub.len() != self.k {
            return Err(Error::Validation("grid bounds must have length k >= 1".into()));
        }
        for d in 0..self.k {
            if !(self.lb[d].is_finite() && self.ub[d].is_finite() && self.lb[d] < self.ub[d]) {
                return Err(Error::Validation(format!(
                    "axis {d}: need finite lb < ub, got [{}, {}]",
                    self.lb[d], self.ub[d]
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self, d: usize) -> f64 {
        (self.ub[d] - self.lb[d]) / self.m as f64
    }

    /// Lower edge of interval `i` on axis `d`; edge `m` is the upper bound.
    pub fn edge(&self, d: usize, i: i64) -> f64 {
        if i == self.m as i64 {
            self.ub[d]
        } else {
            self.lb[d] + i as f64 * self.width(d)
        }
    }

    fn axis_index(&self, d: usize, v: f64) -> i32 {
        let m = self.m as i64;
        if v == self.ub[d] {
            return (m - 1) as i32;
        }
        let idx = ((v - self.lb[d]) / self.width(d)).floor();
        if idx.abs() > (i32::MAX - 1) as f64 {
            return idx.clamp(i32::MIN as f64, i32::MAX as f64) as i32;
        }
        // settle rounding at interval edges so the result agrees with the
        // explicit half-open intervals [edge(i), edge(i+1))
        let mut i = idx as i64;
        while v < self.edge(d, i) {
            i -= 1;
        }
        while v >= self.edge(d, i + 1) {
            i += 1;
        }
        i as i32
    }

    /// Maps a projected vector to its grid cell.
    pub fn cell(&self, v: &[f64]) -> Vec<i32> {
        debug_assert_eq!(v.len(), self.k);
        v.iter().enumerate().map(|(d, x)| self.axis_index(d, *x)).collect()
    }

    pub fn abstract_state(&self, v: &[f64]) -> AbstractState {
        AbstractState(self.cell(v))
    }

    /// True if every index lies in `[0, m)`.
    pub fn in_bounds(&self, cell: &[i32]) -> bool {
        cell.iter().all(|i| *i >= 0 && (*i as usize) < self.m)
    }
}

/// Bounds each projected column by its min and max. A degenerate axis
/// (min == max) gets `ub = lb + 1`.
pub fn fit_grid<R: AsRef<[f64]>>(projected: &[R], m: usize) -> Result<GridConfig> {
    if m < 1 {
        return Err(Error::Config("partitions m must be >= 1".into()));
    }
    let first = projected
        .first()
        .ok_or_else(|| Error::Validation("cannot fit a grid to zero points".into()))?
        .as_ref();
    let k = first.len();
    let mut lb = first.to_vec();
    let mut ub = first.to_vec();
    for (n, row) in projected.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != k {
            return Err(Error::Validation(format!(
                "row {n} has dimension {}, expected {k}",
                row.len()
            )));
        }
        for d in 0..k {
            if !row[d].is_finite() {
                return Err(Error::Validation(format!("row {n} has a non-finite value")));
            }
            lb[d] = lb[d].min(row[d]);
            ub[d] = ub[d].max(row[d]);
        }
    }
    for d in 0..k {
        if lb[d] == ub[d] {
            ub[d] = lb[d] + 1.0;
        }
    }
    GridConfig::new(m, lb, ub)
}

macro_rules! cell_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub Vec<i32>);

        impl $name {
            pub fn indices(&self) -> &[i32] {
                &self.0
            }

            pub fn dims(&self) -> usize {
                self.0.len()
            }
        }

        impl From<Vec<i32>> for $name {
            fn from(v: Vec<i32>) -> Self {
                $name(v)
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write_indices(f, &self.0)
            }
        }
    };
}

pub(crate) fn write_indices(f: &mut impl std::fmt::Write, idx: &[i32]) -> std::fmt::Result {
    for (i, v) in idx.iter().enumerate() {
        if i > 0 {
            f.write_char(',')?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

cell_type!(
    /// Grid cell of a projected hidden state.
    AbstractState
);
cell_type!(
    /// Grid cell of a projected input frame.
    AbstractInput
);

/// A fitted projection together with its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub projection: Projection,
    pub grid: GridConfig,
}

impl Abstraction {
    pub fn new(projection: Projection, grid: GridConfig) -> Result<Self> {
        if projection.output_dim() != grid.k {
            return Err(Error::Validation(format!(
                "projection yields {} dims, grid has {}",
                projection.output_dim(),
                grid.k
            )));
        }
        Ok(Abstraction { projection, grid })
    }

    /// Fits PCA to `k` dims, then a grid with `m` partitions over the
    /// projected samples.
    pub fn fit<'a, I, T>(rows: I, k: usize, m: usize) -> Result<Self>
    where
        I: Iterator<Item = &'a [T]> + Clone,
        T: Copy + Into<f64> + 'a,
    {
        if m < 1 {
            return Err(Error::Config("partitions m must be >= 1".into()));
        }
        let projection = fit_projection_rows(rows.clone(), k)?;
        let projected = rows.map(|r| projection.project(r)).collect::<Result<Vec<_>>>()?;
        let grid = fit_grid(&projected, m)?;
        Abstraction::new(projection, grid)
    }

    pub fn input_dim(&self) -> usize {
        self.projection.input_dim()
    }

    pub fn cell<T: Copy + Into<f64>>(&self, v: &[T]) -> Result<Vec<i32>> {
        Ok(self.grid.cell(&self.projection.project(v)?))
    }
}

/// Manhattan distance between two index tuples.
pub fn distance(a: &AbstractState, b: &AbstractState) -> Result<u64> {
    if a.dims() != b.dims() {
        return Err(Error::Validation(format!(
            "cannot compare cells of dimension {} and {}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (*x as i64 - *y as i64).unsigned_abs())
        .sum())
}

/// Layers of the lattice around `visited`: layer `i` (for `1..=k_steps`)
/// holds every cell whose minimal Manhattan distance to `visited` is `i`.
pub fn boundary_region(
    visited: &BTreeSet<AbstractState>,
    k_steps: usize,
) -> Result<BTreeMap<usize, BTreeSet<AbstractState>>> {
    let dims = match visited.first() {
        Some(s) => s.dims(),
        None => return Err(Error::Validation("boundary region of an empty set".into())),
    };
    if visited.iter().any(|s| s.dims() != dims) {
        return Err(Error::Validation("visited cells have mixed dimensions".into()));
    }
    let mut layers: BTreeMap<usize, BTreeSet<AbstractState>> = (1..=k_steps).map(|i| (i, BTreeSet::new())).collect();
    let mut seen: BTreeSet<AbstractState> = visited.clone();
    let mut frontier: VecDeque<(AbstractState, usize)> = visited.iter().map(|s| (s.clone(), 0)).collect();
    while let Some((cell, depth)) = frontier.pop_front() {
        if depth == k_steps {
            continue;
        }
        for d in 0..dims {
            for delta in [-1i32, 1] {
                let Some(v) = cell.0[d].checked_add(delta) else {
                    continue;
                };
                let mut next = cell.0.clone();
                next[d] = v;
                let next = AbstractState(next);
                if seen.insert(next.clone()) {
                    layers.get_mut(&(depth + 1)).expect("layer").insert(next.clone());
                    frontier.push_back((next, depth + 1));
                }
            }
        }
    }
    Ok(layers)
}
