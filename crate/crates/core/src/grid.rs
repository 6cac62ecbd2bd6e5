//! Periodic uniform grid on the unit torus and the discrete calculus built on it.
//!
//! Every derivative is the second-order centered difference
//! `(f[i+1] - f[i-1]) / 2h` along one axis with periodic wrap. Because that
//! stencil is antisymmetric, `divergence` is exactly minus the adjoint of
//! `gradient` under the cell-sum inner product, and `laplacian` is defined as
//! their composition (a wide `(f[i+2] - 2f[i] + f[i-2]) / 4h^2` stencil per
//! axis). Discrete integration by parts therefore holds to roundoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::map_cells;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 points per axis, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of cells, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Linear stride of `axis`; axis 0 is contiguous.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    pub fn index_of(&self, cell: [usize; 3]) -> usize {
        (0..self.dim).map(|a| (cell[a] % self.n) * self.stride(a)).sum()
    }

    pub fn cell_of(&self, idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = (idx / self.stride(a)) % self.n;
        }
        c
    }

    /// Node coordinates `x_a = i_a h` in `[0,1)`; unused axes are 0.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let c = self.cell_of(idx);
        let h = self.spacing();
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Index of the cell `offset` steps along `axis` from `idx`, wrapping.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let s = self.stride(axis);
        let n = self.n as isize;
        let c = ((idx / s) % self.n) as isize;
        let shifted = (c + offset).rem_euclid(n);
        (idx as isize + (shifted - c) * s as isize) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample `f` at the grid nodes.
    pub fn from_fn<F>(grid: PeriodicGrid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync + Send,
    {
        Self::from_vec(grid, map_cells(grid.len(), |i| f(grid.coords(i))))
    }

    /// Fill by linear cell index.
    pub fn from_fn_index<F>(grid: PeriodicGrid, f: F) -> Self
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        Self::from_vec(grid, map_cells(grid.len(), f))
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let v = &self.values;
        Self::from_vec(self.grid, map_cells(v.len(), |i| f(v[i])))
    }

    pub fn zip_map<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        debug_assert_eq!(self.grid, other.grid);
        let (a, b) = (&self.values, &other.values);
        Self::from_vec(self.grid, map_cells(a.len(), |i| f(a[i], b[i])))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a / b)
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        for (y, &xi) in self.values.iter_mut().zip(&x.values) {
            *y += alpha * xi;
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Cell of the smallest value (first one on ties).
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.values.iter().enumerate() {
            if x < self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|x| !x.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&x| x >= 0.0)
    }

    /// Fails with the first cell that is negative, or not strictly positive
    /// when `strict` is set.
    pub fn check_density(&self, field: &'static str, t: f64, strict: bool) -> Result<()> {
        if let Some(cell) = self.first_non_finite() {
            return Err(Error::NumericalBlowup { field, cell, t });
        }
        let bad = self
            .values
            .iter()
            .position(|&x| if strict { x <= 0.0 } else { x < 0.0 });
        match bad {
            Some(cell) => Err(Error::Positivity {
                field,
                cell,
                value: self.values[cell],
                t,
            }),
            None => Ok(()),
        }
    }

    /// `g[i] = f[i - k e_axis]`.
    pub fn shifted(&self, axis: usize, k: isize) -> Self {
        let g = self.grid;
        let v = &self.values;
        Self::from_vec(g, map_cells(v.len(), |i| v[g.neighbor(i, axis, -k)]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: PeriodicGrid,
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        let grid = comps
            .first()
            .map(|c| c.grid())
            .ok_or_else(|| Error::InvalidGrid("vector field needs components".into()))?;
        if comps.len() != grid.dim() {
            return Err(Error::InvalidGrid(format!(
                "vector field on a {}-d grid needs {} components, got {}",
                grid.dim(),
                grid.dim(),
                comps.len()
            )));
        }
        if comps.iter().any(|c| c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, comps })
    }

    pub(crate) fn from_comps(grid: PeriodicGrid, comps: Vec<ScalarField>) -> Self {
        debug_assert_eq!(comps.len(), grid.dim());
        Self { grid, comps }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, &[0.0; 3])
    }

    /// Uniform vector; extra entries of `c` beyond `dim` are ignored.
    pub fn constant(grid: PeriodicGrid, c: &[f64]) -> Self {
        let comps = (0..grid.dim())
            .map(|a| ScalarField::constant(grid, c.get(a).copied().unwrap_or(0.0)))
            .collect();
        Self { grid, comps }
    }

    pub fn from_fn<F>(grid: PeriodicGrid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync + Send,
    {
        let comps = (0..grid.dim())
            .map(|a| ScalarField::from_fn(grid, |x| f(x)[a]))
            .collect();
        Self { grid, comps }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, a: usize) -> &ScalarField {
        &self.comps[a]
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    pub fn map_comps<F>(&self, f: F) -> Self
    where
        F: Fn(&ScalarField) -> ScalarField,
    {
        Self::from_comps(self.grid, self.comps.iter().map(f).collect())
    }

    pub fn zip_comps<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(&ScalarField, &ScalarField) -> ScalarField,
    {
        Self::from_comps(
            self.grid,
            self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_comps(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_comps(other, ScalarField::sub)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_comps(|f| f.scale(c))
    }

    /// Multiply every component by a scalar field.
    pub fn weighted(&self, w: &ScalarField) -> Self {
        self.map_comps(|f| f.mul(w))
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut acc = self.comps[0].mul(&other.comps[0]);
        for (a, b) in self.comps.iter().zip(&other.comps).skip(1) {
            acc = acc.zip_map(&a.mul(b), |x, y| x + y);
        }
        acc
    }

    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_sq().max().max(0.0).sqrt()
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.comps.iter().filter_map(|c| c.first_non_finite()).min()
    }

    pub fn shifted(&self, axis: usize, k: isize) -> Self {
        self.map_comps(|f| f.shifted(axis, k))
    }
}

/// `dim x dim` field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: PeriodicGrid,
    comps: Vec<ScalarField>,
    symmetric: bool,
}

impl TensorField {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn comp(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.grid.dim() + j]
    }

    pub fn transpose(&self) -> Self {
        let d = self.grid.dim();
        let comps = (0..d * d)
            .map(|k| self.comps[(k % d) * d + k / d].clone())
            .collect();
        Self {
            grid: self.grid,
            comps,
            symmetric: self.symmetric,
        }
    }

    pub fn trace(&self) -> ScalarField {
        let d = self.grid.dim();
        let mut acc = self.comp(0, 0).clone();
        for a in 1..d {
            acc = acc.add(self.comp(a, a));
        }
        acc
    }

    /// Cellwise Frobenius norm squared, `sum_ij T_ij^2`.
    pub fn norm_sq(&self) -> ScalarField {
        let mut acc = self.comps[0].mul(&self.comps[0]);
        for c in &self.comps[1..] {
            acc = acc.zip_map(&c.mul(c), |x, y| x + y);
        }
        acc
    }

    pub fn weighted(&self, w: &ScalarField) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().map(|c| c.mul(w)).collect(),
            symmetric: self.symmetric,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect(),
            symmetric: self.symmetric && other.symmetric,
        }
    }

    fn build<F>(grid: PeriodicGrid, symmetric: bool, f: F) -> Self
    where
        F: Fn(usize, usize) -> ScalarField,
    {
        let d = grid.dim();
        let comps = (0..d * d).map(|k| f(k / d, k % d)).collect();
        Self {
            grid,
            comps,
            symmetric,
        }
    }
}

pub(crate) fn tensor_from_comps(
    grid: PeriodicGrid,
    comps: Vec<ScalarField>,
    symmetric: bool,
) -> TensorField {
    debug_assert_eq!(comps.len(), grid.dim() * grid.dim());
    TensorField {
        grid,
        comps,
        symmetric,
    }
}

/// Centered periodic difference along one axis.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let v = f.values();
    let s = g.stride(axis);
    let n = g.points_per_axis();
    let inv_2h = 0.5 * n as f64;
    let out = map_cells(v.len(), |i| {
        let c = (i / s) % n;
        let ip = if c + 1 == n { i + s - n * s } else { i + s };
        let im = if c == 0 { i + (n - 1) * s } else { i - s };
        (v[ip] - v[im]) * inv_2h
    });
    ScalarField::from_vec(g, out)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid();
    VectorField::from_comps(g, (0..g.dim()).map(|a| partial(f, a)).collect())
}

pub fn divergence(field: &VectorField) -> ScalarField {
    let mut acc = partial(field.comp(0), 0);
    for a in 1..field.dim() {
        acc = acc.add(&partial(field.comp(a), a));
    }
    acc
}

/// `divergence(gradient(f))`, composed literally.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    divergence(&gradient(f))
}

/// `J_ij = d_i v_j`.
pub fn jacobian(v: &VectorField) -> TensorField {
    let g = v.grid();
    let d = g.dim();
    let parts: Vec<ScalarField> = (0..d * d).map(|k| partial(v.comp(k % d), k / d)).collect();
    TensorField::build(g, false, |i, j| parts[i * d + j].clone())
}

fn split_jacobian(j: &TensorField, sign: f64, symmetric: bool) -> TensorField {
    TensorField::build(j.grid(), symmetric, |a, b| {
        j.comp(a, b).zip_map(j.comp(b, a), |x, y| 0.5 * (x + sign * y))
    })
}

/// `D(v)_ij = (d_i v_j + d_j v_i) / 2`.
pub fn deformation(v: &VectorField) -> TensorField {
    split_jacobian(&jacobian(v), 1.0, true)
}

/// `A(v)_ij = (d_i v_j - d_j v_i) / 2`.
pub fn antisym(v: &VectorField) -> TensorField {
    split_jacobian(&jacobian(v), -1.0, false)
}

/// Row divergence, `(div T)_i = sum_j d_j T_ij`.
pub fn tensor_divergence(t: &TensorField) -> VectorField {
    let g = t.grid();
    let d = g.dim();
    let comps = (0..d)
        .map(|i| {
            let mut acc = partial(t.comp(i, 0), 0);
            for j in 1..d {
                acc = acc.add(&partial(t.comp(i, j), j));
            }
            acc
        })
        .collect();
    VectorField::from_comps(g, comps)
}

/// `(a . grad) f`, the directional derivative of `f` along `a`.
pub fn directional(a: &VectorField, f: &ScalarField) -> ScalarField {
    a.dot(&gradient(f))
}

/// Cell sum times cell volume. Sequential so the result does not depend on
/// the execution mode.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

/// `(integral |f|^p)^(1/p)`.
pub fn lp_norm(f: &ScalarField, p: f64) -> f64 {
    integrate(&f.map(|x| x.abs().powf(p))).powf(1.0 / p)
}
