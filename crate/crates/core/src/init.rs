//! Mollified initial data.
//!
//! Rough initial data `(n0, m0, rho0, m0~)` is smoothed with a periodized
//! Gaussian `j_delta` and lifted away from vacuum before it is handed to the
//! regularized system. The kernel must satisfy
//!
//! * unit mass,
//! * `0 <= j_delta <= delta^(-1/(2 gamma0))`,
//! * `|grad j_delta| <= C delta^(-1/8) j_delta` cellwise,
//!
//! all of which are checked when the kernel is built.

use serde::Serialize;

use crate::diagnostics::relative_entropy;
use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, lp_norm, PeriodicGrid, ScalarField, VectorField};
use crate::model::{ModelParams, State};
use crate::par::map_cells;

/// Largest admissible witnessed constant in the kernel gradient bound.
pub const GRADIENT_CONSTANT: f64 = 1.0;

/// Default small exponent of the momentum weighting.
pub const DEFAULT_ETA0: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct MollifierKernel {
    delta: f64,
    sigma: f64,
    /// One-dimensional factor; the kernel is its tensor product.
    profile: Vec<f64>,
    values: ScalarField,
    witnessed_constant: f64,
}

impl MollifierKernel {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn width(&self) -> f64 {
        self.sigma
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.values.grid()
    }

    /// Smallest `C` with `|grad j| <= C delta^(-1/8) j` on this grid.
    pub fn witnessed_constant(&self) -> f64 {
        self.witnessed_constant
    }

    pub fn sup_bound(&self, gamma0: f64) -> f64 {
        self.delta.powf(-1.0 / (2.0 * gamma0))
    }
}

/// Kernel width used for a given `delta`.
pub fn mollifier_width(delta: f64, dim: usize, gamma0: f64) -> f64 {
    delta
        .powf(1.0 / (2.0 * gamma0 * dim as f64))
        .max(delta.powf(1.0 / 16.0))
}

/// Periodized Gaussian of width `mollifier_width(delta, ..)`, renormalized to
/// unit discrete mass, with every kernel constraint verified.
pub fn build_mollifier(delta: f64, grid: PeriodicGrid, gamma0: f64) -> Result<MollifierKernel> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ConstraintViolation(format!(
            "mollifier needs delta in (0,1), got {delta}"
        )));
    }
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(Error::ConstraintViolation(format!("bad gamma0 {gamma0}")));
    }
    let dim = grid.dim();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let sigma = mollifier_width(delta, dim, gamma0);

    // images within 8 sigma plus one period
    let images = (8.0 * sigma).ceil() as i64 + 1;
    let mut profile: Vec<f64> = (0..n)
        .map(|i| {
            let x = i.min(n - i) as f64 * h;
            (-images..=images)
                .map(|m| {
                    let r = x - m as f64;
                    (-r * r / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .collect();
    let mass: f64 = profile.iter().sum::<f64>() * h;
    for p in &mut profile {
        *p /= mass;
    }

    let values = ScalarField::from_fn_index(grid, |i| {
        let c = grid.cell_of(i);
        (0..dim).map(|a| profile[c[a]]).product()
    });

    let total = integrate(&values);
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::ConstraintViolation(format!(
            "kernel mass {total} is not 1"
        )));
    }
    let sup = delta.powf(-1.0 / (2.0 * gamma0));
    if values.min() < 0.0 || values.max() > sup {
        return Err(Error::ConstraintViolation(format!(
            "kernel range [{}, {}] exceeds [0, {sup}]",
            values.min(),
            values.max()
        )));
    }
    let scale = delta.powf(-1.0 / 8.0);
    let grad_norm = gradient(&values).norm_sq();
    let witnessed_constant = values
        .values()
        .iter()
        .zip(grad_norm.values())
        .map(|(&j, &g2)| g2.sqrt() / (scale * j))
        .fold(0.0, f64::max);
    if !witnessed_constant.is_finite() || witnessed_constant > GRADIENT_CONSTANT {
        return Err(Error::ConstraintViolation(format!(
            "kernel gradient ratio {witnessed_constant} exceeds {GRADIENT_CONSTANT}; grid too coarse for width {sigma}"
        )));
    }
    Ok(MollifierKernel {
        delta,
        sigma,
        profile,
        values,
        witnessed_constant,
    })
}

/// Periodic discrete convolution `(f * j)(x_i) = sum_k f(x_k) j(x_i - x_k) h^d`,
/// applied axis by axis.
pub fn convolve(f: &ScalarField, j: &MollifierKernel) -> ScalarField {
    let g = f.grid();
    debug_assert_eq!(g, j.grid());
    let n = g.points_per_axis();
    let h = g.spacing();
    let mut cur = f.clone();
    for axis in 0..g.dim() {
        let s = g.stride(axis);
        let src = cur.values();
        let out = map_cells(g.len(), |i| {
            let c = (i / s) % n;
            let base = i - c * s;
            let mut acc = 0.0;
            for k in 0..n {
                let lag = (c + n - k) % n;
                acc += src[base + k * s] * j.profile[lag];
            }
            acc * h
        });
        cur = ScalarField::from_vec(g, out);
    }
    cur
}

/// Rough initial data before mollification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInitialData {
    pub n0: ScalarField,
    /// Particle momentum `n0 v0`.
    pub m0: VectorField,
    pub rho0: ScalarField,
    /// Fluid momentum `rho0 u0`.
    pub m0_tilde: VectorField,
    pub eta0: f64,
}

impl RawInitialData {
    pub fn grid(&self) -> PeriodicGrid {
        self.n0.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid();
        if self.m0.grid() != g || self.rho0.grid() != g || self.m0_tilde.grid() != g {
            return Err(Error::GridMismatch);
        }
        self.n0.check_density("n0", 0.0, false)?;
        self.rho0.check_density("rho0", 0.0, false)?;
        if !(self.eta0 > 0.0) {
            return Err(Error::ConstraintViolation(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        vacuum_check(&self.n0, &self.m0, "n0", "m0")?;
        vacuum_check(&self.rho0, &self.m0_tilde, "rho0", "m0_tilde")
    }

    /// Primitive state `v = m0/n0`, `u = m0~/rho0`; densities must be positive.
    pub fn to_state(&self) -> Result<State> {
        self.validate()?;
        self.n0.check_density("n0", 0.0, true)?;
        self.rho0.check_density("rho0", 0.0, true)?;
        Ok(State {
            n: self.n0.clone(),
            v: self.m0.map_comps(|m| m.div(&self.n0)),
            rho: self.rho0.clone(),
            u: self.m0_tilde.map_comps(|m| m.div(&self.rho0)),
            t: 0.0,
        })
    }

    /// Raw data whose primitive form is `s`.
    pub fn from_state(s: &State, eta0: f64) -> Self {
        Self {
            n0: s.n.clone(),
            m0: s.v.weighted(&s.n),
            rho0: s.rho.clone(),
            m0_tilde: s.u.weighted(&s.rho),
            eta0,
        }
    }
}

fn vacuum_check(
    density: &ScalarField,
    momentum: &VectorField,
    dname: &'static str,
    mname: &'static str,
) -> Result<()> {
    for (cell, &d) in density.values().iter().enumerate() {
        if d == 0.0 && momentum.comps().iter().any(|c| c.values()[cell] != 0.0) {
            return Err(Error::VacuumMismatch {
                density: dname,
                momentum: mname,
                cell,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedInitialData {
    pub n0d: ScalarField,
    pub v0d: VectorField,
    pub rho0d: ScalarField,
    pub u0d: VectorField,
}

impl RegularizedInitialData {
    pub fn to_state(&self) -> State {
        State {
            n: self.n0d.clone(),
            v: self.v0d.clone(),
            rho: self.rho0d.clone(),
            u: self.u0d.clone(),
            t: 0.0,
        }
    }
}

/// Mollify and lift raw data. Momentum ratios are taken as 0 on the vacuum
/// set of the corresponding density.
pub fn regularize(
    raw: &RawInitialData,
    delta: f64,
    j: &MollifierKernel,
) -> Result<RegularizedInitialData> {
    raw.validate()?;
    if raw.grid() != j.grid() {
        return Err(Error::GridMismatch);
    }
    let eta0 = raw.eta0;
    let lift = delta.powf(0.01);
    let sqrt_n0 = raw.n0.map(f64::sqrt);
    let n0d = convolve(&sqrt_n0, j).map(|x| x * x + lift);

    let weight_exp = -(1.0 + eta0) / (2.0 + eta0);
    let n_weight = raw.n0.map(|n| if n > 0.0 { n.powf(weight_exp) } else { 0.0 });
    let denom_v = n0d.map(|n| n.powf(1.0 / (2.0 + eta0)));
    let v0d = raw
        .m0
        .map_comps(|m| convolve(&m.mul(&n_weight), j).div(&denom_v));

    let rho0d = convolve(&raw.rho0, j).map(|r| r + delta);
    let rho_weight = raw.rho0.map(|r| if r > 0.0 { 1.0 / r.sqrt() } else { 0.0 });
    let denom_u = rho0d.map(f64::sqrt);
    let u0d = raw
        .m0_tilde
        .map_comps(|m| convolve(&m.mul(&rho_weight), j).div(&denom_u));

    Ok(RegularizedInitialData {
        n0d,
        v0d,
        rho0d,
        u0d,
    })
}

/// Energy of the regularized data, including the artificial-pressure and
/// `eps n^-12` contributions.
pub fn initial_energy(reg: &RegularizedInitialData, p: &ModelParams) -> Result<f64> {
    reg.n0d.check_density("n0d", 0.0, true)?;
    reg.rho0d.check_density("rho0d", 0.0, true)?;
    let v2 = reg.v0d.norm_sq();
    let u2 = reg.u0d.norm_sq();
    let (n, r, v2, u2) = (reg.n0d.values(), reg.rho0d.values(), v2.values(), u2.values());
    let density = map_cells(n.len(), |c| {
        let mut e = 0.5 * n[c] * v2[c]
            + relative_entropy(n[c])
            + 0.5 * r[c] * u2[c]
            + p.a * r[c].powf(p.gamma) / (p.gamma - 1.0);
        if p.delta > 0.0 {
            e += p.delta * r[c].powf(p.gamma0) / (p.gamma0 - 1.0);
        }
        if p.eps > 0.0 {
            e += p.eps * n[c].powi(-12);
        }
        e
    });
    Ok(integrate(&ScalarField::from_vec(reg.n0d.grid(), density)))
}

/// Distances between regularized and raw data in the norms of the
/// mollification limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitDistances {
    /// `|| n0d - n0 ||_L1`
    pub n_l1: f64,
    /// `|| grad sqrt(n0d) - grad sqrt(n0) ||_L2`
    pub grad_sqrt_n_l2: f64,
    /// `|| n0d |v0d|^2 - |m0|^2/n0 ||_L1`
    pub n_kinetic_l1: f64,
    /// `|| rho0d - rho0 ||_L^gamma`
    pub rho_lgamma: f64,
    /// `|| rho0d |u0d|^2 - |m0~|^2/rho0 ||_L1`
    pub rho_kinetic_l1: f64,
    /// `|| n0d |v0d|^(2+eta0) - |m0|^(2+eta0)/n0^(1+eta0) ||_L1`, reported only.
    pub n_high_moment_l1: f64,
}

impl InitDistances {
    /// The five tracked distances, in declaration order.
    pub fn tracked(&self) -> [f64; 5] {
        [
            self.n_l1,
            self.grad_sqrt_n_l2,
            self.n_kinetic_l1,
            self.rho_lgamma,
            self.rho_kinetic_l1,
        ]
    }

    pub const NAMES: [&'static str; 5] = [
        "n_l1",
        "grad_sqrt_n_l2",
        "n_kinetic_l1",
        "rho_lgamma",
        "rho_kinetic_l1",
    ];
}

pub fn init_distances(
    raw: &RawInitialData,
    reg: &RegularizedInitialData,
    gamma: f64,
) -> InitDistances {
    let eta0 = raw.eta0;
    let ratio = |m2: &ScalarField, d: &ScalarField| {
        m2.zip_map(d, |a, b| if b > 0.0 { a / b } else { 0.0 })
    };
    let grad_diff = gradient(&reg.n0d.map(f64::sqrt)).sub(&gradient(&raw.n0.map(f64::sqrt)));
    let n_kin = reg.n0d.mul(&reg.v0d.norm_sq());
    let n_kin_raw = ratio(&raw.m0.norm_sq(), &raw.n0);
    let r_kin = reg.rho0d.mul(&reg.u0d.norm_sq());
    let r_kin_raw = ratio(&raw.m0_tilde.norm_sq(), &raw.rho0);
    let q = 2.0 + eta0;
    let hi = reg
        .n0d
        .zip_map(&reg.v0d.norm_sq(), |n, v2| n * v2.powf(0.5 * q));
    let hi_raw = raw.m0.norm_sq().zip_map(&raw.n0, |m2, n| {
        if n > 0.0 {
            m2.powf(0.5 * q) / n.powf(1.0 + eta0)
        } else {
            0.0
        }
    });
    InitDistances {
        n_l1: lp_norm(&reg.n0d.sub(&raw.n0), 1.0),
        grad_sqrt_n_l2: integrate(&grad_diff.norm_sq()).sqrt(),
        n_kinetic_l1: lp_norm(&n_kin.sub(&n_kin_raw), 1.0),
        rho_lgamma: lp_norm(&reg.rho0d.sub(&raw.rho0), gamma),
        rho_kinetic_l1: lp_norm(&r_kin.sub(&r_kin_raw), 1.0),
        n_high_moment_l1: lp_norm(&hi.sub(&hi_raw), 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g(dim: usize, n: usize) -> PeriodicGrid {
        PeriodicGrid::new(dim, n).unwrap()
    }

    /// Direct O(N^2d) convolution against the stored kernel values.
    fn convolve_direct(f: &ScalarField, j: &MollifierKernel) -> ScalarField {
        let grid = f.grid();
        let n = grid.points_per_axis();
        let jv = j.values().values();
        let fv = f.values();
        let out = (0..grid.len())
            .map(|i| {
                let ci = grid.cell_of(i);
                let mut acc = 0.0;
                for (k, &fk) in fv.iter().enumerate() {
                    let ck = grid.cell_of(k);
                    let lag = [
                        (ci[0] + n - ck[0]) % n,
                        (ci[1] + n - ck[1]) % n,
                        (ci[2] + n - ck[2]) % n,
                    ];
                    acc += fk * jv[grid.index_of(lag)];
                }
                acc * grid.cell_volume()
            })
            .collect();
        ScalarField::new(grid, out).unwrap()
    }

    #[test]
    fn kernel_has_unit_mass_and_bounds() {
        let grid = g(1, 128);
        let j = build_mollifier(0.1, grid, 7.0).unwrap();
        assert!((integrate(j.values()) - 1.0).abs() < 1e-12);
        for delta in [0.5, 0.1, 0.01] {
            let j = build_mollifier(delta, g(1, 256), 7.0).unwrap();
            assert!(j.values().max() <= j.sup_bound(7.0));
            assert!(j.values().min() >= 0.0);
            assert!(j.witnessed_constant() <= GRADIENT_CONSTANT);
        }
    }

    #[test]
    fn kernel_is_even() {
        let grid = g(2, 32);
        let j = build_mollifier(0.05, grid, 7.0).unwrap();
        let v = j.values().values();
        for i in 0..grid.len() {
            let c = grid.cell_of(i);
            let r = grid.index_of([(32 - c[0]) % 32, (32 - c[1]) % 32, 0]);
            assert_eq!(v[i], v[r]);
        }
    }

    #[test]
    fn bad_delta_rejected() {
        assert!(build_mollifier(0.0, g(1, 32), 7.0).is_err());
        assert!(build_mollifier(1.0, g(1, 32), 7.0).is_err());
    }

    #[test]
    fn convolution_of_constant_and_mean() {
        let grid = g(1, 64);
        let j = build_mollifier(0.2, grid, 7.0).unwrap();
        let c = convolve(&ScalarField::constant(grid, 3.7), &j);
        assert!((c.max() - 3.7).abs() < 1e-12 && (c.min() - 3.7).abs() < 1e-12);
        let f = ScalarField::from_fn(grid, |x| (x[0] * 9.0).sin().exp());
        let cf = convolve(&f, &j);
        assert!((integrate(&cf) - integrate(&f)).abs() < 1e-12);
        assert!(cf.min() >= 0.0);
    }

    #[test]
    fn separable_convolution_matches_direct() {
        let grid = g(2, 16);
        let j = build_mollifier(0.01, grid, 7.0).unwrap();
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin() + x[1] * x[1]);
        let a = convolve(&f, &j);
        let b = convolve_direct(&f, &j);
        assert!(a.sub(&b).max_abs() < 1e-13);
    }

    #[test]
    fn regularize_constant_data() {
        let grid = g(1, 32);
        let delta = 0.1;
        let j = build_mollifier(delta, grid, 7.0).unwrap();
        let raw = RawInitialData {
            n0: ScalarField::constant(grid, 1.0),
            m0: VectorField::zeros(grid),
            rho0: ScalarField::constant(grid, 1.0),
            m0_tilde: VectorField::zeros(grid),
            eta0: DEFAULT_ETA0,
        };
        let reg = regularize(&raw, delta, &j).unwrap();
        let lift = delta.powf(0.01);
        for &x in reg.n0d.values() {
            assert!((x - (1.0 + lift)).abs() < 1e-12);
        }
        for &x in reg.rho0d.values() {
            assert!((x - 1.1).abs() < 1e-12);
        }
        assert_eq!(reg.v0d.max_norm(), 0.0);
        assert_eq!(reg.u0d.max_norm(), 0.0);
    }

    #[test]
    fn regularize_lifts_vacuum() {
        let grid = g(1, 64);
        let delta = 0.01;
        let j = build_mollifier(delta, grid, 7.0).unwrap();
        let step = ScalarField::from_fn(grid, |x| if x[0] < 0.5 { 0.0 } else { 2.0 });
        let raw = RawInitialData {
            n0: step.clone(),
            m0: VectorField::from_comps(grid, vec![step.scale(0.3)]),
            rho0: step.clone(),
            m0_tilde: VectorField::zeros(grid),
            eta0: DEFAULT_ETA0,
        };
        let reg = regularize(&raw, delta, &j).unwrap();
        assert!(reg.rho0d.min() >= delta);
        assert!(reg.n0d.min() >= delta.powf(0.01));
        assert!(reg.v0d.first_non_finite().is_none());
    }

    #[test]
    fn vacuum_mismatch_detected() {
        let grid = g(1, 16);
        let mut n0 = ScalarField::constant(grid, 1.0);
        n0.values_mut()[4] = 0.0;
        let raw = RawInitialData {
            n0,
            m0: VectorField::constant(grid, &[1.0]),
            rho0: ScalarField::constant(grid, 1.0),
            m0_tilde: VectorField::zeros(grid),
            eta0: DEFAULT_ETA0,
        };
        let j = build_mollifier(0.1, grid, 7.0).unwrap();
        assert!(matches!(
            regularize(&raw, 0.1, &j),
            Err(Error::VacuumMismatch { cell: 4, .. })
        ));
    }

    #[test]
    fn initial_energy_examples() {
        let grid = g(1, 16);
        let reg = RegularizedInitialData {
            n0d: ScalarField::constant(grid, 1.0),
            v0d: VectorField::zeros(grid),
            rho0d: ScalarField::constant(grid, 1.0),
            u0d: VectorField::zeros(grid),
        };
        let p = ModelParams::default();
        assert!((initial_energy(&reg, &p).unwrap() - 1.0).abs() < 1e-14);
        let pe = ModelParams { eps: 0.1, ..p };
        assert!((initial_energy(&reg, &pe).unwrap() - 1.1).abs() < 1e-14);
    }
}
