//! Physical parameters, pressure law, drag coupling and the semi-discrete
//! right-hand sides of the two-phase system.
//!
//! Phase one (particles) carries `(n, v)` with isothermal pressure `n` and
//! degenerate viscosity `eta * div(n D(v))`. Phase two (fluid) carries
//! `(rho, u)` with pressure `A rho^gamma` and constant viscosities. The phases
//! exchange momentum through the drag `kappa n (v - u)`.
//!
//! Densities are advanced in flux form, velocities in primitive form. The
//! regularized system adds the artificial viscosity terms weighted by `eps`
//! and the artificial pressure `delta rho^gamma0`; with `eps = delta = 0` it
//! takes exactly the same code path as the original system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    divergence, gradient, jacobian, laplacian, tensor_divergence, PeriodicGrid, ScalarField,
    TensorField, VectorField,
};
use crate::par::map_cells;

fn default_n_floor() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Drag coefficient.
    pub kappa: f64,
    /// Degenerate viscosity of the particle phase.
    pub eta: f64,
    /// Shear viscosity of the fluid phase.
    pub mu: f64,
    /// Second viscosity of the fluid phase.
    pub lambda: f64,
    /// Pressure constant `A`.
    pub a: f64,
    /// Adiabatic exponent.
    pub gamma: f64,
    /// Artificial-pressure exponent.
    pub gamma0: f64,
    /// Artificial viscosity weight; 0 disables every regularizing term.
    pub eps: f64,
    /// Artificial pressure weight.
    pub delta: f64,
    /// Smallest particle density accepted by the regularized right-hand side
    /// (`n^-12` overflows below it).
    #[serde(default = "default_n_floor")]
    pub n_floor: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            eta: 0.1,
            mu: 0.1,
            lambda: 0.0,
            a: 1.0,
            gamma: 2.0,
            gamma0: 7.0,
            eps: 0.0,
            delta: 0.0,
            n_floor: default_n_floor(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let all = [
            self.kappa, self.eta, self.mu, self.lambda, self.a, self.gamma, self.gamma0, self.eps,
            self.delta, self.n_floor,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return fail("all parameters must be finite");
        }
        if self.kappa <= 0.0 {
            return fail("drag coefficient must satisfy κ>0");
        }
        if self.eta <= 0.0 {
            return fail("degenerate viscosity must satisfy η>0");
        }
        if self.mu <= 0.0 {
            return fail("shear viscosity must satisfy μ>0");
        }
        if 2.0 * self.mu + self.lambda <= 0.0 {
            return fail("viscosities must satisfy 2μ+λ>0");
        }
        if self.a <= 0.0 {
            return fail("pressure constant must satisfy A>0");
        }
        if self.gamma <= 1.5 {
            return fail("adiabatic exponent must satisfy γ>3/2");
        }
        if !(0.0..0.25).contains(&self.eps) {
            return fail("artificial viscosity must satisfy ε∈[0,1/4)");
        }
        if !(0.0..1.0).contains(&self.delta) {
            return fail("artificial pressure must satisfy δ∈[0,1)");
        }
        if self.delta > 0.0 && self.gamma0 <= self.gamma + 4.0 {
            return fail("artificial pressure exponent must satisfy γ₀>γ+4");
        }
        if self.n_floor < 0.0 {
            return fail("n_floor must be nonnegative");
        }
        Ok(())
    }

    /// True when no regularizing term is active.
    pub fn is_original(&self) -> bool {
        self.eps == 0.0 && self.delta == 0.0
    }

    #[inline]
    pub fn pressure_value(&self, rho: f64) -> f64 {
        let p = self.a * rho.powf(self.gamma);
        if self.delta > 0.0 {
            p + self.delta * rho.powf(self.gamma0)
        } else {
            p
        }
    }

    /// `P'(rho)`.
    #[inline]
    pub fn pressure_slope(&self, rho: f64) -> f64 {
        let s = self.a * self.gamma * rho.powf(self.gamma - 1.0);
        if self.delta > 0.0 {
            s + self.delta * self.gamma0 * rho.powf(self.gamma0 - 1.0)
        } else {
            s
        }
    }
}

/// Cellwise `A rho^gamma + delta rho^gamma0`. `t` only labels the error.
pub fn pressure(rho: &ScalarField, p: &ModelParams, t: f64) -> Result<ScalarField> {
    rho.check_density("rho", t, false)?;
    Ok(rho.map(|r| p.pressure_value(r)))
}

/// `kappa n (v - u)`: enters the fluid momentum with a plus sign and the
/// particle momentum with a minus sign.
pub fn drag(n: &ScalarField, v: &VectorField, u: &VectorField, kappa: f64) -> VectorField {
    v.zip_comps(u, |vi, ui| {
        let (nn, a, b) = (n.values(), vi.values(), ui.values());
        ScalarField::from_vec(n.grid(), map_cells(nn.len(), |c| kappa * nn[c] * (a[c] - b[c])))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub n: ScalarField,
    pub v: VectorField,
    pub rho: ScalarField,
    pub u: VectorField,
    pub t: f64,
}

impl State {
    pub fn new(
        n: ScalarField,
        v: VectorField,
        rho: ScalarField,
        u: VectorField,
        t: f64,
    ) -> Result<Self> {
        let g = n.grid();
        if v.grid() != g || rho.grid() != g || u.grid() != g {
            return Err(Error::GridMismatch);
        }
        Ok(Self { n, v, rho, u, t })
    }

    /// Uniform state `(n_c, u_c, rho_c, u_c)`.
    pub fn constant(grid: PeriodicGrid, n_c: f64, rho_c: f64, u_c: &[f64]) -> Self {
        Self {
            n: ScalarField::constant(grid, n_c),
            v: VectorField::constant(grid, u_c),
            rho: ScalarField::constant(grid, rho_c),
            u: VectorField::constant(grid, u_c),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.n.grid()
    }

    /// First non-finite entry across all four fields.
    pub fn check_finite(&self) -> Result<()> {
        let t = self.t;
        let checks: [(&'static str, Option<usize>); 4] = [
            ("n", self.n.first_non_finite()),
            ("v", self.v.first_non_finite()),
            ("rho", self.rho.first_non_finite()),
            ("u", self.u.first_non_finite()),
        ];
        for (field, cell) in checks {
            if let Some(cell) = cell {
                return Err(Error::NumericalBlowup { field, cell, t });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dn: ScalarField,
    pub dv: VectorField,
    pub drho: ScalarField,
    pub du: VectorField,
}

impl StateDerivative {
    pub fn max_abs(&self) -> f64 {
        let mut m = self.dn.max_abs().max(self.drho.max_abs());
        for c in self.dv.comps().iter().chain(self.du.comps()) {
            m = m.max(c.max_abs());
        }
        m
    }

    fn check_finite(&self, t: f64) -> Result<()> {
        let checks: [(&'static str, Option<usize>); 4] = [
            ("dn", self.dn.first_non_finite()),
            ("dv", self.dv.first_non_finite()),
            ("drho", self.drho.first_non_finite()),
            ("du", self.du.first_non_finite()),
        ];
        for (field, cell) in checks {
            if let Some(cell) = cell {
                return Err(Error::NumericalBlowup { field, cell, t });
            }
        }
        Ok(())
    }
}

/// Which linear diffusion terms the right-hand side includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terms {
    All,
    /// Omit `mu Lap u + (mu+lambda) grad div u` and `eps Lap rho`; the IMEX
    /// integrator treats those implicitly.
    ExplicitOnly,
}

/// Time derivatives of the original system. Requires `eps = delta = 0`.
pub fn rhs_original(s: &State, p: &ModelParams) -> Result<StateDerivative> {
    if !p.is_original() {
        return Err(Error::InvalidParams(
            "the original system needs eps = delta = 0".into(),
        ));
    }
    evaluate(s, p, Terms::All)
}

/// Time derivatives of the regularized system. With `eps = delta = 0` this is
/// the original system, bit for bit.
pub fn rhs_regularized(s: &State, p: &ModelParams) -> Result<StateDerivative> {
    evaluate(s, p, Terms::All)
}

/// `mu Lap u + (mu + lambda) grad div u`.
pub fn momentum_diffusion(u: &VectorField, p: &ModelParams) -> VectorField {
    let gdiv = gradient(&divergence(u));
    let comps = u
        .comps()
        .iter()
        .zip(gdiv.comps())
        .map(|(ui, gi)| laplacian(ui).zip_map(gi, |l, g| p.mu * l + (p.mu + p.lambda) * g))
        .collect();
    VectorField::from_comps(u.grid(), comps)
}

/// Shared right-hand side. `terms` selects whether the linear diffusion
/// operators are included.
pub fn evaluate(s: &State, p: &ModelParams, terms: Terms) -> Result<StateDerivative> {
    let t = s.t;
    s.check_finite()?;
    s.n.check_density("n", t, true)?;
    s.rho.check_density("rho", t, true)?;
    let eps = p.eps;
    let regularized = eps > 0.0;
    if regularized {
        let min = s.n.min();
        if min < p.n_floor {
            return Err(Error::DegenerateDensity {
                min,
                floor: p.n_floor,
                t,
            });
        }
    }

    let g = s.grid();
    let d = g.dim();
    let len = g.len();
    let with_linear = terms == Terms::All;
    let (n, v, rho, u) = (&s.n, &s.v, &s.rho, &s.u);
    let nv = n.values();
    let rv = rho.values();

    // particle phase
    let mut dn = divergence(&v.weighted(n)).scale(-1.0);
    let jv = jacobian(v);
    let grad_n = gradient(n);
    let visc_v = tensor_divergence(&symmetric_part(&jv).weighted(n));

    let mut dv_comps: Vec<ScalarField> = (0..d)
        .map(|i| {
            let vi = v.comp(i).values();
            let ui = u.comp(i).values();
            let gn = grad_n.comp(i).values();
            let vis = visc_v.comp(i).values();
            let jcol: Vec<&[f64]> = (0..d).map(|j| jv.comp(j, i).values()).collect();
            let vcomps: Vec<&[f64]> = v.comps().iter().map(|c| c.values()).collect();
            let out = map_cells(len, |c| {
                let mut adv = 0.0;
                for j in 0..d {
                    adv += vcomps[j][c] * jcol[j][c];
                }
                -adv - gn[c] / nv[c] - p.kappa * (vi[c] - ui[c]) + p.eta * vis[c] / nv[c]
            });
            ScalarField::from_vec(g, out)
        })
        .collect();

    // fluid phase
    let mut drho = divergence(&u.weighted(rho)).scale(-1.0);
    if regularized && with_linear {
        drho.axpy(eps, &laplacian(rho));
    }
    let pres = pressure(rho, p, t)?;
    let grad_p = gradient(&pres);
    let ju = jacobian(u);
    let diffusion = with_linear.then(|| momentum_diffusion(u, p));
    let mut du_comps: Vec<ScalarField> = (0..d)
        .map(|i| {
            let vi = v.comp(i).values();
            let ui = u.comp(i).values();
            let gp = grad_p.comp(i).values();
            let jcol: Vec<&[f64]> = (0..d).map(|j| ju.comp(j, i).values()).collect();
            let ucomps: Vec<&[f64]> = u.comps().iter().map(|c| c.values()).collect();
            let lin = diffusion.as_ref().map(|f| f.comp(i).values());
            let out = map_cells(len, |c| {
                let mut adv = 0.0;
                for j in 0..d {
                    adv += ucomps[j][c] * jcol[j][c];
                }
                let mut force = p.kappa * nv[c] * (vi[c] - ui[c]);
                if let Some(l) = lin {
                    force += l[c];
                }
                -adv - gp[c] / rv[c] + force / rv[c]
            });
            ScalarField::from_vec(g, out)
        })
        .collect();

    if regularized {
        regularizing_terms(s, p, &jv, &ju, &mut dn, &mut dv_comps, &mut du_comps);
    }

    let out = StateDerivative {
        dn,
        dv: VectorField::from_comps(g, dv_comps),
        drho,
        du: VectorField::from_comps(g, du_comps),
    };
    out.check_finite(t)?;
    Ok(out)
}

fn symmetric_part(j: &TensorField) -> TensorField {
    // same arithmetic as grid::deformation, reusing an existing Jacobian
    let d = j.grid().dim();
    let comps: Vec<ScalarField> = (0..d * d)
        .map(|k| {
            let (a, b) = (k / d, k % d);
            j.comp(a, b).zip_map(j.comp(b, a), |x, y| 0.5 * (x + y))
        })
        .collect();
    crate::grid::tensor_from_comps(j.grid(), comps, true)
}

/// Adds the `eps`-weighted terms of the regularized system.
fn regularizing_terms(
    s: &State,
    p: &ModelParams,
    jv: &TensorField,
    ju: &TensorField,
    dn: &mut ScalarField,
    dv: &mut [ScalarField],
    du: &mut [ScalarField],
) {
    let eps = p.eps;
    let sqrt_eps = eps.sqrt();
    let g = s.grid();
    let d = g.dim();
    let len = g.len();
    let (n, v, rho, u) = (&s.n, &s.v, &s.rho, &s.u);
    let nv = n.values();
    let rv = rho.values();

    let sq = n.map(f64::sqrt);
    let gsq = gradient(&sq);
    let g2 = gsq.norm_sq();
    let lap_sq = divergence(&gsq);
    let plap_sq = divergence(&gsq.weighted(&g2));
    {
        let (sqv, l1, l2) = (sq.values(), lap_sq.values(), plap_sq.values());
        let extra = map_cells(len, |c| {
            eps * sqv[c] * l1[c] + eps * sqv[c] * l2[c] + eps * nv[c].powi(-12)
        });
        dn.axpy(1.0, &ScalarField::from_vec(g, extra));
    }

    let v2 = v.norm_sq();
    let u2 = u.norm_sq();
    let grad_rho = gradient(rho);
    let sqv = sq.values();
    let g2v = g2.values();
    for i in 0..d {
        // sqrt(eps) div(n grad v_i)
        let flux = VectorField::from_comps(g, (0..d).map(|j| jv.comp(j, i).mul(n)).collect());
        let visc = divergence(&flux);
        let visc = visc.values();
        let vi = v.comp(i).values();
        let jcol: Vec<&[f64]> = (0..d).map(|j| jv.comp(j, i).values()).collect();
        let gs: Vec<&[f64]> = gsq.comps().iter().map(|c| c.values()).collect();
        let vv = v2.values();
        let extra = map_cells(len, |c| {
            let speed3 = vv[c] * vv[c].sqrt();
            let mut dirv = 0.0;
            for j in 0..d {
                dirv += gs[j][c] * jcol[j][c];
            }
            let nc = nv[c];
            -eps * speed3 * vi[c] - eps * nc.powi(-13) * vi[c]
                + sqrt_eps * visc[c] / nc
                + eps * sqv[c] * g2v[c] * dirv / nc
        });
        dv[i].axpy(1.0, &ScalarField::from_vec(g, extra));

        let ui = u.comp(i).values();
        let jcol: Vec<&[f64]> = (0..d).map(|j| ju.comp(j, i).values()).collect();
        let gr: Vec<&[f64]> = grad_rho.comps().iter().map(|c| c.values()).collect();
        let uu = u2.values();
        let extra = map_cells(len, |c| {
            let mut cross = 0.0;
            for j in 0..d {
                cross += jcol[j][c] * gr[j][c];
            }
            (-eps * uu[c].powi(4) * ui[c] + eps * cross) / rv[c]
        });
        du[i].axpy(1.0, &ScalarField::from_vec(g, extra));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    #[test]
    fn params_validation() {
        let ok = ModelParams::default();
        ok.validate().unwrap();
        let bad = |f: &dyn Fn(&mut ModelParams)| {
            let mut p = ok;
            f(&mut p);
            p.validate().unwrap_err()
        };
        assert!(bad(&|p| p.kappa = 0.0).to_string().contains("κ>0"));
        bad(&|p| p.eta = -1.0);
        bad(&|p| p.mu = 0.0);
        bad(&|p| p.lambda = -0.3);
        bad(&|p| p.a = 0.0);
        bad(&|p| p.gamma = 1.5);
        bad(&|p| p.eps = 0.25);
        bad(&|p| p.delta = 1.0);
        bad(&|p| {
            p.delta = 0.1;
            p.gamma0 = 6.0
        });
        let mut fine = ok;
        fine.lambda = -0.15;
        fine.validate().unwrap();
    }

    #[test]
    fn pressure_examples() {
        let g = g1(8);
        let mut p = ModelParams {
            a: 1.0,
            gamma: 2.0,
            ..Default::default()
        };
        let zero = pressure(&ScalarField::zeros(g), &p, 0.0).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let two = pressure(&ScalarField::constant(g, 2.0), &p, 0.0).unwrap();
        assert_eq!(two.values()[3], 4.0);
        p.delta = 0.5;
        p.gamma0 = 7.0;
        let one = pressure(&ScalarField::constant(g, 1.0), &p, 0.0).unwrap();
        assert_eq!(one.values()[0], 1.5);
        let mut neg = ScalarField::constant(g, 1.0);
        neg.values_mut()[5] = -1e-3;
        match pressure(&neg, &p, 2.5) {
            Err(Error::Positivity { cell, t, .. }) => {
                assert_eq!(cell, 5);
                assert_eq!(t, 2.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pressure_is_monotone() {
        let p = ModelParams {
            delta: 0.3,
            ..Default::default()
        };
        let mut last = -1.0;
        for k in 0..200 {
            let x = p.pressure_value(k as f64 * 0.02);
            assert!(x >= last);
            last = x;
        }
    }

    #[test]
    fn drag_examples() {
        let g = PeriodicGrid::new(3, 8).unwrap();
        let n = ScalarField::constant(g, 1.0);
        let v = VectorField::constant(g, &[1.0, 0.0, 0.0]);
        let u = VectorField::zeros(g);
        let f = drag(&n, &v, &u, 2.0);
        assert_eq!(f.comp(0).min(), 2.0);
        assert_eq!(f.comp(0).max(), 2.0);
        assert_eq!(f.comp(1).max_abs(), 0.0);
        assert_eq!(drag(&n, &v, &v, 2.0).max_norm(), 0.0);
    }

    #[test]
    fn constant_state_is_steady() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let s = State::constant(g, 1.3, 0.7, &[0.2, -0.4]);
        let r = rhs_original(&s, &ModelParams::default()).unwrap();
        assert!(r.max_abs() <= 1e-12);
    }

    #[test]
    fn only_drag_survives_on_uniform_slip() {
        let g = PeriodicGrid::new(3, 8).unwrap();
        let s = State {
            n: ScalarField::constant(g, 1.0),
            v: VectorField::constant(g, &[1.0, 0.0, 0.0]),
            rho: ScalarField::constant(g, 1.0),
            u: VectorField::zeros(g),
            t: 0.0,
        };
        let r = rhs_original(&s, &ModelParams::default()).unwrap();
        assert_eq!(r.dv.comp(0).max(), -1.0);
        assert_eq!(r.dv.comp(0).min(), -1.0);
        assert_eq!(r.du.comp(0).min(), 1.0);
        assert_eq!(r.du.comp(1).max_abs(), 0.0);
        assert_eq!(r.dn.max_abs(), 0.0);
    }

    #[test]
    fn original_rejects_regularized_params_and_vacuum() {
        let g = g1(16);
        let mut s = State::constant(g, 1.0, 1.0, &[0.0]);
        let p = ModelParams {
            eps: 0.1,
            ..Default::default()
        };
        assert!(rhs_original(&s, &p).is_err());
        s.n.values_mut()[3] = 0.0;
        assert!(matches!(
            rhs_original(&s, &ModelParams::default()),
            Err(Error::Positivity { field: "n", cell: 3, .. })
        ));
        s.n.values_mut()[3] = f64::NAN;
        assert!(matches!(
            rhs_original(&s, &ModelParams::default()),
            Err(Error::NumericalBlowup { .. })
        ));
    }

    #[test]
    fn regularized_constant_state_only_source_survives() {
        let g = g1(16);
        let s = State::constant(g, 1.0, 1.0, &[0.0]);
        let p = ModelParams {
            eps: 0.1,
            ..Default::default()
        };
        let r = rhs_regularized(&s, &p).unwrap();
        for &x in r.dn.values() {
            assert!((x - 0.1).abs() < 1e-15);
        }
        assert_eq!(r.drho.max_abs(), 0.0);
        assert_eq!(r.dv.max_norm(), 0.0);
        assert_eq!(r.du.max_norm(), 0.0);
    }

    #[test]
    fn regularized_velocity_damping() {
        // n = 1, |v| = 2: dv = -eps |v|^3 v - eps n^-13 v = -0.01*16 - 0.01*2
        let g = g1(16);
        let s = State {
            n: ScalarField::constant(g, 1.0),
            v: VectorField::constant(g, &[2.0]),
            rho: ScalarField::constant(g, 1.0),
            u: VectorField::zeros(g),
            t: 0.0,
        };
        let p = ModelParams {
            eps: 0.01,
            kappa: 0.0,
            ..Default::default()
        };
        let r = rhs_regularized(&s, &p).unwrap();
        let scalar = -0.01 * 2f64.powi(3) * 2.0 - 0.01 * 1f64.powi(-13) * 2.0;
        assert!((scalar + 0.18).abs() < 1e-15);
        for &x in r.dv.comp(0).values() {
            assert!((x - scalar).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_density_is_rejected() {
        let g = g1(16);
        let mut s = State::constant(g, 1.0, 1.0, &[0.0]);
        s.n.values_mut()[0] = 1e-13;
        let p = ModelParams {
            eps: 0.1,
            ..Default::default()
        };
        assert!(matches!(
            rhs_regularized(&s, &p),
            Err(Error::DegenerateDensity { .. })
        ));
    }

    #[test]
    fn density_flux_form_conserves_mass() {
        let g = g1(64);
        let s = State {
            n: ScalarField::from_fn(g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin()),
            v: VectorField::from_fn(g, |x| [(2.0 * PI * x[0]).cos() + 0.4 * (6.0 * PI * x[0]).sin(), 0.0, 0.0]),
            rho: ScalarField::from_fn(g, |x| 2.0 + 0.1 * (4.0 * PI * x[0]).cos()),
            u: VectorField::from_fn(g, |x| [0.5 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]),
            t: 0.0,
        };
        let r = rhs_original(&s, &ModelParams::default()).unwrap();
        let dt = 1e-3;
        let m0 = crate::grid::integrate(&s.n);
        let mut n1 = s.n.clone();
        n1.axpy(dt, &r.dn);
        let m1 = crate::grid::integrate(&n1);
        assert!(((m1 - m0) / m0).abs() <= 1e-13);
    }
}
