//! Time stepping with a CFL-type step size, diagnostic sampling and
//! positivity safeguards.
//!
//! The right-hand side is evaluated in primitive variables, but every scheme
//! advances the conservative quantities `(n, n v, rho, rho u)`. Linear
//! invariants of the semi-discrete system (both masses, total momentum) are
//! then preserved by the Runge-Kutta update up to roundoff.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{AuxRecord, DiagnosticsRecord, DiagnosticsSuite};
use crate::error::{Error, Result};
use crate::grid::{gradient, laplacian, ScalarField, VectorField};
use crate::model::{evaluate, momentum_diffusion, ModelParams, State, StateDerivative, Terms};

/// Relative residual at which the implicit solves of the IMEX scheme stop.
pub const IMEX_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitRk2,
    ExplicitRk4,
    Imex,
}

/// Fields held fixed during a run (their time derivatives are zeroed).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Freeze {
    pub n: bool,
    pub v: bool,
    pub rho: bool,
    pub u: bool,
}

impl Freeze {
    fn any(&self) -> bool {
        self.n || self.v || self.rho || self.u
    }
}

fn default_scheme() -> Scheme {
    Scheme::ExplicitRk2
}
fn default_cfl() -> f64 {
    0.4
}
fn default_density_floor() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub dt_max: f64,
    #[serde(default = "default_density_floor")]
    pub density_floor: f64,
    pub t_end: f64,
    /// Diagnostic cadence; `0` samples only the initial and final times.
    pub sample_every: f64,
    #[serde(default)]
    pub freeze: Freeze,
}

impl StepConfig {
    pub fn new(t_end: f64, sample_every: f64) -> Self {
        Self {
            scheme: default_scheme(),
            cfl: default_cfl(),
            dt_max: 1e-2,
            density_floor: default_density_floor(),
            t_end,
            sample_every,
            freeze: Freeze::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("step.cfl must lie in (0,1], got {}", self.cfl));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad(format!("step.dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.density_floor >= 0.0) {
            return bad(format!(
                "step.density_floor must be nonnegative, got {}",
                self.density_floor
            ));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("step.t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.sample_every >= 0.0 && self.sample_every.is_finite()) {
            return bad(format!(
                "step.sample_every must be nonnegative, got {}",
                self.sample_every
            ));
        }
        Ok(())
    }
}

/// Largest stable step: `cfl * min(advective, diffusive, reaction)` bounds,
/// clamped by `dt_max`. Returns 0 when any field is non-finite.
pub fn stable_dt(s: &State, p: &ModelParams, c: &StepConfig) -> f64 {
    if s.check_finite().is_err() {
        return 0.0;
    }
    let g = s.grid();
    let h = g.spacing();
    let dim = g.dim() as f64;
    let n_min = s.n.min();
    let n_max = s.n.max();
    let rho_min = s.rho.min();
    let rho_max = s.rho.max();
    if !(n_min > 0.0 && rho_min > 0.0) {
        return 0.0;
    }
    let v_max = s.v.max_norm();
    let u_max = s.u.max_norm();
    // P' is monotone in rho; the particle phase has unit sound speed
    let c_s = p.pressure_slope(rho_max).max(p.pressure_slope(rho_min)).sqrt();
    let speed = v_max.max(u_max).max(c_s).max(1.0);
    let advective = h / speed;

    let sqrt_eps = p.eps.sqrt();
    let mut nu = (p.eta * n_max / n_min).max(sqrt_eps * n_max / n_min);
    if c.scheme != Scheme::Imex {
        nu = nu.max(p.mu / rho_min).max((p.mu + p.lambda) / rho_min);
        nu = nu.max(p.eps);
    }
    let mut reaction = f64::INFINITY;
    if p.eps > 0.0 {
        let gsq = gradient(&s.n.map(f64::sqrt)).norm_sq().max();
        nu = nu.max(p.eps * (1.0 + 3.0 * gsq));
        let rate = 12.0 * p.eps * n_min.powi(-13)
            + p.eps * v_max.powi(3)
            + 9.0 * p.eps * u_max.powi(8) / rho_min;
        if rate > 0.0 {
            reaction = 1.0 / rate;
        }
    }
    let diffusive = if nu > 0.0 {
        h * h / (2.0 * dim * nu)
    } else {
        f64::INFINITY
    };
    let dt = c.cfl * advective.min(diffusive).min(reaction);
    dt.min(c.dt_max)
}

/// Conservative variables `(n, n v, rho, rho u)`.
#[derive(Debug, Clone)]
struct Conservative {
    n: ScalarField,
    m: Vec<ScalarField>,
    rho: ScalarField,
    mm: Vec<ScalarField>,
}

impl Conservative {
    fn from_state(s: &State) -> Self {
        Self {
            n: s.n.clone(),
            m: s.v.comps().iter().map(|c| c.mul(&s.n)).collect(),
            rho: s.rho.clone(),
            mm: s.u.comps().iter().map(|c| c.mul(&s.rho)).collect(),
        }
    }

    fn to_state(&self, t: f64) -> State {
        let g = self.n.grid();
        State {
            n: self.n.clone(),
            v: VectorField::from_comps(g, self.m.iter().map(|m| m.div(&self.n)).collect()),
            rho: self.rho.clone(),
            u: VectorField::from_comps(g, self.mm.iter().map(|m| m.div(&self.rho)).collect()),
            t,
        }
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        self.n.axpy(a, &x.n);
        self.rho.axpy(a, &x.rho);
        for (y, xi) in self.m.iter_mut().zip(&x.m) {
            y.axpy(a, xi);
        }
        for (y, xi) in self.mm.iter_mut().zip(&x.mm) {
            y.axpy(a, xi);
        }
    }

    fn scaled(&self, a: f64) -> Self {
        Self {
            n: self.n.scale(a),
            m: self.m.iter().map(|f| f.scale(a)).collect(),
            rho: self.rho.scale(a),
            mm: self.mm.iter().map(|f| f.scale(a)).collect(),
        }
    }
}

fn derivative(s: &State, p: &ModelParams, terms: Terms, freeze: Freeze) -> Result<Conservative> {
    let mut r = evaluate(s, p, terms)?;
    if freeze.any() {
        apply_freeze(&mut r, freeze);
    }
    let d = s.grid().dim();
    let m = (0..d)
        .map(|i| {
            s.n.mul(r.dv.comp(i))
                .zip_map(&s.v.comp(i).mul(&r.dn), |a, b| a + b)
        })
        .collect();
    let mm = (0..d)
        .map(|i| {
            s.rho
                .mul(r.du.comp(i))
                .zip_map(&s.u.comp(i).mul(&r.drho), |a, b| a + b)
        })
        .collect();
    Ok(Conservative {
        n: r.dn,
        m,
        rho: r.drho,
        mm,
    })
}

fn apply_freeze(r: &mut StateDerivative, f: Freeze) {
    let g = r.dn.grid();
    if f.n {
        r.dn = ScalarField::zeros(g);
    }
    if f.v {
        r.dv = VectorField::zeros(g);
    }
    if f.rho {
        r.drho = ScalarField::zeros(g);
    }
    if f.u {
        r.du = VectorField::zeros(g);
    }
}

/// Advance one step of size `dt` with the configured scheme.
pub fn step(s: &State, dt: f64, p: &ModelParams, c: &StepConfig) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("step size must be positive, got {dt}")));
    }
    let t1 = s.t + dt;
    let q0 = Conservative::from_state(s);
    let q = match c.scheme {
        Scheme::ExplicitRk2 => {
            let k1 = derivative(s, p, Terms::All, c.freeze)?;
            let mut q1 = q0.clone();
            q1.axpy(dt, &k1);
            let s1 = q1.to_state(t1);
            let k2 = derivative(&s1, p, Terms::All, c.freeze)?;
            let mut out = q0.scaled(0.5);
            out.axpy(0.5, &q1);
            out.axpy(0.5 * dt, &k2);
            out
        }
        Scheme::ExplicitRk4 => {
            let k1 = derivative(s, p, Terms::All, c.freeze)?;
            let stage = |k: &Conservative, a: f64| {
                let mut q = q0.clone();
                q.axpy(a * dt, k);
                q.to_state(s.t + a * dt)
            };
            let k2 = derivative(&stage(&k1, 0.5), p, Terms::All, c.freeze)?;
            let k3 = derivative(&stage(&k2, 0.5), p, Terms::All, c.freeze)?;
            let k4 = derivative(&stage(&k3, 1.0), p, Terms::All, c.freeze)?;
            let mut out = q0.clone();
            out.axpy(dt / 6.0, &k1);
            out.axpy(dt / 3.0, &k2);
            out.axpy(dt / 3.0, &k3);
            out.axpy(dt / 6.0, &k4);
            out
        }
        Scheme::Imex => imex_euler(s, &q0, dt, p, c)?,
    };
    let next = q.to_state(t1);
    next.check_finite()?;
    for (name, f) in [("n", &next.n), ("rho", &next.rho)] {
        let min = f.min();
        if min < c.density_floor {
            return Err(Error::Positivity {
                field: name,
                cell: f.argmin(),
                value: min,
                t: t1,
            });
        }
    }
    Ok(next)
}

/// Forward/backward Euler split: transport, pressure, drag and the nonlinear
/// regularization explicitly; `eps Lap rho` and the fluid viscous operator
/// implicitly.
fn imex_euler(
    s: &State,
    q0: &Conservative,
    dt: f64,
    p: &ModelParams,
    c: &StepConfig,
) -> Result<Conservative> {
    let k = derivative(s, p, Terms::ExplicitOnly, c.freeze)?;
    let mut q = q0.clone();
    q.axpy(dt, &k);
    if p.eps > 0.0 && !c.freeze.rho {
        let rhs = q.rho.clone();
        let coef = dt * p.eps;
        q.rho = solve_cg(&[rhs], |x| {
            vec![x[0].zip_map(&laplacian(&x[0]), |a, l| a - coef * l)]
        })?
        .remove(0);
    }
    if !c.freeze.u {
        let rho = q.rho.clone();
        let g = rho.grid();
        let unknown_guess: Vec<ScalarField> = q.mm.iter().map(|m| m.div(&rho)).collect();
        let rhs = q.mm.clone();
        let u = solve_cg_from(&rhs, unknown_guess, |x| {
            let u = VectorField::from_comps(g, x.to_vec());
            let lin = momentum_diffusion(&u, p);
            x.iter()
                .zip(lin.comps())
                .map(|(ui, li)| rho.mul(ui).zip_map(li, |a, l| a - dt * l))
                .collect()
        })?;
        q.mm = u.iter().map(|ui| ui.mul(&rho)).collect();
    }
    Ok(q)
}

fn dot(a: &[ScalarField], b: &[ScalarField]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

fn solve_cg<F>(rhs: &[ScalarField], apply: F) -> Result<Vec<ScalarField>>
where
    F: Fn(&[ScalarField]) -> Vec<ScalarField>,
{
    solve_cg_from(rhs, rhs.to_vec(), apply)
}

/// Conjugate gradients for a symmetric positive definite operator, stopping
/// at `IMEX_TOLERANCE` relative residual.
fn solve_cg_from<F>(rhs: &[ScalarField], guess: Vec<ScalarField>, apply: F) -> Result<Vec<ScalarField>>
where
    F: Fn(&[ScalarField]) -> Vec<ScalarField>,
{
    let mut x = guess;
    let ax = apply(&x);
    let mut r: Vec<ScalarField> = rhs.iter().zip(&ax).map(|(b, a)| b.sub(a)).collect();
    let mut d = r.clone();
    let b_norm = dot(rhs, rhs).sqrt().max(f64::MIN_POSITIVE);
    let mut rr = dot(&r, &r);
    let max_iter = 10 * rhs.len() * rhs[0].len() + 10;
    for it in 0..max_iter {
        if rr.sqrt() <= IMEX_TOLERANCE * b_norm {
            return Ok(x);
        }
        let ad = apply(&d);
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            return Err(Error::SolverFailure {
                residual: rr.sqrt() / b_norm,
                iterations: it,
            });
        }
        let alpha = rr / dad;
        for (xi, di) in x.iter_mut().zip(&d) {
            xi.axpy(alpha, di);
        }
        for (ri, adi) in r.iter_mut().zip(&ad) {
            ri.axpy(-alpha, adi);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = ri.zip_map(di, |a, b| a + beta * b);
        }
    }
    if rr.sqrt() <= IMEX_TOLERANCE * b_norm {
        Ok(x)
    } else {
        Err(Error::SolverFailure {
            residual: rr.sqrt() / b_norm,
            iterations: max_iter,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Blowup,
    PositivityLost,
}

impl RunStatus {
    fn from_error(e: &Error) -> Self {
        match e {
            Error::Positivity { .. } | Error::DegenerateDensity { .. } => RunStatus::PositivityLost,
            _ => RunStatus::Blowup,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub aux: Vec<AuxRecord>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps: usize,
    /// Largest step actually taken (0 if none).
    pub dt_largest: f64,
    pub dt_smallest: f64,
}

/// Integrate to `c.t_end`, sampling diagnostics at `t = 0`, every
/// `c.sample_every`, and at the final time.
pub fn run(s0: &State, p: &ModelParams, c: &StepConfig, diag: &DiagnosticsSuite) -> Result<RunResult> {
    run_with(s0, p, c, diag, |_| Ok(()))
}

/// [`run`] with a hook invoked on every sampled state (checkpointing).
pub fn run_with<F>(
    s0: &State,
    p: &ModelParams,
    c: &StepConfig,
    diag: &DiagnosticsSuite,
    mut on_sample: F,
) -> Result<RunResult>
where
    F: FnMut(&State) -> Result<()>,
{
    c.validate()?;
    let mut s = s0.clone();
    let mut records = vec![diag.record(&s, p)?];
    let mut aux = vec![diag.aux(&s, p)?];
    on_sample(&s)?;
    let mut result = RunResult {
        final_state: s.clone(),
        records: Vec::new(),
        aux: Vec::new(),
        status: RunStatus::Completed,
        message: None,
        steps: 0,
        dt_largest: 0.0,
        dt_smallest: f64::INFINITY,
    };
    let t_end = c.t_end;
    let snap = 1e-12 * t_end.max(1.0);
    let mut sample_index: u64 = 1;
    let next_sample = |k: u64| {
        if c.sample_every > 0.0 {
            (k as f64 * c.sample_every).min(t_end)
        } else {
            t_end
        }
    };
    let mut target = next_sample(sample_index);
    // restarts from a checkpoint begin past t = 0
    while target <= s.t + snap && target < t_end {
        sample_index += 1;
        target = next_sample(sample_index);
    }
    let mut last_sampled = true;

    while s.t < t_end - snap {
        let dt_stable = stable_dt(&s, p, c);
        if dt_stable <= 0.0 {
            result.status = RunStatus::Blowup;
            result.message = Some(format!("no stable step at t = {}", s.t));
            break;
        }
        let mut dt = dt_stable;
        let mut landed = false;
        if s.t + dt >= target - snap {
            dt = target - s.t;
            landed = true;
        }
        match step(&s, dt, p, c) {
            Ok(mut next) => {
                if landed {
                    next.t = target;
                }
                result.steps += 1;
                result.dt_largest = result.dt_largest.max(dt);
                result.dt_smallest = result.dt_smallest.min(dt);
                s = next;
            }
            Err(e) => {
                result.status = RunStatus::from_error(&e);
                result.message = Some(e.to_string());
                break;
            }
        }
        last_sampled = landed;
        if landed {
            match (diag.record(&s, p), diag.aux(&s, p)) {
                (Ok(r), Ok(a)) => {
                    records.push(r);
                    aux.push(a);
                }
                (Err(e), _) | (_, Err(e)) => {
                    result.status = RunStatus::from_error(&e);
                    result.message = Some(e.to_string());
                    break;
                }
            }
            on_sample(&s)?;
            while target <= s.t + snap && target < t_end {
                sample_index += 1;
                target = next_sample(sample_index);
            }
        }
    }
    if !last_sampled && records.last().map_or(true, |r| r.t < s.t) {
        if let (Ok(r), Ok(a)) = (diag.record(&s, p), diag.aux(&s, p)) {
            records.push(r);
            aux.push(a);
        }
    }
    if result.dt_smallest == f64::INFINITY {
        result.dt_smallest = 0.0;
    }
    result.final_state = s;
    result.records = records;
    result.aux = aux;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::PI;

    fn g1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    fn smooth_state(n: usize) -> State {
        let g = g1(n);
        State {
            n: ScalarField::from_fn(g, |x| 1.0 + 0.1 * (2.0 * PI * x[0]).sin()),
            v: VectorField::from_fn(g, |x| [0.1 * (2.0 * PI * x[0]).cos(), 0.0, 0.0]),
            rho: ScalarField::from_fn(g, |x| 1.0 + 0.1 * (2.0 * PI * x[0]).cos()),
            u: VectorField::from_fn(g, |x| [-0.1 * (2.0 * PI * x[0]).cos(), 0.0, 0.0]),
            t: 0.0,
        }
    }

    #[test]
    fn diffusive_dt_formula() {
        let g = g1(64);
        let s = State::constant(g, 1.0, 1.0, &[0.0]);
        let p = ModelParams {
            mu: 1.0,
            ..Default::default()
        };
        let mut c = StepConfig::new(1.0, 0.1);
        c.cfl = 0.5;
        c.dt_max = 1.0;
        let h = g.spacing();
        let dt = stable_dt(&s, &p, &c);
        assert!((dt - h * h / 4.0).abs() < 1e-18);
        let s2 = State::constant(g1(128), 1.0, 1.0, &[0.0]);
        assert!((stable_dt(&s2, &p, &c) - dt / 4.0).abs() < 1e-18);
        c.dt_max = 1e-6;
        assert_eq!(stable_dt(&s, &p, &c), 1e-6);
        let mut bad = s.clone();
        bad.u.comps_mut()[0].values_mut()[2] = f64::NAN;
        assert_eq!(stable_dt(&bad, &p, &c), 0.0);
    }

    #[test]
    fn equilibrium_is_unchanged() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let s = State::constant(g, 1.2, 0.8, &[0.3, -0.1]);
        let p = ModelParams::default();
        for scheme in [Scheme::ExplicitRk2, Scheme::ExplicitRk4, Scheme::Imex] {
            let mut c = StepConfig::new(1.0, 0.1);
            c.scheme = scheme;
            let next = step(&s, 1e-3, &p, &c).unwrap();
            assert!(next.n.sub(&s.n).max_abs() <= 1e-14);
            assert!(next.rho.sub(&s.rho).max_abs() <= 1e-14);
            assert!(next.v.sub(&s.v).max_norm() <= 1e-14);
            assert!(next.u.sub(&s.u).max_norm() <= 1e-14);
        }
    }

    #[test]
    fn heat_mode_decays_at_the_analytic_rate() {
        let g = g1(128);
        let eps = 0.1;
        let p = ModelParams {
            eps,
            ..Default::default()
        };
        let s0 = State {
            n: ScalarField::constant(g, 1.0),
            v: VectorField::zeros(g),
            rho: ScalarField::from_fn(g, |x| 1.0 + 0.1 * (2.0 * PI * x[0]).sin()),
            u: VectorField::zeros(g),
            t: 0.0,
        };
        let t_end = 0.1;
        for scheme in [Scheme::ExplicitRk2, Scheme::Imex] {
            let mut c = StepConfig::new(t_end, 0.0);
            c.scheme = scheme;
            c.freeze = Freeze {
                n: true,
                v: true,
                rho: false,
                u: true,
            };
            c.dt_max = 1e-4;
            let mut s = s0.clone();
            while s.t < t_end - 1e-15 {
                let dt = stable_dt(&s, &p, &c).min(t_end - s.t);
                s = step(&s, dt, &p, &c).unwrap();
            }
            let amp = 0.1 * (-4.0 * PI * PI * eps * t_end).exp();
            let exact = ScalarField::from_fn(g, |x| 1.0 + amp * (2.0 * PI * x[0]).sin());
            let err = s.rho.sub(&exact).max_abs();
            assert!(err < 1e-4, "{scheme:?}: {err}");
        }
    }

    #[test]
    fn rk2_and_rk4_agree_to_second_order() {
        let p = ModelParams::default();
        let s0 = smooth_state(32);
        let advance = |scheme: Scheme, dt: f64| {
            let mut c = StepConfig::new(0.05, 0.0);
            c.scheme = scheme;
            let mut s = s0.clone();
            let steps = (0.05 / dt).round() as usize;
            for _ in 0..steps {
                s = step(&s, dt, &p, &c).unwrap();
            }
            s
        };
        let diff = |dt: f64| {
            let a = advance(Scheme::ExplicitRk2, dt);
            let b = advance(Scheme::ExplicitRk4, dt);
            a.n.sub(&b.n).max_abs().max(a.u.sub(&b.u).max_norm())
        };
        let e1 = diff(5e-4);
        let e2 = diff(2.5e-4);
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn zero_length_run_keeps_initial_record() {
        let s0 = smooth_state(16);
        let p = ModelParams::default();
        let diag = DiagnosticsSuite::from_state(&s0).unwrap();
        let r = run(&s0, &p, &StepConfig::new(0.0, 0.1), &diag).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.final_state, s0);
        assert_eq!(r.status, RunStatus::Completed);
    }

    #[test]
    fn equilibrium_run_is_constant() {
        let g = g1(32);
        let s0 = State::constant(g, 1.5, 0.5, &[0.2]);
        let p = ModelParams::default();
        let diag = DiagnosticsSuite::from_state(&s0).unwrap();
        let r = run(&s0, &p, &StepConfig::new(0.2, 0.05), &diag).unwrap();
        assert_eq!(r.status, RunStatus::Completed);
        let first = r.records[0].values();
        for rec in &r.records {
            for (k, (a, b)) in rec.values().iter().zip(&first).enumerate().skip(1) {
                assert!((a - b).abs() <= 1e-10, "column {k}");
            }
        }
        let ts: Vec<f64> = r.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 5);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*ts.last().unwrap(), 0.2);
    }

    #[test]
    fn restart_resumes_on_the_sample_grid() {
        let p = ModelParams::default();
        let s0 = smooth_state(16);
        let diag = DiagnosticsSuite::from_state(&s0).unwrap();
        let c = StepConfig::new(0.1, 0.02);
        let full = run(&s0, &p, &c, &diag).unwrap();
        let mut mid = full.final_state.clone();
        mid.t = 0.04;
        let r = run(&mid, &p, &c, &diag).unwrap();
        let ts: Vec<f64> = r.records.iter().map(|x| x.t).collect();
        assert_eq!(ts.len(), 4);
        assert!((ts[1] - 0.06).abs() < 1e-15 && ts[3] == 0.1);
    }

    #[test]
    fn runs_are_deterministic() {
        let s0 = smooth_state(32);
        let p = ModelParams::default();
        let diag = DiagnosticsSuite::from_state(&s0).unwrap();
        let c = StepConfig::new(0.05, 0.01);
        let a = run(&s0, &p, &c, &diag).unwrap();
        let b = run(&s0, &p, &c, &diag).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn positivity_loss_is_reported() {
        let g = g1(32);
        let s0 = State {
            n: ScalarField::from_fn(g, |x| 1.0 + 0.1 * (2.0 * PI * x[0]).sin()),
            v: VectorField::from_fn(g, |x| [-30.0 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]),
            rho: ScalarField::constant(g, 1.0),
            u: VectorField::zeros(g),
            t: 0.0,
        };
        let p = ModelParams::default();
        let diag = DiagnosticsSuite::from_state(&s0).unwrap();
        let mut c = StepConfig::new(1.0, 0.01);
        c.density_floor = 0.5;
        let r = run(&s0, &p, &c, &diag).unwrap();
        assert_eq!(r.status, RunStatus::PositivityLost);
        assert!(r.records.len() >= 1);
        assert!(r.records.windows(2).all(|w| w[1].t > w[0].t));
    }
}
