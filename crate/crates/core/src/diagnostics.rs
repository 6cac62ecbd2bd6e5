//! Functionals evaluated on a snapshot or a sampled trajectory: energy and
//! dissipation, Bresch-Desjardins and Mellet-Vasseur entropies, conservation
//! integrals, distance to the constant equilibrium, the modified energy built
//! on the phase-mean velocities, and the higher-integrability integrals of the
//! fluid density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    deformation, divergence, gradient, integrate, jacobian, PeriodicGrid, ScalarField,
    VectorField,
};
use crate::init::RawInitialData;
use crate::model::{ModelParams, State};
use crate::par::map_cells;

/// `n log n - n + 1`, with `0 log 0 = 0` and a series near `n = 1` where
/// the direct form cancels.
pub fn relative_entropy(n: f64) -> f64 {
    if n == 0.0 {
        return 1.0;
    }
    let x = n - 1.0;
    if x.abs() < 0.1 {
        // sum_{k>=2} (-x)^k / (k (k-1))
        let mut term = x * x;
        let mut acc = 0.0;
        for k in 2..24 {
            let kf = k as f64;
            acc += term / (kf * (kf - 1.0));
            term *= -x;
        }
        acc
    } else {
        n * n.ln() - n + 1.0
    }
}

fn integrate_cells<F>(grid: PeriodicGrid, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    integrate(&ScalarField::from_fn_index(grid, f))
}

/// `int (n|v|^2/2 + n log n - n + 1 + rho|u|^2/2 + A rho^gamma/(gamma-1)) dx`,
/// plus `delta rho^gamma0/(gamma0-1)` when `delta > 0`.
pub fn energy(s: &State, p: &ModelParams) -> f64 {
    let v2 = s.v.norm_sq();
    let u2 = s.u.norm_sq();
    let (n, r, v2, u2) = (s.n.values(), s.rho.values(), v2.values(), u2.values());
    integrate_cells(s.grid(), |c| {
        let mut e = 0.5 * n[c] * v2[c]
            + relative_entropy(n[c])
            + 0.5 * r[c] * u2[c]
            + p.a * r[c].powf(p.gamma) / (p.gamma - 1.0);
        if p.delta > 0.0 {
            e += p.delta * r[c].powf(p.gamma0) / (p.gamma0 - 1.0);
        }
        e
    })
}

/// `int (kappa n |v-u|^2 + mu |grad u|^2 + (mu+lambda)(div u)^2) dx`, signed.
pub fn dissipation_rate(s: &State, p: &ModelParams) -> f64 {
    let slip = s.v.sub(&s.u).norm_sq();
    let grad_u = jacobian(&s.u).norm_sq();
    let div_u = divergence(&s.u);
    let (n, w, gu, du) = (s.n.values(), slip.values(), grad_u.values(), div_u.values());
    integrate_cells(s.grid(), |c| {
        p.kappa * n[c] * w[c] + p.mu * gu[c] + (p.mu + p.lambda) * du[c] * du[c]
    })
}

/// `int eta n |D(v)|^2 dx`, the particle viscous dissipation.
pub fn particle_viscous_dissipation(s: &State, p: &ModelParams) -> f64 {
    p.eta * integrate(&deformation(&s.v).norm_sq().mul(&s.n))
}

/// `int |grad sqrt(n)|^2 dx`.
pub fn bd_entropy(s: &State) -> f64 {
    integrate(&gradient(&s.n.map(f64::sqrt)).norm_sq())
}

/// `int n (1+|v|^2) log(1+|v|^2) dx`.
pub fn mellet_vasseur(s: &State) -> f64 {
    let v2 = s.v.norm_sq();
    let (n, v2) = (s.n.values(), v2.values());
    integrate_cells(s.grid(), |c| n[c] * (1.0 + v2[c]) * v2[c].ln_1p())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conserved {
    pub mass_n: f64,
    pub mass_rho: f64,
    pub momentum: Vec<f64>,
}

/// `(int n, int rho, int (n v + rho u))`.
pub fn conserved(s: &State) -> Conserved {
    let momentum = (0..s.grid().dim())
        .map(|a| integrate(&s.n.mul(s.v.comp(a)).add(&s.rho.mul(s.u.comp(a)))))
        .collect();
    Conserved {
        mass_n: integrate(&s.n),
        mass_rho: integrate(&s.rho),
        momentum,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    pub n_c: f64,
    pub rho_c: f64,
    pub u_c: Vec<f64>,
}

/// Constants the solution relaxes to: the two masses and the common velocity
/// `int (m0 + m0~) / int (n0 + rho0)`.
pub fn equilibrium(raw: &RawInitialData) -> Result<EquilibriumState> {
    let n_c = integrate(&raw.n0);
    let rho_c = integrate(&raw.rho0);
    if n_c <= 0.0 {
        return Err(Error::ZeroMass("particle phase"));
    }
    if rho_c <= 0.0 {
        return Err(Error::ZeroMass("fluid phase"));
    }
    let u_c = (0..raw.grid().dim())
        .map(|a| (integrate(raw.m0.comp(a)) + integrate(raw.m0_tilde.comp(a))) / (n_c + rho_c))
        .collect();
    Ok(EquilibriumState { n_c, rho_c, u_c })
}

/// `int (n|v-u_c|^2 + |n-n_c|^p + rho|u-u_c|^2 + |rho-rho_c|^gamma) dx`.
pub fn distance_to_equilibrium(s: &State, eq: &EquilibriumState, p_exp: f64, gamma: f64) -> f64 {
    let g = s.grid();
    let uc = VectorField::constant(g, &eq.u_c);
    let dv = s.v.sub(&uc).norm_sq();
    let du = s.u.sub(&uc).norm_sq();
    let (n, r, dv, du) = (s.n.values(), s.rho.values(), dv.values(), du.values());
    integrate_cells(g, |c| {
        n[c] * dv[c]
            + (n[c] - eq.n_c).abs().powf(p_exp)
            + r[c] * du[c]
            + (r[c] - eq.rho_c).abs().powf(gamma)
    })
}

/// Phase-mean velocities `m1 = int n v / int n`, `m2 = int rho u / int rho`.
pub fn phase_means(s: &State) -> Result<(Vec<f64>, Vec<f64>)> {
    let mn = integrate(&s.n);
    let mr = integrate(&s.rho);
    if mn <= 0.0 {
        return Err(Error::ZeroMass("particle phase"));
    }
    if mr <= 0.0 {
        return Err(Error::ZeroMass("fluid phase"));
    }
    let d = s.grid().dim();
    let m1 = (0..d).map(|a| integrate(&s.n.mul(s.v.comp(a))) / mn).collect();
    let m2 = (0..d).map(|a| integrate(&s.rho.mul(s.u.comp(a))) / mr).collect();
    Ok((m1, m2))
}

/// Modified energy measured against the phase-mean velocities, with the
/// coupling constant `C = int n0 int rho0 / int (n0 + rho0)` taken from the
/// initial masses.
pub fn modified_energy(s: &State, raw: &RawInitialData, p: &ModelParams) -> Result<f64> {
    let mn0 = integrate(&raw.n0);
    let mr0 = integrate(&raw.rho0);
    modified_energy_with_masses(s, p, mn0, mr0)
}

pub fn modified_energy_with_masses(
    s: &State,
    p: &ModelParams,
    mass_n0: f64,
    mass_rho0: f64,
) -> Result<f64> {
    if mass_n0 <= 0.0 {
        return Err(Error::ZeroMass("particle phase"));
    }
    if mass_rho0 <= 0.0 {
        return Err(Error::ZeroMass("fluid phase"));
    }
    let coupling = mass_n0 * mass_rho0 / (mass_n0 + mass_rho0);
    let (m1, m2) = phase_means(s)?;
    let g = s.grid();
    let dv = s.v.sub(&VectorField::constant(g, &m1)).norm_sq();
    let du = s.u.sub(&VectorField::constant(g, &m2)).norm_sq();
    let (n, r, dv, du) = (s.n.values(), s.rho.values(), dv.values(), du.values());
    let bulk = integrate_cells(g, |c| {
        0.5 * n[c] * dv[c]
            + relative_entropy(n[c])
            + 0.5 * r[c] * du[c]
            + p.a * r[c].powf(p.gamma) / (p.gamma - 1.0)
    });
    let gap: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(bulk + 0.5 * coupling * gap)
}

/// `w = v + (eta + sqrt(eps)) grad log n`.
pub fn effective_velocity(s: &State, p: &ModelParams) -> Result<VectorField> {
    s.n.check_density("n", s.t, true)?;
    let c0 = p.eta + p.eps.sqrt();
    let grad_log = gradient(&s.n.map(f64::ln));
    Ok(s.v.add(&grad_log.scale(c0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    /// `int_t int rho^(gamma+1)`
    pub rho_gamma_plus1: f64,
    /// `int_t int rho^(5 gamma/3 - 1)`
    pub rho_hi: f64,
    /// `int_t int delta rho^(gamma0 + 2 gamma/3 - 1)`; zero when `delta = 0`.
    pub delta_companion: f64,
}

/// Trapezoid-in-time integrals of the density integrability functionals.
pub fn integrability(samples: &[State], p: &ModelParams) -> Integrability {
    let per: Vec<(f64, [f64; 3])> = samples
        .iter()
        .map(|s| (s.t, density_powers(&s.rho, p)))
        .collect();
    let mut out = [0.0; 3];
    for w in per.windows(2) {
        let dt = w[1].0 - w[0].0;
        for k in 0..3 {
            out[k] += 0.5 * dt * (w[0].1[k] + w[1].1[k]);
        }
    }
    Integrability {
        rho_gamma_plus1: out[0],
        rho_hi: out[1],
        delta_companion: out[2],
    }
}

fn density_powers(rho: &ScalarField, p: &ModelParams) -> [f64; 3] {
    let g = p.gamma;
    let a = integrate(&rho.map(|r| r.powf(g + 1.0)));
    let b = integrate(&rho.map(|r| r.powf(5.0 * g / 3.0 - 1.0)));
    let c = if p.delta > 0.0 {
        p.delta * integrate(&rho.map(|r| r.powf(p.gamma0 + 2.0 * g / 3.0 - 1.0)))
    } else {
        0.0
    };
    [a, b, c]
}

/// One sampled row of the monitored functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "E_tilde")]
    pub e_tilde: f64,
    #[serde(rename = "D")]
    pub dissipation: f64,
    #[serde(rename = "BD")]
    pub bd: f64,
    #[serde(rename = "MV")]
    pub mv: f64,
    pub mass_n: f64,
    pub mass_rho: f64,
    pub momentum_total: Vec<f64>,
    pub n_min: f64,
    pub n_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub dist_eq: f64,
    pub rho_gamma_plus1: f64,
    pub rho_hi: f64,
}

impl DiagnosticsRecord {
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.energy,
            self.e_tilde,
            self.dissipation,
            self.bd,
            self.mv,
            self.mass_n,
            self.mass_rho,
        ];
        v.extend(&self.momentum_total);
        v.extend([
            self.n_min,
            self.n_max,
            self.rho_min,
            self.rho_max,
            self.dist_eq,
            self.rho_gamma_plus1,
            self.rho_hi,
        ]);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }

    /// CSV header for a `dim`-dimensional run.
    pub fn csv_header(dim: usize) -> String {
        let mut cols = vec!["t", "E", "E_tilde", "D", "BD", "MV", "mass_n", "mass_rho"];
        cols.extend(["momentum_total_x", "momentum_total_y", "momentum_total_z"].iter().take(dim));
        cols.extend([
            "n_min",
            "n_max",
            "rho_min",
            "rho_max",
            "dist_eq",
            "rho_gamma_plus1",
            "rho_hi",
        ]);
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values()
            .iter()
            .map(|x| format!("{x:e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Side-channel quantities sampled with each record: the terms that enter the
/// regularized mass and energy balances and the momentum split between phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxRecord {
    pub t: f64,
    pub eta_dissipation: f64,
    /// `int n |w|^2` with the effective velocity `w`.
    #[serde(deserialize_with = "crate::invariants::null_as_nan")]
    pub n_w2: f64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// `eps int n^-12`
    pub eps_source: f64,
    /// `eps int (|grad sqrt n|^2 + |grad sqrt n|^4)`
    pub eps_sink: f64,
    /// `sqrt(eps) int n |grad v|^2`
    pub eps_n_grad_v: f64,
    /// `eps int n |v|^5`
    pub eps_n_v5: f64,
    /// `eps int (1+|v|^2)(|grad sqrt n|^2 + |grad sqrt n|^4)`
    pub eps_bd_weighted: f64,
    /// `eps int n^-12 |v|^2`
    pub eps_n12_v2: f64,
    /// `eps^2 int n^-25`
    pub eps2_n25: f64,
    /// `eps int |u|^10`
    pub eps_u10: f64,
    /// `eps int |grad rho|^2`
    pub eps_grad_rho: f64,
    /// `eps int (gamma rho^(gamma-2) + delta gamma0 rho^(gamma0-2)) |grad rho|^2`
    pub eps_pressure_grad_rho: f64,
    /// `delta int rho^gamma0`
    pub delta_pressure: f64,
    /// `delta int rho^(gamma0+1)`
    pub delta_pressure_plus1: f64,
}

impl AuxRecord {
    pub const EPS_COLUMNS: [&'static str; 8] = [
        "eps_n_grad_v",
        "eps_n_v5",
        "eps_bd_weighted",
        "eps_n12_v2",
        "eps2_n25",
        "eps_u10",
        "eps_grad_rho",
        "eps_pressure_grad_rho",
    ];

    pub const DELTA_COLUMNS: [&'static str; 2] = ["delta_pressure", "delta_pressure_plus1"];

    pub fn eps_columns(&self) -> [f64; 8] {
        [
            self.eps_n_grad_v,
            self.eps_n_v5,
            self.eps_bd_weighted,
            self.eps_n12_v2,
            self.eps2_n25,
            self.eps_u10,
            self.eps_grad_rho,
            self.eps_pressure_grad_rho,
        ]
    }

    pub fn delta_columns(&self) -> [f64; 2] {
        [self.delta_pressure, self.delta_pressure_plus1]
    }
}

/// Everything needed to turn a state into a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSuite {
    pub equilibrium: EquilibriumState,
    pub mass_n0: f64,
    pub mass_rho0: f64,
    /// Exponent of the `|n - n_c|^p` term of the equilibrium distance.
    pub p_exp: f64,
}

impl DiagnosticsSuite {
    pub fn from_raw(raw: &RawInitialData) -> Result<Self> {
        Ok(Self {
            equilibrium: equilibrium(raw)?,
            mass_n0: integrate(&raw.n0),
            mass_rho0: integrate(&raw.rho0),
            p_exp: 2.0,
        })
    }

    /// Suite referenced to the state itself (momenta `n v`, `rho u`).
    pub fn from_state(s: &State) -> Result<Self> {
        Self::from_raw(&RawInitialData::from_state(s, crate::init::DEFAULT_ETA0))
    }

    pub fn record(&self, s: &State, p: &ModelParams) -> Result<DiagnosticsRecord> {
        let c = conserved(s);
        let powers = density_powers(&s.rho, p);
        Ok(DiagnosticsRecord {
            t: s.t,
            energy: energy(s, p),
            e_tilde: modified_energy_with_masses(s, p, self.mass_n0, self.mass_rho0)?,
            dissipation: dissipation_rate(s, p),
            bd: bd_entropy(s),
            mv: mellet_vasseur(s),
            mass_n: c.mass_n,
            mass_rho: c.mass_rho,
            momentum_total: c.momentum,
            n_min: s.n.min(),
            n_max: s.n.max(),
            rho_min: s.rho.min(),
            rho_max: s.rho.max(),
            dist_eq: distance_to_equilibrium(s, &self.equilibrium, self.p_exp, p.gamma),
            rho_gamma_plus1: powers[0],
            rho_hi: powers[1],
        })
    }

    pub fn aux(&self, s: &State, p: &ModelParams) -> Result<AuxRecord> {
        let g = s.grid();
        let (m1, m2) = phase_means(s)?;
        let n_w2 = if s.n.min() > 0.0 {
            integrate(&effective_velocity(s, p)?.norm_sq().mul(&s.n))
        } else {
            f64::NAN
        };
        let eps = p.eps;
        let delta = p.delta;
        let mut out = AuxRecord {
            t: s.t,
            eta_dissipation: particle_viscous_dissipation(s, p),
            n_w2,
            m1,
            m2,
            eps_source: 0.0,
            eps_sink: 0.0,
            eps_n_grad_v: 0.0,
            eps_n_v5: 0.0,
            eps_bd_weighted: 0.0,
            eps_n12_v2: 0.0,
            eps2_n25: 0.0,
            eps_u10: 0.0,
            eps_grad_rho: 0.0,
            eps_pressure_grad_rho: 0.0,
            delta_pressure: 0.0,
            delta_pressure_plus1: 0.0,
        };
        if delta > 0.0 {
            out.delta_pressure = delta * integrate(&s.rho.map(|r| r.powf(p.gamma0)));
            out.delta_pressure_plus1 = delta * integrate(&s.rho.map(|r| r.powf(p.gamma0 + 1.0)));
        }
        if eps > 0.0 {
            let gsq = gradient(&s.n.map(f64::sqrt)).norm_sq();
            let v2 = s.v.norm_sq();
            let u2 = s.u.norm_sq();
            let grad_v = jacobian(&s.v).norm_sq();
            let grad_rho = gradient(&s.rho).norm_sq();
            let (n, r) = (s.n.values(), s.rho.values());
            let (gs, v2, u2, gv, gr) =
                (gsq.values(), v2.values(), u2.values(), grad_v.values(), grad_rho.values());
            let cells = |f: &(dyn Fn(usize) -> f64 + Sync)| {
                integrate(&ScalarField::from_vec(g, map_cells(g.len(), f)))
            };
            out.eps_source = eps * cells(&|c| n[c].powi(-12));
            out.eps_sink = eps * cells(&|c| gs[c] + gs[c] * gs[c]);
            out.eps_n_grad_v = eps.sqrt() * cells(&|c| n[c] * gv[c]);
            out.eps_n_v5 = eps * cells(&|c| n[c] * v2[c].powf(2.5));
            out.eps_bd_weighted = eps * cells(&|c| (1.0 + v2[c]) * (gs[c] + gs[c] * gs[c]));
            out.eps_n12_v2 = eps * cells(&|c| n[c].powi(-12) * v2[c]);
            out.eps2_n25 = eps * eps * cells(&|c| n[c].powi(-25));
            out.eps_u10 = eps * cells(&|c| u2[c].powi(5));
            out.eps_grad_rho = eps * cells(&|c| gr[c]);
            out.eps_pressure_grad_rho = eps
                * cells(&|c| {
                    let mut w = p.gamma * r[c].powf(p.gamma - 2.0);
                    if delta > 0.0 {
                        w += delta * p.gamma0 * r[c].powf(p.gamma0 - 2.0);
                    }
                    w * gr[c]
                });
        }
        Ok(out)
    }
}

/// Trapezoid `int_{t_0}^{t_k} f dt` at every sample.
pub fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for k in 0..t.len() {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
        }
        out.push(acc);
    }
    out
}
