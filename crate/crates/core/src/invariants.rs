//! Run-level checks of the structural properties: energy inequality,
//! modified-energy monotonicity, conservation, entropy bounds, density floor
//! and the regularized mass budget.

use serde::{Deserialize, Serialize};

use crate::diagnostics::cumulative_trapezoid;
use crate::integrator::{RunResult, RunStatus, StepConfig};
use crate::model::{ModelParams, State};

/// Slack of the discrete energy checks, `tol = C1 dt + C2 h^2`. Fixed by the
/// refinement study in `examples/calibrate_energy_tol.rs`.
pub const ENERGY_TOL_C1: f64 = 1.0;
pub const ENERGY_TOL_C2: f64 = 1e-2;

pub const MASS_DRIFT_MAX: f64 = 1e-11;
pub const MOMENTUM_DRIFT_MAX: f64 = 1e-10;
pub const DRAG_IDENTITY_MAX: f64 = 1e-10;
pub const MASS_BUDGET_FACTOR: f64 = 5.0;
pub const MV_CAP: f64 = 1e6;

fn c1() -> f64 {
    ENERGY_TOL_C1
}
fn c2() -> f64 {
    ENERGY_TOL_C2
}
fn mv_cap() -> f64 {
    MV_CAP
}
fn budget() -> f64 {
    MASS_BUDGET_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "c1")]
    pub energy_c1: f64,
    #[serde(default = "c2")]
    pub energy_c2: f64,
    #[serde(default = "mv_cap")]
    pub mv_cap: f64,
    #[serde(default = "budget")]
    pub mass_budget_factor: f64,
    /// Required `dist_eq(t_end) / dist_eq(0)`; unchecked when absent.
    #[serde(default)]
    pub equilibrium_ratio: Option<f64>,
    /// Required `|m1 - m2|(t_end)`; unchecked when absent.
    #[serde(default)]
    pub alignment: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            energy_c1: c1(),
            energy_c2: c2(),
            mv_cap: mv_cap(),
            mass_budget_factor: budget(),
            equilibrium_ratio: None,
            alignment: None,
        }
    }
}

impl CheckConfig {
    pub fn tolerance(&self, dt: f64, h: f64) -> f64 {
        self.energy_c1 * dt + self.energy_c2 * h * h
    }
}

/// One checked property. `value` is the worst observed quantity and
/// `bound` its admissible limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub name: String,
    pub anchor: String,
    pub passed: bool,
    #[serde(deserialize_with = "null_as_nan")]
    pub value: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub bound: f64,
    pub detail: String,
}

/// JSON has no non-finite numbers; they are written as `null`.
pub fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn outcome(name: &str, anchor: &str, value: f64, bound: f64, detail: String) -> Outcome {
    Outcome {
        name: name.into(),
        anchor: anchor.into(),
        passed: value <= bound,
        value,
        bound,
        detail,
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    // NaN propagates so a non-finite sample fails its check
    it.fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Max over samples of `E(t_k) + int_0^t_k D - E(0)`.
pub fn energy_excess(r: &RunResult) -> f64 {
    let t: Vec<f64> = r.records.iter().map(|x| x.t).collect();
    let d: Vec<f64> = r.records.iter().map(|x| x.dissipation).collect();
    let cum = cumulative_trapezoid(&t, &d);
    let e0 = r.records[0].energy;
    max_of(r.records.iter().zip(&cum).map(|(x, c)| x.energy + c - e0))
}

/// Max over consecutive samples of `E~(t_{k+1}) - E~(t_k)`.
pub fn modified_energy_increase(r: &RunResult) -> f64 {
    if r.records.len() < 2 {
        return 0.0;
    }
    max_of(r.records.windows(2).map(|w| w[1].e_tilde - w[0].e_tilde))
}

/// Max over samples of `|Delta int n - int_0^t (source - sink)|`, and the
/// corresponding step-relative bound factor `max(1, t)`.
pub fn mass_budget_residual(r: &RunResult) -> Vec<(f64, f64)> {
    let t: Vec<f64> = r.aux.iter().map(|a| a.t).collect();
    let net: Vec<f64> = r.aux.iter().map(|a| a.eps_source - a.eps_sink).collect();
    let cum = cumulative_trapezoid(&t, &net);
    let m0 = r.records[0].mass_n;
    r.records
        .iter()
        .zip(&cum)
        .map(|(x, c)| ((x.mass_n - m0 - c).abs(), x.t.max(1.0)))
        .collect()
}

/// Scale of the momentum-drift check: `|P(0)|`, else `int (n|v| + rho|u|)`,
/// else the total mass.
pub fn momentum_scale(s0: &State) -> f64 {
    let c = crate::diagnostics::conserved(s0);
    let p0 = norm(&c.momentum);
    let flux = crate::grid::integrate(&s0.n.mul(&s0.v.norm_sq().map(f64::sqrt)))
        + crate::grid::integrate(&s0.rho.mul(&s0.u.norm_sq().map(f64::sqrt)));
    let s = p0.max(flux);
    if s > 0.0 {
        s
    } else {
        c.mass_n + c.mass_rho
    }
}

/// Evaluate every check that applies to a run with parameters `p`.
pub fn check_run(
    r: &RunResult,
    s0: &State,
    p: &ModelParams,
    step: &StepConfig,
    checks: &CheckConfig,
) -> Vec<Outcome> {
    let mut out = Vec::new();
    out.push(Outcome {
        name: "run-completed".into(),
        anchor: "time integration".into(),
        passed: r.status == RunStatus::Completed,
        value: if r.status == RunStatus::Completed { 0.0 } else { 1.0 },
        bound: 0.0,
        detail: r.message.clone().unwrap_or_else(|| format!("{:?}", r.status)),
    });
    if r.records.is_empty() {
        return out;
    }
    let h = s0.grid().spacing();
    let dt = if r.steps > 0 { r.dt_largest } else { step.dt_max };
    let tol = checks.tolerance(dt, h);
    let first = &r.records[0];

    out.push(outcome(
        "records-finite",
        "sample completeness",
        r.records.iter().filter(|x| !x.is_finite()).count() as f64,
        0.0,
        format!("{} samples", r.records.len()),
    ));
    if p.eps == 0.0 {
        out.push(outcome(
            "energy-inequality",
            "energy inequality",
            energy_excess(r),
            tol,
            format!("tol = {:e} dt + {:e} h^2", checks.energy_c1, checks.energy_c2),
        ));
    }
    if p.eps == 0.0 && p.delta == 0.0 {
        out.push(outcome(
            "modified-energy-monotone",
            "modified energy decay",
            modified_energy_increase(r),
            tol,
            "max increase between consecutive samples".into(),
        ));
    }
    if p.mu >= 0.0 && p.mu + p.lambda >= 0.0 {
        out.push(outcome(
            "dissipation-nonnegative",
            "energy inequality",
            max_of(r.records.iter().map(|x| -x.dissipation)).max(0.0),
            0.0,
            "minus the smallest dissipation rate".into(),
        ));
    }
    let drift = |f: fn(&crate::diagnostics::DiagnosticsRecord) -> f64| {
        let m0 = f(first);
        max_of(r.records.iter().map(|x| (f(x) - m0).abs() / m0.abs()))
    };
    if p.eps == 0.0 {
        out.push(outcome(
            "mass-n-conservation",
            "conservation laws",
            drift(|x| x.mass_n),
            MASS_DRIFT_MAX,
            "relative drift of int n".into(),
        ));
    }
    out.push(outcome(
        "mass-rho-conservation",
        "conservation laws",
        drift(|x| x.mass_rho),
        MASS_DRIFT_MAX,
        "relative drift of int rho".into(),
    ));
    if p.eps == 0.0 {
        let scale = momentum_scale(s0);
        let p0 = &first.momentum_total;
        let worst = max_of(r.records.iter().map(|x| {
            let d: Vec<f64> = x.momentum_total.iter().zip(p0).map(|(a, b)| a - b).collect();
            norm(&d) / scale
        }));
        out.push(outcome(
            "momentum-conservation",
            "conservation laws",
            worst,
            MOMENTUM_DRIFT_MAX,
            format!("drift of int (n v + rho u) relative to {scale:e}"),
        ));
        let worst = max_of(r.records.iter().zip(&r.aux).map(|(x, a)| {
            let d: Vec<f64> = (0..p0.len())
                .map(|i| a.m1[i] * x.mass_n + a.m2[i] * x.mass_rho - p0[i])
                .collect();
            norm(&d)
        }));
        out.push(outcome(
            "drag-exchange-identity",
            "modified energy decay",
            worst,
            DRAG_IDENTITY_MAX,
            "|m1 int n + m2 int rho - P(0)|".into(),
        ));
    }
    let bd0 = first.bd;
    let bd_max = max_of(r.records.iter().map(|x| x.bd));
    out.push(Outcome {
        name: "bd-entropy-bounded".into(),
        anchor: "Bresch-Desjardins entropy".into(),
        passed: bd_max.is_finite(),
        value: bd_max - bd0,
        bound: f64::MAX,
        detail: format!("max BD {bd_max:e}, initial {bd0:e}"),
    });
    out.push(outcome(
        "mv-bounded",
        "Mellet-Vasseur entropy",
        max_of(r.records.iter().map(|x| x.mv)),
        checks.mv_cap,
        "max MV against the run cap".into(),
    ));
    if p.eps > 0.0 {
        let floor = r
            .records
            .iter()
            .map(|x| x.n_min.min(x.rho_min))
            .fold(f64::INFINITY, f64::min);
        out.push(Outcome {
            name: "density-floor".into(),
            anchor: "density bounds".into(),
            passed: floor > 0.0 && floor >= step.density_floor,
            value: floor,
            bound: step.density_floor,
            detail: "smallest sampled density (must stay above the floor)".into(),
        });
        let res = mass_budget_residual(r);
        let limit = checks.mass_budget_factor * dt;
        let worst = max_of(res.iter().map(|(e, w)| e / w));
        out.push(outcome(
            "mass-budget",
            "regularized mass balance",
            worst,
            limit,
            format!("residual per unit time against {} dt", checks.mass_budget_factor),
        ));
    }
    if let Some(ratio) = checks.equilibrium_ratio {
        let last = r.records.last().unwrap();
        out.push(outcome(
            "equilibrium-convergence",
            "large-time behavior",
            last.dist_eq / first.dist_eq,
            ratio,
            format!("dist_eq {:e} -> {:e}", first.dist_eq, last.dist_eq),
        ));
    }
    if let Some(limit) = checks.alignment {
        let a = r.aux.last().unwrap();
        let d: Vec<f64> = a.m1.iter().zip(&a.m2).map(|(x, y)| x - y).collect();
        out.push(outcome(
            "velocity-alignment",
            "large-time behavior",
            norm(&d),
            limit,
            "|m1 - m2| at the final sample".into(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::DiagnosticsSuite;
    use crate::grid::PeriodicGrid;
    use crate::integrator::run;

    #[test]
    fn equilibrium_run_passes_everything() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let s0 = State::constant(g, 1.0, 2.0, &[0.5]);
        let p = ModelParams::default();
        let c = StepConfig::new(0.1, 0.02);
        let r = run(&s0, &p, &c, &DiagnosticsSuite::from_state(&s0).unwrap()).unwrap();
        let checks = CheckConfig { equilibrium_ratio: None, ..Default::default() };
        let out = check_run(&r, &s0, &p, &c, &checks);
        assert!(out.iter().all(|o| o.passed), "{out:#?}");
        assert!(out.iter().any(|o| o.name == "momentum-conservation"));
        assert!(!out.iter().any(|o| o.name == "mass-budget"));
    }

    #[test]
    fn failed_run_fails_the_status_check() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let s0 = State::constant(g, 1.0, 2.0, &[0.0]);
        let p = ModelParams::default();
        let c = StepConfig::new(0.0, 0.0);
        let mut r = run(&s0, &p, &c, &DiagnosticsSuite::from_state(&s0).unwrap()).unwrap();
        r.status = RunStatus::Blowup;
        let out = check_run(&r, &s0, &p, &c, &CheckConfig::default());
        assert!(!out[0].passed);
    }

    #[test]
    fn nan_sample_fails() {
        assert!(max_of([1.0, f64::NAN, 0.0].into_iter()).is_nan());
        assert!(!outcome("x", "y", f64::NAN, 1.0, String::new()).passed);
    }
}
