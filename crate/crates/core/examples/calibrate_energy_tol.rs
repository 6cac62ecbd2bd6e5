//! Refinement study behind `ENERGY_TOL_C1` / `ENERGY_TOL_C2`.
//!
//! Runs the smooth sine-perturbation problem on a grid of `(N, dt)` pairs.
//! Besides the worst excess of the energy inequality and the worst
//! modified-energy increase, it prints the residual of the full balance
//! `E(t) + int (D + eta n |D(v)|^2) - E(0)`, which is pure discretization
//! error. The constants are chosen so that `tol` bounds that residual on
//! every row with a safety factor of at least 10.
//!
//! `cargo run --release --example calibrate_energy_tol`

use twophase::diagnostics::DiagnosticsSuite;
use twophase::generators::Generator;
use twophase::grid::PeriodicGrid;
use twophase::diagnostics::cumulative_trapezoid;
use twophase::integrator::{run, Scheme, StepConfig};
use twophase::invariants::{energy_excess, modified_energy_increase, ENERGY_TOL_C1, ENERGY_TOL_C2};
use twophase::model::ModelParams;

fn main() {
    let p = ModelParams::default();
    let gen = Generator::SinePerturbation { amplitude: 0.1, mode: 1, n_mean: 1.0, rho_mean: 1.0 };
    println!(
        "{:>5} {:>7} {:>6} {:>10} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "N", "every", "scheme", "dt", "E excess", "E~ increase", "balance", "tol", "margin"
    );
    let cases = [
        (Scheme::ExplicitRk2, 1.0, 0.01),
        (Scheme::ExplicitRk2, 1.0, 0.005),
        (Scheme::ExplicitRk2, 1.0, 0.0025),
        (Scheme::Imex, 1.0, 0.0025),
    ];
    for &n in &[32usize, 64, 128] {
        for &(scheme, dt_max, every) in &cases {
            let grid = PeriodicGrid::new(1, n).unwrap();
            let raw = gen.build(grid, 0, 0.01).unwrap();
            let s0 = raw.to_state().unwrap();
            let mut c = StepConfig::new(5.0, every);
            c.dt_max = dt_max;
            c.scheme = scheme;
            let r = run(&s0, &p, &c, &DiagnosticsSuite::from_raw(&raw).unwrap()).unwrap();
            let h = grid.spacing();
            let tol = ENERGY_TOL_C1 * r.dt_largest + ENERGY_TOL_C2 * h * h;
            let ex = energy_excess(&r);
            let inc = modified_energy_increase(&r);
            let t: Vec<f64> = r.records.iter().map(|x| x.t).collect();
            let d: Vec<f64> = r
                .records
                .iter()
                .zip(&r.aux)
                .map(|(x, a)| x.dissipation + a.eta_dissipation)
                .collect();
            let e0 = r.records[0].energy;
            let balance = r
                .records
                .iter()
                .zip(cumulative_trapezoid(&t, &d))
                .map(|(x, c)| (x.energy + c - e0).abs())
                .fold(0.0, f64::max);
            let tag = if scheme == Scheme::Imex { "imex" } else { "rk2" };
            println!(
                "{n:>5} {every:>7} {tag:>6} {:>10.3e} {ex:>12.3e} {inc:>12.3e} {balance:>12.3e} {tol:>12.3e} {:>8.1}",
                r.dt_largest,
                tol / balance
            );
        }
    }
}
