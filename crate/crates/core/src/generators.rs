//! Built-in initial data.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::init::RawInitialData;
use crate::snapshot;

fn one() -> f64 {
    1.0
}
fn mode_one() -> usize {
    1
}
fn default_cutoff() -> usize {
    4
}
fn default_amplitude() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    /// Uniform densities moving with a common velocity (zero if empty).
    Equilibrium {
        #[serde(default = "one")]
        n: f64,
        #[serde(default = "one")]
        rho: f64,
        #[serde(default)]
        velocity: Vec<f64>,
    },
    /// `n = n_mean (1 + a sin th)`, `v = a cos th`, `rho = rho_mean (1 + a sin th)`,
    /// `u = -a cos th`, with `th = 2 pi mode x_0`.
    SinePerturbation {
        amplitude: f64,
        #[serde(default = "mode_one")]
        mode: usize,
        #[serde(default = "one")]
        n_mean: f64,
        #[serde(default = "one")]
        rho_mean: f64,
    },
    /// Two smooth particle bumps over a positive background, or over vacuum.
    TwoBump {
        #[serde(default)]
        vacuum: bool,
    },
    /// Random trigonometric polynomials with wave numbers up to `cutoff`.
    RandomSmooth {
        #[serde(default = "default_cutoff")]
        cutoff: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Raw data or a state checkpoint in the snapshot format.
    Snapshot { path: PathBuf },
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            Generator::Equilibrium { n, rho, .. } => {
                if !(*n > 0.0 && *rho > 0.0) {
                    return bad(format!("initial densities must be positive, got n={n}, rho={rho}"));
                }
            }
            Generator::SinePerturbation { amplitude, mode, n_mean, rho_mean } => {
                if !(amplitude.abs() < 1.0) {
                    return bad(format!("initial.amplitude must satisfy |a|<1, got {amplitude}"));
                }
                if *mode == 0 {
                    return bad("initial.mode must be at least 1".into());
                }
                if !(*n_mean > 0.0 && *rho_mean > 0.0) {
                    return bad("initial mean densities must be positive".into());
                }
            }
            Generator::TwoBump { .. } => {}
            Generator::RandomSmooth { cutoff, amplitude } => {
                if *cutoff == 0 {
                    return bad("initial.cutoff must be at least 1".into());
                }
                if !(*amplitude >= 0.0 && *amplitude < 1.0) {
                    return bad(format!("initial.amplitude must lie in [0,1), got {amplitude}"));
                }
            }
            Generator::Snapshot { path } => {
                if !path.exists() {
                    return bad(format!("initial.path `{}` does not exist", path.display()));
                }
            }
        }
        Ok(())
    }

    /// Raw initial data on `grid`; `seed` drives `random-smooth` only.
    pub fn build(&self, grid: PeriodicGrid, seed: u64, eta0: f64) -> Result<RawInitialData> {
        self.validate()?;
        let dim = grid.dim();
        let raw = match self {
            Generator::Equilibrium { n, rho, velocity } => {
                let mut u = [0.0; 3];
                if !velocity.is_empty() {
                    if velocity.len() != dim {
                        return Err(Error::Config(format!(
                            "initial.velocity needs {dim} components, got {}",
                            velocity.len()
                        )));
                    }
                    u[..dim].copy_from_slice(velocity);
                }
                let uc = &u[..dim];
                RawInitialData {
                    n0: ScalarField::constant(grid, *n),
                    m0: VectorField::constant(grid, &uc.iter().map(|x| x * n).collect::<Vec<_>>()),
                    rho0: ScalarField::constant(grid, *rho),
                    m0_tilde: VectorField::constant(
                        grid,
                        &uc.iter().map(|x| x * rho).collect::<Vec<_>>(),
                    ),
                    eta0,
                }
            }
            Generator::SinePerturbation { amplitude, mode, n_mean, rho_mean } => {
                let a = *amplitude;
                let k = 2.0 * PI * *mode as f64;
                let n0 = ScalarField::from_fn(grid, |x| n_mean * (1.0 + a * (k * x[0]).sin()));
                let rho0 = ScalarField::from_fn(grid, |x| rho_mean * (1.0 + a * (k * x[0]).sin()));
                let v = VectorField::from_fn(grid, |x| [a * (k * x[0]).cos(), 0.0, 0.0]);
                let u = VectorField::from_fn(grid, |x| [-a * (k * x[0]).cos(), 0.0, 0.0]);
                RawInitialData {
                    m0: v.weighted(&n0),
                    m0_tilde: u.weighted(&rho0),
                    n0,
                    rho0,
                    eta0,
                }
            }
            Generator::TwoBump { vacuum } => {
                let background = if *vacuum { 0.0 } else { 0.2 };
                let n0 = ScalarField::from_fn(grid, |x| {
                    background + bump(x, 0.25, dim) + 0.5 * bump(x, 0.7, dim)
                });
                let v = VectorField::from_fn(grid, |x| [0.3 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
                let rho0 = ScalarField::from_fn(grid, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).cos());
                RawInitialData {
                    m0: v.weighted(&n0),
                    m0_tilde: VectorField::zeros(grid),
                    n0,
                    rho0,
                    eta0,
                }
            }
            Generator::RandomSmooth { cutoff, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut series = || random_series(grid, *cutoff, &mut rng);
                let a = *amplitude;
                let n0 = series().map(|s| 1.0 + a * s);
                let rho0 = series().map(|s| 1.0 + a * s);
                let v: Vec<ScalarField> = (0..dim).map(|_| series().scale(a)).collect();
                let u: Vec<ScalarField> = (0..dim).map(|_| series().scale(a)).collect();
                RawInitialData {
                    m0: VectorField::new(v)?.weighted(&n0),
                    m0_tilde: VectorField::new(u)?.weighted(&rho0),
                    n0,
                    rho0,
                    eta0,
                }
            }
            Generator::Snapshot { path } => {
                let raw = snapshot::read_raw(path, eta0)?;
                if raw.grid() != grid {
                    return Err(Error::Config(format!(
                        "snapshot `{}` is on a {}-d N={} grid, config asks for {}-d N={}",
                        path.display(),
                        raw.grid().dim(),
                        raw.grid().points_per_axis(),
                        dim,
                        grid.points_per_axis()
                    )));
                }
                raw
            }
        };
        raw.validate()?;
        Ok(raw)
    }
}

/// `C^inf` bump of height 1 and radius 0.2 centered at `(c, .., c)`.
fn bump(x: [f64; 3], c: f64, dim: usize) -> f64 {
    let mut r2 = 0.0;
    for xi in x.iter().take(dim) {
        let mut d = (xi - c).abs();
        d = d.min(1.0 - d);
        r2 += d * d;
    }
    let s = r2 / 0.04;
    if s < 1.0 {
        (1.0 - 1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

/// Sum of cosines with random amplitudes and phases over wave vectors with
/// entries in `[-cutoff, cutoff]`, scaled so that its sup is at most 1.
fn random_series(grid: PeriodicGrid, cutoff: usize, rng: &mut ChaCha8Rng) -> ScalarField {
    let dim = grid.dim();
    let c = cutoff as i64;
    let width = (2 * c + 1) as usize;
    let mut modes = Vec::new();
    for idx in 0..width.pow(dim as u32) {
        let mut k = [0i64; 3];
        let mut rest = idx;
        for ki in k.iter_mut().take(dim) {
            *ki = (rest % width) as i64 - c;
            rest /= width;
        }
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let amp: f64 = rng.gen_range(-1.0..1.0);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        modes.push((k, amp, phase));
    }
    let total: f64 = modes.iter().map(|m| m.1.abs()).sum();
    ScalarField::from_fn(grid, |x| {
        let s: f64 = modes
            .iter()
            .map(|(k, a, ph)| {
                let arg = 2.0 * PI * (0..dim).map(|i| k[i] as f64 * x[i]).sum::<f64>();
                a * (arg + ph).cos()
            })
            .sum();
        s / total
    })
}
