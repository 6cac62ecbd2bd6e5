//! Cell-parallel execution helpers.
//!
//! With the `parallel` feature, cellwise maps over large fields and sweep
//! members run on the rayon pool. Without it (or when [`Exec::Sequential`] is
//! selected at runtime) everything runs on the calling thread. Reductions are
//! always sequential so results stay bitwise identical across modes.

use std::sync::atomic::{AtomicU8, Ordering};

/// Cell counts below this are always mapped sequentially.
pub const PAR_MIN_CELLS: usize = 1 << 14;

/// Smallest run of cells handed to one rayon task.
const PAR_CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

static EXEC: AtomicU8 = AtomicU8::new(1);

/// Select the process-wide execution mode. `Parallel` degrades to sequential
/// when the crate is built without the `parallel` feature.
pub fn set_exec(exec: Exec) {
    EXEC.store(
        match exec {
            Exec::Sequential => 0,
            Exec::Parallel => 1,
        },
        Ordering::Relaxed,
    );
}

pub fn exec() -> Exec {
    if cfg!(feature = "parallel") && EXEC.load(Ordering::Relaxed) == 1 {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

/// `out[i] = f(i)` for `i in 0..len`.
pub fn map_cells<F>(len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len >= PAR_MIN_CELLS && exec() == Exec::Parallel && rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            return (0..len).into_par_iter().with_min_len(PAR_CHUNK).map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Map a list of independent jobs, preserving order.
pub fn map_jobs<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec() == Exec::Parallel && rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            return items.into_par_iter().map(f).collect();
        }
    }
    items.into_iter().map(f).collect()
}
