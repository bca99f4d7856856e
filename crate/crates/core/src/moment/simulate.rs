use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::path_rng;

use super::{solve_jump_kernel, JumpKernel, KernelObjective, MomentTargets, SupportGrid};

/// Jump kernel as a function of time step and current level.
pub trait KernelFamily: Sync {
    fn kernel(&self, step: usize, t: f64, y: f64) -> Result<JumpKernel>;

    /// Whether the kernel can change with the time step (otherwise it is a
    /// function of `y` alone and cached across steps).
    fn time_dependent(&self) -> bool {
        true
    }
}

/// The same kernel at every `(t, y)`; atoms must be non-negative.
#[derive(Debug, Clone)]
pub struct FixedKernel(pub JumpKernel);

impl KernelFamily for FixedKernel {
    fn kernel(&self, _step: usize, _t: f64, _y: f64) -> Result<JumpKernel> {
        Ok(self.0.clone())
    }

    fn time_dependent(&self) -> bool {
        false
    }
}

/// Time-independent targets, re-solved at every level `y`. Solutions are
/// memoised across paths; the solve is deterministic, so sharing does not
/// affect results.
#[derive(Debug)]
pub struct StaticTargets {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub cap: f64,
    pub grid_size: usize,
    pub objective: KernelObjective,
    memo: Mutex<HashMap<u64, JumpKernel>>,
}

impl StaticTargets {
    pub fn new(u: Vec<f64>, p: Vec<f64>, cap: f64, grid_size: usize, objective: KernelObjective) -> Self {
        Self { u, p, cap, grid_size, objective, memo: Mutex::new(HashMap::new()) }
    }
}

impl KernelFamily for StaticTargets {
    fn kernel(&self, _step: usize, t: f64, y: f64) -> Result<JumpKernel> {
        if let Some(k) = self.memo.lock().expect("memo lock").get(&y.to_bits()) {
            return Ok(k.clone());
        }
        let targets = MomentTargets { u: self.u.clone(), p: self.p.clone(), cap: self.cap, floor: y, bound: None };
        let grid = SupportGrid::log_spaced(y, 5.0 / self.u[0], self.grid_size)?;
        let k = solve_jump_kernel(&targets, &grid, self.objective)
            .map_err(|_| Error::KernelInfeasible { time: t, level: y })?;
        let mut memo = self.memo.lock().expect("memo lock");
        if memo.len() < 100_000 {
            memo.insert(y.to_bits(), k.clone());
        }
        Ok(k)
    }

    fn time_dependent(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YPerpPath {
    /// Level at each grid time `k * dt`.
    pub values: Vec<f64>,
    pub jumps: usize,
    /// `int_0^T Psi_s(u) ds` for each probe loading `u`.
    pub compensators: Vec<f64>,
}

/// Kernel cache owned by one path, keyed on `(step, y)`.
#[derive(Default)]
pub(crate) struct KernelCache {
    map: HashMap<(usize, u64), JumpKernel>,
}

impl KernelCache {
    pub(crate) fn get(&mut self, family: &dyn KernelFamily, step: usize, t: f64, y: f64) -> Result<&JumpKernel> {
        let key = (if family.time_dependent() { step } else { 0 }, y.to_bits());
        if !self.map.contains_key(&key) {
            let k = family.kernel(step, t, y)?;
            self.map.insert(key, k);
        }
        Ok(&self.map[&key])
    }

    pub(crate) fn clear(&mut self) {
        self.map.clear();
    }
}

/// Advance `y` over `[t, t + dt)` with the kernel re-solved after every
/// jump. Returns the number of jumps; `compensators[i]` accumulates
/// `int Psi(probe_u[i]) ds`.
pub(crate) fn advance<R: Rng>(
    family: &dyn KernelFamily,
    cache: &mut KernelCache,
    step: usize,
    t: f64,
    dt: f64,
    y: &mut f64,
    probe_u: &[f64],
    compensators: &mut [f64],
    rng: &mut R,
) -> Result<usize> {
    let mut s = 0.0;
    let mut jumps = 0;
    loop {
        let kernel = cache.get(family, step, t, *y)?;
        let lambda = kernel.total_mass();
        let wait = if lambda > 0.0 { Exp::new(lambda).expect("positive rate").sample(rng) } else { f64::INFINITY };
        let span = wait.min(dt - s);
        for (c, &u) in compensators.iter_mut().zip(probe_u) {
            *c += kernel.exponent(u) * span;
        }
        if s + wait >= dt {
            return Ok(jumps);
        }
        s += wait;
        let mut pick = rng.random::<f64>() * lambda;
        let mut xi = kernel.atoms.last().expect("non-empty kernel").xi;
        for a in &kernel.atoms {
            if pick < a.w {
                xi = a.xi;
                break;
            }
            pick -= a.w;
        }
        *y = (*y + xi).max(0.0);
        jumps += 1;
    }
}

/// Simulate `n_paths` independent paths of `Y-perp` from `y0`.
pub fn simulate_yperp(
    family: &dyn KernelFamily,
    y0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    probe_u: &[f64],
) -> Result<Vec<YPerpPath>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if dt > horizon {
        return Err(Error::StepTooLarge { dt, horizon });
    }
    let steps = (horizon / dt).round() as usize;
    let results: Vec<Result<YPerpPath>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut cache = KernelCache::default();
            let mut y = y0;
            let mut values = Vec::with_capacity(steps + 1);
            values.push(y);
            let mut comp = vec![0.0; probe_u.len()];
            let mut jumps = 0;
            for k in 0..steps {
                if cache.map.len() > 4096 {
                    cache.clear();
                }
                jumps += advance(family, &mut cache, k, k as f64 * dt, dt, &mut y, probe_u, &mut comp, &mut rng)?;
                values.push(y);
            }
            Ok(YPerpPath { values, jumps, compensators: comp })
        })
        .collect();
    let mut out = Vec::with_capacity(n_paths);
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(p) => out.push(p),
            Err(e) => {
                log::debug!("Y-perp path aborted: {e}");
                aborted += 1;
            }
        }
    }
    if aborted * 1000 > n_paths {
        return Err(Error::TooManyAbortedPaths { aborted, total: n_paths });
    }
    Ok(out)
}
