use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::{advance, KernelCache};
use crate::moment::{solve_jump_kernel, JumpKernel, KernelFamily, KernelObjective, MomentTargets, SupportGrid};
use crate::pathset::{Observation, PathSet, TIME_EPS};
use crate::rng::path_rng;

use super::levy::{dot, IncrementSampler, LevyTriplet};
use super::model::{least_squares, LevyHjmModel, YMode};

/// Relative slack, in log space, of the pathwise ordering check.
pub const ORDERING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    #[default]
    NoArbitrage,
    /// All forward drifts set to zero (negative control).
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjmSimConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Musiela grid spacing; `dt` must be an integer multiple. Defaults to `dt`.
    #[serde(default)]
    pub dx: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub observation_times: Vec<f64>,
    /// Absolute maturities recorded at each observation time (those not
    /// yet expired).
    pub maturities: Vec<f64>,
    #[serde(default)]
    pub drift: DriftMode,
    /// Grid length in years; defaults to the smallest covering length.
    #[serde(default)]
    pub grid_extent: Option<f64>,
    /// Check `1 <= S^1 <= ... <= S^m` at every time step and grid maturity.
    #[serde(default)]
    pub check_ordering: bool,
    /// Update every grid cell at every step even when the volatilities allow
    /// the equivalent factored update.
    #[serde(default)]
    pub full_grid: bool,
}

/// Worst violation of `Psi^Y_t(u_i) = eta^i_{t-}(t)` over paths, steps and
/// tenors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ConsistencyReport {
    /// Against the short-end average over the step, the quantity the
    /// construction matches.
    pub at_nodes: f64,
    /// Against the forward spread rate at the end of the step, i.e. the
    /// left limit the continuous-time condition refers to; `O(dt)`.
    pub over_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct OrderingReport {
    pub nodes_checked: u64,
    pub violations: u64,
    /// Smallest `log S^1(t, T)` seen.
    pub min_log_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjmDiagnostics {
    pub consistency: ConsistencyReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingReport>,
    pub aborted: usize,
    pub grid_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjmSimulation {
    pub paths: PathSet,
    pub diagnostics: HjmDiagnostics,
}

/// Discretised model on a Musiela grid.
struct Grid {
    dx: f64,
    /// Time nodes as cell indices: steps of `dt` plus any observation
    /// times falling between them.
    nodes: Vec<usize>,
    cells: usize,
    /// Node indices at which to record, with the matching times.
    record: Vec<(usize, f64)>,
    maturity_cells: Vec<(f64, usize)>,
}

impl Grid {
    fn new(model: &LevyHjmModel, cfg: &HjmSimConfig) -> Result<Self> {
        let dt = cfg.dt;
        let dx = cfg.dx.unwrap_or(dt);
        if !(dt > 0.0 && dx > 0.0 && cfg.horizon > 0.0) {
            return Err(Error::InvalidInput("horizon, dt and dx must be positive".into()));
        }
        if dt > cfg.horizon + TIME_EPS {
            return Err(Error::StepTooLarge { dt, horizon: cfg.horizon });
        }
        let ratio = dt / dx;
        let s = ratio.round();
        if s < 1.0 || (ratio - s).abs() > 1e-9 * s {
            return Err(Error::GridMismatch { dt, dx });
        }
        let s = s as usize;
        let on_grid = |t: f64| -> Option<usize> {
            let c = (t / dx).round();
            ((c * dx - t).abs() <= TIME_EPS && c >= 0.0).then_some(c as usize)
        };
        let end = on_grid(cfg.horizon)
            .ok_or_else(|| Error::InvalidInput(format!("horizon {} is not a multiple of dx {dx}", cfg.horizon)))?;
        let mut obs_cells = Vec::new();
        for &t in &cfg.observation_times {
            match on_grid(t) {
                Some(c) if c <= end => obs_cells.push((c, t)),
                _ => {
                    return Err(Error::InvalidInput(format!("observation time {t} is not a grid time in [0, horizon]")))
                }
            }
        }
        let mut nodes: Vec<usize> = (0..end).step_by(s).chain(std::iter::once(end)).collect();
        nodes.extend(obs_cells.iter().map(|&(c, _)| c));
        nodes.sort_unstable();
        nodes.dedup();
        obs_cells.sort_by(|a, b| a.0.cmp(&b.0));
        obs_cells.dedup_by(|a, b| a.0 == b.0);
        let record = obs_cells.iter().map(|&(c, t)| (nodes.binary_search(&c).expect("node inserted"), t)).collect();
        let mut maturity_cells = Vec::new();
        for &m in &cfg.maturities {
            let c = (m / dx).round();
            if (c * dx - m).abs() > TIME_EPS || c < 0.0 {
                return Err(Error::InvalidInput(format!("maturity {m} is not on the grid of spacing {dx}")));
            }
            maturity_cells.push((m, c as usize));
        }
        maturity_cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_tenor = model.tenors().into_iter().fold(0.0, f64::max);
        let max_maturity = cfg.maturities.iter().copied().fold(0.0, f64::max);
        let needed = max_maturity.max(cfg.horizon + max_tenor.max(dx));
        let extent = cfg.grid_extent.unwrap_or(needed);
        if extent < needed - TIME_EPS {
            return Err(Error::GridTooShort { needed, available: extent });
        }
        let cells = (extent / dx - 1e-9).ceil() as usize;
        Ok(Self { dx, nodes, cells, record, maturity_cells })
    }

    fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    fn time(&self, k: usize) -> f64 {
        self.nodes[k] as f64 * self.dx
    }

    fn step_len(&self, k: usize) -> f64 {
        (self.nodes[k + 1] - self.nodes[k]) as f64 * self.dx
    }
}

/// Per-curve cell drifts and cell volatilities for time-homogeneous,
/// deterministic volatilities, indexed by time-to-maturity cell `j`.
struct CellCoefficients {
    /// `kappa[k][j]`, curve `k` (0 = OIS).
    kappa: Vec<Vec<f64>>,
    /// `vol[k][factor][j]`.
    vol: Vec<Vec<Vec<f64>>>,
}

struct Precomputed {
    x: LevyTriplet,
    /// Increment samplers by step length in cells.
    samplers: HashMap<usize, IncrementSampler>,
    /// `Psi^{Y-hat}(u_i)`.
    psi_hat: Vec<f64>,
    /// Pseudo-inverse rows: `q = pinv * r`.
    pinv: Vec<Vec<f64>>,
    coeffs: CellCoefficients,
    f0: Vec<Vec<f64>>,
    y0: Vec<f64>,
}

fn cell_coefficients(
    model: &LevyHjmModel,
    x: &LevyTriplet,
    psi_hat: &[f64],
    dx: f64,
    len: usize,
    drift: DriftMode,
    scale: Option<&[Vec<f64>]>,
) -> CellCoefficients {
    let m = model.n_spreads();
    let d = model.x_dim();
    let mut vol = vec![vec![vec![0.0; len]; d]; m + 1];
    for (k, vk) in vol.iter_mut().enumerate() {
        let spec = model.vols.curve(k);
        for (f, vf) in vk.iter_mut().enumerate() {
            for (j, v) in vf.iter_mut().enumerate() {
                let a = spec[f].integral(j as f64 * dx);
                let b = spec[f].integral((j + 1) as f64 * dx);
                *v = (b - a) / dx;
                if let Some(sc) = scale {
                    *v *= sc[k][j];
                }
            }
        }
    }
    let mut kappa = vec![vec![0.0; len]; m + 1];
    if drift == DriftMode::NoArbitrage {
        // Integrated vols at the cell edges, accumulated so the discrete
        // integral of kappa telescopes to the exponent at every edge.
        let mut big = vec![vec![0.0; d]; m + 1];
        let mut g_prev = vec![0.0; m + 1];
        for j in 0..len {
            for (k, bk) in big.iter_mut().enumerate() {
                for (f, b) in bk.iter_mut().enumerate() {
                    *b += vol[k][f][j] * dx;
                }
            }
            let g0 = model.integrated_ois_drift(x, &big[0]);
            kappa[0][j] = (g0 - g_prev[0]) / dx;
            g_prev[0] = g0;
            for i in 0..m {
                let gi = model.integrated_spread_drift(i, psi_hat[i], &big[0], &big[i + 1], g0);
                kappa[i + 1][j] = (gi - g_prev[i + 1]) / dx;
                g_prev[i + 1] = gi;
            }
        }
    }
    CellCoefficients { kappa, vol }
}

fn initial_cells(model: &LevyHjmModel, y0: &[f64], dx: f64, cells: usize) -> Result<Vec<Vec<f64>>> {
    let m = model.n_spreads();
    let mut out = vec![vec![0.0; cells]; m + 1];
    let disc = &model.curves.discount;
    let mut prev = disc.log_discount(0.0)?;
    for c in 0..cells {
        let next = disc.log_discount((c + 1) as f64 * dx)?;
        out[0][c] = -(next - prev) / dx;
        prev = next;
    }
    for i in 0..m {
        let curve = &model.curves.spreads[i];
        // The model's spot spread is exp(u_i . Y_0); any mismatch with the
        // curve's own value at 0 enters through the first cell.
        let mut prev = dot(&model.u[i], y0);
        for c in 0..cells {
            let next = curve.log_spread((c + 1) as f64 * dx)?;
            out[i + 1][c] = (next - prev) / dx;
            prev = next;
        }
    }
    Ok(out)
}

/// Floor passed to the kernel solver: the largest rung of a binary ladder
/// not above the current level. Using a lower floor is conservative (jumps
/// still keep the level non-negative) and bounds the number of distinct
/// solves.
fn floor_rung(y: f64) -> f64 {
    if y < 1e-6 {
        0.0
    } else {
        2f64.powi(y.log2().floor() as i32)
    }
}

/// Kernel family for one time step of one path: fixed targets `p`, level-
/// dependent floor. Solutions are shared across paths through `memo`.
struct LevelKernels<'a> {
    u: &'a [f64],
    p: Vec<f64>,
    cap: f64,
    grid_size: usize,
    objective: KernelObjective,
    memo: &'a Mutex<HashMap<Vec<u64>, JumpKernel>>,
}

impl KernelFamily for LevelKernels<'_> {
    fn kernel(&self, _step: usize, t: f64, y: f64) -> Result<JumpKernel> {
        let floor = floor_rung(y);
        let key: Vec<u64> = self.p.iter().map(|v| v.to_bits()).chain(std::iter::once(floor.to_bits())).collect();
        if let Some(k) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(k.clone());
        }
        let targets = MomentTargets { u: self.u.to_vec(), p: self.p.clone(), cap: self.cap, floor, bound: None };
        let grid = SupportGrid::log_spaced(floor, 5.0 / self.u[0], self.grid_size)?;
        let k = solve_jump_kernel(&targets, &grid, self.objective)
            .map_err(|_| Error::KernelInfeasible { time: t, level: y })?;
        let mut memo = self.memo.lock().expect("memo lock");
        if memo.len() < 100_000 {
            memo.insert(key, k.clone());
        }
        Ok(k)
    }
}

struct PathRecord {
    numeraire: f64,
    discount: Vec<f64>,
    spreads: Vec<Vec<f64>>,
}

struct PathOut {
    records: Vec<PathRecord>,
    at_nodes: f64,
    over_step: f64,
    ordering: OrderingReport,
}

struct Simulator<'a> {
    model: &'a LevyHjmModel,
    cfg: &'a HjmSimConfig,
    grid: Grid,
    pre: Precomputed,
    kernel_u: Vec<f64>,
    memo: Mutex<HashMap<Vec<u64>, JumpKernel>>,
}

impl Simulator<'_> {
    fn maturities_from(&self, t: f64) -> impl Iterator<Item = &(f64, usize)> {
        self.grid.maturity_cells.iter().filter(move |(mt, _)| *mt >= t - TIME_EPS)
    }

    fn record(&self, lo: usize, curves: &[Vec<f64>], y: &[f64], bank: f64, t: f64) -> Result<PathRecord> {
        let dx = self.grid.dx;
        let sums: Vec<Vec<f64>> = curves
            .iter()
            .map(|curve| self.maturities_from(t).map(|&(_, c)| curve[lo..c.max(lo)].iter().sum::<f64>() * dx).collect())
            .collect();
        self.make_record(&sums, y, bank, t)
    }

    /// `sums[k][j] = int_t^{T_j} theta^k`; curve 0 is the OIS forward curve.
    fn make_record(&self, sums: &[Vec<f64>], y: &[f64], bank: f64, t: f64) -> Result<PathRecord> {
        let discount: Vec<f64> = sums[0].iter().map(|v| (-v).exp()).collect();
        let spreads: Vec<Vec<f64>> = sums[1..]
            .iter()
            .zip(&self.model.u)
            .map(|(s, u)| {
                let uy = dot(u, y);
                s.iter().map(|v| (uy + v).exp()).collect()
            })
            .collect();
        let numeraire = bank.exp();
        if !numeraire.is_finite() || discount.iter().chain(spreads.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Explosion { time: t });
        }
        Ok(PathRecord { numeraire, discount, spreads })
    }

    /// Local exponent `Psi^Y(u_i)` over step `k` and the rate of change of
    /// `Y` beyond the driver; advances `Y-perp` in kernel mode.
    fn step_exponent<R: rand::Rng>(
        &self,
        k: usize,
        t: f64,
        dt: f64,
        short: &[f64],
        y_perp: &mut f64,
        cache: &mut KernelCache,
        rng: &mut R,
        psi_y: &mut [f64],
        drift_y: &mut [f64],
    ) -> Result<()> {
        let model = self.model;
        let m = model.n_spreads();
        psi_y.copy_from_slice(&self.pre.psi_hat);
        drift_y.fill(0.0);
        match model.y_mode {
            YMode::None => {}
            YMode::Integrated => {
                for (q, row) in drift_y.iter_mut().zip(&self.pre.pinv) {
                    *q = (0..m).map(|i| row[i] * (short[i + 1] - self.pre.psi_hat[i])).sum();
                }
                for i in 0..m {
                    psi_y[i] += dot(&model.u[i], drift_y);
                }
            }
            YMode::Kernel { cap, grid_size, objective } => {
                let family = LevelKernels {
                    u: &self.kernel_u,
                    p: (0..m).map(|i| short[i + 1] - self.pre.psi_hat[i]).collect(),
                    cap,
                    grid_size,
                    objective,
                    memo: &self.memo,
                };
                let mut comp = vec![0.0; m];
                cache.clear();
                let before = *y_perp;
                advance(&family, cache, k, t, dt, y_perp, &self.kernel_u, &mut comp, rng)?;
                drift_y[0] = (*y_perp - before) / dt;
                for i in 0..m {
                    psi_y[i] += comp[i] / dt;
                }
            }
        }
        Ok(())
    }

    fn check_ordering(&self, lo: usize, curves: &[Vec<f64>], y: &[f64], rep: &mut OrderingReport) {
        let m = self.model.n_spreads();
        if m == 0 {
            return;
        }
        let mut logs: Vec<f64> = (0..m).map(|i| dot(&self.model.u[i], y)).collect();
        for c in lo..=self.grid.cells {
            if c > lo {
                for i in 0..m {
                    logs[i] += curves[i + 1][c - 1] * self.grid.dx;
                }
            }
            rep.nodes_checked += 1;
            rep.min_log_spread = rep.min_log_spread.min(logs[0]);
            let mut bad = logs[0] < -ORDERING_TOL * logs[0].abs().max(1.0);
            for i in 1..m {
                bad |= logs[i] < logs[i - 1] - ORDERING_TOL * logs[i].abs().max(1.0);
            }
            if bad {
                rep.violations += 1;
            }
        }
    }

    fn path_factored(&self, p: usize, fac: &Factored) -> Result<PathOut> {
        let model = self.model;
        let g = &self.grid;
        let (d, n, m) = (model.x_dim(), model.y_dim(), model.n_spreads());
        let mut rng = path_rng(self.cfg.seed, p as u64);
        let mut state = vec![vec![0.0; d]; m + 1];
        let mut y = self.pre.y0.clone();
        let mut y_perp = 0.0;
        let mut bank = 0.0;
        let mut inc = vec![0.0; d + n];
        let mut records = Vec::with_capacity(g.record.len());
        let mut next_rec = 0;
        let mut at_nodes = 0.0f64;
        let mut over_step = 0.0f64;
        let mut cache = KernelCache::default();
        let mut short = vec![0.0; m + 1];
        let (mut psi_y, mut drift_y) = (vec![0.0; m], vec![0.0; n]);

        for k in 0..=g.steps() {
            let t = g.time(k);
            while next_rec < g.record.len() && g.record[next_rec].0 == k {
                let r = next_rec;
                let sums: Vec<Vec<f64>> = (0..=m)
                    .map(|kc| {
                        fac.obs[r][kc].iter().zip(&fac.load[r][kc]).map(|(det, ld)| det + dot(ld, &state[kc])).collect()
                    })
                    .collect();
                records.push(self.make_record(&sums, &y, bank, t)?);
                next_rec += 1;
            }
            if k == g.steps() {
                break;
            }
            let dt = g.step_len(k);
            for (kc, sh) in short.iter_mut().enumerate() {
                let short_vol = &fac.short_vol[k][kc];
                *sh = fac.short[k][kc] + dot(short_vol, &state[kc]);
            }
            if short.iter().any(|v| !v.is_finite()) {
                return Err(Error::Explosion { time: t });
            }
            self.step_exponent(k, t, dt, &short, &mut y_perp, &mut cache, &mut rng, &mut psi_y, &mut drift_y)?;
            for i in 0..m {
                at_nodes = at_nodes.max((psi_y[i] - short[i + 1]).abs());
                let next = fac.next[k][i + 1];
                if next.is_finite() {
                    over_step = over_step.max((psi_y[i] - next - dot(&fac.next_vol[k][i + 1], &state[i + 1])).abs());
                }
            }
            bank += short[0] * dt;
            self.pre.samplers[&(g.nodes[k + 1] - g.nodes[k])].sample(&mut rng, &mut inc);
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += inc[d + j] + drift_y[j] * dt;
            }
            for (st, rho) in state.iter_mut().zip(&fac.rho[k]) {
                for f in 0..d {
                    st[f] = rho[f] * st[f] + inc[f];
                }
            }
            if !bank.is_finite() || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Explosion { time: t + dt });
            }
        }
        let ordering = OrderingReport { min_log_spread: f64::INFINITY, ..Default::default() };
        Ok(PathOut { records, at_nodes, over_step, ordering })
    }

    fn path(&self, p: usize) -> Result<PathOut> {
        let model = self.model;
        let g = &self.grid;
        let (d, n, m) = (model.x_dim(), model.y_dim(), model.n_spreads());
        let mut rng = path_rng(self.cfg.seed, p as u64);
        let mut curves = self.pre.f0.clone();
        let mut y = self.pre.y0.clone();
        let mut y_perp = 0.0;
        let mut bank = 0.0;
        let mut inc = vec![0.0; d + n];
        let mut records = Vec::with_capacity(g.record.len());
        let mut next_rec = 0;
        let mut at_nodes = 0.0f64;
        let mut over_step = 0.0f64;
        let mut ordering = OrderingReport { min_log_spread: f64::INFINITY, ..Default::default() };
        let mut cache = KernelCache::default();
        let sd = model.vols.state_dependence;
        let (mut psi_y, mut drift_y) = (vec![0.0; m], vec![0.0; n]);
        if self.cfg.check_ordering {
            self.check_ordering(0, &curves, &y, &mut ordering);
        }

        for k in 0..=g.steps() {
            let t = g.time(k);
            let lo = g.nodes[k];
            while next_rec < g.record.len() && g.record[next_rec].0 == k {
                records.push(self.record(lo, &curves, &y, bank, t)?);
                next_rec += 1;
            }
            if k == g.steps() {
                break;
            }
            let off = g.nodes[k + 1];
            let dt = g.step_len(k);
            let short: Vec<f64> = curves.iter().map(|c| c[lo..off].iter().sum::<f64>() / (off - lo) as f64).collect();
            if short.iter().any(|v| !v.is_finite()) {
                return Err(Error::Explosion { time: t });
            }

            self.step_exponent(k, t, dt, &short, &mut y_perp, &mut cache, &mut rng, &mut psi_y, &mut drift_y)?;
            for i in 0..m {
                at_nodes = at_nodes.max((psi_y[i] - short[i + 1]).abs());
                if off < g.cells {
                    over_step = over_step.max((psi_y[i] - curves[i + 1][off]).abs());
                }
            }

            bank += short[0] * dt;
            self.pre.samplers[&(g.nodes[k + 1] - g.nodes[k])].sample(&mut rng, &mut inc);
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += inc[d + j] + drift_y[j] * dt;
            }
            let len = g.cells - off;
            let scaled;
            let coeffs = match &sd {
                None => &self.pre.coeffs,
                Some(sd) => {
                    let mult: Vec<Vec<f64>> =
                        curves.iter().map(|c| c[off..].iter().map(|&th| sd.multiplier(th)).collect()).collect();
                    scaled = cell_coefficients(
                        model,
                        &self.pre.x,
                        &self.pre.psi_hat,
                        g.dx,
                        len,
                        self.cfg.drift,
                        Some(&mult),
                    );
                    &scaled
                }
            };
            for (kc, curve) in curves.iter_mut().enumerate() {
                let cells = &mut curve[off..];
                for (c, &kap) in cells.iter_mut().zip(&coeffs.kappa[kc][..len]) {
                    *c += kap * dt;
                }
                for (f, vf) in coeffs.vol[kc].iter().enumerate() {
                    let dxf = inc[f];
                    if dxf == 0.0 {
                        continue;
                    }
                    for (c, &v) in cells.iter_mut().zip(&vf[..len]) {
                        *c += v * dxf;
                    }
                }
            }
            if !bank.is_finite() || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Explosion { time: t + dt });
            }
            if self.cfg.check_ordering {
                self.check_ordering(off, &curves, &y, &mut ordering);
            }
        }
        Ok(PathOut { records, at_nodes, over_step, ordering })
    }
}

/// Path-independent pieces of the scheme for deterministic exponential
/// volatilities. Cell vols are then geometric in the time-to-maturity
/// index, so every stochastic quantity the scheme reads (short-end
/// averages, the next cell, integrals up to recorded maturities) is a fixed
/// multiple of `M_k = sum_{l<k} rho^{k-1-l} dX_l`, one state per curve and
/// factor. This is an exact rewrite of the grid update, not an
/// approximation of it.
struct Factored {
    /// Drift-only short-end average, `[k][curve]`.
    short: Vec<Vec<f64>>,
    /// Drift-only value of the first cell after the step (NaN past the grid).
    next: Vec<Vec<f64>>,
    /// Drift-only `int_t^{T_j} theta`, `[record][curve][j]`.
    obs: Vec<Vec<Vec<f64>>>,
    /// Decay of `M` over step `k`, `[k][curve][factor]`.
    rho: Vec<Vec<Vec<f64>>>,
    /// Block-average vol of the short end, `[k][curve][factor]`.
    short_vol: Vec<Vec<Vec<f64>>>,
    /// Vol of the first cell after the step, times the step decay.
    next_vol: Vec<Vec<Vec<f64>>>,
    /// `int_0^{T_j - t} sigma`, `[record][curve][j][factor]`.
    load: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Factored {
    fn new(model: &LevyHjmModel, grid: &Grid, pre: &Precomputed) -> Self {
        let m1 = model.n_spreads() + 1;
        let dx = grid.dx;
        let mut det = pre.f0.clone();
        let mut short = Vec::with_capacity(grid.steps());
        let mut next = Vec::with_capacity(grid.steps());
        let mut obs = Vec::with_capacity(grid.record.len());
        let mut load = Vec::with_capacity(grid.record.len());
        let mut rec = 0;
        for k in 0..=grid.steps() {
            let lo = grid.nodes[k];
            let t = grid.time(k);
            while rec < grid.record.len() && grid.record[rec].0 == k {
                let mats: Vec<&(f64, usize)> =
                    grid.maturity_cells.iter().filter(|(mt, _)| *mt >= t - TIME_EPS).collect();
                obs.push(
                    det.iter()
                        .map(|c| mats.iter().map(|&&(_, n)| c[lo..n.max(lo)].iter().sum::<f64>() * dx).collect())
                        .collect(),
                );
                load.push(
                    (0..m1)
                        .map(|kc| {
                            mats.iter()
                                .map(|&&(_, n)| {
                                    let tau = n.saturating_sub(lo) as f64 * dx;
                                    model.vols.curve(kc).iter().map(|v| v.integral(tau)).collect()
                                })
                                .collect()
                        })
                        .collect(),
                );
                rec += 1;
            }
            if k == grid.steps() {
                break;
            }
            let off = grid.nodes[k + 1];
            let dt = grid.step_len(k);
            short.push(det.iter().map(|c| c[lo..off].iter().sum::<f64>() / (off - lo) as f64).collect());
            next.push(det.iter().map(|c| c.get(off).copied().unwrap_or(f64::NAN)).collect());
            for (kc, c) in det.iter_mut().enumerate() {
                for (v, &kap) in c[off..].iter_mut().zip(&pre.coeffs.kappa[kc]) {
                    *v += kap * dt;
                }
            }
        }
        let per_step = |f: &dyn Fn(&super::vol::ExpVol, f64) -> f64| -> Vec<Vec<Vec<f64>>> {
            (0..grid.steps())
                .map(|k| {
                    let dt = grid.step_len(k);
                    (0..m1).map(|kc| model.vols.curve(kc).iter().map(|v| f(v, dt)).collect()).collect()
                })
                .collect()
        };
        let rho = per_step(&|v, dt| (-v.decay * dt).exp());
        let short_vol = per_step(&|v, dt| v.integral(dt) / dt);
        let next_vol = per_step(&|v, dt| v.integral(dx) / dx * (-v.decay * dt).exp());
        Self { short, next, obs, rho, short_vol, next_vol, load }
    }
}

/// Simulate the model on a Musiela grid under the risk-neutral measure.
///
/// Curves are held as cell averages over `[c dx, (c + 1) dx)` in absolute
/// maturity; a time step re-anchors the short end by index and adds the
/// cell drift and the cell volatility times the driver increment. Cell
/// drifts are differences of the integrated drift at cell edges, so
/// discounted bonds and `S^i(t, T) B(t, T) / B_t` are martingales of the
/// discrete scheme for maturities on the grid.
pub fn simulate_hjm(model: &LevyHjmModel, cfg: &HjmSimConfig) -> Result<HjmSimulation> {
    model.validate()?;
    if cfg.n_paths == 0 {
        return Err(Error::EmptyPathSet);
    }
    let grid = Grid::new(model, cfg)?;
    let x = model.x_triplet();
    let yt = model.y_triplet();
    let psi_hat: Vec<f64> = model.u.iter().map(|u| yt.exponent_unchecked(u)).collect();
    let n = model.y_dim();
    let m = model.n_spreads();
    let pinv: Vec<Vec<f64>> = (0..n)
        .map(|row| {
            (0..m)
                .map(|col| {
                    let e: Vec<f64> = (0..m).map(|i| f64::from(u8::from(i == col))).collect();
                    least_squares(&model.u, &e, n)[row]
                })
                .collect()
        })
        .collect();
    if model.y_mode == YMode::Integrated && m > n {
        log::warn!("{m} spreads on a {n}-dimensional Y: consistency holds only in the least-squares sense");
    }
    let y0 = model.initial_y()?;
    let coeffs = cell_coefficients(model, &x, &psi_hat, grid.dx, grid.cells, cfg.drift, None);
    let f0 = initial_cells(model, &y0, grid.dx, grid.cells)?;
    let mut samplers = HashMap::new();
    for w in grid.nodes.windows(2) {
        samplers.entry(w[1] - w[0]).or_insert_with(|| model.driver.increment_sampler((w[1] - w[0]) as f64 * grid.dx));
    }
    let pre = Precomputed { samplers, x, psi_hat, pinv, coeffs, f0, y0 };
    let sim = Simulator {
        model,
        cfg,
        grid,
        pre,
        kernel_u: model.u.iter().map(|u| u.first().copied().unwrap_or(0.0)).collect(),
        memo: Mutex::new(HashMap::new()),
    };

    // The factored scheme needs deterministic vols and never materialises
    // whole curves, which the ordering check inspects.
    let factored = (model.vols.state_dependence.is_none() && !cfg.check_ordering && !cfg.full_grid)
        .then(|| Factored::new(model, &sim.grid, &sim.pre));
    let outs: Vec<Result<PathOut>> = (0..cfg.n_paths)
        .into_par_iter()
        .with_min_len(64)
        .map(|p| match &factored {
            Some(fac) => sim.path_factored(p, fac),
            None => sim.path(p),
        })
        .collect();
    let mut kept = Vec::with_capacity(outs.len());
    let mut aborted = 0;
    for o in outs {
        match o {
            Ok(p) => kept.push(p),
            Err(e) => {
                log::debug!("path aborted: {e}");
                aborted += 1;
            }
        }
    }
    if aborted * 1000 > cfg.n_paths {
        return Err(Error::TooManyAbortedPaths { aborted, total: cfg.n_paths });
    }
    if aborted > 0 {
        log::warn!("{aborted} of {} paths aborted by the non-finite guard", cfg.n_paths);
    }
    let mut consistency = ConsistencyReport::default();
    let mut ordering = OrderingReport { min_log_spread: f64::INFINITY, ..Default::default() };
    for p in &kept {
        consistency.at_nodes = consistency.at_nodes.max(p.at_nodes);
        consistency.over_step = consistency.over_step.max(p.over_step);
        ordering.nodes_checked += p.ordering.nodes_checked;
        ordering.violations += p.ordering.violations;
        ordering.min_log_spread = ordering.min_log_spread.min(p.ordering.min_log_spread);
    }

    let g = &sim.grid;
    let observations = g
        .record
        .iter()
        .enumerate()
        .map(|(r, &(_, t))| {
            let maturities: Vec<f64> =
                g.maturity_cells.iter().filter(|(mt, _)| *mt >= t - TIME_EPS).map(|&(mt, _)| mt).collect();
            let mut obs = Observation {
                time: t,
                maturities,
                numeraire: Vec::with_capacity(kept.len()),
                discount: Vec::new(),
                spreads: vec![Vec::new(); m],
            };
            for p in &kept {
                let rec = &p.records[r];
                obs.numeraire.push(rec.numeraire);
                obs.discount.extend_from_slice(&rec.discount);
                for (dst, src) in obs.spreads.iter_mut().zip(&rec.spreads) {
                    dst.extend_from_slice(src);
                }
            }
            obs
        })
        .collect();
    let paths =
        PathSet { n_paths: kept.len(), seed: cfg.seed, dt: cfg.dt, tenors: model.tenors(), observations, aborted };
    Ok(HjmSimulation {
        paths,
        diagnostics: HjmDiagnostics {
            consistency,
            ordering: cfg.check_ordering.then_some(ordering),
            aborted,
            grid_cells: g.cells,
        },
    })
}

/// Consistency residuals of the model simulated under `cfg`.
pub fn consistency_residual(model: &LevyHjmModel, cfg: &HjmSimConfig) -> Result<ConsistencyReport> {
    Ok(simulate_hjm(model, cfg)?.diagnostics.consistency)
}
