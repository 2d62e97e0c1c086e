//! Time stepping of the reduced `(r, z)` system.
//!
//! The evolved unknown is `q = ω / r`, which obeys pure transport plus vertical
//! diffusion (no stretching term). Each step is split as
//!
//! 1. semi-Lagrangian advection: RK2 backward characteristics on bilinearly
//!    interpolated `u`, then clamped bilinear sampling of `q` at the foot;
//! 2. backward-Euler vertical diffusion, one tridiagonal solve per radial row,
//!    with a zero-extension (default) or zero-flux ghost at the top and bottom;
//! 3. optionally, explicit horizontal diffusion `ε (∂_r² + ∂_r / r) q`.
//!
//! `ω = r q` is derived and `u` is rebuilt from `ω` after every step. The direct
//! `ω` scheme (used for cross-checks) adds the stretching factor `exp(dt u^r / r)`.

use log::warn;
use rayon::prelude::*;

use crate::biot_savart::{ur_over_r, BiotSavart, KernelTable};
use crate::diagnostics::{DiagnosticsRecord, Recorder};
use crate::error::{Error, Result};
use crate::grid::{outer_band_fraction, GridSpec, Parity, Role, ScalarField, VelocityField};
use crate::tridiag::{ImplicitDiffusion, Wall};

/// Vertical viscosity; fixed to one throughout.
pub const VERTICAL_VISCOSITY: f64 = 1.0;

/// Share of `∫|q|` allowed in the outer quarter of the box before a warning.
const OUTER_BAND_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub dt_cfl_factor: f64,
    pub n_theta: usize,
    /// Horizontal viscosity `ε = 1/n` of the regularized system; zero for the
    /// vertical-only problem.
    pub eps_h: f64,
    pub t_end: f64,
    /// Diagnostics are recorded every `diag_every` steps (plus at snapshot times
    /// and at `t_end`).
    pub diag_every: usize,
    pub evolve_omega_direct: bool,
    /// Ghost rule of the vertical diffusion at `z_min` and `z_max`.
    pub z_wall: Wall,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt_cfl_factor > 0.0 && self.dt_cfl_factor <= 1.0) {
            return bad(format!("dt_cfl_factor must be in (0, 1], got {}", self.dt_cfl_factor));
        }
        if !(self.eps_h >= 0.0 && self.eps_h.is_finite()) {
            return bad(format!("eps_h must be >= 0, got {}", self.eps_h));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if self.diag_every == 0 {
            return bad("diag_every must be >= 1".into());
        }
        KernelTable::new(self.n_theta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub q: ScalarField,
    pub omega: ScalarField,
    pub u: VelocityField,
}

/// `ω = r q` nodewise.
pub fn omega_from_q(q: &ScalarField) -> ScalarField {
    let g = *q.grid();
    let mut w = q.clone().with_role(Role::OmegaTheta);
    for i in 0..g.n_r() {
        let r = g.r(i);
        for v in &mut w.values_mut()[i * g.n_z()..(i + 1) * g.n_z()] {
            *v *= r;
        }
    }
    w
}

/// `q = ω / r` nodewise.
pub fn q_from_omega(omega: &ScalarField) -> ScalarField {
    let g = *omega.grid();
    let mut q = omega.clone().with_role(Role::QOmegaOverR);
    for i in 0..g.n_r() {
        let r = g.r(i);
        for v in &mut q.values_mut()[i * g.n_z()..(i + 1) * g.n_z()] {
            *v /= r;
        }
    }
    q
}

/// Stable time step for the current velocity, capped so that `t + dt` does not
/// pass `next_stop`.
pub fn cfl_dt(state: &SimState, config: &SimConfig, next_stop: f64) -> Result<f64> {
    if !state.u.is_finite() {
        return Err(Error::NonFiniteVelocity);
    }
    let g = &config.grid;
    let (ur, uz) = (state.u.u_r.max_abs(), state.u.u_z.max_abs());
    let mut dt = g.dz() * g.dz() / (2.0 * VERTICAL_VISCOSITY);
    if ur > 0.0 {
        dt = dt.min(g.dr() / ur);
    }
    if uz > 0.0 {
        dt = dt.min(g.dz() / uz);
    }
    if config.eps_h > 0.0 {
        dt = dt.min(g.dr() * g.dr() / (2.0 * config.eps_h));
    }
    dt *= config.dt_cfl_factor;
    let remaining = next_stop - state.t;
    if remaining > 0.0 && remaining < dt {
        dt = remaining;
    }
    Ok(dt)
}

/// Bilinear value of a node field at an arbitrary `(r, z)`.
///
/// Negative `r` is reflected through the axis with the field's parity, the mirror
/// node at `-r_0` carries the parity ghost, and everything beyond the box is zero.
/// The result is clamped to the range of the four stencil values.
fn sample(f: &ScalarField, parity: Parity, r: f64, z: f64) -> f64 {
    let g = f.grid();
    let (r, sign) = if r < 0.0 { (-r, parity.sign()) } else { (r, 1.0) };
    let s = r / g.dr() - 0.5;
    let t = (z - g.z_min()) / g.dz() - 0.5;
    let (i0f, j0f) = (s.floor(), t.floor());
    let (n_r, n_z) = (g.n_r() as isize, g.n_z() as isize);
    if !(i0f < n_r as f64 && j0f >= -1.0 && j0f < n_z as f64) {
        return 0.0;
    }
    let (i0, j0) = (i0f as isize, j0f as isize);
    let (fr, fz) = (s - i0f, t - j0f);
    let node = |i: isize, j: isize| -> f64 {
        if j < 0 || j >= n_z || i >= n_r {
            0.0
        } else if i < 0 {
            parity.sign() * f.get(0, j as usize)
        } else {
            f.get(i as usize, j as usize)
        }
    };
    let (a, b, c, d) = (node(i0, j0), node(i0 + 1, j0), node(i0, j0 + 1), node(i0 + 1, j0 + 1));
    let v = (1.0 - fr) * ((1.0 - fz) * a + fz * c) + fr * ((1.0 - fz) * b + fz * d);
    let lo = a.min(b).min(c.min(d));
    let hi = a.max(b).max(c.max(d));
    sign * v.clamp(lo, hi)
}

/// Semi-Lagrangian transport of `f` by `u` over `dt`.
fn advect(f: &ScalarField, parity: Parity, u: &VelocityField, dt: f64) -> ScalarField {
    let g = *f.grid();
    let mut out = f.clone();
    out.values_mut().par_chunks_mut(g.n_z()).enumerate().for_each(|(i, row)| {
        let r = g.r(i);
        for (j, v) in row.iter_mut().enumerate() {
            let z = g.z(j);
            let k = g.idx(i, j);
            let (ur0, uz0) = (u.u_r.values()[k], u.u_z.values()[k]);
            let (rm, zm) = (r - 0.5 * dt * ur0, z - 0.5 * dt * uz0);
            let urm = sample(&u.u_r, Parity::Odd, rm, zm);
            let uzm = sample(&u.u_z, Parity::Even, rm, zm);
            *v = sample(f, parity, r - dt * urm, z - dt * uzm);
        }
    });
    out
}

/// Backward-Euler `∂_z²` on every radial row.
fn diffuse_vertical(f: &mut ScalarField, dt: f64, wall: Wall) {
    let g = *f.grid();
    let lambda = VERTICAL_VISCOSITY * dt / (g.dz() * g.dz());
    f.values_mut().par_chunks_mut(g.n_z()).for_each_init(
        || ImplicitDiffusion::new(g.n_z(), lambda, wall),
        |op, row| op.solve(row),
    );
}

/// Explicit `ε (1/r) ∂_r (r ∂_r q)`: no flux through the axis, zero ghost past `r_max`.
fn diffuse_horizontal(q: &ScalarField, eps: f64, dt: f64) -> ScalarField {
    let g = *q.grid();
    let coef = eps * dt / (g.dr() * g.dr());
    let mut out = q.clone();
    for i in 0..g.n_r() {
        let r = g.r(i);
        let r_in = r - 0.5 * g.dr();
        let r_out = r + 0.5 * g.dr();
        for j in 0..g.n_z() {
            let c = q.get(i, j);
            let outer = if i + 1 < g.n_r() { q.get(i + 1, j) } else { 0.0 };
            let inner = if i > 0 { q.get(i - 1, j) } else { c };
            let flux = r_out * (outer - c) - r_in * (c - inner);
            out.set(i, j, c + coef * flux / r);
        }
    }
    out
}

/// One split step of `∂_t q + u·∇q - ∂_z² q = ε Δ_h q`.
pub fn advance_q(q: &ScalarField, u: &VelocityField, dt: f64, eps_h: f64, wall: Wall) -> ScalarField {
    let mut next = advect(q, Parity::Even, u, dt).with_role(Role::QOmegaOverR);
    diffuse_vertical(&mut next, dt, wall);
    if eps_h > 0.0 {
        next = diffuse_horizontal(&next, eps_h, dt);
    }
    next
}

/// One split step of `∂_t ω + u·∇ω - (u^r/r) ω - ∂_z² ω = 0`, stretching taken as
/// the exact factor `exp(dt u^r/r)` with `u^r/r` frozen at the start of the step.
pub fn advance_omega_direct(omega: &ScalarField, u: &VelocityField, dt: f64, wall: Wall) -> ScalarField {
    let stretch = ur_over_r(u);
    let mut next = advect(omega, Parity::Odd, u, dt).with_role(Role::OmegaTheta);
    for (w, s) in next.values_mut().iter_mut().zip(stretch.values()) {
        *w *= (dt * s).exp();
    }
    diffuse_vertical(&mut next, dt, wall);
    next
}

/// Owns the velocity operator for one configuration.
pub struct Solver {
    config: SimConfig,
    biot_savart: BiotSavart,
}

impl Solver {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let kt = KernelTable::new(config.n_theta)?;
        let biot_savart = BiotSavart::new(config.grid, &kt);
        Ok(Self { config, biot_savart })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn biot_savart(&self) -> &BiotSavart {
        &self.biot_savart
    }

    /// Builds the state for `q` at time `t` (ω and u derived).
    pub fn state_from_q(&self, q: ScalarField, t: f64, step: u64) -> Result<SimState> {
        if *q.grid() != self.config.grid {
            return Err(Error::GridMismatch);
        }
        let q = ScalarField::from_values(*q.grid(), Role::QOmegaOverR, q.into_values())?;
        let omega = omega_from_q(&q);
        let u = self.biot_savart.velocity(&omega)?;
        Ok(SimState { t, step, q, omega, u })
    }

    /// Builds the state for a given `ω` (q derived); used by the direct scheme.
    pub fn state_from_omega(&self, omega: ScalarField, t: f64, step: u64) -> Result<SimState> {
        if *omega.grid() != self.config.grid {
            return Err(Error::GridMismatch);
        }
        let omega = ScalarField::from_values(*omega.grid(), Role::OmegaTheta, omega.into_values())?;
        let q = q_from_omega(&omega);
        let u = self.biot_savart.velocity(&omega)?;
        Ok(SimState { t, step, q, omega, u })
    }

    /// Advances by the CFL step (never past `next_stop`).
    pub fn step(&self, state: &SimState, next_stop: f64) -> Result<SimState> {
        let dt = cfl_dt(state, &self.config, next_stop)?;
        self.step_with_dt(state, dt)
    }

    pub fn step_with_dt(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let (t, step) = (state.t + dt, state.step + 1);
        let next = if self.config.evolve_omega_direct {
            let mut omega = advance_omega_direct(&state.omega, &state.u, dt, self.config.z_wall);
            if self.config.eps_h > 0.0 {
                let q = diffuse_horizontal(&q_from_omega(&omega), self.config.eps_h, dt);
                omega = omega_from_q(&q);
            }
            self.state_from_omega(omega, t, step)?
        } else {
            let q = advance_q(&state.q, &state.u, dt, self.config.eps_h, self.config.z_wall);
            self.state_from_q(q, t, step)?
        };
        if !next.q.is_finite() || !next.u.is_finite() {
            return Err(Error::NonFiniteVelocity);
        }
        Ok(next)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    /// States at the requested snapshot times (in order).
    pub snapshots: Vec<SimState>,
    /// `(t, sup|q|)` after every step, starting with the initial state.
    pub sup_q: Vec<(f64, f64)>,
    pub final_state: SimState,
}

/// A run that stopped on an error, with everything computed up to the last
/// consistent state.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunOutput,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted at t = {}: {}", self.partial.final_state.t, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Runs from `q0` at `t = 0` to `t_end`.
pub fn run(
    config: &SimConfig,
    q0: ScalarField,
    snapshot_times: &[f64],
) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let fail = |error: Error, q0: &ScalarField| {
        let g = *q0.grid();
        Box::new(RunFailure {
            error,
            partial: RunOutput {
                records: Vec::new(),
                snapshots: Vec::new(),
                sup_q: Vec::new(),
                final_state: SimState {
                    t: 0.0,
                    step: 0,
                    q: q0.clone(),
                    omega: omega_from_q(q0),
                    u: VelocityField::zeros(g),
                },
            },
        })
    };
    let solver = match Solver::new(config.clone()) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, &q0)),
    };
    let state = match if config.evolve_omega_direct {
        solver.state_from_omega(omega_from_q(&q0), 0.0, 0)
    } else {
        solver.state_from_q(q0.clone(), 0.0, 0)
    } {
        Ok(s) => s,
        Err(e) => return Err(fail(e, &q0)),
    };
    let mut recorder = Recorder::new();
    let first = match recorder.record(&state, state.q.max_abs()) {
        Ok(r) => r,
        Err(e) => return Err(fail(e, &q0)),
    };
    let initial_snapshot = snapshot_times.contains(&0.0).then(|| state.clone());
    let mut out = continue_run(&solver, state, recorder, vec![first], snapshot_times);
    let snapshots = match &mut out {
        Ok(o) => &mut o.snapshots,
        Err(f) => &mut f.partial.snapshots,
    };
    if let Some(s) = initial_snapshot {
        snapshots.insert(0, s);
    }
    out
}

/// Continues a run from `state`. `records` holds the rows already produced
/// (its last row describes `state`); the recorder carries the running integrals.
/// Snapshots are taken at the requested times after `state.t`.
pub fn continue_run(
    solver: &Solver,
    mut state: SimState,
    mut recorder: Recorder,
    mut records: Vec<DiagnosticsRecord>,
    snapshot_times: &[f64],
) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let config = solver.config();
    let t_end = config.t_end;
    let mut stops: Vec<f64> =
        snapshot_times.iter().copied().filter(|&t| t > state.t && t <= t_end).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut snapshots = Vec::new();
    let mut sup_q = vec![(state.t, state.q.max_abs())];
    let mut window_sup = 0.0_f64;
    let mut warned = false;
    let mut since_row = 0usize;
    let mut next_stop_idx = 0usize;

    while state.t < t_end {
        let from_stops = next_stop_idx < stops.len();
        let next_stop = stops.get(next_stop_idx).copied().unwrap_or(t_end);
        let next = match solver.step(&state, next_stop) {
            Ok(s) => s,
            Err(error) => {
                return Err(Box::new(RunFailure {
                    error,
                    partial: RunOutput { records, snapshots, sup_q, final_state: state },
                }))
            }
        };
        let prev = std::mem::replace(&mut state, next);
        // land exactly on stop times
        let at_stop = (state.t - next_stop).abs() <= 1e-12 * next_stop.abs().max(1.0);
        if at_stop {
            state.t = next_stop;
            next_stop_idx += 1;
        }
        let s = state.q.max_abs();
        sup_q.push((state.t, s));
        window_sup = window_sup.max(s);
        since_row += 1;

        if !warned && outer_band_fraction(&state.q) > OUTER_BAND_WARNING {
            warn!(
                "t = {:.4}: more than {OUTER_BAND_WARNING} of |q| sits in the outer quarter of the box; truncation may matter",
                state.t
            );
            warned = true;
        }

        let is_snapshot = at_stop && from_stops;
        if since_row >= config.diag_every || at_stop || state.t >= t_end {
            match recorder.record(&state, window_sup) {
                Ok(r) => records.push(r),
                Err(error) => {
                    return Err(Box::new(RunFailure {
                        error,
                        partial: RunOutput { records, snapshots, sup_q, final_state: prev },
                    }))
                }
            }
            window_sup = 0.0;
            since_row = 0;
        }
        if is_snapshot {
            snapshots.push(state.clone());
        }
    }
    Ok(RunOutput { records, snapshots, sup_q, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cylindrical_integral;

    fn config(grid: GridSpec) -> SimConfig {
        SimConfig {
            grid,
            dt_cfl_factor: 0.9,
            n_theta: 16,
            eps_h: 0.0,
            t_end: 0.01,
            diag_every: 5,
            evolve_omega_direct: false,
            z_wall: Wall::ZeroExtension,
        }
    }

    fn small_grid() -> GridSpec {
        GridSpec::new(2.0, -2.0, 2.0, 16, 32).unwrap()
    }

    fn ring_q(g: GridSpec) -> ScalarField {
        ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| {
            (-((r - 0.5).powi(2) + z * z) / 0.15f64.powi(2)).exp()
        })
    }

    fn state_with(q: ScalarField, u: VelocityField) -> SimState {
        SimState { t: 0.0, step: 0, omega: omega_from_q(&q), q, u }
    }

    #[test]
    fn cfl_diffusive_limit() {
        let g = small_grid();
        let cfg = config(g);
        let st = state_with(ScalarField::zeros(g, Role::QOmegaOverR), VelocityField::zeros(g));
        let dt = cfl_dt(&st, &cfg, 100.0).unwrap();
        assert_eq!(dt, 0.9 * g.dz() * g.dz() / 2.0);
        // capped at the next stop
        assert_eq!(cfl_dt(&st, &cfg, 1e-5).unwrap(), 1e-5);
        // refinement quarters the diffusive step
        let cfg2 = config(g.refined());
        let st2 = state_with(
            ScalarField::zeros(g.refined(), Role::QOmegaOverR),
            VelocityField::zeros(g.refined()),
        );
        let dt2 = cfl_dt(&st2, &cfg2, 100.0).unwrap();
        assert!((dt / dt2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cfl_advective_limit_and_errors() {
        let g = small_grid();
        let cfg = config(g);
        let mut u = VelocityField::zeros(g);
        u.u_z.set(3, 3, 1e4);
        let st = state_with(ScalarField::zeros(g, Role::QOmegaOverR), u.clone());
        assert_eq!(cfl_dt(&st, &cfg, 100.0).unwrap(), 0.9 * g.dz() / 1e4);
        u.u_z.values_mut()[0] = f64::NAN;
        let st = state_with(ScalarField::zeros(g, Role::QOmegaOverR), u);
        assert!(matches!(cfl_dt(&st, &cfg, 1.0), Err(Error::NonFiniteVelocity)));
    }

    #[test]
    fn cfl_horizontal_limit() {
        let g = small_grid();
        let mut cfg = config(g);
        cfg.eps_h = 10.0;
        let st = state_with(ScalarField::zeros(g, Role::QOmegaOverR), VelocityField::zeros(g));
        let dt = cfl_dt(&st, &cfg, 100.0).unwrap();
        assert!((dt - 0.9 * g.dr() * g.dr() / 20.0).abs() < 1e-15);
    }

    #[test]
    fn z_independent_data_is_stationary_without_flow() {
        let g = small_grid();
        let q = ScalarField::from_fn(g, Role::QOmegaOverR, |r, _| (-r * r).exp());
        let next = advance_q(&q, &VelocityField::zeros(g), 1e-3, 0.0, Wall::ZeroFlux);
        for (a, b) in next.values().iter().zip(q.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn assert_symbol(q: &ScalarField, k: f64, wall: Wall) {
        let g = *q.grid();
        let dt = 2e-3;
        let next = advance_q(q, &VelocityField::zeros(g), dt, 0.0, wall);
        let symbol = 4.0 / (g.dz() * g.dz()) * (0.5 * k * g.dz()).sin().powi(2);
        let factor = 1.0 / (1.0 + symbol * dt);
        for (a, b) in next.values().iter().zip(q.values()) {
            assert!((a - factor * b).abs() < 1e-10);
        }
    }

    #[test]
    fn vertical_diffusion_matches_discrete_symbol() {
        let g = small_grid();
        let pi = std::f64::consts::PI;
        for m in [1.0, 3.0, 7.0] {
            // zero-flux eigenvectors: cos(mπ(z - z_min)/L)
            let k = m * pi / g.z_len();
            let q = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| (k * (z - g.z_min())).cos() * (1.0 + r));
            assert_symbol(&q, k, Wall::ZeroFlux);
            // zero-extension eigenvectors vanish at the ghost nodes z_min - dz/2, z_max + dz/2
            let k = m * pi / (g.z_len() + g.dz());
            let z0 = g.z_min() - 0.5 * g.dz();
            let q = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| (k * (z - z0)).sin() * (1.0 + r));
            assert_symbol(&q, k, Wall::ZeroExtension);
        }
    }

    #[test]
    fn advection_is_monotone() {
        let g = small_grid();
        let q = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| {
            let a = (-((r - 0.6).powi(2) + z * z) * 20.0).exp();
            let b = (-((r - 1.0).powi(2) + (z - 0.4).powi(2)) * 30.0).exp();
            a - 0.7 * b
        });
        let u = VelocityField::new(
            ScalarField::from_fn(g, Role::RadialVelocity, |r, z| 3.0 * r * z.cos()),
            ScalarField::from_fn(g, Role::AxialVelocity, |r, z| -2.0 * (r + z).sin()),
        )
        .unwrap();
        let next = advect(&q, Parity::Even, &u, 0.05);
        assert!(next.max() <= q.max());
        assert!(next.min() >= q.min());
    }

    #[test]
    fn sampling_reflects_and_truncates() {
        let g = GridSpec::new(1.0, 0.0, 1.0, 4, 4).unwrap();
        let f = ScalarField::from_fn(g, Role::OmegaTheta, |r, z| r + z);
        // nodes are reproduced exactly
        assert_eq!(sample(&f, Parity::Odd, g.r(2), g.z(1)), f.get(2, 1));
        // odd reflection through the axis
        let v = sample(&f, Parity::Odd, 0.3, g.z(1));
        assert_eq!(sample(&f, Parity::Odd, -0.3, g.z(1)), -v);
        // zero outside the box
        assert_eq!(sample(&f, Parity::Odd, 5.0, 0.5), 0.0);
        assert_eq!(sample(&f, Parity::Odd, 0.5, -3.0), 0.0);
    }

    #[test]
    fn direct_scheme_without_flow_is_vertical_diffusion() {
        let g = small_grid();
        let q = ring_q(g);
        let w = omega_from_q(&q);
        let dt = 1e-3;
        let direct = advance_omega_direct(&w, &VelocityField::zeros(g), dt, Wall::ZeroExtension);
        let via_q = omega_from_q(&advance_q(&q, &VelocityField::zeros(g), dt, 0.0, Wall::ZeroExtension));
        for (a, b) in direct.values().iter().zip(via_q.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn direct_scheme_preserves_sign() {
        let g = small_grid();
        let solver = Solver::new(config(g)).unwrap();
        let st = solver.state_from_q(ring_q(g).scaled(5.0), 0.0, 0).unwrap();
        let next = advance_omega_direct(&st.omega, &st.u, 0.01, Wall::ZeroExtension);
        assert!(next.min() >= 0.0);
    }

    #[test]
    fn zero_state_is_stationary() {
        let g = small_grid();
        let solver = Solver::new(config(g)).unwrap();
        let st = solver.state_from_q(ScalarField::zeros(g, Role::QOmegaOverR), 0.0, 0).unwrap();
        let next = solver.step(&st, 1.0).unwrap();
        assert_eq!(next.q.max_abs(), 0.0);
        assert_eq!(next.u.u_r.max_abs(), 0.0);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn step_keeps_omega_equal_r_q_and_mass() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 32, 64).unwrap();
        let solver = Solver::new(config(g)).unwrap();
        let st = solver.state_from_q(ring_q(g), 0.0, 0).unwrap();
        let next = solver.step(&st, 1.0).unwrap();
        for i in 0..g.n_r() {
            for j in 0..g.n_z() {
                let expect = g.r(i) * next.q.get(i, j);
                assert!((next.omega.get(i, j) - expect).abs() <= 1e-14 * expect.abs().max(1e-300));
            }
        }
        let m0 = cylindrical_integral(&st.q);
        let m1 = cylindrical_integral(&next.q);
        assert!(((m1 - m0) / m0).abs() <= 1e-3, "{m0} -> {m1}");
    }

    #[test]
    fn horizontal_diffusion_is_monotone_and_stable() {
        let g = small_grid();
        let mut cfg = config(g);
        cfg.eps_h = 0.5;
        cfg.t_end = 0.05;
        let out = run(&cfg, ring_q(g), &[]).unwrap();
        assert!(out.final_state.q.is_finite());
        assert!(out.sup_q.iter().all(|&(_, s)| s <= 1.0 + 1e-12));
        // horizontal spreading lowers the peak faster than vertical diffusion alone
        cfg.eps_h = 0.0;
        let plain = run(&cfg, ring_q(g), &[]).unwrap();
        assert!(out.final_state.q.max_abs() < plain.final_state.q.max_abs());
    }

    #[test]
    fn run_with_zero_end_time_has_one_row() {
        let g = small_grid();
        let mut cfg = config(g);
        cfg.t_end = 0.0;
        let out = run(&cfg, ring_q(g), &[0.0]).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.final_state.step, 0);
    }

    #[test]
    fn run_hits_snapshot_times_and_is_deterministic() {
        let g = small_grid();
        let cfg = config(g);
        let times = [0.0, 0.0037, 0.01];
        let a = run(&cfg, ring_q(g), &times).unwrap();
        let b = run(&cfg, ring_q(g), &times).unwrap();
        assert_eq!(a.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(), times.to_vec());
        assert_eq!(a.final_state.t, 0.01);
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state, b.final_state);
        assert!(a.records.iter().any(|r| r.t == 0.0037));
    }

    #[test]
    fn max_principle_every_step() {
        let g = small_grid();
        let mut cfg = config(g);
        cfg.t_end = 0.05;
        let q0 = ring_q(g).scaled(20.0);
        let s0 = q0.max_abs();
        let out = run(&cfg, q0, &[]).unwrap();
        assert!(out.sup_q.iter().all(|&(_, s)| s <= s0 + 1e-12));
    }

    #[test]
    fn cross_scheme_agreement() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 32, 64).unwrap();
        let q0 = ring_q(g).scaled(5.0);
        let mut cfg = config(g);
        let solver_q = Solver::new(cfg.clone()).unwrap();
        cfg.evolve_omega_direct = true;
        let solver_w = Solver::new(cfg).unwrap();
        let mut a = solver_q.state_from_q(q0.clone(), 0.0, 0).unwrap();
        let mut b = solver_w.state_from_omega(omega_from_q(&q0), 0.0, 0).unwrap();
        for _ in 0..10 {
            let dt = cfl_dt(&a, solver_q.config(), 1.0).unwrap();
            a = solver_q.step_with_dt(&a, dt).unwrap();
            b = solver_w.step_with_dt(&b, dt).unwrap();
        }
        let diff = a.omega.combine(1.0, &b.omega, -1.0).unwrap();
        let rel = crate::norms::lebesgue_norm(&diff, 2.0).unwrap()
            / crate::norms::lebesgue_norm(&a.omega, 2.0).unwrap();
        assert!(rel < 1e-2, "{rel}");
    }

    #[test]
    fn halving_dt_halves_the_error() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 24, 48).unwrap();
        let finals: Vec<ScalarField> = [0.8, 0.4, 0.2]
            .iter()
            .map(|&f| {
                let mut cfg = config(g);
                cfg.dt_cfl_factor = f;
                cfg.t_end = 0.05;
                run(&cfg, ring_q(g).scaled(10.0), &[]).unwrap().final_state.q
            })
            .collect();
        let l2 = |a: &ScalarField, b: &ScalarField| {
            crate::norms::lebesgue_norm(&a.combine(1.0, b, -1.0).unwrap(), 2.0).unwrap()
        };
        let ratio = l2(&finals[0], &finals[1]) / l2(&finals[1], &finals[2]);
        assert!((1.6..2.5).contains(&ratio), "{ratio}");
    }
}
