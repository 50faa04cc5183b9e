//! Two-variable Oregonator kinetics with activator diffusion, integrated by
//! forward Euler on a masked lattice.
//!
//! ```text
//! du/dt = (u - u^2 - (f v + phi) (u - q) / (u + q)) / eps + D_u lap(u)
//! dv/dt = u - v
//! ```
//!
//! The inhibitor does not diffuse. Nodes that are in the domain but not
//! excitable keep diffusing with their kinetics switched off.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::ScalarField2D;
use crate::geometry::{Mask, NodeStencil};
use crate::schedule::PhiSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OregonatorParams {
    pub epsilon: f64,
    pub f: f64,
    pub q: f64,
    /// Activator diffusion coefficient.
    pub d_u: f64,
    /// Inhibitor production rate; larger is less excitable.
    pub phi: f64,
}

impl Default for OregonatorParams {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            f: 1.4,
            q: 0.002,
            d_u: 1.0,
            phi: 0.05,
        }
    }
}

impl OregonatorParams {
    pub fn with_phi(self, phi: f64) -> Self {
        Self { phi, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("epsilon", self.epsilon, self.epsilon > 0.0),
            ("f", self.f, self.f > 0.0),
            ("q", self.q, self.q > 0.0),
            ("d_u", self.d_u, self.d_u >= 0.0),
            ("phi", self.phi, self.phi >= 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(invalid(name, format!("out of range: {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub dx: f64,
    /// Any node leaving `[-bound, bound]` aborts the run.
    pub divergence_bound: f64,
    /// Disabling kinetics leaves pure diffusion; used for conservation checks.
    pub reaction: bool,
    /// Lower bound applied to the activator after each step. Without it the
    /// explicit step can push `u` through the `u = -q` pole behind fast fronts.
    pub u_floor: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            dx: 0.25,
            divergence_bound: 1e3,
            reaction: true,
            u_floor: Some(0.0),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(invalid("dx", format!("must be positive, got {}", self.dx)));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(invalid("divergence_bound", "must be positive"));
        }
        Ok(())
    }
}

/// Pointwise kinetics `(du/dt, dv/dt)` without the diffusion term.
pub fn reaction_rates(u: f64, v: f64, params: &OregonatorParams) -> Result<(f64, f64)> {
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::NonFinite("reaction_rates input"));
    }
    params.validate()?;
    if u + params.q == 0.0 {
        return Err(invalid("u", "u + q vanishes"));
    }
    Ok(kinetics(u, v, params))
}

#[inline(always)]
fn kinetics(u: f64, v: f64, p: &OregonatorParams) -> (f64, f64) {
    let du = (u - u * u - (p.f * v + p.phi) * (u - p.q) / (u + p.q)) / p.epsilon;
    (du, u - v)
}

/// Homogeneous steady state `u* = v*` of the kinetics, by bisection on
/// `(0, 1)`. Bisection runs past the 1e-12 tolerance down to adjacent floats so
/// the residual rate is at roundoff level.
pub fn steady_state(params: &OregonatorParams) -> Result<f64> {
    params.validate()?;
    let g = |u: f64| kinetics(u, u, params).0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if !(g(lo) >= 0.0 && g(hi) < 0.0) {
        return Err(invalid("params", "no steady state bracketed in (0, 1)"));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

#[inline(always)]
fn stencil_laplacian(u: &[f64], s: &NodeStencil, inv_dx2: f64) -> f64 {
    let c = u[s.center as usize];
    let horizontal = u[s.west as usize] + u[s.east as usize];
    let vertical = u[s.north as usize] + u[s.south as usize];
    (horizontal + vertical - 4.0 * c) * inv_dx2
}

/// Five-point Laplacian with mirrored-neighbour (no-flux) boundaries.
/// Out-of-domain nodes get 0.
pub fn laplacian5(field: &ScalarField2D, mask: &Mask, dx: f64) -> Result<ScalarField2D> {
    check_dims(field, mask)?;
    if !(dx > 0.0) {
        return Err(invalid("dx", "must be positive"));
    }
    let inv_dx2 = 1.0 / (dx * dx);
    let src = field.values();
    let mut out = vec![0.0; src.len()];
    for s in mask.stencil() {
        out[s.center as usize] = stencil_laplacian(src, s, inv_dx2);
    }
    ScalarField2D::from_values(field.width(), field.height(), out)
}

fn check_dims(field: &ScalarField2D, mask: &Mask) -> Result<()> {
    if field.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: field.dims(),
        });
    }
    Ok(())
}

/// Both species plus the iteration counter and any held stimulus nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub u: ScalarField2D,
    pub v: ScalarField2D,
    pub iteration: u64,
    /// Node indices clamped to `u = 1` before every step.
    pub held: Vec<usize>,
}

impl SimState {
    /// Uniform `(u, v)` on in-domain nodes; zero elsewhere.
    pub fn uniform(mask: &Mask, u: f64, v: f64) -> Result<Self> {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        let fill = |value: f64| -> Vec<f64> {
            mask.in_domain_flags()
                .iter()
                .map(|&d| if d { value } else { 0.0 })
                .collect()
        };
        let (w, h) = mask.dims();
        Ok(Self {
            u: ScalarField2D::from_values(w, h, fill(u))?,
            v: ScalarField2D::from_values(w, h, fill(v))?,
            iteration: 0,
            held: Vec::new(),
        })
    }

    /// Every in-domain node at the homogeneous steady state.
    pub fn quiescent(mask: &Mask, params: &OregonatorParams) -> Result<Self> {
        let u_star = steady_state(params)?;
        Self::uniform(mask, u_star, u_star)
    }

    pub fn sim_time(&self, cfg: &IntegratorConfig) -> f64 {
        self.iteration as f64 * cfg.dt
    }

    fn check(&self, mask: &Mask) -> Result<()> {
        check_dims(&self.u, mask)?;
        check_dims(&self.v, mask)
    }

    fn apply_held(&mut self) {
        let u = self.u.values_mut();
        for &i in &self.held {
            u[i] = 1.0;
        }
    }

    pub fn mirrored_x(&self) -> Self {
        let w = self.u.width();
        let mut held: Vec<usize> = self
            .held
            .iter()
            .map(|&i| (i / w) * w + (w - 1 - i % w))
            .collect();
        held.sort_unstable();
        Self {
            u: self.u.mirrored_x(),
            v: self.v.mirrored_x(),
            iteration: self.iteration,
            held,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_kernel(
    u: &[f64],
    v: &[f64],
    u_next: &mut [f64],
    v_next: &mut [f64],
    params: &OregonatorParams,
    cfg: &IntegratorConfig,
    mask: &Mask,
    iteration: u64,
) -> Result<()> {
    let inv_dx2 = 1.0 / (cfg.dx * cfg.dx);
    let dt = cfg.dt;
    let d_u = params.d_u;
    let bound = cfg.divergence_bound;
    for s in mask.stencil() {
        let c = s.center as usize;
        let (uc, vc) = (u[c], v[c]);
        let lap = stencil_laplacian(u, s, inv_dx2);
        let (ru, rv) = if cfg.reaction && s.excitable {
            kinetics(uc, vc, params)
        } else {
            (0.0, 0.0)
        };
        let mut un = uc + dt * (ru + d_u * lap);
        if let Some(floor) = cfg.u_floor {
            un = un.max(floor);
        }
        let vn = vc + dt * rv;
        // Negated comparison also trips on NaN.
        if !(un.abs() <= bound && vn.abs() <= bound) {
            let value = if un.abs() <= bound { vn } else { un };
            return Err(Error::Divergence {
                iteration: iteration + 1,
                x: c % mask.width(),
                y: c / mask.width(),
                value,
            });
        }
        u_next[c] = un;
        v_next[c] = vn;
    }
    Ok(())
}

/// One explicit Euler step. Only in-domain nodes change.
pub fn euler_step(
    state: SimState,
    params: &OregonatorParams,
    cfg: &IntegratorConfig,
    mask: &Mask,
) -> Result<SimState> {
    let mut stepper = Stepper::new(&state, mask)?;
    params.validate()?;
    cfg.validate()?;
    let mut state = state;
    stepper.step(&mut state, params, cfg, mask)?;
    Ok(state)
}

/// Reusable scratch buffers for repeated stepping.
struct Stepper {
    u_next: Vec<f64>,
    v_next: Vec<f64>,
}

impl Stepper {
    fn new(state: &SimState, mask: &Mask) -> Result<Self> {
        state.check(mask)?;
        Ok(Self {
            u_next: state.u.values().to_vec(),
            v_next: state.v.values().to_vec(),
        })
    }

    fn step(
        &mut self,
        state: &mut SimState,
        params: &OregonatorParams,
        cfg: &IntegratorConfig,
        mask: &Mask,
    ) -> Result<()> {
        step_kernel(
            state.u.values(),
            state.v.values(),
            &mut self.u_next,
            &mut self.v_next,
            params,
            cfg,
            mask,
            state.iteration,
        )?;
        // Out-of-domain entries in the scratch buffers are never written, so
        // swapping keeps them equal to the state's.
        std::mem::swap(state.u.values_mut_vec(), &mut self.u_next);
        std::mem::swap(state.v.values_mut_vec(), &mut self.v_next);
        state.iteration += 1;
        Ok(())
    }
}

/// Receives the state at fixed iteration strides during [`integrate`].
pub trait Observer {
    /// Called after every step whose resulting iteration is a multiple of this.
    fn stride(&self) -> u64;

    fn observe(&mut self, state: &SimState) -> Result<()>;
}

/// Runs `n_steps` Euler steps. Before each step `phi` is taken from the
/// schedule at the current iteration and held sources are re-imposed.
/// Stops early if the schedule terminates.
pub fn integrate(
    mut state: SimState,
    params: &OregonatorParams,
    cfg: &IntegratorConfig,
    mask: &Mask,
    schedule: &PhiSchedule,
    n_steps: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<SimState> {
    params.validate()?;
    cfg.validate()?;
    if observers.iter().any(|o| o.stride() == 0) {
        return Err(invalid("stride", "observer strides must be at least 1"));
    }
    if n_steps == 0 {
        return Ok(state);
    }
    let mut stepper = Stepper::new(&state, mask)?;
    let mut step_params = *params;
    let end = state.iteration + n_steps;
    while state.iteration < end {
        if schedule.terminated_at(state.iteration) {
            break;
        }
        step_params.phi = schedule.phi_at(state.iteration);
        state.apply_held();
        stepper.step(&mut state, &step_params, cfg, mask)?;
        for obs in observers.iter_mut() {
            if state.iteration.is_multiple_of(obs.stride()) {
                obs.observe(&state)?;
            }
        }
    }
    Ok(state)
}
