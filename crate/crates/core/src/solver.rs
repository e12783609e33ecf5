//! Method-of-lines integration of the reduced cylinder equation.
//!
//! The evolution variable is tau = -log x, so x d_x = -d_tau and the
//! truncated approach to the boundary [x_min, x0] becomes the uniform
//! interval [tau0, tau_max]. In first-order form, with p = v_tau:
//!
//! ```text
//!   v_tau = p
//!   p_tau = -(1 - w) p - x^2 (Delta_h v + V v) + x^{-(n-1)/2} f(x),
//! ```
//!
//! where f is the forcing of the original equation P u = f; the x^2 factor
//! of the reduction and the scaling of f cancel to the single power shown.
//! Time stepping is classical RK4 with uniform steps in tau.

use crate::error::{Error, Result};
use crate::geometry::Field;
use crate::operator::{ReducedOperator, ZonalLaplacian};

/// Solution sample on a constant-x slice: v and its x-derivative.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub x: f64,
    pub v: Field,
    pub v_x: Field,
}

impl StateVector {
    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.v_x.is_finite()
    }
}

/// Cauchy data for the original equation at x0: u0 = u(x0) and
/// u1 = (d_t u)(t0) = -x d_x u at x0.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub x0: f64,
    pub u0: Field,
    pub u1: Field,
}

impl CauchyData {
    /// Converts to the reduced variable v = x^{-(n-1)/2} u. With
    /// alpha = (n-1)/2: v_tau = x^{-alpha} u1 + alpha v, and v_x = -v_tau/x.
    pub fn to_reduced_state(&self, n: usize) -> StateVector {
        let alpha = (n as f64 - 1.0) / 2.0;
        let scale = self.x0.powf(-alpha);
        let v = self.u0.scaled(scale);
        let mut v_tau = self.u1.scaled(scale);
        v_tau.axpy(alpha, &v);
        let v_x = v_tau.scaled(-1.0 / self.x0);
        StateVector { x: self.x0, v, v_x }
    }

    pub fn scaled(&self, c: f64) -> CauchyData {
        CauchyData {
            x0: self.x0,
            u0: self.u0.scaled(c),
            u1: self.u1.scaled(c),
        }
    }
}

/// Stored trajectory at the quadrature nodes (every `record_every`-th step).
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub taus: Vec<f64>,
    pub xs: Vec<f64>,
    pub fields: Vec<Field>,
    /// x-derivatives at the nodes.
    pub derivs: Vec<Field>,
    /// Propagated from the operator that produced the run.
    pub singular_potential_warning: bool,
}

impl TrajectoryRecord {
    pub fn node_count(&self) -> usize {
        self.xs.len()
    }

    pub fn state_at(&self, j: usize) -> StateVector {
        StateVector {
            x: self.xs[j],
            v: self.fields[j].clone(),
            v_x: self.derivs[j].clone(),
        }
    }

    /// Multiplies every stored field by x^{(n-1)/2} at its node, turning the
    /// reduced solution back into the physical one (derivatives transform by
    /// the product rule). n = 1 is the identity.
    pub fn reconstruct_u(&self, n: usize) -> TrajectoryRecord {
        let alpha = (n as f64 - 1.0) / 2.0;
        let mut fields = Vec::with_capacity(self.fields.len());
        let mut derivs = Vec::with_capacity(self.derivs.len());
        for j in 0..self.xs.len() {
            let x = self.xs[j];
            let r = x.powf(alpha);
            fields.push(self.fields[j].scaled(r));
            let mut d = self.derivs[j].scaled(r);
            if alpha != 0.0 {
                d.axpy(alpha * x.powf(alpha - 1.0), &self.fields[j]);
            }
            derivs.push(d);
        }
        TrajectoryRecord {
            taus: self.taus.clone(),
            xs: self.xs.clone(),
            fields,
            derivs,
            singular_potential_warning: self.singular_potential_warning,
        }
    }

    /// Inverse of [`reconstruct_u`].
    pub fn to_reduced(&self, n: usize) -> TrajectoryRecord {
        let alpha = (n as f64 - 1.0) / 2.0;
        let mut fields = Vec::with_capacity(self.fields.len());
        let mut derivs = Vec::with_capacity(self.derivs.len());
        for j in 0..self.xs.len() {
            let x = self.xs[j];
            let r = x.powf(alpha);
            let v = self.fields[j].scaled(1.0 / r);
            let mut d = self.derivs[j].scaled(1.0 / r);
            if alpha != 0.0 {
                d.axpy(-alpha / x, &v);
            }
            fields.push(v);
            derivs.push(d);
        }
        TrajectoryRecord {
            taus: self.taus.clone(),
            xs: self.xs.clone(),
            fields,
            derivs,
            singular_potential_warning: self.singular_potential_warning,
        }
    }

    pub fn scaled(&self, c: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            taus: self.taus.clone(),
            xs: self.xs.clone(),
            fields: self.fields.iter().map(|f| f.scaled(c)).collect(),
            derivs: self.derivs.iter().map(|f| f.scaled(c)).collect(),
            singular_potential_warning: self.singular_potential_warning,
        }
    }

    /// self + c * other, node-aligned.
    pub fn add_scaled(&self, c: f64, other: &TrajectoryRecord) -> Result<TrajectoryRecord> {
        if self.taus.len() != other.taus.len() {
            return Err(Error::config("trajectory node sets differ"));
        }
        let mut fields = Vec::with_capacity(self.fields.len());
        let mut derivs = Vec::with_capacity(self.derivs.len());
        for j in 0..self.taus.len() {
            if (self.taus[j] - other.taus[j]).abs() > 1e-12 * self.taus[j].abs().max(1.0) {
                return Err(Error::config("trajectory nodes are not aligned"));
            }
            let mut f = self.fields[j].clone();
            f.axpy(c, &other.fields[j]);
            fields.push(f);
            let mut d = self.derivs[j].clone();
            d.axpy(c, &other.derivs[j]);
            derivs.push(d);
        }
        Ok(TrajectoryRecord {
            taus: self.taus.clone(),
            xs: self.xs.clone(),
            fields,
            derivs,
            singular_potential_warning: self.singular_potential_warning
                || other.singular_potential_warning,
        })
    }

    pub fn sub(&self, other: &TrajectoryRecord) -> Result<TrajectoryRecord> {
        self.add_scaled(-1.0, other)
    }

    /// Four-point Lagrange interpolation of the stored fields at an
    /// arbitrary tau (clamped to the stored range). Nodes must be uniform,
    /// which solve_reduced guarantees.
    pub fn eval_field(&self, tau: f64) -> Field {
        let m = self.taus.len();
        assert!(m >= 2, "need at least two nodes to interpolate");
        let d = self.taus[1] - self.taus[0];
        let pos = (tau - self.taus[0]) / d;
        if m < 4 {
            // Linear fallback for very short records.
            let j = (pos.floor().max(0.0) as usize).min(m - 2);
            let s = (pos - j as f64).clamp(0.0, 1.0);
            let mut f = self.fields[j].scaled(1.0 - s);
            f.axpy(s, &self.fields[j + 1]);
            return f;
        }
        let base = ((pos.floor() as isize) - 1).clamp(0, m as isize - 4) as usize;
        let xi = pos - base as f64;
        let mut out = Field::zeros(self.fields[0].len());
        for k in 0..4 {
            let mut w = 1.0;
            for l in 0..4 {
                if l != k {
                    w *= (xi - l as f64) / (k as f64 - l as f64);
                }
            }
            out.axpy(w, &self.fields[base + k]);
        }
        out
    }
}

/// Discrete energy components of the cylinder equation at a slice.
#[derive(Clone, Copy, Debug)]
pub struct EnergyReading {
    pub x: f64,
    /// Integral of |d_x v|^2 dh.
    pub kinetic: f64,
    /// Integral of |grad v|^2_h dh.
    pub gradient: f64,
    /// Integral of |v|^2 dh.
    pub potential_l2: f64,
}

impl EnergyReading {
    pub fn wave(&self) -> f64 {
        self.kinetic + self.gradient
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.gradient + self.potential_l2
    }
}

/// Quadrature of the energy density at the state's slice.
pub fn energy(red: &ReducedOperator, state: &StateVector) -> EnergyReading {
    let lap = red.laplacian(state.x);
    let m = lap.mass();
    let mut kinetic = 0.0;
    let mut potential_l2 = 0.0;
    for i in 0..state.v.len() {
        kinetic += state.v_x.0[i] * state.v_x.0[i] * m[i];
        potential_l2 += state.v.0[i] * state.v.0[i] * m[i];
    }
    let gradient = lap.quadratic_form(state.v.as_slice());
    EnergyReading {
        x: state.x,
        kinetic,
        gradient,
        potential_l2,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub steps: usize,
    /// Quadrature nodes are kept every this many steps (must divide steps).
    pub record_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            steps: 2048,
            record_every: 4,
        }
    }
}

/// One-step amplitude growth (squared) that triggers the CFL abort.
const GROWTH_ABORT: f64 = 100.0;

struct StageCoeffs {
    x: f64,
    one_minus_w: Vec<f64>,
    potential: Vec<f64>,
    lap: ZonalLaplacian,
    /// x^{-(n-1)/2} f(x), already in the scaling the p-equation wants.
    force: Option<Field>,
}

fn stage_coeffs(
    red: &ReducedOperator,
    forcing: Option<&(dyn Fn(f64) -> Field + Sync)>,
    tau: f64,
) -> StageCoeffs {
    let x = (-tau).exp();
    let w = red.drift_w(x);
    let one_minus_w = w.iter().map(|wi| 1.0 - wi).collect();
    let potential = red.potential(x);
    let lap = red.laplacian(x);
    let alpha = (red.spec.n as f64 - 1.0) / 2.0;
    let force = forcing.map(|f| f(x).scaled(x.powf(-alpha)));
    StageCoeffs {
        x,
        one_minus_w,
        potential,
        lap,
        force,
    }
}

fn eval_rhs(co: &StageCoeffs, v: &[f64], p: &[f64], dv: &mut [f64], dp: &mut [f64]) {
    co.lap.apply(v, dp);
    let x2 = co.x * co.x;
    for i in 0..v.len() {
        let mut acc = -co.one_minus_w[i] * p[i] - x2 * (dp[i] + co.potential[i] * v[i]);
        if let Some(f) = &co.force {
            acc += f.0[i];
        }
        dp[i] = acc;
        dv[i] = p[i];
    }
}

/// Integrates from init.x = x0 down to x_min with uniform tau steps,
/// recording states at the quadrature nodes.
pub fn solve_reduced(
    red: &ReducedOperator,
    init: &StateVector,
    forcing: Option<&(dyn Fn(f64) -> Field + Sync)>,
    opts: SolveOptions,
) -> Result<TrajectoryRecord> {
    if opts.steps < 16 {
        return Err(Error::config("need at least 16 steps"));
    }
    let spec = &red.spec;
    if (init.x - spec.x0).abs() > 1e-9 * spec.x0 {
        return Err(Error::config(format!(
            "initial state at x = {} but the chart starts at x0 = {}",
            init.x, spec.x0
        )));
    }
    let tau0 = -spec.x0.ln();
    let tau_max = -spec.x_min.ln();
    solve_between(red, init, tau0, tau_max, forcing, opts)
}

/// Direction-agnostic driver (used forward in the public API and backward by
/// the reversibility checks).
pub fn solve_between(
    red: &ReducedOperator,
    init: &StateVector,
    tau_from: f64,
    tau_to: f64,
    forcing: Option<&(dyn Fn(f64) -> Field + Sync)>,
    opts: SolveOptions,
) -> Result<TrajectoryRecord> {
    let n_grid = red.spec.grid.len;
    if init.v.len() != n_grid || init.v_x.len() != n_grid {
        return Err(Error::config("state length does not match the grid"));
    }
    if opts.steps == 0 || opts.record_every == 0 || opts.steps % opts.record_every != 0 {
        return Err(Error::config(
            "record_every must be positive and divide steps",
        ));
    }
    if !init.is_finite() {
        return Err(Error::config("initial state is not finite"));
    }

    let dt = (tau_to - tau_from) / opts.steps as f64;
    let mut v: Vec<f64> = init.v.0.clone();
    // p = v_tau = -x v_x
    let mut p: Vec<f64> = init.v_x.0.iter().map(|d| -init.x * d).collect();

    let mut taus = Vec::with_capacity(opts.steps / opts.record_every + 1);
    let mut xs = Vec::with_capacity(taus.capacity());
    let mut fields = Vec::with_capacity(taus.capacity());
    let mut derivs = Vec::with_capacity(taus.capacity());

    let record = |taus: &mut Vec<f64>,
                  xs: &mut Vec<f64>,
                  fields: &mut Vec<Field>,
                  derivs: &mut Vec<Field>,
                  tau: f64,
                  v: &[f64],
                  p: &[f64]| {
        let x = (-tau).exp();
        taus.push(tau);
        xs.push(x);
        fields.push(Field(v.to_vec()));
        derivs.push(Field(p.iter().map(|pi| -pi / x).collect()));
    };

    record(&mut taus, &mut xs, &mut fields, &mut derivs, tau_from, &v, &p);

    let mut k1v = vec![0.0; n_grid];
    let mut k1p = vec![0.0; n_grid];
    let mut k2v = vec![0.0; n_grid];
    let mut k2p = vec![0.0; n_grid];
    let mut k3v = vec![0.0; n_grid];
    let mut k3p = vec![0.0; n_grid];
    let mut k4v = vec![0.0; n_grid];
    let mut k4p = vec![0.0; n_grid];
    let mut tv = vec![0.0; n_grid];
    let mut tp = vec![0.0; n_grid];

    let mut prev_norm2: f64 = v.iter().chain(p.iter()).map(|a| a * a).sum();

    for step in 0..opts.steps {
        let tau = tau_from + step as f64 * dt;
        let co0 = stage_coeffs(red, forcing, tau);
        let co_half = stage_coeffs(red, forcing, tau + 0.5 * dt);
        let co1 = stage_coeffs(red, forcing, tau + dt);

        eval_rhs(&co0, &v, &p, &mut k1v, &mut k1p);
        for i in 0..n_grid {
            tv[i] = v[i] + 0.5 * dt * k1v[i];
            tp[i] = p[i] + 0.5 * dt * k1p[i];
        }
        eval_rhs(&co_half, &tv, &tp, &mut k2v, &mut k2p);
        for i in 0..n_grid {
            tv[i] = v[i] + 0.5 * dt * k2v[i];
            tp[i] = p[i] + 0.5 * dt * k2p[i];
        }
        eval_rhs(&co_half, &tv, &tp, &mut k3v, &mut k3p);
        for i in 0..n_grid {
            tv[i] = v[i] + dt * k3v[i];
            tp[i] = p[i] + dt * k3p[i];
        }
        eval_rhs(&co1, &tv, &tp, &mut k4v, &mut k4p);
        for i in 0..n_grid {
            v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            p[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
        }

        let norm2: f64 = v.iter().chain(p.iter()).map(|a| a * a).sum();
        if !norm2.is_finite() {
            return Err(Error::SolverAbort {
                step,
                tau: tau + dt,
                reason: "state became non-finite".into(),
            });
        }
        if prev_norm2 > 1e-300 && norm2 > GROWTH_ABORT * prev_norm2 {
            return Err(Error::SolverAbort {
                step,
                tau: tau + dt,
                reason: format!(
                    "energy grew by {:.1}x in one step (likely a step-size violation)",
                    (norm2 / prev_norm2).sqrt()
                ),
            });
        }
        prev_norm2 = norm2.max(prev_norm2 * 1e-12);

        if (step + 1) % opts.record_every == 0 {
            let t_now = tau_from + (step + 1) as f64 * dt;
            record(&mut taus, &mut xs, &mut fields, &mut derivs, t_now, &v, &p);
        }
    }

    Ok(TrajectoryRecord {
        taus,
        xs,
        fields,
        derivs,
        singular_potential_warning: red.singular_potential,
    })
}
