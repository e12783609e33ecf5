//! Cross-section grids and the conformal metric families h(x, y, dy) living
//! on them.
//!
//! A chart is h(x, theta) = c(x, theta) * h_ref(theta), where h_ref is the
//! round metric on S^n restricted to zonal (polar-angle-only) functions, or
//! the flat metric on the n-torus restricted to functions of the first
//! angle. Every builtin chart of interest is of this form, and the run-config
//! schema (scalar tables in theta, polynomial in x) produces exactly such
//! families. The short-range condition asks that c have no linear term in x
//! at x = 0.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Compact cross-section carrying the spatial grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossSection {
    /// Round n-sphere, zonal reduction: grid on the polar angle (0, pi).
    ZonalSphere,
    /// Flat n-torus, fields along the first angle: periodic grid on [0, 2pi).
    Torus,
}

impl fmt::Display for CrossSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrossSection::ZonalSphere => write!(f, "zonal-sphere"),
            CrossSection::Torus => write!(f, "torus"),
        }
    }
}

/// Sampled field on the cross-section grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(len: usize) -> Self {
        Field(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.0 {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &Field) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn linf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Gamma(k/2) for a positive integer argument doubling `k`.
fn gamma_half(k: usize) -> f64 {
    if k % 2 == 0 {
        let mut v = 1.0;
        for i in 1..(k / 2) {
            v *= i as f64;
        }
        v
    } else {
        let mut v = PI.sqrt();
        for i in 0..(k - 1) / 2 {
            v *= 0.5 + i as f64;
        }
        v
    }
}

/// Spatial grid on the cross-section, with the reference zonal densities
/// needed for quadrature and for the flux-form Laplacian.
#[derive(Clone, Debug)]
pub struct Grid {
    pub cross_section: CrossSection,
    /// Cross-section dimension n (the spacetime has dimension n + 1).
    pub n: usize,
    pub len: usize,
    pub dtheta: f64,
    /// Node coordinates. Sphere: cell centers (i + 1/2) * pi / N.
    /// Torus: i * 2 pi / N, periodic.
    pub thetas: Vec<f64>,
    /// Edge coordinates. Sphere: i * pi / N for i = 0..=N (poles included).
    /// Torus: (i + 1/2) * 2 pi / N; edge i joins node i and node i + 1 mod N.
    pub edge_thetas: Vec<f64>,
    /// Reference zonal density sin^{n-1}(theta) at nodes (1 on the torus).
    pub node_rho: Vec<f64>,
    /// Same at edges; vanishes at the sphere poles for n >= 2.
    pub edge_rho: Vec<f64>,
    /// Measure of the suppressed directions: Vol(S^{n-1}) or (2 pi)^{n-1}.
    pub vol_factor: f64,
}

impl Grid {
    pub fn new(cross_section: CrossSection, n: usize, len: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("cross-section dimension n must be >= 1"));
        }
        if len < 4 {
            return Err(Error::config("grid needs at least 4 points"));
        }
        match cross_section {
            CrossSection::ZonalSphere => {
                let dtheta = PI / len as f64;
                let thetas: Vec<f64> = (0..len).map(|i| (i as f64 + 0.5) * dtheta).collect();
                let edge_thetas: Vec<f64> = (0..=len).map(|i| i as f64 * dtheta).collect();
                let pow = (n - 1) as i32;
                let node_rho = thetas.iter().map(|t| t.sin().powi(pow)).collect();
                let edge_rho = edge_thetas.iter().map(|t| t.sin().powi(pow)).collect();
                // Vol(S^{n-1}) = 2 pi^{n/2} / Gamma(n/2)
                let vol_factor = 2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n);
                Ok(Grid {
                    cross_section,
                    n,
                    len,
                    dtheta,
                    thetas,
                    edge_thetas,
                    node_rho,
                    edge_rho,
                    vol_factor,
                })
            }
            CrossSection::Torus => {
                let dtheta = 2.0 * PI / len as f64;
                let thetas: Vec<f64> = (0..len).map(|i| i as f64 * dtheta).collect();
                let edge_thetas: Vec<f64> = (0..len).map(|i| (i as f64 + 0.5) * dtheta).collect();
                Ok(Grid {
                    cross_section,
                    n,
                    len,
                    dtheta,
                    thetas,
                    edge_thetas,
                    node_rho: vec![1.0; len],
                    edge_rho: vec![1.0; len],
                    vol_factor: (2.0 * PI).powi(n as i32 - 1),
                })
            }
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.cross_section, CrossSection::Torus)
    }
}

/// Scalar conformal factor c(x, theta) of the metric family, with its exact
/// x-derivative. Profiles must be defined for all x >= 0 (the short-range
/// check samples x -> 0 below the solver truncation x_min).
pub trait ConformalProfile: Send + Sync {
    fn value(&self, x: f64, theta: f64) -> f64;
    fn d_dx(&self, x: f64, theta: f64) -> f64;
}

/// de Sitter zonal chart: c(x) = (x^2 + 1)^2 / 4.
pub struct DeSitterProfile;

impl ConformalProfile for DeSitterProfile {
    fn value(&self, x: f64, _theta: f64) -> f64 {
        let s = 1.0 + x * x;
        0.25 * s * s
    }

    fn d_dx(&self, x: f64, _theta: f64) -> f64 {
        x * (1.0 + x * x)
    }
}

/// Exact product cylinder: c = 1.
pub struct UnitProfile;

impl ConformalProfile for UnitProfile {
    fn value(&self, _x: f64, _theta: f64) -> f64 {
        1.0
    }

    fn d_dx(&self, _x: f64, _theta: f64) -> f64 {
        0.0
    }
}

/// Torus with a short-range (x^2) perturbation: c = 1 + amp * x^2 * cos(theta).
pub struct TorusPerturbedProfile {
    pub amp: f64,
}

impl ConformalProfile for TorusPerturbedProfile {
    fn value(&self, x: f64, theta: f64) -> f64 {
        1.0 + self.amp * x * x * theta.cos()
    }

    fn d_dx(&self, x: f64, theta: f64) -> f64 {
        2.0 * self.amp * x * theta.cos()
    }
}

/// Wraps a profile and injects a linear term amp * x * c(0, theta),
/// breaking the short-range assumption on purpose.
pub struct InjectedLinearProfile {
    pub base: Arc<dyn ConformalProfile>,
    pub amp: f64,
}

impl ConformalProfile for InjectedLinearProfile {
    fn value(&self, x: f64, theta: f64) -> f64 {
        self.base.value(x, theta) + self.amp * x * self.base.value(0.0, theta)
    }

    fn d_dx(&self, x: f64, theta: f64) -> f64 {
        self.base.d_dx(x, theta) + self.amp * self.base.value(0.0, theta)
    }
}

/// Piecewise-linear scalar shape on the grid, or a constant.
#[derive(Clone, Debug)]
pub enum Shape {
    Const(f64),
    Table {
        values: Vec<f64>,
        theta0: f64,
        dtheta: f64,
        periodic: bool,
    },
}

impl Shape {
    pub fn from_grid(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(Error::config(format!(
                "table length {} does not match grid length {}",
                values.len(),
                grid.len
            )));
        }
        Ok(Shape::Table {
            values,
            theta0: grid.thetas[0],
            dtheta: grid.dtheta,
            periodic: grid.is_periodic(),
        })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            Shape::Const(c) => *c,
            Shape::Table {
                values,
                theta0,
                dtheta,
                periodic,
            } => {
                let m = values.len();
                let u = (theta - theta0) / dtheta;
                if *periodic {
                    let u = u.rem_euclid(m as f64);
                    let i = u.floor() as usize % m;
                    let frac = u - u.floor();
                    values[i] * (1.0 - frac) + values[(i + 1) % m] * frac
                } else {
                    let u = u.clamp(0.0, (m - 1) as f64);
                    let i = (u.floor() as usize).min(m - 2);
                    let frac = u - i as f64;
                    values[i] * (1.0 - frac) + values[i + 1] * frac
                }
            }
        }
    }
}

/// c(x, theta) = c0(theta) + x * lin(theta) + sum_k x^{2+k} coef_k(theta).
/// This is the schema run-config files use for custom charts.
pub struct PolynomialProfile {
    pub c0: Shape,
    pub linear: Option<Shape>,
    /// (extra power k >= 0, coefficient shape); the term is x^{2+k} * shape.
    pub higher: Vec<(u32, Shape)>,
}

impl ConformalProfile for PolynomialProfile {
    fn value(&self, x: f64, theta: f64) -> f64 {
        let mut v = self.c0.eval(theta);
        if let Some(l) = &self.linear {
            v += x * l.eval(theta);
        }
        for (k, shape) in &self.higher {
            v += x.powi(2 + *k as i32) * shape.eval(theta);
        }
        v
    }

    fn d_dx(&self, x: f64, theta: f64) -> f64 {
        let mut v = 0.0;
        if let Some(l) = &self.linear {
            v += l.eval(theta);
        }
        for (k, shape) in &self.higher {
            let p = 2 + *k as i32;
            v += p as f64 * x.powi(p - 1) * shape.eval(theta);
        }
        v
    }
}

/// A C^2 asymptotically de Sitter chart in the boundary coordinates:
/// dimension, grid, conformal family, and the simulated x-range
/// [x_min, x0] (x decreases toward the boundary at x = 0).
#[derive(Clone)]
pub struct MetricSpec {
    pub n: usize,
    pub grid: Arc<Grid>,
    profile: Arc<dyn ConformalProfile>,
    pub x0: f64,
    pub x_min: f64,
    pub name: String,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("cross_section", &self.grid.cross_section)
            .field("len", &self.grid.len)
            .field("x0", &self.x0)
            .field("x_min", &self.x_min)
            .finish()
    }
}

/// Loose sanity cap for the sampled second x-differences (C^2 proxy).
const C2_BOUND: f64 = 1e9;

impl MetricSpec {
    pub fn new(
        grid: Grid,
        profile: Arc<dyn ConformalProfile>,
        x0: f64,
        x_min: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        let spec = MetricSpec {
            n: grid.n,
            grid: Arc::new(grid),
            profile,
            x0,
            x_min,
            name: name.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn desitter(n: usize, len: usize, x0: f64, x_min: f64) -> Result<Self> {
        let grid = Grid::new(CrossSection::ZonalSphere, n, len)?;
        MetricSpec::new(grid, Arc::new(DeSitterProfile), x0, x_min, "desitter")
    }

    pub fn product(cross_section: CrossSection, n: usize, len: usize, x0: f64, x_min: f64) -> Result<Self> {
        let grid = Grid::new(cross_section, n, len)?;
        MetricSpec::new(grid, Arc::new(UnitProfile), x0, x_min, "product")
    }

    pub fn torus_perturbed(n: usize, len: usize, amp: f64, x0: f64, x_min: f64) -> Result<Self> {
        if amp.abs() * x0 * x0 >= 1.0 {
            return Err(Error::config(
                "perturbation amplitude too large: metric loses positivity",
            ));
        }
        let grid = Grid::new(CrossSection::Torus, n, len)?;
        MetricSpec::new(
            grid,
            Arc::new(TorusPerturbedProfile { amp }),
            x0,
            x_min,
            "torus-perturbed",
        )
    }

    /// Same chart with a deliberate violation of the short-range assumption.
    pub fn with_injected_linear(&self, amp: f64) -> Result<Self> {
        MetricSpec::new(
            (*self.grid).clone(),
            Arc::new(InjectedLinearProfile {
                base: Arc::clone(&self.profile),
                amp,
            }),
            self.x0,
            self.x_min,
            format!("{}+linear", self.name),
        )
    }

    /// Same chart rebuilt at another resolution / x-range (refinement sweeps).
    pub fn with_resolution(&self, len: usize, x0: f64, x_min: f64) -> Result<Self> {
        let grid = Grid::new(self.grid.cross_section, self.n, len)?;
        MetricSpec::new(grid, Arc::clone(&self.profile), x0, x_min, self.name.clone())
    }

    fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0 && self.x_min > 0.0 && self.x_min < self.x0) {
            return Err(Error::config(format!(
                "need 0 < x_min < x0, got x_min = {}, x0 = {}",
                self.x_min, self.x0
            )));
        }
        // h0 symmetric positive definite: c(0, theta) > 0 on nodes and edges.
        for &t in self.grid.thetas.iter().chain(self.grid.edge_thetas.iter()) {
            let c = self.profile.value(0.0, t);
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config(format!(
                    "h0 not positive definite at theta = {t} (c = {c})"
                )));
            }
        }
        // Positivity of the whole family on [0, x0], and bounded second
        // x-differences as a C^2 proxy.
        let delta = self.x0 / 128.0;
        for k in 0..=32 {
            let x = self.x0 * k as f64 / 32.0;
            for &t in self.grid.thetas.iter().chain(self.grid.edge_thetas.iter()) {
                let c = self.profile.value(x, t);
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::config(format!(
                        "metric not positive definite at x = {x}, theta = {t}"
                    )));
                }
                let d2 = (self.profile.value(x + delta, t) - 2.0 * c
                    + self.profile.value((x - delta).max(0.0), t))
                    / (delta * delta);
                if !d2.is_finite() || d2.abs() > C2_BOUND {
                    return Err(Error::config(format!(
                        "second x-difference of the metric out of bounds at x = {x} (got {d2:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn conformal(&self, x: f64, theta: f64) -> f64 {
        self.profile.value(x, theta)
    }

    pub fn conformal_dx(&self, x: f64, theta: f64) -> f64 {
        self.profile.d_dx(x, theta)
    }

    /// sqrt(det h) at the nodes, zonal factor included: c^{n/2} sin^{n-1} * Vol.
    /// No range check; internal callers sample x freely.
    pub fn density_nodes(&self, x: f64) -> Vec<f64> {
        let half_n = self.n as f64 / 2.0;
        self.grid
            .thetas
            .iter()
            .zip(&self.grid.node_rho)
            .map(|(&t, &rho)| self.profile.value(x, t).powf(half_n) * rho * self.grid.vol_factor)
            .collect()
    }

    /// Quadrature weights of the measure dh: density * dtheta.
    pub fn mass(&self, x: f64) -> Vec<f64> {
        let mut m = self.density_nodes(x);
        for v in &mut m {
            *v *= self.grid.dtheta;
        }
        m
    }

    /// Edge coefficients c^{n/2 - 1} rho Vol used by the flux-form Laplacian.
    pub fn edge_mu(&self, x: f64) -> Vec<f64> {
        let pow = self.n as f64 / 2.0 - 1.0;
        self.grid
            .edge_thetas
            .iter()
            .zip(&self.grid.edge_rho)
            .map(|(&t, &rho)| self.profile.value(x, t).powf(pow) * rho * self.grid.vol_factor)
            .collect()
    }

    /// Analytic x d_x log sqrt(det h) = (n/2) x c'/c at the nodes.
    pub fn drift_w(&self, x: f64) -> Vec<f64> {
        let half_n = self.n as f64 / 2.0;
        self.grid
            .thetas
            .iter()
            .map(|&t| half_n * x * self.profile.d_dx(x, t) / self.profile.value(x, t))
            .collect()
    }

    /// Total measure of the cross-section at x.
    pub fn volume(&self, x: f64) -> f64 {
        self.mass(x).iter().sum()
    }
}

/// sqrt(det h(x)) on the grid. Public operation with the documented domain
/// restriction x in [x_min, x0].
pub fn volume_density(spec: &MetricSpec, x: f64) -> Result<Vec<f64>> {
    let slack = 1e-12 * spec.x0;
    if x < spec.x_min - slack || x > spec.x0 + slack {
        return Err(Error::domain(format!(
            "x = {x} outside [{}, {}]",
            spec.x_min, spec.x0
        )));
    }
    Ok(spec.density_nodes(x))
}

/// Result of the short-range gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShortRangeCheck {
    Pass,
    Fail { max_linear_coefficient: f64 },
}

impl ShortRangeCheck {
    pub fn passed(&self) -> bool {
        matches!(self, ShortRangeCheck::Pass)
    }
}

/// One-sided second-order finite-difference estimate of d_x h at x = 0;
/// passes when its largest entry (in the chart frame, where the reference
/// metric has unit diagonal) stays below `tol`.
pub fn check_short_range(spec: &MetricSpec, tol: f64) -> Result<ShortRangeCheck> {
    check_short_range_with_step(spec, tol, spec.x0 * 1e-3)
}

pub fn check_short_range_with_step(
    spec: &MetricSpec,
    tol: f64,
    step: f64,
) -> Result<ShortRangeCheck> {
    if tol <= 0.0 {
        return Err(Error::config("short-range tolerance must be positive"));
    }
    if !(step > 0.0) || 2.0 * step > spec.x0 {
        return Err(Error::config(
            "x-sampling too coarse for the one-sided difference at x = 0",
        ));
    }
    let mut max_entry: f64 = 0.0;
    for &t in spec.grid.thetas.iter().chain(spec.grid.edge_thetas.iter()) {
        let f0 = spec.conformal(0.0, t);
        let f1 = spec.conformal(step, t);
        let f2 = spec.conformal(2.0 * step, t);
        let deriv = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * step);
        max_entry = max_entry.max(deriv.abs());
    }
    if max_entry <= tol {
        Ok(ShortRangeCheck::Pass)
    } else {
        Ok(ShortRangeCheck::Fail {
            max_linear_coefficient: max_entry,
        })
    }
}
