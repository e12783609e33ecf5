//! Chart construction from CLI flags or a JSON run-config file.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::Deserialize;

use dslab_core::geometry::{
    ConformalProfile, CrossSection, Grid, PolynomialProfile, Shape, UnitProfile,
};
use dslab_core::MetricSpec;

#[derive(clap::Args, Debug, Clone)]
pub struct ChartArgs {
    /// Builtin chart: desitter | product | product-sphere | torus-perturbed.
    #[arg(long, default_value = "desitter")]
    pub chart: String,

    /// Cross-section dimension n (spacetime dimension n + 1).
    #[arg(long, default_value_t = 3)]
    pub n: usize,

    /// Spatial grid size.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,

    /// Initial slice t0 (the chart starts at x0 = e^{-t0}).
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,

    /// Horizon t_max (truncation of the boundary approach, x_min = e^{-t_max}).
    #[arg(long, default_value_t = 6.0)]
    pub t_max: f64,

    /// Perturbation amplitude of the torus-perturbed chart.
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,

    /// Inject a linear term of this amplitude at the boundary (breaks the
    /// short-range gate; for negative tests).
    #[arg(long)]
    pub inject_linear: Option<f64>,

    /// JSON run-config file declaring the chart; overrides the flags above.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

/// JSON schema of a chart declaration. Unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub chart: String,
    pub n: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    /// "sphere" or "torus"; required for product/custom charts.
    #[serde(default)]
    pub cross_section: Option<String>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Leading coefficient c0(y): constant or grid table.
    #[serde(default)]
    pub c0: Option<Coefficient>,
    /// Optional linear-in-x term (violates the short-range assumption).
    #[serde(default)]
    pub linear_term: Option<Coefficient>,
    /// x^2-family as polynomial coefficient tables: term k is x^{2+k} coef_k(y).
    #[serde(default)]
    pub h1: Option<H1Config>,
}

fn default_grid() -> usize {
    64
}

fn default_x0() -> f64 {
    1.0
}

fn default_x_min() -> f64 {
    (-6.0f64).exp()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Const(f64),
    Table(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H1Config {
    pub powers: Vec<PowerTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub power: u32,
    pub coef: Coefficient,
}

fn shape_of(grid: &Grid, coef: &Coefficient) -> anyhow::Result<Shape> {
    Ok(match coef {
        Coefficient::Const(c) => Shape::Const(*c),
        Coefficient::Table(values) => Shape::from_grid(grid, values.clone())?,
    })
}

fn cross_section_of(name: &str) -> anyhow::Result<CrossSection> {
    match name {
        "sphere" | "zonal-sphere" => Ok(CrossSection::ZonalSphere),
        "torus" => Ok(CrossSection::Torus),
        other => bail!("unknown cross-section `{other}` (expected sphere or torus)"),
    }
}

pub fn from_config_file(path: &Path) -> anyhow::Result<Arc<MetricSpec>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: ChartConfig = serde_json::from_str(&text)
        .with_context(|| format!("malformed run config {}", path.display()))?;
    build_from_config(&cfg)
}

pub fn build_from_config(cfg: &ChartConfig) -> anyhow::Result<Arc<MetricSpec>> {
    let spec = match cfg.chart.as_str() {
        "desitter" => MetricSpec::desitter(cfg.n, cfg.grid, cfg.x0, cfg.x_min)?,
        "product" => {
            let cs = cross_section_of(cfg.cross_section.as_deref().unwrap_or("torus"))?;
            MetricSpec::product(cs, cfg.n, cfg.grid, cfg.x0, cfg.x_min)?
        }
        "torus-perturbed" => MetricSpec::torus_perturbed(
            cfg.n,
            cfg.grid,
            cfg.amplitude.unwrap_or(0.3),
            cfg.x0,
            cfg.x_min,
        )?,
        "custom" => {
            let cs = cross_section_of(
                cfg.cross_section
                    .as_deref()
                    .context("custom charts need a cross_section")?,
            )?;
            let grid = Grid::new(cs, cfg.n, cfg.grid)?;
            let c0 = shape_of(
                &grid,
                cfg.c0.as_ref().context("custom charts need a c0 coefficient")?,
            )?;
            let linear = cfg
                .linear_term
                .as_ref()
                .map(|c| shape_of(&grid, c))
                .transpose()?;
            let mut higher = Vec::new();
            if let Some(h1) = &cfg.h1 {
                for term in &h1.powers {
                    higher.push((term.power, shape_of(&grid, &term.coef)?));
                }
            }
            let profile: Arc<dyn ConformalProfile> = if linear.is_none() && higher.is_empty() {
                match c0 {
                    Shape::Const(c) if (c - 1.0).abs() < f64::EPSILON => Arc::new(UnitProfile),
                    c0 => Arc::new(PolynomialProfile {
                        c0,
                        linear: None,
                        higher: vec![],
                    }),
                }
            } else {
                Arc::new(PolynomialProfile { c0, linear, higher })
            };
            MetricSpec::new(grid, profile, cfg.x0, cfg.x_min, "custom")?
        }
        other => bail!("unknown chart `{other}`"),
    };
    Ok(Arc::new(spec))
}

pub fn build_metric(args: &ChartArgs) -> anyhow::Result<Arc<MetricSpec>> {
    let metric = if let Some(path) = &args.config {
        from_config_file(path)?
    } else {
        let x0 = (-args.t0).exp();
        let x_min = (-args.t_max).exp();
        if x_min >= x0 {
            bail!("need t0 < t_max (got t0 = {}, t_max = {})", args.t0, args.t_max);
        }
        let spec = match args.chart.as_str() {
            "desitter" => MetricSpec::desitter(args.n, args.grid, x0, x_min)?,
            "product" => MetricSpec::product(CrossSection::Torus, args.n, args.grid, x0, x_min)?,
            "product-sphere" => {
                MetricSpec::product(CrossSection::ZonalSphere, args.n, args.grid, x0, x_min)?
            }
            "torus-perturbed" => {
                MetricSpec::torus_perturbed(args.n, args.grid, args.amplitude, x0, x_min)?
            }
            other => bail!("unknown chart `{other}` (try --config for custom charts)"),
        };
        Arc::new(spec)
    };
    if let Some(amp) = args.inject_linear {
        Ok(Arc::new(metric.with_injected_linear(amp)?))
    } else {
        Ok(metric)
    }
}
