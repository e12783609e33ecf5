//! `dslab` — compactified-cylinder wave laboratory.
//!
//! Subcommands: check-exponents, conjugation-test, solve, verify-energy,
//! verify-strichartz, semilinear. Every run writes a CSV (header row, data
//! rows, one trailing summary row; floats at 17 significant digits) and a
//! JSON summary, under --out, $DSLAB_OUT, or ./out. Exit codes: 0 pass,
//! 1 configuration error, 2 assertion failure.

mod chart;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use chart::{build_metric, ChartArgs};
use dslab_core::exponents::{
    dual_for, validate, weight_exponents, Exponent, Rational, Verdict,
};
use dslab_core::norms::{data_norm, mixed_norm, sobolev_norm, MixedNormSpec};
use dslab_core::operator::{build_full_operator, conjugate, conjugation_identity_residual};
use dslab_core::report::{fmt_f64, Csv};
use dslab_core::sampling::{DataSampler, ForcingSampler};
use dslab_core::semilinear::{
    auto_epsilon, holder_bound_check, picard_solve, NonlinearitySpec, PicardConfig,
};
use dslab_core::solver::{energy, solve_reduced, SolveOptions};
use dslab_core::strichartz::{
    verify_energy, verify_homogeneous, verify_inhomogeneous, EnsembleOptions, EstimateReport,
};
use dslab_core::{AdmissibleTriple, DualPair, Error as CoreError, MetricSpec};
use output::{gnuplot_columns, resolve_out_dir, write_text, Summary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "dslab",
    version,
    about = "Wave solver and mixed-norm estimate harness on compactified de Sitter cylinders"
)]
struct Cli {
    /// Output directory (default: $DSLAB_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct EnsembleArgs {
    /// Number of independent runs.
    #[arg(long, default_value_t = 50)]
    ensemble: usize,

    /// Master seed; per-run streams are derived by counter.
    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// RK4 steps per run.
    #[arg(long, default_value_t = 1536)]
    steps: usize,

    /// Keep a quadrature node every this many steps.
    #[arg(long, default_value_t = 4)]
    record_every: usize,

    /// Eigenmode band of the random draws (default: lowest third).
    #[arg(long)]
    band: Option<usize>,

    /// Also run the reflected end of the two-ended space.
    #[arg(long)]
    mirror: bool,
}

impl EnsembleArgs {
    fn to_options(&self) -> EnsembleOptions {
        EnsembleOptions {
            ensemble: self.ensemble,
            seed: self.seed,
            steps: self.steps,
            record_every: self.record_every,
            band: self.band,
            mirror: self.mirror,
            forcing_components: 3,
            forcing_window: None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a Strichartz exponent triple (p q s n) and print its weights.
    CheckExponents {
        /// Time exponent p (rational or "inf").
        p: String,
        /// Space exponent q (rational, finite).
        q: String,
        /// Regularity s (rational).
        s: String,
        /// Cross-section dimension n.
        n: u32,
        /// Also list dual pairs for (s, n).
        #[arg(long)]
        duals: bool,
    },

    /// Residual of the conformal reduction identity across grid refinements.
    ConjugationTest {
        #[command(flatten)]
        chart: ChartArgs,
        /// Comma-separated grid sizes.
        #[arg(long, default_value = "32,64,128")]
        grids: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Slice x where the residual is evaluated.
        #[arg(long, default_value_t = 0.6)]
        x: f64,
    },

    /// Evolve one seeded draw; write energies and norm snapshots per node.
    Solve {
        #[command(flatten)]
        chart: ChartArgs,
        #[arg(long, default_value_t = 2048)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        record_every: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Add a seeded random forcing.
        #[arg(long)]
        forcing: bool,
        /// Triple "p,q,s" keying the norm snapshot columns.
        #[arg(long, default_value = "5,10,1")]
        triple: String,
        #[arg(long)]
        band: Option<usize>,
    },

    /// Energy-inequality ratios over an ensemble.
    VerifyEnergy {
        #[command(flatten)]
        chart: ChartArgs,
        #[command(flatten)]
        ens: EnsembleArgs,
        /// Drive with random forcing and zero data instead of data draws.
        #[arg(long)]
        forcing: bool,
        /// Rerun at doubled grid and steps and gate the sup-ratio change.
        #[arg(long)]
        refine: bool,
    },

    /// Space-time estimate ratios over an ensemble.
    VerifyStrichartz {
        #[command(flatten)]
        chart: ChartArgs,
        #[command(flatten)]
        ens: EnsembleArgs,
        /// Triple "p,q,s" of the left-hand norm.
        #[arg(long, default_value = "5,10,1")]
        triple: String,
        /// Dual pair "p',q'" for the forced estimate.
        #[arg(long)]
        dual: Option<String>,
        /// Zero data, random forcing, dual-pair right side.
        #[arg(long)]
        inhomogeneous: bool,
        /// Rerun at doubled grid/steps and extended horizon, gate the change.
        #[arg(long)]
        refine: bool,
    },

    /// Small-data Picard iteration with contraction diagnostics.
    Semilinear {
        #[command(flatten)]
        chart: ChartArgs,
        /// Nonlinearity power k.
        #[arg(long, default_value_t = 5.0)]
        k: f64,
        /// Data size in the H^1 x L^2 norm.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Find the convergence threshold by bisection and run at a quarter of it.
        #[arg(long)]
        auto_epsilon: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        max_iter: usize,
        /// Relative tolerance on the successive differences.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1024)]
        steps: usize,
        #[arg(long)]
        band: Option<usize>,
    },
}

fn parse_triple(text: &str, n: u32) -> anyhow::Result<AdmissibleTriple> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        bail!("triple must be \"p,q,s\", got `{text}`");
    }
    let p = Exponent::from_str(parts[0])?;
    let q = Rational::from_str(parts[1])?;
    let s = Rational::from_str(parts[2])?;
    Ok(AdmissibleTriple::new(p, q, s, n)?)
}

fn parse_dual(text: &str, s: Rational, n: u32) -> anyhow::Result<DualPair> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("dual pair must be \"p',q'\", got `{text}`");
    }
    Ok(DualPair::new(
        Rational::from_str(parts[0])?,
        Rational::from_str(parts[1])?,
        s,
        n,
    )?)
}

fn estimate_csv(report: &EstimateReport) -> Csv {
    let mut csv = Csv::new(vec!["row", "lhs", "rhs", "ratio"]);
    for r in &report.runs {
        csv.push_row(vec![
            r.run.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.ratio),
        ]);
    }
    let (refined, change) = match &report.refinement {
        Some(d) => (fmt_f64(d.refined_sup_ratio), fmt_f64(d.rel_change)),
        None => (String::new(), String::new()),
    };
    csv.set_summary(vec![
        "summary".to_string(),
        refined,
        change,
        fmt_f64(report.sup_ratio),
    ]);
    csv
}

fn chart_json(metric: &MetricSpec) -> serde_json::Value {
    json!({
        "chart": metric.name,
        "n": metric.n,
        "cross_section": metric.grid.cross_section.to_string(),
        "grid": metric.grid.len,
        "x0": metric.x0,
        "x_min": metric.x_min,
    })
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let out = resolve_out_dir(cli.out.as_deref());
    match cli.command {
        Command::CheckExponents { p, q, s, n, duals } => {
            let p = Exponent::from_str(&p)?;
            let q = Rational::from_str(&q)?;
            let s = Rational::from_str(&s)?;
            let verdict = validate(p, q, s, n);
            if let Verdict::Violation { relation, residual } = verdict {
                bail!("triple ({p}, {q}, {s}) in dimension {n} violates the {relation} relation (residual {residual})");
            }
            let triple = AdmissibleTriple::new(p, q, s, n)?;
            let w = weight_exponents(&triple);
            let (tw, xw) = match (w.t_weight, w.x_weight) {
                (Some(t), Some(x)) => (t.to_string(), x.to_string()),
                _ => ("sup".to_string(), "sup".to_string()),
            };
            let mut csv = Csv::new(vec![
                "row", "p", "q", "s", "n", "verdict", "t_weight", "x_weight", "measure_power",
            ]);
            let mut row = vec![
                "0".to_string(),
                p.to_string(),
                q.to_string(),
                s.to_string(),
                n.to_string(),
                "admissible".to_string(),
                tw,
                xw,
                w.measure_power.to_string(),
            ];
            println!("{}", row[1..].join(","));
            csv.push_row(row.clone());
            row[0] = "summary".to_string();
            csv.set_summary(row);
            if duals {
                for d in dual_for(s, n) {
                    println!("dual,{},{},{},{}", d.p_prime(), d.q_prime(), s, n);
                }
            }
            let path = write_text(&out, "check_exponents.csv", &csv.render())?;
            let mut summary = Summary::new(
                "check-exponents",
                None,
                json!({"p": p.to_string(), "q": q.to_string(), "s": s.to_string(), "n": n}),
            );
            summary.verdict("admissible", true);
            summary.write(&out, "check_exponents_summary.json")?;
            eprintln!("wrote {}", path.display());
            Ok(true)
        }

        Command::ConjugationTest {
            chart,
            grids,
            seed,
            x,
        } => {
            let grids: Vec<usize> = grids
                .split(',')
                .map(|g| g.trim().parse().context("bad grid list"))
                .collect::<anyhow::Result<_>>()?;
            if grids.is_empty() {
                bail!("need at least one grid size");
            }
            let band = grids.iter().min().unwrap() / 3;
            let mut rows = Vec::new();
            let mut residuals: Vec<f64> = Vec::new();
            let mut warned = false;
            for &g in &grids {
                let metric = build_metric(&ChartArgs {
                    grid: g,
                    ..chart.clone()
                })?;
                let op = build_full_operator(Arc::clone(&metric))?;
                let red = conjugate(&op);
                warned |= red.singular_potential;
                let sampler = DataSampler::new(Arc::clone(&metric), Some(band.max(1)))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let v = sampler.draw_field(&mut rng);
                let r = conjugation_identity_residual(&op, &red, &v, x)?;
                let order = residuals
                    .last()
                    .map(|prev| fmt_f64((prev / r).log2()))
                    .unwrap_or_default();
                rows.push(vec![g.to_string(), fmt_f64(x), fmt_f64(r), order]);
                residuals.push(r);
            }
            let mut csv = Csv::new(vec!["grid", "x", "residual", "order_vs_prev"]);
            for row in rows {
                csv.push_row(row);
            }
            let exact = residuals.iter().all(|r| *r <= 1e-10);
            let decreasing = residuals.windows(2).all(|w| w[1] <= w[0]);
            csv.set_summary(vec![
                "summary".to_string(),
                fmt_f64(x),
                fmt_f64(*residuals.last().unwrap()),
                if exact { "exact" } else { "refining" }.to_string(),
            ]);
            let path = write_text(&out, "conjugation_test.csv", &csv.render())?;
            let mut summary = Summary::new(
                "conjugation-test",
                Some(seed),
                json!({"chart": chart.chart, "n": chart.n, "grids": grids, "x": x}),
            );
            summary.verdict("residuals_finite", residuals.iter().all(|r| r.is_finite()));
            summary.verdict("exact_or_refining", exact || decreasing);
            if warned {
                summary.note("singular-potential warning: chart fails the short-range gate");
            }
            let pass = summary.pass;
            summary.write(&out, "conjugation_test_summary.json")?;
            eprintln!("wrote {}", path.display());
            Ok(pass)
        }

        Command::Solve {
            chart,
            steps,
            record_every,
            seed,
            forcing,
            triple,
            band,
        } => {
            let metric = build_metric(&chart)?;
            let n = metric.n;
            let triple = parse_triple(&triple, n as u32)?;
            let mn = MixedNormSpec::lhs_of(&triple);
            let red = conjugate(&build_full_operator(Arc::clone(&metric))?);
            let sampler = DataSampler::new(Arc::clone(&metric), band)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0);
            let data = sampler.draw_cauchy_unit(&mut rng)?;
            let (h1, l2) = data_norm(&data, &metric)?;
            let init = data.to_reduced_state(n);
            let opts = SolveOptions {
                steps,
                record_every,
            };
            let force = if forcing {
                Some(ForcingSampler::draw(
                    &sampler,
                    &mut rng,
                    -metric.x0.ln(),
                    -metric.x_min.ln(),
                    3,
                ))
            } else {
                None
            };
            let closure = force.as_ref().map(|f| move |x: f64| f.eval(x));
            let traj = match &closure {
                Some(c) => solve_reduced(&red, &init, Some(c), opts)?,
                None => solve_reduced(&red, &init, None, opts)?,
            };
            let u = traj.reconstruct_u(n);
            let q = triple.q().to_f64();
            let sigma = 1.0 - triple.s().to_f64();
            let mut csv = Csv::new(vec![
                "node", "x", "t", "kinetic", "gradient", "potential_l2", "u_l2", "u_wq",
            ]);
            for j in 0..traj.node_count() {
                let st = traj.state_at(j);
                let e = energy(&red, &st);
                let l2n = sobolev_norm(&u.fields[j], u.xs[j], 0.0, 2.0, &metric)?;
                let wq = sobolev_norm(&u.fields[j], u.xs[j], sigma, q, &metric)?;
                csv.push_row(vec![
                    j.to_string(),
                    fmt_f64(traj.xs[j]),
                    fmt_f64(traj.taus[j]),
                    fmt_f64(e.kinetic),
                    fmt_f64(e.gradient),
                    fmt_f64(e.potential_l2),
                    fmt_f64(l2n),
                    fmt_f64(wq),
                ]);
            }
            let mixed = mixed_norm(&u, &mn, &metric)?;
            csv.set_summary(vec![
                "summary".to_string(),
                fmt_f64(metric.x_min),
                fmt_f64(-metric.x_min.ln()),
                fmt_f64(h1),
                fmt_f64(l2),
                String::new(),
                String::new(),
                fmt_f64(mixed),
            ]);
            let path = write_text(&out, "solve.csv", &csv.render())?;
            let mut summary = Summary::new(
                "solve",
                Some(seed),
                json!({
                    "chart": chart_json(&metric),
                    "steps": steps,
                    "record_every": record_every,
                    "forcing": forcing,
                    "triple": format!("{},{},{}", triple.p(), triple.q(), triple.s()),
                }),
            );
            summary.verdict("finite", mixed.is_finite());
            if traj.singular_potential_warning {
                summary.note("singular-potential warning: chart fails the short-range gate");
            }
            let pass = summary.pass;
            summary.write(&out, "solve_summary.json")?;
            eprintln!("wrote {}", path.display());
            Ok(pass)
        }

        Command::VerifyEnergy {
            chart,
            ens,
            forcing,
            refine,
        } => {
            let metric = build_metric(&chart)?;
            let opts = ens.to_options();
            let mut report = verify_energy(&metric, &opts, forcing)?;
            let mut pass = report.all_finite();
            let mut summary = Summary::new(
                "verify-energy",
                Some(opts.seed),
                json!({
                    "chart": chart_json(&metric),
                    "ensemble": opts.ensemble,
                    "steps": opts.steps,
                    "forcing": forcing,
                    "refine": refine,
                }),
            );
            summary.verdict("all_ratios_finite", report.all_finite());
            if refine {
                let refined_metric =
                    Arc::new(metric.with_resolution(metric.grid.len * 2, metric.x0, metric.x_min)?);
                let refined_opts = EnsembleOptions {
                    steps: opts.steps * 2,
                    forcing_window: Some((-metric.x0.ln(), -metric.x_min.ln())),
                    ..opts
                };
                let refined = verify_energy(&refined_metric, &refined_opts, forcing)?;
                let change = report.attach_refinement(&refined);
                summary.verdict("refinement_change_le_10_percent", change <= 0.10);
                pass &= change <= 0.10;
                let dat = gnuplot_columns(&[
                    (metric.grid.len as f64, report.sup_ratio),
                    (refined_metric.grid.len as f64, refined.sup_ratio),
                ]);
                write_text(&out, "verify_energy_refinement.dat", &dat)?;
            }
            if report.singular_potential_warning {
                summary.note("singular-potential warning: chart fails the short-range gate");
            }
            let path = write_text(&out, "verify_energy.csv", &estimate_csv(&report).render())?;
            summary.write(&out, "verify_energy_summary.json")?;
            eprintln!("wrote {}", path.display());
            Ok(pass)
        }

        Command::VerifyStrichartz {
            chart,
            ens,
            triple,
            dual,
            inhomogeneous,
            refine,
        } => {
            let metric = build_metric(&chart)?;
            let n = metric.n as u32;
            let triple = parse_triple(&triple, n)?;
            let opts = ens.to_options();
            let dual_pair = match (&dual, inhomogeneous) {
                (Some(text), _) => Some(parse_dual(text, triple.s(), n)?),
                (None, true) => Some(
                    dual_for(triple.s(), n)
                        .into_iter()
                        .find(|d| d.p_prime() == Rational::one())
                        .ok_or_else(|| anyhow!("no (1, q') dual pair exists for this (s, n)"))?,
                ),
                (None, false) => None,
            };
            let mut report = match &dual_pair {
                Some(d) => verify_inhomogeneous(&metric, &triple, d, &opts)?,
                None => verify_homogeneous(&metric, &triple, &opts)?,
            };
            let mut pass = report.all_finite();
            let mut summary = Summary::new(
                "verify-strichartz",
                Some(opts.seed),
                json!({
                    "chart": chart_json(&metric),
                    "triple": format!("{},{},{}", triple.p(), triple.q(), triple.s()),
                    "dual": dual_pair.map(|d| format!("{},{}", d.p_prime(), d.q_prime())),
                    "ensemble": opts.ensemble,
                    "steps": opts.steps,
                    "mirror": opts.mirror,
                    "refine": refine,
                }),
            );
            summary.verdict("all_ratios_finite", report.all_finite());
            if refine {
                // Double grid and steps, extend the horizon by one unit; the
                // forcing (if any) stays anchored to the base window.
                let refined_metric = Arc::new(metric.with_resolution(
                    metric.grid.len * 2,
                    metric.x0,
                    metric.x_min * (-1.0f64).exp(),
                )?);
                let refined_opts = EnsembleOptions {
                    steps: opts.steps * 2,
                    forcing_window: Some((-metric.x0.ln(), -metric.x_min.ln())),
                    ..opts
                };
                let refined = match &dual_pair {
                    Some(d) => verify_inhomogeneous(&refined_metric, &triple, d, &refined_opts)?,
                    None => verify_homogeneous(&refined_metric, &triple, &refined_opts)?,
                };
                let change = report.attach_refinement(&refined);
                summary.verdict("refinement_change_le_20_percent", change <= 0.20);
                pass &= change <= 0.20;
                let dat = gnuplot_columns(&[
                    (metric.grid.len as f64, report.sup_ratio),
                    (refined_metric.grid.len as f64, refined.sup_ratio),
                ]);
                write_text(&out, "verify_strichartz_refinement.dat", &dat)?;
            }
            for note in &report.notes {
                summary.note(note.clone());
            }
            if report.singular_potential_warning {
                summary.note("singular-potential warning: chart fails the short-range gate");
            }
            let path = write_text(&out, "verify_strichartz.csv", &estimate_csv(&report).render())?;
            summary.write(&out, "verify_strichartz_summary.json")?;
            eprintln!("wrote {}", path.display());
            Ok(pass)
        }

        Command::Semilinear {
            chart,
            k,
            epsilon,
            auto_epsilon: auto,
            seed,
            max_iter,
            tol,
            steps,
            band,
        } => {
            let metric = build_metric(&chart)?;
            let nl = NonlinearitySpec::pure_power(k)?;
            let cfg = PicardConfig {
                steps,
                max_iter,
                tol_rel: tol,
                band,
            };
            let eps = match (epsilon, auto) {
                (Some(e), false) => e,
                (None, true) => auto_epsilon(&metric, &nl, &cfg, seed)? / 4.0,
                (Some(_), true) => bail!("--epsilon and --auto-epsilon are mutually exclusive"),
                (None, false) => bail!("need --epsilon or --auto-epsilon"),
            };
            let sampler = DataSampler::new(Arc::clone(&metric), cfg.band)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0);
            let data = sampler.draw_cauchy_unit(&mut rng)?.scaled(eps);
            let (sol, hist) = picard_solve(&metric, &data, &nl, &cfg)?;

            let mut csv = Csv::new(vec!["m", "z_norm", "diff"]);
            for (m, z) in hist.z_norms.iter().enumerate() {
                let d = hist
                    .diffs
                    .get(m)
                    .map(|d| fmt_f64(*d))
                    .unwrap_or_default();
                csv.push_row(vec![m.to_string(), fmt_f64(*z), d]);
            }
            // Summary row carries (converged, contraction factor, residual).
            csv.set_summary(vec![
                hist.converged.to_string(),
                hist.contraction.map(fmt_f64).unwrap_or_default(),
                hist.residual.map(fmt_f64).unwrap_or_default(),
            ]);
            let path = write_text(&out, "semilinear.csv", &csv.render())?;

            let mut summary = Summary::new(
                "semilinear",
                Some(seed),
                json!({
                    "chart": chart_json(&metric),
                    "k": k,
                    "epsilon": eps,
                    "auto_epsilon": auto,
                    "max_iter": max_iter,
                    "tol": tol,
                    "steps": steps,
                }),
            );
            summary.verdict("converged", hist.converged);
            if hist.converged {
                let residual_ok = hist.residual.map(|r| r <= 2.0 * hist.tol_abs).unwrap_or(false);
                summary.verdict("residual_le_2_tol", residual_ok);
                let (lhs, rhs) = holder_bound_check(&sol, &nl, &metric)?;
                summary.verdict("forcing_norm_bound", lhs <= rhs * (1.0 + 1e-9));
            }
            if let Some(w) = &hist.warning {
                summary.note(w.clone());
            }
            let pass = summary.pass;
            summary.write(&out, "semilinear_summary.json")?;
            eprintln!("wrote {}", path.display());
            Ok(pass)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Config(_)) | Some(CoreError::Domain(_)) | None => ExitCode::from(1),
        Some(_) => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version through this path too.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verdict: FAIL");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}
