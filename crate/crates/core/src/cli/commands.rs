//! The four subcommands. Each returns its checks; artifacts go to the output
//! directory, one file per table.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::barrier::linf_bound_check;
use crate::error::{Error, Result};
use crate::field_io::write_field;
use crate::grid::{Grid, ScalarField, Shape};
use crate::jets::suites::{claims_rows, claims_suite, prop4_suite, prop5_suite, zt_suite};
use crate::jets::{regimes::exponent_sweep, Branch, ClaimsConfig};
use crate::presets::jittered_cases;
use crate::regularity::{estimate_constant, ExperimentRecord};
use crate::report::{num, opt, write_rows, CsvRow};
use crate::solver::{solve_dirichlet, SolveReport};

use super::config::{Command, RunConfig};
use super::svg::{line_plot, Plot, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

impl CsvRow for Check {
    fn header() -> Vec<&'static str> {
        vec!["check", "passed", "detail"]
    }

    fn record(&self) -> Vec<String> {
        vec![self.name.clone(), self.passed.to_string(), self.detail.clone()]
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    comment: String,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let path = self.cfg.out_dir.join(name);
        self.files.push(path.clone());
        path
    }

    fn csv<R: CsvRow>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let path = self.path(name);
        write_rows(&path, Some(&self.comment), rows)
    }

    fn svg(&mut self, name: &str, plot: &Plot, series: &[Series]) -> Result<()> {
        if self.cfg.plots {
            let path = self.path(name);
            std::fs::write(path, line_plot(plot, series))?;
        }
        Ok(())
    }
}

/// Provenance lines written at the top of every CSV.
pub fn provenance(cfg: &RunConfig) -> String {
    format!(
        "pseudoplap {} config={}\ncommand={} seed={}",
        env!("CARGO_PKG_VERSION"),
        cfg.hash,
        cfg.command.name(),
        cfg.seed
    )
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut ctx = Ctx { cfg, comment: provenance(cfg), files: Vec::new() };
    let checks = match cfg.command {
        Command::Solve => solve(&mut ctx)?,
        Command::VerifyLemmas => verify_lemmas(&mut ctx)?,
        Command::MeasureRegularity => measure_regularity(&mut ctx)?,
        Command::ConvergenceStudy => convergence_study(&mut ctx)?,
    };
    ctx.csv("checks.csv", &checks)?;
    Ok(Outcome { checks, files: ctx.files })
}

struct SolveRow<'a> {
    cfg: &'a RunConfig,
    report: SolveReport,
    u_sup: f64,
    linf_bound: Option<f64>,
    exact_error: Option<f64>,
}

impl CsvRow for SolveRow<'_> {
    fn header() -> Vec<&'static str> {
        vec![
            "p", "dim", "n", "shape", "f", "boundary", "converged", "iterations", "final_energy",
            "final_grad_sup", "divergence_residual", "u_sup", "linf_bound", "exact_error",
        ]
    }

    fn record(&self) -> Vec<String> {
        let pc = &self.cfg.problem;
        vec![
            num(pc.p),
            pc.dim.to_string(),
            pc.n.to_string(),
            pc.shape.name().to_string(),
            pc.case.f.to_string(),
            pc.case.boundary.to_string(),
            self.report.converged.to_string(),
            self.report.iterations.to_string(),
            num(self.report.final_energy),
            num(self.report.final_grad_sup),
            num(self.report.divergence_residual),
            num(self.u_sup),
            opt(self.linf_bound),
            opt(self.exact_error),
        ]
    }
}

fn exact_field(cfg: &RunConfig, grid: &std::sync::Arc<Grid>) -> Result<Option<ScalarField>> {
    let pc = &cfg.problem;
    match pc.case.exact(pc.p, pc.dim) {
        Some(w) => Ok(Some(ScalarField::from_fn(grid, |x| w(x))?)),
        None => Ok(None),
    }
}

fn solve(ctx: &mut Ctx) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    let pc = &cfg.problem;
    let grid = Grid::build(pc.dim, pc.n, pc.shape)?;
    let prob = pc.case.problem(&grid, pc.p)?;
    let (u, report) = solve_dirichlet(&prob, &cfg.solver)?;
    let path = ctx.path("u.csv");
    write_field(&path, &u, Some(&ctx.comment))?;

    let mut checks = vec![Check::new(
        "solver_converged",
        report.converged,
        format!("{} iterations, gradient {:.3e}", report.iterations, report.final_grad_sup),
    )];
    // The barrier bound is stated on the unit ball.
    let linf = if pc.shape == Shape::Ball {
        let tol = 1e-8 * (1.0 + u.sup_norm());
        let b = linf_bound_check(&u, &prob, tol)?;
        checks.push(Check::new("linf_bound", b.satisfied, format!("sup|u| = {:.6e}, bound {:.6e}", b.u_sup, b.bound)));
        Some(b.bound)
    } else {
        None
    };
    let exact_error = exact_field(cfg, &grid)?.map(|e| u.max_abs_diff(&e)).transpose()?;
    let row = SolveRow { cfg, report, u_sup: u.sup_norm(), linf_bound: linf, exact_error };
    ctx.csv("solve.csv", &[row])?;
    Ok(checks)
}

fn count_failures<T>(rows: &[T], pass: impl Fn(&T) -> bool) -> usize {
    rows.iter().filter(|r| !pass(r)).count()
}

fn verify_lemmas(ctx: &mut Ctx) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    let lc = &cfg.lemmas;
    let mut checks = Vec::new();

    let mut prop4 = Vec::new();
    for branch in [Branch::SmallP, Branch::LargeP] {
        let rows = prop4_suite(branch, lc.prop4_samples, cfg.seed)?;
        let bad = count_failures(&rows, |r| r.pass);
        let worst = rows.iter().map(|r| r.slack / r.bound.abs().max(1e-300)).fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            format!("prop4_{}", branch.name()),
            bad == 0,
            format!("{bad} violations in {} rows, worst relative slack {worst:.3e}", rows.len()),
        ));
        prop4.extend(rows);
    }
    ctx.csv("prop4.csv", &prop4)?;

    let prop5 = prop5_suite(lc.prop5_samples, cfg.seed)?;
    let bad = count_failures(&prop5, |r| r.pass);
    checks.push(Check::new("prop5", bad == 0, format!("{bad} violations in {} pairs", prop5.len())));
    ctx.csv("prop5.csv", &prop5)?;

    let zt = zt_suite(lc.zt_samples, cfg.seed)?;
    let bad = count_failures(&zt, |r| r.pass);
    checks.push(Check::new("zt", bad == 0, format!("{bad} violations in {} samples", zt.len())));
    ctx.csv("zt.csv", &zt)?;

    let cc = ClaimsConfig { m: lc.claims_m, c_emp: lc.claims_c_emp, witness: lc.witness };
    let sweeps = claims_suite(lc.claims_dim, &lc.scales, &cc, cfg.seed)?;
    for sw in &sweeps {
        checks.push(Check::new(
            format!("claims_{}", sw.params.regime.name()),
            sw.passes(),
            format!(
                "ratio1 negative {}, shrink {:.3}, ratio2 growth {}, ratio3 growth {:.3}",
                sw.ratio1_negative(),
                sw.ratio1_shrink(),
                sw.ratio2_growth().map_or("n/a".to_string(), |g| format!("{g:.3}")),
                sw.ratio3_growth()
            ),
        ));
    }
    ctx.csv("claims.csv", &claims_rows(&sweeps))?;
    let series: Vec<Series> = sweeps
        .iter()
        .map(|sw| Series {
            name: sw.params.regime.name().to_string(),
            points: sw.rows.iter().map(|r| (r.s, -r.ratio1)).collect(),
        })
        .collect();
    let plot = Plot { title: "-ratio1 against |xbar - ybar|", x_label: "|xbar - ybar|", y_label: "-ratio1", log_x: true, log_y: true };
    ctx.svg("claims.svg", &plot, &series)?;

    let exps = exponent_sweep(lc.exponent_p_steps, lc.exponent_gamma_steps);
    let bad = count_failures(&exps, |r| r.ordered);
    checks.push(Check::new(
        "exponent_orderings",
        bad == 0 && !exps.is_empty(),
        format!("{bad} unordered in {} (p, gamma) points", exps.len()),
    ));
    ctx.csv("exponents.csv", &exps)?;
    Ok(checks)
}

struct ScalingRow {
    case: usize,
    lambda: f64,
    ratio: f64,
    base_ratio: f64,
}

impl ScalingRow {
    fn rel_diff(&self) -> f64 {
        (self.ratio - self.base_ratio).abs() / self.base_ratio.abs().max(1e-300)
    }
}

impl CsvRow for ScalingRow {
    fn header() -> Vec<&'static str> {
        vec!["case", "lambda", "ratio", "base_ratio", "rel_diff"]
    }

    fn record(&self) -> Vec<String> {
        vec![self.case.to_string(), num(self.lambda), num(self.ratio), num(self.base_ratio), num(self.rel_diff())]
    }
}

fn measure_regularity(ctx: &mut Ctx) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    let (pc, rc) = (&cfg.problem, &cfg.regularity);
    let grid = Grid::build(pc.dim, pc.n, pc.shape)?;
    let cases = jittered_cases(&rc.cases, rc.jitter, cfg.seed);
    let jobs: Vec<(usize, f64)> = (0..cases.len())
        .flat_map(|k| std::iter::once(1.0).chain(rc.scaling.iter().copied()).map(move |l| (k, l)))
        .collect();
    let results: Vec<(bool, ExperimentRecord)> = jobs
        .par_iter()
        .map(|&(k, lambda)| {
            let case = &cases[k];
            let prob = case.problem(&grid, pc.p)?.scaled(lambda);
            let (u, report) = solve_dirichlet(&prob, &cfg.solver)?;
            let rec = ExperimentRecord::measure(
                &u,
                prob.f(),
                pc.p,
                rc.r,
                &rc.gammas,
                &case.f.to_string(),
                &case.boundary.to_string(),
            )?;
            Ok((report.converged, rec))
        })
        .collect::<Result<_>>()?;

    let per_case = 1 + rc.scaling.len();
    let records: Vec<ExperimentRecord> = results.iter().step_by(per_case).map(|(_, r)| r.clone()).collect();
    let scaling: Vec<ScalingRow> = jobs
        .iter()
        .zip(&results)
        .enumerate()
        .filter(|(j, _)| j % per_case != 0)
        .map(|(_, (&(k, lambda), (_, rec)))| ScalingRow { case: k, lambda, ratio: rec.ratio, base_ratio: records[k].ratio })
        .collect();
    let unconverged = results.iter().filter(|(c, _)| !c).count();
    let c = estimate_constant(&records)?;
    let worst = scaling.iter().map(ScalingRow::rel_diff).fold(0.0, f64::max);

    ctx.csv("regularity.csv", &records)?;
    ctx.csv("scaling.csv", &scaling)?;
    Ok(vec![
        Check::new("solves_converged", unconverged == 0, format!("{unconverged} of {} solves unconverged", results.len())),
        Check::new("empirical_constant", c.is_finite(), format!("C = {c:.6e} over {} cases", records.len())),
        Check::new(
            "scaling_invariance",
            worst <= rc.scaling_tol,
            format!("worst relative change {worst:.3e} (tolerance {:.1e})", rc.scaling_tol),
        ),
    ])
}

#[derive(Debug, Clone)]
struct ConvergenceRow {
    n: usize,
    h: f64,
    error: f64,
    order: Option<f64>,
    iterations: usize,
    converged: bool,
}

impl CsvRow for ConvergenceRow {
    fn header() -> Vec<&'static str> {
        vec!["n", "h", "error", "order", "iterations", "converged"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            num(self.h),
            num(self.error),
            opt(self.order),
            self.iterations.to_string(),
            self.converged.to_string(),
        ]
    }
}

/// Least-squares slope of `ln error` against `ln h`.
pub fn fitted_order(hs: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn convergence_study(ctx: &mut Ctx) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    let pc = &cfg.problem;
    let mut rows: Vec<ConvergenceRow> = cfg
        .convergence
        .levels
        .par_iter()
        .map(|&n| {
            let grid = Grid::build(pc.dim, n, pc.shape)?;
            let prob = pc.case.problem(&grid, pc.p)?;
            let (u, report) = solve_dirichlet(&prob, &cfg.solver)?;
            let exact = exact_field(cfg, &grid)?.ok_or_else(|| Error::pre("no closed-form solution"))?;
            Ok(ConvergenceRow {
                n,
                h: grid.h(),
                error: u.max_abs_diff(&exact)?,
                order: None,
                iterations: report.iterations,
                converged: report.converged,
            })
        })
        .collect::<Result<_>>()?;
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        rows[i].order = Some((a.error / b.error).ln() / (a.h / b.h).ln());
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let order = fitted_order(&hs, &errors);
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);

    ctx.csv("convergence.csv", &rows)?;
    let plot = Plot { title: "max error against h", x_label: "h", y_label: "max |u - u_exact|", log_x: true, log_y: true };
    let series = [Series { name: format!("observed order {order:.2}"), points: hs.iter().copied().zip(errors.iter().copied()).collect() }];
    ctx.svg("convergence.svg", &plot, &series)?;
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    Ok(vec![
        Check::new("solves_converged", unconverged == 0, format!("{unconverged} of {} solves unconverged", rows.len())),
        Check::new("error_decreasing", decreasing, format!("errors {}", errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "))),
        Check::new(
            "observed_order",
            order >= cfg.convergence.min_order,
            format!("fitted order {order:.3} (minimum {})", cfg.convergence.min_order),
        ),
    ])
}
