//! Dirichlet problem for the pseudo-p-Laplacian by convex energy minimization.
//!
//! The discrete energy is
//! `J(u) = (1/p) sum_links |D+ u|^p h^N + (p-1) sum_interior f u h^N`
//! and its gradient at an interior node is `h^N (-div_p u + (p-1) f)`, so a
//! stationary point solves the divergence-form scheme exactly.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{Grid, NodeClass, ScalarField};
use crate::operator::{self, AbsPow, Form};

/// Dirichlet problem data: exponent, interior right-hand side and boundary values.
#[derive(Debug, Clone)]
pub struct EnergyProblem {
    p: f64,
    f: ScalarField,
    boundary: ScalarField,
}

impl EnergyProblem {
    /// `boundary` is evaluated at every boundary node.
    pub fn new(f: ScalarField, p: f64, boundary: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let grid = f.grid().clone();
        let mut g = ScalarField::unset(&grid);
        for node in grid.boundary_nodes() {
            let x = grid.coords(node);
            let v = boundary(&x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("boundary data at {x:?}")));
            }
            g.set(node, v)?;
        }
        Self::from_fields(f, p, g)
    }

    /// `f` must be set on every interior node and `boundary` on every boundary node.
    pub fn from_fields(f: ScalarField, p: f64, boundary: ScalarField) -> Result<Self> {
        operator::check_exponent(p)?;
        if **f.grid() != **boundary.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = f.grid().clone();
        for &node in grid.interior_nodes() {
            if f.get(node).is_none() {
                return Err(Error::pre(format!(
                    "right-hand side unset at interior node {:?}",
                    grid.coords(node)
                )));
            }
        }
        let mut g = ScalarField::unset(&grid);
        for node in grid.boundary_nodes() {
            let v = boundary.get(node).ok_or_else(|| {
                Error::pre(format!("boundary data unset at {:?}", grid.coords(node)))
            })?;
            g.set(node, v)?;
        }
        Ok(Self {
            p,
            f: f.interior_only(),
            boundary: g,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.f.grid()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn boundary(&self) -> &ScalarField {
        &self.boundary
    }

    /// The problem whose solution is `lambda * u`: data `(lambda^{p-1} f, lambda g)`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            p: self.p,
            f: self.f.scaled(lambda.powf(self.p - 1.0)),
            boundary: self.boundary.scaled(lambda),
        }
    }

    /// Problem with `f + c` in place of `f`.
    pub fn shifted_rhs(&self, c: f64) -> Self {
        Self {
            p: self.p,
            f: self.f.map(|v| v + c),
            boundary: self.boundary.clone(),
        }
    }

    pub fn boundary_sup(&self) -> f64 {
        self.boundary.sup_norm()
    }

    pub fn f_sup(&self) -> f64 {
        self.f.sup_norm()
    }

    /// Copies the boundary values into `u`.
    pub fn impose_boundary(&self, u: &mut ScalarField) -> Result<()> {
        for (node, v) in self.boundary.iter_set() {
            u.set(node, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// Mean of the boundary data, extended constantly inside.
    BoundaryMean,
    /// Interior values taken from the field; boundary values are overwritten.
    Field(ScalarField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descent {
    /// Diagonally preconditioned nonlinear conjugate gradients (Polak-Ribiere+).
    ConjugateGradient,
    /// Plain gradient descent with step `1 / max(1, max_links p |D+ u|^{p-2} / h^2)`.
    Steepest,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Bound on `sup |grad J| / h^N` over interior nodes.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_guess: InitialGuess,
    pub descent: Descent,
    /// Keep the energy of every accepted iterate in the report.
    pub record_energy: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 200_000,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_guess: InitialGuess::BoundaryMean,
            descent: Descent::ConjugateGradient,
            record_energy: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::param(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::param(format!("armijo_c must lie in (0,1), got {}", self.armijo_c)));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::param(format!(
                "backtrack_factor must lie in (0,1), got {}",
                self.backtrack_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_energy: f64,
    pub final_grad_sup: f64,
    /// `max |div_p u - (p-1) f|` over interior nodes.
    pub divergence_residual: f64,
    pub wall_time: f64,
    /// Energies of accepted iterates, starting with the initial guess (empty unless
    /// requested). Later entries accumulate the per-step changes, which are computed
    /// link by link and are more accurate than differences of totals.
    pub energy_trace: Vec<f64>,
}

/// Dense, link-based form of the energy used by the minimizer.
struct Discrete {
    p: f64,
    h: f64,
    vol: f64,
    links: Vec<[u32; 2]>,
    free: Vec<usize>,
    fixed: Vec<usize>,
    f: Vec<f64>,
    pow_pm2: AbsPow,
    /// Typical gradient size implied by the data, used to floor the preconditioner.
    grad_scale: f64,
}

impl Discrete {
    fn new(prob: &EnergyProblem) -> Self {
        let grid = prob.grid();
        let mut links = Vec::new();
        for node in 0..grid.len() {
            if grid.class(node) == NodeClass::Exterior {
                continue;
            }
            for axis in 0..grid.dim() {
                if let Some(nb) = grid.neighbour(node, axis, true) {
                    if grid.class(nb) != NodeClass::Exterior {
                        links.push([node as u32, nb as u32]);
                    }
                }
            }
        }
        Self {
            p: prob.p,
            h: grid.h(),
            vol: grid.cell_volume(),
            links,
            free: grid.interior_nodes().to_vec(),
            fixed: grid.boundary_nodes().collect(),
            f: prob.f.to_dense(0.0),
            pow_pm2: AbsPow::new(prob.p - 2.0),
            grad_scale: {
                let (lo, hi) = prob
                    .boundary
                    .iter_set()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (_, v)| (l.min(v), h.max(v)));
                let osc = if hi >= lo { 0.5 * (hi - lo) } else { 0.0 };
                let s = prob.f_sup().powf(1.0 / (prob.p - 1.0)).max(osc);
                if s > 0.0 { s } else { 1.0 }
            },
        }
    }

    /// Energy and gradient; the gradient is zero at fixed nodes.
    fn eval(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let flux_scale = self.vol / self.h;
        let mut links_sum = 0.0;
        for &[a, b] in &self.links {
            let (a, b) = (a as usize, b as usize);
            let d = (u[b] - u[a]) / self.h;
            let flux = self.pow_pm2.eval(d.abs()) * d;
            links_sum += flux * d;
            grad[b] += flux * flux_scale;
            grad[a] -= flux * flux_scale;
        }
        let src = (self.p - 1.0) * self.vol;
        let mut rhs_sum = 0.0;
        for &i in &self.free {
            rhs_sum += self.f[i] * u[i];
            grad[i] += src * self.f[i];
        }
        self.zero_fixed(grad);
        links_sum * self.vol / self.p + src * rhs_sum
    }

    fn zero_fixed(&self, grad: &mut [f64]) {
        for &i in &self.fixed {
            grad[i] = 0.0;
        }
    }

    /// `J(u + alpha dir) - J(u)`, summed link by link to limit cancellation.
    fn energy_change(&self, u: &[f64], dir: &[f64], alpha: f64) -> f64 {
        let mut links_sum = 0.0;
        for &[a, b] in &self.links {
            let (a, b) = (a as usize, b as usize);
            let step = alpha * (dir[b] - dir[a]) / self.h;
            if step == 0.0 {
                continue;
            }
            let d0 = (u[b] - u[a]) / self.h;
            links_sum += self.abs_pow_diff(d0, step);
        }
        let mut rhs_sum = 0.0;
        for &i in &self.free {
            rhs_sum += self.f[i] * dir[i];
        }
        links_sum * self.vol / self.p + (self.p - 1.0) * self.vol * alpha * rhs_sum
    }

    /// `|d + step|^p - |d|^p` without cancellation when `step` is small relative to `d`.
    fn abs_pow_diff(&self, d: f64, step: f64) -> f64 {
        let base = self.pow_pm2.eval(d.abs()) * d * d;
        let r = step / d;
        if r.abs() < 0.5 {
            base * (self.p * r.ln_1p()).exp_m1()
        } else {
            let e = d + step;
            self.pow_pm2.eval(e.abs()) * e * e - base
        }
    }

    /// Diagonal of the Hessian (scaled), floored away from zero.
    fn diagonal(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let scale = (self.p - 1.0) * self.vol / (self.h * self.h);
        for &[a, b] in &self.links {
            let (a, b) = (a as usize, b as usize);
            let d = (u[b] - u[a]) / self.h;
            let c = scale * self.pow_pm2.eval(d.abs());
            out[a] += c;
            out[b] += c;
        }
        let mean = self.free.iter().map(|&i| out[i]).sum::<f64>() / self.free.len().max(1) as f64;
        let data = 2.0 * self.links.len() as f64 / self.free.len().max(1) as f64
            * scale
            * self.pow_pm2.eval(self.grad_scale);
        let floor = (1e-3 * mean).max(1e-3 * data);
        for &i in &self.free {
            out[i] = out[i].max(floor);
        }
    }

    /// Steepest-descent step `1 / max(1, max_links p |D+ u|^{p-2} / h^2)`, in units of `h^{-N}`.
    fn steepest_step(&self, u: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for &[a, b] in &self.links {
            let d = (u[b as usize] - u[a as usize]) / self.h;
            worst = worst.max(self.p * self.pow_pm2.eval(d.abs()) / (self.h * self.h));
        }
        1.0 / worst.max(1.0) / self.vol
    }

    fn grad_sup(&self, grad: &[f64]) -> f64 {
        self.free.iter().map(|&i| grad[i].abs()).fold(0.0, f64::max) / self.vol
    }
}

fn dot(free: &[usize], a: &[f64], b: &[f64]) -> f64 {
    free.iter().map(|&i| a[i] * b[i]).sum()
}

fn dense_from(u: &ScalarField) -> Result<Vec<f64>> {
    let grid = u.grid();
    let mut out = vec![0.0; grid.len()];
    for node in 0..grid.len() {
        if grid.class(node) != NodeClass::Exterior {
            out[node] = u.get(node).ok_or_else(|| Error::UnsetStencil {
                node,
                coords: grid.coords(node),
                neighbor: node,
            })?;
        }
    }
    Ok(out)
}

fn field_from(grid: &Arc<Grid>, dense: &[f64]) -> Result<ScalarField> {
    let mut u = ScalarField::unset(grid);
    for node in 0..grid.len() {
        if grid.class(node) != NodeClass::Exterior {
            u.set(node, dense[node])?;
        }
    }
    Ok(u)
}

/// Discrete energy of `u`; `u` must be set on every non-exterior node.
pub fn energy(u: &ScalarField, prob: &EnergyProblem) -> Result<f64> {
    if **u.grid() != **prob.grid() {
        return Err(Error::GridMismatch);
    }
    let disc = Discrete::new(prob);
    let dense = dense_from(u)?;
    let mut scratch = vec![0.0; dense.len()];
    Ok(disc.eval(&dense, &mut scratch))
}

/// Exact gradient `h^N (-div_p u + (p-1) f)` at interior nodes.
pub fn energy_gradient(u: &ScalarField, prob: &EnergyProblem) -> Result<ScalarField> {
    if **u.grid() != **prob.grid() {
        return Err(Error::GridMismatch);
    }
    let div = operator::apply_divergence(u, prob.p)?;
    let vol = prob.grid().cell_volume();
    let mut out = ScalarField::unset(prob.grid());
    for &node in prob.grid().interior_nodes() {
        let g = (-div.get(node).unwrap() + (prob.p - 1.0) * prob.f.get(node).unwrap()) * vol;
        out.set(node, g)?;
    }
    Ok(out)
}

fn initial_guess(prob: &EnergyProblem, cfg: &SolveConfig) -> Result<ScalarField> {
    let grid = prob.grid();
    let mut u = match &cfg.initial_guess {
        InitialGuess::BoundaryMean => {
            let (sum, count) = prob
                .boundary
                .iter_set()
                .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
            let mean = if count == 0 { 0.0 } else { sum / count as f64 };
            ScalarField::constant(grid, mean)?
        }
        InitialGuess::Field(start) => {
            if **start.grid() != **grid {
                return Err(Error::GridMismatch);
            }
            let mut u = ScalarField::unset(grid);
            for &node in grid.interior_nodes() {
                let v = start.get(node).ok_or_else(|| {
                    Error::pre(format!("initial guess unset at {:?}", grid.coords(node)))
                })?;
                u.set(node, v)?;
            }
            u
        }
    };
    prob.impose_boundary(&mut u)?;
    Ok(u)
}

fn non_finite(what: &str, iteration: usize) -> Error {
    Error::NonFinite(format!("{what} during line search at iteration {iteration}"))
}

/// Minimizes the energy with the boundary data imposed.
pub fn solve_dirichlet(prob: &EnergyProblem, cfg: &SolveConfig) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = prob.grid().clone();
    let disc = Discrete::new(prob);
    let len = grid.len();

    let mut u = dense_from(&initial_guess(prob, cfg)?)?;
    let mut grad = vec![0.0; len];
    let mut energy = disc.eval(&u, &mut grad);
    if !energy.is_finite() {
        return Err(Error::NonFinite("energy of the initial guess".into()));
    }
    let mut trace = Vec::new();
    if cfg.record_energy {
        trace.push(energy);
    }

    let mut dir = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut z_prev = vec![0.0; len];
    let mut grad_prev = vec![0.0; len];
    let mut diag = vec![0.0; len];
    let mut trial = vec![0.0; len];
    let mut trial_grad = vec![0.0; len];
    let mut alpha_prev = 1.0;
    let mut slope_prev = 0.0;
    let mut restart = true;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let gsup = disc.grad_sup(&grad);
        if gsup <= cfg.grad_tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }

        // search direction
        let alpha_guess;
        match cfg.descent {
            Descent::Steepest => {
                for &i in &disc.free {
                    dir[i] = -grad[i];
                }
                alpha_guess = disc.steepest_step(&u);
            }
            Descent::ConjugateGradient => {
                disc.diagonal(&u, &mut diag);
                for &i in &disc.free {
                    z[i] = grad[i] / diag[i];
                }
                let beta = if restart {
                    0.0
                } else {
                    let num: f64 = disc.free.iter().map(|&i| grad[i] * (z[i] - z_prev[i])).sum();
                    let den = dot(&disc.free, &grad_prev, &z_prev);
                    if den > 0.0 { (num / den).max(0.0) } else { 0.0 }
                };
                for &i in &disc.free {
                    dir[i] = -z[i] + beta * dir[i];
                }
                if dot(&disc.free, &grad, &dir) >= 0.0 {
                    for &i in &disc.free {
                        dir[i] = -z[i];
                    }
                }
                alpha_guess = if restart || slope_prev == 0.0 {
                    1.0
                } else {
                    (alpha_prev * slope_prev / dot(&disc.free, &grad, &dir)).clamp(1e-3, 1e3)
                };
                std::mem::swap(&mut z, &mut z_prev);
                grad_prev.copy_from_slice(&grad);
            }
        }
        let slope = dot(&disc.free, &grad, &dir);
        if !(slope < 0.0) {
            // gradient below resolution of the direction; nothing left to gain
            break;
        }

        // secant search for a near-zero directional derivative (J is convex along lines)
        let take = |alpha: f64, trial: &mut Vec<f64>, tg: &mut Vec<f64>| -> f64 {
            trial.copy_from_slice(&u);
            for &i in &disc.free {
                trial[i] += alpha * dir[i];
            }
            disc.eval(trial, tg);
            dot(&disc.free, tg, &dir)
        };
        let (mut lo, mut s_lo) = (0.0, slope);
        let mut hi: Option<(f64, f64)> = None;
        let mut alpha = alpha_guess;
        let mut evaluated_at = f64::NAN;
        for _ in 0..10 {
            let s = take(alpha, &mut trial, &mut trial_grad);
            evaluated_at = alpha;
            if !s.is_finite() {
                return Err(non_finite("directional derivative", iterations));
            }
            if s.abs() <= 0.1 * slope.abs() {
                break;
            }
            if s < 0.0 {
                lo = alpha;
                s_lo = s;
            } else {
                hi = Some((alpha, s));
            }
            alpha = match hi {
                None => {
                    // extrapolate the secant through (0, slope) and (alpha, s)
                    let next = if s > slope { alpha * slope / (slope - s) } else { 4.0 * alpha };
                    next.clamp(1.5 * alpha, 8.0 * alpha)
                }
                Some((a_hi, s_hi)) => {
                    let next = lo - s_lo * (a_hi - lo) / (s_hi - s_lo);
                    let w = a_hi - lo;
                    next.clamp(lo + 0.05 * w, a_hi - 0.05 * w)
                }
            };
        }

        // Armijo acceptance with backtracking
        let mut change = disc.energy_change(&u, &dir, alpha);
        let mut backtracks = 0;
        while !(change <= cfg.armijo_c * alpha * slope) {
            if !change.is_finite() {
                return Err(non_finite("energy", iterations));
            }
            alpha *= cfg.backtrack_factor;
            backtracks += 1;
            if backtracks > 60 {
                break;
            }
            change = disc.energy_change(&u, &dir, alpha);
        }
        if backtracks > 60 {
            if restart {
                break;
            }
            restart = true;
            continue;
        }
        if evaluated_at != alpha {
            take(alpha, &mut trial, &mut trial_grad);
        }

        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        energy += change;
        if cfg.record_energy {
            trace.push(energy);
        }
        alpha_prev = alpha;
        slope_prev = slope;
        restart = false;
        iterations += 1;
    }

    let solution = field_from(&grid, &u)?;
    let final_grad_sup = disc.grad_sup(&grad);
    let divergence_residual =
        operator::consistency_residual(&solution, &prob.f, prob.p, Form::Divergence)?;
    let report = SolveReport {
        converged,
        iterations,
        final_energy: disc.eval(&u, &mut trial_grad),
        final_grad_sup,
        divergence_residual,
        wall_time: start.elapsed().as_secs_f64(),
        energy_trace: trace,
    };
    Ok((solution, report))
}

/// Normalized box-kernel average of `f` over nodes within Euclidean distance `radius`.
pub fn mollify_rhs(f: &ScalarField, radius: f64) -> Result<ScalarField> {
    let grid = f.grid();
    let h = grid.h();
    if !(radius >= h * (1.0 - 1e-12)) || !radius.is_finite() {
        return Err(Error::param(format!("mollifier radius {radius} is below the spacing {h}")));
    }
    let reach = (radius / h + 1e-9).floor() as isize;
    let dim = grid.dim();
    let mut offsets: Vec<[isize; 3]> = Vec::new();
    let r2 = (radius / h) * (radius / h) * (1.0 + 1e-12);
    let span = -reach..=reach;
    for i in span.clone() {
        for j in if dim > 1 { span.clone() } else { 0..=0 } {
            for k in if dim > 2 { span.clone() } else { 0..=0 } {
                if ((i * i + j * j + k * k) as f64) <= r2 {
                    offsets.push([i, j, k]);
                }
            }
        }
    }
    let n = grid.nodes_per_axis() as isize;
    let mut out = ScalarField::unset(grid);
    let mut idx = [0usize; 3];
    let mut nb = [0usize; 3];
    for (node, _) in f.iter_set() {
        grid.unflatten(node, &mut idx);
        let (mut sum, mut count) = (0.0, 0usize);
        'offsets: for off in &offsets {
            for axis in 0..dim {
                let c = idx[axis] as isize + off[axis];
                if c < 0 || c >= n {
                    continue 'offsets;
                }
                nb[axis] = c as usize;
            }
            if let Some(v) = f.get(grid.flatten(&nb[..dim])) {
                sum += v;
                count += 1;
            }
        }
        out.set(node, sum / count as f64)?;
    }
    Ok(out)
}
