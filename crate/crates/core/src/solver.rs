//! Nehari-constrained energy descent.
//!
//! Each iteration takes a Sobolev-preconditioned descent step on `I` (the L²
//! gradient mapped through `((-Δ)^α + c)^{-1}`), rescales the trial field back
//! onto the Nehari manifold along its ray, and accepts it under an Armijo
//! test on the reprojected energy. A constrained critical point found this way
//! is a free critical point, so convergence is certified by the free L²
//! gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::models::NonlinearitySpec;
use crate::spectral::{apply_frac_laplacian, helmholtz_inverse, inner_l2};
use crate::variational::{energy, gradient, project_to_nehari, theta_defect, EnergyReport, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Preconditioned steepest descent.
    Steepest,
    /// Preconditioned Polak–Ribière+ conjugate gradient with restarts.
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative free-gradient tolerance `‖∇I‖₂ / ‖u‖₂`.
    pub tol_residual: f64,
    /// Preconditioner shift; defaults to the grid mean of the potential.
    pub precond_shift: Option<f64>,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_step: f64,
    /// Consecutive line-search failures before giving up.
    pub max_backtracks: usize,
    pub direction: Direction,
    /// Below this residual each iteration first tries a Newton step on the
    /// free equation; `0` disables it.
    pub newton_switch: f64,
    pub rng_seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol_residual: 1e-8,
            precond_shift: None,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_step: 16.0,
            max_backtracks: 50,
            direction: Direction::ConjugateGradient,
            newton_switch: 1e-3,
            rng_seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || self.max_iter < 1 {
            return Err(Error::InvalidInput(
                "solver needs tol_residual > 0 and max_iter >= 1".into(),
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0)
            || !(self.initial_step > 0.0)
            || !(self.max_step >= self.initial_step)
            || !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0)
        {
            return Err(Error::InvalidInput("bad line-search parameters".into()));
        }
        if let Some(c) = self.precond_shift {
            if !(c > 0.0) {
                return Err(Error::NonpositiveShift(c));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterExceeded,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Field,
    pub report: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub residual: f64,
    /// Nehari scaling factor applied at each accepted iterate (seed first).
    pub t_history: Vec<f64>,
    /// Accepted energies, seed first.
    pub energy_history: Vec<f64>,
    pub max_point: Vec<f64>,
    /// `∫ (u⁻)²`.
    pub negative_mass: f64,
}

impl SolveResult {
    pub fn energy(&self) -> f64 {
        self.report.total
    }

    /// `Err(MaxIterExceeded)`-style view for callers that need convergence.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::InvalidInput(format!(
                "solver stopped after {} iterations with residual {:.3e}",
                self.iterations, self.residual
            )))
        }
    }
}

fn l2_norm(u: &Field) -> f64 {
    inner_l2(u, u).unwrap_or(0.0).sqrt()
}

pub fn negative_mass(u: &Field) -> f64 {
    u.values().iter().map(|v| v.min(0.0).powi(2)).sum::<f64>() * u.grid().cell_volume()
}

/// Grid point of the largest value; ties go to the smallest flat index.
pub fn argmax_index(u: &Field) -> usize {
    let mut best = 0;
    for (i, &v) in u.values().iter().enumerate() {
        if v > u.values()[best] {
            best = i;
        }
    }
    best
}

/// Minimize `I` over the Nehari manifold starting from `seed`, which must lie
/// in the restricted set.
pub fn solve_constrained(p: &Problem, seed: &Field, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    if seed.is_zero() {
        return Err(Error::ZeroField);
    }
    let q = theta_defect(p, seed)?;
    if !(q < 0.0) {
        return Err(Error::SeedNotInTheta(q));
    }
    let shift = opts.precond_shift.unwrap_or_else(|| {
        let v = p.potential().values();
        v.iter().sum::<f64>() / v.len() as f64
    });
    let alpha = p.alpha();

    let first = project_to_nehari(p, seed)?;
    let mut u = first.projected;
    let mut report = energy(p, &u)?;
    let mut t_history = vec![first.t_star];
    let mut energy_history = vec![report.total];
    let mut tau = opts.initial_step;
    let mut prev: Option<(Field, Field, f64)> = None; // (direction, precond grad, <g, Pg>)
    let mut iterations = 0;
    let mut residual;
    let mut since_restart = 0usize;

    loop {
        let g = gradient(p, &u)?;
        residual = l2_norm(&g) / l2_norm(&u);
        if residual <= opts.tol_residual || iterations >= opts.max_iter {
            break;
        }
        if residual < opts.newton_switch {
            if let Some((next, t_star, r)) = newton_step(p, &u, &g, shift, residual, report.total)? {
                u = next;
                report = r;
                t_history.push(t_star);
                energy_history.push(report.total);
                iterations += 1;
                prev = None;
                continue;
            }
        }
        let pg = helmholtz_inverse(&g, alpha, shift)?;
        let g_pg = inner_l2(&g, &pg)?;
        let mut d = pg.scaled(-1.0);
        if opts.direction == Direction::ConjugateGradient && since_restart < 50 {
            if let Some((d_prev, pg_prev, g_pg_prev)) = &prev {
                // PR+: beta = <g, P g - P g_prev> / <g_prev, P g_prev>
                let cross = inner_l2(&g, pg_prev)?;
                let beta = ((g_pg - cross) / g_pg_prev).max(0.0);
                if beta > 0.0 {
                    let cg = d.axpy(beta, d_prev)?;
                    if inner_l2(&g, &cg)? < 0.0 {
                        d = cg;
                    }
                }
            }
        } else {
            since_restart = 0;
        }
        let slope = inner_l2(&g, &d)?;

        let mut failures = 0;
        let (accepted, t_star, new_report) = loop {
            let trial = u.axpy(tau, &d)?;
            let outcome = project_to_nehari(p, &trial)
                .and_then(|proj| energy(p, &proj.projected).map(|r| (proj, r)));
            if let Ok((proj, r)) = outcome {
                let slack = 1e-12 * report.total.abs();
                if r.total <= report.total + opts.sufficient_decrease * tau * slope + slack {
                    break (proj.projected, proj.t_star, r);
                }
            }
            failures += 1;
            if failures >= opts.max_backtracks {
                return Err(Error::Diverged(failures));
            }
            tau *= opts.shrink;
            // A stalled CG direction falls back to steepest descent.
            if failures == 10 && opts.direction == Direction::ConjugateGradient {
                d = pg.scaled(-1.0);
                since_restart = 0;
            }
        };
        prev = Some((d, pg, g_pg));
        since_restart += 1;
        u = accepted;
        report = new_report;
        t_history.push(t_star);
        energy_history.push(report.total);
        iterations += 1;
        if failures == 0 {
            tau = (tau / opts.shrink).min(opts.max_step);
        }
    }

    let converged = residual <= opts.tol_residual;
    let max_point = u.grid().point(argmax_index(&u));
    Ok(SolveResult {
        negative_mass: negative_mass(&u),
        max_point,
        report,
        iterations,
        converged,
        termination: if converged {
            Termination::Converged
        } else {
            Termination::MaxIterExceeded
        },
        residual,
        t_history,
        energy_history,
        u,
    })
}

/// Inexact Newton step for the free equation, solved by preconditioned MINRES
/// (the linearization is indefinite). Returned only if the reprojected
/// iterate lowers both the residual and, up to roundoff slack, the energy.
fn newton_step(
    p: &Problem,
    u: &Field,
    g: &Field,
    shift: f64,
    residual: f64,
    current: f64,
) -> Result<Option<(Field, f64, EnergyReport)>> {
    let alpha = p.alpha();
    let nl = p.nonlinearity();
    let diag: Vec<f64> = u
        .values()
        .iter()
        .zip(p.potential().values())
        .map(|(&ui, &vi)| vi - nl.eval(ui).fprime)
        .collect();
    let apply = |x: &Field| -> Result<Field> {
        let mut out = apply_frac_laplacian(x, alpha)?;
        for ((o, &xi), &di) in out.values_mut().iter_mut().zip(x.values()).zip(&diag) {
            *o += di * xi;
        }
        Ok(out)
    };
    let precond = |x: &Field| helmholtz_inverse(x, alpha, shift);
    let rhs = g.scaled(-1.0);
    let delta = minres(apply, precond, &rhs, 1e-4, 300)?;
    let Ok(proj) = project_to_nehari(p, &u.axpy(1.0, &delta)?) else {
        return Ok(None);
    };
    let r = energy(p, &proj.projected)?;
    if r.total > current + 1e-12 * current.abs() {
        return Ok(None);
    }
    let g_new = gradient(p, &proj.projected)?;
    let res_new = l2_norm(&g_new) / l2_norm(&proj.projected);
    if !(res_new < 0.5 * residual) {
        return Ok(None);
    }
    Ok(Some((proj.projected, proj.t_star, r)))
}

/// Preconditioned MINRES for a symmetric, possibly indefinite operator with
/// a symmetric positive definite preconditioner. Starts from zero.
fn minres(
    apply: impl Fn(&Field) -> Result<Field>,
    precond: impl Fn(&Field) -> Result<Field>,
    b: &Field,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Field> {
    let mut x = Field::zeros(b.grid());
    let mut v_prev = Field::zeros(b.grid());
    let mut v = b.clone();
    let mut z = precond(&v)?;
    let mut gamma = inner_l2(&z, &v)?.sqrt();
    if !(gamma > 0.0) {
        return Ok(x);
    }
    let gamma0 = gamma;
    let mut gamma_prev = 1.0;
    let mut eta = gamma;
    let (mut c, mut c_prev, mut s, mut s_prev) = (1.0, 1.0, 0.0, 0.0);
    let mut w = Field::zeros(b.grid());
    let mut w_prev = Field::zeros(b.grid());
    for _ in 0..max_iter {
        z = z.scaled(1.0 / gamma);
        let az = apply(&z)?;
        let delta = inner_l2(&az, &z)?;
        let v_next = az
            .axpy(-delta / gamma, &v)?
            .axpy(-gamma / gamma_prev, &v_prev)?;
        let z_next = precond(&v_next)?;
        let gamma_next = inner_l2(&z_next, &v_next)?.max(0.0).sqrt();
        let a0 = c * delta - c_prev * s * gamma;
        let a1 = a0.hypot(gamma_next);
        let a2 = s * delta + c_prev * c * gamma;
        let a3 = s_prev * gamma;
        if !(a1 > 0.0) {
            break;
        }
        let (c_next, s_next) = (a0 / a1, gamma_next / a1);
        let w_next = z.axpy(-a3, &w_prev)?.axpy(-a2, &w)?.scaled(1.0 / a1);
        x = x.axpy(c_next * eta, &w_next)?;
        eta *= -s_next;
        w_prev = std::mem::replace(&mut w, w_next);
        v_prev = std::mem::replace(&mut v, v_next);
        z = z_next;
        gamma_prev = gamma;
        gamma = gamma_next;
        c_prev = c;
        c = c_next;
        s_prev = s;
        s = s_next;
        if eta.abs() <= rel_tol * gamma0 || !(gamma > 0.0) {
            break;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct LimitSolution {
    pub level: f64,
    pub best: SolveResult,
    pub best_index: usize,
    /// Energy reached from each seed (`None` if that start failed).
    pub energies: Vec<Option<f64>>,
}

impl LimitSolution {
    pub fn energy(&self) -> f64 {
        self.best.report.total
    }
}

/// Number of multistart seeds used by [`solve_limit`].
pub const LIMIT_STARTS: usize = 5;

/// Gaussian seeds of increasing width, centers jittered within one cell;
/// each is widened until it falls inside the restricted set.
fn limit_seeds(p: &Problem, count: usize, rng_seed: u64) -> Vec<Field> {
    let grid = p.grid();
    let h = grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let widths = [1.0, 1.5, 2.0, 3.0, 4.0];
    (0..count)
        .map(|k| {
            let center: Vec<f64> = (0..grid.dim()).map(|_| rng.gen_range(-0.5..0.5) * h).collect();
            let mut width = widths[k % widths.len()] * (1.0 + (k / widths.len()) as f64);
            loop {
                let seed = Field::from_fn(grid, |x| {
                    let r2: f64 = grid
                        .periodic_displacement(x, &center)
                        .iter()
                        .map(|d| d * d)
                        .sum();
                    (-0.5 * r2 / (width * width)).exp()
                });
                let widened = width * 1.5;
                match theta_defect(p, &seed) {
                    Ok(q) if q < 0.0 => return seed,
                    _ if widened < grid.half_width() / 2.0 => width = widened,
                    _ => return seed,
                }
            }
        })
        .collect()
}

/// Ground state of `(-Δ)^α u + a u = f(u)` by multistart constrained descent;
/// the lowest converged energy wins, earliest seed on ties within 1e-10.
pub fn solve_limit(
    level: f64,
    nonlinearity: &NonlinearitySpec,
    grid: &Grid,
    alpha: f64,
    opts: &SolveOptions,
) -> Result<LimitSolution> {
    let l0 = nonlinearity.l0;
    if !(level > 0.0 && level < l0) {
        return Err(Error::SlopeOrdering { a: level, l0 });
    }
    let p = Problem::autonomous(grid, alpha, level, nonlinearity.clone())?;
    let seeds = limit_seeds(&p, LIMIT_STARTS, opts.rng_seed);
    let results: Vec<Result<SolveResult>> = seeds
        .iter()
        .map(|s| solve_constrained(&p, s, opts))
        .collect();
    let mut best: Option<(usize, &SolveResult)> = None;
    for (i, r) in results.iter().enumerate() {
        let Ok(r) = r else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                (r.converged && !b.converged)
                    || (r.converged == b.converged && r.report.total < b.report.total - 1e-10)
            }
        };
        if better {
            best = Some((i, r));
        }
    }
    let Some((best_index, best)) = best else {
        return Err(results.into_iter().find_map(|r| r.err()).unwrap_or(Error::Diverged(0)));
    };
    let best = best.clone();
    Ok(LimitSolution {
        level,
        best,
        best_index,
        energies: results
            .iter()
            .map(|r| r.as_ref().ok().map(|s| s.report.total))
            .collect(),
    })
}

/// Limit energies `c_a` along a strictly increasing list of levels.
pub fn energy_curve(
    levels: &[f64],
    nonlinearity: &NonlinearitySpec,
    grid: &Grid,
    alpha: f64,
    opts: &SolveOptions,
) -> Result<Vec<(f64, f64)>> {
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("levels must be strictly increasing".into()));
    }
    levels
        .par_iter()
        .map(|&a| solve_limit(a, nonlinearity, grid, alpha, opts).map(|s| (a, s.energy())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limit_problem() -> (Grid, NonlinearitySpec) {
        (
            Grid::new(1, 20.0, 256).unwrap(),
            NonlinearitySpec::saturable(0.4).unwrap(),
        )
    }

    #[test]
    fn seed_outside_theta_rejected() {
        let (grid, nl) = limit_problem();
        let weak = NonlinearitySpec::saturable(2.0).unwrap();
        let p = Problem::autonomous(&grid, 0.5, 1.0, weak).unwrap();
        let seed = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        assert!(matches!(
            solve_constrained(&p, &seed, &SolveOptions::default()),
            Err(Error::SeedNotInTheta(_))
        ));
        let p = Problem::autonomous(&grid, 0.5, 1.0, nl).unwrap();
        assert_eq!(
            solve_constrained(&p, &Field::zeros(&grid), &SolveOptions::default()).unwrap_err(),
            Error::ZeroField
        );
    }

    #[test]
    fn slope_ordering_enforced() {
        let (grid, nl) = limit_problem();
        let err = solve_limit(2.5, &nl, &grid, 0.5, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SlopeOrdering { .. }));
        assert!(solve_limit(0.0, &nl, &grid, 0.5, &SolveOptions::default()).is_err());
    }

    #[test]
    fn energy_curve_input_checks() {
        let (grid, nl) = limit_problem();
        let opts = SolveOptions::default();
        assert!(matches!(
            energy_curve(&[1.0, 0.5], &nl, &grid, 0.5, &opts),
            Err(Error::InvalidInput(_))
        ));
        let single = energy_curve(&[1.0], &nl, &grid, 0.5, &opts).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single[0].1 > 0.0);
    }

    #[test]
    fn descent_is_monotone_and_converges() {
        let (grid, nl) = limit_problem();
        let p = Problem::autonomous(&grid, 0.5, 1.0, nl).unwrap();
        let seed = Field::from_fn(&grid, |x| (-x[0] * x[0] / 8.0).exp());
        for direction in [Direction::Steepest, Direction::ConjugateGradient] {
            let opts = SolveOptions {
                direction,
                ..SolveOptions::default()
            };
            let r = solve_constrained(&p, &seed, &opts).unwrap();
            assert!(r.converged, "{direction:?}: residual {}", r.residual);
            for w in r.energy_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
            assert!(r.report.nehari_residual.abs() <= 1e-6 * r.report.norm_sq);
            assert!(r.negative_mass <= 1e-6 * r.report.mass);
        }
    }
}
