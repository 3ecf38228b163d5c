//! The energy `I_ε(u) = ½‖u‖²_ε − ∫F(u)`, its L² gradient, the Nehari
//! residual `J_ε(u) = ⟨I'_ε(u), u⟩`, the restricted-set defect
//! `Q(u) = [u]²_α + ∫V(εx)u² − l0|u|²_2`, and the projection of a ray onto the
//! Nehari manifold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::models::{sample_potential, NonlinearitySpec, PotentialSpec};
use crate::spectral::{apply_frac_laplacian, inner_l2};

/// Rescaled problem `(-Δ)^α u + V(εx) u = f(u)` on a periodic grid.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Grid,
    alpha: f64,
    eps: f64,
    potential: Field,
    nonlinearity: NonlinearitySpec,
}

impl Problem {
    pub fn new(
        grid: &Grid,
        alpha: f64,
        eps: f64,
        potential: &PotentialSpec,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        let field = sample_potential(potential, grid, eps)?;
        Self::from_potential_field(alpha, eps, field, nonlinearity)
    }

    /// Constant potential `a`: the autonomous limit problem.
    pub fn autonomous(grid: &Grid, alpha: f64, level: f64, nonlinearity: NonlinearitySpec) -> Result<Self> {
        Self::from_potential_field(alpha, 1.0, Field::constant(grid, level), nonlinearity)
    }

    pub fn from_potential_field(
        alpha: f64,
        eps: f64,
        potential: Field,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("order alpha = {alpha} not in (0, 1]")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon = {eps} must be positive")));
        }
        potential.check_finite()?;
        let min = potential.values().iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NonpositivePotential(min));
        }
        Ok(Self {
            grid: potential.grid().clone(),
            alpha,
            eps,
            potential,
            nonlinearity,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn l0(&self) -> f64 {
        self.nonlinearity.l0
    }

    fn check_field(&self, u: &Field) -> Result<()> {
        if !u.grid().same_shape(&self.grid) {
            return Err(Error::GridMismatch);
        }
        u.check_finite()
    }

    /// The quadratic pieces `([u]²_α, ∫V u², |u|²_2)`.
    fn quadratic_parts(&self, u: &Field) -> Result<(f64, f64, f64)> {
        let lap = apply_frac_laplacian(u, self.alpha)?;
        let seminorm = inner_l2(u, &lap)?;
        let w = self.grid.cell_volume();
        let (mut pot, mut mass) = (0.0, 0.0);
        for (&ui, &vi) in u.values().iter().zip(self.potential.values()) {
            pot += vi * ui * ui;
            mass += ui * ui;
        }
        Ok((seminorm, pot * w, mass * w))
    }

    /// `‖u‖²_ε = [u]²_α + ∫V(εx)u²`.
    pub fn norm_sq(&self, u: &Field) -> Result<f64> {
        self.check_field(u)?;
        let (s, p, _) = self.quadratic_parts(u)?;
        Ok(s + p)
    }

    /// `∫ f(t u) u / t` for `t > 0`.
    fn nonlinear_pairing(&self, u: &Field, t: f64) -> f64 {
        let sum: f64 = u
            .values()
            .iter()
            .map(|&ui| self.nonlinearity.f(t * ui) * ui)
            .sum();
        sum * self.grid.cell_volume() / t
    }

    fn antiderivative_integral(&self, u: &Field, t: f64) -> f64 {
        let sum: f64 = u
            .values()
            .iter()
            .map(|&ui| self.nonlinearity.antiderivative(t * ui))
            .sum();
        sum * self.grid.cell_volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `½[u]²_α`
    pub seminorm_part: f64,
    /// `½∫V(εx)u²`
    pub potential_part: f64,
    /// `∫F(u)`
    pub nonlinear_part: f64,
    pub total: f64,
    /// `J(u) = ‖u‖²_ε − ∫f(u)u`
    pub nehari_residual: f64,
    /// `Q(u) = ‖u‖²_ε − l0|u|²_2`
    pub theta_defect: f64,
    /// `‖u‖²_ε`
    pub norm_sq: f64,
    /// `|u|²_2`
    pub mass: f64,
}

pub fn energy(p: &Problem, u: &Field) -> Result<EnergyReport> {
    p.check_field(u)?;
    let (seminorm, pot, mass) = p.quadratic_parts(u)?;
    let w = p.grid.cell_volume();
    let (mut big_f, mut fu) = (0.0, 0.0);
    for &ui in u.values() {
        if ui > 0.0 {
            big_f += p.nonlinearity.antiderivative(ui);
            fu += p.nonlinearity.f(ui) * ui;
        }
    }
    let (big_f, fu) = (big_f * w, fu * w);
    let norm_sq = seminorm + pot;
    let theta_defect = defect(norm_sq, p.l0(), mass);
    let report = EnergyReport {
        seminorm_part: 0.5 * seminorm,
        potential_part: 0.5 * pot,
        nonlinear_part: big_f,
        total: 0.5 * seminorm + 0.5 * pot - big_f,
        nehari_residual: norm_sq - fu,
        theta_defect,
        norm_sq,
        mass,
    };
    if [report.total, report.nehari_residual].iter().all(|v| v.is_finite()) {
        Ok(report)
    } else {
        Err(Error::NonFinite)
    }
}

/// L² gradient `(-Δ)^α u + V(εx) u − f(u)`.
pub fn gradient(p: &Problem, u: &Field) -> Result<Field> {
    p.check_field(u)?;
    let mut out = apply_frac_laplacian(u, p.alpha)?;
    for ((o, &ui), &vi) in out
        .values_mut()
        .iter_mut()
        .zip(u.values())
        .zip(p.potential.values())
    {
        *o += vi * ui - p.nonlinearity.f(ui);
    }
    out.check_finite()?;
    Ok(out)
}

/// `Q(u)`; `u ∈ Θ_ε` iff the value is strictly negative.
pub fn theta_defect(p: &Problem, u: &Field) -> Result<f64> {
    p.check_field(u)?;
    let (s, pot, mass) = p.quadratic_parts(u)?;
    Ok(defect(s + pot, p.l0(), mass))
}

fn defect(norm_sq: f64, l0: f64, mass: f64) -> f64 {
    if mass == 0.0 {
        norm_sq
    } else {
        norm_sq - l0 * mass
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub t_star: f64,
    pub projected: Field,
}

/// Scale `u` onto the Nehari manifold: the unique `t* > 0` with `J(t* u) = 0`,
/// which is also the maximizer of `t ↦ I(t u)`.
pub fn project_to_nehari(p: &Problem, u: &Field) -> Result<Projection> {
    p.check_field(u)?;
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let (s, pot, mass) = p.quadratic_parts(u)?;
    let norm_sq = s + pot;
    let q = defect(norm_sq, p.l0(), mass);
    if !(q < 0.0) {
        return Err(Error::NotInTheta(q));
    }
    let g = |t: f64| norm_sq - p.nonlinear_pairing(u, t);

    let mut lo = 1e-6;
    while !(g(lo) > 0.0) {
        lo *= 1e-3;
        if lo < 1e-200 {
            return Err(Error::NoNehariPoint(q));
        }
    }
    let mut hi = 1.0f64.max(lo * 2.0);
    let mut doublings = 0;
    while !(g(hi) < 0.0) {
        if g(hi) > 0.0 {
            lo = hi;
        }
        hi *= 2.0;
        doublings += 1;
        if doublings > 300 {
            let pos_mass: f64 = u.values().iter().map(|v| v.max(0.0).powi(2)).sum::<f64>()
                * p.grid.cell_volume();
            return Err(Error::NoNehariPoint(norm_sq - p.l0() * pos_mass));
        }
    }
    let mut iterations = 0;
    while iterations < 80 || hi - lo > 2.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || iterations > 400 {
            break;
        }
        let gm = g(mid);
        if gm > 0.0 {
            lo = mid;
        } else if gm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
            break;
        }
        iterations += 1;
    }
    // Pick whichever endpoint has the smaller residual.
    let t_star = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Ok(Projection {
        t_star,
        projected: u.scaled(t_star),
    })
}

/// `I(t u)`.
pub fn energy_on_ray(p: &Problem, u: &Field, t: f64) -> Result<f64> {
    let norm_sq = p.norm_sq(u)?;
    Ok(0.5 * t * t * norm_sq - p.antiderivative_integral(u, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayScan {
    pub t_best: f64,
    /// False when the maximum sits on the right end of the scanned interval.
    pub interior: bool,
    /// `I(t u)` still increasing over the last tenth of the scan.
    pub increasing_tail: bool,
    pub values: Vec<(f64, f64)>,
}

/// Brute-force maximization of `t ↦ I(t u)` over a uniform grid on `(0, t_max]`.
pub fn ray_argmax_oracle(p: &Problem, u: &Field, t_max: f64, steps: usize) -> Result<RayScan> {
    if steps < 100 {
        return Err(Error::InvalidInput(format!("ray scan needs >= 100 steps, got {steps}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput(format!("t_max = {t_max}")));
    }
    let norm_sq = p.norm_sq(u)?;
    let values: Vec<(f64, f64)> = (1..=steps)
        .map(|i| {
            let t = t_max * i as f64 / steps as f64;
            (t, 0.5 * t * t * norm_sq - p.antiderivative_integral(u, t))
        })
        .collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &(_, v))| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let tail = steps / 10;
    let increasing_tail = values[steps - tail - 1..]
        .windows(2)
        .all(|w| w[1].1 > w[0].1);
    Ok(RayScan {
        t_best: values[best].0,
        interior: best + 1 < steps,
        increasing_tail,
        values,
    })
}
