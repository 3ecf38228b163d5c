//! Post-solve measurements: maxima, profile comparison, tail decay, energy
//! level sets and ground-state selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::localization::BranchLabel;
use crate::solver::{argmax_index, SolveResult};
use crate::spectral::{h_alpha_norm_sq, translate, Interpolant};

/// Grid point holding the largest value (smallest flat index on ties).
pub fn locate_max(u: &Field) -> Result<Vec<f64>> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    Ok(u.grid().point(argmax_index(u)))
}

/// Sub-grid maximum of the trigonometric interpolant, found by Newton steps
/// from [`locate_max`] and confined to the neighbouring cells.
pub fn refine_max(u: &Field) -> Result<Vec<f64>> {
    let start = locate_max(u)?;
    let grid = u.grid();
    let d = grid.dim();
    let h = grid.spacing();
    let interp = Interpolant::new(u);
    let mut x = start.clone();
    let mut best = interp.eval(&x).value;
    for _ in 0..30 {
        let jet = interp.eval(&x);
        let Some(step) = newton_ascent(&jet.hessian, &jet.gradient, d) else {
            break;
        };
        let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s).collect();
        if trial.iter().zip(&start).any(|(t, s)| (t - s).abs() > h) {
            break;
        }
        let value = interp.eval(&trial).value;
        if value < best {
            break;
        }
        best = value;
        let size = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        x = trial;
        if size < 1e-13 * h {
            break;
        }
    }
    Ok(x)
}

/// `-H^{-1} g` for a negative definite `H` (`d ≤ 3`), else `None`.
fn newton_ascent(hess: &[f64], grad: &[f64], d: usize) -> Option<Vec<f64>> {
    // Solve (-H) s = g by Gaussian elimination with partial pivoting.
    let mut a: Vec<f64> = hess.iter().map(|v| -v).collect();
    let mut b = grad.to_vec();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))?;
        if a[piv * d + col].abs() < 1e-300 {
            return None;
        }
        for k in 0..d {
            a.swap(col * d + k, piv * d + k);
        }
        b.swap(col, piv);
        for row in col + 1..d {
            let f = a[row * d + col] / a[col * d + col];
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut s = vec![0.0; d];
    for row in (0..d).rev() {
        let mut acc = b[row];
        for k in row + 1..d {
            acc -= a[row * d + k] * s[k];
        }
        s[row] = acc / a[row * d + row];
    }
    // Reject directions of non-ascent (H not negative definite along s).
    let curvature: f64 = (0..d)
        .map(|i| (0..d).map(|j| s[i] * hess[i * d + j] * s[j]).sum::<f64>())
        .sum();
    (curvature < 0.0).then_some(s)
}

/// `‖u(· + η) − w(· + m)‖_{H^α}` with `m` the refined maximum of `w`, taken
/// on the centered window shared by both grids. The grids must have the same
/// dimension and spacing.
pub fn profile_error(u: &Field, w_limit: &Field, eta: &[f64], alpha: f64) -> Result<f64> {
    let (gu, gw) = (u.grid(), w_limit.grid());
    if gu.dim() != gw.dim() || eta.len() != gu.dim() {
        return Err(Error::GridMismatch);
    }
    let h = gu.spacing();
    if ((h - gw.spacing()) / h).abs() > 1e-12 {
        return Err(Error::GridMismatch);
    }
    let m = refine_max(w_limit)?;
    let neg = |p: &[f64]| p.iter().map(|v| -v).collect::<Vec<f64>>();
    let uc = translate(u, &neg(eta))?;
    let wc = translate(w_limit, &neg(&m))?;
    let n = gu.points_per_axis().min(gw.points_per_axis());
    let window = Grid::new(gu.dim(), n as f64 * h / 2.0, n)?;
    let cu = centered_window(&uc, &window);
    let cw = centered_window(&wc, &window);
    let diff = cu.axpy(-1.0, &cw)?;
    Ok(h_alpha_norm_sq(&diff, alpha)?.max(0.0).sqrt())
}

/// Values of `u` at the points of the smaller, origin-centered `window`.
fn centered_window(u: &Field, window: &Grid) -> Field {
    let grid = u.grid();
    let offset = (grid.points_per_axis() - window.points_per_axis()) / 2;
    let values = (0..window.len())
        .map(|flat| {
            let idx: Vec<usize> = window.unravel(flat).iter().map(|i| i + offset).collect();
            u.values()[grid.ravel(&idx)]
        })
        .collect();
    Field::from_raw(window, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `C |x - η|^{-p}`.
    Plain,
    /// `C Σ_m |x - η + 2Rm|^{-p}`: the power law summed over periodic images.
    Periodized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted exponent (negative for decaying tails).
    pub exponent: f64,
    pub r2: f64,
    /// Least-squares log-log slope, ignoring periodic images.
    pub plain_slope: f64,
    pub shells: usize,
}

/// Shell-averaged power-law fit of the tail of `u` about `eta` over radii in
/// `window`, which must lie in `[0.2R, 0.5R]`.
pub fn decay_fit(u: &Field, eta: &[f64], window: [f64; 2], model: DecayModel) -> Result<DecayFit> {
    let grid = u.grid();
    let d = grid.dim();
    let r = grid.half_width();
    let h = grid.spacing();
    let [lo, hi] = window;
    if !(lo < hi) || lo < 0.2 * r - 1e-9 || hi > 0.5 * r + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "decay window [{lo}, {hi}] must lie in [0.2R, 0.5R] with R = {r}"
        )));
    }
    let bins = ((hi - lo) / h).floor() as usize;
    if bins == 0 {
        return Err(Error::WindowTooSmall(0));
    }
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    let mut members: Vec<Vec<Vec<f64>>> = vec![Vec::new(); bins];
    let mut nonpositive = false;
    grid.for_each_point(|flat, x| {
        let z = grid.periodic_displacement(x, eta);
        let dist = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dist < lo || dist >= hi {
            return;
        }
        let b = (((dist - lo) / h) as usize).min(bins - 1);
        let v = u.values()[flat];
        if !(v > 0.0) {
            nonpositive = true;
        }
        sums[b] += v;
        counts[b] += 1;
        if model == DecayModel::Periodized {
            members[b].push(z);
        }
    });
    if nonpositive {
        return Err(Error::NonpositiveTail);
    }
    let shells: Vec<usize> = (0..bins).filter(|&b| counts[b] > 0).collect();
    if shells.len() < 8 {
        return Err(Error::WindowTooSmall(shells.len()));
    }
    let log_u: Vec<f64> = shells.iter().map(|&b| (sums[b] / counts[b] as f64).ln()).collect();
    let log_r: Vec<f64> = shells.iter().map(|&b| (lo + (b as f64 + 0.5) * h).ln()).collect();
    let (slope, r2_plain) = linear_fit(&log_r, &log_u);
    match model {
        DecayModel::Plain => Ok(DecayFit {
            exponent: slope,
            r2: r2_plain,
            plain_slope: slope,
            shells: shells.len(),
        }),
        DecayModel::Periodized => {
            let period = 2.0 * r;
            let images = lattice(d);
            let sse = |p: f64| -> f64 {
                let log_g: Vec<f64> = shells
                    .iter()
                    .map(|&b| {
                        let s: f64 = members[b]
                            .iter()
                            .map(|z| periodic_power_sum(z, p, period, &images))
                            .sum();
                        (s / members[b].len() as f64).ln()
                    })
                    .collect();
                let offset = log_u.iter().zip(&log_g).map(|(a, b)| a - b).sum::<f64>() / log_u.len() as f64;
                log_u
                    .iter()
                    .zip(&log_g)
                    .map(|(a, b)| (a - b - offset).powi(2))
                    .sum()
            };
            let p = golden_min(sse, d as f64 + 0.02, d as f64 + 6.0, 1e-7);
            let mean = log_u.iter().sum::<f64>() / log_u.len() as f64;
            let sst: f64 = log_u.iter().map(|v| (v - mean).powi(2)).sum();
            let r2 = if sst > 0.0 { 1.0 - sse(p) / sst } else { 0.0 };
            Ok(DecayFit {
                exponent: -p,
                r2,
                plain_slope: slope,
                shells: shells.len(),
            })
        }
    }
}

/// Image offsets `m` with `|m|_∞ ≤ M`, where `M` shrinks with dimension.
fn lattice(d: usize) -> (Vec<Vec<f64>>, f64) {
    let m: i64 = match d {
        1 => 64,
        2 => 6,
        _ => 2,
    };
    let side = (2 * m + 1) as usize;
    let total = side.pow(d as u32);
    let pts = (0..total)
        .map(|mut flat| {
            (0..d)
                .map(|_| {
                    let k = (flat % side) as i64 - m;
                    flat /= side;
                    k as f64
                })
                .collect()
        })
        .collect();
    (pts, m as f64 + 0.5)
}

/// `Σ_m |z + period·m|^{-p}`, truncated to the cube plus an integral estimate
/// of the remaining far images.
fn periodic_power_sum(z: &[f64], p: f64, period: f64, images: &(Vec<Vec<f64>>, f64)) -> f64 {
    let (pts, reach) = images;
    let d = z.len() as f64;
    let near: f64 = pts
        .iter()
        .map(|m| {
            let r2: f64 = z.iter().zip(m).map(|(a, k)| (a + period * k).powi(2)).sum();
            r2.powf(-p / 2.0)
        })
        .sum();
    // Surface measure of the unit sphere in d dimensions.
    let sphere = match z.len() {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    };
    near + sphere * period.powf(-p) * reach.powf(d - p) / (p - d)
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    (slope, r2)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Default level-set width `√ε · c_{V0}`.
pub fn omega(eps: f64, c_v0: f64) -> f64 {
    eps.sqrt() * c_v0
}

/// Nehari tolerance used for level-set membership.
pub const NEHARI_TOL: f64 = 1e-6;

/// Whether `result` lies (numerically) on the Nehari manifold with energy at
/// most `c_v0 + ω`.
pub fn sigma_membership(result: &SolveResult, c_v0: f64, omega: f64) -> bool {
    let r = &result.report;
    r.nehari_residual.abs() <= NEHARI_TOL * r.norm_sq && r.total <= c_v0 + omega
}

/// Fraction of L² mass in the outer shell `|x|_∞ ≥ 0.9R`.
pub fn boundary_mass(u: &Field) -> f64 {
    let grid = u.grid();
    let edge = 0.9 * grid.half_width();
    let (mut outer, mut total) = (0.0, 0.0);
    grid.for_each_point(|flat, x| {
        let v = u.values()[flat].powi(2);
        total += v;
        if x.iter().any(|c| c.abs() >= edge) {
            outer += v;
        }
    });
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

/// Trusted records keep the outer-shell mass fraction below this.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-4;

/// What [`select_ground_state`] needs to know about one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub index: usize,
    pub label: BranchLabel,
    pub converged: bool,
    pub energy: f64,
    pub barycenter: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub energy: f64,
    /// Distance from the barycenter to the selected box center, in the
    /// rescaled variables.
    pub gate_distance: f64,
    pub gate_radius: f64,
    pub gate_pass: bool,
}

/// Lowest-energy converged interior branch; ties within 1e-10 (relative) go
/// to the smallest branch index, so the result ignores input order.
pub fn select_ground_state(
    records: &[BranchSummary],
    centers: &[Vec<f64>],
    half_side: f64,
    eps: f64,
) -> Result<Selection> {
    let mut best: Option<&BranchSummary> = None;
    for r in records {
        if !r.converged || !matches!(r.label, BranchLabel::Interior(j) if j == r.index) {
            continue;
        }
        best = match best {
            None => Some(r),
            Some(b) => {
                let tie = (r.energy - b.energy).abs() <= 1e-10 * b.energy.abs().max(1.0);
                if (tie && r.index < b.index) || (!tie && r.energy < b.energy) {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    let b = best.ok_or(Error::NoInteriorSolutions)?;
    let center = centers
        .get(b.index)
        .ok_or_else(|| Error::InvalidInput(format!("no box center for branch {}", b.index)))?;
    let gate_distance = b
        .barycenter
        .iter()
        .zip(center)
        .map(|(h, a)| (h - a / eps).powi(2))
        .sum::<f64>()
        .sqrt();
    let gate_radius = half_side / (2.0 * eps);
    Ok(Selection {
        index: b.index,
        energy: b.energy,
        gate_distance,
        gate_radius,
        gate_pass: gate_distance < gate_radius,
    })
}

/// Per-ε quantities feeding [`concentration_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationInput {
    pub eps: f64,
    pub c_eps: f64,
    /// `V(η_ε)` at the maximum of the selected branch.
    pub v_at_max: f64,
    pub profile_error: Option<f64>,
    pub decay_exponent: Option<f64>,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub eps: f64,
    pub energy_gap: f64,
    pub potential_gap: f64,
    pub profile_error: Option<f64>,
    pub decay_exponent: Option<f64>,
    pub trusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFlags {
    pub energy_gap_decreasing: bool,
    pub potential_gap_decreasing: bool,
    pub profile_error_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub c_v0: f64,
    pub v0: f64,
    pub rows: Vec<ConcentrationRow>,
    /// Strict decrease along decreasing ε; absent for fewer than two rows.
    pub trends: Option<TrendFlags>,
}

pub fn concentration_report(sweep: &[ConcentrationInput], c_v0: f64, v0: f64) -> ConcentrationReport {
    let mut ordered: Vec<&ConcentrationInput> = sweep.iter().collect();
    ordered.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let rows: Vec<ConcentrationRow> = ordered
        .iter()
        .map(|s| ConcentrationRow {
            eps: s.eps,
            energy_gap: s.c_eps - c_v0,
            potential_gap: s.v_at_max - v0,
            profile_error: s.profile_error,
            decay_exponent: s.decay_exponent,
            trusted: s.boundary_mass < BOUNDARY_MASS_LIMIT,
        })
        .collect();
    let decreasing = |vals: Vec<Option<f64>>| {
        vals.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a))
    };
    let trends = (rows.len() >= 2).then(|| TrendFlags {
        energy_gap_decreasing: decreasing(rows.iter().map(|r| Some(r.energy_gap)).collect()),
        potential_gap_decreasing: decreasing(rows.iter().map(|r| Some(r.potential_gap)).collect()),
        profile_error_decreasing: decreasing(rows.iter().map(|r| r.profile_error).collect()),
    });
    ConcentrationReport {
        c_v0,
        v0,
        rows,
        trends,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(grid: &Grid, center: &[f64]) -> Field {
        Field::from_fn(grid, |x| {
            let r2: f64 = grid
                .periodic_displacement(x, center)
                .iter()
                .map(|v| v * v)
                .sum();
            (-r2 / 4.0).exp()
        })
    }

    #[test]
    fn locate_max_examples() {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        let u = bump(&grid, &[1.3]);
        let m = locate_max(&u).unwrap();
        assert!((m[0] - 1.3).abs() <= grid.spacing() / 2.0);
        assert_eq!(locate_max(&Field::constant(&grid, 2.0)).unwrap(), vec![-10.0]);
        let two = bump(&grid, &[-2.5]).axpy(1.0, &bump(&grid, &[2.5])).unwrap();
        assert_eq!(locate_max(&two).unwrap(), vec![-2.5]);
        assert_eq!(locate_max(&Field::zeros(&grid)).unwrap_err(), Error::ZeroField);
    }

    #[test]
    fn refine_max_finds_subgrid_center() {
        let grid = Grid::new(2, 8.0, 64).unwrap();
        let u = bump(&grid, &[0.37, -1.11]);
        let m = refine_max(&u).unwrap();
        assert!((m[0] - 0.37).abs() < 1e-8 && (m[1] + 1.11).abs() < 1e-8, "{m:?}");
    }

    #[test]
    fn profile_error_examples() {
        let grid = Grid::new(1, 16.0, 128).unwrap();
        let w = bump(&grid, &[0.0]);
        let shifted = bump(&grid, &[3.0 * grid.spacing()]);
        let e = profile_error(&shifted, &w, &refine_max(&shifted).unwrap(), 0.5).unwrap();
        assert!(e <= 1e-10, "{e}");
        let scaled = w.scaled(1.1);
        let e = profile_error(&scaled, &w, &[0.0], 0.5).unwrap();
        let expect = 0.1 * h_alpha_norm_sq(&w, 0.5).unwrap().sqrt();
        assert!((e - expect).abs() <= 1e-10 * expect);
        let coarse = Grid::new(1, 16.0, 64).unwrap();
        assert_eq!(
            profile_error(&bump(&coarse, &[0.0]), &w, &[0.0], 0.5).unwrap_err(),
            Error::GridMismatch
        );
    }

    #[test]
    fn decay_fit_recovers_power_law() {
        let grid = Grid::new(1, 200.0, 4096).unwrap();
        let u = Field::from_fn(&grid, |x| 1.0 / (1.0 + x[0].abs().powi(2)));
        let fit = decay_fit(&u, &[0.0], [40.0, 100.0], DecayModel::Plain).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.04, "{fit:?}");
        assert!(fit.r2 > 0.999);
    }

    #[test]
    fn decay_fit_recovers_periodized_power_law() {
        let grid = Grid::new(1, 50.0, 400).unwrap();
        let period = 100.0;
        let u = Field::from_fn(&grid, |x| {
            (-200..=200)
                .map(|m| (x[0] + period * m as f64).abs().max(1e-3).powf(-1.6))
                .sum()
        });
        let fit = decay_fit(&u, &[0.0], [10.0, 25.0], DecayModel::Periodized).unwrap();
        assert!((fit.exponent + 1.6).abs() < 0.01, "{fit:?}");
        assert!(fit.plain_slope > -1.6);
    }

    #[test]
    fn decay_fit_errors_and_gaussian_mismatch() {
        let grid = Grid::new(1, 40.0, 320).unwrap();
        let g = Field::from_fn(&grid, |x| (-x[0] * x[0] / 50.0).exp());
        let narrow = decay_fit(&g, &[0.0], [8.0, 12.0], DecayModel::Plain).unwrap();
        let wide = decay_fit(&g, &[0.0], [8.0, 20.0], DecayModel::Plain).unwrap();
        assert!(wide.exponent < narrow.exponent);
        assert_eq!(
            decay_fit(&g, &[0.0], [8.0, 8.5], DecayModel::Plain).unwrap_err(),
            Error::WindowTooSmall(2)
        );
        let signed = g.map(|v| v - 0.5);
        assert_eq!(
            decay_fit(&signed, &[0.0], [8.0, 20.0], DecayModel::Plain).unwrap_err(),
            Error::NonpositiveTail
        );
        assert!(decay_fit(&g, &[0.0], [1.0, 20.0], DecayModel::Plain).is_err());
    }

    #[test]
    fn boundary_mass_of_centered_bump_is_tiny() {
        let grid = Grid::new(2, 10.0, 32).unwrap();
        assert!(boundary_mass(&bump(&grid, &[0.0, 0.0])) < 1e-8);
        let c = Field::constant(&grid, 1.0);
        let expect = 1.0 - (29.0f64 / 32.0).powi(2);
        assert!((boundary_mass(&c) - expect).abs() < 1e-12);
    }

    fn summary(index: usize, energy: f64, label: BranchLabel) -> BranchSummary {
        BranchSummary {
            index,
            label,
            converged: true,
            energy,
            barycenter: vec![if index == 0 { -8.0 } else { 8.0 }],
        }
    }

    #[test]
    fn selection_rules() {
        let centers = vec![vec![-2.0], vec![2.0]];
        let recs = vec![
            summary(1, 3.0, BranchLabel::Interior(1)),
            summary(0, 3.0, BranchLabel::Interior(0)),
        ];
        let s = select_ground_state(&recs, &centers, 1.0, 0.25).unwrap();
        assert_eq!(s.index, 0);
        assert!(s.gate_pass);
        let recs = vec![
            summary(0, 3.0, BranchLabel::Interior(0)),
            summary(1, 2.5, BranchLabel::Interior(1)),
        ];
        assert_eq!(select_ground_state(&recs, &centers, 1.0, 0.25).unwrap().index, 1);
        let escaped = vec![summary(0, 1.0, BranchLabel::Outside)];
        assert_eq!(
            select_ground_state(&escaped, &centers, 1.0, 0.25).unwrap_err(),
            Error::NoInteriorSolutions
        );
    }

    #[test]
    fn report_trends() {
        let input = |eps: f64, gap: f64| ConcentrationInput {
            eps,
            c_eps: 1.0 + gap,
            v_at_max: 1.0 + gap * gap,
            profile_error: Some(gap),
            decay_exponent: None,
            boundary_mass: if eps < 0.2 { 1e-3 } else { 0.0 },
        };
        let r = concentration_report(&[input(0.125, 0.1), input(0.5, 0.4), input(0.25, 0.2)], 1.0, 1.0);
        let t = r.trends.unwrap();
        assert!(t.energy_gap_decreasing && t.potential_gap_decreasing && t.profile_error_decreasing);
        assert_eq!(r.rows[0].eps, 0.5);
        assert!(!r.rows[2].trusted && r.rows[0].trusted);
        assert!(concentration_report(&[input(0.5, 0.4)], 1.0, 1.0).trends.is_none());
    }
}
