//! Seeds, barycenters and hypercube branch sets around the potential minima.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::refine_max;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::models::PotentialSpec;
use crate::solver::{negative_mass, solve_constrained, SolveOptions, SolveResult};
use crate::spectral::{helmholtz_inverse, inner_l2, translate};
use crate::variational::{energy, gradient, project_to_nehari, theta_defect, Problem};

/// Hypercubes `C_l(a^j)` of half-side `l` around the minima `a^j`, all inside
/// `(-L, L)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFamily {
    pub centers: Vec<Vec<f64>>,
    pub half_side: f64,
    pub bound: f64,
    /// Classification margin (original variables).
    pub margin: f64,
}

impl BoxFamily {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Points sampled on the surface of the cube of half-side `l` about `c`.
fn cube_surface(c: &[f64], l: f64) -> Vec<Vec<f64>> {
    let d = c.len();
    let m = match d {
        1 => 1,
        2 => 64,
        _ => 24,
    };
    let ticks: Vec<f64> = (0..=m).map(|i| -l + 2.0 * l * i as f64 / m as f64).collect();
    let mut out = Vec::new();
    for axis in 0..d {
        for side in [-l, l] {
            let free = d - 1;
            let count = ticks.len().pow(free as u32);
            for mut flat in 0..count {
                let mut p = c.to_vec();
                for (k, pk) in p.iter_mut().enumerate() {
                    if k == axis {
                        *pk += side;
                    } else {
                        *pk += ticks[flat % ticks.len()];
                        flat /= ticks.len();
                    }
                }
                out.push(p);
            }
        }
    }
    out
}

/// Boxes around the declared minima (or every derived local minimum), checked
/// for disjointness, containment and a potential barrier on each boundary.
pub fn build_boxes(spec: &PotentialSpec, half_side: f64, bound: f64, margin: f64) -> Result<BoxFamily> {
    if !(half_side > 0.0 && bound > 0.0) {
        return Err(Error::InvalidInput("box sizes must be positive".into()));
    }
    if !(margin >= 0.0 && margin < half_side) {
        return Err(Error::InvalidInput("box margin must lie in [0, l)".into()));
    }
    if 2.0 * half_side > bound {
        return Err(Error::InvalidInput(format!(
            "2l = {} exceeds L = {bound}",
            2.0 * half_side
        )));
    }
    let centers = spec.minima.clone().unwrap_or_else(|| spec.local_minima());
    if centers.is_empty() {
        return Err(Error::InvalidInput("potential has no minima".into()));
    }
    for (i, a) in centers.iter().enumerate() {
        if a.iter().any(|c| c.abs() + half_side >= bound) {
            return Err(Error::InvalidInput(format!(
                "box {i} is not contained in (-L, L)^d"
            )));
        }
        for (j, b) in centers.iter().enumerate().skip(i + 1) {
            if sup_dist(a, b) <= 2.0 * half_side {
                return Err(Error::OverlappingBoxes(format!(
                    "boxes {i} and {j} intersect (center distance {:.4} <= 2l)",
                    sup_dist(a, b)
                )));
            }
        }
    }
    for (index, a) in centers.iter().enumerate() {
        let floor = spec.eval(a);
        let threshold = floor + 0.01 * (spec.background - floor).abs().max(1e-12);
        let boundary_min = cube_surface(a, half_side)
            .iter()
            .map(|p| spec.eval(p))
            .fold(f64::INFINITY, f64::min);
        if boundary_min <= threshold {
            return Err(Error::BoundaryNotSeparating {
                index,
                boundary_min,
                threshold,
            });
        }
    }
    Ok(BoxFamily {
        centers,
        half_side,
        bound,
        margin,
    })
}

/// C¹ cutoff: 1 on `[0, ½]`, 0 on `[1, ∞)`, cubic smoothstep between.
pub fn cutoff(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let t = 2.0 * r - 1.0;
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// `ψ(x) = η(ε|x − y/ε|) w(m + x − y/ε)` with `m` the maximum of `w`.
///
/// `w_limit` must share dimension and spacing with `grid`; values are read
/// off after one spectral shift for the sub-cell offset, and vanish where the
/// displacement leaves the box of `w_limit`.
pub fn seed_field(w_limit: &Field, y: &[f64], eps: f64, grid: &Grid) -> Result<Field> {
    let gw = w_limit.grid();
    let d = grid.dim();
    if gw.dim() != d || y.len() != d {
        return Err(Error::GridMismatch);
    }
    let h = grid.spacing();
    if ((gw.spacing() - h) / h).abs() > 1e-12 {
        return Err(Error::GridMismatch);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let m = refine_max(w_limit)?;
    let center: Vec<f64> = y.iter().map(|v| v / eps).collect();
    // m + x − c = h(j − φ) on the grid; φ ∈ [0, 1) per axis.
    let phi: Vec<f64> = center
        .iter()
        .zip(&m)
        .map(|(c, mi)| {
            let q = (mi - c) / h;
            q.ceil() - q
        })
        .collect();
    let shift: Vec<f64> = phi.iter().map(|p| p * h).collect();
    let ws = translate(w_limit, &shift)?;
    let nw = gw.points_per_axis() as i64;
    let half = nw / 2;
    let mut idx = vec![0usize; d];
    let values = (0..grid.len())
        .map(|flat| {
            let x = grid.point(flat);
            let z = grid.periodic_displacement(&x, &center);
            let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let eta = cutoff(eps * r);
            if eta == 0.0 {
                return 0.0;
            }
            for a in 0..d {
                let j = ((m[a] + z[a]) / h + phi[a]).round() as i64;
                if j < -half || j >= half {
                    return 0.0;
                }
                idx[a] = (j + half) as usize;
            }
            eta * ws.values()[gw.ravel(&idx)]
        })
        .collect();
    Field::new(grid, values)
}

/// [`seed_field`] on the problem's grid, rejected unless it lies in `Θ_ε`.
pub fn admissible_seed(p: &Problem, w_limit: &Field, y: &[f64]) -> Result<Field> {
    let seed = seed_field(w_limit, y, p.eps(), p.grid())?;
    let q = theta_defect(p, &seed)?;
    if q < 0.0 {
        Ok(seed)
    } else {
        Err(Error::SeedLeftTheta(q))
    }
}

/// `Ψ_ε`: clamp to `[−2L/ε, 2L/ε]`.
pub fn truncated_coordinate(t: f64, eps: f64, bound: f64) -> f64 {
    let c = 2.0 * bound / eps;
    t.clamp(-c, c)
}

/// Componentwise `∫ Ψ_ε(x_i)|u|^p / ∫ |u|^p`.
pub fn barycenter_h(u: &Field, p: f64, eps: f64, bound: f64) -> Result<Vec<f64>> {
    let grid = u.grid();
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("barycenter exponent {p} must be >= 2")));
    }
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let d = grid.dim();
    let mut num = vec![0.0; d];
    let mut den = 0.0;
    grid.for_each_point(|flat, x| {
        let w = u.values()[flat].abs().powf(p);
        den += w;
        for (n, xi) in num.iter_mut().zip(x) {
            *n += truncated_coordinate(*xi, eps, bound) * w;
        }
    });
    Ok(num.into_iter().map(|n| n / den).collect())
}

/// `∫ χ(εx) u² / ∫ u²` with `χ` the radial clamp to the ball of radius `ρ`.
pub fn beta_map(u: &Field, rho: f64, eps: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidInput("rho must be positive".into()));
    }
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let grid = u.grid();
    let mut num = vec![0.0; grid.dim()];
    let mut den = 0.0;
    grid.for_each_point(|flat, x| {
        let w = u.values()[flat].powi(2);
        den += w;
        let y: Vec<f64> = x.iter().map(|v| eps * v).collect();
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if r <= rho { 1.0 } else { rho / r };
        for (n, yi) in num.iter_mut().zip(&y) {
            *n += scale * yi * w;
        }
    });
    Ok(num.into_iter().map(|n| n / den).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "box", rename_all = "snake_case")]
pub enum BranchLabel {
    Interior(usize),
    Boundary(usize),
    Outside,
}

impl BranchLabel {
    pub fn is_interior(&self) -> bool {
        matches!(self, BranchLabel::Interior(_))
    }

    pub fn tag(&self) -> String {
        match self {
            BranchLabel::Interior(j) => format!("interior:{j}"),
            BranchLabel::Boundary(j) => format!("boundary:{j}"),
            BranchLabel::Outside => "outside".into(),
        }
    }
}

/// Relative negative-mass tolerance for counting a field as nonnegative.
pub const NEGATIVE_MASS_TOL: f64 = 1e-6;

/// Label `u` by where its barycenter falls relative to the scaled boxes
/// `C^j_{l/ε}`, with a band of half-width `tol/ε` around each boundary.
pub fn classify(u: &Field, boxes: &BoxFamily, eps: f64, tol: f64) -> BranchLabel {
    let mass: f64 = u.values().iter().map(|v| v * v).sum::<f64>() * u.grid().cell_volume();
    if !(mass > 0.0) || negative_mass(u) > NEGATIVE_MASS_TOL * mass {
        return BranchLabel::Outside;
    }
    let Ok(h) = barycenter_h(u, 2.0, eps, boxes.bound) else {
        return BranchLabel::Outside;
    };
    classify_point(&h, boxes, eps, tol)
}

/// Classification of a barycenter already in hand.
pub fn classify_point(h: &[f64], boxes: &BoxFamily, eps: f64, tol: f64) -> BranchLabel {
    let side = boxes.half_side / eps;
    let band = tol / eps;
    for (j, a) in boxes.centers.iter().enumerate() {
        let scaled: Vec<f64> = a.iter().map(|v| v / eps).collect();
        let dist = sup_dist(h, &scaled);
        if dist < side - band {
            return BranchLabel::Interior(j);
        }
        if dist <= side + band {
            return BranchLabel::Boundary(j);
        }
    }
    BranchLabel::Outside
}

/// Options for the boundary-pinned probes estimating the infimum of the
/// energy over fields whose barycenter sits on a box boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub enabled: bool,
    pub max_iter: usize,
    /// Stop once an accepted step lowers the energy by less than this
    /// (relative).
    pub stall_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            enabled: true,
            max_iter: 400,
            stall_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub axis: usize,
    /// `-1` or `+1`: which face of the box.
    pub side: i8,
    pub energy: f64,
    pub iterations: usize,
}

/// Translate `u` along `axis` until its barycenter component equals `target`.
fn pin(u: &Field, axis: usize, target: f64, eps: f64, bound: f64) -> Result<Field> {
    let mut v = u.clone();
    for _ in 0..3 {
        let h = barycenter_h(&v, 2.0, eps, bound)?;
        let gap = target - h[axis];
        if gap.abs() <= 1e-12 * (1.0 + target.abs()) {
            break;
        }
        let mut shift = vec![0.0; v.grid().dim()];
        shift[axis] = gap;
        v = translate(&v, &shift)?;
    }
    Ok(v)
}

/// Descent on the Nehari manifold restricted to fields whose barycenter has
/// component `axis` pinned to the face `a^j_axis + side·l` (scaled by `1/ε`).
#[allow(clippy::too_many_arguments)]
pub fn boundary_probe(
    p: &Problem,
    boxes: &BoxFamily,
    j: usize,
    axis: usize,
    side: i8,
    w_limit: &Field,
    opts: &SolveOptions,
    probe: &ProbeOptions,
) -> Result<ProbeResult> {
    let eps = p.eps();
    let mut y = boxes.centers[j].clone();
    y[axis] += side as f64 * boxes.half_side;
    let target = y[axis] / eps;
    let seed = admissible_seed(p, w_limit, &y)?;
    let shift = opts.precond_shift.unwrap_or_else(|| {
        let v = p.potential().values();
        v.iter().sum::<f64>() / v.len() as f64
    });
    let constrain = |u: &Field| -> Result<(Field, f64)> {
        let pinned = pin(u, axis, target, eps, boxes.bound)?;
        let proj = project_to_nehari(p, &pinned)?.projected;
        let e = energy(p, &proj)?.total;
        Ok((proj, e))
    };
    let (mut u, mut e) = constrain(&seed)?;
    let mut tau = opts.initial_step;
    let mut iterations = 0;
    while iterations < probe.max_iter {
        let g = gradient(p, &u)?;
        let d = helmholtz_inverse(&g, p.alpha(), shift)?.scaled(-1.0);
        let slope = inner_l2(&g, &d)?;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            if let Ok((trial, et)) = u.axpy(tau, &d).and_then(|t| constrain(&t)) {
                if et <= e + opts.sufficient_decrease * tau * slope {
                    accepted = Some((trial, et));
                    break;
                }
            }
            tau *= opts.shrink;
        }
        let Some((trial, et)) = accepted else { break };
        iterations += 1;
        let drop = e - et;
        u = trial;
        e = et;
        tau = (tau / opts.shrink).min(opts.max_step);
        if drop <= probe.stall_tol * e.abs() {
            break;
        }
    }
    Ok(ProbeResult {
        axis,
        side,
        energy: e,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub index: usize,
    pub result: Option<SolveResult>,
    pub label: BranchLabel,
    pub barycenter: Option<Vec<f64>>,
    /// Minimum energy over the boundary probes of this box.
    pub probe_energy: Option<f64>,
    pub probes: Vec<ProbeResult>,
    pub error: Option<Error>,
}

impl BranchOutcome {
    pub fn energy(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.report.total)
    }

    pub fn is_good_interior(&self) -> bool {
        matches!(self.label, BranchLabel::Interior(j) if j == self.index)
            && self.result.as_ref().is_some_and(|r| r.converged)
    }
}

#[derive(Debug, Clone)]
pub struct BranchReport {
    pub branches: Vec<BranchOutcome>,
    /// Smallest pairwise `‖u_i − u_j‖₂ / mean(‖u_i‖₂, ‖u_j‖₂)`.
    pub min_relative_distance: Option<f64>,
    pub distinct: bool,
}

/// Distinctness threshold on the relative L² distance between branches.
pub const DISTINCT_THRESHOLD: f64 = 0.1;

pub fn solve_branch(
    p: &Problem,
    boxes: &BoxFamily,
    j: usize,
    w_limit: &Field,
    opts: &SolveOptions,
    probe: &ProbeOptions,
) -> BranchOutcome {
    let mut out = BranchOutcome {
        index: j,
        result: None,
        label: BranchLabel::Outside,
        barycenter: None,
        probe_energy: None,
        probes: Vec::new(),
        error: None,
    };
    let solved = admissible_seed(p, w_limit, &boxes.centers[j]).and_then(|s| solve_constrained(p, &s, opts));
    match solved {
        Ok(r) => {
            out.label = classify(&r.u, boxes, p.eps(), boxes.margin);
            out.barycenter = barycenter_h(&r.u, 2.0, p.eps(), boxes.bound).ok();
            if !matches!(out.label, BranchLabel::Interior(i) if i == j) {
                out.error = Some(Error::BranchEscaped(j));
            }
            out.result = Some(r);
        }
        Err(e) => {
            out.error = Some(e);
            return out;
        }
    }
    if probe.enabled {
        for axis in 0..boxes.dim() {
            for side in [-1i8, 1] {
                if let Ok(pr) = boundary_probe(p, boxes, j, axis, side, w_limit, opts, probe) {
                    out.probes.push(pr);
                }
            }
        }
        out.probe_energy = out.probes.iter().map(|p| p.energy).reduce(f64::min);
    }
    out
}

/// One constrained solve per box, seeded at its center, plus boundary probes
/// and a distinctness check across branches.
pub fn solve_branches(
    p: &Problem,
    boxes: &BoxFamily,
    w_limit: &Field,
    opts: &SolveOptions,
    probe: &ProbeOptions,
) -> Result<BranchReport> {
    if boxes.dim() != p.grid().dim() {
        return Err(Error::InvalidInput("box dimension differs from grid".into()));
    }
    let branches: Vec<BranchOutcome> = (0..boxes.len())
        .into_par_iter()
        .map(|j| solve_branch(p, boxes, j, w_limit, opts, probe))
        .collect();
    let fields: Vec<&Field> = branches
        .iter()
        .filter_map(|b| b.result.as_ref().map(|r| &r.u))
        .collect();
    let mut min_rel: Option<f64> = None;
    for i in 0..fields.len() {
        for k in i + 1..fields.len() {
            let diff = fields[i].axpy(-1.0, fields[k])?;
            let norm = |f: &Field| inner_l2(f, f).map(f64::sqrt);
            let rel = norm(&diff)? / (0.5 * (norm(fields[i])? + norm(fields[k])?));
            min_rel = Some(min_rel.map_or(rel, |m: f64| m.min(rel)));
        }
    }
    let mut labels: Vec<usize> = branches
        .iter()
        .filter_map(|b| match b.label {
            BranchLabel::Interior(j) => Some(j),
            _ => None,
        })
        .collect();
    labels.sort_unstable();
    labels.dedup();
    let all_interior = branches.iter().all(BranchOutcome::is_good_interior) && labels.len() == branches.len();
    let distinct = all_interior && min_rel.is_none_or(|m| m > DISTINCT_THRESHOLD);
    Ok(BranchReport {
        branches,
        min_relative_distance: min_rel,
        distinct,
    })
}
