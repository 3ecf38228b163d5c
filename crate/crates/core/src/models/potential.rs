//! Gaussian-well potentials `V(x) = V_bg - Σ_j b_j exp(-|x - a_j|² / w_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Well {
    pub center: Vec<f64>,
    pub depth: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// Level approached far from every well.
    pub background: f64,
    pub wells: Vec<Well>,
    /// Points declared to be strict global minima. When absent, the derived
    /// local minima at the global level are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minima: Option<Vec<Vec<f64>>>,
}

impl PotentialSpec {
    pub fn new(background: f64, wells: Vec<Well>) -> Result<Self> {
        let spec = Self {
            background,
            wells,
            minima: None,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn single_well(dim: usize, background: f64, depth: f64, width: f64) -> Result<Self> {
        Self::new(
            background,
            vec![Well {
                center: vec![0.0; dim],
                depth,
                width,
            }],
        )
    }

    pub fn with_minima(mut self, minima: Vec<Vec<f64>>) -> Result<Self> {
        self.minima = Some(minima);
        self.check()?;
        Ok(self)
    }

    /// Structural checks: positive depths and widths, consistent dimensions.
    pub fn check(&self) -> Result<()> {
        if !self.background.is_finite() {
            return Err(Error::InvalidInput("background must be finite".into()));
        }
        let dim = self.dim();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("potential dimension {dim}")));
        }
        for (j, w) in self.wells.iter().enumerate() {
            if w.center.len() != dim || w.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("well {j} has a bad center")));
            }
            if !(w.depth > 0.0 && w.depth.is_finite()) || !(w.width > 0.0 && w.width.is_finite())
            {
                return Err(Error::InvalidInput(format!(
                    "well {j} needs positive finite depth and width"
                )));
            }
        }
        if let Some(m) = &self.minima {
            if m.iter().any(|p| p.len() != dim || p.iter().any(|c| !c.is_finite())) {
                return Err(Error::InvalidInput("declared minimum has wrong dimension".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.wells.first().map_or(1, |w| w.center.len())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.background
            - self
                .wells
                .iter()
                .map(|w| w.depth * (-dist_sq(x, &w.center) / w.width).exp())
                .sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for w in &self.wells {
            let e = w.depth * (-dist_sq(x, &w.center) / w.width).exp();
            for (gi, (xi, ci)) in g.iter_mut().zip(x.iter().zip(&w.center)) {
                *gi += e * 2.0 * (xi - ci) / w.width;
            }
        }
        g
    }

    /// Row-major Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        for w in &self.wells {
            let e = w.depth * (-dist_sq(x, &w.center) / w.width).exp();
            for a in 0..d {
                for b in 0..d {
                    let da = x[a] - w.center[a];
                    let db = x[b] - w.center[b];
                    let delta = if a == b { 2.0 / w.width } else { 0.0 };
                    h[a * d + b] += e * (delta - 4.0 * da * db / (w.width * w.width));
                }
            }
        }
        h
    }

    /// `|V|_∞` over the whole space; wells only lower `V`, so this is the
    /// larger of the background and the depth of the lowest point.
    pub fn sup_abs(&self) -> f64 {
        self.background.abs().max(self.v0().abs())
    }

    /// Newton iteration (with gradient fallback) for a local minimum near `start`.
    pub fn refine_minimum(&self, start: &[f64]) -> Vec<f64> {
        let d = start.len();
        let mut x = start.to_vec();
        for _ in 0..200 {
            let g = self.gradient(&x);
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break;
            }
            let h = self.hessian(&x);
            let step = solve_spd(&h, &g, d).unwrap_or_else(|| {
                let scale = self
                    .wells
                    .iter()
                    .map(|w| w.width / (2.0 * w.depth))
                    .fold(f64::INFINITY, f64::min);
                g.iter().map(|v| v * scale).collect()
            });
            let v_now = self.eval(&x);
            let mut tau = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - tau * s).collect();
                if self.eval(&trial) <= v_now || tau < 1e-12 {
                    x = trial;
                    break;
                }
                tau *= 0.5;
            }
            let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt() * tau;
            if step_norm < 1e-15 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()) {
                break;
            }
        }
        x
    }

    /// Distinct local minima reached from each well center.
    pub fn local_minima(&self) -> Vec<Vec<f64>> {
        let mut found: Vec<Vec<f64>> = Vec::new();
        for w in &self.wells {
            let m = self.refine_minimum(&w.center);
            if !found.iter().any(|f| dist_sq(f, &m).sqrt() < 1e-6) {
                found.push(m);
            }
        }
        found
    }

    /// Global minimum value over the derived local minima.
    pub fn v0(&self) -> f64 {
        self.local_minima()
            .iter()
            .map(|m| self.eval(m))
            .fold(self.background, f64::min)
    }

    fn level_tolerance(&self, v0: f64) -> f64 {
        1e-8 * (self.background - v0).abs().max(1e-12) + 1e-12
    }

    /// Declared minima, or the derived local minima attaining `V0`.
    pub fn global_minima(&self) -> Vec<Vec<f64>> {
        if let Some(m) = &self.minima {
            return m.clone();
        }
        let v0 = self.v0();
        let tol = self.level_tolerance(v0);
        self.local_minima()
            .into_iter()
            .filter(|m| self.eval(m) - v0 <= tol)
            .collect()
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cholesky solve for `d ≤ 3`; `None` if the matrix is not positive definite.
fn solve_spd(h: &[f64], g: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = h[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = g[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    Some(x)
}

/// Samples `V(ε x_i)` on the (rescaled) grid.
pub fn sample_potential(spec: &PotentialSpec, grid: &Grid, eps: f64) -> Result<Field> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon = {eps} must be positive")));
    }
    if spec.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    let mut scaled = vec![0.0; grid.dim()];
    let field = Field::from_fn(grid, |x| {
        for (s, xi) in scaled.iter_mut().zip(x) {
            *s = eps * xi;
        }
        spec.eval(&scaled)
    });
    let min = field.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonpositivePotential(min));
    }
    field.check_finite()?;
    Ok(field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumCheck {
    pub declared: Vec<f64>,
    pub value: f64,
    pub attains_v0: bool,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    /// Global minimum value (Newton-refined; never above `v0_grid`).
    pub v0: f64,
    pub v0_grid: f64,
    /// Minimum over the shell `|x|_∞ ≥ 0.9 R`.
    pub v_inf_proxy: f64,
    pub margin: f64,
    pub minima: Vec<MinimumCheck>,
    pub v1_pass: bool,
    pub v2_pass: bool,
    pub v3_pass: bool,
    pub messages: Vec<String>,
}

impl PotentialReport {
    pub fn all_pass(&self) -> bool {
        self.v1_pass && self.v2_pass && self.v3_pass
    }
}

/// Checks the positivity/gap condition on `V_0`, `V_∞` and the strict
/// global-minimum property of the declared points, on a grid in original
/// variables.
pub fn validate_potential(spec: &PotentialSpec, grid: &Grid) -> PotentialReport {
    let mut messages = Vec::new();
    let sampled = Field::from_fn(grid, |x| spec.eval(x));
    let v0_grid = sampled.values().iter().copied().fold(f64::INFINITY, f64::min);
    let v0 = spec.v0().min(v0_grid);
    let r = grid.half_width();
    let mut v_inf_proxy = f64::INFINITY;
    grid.for_each_point(|flat, x| {
        if x.iter().fold(0.0f64, |m, c| m.max(c.abs())) >= 0.9 * r {
            v_inf_proxy = v_inf_proxy.min(sampled.values()[flat]);
        }
    });
    let margin = 0.1 * (spec.background - v0);
    let v1_pass = v0 > 0.0 && v_inf_proxy > v0 + margin;
    if !(v0 > 0.0) {
        messages.push(format!("V1: V0 = {v0} is not positive"));
    }
    if !(v_inf_proxy > v0 + margin) {
        messages.push(format!(
            "V1: boundary minimum {v_inf_proxy} does not exceed V0 + margin = {}",
            v0 + margin
        ));
    }

    let tol = spec.level_tolerance(v0);
    let radius = spec
        .wells
        .iter()
        .map(|w| w.width.sqrt())
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    let declared = spec.global_minima();
    let minima: Vec<MinimumCheck> = declared
        .iter()
        .map(|a| {
            let value = spec.eval(a);
            let attains_v0 = value - v0 <= tol;
            let strict = is_strict_minimum(spec, a, radius);
            MinimumCheck {
                declared: a.clone(),
                value,
                attains_v0,
                strict,
            }
        })
        .collect();
    for (j, m) in minima.iter().enumerate() {
        if !m.attains_v0 {
            messages.push(format!(
                "V2: declared minimum {j} has V = {} above V0 = {v0}",
                m.value
            ));
        }
        if !m.strict {
            messages.push(format!("V2: declared minimum {j} is not strict"));
        }
    }
    let v2_pass = !minima.is_empty() && minima.iter().all(|m| m.attains_v0 && m.strict);
    if minima.is_empty() {
        messages.push("V2: no global minima".into());
    }

    let v3_pass = spec
        .local_minima()
        .iter()
        .filter(|m| spec.eval(m) - v0 <= tol)
        .all(|m| declared.iter().any(|a| dist_sq(a, m).sqrt() < 1e-5));
    if !v3_pass {
        messages.push("V3: some global minimum points are not declared".into());
    }

    PotentialReport {
        v0,
        v0_grid,
        v_inf_proxy,
        margin,
        minima,
        v1_pass,
        v2_pass,
        v3_pass,
        messages,
    }
}

/// Sampled strictness: `V > V(a)` on spheres of radius up to `radius` along
/// axis and diagonal directions, and a positive definite Hessian.
fn is_strict_minimum(spec: &PotentialSpec, a: &[f64], radius: f64) -> bool {
    let d = a.len();
    let va = spec.eval(a);
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for sign in [-1.0, 1.0] {
            let mut e = vec![0.0; d];
            e[i] = sign;
            directions.push(e);
        }
    }
    for mask in 0..(1usize << d) {
        let e: Vec<f64> = (0..d)
            .map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
            .collect();
        directions.push(e);
    }
    let radii_ok = (1..=20).all(|k| {
        let r = radius * k as f64 / 20.0;
        directions.iter().all(|e| {
            let x: Vec<f64> = a.iter().zip(e).map(|(ai, ei)| ai + r * ei).collect();
            spec.eval(&x) > va
        })
    });
    radii_ok && solve_spd(&spec.hessian(a), &vec![0.0; d], d).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_well(d1: f64, d2: f64) -> PotentialSpec {
        PotentialSpec::new(
            2.0,
            vec![
                Well {
                    center: vec![-2.0],
                    depth: d1,
                    width: 1.0,
                },
                Well {
                    center: vec![2.0],
                    depth: d2,
                    width: 1.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn sample_at_origin() {
        let spec = PotentialSpec::single_well(1, 2.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(1, 8.0, 64).unwrap();
        for eps in [1.0, 0.5] {
            let v = sample_potential(&spec, &grid, eps).unwrap();
            let origin = grid.ravel(&[32]);
            assert!((v.values()[origin] - 1.0).abs() < 1e-15);
            let i = 40;
            let x = grid.axis_coordinate(i);
            assert!((v.values()[i] - spec.eval(&[eps * x])).abs() < 1e-15);
        }
    }

    #[test]
    fn nonpositive_potential_rejected() {
        let spec = PotentialSpec::single_well(1, 0.5, 1.0, 1.0).unwrap();
        let grid = Grid::new(1, 8.0, 64).unwrap();
        assert!(matches!(
            sample_potential(&spec, &grid, 1.0),
            Err(Error::NonpositivePotential(v)) if (v + 0.5).abs() < 1e-12
        ));
    }

    #[test]
    fn symmetric_double_well_passes() {
        let spec = double_well(1.0, 1.0);
        let grid = Grid::new(1, 8.0, 256).unwrap();
        let report = validate_potential(&spec, &grid);
        assert!(report.all_pass(), "{:?}", report.messages);
        assert_eq!(report.minima.len(), 2);
        // Oracle: brute-force grid minimization lands next to both centers.
        let sampled = Field::from_fn(&grid, |x| spec.eval(x));
        let vals = sampled.values();
        let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let argmins: Vec<f64> = (0..grid.len())
            .filter(|&i| vals[i] - best < 1e-12)
            .map(|i| grid.axis_coordinate(i))
            .collect();
        assert_eq!(argmins.len(), 2);
        for m in &report.minima {
            assert!(argmins.iter().any(|x| (x - m.declared[0]).abs() < grid.spacing()));
            assert!((m.value - report.v0).abs() < 1e-12);
        }
        assert!(report.v0 <= report.v0_grid);
    }

    #[test]
    fn single_well_passes() {
        let spec = PotentialSpec::single_well(2, 2.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(2, 6.0, 64).unwrap();
        let report = validate_potential(&spec, &grid);
        assert!(report.all_pass(), "{:?}", report.messages);
        assert_eq!(report.minima.len(), 1);
        assert!((report.v0 - 1.0).abs() < 1e-14);
        assert!((report.v_inf_proxy - 2.0).abs() < 1e-6);
    }

    #[test]
    fn unequal_depths_both_declared_fail_v2() {
        let spec = double_well(1.0, 0.8)
            .with_minima(vec![vec![-2.0], vec![2.0]])
            .unwrap();
        let grid = Grid::new(1, 8.0, 256).unwrap();
        let report = validate_potential(&spec, &grid);
        assert!(!report.v2_pass);
        assert!(report.minima[0].attains_v0 || report.minima[1].attains_v0);
        let shallow = &report.minima[1];
        assert!(!shallow.attains_v0);
    }

    #[test]
    fn undeclared_global_minimum_fails_v3() {
        let spec = double_well(1.0, 1.0).with_minima(vec![vec![-2.0]]);
        let spec = spec.unwrap();
        let grid = Grid::new(1, 8.0, 256).unwrap();
        let report = validate_potential(&spec, &grid);
        assert!(!report.v3_pass);
    }

    #[test]
    fn flat_background_fails_v1() {
        let spec = PotentialSpec::single_well(1, 2.0, 1.0, 2000.0).unwrap();
        let grid = Grid::new(1, 8.0, 128).unwrap();
        assert!(!validate_potential(&spec, &grid).v1_pass);
    }

    #[test]
    fn composite_well_minimum_is_refined() {
        let spec = PotentialSpec::new(
            2.0,
            vec![
                Well {
                    center: vec![0.0],
                    depth: 1.0,
                    width: 1.0,
                },
                Well {
                    center: vec![1.0],
                    depth: 0.25,
                    width: 1.0,
                },
            ],
        )
        .unwrap();
        let minima = spec.local_minima();
        assert_eq!(minima.len(), 1);
        let m = &minima[0];
        assert!(spec.gradient(m)[0].abs() < 1e-13);
        assert!(m[0] > 0.0);
        // The refined value beats a fine sampling of the neighborhood.
        let best = (0..20001)
            .map(|i| spec.eval(&[-1.0 + 2.0 * i as f64 / 20000.0]))
            .fold(f64::INFINITY, f64::min);
        assert!(spec.eval(m) <= best + 1e-15);
    }
}
