//! Fourier-multiplier operators on periodic grids: the fractional Laplacian
//! with symbol `|ξ|^{2α}`, its shifted inverse used as a preconditioner,
//! rectangle-rule quadrature, and spectral translation/interpolation.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("order alpha = {alpha} not in (0, 1]")))
    }
}

/// Forward transform of a real field.
pub fn spectrum(u: &Field) -> Vec<Complex<f64>> {
    let mut data: Vec<Complex<f64>> = u.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    u.grid().transform(&mut data, false);
    data
}

/// Inverse transform, keeping the real part.
pub fn from_spectrum(grid: &Grid, mut data: Vec<Complex<f64>>) -> Field {
    grid.transform(&mut data, true);
    let scale = 1.0 / grid.len() as f64;
    Field::from_raw(grid, data.into_iter().map(|c| c.re * scale).collect())
}

/// Multiply the spectrum by a real symbol of `|ξ|²`.
pub fn apply_symbol(u: &Field, symbol: impl Fn(f64) -> f64) -> Result<Field> {
    u.check_finite()?;
    let mut data = spectrum(u);
    for (c, &k2) in data.iter_mut().zip(u.grid().xi_sq()) {
        *c *= symbol(k2);
    }
    Ok(from_spectrum(u.grid(), data))
}

fn frac_symbol(k2: f64, alpha: f64) -> f64 {
    if k2 == 0.0 {
        0.0
    } else {
        k2.powf(alpha)
    }
}

/// `(-Δ)^α u` as the Fourier multiplier `|ξ|^{2α}`; the zero mode is mapped to 0.
pub fn apply_frac_laplacian(u: &Field, alpha: f64) -> Result<Field> {
    check_order(alpha)?;
    apply_symbol(u, |k2| frac_symbol(k2, alpha))
}

/// Seminorm `[u]²_α := ⟨u, (-Δ)^α u⟩`.
pub fn gagliardo_sq(u: &Field, alpha: f64) -> Result<f64> {
    let lap = apply_frac_laplacian(u, alpha)?;
    inner_l2(u, &lap)
}

/// Rectangle-rule `∫ u v`.
pub fn inner_l2(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    let sum: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok(sum * u.grid().cell_volume())
}

/// `(Σ h^d |u_i|^p)^{1/p}`.
pub fn norm_lp(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("exponent p = {p} < 1")));
    }
    u.check_finite()?;
    let sum: f64 = u.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * u.grid().cell_volume()).powf(1.0 / p))
}

/// Solve `((-Δ)^α + c) w = v` exactly in Fourier space.
pub fn helmholtz_inverse(v: &Field, alpha: f64, shift: f64) -> Result<Field> {
    check_order(alpha)?;
    if !(shift > 0.0) {
        return Err(Error::NonpositiveShift(shift));
    }
    apply_symbol(v, |k2| 1.0 / (frac_symbol(k2, alpha) + shift))
}

/// Apply `(-Δ)^α + c` (forward operator of [`helmholtz_inverse`]).
pub fn helmholtz_forward(w: &Field, alpha: f64, shift: f64) -> Result<Field> {
    check_order(alpha)?;
    apply_symbol(w, |k2| frac_symbol(k2, alpha) + shift)
}

/// Squared discrete `H^α` norm `[u]²_α + |u|²_2`.
pub fn h_alpha_norm_sq(u: &Field, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let op = apply_symbol(u, |k2| frac_symbol(k2, alpha) + 1.0)?;
    inner_l2(u, &op)
}

/// Periodic translate `x ↦ u(x - shift)` by an arbitrary (not necessarily
/// grid-aligned) vector, exact for band-limited fields.
pub fn translate(u: &Field, shift: &[f64]) -> Result<Field> {
    let grid = u.grid();
    if shift.len() != grid.dim() {
        return Err(Error::InvalidInput("shift dimension mismatch".into()));
    }
    u.check_finite()?;
    let n = grid.points_per_axis();
    let xi = grid.wavenumbers();
    let phases: Vec<Vec<Complex<f64>>> = shift
        .iter()
        .map(|&s| xi.iter().map(|&k| Complex::from_polar(1.0, -k * s)).collect())
        .collect();
    let mut data = spectrum(u);
    for (flat, c) in data.iter_mut().enumerate() {
        let mut rest = flat;
        let mut factor = Complex::new(1.0, 0.0);
        for axis in (0..grid.dim()).rev() {
            factor *= phases[axis][rest % n];
            rest /= n;
        }
        *c *= factor;
    }
    Ok(from_spectrum(grid, data))
}

/// Trigonometric interpolant of a field, evaluable with first and second
/// derivatives at arbitrary points.
pub struct Interpolant {
    grid: Grid,
    coeffs: Vec<Complex<f64>>,
    xi: Vec<f64>,
}

/// Value, gradient and Hessian (row-major `d × d`) of an [`Interpolant`].
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl Interpolant {
    pub fn new(u: &Field) -> Self {
        let grid = u.grid().clone();
        let n = grid.len() as f64;
        let mut coeffs = spectrum(u);
        let half = grid.points_per_axis() / 2;
        // Split the Nyquist coefficient symmetrically so the interpolant is real.
        for (flat, c) in coeffs.iter_mut().enumerate() {
            let nyquist_axes = grid.unravel(flat).iter().filter(|&&i| i == half).count();
            *c /= n * f64::powi(2.0, nyquist_axes as i32);
        }
        let xi = grid.wavenumbers();
        Self { grid, coeffs, xi }
    }

    pub fn eval(&self, x: &[f64]) -> Jet {
        let d = self.grid.dim();
        let n = self.grid.points_per_axis();
        let r = self.grid.half_width();
        let half = n / 2;
        // Per-axis exponentials e^{iξ(x+R)}; the Nyquist column also carries
        // its mirror image at +n/2.
        let basis: Vec<Vec<[Complex<f64>; 3]>> = (0..d)
            .map(|a| {
                (0..n)
                    .map(|j| {
                        let mut ks = vec![self.xi[j]];
                        if j == half {
                            ks.push(-self.xi[j]);
                        }
                        let mut out = [Complex::new(0.0, 0.0); 3];
                        for k in ks {
                            let e = Complex::from_polar(1.0, k * (x[a] + r));
                            out[0] += e;
                            out[1] += e * Complex::new(0.0, k);
                            out[2] += e * (-k * k);
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        let mut value = Complex::new(0.0, 0.0);
        let mut grad = vec![Complex::new(0.0, 0.0); d];
        let mut hess = vec![Complex::new(0.0, 0.0); d * d];
        let mut idx = vec![0usize; d];
        for (flat, &c) in self.coeffs.iter().enumerate() {
            let mut rest = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rest % n;
                rest /= n;
            }
            let mut base = c;
            for a in 0..d {
                base *= basis[a][idx[a]][0];
            }
            value += base;
            for a in 0..d {
                let b0 = basis[a][idx[a]][0];
                let others = if b0.norm() == 0.0 {
                    let mut p = c;
                    for (o, &io) in idx.iter().enumerate() {
                        if o != a {
                            p *= basis[o][io][0];
                        }
                    }
                    p
                } else {
                    base / b0
                };
                grad[a] += others * basis[a][idx[a]][1];
                hess[a * d + a] += others * basis[a][idx[a]][2];
                for b in (a + 1)..d {
                    let mut p = c;
                    for (o, &io) in idx.iter().enumerate() {
                        let which = if o == a || o == b { 1 } else { 0 };
                        p *= basis[o][io][which];
                    }
                    hess[a * d + b] += p;
                    hess[b * d + a] += p;
                }
            }
        }
        Jet {
            value: value.re,
            gradient: grad.iter().map(|g| g.re).collect(),
            hessian: hess.iter().map(|h| h.re).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, PI, n).unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_spacing_and_wavenumbers() {
        let g = Grid::new(1, PI, 64).unwrap();
        assert!((g.spacing() - 2.0 * PI / 64.0).abs() < 1e-15);
        let mut ks = g.wavenumber_indices();
        ks.sort();
        assert_eq!(ks, (-32..32).collect::<Vec<_>>());
        let g3 = Grid::new(3, 10.0, 48).unwrap();
        assert_eq!(g3.len(), 48 * 48 * 48);
        assert!((g3.spacing() - 20.0 / 48.0).abs() < 1e-15);
        assert!(matches!(Grid::new(2, 5.0, 7), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(1, 5.0, 6), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(1, 0.0, 16), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(4, 1.0, 16), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn frac_laplacian_single_modes() {
        let g = grid1(64);
        let one = Field::constant(&g, 1.0);
        assert!(apply_frac_laplacian(&one, 0.3).unwrap().max_abs() < 1e-14);
        let cos1 = Field::from_fn(&g, |x| x[0].cos());
        for alpha in [0.2, 0.5, 0.9, 1.0] {
            let out = apply_frac_laplacian(&cos1, alpha).unwrap();
            let d = max_diff(&out, &cos1);
            assert!(d < 1e-11, "alpha {alpha}: {d}");
        }
        let cos2 = Field::from_fn(&g, |x| (2.0 * x[0]).cos());
        let out = apply_frac_laplacian(&cos2, 0.5).unwrap();
        assert!(max_diff(&out, &cos2.scaled(2.0)) < 1e-13);
    }

    #[test]
    fn nonfinite_rejected() {
        let g = grid1(16);
        let mut u = Field::zeros(&g);
        u.values_mut()[3] = f64::NAN;
        assert_eq!(apply_frac_laplacian(&u, 0.5), Err(Error::NonFinite));
        assert_eq!(helmholtz_inverse(&u, 0.5, 1.0), Err(Error::NonFinite));
        assert!(Field::new(&g, vec![f64::INFINITY; 16]).is_err());
    }

    #[test]
    fn gagliardo_examples() {
        let g = grid1(64);
        assert!(gagliardo_sq(&Field::constant(&g, 3.0), 0.5).unwrap().abs() < 1e-12);
        let c1 = Field::from_fn(&g, |x| x[0].cos());
        assert!((gagliardo_sq(&c1, 0.5).unwrap() - PI).abs() < 1e-12);
        let c12 = Field::from_fn(&g, |x| x[0].cos() + (2.0 * x[0]).cos());
        assert!((gagliardo_sq(&c12, 0.5).unwrap() - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        let g = grid1(64);
        let c = Field::from_fn(&g, |x| x[0].cos());
        let s = Field::from_fn(&g, |x| x[0].sin());
        assert!(inner_l2(&c, &s).unwrap().abs() < 1e-14);
        let one = Field::constant(&g, 1.0);
        assert!((inner_l2(&one, &one).unwrap() - 2.0 * PI).abs() < 1e-13);
        assert!((inner_l2(&c, &c).unwrap() - PI).abs() < 1e-13);
        let other = Grid::new(1, PI, 32).unwrap();
        assert_eq!(
            inner_l2(&c, &Field::zeros(&other)),
            Err(Error::GridMismatch)
        );
        assert!((norm_lp(&one, 2.0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-13);
        assert_eq!(norm_lp(&Field::zeros(&g), 3.0).unwrap(), 0.0);
        let mut bump = Field::zeros(&g);
        bump.values_mut()[10] = 2.0;
        let p = 3.0;
        let expected = (g.spacing() * 2f64.powf(p)).powf(1.0 / p);
        assert!((norm_lp(&bump, p).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn helmholtz_examples() {
        let g = grid1(64);
        let c = 2.5;
        let v = Field::constant(&g, c * 0.7);
        let w = helmholtz_inverse(&v, 0.5, c).unwrap();
        assert!(max_diff(&w, &Field::constant(&g, 0.7)) < 1e-14);
        let v = Field::from_fn(&g, |x| (1.0 + c) * x[0].cos());
        let w = helmholtz_inverse(&v, 0.5, c).unwrap();
        assert!(max_diff(&w, &Field::from_fn(&g, |x| x[0].cos())) < 1e-14);
        assert_eq!(
            helmholtz_inverse(&v, 0.5, 0.0),
            Err(Error::NonpositiveShift(0.0))
        );
    }

    #[test]
    fn translate_by_whole_cells_is_a_roll() {
        let g = Grid::new(1, 8.0, 32).unwrap();
        let u = Field::from_fn(&g, |x| (-x[0] * x[0]).exp());
        let h = g.spacing();
        let moved = translate(&u, &[3.0 * h]).unwrap();
        for i in 0..32 {
            let j = (i + 32 - 3) % 32;
            assert!((moved.values()[i] - u.values()[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolant_matches_band_limited_function() {
        let g = Grid::new(2, PI, 16).unwrap();
        let u = Field::from_fn(&g, |x| (x[0]).sin() * (2.0 * x[1]).cos() + 0.5 * x[1].cos());
        let jet = Interpolant::new(&u).eval(&[0.3, -1.1]);
        let (a, b) = (0.3f64, -1.1f64);
        assert!((jet.value - (a.sin() * (2.0 * b).cos() + 0.5 * b.cos())).abs() < 1e-12);
        assert!((jet.gradient[0] - a.cos() * (2.0 * b).cos()).abs() < 1e-12);
        assert!((jet.gradient[1] - (-2.0 * a.sin() * (2.0 * b).sin() - 0.5 * b.sin())).abs() < 1e-12);
        assert!((jet.hessian[0] + a.sin() * (2.0 * b).cos()).abs() < 1e-12);
        assert!((jet.hessian[1] + 2.0 * a.cos() * (2.0 * b).sin()).abs() < 1e-12);
        assert!((jet.hessian[3] - (-4.0 * a.sin() * (2.0 * b).cos() - 0.5 * b.cos())).abs() < 1e-12);
    }
}
