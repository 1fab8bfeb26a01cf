//! Admissible membrane strains: the flat compatibility operator, the
//! constructive solver for surfaces of revolution, robustness
//! classification and least-squares projection onto symmetrized gradients.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Result, ShellError};
use crate::geometry::{frame_form_at, sym_grad, FormField2, Profile, SurfaceChart, SurfaceFamily, Sym2, VectorField3};

/// `∂²₂₂B₁₁ + ∂²₁₁B₂₂ − 2∂²₁₂B₁₂` on a flat chart; zero exactly on
/// symmetrized gradients of the continuum.
pub fn curl_curl(chart: &SurfaceChart, b: &FormField2) -> Result<Vec<f64>> {
    chart.check_len(b.len())?;
    if !chart.is_flat() {
        return Err(ShellError::WrongFamily {
            expected: "flat",
            got: chart.family().name().to_string(),
        });
    }
    let ops = chart.ops();
    let pick = |f: fn(&Sym2) -> f64| b.0.iter().map(f).collect::<Vec<f64>>();
    let (b11, b12, b22) = (pick(|s| s.m11), pick(|s| s.m12), pick(|s| s.m22));
    let d22 = ops.apply(1, &ops.apply(1, &b11));
    let d11 = ops.apply(0, &ops.apply(0, &b22));
    let d12 = ops.apply(0, &ops.apply(1, &b12));
    Ok((0..chart.len()).map(|k| d22[k] + d11[k] - 2.0 * d12[k]).collect())
}

/// Finite-difference weights for derivatives `0..=m` at `x0` (Fornberg).
fn fornberg(x0: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Sixth-order first-derivative matrix on a uniform axis (one-sided near the ends).
fn high_order_derivative(n: usize, h: f64) -> DMatrix<f64> {
    let width = 7.min(n);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let start = i.saturating_sub(width / 2).min(n - width);
        let xs: Vec<f64> = (start..start + width).map(|j| (j as f64 - i as f64) * h).collect();
        let w = fornberg(0.0, &xs, 1);
        for (off, wj) in w[1].iter().enumerate() {
            d[(i, start + off)] = *wj;
        }
    }
    d
}

/// Cubic Lagrange interpolation of nodal samples at `x` (in index units).
fn interp_cubic(f: &[Complex64], x: f64) -> Complex64 {
    let n = f.len();
    let start = ((x.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
    let xs: Vec<f64> = (start..start + 4).map(|j| j as f64).collect();
    let w = fornberg(x, &xs, 0);
    (0..4).map(|k| f[start + k] * w[0][k]).sum()
}

fn frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Effective spectral wavenumber: zero at the Nyquist index of even grids,
/// matching the chart's differentiation rule.
fn wavenumber(k: usize, n: usize) -> f64 {
    if n.is_multiple_of(2) && k == n / 2 {
        0.0
    } else {
        frequency(k, n)
    }
}

/// Row-wise FFT helper for `n1 × n2` nodal arrays.
struct Spectral {
    n1: usize,
    n2: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Spectral {
    fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            n1,
            n2,
            forward: planner.plan_fft_forward(n2),
            inverse: planner.plan_fft_inverse(n2),
        }
    }

    /// Per-row spectra, normalized so that `f_j = Σ_k f̂_k e^{ikθ_j}`.
    fn analyze(&self, f: &[f64]) -> Vec<Vec<Complex64>> {
        (0..self.n1)
            .map(|i| {
                let mut row: Vec<Complex64> =
                    f[i * self.n2..(i + 1) * self.n2].iter().map(|&x| Complex64::new(x, 0.0)).collect();
                self.forward.process(&mut row);
                let s = 1.0 / self.n2 as f64;
                row.iter_mut().for_each(|c| *c *= s);
                row
            })
            .collect()
    }

    fn synthesize(&self, spec: &[Vec<Complex64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n1 * self.n2);
        for row in spec {
            let mut r = row.clone();
            self.inverse.process(&mut r);
            out.extend(r.iter().map(|c| c.re));
        }
        out
    }

    /// `∂_θ` applied spectrally (period 2π).
    fn d_theta(&self, spec: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        spec.iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, c)| c * Complex64::new(0.0, wavenumber(k, self.n2)))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MembraneSolution {
    pub w: VectorField3,
    /// `‖sym∇w − B‖ / ‖B‖` in `L²(√g)` with the chart's operators.
    pub residual: f64,
    /// Inconsistency of the overdetermined equations for the axial component.
    pub lsq_residual: f64,
    pub fourier_order: usize,
    /// Residual above the warning threshold.
    pub flagged: bool,
}

/// Residual above which a membrane solution is flagged.
pub const MEMBRANE_WARN: f64 = 1e-4;

/// Relative frame-norm distance `‖sym∇w − B‖/‖B‖` (absolute if `B = 0`).
pub fn strain_residual(chart: &SurfaceChart, w: &VectorField3, b: &FormField2) -> Result<f64> {
    let s = sym_grad(chart, w)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((node, (x, y)), wk) in chart.nodes().iter().zip(s.0.iter().zip(&b.0)).zip(chart.weights()) {
        num += wk * frame_form_at(node, &(*x - *y)).norm_squared();
        den += wk * frame_form_at(node, y).norm_squared();
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

fn revolution_profile(chart: &SurfaceChart) -> Result<Profile> {
    let grid = chart.grid();
    let period = grid.domain[1][1] - grid.domain[1][0];
    let profile = match chart.family() {
        SurfaceFamily::Revolution { profile } => profile.clone(),
        SurfaceFamily::Cylinder { radius } => Profile::constant(*radius),
        other => {
            return Err(ShellError::WrongFamily {
                expected: "revolution",
                got: other.name().to_string(),
            })
        }
    };
    if !grid.periodic2 || (period - 2.0 * PI).abs() > 1e-12 {
        return Err(ShellError::InvalidParameter(
            "surface of revolution needs a periodic angle over a full turn".into(),
        ));
    }
    Ok(profile)
}

/// Default Fourier truncation `min(n₂/2 − 1, 32)`.
pub fn default_fourier_order(n2: usize) -> usize {
    (n2 / 2).saturating_sub(1).min(32)
}

/// Solves `sym∇w = B` on `r(s,θ) = g(s)γ(θ) + s e₃` for `w = aγ + bγ' + c e₃`.
///
/// Component form: `g'a_s + c_s = B₁₁`, `g(a + b_θ) = B₂₂`,
/// `g b_s + g'(a_θ − b) + c_θ = 2B₁₂`. Eliminating `a` and `c` gives
/// `g b_ss − g''(b + b_θθ) = 2∂_sB₁₂ − ∂_θB₁₁ − (g''/g)∂_θB₂₂`, solved per
/// Fourier mode by RK4 from `b_k(s₀) = b_k'(s₀) = 0`. Then `a = B₂₂/g − b_θ`
/// and `c` is fitted by least squares to its two defining equations.
pub fn solve_revolution_membrane(
    chart: &SurfaceChart,
    b: &FormField2,
    fourier_order: Option<usize>,
) -> Result<MembraneSolution> {
    chart.check_len(b.len())?;
    let profile = revolution_profile(chart)?;
    let grid = chart.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let order = fourier_order.unwrap_or_else(|| default_fourier_order(n2));
    if order > (n2 - 1) / 2 {
        return Err(ShellError::InvalidParameter(format!(
            "Fourier order {order} exceeds the resolvable {} for {n2} angles",
            (n2 - 1) / 2
        )));
    }
    let h = grid.spacing()[0];
    let s_nodes: Vec<f64> = (0..n1).map(|i| grid.coord(i, 0)[0]).collect();
    let gs: Vec<(f64, f64, f64)> = s_nodes.iter().map(|&s| profile.eval(s)).collect();
    if let Some(i) = gs.iter().position(|g| !(g.0 > 0.0)) {
        return Err(ShellError::InvalidParameter(format!("profile vanishes at s = {}", s_nodes[i])));
    }
    let ds = high_order_derivative(n1, h);
    let at = |f: &[f64], i: usize, j: usize| f[i * n2 + j];
    let d_s = |f: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n1 * n2];
        for j in 0..n2 {
            let col = DVector::from_fn(n1, |i, _| at(f, i, j));
            let d = &ds * col;
            for i in 0..n1 {
                out[i * n2 + j] = d[i];
            }
        }
        out
    };
    let sp = Spectral::new(n1, n2);
    let b11: Vec<f64> = b.0.iter().map(|x| x.m11).collect();
    let b12: Vec<f64> = b.0.iter().map(|x| x.m12).collect();
    let b22: Vec<f64> = b.0.iter().map(|x| x.m22).collect();
    let row_g = |i: usize| gs[i];

    // ψ = 2∂_sB₁₂ − ∂_θB₁₁ − (g''/g)∂_θB₂₂
    let db12 = d_s(&b12);
    let hat_b11 = sp.analyze(&b11);
    let hat_b22 = sp.analyze(&b22);
    let hat_db12 = sp.analyze(&db12);
    let dth_b11 = sp.d_theta(&hat_b11);
    let dth_b22 = sp.d_theta(&hat_b22);
    let psi: Vec<Vec<Complex64>> = (0..n1)
        .map(|i| {
            let (g, _, g2) = row_g(i);
            (0..n2)
                .map(|k| hat_db12[i][k] * 2.0 - dth_b11[i][k] - dth_b22[i][k] * (g2 / g))
                .collect()
        })
        .collect();

    // per-mode ODE b'' = (g''/g)(1 − k²) b + ψ_k/g
    let modes: Vec<usize> = (0..=order).collect();
    let solved: Vec<(Vec<Complex64>, Vec<Complex64>)> = modes
        .par_iter()
        .map(|&k| {
            let col: Vec<Complex64> = (0..n1).map(|i| psi[i][k]).collect();
            let kk = (k * k) as f64;
            let rhs = |s: f64, idx: f64, y: Complex64| {
                let (g, _, g2) = profile.eval(s);
                y * (g2 / g * (1.0 - kk)) + interp_cubic(&col, idx) / g
            };
            let mut y = [Complex64::new(0.0, 0.0); 2];
            let mut vals = vec![y[0]; n1];
            let mut derivs = vec![y[1]; n1];
            for i in 0..n1 - 1 {
                let s = s_nodes[i];
                let x = i as f64;
                let f = |s: f64, x: f64, y: [Complex64; 2]| [y[1], rhs(s, x, y[0])];
                let k1 = f(s, x, y);
                let k2 = f(s + 0.5 * h, x + 0.5, [y[0] + k1[0] * (0.5 * h), y[1] + k1[1] * (0.5 * h)]);
                let k3 = f(s + 0.5 * h, x + 0.5, [y[0] + k2[0] * (0.5 * h), y[1] + k2[1] * (0.5 * h)]);
                let k4 = f(s + h, x + 1.0, [y[0] + k3[0] * h, y[1] + k3[1] * h]);
                for c in 0..2 {
                    y[c] += (k1[c] + k2[c] * 2.0 + k3[c] * 2.0 + k4[c]) * (h / 6.0);
                }
                vals[i + 1] = y[0];
                derivs[i + 1] = y[1];
            }
            (vals, derivs)
        })
        .collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut hat_b = vec![vec![zero; n2]; n1];
    let mut hat_bs = vec![vec![zero; n2]; n1];
    for (&k, (vals, derivs)) in modes.iter().zip(&solved) {
        for i in 0..n1 {
            hat_b[i][k] = vals[i];
            hat_bs[i][k] = derivs[i];
            if k > 0 {
                hat_b[i][n2 - k] = vals[i].conj();
                hat_bs[i][n2 - k] = derivs[i].conj();
            } else {
                hat_b[i][0].im = 0.0;
                hat_bs[i][0].im = 0.0;
            }
        }
    }
    let bb = sp.synthesize(&hat_b);
    let bs = sp.synthesize(&hat_bs);
    let b_th = sp.synthesize(&sp.d_theta(&hat_b));
    let bs_th = sp.synthesize(&sp.d_theta(&hat_bs));

    // a = B₂₂/g − b_θ with its derivatives
    let b22_over_g: Vec<f64> = (0..n1 * n2).map(|p| b22[p] / row_g(p / n2).0).collect();
    let a: Vec<f64> = (0..n1 * n2).map(|p| b22_over_g[p] - b_th[p]).collect();
    let d_b22g = d_s(&b22_over_g);
    let a_s: Vec<f64> = (0..n1 * n2).map(|p| d_b22g[p] - bs_th[p]).collect();
    let a_th = sp.synthesize(&sp.d_theta(&sp.analyze(&a)));

    // c_s = B₁₁ − g'a_s, c_θ = 2B₁₂ − g'(a_θ − b) − g b_s
    let r1: Vec<f64> = (0..n1 * n2).map(|p| b11[p] - row_g(p / n2).1 * a_s[p]).collect();
    let r3: Vec<f64> = (0..n1 * n2)
        .map(|p| {
            let (g, g1, _) = row_g(p / n2);
            2.0 * b12[p] - g1 * (a_th[p] - bb[p]) - g * bs[p]
        })
        .collect();
    let hat_r1 = sp.analyze(&r1);
    let hat_r3 = sp.analyze(&r3);
    let dtd = ds.transpose() * &ds;
    let cols: Vec<Vec<Complex64>> = (0..n2)
        .into_par_iter()
        .map(|k| {
            let kk = wavenumber(k, n2);
            let mut m = dtd.clone();
            if kk == 0.0 {
                // the axial translation is free; pin c(s₀) = 0
                m[(0, 0)] += 1.0;
            } else {
                for i in 0..n1 {
                    m[(i, i)] += kk * kk;
                }
            }
            let chol = m.cholesky().expect("normal matrix is positive definite");
            let r1k = DVector::from_fn(n1, |i, _| hat_r1[i][k]);
            let r3k = DVector::from_fn(n1, |i, _| hat_r3[i][k]);
            let re = ds.transpose() * r1k.map(|c| c.re) + r3k.map(|c| c.im * kk);
            let im = ds.transpose() * r1k.map(|c| c.im) - r3k.map(|c| c.re * kk);
            let (x, y) = (chol.solve(&re), chol.solve(&im));
            (0..n1).map(|i| Complex64::new(x[i], y[i])).collect()
        })
        .collect();
    let hat_c: Vec<Vec<Complex64>> = (0..n1).map(|i| (0..n2).map(|k| cols[k][i]).collect()).collect();
    let c = sp.synthesize(&hat_c);

    // inconsistency of the c-equations
    let c_s = d_s(&c);
    let c_th = sp.synthesize(&sp.d_theta(&hat_c));
    let (mut num, mut den) = (0.0, 0.0);
    for p in 0..n1 * n2 {
        num += (c_s[p] - r1[p]).powi(2) + (c_th[p] - r3[p]).powi(2);
        den += r1[p].powi(2) + r3[p].powi(2);
    }
    let lsq_residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };

    let w = VectorField3(
        chart
            .coords()
            .iter()
            .enumerate()
            .map(|(p, u)| {
                let (st, ct) = u[1].sin_cos();
                Vector3::new(ct, st, 0.0) * a[p] + Vector3::new(-st, ct, 0.0) * bb[p] + Vector3::z() * c[p]
            })
            .collect(),
    );
    if !w.is_finite() {
        return Err(ShellError::Singular("membrane solution is not finite".into()));
    }
    let residual = strain_residual(chart, &w, b)?;
    Ok(MembraneSolution {
        w,
        residual,
        lsq_residual,
        fourier_order: order,
        flagged: residual > MEMBRANE_WARN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RobustnessClass {
    NotApproximatelyRobustPlate,
    RobustConvex,
    RobustRevolution,
    RobustDevelopable,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureEvidence {
    pub min_principal: f64,
    pub max_principal: f64,
    pub min_gauss: f64,
    pub max_gauss: f64,
    pub max_second_form: f64,
    /// Smallest nodal Frobenius norm of the shape operator (frame form).
    pub min_shape_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub class: RobustnessClass,
    pub evidence: CurvatureEvidence,
}

pub const FLAT_TOL: f64 = 1e-10;
pub const CONVEX_MARGIN: f64 = 1e-6;
pub const DEVELOPABLE_GAUSS_TOL: f64 = 1e-8;
pub const DEVELOPABLE_SHAPE_MIN: f64 = 1e-4;

/// Classifies a chart against the known approximately robust families.
///
/// Checked in order: flat, rotationally symmetric, convex, developable.
pub fn robustness_classify(chart: &SurfaceChart) -> RobustnessReport {
    let mut ev = CurvatureEvidence {
        min_principal: f64::INFINITY,
        max_principal: f64::NEG_INFINITY,
        min_gauss: f64::INFINITY,
        max_gauss: f64::NEG_INFINITY,
        max_second_form: chart.max_second_form(),
        min_shape_norm: f64::INFINITY,
    };
    let mut one_signed_pos = true;
    let mut one_signed_neg = true;
    for n in chart.nodes() {
        let [k1, k2] = n.principal_curvatures();
        ev.min_principal = ev.min_principal.min(k1);
        ev.max_principal = ev.max_principal.max(k2);
        let gauss = k1 * k2;
        ev.min_gauss = ev.min_gauss.min(gauss);
        ev.max_gauss = ev.max_gauss.max(gauss);
        ev.min_shape_norm = ev.min_shape_norm.min((k1 * k1 + k2 * k2).sqrt());
        one_signed_pos &= k1 >= CONVEX_MARGIN;
        one_signed_neg &= k2 <= -CONVEX_MARGIN;
    }
    let class = if ev.max_second_form <= FLAT_TOL {
        RobustnessClass::NotApproximatelyRobustPlate
    } else if chart.is_revolution() {
        RobustnessClass::RobustRevolution
    } else if one_signed_pos || one_signed_neg {
        RobustnessClass::RobustConvex
    } else if ev.min_gauss.abs().max(ev.max_gauss.abs()) <= DEVELOPABLE_GAUSS_TOL
        && ev.min_shape_norm >= DEVELOPABLE_SHAPE_MIN
    {
        RobustnessClass::RobustDevelopable
    } else {
        RobustnessClass::Unknown
    };
    RobustnessReport { class, evidence: ev }
}

/// Generator family for [`project_to_b`]: Cartesian vector fields
/// `e_c P_m(u₁) φ_k(u₂)` with `m + k ≤ degree`, where `P_m` are Legendre
/// polynomials on the mapped axis and `φ_k` are Legendre polynomials
/// (open direction) or `1, cos θ, sin θ, cos 2θ, …` (periodic direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dictionary {
    pub degree: usize,
}

fn legendre(m: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return p0;
    }
    for k in 1..m {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn trig(k: usize, theta: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        let freq = k.div_ceil(2) as f64;
        if k % 2 == 1 {
            (freq * theta).cos()
        } else {
            (freq * theta).sin()
        }
    }
}

impl Dictionary {
    pub fn generators(&self, chart: &SurfaceChart) -> Vec<VectorField3> {
        let grid = chart.grid();
        let [[a1, b1], [a2, b2]] = grid.domain;
        let map = |x: f64, a: f64, b: f64| 2.0 * (x - a) / (b - a) - 1.0;
        let coords = chart.coords();
        let mut out = Vec::new();
        for total in 0..=self.degree {
            for m in 0..=total {
                let k = total - m;
                let scalar: Vec<f64> = coords
                    .iter()
                    .map(|u| {
                        let p = legendre(m, map(u[0], a1, b1));
                        let q = if grid.periodic2 { trig(k, u[1]) } else { legendre(k, map(u[1], a2, b2)) };
                        p * q
                    })
                    .collect();
                for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
                    out.push(VectorField3(scalar.iter().map(|s| e * *s).collect()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    /// `‖Σcᵢ sym∇wᵢ − target‖ / ‖target‖` in `L²(√g)`, frame norm.
    pub residual: f64,
    pub w: VectorField3,
    /// Normal equations were rank deficient and the ridge was active.
    pub regularized: bool,
}

/// Relative ridge parameter for [`project_to_b`].
pub const RIDGE: f64 = 1e-12;

/// Least-squares fit of `target` by symmetrized gradients of the dictionary.
///
/// Solved through the SVD of the weighted design matrix as a ridge problem
/// with parameter `1e-12·σ_max²`; `regularized` reports numerical rank loss.
pub fn project_to_b(chart: &SurfaceChart, target: &FormField2, dict: &Dictionary) -> Result<Projection> {
    chart.check_len(target.len())?;
    let gens = dict.generators(chart);
    let frame_rows = |f: &FormField2| -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * chart.len());
        for ((node, b), w) in chart.nodes().iter().zip(&f.0).zip(chart.weights()) {
            let s = frame_form_at(node, b);
            let sw = w.sqrt();
            out.extend([s.m11 * sw, s.m12 * sw * 2f64.sqrt(), s.m22 * sw]);
        }
        out
    };
    let columns: Vec<Vec<f64>> = gens
        .par_iter()
        .map(|g| sym_grad(chart, g).map(|b| frame_rows(&b)))
        .collect::<Result<_>>()?;
    let rows = 3 * chart.len();
    let design = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    let rhs = DVector::from_vec(frame_rows(target));
    let svd = design.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let smax = svd.singular_values.max();
    let ridge = RIDGE * smax * smax;
    let proj = u.transpose() * &rhs;
    let mut coef = DVector::zeros(columns.len());
    let mut regularized = false;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= 1e-8 * smax {
            regularized = true;
        }
        if s > 0.0 {
            coef += vt.row(i).transpose() * (s / (s * s + ridge) * proj[i]);
        }
    }
    let fit = &design * &coef;
    let tnorm = rhs.norm();
    let residual = if tnorm > 0.0 { (fit - &rhs).norm() / tnorm } else { (fit - &rhs).norm() };
    let mut w = VectorField3::zeros(chart.len());
    for (g, c) in gens.iter().zip(coef.iter()) {
        w.axpy(*c, g);
    }
    Ok(Projection {
        coefficients: coef.iter().copied().collect(),
        residual,
        w,
        regularized,
    })
}
