//! Recovery-sequence harness: explicit 3D deformations of the shell of
//! thickness `h` whose rescaled energies approach the limit functional.
//!
//! Everything is built on the discrete geometry (finite-difference tangents
//! and the normal of their cross product), so that the unperturbed ansatz
//! has rescaled gradient exactly `Id`. The reference thickness is `h₀ = 1`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{Matrix3, Vector3, SVD};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, ShellError};
use crate::functional::{a_squared_tan, total_i};
use crate::geometry::{sym_grad, FormField2, SkewField, SurfaceChart, Sym2, VectorField3};
use crate::isometry::{bending_form, discrete_frames, extend_a, DiscreteFrame};
use crate::material::{q2_relax, w_density, ElasticModuli};

/// Default number of Gauss points across the thickness.
pub const T_QUAD: usize = 6;

/// How the energy scale `e^h` depends on `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScalingRule {
    /// `e = κ²h⁴`.
    Kappa(f64),
    /// `e = h^β` with `β > 4`; the `κ = 0` regime.
    Power(f64),
}

impl ScalingRule {
    pub fn e(&self, h: f64) -> f64 {
        match *self {
            ScalingRule::Kappa(k) => k * k * h.powi(4),
            ScalingRule::Power(b) => h.powf(b),
        }
    }

    pub fn kappa(&self) -> f64 {
        match *self {
            ScalingRule::Kappa(k) => k,
            ScalingRule::Power(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryAnsatz<'a> {
    chart: &'a SurfaceChart,
    pub v: VectorField3,
    /// Second-order in-plane displacement; zero when `κ = 0`.
    pub w: VectorField3,
    pub a: SkewField,
    pub d0: VectorField3,
    pub d1: VectorField3,
    pub kappa: f64,
    pub rule: ScalingRule,
    /// `sym∇w` in chart coordinates.
    pub b: FormField2,
    moduli: ElasticModuli,
    frames: Vec<DiscreteFrame>,
    /// `A n`, the first-order normal rotation.
    an: VectorField3,
    /// Tangent vector dual to `nᵀ∇w`.
    tw: VectorField3,
}

/// `(e₁, e₂)`: an orthonormal tangent pair of the discrete frame.
fn local_frame(f: &DiscreteFrame) -> [Vector3<f64>; 2] {
    let e1 = f.tangents[0].normalize();
    [e1, f.normal.cross(&e1)]
}

/// Chart-coordinate form to the orthonormal discrete frame.
fn to_frame(f: &DiscreteFrame, b: &Sym2) -> Sym2 {
    let e = local_frame(f);
    // coefficients of eₐ on the dual basis tⁱ: (eₐ·t_i)
    let coef = |a: usize, i: usize| e[a].dot(&f.tangents[i]);
    let m = b.to_matrix();
    let entry = |a: usize, c: usize| {
        let ca = [coef(a, 0), coef(a, 1)];
        let cc = [coef(c, 0), coef(c, 1)];
        // eₐ = Σ (eₐ·t_i) tⁱ, so F_ac = Σ (eₐ·t_i)(e_c·t_j) gⁱᵏ gʲˡ b_kl
        let ga = f.metric_inv * nalgebra::Vector2::new(ca[0], ca[1]);
        let gc = f.metric_inv * nalgebra::Vector2::new(cc[0], cc[1]);
        (ga.transpose() * m * gc)[0]
    };
    Sym2::new(entry(0, 0), entry(0, 1), entry(1, 1))
}

/// `2c(x, F)` as an ambient vector.
fn relaxation_vector(f: &DiscreteFrame, b: &Sym2, moduli: &ElasticModuli) -> Vector3<f64> {
    let c = q2_relax(&to_frame(f, b), moduli).c;
    let e = local_frame(f);
    (e[0] * c.x + e[1] * c.y + f.normal * c.z) * 2.0
}

/// Builds the recovery ansatz around `(V, w)`.
///
/// `κ > 0` uses `e = κ²h⁴`; `κ = 0` uses `e = h⁵` and drops `w`.
pub fn build_ansatz<'a>(
    chart: &'a SurfaceChart,
    v: &VectorField3,
    w: &VectorField3,
    kappa: f64,
    moduli: &ElasticModuli,
) -> Result<RecoveryAnsatz<'a>> {
    let rule = if kappa == 0.0 { ScalingRule::Power(5.0) } else { ScalingRule::Kappa(kappa) };
    build_ansatz_with(chart, v, w, rule, moduli)
}

pub fn build_ansatz_with<'a>(
    chart: &'a SurfaceChart,
    v: &VectorField3,
    w: &VectorField3,
    rule: ScalingRule,
    moduli: &ElasticModuli,
) -> Result<RecoveryAnsatz<'a>> {
    match rule {
        ScalingRule::Kappa(k) if !(k > 0.0 && k.is_finite()) => {
            return Err(ShellError::InvalidParameter(format!("kappa must be positive and finite, got {k}")))
        }
        ScalingRule::Power(b) if !(b > 4.0 && b.is_finite()) => {
            return Err(ShellError::InvalidParameter(format!("power rule needs beta > 4, got {b}")))
        }
        _ => {}
    }
    chart.check_len(v.len())?;
    chart.check_len(w.len())?;
    if !v.is_finite() || !w.is_finite() {
        return Err(ShellError::InvalidParameter("ansatz fields are not finite".into()));
    }
    let kappa = rule.kappa();
    let w = if kappa == 0.0 { VectorField3::zeros(chart.len()) } else { w.clone() };
    let frames = discrete_frames(chart)?;
    let (a, _) = extend_a(chart, v)?;
    let b = sym_grad(chart, &w)?;
    let a2 = a_squared_tan(chart, &a)?;
    let bend = bending_form(chart, &a)?;
    let an = VectorField3(a.0.iter().zip(&frames).map(|(a, f)| a * f.normal).collect());
    let [w1, w2] = chart.ops().gradient(&w.0);
    let tw = VectorField3(
        frames
            .iter()
            .enumerate()
            .map(|(k, f)| f.raise([f.normal.dot(&w1[k]), f.normal.dot(&w2[k])]))
            .collect(),
    );
    let [a1, a2d] = chart.ops().gradient(&a.0);
    let d0 = VectorField3(
        (0..chart.len())
            .map(|k| {
                let f = &frames[k];
                let n = f.normal;
                let strain = b.0[k] - a2.0[k] * (0.5 * kappa);
                let a2n = a.0[k] * (a.0[k] * n);
                relaxation_vector(f, &strain, moduli) + a2n * kappa - n * (0.5 * kappa * n.dot(&a2n))
            })
            .collect(),
    );
    let d1 = VectorField3(
        (0..chart.len())
            .map(|k| {
                let f = &frames[k];
                let n = f.normal;
                // nᵀAΠτ − nᵀ∂_τ(An) = −nᵀ(∂_τA)n
                let cov = [-n.dot(&(a1[k] * n)), -n.dot(&(a2d[k] * n))];
                relaxation_vector(f, &bend.0[k], moduli) + f.raise(cov)
            })
            .collect(),
    );
    Ok(RecoveryAnsatz {
        chart,
        v: v.clone(),
        w,
        a,
        d0,
        d1,
        kappa,
        rule,
        b,
        moduli: *moduli,
        frames,
        an,
        tw,
    })
}

/// Per-node perturbation layers of `y(u, t) = x + tn·h + P₀ + tP₁ + t²P₂`
/// and their chart derivatives.
struct Layers {
    p1: Vec<Vector3<f64>>,
    p2: Vec<Vector3<f64>>,
    /// `∂_i P_k` for `k = 0, 1, 2`.
    dp: [[Vec<Vector3<f64>>; 2]; 3],
    /// `∂_i n`.
    dn: [Vec<Vector3<f64>>; 2],
}

impl RecoveryAnsatz<'_> {
    pub fn chart(&self) -> &SurfaceChart {
        self.chart
    }

    pub fn moduli(&self) -> &ElasticModuli {
        &self.moduli
    }

    /// Limit energy `I(V, sym∇w)` (or `Ĩ(V)` when `κ = 0`).
    pub fn limit(&self) -> Result<f64> {
        Ok(total_i(self.chart, &self.v, &self.b, self.kappa, &self.moduli)?.total)
    }

    /// Largest `(h/2)|principal curvature|` over the surface.
    pub fn tubular_ratio(&self, h: f64) -> f64 {
        let k = self
            .chart
            .nodes()
            .iter()
            .map(|n| {
                let [a, b] = n.principal_curvatures();
                a.abs().max(b.abs())
            })
            .fold(0.0, f64::max);
        0.5 * h * k
    }

    fn check_h(&self, h: f64) -> Result<()> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(ShellError::InvalidParameter(format!("thickness must lie in (0, 1/2], got {h}")));
        }
        let r = self.tubular_ratio(h);
        if r >= 0.5 {
            return Err(ShellError::ThicknessTooLarge { max_curv_h: r });
        }
        Ok(())
    }

    fn layers(&self, h: f64) -> Layers {
        let n = self.chart.len();
        let se = self.rule.e(h).sqrt();
        let ops = self.chart.ops();
        let normals: Vec<Vector3<f64>> = self.frames.iter().map(|f| f.normal).collect();
        let p0: Vec<Vector3<f64>> = (0..n).map(|k| self.v.0[k] * (se / h) + self.w.0[k] * se).collect();
        let p1: Vec<Vector3<f64>> = (0..n)
            .map(|k| self.an.0[k] * se + (self.d0.0[k] - self.tw.0[k]) * (h * se))
            .collect();
        let p2: Vec<Vector3<f64>> = self.d1.0.iter().map(|d| d * (0.5 * h * se)).collect();
        Layers {
            dp: [ops.gradient(&p0), ops.gradient(&p1), ops.gradient(&p2)],
            p1,
            p2,
            dn: ops.gradient(&normals),
        }
    }

    /// `(∇_h y, det[Id + thΠ])` at node `k` and depth `t ∈ [−½, ½]`.
    ///
    /// `∇_h y = Id + P [t₁ + th∂₁n | t₂ + th∂₂n | n]⁻¹` with `P` the
    /// perturbation columns, so the unperturbed ansatz gives `Id` exactly.
    fn gradient_at(&self, l: &Layers, k: usize, t: f64, h: f64) -> (Matrix3<f64>, f64) {
        let f = &self.frames[k];
        let [t1, t2] = f.tangents;
        let col = |i: usize| l.dp[0][i][k] + l.dp[1][i][k] * t + l.dp[2][i][k] * (t * t);
        let dt = (l.p1[k] + l.p2[k] * (2.0 * t)) / h;
        let pert = Matrix3::from_columns(&[col(0), col(1), dt]);
        let shifted = Matrix3::from_columns(&[t1 + l.dn[0][k] * (t * h), t2 + l.dn[1][k] * (t * h), f.normal]);
        let base = Matrix3::from_columns(&[t1, t2, f.normal]);
        let inv = shifted.try_inverse().expect("tubular coordinates are regular");
        (Matrix3::identity() + pert * inv, shifted.determinant() / base.determinant())
    }

    fn gauss(t_quad: usize) -> Result<Vec<(f64, f64)>> {
        if !(2..=8).contains(&t_quad) {
            return Err(ShellError::InvalidParameter(format!("t_quad must be in 2..=8, got {t_quad}")));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(t_quad).expect("nonzero"));
        Ok(rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * x, 0.5 * w)).collect())
    }

    /// Rescaled gradient at every node and Gauss depth.
    pub fn rescaled_gradients(&self, h: f64, t_quad: usize) -> Result<Vec<Vec<Matrix3<f64>>>> {
        self.check_h(h)?;
        let g = Self::gauss(t_quad)?;
        let l = self.layers(h);
        Ok((0..self.chart.len())
            .map(|k| g.iter().map(|&(t, _)| self.gradient_at(&l, k, t, h).0).collect())
            .collect())
    }
}

/// `I^h(y^h) = ∫_S ⨍ W(∇_h y^h) det[Id + thΠ] dt dx`.
pub fn energy_3d(ansatz: &RecoveryAnsatz, h: f64, moduli: &ElasticModuli, t_quad: usize) -> Result<f64> {
    ansatz.check_h(h)?;
    let g = RecoveryAnsatz::gauss(t_quad)?;
    let l = ansatz.layers(h);
    let w = ansatz.chart.weights();
    let per_node: Vec<f64> = (0..ansatz.chart.len())
        .into_par_iter()
        .map(|k| {
            g.iter()
                .map(|&(t, gw)| {
                    let (f, det) = ansatz.gradient_at(&l, k, t, h);
                    gw * w_density(&f, moduli) * det
                })
                .sum::<f64>()
                * w[k]
        })
        .collect();
    Ok(per_node.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub energy: f64,
    /// `I^h / e^h`.
    pub ratio: f64,
    /// `|I^h/e^h − I|`.
    pub error: f64,
    /// `log(I^h_k / I^h_{k−1}) / log(h_k / h_{k−1})`.
    pub energy_slope: Option<f64>,
    pub error_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub limit: f64,
    pub kappa: f64,
    pub rule: ScalingRule,
    /// Least-squares slope of `log I^h` against `log h`.
    pub scaling_exponent: Option<f64>,
    pub t_quad: usize,
}

impl ConvergenceTable {
    pub fn final_relative_error(&self) -> f64 {
        let last = self.rows.last().map_or(0.0, |r| r.error);
        if self.limit == 0.0 {
            last
        } else {
            last / self.limit.abs()
        }
    }

    pub fn errors_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

fn log_ratio(a: f64, b: f64, ha: f64, hb: f64) -> Option<f64> {
    (a > 0.0 && b > 0.0).then(|| (b / a).ln() / (hb / ha).ln())
}

/// Rescaled energies along a decreasing thickness ladder.
pub fn convergence_study(ansatz: &RecoveryAnsatz, h_list: &[f64], moduli: &ElasticModuli) -> Result<ConvergenceTable> {
    convergence_study_with(ansatz, h_list, moduli, T_QUAD)
}

pub fn convergence_study_with(
    ansatz: &RecoveryAnsatz,
    h_list: &[f64],
    moduli: &ElasticModuli,
    t_quad: usize,
) -> Result<ConvergenceTable> {
    if h_list.len() < 4 {
        return Err(ShellError::InvalidParameter(format!("need at least 4 thicknesses, got {}", h_list.len())));
    }
    if !h_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(ShellError::InvalidParameter("thicknesses must be strictly decreasing".into()));
    }
    let limit = total_i(ansatz.chart, &ansatz.v, &ansatz.b, ansatz.kappa, moduli)?.total;
    let energies: Vec<f64> = h_list
        .par_iter()
        .map(|&h| energy_3d(ansatz, h, moduli, t_quad))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(h_list.len());
    for (k, (&h, &energy)) in h_list.iter().zip(&energies).enumerate() {
        let ratio = energy / ansatz.rule.e(h);
        let error = (ratio - limit).abs();
        let (energy_slope, error_slope) = match k {
            0 => (None, None),
            _ => {
                let p = &rows[k - 1];
                (log_ratio(p.energy, energy, p.h, h), log_ratio(p.error, error, p.h, h))
            }
        };
        rows.push(ConvergenceRow { h, energy, ratio, error, energy_slope, error_slope });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.energy > 0.0).map(|r| (r.h.ln(), r.energy.ln())).collect();
    let scaling_exponent = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ConvergenceTable { rows, limit, kappa: ansatz.kappa, rule: ansatz.rule, scaling_exponent, t_quad })
}

#[derive(Debug, Clone)]
pub struct RotationFieldEstimate {
    /// Nearest rotation to the thickness-averaged rescaled gradient.
    pub r: Vec<Matrix3<f64>>,
    /// `E(u, S^h) = ∫_{S^h} dist²(∇u, SO(3))`.
    pub energy: f64,
    /// `‖∇u − Rπ‖²` over `S^h`.
    pub rotation_defect: f64,
    /// `‖∇R‖²` over `S^h` by surface finite differences.
    pub rotation_gradient: f64,
    /// Nodes where the averaged gradient has negative determinant.
    pub reflected: Vec<usize>,
}

/// Nearest rotation and distance to `SO(3)`; `None` on the reflection branch.
fn polar_rotation(f: &Matrix3<f64>) -> Option<(Matrix3<f64>, f64)> {
    if f.determinant() <= 0.0 {
        return None;
    }
    let svd = SVD::new(*f, true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * vt;
    Some((r, (f - r).norm()))
}

/// Rotation-field diagnostics of the recovery deformation at thickness `h`.
pub fn rotation_field_estimate(ansatz: &RecoveryAnsatz, h: f64) -> Result<RotationFieldEstimate> {
    ansatz.check_h(h)?;
    let g = RecoveryAnsatz::gauss(T_QUAD)?;
    let l = ansatz.layers(h);
    let n = ansatz.chart.len();
    let w = ansatz.chart.weights();
    let samples: Vec<Vec<(Matrix3<f64>, f64, f64)>> = (0..n)
        .map(|k| {
            g.iter()
                .map(|&(t, gw)| {
                    let (f, det) = ansatz.gradient_at(&l, k, t, h);
                    (f, gw, det)
                })
                .collect()
        })
        .collect();
    let mut r = Vec::with_capacity(n);
    let mut reflected = Vec::new();
    let (mut energy, mut defect) = (0.0, 0.0);
    for (k, pts) in samples.iter().enumerate() {
        let mean = pts.iter().fold(Matrix3::zeros(), |a, (f, gw, _)| a + f * *gw);
        let rk = match polar_rotation(&mean) {
            Some((rk, _)) => rk,
            None => {
                reflected.push(k);
                Matrix3::identity()
            }
        };
        for (f, gw, det) in pts {
            let dist = polar_rotation(f).map_or_else(|| (f - rk).norm(), |p| p.1);
            energy += h * w[k] * gw * det * dist * dist;
            defect += h * w[k] * gw * det * (f - rk).norm_squared();
        }
        r.push(rk);
    }
    let [r1, r2] = ansatz.chart.ops().gradient(&r);
    let rotation_gradient = h * (0..n)
        .map(|k| {
            let gi = ansatz.frames[k].metric_inv;
            let d = [r1[k], r2[k]];
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += gi[(i, j)] * d[i].dot(&d[j]);
                }
            }
            w[k] * s
        })
        .sum::<f64>();
    Ok(RotationFieldEstimate { r, energy, rotation_defect: defect, rotation_gradient, reflected })
}
