//! First-order isometries: the discrete near-null space of the symmetrized
//! gradient, the skew extension `A` of `∇V`, the bending tensor, rigid
//! motions, and the coercivity spectrum of the bending form.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Result, ShellError};
use crate::geometry::{
    cross_matrix, frame_form_at, sym_grad, FormField2, SkewField, SurfaceChart, Sym2,
    VectorField3,
};
use crate::material::Elasticity;

/// Frame built from the grid-consistent tangents `D_i r`.
///
/// Using it everywhere the operators meet makes rigid motions exact
/// isometries of the discrete problem.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DiscreteFrame {
    pub tangents: [Vector3<f64>; 2],
    pub normal: Vector3<f64>,
    pub metric_inv: Matrix2<f64>,
}

impl DiscreteFrame {
    /// Tangent vector with covariant components `c_i = (·)·t_i`.
    pub fn raise(&self, c: [f64; 2]) -> Vector3<f64> {
        let g = &self.metric_inv;
        self.tangents[0] * (g[(0, 0)] * c[0] + g[(0, 1)] * c[1])
            + self.tangents[1] * (g[(1, 0)] * c[0] + g[(1, 1)] * c[1])
    }
}

pub(crate) fn discrete_frames(chart: &SurfaceChart) -> Result<Vec<DiscreteFrame>> {
    let [t1, t2] = chart.discrete_tangents();
    chart
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, node)| {
            let (a, b) = (t1[k], t2[k]);
            let cross = a.cross(&b);
            let norm = cross.norm();
            let metric = Matrix2::new(a.dot(&a), a.dot(&b), a.dot(&b), b.dot(&b));
            let metric_inv = metric.try_inverse().filter(|_| norm > 1e-12);
            let Some(metric_inv) = metric_inv else {
                let (i, j) = chart.grid().split(k);
                return Err(ShellError::DegenerateChart { i, j, norm });
            };
            // keep the chart's orientation (it may have been flipped)
            let sign = if cross.dot(&node.normal) < 0.0 { -1.0 } else { 1.0 };
            Ok(DiscreteFrame {
                tangents: [a, b],
                normal: cross * (sign / norm),
                metric_inv,
            })
        })
        .collect()
}

/// Skew extension `A` of `∇V` and its skewness residual `max ‖A + Aᵀ‖`.
///
/// Per node solves `A [∂₁r | ∂₂r | n] = [∂₁V | ∂₂V | ΠV_tan − ∇_tan(V·n)]`.
/// The third column is evaluated by the product rule, where the `Π` terms
/// cancel and leave `−Σ gⁱʲ (∂_iV·n) ∂_jr`. The residual measures `sym∇V`.
pub fn extend_a(chart: &SurfaceChart, v: &VectorField3) -> Result<(SkewField, f64)> {
    chart.check_len(v.len())?;
    let frames = discrete_frames(chart)?;
    let [d1, d2] = chart.ops().gradient(&v.0);
    let a: Vec<Matrix3<f64>> = frames
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let n = f.normal;
            let an = -f.raise([d1[k].dot(&n), d2[k].dot(&n)]);
            let basis = Matrix3::from_columns(&[f.tangents[0], f.tangents[1], n]);
            let image = Matrix3::from_columns(&[d1[k], d2[k], an]);
            let inv = basis.try_inverse().ok_or_else(|| {
                let (i, j) = chart.grid().split(k);
                ShellError::DegenerateChart { i, j, norm: basis.determinant().abs() }
            })?;
            Ok(image * inv)
        })
        .collect::<Result<_>>()?;
    let field = SkewField(a);
    let residual = field.skew_residual();
    Ok((field, residual))
}

/// `b_ij = sym((∂_iA) n · ∂_jr)` in chart coordinates.
pub fn bending_form(chart: &SurfaceChart, a: &SkewField) -> Result<FormField2> {
    chart.check_len(a.len())?;
    let frames = discrete_frames(chart)?;
    let [d1, d2] = chart.ops().gradient(&a.0);
    Ok(FormField2(
        frames
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let c1 = d1[k] * f.normal;
                let c2 = d2[k] * f.normal;
                let [t1, t2] = f.tangents;
                Sym2::new(c1.dot(&t1), 0.5 * (c1.dot(&t2) + c2.dot(&t1)), c2.dot(&t2))
            })
            .collect(),
    ))
}

/// Bending form of `V` expressed in the orthonormal frame at every node.
pub fn bending_frame(chart: &SurfaceChart, v: &VectorField3) -> Result<Vec<Sym2>> {
    let (a, _) = extend_a(chart, v)?;
    let b = bending_form(chart, &a)?;
    Ok(chart
        .nodes()
        .iter()
        .zip(&b.0)
        .map(|(n, b)| frame_form_at(n, b))
        .collect())
}

/// How the acceptance threshold on Rayleigh quotients is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Absolute(f64),
    /// Fraction of the largest Rayleigh quotient.
    Relative(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Relative(1e-8)
    }
}

/// Near-null modes of `∫‖sym∇V‖²`, orthonormal in the `W^{1,2}` mass.
#[derive(Debug, Clone)]
pub struct IsometryBasis {
    pub modes: Vec<VectorField3>,
    /// `∫‖sym∇V‖² / ‖V‖²_{W^{1,2}}` per mode, ascending.
    pub rayleigh: Vec<f64>,
    /// Absolute threshold the modes passed.
    pub tol: f64,
    /// The `W^{1,2}` mass matrix on nodal dofs (`3·node + component`).
    pub gram: DMatrix<f64>,
    /// Smallest rejected quotient over the largest accepted one.
    pub gap_ratio: f64,
    /// Number of quotients below the threshold, before truncation to `n_request`.
    pub near_null_count: usize,
    /// Largest quotient in the spectrum.
    pub max_rayleigh: f64,
}

impl IsometryBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mass_inner(&self, a: &VectorField3, b: &VectorField3) -> f64 {
        let x = DVector::from_vec(a.to_flat());
        let y = DVector::from_vec(b.to_flat());
        (x.transpose() * &self.gram * y)[0]
    }

    /// Coefficients of the mass-orthogonal projection onto the span.
    pub fn coefficients(&self, v: &VectorField3) -> Vec<f64> {
        let mv = &self.gram * DVector::from_vec(v.to_flat());
        self.modes
            .iter()
            .map(|m| DVector::from_vec(m.to_flat()).dot(&mv))
            .collect()
    }

    pub fn combine(&self, xi: &[f64]) -> VectorField3 {
        let len = self.modes.first().map_or(0, |m| m.len());
        let mut out = VectorField3::zeros(len);
        for (m, &c) in self.modes.iter().zip(xi) {
            out.axpy(c, m);
        }
        out
    }

    /// Relative mass-norm distance of `v` from the span.
    pub fn projection_residual(&self, v: &VectorField3) -> f64 {
        let p = self.combine(&self.coefficients(v));
        let d = v.sub(&p);
        let norm = self.mass_inner(v, v);
        if norm == 0.0 {
            return 0.0;
        }
        (self.mass_inner(&d, &d).max(0.0) / norm).sqrt()
    }
}

/// Sparse linear functionals on nodal dofs.
type Row = BTreeMap<usize, f64>;

fn add_to(row: &mut Row, dof: usize, w: f64) {
    *row.entry(dof).or_insert(0.0) += w;
}

fn accumulate(k: &mut DMatrix<f64>, rows: &[(f64, Row)]) {
    for (w, row) in rows {
        for (&p, &a) in row {
            let wa = w * a;
            for (&q, &b) in row {
                k[(p, q)] += wa * b;
            }
        }
    }
}

/// Weighted rows of the frame components of `sym∇V` at node `k`.
#[allow(clippy::needless_range_loop)] // b[axis][j] and b[j][axis] are filled together
fn strain_rows(chart: &SurfaceChart, k: usize) -> Vec<(f64, Row)> {
    let [t1, t2] = chart.discrete_tangents();
    let t = [t1[k], t2[k]];
    let p = chart.node(k).metric_inv_sqrt;
    let w = chart.weights()[k];
    // b_ij = ½(D_iV·t_j + D_jV·t_i), then F = P b P
    let mut b: [[Row; 2]; 2] = Default::default();
    for axis in 0..2 {
        for (node, c) in chart.ops().stencil(axis, k) {
            for j in 0..2 {
                for comp in 0..3 {
                    let val = 0.5 * c * t[j][comp];
                    add_to(&mut b[axis][j], 3 * node + comp, val);
                    add_to(&mut b[j][axis], 3 * node + comp, val);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(3);
    for (a, bb, scale) in [(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)] {
        let mut row = Row::new();
        for i in 0..2 {
            for j in 0..2 {
                let f = p[(a, i)] * p[(j, bb)];
                for (&dof, &val) in &b[i][j] {
                    add_to(&mut row, dof, f * val);
                }
            }
        }
        out.push((w * scale, row));
    }
    out
}

/// Weighted rows of values and frame gradients at node `k`.
fn mass_rows(chart: &SurfaceChart, k: usize) -> Vec<(f64, Row)> {
    let p = chart.node(k).metric_inv_sqrt;
    let w = chart.weights()[k];
    let stencils = [chart.ops().stencil(0, k), chart.ops().stencil(1, k)];
    let mut out = Vec::with_capacity(9);
    for comp in 0..3 {
        out.push((w, Row::from([(3 * k + comp, 1.0)])));
        for a in 0..2 {
            let mut row = Row::new();
            for (i, st) in stencils.iter().enumerate() {
                for &(node, c) in st {
                    add_to(&mut row, 3 * node + comp, p[(a, i)] * c);
                }
            }
            out.push((w, row));
        }
    }
    out
}

fn assemble(chart: &SurfaceChart, rows: impl Fn(&SurfaceChart, usize) -> Vec<(f64, Row)> + Sync) -> DMatrix<f64> {
    let dofs = 3 * chart.len();
    let per_node: Vec<Vec<(f64, Row)>> = (0..chart.len()).into_par_iter().map(|k| rows(chart, k)).collect();
    let mut m = DMatrix::zeros(dofs, dofs);
    for r in &per_node {
        accumulate(&mut m, r);
    }
    m
}

/// Stiffness `∫‖sym∇V‖²` (frame Frobenius norm) on nodal dofs.
pub fn strain_stiffness(chart: &SurfaceChart) -> DMatrix<f64> {
    assemble(chart, strain_rows)
}

/// `∫ |V|² + gⁱʲ ∂_iV·∂_jV` on nodal dofs.
pub fn mass_matrix(chart: &SurfaceChart) -> DMatrix<f64> {
    assemble(chart, mass_rows)
}

/// Near-null space of the symmetrized gradient.
///
/// Solves `K v = ρ M v` and keeps at most `n_request` modes with `ρ` under
/// the threshold. An empty result is valid; callers check `is_empty`.
pub fn isometry_basis(chart: &SurfaceChart, n_request: usize, tol: Threshold) -> Result<IsometryBasis> {
    match tol {
        Threshold::Absolute(t) | Threshold::Relative(t) if !(t > 0.0) => {
            return Err(ShellError::InvalidParameter(format!("threshold must be positive, got {t}")))
        }
        _ => {}
    }
    let k = strain_stiffness(chart);
    let m = mass_matrix(chart);
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| ShellError::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let y = l
        .solve_lower_triangular(&k)
        .ok_or_else(|| ShellError::Eigen("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| ShellError::Eigen("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| ShellError::Eigen("symmetric eigen solver did not converge".into()))?;
    basis_from_eigen(chart, eig, l.transpose(), m, n_request, tol)
}

fn basis_from_eigen(
    chart: &SurfaceChart,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    lt: DMatrix<f64>,
    gram: DMatrix<f64>,
    n_request: usize,
    tol: Threshold,
) -> Result<IsometryBasis> {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let max_rayleigh = values.last().copied().unwrap_or(0.0);
    let tol = match tol {
        Threshold::Absolute(t) => t,
        Threshold::Relative(t) => t * max_rayleigh,
    };
    let near_null_count = values.iter().take_while(|&&v| v <= tol).count();
    let take = near_null_count.min(n_request);
    let gap_ratio = match (near_null_count, values.get(near_null_count)) {
        (0, _) | (_, None) => f64::INFINITY,
        (n, Some(&next)) => next / values[n - 1].max(f64::MIN_POSITIVE),
    };
    let modes = order[..take]
        .iter()
        .map(|&i| {
            let q = eig.eigenvectors.column(i).into_owned();
            let x = lt
                .solve_upper_triangular(&q)
                .ok_or_else(|| ShellError::Eigen("back substitution failed".into()))?;
            let mut field = VectorField3::from_flat(x.as_slice());
            // deterministic sign: largest-magnitude dof positive
            let pivot = x.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if pivot < 0.0 {
                field = field.scaled(-1.0);
            }
            Ok(field)
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(modes.iter().all(|m| m.len() == chart.len()));
    Ok(IsometryBasis {
        modes,
        rayleigh: values[..take].to_vec(),
        tol,
        gram,
        gap_ratio,
        near_null_count,
        max_rayleigh,
    })
}

/// `L²(√g)`-orthonormal basis of infinitesimal rigid motions `x ↦ Dx + d`.
#[derive(Debug, Clone)]
pub struct RigidBasis {
    pub fields: Vec<VectorField3>,
    weights: Vec<f64>,
}

fn l2_inner(weights: &[f64], a: &VectorField3, b: &VectorField3) -> f64 {
    weights
        .iter()
        .zip(a.0.iter().zip(&b.0))
        .map(|(w, (x, y))| w * x.dot(y))
        .sum()
}

impl RigidBasis {
    pub fn inner(&self, a: &VectorField3, b: &VectorField3) -> f64 {
        l2_inner(&self.weights, a, b)
    }

    /// Removes the rigid component of `v` (L² projection).
    pub fn project_out(&self, v: &VectorField3) -> VectorField3 {
        let mut out = v.clone();
        for f in &self.fields {
            let c = self.inner(&out, f);
            out.axpy(-c, f);
        }
        out
    }

    /// Coefficients of `v` against the orthonormal rigid fields.
    pub fn coefficients(&self, v: &VectorField3) -> [f64; 6] {
        let mut c = [0.0; 6];
        for (ci, f) in c.iter_mut().zip(&self.fields) {
            *ci = self.inner(v, f);
        }
        c
    }
}

/// The six rigid fields, centred and orthonormalized by modified Gram–Schmidt
/// (applied twice for stability).
pub fn rigid_basis(chart: &SurfaceChart) -> RigidBasis {
    let weights = chart.weights().to_vec();
    let pos = chart.positions();
    let total: f64 = weights.iter().sum();
    let centre = pos.0.iter().zip(&weights).fold(Vector3::zeros(), |a, (x, w)| a + x * *w) / total;
    let mut raw: Vec<VectorField3> = Vec::with_capacity(6);
    for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
        raw.push(VectorField3(vec![e; chart.len()]));
    }
    for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
        let d = cross_matrix(&e);
        raw.push(VectorField3(pos.0.iter().map(|x| d * (x - centre)).collect()));
    }
    let mut fields: Vec<VectorField3> = Vec::with_capacity(6);
    for mut f in raw {
        for _ in 0..2 {
            for g in &fields {
                let c = l2_inner(&weights, &f, g);
                f.axpy(-c, g);
            }
        }
        let n = l2_inner(&weights, &f, &f).sqrt();
        fields.push(f.scaled(1.0 / n));
    }
    RigidBasis { fields, weights }
}

/// `project_out_rigid(V)` for a one-off call.
pub fn project_out_rigid(chart: &SurfaceChart, v: &VectorField3) -> VectorField3 {
    rigid_basis(chart).project_out(v)
}

/// Orthonormal coordinates (columns) for the coefficient directions of
/// `span(basis)` that are L²-orthogonal to all rigid motions.
pub fn rigid_complement(chart: &SurfaceChart, basis: &IsometryBasis) -> DMatrix<f64> {
    let rigid = rigid_basis(chart);
    let m = basis.len();
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let r = DMatrix::from_fn(m, 6, |i, a| rigid.inner(&basis.modes[i], &rigid.fields[a]));
    // P = R Rᵀ-type projector onto the rigid directions; its kernel is the complement.
    let rrt = &r * r.transpose();
    let eig = SymmetricEigen::new(rrt);
    let scale = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max).max(1e-300);
    let mut cols: Vec<(f64, DVector<f64>)> = (0..m)
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * scale)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    if cols.is_empty() {
        return DMatrix::zeros(m, 0);
    }
    DMatrix::from_columns(&cols.into_iter().map(|(_, c)| c).collect::<Vec<_>>())
}

/// Gram matrix of `(1/24)∫Q₂(bending)` over a list of fields.
pub fn bending_gram<E: Elasticity>(
    chart: &SurfaceChart,
    fields: &[VectorField3],
    elasticity: &E,
) -> Result<DMatrix<f64>> {
    let forms: Vec<Vec<Sym2>> = fields
        .par_iter()
        .map(|f| bending_frame(chart, f))
        .collect::<Result<_>>()?;
    let n = fields.len();
    let w = chart.weights();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..chart.len())
                .map(|k| w[k] * elasticity.q2_bilinear(&forms[i][k], &forms[j][k]))
                .sum::<f64>()
                / 24.0;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Extreme eigenvalues of the bending form on the rigid-free part of a basis.
#[derive(Debug, Clone)]
pub struct CoercivitySpectrum {
    /// Ascending eigenvalues of the bending Gram (mass-normalized modes).
    pub eigenvalues: Vec<f64>,
    pub complement_dim: usize,
}

impl CoercivitySpectrum {
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }

    /// Lowest eigenvalue over the highest (0 when empty).
    pub fn ratio(&self) -> f64 {
        match (self.min(), self.max()) {
            (Some(a), Some(b)) if b > 0.0 => a / b,
            _ => 0.0,
        }
    }
}

pub fn coercivity_spectrum<E: Elasticity>(
    chart: &SurfaceChart,
    basis: &IsometryBasis,
    elasticity: &E,
) -> Result<CoercivitySpectrum> {
    if basis.is_empty() {
        return Err(ShellError::EmptyBasis("coercivity needs a nonempty basis".into()));
    }
    let z = rigid_complement(chart, basis);
    if z.ncols() == 0 {
        return Ok(CoercivitySpectrum { eigenvalues: vec![], complement_dim: 0 });
    }
    let g = bending_gram(chart, &basis.modes, elasticity)?;
    let reduced = z.transpose() * g * &z;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(reduced).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(CoercivitySpectrum { eigenvalues, complement_dim: z.ncols() })
}

/// `∫‖sym∇V‖²` in the frame norm, as a diagnostic.
pub fn strain_energy_norm(chart: &SurfaceChart, v: &VectorField3) -> Result<f64> {
    let b = sym_grad(chart, v)?;
    Ok(chart
        .nodes()
        .iter()
        .zip(&b.0)
        .zip(chart.weights())
        .map(|((n, b), w)| w * frame_form_at(n, b).norm_squared())
        .sum())
}
