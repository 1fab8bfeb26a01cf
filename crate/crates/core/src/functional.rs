//! Limit energies, dead loads and the set of load-maximizing rotations.

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::Serialize;

use crate::error::{Result, ShellError};
use crate::geometry::{frame_form_at, integrate, FormField2, SkewField, SurfaceChart, Sym2, VectorField3};
use crate::isometry::{bending_frame, discrete_frames, extend_a};
use crate::material::Elasticity;

/// `b_ij = (A² ∂_ir)·∂_jr`.
pub fn a_squared_tan(chart: &SurfaceChart, a: &SkewField) -> Result<FormField2> {
    chart.check_len(a.len())?;
    let frames = discrete_frames(chart)?;
    Ok(FormField2(
        frames
            .iter()
            .zip(&a.0)
            .map(|(f, a)| {
                let a2 = a * a;
                let [t1, t2] = f.tangents;
                let (x1, x2) = (a2 * t1, a2 * t2);
                Sym2::new(x1.dot(&t1), 0.5 * (x1.dot(&t2) + x2.dot(&t1)), x2.dot(&t2))
            })
            .collect(),
    ))
}

fn integrate_q2<E: Elasticity>(chart: &SurfaceChart, forms: &[Sym2], e: &E) -> f64 {
    let vals: Vec<f64> = forms.iter().map(|f| e.q2(f)).collect();
    integrate(chart, &vals)
}

/// `(1/24) ∫ Q₂((∇(An) − AΠ)_tan)`.
pub fn bending_energy<E: Elasticity>(chart: &SurfaceChart, v: &VectorField3, e: &E) -> Result<f64> {
    let forms = bending_frame(chart, v)?;
    Ok(integrate_q2(chart, &forms, e) / 24.0)
}

/// The membrane strain `B − (κ/2)(A²)_tan` in chart coordinates.
pub fn effective_strain(chart: &SurfaceChart, b: &FormField2, a: &SkewField, kappa: f64) -> Result<FormField2> {
    chart.check_len(b.len())?;
    let a2 = a_squared_tan(chart, a)?;
    Ok(b.sub(&a2.scaled(0.5 * kappa)))
}

/// `(1/2) ∫ Q₂(B − (κ/2)(A²)_tan)`.
pub fn stretching_energy<E: Elasticity>(
    chart: &SurfaceChart,
    b: &FormField2,
    a: &SkewField,
    kappa: f64,
    e: &E,
) -> Result<f64> {
    let strain = effective_strain(chart, b, a, kappa)?;
    let forms: Vec<Sym2> = chart
        .nodes()
        .iter()
        .zip(&strain.0)
        .map(|(n, s)| frame_form_at(n, s))
        .collect();
    Ok(0.5 * integrate_q2(chart, &forms, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub stretching: f64,
    pub bending: f64,
    pub load: f64,
    pub total: f64,
    pub kappa: f64,
}

/// `I(V, B) = ½∫Q₂(B − (κ/2)(A²)_tan) + (1/24)∫Q₂(bending)`.
///
/// With `κ = 0` the stretching term is dropped entirely.
pub fn total_i<E: Elasticity>(
    chart: &SurfaceChart,
    v: &VectorField3,
    b: &FormField2,
    kappa: f64,
    e: &E,
) -> Result<EnergyBreakdown> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(ShellError::InvalidParameter(format!("kappa must be finite and nonnegative, got {kappa}")));
    }
    let bending = bending_energy(chart, v, e)?;
    let stretching = if kappa == 0.0 {
        0.0
    } else {
        let (a, _) = extend_a(chart, v)?;
        stretching_energy(chart, b, &a, kappa, e)?
    };
    Ok(EnergyBreakdown {
        stretching,
        bending,
        load: 0.0,
        total: stretching + bending,
        kappa,
    })
}

/// `J = I − ∫ f·Q̄V`.
pub fn total_j<E: Elasticity>(
    chart: &SurfaceChart,
    v: &VectorField3,
    b: &FormField2,
    kappa: f64,
    e: &E,
    load: &LoadSpec,
    q: &Matrix3<f64>,
) -> Result<EnergyBreakdown> {
    check_rotation(q)?;
    let mut out = total_i(chart, v, b, kappa, e)?;
    out.load = load.work(chart, q, v)?;
    out.total = out.stretching + out.bending - out.load;
    Ok(out)
}

pub fn check_rotation(q: &Matrix3<f64>) -> Result<()> {
    let orthogonality = (q.transpose() * q - Matrix3::identity()).abs().max();
    let det = q.determinant();
    if orthogonality > 1e-10 || (det - 1.0).abs() > 1e-10 || !det.is_finite() {
        return Err(ShellError::NotARotation { orthogonality, det });
    }
    Ok(())
}

/// A dead load on the mid-surface with its moments.
#[derive(Debug, Clone)]
pub struct LoadSpec {
    /// Force per unit area at every node.
    pub f: VectorField3,
    /// `F̂ = ∫ f⊗x`.
    pub moment: Matrix3<f64>,
    /// `∫ f`.
    pub mean: Vector3<f64>,
    /// `∫ f × x`.
    pub torque: Vector3<f64>,
}

impl LoadSpec {
    pub fn new(chart: &SurfaceChart, f: VectorField3) -> Result<Self> {
        chart.check_len(f.len())?;
        if !f.is_finite() {
            return Err(ShellError::InvalidParameter("load field is not finite".into()));
        }
        let w = chart.weights();
        let mut moment = Matrix3::zeros();
        let mut mean = Vector3::zeros();
        let mut torque = Vector3::zeros();
        for ((fk, node), wk) in f.0.iter().zip(chart.nodes()).zip(w) {
            moment += fk * node.r.transpose() * *wk;
            mean += fk * *wk;
            torque += fk.cross(&node.r) * *wk;
        }
        Ok(LoadSpec { f, moment, mean, torque })
    }

    /// Subtracts the area-weighted mean so that `∫ f = 0`.
    pub fn mean_removed(chart: &SurfaceChart, mut f: VectorField3) -> Result<Self> {
        chart.check_len(f.len())?;
        let total: f64 = chart.weights().iter().sum();
        let mean = chart
            .weights()
            .iter()
            .zip(&f.0)
            .fold(Vector3::zeros(), |a, (w, v)| a + v * *w)
            / total;
        for v in &mut f.0 {
            *v -= mean;
        }
        Self::new(chart, f)
    }

    pub fn zero(chart: &SurfaceChart) -> Self {
        Self::new(chart, VectorField3::zeros(chart.len())).expect("zero load is valid")
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.mean.norm() <= tol
    }

    pub fn scaled(&self, t: f64) -> Self {
        LoadSpec {
            f: self.f.scaled(t),
            moment: self.moment * t,
            mean: self.mean * t,
            torque: self.torque * t,
        }
    }

    /// `∫ f·Q V`.
    pub fn work(&self, chart: &SurfaceChart, q: &Matrix3<f64>, v: &VectorField3) -> Result<f64> {
        chart.check_len(v.len())?;
        let vals: Vec<f64> = self.f.0.iter().zip(&v.0).map(|(f, v)| f.dot(&(q * v))).collect();
        Ok(integrate(chart, &vals))
    }

    /// The load moved with the chart by the rotation `R`.
    pub fn rotated(&self, chart: &SurfaceChart, r: &Matrix3<f64>) -> Result<Self> {
        Self::new(chart, self.f.transformed(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationOptions {
    /// Candidate acceptance tolerance; `None` means `1e-9·‖F̂‖`.
    pub tol: Option<f64>,
    /// Candidates drawn from a degenerate maximizer set.
    pub samples: usize,
    pub seed: u64,
}

impl Default for RotationOptions {
    fn default() -> Self {
        RotationOptions { tol: None, samples: 64, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct RotationCandidate {
    pub q: Matrix3<f64>,
    /// `tr(QᵀF̂)`.
    pub action: f64,
    /// Torque of the rotated load, `∫ (Qᵀf) × x`.
    pub torque: Vector3<f64>,
    /// `QᵀF̂` symmetric within tolerance.
    pub linearized_ok: bool,
}

#[derive(Debug, Clone)]
pub struct RotationSetResult {
    pub m: f64,
    pub candidates: Vec<RotationCandidate>,
    pub degenerate: bool,
    pub linearized_ok: bool,
    pub tol: f64,
}

impl RotationSetResult {
    pub fn rotations(&self) -> Vec<Matrix3<f64>> {
        self.candidates.iter().map(|c| c.q).collect()
    }
}

fn quaternion_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    // homogeneous quadratic form in (w, x, y, z); a rotation on the unit sphere
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// Symmetric `N` with `qᵀNq = tr(R(q)ᵀF̂)` for unit quaternions `q`.
fn action_matrix(fhat: &Matrix3<f64>) -> Matrix4<f64> {
    let act = |q: &Vector4<f64>| quaternion_rotation(q).component_mul(fhat).sum();
    let e = |i: usize| Vector4::from_fn(|k, _| if k == i { 1.0 } else { 0.0 });
    Matrix4::from_fn(|a, b| {
        if a == b {
            act(&e(a))
        } else {
            0.5 * (act(&(e(a) + e(b))) - act(&e(a)) - act(&e(b)))
        }
    })
}

fn to_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner()
}

/// Maximizers of `Q ↦ tr(QᵀF̂)` over SO(3).
///
/// The optimum comes from the SVD of `F̂`. When `σ₂ + sσ₃` vanishes the
/// maximizer is not unique; the top eigenspace of the quaternion form is then
/// sampled (evenly on a great circle, or randomly with the given seed).
pub fn rotation_set(load: &LoadSpec, opts: &RotationOptions) -> RotationSetResult {
    let fhat = load.moment;
    let scale = fhat.norm();
    let tol = opts.tol.unwrap_or(1e-9 * scale);
    let svd = fhat.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = idx.map(|i| svd.singular_values[i]);
    let u = Matrix3::from_columns(&idx.map(|i| u.column(i).into_owned()));
    let v = Matrix3::from_columns(&idx.map(|i| vt.row(i).transpose()));
    let s = (u * v.transpose()).determinant().signum();
    let m = sigma[0] + sigma[1] + s * sigma[2];
    let q_star = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, s)) * v.transpose();
    let degenerate = sigma[1] + s * sigma[2] <= tol.max(1e-9 * scale);

    let action = |q: &Matrix3<f64>| (q.transpose() * fhat).trace();
    let mut rotations = Vec::new();
    let id = Matrix3::identity();
    if action(&id) >= m - tol {
        rotations.push(id);
    }
    if rotations.is_empty() || (q_star - id).abs().max() > 1e-12 {
        rotations.push(q_star);
    }
    if degenerate {
        let eig = SymmetricEigen::new(action_matrix(&fhat));
        let top = eig.eigenvalues.max();
        let space: Vec<Vector4<f64>> = (0..4)
            .filter(|&i| eig.eigenvalues[i] >= top - tol.max(1e-9 * scale) - 1e-14)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for k in 0..opts.samples {
            let q = if space.len() == 2 {
                let phi = std::f64::consts::PI * k as f64 / opts.samples as f64;
                space[0] * phi.cos() + space[1] * phi.sin()
            } else {
                let mut q = Vector4::zeros();
                for b in &space {
                    let g: f64 = rng.random::<f64>() * 2.0 - 1.0;
                    q += b * g;
                }
                if q.norm() < 1e-8 {
                    continue;
                }
                q.normalize()
            };
            rotations.push(to_rotation(&q));
        }
    }
    let candidates: Vec<RotationCandidate> = rotations
        .into_iter()
        .filter(|q| action(q) >= m - tol - 1e-12 * scale.max(1.0))
        .map(|q| {
            let rotated = q.transpose() * fhat;
            let skew = (rotated - rotated.transpose()) * 0.5;
            let torque = Vector3::new(
                rotated[(1, 2)] - rotated[(2, 1)],
                rotated[(2, 0)] - rotated[(0, 2)],
                rotated[(0, 1)] - rotated[(1, 0)],
            );
            RotationCandidate {
                q,
                action: action(&q),
                torque,
                linearized_ok: skew.norm() <= tol.max(1e-9 * scale) + 1e-14,
            }
        })
        .collect();
    let linearized_ok = candidates.iter().all(|c| c.linearized_ok);
    RotationSetResult { m, candidates, degenerate, linearized_ok, tol }
}
