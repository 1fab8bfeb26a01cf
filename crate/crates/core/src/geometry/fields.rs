use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix2, Matrix3, Vector3};

/// Symmetric 2×2 tensor stored by its three independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        m11: 0.0,
        m12: 0.0,
        m22: 0.0,
    };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Sym2 { m11, m12, m22 }
    }

    /// Symmetric part of an arbitrary 2×2 matrix.
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Sym2 {
            m11: m[(0, 0)],
            m12: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            m22: m[(1, 1)],
        }
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.m11, self.m12, self.m12, self.m22)
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn norm_squared(&self) -> f64 {
        self.m11 * self.m11 + 2.0 * self.m12 * self.m12 + self.m22 * self.m22
    }

    pub fn max_abs(&self) -> f64 {
        self.m11.abs().max(self.m12.abs()).max(self.m22.abs())
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.m11 - o.m11, self.m12 - o.m12, self.m22 - o.m22)
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, s: f64) -> Sym2 {
        Sym2::new(self.m11 * s, self.m12 * s, self.m22 * s)
    }
}

impl super::grid::Zero for Sym2 {
    fn zero() -> Self {
        Sym2::ZERO
    }
}

/// Nodal 3-vector field (displacements or loads).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorField3(pub Vec<Vector3<f64>>);

impl VectorField3 {
    pub fn zeros(len: usize) -> Self {
        VectorField3(vec![Vector3::zeros(); len])
    }

    pub fn from_fn(coords: &[[f64; 2]], f: impl Fn([f64; 2]) -> Vector3<f64>) -> Self {
        VectorField3(coords.iter().map(|&u| f(u)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField3(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        VectorField3(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        VectorField3(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += xi * a;
        }
    }

    /// Left-multiplies every value by `m`.
    pub fn transformed(&self, m: &Matrix3<f64>) -> Self {
        VectorField3(self.0.iter().map(|v| m * v).collect())
    }

    /// Flattened `[x0, y0, z0, x1, ...]` coefficients.
    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        VectorField3(
            flat.chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Nodal symmetric tangential form in chart coordinates, b_ij = ∂_i r · B ∂_j r.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormField2(pub Vec<Sym2>);

impl FormField2 {
    pub fn zeros(len: usize) -> Self {
        FormField2(vec![Sym2::ZERO; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        FormField2(self.0.iter().map(|b| *b * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        FormField2(self.0.iter().zip(&other.0).map(|(a, b)| *a + *b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        FormField2(self.0.iter().zip(&other.0).map(|(a, b)| *a - *b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(Sym2::max_abs).fold(0.0, f64::max)
    }
}

/// Nodal 3×3 matrix field, skew-symmetric up to the reported residual.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkewField(pub Vec<Matrix3<f64>>);

impl SkewField {
    pub fn zeros(len: usize) -> Self {
        SkewField(vec![Matrix3::zeros(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn skew_residual(&self) -> f64 {
        self.0
            .iter()
            .map(|a| (a + a.transpose()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        SkewField(self.0.iter().map(|a| a * s).collect())
    }
}

/// Skew matrix `[ω]×` with `[ω]× v = ω × v`.
pub fn cross_matrix(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}
