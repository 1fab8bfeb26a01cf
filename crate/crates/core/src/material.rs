//! Stored-energy density, its Hessian form at the identity, and the
//! relaxation of that form over normal strain components.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::error::{Result, ShellError};
use crate::geometry::Sym2;

/// Isotropic Lamé moduli.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ElasticModuli {
    mu: f64,
    lambda: f64,
}

impl ElasticModuli {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(ShellError::InvalidParameter(format!(
                "shear modulus must be positive, got {mu}"
            )));
        }
        if !(2.0 * mu + lambda > 0.0 && lambda.is_finite()) {
            return Err(ShellError::InvalidParameter(format!(
                "2 mu + lambda must be positive, got mu = {mu}, lambda = {lambda}"
            )));
        }
        Ok(ElasticModuli { mu, lambda })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The same material with both moduli multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        ElasticModuli {
            mu: self.mu * s,
            lambda: self.lambda * s,
        }
    }

    /// Coefficient of (tr F)² in the relaxed form.
    pub fn relaxed_lambda(&self) -> f64 {
        2.0 * self.mu * self.lambda / (2.0 * self.mu + self.lambda)
    }
}

/// Minimal value of the relaxed form and its minimizing vector.
///
/// `c` is expressed in the local frame `(e₁, e₂, n)`; the relaxed strain is
/// `F + c⊗n + n⊗c`, so the normal-normal strain entry equals `2 c₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationResult {
    pub value: f64,
    pub c: Vector3<f64>,
}

impl RelaxationResult {
    /// The normal-normal entry `2 c·n` of the relaxed strain.
    pub fn normal_strain(&self) -> f64 {
        2.0 * self.c.z
    }
}

/// A quadratic elastic form on strains with its tangential relaxation.
pub trait Elasticity: Sync {
    /// `Q₃(G) = D²W(Id)(G, G)`.
    fn q3(&self, g: &Matrix3<f64>) -> f64;

    /// Relaxation of a tangential form given in an orthonormal frame.
    fn relax(&self, f: &Sym2) -> RelaxationResult;

    fn q2(&self, f: &Sym2) -> f64 {
        self.relax(f).value
    }

    /// Symmetric bilinear form associated with `q2`.
    fn q2_bilinear(&self, a: &Sym2, b: &Sym2) -> f64 {
        0.25 * (self.q2(&(*a + *b)) - self.q2(&(*a - *b)))
    }
}

/// Green–St Venant strain and St Venant–Kirchhoff energy density.
pub fn w_density(f: &Matrix3<f64>, moduli: &ElasticModuli) -> f64 {
    let e = (f.transpose() * f - Matrix3::identity()) * 0.5;
    moduli.mu * e.norm_squared() + 0.5 * moduli.lambda * e.trace().powi(2)
}

pub fn q3(g: &Matrix3<f64>, moduli: &ElasticModuli) -> f64 {
    let s = (g + g.transpose()) * 0.5;
    2.0 * moduli.mu * s.norm_squared() + moduli.lambda * g.trace().powi(2)
}

/// Closed-form relaxation for isotropic moduli.
pub fn q2_relax(f: &Sym2, moduli: &ElasticModuli) -> RelaxationResult {
    let tr = f.trace();
    let (mu, lambda) = (moduli.mu, moduli.lambda);
    RelaxationResult {
        value: 2.0 * mu * f.norm_squared() + moduli.relaxed_lambda() * tr * tr,
        c: Vector3::new(0.0, 0.0, -lambda * tr / (2.0 * (2.0 * mu + lambda))),
    }
}

/// Embeds a frame form as the tangential block of a 3×3 matrix.
pub fn embed(f: &Sym2) -> Matrix3<f64> {
    Matrix3::new(f.m11, f.m12, 0.0, f.m12, f.m22, 0.0, 0.0, 0.0, 0.0)
}

/// `min_c Q₃(F + c⊗n + n⊗c)` by its normal equations.
///
/// `f` is any 3×3 matrix whose tangential minor is the form to relax and `n`
/// the unit normal. Works for any [`Elasticity`] through polarization of `q3`.
pub fn q2_numeric<E: Elasticity + ?Sized>(
    f: &Matrix3<f64>,
    n: &Vector3<f64>,
    elasticity: &E,
) -> Result<RelaxationResult> {
    let bil = |a: &Matrix3<f64>, b: &Matrix3<f64>| {
        0.25 * (elasticity.q3(&(a + b)) - elasticity.q3(&(a - b)))
    };
    let dirs = [Vector3::x(), Vector3::y(), Vector3::z()]
        .map(|e| e * n.transpose() + n * e.transpose());
    let mut hess = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for a in 0..3 {
        rhs[a] = -bil(f, &dirs[a]);
        for b in 0..3 {
            hess[(a, b)] = bil(&dirs[a], &dirs[b]);
        }
    }
    let chol = hess.cholesky().ok_or_else(|| {
        ShellError::Singular("relaxation normal equations are not positive definite".into())
    })?;
    let c = chol.solve(&rhs);
    let relaxed = f + c * n.transpose() + n * c.transpose();
    Ok(RelaxationResult {
        value: elasticity.q3(&relaxed),
        c,
    })
}

impl Elasticity for ElasticModuli {
    fn q3(&self, g: &Matrix3<f64>) -> f64 {
        q3(g, self)
    }

    fn relax(&self, f: &Sym2) -> RelaxationResult {
        q2_relax(f, self)
    }

    fn q2(&self, f: &Sym2) -> f64 {
        let tr = f.trace();
        2.0 * self.mu * f.norm_squared() + self.relaxed_lambda() * tr * tr
    }
}

/// General (anisotropic) Hessian form, as a symmetric 6×6 matrix acting on
/// Voigt strains `(ε₁₁, ε₂₂, ε₃₃, 2ε₂₃, 2ε₁₃, 2ε₁₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicStiffness {
    voigt: Matrix6<f64>,
}

impl AnisotropicStiffness {
    pub fn new(voigt: Matrix6<f64>) -> Result<Self> {
        if (voigt - voigt.transpose()).abs().max() > 1e-12 * voigt.abs().max().max(1.0) {
            return Err(ShellError::InvalidParameter(
                "stiffness matrix must be symmetric".into(),
            ));
        }
        if voigt.cholesky().is_none() {
            return Err(ShellError::InvalidParameter(
                "stiffness matrix must be positive definite".into(),
            ));
        }
        Ok(AnisotropicStiffness { voigt })
    }

    pub fn isotropic(m: &ElasticModuli) -> Self {
        let mut c = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = m.lambda;
            }
            c[(i, i)] += 2.0 * m.mu;
            c[(i + 3, i + 3)] = m.mu;
        }
        AnisotropicStiffness { voigt: c }
    }

    fn voigt_strain(g: &Matrix3<f64>) -> Vector6<f64> {
        let s = (g + g.transpose()) * 0.5;
        Vector6::new(
            s[(0, 0)],
            s[(1, 1)],
            s[(2, 2)],
            2.0 * s[(1, 2)],
            2.0 * s[(0, 2)],
            2.0 * s[(0, 1)],
        )
    }
}

impl Elasticity for AnisotropicStiffness {
    fn q3(&self, g: &Matrix3<f64>) -> f64 {
        let e = Self::voigt_strain(g);
        (e.transpose() * self.voigt * e)[0]
    }

    fn relax(&self, f: &Sym2) -> RelaxationResult {
        q2_numeric(&embed(f), &Vector3::z(), self)
            .expect("positive definite stiffness gives a positive definite relaxation")
    }
}
