use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};

use super::fields::VectorField3;
use super::grid::{DiffOps, Grid};
use crate::error::{Result, ShellError};

const DEGENERATE_TOL: f64 = 1e-10;

/// Position and its first and second parameter derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceJet {
    pub r: Vector3<f64>,
    pub r1: Vector3<f64>,
    pub r2: Vector3<f64>,
    pub r11: Vector3<f64>,
    pub r12: Vector3<f64>,
    pub r22: Vector3<f64>,
}

/// Analytic parametrization of a custom surface.
pub trait SurfaceMap: Send + Sync {
    fn jet(&self, u: [f64; 2]) -> SurfaceJet;
}

/// Profile `g(s)` of a surface of revolution, as polynomial coefficients in `s`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Profile {
    pub coefficients: Vec<f64>,
}

impl Profile {
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Profile { coefficients }
    }

    pub fn constant(radius: f64) -> Self {
        Profile {
            coefficients: vec![radius],
        }
    }

    /// `(g, g', g'')` at `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for &c in self.coefficients.iter().rev() {
            g = g * s + c;
        }
        for (k, &c) in self.coefficients.iter().enumerate().skip(1) {
            g1 += c * k as f64 * s.powi(k as i32 - 1);
        }
        for (k, &c) in self.coefficients.iter().enumerate().skip(2) {
            g2 += c * (k * (k - 1)) as f64 * s.powi(k as i32 - 2);
        }
        (g, g1, g2)
    }
}

/// Custom surface: sampled positions (derivatives by finite differences) or an
/// analytic map.
#[derive(Clone)]
pub enum CustomSurface {
    Sampled(Vec<Vector3<f64>>),
    Analytic(Arc<dyn SurfaceMap>),
}

impl fmt::Debug for CustomSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CustomSurface::Sampled(p) => write!(f, "Sampled({} nodes)", p.len()),
            CustomSurface::Analytic(_) => write!(f, "Analytic(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SurfaceFamily {
    /// `r(u) = (s1 u1, s2 u2, 0)`.
    Plate { stretch: [f64; 2] },
    /// `r(z, θ) = R γ(θ) + z e3`.
    Cylinder { radius: f64 },
    /// `r(s, θ) = g(s) γ(θ) + s e3`.
    Revolution { profile: Profile },
    /// `r(θ, φ) = R (sin θ cos φ, sin θ sin φ, cos θ)`, θ polar.
    SpherePatch { radius: f64 },
    Custom(CustomSurface),
}

impl SurfaceFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceFamily::Plate { .. } => "plate",
            SurfaceFamily::Cylinder { .. } => "cylinder",
            SurfaceFamily::Revolution { .. } => "revolution",
            SurfaceFamily::SpherePatch { .. } => "sphere",
            SurfaceFamily::Custom(_) => "custom",
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            SurfaceFamily::Plate { stretch } => {
                if stretch.iter().any(|s| !(*s > 0.0)) {
                    return Err(ShellError::InvalidParameter(
                        "plate stretch factors must be positive".into(),
                    ));
                }
            }
            SurfaceFamily::Cylinder { radius } | SurfaceFamily::SpherePatch { radius } => {
                if !(*radius > 0.0) {
                    return Err(ShellError::InvalidParameter(format!(
                        "radius must be positive, got {radius}"
                    )));
                }
            }
            SurfaceFamily::Revolution { profile } => {
                if profile.coefficients.is_empty() {
                    return Err(ShellError::InvalidParameter("empty profile".into()));
                }
                for i in 0..grid.n1 {
                    let s = grid.coord(i, 0)[0];
                    let (g, _, _) = profile.eval(s);
                    if !(g > 0.0) {
                        return Err(ShellError::InvalidParameter(format!(
                            "profile g(s) must be positive, g({s}) = {g}"
                        )));
                    }
                }
            }
            SurfaceFamily::Custom(CustomSurface::Sampled(p)) => {
                if p.len() != grid.len() {
                    return Err(ShellError::GridMismatch {
                        expected: grid.len(),
                        got: p.len(),
                    });
                }
            }
            SurfaceFamily::Custom(CustomSurface::Analytic(_)) => {}
        }
        Ok(())
    }

    fn jet(&self, u: [f64; 2]) -> Option<SurfaceJet> {
        let z = Vector3::zeros();
        match self {
            SurfaceFamily::Plate { stretch } => Some(SurfaceJet {
                r: Vector3::new(stretch[0] * u[0], stretch[1] * u[1], 0.0),
                r1: Vector3::new(stretch[0], 0.0, 0.0),
                r2: Vector3::new(0.0, stretch[1], 0.0),
                r11: z,
                r12: z,
                r22: z,
            }),
            SurfaceFamily::Cylinder { radius } => {
                Some(revolution_jet(u, (*radius, 0.0, 0.0)))
            }
            SurfaceFamily::Revolution { profile } => {
                Some(revolution_jet(u, profile.eval(u[0])))
            }
            SurfaceFamily::SpherePatch { radius } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                let r = *radius;
                Some(SurfaceJet {
                    r: Vector3::new(st * cp, st * sp, ct) * r,
                    r1: Vector3::new(ct * cp, ct * sp, -st) * r,
                    r2: Vector3::new(-st * sp, st * cp, 0.0) * r,
                    r11: Vector3::new(-st * cp, -st * sp, -ct) * r,
                    r12: Vector3::new(-ct * sp, ct * cp, 0.0) * r,
                    r22: Vector3::new(-st * cp, -st * sp, 0.0) * r,
                })
            }
            SurfaceFamily::Custom(CustomSurface::Analytic(map)) => Some(map.jet(u)),
            SurfaceFamily::Custom(CustomSurface::Sampled(_)) => None,
        }
    }
}

fn revolution_jet(u: [f64; 2], (g, g1, g2): (f64, f64, f64)) -> SurfaceJet {
    let (s, c) = u[1].sin_cos();
    let gamma = Vector3::new(c, s, 0.0);
    let dgamma = Vector3::new(-s, c, 0.0);
    let e3 = Vector3::z();
    SurfaceJet {
        r: gamma * g + e3 * u[0],
        r1: gamma * g1 + e3,
        r2: dgamma * g,
        r11: gamma * g2,
        r12: dgamma * g1,
        r22: -gamma * g,
    }
}

/// Cached geometry at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub u: [f64; 2],
    pub r: Vector3<f64>,
    pub tangents: [Vector3<f64>; 2],
    pub normal: Vector3<f64>,
    /// ∂_i n.
    pub dnormal: [Vector3<f64>; 2],
    /// g_ij.
    pub metric: Matrix2<f64>,
    /// gⁱʲ.
    pub metric_inv: Matrix2<f64>,
    /// G^{-1/2}.
    pub metric_inv_sqrt: Matrix2<f64>,
    /// √|g|.
    pub area: f64,
    /// h_ij = ∂_i n · ∂_j r.
    pub second_form: Matrix2<f64>,
    /// S^i_j = gⁱᵏ h_kj.
    pub shape: Matrix2<f64>,
}

impl NodeGeometry {
    fn from_jet(u: [f64; 2], jet: &SurfaceJet, node: usize, grid: &Grid) -> Result<Self> {
        let cross = jet.r1.cross(&jet.r2);
        let norm = cross.norm();
        if !(norm >= DEGENERATE_TOL) {
            let (i, j) = grid.split(node);
            return Err(ShellError::DegenerateChart { i, j, norm });
        }
        let normal = cross / norm;
        let tangents = [jet.r1, jet.r2];
        let metric = Matrix2::new(
            jet.r1.dot(&jet.r1),
            jet.r1.dot(&jet.r2),
            jet.r2.dot(&jet.r1),
            jet.r2.dot(&jet.r2),
        );
        let eig = SymmetricEigen::new(metric);
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(ShellError::NonSpdMetric { node });
        }
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        let metric_inv_sqrt =
            eig.eigenvectors * Matrix2::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        let metric_inv = metric
            .try_inverse()
            .ok_or(ShellError::NonSpdMetric { node })?;
        let h12 = -normal.dot(&jet.r12);
        let second_form = Matrix2::new(-normal.dot(&jet.r11), h12, h12, -normal.dot(&jet.r22));
        let shape = metric_inv * second_form;
        // ∂_i n = h_ij g^{jl} r_l
        let dnormal = [0, 1].map(|i| {
            let mut v = Vector3::zeros();
            for j in 0..2 {
                for l in 0..2 {
                    v += tangents[l] * (second_form[(i, j)] * metric_inv[(j, l)]);
                }
            }
            v
        });
        Ok(NodeGeometry {
            u,
            r: jet.r,
            tangents,
            normal,
            dnormal,
            metric,
            metric_inv,
            metric_inv_sqrt,
            area: metric.determinant().sqrt(),
            second_form,
            shape,
        })
    }

    /// Orthonormal tangent frame e_a = Σ_i (G^{-1/2})_{ia} ∂_i r.
    pub fn frame(&self) -> [Vector3<f64>; 2] {
        let m = &self.metric_inv_sqrt;
        [0, 1].map(|a| self.tangents[0] * m[(0, a)] + self.tangents[1] * m[(1, a)])
    }

    /// Shape operator eigenvalues (principal curvatures), ascending.
    pub fn principal_curvatures(&self) -> [f64; 2] {
        let m = self.metric_inv_sqrt;
        let sym = m * self.second_form * m;
        let e = SymmetricEigen::new(sym).eigenvalues;
        let (a, b) = (e[0], e[1]);
        if a <= b {
            [a, b]
        } else {
            [b, a]
        }
    }

    pub fn gauss_curvature(&self) -> f64 {
        self.shape.determinant()
    }

    /// Scalar `Π τ` for τ = Σ c_i ∂_i r given in the chart basis.
    pub fn shape_apply(&self, coeffs: [f64; 2]) -> Vector3<f64> {
        self.dnormal[0] * coeffs[0] + self.dnormal[1] * coeffs[1]
    }

    /// Chart-basis coefficients of the tangential projection of `v`.
    pub fn tangent_coords(&self, v: &Vector3<f64>) -> [f64; 2] {
        let c = [v.dot(&self.tangents[0]), v.dot(&self.tangents[1])];
        [
            self.metric_inv[(0, 0)] * c[0] + self.metric_inv[(0, 1)] * c[1],
            self.metric_inv[(1, 0)] * c[0] + self.metric_inv[(1, 1)] * c[1],
        ]
    }

    /// Tangent vector with covariant components `c_i = (·)·∂_i r`.
    pub fn raise(&self, c: [f64; 2]) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for (i, ci) in c.iter().enumerate() {
            for (j, t) in self.tangents.iter().enumerate() {
                out += t * (self.metric_inv[(i, j)] * ci);
            }
        }
        out
    }
}

/// Discretized parametrized mid-surface.
#[derive(Debug, Clone)]
pub struct SurfaceChart {
    family: SurfaceFamily,
    grid: Grid,
    ops: DiffOps,
    nodes: Vec<NodeGeometry>,
    discrete_tangents: [Vec<Vector3<f64>>; 2],
    weights: Vec<f64>,
}

impl SurfaceChart {
    pub fn build(family: SurfaceFamily, grid: Grid) -> Result<Self> {
        family.validate(&grid)?;
        let ops = DiffOps::new(&grid);
        let coords = grid.coords();
        let jets: Vec<SurfaceJet> = match &family {
            SurfaceFamily::Custom(CustomSurface::Sampled(p)) => {
                let [r1, r2] = ops.gradient(p);
                let r11 = ops.apply(0, &r1);
                let r22 = ops.apply(1, &r2);
                let r12a = ops.apply(1, &r1);
                let r12b = ops.apply(0, &r2);
                (0..grid.len())
                    .map(|k| SurfaceJet {
                        r: p[k],
                        r1: r1[k],
                        r2: r2[k],
                        r11: r11[k],
                        r12: (r12a[k] + r12b[k]) * 0.5,
                        r22: r22[k],
                    })
                    .collect()
            }
            fam => coords
                .iter()
                .map(|&u| fam.jet(u).expect("analytic family"))
                .collect(),
        };
        let nodes = jets
            .iter()
            .enumerate()
            .map(|(k, jet)| NodeGeometry::from_jet(coords[k], jet, k, &grid))
            .collect::<Result<Vec<_>>>()?;
        let positions: Vec<Vector3<f64>> = nodes.iter().map(|n| n.r).collect();
        let discrete_tangents = ops.gradient(&positions);
        let weights = grid
            .parameter_weights()
            .iter()
            .zip(&nodes)
            .map(|(w, n)| w * n.area)
            .collect();
        Ok(SurfaceChart {
            family,
            grid,
            ops,
            nodes,
            discrete_tangents,
            weights,
        })
    }

    /// Plate `[0,1]²` with an `n × n` grid.
    pub fn unit_plate(n: usize) -> Result<Self> {
        Self::build(
            SurfaceFamily::Plate {
                stretch: [1.0, 1.0],
            },
            Grid::new(n, n, [[0.0, 1.0], [0.0, 1.0]], false)?,
        )
    }

    /// Closed cylinder of the given radius over `z ∈ [0, height]`.
    pub fn cylinder(radius: f64, height: f64, n_axial: usize, n_theta: usize) -> Result<Self> {
        Self::build(
            SurfaceFamily::Cylinder { radius },
            Grid::new(
                n_axial,
                n_theta,
                [[0.0, height], [0.0, 2.0 * std::f64::consts::PI]],
                true,
            )?,
        )
    }

    /// Closed surface of revolution over `s ∈ [s0, s1]`.
    pub fn revolution(
        profile: Profile,
        s_range: [f64; 2],
        n_axial: usize,
        n_theta: usize,
    ) -> Result<Self> {
        Self::build(
            SurfaceFamily::Revolution { profile },
            Grid::new(
                n_axial,
                n_theta,
                [s_range, [0.0, 2.0 * std::f64::consts::PI]],
                true,
            )?,
        )
    }

    pub fn family(&self) -> &SurfaceFamily {
        &self.family
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ops(&self) -> &DiffOps {
        &self.ops
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &NodeGeometry {
        &self.nodes[k]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trapezoid weights including the area element.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid-consistent tangents `D_i r` (finite/spectral differences of positions).
    pub fn discrete_tangents(&self) -> &[Vec<Vector3<f64>>; 2] {
        &self.discrete_tangents
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.nodes.iter().map(|n| n.u).collect()
    }

    pub fn positions(&self) -> VectorField3 {
        VectorField3(self.nodes.iter().map(|n| n.r).collect())
    }

    pub fn normals(&self) -> VectorField3 {
        VectorField3(self.nodes.iter().map(|n| n.normal).collect())
    }

    pub fn is_flat(&self) -> bool {
        self.max_second_form() <= 1e-10
    }

    pub fn max_second_form(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.second_form.abs().max())
            .fold(0.0, f64::max)
    }

    pub fn is_revolution(&self) -> bool {
        matches!(
            self.family,
            SurfaceFamily::Cylinder { .. } | SurfaceFamily::Revolution { .. }
        ) && self.grid.periodic2
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(ShellError::GridMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// The same surface moved by the rigid motion `x ↦ R x + shift`.
    pub fn transformed(&self, rot: &Matrix3<f64>, shift: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        for n in &mut out.nodes {
            n.r = rot * n.r + shift;
            n.tangents = n.tangents.map(|t| rot * t);
            n.normal = rot * n.normal;
            n.dnormal = n.dnormal.map(|t| rot * t);
        }
        for t in &mut out.discrete_tangents {
            for v in t.iter_mut() {
                *v = rot * *v;
            }
        }
        out
    }

    /// The same chart with the opposite normal orientation.
    pub fn flipped_normal(&self) -> Self {
        let mut out = self.clone();
        for n in &mut out.nodes {
            n.normal = -n.normal;
            n.dnormal = n.dnormal.map(|t| -t);
            n.second_form = -n.second_form;
            n.shape = -n.shape;
        }
        out
    }
}
