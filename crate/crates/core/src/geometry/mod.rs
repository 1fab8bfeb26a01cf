//! Discrete charts for mid-surfaces: fundamental forms, tangential
//! differential operators, frame conversion and surface quadrature.

mod chart;
mod fields;
mod grid;

pub use chart::{CustomSurface, NodeGeometry, Profile, SurfaceChart, SurfaceFamily, SurfaceJet, SurfaceMap};
pub use fields::{cross_matrix, FormField2, SkewField, Sym2, VectorField3};
pub use grid::{AxisRule, DiffOps, Grid, Zero};

use nalgebra::{Matrix2, Vector3};

use crate::error::{Result, ShellError};

/// `[∂₁V, ∂₂V]` at every node.
pub fn surface_gradient(chart: &SurfaceChart, field: &VectorField3) -> Result<Vec<[Vector3<f64>; 2]>> {
    chart.check_len(field.len())?;
    let [d1, d2] = chart.ops().gradient(&field.0);
    Ok(d1.into_iter().zip(d2).map(|(a, b)| [a, b]).collect())
}

/// Symmetrized surface gradient in chart coordinates,
/// `b_ij = ½(∂_iV·∂_jr + ∂_jV·∂_ir)`.
///
/// The tangents are the grid-consistent `D_i r`, so infinitesimal rigid
/// motions are annihilated to rounding on every chart.
pub fn sym_grad(chart: &SurfaceChart, v: &VectorField3) -> Result<FormField2> {
    let grad = surface_gradient(chart, v)?;
    let [t1, t2] = chart.discrete_tangents();
    Ok(FormField2(
        grad.iter()
            .enumerate()
            .map(|(k, [d1, d2])| {
                Sym2::new(
                    d1.dot(&t1[k]),
                    0.5 * (d1.dot(&t2[k]) + d2.dot(&t1[k])),
                    d2.dot(&t2[k]),
                )
            })
            .collect(),
    ))
}

/// Trapezoid rule weighted by √|g|.
pub fn integrate(chart: &SurfaceChart, f: &[f64]) -> f64 {
    debug_assert_eq!(f.len(), chart.len());
    chart.weights().iter().zip(f).map(|(w, v)| w * v).sum()
}

/// Surface area.
pub fn area(chart: &SurfaceChart) -> f64 {
    chart.weights().iter().sum()
}

/// Componentwise integral of a vector field.
pub fn integrate_vector(chart: &SurfaceChart, f: &VectorField3) -> Vector3<f64> {
    chart
        .weights()
        .iter()
        .zip(&f.0)
        .fold(Vector3::zeros(), |acc, (w, v)| acc + v * *w)
}

/// `G^{-1/2} b G^{-1/2}` at one node: the form in the orthonormal frame.
pub fn frame_form_at(node: &NodeGeometry, b: &Sym2) -> Sym2 {
    let m: Matrix2<f64> = node.metric_inv_sqrt;
    Sym2::from_matrix(&(m * b.to_matrix() * m))
}

pub fn frame_form(chart: &SurfaceChart, b: &FormField2) -> Result<Vec<Sym2>> {
    chart.check_len(b.len())?;
    chart
        .nodes()
        .iter()
        .zip(&b.0)
        .enumerate()
        .map(|(k, (node, b))| {
            if !node.metric_inv_sqrt.iter().all(|x| x.is_finite()) {
                return Err(ShellError::NonSpdMetric { node: k });
            }
            Ok(frame_form_at(node, b))
        })
        .collect()
}
