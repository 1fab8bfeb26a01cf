use std::f64::consts::PI;
use std::ops::{Add, Mul};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Result, ShellError};

/// Tensor-product node grid on a parameter rectangle.
///
/// Nodes are stored row-major with the second coordinate varying fastest:
/// `index(i, j) = i * n2 + j`. In a periodic second direction the node
/// `u2 = b2` is identified with `u2 = a2` and not stored.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub domain: [[f64; 2]; 2],
    pub periodic2: bool,
}

impl Grid {
    pub fn new(n1: usize, n2: usize, domain: [[f64; 2]; 2], periodic2: bool) -> Result<Self> {
        if n1 < 8 || n2 < 8 {
            return Err(ShellError::InvalidParameter(format!(
                "grid must be at least 8x8, got {n1}x{n2}"
            )));
        }
        for (k, [a, b]) in domain.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(ShellError::InvalidParameter(format!(
                    "domain side {} must satisfy a < b, got [{a}, {b}]",
                    k + 1
                )));
            }
        }
        Ok(Grid {
            n1,
            n2,
            domain,
            periodic2,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    #[inline]
    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    pub fn spacing(&self) -> [f64; 2] {
        let [[a1, b1], [a2, b2]] = self.domain;
        let h2 = if self.periodic2 {
            (b2 - a2) / self.n2 as f64
        } else {
            (b2 - a2) / (self.n2 - 1) as f64
        };
        [(b1 - a1) / (self.n1 - 1) as f64, h2]
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        let [h1, h2] = self.spacing();
        [
            self.domain[0][0] + i as f64 * h1,
            self.domain[1][0] + j as f64 * h2,
        ]
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.split(k);
                self.coord(i, j)
            })
            .collect()
    }

    /// Trapezoid weights in parameter space (no area element).
    pub fn parameter_weights(&self) -> Vec<f64> {
        let [h1, h2] = self.spacing();
        let w1 = |i: usize| {
            if i == 0 || i == self.n1 - 1 {
                0.5 * h1
            } else {
                h1
            }
        };
        let w2 = |j: usize| {
            if !self.periodic2 && (j == 0 || j == self.n2 - 1) {
                0.5 * h2
            } else {
                h2
            }
        };
        (0..self.len())
            .map(|k| {
                let (i, j) = self.split(k);
                w1(i) * w2(j)
            })
            .collect()
    }
}

/// One-dimensional differentiation rule along a grid axis.
#[derive(Debug, Clone)]
pub enum AxisRule {
    /// Second-order central differences; the end rows are one-sided with an
    /// error term matched to the interior one.
    FiniteDifference { n: usize, h: f64 },
    /// Trigonometric (Fourier) differentiation on a periodic axis; exact for
    /// trigonometric polynomials of degree below n/2. Dense n×n matrix.
    Spectral { n: usize, matrix: Vec<f64> },
}

impl AxisRule {
    pub fn finite_difference(n: usize, h: f64) -> Self {
        AxisRule::FiniteDifference { n, h }
    }

    pub fn spectral(n: usize, period: f64) -> Self {
        let step = 2.0 * PI / n as f64;
        let scale = 2.0 * PI / period;
        let mut matrix = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let d = j as f64 - k as f64;
                let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                let x = 0.5 * d * step;
                let entry = if n % 2 == 1 {
                    0.5 * sign / x.sin()
                } else {
                    0.5 * sign / x.tan()
                };
                matrix[j * n + k] = scale * entry;
            }
        }
        AxisRule::Spectral { n, matrix }
    }

    pub fn len(&self) -> usize {
        match self {
            AxisRule::FiniteDifference { n, .. } | AxisRule::Spectral { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nonzero weights of row `i`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match self {
            AxisRule::FiniteDifference { n, h } => {
                let (n, h) = (*n, *h);
                // The end rows are one-sided with leading error h²f'''/6, the
                // same as the central rows, so the error field stays smooth
                // and composed derivatives keep a clean h² expansion.
                const END: [f64; 5] = [-2.5, 5.5, -5.0, 2.5, -0.5];
                if i == 0 {
                    (0..5).map(|k| (k, END[k] / h)).collect()
                } else if i == n - 1 {
                    (0..5).map(|k| (n - 1 - k, -END[k] / h)).collect()
                } else {
                    let c = 0.5 / h;
                    vec![(i - 1, -c), (i + 1, c)]
                }
            }
            AxisRule::Spectral { n, matrix } => (0..*n)
                .filter(|&k| k != i)
                .map(|k| (k, matrix[i * n + k]))
                .collect(),
        }
    }
}

/// Differentiation operators for both chart directions.
#[derive(Debug, Clone)]
pub struct DiffOps {
    n1: usize,
    n2: usize,
    rows1: Vec<Vec<(usize, f64)>>,
    rows2: Vec<Vec<(usize, f64)>>,
}

impl DiffOps {
    pub fn new(grid: &Grid) -> Self {
        let [h1, h2] = grid.spacing();
        let rule1 = AxisRule::finite_difference(grid.n1, h1);
        let rule2 = if grid.periodic2 {
            AxisRule::spectral(grid.n2, grid.domain[1][1] - grid.domain[1][0])
        } else {
            AxisRule::finite_difference(grid.n2, h2)
        };
        DiffOps {
            n1: grid.n1,
            n2: grid.n2,
            rows1: (0..grid.n1).map(|i| rule1.row(i)).collect(),
            rows2: (0..grid.n2).map(|j| rule2.row(j)).collect(),
        }
    }

    /// Sparse row of ∂_axis at node `k`, as (node, weight) pairs.
    pub fn stencil(&self, axis: usize, k: usize) -> Vec<(usize, f64)> {
        let (i, j) = (k / self.n2, k % self.n2);
        match axis {
            0 => self.rows1[i]
                .iter()
                .map(|&(ii, w)| (ii * self.n2 + j, w))
                .collect(),
            _ => self.rows2[j]
                .iter()
                .map(|&(jj, w)| (i * self.n2 + jj, w))
                .collect(),
        }
    }

    /// Derivative of a nodal field along `axis` (0 = u1, 1 = u2).
    pub fn apply<T>(&self, axis: usize, f: &[T]) -> Vec<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        debug_assert_eq!(f.len(), self.n1 * self.n2);
        let n2 = self.n2;
        (0..f.len())
            .map(|k| {
                let (i, j) = (k / n2, k % n2);
                let mut acc = T::zero();
                match axis {
                    0 => {
                        for &(ii, w) in &self.rows1[i] {
                            acc = acc + f[ii * n2 + j] * w;
                        }
                    }
                    _ => {
                        for &(jj, w) in &self.rows2[j] {
                            acc = acc + f[i * n2 + jj] * w;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn gradient<T>(&self, f: &[T]) -> [Vec<T>; 2]
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        [self.apply(0, f), self.apply(1, f)]
    }
}

/// Values that can be differentiated componentwise on the grid.
pub trait Zero {
    fn zero() -> Self;
}

impl Zero for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Zero for Vector3<f64> {
    fn zero() -> Self {
        Vector3::zeros()
    }
}

impl Zero for Matrix3<f64> {
    fn zero() -> Self {
        Matrix3::zeros()
    }
}

impl Zero for rustfft::num_complex::Complex64 {
    fn zero() -> Self {
        rustfft::num_complex::Complex64::new(0.0, 0.0)
    }
}
