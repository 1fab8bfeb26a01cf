//! Minimization of the limit energy with dead loads over the discrete
//! isometry space, a membrane-strain dictionary and the rotation candidates.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, ShellError};
use crate::functional::{check_rotation, LoadSpec};
use crate::geometry::{frame_form_at, sym_grad, FormField2, SurfaceChart, Sym2, VectorField3};
use crate::isometry::{bending_gram, discrete_frames, extend_a, rigid_complement, IsometryBasis};
use crate::material::Elasticity;
use crate::membrane::Dictionary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when `‖∇J‖ ≤ tol·(1 + ‖ℓ‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra random initializations per candidate.
    pub restarts: usize,
    pub seed: u64,
    /// Relative step of the central-difference gradient.
    pub fd_step: f64,
    pub max_backtracks: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-8,
            max_iter: 200,
            restarts: 0,
            seed: 0,
            fd_step: 1e-5,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CandidateOutcome {
    pub q: Matrix3<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best values of the individual starts (first is `ξ = 0`).
    pub start_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MinimizationResult {
    pub v: VectorField3,
    /// Coefficients on the rigid-free coordinates of the basis.
    pub xi: Vec<f64>,
    pub b_coefficients: Vec<f64>,
    pub b: FormField2,
    pub q: Matrix3<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub candidates: Vec<CandidateOutcome>,
    /// Objective after every accepted iteration of the winning run.
    pub history: Vec<f64>,
    /// `−¼‖ℓ‖²/λ_min` for the winning candidate.
    pub lower_bound: f64,
    /// The line search ran out of backtracking steps in some run.
    pub line_search_exhausted: bool,
    /// The bending Gram was numerically singular on the rigid-free space.
    pub singular_gram: bool,
}

/// The isometry basis reduced to its rigid-free part with everything the
/// energies need precomputed.
pub struct ReducedModel<'a> {
    chart: &'a SurfaceChart,
    /// Rigid-free fields `U_j = Σ_i Z_ij V_i`.
    pub fields: Vec<VectorField3>,
    /// `(1/24)∫Q₂` Gram on the fields.
    pub gram: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Skew extensions stacked as `9·node + 3·row + col` by field.
    a_stack: DMatrix<f64>,
}

impl<'a> ReducedModel<'a> {
    pub fn new<E: Elasticity>(chart: &'a SurfaceChart, basis: &IsometryBasis, e: &E) -> Result<Self> {
        if basis.is_empty() {
            return Err(ShellError::EmptyBasis("minimization needs isometry modes".into()));
        }
        let z = rigid_complement(chart, basis);
        if z.ncols() == 0 {
            return Err(ShellError::EmptyBasis("basis contains only rigid motions".into()));
        }
        let fields: Vec<VectorField3> = (0..z.ncols())
            .map(|j| {
                let mut f = VectorField3::zeros(chart.len());
                for i in 0..basis.len() {
                    f.axpy(z[(i, j)], &basis.modes[i]);
                }
                f
            })
            .collect();
        let gram = bending_gram(chart, &fields, e)?;
        let gram = (&gram + gram.transpose()) * 0.5;
        let eig = SymmetricEigen::new(gram.clone());
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        let extensions: Vec<Vec<f64>> = fields
            .par_iter()
            .map(|f| {
                extend_a(chart, f).map(|(a, _)| a.0.iter().flat_map(|m| m.transpose().iter().copied().collect::<Vec<_>>()).collect())
            })
            .collect::<Result<_>>()?;
        let a_stack = DMatrix::from_fn(9 * chart.len(), fields.len(), |r, c| extensions[c][r]);
        Ok(ReducedModel { chart, fields, gram, lambda_min, lambda_max, a_stack })
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn combine(&self, xi: &[f64]) -> VectorField3 {
        let mut v = VectorField3::zeros(self.chart.len());
        for (f, c) in self.fields.iter().zip(xi) {
            v.axpy(*c, f);
        }
        v
    }

    /// `ℓ_j = ∫ f·Q U_j`.
    pub fn load_vector(&self, load: &LoadSpec, q: &Matrix3<f64>) -> Result<DVector<f64>> {
        let vals = self
            .fields
            .iter()
            .map(|f| load.work(self.chart, q, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    fn singular(&self) -> bool {
        !(self.lambda_min > 1e-12 * self.lambda_max.max(f64::MIN_POSITIVE))
    }

    /// Minimizes `ξᵀGξ − ℓᵀξ` per candidate (the `κ = 0` problem).
    pub fn minimize_quadratic(&self, load: &LoadSpec, candidates: &[Matrix3<f64>]) -> Result<MinimizationResult> {
        if candidates.is_empty() {
            return Err(ShellError::InvalidParameter("no rotation candidates".into()));
        }
        let eig = SymmetricEigen::new(self.gram.clone());
        let cutoff = 1e-12 * self.lambda_max.max(f64::MIN_POSITIVE);
        let solve = |l: &DVector<f64>| -> DVector<f64> {
            // ξ = ½ G⁺ ℓ
            let mut x = DVector::zeros(l.len());
            for (i, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam > cutoff {
                    let v = eig.eigenvectors.column(i);
                    x += v * (0.5 * v.dot(l) / lam);
                }
            }
            x
        };
        let mut outcomes = Vec::with_capacity(candidates.len());
        let mut best: Option<(usize, DVector<f64>, f64, f64)> = None;
        for (ci, q) in candidates.iter().enumerate() {
            check_rotation(q)?;
            let l = self.load_vector(load, q)?;
            let xi = solve(&l);
            let value = (xi.transpose() * &self.gram * &xi)[0] - l.dot(&xi);
            let grad = (&self.gram * &xi) * 2.0 - &l;
            outcomes.push(CandidateOutcome {
                q: *q,
                value,
                gradient_norm: grad.norm(),
                iterations: 1,
                converged: true,
                start_values: vec![value],
            });
            if best.as_ref().is_none_or(|b| value < b.2) {
                best = Some((ci, xi, value, l.norm()));
            }
        }
        let (ci, xi, value, lnorm) = best.expect("at least one candidate");
        let xi: Vec<f64> = xi.iter().copied().collect();
        Ok(MinimizationResult {
            v: self.combine(&xi),
            xi,
            b_coefficients: vec![],
            b: FormField2::zeros(self.chart.len()),
            q: candidates[ci],
            value,
            gradient_norm: outcomes[ci].gradient_norm,
            iterations: 1,
            converged: true,
            history: vec![0.0, value],
            lower_bound: -0.25 * lnorm * lnorm / self.lambda_min,
            candidates: outcomes,
            line_search_exhausted: false,
            singular_gram: self.singular(),
        })
    }
}

/// Membrane dictionary reduced to frame strains with its relaxed-form Gram.
struct StrainModel {
    /// Chart-coordinate strains of the generators.
    strains: Vec<FormField2>,
    /// Pseudo-inverse of `H_ij = ∫Q₂(Sᵢ, Sⱼ)` by eigenpairs.
    h_eig: SymmetricEigen<f64, nalgebra::Dyn>,
    h_cutoff: f64,
    /// `r = R t` for frame strains `t` stacked as `3·node + component`.
    r: DMatrix<f64>,
}

impl StrainModel {
    fn new<E: Elasticity>(chart: &SurfaceChart, dict: &Dictionary, e: &E) -> Result<Self> {
        let gens = dict.generators(chart);
        let strains: Vec<FormField2> = gens.par_iter().map(|g| sym_grad(chart, g)).collect::<Result<_>>()?;
        let frames: Vec<Vec<Sym2>> = strains
            .iter()
            .map(|s| chart.nodes().iter().zip(&s.0).map(|(n, b)| frame_form_at(n, b)).collect())
            .collect();
        let w = chart.weights();
        let n = chart.len();
        let units = [Sym2::new(1.0, 0.0, 0.0), Sym2::new(0.0, 1.0, 0.0), Sym2::new(0.0, 0.0, 1.0)];
        let r = DMatrix::from_fn(frames.len(), 3 * n, |i, col| {
            let (k, c) = (col / 3, col % 3);
            w[k] * e.q2_bilinear(&frames[i][k], &units[c])
        });
        let p = frames.len();
        let mut h = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v: f64 = (0..n).map(|k| w[k] * e.q2_bilinear(&frames[i][k], &frames[j][k])).sum();
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let h_eig = SymmetricEigen::new(h);
        let h_cutoff = 1e-10 * h_eig.eigenvalues.max().max(f64::MIN_POSITIVE);
        Ok(StrainModel { strains, h_eig, h_cutoff, r })
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(r.len());
        for (i, &lam) in self.h_eig.eigenvalues.iter().enumerate() {
            if lam > self.h_cutoff {
                let v = self.h_eig.eigenvectors.column(i);
                x += v * (v.dot(r) / lam);
            }
        }
        x
    }
}

/// Objective of the `κ > 0` problem with the membrane coefficients eliminated.
struct Objective<'m, 'a, E: Elasticity> {
    model: &'m ReducedModel<'a>,
    strain: Option<&'m StrainModel>,
    frames: Vec<crate::isometry::DiscreteFrame>,
    kappa: f64,
    elasticity: &'m E,
    load: DVector<f64>,
}

impl<E: Elasticity> Objective<'_, '_, E> {
    /// Frame strains `(κ/2)(A²)_tan` at every node, stacked.
    fn target(&self, xi: &DVector<f64>) -> Vec<Sym2> {
        let a = &self.model.a_stack * xi;
        let chart = self.model.chart;
        chart
            .nodes()
            .iter()
            .zip(&self.frames)
            .enumerate()
            .map(|(k, (node, f))| {
                let m = Matrix3::from_row_slice(&a.as_slice()[9 * k..9 * k + 9]);
                let a2 = m * m;
                let [t1, t2] = f.tangents;
                let (x1, x2) = (a2 * t1, a2 * t2);
                let s = Sym2::new(x1.dot(&t1), 0.5 * (x1.dot(&t2) + x2.dot(&t1)), x2.dot(&t2));
                frame_form_at(node, &(s * (0.5 * self.kappa)))
            })
            .collect()
    }

    /// `(J, β*)` at `ξ`.
    fn eval(&self, xi: &DVector<f64>) -> (f64, DVector<f64>) {
        let bending = (xi.transpose() * &self.model.gram * xi)[0];
        let work = self.load.dot(xi);
        if self.kappa == 0.0 {
            return (bending - work, DVector::zeros(self.strain.map_or(0, |s| s.strains.len())));
        }
        let t = self.target(xi);
        let w = self.model.chart.weights();
        let tq: f64 = t.iter().zip(w).map(|(s, w)| w * self.elasticity.q2(s)).sum();
        let (stretch, beta) = match self.strain {
            Some(sm) => {
                let tv = DVector::from_iterator(3 * t.len(), t.iter().flat_map(|s| [s.m11, s.m12, s.m22]));
                let r = &sm.r * tv;
                let beta = sm.solve(&r);
                (0.5 * (tq - r.dot(&beta)).max(0.0), beta)
            }
            None => (0.5 * tq, DVector::zeros(0)),
        };
        (stretch + bending - work, beta)
    }

    fn value(&self, xi: &DVector<f64>) -> f64 {
        self.eval(xi).0
    }

    fn gradient(&self, xi: &DVector<f64>, step: f64) -> DVector<f64> {
        let h = step * (1.0 + xi.amax());
        DVector::from_fn(xi.len(), |i, _| {
            let mut p = xi.clone();
            p[i] += h;
            let fp = self.value(&p);
            p[i] -= 2.0 * h;
            let fm = self.value(&p);
            (fp - fm) / (2.0 * h)
        })
    }
}

/// A candidate's best run, its per-start values and the final `ℓ`.
type CandidateRun = (RunOutcome, Vec<f64>, DVector<f64>);

struct RunOutcome {
    xi: DVector<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    exhausted: bool,
}

/// BFGS with Armijo backtracking; every accepted step strictly decreases J.
fn bfgs<E: Elasticity>(obj: &Objective<E>, x0: DVector<f64>, h0: &DMatrix<f64>, opts: &MinimizeOptions) -> RunOutcome {
    let n = x0.len();
    let stop = opts.tol * (1.0 + obj.load.norm());
    let mut x = x0;
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x, opts.fd_step);
    let mut hinv = h0.clone();
    let mut history = vec![f];
    let mut exhausted = false;
    let mut iterations = 0;
    while iterations < opts.max_iter && g.norm() > stop {
        let mut d = -(&hinv * &g);
        if d.dot(&g) >= 0.0 {
            hinv = h0.clone();
            d = -(&hinv * &g);
        }
        let slope = d.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xn = &x + &d * t;
            let fnew = obj.value(&xn);
            if fnew <= f + 1e-4 * t * slope && fnew < f {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            exhausted = true;
            break;
        };
        let gn = obj.gradient(&xn, opts.fd_step);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let left = &id - &s * y.transpose() * rho;
            let right = &id - &y * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        x = xn;
        f = fnew;
        g = gn;
        history.push(f);
        iterations += 1;
    }
    let grad_norm = g.norm();
    RunOutcome {
        xi: x,
        value: f,
        grad_norm,
        iterations,
        converged: grad_norm <= stop,
        history,
        exhausted,
    }
}

/// Minimizes `J(V, B, Q̄) = ½∫Q₂(B − (κ/2)(A²)_tan) + (1/24)∫Q₂(bending) − ∫f·Q̄V`.
///
/// For each candidate the membrane coefficients are eliminated exactly (a
/// linear least-squares step at the current `V`), and the remaining
/// objective in the isometry coefficients is descended by BFGS with
/// central-difference gradients. Starts at `ξ = 0` plus `opts.restarts`
/// seeded random starts; the best run wins.
pub fn minimize_j_reduced<E: Elasticity>(
    model: &ReducedModel,
    dict: Option<&Dictionary>,
    load: &LoadSpec,
    candidates: &[Matrix3<f64>],
    kappa: f64,
    e: &E,
    opts: &MinimizeOptions,
) -> Result<MinimizationResult> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(ShellError::InvalidParameter(format!("kappa must be finite and nonnegative, got {kappa}")));
    }
    if candidates.is_empty() {
        return Err(ShellError::InvalidParameter("no rotation candidates".into()));
    }
    for q in candidates {
        check_rotation(q)?;
    }
    let chart = model.chart;
    let strain = dict.map(|d| StrainModel::new(chart, d, e)).transpose()?;
    let frames = discrete_frames(chart)?;
    // the bending Hessian 2G preconditions the quasi-Newton iteration
    let eig = SymmetricEigen::new(&model.gram * 2.0);
    let floor = 1e-12 * eig.eigenvalues.max().max(f64::MIN_POSITIVE);
    let h0 = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(floor)))
        * eig.eigenvectors.transpose();

    let runs: Vec<Result<CandidateRun>> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, q)| {
            let obj = Objective {
                model,
                strain: strain.as_ref(),
                frames: frames.clone(),
                kappa,
                elasticity: e,
                load: model.load_vector(load, q)?,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(ci as u64));
            let scale = (&h0 * &obj.load).norm().max(1e-3);
            let mut best: Option<RunOutcome> = None;
            let mut start_values = Vec::with_capacity(opts.restarts + 1);
            for start in 0..=opts.restarts {
                let x0 = if start == 0 {
                    DVector::zeros(model.dim())
                } else {
                    DVector::from_fn(model.dim(), |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale)
                };
                let run = bfgs(&obj, x0, &h0, opts);
                start_values.push(run.value);
                if best.as_ref().is_none_or(|b| run.value < b.value) {
                    best = Some(run);
                }
            }
            let best = best.expect("at least one start");
            Ok((best, start_values, obj.load))
        })
        .collect();
    let runs: Vec<(RunOutcome, Vec<f64>, DVector<f64>)> = runs.into_iter().collect::<Result<_>>()?;

    let outcomes: Vec<CandidateOutcome> = runs
        .iter()
        .zip(candidates)
        .map(|((r, sv, _), q)| CandidateOutcome {
            q: *q,
            value: r.value,
            gradient_norm: r.grad_norm,
            iterations: r.iterations,
            converged: r.converged,
            start_values: sv.clone(),
        })
        .collect();
    let ci = (0..runs.len())
        .min_by(|&a, &b| runs[a].0.value.total_cmp(&runs[b].0.value))
        .expect("nonempty");
    let (run, _, lvec) = &runs[ci];
    let obj = Objective {
        model,
        strain: strain.as_ref(),
        frames,
        kappa,
        elasticity: e,
        load: lvec.clone(),
    };
    let (_, beta) = obj.eval(&run.xi);
    let mut b = FormField2::zeros(chart.len());
    if let Some(sm) = &strain {
        for (s, c) in sm.strains.iter().zip(beta.iter()) {
            b = b.add(&s.scaled(*c));
        }
    }
    let xi: Vec<f64> = run.xi.iter().copied().collect();
    let lnorm = lvec.norm();
    Ok(MinimizationResult {
        v: model.combine(&xi),
        xi,
        b_coefficients: beta.iter().copied().collect(),
        b,
        q: candidates[ci],
        value: run.value,
        gradient_norm: run.grad_norm,
        iterations: run.iterations,
        converged: run.converged,
        history: run.history.clone(),
        lower_bound: -0.25 * lnorm * lnorm / model.lambda_min,
        candidates: outcomes,
        line_search_exhausted: runs.iter().any(|r| r.0.exhausted),
        singular_gram: model.singular(),
    })
}

/// `κ = 0`: minimizes `Ĩ(V) − ∫ f·Q̄V` over the rigid-free isometry space.
pub fn minimize_quadratic<E: Elasticity>(
    chart: &SurfaceChart,
    basis: &IsometryBasis,
    load: &LoadSpec,
    candidates: &[Matrix3<f64>],
    e: &E,
) -> Result<MinimizationResult> {
    ReducedModel::new(chart, basis, e)?.minimize_quadratic(load, candidates)
}

/// `κ > 0` problem; see [`minimize_j_reduced`].
#[allow(clippy::too_many_arguments)]
pub fn minimize_j<E: Elasticity>(
    chart: &SurfaceChart,
    basis: &IsometryBasis,
    dict: Option<&Dictionary>,
    load: &LoadSpec,
    candidates: &[Matrix3<f64>],
    kappa: f64,
    e: &E,
    opts: &MinimizeOptions,
) -> Result<MinimizationResult> {
    let model = ReducedModel::new(chart, basis, e)?;
    minimize_j_reduced(&model, dict, load, candidates, kappa, e, opts)
}

#[derive(Debug, Clone)]
pub struct WellposednessReport {
    pub mean: Vector3<f64>,
    pub mean_ok: bool,
    /// Per candidate: largest `|∫ f·Q̄Fx|` over a basis of skew `F`.
    pub violations: Vec<f64>,
    pub candidate_ok: Vec<bool>,
    pub pass: bool,
    pub tol: f64,
}

/// Checks `∫ f = 0` and `∫ f·Q̄Fx = 0` for all skew `F` and every candidate.
///
/// `tol` is relative to `max(1, ∫|f|(1 + |x|))`.
pub fn wellposedness_check(chart: &SurfaceChart, load: &LoadSpec, candidates: &[Matrix3<f64>], tol: f64) -> WellposednessReport {
    let scale: f64 = load
        .f
        .0
        .iter()
        .zip(chart.nodes())
        .zip(chart.weights())
        .map(|((f, n), w)| w * f.norm() * (1.0 + n.r.norm()))
        .sum::<f64>()
        .max(1.0);
    let tol = tol * scale;
    let mean_ok = load.mean.norm() <= tol;
    let violations: Vec<f64> = candidates
        .iter()
        .map(|q| {
            // ∫ f·QFx = ⟨QᵀF̂, F⟩
            let m = q.transpose() * load.moment;
            [(0, 1), (0, 2), (1, 2)]
                .iter()
                .map(|&(a, b)| (m[(a, b)] - m[(b, a)]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let candidate_ok: Vec<bool> = violations.iter().map(|&v| v <= tol).collect();
    let pass = mean_ok && candidate_ok.iter().all(|&b| b);
    WellposednessReport { mean: load.mean, mean_ok, violations, candidate_ok, pass, tol }
}
