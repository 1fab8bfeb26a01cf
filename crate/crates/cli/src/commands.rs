use std::f64::consts::PI;

use nalgebra::{SymmetricEigen, Vector3};
use serde_json::{json, Value};
use shellvk::functional::{a_squared_tan, rotation_set, total_j, LoadSpec, RotationOptions, RotationSetResult};
use shellvk::gammacheck::{build_ansatz_with, convergence_study_with, ScalingRule};
use shellvk::geometry::{area, frame_form, integrate, sym_grad};
use shellvk::isometry::{extend_a, isometry_basis, IsometryBasis, Threshold};
use shellvk::membrane::{project_to_b, robustness_classify, solve_revolution_membrane, Dictionary, MEMBRANE_WARN};
use shellvk::minimize::{minimize_j_reduced, wellposedness_check, MinimizeOptions, ReducedModel};
use shellvk::{FormField2, ShellError, SurfaceChart, Sym2, VectorField3};

use crate::config::{ConfigError, LoadPreset, MembraneSource, Mode, RunConfig, WRule};
use crate::output::{form_columns, matrix_rows, vector_columns, Check, Outputs};
use crate::CliError;

pub struct Ctx {
    pub cfg: RunConfig,
    pub config_path: String,
    pub out: Outputs,
    pub checks: Vec<Check>,
}

/// Attaches the pipeline stage to a library error.
trait Stage<T> {
    fn at(self, stage: &str) -> Result<T, CliError>;
}

impl<T> Stage<T> for shellvk::Result<T> {
    fn at(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|error| CliError::Numerical { stage: stage.to_string(), error })
    }
}

impl Ctx {
    fn config_error(&self, field: &str, message: String) -> CliError {
        CliError::Config(ConfigError {
            path: self.config_path.clone(),
            line: None,
            column: None,
            field: Some(field.to_string()),
            message,
        })
    }

    fn chart(&mut self) -> Result<SurfaceChart, CliError> {
        let chart = self.cfg.chart().map_err(|e| self.config_error("surface", e.to_string()))?;
        self.out.stage("chart");
        Ok(chart)
    }

    fn basis(&mut self, chart: &SurfaceChart, n: usize) -> Result<IsometryBasis, CliError> {
        let basis = isometry_basis(chart, n, Threshold::Relative(self.cfg.solver.threshold)).at("isometries")?;
        self.out.stage("isometries");
        Ok(basis)
    }

    /// The configured displacement preset, scaled by `solver.amplitude`.
    fn mode_field(&mut self, chart: &SurfaceChart) -> Result<VectorField3, CliError> {
        let mode = self.cfg.mode().map_err(|e| self.config_error("solver.mode", e))?;
        let [[a1, b1], [a2, b2]] = chart.grid().domain;
        let v = match mode {
            Mode::Zero => VectorField3::zeros(chart.len()),
            Mode::PlateBending => VectorField3(
                chart
                    .nodes()
                    .iter()
                    .map(|n| {
                        let s = [(n.u[0] - a1) / (b1 - a1), (n.u[1] - a2) / (b2 - a2)];
                        n.normal * ((PI * s[0]).sin() * (PI * s[1]).sin())
                    })
                    .collect(),
            ),
            Mode::Ovalization => VectorField3::from_fn(&chart.coords(), |u| {
                let (s, c) = u[1].sin_cos();
                let (s2, c2) = (2.0 * u[1]).sin_cos();
                Vector3::new(c, s, 0.0) * c2 - Vector3::new(-s, c, 0.0) * (0.5 * s2)
            }),
            Mode::Basis(k) => {
                let basis = self.basis(chart, self.cfg.solver.basis_size)?;
                let model = ReducedModel::new(chart, &basis, &self.cfg.moduli()).at("reduce")?;
                // bending eigenmodes of the rigid-free isometry space, softest
                // first; numerically rigid directions carry no bending and are skipped
                let eig = SymmetricEigen::new(model.gram.clone());
                let floor = (1e-10 * model.lambda_max).max(1e-12 * self.cfg.moduli.mu);
                let mut order: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > floor).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let &col = order.get(k).ok_or_else(|| {
                    self.config_error("solver.mode", format!("basis:{k} requested but only {} bending modes were found", order.len()))
                })?;
                let xi: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
                let v = model.combine(&xi);
                let peak = v.0.iter().flat_map(|x| x.iter().copied()).fold(0.0f64, |a, c| if c.abs() > a.abs() { c } else { a });
                if peak == 0.0 {
                    v
                } else {
                    v.scaled(1.0 / peak)
                }
            }
        };
        Ok(v.scaled(self.cfg.solver.amplitude))
    }

    fn load(&mut self, chart: &SurfaceChart) -> Result<LoadSpec, CliError> {
        let l = self.cfg.load.clone();
        let [[a1, b1], [a2, b2]] = chart.grid().domain;
        let mut f: Vec<Vector3<f64>> = match l.preset {
            LoadPreset::None => vec![Vector3::zeros(); chart.len()],
            LoadPreset::NormalWave => chart
                .nodes()
                .iter()
                .map(|n| {
                    let s = [(n.u[0] - a1) / (b1 - a1), (n.u[1] - a2) / (b2 - a2)];
                    let k = 2.0 * PI * l.wave;
                    n.normal * (l.amplitude * ((k * s[0]).cos() + (k * s[1]).cos()))
                })
                .collect(),
            LoadPreset::RadialCos2 => chart.nodes().iter().map(|n| n.normal * (l.amplitude * (2.0 * n.u[1]).cos())).collect(),
            LoadPreset::Csv => {
                let path = l.path.clone().expect("validated");
                let cols = self.read_columns(&path, "load.path", &["fx", "fy", "fz"], chart.len())?;
                (0..chart.len()).map(|k| Vector3::new(cols[0][k], cols[1][k], cols[2][k])).collect()
            }
        };
        if l.tension != 0.0 {
            let total = area(chart);
            let centre = chart.nodes().iter().zip(chart.weights()).fold(Vector3::zeros(), |a, (n, w)| a + n.r * *w) / total;
            for (fk, n) in f.iter_mut().zip(chart.nodes()) {
                *fk += (n.r - centre) * l.tension;
            }
        }
        let f = VectorField3(f);
        let spec = if l.remove_mean { LoadSpec::mean_removed(chart, f) } else { LoadSpec::new(chart, f) };
        spec.map_err(|e| self.config_error("load", e.to_string()))
    }

    /// Named numeric columns of a CSV file with one row per node.
    fn read_columns(&self, path: &str, field: &str, names: &[&str], rows: usize) -> Result<Vec<Vec<f64>>, CliError> {
        let fail = |m: String| self.config_error(field, format!("{path}: {m}"));
        let mut rdr = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
        let header = rdr.headers().map_err(|e| fail(e.to_string()))?.clone();
        let idx: Vec<usize> = names
            .iter()
            .map(|n| header.iter().position(|h| h.trim() == *n).ok_or_else(|| fail(format!("missing column `{n}`"))))
            .collect::<Result<_, _>>()?;
        let mut cols = vec![Vec::with_capacity(rows); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| fail(e.to_string()))?;
            for (c, &i) in idx.iter().enumerate() {
                let cell = rec.get(i).unwrap_or("");
                let v: f64 = cell.trim().parse().map_err(|_| fail(format!("row {}: `{cell}` is not a number", r + 2)))?;
                cols[c].push(v);
            }
        }
        if cols[0].len() != rows {
            return Err(fail(format!("expected {rows} rows (one per node), got {}", cols[0].len())));
        }
        Ok(cols)
    }

    fn rotations(&self, load: &LoadSpec) -> RotationSetResult {
        let opts = RotationOptions { tol: None, samples: self.cfg.solver.rotation_samples, seed: self.cfg.solver.seed };
        rotation_set(load, &opts)
    }
}

/// A solved (or projected) membrane displacement.
struct Membrane {
    w: VectorField3,
    residual: f64,
    method: &'static str,
    lsq_residual: Option<f64>,
    regularized: bool,
    flagged: bool,
}

impl Membrane {
    fn zero(chart: &SurfaceChart) -> Self {
        Membrane { w: VectorField3::zeros(chart.len()), residual: 0.0, method: "none", lsq_residual: None, regularized: false, flagged: false }
    }

    fn report(&self) -> Value {
        json!({
            "method": self.method,
            "residual": self.residual,
            "lsq_residual": self.lsq_residual,
            "regularized": self.regularized,
            "flagged": self.flagged,
        })
    }

    /// Closed revolution surfaces get the exact solver; others the dictionary fit.
    fn solve(ctx: &mut Ctx, chart: &SurfaceChart, target: &FormField2) -> Result<Self, CliError> {
        let m = if chart.is_revolution() {
            let s = solve_revolution_membrane(chart, target, ctx.cfg.solver.fourier_order).at("membrane")?;
            Membrane { w: s.w, residual: s.residual, method: "revolution", lsq_residual: Some(s.lsq_residual), regularized: false, flagged: s.flagged }
        } else {
            let p = project_to_b(chart, target, &Dictionary { degree: ctx.cfg.solver.dictionary_degree }).at("membrane")?;
            Membrane { w: p.w, residual: p.residual, method: "projection", lsq_residual: None, regularized: p.regularized, flagged: false }
        };
        ctx.out.stage("membrane");
        Ok(m)
    }

    fn checks(&self) -> Vec<Check> {
        let mut out = vec![Check::flag("membrane_finite", self.w.is_finite() && self.residual.is_finite())];
        match self.method {
            "revolution" => out.push(Check::at_most("membrane_residual", self.residual, MEMBRANE_WARN)),
            // the fit never does worse than w = 0
            "projection" => out.push(Check::at_most("projection_residual", self.residual, 1.0 + 1e-12)),
            _ => {}
        }
        out
    }
}

/// `(κ/2)(A²)_tan` of `v`.
fn compatible_strain(chart: &SurfaceChart, v: &VectorField3, scale: f64) -> Result<FormField2, CliError> {
    let (a, _) = extend_a(chart, v).at("extend_a")?;
    Ok(a_squared_tan(chart, &a).at("strain")?.scaled(scale))
}

pub fn surface(ctx: &mut Ctx) -> Result<(), CliError> {
    let chart = ctx.chart()?;
    let report = robustness_classify(&chart);
    let nodes = chart.nodes();
    let unit = nodes.iter().map(|n| (n.normal.norm() - 1.0).abs()).fold(0.0, f64::max);
    let ortho = nodes
        .iter()
        .map(|n| n.tangents.iter().map(|t| n.normal.dot(t).abs() / t.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let min_area = nodes.iter().map(|n| n.area).fold(f64::INFINITY, f64::min);
    let total = area(&chart);
    let grid = chart.grid();
    ctx.out.stage("classify");
    let summary = json!({
        "family": chart.family().name(),
        "n1": grid.n1,
        "n2": grid.n2,
        "nodes": chart.len(),
        "periodic": grid.periodic2,
        "domain": grid.domain,
        "area": total,
        "max_second_form": chart.max_second_form(),
        "is_flat": chart.is_flat(),
        "robustness": report,
        "min_area_element": min_area,
        "normal_unit_error": unit,
        "normal_tangent_error": ortho,
    });
    ctx.out.json("surface.json", &summary)?;
    let k: Vec<[f64; 2]> = nodes.iter().map(|n| n.principal_curvatures()).collect();
    let mut cols = vector_columns("n", &chart.normals());
    cols.push(("k1".into(), k.iter().map(|p| p[0]).collect()));
    cols.push(("k2".into(), k.iter().map(|p| p[1]).collect()));
    cols.push(("gauss".into(), nodes.iter().map(|n| n.gauss_curvature()).collect()));
    cols.push(("weight".into(), chart.weights().to_vec()));
    ctx.out.node_csv("surface.csv", &chart, &cols)?;
    ctx.checks.push(Check::at_most("normal_unit", unit, 1e-12));
    ctx.checks.push(Check::at_most("normal_orthogonal", ortho, 1e-10));
    ctx.checks.push(Check::flag("area_positive", min_area > 0.0 && total.is_finite()));
    if matches!(chart.family(), shellvk::SurfaceFamily::Plate { .. }) {
        ctx.checks.push(Check::at_most("plate_flat", chart.max_second_form(), 0.0));
    }
    Ok(())
}

pub fn isometries(ctx: &mut Ctx) -> Result<(), CliError> {
    let chart = ctx.chart()?;
    let basis = ctx.basis(&chart, ctx.cfg.solver.basis_size)?;
    let mut ortho = 0.0f64;
    for i in 0..basis.len() {
        for j in 0..=i {
            let d = basis.mass_inner(&basis.modes[i], &basis.modes[j]) - if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max(d.abs());
        }
    }
    let files: Vec<String> = (0..basis.len()).map(|k| format!("mode_{k:03}.csv")).collect();
    let summary = json!({
        "count": basis.len(),
        "near_null_count": basis.near_null_count,
        "rayleigh": basis.rayleigh,
        "threshold": basis.tol,
        "gap_ratio": basis.gap_ratio,
        "max_rayleigh": basis.max_rayleigh,
        "mass_orthonormality_error": ortho,
        "mode_files": files,
    });
    ctx.out.json("isometries.json", &summary)?;
    for (m, name) in basis.modes.iter().zip(&files) {
        ctx.out.node_csv(name, &chart, &vector_columns("v", m))?;
    }
    let worst = basis.rayleigh.iter().copied().fold(0.0, f64::max);
    ctx.checks.push(Check::at_most("rayleigh_below_threshold", worst, basis.tol));
    ctx.checks.push(Check::at_most("mass_orthonormal", ortho, 1e-8));
    Ok(())
}

pub fn membrane(ctx: &mut Ctx) -> Result<(), CliError> {
    let chart = ctx.chart()?;
    let mc = ctx.cfg.membrane.clone();
    let target = match mc.source {
        MembraneSource::ModeStrain => {
            let v = ctx.mode_field(&chart)?;
            compatible_strain(&chart, &v, 0.5 * mc.amplitude)?
        }
        MembraneSource::Hoop => {
            FormField2(chart.nodes().iter().map(|n| Sym2::new(0.0, 0.0, mc.amplitude * n.metric[(1, 1)])).collect())
        }
        MembraneSource::Csv => {
            let path = mc.path.clone().expect("validated");
            let c = ctx.read_columns(&path, "membrane.path", &["b11", "b12", "b22"], chart.len())?;
            FormField2((0..chart.len()).map(|k| Sym2::new(c[0][k], c[1][k], c[2][k])).collect())
        }
    };
    let sol = Membrane::solve(ctx, &chart, &target)?;
    let mut report = sol.report();
    report["source"] = json!(mc.source);
    report["target_max"] = json!(target.max_abs());
    report["robustness"] = json!(robustness_classify(&chart).class);
    ctx.out.json("membrane.json", &report)?;
    let mut cols = vector_columns("w", &sol.w);
    cols.extend(form_columns("b", &target.0));
    ctx.out.node_csv("membrane.csv", &chart, &cols)?;
    ctx.checks.extend(sol.checks());
    Ok(())
}

pub fn energy(ctx: &mut Ctx) -> Result<(), CliError> {
    let chart = ctx.chart()?;
    let moduli = ctx.cfg.moduli();
    let kappa = ctx.cfg.scaling.kappa;
    let v = ctx.mode_field(&chart)?;
    let sol = if kappa > 0.0 && ctx.cfg.scaling.w == WRule::Membrane {
        let target = compatible_strain(&chart, &v, 0.5 * kappa)?;
        Membrane::solve(ctx, &chart, &target)?
    } else {
        Membrane::zero(&chart)
    };
    let b = sym_grad(&chart, &sol.w).at("strain")?;
    let load = ctx.load(&chart)?;
    let set = ctx.rotations(&load);
    let q = set.candidates[0].q;
    let e = total_j(&chart, &v, &b, kappa, &moduli, &load, &q).at("energy")?;
    ctx.out.stage("energy");
    let report = json!({
        "energy": e,
        "q": matrix_rows(&q),
        "rotation_m": set.m,
        "rotation_degenerate": set.degenerate,
        "rotation_candidates": set.candidates.len(),
        "load_mean": load.mean.as_slice(),
        "membrane": sol.report(),
        "mode": ctx.cfg.solver.mode,
    });
    ctx.out.json("energy.json", &report)?;
    let mut cols = vector_columns("v", &v);
    cols.extend(vector_columns("w", &sol.w));
    cols.extend(vector_columns("f", &load.f));
    ctx.out.node_csv("energy.csv", &chart, &cols)?;
    let scale = e.stretching.abs() + e.bending.abs() + e.load.abs();
    ctx.checks.push(Check::flag("stretching_nonnegative", e.stretching >= 0.0));
    ctx.checks.push(Check::flag("bending_nonnegative", e.bending >= 0.0));
    ctx.checks.push(Check::at_most("total_consistent", (e.total - (e.stretching + e.bending - e.load)).abs(), 1e-12 * scale.max(1.0)));
    if kappa == 0.0 {
        ctx.checks.push(Check::at_most("kappa_zero_no_stretch", e.stretching.abs(), 0.0));
    }
    if ctx.cfg.load.remove_mean {
        let f_abs: Vec<f64> = load.f.0.iter().map(|f| f.norm()).collect();
        ctx.checks.push(Check::at_most("load_balanced", load.mean.norm(), 1e-10 * integrate(&chart, &f_abs).max(1.0)));
    }
    ctx.checks.extend(sol.checks());
    Ok(())
}

pub fn minimize(ctx: &mut Ctx) -> Result<(), CliError> {
    let chart = ctx.chart()?;
    let moduli = ctx.cfg.moduli();
    let s = ctx.cfg.solver.clone();
    let kappa = ctx.cfg.scaling.kappa;
    let basis = ctx.basis(&chart, s.basis_size)?;
    let load = ctx.load(&chart)?;
    let set = ctx.rotations(&load);
    let candidates = set.rotations();
    let well = wellposedness_check(&chart, &load, &candidates, 1e-9);
    let model = ReducedModel::new(&chart, &basis, &moduli).at("reduce")?;
    ctx.out.stage("reduce");
    let opts = MinimizeOptions { tol: s.tol, max_iter: s.max_iter, restarts: s.restarts, seed: s.seed, ..MinimizeOptions::default() };
    let res = if kappa == 0.0 {
        model.minimize_quadratic(&load, &candidates).at("minimize")?
    } else {
        let dict = Dictionary { degree: s.dictionary_degree };
        minimize_j_reduced(&model, Some(&dict), &load, &candidates, kappa, &moduli, &opts).at("minimize")?
    };
    ctx.out.stage("minimize");
    let cands: Vec<Value> = res
        .candidates
        .iter()
        .map(|c| {
            json!({
                "q": matrix_rows(&c.q),
                "value": c.value,
                "gradient_norm": c.gradient_norm,
                "iterations": c.iterations,
                "converged": c.converged,
                "start_values": c.start_values,
            })
        })
        .collect();
    let report = json!({
        "kappa": kappa,
        "value": res.value,
        "gradient_norm": res.gradient_norm,
        "iterations": res.iterations,
        "converged": res.converged,
        "q": matrix_rows(&res.q),
        "xi": res.xi,
        "b_coefficients": res.b_coefficients,
        "lower_bound": res.lower_bound,
        "history": res.history,
        "line_search_exhausted": res.line_search_exhausted,
        "singular_gram": res.singular_gram,
        "candidates": cands,
        "basis": {
            "modes": basis.len(),
            "rigid_free": model.dim(),
            "gap_ratio": basis.gap_ratio,
            "bending_lambda_min": model.lambda_min,
            "bending_lambda_max": model.lambda_max,
        },
        "rotation": {
            "m": set.m,
            "degenerate": set.degenerate,
            "linearized_ok": set.linearized_ok,
        },
        "wellposedness": {
            "pass": well.pass,
            "mean": well.mean.as_slice(),
            "violations": well.violations,
            "tol": well.tol,
        },
    });
    ctx.out.json("minimize.json", &report)?;
    let frames = frame_form(&chart, &res.b).at("output")?;
    let mut cols = vector_columns("v", &res.v);
    cols.extend(form_columns("b", &res.b.0));
    cols.extend(form_columns("frame_b", &frames));
    ctx.out.node_csv("minimize.csv", &chart, &cols)?;
    ctx.checks.push(Check::flag("converged", res.converged));
    ctx.checks.push(Check::at_most("not_worse_than_trivial", res.value, 1e-12));
    ctx.checks.push(Check::flag("above_lower_bound", res.value >= res.lower_bound - 1e-9 * res.lower_bound.abs().max(1e-12)));
    ctx.checks.push(Check::flag("wellposed_load", well.pass));
    ctx.checks.push(Check::flag("line_search_ok", !res.line_search_exhausted));
    Ok(())
}

pub fn gamma_check(ctx: &mut Ctx) -> Result<(), CliError> {
    let chart = ctx.chart()?;
    let moduli = ctx.cfg.moduli();
    let kappa = ctx.cfg.scaling.kappa;
    let v = ctx.mode_field(&chart)?;
    let (rule, sol) = if kappa > 0.0 {
        let sol = match ctx.cfg.scaling.w {
            WRule::Membrane => {
                let target = compatible_strain(&chart, &v, 0.5 * kappa)?;
                Membrane::solve(ctx, &chart, &target)?
            }
            WRule::Zero => Membrane::zero(&chart),
        };
        (ScalingRule::Kappa(kappa), sol)
    } else {
        (ScalingRule::Power(ctx.cfg.scaling.beta), Membrane::zero(&chart))
    };
    let ansatz = build_ansatz_with(&chart, &v, &sol.w, rule, &moduli).at("ansatz")?;
    ctx.out.stage("ansatz");
    let table = convergence_study_with(&ansatz, &ctx.cfg.solver.h_list, &moduli, ctx.cfg.solver.t_quad).at("gamma-check")?;
    ctx.out.stage("convergence");
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let header: Vec<String> = ["h", "energy", "ratio", "error", "energy_slope", "error_slope"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| vec![r.h.to_string(), r.energy.to_string(), r.ratio.to_string(), r.error.to_string(), opt(r.energy_slope), opt(r.error_slope)])
        .collect();
    ctx.out.csv("convergence.csv", &header, &rows)?;
    let expected = match rule {
        ScalingRule::Kappa(_) => 4.0,
        ScalingRule::Power(b) => b,
    };
    let slope = table.scaling_exponent;
    let summary = json!({
        "limit": table.limit,
        "final_error": table.rows.last().map(|r| r.error),
        "final_relative_error": table.final_relative_error(),
        "errors_strictly_decreasing": table.errors_strictly_decreasing(),
        "slope": slope,
        "expected_slope": expected,
        "rule": table.rule,
        "kappa": table.kappa,
        "t_quad": table.t_quad,
        "h": ctx.cfg.solver.h_list,
        "membrane": sol.report(),
        "mode": ctx.cfg.solver.mode,
    });
    ctx.out.json("gamma_summary.json", &summary)?;
    ctx.checks.push(Check::flag("errors_strictly_decreasing", table.errors_strictly_decreasing()));
    ctx.checks.push(Check::at_most("final_relative_error", table.final_relative_error(), 0.05));
    let s = slope.unwrap_or(f64::NAN);
    ctx.checks.push(Check::flag("scaling_exponent", (expected - 0.2..=expected + 0.3).contains(&s)));
    ctx.checks.extend(sol.checks());
    Ok(())
}

/// Diagnostic payload for a library error.
pub fn error_payload(stage: &str, error: &ShellError) -> Value {
    let kind = format!("{error:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("").to_string();
    json!({ "stage": stage, "kind": kind, "message": error.to_string() })
}
