//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the binary
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shellvk::functional::{
    a_squared_tan, bending_energy, rotation_set, total_i, total_j, LoadSpec, RotationOptions,
};
use shellvk::gammacheck::{build_ansatz, convergence_study, energy_3d, ConvergenceTable};
use shellvk::geometry::{sym_grad, FormField2, Profile, SurfaceChart, Sym2, VectorField3};
use shellvk::isometry::{coercivity_spectrum, extend_a, isometry_basis, rigid_basis, Threshold};
use shellvk::material::{embed, q2_numeric, q2_relax, ElasticModuli};
use shellvk::membrane::{project_to_b, solve_revolution_membrane, Dictionary};
use shellvk::minimize::{minimize_j_reduced, MinimizeOptions, ReducedModel};

type Outcome = (bool, String);

fn plate_mode(chart: &SurfaceChart) -> VectorField3 {
    VectorField3::from_fn(&chart.coords(), |u| Vector3::new(0.0, 0.0, (PI * u[0]).sin() * (PI * u[1]).sin()))
}

/// `V_r = cos2θ, V_θ = −½ sin2θ` on a cylinder parametrized by `(z, θ)`.
fn ovalization(chart: &SurfaceChart) -> VectorField3 {
    VectorField3::from_fn(&chart.coords(), |u| {
        let (s, c) = u[1].sin_cos();
        let (s2, c2) = (2.0 * u[1]).sin_cos();
        Vector3::new(c, s, 0.0) * c2 - Vector3::new(-s, c, 0.0) * (0.5 * s2)
    })
}

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let q = Vector4::from_fn(|_, _| normal(rng));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from_vector(q)).to_rotation_matrix().into_inner()
}

fn normal(rng: &mut impl Rng) -> f64 {
    // Box–Muller
    let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn order(e: &[f64], h: &[f64]) -> Vec<f64> {
    e.windows(2).zip(h.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut gap, mut lin) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = ElasticModuli::new(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)).unwrap();
        let mut draw = || Sym2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (f, g) = (draw(), draw());
        let closed = q2_relax(&f, &m);
        let numeric = q2_numeric(&embed(&f), &Vector3::z(), &m).unwrap();
        gap = gap.max((closed.value - numeric.value).abs() / closed.value.abs().max(f64::MIN_POSITIVE));
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let c = |s: &Sym2| q2_numeric(&embed(s), &Vector3::z(), &m).unwrap().c;
        let combo = c(&(f * a + g * b));
        let (cf, cg) = (c(&f), c(&g));
        let scale = (cf.norm() * a.abs() + cg.norm() * b.abs()).max(1.0);
        lin = lin.max((combo - cf * a - cg * b).norm() / scale);
    }
    (gap <= 1e-10 && lin <= 1e-12, format!("max relative gap {gap:.2e}, linearity residual {lin:.2e}"))
}

fn criterion_2() -> Outcome {
    let m = ElasticModuli::new(1.0, 1.0).unwrap();
    let exact = PI.powi(4) / 9.0;
    let sizes = [8usize, 16, 32, 64];
    let errs: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let chart = SurfaceChart::unit_plate(n).unwrap();
            (bending_energy(&chart, &plate_mode(&chart), &m).unwrap() - exact).abs()
        })
        .collect();
    let h: Vec<f64> = sizes.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let p = order(&errs, &h);
    let rel = errs[3] / exact;
    let ok = rel <= 0.01 && p.iter().all(|p| (p - 2.0).abs() <= 0.1);
    (ok, format!("relative error at 64x64 {rel:.2e}, orders {p:.3?}"))
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    for n in [16usize, 24] {
        let chart = SurfaceChart::unit_plate(n).unwrap();
        let basis = isometry_basis(&chart, usize::MAX, Threshold::default()).unwrap();
        let rigid = rigid_basis(&chart);
        let worst = rigid.fields.iter().map(|f| basis.projection_residual(f)).fold(0.0, f64::max);
        ok &= basis.len() == n * n + 3 && basis.gap_ratio >= 1e3 && worst <= 1e-8;
        msg.push(format!("N={n}: {} modes (N²+3 = {}), gap {:.1e}, rigid residual {worst:.1e}", basis.len(), n * n + 3, basis.gap_ratio));
    }
    let chart = SurfaceChart::cylinder(1.0, 1.0, 12, 17).unwrap();
    let basis = isometry_basis(&chart, usize::MAX, Threshold::default()).unwrap();
    let rigid = rigid_basis(&chart);
    let worst = rigid.fields.iter().map(|f| basis.projection_residual(f)).fold(0.0, f64::max);
    let oval = basis.projection_residual(&ovalization(&chart));
    ok &= worst <= 1e-8 && oval <= 1e-6;
    msg.push(format!("cylinder: rigid residual {worst:.1e}, ovalization residual {oval:.1e}"));
    (ok, msg.join("; "))
}

/// Exact `sym∇w₀` for `w₀ = aγ + bγ' + ce₃` on a surface of revolution, given
/// jets `[value, ∂_s, ∂_θ]` of `a, b, c`.
fn exact_strain(chart: &SurfaceChart, profile: &Profile, comp: impl Fn(f64, f64) -> [[f64; 3]; 3]) -> (VectorField3, FormField2) {
    let mut w = Vec::new();
    let mut b = Vec::new();
    for u in chart.coords() {
        let (g, g1, _) = profile.eval(u[0]);
        let [a, bb, c] = comp(u[0], u[1]);
        let (st, ct) = u[1].sin_cos();
        w.push(Vector3::new(ct, st, 0.0) * a[0] + Vector3::new(-st, ct, 0.0) * bb[0] + Vector3::z() * c[0]);
        b.push(Sym2::new(g1 * a[1] + c[1], 0.5 * (g * bb[1] + g1 * (a[2] - bb[0]) + c[2]), g * (a[0] + bb[2])));
    }
    (VectorField3(w), FormField2(b))
}

/// Bandlimited in θ, with `b(0) = b'(0) = 0` for the axial gauge.
fn smooth_w0(s: f64, t: f64) -> [[f64; 3]; 3] {
    let (s2, s3) = ((2.0 * t).sin(), (3.0 * t).cos());
    [
        [0.2 * s * s * (2.0 * t).cos() + 0.1 * s, 0.4 * s * (2.0 * t).cos() + 0.1, -0.4 * s * s * (2.0 * t).sin()],
        [0.3 * s * s * s2 + 0.1 * s * s * s3, 0.6 * s * s2 + 0.2 * s * s3, 0.6 * s * s * (2.0 * t).cos() - 0.3 * s * s * (3.0 * t).sin()],
        [0.5 * s * t.cos() + 0.2 * s * s, 0.5 * t.cos() + 0.4 * s, -0.5 * s * t.sin()],
    ]
}

fn criterion_4() -> Outcome {
    let profile = Profile::polynomial(vec![1.0, 0.0, 0.3]);
    let sizes = [32usize, 64, 128];
    let res: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let chart = SurfaceChart::revolution(profile.clone(), [0.0, 1.0], n, n).unwrap();
            let (_, b) = exact_strain(&chart, &profile, smooth_w0);
            solve_revolution_membrane(&chart, &b, None).unwrap().residual
        })
        .collect();
    let h: Vec<f64> = sizes.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let p = order(&res, &h);

    let chart = SurfaceChart::cylinder(1.0, 1.0, 32, 17).unwrap();
    let b = FormField2(
        chart
            .coords()
            .iter()
            .map(|u| {
                let (s, t) = (u[0], u[1]);
                Sym2::new(s * (2.0 * t).cos(), 0.5 * s * s * (2.0 * t).sin() + 0.25 * s * t.cos(), 0.3 * (3.0 * t).cos())
            })
            .collect(),
    );
    let sol = solve_revolution_membrane(&chart, &b, None).unwrap();
    // ψ = 2∂_sB₁₂ − ∂_θB₁₁ and b'' = ψ with b(0) = b'(0) = 0
    let closed = sol
        .w
        .0
        .iter()
        .zip(chart.coords())
        .map(|(wk, u)| {
            let (s, t) = (u[0], u[1]);
            let expected = 2.0 / 3.0 * s.powi(3) * (2.0 * t).sin() + 0.25 * s * s * t.cos();
            (wk.dot(&Vector3::new(-t.sin(), t.cos(), 0.0)) - expected).abs()
        })
        .fold(0.0, f64::max);
    let ok = res[2] <= 1e-6 && p.iter().all(|&p| p >= 2.0) && closed <= 1e-8;
    (ok, format!("residuals {}, orders {p:.3?}, cylinder closed-form gap {closed:.1e}", sci(&res)))
}

/// Polynomial coefficients (ascending) and their derivative.
fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn poly_diff(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect()
}

/// Lower bound on the relative `L²` distance of `T = −∇v⊗∇v`, `v = sin πx sin πy`,
/// from the plate's finite-strain space.
///
/// The orthogonal complement of `{sym∇w}` consists of the traction-free
/// stresses `cof∇²φ`, `φ ∈ H²₀`, so any clamped trial space gives
/// `dist² ≥ aᵀM⁻¹a / ‖T‖²`.
fn plate_distance_floor() -> f64 {
    let gl = gauss_quad::legendre::GaussLegendre::new(std::num::NonZeroUsize::new(40).unwrap());
    let pts: Vec<(f64, f64)> = gl.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    // x²(1−x)² xⁱ
    let base = [0.0, 0.0, 1.0, -2.0, 1.0];
    let polys: Vec<[Vec<f64>; 3]> = (0..6)
        .map(|i| {
            let mut c = vec![0.0; i];
            c.extend_from_slice(&base);
            let d1 = poly_diff(&c);
            let d2 = poly_diff(&d1);
            [c, d1, d2]
        })
        .collect();
    let idx: Vec<(usize, usize)> = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).collect();
    let n = idx.len();
    let mut a = nalgebra::DVector::<f64>::zeros(n);
    let mut mm = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut tnorm = 0.0;
    for &(x, wx) in &pts {
        for &(y, wy) in &pts {
            let w = wx * wy;
            let (gx, gy) = (PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos());
            let t = [-gx * gx, -gx * gy, -gy * gy];
            tnorm += w * (t[0] * t[0] + 2.0 * t[1] * t[1] + t[2] * t[2]);
            // (φ_xx, φ_xy, φ_yy) for every trial function
            let h: Vec<[f64; 3]> = idx
                .iter()
                .map(|&(i, j)| {
                    let (p, q) = (&polys[i], &polys[j]);
                    let ev = |c: &Vec<f64>, z| poly_eval(c, z);
                    [ev(&p[2], x) * ev(&q[0], y), ev(&p[1], x) * ev(&q[1], y), ev(&p[0], x) * ev(&q[2], y)]
                })
                .collect();
            for k in 0..n {
                a[k] += w * (t[0] * h[k][2] - 2.0 * t[1] * h[k][1] + t[2] * h[k][0]);
                for l in 0..n {
                    mm[(k, l)] += w * (h[k][0] * h[l][0] + 2.0 * h[k][1] * h[l][1] + h[k][2] * h[l][2]);
                }
            }
        }
    }
    let sol = mm.cholesky().expect("trial Gram is positive definite").solve(&a);
    (a.dot(&sol) / tnorm).sqrt()
}

fn criterion_5() -> Outcome {
    let plate = SurfaceChart::unit_plate(48).unwrap();
    let grad: Vec<[Vector3<f64>; 2]> = shellvk::geometry::surface_gradient(&plate, &plate_mode(&plate)).unwrap();
    let target = FormField2(grad.iter().map(|[d1, d2]| Sym2::new(-d1.z * d1.z, -d1.z * d2.z, -d2.z * d2.z)).collect());
    let plate_res: Vec<f64> = (2..=8)
        .map(|d| project_to_b(&plate, &target, &Dictionary { degree: d }).unwrap().residual)
        .collect();
    let floor = plate_distance_floor();

    let cyl = SurfaceChart::cylinder(1.0, 1.0, 16, 17).unwrap();
    let (a, _) = extend_a(&cyl, &ovalization(&cyl)).unwrap();
    let target = a_squared_tan(&cyl, &a).unwrap();
    let cyl_res: Vec<f64> = (2..=8)
        .map(|d| project_to_b(&cyl, &target, &Dictionary { degree: d }).unwrap().residual)
        .collect();
    let ok = floor > 0.0 && plate_res.iter().all(|&r| r >= floor) && cyl_res[6] < 1e-3;
    (
        ok,
        format!("plate residuals {plate_res:.3?} above distance floor {floor:.3}; cylinder residuals {}", sci(&cyl_res)),
    )
}

fn moment_load(f: Matrix3<f64>) -> LoadSpec {
    LoadSpec { f: VectorField3(vec![]), moment: f, mean: Vector3::zeros(), torque: Vector3::zeros() }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = RotationOptions::default();
    let mut margin = f64::INFINITY;
    let mut torque = 0.0f64;
    let mut id_cases = 0;
    let samples: Vec<Matrix3<f64>> = (0..100_000).map(|_| random_rotation(&mut rng)).collect();
    for trial in 0..100 {
        let fhat = if trial < 50 {
            Matrix3::from_fn(|_, _| normal(&mut rng))
        } else {
            // symmetric positive definite: the identity attains m
            let g = Matrix3::from_fn(|_, _| normal(&mut rng));
            g.transpose() * g + Matrix3::identity() * 0.1
        };
        let set = rotation_set(&moment_load(fhat), &opts);
        if trial < 50 {
            let best = samples.iter().map(|r| (r.transpose() * fhat).trace()).fold(f64::NEG_INFINITY, f64::max);
            margin = margin.min(set.m - best);
        }
        for c in &set.candidates {
            if (c.q - Matrix3::identity()).norm() <= 1e-9 {
                id_cases += 1;
                torque = torque.max(c.torque.norm() / fhat.norm());
            }
        }
    }
    let special = rotation_set(&moment_load(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))), &opts);
    let ok = margin >= -1e-9 && (special.m - 1.0).abs() <= 1e-12 && id_cases >= 50 && torque <= 1e-12;
    (
        ok,
        format!("min margin {margin:.2e}, m(diag(1,1,-1)) = {:.15}, identity candidates {id_cases}, max relative torque {torque:.1e}", special.m),
    )
}

fn coercivity_case(chart: &SurfaceChart, f: VectorField3, m: &ElasticModuli) -> (f64, f64, f64, bool) {
    let basis = isometry_basis(chart, usize::MAX, Threshold::default()).unwrap();
    let spec = coercivity_spectrum(chart, &basis, m).unwrap();
    let ratio = spec.min().unwrap() / spec.max().unwrap();
    let load = LoadSpec::mean_removed(chart, f).unwrap();
    let cands = rotation_set(&load, &RotationOptions::default()).rotations();
    let model = ReducedModel::new(chart, &basis, m).unwrap();
    let dict = Dictionary { degree: 3 };
    let r = minimize_j_reduced(&model, Some(&dict), &load, &cands, 1.0, m, &MinimizeOptions::default()).unwrap();
    (ratio, r.value, r.lower_bound, r.value < 0.0 && r.value >= r.lower_bound)
}

fn criterion_7() -> Outcome {
    let m = ElasticModuli::new(1.0, 0.5).unwrap();
    let plate = SurfaceChart::unit_plate(12).unwrap();
    // in-plane tension fixes the identity as the only maximizing rotation
    let pf = VectorField3::from_fn(&plate.coords(), |u| {
        Vector3::new(0.5 * (u[0] - 0.5), 0.5 * (u[1] - 0.5), (2.0 * PI * u[0]).cos() + (2.0 * PI * u[1]).cos())
    });
    let p = coercivity_case(&plate, pf, &m);
    let cyl = SurfaceChart::cylinder(1.0, 1.0, 10, 13).unwrap();
    let cf = VectorField3::from_fn(&cyl.coords(), |u| {
        let (s, c) = u[1].sin_cos();
        Vector3::new(c, s, 0.0) * ((2.0 * u[1]).cos() * (1.0 + u[0]))
    });
    let c = coercivity_case(&cyl, cf, &m);
    let ok = p.0 > 1e-6 && c.0 > 1e-6 && p.3 && c.3;
    (
        ok,
        format!(
            "plate λmin/λmax {:.2e}, J {:.4e} ≥ bound {:.4e}; cylinder λmin/λmax {:.2e}, J {:.4e} ≥ bound {:.4e}",
            p.0, p.1, p.2, c.0, c.1, c.2
        ),
    )
}

fn describe(t: &ConvergenceTable) -> String {
    let errs: Vec<f64> = t.rows.iter().map(|r| r.error).collect();
    format!(
        "limit {:.5e}, errors {}, final rel {:.2e}, slope {:.3}",
        t.limit,
        sci(&errs),
        t.final_relative_error(),
        t.scaling_exponent.unwrap_or(f64::NAN)
    )
}

fn check_table(t: &ConvergenceTable) -> bool {
    let s = t.scaling_exponent.unwrap_or(f64::NAN);
    t.errors_strictly_decreasing() && t.final_relative_error() <= 0.05 && (3.8..=4.3).contains(&s)
}

fn criterion_8() -> Outcome {
    let m = ElasticModuli::new(1.0, 0.7).unwrap();
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let mut times = Vec::new();

    let t0 = Instant::now();
    let plate = SurfaceChart::unit_plate(24).unwrap();
    let zero = VectorField3::zeros(plate.len());
    let a = build_ansatz(&plate, &plate_mode(&plate), &zero, 1.0, &m).unwrap();
    let tp = convergence_study(&a, &hs, &m).unwrap();
    times.push(t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let cyl = SurfaceChart::cylinder(1.0, 1.0, 24, 17).unwrap();
    let v = ovalization(&cyl);
    let (av, _) = extend_a(&cyl, &v).unwrap();
    let kappa = 1.0;
    // w with sym∇w = (κ/2)(A²)_tan cancels the stretching term
    let target = a_squared_tan(&cyl, &av).unwrap().scaled(0.5 * kappa);
    let w = solve_revolution_membrane(&cyl, &target, None).unwrap().w;
    let ac = build_ansatz(&cyl, &v, &w, kappa, &m).unwrap();
    let tc = convergence_study(&ac, &hs, &m).unwrap();
    let pure = bending_energy(&cyl, &v, &m).unwrap();
    let cancel = (tc.limit - pure).abs() / pure;
    times.push(t0.elapsed().as_secs_f64());

    let triv = build_ansatz(&cyl, &VectorField3::zeros(cyl.len()), &VectorField3::zeros(cyl.len()), 1.0, &m).unwrap();
    let trivial: f64 = hs.iter().map(|&h| energy_3d(&triv, h, &m, 6).unwrap().abs()).fold(0.0, f64::max);

    let ok = check_table(&tp) && check_table(&tc) && cancel <= 1e-6 && trivial == 0.0 && times.iter().all(|&t| t < 120.0);
    (
        ok,
        format!(
            "plate: {} ({:.1} s); cylinder: {}, |I − Ĩ|/Ĩ {cancel:.1e} ({:.1} s); trivial max {trivial:e}",
            describe(&tp),
            times[0],
            describe(&tc),
            times[1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let m = ElasticModuli::new(1.0, 0.6).unwrap();
    let profile = Profile::polynomial(vec![1.0, 0.2, 0.3]);
    let chart = SurfaceChart::revolution(profile, [0.0, 1.0], 16, 17).unwrap();
    let v = VectorField3::from_fn(&chart.coords(), |u| Vector3::new(u[0] * (2.0 * u[1]).cos(), u[1].sin() * u[0], (3.0 * u[1]).cos()));
    let b = sym_grad(&chart, &VectorField3::from_fn(&chart.coords(), |u| Vector3::new(u[0] * u[0], u[1].cos(), u[0] * u[1].sin()))).unwrap();
    let f = VectorField3::from_fn(&chart.coords(), |u| Vector3::new(u[1].cos(), u[0], (2.0 * u[1]).sin()));
    let load = LoadSpec::mean_removed(&chart, f).unwrap();
    let qbar = random_rotation(&mut ChaCha8Rng::seed_from_u64(99));
    let base_i = total_i(&chart, &v, &b, 1.0, &m).unwrap().total;
    let base_t = total_i(&chart, &v, &b, 0.0, &m).unwrap().total;
    let base_j = total_j(&chart, &v, &b, 1.0, &m, &load, &qbar).unwrap().total;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let r = random_rotation(&mut rng);
        let shift = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng));
        let c2 = chart.transformed(&r, &shift);
        let v2 = v.transformed(&r);
        let l2 = load.rotated(&c2, &r).unwrap();
        let i = total_i(&c2, &v2, &b, 1.0, &m).unwrap().total;
        let t = total_i(&c2, &v2, &b, 0.0, &m).unwrap().total;
        let j = total_j(&c2, &v2, &b, 1.0, &m, &l2, &(r * qbar * r.transpose())).unwrap().total;
        worst = worst
            .max((i - base_i).abs() / base_i.abs())
            .max((t - base_t).abs() / base_t.abs())
            .max((j - base_j).abs() / base_j.abs());
    }
    (worst <= 1e-10, format!("max relative change {worst:.2e} over 10 rotations (I, Ĩ, J)"))
}

fn criterion_10() -> Outcome {
    let m = ElasticModuli::new(1.0, 0.5).unwrap();
    let chart = SurfaceChart::cylinder(1.0, 1.0, 10, 13).unwrap();
    let basis = isometry_basis(&chart, usize::MAX, Threshold::default()).unwrap();
    let f = VectorField3::from_fn(&chart.coords(), |u| {
        let (s, c) = u[1].sin_cos();
        Vector3::new(c, s, 0.0) * ((2.0 * u[1]).cos() * (1.0 + u[0])) + Vector3::z() * (3.0 * u[1]).sin()
    });
    let load = LoadSpec::mean_removed(&chart, f).unwrap();
    let cands = rotation_set(&load, &RotationOptions::default()).rotations();
    let model = ReducedModel::new(&chart, &basis, &m).unwrap();
    let t = 2.5;
    let q1 = model.minimize_quadratic(&load, &cands).unwrap();
    let qt = model.minimize_quadratic(&load.scaled(t), &cands).unwrap();
    let lin = qt.v.sub(&q1.v.scaled(t)).max_norm() / qt.v.max_norm();
    let quad = (qt.value - t * t * q1.value).abs() / qt.value.abs();

    let dict = Dictionary { degree: 3 };
    let opts = MinimizeOptions { restarts: 3, seed: 11, ..MinimizeOptions::default() };
    let small = minimize_j_reduced(&model, Some(&dict), &load, &cands, 1e-8, &m, &opts).unwrap();
    let cont = (small.value - q1.value).abs() / q1.value.abs();
    let full = minimize_j_reduced(&model, Some(&dict), &load, &cands, 1.0, &m, &opts).unwrap();
    let again = minimize_j_reduced(&model, Some(&dict), &load, &cands, 1.0, &m, &opts).unwrap();
    let monotone = full.history.windows(2).all(|w| w[1] < w[0]) && small.history.windows(2).all(|w| w[1] < w[0]);
    let identical = full.value.to_bits() == again.value.to_bits()
        && full.xi.iter().zip(&again.xi).all(|(a, b)| a.to_bits() == b.to_bits())
        && full.b_coefficients.iter().zip(&again.b_coefficients).all(|(a, b)| a.to_bits() == b.to_bits());
    let ok = lin <= 1e-10 && quad <= 1e-10 && cont <= 1e-6 && monotone && identical;
    (
        ok,
        format!(
            "linearity {lin:.1e}, t² scaling {quad:.1e}, κ=1e-8 vs κ=0 {cont:.1e}, monotone {monotone} ({} iterations), bit-identical {identical}",
            full.iterations
        ),
    )
}

/// Name, check and time budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, f64);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Q2 closed form vs numeric relaxation", criterion_1, 1.0),
        ("plate Kirchhoff bending", criterion_2, 10.0),
        ("isometry spaces", criterion_3, f64::INFINITY),
        ("membrane round trip", criterion_4, f64::INFINITY),
        ("robustness dichotomy", criterion_5, f64::INFINITY),
        ("rotation set", criterion_6, f64::INFINITY),
        ("coercivity", criterion_7, f64::INFINITY),
        ("gamma check", criterion_8, f64::INFINITY),
        ("frame invariance", criterion_9, f64::INFINITY),
        ("minimizer contracts", criterion_10, f64::INFINITY),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = run();
        let secs = t0.elapsed().as_secs_f64();
        let ok = ok && secs < *budget;
        let budget = if budget.is_finite() { format!(", budget {budget} s") } else { String::new() };
        println!("criterion {:>2} {} — {name}: {detail} [{secs:.2} s{budget}]", k + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
