//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any of them fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dualfem::experiments::{channel_inflow_outflow, run_config, ExperimentConfig};
use dualfem::fem::{p0_project, FeFunction, P0Field, Problem, Space, SpaceKind};
use dualfem::gub::{self, adaptive_epsilon_policy};
use dualfem::mesh::{channel_mesh, grade_toward, lshape_mesh, Mesh};
use dualfem::nfunction::NFunction;
use dualfem::solver::{
    dual_kacanov_step, gradient_descent_step, iterate, kacanov_step, newton_step, Controls, EpsilonPolicy, Scheme,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tiny_mesh() -> Arc<Mesh<f64>> {
    Arc::new(grade_toward(&lshape_mesh(1).unwrap(), [0.0, 0.0], 1).unwrap())
}

/// The four integrands of the duality checks with their right-hand side and scheme.
fn tiny_cases() -> Vec<(&'static str, NFunction<f64>, f64, Scheme)> {
    vec![
        ("p=3/2", NFunction::shifted_p_laplace(0.1, 1.5).unwrap(), 2.0, Scheme::PrimalKacanov),
        ("p=4", NFunction::shifted_p_laplace(0.1, 4.0).unwrap(), 2.0, Scheme::DualKacanov),
        ("optimal design", NFunction::optimal_design(0.0145, 1.0, 2.0).unwrap(), 1.0, Scheme::PrimalKacanov),
        ("bingham eps=0.01", NFunction::bingham_regularized(1.0, 0.3, 0.01).unwrap(), 2.0, Scheme::PrimalKacanov),
    ]
}

fn all_families() -> Vec<(&'static str, NFunction<f64>)> {
    vec![
        ("shifted p=3/2", NFunction::shifted_p_laplace(0.1, 1.5).unwrap()),
        ("shifted p=4", NFunction::shifted_p_laplace(0.1, 4.0).unwrap()),
        ("optimal design", NFunction::optimal_design(0.0145, 1.0, 2.0).unwrap()),
        ("bingham", NFunction::bingham(1.0, 0.3).unwrap()),
        ("bingham eps=0.01", NFunction::bingham_regularized(1.0, 0.3, 0.01).unwrap()),
        ("quadratic", NFunction::quadratic()),
    ]
}

fn log_points(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}

/// `sup_r (t r − φ*(r))` over a log grid with three local zooms.
fn grid_biconjugate(m: &NFunction<f64>, t: f64) -> f64 {
    let value = |r: f64| t * r - m.conjugate(r).unwrap();
    let grid = log_points(400, -8.0, 9.0);
    let mut best = (0.0, value(0.0));
    let mut idx = 0;
    for (i, &r) in grid.iter().enumerate() {
        let v = value(r);
        if v > best.1 {
            best = (r, v);
            idx = i;
        }
    }
    let mut lo = if idx == 0 { 0.0 } else { grid[idx - 1] };
    let mut hi = grid[(idx + 1).min(grid.len() - 1)];
    for _ in 0..4 {
        let n = 60;
        let mut arg = best.0;
        for k in 0..=n {
            let r = lo + (hi - lo) * k as f64 / n as f64;
            let v = value(r);
            if v > best.1 {
                best = (r, v);
                arg = r;
            }
        }
        let h = (hi - lo) / n as f64;
        lo = (arg - h).max(0.0);
        hi = arg + h;
    }
    best.1
}

fn convex_analysis() -> Check {
    let ts = log_points(1000, -4.0, 2.0);
    let mut worst_bi = 0.0f64;
    for (name, m) in all_families() {
        let phi: Vec<f64> = ts.iter().map(|&t| m.phi(t).unwrap()).collect();
        let rs: Vec<f64> = ts.iter().map(|&t| m.phi_prime(t).unwrap()).collect();
        let conj: Vec<f64> = rs.iter().map(|&r| m.conjugate(r).unwrap()).collect();
        for (i, &t) in ts.iter().enumerate() {
            let scale = 1.0 + phi[i] + conj[i] + t * rs[i];
            let gap = phi[i] + conj[i] - t * rs[i];
            ensure(gap.abs() <= 1e-10 * scale, || format!("{name}: Young equality fails at t={t:e}: {gap:e}"))?;
            for (j, &r) in rs.iter().enumerate().step_by(7) {
                let lhs = phi[i] + conj[j];
                ensure(lhs >= t * r - 1e-12 * (1.0 + lhs + t * r), || {
                    format!("{name}: Young inequality fails at t={t:e}, r={r:e}")
                })?;
            }
            let inv = m.phi_prime_inverse(rs[i]).unwrap();
            ensure(inv >= t * (1.0 - 1e-10), || format!("{name}: inverse below t at {t:e}"))?;
            ensure((m.phi_prime(inv).unwrap() - rs[i]).abs() <= 1e-10 * (1.0 + rs[i]), || {
                format!("{name}: inverse inconsistent at t={t:e}")
            })?;
            let on_plateau = m.plateau().is_some_and(|(t1, t2)| t > t1 && t < t2);
            if !on_plateau {
                ensure((inv - t).abs() <= 1e-9 * t, || format!("{name}: inverse {inv:e} != {t:e}"))?;
            }
            let bi = grid_biconjugate(&m, t);
            let err = (bi - phi[i]).abs() / phi[i].max(1.0);
            worst_bi = worst_bi.max(err);
            ensure(err <= 1e-6, || format!("{name}: biconjugate {bi:e} vs phi {:e} at t={t:e}", phi[i]))?;
        }
    }
    Ok(format!("6 integrands x 1000 points, worst biconjugation error {worst_bi:.1e}"))
}

fn strong_duality() -> Check {
    let mesh = tiny_mesh();
    ensure(mesh.n_triangles() <= 200, || format!("{} triangles", mesh.n_triangles()))?;
    let mut out = Vec::new();
    for (name, model, f, scheme) in tiny_cases() {
        let problem = Problem::new(Space::new(SpaceKind::P1Zero, mesh.clone()), f);
        let recs = iterate(scheme, &model, &problem, &Controls { max_iter: 20_000, tol: 1e-10, ..Controls::default() })
            .map_err(|e| format!("{name}: {e}"))?;
        let last = recs.last().unwrap();
        ensure(last.gub <= 1e-10, || format!("{name}: not converged, gub {:e} after {}", last.gub, last.n))?;
        let sum = last.primal + last.dual;
        ensure(sum.abs() <= 1e-8, || format!("{name}: |J + J*| = {:e}", sum.abs()))?;
        out.push(format!("{name}: N={} |J+J*|={:.1e}", last.n, sum.abs()));
    }
    Ok(format!("{} triangles; {}", mesh.n_triangles(), out.join("; ")))
}

/// Smallest energy from Newton, falling back on the fixed-point schemes if Newton
/// does not certify `1e−12`.
fn reference_energy(model: &NFunction<f64>, problem: &Problem<f64>, fallback: Scheme) -> Result<f64, String> {
    let controls = Controls { max_iter: 500, tol: 1e-12, ..Controls::default() };
    let newton = iterate(Scheme::Newton, model, problem, &controls).map_err(|e| e.to_string())?;
    let last = newton.last().unwrap();
    if last.gub <= 1e-12 {
        return Ok(last.primal);
    }
    let recs = iterate(fallback, model, problem, &Controls { max_iter: 50_000, ..controls }).map_err(|e| e.to_string())?;
    let last = recs.last().unwrap();
    ensure(last.gub <= 1e-12, || format!("reference not certified: {:e}", last.gub))?;
    Ok(recs.iter().map(|r| r.primal).fold(f64::INFINITY, f64::min))
}

fn random_u(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> FeFunction<f64> {
    FeFunction::from_coefficients((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

fn random_field(rng: &mut ChaCha8Rng, nt: usize, dim: usize, scale: f64) -> P0Field<f64> {
    P0Field::from_values(dim, (0..nt * dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

fn gub_soundness() -> Check {
    let mesh = tiny_mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for (name, model, f, scheme) in tiny_cases() {
        let problem = Problem::new(Space::new(SpaceKind::P1Zero, mesh.clone()), f);
        let j_ref = reference_energy(&model, &problem, scheme).map_err(|e| format!("{name}: {e}"))?;
        for trial in 0..100 {
            let scheme = [Scheme::PrimalKacanov, Scheme::DualKacanov, Scheme::GradientDescent, Scheme::Newton][trial % 4];
            let scale = [0.01, 0.1, 1.0][trial % 3];
            let controls = Controls {
                max_iter: 6,
                initial_u: Some(random_u(&mut rng, problem.space().n_dofs(), scale)),
                initial_sigma: Some(random_field(&mut rng, problem.n_triangles(), 2, scale)),
                ..Controls::default()
            };
            let recs = iterate(scheme, &model, &problem, &controls).map_err(|e| format!("{name} {scheme}: {e}"))?;
            for r in &recs {
                let excess = (r.primal - j_ref) - r.gub;
                worst = worst.max(excess);
                ensure(excess <= 1e-9, || format!("{name} {scheme} n={}: error exceeds bound by {excess:e}", r.n))?;
                ensure(r.feasibility <= 1e-8, || format!("{name} {scheme} n={}: feasibility {:e}", r.n, r.feasibility))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} certified iterates, max (error - gub) = {worst:.1e}"))
}

fn byproduct_feasibility() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lshape = tiny_mesh();
    let channel = Arc::new(channel_mesh(1).unwrap());
    let problems = vec![
        ("P1", Problem::new(Space::new(SpaceKind::P1Zero, lshape.clone()), 2.0)),
        ("CR", Problem::new(Space::new(SpaceKind::CrZero, lshape), 2.0)),
        ("KS", {
            let space = Space::new(SpaceKind::KouhiaStenberg, channel);
            let lift = dualfem::fem::interpolate_boundary(&space, channel_inflow_outflow);
            Problem::with_lift(space, 0.0, lift)
        }),
    ];
    let p32 = NFunction::shifted_p_laplace(0.1, 1.5).unwrap();
    let p4 = NFunction::shifted_p_laplace(0.1, 4.0).unwrap();
    let mut worst = 0.0f64;
    for (label, problem) in &problems {
        let scale = if problem.is_constrained() { 0.05 } else { 0.5 };
        for k in 0..20 {
            let u = random_u(&mut rng, problem.space().n_dofs(), scale);
            let sigma = random_field(&mut rng, problem.n_triangles(), problem.gradient_dim(), scale);
            let steps = [
                ("kacanov", kacanov_step(&p32, problem, &u)),
                ("dual kacanov", dual_kacanov_step(&p4, problem, &sigma)),
                ("gradient descent", gradient_descent_step(&p32, problem, &u)),
                ("newton", newton_step(&p4, problem, &u)),
            ];
            for (name, step) in steps {
                let step = step.map_err(|e| format!("{label} {name} #{k}: {e}"))?;
                let res = problem.feasibility_residual(&step.sigma).map_err(|e| e.to_string())?;
                worst = worst.max(res);
                ensure(res <= 1e-8, || format!("{label} {name} #{k}: residual {res:e}"))?;
            }
        }
    }
    Ok(format!("4 schemes x 20 iterates on P1, CR, KS; max residual {worst:.1e}"))
}

fn non_increasing(values: &[f64], from: usize, slack: f64) -> Result<(), String> {
    for i in from..values.len().saturating_sub(1) {
        if values[i + 1] > values[i] + slack {
            return Err(format!("increase at index {i}: {:e} -> {:e}", values[i], values[i + 1]));
        }
    }
    Ok(())
}

/// Rounding level of energies of magnitude `scale`.
fn rounding(scale: f64) -> f64 {
    64.0 * f64::EPSILON * scale.abs().max(1e-3)
}

fn plaplace_p32() -> Check {
    let config = ExperimentConfig::preset("plaplace").unwrap();
    let s = run_config(&config).map_err(|e| e.to_string())?;
    ensure(s.n_triangles >= 15_000, || format!("only {} triangles", s.n_triangles))?;
    let gubs: Vec<f64> = s.records.iter().map(|r| r.gub).collect();
    non_increasing(&gubs, 0, rounding(s.j_ref)).map_err(|e| format!("GUB not monotone: {e}"))?;
    let mut worst_eff = 0.0f64;
    for (r, eff) in s.records.iter().zip(s.efficiency()) {
        if let (true, Some(e)) = (r.n >= 5, eff) {
            worst_eff = worst_eff.max(e);
            ensure(e <= 2.0, || format!("efficiency {e} at n={}", r.n))?;
        }
    }
    let end = gubs.len().min(30);
    ensure(end > 6, || format!("only {end} iterations"))?;
    let rate = (gubs[end - 1] / gubs[4]).powf(1.0 / (end - 5) as f64);
    ensure(rate <= 0.95, || format!("mean contraction {rate}"))?;
    Ok(format!(
        "{} triangles, {} iterations, final gub {:.1e}, max efficiency (n>=5) {worst_eff:.3}, rate {rate:.3}",
        s.n_triangles,
        gubs.len(),
        gubs.last().unwrap()
    ))
}

fn plaplace_p4() -> Check {
    let mut config = ExperimentConfig::preset("plaplace").unwrap();
    config.set("p", "4").unwrap();
    config.max_iter = 200;
    ensure(config.scheme == Scheme::DualKacanov, || "p=4 preset does not select the dual scheme".into())?;
    let s = run_config(&config).map_err(|e| e.to_string())?;
    let hit = s.records.iter().find(|r| r.gub < 1e-8).map(|r| r.n);
    ensure(hit.is_some_and(|n| n <= 200), || "GUB did not drop below 1e-8 within 200 iterations".into())?;
    let dual = s.dual_errors();
    non_increasing(&dual, 0, rounding(s.j_ref)).map_err(|e| format!("dual energy error not monotone: {e}"))?;
    Ok(format!("{} triangles, gub < 1e-8 at n={}, {} iterations", s.n_triangles, hit.unwrap(), dual.len()))
}

fn optimal_design() -> Check {
    let config = ExperimentConfig::preset("optdesign").unwrap();
    let s = run_config(&config).map_err(|e| e.to_string())?;
    let primal: Vec<f64> = s.records.iter().map(|r| r.primal).collect();
    non_increasing(&primal, 0, rounding(s.j_ref)).map_err(|e| format!("J(u_n) not monotone: {e}"))?;
    for r in &s.records {
        ensure(r.primal - s.j_ref <= r.gub + 1e-10, || format!("bound violated at n={}", r.n))?;
        ensure(r.feasibility <= 1e-8, || format!("feasibility {:e} at n={}", r.feasibility, r.n))?;
    }
    Ok(format!("{} triangles, {} iterations, final gub {:.1e}", s.n_triangles, primal.len(), s.records.last().unwrap().gub))
}

fn pstokes() -> Check {
    let mut out = Vec::new();
    for p in ["1.5", "4"] {
        let mut config = ExperimentConfig::preset("pstokes").unwrap();
        config.set("p", p).unwrap();
        let mesh = Arc::new(config.mesh().map_err(|e| e.to_string())?);
        let problem = config.problem(mesh).map_err(|e| e.to_string())?;
        let space = problem.space();
        let lift = problem.lift().unwrap();
        let mut worst_lift = 0.0f64;
        for &node in space.boundary_nodes() {
            let exact = channel_inflow_outflow(space.node_position(node))[space.node_component(node)];
            worst_lift = worst_lift.max((lift.node_value(space, node) - exact).abs());
        }
        ensure(worst_lift <= 1e-14, || format!("lift mismatch {worst_lift:e}"))?;
        let model = config.model().unwrap();
        let controls = Controls { max_iter: config.max_iter, tol: config.tol, keep_fields: true, ..Controls::default() };
        let recs = iterate(config.scheme, &model, &problem, &controls).map_err(|e| format!("p={p}: {e}"))?;
        let mut worst_div = 0.0f64;
        for r in &recs {
            let div = problem.divergence(r.u.as_ref().unwrap()).map_err(|e| e.to_string())?;
            worst_div = div.iter().fold(worst_div, |m, d| m.max(d.abs()));
        }
        ensure(worst_div <= 1e-10, || format!("p={p}: divergence {worst_div:e}"))?;
        let gubs: Vec<f64> = recs.iter().map(|r| r.gub).collect();
        non_increasing(&gubs, 1, 0.0).map_err(|e| format!("p={p}: GUB not monotone after n=2: {e}"))?;
        out.push(format!(
            "p={p}: {} triangles, {} iterations, gub {:.1e}, max |div| {worst_div:.1e}",
            problem.n_triangles(),
            recs.len(),
            gubs.last().unwrap()
        ));
    }
    Ok(out.join("; "))
}

fn bingham() -> Check {
    ensure(adaptive_epsilon_policy(1.0, 99.0) == 1.0, || "ratio 99 halved".into())?;
    ensure(adaptive_epsilon_policy(1.0, 100.0) == 1.0, || "ratio 100 halved".into())?;
    ensure(adaptive_epsilon_policy(1.0, 101.0) == 0.5, || "ratio 101 not halved".into())?;
    let config = ExperimentConfig::preset("bingham").unwrap();
    let mesh = Arc::new(config.mesh().map_err(|e| e.to_string())?);
    let problem = config.problem(mesh).map_err(|e| e.to_string())?;
    let model = config.model().unwrap();
    let run = |epsilon| {
        iterate(Scheme::PrimalKacanov, &model, &problem, &Controls { max_iter: 50, tol: 0.0, epsilon, ..Controls::default() })
            .map_err(|e| e.to_string())
    };
    let fixed = run(EpsilonPolicy::FixedSequence)?;
    let adaptive = run(EpsilonPolicy::Adaptive(1.0))?;
    // halvings happen exactly after records with ratio > 100
    for w in adaptive.windows(2) {
        let expected = if w[0].ratio.is_some_and(|r| r > 100.0) { w[0].epsilon.unwrap() / 2.0 } else { w[0].epsilon.unwrap() };
        ensure(w[1].epsilon == Some(expected), || format!("unexpected epsilon at n={}", w[1].n))?;
    }
    let j_ref = fixed.iter().chain(&adaptive).map(|r| r.primal).fold(f64::INFINITY, f64::min);
    ensure(fixed.len() == 50, || "fixed run stopped early".into())?;
    let theta = fixed[49].primal - j_ref;
    let reached = adaptive.iter().find(|r| r.primal - j_ref <= theta).map(|r| r.n);
    ensure(reached.is_some_and(|n| n <= 50), || format!("adaptive run never reached {theta:e}"))?;
    Ok(format!(
        "{} triangles; theta = {theta:.2e} (fixed, n=50); adaptive reaches it at n={}",
        problem.n_triangles(),
        reached.unwrap()
    ))
}

/// Degree-5 seven-point rule on a triangle: barycentric points and weights.
fn seven_point_rule() -> Vec<([f64; 3], f64)> {
    let (a1, b1, w1) = (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506);
    let (a2, b2, w2) = (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827);
    let mut rule = vec![([1.0 / 3.0; 3], 0.225)];
    for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
        rule.push(([a, b, b], w));
        rule.push(([b, a, b], w));
        rule.push(([b, b, a], w));
    }
    rule
}

fn pi0_monotonicity() -> Check {
    let mesh = tiny_mesh();
    let problem = Problem::new(Space::new(SpaceKind::P1Zero, mesh.clone()), 2.0);
    let base = kacanov_step(&NFunction::shifted_p_laplace(0.1, 1.5).unwrap(), &problem, &problem.zero_function())
        .map_err(|e| e.to_string())?
        .sigma;
    let rule = seven_point_rule();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let families = all_families();
    let mut min_gap = f64::INFINITY;
    for k in 0..50 {
        let (name, model) = &families[k % families.len()];
        let amplitude = 10f64.powf(rng.gen_range(-2.0..1.0));
        let slopes: Vec<[[f64; 2]; 2]> = (0..mesh.n_triangles())
            .map(|_| [[0.0; 2]; 2].map(|_| [rng.gen_range(-1.0..1.0) * amplitude, rng.gen_range(-1.0..1.0) * amplitude]))
            .collect();
        let tau = |t: usize, x: [f64; 2]| -> Vec<f64> {
            let c = mesh.barycenter(t);
            let s = slopes[t];
            let d = [x[0] - c[0], x[1] - c[1]];
            (0..2).map(|i| base.value(t)[i] + s[i][0] * d[0] + s[i][1] * d[1]).collect()
        };
        let projected = p0_project(&mesh, 2, &tau);
        let feas = problem.feasibility_residual(&projected).map_err(|e| e.to_string())?;
        ensure(feas <= 1e-8, || format!("field {k} is not feasible: {feas:e}"))?;
        let lower = gub::dual_energy(model, &problem, &projected).map_err(|e| e.to_string())?;
        let mut upper = 0.0;
        for t in 0..mesh.n_triangles() {
            let vs = mesh.triangle(t).map(|v| mesh.vertex(v));
            for (lam, w) in &rule {
                let x = [0, 1].map(|i| lam[0] * vs[0][i] + lam[1] * vs[1][i] + lam[2] * vs[2][i]);
                let v = tau(t, x);
                upper += mesh.area(t) * w * model.conjugate(v[0].hypot(v[1])).unwrap();
            }
        }
        let gap = upper - lower;
        min_gap = min_gap.min(gap);
        ensure(lower <= upper + 1e-12, || format!("{name}: J*(P0 tau) = {lower:e} > J*(tau) = {upper:e}"))?;
    }
    Ok(format!("50 fields, min J*(tau) - J*(P0 tau) = {min_gap:.2e}"))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, f64, fn() -> Check)> = vec![
        ("convex analysis identities on five families", 5.0, convex_analysis),
        ("discrete strong duality on a tiny mesh", 30.0, strong_duality),
        ("guaranteed upper bound soundness", 120.0, gub_soundness),
        ("byproduct feasibility across schemes", f64::INFINITY, byproduct_feasibility),
        ("p-Laplace p=3/2 desk run", 300.0, plaplace_p32),
        ("p-Laplace p=4 dual Kacanov desk run", 300.0, plaplace_p4),
        ("optimal design desk run", 300.0, optimal_design),
        ("p-Stokes p=3/2 and p=4 on the channel", 600.0, pstokes),
        ("Bingham adaptive vs fixed regularization", 600.0, bingham),
        ("P0 projection decreases the dual energy", f64::INFINITY, pi0_monotonicity),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(msg) if secs > budget => Err(format!("{msg}; runtime {secs:.1} s exceeds {budget} s")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name} ({secs:.1} s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1} s): {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
