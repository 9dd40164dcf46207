//! Property checks shared by the property tests and the acceptance target.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use helmls::diagnostics::Helmholtz;
use helmls::forms::{
    assemble_gn, assemble_ld, eval_fhat, eval_parts, gn_pattern, gradient_inner, residual_norms, FormOptions, Spaces,
    Triple,
};
use helmls::linalg::{cholesky_solve, dot, norm};
use helmls::mesh::Mesh;
use helmls::problem::{burgers_rect, burgers_split, example_spec, Flux, ProblemSpec};
use helmls::quadrature::{QuadratureRule, MAX_DEGREE};
use helmls::space::{FeField, FeSpace};

/// Outcome of one property check.
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, ok: bool, detail: String) -> Self {
        Self { name, ok, detail }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Spaces on the Burgers rectangle with `nt x 2nt` cells.
pub fn spaces(nt: usize, order_u: usize, order_v: usize) -> Spaces {
    let mesh = Mesh::build_structured(nt, 2 * nt, burgers_rect()).unwrap().tag_boundary(&burgers_split()).unwrap();
    Spaces::new(Arc::new(mesh), order_u, order_v).unwrap()
}

pub fn random_field(space: &Arc<FeSpace>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> FeField {
    let c = (0..space.n_dofs()).map(|_| rng.gen_range(lo..hi)).collect();
    FeField::from_coeffs(space, c).unwrap()
}

pub fn random_triple(sp: &Spaces, rng: &mut ChaCha8Rng) -> Triple {
    Triple {
        u: random_field(&sp.u, rng, 0.5, 3.5),
        q: random_field(&sp.c, rng, -1.0, 1.0),
        psi: random_field(&sp.i, rng, -1.0, 1.0),
    }
}

pub fn zero_data_problem(flux: Flux) -> ProblemSpec {
    ProblemSpec::new("zero data", flux, burgers_rect(), burgers_split(), |_| 0.0, |_| 0.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `|(grad p, curl mu)| <= 1e-10 |grad p| |curl mu|` for random discrete potentials.
pub fn orthogonality() -> Check {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for ov in [1, 2] {
        let sp = spaces(8, 1, ov);
        for _ in 0..20 {
            let p = random_field(&sp.c, &mut rng, -1.0, 1.0);
            let mu = random_field(&sp.i, &mut rng, -1.0, 1.0);
            let cross = gradient_inner(&p, false, &mu, true, &sp.rule).unwrap();
            let np = gradient_inner(&p, false, &p, false, &sp.rule).unwrap().sqrt();
            let nm = gradient_inner(&mu, true, &mu, true, &sp.rule).unwrap().sqrt();
            worst = worst.max(cross.abs() / (np * nm));
        }
    }
    Check::new("discrete orthogonality", worst <= 1e-10, format!("max relative |(grad p, curl mu)| = {worst:.2e}"))
}

/// Two-sided bounds of the regularized functional with zero data.
pub fn regularized_bounds() -> Check {
    let mut rng = rng(2);
    let prob = zero_data_problem(Flux::Burgers);
    let sps = [spaces(4, 1, 1), spaces(4, 1, 2)];
    let mut failures = 0;
    let mut min_lower: f64 = f64::INFINITY;
    let mut min_upper: f64 = f64::INFINITY;
    for k in 0..200 {
        let sp = &sps[k % 2];
        let ld = assemble_ld(&sp.c, &prob).unwrap();
        let x = Triple {
            u: random_field(&sp.u, &mut rng, -3.0, 3.0),
            q: random_field(&sp.c, &mut rng, -1.0, 1.0),
            psi: random_field(&sp.i, &mut rng, -1.0, 1.0),
        };
        let zc = FeField::zeros(&sp.c);
        let zi = FeField::zeros(&sp.i);
        let (_, fv) = residual_norms(&x.u, &zc, &zi, &prob, &sp.rule).unwrap();
        let gp = gradient_inner(&x.q, false, &x.q, false, &sp.rule).unwrap();
        let gm = gradient_inner(&x.psi, true, &x.psi, true, &sp.rule).unwrap();
        for eps in [1.0, 0.1, 0.01] {
            let opts = FormOptions { h: sp.h(), augment: false, eps };
            let f = eval_parts(sp, &x, &ld, &prob, &opts).unwrap().total();
            let e2 = eps * eps;
            let lower = e2 * (fv / (2.0 + 3.0 * e2) + gm / 2.0) + gp / 3.0;
            let upper = 3.0 * (fv + gp) + (2.0 + e2) * gm;
            // margins relative to the bound
            min_lower = min_lower.min((f - lower) / f.abs().max(1e-300));
            min_upper = min_upper.min((upper - f) / upper.abs().max(1e-300));
            if f < lower * (1.0 - 1e-12) || f > upper * (1.0 + 1e-12) {
                failures += 1;
            }
        }
    }
    Check::new(
        "regularized coercivity and continuity bounds",
        failures == 0,
        format!(
            "600 evaluations, {failures} violations; min relative margins lower {min_lower:.3e}, upper {min_upper:.3e}"
        ),
    )
}

/// Central differences of the functional against the assembled gradient `-2 b`.
pub fn directional_derivative() -> Check {
    let mut rng = rng(3);
    let prob = example_spec(1).unwrap();
    let mut worst: f64 = 0.0;
    for (ov, eps) in [(1, 0.0), (2, 0.0), (1, 0.1)] {
        let sp = spaces(8, 1, ov);
        let ld = assemble_ld(&sp.c, &prob).unwrap();
        let opts = FormOptions { h: sp.h(), augment: true, eps };
        for _ in 0..3 {
            let x = random_triple(&sp, &mut rng);
            let sys = assemble_gn(&sp, &x, &ld, &prob, &opts, gn_pattern(&sp)).unwrap();
            let d: Vec<f64> = (0..sp.n_unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tau = 1e-5;
            let fp = eval_fhat(&sp, &x.step(tau, &d), &ld, &prob, &opts).unwrap();
            let fm = eval_fhat(&sp, &x.step(-tau, &d), &ld, &prob, &opts).unwrap();
            let fd = (fp - fm) / (2.0 * tau);
            worst = worst.max(rel(fd, -2.0 * dot(&sys.b, &d)));
        }
    }
    Check::new("directional derivative", worst <= 1e-5, format!("max relative difference {worst:.2e}"))
}

/// Smooth data for `f(v) = [v, a v]` with solution `1 + sin(t) cos(x)`.
pub fn linear_problem(a: f64) -> ProblemSpec {
    let u = |p: [f64; 2]| 1.0 + p[0].sin() * p[1].cos();
    let r = move |p: [f64; 2]| p[0].cos() * p[1].cos() - a * p[0].sin() * p[1].sin();
    ProblemSpec::new("linear", Flux::Linear { a }, burgers_rect(), burgers_split(), r, u)
}

/// One Gauss-Newton step minimizes the quadratic functional of a linear flux.
pub fn linear_one_step() -> Check {
    let mut worst: f64 = 0.0;
    for (ov, a) in [(1, 1.0), (2, 0.5)] {
        let prob = linear_problem(a);
        let sp = spaces(8, 1, ov);
        let ld = assemble_ld(&sp.c, &prob).unwrap();
        let opts = FormOptions { h: sp.h(), augment: true, eps: 0.0 };
        let x0 = Triple::zeros(&sp);
        let s0 = assemble_gn(&sp, &x0, &ld, &prob, &opts, gn_pattern(&sp)).unwrap();
        let d0 = cholesky_solve(&s0.a, &s0.b).unwrap();
        let x1 = x0.step(1.0, &d0);
        let s1 = assemble_gn(&sp, &x1, &ld, &prob, &opts, gn_pattern(&sp)).unwrap();
        let d1 = cholesky_solve(&s1.a, &s1.b).unwrap();
        worst = worst.max(norm(&d1));
    }
    Check::new("linear flux converges in one step", worst <= 1e-10, format!("second update norm {worst:.2e}"))
}

/// The reduced functional equals half the squared discrete dual-norm residual.
pub fn reduced_identity() -> Check {
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    for (k, ov) in [(1, 1), (3, 2)] {
        let prob = example_spec(k).unwrap();
        let sp = spaces(8, 1, ov);
        let hz = Helmholtz::new(&sp, &prob).unwrap();
        for _ in 0..3 {
            let v = random_field(&sp.u, &mut rng, 0.5, 3.5);
            let red = hz.reduced_functional(&v).unwrap();
            let r = hz.hminus1_residual(&v).unwrap();
            worst = worst.max(rel(red, 0.5 * r * r));
        }
    }
    Check::new("reduced functional identity", worst <= 1e-10, format!("max relative difference {worst:.2e}"))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Every rule integrates all monomials up to its declared degree exactly.
pub fn quadrature_exactness() -> Check {
    let mut worst: f64 = 0.0;
    for degree in 1..=MAX_DEGREE {
        let rule = QuadratureRule::new(degree).unwrap();
        for a in 0..=degree {
            for b in 0..=degree - a {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let got = rule.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    Check::new(
        "quadrature exactness",
        worst <= 1e-11,
        format!("degrees 1..={MAX_DEGREE}, max relative error {worst:.2e}"),
    )
}

/// All property checks in order.
pub fn property_suite() -> Vec<Check> {
    vec![
        orthogonality(),
        regularized_bounds(),
        directional_derivative(),
        linear_one_step(),
        reduced_identity(),
        quadrature_exactness(),
    ]
}
