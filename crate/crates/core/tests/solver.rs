mod common;

use helmls::diagnostics::Helmholtz;
use helmls::forms::{assemble_ld, eval_parts, FormOptions, Triple};
use helmls::gn::{nested_iterate, solve_level, Discretization, GnOptions, LinearSolver, Termination};
use helmls::problem::{example_spec, Flux};

#[test]
fn functional_decreases_along_accepted_steps() {
    let prob = example_spec(3).unwrap();
    let reps = nested_iterate(&prob, 2, &Discretization::burgers(1, 1), &GnOptions::default()).unwrap();
    for r in &reps {
        assert_eq!(r.termination, Termination::Converged);
        let mut prev = r.initial_functional;
        for l in &r.log {
            assert!(l.functional < prev, "level {} iter {}", r.level, l.iter);
            assert!(l.damping > 0.0 && l.damping <= 1.0);
            prev = l.functional;
        }
        assert_eq!(prev, r.m_h);
        assert_eq!(r.iterations, r.log.len());
    }
    assert!(reps[1].m_h <= reps[0].m_h + 1e-10);
}

#[test]
fn linear_flux_solved_by_first_step() {
    let prob = common::linear_problem(1.0);
    let sp = common::spaces(8, 1, 1);
    let rep = solve_level(&prob, &sp, &GnOptions::default(), Triple::zeros(&sp)).unwrap();
    assert!(rep.iterations <= 2, "{} iterations", rep.iterations);
    let first = rep.log[0].functional;
    assert!((first - rep.m_h).abs() <= 1e-10 * first.abs().max(1.0), "{first} vs {}", rep.m_h);
    assert_eq!(rep.log[0].damping, 1.0);
}

#[test]
fn zero_data_stops_immediately() {
    let prob = common::zero_data_problem(Flux::Burgers);
    let sp = common::spaces(4, 1, 1);
    let rep = solve_level(&prob, &sp, &GnOptions::default(), Triple::zeros(&sp)).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.m_h, 0.0);
    assert_eq!(rep.termination, Termination::StepTolerance);
}

#[test]
fn first_level_iteration_count_example2() {
    let prob = example_spec(2).unwrap();
    let reps = nested_iterate(&prob, 1, &Discretization::burgers(1, 1), &GnOptions::default()).unwrap();
    assert!(reps[0].iterations.abs_diff(5) <= 3, "{} iterations", reps[0].iterations);
}

#[test]
fn runs_are_deterministic() {
    let prob = example_spec(2).unwrap();
    let run = || nested_iterate(&prob, 2, &Discretization::burgers(1, 2), &GnOptions::default()).unwrap();
    let (a, b) = (run(), run());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.iterations, y.iterations);
        assert_eq!(x.m_h.to_bits(), y.m_h.to_bits());
        assert_eq!(x.fields.to_vec(), y.fields.to_vec());
    }
}

#[test]
fn direct_and_iterative_solvers_agree() {
    let prob = example_spec(1).unwrap();
    let disc = Discretization::burgers(1, 1);
    let direct =
        nested_iterate(&prob, 1, &disc, &GnOptions { solver: LinearSolver::Direct, ..Default::default() }).unwrap();
    let cg = GnOptions { solver: LinearSolver::Cg { tol: 1e-12, max_iters: 200_000 }, ..Default::default() };
    let iterative = nested_iterate(&prob, 1, &disc, &cg).unwrap();
    assert_eq!(direct[0].iterations, iterative[0].iterations);
    let rel = (direct[0].m_h - iterative[0].m_h).abs() / direct[0].m_h.abs();
    assert!(rel < 1e-8, "{rel:e}");
}

#[test]
fn regularization_enters_with_eps_squared() {
    let prob = example_spec(1).unwrap();
    let opts = GnOptions { eta: Some(1.0), ..Default::default() };
    let reps = nested_iterate(&prob, 1, &Discretization::burgers(1, 1), &opts).unwrap();
    assert_eq!(reps[0].eps, reps[0].h);
    let sp = &reps[0].spaces;
    let ld = assemble_ld(&sp.c, &prob).unwrap();
    let fo = FormOptions { h: sp.h(), augment: true, eps: reps[0].eps };
    let parts = eval_parts(sp, &reps[0].fields, &ld, &prob, &fo).unwrap();
    assert!((parts.total() - reps[0].m_h).abs() <= 1e-12 * reps[0].m_h.abs());
    let unreg = eval_parts(sp, &reps[0].fields, &ld, &prob, &FormOptions { eps: 0.0, ..fo }).unwrap();
    assert!((parts.total() - unreg.total() - parts.regularization).abs() <= 1e-12 * parts.total().abs());
}

#[test]
fn shifted_functional_identity() {
    // |f - grad q - curl psi|^2 + |grad q - grad q_*|^2 equals the data form plus |grad q_*|^2
    let prob = example_spec(3).unwrap();
    let mut rng = common::rng(11);
    for ov in [1, 2] {
        let sp = common::spaces(8, 1, ov);
        let hz = Helmholtz::new(&sp, &prob).unwrap();
        let qs = hz.q_star().unwrap();
        let ld = assemble_ld(&sp.c, &prob).unwrap();
        let fo = FormOptions { h: sp.h(), augment: false, eps: 0.0 };
        let gq = helmls::forms::gradient_inner(&qs, false, &qs, false, &sp.rule).unwrap();
        for _ in 0..3 {
            let x = common::random_triple(&sp, &mut rng);
            let fhat = eval_parts(&sp, &x, &ld, &prob, &fo).unwrap().total();
            let f = hz.eval_f(&x, &qs).unwrap();
            assert!((fhat + gq - f).abs() <= 1e-10 * f.abs(), "{} vs {f}", fhat + gq);
        }
    }
}

#[test]
fn invalid_options_rejected() {
    let prob = example_spec(1).unwrap();
    let disc = Discretization::burgers(1, 1);
    assert!(nested_iterate(&prob, 0, &disc, &GnOptions::default()).is_err());
    assert!(nested_iterate(&prob, 1, &disc, &GnOptions { rel_tol: 0.0, ..Default::default() }).is_err());
    assert!(nested_iterate(&prob, 1, &disc, &GnOptions { shrink: 1.0, ..Default::default() }).is_err());
    assert!(nested_iterate(&prob, 1, &Discretization::burgers(3, 1), &GnOptions::default()).is_err());
}
