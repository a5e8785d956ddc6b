use std::sync::Arc;

use ahlp::ipm::{self, assemble_sigma, check_termination, predictor_corrector_iteration, residuals, step_lengths, Bounds, Data, Direction, IpmOptions, IterateState, Status};
use ahlp::kkt::{KktSolver, Regularization, SolverConfig, SolverRegistry};
use ahlp::oracle::{assemble_dense, dense_ipm_solve, dense_kkt_solve, DenseKktSolver};
use ahlp::problem::{generate, io, merge_blocks, to_standard_form, ArrowheadProblem, Block, GeneratorParams, SparseBlock, StandardArrowhead};

const INF: f64 = f64::INFINITY;

fn state(x: f64, y: Vec<f64>, zl: f64, zu: f64) -> IterateState {
    IterateState { x: vec![x], y, z_l: vec![zl], z_u: vec![zu] }
}

fn dir(dx: f64, dzl: f64, dzu: f64) -> Direction {
    Direction { dx: vec![dx], dy: vec![], dz_l: vec![dzl], dz_u: vec![dzu] }
}

/// min x  s.t.  x = 1, x >= 0
fn unit_problem() -> StandardArrowhead {
    let mut b1 = Block::empty(1, 1, 1, 0, 0, 0, 0);
    b1.obj = vec![1.0];
    b1.lower = vec![0.0];
    b1.rhs_eq = vec![1.0];
    b1.b = SparseBlock::from_entries(1, 1, vec![(0, 0, 1.0)]);
    let p = ArrowheadProblem { blocks: vec![Block::empty(0, 0, 0, 0, 0, 0, 0), b1], ..Default::default() };
    to_standard_form(&p).unwrap()
}

#[test]
fn sigma_of_one_and_two_sided_bounds() {
    let b = Bounds { lower: vec![0.0], upper: vec![INF] };
    assert_eq!(assemble_sigma(&b, &state(1.0, vec![], 2.0, 0.0)), vec![-2.0]);
    let b = Bounds { lower: vec![0.0], upper: vec![3.0] };
    assert_eq!(assemble_sigma(&b, &state(2.0, vec![], 1.0, 3.0)), vec![-(0.5 + 3.0)]);
    let b = Bounds { lower: vec![-INF], upper: vec![INF] };
    assert_eq!(assemble_sigma(&b, &state(5.0, vec![], 0.0, 0.0)), vec![ipm::FREE_SIGMA]);
}

#[test]
fn step_length_examples() {
    let b = Bounds { lower: vec![0.0], upper: vec![INF] };
    let it = state(1.0, vec![], 1.0, 0.0);
    assert_eq!(step_lengths(&b, &it, &dir(-1.0, 0.0, 0.0)).0, 0.99995);
    assert_eq!(step_lengths(&b, &it, &dir(1.0, 0.0, 0.0)).0, 1.0);
    assert_eq!(step_lengths(&b, &it, &dir(-2.0, 0.0, 0.0)).0, 0.99995 * 0.5);
    assert_eq!(step_lengths(&b, &it, &dir(0.0, -4.0, 0.0)).1, 0.99995 * 0.25);
}

#[test]
fn one_iteration_on_unit_problem() {
    let s = unit_problem();
    let d = Data::new(&s);
    let it = state(2.0, vec![0.0], 1.0, 0.0);
    let res = residuals(&d, &it);
    assert_eq!(res.r_y, vec![-1.0]);
    let mut kkt = DenseKktSolver::new(Arc::new(s.clone()), Regularization::default());
    kkt.factor(&assemble_sigma(&d.bounds, &it)).unwrap();
    let (next, info) = predictor_corrector_iteration(&d, &it, &res, &mut kkt, 3).unwrap();
    assert!(next.is_interior(&d.bounds));
    assert!((next.x[0] - 1.0).abs() < (it.x[0] - 1.0).abs());
    let after = residuals(&d, &next);
    // the primal residual is linear in x, so it shrinks by exactly 1 - alpha_p
    assert!((after.r_y[0] - (1.0 - info.alpha_primal) * res.r_y[0]).abs() < 1e-9);
    assert!(after.mu < res.mu);
}

#[test]
fn optimum_is_a_fixed_point() {
    let s = unit_problem();
    let d = Data::new(&s);
    let it = state(1.0, vec![1.0 - 1e-9], 1e-9, 0.0);
    let res = residuals(&d, &it);
    assert!(check_termination(&res, 1e-8));
    let mut kkt = DenseKktSolver::new(Arc::new(s.clone()), Regularization::default());
    kkt.factor(&assemble_sigma(&d.bounds, &it)).unwrap();
    let (next, _) = predictor_corrector_iteration(&d, &it, &res, &mut kkt, 3).unwrap();
    assert!((next.x[0] - 1.0).abs() < 1e-8);
    assert!((next.y[0] - 1.0).abs() < 1e-8);
    assert!(check_termination(&residuals(&d, &next), 1e-8));

    let r = dense_ipm_solve(&s);
    assert_eq!(r.status, Status::Optimal);
    assert!((r.objective - 1.0).abs() < 1e-7);
}

#[test]
fn dense_assembly_examples() {
    let s = unit_problem();
    let sys = assemble_dense(&s, &[-2.0], Regularization::default()).unwrap();
    assert_eq!(sys.order(), 2);
    assert_eq!(sys.matrix.data, vec![-2.0 - 1e-10, 1.0, 1.0, 1e-10]);

    // no rows at all: the system is Sigma itself
    let mut b1 = Block::empty(1, 3, 0, 0, 0, 0, 0);
    b1.obj = vec![1.0, -2.0, 0.5];
    b1.lower = vec![0.0; 3];
    let p = to_standard_form(&ArrowheadProblem { blocks: vec![Block::empty(0, 0, 0, 0, 0, 0, 0), b1], ..Default::default() }).unwrap();
    let zero = Regularization { primal: 0.0, dual: 0.0 };
    let sys = assemble_dense(&p, &[1.0, 1.0, 1.0], zero).unwrap();
    assert_eq!(sys.order(), 3);
    let c = p.flat_obj();
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    assert_eq!(dense_kkt_solve(&sys, &neg_c).unwrap(), neg_c);
    let sys = assemble_dense(&p, &[-1.0, -3.0, -0.5], zero).unwrap();
    assert_eq!(sys.matrix.data, vec![-1.0, 0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, -0.5]);
}

/// Free variables carry a `1e-10` diagonal, which leaves their step only
/// determined to about `1e-10 * cond`; box them so the comparison is tight.
fn boxed(mut p: ArrowheadProblem) -> ArrowheadProblem {
    for b in &mut p.blocks {
        for (l, u) in b.lower.iter_mut().zip(&mut b.upper) {
            if !l.is_finite() {
                *l = -1e3;
            }
            if !u.is_finite() {
                *u = 1e3;
            }
        }
    }
    p
}

fn first_iterations(s: &StandardArrowhead) -> Vec<(IterateState, ipm::Residuals)> {
    let d = Data::new(s);
    let shared = Arc::new(s.clone());
    let registry = SolverRegistry::with_defaults();
    let cfg = SolverConfig { ranks: 3, layers: 2, ..Default::default() };
    let mut dense = registry.create("dense", shared.clone(), &cfg).unwrap();
    let start = ipm::starting_point(&d, dense.as_mut()).unwrap();
    let res = residuals(&d, &start);
    let sigma = assemble_sigma(&d.bounds, &start);
    ["dense", "flat", "hierarchical"]
        .iter()
        .map(|name| {
            let mut k = registry.create(name, shared.clone(), &cfg).unwrap();
            k.factor(&sigma).unwrap();
            let (next, _) = predictor_corrector_iteration(&d, &start, &res, k.as_mut(), 3).unwrap();
            let r = residuals(&d, &next);
            (next, r)
        })
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

#[test]
fn one_structured_iteration_matches_dense() {
    let g = generate(&GeneratorParams::new(5, 4, 8).with_uniform_local_links(1).with_seed(11)).unwrap();
    let runs = first_iterations(&to_standard_form(&boxed(g.problem.clone())).unwrap());
    for (it, _) in &runs[1..] {
        assert!(close(&it.x, &runs[0].0.x, 1e-8));
        assert!(close(&it.y, &runs[0].0.y, 1e-8));
        assert!(close(&it.z_l, &runs[0].0.z_l, 1e-8));
        assert!(close(&it.z_u, &runs[0].0.z_u, 1e-8));
    }
    // with free variables y, the residuals and mu still agree; c^T x does not
    // (its free part is only determined to about 1e-6)
    let runs = first_iterations(&to_standard_form(&g.problem).unwrap());
    for (it, r) in &runs[1..] {
        assert!(close(&it.y, &runs[0].0.y, 1e-8));
        assert!(close(&[r.rel_primal, r.rel_dual, r.mu], &[runs[0].1.rel_primal, runs[0].1.rel_dual, runs[0].1.mu], 1e-8));
    }
}

#[test]
fn merging_blocks_preserves_the_optimum() {
    let g = generate(&GeneratorParams::new(6, 3, 6).with_uniform_local_links(1).with_seed(3)).unwrap();
    let base = dense_ipm_solve(&to_standard_form(&g.problem).unwrap());
    assert_eq!(base.status, Status::Optimal);
    for factor in [2, 3, 4] {
        let merged = merge_blocks(&g.problem, factor).unwrap();
        assert_eq!(merged.num_blocks(), 6usize.div_ceil(factor));
        let r = dense_ipm_solve(&to_standard_form(&merged).unwrap());
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - base.objective).abs() <= 1e-6 * (1.0 + base.objective.abs()));
    }
}

#[test]
fn fixture_round_trips_and_solves() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny.ahlp");
    let p = io::load(path).unwrap();
    assert_eq!(p.num_blocks(), 3);
    assert_eq!(io::parse(&io::write(&p)).unwrap(), p);
    let s = to_standard_form(&p).unwrap();
    let oracle = dense_ipm_solve(&s);
    assert_eq!(oracle.status, Status::Optimal);
    assert!((oracle.objective - -5.3480902475659908).abs() < 1e-6);
    let registry = SolverRegistry::with_defaults();
    for name in ["flat", "hierarchical"] {
        let mut k = registry.create(name, Arc::new(s.clone()), &SolverConfig { ranks: 2, ..Default::default() }).unwrap();
        let r = ipm::solve(&s, k.as_mut(), &IpmOptions::default());
        assert_eq!(r.status, Status::Optimal, "{name}");
        assert!((r.objective - oracle.objective).abs() <= 1e-6 * (1.0 + oracle.objective.abs()));
    }
}
