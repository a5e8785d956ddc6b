use std::sync::Arc;

use ahlp::ipm::{self, IpmOptions, Status};
use ahlp::kkt::{SolverConfig, SolverRegistry};
use ahlp::oracle;
use ahlp::problem::{generate, to_standard_form, GeneratorParams};

fn instance(n: usize, seed: u64) -> (Arc<ahlp::problem::StandardArrowhead>, f64) {
    let mut p = GeneratorParams::new(n, 4, 9).with_uniform_local_links(1).with_seed(seed);
    p.linking_vars = 2;
    p.global_links = 1;
    let g = generate(&p).unwrap();
    (Arc::new(to_standard_form(&g.problem).unwrap()), g.planted.objective)
}

#[test]
fn every_strategy_reaches_planted_optimum() {
    let reg = SolverRegistry::with_defaults();
    for seed in 0..3 {
        let (p, planted) = instance(4, seed);
        for name in ["dense", "flat", "hierarchical"] {
            let cfg = SolverConfig { ranks: 2, ..Default::default() };
            let mut kkt = reg.create(name, p.clone(), &cfg).unwrap();
            let r = ipm::solve(&p, kkt.as_mut(), &IpmOptions::default());
            assert_eq!(r.status, Status::Optimal, "{name} seed {seed}: {:?}", r.message);
            let rel = (r.objective - planted).abs() / (1.0 + planted.abs());
            assert!(rel < 1e-5, "{name} seed {seed}: {} vs {planted} after {} its", r.objective, r.iterations);
            println!("{name} seed {seed}: {} its", r.iterations);
        }
    }
}

#[test]
fn oracle_hits_planted_to_1e7() {
    let (p, planted) = instance(3, 9);
    let r = oracle::dense_ipm_solve(&p);
    assert_eq!(r.status, Status::Optimal);
    assert!((r.objective - planted).abs() / (1.0 + planted.abs()) < 1e-7);
}
