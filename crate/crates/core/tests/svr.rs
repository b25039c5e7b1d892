mod oracle;

use advcert_core::model::{DataPoint, Dataset, KernelSpec, Predictor};
use advcert_core::regions::{ApproxSet, ApproxSpec, RegionSpec};
use advcert_core::svr::{train, train_on_sets, TrainConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    data: Dataset,
    sets: Vec<ApproxSet>,
    cfg: TrainConfig,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let d = rng.random_range(1..=2);
    let m = rng.random_range(1..=3);
    let rho = [0.05, 0.5, 5.0][rng.random_range(0..3)];
    let tau = rng.random_range(0.05..1.0);
    let mut pts = Vec::new();
    let mut sets = Vec::new();
    for _ in 0..n {
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = rng.random_range(-1.0..1.0);
        let p = DataPoint::new(u, y);
        let mut set = vec![p.clone()];
        for _ in 1..m {
            let du: Vec<f64> = p.u.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
            set.push(DataPoint::new(du, p.y + rng.random_range(-0.2..0.2)));
        }
        pts.push(p);
        sets.push(ApproxSet { points: set });
    }
    Instance { data: Dataset::new(pts).unwrap(), sets, cfg: TrainConfig { tau, rho, ..Default::default() } }
}

fn rows(inst: &Instance) -> Vec<(usize, Vec<f64>, f64)> {
    inst.sets.iter().enumerate().flat_map(|(i, s)| s.points.iter().map(move |q| (i, q.u.clone(), q.y))).collect()
}

fn linear(p: &Predictor) -> (Vec<f64>, f64, f64) {
    match p {
        Predictor::Linear(l) => (l.w.clone(), l.b, l.gamma),
        _ => panic!("expected a linear predictor"),
    }
}

#[test]
fn objective_matches_enumeration_oracle() {
    for seed in 0..60 {
        let inst = instance(seed);
        let sol = train_on_sets(&inst.data, &inst.sets, &inst.cfg, None).unwrap();
        let want = oracle::linear_band_optimum(&rows(&inst), inst.data.len(), inst.cfg.tau, inst.cfg.rho);
        let rel = (sol.objective - want).abs() / want.abs().max(1e-12);
        assert!(rel <= 1e-6, "seed {seed}: objective {} vs oracle {want}", sol.objective);
    }
}

#[test]
fn permutation_invariance() {
    for seed in 100..140 {
        let inst = instance(seed);
        let a = train_on_sets(&inst.data, &inst.sets, &inst.cfg, None).unwrap();
        let n = inst.data.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let data = Dataset::new(perm.iter().map(|&i| inst.data.points()[i].clone()).collect()).unwrap();
        let sets: Vec<ApproxSet> = perm.iter().map(|&i| inst.sets[i].clone()).collect();
        let b = train_on_sets(&data, &sets, &inst.cfg, None).unwrap();
        let (wa, ba, ga) = linear(&a.predictor);
        let (wb, bb, gb) = linear(&b.predictor);
        for (x, y) in wa.iter().zip(&wb) {
            assert!((x - y).abs() <= 1e-6, "seed {seed}: w {wa:?} vs {wb:?}");
        }
        assert!((ba - bb).abs() <= 1e-6 && (ga - gb).abs() <= 1e-6, "seed {seed}");
    }
}

#[test]
fn slacks_certify_feasibility() {
    for seed in 200..240 {
        let inst = instance(seed);
        let sol = train_on_sets(&inst.data, &inst.sets, &inst.cfg, None).unwrap();
        for (set, xi) in inst.sets.iter().zip(&sol.slacks) {
            assert!(*xi >= 0.0);
            for q in &set.points {
                let m = sol.predictor.margin(q).unwrap();
                assert!(m - xi <= 1e-7, "seed {seed}: margin {m} exceeds slack {xi}");
            }
        }
    }
}

#[test]
fn kernel_objective_never_worse_than_flat_fit() {
    // a constant function is feasible for the kernel program with zero coefficients
    for seed in 300..320 {
        let inst = instance(seed);
        let k = train_on_sets(&inst.data, &inst.sets, &inst.cfg, Some(KernelSpec::Gaussian { sigma: 0.7 })).unwrap();
        let r = rows(&inst);
        let n = inst.data.len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for (o, _, y) in &r {
            lo[*o] = lo[*o].min(*y);
            hi[*o] = hi[*o].max(*y);
        }
        let flat = oracle::band_min(&lo, &hi, inst.cfg.rho);
        assert!(k.objective <= flat * (1.0 + 1e-7) + 1e-9, "seed {seed}: {} > {flat}", k.objective);
    }
}

#[test]
fn training_rejects_empty_data() {
    let data = Dataset::new(vec![]).unwrap();
    assert!(train(&data, &RegionSpec::Singleton, &ApproxSpec::CenterOnly, &TrainConfig::default(), None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // a larger slack price can only shrink the total slack
    #[test]
    fn slack_decreases_with_rho(seed in 0u64..10_000) {
        let inst = instance(seed);
        let mut prev = f64::INFINITY;
        for rho in [0.05, 0.5, 5.0] {
            let cfg = TrainConfig { rho, ..inst.cfg };
            let sol = train_on_sets(&inst.data, &inst.sets, &cfg, None).unwrap();
            let total: f64 = sol.slacks.iter().sum();
            prop_assert!(total <= prev + 1e-6);
            prev = total;
        }
    }

    #[test]
    fn gamma_is_nonnegative(seed in 0u64..10_000) {
        let inst = instance(seed);
        let sol = train_on_sets(&inst.data, &inst.sets, &inst.cfg, None).unwrap();
        prop_assert!(sol.predictor.gamma() >= 0.0);
    }
}


#[test]
fn zero_width_optimum_converges() {
    // optimum at gamma = 0, where the Newton systems become badly scaled
    let inst = instance(10_024);
    let sol = train_on_sets(&inst.data, &inst.sets, &inst.cfg, None).unwrap();
    let want = oracle::linear_band_optimum(&rows(&inst), inst.data.len(), inst.cfg.tau, inst.cfg.rho);
    assert!((sol.objective - want).abs() <= 1e-6 * want);
}
