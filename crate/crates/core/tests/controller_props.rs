use imdp_core::controller::{refine, validate, FeedbackController};
use imdp_core::dynamics::FeedbackLaw;
use imdp_core::harness::{preset, Setup};
use imdp_core::robust_mdp::robust_value_iteration;
use imdp_core::seed::rng_from_seed;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use std::sync::OnceLock;

/// Controller for the 2D preset at a moderate sample size.
fn fixture() -> &'static (Setup, FeedbackController) {
    static CELL: OnceLock<(Setup, FeedbackController)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = preset("double-integrator-2d").unwrap();
        let setup = cfg.setup().unwrap();
        let imdp = setup.abstraction(&cfg.abstraction_config(800, 0)).unwrap().imdp().unwrap();
        let sol = robust_value_iteration(&imdp, cfg.objective.horizon).unwrap();
        let ctrl = refine(&sol, &setup.partition, &setup.actions, &setup.system).unwrap();
        (setup, ctrl)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn law_is_affine_and_feasible_per_region(seed in any::<u64>(), k in 0usize..8) {
        let (setup, ctrl) = fixture();
        let part = &setup.partition;
        let mut rng = rng_from_seed(seed);
        for _ in 0..200 {
            let r = part.free_regions()[rng.random_range(0..part.free_regions().len())];
            let cell = part.region_box(r).unwrap();
            let point = |rng: &mut rand_chacha::ChaCha8Rng| {
                DVector::from_fn(2, |i, _| rng.random_range(cell.lo[i]..cell.hi[i]))
            };
            let (x, y) = (point(&mut rng), point(&mut rng));
            let alpha: f64 = rng.random();
            let mid = &x * alpha + &y * (1.0 - alpha);
            match (ctrl.control(&x, k), ctrl.control(&y, k), ctrl.control(&mid, k)) {
                (Some(ux), Some(uy), Some(um)) => {
                    let blend = &ux * alpha + &uy * (1.0 - alpha);
                    prop_assert!((um - blend).amax() <= 1e-9);
                    prop_assert!(setup.system.input_feasible(&ux));
                    prop_assert!(setup.system.input_feasible(&uy));
                }
                (None, None, None) => {}
                other => prop_assert!(false, "region {} step {k}: partially defined {other:?}", r.0),
            }
        }
    }
}

#[test]
fn certificate_is_statistically_sound() {
    let cfg = preset("double-integrator-2d").unwrap();
    let setup = cfg.setup().unwrap();
    let (reps, runs) = (20, 2000);
    let mut below = 0;
    for rep in 0..reps {
        let imdp = setup.abstraction(&cfg.abstraction_config(400, rep)).unwrap().imdp().unwrap();
        let sol = robust_value_iteration(&imdp, cfg.objective.horizon).unwrap();
        let ctrl = refine(&sol, &setup.partition, &setup.actions, &setup.system).unwrap();
        let report = validate(&setup.system, &ctrl, &setup.x0, cfg.objective.horizon, runs, cfg.validation_seed(rep)).unwrap();
        assert!(report.successes <= report.runs);
        if report.empirical + 2.0 * report.std_error() < report.certified {
            below += 1;
        }
    }
    let fraction = below as f64 / reps as f64;
    assert!(fraction <= cfg.abstraction.beta + 0.05, "{below}/{reps} repetitions below the certificate");
}
