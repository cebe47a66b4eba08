mod common;

use cplass_core::{fit_given_changepoints, ChangepointVector, Trajectory};

#[test]
fn worked_example_has_zero_residual() {
    let y = [0.0, 1.0, 2.0, 3.0, 3.0, 3.0];
    let traj = Trajectory::new(1.0, 1, y.to_vec()).unwrap();
    let r = ChangepointVector::from_indices(6, &[4]).unwrap();
    let exact = common::exact_fit(&traj, &r);
    assert_eq!(exact.rss, 0.0);
    let seg = fit_given_changepoints(&traj, &r).unwrap();
    assert!(seg.rss < 1e-24);
    assert!((seg.velocities[0][0] - 1.0).abs() < 1e-12);
    assert!(seg.velocities[1][0].abs() < 1e-12);
}

#[test]
fn matches_rational_normal_equations() {
    for seed in 0..200 {
        let (traj, r) = common::random_instance(seed);
        let err = common::fit_disagreement(&traj, &r);
        assert!(err <= 1e-9, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn rss_matches_residuals_of_returned_signal() {
    for seed in 200..240 {
        let (traj, r) = common::random_instance(seed);
        let seg = fit_given_changepoints(&traj, &r).unwrap();
        let direct: f64 = (0..traj.n())
            .flat_map(|i| {
                let f = seg.evaluate(traj.time(i));
                traj.row(i).iter().zip(f).map(|(y, v)| (y - v).powi(2)).collect::<Vec<_>>()
            })
            .sum();
        assert!((direct - seg.rss).abs() <= 1e-9 * direct.max(1e-12));
    }
}

#[test]
fn kink_on_first_observation_is_degenerate() {
    let traj = common::kinked(8, 2, 3, 0.1);
    let r = ChangepointVector::from_indices(8, &[1]).unwrap();
    assert!(fit_given_changepoints(&traj, &r).is_err());
    let s = cplass_core::score(&traj, &r, &Default::default());
    assert!(s.is_degenerate());
}
