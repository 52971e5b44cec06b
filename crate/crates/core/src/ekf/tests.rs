use super::*;
use crate::preint::{preintegrate, ImuCalibration, RawImuSample, DEFAULT_GRAVITY};
use crate::lie::{Pose, Rotation3};
use crate::traj::TrajectorySample;
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v3(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

fn random_nav(rng: &mut ChaCha8Rng) -> NavState {
    NavState {
        rotation: Rotation3::exp(&v3(rng, 1.5)),
        velocity: v3(rng, 2.0),
        position: v3(rng, 5.0),
        bias_gyro: v3(rng, 0.05),
        bias_accel: v3(rng, 0.2),
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn asym(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / a.abs().max().max(1.0)
}

#[test]
fn free_fall() {
    let s = NavState::new(Rotation3::identity(), Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
    let m = RawImuSample::new(0.0, Vector3::zeros(), Vector3::zeros());
    let dt = 0.01;
    let g = DEFAULT_GRAVITY;
    let n = propagate_nominal(&s, &m, dt, &g, &Vector12::zeros());
    assert_eq!(n.velocity, s.velocity + g * dt);
    assert!((n.position - (s.velocity * dt + g * (0.5 * dt * dt))).norm() < 1e-15);
    assert_eq!(n.rotation, s.rotation);
}

#[test]
fn stationary_zero_noise_keeps_mean_and_position_block() {
    let nav = NavState::new(Rotation3::exp(&Vector3::new(0.1, -0.2, 0.3)), Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0));
    let mut p0 = Matrix15::zeros();
    for k in 6..9 {
        p0[(k, k)] = 0.25;
    }
    let mut st = FilterState::new(0.0, nav, &p0, DEFAULT_GRAVITY, 20);
    let accel = nav.rotation.transpose().rotate(&(-DEFAULT_GRAVITY));
    for i in 0..=100 {
        let raw = RawImuSample::new(i as f64 * 0.01, Vector3::zeros(), accel);
        st.propagate(&raw, &NoiseParams::zero()).unwrap();
    }
    assert!((st.current.position - nav.position).norm() < 1e-12);
    assert!(st.current.velocity.norm() < 1e-12);
    let pp = st.cov.view((6, 6), (3, 3));
    assert!((pp - Matrix3::identity() * 0.25).abs().max() < 1e-15);
}

#[test]
fn non_monotone_rejected() {
    let mut st = FilterState::new(0.0, NavState::new(Rotation3::identity(), Vector3::zeros(), Vector3::zeros()), &Matrix15::identity(), DEFAULT_GRAVITY, 20);
    let raw = |t| RawImuSample::new(t, Vector3::zeros(), Vector3::zeros());
    st.propagate(&raw(0.1), &NoiseParams::default()).unwrap();
    assert!(matches!(st.propagate(&raw(0.05), &NoiseParams::default()), Err(EkfError::NonMonotone { .. })));
    assert!(matches!(st.propagate_to(0.0, &NoiseParams::default()), Err(EkfError::NonMonotone { .. })));
}

#[test]
fn boxplus_boxminus_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let s = random_nav(&mut rng);
        let d = Vector15::from_fn(|_, _| rng.random_range(-0.3..0.3));
        assert!((boxminus(&boxplus(&s, &d), &s) - d).norm() < 1e-12);
    }
}

#[test]
fn propagation_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = DEFAULT_GRAVITY;
    let eps = 1e-6;
    for _ in 0..100 {
        let s = random_nav(&mut rng);
        let m = RawImuSample::new(0.0, v3(&mut rng, 2.0), v3(&mut rng, 12.0));
        let dt = rng.random_range(1e-3..2e-2);
        let (a, b) = propagation_jacobians(&s, &m, dt);
        let base = propagate_nominal(&s, &m, dt, &g, &Vector12::zeros());

        let mut a_fd = DMatrix::zeros(15, 15);
        for k in 0..15 {
            let mut d = Vector15::zeros();
            d[k] = eps;
            let fp = propagate_nominal(&boxplus(&s, &d), &m, dt, &g, &Vector12::zeros());
            let fm = propagate_nominal(&boxplus(&s, &(-d)), &m, dt, &g, &Vector12::zeros());
            let col = (boxminus(&fp, &base) - boxminus(&fm, &base)) / (2.0 * eps);
            a_fd.set_column(k, &col);
        }
        let mut b_fd = DMatrix::zeros(15, 12);
        for k in 0..12 {
            let mut e = Vector12::zeros();
            e[k] = eps;
            let fp = propagate_nominal(&s, &m, dt, &g, &e);
            let fm = propagate_nominal(&s, &m, dt, &g, &(-e));
            let col = (boxminus(&fp, &base) - boxminus(&fm, &base)) / (2.0 * eps);
            b_fd.set_column(k, &col);
        }
        let ad = DMatrix::from_column_slice(15, 15, a.as_slice());
        let bd = DMatrix::from_column_slice(15, 12, b.as_slice());
        assert!(rel_err(&ad, &a_fd) < 1e-6, "A {}", rel_err(&ad, &a_fd));
        assert!(rel_err(&bd, &b_fd) < 1e-6, "B {}", rel_err(&bd, &b_fd));
    }
}

fn state_with_clones(rng: &mut ChaCha8Rng, n: usize) -> FilterState {
    let mut st = FilterState::new(0.0, random_nav(rng), &Matrix15::identity(), DEFAULT_GRAVITY, 20);
    st.propagate(&RawImuSample::new(0.0, v3(rng, 1.0), v3(rng, 10.0)), &NoiseParams::default()).unwrap();
    for k in 0..n {
        st.augment_clone(0.05 * k as f64, &NoiseParams::default()).unwrap();
    }
    // decorrelate the clones from the current pose
    for c in st.clones.iter_mut() {
        c.rotation = Rotation3::exp(&v3(rng, 1.2));
        c.position = v3(rng, 3.0);
    }
    st.current.position = v3(rng, 3.0);
    st
}

fn h_of(st: &FilterState, j: usize) -> Vector3<f64> {
    st.measurement_jacobian(j).unwrap().0
}

#[test]
fn measurement_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-6;
    for _ in 0..100 {
        let st = state_with_clones(&mut rng, 3);
        let j = rng.random_range(0..3);
        let (_, hm) = st.measurement_jacobian(j).unwrap();
        let mut fd = DMatrix::zeros(3, st.dim());
        for k in 0..st.dim() {
            let mut plus = st.clone();
            let mut minus = st.clone();
            perturb(&mut plus, k, eps);
            perturb(&mut minus, k, -eps);
            fd.set_column(k, &((h_of(&plus, j) - h_of(&minus, j)) / (2.0 * eps)));
        }
        // the filter's H is -dh/dX
        assert!(rel_err(&hm, &(-fd.clone())) < 1e-6, "{}", rel_err(&hm, &(-fd)));
    }
}

fn perturb(st: &mut FilterState, k: usize, e: f64) {
    let c = st.current_offset();
    if k < c {
        let cl = &mut st.clones[k / CLONE_DIM];
        let mut d = Vector3::zeros();
        d[k % 3] = e;
        if k % CLONE_DIM < 3 {
            cl.rotation = Rotation3::exp(&d).compose(&cl.rotation);
        } else {
            cl.position += d;
        }
    } else {
        let mut d = Vector15::zeros();
        d[k - c] = e;
        st.current = boxplus(&st.current, &d);
    }
}

#[test]
fn yaw_jacobian_at_level_attitude() {
    let hz = yaw_jacobian(&Rotation3::identity());
    let mut want = Matrix3::zeros();
    want[(2, 2)] = 1.0;
    assert_eq!(hz, want);
}

#[test]
fn yaw_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let eps = 1e-6;
    for _ in 0..100 {
        let r = Rotation3::from_euler_zyx(rng.random_range(-1.0..1.0), rng.random_range(-1.2..1.2), rng.random_range(-3.0..3.0));
        let hz = yaw_jacobian(&r);
        for k in 0..3 {
            let mut d = Vector3::zeros();
            d[k] = eps;
            let yp = Rotation3::exp(&d).compose(&r).yaw();
            let ym = Rotation3::exp(&(-d)).compose(&r).yaw();
            let fd = (yp - ym) / (2.0 * eps);
            assert!((hz[(2, k)] - fd).abs() < 1e-6 * hz[(2, k)].abs().max(1.0));
        }
    }
}

#[test]
fn augment_copies_current_pose_and_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut st = FilterState::new(0.0, random_nav(&mut rng), &Matrix15::identity(), DEFAULT_GRAVITY, 20);
    st.propagate(&RawImuSample::new(0.0, Vector3::zeros(), Vector3::zeros()), &NoiseParams::zero()).unwrap();
    st.augment_clone(0.0, &NoiseParams::zero()).unwrap();
    assert_eq!(st.clones[0].rotation, st.current.rotation);
    assert_eq!(st.clones[0].position, st.current.position);
    let c = st.current_offset();
    let src = [c, c + 1, c + 2, c + 6, c + 7, c + 8];
    for x in 0..6 {
        for y in 0..6 {
            assert_eq!(st.cov[(x, y)], st.cov[(src[x], src[y])]);
        }
        for y in 0..15 {
            assert_eq!(st.cov[(x, c + y)], st.cov[(src[x], c + y)]);
        }
    }
    st.augment_clone(0.0, &NoiseParams::zero()).unwrap();
    assert_eq!(st.clones[0], st.clones[1]);
    assert_eq!(st.cov.view((0, 0), (6, 6)), st.cov.view((6, 6), (6, 6)));
}

#[test]
fn augmented_covariance_stays_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let l = DMatrix::<f64>::from_fn(15, 15, |_, _| rng.random_range(-1.0..1.0));
        let p = &l * l.transpose();
        let p0 = Matrix15::from_column_slice(p.as_slice());
        let mut st = FilterState::new(0.0, random_nav(&mut rng), &p0, DEFAULT_GRAVITY, 20);
        st.propagate(&RawImuSample::new(0.0, Vector3::zeros(), Vector3::zeros()), &NoiseParams::zero()).unwrap();
        st.augment_clone(0.0, &NoiseParams::zero()).unwrap();
        assert!(min_eig(&st.cov) >= -1e-9 * st.cov.abs().max().max(1.0));
        assert_eq!(asym(&st.cov), 0.0);
    }
}

#[test]
fn budget_marginalizes_oldest() {
    let mut st = FilterState::new(0.0, NavState::new(Rotation3::identity(), Vector3::zeros(), Vector3::zeros()), &Matrix15::identity(), DEFAULT_GRAVITY, 3);
    st.propagate(&RawImuSample::new(0.0, Vector3::zeros(), Vector3::zeros()), &NoiseParams::default()).unwrap();
    for k in 0..5 {
        st.augment_clone(k as f64 * 0.1, &NoiseParams::default()).unwrap();
    }
    assert_eq!(st.clones.len(), 3);
    assert_eq!(st.dim(), 3 * 6 + 15);
    assert!((st.clones[0].t - 0.2).abs() < 1e-12);
}

#[test]
fn zero_innovation_keeps_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut st = state_with_clones(&mut rng, 4);
    let (h, _) = st.measurement_jacobian(1).unwrap();
    let before = st.clone();
    let r = st
        .measurement_update(1, &DisplacementMeasurement { d: h, sigma: Matrix3::identity() * 0.01 })
        .unwrap();
    assert_eq!(r.innovation, Vector3::zeros());
    assert_eq!(st.current, before.current);
    assert_eq!(st.clones, before.clones);
    assert!(st.cov.trace() <= before.cov.trace());
}

#[test]
fn bad_clone_index_and_singular_s() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut st = state_with_clones(&mut rng, 2);
    let m = DisplacementMeasurement { d: Vector3::zeros(), sigma: Matrix3::identity() };
    assert!(matches!(st.measurement_update(5, &m), Err(EkfError::CloneIndex(5))));
    st.cov.fill(0.0);
    let m0 = DisplacementMeasurement { d: Vector3::zeros(), sigma: Matrix3::zeros() };
    assert!(matches!(st.measurement_update(0, &m0), Err(EkfError::SingularInnovation)));
}

#[test]
fn one_dimensional_update_matches_scalar_kalman_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let mut st = FilterState::new(0.0, NavState::new(Rotation3::identity(), Vector3::zeros(), Vector3::zeros()), &Matrix15::identity(), DEFAULT_GRAVITY, 20);
        st.propagate(&RawImuSample::new(0.0, Vector3::zeros(), Vector3::zeros()), &NoiseParams::zero()).unwrap();
        st.augment_clone(0.0, &NoiseParams::zero()).unwrap();
        let pi: f64 = rng.random_range(0.1..3.0);
        let pj: f64 = rng.random_range(-1.0..1.0);
        st.current.position.x = pi;
        st.clones[0].position.x = pj;
        let diag: Vec<f64> = (0..st.dim()).map(|_| rng.random_range(0.01..2.0)).collect();
        st.cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        let sig2: f64 = rng.random_range(0.001..0.5);
        let d: f64 = rng.random_range(-1.0..4.0);
        let (h, _) = st.measurement_jacobian(0).unwrap();
        let meas = DisplacementMeasurement { d: Vector3::new(d, h.y, h.z), sigma: Matrix3::identity() * sig2 };

        let (ii, jj) = (st.current_offset() + 6, 3);
        let (p_ii, p_jj) = (st.cov[(ii, ii)], st.cov[(jj, jj)]);
        // scalar oracle on z = x_i - x_j
        let s = p_ii + p_jj + sig2;
        let y = (pi - pj) - d;
        let want_i = pi - p_ii / s * y;
        let want_j = pj + p_jj / s * y;
        let want_pii = p_ii - p_ii * p_ii / s;
        let want_pjj = p_jj - p_jj * p_jj / s;
        let want_pij = p_ii * p_jj / s;

        st.measurement_update(0, &meas).unwrap();
        assert!((st.current.position.x - want_i).abs() < 1e-10);
        assert!((st.clones[0].position.x - want_j).abs() < 1e-10);
        assert!((st.cov[(ii, ii)] - want_pii).abs() < 1e-10);
        assert!((st.cov[(jj, jj)] - want_pjj).abs() < 1e-10);
        assert!((st.cov[(ii, jj)] - want_pij).abs() < 1e-10);
    }
}

#[test]
fn covariance_stays_symmetric_psd_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = NoiseParams::default();
    let mut st = FilterState::new(0.0, random_nav(&mut rng), &InitialCovariance::default().matrix(), DEFAULT_GRAVITY, 5);
    let mut t = 0.0;
    st.propagate(&RawImuSample::new(t, v3(&mut rng, 1.0), v3(&mut rng, 10.0)), &noise).unwrap();
    st.augment_clone(t, &noise).unwrap();
    for step in 0..400 {
        t += 0.01;
        st.propagate(&RawImuSample::new(t, v3(&mut rng, 1.0), v3(&mut rng, 10.0)), &noise).unwrap();
        if step % 5 == 0 {
            st.augment_clone(t, &noise).unwrap();
        }
        if step % 7 == 0 && !st.clones.is_empty() {
            let j = rng.random_range(0..st.clones.len());
            let (h, _) = st.measurement_jacobian(j).unwrap();
            // large gain: tiny sigma, large innovation
            let meas = DisplacementMeasurement { d: h + v3(&mut rng, 1.0), sigma: Matrix3::identity() * 1e-6 };
            st.measurement_update(j, &meas).unwrap();
        }
        let scale = st.cov.abs().max().max(1.0);
        assert!(asym(&st.cov) <= 1e-9 * scale);
        assert!(min_eig(&st.cov) >= -1e-9 * scale, "{step} {}", min_eig(&st.cov));
        let r = st.current.rotation.matrix();
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
    }
}

fn straight_stream(n: usize, rate: f64) -> Vec<RawImuSample> {
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let w = Vector3::new(0.02 * (3.0 * t).sin(), 0.01, 0.3 * (t).cos());
            let a = Vector3::new(0.3 * (2.0 * t).cos(), 0.1, 9.81);
            RawImuSample::new(t, w, a)
        })
        .collect()
}

#[test]
fn no_prior_is_strap_down_integration() {
    let rate = 1000.0;
    let stream = straight_stream(3001, rate);
    let init = TrajectorySample::new(0.0, Rotation3::identity(), Vector3::zeros(), Vector3::new(0.5, 0.0, 0.0));
    let est = run_filter(&stream, &init, None, &FilterConfig::default()).unwrap();
    let path = preintegrate(&stream, &Pose::se3(init.rotation, init.position), init.velocity, &ImuCalibration::default()).unwrap();
    assert_eq!(est.len(), stream.len());
    for (s, p) in est.samples.iter().zip(&path.poses) {
        assert!((s.position - p.translation).norm() < 1e-6);
    }
}

#[test]
fn window_samples_hold_values() {
    let stream = straight_stream(11, 10.0);
    let w = window_samples(&stream, 0.25, 0.65);
    assert_eq!(w.first().unwrap().t, 0.25);
    assert_eq!(w.first().unwrap().omega, stream[2].omega);
    assert_eq!(w.last().unwrap().t, 0.65);
    assert_eq!(w.last().unwrap().accel, stream[6].accel);
    assert_eq!(w.len(), 6);
}

#[test]
fn zero_noise_oracle_pins_positions() {
    use crate::traj::Trajectory;
    let rate = 1000.0;
    let stream = straight_stream(4001, rate);
    let init = TrajectorySample::new(0.0, Rotation3::identity(), Vector3::zeros(), Vector3::new(0.5, 0.0, 0.0));
    let path = preintegrate(&stream, &Pose::se3(init.rotation, init.position), init.velocity, &ImuCalibration::default()).unwrap();
    let gt = Trajectory::new(
        path.times
            .iter()
            .zip(&path.poses)
            .zip(&path.velocities)
            .map(|((t, p), v)| TrajectorySample::new(*t, p.rotation, p.translation, *v))
            .collect(),
    );
    // biased stream: strap-down drifts, the oracle holds it
    let biased: Vec<_> = stream
        .iter()
        .map(|r| RawImuSample::new(r.t, r.omega, r.accel + Vector3::new(0.1, 0.0, 0.0)))
        .collect();
    let free = run_filter(&biased, &init, None, &FilterConfig::default()).unwrap();
    let mut oracle = OraclePrior::new(gt.clone(), 0.0, 1).unwrap();
    let fused = run_filter(&biased, &init, Some(&mut oracle), &FilterConfig::default()).unwrap();
    let end_err = |tr: &Trajectory| (tr.samples.last().unwrap().position - gt.samples.last().unwrap().position).norm();
    assert!(end_err(&fused) * 10.0 < end_err(&free), "{} {}", end_err(&fused), end_err(&free));
}

#[test]
fn noise_covariance_scales_with_step() {
    let w = NoiseParams::default().covariance(0.01);
    assert!((w[(0, 0)] - 1e-6 / 0.01).abs() < 1e-18);
    assert!((w[(11, 11)] - 1e-8 / 0.01).abs() < 1e-18);
    assert_eq!(NoiseParams::default().covariance(0.0), nalgebra::SMatrix::<f64, 12, 12>::zeros());
}
