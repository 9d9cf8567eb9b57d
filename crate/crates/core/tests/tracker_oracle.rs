use canopy_core::geometry::{cylinder_box_in_camera, Pose};
use canopy_core::io::LabelRecord;
use canopy_core::synth::level_camera_rotation;
use canopy_core::tracker::{
    chi2_gate_threshold, mahalanobis, predict, update, TrackState, TrackStatus, Tracker, TrackerConfig,
};
use canopy_oracles::{chi2_quantile, is_symmetric_psd3, mahalanobis2};
use nalgebra::{Matrix3, Point3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(m: &Matrix3<f64>) -> Vec<Vec<f64>> {
    (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect()
}

fn spd() -> impl Strategy<Value = Matrix3<f64>> {
    (prop::array::uniform9(-1.0..1.0f64), prop::array::uniform3(0.01..1.0f64)).prop_map(|(a, d)| {
        let a = Matrix3::from_row_slice(&a);
        a * a.transpose() + Matrix3::from_diagonal(&Vector3::from(d))
    })
}

fn track(t: Vector3<f64>, sigma: Matrix3<f64>) -> TrackState {
    TrackState {
        id: 0,
        t,
        sigma,
        hits: 1,
        frames_since_update: 0,
        status: TrackStatus::Tentative,
        frames_outside_fov: 0,
        base_z: 0.0,
        height: 3.0,
    }
}

fn pose_at(k: usize, x: f64) -> Pose {
    Pose::from_rotation_matrix(k, Vector3::new(x, 0.0, 1.0), level_camera_rotation(0.0))
}

fn detection(pose: &Pose, xy: [f64; 2], w: f64) -> LabelRecord {
    LabelRecord::from_box(&cylinder_box_in_camera(pose, xy, 0.0, w, 3.0), 1.0)
}

/// World `(x, y, w)` measurement of a camera-frame box: bottom center and
/// mean horizontal extent.
fn measurement(l: &LabelRecord, pose: &Pose) -> Vector3<f64> {
    let bottom = Point3::new(l.center.x, l.center.y + l.extents.y / 2.0, l.center.z);
    let w = pose.camera_to_world(&bottom);
    Vector3::new(w.x, w.y, 0.5 * (l.extents.x + l.extents.z))
}

#[test]
fn gate_matches_incomplete_gamma_bisection() {
    for dof in 1..=6 {
        for p in [0.5, 0.9, 0.95, 0.99, 0.999] {
            let got = chi2_gate_threshold(dof, p);
            assert!((got - chi2_quantile(dof, p)).abs() < 1e-6, "dof {dof} p {p}");
        }
    }
    assert!((chi2_gate_threshold(3, 0.95) - 7.8147).abs() < 1e-3);
}

proptest! {
    #[test]
    fn mahalanobis_matches_elimination(s in spd(), y in prop::array::uniform3(-2.0..2.0f64)) {
        let got = mahalanobis(&Vector3::from(y), &s).unwrap();
        let want = mahalanobis2(&rows(&s), &y).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn covariance_stays_psd(
        sigma0 in spd(),
        q in prop::array::uniform3(0.0..0.01f64),
        r in prop::array::uniform3(0.001..0.2f64),
        steps in prop::collection::vec((any::<bool>(), prop::array::uniform3(-1.0..1.0f64)), 1..60),
    ) {
        let (q, r) = (Matrix3::from_diagonal(&Vector3::from(q)), Matrix3::from_diagonal(&Vector3::from(r)));
        let mut tr = track(Vector3::new(1.0, 2.0, 0.3), sigma0);
        for (do_update, d) in steps {
            predict(&mut tr, &q);
            if do_update {
                let z = tr.t + Vector3::from(d);
                update(&mut tr, &z, &r).unwrap();
            }
            prop_assert!(is_symmetric_psd3(&rows(&tr.sigma), 1e-12));
            prop_assert!(tr.t.z >= 0.0);
        }
    }

    #[test]
    fn diagonal_update_is_scalar_filter(s in prop::array::uniform3(0.01..1.0f64), r in prop::array::uniform3(0.01..1.0f64), d in prop::array::uniform3(0.5..2.0f64)) {
        let mut tr = track(Vector3::new(1.0, 1.0, 1.0), Matrix3::from_diagonal(&Vector3::from(s)));
        update(&mut tr, &Vector3::from(d), &Matrix3::from_diagonal(&Vector3::from(r))).unwrap();
        for i in 0..3 {
            let k = s[i] / (s[i] + r[i]);
            prop_assert!((tr.t[i] - (1.0 + k * (d[i] - 1.0))).abs() < 1e-12);
            prop_assert!((tr.sigma[(i, i)] - (1.0 - k) * s[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn associations_never_exceed_gate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = TrackerConfig::default();
    let gate = chi2_quantile(3, cfg.gate_prob);
    let mut tracker = Tracker::new(cfg.clone()).unwrap();
    let trees: Vec<[f64; 2]> = (0..8).map(|_| [rng.random_range(3.0..12.0), rng.random_range(-4.0..4.0)]).collect();
    let mut checked = 0;
    for k in 0..2000 {
        let pose = pose_at(k, 0.0);
        let mut dets = Vec::new();
        for t in &trees {
            if !rng.random_bool(0.8) {
                continue;
            }
            let jitter = if rng.random_bool(0.1) { 1.5 } else { 0.3 };
            let xy = [t[0] + rng.random_range(-jitter..jitter), t[1] + rng.random_range(-jitter..jitter)];
            dets.push(detection(&pose, xy, rng.random_range(0.1..0.8)));
        }
        let before: Vec<TrackState> = tracker.tracks().to_vec();
        let out = tracker.step(&dets, &pose);
        for a in &out.associations {
            let t = before.iter().find(|t| t.id == a.track_id).unwrap();
            let s = t.sigma + cfg.q + cfg.r;
            let res = measurement(&dets[a.detection], &pose) - t.t;
            let d = mahalanobis2(&rows(&s), &[res.x, res.y, res.z]).unwrap();
            assert!(d <= gate + 1e-9, "frame {k}: D = {d} > {gate}");
            assert!((d - a.distance).abs() < 1e-6 * d.max(1.0));
            checked += 1;
        }
    }
    assert!(checked > 5000, "only {checked} associations");
}

#[test]
fn confirmation_and_deletion_are_exact() {
    let cfg = TrackerConfig::default();
    assert_eq!((cfg.min_hits, cfg.max_age), (3, 100));
    let mut tracker = Tracker::new(cfg).unwrap();
    let tree = [6.0, 0.5];
    for k in 0..3 {
        let pose = pose_at(k, 0.0);
        let out = tracker.step(&[detection(&pose, tree, 0.4)], &pose);
        assert_eq!(out.confirmed.len(), usize::from(k == 2), "frame {k}");
    }
    for k in 3..=102 {
        let out = tracker.step(&[], &pose_at(k, 0.0));
        if k < 102 {
            assert!(out.deleted.is_empty(), "deleted early at frame {k}");
            assert_eq!(out.confirmed.len(), 1);
        } else {
            assert_eq!(out.deleted, vec![0], "not deleted after 100 update-free frames");
        }
    }
    assert!(tracker.tracks().is_empty());
    assert_eq!(tracker.ids_issued(), 1);
}

#[test]
fn tracks_leaving_view_are_dropped() {
    let cfg = TrackerConfig::default();
    let exit = cfg.fov_exit_frames as usize;
    let mut tracker = Tracker::new(cfg).unwrap();
    let tree = [3.0, 1.0];
    for k in 0..3 {
        let pose = pose_at(k, 0.0);
        tracker.step(&[detection(&pose, tree, 0.4)], &pose);
    }
    // Camera jumps past the tree; it is now behind.
    for i in 0..exit {
        let out = tracker.step(&[], &pose_at(3 + i, 5.0));
        assert_eq!(out.deleted.len(), usize::from(i + 1 == exit), "step {i}");
    }
}
