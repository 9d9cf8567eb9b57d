use canopy_core::eval::{accumulate, match_frame, MatchResult, RangeBinnedStats};
use canopy_core::io::{LabelRecord, ObjectClass};
use canopy_oracles::min_assignment_cost;
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

fn boxes(max: usize) -> impl Strategy<Value = Vec<LabelRecord>> {
    prop::collection::vec((-8.0..8.0f64, 0.5..18.0f64, 0.1..0.8f64), 0..max).prop_map(|v| {
        v.into_iter()
            .map(|(x, z, w)| LabelRecord { class: ObjectClass::Tree, center: Point3::new(x, 0.0, z), extents: Vector3::new(w, 3.0, w), score: 1.0 })
            .collect()
    })
}

/// Ground truth plus perturbed copies, so there are many pairs near the cutoff.
fn frame() -> impl Strategy<Value = (Vec<LabelRecord>, Vec<LabelRecord>)> {
    (boxes(7), prop::collection::vec((-1.2..1.2f64, -1.2..1.2f64, any::<bool>()), 7), boxes(3)).prop_map(|(gt, jit, extra)| {
        let mut est: Vec<LabelRecord> = gt
            .iter()
            .zip(&jit)
            .filter(|(_, j)| j.2)
            .map(|(g, j)| LabelRecord { center: g.center + Vector3::new(j.0, 0.0, j.1), ..*g })
            .collect();
        est.extend(extra);
        (est, gt)
    })
}

fn range(l: &LabelRecord) -> f64 {
    (l.center.x * l.center.x + l.center.z * l.center.z).sqrt()
}

/// Per-bin `(tp, fp, fn)` by direct counting; bin 15 is the overflow bin.
fn recount(frames: &[(Vec<LabelRecord>, Vec<LabelRecord>)], results: &[MatchResult]) -> Vec<[usize; 3]> {
    let bin = |r: f64| if r >= 15.0 { 15 } else { r as usize };
    let mut out = vec![[0; 3]; 16];
    for ((est, gt), m) in frames.iter().zip(results) {
        for p in &m.pairs {
            out[bin(range(&gt[p.gt]))][0] += 1;
        }
        for i in 0..est.len() {
            if !m.pairs.iter().any(|p| p.estimate == i) {
                out[bin(range(&est[i]))][1] += 1;
            }
        }
        for j in 0..gt.len() {
            if !m.pairs.iter().any(|p| p.gt == j) {
                out[bin(range(&gt[j]))][2] += 1;
            }
        }
    }
    out
}

fn counts(s: &RangeBinnedStats) -> Vec<[usize; 3]> {
    s.bins.iter().chain([&s.beyond]).map(|b| [b.tp, b.fp, b.fn_]).collect()
}

/// Error sums agree up to summation order.
fn sums_close(a: &RangeBinnedStats, b: &RangeBinnedStats) -> bool {
    a.bins.iter().chain([&a.beyond]).zip(b.bins.iter().chain([&b.beyond])).all(|(x, y)| {
        x.abs_err_sum.iter().zip(&y.abs_err_sum).all(|(p, q)| (p - q).abs() <= 1e-9)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bins_equal_flat_recount(frames in prop::collection::vec(frame(), 1..6)) {
        let results: Vec<MatchResult> = frames.iter().enumerate().map(|(k, (e, g))| match_frame(k, e, g, 1.0)).collect();
        let stats = accumulate(&results, 1.0, 15.0);
        prop_assert_eq!(counts(&stats), recount(&frames, &results));
        let t = stats.total();
        let n_est: usize = frames.iter().map(|f| f.0.len()).sum();
        let n_gt: usize = frames.iter().map(|f| f.1.len()).sum();
        prop_assert_eq!(t.tp + t.fn_, n_gt);
        prop_assert_eq!(t.tp + t.fp, n_est);

        let mut rev = results.clone();
        rev.reverse();
        let reversed = accumulate(&rev, 1.0, 15.0);
        prop_assert_eq!(counts(&reversed), counts(&stats));
        prop_assert!(sums_close(&reversed, &stats));
        let (a, b) = results.split_at(results.len() / 2);
        let mut merged = accumulate(a, 1.0, 15.0);
        merged.merge(&accumulate(b, 1.0, 15.0));
        prop_assert_eq!(counts(&merged), counts(&stats));
        prop_assert!(sums_close(&merged, &stats));
    }

    #[test]
    fn matching_respects_cutoff_and_is_optimal((est, gt) in frame()) {
        let m = match_frame(0, &est, &gt, 1.0);
        let d = |i: usize, j: usize| (est[i].center.x - gt[j].center.x).hypot(est[i].center.z - gt[j].center.z);
        for p in &m.pairs {
            prop_assert!(p.distance <= 1.0);
            prop_assert!((p.distance - d(p.estimate, p.gt)).abs() < 1e-12);
        }
        for &(i, _) in &m.false_positives {
            for &(j, _) in &m.false_negatives {
                prop_assert!(d(i, j) > 1.0);
            }
        }
        // With every pair inside the cutoff, the matching is a full assignment of minimum total distance.
        if !est.is_empty() && !gt.is_empty() && (0..est.len()).all(|i| (0..gt.len()).all(|j| d(i, j) <= 1.0)) {
            let cost: Vec<Vec<f64>> = (0..est.len()).map(|i| (0..gt.len()).map(|j| d(i, j)).collect()).collect();
            let total: f64 = m.pairs.iter().map(|p| p.distance).sum();
            prop_assert!((total - min_assignment_cost(&cost)).abs() < 1e-9);
        }
    }
}

#[test]
fn cutoff_boundary_is_inclusive() {
    let at = |fwd: f64| LabelRecord { class: ObjectClass::Tree, center: Point3::new(0.0, 0.0, fwd), extents: Vector3::new(0.3, 2.0, 0.3), score: 1.0 };
    assert_eq!(match_frame(0, &[at(6.0)], &[at(5.0)], 1.0).pairs.len(), 1);
    assert_eq!(match_frame(0, &[at(6.0 + 1e-9)], &[at(5.0)], 1.0).pairs.len(), 0);
}
