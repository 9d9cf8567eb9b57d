//! Matching of estimated boxes to ground truth and range-binned statistics.
//!
//! Boxes live in a camera frame. Their bird's-eye view uses camera `z` as the
//! forward axis and `-x` as the left axis.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Point3};

use crate::assignment::assign_gated;
use crate::io::LabelRecord;

/// `(forward, left)` ground-plane coordinates of a camera-frame point.
pub fn bev(p: &Point3<f64>) -> (f64, f64) {
    (p.z, -p.x)
}

pub fn bev_distance(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a.z - b.z).hypot(a.x - b.x)
}

pub fn bev_range(p: &Point3<f64>) -> f64 {
    p.z.hypot(p.x)
}

/// Tree diameter implied by a box: mean of the two horizontal extents.
pub fn box_diameter(l: &LabelRecord) -> f64 {
    0.5 * (l.extents.x + l.extents.z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub estimate: usize,
    pub gt: usize,
    pub distance: f64,
    /// Absolute forward, lateral and diameter errors.
    pub abs_err: [f64; 3],
    pub gt_range: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub frame_index: usize,
    pub pairs: Vec<MatchPair>,
    /// Unmatched estimates with their BEV range.
    pub false_positives: Vec<(usize, f64)>,
    /// Unmatched ground-truth boxes with their BEV range.
    pub false_negatives: Vec<(usize, f64)>,
}

/// Minimum-total-distance assignment on BEV center distance. Pairs farther
/// apart than `cutoff` are never matched; every unmatched estimate is a
/// false positive and every unmatched ground-truth box a false negative.
pub fn match_frame(frame_index: usize, estimates: &[LabelRecord], gt: &[LabelRecord], cutoff: f64) -> MatchResult {
    let cost = DMatrix::from_fn(estimates.len(), gt.len(), |i, j| bev_distance(&estimates[i].center, &gt[j].center));
    let a = assign_gated(&cost, cutoff);
    let pairs = a
        .pairs
        .iter()
        .map(|&(i, j)| {
            let (e, g) = (&estimates[i], &gt[j]);
            MatchPair {
                estimate: i,
                gt: j,
                distance: cost[(i, j)],
                abs_err: [
                    (e.center.z - g.center.z).abs(),
                    (e.center.x - g.center.x).abs(),
                    (box_diameter(e) - box_diameter(g)).abs(),
                ],
                gt_range: bev_range(&g.center),
            }
        })
        .collect();
    MatchResult {
        frame_index,
        pairs,
        false_positives: a.unmatched_rows.iter().map(|&i| (i, bev_range(&estimates[i].center))).collect(),
        false_negatives: a.unmatched_cols.iter().map(|&j| (j, bev_range(&gt[j].center))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinStats {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Sums of absolute forward, lateral and diameter errors over TPs.
    pub abs_err_sum: [f64; 3],
}

impl BinStats {
    /// Mean absolute errors, or zeros without TPs.
    pub fn mae(&self) -> [f64; 3] {
        if self.tp == 0 {
            [0.0; 3]
        } else {
            self.abs_err_sum.map(|s| s / self.tp as f64)
        }
    }

    pub fn merge(&mut self, o: &BinStats) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        for k in 0..3 {
            self.abs_err_sum[k] += o.abs_err_sum[k];
        }
    }
}

/// Counts and errors over contiguous range bins `[i w, (i+1) w)` up to
/// `max_range`, plus one overflow bin for everything farther.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeBinnedStats {
    pub bin_width: f64,
    pub max_range: f64,
    pub bins: Vec<BinStats>,
    pub beyond: BinStats,
}

impl RangeBinnedStats {
    pub fn new(bin_width: f64, max_range: f64) -> Self {
        assert!(bin_width > 0.0 && max_range > 0.0);
        let n = (max_range / bin_width).ceil() as usize;
        Self { bin_width, max_range, bins: vec![BinStats::default(); n], beyond: BinStats::default() }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let lo = i as f64 * self.bin_width;
        (lo, (lo + self.bin_width).min(self.max_range))
    }

    pub fn bin_mut(&mut self, range: f64) -> &mut BinStats {
        if range >= self.max_range {
            return &mut self.beyond;
        }
        let i = ((range / self.bin_width).floor() as usize).min(self.bins.len() - 1);
        &mut self.bins[i]
    }

    pub fn add(&mut self, m: &MatchResult) {
        for p in &m.pairs {
            let b = self.bin_mut(p.gt_range);
            b.tp += 1;
            for k in 0..3 {
                b.abs_err_sum[k] += p.abs_err[k];
            }
        }
        for &(_, r) in &m.false_positives {
            self.bin_mut(r).fp += 1;
        }
        for &(_, r) in &m.false_negatives {
            self.bin_mut(r).fn_ += 1;
        }
    }

    pub fn merge(&mut self, o: &RangeBinnedStats) {
        assert_eq!(self.bins.len(), o.bins.len());
        for (a, b) in self.bins.iter_mut().zip(&o.bins) {
            a.merge(b);
        }
        self.beyond.merge(&o.beyond);
    }

    /// Totals over all bins including the overflow bin.
    pub fn total(&self) -> BinStats {
        let mut t = self.beyond;
        for b in &self.bins {
            t.merge(b);
        }
        t
    }

    /// Totals over the bins whose lower edge lies in `[lo, hi)`.
    pub fn total_in(&self, lo: f64, hi: f64) -> BinStats {
        let mut t = BinStats::default();
        for (i, b) in self.bins.iter().enumerate() {
            let (l, _) = self.edges(i);
            if l >= lo && l < hi {
                t.merge(b);
            }
        }
        t
    }

    /// CSV with one row per bin and a final overflow row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("range_lo,range_hi,tp,fp,fn,mae_x,mae_y,mae_w\n");
        let mut row = |lo: f64, hi: &str, b: &BinStats| {
            let [mx, my, mw] = b.mae();
            writeln!(out, "{lo},{hi},{},{},{},{mx:.6},{my:.6},{mw:.6}", b.tp, b.fp, b.fn_).unwrap();
        };
        for (i, b) in self.bins.iter().enumerate() {
            let (lo, hi) = self.edges(i);
            row(lo, &hi.to_string(), b);
        }
        row(self.max_range, "inf", &self.beyond);
        out
    }
}

/// Bins a batch of per-frame match results.
pub fn accumulate<'a>(results: impl IntoIterator<Item = &'a MatchResult>, bin_width: f64, max_range: f64) -> RangeBinnedStats {
    let mut stats = RangeBinnedStats::new(bin_width, max_range);
    for m in results {
        stats.add(m);
    }
    stats
}
