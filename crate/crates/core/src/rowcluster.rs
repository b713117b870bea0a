//! Per-image row extraction: thinning, Hough peaks, angle clustering and
//! representative selection.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::houghlines::{angle_from_vertical, find_peaks, hough_transform, LineRT, RowAngle};
use crate::imagecore::BinaryMask;
use crate::preprocess::{skeletonize, ThinningReport, DEFAULT_MAX_THIN_ITERATIONS};

/// Tunables shared by the row detector and the angle-error metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Hough θ bin width in degrees; must divide 180.
    pub theta_res: f64,
    /// Hough ρ bin width in pixels.
    pub rho_res: f64,
    pub vote_threshold: u32,
    /// Non-maximum suppression radius as (θ bins, ρ bins). The ρ reach is
    /// wide because a long line also peaks one θ bin over, a few ρ bins away.
    pub nms_radius: (usize, usize),
    /// Angle clustering radius within one image, degrees.
    pub eps1: f64,
    /// Radius for pairing ground-truth and predicted angles, degrees.
    pub eps2: f64,
    pub min_pts: usize,
    pub max_thin_iterations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            theta_res: 0.5,
            rho_res: 1.0,
            vote_threshold: 100,
            nms_radius: (2, 6),
            eps1: 2.0,
            eps2: 5.0,
            min_pts: 1,
            max_thin_iterations: DEFAULT_MAX_THIN_ITERATIONS,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid pipeline config: {0}")]
pub struct ConfigError(pub String);

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let bins = 180.0 / self.theta_res;
        if !positive(self.theta_res) || (bins.round() - bins).abs() > 1e-9 {
            return Err(ConfigError(format!("theta_res {} must be positive and divide 180", self.theta_res)));
        }
        if !positive(self.rho_res) {
            return Err(ConfigError(format!("rho_res {} must be positive", self.rho_res)));
        }
        if self.vote_threshold == 0 {
            return Err(ConfigError("vote_threshold must be at least 1".into()));
        }
        if !positive(self.eps1) || !positive(self.eps2) {
            return Err(ConfigError("eps1 and eps2 must be positive".into()));
        }
        if self.min_pts == 0 {
            return Err(ConfigError("min_pts must be at least 1".into()));
        }
        if self.max_thin_iterations == 0 {
            return Err(ConfigError("max_thin_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// DBSCAN output: `labels[i]` is the cluster of input `i`, `None` for noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    pub labels: Vec<Option<usize>>,
    pub cluster_count: usize,
}

impl ClusterLabeling {
    /// Input indices per cluster, each ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(c) = label {
                out[*c].push(i);
            }
        }
        out
    }

    pub fn noise(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i].is_none()).collect()
    }
}

/// DBSCAN over the circular angle metric `min(|a−b|, 180−|a−b|)`.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Points are visited in input order and clusters expand
/// breadth-first in ascending index order, so border points go to the
/// earliest-created cluster that reaches them.
pub fn dbscan_circular(values: &[RowAngle], eps: f64, min_pts: usize) -> ClusterLabeling {
    let n = values.len();
    let neighbours: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| values[i].distance(values[j]) <= eps).collect()).collect();
    let is_core = |i: usize| neighbours[i].len() >= min_pts;

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut cluster_count = 0;
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        if !is_core(start) {
            continue;
        }
        let cluster = cluster_count;
        cluster_count += 1;
        labels[start] = Some(cluster);
        let mut queue: VecDeque<usize> = neighbours[start].iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            if is_core(j) {
                queue.extend(neighbours[j].iter().copied().filter(|&k| labels[k].is_none() || !visited[k]));
            }
        }
    }
    ClusterLabeling { labels, cluster_count }
}

/// A crop row: the representative line of one angle cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRow {
    pub angle: RowAngle,
    /// ρ of the representative Hough line.
    pub rho: f64,
    /// Hough lines merged into this row.
    pub member_count: usize,
}

/// Picks the member closest to vertical. Ties go to the non-negative angle,
/// then to smaller ρ. Panics on an empty cluster.
pub fn select_candidate(cluster: &[(RowAngle, LineRT)]) -> CropRow {
    let best = cluster
        .iter()
        .min_by(|(a, la), (b, lb)| {
            a.degrees()
                .abs()
                .partial_cmp(&b.degrees().abs())
                .unwrap_or(Ordering::Equal)
                .then_with(|| (a.degrees() < 0.0).cmp(&(b.degrees() < 0.0)))
                .then_with(|| la.rho.partial_cmp(&lb.rho).unwrap_or(Ordering::Equal))
        })
        .expect("select_candidate needs a nonempty cluster");
    CropRow { angle: best.0, rho: best.1.rho, member_count: cluster.len() }
}

/// Intermediate products of [`detect_rows_traced`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDetection {
    pub rows: Vec<CropRow>,
    pub lines: Vec<LineRT>,
    pub thinning: ThinningReport,
}

/// Mask to crop rows, sorted by ρ ascending.
pub fn detect_rows(mask: &BinaryMask, config: &PipelineConfig) -> Result<Vec<CropRow>, ConfigError> {
    detect_rows_traced(mask, config).map(|d| d.rows)
}

pub fn detect_rows_traced(mask: &BinaryMask, config: &PipelineConfig) -> Result<RowDetection, ConfigError> {
    config.validate()?;
    let (skeleton, thinning) = skeletonize(mask, config.max_thin_iterations);
    let acc = hough_transform(&skeleton, config.theta_res, config.rho_res).map_err(|e| ConfigError(e.to_string()))?;
    let lines = find_peaks(&acc, config.vote_threshold, config.nms_radius);
    let rows = rows_from_lines(&lines, config.eps1, config.min_pts);
    Ok(RowDetection { rows, lines, thinning })
}

/// Clusters line angles and keeps one representative per cluster.
pub fn rows_from_lines(lines: &[LineRT], eps: f64, min_pts: usize) -> Vec<CropRow> {
    let angles: Vec<RowAngle> = lines.iter().map(angle_from_vertical).collect();
    let labeling = dbscan_circular(&angles, eps, min_pts);
    let mut rows: Vec<CropRow> = labeling
        .members()
        .into_iter()
        .map(|idx| {
            let cluster: Vec<(RowAngle, LineRT)> = idx.iter().map(|&i| (angles[i], lines[i])).collect();
            select_candidate(&cluster)
        })
        .collect();
    rows.sort_by(|a, b| {
        a.rho
            .partial_cmp(&b.rho)
            .unwrap_or(Ordering::Equal)
            .then(a.angle.degrees().partial_cmp(&b.angle.degrees()).unwrap_or(Ordering::Equal))
    });
    rows
}


#[cfg(test)]
mod tests {
    use super::oracle::dbscan_reference;
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn angles(v: &[f64]) -> Vec<RowAngle> {
        v.iter().map(|&a| RowAngle::new(a)).collect()
    }

    fn partition(labels: &[Option<usize>]) -> BTreeSet<BTreeSet<usize>> {
        let mut groups: std::collections::BTreeMap<Option<usize>, BTreeSet<usize>> = Default::default();
        for (i, l) in labels.iter().enumerate() {
            groups.entry(*l).or_default().insert(i);
        }
        let mut out: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        for (label, members) in groups {
            match label {
                Some(_) => {
                    out.insert(members);
                }
                // noise points are singleton "clusters" of their own for comparison
                None => out.extend(members.into_iter().map(|m| BTreeSet::from([m + 1_000_000]))),
            }
        }
        out
    }

    #[test]
    fn empty_input() {
        let l = dbscan_circular(&[], 2.0, 1);
        assert_eq!(l.cluster_count, 0);
        assert!(l.labels.is_empty());
    }

    #[test]
    fn separated_groups() {
        let l = dbscan_circular(&angles(&[1.0, 2.0, 3.0, 50.0]), 2.0, 1);
        assert_eq!(l.labels, vec![Some(0), Some(0), Some(0), Some(1)]);
        assert_eq!(l.labels, dbscan_reference(&[1.0, 2.0, 3.0, 50.0], 2.0, 1));
    }

    #[test]
    fn wraps_around_vertical_axis() {
        let l = dbscan_circular(&angles(&[89.0, -89.0]), 3.0, 1);
        assert_eq!(l.cluster_count, 1);
        assert_eq!(l.labels, dbscan_reference(&[89.0, -89.0], 3.0, 1));
    }

    #[test]
    fn noise_with_higher_min_pts() {
        let l = dbscan_circular(&angles(&[0.0, 1.0, 2.0, 40.0]), 1.5, 3);
        assert_eq!(l.labels, vec![Some(0), Some(0), Some(0), None]);
        assert_eq!(l.noise(), vec![3]);
    }

    #[test]
    fn candidate_closest_to_vertical() {
        let line = |rho| LineRT { rho, theta: 0.0, votes: 1 };
        let pick = select_candidate(&[
            (RowAngle::new(5.0), line(1.0)),
            (RowAngle::new(2.0), line(2.0)),
            (RowAngle::new(9.0), line(3.0)),
        ]);
        assert_eq!(pick.angle.degrees(), 2.0);
        assert_eq!(pick.member_count, 3);
        let pick = select_candidate(&[(RowAngle::new(-3.0), line(1.0)), (RowAngle::new(3.0), line(2.0))]);
        assert_eq!(pick.angle.degrees(), 3.0);
        let pick = select_candidate(&[(RowAngle::new(3.0), line(9.0)), (RowAngle::new(3.0), line(-4.0))]);
        assert_eq!(pick.rho, -4.0);
        let pick = select_candidate(&[(RowAngle::new(-7.0), line(0.5))]);
        assert_eq!((pick.angle.degrees(), pick.rho, pick.member_count), (-7.0, 0.5, 1));
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig { eps1: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { theta_res: 0.7, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { min_pts: 0, ..Default::default() };
        assert!(detect_rows(&BinaryMask::empty(8, 8), &bad).is_err());
    }

    #[test]
    fn empty_mask_yields_no_rows() {
        assert!(detect_rows(&BinaryMask::empty(64, 64), &PipelineConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn config_json_accepts_partial_objects() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"vote_threshold": 42, "eps2": 3.0}"#).unwrap();
        assert_eq!(cfg.vote_threshold, 42);
        assert_eq!(cfg.eps2, 3.0);
        assert_eq!(cfg.theta_res, 0.5);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }

    fn arb_angles() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(
            prop_oneof![-90.0f64..90.0, 85.0f64..90.0, -90.0f64..-85.0, (-20i32..20).prop_map(|v| v as f64 * 0.5)],
            0..60,
        )
    }

    proptest! {
        #[test]
        fn matches_reference(values in arb_angles(), eps in 0.2f64..6.0, min_pts in 1usize..4) {
            let got = dbscan_circular(&angles(&values), eps, min_pts);
            let wrapped: Vec<f64> = angles(&values).iter().map(|a| a.degrees()).collect();
            prop_assert_eq!(got.labels, dbscan_reference(&wrapped, eps, min_pts));
        }

        #[test]
        fn permutation_invariant(values in arb_angles(), eps in 0.2f64..6.0, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            let shuffled: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            let a = dbscan_circular(&angles(&values), eps, 1);
            let b = dbscan_circular(&angles(&shuffled), eps, 1);
            // map shuffled indices back to original ones
            let b_labels: Vec<Option<usize>> = {
                let mut v = vec![None; values.len()];
                for (pos, &orig) in order.iter().enumerate() {
                    v[orig] = b.labels[pos];
                }
                v
            };
            prop_assert_eq!(partition(&a.labels), partition(&b_labels));
        }

        #[test]
        fn candidate_is_member(values in proptest::collection::vec(-90.0f64..90.0, 1..10)) {
            let cluster: Vec<(RowAngle, LineRT)> = values.iter().enumerate()
                .map(|(i, &a)| (RowAngle::new(a), LineRT { rho: i as f64, theta: 0.0, votes: 1 }))
                .collect();
            let pick = select_candidate(&cluster);
            prop_assert!(cluster.iter().any(|(a, l)| *a == pick.angle && l.rho == pick.rho));
        }
    }
}
