//! Precision / recall at a distance threshold, F-score, and threshold sweeps.
//!
//! ```text
//! precision(ε) = |{x ∈ Psc : min_{y ∈ Pgt} ‖x − y‖ ≤ ε}| / |Psc|
//! recall(ε)    = |{y ∈ Pgt : min_{x ∈ Psc} ‖y − x‖ ≤ ε}| / |Pgt|
//! ```
//!
//! Recall is precision with the roles of the two clouds swapped, and is
//! implemented that way. A sweep computes the nearest-neighbour distances
//! once per direction and then counts against every threshold.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::exec::Execution;
use crate::numfmt::sig17;
use crate::pointcloud::{PointCloud, PointCloudError, SpatialIndex};

/// Default F-score an ε must reach to be reported as optimal.
pub const DEFAULT_F_TARGET: f64 = 0.999;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation needs non-empty clouds")]
    EmptyCloud,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("threshold must be >= 0, got {0}")]
    NegativeThreshold(f64),
    #[error("malformed curve CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    PointCloud(#[from] PointCloudError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Distance from each point of `from` to its nearest neighbour in `to`.
pub fn nearest_distances(from: &PointCloud, to: &SpatialIndex, exec: Execution) -> Vec<f64> {
    exec.map_slice(from.positions(), |p| to.nearest(p).distance)
}

/// Fraction of `from` lying within `eps` (inclusive) of the indexed cloud.
pub fn precision_at(
    psc: &PointCloud,
    pgt_index: &SpatialIndex,
    eps: f64,
) -> Result<f64, EvalError> {
    if psc.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    if !(eps >= 0.0) {
        return Err(EvalError::NegativeThreshold(eps));
    }
    let d = nearest_distances(psc, pgt_index, Execution::default());
    Ok(d.iter().filter(|&&v| v <= eps).count() as f64 / d.len() as f64)
}

/// Fraction of ground-truth points within `eps` of the reconstruction.
pub fn recall_at(pgt: &PointCloud, psc_index: &SpatialIndex, eps: f64) -> Result<f64, EvalError> {
    precision_at(pgt, psc_index, eps)
}

/// Harmonic mean of precision and recall, zero when both are zero.
pub fn fscore(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Percentage with two decimals, e.g. `1.0 → "100.00"`.
pub fn display_percent(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl std::str::FromStr for Spacing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(format!("unknown spacing '{other}' (expected linear|log)")),
        }
    }
}

/// Threshold grid for a sweep, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub eps_min: f64,
    pub eps_max: f64,
    pub steps: usize,
    pub spacing: Spacing,
}

impl SweepSpec {
    pub fn new(
        eps_min: f64,
        eps_max: f64,
        steps: usize,
        spacing: Spacing,
    ) -> Result<Self, EvalError> {
        let spec = SweepSpec {
            eps_min,
            eps_max,
            steps,
            spacing,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidSweep(m));
        if !(self.eps_min >= 0.0 && self.eps_min < self.eps_max && self.eps_max.is_finite()) {
            return bad(format!(
                "need 0 <= eps_min < eps_max, got [{}, {}]",
                self.eps_min, self.eps_max
            ));
        }
        if self.steps < 2 {
            return bad(format!("need at least 2 steps, got {}", self.steps));
        }
        if self.spacing == Spacing::Log && self.eps_min == 0.0 {
            return bad("log spacing needs eps_min > 0".into());
        }
        Ok(())
    }

    /// Ascending grid; the end points are exactly `eps_min` and `eps_max`.
    pub fn thresholds(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == 0 {
                    return self.eps_min;
                }
                if i == last {
                    return self.eps_max;
                }
                let t = i as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.eps_min + (self.eps_max - self.eps_min) * t,
                    Spacing::Log => {
                        (self.eps_min.ln() + (self.eps_max.ln() - self.eps_min.ln()) * t).exp()
                    }
                }
            })
            .collect()
    }
}

/// Precision, recall and F-score sampled over a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub fscore: Vec<f64>,
    pub optimal_epsilon: f64,
    /// How `optimal_epsilon` was chosen; never contains whitespace.
    pub optimal_rule: String,
}

impl EvalCurve {
    /// Builds a curve from precomputed sorted distance lists.
    pub fn from_sorted_distances(
        psc_to_gt: &[f64],
        gt_to_psc: &[f64],
        thresholds: Vec<f64>,
        f_target: f64,
    ) -> Self {
        let frac = |d: &[f64], eps: f64| d.partition_point(|&v| v <= eps) as f64 / d.len() as f64;
        let precision: Vec<f64> = thresholds.iter().map(|&e| frac(psc_to_gt, e)).collect();
        let recall: Vec<f64> = thresholds.iter().map(|&e| frac(gt_to_psc, e)).collect();
        let fscore: Vec<f64> = precision
            .iter()
            .zip(&recall)
            .map(|(&p, &r)| fscore(p, r))
            .collect();
        let (optimal_epsilon, optimal_rule) = match fscore.iter().position(|&f| f >= f_target) {
            Some(i) => (thresholds[i], format!("min_eps_with_f_ge_{f_target}")),
            None => {
                let mut best = 0;
                for (i, &f) in fscore.iter().enumerate() {
                    if f > fscore[best] {
                        best = i;
                    }
                }
                (
                    thresholds[best],
                    format!("argmax_f_target_{f_target}_not_reached"),
                )
            }
        };
        EvalCurve {
            thresholds,
            precision,
            recall,
            fscore,
            optimal_epsilon,
            optimal_rule,
        }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Sweeps `spec` with the default F-score target.
pub fn sweep(psc: &PointCloud, pgt: &PointCloud, spec: &SweepSpec) -> Result<EvalCurve, EvalError> {
    sweep_with(psc, pgt, spec, DEFAULT_F_TARGET, Execution::default())
}

pub fn sweep_with(
    psc: &PointCloud,
    pgt: &PointCloud,
    spec: &SweepSpec,
    f_target: f64,
    exec: Execution,
) -> Result<EvalCurve, EvalError> {
    spec.validate()?;
    if psc.is_empty() || pgt.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let gt_index = SpatialIndex::build(pgt)?;
    let sc_index = SpatialIndex::build(psc)?;
    let mut d_sc = nearest_distances(psc, &gt_index, exec);
    let mut d_gt = nearest_distances(pgt, &sc_index, exec);
    d_sc.sort_unstable_by(f64::total_cmp);
    d_gt.sort_unstable_by(f64::total_cmp);
    Ok(EvalCurve::from_sorted_distances(
        &d_sc,
        &d_gt,
        spec.thresholds(),
        f_target,
    ))
}

pub fn curve_to_csv(curve: &EvalCurve) -> String {
    let mut s = String::from("epsilon,precision,recall,fscore\n");
    for i in 0..curve.len() {
        writeln!(
            s,
            "{},{},{},{}",
            sig17(curve.thresholds[i]),
            sig17(curve.precision[i]),
            sig17(curve.recall[i]),
            sig17(curve.fscore[i])
        )
        .unwrap();
    }
    writeln!(
        s,
        "# optimal_epsilon={} rule={}",
        sig17(curve.optimal_epsilon),
        curve.optimal_rule
    )
    .unwrap();
    s
}

pub fn write_curve_csv(curve: &EvalCurve, path: impl AsRef<Path>) -> Result<(), EvalError> {
    fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

pub fn parse_curve_csv(text: &str) -> Result<EvalCurve, EvalError> {
    let bad = |line: usize, reason: &str| EvalError::MalformedCsv {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "epsilon,precision,recall,fscore")) => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut optimal = None;
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let (eps, rule) = rest
                .strip_prefix("optimal_epsilon=")
                .and_then(|r| r.split_once(" rule="))
                .ok_or_else(|| bad(n + 1, "bad optimum comment"))?;
            let eps: f64 = eps.parse().map_err(|_| bad(n + 1, "bad optimal epsilon"))?;
            optimal = Some((eps, rule.to_string()));
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != 4 {
            return Err(bad(n + 1, "expected 4 columns"));
        }
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v.parse().map_err(|_| bad(n + 1, "bad number"))?);
        }
    }
    let (optimal_epsilon, optimal_rule) =
        optimal.ok_or_else(|| bad(text.lines().count(), "missing optimum comment"))?;
    let [thresholds, precision, recall, fscore] = cols;
    Ok(EvalCurve {
        thresholds,
        precision,
        recall,
        fscore,
        optimal_epsilon,
        optimal_rule,
    })
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<EvalCurve, EvalError> {
    parse_curve_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| Point3::from(*p)).collect()).unwrap()
    }

    #[test]
    fn two_versus_one() {
        let psc = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let pgt = cloud(&[[0.0, 0.0, 0.0]]);
        let gi = SpatialIndex::build(&pgt).unwrap();
        let si = SpatialIndex::build(&psc).unwrap();
        assert_eq!(precision_at(&psc, &gi, 0.5).unwrap(), 0.5);
        assert_eq!(recall_at(&pgt, &si, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn zero_threshold_on_disjoint_clouds() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[0.1, 0.0, 0.0]]);
        let bi = SpatialIndex::build(&b).unwrap();
        let ai = SpatialIndex::build(&a).unwrap();
        assert_eq!(precision_at(&a, &bi, 0.0).unwrap(), 0.0);
        assert_eq!(recall_at(&b, &ai, 0.0).unwrap(), 0.0);
        assert_eq!(precision_at(&a, &ai, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let ai = SpatialIndex::build(&a).unwrap();
        assert!(matches!(
            precision_at(&PointCloud::empty(), &ai, 0.1),
            Err(EvalError::EmptyCloud)
        ));
        assert!(precision_at(&a, &ai, -1.0).is_err());
        assert!(SweepSpec::new(0.1, 0.1, 5, Spacing::Linear).is_err());
        assert!(SweepSpec::new(0.0, 0.1, 1, Spacing::Linear).is_err());
        assert!(SweepSpec::new(0.0, 0.1, 5, Spacing::Log).is_err());
    }

    #[test]
    fn fscore_values() {
        assert_eq!(fscore(1.0, 1.0), 1.0);
        assert_eq!(display_percent(fscore(1.0, 1.0)), "100.00");
        assert_eq!(fscore(1.0, 0.0), 0.0);
        assert_eq!(fscore(0.0, 0.0), 0.0);
        assert_eq!(fscore(0.5, 0.5), 0.5);
    }

    #[test]
    fn grid_end_points() {
        let g = SweepSpec::new(0.0, 0.02, 21, Spacing::Linear)
            .unwrap()
            .thresholds();
        assert_eq!(g.len(), 21);
        assert_eq!((g[0], g[20]), (0.0, 0.02));
        assert!((g[10] - 0.01).abs() < 1e-18);
        let g = SweepSpec::new(1e-4, 1e-1, 4, Spacing::Log)
            .unwrap()
            .thresholds();
        assert!((g[1] - 1e-3).abs() < 1e-15 && (g[2] - 1e-2).abs() < 1e-15);
        assert_eq!(g[3], 1e-1);
    }

    #[test]
    fn identical_clouds_sweep() {
        let c = cloud(&[[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [0.2, 0.5, 0.9]]);
        let spec = SweepSpec::new(0.0, 0.02, 21, Spacing::Linear).unwrap();
        let curve = sweep(&c, &c, &spec).unwrap();
        assert!(curve
            .precision
            .iter()
            .chain(&curve.recall)
            .all(|&v| v == 1.0));
        assert_eq!(curve.optimal_epsilon, 0.0);
    }

    #[test]
    fn unreached_target_falls_back_to_argmax() {
        let d_sc = [0.0, 0.5];
        let d_gt = [0.0, 0.0, 0.0];
        let curve = EvalCurve::from_sorted_distances(&d_sc, &d_gt, vec![0.0, 0.1], 0.999);
        assert_eq!(curve.optimal_epsilon, 0.0);
        assert!(curve.optimal_rule.starts_with("argmax"));
    }

    #[test]
    fn csv_roundtrip_and_layout() {
        let curve = EvalCurve::from_sorted_distances(&[0.01], &[0.01], vec![0.0, 0.02], 0.999);
        let text = curve_to_csv(&curve);
        assert_eq!(text.lines().count(), 4);
        assert!(text
            .lines()
            .last()
            .unwrap()
            .starts_with("# optimal_epsilon="));
        assert_eq!(parse_curve_csv(&text).unwrap(), curve);
        assert_eq!(curve_to_csv(&curve), text);
    }
}
