//! Minimum frame-rate selection with full SfM registration.
//!
//! For every candidate rate, frames are extracted and registered (through an
//! injected [`RegistrationProbe`]). The selected rate is the complete trial
//! with the fewest frames; a later trial replaces the current pick only with
//! strictly fewer frames, so the first candidate wins ties.

use std::error::Error as StdError;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::to_stable_json;

pub type ProbeError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum FpsError {
    #[error("invalid candidate list: {0}")]
    InvalidCandidates(String),
    #[error("probe at {fps} fps reported {n_registered} registered of {n_frames} frames")]
    InvalidTrial {
        fps: f64,
        n_frames: usize,
        n_registered: usize,
    },
    #[error("probe failed at {fps} fps: {source}")]
    ProbeFailure {
        fps: f64,
        #[source]
        source: ProbeError,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of one candidate frame rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpsTrial {
    pub fps: f64,
    pub n_frames: usize,
    pub n_registered: usize,
    pub complete: bool,
}

impl FpsTrial {
    pub fn new(fps: f64, n_frames: usize, n_registered: usize) -> Result<Self, FpsError> {
        if n_registered > n_frames {
            return Err(FpsError::InvalidTrial {
                fps,
                n_frames,
                n_registered,
            });
        }
        Ok(FpsTrial {
            fps,
            n_frames,
            n_registered,
            complete: n_frames > 0 && n_registered == n_frames,
        })
    }
}

/// Extracts frames at a rate and reports how many registered.
pub trait RegistrationProbe {
    fn probe(&mut self, video: &Path, fps: f64) -> Result<FpsTrial, ProbeError>;
}

impl<F> RegistrationProbe for F
where
    F: FnMut(&Path, f64) -> Result<FpsTrial, ProbeError>,
{
    fn probe(&mut self, video: &Path, fps: f64) -> Result<FpsTrial, ProbeError> {
        self(video, fps)
    }
}

/// Every trial in candidate order, plus the chosen rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsSelection {
    pub video: String,
    pub trials: Vec<FpsTrial>,
    pub selected_fps: Option<f64>,
}

/// Top-down candidate rates, starting at 5 fps.
pub fn default_fps_candidates() -> Vec<f64> {
    vec![5.0, 4.0, 3.0, 2.0, 1.0]
}

fn check_candidates(fps_list: &[f64]) -> Result<(), FpsError> {
    if fps_list.is_empty() {
        return Err(FpsError::InvalidCandidates("empty".into()));
    }
    for (i, &f) in fps_list.iter().enumerate() {
        if !(f > 0.0 && f.is_finite()) {
            return Err(FpsError::InvalidCandidates(format!(
                "{f} is not a positive rate"
            )));
        }
        if fps_list[..i].contains(&f) {
            return Err(FpsError::InvalidCandidates(format!("{f} listed twice")));
        }
    }
    Ok(())
}

pub fn select_optimal_fps<P: RegistrationProbe + ?Sized>(
    video: impl AsRef<Path>,
    fps_list: &[f64],
    probe: &mut P,
) -> Result<FpsSelection, FpsError> {
    check_candidates(fps_list)?;
    let video: PathBuf = video.as_ref().to_path_buf();
    let mut trials = Vec::with_capacity(fps_list.len());
    let mut selected = None;
    let mut min_frames = usize::MAX;
    for &fps in fps_list {
        let reported = probe
            .probe(&video, fps)
            .map_err(|source| FpsError::ProbeFailure { fps, source })?;
        // recompute the completeness flag rather than trusting the probe
        let trial = FpsTrial::new(fps, reported.n_frames, reported.n_registered)?;
        log::info!(
            "fps {fps}: {}/{} registered{}",
            trial.n_registered,
            trial.n_frames,
            if trial.complete { " (complete)" } else { "" }
        );
        if trial.complete && trial.n_frames < min_frames {
            selected = Some(fps);
            min_frames = trial.n_frames;
        }
        trials.push(trial);
    }
    Ok(FpsSelection {
        video: video.display().to_string(),
        trials,
        selected_fps: selected,
    })
}

pub fn run_report_json(selection: &FpsSelection) -> String {
    to_stable_json(selection).expect("selection values are finite")
}

pub fn write_run_report(selection: &FpsSelection, path: impl AsRef<Path>) -> Result<(), FpsError> {
    std::fs::write(path, run_report_json(selection))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn table_probe<'a>(
        table: &[(f64, usize, usize)],
        calls: &'a mut Vec<f64>,
    ) -> impl FnMut(&Path, f64) -> Result<FpsTrial, ProbeError> + 'a {
        let map: HashMap<u64, (usize, usize)> = table
            .iter()
            .map(|&(f, n, r)| (f.to_bits(), (n, r)))
            .collect();
        move |_: &Path, fps: f64| {
            calls.push(fps);
            let (n, r) = map[&fps.to_bits()];
            Ok(FpsTrial::new(fps, n, r)?)
        }
    }

    #[test]
    fn picks_fewest_complete_frames() {
        let mut calls = Vec::new();
        let mut probe = table_probe(
            &[(5.0, 150, 150), (4.0, 120, 120), (3.0, 90, 81)],
            &mut calls,
        );
        let sel = select_optimal_fps("v.mov", &[5.0, 4.0, 3.0], &mut probe).unwrap();
        assert_eq!(sel.selected_fps, Some(4.0));
        assert_eq!(sel.trials.len(), 3);
        drop(probe);
        assert_eq!(calls, vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn none_complete() {
        let mut calls = Vec::new();
        let mut probe = table_probe(&[(5.0, 150, 149), (4.0, 120, 0)], &mut calls);
        let sel = select_optimal_fps("v.mov", &[5.0, 4.0], &mut probe).unwrap();
        assert_eq!(sel.selected_fps, None);
    }

    #[test]
    fn first_wins_ties() {
        let mut calls = Vec::new();
        let mut probe = table_probe(&[(2.5, 75, 75), (2.4, 75, 75)], &mut calls);
        let sel = select_optimal_fps("v.mov", &[2.5, 2.4], &mut probe).unwrap();
        assert_eq!(sel.selected_fps, Some(2.5));
    }

    #[test]
    fn zero_frames_never_selected() {
        let mut calls = Vec::new();
        let mut probe = table_probe(&[(1.0, 0, 0)], &mut calls);
        let sel = select_optimal_fps("v.mov", &[1.0], &mut probe).unwrap();
        assert_eq!(sel.selected_fps, None);
        assert!(!sel.trials[0].complete);
    }

    #[test]
    fn probe_failure_carries_fps() {
        let mut probe = |_: &Path, fps: f64| -> Result<FpsTrial, ProbeError> {
            if fps < 4.5 {
                Err("mapper crashed".into())
            } else {
                Ok(FpsTrial::new(fps, 10, 10)?)
            }
        };
        match select_optimal_fps("v.mov", &[5.0, 4.0], &mut probe) {
            Err(FpsError::ProbeFailure { fps, .. }) => assert_eq!(fps, 4.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn candidate_validation() {
        let mut probe =
            |_: &Path, fps: f64| -> Result<FpsTrial, ProbeError> { Ok(FpsTrial::new(fps, 1, 1)?) };
        for bad in [
            vec![],
            vec![0.0],
            vec![-1.0],
            vec![4.0, 4.0],
            vec![f64::NAN],
        ] {
            assert!(matches!(
                select_optimal_fps("v", &bad, &mut probe),
                Err(FpsError::InvalidCandidates(_))
            ));
        }
    }

    #[test]
    fn defaults() {
        let d = default_fps_candidates();
        assert_eq!(d, vec![5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!(d.windows(2).all(|w| w[0] > w[1]));
        assert!(d.iter().all(|&f| f > 0.0 && f.fract() == 0.0));
    }

    #[test]
    fn report_shape() {
        let sel = FpsSelection {
            video: "v.mov".into(),
            trials: vec![FpsTrial::new(4.0, 120, 120).unwrap()],
            selected_fps: None,
        };
        let v: serde_json::Value = serde_json::from_str(&run_report_json(&sel)).unwrap();
        assert_eq!(v["video"], "v.mov");
        assert_eq!(v["trials"][0]["n_frames"], 120);
        assert_eq!(v["trials"][0]["complete"], true);
        assert!(v["selected_fps"].is_null());
    }
}
