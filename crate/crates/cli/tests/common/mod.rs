#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::Point3;
use serde_json::Value;
use turntable_core::pointcloud::{write_ply_with, PlyFormat, PlyScalar};
use turntable_core::PointCloud;

pub struct Outcome {
    pub code: i32,
    pub summary: Value,
    pub stderr: String,
}

/// Runs the CLI and parses the summary it prints on stdout.
pub fn turntable(args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_turntable"))
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout);
    Outcome {
        code: out.status.code().expect("exited normally"),
        summary: serde_json::from_str(&stdout).unwrap_or(Value::Null),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Writes `body` as an executable script.
#[cfg(unix)]
pub fn script(path: &Path, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    std::fs::write(path, body).unwrap();
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path.to_path_buf()
}

/// ffmpeg stand-in: the "video" is a text file holding `duration=<seconds>`;
/// it writes floor(duration * fps) empty frames.
pub const FAKE_FFMPEG: &str = r#"#!/bin/sh
video=""; vf=""; out=""
while [ $# -gt 0 ]; do
  case "$1" in
    -i) video="$2"; shift 2 ;;
    -vf) vf="$2"; shift 2 ;;
    *) out="$1"; shift ;;
  esac
done
echo "$video $vf" >> "$(dirname "$0")/ffmpeg.log"
[ -f "$video" ] || { echo "$video: No such file or directory" >&2; exit 1; }
duration=$(sed -n 's/^duration=//p' "$video")
n=$(awk -v d="$duration" -v f="${vf#fps=}" 'BEGIN { printf "%d", d * f }')
dir=$(dirname "$out")
i=1
while [ "$i" -le "$n" ]; do
  : > "$dir/$(printf 'frame_%04d.png' "$i")"
  i=$((i + 1))
done
"#;

/// COLMAP stand-in: the mapper registers every frame when there are at
/// least `min_frames` (file next to the script, default 100) and three
/// fewer otherwise; nothing is written when no frame registers.
pub const FAKE_COLMAP: &str = r#"#!/bin/sh
here=$(dirname "$0")
cmd="$1"; shift
echo "$cmd $*" >> "$here/colmap.log"
db=""; images=""; output=""
while [ $# -gt 0 ]; do
  case "$1" in
    --database_path) db="$2" ;;
    --image_path) images="$2" ;;
    --output_path) output="$2" ;;
  esac
  shift 2
done
case "$cmd" in
  feature_extractor) : > "$db" ;;
  sequential_matcher) [ -f "$db" ] || { echo "no database" >&2; exit 1; } ;;
  mapper)
    min=$(cat "$here/min_frames" 2>/dev/null || echo 100)
    n=$(ls "$images" | wc -l)
    if [ "$n" -ge "$min" ]; then keep=$n; else keep=$((n - 3)); fi
    [ "$keep" -gt 0 ] || exit 0
    mkdir -p "$output/0"
    echo "1 PINHOLE 3840 2160 2900 2900 1920 1080" > "$output/0/cameras.txt"
    : > "$output/0/images.txt"
    i=1
    for f in $(ls "$images" | sort | head -n "$keep"); do
      printf '%d 1 0 0 0 0 0 %d 1 %s\n\n' "$i" "$i" "$f" >> "$output/0/images.txt"
      i=$((i + 1))
    done
    ;;
  *) echo "unknown command $cmd" >&2; exit 1 ;;
esac
"#;

pub struct FakeTools {
    pub dir: tempfile::TempDir,
    pub ffmpeg: PathBuf,
    pub colmap: PathBuf,
}

impl FakeTools {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let ffmpeg = script(&dir.path().join("ffmpeg"), FAKE_FFMPEG);
        let colmap = script(&dir.path().join("colmap"), FAKE_COLMAP);
        FakeTools {
            dir,
            ffmpeg,
            colmap,
        }
    }

    pub fn log(&self, tool: &str) -> String {
        std::fs::read_to_string(self.dir.path().join(format!("{tool}.log"))).unwrap_or_default()
    }

    pub fn set_min_frames(&self, n: usize) {
        std::fs::write(self.dir.path().join("min_frames"), n.to_string()).unwrap();
    }
}

pub fn video(dir: &Path, seconds: f64) -> PathBuf {
    let p = dir.join("object.mov");
    std::fs::write(&p, format!("duration={seconds}\n")).unwrap();
    p
}

pub fn write_cloud(path: &Path, points: Vec<Point3<f64>>) {
    let cloud = PointCloud::new(points).unwrap();
    write_ply_with(
        &cloud,
        path,
        PlyFormat::BinaryLittleEndian,
        PlyScalar::Double,
    )
    .unwrap();
}

/// Fibonacci-lattice points on a sphere.
pub fn sphere(center: Point3<f64>, r: f64, n: usize) -> Vec<Point3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            center + nalgebra::Vector3::new(rho * t.cos(), rho * t.sin(), z) * r
        })
        .collect()
}
