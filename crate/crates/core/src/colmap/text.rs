use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CameraIntrinsics, CameraModel, ColmapError, ImageRecord, SparseModel};
use crate::numfmt::sig17;

fn read_required(dir: &Path, name: &str) -> Result<String, ColmapError> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(ColmapError::MissingFile(p));
    }
    Ok(fs::read_to_string(p)?)
}

fn malformed(file: &str, line: usize, reason: impl Into<String>) -> ColmapError {
    ColmapError::MalformedRecord {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(
    file: &str,
    line: usize,
    what: &str,
    tok: Option<&str>,
) -> Result<T, ColmapError> {
    let tok = tok.ok_or_else(|| malformed(file, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| malformed(file, line, format!("bad {what} '{tok}'")))
}

fn is_comment(l: &str) -> bool {
    l.trim_start().starts_with('#')
}

/// Parses `cameras.txt`, `images.txt` and (if present) `points3D.txt`.
pub fn parse_model_text(dir: impl AsRef<Path>) -> Result<SparseModel, ColmapError> {
    let dir = dir.as_ref();
    let cameras = parse_cameras(&read_required(dir, "cameras.txt")?)?;
    let images = parse_images(&read_required(dir, "images.txt")?)?;
    let (points3d_count, mean_reprojection_error) = match dir.join("points3D.txt") {
        p if p.is_file() => parse_points(&fs::read_to_string(p)?)?,
        _ => (0, None),
    };
    SparseModel {
        cameras,
        images,
        points3d_count,
        mean_reprojection_error,
    }
    .finish("images.txt")
}

fn parse_cameras(text: &str) -> Result<BTreeMap<u32, CameraIntrinsics>, ColmapError> {
    const F: &str = "cameras.txt";
    let mut cams = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let ln = n + 1;
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }
        let mut t = line.split_whitespace();
        let camera_id: u32 = num(F, ln, "CAMERA_ID", t.next())?;
        let model_name = t.next().ok_or_else(|| malformed(F, ln, "missing MODEL"))?;
        let model = CameraModel::from_name(model_name)
            .ok_or_else(|| ColmapError::UnknownCameraModel(model_name.to_string()))?;
        let width: u64 = num(F, ln, "WIDTH", t.next())?;
        let height: u64 = num(F, ln, "HEIGHT", t.next())?;
        let params = t
            .map(|tok| num(F, ln, "PARAMS", Some(tok)))
            .collect::<Result<Vec<f64>, _>>()?;
        let cam = CameraIntrinsics {
            camera_id,
            model,
            width,
            height,
            params,
        };
        cam.validate().map_err(|r| malformed(F, ln, r))?;
        if cams.insert(camera_id, cam).is_some() {
            return Err(malformed(F, ln, format!("duplicate camera id {camera_id}")));
        }
    }
    Ok(cams)
}

fn parse_images(text: &str) -> Result<Vec<ImageRecord>, ColmapError> {
    const F: &str = "images.txt";
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !is_comment(l))
        .collect();
    let mut images = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (n, line) = lines[i];
        let ln = n + 1;
        if line.trim().is_empty() {
            i += 1;
            continue;
        }
        // IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME
        let mut t = line.split_whitespace();
        let image_id: u32 = num(F, ln, "IMAGE_ID", t.next())?;
        let mut q = [0.0; 4];
        for (k, name) in ["QW", "QX", "QY", "QZ"].iter().enumerate() {
            q[k] = num(F, ln, name, t.next())?;
        }
        let mut tv = [0.0; 3];
        for (k, name) in ["TX", "TY", "TZ"].iter().enumerate() {
            tv[k] = num(F, ln, name, t.next())?;
        }
        let camera_id: u32 = num(F, ln, "CAMERA_ID", t.next())?;
        let name = t.collect::<Vec<_>>().join(" ");
        if name.is_empty() {
            return Err(malformed(F, ln, "missing NAME"));
        }
        let rec = ImageRecord::new(image_id, q, tv, camera_id, name)
            .map_err(|e| malformed(F, ln, e.to_string()))?;
        images.push(rec);
        // the following line holds the 2D observations, which are not needed
        i += 2;
    }
    Ok(images)
}

fn parse_points(text: &str) -> Result<(usize, Option<f64>), ColmapError> {
    const F: &str = "points3D.txt";
    let mut count = 0usize;
    let mut err_sum = 0.0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }
        // POINT3D_ID X Y Z R G B ERROR TRACK[]
        let err: f64 = num(F, n + 1, "ERROR", line.split_whitespace().nth(7))?;
        err_sum += err;
        count += 1;
    }
    Ok((count, (count > 0).then(|| err_sum / count as f64)))
}

/// Writes `cameras.txt` and `images.txt` (with empty observation lines).
///
/// Floats use 17 significant digits so the text model parses back to the
/// same values. `points3D.txt` is written only when the model has points,
/// as placeholder records at the origin carrying the mean error.
pub fn write_model_text(model: &SparseModel, dir: impl AsRef<Path>) -> Result<(), ColmapError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut cams = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    for c in model.cameras.values() {
        write!(
            cams,
            "{} {} {} {}",
            c.camera_id,
            c.model.name(),
            c.width,
            c.height
        )
        .unwrap();
        for p in &c.params {
            write!(cams, " {}", sig17(*p)).unwrap();
        }
        cams.push('\n');
    }
    fs::write(dir.join("cameras.txt"), cams)?;

    let mut imgs = String::from("# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    for im in &model.images {
        write!(imgs, "{}", im.image_id).unwrap();
        for v in im.qvec.iter().chain(im.tvec().iter()) {
            write!(imgs, " {}", sig17(*v)).unwrap();
        }
        writeln!(imgs, " {} {}", im.camera_id, im.file_name).unwrap();
        imgs.push('\n');
    }
    fs::write(dir.join("images.txt"), imgs)?;

    if model.points3d_count > 0 {
        let err = model.mean_reprojection_error.unwrap_or(0.0);
        let mut pts = String::from("# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
        for id in 1..=model.points3d_count {
            writeln!(pts, "{id} 0 0 0 0 0 0 {}", sig17(err)).unwrap();
        }
        fs::write(dir.join("points3D.txt"), pts)?;
    }
    Ok(())
}
