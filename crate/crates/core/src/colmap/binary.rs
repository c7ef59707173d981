use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{CameraIntrinsics, CameraModel, ColmapError, ImageRecord, SparseModel};

/// Little-endian cursor over one model file.
struct Reader<'a> {
    file: &'static str,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(file: &'static str, buf: &'a [u8]) -> Self {
        Reader { file, buf, pos: 0 }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], ColmapError> {
        if self.buf.len() - self.pos < n {
            return Err(ColmapError::TruncatedFile(self.file.to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ColmapError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ColmapError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, ColmapError> {
        Ok(i32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ColmapError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ColmapError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn cstring(&mut self) -> Result<String, ColmapError> {
        let rest = &self.buf[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| ColmapError::TruncatedFile(self.file.to_string()))?;
        let s =
            String::from_utf8(rest[..end].to_vec()).map_err(|_| ColmapError::MalformedRecord {
                file: self.file.to_string(),
                line: 0,
                reason: "image name is not UTF-8".into(),
            })?;
        self.pos += end + 1;
        Ok(s)
    }

    /// Reads a record count that must be satisfiable by the remaining bytes.
    fn count(&mut self, min_record: usize) -> Result<usize, ColmapError> {
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.pos) as u64;
        if n > remaining {
            return Err(ColmapError::MagicMismatch {
                file: self.file.to_string(),
                reason: format!("declares {n} records in {remaining} bytes"),
            });
        }
        let n = n as usize;
        if n.saturating_mul(min_record) as u64 > remaining {
            return Err(ColmapError::TruncatedFile(self.file.to_string()));
        }
        Ok(n)
    }

    fn finish(&self) -> Result<(), ColmapError> {
        if self.pos != self.buf.len() {
            return Err(ColmapError::MagicMismatch {
                file: self.file.to_string(),
                reason: format!(
                    "{} trailing bytes after last record",
                    self.buf.len() - self.pos
                ),
            });
        }
        Ok(())
    }
}

fn read_required(dir: &Path, name: &str) -> Result<Vec<u8>, ColmapError> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(ColmapError::MissingFile(p));
    }
    Ok(fs::read(p)?)
}

/// Parses `cameras.bin`, `images.bin` and (if present) `points3D.bin`.
///
/// No partial result is returned: any truncation fails the whole parse.
pub fn parse_model_binary(dir: impl AsRef<Path>) -> Result<SparseModel, ColmapError> {
    let dir = dir.as_ref();
    let cameras = parse_cameras(&read_required(dir, "cameras.bin")?)?;
    let images = parse_images(&read_required(dir, "images.bin")?)?;
    let (points3d_count, mean_reprojection_error) = match dir.join("points3D.bin") {
        p if p.is_file() => parse_points(&fs::read(p)?)?,
        _ => (0, None),
    };
    SparseModel {
        cameras,
        images,
        points3d_count,
        mean_reprojection_error,
    }
    .finish("images.bin")
}

fn parse_cameras(buf: &[u8]) -> Result<BTreeMap<u32, CameraIntrinsics>, ColmapError> {
    let mut r = Reader::new("cameras.bin", buf);
    let n = r.count(24)?;
    let mut cams = BTreeMap::new();
    for _ in 0..n {
        let camera_id = r.u32()?;
        let model_id = r.i32()?;
        let model = CameraModel::from_id(model_id)
            .ok_or_else(|| ColmapError::UnknownCameraModel(format!("model id {model_id}")))?;
        let width = r.u64()?;
        let height = r.u64()?;
        let params = (0..model.arity())
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()?;
        cams.insert(
            camera_id,
            CameraIntrinsics {
                camera_id,
                model,
                width,
                height,
                params,
            },
        );
    }
    r.finish()?;
    Ok(cams)
}

fn parse_images(buf: &[u8]) -> Result<Vec<ImageRecord>, ColmapError> {
    let mut r = Reader::new("images.bin", buf);
    let n = r.count(73)?;
    let mut images = Vec::with_capacity(n);
    for _ in 0..n {
        let image_id = r.u32()?;
        let mut q = [0.0; 4];
        for v in &mut q {
            *v = r.f64()?;
        }
        let mut t = [0.0; 3];
        for v in &mut t {
            *v = r.f64()?;
        }
        let camera_id = r.u32()?;
        let name = r.cstring()?;
        let n_obs = r.u64()?;
        // x, y (f64) and point3D id (u64) per observation
        let skip = n_obs
            .checked_mul(24)
            .and_then(|b| usize::try_from(b).ok())
            .ok_or_else(|| ColmapError::TruncatedFile("images.bin".into()))?;
        r.bytes(skip)?;
        let rec = ImageRecord::new(image_id, q, t, camera_id, name).map_err(|e| {
            ColmapError::MalformedRecord {
                file: "images.bin".into(),
                line: 0,
                reason: format!("image {image_id}: {e}"),
            }
        })?;
        images.push(rec);
    }
    r.finish()?;
    Ok(images)
}

fn parse_points(buf: &[u8]) -> Result<(usize, Option<f64>), ColmapError> {
    let mut r = Reader::new("points3D.bin", buf);
    let n = r.count(51)?;
    let mut err_sum = 0.0;
    for _ in 0..n {
        let _id = r.u64()?;
        for _ in 0..3 {
            r.f64()?;
        }
        for _ in 0..3 {
            r.u8()?;
        }
        err_sum += r.f64()?;
        let track = r.u64()?;
        let skip = track
            .checked_mul(8)
            .and_then(|b| usize::try_from(b).ok())
            .ok_or_else(|| ColmapError::TruncatedFile("points3D.bin".into()))?;
        r.bytes(skip)?;
    }
    r.finish()?;
    Ok((n, (n > 0).then(|| err_sum / n as f64)))
}

/// Writes `cameras.bin` and `images.bin` (no observations), plus `points3D.bin`
/// placeholder records when the model carries points.
pub fn write_model_binary(model: &SparseModel, dir: impl AsRef<Path>) -> Result<(), ColmapError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut b = Vec::new();
    b.extend_from_slice(&(model.cameras.len() as u64).to_le_bytes());
    for c in model.cameras.values() {
        b.extend_from_slice(&c.camera_id.to_le_bytes());
        b.extend_from_slice(&c.model.id().to_le_bytes());
        b.extend_from_slice(&c.width.to_le_bytes());
        b.extend_from_slice(&c.height.to_le_bytes());
        for p in &c.params {
            b.extend_from_slice(&p.to_le_bytes());
        }
    }
    fs::write(dir.join("cameras.bin"), &b)?;

    b.clear();
    b.extend_from_slice(&(model.images.len() as u64).to_le_bytes());
    for im in &model.images {
        b.extend_from_slice(&im.image_id.to_le_bytes());
        for v in im.qvec.iter().chain(im.tvec().iter()) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&im.camera_id.to_le_bytes());
        b.extend_from_slice(im.file_name.as_bytes());
        b.push(0);
        b.extend_from_slice(&0u64.to_le_bytes());
    }
    fs::write(dir.join("images.bin"), &b)?;

    if model.points3d_count > 0 {
        let err = model.mean_reprojection_error.unwrap_or(0.0);
        b.clear();
        b.extend_from_slice(&(model.points3d_count as u64).to_le_bytes());
        for id in 1..=model.points3d_count as u64 {
            b.extend_from_slice(&id.to_le_bytes());
            b.extend_from_slice(&[0u8; 24]);
            b.extend_from_slice(&[0u8; 3]);
            b.extend_from_slice(&err.to_le_bytes());
            b.extend_from_slice(&0u64.to_le_bytes());
        }
        fs::write(dir.join("points3D.bin"), &b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with(files: &[(&str, Vec<u8>)]) -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        for (n, b) in files {
            fs::write(d.path().join(n), b).unwrap();
        }
        d
    }

    fn one_pinhole() -> Vec<u8> {
        let mut b = 1u64.to_le_bytes().to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&1i32.to_le_bytes());
        b.extend_from_slice(&3840u64.to_le_bytes());
        b.extend_from_slice(&2160u64.to_le_bytes());
        for p in [3000.0f64, 3000.0, 1920.0, 1080.0] {
            b.extend_from_slice(&p.to_le_bytes());
        }
        b
    }

    #[test]
    fn empty_images() {
        let d = dir_with(&[
            ("cameras.bin", one_pinhole()),
            ("images.bin", 0u64.to_le_bytes().to_vec()),
        ]);
        let m = parse_model_binary(d.path()).unwrap();
        assert!(m.images.is_empty());
        assert_eq!(m.cameras[&1].width, 3840);
    }

    #[test]
    fn truncated_camera() {
        let mut cams = one_pinhole();
        cams.truncate(cams.len() - 3);
        let d = dir_with(&[
            ("cameras.bin", cams),
            ("images.bin", 0u64.to_le_bytes().to_vec()),
        ]);
        assert!(matches!(
            parse_model_binary(d.path()),
            Err(ColmapError::TruncatedFile(_))
        ));
    }

    #[test]
    fn trailing_bytes_and_absurd_counts() {
        let mut cams = one_pinhole();
        cams.push(7);
        let d = dir_with(&[
            ("cameras.bin", cams),
            ("images.bin", 0u64.to_le_bytes().to_vec()),
        ]);
        assert!(matches!(
            parse_model_binary(d.path()),
            Err(ColmapError::MagicMismatch { .. })
        ));
        let d = dir_with(&[
            ("cameras.bin", b"# Camera list with one line".to_vec()),
            ("images.bin", 0u64.to_le_bytes().to_vec()),
        ]);
        assert!(matches!(
            parse_model_binary(d.path()),
            Err(ColmapError::MagicMismatch { .. })
        ));
    }

    #[test]
    fn unknown_model_id() {
        let mut cams = one_pinhole();
        cams[12..16].copy_from_slice(&42i32.to_le_bytes());
        let d = dir_with(&[
            ("cameras.bin", cams),
            ("images.bin", 0u64.to_le_bytes().to_vec()),
        ]);
        assert!(matches!(
            parse_model_binary(d.path()),
            Err(ColmapError::UnknownCameraModel(_))
        ));
    }
}
