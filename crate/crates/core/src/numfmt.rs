//! Fixed-precision float formatting shared by the JSON and CSV writers.
//!
//! Every float is printed with 17 significant digits in scientific notation,
//! which round-trips any `f64` exactly and makes the output byte-stable.

/// Formats `v` with 17 significant digits, e.g. `1.0000000000000000e0`.
pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes `value` as pretty JSON with sorted object keys and every float
/// printed by [`sig17`]. Identical values always produce identical bytes.
pub fn to_stable_json<T: serde::Serialize>(value: &T) -> serde_json::Result<String> {
    // Value's map is a BTreeMap, which sorts keys
    let value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, StableFormatter::default());
    serde::Serialize::serialize(&value, &mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[derive(Default)]
struct StableFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for StableFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(sig17(v).as_bytes())
    }
    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}
