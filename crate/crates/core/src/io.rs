//! Little-endian file formats and the JSON run configuration.
//!
//! | file | magic | contents |
//! |------|-------|----------|
//! | channel data | `SBCD` | 64-byte header, optional element table, f32 samples |
//! | beam volume | `SBVL` | 24-byte header, axes as f64, f32 voxels |
//! | mask | `SBMK` | 20-byte header, 1 bit per voxel, JSON sidecar |
//! | Cartesian volume | `SBCV` | 72-byte header, f32 voxels |

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::beamform::{BeamVolume, FocusMode, Method};
use crate::error::{Error, Result};
use crate::geometry::{build_array, ArrayGeometry, ArrayKind, ImagingGrid, SensorElement};
use crate::postproc::{CartesianSpec, CartesianVolume, SegmentedVolume};
use crate::scalar::Real;
use crate::signal::ChannelData;

pub const FORMAT_VERSION: u16 = 1;
pub const CHANNEL_HEADER_LEN: usize = 64;
pub const ELEMENT_RECORD_LEN: usize = 24;
pub const VOLUME_HEADER_LEN: usize = 24;
pub const MASK_HEADER_LEN: usize = 20;
pub const CARTESIAN_HEADER_LEN: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Full URA in `n`-outer, `m`-inner order; positions implied by `M`, `N`, spacing.
    Ura = 0,
    /// Element table follows the header; payload follows table order.
    Explicit = 1,
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut w = Self(Vec::new());
        w.0.extend_from_slice(magic);
        w.u16(FORMAT_VERSION);
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn pad_to(&mut self, len: usize) {
        debug_assert!(self.0.len() <= len);
        self.0.resize(len, 0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic and version and positions after them.
    fn open(buf: &'a [u8], magic: &[u8; 4], header_len: usize) -> Result<Self> {
        if buf.len() < 4 {
            return Err(Error::MalformedHeader {
                offset: buf.len() as u64,
                reason: "file ends inside the magic".into(),
            });
        }
        let found: [u8; 4] = buf[..4].try_into().expect("4 bytes");
        if &found != magic {
            return Err(Error::BadMagic {
                expected: *magic,
                found,
            });
        }
        if buf.len() < header_len {
            return Err(Error::MalformedHeader {
                offset: buf.len() as u64,
                reason: format!("file is shorter than the {header_len}-byte header"),
            });
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        Ok(Self { buf, pos: 6 })
    }
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        s
    }
    fn u8(&mut self) -> u8 {
        self.take(1)[0]
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().expect("4 bytes"))
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }
    fn malformed(&self, at: usize, reason: impl Into<String>) -> Error {
        Error::MalformedHeader {
            offset: at as u64,
            reason: reason.into(),
        }
    }
    /// Requires exactly `expected` bytes to remain.
    fn body(&mut self, expected: u64) -> Result<&'a [u8]> {
        let actual = (self.buf.len() - self.pos) as u64;
        if actual < expected {
            return Err(Error::TruncatedPayload {
                offset: self.pos as u64,
                expected,
                actual,
            });
        }
        if actual > expected {
            return Err(Error::TrailingBytes {
                offset: self.pos as u64 + expected,
                extra: actual - expected,
            });
        }
        Ok(self.take(expected as usize))
    }
    /// Requires at least `expected` more bytes.
    fn need(&self, expected: u64) -> Result<()> {
        let actual = (self.buf.len() - self.pos) as u64;
        if actual < expected {
            return Err(Error::TruncatedPayload {
                offset: self.pos as u64,
                expected,
                actual,
            });
        }
        Ok(())
    }
}

fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
}

fn checked_len(parts: &[u64]) -> Result<u64> {
    parts
        .iter()
        .try_fold(1u64, |acc, &p| acc.checked_mul(p))
        .ok_or(Error::Overflow("payload size"))
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    tmp.set_file_name(format!(".{}.partial", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn layout_of<T: Real>(g: &ArrayGeometry<T>) -> Layout {
    let implied = g.kind() == ArrayKind::Ura
        && build_array(ArrayKind::Ura, g.m(), g.n(), g.spacing()).is_ok_and(|u| u.elements() == g.elements());
    if implied {
        Layout::Ura
    } else {
        Layout::Explicit
    }
}

/// Payload size of a channel-data file in bytes.
pub fn channel_payload_len(channels: u64, num_samples: u64) -> Result<u64> {
    checked_len(&[channels, num_samples, 4])
}

pub fn encode_channel_data<T: Real>(cd: &ChannelData<T>) -> Vec<u8> {
    let g = cd.geometry();
    let layout = layout_of(g);
    let mut w = Writer::new(b"SBCD");
    w.u8(layout as u8);
    w.u8(g.kind().code());
    w.u32(g.m() as u32);
    w.u32(g.n() as u32);
    w.f64(cd.fs().as_f64());
    w.f64(cd.t0().as_f64());
    w.u64(cd.num_samples() as u64);
    w.f64(cd.c().as_f64());
    w.f64(g.spacing().as_f64());
    w.u32(g.len() as u32);
    w.pad_to(CHANNEL_HEADER_LEN);
    if layout == Layout::Explicit {
        for e in g.elements() {
            w.u32(e.index_m);
            w.u32(e.index_n);
            w.f64(e.x.as_f64());
            w.f64(e.y.as_f64());
        }
    }
    w.0.reserve(cd.data().len() * 4);
    for &v in cd.data() {
        w.f32(v.as_f64() as f32);
    }
    w.0
}

pub fn decode_channel_data<T: Real>(buf: &[u8]) -> Result<ChannelData<T>> {
    let mut r = Reader::open(buf, b"SBCD", CHANNEL_HEADER_LEN)?;
    let layout = match r.u8() {
        0 => Layout::Ura,
        1 => Layout::Explicit,
        t => return Err(r.malformed(6, format!("unknown layout tag {t}"))),
    };
    let kind = ArrayKind::from_code(r.u8()).ok_or_else(|| r.malformed(7, "unknown array kind"))?;
    let (m, n) = (r.u32() as usize, r.u32() as usize);
    let (fs, t0, num_samples, c, spacing) = (r.f64(), r.f64(), r.u64(), r.f64(), r.f64());
    let count = r.u32() as usize;
    r.pos = CHANNEL_HEADER_LEN;
    let bad = |e: Error| Error::MalformedHeader {
        offset: 8,
        reason: e.to_string(),
    };
    let geometry = match layout {
        Layout::Ura => {
            if kind != ArrayKind::Ura || count != m * n {
                return Err(r.malformed(56, format!("URA layout with kind {kind} and {count} elements")));
            }
            build_array(ArrayKind::Ura, m, n, T::lit(spacing)).map_err(bad)?
        }
        Layout::Explicit => {
            r.need(checked_len(&[count as u64, ELEMENT_RECORD_LEN as u64])?)?;
            let elements = (0..count)
                .map(|_| SensorElement {
                    index_m: r.u32(),
                    index_n: r.u32(),
                    x: T::lit(r.f64()),
                    y: T::lit(r.f64()),
                })
                .collect();
            ArrayGeometry::from_elements(kind, m, n, T::lit(spacing), elements).map_err(bad)?
        }
    };
    let payload = r.body(channel_payload_len(count as u64, num_samples)?)?;
    let data = f32s(payload).map(|v| T::lit(v as f64)).collect();
    ChannelData::new(geometry, T::lit(fs), T::lit(t0), T::lit(c), num_samples as usize, data).map_err(bad)
}

pub fn write_channel_data<T: Real>(path: &Path, cd: &ChannelData<T>) -> Result<()> {
    write_atomic(path, &encode_channel_data(cd))
}

pub fn read_channel_data<T: Real>(path: &Path) -> Result<ChannelData<T>> {
    decode_channel_data(&fs::read(path)?)
}

fn put_grid<T: Real>(w: &mut Writer, grid: &ImagingGrid<T>) {
    for &r in grid.ranges() {
        w.f64(r.as_f64());
    }
    for &a in grid.azimuths_deg() {
        w.f64(a);
    }
    for &b in grid.elevations_deg() {
        w.f64(b);
    }
}

fn get_grid<T: Real>(r: &mut Reader, nr: usize, mb: usize, nb: usize) -> Result<ImagingGrid<T>> {
    let at = r.pos;
    r.need(checked_len(&[(nr + mb + nb) as u64, 8])?)?;
    let ranges = (0..nr).map(|_| T::lit(r.f64())).collect();
    let az = (0..mb).map(|_| r.f64()).collect();
    let el = (0..nb).map(|_| r.f64()).collect();
    ImagingGrid::from_degrees(az, el, ranges).map_err(|e| r.malformed(at, e.to_string()))
}

/// Voxels are written range outer, elevation middle, azimuth inner.
pub fn encode_volume<T: Real>(v: &BeamVolume<T>) -> Vec<u8> {
    let g = v.grid();
    let mut w = Writer::new(b"SBVL");
    w.u8(v.method().code());
    w.u8(v.focus_mode().code());
    w.u32(g.ranges().len() as u32);
    w.u32(g.mb() as u32);
    w.u32(g.nb() as u32);
    w.pad_to(VOLUME_HEADER_LEN);
    put_grid(&mut w, g);
    let vox = v.voxels();
    for r in 0..g.ranges().len() {
        for q in 0..g.nb() {
            for p in 0..g.mb() {
                w.f32(vox[[r, p, q]].as_f64() as f32);
            }
        }
    }
    w.0
}

pub fn decode_volume<T: Real>(buf: &[u8]) -> Result<BeamVolume<T>> {
    let mut r = Reader::open(buf, b"SBVL", VOLUME_HEADER_LEN)?;
    let method = Method::from_code(r.u8()).ok_or_else(|| r.malformed(6, "unknown method tag"))?;
    let focus = FocusMode::from_code(r.u8()).ok_or_else(|| r.malformed(7, "unknown focus tag"))?;
    let (nr, mb, nb) = (r.u32() as usize, r.u32() as usize, r.u32() as usize);
    r.pos = VOLUME_HEADER_LEN;
    let grid = get_grid::<T>(&mut r, nr, mb, nb)?;
    let payload = r.body(checked_len(&[nr as u64, mb as u64, nb as u64, 4])?)?;
    let mut vox = Array3::zeros((nr, mb, nb));
    for (i, v) in f32s(payload).enumerate() {
        vox[[i / (mb * nb), i % mb, (i / mb) % nb]] = T::lit(v as f64);
    }
    let at = r.pos;
    BeamVolume::new(grid, method, focus, vox).map_err(|e| r.malformed(at, e.to_string()))
}

pub fn write_volume<T: Real>(path: &Path, v: &BeamVolume<T>) -> Result<()> {
    write_atomic(path, &encode_volume(v))
}

pub fn read_volume<T: Real>(path: &Path) -> Result<BeamVolume<T>> {
    decode_volume(&fs::read(path)?)
}

/// Metadata stored next to a mask file as `<mask>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSidecar {
    pub k: usize,
    pub chosen_cluster_mean: f64,
    pub centroids: Vec<f64>,
    pub variance_history: Vec<f64>,
    pub ranges_m: Vec<f64>,
    pub azimuths_deg: Vec<f64>,
    pub elevations_deg: Vec<f64>,
}

pub fn sidecar_path(mask_path: &Path) -> PathBuf {
    let mut s = mask_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Bits are packed LSB first in the volume's voxel order.
pub fn encode_mask(mask: &Array3<bool>) -> Vec<u8> {
    let (nr, mb, nb) = mask.dim();
    let mut w = Writer::new(b"SBMK");
    w.u16(0);
    w.u32(nr as u32);
    w.u32(mb as u32);
    w.u32(nb as u32);
    let mut bytes = vec![0u8; (nr * mb * nb).div_ceil(8)];
    let mut i = 0;
    for r in 0..nr {
        for q in 0..nb {
            for p in 0..mb {
                if mask[[r, p, q]] {
                    bytes[i / 8] |= 1 << (i % 8);
                }
                i += 1;
            }
        }
    }
    w.0.extend_from_slice(&bytes);
    w.0
}

pub fn decode_mask(buf: &[u8]) -> Result<Array3<bool>> {
    let mut r = Reader::open(buf, b"SBMK", MASK_HEADER_LEN)?;
    r.take(2);
    let (nr, mb, nb) = (r.u32() as usize, r.u32() as usize, r.u32() as usize);
    let bits = checked_len(&[nr as u64, mb as u64, nb as u64])?;
    let body = r.body(bits.div_ceil(8))?;
    let mut mask = Array3::from_elem((nr, mb, nb), false);
    let mut i = 0;
    for rr in 0..nr {
        for q in 0..nb {
            for p in 0..mb {
                mask[[rr, p, q]] = body[i / 8] >> (i % 8) & 1 == 1;
                i += 1;
            }
        }
    }
    Ok(mask)
}

pub fn write_segmentation<T: Real>(path: &Path, seg: &SegmentedVolume<T>) -> Result<()> {
    let g = &seg.grid;
    let sidecar = MaskSidecar {
        k: seg.k,
        chosen_cluster_mean: seg.chosen_cluster_mean,
        centroids: seg.centroids.clone(),
        variance_history: seg.variance_history.clone(),
        ranges_m: g.ranges().iter().map(|r| r.as_f64()).collect(),
        azimuths_deg: g.azimuths_deg().to_vec(),
        elevations_deg: g.elevations_deg().to_vec(),
    };
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    write_atomic(path, &encode_mask(&seg.mask))?;
    write_atomic(&sidecar_path(path), &json)
}

pub fn read_segmentation<T: Real>(path: &Path) -> Result<SegmentedVolume<T>> {
    let mask = decode_mask(&fs::read(path)?)?;
    let sc: MaskSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let grid = ImagingGrid::from_degrees(
        sc.azimuths_deg,
        sc.elevations_deg,
        sc.ranges_m.into_iter().map(T::lit).collect(),
    )?;
    if mask.dim() != (grid.ranges().len(), grid.mb(), grid.nb()) {
        return Err(Error::InvalidGrid("mask shape does not match its sidecar grid".into()));
    }
    Ok(SegmentedVolume {
        grid,
        mask,
        k: sc.k,
        chosen_cluster_mean: sc.chosen_cluster_mean,
        centroids: sc.centroids,
        variance_history: sc.variance_history,
    })
}

/// Voxels are written z outer, y middle, x inner.
pub fn encode_cartesian<T: Real>(v: &CartesianVolume<T>) -> Vec<u8> {
    let s = &v.spec;
    let mut w = Writer::new(b"SBCV");
    w.u16(0);
    for d in s.dims {
        w.u32(d as u32);
    }
    for o in s.origin {
        w.f64(o);
    }
    for p in s.pitch {
        w.f64(p);
    }
    w.pad_to(CARTESIAN_HEADER_LEN);
    let [nx, ny, nz] = s.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                w.f32(v.values[[i, j, k]].as_f64() as f32);
            }
        }
    }
    w.0
}

pub fn decode_cartesian<T: Real>(buf: &[u8]) -> Result<CartesianVolume<T>> {
    let mut r = Reader::open(buf, b"SBCV", CARTESIAN_HEADER_LEN)?;
    r.take(2);
    let dims = [r.u32() as usize, r.u32() as usize, r.u32() as usize];
    let origin = [r.f64(), r.f64(), r.f64()];
    let pitch = [r.f64(), r.f64(), r.f64()];
    let spec = CartesianSpec { origin, pitch, dims };
    spec.validate().map_err(|e| r.malformed(8, e.to_string()))?;
    r.pos = CARTESIAN_HEADER_LEN;
    let [nx, ny, nz] = dims;
    let payload = r.body(checked_len(&[nx as u64, ny as u64, nz as u64, 4])?)?;
    let mut values = Array3::zeros((nx, ny, nz));
    for (idx, v) in f32s(payload).enumerate() {
        values[[idx % nx, (idx / nx) % ny, idx / (nx * ny)]] = T::lit(v as f64);
    }
    Ok(CartesianVolume { spec, values })
}

pub fn write_cartesian<T: Real>(path: &Path, v: &CartesianVolume<T>) -> Result<()> {
    write_atomic(path, &encode_cartesian(v))
}

pub fn read_cartesian<T: Real>(path: &Path) -> Result<CartesianVolume<T>> {
    decode_cartesian(&fs::read(path)?)
}

/// Turns a projection indexed `(u, v)` into raster rows: `u` runs left to right,
/// `v` bottom to top.
pub fn raster_from_projection(img: &Array2<u8>) -> Array2<u8> {
    let (nu, nv) = img.dim();
    Array2::from_shape_fn((nv, nu), |(row, col)| img[[col, nv - 1 - row]])
}

/// Binary greymap (P5) of a raster indexed `(row, column)`.
pub fn encode_pgm(raster: &Array2<u8>) -> Vec<u8> {
    let (h, w) = raster.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(raster.iter());
    out
}

pub fn decode_pgm(buf: &[u8]) -> Result<Array2<u8>> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader {
                offset: pos as u64,
                reason: "incomplete PGM header".into(),
            });
        }
        fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::BadMagic {
            expected: *b"P5\n ",
            found: [buf[0], buf.get(1).copied().unwrap_or(0), 0, 0],
        });
    }
    let parse = |s: &str, at: usize| {
        s.parse::<usize>().map_err(|_| Error::MalformedHeader {
            offset: at as u64,
            reason: format!("bad PGM dimension {s:?}"),
        })
    };
    let (w, h) = (parse(&fields[1], 3)?, parse(&fields[2], 3)?);
    pos += 1;
    let expected = (w * h) as u64;
    let actual = buf.len().saturating_sub(pos) as u64;
    if actual != expected {
        return Err(Error::TruncatedPayload {
            offset: pos as u64,
            expected,
            actual,
        });
    }
    Ok(Array2::from_shape_vec((h, w), buf[pos..].to_vec()).expect("size checked"))
}

pub fn write_pgm(path: &Path, raster: &Array2<u8>) -> Result<()> {
    write_atomic(path, &encode_pgm(raster))
}

pub mod config {
    //! JSON run configuration. Unknown keys are rejected; units are in key names.

    use serde::{Deserialize, Serialize};

    use crate::beamform::{DmParams, FocusMode};
    use crate::error::{Error, Result};
    use crate::geometry::ArrayKind;
    use crate::postproc::Plane;
    use crate::signal::{Clutter, TgcParams, Window};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RunConfig {
        pub array: ArrayConfig,
        pub pulse: PulseConfig,
        pub medium: MediumConfig,
        pub scene: SceneConfig,
        pub grid: GridConfig,
        pub method: MethodConfig,
        #[serde(default)]
        pub postproc: PostprocConfig,
        #[serde(default)]
        pub bench: BenchConfig,
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ArrayConfig {
        pub kind: ArrayKind,
        pub m: usize,
        pub n: usize,
        /// Half a wavelength when omitted.
        #[serde(default)]
        pub spacing_m: Option<f64>,
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct PulseConfig {
        pub fc_hz: f64,
        pub cycles: f64,
        pub fs_hz: f64,
        #[serde(default = "default_window")]
        pub window: Window,
    }

    fn default_window() -> Window {
        Window::Hann
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct MediumConfig {
        pub c_mps: f64,
        #[serde(default = "default_spreading")]
        pub spreading_exponent: f64,
        #[serde(default)]
        pub absorption_db_per_m: f64,
    }

    fn default_spreading() -> f64 {
        2.0
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct PointConfig {
        pub range_m: f64,
        pub azimuth_deg: f64,
        pub elevation_deg: f64,
        #[serde(default = "one")]
        pub reflectivity: f64,
    }

    fn one() -> f64 {
        1.0
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RecordConfig {
        pub t0_s: f64,
        pub duration_s: f64,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SceneConfig {
        pub points: Vec<PointConfig>,
        #[serde(default)]
        pub snr_db: Option<f64>,
        #[serde(default)]
        pub clutter: Option<Clutter>,
        /// Sized around the echoes and grid ranges when omitted.
        #[serde(default)]
        pub record: Option<RecordConfig>,
    }

    impl SceneConfig {
        pub fn is_stochastic(&self) -> bool {
            self.snr_db.is_some() || self.clutter.is_some_and(|c| c.count > 0)
        }
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct GridConfig {
        pub azimuth_span_deg: f64,
        pub elevation_span_deg: f64,
        pub mb: usize,
        pub nb: usize,
        pub ranges_m: Vec<f64>,
    }

    /// Beamformer families compared by a run.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
    pub enum Beamformer {
        /// Conventional DAS over the full URA.
        #[serde(rename = "CM")]
        Cm,
        /// Product of orthogonal line beams.
        #[serde(rename = "PM")]
        Pm,
        /// Frequency-domain direct method over the full URA.
        #[serde(rename = "DM")]
        Dm,
    }

    impl Beamformer {
        pub fn label(self) -> &'static str {
            match self {
                Beamformer::Cm => "CM",
                Beamformer::Pm => "PM",
                Beamformer::Dm => "DM",
            }
        }
    }

    impl std::str::FromStr for Beamformer {
        type Err = Error;

        fn from_str(s: &str) -> Result<Self> {
            match s.to_ascii_uppercase().as_str() {
                "CM" | "DAS" => Ok(Beamformer::Cm),
                "PM" | "PRODUCT" => Ok(Beamformer::Pm),
                "DM" => Ok(Beamformer::Dm),
                _ => Err(Error::InvalidArgument(format!("unknown beamformer {s:?}"))),
            }
        }
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct MethodConfig {
        pub beamformers: Vec<Beamformer>,
        /// Layout used for PM on a URA recording; the RECT perimeter when omitted.
        #[serde(default)]
        pub pm_array: Option<ArrayKind>,
        #[serde(default)]
        pub focus: FocusMode,
        #[serde(default)]
        pub gate_samples: usize,
        #[serde(default = "yes")]
        pub matched_filter: bool,
        #[serde(default)]
        pub tgc: Option<TgcParams>,
        #[serde(default)]
        pub dm: DmParams,
    }

    fn yes() -> bool {
        true
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct PostprocConfig {
        #[serde(default = "default_k")]
        pub k: usize,
        #[serde(default = "default_max_iter")]
        pub max_iter: usize,
        #[serde(default = "default_tol")]
        pub tol: f64,
        #[serde(default = "default_pitch")]
        pub cartesian_pitch_m: [f64; 3],
        #[serde(default = "default_dr")]
        pub dynamic_range_db: f64,
        #[serde(default = "default_planes")]
        pub planes: Vec<Plane>,
        #[serde(default = "default_threshold")]
        pub resolvability_threshold_db: f64,
    }

    fn default_k() -> usize {
        3
    }
    fn default_max_iter() -> usize {
        100
    }
    fn default_tol() -> f64 {
        1e-6
    }
    fn default_pitch() -> [f64; 3] {
        [0.05, 0.05, 0.05]
    }
    fn default_dr() -> f64 {
        40.0
    }
    fn default_planes() -> Vec<Plane> {
        vec![Plane::Xy, Plane::Xz, Plane::Yz]
    }
    fn default_threshold() -> f64 {
        -6.0
    }

    impl Default for PostprocConfig {
        fn default() -> Self {
            serde_json::from_str("{}").expect("all fields defaulted")
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct BenchConfig {
        #[serde(default = "default_reps")]
        pub repetitions: usize,
        #[serde(default)]
        pub threads: Option<usize>,
    }

    fn default_reps() -> usize {
        3
    }

    impl Default for BenchConfig {
        fn default() -> Self {
            Self {
                repetitions: default_reps(),
                threads: None,
            }
        }
    }

    impl RunConfig {
        pub fn from_json(text: &str) -> Result<Self> {
            let cfg: Self = serde_json::from_str(text)?;
            cfg.validate()?;
            Ok(cfg)
        }

        pub fn load(path: &std::path::Path) -> Result<Self> {
            Self::from_json(&std::fs::read_to_string(path)?)
        }

        pub fn validate(&self) -> Result<()> {
            let bad = |m: String| Err(Error::InvalidArgument(m));
            if self.scene.points.is_empty() {
                return bad("scene.points is empty".into());
            }
            if self.method.beamformers.is_empty() {
                return bad("method.beamformers is empty".into());
            }
            if self.grid.ranges_m.is_empty() {
                return bad("grid.ranges_m is empty".into());
            }
            if !(self.medium.c_mps > 0.0) || !(self.pulse.fc_hz > 0.0) {
                return bad("medium.c_mps and pulse.fc_hz must be positive".into());
            }
            Ok(())
        }

        pub fn spacing_m(&self) -> f64 {
            self.array
                .spacing_m
                .unwrap_or(self.medium.c_mps / self.pulse.fc_hz / 2.0)
        }
    }
}
