//! Segmentation, polar-to-Cartesian scan conversion and projections.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::BeamVolume;
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;
use crate::scalar::Real;

/// Binary volume of the voxels in the brightest intensity cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedVolume<T> {
    pub grid: ImagingGrid<T>,
    pub mask: Array3<bool>,
    pub k: usize,
    pub chosen_cluster_mean: f64,
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub variance_history: Vec<f64>,
}

impl<T: Real> SegmentedVolume<T> {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Mask as a 0/1 volume on the same grid.
    pub fn to_volume(&self, like: &BeamVolume<T>) -> Result<BeamVolume<T>> {
        BeamVolume::new(
            self.grid.clone(),
            like.method(),
            like.focus_mode(),
            self.mask.mapv(|b| if b { T::one() } else { T::zero() }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves more than `tol` times the intensity span.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 3,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// One-dimensional Lloyd iteration with quantile initialisation.
pub fn kmeans_1d(values: &[f64], params: &KMeansParams) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let k = params.k;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("intensities must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n == 0 || sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateClustering("volume intensity is constant".into()));
    }
    let span = sorted[n - 1] - sorted[0];
    let mut centroids: Vec<f64> = (0..k)
        .map(|j| sorted[(((j as f64 + 0.5) / k as f64) * n as f64) as usize])
        .collect();
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();
    for _ in 0..params.max_iter.max(1) {
        let sse: f64 = labels
            .par_iter_mut()
            .zip(values.par_iter())
            .map(|(l, &v)| {
                let mut best = 0;
                for j in 1..k {
                    if (v - centroids[j]).abs() < (v - centroids[best]).abs() {
                        best = j;
                    }
                }
                *l = best;
                (v - centroids[best]).powi(2)
            })
            .sum();
        history.push(sse);
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&l, &v) in labels.iter().zip(values) {
            sums[l] += v;
            counts[l] += 1;
        }
        let mut moved = 0.0f64;
        for j in 0..k {
            if counts[j] > 0 {
                let c = sums[j] / counts[j] as f64;
                moved = moved.max((c - centroids[j]).abs());
                centroids[j] = c;
            }
        }
        if moved <= params.tol * span {
            break;
        }
    }
    Ok((labels, centroids, history))
}

/// Segments a volume into `k` intensity clusters and keeps the brightest.
pub fn kmeans_segment<T: Real>(v: &BeamVolume<T>, params: &KMeansParams) -> Result<SegmentedVolume<T>> {
    let values: Vec<f64> = v.voxels().iter().map(|x| x.as_f64()).collect();
    let (labels, centroids, history) = kmeans_1d(&values, params)?;
    let mut sums = vec![0.0; params.k];
    let mut counts = vec![0usize; params.k];
    for (&l, &x) in labels.iter().zip(&values) {
        sums[l] += x;
        counts[l] += 1;
    }
    let (chosen, mean) = (0..params.k)
        .filter(|&j| counts[j] > 0)
        .map(|j| (j, sums[j] / counts[j] as f64))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let mask = Array3::from_shape_vec(v.voxels().raw_dim(), labels.iter().map(|&l| l == chosen).collect())
        .expect("labels match voxel count");
    Ok(SegmentedVolume {
        grid: v.grid().clone(),
        mask,
        k: params.k,
        chosen_cluster_mean: mean,
        centroids,
        variance_history: history,
    })
}

/// Regular Cartesian sampling of space in front of the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianSpec {
    /// Centre of voxel `(0, 0, 0)`, metres.
    pub origin: [f64; 3],
    pub pitch: [f64; 3],
    pub dims: [usize; 3],
}

impl CartesianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pitch.iter().any(|p| !(*p > 0.0)) || self.dims.contains(&0) {
            return Err(Error::InvalidArgument("Cartesian pitch must be positive and dims at least 1".into()));
        }
        Ok(())
    }

    /// Bounding box of the polar grid's coverage sampled at `pitch`.
    pub fn covering<T: Real>(grid: &ImagingGrid<T>, pitch: [f64; 3]) -> Result<Self> {
        let ranges: Vec<f64> = grid.ranges().iter().map(|r| r.as_f64()).collect();
        let (rmin, rmax) = (ranges[0], ranges[ranges.len() - 1]);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let (az, el) = (grid.azimuths_deg(), grid.elevations_deg());
        for &a in [az[0], az[az.len() - 1]].iter() {
            for &b in [el[0], el[el.len() - 1], 0.0f64.clamp(el[0], el[el.len() - 1])].iter() {
                for &r in &[rmin, rmax] {
                    let (u, v) = (a.to_radians().sin(), b.to_radians().sin());
                    let w = (1.0 - u * u - v * v).max(0.0).sqrt();
                    let p = [r * u, r * v, r * w];
                    for i in 0..3 {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
            }
        }
        // Broadside reaches the deepest z.
        hi[2] = hi[2].max(rmax);
        let spec = Self {
            origin: lo,
            pitch,
            dims: [0, 1, 2].map(|i| ((hi[i] - lo[i]) / pitch[i]).floor() as usize + 1),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.pitch[0],
            self.origin[1] + j as f64 * self.pitch[1],
            self.origin[2] + k as f64 * self.pitch[2],
        ]
    }
}

/// Cartesian volume indexed `(x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianVolume<T> {
    pub spec: CartesianSpec,
    pub values: Array3<T>,
}

/// Fractional index of `x` on an increasing axis, or `None` outside it.
fn axis_position(axis: &[f64], x: f64) -> Option<f64> {
    let n = axis.len();
    if n == 1 {
        return ((x - axis[0]).abs() <= 1e-9 * (1.0 + axis[0].abs())).then_some(0.0);
    }
    if x < axis[0] || x > axis[n - 1] {
        return None;
    }
    let i = axis.partition_point(|&a| a <= x).clamp(1, n - 1) - 1;
    Some(i as f64 + (x - axis[i]) / (axis[i + 1] - axis[i]))
}

fn trilinear(values: &Array3<f64>, pos: [f64; 3]) -> f64 {
    let dims = values.dim();
    let dims = [dims.0, dims.1, dims.2];
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for d in 0..3 {
        let i = (pos[d].floor() as usize).min(dims[d] - 1);
        base[d] = i;
        frac[d] = pos[d] - i as f64;
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for d in 0..3 {
            let up = (corner >> d) & 1 == 1;
            w *= if up { frac[d] } else { 1.0 - frac[d] };
            idx[d] = if up { (base[d] + 1).min(dims[d] - 1) } else { base[d] };
        }
        if w != 0.0 {
            acc += w * values[idx];
        }
    }
    acc
}

/// Resamples a polar volume onto a Cartesian grid by trilinear interpolation
/// in `(range, azimuth, elevation)` index space; points outside the polar
/// grid, at the origin or behind the array map to zero.
pub fn scan_convert<T: Real>(v: &BeamVolume<T>, spec: &CartesianSpec) -> Result<CartesianVolume<T>> {
    spec.validate()?;
    let grid = v.grid();
    let ranges: Vec<f64> = grid.ranges().iter().map(|r| r.as_f64()).collect();
    let (az, el) = (grid.azimuths_deg(), grid.elevations_deg());
    let polar = v.voxels().mapv(|x| x.as_f64());
    let [nx, ny, nz] = spec.dims;
    let flat: Vec<T> = (0..nx * ny * nz)
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx / (ny * nz), (idx / nz) % ny, idx % nz);
            let [x, y, z] = spec.position(i, j, k);
            let r = (x * x + y * y + z * z).sqrt();
            if r == 0.0 || z <= 0.0 {
                return T::zero();
            }
            let (a, b) = ((x / r).asin().to_degrees(), (y / r).asin().to_degrees());
            match (axis_position(&ranges, r), axis_position(az, a), axis_position(el, b)) {
                (Some(pr), Some(pa), Some(pb)) => T::lit(trilinear(&polar, [pr, pa, pb])),
                _ => T::zero(),
            }
        })
        .collect();
    Ok(CartesianVolume {
        spec: *spec,
        values: Array3::from_shape_vec((nx, ny, nz), flat).expect("dims match"),
    })
}

/// Scan-converts a segmentation mask as a 0/1 field.
pub fn scan_convert_mask<T: Real>(seg: &SegmentedVolume<T>, like: &BeamVolume<T>, spec: &CartesianSpec) -> Result<CartesianVolume<T>> {
    scan_convert(&seg.to_volume(like)?, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Xy, Plane::Xz, Plane::Yz];

    pub fn name(self) -> &'static str {
        match self {
            Plane::Xy => "XY",
            Plane::Xz => "XZ",
            Plane::Yz => "YZ",
        }
    }

    /// Cartesian axis index dropped by the projection.
    pub fn omitted_axis(self) -> usize {
        match self {
            Plane::Xy => 2,
            Plane::Xz => 1,
            Plane::Yz => 0,
        }
    }

    /// Polar axis dropped when projecting a `(range, azimuth, elevation)` volume.
    pub fn omitted_polar_axis(self) -> usize {
        match self {
            Plane::Xy => 0,
            Plane::Xz => 2,
            Plane::Yz => 1,
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "XY" => Ok(Plane::Xy),
            "XZ" => Ok(Plane::Xz),
            "YZ" => Ok(Plane::Yz),
            _ => Err(Error::InvalidArgument(format!("unknown plane {s:?}"))),
        }
    }
}

/// Maximum along one axis of a 3D array.
pub fn project_max_along<T: Real>(values: &Array3<T>, axis: usize) -> Array2<T> {
    values.fold_axis(Axis(axis), T::neg_infinity(), |m, &v| m.max(v))
}

pub fn project_max<T: Real>(v: &CartesianVolume<T>, plane: Plane) -> Array2<T> {
    project_max_along(&v.values, plane.omitted_axis())
}

/// Projection of a polar volume; `XY` drops range, `XZ` elevation, `YZ` azimuth.
pub fn project_max_polar<T: Real>(v: &BeamVolume<T>, plane: Plane) -> Array2<T> {
    project_max_along(v.voxels(), plane.omitted_polar_axis())
}

/// `20 log10(v / max)` clamped to `[-dr, 0]` and mapped linearly onto `0..=255`,
/// rounding half up.
pub fn to_db_image<T: Real>(img: &Array2<T>, dynamic_range_db: f64) -> Result<Array2<u8>> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dynamic range must be positive, got {dynamic_range_db}"
        )));
    }
    let peak = img.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    if peak == 0.0 {
        return Ok(Array2::zeros(img.raw_dim()));
    }
    Ok(img.mapv(|v| {
        let a = v.as_f64().abs();
        if a == 0.0 {
            return 0;
        }
        let db = (20.0 * (a / peak).log10()).clamp(-dynamic_range_db, 0.0);
        ((db + dynamic_range_db) / dynamic_range_db * 255.0 + 0.5).floor() as u8
    }))
}
