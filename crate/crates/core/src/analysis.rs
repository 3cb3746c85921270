//! Point-spread-function metrics, resolution formulas, resolvability and quadrant leakage.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::beamform::{das_volume, product_beamform, BeamVolume, BeamformOptions, Weights};
use crate::error::{Error, Result};
use crate::geometry::{build_array, ArrayGeometry, ArrayKind, ImagingGrid, Quadrant};
use crate::scalar::Real;
use crate::signal::{make_pulse, matched_filter, synth_channel_data, Scatterer, SynthParams, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CutAxis {
    Azimuth,
    Elevation,
}

/// Conventional full-array delay-and-sum or orthogonal-L product beamforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImagingMethod {
    Cm,
    Pm,
}

impl std::fmt::Display for ImagingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ImagingMethod::Cm => "CM",
            ImagingMethod::Pm => "PM",
        })
    }
}

/// Everything needed to simulate and reconstruct a noiseless point scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingSetup {
    pub kind: ArrayKind,
    pub method: ImagingMethod,
    pub m: usize,
    pub n: usize,
    pub spacing_m: f64,
    pub fc_hz: f64,
    pub cycles: f64,
    pub window: Window,
    pub fs_hz: f64,
    pub c_mps: f64,
    pub options: BeamformOptions,
}

impl ImagingSetup {
    /// 24 × 24 half-wavelength array at 500 kHz, 10 MHz sampling.
    pub fn desk(kind: ArrayKind, method: ImagingMethod) -> Self {
        Self {
            kind,
            method,
            m: 24,
            n: 24,
            spacing_m: 1500.0 / 500e3 / 2.0,
            fc_hz: 500e3,
            cycles: 3.0,
            window: Window::Hann,
            fs_hz: 10e6,
            c_mps: 1500.0,
            options: BeamformOptions::default(),
        }
    }

    /// Geometry the beamformer runs on. Product beamforming on a URA uses its perimeter.
    pub fn geometry<T: Real>(&self) -> Result<ArrayGeometry<T>> {
        let kind = match (self.method, self.kind) {
            (ImagingMethod::Cm, ArrayKind::Ura) => ArrayKind::Ura,
            (ImagingMethod::Cm, other) => {
                return Err(Error::InvalidGeometry(format!("conventional DAS needs a URA, got {other}")))
            }
            (ImagingMethod::Pm, ArrayKind::Ura) => ArrayKind::RectPerimeter,
            (ImagingMethod::Pm, other) => other,
        };
        build_array(kind, self.m, self.n, T::lit(self.spacing_m))
    }

    pub fn wavelength(&self) -> f64 {
        self.c_mps / self.fc_hz
    }
}

/// Simulates `points` on the setup's array, matched-filters and beamforms over `grid`.
pub fn reconstruct<T: Real>(setup: &ImagingSetup, points: &[Scatterer<T>], grid: &ImagingGrid<T>) -> Result<BeamVolume<T>> {
    let geom = setup.geometry::<T>()?;
    let pulse = make_pulse::<T>(setup.fc_hz, setup.cycles, setup.fs_hz, setup.window)?;
    let mut probe: Vec<Scatterer<T>> = points.to_vec();
    // Widen the record so every grid range is inside it.
    for &r in grid.ranges() {
        probe.push(Scatterer {
            range: r,
            azimuth: T::zero(),
            elevation: T::zero(),
            reflectivity: T::zero(),
        });
    }
    let mut params = SynthParams::covering(&geom, &probe, &pulse, setup.c_mps, setup.fs_hz);
    params.spreading_exponent = 0.0;
    let cd = synth_channel_data(&geom, points, &pulse, &params)?;
    let cd = matched_filter(&cd, &pulse)?;
    let w = Weights::uniform(geom.len());
    match setup.method {
        ImagingMethod::Cm => das_volume(&cd, &geom, grid, &w, &setup.options),
        ImagingMethod::Pm => product_beamform(&cd, &geom, grid, &w, &setup.options),
    }
}

/// Peak-normalised beam pattern along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPattern {
    pub axis: CutAxis,
    pub angles_deg: Vec<f64>,
    pub values_db: Vec<f64>,
}

impl BeamPattern {
    /// Pattern from linear magnitudes, normalised to a 0 dB peak.
    pub fn from_linear(axis: CutAxis, angles_deg: Vec<f64>, values: &[f64]) -> Result<Self> {
        if angles_deg.len() != values.len() || values.is_empty() {
            return Err(Error::InvalidArgument("angles and values differ in length".into()));
        }
        if !angles_deg.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("angles must be strictly increasing".into()));
        }
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return Err(Error::InvalidArgument("all-zero pattern".into()));
        }
        let values_db = values.iter().map(|v| 20.0 * (v.abs() / peak).max(1e-300).log10()).collect();
        Ok(Self {
            axis,
            angles_deg,
            values_db,
        })
    }

    fn peak_index(&self) -> usize {
        self.values_db
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
            .0
    }

    /// Indices `[lo, hi]` of the first local minima on each side of the peak.
    fn main_lobe(&self) -> (usize, usize) {
        let v = &self.values_db;
        let i = self.peak_index();
        let mut lo = i;
        while lo > 0 && v[lo - 1] < v[lo] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < v.len() && v[hi + 1] < v[hi] {
            hi += 1;
        }
        (lo, hi)
    }
}

/// Sweeps the setup's beamformer through `point` along `axis` at the point's range.
pub fn psf_cut<T: Real>(
    setup: &ImagingSetup,
    point: &Scatterer<T>,
    axis: CutAxis,
    span_deg: f64,
    step_deg: f64,
) -> Result<BeamPattern> {
    if !(step_deg > 0.0) || !(span_deg > 0.0) {
        return Err(Error::InvalidGrid("span and step must be positive".into()));
    }
    let count = (span_deg / step_deg).round() as usize + 1;
    let offsets: Vec<f64> = (0..count).map(|i| -span_deg / 2.0 + i as f64 * step_deg).collect();
    let (az0, el0) = (point.azimuth.as_f64().to_degrees(), point.elevation.as_f64().to_degrees());
    let (az, el) = match axis {
        CutAxis::Azimuth => (offsets.iter().map(|o| az0 + o).collect(), vec![el0]),
        CutAxis::Elevation => (vec![az0], offsets.iter().map(|o| el0 + o).collect()),
    };
    let grid = ImagingGrid::from_degrees(az, el, vec![point.range])?;
    let volume = reconstruct(setup, std::slice::from_ref(point), &grid)?;
    let values: Vec<f64> = volume.voxels().iter().map(|v| v.as_f64()).collect();
    let angles = match axis {
        CutAxis::Azimuth => grid.azimuths_deg().to_vec(),
        CutAxis::Elevation => grid.elevations_deg().to_vec(),
    };
    BeamPattern::from_linear(axis, angles, &values)
}

/// Width between the −3 dB crossings around the peak, interpolated linearly in dB.
pub fn mlw(bp: &BeamPattern) -> Result<f64> {
    let v = &bp.values_db;
    let a = &bp.angles_deg;
    let i = bp.peak_index();
    let level = v[i] - 3.0;
    let mut lo = i;
    while lo > 0 && v[lo] > level {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < v.len() && v[hi] > level {
        hi += 1;
    }
    if v[lo] > level || v[hi] > level {
        return Err(Error::SpanTooNarrow);
    }
    let cross = |inside: usize, outside: usize| {
        a[inside] + (level - v[inside]) / (v[outside] - v[inside]) * (a[outside] - a[inside])
    };
    Ok(cross(hi - 1, hi) - cross(lo + 1, lo))
}

/// Strongest level outside the main lobe, relative to the peak.
pub fn psll(bp: &BeamPattern) -> Result<f64> {
    let (lo, hi) = bp.main_lobe();
    let peak = bp.values_db[bp.peak_index()];
    bp.values_db[..lo]
        .iter()
        .chain(&bp.values_db[hi + 1..])
        .copied()
        .reduce(f64::max)
        .map(|s| s - peak)
        .ok_or(Error::NoSidelobe)
}

/// Side-lobe energy below the peak angle over that above it, dB.
pub fn sidelobe_asymmetry_db(bp: &BeamPattern) -> Result<f64> {
    let (lo, hi) = bp.main_lobe();
    let energy = |vals: &[f64]| vals.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>();
    let (left, right) = (energy(&bp.values_db[..lo]), energy(&bp.values_db[hi + 1..]));
    if left == 0.0 || right == 0.0 {
        return Err(Error::NoSidelobe);
    }
    Ok(10.0 * (left / right).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfMetrics {
    pub kind: ArrayKind,
    pub method: ImagingMethod,
    pub mlw_az_deg: f64,
    pub mlw_el_deg: f64,
    /// Worse of the azimuth and elevation cuts.
    pub psll_db: f64,
}

/// Azimuth and elevation cuts through `point` and their metrics.
pub fn psf_metrics<T: Real>(
    setup: &ImagingSetup,
    point: &Scatterer<T>,
    span_deg: f64,
    step_deg: f64,
) -> Result<(PsfMetrics, BeamPattern, BeamPattern)> {
    let az = psf_cut(setup, point, CutAxis::Azimuth, span_deg, step_deg)?;
    let el = psf_cut(setup, point, CutAxis::Elevation, span_deg, step_deg)?;
    let metrics = PsfMetrics {
        kind: setup.kind,
        method: setup.method,
        mlw_az_deg: mlw(&az)?,
        mlw_el_deg: mlw(&el)?,
        psll_db: psll(&az)?.max(psll(&el)?),
    };
    Ok((metrics, az, el))
}

/// The array/method rows of the published PSF comparison.
pub fn psf_table_setups() -> Vec<ImagingSetup> {
    vec![
        ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Cm),
        ImagingSetup::desk(ArrayKind::Elsa, ImagingMethod::Pm),
        ImagingSetup::desk(ArrayKind::Clsa, ImagingMethod::Pm),
        ImagingSetup::desk(ArrayKind::Csa, ImagingMethod::Pm),
        ImagingSetup::desk(ArrayKind::Dcsa, ImagingMethod::Pm),
    ]
}

/// PSF metrics for a broadside point at `range_m`, one row per setup.
pub fn psf_table(setups: &[ImagingSetup], range_m: f64, span_deg: f64, step_deg: f64) -> Result<Vec<PsfMetrics>> {
    let point = Scatterer::<f64>::from_degrees(range_m, 0.0, 0.0, 1.0);
    setups
        .iter()
        .map(|s| psf_metrics(s, &point, span_deg, step_deg).map(|r| r.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularResolution {
    /// `λ / D` in degrees.
    pub exact_deg: f64,
    /// `60 λ / D` rule of thumb.
    pub approx_deg: f64,
}

pub fn angular_resolution(wavelength_m: f64, aperture_m: f64) -> Result<AngularResolution> {
    if !(wavelength_m > 0.0) || !(aperture_m > 0.0) {
        return Err(Error::InvalidArgument("wavelength and aperture must be positive".into()));
    }
    let ratio = wavelength_m / aperture_m;
    Ok(AngularResolution {
        exact_deg: ratio.to_degrees(),
        approx_deg: 60.0 * ratio,
    })
}

/// Cross-range cell size `r θ` at range `r`.
pub fn along_track_resolution(range_m: f64, theta_deg: f64) -> Result<f64> {
    if !(range_m > 0.0) || !(theta_deg >= 0.0) {
        return Err(Error::InvalidArgument("range must be positive and angle non-negative".into()));
    }
    Ok(range_m * theta_deg.to_radians())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeResolution {
    /// `c / Δf`.
    pub as_printed_m: f64,
    /// `c / (2 Δf)`, the two-way form.
    pub two_way_m: f64,
}

pub fn range_resolution(c_mps: f64, bandwidth_hz: f64) -> Result<RangeResolution> {
    if !(c_mps > 0.0) || !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument("sound speed and bandwidth must be positive".into()));
    }
    Ok(RangeResolution {
        as_printed_m: c_mps / bandwidth_hz,
        two_way_m: c_mps / (2.0 * bandwidth_hz),
    })
}

fn nearest(values: &[f64], x: f64) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, &v)| if (v - x).abs() < a.1 { (i, (v - x).abs()) } else { a })
        .0
}

fn pitch(values: &[f64]) -> f64 {
    if values.len() < 2 {
        f64::INFINITY
    } else {
        (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64
    }
}

fn check_inside<T: Real>(grid: &ImagingGrid<T>, p: &Scatterer<T>) -> Result<()> {
    let (az, el) = (p.azimuth.as_f64().to_degrees(), p.elevation.as_f64().to_degrees());
    let ranges: Vec<f64> = grid.ranges().iter().map(|r| r.as_f64()).collect();
    let inside = |axis: &[f64], x: f64| {
        let half = if axis.len() > 1 { pitch(axis) / 2.0 } else { 1e-9 };
        x >= axis[0] - half && x <= axis[axis.len() - 1] + half
    };
    if !inside(grid.azimuths_deg(), az) || !inside(grid.elevations_deg(), el) || !inside(&ranges, p.range.as_f64()) {
        return Err(Error::InvalidArgument(format!(
            "point ({}, {az}°, {el}°) is outside the grid",
            p.range
        )));
    }
    Ok(())
}

/// Grid cell `(p, q)` nearest to a direction.
pub fn nearest_cell<T: Real>(grid: &ImagingGrid<T>, azimuth_deg: f64, elevation_deg: f64) -> (usize, usize) {
    (nearest(grid.azimuths_deg(), azimuth_deg), nearest(grid.elevations_deg(), elevation_deg))
}

/// Range-slice image at the points' ranges (max over the ranges they span).
fn slice_between<T: Real>(v: &BeamVolume<T>, r1: f64, r2: f64) -> Array2<f64> {
    let ranges: Vec<f64> = v.grid().ranges().iter().map(|r| r.as_f64()).collect();
    let (a, b) = (nearest(&ranges, r1), nearest(&ranges, r2));
    let (lo, hi) = (a.min(b), a.max(b));
    let mut img = v.slice(lo).mapv(|x| x.as_f64());
    for r in lo + 1..=hi {
        img.zip_mut_with(&v.slice(r), |m, &x| *m = m.max(x.as_f64()));
    }
    img
}

/// 8-connected components of `mask`; label 0 is background.
fn label_components(mask: &Array2<bool>) -> (Array2<usize>, usize) {
    let (h, w) = mask.dim();
    let mut labels = Array2::<usize>::zeros((h, w));
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..h * w {
        let (i, j) = (start / w, start % w);
        if !mask[[i, j]] || labels[[i, j]] != 0 {
            continue;
        }
        next += 1;
        labels[[i, j]] = next;
        stack.push((i, j));
        while let Some((ci, cj)) = stack.pop() {
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let (ni, nj) = (ci as isize + di, cj as isize + dj);
                    if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if mask[[ni, nj]] && labels[[ni, nj]] == 0 {
                        labels[[ni, nj]] = next;
                        stack.push((ni, nj));
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Lobes of a slice above `threshold_db` relative to its peak: `(label, peak cell)`.
fn lobes(img: &Array2<f64>, threshold_db: f64) -> Vec<(usize, (usize, usize))> {
    let peak = img.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak == 0.0 {
        return Vec::new();
    }
    let level = peak * 10f64.powf(threshold_db / 20.0);
    let (labels, count) = label_components(&img.mapv(|v| v >= level));
    let mut best = vec![(f64::NEG_INFINITY, (0, 0)); count + 1];
    for ((i, j), &l) in labels.indexed_iter() {
        if l != 0 && img[[i, j]] > best[l].0 {
            best[l] = (img[[i, j]], (i, j));
        }
    }
    (1..=count).map(|l| (l, best[l].1)).collect()
}

/// Whether the two points image as separate lobes.
///
/// Thresholds the slice at `threshold_db` below its peak; the points are
/// resolved when two different 8-connected lobes each peak within one grid
/// pitch of one of the true directions.
pub fn resolvable<T: Real>(v: &BeamVolume<T>, p1: &Scatterer<T>, p2: &Scatterer<T>, threshold_db: f64) -> Result<bool> {
    let grid = v.grid();
    check_inside(grid, p1)?;
    check_inside(grid, p2)?;
    let img = slice_between(v, p1.range.as_f64(), p2.range.as_f64());
    let found = lobes(&img, threshold_db);
    let (pa, pe) = (pitch(grid.azimuths_deg()), pitch(grid.elevations_deg()));
    let near = |cell: (usize, usize), p: &Scatterer<T>| {
        let da = (grid.azimuths_deg()[cell.0] - p.azimuth.as_f64().to_degrees()).abs();
        let de = (grid.elevations_deg()[cell.1] - p.elevation.as_f64().to_degrees()).abs();
        da <= pa * (1.0 + 1e-9) && de <= pe * (1.0 + 1e-9)
    };
    let c1: Vec<usize> = found.iter().filter(|(_, c)| near(*c, p1)).map(|(l, _)| *l).collect();
    let c2: Vec<usize> = found.iter().filter(|(_, c)| near(*c, p2)).map(|(l, _)| *l).collect();
    Ok(c1.iter().any(|a| c2.iter().any(|b| a != b)))
}

/// 8-neighbour strict local maxima of a slice above `threshold_db`.
pub fn local_maxima(img: &Array2<f64>, threshold_db: f64) -> Vec<(usize, usize)> {
    let peak = img.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak == 0.0 {
        return Vec::new();
    }
    let level = peak * 10f64.powf(threshold_db / 20.0);
    let (h, w) = img.dim();
    let mut out = Vec::new();
    for ((i, j), &v) in img.indexed_iter() {
        if v < level {
            continue;
        }
        let mut is_max = true;
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                    continue;
                }
                if img[[ni as usize, nj as usize]] >= v {
                    is_max = false;
                }
            }
        }
        if is_max {
            out.push((i, j));
        }
    }
    out
}

/// Summed intensity of the voxels strictly inside each open quadrant (I..IV).
pub fn quadrant_sums<T: Real>(v: &BeamVolume<T>) -> [f64; 4] {
    let grid = v.grid();
    let mut sums = [0.0; 4];
    for ((_, p, q), &x) in v.voxels().indexed_iter() {
        let (a, b) = (grid.azimuths()[p], grid.elevations()[q]);
        if let Some(k) = Quadrant::ALL.iter().position(|quad| quad.contains(a, b)) {
            sums[k] += x.as_f64();
        }
    }
    sums
}

/// Intensity outside quadrant `q` (axes excluded) over intensity inside it.
pub fn quadrant_leakage<T: Real>(v: &BeamVolume<T>, q: Quadrant) -> Result<f64> {
    let sums = quadrant_sums(v);
    let k = Quadrant::ALL.iter().position(|x| *x == q).expect("quadrant listed");
    let inside = sums[k];
    let outside: f64 = sums.iter().sum::<f64>() - inside;
    if !(inside > 0.0) {
        return Err(Error::UndefinedRatio(format!("no intensity inside quadrant {q:?}")));
    }
    Ok(outside / inside)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityRow {
    pub kind: ArrayKind,
    /// Strict local maxima above −6 dB of the slice peak.
    pub maxima_above_6db: usize,
    /// Stronger ghost voxel relative to the weaker true-point voxel, dB.
    pub ghost_level_db: f64,
    /// A −6 dB local maximum lies within one pitch of a cross-term position.
    pub ghosts_present: bool,
}

/// Images two points on each array kind and measures responses at the cross-term
/// directions `(α₁, β₂)` and `(α₂, β₁)`.
pub fn ambiguity_probe<T: Real>(
    base: &ImagingSetup,
    kinds: &[ArrayKind],
    p1: &Scatterer<T>,
    p2: &Scatterer<T>,
    grid: &ImagingGrid<T>,
) -> Result<Vec<AmbiguityRow>> {
    let deg = |x: T| x.as_f64().to_degrees();
    let truth = [(deg(p1.azimuth), deg(p1.elevation)), (deg(p2.azimuth), deg(p2.elevation))];
    let ghosts = [(truth[0].0, truth[1].1), (truth[1].0, truth[0].1)];
    kinds
        .iter()
        .map(|&kind| {
            let setup = ImagingSetup {
                kind,
                method: ImagingMethod::Pm,
                ..*base
            };
            let v = reconstruct(&setup, &[*p1, *p2], grid)?;
            let img = slice_between(&v, p1.range.as_f64(), p2.range.as_f64());
            let at = |(a, b): (f64, f64)| img[nearest_cell(grid, a, b)];
            let true_level = at(truth[0]).min(at(truth[1]));
            let ghost = ghosts
                .iter()
                .filter(|g| **g != truth[0] && **g != truth[1])
                .map(|&g| at(g))
                .fold(0.0f64, f64::max);
            let maxima = local_maxima(&img, -6.0);
            let (pa, pe) = (pitch(grid.azimuths_deg()), pitch(grid.elevations_deg()));
            let ghosts_present = ghosts.iter().filter(|g| **g != truth[0] && **g != truth[1]).any(|g| {
                maxima.iter().any(|&(i, j)| {
                    (grid.azimuths_deg()[i] - g.0).abs() <= pa * (1.0 + 1e-9)
                        && (grid.elevations_deg()[j] - g.1).abs() <= pe * (1.0 + 1e-9)
                })
            });
            Ok(AmbiguityRow {
                kind,
                maxima_above_6db: maxima.len(),
                ghost_level_db: if ghost > 0.0 && true_level > 0.0 {
                    20.0 * (ghost / true_level).log10()
                } else {
                    f64::NEG_INFINITY
                },
                ghosts_present,
            })
        })
        .collect()
}
