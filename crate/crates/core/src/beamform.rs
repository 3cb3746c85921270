//! Delay-and-sum, orthogonal-L product and frequency-domain beamformers.

use ndarray::{Array3, ArrayView2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    adjacent_quadrants, delay_farfield, delay_nearfield, ArrayGeometry, ArrayKind, Edge, ImagingGrid, SensorElement,
};
use crate::scalar::{signed_sqrt, Real};
use crate::signal::ChannelData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FocusMode {
    Nearfield,
    #[default]
    Farfield,
}

impl FocusMode {
    pub fn code(self) -> u8 {
        match self {
            FocusMode::Nearfield => 0,
            FocusMode::Farfield => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FocusMode::Nearfield),
            1 => Some(FocusMode::Farfield),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    DasUra,
    ProductElsa,
    DasLineH,
    DasLineV,
    Dm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::DasUra, Method::ProductElsa, Method::DasLineH, Method::DasLineV, Method::Dm];

    pub fn code(self) -> u8 {
        match self {
            Method::DasUra => 0,
            Method::ProductElsa => 1,
            Method::DasLineH => 2,
            Method::DasLineV => 3,
            Method::Dm => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

/// Shading coefficients, one per element of the geometry they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    values: Vec<T>,
}

impl<T: Real> Weights<T> {
    /// Rectangular shading.
    pub fn uniform(len: usize) -> Self {
        Self {
            values: vec![T::one(); len],
        }
    }

    pub fn from_vec(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, expected: usize) -> Result<()> {
        if self.values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{} weights supplied for {} elements",
                self.values.len(),
                expected
            )));
        }
        Ok(())
    }
}

/// Beam output as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSignal<T> {
    pub samples: Vec<T>,
    pub fs: T,
    pub t0: T,
}

impl<T: Real> BeamSignal<T> {
    /// Largest `|B|` within `±gate` samples of the two-way travel time to `r0`.
    pub fn sample_at_range(&self, r0: T, c: T, gate: usize) -> Result<T> {
        let center = center_sample(self.samples.len(), self.fs, self.t0, r0, c)?;
        let lo = center.saturating_sub(gate);
        let hi = (center + gate).min(self.samples.len() - 1);
        Ok(self.samples[lo..=hi].iter().fold(T::zero(), |m, v| m.max(v.abs())))
    }
}

/// Free-function form of [`BeamSignal::sample_at_range`].
pub fn sample_at_range<T: Real>(bs: &BeamSignal<T>, r0: T, c: T, gate: usize) -> Result<T> {
    bs.sample_at_range(r0, c, gate)
}

fn center_sample<T: Real>(n: usize, fs: T, t0: T, r0: T, c: T) -> Result<usize> {
    let (fs, t0) = (fs.as_f64(), t0.as_f64());
    let t = 2.0 * r0.as_f64() / c.as_f64();
    let end = t0 + n as f64 / fs;
    if n == 0 || !(t >= t0) || !(t <= end) {
        return Err(Error::OutOfRecord {
            range_m: r0.as_f64(),
            time_s: t,
            start_s: t0,
            end_s: end,
        });
    }
    Ok((((t - t0) * fs).round() as usize).min(n - 1))
}

/// Signed-square-root product of a horizontal and a vertical beam, scaled by `scale`.
pub fn product_signal<T: Real>(bh: &BeamSignal<T>, bv: &BeamSignal<T>, scale: T) -> Result<BeamSignal<T>> {
    if bh.samples.len() != bv.samples.len() || bh.fs != bv.fs || bh.t0 != bv.t0 {
        return Err(Error::InvalidArgument("beam signals differ in sampling".into()));
    }
    Ok(BeamSignal {
        samples: bh
            .samples
            .iter()
            .zip(&bv.samples)
            .map(|(&h, &v)| signed_sqrt(h * v) * scale)
            .collect(),
        fs: bh.fs,
        t0: bh.t0,
    })
}

/// Reconstruction over an imaging grid; voxels indexed `(range, azimuth p, elevation q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVolume<T> {
    grid: ImagingGrid<T>,
    method: Method,
    focus_mode: FocusMode,
    voxels: Array3<T>,
}

impl<T: Real> BeamVolume<T> {
    pub fn new(grid: ImagingGrid<T>, method: Method, focus_mode: FocusMode, voxels: Array3<T>) -> Result<Self> {
        let shape = (grid.ranges().len(), grid.mb(), grid.nb());
        if voxels.dim() != shape {
            return Err(Error::InvalidArgument(format!(
                "voxel array {:?} does not match grid {:?}",
                voxels.dim(),
                shape
            )));
        }
        if voxels.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::InvalidArgument("voxel intensities must be non-negative".into()));
        }
        Ok(Self {
            grid,
            method,
            focus_mode,
            voxels,
        })
    }

    pub fn grid(&self) -> &ImagingGrid<T> {
        &self.grid
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn focus_mode(&self) -> FocusMode {
        self.focus_mode
    }

    pub fn voxels(&self) -> &Array3<T> {
        &self.voxels
    }

    pub fn get(&self, r: usize, p: usize, q: usize) -> T {
        self.voxels[[r, p, q]]
    }

    /// `(Mb, Nb)` slice at range index `r`.
    pub fn slice(&self, r: usize) -> ArrayView2<'_, T> {
        self.voxels.index_axis(Axis(0), r)
    }

    /// Index of the largest voxel; ties resolve to the first in storage order.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = ((0, 0, 0), T::neg_infinity());
        for (idx, &v) in self.voxels.indexed_iter() {
            if v > best.1 {
                best = (idx, v);
            }
        }
        best.0
    }

    pub fn peak(&self) -> T {
        self.voxels.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn cast<U: Real>(&self) -> BeamVolume<U> {
        BeamVolume {
            grid: self.grid.cast(),
            method: self.method,
            focus_mode: self.focus_mode,
            voxels: self.voxels.mapv(|v| U::lit(v.as_f64())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformOptions {
    pub focus: FocusMode,
    /// Half-width of the range gate around `2 r0 / c`, samples.
    pub gate: usize,
}

impl Default for BeamformOptions {
    fn default() -> Self {
        Self {
            focus: FocusMode::Farfield,
            gate: 0,
        }
    }
}

/// Channel index in `cd` for every element of `geom`, matched by position.
fn channel_map<T: Real>(cd: &ChannelData<T>, geom: &ArrayGeometry<T>) -> Result<Vec<usize>> {
    elements_to_channels(cd, geom.elements())
}

fn elements_to_channels<T: Real>(cd: &ChannelData<T>, elements: &[SensorElement<T>]) -> Result<Vec<usize>> {
    let recorded = cd.geometry().elements();
    let tol = cd.geometry().spacing().as_f64().abs() * 1e-6 + 1e-12;
    elements
        .iter()
        .map(|e| {
            recorded
                .iter()
                .position(|r| (r.x.as_f64() - e.x.as_f64()).abs() <= tol && (r.y.as_f64() - e.y.as_f64()).abs() <= tol)
                .ok_or_else(|| {
                    Error::InvalidGeometry(format!(
                        "element ({}, {}) at ({}, {}) m has no recorded channel",
                        e.index_m, e.index_n, e.x, e.y
                    ))
                })
        })
        .collect()
}

fn delay_seconds<T: Real>(e: &SensorElement<T>, r0: T, alpha: T, beta: T, c: T, focus: FocusMode) -> Result<f64> {
    let e = SensorElement {
        index_m: e.index_m,
        index_n: e.index_n,
        x: e.x.as_f64(),
        y: e.y.as_f64(),
    };
    let (r0, a, b, c) = (r0.as_f64(), alpha.as_f64(), beta.as_f64(), c.as_f64());
    match focus {
        FocusMode::Farfield => delay_farfield(&e, a, b, c),
        FocusMode::Nearfield => delay_nearfield(&e, r0, a, b, c),
    }
}

/// Fractional-delay tap for one channel: `S(k - d)` by linear interpolation.
#[derive(Debug, Clone, Copy)]
struct Tap<T> {
    channel: usize,
    whole: isize,
    frac: T,
    weight: T,
}

impl<T: Real> Tap<T> {
    fn new(channel: usize, delay_samples: f64, weight: T) -> Self {
        let whole = delay_samples.floor();
        Self {
            channel,
            whole: whole as isize,
            frac: T::lit(delay_samples - whole),
            weight,
        }
    }

    /// Weighted channel value at output sample `k`; out-of-record reads are zero.
    #[inline]
    fn at(&self, cd: &ChannelData<T>, k: isize) -> T {
        let x = cd.channel(self.channel);
        let n = x.len() as isize;
        // S(k - whole - frac) lies between samples i - 1 and i.
        let i = k - self.whole;
        let f = self.frac;
        if f == T::zero() {
            return if (0..n).contains(&i) { self.weight * x[i as usize] } else { T::zero() };
        }
        if i < 1 || i >= n {
            return T::zero();
        }
        let (hi, lo) = (x[i as usize], x[(i - 1) as usize]);
        self.weight * (hi + (lo - hi) * f)
    }
}

fn taps_for<T: Real>(
    cd: &ChannelData<T>,
    elements: &[SensorElement<T>],
    channels: &[usize],
    weights: &[T],
    r0: T,
    alpha: T,
    beta: T,
    focus: FocusMode,
) -> Result<Vec<Tap<T>>> {
    let fs = cd.fs().as_f64();
    elements
        .iter()
        .zip(channels)
        .zip(weights)
        .map(|((e, &ch), &w)| Ok(Tap::new(ch, delay_seconds(e, r0, alpha, beta, cd.c(), focus)? * fs, w)))
        .collect()
}

#[inline]
fn beam_at<T: Real>(cd: &ChannelData<T>, taps: &[Tap<T>], k: isize) -> T {
    taps.iter().map(|t| t.at(cd, k)).sum()
}

/// Time-domain delay-and-sum over an element subset of the recorded geometry.
///
/// `B(t) = Σ w_i S_i(t - τ_i)` with linear interpolation for fractional delays.
pub fn das_beam<T: Real>(
    cd: &ChannelData<T>,
    subset: &[SensorElement<T>],
    w: &Weights<T>,
    r0: T,
    alpha: T,
    beta: T,
    focus: FocusMode,
) -> Result<BeamSignal<T>> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty element subset".into()));
    }
    w.check(subset.len())?;
    if focus == FocusMode::Nearfield && !(r0 > T::zero()) {
        return Err(Error::InvalidArgument("near-field focusing needs a positive range".into()));
    }
    let channels = elements_to_channels(cd, subset)?;
    let taps = taps_for(cd, subset, &channels, w.values(), r0, alpha, beta, focus)?;
    let samples = (0..cd.num_samples() as isize)
        .into_par_iter()
        .map(|k| beam_at(cd, &taps, k))
        .collect();
    Ok(BeamSignal {
        samples,
        fs: cd.fs(),
        t0: cd.t0(),
    })
}

/// Gate window `[lo, hi]` around the centre sample of `r0`.
fn gate_window<T: Real>(cd: &ChannelData<T>, r0: T, gate: usize) -> Result<(isize, isize)> {
    let center = center_sample(cd.num_samples(), cd.fs(), cd.t0(), r0, cd.c())?;
    let lo = center.saturating_sub(gate) as isize;
    let hi = (center + gate).min(cd.num_samples() - 1) as isize;
    Ok((lo, hi))
}

fn check_ranges<T: Real>(cd: &ChannelData<T>, grid: &ImagingGrid<T>) -> Result<()> {
    for &r in grid.ranges() {
        center_sample(cd.num_samples(), cd.fs(), cd.t0(), r, cd.c())?;
    }
    Ok(())
}

/// Evaluates `f(range index, p, q)` over the whole grid in parallel.
fn fill_volume<T: Real>(
    grid: &ImagingGrid<T>,
    f: impl Fn(usize, usize, usize) -> Result<T> + Sync,
) -> Result<Array3<T>> {
    let (nr, mb, nb) = (grid.ranges().len(), grid.mb(), grid.nb());
    let flat: Vec<T> = (0..nr * mb * nb)
        .into_par_iter()
        .map(|i| f(i / (mb * nb), (i / nb) % mb, i % nb))
        .collect::<Result<_>>()?;
    Ok(Array3::from_shape_vec((nr, mb, nb), flat).expect("shape matches grid"))
}

/// Conventional 2D delay-and-sum over a full URA, scaled by `1/(M N)`.
pub fn das_volume<T: Real>(
    cd: &ChannelData<T>,
    geom: &ArrayGeometry<T>,
    grid: &ImagingGrid<T>,
    w: &Weights<T>,
    opts: &BeamformOptions,
) -> Result<BeamVolume<T>> {
    if geom.kind() != ArrayKind::Ura {
        return Err(Error::InvalidGeometry(format!("conventional DAS needs a URA, got {}", geom.kind())));
    }
    w.check(geom.len())?;
    check_ranges(cd, grid)?;
    let channels = channel_map(cd, geom)?;
    let scale = T::one() / T::lit((geom.m() * geom.n()) as f64);
    let voxels = fill_volume(grid, |r, p, q| {
        let r0 = grid.ranges()[r];
        let taps = taps_for(
            cd,
            geom.elements(),
            &channels,
            w.values(),
            r0,
            grid.azimuths()[p],
            grid.elevations()[q],
            opts.focus,
        )?;
        let (lo, hi) = gate_window(cd, r0, opts.gate)?;
        Ok((lo..=hi).fold(T::zero(), |m, k| m.max(beam_at(cd, &taps, k).abs())) * scale)
    })?;
    BeamVolume::new(grid.clone(), Method::DasUra, opts.focus, voxels)
}

/// Delay-and-sum over one line array of `geom` only, scaled by `1/len`.
pub fn line_volume<T: Real>(
    cd: &ChannelData<T>,
    geom: &ArrayGeometry<T>,
    edge: Edge,
    grid: &ImagingGrid<T>,
    w: &Weights<T>,
    opts: &BeamformOptions,
) -> Result<BeamVolume<T>> {
    w.check(geom.len())?;
    check_ranges(cd, grid)?;
    let members = geom
        .subarray(edge)
        .ok_or_else(|| Error::InvalidGeometry(format!("{} geometry has no {edge:?} line", geom.kind())))?;
    let elements: Vec<SensorElement<T>> = members.iter().map(|&i| geom.elements()[i]).collect();
    let weights: Vec<T> = members.iter().map(|&i| w.values()[i]).collect();
    let channels = elements_to_channels(cd, &elements)?;
    let scale = T::one() / T::lit(members.len() as f64);
    let voxels = fill_volume(grid, |r, p, q| {
        let r0 = grid.ranges()[r];
        let taps = taps_for(cd, &elements, &channels, &weights, r0, grid.azimuths()[p], grid.elevations()[q], opts.focus)?;
        let (lo, hi) = gate_window(cd, r0, opts.gate)?;
        Ok((lo..=hi).fold(T::zero(), |m, k| m.max(beam_at(cd, &taps, k).abs())) * scale)
    })?;
    let method = if edge.is_horizontal() { Method::DasLineH } else { Method::DasLineV };
    BeamVolume::new(grid.clone(), method, opts.focus, voxels)
}

struct LinePair<T> {
    horizontal: (Vec<SensorElement<T>>, Vec<usize>, Vec<T>),
    vertical: (Vec<SensorElement<T>>, Vec<usize>, Vec<T>),
}

/// Orthogonal-L product beamforming.
///
/// Each voxel multiplies the horizontal and vertical line beams of the L-pair
/// facing its quadrant, takes the signed square root and scales by `1/(M N)`.
/// Voxels on an axis average the two adjacent pairs, the centre averages all four.
pub fn product_beamform<T: Real>(
    cd: &ChannelData<T>,
    geom: &ArrayGeometry<T>,
    grid: &ImagingGrid<T>,
    w: &Weights<T>,
    opts: &BeamformOptions,
) -> Result<BeamVolume<T>> {
    w.check(geom.len())?;
    check_ranges(cd, grid)?;
    let mut pairs: Vec<LinePair<T>> = Vec::new();
    let mut pair_of_quadrant = [0usize; 4];
    let mut seen: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for (qi, q) in crate::geometry::Quadrant::ALL.iter().enumerate() {
        let pair = geom.orthogonal_pair(*q)?;
        let key = (pair.horizontal.to_vec(), pair.vertical.to_vec());
        if let Some(existing) = seen.iter().position(|s| *s == key) {
            pair_of_quadrant[qi] = existing;
            continue;
        }
        let line = |members: &[usize]| -> Result<(Vec<SensorElement<T>>, Vec<usize>, Vec<T>)> {
            let els: Vec<SensorElement<T>> = members.iter().map(|&i| geom.elements()[i]).collect();
            let ch = elements_to_channels(cd, &els)?;
            let ws = members.iter().map(|&i| w.values()[i]).collect();
            Ok((els, ch, ws))
        };
        pairs.push(LinePair {
            horizontal: line(pair.horizontal)?,
            vertical: line(pair.vertical)?,
        });
        pair_of_quadrant[qi] = seen.len();
        seen.push(key);
    }
    let scale = T::one() / T::lit((geom.m() * geom.n()) as f64);
    let voxels = fill_volume(grid, |r, p, q| {
        let (r0, a, b) = (grid.ranges()[r], grid.azimuths()[p], grid.elevations()[q]);
        let (lo, hi) = gate_window(cd, r0, opts.gate)?;
        let mut used: Vec<usize> = adjacent_quadrants(a, b)
            .into_iter()
            .map(|quad| pair_of_quadrant[crate::geometry::Quadrant::ALL.iter().position(|x| *x == quad).unwrap()])
            .collect();
        let count = T::lit(used.len() as f64);
        // Quadrants sharing one L-pair give identical values; evaluate each once.
        used.sort_unstable();
        let mut total = T::zero();
        let mut i = 0;
        while i < used.len() {
            let id = used[i];
            let mult = used[i..].iter().take_while(|&&u| u == id).count();
            let pair = &pairs[id];
            let (he, hc, hw) = &pair.horizontal;
            let (ve, vc, vw) = &pair.vertical;
            let th = taps_for(cd, he, hc, hw, r0, a, b, opts.focus)?;
            let tv = taps_for(cd, ve, vc, vw, r0, a, b, opts.focus)?;
            let v = (lo..=hi).fold(T::zero(), |m, k| {
                m.max(signed_sqrt(beam_at(cd, &th, k) * beam_at(cd, &tv, k)).abs())
            });
            total += v * T::lit(mult as f64);
            i += mult;
        }
        Ok(total / count * scale)
    })?;
    BeamVolume::new(grid.clone(), Method::ProductElsa, opts.focus, voxels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmParams {
    /// Block length `L`, a power of two.
    pub block_len: usize,
    /// Fraction of each block shared with its neighbour, `[0, 1)`.
    pub overlap: f64,
}

impl Default for DmParams {
    fn default() -> Self {
        Self {
            block_len: 1024,
            overlap: 0.5,
        }
    }
}

/// Block partition of a record for overlap-discard processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Blocks {
    len: usize,
    hop: usize,
    discard: usize,
    count: usize,
}

impl Blocks {
    fn new(params: &DmParams, n: usize) -> Result<Self> {
        let l = params.block_len;
        if l < 2 || !l.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("block length {l} is not a power of two >= 2")));
        }
        if !(0.0..1.0).contains(&params.overlap) {
            return Err(Error::InvalidArgument(format!("overlap {} outside [0, 1)", params.overlap)));
        }
        let hop = ((l as f64 * (1.0 - params.overlap)).round() as usize).clamp(1, l);
        let discard = (l - hop) / 2;
        let count = if n <= l { 1 } else { (n - l).div_ceil(hop) + 1 };
        Ok(Self { len: l, hop, discard, count })
    }

    fn start(&self, b: usize) -> isize {
        (b * self.hop) as isize
    }

    /// Output samples `[lo, hi)` kept from block `b`.
    fn kept(&self, b: usize, n: usize) -> (usize, usize) {
        let s = b * self.hop;
        let lo = if b == 0 { 0 } else { s + self.discard };
        let hi = if b + 1 == self.count { n } else { s + self.discard + self.hop };
        (lo.min(n), hi.min(n))
    }

    fn block_of(&self, k: usize, n: usize) -> usize {
        (0..self.count)
            .find(|&b| {
                let (lo, hi) = self.kept(b, n);
                (lo..hi).contains(&k)
            })
            .unwrap_or(self.count - 1)
    }
}

/// Half spectra of every channel for one block.
fn block_spectra<T: Real>(cd: &ChannelData<T>, blocks: &Blocks, b: usize) -> Vec<Vec<Complex<T>>> {
    let l = blocks.len;
    let fft = FftPlanner::<T>::new().plan_fft_forward(l);
    let start = blocks.start(b);
    (0..cd.num_channels())
        .into_par_iter()
        .map(|ch| {
            let x = cd.channel(ch);
            let mut buf: Vec<Complex<T>> = (0..l as isize)
                .map(|j| {
                    let k = start + j;
                    let v = if (0..x.len() as isize).contains(&k) { x[k as usize] } else { T::zero() };
                    Complex::new(v, T::zero())
                })
                .collect();
            fft.process(&mut buf);
            buf.truncate(l / 2 + 1);
            buf
        })
        .collect()
}

/// Steered block output from half spectra; returns `L` real time samples.
fn steer_block<T: Real>(
    spectra: &[Vec<Complex<T>>],
    channels: &[usize],
    delays_s: &[f64],
    weights: &[T],
    fs: f64,
    ifft: &dyn rustfft::Fft<T>,
) -> Vec<T> {
    let l = (spectra[0].len() - 1) * 2;
    let half = l / 2;
    let mut acc = vec![Complex::new(0.0f64, 0.0); half + 1];
    for ((&ch, &tau), &w) in channels.iter().zip(delays_s).zip(weights) {
        let w = w.as_f64();
        let step = -std::f64::consts::TAU * tau * fs / l as f64;
        let rot = Complex::new(step.cos(), step.sin());
        let mut ph = Complex::new(w, 0.0);
        for (a, x) in acc.iter_mut().zip(&spectra[ch]) {
            *a += Complex::new(x.re.as_f64(), x.im.as_f64()) * ph;
            ph *= rot;
        }
    }
    let mut full: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); l];
    for k in 0..=half {
        let v = if k == half { Complex::new(acc[k].re, 0.0) } else { acc[k] };
        full[k] = Complex::new(T::lit(v.re), T::lit(v.im));
        if k != 0 && k != half {
            full[l - k] = Complex::new(T::lit(v.re), T::lit(-v.im));
        }
    }
    ifft.process(&mut full);
    let norm = T::lit(1.0 / l as f64);
    full.iter().map(|c| c.re * norm).collect()
}

/// Frequency-domain delay-and-sum beam over a full record, reassembled by overlap-discard.
pub fn dm_beam<T: Real>(
    cd: &ChannelData<T>,
    subset: &[SensorElement<T>],
    w: &Weights<T>,
    r0: T,
    alpha: T,
    beta: T,
    focus: FocusMode,
    params: &DmParams,
) -> Result<BeamSignal<T>> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty element subset".into()));
    }
    w.check(subset.len())?;
    let n = cd.num_samples();
    let blocks = Blocks::new(params, n)?;
    let channels = elements_to_channels(cd, subset)?;
    let delays: Vec<f64> = subset
        .iter()
        .map(|e| delay_seconds(e, r0, alpha, beta, cd.c(), focus))
        .collect::<Result<_>>()?;
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(blocks.len);
    let mut samples = vec![T::zero(); n];
    for b in 0..blocks.count {
        let spectra = block_spectra(cd, &blocks, b);
        let out = steer_block(&spectra, &channels, &delays, w.values(), cd.fs().as_f64(), ifft.as_ref());
        let (lo, hi) = blocks.kept(b, n);
        let s = b * blocks.hop;
        samples[lo..hi].copy_from_slice(&out[lo - s..hi - s]);
    }
    Ok(BeamSignal {
        samples,
        fs: cd.fs(),
        t0: cd.t0(),
    })
}

/// Frequency-domain direct-method volume over a full URA, scaled by `1/(M N)`.
///
/// Only the blocks holding the gated samples of the grid ranges are transformed.
pub fn dm_volume<T: Real>(
    cd: &ChannelData<T>,
    geom: &ArrayGeometry<T>,
    grid: &ImagingGrid<T>,
    w: &Weights<T>,
    params: &DmParams,
    opts: &BeamformOptions,
) -> Result<BeamVolume<T>> {
    w.check(geom.len())?;
    check_ranges(cd, grid)?;
    let n = cd.num_samples();
    let blocks = Blocks::new(params, n)?;
    let channels = channel_map(cd, geom)?;
    let scale = T::one() / T::lit((geom.m() * geom.n()) as f64);
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(blocks.len);
    let fs = cd.fs().as_f64();
    let (mb, nb) = (grid.mb(), grid.nb());
    let mut voxels = Array3::<T>::zeros((grid.ranges().len(), mb, nb));
    for (ri, &r0) in grid.ranges().iter().enumerate() {
        let (lo, hi) = gate_window(cd, r0, opts.gate)?;
        let mut needed: Vec<usize> = (lo..=hi).map(|k| blocks.block_of(k as usize, n)).collect();
        needed.dedup();
        let spectra: Vec<(usize, Vec<Vec<Complex<T>>>)> =
            needed.iter().map(|&b| (b, block_spectra(cd, &blocks, b))).collect();
        let slice: Vec<T> = (0..mb * nb)
            .into_par_iter()
            .map(|i| {
                let (a, b) = (grid.azimuths()[i / nb], grid.elevations()[i % nb]);
                let delays: Vec<f64> = geom
                    .elements()
                    .iter()
                    .map(|e| delay_seconds(e, r0, a, b, cd.c(), opts.focus))
                    .collect::<Result<_>>()?;
                let mut best = T::zero();
                for (blk, spec) in &spectra {
                    let out = steer_block(spec, &channels, &delays, w.values(), fs, ifft.as_ref());
                    let s = blk * blocks.hop;
                    for k in lo..=hi {
                        if blocks.block_of(k as usize, n) == *blk {
                            best = best.max(out[k as usize - s].abs());
                        }
                    }
                }
                Ok(best * scale)
            })
            .collect::<Result<_>>()?;
        for (i, v) in slice.into_iter().enumerate() {
            voxels[[ri, i / nb, i % nb]] = v;
        }
    }
    BeamVolume::new(grid.clone(), Method::Dm, opts.focus, voxels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_array, build_imaging_grid, ArrayKind};
    use crate::signal::{make_pulse, matched_filter, synth_channel_data, Pulse, Scatterer, SynthParams, Window};
    use proptest::prelude::*;

    const C: f64 = 1500.0;
    const FS: f64 = 10e6;

    fn pulse() -> Pulse<f64> {
        make_pulse(500e3, 3.0, FS, Window::Hann).unwrap()
    }

    fn record(geom: &ArrayGeometry<f64>, pts: &[Scatterer<f64>]) -> ChannelData<f64> {
        let p = pulse();
        let params = SynthParams::covering(geom, pts, &p, C, FS);
        let cd = synth_channel_data(geom, pts, &p, &params).unwrap();
        matched_filter(&cd, &p).unwrap()
    }

    fn peak(x: &[f64]) -> f64 {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn coherent_sum_at_broadside() {
        let g = build_array(ArrayKind::Ura, 3, 3, 0.0015).unwrap();
        let data: Vec<f64> = (0..9).flat_map(|_| (0..50).map(|k| (k as f64 * 0.3).sin())).collect();
        let cd = ChannelData::new(g.clone(), FS, 0.0, C, 50, data).unwrap();
        let bs = das_beam(&cd, g.elements(), &Weights::uniform(9), 1.0, 0.0, 0.0, FocusMode::Farfield).unwrap();
        for (k, v) in bs.samples.iter().enumerate() {
            assert!((v - 9.0 * (k as f64 * 0.3).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn das_beam_argument_errors() {
        let g = build_array(ArrayKind::Ura, 2, 2, 0.0015).unwrap();
        let cd = ChannelData::zeros(g.clone(), FS, 0.0, C, 10).unwrap();
        assert!(matches!(
            das_beam(&cd, &[], &Weights::uniform(0), 1.0, 0.0, 0.0, FocusMode::Farfield),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            das_beam(&cd, g.elements(), &Weights::uniform(3), 1.0, 0.0, 0.0, FocusMode::Farfield),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn matched_steering_is_coherent() {
        let g = build_array(ArrayKind::Ura, 24, 24, 0.0015).unwrap();
        let s = Scatterer::from_degrees(30.0, 10.0, 5.0, 1.0);
        let cd = record(&g, &[s]);
        let single = peak(cd.channel(0));
        let bs = das_beam(&cd, g.elements(), &Weights::uniform(576), s.range, s.azimuth, s.elevation, FocusMode::Farfield)
            .unwrap();
        assert!(peak(&bs.samples) >= 0.95 * 576.0 * single);
    }

    #[test]
    fn steering_far_off_target_is_incoherent() {
        let g = build_array(ArrayKind::Ura, 24, 2, 0.0015).unwrap();
        let s = Scatterer::from_degrees(30.0, 0.0, 0.0, 1.0);
        let cd = record(&g, &[s]);
        let single = peak(cd.channel(0));
        let row: Vec<_> = g.elements().iter().filter(|e| e.index_n == 1).copied().collect();
        let bs = das_beam(&cd, &row, &Weights::uniform(24), 30.0, 89.0f64.to_radians(), 0.0, FocusMode::Farfield)
            .unwrap();
        assert!(peak(&bs.samples) <= 0.2 * 24.0 * single, "{}", peak(&bs.samples) / single);
    }

    #[test]
    fn sample_at_range_gate() {
        let mut samples = vec![0.0; 100];
        samples[40] = -2.0;
        samples[42] = 1.0;
        let bs = BeamSignal { samples, fs: 1.0, t0: 0.0 };
        assert_eq!(bs.sample_at_range(40.0, 2.0, 0).unwrap(), 2.0);
        assert_eq!(bs.sample_at_range(42.0, 2.0, 0).unwrap(), 1.0);
        assert_eq!(bs.sample_at_range(41.0, 2.0, 1).unwrap(), 2.0);
        assert_eq!(bs.sample_at_range(44.0, 2.0, 4).unwrap(), 2.0);
        assert!(matches!(bs.sample_at_range(120.0, 2.0, 0), Err(Error::OutOfRecord { .. })));
    }

    #[test]
    fn product_of_equal_beams_is_magnitude() {
        let bh = BeamSignal {
            samples: vec![-3.0f64, 0.0, 2.0, 5.5],
            fs: 1.0,
            t0: 0.0,
        };
        let out = product_signal(&bh, &bh, 1.0 / 12.0).unwrap();
        for (o, h) in out.samples.iter().zip(&bh.samples) {
            assert!((o - h.abs() / 12.0).abs() < 1e-15);
        }
    }

    fn small_grid(ranges: Vec<f64>) -> ImagingGrid<f64> {
        ImagingGrid::from_degrees(
            (-4..=4).map(|i| i as f64 * 2.5).collect(),
            (-4..=4).map(|i| i as f64 * 2.5).collect(),
            ranges,
        )
        .unwrap()
    }

    #[test]
    fn das_volume_peaks_at_broadside() {
        let g = build_array(ArrayKind::Ura, 12, 12, 0.0015).unwrap();
        let cd = record(&g, &[Scatterer::from_degrees(30.0, 0.0, 0.0, 1.0)]);
        let grid = small_grid(vec![29.99, 30.0, 30.01]);
        let v = das_volume(&cd, &g, &grid, &Weights::uniform(g.len()), &BeamformOptions::default()).unwrap();
        assert_eq!(v.argmax(), (1, 4, 4));
        assert_eq!(v.voxels().len(), grid.voxel_count());
    }

    #[test]
    fn das_volume_requires_ura() {
        let g = build_array(ArrayKind::Elsa, 4, 4, 0.0015).unwrap();
        let cd = ChannelData::zeros(g.clone(), FS, 0.0, C, 10).unwrap();
        let grid = small_grid(vec![1e-4]);
        assert!(matches!(
            das_volume(&cd, &g, &grid, &Weights::uniform(g.len()), &BeamformOptions::default()),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn voxels_match_beam_signal_extraction() {
        let g = build_array(ArrayKind::Ura, 6, 6, 0.0015).unwrap();
        let cd = record(&g, &[Scatterer::from_degrees(10.0, 5.0, -5.0, 1.0)]);
        let grid = small_grid(vec![10.0]);
        let opts = BeamformOptions { focus: FocusMode::Farfield, gate: 3 };
        let v = das_volume(&cd, &g, &grid, &Weights::uniform(36), &opts).unwrap();
        for (p, q) in [(6, 2), (0, 0), (4, 4)] {
            let bs = das_beam(&cd, g.elements(), &Weights::uniform(36), 10.0, grid.azimuths()[p], grid.elevations()[q], opts.focus)
                .unwrap();
            let expected = bs.sample_at_range(10.0, C, 3).unwrap() / 36.0;
            assert!((v.get(0, p, q) - expected).abs() <= 1e-12 * (1.0 + expected));
        }
    }

    #[test]
    fn product_peak_in_point_quadrant() {
        let ura = build_array(ArrayKind::Ura, 24, 24, 0.0015).unwrap();
        let rect = build_array(ArrayKind::RectPerimeter, 24, 24, 0.0015).unwrap();
        let cd = record(&ura, &[Scatterer::from_degrees(30.0, 5.0, 5.0, 1.0)]);
        let grid = small_grid(vec![30.0]);
        let v = product_beamform(&cd, &rect, &grid, &Weights::uniform(rect.len()), &BeamformOptions::default()).unwrap();
        assert_eq!(v.argmax(), (0, 6, 6));
        assert_eq!(v.method(), Method::ProductElsa);
    }

    #[test]
    fn product_peak_is_geometric_mean_of_line_peaks() {
        let g = build_array(ArrayKind::Elsa, 24, 24, 0.0015).unwrap();
        let s = Scatterer::from_degrees(30.0, 5.0, 5.0, 1.0);
        let cd = record(&g, &[s]);
        let pair = g.orthogonal_pair(crate::geometry::Quadrant::I).unwrap();
        let line = |m: &[usize]| {
            let els: Vec<_> = m.iter().map(|&i| g.elements()[i]).collect();
            das_beam(&cd, &els, &Weights::uniform(els.len()), s.range, s.azimuth, s.elevation, FocusMode::Farfield).unwrap()
        };
        let (bh, bv) = (line(pair.horizontal), line(pair.vertical));
        let pm = product_signal(&bh, &bv, 1.0).unwrap();
        let k = pm
            .samples
            .iter()
            .enumerate()
            .fold((0, 0.0), |a, (i, &v)| if v.abs() > a.1 { (i, v.abs()) } else { a })
            .0;
        assert!(pm.samples[k] >= 0.0);
        let gm = (peak(&bh.samples) * peak(&bv.samples)).sqrt();
        assert!((pm.samples[k] - gm).abs() <= 0.1 * gm);
    }

    #[test]
    fn axis_voxels_average_adjacent_pairs() {
        let ura = build_array(ArrayKind::Ura, 8, 8, 0.0015).unwrap();
        let rect = build_array(ArrayKind::RectPerimeter, 8, 8, 0.0015).unwrap();
        let cd = record(&ura, &[Scatterer::from_degrees(20.0, 0.0, 0.0, 1.0)]);
        let grid = ImagingGrid::from_degrees(vec![0.0, 3.0], vec![0.0], vec![20.0]).unwrap();
        let opts = BeamformOptions::default();
        let v = product_beamform(&cd, &rect, &grid, &Weights::uniform(rect.len()), &opts).unwrap();
        let manual = |a: f64, b: f64, quads: &[crate::geometry::Quadrant]| {
            let mut total = 0.0;
            for q in quads {
                let pair = rect.orthogonal_pair(*q).unwrap();
                let line = |m: &[usize]| {
                    let els: Vec<_> = m.iter().map(|&i| rect.elements()[i]).collect();
                    das_beam(&cd, &els, &Weights::uniform(els.len()), 20.0, a.to_radians(), b.to_radians(), opts.focus).unwrap()
                };
                let pm = product_signal(&line(pair.horizontal), &line(pair.vertical), 1.0 / 64.0).unwrap();
                total += pm.sample_at_range(20.0, C, 0).unwrap();
            }
            total / quads.len() as f64
        };
        use crate::geometry::Quadrant::*;
        assert!((v.get(0, 0, 0) - manual(0.0, 0.0, &[I, II, III, IV])).abs() < 1e-12);
        assert!((v.get(0, 1, 0) - manual(3.0, 0.0, &[I, IV])).abs() < 1e-12);
    }

    #[test]
    fn dm_matches_das() {
        let g = build_array(ArrayKind::Ura, 8, 8, 0.0015).unwrap();
        let cd = record(&g, &[Scatterer::from_degrees(10.0, 5.0, -2.5, 1.0)]);
        let grid = small_grid(vec![9.99, 10.0]);
        let w = Weights::uniform(g.len());
        let opts = BeamformOptions::default();
        let das = das_volume(&cd, &g, &grid, &w, &opts).unwrap();
        let dm = dm_volume(&cd, &g, &grid, &w, &DmParams { block_len: 256, overlap: 0.5 }, &opts).unwrap();
        let pk = das.peak();
        let worst = das.voxels().iter().zip(dm.voxels()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst <= 0.02 * pk, "{}", worst / pk);
        assert_eq!(das.argmax(), dm.argmax());
    }

    #[test]
    fn dm_beam_reassembles_full_record() {
        let g = build_array(ArrayKind::Ura, 4, 4, 0.0015).unwrap();
        let s = Scatterer::from_degrees(5.0, 3.0, 2.0, 1.0);
        let cd = record(&g, &[s]);
        let w = Weights::uniform(16);
        let das = das_beam(&cd, g.elements(), &w, 5.0, s.azimuth, s.elevation, FocusMode::Farfield).unwrap();
        let dm = dm_beam(&cd, g.elements(), &w, 5.0, s.azimuth, s.elevation, FocusMode::Farfield, &DmParams { block_len: 64, overlap: 0.5 })
            .unwrap();
        let pk = peak(&das.samples);
        let worst = das.samples.iter().zip(&dm.samples).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst <= 0.02 * pk, "{}", worst / pk);
    }

    #[test]
    fn dm_rejects_bad_block() {
        let g = build_array(ArrayKind::Ura, 2, 2, 0.0015).unwrap();
        let cd = ChannelData::zeros(g.clone(), FS, 0.0, C, 100).unwrap();
        let grid = small_grid(vec![1e-3]);
        let w = Weights::uniform(4);
        for params in [DmParams { block_len: 100, overlap: 0.5 }, DmParams { block_len: 64, overlap: 1.0 }] {
            assert!(matches!(
                dm_volume(&cd, &g, &grid, &w, &params, &BeamformOptions::default()),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn out_of_record_range() {
        let g = build_array(ArrayKind::Ura, 2, 2, 0.0015).unwrap();
        let cd = ChannelData::zeros(g.clone(), FS, 0.0, C, 100).unwrap();
        let grid = small_grid(vec![5.0]);
        assert!(matches!(
            das_volume(&cd, &g, &grid, &Weights::uniform(4), &BeamformOptions::default()),
            Err(Error::OutOfRecord { .. })
        ));
    }

    #[test]
    fn mirrored_scene_gives_mirrored_volume() {
        let ura = build_array(ArrayKind::Ura, 8, 8, 0.0015).unwrap();
        let rect = build_array(ArrayKind::RectPerimeter, 8, 8, 0.0015).unwrap();
        let s = Scatterer::from_degrees(20.0, 7.5, 5.0, 1.0);
        let (a, b) = (record(&ura, &[s]), record(&ura, &[s.mirrored_azimuth()]));
        let grid = small_grid(vec![20.0]);
        let opts = BeamformOptions::default();
        for kind in 0..2 {
            let (va, vb) = if kind == 0 {
                let w = Weights::uniform(64);
                (das_volume(&a, &ura, &grid, &w, &opts).unwrap(), das_volume(&b, &ura, &grid, &w, &opts).unwrap())
            } else {
                let w = Weights::uniform(rect.len());
                (product_beamform(&a, &rect, &grid, &w, &opts).unwrap(), product_beamform(&b, &rect, &grid, &w, &opts).unwrap())
            };
            let pk = va.peak();
            for p in 0..grid.mb() {
                for q in 0..grid.nb() {
                    let (x, y) = (va.get(0, p, q), vb.get(0, grid.mb() - 1 - p, q));
                    assert!((x - y).abs() <= 1e-6 * pk, "kind {kind} ({p},{q}) {x} {y}");
                }
            }
        }
    }

    #[test]
    fn quadrant_parallelism_is_deterministic() {
        let ura = build_array(ArrayKind::Ura, 8, 8, 0.0015).unwrap();
        let rect = build_array(ArrayKind::RectPerimeter, 8, 8, 0.0015).unwrap();
        let cd = record(&ura, &[Scatterer::from_degrees(20.0, -5.0, 5.0, 1.0)]);
        let grid = build_imaging_grid(20.0, 20.0, 11, 11, vec![20.0]).unwrap();
        let w = Weights::uniform(rect.len());
        let v1 = product_beamform(&cd, &rect, &grid, &w, &BeamformOptions::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let v2 = pool.install(|| product_beamform(&cd, &rect, &grid, &w, &BeamformOptions::default()).unwrap());
        assert_eq!(v1, v2);
    }

    #[test]
    fn nearfield_focus_matches_farfield_at_long_range() {
        let g = build_array(ArrayKind::Ura, 8, 8, 0.0015).unwrap();
        let cd = record(&g, &[Scatterer::from_degrees(30.0, 5.0, 5.0, 1.0)]);
        let grid = small_grid(vec![30.0]);
        let w = Weights::uniform(64);
        let far = das_volume(&cd, &g, &grid, &w, &BeamformOptions { focus: FocusMode::Farfield, gate: 0 }).unwrap();
        let near = das_volume(&cd, &g, &grid, &w, &BeamformOptions { focus: FocusMode::Nearfield, gate: 0 }).unwrap();
        assert_eq!(far.argmax(), near.argmax());
        assert_eq!(near.focus_mode(), FocusMode::Nearfield);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn scaling_keeps_argmax(s in 0.01f64..100.0, az in -10.0f64..10.0, el in -10.0f64..10.0) {
            let ura = build_array(ArrayKind::Ura, 6, 6, 0.0015).unwrap();
            let rect = build_array(ArrayKind::RectPerimeter, 6, 6, 0.0015).unwrap();
            let cd = record(&ura, &[Scatterer::from_degrees(15.0, az, el, 1.0)]);
            let scaled = cd.scaled(s);
            let grid = small_grid(vec![15.0]);
            let opts = BeamformOptions::default();
            let a = product_beamform(&cd, &rect, &grid, &Weights::uniform(rect.len()), &opts).unwrap();
            let b = product_beamform(&scaled, &rect, &grid, &Weights::uniform(rect.len()), &opts).unwrap();
            prop_assert_eq!(a.argmax(), b.argmax());
            for (x, y) in a.voxels().iter().zip(b.voxels()) {
                prop_assert!((y - s * x).abs() <= 1e-9 * (1.0 + s * x));
            }
            let c = das_volume(&cd, &ura, &grid, &Weights::uniform(36), &opts).unwrap();
            let d = das_volume(&scaled, &ura, &grid, &Weights::uniform(36), &opts).unwrap();
            prop_assert_eq!(c.argmax(), d.argmax());
        }

        #[test]
        fn volumes_are_non_negative(az in -10.0f64..10.0, el in -10.0f64..10.0, gate in 0usize..4) {
            let ura = build_array(ArrayKind::Ura, 4, 4, 0.0015).unwrap();
            let cd = record(&ura, &[Scatterer::from_degrees(10.0, az, el, 1.0)]);
            let grid = small_grid(vec![10.0]);
            let opts = BeamformOptions { focus: FocusMode::Farfield, gate };
            let v = product_beamform(&cd, &ura, &grid, &Weights::uniform(16), &opts).unwrap();
            prop_assert!(v.voxels().iter().all(|&x| x >= 0.0));
        }
    }
}
