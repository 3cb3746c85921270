//! Transmit pulses, point-scatterer echo synthesis and receive preprocessing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_direction, farfield_valid, ArrayGeometry, SensorElement};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Window {
    Rect,
    Hann,
    Hamming,
}

impl Window {
    /// Window value at normalised position `u` in `[0, 1]`.
    fn at(self, u: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        match self {
            Window::Rect => 1.0,
            Window::Hann => 0.5 * (1.0 - (tau * u).cos()),
            Window::Hamming => 0.54 - 0.46 * (tau * u).cos(),
        }
    }
}

/// Windowed sine burst.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse<T> {
    fc: f64,
    cycles: f64,
    fs: f64,
    window: Window,
    scale: f64,
    samples: Vec<T>,
}

pub fn make_pulse<T: Real>(fc: f64, cycles: f64, fs: f64, window: Window) -> Result<Pulse<T>> {
    if !(fc > 0.0) || !fc.is_finite() {
        return Err(Error::InvalidArgument(format!("centre frequency must be positive, got {fc}")));
    }
    if !(cycles >= 1.0) || !cycles.is_finite() {
        return Err(Error::InvalidArgument(format!("pulse needs at least one cycle, got {cycles}")));
    }
    if !(fs >= 4.0 * fc) || !fs.is_finite() {
        return Err(Error::SamplingRate { fs_hz: fs, fc_hz: fc });
    }
    let duration = cycles / fc;
    let count = (duration * fs + 1e-9).floor() as usize + 1;
    let raw: Vec<f64> = (0..count)
        .map(|k| {
            let t = k as f64 / fs;
            window.at(t / duration) * (std::f64::consts::TAU * fc * t).sin()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::DegeneratePulse("pulse samples are all zero".into()));
    }
    Ok(Pulse {
        fc,
        cycles,
        fs,
        window,
        scale: 1.0 / peak,
        samples: raw.iter().map(|v| T::lit(v / peak)).collect(),
    })
}

impl<T: Real> Pulse<T> {
    /// Pulse built from arbitrary samples; `value_at` interpolates linearly.
    pub fn from_samples(samples: Vec<T>, fs: f64, fc: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty pulse".into()));
        }
        Ok(Self {
            fc,
            cycles: samples.len() as f64 * fc / fs,
            fs,
            window: Window::Rect,
            scale: 0.0,
            samples,
        })
    }

    pub fn fc(&self) -> f64 {
        self.fc
    }

    pub fn cycles(&self) -> f64 {
        self.cycles
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seconds from the first to the last sample of the burst.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.fs
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|&s| s * s).sum()
    }

    /// Energy centroid in samples from the first sample.
    pub fn centroid(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, s) in self.samples.iter().enumerate() {
            let e = s.as_f64().powi(2);
            num += k as f64 * e;
            den += e;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Sample index the matched filter aligns echo peaks to.
    pub fn centroid_index(&self) -> usize {
        self.centroid().round() as usize
    }

    pub fn centroid_time(&self) -> f64 {
        self.centroid_index() as f64 / self.fs
    }

    /// Continuous-time pulse value, `t` measured from the first sample.
    pub fn value_at(&self, t: f64) -> f64 {
        let duration = self.duration();
        if t < 0.0 || t > duration {
            return 0.0;
        }
        if self.scale > 0.0 {
            let full = self.cycles / self.fc;
            self.scale * self.window.at(t / full) * (std::f64::consts::TAU * self.fc * t).sin()
        } else {
            let pos = t * self.fs;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            let a = self.samples[i].as_f64();
            let b = self.samples.get(i + 1).map_or(0.0, |v| v.as_f64());
            a + (b - a) * frac
        }
    }
}

/// −3 dB width of the magnitude spectrum around its peak, Hz.
pub fn pulse_bandwidth<T: Real>(pulse: &Pulse<T>) -> Result<f64> {
    if pulse.is_empty() {
        return Err(Error::DegeneratePulse("empty pulse".into()));
    }
    let len = (16 * pulse.len()).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = pulse
        .samples()
        .iter()
        .map(|s| Complex::new(s.as_f64(), 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..=len / 2].iter().map(|c| c.norm()).collect();
    let (peak_bin, peak) = mag
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if peak_bin == 0 || peak == 0.0 || peak_bin == len / 2 {
        return Err(Error::DegeneratePulse(format!(
            "spectrum peak at bin {peak_bin}, not at a finite passband frequency"
        )));
    }
    let half = peak / std::f64::consts::SQRT_2;
    let df = pulse.fs / len as f64;
    let mut lo = peak_bin;
    while lo > 0 && mag[lo] > half {
        lo -= 1;
    }
    let mut hi = peak_bin;
    while hi < len / 2 && mag[hi] > half {
        hi += 1;
    }
    if mag[lo] > half || mag[hi] > half {
        return Err(Error::DegeneratePulse("spectrum does not fall to -3 dB on both sides".into()));
    }
    let cross = |a: usize, b: usize| a as f64 + (half - mag[a]) / (mag[b] - mag[a]) * (b as f64 - a as f64);
    Ok((cross(hi - 1, hi) - cross(lo + 1, lo)) * df)
}

/// Point reflector in the far field of the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer<T> {
    pub range: T,
    pub azimuth: T,
    pub elevation: T,
    pub reflectivity: T,
}

impl<T: Real> Scatterer<T> {
    pub fn from_degrees(range: f64, azimuth_deg: f64, elevation_deg: f64, reflectivity: f64) -> Self {
        Self {
            range: T::lit(range),
            azimuth: T::lit(azimuth_deg.to_radians()),
            elevation: T::lit(elevation_deg.to_radians()),
            reflectivity: T::lit(reflectivity),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.range > T::zero()) {
            return Err(Error::InvalidArgument(format!("scatterer range must be positive, got {}", self.range)));
        }
        if !(self.reflectivity >= T::zero()) {
            return Err(Error::InvalidArgument("reflectivity must be non-negative".into()));
        }
        check_direction(self.azimuth, self.elevation)
    }

    /// Mirror image across the `α = 0` plane.
    pub fn mirrored_azimuth(&self) -> Self {
        Self {
            azimuth: -self.azimuth,
            ..*self
        }
    }
}

/// Per-sensor sampled time series.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelData<T> {
    geometry: ArrayGeometry<T>,
    fs: T,
    t0: T,
    c: T,
    num_samples: usize,
    data: Vec<T>,
}

impl<T: Real> ChannelData<T> {
    /// `data` holds `geometry.len()` channels of `num_samples` each, channel-major.
    pub fn new(geometry: ArrayGeometry<T>, fs: T, t0: T, c: T, num_samples: usize, data: Vec<T>) -> Result<Self> {
        if !(fs > T::zero()) || !(c > T::zero()) {
            return Err(Error::InvalidArgument("sampling rate and sound speed must be positive".into()));
        }
        if data.len() != geometry.len() * num_samples {
            return Err(Error::InvalidArgument(format!(
                "{} samples supplied for {} channels x {} samples",
                data.len(),
                geometry.len(),
                num_samples
            )));
        }
        Ok(Self {
            geometry,
            fs,
            t0,
            c,
            num_samples,
            data,
        })
    }

    pub fn zeros(geometry: ArrayGeometry<T>, fs: T, t0: T, c: T, num_samples: usize) -> Result<Self> {
        let data = vec![T::zero(); geometry.len() * num_samples];
        Self::new(geometry, fs, t0, c, num_samples, data)
    }

    pub fn geometry(&self) -> &ArrayGeometry<T> {
        &self.geometry
    }

    pub fn fs(&self) -> T {
        self.fs
    }

    /// Time of the first sample, seconds.
    pub fn t0(&self) -> T {
        self.t0
    }

    /// Sound speed of the medium the record was taken in.
    pub fn c(&self) -> T {
        self.c
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_channels(&self) -> usize {
        self.geometry.len()
    }

    pub fn channel(&self, element: usize) -> &[T] {
        &self.data[element * self.num_samples..(element + 1) * self.num_samples]
    }

    pub fn channel_mut(&mut self, element: usize) -> &mut [T] {
        let n = self.num_samples;
        &mut self.data[element * n..(element + 1) * n]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn sample_time(&self, k: usize) -> T {
        self.t0 + T::lit(k as f64) / self.fs
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Channel-wise map producing a record of the same shape.
    fn map_channels(&self, f: impl Fn(usize, &[T], &mut [T]) + Sync) -> Self {
        let n = self.num_samples;
        let mut data = vec![T::zero(); self.data.len()];
        data.par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(ch, out)| f(ch, self.channel(ch), out));
        Self { data, ..self.clone() }
    }

    pub fn cast<U: Real>(&self) -> ChannelData<U> {
        ChannelData {
            geometry: self.geometry.cast(),
            fs: U::lit(self.fs.as_f64()),
            t0: U::lit(self.t0.as_f64()),
            c: U::lit(self.c.as_f64()),
            num_samples: self.num_samples,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Weak random reflectors spread through a range shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clutter {
    pub count: usize,
    /// Standard deviation of the clutter reflectivity.
    pub reflectivity: f64,
    pub range_min_m: f64,
    pub range_max_m: f64,
    /// Clutter directions are drawn with `|α|, |β| <= max_angle_deg`.
    pub max_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub c: f64,
    pub fs: f64,
    /// Time of the first recorded sample.
    pub t0: f64,
    /// Record length, seconds.
    pub duration: f64,
    /// Additive white Gaussian noise relative to the strongest echo, or none.
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Two-way amplitude spreading `(1 m / r)^exponent`.
    pub spreading_exponent: f64,
    pub clutter: Option<Clutter>,
}

impl SynthParams {
    /// Noiseless parameters whose record window covers every echo of `scatterers`.
    pub fn covering<T: Real>(
        geometry: &ArrayGeometry<T>,
        scatterers: &[Scatterer<T>],
        pulse: &Pulse<T>,
        c: f64,
        fs: f64,
    ) -> Self {
        let (start, end) = record_window(geometry, scatterers, pulse, c, fs);
        Self {
            c,
            fs,
            t0: start,
            duration: end - start,
            snr_db: None,
            seed: 0,
            spreading_exponent: 2.0,
            clutter: None,
        }
    }
}

/// `[start, end)` in seconds holding all echoes with a margin of one pulse length
/// plus the array transit time, start aligned to the sample grid.
pub fn record_window<T: Real>(
    geometry: &ArrayGeometry<T>,
    scatterers: &[Scatterer<T>],
    pulse: &Pulse<T>,
    c: f64,
    fs: f64,
) -> (f64, f64) {
    let transit = geometry.aperture().as_f64() / c;
    let margin = pulse.duration() + 2.0 * transit + 16.0 / fs;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in scatterers {
        let t = 2.0 * s.range.as_f64() / c;
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if !lo.is_finite() {
        return (0.0, margin);
    }
    let start = ((lo - margin) * fs).floor().max(0.0) / fs;
    (start, hi + margin)
}

fn far_delay<T: Real>(e: &SensorElement<T>, s: &Scatterer<T>, c: f64) -> f64 {
    (e.x.as_f64() * s.azimuth.as_f64().sin() + e.y.as_f64() * s.elevation.as_f64().sin()) / c
}

/// Superposes far-field point echoes on every sensor.
///
/// A scatterer at `(r0, α, β)` reaches sensor `p` with its energy centroid at
/// `2 r0 / c - τ`, `τ = (x sin α + y sin β) / c` (positive `τ` arrives early).
pub fn synth_channel_data<T: Real>(
    geometry: &ArrayGeometry<T>,
    scatterers: &[Scatterer<T>],
    pulse: &Pulse<T>,
    params: &SynthParams,
) -> Result<ChannelData<T>> {
    let SynthParams { c, fs, t0, duration, .. } = *params;
    if !(c > 0.0) || !(fs > 0.0) || !(duration > 0.0) {
        return Err(Error::InvalidArgument("c, fs and duration must be positive".into()));
    }
    for s in scatterers {
        s.validate()?;
        let lambda = c / pulse.fc();
        if !farfield_valid(s.range.as_f64(), geometry.aperture().as_f64(), lambda) {
            log::warn!(
                "scatterer at {} m violates the far-field condition D²/2λ = {:.3} m",
                s.range,
                geometry.aperture().as_f64().powi(2) / (2.0 * lambda)
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut all: Vec<Scatterer<T>> = scatterers.to_vec();
    if let Some(cl) = params.clutter {
        if !(cl.range_min_m > 0.0) || !(cl.range_max_m > cl.range_min_m) {
            return Err(Error::InvalidArgument("clutter range shell is empty".into()));
        }
        let ranges = Uniform::new(cl.range_min_m, cl.range_max_m).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let lim = cl.max_angle_deg.abs().min(44.9);
        let angles = Uniform::new_inclusive(-lim, lim).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let refl = Normal::new(0.0, cl.reflectivity.abs()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for _ in 0..cl.count {
            let r = ranges.sample(&mut rng);
            let (a, b) = (angles.sample(&mut rng), angles.sample(&mut rng));
            let w: f64 = refl.sample(&mut rng);
            all.push(Scatterer::from_degrees(r, a, b, w.abs()));
        }
    }

    let num_samples = (duration * fs).round() as usize;
    if num_samples == 0 {
        return Err(Error::Truncation("record holds no samples".into()));
    }
    let end = t0 + (num_samples - 1) as f64 / fs;
    let tc = pulse.centroid_time();
    let spread = |r: f64| r.powf(-params.spreading_exponent);
    for s in scatterers {
        for e in geometry.elements() {
            let arrival = 2.0 * s.range.as_f64() / c - far_delay(e, s, c);
            let (first, last) = (arrival - tc, arrival - tc + pulse.duration());
            if first < t0 || last > end {
                return Err(Error::Truncation(format!(
                    "echo of scatterer at {} m spans [{first:.9}, {last:.9}] s, record is [{t0:.9}, {end:.9}] s",
                    s.range
                )));
            }
        }
    }

    let mut out = ChannelData::zeros(geometry.clone(), T::lit(fs), T::lit(t0), T::lit(c), num_samples)?;
    let elements = geometry.elements();
    out.data
        .par_chunks_mut(num_samples)
        .enumerate()
        .for_each(|(ch, channel)| {
            let e = &elements[ch];
            for s in &all {
                let amp = s.reflectivity.as_f64() * spread(s.range.as_f64());
                let start = 2.0 * s.range.as_f64() / c - far_delay(e, s, c) - tc;
                let k0 = ((start - t0) * fs).ceil().max(0.0) as usize;
                let k1 = (((start + pulse.duration() - t0) * fs).floor() as isize).min(num_samples as isize - 1);
                if k1 < 0 {
                    continue;
                }
                for (k, v) in channel.iter_mut().enumerate().take(k1 as usize + 1).skip(k0) {
                    let t = t0 + k as f64 / fs;
                    *v += T::lit(amp * pulse.value_at(t - start));
                }
            }
        });

    if let Some(snr_db) = params.snr_db {
        let strongest = scatterers
            .iter()
            .map(|s| s.reflectivity.as_f64() * spread(s.range.as_f64()))
            .fold(0.0, f64::max);
        if strongest == 0.0 {
            return Err(Error::InvalidArgument("noise level is relative to an echo, but the scene has none".into()));
        }
        let rms = strongest * (pulse.energy().as_f64() / pulse.len() as f64).sqrt();
        let sigma = rms / 10f64.powf(snr_db / 20.0);
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in out.data.iter_mut() {
            *v += T::lit(noise.sample(&mut rng));
        }
    }
    Ok(out)
}

/// Correlates every channel with the pulse.
///
/// Output has the input length; an echo whose energy centroid sits at sample
/// `d` produces its correlation peak at `d`.
pub fn matched_filter<T: Real>(cd: &ChannelData<T>, pulse: &Pulse<T>) -> Result<ChannelData<T>> {
    if pulse.is_empty() {
        return Err(Error::InvalidArgument("empty pulse".into()));
    }
    if pulse.len() > cd.num_samples() {
        return Err(Error::InvalidArgument(format!(
            "pulse of {} samples is longer than the {}-sample record",
            pulse.len(),
            cd.num_samples()
        )));
    }
    let taps = pulse.samples();
    let ci = pulse.centroid_index() as isize;
    let n = cd.num_samples() as isize;
    Ok(cd.map_channels(|_, x, out| {
        for (k, o) in out.iter_mut().enumerate() {
            let base = k as isize - ci;
            let j0 = (-base).max(0) as usize;
            let j1 = ((n - base).min(taps.len() as isize)).max(0) as usize;
            let mut acc = T::zero();
            for j in j0..j1 {
                acc += taps[j] * x[(base + j as isize) as usize];
            }
            *o = acc;
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TgcParams {
    /// Spreading compensation `(r / 1 m)^exponent`.
    pub exponent: f64,
    /// Two-way absorption compensation, dB per metre of one-way range.
    pub absorption_db_per_m: f64,
    /// Gain ceiling, dB.
    pub max_gain_db: f64,
}

impl Default for TgcParams {
    fn default() -> Self {
        Self {
            exponent: 2.0,
            absorption_db_per_m: 0.0,
            max_gain_db: 80.0,
        }
    }
}

/// Gain applied by [`tgc`] at time `t`.
pub fn tgc_gain(t: f64, c: f64, params: &TgcParams) -> f64 {
    let r = (c * t / 2.0).max(0.0);
    let g = r.powf(params.exponent) * 10f64.powf(params.absorption_db_per_m * 2.0 * r / 20.0);
    g.min(10f64.powf(params.max_gain_db / 20.0))
}

/// Range-dependent gain compensating spreading and absorption.
pub fn tgc<T: Real>(cd: &ChannelData<T>, c: f64, params: &TgcParams) -> Result<ChannelData<T>> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("sound speed must be positive, got {c}")));
    }
    if !(params.exponent >= 0.0) || !(params.absorption_db_per_m >= 0.0) {
        return Err(Error::InvalidArgument("TGC exponent and absorption must be non-negative".into()));
    }
    let gains: Vec<T> = (0..cd.num_samples())
        .map(|k| T::lit(tgc_gain(cd.sample_time(k).as_f64(), c, params)))
        .collect();
    Ok(cd.map_channels(|_, x, out| {
        for ((o, &v), &g) in out.iter_mut().zip(x).zip(&gains) {
            *o = v * g;
        }
    }))
}
