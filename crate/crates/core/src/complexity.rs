//! Real-operation counts per slice and a wall-clock benchmark harness.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::beamform::{das_volume, dm_volume, product_beamform, BeamVolume, BeamformOptions, DmParams, Weights};
use crate::error::{Error, Result};
use crate::geometry::{build_array, ArrayKind, ImagingGrid};
use crate::scalar::Real;
use crate::signal::ChannelData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OpMethod {
    Das,
    Dm,
    Czt,
    Proposed,
}

impl OpMethod {
    pub const ALL: [OpMethod; 4] = [OpMethod::Das, OpMethod::Dm, OpMethod::Czt, OpMethod::Proposed];

    pub fn name(self) -> &'static str {
        match self {
            OpMethod::Das => "DAS",
            OpMethod::Dm => "DM",
            OpMethod::Czt => "CZT",
            OpMethod::Proposed => "PROPOSED",
        }
    }
}

impl std::fmt::Display for OpMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Real operations for `Nb²` beams from an `N × N` array.
///
/// The frequency-domain methods are only known as totals, so their
/// per-kind counts are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCountReport {
    pub method: OpMethod,
    pub n: u64,
    pub nb: u64,
    pub l: Option<u64>,
    pub additions: Option<u64>,
    pub multiplications: Option<u64>,
    pub sqrts: Option<u64>,
    pub total: u64,
}

fn mul(a: u64, b: u64) -> Result<u64> {
    a.checked_mul(b).ok_or(Error::Overflow("operation count"))
}

fn add(a: u64, b: u64) -> Result<u64> {
    a.checked_add(b).ok_or(Error::Overflow("operation count"))
}

fn prod(xs: &[u64]) -> Result<u64> {
    xs.iter().try_fold(1u64, |acc, &x| mul(acc, x))
}

fn sum(xs: &[u64]) -> Result<u64> {
    xs.iter().try_fold(0u64, |acc, &x| add(acc, x))
}

fn check_sizes(n: u64, nb: u64) -> Result<()> {
    if n == 0 || nb == 0 {
        return Err(Error::InvalidArgument(format!("N and Nb must be at least 1, got {n} and {nb}")));
    }
    Ok(())
}

fn check_block(l: u64) -> Result<u32> {
    if l < 2 || !l.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("block length {l} is not a power of two >= 2")));
    }
    Ok(l.trailing_zeros())
}

fn counted(method: OpMethod, n: u64, nb: u64, additions: u64, multiplications: u64, sqrts: u64) -> Result<OpCountReport> {
    Ok(OpCountReport {
        method,
        n,
        nb,
        l: None,
        additions: Some(additions),
        multiplications: Some(multiplications),
        sqrts: Some(sqrts),
        total: sum(&[additions, multiplications, sqrts])?,
    })
}

/// Time-domain delay-and-sum over the full array.
pub fn opcount_das(n: u64, nb: u64, with_linear_interp: bool) -> Result<OpCountReport> {
    check_sizes(n, nb)?;
    let beams = mul(nb, nb)?;
    let elems = mul(n, n)?;
    let mut additions = mul(beams, elems - 1)?;
    let mut multiplications = mul(beams, elems)?;
    if with_linear_interp {
        additions = add(additions, prod(&[2, beams, elems])?)?;
        multiplications = add(multiplications, mul(beams, elems)?)?;
    }
    counted(OpMethod::Das, n, nb, additions, multiplications, 0)
}

/// Orthogonal-L product beamforming.
pub fn opcount_proposed(n: u64, nb: u64, with_linear_interp: bool) -> Result<OpCountReport> {
    check_sizes(n, nb)?;
    let beams = mul(nb, nb)?;
    let mut additions = prod(&[2, beams, n - 1])?;
    let mut multiplications = add(prod(&[2, beams, n])?, beams)?;
    if with_linear_interp {
        additions = add(additions, prod(&[4, n, beams])?)?;
        multiplications = add(multiplications, prod(&[2, n, beams])?)?;
    }
    counted(OpMethod::Proposed, n, nb, additions, multiplications, beams)
}

/// Per-bin beam coefficients of the direct method, `L (8 N² - 2) Nb²`.
pub fn dm_core(n: u64, nb: u64, l: u64) -> Result<u64> {
    check_sizes(n, nb)?;
    check_block(l)?;
    prod(&[l, mul(8, mul(n, n)?)? - 2, nb, nb])
}

/// Chirp-z beam coefficients, `6 L (N² + Nb² + L²) + 20 L³ log₂ L`.
pub fn czt_core(n: u64, nb: u64, l: u64) -> Result<u64> {
    check_sizes(n, nb)?;
    let log = check_block(l)? as u64;
    let inner = sum(&[mul(n, n)?, mul(nb, nb)?, mul(l, l)?])?;
    add(prod(&[6, l, inner])?, prod(&[20, l, l, l, log])?)
}

/// Forward transforms of every channel, `(2.5 L log₂(L/2) + 7 L) N²`.
pub fn initial_transform(n: u64, l: u64) -> Result<u64> {
    let log = check_block(l)? as u64;
    // 2.5 L log2(L/2) is integral for L >= 2: L is even.
    let fft = prod(&[5, l, log - 1])? / 2;
    mul(add(fft, mul(7, l)?)?, mul(n, n)?)
}

/// Inverse transforms of every beam, `5 Nb² L log₂ L`.
pub fn final_transform(nb: u64, l: u64) -> Result<u64> {
    let log = check_block(l)? as u64;
    prod(&[5, nb, nb, l, log])
}

fn transformed(method: OpMethod, n: u64, nb: u64, l: u64, core: u64) -> Result<OpCountReport> {
    Ok(OpCountReport {
        method,
        n,
        nb,
        l: Some(l),
        additions: None,
        multiplications: None,
        sqrts: None,
        total: sum(&[core, initial_transform(n, l)?, final_transform(nb, l)?])?,
    })
}

pub fn opcount_dm(n: u64, nb: u64, l: u64) -> Result<OpCountReport> {
    transformed(OpMethod::Dm, n, nb, l, dm_core(n, nb, l)?)
}

pub fn opcount_czt(n: u64, nb: u64, l: u64) -> Result<OpCountReport> {
    transformed(OpMethod::Czt, n, nb, l, czt_core(n, nb, l)?)
}

/// Published per-slice totals for `N = 24`, `Nb = 60`.
pub mod published {
    pub const DAS: f64 = 6_221_952.0;
    pub const DM: f64 = 1.9988e10;
    pub const CZT: f64 = 3.5565e11;
    pub const PROPOSED: f64 = 864_000.0;
}

/// Block length whose total lies closest (relatively) to `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestFit {
    pub l: u64,
    pub total: u64,
    /// `(total - target) / target`.
    pub relative_error: f64,
}

/// Searches powers of two `2 ..= 2^max_log2` for the closest total.
pub fn best_fit_block_len(
    target: f64,
    max_log2: u32,
    total_for: impl Fn(u64) -> Result<OpCountReport>,
) -> Result<BestFit> {
    if !(target > 0.0) {
        return Err(Error::InvalidArgument("target must be positive".into()));
    }
    let mut best: Option<BestFit> = None;
    for e in 1..=max_log2.min(40) {
        let l = 1u64 << e;
        let Ok(report) = total_for(l) else { continue };
        let relative_error = (report.total as f64 - target) / target;
        if best.is_none_or(|b| relative_error.abs() < b.relative_error.abs()) {
            best = Some(BestFit {
                l,
                total: report.total,
                relative_error,
            });
        }
    }
    best.ok_or(Error::Overflow("every candidate block length overflowed"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub method: OpMethod,
    pub scene: String,
    pub repetitions: usize,
    pub wall_times: Vec<f64>,
    pub median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchParams {
    pub repetitions: usize,
    /// Worker threads for the method under test; `None` uses the global pool.
    pub threads: Option<usize>,
    pub options: BeamformOptions,
    pub dm: DmParams,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            repetitions: 3,
            threads: None,
            options: BeamformOptions::default(),
            dm: DmParams::default(),
        }
    }
}

/// Runs one method once; the proposed method uses the perimeter of the recorded URA.
pub fn run_method<T: Real>(
    method: OpMethod,
    cd: &ChannelData<T>,
    grid: &ImagingGrid<T>,
    params: &BenchParams,
) -> Result<BeamVolume<T>> {
    let geom = cd.geometry();
    match method {
        OpMethod::Das => das_volume(cd, geom, grid, &Weights::uniform(geom.len()), &params.options),
        OpMethod::Dm => dm_volume(cd, geom, grid, &Weights::uniform(geom.len()), &params.dm, &params.options),
        OpMethod::Proposed => {
            let lines = if geom.kind() == ArrayKind::Ura {
                build_array(ArrayKind::RectPerimeter, geom.m(), geom.n(), geom.spacing())?
            } else {
                geom.clone()
            };
            product_beamform(cd, &lines, grid, &Weights::uniform(lines.len()), &params.options)
        }
        OpMethod::Czt => Err(Error::UnsupportedMethod(
            "the chirp-z beamformer has an operation count only".into(),
        )),
    }
}

/// Times `method` on one scene: one warm-up run, then `repetitions` timed runs
/// whose outputs must be identical.
pub fn benchmark<T: Real>(
    method: OpMethod,
    cd: &ChannelData<T>,
    grid: &ImagingGrid<T>,
    params: &BenchParams,
    seed: u64,
) -> Result<TimingReport> {
    if params.repetitions < 3 {
        return Err(Error::InvalidArgument(format!(
            "benchmark needs at least 3 repetitions, got {}",
            params.repetitions
        )));
    }
    if method == OpMethod::Czt {
        return run_method(method, cd, grid, params).map(|_| unreachable!());
    }
    let pool = match params.threads {
        Some(t) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        ),
        None => None,
    };
    let run = || match &pool {
        Some(p) => p.install(|| run_method(method, cd, grid, params)),
        None => run_method(method, cd, grid, params),
    };
    let reference = run()?;
    let mut wall_times = Vec::with_capacity(params.repetitions);
    for rep in 0..params.repetitions {
        let start = Instant::now();
        let volume = run()?;
        wall_times.push(start.elapsed().as_secs_f64());
        if volume != reference {
            return Err(Error::Nondeterministic(format!("{method} output changed on repetition {rep}")));
        }
    }
    let g = cd.geometry();
    Ok(TimingReport {
        method,
        scene: format!(
            "{} {}x{} array, {}x{} beams, {} ranges, seed {seed}",
            g.kind(),
            g.m(),
            g.n(),
            grid.mb(),
            grid.nb(),
            grid.ranges().len()
        ),
        repetitions: params.repetitions,
        median: median(&wall_times),
        wall_times,
    })
}
