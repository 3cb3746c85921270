//! Acceptance report: one PASS/FAIL line per criterion, with the measured values.
//!
//! Criteria that fail are reported, not hidden. The process exits non-zero only
//! if a check cannot run, or if `ACCEPTANCE_STRICT=1` and any criterion fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array3;
use orthobeam::analysis::{
    along_track_resolution, psf_table, psf_table_setups, quadrant_leakage, quadrant_sums, range_resolution,
    reconstruct, resolvable, ImagingMethod, ImagingSetup,
};
use orthobeam::beamform::{
    das_volume, dm_volume, product_beamform, product_signal, BeamSignal, BeamVolume, BeamformOptions, DmParams,
    FocusMode, Method, Weights,
};
use orthobeam::complexity::{opcount_das, opcount_proposed, published, run_method, BenchParams, OpMethod};
use orthobeam::geometry::{
    build_array, build_imaging_grid, delay_farfield, delay_nearfield, ArrayKind, ImagingGrid, Quadrant, SensorElement,
};
use orthobeam::io::{self, config::RunConfig};
use orthobeam::postproc::{kmeans_1d, scan_convert, CartesianSpec, KMeansParams};
use orthobeam::scalar::signed_sqrt;
use orthobeam::signal::{make_pulse, matched_filter, synth_channel_data, ChannelData, Scatterer, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

struct Check {
    pass: bool,
    text: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Criterion {
    fn check(&mut self, pass: bool, text: impl Into<String>) {
        self.checks.push(Check {
            pass,
            text: text.into(),
        });
    }
    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
    fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn verdict(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

const DESK_RANGE: f64 = 30.0;

fn desk_grid(ranges: Vec<f64>) -> Res<ImagingGrid<f64>> {
    Ok(build_imaging_grid(30.0, 30.0, 60, 60, ranges)?)
}

fn pitch_deg(axis: &[f64]) -> f64 {
    (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
}

/// Matched-filtered desk URA recording of `points`, record covering `ranges`.
fn desk_recording(points: &[Scatterer<f64>], ranges: &[f64]) -> Res<ChannelData<f64>> {
    let setup = ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Cm);
    let geom = build_array(ArrayKind::Ura, setup.m, setup.n, setup.spacing_m)?;
    let pulse = make_pulse::<f64>(setup.fc_hz, setup.cycles, setup.fs_hz, setup.window)?;
    let mut probe = points.to_vec();
    probe.extend(ranges.iter().map(|&r| Scatterer::from_degrees(r, 0.0, 0.0, 0.0)));
    let mut params = SynthParams::covering(&geom, &probe, &pulse, setup.c_mps, setup.fs_hz);
    params.spreading_exponent = 0.0;
    let cd = synth_channel_data(&geom, points, &pulse, &params)?;
    Ok(matched_filter(&cd, &pulse)?)
}

fn c1_opcount() -> Res<Criterion> {
    let mut c = Criterion::default();
    let pm = opcount_proposed(24, 60, true)?;
    c.check(pm.total == 864_000, format!("proposed(N=24, Nb=60, linear) = {} (expected 864000 exactly)", pm.total));
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_orthobeam"))
        .args(["opcount", "--method", "proposed", "--n", "24", "--nb", "60", "--interp", "linear"])
        .output()?;
    let row = String::from_utf8(out.stdout)?;
    let cli_total = row.lines().nth(1).and_then(|l| l.split(',').nth(7)).unwrap_or("").to_string();
    c.check(
        out.status.success() && cli_total == "864000",
        format!("`orthobeam opcount --method proposed --n 24 --nb 60 --interp linear` total = {cli_total}"),
    );
    let das = opcount_das(24, 60, true)?;
    c.check(
        das.total == 10_364_400,
        format!("das(N=24, Nb=60, linear) = {} (documented formula value 10364400)", das.total),
    );
    c.note(format!(
        "published DAS total is {}; formula/published = {:.3}; discrepancy acknowledged, not fitted",
        published::DAS,
        das.total as f64 / published::DAS
    ));
    Ok(c)
}

fn c2_psf() -> Res<Criterion> {
    let mut c = Criterion::default();
    let rows = psf_table(&psf_table_setups(), DESK_RANGE, 60.0, 0.1)?;
    let get = |k: ArrayKind| rows.iter().find(|r| r.kind == k).copied().expect("row present");
    let (ura, elsa, csa, dcsa) = (get(ArrayKind::Ura), get(ArrayKind::Elsa), get(ArrayKind::Csa), get(ArrayKind::Dcsa));
    for r in &rows {
        c.note(format!(
            "{:<5} {}: MLW az {:.2}°, el {:.2}°, PSLL {:.2} dB",
            r.kind.name(),
            r.method,
            r.mlw_az_deg,
            r.mlw_el_deg,
            r.psll_db
        ));
    }
    let mlw_check = |c: &mut Criterion, label: &str, r: &orthobeam::analysis::PsfMetrics, t: f64| {
        let ok = within(r.mlw_az_deg, t, 1.0) && within(r.mlw_el_deg, t, 1.0);
        c.check(ok, format!("{label} MLW az {:.2}° / el {:.2}° vs {t}° ± 1°", r.mlw_az_deg, r.mlw_el_deg));
    };
    let psll_check = |c: &mut Criterion, label: &str, r: &orthobeam::analysis::PsfMetrics, t: f64| {
        c.check(within(r.psll_db, t, 2.0), format!("{label} PSLL {:.2} dB vs {t} ± 2 dB", r.psll_db));
    };
    mlw_check(&mut c, "URA/CM", &ura, 3.0);
    psll_check(&mut c, "URA/CM", &ura, -18.8);
    mlw_check(&mut c, "ELSA/PM", &elsa, 2.0);
    psll_check(&mut c, "ELSA/PM", &elsa, -7.0);
    mlw_check(&mut c, "CSA/PM", &csa, 5.0);
    psll_check(&mut c, "CSA/PM", &csa, -9.5);
    let dm = (dcsa.mlw_az_deg - elsa.mlw_az_deg).abs().max((dcsa.mlw_el_deg - elsa.mlw_el_deg).abs());
    let dp = (dcsa.psll_db - elsa.psll_db).abs();
    c.check(dm <= 0.3 && dp <= 1.0, format!("DCSA/PM vs ELSA/PM: ΔMLW {dm:.2}° (≤ 0.3°), ΔPSLL {dp:.2} dB (≤ 1 dB)"));
    let pm_rows: Vec<_> = rows.iter().filter(|r| r.method == ImagingMethod::Pm).collect();
    let narrower = pm_rows
        .iter()
        .filter(|r| r.kind != ArrayKind::Csa)
        .all(|r| r.mlw_az_deg < ura.mlw_az_deg && r.mlw_el_deg < ura.mlw_el_deg);
    c.check(narrower, format!("ordering MLW(PM) < MLW(CM) for ELSA, CLSA, DCSA; CSA excluded, its reference MLW of 5° is itself wider than CM (measured {:.2}°)", csa.mlw_az_deg));
    c.check(
        pm_rows.iter().all(|r| r.psll_db > ura.psll_db),
        format!("ordering PSLL(PM) > PSLL(CM) for every PM row (CM {:.2} dB)", ura.psll_db),
    );
    c.note(format!(
        "URA/CM MLW reference 0.886 λ/D = {:.2}°",
        (0.886 * 0.003 / (24.0 * 0.0015) as f64).to_degrees()
    ));
    Ok(c)
}

fn c3_two_point() -> Res<Criterion> {
    let mut c = Criterion::default();
    let grid = desk_grid(vec![DESK_RANGE])?;
    let p1 = Scatterer::from_degrees(DESK_RANGE, 5.0, 5.0, 1.0);
    let p2 = Scatterer::from_degrees(DESK_RANGE, 10.0, 10.0, 1.0);
    let cm = reconstruct(&ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Cm), &[p1, p2], &grid)?;
    let pm = reconstruct(&ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Pm), &[p1, p2], &grid)?;
    let (rc, rp) = (resolvable(&cm, &p1, &p2, -6.0)?, resolvable(&pm, &p1, &p2, -6.0)?);
    c.check(!rc, format!("CM resolvable = {rc} (expected false)"));
    c.check(rp, format!("PM resolvable = {rp} (expected true)"));
    Ok(c)
}

fn c4_localization() -> Res<Criterion> {
    let mut c = Criterion::default();
    let grid = desk_grid(vec![DESK_RANGE])?;
    let (pa, pe) = (pitch_deg(grid.azimuths_deg()), pitch_deg(grid.elevations_deg()));
    let setup = ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Pm);
    let spots = [(0.0, 0.0), (8.0, 6.0), (-6.0, 9.0), (-9.0, -5.0), (7.0, -8.0), (0.0, 7.0), (-11.0, 0.0)];
    for (a, e) in spots {
        let p = Scatterer::from_degrees(DESK_RANGE, a, e, 1.0);
        let v = reconstruct(&setup, &[p], &grid)?;
        let (_, i, j) = v.argmax();
        let (ga, ge) = (grid.azimuths_deg()[i], grid.elevations_deg()[j]);
        let ok = (ga - a).abs() <= pa && (ge - e).abs() <= pe;
        c.check(ok, format!("point ({a:>5.1}°, {e:>5.1}°) → argmax ({ga:>6.2}°, {ge:>6.2}°), pitch {pa:.3}°"));
    }
    Ok(c)
}

fn c5_quadrants() -> Res<Criterion> {
    let mut c = Criterion::default();
    let grid = desk_grid(vec![DESK_RANGE])?;
    let spots = [(Quadrant::I, 7.0, 7.0), (Quadrant::II, -7.0, 7.0), (Quadrant::III, -7.0, -7.0), (Quadrant::IV, 7.0, -7.0)];
    for (q, a, e) in spots {
        let p = Scatterer::from_degrees(DESK_RANGE, a, e, 1.0);
        let pm = reconstruct(&ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Pm), &[p], &grid)?;
        let leak = quadrant_leakage(&pm, q)?;
        let sums = quadrant_sums(&pm);
        let k = Quadrant::ALL.iter().position(|x| *x == q).expect("listed");
        let own_max = (0..4).all(|j| j == k || sums[k] > sums[j]);
        c.check(
            leak < 1.0 && own_max,
            format!("quadrant {q:?} point ({a}°, {e}°): PM leakage {leak:.3} (< 1), own quadrant highest = {own_max}"),
        );
        let cm = reconstruct(&ImagingSetup::desk(ArrayKind::Ura, ImagingMethod::Cm), &[p], &grid)?;
        c.note(format!("CM leakage for quadrant {q:?}: {:.3}", quadrant_leakage(&cm, q)?));
    }
    Ok(c)
}

fn c6_speedup() -> Res<Criterion> {
    let mut c = Criterion::default();
    let grid = desk_grid(vec![DESK_RANGE])?;
    let cd = desk_recording(&[Scatterer::from_degrees(DESK_RANGE, 5.0, 5.0, 1.0)], &[DESK_RANGE])?;
    let params = BenchParams::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let (mut cm, mut pm) = (Vec::new(), Vec::new());
    pool.install(|| -> Res<()> {
        run_method(OpMethod::Das, &cd, &grid, &params)?;
        run_method(OpMethod::Proposed, &cd, &grid, &params)?;
        for _ in 0..7 {
            let t = Instant::now();
            run_method(OpMethod::Das, &cd, &grid, &params)?;
            cm.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            run_method(OpMethod::Proposed, &cd, &grid, &params)?;
            pm.push(t.elapsed().as_secs_f64());
        }
        Ok(())
    })?;
    let (mc, mp) = (orthobeam::complexity::median(&cm), orthobeam::complexity::median(&pm));
    c.check(
        mp <= mc / 5.0,
        format!(
            "one 60×60 slice, 1 thread, 7 interleaved runs: median CM {:.2} ms, PM {:.2} ms, speedup {:.1}× (≥ 5×)",
            mc * 1e3,
            mp * 1e3,
            mc / mp
        ),
    );
    let ratio = opcount_das(24, 60, true)?.total as f64 / opcount_proposed(24, 60, true)?.total as f64;
    c.note(format!("op-count ratio DAS/proposed = {ratio:.2}"));
    Ok(c)
}

fn c7_oracles() -> Res<Criterion> {
    let mut c = Criterion::default();
    let grid = desk_grid(vec![DESK_RANGE])?;
    let pts = [Scatterer::from_degrees(DESK_RANGE, 5.0, 5.0, 1.0), Scatterer::from_degrees(DESK_RANGE, -8.0, 3.0, 0.7)];
    let cd = desk_recording(&pts, &[DESK_RANGE])?;
    let geom = cd.geometry().clone();
    let w = Weights::uniform(geom.len());
    let opts = BeamformOptions::default();
    let das = das_volume(&cd, &geom, &grid, &w, &opts)?;
    let dm = dm_volume(&cd, &geom, &grid, &w, &DmParams::default(), &opts)?;
    let peak = das.peak();
    let dev = das
        .voxels()
        .iter()
        .zip(dm.voxels().iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    c.check(
        dev <= 0.02 * peak,
        format!("DM vs DAS, two points, 24×24 URA, 60×60 beams: max deviation {:.3}% of peak (≤ 2%)", 100.0 * dev / peak),
    );

    let d = geom.aperture();
    let r0 = 1e6 * d;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut bound_ok) = (0.0f64, true);
    for _ in 0..1000 {
        let e: &SensorElement<f64> = &geom.elements()[rng.random_range(0..geom.len())];
        let (a, b) = loop {
            let a = rng.random_range(-60f64..60.0).to_radians();
            let b = rng.random_range(-60f64..60.0).to_radians();
            if a.sin().powi(2) + b.sin().powi(2) <= 1.0 {
                break (a, b);
            }
        };
        let diff = (delay_nearfield(e, r0, a, b, 1500.0)? - delay_farfield(e, a, b, 1500.0)?).abs();
        worst = worst.max(diff);
        bound_ok &= diff <= (e.x * e.x + e.y * e.y) / (2.0 * r0 * 1500.0) * 1.001 + 1e-15;
    }
    c.check(
        worst <= 1e-12,
        format!("near vs far delay at r0 = 10⁶·D = {r0:.0} m, 1000 samples: max |Δτ| = {worst:.3e} s (≤ 1e-12 s)"),
    );
    let rmax = geom.elements().iter().fold(0.0f64, |m, e| m.max(e.x.hypot(e.y)));
    c.note(format!(
        "second-order term |p|²/(2 r0 c) reaches {:.3e} s at the array corner, so 1e-12 s needs r0 ≳ {:.2e} m; every sample stays within that bound: {bound_ok}",
        rmax * rmax / (2.0 * r0 * 1500.0),
        rmax * rmax / (2.0 * 1e-12 * 1500.0)
    ));
    Ok(c)
}

fn c8_resolution() -> Res<Criterion> {
    let mut c = Criterion::default();
    let at = along_track_resolution(2.5, 0.75)?;
    c.check(within(at * 100.0, 3.27, 0.01), format!("along-track(2.5 m, 0.75°) = {:.4} cm (3.27 ± 0.01 cm)", at * 100.0));
    let rr = range_resolution(1500.0, 218e3)?;
    c.check(
        within(rr.as_printed_m * 1e3, 6.88, 0.01),
        format!("range resolution c/Δf (1500 m/s, 218 kHz) = {:.3} mm (6.88 ± 0.01 mm)", rr.as_printed_m * 1e3),
    );
    c.note(format!(
        "the stated 3 mm matches neither c/Δf = {:.2} mm nor the two-way c/(2Δf) = {:.2} mm",
        rr.as_printed_m * 1e3,
        rr.two_way_m * 1e3
    ));
    Ok(c)
}

fn dir_bytes(dir: &Path) -> Res<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir)? {
        let e = e?;
        out.push((e.file_name().to_string_lossy().into_owned(), fs::read(e.path())?));
    }
    out.sort();
    Ok(out)
}

fn c9_determinism() -> Res<Criterion> {
    let mut c = Criterion::default();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/square.json");
    let cfg = RunConfig::load(&cfg_path)?;
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    for d in [&a, &b] {
        orthobeam_cli::pipeline::run(&cfg, Some(11), d.path()).map_err(|f| f.to_string())?;
    }
    let (fa, fb) = (dir_bytes(a.path())?, dir_bytes(b.path())?);
    c.check(
        fa == fb && !fa.is_empty(),
        format!("pipeline rerun with the same config and seed: {} artifacts byte-identical", fa.len()),
    );

    let cd = desk_recording(&[Scatterer::from_degrees(DESK_RANGE, 3.0, -2.0, 1.0)], &[DESK_RANGE])?.cast::<f32>();
    let back: ChannelData<f32> = io::decode_channel_data(&io::encode_channel_data(&cd))?;
    let bits = |x: &ChannelData<f32>| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    c.check(back == cd && bits(&back) == bits(&cd), "channel-data file round trip is bit-exact");
    let elsa = build_array::<f32>(ArrayKind::Dcsa, 6, 6, 0.0015)?;
    let ecd = ChannelData::new(elsa.clone(), 1e6, 0.25, 1500.0, 5, (0..elsa.len() * 5).map(|i| i as f32 * 0.37).collect())?;
    let eback: ChannelData<f32> = io::decode_channel_data(&io::encode_channel_data(&ecd))?;
    c.check(eback == ecd, "explicit-layout (DCSA) channel-data round trip is bit-exact");

    let grid = build_imaging_grid::<f32>(30.0, 20.0, 12, 9, vec![29.5, 30.0, 30.5])?;
    let vox = Array3::from_shape_fn((3, 12, 9), |(r, p, q)| ((r * 7 + p * 3 + q) as f32).sin().abs());
    let v = BeamVolume::new(grid, Method::DasUra, FocusMode::Nearfield, vox)?;
    let vback: BeamVolume<f32> = io::decode_volume(&io::encode_volume(&v))?;
    c.check(vback == v, "volume file round trip is bit-exact, grid metadata included");
    Ok(c)
}

fn c10_invariants() -> Res<Criterion> {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cases = 24;

    let geom = build_array::<f64>(ArrayKind::Ura, 8, 8, 0.0015)?;
    let pulse = make_pulse::<f64>(500e3, 3.0, 10e6, orthobeam::signal::Window::Hann)?;
    let grid = build_imaging_grid::<f64>(30.0, 30.0, 9, 9, vec![5.0])?;
    let mut fails = 0;
    for _ in 0..cases {
        let mut pt = || Scatterer::from_degrees(rng.random_range(4.9..5.1), rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.1..2.0));
        let (p1, p2) = (pt(), pt());
        let probe = [p1, p2, Scatterer::from_degrees(5.0, 0.0, 0.0, 0.0)];
        let params = SynthParams::covering(&geom, &probe, &pulse, 1500.0, 10e6);
        let a = synth_channel_data(&geom, &[p1], &pulse, &params)?;
        let b = synth_channel_data(&geom, &[p2], &pulse, &params)?;
        let ab = synth_channel_data(&geom, &[p1, p2], &pulse, &params)?;
        let scale = ab.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bad = a.data().iter().zip(b.data()).zip(ab.data()).any(|((x, y), z)| (x + y - z).abs() > 1e-12 * scale);
        fails += bad as usize;
    }
    c.check(fails == 0, format!("superposition of synthesised echoes: {fails}/{cases} cases fail"));

    let mut fails = 0;
    for _ in 0..cases {
        let n = 64;
        let bh = BeamSignal { samples: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>(), fs: 1e6, t0: 0.0 };
        let bv = BeamSignal { samples: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>(), fs: 1e6, t0: 0.0 };
        let s = rng.random_range(0.01..10.0);
        let p = product_signal(&bh, &bv, s)?;
        let q = product_signal(&bv, &bh, s)?;
        let bad = (0..n).any(|i| {
            let x = bh.samples[i] * bv.samples[i];
            let y = p.samples[i] / s;
            (y * y.abs() - x).abs() > 1e-12 * (1.0 + x.abs()) || p.samples[i] != q.samples[i] || signed_sqrt(-x) != -signed_sqrt(x)
        });
        fails += bad as usize;
    }
    c.check(fails == 0, format!("signed-sqrt identity sign(p)·p² = B_H·B_V and symmetry: {fails}/{cases} cases fail"));

    let mut fails = 0;
    let rect = build_array::<f64>(ArrayKind::RectPerimeter, 8, 8, 0.0015)?;
    for _ in 0..cases / 3 {
        let p = Scatterer::from_degrees(5.0, rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0), 1.0);
        let probe = [p, Scatterer::from_degrees(5.0, 0.0, 0.0, 0.0)];
        let params = SynthParams::covering(&geom, &probe, &pulse, 1500.0, 10e6);
        let cd = matched_filter(&synth_channel_data(&geom, &[p], &pulse, &params)?, &pulse)?;
        let s = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled = cd.scaled(s);
        let opts = BeamformOptions::default();
        let d1 = das_volume(&cd, &geom, &grid, &Weights::uniform(geom.len()), &opts)?;
        let d2 = das_volume(&scaled, &geom, &grid, &Weights::uniform(geom.len()), &opts)?;
        let p1 = product_beamform(&cd, &rect, &grid, &Weights::uniform(rect.len()), &opts)?;
        let p2 = product_beamform(&scaled, &rect, &grid, &Weights::uniform(rect.len()), &opts)?;
        fails += (d1.argmax() != d2.argmax() || p1.argmax() != p2.argmax()) as usize;
    }
    c.check(fails == 0, format!("argmax invariant under amplitude scaling (DAS and product): {fails}/{} cases fail", cases / 3));

    let mut fails = 0;
    for _ in 0..cases {
        let values: Vec<f64> = (0..400).map(|_| rng.random::<f64>().powi(3)).collect();
        let k = rng.random_range(2..6);
        let (_, _, hist) = kmeans_1d(&values, &KMeansParams { k, max_iter: 100, tol: 1e-6 })?;
        fails += hist.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) as usize;
    }
    c.check(fails == 0, format!("k-means within-cluster variance non-increasing: {fails}/{cases} cases fail"));

    let mut fails = 0;
    let g = build_imaging_grid::<f64>(20.0, 20.0, 6, 6, vec![29.0, 29.5, 30.0, 30.5])?;
    let spec = CartesianSpec::covering(&g, [0.4, 0.4, 0.2])?;
    for _ in 0..cases / 3 {
        let mut vol = || -> Res<BeamVolume<f64>> {
            let v = Array3::from_shape_fn((4, 6, 6), |_| rng.random::<f64>());
            Ok(BeamVolume::new(g.clone(), Method::ProductElsa, FocusMode::Farfield, v)?)
        };
        let (v1, v2) = (vol()?, vol()?);
        let (a, b) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let mix = BeamVolume::new(g.clone(), Method::ProductElsa, FocusMode::Farfield, v1.voxels() * a + v2.voxels() * b)?;
        let (c1, c2, cm) = (scan_convert(&v1, &spec)?, scan_convert(&v2, &spec)?, scan_convert(&mix, &spec)?);
        let bad = cm
            .values
            .iter()
            .zip(c1.values.iter().zip(c2.values.iter()))
            .any(|(&m, (&x, &y))| (m - (a * x + b * y)).abs() > 1e-9 * (1.0 + m.abs()));
        fails += bad as usize;
    }
    c.check(fails == 0, format!("scan conversion linear within 1e-9 relative: {fails}/{} cases fail", cases / 3));
    c.note("the full property-test suite runs with the unit tests under `cargo test --workspace`");
    Ok(c)
}

fn main() {
    let criteria: [(u8, &str, fn() -> Res<Criterion>); 10] = [
        (1, "op-count exactness", c1_opcount),
        (2, "PSF table reproduction", c2_psf),
        (3, "two-point resolvability", c3_two_point),
        (4, "localisation across quadrants", c4_localization),
        (5, "quadrant confinement", c5_quadrants),
        (6, "speedup floor", c6_speedup),
        (7, "oracle equivalence", c7_oracles),
        (8, "resolution formulas", c8_resolution),
        (9, "determinism and round trips", c9_determinism),
        (10, "invariant suite", c10_invariants),
    ];
    let mut summary = Vec::new();
    let mut broken = false;
    for (id, title, f) in criteria {
        let t = Instant::now();
        match f() {
            Ok(c) => {
                for ch in &c.checks {
                    println!("    {} {}", verdict(ch.pass), ch.text);
                }
                for n in &c.notes {
                    println!("    note: {n}");
                }
                let ok = c.pass();
                println!("{} criterion {id}: {title} ({:.1} s)", verdict(ok), t.elapsed().as_secs_f64());
                summary.push((id, ok));
            }
            Err(e) => {
                println!("FAIL criterion {id}: {title}: could not run: {e}");
                summary.push((id, false));
                broken = true;
            }
        }
    }
    let passed = summary.iter().filter(|s| s.1).count();
    let failed: Vec<String> = summary.iter().filter(|s| !s.1).map(|s| s.0.to_string()).collect();
    println!("acceptance: {passed}/{} criteria pass; failing: [{}]", summary.len(), failed.join(", "));
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if broken || (strict && !failed.is_empty()) {
        std::process::exit(1);
    }
}
