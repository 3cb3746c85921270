//! Turns a run configuration into arrays, pulses, recordings and volumes.

use anyhow::{bail, Context, Result};
use orthobeam::beamform::{das_volume, dm_volume, product_beamform, BeamVolume, BeamformOptions, Weights};
use orthobeam::geometry::{build_array, build_imaging_grid, ArrayGeometry, ArrayKind, ImagingGrid};
use orthobeam::io::config::{Beamformer, PointConfig, RunConfig};
use orthobeam::signal::{
    make_pulse, matched_filter, synth_channel_data, tgc, ChannelData, Pulse, Scatterer, SynthParams,
};

/// Desk-scale defaults used when no `--config` is given.
pub const DESK_CONFIG: &str = r#"{
  "array": {"kind": "URA", "m": 24, "n": 24},
  "pulse": {"fc_hz": 500000.0, "cycles": 3.0, "fs_hz": 10000000.0, "window": "HANN"},
  "medium": {"c_mps": 1500.0},
  "scene": {"points": [{"range_m": 30.0, "azimuth_deg": 0.0, "elevation_deg": 0.0}]},
  "grid": {"azimuth_span_deg": 30.0, "elevation_span_deg": 30.0, "mb": 60, "nb": 60, "ranges_m": [30.0]},
  "method": {"beamformers": ["CM", "PM"]}
}"#;

pub fn geometry(cfg: &RunConfig) -> Result<ArrayGeometry<f64>> {
    let a = &cfg.array;
    Ok(build_array(a.kind, a.m, a.n, cfg.spacing_m())?)
}

pub fn pulse(cfg: &RunConfig) -> Result<Pulse<f64>> {
    let p = &cfg.pulse;
    Ok(make_pulse(p.fc_hz, p.cycles, p.fs_hz, p.window)?)
}

pub fn scatterer(p: &PointConfig) -> Scatterer<f64> {
    Scatterer::from_degrees(p.range_m, p.azimuth_deg, p.elevation_deg, p.reflectivity)
}

pub fn scatterers(cfg: &RunConfig) -> Vec<Scatterer<f64>> {
    cfg.scene.points.iter().map(scatterer).collect()
}

pub fn grid(cfg: &RunConfig) -> Result<ImagingGrid<f64>> {
    let g = &cfg.grid;
    Ok(build_imaging_grid(
        g.azimuth_span_deg,
        g.elevation_span_deg,
        g.mb,
        g.nb,
        g.ranges_m.clone(),
    )?)
}

pub fn options(cfg: &RunConfig) -> BeamformOptions {
    BeamformOptions {
        focus: cfg.method.focus,
        gate: cfg.method.gate_samples,
    }
}

/// Simulated recording; the record covers every echo and every grid range.
pub fn synthesize(cfg: &RunConfig, seed: Option<u64>) -> Result<ChannelData<f64>> {
    if cfg.scene.is_stochastic() && seed.is_none() {
        bail!("the scene has noise or clutter, so --seed is required");
    }
    let geom = geometry(cfg)?;
    let pulse = pulse(cfg)?;
    let points = scatterers(cfg);
    let mut params = match cfg.scene.record {
        Some(r) => SynthParams {
            t0: r.t0_s,
            duration: r.duration_s,
            ..SynthParams::covering(&geom, &points, &pulse, cfg.medium.c_mps, cfg.pulse.fs_hz)
        },
        None => {
            let mut probe = points.clone();
            probe.extend(cfg.grid.ranges_m.iter().map(|&r| Scatterer::from_degrees(r, 0.0, 0.0, 0.0)));
            SynthParams::covering(&geom, &probe, &pulse, cfg.medium.c_mps, cfg.pulse.fs_hz)
        }
    };
    params.snr_db = cfg.scene.snr_db;
    params.clutter = cfg.scene.clutter;
    params.seed = seed.unwrap_or(0);
    params.spreading_exponent = cfg.medium.spreading_exponent;
    Ok(synth_channel_data(&geom, &points, &pulse, &params)?)
}

pub fn matched(cfg: &RunConfig, cd: &ChannelData<f64>) -> Result<ChannelData<f64>> {
    Ok(matched_filter(cd, &pulse(cfg)?)?)
}

pub fn gain(cfg: &RunConfig, cd: &ChannelData<f64>) -> Result<Option<ChannelData<f64>>> {
    match cfg.method.tgc {
        Some(p) => Ok(Some(tgc(cd, cfg.medium.c_mps, &p)?)),
        None => Ok(None),
    }
}

/// Sub-array the product beamformer runs on for a given recording.
pub fn product_geometry(cfg: &RunConfig, recorded: &ArrayGeometry<f64>) -> Result<ArrayGeometry<f64>> {
    if recorded.kind() != ArrayKind::Ura {
        return Ok(recorded.clone());
    }
    let kind = cfg.method.pm_array.unwrap_or(ArrayKind::RectPerimeter);
    let lines = build_array(kind, recorded.m(), recorded.n(), recorded.spacing())?;
    if !recorded.contains_positions(&lines) {
        bail!("{kind} elements are not all present in the recorded {}", recorded.kind());
    }
    Ok(lines)
}

pub fn beamform(cfg: &RunConfig, cd: &ChannelData<f64>, bf: Beamformer, grid: &ImagingGrid<f64>) -> Result<BeamVolume<f64>> {
    let recorded = cd.geometry();
    let opts = options(cfg);
    let full = |what: &str| -> Result<()> {
        if recorded.kind() != ArrayKind::Ura {
            bail!("{what} needs a full URA recording, got {}", recorded.kind());
        }
        Ok(())
    };
    let v = match bf {
        Beamformer::Cm => {
            full("CM")?;
            das_volume(cd, recorded, grid, &Weights::uniform(recorded.len()), &opts)?
        }
        Beamformer::Dm => {
            full("DM")?;
            dm_volume(cd, recorded, grid, &Weights::uniform(recorded.len()), &cfg.method.dm, &opts)?
        }
        Beamformer::Pm => {
            let lines = product_geometry(cfg, recorded)?;
            product_beamform(cd, &lines, grid, &Weights::uniform(lines.len()), &opts)
                .with_context(|| format!("product beamforming on {}", lines.kind()))?
        }
    };
    Ok(v)
}
