//! synth → matched filter → TGC → beamform → segment → scan-convert → project.

use std::path::Path;

use anyhow::anyhow;
use log::info;
use orthobeam::analysis::resolvable;
use orthobeam::beamform::BeamVolume;
use orthobeam::io::config::{PointConfig, RunConfig};
use orthobeam::io::{self, raster_from_projection};
use orthobeam::postproc::{kmeans_segment, project_max, scan_convert, CartesianSpec, KMeansParams};
use serde::Serialize;

use crate::scene;
use crate::{Failure, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamformerReport {
    pub method: String,
    pub volume: String,
    pub peak: f64,
    pub peak_range_m: f64,
    pub peak_azimuth_deg: f64,
    pub peak_elevation_deg: f64,
    pub segmented_voxels: usize,
    /// Whether the first two scene points form separate lobes; absent for one-point scenes.
    pub resolvable: Option<bool>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub seed: Option<u64>,
    pub points: Vec<PointConfig>,
    pub resolvability_threshold_db: f64,
    pub beamformers: Vec<BeamformerReport>,
}

fn peak_of(v: &BeamVolume<f64>) -> (f64, f64, f64, f64) {
    let (r, p, q) = v.argmax();
    let g = v.grid();
    (v.peak(), g.ranges()[r], g.azimuths_deg()[p], g.elevations_deg()[q])
}

/// Runs every stage, writing artifacts into `out_dir`.
pub fn run(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> Result<PipelineReport, Failure> {
    std::fs::create_dir_all(out_dir).stage("setup")?;
    let raw = scene::synthesize(cfg, seed).stage("synth")?;
    io::write_channel_data(&out_dir.join("channels.sbcd"), &raw).stage("synth")?;
    info!("synthesised {} channels x {} samples", raw.num_channels(), raw.num_samples());

    let mut cd = raw;
    if cfg.method.matched_filter {
        cd = scene::matched(cfg, &cd).stage("matched_filter")?;
    }
    if let Some(gained) = scene::gain(cfg, &cd).stage("tgc")? {
        cd = gained;
    }

    let grid = scene::grid(cfg).stage("beamform")?;
    let points = scene::scatterers(cfg);
    let pp = &cfg.postproc;
    let kparams = KMeansParams {
        k: pp.k,
        max_iter: pp.max_iter,
        tol: pp.tol,
    };
    let spec = CartesianSpec::covering(&grid, pp.cartesian_pitch_m).stage("scanconvert")?;

    let mut reports = Vec::new();
    for &bf in &cfg.method.beamformers {
        let label = bf.label();
        let mut artifacts = Vec::new();
        let v = scene::beamform(cfg, &cd, bf, &grid).stage("beamform")?;
        let name = format!("{label}.sbvl");
        io::write_volume(&out_dir.join(&name), &v).stage("beamform")?;
        artifacts.push(name.clone());
        info!("{label}: beamformed {} voxels", grid.voxel_count());

        let seg = kmeans_segment(&v, &kparams).stage("segment")?;
        let mask_name = format!("{label}.sbmk");
        io::write_segmentation(&out_dir.join(&mask_name), &seg).stage("segment")?;
        artifacts.push(mask_name.clone());
        artifacts.push(format!("{mask_name}.json"));

        // The segmented volume keeps intensities inside the mask.
        let mut kept = v.voxels().clone();
        kept.zip_mut_with(&seg.mask, |x, &m| {
            if !m {
                *x = 0.0;
            }
        });
        let segmented = BeamVolume::new(grid.clone(), v.method(), v.focus_mode(), kept).stage("segment")?;
        let cart = scan_convert(&segmented, &spec).stage("scanconvert")?;
        let cart_name = format!("{label}.sbcv");
        io::write_cartesian(&out_dir.join(&cart_name), &cart).stage("scanconvert")?;
        artifacts.push(cart_name);

        for &plane in &pp.planes {
            let img = orthobeam::postproc::to_db_image(&project_max(&cart, plane), pp.dynamic_range_db).stage("project")?;
            let img_name = format!("{label}_{}.pgm", plane.name());
            io::write_pgm(&out_dir.join(&img_name), &raster_from_projection(&img)).stage("project")?;
            artifacts.push(img_name);
        }

        let resolved = match points.as_slice() {
            [p1, p2, ..] => Some(resolvable(&v, p1, p2, pp.resolvability_threshold_db).stage("report")?),
            _ => None,
        };
        let (peak, r, a, e) = peak_of(&v);
        reports.push(BeamformerReport {
            method: label.to_string(),
            volume: name,
            peak,
            peak_range_m: r,
            peak_azimuth_deg: a,
            peak_elevation_deg: e,
            segmented_voxels: seg.count(),
            resolvable: resolved,
            artifacts,
        });
    }
    let report = PipelineReport {
        seed,
        points: cfg.scene.points.clone(),
        resolvability_threshold_db: pp.resolvability_threshold_db,
        beamformers: reports,
    };
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| Failure::new("report", anyhow!(e)))?;
    json.push(b'\n');
    io::write_atomic(&out_dir.join("report.json"), &json).stage("report")?;
    Ok(report)
}
