//! End-to-end orchestration: cloud in, watertight (ideally) mesh out,
//! plus the parameter-search and utility entry points the CLI wraps.
//!
//! Stage order: train → prune close edges on the graph → lift 3-cliques
//! to faces → score → enforce edge-manifoldness → enforce orientability →
//! keep the largest component → orient → fill holes → weld → re-orient →
//! optional simplification → color restoration → save. Orientation runs
//! before hole filling because boundary-loop traversal needs consistent
//! winding, and the orientability pass exists because clique lifting can
//! produce Möbius-like face patches that no amount of flipping fixes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::color::restore_colors;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::gng::{reconstruct_with, EpochTrace, GngParams};
use crate::io;
use crate::mesh::{TriangleMesh, WatertightReport};
use crate::pso;
use crate::quality::{eta_with, QualityScores};
use crate::repair;
use crate::simplify::simplify;
use crate::spatial::SpatialIndex;
use crate::synth;

/// Everything `run_pipeline` needs besides the input cloud itself.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub params: GngParams,
    /// Close-edge pruning threshold, meters.
    pub t_p: f64,
    /// Vertex weld radius, meters.
    pub weld_eps: f64,
    /// Decimate to at most this many faces (only if the mesh is watertight
    /// when reached).
    pub simplify_target: Option<usize>,
    pub skip_color: bool,
    pub seed: u64,
    /// Overrides the derived training-noise sigma when set.
    pub noise_sigma: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: GngParams::default(),
            t_p: 0.0075,
            weld_eps: 1e-6,
            simplify_target: None,
            skip_color: false,
            seed: 0,
            noise_sigma: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_p > 0.0 && self.t_p.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "t_p must be positive and finite, got {}",
                self.t_p
            )));
        }
        if !(self.weld_eps > 0.0 && self.weld_eps.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "weld_eps must be positive and finite, got {}",
                self.weld_eps
            )));
        }
        if let Some(t) = self.simplify_target {
            if t < 4 {
                return Err(Error::InvalidParams(format!(
                    "simplify target must be at least 4 faces, got {t}"
                )));
            }
        }
        if let Some(s) = self.noise_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "noise sigma must be non-negative and finite, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// On-disk parameter file (TOML). Every key is optional; present keys
/// override the config, unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub eps_b: Option<f64>,
    pub eps_n: Option<f64>,
    pub t_gamma: Option<f64>,
    pub a_max: Option<u32>,
    pub alpha: Option<f64>,
    pub d: Option<f64>,
    pub t_p: Option<f64>,
    pub weld_eps: Option<f64>,
    pub simplify_target: Option<usize>,
}

impl ParamFile {
    pub fn apply(&self, config: &mut PipelineConfig) {
        if let Some(v) = self.eps_b {
            config.params.eps_b = v;
        }
        if let Some(v) = self.eps_n {
            config.params.eps_n = v;
        }
        if let Some(v) = self.t_gamma {
            config.params.t_gamma = v;
        }
        if let Some(v) = self.a_max {
            config.params.a_max = v;
        }
        if let Some(v) = self.alpha {
            config.params.alpha = v;
        }
        if let Some(v) = self.d {
            config.params.d = v;
        }
        if let Some(v) = self.t_p {
            config.t_p = v;
        }
        if let Some(v) = self.weld_eps {
            config.weld_eps = v;
        }
        if self.simplify_target.is_some() {
            config.simplify_target = self.simplify_target;
        }
    }

    pub fn from_params(params: &GngParams) -> Self {
        ParamFile {
            eps_b: Some(params.eps_b),
            eps_n: Some(params.eps_n),
            t_gamma: Some(params.t_gamma),
            a_max: Some(params.a_max),
            alpha: Some(params.alpha),
            d: Some(params.d),
            ..ParamFile::default()
        }
    }
}

pub fn load_param_file(path: &Path) -> Result<ParamFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| Error::ParamFile {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

pub fn save_param_file(path: &Path, file: &ParamFile) -> Result<()> {
    let text = toml::to_string(file).map_err(|e| Error::ParamFile {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

/// One counter bump from a repair stage, e.g. ("fill_holes",
/// "loops_closed", 2).
#[derive(Clone, Debug, PartialEq)]
pub struct RepairEntry {
    pub stage: &'static str,
    pub action: &'static str,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RepairLog {
    pub entries: Vec<RepairEntry>,
}

impl RepairLog {
    pub fn push(&mut self, stage: &'static str, action: &'static str, count: usize) {
        log::info!("{stage}: {action} = {count}");
        self.entries.push(RepairEntry {
            stage,
            action,
            count,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,action,count\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.stage, e.action, e.count));
        }
        out
    }
}

impl fmt::Display for RepairLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

/// Result of the mesh-construction core, before any file is written.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    pub mesh: TriangleMesh,
    pub scores: QualityScores,
    pub trace: EpochTrace,
    pub repair_log: RepairLog,
    pub report: WatertightReport,
}

/// Runs training and the whole repair chain on an in-memory cloud.
pub fn run_on_cloud(cloud: &PointCloud, config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_on_cloud_with(cloud, config, Parallelism::default())
}

pub fn run_on_cloud_with(
    cloud: &PointCloud,
    config: &PipelineConfig,
    par: Parallelism,
) -> Result<PipelineOutcome> {
    config.validate()?;
    let mut repair_log = RepairLog::default();

    let (mut model, trace) =
        reconstruct_with(cloud, &config.params, config.seed, config.noise_sigma, par)
            .map_err(|e| e.in_stage("reconstruct"))?;
    let epsilon = trace.min_epsilon().unwrap_or(f64::INFINITY);
    repair_log.push("reconstruct", "epochs", trace.entries.len());
    repair_log.push("reconstruct", "neurons", model.neuron_count());

    let removed = repair::remove_close_edges(&mut model, config.t_p)
        .map_err(|e| e.in_stage("remove_close_edges"))?;
    repair_log.push("remove_close_edges", "edges_removed", removed);

    let mut mesh = model
        .extract_faces()
        .map_err(|e| e.in_stage("extract_faces"))?;
    repair_log.push("extract_faces", "faces", mesh.faces.len());

    // Scored before any face-level repair: ε against the cloud, η on the
    // raw 3-clique triangles.
    let eta = eta_with(&mesh, par).map_err(|e| e.in_stage("quality"))?;
    let scores = QualityScores { epsilon, eta };

    let ms = repair::enforce_edge_manifold(&mut mesh);
    repair_log.push("enforce_edge_manifold", "faces_dropped", ms.faces_dropped);

    let ors = repair::enforce_orientability(&mut mesh)
        .map_err(|e| e.in_stage("enforce_orientability"))?;
    repair_log.push("enforce_orientability", "faces_dropped", ors.faces_dropped);

    let cs = repair::drop_minor_components(&mut mesh);
    repair_log.push("drop_minor_components", "components_dropped", cs.components_dropped);
    repair_log.push("drop_minor_components", "faces_dropped", cs.faces_dropped);

    let os = repair::orient(&mut mesh).map_err(|e| e.in_stage("orient"))?;
    repair_log.push("orient", "faces_flipped", os.faces_flipped);

    let fs = repair::fill_holes(&mut mesh);
    repair_log.push("fill_holes", "loops_closed", fs.loops_closed);
    repair_log.push("fill_holes", "faces_added", fs.faces_added);
    if fs.fallback_vertices > 0 {
        repair_log.push("fill_holes", "fallback_vertices", fs.fallback_vertices);
    }
    if fs.loops_skipped > 0 {
        repair_log.push("fill_holes", "loops_skipped", fs.loops_skipped);
    }

    let ds = repair::dedup(&mut mesh, config.weld_eps).map_err(|e| e.in_stage("dedup"))?;
    repair_log.push("dedup", "vertices_welded", ds.vertices_welded);
    repair_log.push("dedup", "faces_dropped", ds.faces_dropped);
    repair_log.push("dedup", "vertices_pruned", ds.vertices_pruned);

    let os = repair::orient(&mut mesh).map_err(|e| e.in_stage("orient"))?;
    repair_log.push("orient", "faces_flipped", os.faces_flipped);
    if os.globally_flipped {
        repair_log.push("orient", "globally_flipped", 1);
    }

    if let Some(target) = config.simplify_target {
        if mesh.watertight_report().is_watertight() {
            let before = mesh.faces.len();
            let achieved =
                simplify(&mut mesh, target).map_err(|e| e.in_stage("simplify"))?;
            repair_log.push("simplify", "faces_removed", before - achieved);
        } else {
            // Decimation assumes a closed manifold; leave the mesh as
            // evidence instead of failing the run.
            repair_log.push("simplify", "skipped_not_watertight", 1);
        }
    }

    if config.skip_color {
        repair_log.push("restore_colors", "skipped", 1);
    } else {
        let index = SpatialIndex::build(cloud).map_err(|e| e.in_stage("restore_colors"))?;
        let applied = restore_colors(&mut mesh, cloud, &index, par)
            .map_err(|e| e.in_stage("restore_colors"))?;
        if applied {
            repair_log.push("restore_colors", "vertices_colored", mesh.vertices.len());
        } else {
            repair_log.push("restore_colors", "skipped_no_colors", 1);
        }
    }

    let report = mesh.watertight_report();
    Ok(PipelineOutcome {
        mesh,
        scores,
        trace,
        repair_log,
        report,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSummary {
    pub output_path: PathBuf,
    pub vertices: usize,
    pub faces: usize,
    pub scores: QualityScores,
    pub trace: EpochTrace,
    pub repair_log: RepairLog,
    pub report: WatertightReport,
}

impl PipelineSummary {
    pub fn is_watertight(&self) -> bool {
        self.report.is_watertight()
    }
}

impl fmt::Display for PipelineSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // The output line stays machine-readable: `cut -d' ' -f2` hands
        // the mesh path to a tetrahedralizer.
        writeln!(f, "output: {}", self.output_path.display())?;
        writeln!(f, "vertices: {}", self.vertices)?;
        writeln!(f, "faces: {}", self.faces)?;
        writeln!(f, "epochs: {}", self.trace.entries.len())?;
        writeln!(f, "epsilon: {}", self.scores.epsilon)?;
        writeln!(f, "eta: {}", self.scores.eta)?;
        writeln!(f, "watertight: {}", self.report.is_watertight())?;
        write!(f, "{}", self.report)
    }
}

/// Loads a cloud, builds and repairs the mesh, writes it to
/// `output_path` (`.obj` for Wavefront, anything else as ASCII PLY).
pub fn run_pipeline(
    config: &PipelineConfig,
    input_path: &Path,
    output_path: &Path,
) -> Result<PipelineSummary> {
    let cloud = io::load_ply(input_path).map_err(|e| e.in_stage("load"))?;
    let outcome = run_on_cloud(&cloud, config)?;
    save_mesh(&outcome.mesh, output_path).map_err(|e| e.in_stage("save"))?;
    Ok(PipelineSummary {
        output_path: output_path.to_owned(),
        vertices: outcome.mesh.vertices.len(),
        faces: outcome.mesh.faces.len(),
        scores: outcome.scores,
        trace: outcome.trace,
        repair_log: outcome.repair_log,
        report: outcome.report,
    })
}

fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => {
            if mesh.colors.is_some() {
                log::warn!("OBJ output drops per-vertex colors");
            }
            io::save_obj(mesh, path)
        }
        _ => io::save_mesh_ply(mesh, path),
    }
}

/// Particle-swarm search over the GNG parameters; writes the winning
/// parameter file and the full evaluation history CSV.
pub fn run_optimize(
    input_path: &Path,
    iterations: u32,
    swarm_size: usize,
    seed: u64,
    out_params_path: &Path,
    out_csv_path: &Path,
) -> Result<GngParams> {
    let cloud = io::load_ply(input_path).map_err(|e| e.in_stage("load"))?;
    let (params, history) = pso::optimize(&cloud, iterations, swarm_size, seed)?;
    save_param_file(out_params_path, &ParamFile::from_params(&params))?;
    fs::write(out_csv_path, pso::history_csv(&history)).map_err(|e| Error::Io {
        path: out_csv_path.to_owned(),
        source: e,
    })?;
    Ok(params)
}

pub fn run_check(mesh_path: &Path) -> Result<WatertightReport> {
    let mesh = io::load_mesh_ply(mesh_path).map_err(|e| e.in_stage("load"))?;
    Ok(mesh.watertight_report())
}

pub fn check_report_text(report: &WatertightReport) -> String {
    format!("watertight: {}\n{}", report.is_watertight(), report)
}

/// Writes the synthetic prototype cloud (box, sphere, torus) as ASCII PLY.
pub fn run_synth(density: f64, seed: u64, out_path: &Path) -> Result<usize> {
    let cloud = synth::generate_prototype(density, seed)?;
    io::save_ply(&cloud, out_path)?;
    Ok(cloud.len())
}
