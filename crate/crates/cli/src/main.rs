use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use faceaug::annotate::parse_landmark_line;
use faceaug::mesh::serialize_obj;
use faceaug::metrics::{
    covariate_breakdown, fnmr_at_far, mae, nme, nme_by_yaw, open_set_tpir, read_embedding_csv,
    read_score_csv, read_value_csv, roc_tar_at_far, score_set, LandmarkEval, Similarity,
};
use faceaug::pipeline::{
    emit_entropy_report, emit_overlays, read_manifest, resolve_root, run_augmentation, RunConfig,
    RunOptions,
};
use faceaug::raster::Raster;
use faceaug::sampler::EntropyRow;
use faceaug::sampler::{identity_entropies, SampleRecord, YAW_GROUP_EDGES};
use faceaug::synthetic::{generate_head, DEFAULT_RESOLUTION};
use faceaug::Exec;
use log::info;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "faceaug",
    version,
    about = "Pose and lighting augmentation for annotated face datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize rotated and relit views for a manifest.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run every stage on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Per-identity yaw entropy of a manifest, real records vs all records.
    ReportEntropy {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid of images with visible (green) and occluded (red) landmarks.
    Overlay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output PNG.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        limit: usize,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        #[arg(long)]
        synthetic_only: bool,
    },
    /// Evaluation metrics; results are printed as JSON.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Write the procedural test head as OBJ plus its landmark vertex ids.
    SynthHead {
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
        /// Whitespace-separated landmark vertex indices, usable as
        /// `generic_landmarks`.
        #[arg(long)]
        landmarks: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FarArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2, 1e-1])]
    far: Vec<f64>,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// NME of predicted landmarks (one landmarks.txt line per manifest record).
    Nme {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// TAR and FNMR at fixed FARs from a pair score CSV.
    Roc(FarArgs),
    /// TAR per pair-yaw group at global thresholds.
    Covariate(FarArgs),
    /// Open-set identification from gallery and probe embedding CSVs.
    Openset {
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-1])]
        fpir: Vec<f64>,
        #[arg(long, default_value = "cosine")]
        similarity: Similarity,
    },
    /// Mean absolute error of a `predicted,truth` CSV.
    Mae {
        #[arg(long)]
        values: PathBuf,
    },
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn augment(
    manifest: &Path,
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    sequential: bool,
) -> Result<()> {
    let m = read_manifest(manifest)?;
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let opts = RunOptions {
        root: resolve_root(manifest, &m.header),
        out_dir: out.to_path_buf(),
        exec: if sequential {
            Exec::Sequential
        } else {
            Exec::default()
        },
    };
    info!(
        "augmenting {} records from {}",
        m.records.len(),
        manifest.display()
    );
    let report = run_augmentation(&m, &cfg, &opts)?;
    print_json(&report)
}

fn report_entropy(manifest: &Path, out: &Path) -> Result<()> {
    let m = read_manifest(manifest)?;
    let sample = |r: &faceaug::pipeline::ManifestRecord| SampleRecord {
        identity: r.face.identity.clone(),
        yaw_deg: r.face.yaw_deg,
    };
    let real: Vec<SampleRecord> = m
        .records
        .iter()
        .filter(|r| !r.face.is_synthetic)
        .map(sample)
        .collect();
    let all: Vec<SampleRecord> = m.records.iter().map(sample).collect();
    let after: BTreeMap<String, f64> = identity_entropies(&all)
        .into_iter()
        .map(|s| (s.identity, s.entropy))
        .collect();
    let rows: Vec<EntropyRow> = identity_entropies(&real)
        .into_iter()
        .map(|s| EntropyRow {
            e_after: after[&s.identity],
            identity: s.identity,
            e_before: s.entropy,
        })
        .collect();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    emit_entropy_report(&rows, out)?;
    let mean =
        |f: fn(&EntropyRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len().max(1) as f64;
    print_json(&json!({
        "identities": rows.len(),
        "mean_entropy_before": mean(|r| r.e_before),
        "mean_entropy_after": mean(|r| r.e_after),
    }))
}

fn overlay(
    manifest: &Path,
    out: &Path,
    limit: usize,
    cols: usize,
    synthetic_only: bool,
) -> Result<()> {
    let m = read_manifest(manifest)?;
    let root = resolve_root(manifest, &m.header);
    let items = m
        .records
        .iter()
        .filter(|r| !synthetic_only || r.face.is_synthetic)
        .take(limit)
        .map(|r| {
            let image = Raster::load(root.join(&r.face.image))?;
            let vis = r
                .face
                .visible
                .clone()
                .unwrap_or_else(|| vec![true; r.face.landmarks.len()]);
            Ok((image, r.face.landmarks.clone(), vis))
        })
        .collect::<Result<Vec<_>>>()?;
    if emit_overlays(&items, cols, out)? {
        info!("wrote {} tiles to {}", items.len(), out.display());
    } else {
        info!("no records selected, nothing written");
    }
    Ok(())
}

fn metrics(cmd: MetricsCommand) -> Result<()> {
    match cmd {
        MetricsCommand::Nme { manifest, pred } => {
            let m = read_manifest(&manifest)?;
            let text = std::fs::read_to_string(&pred)
                .with_context(|| format!("reading {}", pred.display()))?;
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            if lines.len() != m.records.len() {
                bail!(
                    "{} has {} lines for {} manifest records",
                    pred.display(),
                    lines.len(),
                    m.records.len()
                );
            }
            let evals = m
                .records
                .iter()
                .zip(lines)
                .map(|(r, line)| {
                    let (predicted, _) = parse_landmark_line(line)?;
                    Ok((
                        r.face.yaw_deg,
                        LandmarkEval {
                            predicted,
                            ground_truth: r.face.landmarks.clone(),
                            bbox: r.face.bbox,
                        },
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let per: Vec<f64> = evals
                .iter()
                .map(|(_, e)| nme(e))
                .collect::<faceaug::Result<_>>()?;
            print_json(&json!({
                "nme": per.iter().sum::<f64>() / per.len().max(1) as f64,
                "count": per.len(),
                "yaw_edges": YAW_GROUP_EDGES,
                "by_yaw": nme_by_yaw(&evals, &YAW_GROUP_EDGES)?,
            }))
        }
        MetricsCommand::Roc(a) => {
            let s = score_set(&read_score_csv(&a.scores)?);
            let rows = a
                .far
                .iter()
                .map(|&far| {
                    let p = roc_tar_at_far(&s, far)?;
                    Ok(json!({ "far": far, "tar": p.tar, "fnmr": fnmr_at_far(&s, far)?, "threshold": p.threshold }))
                })
                .collect::<Result<Vec<_>>>()?;
            print_json(&rows)
        }
        MetricsCommand::Covariate(a) => {
            let rows = covariate_breakdown(&read_score_csv(&a.scores)?, &a.far)?;
            print_json(&json!({ "yaw_edges": YAW_GROUP_EDGES, "rows": rows }))
        }
        MetricsCommand::Openset {
            gallery,
            probes,
            fpir,
            similarity,
        } => {
            let r = open_set_tpir(
                &read_embedding_csv(&probes)?,
                &read_embedding_csv(&gallery)?,
                &fpir,
                similarity,
            )?;
            print_json(&r)
        }
        MetricsCommand::Mae { values } => {
            let (p, t) = read_value_csv(&values)?;
            print_json(&json!({ "mae": mae(&p, &t)?, "count": p.len() }))
        }
    }
}

fn synth_head(resolution: usize, out: &Path, landmarks: Option<&Path>) -> Result<()> {
    let head = generate_head(resolution)?;
    std::fs::write(out, serialize_obj(&head.mesh))
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(p) = landmarks {
        let ids: Vec<String> = head
            .landmark_vertex_ids
            .iter()
            .map(u32::to_string)
            .collect();
        std::fs::write(p, ids.join("\n") + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    info!(
        "{} vertices, {} triangles",
        head.mesh.vertices().len(),
        head.mesh.triangles().len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment {
            manifest,
            config,
            out,
            seed,
            sequential,
        } => augment(&manifest, config.as_deref(), &out, seed, sequential),
        Command::ReportEntropy { manifest, out } => report_entropy(&manifest, &out),
        Command::Overlay {
            manifest,
            out,
            limit,
            cols,
            synthetic_only,
        } => overlay(&manifest, &out, limit, cols, synthetic_only),
        Command::Metrics(cmd) => metrics(cmd),
        Command::SynthHead {
            resolution,
            out,
            landmarks,
        } => synth_head(resolution, &out, landmarks.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
