//! Batch execution: jobs from the augmentation pipeline rendered across a
//! worker pool, written as images plus a JSON-lines manifest.
//!
//! Output goes to a staging directory next to `out` and is renamed into place
//! only after every job succeeds, so a failed run leaves nothing behind.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::log::SceneLog;
use crate::augment::{build_dataset, render_job, ClipSample, RenderJob};
use crate::error::{Error, Result};
use crate::raster::{depth_to_bytes, write_image};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
pub const MANIFEST_FORMAT: &str = "rasterkit-manifest/1";

/// First manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub config: serde_json::Value,
    pub logs: Vec<String>,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub t: f64,
    pub camera: String,
    /// Relative to the output directory.
    pub path: String,
    pub depth_path: Option<String>,
}

/// One manifest line per job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub job: RenderJob,
    pub sample: ClipSample,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub out: PathBuf,
    pub manifest: PathBuf,
    pub jobs: usize,
    pub images: usize,
    pub workers: usize,
}

fn image_stem(job: &RenderJob, t: f64, camera: &str) -> String {
    let dir = format!("{}/{}", job.log_id, job.provenance.dir_name());
    if job.mounts.len() > 1 {
        format!("{dir}/{t:.3}_{camera}")
    } else {
        format!("{dir}/{t:.3}")
    }
}

fn execute(log: &SceneLog, job: &RenderJob, cfg: &RunConfig, root: &Path) -> Result<Vec<ImageEntry>> {
    let mut entries = Vec::new();
    for view in render_job(log, job)? {
        let stem = image_stem(job, view.t, &view.camera);
        let path = format!("{stem}.{}", cfg.image_format.extension());
        let full = root.join(&path);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_image(&view.image, &full, cfg.image_format)?;
        let depth_path = if cfg.write_depth {
            let p = format!("{stem}.depth");
            let full = root.join(&p);
            fs::write(&full, depth_to_bytes(&view.image)).map_err(|e| Error::io(&full, e))?;
            Some(p)
        } else {
            None
        };
        entries.push(ImageEntry {
            t: view.t,
            camera: view.camera,
            path,
            depth_path,
        });
    }
    Ok(entries)
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out.file_name().map_or_else(|| "out".into(), |n| n.to_string_lossy().into_owned());
    out.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

/// Refuses to replace a non-empty directory that is not a previous run's output.
fn check_target(out: &Path) -> Result<()> {
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() {
        return Err(Error::Config(format!("output path {} exists and is not a directory", out.display())));
    }
    let empty = fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_none();
    if empty || out.join(MANIFEST_NAME).is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "output directory {} is not empty and holds no manifest; refusing to replace it",
            out.display()
        )))
    }
}

fn write_manifest(path: &Path, header: &ManifestHeader, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = serde_json::to_string(header).expect("header serializes");
    text.push('\n');
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("entry serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Builds the dataset for `logs`, renders it and writes the artifact tree to
/// `cfg.out`. Identical inputs give identical bytes for any worker count.
pub fn run_batch(cfg: &RunConfig, logs: &[SceneLog]) -> Result<BatchSummary> {
    cfg.validate()?;
    for log in logs {
        log.validate()?;
    }
    let jobs = build_dataset(logs, &cfg.dataset())?;
    let mut seen = BTreeSet::new();
    for (_, job) in &jobs {
        for &t in &job.timestamps {
            for m in &job.mounts {
                let stem = image_stem(job, t, &m.name);
                if !seen.insert(stem.clone()) {
                    return Err(Error::invalid(format!("two views would be written to {stem}")));
                }
            }
        }
    }
    check_target(&cfg.out)?;

    let workers = cfg.resolved_workers();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let staging = staging_dir(&cfg.out);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let result = (|| {
        let images: Vec<Vec<ImageEntry>> = pool.install(|| {
            jobs.par_iter()
                .map(|(_, job)| {
                    let log = logs.iter().find(|l| l.log_id == job.log_id).expect("job log exists");
                    execute(log, job, cfg, &staging)
                })
                .collect::<Result<_>>()
        })?;
        let entries: Vec<ManifestEntry> = jobs
            .iter()
            .zip(images)
            .map(|((sample, job), images)| ManifestEntry {
                job: job.clone(),
                sample: sample.clone(),
                images,
            })
            .collect();
        let mut log_ids: Vec<String> = logs.iter().map(|l| l.log_id.clone()).collect();
        log_ids.sort();
        let header = ManifestHeader {
            format: MANIFEST_FORMAT.into(),
            config: cfg.content_json(),
            logs: log_ids,
            jobs: entries.len(),
        };
        write_manifest(&staging.join(MANIFEST_NAME), &header, &entries)?;
        Ok(entries.iter().map(|e| e.images.len()).sum::<usize>())
    })();

    let image_count = match result {
        Ok(n) => n,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if cfg.out.exists() {
        fs::remove_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    }
    if let Err(e) = fs::rename(&staging, &cfg.out) {
        let _ = fs::remove_dir_all(&staging);
        return Err(Error::io(&cfg.out, e));
    }
    audit(&cfg.out)?;
    Ok(BatchSummary {
        out: cfg.out.clone(),
        manifest: cfg.out.join(MANIFEST_NAME),
        jobs: jobs.len(),
        images: image_count,
        workers,
    })
}

/// Parsed manifest: header and job entries.
pub fn read_manifest(path: &Path) -> Result<(ManifestHeader, Vec<ManifestEntry>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::Schema {
        line: line + 1,
        column: e.column(),
        message: e.to_string(),
    };
    let (i, first) = lines.next().ok_or_else(|| Error::invalid("empty manifest"))?;
    let header: ManifestHeader = serde_json::from_str(first).map_err(|e| parse_err(i, e))?;
    let entries = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(i, e)))
        .collect::<Result<Vec<ManifestEntry>>>()?;
    Ok((header, entries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: usize,
    pub files: usize,
}

fn walk(dir: &Path, root: &Path, out: &mut BTreeSet<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            walk(&path, root, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("inside root");
            out.insert(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// Checks that every manifest path exists and every file in the tree is listed.
pub fn audit(out: &Path) -> Result<AuditReport> {
    let (header, entries) = read_manifest(&out.join(MANIFEST_NAME))?;
    if header.jobs != entries.len() {
        return Err(Error::Invariant {
            path: MANIFEST_NAME.into(),
            message: format!("header lists {} jobs, found {}", header.jobs, entries.len()),
        });
    }
    let mut listed = BTreeSet::new();
    for e in &entries {
        for img in &e.images {
            listed.insert(img.path.clone());
            if let Some(d) = &img.depth_path {
                listed.insert(d.clone());
            }
        }
    }
    let mut present = BTreeSet::new();
    walk(out, out, &mut present)?;
    present.remove(MANIFEST_NAME);
    if let Some(missing) = listed.difference(&present).next() {
        return Err(Error::Invariant {
            path: missing.clone(),
            message: "listed in the manifest but missing on disk".into(),
        });
    }
    if let Some(extra) = present.difference(&listed).next() {
        return Err(Error::Invariant {
            path: extra.clone(),
            message: "present on disk but not listed in the manifest".into(),
        });
    }
    Ok(AuditReport {
        entries: entries.len(),
        files: present.len(),
    })
}
