use std::fs;
use std::path::Path;

use super::{read_points, read_raster, write_points, write_raster, SceneSample};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";

fn scene_paths(dir: &Path, id: &str) -> [std::path::PathBuf; 3] {
    [
        dir.join(format!("{id}.z.prad")),
        dir.join(format!("{id}.gt.prad")),
        dir.join(format!("{id}.pts.csv")),
    ]
}

/// Writes the three per-scene files (not the manifest).
pub fn write_scene(dir: &Path, sample: &SceneSample) -> Result<()> {
    let [z, gt, pts] = scene_paths(dir, &sample.id);
    write_raster(&z, &sample.scaleless)?;
    write_raster(&gt, &sample.ground_truth)?;
    write_points(&pts, &sample.cloud)
}

/// Loads every scene listed in `manifest.txt`, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<SceneSample>> {
    let manifest = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let ids: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();

    let mut samples = Vec::with_capacity(ids.len());
    for id in ids {
        let paths = scene_paths(dir, id);
        let missing: Vec<String> = paths
            .iter()
            .filter(|p| !p.is_file())
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Dataset {
                id: id.to_string(),
                reason: format!("missing {}", missing.join(", ")),
            });
        }
        let wrap = |e: Error| Error::Dataset {
            id: id.to_string(),
            reason: e.to_string(),
        };
        let [z, gt, pts] = paths;
        let scaleless = read_raster(&z).map_err(wrap)?;
        let ground_truth = read_raster(&gt).map_err(wrap)?;
        let cloud = read_points(&pts).map_err(wrap)?;
        samples.push(SceneSample::new(id, None, scaleless, cloud, ground_truth).map_err(wrap)?);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_gives_no_samples() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "").unwrap();
        assert!(load_dataset(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn missing_files_name_the_scene() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "ghost\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Dataset { id, .. }) => assert_eq!(id, "ghost"),
            other => panic!("expected dataset error, got {other:?}"),
        }
    }
}
