use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use surfhodge::mesh::SurfaceMesh;
use surfhodge::Result;

#[derive(Debug, Serialize)]
pub struct MeshRecord {
    pub path: PathBuf,
    pub checksum: String,
    pub flipped_triangles: usize,
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// What a run read and wrote. Timings are the only non-reproducible entries.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub mesh: Vec<MeshRecord>,
    pub seed: u64,
    pub timings: Vec<(String, f64)>,
    pub outputs: Vec<OutputRecord>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: serde_json::Value::Null,
            mesh: Vec::new(),
            seed,
            timings: Vec::new(),
            outputs: Vec::new(),
            clock: None,
        }
    }

    pub fn mesh(&mut self, path: &Path, mesh: &SurfaceMesh) {
        self.mesh.push(MeshRecord { path: path.to_path_buf(), checksum: mesh.checksum(), flipped_triangles: mesh.flipped_triangles() });
    }

    /// Closes the running phase, if any, and starts `name`.
    pub fn phase(&mut self, name: &str) {
        self.stop();
        self.clock = Some((name.to_string(), Instant::now()));
    }

    pub fn stop(&mut self) {
        if let Some((name, t)) = self.clock.take() {
            self.timings.push((name, t.elapsed().as_secs_f64()));
        }
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(OutputRecord { file, sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(())
    }

    /// Writes `text` to `dir/name` and records it.
    pub fn write(&mut self, dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
        let p = dir.join(name);
        std::fs::write(&p, text)?;
        self.output(&p)?;
        Ok(p)
    }

    pub fn finish(mut self, dir: Option<&Path>) -> Result<()> {
        self.stop();
        if let Some(d) = dir {
            std::fs::write(d.join("manifest.json"), serde_json::to_string_pretty(&self).map_err(surfhodge::Error::Json)? + "\n")?;
        }
        Ok(())
    }
}
