//! TOML run specification: mesh source, model, wells, time stepping and
//! output options, with defaults for every key.

use std::fs;
use std::path::{Path, PathBuf};

use porous_opt::error::{Error, Result};
use porous_opt::mesh::{read_triangle_mesh, structured_unit_square, PrimalMesh};
use porous_opt::model::{RunConfig, TwoPhaseModel, WellParams};
use serde::{Deserialize, Serialize};

/// Either a generated `n x n` unit-square mesh or a `.node`/`.ele` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSpec {
    /// Cells per side of the generated mesh.
    pub n: usize,
    /// Base path of a Triangle mesh (without extension); overrides `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec { n: 16, file: None }
    }
}

impl MeshSpec {
    pub fn load(&self) -> Result<PrimalMesh> {
        match &self.file {
            Some(base) => read_triangle_mesh(base),
            None => structured_unit_square(self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write field snapshots every `save_every` fine steps (0 disables them).
    pub save_every: usize,
    /// Log level used when `POROUS_OPT_LOG` is unset.
    pub verbosity: String,
    /// Worker threads for assembly (0 uses all cores).
    pub threads: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            save_every: 0,
            verbosity: "warn".into(),
            threads: 0,
        }
    }
}

/// Fully resolved run specification.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub mesh: MeshSpec,
    pub model: TwoPhaseModel,
    pub wells: WellParams,
    pub run: RunConfig,
    pub output: OutputSpec,
}

const LEVELS: [&str; 6] = ["off", "error", "warn", "info", "debug", "trace"];

impl RunSpec {
    /// Range checks with the offending key path in every message.
    pub fn validate(&self) -> Result<()> {
        if self.mesh.file.is_none() && self.mesh.n == 0 {
            return Err(Error::Config("mesh.n: must be at least 1".into()));
        }
        if let Some(base) = &self.mesh.file {
            for ext in ["node", "ele"] {
                let path = base.with_extension(ext);
                if !path.is_file() {
                    return Err(Error::Config(format!("mesh.file: {} does not exist", path.display())));
                }
            }
        }
        self.model.validate()?;
        self.wells.validate()?;
        self.run.validate()?;
        if !LEVELS.contains(&self.output.verbosity.as_str()) {
            return Err(Error::Config(format!(
                "output.verbosity: expected one of {}, got {:?}",
                LEVELS.join(", "),
                self.output.verbosity
            )));
        }
        Ok(())
    }

    /// Resolves relative mesh paths against `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        if let Some(file) = &self.mesh.file {
            if file.is_relative() {
                self.mesh.file = Some(dir.join(file));
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run specification serialises")
    }

    /// TOML of everything that determines the numerical results (output
    /// options excluded), hashed into the provenance headers.
    pub fn numerical_fingerprint(&self) -> String {
        let spec = RunSpec {
            output: OutputSpec::default(),
            ..self.clone()
        };
        spec.to_toml()
    }
}

fn deserialize(text: &str, origin: &str) -> Result<RunSpec> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::Config(format!("{origin}: {key}: {}", e.into_inner().message().trim()))
    })
}

/// Parses a TOML document; unknown keys and type mismatches are reported
/// with their key path.
pub fn parse_str(text: &str, origin: &str) -> Result<RunSpec> {
    let spec = deserialize(text, origin)?;
    spec.validate()?;
    Ok(spec)
}

/// Reads, resolves and validates a configuration file. Relative mesh paths
/// are taken relative to the file.
pub fn parse_config(path: &Path) -> Result<RunSpec> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    let mut spec = deserialize(&text, &origin)?;
    spec.rebase(path.parent().unwrap_or(Path::new(".")));
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let spec = parse_str("", "empty").unwrap();
        assert_eq!(spec, RunSpec::default());
    }

    #[test]
    fn negative_penalty_names_the_key() {
        let err = parse_str("[run]\nxi = -1.0\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("xi"), "{err}");
    }

    #[test]
    fn unknown_and_mistyped_keys_report_paths() {
        let err = parse_str("[wells]\nalpha = 1.0\n", "cfg").unwrap_err().to_string();
        assert!(err.contains("wells") && err.contains("alpha"), "{err}");
        let err = parse_str("[run]\nsaturation_steps = \"ten\"\n", "cfg")
            .unwrap_err()
            .to_string();
        assert!(err.contains("run.saturation_steps"), "{err}");
    }

    #[test]
    fn resolved_spec_round_trips() {
        let spec = parse_str("[mesh]\nn = 8\n[wells]\nalpha0 = 4.0\n[run]\nxi = 2.5\n", "cfg").unwrap();
        assert_eq!(parse_str(&spec.to_toml(), "resolved").unwrap(), spec);
    }

    #[test]
    fn fingerprint_ignores_output_options() {
        let a = RunSpec::default();
        let mut b = a.clone();
        b.output.threads = 4;
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.numerical_fingerprint(), b.numerical_fingerprint());
    }
}
