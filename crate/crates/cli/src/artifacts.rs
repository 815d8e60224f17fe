//! File helpers shared by the subcommands: reading inputs, writing outputs
//! and the per-output manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use amn_srl::corpus::{parse_conll, Sentence};
use amn_srl::model::ContextVectors;
use amn_srl::retrieval::WordVectors;

pub const MANIFEST_HEADER: &str = "# amn-srl manifest v1";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn load_corpus(path: &Path) -> Result<Vec<Sentence>> {
    parse_conll(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_vectors(path: Option<&Path>) -> Result<Option<WordVectors>> {
    path.map(|p| WordVectors::parse(&read_text(p)?).with_context(|| format!("parsing {}", p.display())))
        .transpose()
}

pub fn load_context(path: Option<&Path>) -> Result<Option<ContextVectors>> {
    path.map(|p| ContextVectors::parse(&read_text(p)?).with_context(|| format!("parsing {}", p.display())))
        .transpose()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Default)]
pub struct Manifest {
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<(String, PathBuf)>,
    pub artifacts: Vec<PathBuf>,
    /// Resolved configuration as `key=value` lines.
    pub config: String,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_owned(),
            ..Manifest::default()
        }
    }

    pub fn input(&mut self, role: &str, path: Option<&Path>) -> &mut Self {
        if let Some(p) = path {
            self.inputs.push((role.to_owned(), p.to_path_buf()));
        }
        self
    }

    /// Write `text` to `path` and record it as an artifact.
    pub fn emit(&mut self, path: PathBuf, text: &str) -> Result<()> {
        write_text(&path, text)?;
        self.artifacts.push(path);
        Ok(())
    }

    pub fn render(&self) -> Result<String> {
        let mut out = format!("{MANIFEST_HEADER}\ncommand\t{}\n", self.command);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed\t{seed}");
        }
        for (role, path) in &self.inputs {
            let _ = writeln!(out, "input\t{role}\t{}\t{}", path.display(), sha256_file(path)?);
        }
        for path in &self.artifacts {
            let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            let _ = writeln!(out, "artifact\t{name}\t{}", sha256_file(path)?);
        }
        out.push_str("[config]\n");
        out.push_str(&self.config);
        Ok(out)
    }

    /// `manifest.txt` inside an output directory.
    pub fn write_in(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.txt");
        write_text(&path, &self.render()?)?;
        Ok(path)
    }

    /// `<file>.manifest.txt` beside a single-file output.
    pub fn write_beside(&self, file: &Path) -> Result<PathBuf> {
        let mut name = file.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.txt");
        let path = file.with_file_name(name);
        write_text(&path, &self.render()?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        write_text(&input, "abc").unwrap();
        let mut m = Manifest::new("demo");
        m.seed = Some(3);
        m.input("data", Some(&input));
        m.emit(dir.path().join("out/result.txt"), "xyz").unwrap();
        m.config = "k=v\n".into();
        let text = m.render().unwrap();
        // sha256("abc")
        assert!(text.contains("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        assert!(text.contains("artifact\tresult.txt\t"));
        assert!(text.ends_with("[config]\nk=v\n"));
        let beside = m.write_beside(&dir.path().join("out/result.txt")).unwrap();
        assert!(beside.ends_with("result.txt.manifest.txt"));
    }
}
