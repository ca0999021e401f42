use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::config::PipelineConfig;
use crate::CliError;

pub const TOOL: &str = concat!("powerstate ", env!("CARGO_PKG_VERSION"));

/// Provenance stamped on every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(config: &PipelineConfig) -> Self {
        Self {
            config_hash: config.hash(),
            seed: config.seed,
        }
    }

    /// Comment lines (without the `# ` prefix) for CSV headers.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("tool: {TOOL}"),
            format!("config_hash: {}", self.config_hash),
            format!("seed: {}", self.seed),
        ]
    }

    pub fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("tool".to_string(), TOOL.to_string()),
            ("config_hash".to_string(), self.config_hash.clone()),
            ("seed".to_string(), self.seed.to_string()),
        ])
    }
}

/// Writes `path` through a temporary file in the same directory, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| w.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e)))
}

/// `# ` comment block followed by the given lines.
pub fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}
