use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::ScenarioArchive;
use crate::error::{Error, Result};

pub const ARCHIVE_SCHEMA_VERSION: &str = "1.0";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
const SUPPORTED_MAJOR: u32 = 1;

/// Writes the archive atomically: a temporary file in the same directory is
/// renamed over `path`.
pub fn save_archive(archive: &ScenarioArchive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut tmp, archive)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    tmp.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_archive(path: impl AsRef<Path>) -> Result<ScenarioArchive> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_archive(&text, &path.display().to_string())
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: String,
}

/// Parses an archive. A newer major schema version is rejected before the
/// body is looked at; other problems name the offending field.
pub fn parse_archive(text: &str, source_name: &str) -> Result<ScenarioArchive> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::parse(source_name, e.to_string()))?;
    let major = probe
        .schema_version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok())
        .ok_or_else(|| {
            Error::parse(
                source_name,
                format!("at `schema_version`: malformed version {:?}", probe.schema_version),
            )
        })?;
    if major > SUPPORTED_MAJOR {
        return Err(Error::SchemaVersion {
            found: probe.schema_version,
            supported: SUPPORTED_MAJOR,
        });
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::parse(source_name, format!("at `{}`: {}", e.path(), e.inner())))
}
