use std::fs;
use std::path::{Path, PathBuf};

use maint_core::training::{decode_checkpoint, encode_checkpoint, Checkpoint};

use crate::error::{CliError, Result};

/// The human-readable config snapshot written next to a checkpoint.
pub fn config_snapshot_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".config");
    path.with_file_name(name)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, encode_checkpoint(ck)).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    let snap = config_snapshot_path(path);
    let text = format!(
        "{}epoch={}\n",
        ck.config.to_text(),
        ck.epoch
    );
    fs::write(&snap, text).map_err(|e| CliError::io(&snap, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| CliError::from(e).context(path.display()))
}
