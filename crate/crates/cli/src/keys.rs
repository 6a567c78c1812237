//! Hex key files: `<prefix>.key` holds the P-256 secret scalar, `<prefix>.pub`
//! the compressed public point.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use cropsig::{OuterKeyPair, OuterPublicKey};

pub fn key_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let mut sk = prefix.as_os_str().to_owned();
    sk.push(".key");
    let mut pk = prefix.as_os_str().to_owned();
    pk.push(".pub");
    (sk.into(), pk.into())
}

fn write_private(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    opts.open(path)?.write_all(contents.as_bytes())
}

/// Writes both key files and returns their paths.
pub fn write_keypair(prefix: &Path, key: &OuterKeyPair) -> Result<(PathBuf, PathBuf)> {
    let (sk_path, pk_path) = key_paths(prefix);
    write_private(&sk_path, &format!("{}\n", hex::encode(key.secret_bytes())))
        .with_context(|| format!("cannot write {}", sk_path.display()))?;
    fs::write(
        &pk_path,
        format!("{}\n", hex::encode(key.public_key().to_bytes())),
    )
    .with_context(|| format!("cannot write {}", pk_path.display()))?;
    Ok((sk_path, pk_path))
}

fn read_hex(path: &Path) -> Result<Vec<u8>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    hex::decode(text.trim()).with_context(|| format!("{} is not hex", path.display()))
}

pub fn read_secret_key(path: &Path) -> Result<OuterKeyPair> {
    OuterKeyPair::from_secret_bytes(&read_hex(path)?)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Reads and validates a public key file, returning the encoded key.
pub fn read_public_key(path: &Path) -> Result<OuterPublicKey> {
    OuterPublicKey::from_bytes(&read_hex(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}
