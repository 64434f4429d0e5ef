//! Content digests for inputs, outputs, and parameter sections.

use std::path::Path;

use sha2::{Digest, Sha256};

/// Hex SHA-256 of a byte slice.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a UTF-8 string.
pub fn digest_str(s: &str) -> String {
    digest_bytes(s.as_bytes())
}

/// Hex SHA-256 of a file's contents.
pub fn digest_file(path: &Path) -> std::io::Result<String> {
    Ok(digest_bytes(&std::fs::read(path)?))
}
