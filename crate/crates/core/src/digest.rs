use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable digest of a prompt's (system, user) text pair.
pub fn prompt_digest(system_text: &str, user_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(system_text.as_bytes());
    hasher.update([0u8]);
    hasher.update(user_text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Digest of any serializable value through its JSON form.
pub fn json_digest<T: serde::Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes to JSON"))
}
