//! Canonical binary encoding used for transaction payloads and chain hashing.
//!
//! Fields are concatenated in declaration order, integers are big-endian and
//! fixed width, and variable-length values carry a u64 big-endian length prefix.

use bincode::Options;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
#[error("canonical codec: {0}")]
pub struct CodecError(#[from] bincode::Error);

fn options() -> impl Options {
    bincode::DefaultOptions::new()
        .with_big_endian()
        .with_fixint_encoding()
        .reject_trailing_bytes()
}

pub fn encode<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    // Serialization into a Vec cannot fail for the plain data types used here.
    options()
        .serialize(value)
        .expect("canonical encoding of in-memory value")
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CodecError> {
    Ok(options().deserialize(bytes)?)
}
