//! Off-ledger storage: encrypted, content-addressed script blobs, the
//! admin's sealed scriptId -> student manifest, and the grade-sheet area.
//!
//! Directory layout under the store root:
//!
//! ```text
//! blobs/<cid>            nonce ‖ AES-256-GCM ciphertext ‖ tag
//! manifest.json          sealed manifest document
//! gradesheets/exam-<id>.csv
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::exam::{self, ExamState};
use crate::hash::{hex_bytes, keccak256, Address, H256};
use crate::hash_registry::{self, ScriptId};
use crate::storage::SlotRead;

pub const KEY_LEN: usize = 32;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum BlobError {
    #[error("plaintext must be non-empty")]
    EmptyInput,
    #[error("admin key must be {KEY_LEN} bytes, got {0}")]
    BadKeyLength(usize),
    #[error("unknown script {0}")]
    UnknownScript(String),
    #[error("content hash mismatch for {0}: off-ledger store does not match the ledger anchor")]
    HashMismatch(String),
    #[error("ciphertext failed authentication")]
    AuthFailure,
    #[error("results are not finalized (exam {exam_id} is {state})")]
    NotFinalized { exam_id: u64, state: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

/// Content identifier: `cid-` + lower-case hex keccak256 of the stored blob.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cid(String);

impl Cid {
    pub fn of(blob: &[u8]) -> Self {
        Cid(format!("cid-{}", hex::encode(keccak256(blob).0)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The value anchored on the ledger: keccak256 of the CID string bytes.
    pub fn anchor(&self) -> H256 {
        keccak256(self.0.as_bytes())
    }
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct AdminKey([u8; KEY_LEN]);

impl AdminKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, BlobError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| BlobError::BadKeyLength(bytes.len()))?;
        Ok(AdminKey(arr))
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        AdminKey(k)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    fn cipher(&self) -> Aes256Gcm {
        Aes256Gcm::new_from_slice(&self.0).expect("32-byte key")
    }
}

impl fmt::Debug for AdminKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AdminKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedBlob {
    pub cid: Cid,
    pub nonce: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub auth_tag: Vec<u8>,
}

impl EncryptedBlob {
    fn seal<R: RngCore + ?Sized>(plaintext: &[u8], key: &AdminKey, rng: &mut R) -> Self {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let mut sealed = key
            .cipher()
            .encrypt(Nonce::from_slice(&nonce), plaintext)
            .expect("AES-GCM encryption of bounded input");
        let auth_tag = sealed.split_off(sealed.len() - TAG_LEN);
        let mut blob = EncryptedBlob {
            cid: Cid(String::new()),
            nonce: nonce.to_vec(),
            ciphertext: sealed,
            auth_tag,
        };
        blob.cid = Cid::of(&blob.to_bytes());
        blob
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.nonce[..], &self.ciphertext[..], &self.auth_tag[..]].concat()
    }

    fn from_bytes(cid: Cid, bytes: &[u8]) -> Result<Self, BlobError> {
        if bytes.len() < NONCE_LEN + TAG_LEN {
            return Err(BlobError::AuthFailure);
        }
        let (nonce, rest) = bytes.split_at(NONCE_LEN);
        let (ciphertext, tag) = rest.split_at(rest.len() - TAG_LEN);
        Ok(EncryptedBlob {
            cid,
            nonce: nonce.to_vec(),
            ciphertext: ciphertext.to_vec(),
            auth_tag: tag.to_vec(),
        })
    }

    fn open(&self, key: &AdminKey) -> Result<Vec<u8>, BlobError> {
        let sealed = [&self.ciphertext[..], &self.auth_tag[..]].concat();
        key.cipher()
            .decrypt(Nonce::from_slice(&self.nonce), sealed.as_slice())
            .map_err(|_| BlobError::AuthFailure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredScript {
    pub cid: Cid,
    pub content_hash: H256,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub student: Address,
    pub cid: Cid,
    pub exam_id: u64,
}

/// The admin-held link between anonymous scripts and students.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdminManifest {
    pub entries: BTreeMap<ScriptId, ManifestEntry>,
}

/// On-disk form of the manifest: the entries encrypted under the admin key.
#[derive(Debug, Serialize, Deserialize)]
struct SealedManifest {
    sealed: bool,
    #[serde(with = "hex_bytes")]
    nonce: Vec<u8>,
    #[serde(with = "hex_bytes")]
    ciphertext: Vec<u8>,
}

pub struct BlobStore {
    root: PathBuf,
    rng: Box<dyn RngCore + Send>,
    manifest: AdminManifest,
}

impl fmt::Debug for BlobStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlobStore")
            .field("root", &self.root)
            .field("manifest_entries", &self.manifest.entries.len())
            .finish()
    }
}

impl BlobStore {
    /// Opens (creating if needed) a store; loads the manifest if present.
    pub fn open(root: impl Into<PathBuf>, key: &AdminKey, rng: Box<dyn RngCore + Send>) -> Result<Self, BlobError> {
        let root = root.into();
        fs::create_dir_all(root.join("blobs"))?;
        fs::create_dir_all(root.join("gradesheets"))?;
        let mut store = BlobStore {
            root,
            rng,
            manifest: AdminManifest::default(),
        };
        let path = store.manifest_path();
        if path.exists() {
            store.manifest = load_manifest(&path, key)?;
        }
        Ok(store)
    }

    pub fn open_with_os_rng(root: impl Into<PathBuf>, key: &AdminKey) -> Result<Self, BlobError> {
        Self::open(root, key, Box::new(OsRng))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn blob_path(&self, cid: &Cid) -> PathBuf {
        self.root.join("blobs").join(cid.as_str())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn manifest(&self) -> &AdminManifest {
        &self.manifest
    }

    /// Encrypts and persists a script; returns its CID and ledger anchor.
    pub fn store_script(&mut self, plaintext: &[u8], key: &[u8]) -> Result<StoredScript, BlobError> {
        if plaintext.is_empty() {
            return Err(BlobError::EmptyInput);
        }
        let key = AdminKey::from_slice(key)?;
        let blob = EncryptedBlob::seal(plaintext, &key, &mut self.rng);
        fs::write(self.blob_path(&blob.cid), blob.to_bytes())?;
        Ok(StoredScript {
            content_hash: blob.cid.anchor(),
            cid: blob.cid,
        })
    }

    /// Records which student a script belongs to. Call [`save_manifest`]
    /// to persist.
    ///
    /// [`save_manifest`]: BlobStore::save_manifest
    pub fn assign(&mut self, script_id: ScriptId, student: Address, exam_id: u64, cid: Cid) {
        self.manifest.entries.insert(
            script_id,
            ManifestEntry {
                student,
                cid,
                exam_id,
            },
        );
    }

    pub fn save_manifest(&mut self, key: &AdminKey) -> Result<(), BlobError> {
        let plain = serde_json::to_vec(&self.manifest)?;
        let blob = EncryptedBlob::seal(&plain, key, &mut self.rng);
        let doc = SealedManifest {
            sealed: true,
            nonce: blob.nonce,
            ciphertext: [blob.ciphertext, blob.auth_tag].concat(),
        };
        fs::write(self.manifest_path(), serde_json::to_vec_pretty(&doc)?)?;
        Ok(())
    }

    /// Fetches and decrypts a script after checking it against the ledger
    /// anchor.
    pub fn fetch_script<R: SlotRead>(&self, ledger: &mut R, script_id: &ScriptId, key: &[u8]) -> Result<Vec<u8>, BlobError> {
        let key = AdminKey::from_slice(key)?;
        let anchor = hash_registry::script_hash(ledger, script_id)
            .map_err(|_| BlobError::UnknownScript(script_id.to_string()))?;
        let entry = self
            .manifest
            .entries
            .get(script_id)
            .ok_or_else(|| BlobError::UnknownScript(script_id.to_string()))?;
        let mismatch = || BlobError::HashMismatch(script_id.to_string());
        if entry.cid.anchor() != anchor {
            return Err(mismatch());
        }
        let bytes = match fs::read(self.blob_path(&entry.cid)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(mismatch()),
            Err(e) => return Err(e.into()),
        };
        let blob = EncryptedBlob::from_bytes(entry.cid.clone(), &bytes)?;
        let plaintext = blob.open(&key)?;
        if Cid::of(&bytes) != entry.cid {
            return Err(mismatch());
        }
        Ok(plaintext)
    }

    /// De-anonymizes a script once its exam is COMPLETED.
    pub fn reveal_identity<R: SlotRead>(&self, ledger: &mut R, script_id: &ScriptId, exam_id: u64) -> Result<Address, BlobError> {
        let entry = self
            .manifest
            .entries
            .get(script_id)
            .filter(|e| e.exam_id == exam_id)
            .ok_or_else(|| BlobError::UnknownScript(script_id.to_string()))?;
        let state = exam::exam_state(ledger, exam_id).map_err(|_| BlobError::NotFinalized {
            exam_id,
            state: "unknown".into(),
        })?;
        if state != ExamState::Completed {
            return Err(BlobError::NotFinalized {
                exam_id,
                state: state.to_string(),
            });
        }
        Ok(entry.student)
    }

    pub fn grade_sheet_path(&self, exam_id: u64) -> PathBuf {
        self.root.join("gradesheets").join(format!("exam-{exam_id}.csv"))
    }

    pub fn write_grade_sheet(&self, exam_id: u64, csv: &str) -> Result<PathBuf, BlobError> {
        let path = self.grade_sheet_path(exam_id);
        fs::write(&path, csv)?;
        Ok(path)
    }
}

fn load_manifest(path: &Path, key: &AdminKey) -> Result<AdminManifest, BlobError> {
    let doc: SealedManifest = serde_json::from_slice(&fs::read(path)?)?;
    if !doc.sealed {
        return Ok(serde_json::from_slice(&doc.ciphertext)?);
    }
    if doc.nonce.len() != NONCE_LEN || doc.ciphertext.len() < TAG_LEN {
        return Err(BlobError::AuthFailure);
    }
    let plain = key
        .cipher()
        .decrypt(Nonce::from_slice(&doc.nonce), doc.ciphertext.as_slice())
        .map_err(|_| BlobError::AuthFailure)?;
    Ok(serde_json::from_slice(&plain)?)
}
