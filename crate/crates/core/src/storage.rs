//! Word-addressed contract storage.
//!
//! All module state lives in one map of 32-byte slot keys to 32-byte words,
//! laid out the way a Solidity contract would lay out mappings, structs,
//! dynamic arrays and strings. An absent slot reads as the zero word and
//! writing zero deletes the slot.

use std::collections::BTreeMap;

use crate::hash::{keccak256, keccak256_concat, Address, H256};

pub type Word = H256;

pub fn word_u64(v: u64) -> Word {
    let mut w = [0u8; 32];
    w[24..].copy_from_slice(&v.to_be_bytes());
    H256(w)
}

pub fn word_to_u64(w: &Word) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&w.0[24..]);
    u64::from_be_bytes(b)
}

pub fn word_addr(a: &Address) -> Word {
    let mut w = [0u8; 32];
    w[12..].copy_from_slice(&a.0);
    H256(w)
}

pub fn word_to_addr(w: &Word) -> Address {
    let mut a = [0u8; 20];
    a.copy_from_slice(&w.0[12..]);
    Address(a)
}

/// Left-aligned short byte string (at most 32 bytes).
pub fn word_short_bytes(bytes: &[u8]) -> Word {
    assert!(bytes.len() <= 32, "short byte string exceeds one word");
    let mut w = [0u8; 32];
    w[..bytes.len()].copy_from_slice(bytes);
    H256(w)
}

/// `key + delta` as a 256-bit big-endian integer, wrapping.
pub fn slot_offset(key: &Word, delta: u64) -> Word {
    let mut out = key.0;
    let mut carry = delta as u128;
    for byte in out.iter_mut().rev() {
        if carry == 0 {
            break;
        }
        let sum = *byte as u128 + (carry & 0xff);
        *byte = sum as u8;
        carry = (carry >> 8) + (sum >> 8);
    }
    H256(out)
}

fn add256(acc: &mut [u8; 32], v: &[u8; 32]) {
    let mut carry = 0u16;
    for i in (0..32).rev() {
        let s = acc[i] as u16 + v[i] as u16 + carry;
        acc[i] = s as u8;
        carry = s >> 8;
    }
}

fn sub256(acc: &mut [u8; 32], v: &[u8; 32]) {
    let mut borrow = 0i16;
    for i in (0..32).rev() {
        let mut d = acc[i] as i16 - v[i] as i16 - borrow;
        borrow = if d < 0 {
            d += 256;
            1
        } else {
            0
        };
        acc[i] = d as u8;
    }
}

fn leaf(key: &Word, value: &Word) -> [u8; 32] {
    keccak256_concat(&[&key.0, &value.0]).0
}

/// The slot map plus an incrementally maintained state commitment.
///
/// The commitment is the sum modulo 2^256 of `keccak256(key ‖ value)` over
/// all non-zero slots, so it is a pure function of the current contents and
/// costs O(1) per write.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Storage {
    slots: BTreeMap<Word, Word>,
    accumulator: [u8; 32],
}

impl Storage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &Word) -> Word {
        self.slots.get(key).copied().unwrap_or(H256::ZERO)
    }

    /// Writes `value` and returns the previous word.
    pub fn set(&mut self, key: Word, value: Word) -> Word {
        let prev = self.get(&key);
        if prev == value {
            return prev;
        }
        if !prev.is_zero() {
            sub256(&mut self.accumulator, &leaf(&key, &prev));
        }
        if value.is_zero() {
            self.slots.remove(&key);
        } else {
            add256(&mut self.accumulator, &leaf(&key, &value));
            self.slots.insert(key, value);
        }
        prev
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &Word)> {
        self.slots.iter()
    }

    pub fn root(&self) -> H256 {
        keccak256(&self.accumulator)
    }
}

/// Read access to storage, optionally metered.
pub trait SlotRead {
    fn load(&mut self, key: &Word) -> Word;

    /// Account for `len` bytes hashed while deriving a slot key.
    fn charge_hash(&mut self, _len: usize) {}

    /// Record that a role or enrollment guard was evaluated.
    fn note_guard(&mut self, _guard: &'static str) {}

    /// Slot for a mapping entry: `keccak256(namespace ‖ key words)`.
    fn slot(&mut self, namespace: &str, keys: &[Word]) -> Word {
        let mut preimage = Vec::with_capacity(namespace.len() + 32 * keys.len());
        preimage.extend_from_slice(namespace.as_bytes());
        for k in keys {
            preimage.extend_from_slice(&k.0);
        }
        self.charge_hash(preimage.len());
        keccak256(&preimage)
    }

    fn load_u64(&mut self, key: &Word) -> u64 {
        word_to_u64(&self.load(key))
    }

    fn load_addr(&mut self, key: &Word) -> Address {
        word_to_addr(&self.load(key))
    }

    /// Base slot of the data area for a dynamic value whose header is at `key`.
    fn data_slot(&mut self, key: &Word) -> Word {
        self.charge_hash(32);
        keccak256(&key.0)
    }

    fn load_string(&mut self, key: &Word) -> String {
        let len = self.load_u64(key) as usize;
        if len == 0 {
            return String::new();
        }
        let base = self.data_slot(key);
        let mut bytes = Vec::with_capacity(len);
        for i in 0..len.div_ceil(32) {
            let w = self.load(&slot_offset(&base, i as u64));
            let take = (len - bytes.len()).min(32);
            bytes.extend_from_slice(&w.0[..take]);
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn list_len(&mut self, key: &Word) -> u64 {
        self.load_u64(key)
    }

    /// Slot of element `index` in a dynamic array whose elements are
    /// `stride` words wide.
    fn list_element(&mut self, key: &Word, index: u64, stride: u64) -> Word {
        let base = self.data_slot(key);
        slot_offset(&base, index * stride)
    }
}

/// Write access to storage.
pub trait SlotWrite: SlotRead {
    fn store(&mut self, key: Word, value: Word);

    fn store_u64(&mut self, key: Word, value: u64) {
        self.store(key, word_u64(value));
    }

    fn store_addr(&mut self, key: Word, value: &Address) {
        self.store(key, word_addr(value));
    }

    fn store_string(&mut self, key: Word, value: &str) {
        let bytes = value.as_bytes();
        self.store_u64(key, bytes.len() as u64);
        if bytes.is_empty() {
            return;
        }
        let base = self.data_slot(&key);
        for (i, chunk) in bytes.chunks(32).enumerate() {
            self.store(slot_offset(&base, i as u64), word_short_bytes(chunk));
        }
    }

    /// Appends an element slot to a dynamic array and returns its base slot.
    fn list_push(&mut self, key: Word, stride: u64) -> Word {
        let len = self.list_len(&key);
        self.store_u64(key, len + 1);
        self.list_element(&key, len, stride)
    }
}

/// Unmetered read-only view used by query operations.
pub struct StateView<'a> {
    storage: &'a Storage,
}

impl<'a> StateView<'a> {
    pub fn new(storage: &'a Storage) -> Self {
        Self { storage }
    }
}

impl SlotRead for StateView<'_> {
    fn load(&mut self, key: &Word) -> Word {
        self.storage.get(key)
    }
}

/// Direct unmetered writes, used only for building fixtures in tests.
impl SlotRead for Storage {
    fn load(&mut self, key: &Word) -> Word {
        self.get(key)
    }
}

impl SlotWrite for Storage {
    fn store(&mut self, key: Word, value: Word) {
        self.set(key, value);
    }
}
