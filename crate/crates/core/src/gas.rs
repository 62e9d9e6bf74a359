//! Gas schedule and per-transaction metering.

use serde::{Deserialize, Serialize};

/// Unit costs charged while a handler runs. Defaults approximate EVM costs
/// after the cold/warm access repricing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasSchedule {
    pub tx_base: u64,
    pub sstore_new: u64,
    pub sstore_update: u64,
    pub sload: u64,
    pub log_base: u64,
    pub log_topic: u64,
    pub log_byte: u64,
    pub hash_word: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self {
            tx_base: 21_000,
            sstore_new: 20_000,
            sstore_update: 5_000,
            sload: 2_100,
            log_base: 375,
            log_topic: 375,
            log_byte: 8,
            hash_word: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("gas schedule entry `{0}` must be strictly positive")]
pub struct InvalidSchedule(pub &'static str);

impl GasSchedule {
    pub fn validate(&self) -> Result<(), InvalidSchedule> {
        let entries = [
            ("tx_base", self.tx_base),
            ("sstore_new", self.sstore_new),
            ("sstore_update", self.sstore_update),
            ("sload", self.sload),
            ("log_base", self.log_base),
            ("log_topic", self.log_topic),
            ("log_byte", self.log_byte),
            ("hash_word", self.hash_word),
        ];
        match entries.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(InvalidSchedule(name)),
            None => Ok(()),
        }
    }
}

/// Operation counts collected during one handler run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GasMeter {
    pub slots_new: u64,
    pub slots_updated: u64,
    pub slots_read: u64,
    pub logs: u64,
    pub log_topics: u64,
    pub log_bytes: u64,
    pub words_hashed: u64,
}

impl GasMeter {
    pub fn hash_bytes(&mut self, len: usize) {
        self.words_hashed += (len as u64).div_ceil(32);
    }

    pub fn total(&self, schedule: &GasSchedule) -> u64 {
        schedule.tx_base
            + self.slots_new * schedule.sstore_new
            + self.slots_updated * schedule.sstore_update
            + self.slots_read * schedule.sload
            + self.logs * schedule.log_base
            + self.log_topics * schedule.log_topic
            + self.log_bytes * schedule.log_byte
            + self.words_hashed * schedule.hash_word
    }
}
