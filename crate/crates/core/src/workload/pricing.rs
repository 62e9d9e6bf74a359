//! Gas-to-currency conversion and gas-based storage estimation.

use serde::{Deserialize, Serialize};

use super::WorkloadError;

/// Reference divisor: gas charged for one fresh 32-byte storage slot.
pub const SSTORE_NEW_GAS: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingConfig {
    pub gas_price_gwei: f64,
    pub eth_usd: f64,
    /// Share of workflow gas attributed to SSTORE.
    pub storage_fraction: f64,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            gas_price_gwei: 0.044,
            eth_usd: 2154.93,
            storage_fraction: 0.35,
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.gas_price_gwei > 0.0 && self.gas_price_gwei.is_finite()) {
            return Err(WorkloadError::InvalidPricing("gas_price_gwei must be positive"));
        }
        if !(self.eth_usd > 0.0 && self.eth_usd.is_finite()) {
            return Err(WorkloadError::InvalidPricing("eth_usd must be positive"));
        }
        if !(self.storage_fraction > 0.0 && self.storage_fraction < 1.0) {
            return Err(WorkloadError::InvalidPricing("storage_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub eth: f64,
    pub usd: f64,
}

pub fn price_gas(gas: u64, pricing: &PricingConfig) -> Cost {
    let eth = gas as f64 * pricing.gas_price_gwei * 1e-9;
    Cost {
        eth,
        usd: eth * pricing.eth_usd,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageEstimate {
    pub sstore_ops: u64,
    pub kb: f64,
}

/// `floor(storage_fraction * gas / 20,000)` slots of 32 bytes each.
pub fn estimate_storage(workflow_gas: u64, pricing: &PricingConfig) -> StorageEstimate {
    estimate_storage_with(workflow_gas, pricing, SSTORE_NEW_GAS)
}

pub fn estimate_storage_with(workflow_gas: u64, pricing: &PricingConfig, sstore_new: u64) -> StorageEstimate {
    let exact = pricing.storage_fraction * workflow_gas as f64 / sstore_new as f64;
    // decimal fractions such as 0.35 are inexact in binary; snap values that
    // sit within rounding error of an integer before flooring
    let nearest = exact.round();
    let sstore_ops = if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        exact.floor()
    } as u64;
    StorageEstimate {
        sstore_ops,
        kb: sstore_ops as f64 * 32.0 / 1024.0,
    }
}
