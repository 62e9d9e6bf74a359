//! Scenario execution and report emission.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::pricing::{estimate_storage_with, price_gas, PricingConfig};
use super::scenario::{generate_scenario, ScenarioSpec, Step};
use super::stats::{linear_fit, LinearFit};
use super::WorkloadError;
use crate::blob_store::{AdminKey, BlobStore};
use crate::engine::{Clock, Engine, EngineConfig, EngineError};
use crate::hash::H256;
use crate::ledger::{ModuleId, TxStatus};

pub const THROUGHPUT_NOTE: &str = "Throughput is measured against this in-process engine, not a block-producing chain; \
     it is not comparable to block-time-bound figures from a local test chain.";

pub const AVG_COST_NOTE: &str = "Avg cost per tx is the exact quotient workflow cost / workflow tx. \
     A published figure of $15.79 for this row does not follow from total cost and count and is not reproduced.";

/// How elapsed time is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Derived from the logical clock step, so reports are reproducible.
    #[default]
    Logical,
    /// Wall-clock time of the execution loop.
    Wall,
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub engine: EngineConfig,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleBreakdown {
    pub module: ModuleId,
    pub contract: String,
    pub tx_count: u64,
    pub total_gas: u64,
    pub avg_gas: f64,
    /// Percentage of workflow gas.
    pub share_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub rng_seed: u64,
    pub exams: u64,
    pub scripts: u64,
    pub revisions: u64,
    pub total_tx: u64,
    pub workflow_tx: u64,
    pub deployment_tx: u64,
    pub failed_tx: u64,
    pub timing: Timing,
    pub elapsed_seconds: f64,
    pub throughput_tps: f64,
    pub workflow_throughput_tps: f64,
    pub total_gas: u64,
    pub workflow_gas: u64,
    pub deployment_gas: u64,
    pub avg_gas_per_tx: f64,
    pub pricing: PricingConfig,
    pub cost_eth: f64,
    pub cost_usd: f64,
    pub avg_cost_per_tx_usd: f64,
    pub sstore_ops_est: u64,
    pub storage_kb_est: f64,
    pub per_module: Vec<ModuleBreakdown>,
    /// Hash registry plus result audit, as a fraction of workflow gas.
    pub registry_audit_share: f64,
    pub chain_valid: bool,
    pub chain_head: H256,
    pub state_root: H256,
    pub notes: Vec<String>,
}

impl BenchReport {
    pub fn module(&self, id: ModuleId) -> Option<&ModuleBreakdown> {
        self.per_module.iter().find(|m| m.module == id)
    }
}

/// Runs `spec` with default engine settings and logical timing. Writes
/// `report.json`, `report.csv`, `ledger.jsonl` and the off-ledger store
/// (`store/`) under `out_dir`.
pub fn run_benchmark(spec: &ScenarioSpec, pricing: &PricingConfig, out_dir: &Path) -> Result<BenchReport, WorkloadError> {
    run_benchmark_with(spec, pricing, out_dir, &BenchOptions::default())
}

pub fn run_benchmark_with(
    spec: &ScenarioSpec,
    pricing: &PricingConfig,
    out_dir: &Path,
    opts: &BenchOptions,
) -> Result<BenchReport, WorkloadError> {
    pricing.validate()?;
    let scenario = generate_scenario(spec)?;
    fs::create_dir_all(out_dir)?;

    let mut engine = Engine::new(opts.engine.clone())?;
    let mut key_rng = ChaCha20Rng::seed_from_u64(spec.rng_seed ^ 0xa11c_e5ee_d000_0001);
    let key = AdminKey::generate(&mut key_rng);
    let store_dir = out_dir.join("store");
    if store_dir.exists() {
        fs::remove_dir_all(&store_dir)?;
    }
    let blob_rng = ChaCha20Rng::seed_from_u64(spec.rng_seed ^ 0xb10b_5eed_0000_0002);
    let mut store = BlobStore::open(&store_dir, &key, Box::new(blob_rng))?;

    let started = Instant::now();
    for (i, step) in scenario.steps.iter().enumerate() {
        let at = |source: EngineError| WorkloadError::Engine { step: i, source };
        match step {
            Step::Tx { sender, call } => {
                engine.submit(*sender, call).map_err(at)?;
            }
            Step::StoreScript {
                sender,
                exam_id,
                script_id,
                student,
                topsheet,
            } => {
                let stored = store.store_script(topsheet, key.as_bytes())?;
                store.assign(script_id.clone(), *student, *exam_id, stored.cid);
                engine
                    .register_script(*sender, *exam_id, script_id.clone(), stored.content_hash, *student)
                    .map_err(at)?;
            }
            Step::ExportGradeSheet { exam_id } => {
                // a failed export shows up as reverted publishes; nothing to write
                if let Ok(csv) = engine.export_grade_sheet(*exam_id) {
                    store.write_grade_sheet(*exam_id, &csv)?;
                }
            }
            Step::CommitRecord {
                sender,
                student,
                record,
                exam_ids,
            } => {
                engine
                    .commit_academic_record(*sender, *student, record, exam_ids.clone())
                    .map_err(at)?;
            }
        }
    }
    let wall = started.elapsed().as_secs_f64();
    store.save_manifest(&key)?;

    let report = build_report(spec, &scenario.scripts_per_exam, &engine, pricing, opts, wall);

    let ledger_file = BufWriter::new(fs::File::create(out_dir.join("ledger.jsonl"))?);
    engine.ledger().dump(ledger_file)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out_dir.join("report.json"), json)?;
    fs::write(out_dir.join("report.csv"), report_csv(&report))?;
    Ok(report)
}

fn build_report(
    spec: &ScenarioSpec,
    per_exam: &[u64],
    engine: &Engine,
    pricing: &PricingConfig,
    opts: &BenchOptions,
    wall_seconds: f64,
) -> BenchReport {
    let ledger = engine.ledger();
    let gas = ledger.gas_report();
    let failed_tx = ledger
        .entries()
        .iter()
        .filter(|e| e.receipt.status == TxStatus::Reverted)
        .count() as u64;
    let total_tx = gas.all.tx_count;
    let workflow_tx = gas.workflow.tx_count;
    let workflow_gas = gas.workflow.total_gas;

    let (timing, elapsed_seconds) = match (opts.timing, opts.engine.clock) {
        (Timing::Logical, Clock::Logical { step_ms, .. }) => (Timing::Logical, total_tx as f64 * step_ms as f64 / 1000.0),
        _ => (Timing::Wall, wall_seconds),
    };
    let rate = |n: u64| if elapsed_seconds > 0.0 { n as f64 / elapsed_seconds } else { 0.0 };

    let per_module: Vec<ModuleBreakdown> = ModuleId::ALL
        .iter()
        .map(|id| {
            let m = gas.modules.get(id).cloned().unwrap_or_default();
            ModuleBreakdown {
                module: *id,
                contract: id.contract_name().to_string(),
                tx_count: m.tx_count,
                total_gas: m.total_gas,
                avg_gas: m.avg_gas,
                share_pct: percent(m.total_gas, workflow_gas),
            }
        })
        .collect();
    let registry_audit: u64 = per_module
        .iter()
        .filter(|m| matches!(m.module, ModuleId::HashRegistry | ModuleId::ResultAudit))
        .map(|m| m.total_gas)
        .sum();

    let cost = price_gas(workflow_gas, pricing);
    let storage = estimate_storage_with(workflow_gas, pricing, ledger.config().gas.sstore_new);
    let avg = |x: f64| if workflow_tx > 0 { x / workflow_tx as f64 } else { 0.0 };

    let mut notes = vec![THROUGHPUT_NOTE.to_string(), AVG_COST_NOTE.to_string()];
    if timing == Timing::Logical {
        notes.push("Elapsed time is logical: transaction count times the clock step.".to_string());
    }

    BenchReport {
        scenario: spec.name.clone(),
        rng_seed: spec.rng_seed,
        exams: per_exam.len() as u64,
        scripts: per_exam.iter().sum(),
        revisions: spec.revision_count(),
        total_tx,
        workflow_tx,
        deployment_tx: gas.deployments.tx_count,
        failed_tx,
        timing,
        elapsed_seconds,
        throughput_tps: rate(total_tx),
        workflow_throughput_tps: rate(workflow_tx),
        total_gas: gas.all.total_gas,
        workflow_gas,
        deployment_gas: gas.deployments.total_gas,
        avg_gas_per_tx: avg(workflow_gas as f64),
        pricing: *pricing,
        cost_eth: cost.eth,
        cost_usd: cost.usd,
        avg_cost_per_tx_usd: avg(cost.usd),
        sstore_ops_est: storage.sstore_ops,
        storage_kb_est: storage.kb,
        per_module,
        registry_audit_share: if workflow_gas > 0 { registry_audit as f64 / workflow_gas as f64 } else { 0.0 },
        chain_valid: ledger.verify_chain().valid,
        chain_head: ledger.head_hash(),
        state_root: ledger.storage().root(),
        notes,
    }
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// One row per metric, in the order of the published large-scenario table.
pub fn report_csv(r: &BenchReport) -> String {
    let mut rows: Vec<[String; 4]> = Vec::new();
    let mut row = |section: &str, metric: &str, value: String, note: &str| {
        rows.push([section.to_string(), metric.to_string(), value, note.to_string()]);
    };
    let tp = "throughput";
    row(tp, "Total transactions", r.total_tx.to_string(), "incl. deployments");
    row(tp, "Workflow transactions", r.workflow_tx.to_string(), "excl. deployments");
    row(tp, "Failed transactions", r.failed_tx.to_string(), "");
    let timing = match r.timing {
        Timing::Logical => "logical clock",
        Timing::Wall => "wall clock",
    };
    row(tp, "Elapsed time (s)", format!("{:.3}", r.elapsed_seconds), timing);
    row(tp, "Throughput (total) tx/s", format!("{:.2}", r.throughput_tps), "see footnote");
    row(tp, "Throughput (workflow) tx/s", format!("{:.2}", r.workflow_throughput_tps), "see footnote");

    let c = "cost";
    row(c, "Total gas used (all)", r.total_gas.to_string(), "incl. deployments");
    row(c, "Workflow gas used", r.workflow_gas.to_string(), "excl. deployments");
    row(c, "Avg gas per workflow tx", format!("{:.2}", r.avg_gas_per_tx), "");
    row(c, "Workflow cost (ETH)", format!("{:.6}", r.cost_eth), &format!("@ {} gwei", r.pricing.gas_price_gwei));
    row(c, "Workflow cost (USD)", format!("{:.2}", r.cost_usd), &format!("@ ETH = ${}", r.pricing.eth_usd));
    row(c, "Avg cost per tx (USD)", format!("{:.6}", r.avg_cost_per_tx_usd), "exact quotient; see footnote");

    let s = "storage";
    row(s, "Storage fraction of workflow gas", format!("{}", r.pricing.storage_fraction), "");
    row(s, "SSTORE operations", r.sstore_ops_est.to_string(), "floor(fraction x G / sstore_new)");
    row(s, "Execution storage written (KB)", format!("{:.2}", r.storage_kb_est), "ops x 32 bytes");

    let b = "breakdown";
    let mut modules: Vec<&ModuleBreakdown> = r.per_module.iter().filter(|m| m.tx_count > 0).collect();
    modules.sort_by(|x, y| y.total_gas.cmp(&x.total_gas));
    for m in modules {
        row(
            b,
            &m.contract,
            m.total_gas.to_string(),
            &format!("{:.1}%; {} tx; {:.0} avg gas/tx", m.share_pct, m.tx_count, m.avg_gas),
        );
    }
    row(b, "Deployments", r.deployment_gas.to_string(), &format!("{} contracts", r.deployment_tx));

    let f = "footnote";
    row(f, "Throughput", String::new(), THROUGHPUT_NOTE);
    row(f, "Avg cost per tx", String::new(), AVG_COST_NOTE);

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["section", "metric", "value", "note"]).expect("in-memory csv write");
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf8 csv")
}

/// Least-squares fit of workflow gas against script count.
pub fn linearity_check(reports: &[BenchReport]) -> Result<LinearFit, WorkloadError> {
    linearity_check_by(reports, |r| r.workflow_gas as f64)
}

/// Fit of an arbitrary report metric against script count.
pub fn linearity_check_by(reports: &[BenchReport], metric: impl Fn(&BenchReport) -> f64) -> Result<LinearFit, WorkloadError> {
    let points: Vec<(f64, f64)> = reports.iter().map(|r| (r.scripts as f64, metric(r))).collect();
    linear_fit(&points)
}
