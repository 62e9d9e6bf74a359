use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use examledger::ledger::{read_entries, verify_entries};
use examledger::workload::{
    estimate_storage, linearity_check, linearity_check_by, price_gas, run_benchmark_with, BenchOptions, BenchReport,
    PricingConfig, ScenarioSpec, Timing,
};
use examledger::zkp::{AcademicRecord, CriteriaSet};
use examledger::{Address, Engine, EngineError, ExamState, Receipt, Role, ScriptId, H256};
use rand::rngs::OsRng;
use rand::RngCore;

use crate::output::{Failure, Output};
use crate::workspace::{ledger_path, load_config, Workspace};
use crate::{BenchCmd, Cli, Command, ExamCmd, GradesheetCmd, LedgerCmd, MarksCmd, PricingArgs, RoleCmd, ScriptCmd, ZkpCmd};

type Res = Result<Output, Failure>;

/// `0x…` parses as an address; anything else is a label hashed into one.
pub fn identity(s: &str) -> anyhow::Result<Address> {
    if s.starts_with("0x") || s.starts_with("0X") {
        s.parse().map_err(|e| anyhow!("bad address {s}: {e}"))
    } else if s.is_empty() {
        bail!("empty identity")
    } else {
        Ok(Address::derive(s))
    }
}

fn script_id(s: &str) -> anyhow::Result<ScriptId> {
    Ok(s.parse::<ScriptId>()?)
}

fn acting(cli: &Cli) -> anyhow::Result<Address> {
    let who = cli
        .acting_as
        .as_deref()
        .ok_or_else(|| anyhow!("this command submits a transaction; pass --as <IDENTITY>"))?;
    identity(who)
}

pub fn run(cli: &Cli) -> Res {
    match &cli.command {
        Command::Bench(cmd) => bench(cli, cmd),
        Command::Ledger(LedgerCmd::Verify) => verify(&cli.data_dir),
        cmd => {
            let mut ws = Workspace::open(&cli.data_dir)?;
            let result = dispatch(cli, &mut ws, cmd);
            // reverted transactions are part of the chain too
            ws.persist()?;
            result
        }
    }
}

/// Turns a receipt into output, or a failure carrying the revert reason.
fn receipt(r: Result<Receipt, EngineError>) -> Res {
    let r = r.map_err(|e| match e {
        EngineError::Rejected(c) => anyhow!("rejected before submission: {c}"),
        other => anyhow!(other),
    })?;
    if !r.is_success() {
        return Err(Failure::Reverted {
            seq: r.tx_seq,
            reason: r.revert_reason.unwrap_or_default(),
        });
    }
    let events: Vec<&str> = r.events.iter().map(|e| e.name.as_str()).collect();
    Ok(Output::new()
        .field("seq", r.tx_seq)
        .field("status", "SUCCESS")
        .field("gas_used", r.gas_used)
        .field("events", events)
        .field("state_root", r.state_root_hash))
}

fn dispatch(cli: &Cli, ws: &mut Workspace, cmd: &Command) -> Res {
    match cmd {
        Command::Role(c) => role(cli, ws, c),
        Command::Exam(c) => exam(cli, ws, c),
        Command::Script(c) => script(cli, ws, c),
        Command::Marks(c) => marks(cli, ws, c),
        Command::Gradesheet(GradesheetCmd::Export { exam, out }) => {
            let csv = ws.engine.export_grade_sheet(*exam).map_err(|e| anyhow!("{e}"))?;
            let path = ws.store.write_grade_sheet(*exam, &csv)?;
            if let Some(out) = out {
                fs::write(out, &csv)?;
            }
            Ok(Output::new()
                .field("exam", exam)
                .field("path", path.display().to_string())
                .body("csv", csv))
        }
        Command::Zkp(c) => zkp(cli, ws, c),
        Command::Ledger(LedgerCmd::Deploy) => {
            let who = acting(cli)?;
            let receipts = ws.engine.deploy(who).map_err(|e| anyhow!(e))?;
            if let Some(bad) = receipts.iter().find(|r| !r.is_success()) {
                return Err(Failure::Reverted {
                    seq: bad.tx_seq,
                    reason: bad.revert_reason.clone().unwrap_or_default(),
                });
            }
            let seqs: Vec<u64> = receipts.iter().map(|r| r.tx_seq).collect();
            let gas: u64 = receipts.iter().map(|r| r.gas_used).sum();
            Ok(Output::new().field("deployer", who).field("seqs", seqs).field("gas_used", gas))
        }
        Command::Ledger(LedgerCmd::Dump { out }) => {
            let mut buf = Vec::new();
            ws.engine.ledger().dump(&mut buf)?;
            let text = String::from_utf8(buf).context("ledger dump is utf-8")?;
            match out {
                Some(path) => {
                    fs::write(path, &text)?;
                    Ok(Output::new()
                        .field("entries", ws.engine.ledger().len())
                        .field("path", path.display().to_string()))
                }
                None => Ok(Output::new().field("entries", ws.engine.ledger().len()).body("dump", text)),
            }
        }
        Command::Ledger(LedgerCmd::Verify) | Command::Bench(_) => unreachable!("handled without a workspace"),
    }
}

fn role(cli: &Cli, ws: &mut Workspace, cmd: &RoleCmd) -> Res {
    match cmd {
        RoleCmd::Grant { address, role } => {
            let role: Role = role.parse().map_err(|e: String| anyhow!(e))?;
            let target = identity(address)?;
            receipt(ws.engine.grant_role(acting(cli)?, target, role)).map(|o| o.field("address", target).field("role", role.as_str()))
        }
        RoleCmd::Revoke { address } => {
            let target = identity(address)?;
            receipt(ws.engine.revoke_role(acting(cli)?, target)).map(|o| o.field("address", target))
        }
        RoleCmd::Show { address } => {
            let a = identity(address)?;
            Ok(Output::new().field("address", a).field("role", ws.engine.role_of(&a).as_str()))
        }
    }
}

fn exam(cli: &Cli, ws: &mut Workspace, cmd: &ExamCmd) -> Res {
    match cmd {
        ExamCmd::Create { exam, title } => {
            receipt(ws.engine.create_exam(acting(cli)?, *exam, title)).map(|o| o.field("exam", exam))
        }
        ExamCmd::Advance { exam, to } => {
            let target: ExamState = to.parse().map_err(|e: String| anyhow!(e))?;
            receipt(ws.engine.advance_state(acting(cli)?, *exam, target))
                .map(|o| o.field("exam", exam).field("state", target.as_str()))
        }
        ExamCmd::State { exam } => {
            let rec = ws.engine.exam(*exam).ok_or_else(|| anyhow!("Unknown exam {exam}"))?;
            Ok(Output::new()
                .field("exam", rec.exam_id)
                .field("title", rec.title)
                .field("state", rec.state.as_str())
                .field("created_by", rec.created_by)
                .field("script_count", rec.script_count))
        }
        ExamCmd::Enroll { exam, student } => {
            let s = identity(student)?;
            receipt(ws.engine.enroll(acting(cli)?, *exam, s)).map(|o| o.field("exam", exam).field("student", s))
        }
    }
}

fn script(cli: &Cli, ws: &mut Workspace, cmd: &ScriptCmd) -> Res {
    match cmd {
        ScriptCmd::Store { exam, student, file } => {
            let student = identity(student)?;
            let bytes = fs::read(file).with_context(|| format!("reading {}", file.display()))?;
            let id = loop {
                let id = ScriptId::generate(&mut OsRng);
                if !ws.store.manifest().entries.contains_key(&id) {
                    break id;
                }
            };
            let stored = ws.store.store_script(&bytes, ws.key.as_bytes())?;
            ws.store.assign(id.clone(), student, *exam, stored.cid.clone());
            ws.store.save_manifest(&ws.key)?;
            Ok(Output::new()
                .field("script_id", id)
                .field("exam", exam)
                .field("cid", stored.cid.as_str())
                .field("content_hash", stored.content_hash))
        }
        ScriptCmd::Register {
            exam,
            script_id: sid,
            student,
            hash,
        } => {
            let sid = script_id(sid)?;
            let entry = ws.store.manifest().entries.get(&sid).cloned();
            let student = match (student, &entry) {
                (Some(s), _) => identity(s)?,
                (None, Some(e)) => e.student,
                (None, None) => return Err(anyhow!("{sid} is not in the manifest; pass --student").into()),
            };
            let content_hash: H256 = match (hash, &entry) {
                (Some(h), _) => h.parse().map_err(|e| anyhow!("bad --hash: {e}"))?,
                (None, Some(e)) => e.cid.anchor(),
                (None, None) => return Err(anyhow!("{sid} is not in the manifest; pass --hash").into()),
            };
            receipt(ws.engine.register_script(acting(cli)?, *exam, sid.clone(), content_hash, student))
                .map(|o| o.field("script_id", sid).field("content_hash", content_hash))
        }
        ScriptCmd::Fetch { script_id: sid, out } => {
            let sid = script_id(sid)?;
            let plain = ws.store.fetch_script(&mut ws.engine.view(), &sid, ws.key.as_bytes())?;
            let o = Output::new().field("script_id", &sid).field("bytes", plain.len());
            match out {
                Some(path) => {
                    fs::write(path, &plain)?;
                    Ok(o.field("path", path.display().to_string()))
                }
                None => Ok(o.body("content", String::from_utf8_lossy(&plain).into_owned())),
            }
        }
        ScriptCmd::Reveal { exam, script_id: sid } => {
            let sid = script_id(sid)?;
            let student = ws.store.reveal_identity(&mut ws.engine.view(), &sid, *exam)?;
            Ok(Output::new().field("script_id", sid).field("exam", exam).field("student", student))
        }
    }
}

fn marks(cli: &Cli, ws: &mut Workspace, cmd: &MarksCmd) -> Res {
    match cmd {
        MarksCmd::Submit {
            exam,
            script_id: sid,
            marks,
        } => {
            let sid = script_id(sid)?;
            receipt(ws.engine.submit_marks(acting(cli)?, *exam, sid.clone(), *marks))
                .map(|o| o.field("script_id", sid).field("marks", marks))
        }
        MarksCmd::Revise {
            exam,
            script_id: sid,
            marks,
            justification,
        } => {
            let sid = script_id(sid)?;
            receipt(ws.engine.revise_marks(acting(cli)?, *exam, sid.clone(), *marks, justification))
                .map(|o| o.field("script_id", sid).field("marks", marks))
        }
        MarksCmd::Publish { exam, script_id: sid } => {
            let sid = script_id(sid)?;
            receipt(ws.engine.publish_result(acting(cli)?, *exam, sid.clone())).map(|o| o.field("script_id", sid))
        }
        MarksCmd::Show { script_id: sid } => {
            let sid = script_id(sid)?;
            let r = ws.engine.get_result(&sid).map_err(|e| anyhow!("{e}"))?;
            Ok(Output::new()
                .field("script_id", sid)
                .field("marks", r.marks)
                .field("status", r.status.as_str()))
        }
        MarksCmd::Audit { script_id: sid } => {
            let sid = script_id(sid)?;
            let trail = ws.engine.get_audit_trail(&sid);
            if trail.is_empty() {
                return Err(anyhow!("No mark record for {sid}").into());
            }
            Ok(Output::new().field("script_id", sid).field("trail", trail))
        }
    }
}

fn parse_salt(s: &str) -> anyhow::Result<H256> {
    s.parse().map_err(|e| anyhow!("bad --salt: {e}"))
}

fn record_path(ws: &Workspace, student: &Address) -> PathBuf {
    ws.records_dir().join(format!("{student}.json"))
}

fn zkp(cli: &Cli, ws: &mut Workspace, cmd: &ZkpCmd) -> Res {
    match cmd {
        ZkpCmd::Commit {
            student,
            exams,
            cgpa,
            marks,
            credits,
            salt,
            record_out,
        } => {
            let student = identity(student)?;
            let salt = match salt {
                Some(s) => parse_salt(s)?,
                None => {
                    let mut b = [0u8; 32];
                    OsRng.fill_bytes(&mut b);
                    H256(b)
                }
            };
            let record = AcademicRecord {
                scaled_cgpa: *cgpa,
                marks: marks.clone(),
                credits: credits.clone(),
                salt,
            };
            let sender = acting(cli)?;
            let (r, hash) = ws
                .engine
                .commit_academic_record(sender, student, &record, exams.clone())
                .map_err(|e| match e {
                    EngineError::Rejected(c) => anyhow!("rejected before submission: {c}"),
                    other => anyhow!(other),
                })?;
            let out = receipt(Ok(r))?;
            let path = record_out.clone().unwrap_or_else(|| record_path(ws, &student));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, serde_json::to_vec_pretty(&record)?)?;
            Ok(out
                .field("student", student)
                .field("commit_hash", hash)
                .field("record", path.display().to_string()))
        }
        ZkpCmd::Criteria {
            id,
            min_cgpa,
            min_grade,
            min_credits,
            pass_mark,
            all_pass,
        } => {
            let c = CriteriaSet {
                criteria_id: *id,
                min_scaled_cgpa: *min_cgpa,
                min_grade_threshold: *min_grade,
                min_total_credits: *min_credits,
                require_all_pass: *all_pass,
                pass_mark: *pass_mark,
            };
            receipt(ws.engine.post_criteria(acting(cli)?, c)).map(|o| o.field("criteria", id))
        }
        ZkpCmd::Prove {
            student,
            criteria,
            record,
        } => {
            let student = identity(student)?;
            let path = record.clone().unwrap_or_else(|| record_path(ws, &student));
            let raw = fs::read(&path).with_context(|| format!("reading record {}", path.display()))?;
            let record: AcademicRecord = serde_json::from_slice(&raw).context("parsing academic record")?;
            let out = receipt(ws.engine.prove_eligibility(acting(cli)?, student, *criteria, record))?;
            let eligible = ws.engine.query_eligibility(*criteria, &student).map_err(|e| anyhow!("{e}"))?;
            Ok(out.field("student", student).field("criteria", criteria).field("eligible", eligible))
        }
        ZkpCmd::Query { criteria, student } => {
            let student = identity(student)?;
            let eligible = ws.engine.query_eligibility(*criteria, &student).map_err(|e| anyhow!("{e}"))?;
            Ok(Output::new()
                .field("student", student)
                .field("criteria", criteria)
                .field("eligible", eligible))
        }
    }
}

fn verify(dir: &Path) -> Res {
    let path = ledger_path(dir);
    if !path.exists() {
        return Ok(Output::new().field("valid", true).field("entries", 0).field("head", H256::ZERO));
    }
    let entries = read_entries(BufReader::new(File::open(&path)?))?;
    let check = verify_entries(&entries);
    if !check.valid {
        let seq = check.first_bad_seq.unwrap_or_default();
        return Err(anyhow!("hash chain broken at entry {seq} of {}", entries.len()).into());
    }
    // the chain is intact; make sure replay reproduces every receipt too
    let config = load_config(dir)?;
    Engine::restore(config.engine, BufReader::new(File::open(&path)?)).map_err(|e| anyhow!("replay failed: {e}"))?;
    let head = entries.last().map(|e| e.entry_hash).unwrap_or(H256::ZERO);
    Ok(Output::new()
        .field("valid", true)
        .field("entries", entries.len())
        .field("head", head))
}

fn pricing(dir: &Path, args: &PricingArgs) -> anyhow::Result<PricingConfig> {
    let mut p = load_config(dir)?.pricing;
    if let Some(v) = args.gas_price_gwei {
        p.gas_price_gwei = v;
    }
    if let Some(v) = args.eth_usd {
        p.eth_usd = v;
    }
    if let Some(v) = args.storage_fraction {
        p.storage_fraction = v;
    }
    p.validate()?;
    Ok(p)
}

fn bench(cli: &Cli, cmd: &BenchCmd) -> Res {
    match cmd {
        BenchCmd::Run {
            scenario,
            out,
            seed,
            zkp_sample,
            wall_clock,
            pricing: args,
        } => {
            let mut spec = match ScenarioSpec::by_name(scenario) {
                Some(s) => s,
                None => {
                    let raw = fs::read(scenario)
                        .with_context(|| format!("`{scenario}` is neither small/medium/large nor a readable scenario file"))?;
                    serde_json::from_slice(&raw).context("parsing scenario file")?
                }
            };
            if let Some(s) = seed {
                spec.rng_seed = *s;
            }
            if let Some(z) = zkp_sample {
                spec.zkp_sample = *z;
            }
            let p = pricing(&cli.data_dir, args)?;
            let dir = out.clone().unwrap_or_else(|| cli.data_dir.join("bench").join(&spec.name));
            let opts = BenchOptions {
                timing: if *wall_clock { Timing::Wall } else { Timing::Logical },
                ..Default::default()
            };
            let r = run_benchmark_with(&spec, &p, &dir, &opts)?;
            Ok(Output::new()
                .field("scenario", &r.scenario)
                .field("exams", r.exams)
                .field("scripts", r.scripts)
                .field("total_tx", r.total_tx)
                .field("workflow_tx", r.workflow_tx)
                .field("failed_tx", r.failed_tx)
                .field("workflow_gas", r.workflow_gas)
                .field("avg_gas_per_tx", r.avg_gas_per_tx)
                .field("cost_usd", r.cost_usd)
                .field("sstore_ops_est", r.sstore_ops_est)
                .field("storage_kb_est", r.storage_kb_est)
                .field("report", dir.join("report.json").display().to_string()))
        }
        BenchCmd::Estimate { gas, pricing: args } => {
            let p = pricing(&cli.data_dir, args)?;
            let cost = price_gas(*gas, &p);
            let storage = estimate_storage(*gas, &p);
            Ok(Output::new()
                .field("workflow_gas", gas)
                .field("cost_eth", cost.eth)
                .field("cost_usd", cost.usd)
                .field("sstore_ops", storage.sstore_ops)
                .field("storage_kb", storage.kb))
        }
        BenchCmd::Linearity { reports } => {
            let mut loaded = Vec::with_capacity(reports.len());
            for path in reports {
                let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let r: BenchReport = serde_json::from_slice(&raw).with_context(|| format!("parsing {}", path.display()))?;
                loaded.push(r);
            }
            let gas = linearity_check(&loaded)?;
            let kb = linearity_check_by(&loaded, |r| r.storage_kb_est)?;
            Ok(Output::new()
                .field("points", loaded.len())
                .field("gas_slope", gas.slope)
                .field("gas_intercept", gas.intercept)
                .field("gas_r_squared", gas.r_squared)
                .field("storage_slope", kb.slope)
                .field("storage_intercept", kb.intercept)
                .field("storage_r_squared", kb.r_squared))
        }
    }
}
