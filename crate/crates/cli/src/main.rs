//! `examledger` command-line front end.
//!
//! Every mutating subcommand submits exactly one ledger transaction as the
//! identity named by `--as`. State lives in `--data-dir` (or
//! `EXAMLEDGER_DATA_DIR`) and is replayed from the ledger file each run.

mod commands;
mod output;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::Failure;

#[derive(Debug, Parser)]
#[command(name = "examledger", version, about = "Examination lifecycle ledger")]
pub struct Cli {
    /// Acting identity: a 0x address, or a label hashed into one.
    #[arg(long = "as", global = true, value_name = "IDENTITY")]
    pub acting_as: Option<String>,

    #[arg(long, global = true, env = "EXAMLEDGER_DATA_DIR", default_value = "examledger-data")]
    pub data_dir: PathBuf,

    /// Print one JSON object per command instead of `key: value` lines.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Role management.
    #[command(subcommand)]
    Role(RoleCmd),
    /// Exam creation, state machine and enrollment.
    #[command(subcommand)]
    Exam(ExamCmd),
    /// Encrypted script storage and hash anchoring.
    #[command(subcommand)]
    Script(ScriptCmd),
    /// Marking, scrutiny and publication.
    #[command(subcommand)]
    Marks(MarksCmd),
    #[command(subcommand)]
    Gradesheet(GradesheetCmd),
    /// Commit-reveal eligibility proofs.
    #[command(subcommand)]
    Zkp(ZkpCmd),
    /// Scenario benchmarks and estimates.
    #[command(subcommand)]
    Bench(BenchCmd),
    #[command(subcommand)]
    Ledger(LedgerCmd),
}

#[derive(Debug, Subcommand)]
pub enum RoleCmd {
    Grant {
        #[arg(long)]
        address: String,
        #[arg(long)]
        role: String,
    },
    Revoke {
        #[arg(long)]
        address: String,
    },
    Show {
        #[arg(long)]
        address: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExamCmd {
    Create {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        title: String,
    },
    Advance {
        #[arg(long)]
        exam: u64,
        /// Target state (ACTIVE, SUBMITTED, SCRUTINIZED, COMPLETED).
        #[arg(long)]
        to: String,
    },
    State {
        #[arg(long)]
        exam: u64,
    },
    Enroll {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        student: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScriptCmd {
    /// Encrypts a scanned topsheet into the blob store and assigns it a
    /// fresh script ID. Off-ledger only.
    Store {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        student: String,
        #[arg(long)]
        file: PathBuf,
    },
    /// Anchors a stored script's content hash on the ledger.
    Register {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        script_id: String,
        /// Defaults to the student recorded at `script store`.
        #[arg(long)]
        student: Option<String>,
        /// Defaults to the anchor of the stored blob.
        #[arg(long)]
        hash: Option<String>,
    },
    /// Decrypts a script after checking it against the ledger anchor.
    Fetch {
        #[arg(long)]
        script_id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maps a script back to its student once the exam is COMPLETED.
    Reveal {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        script_id: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum MarksCmd {
    Submit {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        script_id: String,
        #[arg(long)]
        marks: u64,
    },
    Revise {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        script_id: String,
        #[arg(long)]
        marks: u64,
        #[arg(long)]
        justification: String,
    },
    Publish {
        #[arg(long)]
        exam: u64,
        #[arg(long)]
        script_id: String,
    },
    Show {
        #[arg(long)]
        script_id: String,
    },
    Audit {
        #[arg(long)]
        script_id: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum GradesheetCmd {
    Export {
        #[arg(long)]
        exam: u64,
        /// Also copy the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ZkpCmd {
    /// Anchors a commitment to a student's academic record.
    Commit {
        #[arg(long)]
        student: String,
        #[arg(long, value_delimiter = ',', required = true)]
        exams: Vec<u64>,
        /// CGPA in hundredths (3.50 -> 350).
        #[arg(long)]
        cgpa: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        marks: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        credits: Vec<u64>,
        /// 32-byte 0x salt; random when omitted.
        #[arg(long)]
        salt: Option<String>,
        /// Where to write the record handed to the student.
        #[arg(long)]
        record_out: Option<PathBuf>,
    },
    Criteria {
        #[arg(long)]
        id: u64,
        #[arg(long)]
        min_cgpa: u64,
        #[arg(long)]
        min_grade: u64,
        #[arg(long)]
        min_credits: u64,
        #[arg(long, default_value_t = 40)]
        pass_mark: u64,
        #[arg(long)]
        all_pass: bool,
    },
    /// Reveals a committed record against a criteria set (as the student).
    Prove {
        #[arg(long)]
        student: String,
        #[arg(long)]
        criteria: u64,
        /// Defaults to the record written at commit time.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    Query {
        #[arg(long)]
        criteria: u64,
        #[arg(long)]
        student: String,
    },
}

#[derive(Debug, Args)]
pub struct PricingArgs {
    #[arg(long)]
    pub gas_price_gwei: Option<f64>,
    #[arg(long)]
    pub eth_usd: Option<f64>,
    #[arg(long)]
    pub storage_fraction: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// Runs a built-in (small, medium, large) or JSON-file scenario.
    Run {
        #[arg(long)]
        scenario: String,
        /// Output directory; defaults to <data_dir>/bench/<scenario>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        zkp_sample: Option<u64>,
        /// Report wall-clock time instead of logical time.
        #[arg(long)]
        wall_clock: bool,
        #[command(flatten)]
        pricing: PricingArgs,
    },
    /// Cost and storage estimates for a workflow gas figure.
    Estimate {
        #[arg(long)]
        gas: u64,
        #[command(flatten)]
        pricing: PricingArgs,
    },
    /// Fits workflow gas and storage against script count.
    Linearity {
        /// report.json files from `bench run`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LedgerCmd {
    /// Synthetic deployment entries for the four contracts; the acting
    /// identity becomes the bootstrap deployer.
    Deploy,
    /// Recomputes the hash chain and replays it.
    Verify,
    Dump {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            out.print(cli.json);
            ExitCode::SUCCESS
        }
        Err(failure) => {
            Failure::print(&failure, cli.json);
            ExitCode::FAILURE
        }
    }
}
