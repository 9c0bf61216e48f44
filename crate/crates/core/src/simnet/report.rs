//! Epoch reports, the run summary, report files, and offline verification.
//!
//! Epoch reports chain: the election input of epoch e commits to the SHA-256
//! of epoch e-1's report bytes, so any byte-level tamper breaks the chain.
//! `verify_report_dir` re-verifies every committee ticket, the election rule,
//! the reward-split arithmetic, and the slashing condition from recorded
//! scores alone.

use crate::amount::{Ratio, TokenAmount};
use crate::consensus::{
    attempt_input, election_rule, median_score, vrf_verify, ConsensusOutcome, ElectionRecord,
};
use crate::economy::{worker_share, RewardStatement};
use crate::inference::ModelId;
use crate::ledger::{AccountId, Role, SlashRecord, SupplyTotals};
use crate::simnet::config::ScenarioConfig;
use crate::tiqe::{JudgeKind, QualityScore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("output file {0} exists; pass force to overwrite")]
    WouldOverwrite(PathBuf),
    #[error("report directory {0} has no summary.json")]
    MissingSummary(PathBuf),
}

/// Per-epoch settlement record for one (worker, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerModelReport {
    pub worker: String,
    pub worker_account: AccountId,
    pub model_id: ModelId,
    pub tasks_executed: u64,
    pub batches_settled: u64,
    /// Task id the heavyweight judge sampled this epoch.
    pub llm_sample_task: Option<u64>,
    /// Committee medians of the genuine evaluation components; absent when
    /// no committee member ran an evaluation (e.g. all fixed-score).
    pub score_cross: Option<QualityScore>,
    pub score_llm: Option<QualityScore>,
    pub score_final: Option<QualityScore>,
    pub consensus: ConsensusOutcome,
    pub statements: Vec<RewardStatement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: u64,
    pub election: ElectionRecord,
    pub evaluations: Vec<WorkerModelReport>,
    pub rejections: u64,
    pub slashes: Vec<SlashRecord>,
    pub ledger_totals: SupplyTotals,
    /// Hex SHA-256 of the post-epoch ledger snapshot.
    pub ledger_hash: String,
}

impl EpochReport {
    /// Exact bytes written to disk; their hash seeds the next epoch's
    /// election input.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// Protocol parameters echoed into the summary so reports are
/// self-contained for verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub beta: Ratio,
    pub theta: Ratio,
    pub lambda: Ratio,
    pub threshold: QualityScore,
    pub slash_rate: Ratio,
    pub committee_target: u32,
    pub judge_kind: String,
    pub batch_capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSummary {
    pub name: String,
    pub account: AccountId,
    pub role: Role,
    pub initial_units: u64,
    pub final_free_units: u64,
    pub final_staked_units: u64,
    pub rewards_minted_units: u64,
    pub slashed_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub epochs: u64,
    pub protocol: ProtocolParams,
    pub actors: Vec<ActorSummary>,
    /// Per-worker consensus alpha trajectory across epochs.
    pub alpha: BTreeMap<String, Vec<QualityScore>>,
    pub rejections_total: u64,
    pub totals: SupplyTotals,
}

/// One audit-trace line: a single judge verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: u64,
    pub validator: String,
    pub worker: String,
    pub model: ModelId,
    pub task_id: u64,
    pub judge: JudgeKind,
    pub score: QualityScore,
}

/// Full output of a scenario run.
#[derive(Debug)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub reports: Vec<EpochReport>,
    /// Canonical bytes per epoch report (hash-chained).
    pub report_bytes: Vec<Vec<u8>>,
    pub traces: Vec<Vec<TraceRow>>,
    pub summary: Summary,
}

impl ScenarioRun {
    pub fn total_rewards_minted(&self) -> TokenAmount {
        TokenAmount::from_units(self.summary.totals.minted_units)
    }

    pub fn total_slashed(&self) -> TokenAmount {
        TokenAmount::from_units(self.summary.totals.burned_units)
    }
}

/// Election input for an epoch: previous report hash followed by the epoch
/// hash.
pub fn epoch_base_input(prev_report_hash: &[u8; 32], epoch: u64) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"infermesh-epoch");
    h.update(epoch.to_le_bytes());
    let epoch_hash: [u8; 32] = h.finalize().into();
    let mut input = Vec::with_capacity(64);
    input.extend_from_slice(prev_report_hash);
    input.extend_from_slice(&epoch_hash);
    input
}

/// Hash seeding the first epoch's election input.
pub fn genesis_hash(seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"infermesh-genesis");
    h.update(seed.to_le_bytes());
    h.finalize().into()
}

pub fn sha256_bytes(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

fn epoch_file_name(epoch: u64) -> String {
    format!("epoch_{epoch:04}.json")
}

/// Write a run's artifacts into `dir` (created if absent). Existing files
/// are only overwritten when `force` is set.
pub fn write_run(
    dir: &Path,
    run: &ScenarioRun,
    format: OutputFormat,
    force: bool,
) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        for (report, bytes) in run.reports.iter().zip(&run.report_bytes) {
            files.push((dir.join(epoch_file_name(report.epoch)), bytes.clone()));
        }
        let mut summary = serde_json::to_vec_pretty(&run.summary).expect("summary serializes");
        summary.push(b'\n');
        files.push((dir.join("summary.json"), summary));
        for (report, rows) in run.reports.iter().zip(&run.traces) {
            if rows.is_empty() {
                continue;
            }
            let mut out = Vec::new();
            for row in rows {
                out.extend_from_slice(&serde_json::to_vec(row).expect("trace serializes"));
                out.push(b'\n');
            }
            files.push((dir.join(format!("verdicts_{:04}.jsonl", report.epoch)), out));
        }
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        files.push((dir.join("results.csv"), render_csv(run).into_bytes()));
    }

    for (path, _) in &files {
        if path.exists() && !force {
            return Err(ReportError::WouldOverwrite(path.clone()));
        }
    }
    for (path, bytes) in files {
        fs::write(&path, bytes).map_err(|source| ReportError::Io { path, source })?;
    }
    Ok(())
}

/// Flat CSV for plotting. Columns are fixed:
/// epoch, worker, model, alpha, r_worker, r_validators_total, slashed_total.
pub fn render_csv(run: &ScenarioRun) -> String {
    let mut out = String::from("epoch,worker,model,alpha,r_worker,r_validators_total,slashed_total\n");
    for report in &run.reports {
        for eval in &report.evaluations {
            let r_worker: u128 = eval.statements.iter().map(|s| s.r_worker).sum();
            let r_validators: u128 = eval.statements.iter().map(|s| s.r_validators_total).sum();
            let slashed: u128 = eval.consensus.slashed.iter().map(|(_, a)| *a).sum();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                report.epoch,
                eval.worker,
                eval.model_id,
                eval.consensus.median,
                TokenAmount::from_units(r_worker as u64).display_tokens(),
                TokenAmount::from_units(r_validators as u64).display_tokens(),
                TokenAmount::from_units(slashed as u64).display_tokens(),
            ));
        }
    }
    out
}

/// A report directory loaded back from disk, with raw bytes for hashing.
#[derive(Debug)]
pub struct LoadedRun {
    pub summary: Summary,
    pub epochs: Vec<(EpochReport, Vec<u8>)>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, ReportError> {
    let summary_path = dir.join("summary.json");
    if !summary_path.exists() {
        return Err(ReportError::MissingSummary(dir.to_path_buf()));
    }
    let text = fs::read(&summary_path).map_err(|source| ReportError::Io {
        path: summary_path.clone(),
        source,
    })?;
    let summary: Summary = serde_json::from_slice(&text).map_err(|e| ReportError::Parse {
        path: summary_path,
        detail: e.to_string(),
    })?;
    let mut epochs = Vec::new();
    for epoch in 1..=summary.epochs {
        let path = dir.join(epoch_file_name(epoch));
        let bytes = fs::read(&path).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        let report: EpochReport =
            serde_json::from_slice(&bytes).map_err(|e| ReportError::Parse {
                path: path.clone(),
                detail: e.to_string(),
            })?;
        epochs.push((report, bytes));
    }
    Ok(LoadedRun { summary, epochs })
}

/// One failed verification check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    pub epoch: u64,
    pub check: String,
    pub detail: String,
}

impl std::fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "epoch {}: {}: {}", self.epoch, self.check, self.detail)
    }
}

/// Re-verify a written report directory. Returns every failed check; an
/// empty list means the reports are internally consistent and untampered.
pub fn verify_report_dir(dir: &Path) -> Result<Vec<VerifyFailure>, ReportError> {
    let run = load_run(dir)?;
    Ok(verify_loaded(&run))
}

pub fn verify_loaded(run: &LoadedRun) -> Vec<VerifyFailure> {
    let mut failures = Vec::new();
    let protocol = &run.summary.protocol;
    let mut prev_hash = genesis_hash(run.summary.seed);

    for (report, bytes) in &run.epochs {
        let epoch = report.epoch;

        // hash chain
        let expected_input = epoch_base_input(&prev_hash, epoch);
        if report.election.base_input != expected_input {
            push_failure(
                &mut failures,
                epoch,
                "election-input-chain",
                "election input does not match the previous report hash".into(),
            );
        }
        prev_hash = sha256_bytes(bytes);

        verify_election(&report.election, epoch, &mut failures);

        for eval in &report.evaluations {
            verify_consensus(eval, protocol, epoch, &mut failures);
            verify_statements(eval, protocol, epoch, &mut failures);
        }

        if !report.ledger_totals.conserved() {
            push_failure(
                &mut failures,
                epoch,
                "conservation",
                "free + staked + burned != initial + minted".into(),
            );
        }
    }
    if run.epochs.len() as u64 != run.summary.epochs {
        failures.push(VerifyFailure {
            epoch: 0,
            check: "epoch-count".into(),
            detail: format!(
                "summary declares {} epochs, found {}",
                run.summary.epochs,
                run.epochs.len()
            ),
        });
    }
    failures
}

fn push_failure(failures: &mut Vec<VerifyFailure>, epoch: u64, check: &str, detail: String) {
    failures.push(VerifyFailure {
        epoch,
        check: check.to_string(),
        detail,
    });
}

fn verify_election(election: &ElectionRecord, epoch: u64, failures: &mut Vec<VerifyFailure>) {
    let mut fail = |check: &str, detail: String| {
        failures.push(VerifyFailure {
            epoch,
            check: check.to_string(),
            detail,
        });
    };
    let input = attempt_input(&election.base_input, election.nonce);
    if election.tickets.len() + election.invalid.len() != election.eligible_count as usize {
        fail(
            "election-count",
            format!(
                "{} tickets + {} invalid != {} eligible",
                election.tickets.len(),
                election.invalid.len(),
                election.eligible_count
            ),
        );
    }
    for entry in &election.tickets {
        if !vrf_verify(&entry.pk, &input, &entry.ticket) {
            fail(
                "ticket-verification",
                format!("ticket of validator {} does not verify", entry.account),
            );
        }
    }
    let expected_committee: Vec<AccountId> = if election.fallback {
        let mut ranked: Vec<_> = election.tickets.iter().collect();
        ranked.sort_by(|a, b| a.ticket.r.cmp(&b.ticket.r).then(a.account.cmp(&b.account)));
        let mut c: Vec<AccountId> = ranked
            .iter()
            .take(election.target_size as usize)
            .map(|t| t.account)
            .collect();
        c.sort();
        c
    } else {
        let mut c: Vec<AccountId> = election
            .tickets
            .iter()
            .filter(|t| {
                election_rule(t.ticket.r, election.eligible_count as u64, election.target_size)
            })
            .map(|t| t.account)
            .collect();
        c.sort();
        c
    };
    if expected_committee != election.committee {
        fail(
            "election-rule",
            "recorded committee does not match the election rule over the tickets".into(),
        );
    }
}

fn verify_consensus(
    eval: &WorkerModelReport,
    protocol: &ProtocolParams,
    epoch: u64,
    failures: &mut Vec<VerifyFailure>,
) {
    let mut fail = |check: &str, detail: String| {
        failures.push(VerifyFailure {
            epoch,
            check: check.to_string(),
            detail,
        });
    };
    let outcome = &eval.consensus;
    let mut scores: Vec<QualityScore> = outcome.submitted.iter().map(|(_, s)| *s).collect();
    scores.sort();
    if scores.is_empty() {
        fail("consensus-median", format!("{}: no submissions", eval.worker));
        return;
    }
    let median = median_score(&scores);
    if median != outcome.median {
        fail(
            "consensus-median",
            format!(
                "{}: recorded median {} != recomputed {}",
                eval.worker, outcome.median, median
            ),
        );
    }
    let stake_of = |account: &AccountId| {
        outcome
            .stakes
            .iter()
            .find(|(id, _)| id == account)
            .map(|(_, s)| *s)
            .unwrap_or(TokenAmount::ZERO)
    };
    // every submitter slashed iff deviation beyond threshold, at floor(gamma * stake)
    for (account, score) in &outcome.submitted {
        let deviant = score.abs_diff(outcome.median) > protocol.threshold;
        let slash = outcome.slashed.iter().find(|(id, _)| id == account);
        match (deviant, slash) {
            (true, None) => fail(
                "slashing-condition",
                format!("validator {account} deviates but is not slashed"),
            ),
            (false, Some(_)) => fail(
                "slashing-condition",
                format!("validator {account} within threshold but slashed"),
            ),
            (true, Some((_, amount))) => {
                let expected = stake_of(account)
                    .mul_div_floor(
                        protocol.slash_rate.num as u128,
                        protocol.slash_rate.den as u128,
                    )
                    .unwrap_or(TokenAmount::ZERO);
                if expected != *amount {
                    fail(
                        "slashing-amount",
                        format!(
                            "validator {account}: slash {} != gamma * stake = {}",
                            amount.display_tokens(),
                            expected.display_tokens()
                        ),
                    );
                }
            }
            (false, None) => {}
        }
    }
    // withheld submissions are slashed as deviations
    for member in &outcome.committee {
        let submitted = outcome.submitted.iter().any(|(id, _)| id == member);
        let slashed = outcome.slashed.iter().any(|(id, _)| id == member);
        if !submitted && !slashed {
            fail(
                "slashing-condition",
                format!("committee member {member} neither submitted nor was slashed"),
            );
        }
    }
}

fn verify_statements(
    eval: &WorkerModelReport,
    protocol: &ProtocolParams,
    epoch: u64,
    failures: &mut Vec<VerifyFailure>,
) {
    let mut fail = |check: &str, detail: String| {
        failures.push(VerifyFailure {
            epoch,
            check: check.to_string(),
            detail,
        });
    };
    for st in &eval.statements {
        if st.alpha_used != eval.consensus.median {
            fail(
                "reward-alpha",
                format!("batch {}: alpha differs from consensus median", st.batch_id),
            );
        }
        match st.r_worker.checked_add(st.r_validators_total) {
            Ok(total) if total == st.r_batch => {}
            _ => fail(
                "reward-split",
                format!(
                    "batch {}: r_worker + r_validators_total != r_batch",
                    st.batch_id
                ),
            ),
        }
        match worker_share(st.r_batch, st.alpha_used, protocol.beta) {
            Ok(expected) if expected == st.r_worker => {}
            _ => fail(
                "reward-split",
                format!(
                    "batch {}: r_worker {} violates alpha * (1 - beta) * r_batch",
                    st.batch_id,
                    st.r_worker.display_tokens()
                ),
            ),
        }
        let sum: u128 = st.per_validator.iter().map(|(_, a)| *a).sum();
        if sum != st.r_validators_total.units() as u128 {
            fail(
                "reward-split",
                format!(
                    "batch {}: per-validator shares do not sum to the validator total",
                    st.batch_id
                ),
            );
        }
    }
}
