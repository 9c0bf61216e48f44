//! Deterministic epoch engine: committee election, traffic batching, worker
//! execution, quality evaluation, score consensus, and settlement.
//!
//! Every random draw comes from a named substream of the scenario seed
//! (`traffic`, `judge`, `sample`, `behavior`); validator VRF keys derive from
//! the seed at bootstrap. Identical configs therefore produce byte-identical
//! report trees.

use crate::amount::{Ratio, TokenAmount};
use crate::consensus::{
    consensus_on_score, elect_committee, vrf_evaluate, CommitteeConfig, ConsensusError,
    VrfKeypair,
};
use crate::economy::{
    distribute_batch_reward, price_task, settle_muf, task_reward, Batch, EconomyError,
    InferenceTask, PricingParams, RewardStatement,
};
use crate::inference::{
    infer_degraded, infer_sharded, infer_single, InferenceError, ModelDescriptor, ModelId,
    TokenSequence,
};
use crate::ledger::{AccountId, Ledger, LedgerError, Role, SlashReason, SlashRecord};
use crate::rng::DetRng;
use crate::simnet::config::{
    ratio, tokens, BehaviorConfig, HonestyConfig, JudgeKindConfig, ScenarioConfig,
};
use crate::simnet::gateway::Gateway;
use crate::simnet::report::{
    epoch_base_input, genesis_hash, sha256_bytes, ActorSummary, EpochReport, ProtocolParams,
    ScenarioRun, Summary, TraceRow, WorkerModelReport,
};
use crate::tiqe::{
    EpochScoreAccumulator, EvalSample, Judge, QualityScore, ReferenceCrossJudge,
    ReferenceLlmJudge, StochasticCrossJudge, StochasticLlmJudge, TiqeError, SCORE_SCALE,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario config: {}", issues.join("; "))]
    ConfigInvalid { issues: Vec<String> },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Economy(#[from] EconomyError),
    #[error(transparent)]
    Tiqe(#[from] TiqeError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("ledger conservation violated after epoch {epoch}")]
    Conservation { epoch: u64 },
}

/// Worker dishonesty over time.
#[derive(Debug, Clone, Copy)]
enum Honesty {
    Honest,
    Degraded(f64),
    LazyAfterEpoch { epoch: u64, level: f64 },
}

impl Honesty {
    /// Degradation level in force at `epoch`, if any.
    fn active_level(self, epoch: u64) -> Option<f64> {
        match self {
            Honesty::Honest => None,
            Honesty::Degraded(level) => Some(level),
            Honesty::LazyAfterEpoch { epoch: turn, level } => (epoch >= turn).then_some(level),
        }
    }
}

/// Validator scoring behavior with resolved fixed-point parameters.
#[derive(Debug, Clone, Copy)]
enum Behavior {
    Honest,
    FixedScore(QualityScore),
    OverScore(QualityScore),
    UnderScore(QualityScore),
    RandomScore,
}

impl Behavior {
    fn evaluates(self) -> bool {
        matches!(
            self,
            Behavior::Honest | Behavior::OverScore(_) | Behavior::UnderScore(_)
        )
    }
}

struct ModelEntry {
    descriptor: ModelDescriptor,
    provider: AccountId,
    provider_name: String,
}

struct WorkerActor {
    account: AccountId,
    name: String,
    model_idx: usize,
    honesty: Honesty,
}

struct ValidatorActor {
    account: AccountId,
    name: String,
    keypair: VrfKeypair,
    behavior: Behavior,
}

struct TrafficParams {
    requests_per_epoch: u32,
    prompt_len: (u64, u64),
    response_len: (u64, u64),
    batch_capacity: u32,
    flush_timeout_ticks: u64,
    /// Direct-reward draw range in millitokens, when formula pricing is off.
    direct_millitokens: Option<(u64, u64)>,
}

struct ExecutedBatch {
    batch: Batch,
    references: Vec<TokenSequence>,
    degraded: bool,
}

struct Evaluation {
    cross: QualityScore,
    llm: QualityScore,
    final_score: QualityScore,
}

/// Genuine evaluation per (validator index, worker index).
type EvaluationMap = BTreeMap<(usize, usize), Evaluation>;

/// A validated, bootstrapped simulation ready to run.
pub struct Simulation {
    config: ScenarioConfig,
    ledger: Ledger,
    pricing: PricingParams,
    lambda: Ratio,
    threshold: QualityScore,
    slash_rate: Ratio,
    committee_target: u32,
    models: Vec<ModelEntry>,
    workers: Vec<WorkerActor>,
    validators: Vec<ValidatorActor>,
    users: Vec<(AccountId, String)>,
    treasury: AccountId,
    traffic: TrafficParams,
    cross_judge: Box<dyn Judge>,
    llm_judge: Box<dyn Judge>,
    trace: bool,
    prev_report_hash: [u8; 32],
    next_task_id: u64,
    next_batch_id: u64,
    rewards_minted: BTreeMap<AccountId, u64>,
    alpha_trajectories: BTreeMap<String, Vec<QualityScore>>,
    rejections_total: u64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config
            .validate()
            .map_err(|issues| SimError::ConfigInvalid { issues })?;

        let seed = config.seed;
        let mut ledger = Ledger::new(seed);
        let treasury = ledger.open_account(Role::ServiceUser, TokenAmount::ZERO);

        let users: Vec<(AccountId, String)> = (0..config.traffic.users)
            .map(|i| {
                let balance = tokens(config.traffic.user_balance_tokens).expect("validated");
                (
                    ledger.open_account(Role::ServiceUser, balance),
                    format!("user-{i}"),
                )
            })
            .collect();

        let mut workers = Vec::with_capacity(config.workers.len());
        for (i, w) in config.workers.iter().enumerate() {
            let account =
                ledger.open_account(Role::Worker, tokens(w.balance_tokens).expect("validated"));
            let model_idx = config
                .models
                .iter()
                .position(|m| m.id == w.model)
                .expect("validated");
            let honesty = match w.honesty {
                HonestyConfig::Honest => Honesty::Honest,
                HonestyConfig::Degraded(level) => Honesty::Degraded(level),
                HonestyConfig::LazyAfterEpoch { epoch, level } => {
                    Honesty::LazyAfterEpoch { epoch, level }
                }
            };
            workers.push(WorkerActor {
                account,
                name: w.name.clone().unwrap_or_else(|| format!("worker-{i}")),
                model_idx,
                honesty,
            });
        }

        let mut models = Vec::with_capacity(config.models.len());
        for m in &config.models {
            let (provider, provider_name) = match m.provider_worker {
                Some(w_idx) => (workers[w_idx].account, workers[w_idx].name.clone()),
                None => (
                    ledger.open_account(
                        Role::ModelProvider,
                        tokens(m.provider_balance_tokens).expect("validated"),
                    ),
                    format!("provider-{}", m.id),
                ),
            };
            models.push(ModelEntry {
                descriptor: ModelDescriptor {
                    model_id: ModelId(m.id.clone()),
                    scale_factor: ratio(m.scale).expect("validated"),
                    n_shards: m.n_shards,
                    seed: m.seed,
                    usage_fee: tokens(m.usage_fee_tokens).expect("validated"),
                },
                provider,
                provider_name,
            });
        }

        let mut validators = Vec::with_capacity(config.validators.len());
        for (i, v) in config.validators.iter().enumerate() {
            let account =
                ledger.open_account(Role::Validator, tokens(v.balance_tokens).expect("validated"));
            ledger.stake(&account, tokens(v.stake_tokens).expect("validated"), 0)?;
            let mut material = Vec::new();
            material.extend_from_slice(&seed.to_le_bytes());
            material.extend_from_slice(b"validator");
            material.extend_from_slice(&(i as u64).to_le_bytes());
            let score = |x: f64| QualityScore::from_decimal_f64(x).expect("validated");
            let behavior = match v.behavior {
                BehaviorConfig::Honest => Behavior::Honest,
                BehaviorConfig::FixedScore(s) => Behavior::FixedScore(score(s)),
                BehaviorConfig::OverScore(b) => Behavior::OverScore(score(b)),
                BehaviorConfig::UnderScore(b) => Behavior::UnderScore(score(b)),
                BehaviorConfig::RandomScore => Behavior::RandomScore,
            };
            validators.push(ValidatorActor {
                account,
                name: v.name.clone().unwrap_or_else(|| format!("validator-{i}")),
                keypair: VrfKeypair::from_seed_material(&material),
                behavior,
            });
        }

        let pricing = PricingParams {
            delta: ratio(config.pricing.delta).expect("validated"),
            c_in: tokens(config.pricing.c_in_tokens).expect("validated"),
            c_out: tokens(config.pricing.c_out_tokens).expect("validated"),
            theta: ratio(config.pricing.theta).expect("validated"),
            beta: ratio(config.pricing.beta).expect("validated"),
        };

        let (cross_judge, llm_judge): (Box<dyn Judge>, Box<dyn Judge>) = match config.judge.kind {
            JudgeKindConfig::Reference => (Box::new(ReferenceCrossJudge), Box::new(ReferenceLlmJudge)),
            JudgeKindConfig::Stochastic => {
                let score = |x: f64| QualityScore::from_decimal_f64(x).expect("validated");
                (
                    Box::new(StochasticCrossJudge {
                        tp: score(config.judge.cross_tp),
                        fp: score(config.judge.cross_fp),
                    }),
                    Box::new(StochasticLlmJudge {
                        tp: score(config.judge.llm_tp),
                        fp: score(config.judge.llm_fp),
                    }),
                )
            }
        };

        let traffic = TrafficParams {
            requests_per_epoch: config.traffic.requests_per_epoch,
            prompt_len: (config.traffic.prompt_len[0] as u64, config.traffic.prompt_len[1] as u64),
            response_len: (
                config.traffic.response_len[0] as u64,
                config.traffic.response_len[1] as u64,
            ),
            batch_capacity: config.traffic.batch_capacity,
            flush_timeout_ticks: config.traffic.flush_timeout_ticks,
            direct_millitokens: config.traffic.direct_reward.as_ref().map(|d| {
                let lo = tokens(d.min_tokens).expect("validated").units() / 1000;
                let hi = tokens(d.max_tokens).expect("validated").units() / 1000;
                (lo, hi)
            }),
        };

        Ok(Self {
            prev_report_hash: genesis_hash(seed),
            lambda: ratio(config.judge.lambda).expect("validated"),
            threshold: QualityScore::from_decimal_f64(config.committee.threshold)
                .expect("validated"),
            slash_rate: ratio(config.committee.slash_rate).expect("validated"),
            committee_target: config.committee.target_size,
            trace: config.judge.trace,
            config,
            ledger,
            pricing,
            models,
            workers,
            validators,
            users,
            treasury,
            traffic,
            cross_judge,
            llm_judge,
            next_task_id: 0,
            next_batch_id: 0,
            rewards_minted: BTreeMap::new(),
            alpha_trajectories: BTreeMap::new(),
            rejections_total: 0,
        })
    }

    /// Run every epoch and assemble the summary.
    pub fn run(mut self) -> Result<ScenarioRun, SimError> {
        let epochs = self.config.epochs;
        let mut reports = Vec::with_capacity(epochs as usize);
        let mut report_bytes = Vec::with_capacity(epochs as usize);
        let mut traces = Vec::with_capacity(epochs as usize);
        for epoch in 1..=epochs {
            let (report, bytes, rows) = self.run_epoch(epoch)?;
            reports.push(report);
            report_bytes.push(bytes);
            traces.push(rows);
        }
        let summary = self.build_summary();
        Ok(ScenarioRun {
            config: self.config,
            reports,
            report_bytes,
            traces,
            summary,
        })
    }

    fn mint(&mut self, to: &AccountId, amount: TokenAmount) -> Result<(), SimError> {
        self.ledger.mint(to, amount)?;
        *self.rewards_minted.entry(*to).or_insert(0) += amount.units();
        Ok(())
    }

    fn committee_stakes(&self, committee: &[AccountId]) -> Vec<(AccountId, TokenAmount)> {
        committee
            .iter()
            .map(|a| (*a, self.ledger.staked_balance(a)))
            .collect()
    }

    fn run_epoch(
        &mut self,
        epoch: u64,
    ) -> Result<(EpochReport, Vec<u8>, Vec<TraceRow>), SimError> {
        // 1. committee election over validators that still hold stake
        let eligible: Vec<AccountId> = self
            .validators
            .iter()
            .filter(|v| !self.ledger.staked_balance(&v.account).is_zero())
            .map(|v| v.account)
            .collect();
        let committee_cfg = CommitteeConfig {
            eligible,
            target_size: self.committee_target.min(self.validators.len() as u32),
            threshold: self.threshold,
            slash_rate: self.slash_rate,
        };
        let base_input = epoch_base_input(&self.prev_report_hash, epoch);
        let validators = &self.validators;
        let election = elect_committee(
            &committee_cfg,
            |account, input| {
                let v = validators
                    .iter()
                    .find(|v| &v.account == account)
                    .expect("eligible validators exist");
                (v.keypair.pk, vrf_evaluate(&v.keypair, input))
            },
            &base_input,
        )?;

        // 2. traffic generation and gateway batching; the same request list
        // goes to every model
        let (flushed, rejections) = self.generate_traffic(epoch)?;
        self.rejections_total += rejections;

        // 3. batch execution, round-robin over the workers serving each model
        let executed = self.execute_batches(flushed, epoch)?;

        // 4-5. committee evaluation and score submission
        let committee = election.committee.clone();
        let committee_idx: Vec<usize> = committee
            .iter()
            .map(|a| {
                self.validators
                    .iter()
                    .position(|v| &v.account == a)
                    .expect("committee members are validators")
            })
            .collect();
        let sample_points = sample_points(&executed, self.config.seed, epoch);
        let (evals, trace_rows) =
            self.evaluate(&executed, &committee_idx, &sample_points, epoch)?;

        // 6. consensus and slashing per (worker, model)
        let mut outcomes: BTreeMap<usize, crate::consensus::ConsensusOutcome> = BTreeMap::new();
        let mut epoch_slashes: Vec<SlashRecord> = Vec::new();
        let mut behavior_rngs: BTreeMap<usize, DetRng> = BTreeMap::new();
        for &w_idx in executed.keys() {
            let mut submitted = Vec::with_capacity(committee.len());
            for (ci, &v_idx) in committee_idx.iter().enumerate() {
                let score = match self.validators[v_idx].behavior {
                    Behavior::Honest => evals[&(v_idx, w_idx)].final_score,
                    Behavior::FixedScore(s) => s,
                    Behavior::OverScore(bias) => {
                        evals[&(v_idx, w_idx)].final_score.saturating_add(bias)
                    }
                    Behavior::UnderScore(bias) => {
                        evals[&(v_idx, w_idx)].final_score.saturating_sub(bias)
                    }
                    Behavior::RandomScore => {
                        let seed = self.config.seed;
                        let rng = behavior_rngs.entry(v_idx).or_insert_with(|| {
                            DetRng::substream(seed, "behavior", epoch, v_idx as u64)
                        });
                        QualityScore::from_raw(rng.range_inclusive(0, SCORE_SCALE))
                    }
                };
                submitted.push((committee[ci], score));
            }
            let stakes_before = self.committee_stakes(&committee);
            let outcome =
                consensus_on_score(epoch, &committee, &submitted, &stakes_before, &committee_cfg)?;
            for (account, amount) in &outcome.slashed {
                let reason = if outcome.non_submitters.contains(account) {
                    SlashReason::NonSubmission
                } else {
                    SlashReason::ScoreDeviation
                };
                epoch_slashes.push(self.ledger.slash(account, *amount, epoch, reason)?);
            }
            outcomes.insert(w_idx, outcome);
        }

        // 7. settlement: batch rewards at the consensus alpha, then usage fees
        let mut evaluations = Vec::new();
        for (&w_idx, batches) in &executed {
            let outcome = outcomes.remove(&w_idx).expect("consensus ran");
            let alpha = outcome.median;
            let stakes_now = self.committee_stakes(&committee);
            let worker_account = self.workers[w_idx].account;
            let model_idx = self.workers[w_idx].model_idx;
            let mut statements: Vec<RewardStatement> = Vec::with_capacity(batches.len());
            for eb in batches {
                let mut st =
                    distribute_batch_reward(&eb.batch, alpha, self.pricing.beta, &stakes_now)?;
                self.mint(&worker_account, st.r_worker)?;
                let shares = st.per_validator.clone();
                for (account, amount) in shares {
                    self.mint(&account, amount)?;
                }
                let provider = self.models[model_idx].provider;
                let muf = settle_muf(
                    &mut self.ledger,
                    &self.models[model_idx].descriptor.clone(),
                    &worker_account,
                    &provider,
                )?;
                st.muf_paid = muf.paid;
                st.muf_deficit = muf.deficit;
                statements.push(st);
            }

            let components = |pick: fn(&Evaluation) -> QualityScore| {
                let mut values: Vec<QualityScore> = committee_idx
                    .iter()
                    .filter_map(|v_idx| evals.get(&(*v_idx, w_idx)).map(pick))
                    .collect();
                values.sort();
                (!values.is_empty()).then(|| crate::consensus::median_score(&values))
            };
            let worker_name = self.workers[w_idx].name.clone();
            self.alpha_trajectories
                .entry(worker_name.clone())
                .or_default()
                .push(alpha);
            evaluations.push(WorkerModelReport {
                worker: worker_name,
                worker_account,
                model_id: self.models[model_idx].descriptor.model_id.clone(),
                tasks_executed: batches.iter().map(|b| b.batch.tasks.len() as u64).sum(),
                batches_settled: batches.len() as u64,
                llm_sample_task: sample_points.get(&w_idx).map(|&(bi, ti)| {
                    batches[bi].batch.tasks[ti].task_id
                }),
                score_cross: components(|e| e.cross),
                score_llm: components(|e| e.llm),
                score_final: components(|e| e.final_score),
                consensus: outcome,
                statements,
            });
        }

        // 8. conservation gate and report emission
        let totals = self.ledger.totals();
        if !totals.conserved() {
            return Err(SimError::Conservation { epoch });
        }
        let report = EpochReport {
            epoch,
            election,
            evaluations,
            rejections,
            slashes: epoch_slashes,
            ledger_totals: totals,
            ledger_hash: hex::encode(self.ledger.snapshot().hash()),
        };
        let bytes = report.canonical_bytes();
        self.prev_report_hash = sha256_bytes(&bytes);
        Ok((report, bytes, trace_rows))
    }

    /// Generate one epoch of traffic. Requests arrive one per tick; each is
    /// priced and submitted to every model, debiting the user up front.
    fn generate_traffic(
        &mut self,
        epoch: u64,
    ) -> Result<(Vec<crate::simnet::gateway::FlushedBatch>, u64), SimError> {
        let mut gateway = Gateway::new(
            self.traffic.batch_capacity,
            self.traffic.flush_timeout_ticks,
        );
        let mut rng = DetRng::substream(self.config.seed, "traffic", epoch, 0);
        let mut rejections = 0u64;
        let mut flushed = Vec::new();
        let requests = self.traffic.requests_per_epoch as u64;
        for i in 0..requests {
            flushed.extend(gateway.advance(i + 1));
            let user = self.users[(i % self.users.len() as u64) as usize].0;
            let prompt_len = rng.range_inclusive(self.traffic.prompt_len.0, self.traffic.prompt_len.1);
            let response_len =
                rng.range_inclusive(self.traffic.response_len.0, self.traffic.response_len.1);
            let prompt = TokenSequence::new((0..prompt_len).map(|_| rng.token()).collect())
                .expect("validated lengths");
            let direct_units = self
                .traffic
                .direct_millitokens
                .map(|(lo, hi)| rng.range_inclusive(lo, hi) * 1000);
            for model in &self.models {
                let cost = match direct_units {
                    Some(units) => TokenAmount::from_units(units),
                    None => price_task(
                        &self.pricing,
                        &model.descriptor,
                        prompt_len as u32,
                        response_len as u32,
                    )?,
                };
                let reward = task_reward(&self.pricing, cost)?;
                match self.ledger.transfer(&user, &self.treasury, cost) {
                    Ok(()) => {
                        let task = InferenceTask {
                            task_id: self.next_task_id,
                            model_id: model.descriptor.model_id.clone(),
                            prompt_len: prompt_len as u32,
                            response_len: response_len as u32,
                            cost,
                            reward,
                            prompt: prompt.clone(),
                            response: TokenSequence::new(Vec::new()).expect("empty fits"),
                        };
                        self.next_task_id += 1;
                        flushed.extend(gateway.submit(task));
                    }
                    Err(LedgerError::InsufficientBalance { .. }) => rejections += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        flushed.extend(gateway.advance(requests + self.traffic.flush_timeout_ticks + 1));
        flushed.extend(gateway.flush_all());
        Ok((flushed, rejections))
    }

    fn execute_batches(
        &mut self,
        flushed: Vec<crate::simnet::gateway::FlushedBatch>,
        epoch: u64,
    ) -> Result<BTreeMap<usize, Vec<ExecutedBatch>>, SimError> {
        let mut round_robin = vec![0usize; self.models.len()];
        let mut executed: BTreeMap<usize, Vec<ExecutedBatch>> = BTreeMap::new();
        for fb in flushed {
            let model_idx = self
                .models
                .iter()
                .position(|m| m.descriptor.model_id == fb.model_id)
                .expect("batches come from configured models");
            let serving: Vec<usize> = self
                .workers
                .iter()
                .enumerate()
                .filter(|(_, w)| w.model_idx == model_idx)
                .map(|(i, _)| i)
                .collect();
            let w_idx = serving[round_robin[model_idx] % serving.len()];
            round_robin[model_idx] += 1;

            let descriptor = self.models[model_idx].descriptor.clone();
            let level = self.workers[w_idx].honesty.active_level(epoch);
            let mut tasks = fb.tasks;
            let mut references = Vec::with_capacity(tasks.len());
            for task in &mut tasks {
                let response_len = task.response_len as usize;
                let reference = infer_single(&descriptor, &task.prompt, response_len)?;
                task.response = match level {
                    Some(level) => {
                        infer_degraded(&descriptor, &task.prompt, response_len, level)?
                    }
                    None if descriptor.n_shards > 1 => {
                        infer_sharded(&descriptor, &task.prompt, response_len)?
                    }
                    None => reference.clone(),
                };
                references.push(reference);
            }
            let batch = Batch {
                batch_id: self.next_batch_id,
                model_id: fb.model_id,
                worker: self.workers[w_idx].account,
                tasks,
                epoch,
            };
            self.next_batch_id += 1;
            executed.entry(w_idx).or_default().push(ExecutedBatch {
                batch,
                references,
                degraded: level.is_some(),
            });
        }
        Ok(executed)
    }

    /// Evaluate every batch with the cross judge and the sampled task with
    /// the heavyweight judge, per evaluating committee member.
    fn evaluate(
        &self,
        executed: &BTreeMap<usize, Vec<ExecutedBatch>>,
        committee_idx: &[usize],
        sample_points: &BTreeMap<usize, (usize, usize)>,
        epoch: u64,
    ) -> Result<(EvaluationMap, Vec<TraceRow>), SimError> {
        let mut evals = BTreeMap::new();
        let mut rows = Vec::new();
        for &v_idx in committee_idx {
            let validator = &self.validators[v_idx];
            if !validator.behavior.evaluates() {
                continue;
            }
            let mut rng = DetRng::substream(self.config.seed, "judge", epoch, v_idx as u64);
            for (&w_idx, batches) in executed {
                let mut acc = EpochScoreAccumulator::new(self.lambda);
                for eb in batches {
                    let mut verdicts = Vec::with_capacity(eb.batch.tasks.len());
                    for (t_idx, task) in eb.batch.tasks.iter().enumerate() {
                        let sample = EvalSample {
                            prompt: &task.prompt,
                            response: &task.response,
                            reference: &eb.references[t_idx],
                            degraded: eb.degraded,
                        };
                        let verdict = self.cross_judge.evaluate(&sample, &mut rng)?;
                        if self.trace {
                            rows.push(self.trace_row(epoch, v_idx, w_idx, task.task_id, &verdict));
                        }
                        verdicts.push(verdict);
                    }
                    acc.accumulate_cross(&verdicts)?;
                }
                let &(bi, ti) = sample_points.get(&w_idx).expect("pairs with batches");
                let eb = &batches[bi];
                let task = &eb.batch.tasks[ti];
                let sample = EvalSample {
                    prompt: &task.prompt,
                    response: &task.response,
                    reference: &eb.references[ti],
                    degraded: eb.degraded,
                };
                let verdict = self.llm_judge.evaluate(&sample, &mut rng)?;
                if self.trace {
                    rows.push(self.trace_row(epoch, v_idx, w_idx, task.task_id, &verdict));
                }
                acc.record_llm(verdict)?;
                evals.insert(
                    (v_idx, w_idx),
                    Evaluation {
                        cross: acc.cross_score()?,
                        llm: verdict.score,
                        final_score: acc.finalize()?,
                    },
                );
            }
        }
        Ok((evals, rows))
    }

    fn trace_row(
        &self,
        epoch: u64,
        v_idx: usize,
        w_idx: usize,
        task_id: u64,
        verdict: &crate::tiqe::JudgeVerdict,
    ) -> TraceRow {
        TraceRow {
            epoch,
            validator: self.validators[v_idx].name.clone(),
            worker: self.workers[w_idx].name.clone(),
            model: self.models[self.workers[w_idx].model_idx]
                .descriptor
                .model_id
                .clone(),
            task_id,
            judge: verdict.judge_kind,
            score: verdict.score,
        }
    }

    fn build_summary(&self) -> Summary {
        let slashed_by_account: BTreeMap<AccountId, u64> = {
            let mut map = BTreeMap::new();
            for rec in self.ledger.slash_log() {
                *map.entry(rec.account).or_insert(0) += rec.amount.units();
            }
            map
        };
        let mut actors = Vec::new();
        let mut push = |account: AccountId, name: String, initial: TokenAmount| {
            actors.push(ActorSummary {
                name,
                account,
                role: account.role,
                initial_units: initial.units(),
                final_free_units: self.ledger.free_balance(&account).map(|a| a.units()).unwrap_or(0),
                final_staked_units: self.ledger.staked_balance(&account).units(),
                rewards_minted_units: self.rewards_minted.get(&account).copied().unwrap_or(0),
                slashed_units: slashed_by_account.get(&account).copied().unwrap_or(0),
            });
        };
        push(self.treasury, "treasury".into(), TokenAmount::ZERO);
        for (account, name) in &self.users {
            push(
                *account,
                name.clone(),
                tokens(self.config.traffic.user_balance_tokens).expect("validated"),
            );
        }
        for (i, w) in self.workers.iter().enumerate() {
            push(
                w.account,
                w.name.clone(),
                tokens(self.config.workers[i].balance_tokens).expect("validated"),
            );
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.config.models[i].provider_worker.is_none() {
                push(
                    m.provider,
                    m.provider_name.clone(),
                    tokens(self.config.models[i].provider_balance_tokens).expect("validated"),
                );
            }
        }
        for (i, v) in self.validators.iter().enumerate() {
            push(
                v.account,
                v.name.clone(),
                tokens(self.config.validators[i].balance_tokens).expect("validated"),
            );
        }

        Summary {
            schema_version: self.config.schema_version,
            scenario: self.config.name.clone(),
            seed: self.config.seed,
            epochs: self.config.epochs,
            protocol: ProtocolParams {
                beta: self.pricing.beta,
                theta: self.pricing.theta,
                lambda: self.lambda,
                threshold: self.threshold,
                slash_rate: self.slash_rate,
                committee_target: self.committee_target,
                judge_kind: match self.config.judge.kind {
                    JudgeKindConfig::Reference => "reference".into(),
                    JudgeKindConfig::Stochastic => "stochastic".into(),
                },
                batch_capacity: self.traffic.batch_capacity,
            },
            actors,
            alpha: self.alpha_trajectories.clone(),
            rejections_total: self.rejections_total,
            totals: self.ledger.totals(),
        }
    }
}

/// Pick each (worker, model) pair's heavyweight sample point: one uniform
/// task index per pair per epoch, shared by every validator.
fn sample_points(
    executed: &BTreeMap<usize, Vec<ExecutedBatch>>,
    seed: u64,
    epoch: u64,
) -> BTreeMap<usize, (usize, usize)> {
    let mut points = BTreeMap::new();
    for (&w_idx, batches) in executed {
        let total: u64 = batches.iter().map(|b| b.batch.tasks.len() as u64).sum();
        if total == 0 {
            continue;
        }
        let mut rng = DetRng::substream(seed, "sample", epoch, w_idx as u64);
        let mut point = rng.range_inclusive(0, total - 1);
        for (bi, eb) in batches.iter().enumerate() {
            let len = eb.batch.tasks.len() as u64;
            if point < len {
                points.insert(w_idx, (bi, point as usize));
                break;
            }
            point -= len;
        }
    }
    points
}

/// Convenience: validate, bootstrap, and run a scenario in one call.
pub fn run_scenario(config: ScenarioConfig) -> Result<ScenarioRun, SimError> {
    Simulation::new(config)?.run()
}
