//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the checked tolerance. Scenario configurations come from
//! the canonical generator (the same definitions `gen-acceptance` writes),
//! loaded back through their TOML form so the file path is exercised too.

use infermesh_core::amount::TokenAmount;
use infermesh_core::consensus::{
    attempt_input, elect_committee, vrf_evaluate, vrf_verify, CommitteeConfig, VrfKeypair,
};
use infermesh_core::inference::{infer_sharded, infer_single, ModelDescriptor, ModelId, TokenSequence};
use infermesh_core::ledger::{Ledger, Role};
use infermesh_core::rng::DetRng;
use infermesh_core::simnet::config::ScenarioConfig;
use infermesh_core::simnet::report::{verify_report_dir, write_run, OutputFormat, ScenarioRun};
use infermesh_core::simnet::{run_scenario, scenarios};
use infermesh_core::tiqe::{judge_stochastic, JudgeKind, QualityScore};
use infermesh_core::Ratio;

/// Round-trip a canonical scenario through TOML, then run it.
fn run_named(name: &str) -> ScenarioRun {
    let (_, config) = scenarios::builtin()
        .into_iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no builtin scenario {name}"));
    let text = config.to_toml_string();
    let parsed = ScenarioConfig::from_toml_str(&text).expect("canonical scenario parses");
    run_scenario(parsed).expect("canonical scenario runs")
}

fn score(x: f64) -> QualityScore {
    QualityScore::from_decimal_f64(x).unwrap()
}

#[test]
fn criterion_01_table3_case2_reward_split_exact() {
    let run = run_named("table3_case2");
    let report = &run.reports[0];
    assert_eq!(report.evaluations.len(), 1);
    let eval = &report.evaluations[0];
    assert_eq!(eval.statements.len(), 1, "32 requests at capacity 32 form one batch");
    let st = &eval.statements[0];
    assert_eq!(st.alpha_used, score(0.8));
    assert_eq!(eval.consensus.median, score(0.8));

    let r_batch = st.r_batch.units() as i128;
    let r_worker = st.r_worker.units() as i128;
    let r_validators = st.r_validators_total.units() as i128;

    // R_worker = 0.56 * R_batch within 1 base unit
    assert!(
        (100 * r_worker - 56 * r_batch).abs() <= 100,
        "r_worker {r_worker} vs 0.56 * {r_batch}"
    );
    // validator total is the exact complement
    assert_eq!(r_worker + r_validators, r_batch);

    // stake shares 10% / 30% / 60% of the validator total, within 1 unit;
    // per-validator entries follow committee (account) order, so match each
    // share to its stake
    assert_eq!(st.per_validator.len(), 3);
    let stake_of = |account| {
        eval.consensus
            .stakes
            .iter()
            .find(|(a, _)| a == account)
            .map(|(_, s)| s.units() as i128)
            .unwrap()
    };
    let total_stake: i128 = eval.consensus.stakes.iter().map(|(_, s)| s.units() as i128).sum();
    assert_eq!(total_stake, 1_000_000_000); // 100 + 300 + 600 tokens
    let mut seen_pcts = Vec::new();
    for (account, share) in &st.per_validator {
        let stake = stake_of(account);
        let pct = stake * 100 / total_stake; // 10, 30, or 60
        seen_pcts.push(pct);
        assert!(
            (100 * share.units() as i128 - pct * r_validators).abs() <= 100,
            "share {share} vs {pct}% of {r_validators}"
        );
    }
    seen_pcts.sort();
    assert_eq!(seen_pcts, vec![10, 30, 60]);
    let share_sum: i128 = st.per_validator.iter().map(|(_, a)| a.units() as i128).sum();
    assert_eq!(share_sum, r_validators);
    println!(
        "PASS: criterion 1 — table3 case 2 split exact (r_batch {}, r_worker {}, validator total {})",
        st.r_batch, st.r_worker, st.r_validators_total
    );
}

#[test]
fn criterion_02_reward_monotonicity_sweep() {
    let alphas = [0.2, 0.5, 0.8, 1.0];
    let mut worker_totals = Vec::new();
    let mut validator_totals = Vec::new();
    let mut batch_total = None;
    for alpha in alphas {
        let tag = format!("alpha_sweep_{:03}", (alpha * 100.0) as u32);
        let run = run_named(&tag);
        let st = &run.reports[0].evaluations[0].statements[0];
        assert_eq!(st.alpha_used, score(alpha));
        // identical seed and traffic: the batch reward is the same each run
        match batch_total {
            None => batch_total = Some(st.r_batch),
            Some(total) => assert_eq!(total, st.r_batch),
        }
        worker_totals.push(st.r_worker.units());
        validator_totals.push(st.r_validators_total.units());
    }
    assert!(
        worker_totals.windows(2).all(|w| w[0] < w[1]),
        "worker rewards not strictly increasing: {worker_totals:?}"
    );
    assert!(
        validator_totals.windows(2).all(|w| w[0] > w[1]),
        "validator rewards not strictly decreasing: {validator_totals:?}"
    );
    // at alpha = 1.0 the validator total is exactly beta * r_batch
    let r_batch = batch_total.unwrap().units();
    assert_eq!(validator_totals[3] * 10, r_batch * 3);
    println!(
        "PASS: criterion 2 — alpha sweep monotone, validators get exactly 0.3 * r_batch at alpha 1 ({} of {})",
        TokenAmount::from_units(validator_totals[3]),
        TokenAmount::from_units(r_batch)
    );
}

#[test]
fn criterion_03_theorem1_degraded_worker_earns_nothing() {
    let run = run_named("theorem1");
    assert_eq!(run.reports.len(), 20);

    // honest worker's per-epoch alpha stays >= 0.99
    let honest_alpha = &run.summary.alpha["worker-honest"];
    assert_eq!(honest_alpha.len(), 20);
    for (i, alpha) in honest_alpha.iter().enumerate() {
        assert!(
            *alpha >= score(0.99),
            "epoch {}: honest alpha {alpha} below 0.99",
            i + 1
        );
    }

    let rewards = |name: &str| {
        run.summary
            .actors
            .iter()
            .find(|a| a.name == name)
            .unwrap()
            .rewards_minted_units
    };
    let honest = rewards("worker-honest");
    let degraded = rewards("worker-degraded");
    assert!(honest > 0);
    assert!(
        100 * degraded < honest,
        "degraded worker earned {degraded} units, not under 1% of {honest}"
    );
    println!(
        "PASS: criterion 3 — degraded worker cumulative reward {} < 1% of honest {} over 20 epochs",
        TokenAmount::from_units(degraded),
        TokenAmount::from_units(honest)
    );
}

#[test]
fn criterion_04_theorem2_geometric_stake_decay() {
    // independent oracle: iterate x := x - floor(x / 10) once per epoch
    let mut oracle = TokenAmount::from_tokens(100).units();
    for _ in 0..44 {
        oracle -= oracle / 10;
    }

    let run = run_named("theorem2");
    assert_eq!(run.reports.len(), 44);
    let corrupt = run
        .summary
        .actors
        .iter()
        .find(|a| a.name == "v-corrupt")
        .unwrap();

    // slashed in every epoch
    for report in &run.reports {
        assert!(
            report.slashes.iter().any(|s| s.account == corrupt.account),
            "epoch {}: corrupt validator not slashed",
            report.epoch
        );
        assert_eq!(report.slashes.len(), 1, "only the corrupt validator is slashed");
    }

    assert_eq!(
        corrupt.final_staked_units, oracle,
        "stake after 44 slashes must match the iterated-floor oracle exactly"
    );
    assert!(corrupt.final_staked_units < TokenAmount::from_tokens(1).units());
    println!(
        "PASS: criterion 4 — stake decayed to {} base units after 44 slashes, matching the floor oracle within 0 units",
        corrupt.final_staked_units
    );
}

#[test]
fn criterion_05_shard_composition_identity() {
    let mut rng = DetRng::new(0xc0ffee);
    for n_shards in [1u32, 2, 3, 4, 8] {
        let model = ModelDescriptor {
            model_id: ModelId(format!("acceptance-{n_shards}")),
            scale_factor: Ratio::ONE,
            n_shards,
            seed: 0x51ab ^ n_shards as u64,
            usage_fee: TokenAmount::ZERO,
        };
        for _ in 0..100 {
            let len = rng.range_inclusive(1, 64) as usize;
            let prompt =
                TokenSequence::new((0..len).map(|_| rng.token()).collect()).unwrap();
            let single = infer_single(&model, &prompt, 32).unwrap();
            let sharded = infer_sharded(&model, &prompt, 32).unwrap();
            assert_eq!(single, sharded, "divergence at n_shards {n_shards}");
        }
    }

    // end to end: a sharded model served honestly scores exactly 1.0
    let run = run_named("sharding_equivalence");
    for report in &run.reports {
        assert_eq!(report.evaluations[0].consensus.median, QualityScore::ONE);
    }
    println!(
        "PASS: criterion 5 — sharded inference token-exact vs single for n in {{1,2,3,4,8}} x 100 prompts x r=32"
    );
}

#[test]
fn criterion_06_vrf_election_statistics_and_tamper_evidence() {
    // 10 validators, committee target 3, 1000 epochs
    let mut ledger = Ledger::new(0xe1ec);
    let eligible: Vec<_> = (0..10)
        .map(|_| ledger.open_account(Role::Validator, TokenAmount::from_tokens(1)))
        .collect();
    let keys: Vec<VrfKeypair> = (0..10)
        .map(|i| VrfKeypair::from_seed_material(&(0xe1ecu64 + i).to_le_bytes()))
        .collect();
    let config = CommitteeConfig {
        eligible: eligible.clone(),
        target_size: 3,
        threshold: score(0.2),
        slash_rate: Ratio::new(1, 10).unwrap(),
    };
    let epochs = 1000u64;
    let mut counts = vec![0u64; 10];
    for epoch in 0..epochs {
        let record = elect_committee(
            &config,
            |account, input| {
                let idx = eligible.iter().position(|a| a == account).unwrap();
                (keys[idx].pk, vrf_evaluate(&keys[idx], input))
            },
            format!("election-{epoch}").as_bytes(),
        )
        .unwrap();
        // every published ticket verifies
        let input = attempt_input(&record.base_input, record.nonce);
        for entry in &record.tickets {
            assert!(vrf_verify(&entry.pk, &input, &entry.ticket));
        }
        assert!(record.invalid.is_empty());
        for member in &record.committee {
            counts[eligible.iter().position(|a| a == member).unwrap()] += 1;
        }
    }
    // per-validator election frequency within 3-sigma binomial bounds of 0.3
    let p = 0.3f64;
    let sigma = (p * (1.0 - p) / epochs as f64).sqrt();
    for (idx, &count) in counts.iter().enumerate() {
        let freq = count as f64 / epochs as f64;
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "validator {idx}: frequency {freq:.4} outside 0.3 +/- {:.4}",
            3.0 * sigma
        );
    }

    // a single-bit ticket tamper fails report verification
    let dir = tempfile::tempdir().unwrap();
    let run = run_named("vrf_election");
    write_run(dir.path(), &run, OutputFormat::Json, false).unwrap();
    let path = dir.path().join("epoch_0002.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let r = doc["election"]["tickets"][4]["ticket"]["r"].as_u64().unwrap();
    doc["election"]["tickets"][4]["ticket"]["r"] = serde_json::Value::from(r ^ (1 << 17));
    std::fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    let failures = verify_report_dir(dir.path()).unwrap();
    assert!(
        failures.iter().any(|f| f.epoch == 2 && f.check == "ticket-verification"),
        "tamper not detected: {failures:?}"
    );
    println!(
        "PASS: criterion 6 — election frequencies {:?}/1000 within 3 sigma of 0.3; bit-flipped ticket rejected",
        counts
    );
}

#[test]
fn criterion_07_byzantine_median_bound() {
    let run = run_named("byzantine");
    assert_eq!(run.reports.len(), 200);
    let threshold = run.summary.protocol.threshold;
    let honest_names = ["v0", "v1", "v2", "v3", "v4"];
    let corrupt_names = ["v5", "v6"];
    let account_of = |name: &str| {
        run.summary
            .actors
            .iter()
            .find(|a| a.name == name)
            .unwrap()
            .account
    };
    let honest_accounts: Vec<_> = honest_names.iter().map(|n| account_of(n)).collect();
    let corrupt_accounts: Vec<_> = corrupt_names.iter().map(|n| account_of(n)).collect();

    for report in &run.reports {
        let outcome = &report.evaluations[0].consensus;
        // deterministic judges: every honest validator submits the same score
        let honest_scores: Vec<QualityScore> = outcome
            .submitted
            .iter()
            .filter(|(a, _)| honest_accounts.contains(a))
            .map(|(_, s)| *s)
            .collect();
        assert_eq!(honest_scores.len(), 5);
        let honest_score = honest_scores[0];
        assert!(honest_scores.iter().all(|s| *s == honest_score));

        // consensus median within Th of the honest score, every epoch
        assert!(
            outcome.median.abs_diff(honest_score) <= threshold,
            "epoch {}: median {} strays from honest {}",
            report.epoch,
            outcome.median,
            honest_score
        );

        // both corrupt validators slashed whenever they distort beyond Th
        for corrupt in &corrupt_accounts {
            let (_, submitted) = outcome
                .submitted
                .iter()
                .find(|(a, _)| a == corrupt)
                .expect("corrupt validator submits");
            let distorted = submitted.abs_diff(outcome.median) > threshold;
            let slashed = outcome.slashed.iter().any(|(a, _)| a == corrupt);
            assert!(
                distorted,
                "epoch {}: over-scorer failed to distort beyond Th",
                report.epoch
            );
            assert_eq!(
                distorted, slashed,
                "epoch {}: slashing must track the deviation condition",
                report.epoch
            );
        }
    }
    println!(
        "PASS: criterion 7 — 200 epochs, m=7 with 2 over-scorers: median within Th of honest score, corrupt pair slashed every epoch"
    );
}

#[test]
fn criterion_08_confusion_matrix_calibration() {
    let n = 2000u64;
    let cases = [
        (JudgeKind::CrossEncoder, true, 0.66, 0.03, "cross TP"),
        (JudgeKind::CrossEncoder, false, 0.02, 0.01, "cross FP"),
        (JudgeKind::LlmJudge, true, 0.98, 0.01, "llm TP"),
        (JudgeKind::LlmJudge, false, 0.12, 0.02, "llm FP"),
    ];
    let mut measured = Vec::new();
    for (i, (kind, degraded, expected, tolerance, label)) in cases.into_iter().enumerate() {
        let (tp, fp) = match kind {
            JudgeKind::CrossEncoder => (score(0.66), score(0.02)),
            JudgeKind::LlmJudge => (score(0.98), score(0.12)),
        };
        let mut rng = DetRng::substream(0xf195, "calibration", i as u64, 0);
        let mut flagged = 0u64;
        for _ in 0..n {
            let verdict = judge_stochastic(kind, degraded, tp, fp, &mut rng);
            if verdict.score == QualityScore::ZERO {
                flagged += 1;
            }
        }
        let rate = flagged as f64 / n as f64;
        assert!(
            (rate - expected).abs() <= tolerance,
            "{label}: rate {rate:.4} outside {expected} +/- {tolerance}"
        );
        measured.push(format!("{label} {rate:.3}"));
    }
    println!(
        "PASS: criterion 8 — stochastic judges calibrated over {n} samples: {}",
        measured.join(", ")
    );
}

#[test]
fn criterion_09_determinism_and_seed_sensitivity() {
    let first = run_named("vrf_election");
    let second = run_named("vrf_election");
    assert_eq!(first.report_bytes, second.report_bytes);
    assert_eq!(
        serde_json::to_vec(&first.summary).unwrap(),
        serde_json::to_vec(&second.summary).unwrap()
    );

    // a different seed changes at least the committee schedule
    let (_, mut reseeded) = scenarios::builtin()
        .into_iter()
        .find(|(n, _)| n == "vrf_election")
        .unwrap();
    reseeded.seed += 1;
    let third = run_scenario(reseeded).unwrap();
    let schedule = |run: &ScenarioRun| {
        run.reports
            .iter()
            .map(|r| r.election.committee.clone())
            .collect::<Vec<_>>()
    };
    assert_ne!(
        schedule(&first),
        schedule(&third),
        "changing the seed must change the committee schedule"
    );
    println!(
        "PASS: criterion 9 — identical seeds reproduce byte-identical report trees; reseeding changes the committee schedule"
    );
}

#[test]
fn criterion_10_conservation_every_epoch_every_scenario() {
    let mut checked = 0u64;
    for (name, config) in scenarios::builtin() {
        let run = run_scenario(config).unwrap_or_else(|e| panic!("{name} failed: {e}"));
        for report in &run.reports {
            let t = &report.ledger_totals;
            assert_eq!(
                t.free_units as u128 + t.staked_units as u128 + t.burned_units as u128,
                t.initial_units as u128 + t.minted_units as u128,
                "{name} epoch {}: conservation violated",
                report.epoch
            );
            checked += 1;
        }
        assert!(run.summary.totals.conserved(), "{name}: final totals drift");
    }
    println!(
        "PASS: criterion 10 — conservation identity exact after all {checked} epochs across {} scenarios",
        scenarios::builtin().len()
    );
}
