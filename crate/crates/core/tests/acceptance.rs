// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use psc_core::blockchain::Phase;
use psc_core::contract::{IdentityContract, SmartContract, ValueDomain};
use psc_core::group::{GroupParams, ModpGroup, PrimeGroup, Ristretto255};
use psc_core::harness::{run_experiment, Adversary, RunConfig};
use psc_core::party::Party;
use psc_core::pedersen::{combine, commit, commit_value, quotient};
use psc_core::sigma::{bnizk_prove, bnizk_verify, schnorr_prove, schnorr_verify, BitProof};
use psc_core::transcript::{self, Transcript};
use psc_core::wire::PartyId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Toy = ModpGroup<u64>;

const HONEST_RUNS: usize = 500;
const HONEST_BUDGET: Duration = Duration::from_secs(60);
const ORACLE_CASES: usize = 1000;
const NEGATIVE_RUNS: u64 = 100;
const NIZK_CASES: usize = 1000;
const FREEZES: usize = 1000;
const SLOT_TOLERANCE: f64 = 0.05;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Random valid honest config: auction bids leave room for the seller's gain.
fn random_config(rng: &mut ChaCha20Rng, seed: u64) -> RunConfig {
    let ell = [4u32, 8, 16][rng.gen_range(0..3)];
    let bound = 1u64 << ell;
    let mut cfg = if rng.gen_bool(0.5) {
        let n = rng.gen_range(1..=5);
        RunConfig::new(
            "identity",
            (0..n).map(|_| rng.gen_range(0..bound)).collect(),
        )
    } else {
        let n = rng.gen_range(2..=5);
        let max_bid = rng.gen_range(1..bound);
        let seller = rng.gen_range(0..bound - max_bid);
        let mut values = vec![seller];
        values.extend((1..n).map(|_| rng.gen_range(0..=max_bid)));
        let at = rng.gen_range(1..n);
        values[at] = max_bid;
        RunConfig::new("auction", values)
    };
    cfg.ell = ell;
    cfg.seed = seed;
    cfg
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let started = Instant::now();
    let mut failures = Vec::new();
    for i in 0..HONEST_RUNS {
        let cfg = random_config(&mut rng, i as u64);
        match run_experiment(&cfg) {
            Ok(r)
                if r.phase == Some(Phase::Finalized)
                    && r.zero_sum == Some(true)
                    && r.invariants_hold() => {}
            Ok(r) => failures.push(format!(
                "run {i} {:?}: phase {:?} zero-sum {:?}",
                cfg.values, r.phase, r.zero_sum
            )),
            Err(e) => failures.push(format!("run {i}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    let pass = failures.is_empty() && elapsed < HONEST_BUDGET;
    outcome(
        pass,
        format!(
            "{}/{HONEST_RUNS} finalized with exact sums in {:.1}s (budget {}s){}",
            HONEST_RUNS - failures.len(),
            elapsed.as_secs_f64(),
            HONEST_BUDGET.as_secs(),
            failures
                .first()
                .map(|f| format!("; first failure {f}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_2() -> Outcome {
    let params = GroupParams::<Toy>::toy();
    let grp = &params.group;
    let (p, q) = (BigUint::from(23u32), BigUint::from(11u32));
    let oracle_commit = |v: u64, r: u64| {
        (BigUint::from(4u32).modpow(&BigUint::from(v), &p)
            * BigUint::from(8u32).modpow(&BigUint::from(r), &p))
            % &p
    };
    let inv = |x: &BigUint| x.modpow(&(&p - 2u32), &p);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let shapes: Vec<(usize, u32)> = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2)]
        .into_iter()
        .filter(|(n, ell)| {
            ValueDomain::new(*ell)
                .unwrap()
                .check_against_group(*n, &params.group_order_q())
                .is_ok()
        })
        .collect();
    let (mut agree, mut balanced) = (0, 0);
    for _ in 0..ORACLE_CASES {
        let (n, ell) = shapes[rng.gen_range(0..shapes.len())];
        let bound = 1u64 << ell;
        let vals: Vec<u64> = (0..n).map(|_| rng.gen_range(0..bound)).collect();
        let outs: Vec<u64> = if rng.gen_bool(0.5) && n == 2 && vals[0] + vals[1] < bound {
            vec![vals[0] + vals[1], 0]
        } else if rng.gen_bool(0.3) {
            vals.iter().rev().copied().collect()
        } else {
            (0..n).map(|_| rng.gen_range(0..bound)).collect()
        };
        let r: Vec<u64> = (0..n).map(|_| rng.gen_range(0..11)).collect();
        let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..11)).collect();
        let zero_sum = vals.iter().sum::<u64>() == outs.iter().sum::<u64>();
        balanced += usize::from(zero_sum);

        let sc = |x: u64| grp.scalar_from_u64(x);
        let coins: Vec<_> = vals
            .iter()
            .zip(&r)
            .map(|(v, r)| commit(&params, &sc(*v), &sc(*r)))
            .collect();
        let coins_out: Vec<_> = outs
            .iter()
            .zip(&s)
            .map(|(v, s)| commit(&params, &sc(*v), &sc(*s)))
            .collect();
        let c = quotient(
            &params,
            &combine(&params, &coins_out),
            &combine(&params, &coins),
        );
        let exponent = (s.iter().sum::<u64>() + 11 * n as u64 - r.iter().sum::<u64>()) % 11;
        let lib_equal = *c.element() == grp.exp(&params.h, &sc(exponent));

        let num = outs.iter().zip(&s).fold(BigUint::from(1u32), |a, (v, s)| {
            a * oracle_commit(*v, *s) % &p
        });
        let den = vals.iter().zip(&r).fold(BigUint::from(1u32), |a, (v, r)| {
            a * oracle_commit(*v, *r) % &p
        });
        let oracle_c = num * inv(&den) % &p;
        let oracle_rhs = BigUint::from(8u32).modpow(&BigUint::from(exponent), &p);
        let oracle_equal = oracle_c == oracle_rhs;
        let exponent_oracle = (BigUint::from(s.iter().sum::<u64>()) + &q * n
            - BigUint::from(r.iter().sum::<u64>()))
            % &q;

        if BigUint::from(c.element().value()) == oracle_c
            && exponent_oracle == BigUint::from(exponent)
            && lib_equal == oracle_equal
            && lib_equal == zero_sum
        {
            agree += 1;
        }
    }
    outcome(
        agree == ORACLE_CASES && balanced > 0 && balanced < ORACLE_CASES,
        format!(
            "{agree}/{ORACLE_CASES} cases agree with the big-integer oracle ({balanced} balanced)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let modes = [
        Adversary::CorruptBitProof,
        Adversary::SwapCandidate,
        Adversary::BadContract,
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for mode in modes {
        let mut ok = 0;
        let expected = mode.expected_rejection().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for seed in 0..NEGATIVE_RUNS {
            let bids: Vec<u64> = (0..2).map(|_| rng.gen_range(1..100)).collect();
            let mut cfg = RunConfig::new("auction", vec![rng.gen_range(0..100), bids[0], bids[1]]);
            cfg.ell = 8;
            cfg.seed = seed;
            cfg.adversary = mode;
            let Ok(r) = run_experiment(&cfg) else {
                continue;
            };
            let codes = r.rejection_codes();
            let stopped = match mode {
                Adversary::CorruptBitProof => {
                    r.phase != Some(Phase::Compute) && r.phase != Some(Phase::Finalized)
                }
                _ => r.phase == Some(Phase::Compute),
            };
            if codes == [expected] && r.rejections_pure && stopped {
                ok += 1;
            }
        }
        pass &= ok == NEGATIVE_RUNS;
        detail.push(format!("{mode} {ok}/{NEGATIVE_RUNS} ({expected})"));
    }
    outcome(pass, detail.join(", "))
}

fn criterion_4() -> Outcome {
    let params = GroupParams::<Ristretto255>::production();
    let grp = &params.group;
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut honest_ok, mut mutated_ok) = (0, 0);
    for i in 0..NIZK_CASES {
        let ctx = (i as u32).to_be_bytes();
        let r = grp.random_scalar(&mut rng);
        let c = grp.exp(&params.h, &r);
        let mut proof = schnorr_prove(&params, &c, &params.h, &r, &ctx, &mut rng);
        honest_ok += usize::from(schnorr_verify(&params, &c, &params.h, &proof, &ctx));
        match i % 2 {
            0 => proof.response = grp.scalar_add(&proof.response, &grp.scalar_one()),
            _ => proof.nonce_commitment = grp.mul(&proof.nonce_commitment, &params.g),
        }
        mutated_ok += usize::from(schnorr_verify(&params, &c, &params.h, &proof, &ctx));

        let bit = (i % 2) as u64;
        let s = grp.random_scalar(&mut rng);
        let cb = commit_value(&params, bit, &s);
        let mut bp = bnizk_prove(&params, &cb, &s, bit, &ctx, &mut rng).unwrap();
        honest_ok += usize::from(bnizk_verify(&params, &cb, &bp, &ctx));
        match i % 5 {
            0 => bp.f = grp.scalar_add(&bp.f, &grp.scalar_one()),
            1 => bp.za = grp.scalar_add(&bp.za, &grp.scalar_one()),
            2 => bp.zb = grp.scalar_add(&bp.zb, &grp.scalar_one()),
            3 => bp.ca = grp.mul(&bp.ca, &params.g),
            _ => bp.cb = grp.mul(&bp.cb, &params.h),
        }
        mutated_ok += usize::from(bnizk_verify(&params, &cb, &bp, &ctx));
    }

    // Every candidate proof for a commitment to 2 in the toy group, against the real
    // Fiat-Shamir challenge.
    let toy = GroupParams::<Toy>::toy();
    let tg = &toy.group;
    let two = commit_value(&toy, 2, &tg.scalar_from_u64(3));
    let ctx = b"exhaustive";
    let members: Vec<_> = (1..23u64).filter_map(|v| tg.element(v).ok()).collect();
    let scalars: Vec<_> = (0..11u64).map(|v| tg.scalar_from_u64(v)).collect();
    let mut accepting = 0usize;
    let mut searched = 0usize;
    for ca in &members {
        for cb in &members {
            for f in &scalars {
                for za in &scalars {
                    for zb in &scalars {
                        searched += 1;
                        let proof = BitProof::<Toy> {
                            ca: *ca,
                            cb: *cb,
                            f: *f,
                            za: *za,
                            zb: *zb,
                        };
                        accepting += usize::from(bnizk_verify(&toy, &two, &proof, ctx));
                    }
                }
            }
        }
    }

    let total = 2 * NIZK_CASES;
    let pass = honest_ok == total && mutated_ok == 0 && accepting == 0;
    outcome(
        pass,
        format!(
            "honest {honest_ok}/{total} verify, mutated {mutated_ok}/{total} verify, \
             toy exhaustive search: {accepting} accepting proofs for Com(2) among {searched}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let runs = 100;
    let mut good = 0;
    let mut ties = 0;
    let mut first_failure = None;
    for seed in 0..runs {
        let k = rng.gen_range(1..=4);
        let mut bids: Vec<u64> = (0..k).map(|_| rng.gen_range(1..100)).collect();
        if k > 1 && seed % 3 == 0 {
            let max = *bids.iter().max().unwrap();
            let j = rng.gen_range(0..k);
            bids[j] = max;
            let other = (j + 1 + rng.gen_range(0..k - 1)) % k;
            bids[other] = max;
        }
        let deposit = rng.gen_range(0..100);
        let mut values = vec![deposit];
        values.extend(&bids);
        let mut cfg = RunConfig::new("auction", values.clone());
        cfg.ell = 8;
        cfg.seed = 1000 + seed;
        let Ok(r) = run_experiment(&cfg) else {
            continue;
        };
        let max = *bids.iter().max().unwrap();
        let winner = 1 + bids.iter().position(|b| *b == max).unwrap();
        ties += usize::from(bids.iter().filter(|b| **b == max).count() > 1);
        let mut want = values.clone();
        want[0] = deposit + max;
        want[winner] = 0;
        let got: Vec<_> = r.recovered.iter().map(|v| v.unwrap_or(u64::MAX)).collect();
        if r.phase == Some(Phase::Finalized)
            && got == want
            && r.out.as_deref() == Some(winner.to_string().as_str())
        {
            good += 1;
        } else if first_failure.is_none() {
            first_failure = Some(format!(
                "values {values:?} recovered {got:?} out {:?}",
                r.out
            ));
        }
    }

    let params = GroupParams::<Ristretto255>::production().shared();
    let names = PartyId::numbered(1);
    let contract: Arc<dyn SmartContract> = Arc::new(IdentityContract::new(1).unwrap());
    let mut me = Party::new(
        names[0].clone(),
        params,
        ValueDomain::new(1).unwrap(),
        ChaCha20Rng::seed_from_u64(55),
    );
    let mut zeros = 0;
    for v in 0..FREEZES {
        let msg = me
            .freeze(contract.clone(), &names, (v % 2) as u64, Vec::new())
            .unwrap();
        zeros += usize::from(msg.pairs[0][0].commitment == me.secrets(&msg.id).unwrap().bits[0].c0);
    }
    let freq = zeros as f64 / FREEZES as f64;
    let pass = good == runs && ties > 0 && (freq - 0.5).abs() <= SLOT_TOLERANCE;
    outcome(
        pass,
        format!(
            "{good}/{runs} auction runs recover as specified ({ties} with ties), \
             first-slot zero frequency {freq:.3} over {FREEZES} freezes (0.5 ± {SLOT_TOLERANCE}){}",
            first_failure
                .map(|f| format!("; first failure {f}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let runs = 20;
    let mut good = 0;
    for i in 0..runs {
        let mut cfg = random_config(&mut rng, 500 + i);
        if i % 4 == 1 {
            cfg.adversary = Adversary::ALL[1 + (i as usize / 4) % 5];
            if cfg.adversary == Adversary::BadContract {
                cfg.values.iter_mut().for_each(|v| *v /= 2);
            }
        }
        let a = dir.path().join(format!("{i}-a.jsonl"));
        let b = dir.path().join(format!("{i}-b.jsonl"));
        cfg.transcript = Some(a.clone());
        let Ok(report) = run_experiment(&cfg) else {
            continue;
        };
        cfg.transcript = Some(b.clone());
        if run_experiment(&cfg).is_err() {
            continue;
        }
        let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
        let t = Transcript::load(&a).unwrap();
        let replayed = transcript::replay(&t)
            .map(|r| r.matches() && r.final_state_hash == hex::encode(report.state_hash))
            .unwrap_or(false);
        let verified = transcript::verify(&t).map(|v| {
            let honest = cfg.adversary == Adversary::None;
            !v.checks.is_empty() && (!honest || v.all_pass())
        });
        if identical && replayed && verified.unwrap_or(false) {
            good += 1;
        }
    }
    outcome(good == runs, format!("{good}/{runs} transcripts byte-identical, replayed to the recorded state hash and re-verified"))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("1 honest end-to-end correctness", criterion_1),
        ("2 balance identity vs big-integer oracle", criterion_2),
        ("3 soundness negative suite", criterion_3),
        ("4 NIZK completeness and soundness", criterion_4),
        ("5 output recovery and slot permutation", criterion_5),
        ("6 transcript determinism and replay", criterion_6),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        println!(
            "criterion {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
