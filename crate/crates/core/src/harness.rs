// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs: freeze, wait for compute, evaluate through `M`, finalize.
//!
//! Party work runs on scoped threads. Messages reach the blockchain in participant
//! order so identical configs give byte-identical transcripts.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::mpsc::{channel, Receiver};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blockchain::{Blockchain, Outcome, Phase, PhaseEvent};
use crate::contract::{
    contract_by_name, BadContract, ContractInput, ContractResult, SmartContract, ValueDomain,
};
use crate::error::{HarnessError, PartyError};
use crate::group::{GroupParams, PrimeGroup, SharedParams};
use crate::mpc::{Delivery, IdealMpc, MpcOutput};
use crate::party::Party;
use crate::sigma::schnorr_prove;
use crate::transcript::{Header, Transcript, FORMAT, VERSION};
use crate::wire::{ContractId, FinalizeMessage, PartyId};
use crate::{Production, ToyGroup};

pub const DEFAULT_ELL: u32 = 16;

/// Bound on how long a party waits for `M`'s output.
const MPC_WAIT: Duration = Duration::from_secs(30);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupChoice {
    #[default]
    Production,
    ToyInsecure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    #[default]
    None,
    CorruptBitProof,
    SwapCandidate,
    BadContract,
    DuplicateFreeze,
    EarlyFinalize,
}

impl Adversary {
    pub const ALL: [Adversary; 6] = [
        Adversary::None,
        Adversary::CorruptBitProof,
        Adversary::SwapCandidate,
        Adversary::BadContract,
        Adversary::DuplicateFreeze,
        Adversary::EarlyFinalize,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Adversary::None => "none",
            Adversary::CorruptBitProof => "corrupt-bit-proof",
            Adversary::SwapCandidate => "swap-candidate",
            Adversary::BadContract => "bad-contract",
            Adversary::DuplicateFreeze => "duplicate-freeze",
            Adversary::EarlyFinalize => "early-finalize",
        }
    }

    /// Reason code the blockchain must report for this deviation.
    pub fn expected_rejection(&self) -> Option<&'static str> {
        match self {
            Adversary::None => None,
            Adversary::CorruptBitProof => Some("bit-proof-invalid"),
            Adversary::SwapCandidate | Adversary::BadContract => Some("schnorr-failed"),
            Adversary::DuplicateFreeze => Some("already-frozen"),
            Adversary::EarlyFinalize => Some("wrong-phase"),
        }
    }

    /// Whether the run still has to finalize honestly despite the deviation.
    pub fn completes(&self) -> bool {
        matches!(
            self,
            Adversary::None | Adversary::DuplicateFreeze | Adversary::EarlyFinalize
        )
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Adversary {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Adversary::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown adversary mode '{s}'")))
    }
}

impl GroupChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupChoice::Production => "production",
            GroupChoice::ToyInsecure => "toy-insecure",
        }
    }
}

impl FromStr for GroupChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "production" => Ok(GroupChoice::Production),
            "toy-insecure" => Ok(GroupChoice::ToyInsecure),
            other => Err(HarnessError::Config(format!("unknown group '{other}'"))),
        }
    }
}

/// Who sends the finalize message. Party numbers are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FinalizerRepr", into = "FinalizerRepr")]
pub enum Finalizer {
    Party(usize),
    All,
}

impl Default for Finalizer {
    fn default() -> Self {
        Finalizer::Party(1)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FinalizerRepr {
    Index(usize),
    Word(String),
}

impl TryFrom<FinalizerRepr> for Finalizer {
    type Error = String;

    fn try_from(r: FinalizerRepr) -> Result<Self, String> {
        match r {
            FinalizerRepr::Index(i) => Ok(Finalizer::Party(i)),
            FinalizerRepr::Word(w) => w.parse().map_err(|e: HarnessError| e.to_string()),
        }
    }
}

impl From<Finalizer> for FinalizerRepr {
    fn from(f: Finalizer) -> Self {
        match f {
            Finalizer::Party(i) => FinalizerRepr::Index(i),
            Finalizer::All => FinalizerRepr::Word("all".into()),
        }
    }
}

impl FromStr for Finalizer {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Finalizer::All);
        }
        s.parse().map(Finalizer::Party).map_err(|_| {
            HarnessError::Config(format!(
                "finalizer must be a party number or 'all', got '{s}'"
            ))
        })
    }
}

fn default_ell() -> u32 {
    DEFAULT_ELL
}

/// One experiment. Also the schema of the TOML config file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub contract: String,
    /// One value per party; the party count is its length.
    pub values: Vec<u64>,
    /// Per-party auxiliary inputs (UTF-8). Empty means no aux for anyone.
    #[serde(default)]
    pub aux: Vec<String>,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default)]
    pub group: GroupChoice,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub adversary: Adversary,
    #[serde(default)]
    pub finalizer: Finalizer,
    #[serde(default)]
    pub transcript: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(contract: impl Into<String>, values: Vec<u64>) -> Self {
        Self {
            contract: contract.into(),
            values,
            aux: Vec::new(),
            ell: DEFAULT_ELL,
            group: GroupChoice::Production,
            seed: 0,
            adversary: Adversary::None,
            finalizer: Finalizer::default(),
            transcript: None,
        }
    }

    pub fn parties(&self) -> usize {
        self.values.len()
    }

    /// Contract actually run: the configured one, or the unbalanced one in bad-contract mode.
    pub fn contract(&self) -> Result<Arc<dyn SmartContract>, HarnessError> {
        let n = self.parties();
        if self.adversary == Adversary::BadContract {
            return Ok(Arc::new(BadContract::new(n)?));
        }
        Ok(contract_by_name(&self.contract, n)?)
    }

    pub fn validate(&self) -> Result<ValueDomain, HarnessError> {
        let n = self.parties();
        if n == 0 {
            return Err(HarnessError::Config(
                "at least one party value is required".into(),
            ));
        }
        let contract = self.contract()?;
        if contract.arity() != n {
            return Err(HarnessError::Config(format!(
                "contract '{}' takes {} parties, got {n}",
                contract.name(),
                contract.arity()
            )));
        }
        if !self.aux.is_empty() && self.aux.len() != n {
            return Err(HarnessError::Config(format!(
                "aux has {} entries for {n} parties",
                self.aux.len()
            )));
        }
        for (v, a) in self.values.iter().zip(self.aux_bytes()) {
            ContractInput::new(*v, a)?;
        }
        let domain = ValueDomain::new(self.ell)?;
        let order = match self.group {
            GroupChoice::Production => GroupParams::<Production>::production().group_order_q(),
            GroupChoice::ToyInsecure => GroupParams::<ToyGroup>::toy().group_order_q(),
        };
        domain.check_against_group(n, &order)?;
        for v in &self.values {
            domain.check(*v)?;
        }
        if let Finalizer::Party(i) = self.finalizer {
            if i == 0 || i > n {
                return Err(HarnessError::Config(format!(
                    "finalizer party {i} not in 1..={n}"
                )));
            }
        }
        Ok(domain)
    }

    fn aux_bytes(&self) -> Vec<Vec<u8>> {
        if self.aux.is_empty() {
            vec![Vec::new(); self.parties()]
        } else {
            self.aux.iter().map(|a| a.as_bytes().to_vec()).collect()
        }
    }
}

/// Per-purpose 32-byte seed from the master seed.
pub fn derive_seed(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"psc/seed/v1");
    h.update(master.to_be_bytes());
    h.update((label.len() as u32).to_be_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectionEntry {
    pub seq: usize,
    pub sender: String,
    pub kind: String,
    pub code: String,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub group: String,
    pub adversary: Adversary,
    pub contract_id: ContractId,
    /// `None` if no freeze was ever accepted.
    pub phase: Option<Phase>,
    /// Phase the run was waiting for when it stopped early.
    pub stalled: Option<Phase>,
    pub accepted: usize,
    pub rejected: Vec<RejectionEntry>,
    pub inputs: Vec<u64>,
    /// `f`'s output values computed in the clear, for comparison.
    pub expected: Option<Vec<u64>>,
    pub recovered: Vec<Option<u64>>,
    pub out: Option<String>,
    pub mpc_abort: Option<String>,
    pub zero_sum: Option<bool>,
    /// Every rejected message left the state hash unchanged.
    pub rejections_pure: bool,
    pub state_hash: [u8; 32],
    pub duration: Duration,
    pub transcript: Transcript,
}

impl RunReport {
    pub fn rejection_codes(&self) -> Vec<&str> {
        self.rejected.iter().map(|r| r.code.as_str()).collect()
    }

    pub fn invariants_hold(&self) -> bool {
        if !self.rejections_pure {
            return false;
        }
        if let Some(code) = self.adversary.expected_rejection() {
            if !self.rejected.iter().any(|r| r.code == code) {
                return false;
            }
        }
        if self.adversary.completes() {
            self.phase == Some(Phase::Finalized)
                && self.zero_sum == Some(true)
                && self.expected.as_ref().is_some_and(|e| {
                    e.len() == self.recovered.len()
                        && e.iter().zip(&self.recovered).all(|(a, b)| Some(*a) == *b)
                })
        } else {
            self.phase != Some(Phase::Finalized)
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let phase = self.phase.map_or("none", |p| p.as_str());
        s.push_str(&format!("contract   {}\n", self.contract_id));
        s.push_str(&format!("group      {}\n", self.group));
        s.push_str(&format!("adversary  {}\n", self.adversary));
        s.push_str(&format!("phase      {phase}\n"));
        s.push_str(&format!("accepted   {}\n", self.accepted));
        s.push_str(&format!("rejected   {}\n", self.rejected.len()));
        for r in &self.rejected {
            s.push_str(&format!(
                "  seq {} {} from {}: {}\n",
                r.seq, r.kind, r.sender, r.code
            ));
        }
        if let Some(a) = &self.mpc_abort {
            s.push_str(&format!("mpc abort  {a}\n"));
        }
        let fmt_vals = |v: &[Option<u64>]| {
            v.iter()
                .map(|x| x.map_or("-".to_string(), |x| x.to_string()))
                .collect::<Vec<_>>()
                .join(",")
        };
        s.push_str(&format!(
            "inputs     {}\n",
            fmt_vals(&self.inputs.iter().map(|v| Some(*v)).collect::<Vec<_>>())
        ));
        s.push_str(&format!("recovered  {}\n", fmt_vals(&self.recovered)));
        if let Some(out) = &self.out {
            s.push_str(&format!("out        {out:?}\n"));
        }
        let zs = self
            .zero_sum
            .map_or("n/a", |z| if z { "holds" } else { "VIOLATED" });
        s.push_str(&format!("zero-sum   {zs}\n"));
        s.push_str(&format!("state      {}\n", hex::encode(self.state_hash)));
        s.push_str(&format!("duration   {:.3}s\n", self.duration.as_secs_f64()));
        s.push_str(&format!(
            "invariants {}\n",
            if self.invariants_hold() {
                "hold"
            } else {
                "FAIL"
            }
        ));
        s
    }
}

/// Runs one experiment and exports its transcript if the config names a path.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    let report = match cfg.group {
        GroupChoice::Production => run_with(cfg, GroupParams::<Production>::production().shared())?,
        GroupChoice::ToyInsecure => run_with(cfg, GroupParams::<ToyGroup>::toy().shared())?,
    };
    if let Some(path) = &cfg.transcript {
        report.transcript.export(path)?;
    }
    Ok(report)
}

/// Drains phase events. The blockchain runs on this thread, so any transition caused
/// by an already-handled message has been emitted by now.
fn wait_for(rx: &Receiver<PhaseEvent>, id: &ContractId, phase: Phase) -> bool {
    rx.try_iter().any(|ev| ev.id == *id && ev.phase == phase)
}

/// Runs the experiment in group `G`.
pub fn run_with<G: PrimeGroup>(
    cfg: &RunConfig,
    params: SharedParams<G>,
) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    let domain = cfg.validate()?;
    let contract = cfg.contract()?;
    let n = cfg.parties();
    let ell = domain.ell() as usize;
    let names = PartyId::numbered(n);
    let id = ContractId::derive(contract.as_ref(), &names);
    let aux = cfg.aux_bytes();
    let mut adv_rng = ChaCha20Rng::from_seed(derive_seed(cfg.seed, "adversary"));

    let mut bc = Blockchain::new(params.clone(), ell);
    let (tx, phase_rx) = channel();
    bc.watch(tx);
    let mpc = IdealMpc::new(params.clone(), derive_seed(cfg.seed, "mpc"));
    let mut parties: Vec<Party<G>> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let rng = ChaCha20Rng::from_seed(derive_seed(cfg.seed, &format!("party/{i}")));
            Party::new(name.clone(), params.clone(), domain, rng)
        })
        .collect();
    let inboxes: Vec<Receiver<Delivery<G>>> = names.iter().map(|p| mpc.connect(p)).collect();

    // Freeze: build messages concurrently, deliver in participant order.
    let freezes: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = parties
            .iter_mut()
            .zip(&cfg.values)
            .zip(aux.iter().cloned())
            .map(|((p, v), a)| {
                let contract = contract.clone();
                let names = &names;
                s.spawn(move || p.freeze(contract, names, *v, a))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("party thread"))
            .collect()
    });
    let mut freezes = freezes
        .into_iter()
        .collect::<Result<Vec<_>, PartyError>>()?;

    if cfg.adversary == Adversary::CorruptBitProof {
        let j = adv_rng.gen_range(0..n);
        let k = adv_rng.gen_range(0..ell);
        let slot = adv_rng.gen_range(0..2);
        let proof = &mut freezes[j].pairs[k][slot].proof;
        proof.zb = params
            .group
            .scalar_add(&proof.zb, &params.group.scalar_one());
    }
    for (i, msg) in freezes.iter().enumerate() {
        let _ = bc.handle_freeze(&names[i], msg);
        if i == 0 {
            match cfg.adversary {
                Adversary::DuplicateFreeze => {
                    let _ = bc.handle_freeze(&names[0], msg);
                }
                Adversary::EarlyFinalize => {
                    let x = params.group.random_scalar(&mut adv_rng);
                    let early = FinalizeMessage {
                        id,
                        selected: vec![Vec::new(); n],
                        out: Vec::new(),
                        proof: schnorr_prove(
                            &params,
                            &params.h,
                            &params.h,
                            &x,
                            &id.0,
                            &mut adv_rng,
                        ),
                    };
                    let _ = bc.handle_finalize(&names[0], &early);
                }
                _ => {}
            }
        }
    }

    let mut stalled = None;
    let mut mpc_abort = None;
    let mut recovered = vec![None; n];
    let mut out = None;

    if wait_for(&phase_rx, &id, Phase::Compute) {
        let records = bc.freeze_records(&id);
        // Compute and local finalize: every party submits to M concurrently and
        // checks the same y on its own.
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = parties
                .iter_mut()
                .zip(inboxes)
                .map(|(p, inbox)| {
                    let (records, mpc) = (&records, &mpc);
                    s.spawn(move || -> Result<_, PartyError> {
                        let (job, x) = p.u_prepare_compute(&id, records)?;
                        mpc.submit(p.id(), job, x);
                        let delivery = inbox
                            .recv_timeout(MPC_WAIT)
                            .map_err(|_| PartyError::NoComputation)?;
                        let local = p.u_finalize(&delivery.descriptor, &delivery.y, records);
                        Ok((delivery.y, local))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("party thread"))
                .collect()
        });
        let results = results
            .into_iter()
            .collect::<Result<Vec<_>, PartyError>>()?;
        let y = results[0].0.clone();
        if let MpcOutput::Abort { party, reason } = &y {
            mpc_abort = Some(match party {
                Some(j) => format!("{reason} (party {})", j + 1),
                None => reason.to_string(),
            });
        }
        let senders: Vec<usize> = match cfg.finalizer {
            Finalizer::Party(i) => vec![i - 1],
            Finalizer::All => (0..n).collect(),
        };
        match (cfg.adversary, &y) {
            (
                Adversary::SwapCandidate | Adversary::BadContract,
                MpcOutput::Success {
                    selected,
                    proof,
                    out,
                },
            ) => {
                // A corrupted finalizer forwards y without the local check.
                let mut selected = selected.clone();
                if cfg.adversary == Adversary::SwapCandidate {
                    let j = adv_rng.gen_range(0..n);
                    let k = adv_rng.gen_range(0..ell);
                    let set = records[j].candidate_sets[k];
                    selected[j][k] = if set[0] == selected[j][k] {
                        set[1]
                    } else {
                        set[0]
                    };
                }
                let msg = FinalizeMessage {
                    id,
                    selected,
                    out: out.clone(),
                    proof: *proof,
                };
                let _ = bc.handle_finalize(&names[senders[0]], &msg);
            }
            _ => {
                for &i in &senders {
                    if let Ok(fin) = &results[i].1 {
                        let _ = bc.handle_finalize(&names[i], &fin.message);
                    }
                }
            }
        }
        for (i, (_, local)) in results.iter().enumerate() {
            if let Ok(fin) = local {
                recovered[i] = Some(fin.opening.value);
                out = Some(String::from_utf8_lossy(&fin.out).into_owned());
            }
        }
        if !wait_for(&phase_rx, &id, Phase::Finalized) {
            stalled = Some(Phase::Finalized);
        }
    } else {
        stalled = Some(Phase::Compute);
    }

    let inputs: Vec<ContractInput> = cfg
        .values
        .iter()
        .zip(&aux)
        .map(|(v, a)| ContractInput {
            value: *v,
            aux: a.clone(),
        })
        .collect();
    let expected = match contract.evaluate(&inputs) {
        ContractResult::Success { values, .. } => Some(values),
        ContractResult::Failure => None,
    };
    let zero_sum = recovered
        .iter()
        .copied()
        .collect::<Option<Vec<u64>>>()
        .map(|r| {
            r.iter().map(|v| u128::from(*v)).sum::<u128>()
                == cfg.values.iter().map(|v| u128::from(*v)).sum::<u128>()
        });

    let snaps = bc.snapshot_log();
    let rejections_pure = snaps
        .windows(2)
        .all(|w| w[1].outcome.rejection().is_none() || w[1].state_hash == w[0].state_hash);
    let rejected = bc
        .message_log()
        .iter()
        .filter_map(|m| match &snaps[m.seq].outcome {
            Outcome::Rejected { kind, reason } => Some(RejectionEntry {
                seq: m.seq,
                sender: m.sender.0.clone(),
                kind: kind.to_string(),
                code: reason.code().to_string(),
            }),
            _ => None,
        })
        .collect::<Vec<_>>();
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        group: params.group.name().into(),
        ell: domain.ell(),
        contract: contract.name().into(),
        contract_id: id.to_hex(),
        parties: names.iter().map(|p| p.0.clone()).collect(),
        seed: cfg.seed,
        adversary: cfg.adversary.as_str().into(),
    };
    Ok(RunReport {
        group: params.group.name().into(),
        adversary: cfg.adversary,
        contract_id: id,
        phase: bc.phase(&id),
        stalled,
        accepted: bc.message_log().len() - rejected.len(),
        rejected,
        inputs: cfg.values.clone(),
        expected,
        recovered,
        out,
        mpc_abort,
        zero_sum,
        rejections_pure,
        state_hash: bc.state_hash(),
        duration: started.elapsed(),
        transcript: Transcript::from_blockchain(header, &bc),
    })
}
