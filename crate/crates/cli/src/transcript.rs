//! Machine-readable record of a scenario run.

use std::fmt::Write as _;

use chainid_core::economics::{FeeSchedule, Template};
use chainid_core::ledger::{Address, Allocation, BlockHash, BranchId, Eviction, OutPoint, TxOutput, Txid};
use chainid_core::protocol::{IdentityStatus, LightweightVerdict, ReportRow, SpendKind, Verdict};
use serde::Serialize;

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub fee_schedule: FeeSchedule,
    pub actors: Vec<ActorEntry>,
    pub genesis: GenesisEntry,
    pub steps: Vec<StepEntry>,
    pub final_state: FinalState,
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ActorEntry {
    pub name: String,
    pub role: &'static str,
    pub address: Address,
}

#[derive(Clone, Debug, Serialize)]
pub struct GenesisEntry {
    pub block: BlockHash,
    pub txid: Txid,
    pub allocations: Vec<Allocation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepEntry {
    pub index: usize,
    pub action: &'static str,
    pub expect: Option<String>,
    /// `ok`, an error kind, or for verification the decision.
    pub observed: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<StepDetail>,
    /// Ledger changes caused by this step, in order.
    pub ledger: Vec<LedgerRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub step: usize,
    pub action: &'static str,
    pub observed: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LedgerRecord {
    Submitted {
        txid: Txid,
        branch: BranchId,
        label: &'static str,
        template: Option<Template>,
        classification: Option<SpendKind>,
        input_value: u64,
        outputs: Vec<TxOutput>,
        fee: u64,
    },
    Mined {
        branch: BranchId,
        height: u32,
        hash: BlockHash,
        included: Vec<Txid>,
        evicted: Vec<Eviction>,
    },
    Forked {
        branch: BranchId,
        at_height: u32,
    },
    Reorged {
        from: BranchId,
        to: BranchId,
        height: u32,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Payout {
    pub address: Address,
    pub value: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchSpend {
    pub branch: BranchId,
    pub height: u32,
    pub spender: Option<Txid>,
    pub kind: Option<SpendKind>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum StepDetail {
    Setup {
        issuer: String,
        publication: Vec<Txid>,
        generators: usize,
    },
    Enroll {
        identity: String,
        publish: Txid,
        issuer: Address,
        user: Address,
        uses: u32,
        value: u64,
        commitment: String,
    },
    Request {
        request: String,
        txid: Txid,
        proof_hash: String,
        locator: String,
        tokens: Vec<OutPoint>,
        token_values: Vec<u64>,
    },
    Verify {
        request: String,
        txid: Txid,
        full: Verdict,
        header_only: Verdict,
        #[serde(skip_serializing_if = "Option::is_none")]
        explorer: Option<Verdict>,
        equivalent: bool,
    },
    Accept {
        request: String,
        txid: Txid,
        payouts: Vec<Payout>,
    },
    Revoke {
        identity: String,
        txid: Txid,
        signer: u8,
        burned: bool,
    },
    Fork {
        branch: BranchId,
        at_height: u32,
    },
    Reorg {
        switched: bool,
        active_branch: BranchId,
        height: u32,
    },
    Report {
        user: String,
        rows: Vec<ReportRow>,
    },
    Lightweight {
        verdict: LightweightVerdict,
    },
    Trace {
        identity: String,
        origin: OutPoint,
        branches: Vec<BranchSpend>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchEntry {
    pub branch: BranchId,
    pub height: u32,
    pub tip: BlockHash,
}

#[derive(Clone, Debug, Serialize)]
pub struct Balance {
    pub name: String,
    pub address: Address,
    pub satoshi: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityEntry {
    pub label: String,
    pub publish: Txid,
    /// `None` when the publish is not on the active branch.
    pub status: Option<IdentityStatus>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FinalState {
    pub active_branch: BranchId,
    pub height: u32,
    pub branches: Vec<BranchEntry>,
    pub mempool: usize,
    /// Confirmed balances on the active branch.
    pub balances: Vec<Balance>,
    pub identities: Vec<IdentityEntry>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    /// Every verification step with its decisions.
    pub fn verifications(&self) -> impl Iterator<Item = (&StepEntry, &Verdict, &Verdict)> {
        self.steps.iter().filter_map(|s| match &s.detail {
            Some(StepDetail::Verify { full, header_only, .. }) => Some((s, full, header_only)),
            _ => None,
        })
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {} (seed {}, {} sat/byte, dust {}, {} USD/BTC)",
            self.scenario, self.seed, self.fee_schedule.rate, self.fee_schedule.dust, self.fee_schedule.usd_per_btc
        );
        for step in &self.steps {
            let mark = if step.passed { "ok  " } else { "FAIL" };
            let _ = write!(out, "{mark} [{:>2}] {:<14} {}", step.index, step.action, describe(step));
            if let Some(e) = &step.expect {
                let _ = write!(out, " (expected {e})");
            }
            out.push('\n');
        }
        let f = &self.final_state;
        let _ = writeln!(out, "active branch {} at height {}, {} queued", f.active_branch, f.height, f.mempool);
        for b in &f.balances {
            let _ = writeln!(out, "  {:<16} {:>12} sat", b.name, b.satoshi);
        }
        for id in &f.identities {
            match &id.status {
                Some(s) => {
                    let state = match &s.state {
                        chainid_core::protocol::TokenState::Active => "active".to_string(),
                        chainid_core::protocol::TokenState::Exhausted => "exhausted".to_string(),
                        chainid_core::protocol::TokenState::Revoked { txid, signer } => {
                            format!("revoked by {txid} (signer {signer})")
                        }
                    };
                    let _ = writeln!(out, "  identity {:<12} {}/{} uses, {} sat, {state}", id.label, s.uses, s.limit, s.value);
                }
                None => {
                    let _ = writeln!(out, "  identity {:<12} not on the active branch", id.label);
                }
            }
        }
        if let Some(fail) = &self.failure {
            let _ = writeln!(out, "step {} ({}) failed: {}", fail.step, fail.action, fail.message);
        }
        out
    }
}

fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::Accept { .. } => "accept",
        Verdict::Reject(r) => r.name(),
    }
}

fn describe(step: &StepEntry) -> String {
    let submitted = step.ledger.iter().filter(|r| matches!(r, LedgerRecord::Submitted { .. })).count();
    match &step.detail {
        Some(StepDetail::Verify { request, full, header_only, explorer, .. }) => {
            let mut s = format!("{request}: full={} header_only={}", verdict_word(full), verdict_word(header_only));
            if let Some(e) = explorer {
                let _ = write!(s, " explorer={}", verdict_word(e));
            }
            s
        }
        Some(StepDetail::Accept { request, payouts, .. }) => format!("{request}: {} issuer payout(s)", payouts.len()),
        Some(StepDetail::Request { request, token_values, .. }) => {
            format!("{request}: token now {:?} sat", token_values)
        }
        Some(StepDetail::Enroll { identity, uses, value, .. }) => format!("{identity}: {uses} uses, token {value} sat"),
        Some(StepDetail::Revoke { identity, signer, burned, .. }) => {
            format!("{identity}: signer {signer}{}", if *burned { ", residual burned" } else { "" })
        }
        Some(StepDetail::Fork { branch, at_height }) => format!("branch {branch} from height {at_height}"),
        Some(StepDetail::Reorg { switched, active_branch, height }) => {
            format!("active branch {active_branch} at height {height}{}", if *switched { "" } else { " (unchanged)" })
        }
        Some(StepDetail::Report { user, rows }) => format!("{user}: {} authentication(s)", rows.len()),
        Some(StepDetail::Lightweight { verdict }) => {
            format!("accepted={} weak_linkage={}", verdict.accepted, verdict.weak_linkage)
        }
        Some(StepDetail::Trace { identity, branches, .. }) => {
            let spent = branches.iter().filter(|b| b.spender.is_some()).count();
            format!("{identity}: spent on {spent} of {} branch(es)", branches.len())
        }
        Some(StepDetail::Setup { issuer, publication, .. }) => format!("{issuer}: {} publication tx", publication.len()),
        None => match &step.error {
            Some(e) => format!("{}: {e}", step.observed),
            None => {
                let (blocks, txs) = step.ledger.iter().fold((0, 0), |(b, t), r| match r {
                    LedgerRecord::Mined { included, .. } => (b + 1, t + included.len()),
                    _ => (b, t),
                });
                format!("{blocks} block(s) with {txs} tx, {submitted} submitted")
            }
        },
    }
}
