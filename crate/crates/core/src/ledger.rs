//! Stable-coin ledger: free balances, allowances and per-contract
//! segregated buckets.
//!
//! All amounts are integer minor units. Every successful mutation appends
//! one record to the ledger's journal; failed calls leave both the balances
//! and the journal untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::ops::{Add, Sub};

use thiserror::Error;

use crate::journal::{EventKind, EventRecord, Journal};
use crate::Tick;

/// Pseudo-sender recorded on journal entries for newly issued supply.
pub const MINT_SOURCE: &str = "MINT";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(String);

impl AccountId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractId(String);

impl ContractId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Non-negative cash amount in minor currency units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn minor(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0.checked_add(rhs.0).expect("amount overflow"))
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0.checked_sub(rhs.0).expect("amount underflow"))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Margin,
    Fee,
}

impl Bucket {
    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Margin => "MARGIN",
            Bucket::Fee => "FEE",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("account label must not be empty")]
    EmptyLabel,
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("{0} is not the issuer")]
    NotIssuer(AccountId),
    #[error("insufficient balance on {account}: need {needed}, have {available}")]
    InsufficientBalance {
        account: AccountId,
        needed: Amount,
        available: Amount,
    },
    #[error("insufficient allowance {owner}->{spender}: need {needed}, have {available}")]
    InsufficientAllowance {
        owner: AccountId,
        spender: AccountId,
        needed: Amount,
        available: Amount,
    },
    #[error("insufficient {bucket} bucket for {party} on {contract}: need {needed}, have {available}")]
    InsufficientSegregated {
        contract: ContractId,
        party: AccountId,
        bucket: Bucket,
        needed: Amount,
        available: Amount,
    },
    #[error("contract id {0} already registered")]
    DuplicateContract(ContractId),
    #[error("balance overflow")]
    Overflow,
}

/// Receives the notification half of `approve_and_call`.
pub trait ApprovalListener {
    fn on_approval(&mut self, owner: &AccountId, spender: &AccountId, amount: Amount, data: &[u8]);
}

type SegKey = (ContractId, AccountId, Bucket);

#[derive(Clone, Debug)]
pub struct Ledger {
    accounts: BTreeMap<AccountId, Amount>,
    allowances: BTreeMap<(AccountId, AccountId), Amount>,
    segregated: BTreeMap<SegKey, Amount>,
    contracts: BTreeSet<ContractId>,
    issuer: AccountId,
    minted: u128,
    burned: u128,
    now: Tick,
    journal: Journal,
}

impl Ledger {
    /// Creates a ledger whose first account is the issuer.
    pub fn new(issuer_label: &str) -> Result<Self, LedgerError> {
        if issuer_label.is_empty() {
            return Err(LedgerError::EmptyLabel);
        }
        let issuer = AccountId(issuer_label.to_string());
        let mut accounts = BTreeMap::new();
        accounts.insert(issuer.clone(), Amount::ZERO);
        Ok(Self {
            accounts,
            allowances: BTreeMap::new(),
            segregated: BTreeMap::new(),
            contracts: BTreeSet::new(),
            issuer,
            minted: 0,
            burned: 0,
            now: 0,
            journal: Journal::new(),
        })
    }

    pub fn issuer(&self) -> &AccountId {
        &self.issuer
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Advances the timestamp stamped onto subsequent journal records.
    pub fn set_time(&mut self, now: Tick) {
        self.now = now;
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn into_journal(self) -> Journal {
        self.journal
    }

    /// Appends a non-ledger record (state transitions, valuations, ...).
    pub fn record(&mut self, record: EventRecord) {
        self.journal.append(&record);
    }

    pub fn open_account(&mut self, label: &str) -> Result<AccountId, LedgerError> {
        if label.is_empty() {
            return Err(LedgerError::EmptyLabel);
        }
        let mut candidate = label.to_string();
        let mut n = 1u64;
        while self.accounts.contains_key(&AccountId(candidate.clone())) {
            n += 1;
            candidate = format!("{label}#{n}");
        }
        let id = AccountId(candidate);
        self.accounts.insert(id.clone(), Amount::ZERO);
        Ok(id)
    }

    pub fn account_ids(&self) -> impl Iterator<Item = &AccountId> {
        self.accounts.keys()
    }

    pub fn has_account(&self, id: &AccountId) -> bool {
        self.accounts.contains_key(id)
    }

    /// Claims a contract id for segregated buckets. Ids are never reused.
    pub fn register_contract(&mut self, contract: &ContractId) -> Result<(), LedgerError> {
        if !self.contracts.insert(contract.clone()) {
            return Err(LedgerError::DuplicateContract(contract.clone()));
        }
        Ok(())
    }

    pub fn balance_of(&self, id: &AccountId) -> Result<Amount, LedgerError> {
        self.accounts
            .get(id)
            .copied()
            .ok_or_else(|| LedgerError::UnknownAccount(id.clone()))
    }

    pub fn allowance(&self, owner: &AccountId, spender: &AccountId) -> Amount {
        self.allowances
            .get(&(owner.clone(), spender.clone()))
            .copied()
            .unwrap_or_default()
    }

    pub fn segregated(&self, contract: &ContractId, party: &AccountId, bucket: Bucket) -> Amount {
        self.segregated
            .get(&(contract.clone(), party.clone(), bucket))
            .copied()
            .unwrap_or_default()
    }

    /// Free balance plus every segregated bucket owned by `id`.
    pub fn wealth_of(&self, id: &AccountId) -> Amount {
        let free = self.accounts.get(id).copied().unwrap_or_default();
        self.segregated
            .iter()
            .filter(|((_, p, _), _)| p == id)
            .fold(free, |acc, (_, v)| acc + *v)
    }

    pub fn total_supply(&self) -> u128 {
        self.minted - self.burned
    }

    /// Sum over all free and segregated balances.
    pub fn total_held(&self) -> u128 {
        let free: u128 = self.accounts.values().map(|a| a.0 as u128).sum();
        let seg: u128 = self.segregated.values().map(|a| a.0 as u128).sum();
        free + seg
    }

    pub fn is_conserved(&self) -> bool {
        self.total_held() == self.total_supply()
    }

    fn require(&self, id: &AccountId) -> Result<Amount, LedgerError> {
        self.balance_of(id)
    }

    fn require_funds(&self, id: &AccountId, amount: Amount) -> Result<Amount, LedgerError> {
        let available = self.require(id)?;
        if available < amount {
            return Err(LedgerError::InsufficientBalance {
                account: id.clone(),
                needed: amount,
                available,
            });
        }
        Ok(available)
    }

    fn credit(&mut self, id: &AccountId, amount: Amount) -> Result<(), LedgerError> {
        let bal = self.require(id)?;
        let next = bal.checked_add(amount).ok_or(LedgerError::Overflow)?;
        self.accounts.insert(id.clone(), next);
        Ok(())
    }

    fn event(&self, kind: EventKind, actor: &AccountId) -> EventRecord {
        EventRecord::new(self.now, kind, actor.as_str())
    }

    pub fn mint(&mut self, caller: &AccountId, to: &AccountId, amount: Amount) -> Result<(), LedgerError> {
        if caller != &self.issuer {
            return Err(LedgerError::NotIssuer(caller.clone()));
        }
        let bal = self.require(to)?;
        if amount.is_zero() {
            return Ok(());
        }
        let next = bal.checked_add(amount).ok_or(LedgerError::Overflow)?;
        self.accounts.insert(to.clone(), next);
        self.minted += amount.0 as u128;
        let rec = self
            .event(EventKind::Transfer, caller)
            .with("from", MINT_SOURCE)
            .with("to", to)
            .with("amount", amount);
        self.record(rec);
        Ok(())
    }

    pub fn burn(&mut self, caller: &AccountId, from: &AccountId, amount: Amount) -> Result<(), LedgerError> {
        if caller != &self.issuer {
            return Err(LedgerError::NotIssuer(caller.clone()));
        }
        let bal = self.require_funds(from, amount)?;
        if amount.is_zero() {
            return Ok(());
        }
        self.accounts.insert(from.clone(), bal - amount);
        self.burned += amount.0 as u128;
        let rec = self
            .event(EventKind::Burn, caller)
            .with("from", from)
            .with("amount", amount);
        self.record(rec);
        Ok(())
    }

    pub fn transfer(&mut self, from: &AccountId, to: &AccountId, amount: Amount) -> Result<(), LedgerError> {
        self.require(to)?;
        self.require_funds(from, amount)?;
        self.move_free(from, to, amount)?;
        let rec = self
            .event(EventKind::Transfer, from)
            .with("from", from)
            .with("to", to)
            .with("amount", amount);
        self.record(rec);
        Ok(())
    }

    fn move_free(&mut self, from: &AccountId, to: &AccountId, amount: Amount) -> Result<(), LedgerError> {
        if from == to {
            return Ok(());
        }
        // Check the credit side first so a failure leaves `from` untouched.
        self.require(to)?
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        let bal = self.require_funds(from, amount)?;
        self.accounts.insert(from.clone(), bal - amount);
        self.credit(to, amount)
    }

    pub fn approve(&mut self, owner: &AccountId, spender: &AccountId, amount: Amount) -> Result<(), LedgerError> {
        self.require(owner)?;
        self.require(spender)?;
        self.allowances
            .insert((owner.clone(), spender.clone()), amount);
        let rec = self
            .event(EventKind::Approval, owner)
            .with("owner", owner)
            .with("spender", spender)
            .with("amount", amount);
        self.record(rec);
        Ok(())
    }

    /// `approve` followed by a synchronous notification to `listener`.
    pub fn approve_and_call(
        &mut self,
        owner: &AccountId,
        spender: &AccountId,
        amount: Amount,
        data: &[u8],
        listener: &mut dyn ApprovalListener,
    ) -> Result<(), LedgerError> {
        self.approve(owner, spender, amount)?;
        listener.on_approval(owner, spender, amount, data);
        Ok(())
    }

    pub fn transfer_from(
        &mut self,
        spender: &AccountId,
        from: &AccountId,
        to: &AccountId,
        amount: Amount,
    ) -> Result<(), LedgerError> {
        self.require(spender)?;
        self.require(to)?;
        let allowed = self.allowance(from, spender);
        if allowed < amount {
            return Err(LedgerError::InsufficientAllowance {
                owner: from.clone(),
                spender: spender.clone(),
                needed: amount,
                available: allowed,
            });
        }
        self.require_funds(from, amount)?;
        self.move_free(from, to, amount)?;
        self.allowances
            .insert((from.clone(), spender.clone()), allowed - amount);
        let rec = self
            .event(EventKind::Transfer, spender)
            .with("from", from)
            .with("to", to)
            .with("amount", amount)
            .with("spender", spender);
        self.record(rec);
        Ok(())
    }

    pub fn lock_segregated(
        &mut self,
        contract: &ContractId,
        party: &AccountId,
        bucket: Bucket,
        amount: Amount,
    ) -> Result<(), LedgerError> {
        let bal = self.require_funds(party, amount)?;
        let key = (contract.clone(), party.clone(), bucket);
        let seg = self.segregated.get(&key).copied().unwrap_or_default();
        let next = seg.checked_add(amount).ok_or(LedgerError::Overflow)?;
        self.accounts.insert(party.clone(), bal - amount);
        self.segregated.insert(key, next);
        let rec = self
            .event(EventKind::Lock, party)
            .with("contract", contract)
            .with("party", party)
            .with("bucket", bucket)
            .with("amount", amount);
        self.record(rec);
        Ok(())
    }

    /// Moves `amount` out of a bucket into the free balance of `to`.
    ///
    /// Journaled as `Release` when `to` owns the bucket and as `Transfer`
    /// when value changes hands.
    pub fn release_segregated(
        &mut self,
        contract: &ContractId,
        party: &AccountId,
        bucket: Bucket,
        amount: Amount,
        to: &AccountId,
    ) -> Result<(), LedgerError> {
        self.release_as(contract.as_str(), contract, party, bucket, amount, to)
    }

    fn release_as(
        &mut self,
        actor: &str,
        contract: &ContractId,
        party: &AccountId,
        bucket: Bucket,
        amount: Amount,
        to: &AccountId,
    ) -> Result<(), LedgerError> {
        let key = (contract.clone(), party.clone(), bucket);
        let seg = self.segregated.get(&key).copied().unwrap_or_default();
        if seg < amount {
            return Err(LedgerError::InsufficientSegregated {
                contract: contract.clone(),
                party: party.clone(),
                bucket,
                needed: amount,
                available: seg,
            });
        }
        self.require(to)?
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        self.segregated.insert(key, seg - amount);
        self.credit(to, amount)?;
        let rec = if to == party {
            EventRecord::new(self.now, EventKind::Release, actor)
                .with("party", party)
        } else {
            EventRecord::new(self.now, EventKind::Transfer, actor)
                .with("from", party)
                .with("to", to)
        }
        .with("contract", contract)
        .with("bucket", bucket)
        .with("amount", amount);
        self.record(rec);
        Ok(())
    }

    /// Owner-initiated withdrawal from its own bucket; journaled with the
    /// owner as actor.
    pub fn withdraw_segregated(
        &mut self,
        contract: &ContractId,
        party: &AccountId,
        bucket: Bucket,
        amount: Amount,
    ) -> Result<(), LedgerError> {
        self.release_as(party.as_str(), contract, party, bucket, amount, party)
    }

    /// Writes `account_id,bucket,balance_minor_units` rows: free balances
    /// first, then every segregated bucket, each in sorted order.
    pub fn export_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["account_id", "bucket", "balance_minor_units"])?;
        for (id, bal) in &self.accounts {
            out.write_record([id.as_str(), "FREE", &bal.to_string()])?;
        }
        for ((contract, party, bucket), bal) in &self.segregated {
            let tag = format!("{bucket}:{contract}");
            out.write_record([party.as_str(), &tag, &bal.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Ledger, AccountId, AccountId, AccountId) {
        let mut l = Ledger::new("central-bank").unwrap();
        let issuer = l.issuer().clone();
        let b1 = l.open_account("bank1").unwrap();
        let b2 = l.open_account("bank2").unwrap();
        (l, issuer, b1, b2)
    }

    #[test]
    fn open_account_starts_empty_and_ids_are_unique() {
        let (mut l, _, b1, _) = setup();
        assert_eq!(l.balance_of(&b1).unwrap(), Amount(0));
        let again = l.open_account("bank1").unwrap();
        assert_ne!(again, b1);
        assert_eq!(l.open_account(""), Err(LedgerError::EmptyLabel));
    }

    #[test]
    fn mint_rules() {
        let (mut l, issuer, b1, b2) = setup();
        l.mint(&issuer, &b1, Amount(100_000)).unwrap();
        assert_eq!(l.balance_of(&b1).unwrap(), Amount(100_000));
        assert!(matches!(l.mint(&b2, &b1, Amount(1)), Err(LedgerError::NotIssuer(_))));
        let before = l.journal().len();
        l.mint(&issuer, &b1, Amount(0)).unwrap();
        assert_eq!(l.total_supply(), 100_000);
        assert_eq!(l.journal().len(), before);
    }

    #[test]
    fn transfer_rules() {
        let (mut l, issuer, b1, b2) = setup();
        l.mint(&issuer, &b1, Amount(100)).unwrap();
        l.transfer(&b1, &b2, Amount(30)).unwrap();
        assert_eq!(l.balance_of(&b1).unwrap(), Amount(70));
        assert_eq!(l.balance_of(&b2).unwrap(), Amount(30));

        let n = l.journal().len();
        l.transfer(&b1, &b2, Amount(0)).unwrap();
        assert_eq!(l.journal().len(), n + 1);

        let b3 = l.open_account("bank3").unwrap();
        l.mint(&issuer, &b3, Amount(10)).unwrap();
        let snapshot = (l.balance_of(&b3).unwrap(), l.journal().len());
        assert!(matches!(
            l.transfer(&b3, &b1, Amount(11)),
            Err(LedgerError::InsufficientBalance { .. })
        ));
        assert_eq!(snapshot, (l.balance_of(&b3).unwrap(), l.journal().len()));
    }

    #[test]
    fn approve_overwrites() {
        let (mut l, _, b1, b2) = setup();
        l.approve(&b1, &b2, Amount(500)).unwrap();
        assert_eq!(l.allowance(&b1, &b2), Amount(500));
        l.approve(&b1, &b2, Amount(200)).unwrap();
        assert_eq!(l.allowance(&b1, &b2), Amount(200));
        let ghost = AccountId("ghost".into());
        assert_eq!(
            l.approve(&b1, &ghost, Amount(1)),
            Err(LedgerError::UnknownAccount(ghost))
        );
    }

    #[test]
    fn approve_and_call_notifies() {
        struct Seen(Vec<(AccountId, Amount, Vec<u8>)>);
        impl ApprovalListener for Seen {
            fn on_approval(&mut self, _o: &AccountId, s: &AccountId, a: Amount, d: &[u8]) {
                self.0.push((s.clone(), a, d.to_vec()));
            }
        }
        let (mut l, _, b1, b2) = setup();
        let mut seen = Seen(vec![]);
        l.approve_and_call(&b1, &b2, Amount(7), b"hi", &mut seen).unwrap();
        assert_eq!(seen.0, vec![(b2.clone(), Amount(7), b"hi".to_vec())]);
        assert_eq!(l.allowance(&b1, &b2), Amount(7));
    }

    #[test]
    fn transfer_from_rules() {
        let (mut l, issuer, b1, b2) = setup();
        let sdc = l.open_account("sdc").unwrap();
        l.mint(&issuer, &b1, Amount(1000)).unwrap();
        l.approve(&b1, &sdc, Amount(500)).unwrap();
        l.transfer_from(&sdc, &b1, &b2, Amount(300)).unwrap();
        assert_eq!(l.allowance(&b1, &sdc), Amount(200));
        assert_eq!(l.balance_of(&b2).unwrap(), Amount(300));

        l.approve(&b1, &sdc, Amount(100)).unwrap();
        assert!(matches!(
            l.transfer_from(&sdc, &b1, &b2, Amount(101)),
            Err(LedgerError::InsufficientAllowance { .. })
        ));

        l.approve(&b1, &sdc, Amount(10_000)).unwrap();
        assert!(matches!(
            l.transfer_from(&sdc, &b1, &b2, Amount(5000)),
            Err(LedgerError::InsufficientBalance { .. })
        ));
        assert_eq!(l.allowance(&b1, &sdc), Amount(10_000));
    }

    #[test]
    fn burn_rules() {
        let (mut l, issuer, b1, _) = setup();
        l.mint(&issuer, &b1, Amount(100)).unwrap();
        l.burn(&issuer, &b1, Amount(100)).unwrap();
        assert_eq!(l.balance_of(&b1).unwrap(), Amount(0));
        assert_eq!(l.total_supply(), 0);
        l.burn(&issuer, &b1, Amount(0)).unwrap();
        assert!(matches!(l.burn(&b1, &b1, Amount(0)), Err(LedgerError::NotIssuer(_))));
        assert!(l.is_conserved());
    }

    #[test]
    fn segregation_rules() {
        let (mut l, issuer, b1, b2) = setup();
        let c = ContractId::new("sdc-1");
        l.mint(&issuer, &b1, Amount(1000)).unwrap();
        l.lock_segregated(&c, &b1, Bucket::Margin, Amount(400)).unwrap();
        assert_eq!(l.balance_of(&b1).unwrap(), Amount(600));
        assert_eq!(l.segregated(&c, &b1, Bucket::Margin), Amount(400));
        l.lock_segregated(&c, &b1, Bucket::Fee, Amount(600)).unwrap();
        assert_eq!(l.balance_of(&b1).unwrap(), Amount(0));
        assert!(matches!(
            l.lock_segregated(&c, &b1, Bucket::Fee, Amount(1)),
            Err(LedgerError::InsufficientBalance { .. })
        ));

        l.release_segregated(&c, &b1, Bucket::Margin, Amount(100), &b2).unwrap();
        assert_eq!(l.balance_of(&b2).unwrap(), Amount(100));
        l.release_segregated(&c, &b1, Bucket::Fee, Amount(600), &b1).unwrap();
        assert_eq!(l.segregated(&c, &b1, Bucket::Fee), Amount(0));
        assert!(matches!(
            l.release_segregated(&c, &b1, Bucket::Margin, Amount(301), &b1),
            Err(LedgerError::InsufficientSegregated { .. })
        ));
        assert_eq!(l.wealth_of(&b1), Amount(900));
        assert!(l.is_conserved());
    }

    #[test]
    fn cross_owner_release_is_a_transfer() {
        let (mut l, issuer, b1, b2) = setup();
        let c = ContractId::new("c");
        l.mint(&issuer, &b1, Amount(10)).unwrap();
        l.lock_segregated(&c, &b1, Bucket::Margin, Amount(10)).unwrap();
        l.release_segregated(&c, &b1, Bucket::Margin, Amount(4), &b2).unwrap();
        l.release_segregated(&c, &b1, Bucket::Margin, Amount(6), &b1).unwrap();
        let kinds: Vec<_> = l.journal().records().unwrap().iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![EventKind::Transfer, EventKind::Lock, EventKind::Transfer, EventKind::Release]
        );
    }

    #[test]
    fn duplicate_contract_rejected() {
        let (mut l, ..) = setup();
        let c = ContractId::new("c");
        l.register_contract(&c).unwrap();
        assert_eq!(l.register_contract(&c), Err(LedgerError::DuplicateContract(c)));
    }

    #[test]
    fn csv_export_layout() {
        let (mut l, issuer, b1, _) = setup();
        let c = ContractId::new("sdc-1");
        l.mint(&issuer, &b1, Amount(50)).unwrap();
        l.lock_segregated(&c, &b1, Bucket::Fee, Amount(20)).unwrap();
        let mut buf = Vec::new();
        l.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "account_id,bucket,balance_minor_units");
        assert!(lines.contains(&"bank1,FREE,30"));
        assert!(lines.contains(&"bank1,FEE:sdc-1,20"));
    }
}
