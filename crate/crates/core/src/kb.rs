//! Knowledge bases as finite forward operators over concept sequences.
//!
//! A [`KnowledgeBase`] maps every sequence in `Z^m` (`|Z| = L`) to a label.
//! The [`AbductionIndex`] materializes the candidate pool `B` and, for each
//! label `y`, the abduction set `A(y)` of sequences the operator sends to `y`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};

/// A concept id in `[0, L)`.
pub type Concept = u32;

/// A final label produced by a knowledge base.
pub type Label = i64;

/// An ordered sequence of concepts of length `m`.
pub type ConceptSeq = Vec<Concept>;

/// Default cap on `|B|` when enumerating the full grid.
pub const DEFAULT_POOL_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Sum of the two halves, each read as a base-10 number (most significant digit first).
    Add { digits: usize },
    /// Product of the two halves.
    Mul { digits: usize },
    /// `z1 xor z2` over `{0, 1}`.
    Xor,
    /// `(num1 + num2) mod modulus`.
    ModAdd { modulus: u32, digits: usize },
    /// Explicit label for every tuple of `Z^m`, stored densely in mixed radix order.
    Table(Vec<Label>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeBase {
    name: String,
    arity: usize,
    concepts: usize,
    rule: Rule,
}

impl KnowledgeBase {
    pub fn addition(concepts: usize, digits: usize) -> Result<Self> {
        Self::arithmetic("add", concepts, digits, Rule::Add { digits })
    }

    pub fn multiplication(concepts: usize, digits: usize) -> Result<Self> {
        Self::arithmetic("mul", concepts, digits, Rule::Mul { digits })
    }

    pub fn xor() -> Self {
        KnowledgeBase { name: "xor".to_string(), arity: 2, concepts: 2, rule: Rule::Xor }
    }

    /// Modular addition. Bases above 10 are accepted with a warning.
    pub fn mod_add(modulus: u32, concepts: usize, digits: usize) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::ParameterOutOfRange(format!("modadd requires k >= 2, got {modulus}")));
        }
        if modulus > 10 {
            warn!("modadd base k = {modulus} lies outside the usual range 2..=10");
        }
        let mut kb = Self::arithmetic("modadd", concepts, digits, Rule::ModAdd { modulus, digits })?;
        kb.name = format!("modadd{modulus}");
        Ok(kb)
    }

    fn arithmetic(name: &str, concepts: usize, digits: usize, rule: Rule) -> Result<Self> {
        if digits == 0 {
            return Err(Error::ParameterOutOfRange("n_digits must be at least 1".into()));
        }
        if concepts == 0 {
            return Err(Error::ParameterOutOfRange("L must be at least 1".into()));
        }
        if digits > 1 && concepts > 10 {
            return Err(Error::ParameterOutOfRange(format!(
                "multi-digit arithmetic reads base-10 digits, so L must be <= 10 (got {concepts})"
            )));
        }
        if digits > 9 {
            return Err(Error::ParameterOutOfRange(format!("n_digits = {digits} overflows 64-bit labels")));
        }
        Ok(KnowledgeBase { name: name.to_string(), arity: 2 * digits, concepts, rule })
    }

    /// Builds a knowledge base from an explicit truth table, which must cover
    /// every tuple of `Z^m` exactly once (repeated identical rows are tolerated).
    pub fn from_table<I>(name: impl Into<String>, concepts: usize, arity: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ConceptSeq, Label)>,
    {
        if concepts == 0 || arity == 0 {
            return Err(Error::ParameterOutOfRange("truth tables need L >= 1 and m >= 1".into()));
        }
        let size = grid_size(concepts, arity);
        if size > DEFAULT_POOL_CAP as u128 {
            return Err(Error::BudgetExceeded { what: "truth table", size, cap: DEFAULT_POOL_CAP });
        }
        let mut dense: Vec<Option<Label>> = vec![None; size as usize];
        for (seq, label) in rows {
            check_seq(&seq, concepts, arity)?;
            let idx = grid_index(&seq, concepts);
            match dense[idx] {
                Some(prev) if prev != label => {
                    return Err(Error::ConflictingTable { seq, first: prev, second: label });
                }
                _ => dense[idx] = Some(label),
            }
        }
        let missing: Vec<usize> = (0..dense.len()).filter(|&i| dense[i].is_none()).collect();
        if let Some(&first) = missing.first() {
            return Err(Error::IncompleteTable { missing: grid_seq(first, concepts, arity), count: missing.len() });
        }
        Ok(KnowledgeBase {
            name: name.into(),
            arity,
            concepts,
            rule: Rule::Table(dense.into_iter().map(Option::unwrap).collect()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn concepts(&self) -> usize {
        self.concepts
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    /// The label the knowledge base entails for `z`.
    pub fn forward(&self, z: &[Concept]) -> Result<Label> {
        check_seq(z, self.concepts, self.arity)?;
        Ok(self.eval(z))
    }

    /// Evaluates without validating; `z` must have length `m` with ids `< L`.
    pub(crate) fn eval(&self, z: &[Concept]) -> Label {
        match &self.rule {
            Rule::Add { digits } => {
                let (a, b) = halves(z, *digits);
                a + b
            }
            Rule::Mul { digits } => {
                let (a, b) = halves(z, *digits);
                a * b
            }
            Rule::Xor => Label::from(z[0] ^ z[1]),
            Rule::ModAdd { modulus, digits } => {
                let (a, b) = halves(z, *digits);
                (a + b) % Label::from(*modulus)
            }
            Rule::Table(dense) => dense[grid_index(z, self.concepts)],
        }
    }
}

impl fmt::Display for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (L={}, m={})", self.name, self.concepts, self.arity)
    }
}

fn digits_to_number(digits: &[Concept]) -> Label {
    digits.iter().fold(0, |acc, &d| acc * 10 + Label::from(d))
}

fn halves(z: &[Concept], digits: usize) -> (Label, Label) {
    let (left, right) = z.split_at(digits);
    (digits_to_number(left), digits_to_number(right))
}

pub(crate) fn check_seq(z: &[Concept], concepts: usize, arity: usize) -> Result<()> {
    if z.len() != arity {
        return Err(Error::Arity { expected: arity, got: z.len() });
    }
    if let Some(&value) = z.iter().find(|&&v| v as usize >= concepts) {
        return Err(Error::Domain { value, concepts });
    }
    Ok(())
}

pub(crate) fn grid_size(concepts: usize, arity: usize) -> u128 {
    (0..arity).fold(1u128, |acc, _| acc.saturating_mul(concepts as u128))
}

fn grid_index(z: &[Concept], concepts: usize) -> usize {
    z.iter().fold(0usize, |acc, &v| acc * concepts + v as usize)
}

fn grid_seq(mut idx: usize, concepts: usize, arity: usize) -> ConceptSeq {
    let mut seq = vec![0; arity];
    for slot in seq.iter_mut().rev() {
        *slot = (idx % concepts) as Concept;
        idx /= concepts;
    }
    seq
}

/// Candidate pool `B` together with the abduction sets `A(y)`.
#[derive(Clone, Debug)]
pub struct AbductionIndex {
    kb: Arc<KnowledgeBase>,
    pool: Vec<ConceptSeq>,
    by_label: BTreeMap<Label, Vec<ConceptSeq>>,
}

impl AbductionIndex {
    /// Enumerates the full grid `Z^m` in lexicographic order.
    pub fn build(kb: Arc<KnowledgeBase>, cap: usize) -> Result<Self> {
        let size = grid_size(kb.concepts, kb.arity);
        if size > cap as u128 {
            return Err(Error::BudgetExceeded { what: "candidate pool", size, cap });
        }
        let pool = (0..size as usize).map(|i| grid_seq(i, kb.concepts, kb.arity)).collect();
        Ok(Self::from_pool(kb, pool))
    }

    /// Uses a caller-supplied subset of `Z^m` as the pool.
    pub fn restricted(kb: Arc<KnowledgeBase>, pool: Vec<ConceptSeq>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::ParameterOutOfRange("restricted pool is empty".into()));
        }
        for z in &pool {
            check_seq(z, kb.concepts, kb.arity)?;
        }
        let mut pool = pool;
        pool.sort();
        pool.dedup();
        Ok(Self::from_pool(kb, pool))
    }

    fn from_pool(kb: Arc<KnowledgeBase>, pool: Vec<ConceptSeq>) -> Self {
        let mut by_label: BTreeMap<Label, Vec<ConceptSeq>> = BTreeMap::new();
        for z in &pool {
            by_label.entry(kb.eval(z)).or_default().push(z.clone());
        }
        AbductionIndex { kb, pool, by_label }
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    /// `B`, sorted lexicographically.
    pub fn pool(&self) -> &[ConceptSeq] {
        &self.pool
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    /// `A(y)`; empty when no pooled sequence yields `y`.
    pub fn abduction_set(&self, y: Label) -> &[ConceptSeq] {
        self.by_label.get(&y).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The label space `Y`, ascending.
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.by_label.keys().copied()
    }

    pub fn label_count(&self) -> usize {
        self.by_label.len()
    }

    pub fn contains_label(&self, y: Label) -> bool {
        self.by_label.contains_key(&y)
    }

    pub fn contains(&self, z: &[Concept]) -> bool {
        self.pool.binary_search_by(|p| p.as_slice().cmp(z)).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(kb: KnowledgeBase) -> AbductionIndex {
        AbductionIndex::build(Arc::new(kb), DEFAULT_POOL_CAP).unwrap()
    }

    #[test]
    fn forward_examples() {
        let add = KnowledgeBase::addition(10, 1).unwrap();
        assert_eq!(add.forward(&[0, 1]).unwrap(), 1);
        assert_eq!(KnowledgeBase::xor().forward(&[0, 0]).unwrap(), 0);
        let m9 = KnowledgeBase::mod_add(9, 10, 1).unwrap();
        assert_eq!(m9.forward(&[9, 9]).unwrap(), 0);
    }

    #[test]
    fn multi_digit_reads_most_significant_first() {
        let mul = KnowledgeBase::multiplication(10, 2).unwrap();
        assert_eq!(mul.arity(), 4);
        assert_eq!(mul.forward(&[1, 0, 2, 0]).unwrap(), 200);
        let add = KnowledgeBase::addition(10, 2).unwrap();
        assert_eq!(add.forward(&[1, 2, 3, 4]).unwrap(), 46);
        let m = KnowledgeBase::mod_add(7, 10, 2).unwrap();
        assert_eq!(m.forward(&[1, 2, 3, 4]).unwrap(), 46 % 7);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let add = KnowledgeBase::addition(10, 1).unwrap();
        assert!(matches!(add.forward(&[1]), Err(Error::Arity { expected: 2, got: 1 })));
        assert!(matches!(add.forward(&[1, 10]), Err(Error::Domain { value: 10, .. })));
    }

    #[test]
    fn arithmetic_agrees_with_direct_oracle() {
        let add = KnowledgeBase::addition(10, 1).unwrap();
        let mul = KnowledgeBase::multiplication(10, 1).unwrap();
        for a in 0..10u32 {
            for b in 0..10u32 {
                assert_eq!(add.forward(&[a, b]).unwrap(), i64::from(a + b));
                assert_eq!(mul.forward(&[a, b]).unwrap(), i64::from(a * b));
            }
        }
    }

    #[test]
    fn xor_abduction_sets() {
        let idx = index(KnowledgeBase::xor());
        assert_eq!(idx.pool_size(), 4);
        assert_eq!(idx.abduction_set(0), &[vec![0, 0], vec![1, 1]]);
        assert_eq!(idx.abduction_set(1), &[vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn addition_and_parity_counts() {
        let idx = index(KnowledgeBase::addition(10, 1).unwrap());
        assert_eq!(idx.pool_size(), 100);
        assert_eq!(idx.abduction_set(0).len(), 1);
        assert_eq!(idx.label_count(), 19);

        let idx = index(KnowledgeBase::mod_add(2, 10, 1).unwrap());
        assert_eq!(idx.label_count(), 2);
        assert_eq!(idx.abduction_set(0).len(), 50);
    }

    #[test]
    fn abduction_sets_partition_pool() {
        for kb in [
            KnowledgeBase::addition(10, 1).unwrap(),
            KnowledgeBase::mod_add(3, 10, 1).unwrap(),
            KnowledgeBase::multiplication(6, 1).unwrap(),
        ] {
            let idx = index(kb);
            let total: usize = idx.labels().map(|y| idx.abduction_set(y).len()).sum();
            assert_eq!(total, idx.pool_size());
            for z in idx.pool() {
                let y = idx.kb().forward(z).unwrap();
                assert!(idx.abduction_set(y).contains(z));
            }
        }
    }

    #[test]
    fn mod_add_labels_below_modulus() {
        for k in 2..=10 {
            let idx = index(KnowledgeBase::mod_add(k, 10, 1).unwrap());
            assert!(idx.labels().all(|y| (0..i64::from(k)).contains(&y)));
        }
    }

    #[test]
    fn pool_cap_is_enforced() {
        let kb = Arc::new(KnowledgeBase::addition(10, 2).unwrap());
        let err = AbductionIndex::build(kb, 999).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { size: 10_000, cap: 999, .. }));
    }

    #[test]
    fn restricted_pool() {
        let kb = Arc::new(KnowledgeBase::addition(10, 1).unwrap());
        let idx = AbductionIndex::restricted(kb.clone(), vec![vec![1, 0], vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(idx.pool(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(idx.label_count(), 1);
        assert!(AbductionIndex::restricted(kb, vec![vec![0, 11]]).is_err());
    }

    #[test]
    fn truth_tables() {
        let rows = vec![(vec![0, 0], 0), (vec![0, 1], 1), (vec![1, 0], 1), (vec![1, 1], 0)];
        let kb = KnowledgeBase::from_table("tbl", 2, 2, rows.clone()).unwrap();
        for (z, y) in &rows {
            assert_eq!(kb.forward(z).unwrap(), *y);
        }
        let err = KnowledgeBase::from_table("tbl", 2, 2, rows[..3].to_vec()).unwrap_err();
        assert!(matches!(err, Error::IncompleteTable { ref missing, count: 1 } if missing == &vec![1, 1]));
        let mut conflicting = rows.clone();
        conflicting.push((vec![1, 1], 5));
        assert!(matches!(KnowledgeBase::from_table("tbl", 2, 2, conflicting), Err(Error::ConflictingTable { .. })));
    }

    #[test]
    fn mod_add_parameter_checks() {
        assert!(KnowledgeBase::mod_add(1, 10, 1).is_err());
        assert!(KnowledgeBase::mod_add(12, 10, 1).is_ok());
        assert!(KnowledgeBase::addition(12, 2).is_err());
    }
}
