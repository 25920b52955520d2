//! Concept, NeSy, PNL, ABL and A³ risks for a tabular predictor.
//!
//! A [`Predictor`] stands in for the learning model: row `c` is the
//! categorical distribution it assigns to inputs of cluster `c`. Since
//! clusters are indexed by their true concept, row `c` should put its mass on
//! concept `c` for a perfect model.
//!
//! Log-risks return `f64::INFINITY` whenever some expected term has zero
//! probability; nothing is clamped.

use serde::Serialize;

use crate::dcsp::Assignment;
use crate::error::{Error, Result};
use crate::kb::{AbductionIndex, Concept, ConceptSeq, Label};
use crate::simulate::ConceptDistribution;

/// Row-sum tolerance for predictor tables.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Confidence used when smoothing one-hot tables for minimizer checks.
pub const SMOOTHED_CONFIDENCE: f64 = 1.0 - 1e-3;

/// Candidate-set size used by the A³ surrogate, capped by `|A(y)|`.
pub const DEFAULT_A3_CANDIDATES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    concepts: usize,
    table: Vec<f64>,
}

impl Predictor {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let concepts = rows.len();
        if concepts == 0 {
            return Err(Error::InvalidPredictor("empty table".into()));
        }
        let mut table = Vec::with_capacity(concepts * concepts);
        for (c, row) in rows.iter().enumerate() {
            if row.len() != concepts {
                return Err(Error::InvalidPredictor(format!("row {c} has {} entries, expected {concepts}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidPredictor(format!("row {c} holds {v}, not a probability")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidPredictor(format!("row {c} sums to {sum}")));
            }
            table.extend_from_slice(row);
        }
        Ok(Predictor { concepts, table })
    }

    /// Parses a whitespace- or comma-separated matrix, one row per line.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::InvalidPredictor(format!("line {}: `{t}` is not a number", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    /// Deterministic predictor sending cluster `c` to `assignment[c]`.
    pub fn one_hot(assignment: &[Concept]) -> Result<Self> {
        Self::smoothed(assignment, 1.0)
    }

    /// `confidence` on `assignment[c]`, the remainder spread evenly over the other concepts.
    pub fn smoothed(assignment: &[Concept], confidence: f64) -> Result<Self> {
        let n = assignment.len();
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidPredictor(format!("confidence {confidence} outside [0, 1]")));
        }
        let rest = if n > 1 { (1.0 - confidence) / (n - 1) as f64 } else { 0.0 };
        let rows = assignment
            .iter()
            .map(|&a| {
                let mut row = vec![rest; n];
                match row.get_mut(a as usize) {
                    Some(slot) => *slot = if n > 1 { confidence } else { 1.0 },
                    None => return Err(Error::Domain { value: a, concepts: n }),
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn identity(concepts: usize) -> Self {
        Self::one_hot(&(0..concepts as Concept).collect::<Vec<_>>()).expect("identity table")
    }

    pub fn uniform(concepts: usize) -> Self {
        Self::new(vec![vec![1.0 / concepts as f64; concepts]; concepts]).expect("uniform table")
    }

    pub fn concepts(&self) -> usize {
        self.concepts
    }

    /// Probability assigned to `concept` for inputs of `cluster`.
    pub fn prob(&self, cluster: Concept, concept: Concept) -> f64 {
        self.table[cluster as usize * self.concepts + concept as usize]
    }

    pub fn row(&self, cluster: Concept) -> &[f64] {
        let start = cluster as usize * self.concepts;
        &self.table[start..start + self.concepts]
    }

    /// `f(cluster)`; ties go to the lowest concept id.
    pub fn argmax(&self, cluster: Concept) -> Concept {
        let row = self.row(cluster);
        let mut best = 0;
        for (i, &p) in row.iter().enumerate().skip(1) {
            if p > row[best] {
                best = i;
            }
        }
        best as Concept
    }

    pub fn argmax_assignment(&self) -> Assignment {
        (0..self.concepts as Concept).map(|c| self.argmax(c)).collect()
    }

    /// Probability that the model reads `pattern` as exactly `candidate`.
    pub fn sequence_prob(&self, pattern: &[Concept], candidate: &[Concept]) -> f64 {
        pattern.iter().zip(candidate).map(|(&c, &z)| self.prob(c, z)).product()
    }

    fn check_against(&self, index: &AbductionIndex) -> Result<()> {
        if self.concepts != index.kb().concepts() {
            return Err(Error::InvalidPredictor(format!(
                "table is {0}x{0} but the task has L = {1}",
                self.concepts,
                index.kb().concepts()
            )));
        }
        Ok(())
    }
}

/// Fraction of clusters whose argmax differs from the cluster's own concept.
pub fn concept_risk(pred: &Predictor) -> f64 {
    crate::dcsp::concept_error(&pred.argmax_assignment())
}

/// Concept risk with clusters weighted by `marginal` (normalized internally).
pub fn concept_risk_weighted(pred: &Predictor, marginal: &[f64]) -> Result<f64> {
    if marginal.len() != pred.concepts() {
        return Err(Error::InvalidDistribution(format!(
            "cluster marginal has {} entries, expected {}",
            marginal.len(),
            pred.concepts()
        )));
    }
    if marginal.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidDistribution("cluster marginal holds a negative weight".into()));
    }
    let total: f64 = marginal.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("cluster marginal has no mass".into()));
    }
    let wrong: f64 =
        (0..pred.concepts()).filter(|&c| pred.argmax(c as Concept) as usize != c).map(|c| marginal[c]).sum();
    Ok(wrong / total)
}

/// NeSy risk of a fixed cluster-to-concept assignment.
pub fn assignment_nesy_risk(index: &AbductionIndex, dist: &ConceptDistribution, assignment: &[Concept]) -> f64 {
    let kb = index.kb();
    let mut buf = Vec::with_capacity(kb.arity());
    index
        .pool()
        .iter()
        .enumerate()
        .filter(|(_, z)| {
            buf.clear();
            buf.extend(z.iter().map(|&c| assignment[c as usize]));
            kb.eval(&buf) != kb.eval(z)
        })
        .map(|(i, _)| dist.weight(i))
        .sum()
}

/// Probability mass the argmax predictions put on sequences that break the knowledge base.
pub fn nesy_risk(pred: &Predictor, index: &AbductionIndex, dist: &ConceptDistribution) -> Result<f64> {
    pred.check_against(index)?;
    Ok(assignment_nesy_risk(index, dist, &pred.argmax_assignment()))
}

/// Weighted model count of `candidates` for inputs of `pattern`; 0 for no candidates.
pub fn wmc(pred: &Predictor, candidates: &[ConceptSeq], pattern: &[Concept]) -> f64 {
    candidates.iter().map(|z| pred.sequence_prob(pattern, z)).sum()
}

fn neg_log(p: f64) -> f64 {
    if p > 0.0 {
        -p.ln()
    } else {
        f64::INFINITY
    }
}

fn expected_neg_log<F>(index: &AbductionIndex, dist: &ConceptDistribution, mut term: F) -> Result<f64>
where
    F: FnMut(&ConceptSeq, Label) -> Result<f64>,
{
    let kb = index.kb();
    let mut total = 0.0;
    for (i, z) in index.pool().iter().enumerate() {
        let p = term(z, kb.eval(z))?;
        total += dist.weight(i) * neg_log(p);
    }
    Ok(total)
}

/// `-E log sum_{z' in A(y)} Pr[z' | x]`.
pub fn pnl_risk(pred: &Predictor, index: &AbductionIndex, dist: &ConceptDistribution) -> Result<f64> {
    pred.check_against(index)?;
    expected_neg_log(index, dist, |z, y| Ok(wmc(pred, index.abduction_set(y), z)))
}

fn hamming(a: &[Concept], b: &[Concept]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// The candidate in `A(y)` closest in Hamming distance to the predicted
/// sequence; ties go to the lexicographically smallest candidate.
pub fn abduce(pred: &Predictor, index: &AbductionIndex, pattern: &[Concept], y: Label) -> Result<ConceptSeq> {
    let predicted: Vec<Concept> = pattern.iter().map(|&c| pred.argmax(c)).collect();
    index.abduction_set(y).iter().min_by_key(|z| hamming(z, &predicted)).cloned().ok_or(Error::AbductionFailure(y))
}

/// `-E log Pr[y, z̄ | x]` with `z̄` from [`abduce`].
pub fn abl_risk(pred: &Predictor, index: &AbductionIndex, dist: &ConceptDistribution) -> Result<f64> {
    pred.check_against(index)?;
    expected_neg_log(index, dist, |z, y| {
        let bar = abduce(pred, index, z, y)?;
        Ok(pred.sequence_prob(z, &bar))
    })
}

/// The `n` candidates of `A(y)` the predictor finds most likely for `pattern`
/// (ties lexicographic), returned in lexicographic order.
pub fn top_candidates(
    pred: &Predictor,
    index: &AbductionIndex,
    pattern: &[Concept],
    y: Label,
    n: usize,
) -> Vec<ConceptSeq> {
    let set = index.abduction_set(y);
    let mut ranked: Vec<(usize, f64)> =
        set.iter().enumerate().map(|(i, z)| (i, pred.sequence_prob(pattern, z))).collect();
    // stable sort keeps lexicographic order among equal probabilities
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut keep: Vec<usize> = ranked.into_iter().take(n).map(|(i, _)| i).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| set[i].clone()).collect()
}

/// A³ surrogate: PNL restricted to the `n` most likely candidates per label.
pub fn a3_risk(pred: &Predictor, index: &AbductionIndex, dist: &ConceptDistribution, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ParameterOutOfRange("the A3 candidate count must be at least 1".into()));
    }
    pred.check_against(index)?;
    expected_neg_log(index, dist, |z, y| Ok(wmc(pred, &top_candidates(pred, index, z, y, n), z)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Surrogate {
    Pnl,
    Abl,
    A3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurrogateInclusion {
    pub surrogate: Surrogate,
    pub argmin: Vec<Assignment>,
    /// Members of the surrogate's argmin that do not minimize the NeSy risk.
    pub violations: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub predictors: usize,
    pub confidence: f64,
    pub a3_candidates: usize,
    pub nesy_argmin: Vec<Assignment>,
    pub surrogates: Vec<SurrogateInclusion>,
    pub tie_break: &'static str,
}

impl InclusionReport {
    pub fn holds(&self) -> bool {
        self.surrogates.iter().all(|s| s.violations.is_empty())
    }
}

/// Tolerance for grouping surrogate values into one argmin.
pub const ARGMIN_TOLERANCE: f64 = 1e-12;

fn argmin(values: &[f64]) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_infinite() {
        return (0..values.len()).collect();
    }
    let tol = ARGMIN_TOLERANCE * min.abs().max(1.0);
    (0..values.len()).filter(|&i| values[i] <= min + tol).collect()
}

/// Enumerates every map from clusters to concepts (`L^L` of them), smooths
/// each to `confidence`, and checks `argmin R_s ⊆ argmin R_NeSy` for PNL, ABL and A³.
pub fn check_minimizer_inclusion(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    confidence: f64,
    a3_candidates: usize,
    cap: usize,
) -> Result<InclusionReport> {
    let l = index.kb().concepts();
    let count = crate::kb::grid_size(l, l);
    if count > cap as u128 {
        return Err(Error::BudgetExceeded { what: "predictor enumeration", size: count, cap });
    }
    let maps: Vec<Assignment> = (0..count as usize)
        .map(|mut i| {
            let mut a = vec![0; l];
            for slot in a.iter_mut().rev() {
                *slot = (i % l) as Concept;
                i /= l;
            }
            a
        })
        .collect();

    let mut nesy = Vec::with_capacity(maps.len());
    let mut values = [Vec::new(), Vec::new(), Vec::new()];
    for map in &maps {
        let pred = Predictor::smoothed(map, confidence)?;
        nesy.push(nesy_risk(&pred, index, dist)?);
        values[0].push(pnl_risk(&pred, index, dist)?);
        values[1].push(abl_risk(&pred, index, dist)?);
        values[2].push(a3_risk(&pred, index, dist, a3_candidates)?);
    }
    let nesy_min = argmin(&nesy);
    let surrogates = [Surrogate::Pnl, Surrogate::Abl, Surrogate::A3]
        .into_iter()
        .zip(values.iter())
        .map(|(surrogate, vals)| {
            let am = argmin(vals);
            let violations =
                am.iter().filter(|i| nesy_min.binary_search(i).is_err()).map(|&i| maps[i].clone()).collect();
            SurrogateInclusion { surrogate, argmin: am.into_iter().map(|i| maps[i].clone()).collect(), violations }
        })
        .collect();
    Ok(InclusionReport {
        predictors: maps.len(),
        confidence,
        a3_candidates,
        nesy_argmin: nesy_min.into_iter().map(|i| maps[i].clone()).collect(),
        surrogates,
        tie_break:
            "argmax ties to the lowest concept id; abduction and A3 ties to the lexicographically smallest candidate",
    })
}
