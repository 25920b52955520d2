//! Reference implementations used as oracles. They share no code with the
//! library: arithmetic is spelled out directly and search is plain
//! recursion over permutations or all maps.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use nesy_dcsp::{AbductionIndex, KnowledgeBase};

pub type Map = Vec<u32>;

#[derive(Clone, Copy, Debug)]
pub enum Builtin {
    Add,
    Mul,
    Xor,
    ModAdd(u32),
}

impl Builtin {
    /// Label of the single-digit pair `(a, b)`.
    pub fn label(self, a: u32, b: u32) -> i64 {
        let (a, b) = (a as i64, b as i64);
        match self {
            Builtin::Add => a + b,
            Builtin::Mul => a * b,
            Builtin::Xor => a ^ b,
            Builtin::ModAdd(k) => (a + b) % k as i64,
        }
    }

    pub fn kb(self, concepts: usize) -> KnowledgeBase {
        match self {
            Builtin::Add => KnowledgeBase::addition(concepts, 1).unwrap(),
            Builtin::Mul => KnowledgeBase::multiplication(concepts, 1).unwrap(),
            Builtin::Xor => KnowledgeBase::xor(),
            Builtin::ModAdd(k) => KnowledgeBase::mod_add(k, concepts, 1).unwrap(),
        }
    }

    pub fn index(self, concepts: usize) -> AbductionIndex {
        AbductionIndex::build(Arc::new(self.kb(concepts)), 1_000_000).unwrap()
    }
}

/// Every relabeling `f` of `0..l` (bijective when `injective`) with
/// `label(f(a), f(b)) == label(a, b)` for all pairs. Prunes a branch as soon
/// as some fully assigned pair disagrees.
pub fn brute_force(label: impl Fn(u32, u32) -> i64, l: usize, injective: bool) -> BTreeSet<Map> {
    fn rec(
        label: &dyn Fn(u32, u32) -> i64,
        l: usize,
        injective: bool,
        f: &mut Vec<u32>,
        used: &mut Vec<bool>,
        out: &mut BTreeSet<Map>,
    ) {
        let i = f.len();
        if i == l {
            out.insert(f.clone());
            return;
        }
        for v in 0..l as u32 {
            if injective && used[v as usize] {
                continue;
            }
            f.push(v);
            // pairs touching the newest variable are now fully assigned
            let ok = (0..=i).all(|j| {
                label(f[i], f[j]) == label(i as u32, j as u32) && label(f[j], f[i]) == label(j as u32, i as u32)
            });
            if ok {
                used[v as usize] = true;
                rec(label, l, injective, f, used, out);
                used[v as usize] = false;
            }
            f.pop();
        }
    }
    let mut out = BTreeSet::new();
    rec(&label, l, injective, &mut Vec::new(), &mut vec![false; l], &mut out);
    out
}

/// Positions where every map agrees; `L - |consensus|` is the disagreement.
pub fn disagreement(maps: &BTreeSet<Map>, l: usize) -> usize {
    let first = maps.iter().next().expect("non-empty");
    let agreed = (0..l).filter(|&i| maps.iter().all(|m| m[i] == first[i])).count();
    l - agreed
}

pub fn concept_error(map: &[u32]) -> f64 {
    map.iter().enumerate().filter(|&(i, &v)| v as usize != i).count() as f64 / map.len() as f64
}

/// All `l^l` maps in lexicographic order.
pub fn all_maps(l: usize) -> Vec<Map> {
    let count = (l as u64).pow(l as u32);
    (0..count)
        .map(|mut i| {
            let mut m = vec![0u32; l];
            for slot in m.iter_mut().rev() {
                *slot = (i % l as u64) as u32;
                i /= l as u64;
            }
            m
        })
        .collect()
}

/// Table predictor putting `conf` on `map[i]` and spreading the rest evenly.
pub fn smoothed(map: &[u32], conf: f64) -> Vec<Vec<f64>> {
    let l = map.len();
    map.iter()
        .map(|&c| (0..l as u32).map(|j| if j == c { conf } else { (1.0 - conf) / (l - 1) as f64 }).collect())
        .collect()
}

/// Expected 0-1 loss of the argmax labels against the knowledge base, with
/// pairs uniform over `0..l`².
pub fn nesy_risk(label: impl Fn(u32, u32) -> i64, table: &[Vec<f64>]) -> f64 {
    let l = table.len();
    let argmax = |i: usize| {
        let row = &table[i];
        (0..l).fold(0, |best, j| if row[j] > row[best] { j } else { best }) as u32
    };
    let mut wrong = 0usize;
    for a in 0..l as u32 {
        for b in 0..l as u32 {
            if label(argmax(a as usize), argmax(b as usize)) != label(a, b) {
                wrong += 1;
            }
        }
    }
    wrong as f64 / (l * l) as f64
}

/// Average negative log of the probability mass on label-consistent pairs.
pub fn pnl_risk(label: impl Fn(u32, u32) -> i64, table: &[Vec<f64>]) -> f64 {
    let l = table.len();
    let mut total = 0.0;
    for a in 0..l {
        for b in 0..l {
            let y = label(a as u32, b as u32);
            let mut mass = 0.0;
            for c in 0..l {
                for d in 0..l {
                    if label(c as u32, d as u32) == y {
                        mass += table[a][c] * table[b][d];
                    }
                }
            }
            total -= mass.ln();
        }
    }
    total / (l * l) as f64
}

pub fn argmin(values: &[f64]) -> BTreeSet<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    (0..values.len()).filter(|&i| values[i] <= min + tol).collect()
}

/// Smallest `k` with `Pr[Bin(n, p) <= k] >= level`, from log-factorials.
pub fn binomial_quantile(p: f64, n: usize, level: f64) -> usize {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let mut cdf = 0.0;
    for k in 0..=n {
        let ln_pmf = ln_fact[n] - ln_fact[k] - ln_fact[n - k] + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
        cdf += ln_pmf.exp();
        if cdf >= level {
            return k;
        }
    }
    n
}
