//! Ensembles of tasks that share the concept set.
//!
//! Task-level constraint sets are merged over the same variables, so the
//! solver prunes with every task at once. The resulting space is the
//! intersection of the members' spaces.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dcsp::{self, DcspInstance, LearnabilityReport, SolutionSpace, SolveOptions};
use crate::error::{Error, Result};
use crate::kb::{AbductionIndex, KnowledgeBase, DEFAULT_POOL_CAP};

/// Merged task-level instance of every member.
pub fn merge(tasks: &[AbductionIndex], injective: bool) -> Result<DcspInstance> {
    let parts =
        tasks.iter().map(|t| Ok(DcspInstance::task_level(t)?.with_injective(injective))).collect::<Result<Vec<_>>>()?;
    DcspInstance::merge(&parts)
}

pub fn solve_ensemble(tasks: &[AbductionIndex], opts: &SolveOptions) -> Result<SolutionSpace> {
    dcsp::solve_enumerate(&merge(tasks, opts.injective)?, opts.solution_cap)
}

pub fn analyze_ensemble(tasks: &[AbductionIndex], opts: &SolveOptions) -> Result<LearnabilityReport> {
    dcsp::verdict(&solve_ensemble(tasks, opts)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub k1: u32,
    pub k2: u32,
    pub d: Option<usize>,
    pub d_over_l: Option<f64>,
    pub num_solutions: usize,
    pub learnable: bool,
    pub complete: bool,
}

/// Every ordered pair `(k1, k2)` of modular-addition bases over `L` concepts.
pub fn ensemble_grid(bases: &[u32], concepts: usize, opts: &SolveOptions) -> Result<Vec<GridCell>> {
    if let Some(&k) = bases.iter().find(|&&k| !(2..=10).contains(&k)) {
        return Err(Error::ParameterOutOfRange(format!("grid bases must lie in 2..=10, got {k}")));
    }
    let tasks = bases
        .iter()
        .map(|&k| AbductionIndex::build(Arc::new(KnowledgeBase::mod_add(k, concepts, 1)?), DEFAULT_POOL_CAP))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..bases.len()).flat_map(|i| (0..bases.len()).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let members = if i == j { vec![tasks[i].clone()] } else { vec![tasks[i].clone(), tasks[j].clone()] };
            let space = solve_ensemble(&members, opts)?;
            let d = space.d();
            Ok(GridCell {
                k1: bases[i],
                k2: bases[j],
                d,
                d_over_l: d.map(|d| d as f64 / concepts as f64),
                num_solutions: space.num_solutions(),
                learnable: space.is_complete() && space.num_solutions() == 1,
                complete: space.is_complete(),
            })
        })
        .collect()
}

/// Grid CSV with columns `k1,k2,d,d_over_L,num_solutions,learnable`.
pub fn write_grid_csv<W: std::io::Write>(cells: &[GridCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k1", "k2", "d", "d_over_L", "num_solutions", "learnable"])?;
    for c in cells {
        w.write_record([
            c.k1.to_string(),
            c.k2.to_string(),
            c.d.map(|d| d.to_string()).unwrap_or_default(),
            c.d_over_l.map(|r| r.to_string()).unwrap_or_default(),
            c.num_solutions.to_string(),
            c.learnable.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modadd(k: u32) -> AbductionIndex {
        AbductionIndex::build(Arc::new(KnowledgeBase::mod_add(k, 10, 1).unwrap()), DEFAULT_POOL_CAP).unwrap()
    }

    #[test]
    fn paired_mod_bases() {
        let opts = SolveOptions::default();
        let r23 = analyze_ensemble(&[modadd(2), modadd(3)], &opts).unwrap();
        assert!(!r23.learnable);
        assert_eq!(r23.d, 8);
        let r34 = analyze_ensemble(&[modadd(3), modadd(4)], &opts).unwrap();
        assert!(r34.learnable);
        assert_eq!(r34.d, 0);
    }

    #[test]
    fn self_merge_and_single_task() {
        let opts = SolveOptions::default();
        let single = dcsp::solve_task(&modadd(4), &opts).unwrap();
        assert_eq!(solve_ensemble(&[modadd(4)], &opts).unwrap(), single);
        assert_eq!(solve_ensemble(&[modadd(4), modadd(4)], &opts).unwrap(), single);
    }

    #[test]
    fn mismatched_concepts_rejected() {
        let xor = AbductionIndex::build(Arc::new(KnowledgeBase::xor()), 16).unwrap();
        assert!(matches!(merge(&[modadd(3), xor], true), Err(Error::ConceptMismatch { expected: 10, got: 2 })));
        assert!(matches!(merge(&[], true), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn grid_cells_and_csv() {
        let cells = ensemble_grid(&[3, 4, 9], 10, &SolveOptions::default()).unwrap();
        assert_eq!(cells.len(), 9);
        let cell = |a, b| cells.iter().find(|c| c.k1 == a && c.k2 == b).unwrap();
        assert_eq!(cell(9, 9).d_over_l, Some(0.2));
        assert_eq!(cell(3, 4).d_over_l, Some(0.0));
        assert_eq!(cell(3, 4), &GridCell { k1: 3, k2: 4, ..cell(4, 3).clone() });
        let mut buf = Vec::new();
        write_grid_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k1,k2,d,d_over_L,num_solutions,learnable\n"));
        assert!(text.contains("3,4,0,0,1,true\n"));
        assert!(ensemble_grid(&[1, 3], 10, &SolveOptions::default()).is_err());
    }
}
