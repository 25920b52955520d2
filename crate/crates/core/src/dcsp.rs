//! Derived constraint satisfaction problems.
//!
//! Variables `V_0..V_{L-1}` stand for the input clusters (indexed by their
//! ground-truth concept), each ranging over the concept set. A constraint
//! `(pattern, target)` requires that the knowledge base maps the pattern,
//! relabelled through the assignment, to `target`. Under the restricted
//! hypothesis space distinct clusters carry distinct concepts, so the
//! all-different constraint is on by default.
//!
//! [`solve_enumerate`] enumerates the complete solution space with
//! chronological backtracking and forward checking in ascending
//! variable/value order.

use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kb::{check_seq, AbductionIndex, Concept, KnowledgeBase, Label};

/// Cluster-index sequence; cluster `c` holds inputs whose true concept is `c`.
pub type ClusterSeq = Vec<Concept>;

/// A candidate solution: `assignment[i]` is the concept given to cluster `i`.
pub type Assignment = Vec<Concept>;

/// Default cap on the number of enumerated solutions.
pub const DEFAULT_SOLUTION_CAP: usize = 1_000_000;

/// Largest supported concept count (domains are 64-bit masks).
pub const MAX_CONCEPTS: usize = 64;

/// Above this many solutions the JSON form omits the explicit list.
pub const SOLUTION_LIST_LIMIT: usize = 64;

/// Solver settings shared by analysis, simulation and ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub injective: bool,
    pub solution_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { injective: true, solution_cap: DEFAULT_SOLUTION_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DcspConstraint {
    pub pattern: ClusterSeq,
    pub target: Label,
}

/// Constraints that share one knowledge base.
#[derive(Clone, Debug)]
pub struct ConstraintGroup {
    kb: Arc<KnowledgeBase>,
    constraints: Vec<DcspConstraint>,
}

impl ConstraintGroup {
    fn new(kb: Arc<KnowledgeBase>, mut constraints: Vec<DcspConstraint>) -> Self {
        constraints.sort();
        constraints.dedup();
        ConstraintGroup { kb, constraints }
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn constraints(&self) -> &[DcspConstraint] {
        &self.constraints
    }
}

#[derive(Clone, Debug)]
pub struct DcspInstance {
    concepts: usize,
    injective: bool,
    groups: Vec<ConstraintGroup>,
}

impl DcspInstance {
    /// One constraint per distinct `(pattern, label)` sample.
    pub fn from_dataset(index: &AbductionIndex, data: &[(ClusterSeq, Label)]) -> Result<Self> {
        let kb = index.kb();
        let mut constraints = Vec::with_capacity(data.len());
        for (pattern, target) in data {
            check_seq(pattern, kb.concepts(), kb.arity())?;
            if !index.contains_label(*target) {
                return Err(Error::UnknownLabel(*target));
            }
            constraints.push(DcspConstraint { pattern: pattern.clone(), target: *target });
        }
        Self::with_groups(kb.concepts(), vec![ConstraintGroup::new(kb.clone(), constraints)])
    }

    /// The infinite-data limit: one constraint `(z, forward(z))` per `z` in the pool.
    pub fn task_level(index: &AbductionIndex) -> Result<Self> {
        let kb = index.kb();
        let constraints =
            index.pool().iter().map(|z| DcspConstraint { pattern: z.clone(), target: kb.eval(z) }).collect();
        Self::with_groups(kb.concepts(), vec![ConstraintGroup::new(kb.clone(), constraints)])
    }

    fn with_groups(concepts: usize, groups: Vec<ConstraintGroup>) -> Result<Self> {
        if concepts == 0 || concepts > MAX_CONCEPTS {
            return Err(Error::ParameterOutOfRange(format!(
                "the solver supports 1 <= L <= {MAX_CONCEPTS}, got {concepts}"
            )));
        }
        Ok(DcspInstance { concepts, injective: true, groups })
    }

    /// Union of the constraint sets over the shared variables. The merged
    /// instance is injective only if every part is.
    pub fn merge(parts: &[DcspInstance]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyEnsemble)?;
        let mut groups: Vec<ConstraintGroup> = Vec::new();
        for part in parts {
            if part.concepts != first.concepts {
                return Err(Error::ConceptMismatch { expected: first.concepts, got: part.concepts });
            }
            for group in &part.groups {
                match groups.iter_mut().find(|g| g.kb == group.kb) {
                    Some(existing) => {
                        let mut all = std::mem::take(&mut existing.constraints);
                        all.extend(group.constraints.iter().cloned());
                        *existing = ConstraintGroup::new(existing.kb.clone(), all);
                    }
                    None => groups.push(group.clone()),
                }
            }
        }
        Ok(DcspInstance { concepts: first.concepts, injective: parts.iter().all(|p| p.injective), groups })
    }

    pub fn with_injective(mut self, injective: bool) -> Self {
        self.injective = injective;
        self
    }

    pub fn concepts(&self) -> usize {
        self.concepts
    }

    pub fn is_injective(&self) -> bool {
        self.injective
    }

    pub fn groups(&self) -> &[ConstraintGroup] {
        &self.groups
    }

    pub fn constraint_count(&self) -> usize {
        self.groups.iter().map(|g| g.constraints.len()).sum()
    }

    /// Checks an assignment against every constraint (and all-different, if set).
    pub fn is_satisfied_by(&self, assignment: &[Concept]) -> bool {
        if assignment.len() != self.concepts || assignment.iter().any(|&v| v as usize >= self.concepts) {
            return false;
        }
        if self.injective {
            let mut seen = 0u64;
            for &v in assignment {
                if seen & (1 << v) != 0 {
                    return false;
                }
                seen |= 1 << v;
            }
        }
        let mut buf = Vec::new();
        self.groups.iter().all(|g| {
            g.constraints.iter().all(|c| {
                buf.clear();
                buf.extend(c.pattern.iter().map(|&p| assignment[p as usize]));
                g.kb.eval(&buf) == c.target
            })
        })
    }
}

/// Outcome of a bounded enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationStats {
    pub visited: usize,
    pub complete: bool,
}

/// Calls `visit` on each solution in lexicographic order, stopping after
/// `cap` of them. `complete` is false when a further solution exists.
pub fn for_each_solution<F>(inst: &DcspInstance, cap: usize, visit: F) -> Result<EnumerationStats>
where
    F: FnMut(&[Concept]),
{
    if cap == 0 {
        return Err(Error::ParameterOutOfRange("the solution cap must be at least 1".into()));
    }
    let mut search = Search::new(inst, cap, visit);
    if search.initial_consistency() {
        let _ = search.descend(0);
    }
    Ok(EnumerationStats { visited: search.found, complete: search.complete })
}

struct Compiled {
    group: usize,
    pattern: Vec<usize>,
    target: Label,
    // distinct variables, ascending
    vars: Vec<usize>,
}

struct Search<'a, F> {
    inst: &'a DcspInstance,
    constraints: Vec<Compiled>,
    // per variable: (constraint, number of its variables ordered after this one)
    watch: Vec<Vec<(usize, usize)>>,
    values: Vec<Concept>,
    domains: Vec<u64>,
    trail: Vec<(usize, u64)>,
    scratch: Vec<Concept>,
    cap: usize,
    found: usize,
    complete: bool,
    visit: F,
}

impl<'a, F: FnMut(&[Concept])> Search<'a, F> {
    fn new(inst: &'a DcspInstance, cap: usize, visit: F) -> Self {
        let n = inst.concepts;
        let mut constraints = Vec::with_capacity(inst.constraint_count());
        let mut watch = vec![Vec::new(); n];
        for (gi, group) in inst.groups.iter().enumerate() {
            for c in &group.constraints {
                let pattern: Vec<usize> = c.pattern.iter().map(|&p| p as usize).collect();
                let mut vars = pattern.clone();
                vars.sort_unstable();
                vars.dedup();
                let id = constraints.len();
                for (pos, &v) in vars.iter().enumerate() {
                    watch[v].push((id, vars.len() - pos - 1));
                }
                constraints.push(Compiled { group: gi, pattern, target: c.target, vars });
            }
        }
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Search {
            inst,
            constraints,
            watch,
            values: vec![0; n],
            domains: vec![full; n],
            trail: Vec::new(),
            scratch: Vec::new(),
            cap,
            found: 0,
            complete: true,
            visit,
        }
    }

    fn eval(&mut self, c: usize, var: usize, value: Concept) -> bool {
        let con = &self.constraints[c];
        self.scratch.clear();
        for &p in &con.pattern {
            self.scratch.push(if p == var { value } else { self.values[p] });
        }
        self.inst.groups[con.group].kb.eval(&self.scratch) == con.target
    }

    fn filter_domain(&mut self, c: usize, var: usize) -> bool {
        let mut mask = self.domains[var];
        let mut kept = mask;
        while mask != 0 {
            let w = mask.trailing_zeros();
            mask &= mask - 1;
            if !self.eval(c, var, w) {
                kept &= !(1u64 << w);
            }
        }
        if kept != self.domains[var] {
            self.trail.push((var, self.domains[var]));
            self.domains[var] = kept;
        }
        kept != 0
    }

    fn initial_consistency(&mut self) -> bool {
        for c in 0..self.constraints.len() {
            if self.constraints[c].vars.len() == 1 {
                let var = self.constraints[c].vars[0];
                if !self.filter_domain(c, var) {
                    return false;
                }
            }
        }
        true
    }

    fn propagate(&mut self, var: usize, value: Concept) -> bool {
        let n = self.inst.concepts;
        if self.inst.injective {
            let bit = 1u64 << value;
            for j in var + 1..n {
                if self.domains[j] & bit != 0 {
                    self.trail.push((j, self.domains[j]));
                    self.domains[j] &= !bit;
                    if self.domains[j] == 0 {
                        return false;
                    }
                }
            }
        }
        for k in 0..self.watch[var].len() {
            let (c, remaining) = self.watch[var][k];
            match remaining {
                0 => {
                    if !self.eval(c, var, value) {
                        return false;
                    }
                }
                1 => {
                    let last = *self.constraints[c].vars.last().expect("non-empty");
                    if !self.filter_domain(c, last) {
                        return false;
                    }
                }
                _ => {}
            }
        }
        true
    }

    /// Returns `Break` once enumeration must stop.
    fn descend(&mut self, var: usize) -> ControlFlow<()> {
        if var == self.inst.concepts {
            if self.found == self.cap {
                self.complete = false;
                return ControlFlow::Break(());
            }
            self.found += 1;
            (self.visit)(&self.values);
            return ControlFlow::Continue(());
        }
        let mut mask = self.domains[var];
        while mask != 0 {
            let value = mask.trailing_zeros();
            mask &= mask - 1;
            let mark = self.trail.len();
            self.values[var] = value;
            let ok = self.propagate(var, value);
            let flow = if ok { self.descend(var + 1) } else { ControlFlow::Continue(()) };
            while self.trail.len() > mark {
                let (j, old) = self.trail.pop().expect("trail entry");
                self.domains[j] = old;
            }
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Enumerated solution set with its consensus assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionSpace {
    concepts: usize,
    solutions: Vec<Assignment>,
    union: Vec<(usize, Concept)>,
    complete: bool,
}

impl SolutionSpace {
    pub fn from_solutions(concepts: usize, solutions: Vec<Assignment>, complete: bool) -> Self {
        let union = match solutions.split_first() {
            None => Vec::new(),
            Some((head, rest)) => {
                (0..concepts).filter(|&i| rest.iter().all(|s| s[i] == head[i])).map(|i| (i, head[i])).collect()
            }
        };
        SolutionSpace { concepts, solutions, union, complete }
    }

    pub fn concepts(&self) -> usize {
        self.concepts
    }

    pub fn solutions(&self) -> &[Assignment] {
        &self.solutions
    }

    pub fn num_solutions(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// `(variable, value)` pairs shared by every solution.
    pub fn union(&self) -> &[(usize, Concept)] {
        &self.union
    }

    /// `d = L - |Union(S)|`; `None` for an empty space.
    pub fn d(&self) -> Option<usize> {
        (!self.is_empty()).then(|| self.concepts - self.union.len())
    }

    pub fn contains(&self, assignment: &[Concept]) -> bool {
        self.solutions.binary_search_by(|s| s.as_slice().cmp(assignment)).is_ok()
    }

    /// JSON form; the explicit solution list is replaced by `null` above `list_limit`.
    pub fn to_json(&self, list_limit: usize) -> Value {
        let solutions = if self.solutions.len() <= list_limit { json!(self.solutions) } else { Value::Null };
        json!({
            "num_solutions": self.solutions.len(),
            "d": self.d(),
            "L": self.concepts,
            "union": self.union.iter().map(|&(v, c)| [v as u64, u64::from(c)]).collect::<Vec<_>>(),
            "solutions": solutions,
            "complete": self.complete,
        })
    }
}

/// Enumerates every solution of `inst`, up to `cap`.
pub fn solve_enumerate(inst: &DcspInstance, cap: usize) -> Result<SolutionSpace> {
    let mut solutions = Vec::new();
    let stats = for_each_solution(inst, cap, |s| solutions.push(s.to_vec()))?;
    Ok(SolutionSpace::from_solutions(inst.concepts(), solutions, stats.complete))
}

/// Builds the task-level instance for `index` and enumerates it.
pub fn solve_task(index: &AbductionIndex, opts: &SolveOptions) -> Result<SolutionSpace> {
    let inst = DcspInstance::task_level(index)?.with_injective(opts.injective);
    solve_enumerate(&inst, opts.solution_cap)
}

/// Disagreement `d` and the consensus set of a non-empty space.
pub fn disagreement(space: &SolutionSpace) -> Result<(usize, &[(usize, Concept)])> {
    match space.d() {
        Some(d) => Ok((d, space.union())),
        None => Err(Error::NoSolution),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnabilityReport {
    pub learnable: bool,
    pub d: usize,
    #[serde(rename = "L")]
    pub concepts: usize,
    /// Asymptotic bound `d / L` on the average concept error.
    #[serde(rename = "d_over_L")]
    pub error_bound: f64,
    pub num_solutions: usize,
}

/// Learnable iff the complete space holds exactly one solution.
pub fn verdict(space: &SolutionSpace) -> Result<LearnabilityReport> {
    if !space.is_complete() {
        return Err(Error::IncompleteEnumeration { cap: space.num_solutions() });
    }
    let (d, _) = disagreement(space)?;
    Ok(LearnabilityReport {
        learnable: space.num_solutions() == 1,
        d,
        concepts: space.concepts(),
        error_bound: d as f64 / space.concepts() as f64,
        num_solutions: space.num_solutions(),
    })
}

/// Fraction of clusters whose concept differs from the ground-truth (identity) labeling.
pub fn concept_error(assignment: &[Concept]) -> f64 {
    if assignment.is_empty() {
        return 0.0;
    }
    let wrong = assignment.iter().enumerate().filter(|&(i, &v)| v as usize != i).count();
    wrong as f64 / assignment.len() as f64
}
