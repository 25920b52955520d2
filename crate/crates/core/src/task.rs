//! Task files.
//!
//! A task file is TOML:
//!
//! ```toml
//! name = "mod9"
//! builtin = "modadd"      # add | mul | xor | modadd, or give `table` instead
//! k = 9                   # modadd only
//! n_digits = 1            # digits per operand (default 1)
//! L = 10                  # concept count (default 10; xor is fixed at 2)
//! m = 2                   # arity; required with `table`, checked for builtins
//! # table = [{ z = [0, 0], y = 0 }, ...]
//! # pool = [[0, 1], [1, 0]]   # restrict the candidate pool
//! seed = 2023             # default seed for sampling commands
//!
//! [distribution]
//! kind = "uniform"        # or "weights"
//! # weights = [{ z = [0, 1], p = 0.5 }, ...]
//!
//! [analysis]
//! injective = true
//! solution_cap = 1000000
//! pool_cap = 1000000
//! ```

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::dcsp::{SolveOptions, DEFAULT_SOLUTION_CAP};
use crate::error::{Error, Result};
use crate::kb::{AbductionIndex, ConceptSeq, KnowledgeBase, Label, DEFAULT_POOL_CAP};
use crate::simulate::ConceptDistribution;

/// Seed used when neither the task file nor the command line names one.
pub const DEFAULT_SEED: u64 = 2023;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    name: Option<String>,
    builtin: Option<Spanned<String>>,
    table: Option<Spanned<Vec<RawRow>>>,
    k: Option<Spanned<u32>>,
    n_digits: Option<Spanned<usize>>,
    #[serde(rename = "L", alias = "concepts")]
    concepts: Option<Spanned<usize>>,
    #[serde(rename = "m", alias = "arity")]
    arity: Option<Spanned<usize>>,
    pool: Option<Spanned<Vec<ConceptSeq>>>,
    seed: Option<u64>,
    distribution: Option<Spanned<RawDistribution>>,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    z: ConceptSeq,
    y: Label,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    kind: String,
    weights: Option<Vec<RawWeight>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    z: ConceptSeq,
    p: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    injective: Option<bool>,
    solution_cap: Option<usize>,
    pool_cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Uniform,
    Weights(Vec<(ConceptSeq, f64)>),
}

/// A parsed and validated task file.
#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub name: String,
    pub kb: KnowledgeBase,
    pub pool: Option<Vec<ConceptSeq>>,
    pub distribution: DistributionSpec,
    pub options: SolveOptions,
    pub pool_cap: usize,
    pub seed: u64,
}

/// A task ready for analysis: knowledge base, candidate pool and distribution.
#[derive(Clone, Debug)]
pub struct Task {
    pub spec: TaskSpec,
    pub index: AbductionIndex,
    pub distribution: ConceptDistribution,
}

struct Source<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn line_of(&self, span: &Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn err_at(&self, span: &Range<usize>, message: impl std::fmt::Display) -> Error {
        Error::TaskFile { path: self.origin.to_string(), message: format!("line {}: {message}", self.line_of(span)) }
    }

    fn err(&self, message: impl std::fmt::Display) -> Error {
        Error::TaskFile { path: self.origin.to_string(), message: message.to_string() }
    }
}

impl TaskSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::TaskFile { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses task TOML; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let src = Source { origin, text };
        let raw: RawTask = toml::from_str(text).map_err(|e| {
            let at = e.span().map(|s| format!("line {}: ", src.line_of(&s))).unwrap_or_default();
            src.err(format!("{at}{}", e.message()))
        })?;

        let kb = build_kb(&raw, &src)?;
        let name = raw.name.clone().unwrap_or_else(|| kb.name().to_string());
        let mut kb = kb;
        kb.set_name(name.clone());

        let distribution = match &raw.distribution {
            None => DistributionSpec::Uniform,
            Some(d) => {
                let span = d.span();
                let d = d.get_ref();
                match (d.kind.as_str(), &d.weights) {
                    ("uniform", None) => DistributionSpec::Uniform,
                    ("uniform", Some(_)) => return Err(src.err_at(&span, "a uniform distribution takes no weights")),
                    ("weights", Some(w)) => DistributionSpec::Weights(w.iter().map(|w| (w.z.clone(), w.p)).collect()),
                    ("weights", None) => return Err(src.err_at(&span, "kind = \"weights\" needs a `weights` list")),
                    (other, _) => {
                        return Err(
                            src.err_at(&span, format!("unknown distribution kind `{other}` (uniform | weights)"))
                        )
                    }
                }
            }
        };

        let solution_cap = raw.analysis.solution_cap.unwrap_or(DEFAULT_SOLUTION_CAP);
        let pool_cap = raw.analysis.pool_cap.unwrap_or(DEFAULT_POOL_CAP);
        if solution_cap == 0 || pool_cap == 0 {
            return Err(src.err("analysis caps must be at least 1"));
        }
        Ok(TaskSpec {
            name,
            kb,
            pool: raw.pool.map(Spanned::into_inner),
            distribution,
            options: SolveOptions { injective: raw.analysis.injective.unwrap_or(true), solution_cap },
            pool_cap,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
        })
    }

    /// Builds the candidate pool and distribution.
    pub fn build(self) -> Result<Task> {
        let kb = Arc::new(self.kb.clone());
        let index = match &self.pool {
            Some(pool) => AbductionIndex::restricted(kb, pool.clone())?,
            None => AbductionIndex::build(kb, self.pool_cap)?,
        };
        let distribution = match &self.distribution {
            DistributionSpec::Uniform => ConceptDistribution::uniform(&index),
            DistributionSpec::Weights(w) => ConceptDistribution::from_weights(&index, w)?,
        };
        Ok(Task { spec: self, index, distribution })
    }
}

fn build_kb(raw: &RawTask, src: &Source<'_>) -> Result<KnowledgeBase> {
    let digits = raw.n_digits.as_ref().map(|d| *d.get_ref()).unwrap_or(1);
    let concepts = raw.concepts.as_ref().map(|c| *c.get_ref());
    let wrap = |span: &Range<usize>, e: Error| src.err_at(span, e);

    let kb = match (&raw.builtin, &raw.table) {
        (Some(_), Some(t)) => return Err(src.err_at(&t.span(), "give either `builtin` or `table`, not both")),
        (None, None) => return Err(src.err("missing `builtin` or `table`")),
        (Some(b), None) => {
            let span = b.span();
            if let (Some(k), false) = (&raw.k, b.get_ref() == "modadd") {
                return Err(src.err_at(&k.span(), "`k` only applies to the modadd builtin"));
            }
            let concepts_or = |default| concepts.unwrap_or(default);
            match b.get_ref().as_str() {
                "add" => KnowledgeBase::addition(concepts_or(10), digits).map_err(|e| wrap(&span, e))?,
                "mul" => KnowledgeBase::multiplication(concepts_or(10), digits).map_err(|e| wrap(&span, e))?,
                "xor" => {
                    if let Some(c) = raw.concepts.as_ref().filter(|c| *c.get_ref() != 2) {
                        return Err(src.err_at(&c.span(), "xor is defined over L = 2 concepts"));
                    }
                    if let Some(d) = raw.n_digits.as_ref().filter(|d| *d.get_ref() != 1) {
                        return Err(src.err_at(&d.span(), "xor takes single-symbol operands"));
                    }
                    KnowledgeBase::xor()
                }
                "modadd" => {
                    let k = raw.k.as_ref().ok_or_else(|| src.err_at(&span, "modadd needs `k`"))?;
                    KnowledgeBase::mod_add(*k.get_ref(), concepts_or(10), digits).map_err(|e| wrap(&k.span(), e))?
                }
                other => return Err(src.err_at(&span, Error::UnknownBuiltin(other.to_string()))),
            }
        }
        (None, Some(t)) => {
            let span = t.span();
            let concepts = concepts.ok_or_else(|| src.err_at(&span, "a truth table needs `L`"))?;
            let arity =
                raw.arity.as_ref().map(|a| *a.get_ref()).ok_or_else(|| src.err_at(&span, "a truth table needs `m`"))?;
            let rows = t.get_ref().iter().map(|r| (r.z.clone(), r.y));
            KnowledgeBase::from_table("table", concepts, arity, rows).map_err(|e| wrap(&span, e))?
        }
    };
    if let Some(m) = &raw.arity {
        if *m.get_ref() != kb.arity() {
            return Err(src.err_at(
                &m.span(),
                format!("m = {} does not match the knowledge base arity {}", m.get_ref(), kb.arity()),
            ));
        }
    }
    Ok(kb)
}
