//! Does the selector pick a model class more often than its share of the
//! grid? Bayes factors under a counting prior and exact one-sided binomial
//! tests, over consecutive non-overlapping periods.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::adaptive::SelectionRecord;
use crate::error::{Error, Result};
use crate::model_zoo::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Group,
    W,
    P,
    D,
    Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In(Vec<usize>),
    NotIn(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Clause {
    field: Field,
    op: Op,
    value: usize,
}

/// A conjunction of clauses such as `group<=6 & w=96` or `group={2,8}`.
/// The empty predicate (or `all`) matches every model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelPredicate {
    text: String,
    clauses: Vec<Clause>,
}

impl ModelPredicate {
    pub fn all() -> Self {
        ModelPredicate {
            text: "all".into(),
            clauses: Vec::new(),
        }
    }

    pub fn matches(&self, s: &ModelSpec) -> bool {
        self.clauses.iter().all(|c| {
            let v = match c.field {
                Field::Group => s.group as usize,
                Field::W => s.w,
                Field::P => s.p,
                Field::D => s.d,
                Field::Q => s.q,
            };
            match &c.op {
                Op::Eq => v == c.value,
                Op::Ne => v != c.value,
                Op::Lt => v < c.value,
                Op::Le => v <= c.value,
                Op::Gt => v > c.value,
                Op::Ge => v >= c.value,
                Op::In(set) => set.contains(&v),
                Op::NotIn(set) => !set.contains(&v),
            }
        })
    }
}

impl fmt::Display for ModelPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for ModelPredicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim();
        if text.is_empty() || text == "all" {
            return Ok(ModelPredicate::all());
        }
        let bad = |msg: &str| Error::Query(format!("{msg} in {text:?}"));
        let mut clauses = Vec::new();
        for part in text.split('&') {
            let part: String = part.chars().filter(|c| !c.is_whitespace()).collect();
            let pos = part.find(['<', '>', '=', '!']).ok_or_else(|| bad("missing operator"))?;
            let field = match &part[..pos] {
                "group" => Field::Group,
                "w" => Field::W,
                "p" => Field::P,
                "d" => Field::D,
                "q" => Field::Q,
                other => return Err(bad(&format!("unknown field {other:?}"))),
            };
            let rest = &part[pos..];
            let (op_str, value) = ["<=", ">=", "!=", "=", "<", ">"]
                .iter()
                .find_map(|op| rest.strip_prefix(op).map(|v| (*op, v)))
                .ok_or_else(|| bad("bad operator"))?;
            if let Some(inner) = value.strip_prefix('{').and_then(|v| v.strip_suffix('}')) {
                let set = inner
                    .split(',')
                    .map(|v| v.parse::<usize>().map_err(|_| bad("bad set element")))
                    .collect::<Result<Vec<_>>>()?;
                let op = match op_str {
                    "=" => Op::In(set),
                    "!=" => Op::NotIn(set),
                    _ => return Err(bad("sets need = or !=")),
                };
                clauses.push(Clause { field, op, value: 0 });
                continue;
            }
            let value = value.parse::<usize>().map_err(|_| bad("bad value"))?;
            let op = match op_str {
                "=" => Op::Eq,
                "!=" => Op::Ne,
                "<" => Op::Lt,
                "<=" => Op::Le,
                ">" => Op::Gt,
                _ => Op::Ge,
            };
            clauses.push(Clause { field, op, value });
        }
        Ok(ModelPredicate {
            text: text.to_string(),
            clauses,
        })
    }
}

/// `H1` is the set of models in `H0` that also satisfy `h1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassQuery {
    pub name: String,
    pub h1: ModelPredicate,
    pub h0: ModelPredicate,
}

impl ClassQuery {
    /// `(|H1|, |H0 \ H1|)` within `universe`.
    pub fn class_sizes(&self, universe: &[ModelSpec]) -> Result<(usize, usize)> {
        let h0: Vec<&ModelSpec> = universe.iter().filter(|s| self.h0.matches(s)).collect();
        let h1 = h0.iter().filter(|s| self.h1.matches(s)).count();
        if h1 == 0 {
            return Err(Error::Query(format!("{}: H1 is empty", self.name)));
        }
        if h1 == h0.len() {
            return Err(Error::Query(format!("{}: H1 equals H0", self.name)));
        }
        Ok((h1, h0.len() - h1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BayesFactor {
    Finite(f64),
    Infinite,
    /// No selection fell in `H0`.
    Undefined,
}

impl fmt::Display for BayesFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BayesFactor::Finite(v) => write!(f, "{v}"),
            BayesFactor::Infinite => f.write_str("inf"),
            BayesFactor::Undefined => f.write_str("undefined"),
        }
    }
}

/// `(|H0 \ H1| / |H1|) * (n1 / n0)`.
pub fn bayes_factor(h1_size: usize, rest_size: usize, n1: usize, n0: usize) -> Result<BayesFactor> {
    if h1_size == 0 || rest_size == 0 {
        return Err(Error::Query("both classes must be non-empty".into()));
    }
    match (n1, n0) {
        (0, 0) => Err(Error::Query("no selections inside H0".into())),
        (_, 0) => Ok(BayesFactor::Infinite),
        _ => Ok(BayesFactor::Finite(rest_size as f64 / h1_size as f64 * (n1 as f64 / n0 as f64))),
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(X >= k)` for `X ~ Bin(n, p)`.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("probability {p} outside [0, 1]")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if k > n {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let term = |i: u64| -> f64 {
        if n <= 1000 {
            // Exact enough in f64 for these sizes and keeps small cases exact.
            let mut c = 1.0;
            for j in 0..i.min(n - i) {
                c = c * (n - j) as f64 / (j + 1) as f64;
            }
            c * p.powi(i as i32) * q.powi((n - i) as i32)
        } else {
            (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * q.ln()).exp()
        }
    };
    let total: f64 = (k..=n).rev().map(term).sum();
    Ok(total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub period_start: usize,
    pub period_end: usize,
    /// Selections inside `H0`.
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub bayes_factor: BayesFactor,
    pub p_value: f64,
    /// `;`-separated flags: `outside_h0` when selections fell outside `H0`
    /// (they are excluded), `dependent` for a switching-penalty source.
    pub warning: String,
}

/// Tests one period of selections.
pub fn test_period(query: &ClassQuery, universe: &[ModelSpec], selections: &[SelectionRecord], dependent_source: bool) -> Result<TestResult> {
    let (h1, rest) = query.class_sizes(universe)?;
    if selections.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    let in_h0: Vec<&ModelSpec> = selections.iter().filter_map(|s| s.spec.as_ref()).filter(|s| query.h0.matches(s)).collect();
    let n = in_h0.len();
    let n1 = in_h0.iter().filter(|s| query.h1.matches(s)).count();
    let n0 = n - n1;
    let bf = match bayes_factor(h1, rest, n1, n0) {
        Ok(b) => b,
        Err(_) => BayesFactor::Undefined,
    };
    let p0 = h1 as f64 / (h1 + rest) as f64;
    let mut flags = Vec::new();
    if n < selections.len() {
        flags.push("outside_h0");
    }
    if dependent_source {
        flags.push("dependent");
    }
    Ok(TestResult {
        period_start: selections[0].t,
        period_end: selections[selections.len() - 1].t,
        n,
        n1,
        n0,
        bayes_factor: bf,
        p_value: binomial_upper_tail(n as u64, p0, n1 as u64)?,
        warning: flags.join(";"),
    })
}

/// Splits `selections` into consecutive periods of `period_len` and tests
/// each. A partial trailing period is dropped.
pub fn rolling_tests(
    query: &ClassQuery,
    universe: &[ModelSpec],
    selections: &[SelectionRecord],
    period_len: usize,
    dependent_source: bool,
) -> Result<Vec<TestResult>> {
    if period_len == 0 {
        return Err(Error::InvalidInput("period length must be positive".into()));
    }
    query.class_sizes(universe)?;
    selections
        .chunks_exact(period_len)
        .map(|chunk| test_period(query, universe, chunk, dependent_source))
        .collect()
}

/// Writes `period_start,period_end,n,n1,n0,bayes_factor,p_value,warning`.
pub fn write_tests_csv<W: Write>(w: W, results: &[TestResult]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["period_start", "period_end", "n", "n1", "n0", "bayes_factor", "p_value", "warning"])?;
    for r in results {
        wr.write_record([
            r.period_start.to_string(),
            r.period_end.to_string(),
            r.n.to_string(),
            r.n1.to_string(),
            r.n0.to_string(),
            r.bayes_factor.to_string(),
            r.p_value.to_string(),
            r.warning.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
