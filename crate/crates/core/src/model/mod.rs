//! Ground discrete log-linear models.
//!
//! A [`FactorGraph`] holds variables with finite domains, weighted clause
//! features (MLN-style ground clauses), table factors over one or two
//! variables, and clamped evidence. The unnormalized density of a full
//! assignment `s` is
//!
//! ```text
//! w(s) = exp(sum of weights of satisfied clauses) * prod of table potentials
//! ```
//!
//! and everything is evaluated in log space. A potential of zero is a hard
//! constraint and yields a log weight of `-inf`.

mod grid;
mod grounding;
mod parse;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use grid::{grid_symmetry_generators, grid_variable_name, make_grid_model, GridMode};
pub use grounding::{
    ground_template, random_evidence, AtomKey, EvidenceAtom, EvidenceSpec, GroundedModel,
    GroundingIndex, Predicate, Template,
};
pub use parse::parse_model;

/// A discrete random variable. Its id is its index in the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

/// `var = value` (or its negation when `positive` is false).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: usize,
    pub value: usize,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: usize, value: usize, positive: bool) -> Self {
        Literal {
            var,
            value,
            positive,
        }
    }

    #[inline]
    pub fn holds(&self, s: &[usize]) -> bool {
        (s[self.var] == self.value) == self.positive
    }
}

/// A weighted ground clause. It contributes `weight` to the log density
/// whenever at least one of its literals holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseFeature {
    pub weight: f64,
    pub literals: Vec<Literal>,
}

impl ClauseFeature {
    #[inline]
    pub fn satisfied(&self, s: &[usize]) -> bool {
        self.literals.iter().any(|l| l.holds(s))
    }

    #[inline]
    fn log_value(&self, s: &[usize]) -> f64 {
        if self.satisfied(s) {
            self.weight
        } else {
            0.0
        }
    }
}

/// Nonnegative potential table over one or two variables, laid out
/// row-major with the first scope variable most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFactor {
    scope: Vec<usize>,
    potentials: Vec<f64>,
    log_potentials: Vec<f64>,
    stride: usize,
}

impl TableFactor {
    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    #[inline]
    fn index(&self, s: &[usize]) -> usize {
        match self.scope.len() {
            1 => s[self.scope[0]],
            _ => s[self.scope[0]] * self.stride + s[self.scope[1]],
        }
    }

    #[inline]
    fn log_value(&self, s: &[usize]) -> f64 {
        self.log_potentials[self.index(s)]
    }
}

/// Incrementally assembles and validates a [`FactorGraph`].
#[derive(Debug, Default, Clone)]
pub struct ModelBuilder {
    variables: Vec<Variable>,
    names: HashMap<String, usize>,
    features: Vec<ClauseFeature>,
    tables: Vec<TableFactor>,
    evidence: Vec<Option<usize>>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, cardinality: usize) -> Result<usize> {
        let name = name.into();
        if cardinality < 2 {
            return Err(Error::InvalidModel(format!(
                "variable `{name}` has cardinality {cardinality} (need at least 2)"
            )));
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidModel(format!(
                "invalid variable name `{name}`"
            )));
        }
        if self.names.contains_key(&name) {
            return Err(Error::InvalidModel(format!("duplicate variable `{name}`")));
        }
        let id = self.variables.len();
        self.names.insert(name.clone(), id);
        self.variables.push(Variable { name, cardinality });
        self.evidence.push(None);
        Ok(id)
    }

    pub fn variable_id(&self, name: &str) -> Result<usize> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn check_value(&self, var: usize, value: usize) -> Result<()> {
        let v = self
            .variables
            .get(var)
            .ok_or_else(|| Error::UnknownVariable(format!("#{var}")))?;
        if value >= v.cardinality {
            return Err(Error::OutOfDomain {
                variable: v.name.clone(),
                value,
                cardinality: v.cardinality,
            });
        }
        Ok(())
    }

    pub fn add_feature(&mut self, weight: f64, literals: Vec<Literal>) -> Result<()> {
        if !weight.is_finite() {
            return Err(Error::NonFiniteWeight(weight));
        }
        if literals.is_empty() {
            return Err(Error::InvalidModel(
                "clause feature without literals".into(),
            ));
        }
        for l in &literals {
            self.check_value(l.var, l.value)?;
        }
        self.features.push(ClauseFeature { weight, literals });
        Ok(())
    }

    pub fn add_table(&mut self, scope: Vec<usize>, potentials: Vec<f64>) -> Result<()> {
        if scope.is_empty() || scope.len() > 2 {
            return Err(Error::InvalidModel(format!(
                "table factor scope must have 1 or 2 variables, got {}",
                scope.len()
            )));
        }
        if scope.len() == 2 && scope[0] == scope[1] {
            return Err(Error::InvalidModel(
                "table factor scope repeats a variable".into(),
            ));
        }
        let mut size = 1;
        for &v in &scope {
            let var = self
                .variables
                .get(v)
                .ok_or_else(|| Error::UnknownVariable(format!("#{v}")))?;
            size *= var.cardinality;
        }
        if potentials.len() != size {
            return Err(Error::SizeMismatch {
                expected: size,
                found: potentials.len(),
            });
        }
        if potentials.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidModel(
                "table potentials must be finite and nonnegative".into(),
            ));
        }
        if potentials.iter().all(|p| *p == 0.0) {
            return Err(Error::InvalidModel(
                "table factor has no positive entry".into(),
            ));
        }
        let stride = if scope.len() == 2 {
            self.variables[scope[1]].cardinality
        } else {
            1
        };
        let log_potentials = potentials.iter().map(|p| p.ln()).collect();
        self.tables.push(TableFactor {
            scope,
            potentials,
            log_potentials,
            stride,
        });
        Ok(())
    }

    pub fn set_evidence(&mut self, var: usize, value: usize) -> Result<()> {
        self.check_value(var, value)?;
        self.evidence[var] = Some(value);
        Ok(())
    }

    pub fn build(self) -> Result<FactorGraph> {
        let n = self.variables.len();
        let mut var_features = vec![Vec::new(); n];
        for (i, f) in self.features.iter().enumerate() {
            for l in &f.literals {
                let adj: &mut Vec<u32> = &mut var_features[l.var];
                if adj.last() != Some(&(i as u32)) {
                    adj.push(i as u32);
                }
            }
        }
        let mut var_tables = vec![Vec::new(); n];
        for (i, t) in self.tables.iter().enumerate() {
            for &v in &t.scope {
                var_tables[v].push(i as u32);
            }
        }
        let free = (0..n).filter(|&v| self.evidence[v].is_none()).collect();
        Ok(FactorGraph {
            variables: self.variables,
            names: self.names,
            features: self.features,
            tables: self.tables,
            evidence: self.evidence,
            free,
            var_features,
            var_tables,
        })
    }
}

/// An immutable ground log-linear model.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    names: HashMap<String, usize>,
    features: Vec<ClauseFeature>,
    tables: Vec<TableFactor>,
    evidence: Vec<Option<usize>>,
    free: Vec<usize>,
    var_features: Vec<Vec<u32>>,
    var_tables: Vec<Vec<u32>>,
}

impl FactorGraph {
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: usize) -> &Variable {
        &self.variables[id]
    }

    pub fn cardinality(&self, id: usize) -> usize {
        self.variables[id].cardinality
    }

    pub fn features(&self) -> &[ClauseFeature] {
        &self.features
    }

    pub fn tables(&self) -> &[TableFactor] {
        &self.tables
    }

    pub fn evidence(&self) -> &[Option<usize>] {
        &self.evidence
    }

    pub fn is_evidence(&self, v: usize) -> bool {
        self.evidence[v].is_some()
    }

    /// Non-evidence variable ids in increasing order.
    pub fn free_variables(&self) -> &[usize] {
        &self.free
    }

    /// Looks up a variable by name. Names of the form `pred_A_B` are also
    /// accepted for atoms written `pred(A,B)`.
    pub fn variable_id(&self, name: &str) -> Result<usize> {
        if let Some(&id) = self.names.get(name) {
            return Ok(id);
        }
        if !name.contains('(') {
            if let Some((pred, args)) = name.split_once('_') {
                let atom = format!("{pred}({})", args.replace('_', ","));
                if let Some(&id) = self.names.get(&atom) {
                    return Ok(id);
                }
            }
        }
        Err(Error::UnknownVariable(name.to_string()))
    }

    /// Checks length, domains and evidence consistency of `s`.
    pub fn check_assignment(&self, s: &[usize]) -> Result<()> {
        if s.len() != self.variables.len() {
            return Err(Error::SizeMismatch {
                expected: self.variables.len(),
                found: s.len(),
            });
        }
        for (i, (&value, var)) in s.iter().zip(&self.variables).enumerate() {
            if value >= var.cardinality {
                return Err(Error::OutOfDomain {
                    variable: var.name.clone(),
                    value,
                    cardinality: var.cardinality,
                });
            }
            if let Some(e) = self.evidence[i] {
                if e != value {
                    return Err(Error::EvidenceMismatch(i));
                }
            }
        }
        Ok(())
    }

    /// An assignment that agrees with the evidence and sets every free
    /// variable to 0.
    pub fn evidence_assignment(&self) -> Vec<usize> {
        self.evidence.iter().map(|e| e.unwrap_or(0)).collect()
    }

    /// `log w(s)`; `-inf` iff some table potential is zero.
    pub fn log_weight(&self, s: &[usize]) -> Result<f64> {
        self.check_assignment(s)?;
        Ok(self.log_weight_unchecked(s))
    }

    /// [`Self::log_weight`] without validation. `s` must be a valid assignment.
    pub fn log_weight_unchecked(&self, s: &[usize]) -> f64 {
        let clauses: f64 = self.features.iter().map(|f| f.log_value(s)).sum();
        let tables: f64 = self.tables.iter().map(|t| t.log_value(s)).sum();
        clauses + tables
    }

    /// Sum of the log factors that mention `v` (its Markov blanket terms).
    #[inline]
    pub fn local_log_weight(&self, s: &[usize], v: usize) -> f64 {
        let mut total = 0.0;
        for &f in &self.var_features[v] {
            total += self.features[f as usize].log_value(s);
        }
        for &t in &self.var_tables[v] {
            total += self.tables[t as usize].log_value(s);
        }
        total
    }

    /// Number of tables mentioning `v` whose potential at `s` is zero.
    pub fn local_violations(&self, s: &[usize], v: usize) -> usize {
        self.var_tables[v]
            .iter()
            .filter(|&&t| self.tables[t as usize].log_value(s) == f64::NEG_INFINITY)
            .count()
    }

    /// Sum of the log factors that mention none of the `excluded` variables.
    pub fn log_weight_without(&self, s: &[usize], excluded: &[bool]) -> f64 {
        let clauses: f64 = self
            .features
            .iter()
            .filter(|f| f.literals.iter().all(|l| !excluded[l.var]))
            .map(|f| f.log_value(s))
            .sum();
        let tables: f64 = self
            .tables
            .iter()
            .filter(|t| t.scope.iter().all(|&v| !excluded[v]))
            .map(|t| t.log_value(s))
            .sum();
        clauses + tables
    }

    /// Variables sharing at least one factor with `v`, excluding `v`.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.var_features[v]
            .iter()
            .flat_map(|&f| self.features[f as usize].literals.iter().map(|l| l.var))
            .chain(
                self.var_tables[v]
                    .iter()
                    .flat_map(|&t| self.tables[t as usize].scope.iter().copied()),
            )
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Full conditional of variable `v` given the rest of `s`.
    pub fn gibbs_conditional(&self, s: &[usize], v: usize) -> Result<Vec<f64>> {
        self.check_assignment(s)?;
        if v >= self.variables.len() {
            return Err(Error::UnknownVariable(format!("#{v}")));
        }
        if self.is_evidence(v) {
            return Err(Error::ClampedVariable(v));
        }
        let mut scratch = s.to_vec();
        let mut out = Vec::new();
        self.conditional_into(&mut scratch, v, &mut out)?;
        Ok(out)
    }

    /// Writes the full conditional of `v` into `out`. `s[v]` is modified
    /// while scanning values and restored before returning.
    pub fn conditional_into(&self, s: &mut [usize], v: usize, out: &mut Vec<f64>) -> Result<()> {
        let card = self.variables[v].cardinality;
        let original = s[v];
        out.clear();
        let mut max = f64::NEG_INFINITY;
        for k in 0..card {
            s[v] = k;
            let lw = self.local_log_weight(s, v);
            max = max.max(lw);
            out.push(lw);
        }
        s[v] = original;
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroConditional(v));
        }
        let mut total = 0.0;
        for p in out.iter_mut() {
            *p = (*p - max).exp();
            total += *p;
        }
        for p in out.iter_mut() {
            *p /= total;
        }
        Ok(())
    }

    /// Returns a copy of this model with the given evidence added.
    pub fn with_evidence(&self, evidence: &[(usize, usize)]) -> Result<FactorGraph> {
        let mut builder = self.to_builder();
        for &(v, value) in evidence {
            builder.set_evidence(v, value)?;
        }
        builder.build()
    }

    fn to_builder(&self) -> ModelBuilder {
        ModelBuilder {
            variables: self.variables.clone(),
            names: self.names.clone(),
            features: self.features.clone(),
            tables: self.tables.clone(),
            evidence: self.evidence.clone(),
        }
    }

    /// Serializes to the line-oriented model format read by [`parse_model`].
    pub fn to_text(&self) -> String {
        parse::write_model(self)
    }
}

/// The event `X̂ = x̂` for an ordered list of distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarginalQuery {
    vars: Vec<usize>,
    target: Vec<usize>,
}

impl MarginalQuery {
    pub fn new(model: &FactorGraph, vars: Vec<usize>, target: Vec<usize>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::InvalidQuery("query has no variables".into()));
        }
        if vars.len() != target.len() {
            return Err(Error::SizeMismatch {
                expected: vars.len(),
                found: target.len(),
            });
        }
        for (i, (&v, &x)) in vars.iter().zip(&target).enumerate() {
            if v >= model.num_variables() {
                return Err(Error::UnknownVariable(format!("#{v}")));
            }
            if vars[..i].contains(&v) {
                return Err(Error::InvalidQuery(format!(
                    "variable `{}` appears twice",
                    model.variable(v).name
                )));
            }
            if model.is_evidence(v) {
                return Err(Error::InvalidQuery(format!(
                    "variable `{}` is evidence",
                    model.variable(v).name
                )));
            }
            let card = model.cardinality(v);
            if x >= card {
                return Err(Error::OutOfDomain {
                    variable: model.variable(v).name.clone(),
                    value: x,
                    cardinality: card,
                });
            }
        }
        Ok(MarginalQuery { vars, target })
    }

    pub fn single(model: &FactorGraph, var: usize, value: usize) -> Result<Self> {
        Self::new(model, vec![var], vec![value])
    }

    /// Parses `name=value` terms separated by commas outside parentheses,
    /// e.g. `smokes(A)=1,friends(A,B)=0`.
    pub fn parse(model: &FactorGraph, text: &str) -> Result<Self> {
        let mut vars = Vec::new();
        let mut target = Vec::new();
        for term in split_top_level(text) {
            let term = term.trim();
            let (name, value) = term
                .rsplit_once('=')
                .ok_or_else(|| Error::InvalidQuery(format!("expected name=value, got `{term}`")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidQuery(format!("bad value in `{term}`")))?;
            vars.push(model.variable_id(name.trim())?);
            target.push(value);
        }
        Self::new(model, vars, target)
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// `s⟨X̂⟩ = x̂`.
    #[inline]
    pub fn matches(&self, s: &[usize]) -> bool {
        self.vars.iter().zip(&self.target).all(|(&v, &x)| s[v] == x)
    }

    pub fn describe(&self, model: &FactorGraph) -> String {
        self.vars
            .iter()
            .zip(&self.target)
            .map(|(&v, &x)| format!("{}={}", model.variable(v).name, x))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}
