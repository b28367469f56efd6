//! Flat first-order literals, conjunctive states and substitutions.
//!
//! Terms are either variables (written `?name`) or constants. There are no
//! function symbols and no quantifiers: a literal is a possibly negated
//! predicate applied to a list of terms, and a [`State`] is the conjunction of
//! a set of literals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FolError {
    #[error("malformed literal `{0}`")]
    Syntax(String),
    #[error("predicate `{predicate}` used with arity {found}, declared with arity {expected}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("malformed mapping: {0}")]
    MalformedMapping(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.trim_start_matches('?').to_string())
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(name.to_string())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(n) => write!(f, "?{n}"),
            Term::Const(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Literal {
            predicate: predicate.to_string(),
            args,
            negated: false,
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_grounded(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Same predicate, arity and polarity.
    pub fn same_signature(&self, other: &Literal) -> bool {
        self.predicate == other.predicate
            && self.args.len() == other.args.len()
            && self.negated == other.negated
    }

    /// The literal with its polarity flipped.
    pub fn complement(&self) -> Literal {
        self.clone().negate()
    }

    pub fn apply(&self, sigma: &Substitution) -> Literal {
        Literal {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => match sigma.get(v) {
                        Some(c) => Term::Const(c.to_string()),
                        None => t.clone(),
                    },
                    Term::Const(_) => t.clone(),
                })
                .collect(),
            negated: self.negated,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl FromStr for Literal {
    type Err = FolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FolError::Syntax(s.to_string());
        let text = s.trim();
        let (negated, body) = match text.strip_prefix('!') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (predicate, args) = match body.find('(') {
            None => (body, Vec::new()),
            Some(open) => {
                let inner = body[open + 1..].strip_suffix(')').ok_or_else(err)?;
                let mut args = Vec::new();
                if !inner.trim().is_empty() {
                    for raw in inner.split(',') {
                        let raw = raw.trim();
                        let term = match raw.strip_prefix('?') {
                            Some(v) if is_identifier(v) => Term::Var(v.to_string()),
                            Some(_) => return Err(err()),
                            None if is_identifier(raw) => Term::Const(raw.to_string()),
                            None => return Err(err()),
                        };
                        args.push(term);
                    }
                }
                (&body[..open], args)
            }
        };
        if !is_identifier(predicate) {
            return Err(err());
        }
        Ok(Literal {
            predicate: predicate.to_string(),
            args,
            negated,
        })
    }
}

/// Splits a comma-separated literal list at parenthesis depth zero. The
/// single token `-` denotes the empty list.
pub fn parse_literal_list(s: &str) -> Result<Vec<Literal>, FolError> {
    let s = s.trim();
    if s == "-" || s.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].parse()?);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(FolError::Syntax(s.to_string()));
        }
    }
    if depth != 0 {
        return Err(FolError::Syntax(s.to_string()));
    }
    out.push(s[start..].parse()?);
    Ok(out)
}

pub fn format_literal_list<'a>(lits: impl IntoIterator<Item = &'a Literal>) -> String {
    let parts: Vec<String> = lits.into_iter().map(|l| l.to_string()).collect();
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join(",")
    }
}

/// A conjunction of literals.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    literals: BTreeSet<Literal>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn contains(&self, lit: &Literal) -> bool {
        self.literals.contains(lit)
    }

    pub fn insert(&mut self, lit: Literal) -> bool {
        self.literals.insert(lit)
    }

    pub fn remove(&mut self, lit: &Literal) -> bool {
        self.literals.remove(lit)
    }

    pub fn is_grounded(&self) -> bool {
        self.literals.iter().all(Literal::is_grounded)
    }

    /// Literals that appear with both polarities.
    pub fn contradictions(&self) -> Vec<&Literal> {
        self.literals
            .iter()
            .filter(|l| !l.negated && self.literals.contains(&l.complement()))
            .collect()
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.literals
            .iter()
            .flat_map(|l| l.variables().map(str::to_string))
            .collect()
    }

    pub fn apply(&self, sigma: &Substitution) -> State {
        self.literals.iter().map(|l| l.apply(sigma)).collect()
    }
}

impl FromIterator<Literal> for State {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        State {
            literals: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_literal_list(&self.literals))
    }
}

/// Variable-to-constant bindings. Never stores variable-to-variable chains.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    bindings: BTreeMap<String, String>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.bindings.get(var).map(String::as_str)
    }

    /// Binds `var` to `constant`; returns false on a conflicting existing
    /// binding.
    pub fn bind(&mut self, var: &str, constant: &str) -> bool {
        match self.bindings.get(var) {
            Some(existing) => existing == constant,
            None => {
                self.bindings.insert(var.to_string(), constant.to_string());
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Merges two substitutions if they agree on shared variables.
    pub fn merge(&self, other: &Substitution) -> Option<Substitution> {
        let mut out = self.clone();
        for (v, c) in other.iter() {
            if !out.bind(v, c) {
                return None;
            }
        }
        Some(out)
    }

    /// True when every binding of `self` is also present in `other`.
    pub fn is_subset_of(&self, other: &Substitution) -> bool {
        self.iter().all(|(v, c)| other.get(v) == Some(c))
    }

    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a str>) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if let Some(c) = self.get(v) {
                out.bind(v, c);
            }
        }
        out
    }
}

impl FromIterator<(String, String)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Substitution {
            bindings: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bindings.is_empty() {
            return f.write_str("-");
        }
        for (i, (v, c)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "?{v}={c}")?;
        }
        Ok(())
    }
}

impl FromStr for Substitution {
    type Err = FolError;

    /// Parses `?x=A,?y=B`; `-` is the empty substitution.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut sigma = Substitution::new();
        if s == "-" || s.is_empty() {
            return Ok(sigma);
        }
        for part in s.split(',') {
            let (v, c) = part
                .split_once('=')
                .ok_or_else(|| FolError::Syntax(s.to_string()))?;
            let v = v.trim().strip_prefix('?').unwrap_or(v.trim());
            let c = c.trim();
            if !is_identifier(v) || !is_identifier(c) || !sigma.bind(v, c) {
                return Err(FolError::Syntax(s.to_string()));
            }
        }
        Ok(sigma)
    }
}

/// Most general substitution `σ` with `σ(a) = b`, for a grounded `b`.
pub fn unify(a: &Literal, b: &Literal) -> Option<Substitution> {
    if !a.same_signature(b) || !b.is_grounded() {
        return None;
    }
    let mut sigma = Substitution::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        match x {
            Term::Const(c) if c == y.name() => {}
            Term::Const(_) => return None,
            Term::Var(v) => {
                if !sigma.bind(v, y.name()) {
                    return None;
                }
            }
        }
    }
    Some(sigma)
}

/// Like [`unify`] but extends an existing substitution.
pub fn unify_with(a: &Literal, b: &Literal, base: &Substitution) -> Option<Substitution> {
    unify(&a.apply(base), b).and_then(|s| base.merge(&s))
}

pub fn apply_substitution(state: &State, sigma: &Substitution) -> State {
    state.apply(sigma)
}

pub fn is_grounded(state: &State) -> bool {
    state.is_grounded()
}

/// One declared correspondence: a literal on the upper side standing for one
/// or more literals on the lower side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondence {
    pub upper: Literal,
    pub lower: Vec<Literal>,
}

/// Checks that `upper` and `lower` describe the same conjunction under the
/// declared correspondences.
///
/// Literals of `upper` without a declared entry fall back to identity: they
/// cover every lower literal with the same predicate, arity, polarity and
/// constant arguments (variables may be renamed). A declared one-to-one entry
/// between literals of the same predicate must keep the arity.
pub fn semantically_equivalent(
    upper: &[State],
    lower: &[State],
    mapping: &[Correspondence],
) -> Result<bool, FolError> {
    let upper_lits: BTreeSet<&Literal> = upper.iter().flat_map(State::literals).collect();
    let lower_lits: BTreeSet<&Literal> = lower.iter().flat_map(State::literals).collect();

    let mut covered_upper: BTreeSet<&Literal> = BTreeSet::new();
    let mut covered_lower: BTreeSet<&Literal> = BTreeSet::new();
    let mut consistent = true;

    for entry in mapping {
        let up = upper_lits.get(&entry.upper).ok_or_else(|| {
            FolError::MalformedMapping(format!("unknown upper literal `{}`", entry.upper))
        })?;
        if entry.lower.is_empty() {
            return Err(FolError::MalformedMapping(format!(
                "`{}` maps to no literal",
                entry.upper
            )));
        }
        for l in &entry.lower {
            let low = lower_lits.get(l).ok_or_else(|| {
                FolError::MalformedMapping(format!("unknown lower literal `{l}`"))
            })?;
            covered_lower.insert(low);
        }
        if let [single] = entry.lower.as_slice() {
            if single.predicate == up.predicate && single.arity() != up.arity() {
                consistent = false;
            }
        }
        covered_upper.insert(up);
    }

    for up in &upper_lits {
        if covered_upper.contains(up) {
            continue;
        }
        let matches: Vec<&&Literal> = lower_lits
            .iter()
            .filter(|l| identity_match(up, l))
            .collect();
        if matches.is_empty() {
            return Ok(false);
        }
        covered_upper.insert(up);
        covered_lower.extend(matches.into_iter().copied());
    }

    Ok(consistent && covered_lower.len() == lower_lits.len())
}

fn identity_match(a: &Literal, b: &Literal) -> bool {
    a.same_signature(b)
        && a.args.iter().zip(&b.args).all(|(x, y)| match (x, y) {
            (Term::Const(p), Term::Const(q)) => p == q,
            _ => true,
        })
}

/// Predicate arity table built while loading a model.
#[derive(Debug, Clone, Default)]
pub struct ArityTable {
    arities: BTreeMap<String, usize>,
}

impl ArityTable {
    pub fn new() -> Self {
        ArityTable::default()
    }

    pub fn check(&mut self, lit: &Literal) -> Result<(), FolError> {
        match self.arities.get(&lit.predicate) {
            Some(&expected) if expected != lit.arity() => Err(FolError::Arity {
                predicate: lit.predicate.clone(),
                expected,
                found: lit.arity(),
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(lit.predicate.clone(), lit.arity());
                Ok(())
            }
        }
    }

    pub fn check_all<'a>(
        &mut self,
        lits: impl IntoIterator<Item = &'a Literal>,
    ) -> Result<(), FolError> {
        lits.into_iter().try_for_each(|l| self.check(l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(s: &str) -> Literal {
        s.parse().unwrap()
    }

    fn state(s: &str) -> State {
        parse_literal_list(s).unwrap().into_iter().collect()
    }

    fn sub(s: &str) -> Substitution {
        s.parse().unwrap()
    }

    #[test]
    fn unify_examples() {
        assert_eq!(unify(&lit("Leg(?y)"), &lit("Leg(A)")), Some(sub("?y=A")));
        assert_eq!(unify(&lit("Leg(?y)"), &lit("Tabletop(T)")), None);
        let a = lit("Connected(?y,T)");
        let b = lit("Connected(B,T)");
        let sigma = unify(&a, &b).unwrap();
        assert_eq!(sigma, sub("?y=B"));
        assert_eq!(a.apply(&sigma), b);
    }

    #[test]
    fn unify_rejects_polarity_arity_and_ungrounded_targets() {
        assert_eq!(unify(&lit("Leg(?y)"), &lit("!Leg(A)")), None);
        assert_eq!(unify(&lit("Leg(?y)"), &lit("Leg(A,B)")), None);
        assert_eq!(unify(&lit("Leg(?y)"), &lit("Leg(?z)")), None);
        assert_eq!(unify(&lit("At(?y,?y)"), &lit("At(A,B)")), None);
        assert_eq!(unify(&lit("At(?y,?y)"), &lit("At(A,A)")), Some(sub("?y=A")));
    }

    #[test]
    fn apply_examples() {
        assert_eq!(state("Leg(?y)").apply(&sub("?y=A")), state("Leg(A)"));
        assert_eq!(state("Leg(?y)").apply(&Substitution::new()), state("Leg(?y)"));
        let out = state("Leg(?y),!AtPose(?y,MP)").apply(&sub("?y=B"));
        assert_eq!(out, state("Leg(B),!AtPose(B,MP)"));
        assert!(out.literals().any(|l| l.negated && l.predicate == "AtPose"));
    }

    #[test]
    fn groundedness() {
        assert!(state("Leg(A)").is_grounded());
        assert!(!state("Leg(?y)").is_grounded());
        assert!(State::new().is_grounded());
    }

    #[test]
    fn literal_syntax_round_trips() {
        for s in ["Leg(?y)", "!AtPose(?y,MP)", "TableDone", "Connected(B,T)"] {
            assert_eq!(lit(s).to_string(), s);
        }
        assert!("Leg(".parse::<Literal>().is_err());
        assert!("Leg(?)".parse::<Literal>().is_err());
        assert!("(A)".parse::<Literal>().is_err());
        assert_eq!(parse_literal_list("Connected(?y,T),Leg(?y)").unwrap().len(), 2);
        assert!(parse_literal_list("-").unwrap().is_empty());
    }

    #[test]
    fn contradictions_are_detected() {
        assert_eq!(state("Leg(A),!Leg(A)").contradictions().len(), 1);
        assert!(state("Leg(A),!Leg(B)").contradictions().is_empty());
    }

    #[test]
    fn semantic_equivalence_examples() {
        let a = [state("LegReady(?y)")];
        let b = [state("LegReady(?y)")];
        assert!(semantically_equivalent(&a, &b, &[]).unwrap());

        let a = [state("TableDone")];
        let b = [state("LegsFixed"), state("TopPlaced")];
        let m = [Correspondence {
            upper: lit("TableDone"),
            lower: vec![lit("LegsFixed"), lit("TopPlaced")],
        }];
        assert!(semantically_equivalent(&a, &b, &m).unwrap());
        assert!(!semantically_equivalent(&a, &b, &m[..0]).unwrap());

        assert!(!semantically_equivalent(&[state("X")], &[state("Y")], &[]).unwrap());
    }

    #[test]
    fn semantic_equivalence_rejects_partial_cover_and_bad_refs() {
        let a = [state("TableDone")];
        let b = [state("LegsFixed"), state("TopPlaced")];
        let partial = [Correspondence {
            upper: lit("TableDone"),
            lower: vec![lit("LegsFixed")],
        }];
        assert!(!semantically_equivalent(&a, &b, &partial).unwrap());

        let bad = [Correspondence {
            upper: lit("Nope"),
            lower: vec![lit("LegsFixed")],
        }];
        assert!(matches!(
            semantically_equivalent(&a, &b, &bad),
            Err(FolError::MalformedMapping(_))
        ));

        let arity = [Correspondence {
            upper: lit("Leg(?y)"),
            lower: vec![lit("Leg(?y,?z)")],
        }];
        assert!(!semantically_equivalent(&[state("Leg(?y)")], &[state("Leg(?y,?z)")], &arity).unwrap());
    }

    #[test]
    fn identity_allows_variable_renaming_but_not_constant_change() {
        assert!(semantically_equivalent(&[state("Leg(?y)")], &[state("Leg(?x)")], &[]).unwrap());
        assert!(!semantically_equivalent(&[state("Leg(A)")], &[state("Leg(B)")], &[]).unwrap());
    }

    #[test]
    fn arity_table_flags_mismatch() {
        let mut t = ArityTable::new();
        t.check(&lit("Leg(?y)")).unwrap();
        t.check(&lit("Leg(A)")).unwrap();
        assert!(matches!(t.check(&lit("Leg(A,B)")), Err(FolError::Arity { .. })));
    }

    #[test]
    fn substitution_syntax() {
        let s = sub("?y=A,?x=T");
        assert_eq!(s.get("x"), Some("T"));
        assert_eq!(s.to_string(), "?x=T,?y=A");
        assert!("?y=A,?y=B".parse::<Substitution>().is_err());
        assert!("-".parse::<Substitution>().unwrap().is_empty());
    }
}
