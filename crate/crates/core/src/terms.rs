//! Degree-2 polynomial terms over encoded configuration features.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "TermRepr", into = "TermRepr")]
pub enum Term {
    Intercept,
    Main(usize),
    Quadratic(usize),
    /// Always stored with `i < j`.
    Interaction(usize, usize),
}

impl Term {
    /// Interaction with normalized index order. Panics if `i == j`.
    pub fn interaction(i: usize, j: usize) -> Term {
        assert_ne!(i, j, "interaction of an option with itself is a quadratic term");
        Term::Interaction(i.min(j), i.max(j))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Main(i) => x[i],
            Term::Quadratic(i) => x[i] * x[i],
            Term::Interaction(i, j) => x[i] * x[j],
        }
    }

    /// Option indices the term depends on.
    pub fn options(&self) -> Vec<usize> {
        match *self {
            Term::Intercept => vec![],
            Term::Main(i) | Term::Quadratic(i) => vec![i],
            Term::Interaction(i, j) => vec![i, j],
        }
    }

    pub fn max_option(&self) -> Option<usize> {
        self.options().into_iter().max()
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if let Term::Interaction(i, j) = *self {
            if i >= j {
                return Err(Error::InvalidSurface(format!(
                    "interaction indices must satisfy i < j, got ({i}, {j})"
                )));
            }
        }
        match self.max_option() {
            Some(m) if m >= dimension => Err(Error::InvalidSurface(format!(
                "term {self} references option {m} in a {dimension}-option space"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Intercept => write!(f, "intercept"),
            Term::Main(i) => write!(f, "main({i})"),
            Term::Quadratic(i) => write!(f, "quadratic({i})"),
            Term::Interaction(i, j) => write!(f, "interaction({i},{j})"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TermKind {
    Intercept,
    Main,
    Quadratic,
    Interaction,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    kind: TermKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
}

impl TryFrom<TermRepr> for Term {
    type Error = Error;

    fn try_from(r: TermRepr) -> Result<Term> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidSurface(format!("term is missing index `{name}`")))
        };
        Ok(match r.kind {
            TermKind::Intercept => Term::Intercept,
            TermKind::Main => Term::Main(need(r.i, "i")?),
            TermKind::Quadratic => Term::Quadratic(need(r.i, "i")?),
            TermKind::Interaction => {
                let (i, j) = (need(r.i, "i")?, need(r.j, "j")?);
                if i == j {
                    return Err(Error::InvalidSurface(format!("interaction({i},{j}) repeats an option")));
                }
                Term::interaction(i, j)
            }
        })
    }
}

impl From<Term> for TermRepr {
    fn from(t: Term) -> TermRepr {
        let (kind, i, j) = match t {
            Term::Intercept => (TermKind::Intercept, None, None),
            Term::Main(i) => (TermKind::Main, Some(i), None),
            Term::Quadratic(i) => (TermKind::Quadratic, Some(i), None),
            Term::Interaction(i, j) => (TermKind::Interaction, Some(i), Some(j)),
        };
        TermRepr { kind, i, j }
    }
}

/// Intercept, then main effects, quadratics and pairwise interactions over `dimension` options.
pub fn candidate_terms(dimension: usize) -> Vec<Term> {
    let mut terms = vec![Term::Intercept];
    terms.extend((0..dimension).map(Term::Main));
    terms.extend((0..dimension).map(Term::Quadratic));
    for i in 0..dimension {
        for j in i + 1..dimension {
            terms.push(Term::Interaction(i, j));
        }
    }
    terms
}

/// Options and option pairs that carry weight in a term set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Influence {
    pub options: BTreeSet<usize>,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl Influence {
    pub fn from_terms<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Influence {
        let mut out = Influence::default();
        for t in terms {
            out.options.extend(t.options());
            if let Term::Interaction(i, j) = *t {
                out.pairs.insert((i, j));
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

impl fmt::Display for Influence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opts: Vec<String> = self.options.iter().map(|o| o.to_string()).collect();
        let pairs: Vec<String> = self.pairs.iter().map(|(i, j)| format!("({i},{j})")).collect();
        write!(f, "options {{{}}} pairs {{{}}}", opts.join(","), pairs.join(","))
    }
}
