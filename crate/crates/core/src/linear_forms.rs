//! Integer linear forms, systems of them, and their complexity.
//!
//! Text format, one form per line:
//!
//! ```text
//! # comment
//! 3 + x1 + 2*x2
//! x1 - x2
//! -4x3 + 1
//! ```
//!
//! Terms are integers or `[coefficient][*]x<k>` with `k >= 1`, joined by
//! `+`/`-`. Whitespace is ignored, a variable may appear more than once (its
//! coefficients add), and the dimension is the largest variable index used
//! anywhere in the file. The JSON form is an array of rows
//! `[c1, ..., cd, c0]`, constant last.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default cap on `t - 1` for the exhaustive partition search.
pub const DEFAULT_COMPLEXITY_BOUND: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearForm {
    coefficients: Vec<i64>,
    constant: i64,
}

impl LinearForm {
    pub fn new(coefficients: Vec<i64>, constant: i64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidSystem("a form needs at least one variable".into()));
        }
        if coefficients.iter().all(|&c| c == 0) {
            return Err(Error::InvalidSystem("constant form (all coefficients zero)".into()));
        }
        Ok(LinearForm { coefficients, constant })
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coefficients
    }

    pub fn constant(&self) -> i64 {
        self.constant
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    /// The coefficient vector with the constant dropped.
    pub fn homogeneous_part(&self) -> &[i64] {
        &self.coefficients
    }

    pub fn evaluate(&self, point: &[i64]) -> Result<i64> {
        if point.len() != self.dimension() {
            return Err(Error::InvalidArgument(format!(
                "point has length {}, form has dimension {}",
                point.len(),
                self.dimension()
            )));
        }
        let mut acc = self.constant as i128;
        for (&a, &x) in self.coefficients.iter().zip(point) {
            acc += a as i128 * x as i128;
        }
        // |value| must fit in 63 bits.
        if acc.unsigned_abs() > i64::MAX as u128 {
            return Err(Error::Overflow(format!("form value {acc} exceeds the 63-bit range")));
        }
        Ok(acc as i64)
    }

    /// Exact minimum and maximum of the form over the box `corner + [0, sides)`.
    pub(crate) fn value_range(&self, corner: &[i64], sides: &[u64]) -> (i128, i128) {
        let mut lo = self.constant as i128;
        let mut hi = lo;
        for ((&a, &x), &h) in self.coefficients.iter().zip(corner).zip(sides) {
            let first = a as i128 * x as i128;
            let last = a as i128 * (x as i128 + h as i128 - 1);
            lo += first.min(last);
            hi += first.max(last);
        }
        (lo, hi)
    }
}

/// Free-function form of [`LinearForm::homogeneous_part`].
pub fn homogeneous_part(form: &LinearForm) -> Vec<i64> {
    form.homogeneous_part().to_vec()
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        if self.constant != 0 {
            write!(f, "{}", self.constant)?;
            wrote = true;
        }
        for (k, &c) in self.coefficients.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else { "+" };
            if wrote {
                write!(f, " {sign} ")?;
            } else if c < 0 {
                write!(f, "-")?;
            }
            let mag = c.unsigned_abs();
            if mag == 1 {
                write!(f, "x{}", k + 1)?;
            } else {
                write!(f, "{mag}*x{}", k + 1)?;
            }
            wrote = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Finite(usize),
    Infinite,
}

impl Complexity {
    pub fn finite(self) -> Option<usize> {
        match self {
            Complexity::Finite(s) => Some(s),
            Complexity::Infinite => None,
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Complexity::Finite(s) => write!(f, "{s}"),
            Complexity::Infinite => write!(f, "infinite"),
        }
    }
}

/// An ordered list of `t >= 1` forms sharing a dimension `d >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct LinearSystem {
    forms: Vec<LinearForm>,
    dimension: usize,
}

impl LinearSystem {
    pub fn new(forms: Vec<LinearForm>) -> Result<Self> {
        let Some(first) = forms.first() else {
            return Err(Error::InvalidSystem("a system needs at least one form".into()));
        };
        let dimension = first.dimension();
        if let Some(bad) = forms.iter().position(|f| f.dimension() != dimension) {
            return Err(Error::InvalidSystem(format!(
                "form {} has dimension {}, expected {dimension}",
                bad + 1,
                forms[bad].dimension()
            )));
        }
        Ok(LinearSystem { forms, dimension })
    }

    /// Build from rows `[c1, ..., cd, c0]`.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let forms = rows
            .iter()
            .map(|row| {
                let (constant, coeffs) = row
                    .split_last()
                    .ok_or_else(|| Error::InvalidSystem("empty row".into()))?;
                LinearForm::new(coeffs.to_vec(), *constant)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(forms)
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.forms
            .iter()
            .map(|f| {
                let mut row = f.coefficients.clone();
                row.push(f.constant);
                row
            })
            .collect()
    }

    /// The k-term progression `(x1, x1 + x2, ..., x1 + (k-1) x2)`.
    pub fn arithmetic_progression(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSystem("progression length must be positive".into()));
        }
        let forms = (0..k as i64)
            .map(|j| LinearForm::new(vec![1, j], 0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(forms)
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn size(&self) -> usize {
        self.forms.len()
    }

    pub fn evaluate(&self, point: &[i64]) -> Result<Vec<i64>> {
        self.forms.iter().map(|f| f.evaluate(point)).collect()
    }

    /// True iff the homogeneous parts are pairwise linearly independent over Q.
    pub fn is_finite_complexity(&self) -> bool {
        let t = self.size();
        (0..t).all(|i| {
            ((i + 1)..t).all(|j| {
                !linalg::linearly_dependent(
                    self.forms[i].homogeneous_part(),
                    self.forms[j].homogeneous_part(),
                )
            })
        })
    }

    pub fn complexity(&self) -> Result<Complexity> {
        self.complexity_with_bound(DEFAULT_COMPLEXITY_BOUND)
    }

    /// Smallest `s` such that for every `i` the other homogeneous parts split
    /// into `s + 1` nonempty classes, none of whose affine spans contains
    /// the i-th. Exhaustive over set partitions of the `t - 1` others.
    pub fn complexity_with_bound(&self, bound: usize) -> Result<Complexity> {
        if !self.is_finite_complexity() {
            return Ok(Complexity::Infinite);
        }
        let t = self.size();
        if t == 1 {
            return Ok(Complexity::Finite(0));
        }
        if t - 1 > bound {
            return Err(Error::SystemTooLarge { others: t - 1, bound });
        }
        let mut worst = 0;
        for i in 0..t {
            let target = self.forms[i].homogeneous_part();
            let others: Vec<&[i64]> = (0..t)
                .filter(|&j| j != i)
                .map(|j| self.forms[j].homogeneous_part())
                .collect();
            let classes = min_separating_classes(target, &others)
                .ok_or(Error::InvalidSystem("no separating partition".into()))?;
            worst = worst.max(classes);
        }
        Ok(Complexity::Finite(worst - 1))
    }

    /// The system `y -> Psi(M y)`; `matrix` is d x d, row-major.
    pub fn change_variables(&self, matrix: &[Vec<i64>]) -> Result<Self> {
        let d = self.dimension;
        if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument(format!("change of variables must be {d}x{d}")));
        }
        let forms = self
            .forms
            .iter()
            .map(|f| {
                let coeffs = (0..d)
                    .map(|col| {
                        let v: i128 = (0..d)
                            .map(|k| f.coefficients[k] as i128 * matrix[k][col] as i128)
                            .sum();
                        i64::try_from(v).map_err(|_| Error::Overflow("transformed coefficient".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                LinearForm::new(coeffs, f.constant)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(forms)
    }

    /// The system `x -> Psi(x + shift)`.
    pub fn translate(&self, shift: &[i64]) -> Result<Self> {
        let forms = self
            .forms
            .iter()
            .map(|f| LinearForm::new(f.coefficients.clone(), f.evaluate(shift)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(forms)
    }

    /// Parse either the line-oriented text format or the JSON row format.
    pub fn parse(input: &str) -> Result<Self> {
        if input.trim_start().starts_with('[') {
            Self::parse_json(input)
        } else {
            Self::parse_text(input)
        }
    }

    pub fn parse_json(input: &str) -> Result<Self> {
        let rows: Vec<Vec<i64>> = serde_json::from_str(input).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if let Some(first) = rows.first() {
            if first.len() < 2 {
                return Err(Error::Parse {
                    line: 1,
                    message: "rows need at least one coefficient and a constant".into(),
                });
            }
        }
        Self::from_rows(&rows)
    }

    pub fn parse_text(input: &str) -> Result<Self> {
        let mut parsed = Vec::new();
        for (idx, raw) in input.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if compact.is_empty() {
                continue;
            }
            let terms = parse_line(&compact).map_err(|message| Error::Parse { line: idx + 1, message })?;
            parsed.push((idx + 1, terms));
        }
        let d = parsed
            .iter()
            .flat_map(|(_, (vars, _))| vars.iter().map(|(k, _)| *k))
            .max()
            .ok_or_else(|| Error::Parse { line: 0, message: "no forms with variables found".into() })?;
        let forms = parsed
            .into_iter()
            .map(|(line, (vars, constant))| {
                let mut coeffs = vec![0i64; d];
                for (k, c) in vars {
                    coeffs[k - 1] = coeffs[k - 1]
                        .checked_add(c)
                        .ok_or_else(|| Error::Parse { line, message: "coefficient overflow".into() })?;
                }
                LinearForm::new(coeffs, constant).map_err(|e| Error::Parse { line, message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(forms)
    }

    /// Text form that parses back to `self`. When no form uses the last
    /// variable, the first line gets a `0*x_d` term to keep the dimension.
    pub fn to_text(&self) -> String {
        let d = self.dimension;
        let last_unused = self.forms.iter().all(|f| f.coefficients[d - 1] == 0);
        self.forms
            .iter()
            .enumerate()
            .map(|(i, f)| if i == 0 && last_unused { format!("{f} + 0*x{d}\n") } else { format!("{f}\n") })
            .collect()
    }
}

impl TryFrom<Vec<Vec<i64>>> for LinearSystem {
    type Error = Error;

    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        LinearSystem::from_rows(&rows)
    }
}

impl From<LinearSystem> for Vec<Vec<i64>> {
    fn from(system: LinearSystem) -> Self {
        system.to_rows()
    }
}

type ParsedLine = (Vec<(usize, i64)>, i64);

fn parse_line(s: &str) -> std::result::Result<ParsedLine, String> {
    let mut vars = Vec::new();
    let mut constant: i64 = 0;
    let bytes = s.as_bytes();
    let mut start = 0;
    let mut i = 1;
    let mut pieces = Vec::new();
    while i <= bytes.len() {
        if i == bytes.len() || bytes[i] == b'+' || bytes[i] == b'-' {
            // A sign right after '*' or another sign belongs to the next term.
            if i < bytes.len() && matches!(bytes[i - 1], b'*' | b'+' | b'-') {
                i += 1;
                continue;
            }
            pieces.push(&s[start..i]);
            start = i;
        }
        i += 1;
    }
    for piece in pieces {
        let (negative, body) = match piece.as_bytes()[0] {
            b'-' => (true, &piece[1..]),
            b'+' => (false, &piece[1..]),
            _ => (false, piece),
        };
        if body.is_empty() {
            return Err(format!("dangling sign in '{piece}'"));
        }
        let apply_sign = |v: i64| if negative { v.checked_neg() } else { Some(v) };
        if let Some(pos) = body.find('x') {
            let (coef_part, var_part) = body.split_at(pos);
            let coef_part = coef_part.strip_suffix('*').unwrap_or(coef_part);
            let coef: i64 = if coef_part.is_empty() {
                1
            } else {
                coef_part.parse().map_err(|_| format!("bad coefficient '{coef_part}'"))?
            };
            let index: usize = var_part[1..]
                .parse()
                .map_err(|_| format!("bad variable '{var_part}', expected x1, x2, ..."))?;
            if index == 0 {
                return Err("variables are numbered from x1".into());
            }
            let coef = apply_sign(coef).ok_or("coefficient overflow")?;
            vars.push((index, coef));
        } else {
            let v: i64 = body.parse().map_err(|_| format!("bad term '{piece}'"))?;
            let v = apply_sign(v).ok_or("constant overflow")?;
            constant = constant.checked_add(v).ok_or("constant overflow")?;
        }
    }
    Ok((vars, constant))
}

/// Minimum number of nonempty classes in a partition of `others` such that
/// `target` lies in no class's affine span; `None` if no partition works.
fn min_separating_classes(target: &[i64], others: &[&[i64]]) -> Option<usize> {
    let n = others.len();
    let subsets = 1usize << n;
    // separates[mask]: target is outside the affine span of the class `mask`.
    let separates: Vec<bool> = (0..subsets)
        .map(|mask| {
            let class: Vec<&[i64]> = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| others[k]).collect();
            !linalg::in_affine_span(target, &class)
        })
        .collect();

    let mut best: Option<usize> = None;
    let mut blocks: Vec<usize> = Vec::with_capacity(n);
    search_partitions(0, n, &separates, &mut blocks, &mut best);
    best
}

// Restricted-growth enumeration: element k joins an existing block or opens
// the next one. Spans only grow, so a failing block prunes its subtree.
fn search_partitions(
    k: usize,
    n: usize,
    separates: &[bool],
    blocks: &mut Vec<usize>,
    best: &mut Option<usize>,
) {
    if let Some(b) = *best {
        if blocks.len() >= b {
            return;
        }
    }
    if k == n {
        *best = Some(blocks.len());
        return;
    }
    for b in 0..blocks.len() {
        let grown = blocks[b] | 1 << k;
        if separates[grown] {
            let saved = blocks[b];
            blocks[b] = grown;
            search_partitions(k + 1, n, separates, blocks, best);
            blocks[b] = saved;
        }
    }
    if separates[1 << k] {
        blocks.push(1 << k);
        search_partitions(k + 1, n, separates, blocks, best);
        blocks.pop();
    }
}
