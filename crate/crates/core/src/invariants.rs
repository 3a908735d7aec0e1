//! Exact Toledo invariants, degree windows and the H4 degree bookkeeping.

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

fn ser_ratio<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToledoRecord {
    pub g: i64,
    pub d: i64,
    /// `2 - 2g + 2d/3`
    #[serde(serialize_with = "ser_ratio")]
    pub tol: Rational,
    /// `3g - 3 - d`
    pub deg_l: i64,
    /// `Tol` is an integer, i.e. `3 | d`.
    pub liftable: bool,
    /// Non-maximal and stable: `Tol < (4 - 4g)/3` and `0 < deg L < 3g - 3`.
    pub in_af_window: bool,
    pub stable: bool,
    pub milnor_wood: bool,
}

impl ToledoRecord {
    pub fn tol_f64(&self) -> f64 {
        *self.tol.numer() as f64 / *self.tol.denom() as f64
    }
}

pub fn toledo(g: i64, d: i64) -> Result<ToledoRecord> {
    if g < 2 || d < 0 {
        return Err(Error::Precondition(format!("toledo needs g >= 2 and d >= 0, got ({g}, {d})")));
    }
    let tol = Rational::from_integer(2 - 2 * g) + Rational::new(2 * d, 3);
    let deg_l = 3 * g - 3 - d;
    // Tol = -(2/3) deg L
    debug_assert_eq!(tol, Rational::new(-2, 3) * Rational::from_integer(deg_l));
    let nonmaximal = tol < Rational::new(4 - 4 * g, 3);
    let stable = 0 < deg_l && deg_l < 3 * g - 3;
    let bound = Rational::from_integer(2 * g - 2);
    Ok(ToledoRecord {
        g,
        d,
        tol,
        deg_l,
        liftable: tol.is_integer(),
        in_af_window: nonmaximal && stable,
        stable,
        milnor_wood: -bound <= tol && tol <= bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowRow {
    pub g: i64,
    pub degrees: Vec<i64>,
    #[serde(serialize_with = "ser_ratios")]
    pub toledo: Vec<Rational>,
}

fn ser_ratios<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| format!("{}/{}", r.numer(), r.denom())))
}

/// For each genus, the degrees `d` whose record lies in the almost-Fuchsian window.
pub fn af_window_table(genera: impl IntoIterator<Item = i64>) -> Result<Vec<WindowRow>> {
    genera
        .into_iter()
        .map(|g| {
            let recs = (0..=6 * g - 6).map(|d| toledo(g, d)).collect::<Result<Vec<_>>>()?;
            let inside: Vec<_> = recs.into_iter().filter(|r| r.in_af_window).collect();
            Ok(WindowRow { g, degrees: inside.iter().map(|r| r.d).collect(), toledo: inside.iter().map(|r| r.tol).collect() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct H4DegreeRecord {
    pub g: i64,
    pub d: i64,
    /// `d / (2g - 2)`
    #[serde(serialize_with = "ser_ratio")]
    pub c: Rational,
    /// `4g - 4 - d`
    pub section_degree: i64,
    #[serde(serialize_with = "ser_ratio")]
    pub r: Rational,
}

pub fn h4_degree_report(g: i64, d: i64) -> Result<H4DegreeRecord> {
    if g < 2 || d < 1 {
        return Err(Error::Precondition(format!("H4 degree report needs g >= 2 and d >= 1, got ({g}, {d})")));
    }
    let c = Rational::new(d, 2 * g - 2);
    let r = Rational::new(d, 2 * g - 2);
    debug_assert_eq!(c * Rational::from_integer(2 * g - 2), Rational::from_integer(d));
    Ok(H4DegreeRecord { g, d, c, section_degree: 4 * g - 4 - d, r })
}
