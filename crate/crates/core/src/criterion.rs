//! Genus-threshold scans of the fixed-point hypothesis on closed hyperbolic surfaces of
//! volume `2 pi (2g - 2)`, with `eta` following a schedule in `g`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest genus an automatic scan goes to.
pub const AUTO_G_MAX: u64 = 1_000_000;
/// Targets that define the automatic `g_max`: `lhs / A >= 0.99` and `rhs <= 1e-2`.
pub const ASYMPTOTIC_LHS: f64 = 0.99;
pub const ASYMPTOTIC_RHS: f64 = 1e-2;
/// Scans longer than this keep a log-spaced subset of their per-genus records.
pub const FULL_RECORD_LIMIT: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Pu21,
    H4,
}

/// `lhs = A exp(-k C eta sqrt(Vol) / (b + eta))`, `rhs = (s + eta)^3 R / (q eta)`, `R = d / (m (g - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanShape {
    pub exp_coefficient: f64,
    pub exp_shift: f64,
    pub rhs_shift: f64,
    pub rhs_denominator: f64,
    pub r_divisor: f64,
    pub eta_cap: f64,
}

impl Target {
    pub fn shape(self) -> ScanShape {
        match self {
            // 12 / (2 (2 + eta)) = 6 / (2 + eta); R = d / (6g - 6)
            Target::Pu21 => ScanShape {
                exp_coefficient: 6.0,
                exp_shift: 2.0,
                rhs_shift: 2.0,
                rhs_denominator: 2.0,
                r_divisor: 6.0,
                eta_cap: 0.99,
            },
            // R = d / (2g - 2)
            Target::H4 => ScanShape {
                exp_coefficient: 4.0,
                exp_shift: 4.0,
                rhs_shift: 8.0,
                rhs_denominator: 16.0,
                r_divisor: 2.0,
                eta_cap: 0.49,
            },
        }
    }
}

impl ScanShape {
    pub fn lhs(&self, a: f64, c: f64, eta: f64, volume: f64) -> f64 {
        a * (-self.exp_coefficient * c * eta * volume.sqrt() / (self.exp_shift + eta)).exp()
    }

    pub fn rhs(&self, eta: f64, r: f64) -> f64 {
        (self.rhs_shift + eta).powi(3) * r / (self.rhs_denominator * eta)
    }

    pub fn r_of(&self, g: u64, d: u64) -> f64 {
        d as f64 / (self.r_divisor * (g as f64 - 1.0))
    }
}

/// Named `eta_g` schedules. `"default"` is `g^(-3/4)`; `"power:p"` is `g^(-p)` for `p` in `(1/2, 1)`.
pub fn eta_schedule(name: &str, g: u64, cap: f64) -> Result<f64> {
    if g < 2 {
        return Err(Error::Precondition(format!("eta schedule needs g >= 2, got {g}")));
    }
    let p = match name {
        "default" | "g^-3/4" => 0.75,
        other => match other.strip_prefix("power:").and_then(|s| s.parse::<f64>().ok()) {
            Some(p) if p > 0.5 && p < 1.0 => p,
            _ => return Err(Error::Precondition(format!("unknown eta schedule {name:?}"))),
        },
    };
    Ok(cap.min((g as f64).powf(-p)))
}

pub fn surface_volume(g: u64) -> f64 {
    2.0 * PI * (2.0 * g as f64 - 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanParams {
    pub target: Target,
    pub a: f64,
    pub c: f64,
    pub d: u64,
    pub schedule: String,
    pub eta_cap: Option<f64>,
    pub g_min: u64,
    /// `None` picks the least genus meeting the asymptotic targets, capped at `AUTO_G_MAX`.
    pub g_max: Option<u64>,
}

impl ScanParams {
    pub fn new(target: Target, a: f64, c: f64, d: u64) -> Self {
        ScanParams { target, a, c, d, schedule: "default".into(), eta_cap: None, g_min: 2, g_max: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GenusRecord {
    pub g: u64,
    pub volume: f64,
    pub r: f64,
    pub eta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionScan {
    pub params: ScanParams,
    pub shape: ScanShape,
    pub g_max: u64,
    pub g_max_automatic: bool,
    /// Both asymptotic targets met at `g_max`.
    pub asymptotic_targets_met: bool,
    /// Least `g` with every tested `g' in [g, g_max]` passing.
    pub g0: Option<u64>,
    pub lhs_ratio_at_g_max: f64,
    pub rhs_at_g_max: f64,
    pub tested: u64,
    pub records_complete: bool,
    pub records: Vec<GenusRecord>,
}

fn record(shape: &ScanShape, p: &ScanParams, cap: f64, g: u64) -> Result<GenusRecord> {
    let eta = eta_schedule(&p.schedule, g, cap)?;
    let volume = surface_volume(g);
    let r = shape.r_of(g, p.d);
    let lhs = shape.lhs(p.a, p.c, eta, volume);
    let rhs = shape.rhs(eta, r);
    Ok(GenusRecord { g, volume, r, eta, lhs, rhs, pass: lhs >= rhs })
}

fn meets_targets(rec: &GenusRecord, a: f64) -> bool {
    rec.lhs / a >= ASYMPTOTIC_LHS && rec.rhs <= ASYMPTOTIC_RHS
}

pub fn criterion_scan(p: &ScanParams) -> Result<CriterionScan> {
    if !(p.a > 0.0 && p.c > 0.0 && p.d >= 1) {
        return Err(Error::Precondition("criterion scan needs A, C > 0 and d >= 1".into()));
    }
    let shape = p.target.shape();
    let cap = p.eta_cap.unwrap_or(shape.eta_cap);
    let g_min = p.g_min.max(2);
    let g_max = match p.g_max {
        Some(g) => g,
        None => {
            // both targets are monotone in g on the admissible schedules
            let mut hi = g_min;
            while hi < AUTO_G_MAX && !meets_targets(&record(&shape, p, cap, hi)?, p.a) {
                hi = (hi * 2).min(AUTO_G_MAX);
            }
            if meets_targets(&record(&shape, p, cap, hi)?, p.a) {
                let mut lo = (hi / 2).max(g_min);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if meets_targets(&record(&shape, p, cap, mid)?, p.a) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
            }
            hi
        }
    };
    if g_max < g_min {
        return Err(Error::Precondition(format!("empty genus range [{g_min}, {g_max}]")));
    }
    let all: Vec<GenusRecord> = (g_min..=g_max).into_par_iter().map(|g| record(&shape, p, cap, g)).collect::<Result<_>>()?;
    let g0 = match all.iter().rposition(|r| !r.pass) {
        None => Some(g_min),
        Some(i) if i + 1 < all.len() => Some(all[i + 1].g),
        Some(_) => None,
    };
    let last = *all.last().expect("nonempty range");
    let tested = all.len() as u64;
    let records_complete = tested <= FULL_RECORD_LIMIT;
    let records = if records_complete {
        all
    } else {
        let mut keep: Vec<u64> = Vec::new();
        let mut g = g_min as f64;
        while (g as u64) <= g_max {
            keep.push(g as u64);
            g = (g * 1.02).max(g + 1.0);
        }
        keep.extend([g_max]);
        if let Some(g0) = g0 {
            keep.extend([g0.saturating_sub(1).max(g_min), g0]);
        }
        keep.sort_unstable();
        keep.dedup();
        keep.into_iter().map(|g| all[(g - g_min) as usize]).collect()
    };
    Ok(CriterionScan {
        params: p.clone(),
        shape,
        g_max,
        g_max_automatic: p.g_max.is_none(),
        asymptotic_targets_met: meets_targets(&last, p.a),
        g0,
        lhs_ratio_at_g_max: last.lhs / p.a,
        rhs_at_g_max: last.rhs,
        tested,
        records_complete,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule() {
        assert_eq!(eta_schedule("default", 16, 1.0).unwrap(), 0.125);
        assert_eq!(eta_schedule("default", 2, 0.1).unwrap(), 0.1);
        assert!(eta_schedule("linear", 16, 1.0).is_err());
        assert!(eta_schedule("power:0.4", 16, 1.0).is_err());
        let mut prev = (0.0, f64::INFINITY);
        for g in 2..2000u64 {
            let e = eta_schedule("default", g, 1.0).unwrap();
            let (a, b) = (g as f64 * e, (g as f64).sqrt() * e);
            assert!(a > prev.0 && b < prev.1);
            prev = (a, b);
        }
    }

    #[test]
    fn shapes_match_displays() {
        let (a, c, eta, g, d) = (0.7, 0.3, 0.2, 11u64, 2u64);
        let vol = surface_volume(g);
        let pu = Target::Pu21.shape();
        let r = d as f64 / (6.0 * g as f64 - 6.0);
        assert!((pu.lhs(a, c, eta, vol) - a * (-12.0 * c * eta * vol.sqrt() / (2.0 * (2.0 + eta))).exp()).abs() < 1e-15);
        assert!((pu.rhs(eta, pu.r_of(g, d)) - (2.0 + eta).powi(3) * r / (2.0 * eta)).abs() < 1e-15);
        let h = Target::H4.shape();
        let r = d as f64 / (2.0 * g as f64 - 2.0);
        assert!((h.lhs(a, c, eta, vol) - a * (-4.0 * c * eta * vol.sqrt() / (4.0 + eta)).exp()).abs() < 1e-15);
        assert!((h.rhs(eta, h.r_of(g, d)) - (8.0 + eta).powi(3) / (16.0 * eta) * r).abs() < 1e-14);
    }

    #[test]
    fn g0_monotone_in_d_and_a() {
        let mut prev = 0;
        for d in 1..=5 {
            let mut p = ScanParams::new(Target::Pu21, 1.0, 1.0, d);
            p.g_max = Some(50_000);
            let s = criterion_scan(&p).unwrap();
            let g0 = s.g0.unwrap();
            assert!(g0 >= prev);
            prev = g0;
            p.a = 2.0;
            assert!(criterion_scan(&p).unwrap().g0.unwrap() <= g0);
        }
    }

    #[test]
    fn empty_range_refused() {
        let mut p = ScanParams::new(Target::H4, 1.0, 1.0, 1);
        p.g_min = 10;
        p.g_max = Some(5);
        assert!(criterion_scan(&p).is_err());
    }
}
