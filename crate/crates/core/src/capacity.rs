//! Closed-form capacities of the lossy bosonic channel `c = sqrt(eta) a + sqrt(1-eta) b`
//! with signal photon budget `nbar` and thermal noise of mean photon number `noise_n`.
//! All values are in nats per channel use.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::g;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta: f64,
    pub nbar: f64,
    pub noise_n: f64,
}

impl ChannelParams {
    pub fn new(eta: f64, nbar: f64, noise_n: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::invalid(format!("transmissivity must lie in (0, 1), got {eta}")));
        }
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::invalid(format!("photon budget must be finite and >= 0, got {nbar}")));
        }
        if !(noise_n >= 0.0 && noise_n.is_finite()) {
            return Err(Error::invalid(format!("noise photon number must be finite and >= 0, got {noise_n}")));
        }
        Ok(Self { eta, nbar, noise_n })
    }
}

/// `ln(1 + eta nbar / ((1-eta) N))`; diverges without noise.
pub fn shannon_capacity(p: &ChannelParams) -> Result<f64> {
    if p.noise_n == 0.0 {
        return Err(Error::Divergent(
            "the additive-noise capacity is unbounded at zero noise; the quantum capacities stay finite".into(),
        ));
    }
    Ok((p.eta * p.nbar / ((1.0 - p.eta) * p.noise_n)).ln_1p())
}

/// `1/2 ln(1 + 4 eta nbar / (2 (1-eta) N + 1))`.
pub fn homodyne_capacity(p: &ChannelParams) -> f64 {
    0.5 * (4.0 * p.eta * p.nbar / (2.0 * (1.0 - p.eta) * p.noise_n + 1.0)).ln_1p()
}

/// `ln(1 + 2 eta nbar / ((1-eta) N + 1))`.
pub fn heterodyne_capacity(p: &ChannelParams) -> f64 {
    (2.0 * p.eta * p.nbar / ((1.0 - p.eta) * p.noise_n + 1.0)).ln_1p()
}

/// `g(eta nbar)`, defined for the noiseless channel only.
pub fn pure_loss_capacity(p: &ChannelParams) -> Result<f64> {
    if p.noise_n != 0.0 {
        return Err(Error::invalid(format!(
            "pure-loss capacity needs noise_n = 0, got {}",
            p.noise_n
        )));
    }
    g(p.eta * p.nbar)
}

/// `g(eta nbar + (1-eta) N) - g((1-eta) N)`.
pub fn thermal_lower_bound(p: &ChannelParams) -> f64 {
    let noise = (1.0 - p.eta) * p.noise_n;
    g(p.eta * p.nbar + noise).expect("non-negative argument") - g(noise).expect("non-negative argument")
}

/// A capacity entry that may be divergent or undefined at a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityValue {
    Finite(f64),
    Infinite,
    Undefined,
}

impl CapacityValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            CapacityValue::Finite(x) => Some(*x),
            _ => None,
        }
    }
}

impl fmt::Display for CapacityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacityValue::Finite(x) => write!(f, "{x}"),
            CapacityValue::Infinite => f.write_str("inf"),
            CapacityValue::Undefined => f.write_str("na"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub params: ChannelParams,
    pub c_classical: CapacityValue,
    pub c_homodyne: f64,
    pub c_heterodyne: f64,
    /// Only defined when `noise_n == 0`.
    pub c_pure_loss: CapacityValue,
    pub c_thermal_lb: f64,
}

pub fn evaluate(p: ChannelParams) -> CapacityPoint {
    CapacityPoint {
        params: p,
        c_classical: match shannon_capacity(&p) {
            Ok(x) => CapacityValue::Finite(x),
            Err(_) => CapacityValue::Infinite,
        },
        c_homodyne: homodyne_capacity(&p),
        c_heterodyne: heterodyne_capacity(&p),
        c_pure_loss: match pure_loss_capacity(&p) {
            Ok(x) => CapacityValue::Finite(x),
            Err(_) => CapacityValue::Undefined,
        },
        c_thermal_lb: thermal_lower_bound(&p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub eta: Vec<f64>,
    pub nbar: Vec<f64>,
    pub noise_n: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            eta: (1..=9).map(|k| k as f64 / 10.0).collect(),
            nbar: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            noise_n: vec![0.0, 0.5, 1.0, 5.0],
        }
    }
}

/// Evaluates every grid point, ordered by noise, then eta, then nbar.
pub fn capacity_sweep(grid: &SweepGrid) -> Result<Vec<CapacityPoint>> {
    let mut params = Vec::with_capacity(grid.eta.len() * grid.nbar.len() * grid.noise_n.len());
    for &noise in &grid.noise_n {
        for &eta in &grid.eta {
            for &nbar in &grid.nbar {
                params.push(ChannelParams::new(eta, nbar, noise)?);
            }
        }
    }
    Ok(params.into_par_iter().map(evaluate).collect())
}

pub const TABLE_HEADER: [&str; 8] = [
    "eta",
    "nbar",
    "noise_n",
    "c_classical",
    "c_homodyne",
    "c_heterodyne",
    "c_pure_loss",
    "c_thermal_lb",
];

/// Comma-separated table with one header row; `inf` marks divergence and `na` an undefined entry.
pub fn write_table<W: Write>(points: &[CapacityPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", TABLE_HEADER.join(","))?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.params.eta,
            p.params.nbar,
            p.params.noise_n,
            p.c_classical,
            p.c_homodyne,
            p.c_heterodyne,
            p.c_pure_loss,
            p.c_thermal_lb
        )?;
    }
    Ok(())
}

/// A grid point where a stated capacity ordering fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceFailure {
    pub params: ChannelParams,
    pub claim: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks the orderings between the quantum capacities and the detection-limited rates:
/// at zero noise the pure-loss capacity beats homodyne and heterodyne, and with noise the
/// thermal lower bound beats both. Points with `nbar = 0` are skipped (all rates vanish).
pub fn dominance_failures(points: &[CapacityPoint]) -> Vec<DominanceFailure> {
    let mut out = Vec::new();
    let mut check = |p: &CapacityPoint, claim: &str, lhs: f64, rhs: f64| {
        if lhs <= rhs {
            out.push(DominanceFailure {
                params: p.params,
                claim: claim.to_string(),
                lhs,
                rhs,
            });
        }
    };
    for p in points.iter().filter(|p| p.params.nbar > 0.0) {
        if let Some(pl) = p.c_pure_loss.finite() {
            check(p, "pure_loss > homodyne", pl, p.c_homodyne);
            check(p, "pure_loss > heterodyne", pl, p.c_heterodyne);
        } else {
            check(p, "thermal_lb > homodyne", p.c_thermal_lb, p.c_homodyne);
            check(p, "thermal_lb > heterodyne", p.c_thermal_lb, p.c_heterodyne);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(eta: f64, nbar: f64, noise: f64) -> ChannelParams {
        ChannelParams::new(eta, nbar, noise).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ChannelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(0.5, -1.0, 1.0).is_err());
        assert!(ChannelParams::new(0.5, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((shannon_capacity(&p(0.5, 1.0, 1.0)).unwrap() - ln2).abs() < 1e-15);
        assert_eq!(shannon_capacity(&p(0.5, 0.0, 1.0)).unwrap(), 0.0);
        assert!(matches!(shannon_capacity(&p(0.3, 1.0, 0.0)), Err(Error::Divergent(_))));

        assert_eq!(homodyne_capacity(&p(0.5, 0.0, 1.0)), 0.0);
        assert!((homodyne_capacity(&p(0.5, 1.0, 0.0)) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((homodyne_capacity(&p(0.5, 1.0, 1.0)) - 0.5 * ln2).abs() < 1e-15);

        assert_eq!(heterodyne_capacity(&p(0.5, 0.0, 1.0)), 0.0);
        assert!((heterodyne_capacity(&p(0.5, 1.0, 0.0)) - ln2).abs() < 1e-15);
        assert!((heterodyne_capacity(&p(0.5, 4.0, 0.0)) - 5f64.ln()).abs() < 1e-15);

        assert_eq!(pure_loss_capacity(&p(0.5, 0.0, 0.0)).unwrap(), 0.0);
        assert!((pure_loss_capacity(&p(0.5, 2.0, 0.0)).unwrap() - 2.0 * ln2).abs() < 1e-14);
        assert!(pure_loss_capacity(&p(0.5, 2.0, 0.1)).is_err());
        let pl = pure_loss_capacity(&p(0.5, 1.0, 0.0)).unwrap();
        assert!((pl - 0.954_771_252_442_219_2).abs() < 1e-12);
        assert!(pl > heterodyne_capacity(&p(0.5, 1.0, 0.0)));

        assert_eq!(thermal_lower_bound(&p(0.5, 0.0, 3.0)), 0.0);
        assert!((thermal_lower_bound(&p(0.5, 1.0, 1.0)) - 0.431_523_108_677_671_4).abs() < 1e-13);
    }

    #[test]
    fn divergent_point_is_a_sentinel() {
        let pts = capacity_sweep(&SweepGrid {
            eta: vec![0.5],
            nbar: vec![1.0],
            noise_n: vec![0.0],
        })
        .unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].c_classical, CapacityValue::Infinite);
        let mut buf = Vec::new();
        write_table(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[3], "inf");
        assert_eq!(row[6].parse::<f64>().unwrap(), pure_loss_capacity(&pts[0].params).unwrap());
    }

    #[test]
    fn zero_noise_reduction_is_exact() {
        for pt in capacity_sweep(&SweepGrid::default()).unwrap() {
            if pt.params.noise_n == 0.0 {
                assert_eq!(CapacityValue::Finite(pt.c_thermal_lb), pt.c_pure_loss);
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_and_nonnegative(eta in 0.01..0.98f64, nbar in 0.0..20.0f64, noise in 0.0..10.0f64,
                                    de in 0.0..0.01f64, dn in 0.0..1.0f64) {
            let a = evaluate(p(eta, nbar, noise));
            let b = evaluate(p(eta + de, nbar, noise));
            let c = evaluate(p(eta, nbar + dn, noise));
            for x in [&a, &b, &c] {
                prop_assert!(x.c_homodyne >= 0.0 && x.c_heterodyne >= 0.0 && x.c_thermal_lb >= 0.0);
            }
            prop_assert!(b.c_homodyne >= a.c_homodyne && c.c_homodyne >= a.c_homodyne);
            prop_assert!(b.c_heterodyne >= a.c_heterodyne && c.c_heterodyne >= a.c_heterodyne);
            prop_assert!(b.c_thermal_lb >= a.c_thermal_lb - 1e-14 && c.c_thermal_lb >= a.c_thermal_lb - 1e-14);
            if let (Some(x), Some(y)) = (a.c_classical.finite(), b.c_classical.finite()) {
                prop_assert!(y >= x);
            }
        }
    }
}
