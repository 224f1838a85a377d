//! Two-segment leg expansion model.
//!
//! Each leg is an Aluminium segment of fixed length `l_al` in series with a
//! Steel segment whose length is whatever remains of the joint-to-joint
//! distance: `length_st(q) = q - l_al`. Both segments share one temperature
//! rise per leg, so a leg of length `q` grows by
//! `(alpha_al * l_al + alpha_st * length_st(q)) * dT`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::LegLengths;

/// Handbook linear expansion coefficient of aluminium alloys (1/K).
pub const ALPHA_ALUMINIUM: f64 = 23e-6;
/// Handbook linear expansion coefficient of steel (1/K).
pub const ALPHA_STEEL: f64 = 12e-6;
/// Deflections at or above this magnitude (mm) are rejected as data errors.
pub const DEFLECTION_SANITY_BOUND: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("leg {leg} deflection {value} mm exceeds the {DEFLECTION_SANITY_BOUND} mm sanity bound")]
    SanityBound { leg: usize, value: f64 },
    #[error("leg {leg}: steel segment length {length} mm is not positive")]
    NonPositiveSegment { leg: usize, length: f64 },
    #[error("invalid thermal parameter: {0}")]
    InvalidParameter(String),
}

/// Material data and aluminium segment length of each leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegThermalModel {
    alpha_al: [f64; 6],
    alpha_st: [f64; 6],
    l_al: [f64; 6],
}

impl LegThermalModel {
    pub fn new(alpha_al: [f64; 6], alpha_st: [f64; 6], l_al: [f64; 6]) -> Result<Self, ThermalError> {
        for leg in 0..6 {
            let ok = |v: f64| v.is_finite() && v > 0.0;
            if !ok(alpha_al[leg]) || !ok(alpha_st[leg]) || !ok(l_al[leg]) {
                return Err(ThermalError::InvalidParameter(format!(
                    "leg {}: alpha_al = {}, alpha_st = {}, l_al = {} must all be positive",
                    leg + 1,
                    alpha_al[leg],
                    alpha_st[leg],
                    l_al[leg]
                )));
            }
        }
        Ok(Self { alpha_al, alpha_st, l_al })
    }

    /// Identical legs.
    pub fn uniform(alpha_al: f64, alpha_st: f64, l_al: f64) -> Result<Self, ThermalError> {
        Self::new([alpha_al; 6], [alpha_st; 6], [l_al; 6])
    }

    /// Handbook coefficients with a 200 mm aluminium segment.
    pub fn default_synthetic() -> Self {
        Self::uniform(ALPHA_ALUMINIUM, ALPHA_STEEL, 200.0).expect("valid defaults")
    }

    pub fn alpha_al(&self) -> &[f64; 6] {
        &self.alpha_al
    }

    pub fn alpha_st(&self) -> &[f64; 6] {
        &self.alpha_st
    }

    pub fn l_al(&self) -> &[f64; 6] {
        &self.l_al
    }

    pub fn length_st(&self, leg: usize, q: f64) -> f64 {
        q - self.l_al[leg]
    }

    fn checked_length_st(&self, leg: usize, q: f64) -> Result<f64, ThermalError> {
        let length = self.length_st(leg, q);
        if length > 0.0 {
            Ok(length)
        } else {
            Err(ThermalError::NonPositiveSegment { leg, length })
        }
    }

    /// Aluminium growth per kelvin (mm/K).
    fn al_per_kelvin(&self, leg: usize) -> f64 {
        self.alpha_al[leg] * self.l_al[leg]
    }

    /// Total growth per kelvin (mm/K) of leg `leg` at length `q`.
    pub fn growth_per_kelvin(&self, leg: usize, q: f64) -> Result<f64, ThermalError> {
        let l_st = self.checked_length_st(leg, q)?;
        Ok(self.al_per_kelvin(leg) + self.alpha_st[leg] * l_st)
    }
}

/// Signed leg-length changes (mm); positive means the leg grew.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegDeflections(pub [f64; 6]);

impl LegDeflections {
    pub fn new(dq: [f64; 6]) -> Result<Self, ThermalError> {
        for (leg, &value) in dq.iter().enumerate() {
            if !value.is_finite() || value.abs() >= DEFLECTION_SANITY_BOUND {
                return Err(ThermalError::SanityBound { leg, value });
            }
        }
        Ok(Self(dq))
    }

    pub fn zero() -> Self {
        Self([0.0; 6])
    }

    pub fn as_array(&self) -> &[f64; 6] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

/// `q_r_t2 - q_r_t1`: growth of each leg between the two reference
/// measurements.
pub fn reference_deflection(q_r_t1: &LegLengths, q_r_t2: &LegLengths) -> Result<LegDeflections, ThermalError> {
    LegDeflections::new(*q_r_t2 - *q_r_t1)
}

/// Rescales a deflection measured at leg lengths `q_ref` to leg lengths
/// `q_meas`.
///
/// The reference deflection is split into its aluminium and steel shares in
/// proportion to their growth per kelvin; the aluminium share carries over
/// unchanged and the steel share scales with the steel segment length.
pub fn scale_deflection(
    model: &LegThermalModel,
    dq_ref: &LegDeflections,
    q_ref: &LegLengths,
    q_meas: &LegLengths,
) -> Result<LegDeflections, ThermalError> {
    let mut out = [0.0; 6];
    for leg in 0..6 {
        let l_st_ref = model.checked_length_st(leg, q_ref[leg])?;
        let l_st_meas = model.checked_length_st(leg, q_meas[leg])?;
        let al = model.al_per_kelvin(leg);
        let dq_al = dq_ref.0[leg] * al / (al + model.alpha_st[leg] * l_st_ref);
        let dq_st = dq_ref.0[leg] - dq_al;
        // written as a correction so equal lengths return dq_ref unchanged
        out[leg] = dq_ref.0[leg] + dq_st * ((l_st_meas - l_st_ref) / l_st_ref);
    }
    LegDeflections::new(out)
}

/// Same result as [`scale_deflection`] via the ratio of growth rates:
/// `dq_ref * growth(q_meas) / growth(q_ref)`.
pub fn scale_deflection_by_growth_ratio(
    model: &LegThermalModel,
    dq_ref: &LegDeflections,
    q_ref: &LegLengths,
    q_meas: &LegLengths,
) -> Result<LegDeflections, ThermalError> {
    let mut out = [0.0; 6];
    for leg in 0..6 {
        let g_ref = model.growth_per_kelvin(leg, q_ref[leg])?;
        let g_meas = model.growth_per_kelvin(leg, q_meas[leg])?;
        out[leg] = dq_ref.0[leg] * g_meas / g_ref;
    }
    LegDeflections::new(out)
}

/// Temperature rise (K) per leg that explains `dq_ref` at lengths `q_ref`.
pub fn implied_leg_temperature_rise(
    model: &LegThermalModel,
    dq_ref: &LegDeflections,
    q_ref: &LegLengths,
) -> Result<[f64; 6], ThermalError> {
    let mut dt = [0.0; 6];
    for leg in 0..6 {
        dt[leg] = dq_ref.0[leg] / model.growth_per_kelvin(leg, q_ref[leg])?;
    }
    Ok(dt)
}

/// Growth of legs with cold lengths `q` under temperature rises `dt` (K).
pub fn thermal_expansion(model: &LegThermalModel, q: &LegLengths, dt: &[f64; 6]) -> Result<[f64; 6], ThermalError> {
    let mut out = [0.0; 6];
    for leg in 0..6 {
        out[leg] = model.growth_per_kelvin(leg, q[leg])? * dt[leg];
    }
    Ok(out)
}

/// Deflection at a pose whose legs were measured *hot* (`q_meas_hot`).
///
/// Steel growth is proportional to the cold steel length, which is itself
/// `q_meas_hot - deflection`; the fixed point is found by re-applying
/// [`scale_deflection`] until it stops changing (contraction factor
/// `alpha_st * dT`, a few iterations).
pub fn scale_deflection_to_hot_lengths(
    model: &LegThermalModel,
    dq_ref: &LegDeflections,
    q_ref: &LegLengths,
    q_meas_hot: &LegLengths,
) -> Result<LegDeflections, ThermalError> {
    let mut dq = scale_deflection(model, dq_ref, q_ref, q_meas_hot)?;
    for _ in 0..50 {
        let cold: [f64; 6] = std::array::from_fn(|i| q_meas_hot[i] - dq.0[i]);
        let next = scale_deflection(model, dq_ref, q_ref, &LegLengths(cold))?;
        let change = next
            .0
            .iter()
            .zip(dq.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        dq = next;
        if change == 0.0 || change <= 1e-17 {
            break;
        }
    }
    Ok(dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(v: f64) -> LegLengths {
        LegLengths([v; 6])
    }

    #[test]
    fn identical_reference_arrays_give_zero() {
        let d = reference_deflection(&q(460.0), &q(460.0)).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn constructed_uniform_deflection() {
        let t1 = LegLengths([460.0, 461.0, 462.0, 463.0, 464.0, 465.0]);
        let t2 = LegLengths(std::array::from_fn(|i| t1[i] + 8.2e-3));
        let d = reference_deflection(&t1, &t2).unwrap();
        for v in d.0 {
            assert_relative_eq!(v, 8.2e-3, max_relative = 1e-9);
        }
    }

    #[test]
    fn sanity_bound_rejects_large_deflection() {
        let err = reference_deflection(&q(460.0), &LegLengths([460.0, 460.0, 461.5, 460.0, 460.0, 460.0])).unwrap_err();
        assert_eq!(err, ThermalError::SanityBound { leg: 2, value: 1.5 });
    }

    #[test]
    fn same_lengths_scale_to_identity() {
        let m = LegThermalModel::default_synthetic();
        let dq = LegDeflections([1e-3, 2e-3, -3e-3, 4e-3, 0.0, 8.2e-3]);
        let r = LegLengths([480.0, 490.0, 500.0, 510.0, 520.0, 530.0]);
        assert_eq!(scale_deflection(&m, &dq, &r, &r).unwrap(), dq);
    }

    #[test]
    fn zero_deflection_stays_zero() {
        let m = LegThermalModel::default_synthetic();
        let out = scale_deflection(&m, &LegDeflections::zero(), &q(500.0), &q(550.0)).unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn worked_example_one_kelvin() {
        // 23e-6*200 + 12e-6*300 = 8.2 µm/K; at 350 mm steel: 4.6 + 4.2 = 8.8 µm
        let m = LegThermalModel::uniform(23e-6, 12e-6, 200.0).unwrap();
        let dq = LegDeflections([8.2e-3; 6]);
        let out = scale_deflection(&m, &dq, &q(500.0), &q(550.0)).unwrap();
        let dt_oracle = 8.2e-3 / (23e-6 * 200.0 + 12e-6 * 300.0);
        let expected = 23e-6 * 200.0 * dt_oracle + 12e-6 * 350.0 * dt_oracle;
        for v in out.0 {
            assert_relative_eq!(v, expected, max_relative = 1e-12);
            assert_relative_eq!(v, 8.8e-3, max_relative = 1e-12);
        }
        let dt = implied_leg_temperature_rise(&m, &dq, &q(500.0)).unwrap();
        for v in dt {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_deflection_implies_zero_rise() {
        let m = LegThermalModel::default_synthetic();
        assert_eq!(implied_leg_temperature_rise(&m, &LegDeflections::zero(), &q(500.0)).unwrap(), [0.0; 6]);
    }

    #[test]
    fn steel_segment_must_be_positive() {
        let m = LegThermalModel::default_synthetic();
        let dq = LegDeflections([1e-3; 6]);
        let mut short = q(500.0);
        short.0[4] = 200.0;
        assert_eq!(
            scale_deflection(&m, &dq, &q(500.0), &short),
            Err(ThermalError::NonPositiveSegment { leg: 4, length: 0.0 })
        );
        assert!(implied_leg_temperature_rise(&m, &dq, &short).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LegThermalModel::uniform(0.0, 12e-6, 200.0).is_err());
        assert!(LegThermalModel::uniform(23e-6, -1.0, 200.0).is_err());
        assert!(LegThermalModel::uniform(23e-6, 12e-6, f64::NAN).is_err());
    }

    #[test]
    fn hot_length_fixed_point_inverts_expansion() {
        let m = LegThermalModel::default_synthetic();
        let dt = [5.0, 4.0, 3.0, 2.0, 1.0, 0.5];
        let q_ref = q(460.0);
        let q_cold = LegLengths([500.0, 510.0, 490.0, 505.0, 495.0, 500.0]);
        let dq_ref = LegDeflections(thermal_expansion(&m, &q_ref, &dt).unwrap());
        let growth = thermal_expansion(&m, &q_cold, &dt).unwrap();
        let q_hot = LegLengths(std::array::from_fn(|i| q_cold[i] + growth[i]));
        let est = scale_deflection_to_hot_lengths(&m, &dq_ref, &q_ref, &q_hot).unwrap();
        for i in 0..6 {
            assert!((est.0[i] - growth[i]).abs() < 1e-15, "leg {i}: {} vs {}", est.0[i], growth[i]);
        }
        // one-shot scaling at hot lengths is off by alpha_st * dT relative
        let naive = scale_deflection(&m, &dq_ref, &q_ref, &q_hot).unwrap();
        assert!((naive.0[0] - growth[0]).abs() > 1e-9);
    }
}
