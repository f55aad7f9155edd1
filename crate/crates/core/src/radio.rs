//! Simplified downlink link model.
//!
//! Free-space path loss with a fixed NLOS penalty and a distance-based LOS
//! probability for TN links; free-space slant-range loss with a quadratic
//! (in dB) beam roll-off for NTN links. SINR maps to spectral efficiency via
//! capped Shannon capacity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Planar ground coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` to `other`, degrees counter-clockwise from +x.
    pub fn bearing_deg(&self, other: &Position) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub tn_tx_power_dbm: f64,
    pub tn_antenna_gain_dbi: f64,
    pub tn_sector_beamwidth_deg: f64,
    pub tn_front_to_back_db: f64,
    pub carrier_ghz: f64,
    pub nlos_offset_db: f64,
    pub los_d0_m: f64,
    pub los_scale_m: f64,
    /// Closest modeled UE-to-site distance.
    pub min_distance_m: f64,
    pub ntn_eirp_dbw_per_mhz: f64,
    pub ntn_altitude_km: f64,
    pub ntn_elevation_deg: f64,
    pub ntn_beam_3db_radius_km: f64,
    pub ntn_beam_loss_cap_db: f64,
    pub ue_noise_figure_db: f64,
    pub thermal_noise_dbm_hz: f64,
    pub se_cap: f64,
    pub se_min: f64,
    /// Per-RB received power below which a candidate cannot serve.
    pub rsrp_min_dbm: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            tn_tx_power_dbm: 46.0,
            tn_antenna_gain_dbi: 8.0,
            tn_sector_beamwidth_deg: 65.0,
            tn_front_to_back_db: 25.0,
            carrier_ghz: 2.0,
            nlos_offset_db: 20.0,
            los_d0_m: 700.0,
            los_scale_m: 2500.0,
            min_distance_m: 35.0,
            ntn_eirp_dbw_per_mhz: 34.0,
            ntn_altitude_km: 600.0,
            ntn_elevation_deg: 75.0,
            ntn_beam_3db_radius_km: 25.0,
            ntn_beam_loss_cap_db: 30.0,
            ue_noise_figure_db: 7.0,
            thermal_noise_dbm_hz: -174.0,
            se_cap: 7.4,
            se_min: 0.05,
            rsrp_min_dbm: -110.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radio.carrier_ghz", self.carrier_ghz),
            ("radio.los_scale_m", self.los_scale_m),
            ("radio.min_distance_m", self.min_distance_m),
            ("radio.ntn_altitude_km", self.ntn_altitude_km),
            ("radio.ntn_beam_3db_radius_km", self.ntn_beam_3db_radius_km),
            ("radio.tn_sector_beamwidth_deg", self.tn_sector_beamwidth_deg),
            ("radio.se_cap", self.se_cap),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.ntn_elevation_deg > 0.0 && self.ntn_elevation_deg <= 90.0) {
            return Err(Error::config("radio.ntn_elevation_deg", "must be in (0, 90]"));
        }
        if !(0.0..self.se_cap).contains(&self.se_min) {
            return Err(Error::config("radio.se_min", "must be in [0, se_cap)"));
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Free-space path loss in dB.
pub fn fspl_db(distance_m: f64, freq_ghz: f64) -> f64 {
    32.45 + 20.0 * (freq_ghz * 1e3).log10() + 20.0 * (distance_m / 1e3).log10()
}

/// TN path loss: free space, plus `nlos_offset_db` when the link is NLOS.
pub fn tn_pathloss(distance_m: f64, los: bool, freq_ghz: f64, nlos_offset_db: f64) -> Result<f64> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    let fs = fspl_db(distance_m, freq_ghz);
    Ok(if los { fs } else { fs + nlos_offset_db })
}

pub fn los_probability(distance_m: f64, params: &RadioParams) -> f64 {
    if distance_m <= params.los_d0_m {
        1.0
    } else {
        (-(distance_m - params.los_d0_m) / params.los_scale_m).exp().min(1.0)
    }
}

/// LOS outcome for a uniform draw in `[0, 1)`.
pub fn los_state(distance_m: f64, params: &RadioParams, draw: f64) -> bool {
    draw < los_probability(distance_m, params)
}

/// Azimuth attenuation of a TN sector antenna, in dB (non-positive).
pub fn sector_pattern_db(offset_deg: f64, params: &RadioParams) -> f64 {
    let off = (offset_deg + 180.0).rem_euclid(360.0) - 180.0;
    -(12.0 * (off / params.tn_sector_beamwidth_deg).powi(2)).min(params.tn_front_to_back_db)
}

/// Satellite-to-ground distance for a given altitude and elevation angle.
pub fn slant_range_m(altitude_km: f64, elevation_deg: f64) -> f64 {
    let h = altitude_km * 1e3;
    let r = EARTH_RADIUS_M;
    let s = elevation_deg.to_radians().sin();
    ((r * s).powi(2) + h * h + 2.0 * r * h).sqrt() - r * s
}

/// Off-boresight beam loss: exactly 3 dB at the 3 dB radius, capped.
pub fn beam_offaxis_loss_db(ground_offset_m: f64, params: &RadioParams) -> f64 {
    let ratio = ground_offset_m / (params.ntn_beam_3db_radius_km * 1e3);
    (3.0 * ratio * ratio).min(params.ntn_beam_loss_cap_db)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TnCell {
    pub cell_id: usize,
    pub site: usize,
    pub position: Position,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NtnBeam {
    pub beam_id: usize,
    pub center: Position,
    pub group_index: usize,
}

/// A transmitter; cells order before beams, then by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Transmitter {
    Cell(usize),
    Beam(usize),
}

impl std::fmt::Display for Transmitter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transmitter::Cell(i) => write!(f, "tn{i}"),
            Transmitter::Beam(i) => write!(f, "ntn{i}"),
        }
    }
}

/// Per-RB received power from a TN cell, in dBm.
pub fn tn_rx_power(
    ue: &Position,
    cell: &TnCell,
    los: bool,
    params: &RadioParams,
    total_rbs: usize,
) -> f64 {
    let d = ue.distance(&cell.position).max(params.min_distance_m);
    let pl = tn_pathloss(d, los, params.carrier_ghz, params.nlos_offset_db)
        .expect("distance clamped positive");
    let per_rb = params.tn_tx_power_dbm - linear_to_db(total_rbs as f64);
    let off = cell.position.bearing_deg(ue) - cell.azimuth_deg;
    per_rb + params.tn_antenna_gain_dbi + sector_pattern_db(off, params) - pl
}

/// Per-RB received power from an NTN beam, in dBm.
pub fn ntn_rx_power(ue: &Position, beam: &NtnBeam, params: &RadioParams, rb_bandwidth_hz: f64) -> f64 {
    let eirp_per_rb = params.ntn_eirp_dbw_per_mhz + 30.0 + linear_to_db(rb_bandwidth_hz / 1e6);
    let slant = slant_range_m(params.ntn_altitude_km, params.ntn_elevation_deg);
    let fs = fspl_db(slant, params.carrier_ghz);
    eirp_per_rb - fs - beam_offaxis_loss_db(ue.distance(&beam.center), params)
}

/// Thermal noise plus noise figure over `bandwidth_hz`, in dBm.
pub fn noise_power_dbm(bandwidth_hz: f64, params: &RadioParams) -> f64 {
    params.thermal_noise_dbm_hz + linear_to_db(bandwidth_hz) + params.ue_noise_figure_db
}

/// Interfering transmitter as seen by one UE on one RB set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub rx_mw: f64,
    /// Fraction of the interferer's RBs carrying data.
    pub activity: f64,
    /// Whether the interferer's usable RBs overlap the UE's assigned RBs.
    pub overlaps: bool,
}

/// Linear SINR over `assigned_rbs` RBs. Signal, noise and interference are
/// all per-RB quantities.
pub fn sinr(signal_mw: f64, noise_mw: f64, interferers: &[Interferer], assigned_rbs: usize) -> Result<f64> {
    if assigned_rbs == 0 {
        return Err(Error::UndefinedSinr);
    }
    let interference: f64 = interferers
        .iter()
        .filter(|i| i.overlaps)
        .map(|i| i.activity * i.rx_mw)
        .sum();
    Ok(signal_mw / (noise_mw + interference))
}

/// Capped Shannon efficiency in bps/Hz; zero below `se_min`.
pub fn spectral_efficiency(sinr_linear: f64, params: &RadioParams) -> f64 {
    let se = (1.0 + sinr_linear.max(0.0)).log2().min(params.se_cap);
    if se < params.se_min {
        0.0
    } else {
        se
    }
}

/// Strongest candidate by per-RB power; ties go to the lowest transmitter.
/// `None` when every candidate is below `rsrp_min_dbm`.
pub fn select_serving(candidates: &[(Transmitter, f64)], rsrp_min_dbm: f64) -> Option<Transmitter> {
    candidates
        .iter()
        .filter(|(_, p)| *p >= rsrp_min_dbm)
        .fold(None::<(Transmitter, f64)>, |best, &(tx, p)| match best {
            Some((btx, bp)) if bp > p || (bp == p && btx < tx) => Some((btx, bp)),
            _ => Some((tx, p)),
        })
        .map(|(tx, _)| tx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tn_pathloss_values() {
        let los = tn_pathloss(1000.0, true, 2.0, 20.0).unwrap();
        assert!((los - 98.47).abs() < 0.005, "{los}");
        let nlos = tn_pathloss(1000.0, false, 2.0, 20.0).unwrap();
        assert!((nlos - 118.47).abs() < 0.005, "{nlos}");
        let doubled = tn_pathloss(2000.0, true, 2.0, 20.0).unwrap();
        assert!((doubled - los - 6.0206).abs() < 1e-3);
        assert!(matches!(tn_pathloss(0.0, true, 2.0, 20.0), Err(Error::Domain(_))));
    }

    #[test]
    fn los_probability_profile() {
        let p = RadioParams::default();
        assert_eq!(los_probability(500.0, &p), 1.0);
        assert_eq!(los_probability(700.0, &p), 1.0);
        assert!((los_probability(3200.0, &p) - (-1f64).exp()).abs() < 1e-12);
        assert!(los_state(3200.0, &p, 0.3));
        assert!(!los_state(3200.0, &p, 0.4));
    }

    #[test]
    fn ntn_geometry() {
        let p = RadioParams::default();
        assert_eq!(beam_offaxis_loss_db(0.0, &p), 0.0);
        assert!((beam_offaxis_loss_db(25_000.0, &p) - 3.0).abs() < 1e-12);
        assert_eq!(beam_offaxis_loss_db(1e6, &p), 30.0);

        let slant = slant_range_m(600.0, 90.0);
        assert!((slant - 600_000.0).abs() < 1e-6);
        assert!((fspl_db(slant, 2.0) - 154.03).abs() < 0.005);
        // Lower elevation means a longer path.
        assert!(slant_range_m(600.0, 75.0) > slant);
    }

    #[test]
    fn ntn_rx_power_peaks_at_boresight() {
        let p = RadioParams::default();
        let beam = NtnBeam { beam_id: 0, center: Position::new(0.0, 0.0), group_index: 0 };
        let at = |r| ntn_rx_power(&Position::new(r, 0.0), &beam, &p, 180e3);
        assert!((at(0.0) - at(25_000.0) - 3.0).abs() < 1e-9);
        assert!(at(0.0) > at(10.0));
    }

    #[test]
    fn sinr_and_efficiency() {
        let n = 1e-12;
        assert_eq!(sinr(1e-10, n, &[], 1).unwrap(), 100.0);
        let equal_to_noise = Interferer { rx_mw: n, activity: 1.0, overlaps: true };
        assert!((sinr(1e-10, n, &[equal_to_noise], 4).unwrap() - 50.0).abs() < 1e-9);
        let disjoint = Interferer { rx_mw: 1.0, activity: 1.0, overlaps: false };
        assert_eq!(sinr(1e-10, n, &[disjoint], 4).unwrap(), 100.0);
        assert!(matches!(sinr(1.0, n, &[], 0), Err(Error::UndefinedSinr)));

        let p = RadioParams::default();
        assert_eq!(spectral_efficiency(1.0, &p), 1.0);
        assert_eq!(spectral_efficiency(1000.0, &p), 7.4);
        assert_eq!(spectral_efficiency(0.03, &p), 0.0);
    }

    #[test]
    fn serving_selection() {
        let c = [
            (Transmitter::Cell(2), -90.0),
            (Transmitter::Cell(1), -90.0),
            (Transmitter::Beam(0), -95.0),
        ];
        assert_eq!(select_serving(&c, -120.0), Some(Transmitter::Cell(1)));
        assert_eq!(select_serving(&c, -80.0), None);
        let remote = [(Transmitter::Cell(0), -140.0), (Transmitter::Beam(2), -99.0)];
        assert_eq!(select_serving(&remote, -110.0), Some(Transmitter::Beam(2)));
    }

    #[test]
    fn close_ue_picks_nearby_cell() {
        let p = RadioParams::default();
        let near = TnCell { cell_id: 0, site: 0, position: Position::new(0.0, 0.0), azimuth_deg: 0.0 };
        let far = TnCell { cell_id: 1, site: 1, position: Position::new(7500.0, 0.0), azimuth_deg: 180.0 };
        let ue = Position::new(200.0, 0.0);
        let c = [
            (Transmitter::Cell(0), tn_rx_power(&ue, &near, true, &p, 160)),
            (Transmitter::Cell(1), tn_rx_power(&ue, &far, true, &p, 160)),
        ];
        assert_eq!(select_serving(&c, p.rsrp_min_dbm), Some(Transmitter::Cell(0)));
    }

    proptest! {
        #[test]
        fn pathloss_increasing(d in 1.0f64..1e6, extra in 1e-3f64..1e5, los: bool) {
            let a = tn_pathloss(d, los, 2.0, 20.0).unwrap();
            let b = tn_pathloss(d + extra, los, 2.0, 20.0).unwrap();
            prop_assert!(b > a);
            prop_assert!(a >= fspl_db(d, 2.0));
        }

        #[test]
        fn sinr_bounded_by_snr(s in 1e-15f64..1e-6, n in 1e-15f64..1e-9,
                               i in proptest::collection::vec((0.0f64..1e-6, 0.0f64..=1.0, any::<bool>()), 0..8)) {
            let ints: Vec<_> = i.into_iter().map(|(rx_mw, activity, overlaps)| Interferer { rx_mw, activity, overlaps }).collect();
            prop_assert!(sinr(s, n, &ints, 1).unwrap() <= s / n);
        }

        #[test]
        fn beam_loss_monotone(r in 0.0f64..200_000.0, dr in 0.0f64..50_000.0) {
            let p = RadioParams::default();
            prop_assert!(beam_offaxis_loss_db(r + dr, &p) >= beam_offaxis_loss_db(r, &p));
        }
    }
}
