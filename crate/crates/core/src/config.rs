//! Scenario files and simulation cases.
//!
//! A scenario is a TOML document with the sections `[band]`, `[cdss]`,
//! `[radio]`, `[topology]`, `[traffic]` and `[sim]`. Every key is optional
//! and defaults to the reference scenario; unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::band::{build_band_plan, initial_allocation, BandPlan};
use crate::error::{Error, Result};
use crate::radio::RadioParams;
use crate::sms::CdssConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub total_rbs: usize,
    pub num_groups: usize,
    /// Coordination flag per group, used by the C-DSS cases.
    pub coordinated: Vec<bool>,
    /// 12 subcarriers at 15 kHz.
    pub rb_bandwidth_hz: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            total_rbs: 160,
            num_groups: 3,
            coordinated: vec![true, true, false],
            rb_bandwidth_hz: 180e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub x_m: f64,
    pub y_m: f64,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    /// Inter-site distance of the three-site TN cluster.
    pub isd_m: f64,
    pub sector_azimuths_deg: Vec<f64>,
    pub ues_per_cell: usize,
    pub ues_per_beam: usize,
    pub beams: Vec<BeamConfig>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        // Sites sit on a triangle with centroid (3750, 2165). Beams 0 and 1
        // straddle the cluster; beam 2 is 70 km north of it.
        Self {
            isd_m: 7500.0,
            sector_azimuths_deg: vec![30.0, 150.0, 270.0],
            ues_per_cell: 10,
            ues_per_beam: 5,
            beams: vec![
                BeamConfig { x_m: -8000.0, y_m: 2165.0, group: 0 },
                BeamConfig { x_m: 15500.0, y_m: 2165.0, group: 1 },
                BeamConfig { x_m: 3750.0, y_m: 72165.0, group: 2 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub low_demand_tn_bps: f64,
    pub low_demand_ntn_bps: f64,
    pub high_demand_tn_bps: f64,
    pub high_demand_ntn_bps: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            low_demand_tn_bps: 400e3,
            low_demand_ntn_bps: 400e3,
            high_demand_tn_bps: 4e6,
            high_demand_ntn_bps: 1.2e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub total_s: f64,
    pub warmup_s: f64,
    pub epoch_ms: f64,
    pub seeds: Vec<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            total_s: 10.0,
            warmup_s: 5.0,
            epoch_ms: 10.0,
            seeds: (1..=10).collect(),
        }
    }
}

impl SimConfig {
    pub fn epoch_s(&self) -> f64 {
        self.epoch_ms / 1e3
    }

    pub fn total_epochs(&self) -> u64 {
        (self.total_s / self.epoch_s()).round() as u64
    }

    pub fn warmup_epochs(&self) -> u64 {
        (self.warmup_s / self.epoch_s()).round() as u64
    }

    pub fn measured_s(&self) -> f64 {
        self.total_s - self.warmup_s
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub band: BandConfig,
    pub cdss: CdssConfig,
    pub radio: RadioParams,
    pub topology: TopologyConfig,
    pub traffic: TrafficConfig,
    pub sim: SimConfig,
}

/// The four reference cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    TnOnlyLowDemand = 1,
    CdssLowDemand = 2,
    TnOnlyHighDemand = 3,
    CdssHighDemand = 4,
}

impl Case {
    pub const ALL: [Case; 4] = [
        Case::TnOnlyLowDemand,
        Case::CdssLowDemand,
        Case::TnOnlyHighDemand,
        Case::CdssHighDemand,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u64) -> Result<Self> {
        match n {
            1 => Ok(Case::TnOnlyLowDemand),
            2 => Ok(Case::CdssLowDemand),
            3 => Ok(Case::TnOnlyHighDemand),
            4 => Ok(Case::CdssHighDemand),
            _ => Err(Error::config("case", format!("case must be 1..4, got {n}"))),
        }
    }

    pub fn ntn_enabled(self) -> bool {
        matches!(self, Case::CdssLowDemand | Case::CdssHighDemand)
    }

    pub fn high_demand(self) -> bool {
        matches!(self, Case::TnOnlyHighDemand | Case::CdssHighDemand)
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::TnOnlyLowDemand => "TN only LD",
            Case::CdssLowDemand => "C-DSS LD",
            Case::TnOnlyHighDemand => "TN only HD",
            Case::CdssHighDemand => "C-DSS HD",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case{}", self.number())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::config("case", format!("`{s}` is not a case number")))?;
        Case::from_number(n)
    }
}

impl ScenarioConfig {
    /// Demand in bps for a UE served by TN (`false`) or NTN (`true`).
    pub fn demand_bps(&self, case: Case, on_ntn: bool) -> f64 {
        let t = &self.traffic;
        match (case.high_demand(), on_ntn) {
            (false, false) => t.low_demand_tn_bps,
            (false, true) => t.low_demand_ntn_bps,
            (true, false) => t.high_demand_tn_bps,
            (true, true) => t.high_demand_ntn_bps,
        }
    }

    /// Band plan for `case`. TN-only cases leave every group uncoordinated so
    /// the TN owns the whole band.
    pub fn band_plan(&self, case: Case) -> Result<BandPlan> {
        let flags = if case.ntn_enabled() {
            self.band.coordinated.clone()
        } else {
            vec![false; self.band.num_groups]
        };
        build_band_plan(
            self.band.total_rbs,
            self.band.num_groups,
            &flags,
            self.band.rb_bandwidth_hz,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let plan = build_band_plan(
            self.band.total_rbs,
            self.band.num_groups,
            &self.band.coordinated,
            self.band.rb_bandwidth_hz,
        )?;
        self.cdss.validate()?;
        initial_allocation(&plan, &self.cdss)?;
        self.radio.validate()?;

        let topo = &self.topology;
        if !(topo.isd_m.is_finite() && topo.isd_m > 0.0) {
            return Err(Error::config("topology.isd_m", "must be positive"));
        }
        if topo.sector_azimuths_deg.is_empty() {
            return Err(Error::config("topology.sector_azimuths_deg", "need at least one sector"));
        }
        if topo.ues_per_cell == 0 {
            return Err(Error::config("topology.ues_per_cell", "must be positive"));
        }
        if topo.ues_per_beam == 0 {
            return Err(Error::config("topology.ues_per_beam", "must be positive"));
        }
        for (i, b) in topo.beams.iter().enumerate() {
            if b.group >= self.band.num_groups {
                return Err(Error::config(
                    format!("topology.beams[{i}].group"),
                    format!("group {} outside 0..{}", b.group, self.band.num_groups),
                ));
            }
        }

        let t = &self.traffic;
        for (key, v) in [
            ("traffic.low_demand_tn_bps", t.low_demand_tn_bps),
            ("traffic.low_demand_ntn_bps", t.low_demand_ntn_bps),
            ("traffic.high_demand_tn_bps", t.high_demand_tn_bps),
            ("traffic.high_demand_ntn_bps", t.high_demand_ntn_bps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be non-negative"));
            }
        }

        let s = &self.sim;
        if !(s.epoch_ms.is_finite() && s.epoch_ms > 0.0) {
            return Err(Error::config("sim.epoch_ms", "must be positive"));
        }
        if !(s.total_s > 0.0 && s.warmup_s >= 0.0 && s.warmup_s < s.total_s) {
            return Err(Error::config("sim.warmup_s", "need 0 <= warmup_s < total_s"));
        }
        let whole = |x: f64| (x - x.round()).abs() < 1e-9;
        if !whole(s.total_s / s.epoch_s()) {
            return Err(Error::config("sim.total_s", "must be a whole number of epochs"));
        }
        if !whole(s.warmup_s / s.epoch_s()) {
            return Err(Error::config("sim.warmup_s", "must be a whole number of epochs"));
        }
        let per = self.cdss.period_s / s.epoch_s();
        if !whole(per) || per.round() < 1.0 {
            return Err(Error::config(
                "cdss.period_s",
                "must be a positive whole number of epochs",
            ));
        }
        if s.seeds.is_empty() {
            return Err(Error::config("sim.seeds", "need at least one seed"));
        }
        Ok(())
    }

    pub fn period_epochs(&self) -> u64 {
        (self.cdss.period_s / self.sim.epoch_s()).round() as u64
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `"a..b"` (inclusive) or a comma list into seeds.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::config("seeds", format!("cannot parse `{s}`"));
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    Ok(seeds)
}

pub fn parse_case_list(s: &str) -> Result<Vec<Case>> {
    s.split(',').map(str::parse).collect()
}
