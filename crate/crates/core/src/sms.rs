//! Spectrum Management Server.
//!
//! Once per optimization period the server picks the next coordinated group
//! (ascending index, wrapping), averages the TN cells' utilization of that
//! group, and moves the TN/NTN boundary by `step_rbs` when the average leaves
//! the `[lower_threshold, upper_threshold]` band. Only TN load is an input;
//! NTN receives whatever TN does not need, subject to `ntn_min`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::band::{validate_allocation, AllocationState, BandPlan, GroupAllocation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum System {
    Tn,
    Ntn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdssConfig {
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub step_rbs: usize,
    pub tn_min: usize,
    pub ntn_min: usize,
    pub guard_rbs: usize,
    pub period_s: f64,
    pub guard_time_epochs: u64,
}

impl Default for CdssConfig {
    fn default() -> Self {
        Self {
            lower_threshold: 0.60,
            upper_threshold: 0.80,
            step_rbs: 4,
            tn_min: 12,
            ntn_min: 6,
            guard_rbs: 3,
            period_s: 0.25,
            guard_time_epochs: 1,
        }
    }
}

impl CdssConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = 0.0 <= self.lower_threshold
            && self.lower_threshold < self.upper_threshold
            && self.upper_threshold <= 1.0;
        if !ordered {
            return Err(Error::config(
                "cdss.lower_threshold",
                format!(
                    "need 0 <= lower ({}) < upper ({}) <= 1",
                    self.lower_threshold, self.upper_threshold
                ),
            ));
        }
        if self.step_rbs == 0 {
            return Err(Error::config("cdss.step_rbs", "must be at least 1"));
        }
        if !(self.period_s.is_finite() && self.period_s > 0.0) {
            return Err(Error::config("cdss.period_s", "must be positive"));
        }
        Ok(())
    }
}

/// Utilization of one group by one cell over an optimization period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub cell_id: usize,
    pub system: System,
    pub group_index: usize,
    pub used_rb_epochs: u64,
    pub available_rb_epochs: u64,
    pub period_end_epoch: u64,
}

impl LoadReport {
    pub fn utilization(&self) -> Option<f64> {
        (self.available_rb_epochs > 0)
            .then(|| self.used_rb_epochs as f64 / self.available_rb_epochs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AllocationGrant {
    pub recipient: System,
    pub group_index: usize,
    pub rb_range: Range<usize>,
    pub effective_epoch: u64,
    pub version: u64,
}

/// Mean TN utilization of `group` across reporting TN cells.
///
/// Reports with no available RB-epochs carry no information and are skipped.
pub fn aggregate_load(reports: &[LoadReport], group: usize) -> Result<f64> {
    let (sum, n) = reports
        .iter()
        .filter(|r| r.system == System::Tn && r.group_index == group)
        .filter_map(LoadReport::utilization)
        .fold((0.0, 0usize), |(s, n), u| (s + u, n + 1));
    if n == 0 {
        return Err(Error::MissingData { group });
    }
    Ok(sum / n as f64)
}

/// Signed change to the group's TN RB count implied by `avg_load`.
pub fn decide_adjustment(avg_load: f64, alloc: &GroupAllocation, cfg: &CdssConfig) -> i64 {
    if avg_load > cfg.upper_threshold {
        let room = alloc.ntn_rbs.saturating_sub(cfg.ntn_min);
        cfg.step_rbs.min(room) as i64
    } else if avg_load < cfg.lower_threshold {
        let room = alloc.tn_rbs.saturating_sub(cfg.tn_min);
        -(cfg.step_rbs.min(room) as i64)
    } else {
        0
    }
}

/// Moves the TN/NTN boundary of `group` by `delta` RBs.
///
/// Every RB whose role changes is blacked out until `now + guard_time_epochs`.
pub fn apply_adjustment(
    state: &AllocationState,
    plan: &BandPlan,
    cfg: &CdssConfig,
    group: usize,
    delta: i64,
    now: u64,
) -> Result<AllocationState> {
    if delta == 0 {
        return Ok(state.clone());
    }
    let g = plan
        .groups
        .get(group)
        .ok_or_else(|| Error::Invariant(format!("group {group} not in band plan")))?;
    let before = state.groups[group]
        .ok_or_else(|| Error::Invariant(format!("group {group} is not coordinated")))?;

    let tn = before.tn_rbs as i64 + delta;
    let ntn = before.ntn_rbs as i64 - delta;
    if tn < 0 || ntn < 0 {
        return Err(Error::Invariant(format!(
            "group {group}: delta {delta} leaves a negative range"
        )));
    }
    let after = GroupAllocation {
        tn_rbs: tn as usize,
        guard_rbs: before.guard_rbs,
        ntn_rbs: ntn as usize,
    };

    let mut next = state.clone();
    next.groups[group] = Some(after);
    next.version += 1;
    let expiry = now + cfg.guard_time_epochs;
    if cfg.guard_time_epochs > 0 {
        for rb in g.rb_range.clone() {
            if before.role_of(g, rb) != after.role_of(g, rb) {
                let e = next.guard_timed.entry(rb).or_insert(expiry);
                *e = (*e).max(expiry);
            }
        }
    }

    let violations = validate_allocation(&next, plan, cfg);
    if let Some(v) = violations.first() {
        return Err(Error::Invariant(v.to_string()));
    }
    Ok(next)
}

/// What a single server step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Group examined, `None` when no group is coordinated.
    pub group: Option<usize>,
    pub avg_load: Option<f64>,
    pub delta: i64,
    pub grants: Vec<AllocationGrant>,
}

/// Stateful server: allocation state plus the round-robin cursor.
#[derive(Debug, Clone)]
pub struct SpectrumManager {
    plan: BandPlan,
    cfg: CdssConfig,
    state: AllocationState,
    cursor: usize,
}

impl SpectrumManager {
    pub fn new(plan: BandPlan, cfg: CdssConfig) -> Result<Self> {
        cfg.validate()?;
        let state = crate::band::initial_allocation(&plan, &cfg)?;
        Ok(Self {
            plan,
            cfg,
            state,
            cursor: 0,
        })
    }

    pub fn plan(&self) -> &BandPlan {
        &self.plan
    }

    pub fn config(&self) -> &CdssConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    /// Coordinated group the next step will examine.
    pub fn next_group(&self) -> Option<usize> {
        let n = self.plan.num_groups();
        (0..n)
            .map(|k| (self.cursor + k) % n)
            .find(|&gi| self.plan.groups[gi].coordinated)
    }

    /// One optimization period: aggregate, decide, apply, and grant.
    ///
    /// Missing load data leaves the state untouched but still advances the
    /// cursor.
    pub fn step(&mut self, reports: &[LoadReport], now: u64) -> Result<StepOutcome> {
        self.state.expire_guard_time(now);
        let Some(group) = self.next_group() else {
            return Ok(StepOutcome {
                group: None,
                avg_load: None,
                delta: 0,
                grants: Vec::new(),
            });
        };
        self.cursor = (group + 1) % self.plan.num_groups();

        let avg_load = match aggregate_load(reports, group) {
            Ok(l) => l,
            Err(Error::MissingData { .. }) => {
                return Ok(StepOutcome {
                    group: Some(group),
                    avg_load: None,
                    delta: 0,
                    grants: Vec::new(),
                })
            }
            Err(e) => return Err(e),
        };
        let alloc = self.state.groups[group].expect("coordinated group has an allocation");
        let delta = decide_adjustment(avg_load, &alloc, &self.cfg);
        self.state = apply_adjustment(&self.state, &self.plan, &self.cfg, group, delta, now)?;

        let g = &self.plan.groups[group];
        let alloc = self.state.groups[group].expect("coordinated group has an allocation");
        let grants = vec![
            AllocationGrant {
                recipient: System::Tn,
                group_index: group,
                rb_range: alloc.tn_range(g),
                effective_epoch: now,
                version: self.state.version,
            },
            AllocationGrant {
                recipient: System::Ntn,
                group_index: group,
                rb_range: alloc.ntn_range(g),
                effective_epoch: now,
                version: self.state.version,
            },
        ];
        Ok(StepOutcome {
            group: Some(group),
            avg_load: Some(avg_load),
            delta,
            grants,
        })
    }
}
