//! CBR downlink traffic, per-epoch round-robin RB scheduling, and RB
//! utilization accounting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::radio::Transmitter;
use crate::sms::{LoadReport, System};

/// Constant-bitrate downlink flow to one UE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficFlow {
    pub ue_id: usize,
    pub demand_bps: f64,
    /// Queued bytes, fractional arrivals included.
    pub backlog_bytes: f64,
    pub received_bytes: u64,
}

impl TrafficFlow {
    pub fn new(ue_id: usize, demand_bps: f64) -> Self {
        Self {
            ue_id,
            demand_bps,
            backlog_bytes: 0.0,
            received_bytes: 0,
        }
    }

    pub fn generate_arrivals(&mut self, epoch_duration_s: f64) {
        self.backlog_bytes += self.demand_bps * epoch_duration_s / 8.0;
    }

    /// Whole bytes available for transmission this epoch.
    pub fn schedulable_bytes(&self) -> u64 {
        self.backlog_bytes.floor() as u64
    }

    pub fn deliver(&mut self, bytes: u64) {
        debug_assert!(bytes <= self.schedulable_bytes());
        self.backlog_bytes -= bytes as f64;
        self.received_bytes += bytes;
    }
}

/// A UE as seen by its serving cell's scheduler.
#[derive(Debug, Clone, Copy)]
pub struct SchedUe<'a> {
    pub ue_id: usize,
    pub backlog_bytes: u64,
    /// Spectral efficiency on each frequency group, bps/Hz.
    pub se_by_group: &'a [f64],
}

/// A granted RB together with its frequency group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GrantedRb {
    pub rb: usize,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSchedule {
    pub cell: Transmitter,
    pub epoch: u64,
    pub granted: Vec<GrantedRb>,
    /// `(rb, ue_id)` pairs, one UE per RB.
    pub assignments: Vec<(usize, usize)>,
    /// Bytes delivered per UE, in the order of the scheduler's UE list.
    pub served: Vec<(usize, u64)>,
}

impl CellSchedule {
    pub fn used_rbs(&self) -> usize {
        self.assignments.len()
    }

    pub fn served_bytes(&self) -> u64 {
        self.served.iter().map(|&(_, b)| b).sum()
    }
}

/// Deals granted RBs round-robin to backlogged UEs.
///
/// Dealing starts at `*pointer` (an index into `ues`) and the pointer is left
/// at the UE after the last one served, so successive epochs rotate the
/// starting UE. A UE drops out once the capacity it has been dealt covers its
/// backlog. An RB that no remaining UE can use (zero efficiency on its
/// group) stays idle. `bytes_per_se` is the payload of one RB at 1 bps/Hz.
pub fn schedule_epoch(
    cell: Transmitter,
    epoch: u64,
    ues: &[SchedUe<'_>],
    granted: &[GrantedRb],
    bytes_per_se: f64,
    pointer: &mut usize,
) -> CellSchedule {
    let n = ues.len();
    let mut capacity = vec![0.0f64; n];
    let mut active: Vec<bool> = ues
        .iter()
        .map(|u| u.backlog_bytes > 0 && u.se_by_group.iter().any(|&s| s > 0.0))
        .collect();
    let mut assignments = Vec::new();
    let mut pos = if n == 0 { 0 } else { *pointer % n };

    for &GrantedRb { rb, group } in granted {
        if !active.iter().any(|&a| a) {
            break;
        }
        let pick = (0..n)
            .map(|k| (pos + k) % n)
            .find(|&i| active[i] && ues[i].se_by_group[group] > 0.0);
        let Some(i) = pick else { continue };
        assignments.push((rb, ues[i].ue_id));
        capacity[i] += ues[i].se_by_group[group] * bytes_per_se;
        if capacity[i] >= ues[i].backlog_bytes as f64 {
            active[i] = false;
        }
        pos = (i + 1) % n;
    }
    if n > 0 {
        *pointer = pos;
    }

    let served = ues
        .iter()
        .zip(&capacity)
        .map(|(u, &c)| (u.ue_id, u.backlog_bytes.min(c.floor() as u64)))
        .collect();
    CellSchedule {
        cell,
        epoch,
        granted: granted.to_vec(),
        assignments,
        served,
    }
}

/// Per-group used/available RB-epoch counters for one cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeriodUsage {
    pub used: Vec<u64>,
    pub available: Vec<u64>,
    pub epochs: u64,
}

impl PeriodUsage {
    pub fn new(num_groups: usize) -> Self {
        Self {
            used: vec![0; num_groups],
            available: vec![0; num_groups],
            epochs: 0,
        }
    }

    pub fn record(&mut self, schedule: &CellSchedule, group_of: impl Fn(usize) -> usize) {
        for g in &schedule.granted {
            self.available[g.group] += 1;
        }
        for &(rb, _) in &schedule.assignments {
            self.used[group_of(rb)] += 1;
        }
        self.epochs += 1;
    }

    /// Utilization across every group, or `None` if nothing was granted.
    pub fn overall(&self) -> Option<f64> {
        let avail: u64 = self.available.iter().sum();
        (avail > 0).then(|| self.used.iter().sum::<u64>() as f64 / avail as f64)
    }

    pub fn reports(&self, cell_id: usize, system: System, period_end_epoch: u64) -> Vec<LoadReport> {
        (0..self.used.len())
            .map(|g| LoadReport {
                cell_id,
                system,
                group_index: g,
                used_rb_epochs: self.used[g],
                available_rb_epochs: self.available[g],
                period_end_epoch,
            })
            .collect()
    }

    pub fn reset(&mut self) {
        self.used.fill(0);
        self.available.fill(0);
        self.epochs = 0;
    }
}

/// Load report for one cell and group over an optimization period.
pub fn cell_load(
    cell_id: usize,
    system: System,
    group: usize,
    schedules: &[CellSchedule],
) -> Result<LoadReport> {
    let mut used = 0u64;
    let mut available = 0u64;
    for s in schedules {
        let in_group: Vec<usize> = s
            .granted
            .iter()
            .filter(|g| g.group == group)
            .map(|g| g.rb)
            .collect();
        available += in_group.len() as u64;
        used += s
            .assignments
            .iter()
            .filter(|(rb, _)| in_group.contains(rb))
            .count() as u64;
    }
    if available == 0 {
        return Err(Error::MissingData { group });
    }
    Ok(LoadReport {
        cell_id,
        system,
        group_index: group,
        used_rb_epochs: used,
        available_rb_epochs: available,
        period_end_epoch: schedules.last().map_or(0, |s| s.epoch + 1),
    })
}
