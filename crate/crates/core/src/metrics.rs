//! Run metrics and the files written for each run and campaign.
//!
//! Per run `<case>_<seed>_` prefixes these artifacts:
//!
//! | file              | columns |
//! |-------------------|---------|
//! | `timeline.csv`    | step, epoch, time_s, group, coordinated, tn_rbs, guard_rbs, ntn_rbs, version, avg_load, delta |
//! | `final_split.csv` | group, coordinated, rb_start, rb_end, tn_rbs, guard_rbs, ntn_rbs |
//! | `rb_counts.csv`   | transmitter, system, rbs |
//! | `rx_totals.csv`   | system, bytes |
//! | `throughput.csv`  | ue_id, area, serving, demand_bps, rx_bytes, throughput_bps |
//! | `utilization.csv` | cell_id, period, utilization |
//! | `summary.json`    | [`RunSummary`] |
//!
//! Time-based metrics only count epochs after warmup.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::band::{AllocationState, BandPlan};
use crate::config::Case;
use crate::error::{Error, Result};
use crate::radio::Transmitter;
use crate::sms::AllocationGrant;
use crate::topology::Area;

pub const SCHEMA_VERSION: u32 = 1;

/// Empirical CDF: `values` ascending, `probabilities[i] = (i + 1) / n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfSeries {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CdfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest sample whose cumulative probability reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let i = self
            .probabilities
            .iter()
            .position(|&q| q >= p - 1e-12)
            .unwrap_or(self.values.len() - 1);
        self.values[i]
    }

    /// Empirical P(X <= x).
    pub fn cdf_at(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        k as f64 / self.values.len() as f64
    }
}

pub fn compute_cdf(samples: &[f64]) -> Result<CdfSeries> {
    if samples.is_empty() {
        return Err(Error::Domain("CDF of an empty sample".into()));
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let probabilities = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(CdfSeries {
        values,
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineRow {
    pub step: u64,
    pub epoch: u64,
    pub time_s: f64,
    pub group: usize,
    pub coordinated: bool,
    pub tn_rbs: usize,
    pub guard_rbs: usize,
    pub ntn_rbs: usize,
    pub version: u64,
    pub avg_load: Option<f64>,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UeRecord {
    pub ue_id: usize,
    pub area: Area,
    pub serving: Option<Transmitter>,
    pub demand_bps: f64,
    /// Post-warmup bytes received.
    pub rx_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilizationSample {
    pub cell_id: usize,
    pub period: u64,
    pub utilization: f64,
}

/// Everything recorded during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsStore {
    pub case: Case,
    pub seed: u64,
    pub measured_s: f64,
    pub epoch_s: f64,
    pub timeline: Vec<TimelineRow>,
    pub grants: Vec<AllocationGrant>,
    pub ues: Vec<UeRecord>,
    /// Post-warmup bytes sent by each transmitter.
    pub tx_bytes: Vec<(Transmitter, u64)>,
    pub utilization: Vec<UtilizationSample>,
    pub sms_invocations: u64,
    pub plan: BandPlan,
    pub final_state: AllocationState,
    /// Frequency group of each enabled beam.
    pub beam_groups: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub case: u8,
    pub case_label: String,
    pub seed: u64,
    pub total_rx_bytes: u64,
    pub tn_rx_bytes: u64,
    pub ntn_rx_bytes: u64,
    pub total_rbs: usize,
    pub tn_rbs: usize,
    pub tn_share: f64,
    pub beam_rbs: Vec<usize>,
    pub ntn_share: f64,
    pub ues_total: usize,
    pub ues_on_tn: usize,
    pub ues_on_ntn: usize,
    pub ues_unserved: usize,
    pub tn_area_ues_on_ntn: usize,
    pub zero_throughput_ues: usize,
    pub zero_throughput_fraction: f64,
    pub mean_throughput_bps: f64,
    pub sms_invocations: u64,
    pub final_version: u64,
    /// First time every coordinated group sat at `tn_min`, if ever.
    pub tn_min_reached_s: Option<f64>,
    pub mean_tn_utilization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SplitRow {
    group: usize,
    coordinated: bool,
    rb_start: usize,
    rb_end: usize,
    tn_rbs: usize,
    guard_rbs: usize,
    ntn_rbs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RbCountRow {
    transmitter: String,
    system: &'static str,
    rbs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ThroughputRow {
    ue_id: usize,
    area: String,
    serving: String,
    demand_bps: f64,
    rx_bytes: u64,
    throughput_bps: f64,
}

impl MetricsStore {
    pub fn throughput_bps(&self, ue: &UeRecord) -> f64 {
        ue.rx_bytes as f64 * 8.0 / self.measured_s
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.ues.iter().map(|u| self.throughput_bps(u)).collect()
    }

    pub fn total_rx_bytes(&self) -> u64 {
        self.ues.iter().map(|u| u.rx_bytes).sum()
    }

    pub fn served_bytes(&self) -> u64 {
        self.tx_bytes.iter().map(|&(_, b)| b).sum()
    }

    /// RBs the TN may use at the end of the run.
    pub fn tn_rbs(&self) -> usize {
        self.final_state.tn_total(&self.plan)
    }

    /// RBs each enabled beam may use at the end of the run.
    pub fn beam_rbs(&self) -> Vec<usize> {
        self.beam_groups
            .iter()
            .map(|&(_, g)| match self.final_state.groups[g] {
                Some(a) => a.ntn_rbs,
                None => self.plan.groups[g].size(),
            })
            .collect()
    }

    pub fn ntn_share(&self) -> f64 {
        if self.beam_groups.is_empty() {
            return 0.0;
        }
        let shares: f64 = self
            .beam_groups
            .iter()
            .zip(self.beam_rbs())
            .map(|(&(_, g), rbs)| rbs as f64 / self.plan.groups[g].size() as f64)
            .sum();
        shares / self.beam_groups.len() as f64
    }

    pub fn summary(&self, tn_min: usize) -> RunSummary {
        let tp = self.throughputs();
        let zero = tp.iter().filter(|&&t| t == 0.0).count();
        let on = |pred: fn(&Transmitter) -> bool| {
            self.ues
                .iter()
                .filter(|u| u.serving.as_ref().is_some_and(pred))
                .count()
        };
        let ues_on_tn = on(|t| matches!(t, Transmitter::Cell(_)));
        let ues_on_ntn = on(|t| matches!(t, Transmitter::Beam(_)));
        let bytes_of = |pred: fn(&Transmitter) -> bool| -> u64 {
            self.tx_bytes.iter().filter(|(t, _)| pred(t)).map(|&(_, b)| b).sum()
        };
        let tn_rbs = self.tn_rbs();
        let util: Vec<f64> = self.utilization.iter().map(|s| s.utilization).collect();

        RunSummary {
            schema_version: SCHEMA_VERSION,
            case: self.case.number(),
            case_label: self.case.label().to_string(),
            seed: self.seed,
            total_rx_bytes: self.total_rx_bytes(),
            tn_rx_bytes: bytes_of(|t| matches!(t, Transmitter::Cell(_))),
            ntn_rx_bytes: bytes_of(|t| matches!(t, Transmitter::Beam(_))),
            total_rbs: self.plan.total_rbs,
            tn_rbs,
            tn_share: tn_rbs as f64 / self.plan.total_rbs as f64,
            beam_rbs: self.beam_rbs(),
            ntn_share: self.ntn_share(),
            ues_total: self.ues.len(),
            ues_on_tn,
            ues_on_ntn,
            ues_unserved: self.ues.len() - ues_on_tn - ues_on_ntn,
            tn_area_ues_on_ntn: self
                .ues
                .iter()
                .filter(|u| matches!(u.area, Area::TnCell(_)))
                .filter(|u| matches!(u.serving, Some(Transmitter::Beam(_))))
                .count(),
            zero_throughput_ues: zero,
            zero_throughput_fraction: zero as f64 / self.ues.len().max(1) as f64,
            mean_throughput_bps: tp.iter().sum::<f64>() / tp.len().max(1) as f64,
            sms_invocations: self.sms_invocations,
            final_version: self.final_state.version,
            tn_min_reached_s: self.tn_min_reached_s(tn_min),
            mean_tn_utilization: (!util.is_empty())
                .then(|| util.iter().sum::<f64>() / util.len() as f64),
        }
    }

    fn tn_min_reached_s(&self, tn_min: usize) -> Option<f64> {
        let coordinated: Vec<usize> = self
            .plan
            .groups
            .iter()
            .filter(|g| g.coordinated)
            .map(|g| g.index)
            .collect();
        if coordinated.is_empty() {
            return None;
        }
        let mut at_min = vec![false; self.plan.num_groups()];
        for row in &self.timeline {
            if row.coordinated {
                at_min[row.group] = row.tn_rbs == tn_min;
            }
            if coordinated.iter().all(|&g| at_min[g]) {
                return Some(row.time_s);
            }
        }
        None
    }

    fn file(&self, dir: &Path, artifact: &str) -> PathBuf {
        dir.join(format!("{}_seed{}_{artifact}", self.case, self.seed))
    }

    /// Writes every per-run artifact into `dir` and returns the paths.
    pub fn write_outputs(&self, dir: &Path, tn_min: usize) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();

        let path = self.file(dir, "timeline.csv");
        write_csv(&path, &self.timeline)?;
        written.push(path);

        let split: Vec<SplitRow> = self
            .plan
            .groups
            .iter()
            .zip(&self.final_state.groups)
            .map(|(g, a)| {
                let (tn, guard, ntn) = match a {
                    Some(a) => (a.tn_rbs, a.guard_rbs, a.ntn_rbs),
                    None => (g.size(), 0, g.size()),
                };
                SplitRow {
                    group: g.index,
                    coordinated: g.coordinated,
                    rb_start: g.rb_range.start,
                    rb_end: g.rb_range.end,
                    tn_rbs: tn,
                    guard_rbs: guard,
                    ntn_rbs: ntn,
                }
            })
            .collect();
        let path = self.file(dir, "final_split.csv");
        write_csv(&path, &split)?;
        written.push(path);

        let tn_rbs = self.tn_rbs();
        let mut counts: Vec<RbCountRow> = self
            .tx_bytes
            .iter()
            .filter_map(|(t, _)| match t {
                Transmitter::Cell(_) => Some(RbCountRow {
                    transmitter: t.to_string(),
                    system: "TN",
                    rbs: tn_rbs,
                }),
                Transmitter::Beam(_) => None,
            })
            .collect();
        for (&(b, _), rbs) in self.beam_groups.iter().zip(self.beam_rbs()) {
            counts.push(RbCountRow {
                transmitter: Transmitter::Beam(b).to_string(),
                system: "NTN",
                rbs,
            });
        }
        let path = self.file(dir, "rb_counts.csv");
        write_csv(&path, &counts)?;
        written.push(path);

        let s = self.summary(tn_min);
        #[derive(Serialize)]
        struct RxRow {
            system: &'static str,
            bytes: u64,
        }
        let path = self.file(dir, "rx_totals.csv");
        write_csv(
            &path,
            &[
                RxRow { system: "TN", bytes: s.tn_rx_bytes },
                RxRow { system: "NTN", bytes: s.ntn_rx_bytes },
                RxRow { system: "total", bytes: s.total_rx_bytes },
            ],
        )?;
        written.push(path);

        let rows: Vec<ThroughputRow> = self
            .ues
            .iter()
            .map(|u| ThroughputRow {
                ue_id: u.ue_id,
                area: u.area.to_string(),
                serving: u.serving.map_or_else(|| "unserved".to_string(), |t| t.to_string()),
                demand_bps: u.demand_bps,
                rx_bytes: u.rx_bytes,
                throughput_bps: self.throughput_bps(u),
            })
            .collect();
        let path = self.file(dir, "throughput.csv");
        write_csv(&path, &rows)?;
        written.push(path);

        let path = self.file(dir, "utilization.csv");
        write_csv(&path, &self.utilization)?;
        written.push(path);

        let path = self.file(dir, "summary.json");
        write_json(&path, &s)?;
        written.push(path);

        Ok(written)
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let io = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Mean with standard error and 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci95: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_err,
            ci95: 1.96 * std_err,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseAggregate {
    pub case: u8,
    pub case_label: String,
    pub runs: usize,
    pub total_rx_bytes: Estimate,
    pub tn_share: Estimate,
    pub ntn_share: Estimate,
    pub zero_throughput_fraction: Estimate,
    pub mean_throughput_bps: Estimate,
    #[serde(skip)]
    pub throughput_cdf: CdfSeries,
    #[serde(skip)]
    pub utilization_cdf: Option<CdfSeries>,
}

/// Pools the successful runs of one case.
pub fn aggregate_case(case: Case, runs: &[(RunSummary, &MetricsStore)]) -> Result<CaseAggregate> {
    let pick = |f: fn(&RunSummary) -> f64| -> Estimate {
        Estimate::of(&runs.iter().map(|(s, _)| f(s)).collect::<Vec<_>>())
    };
    if runs.is_empty() {
        return Err(Error::Domain(format!("no successful runs for {case}")));
    }
    let tp: Vec<f64> = runs.iter().flat_map(|(_, m)| m.throughputs()).collect();
    let util: Vec<f64> = runs
        .iter()
        .flat_map(|(_, m)| m.utilization.iter().map(|s| s.utilization))
        .collect();
    Ok(CaseAggregate {
        case: case.number(),
        case_label: case.label().to_string(),
        runs: runs.len(),
        total_rx_bytes: pick(|s| s.total_rx_bytes as f64),
        tn_share: pick(|s| s.tn_share),
        ntn_share: pick(|s| s.ntn_share),
        zero_throughput_fraction: pick(|s| s.zero_throughput_fraction),
        mean_throughput_bps: pick(|s| s.mean_throughput_bps),
        throughput_cdf: compute_cdf(&tp)?,
        utilization_cdf: compute_cdf(&util).ok(),
    })
}

#[derive(Serialize)]
struct CdfRow {
    value: f64,
    probability: f64,
}

/// Writes `campaign_summary.json`, `campaign_summary.csv` and pooled CDFs.
pub fn write_campaign_outputs(dir: &Path, aggregates: &[CaseAggregate]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let path = dir.join("campaign_summary.json");
    write_json(&path, &aggregates)?;
    written.push(path);

    #[derive(Serialize)]
    struct Row {
        case: u8,
        runs: usize,
        total_rx_bytes_mean: f64,
        total_rx_bytes_ci95: f64,
        tn_share_mean: f64,
        ntn_share_mean: f64,
        zero_throughput_fraction_mean: f64,
        mean_throughput_bps: f64,
    }
    let rows: Vec<Row> = aggregates
        .iter()
        .map(|a| Row {
            case: a.case,
            runs: a.runs,
            total_rx_bytes_mean: a.total_rx_bytes.mean,
            total_rx_bytes_ci95: a.total_rx_bytes.ci95,
            tn_share_mean: a.tn_share.mean,
            ntn_share_mean: a.ntn_share.mean,
            zero_throughput_fraction_mean: a.zero_throughput_fraction.mean,
            mean_throughput_bps: a.mean_throughput_bps.mean,
        })
        .collect();
    let path = dir.join("campaign_summary.csv");
    write_csv(&path, &rows)?;
    written.push(path);

    for a in aggregates {
        let mut cdfs = vec![("throughput_cdf", &a.throughput_cdf)];
        if let Some(u) = &a.utilization_cdf {
            cdfs.push(("utilization_cdf", u));
        }
        for (name, cdf) in cdfs {
            let rows: Vec<CdfRow> = cdf
                .values
                .iter()
                .zip(&cdf.probabilities)
                .map(|(&value, &probability)| CdfRow { value, probability })
                .collect();
            let path = dir.join(format!("case{}_{name}.csv", a.case));
            write_csv(&path, &rows)?;
            written.push(path);
        }
    }
    Ok(written)
}
