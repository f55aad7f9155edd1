//! Shared RB grid, frequency groups, and the per-group TN / guard / NTN split.
//!
//! Inside a coordinated group the TN range sits at the low-index end, the
//! guard band follows, and the NTN range occupies the high-index end. A
//! boundary move is therefore a single signed integer on `tn_rbs`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sms::CdssConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyGroup {
    pub index: usize,
    pub rb_range: Range<usize>,
    /// Uncoordinated groups are usable in full by both systems.
    pub coordinated: bool,
}

impl FrequencyGroup {
    pub fn size(&self) -> usize {
        self.rb_range.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandPlan {
    pub total_rbs: usize,
    pub groups: Vec<FrequencyGroup>,
    /// Bandwidth of a single RB in Hz.
    pub rb_bandwidth_hz: f64,
}

impl BandPlan {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Group containing `rb`. Panics if `rb` is outside the band.
    pub fn group_of(&self, rb: usize) -> usize {
        self.groups
            .iter()
            .position(|g| g.rb_range.contains(&rb))
            .unwrap_or_else(|| panic!("RB {rb} outside band of {} RBs", self.total_rbs))
    }

    pub fn coordinated_groups(&self) -> impl Iterator<Item = &FrequencyGroup> {
        self.groups.iter().filter(|g| g.coordinated)
    }
}

/// Partitions `total_rbs` into `num_groups` contiguous groups.
///
/// Sizes differ by at most one; remainder RBs go one each to the
/// lowest-index groups.
pub fn build_band_plan(
    total_rbs: usize,
    num_groups: usize,
    coordinated_flags: &[bool],
    rb_bandwidth_hz: f64,
) -> Result<BandPlan> {
    if total_rbs == 0 {
        return Err(Error::config("band.total_rbs", "must be positive"));
    }
    if num_groups == 0 {
        return Err(Error::config("band.num_groups", "must be positive"));
    }
    if num_groups > total_rbs {
        return Err(Error::config(
            "band.num_groups",
            format!("{num_groups} groups cannot be carved from {total_rbs} RBs"),
        ));
    }
    if coordinated_flags.len() != num_groups {
        return Err(Error::config(
            "band.coordinated",
            format!(
                "expected {num_groups} flags, got {}",
                coordinated_flags.len()
            ),
        ));
    }
    if !(rb_bandwidth_hz.is_finite() && rb_bandwidth_hz > 0.0) {
        return Err(Error::config("band.rb_bandwidth_hz", "must be positive"));
    }

    let base = total_rbs / num_groups;
    let remainder = total_rbs % num_groups;
    let mut start = 0;
    let groups = coordinated_flags
        .iter()
        .enumerate()
        .map(|(index, &coordinated)| {
            let size = base + usize::from(index < remainder);
            let g = FrequencyGroup {
                index,
                rb_range: start..start + size,
                coordinated,
            };
            start += size;
            g
        })
        .collect();

    Ok(BandPlan {
        total_rbs,
        groups,
        rb_bandwidth_hz,
    })
}

/// Role an RB plays under the current allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Role {
    Tn,
    Guard,
    Ntn,
    /// RB of an uncoordinated group, usable by both systems.
    Shared,
}

/// Split of one coordinated group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroupAllocation {
    pub tn_rbs: usize,
    pub guard_rbs: usize,
    pub ntn_rbs: usize,
}

impl GroupAllocation {
    pub fn total(&self) -> usize {
        self.tn_rbs + self.guard_rbs + self.ntn_rbs
    }

    pub fn tn_range(&self, group: &FrequencyGroup) -> Range<usize> {
        let s = group.rb_range.start;
        s..s + self.tn_rbs
    }

    pub fn guard_range(&self, group: &FrequencyGroup) -> Range<usize> {
        let s = group.rb_range.start + self.tn_rbs;
        s..s + self.guard_rbs
    }

    pub fn ntn_range(&self, group: &FrequencyGroup) -> Range<usize> {
        let s = group.rb_range.start + self.tn_rbs + self.guard_rbs;
        s..s + self.ntn_rbs
    }

    pub fn role_of(&self, group: &FrequencyGroup, rb: usize) -> Role {
        let offset = rb - group.rb_range.start;
        if offset < self.tn_rbs {
            Role::Tn
        } else if offset < self.tn_rbs + self.guard_rbs {
            Role::Guard
        } else {
            Role::Ntn
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AllocationState {
    /// Indexed by group; `None` for uncoordinated groups.
    pub groups: Vec<Option<GroupAllocation>>,
    /// RB index -> first epoch at which the RB is usable again.
    pub guard_timed: BTreeMap<usize, u64>,
    pub version: u64,
}

impl AllocationState {
    pub fn role_of(&self, plan: &BandPlan, rb: usize) -> Role {
        let gi = plan.group_of(rb);
        match &self.groups[gi] {
            Some(alloc) => alloc.role_of(&plan.groups[gi], rb),
            None => Role::Shared,
        }
    }

    /// True while `rb` is blacked out by a recent role change.
    pub fn is_guard_timed(&self, rb: usize, epoch: u64) -> bool {
        self.guard_timed.get(&rb).is_some_and(|&expiry| epoch < expiry)
    }

    /// Drops guard-time entries that are no longer active at `epoch`.
    pub fn expire_guard_time(&mut self, epoch: u64) {
        self.guard_timed.retain(|_, expiry| epoch < *expiry);
    }

    /// TN RBs available across the whole band (TN ranges plus shared groups).
    pub fn tn_total(&self, plan: &BandPlan) -> usize {
        plan.groups
            .iter()
            .zip(&self.groups)
            .map(|(g, a)| a.map_or(g.size(), |a| a.tn_rbs))
            .sum()
    }
}

/// Equal split of every coordinated group; the odd RB goes to NTN. The split
/// is pulled inside the minimums when they are lopsided.
pub fn initial_allocation(plan: &BandPlan, cfg: &CdssConfig) -> Result<AllocationState> {
    let groups = plan
        .groups
        .iter()
        .map(|g| {
            if !g.coordinated {
                return Ok(None);
            }
            let needed = cfg.tn_min + cfg.ntn_min + cfg.guard_rbs;
            if g.size() < needed {
                return Err(Error::config(
                    format!("band.groups[{}]", g.index),
                    format!(
                        "group {} has {} RBs but tn_min + ntn_min + guard_rbs = {}",
                        g.index,
                        g.size(),
                        needed
                    ),
                ));
            }
            let usable = g.size() - cfg.guard_rbs;
            let tn_rbs = (usable / 2).clamp(cfg.tn_min, usable - cfg.ntn_min);
            Ok(Some(GroupAllocation {
                tn_rbs,
                guard_rbs: cfg.guard_rbs,
                ntn_rbs: usable - tn_rbs,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AllocationState {
        groups,
        guard_timed: BTreeMap::new(),
        version: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    GroupCount { expected: usize, found: usize },
    CoordinationMismatch { group: usize },
    Conservation { group: usize, total: usize, size: usize },
    TnBelowMinimum { group: usize, tn_rbs: usize, min: usize },
    NtnBelowMinimum { group: usize, ntn_rbs: usize, min: usize },
    GuardWidth { group: usize, guard_rbs: usize, expected: usize },
    RangeOverlap { group: usize },
    GuardTimeOutsideBand { rb: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GroupCount { expected, found } => {
                write!(f, "state has {found} groups, plan has {expected}")
            }
            Violation::CoordinationMismatch { group } => {
                write!(f, "group {group}: coordination flag disagrees with state")
            }
            Violation::Conservation { group, total, size } => {
                write!(f, "group {group}: tn + guard + ntn = {total} != size {size}")
            }
            Violation::TnBelowMinimum { group, tn_rbs, min } => {
                write!(f, "group {group}: tn_rbs {tn_rbs} < tn_min {min}")
            }
            Violation::NtnBelowMinimum { group, ntn_rbs, min } => {
                write!(f, "group {group}: ntn_rbs {ntn_rbs} < ntn_min {min}")
            }
            Violation::GuardWidth {
                group,
                guard_rbs,
                expected,
            } => write!(f, "group {group}: guard width {guard_rbs} != {expected}"),
            Violation::RangeOverlap { group } => {
                write!(f, "group {group}: TN, guard and NTN ranges overlap or leave the group")
            }
            Violation::GuardTimeOutsideBand { rb } => {
                write!(f, "guard-timed RB {rb} is outside the band")
            }
        }
    }
}

/// Checks every structural invariant of `state`. An empty list means valid.
pub fn validate_allocation(
    state: &AllocationState,
    plan: &BandPlan,
    cfg: &CdssConfig,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if state.groups.len() != plan.groups.len() {
        out.push(Violation::GroupCount {
            expected: plan.groups.len(),
            found: state.groups.len(),
        });
        return out;
    }
    for (g, alloc) in plan.groups.iter().zip(&state.groups) {
        let Some(a) = alloc else {
            if g.coordinated {
                out.push(Violation::CoordinationMismatch { group: g.index });
            }
            continue;
        };
        if !g.coordinated {
            out.push(Violation::CoordinationMismatch { group: g.index });
            continue;
        }
        if a.total() != g.size() {
            out.push(Violation::Conservation {
                group: g.index,
                total: a.total(),
                size: g.size(),
            });
        }
        if a.tn_rbs < cfg.tn_min {
            out.push(Violation::TnBelowMinimum {
                group: g.index,
                tn_rbs: a.tn_rbs,
                min: cfg.tn_min,
            });
        }
        if a.ntn_rbs < cfg.ntn_min {
            out.push(Violation::NtnBelowMinimum {
                group: g.index,
                ntn_rbs: a.ntn_rbs,
                min: cfg.ntn_min,
            });
        }
        if a.guard_rbs != cfg.guard_rbs {
            out.push(Violation::GuardWidth {
                group: g.index,
                guard_rbs: a.guard_rbs,
                expected: cfg.guard_rbs,
            });
        }
        let (tn, guard, ntn) = (a.tn_range(g), a.guard_range(g), a.ntn_range(g));
        let ordered = tn.end <= guard.start && guard.end <= ntn.start;
        let inside = tn.start >= g.rb_range.start && ntn.end <= g.rb_range.end;
        if !(ordered && inside) {
            out.push(Violation::RangeOverlap { group: g.index });
        }
    }
    for &rb in state.guard_timed.keys() {
        if rb >= plan.total_rbs {
            out.push(Violation::GuardTimeOutsideBand { rb });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(plan: &BandPlan) -> Vec<usize> {
        plan.groups.iter().map(FrequencyGroup::size).collect()
    }

    #[test]
    fn default_band_splits_54_53_53() {
        let plan = build_band_plan(160, 3, &[true, true, false], 180e3).unwrap();
        assert_eq!(sizes(&plan), vec![54, 53, 53]);
        assert_eq!(plan.groups[1].rb_range, 54..107);
        assert!(!plan.groups[2].coordinated);
    }

    #[test]
    fn single_group_covers_band() {
        let plan = build_band_plan(10, 1, &[true], 180e3).unwrap();
        assert_eq!(plan.groups[0].rb_range, 0..10);
    }

    #[test]
    fn remainder_goes_to_low_groups() {
        let plan = build_band_plan(7, 3, &[true; 3], 180e3).unwrap();
        assert_eq!(sizes(&plan), vec![3, 2, 2]);
    }

    #[test]
    fn bad_band_inputs_rejected() {
        assert!(matches!(
            build_band_plan(0, 1, &[true], 1.0),
            Err(Error::Config { .. })
        ));
        assert!(build_band_plan(10, 0, &[], 1.0).is_err());
        assert!(build_band_plan(10, 2, &[true], 1.0).is_err());
    }

    #[test]
    fn initial_split_rounds_toward_ntn() {
        let cfg = CdssConfig::default();
        let plan = build_band_plan(107, 2, &[true, true], 180e3).unwrap();
        let st = initial_allocation(&plan, &cfg).unwrap();
        assert_eq!(
            st.groups[0],
            Some(GroupAllocation { tn_rbs: 25, guard_rbs: 3, ntn_rbs: 26 })
        );
        assert_eq!(
            st.groups[1],
            Some(GroupAllocation { tn_rbs: 25, guard_rbs: 3, ntn_rbs: 25 })
        );
        assert!(st.guard_timed.is_empty());
        assert_eq!(st.version, 0);
        assert!(validate_allocation(&st, &plan, &cfg).is_empty());
    }

    #[test]
    fn infeasible_minimums_name_the_group() {
        let cfg = CdssConfig {
            tn_min: 12,
            ntn_min: 6,
            ..CdssConfig::default()
        };
        let plan = build_band_plan(40, 2, &[false, true], 180e3).unwrap();
        let err = initial_allocation(&plan, &cfg).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "band.groups[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_flags_conservation_and_minimum() {
        let cfg = CdssConfig::default();
        let plan = build_band_plan(53, 1, &[true], 180e3).unwrap();
        let mut st = initial_allocation(&plan, &cfg).unwrap();
        st.groups[0] = Some(GroupAllocation { tn_rbs: 53, guard_rbs: 3, ntn_rbs: 0 });
        let v = validate_allocation(&st, &plan, &cfg);
        assert!(v.contains(&Violation::Conservation { group: 0, total: 56, size: 53 }));

        st.groups[0] = Some(GroupAllocation { tn_rbs: 46, guard_rbs: 3, ntn_rbs: 4 });
        let v = validate_allocation(&st, &plan, &cfg);
        assert_eq!(
            v,
            vec![Violation::NtnBelowMinimum { group: 0, ntn_rbs: 4, min: 6 }]
        );
    }

    #[test]
    fn roles_follow_layout() {
        let cfg = CdssConfig::default();
        let plan = build_band_plan(160, 3, &[true, true, false], 180e3).unwrap();
        let st = initial_allocation(&plan, &cfg).unwrap();
        assert_eq!(st.role_of(&plan, 0), Role::Tn);
        assert_eq!(st.role_of(&plan, 25), Role::Guard);
        assert_eq!(st.role_of(&plan, 28), Role::Ntn);
        assert_eq!(st.role_of(&plan, 54), Role::Tn);
        assert_eq!(st.role_of(&plan, 159), Role::Shared);
        assert_eq!(st.tn_total(&plan), 25 + 25 + 53);
    }

    proptest! {
        #[test]
        fn plan_sizes_balanced(total in 1usize..2000, groups in 1usize..12) {
            prop_assume!(groups <= total);
            let plan = build_band_plan(total, groups, &vec![true; groups], 1.0).unwrap();
            let s = sizes(&plan);
            prop_assert_eq!(s.iter().sum::<usize>(), total);
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            let mut next = 0;
            for g in &plan.groups {
                prop_assert_eq!(g.rb_range.start, next);
                prop_assert!(!g.rb_range.is_empty());
                next = g.rb_range.end;
            }
            prop_assert_eq!(next, total);
        }

        #[test]
        fn layout_partitions_group(size in 3usize..200, tn in 0usize..200, guard in 0usize..5) {
            prop_assume!(tn + guard <= size);
            let g = FrequencyGroup { index: 0, rb_range: 10..10 + size, coordinated: true };
            let a = GroupAllocation { tn_rbs: tn, guard_rbs: guard, ntn_rbs: size - tn - guard };
            let mut covered: Vec<usize> = a.tn_range(&g).chain(a.guard_range(&g)).chain(a.ntn_range(&g)).collect();
            covered.sort_unstable();
            prop_assert_eq!(covered, g.rb_range.clone().collect::<Vec<_>>());
        }
    }
}
