//! Scenario geometry: a three-site, three-sector TN cluster, the NTN beam
//! footprints, and seeded UE placement.

use rand::Rng;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::radio::{los_state, NtnBeam, Position, TnCell};
use crate::rng;

/// Where a UE was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Area {
    TnCell(usize),
    Beam(usize),
}

impl std::fmt::Display for Area {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Area::TnCell(i) => write!(f, "tn_area{i}"),
            Area::Beam(i) => write!(f, "beam_area{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ue {
    pub ue_id: usize,
    pub position: Position,
    pub area: Area,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub sites: Vec<Position>,
    pub cells: Vec<TnCell>,
    pub beams: Vec<NtnBeam>,
    pub ues: Vec<Ue>,
    /// LOS flag per UE and TN site, drawn once.
    pub los: Vec<Vec<bool>>,
}

/// Three sites on an equilateral triangle with side `isd_m`.
pub fn site_positions(isd_m: f64) -> Vec<Position> {
    vec![
        Position::new(0.0, 0.0),
        Position::new(isd_m, 0.0),
        Position::new(isd_m / 2.0, isd_m * 3f64.sqrt() / 2.0),
    ]
}

fn in_hexagon(dx: f64, dy: f64, r: f64) -> bool {
    let s3 = 3f64.sqrt();
    dy.abs() <= s3 / 2.0 * r && s3 * dx.abs() + dy.abs() <= s3 * r
}

fn sample_hexagon(rng: &mut impl Rng, center: Position, r: f64) -> Position {
    loop {
        let dx = rng.gen_range(-r..r);
        let dy = rng.gen_range(-r..r);
        if in_hexagon(dx, dy, r) {
            return Position::new(center.x + dx, center.y + dy);
        }
    }
}

fn sample_disc(rng: &mut impl Rng, center: Position, r: f64) -> Position {
    let rho = r * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    Position::new(center.x + rho * phi.cos(), center.y + rho * phi.sin())
}

impl Topology {
    /// Builds the geometry for `seed`. Placement and LOS draws use their own
    /// labeled streams and do not depend on the case.
    pub fn build(cfg: &ScenarioConfig, seed: u64) -> Self {
        let topo = &cfg.topology;
        let sites = site_positions(topo.isd_m);
        let cell_radius = topo.isd_m / 3.0;

        let mut cells = Vec::new();
        for (s, &pos) in sites.iter().enumerate() {
            for &az in &topo.sector_azimuths_deg {
                cells.push(TnCell {
                    cell_id: cells.len(),
                    site: s,
                    position: pos,
                    azimuth_deg: az,
                });
            }
        }
        let beams: Vec<NtnBeam> = topo
            .beams
            .iter()
            .enumerate()
            .map(|(i, b)| NtnBeam {
                beam_id: i,
                center: Position::new(b.x_m, b.y_m),
                group_index: b.group,
            })
            .collect();

        let mut place = rng::stream(seed, "ue-placement");
        let mut ues = Vec::new();
        for cell in &cells {
            let az = cell.azimuth_deg.to_radians();
            let center = Position::new(
                cell.position.x + cell_radius * az.cos(),
                cell.position.y + cell_radius * az.sin(),
            );
            for _ in 0..topo.ues_per_cell {
                ues.push(Ue {
                    ue_id: ues.len(),
                    position: sample_hexagon(&mut place, center, cell_radius),
                    area: Area::TnCell(cell.cell_id),
                });
            }
        }
        let beam_radius = cfg.radio.ntn_beam_3db_radius_km * 1e3;
        for beam in &beams {
            for _ in 0..topo.ues_per_beam {
                ues.push(Ue {
                    ue_id: ues.len(),
                    position: sample_disc(&mut place, beam.center, beam_radius),
                    area: Area::Beam(beam.beam_id),
                });
            }
        }

        let mut los_rng = rng::stream(seed, "los");
        let los = ues
            .iter()
            .map(|ue| {
                sites
                    .iter()
                    .map(|site| {
                        let d = ue.position.distance(site);
                        los_state(d, &cfg.radio, los_rng.gen())
                    })
                    .collect()
            })
            .collect();

        Self {
            sites,
            cells,
            beams,
            ues,
            los,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layout_counts() {
        let cfg = ScenarioConfig::default();
        let t = Topology::build(&cfg, 1);
        assert_eq!(t.cells.len(), 9);
        assert_eq!(t.beams.len(), 3);
        assert_eq!(t.ues.len(), 105);
        assert_eq!(t.los.len(), 105);
        let d01 = t.sites[0].distance(&t.sites[1]);
        let d02 = t.sites[0].distance(&t.sites[2]);
        assert!((d01 - 7500.0).abs() < 1e-9 && (d02 - 7500.0).abs() < 1e-9);
    }

    #[test]
    fn remote_beam_is_far_from_sites() {
        let cfg = ScenarioConfig::default();
        let t = Topology::build(&cfg, 1);
        let remote = &t.beams[2];
        assert!(t.sites.iter().all(|s| s.distance(&remote.center) >= 60_000.0));
    }

    #[test]
    fn ues_land_inside_their_areas() {
        let cfg = ScenarioConfig::default();
        let t = Topology::build(&cfg, 3);
        let r_cell = cfg.topology.isd_m / 3.0;
        for ue in &t.ues {
            match ue.area {
                Area::TnCell(c) => {
                    let cell = &t.cells[c];
                    assert!(ue.position.distance(&cell.position) <= 2.0 * r_cell + 1e-6);
                }
                Area::Beam(b) => {
                    assert!(ue.position.distance(&t.beams[b].center) <= 25_000.0 + 1e-6);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_geometry() {
        let cfg = ScenarioConfig::default();
        assert_eq!(Topology::build(&cfg, 9), Topology::build(&cfg, 9));
        assert_ne!(Topology::build(&cfg, 9).ues, Topology::build(&cfg, 10).ues);
    }
}
