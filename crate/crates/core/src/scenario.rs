//! Networking-scenario snapshots: the cuboid, slices with their SLAs, occupied
//! ground subareas and the lattice of candidate FAP sites.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::queueing::TrafficModel;
use crate::radio::RadioConfig;

pub const DEFAULT_SITE_PITCH: f64 = 25.0;
pub const DEFAULT_ALTITUDES: [f64; 2] = [10.0, 20.0];
pub const DEFAULT_ACTIVATION_COST: f64 = 1000.0;
pub const DEFAULT_CHANNEL_BUDGET: u32 = 8;
pub const DEFAULT_CELL_SIDE: f64 = 10.0;
pub const DEFAULT_DIMS: [f64; 3] = [100.0, 100.0, 20.0];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("lattice pitch {pitch} m leaves no cell inside a {x} x {y} m footprint")]
    EmptyLattice { pitch: f64, x: f64, y: f64 },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("occupancy {occupancy} of {cells} cells places no subarea")]
    NoSubareas { occupancy: f64, cells: usize },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A network slice and its SLA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub id: u32,
    pub kind: String,
    /// bit/s per subarea
    pub throughput_demand: f64,
    /// seconds
    pub max_mean_delay: f64,
    pub target_ber: f64,
}

impl SliceSpec {
    pub fn embb(id: u32) -> Self {
        Self {
            id,
            kind: "eMBB".into(),
            throughput_demand: 20e6,
            max_mean_delay: 5e-3,
            target_ber: 1e-5,
        }
    }

    pub fn urllc(id: u32) -> Self {
        Self {
            id,
            kind: "URLLC".into(),
            throughput_demand: 4e6,
            max_mean_delay: 1e-3,
            target_ber: 1e-10,
        }
    }
}

/// The eMBB and URLLC slices used throughout the evaluation.
pub fn default_slices() -> Vec<SliceSpec> {
    vec![SliceSpec::embb(0), SliceSpec::urllc(1)]
}

/// A ground cell holding one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subarea {
    pub id: usize,
    pub center: [f64; 3],
    pub side: f64,
    pub slice_id: u32,
}

/// A lattice point where a FAP may be activated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite {
    pub id: usize,
    pub position: [f64; 3],
    pub activation_cost: f64,
    pub channel_budget: u32,
}

/// One planning snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cuboid_dims: [f64; 3],
    pub cell_side: f64,
    pub lattice_levels: Vec<f64>,
    pub slices: Vec<SliceSpec>,
    pub subareas: Vec<Subarea>,
    pub sites: Vec<CandidateSite>,
    pub radio: RadioConfig<f64>,
    pub traffic: TrafficModel,
    /// seconds
    pub reconfig_period: f64,
    pub rng_seed: u64,
    pub snapshot_index: u64,
}

impl Scenario {
    pub fn slice(&self, id: u32) -> Option<&SliceSpec> {
        self.slices.iter().find(|s| s.id == id)
    }

    pub fn slice_of(&self, subarea: &Subarea) -> Option<&SliceSpec> {
        self.slice(subarea.slice_id)
    }

    /// Distinct BER targets across slices, in slice order.
    pub fn bers(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in &self.slices {
            if !out.contains(&s.target_ber) {
                out.push(s.target_ber);
            }
        }
        out
    }

    pub fn cell_count(&self) -> usize {
        cell_grid(self.cuboid_dims, self.cell_side).map_or(0, |(nx, ny)| nx * ny)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn cell_grid(dims: [f64; 3], cell: f64) -> Option<(usize, usize)> {
    if !(cell > 0.0) {
        return None;
    }
    let nx = (dims[0] / cell + 1e-9).floor();
    let ny = (dims[1] / cell + 1e-9).floor();
    if nx < 1.0 || ny < 1.0 {
        return None;
    }
    Some((nx as usize, ny as usize))
}

/// Centers of a regular grid of sub-cuboids, row-major with altitude varying
/// fastest.
pub fn discretize_sites(
    dims: [f64; 3],
    pitch: f64,
    altitudes: &[f64],
    activation_cost: f64,
    channel_budget: u32,
) -> Result<Vec<CandidateSite>, ScenarioError> {
    if !(pitch > 0.0) {
        return Err(ScenarioError::InvalidLattice(format!("pitch must be positive, got {pitch}")));
    }
    if altitudes.is_empty() {
        return Err(ScenarioError::InvalidLattice("no altitudes".into()));
    }
    if let Some(z) = altitudes.iter().find(|&&z| !(z > 0.0 && z <= dims[2])) {
        return Err(ScenarioError::InvalidLattice(format!(
            "altitude {z} m outside (0, {}]",
            dims[2]
        )));
    }
    let (nx, ny) = cell_grid(dims, pitch).ok_or(ScenarioError::EmptyLattice {
        pitch,
        x: dims[0],
        y: dims[1],
    })?;
    let mut sites = Vec::with_capacity(nx * ny * altitudes.len());
    for row in 0..ny {
        for col in 0..nx {
            for &z in altitudes {
                sites.push(CandidateSite {
                    id: sites.len(),
                    position: [(col as f64 + 0.5) * pitch, (row as f64 + 0.5) * pitch, z],
                    activation_cost,
                    channel_budget,
                });
            }
        }
    }
    Ok(sites)
}

/// Everything needed to draw a random snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub dims: [f64; 3],
    pub cell_side: f64,
    pub occupancy: f64,
    pub slices: Vec<SliceSpec>,
    pub seed: u64,
    pub site_pitch: f64,
    pub altitudes: Vec<f64>,
    pub activation_cost: f64,
    pub channel_budget: u32,
    pub radio: RadioConfig<f64>,
    pub traffic: TrafficModel,
    pub reconfig_period: f64,
    pub snapshot_index: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            dims: DEFAULT_DIMS,
            cell_side: DEFAULT_CELL_SIDE,
            occupancy: 0.05,
            slices: default_slices(),
            seed: 0,
            site_pitch: DEFAULT_SITE_PITCH,
            altitudes: DEFAULT_ALTITUDES.to_vec(),
            activation_cost: DEFAULT_ACTIVATION_COST,
            channel_budget: DEFAULT_CHANNEL_BUDGET,
            radio: RadioConfig::default(),
            traffic: TrafficModel::default(),
            reconfig_period: 30.0,
            snapshot_index: 0,
        }
    }
}

impl GenerationParams {
    /// Default parameters with `users` occupied cells out of the footprint.
    pub fn with_users(users: usize, seed: u64) -> Self {
        let mut p = Self { seed, ..Self::default() };
        let cells = cell_grid(p.dims, p.cell_side).map_or(1, |(nx, ny)| nx * ny);
        p.occupancy = users as f64 / cells as f64;
        p
    }

    /// Recovers generation parameters from an existing snapshot.
    pub fn from_scenario(s: &Scenario) -> Self {
        let cells = s.cell_count().max(1);
        let pitch = infer_pitch(&s.sites).unwrap_or(DEFAULT_SITE_PITCH);
        let first = s.sites.first();
        Self {
            dims: s.cuboid_dims,
            cell_side: s.cell_side,
            occupancy: s.subareas.len() as f64 / cells as f64,
            slices: s.slices.clone(),
            seed: s.rng_seed,
            site_pitch: pitch,
            altitudes: s.lattice_levels.clone(),
            activation_cost: first.map_or(DEFAULT_ACTIVATION_COST, |c| c.activation_cost),
            channel_budget: first.map_or(DEFAULT_CHANNEL_BUDGET, |c| c.channel_budget),
            radio: s.radio.clone(),
            traffic: s.traffic.clone(),
            reconfig_period: s.reconfig_period,
            snapshot_index: s.snapshot_index,
        }
    }

    pub fn generate(&self) -> Result<Scenario, ScenarioError> {
        if !(self.occupancy > 0.0 && self.occupancy <= 1.0) {
            return Err(ScenarioError::InvalidParams(format!(
                "occupancy must be in (0, 1], got {}",
                self.occupancy
            )));
        }
        if self.slices.is_empty() {
            return Err(ScenarioError::InvalidParams("at least one slice required".into()));
        }
        let (nx, ny) = cell_grid(self.dims, self.cell_side).ok_or_else(|| {
            ScenarioError::InvalidParams(format!("cell side {} leaves no cells", self.cell_side))
        })?;
        let cells = nx * ny;
        let wanted = self.occupancy * cells as f64;
        if wanted < 1.0 - 1e-9 {
            return Err(ScenarioError::NoSubareas { occupancy: self.occupancy, cells });
        }
        let count = ((wanted - 1e-9).ceil() as usize).min(cells);

        let sites = discretize_sites(
            self.dims,
            self.site_pitch,
            &self.altitudes,
            self.activation_cost,
            self.channel_budget,
        )?;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut chosen = sample(&mut rng, cells, count).into_vec();
        chosen.sort_unstable();
        let subareas = chosen
            .into_iter()
            .enumerate()
            .map(|(id, cell)| {
                let (col, row) = (cell % nx, cell / nx);
                let slice = &self.slices[rng.random_range(0..self.slices.len())];
                Subarea {
                    id,
                    center: [
                        (col as f64 + 0.5) * self.cell_side,
                        (row as f64 + 0.5) * self.cell_side,
                        0.0,
                    ],
                    side: self.cell_side,
                    slice_id: slice.id,
                }
            })
            .collect();

        Ok(Scenario {
            cuboid_dims: self.dims,
            cell_side: self.cell_side,
            lattice_levels: self.altitudes.clone(),
            slices: self.slices.clone(),
            subareas,
            sites,
            radio: self.radio.clone(),
            traffic: self.traffic.clone(),
            reconfig_period: self.reconfig_period,
            rng_seed: self.seed,
            snapshot_index: self.snapshot_index,
        })
    }
}

fn infer_pitch(sites: &[CandidateSite]) -> Option<f64> {
    let x0 = sites.first()?.position[0];
    // Lattice x coordinates are (i + 0.5) * pitch.
    Some(2.0 * x0).filter(|p| *p > 0.0)
}

/// Random snapshot on the default site lattice and radio settings.
pub fn generate_random_scenario(
    dims: [f64; 3],
    cell_side: f64,
    occupancy: f64,
    slices: &[SliceSpec],
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    GenerationParams {
        dims,
        cell_side,
        occupancy,
        slices: slices.to_vec(),
        seed,
        ..GenerationParams::default()
    }
    .generate()
}

/// A violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every scenario invariant. An empty list means the scenario is valid.
pub fn validate(s: &Scenario) -> Vec<Violation> {
    let mut v = Vec::new();
    let [x, y, z] = s.cuboid_dims;
    if !(x > 0.0 && y > 0.0 && z > 0.0) {
        v.push(Violation::new("cuboid_dims", "dimensions must be positive"));
    }
    if !(s.cell_side > 0.0) {
        v.push(Violation::new("cell_side", "must be positive"));
    }
    if s.lattice_levels.iter().any(|&h| !(h > 0.0 && h <= z)) {
        v.push(Violation::new("lattice_levels", "altitude outside cuboid"));
    }

    let mut slice_ids = HashSet::new();
    for (i, sl) in s.slices.iter().enumerate() {
        let f = |name: &str| format!("slices[{i}].{name}");
        if !slice_ids.insert(sl.id) {
            v.push(Violation::new(f("id"), "duplicate slice id"));
        }
        if !(sl.throughput_demand > 0.0) {
            v.push(Violation::new(f("throughput_demand"), "must be positive"));
        }
        if !(sl.max_mean_delay > 0.0) {
            v.push(Violation::new(f("max_mean_delay"), "must be positive"));
        }
        if !(sl.target_ber > 0.0 && sl.target_ber < 1.0) {
            v.push(Violation::new(f("target_ber"), "must be in (0, 1)"));
        }
    }

    let mut cells = HashSet::new();
    let mut ids = HashSet::new();
    for (i, a) in s.subareas.iter().enumerate() {
        let f = |name: &str| format!("subareas[{i}].{name}");
        if !ids.insert(a.id) {
            v.push(Violation::new(f("id"), "duplicate subarea id"));
        }
        let [cx, cy, cz] = a.center;
        if cz != 0.0 {
            v.push(Violation::new(f("center"), "subarea not on the ground plane"));
        }
        if !(cx >= 0.0 && cx <= x && cy >= 0.0 && cy <= y) {
            v.push(Violation::new(f("center"), "subarea outside footprint"));
        } else if s.cell_side > 0.0 {
            let cell = (
                (cx / s.cell_side).floor() as i64,
                (cy / s.cell_side).floor() as i64,
            );
            if !cells.insert(cell) {
                v.push(Violation::new(f("center"), "cell already occupied"));
            }
        }
        if !slice_ids.contains(&a.slice_id) {
            v.push(Violation::new(f("slice_id"), "unresolved slice reference"));
        }
    }

    let mut site_ids = HashSet::new();
    for (i, site) in s.sites.iter().enumerate() {
        let f = |name: &str| format!("sites[{i}].{name}");
        if !site_ids.insert(site.id) {
            v.push(Violation::new(f("id"), "duplicate site id"));
        }
        let [px, py, pz] = site.position;
        if !(px >= 0.0 && px <= x && py >= 0.0 && py <= y && pz > 0.0 && pz <= z) {
            v.push(Violation::new(f("position"), "site outside cuboid"));
        }
        if !(site.activation_cost > 0.0) {
            v.push(Violation::new(f("activation_cost"), "must be positive"));
        }
        if site.channel_budget < 1 {
            v.push(Violation::new(f("channel_budget"), "must be at least 1"));
        }
    }

    for msg in s.radio.violations() {
        let (field, rule) = msg.split_once(": ").unwrap_or(("radio", msg.as_str()));
        v.push(Violation::new(field, rule));
    }
    if !(s.traffic.packet_size_bits > 0.0) {
        v.push(Violation::new("traffic.packet_size_bits", "must be positive"));
    }
    if !(s.reconfig_period >= 1.0) {
        v.push(Violation::new("reconfig_period", "must be at least 1 s"));
    } else if s.reconfig_period < 10.0 {
        log::warn!(
            "reconfiguration period {} s is not much larger than 1 s",
            s.reconfig_period
        );
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_scenario() -> Scenario {
        generate_random_scenario(DEFAULT_DIMS, 10.0, 0.2, &default_slices(), 7).unwrap()
    }

    #[test]
    fn lattice_examples() {
        let s = discretize_sites([100.0, 100.0, 20.0], 50.0, &[10.0, 20.0], 1000.0, 8).unwrap();
        assert_eq!(s.len(), 8);
        for site in &s {
            assert!([25.0, 75.0].contains(&site.position[0]));
            assert!([25.0, 75.0].contains(&site.position[1]));
            assert!([10.0, 20.0].contains(&site.position[2]));
        }
        // Altitude varies fastest, then x, then y.
        assert_eq!(s[0].position, [25.0, 25.0, 10.0]);
        assert_eq!(s[1].position, [25.0, 25.0, 20.0]);
        assert_eq!(s[2].position, [75.0, 25.0, 10.0]);
        assert_eq!(s[4].position, [25.0, 75.0, 10.0]);

        let one = discretize_sites([100.0, 100.0, 20.0], 100.0, &[10.0], 1000.0, 8).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].position, [50.0, 50.0, 10.0]);

        let dense = discretize_sites([100.0, 100.0, 20.0], 25.0, &[10.0, 20.0], 1000.0, 8).unwrap();
        assert_eq!(dense.len(), 32);
    }

    #[test]
    fn lattice_errors() {
        assert!(matches!(
            discretize_sites([100.0, 100.0, 20.0], 150.0, &[10.0], 1.0, 1),
            Err(ScenarioError::EmptyLattice { .. })
        ));
        assert!(discretize_sites([100.0, 100.0, 20.0], 0.0, &[10.0], 1.0, 1).is_err());
        assert!(discretize_sites([100.0, 100.0, 20.0], 10.0, &[], 1.0, 1).is_err());
        assert!(discretize_sites([100.0, 100.0, 20.0], 10.0, &[25.0], 1.0, 1).is_err());
    }

    #[test]
    fn lattice_count_formula_for_dividing_pitches() {
        let (x, y) = (120.0, 60.0);
        for pitch in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 10.0, 12.0, 15.0, 20.0, 30.0, 60.0] {
            for alts in [vec![5.0], vec![5.0, 10.0, 15.0]] {
                let s = discretize_sites([x, y, 20.0], pitch, &alts, 1.0, 1).unwrap();
                let expected = (x / pitch) as usize * (y / pitch) as usize * alts.len();
                assert_eq!(s.len(), expected, "pitch {pitch}");
            }
        }
    }

    #[test]
    fn occupancy_counts_from_the_evaluation() {
        let slices = default_slices();
        for (occ, n) in [(0.05, 5), (0.20, 20), (0.45, 45)] {
            let s = generate_random_scenario(DEFAULT_DIMS, 10.0, occ, &slices, 3).unwrap();
            assert_eq!(s.subareas.len(), n);
            assert!(validate(&s).is_empty());
        }
    }

    #[test]
    fn occupancy_exhaustive_on_10x10_grid() {
        let slices = default_slices();
        for pct in 1..=100u32 {
            let occ = f64::from(pct) / 100.0;
            let s = generate_random_scenario(DEFAULT_DIMS, 10.0, occ, &slices, u64::from(pct)).unwrap();
            // ceil(pct * 100 / 100) in integers.
            let expected = (pct * 100).div_ceil(100) as usize;
            assert_eq!(s.subareas.len(), expected, "occupancy {occ}");
            let cells: HashSet<(i64, i64)> = s
                .subareas
                .iter()
                .map(|a| ((a.center[0] / 10.0) as i64, (a.center[1] / 10.0) as i64))
                .collect();
            assert_eq!(cells.len(), expected);
        }
    }

    #[test]
    fn too_sparse_occupancy_fails() {
        let err = generate_random_scenario(DEFAULT_DIMS, 10.0, 0.001, &default_slices(), 1);
        assert!(matches!(err, Err(ScenarioError::NoSubareas { .. })));
        assert!(generate_random_scenario(DEFAULT_DIMS, 10.0, 0.0, &default_slices(), 1).is_err());
        assert!(generate_random_scenario(DEFAULT_DIMS, 10.0, 0.5, &[], 1).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = sample_scenario().to_json();
        let b = sample_scenario().to_json();
        assert_eq!(a, b);
        let other = generate_random_scenario(DEFAULT_DIMS, 10.0, 0.2, &default_slices(), 8).unwrap();
        assert_ne!(a, other.to_json());
    }

    #[test]
    fn json_uses_snake_case_field_names() {
        let json = sample_scenario().to_json();
        for key in [
            "\"cuboid_dims\"",
            "\"cell_side\"",
            "\"lattice_levels\"",
            "\"throughput_demand\"",
            "\"max_mean_delay\"",
            "\"target_ber\"",
            "\"slice_id\"",
            "\"activation_cost\"",
            "\"channel_budget\"",
            "\"carrier_freq\"",
            "\"reconfig_period\"",
            "\"rng_seed\"",
            "\"snapshot_index\"",
        ] {
            assert!(json.contains(key), "missing {key}");
        }
    }

    #[test]
    fn validation_examples() {
        let good = sample_scenario();
        assert!(validate(&good).is_empty());

        let mut s = good.clone();
        s.subareas[0].center[0] = 105.0;
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "subarea outside footprint");
        assert_eq!(v[0].field, "subareas[0].center");

        let mut s = good.clone();
        s.subareas[1].slice_id = 99;
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "unresolved slice reference");
    }

    #[test]
    fn validation_catches_other_rules() {
        let mut s = sample_scenario();
        s.slices[0].target_ber = 1.5;
        s.subareas[1].center = s.subareas[0].center;
        s.sites[0].activation_cost = 0.0;
        s.reconfig_period = 0.5;
        let rules: Vec<String> = validate(&s).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"must be in (0, 1)".to_string()));
        assert!(rules.contains(&"cell already occupied".to_string()));
        assert!(rules.contains(&"must be positive".to_string()));
        assert!(rules.contains(&"must be at least 1 s".to_string()));
    }

    #[test]
    fn params_recovered_from_scenario() {
        let s = sample_scenario();
        let p = GenerationParams::from_scenario(&s);
        assert_eq!(p.site_pitch, DEFAULT_SITE_PITCH);
        assert_eq!(p.generate().unwrap(), s);
    }
}
