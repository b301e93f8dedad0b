use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::levelset::{net_values, simulate_batch, StateBox};
use super::{ClosedLoop, LyapunovError, State};
use crate::nn::LyapunovNet;
use crate::par::Exec;

/// Terminal-norm threshold for a converged trajectory.
pub const SAFE_RADIUS: f64 = 1e-2;

/// Ground-truth region of attraction on a `resolution × resolution`
/// lattice over the state box (inclusive of the box edges).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoaGrid {
    pub system: ClosedLoop,
    pub bounds: StateBox,
    pub resolution: usize,
    pub horizon: usize,
    /// Row-major over `ω` then `φ`.
    pub safe: Vec<bool>,
}

fn converged(s: State) -> bool {
    s[0].hypot(s[1]) < SAFE_RADIUS
}

impl RoaGrid {
    pub fn lattice(bounds: &StateBox, resolution: usize) -> Vec<State> {
        let axis = |half: f64, i: usize| -half + 2.0 * half * i as f64 / (resolution - 1) as f64;
        (0..resolution * resolution).map(|k| [axis(bounds.phi, k % resolution), axis(bounds.omega, k / resolution)]).collect()
    }

    pub fn compute(system: &ClosedLoop, bounds: &StateBox, resolution: usize, horizon: usize, exec: Exec) -> Self {
        assert!(resolution >= 2, "grid needs at least two points per axis");
        let terminal = simulate_batch(system, &Self::lattice(bounds, resolution), horizon, exec);
        Self {
            system: *system,
            bounds: *bounds,
            resolution,
            horizon,
            safe: terminal.into_iter().map(converged).collect(),
        }
    }

    pub fn points(&self) -> Vec<State> {
        Self::lattice(&self.bounds, self.resolution)
    }

    pub fn safe_points(&self) -> Vec<State> {
        self.points().into_iter().zip(&self.safe).filter(|(_, s)| **s).map(|(p, _)| p).collect()
    }

    pub fn n_safe(&self) -> usize {
        self.safe.iter().filter(|s| **s).count()
    }

    /// Cache file keyed by dynamics, controller, box, resolution and horizon.
    pub fn cache_path(dir: &Path, system: &ClosedLoop, bounds: &StateBox, resolution: usize, horizon: usize) -> PathBuf {
        let key = serde_json::to_string(&(system, bounds, resolution, horizon)).expect("grid key serializes");
        dir.join(format!("roa_{:016x}.json", crate::seed::fnv1a(&key, 0)))
    }

    pub fn load_or_compute(
        dir: Option<&Path>,
        system: &ClosedLoop,
        bounds: &StateBox,
        resolution: usize,
        horizon: usize,
        exec: Exec,
    ) -> Result<Self, LyapunovError> {
        let Some(dir) = dir else {
            return Ok(Self::compute(system, bounds, resolution, horizon, exec));
        };
        let path = Self::cache_path(dir, system, bounds, resolution, horizon);
        let io = |source| LyapunovError::Io { path: path.display().to_string(), source };
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(io)?;
            let grid: Self = serde_json::from_str(&text).map_err(|e| LyapunovError::Cache(format!("{}: {e}", path.display())))?;
            if grid.system == *system && grid.bounds == *bounds && grid.resolution == resolution && grid.horizon == horizon {
                return Ok(grid);
            }
        }
        let grid = Self::compute(system, bounds, resolution, horizon, exec);
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(&path, serde_json::to_string(&grid).expect("grid serializes")).map_err(io)?;
        Ok(grid)
    }
}

/// `v` on the truly safe cells of a grid; the safe-set fraction at any
/// level can then be read off without re-evaluating the network.
#[derive(Clone, Debug, PartialEq)]
pub struct SafeCellValues(Vec<f64>);

impl SafeCellValues {
    pub fn new(net: &LyapunovNet, grid: &RoaGrid, exec: Exec) -> Self {
        Self(net_values(net, &grid.safe_points(), exec))
    }

    /// Fraction of truly safe cells with `v ≤ c`.
    pub fn fraction(&self, c: f64) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().filter(|v| **v <= c).count() as f64 / self.0.len() as f64
    }
}

/// `|{cells : v ≤ c and truly safe}| / |{truly safe cells}|`.
pub fn safe_set_fraction(net: &LyapunovNet, c: f64, grid: &RoaGrid, exec: Exec) -> f64 {
    SafeCellValues::new(net, grid, exec).fraction(c)
}

const RING_POINTS_PER_EDGE: usize = 32;
const C0_HORIZON: usize = 2000;

fn ring(bounds: &StateBox) -> Vec<State> {
    let n = RING_POINTS_PER_EDGE;
    let lerp = |half: f64, i: usize| -half + 2.0 * half * i as f64 / n as f64;
    let mut pts = Vec::with_capacity(4 * n);
    for i in 0..n {
        pts.push([lerp(bounds.phi, i), -bounds.omega]);
        pts.push([bounds.phi, lerp(bounds.omega, i)]);
        pts.push([-lerp(bounds.phi, i), bounds.omega]);
        pts.push([-bounds.phi, -lerp(bounds.omega, i)]);
    }
    pts
}

/// Initial safety level: the smallest `v` on the boundary of a small box
/// around the origin (a tenth of the state box, halved until every
/// boundary state is stabilized by the controller in simulation).
pub fn initial_level(system: &ClosedLoop, net: &LyapunovNet, bounds: &StateBox, exec: Exec) -> Result<f64, LyapunovError> {
    let mut small = bounds.scaled(0.1);
    for _ in 0..20 {
        let edge = ring(&small);
        if simulate_batch(system, &edge, C0_HORIZON, exec).into_iter().all(converged) {
            let c0 = net_values(net, &edge, exec).into_iter().fold(f64::INFINITY, f64::min);
            return if c0 > 0.0 { Ok(c0) } else { Err(LyapunovError::InvalidLevel { c: c0 }) };
        }
        small = small.scaled(0.5);
    }
    Err(LyapunovError::NoStableNeighbourhood)
}
