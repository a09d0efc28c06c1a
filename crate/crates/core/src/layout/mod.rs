//! Tile-wise layout optimization by successive convex approximation.
//!
//! For each served panel the tiles are updated one at a time with the rest
//! frozen. Every inner iteration evaluates the per-subcarrier gains, keeps
//! the near-worst subcarriers, builds concave quadratic models of their
//! squared gains, linearizes the spacing constraints around the current
//! translation and solves the resulting 2-D max-min problem. A step is
//! accepted only if the true band-minimum gain does not drop; otherwise the
//! trust square around the current translation is halved and the
//! subproblem re-solved.

pub mod subproblem;
pub mod surrogate;

use std::io::Write;

use log::warn;
use nalgebra::Vector2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analog::{residual_wavenumbers, Assignment};
use crate::channel::{path_length, UserGeometry, Waveband};
use crate::error::{Error, Result};
use crate::geometry::{translation_box, validate_layout, ArrayLayout, TranslationBox};

pub use subproblem::{linearized_spacing, solve_tile_subproblem, Halfspace, SubproblemSolution};
pub use surrogate::{
    concavify, gain_gradient_hessian, max_eigenvalue_sym2, near_worst_set, squared_gain_q,
    SurrogateModel, SurrogateTerm, ThresholdMode, TileObjective,
};

/// Settings of the tile-wise SCA loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaConfig {
    /// Inner iterations per tile (`V_max`).
    pub max_inner: usize,
    /// Stop a tile once its translation moves by at most this much, meters.
    pub tolerance: f64,
    /// Near-worst threshold `ε_J`.
    pub near_worst_threshold: f64,
    pub near_worst_mode: ThresholdMode,
    /// Sweeps over all tiles of a panel.
    pub outer_sweeps: usize,
    /// Initial half-width of the trust square, meters.
    pub trust_radius: f64,
    /// Relative value tolerance of the subproblem solver.
    pub subproblem_tol: f64,
    /// Trust-square halvings before a tile update is abandoned.
    pub max_shrinks: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            max_inner: 20,
            tolerance: 1e-3,
            near_worst_threshold: 0.01,
            near_worst_mode: ThresholdMode::Absolute,
            outer_sweeps: 3,
            trust_radius: 0.03,
            subproblem_tol: 1e-6,
            max_shrinks: 10,
        }
    }
}

impl ScaConfig {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("tolerance", self.tolerance),
            ("trust_radius", self.trust_radius),
            ("subproblem_tol", self.subproblem_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("sca.{name} must be positive, got {v}")));
            }
        }
        if !(self.near_worst_threshold >= 0.0) {
            return Err(Error::Config("sca.near_worst_threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub user: usize,
    pub panel: usize,
    pub tile: usize,
    /// 0 for the initial state of a panel, then `1..=V_max` per tile visit.
    pub inner_iter: usize,
    /// `min_l J_l` over the whole band after this iteration.
    pub min_j: f64,
    /// `Σ_l J_l` after this iteration.
    pub sum_j: f64,
    pub delta: Vector2<f64>,
    pub accepted: bool,
    /// Trust radius of the accepted solve (the smallest one tried otherwise).
    pub trust_radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str =
    "user,panel,tile,inner_iter,min_J,sum_J,delta_y,delta_z,accepted,trust_radius";

impl Trace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6e}",
                r.user,
                r.panel,
                r.tile,
                r.inner_iter,
                r.min_j,
                r.sum_j,
                r.delta.x,
                r.delta.y,
                r.accepted,
                r.trust_radius
            )?;
        }
        Ok(())
    }

    /// Rows belonging to one user, in iteration order.
    pub fn for_user(&self, user: usize) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.user == user)
    }
}

/// Complex residual-phase sums of every tile on every subcarrier, kept so a
/// single tile can be swapped without recomputing the others.
struct PanelState<'a> {
    user: &'a UserGeometry,
    center: Vector2<f64>,
    offsets: &'a [Vector2<f64>],
    omegas: &'a [f64],
    deltas: Vec<Vector2<f64>>,
    contributions: Vec<Vec<Complex64>>,
}

impl<'a> PanelState<'a> {
    fn tile_contribution(&self, delta: &Vector2<f64>) -> Vec<Complex64> {
        let distances: Vec<f64> = self
            .offsets
            .iter()
            .map(|o| path_length(&(self.center + delta + o), self.user))
            .collect();
        self.omegas
            .iter()
            .map(|w| distances.iter().map(|d| Complex64::from_polar(1.0, w * d)).sum())
            .collect()
    }

    /// Gains `J_l` with tile `tile` replaced by `candidate` (if given).
    /// Tiles are always summed in index order so a candidate's profile is
    /// bit-identical to the profile after it is accepted.
    fn gains_with(&self, tile: usize, candidate: Option<&[Complex64]>) -> Vec<f64> {
        (0..self.omegas.len())
            .map(|l| {
                let mut s = Complex64::new(0.0, 0.0);
                for (t, c) in self.contributions.iter().enumerate() {
                    s += match candidate {
                        Some(cand) if t == tile => cand[l],
                        _ => c[l],
                    };
                }
                s.norm()
            })
            .collect()
    }

    fn gains(&self) -> Vec<f64> {
        self.gains_with(usize::MAX, None)
    }

    fn objective(&self, tile: usize) -> TileObjective {
        let rest = (0..self.omegas.len())
            .map(|l| {
                self.contributions
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| *t != tile)
                    .map(|(_, c)| c[l])
                    .sum()
            })
            .collect();
        TileObjective::new(self.user, self.center, self.offsets.to_vec(), self.omegas.to_vec(), rest)
    }
}

fn summarize(gains: &[f64]) -> (f64, f64) {
    (
        gains.iter().copied().fold(f64::INFINITY, f64::min),
        gains.iter().sum(),
    )
}

/// Deterministic replacement normal for a degenerate spacing linearization.
fn fallback_normal(panel: usize, tile: usize, other: usize) -> Vector2<f64> {
    let seed = ((panel as u64) << 40) ^ ((tile as u64) << 20) ^ other as u64;
    let angle = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..std::f64::consts::TAU);
    Vector2::new(angle.cos(), angle.sin())
}

#[allow(clippy::too_many_arguments)]
fn optimize_panel(
    layout: &ArrayLayout,
    bounds: &TranslationBox,
    omegas: &[f64],
    user_index: usize,
    user: &UserGeometry,
    panel: usize,
    cfg: &ScaConfig,
) -> Result<(Vec<Vector2<f64>>, Vec<TraceRow>)> {
    let c = layout.panels()[panel].center_yz;
    let mut state = PanelState {
        user,
        center: Vector2::new(c[0], c[1]),
        offsets: layout.intra_tile().offsets(),
        omegas,
        deltas: layout.translations(panel).to_vec(),
        contributions: Vec::new(),
    };
    state.contributions = state.deltas.iter().map(|d| state.tile_contribution(d)).collect();
    let d_min = layout.d_min();
    let n_tiles = state.deltas.len();

    let mut gains = state.gains();
    let (mut min_j, mut sum_j) = summarize(&gains);
    let mut rows = vec![TraceRow {
        user: user_index,
        panel,
        tile: 0,
        inner_iter: 0,
        min_j,
        sum_j,
        delta: state.deltas[0],
        accepted: true,
        trust_radius: 0.0,
    }];

    for _sweep in 0..cfg.outer_sweeps {
        let mut sweep_motion: f64 = 0.0;
        for t in 0..n_tiles {
            for v in 1..=cfg.max_inner {
                let x0 = state.deltas[t];
                let active = near_worst_set(&gains, cfg.near_worst_threshold, cfg.near_worst_mode);
                let objective = state.objective(t);
                let model = SurrogateModel::build(&objective, x0, &active)?;
                let halfspaces = (0..n_tiles)
                    .filter(|&o| o != t)
                    .map(|o| match linearized_spacing(&x0, &state.deltas[o], d_min) {
                        Ok(h) => h,
                        Err(_) => {
                            let normal = fallback_normal(panel, t, o);
                            warn!("tiles {t} and {o} of panel {panel} coincide; using a random spacing normal");
                            Halfspace {
                                normal,
                                offset: d_min + normal.dot(&state.deltas[o]),
                            }
                        }
                    })
                    .collect::<Vec<_>>();

                let mut radius = cfg.trust_radius;
                let mut outcome = None;
                for _ in 0..=cfg.max_shrinks {
                    let region = bounds.intersect_square(&x0, radius);
                    let sol = solve_tile_subproblem(&model, &region, &halfspaces, cfg.subproblem_tol)?;
                    let contribution = state.tile_contribution(&sol.delta);
                    let trial = state.gains_with(t, Some(&contribution));
                    let (trial_min, _) = summarize(&trial);
                    if trial_min >= min_j {
                        outcome = Some((sol.delta, contribution, trial));
                        break;
                    }
                    radius *= 0.5;
                }

                match outcome {
                    Some((delta, contribution, trial)) => {
                        state.deltas[t] = delta;
                        state.contributions[t] = contribution;
                        gains = trial;
                        (min_j, sum_j) = summarize(&gains);
                        let step = (delta - x0).norm();
                        sweep_motion = sweep_motion.max(step);
                        rows.push(TraceRow {
                            user: user_index,
                            panel,
                            tile: t,
                            inner_iter: v,
                            min_j,
                            sum_j,
                            delta,
                            accepted: true,
                            trust_radius: radius,
                        });
                        if step <= cfg.tolerance {
                            break;
                        }
                    }
                    None => {
                        rows.push(TraceRow {
                            user: user_index,
                            panel,
                            tile: t,
                            inner_iter: v,
                            min_j,
                            sum_j,
                            delta: x0,
                            accepted: false,
                            trust_radius: radius * 2.0,
                        });
                        break;
                    }
                }
            }
        }
        if sweep_motion <= cfg.tolerance {
            break;
        }
    }
    Ok((state.deltas, rows))
}

/// Optimize the tile translations of every served panel.
///
/// Panels are independent and are processed in parallel; the returned trace
/// is ordered by user.
pub fn optimize_layout(
    layout: &ArrayLayout,
    band: &Waveband,
    users: &[UserGeometry],
    assignment: &Assignment,
    cfg: &ScaConfig,
) -> Result<(ArrayLayout, Trace)> {
    cfg.check()?;
    let report = validate_layout(layout);
    if !report.is_ok() {
        return Err(Error::InvalidLayout(report));
    }
    if assignment.num_users() != users.len() {
        return Err(Error::DimensionMismatch {
            expected: users.len(),
            got: assignment.num_users(),
        });
    }
    let omegas = residual_wavenumbers(band);
    let results = users
        .par_iter()
        .enumerate()
        .map(|(k, u)| {
            let panel = assignment.panel(k);
            let bounds = translation_box(layout.intra_tile(), layout.panels()[panel].side)?;
            optimize_panel(layout, &bounds, &omegas, k, u, panel, cfg).map(|r| (panel, r))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = layout.clone();
    let mut trace = Trace::default();
    for (panel, (deltas, rows)) in results {
        for (t, d) in deltas.into_iter().enumerate() {
            out.set_translation(panel, t, d);
        }
        trace.rows.extend(rows);
    }
    let report = validate_layout(&out);
    if !report.is_ok() {
        return Err(Error::InvalidLayout(report));
    }
    Ok((out, trace))
}
