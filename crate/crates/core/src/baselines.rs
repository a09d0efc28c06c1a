//! Comparison schemes: fixed nominal layout with phase shifters only (FPA),
//! and the same layout with ideal true-time-delay branches (FPA+TTD).

use serde::{Deserialize, Serialize};

use crate::analog::{conjugate_steering, panel_path_lengths, residual_gain, residual_wavenumbers, AnalogPrecoder, Assignment};
use crate::channel::{UserGeometry, Waveband};
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, SPEED_OF_LIGHT};
use crate::pipeline::{AnalogDesign, Scenario, SchemeResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtdConfig {
    pub branches_per_panel: usize,
}

impl Default for TtdConfig {
    fn default() -> Self {
        Self { branches_per_panel: 8 }
    }
}

impl TtdConfig {
    pub fn check(&self) -> Result<()> {
        if self.branches_per_panel == 0 {
            return Err(Error::Config("ttd.branches_per_panel must be positive".into()));
        }
        Ok(())
    }
}

/// Contiguous split of `tiles` tiles into `min(branches, tiles)` blocks whose
/// sizes differ by at most one (larger blocks first). Entry `t` is the
/// branch of tile `t`.
pub fn branch_partition(tiles: usize, branches: usize) -> Vec<usize> {
    let g = branches.min(tiles).max(1);
    let base = tiles / g;
    let extra = tiles % g;
    let mut out = Vec::with_capacity(tiles);
    for b in 0..g {
        let size = base + usize::from(b < extra);
        out.extend(std::iter::repeat_n(b, size));
    }
    out
}

/// Branch delays `τ_g = (d̄_g − min_g' d̄_g') / c0` of one panel steered at
/// `user`, where `d̄_g` is the mean element path length of branch `g`.
pub fn ttd_delays(layout: &ArrayLayout, panel: usize, user: &UserGeometry, cfg: &TtdConfig) -> Vec<f64> {
    let partition = branch_partition(layout.tiles_per_panel(), cfg.branches_per_panel);
    let groups = partition.last().map_or(0, |g| g + 1);
    let n_e = layout.elements_per_tile();
    let d = panel_path_lengths(layout, user, panel);
    let mut sum = vec![0.0; groups];
    let mut count = vec![0usize; groups];
    for (t, &g) in partition.iter().enumerate() {
        sum[g] += d[t * n_e..(t + 1) * n_e].iter().sum::<f64>();
        count[g] += n_e;
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect();
    let reference = mean.iter().copied().fold(f64::INFINITY, f64::min);
    mean.iter().map(|m| (m - reference) / SPEED_OF_LIGHT).collect()
}

/// Delay of every element of one panel, canonical order.
pub fn element_delays(layout: &ArrayLayout, delays: &[f64], cfg: &TtdConfig) -> Vec<f64> {
    let n_e = layout.elements_per_tile();
    branch_partition(layout.tiles_per_panel(), cfg.branches_per_panel)
        .into_iter()
        .flat_map(|g| std::iter::repeat_n(delays[g], n_e))
        .collect()
}

/// Per-panel branch delays for an assignment; unserved panels get zeros.
pub fn panel_delays(
    layout: &ArrayLayout,
    users: &[UserGeometry],
    assignment: &Assignment,
    cfg: &TtdConfig,
) -> Vec<Vec<f64>> {
    let groups = branch_partition(layout.tiles_per_panel(), cfg.branches_per_panel)
        .last()
        .map_or(0, |g| g + 1);
    (0..layout.num_panels())
        .map(|p| match assignment.user_of_panel(p) {
            Some(k) => ttd_delays(layout, p, &users[k], cfg),
            None => vec![0.0; groups],
        })
        .collect()
}

/// Conjugate steering plus the branch phase `exp(−j 2π (f − f_c) τ_g)`.
pub fn ttd_precoder(
    base: &AnalogPrecoder,
    layout: &ArrayLayout,
    delays: &[Vec<f64>],
    cfg: &TtdConfig,
    frequency_offset: f64,
) -> AnalogPrecoder {
    let phases: Vec<f64> = delays
        .iter()
        .flat_map(|d| element_delays(layout, d, cfg))
        .map(|tau| -2.0 * std::f64::consts::PI * frequency_offset * tau)
        .collect();
    base.rotated(&phases)
}

/// `J_l` of a TTD-compensated panel on every subcarrier.
pub fn ttd_gain_profile(
    layout: &ArrayLayout,
    band: &Waveband,
    user: &UserGeometry,
    panel: usize,
    cfg: &TtdConfig,
) -> Vec<f64> {
    let delays = ttd_delays(layout, panel, user, cfg);
    let compensated: Vec<f64> = panel_path_lengths(layout, user, panel)
        .iter()
        .zip(element_delays(layout, &delays, cfg))
        .map(|(d, tau)| d - SPEED_OF_LIGHT * tau)
        .collect();
    residual_wavenumbers(band)
        .into_iter()
        .map(|w| residual_gain(w, &compensated))
        .collect()
}

/// Nominal layout with conjugate steering.
pub fn fpa_design(scenario: &Scenario) -> Result<AnalogDesign> {
    let assignment = scenario.assignment()?;
    let analog = conjugate_steering(&scenario.layout, &scenario.band, &scenario.users, &assignment)?;
    Ok(AnalogDesign {
        layout: scenario.layout.clone(),
        assignment,
        analog: vec![analog],
        trace: None,
    })
}

/// Nominal layout with conjugate steering and per-subcarrier branch delays.
pub fn ttd_design(scenario: &Scenario, cfg: &TtdConfig) -> Result<AnalogDesign> {
    cfg.check()?;
    let assignment = scenario.assignment()?;
    let layout = &scenario.layout;
    let base = conjugate_steering(layout, &scenario.band, &scenario.users, &assignment)?;
    let delays = panel_delays(layout, &scenario.users, &assignment, cfg);
    let analog = scenario
        .band
        .frequencies()
        .iter()
        .map(|f| ttd_precoder(&base, layout, &delays, cfg, f - scenario.band.center))
        .collect();
    Ok(AnalogDesign {
        layout: layout.clone(),
        assignment,
        analog,
        trace: None,
    })
}

/// Nominal layout, conjugate steering, WMMSE.
pub fn fpa_pipeline(scenario: &Scenario) -> Result<SchemeResult> {
    fpa_design(scenario)?.evaluate(scenario)
}

/// Nominal layout, conjugate steering with per-subcarrier branch delays,
/// WMMSE on the frequency-dependent effective channels.
pub fn ttd_pipeline(scenario: &Scenario, cfg: &TtdConfig) -> Result<SchemeResult> {
    ttd_design(scenario, cfg)?.evaluate(scenario)
}
