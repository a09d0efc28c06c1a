//! Block-diagonal phase-shifter precoder and layout-dependent array gain.
//!
//! Every panel feeds one RF chain, so the analog matrix `A` (N × N_RF) has
//! one column per panel and the column of panel `p` is supported only on
//! that panel's `N_sub` elements. Only those per-panel vectors are stored.

use num_complex::Complex64;

use crate::channel::{path_length, UserGeometry, Waveband};
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, SPEED_OF_LIGHT};

/// Injective map from users to panels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    panel_of_user: Vec<usize>,
    num_panels: usize,
}

impl Assignment {
    pub fn new(panel_of_user: Vec<usize>, num_panels: usize) -> Result<Self> {
        let mut used = vec![false; num_panels];
        for &p in &panel_of_user {
            if p >= num_panels {
                return Err(Error::Config(format!("panel {p} out of range ({num_panels} panels)")));
            }
            if std::mem::replace(&mut used[p], true) {
                return Err(Error::Config(format!("panel {p} assigned to two users")));
            }
        }
        Ok(Self {
            panel_of_user,
            num_panels,
        })
    }

    pub fn panel(&self, user: usize) -> usize {
        self.panel_of_user[user]
    }

    pub fn user_of_panel(&self, panel: usize) -> Option<usize> {
        self.panel_of_user.iter().position(|&p| p == panel)
    }

    pub fn num_users(&self) -> usize {
        self.panel_of_user.len()
    }

    pub fn num_panels(&self) -> usize {
        self.num_panels
    }

    pub fn panels(&self) -> &[usize] {
        &self.panel_of_user
    }
}

/// `|h_{c,k}ᴴ 1_p|`: magnitude of the center-frequency steering vector of
/// user `u` summed over panel `p` with uniform weights.
pub fn uniform_panel_response(layout: &ArrayLayout, band: &Waveband, u: &UserGeometry, panel: usize) -> f64 {
    let k = 2.0 * std::f64::consts::PI * band.center / SPEED_OF_LIGHT;
    layout
        .panel_elements_yz(panel)
        .iter()
        .map(|p| Complex64::from_polar(1.0, k * path_length(p, u)))
        .sum::<Complex64>()
        .norm()
}

/// Greedy user-to-panel assignment. Users are served in index order; each
/// takes the free panel with the largest [`uniform_panel_response`], ties
/// going to the lower panel index.
pub fn assign_users(layout: &ArrayLayout, band: &Waveband, users: &[UserGeometry]) -> Result<Assignment> {
    let n_rf = layout.num_panels();
    if users.len() > n_rf {
        return Err(Error::Config(format!(
            "{} users exceed {} RF chains",
            users.len(),
            n_rf
        )));
    }
    let mut free = vec![true; n_rf];
    let mut chosen = Vec::with_capacity(users.len());
    for u in users {
        let mut best: Option<(usize, f64)> = None;
        for p in (0..n_rf).filter(|&p| free[p]) {
            let score = uniform_panel_response(layout, band, u, p);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((p, score));
            }
        }
        let (p, _) = best.expect("a free panel exists while K <= N_RF");
        free[p] = false;
        chosen.push(p);
    }
    Assignment::new(chosen, n_rf)
}

/// Per-panel unit-modulus analog weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogPrecoder {
    columns: Vec<Vec<Complex64>>,
}

impl AnalogPrecoder {
    pub fn from_columns(columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let n_sub = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n_sub) {
            return Err(Error::DimensionMismatch {
                expected: n_sub,
                got: bad.len(),
            });
        }
        Ok(Self { columns })
    }

    /// Weights of panel `p` (length `N_sub`).
    pub fn column(&self, panel: usize) -> &[Complex64] {
        &self.columns[panel]
    }

    pub fn num_panels(&self) -> usize {
        self.columns.len()
    }

    pub fn elements_per_panel(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Dense `N × N_RF` matrix, row major.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n_sub = self.elements_per_panel();
        let n_rf = self.num_panels();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n_rf]; n_sub * n_rf];
        for (p, col) in self.columns.iter().enumerate() {
            for (e, a) in col.iter().enumerate() {
                out[p * n_sub + e][p] = *a;
            }
        }
        out
    }

    /// `Aᴴ h`, i.e. the vector whose conjugate transpose is `hᴴ A`.
    pub fn project(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        let n_sub = self.elements_per_panel();
        if h.len() != n_sub * self.num_panels() {
            return Err(Error::DimensionMismatch {
                expected: n_sub * self.num_panels(),
                got: h.len(),
            });
        }
        Ok(self
            .columns
            .iter()
            .zip(h.chunks(n_sub))
            .map(|(a, h)| a.iter().zip(h).map(|(a, h)| a.conj() * h).sum())
            .collect())
    }

    /// Same precoder with an extra per-element phase rotation `exp(j φ_e)`,
    /// canonical element order.
    pub fn rotated(&self, phases: &[f64]) -> AnalogPrecoder {
        let n_sub = self.elements_per_panel();
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(p, col)| {
                col.iter()
                    .enumerate()
                    .map(|(e, a)| a * Complex64::from_polar(1.0, phases[p * n_sub + e]))
                    .collect()
            })
            .collect();
        AnalogPrecoder { columns }
    }
}

/// Phase shifters set to the center-frequency steering phases of each
/// panel's user, `exp(−j 2π f_c d / c0)`, so that `b_cᴴ a` adds coherently.
/// Unassigned panels get all-ones weights.
pub fn conjugate_steering(
    layout: &ArrayLayout,
    band: &Waveband,
    users: &[UserGeometry],
    assignment: &Assignment,
) -> Result<AnalogPrecoder> {
    if assignment.num_users() != users.len() || assignment.num_panels() != layout.num_panels() {
        return Err(Error::DimensionMismatch {
            expected: users.len(),
            got: assignment.num_users(),
        });
    }
    let k = 2.0 * std::f64::consts::PI * band.center / SPEED_OF_LIGHT;
    let columns = (0..layout.num_panels())
        .map(|p| match assignment.user_of_panel(p) {
            Some(user) => layout
                .panel_elements_yz(p)
                .iter()
                .map(|e| Complex64::from_polar(1.0, -k * path_length(e, &users[user])))
                .collect(),
            None => vec![Complex64::new(1.0, 0.0); layout.elements_per_panel()],
        })
        .collect();
    AnalogPrecoder::from_columns(columns)
}

/// Path lengths from `u` to the elements of one panel, canonical order.
pub fn panel_path_lengths(layout: &ArrayLayout, u: &UserGeometry, panel: usize) -> Vec<f64> {
    layout
        .panel_elements_yz(panel)
        .iter()
        .map(|p| path_length(p, u))
        .collect()
}

/// Residual angular wavenumbers `2π (f_l − f_c) / c0`, one per subcarrier.
pub fn residual_wavenumbers(band: &Waveband) -> Vec<f64> {
    band.frequencies()
        .iter()
        .map(|f| 2.0 * std::f64::consts::PI * (f - band.center) / SPEED_OF_LIGHT)
        .collect()
}

/// `|Σ_e exp(j ω d_e)|` for one residual wavenumber.
pub fn residual_gain(omega: f64, distances: &[f64]) -> f64 {
    distances
        .iter()
        .map(|d| Complex64::from_polar(1.0, omega * d))
        .sum::<Complex64>()
        .norm()
}

/// Gain on every subcarrier of a conjugate-steered panel with the given
/// (possibly delay-compensated) element path lengths.
pub fn residual_gain_profile(band: &Waveband, distances: &[f64]) -> Vec<f64> {
    residual_wavenumbers(band)
        .into_iter()
        .map(|w| residual_gain(w, distances))
        .collect()
}

/// `J_l` for 1-based subcarrier `l`: array gain of panel `p` conjugate-steered
/// toward `u`, in `[0, N_sub]`.
pub fn per_subcarrier_gain(
    layout: &ArrayLayout,
    band: &Waveband,
    l: usize,
    u: &UserGeometry,
    panel: usize,
) -> Result<f64> {
    let f = crate::channel::subcarrier_frequency(band, l)?;
    let omega = 2.0 * std::f64::consts::PI * (f - band.center) / SPEED_OF_LIGHT;
    Ok(residual_gain(omega, &panel_path_lengths(layout, u, panel)))
}

/// `J_l` for all subcarriers.
pub fn gain_profile(layout: &ArrayLayout, band: &Waveband, u: &UserGeometry, panel: usize) -> Vec<f64> {
    residual_gain_profile(band, &panel_path_lengths(layout, u, panel))
}

/// Band-averaged gain `(1/L) Σ_l J_l`.
pub fn average_gain(layout: &ArrayLayout, band: &Waveband, u: &UserGeometry, panel: usize) -> f64 {
    let g = gain_profile(layout, band, u, panel);
    g.iter().sum::<f64>() / g.len() as f64
}

/// [`average_gain`] divided by `N_sub`, in `[0, 1]`.
pub fn normalized_average_gain(layout: &ArrayLayout, band: &Waveband, u: &UserGeometry, panel: usize) -> f64 {
    average_gain(layout, band, u, panel) / layout.elements_per_panel() as f64
}
