//! Squared per-subcarrier gain of one tile, its analytic derivatives and the
//! concave quadratic model built from them.

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;

use crate::analog::residual_wavenumbers;
use crate::channel::{path_length, UserGeometry, Waveband};
use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;

/// Everything needed to evaluate `Q_l(Δ_t)` with the other tiles frozen.
#[derive(Debug, Clone)]
pub struct TileObjective {
    user: Vector3<f64>,
    user_geometry: UserGeometry,
    panel_center: Vector2<f64>,
    offsets: Vec<Vector2<f64>>,
    omegas: Vec<f64>,
    rest: Vec<Complex64>,
}

impl TileObjective {
    /// `omegas` are residual wavenumbers `2π (f_l − f_c) / c0`; `rest[l]` is
    /// the complex residual sum of every other tile on the panel.
    pub fn new(
        user: &UserGeometry,
        panel_center: Vector2<f64>,
        offsets: Vec<Vector2<f64>>,
        omegas: Vec<f64>,
        rest: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(omegas.len(), rest.len());
        Self {
            user: user.position(),
            user_geometry: *user,
            panel_center,
            offsets,
            omegas,
            rest,
        }
    }

    /// Objective of tile `tile` of panel `panel` on every subcarrier of `band`.
    pub fn from_layout(
        layout: &ArrayLayout,
        band: &Waveband,
        user: &UserGeometry,
        panel: usize,
        tile: usize,
    ) -> Self {
        let omegas = residual_wavenumbers(band);
        let center = {
            let c = layout.panels()[panel].center_yz;
            Vector2::new(c[0], c[1])
        };
        let mut rest = vec![Complex64::new(0.0, 0.0); omegas.len()];
        for other in (0..layout.tiles_per_panel()).filter(|&o| o != tile) {
            for i in 0..layout.elements_per_tile() {
                let d = path_length(&layout.element_yz(panel, other, i), user);
                for (acc, w) in rest.iter_mut().zip(&omegas) {
                    *acc += Complex64::from_polar(1.0, w * d);
                }
            }
        }
        Self::new(
            user,
            center,
            layout.intra_tile().offsets().to_vec(),
            omegas,
            rest,
        )
    }

    pub fn num_subcarriers(&self) -> usize {
        self.omegas.len()
    }

    fn tile_sum(&self, l: usize, delta: &Vector2<f64>) -> Complex64 {
        let w = self.omegas[l];
        self.offsets
            .iter()
            .map(|o| {
                let d = path_length(&(self.panel_center + delta + o), &self.user_geometry);
                Complex64::from_polar(1.0, w * d)
            })
            .sum()
    }

    /// `J_l(Δ)` on 0-based subcarrier `l`.
    pub fn gain(&self, l: usize, delta: &Vector2<f64>) -> f64 {
        (self.rest[l] + self.tile_sum(l, delta)).norm()
    }

    /// `Q_l(Δ) = J_l(Δ)²`.
    pub fn squared_gain(&self, l: usize, delta: &Vector2<f64>) -> f64 {
        (self.rest[l] + self.tile_sum(l, delta)).norm_sqr()
    }

    /// Value, gradient and Hessian of `Q_l` with respect to the tile translation.
    ///
    /// With `S = R + Σ_i exp(j ω d_i)` and `Q = |S|²`:
    /// `∂Q = 2 Re(S̄ ∂S)` and `∂²Q = 2 Re(∂S̄ ∂Sᵀ + S̄ ∂²S)`, where
    /// `∇d_i = v_i / d_i` and `∇²d_i = (I − ∇d_i ∇d_iᵀ) / d_i` for the in-plane
    /// offset `v_i` from the user's projection to the element.
    pub fn derivatives(&self, l: usize, delta: &Vector2<f64>) -> Result<(f64, Vector2<f64>, Matrix2<f64>)> {
        let w = self.omegas[l];
        let j = Complex64::i();
        let mut tile = Complex64::new(0.0, 0.0);
        let mut ds = [Complex64::new(0.0, 0.0); 2];
        let mut dds = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, o) in self.offsets.iter().enumerate() {
            let p = self.panel_center + delta + o;
            let v = Vector2::new(p.x - self.user.y, p.y - self.user.z);
            let d = path_length(&p, &self.user_geometry);
            if !(d > 0.0) {
                return Err(Error::Singular {
                    element: i,
                    distance: d,
                });
            }
            let g = v / d;
            let e = Complex64::from_polar(1.0, w * d);
            tile += e;
            for a in 0..2 {
                ds[a] += j * w * e * g[a];
                for b in 0..2 {
                    let eye = if a == b { 1.0 } else { 0.0 };
                    let hd = (eye - g[a] * g[b]) / d;
                    dds[a][b] += e * (j * w * hd - w * w * g[a] * g[b]);
                }
            }
        }
        let s = self.rest[l] + tile;
        let value = s.norm_sqr();
        let grad = Vector2::new(2.0 * (s.conj() * ds[0]).re, 2.0 * (s.conj() * ds[1]).re);
        let mut hess = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                hess[(a, b)] = 2.0 * (ds[b].conj() * ds[a] + s.conj() * dds[a][b]).re;
            }
        }
        Ok((value, grad, hess))
    }
}

/// `Q_l = J_l²` for tile `tile` of `panel`, 1-based subcarrier `l`.
pub fn squared_gain_q(
    layout: &ArrayLayout,
    band: &Waveband,
    l: usize,
    user: &UserGeometry,
    panel: usize,
    tile: usize,
) -> Result<f64> {
    let index = checked_subcarrier(band, l)?;
    let obj = TileObjective::from_layout(layout, band, user, panel, tile);
    Ok(obj.squared_gain(index, &layout.translation(panel, tile)))
}

/// Gradient and Hessian of `Q_l` with respect to `Δ_t` at the current layout.
pub fn gain_gradient_hessian(
    layout: &ArrayLayout,
    band: &Waveband,
    l: usize,
    user: &UserGeometry,
    panel: usize,
    tile: usize,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let index = checked_subcarrier(band, l)?;
    let obj = TileObjective::from_layout(layout, band, user, panel, tile);
    let (_, g, h) = obj.derivatives(index, &layout.translation(panel, tile))?;
    Ok((g, h))
}

fn checked_subcarrier(band: &Waveband, l: usize) -> Result<usize> {
    if l == 0 || l > band.subcarriers {
        return Err(Error::IndexOutOfRange {
            index: l,
            max: band.subcarriers,
        });
    }
    Ok(l - 1)
}

/// Largest eigenvalue of a symmetric 2 × 2 matrix, closed form.
pub fn max_eigenvalue_sym2(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let c = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let half_diff = 0.5 * (a - c);
    0.5 * (a + c) + half_diff.hypot(b)
}

/// Negative-semidefinite projection `V · diag(min(λ, 0)) · Vᵀ` of a symmetric
/// matrix (symmetrized first).
///
/// Rounding in the reconstruction can leave a tiny positive eigenvalue; it is
/// shifted away so that [`max_eigenvalue_sym2`] of the result is `≤ 0`.
pub fn concavify(hessian: &Matrix2<f64>) -> Matrix2<f64> {
    let sym = 0.5 * (hessian + hessian.transpose());
    let eig = sym.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.min(0.0));
    let mut u = if clipped == eig.eigenvalues {
        sym
    } else {
        let r = eig.eigenvectors * Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        0.5 * (r + r.transpose())
    };
    for _ in 0..8 {
        let top = max_eigenvalue_sym2(&u);
        if top <= 0.0 {
            break;
        }
        let shift = top.max(f64::EPSILON * u.abs().max());
        u -= Matrix2::identity() * shift;
    }
    u
}

/// Quadratic model of one `Q_l` around the expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTerm {
    /// 0-based subcarrier index.
    pub subcarrier: usize,
    pub value: f64,
    pub gradient: Vector2<f64>,
    /// Negative-semidefinite curvature `U_l`.
    pub curvature: Matrix2<f64>,
}

/// Concave minorant model `min_l Q̄_l(Δ | Δ⁰)` over the active subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub expansion: Vector2<f64>,
    pub terms: Vec<SurrogateTerm>,
}

impl SurrogateTerm {
    pub fn eval(&self, expansion: &Vector2<f64>, delta: &Vector2<f64>) -> f64 {
        let s = delta - expansion;
        self.value + self.gradient.dot(&s) + 0.5 * s.dot(&(self.curvature * s))
    }

    pub fn gradient_at(&self, expansion: &Vector2<f64>, delta: &Vector2<f64>) -> Vector2<f64> {
        self.gradient + self.curvature * (delta - expansion)
    }
}

impl SurrogateModel {
    /// Build the model of `objective` around `expansion` for the given
    /// (0-based) subcarriers.
    pub fn build(objective: &TileObjective, expansion: Vector2<f64>, active: &[usize]) -> Result<Self> {
        let terms = active
            .iter()
            .map(|&l| {
                let (value, gradient, hessian) = objective.derivatives(l, &expansion)?;
                Ok(SurrogateTerm {
                    subcarrier: l,
                    value,
                    gradient,
                    curvature: concavify(&hessian),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { expansion, terms })
    }

    /// `Q̄_l(Δ)` for the term at position `k`.
    pub fn term_value(&self, k: usize, delta: &Vector2<f64>) -> f64 {
        self.terms[k].eval(&self.expansion, delta)
    }

    /// `min_l Q̄_l(Δ)`.
    pub fn min_value(&self, delta: &Vector2<f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| t.eval(&self.expansion, delta))
            .fold(f64::INFINITY, f64::min)
    }
}

/// How the near-worst threshold is compared against gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `J_l − J_min ≤ ε_J` in gain units.
    #[default]
    Absolute,
    /// `J_l − J_min ≤ ε_J · J_min`.
    Relative,
}

/// 0-based indices of the subcarriers whose gain is within the threshold of
/// the band minimum. Always contains the argmin.
pub fn near_worst_set(gains: &[f64], threshold: f64, mode: ThresholdMode) -> Vec<usize> {
    let min = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = match mode {
        ThresholdMode::Absolute => threshold,
        ThresholdMode::Relative => threshold * min,
    };
    gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g - min <= slack)
        .map(|(l, _)| l)
        .collect()
}
