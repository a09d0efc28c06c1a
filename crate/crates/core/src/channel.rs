//! Wideband spherical-wave line-of-sight channel.

use std::io::Write;

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, SPEED_OF_LIGHT};

/// User location in spherical coordinates around the array origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    /// Distance to the origin, meters.
    pub range: f64,
    /// Azimuth θ, radians.
    pub azimuth: f64,
    /// Elevation φ, radians.
    pub elevation: f64,
}

impl UserGeometry {
    pub fn new(range: f64, azimuth: f64, elevation: f64) -> Result<Self> {
        let u = Self {
            range,
            azimuth,
            elevation,
        };
        u.check()?;
        Ok(u)
    }

    pub fn check(&self) -> Result<()> {
        let pi = std::f64::consts::PI;
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(Error::Config(format!("user range must be positive, got {}", self.range)));
        }
        for (name, a) in [("azimuth", self.azimuth), ("elevation", self.elevation)] {
            if !(a > -pi && a <= pi) {
                return Err(Error::Config(format!("{name} {a} outside (-pi, pi]")));
            }
        }
        Ok(())
    }

    pub fn position(&self) -> Vector3<f64> {
        user_position(self)
    }
}

/// `(r cosφ cosθ, r cosφ sinθ, r sinφ)`.
pub fn user_position(u: &UserGeometry) -> Vector3<f64> {
    let (st, ct) = u.azimuth.sin_cos();
    let (sp, cp) = u.elevation.sin_cos();
    Vector3::new(u.range * cp * ct, u.range * cp * st, u.range * sp)
}

/// OFDM band description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveband {
    pub center: f64,
    pub bandwidth: f64,
    pub subcarriers: usize,
    pub cyclic_prefix: usize,
}

impl Waveband {
    /// Band with the default cyclic prefix `L / 8`.
    pub fn new(center: f64, bandwidth: f64, subcarriers: usize) -> Result<Self> {
        Self::with_cyclic_prefix(center, bandwidth, subcarriers, subcarriers / 8)
    }

    pub fn with_cyclic_prefix(
        center: f64,
        bandwidth: f64,
        subcarriers: usize,
        cyclic_prefix: usize,
    ) -> Result<Self> {
        let band = Self {
            center,
            bandwidth,
            subcarriers,
            cyclic_prefix,
        };
        band.check()?;
        Ok(band)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.center > 0.0) || !self.center.is_finite() {
            return Err(Error::Config(format!("center frequency {} must be positive", self.center)));
        }
        if !(self.bandwidth >= 0.0) || self.bandwidth >= 2.0 * self.center {
            return Err(Error::Config(format!(
                "bandwidth {} must lie in [0, 2 f_c)",
                self.bandwidth
            )));
        }
        if self.subcarriers == 0 {
            return Err(Error::Config("at least one subcarrier is required".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center
    }

    /// Subcarrier frequencies for `l = 1..=L`, in order.
    pub fn frequencies(&self) -> Vec<f64> {
        (1..=self.subcarriers).map(|l| self.frequency_unchecked(l)).collect()
    }

    fn frequency_unchecked(&self, l: usize) -> f64 {
        let big_l = self.subcarriers as f64;
        self.center + self.bandwidth / (2.0 * big_l) * (2.0 * l as f64 - 1.0 - big_l)
    }
}

/// `f_l = f_c + B/(2L) · (2l − 1 − L)` for 1-based `l`.
pub fn subcarrier_frequency(band: &Waveband, l: usize) -> Result<f64> {
    if l == 0 || l > band.subcarriers {
        return Err(Error::IndexOutOfRange {
            index: l,
            max: band.subcarriers,
        });
    }
    Ok(band.frequency_unchecked(l))
}

/// Exact spherical-wave distance from user `u` to the array element at
/// `(0, y, z)`.
pub fn path_length(element_yz: &Vector2<f64>, u: &UserGeometry) -> f64 {
    let (y, z) = (element_yz.x, element_yz.y);
    let r = u.range;
    let arg = r * r + y * y + z * z
        - 2.0 * r * (y * u.elevation.cos() * u.azimuth.sin() + z * u.elevation.sin());
    debug_assert!(
        arg >= -1e-18 * (r * r + y * y + z * z).max(1.0),
        "negative squared path length {arg}"
    );
    arg.max(0.0).sqrt()
}

/// Path lengths from `u` to every element of the layout, canonical order.
pub fn path_lengths(layout: &ArrayLayout, u: &UserGeometry) -> Vec<f64> {
    layout
        .elements_yz()
        .iter()
        .map(|p| path_length(p, u))
        .collect()
}

/// Spherical-wave steering vector `exp(−j 2π f d / c0)` at frequency `freq`.
pub fn steering_vector_at(layout: &ArrayLayout, freq: f64, u: &UserGeometry) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI * freq / SPEED_OF_LIGHT;
    path_lengths(layout, u)
        .into_iter()
        .map(|d| Complex64::from_polar(1.0, -k * d))
        .collect()
}

/// Steering vector on subcarrier `l` (1-based).
pub fn steering_vector(
    layout: &ArrayLayout,
    band: &Waveband,
    l: usize,
    u: &UserGeometry,
) -> Result<Vec<Complex64>> {
    Ok(steering_vector_at(layout, subcarrier_frequency(band, l)?, u))
}

/// `h = β · b_l`.
pub fn channel_vector(
    layout: &ArrayLayout,
    band: &Waveband,
    l: usize,
    u: &UserGeometry,
    beta: Complex64,
) -> Result<Vec<Complex64>> {
    Ok(steering_vector(layout, band, l, u)?
        .into_iter()
        .map(|b| beta * b)
        .collect())
}

/// Complex path gains `β_{l,k}`, subcarrier major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGains {
    subcarriers: usize,
    users: usize,
    values: Vec<Complex64>,
}

impl PathGains {
    pub fn from_fn(subcarriers: usize, users: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(subcarriers * users);
        for l in 0..subcarriers {
            for k in 0..users {
                values.push(f(l, k));
            }
        }
        Self {
            subcarriers,
            users,
            values,
        }
    }

    pub fn ones(subcarriers: usize, users: usize) -> Self {
        Self::from_fn(subcarriers, users, |_, _| Complex64::new(1.0, 0.0))
    }

    /// Gain on 0-based subcarrier `l` for user `k`.
    pub fn get(&self, l: usize, k: usize) -> Complex64 {
        self.values[l * self.users + k]
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// One `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// i.i.d. `CN(0, 1)` gains over subcarriers and users.
pub fn draw_path_gains<R: Rng + ?Sized>(rng: &mut R, subcarriers: usize, users: usize) -> PathGains {
    let values = (0..subcarriers * users).map(|_| complex_normal(rng)).collect();
    PathGains {
        subcarriers,
        users,
        values,
    }
}

/// Frequency-flat variant: one `CN(0, 1)` gain per user, shared by all subcarriers.
pub fn draw_flat_path_gains<R: Rng + ?Sized>(
    rng: &mut R,
    subcarriers: usize,
    users: usize,
) -> PathGains {
    let per_user: Vec<Complex64> = (0..users).map(|_| complex_normal(rng)).collect();
    PathGains::from_fn(subcarriers, users, |_, k| per_user[k])
}

/// All channel vectors `h_{l,k}` of one drop.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    subcarriers: usize,
    users: usize,
    gains: PathGains,
    vectors: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn generate(
        layout: &ArrayLayout,
        band: &Waveband,
        users: &[UserGeometry],
        gains: &PathGains,
    ) -> Result<Self> {
        if gains.subcarriers != band.subcarriers || gains.users != users.len() {
            return Err(Error::DimensionMismatch {
                expected: band.subcarriers * users.len(),
                got: gains.values.len(),
            });
        }
        let omega: Vec<f64> = band
            .frequencies()
            .iter()
            .map(|f| 2.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT)
            .collect();
        let distances: Vec<Vec<f64>> = users.iter().map(|u| path_lengths(layout, u)).collect();
        let mut vectors = Vec::with_capacity(band.subcarriers * users.len());
        for (l, w) in omega.iter().enumerate() {
            for (k, d) in distances.iter().enumerate() {
                let beta = gains.get(l, k);
                vectors.push(d.iter().map(|d| beta * Complex64::from_polar(1.0, -w * d)).collect());
            }
        }
        Ok(Self {
            subcarriers: band.subcarriers,
            users: users.len(),
            gains: gains.clone(),
            vectors,
        })
    }

    /// `h_{l,k}` for 0-based subcarrier `l`.
    pub fn get(&self, l: usize, k: usize) -> &[Complex64] {
        &self.vectors[l * self.users + k]
    }

    pub fn gains(&self) -> &PathGains {
        &self.gains
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Debug dump: one row per `(l, k)` (l major), then `re, im` per element
    /// in canonical order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.vectors.first().map_or(0, Vec::len);
        write!(out, "l,k")?;
        for e in 0..n {
            write!(out, ",re_{e},im_{e}")?;
        }
        writeln!(out)?;
        for l in 0..self.subcarriers {
            for k in 0..self.users {
                write!(out, "{l},{k}")?;
                for h in self.get(l, k) {
                    write!(out, ",{:e},{:e}", h.re, h.im)?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}
