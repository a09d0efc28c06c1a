//! Scenario description read from TOML or JSON.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::TtdConfig;
use crate::channel::{UserGeometry, Waveband};
use crate::digital::WmmseConfig;
use crate::error::{Error, Result};
use crate::geometry::{nominal_layout, wavelength, ArrayLayout};
use crate::layout::ScaConfig;
use crate::pipeline::Scheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub panels_h: usize,
    pub panels_v: usize,
    /// `N_T`.
    pub tiles_per_panel: usize,
    /// `N_E`, a perfect square.
    pub elements_per_tile: usize,
    /// Minimum tile-translation spacing, meters. Defaults to the tile pitch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    #[serde(default = "default_center")]
    pub center: f64,
    pub bandwidth: f64,
    pub subcarriers: usize,
    /// Defaults to `subcarriers / 8`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic_prefix: Option<usize>,
}

fn default_center() -> f64 {
    100e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "placement", rename_all = "snake_case", deny_unknown_fields)]
pub enum UsersConfig {
    /// `[range, azimuth, elevation]` per user.
    Fixed { positions: Vec<[f64; 3]> },
    /// Independent uniform draws per trial.
    Uniform {
        count: usize,
        #[serde(default = "default_range")]
        range: [f64; 2],
        #[serde(default = "default_angle")]
        azimuth: [f64; 2],
        #[serde(default = "default_angle")]
        elevation: [f64; 2],
        /// Two users closer than this in both angles are redrawn, radians.
        #[serde(default = "default_separation")]
        min_separation: f64,
    },
}

fn default_range() -> [f64; 2] {
    [5.0, 15.0]
}

fn default_angle() -> [f64; 2] {
    [-PI / 3.0, PI / 3.0]
}

fn default_separation() -> f64 {
    0.05
}

const MAX_DRAWS: usize = 100_000;

impl UsersConfig {
    pub fn count(&self) -> usize {
        match self {
            UsersConfig::Fixed { positions } => positions.len(),
            UsersConfig::Uniform { count, .. } => *count,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            UsersConfig::Fixed { positions } => {
                for p in positions {
                    UserGeometry::new(p[0], p[1], p[2])?;
                }
            }
            UsersConfig::Uniform {
                range,
                azimuth,
                elevation,
                min_separation,
                ..
            } => {
                for (name, [lo, hi]) in [("range", range), ("azimuth", azimuth), ("elevation", elevation)] {
                    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(Error::Config(format!("users.{name} must satisfy lo <= hi, got [{lo}, {hi}]")));
                    }
                }
                if !(range[0] > 0.0) {
                    return Err(Error::Config("users.range must be positive".into()));
                }
                if !(*min_separation >= 0.0) {
                    return Err(Error::Config("users.min_separation must be non-negative".into()));
                }
            }
        }
        Ok(())
    }

    /// Users of one trial.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<UserGeometry>> {
        match self {
            UsersConfig::Fixed { positions } => positions
                .iter()
                .map(|p| UserGeometry::new(p[0], p[1], p[2]))
                .collect(),
            UsersConfig::Uniform {
                count,
                range,
                azimuth,
                elevation,
                min_separation,
            } => {
                let uniform = |rng: &mut R, [lo, hi]: [f64; 2]| if lo < hi { rng.random_range(lo..hi) } else { lo };
                let mut users: Vec<UserGeometry> = Vec::with_capacity(*count);
                let mut draws = 0;
                while users.len() < *count {
                    draws += 1;
                    if draws > MAX_DRAWS {
                        return Err(Error::Config(
                            "could not place users with the requested angular separation".into(),
                        ));
                    }
                    let u = UserGeometry::new(uniform(rng, *range), uniform(rng, *azimuth), uniform(rng, *elevation))?;
                    let clash = users.iter().any(|v| {
                        (u.azimuth - v.azimuth).abs() < *min_separation
                            && (u.elevation - v.elevation).abs() < *min_separation
                    });
                    if !clash {
                        users.push(u);
                    }
                }
                Ok(users)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub count: usize,
    pub base: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { count: 1, base: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// SNR points for `rate-vs-snr`, dB.
    pub snr_db: Vec<f64>,
    /// Bandwidths for `rate-vs-bw`, Hz.
    pub bandwidth: Vec<f64>,
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub band: BandConfig,
    pub users: UsersConfig,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_power")]
    pub total_power: f64,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub sca: ScaConfig,
    #[serde(default)]
    pub wmmse: WmmseConfig,
    #[serde(default)]
    pub ttd: TtdConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
}

fn default_snr() -> f64 {
    10.0
}

fn default_power() -> f64 {
    1.0
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

impl ScenarioConfig {
    /// Read a config file; `.json` files are parsed as JSON, anything else
    /// as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.array;
        if a.panels_h == 0 || a.panels_v == 0 || a.tiles_per_panel == 0 || a.elements_per_tile == 0 {
            return Err(Error::Config("array counts must be positive".into()));
        }
        let k = self.users.count();
        if k == 0 {
            return Err(Error::Config("at least one user is required".into()));
        }
        if k > a.panels_h * a.panels_v {
            return Err(Error::Config(format!(
                "{k} users exceed {} RF chains",
                a.panels_h * a.panels_v
            )));
        }
        if self.seeds.count == 0 {
            return Err(Error::Config("seeds.count must be positive".into()));
        }
        if !(self.total_power > 0.0) || !self.total_power.is_finite() {
            return Err(Error::Config("total_power must be positive".into()));
        }
        if !self.snr_db.is_finite() || self.sweep.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes must not be empty".into()));
        }
        self.users.check()?;
        self.band_with(self.band.bandwidth)?;
        for b in &self.sweep.bandwidth {
            self.band_with(*b)?;
        }
        self.sca.check()?;
        self.wmmse.check()?;
        self.ttd.check()?;
        self.layout()?;
        Ok(())
    }

    pub fn band(&self) -> Result<Waveband> {
        self.band_with(self.band.bandwidth)
    }

    /// The configured band with a different bandwidth.
    pub fn band_with(&self, bandwidth: f64) -> Result<Waveband> {
        let b = &self.band;
        let cp = b.cyclic_prefix.unwrap_or(b.subcarriers / 8);
        Waveband::with_cyclic_prefix(b.center, bandwidth, b.subcarriers, cp)
    }

    /// Nominal layout of the configured array.
    pub fn layout(&self) -> Result<ArrayLayout> {
        let a = &self.array;
        let layout = nominal_layout(
            a.panels_h,
            a.panels_v,
            a.tiles_per_panel,
            a.elements_per_tile,
            wavelength(self.band.center),
        )?;
        match a.d_min {
            Some(d) if !(d >= 0.0) => Err(Error::Config("array.d_min must be non-negative".into())),
            Some(d) => {
                let layout = layout.with_d_min(d);
                let report = crate::geometry::validate_layout(&layout);
                if report.is_ok() {
                    Ok(layout)
                } else {
                    Err(Error::InvalidLayout(report))
                }
            }
            None => Ok(layout),
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.count()
    }
}
