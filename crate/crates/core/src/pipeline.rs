//! End-to-end evaluation of one user drop: analog design, effective
//! channels, WMMSE and rates.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analog::{assign_users, conjugate_steering, AnalogPrecoder, Assignment};
use crate::channel::{ChannelSet, PathGains, UserGeometry, Waveband};
use crate::digital::{
    digital_power_budget, effective_channel, spectral_efficiency, transmit_power, DigitalPrecoder, RateReport,
    WmmseConfig,
};
use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;
use crate::layout::{optimize_layout, ScaConfig, Trace};

/// One user drop on a fixed array.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Nominal (FPA) layout; also the starting point of layout optimization.
    pub layout: ArrayLayout,
    pub band: Waveband,
    pub users: Vec<UserGeometry>,
    pub gains: PathGains,
    /// `P_t`.
    pub total_power: f64,
    /// `σ²`.
    pub noise: f64,
    pub wmmse: WmmseConfig,
}

impl Scenario {
    /// Noise variance for `SNR = P_t / σ²` given in dB.
    pub fn noise_for_snr(total_power: f64, snr_db: f64) -> f64 {
        total_power / 10f64.powf(snr_db / 10.0)
    }

    pub fn assignment(&self) -> Result<Assignment> {
        assign_users(&self.layout, &self.band, &self.users)
    }
}

/// Analog precoder (frequency-flat or one per subcarrier) plus `D_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderPair {
    pub analog: Vec<AnalogPrecoder>,
    pub digital: DigitalPrecoder,
}

impl PrecoderPair {
    /// Analog precoder on 0-based subcarrier `l`.
    pub fn analog_at(&self, l: usize) -> &AnalogPrecoder {
        if self.analog.len() == 1 {
            &self.analog[0]
        } else {
            &self.analog[l]
        }
    }

    /// `‖A_l D_l‖_F²` per subcarrier.
    pub fn transmit_powers(&self) -> Vec<f64> {
        self.digital
            .matrices
            .iter()
            .enumerate()
            .map(|(l, d)| transmit_power(self.analog_at(l), d))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub layout: ArrayLayout,
    pub assignment: Assignment,
    pub precoders: PrecoderPair,
    pub rates: RateReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    HscHbf,
    Fpa,
    FpaTtd,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::HscHbf, Scheme::Fpa, Scheme::FpaTtd];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::HscHbf => "hsc_hbf",
            Scheme::Fpa => "fpa",
            Scheme::FpaTtd => "fpa_ttd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}` (expected hsc_hbf, fpa or fpa_ttd)")))
    }
}

/// Effective channels `h̄_{l,k}` for every subcarrier. `analog` holds one
/// frequency-flat precoder or one per subcarrier.
pub fn effective_channels(channels: &ChannelSet, analog: &[AnalogPrecoder]) -> Result<Vec<Vec<DVector<Complex64>>>> {
    (0..channels.subcarriers())
        .map(|l| {
            let a = if analog.len() == 1 { &analog[0] } else { &analog[l] };
            (0..channels.users())
                .map(|k| effective_channel(channels.get(l, k), a))
                .collect()
        })
        .collect()
}

/// WMMSE and rates for a given layout and analog design.
pub fn precode(scenario: &Scenario, layout: &ArrayLayout, analog: Vec<AnalogPrecoder>) -> Result<(PrecoderPair, RateReport)> {
    let channels = ChannelSet::generate(layout, &scenario.band, &scenario.users, &scenario.gains)?;
    let effective = effective_channels(&channels, &analog)?;
    let power = digital_power_budget(scenario.total_power, layout.elements_per_panel());
    let digital = DigitalPrecoder::wmmse(&effective, power, scenario.noise, &scenario.wmmse);
    let sinr = digital.sinr(&effective, scenario.noise);
    let rates = spectral_efficiency(&sinr, scenario.band.subcarriers, scenario.band.cyclic_prefix);
    Ok((PrecoderPair { analog, digital }, rates))
}

/// Layout plus analog precoder(s) of one scheme, independent of SNR.
#[derive(Debug, Clone)]
pub struct AnalogDesign {
    pub layout: ArrayLayout,
    pub assignment: Assignment,
    pub analog: Vec<AnalogPrecoder>,
    /// Present for the layout-optimizing scheme.
    pub trace: Option<Trace>,
}

impl AnalogDesign {
    /// WMMSE and rates of this design under `scenario`'s noise and power.
    pub fn evaluate(&self, scenario: &Scenario) -> Result<SchemeResult> {
        let (precoders, rates) = precode(scenario, &self.layout, self.analog.clone())?;
        Ok(SchemeResult {
            layout: self.layout.clone(),
            assignment: self.assignment.clone(),
            precoders,
            rates,
        })
    }
}

/// Optimize tile positions and steer every served panel at its user.
pub fn hsc_hbf_design(scenario: &Scenario, sca: &ScaConfig) -> Result<AnalogDesign> {
    let assignment = scenario.assignment()?;
    let (layout, trace) = optimize_layout(&scenario.layout, &scenario.band, &scenario.users, &assignment, sca)?;
    let analog = conjugate_steering(&layout, &scenario.band, &scenario.users, &assignment)?;
    Ok(AnalogDesign {
        layout,
        assignment,
        analog: vec![analog],
        trace: Some(trace),
    })
}

/// Proposed scheme: optimize tile positions, steer, precode.
pub fn hsc_hbf_pipeline(scenario: &Scenario, sca: &ScaConfig) -> Result<(SchemeResult, Trace)> {
    let design = hsc_hbf_design(scenario, sca)?;
    let result = design.evaluate(scenario)?;
    Ok((result, design.trace.unwrap_or_default()))
}
