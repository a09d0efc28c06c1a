//! The four figure families plus single-run layout optimization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analog::gain_profile;
use crate::baselines::{fpa_design, ttd_design, ttd_gain_profile};
use crate::channel::{draw_path_gains, PathGains, UserGeometry};
use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::stats::{ci95, mean, paired_t_test, PairedTest};
use crate::layout::{optimize_layout, Trace};
use crate::pipeline::{hsc_hbf_design, AnalogDesign, Scenario, Scheme};

/// Independent generator for one trial: the base seed picks the key, the
/// trial index picks the stream.
pub fn trial_rng(base: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(trial as u64);
    rng
}

/// Users and path gains of one trial.
pub fn draw_trial(cfg: &ScenarioConfig, trial: usize) -> Result<(Vec<UserGeometry>, PathGains)> {
    let mut rng = trial_rng(cfg.seeds.base, trial);
    let users = cfg.users.draw(&mut rng)?;
    let gains = draw_path_gains(&mut rng, cfg.band.subcarriers, users.len());
    Ok((users, gains))
}

fn scenario(cfg: &ScenarioConfig, bandwidth: f64, users: Vec<UserGeometry>, gains: PathGains, snr_db: f64) -> Result<Scenario> {
    Ok(Scenario {
        layout: cfg.layout()?,
        band: cfg.band_with(bandwidth)?,
        users,
        gains,
        total_power: cfg.total_power,
        noise: Scenario::noise_for_snr(cfg.total_power, snr_db),
        wmmse: cfg.wmmse,
    })
}

fn design(cfg: &ScenarioConfig, scheme: Scheme, sc: &Scenario) -> Result<AnalogDesign> {
    match scheme {
        Scheme::HscHbf => hsc_hbf_design(sc, &cfg.sca),
        Scheme::Fpa => fpa_design(sc),
        Scheme::FpaTtd => ttd_design(sc, &cfg.ttd),
    }
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf)> {
    let path = dir.join(name);
    Ok((BufWriter::new(File::create(&path)?), path))
}

/// Write the resolved config next to the results.
pub fn write_resolved_config(cfg: &ScenarioConfig, dir: &Path, experiment: &str) -> Result<PathBuf> {
    let (mut w, path) = create(dir, &format!("{experiment}_config.json"))?;
    writeln!(w, "{}", cfg.to_json()?)?;
    w.flush()?;
    Ok(path)
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Files written by an experiment plus a few headline numbers.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub outputs: Vec<String>,
    pub metrics: serde_json::Value,
}

pub const CONVERGENCE_HEADER: &str = "step,user,panel,tile,inner_iter,min_gain,avg_gain,accepted";

/// Layout-optimization trace for every user of trial 0, with gains
/// normalized by `N_sub` (and by `L` for the average).
pub fn run_convergence(cfg: &ScenarioConfig, out: &Path) -> Result<(Trace, Summary)> {
    let (users, _) = draw_trial(cfg, 0)?;
    let sc = scenario(cfg, cfg.band.bandwidth, users, PathGains::ones(cfg.band.subcarriers, cfg.num_users()), cfg.snr_db)?;
    let assignment = sc.assignment()?;
    let (_, trace) = optimize_layout(&sc.layout, &sc.band, &sc.users, &assignment, &cfg.sca)?;

    let n_sub = sc.layout.elements_per_panel() as f64;
    let l = sc.band.subcarriers as f64;
    let (mut w, conv_path) = create(out, "convergence.csv")?;
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    for (step, r) in trace.rows.iter().enumerate() {
        writeln!(
            w,
            "{step},{},{},{},{},{},{},{}",
            r.user,
            r.panel,
            r.tile,
            r.inner_iter,
            r.min_j / n_sub,
            r.sum_j / (l * n_sub),
            r.accepted
        )?;
    }
    finish(w)?;
    let (w, trace_path) = create(out, "trace.csv")?;
    trace.write_csv(w)?;
    let config_path = write_resolved_config(cfg, out, "convergence")?;

    let first = trace.rows.first().map_or(0.0, |r| r.min_j / n_sub);
    let last = trace.rows.last().map_or(0.0, |r| r.min_j / n_sub);
    info!("convergence: {} trace rows, min gain {first:.4} -> {last:.4}", trace.rows.len());
    let summary = Summary {
        command: "convergence".into(),
        outputs: paths(&[conv_path, trace_path, config_path]),
        metrics: serde_json::json!({
            "rows": trace.rows.len(),
            "initial_min_gain": first,
            "final_min_gain": last,
        }),
    };
    Ok((trace, summary))
}

pub const GAIN_HEADER: &str = "f_l,gain_fpa,gain_ttd,gain_ma";

/// Normalized per-subcarrier gains of the three schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurves {
    pub frequencies: Vec<f64>,
    pub fpa: Vec<f64>,
    pub ttd: Vec<f64>,
    pub ma: Vec<f64>,
}

/// Per-subcarrier gain of the single user's panel under FPA, FPA+TTD and
/// the optimized layout.
pub fn run_gain_vs_frequency(cfg: &ScenarioConfig, out: &Path) -> Result<(GainCurves, Summary)> {
    if cfg.num_users() != 1 {
        return Err(Error::Config(format!(
            "gain-vs-freq needs exactly one user, config has {}",
            cfg.num_users()
        )));
    }
    let (users, _) = draw_trial(cfg, 0)?;
    let sc = scenario(cfg, cfg.band.bandwidth, users, PathGains::ones(cfg.band.subcarriers, 1), cfg.snr_db)?;
    let assignment = sc.assignment()?;
    let panel = assignment.panel(0);
    let user = &sc.users[0];
    let (optimized, _) = optimize_layout(&sc.layout, &sc.band, &sc.users, &assignment, &cfg.sca)?;
    let n_sub = sc.layout.elements_per_panel() as f64;
    let norm = |g: Vec<f64>| g.into_iter().map(|j| j / n_sub).collect::<Vec<_>>();
    let curves = GainCurves {
        frequencies: sc.band.frequencies(),
        fpa: norm(gain_profile(&sc.layout, &sc.band, user, panel)),
        ttd: norm(ttd_gain_profile(&sc.layout, &sc.band, user, panel, &cfg.ttd)),
        ma: norm(gain_profile(&optimized, &sc.band, user, panel)),
    };
    let (mut w, path) = create(out, "gain_vs_freq.csv")?;
    writeln!(w, "{GAIN_HEADER}")?;
    for l in 0..curves.frequencies.len() {
        writeln!(w, "{},{},{},{}", curves.frequencies[l], curves.fpa[l], curves.ttd[l], curves.ma[l])?;
    }
    finish(w)?;
    let (w, layout_path) = create(out, "layout_ma.json")?;
    write_layout(w, &optimized)?;
    let config_path = write_resolved_config(cfg, out, "gain_vs_freq")?;
    let min = |g: &[f64]| g.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = Summary {
        command: "gain-vs-freq".into(),
        outputs: paths(&[path, layout_path, config_path]),
        metrics: serde_json::json!({
            "min_gain_fpa": min(&curves.fpa),
            "min_gain_ttd": min(&curves.ttd),
            "min_gain_ma": min(&curves.ma),
            "max_gap_ma_ttd": max_gap(&curves.ma, &curves.ttd),
        }),
    };
    Ok((curves, summary))
}

/// `max_l |a_l − b_l|`.
pub fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn write_layout<W: Write>(mut w: W, layout: &crate::geometry::ArrayLayout) -> Result<()> {
    writeln!(w, "{}", layout.to_json()?)?;
    w.flush()?;
    Ok(())
}

/// Sum rates of a sweep, `rates[point][scheme][trial]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSweep {
    /// `snr_db` or `bandwidth_hz`.
    pub axis: &'static str,
    pub points: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub rates: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub point: f64,
    pub a: Scheme,
    pub b: Scheme,
    #[serde(flatten)]
    pub test: PairedTest,
}

impl RateSweep {
    pub fn samples(&self, point: usize, scheme: Scheme) -> Option<&[f64]> {
        let s = self.schemes.iter().position(|x| *x == scheme)?;
        Some(&self.rates[point][s])
    }

    pub fn mean(&self, point: usize, scheme: Scheme) -> Option<f64> {
        self.samples(point, scheme).map(mean)
    }

    /// Paired one-sided tests of `a − b` at one sweep point.
    pub fn compare(&self, point: usize, a: Scheme, b: Scheme) -> Option<PairedTest> {
        Some(paired_t_test(self.samples(point, a)?, self.samples(point, b)?))
    }

    /// HSC-HBF against each baseline at every point.
    pub fn comparisons(&self) -> Vec<Comparison> {
        let mut out = Vec::new();
        for (p, &point) in self.points.iter().enumerate() {
            for b in [Scheme::Fpa, Scheme::FpaTtd] {
                if let Some(test) = self.compare(p, Scheme::HscHbf, b) {
                    out.push(Comparison { point, a: Scheme::HscHbf, b, test });
                }
            }
        }
        out
    }

    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,{},scheme,sum_rate", self.axis)?;
        let trials = self.rates.first().and_then(|r| r.first()).map_or(0, Vec::len);
        for t in 0..trials {
            for (p, point) in self.points.iter().enumerate() {
                for (s, scheme) in self.schemes.iter().enumerate() {
                    writeln!(w, "{t},{point},{},{}", scheme.name(), self.rates[p][s][t])?;
                }
            }
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},scheme,mean,ci95,trials", self.axis)?;
        for (p, point) in self.points.iter().enumerate() {
            for (s, scheme) in self.schemes.iter().enumerate() {
                let x = &self.rates[p][s];
                writeln!(w, "{point},{},{},{},{}", scheme.name(), mean(x), ci95(x), x.len())?;
            }
        }
        Ok(())
    }

    fn write_outputs(&self, cfg: &ScenarioConfig, out: &Path, stem: &str, command: &str) -> Result<Summary> {
        let (w, trials_path) = create(out, &format!("{stem}_trials.csv"))?;
        let mut w = w;
        self.write_trials_csv(&mut w)?;
        finish(w)?;
        let (mut w, summary_path) = create(out, &format!("{stem}.csv"))?;
        self.write_summary_csv(&mut w)?;
        finish(w)?;
        let config_path = write_resolved_config(cfg, out, stem)?;
        let means: Vec<_> = self
            .points
            .iter()
            .enumerate()
            .map(|(p, point)| {
                let per: serde_json::Map<String, serde_json::Value> = self
                    .schemes
                    .iter()
                    .map(|s| (s.name().to_string(), serde_json::json!(self.mean(p, *s))))
                    .collect();
                serde_json::json!({ self.axis: point, "mean": per })
            })
            .collect();
        Ok(Summary {
            command: command.into(),
            outputs: paths(&[summary_path, trials_path, config_path]),
            metrics: serde_json::json!({
                "trials": cfg.seeds.count,
                "points": means,
                "comparisons": self.comparisons(),
            }),
        })
    }
}

fn collect_sweep(
    axis: &'static str,
    points: Vec<f64>,
    schemes: Vec<Scheme>,
    per_trial: Vec<Vec<Vec<f64>>>,
) -> RateSweep {
    // per_trial[t][point][scheme] -> rates[point][scheme][t]
    let rates = (0..points.len())
        .map(|p| {
            (0..schemes.len())
                .map(|s| per_trial.iter().map(|t| t[p][s]).collect())
                .collect()
        })
        .collect();
    RateSweep { axis, points, schemes, rates }
}

/// Sum rate per trial and scheme over the configured SNR points; layouts
/// and analog precoders are designed once per trial.
pub fn run_rate_vs_snr(cfg: &ScenarioConfig, out: &Path) -> Result<(RateSweep, Summary)> {
    let points = if cfg.sweep.snr_db.is_empty() {
        vec![cfg.snr_db]
    } else {
        cfg.sweep.snr_db.clone()
    };
    let schemes = cfg.schemes.clone();
    let per_trial = (0..cfg.seeds.count)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Vec<f64>>> {
            let (users, gains) = draw_trial(cfg, trial)?;
            let mut sc = scenario(cfg, cfg.band.bandwidth, users, gains, points[0])?;
            let designs = schemes
                .iter()
                .map(|s| design(cfg, *s, &sc))
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::with_capacity(points.len());
            for snr in &points {
                sc.noise = Scenario::noise_for_snr(cfg.total_power, *snr);
                rows.push(
                    designs
                        .iter()
                        .map(|d| d.evaluate(&sc).map(|r| r.rates.total))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            info!("rate-vs-snr: trial {trial} done");
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let sweep = collect_sweep("snr_db", points, schemes, per_trial);
    let summary = sweep.write_outputs(cfg, out, "rate_vs_snr", "rate-vs-snr")?;
    Ok((sweep, summary))
}

/// Sum rate per trial and scheme over the configured bandwidths at
/// `snr_db`; users and path gains are shared across bandwidths, layouts are
/// re-optimized for each.
pub fn run_rate_vs_bandwidth(cfg: &ScenarioConfig, out: &Path) -> Result<(RateSweep, Summary)> {
    let points = if cfg.sweep.bandwidth.is_empty() {
        vec![cfg.band.bandwidth]
    } else {
        cfg.sweep.bandwidth.clone()
    };
    let schemes = cfg.schemes.clone();
    let per_trial = (0..cfg.seeds.count)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Vec<f64>>> {
            let (users, gains) = draw_trial(cfg, trial)?;
            let mut rows = Vec::with_capacity(points.len());
            for b in &points {
                let sc = scenario(cfg, *b, users.clone(), gains.clone(), cfg.snr_db)?;
                rows.push(
                    schemes
                        .iter()
                        .map(|s| design(cfg, *s, &sc)?.evaluate(&sc).map(|r| r.rates.total))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            info!("rate-vs-bw: trial {trial} done");
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let sweep = collect_sweep("bandwidth_hz", points, schemes, per_trial);
    let summary = sweep.write_outputs(cfg, out, "rate_vs_bw", "rate-vs-bw")?;
    Ok((sweep, summary))
}

/// Optimize the layout for trial 0's users and save it with its trace.
pub fn run_optimize_layout(cfg: &ScenarioConfig, out: &Path) -> Result<Summary> {
    let (users, gains) = draw_trial(cfg, 0)?;
    let sc = scenario(cfg, cfg.band.bandwidth, users, gains, cfg.snr_db)?;
    let d = hsc_hbf_design(&sc, &cfg.sca)?;
    let (w, layout_path) = create(out, "layout.json")?;
    write_layout(w, &d.layout)?;
    let (w, trace_path) = create(out, "trace.csv")?;
    d.trace.clone().unwrap_or_default().write_csv(w)?;
    let config_path = write_resolved_config(cfg, out, "optimize_layout")?;
    let n_sub = sc.layout.elements_per_panel() as f64;
    let per_user: Vec<_> = sc
        .users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let p = d.assignment.panel(k);
            let min = |g: Vec<f64>| g.into_iter().fold(f64::INFINITY, f64::min) / n_sub;
            serde_json::json!({
                "user": k,
                "panel": p,
                "min_gain_fpa": min(gain_profile(&sc.layout, &sc.band, u, p)),
                "min_gain_ma": min(gain_profile(&d.layout, &sc.band, u, p)),
            })
        })
        .collect();
    Ok(Summary {
        command: "optimize-layout".into(),
        outputs: paths(&[layout_path, trace_path, config_path]),
        metrics: serde_json::json!({ "users": per_user }),
    })
}

fn paths(p: &[PathBuf]) -> Vec<String> {
    p.iter().map(|p| p.display().to_string()).collect()
}
