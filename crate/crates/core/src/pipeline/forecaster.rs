use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::garch::{extract_volatility, VolatilitySource, VolatilityTrack};
use crate::neural::{train_network, CellKind, Network, TrainReport};
use crate::series::{MinMaxScaler, SeriesError, TimeSeries};
use crate::vmd::{decompose, ModeSet};

use super::metrics::aggregate;
use super::windows::{build_windows, window_at};
use super::{PipelineConfig, PipelineError, Variant};

/// How the second input column is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolChannel {
    /// Copy of the scaled value column.
    Duplicate,
    Zero,
    /// Scaled conditional standard deviation.
    Volatility,
}

/// One series handed to a network: the raw series or one mode, at full length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// 1-based.
    pub index: usize,
    pub values: Vec<f64>,
    pub volatility: Option<VolatilitySource>,
}

/// Everything upstream of the networks for one variant. VMD and GARCH
/// results can be shared between variants and cell kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prepared {
    pub variant: Variant,
    pub split_index: usize,
    pub series: Vec<f64>,
    pub modes: Option<ModeSet>,
    pub components: Vec<Component>,
}

/// Runs VMD on the full series.
pub fn decompose_series(series: &TimeSeries, config: &PipelineConfig) -> Result<ModeSet, PipelineError> {
    Ok(decompose(series, &config.vmd)?)
}

/// Fits one volatility model per mode on its training portion.
pub fn extract_mode_volatility(
    modes: &ModeSet,
    split_index: usize,
    config: &PipelineConfig,
) -> Result<Vec<VolatilitySource>, PipelineError> {
    modes
        .modes()
        .par_iter()
        .map(|m| Ok(extract_volatility(&m[..split_index], &config.volatility)?))
        .collect()
}

impl Prepared {
    /// Raw series as the only component.
    pub fn nn_only(series: &TimeSeries, config: &PipelineConfig) -> Result<Self, PipelineError> {
        let split_index = config.split.split_index(series.len())?;
        Ok(Self {
            variant: Variant::NnOnly,
            split_index,
            series: series.values().to_vec(),
            modes: None,
            components: vec![Component {
                index: 1,
                values: series.values().to_vec(),
                volatility: None,
            }],
        })
    }

    /// Modes as components; `volatility` (one per mode) selects the GARCH variant.
    pub fn from_modes(
        series: &TimeSeries,
        modes: ModeSet,
        volatility: Option<Vec<VolatilitySource>>,
        config: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        let split_index = config.split.split_index(series.len())?;
        if modes.signal_len() != series.len() {
            return Err(PipelineError::LengthMismatch {
                left: series.len(),
                right: modes.signal_len(),
            });
        }
        let variant = if volatility.is_some() {
            Variant::VmdGarchNn
        } else {
            Variant::VmdNn
        };
        let mut vols: Vec<Option<VolatilitySource>> = match volatility {
            Some(v) if v.len() != modes.len() => {
                return Err(PipelineError::LengthMismatch {
                    left: modes.len(),
                    right: v.len(),
                })
            }
            Some(v) => v.into_iter().map(Some).collect(),
            None => vec![None; modes.len()],
        };
        let components = modes
            .modes()
            .iter()
            .enumerate()
            .map(|(k, m)| Component {
                index: k + 1,
                values: m.clone(),
                volatility: vols[k].take(),
            })
            .collect();
        Ok(Self {
            variant,
            split_index,
            series: series.values().to_vec(),
            modes: Some(modes),
            components,
        })
    }

    /// Runs whatever upstream stages `variant` needs.
    pub fn new(series: &TimeSeries, variant: Variant, config: &PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        match variant {
            Variant::NnOnly => Self::nn_only(series, config),
            Variant::VmdNn => Self::from_modes(series, decompose_series(series, config)?, None, config),
            Variant::VmdGarchNn => {
                let split_index = config.split.split_index(series.len())?;
                let modes = decompose_series(series, config)?;
                let vols = extract_mode_volatility(&modes, split_index, config)?;
                Self::from_modes(series, modes, Some(vols), config)
            }
        }
    }
}

/// Scaler on the training values, widened to unit span when they are constant
/// so a flat mode still produces well-defined inputs.
fn fit_scaler(train: &[f64]) -> Result<MinMaxScaler, PipelineError> {
    match MinMaxScaler::fit(train) {
        Ok(s) => Ok(s),
        Err(SeriesError::ConstantSeries(v)) => Ok(MinMaxScaler::from_bounds(v, v + 1.0)?),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeModel {
    /// 1-based.
    pub mode_index: usize,
    pub scaler: MinMaxScaler,
    pub vol_scaler: Option<MinMaxScaler>,
    pub volatility: Option<VolatilitySource>,
    pub channel: VolChannel,
    pub network: Network,
    pub train_report: TrainReport,
    /// Component values over the whole series; only the training part was
    /// used for fitting.
    pub values: Vec<f64>,
    /// In-sample volatility track, extended during rolling forecasts.
    pub track: Option<VolatilityTrack>,
}

impl ModeModel {
    fn channel_values(&self, scaled: &[f64], track: Option<&VolatilityTrack>, len: usize) -> Vec<f64> {
        match self.channel {
            VolChannel::Duplicate => scaled[..len].to_vec(),
            VolChannel::Zero => vec![0.0; len],
            VolChannel::Volatility => {
                let vs = self.vol_scaler.expect("volatility channel has a scaler");
                vs.apply_all(&track.expect("volatility channel has a track").sigma()[..len])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleForecaster {
    pub variant: Variant,
    pub cell: CellKind,
    pub config: PipelineConfig,
    pub split_index: usize,
    pub modes: Option<ModeSet>,
    pub mode_models: Vec<ModeModel>,
}

impl EnsembleForecaster {
    pub fn model_name(&self) -> String {
        self.variant.model_name(self.cell)
    }
}

fn component_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64 - 1)
}

fn fit_component(
    comp: &Component,
    split: usize,
    cell: CellKind,
    variant: Variant,
    config: &PipelineConfig,
) -> Result<ModeModel, PipelineError> {
    let train = &comp.values[..split];
    let scaler = fit_scaler(train)?;
    let scaled = scaler.apply_all(train);
    let channel = variant.channel();
    let (track, vol_scaler) = match channel {
        VolChannel::Volatility => {
            let source = comp
                .volatility
                .as_ref()
                .ok_or_else(|| PipelineError::InvalidConfig("volatility missing for GARCH variant".into()))?;
            let track = VolatilityTrack::new(source, train);
            let vs = fit_scaler(track.sigma())?;
            (Some(track), Some(vs))
        }
        _ => (None, None),
    };
    let mut net_cfg = config.network.clone();
    net_cfg.cell = cell;
    net_cfg.input_features = 2;
    net_cfg.seed = component_seed(config.network.seed, comp.index);
    let mut train_cfg = config.train.clone();
    train_cfg.seed = component_seed(config.train.seed, comp.index);

    let mut model = ModeModel {
        mode_index: comp.index,
        scaler,
        vol_scaler,
        volatility: comp.volatility.clone(),
        channel,
        network: Network::new(net_cfg)?,
        train_report: TrainReport {
            initial_loss: 0.0,
            history: Vec::new(),
            final_loss: 0.0,
            clipped_steps: 0,
        },
        values: comp.values.clone(),
        track,
    };
    let vol = model.channel_values(&scaled, model.track.as_ref(), split);
    let data = build_windows(&scaled, &vol, config.seq_len)?;
    model.train_report = train_network(&mut model.network, &data.samples, &train_cfg)?;
    Ok(model)
}

/// Trains one network per component of `prepared`.
pub fn fit_prepared(
    prepared: &Prepared,
    cell: CellKind,
    config: &PipelineConfig,
) -> Result<EnsembleForecaster, PipelineError> {
    config.validate()?;
    let mode_models = prepared
        .components
        .par_iter()
        .map(|c| fit_component(c, prepared.split_index, cell, prepared.variant, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleForecaster {
        variant: prepared.variant,
        cell,
        config: config.clone(),
        split_index: prepared.split_index,
        modes: prepared.modes.clone(),
        mode_models,
    })
}

pub fn fit_forecaster(
    series: &TimeSeries,
    variant: Variant,
    cell: CellKind,
    config: &PipelineConfig,
) -> Result<EnsembleForecaster, PipelineError> {
    fit_prepared(&Prepared::new(series, variant, config)?, cell, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingForecast {
    /// Index of the first forecast slot in the full series.
    pub start: usize,
    pub actuals: Vec<f64>,
    pub predictions: Vec<f64>,
    /// `mode_predictions[s][k]`: inverse-scaled prediction of component `k` at step `s`.
    pub mode_predictions: Vec<Vec<f64>>,
}

impl RollingForecast {
    pub fn steps(&self) -> usize {
        self.predictions.len()
    }
}

fn roll_component(model: &ModeModel, split: usize, steps: usize, config: &PipelineConfig) -> Result<Vec<f64>, PipelineError> {
    let l = config.seq_len;
    let scaled = model.scaler.apply_all(&model.values);
    let mut track = model.track.clone();
    let mut vol = model.channel_values(&scaled, track.as_ref(), split);
    let mut net = model.network.clone();
    let mut out = Vec::with_capacity(steps);
    for s in 0..steps {
        let n = split + s;
        let pred = net.predict(&window_at(&scaled, &vol, n, l))?;
        out.push(model.scaler.invert(pred));
        // Reveal the realised value before the next step.
        match model.channel {
            VolChannel::Duplicate => vol.push(scaled[n]),
            VolChannel::Zero => vol.push(0.0),
            VolChannel::Volatility => {
                let t = track.as_mut().expect("volatility channel has a track");
                t.push(model.values[n]);
                let vs = model.vol_scaler.expect("volatility channel has a scaler");
                vol.push(vs.apply(*t.sigma().last().expect("track is non-empty")));
            }
        }
        let retrain = config.retrain_every > 0 && (s + 1) % config.retrain_every == 0 && s + 1 < steps;
        if retrain {
            let data = build_windows(&scaled[..n + 1], &vol, l)?;
            let mut tc = config.train.clone();
            tc.seed = component_seed(config.train.seed, model.mode_index).wrapping_add((s + 1) as u64);
            train_network(&mut net, &data.samples, &tc)?;
        }
    }
    Ok(out)
}

/// One-step-ahead forecasts for the first `steps` test slots. Each component
/// network predicts from its latest window; the actual component value is then
/// appended before the next step. Networks are only retrained when
/// `retrain_every > 0`.
pub fn rolling_forecast(
    forecaster: &EnsembleForecaster,
    series: &TimeSeries,
    steps: usize,
) -> Result<RollingForecast, PipelineError> {
    let split = forecaster.split_index;
    let total = forecaster.mode_models.first().map_or(0, |m| m.values.len());
    if series.len() != total {
        return Err(PipelineError::LengthMismatch {
            left: series.len(),
            right: total,
        });
    }
    let available = total - split;
    if steps > available {
        return Err(PipelineError::HorizonTooLong { steps, available });
    }
    let per_mode = forecaster
        .mode_models
        .par_iter()
        .map(|m| roll_component(m, split, steps, &forecaster.config))
        .collect::<Result<Vec<_>, _>>()?;
    let mode_predictions: Vec<Vec<f64>> = (0..steps)
        .map(|s| per_mode.iter().map(|p| p[s]).collect())
        .collect();
    let predictions = mode_predictions.iter().map(|m| aggregate(m)).collect();
    Ok(RollingForecast {
        start: split,
        actuals: series.values()[split..split + steps].to_vec(),
        predictions,
        mode_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garch::{GarchSpec, VolatilityOptions};
    use crate::neural::{NetworkConfig, TrainConfig};
    use crate::pipeline::{metrics, BenchmarkSpec};
    use crate::vmd::VmdConfig;

    fn tiny_config() -> PipelineConfig {
        PipelineConfig {
            vmd: VmdConfig::with_modes(3),
            volatility: VolatilityOptions {
                spec: GarchSpec { arch: 1, garch: 1 },
                ..VolatilityOptions::default()
            },
            network: NetworkConfig {
                hidden: 4,
                dropout_rate: 0.1,
                seed: 3,
                ..NetworkConfig::default()
            },
            train: TrainConfig {
                epochs: 3,
                batch_size: 16,
                lr: 1e-2,
                seed: 4,
                clip_norm: Some(5.0),
            },
            seq_len: 10,
            ..PipelineConfig::default()
        }
    }

    fn tiny_series() -> TimeSeries {
        BenchmarkSpec {
            len: 200,
            ..BenchmarkSpec::default()
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn nn_only_has_one_model_and_no_modes() {
        let s = tiny_series();
        let f = fit_forecaster(&s, Variant::NnOnly, CellKind::Gru, &tiny_config()).unwrap();
        assert_eq!(f.mode_models.len(), 1);
        assert!(f.modes.is_none());
        assert_eq!(f.split_index, 170);
        assert_eq!(f.model_name(), "GRU");
    }

    #[test]
    fn garch_variant_has_volatility_per_mode() {
        let s = tiny_series();
        let cfg = tiny_config();
        let f = fit_forecaster(&s, Variant::VmdGarchNn, CellKind::Lstm, &cfg).unwrap();
        assert_eq!(f.mode_models.len(), 3);
        for (k, m) in f.mode_models.iter().enumerate() {
            assert_eq!(m.mode_index, k + 1);
            assert!(m.volatility.is_some());
            assert_eq!(m.track.as_ref().unwrap().len(), f.split_index);
        }
        assert_eq!(f.model_name(), "VMD-GARCH-LSTM");
    }

    #[test]
    fn rolling_sums_are_exact_and_reproducible() {
        let s = tiny_series();
        let cfg = tiny_config();
        let f = fit_forecaster(&s, Variant::VmdGarchNn, CellKind::Rnn, &cfg).unwrap();
        let r = rolling_forecast(&f, &s, 12).unwrap();
        assert_eq!(r.steps(), 12);
        for (p, m) in r.predictions.iter().zip(&r.mode_predictions) {
            assert_eq!(p.to_bits(), aggregate(m).to_bits());
        }
        assert_eq!(r.actuals, s.values()[170..182].to_vec());
        let again = rolling_forecast(&fit_forecaster(&s, Variant::VmdGarchNn, CellKind::Rnn, &cfg).unwrap(), &s, 12).unwrap();
        assert_eq!(r, again);
        let rep = metrics(&r.actuals, &r.predictions).unwrap();
        assert!(rep.rmse >= rep.mae);
    }

    #[test]
    fn zero_steps_and_too_many() {
        let s = tiny_series();
        let f = fit_forecaster(&s, Variant::VmdNn, CellKind::Rnn, &tiny_config()).unwrap();
        assert!(rolling_forecast(&f, &s, 0).unwrap().predictions.is_empty());
        assert_eq!(
            rolling_forecast(&f, &s, 31).unwrap_err(),
            PipelineError::HorizonTooLong { steps: 31, available: 30 }
        );
    }

    #[test]
    fn retraining_changes_later_steps_only() {
        let s = tiny_series();
        let mut cfg = tiny_config();
        let f = fit_forecaster(&s, Variant::NnOnly, CellKind::Rnn, &cfg).unwrap();
        let plain = rolling_forecast(&f, &s, 6).unwrap();
        cfg.retrain_every = 3;
        let f2 = EnsembleForecaster {
            config: cfg,
            ..f
        };
        let re = rolling_forecast(&f2, &s, 6).unwrap();
        assert_eq!(plain.predictions[..3], re.predictions[..3]);
        assert_ne!(plain.predictions[3..], re.predictions[3..]);
    }

    #[test]
    fn single_mode_on_tone_tracks_input() {
        let values: Vec<f64> = (0..300)
            .map(|t| (2.0 * std::f64::consts::PI * 0.05 * t as f64).sin())
            .collect();
        let s = TimeSeries::new("tone", values.clone()).unwrap();
        let mut cfg = tiny_config();
        cfg.vmd = VmdConfig::with_modes(1);
        let p = Prepared::new(&s, Variant::VmdNn, &cfg).unwrap();
        assert_eq!(p.components.len(), 1);
        // Skip the boundary region distorted by the mirror extension.
        let m = &p.components[0].values[30..270];
        let values = &values[30..270];
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (ma, mb) = (mean(m), mean(values));
        let cov: f64 = m.iter().zip(values).map(|(a, b)| (a - ma) * (b - mb)).sum();
        let va: f64 = m.iter().map(|a| (a - ma).powi(2)).sum();
        let vb: f64 = values.iter().map(|b| (b - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!(corr > 0.99, "{corr}");
    }

    #[test]
    fn modes_plus_residual_give_test_values() {
        let s = tiny_series();
        let p = Prepared::new(&s, Variant::VmdNn, &tiny_config()).unwrap();
        let modes = p.modes.as_ref().unwrap();
        let norm = s.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for t in p.split_index..s.len() {
            let parts: Vec<f64> = p
                .components
                .iter()
                .map(|c| c.values[t])
                .chain([modes.residual()[t]])
                .collect();
            assert!((aggregate(&parts) - s.values()[t]).abs() <= 1e-10 * norm);
        }
    }

    #[test]
    fn test_segment_does_not_leak_into_fit() {
        let s = tiny_series();
        let cfg = tiny_config();
        let mut perturbed = s.values().to_vec();
        for v in &mut perturbed[170..] {
            *v += 25.0;
        }
        let s2 = TimeSeries::new("perturbed", perturbed).unwrap();
        let a = fit_forecaster(&s, Variant::NnOnly, CellKind::Lstm, &cfg).unwrap();
        let b = fit_forecaster(&s2, Variant::NnOnly, CellKind::Lstm, &cfg).unwrap();
        assert_eq!(a.mode_models[0].scaler, b.mode_models[0].scaler);
        assert_eq!(a.mode_models[0].network, b.mode_models[0].network);

        // With the modes held fixed, perturbing only their test part leaves
        // scalers, volatility fits and networks untouched.
        let modes = decompose_series(&s, &cfg).unwrap();
        let vols = extract_mode_volatility(&modes, 170, &cfg).unwrap();
        let pa = Prepared::from_modes(&s, modes.clone(), Some(vols.clone()), &cfg).unwrap();
        let mut pb = pa.clone();
        for c in &mut pb.components {
            for v in &mut c.values[170..] {
                *v *= 3.0;
            }
        }
        let fa = fit_prepared(&pa, CellKind::Gru, &cfg).unwrap();
        let fb = fit_prepared(&pb, CellKind::Gru, &cfg).unwrap();
        for (x, y) in fa.mode_models.iter().zip(&fb.mode_models) {
            assert_eq!(x.scaler, y.scaler);
            assert_eq!(x.vol_scaler, y.vol_scaler);
            assert_eq!(x.network, y.network);
        }
        // Refitting the scaler on everything would have moved it.
        let full = crate::series::MinMaxScaler::fit(&pb.components[0].values).unwrap();
        assert_ne!(full, fb.mode_models[0].scaler);
    }
}
