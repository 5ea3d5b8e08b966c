//! Whole-pipeline runs on the synthetic benchmark with small networks.

use modecast_core::garch::{GarchSpec, VolatilityOptions};
use modecast_core::neural::{CellKind, NetworkConfig, TrainConfig};
use modecast_core::pipeline::{
    aggregate, fit_forecaster, metrics, rolling_forecast, synthetic_benchmark, PipelineConfig, Variant,
};
use modecast_core::vmd::VmdConfig;

fn small_config() -> PipelineConfig {
    PipelineConfig {
        vmd: VmdConfig {
            modes: 4,
            alpha: 100.0,
            ..VmdConfig::default()
        },
        volatility: VolatilityOptions {
            spec: GarchSpec::new(1, 1).unwrap(),
            ..VolatilityOptions::default()
        },
        network: NetworkConfig {
            hidden: 6,
            layers: 1,
            dropout_rate: 0.0,
            seed: 1,
            ..NetworkConfig::default()
        },
        train: TrainConfig {
            epochs: 4,
            batch_size: 32,
            lr: 1e-2,
            seed: 2,
            clip_norm: Some(5.0),
        },
        seq_len: 20,
        ..PipelineConfig::default()
    }
}

#[test]
fn every_variant_sums_its_components_and_repeats_exactly() {
    let series = synthetic_benchmark();
    let cfg = small_config();
    for variant in Variant::ALL {
        let run = || {
            let f = fit_forecaster(&series, variant, CellKind::Gru, &cfg).unwrap();
            rolling_forecast(&f, &series, 8).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.predictions, b.predictions, "{variant} is not deterministic");
        for (p, parts) in a.predictions.iter().zip(&a.mode_predictions) {
            assert_eq!(p.to_bits(), aggregate(parts).to_bits());
        }
        assert_eq!(a.actuals, series.values()[a.start..a.start + 8]);
        let r = metrics(&a.actuals, &a.predictions).unwrap();
        assert!(r.rmse.is_finite() && r.rmse >= r.mae, "{variant}: {r:?}");
    }
}
