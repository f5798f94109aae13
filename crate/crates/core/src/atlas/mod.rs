//! Simulation-driven global analysis of the delayed system.

pub mod divergence;
pub mod export;
pub mod fast;
pub mod orbit;

pub use divergence::{divergence_rate, divergence_rate_with, DIVERGENCE_DELTA};
pub use export::{gnuplot_script, write_atlas_csv, AtlasRow, AtlasSweep, PlotKind};
pub use fast::{
    augmented_manifold, cycle_average, fast_fate, flc_locate, homoclinic_proxy, homoclinic_proxy_near_bt, portrait,
    predict_regime, saddle_histories, unstable_cycle_bracket, write_portrait_csv, AugmentedSlowManifold,
    AverageKind, BtHomoclinicEstimate, CycleAverage, CycleBracket, Fate, FlcEstimate, HomoclinicEstimate,
    PortraitCurve, PredictedRegime,
};
pub use orbit::{
    classify, classify_trajectory, detect_period, extract_peaks, poincare_sequence, Classification,
    ClassifierConfig, OrbitStats, Peak, RegimeLabel, SwingSize,
};
