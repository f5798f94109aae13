//! Orbit signatures and regime classification of the full system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FullModel, SystemParams};
use crate::solver::{integrate, Coordinate, Direction, EventSpec, SolverConfig, Trajectory};

use super::divergence::divergence_rate;

/// Thresholds of the classification rules. All lengths in time are in
/// multiples of tau where noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Swings above this are LARGE.
    pub large_amplitude: f64,
    /// Swings in (small_min, small_max) are SMALL.
    pub small_min: f64,
    pub small_max: f64,
    /// x-range below which the late orbit is stationary.
    pub stationary_range: f64,
    /// Largest Poincare period searched.
    pub max_period: usize,
    /// Return-matching tolerance relative to the x-range.
    pub period_tol: f64,
    /// Inter-peak interval (in tau) below which spikes form a fast epoch.
    pub fast_interval: f64,
    /// Gap without extrema (in tau) that counts as quiescence.
    pub quiescent_interval: f64,
    /// Minimum LARGE peaks per fast epoch.
    pub burst_min_peaks: usize,
    /// Minimum number of fast-epoch/quiescence cycles.
    pub burst_min_recurrences: usize,
    /// y-excursion below which periodic LARGE spiking is FastSpiking.
    pub spiking_y_excursion: f64,
    /// Divergence-rate threshold for chaos.
    pub chaos_threshold: f64,
    /// Relative envelope variation for amplitude-modulated oscillations.
    pub envelope_variation: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            large_amplitude: 2.0,
            small_min: 1e-3,
            small_max: 0.5,
            stationary_range: 1e-3,
            max_period: 32,
            period_tol: 1e-3,
            fast_interval: 5.0,
            quiescent_interval: 10.0,
            burst_min_peaks: 3,
            burst_min_recurrences: 2,
            spiking_y_excursion: 0.1,
            chaos_threshold: 0.01,
            envelope_variation: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    Stationary,
    SmallCycle,
    Relaxation,
    #[serde(rename = "MMO")]
    Mmo,
    FastSpiking,
    Bursting,
    TorusCanardLike,
    Chaotic,
    Unclassified,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Stationary => "Stationary",
            RegimeLabel::SmallCycle => "SmallCycle",
            RegimeLabel::Relaxation => "Relaxation",
            RegimeLabel::Mmo => "MMO",
            RegimeLabel::FastSpiking => "FastSpiking",
            RegimeLabel::Bursting => "Bursting",
            RegimeLabel::TorusCanardLike => "TorusCanardLike",
            RegimeLabel::Chaotic => "Chaotic",
            RegimeLabel::Unclassified => "Unclassified",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwingSize {
    Small,
    Large,
}

/// A local maximum of x with the swing from the preceding minimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub swing: f64,
    pub size: SwingSize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OrbitStats {
    /// LARGE and SMALL peaks per period when periodic, else over the window.
    pub large_count: usize,
    pub small_count: usize,
    /// Period in time units, when periodic.
    pub period: Option<f64>,
    /// Number of section crossings per period.
    pub period_crossings: Option<usize>,
    /// Late peak-to-peak amplitude of x.
    pub x_amplitude: f64,
    pub y_excursion: f64,
    pub n_peaks: usize,
    pub interpeak_mean: Option<f64>,
    pub interpeak_min: Option<f64>,
    pub interpeak_max: Option<f64>,
    pub divergence_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: RegimeLabel,
    pub stats: OrbitStats,
}

/// Peaks of x after the transient with swing above `small_min`.
pub fn extract_peaks(tr: &Trajectory, cc: &ClassifierConfig) -> Vec<Peak> {
    let start = tr.index_at(tr.t_discard());
    let s = tr.states();
    let mut peaks = Vec::new();
    let mut last_min: Option<f64> = None;
    for i in start.max(1)..s.len().saturating_sub(1) {
        let (a, b, c) = (s[i - 1].x, s[i].x, s[i + 1].x);
        if b < a && b <= c {
            last_min = Some(last_min.map_or(b, |m: f64| m.min(b)));
        } else if b > a && b >= c {
            if let Some(lo) = last_min {
                let swing = b - lo;
                if swing > cc.small_min {
                    let size = swing_size(swing, lo, b, cc);
                    if let Some(size) = size {
                        peaks.push(Peak { t: tr.time(i), x: b, y: s[i].y, swing, size });
                    }
                    last_min = None;
                }
            }
        }
    }
    peaks
}

/// LARGE above the large threshold, SMALL inside the small band. Swings in
/// between are LARGE only if they cross a fold x = +-1.
fn swing_size(swing: f64, lo: f64, hi: f64, cc: &ClassifierConfig) -> Option<SwingSize> {
    if swing > cc.large_amplitude {
        Some(SwingSize::Large)
    } else if swing > cc.small_min && swing < cc.small_max {
        Some(SwingSize::Small)
    } else if swing >= cc.small_max {
        let crosses = (lo < -1.0 && hi > -1.0) || (lo < 1.0 && hi > 1.0);
        Some(if crosses { SwingSize::Large } else { SwingSize::Small })
    } else {
        None
    }
}

/// Poincare data: section level, crossing times and states (x, x_delayed).
#[derive(Clone, Debug)]
pub struct SectionData {
    pub level: f64,
    pub times: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

/// Up-crossings of y = level after the transient, reported as x_{t - tau}.
pub fn poincare_sequence(tr: &Trajectory, level: f64) -> Result<Vec<f64>> {
    let c = tr.detect_crossings(&EventSpec::new(Coordinate::Y, level, Direction::Up));
    if c.is_empty() {
        return Err(Error::EmptySection);
    }
    Ok(c.into_iter().map(|c| c.x_delayed).collect())
}

fn section_at_mid(tr: &Trajectory) -> Option<SectionData> {
    let start = tr.index_at(tr.t_discard());
    let tail = &tr.states()[start..];
    let (ylo, yhi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.y), h.max(s.y)));
    let (xlo, xhi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.x), h.max(s.x)));
    // Use y when it moves, x otherwise (frozen slow variable).
    let (coord, level) = if yhi - ylo > 1e-9 {
        (Coordinate::Y, 0.5 * (ylo + yhi))
    } else if xhi - xlo > 1e-9 {
        (Coordinate::X, 0.5 * (xlo + xhi))
    } else {
        return None;
    };
    let c = tr.detect_crossings(&EventSpec::new(coord, level, Direction::Up));
    Some(SectionData {
        level,
        times: c.iter().map(|c| c.t).collect(),
        points: c.iter().map(|c| (c.state.x, c.x_delayed)).collect(),
    })
}

/// Smallest p <= max_p such that the crossing states repeat with period p
/// over the second half of the sequence.
pub fn detect_period(points: &[(f64, f64)], max_p: usize, tol: f64) -> Option<usize> {
    let n = points.len();
    let first = n / 2;
    for p in 1..=max_p {
        if n < first + p + 2 || first + p >= n {
            break;
        }
        let from = first.max(p);
        let ok = (from..n).all(|i| {
            let (a, b) = (points[i], points[i - p]);
            (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol
        });
        if ok && n - from >= p + 1 {
            return Some(p);
        }
    }
    None
}

/// Fast epochs: maximal runs of LARGE peaks with gaps below the fast
/// interval. Returns (first index, last index) into `peaks`.
pub fn fast_epochs(peaks: &[Peak], tau: f64, cc: &ClassifierConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < peaks.len() {
        if peaks[i].size != SwingSize::Large {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < peaks.len()
            && peaks[j + 1].size == SwingSize::Large
            && peaks[j + 1].t - peaks[j].t < cc.fast_interval * tau
        {
            j += 1;
        }
        out.push((i, j));
        i = j + 1;
    }
    out
}

fn monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0])
}

/// Recurrent alternation of fast epochs and quiescence with monotone y drift
/// in each epoch. Quiescence is a gap between consecutive extrema longer
/// than the quiescent interval, found before the next fast epoch.
pub fn is_bursting(tr: &Trajectory, peaks: &[Peak], cc: &ClassifierConfig) -> bool {
    let tau = tr.tau();
    let step = tr.steps_per_delay().max(1);
    let epochs: Vec<(usize, usize)> = fast_epochs(peaks, tau, cc)
        .into_iter()
        .filter(|&(i, j)| {
            let ys: Vec<f64> = peaks[i..=j].iter().map(|p| p.y).collect();
            j + 1 - i >= cc.burst_min_peaks && monotone(&ys)
        })
        .collect();
    let mut recurrences = 0;
    for (e, &(_, j)) in epochs.iter().enumerate() {
        let end = epochs.get(e + 1).map_or(peaks.len() - 1, |&(i, _)| i);
        let quiet = (j..end).find(|&k| peaks[k + 1].t - peaks[k].t > cc.quiescent_interval * tau);
        let Some(k) = quiet else { continue };
        // y sampled once per delay through the quiet stretch.
        let (a, b) = (tr.index_at(peaks[k].t + tau), tr.index_at(peaks[k + 1].t - tau));
        let drift: Vec<f64> = (a..b.max(a)).step_by(step).map(|n| tr.states()[n].y).collect();
        if monotone(&drift) {
            recurrences += 1;
        }
    }
    recurrences >= cc.burst_min_recurrences
}

fn envelope_modulated(peaks: &[Peak], tau: f64, cc: &ClassifierConfig) -> bool {
    if peaks.len() < 10 {
        return false;
    }
    let fast = peaks.windows(2).all(|w| w[1].t - w[0].t < cc.fast_interval * tau);
    let (lo, hi) = peaks.iter().fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.swing), h.max(p.swing)));
    fast && hi > 0.0 && (hi - lo) / hi > cc.envelope_variation
}

fn interpeak(peaks: &[Peak]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if peaks.len() < 2 {
        return (None, None, None);
    }
    let d: Vec<f64> = peaks.windows(2).map(|w| w[1].t - w[0].t).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (Some(mean), Some(min), Some(max))
}

/// Classify a computed trajectory. `lambda` supplies the divergence rate on
/// demand (only non-periodic orbits need it).
pub fn classify_trajectory<F>(tr: &Trajectory, cc: &ClassifierConfig, lambda: F) -> Result<Classification>
where
    F: FnOnce() -> Result<f64>,
{
    let start = tr.index_at(tr.t_discard());
    let tail = &tr.states()[start..];
    // Peaks are maxima of x, so fix the orientation: orbits with negative mean
    // are analysed in reflected coordinates. Labels at a and -a then agree.
    if tail.iter().map(|s| s.x).sum::<f64>() < 0.0 {
        return classify_trajectory(&tr.reflected(), cc, lambda);
    }
    let (xlo, xhi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.x), h.max(s.x)));
    let (ylo, yhi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.y), h.max(s.y)));
    let mut stats = OrbitStats { x_amplitude: xhi - xlo, y_excursion: yhi - ylo, ..Default::default() };
    if xhi - xlo < cc.stationary_range {
        return Ok(Classification { label: RegimeLabel::Stationary, stats });
    }
    let peaks = extract_peaks(tr, cc);
    stats.n_peaks = peaks.len();
    let (mean, min, max) = interpeak(&peaks);
    stats.interpeak_mean = mean;
    stats.interpeak_min = min;
    stats.interpeak_max = max;
    let tau = tr.tau();
    let bursting = is_bursting(tr, &peaks, cc);

    let section = section_at_mid(tr);
    let period = section.as_ref().and_then(|s| {
        detect_period(&s.points, cc.max_period, cc.period_tol * (xhi - xlo)).map(|p| (p, s))
    });
    if let Some((p, sec)) = period {
        let n = sec.times.len();
        let t1 = sec.times[n - 1];
        let t0 = sec.times[n - 1 - p];
        stats.period = Some(t1 - t0);
        stats.period_crossings = Some(p);
        let in_period: Vec<&Peak> = peaks.iter().filter(|pk| pk.t > t0 && pk.t <= t1).collect();
        stats.large_count = in_period.iter().filter(|pk| pk.size == SwingSize::Large).count();
        stats.small_count = in_period.iter().filter(|pk| pk.size == SwingSize::Small).count();
        let period_ys: Vec<f64> = tr.states()[tr.index_at(t0)..=tr.index_at(t1)].iter().map(|s| s.y).collect();
        let y_exc = period_ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - period_ys.iter().copied().fold(f64::INFINITY, f64::min);
        let label = if bursting {
            RegimeLabel::Bursting
        } else {
            match (stats.large_count > 0, stats.small_count > 0) {
                (false, true) => RegimeLabel::SmallCycle,
                (true, false) => {
                    let spiking = stats.interpeak_max.map_or(false, |d| d < cc.fast_interval * tau)
                        && y_exc < cc.spiking_y_excursion;
                    if spiking {
                        RegimeLabel::FastSpiking
                    } else {
                        RegimeLabel::Relaxation
                    }
                }
                (true, true) => RegimeLabel::Mmo,
                (false, false) => RegimeLabel::Unclassified,
            }
        };
        return Ok(Classification { label, stats });
    }

    stats.large_count = peaks.iter().filter(|p| p.size == SwingSize::Large).count();
    stats.small_count = peaks.iter().filter(|p| p.size == SwingSize::Small).count();
    let lam = lambda()?;
    stats.divergence_rate = Some(lam);
    let label = if lam > cc.chaos_threshold {
        RegimeLabel::Chaotic
    } else if bursting {
        RegimeLabel::Bursting
    } else if envelope_modulated(&peaks, tau, cc) {
        RegimeLabel::TorusCanardLike
    } else if stats.large_count > 0 && stats.small_count > 0 {
        RegimeLabel::Mmo
    } else {
        RegimeLabel::Unclassified
    };
    Ok(Classification { label, stats })
}

/// Integrate the full system and classify the late orbit.
pub fn classify(p: &SystemParams, cfg: &SolverConfig, cc: &ClassifierConfig) -> Result<Classification> {
    if !(p.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("classification needs epsilon > 0, got {}", p.epsilon)));
    }
    p.validate()?;
    let tr = integrate(FullModel(*p), cfg)?;
    classify_trajectory(&tr, cc, || divergence_rate(p, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_detection_on_synthetic_sequences() {
        let seq: Vec<(f64, f64)> = (0..40).map(|i| ((i % 3) as f64, 0.5 * (i % 3) as f64)).collect();
        assert_eq!(detect_period(&seq, 32, 1e-6), Some(3));
        let seq: Vec<(f64, f64)> = (0..40).map(|i| ((i as f64 * 0.7).sin(), 0.0)).collect();
        assert_eq!(detect_period(&seq, 8, 1e-6), None);
        let seq: Vec<(f64, f64)> = (0..40).map(|_| (1.0, 2.0)).collect();
        assert_eq!(detect_period(&seq, 32, 1e-6), Some(1));
    }

    #[test]
    fn swing_sizes() {
        let cc = ClassifierConfig::default();
        assert_eq!(swing_size(3.0, -1.5, 1.5, &cc), Some(SwingSize::Large));
        assert_eq!(swing_size(0.1, 1.0, 1.1, &cc), Some(SwingSize::Small));
        assert_eq!(swing_size(1.0, 0.5, 1.5, &cc), Some(SwingSize::Large));
        assert_eq!(swing_size(1.0, 1.2, 2.2, &cc), Some(SwingSize::Small));
        assert_eq!(swing_size(1e-4, 1.0, 1.0001, &cc), None);
    }
}
