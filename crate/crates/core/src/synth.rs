//! Seed-deterministic synthetic EEG sessions.
//!
//! Each session is sixteen image-stream trials with beep and image-onset
//! triggers, pink-ish background noise plus a 10 Hz alpha component, a small
//! visual evoked response at every image onset, and a larger centro-parietal
//! response when the target image appears. The boxed (`Ai`) paradigm scales
//! the target response by `ai_gain`, halves the latency jitter, and plants a
//! weaker distractor response in non-target trials.
//!
//! Determinism contract: the whole dataset is a pure function of
//! [`SynthConfig`]. Every session derives an independent stream from
//! (seed, subject, session, paradigm); within a trial the draw order is
//! fixed (jitter, then the distractor position when the paradigm is `Ai`,
//! then noise), and unused draws are still taken so that target and
//! non-target trials consume identical randomness.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::eeg::{
    default_channel_names, time_to_sample, EegRecording, Paradigm, SessionManifest, TrialLabel,
    TriggerCode, TriggerEvent, IMAGES_PER_TRIAL, TARGETS_PER_SESSION, TRIALS_PER_SESSION,
    TRIAL_PADDING_SEC,
};
use crate::real::{round_half_away, sin};
use crate::rng::Rng;
use crate::tensor::Array2;

/// Empirical standard deviation of the pink filter output when driven by
/// unit-variance white noise; used to rescale the filter to unit std.
const PINK_UNIT_STD: f64 = 3.07;

/// Samples fed through the pink filter before the first kept sample, so the
/// filter state is past its zero-initialized transient.
const PINK_WARMUP: usize = 128;

const ALPHA_FREQ_HZ: f64 = 10.0;

/// Centro-parietal spread of the target response; maximum 1.0 at Pz, with
/// the usual parieto-occipital bleed.
const P300_TOPOGRAPHY: &[(&str, f64)] = &[
    ("Pz", 1.0),
    ("CP1", 0.8),
    ("CP2", 0.8),
    ("Cz", 0.7),
    ("P3", 0.6),
    ("P4", 0.6),
    ("CP5", 0.4),
    ("CP6", 0.4),
    ("C3", 0.3),
    ("C4", 0.3),
    ("PO3", 0.3),
    ("PO4", 0.3),
    ("O1", 0.15),
    ("Oz", 0.15),
    ("O2", 0.15),
];

/// Occipital spread of the image-onset response; maximum 1.0 at Oz. Visual
/// responses volume-conduct into parietal sites, so the two topographies
/// overlap and spatial pattern alone cannot separate the responses.
const VEP_TOPOGRAPHY: &[(&str, f64)] = &[
    ("Oz", 1.0),
    ("O1", 0.8),
    ("O2", 0.8),
    ("PO3", 0.5),
    ("PO4", 0.5),
    ("P7", 0.3),
    ("P8", 0.3),
    ("P3", 0.4),
    ("P4", 0.4),
    ("Pz", 0.3),
    ("CP1", 0.2),
    ("CP2", 0.2),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_subjects: usize,
    pub sessions_per_paradigm: usize,
    pub sample_rate_hz: f64,
    pub n_channels: usize,
    pub noise_std_uv: f64,
    /// Fraction of the noise amplitude shared across channels (volume
    /// conduction); per-channel std stays `noise_std_uv`.
    pub noise_spatial_corr: f64,
    /// Rate of spontaneous background deflections (slow waves), per second.
    /// Part of the background model: present identically in target and
    /// non-target trials, amplitude tied to `noise_std_uv`.
    pub transient_rate_hz: f64,
    /// Peak amplitude scale of background deflections, in microvolts when
    /// `noise_std_uv` is at its default; scales proportionally with it.
    pub transient_amp_uv: f64,
    pub p300_amp_uv: f64,
    pub p300_latency_sec: f64,
    pub p300_width_sec: f64,
    pub latency_jitter_std_sec: f64,
    /// Log-std of the per-trial evoked amplitude factor (lognormal with
    /// unit median); single-trial responses vary this much around the
    /// configured amplitudes.
    pub amplitude_jitter_log_std: f64,
    pub vep_amp_uv: f64,
    /// Amplitude of the sustained late positivity that follows a target
    /// response; integrates over seconds at parietal sites.
    pub sustained_amp_uv: f64,
    /// Duration of the sustained component, seconds.
    pub sustained_duration_sec: f64,
    pub ai_gain: f64,
    pub ai_distractor_amp_uv: f64,
    pub inter_trial_gap_sec: f64,
    pub alpha_amp_uv: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_subjects: 4,
            sessions_per_paradigm: 4,
            sample_rate_hz: 250.0,
            n_channels: 32,
            noise_std_uv: 2.0,
            noise_spatial_corr: 0.96,
            transient_rate_hz: 0.5,
            transient_amp_uv: 2.0,
            p300_amp_uv: 4.0,
            p300_latency_sec: 0.3,
            p300_width_sec: 0.12,
            latency_jitter_std_sec: 0.08,
            amplitude_jitter_log_std: 0.5,
            vep_amp_uv: 1.0,
            sustained_amp_uv: 1.2,
            sustained_duration_sec: 2.5,
            ai_gain: 1.5,
            ai_distractor_amp_uv: 1.5,
            inter_trial_gap_sec: 5.0,
            alpha_amp_uv: 1.0,
        }
    }
}

impl SynthConfig {
    /// Root stream for one session; independent per (seed, subject,
    /// session, paradigm) so sessions can be generated in any order.
    pub fn session_rng(&self, subject_id: &str, session_index: usize, paradigm: Paradigm) -> Rng {
        Rng::new(self.seed)
            .derive("synth")
            .derive(subject_id)
            .derive_u64(session_index as u64)
            .derive(paradigm.tag())
    }

    /// Trial block length in samples: the image stream plus the response gap.
    pub fn trial_block_len(&self, transition_sec: f64) -> usize {
        round_half_away(
            (IMAGES_PER_TRIAL as f64 * transition_sec + self.inter_trial_gap_sec)
                * self.sample_rate_hz,
        ) as usize
    }

    /// End of the padded segment (stream + 0.5 s), in samples from the beep.
    pub fn padded_segment_len(&self, transition_sec: f64) -> usize {
        round_half_away(
            (IMAGES_PER_TRIAL as f64 * transition_sec + TRIAL_PADDING_SEC) * self.sample_rate_hz,
        ) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SynthError {
    /// 0.1 s transitions do not exist in the Ai paradigm.
    LabelParadigmMismatch { trial_index: usize },
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::LabelParadigmMismatch { trial_index } => {
                write!(f, "trial {trial_index}: 0.1 s transition is invalid under the ai paradigm")
            }
        }
    }
}

impl core::error::Error for SynthError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseKind {
    P300,
    Vep,
    Distractor,
    /// Sustained late positivity after a target: low amplitude, seconds
    /// long, same topography as the transient response.
    Sustained,
}

/// One template instance inside a trial block.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub kind: ResponseKind,
    pub start_sample: usize,
    /// Multiplier on the template (1.0 except for the Ai target gain).
    pub scale: f32,
}

/// One unit-std pink series (Kellet filtered white noise, spectral slope
/// ~1/f), `n` samples after warmup.
fn pink_series(n: usize, rng: &mut Rng) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec::Vec::with_capacity(n);
    let mut b = [0.0f64; 7];
    for i in 0..(PINK_WARMUP + n) {
        let white = rng.next_gaussian();
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let pink = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
        b[6] = white * 0.115926;
        if i >= PINK_WARMUP {
            out.push(pink / PINK_UNIT_STD);
        }
    }
    out
}

/// Background EEG: pink noise (filtered white noise, spectral slope ~1/f)
/// of std ~ `noise_std_uv` per channel, a 10 Hz sinusoid of amplitude
/// `alpha_amp_uv` with a per-channel random phase, and sparse spontaneous
/// slow-wave deflections.
///
/// The pink part mixes a series shared by all channels (weight
/// `noise_spatial_corr`, the volume-conducted background every electrode
/// sees) with an independent per-channel series; the weights keep the
/// per-channel std at `noise_std_uv`. The deflections occur at random
/// times with random sign, width, and spread — half of them carry the
/// centro-parietal topography of a real slow wave — and their amplitude
/// scales with `noise_std_uv`, so a zero-noise configuration is exactly
/// silent. Draw order: the shared series, then per channel (alpha phase,
/// own series), then the deflection events.
pub fn make_noise(config: &SynthConfig, n_channels: usize, n_samples: usize, rng: &mut Rng) -> Array2 {
    let mut out = Array2::zeros(n_channels, n_samples);
    let rho = config.noise_spatial_corr.clamp(0.0, 1.0);
    let shared_w = rho * config.noise_std_uv;
    let own_w = libm::sqrt(1.0 - rho * rho) * config.noise_std_uv;
    let two_pi = 2.0 * core::f64::consts::PI;
    let shared = pink_series(n_samples, rng);
    for ch in 0..n_channels {
        let phase = rng.next_f64() * two_pi;
        let own = pink_series(n_samples, rng);
        let row = out.row_mut(ch);
        for i in 0..n_samples {
            let t = i as f64 / config.sample_rate_hz;
            let alpha = config.alpha_amp_uv * sin(two_pi * ALPHA_FREQ_HZ * t + phase);
            row[i] = (shared_w * shared[i] + own_w * own[i] + alpha) as f32;
        }
    }
    add_background_transients(config, &mut out, rng);
    out
}

/// Spontaneous slow-wave deflections. Event count is a fixed function of
/// the duration, so the draw count never depends on earlier draws.
fn add_background_transients(config: &SynthConfig, out: &mut Array2, rng: &mut Rng) {
    let n_channels = out.rows();
    let n_samples = out.cols();
    let fs = config.sample_rate_hz;
    let duration = n_samples as f64 / fs;
    let n_events = round_half_away(config.transient_rate_hz * duration) as usize;
    // Amplitude rides the noise dial: silence at noise_std_uv = 0.
    let amp_scale = config.transient_amp_uv * (config.noise_std_uv / 2.0);
    let names = default_channel_names(n_channels);
    for _ in 0..n_events {
        let center = rng.next_below(n_samples.max(1));
        let width_sec = 0.08 + rng.next_f64() * 0.2;
        let amp = amp_scale * (0.4 + 0.5 * rng.next_f64());
        let sign = if rng.next_below(2) == 0 { 1.0 } else { -1.0 };
        let parietal = rng.next_below(2) == 0;
        // Always drawn, used by the non-parietal branch only.
        let mut random_channels = [0usize; 6];
        let mut random_weights = [0f64; 6];
        for k in 0..6 {
            random_channels[k] = rng.next_below(n_channels.max(1));
            random_weights[k] = rng.next_f64();
        }
        let mut weights = alloc::vec![0.0f64; n_channels];
        if parietal {
            for &(name, w) in P300_TOPOGRAPHY {
                if let Some(ix) = names.iter().position(|n| n == name) {
                    weights[ix] = w;
                }
            }
        } else {
            for k in 0..6 {
                let w = weights[random_channels[k]].max(random_weights[k]);
                weights[random_channels[k]] = w;
            }
        }
        let half = round_half_away(3.0 * width_sec * fs) as i64;
        let start = (center as i64 - half).max(0);
        let end = ((center as i64 + half) as usize).min(n_samples.saturating_sub(1));
        for ch in 0..n_channels {
            if weights[ch] == 0.0 {
                continue;
            }
            let row = out.row_mut(ch);
            for i in start as usize..=end {
                let dt = (i as f64 - center as f64) / fs / width_sec;
                row[i] += (sign * amp * weights[ch] * libm::exp(-0.5 * dt * dt)) as f32;
            }
        }
    }
}

/// Builds the `[n_channels x template_len]` response template for `kind`.
///
/// The time course is a Gaussian bump; the spatial pattern is the fixed
/// topography above, resolved against the default montage names. The
/// template covers the peak plus four widths, so its tail is negligible at
/// the cut.
pub fn make_erp_template(config: &SynthConfig, kind: ResponseKind) -> Array2 {
    let fs = config.sample_rate_hz;
    if kind == ResponseKind::Sustained {
        // Smoothed plateau: raised-cosine ramps (0.2 s) around a flat top.
        let ramp = 0.2f64;
        let total = config.sustained_duration_sec.max(2.0 * ramp);
        let len = time_to_sample(fs, total).unwrap_or(0) + 1;
        let names = default_channel_names(config.n_channels);
        let mut weights = vec![0.0f64; config.n_channels];
        for &(name, w) in P300_TOPOGRAPHY {
            if let Some(ix) = names.iter().position(|n| n == name) {
                weights[ix] = w;
            }
        }
        let mut out = Array2::zeros(config.n_channels, len);
        for i in 0..len {
            let t = i as f64 / fs;
            let course = if t < ramp {
                0.5 * (1.0 - libm::cos(core::f64::consts::PI * t / ramp))
            } else if t > total - ramp {
                0.5 * (1.0 - libm::cos(core::f64::consts::PI * (total - t) / ramp))
            } else {
                1.0
            };
            for ch in 0..config.n_channels {
                if weights[ch] != 0.0 {
                    out.set(ch, i, (config.sustained_amp_uv * weights[ch] * course) as f32);
                }
            }
        }
        return out;
    }
    let (amp, peak_sec, width_sec, topography) = match kind {
        ResponseKind::P300 => (
            config.p300_amp_uv,
            config.p300_latency_sec,
            config.p300_width_sec,
            P300_TOPOGRAPHY,
        ),
        ResponseKind::Vep => (config.vep_amp_uv, 0.1, 0.03, VEP_TOPOGRAPHY),
        ResponseKind::Distractor => (
            config.ai_distractor_amp_uv,
            config.p300_latency_sec,
            config.p300_width_sec,
            P300_TOPOGRAPHY,
        ),
        ResponseKind::Sustained => unreachable!("handled above"),
    };
    let len = time_to_sample(fs, peak_sec + 4.0 * width_sec).unwrap_or(0) + 1;
    let peak_idx = time_to_sample(fs, peak_sec).unwrap_or(0);
    let names = default_channel_names(config.n_channels);
    let mut weights = vec![0.0f64; config.n_channels];
    for &(name, w) in topography {
        if let Some(ix) = names.iter().position(|n| n == name) {
            weights[ix] = w;
        }
    }
    let mut out = Array2::zeros(config.n_channels, len);
    for i in 0..len {
        let course = if width_sec > 0.0 {
            let dt = (i as f64 / fs) - peak_sec;
            let z = dt / width_sec;
            libm::exp(-0.5 * z * z)
        } else if i == peak_idx {
            1.0
        } else {
            0.0
        };
        for ch in 0..config.n_channels {
            if weights[ch] != 0.0 {
                out.set(ch, i, (amp * weights[ch] * course) as f32);
            }
        }
    }
    out
}

/// Decides where every response template lands in one trial block.
///
/// Draw order is fixed: one Gaussian for the latency jitter, one Gaussian
/// for the amplitude factor (both taken even when no evoked response
/// exists), then one uniform for the distractor position whenever the
/// paradigm is `Ai`.
pub fn plan_trial(
    config: &SynthConfig,
    label: &TrialLabel,
    paradigm: Paradigm,
    rng: &mut Rng,
) -> Result<Vec<Placement>, SynthError> {
    if paradigm == Paradigm::Ai && label.transition_sec != 0.5 {
        return Err(SynthError::LabelParadigmMismatch {
            trial_index: label.trial_index,
        });
    }
    let fs = config.sample_rate_hz;
    let jitter_std = match paradigm {
        Paradigm::Normal => config.latency_jitter_std_sec,
        Paradigm::Ai => config.latency_jitter_std_sec * 0.5,
    };
    let jitter_sec = rng.next_gaussian() * jitter_std;
    // Lognormal with unit median: weak responses are as common as strong.
    let amp_factor =
        libm::exp(rng.next_gaussian() * config.amplitude_jitter_log_std) as f32;
    let distractor_image = if paradigm == Paradigm::Ai {
        Some(rng.next_below(IMAGES_PER_TRIAL))
    } else {
        None
    };

    let mut placements = Vec::with_capacity(IMAGES_PER_TRIAL + 1);
    for k in 0..IMAGES_PER_TRIAL {
        placements.push(Placement {
            kind: ResponseKind::Vep,
            start_sample: round_half_away(k as f64 * label.transition_sec * fs) as usize,
            scale: 1.0,
        });
    }

    // The evoked response is clamped so the whole template stays inside the
    // padded segment, where the detectors can see it.
    let padded_len = config.padded_segment_len(label.transition_sec);
    let clamp_start = |onset_sec: f64, template_len: usize| -> usize {
        let raw = round_half_away((onset_sec + jitter_sec) * fs) as i64;
        let max_start = padded_len.saturating_sub(template_len) as i64;
        raw.clamp(0, max_start) as usize
    };

    if label.target_present {
        let onset = label
            .target_onset_sec
            .unwrap_or(label.transition_sec * label.target_image_index.unwrap_or(0) as f64);
        let template_len = make_template_len(config, ResponseKind::P300);
        let scale = match paradigm {
            Paradigm::Normal => amp_factor,
            Paradigm::Ai => config.ai_gain as f32 * amp_factor,
        };
        placements.push(Placement {
            kind: ResponseKind::P300,
            start_sample: clamp_start(onset, template_len),
            scale,
        });
        if config.sustained_amp_uv > 0.0 {
            // The late positivity sets in after the transient peak and is
            // clipped at the padded segment like everything else.
            let sustained_len = make_template_len(config, ResponseKind::Sustained);
            let start = clamp_start(onset + config.p300_latency_sec + 0.1, sustained_len.min(padded_len));
            placements.push(Placement {
                kind: ResponseKind::Sustained,
                start_sample: start,
                scale,
            });
        }
    } else if let Some(image) = distractor_image {
        let onset = image as f64 * label.transition_sec;
        let template_len = make_template_len(config, ResponseKind::Distractor);
        placements.push(Placement {
            kind: ResponseKind::Distractor,
            start_sample: clamp_start(onset, template_len),
            scale: amp_factor,
        });
    }
    Ok(placements)
}

fn make_template_len(config: &SynthConfig, kind: ResponseKind) -> usize {
    let (peak, width) = match kind {
        ResponseKind::P300 | ResponseKind::Distractor => {
            (config.p300_latency_sec, config.p300_width_sec)
        }
        ResponseKind::Vep => (0.1, 0.03),
        ResponseKind::Sustained => {
            return time_to_sample(
                config.sample_rate_hz,
                config.sustained_duration_sec.max(0.4),
            )
            .unwrap_or(0)
                + 1
        }
    };
    time_to_sample(config.sample_rate_hz, peak + 4.0 * width).unwrap_or(0) + 1
}

/// Pre-rendered templates for one configuration.
pub struct TemplateSet {
    pub p300: Array2,
    pub vep: Array2,
    pub distractor: Array2,
    pub sustained: Array2,
}

impl TemplateSet {
    pub fn render(config: &SynthConfig) -> Self {
        TemplateSet {
            p300: make_erp_template(config, ResponseKind::P300),
            vep: make_erp_template(config, ResponseKind::Vep),
            distractor: make_erp_template(config, ResponseKind::Distractor),
            sustained: make_erp_template(config, ResponseKind::Sustained),
        }
    }

    pub fn get(&self, kind: ResponseKind) -> &Array2 {
        match kind {
            ResponseKind::P300 => &self.p300,
            ResponseKind::Vep => &self.vep,
            ResponseKind::Distractor => &self.distractor,
            ResponseKind::Sustained => &self.sustained,
        }
    }
}

/// Adds each placed template into `signal`. Responses sum linearly where
/// they overlap; a template is clipped if the block ends first.
pub fn apply_placements(signal: &mut Array2, templates: &TemplateSet, placements: &[Placement]) {
    for p in placements {
        let t = templates.get(p.kind);
        let avail = signal.cols().saturating_sub(p.start_sample);
        let len = t.cols().min(avail);
        if len == 0 {
            continue;
        }
        for ch in 0..signal.rows() {
            let dst = &mut signal.row_mut(ch)[p.start_sample..p.start_sample + len];
            let src = &t.row(ch)[..len];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * p.scale;
            }
        }
    }
}

/// One trial block (image stream plus the 5 s response gap), with noise and
/// all evoked responses rendered in.
pub fn synth_trial(
    config: &SynthConfig,
    label: &TrialLabel,
    paradigm: Paradigm,
    rng: &mut Rng,
) -> Result<Array2, SynthError> {
    let placements = plan_trial(config, label, paradigm, rng)?;
    let n = config.trial_block_len(label.transition_sec);
    let mut signal = make_noise(config, config.n_channels, n, rng);
    let templates = TemplateSet::render(config);
    apply_placements(&mut signal, &templates, &placements);
    Ok(signal)
}

/// A full sixteen-trial session: recording with triggers, plus the ground
/// truth manifest.
///
/// Per-session draws, in order: the transition shuffle (Normal only), the
/// eight target trials, each target's image index, then per trial the plan
/// and noise draws of [`synth_trial`].
pub fn synth_session(
    config: &SynthConfig,
    subject_id: &str,
    session_index: usize,
    paradigm: Paradigm,
) -> (EegRecording, SessionManifest) {
    let mut rng = config.session_rng(subject_id, session_index, paradigm);
    let fs = config.sample_rate_hz;

    let transitions: Vec<f64> = match paradigm {
        Paradigm::Normal => {
            let mut speeds = vec![0.1; TRIALS_PER_SESSION / 2];
            speeds.extend(vec![0.5; TRIALS_PER_SESSION / 2]);
            rng.shuffle(&mut speeds);
            speeds
        }
        Paradigm::Ai => vec![0.5; TRIALS_PER_SESSION],
    };
    let target_trials = rng.choose_indices(TRIALS_PER_SESSION, TARGETS_PER_SESSION);

    let mut labels = Vec::with_capacity(TRIALS_PER_SESSION);
    for (i, &transition) in transitions.iter().enumerate() {
        if target_trials.contains(&i) {
            let image = rng.next_below(IMAGES_PER_TRIAL);
            labels.push(TrialLabel::target(i, transition, image));
        } else {
            labels.push(TrialLabel::non_target(i, transition));
        }
    }

    let total: usize = labels
        .iter()
        .map(|l| config.trial_block_len(l.transition_sec))
        .sum();
    let mut samples = Array2::zeros(config.n_channels, total);
    let mut triggers = Vec::new();
    let templates = TemplateSet::render(config);

    let mut offset = 0usize;
    for label in &labels {
        // The beep coincides with the first image onset.
        triggers.push(TriggerEvent {
            sample_index: offset,
            code: TriggerCode::BeepTrialStart,
        });
        for k in 0..IMAGES_PER_TRIAL {
            triggers.push(TriggerEvent {
                sample_index: offset
                    + round_half_away(k as f64 * label.transition_sec * fs) as usize,
                code: TriggerCode::ImageOnset,
            });
        }

        let placements =
            plan_trial(config, label, paradigm, &mut rng).expect("labels built for this paradigm");
        let block_len = config.trial_block_len(label.transition_sec);
        let mut block = make_noise(config, config.n_channels, block_len, &mut rng);
        apply_placements(&mut block, &templates, &placements);
        for ch in 0..config.n_channels {
            samples.row_mut(ch)[offset..offset + block_len].copy_from_slice(block.row(ch));
        }
        offset += block_len;
    }

    let recording = EegRecording {
        sample_rate_hz: fs,
        channel_names: default_channel_names(config.n_channels),
        samples,
        triggers,
    };
    let manifest = SessionManifest {
        subject_id: String::from(subject_id),
        session_index,
        paradigm,
        trials: labels,
    };
    (recording, manifest)
}
