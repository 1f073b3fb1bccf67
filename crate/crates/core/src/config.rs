//! Tracker configuration and its defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block-matching registration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationParams {
    pub levels: usize,
    /// Block edge length in pixels (at every pyramid level).
    pub block: usize,
    /// Integer search radius around the prior displacement, per level.
    pub search: usize,
    /// Std of the Gaussian applied to the block displacement grid, pixels.
    pub smoothing: f64,
    /// Displacements are clamped to this magnitude per axis.
    pub max_displacement: f64,
    /// Blocks whose best normalized cross-correlation is below this are
    /// treated as carrying no signal.
    pub min_ncc: f64,
    /// Score penalty per squared pixel of deviation from the prior.
    pub deviation_penalty: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            levels: 3,
            block: 16,
            search: 8,
            smoothing: 4.0,
            max_displacement: 32.0,
            min_ncc: 0.5,
            deviation_penalty: 0.002,
        }
    }
}

/// Ring layout of the dense gradient-histogram descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaisyParams {
    /// Radius of the outermost ring, pixels.
    pub radius: f64,
    pub rings: usize,
    pub ring_points: usize,
    pub bins: usize,
}

impl Default for DaisyParams {
    fn default() -> Self {
        Self {
            radius: 15.0,
            rings: 3,
            ring_points: 8,
            bins: 8,
        }
    }
}

impl DaisyParams {
    pub fn dimension(&self) -> usize {
        (self.rings * self.ring_points + 1) * self.bins
    }

    /// Radius of ring `k` (1-based).
    pub fn ring_radius(&self, k: usize) -> f64 {
        self.radius * k as f64 / self.rings as f64
    }

    /// Smoothing std of level `k`: level 0 is the centre histogram, level
    /// `k >= 1` is ring `k`. Each ring is smoothed with half its radius; the
    /// centre shares the first ring's smoothing.
    pub fn level_sigma(&self, k: usize) -> f64 {
        0.5 * self.ring_radius(k.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Tracking-range dilation radius around the mapped guided branch, pixels.
    pub sigma: f64,
    /// Number of nearest segments whose end nodes become candidate endpoints.
    pub n_nearest: usize,
    /// Evaluation tolerance, pixels.
    pub rho: f64,
    /// Ridge-filter scales, pixels.
    pub scales: Vec<f64>,
    pub frangi_beta: f64,
    /// Fixed ridge threshold; `None` selects Otsu over the tracking range.
    pub ridge_threshold: Option<f32>,
    pub threshold_floor: f32,
    /// Ridge pixels must exceed this many noise-induced curvature stds;
    /// 0 disables the gate.
    pub noise_gate: f64,
    /// Largest endpoint distance bridged by gap repair, pixels.
    pub max_gap: f64,
    /// Connection-probability weights for skeleton saliency, ridge response
    /// and orientation coherence.
    pub gap_weights: [f32; 3],
    /// A bridge is accepted when its mean pixel cost is at most
    /// `-ln(gap_accept_probability)`.
    pub gap_accept_probability: f32,
    /// Segment ends within this distance share a graph node, pixels.
    pub snap_radius: f64,
    pub max_paths: usize,
    /// Point spacing applied to guided and candidate branches before DTW.
    pub resample_spacing: f64,
    /// Merge tracked branches into one vasculature after per-branch tracking.
    pub fusion: bool,
    pub registration: RegistrationParams,
    pub daisy: DaisyParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            n_nearest: 2,
            rho: 3.0,
            scales: vec![1.0, 2.0, 3.0, 4.0],
            frangi_beta: 0.5,
            ridge_threshold: None,
            threshold_floor: 0.05,
            noise_gate: 8.0,
            max_gap: 10.0,
            gap_weights: [0.4, 0.4, 0.2],
            gap_accept_probability: 0.2,
            snap_radius: 3.0,
            max_paths: 512,
            resample_spacing: 1.0,
            fusion: true,
            registration: RegistrationParams::default(),
            daisy: DaisyParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.sigma >= 1.0) {
            return fail(format!("sigma must be >= 1, got {}", self.sigma));
        }
        if self.n_nearest < 1 {
            return fail("n_nearest must be >= 1".into());
        }
        if !(self.rho >= 0.0) {
            return fail(format!("rho must be >= 0, got {}", self.rho));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s >= 0.5)) {
            return fail("scales must be non-empty and each >= 0.5".into());
        }
        if !(self.noise_gate >= 0.0) {
            return fail(format!("noise_gate must be >= 0, got {}", self.noise_gate));
        }
        if !(self.max_gap >= 1.0) {
            return fail(format!("max_gap must be >= 1, got {}", self.max_gap));
        }
        if self.max_paths < 1 {
            return fail("max_paths must be >= 1".into());
        }
        if !(self.resample_spacing > 0.0) {
            return fail("resample_spacing must be positive".into());
        }
        if !(self.gap_accept_probability > 0.0 && self.gap_accept_probability <= 1.0) {
            return fail("gap_accept_probability must lie in (0, 1]".into());
        }
        if self.gap_weights.iter().any(|w| !(*w >= 0.0)) {
            return fail("gap_weights must be non-negative".into());
        }
        if !(self.snap_radius >= 0.0) {
            return fail("snap_radius must be >= 0".into());
        }
        let d = &self.daisy;
        if d.rings == 0 || d.ring_points == 0 || d.bins == 0 || !(d.radius > 0.0) {
            return fail("descriptor layout must have positive radius, rings, points and bins".into());
        }
        let r = &self.registration;
        if r.levels == 0 || r.block < 4 || r.search == 0 || !(r.smoothing > 0.0) {
            return fail("registration needs >= 1 level, block >= 4, search >= 1, smoothing > 0".into());
        }
        Ok(())
    }

    /// Mean-cost ceiling for accepting a gap bridge.
    pub fn gap_cost_ceiling(&self) -> f32 {
        -self.gap_accept_probability.ln()
    }
}
