//! Structural parameters of the scattering network.

use crate::error::{Result, ScatterError};
use crate::filterbank::{AngularParams, MorletParams, WaveletFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Gaussian lowpass `φ_J` followed by subsampling on the output grid.
    Average,
    /// Per-window maxima on a non-overlapping tiling.
    MaxNonOverlap,
    /// Per-window maxima with windows placed every half window.
    MaxOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    Gray,
    Yuv,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Gray => 1,
            ColorMode::Yuv => 3,
        }
    }
}

/// Which second-layer spatial scales are admissible for a first-layer scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum J2Rule {
    /// `j1 <= j2 <= J`
    Inclusive,
    /// `j1 < j2 <= J`
    Strict,
}

/// Scales are expressed in steps of `1/q` octave: a scale index `i` means a
/// dilation by `2^(i/q)`. With the default `q = 1` indices are octaves.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringConfig {
    /// Input grid side `N` (power of two).
    pub size: usize,
    /// Averaging scale `2^J`.
    pub j: u32,
    /// First-layer orientations, `θ1 = 2πk/K1`.
    pub k1: usize,
    /// Second-layer orientations, `θ2 = πk/K2`.
    pub k2: usize,
    /// Scales per octave.
    pub q: u32,
    /// First-layer scale indices.
    pub j1_set: Vec<u32>,
    pub j2_rule: J2Rule,
    /// Octaves `l2` of the angular wavelets.
    pub l2_set: Vec<u32>,
    pub family: WaveletFamily,
    pub pooling: Pooling,
    /// Max-pooling window side `2^w`, in original pixels.
    pub pool_window_log2: u32,
    /// Output grid stride `2^s`; defaults to `J - 1`.
    pub output_stride_log2: u32,
    pub color: ColorMode,
    pub morlet: MorletParams,
    /// Standard deviation of the mother lowpass `φ` in pixels; `φ_J` is
    /// `2^J` times wider.
    pub lowpass_sigma: f64,
    pub angular: AngularParams,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            size: 128,
            j: 5,
            k1: 8,
            k2: 8,
            q: 1,
            j1_set: (0..5).collect(),
            j2_rule: J2Rule::Inclusive,
            l2_set: vec![0, 1, 2],
            family: WaveletFamily::MorletComplex,
            pooling: Pooling::Average,
            pool_window_log2: 5,
            output_stride_log2: 4,
            color: ColorMode::Gray,
            morlet: MorletParams::default(),
            lowpass_sigma: 0.5,
            angular: AngularParams::default(),
        }
    }
}

impl ScatteringConfig {
    /// Default structure on an `size x size` grid with averaging scale `2^j`:
    /// `j1 ∈ [0, j)`, output stride `2^(j-1)`.
    pub fn with_size_and_scale(size: usize, j: u32) -> Self {
        ScatteringConfig {
            size,
            j,
            j1_set: (0..j).collect(),
            output_stride_log2: j.saturating_sub(1),
            ..Default::default()
        }
    }

    /// Largest scale index (`J` octaves).
    pub fn max_scale_index(&self) -> u32 {
        self.j * self.q
    }

    /// Octave value of a scale index.
    pub fn octave(&self, scale_index: u32) -> f64 {
        scale_index as f64 / self.q as f64
    }

    /// log2 of the subsampling stride used after a wavelet at this scale
    /// index: `max(0, floor(j) - 1)`.
    pub fn stride_log2(&self, scale_index: u32) -> u32 {
        (scale_index / self.q).saturating_sub(1)
    }

    /// Second-layer scales admissible after first-layer scale `j1`.
    pub fn j2_for(&self, j1: u32) -> impl Iterator<Item = u32> {
        let start = match self.j2_rule {
            J2Rule::Inclusive => j1,
            J2Rule::Strict => j1 + 1,
        };
        start..=self.max_scale_index()
    }

    /// Every scale index used by the second-layer spatial bank.
    pub fn j2_scales(&self) -> Vec<u32> {
        let mut all: Vec<u32> = self.j1_set.iter().flat_map(|&j1| self.j2_for(j1)).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn validate(&self) -> Result<()> {
        let p = |m: String| Err(ScatterError::Parameter(m));
        if !self.size.is_power_of_two() || self.size < 2 {
            return p(format!("grid size {} is not a power of two", self.size));
        }
        if self.j == 0 || (1usize << self.j) > self.size {
            return p(format!("2^J = 2^{} must lie in [2, {}]", self.j, self.size));
        }
        if self.k1 == 0 || self.k2 == 0 {
            return p("K1 and K2 must be positive".into());
        }
        if !(1..=2).contains(&self.q) {
            return p(format!("scales per octave Q = {} not in {{1, 2}}", self.q));
        }
        if self.output_stride_log2 > self.j {
            return p(format!(
                "output stride 2^{} exceeds averaging scale 2^{}",
                self.output_stride_log2, self.j
            ));
        }
        if self.j1_set.is_empty() {
            return p("empty first-layer scale set".into());
        }
        let mut sorted = self.j1_set.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != self.j1_set {
            return p("first-layer scales must be strictly increasing".into());
        }
        if let Some(&j1) = self.j1_set.iter().find(|&&j1| j1 > self.max_scale_index()) {
            return p(format!("scale {} beyond J = {}", self.octave(j1), self.j));
        }
        if self.pooling == Pooling::Average {
            let deepest = self.stride_log2(self.max_scale_index());
            if deepest > self.output_stride_log2 {
                return p(format!(
                    "output stride 2^{} is finer than the layer stride 2^{}",
                    self.output_stride_log2, deepest
                ));
            }
        } else if (1usize << self.pool_window_log2) > self.size {
            return p(format!(
                "pooling window 2^{} exceeds the {} pixel grid",
                self.pool_window_log2, self.size
            ));
        } else {
            let deepest = self.stride_log2(self.max_scale_index());
            let need = deepest + u32::from(self.pooling == Pooling::MaxOverlap);
            if self.pool_window_log2 < need {
                return p(format!(
                    "pooling window 2^{} is smaller than the coarsest layer stride allows (2^{need})",
                    self.pool_window_log2
                ));
            }
        }
        if !(self.lowpass_sigma > 0.0 && self.lowpass_sigma.is_finite()) {
            return p(format!("lowpass sigma {} must be > 0", self.lowpass_sigma));
        }
        self.morlet.validate()?;
        self.angular.validate()?;
        Ok(())
    }
}
