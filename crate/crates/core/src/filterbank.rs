//! Spatial and angular filter banks.
//!
//! All spatial filters are built directly in the frequency domain on the full
//! `N x N` grid. A filter at scale `2^j` is the mother filter with its
//! argument dilated by `2^-j` and amplitude by `2^-2j`, so its transform is
//! the mother transform evaluated at `2^j ω`. Transforms are periodized over
//! `2π` shifts so they are exactly the DTFT of the sampled (and spatially
//! periodized) continuous filter.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::config::ScatteringConfig;
use crate::conv::{bin_frequency, circular_spectrum, Spectrum};
use crate::error::{Result, ScatterError};
use crate::plane::Plane;

/// Banks whose lower frame bound falls below this are rejected.
pub const DEGENERATE_LOWER_BOUND: f64 = 0.2;

/// Wavelet energy below this fraction of the peak is ignored when solving
/// for the frame normalization; it can add at most this much to the upper
/// bound.
const LP_SUPPORT_FLOOR: f64 = 1e-9;

/// Exponent beyond which a Gaussian tail is dropped from the periodization.
const GAUSSIAN_CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    MorletComplex,
    HaarReal,
}

/// Shape of the mother Morlet wavelet at scale `2^0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorletParams {
    /// Envelope standard deviation along the oscillation, in pixels.
    pub sigma: f64,
    /// Center frequency, radians per pixel.
    pub xi: f64,
    /// Envelope aspect ratio; the envelope is `1/slant` times longer across
    /// the oscillation than along it.
    pub slant: f64,
}

impl Default for MorletParams {
    fn default() -> Self {
        MorletParams {
            sigma: 0.6,
            xi: 0.8 * PI,
            slant: 1.0,
        }
    }
}

impl MorletParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ScatterError::param(format!("sigma = {} must be > 0", self.sigma)));
        }
        if !(self.xi > 0.0 && self.xi < PI) {
            return Err(ScatterError::param(format!("xi = {} must lie in (0, π)", self.xi)));
        }
        if !(self.slant > 0.0 && self.slant <= 1.0) {
            return Err(ScatterError::param(format!("slant = {} must lie in (0, 1]", self.slant)));
        }
        Ok(())
    }
}

/// Shape of the 1D Morlet wavelet used along the orientation axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularParams {
    pub sigma: f64,
    pub xi: f64,
}

impl Default for AngularParams {
    fn default() -> Self {
        AngularParams {
            sigma: 0.8,
            xi: 0.75 * PI,
        }
    }
}

impl AngularParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !(self.xi > 0.0 && self.xi < PI) {
            return Err(ScatterError::param(format!(
                "angular wavelet needs sigma > 0 and xi in (0, π), got ({}, {})",
                self.sigma, self.xi
            )));
        }
        Ok(())
    }
}

/// Orientation sampling: `θ = span · k / count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub count: usize,
    pub span: f64,
}

impl AngleGrid {
    /// `θ = 2πk/K` (first layer).
    pub fn full(count: usize) -> Self {
        AngleGrid { count, span: 2.0 * PI }
    }

    /// `θ = πk/K` (second layer).
    pub fn half(count: usize) -> Self {
        AngleGrid { count, span: PI }
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.span * k as f64 / self.count as f64
    }
}

/// One oriented, dilated bandpass filter.
#[derive(Debug, Clone)]
pub struct Wavelet {
    /// Scale index in steps of `1/q` octave.
    pub scale_index: u32,
    /// Orientation index.
    pub k: usize,
    pub theta: f64,
    pub spectrum: Spectrum,
}

#[derive(Debug, Clone)]
pub struct SpatialFilterBank {
    pub family: WaveletFamily,
    pub size: usize,
    pub q: u32,
    pub angles: AngleGrid,
    /// Ordered by (scale index, orientation).
    pub psi: Vec<Wavelet>,
    /// Gaussian lowpass at scale `2^J`.
    pub phi: Spectrum,
    /// Factor applied to every wavelet by the frame normalization.
    pub normalization: f64,
    /// Lower frame bound after normalization.
    pub lower_bound: f64,
}

impl SpatialFilterBank {
    pub fn wavelet(&self, scale_index: u32, k: usize) -> Option<&Wavelet> {
        self.psi
            .iter()
            .find(|w| w.scale_index == scale_index && w.k == k)
    }

    pub fn scales(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.psi.iter().map(|w| w.scale_index).collect();
        s.dedup();
        s
    }

    /// Every filter (wavelets and lowpass) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        SpatialFilterBank {
            psi: self
                .psi
                .iter()
                .map(|w| Wavelet {
                    spectrum: w.spectrum.scaled(c),
                    ..w.clone()
                })
                .collect(),
            phi: self.phi.scaled(c),
            ..self.clone()
        }
    }
}

/// Circular filters on `Z/K1` along the first-layer orientation axis.
#[derive(Debug, Clone)]
pub struct AngularFilterBank {
    pub k1: usize,
    /// `(l2, filter samples)`; zero mean over the circle.
    pub psi_b: Vec<(u32, Vec<Complex64>)>,
    /// Uniform average `1/K1`.
    pub phi_b: Vec<f64>,
    pub normalization: f64,
}

impl AngularFilterBank {
    /// DFTs of every filter: the wavelets in `l2` order, then the average.
    pub fn spectra(&self) -> Vec<Vec<Complex64>> {
        let mut out: Vec<Vec<Complex64>> = self.psi_b.iter().map(|(_, f)| circular_spectrum(f)).collect();
        let phi: Vec<Complex64> = self.phi_b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        out.push(circular_spectrum(&phi));
        out
    }

    /// `|φ̂ᵇ(k)|² + Σ_l |ψ̂ᵇ_l(k)|²` for every angular frequency bin.
    pub fn littlewood_paley(&self) -> Vec<f64> {
        let mut lp = vec![0.0; self.k1];
        for spec in self.spectra() {
            for (acc, v) in lp.iter_mut().zip(&spec) {
                *acc += v.norm_sqr();
            }
        }
        lp
    }
}

/// Number of `2π` images needed on each side so that a Gaussian with
/// frequency-domain standard deviation `1/width` is negligible beyond them.
fn periodization_reach(width: f64, center: f64) -> i32 {
    let reach = (GAUSSIAN_CUTOFF / width + PI + center.abs()) / (2.0 * PI);
    reach.ceil().max(1.0) as i32
}

fn check_grid(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(ScatterError::param(format!("grid size {n} is not a power of two")));
    }
    Ok(())
}

/// Frequency-domain Morlet wavelet dilated by `2^scale` and rotated to
/// orientation `k` of `angles`, on an `n x n` grid. The Gaussian correction
/// is fitted on the periodized transform so `ψ̂(0) = 0`.
pub fn make_morlet_2d(
    scale: f64,
    k: usize,
    angles: AngleGrid,
    params: &MorletParams,
    n: usize,
) -> Result<Spectrum> {
    params.validate()?;
    check_grid(n)?;
    if k >= angles.count {
        return Err(ScatterError::param(format!(
            "orientation {k} out of range for {} angles",
            angles.count
        )));
    }
    if !(scale >= 0.0) || scale.exp2() > n as f64 {
        return Err(ScatterError::param(format!("scale 2^{scale} outside [1, {n}]")));
    }
    let theta = angles.theta(k);
    let (c, s) = (theta.cos(), theta.sin());
    let dil = scale.exp2();
    let along = params.sigma * params.sigma;
    let across = along / (params.slant * params.slant);
    let envelope = |wy: f64, wx: f64, center: f64| {
        let (vy, vx) = (wy * dil, wx * dil);
        let a = vx * c + vy * s - center;
        let b = -vx * s + vy * c;
        let q = along * a * a + across * b * b;
        if q > GAUSSIAN_CUTOFF * GAUSSIAN_CUTOFF {
            0.0
        } else {
            (-0.5 * q).exp()
        }
    };
    // Narrowest frequency-domain width is along the oscillation.
    let reach = periodization_reach(params.sigma * dil, params.xi / dil);
    let periodized = |wy: f64, wx: f64, center: f64| {
        let mut acc = 0.0;
        for a in -reach..=reach {
            for b in -reach..=reach {
                acc += envelope(wy + 2.0 * PI * a as f64, wx + 2.0 * PI * b as f64, center);
            }
        }
        acc
    };
    let beta = periodized(0.0, 0.0, params.xi) / periodized(0.0, 0.0, 0.0);
    Ok(Spectrum::from_fn(n, n, |ky, kx| {
        let (wy, wx) = (bin_frequency(ky, n), bin_frequency(kx, n));
        Complex64::new(periodized(wy, wx, params.xi) - beta * periodized(wy, wx, 0.0), 0.0)
    }))
}

/// Frequency response of `φ_J(u) = 2^-2J φ(2^-J u)` with `φ` a unit-integral
/// Gaussian of standard deviation `sigma`, normalized to `φ̂_J(0) = 1`.
pub fn make_gaussian_lowpass(j: u32, n: usize, sigma: f64) -> Result<Spectrum> {
    check_grid(n)?;
    if j >= usize::BITS || (1usize << j) > n {
        return Err(ScatterError::param(format!("2^J = 2^{j} exceeds the {n} pixel grid")));
    }
    if !(sigma > 0.0) {
        return Err(ScatterError::param("lowpass sigma must be positive"));
    }
    let width = sigma * (j as f64).exp2();
    let reach = periodization_reach(width, 0.0);
    let g = |wy: f64, wx: f64| {
        let mut acc = 0.0;
        for a in -reach..=reach {
            for b in -reach..=reach {
                let (y, x) = (wy + 2.0 * PI * a as f64, wx + 2.0 * PI * b as f64);
                acc += (-0.5 * width * width * (x * x + y * y)).exp();
            }
        }
        acc
    };
    let dc = g(0.0, 0.0);
    Ok(Spectrum::from_fn(n, n, |ky, kx| {
        Complex64::new(g(bin_frequency(ky, n), bin_frequency(kx, n)) / dc, 0.0)
    }))
}

/// 1D periodic Morlet wavelets on `Z/K1` at scales `2^l2`, plus the uniform
/// average, normalized so the circular Littlewood–Paley sum is at most 1.
///
/// With an empty octave set any `K1 >= 1` is accepted and only the average
/// is produced.
pub fn make_angular_bank(k1: usize, octaves: &[u32], params: &AngularParams) -> Result<AngularFilterBank> {
    params.validate()?;
    if k1 == 0 {
        return Err(ScatterError::param("K1 must be positive"));
    }
    if !octaves.is_empty() && k1 < 4 {
        return Err(ScatterError::param(format!("angular wavelets need K1 >= 4, got {k1}")));
    }
    if let Some(&l) = octaves.iter().find(|&&l| l >= usize::BITS || (1usize << l) >= k1) {
        return Err(ScatterError::param(format!("angular octave 2^{l} must be below K1 = {k1}")));
    }
    let mut hats = Vec::with_capacity(octaves.len());
    for &l in octaves {
        let dil = (l as f64).exp2();
        let width = params.sigma * dil;
        let reach = periodization_reach(width, params.xi / dil);
        let per = |w: f64, center: f64| {
            (-reach..=reach)
                .map(|m| {
                    let v = (w + 2.0 * PI * m as f64) * dil - center;
                    (-0.5 * params.sigma * params.sigma * v * v).exp()
                })
                .sum::<f64>()
        };
        let beta = per(0.0, params.xi) / per(0.0, 0.0);
        let hat: Vec<f64> = (0..k1)
            .map(|b| {
                let w = bin_frequency(b, k1);
                per(w, params.xi) - beta * per(w, 0.0)
            })
            .collect();
        hats.push(hat);
    }
    let mut energy = vec![0.0; k1];
    for hat in &hats {
        for (e, v) in energy.iter_mut().zip(hat) {
            *e += v * v;
        }
    }
    // The average only occupies bin 0, where every wavelet vanishes.
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    let normalization = if peak > 0.0 { 1.0 / peak.sqrt() } else { 1.0 };
    let psi_b = octaves
        .iter()
        .zip(&hats)
        .map(|(&l, hat)| {
            let spectrum: Vec<Complex64> = hat.iter().map(|&v| Complex64::new(v * normalization, 0.0)).collect();
            (l, inverse_circular(&spectrum))
        })
        .collect();
    Ok(AngularFilterBank {
        k1,
        psi_b,
        phi_b: vec![1.0 / k1 as f64; k1],
        normalization,
    })
}

fn inverse_circular(spectrum: &[Complex64]) -> Vec<Complex64> {
    let k = spectrum.len();
    (0..k)
        .map(|t| {
            spectrum
                .iter()
                .enumerate()
                .map(|(b, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (b * t) as f64 / k as f64))
                .sum::<Complex64>()
                / k as f64
        })
        .collect()
}

/// Spatial real Haar wavelet at scale `2^scale` for one of the axis-aligned
/// (`K1 = 2`) or axis-aligned plus diagonal (`K1 = 4`) orientations. Its
/// support is the `2^(scale+1)`-pixel square centered at the origin.
pub fn make_haar_2d(scale: u32, k: usize, k1: usize, n: usize) -> Result<Plane<f64>> {
    check_grid(n)?;
    if k1 != 2 && k1 != 4 {
        return Err(ScatterError::param(format!("Haar wavelets support K1 in {{2, 4}}, got {k1}")));
    }
    if k >= k1 {
        return Err(ScatterError::param(format!("orientation {k} out of range for K1 = {k1}")));
    }
    let half = 1usize << scale;
    if 2 * half > n {
        return Err(ScatterError::param(format!("Haar support 2^{} exceeds the grid", scale + 1)));
    }
    // Orientation in steps of π/K1; K1 = 2 maps to the axis-aligned pair.
    let step = 4 / k1 * k;
    let amplitude = 1.0 / ((2 * half) as f64).powi(2);
    let mut out = Plane::zeros(n, n);
    let h = half as isize;
    for dy in -h..h {
        for dx in -h..h {
            // Pixel centers sit at half-integer offsets from the split lines.
            let (cx, cy) = (2 * dx + 1, 2 * dy + 1);
            let side = match step {
                0 => cx.signum(),
                1 => (cx + cy).signum(),
                2 => cy.signum(),
                _ => (cy - cx).signum(),
            };
            let y = dy.rem_euclid(n as isize) as usize;
            let x = dx.rem_euclid(n as isize) as usize;
            out.set(y, x, side as f64 * amplitude);
        }
    }
    Ok(out)
}

/// Littlewood–Paley diagnostics of a spatial bank.
#[derive(Debug, Clone)]
pub struct LpScan {
    /// Lower frame bound `A = min LP`.
    pub lower: f64,
    /// Upper frame bound `B = max LP`.
    pub upper: f64,
    /// Bin of the minimum, `(ky, kx)`.
    pub argmin: (usize, usize),
    pub argmax: (usize, usize),
    /// Row-major LP values over the `N x N` frequency grid.
    pub grid: Vec<f64>,
    pub size: usize,
}

/// Wavelet part of the Littlewood–Paley sum:
/// `½ Σ (|ψ̂(ω)|² + |ψ̂(-ω)|²)`.
fn wavelet_energy(psi: &[Wavelet], n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n * n];
    for wav in psi {
        let s = &wav.spectrum;
        for ky in 0..n {
            let my = (n - ky) % n;
            for kx in 0..n {
                let mx = (n - kx) % n;
                w[ky * n + kx] += 0.5 * (s.get(ky, kx).norm_sqr() + s.get(my, mx).norm_sqr());
            }
        }
    }
    w
}

/// `LP(ω) = |φ̂(ω)|² + ½ Σ_{j,θ} (|ψ̂_{j,θ}(ω)|² + |ψ̂_{j,θ}(-ω)|²)` over the
/// full frequency grid.
pub fn littlewood_paley_scan(bank: &SpatialFilterBank) -> LpScan {
    let n = bank.size;
    let mut grid = wavelet_energy(&bank.psi, n);
    for (g, p) in grid.iter_mut().zip(bank.phi.data()) {
        *g += p.norm_sqr();
    }
    let (mut lo, mut hi) = (0usize, 0usize);
    for (i, &v) in grid.iter().enumerate() {
        if v < grid[lo] {
            lo = i;
        }
        if v > grid[hi] {
            hi = i;
        }
    }
    LpScan {
        lower: grid[lo],
        upper: grid[hi],
        argmin: (lo / n, lo % n),
        argmax: (hi / n, hi % n),
        grid,
        size: n,
    }
}

/// Rescales the wavelets (not the lowpass) by the largest factor keeping
/// `LP <= 1`, so `φ̂(0) = 1` is preserved and the upper bound is attained.
fn normalize(psi: &mut [Wavelet], phi: &Spectrum, n: usize) -> Result<f64> {
    let energy = wavelet_energy(psi, n);
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(ScatterError::param("filter bank has no wavelet energy"));
    }
    let floor = LP_SUPPORT_FLOOR * peak;
    let mut c2 = f64::INFINITY;
    for (w, p) in energy.iter().zip(phi.data()) {
        if *w > floor {
            c2 = c2.min((1.0 - p.norm_sqr()).max(0.0) / w);
        }
    }
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(ScatterError::param("lowpass leaves no room for the wavelets"));
    }
    let c = c2.sqrt();
    for w in psi.iter_mut() {
        w.spectrum = w.spectrum.scaled(c);
    }
    Ok(c)
}

fn assemble(
    family: WaveletFamily,
    n: usize,
    q: u32,
    angles: AngleGrid,
    mut psi: Vec<Wavelet>,
    phi: Spectrum,
) -> Result<SpatialFilterBank> {
    let normalization = normalize(&mut psi, &phi, n)?;
    let mut bank = SpatialFilterBank {
        family,
        size: n,
        q,
        angles,
        psi,
        phi,
        normalization,
        lower_bound: 0.0,
    };
    bank.lower_bound = littlewood_paley_scan(&bank).lower;
    Ok(bank)
}

/// Frame-normalized Morlet bank over the given scale indices.
pub fn make_morlet_bank(
    scales: &[u32],
    q: u32,
    angles: AngleGrid,
    j: u32,
    params: &MorletParams,
    lowpass_sigma: f64,
    n: usize,
) -> Result<SpatialFilterBank> {
    let phi = make_gaussian_lowpass(j, n, lowpass_sigma)?;
    let mut psi = Vec::with_capacity(scales.len() * angles.count);
    for &s in scales {
        for k in 0..angles.count {
            psi.push(Wavelet {
                scale_index: s,
                k,
                theta: angles.theta(k),
                spectrum: make_morlet_2d(s as f64 / q as f64, k, angles, params, n)?,
            });
        }
    }
    assemble(WaveletFamily::MorletComplex, n, q, angles, psi, phi)
}

/// Frame-normalized real Haar bank at octaves `scales`, with the Gaussian
/// lowpass at `2^J`.
pub fn make_haar_bank(scales: &[u32], j: u32, k1: usize, n: usize, lowpass_sigma: f64) -> Result<SpatialFilterBank> {
    let phi = make_gaussian_lowpass(j, n, lowpass_sigma)?;
    let angles = AngleGrid::half(k1);
    let mut psi = Vec::new();
    for &s in scales {
        for k in 0..k1 {
            let spatial = make_haar_2d(s, k, k1, n)?;
            psi.push(Wavelet {
                scale_index: s,
                k,
                theta: angles.theta(k),
                spectrum: Spectrum::of(&spatial),
            });
        }
    }
    assemble(WaveletFamily::HaarReal, n, 1, angles, psi, phi)
}

/// Every filter needed by the two-layer network.
#[derive(Debug, Clone)]
pub struct FilterBanks {
    pub layer1: SpatialFilterBank,
    pub angular: AngularFilterBank,
    pub layer2: SpatialFilterBank,
}

/// Builds and frame-normalizes the first-layer bank, the angular bank and
/// the second-layer bank for `config`. Fails with
/// [`ScatterError::DegenerateBank`] when a Morlet bank's lower frame bound
/// is below [`DEGENERATE_LOWER_BOUND`].
pub fn build_filter_bank(config: &ScatteringConfig) -> Result<FilterBanks> {
    config.validate()?;
    let n = config.size;
    let j2_scales = config.j2_scales();
    let (layer1, layer2) = match config.family {
        WaveletFamily::MorletComplex => (
            make_morlet_bank(&config.j1_set, config.q, AngleGrid::full(config.k1), config.j, &config.morlet, config.lowpass_sigma, n)?,
            make_morlet_bank(&j2_scales, config.q, AngleGrid::half(config.k2), config.j, &config.morlet, config.lowpass_sigma, n)?,
        ),
        WaveletFamily::HaarReal => {
            if config.q != 1 {
                return Err(ScatterError::param("Haar wavelets only exist at integer octaves (Q = 1)"));
            }
            (
                make_haar_bank(&config.j1_set, config.j, config.k1, n, config.lowpass_sigma)?,
                make_haar_bank(&j2_scales, config.j, config.k2, n, config.lowpass_sigma)?,
            )
        }
    };
    // Real Haar filters all vanish at (π, π), so only Morlet banks are held
    // to the lower bound.
    for bank in [&layer1, &layer2] {
        if config.family == WaveletFamily::MorletComplex && bank.lower_bound < DEGENERATE_LOWER_BOUND {
            return Err(ScatterError::DegenerateBank {
                lower: bank.lower_bound,
                threshold: DEGENERATE_LOWER_BOUND,
            });
        }
    }
    let angular = make_angular_bank(config.k1, &config.l2_set, &config.angular)?;
    Ok(FilterBanks { layer1, angular, layer2 })
}
