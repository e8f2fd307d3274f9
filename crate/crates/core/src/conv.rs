//! Periodic convolution engine.
//!
//! Transform convention: the forward 2D DFT is unnormalized,
//! `X(k) = Σ_n x(n) e^{-2πi k·n / N}`, and the inverse divides by the number of
//! samples. With this convention Parseval reads `Σ|x|² = (1/(HW)) Σ|X|²`.
//!
//! Subsampling by `s = 2^m` in the frequency domain is done by averaging the
//! `s²` aliases of every coarse frequency bin, which is exactly the spectrum
//! of the spatially decimated signal `y(n) = x(s·n)`. Filters moved to a
//! coarser grid are instead *summed* over their aliases, which corresponds to
//! sampling the continuous filter at the coarse spacing with the amplitude of
//! the coarse-grid wavelet.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Result, ScatterError};
use crate::plane::{Plane, Sample};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, dir))
}

fn fft2d_in_place(data: &mut [Complex64], height: usize, width: usize, dir: FftDirection) {
    debug_assert_eq!(data.len(), height * width);
    if width > 1 {
        plan(width, dir).process(data);
    }
    if height > 1 {
        let mut cols = vec![Complex64::default(); data.len()];
        transpose(data, &mut cols, height, width);
        plan(height, dir).process(&mut cols);
        transpose(&cols, data, width, height);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Signed angular frequency (radians per sample) of DFT bin `k` on an
/// `n`-point grid. The Nyquist bin maps to `-π`.
#[inline]
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let signed = if 2 * k >= n { k as isize - n as isize } else { k as isize };
    2.0 * std::f64::consts::PI * signed as f64 / n as f64
}

/// A frequency-domain grid (DFT bins in standard FFT order).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    data: Vec<Complex64>,
    height: usize,
    width: usize,
}

impl Spectrum {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(ScatterError::param(format!(
                "spectrum of {} bins cannot be shaped {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Spectrum {
            data,
            height,
            width,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for ky in 0..height {
            for kx in 0..width {
                data.push(f(ky, kx));
            }
        }
        Spectrum {
            data,
            height,
            width,
        }
    }

    /// Forward DFT of a plane.
    pub fn of<T: Sample>(plane: &Plane<T>) -> Self {
        let mut data: Vec<Complex64> = plane.data().iter().map(|v| v.to_complex()).collect();
        fft2d_in_place(&mut data, plane.height(), plane.width(), FftDirection::Forward);
        Spectrum {
            data,
            height: plane.height(),
            width: plane.width(),
        }
    }

    /// Inverse DFT, normalized by `1/(HW)`.
    pub fn inverse(&self, scale_log2: u32) -> Plane<Complex64> {
        let mut data = self.data.clone();
        fft2d_in_place(&mut data, self.height, self.width, FftDirection::Inverse);
        let norm = 1.0 / (self.height * self.width) as f64;
        for v in &mut data {
            *v *= norm;
        }
        Plane::from_raw(self.height, self.width, scale_log2, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, ky: usize, kx: usize) -> Complex64 {
        self.data[ky * self.width + kx]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Spectrum {
            data: self.data.iter().map(|v| v * c).collect(),
            height: self.height,
            width: self.width,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    fn fold(&self, factor_log2: u32, average: bool) -> Result<Self> {
        let s = 1usize << factor_log2;
        if self.height % s != 0 || self.width % s != 0 {
            return Err(ScatterError::param(format!(
                "{}x{} grid is not divisible by {}",
                self.height, self.width, s
            )));
        }
        let (h, w) = (self.height / s, self.width / s);
        let mut out = vec![Complex64::default(); h * w];
        for ky in 0..self.height {
            let row = &self.data[ky * self.width..(ky + 1) * self.width];
            let dst = &mut out[(ky % h) * w..(ky % h + 1) * w];
            for (kx, v) in row.iter().enumerate() {
                dst[kx % w] += v;
            }
        }
        if average {
            let norm = 1.0 / (s * s) as f64;
            for v in &mut out {
                *v *= norm;
            }
        }
        Ok(Spectrum {
            data: out,
            height: h,
            width: w,
        })
    }

    /// Periodizes a filter onto a grid `2^factor_log2` times coarser by
    /// summing aliases.
    pub fn periodize(&self, factor_log2: u32) -> Result<Self> {
        self.fold(factor_log2, false)
    }

    /// Spectrum of the spatially decimated signal (mean of aliases).
    pub fn decimate(&self, factor_log2: u32) -> Result<Self> {
        self.fold(factor_log2, true)
    }

    /// Periodizes this filter onto a grid of the given size.
    pub fn periodize_to(&self, height: usize, width: usize) -> Result<Self> {
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        if height == 0 || self.height % height != 0 || self.width % width != 0 || self.height / height != self.width / width {
            return Err(ScatterError::param(format!(
                "cannot periodize a {}x{} filter onto {}x{}",
                self.height, self.width, height, width
            )));
        }
        let ratio = self.height / height;
        if !ratio.is_power_of_two() {
            return Err(ScatterError::param("periodization ratio must be a power of two"));
        }
        self.periodize(ratio.trailing_zeros())
    }
}

/// Multiplies an image spectrum by a filter, decimates by `2^subsample_log2`
/// and returns to the spatial domain.
pub fn filter_spectrum(
    image_hat: &Spectrum,
    filt: &Spectrum,
    subsample_log2: u32,
    input_scale_log2: u32,
) -> Result<Plane<Complex64>> {
    if image_hat.height != filt.height || image_hat.width != filt.width {
        return Err(ScatterError::param(format!(
            "filter grid {}x{} does not match image grid {}x{}",
            filt.height, filt.width, image_hat.height, image_hat.width
        )));
    }
    // Product and alias averaging in one pass over the fine grid.
    let s = 1usize << subsample_log2;
    if image_hat.height % s != 0 || image_hat.width % s != 0 {
        return Err(ScatterError::param(format!(
            "{}x{} grid is not divisible by {}",
            image_hat.height, image_hat.width, s
        )));
    }
    let (h, w) = (image_hat.height / s, image_hat.width / s);
    let mut data = vec![Complex64::default(); h * w];
    for ky in 0..image_hat.height {
        let at = ky * image_hat.width..(ky + 1) * image_hat.width;
        let dst = &mut data[(ky % h) * w..(ky % h + 1) * w];
        for (chunk_a, chunk_b) in image_hat.data[at.clone()].chunks_exact(w).zip(filt.data[at].chunks_exact(w)) {
            for ((d, a), b) in dst.iter_mut().zip(chunk_a).zip(chunk_b) {
                *d += a * b;
            }
        }
    }
    if s > 1 {
        let norm = 1.0 / (s * s) as f64;
        for v in &mut data {
            *v *= norm;
        }
    }
    let folded = Spectrum { data, height: h, width: w };
    Ok(folded.inverse(input_scale_log2 + subsample_log2))
}

/// Periodic convolution `image ⋆ filt` sampled every `2^subsample_log2`
/// samples, computed in the frequency domain.
pub fn conv2d_fft<T: Sample>(
    image: &Plane<T>,
    filt: &Spectrum,
    subsample_log2: u32,
) -> Result<Plane<Complex64>> {
    check_stride(image.height(), image.width(), subsample_log2)?;
    filter_spectrum(&Spectrum::of(image), filt, subsample_log2, image.scale_log2())
}

fn check_stride(height: usize, width: usize, subsample_log2: u32) -> Result<()> {
    let s = 1usize.checked_shl(subsample_log2).unwrap_or(0);
    if s == 0 || height % s != 0 || width % s != 0 {
        return Err(ScatterError::param(format!(
            "{}x{} plane is not divisible by stride 2^{}",
            height, width, subsample_log2
        )));
    }
    Ok(())
}

/// Brute-force periodic convolution by double summation. Intended as a test
/// oracle on small grids.
pub fn conv2d_direct<T: Sample, U: Sample>(
    image: &Plane<T>,
    filt: &Plane<U>,
    subsample_log2: u32,
) -> Result<Plane<Complex64>> {
    if image.height() != filt.height() || image.width() != filt.width() {
        return Err(ScatterError::param(format!(
            "filter {}x{} does not match image {}x{}",
            filt.height(),
            filt.width(),
            image.height(),
            image.width()
        )));
    }
    check_stride(image.height(), image.width(), subsample_log2)?;
    let (h, w) = (image.height(), image.width());
    let s = 1usize << subsample_log2;
    let mut out = Plane::zeros(h / s, w / s).with_scale_log2(image.scale_log2() + subsample_log2);
    for oy in 0..h / s {
        for ox in 0..w / s {
            let (uy, ux) = (oy * s, ox * s);
            let mut acc = Complex64::default();
            for vy in 0..h {
                let fy = (uy + h - vy) % h;
                for vx in 0..w {
                    let fx = (ux + w - vx) % w;
                    acc += image.get(vy, vx).to_complex() * filt.get(fy, fx).to_complex();
                }
            }
            out.set(oy, ox, acc);
        }
    }
    Ok(out)
}

/// DFT of a length-K circular filter.
pub fn circular_spectrum(filt: &[Complex64]) -> Vec<Complex64> {
    let mut buf = filt.to_vec();
    if buf.len() > 1 {
        plan(buf.len(), FftDirection::Forward).process(&mut buf);
    }
    buf
}

/// Circular convolution along the angle axis of a stack of planes, applied
/// independently at every spatial location. Accepts several filters given by
/// their DFTs and returns one output stack per filter.
pub fn circular_filter_angle(
    stack: &[Plane<Complex64>],
    filters_hat: &[Vec<Complex64>],
) -> Result<Vec<Vec<Plane<Complex64>>>> {
    let k = stack.len();
    if k == 0 {
        return Err(ScatterError::param("empty angle stack"));
    }
    let (h, w, scale) = (stack[0].height(), stack[0].width(), stack[0].scale_log2());
    if stack.iter().any(|p| p.height() != h || p.width() != w) {
        return Err(ScatterError::param("angle stack planes differ in shape"));
    }
    if let Some(f) = filters_hat.iter().find(|f| f.len() != k) {
        return Err(ScatterError::param(format!(
            "angular filter has length {}, stack has {} angles",
            f.len(),
            k
        )));
    }
    let pixels = h * w;
    // Pixel-major layout: each pixel's K angle samples are contiguous.
    let mut spec = vec![Complex64::default(); pixels * k];
    for (t, plane) in stack.iter().enumerate() {
        for (p, v) in plane.data().iter().enumerate() {
            spec[p * k + t] = *v;
        }
    }
    let fwd = plan(k, FftDirection::Forward);
    let inv = plan(k, FftDirection::Inverse);
    fwd.process(&mut spec);
    let norm = 1.0 / k as f64;
    let mut outputs = Vec::with_capacity(filters_hat.len());
    let mut buf = vec![Complex64::default(); pixels * k];
    for fh in filters_hat {
        for (dst, chunk) in buf.chunks_exact_mut(k).zip(spec.chunks_exact(k)) {
            for ((d, s), f) in dst.iter_mut().zip(chunk).zip(fh) {
                *d = s * f;
            }
        }
        inv.process(&mut buf);
        let planes = (0..k)
            .map(|t| {
                let data = (0..pixels).map(|p| buf[p * k + t] * norm).collect();
                Plane::from_raw(h, w, scale, data)
            })
            .collect();
        outputs.push(planes);
    }
    Ok(outputs)
}

/// Circular convolution along the angle axis with a single spatial-domain
/// filter of length K.
pub fn circular_conv1d_angle(
    stack: &[Plane<Complex64>],
    filt: &[Complex64],
) -> Result<Vec<Plane<Complex64>>> {
    if filt.len() != stack.len() {
        return Err(ScatterError::param(format!(
            "angular filter has length {}, stack has {} angles",
            filt.len(),
            stack.len()
        )));
    }
    let mut out = circular_filter_angle(stack, &[circular_spectrum(filt)])?;
    Ok(out.pop().expect("one filter in, one stack out"))
}

/// Pointwise complex magnitude.
pub fn modulus(p: &Plane<Complex64>) -> Plane<f64> {
    // Coefficients are far from overflow, so plain sqrt replaces hypot.
    p.map(|z| z.norm_sqr().sqrt())
}
