//! Dense 2D grids of samples on a periodic lattice.

use num_complex::Complex64;

use crate::error::{Result, ScatterError};

/// Scalar types that can live in a [`Plane`].
pub trait Sample: Copy + Send + Sync + Default + std::fmt::Debug + 'static {
    fn to_complex(self) -> Complex64;
    fn norm_sqr(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Sample for f64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Sample for Complex64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Row-major 2D grid. `scale_log2` counts how many dyadic subsamplings
/// separate this grid from the original image grid, so one sample spans
/// `2^scale_log2` original pixels along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    data: Vec<T>,
    height: usize,
    width: usize,
    scale_log2: u32,
}

impl<T: Sample> Plane<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(ScatterError::param("plane dimensions must be at least 1x1"));
        }
        if data.len() != height * width {
            return Err(ScatterError::param(format!(
                "plane data has {} samples, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ScatterError::Data(format!(
                "non-finite sample at ({}, {})",
                i / width,
                i % width
            )));
        }
        Ok(Plane {
            data,
            height,
            width,
            scale_log2: 0,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "plane dimensions must be positive");
        Plane {
            data: vec![T::default(); height * width],
            height,
            width,
            scale_log2: 0,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height > 0 && width > 0, "plane dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Plane {
            data,
            height,
            width,
            scale_log2: 0,
        }
    }

    /// Builds a plane without re-validating finiteness. Used on engine
    /// outputs whose inputs were already validated.
    pub(crate) fn from_raw(height: usize, width: usize, scale_log2: u32, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Plane {
            data,
            height,
            width,
            scale_log2,
        }
    }

    pub fn with_scale_log2(mut self, scale_log2: u32) -> Self {
        self.scale_log2 = scale_log2;
        self
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
    pub fn scale_log2(&self) -> u32 {
        self.scale_log2
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    /// Periodic read: indices are taken modulo the plane size.
    #[inline]
    pub fn get_wrapped(&self, y: isize, x: isize) -> T {
        let yy = y.rem_euclid(self.height as isize) as usize;
        let xx = x.rem_euclid(self.width as isize) as usize;
        self.get(yy, xx)
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            data: self.data.iter().map(|&v| f(v)).collect(),
            height: self.height,
            width: self.width,
            scale_log2: self.scale_log2,
        }
    }

    pub fn to_complex(&self) -> Plane<Complex64> {
        self.map(Sample::to_complex)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Circular shift: `out(y, x) = self(y - dy, x - dx)`.
    pub fn shifted(&self, dy: isize, dx: isize) -> Self {
        let mut out = Plane::from_fn(self.height, self.width, |y, x| {
            self.get_wrapped(y as isize - dy, x as isize - dx)
        });
        out.scale_log2 = self.scale_log2;
        out
    }

    /// Quarter turn about the lattice origin (index (0, 0)), counterclockwise
    /// in (x = column, y = row) coordinates: `out(u) = self(R⁻¹ u)` where
    /// `R⁻¹ (x, y) = (y, -x)`.
    pub fn rot90(&self) -> Result<Self> {
        if self.height != self.width {
            return Err(ScatterError::param("rot90 requires a square plane"));
        }
        let n = self.height as isize;
        let mut out = Plane::from_fn(self.height, self.width, |y, x| {
            let src_x = y as isize;
            let src_y = (-(x as isize)).rem_euclid(n);
            self.get(src_y as usize, src_x as usize)
        });
        out.scale_log2 = self.scale_log2;
        Ok(out)
    }

    /// Keeps every `2^log2`-th sample along both axes starting at index 0.
    pub fn subsampled(&self, log2: u32) -> Result<Self> {
        let step = 1usize << log2;
        if self.height % step != 0 || self.width % step != 0 {
            return Err(ScatterError::param(format!(
                "{}x{} plane is not divisible by stride {}",
                self.height, self.width, step
            )));
        }
        let (h, w) = (self.height / step, self.width / step);
        let mut out = Plane::from_fn(h, w, |y, x| self.get(y * step, x * step));
        out.scale_log2 = self.scale_log2 + log2;
        Ok(out)
    }
}

impl Plane<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

impl Plane<Complex64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn re(&self) -> Plane<f64> {
        self.map(|z| z.re)
    }
}
