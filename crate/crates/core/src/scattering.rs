//! The two-layer scattering cascade.
//!
//! ```text
//! x ──|W1|──> U1 ──|W2|──> U2
//! │           │            │
//! φ_J         φ_J          φ_J
//! S0          S1           S2
//! ```
//!
//! First-layer moduli at scale `2^j1` are kept at stride `max(1, 2^(j1-1))`.
//! The second layer filters every fixed-orientation slice of `U1` spatially
//! with `ψ_{j2,θ2}` (periodized to the slice's own grid), then filters the
//! resulting orientation stack along `θ1` with each angular wavelet and the
//! angular average, and applies a single modulus. The scale axis `j1` is
//! left untouched.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{Pooling, ScatteringConfig};
use crate::conv::{circular_filter_angle, filter_spectrum, modulus, Spectrum};
use crate::error::{Result, ScatterError};
use crate::filterbank::{build_filter_bank, FilterBanks, WaveletFamily};
use crate::plane::Plane;

/// Which angular filter produced a second-order path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AngularIndex {
    Wavelet(u32),
    Average,
}

/// Scale and angle indices of one scattering path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Path {
    Order0,
    Order1 {
        j1: u32,
        theta1: usize,
    },
    Order2 {
        j1: u32,
        theta1: usize,
        j2: u32,
        theta2: usize,
        angular: AngularIndex,
    },
}

impl Path {
    pub fn order(&self) -> u8 {
        match self {
            Path::Order0 => 0,
            Path::Order1 { .. } => 1,
            Path::Order2 { .. } => 2,
        }
    }
}

/// One block of the feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathBlock {
    pub channel: usize,
    pub path: Path,
    pub rows: usize,
    pub cols: usize,
}

impl PathBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for PathBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{} ", self.channel)?;
        match self.path {
            Path::Order0 => write!(f, "o0")?,
            Path::Order1 { j1, theta1 } => write!(f, "o1 j1={j1} t1={theta1}")?,
            Path::Order2 {
                j1,
                theta1,
                j2,
                theta2,
                angular,
            } => {
                write!(f, "o2 j1={j1} t1={theta1} j2={j2} t2={theta2} ")?;
                match angular {
                    AngularIndex::Wavelet(l) => write!(f, "l2={l}")?,
                    AngularIndex::Average => write!(f, "l2=avg")?,
                }
            }
        }
        write!(f, " {}x{}", self.rows, self.cols)
    }
}

impl FromStr for PathBlock {
    type Err = ScatterError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ScatterError::Data(format!("malformed path entry {s:?}"));
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(bad());
        }
        let channel = tokens[0].strip_prefix('c').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let (rows, cols) = tokens[tokens.len() - 1].split_once('x').ok_or_else(bad)?;
        let rows = rows.parse().map_err(|_| bad())?;
        let cols = cols.parse().map_err(|_| bad())?;
        let fields = &tokens[2..tokens.len() - 1];
        let get = |key: &str| -> Result<&str> {
            fields
                .iter()
                .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(bad)
        };
        let num = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|_| bad()) };
        let path = match tokens[1] {
            "o0" if fields.is_empty() => Path::Order0,
            "o1" if fields.len() == 2 => Path::Order1 {
                j1: num("j1")? as u32,
                theta1: num("t1")?,
            },
            "o2" if fields.len() == 5 => Path::Order2 {
                j1: num("j1")? as u32,
                theta1: num("t1")?,
                j2: num("j2")? as u32,
                theta2: num("t2")?,
                angular: match get("l2")? {
                    "avg" => AngularIndex::Average,
                    l => AngularIndex::Wavelet(l.parse().map_err(|_| bad())?),
                },
            },
            _ => return Err(bad()),
        };
        Ok(PathBlock {
            channel,
            path,
            rows,
            cols,
        })
    }
}

/// First-layer modulus coefficients, one slice per `(j1, θ1)`.
#[derive(Debug, Clone)]
pub struct Layer1Tensor {
    pub slices: Vec<Layer1Slice>,
}

#[derive(Debug, Clone)]
pub struct Layer1Slice {
    pub j1: u32,
    pub theta1: usize,
    /// `|x ⋆ ψ_{j1,θ1}|` sampled every `2^plane.scale_log2()` pixels.
    pub plane: Plane<f64>,
}

impl Layer1Tensor {
    pub fn get(&self, j1: u32, theta1: usize) -> Option<&Plane<f64>> {
        self.slices
            .iter()
            .find(|s| s.j1 == j1 && s.theta1 == theta1)
            .map(|s| &s.plane)
    }
}

/// Second-layer modulus coefficients, one plane per path.
#[derive(Debug, Clone)]
pub struct Layer2Tensor {
    pub slices: Vec<(Path, Plane<f64>)>,
}

impl Layer2Tensor {
    pub fn get(&self, path: &Path) -> Option<&Plane<f64>> {
        self.slices.iter().find(|(p, _)| p == path).map(|(_, v)| v)
    }
}

/// Concatenated scattering coefficients and the layout of their blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringFeatures {
    pub values: Vec<f64>,
    pub paths: Vec<PathBlock>,
}

impl ScatteringFeatures {
    /// Offsets of each block within `values`.
    pub fn block(&self, index: usize) -> &[f64] {
        let start: usize = self.paths[..index].iter().map(PathBlock::len).sum();
        &self.values[start..start + self.paths[index].len()]
    }
}

/// Spatial samples `h` with `φ(y, x) = h(y) h(x)` for a separable, real,
/// even lowpass spectrum.
fn separable_axis(phi: &Spectrum) -> Vec<f64> {
    let m = phi.height();
    let dc = phi.get(0, 0).re.sqrt();
    let f: Vec<f64> = (0..m).map(|k| phi.get(k, 0).re / dc).collect();
    (0..m)
        .map(|u| {
            let s: f64 = f
                .iter()
                .enumerate()
                .map(|(k, v)| v * (2.0 * std::f64::consts::PI * ((k * u) % m) as f64 / m as f64).cos())
                .sum();
            s / m as f64
        })
        .collect()
}

/// Separable circular convolution with `h ⊗ h`, evaluated only on the
/// output grid.
#[derive(Debug, Clone)]
struct AxisPool {
    size: usize,
    cells: usize,
    /// Row `c` holds `h(c·step − x)` for every input sample `x`.
    taps: Vec<f64>,
}

impl AxisPool {
    fn new(h: &[f64], step_log2: Option<u32>) -> Self {
        let m = h.len();
        let Some(step) = step_log2.map(|s| 1usize << s).filter(|&s| s <= m) else {
            return AxisPool {
                size: m,
                cells: 0,
                taps: Vec::new(),
            };
        };
        let cells = m / step;
        let mut taps = Vec::with_capacity(cells * m);
        for c in 0..cells {
            let u = c * step;
            taps.extend((0..m).map(|x| h[(u + m - x) % m]));
        }
        AxisPool { size: m, cells, taps }
    }
}

// Four interleaved partial sums so the loop vectorizes; the summation order
// is fixed, so results do not depend on the machine.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Grid side produced by a max-pooling pass.
fn max_pool_cells(size: usize, window: usize, overlapping: bool) -> usize {
    if overlapping {
        (size - window) / (window / 2) + 1
    } else {
        size / window
    }
}

fn output_grid(config: &ScatteringConfig, order: u8) -> (usize, usize) {
    let avg = config.size >> config.output_stride_log2;
    match (order, config.pooling) {
        (0, _) | (_, Pooling::Average) => (avg, avg),
        (_, pooling) => {
            let side = max_pool_cells(
                config.size,
                1 << config.pool_window_log2,
                pooling == Pooling::MaxOverlap,
            );
            (side, side)
        }
    }
}

/// Enumerates every block of the feature vector in output order.
pub fn path_table(config: &ScatteringConfig) -> Vec<PathBlock> {
    let g0 = output_grid(config, 0);
    let g1 = output_grid(config, 1);
    let g2 = output_grid(config, 2);
    let mut angular: Vec<AngularIndex> = config.l2_set.iter().map(|&l| AngularIndex::Wavelet(l)).collect();
    angular.push(AngularIndex::Average);
    let mut out = Vec::new();
    for channel in 0..config.color.channels() {
        let block = |path, (rows, cols): (usize, usize)| PathBlock {
            channel,
            path,
            rows,
            cols,
        };
        out.push(block(Path::Order0, g0));
        for &j1 in &config.j1_set {
            for theta1 in 0..config.k1 {
                out.push(block(Path::Order1 { j1, theta1 }, g1));
            }
        }
        for &j1 in &config.j1_set {
            for theta1 in 0..config.k1 {
                for j2 in config.j2_for(j1) {
                    for theta2 in 0..config.k2 {
                        for &a in &angular {
                            out.push(block(
                                Path::Order2 {
                                    j1,
                                    theta1,
                                    j2,
                                    theta2,
                                    angular: a,
                                },
                                g2,
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Closed-form feature length: path counts times output cells times channels.
pub fn count_features(config: &ScatteringConfig) -> usize {
    let cells = |order| {
        let (r, c) = output_grid(config, order);
        r * c
    };
    let n1 = config.j1_set.len() * config.k1;
    let top = config.max_scale_index();
    let pairs: usize = config
        .j1_set
        .iter()
        .map(|&j1| {
            let first = match config.j2_rule {
                crate::config::J2Rule::Inclusive => j1,
                crate::config::J2Rule::Strict => j1 + 1,
            };
            (top + 1).saturating_sub(first) as usize
        })
        .sum();
    let n2 = pairs * config.k2 * config.k1 * (config.l2_set.len() + 1);
    config.color.channels() * (cells(0) + n1 * cells(1) + n2 * cells(2))
}

/// Max pooling over square windows of `2^window_log2` original pixels.
/// Non-overlapping windows tile the slice; overlapping windows are placed
/// every half window.
pub fn pool_max(slice: &Plane<f64>, window_log2: u32, overlapping: bool) -> Result<Plane<f64>> {
    let s = slice.scale_log2();
    let window = if window_log2 >= s { 1usize << (window_log2 - s) } else { 0 };
    let size = slice.height().min(slice.width());
    if window == 0 || window > size {
        return Err(ScatterError::param(format!(
            "pooling window 2^{} does not fit a {}x{} slice at stride 2^{}",
            window_log2,
            slice.height(),
            slice.width(),
            s
        )));
    }
    if overlapping && window < 2 {
        return Err(ScatterError::param("overlapping windows need at least 2 samples"));
    }
    let step = if overlapping { window / 2 } else { window };
    let rows = max_pool_cells(slice.height(), window, overlapping);
    let cols = max_pool_cells(slice.width(), window, overlapping);
    let out = Plane::from_fn(rows, cols, |r, c| {
        let mut m = f64::NEG_INFINITY;
        for y in r * step..r * step + window {
            for x in c * step..c * step + window {
                m = m.max(slice.get(y, x));
            }
        }
        m
    });
    Ok(out)
}

/// A configured network with all filters built and periodized to every grid
/// it will meet. Immutable; share freely across threads.
#[derive(Debug, Clone)]
pub struct Scattering {
    config: ScatteringConfig,
    banks: FilterBanks,
    /// Average pooling from the grid of stride `2^r`, indexed by `r`.
    pool_at: Vec<AxisPool>,
    /// Second-layer wavelets periodized to the grid of stride `2^r`, in bank
    /// order, indexed by `r`.
    psi2_at: Vec<Vec<Spectrum>>,
    angular_hats: Vec<Vec<Complex64>>,
}

impl Scattering {
    pub fn new(config: ScatteringConfig) -> Result<Self> {
        let banks = build_filter_bank(&config)?;
        let deepest = config.stride_log2(config.max_scale_index());
        let n = config.size;
        let mut pool_at = Vec::new();
        let mut psi2_at = Vec::new();
        for r in 0..=deepest {
            let h = separable_axis(&banks.layer1.phi.periodize(r)?);
            pool_at.push(AxisPool::new(&h, config.output_stride_log2.checked_sub(r)));
            let first_layer_uses = config.j1_set.iter().any(|&j1| config.stride_log2(j1) == r);
            psi2_at.push(if first_layer_uses {
                banks
                    .layer2
                    .psi
                    .iter()
                    .map(|w| w.spectrum.periodize(r))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            });
        }
        debug_assert_eq!(pool_at[0].size, n);
        let angular_hats = banks.angular.spectra();
        Ok(Scattering {
            config,
            banks,
            pool_at,
            psi2_at,
            angular_hats,
        })
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn banks(&self) -> &FilterBanks {
        &self.banks
    }

    pub fn feature_len(&self) -> usize {
        count_features(&self.config)
    }

    pub fn path_table(&self) -> Vec<PathBlock> {
        path_table(&self.config)
    }

    fn check_input(&self, x: &Plane<f64>) -> Result<()> {
        let n = self.config.size;
        if x.height() != n || x.width() != n {
            return Err(ScatterError::param(format!(
                "expected a {n}x{n} image, got {}x{}",
                x.height(),
                x.width()
            )));
        }
        Ok(())
    }

    fn nonlinearity(&self, z: &Plane<Complex64>) -> Plane<f64> {
        match self.config.family {
            WaveletFamily::MorletComplex => modulus(z),
            // Real filters on real input: the imaginary part is rounding noise.
            WaveletFamily::HaarReal => z.map(|v| v.re.abs()),
        }
    }

    /// `S0 = x ⋆ φ_J` on the output grid.
    pub fn layer0(&self, x: &Plane<f64>) -> Result<Plane<f64>> {
        self.check_input(x)?;
        self.pool_average(x)
    }

    /// `U1(j1, θ1) = |x ⋆ ψ_{j1,θ1}|`, kept at stride `max(1, 2^(j1-1))`.
    pub fn layer1(&self, x: &Plane<f64>) -> Result<Layer1Tensor> {
        self.check_input(x)?;
        let x_hat = Spectrum::of(x);
        let mut slices = Vec::with_capacity(self.banks.layer1.psi.len());
        for w in &self.banks.layer1.psi {
            let stride = self.config.stride_log2(w.scale_index);
            let z = filter_spectrum(&x_hat, &w.spectrum, stride, x.scale_log2())?;
            slices.push(Layer1Slice {
                j1: w.scale_index,
                theta1: w.k,
                plane: self.nonlinearity(&z),
            });
        }
        Ok(Layer1Tensor { slices })
    }

    /// Runs the second layer one `(j1, j2, θ2)` group at a time; `visit`
    /// receives, for each angular filter in bank order (wavelets, then the
    /// average), the `K1` modulus planes indexed by `θ1`.
    fn layer2_groups(
        &self,
        u1: &Layer1Tensor,
        mut visit: impl FnMut(u32, u32, usize, AngularIndex, Vec<Plane<f64>>) -> Result<()>,
    ) -> Result<()> {
        let k1 = self.config.k1;
        let mut angular: Vec<AngularIndex> = self
            .banks
            .angular
            .psi_b
            .iter()
            .map(|(l, _)| AngularIndex::Wavelet(*l))
            .collect();
        angular.push(AngularIndex::Average);
        for &j1 in &self.config.j1_set {
            let stack: Vec<&Plane<f64>> = (0..k1)
                .map(|t| {
                    u1.get(j1, t)
                        .ok_or_else(|| ScatterError::param(format!("U1 is missing slice (j1={j1}, θ1={t})")))
                })
                .collect::<Result<_>>()?;
            let r1 = stack[0].scale_log2();
            let n = self.config.size >> r1;
            if stack.iter().any(|p| p.height() != n || p.width() != n || p.scale_log2() != r1) {
                return Err(ScatterError::param(format!("U1 slices at j1={j1} have inconsistent grids")));
            }
            let filters = self
                .psi2_at
                .get(r1 as usize)
                .filter(|f| !f.is_empty())
                .ok_or_else(|| ScatterError::Internal(format!("no second-layer filters at stride 2^{r1}")))?;
            let hats: Vec<Spectrum> = stack.iter().map(|p| Spectrum::of(*p)).collect();
            for j2 in self.config.j2_for(j1) {
                let r2 = self.config.stride_log2(j2);
                if r2 < r1 {
                    return Err(ScatterError::Internal(format!("stride decreases from j1={j1} to j2={j2}")));
                }
                for theta2 in 0..self.config.k2 {
                    let idx = self
                        .banks
                        .layer2
                        .psi
                        .iter()
                        .position(|w| w.scale_index == j2 && w.k == theta2)
                        .ok_or_else(|| ScatterError::Internal(format!("missing ψ2 (j2={j2}, θ2={theta2})")))?;
                    let spatial: Vec<Plane<Complex64>> = hats
                        .iter()
                        .map(|h| filter_spectrum(h, &filters[idx], r2 - r1, r1))
                        .collect::<Result<_>>()?;
                    let outputs = circular_filter_angle(&spatial, &self.angular_hats)?;
                    for (a, planes) in angular.iter().zip(outputs) {
                        let moduli = planes.iter().map(|z| self.nonlinearity(z)).collect();
                        visit(j1, j2, theta2, *a, moduli)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Second-layer moduli for every admissible path.
    pub fn layer2(&self, u1: &Layer1Tensor) -> Result<Layer2Tensor> {
        let mut slices = Vec::new();
        self.layer2_groups(u1, |j1, j2, theta2, angular, planes| {
            for (theta1, plane) in planes.into_iter().enumerate() {
                slices.push((
                    Path::Order2 {
                        j1,
                        theta1,
                        j2,
                        theta2,
                        angular,
                    },
                    plane,
                ));
            }
            Ok(())
        })?;
        slices.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Layer2Tensor { slices })
    }

    /// `T ⋆ φ_J` subsampled onto the common output grid of stride
    /// `2^output_stride_log2`.
    pub fn pool_average(&self, slice: &Plane<f64>) -> Result<Plane<f64>> {
        let r = slice.scale_log2();
        let out = self.config.output_stride_log2;
        if r > out {
            return Err(ScatterError::Internal(format!(
                "slice stride 2^{r} is coarser than the output stride 2^{out}"
            )));
        }
        let pool = self
            .pool_at
            .get(r as usize)
            .filter(|p| p.cells > 0)
            .ok_or_else(|| ScatterError::Internal(format!("no lowpass at stride 2^{r}")))?;
        let m = pool.size;
        if slice.height() != m || slice.width() != m {
            return Err(ScatterError::param(format!(
                "{}x{} slice does not match stride 2^{r}",
                slice.height(),
                slice.width()
            )));
        }
        // Columns first, then rows.
        let cells = pool.cells;
        let mut partial = vec![0.0; m * cells];
        for (y, row) in slice.data().chunks_exact(m).enumerate() {
            for (c, taps) in pool.taps.chunks_exact(m).enumerate() {
                partial[c * m + y] = dot(taps, row);
            }
        }
        let pooled = Plane::from_fn(cells, cells, |oy, ox| {
            dot(&pool.taps[oy * m..(oy + 1) * m], &partial[ox * m..(ox + 1) * m])
        });
        Ok(pooled.with_scale_log2(out))
    }

    fn pool(&self, slice: &Plane<f64>) -> Result<Plane<f64>> {
        match self.config.pooling {
            Pooling::Average => self.pool_average(slice),
            Pooling::MaxNonOverlap => pool_max(slice, self.config.pool_window_log2, false),
            Pooling::MaxOverlap => pool_max(slice, self.config.pool_window_log2, true),
        }
    }

    fn scatter_channel(&self, x: &Plane<f64>, channel: usize) -> Result<Vec<(PathBlock, Plane<f64>)>> {
        let mut blocks = Vec::new();
        let mut push = |path: Path, p: Plane<f64>| {
            blocks.push((
                PathBlock {
                    channel,
                    path,
                    rows: p.height(),
                    cols: p.width(),
                },
                p,
            ));
        };
        push(Path::Order0, self.layer0(x)?);
        let u1 = self.layer1(x)?;
        for s in &u1.slices {
            push(
                Path::Order1 {
                    j1: s.j1,
                    theta1: s.theta1,
                },
                self.pool(&s.plane)?,
            );
        }
        let mut second = Vec::new();
        self.layer2_groups(&u1, |j1, j2, theta2, angular, planes| {
            for (theta1, plane) in planes.iter().enumerate() {
                second.push((
                    Path::Order2 {
                        j1,
                        theta1,
                        j2,
                        theta2,
                        angular,
                    },
                    self.pool(plane)?,
                ));
            }
            Ok(())
        })?;
        second.sort_by(|a, b| a.0.cmp(&b.0));
        for (path, p) in second {
            push(path, p);
        }
        Ok(blocks)
    }

    /// Full scattering vector of one image given as its channels (one plane
    /// for gray, Y/U/V for color). Blocks follow [`path_table`] order.
    pub fn scatter(&self, channels: &[Plane<f64>]) -> Result<ScatteringFeatures> {
        let expected = self.config.color.channels();
        if channels.len() != expected {
            return Err(ScatterError::param(format!(
                "expected {expected} channel(s), got {}",
                channels.len()
            )));
        }
        let mut values = Vec::with_capacity(self.feature_len());
        let mut paths = Vec::new();
        for (c, x) in channels.iter().enumerate() {
            for (block, plane) in self.scatter_channel(x, c)? {
                values.extend_from_slice(plane.data());
                paths.push(block);
            }
        }
        Ok(ScatteringFeatures { values, paths })
    }

    /// Scatters a batch of images in parallel on the current rayon pool.
    /// Output order follows input order.
    pub fn scatter_batch(&self, images: &[Vec<Plane<f64>>]) -> Result<Vec<Vec<f64>>> {
        images
            .par_iter()
            .map(|img| self.scatter(img).map(|f| f.values))
            .collect()
    }
}
