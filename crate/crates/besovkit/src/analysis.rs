//! Fourier-side machinery: the smooth dyadic resolution of unity,
//! Littlewood-Paley blocks, maximal operators, lifts and multipliers.
//!
//! Frequency convention: the FFT bin `k` (per-axis, wrapped to the symmetric
//! range) corresponds to the mode `exp(2 pi i <k, x> / 2^m)` and carries the
//! symbol argument `xi = k * 2^-m`, so `|xi| = 1` is the first annulus
//! boundary and a mode with `|xi| = 2^j` oscillates on the scale of a level-j
//! dyadic cube. The Nyquist bound `|xi| < 2^(n-1)` makes `j_max <= n - 2` the
//! largest level whose annulus fits on the lattice.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::{FieldSequence, SampledField, TorusGrid};

thread_local! {
    static FFT_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    FFT_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, forward))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                planner.plan_fft(
                    len,
                    if forward {
                        FftDirection::Forward
                    } else {
                        FftDirection::Inverse
                    },
                )
            })
            .clone()
    })
}

fn transform_axes(grid: &TorusGrid, values: &mut [Complex64], forward: bool) {
    let per = grid.samples_per_axis();
    let d = grid.dim();
    let fft = plan(per, forward);
    let mut line = vec![Complex64::new(0.0, 0.0); per];
    let total = grid.total_samples();
    for axis in 0..d {
        // stride between consecutive entries along `axis`
        let stride = per.pow((d - 1 - axis) as u32);
        let lines = total / per;
        for l in 0..lines {
            // Base index of the l-th line along this axis.
            let block = l / stride;
            let offset = l % stride;
            let base = block * stride * per + offset;
            for i in 0..per {
                line[i] = values[base + i * stride];
            }
            fft.process(&mut line);
            for i in 0..per {
                values[base + i * stride] = line[i];
            }
        }
    }
}

/// Forward DFT of a field; unnormalized (inverse applies `1/N^d`).
pub fn to_frequency(f: &SampledField) -> Vec<Complex64> {
    let mut v = f.values().to_vec();
    transform_axes(f.grid(), &mut v, true);
    v
}

/// Inverse DFT back to samples; exact round trip with [`to_frequency`].
pub fn to_samples(grid: &TorusGrid, mut spectrum: Vec<Complex64>) -> Result<SampledField> {
    if spectrum.len() != grid.total_samples() {
        return Err(Error::Argument("spectrum length does not match grid".into()));
    }
    transform_axes(grid, &mut spectrum, false);
    let scale = 1.0 / grid.total_samples() as f64;
    for v in spectrum.iter_mut() {
        *v *= scale;
    }
    SampledField::new(*grid, spectrum)
}

/// Signed per-axis FFT bin indices of the flat frequency index.
pub fn signed_bins(grid: &TorusGrid, idx: usize) -> Vec<i64> {
    let per = grid.samples_per_axis() as i64;
    grid.coords(idx)
        .into_iter()
        .map(|c| {
            let c = c as i64;
            if c <= per / 2 - 1 {
                c
            } else {
                c - per
            }
        })
        .collect()
}

/// Euclidean symbol argument `|xi| = |k| * 2^-m` of the flat frequency index.
pub fn xi_norm(grid: &TorusGrid, idx: usize) -> f64 {
    let bins = signed_bins(grid, idx);
    let sq: f64 = bins.iter().map(|&b| (b * b) as f64).sum();
    sq.sqrt() * (-(grid.domain_exponent() as f64)).exp2()
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Radial profile of `theta_0`: exactly 1 for `r <= 1`, exactly 0 for
/// `r >= 3/2`, smooth in between. `kappa` steers the transition sharpness
/// without moving the support.
pub fn smoothstep(r: f64, kappa: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 1.5 {
        0.0
    } else {
        let a = bump(kappa * (3.0 - 2.0 * r));
        let b = bump(kappa * (2.0 * r - 2.0));
        a / (a + b)
    }
}

/// Smooth dyadic resolution of unity sampled on the grid frequency lattice.
///
/// `theta_0` is radial with `theta_0 = 1` on `|xi| <= 1` and `0` on
/// `|xi| >= 3/2`; `theta_j(xi) = theta_0(2^-j xi) - theta_0(2^-j+1 xi)` for
/// `j >= 1`. Partial sums telescope: `sum_{j<=J} theta_j(xi) =
/// theta_0(2^-J xi)`, hence exactly 1 for `|xi| <= 2^J`. The profile is even
/// and radial, so the reflected symbols coincide with the originals.
#[derive(Clone, Debug)]
pub struct ResolutionOfUnity {
    grid: TorusGrid,
    j_max: usize,
    kappa: f64,
    theta_hat: Vec<Vec<f64>>,
}

impl ResolutionOfUnity {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn profile_sharpness(&self) -> f64 {
        self.kappa
    }

    /// Symbol array of `theta_j` on the frequency lattice.
    pub fn symbol(&self, j: usize) -> &[f64] {
        &self.theta_hat[j]
    }

    pub fn symbols(&self) -> &[Vec<f64>] {
        &self.theta_hat
    }
}

/// Largest level whose annulus fits under the lattice Nyquist bound.
pub fn max_level(grid: &TorusGrid) -> usize {
    grid.resolution_exponent() as usize - 2
}

pub fn build_resolution(grid: &TorusGrid, j_max: usize) -> Result<ResolutionOfUnity> {
    build_resolution_with_profile(grid, j_max, 1.0)
}

pub fn build_resolution_with_profile(
    grid: &TorusGrid,
    j_max: usize,
    kappa: f64,
) -> Result<ResolutionOfUnity> {
    if j_max > max_level(grid) {
        return Err(Error::Argument(format!(
            "j_max={} violates the Nyquist bound; max legal j_max is {}",
            j_max,
            max_level(grid)
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::Argument("profile sharpness must be positive".into()));
    }
    let total = grid.total_samples();
    let mut radii = vec![0.0f64; total];
    for idx in 0..total {
        radii[idx] = xi_norm(grid, idx);
    }
    let mut theta_hat = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let mut sym = vec![0.0f64; total];
        for idx in 0..total {
            let r = radii[idx];
            sym[idx] = if j == 0 {
                smoothstep(r, kappa)
            } else {
                let s = (-(j as f64)).exp2();
                smoothstep(r * s, kappa) - smoothstep(r * s * 2.0, kappa)
            };
        }
        theta_hat.push(sym);
    }
    Ok(ResolutionOfUnity {
        grid: *grid,
        j_max,
        kappa,
        theta_hat,
    })
}

/// Littlewood-Paley block: inverse transform of `theta_j` times the spectrum.
pub fn lp_block(f: &SampledField, rou: &ResolutionOfUnity, j: usize) -> Result<SampledField> {
    if f.grid() != rou.grid() {
        return Err(Error::Argument("field and resolution grids differ".into()));
    }
    if j > rou.j_max() {
        return Err(Error::Argument(format!(
            "block index {} exceeds j_max {}",
            j,
            rou.j_max()
        )));
    }
    let mut spec = to_frequency(f);
    for (v, &s) in spec.iter_mut().zip(rou.symbol(j)) {
        *v *= s;
    }
    to_samples(f.grid(), spec)
}

/// All blocks `j = 0..=j_max` with a single forward transform.
pub fn lp_blocks(f: &SampledField, rou: &ResolutionOfUnity) -> Result<FieldSequence> {
    if f.grid() != rou.grid() {
        return Err(Error::Argument("field and resolution grids differ".into()));
    }
    let spec = to_frequency(f);
    let mut fields = Vec::with_capacity(rou.j_max() + 1);
    for j in 0..=rou.j_max() {
        let filtered: Vec<Complex64> = spec
            .iter()
            .zip(rou.symbol(j))
            .map(|(v, &s)| v * s)
            .collect();
        fields.push(to_samples(f.grid(), filtered)?);
    }
    FieldSequence::new(*f.grid(), fields)
}

fn circular_window_sums(grid: &TorusGrid, cells: &[f64], w: usize) -> Vec<f64> {
    // out[corner] = sum of cells over the w^d block with lower corner `corner`,
    // periodic wrap; computed one axis at a time.
    let per = grid.samples_per_axis();
    let d = grid.dim();
    let mut cur = cells.to_vec();
    let mut next = vec![0.0f64; cur.len()];
    for axis in 0..d {
        let stride = per.pow((d - 1 - axis) as u32);
        let lines = cur.len() / per;
        for l in 0..lines {
            let block = l / stride;
            let offset = l % stride;
            let base = block * stride * per + offset;
            // running sum over window of length w starting at each index
            let mut acc = 0.0;
            for i in 0..w {
                acc += cur[base + (i % per) * stride];
            }
            for start in 0..per {
                next[base + start * stride] = acc;
                acc -= cur[base + start * stride];
                acc += cur[base + ((start + w) % per) * stride];
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

fn circular_window_max_ending(grid: &TorusGrid, cells: &[f64], w: usize) -> Vec<f64> {
    // out[x] = max over corners c with x inside the w-window starting at c,
    // i.e. a sliding max over the w positions ending at x, per axis.
    use std::collections::VecDeque;
    let per = grid.samples_per_axis();
    let d = grid.dim();
    debug_assert!(w >= 1 && w <= per);
    let mut cur = cells.to_vec();
    let mut next = vec![0.0f64; cur.len()];
    let mut ext = vec![0.0f64; per + w - 1];
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(per);
    for axis in 0..d {
        let stride = per.pow((d - 1 - axis) as u32);
        let lines = cur.len() / per;
        for l in 0..lines {
            let block = l / stride;
            let offset = l % stride;
            let base = block * stride * per + offset;
            // ext[i] = value at periodic position i - (w-1)
            for i in 0..per + w - 1 {
                let pos = (i + per - (w - 1)) % per;
                ext[i] = cur[base + pos * stride];
            }
            deque.clear();
            for i in 0..per + w - 1 {
                while let Some(&back) = deque.back() {
                    if ext[back] <= ext[i] {
                        deque.pop_back();
                    } else {
                        break;
                    }
                }
                deque.push_back(i);
                while *deque.front().unwrap() + w <= i {
                    deque.pop_front();
                }
                if i >= w - 1 {
                    next[base + (i - (w - 1)) * stride] = ext[*deque.front().unwrap()];
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Discrete Hardy-Littlewood maximal function.
///
/// `(Mf)(x)` is the maximum over cubes containing `x` with dyadic side
/// lengths `2^-l`, `l` in `window_levels`, and grid-aligned corners (every
/// translate by a multiple of `h`, periodic wrap) of the mean of `|f|` over
/// the cube. Window positions are not restricted to dyadic corners, which
/// tracks the sup over all cubes up to a dimensional constant.
pub fn hl_maximal(
    f: &SampledField,
    window_levels: std::ops::RangeInclusive<i32>,
) -> Result<SampledField> {
    let grid = f.grid();
    let lo = *window_levels.start();
    let hi = *window_levels.end();
    if lo > hi {
        return Err(Error::Argument("empty window level range".into()));
    }
    if lo < -(grid.domain_exponent() as i32) || hi > grid.resolution_exponent() as i32 {
        return Err(Error::Argument(format!(
            "window levels [{lo}, {hi}] outside [{}, {}]",
            -(grid.domain_exponent() as i32),
            grid.resolution_exponent()
        )));
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let mut best = vec![0.0f64; abs.len()];
    for level in lo..=hi {
        let w = 1usize << (grid.resolution_exponent() as i32 - level);
        let w = w.min(grid.samples_per_axis());
        let sums = circular_window_sums(grid, &abs, w);
        let cell_count = (w as f64).powi(grid.dim() as i32);
        let means: Vec<f64> = sums.iter().map(|s| s / cell_count).collect();
        let level_max = circular_window_max_ending(grid, &means, w);
        for (b, v) in best.iter_mut().zip(level_max) {
            if v > *b {
                *b = v;
            }
        }
    }
    SampledField::new(
        *grid,
        best.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )
}

/// Powered maximal operator `(M(|f|^eta))^(1/eta)`.
pub fn powered_maximal(
    f: &SampledField,
    eta: f64,
    window_levels: std::ops::RangeInclusive<i32>,
) -> Result<SampledField> {
    if !(eta > 0.0) {
        return Err(Error::Argument("power eta must be positive".into()));
    }
    let grid = f.grid();
    let powered: Vec<Complex64> = f
        .values()
        .iter()
        .map(|v| Complex64::new(v.norm().powf(eta), 0.0))
        .collect();
    let powered = SampledField::new(*grid, powered)?;
    let maximal = hl_maximal(&powered, window_levels)?;
    SampledField::new(
        *grid,
        maximal
            .values()
            .iter()
            .map(|v| Complex64::new(v.re.powf(1.0 / eta), 0.0))
            .collect(),
    )
}

/// Decay exponent for the Peetre maximal function.
#[derive(Clone, Copy, Debug)]
pub struct PeetreParams {
    pub a: f64,
}

impl PeetreParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Argument("Peetre exponent a must be positive".into()));
        }
        Ok(PeetreParams { a })
    }
}

/// Peetre maximal function of the j-th block:
/// `sup_y |block_j(f)(x - y)| / (1 + |2^j y|^a)` over grid offsets `y`, with
/// `|y|` the periodic torus distance.
pub fn peetre_maximal(
    f: &SampledField,
    rou: &ResolutionOfUnity,
    j: usize,
    params: PeetreParams,
) -> Result<SampledField> {
    let block = lp_block(f, rou, j)?;
    peetre_maximal_of_block(&block, j, params)
}

/// Peetre maximal function applied to an already computed block.
pub fn peetre_maximal_of_block(
    block: &SampledField,
    j: usize,
    params: PeetreParams,
) -> Result<SampledField> {
    let grid = block.grid();
    let total = grid.total_samples();
    let d = grid.dim();
    let per = grid.samples_per_axis();
    let scale = (j as f64).exp2();
    // weight per offset index
    let mut weights = vec![0.0f64; total];
    for y in 0..total {
        let cy = grid.coords(y);
        let mut sq = 0.0;
        for axis in 0..d {
            let w = grid.wrapped_cell_distance(cy[axis] as i64);
            sq += w * w;
        }
        weights[y] = 1.0 / (1.0 + (scale * sq.sqrt()).powf(params.a));
    }
    // visit offsets in descending weight so the scan can stop early
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    let mags: Vec<f64> = block.values().iter().map(|v| v.norm()).collect();
    let gmax = mags.iter().cloned().fold(0.0, f64::max);
    let offset_coords: Vec<Vec<usize>> = order.iter().map(|&y| grid.coords(y)).collect();
    let mut out = vec![0.0f64; total];
    let mut xc = vec![0usize; d];
    for x in 0..total {
        let mut rest = x;
        for axis in (0..d).rev() {
            xc[axis] = rest % per;
            rest /= per;
        }
        let mut best = 0.0f64;
        for (rank, &y) in order.iter().enumerate() {
            let w = weights[y];
            if w * gmax <= best {
                break;
            }
            let yc = &offset_coords[rank];
            let mut idx = 0usize;
            for axis in 0..d {
                idx = idx * per + (xc[axis] + per - yc[axis]) % per;
            }
            let v = mags[idx] * w;
            if v > best {
                best = v;
            }
        }
        out[x] = best;
    }
    SampledField::new(
        *grid,
        out.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )
}

/// Lift operator: Fourier multiplier `(1 + |xi|^2)^(kappa/2)`.
pub fn lift(f: &SampledField, kappa: f64) -> Result<SampledField> {
    let grid = f.grid();
    let mut spec = to_frequency(f);
    for (idx, v) in spec.iter_mut().enumerate() {
        let r = xi_norm(grid, idx);
        *v *= (1.0 + r * r).powf(kappa / 2.0);
    }
    to_samples(grid, spec)
}

/// Apply a generic frequency multiplier to a field.
pub fn apply_multiplier(f: &SampledField, mu_hat: &[Complex64]) -> Result<SampledField> {
    if mu_hat.len() != f.grid().total_samples() {
        return Err(Error::Argument("multiplier length does not match grid".into()));
    }
    if mu_hat.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Argument("multiplier contains non-finite entries".into()));
    }
    let mut spec = to_frequency(f);
    for (v, s) in spec.iter_mut().zip(mu_hat) {
        *v *= s;
    }
    to_samples(f.grid(), spec)
}

/// Exponentially weighted level mixing:
/// `G_j(x) = sum_k 2^(-|k-j| gamma) |g_k(x)|`.
pub fn weighted_mix(g: &FieldSequence, gamma: f64) -> Result<FieldSequence> {
    if !(gamma > 0.0) {
        return Err(Error::Argument("mixing exponent gamma must be positive".into()));
    }
    let grid = *g.grid();
    let total = grid.total_samples();
    let jn = g.j_max() + 1;
    let mags: Vec<Vec<f64>> = g
        .fields()
        .iter()
        .map(|f| f.values().iter().map(|v| v.norm()).collect())
        .collect();
    let mut fields = Vec::with_capacity(jn);
    for j in 0..jn {
        let mut acc = vec![0.0f64; total];
        for k in 0..jn {
            let w = (-((k as f64 - j as f64).abs() * gamma)).exp2();
            for (a, &m) in acc.iter_mut().zip(&mags[k]) {
                *a += w * m;
            }
        }
        fields.push(SampledField::new(
            grid,
            acc.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )?);
    }
    FieldSequence::new(grid, fields)
}

/// Build the field `exp(2 pi i <k, x> / 2^m)` for the signed bin vector `k`.
pub fn pure_mode(grid: &TorusGrid, bins: &[i64], amplitude: Complex64) -> Result<SampledField> {
    if bins.len() != grid.dim() {
        return Err(Error::Argument("mode dimension mismatch".into()));
    }
    let per = grid.samples_per_axis() as i64;
    let nyq = per / 2;
    if bins.iter().any(|&b| b < -nyq || b >= nyq) {
        return Err(Error::Argument("mode exceeds Nyquist range".into()));
    }
    let total = grid.total_samples();
    let mut values = vec![Complex64::new(0.0, 0.0); total];
    for idx in 0..total {
        let coords = grid.coords(idx);
        let mut phase = 0.0f64;
        for (axis, &b) in bins.iter().enumerate() {
            phase += b as f64 * coords[axis] as f64 / per as f64;
        }
        values[idx] = amplitude * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase);
    }
    SampledField::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, m: u32, n: u32) -> TorusGrid {
        TorusGrid::new(d, m, n).unwrap()
    }

    fn wavy(g: TorusGrid, seed: f64) -> SampledField {
        let mut f = SampledField::zero(g);
        for (i, v) in f.values_mut().iter_mut().enumerate() {
            *v = Complex64::new((i as f64 * seed).sin(), (i as f64 * 0.31 * seed).cos());
        }
        f
    }

    #[test]
    fn fft_round_trip() {
        for g in [grid(1, 0, 5), grid(2, 1, 3)] {
            let f = wavy(g, 0.7);
            let back = to_samples(&g, to_frequency(&f)).unwrap();
            let err = f.sub(&back).unwrap().sup_abs();
            assert!(err < 1e-12, "round trip error {err}");
        }
    }

    #[test]
    fn pure_mode_spectrum_is_single_bin() {
        let g = grid(1, 0, 5);
        let f = pure_mode(&g, &[3], Complex64::new(2.0, 0.0)).unwrap();
        let spec = to_frequency(&f);
        for (idx, v) in spec.iter().enumerate() {
            let bins = signed_bins(&g, idx);
            if bins[0] == 3 {
                assert!((v - Complex64::new(2.0 * 32.0, 0.0)).norm() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn resolution_support_and_partition() {
        let g = grid(1, 0, 6);
        let rou = build_resolution(&g, 4).unwrap();
        // theta_0 at xi=0 is 1
        assert_eq!(rou.symbol(0)[0], 1.0);
        // theta_1 at |xi|=2: bins +-2 on n=6 lattice
        let idx2 = 2usize;
        assert!((rou.symbol(1)[idx2] - 1.0).abs() < 1e-15);
        assert_eq!(rou.symbol(0)[idx2], 0.0);
        // telescoping sum equals 1 up to |xi| <= 2^4
        for idx in 0..g.total_samples() {
            let r = xi_norm(&g, idx);
            let sum: f64 = (0..=4).map(|j| rou.symbol(j)[idx]).sum();
            if r <= 16.0 {
                assert!((sum - 1.0).abs() < 1e-14, "defect at |xi|={r}: {sum}");
            }
            for j in 0..=4 {
                let s = rou.symbol(j)[idx];
                assert!((-1e-15..=1.0 + 1e-15).contains(&s));
            }
        }
    }

    #[test]
    fn nyquist_violation_names_limit() {
        let g = grid(1, 0, 6);
        let err = build_resolution(&g, 5).unwrap_err();
        assert!(err.to_string().contains("max legal j_max is 4"));
    }

    #[test]
    fn blocks_on_constant_field() {
        let g = grid(1, 0, 6);
        let rou = build_resolution(&g, 4).unwrap();
        let f = SampledField::constant(g, Complex64::new(2.5, -1.0));
        let b0 = lp_block(&f, &rou, 0).unwrap();
        assert!(f.sub(&b0).unwrap().sup_abs() < 1e-12);
        for j in 1..=4 {
            assert!(lp_block(&f, &rou, j).unwrap().sup_abs() < 1e-12);
        }
    }

    #[test]
    fn blocks_isolate_pure_mode() {
        let g = grid(1, 0, 6);
        let rou = build_resolution(&g, 4).unwrap();
        let f = pure_mode(&g, &[2], Complex64::new(1.0, 0.5)).unwrap();
        let b1 = lp_block(&f, &rou, 1).unwrap();
        assert!(f.sub(&b1).unwrap().sup_abs() < 1e-12);
        for j in [0usize, 2, 3, 4] {
            assert!(lp_block(&f, &rou, j).unwrap().sup_abs() < 1e-12);
        }
    }

    #[test]
    fn block_sum_reconstructs_band_limited() {
        let g = grid(1, 0, 6);
        let rou = build_resolution(&g, 4).unwrap();
        // band-limited: modes up to |xi| = 2^4
        let mut f = SampledField::zero(g);
        for k in [-12i64, -3, 0, 5, 16] {
            f = f
                .add(&pure_mode(&g, &[k], Complex64::new(0.3 * k as f64 + 1.0, 0.1)).unwrap())
                .unwrap();
        }
        let blocks = lp_blocks(&f, &rou).unwrap();
        let mut sum = SampledField::zero(g);
        for b in blocks.fields() {
            sum = sum.add(b).unwrap();
        }
        assert!(sum.sub(&f).unwrap().sup_abs() < 1e-10);
    }

    #[test]
    fn maximal_constant_and_monotone() {
        let g = grid(1, 0, 4);
        let c = SampledField::constant(g, Complex64::new(-3.0, 0.0));
        let m = hl_maximal(&c, 0..=4).unwrap();
        for v in m.values() {
            assert!((v.re - 3.0).abs() < 1e-13);
        }
        let f = wavy(g, 0.9);
        let bigger = f.scale(Complex64::new(2.0, 0.0));
        let mf = hl_maximal(&f, 0..=4).unwrap();
        let mg = hl_maximal(&bigger, 0..=4).unwrap();
        for (a, b) in mf.values().iter().zip(mg.values()) {
            assert!(a.re <= b.re + 1e-12);
        }
    }

    #[test]
    fn maximal_spike_matches_window_oracle() {
        let g = grid(1, 0, 4);
        let n = g.total_samples();
        let mut f = SampledField::zero(g);
        let spike = 5usize;
        f.values_mut()[spike] = Complex64::new(1.0, 0.0);
        let m = hl_maximal(&f, 0..=4).unwrap();
        // oracle: for each x, max over window sizes w in {1,2,4,8,16} and all
        // periodic positions containing both x and the spike of 1/w.
        for x in 0..n {
            let mut expect = 0.0f64;
            for lev in 0..=4 {
                let w = 1usize << (4 - lev);
                for corner in 0..n {
                    let inside = |t: usize| (t + n - corner) % n < w;
                    if inside(x) && inside(spike) {
                        expect = expect.max(1.0 / w as f64);
                    }
                }
            }
            assert!(
                (m.values()[x].re - expect).abs() < 1e-12,
                "x={x}: got {} want {expect}",
                m.values()[x].re
            );
        }
    }

    #[test]
    fn maximal_sublinear() {
        let g = grid(2, 0, 3);
        let f = wavy(g, 0.8);
        let h = wavy(g, 1.7);
        let sum = f.add(&h).unwrap();
        let msum = hl_maximal(&sum, 0..=3).unwrap();
        let mf = hl_maximal(&f, 0..=3).unwrap();
        let mh = hl_maximal(&h, 0..=3).unwrap();
        for i in 0..g.total_samples() {
            assert!(msum.values()[i].re <= mf.values()[i].re + mh.values()[i].re + 1e-12);
        }
    }

    #[test]
    fn powered_maximal_eta_one_is_plain() {
        let g = grid(1, 0, 5);
        let f = wavy(g, 1.3);
        let a = hl_maximal(&f, 0..=5).unwrap();
        let b = powered_maximal(&f, 1.0, 0..=5).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x.re - y.re).abs() < 1e-12);
        }
        let c = SampledField::constant(g, Complex64::new(2.0, 0.0));
        let pc = powered_maximal(&c, 0.6, 0..=5).unwrap();
        for v in pc.values() {
            assert!((v.re - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn powered_maximal_matches_direct() {
        let g = grid(1, 0, 4);
        let f = wavy(g, 0.55);
        let eta = 0.7;
        let got = powered_maximal(&f, eta, 1..=3).unwrap();
        // direct: per x, max over windows of (mean |f|^eta)^(1/eta)
        let n = g.total_samples();
        for x in 0..n {
            let mut best = 0.0f64;
            for lev in 1..=3 {
                let w = 1usize << (4 - lev);
                for corner in 0..n {
                    let inside = |t: usize| (t + n - corner) % n < w;
                    if !inside(x) {
                        continue;
                    }
                    let mut acc = 0.0;
                    for t in 0..w {
                        acc += f.values()[(corner + t) % n].norm().powf(eta);
                    }
                    best = best.max((acc / w as f64).powf(1.0 / eta));
                }
            }
            assert!((got.values()[x].re - best).abs() < 1e-11);
        }
    }

    #[test]
    fn peetre_dominates_block_and_matches_oracle() {
        let g = grid(1, 0, 5);
        let rou = build_resolution(&g, 3).unwrap();
        let f = wavy(g, 0.45);
        let a = 2.0;
        for j in 0..=3usize {
            let block = lp_block(&f, &rou, j).unwrap();
            let star = peetre_maximal(&f, &rou, j, PeetreParams::new(a).unwrap()).unwrap();
            let n = g.total_samples();
            for x in 0..n {
                assert!(star.values()[x].re >= block.values()[x].norm() - 1e-13);
                // brute-force double loop
                let mut best = 0.0f64;
                for y in 0..n {
                    let dist = g.wrapped_cell_distance(y as i64).abs();
                    let w = 1.0 / (1.0 + ((j as f64).exp2() * dist).powf(a));
                    let v = block.values()[(x + n - y) % n].norm() * w;
                    best = best.max(v);
                }
                assert!(
                    (star.values()[x].re - best).abs() <= 1e-12 * best.max(1.0),
                    "j={j} x={x}"
                );
            }
        }
    }

    #[test]
    fn peetre_two_sided_in_a() {
        // With the weight 1 + |2^j y|^a the map a -> theta* is not pointwise
        // monotone (sub-unit offsets gain weight as a grows), but the larger-a
        // maximal never exceeds twice the smaller-a one: for |2^j y| >= 1 the
        // weight shrinks with a, and for |2^j y| < 1 both weights lie in
        // [1/2, 1].
        let g = grid(1, 0, 5);
        let rou = build_resolution(&g, 3).unwrap();
        let f = wavy(g, 0.83);
        let lo = peetre_maximal(&f, &rou, 2, PeetreParams::new(1.0).unwrap()).unwrap();
        let hi = peetre_maximal(&f, &rou, 2, PeetreParams::new(3.0).unwrap()).unwrap();
        for (a, b) in lo.values().iter().zip(hi.values()) {
            assert!(b.re <= 2.0 * a.re + 1e-13);
        }
        // constant blocks attain the maximum at y = 0 for every a
        let c = SampledField::constant(g, Complex64::new(1.25, 0.0));
        for a in [0.5, 2.0, 6.0] {
            let star = peetre_maximal(&c, &rou, 0, PeetreParams::new(a).unwrap()).unwrap();
            for v in star.values() {
                assert!((v.re - 1.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn peetre_of_constant_block() {
        let g = grid(1, 0, 5);
        let rou = build_resolution(&g, 3).unwrap();
        let f = SampledField::constant(g, Complex64::new(0.0, -1.5));
        let star = peetre_maximal(&f, &rou, 0, PeetreParams::new(2.0).unwrap()).unwrap();
        for v in star.values() {
            assert!((v.re - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn lift_identities() {
        let g = grid(1, 0, 5);
        let f = wavy(g, 1.05);
        let id = lift(&f, 0.0).unwrap();
        assert!(f.sub(&id).unwrap().sup_abs() < 1e-13);
        let mode = pure_mode(&g, &[3], Complex64::new(1.0, 0.0)).unwrap();
        let lifted = lift(&mode, 1.4).unwrap();
        let expect = mode.scale(Complex64::new((1.0 + 9.0f64).powf(0.7), 0.0));
        assert!(lifted.sub(&expect).unwrap().sup_abs() < 1e-11);
        let round = lift(&lift(&f, 2.3).unwrap(), -2.3).unwrap();
        assert!(round.sub(&f).unwrap().sup_abs() < 1e-12);
    }

    #[test]
    fn lift_composes() {
        let g = grid(2, 0, 3);
        let f = wavy(g, 0.66);
        let a = lift(&lift(&f, 0.8).unwrap(), 1.1).unwrap();
        let b = lift(&f, 1.9).unwrap();
        assert!(a.sub(&b).unwrap().sup_abs() < 1e-12);
    }

    #[test]
    fn multiplier_identity_and_block_equivalence() {
        let g = grid(1, 0, 5);
        let rou = build_resolution(&g, 3).unwrap();
        let f = wavy(g, 0.21);
        let ones = vec![Complex64::new(1.0, 0.0); g.total_samples()];
        let same = apply_multiplier(&f, &ones).unwrap();
        assert!(same.sub(&f).unwrap().sup_abs() < 1e-12);
        let theta2: Vec<Complex64> = rou.symbol(2).iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let via_mult = apply_multiplier(&f, &theta2).unwrap();
        let via_block = lp_block(&f, &rou, 2).unwrap();
        assert!(via_mult.sub(&via_block).unwrap().sup_abs() < 1e-13);
    }

    #[test]
    fn weighted_mix_single_level_and_oracle() {
        let g = grid(1, 0, 5);
        let k0 = 2usize;
        let gamma = 1.5;
        let mut fields = vec![SampledField::zero(g); 4];
        fields[k0] = SampledField::constant(g, Complex64::new(1.0, 0.0));
        let seq = FieldSequence::new(g, fields).unwrap();
        let mixed = weighted_mix(&seq, gamma).unwrap();
        for j in 0..4 {
            let expect = (-(((j as f64) - k0 as f64).abs() * gamma)).exp2();
            for v in mixed.field(j).values() {
                assert!((v.re - expect).abs() < 1e-14);
            }
        }
        // random sequence against a double loop
        let fields: Vec<SampledField> = (0..4).map(|j| wavy(g, 0.3 + j as f64 * 0.17)).collect();
        let seq = FieldSequence::new(g, fields).unwrap();
        let mixed = weighted_mix(&seq, gamma).unwrap();
        for j in 0..4usize {
            for x in 0..g.total_samples() {
                let mut acc = 0.0;
                for k in 0..4usize {
                    acc += (-((k as f64 - j as f64).abs() * gamma)).exp2()
                        * seq.field(k).values()[x].norm();
                }
                assert!((mixed.field(j).values()[x].re - acc).abs() < 1e-13);
            }
        }
    }
}
