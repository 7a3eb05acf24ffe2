//! Atoms: validation against the scaled-derivative and vanishing-moment
//! conditions, construction of compactly supported atoms, synthesis, and the
//! reproducing-formula analysis that turns a band-limited field into
//! coefficients and back.
//!
//! On the frequency lattice the dual symbols `upsilon_j = theta_j / sum_k
//! theta_k^2` satisfy `sum_j theta_j upsilon_j = 1` on the covered band
//! `|xi| <= 2^j_max` exactly. The level-j annulus spans `|xi| <= 1.5 * 2^j`,
//! so a sampling lattice with replica spacing `2^j` (one sample per level-j
//! cube) folds the annulus onto its mirror image; the coefficients of the
//! reproducing formula are therefore anchored two levels finer, on the
//! level-(j+2) cubes, whose replica spacing `4 * 2^j` clears the annulus
//! diameter `3 * 2^j` and makes the lattice identity exact in every
//! dimension. [`ANCHOR_OFFSET`] records the shift.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::analysis::{signed_bins, to_frequency, to_samples, xi_norm, ResolutionOfUnity};
use crate::error::{Error, Result};
use crate::lattice::{cubes_per_axis, DyadicCube, SampledField, TorusGrid};
use crate::spaces::{lambda_star, CoefficientSequence, SpaceParams};

/// Atom shape parameters: derivative order `K`, moment order `L` (`-1` for
/// none) and support dilation `c > 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomSpec {
    pub smoothness: u32,
    pub moments: i32,
    pub dilation: f64,
}

fn floor_i(x: f64) -> i32 {
    x.floor() as i32
}

impl AtomSpec {
    pub fn new(smoothness: u32, moments: i32, dilation: f64) -> Result<Self> {
        if moments < -1 {
            return Err(Error::Argument("moment order must be >= -1".into()));
        }
        if !(dilation > 1.0) {
            return Err(Error::Argument("support dilation c must exceed 1".into()));
        }
        Ok(AtomSpec {
            smoothness,
            moments,
            dilation,
        })
    }

    /// Smallest admissible orders for the B-scale:
    /// `K >= floor(1+s)_+`, `L >= max(-1, floor(sigma_p - s))`.
    pub fn for_besov(params: &SpaceParams) -> AtomSpec {
        AtomSpec {
            smoothness: floor_i(1.0 + params.s).max(0) as u32,
            moments: (-1).max(floor_i(params.sigma_p() - params.s)),
            dilation: 1.5,
        }
    }

    /// Smallest admissible orders for the F-scale (uses `sigma_{p,q}`).
    pub fn for_tl(params: &SpaceParams) -> AtomSpec {
        AtomSpec {
            smoothness: floor_i(1.0 + params.s).max(0) as u32,
            moments: (-1).max(floor_i(params.sigma_pq() - params.s)),
            dilation: 1.5,
        }
    }
}

/// A candidate atom attached to its cube.
#[derive(Clone, Debug)]
pub struct Atom {
    pub cube: DyadicCube,
    pub values: SampledField,
    pub spec: AtomSpec,
}

/// Validation outcome.
#[derive(Clone, Debug)]
pub struct AtomValidation {
    pub valid: bool,
    /// Largest `2^{-j|alpha|} |D^alpha a|` over the grid, `|alpha| <= K`.
    pub worst_derivative_excess: f64,
    /// Largest normalized moment `|int a u^beta| / ||a||_L1`, `|beta| <= L`.
    pub worst_moment: f64,
    /// Largest `|a|` outside the dilated cube relative to `sup |a|`.
    pub support_leak: f64,
}

/// Multi-indices of total order `<= max_total` in `d` variables,
/// lexicographic.
fn multi_indices(d: usize, max_total: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 0 {
            out.push(prefix.clone());
            return;
        }
        for a in 0..=budget {
            prefix.push(a);
            rec(d - 1, budget - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, max_total, &mut Vec::new(), &mut out);
    out
}

/// Spectral partial derivative `D^alpha f`; each axis contributes a factor
/// `2 pi i xi_axis` per order.
pub fn spectral_derivative(f: &SampledField, alpha: &[u32]) -> Result<SampledField> {
    let grid = f.grid();
    if alpha.len() != grid.dim() {
        return Err(Error::Argument(
            "derivative order dimension mismatch".into(),
        ));
    }
    if alpha.iter().all(|&a| a == 0) {
        return Ok(f.clone());
    }
    let mut spec = to_frequency(f);
    let scale = (-(grid.domain_exponent() as f64)).exp2();
    for (idx, v) in spec.iter_mut().enumerate() {
        let bins = signed_bins(grid, idx);
        let mut factor = Complex64::new(1.0, 0.0);
        for (axis, &a) in alpha.iter().enumerate() {
            let xi = bins[axis] as f64 * scale;
            let base = Complex64::new(0.0, 2.0 * std::f64::consts::PI * xi);
            for _ in 0..a {
                factor *= base;
            }
        }
        *v *= factor;
    }
    to_samples(grid, spec)
}

/// Per-axis offset of each sample from the cube center in units of the
/// dilated half-width `c l / 2`, wrapped periodically; `|u| < 1` is inside
/// the dilated cube.
fn normalized_offsets(grid: &TorusGrid, cube: &DyadicCube, dilation: f64) -> Vec<Vec<f64>> {
    let per = grid.samples_per_axis();
    let w = cube.cells_per_axis(grid);
    let corner = cube.corner_cells(grid);
    let half_width_cells = dilation * w as f64 / 2.0;
    let d = grid.dim();
    let centers: Vec<f64> = corner.iter().map(|&c| c as f64 + w as f64 / 2.0).collect();
    let mut per_axis = vec![vec![0.0f64; per]; d];
    for axis in 0..d {
        for cell in 0..per {
            let mut delta = cell as f64 + 0.5 - centers[axis];
            let p = per as f64;
            delta -= (delta / p).round() * p;
            per_axis[axis][cell] = delta / half_width_cells;
        }
    }
    per_axis
}

fn bump_profile(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Check the scaled derivative bounds, support containment and vanishing
/// moments of a candidate atom.
pub fn validate_atom(atom: &Atom) -> Result<AtomValidation> {
    let grid = atom.values.grid();
    let j = atom.cube.j;
    if j < 0 || (grid.resolution_exponent() as i32 - j) < 4 {
        return Err(Error::Precondition(format!(
            "grid does not resolve the atom: need n - j >= 4, got n={} j={}",
            grid.resolution_exponent(),
            j
        )));
    }
    let offsets = normalized_offsets(grid, &atom.cube, atom.spec.dilation);
    let d = grid.dim();
    let sup = atom.values.sup_abs();
    let mut support_leak = 0.0f64;
    if sup > 0.0 {
        for (idx, v) in atom.values.values().iter().enumerate() {
            let coords = grid.coords(idx);
            let outside = (0..d).any(|a| offsets[a][coords[a]].abs() >= 1.0);
            if outside {
                support_leak = support_leak.max(v.norm() / sup);
            }
        }
    }
    let mut worst = 0.0f64;
    for alpha in multi_indices(d, atom.spec.smoothness) {
        let total: u32 = alpha.iter().sum();
        let deriv = spectral_derivative(&atom.values, &alpha)?;
        let scale = (-(j as f64) * total as f64).exp2();
        worst = worst.max(scale * deriv.sup_abs());
    }
    // vanishing moments are only required at levels j >= 1
    let mut worst_moment = 0.0f64;
    if atom.spec.moments >= 0 && j >= 1 {
        let l1: f64 = atom.values.values().iter().map(|v| v.norm()).sum();
        if l1 > 0.0 {
            for beta in multi_indices(d, atom.spec.moments as u32) {
                let mut acc = Complex64::new(0.0, 0.0);
                for (idx, v) in atom.values.values().iter().enumerate() {
                    let coords = grid.coords(idx);
                    let mut mon = 1.0f64;
                    for (axis, &b) in beta.iter().enumerate() {
                        mon *= offsets[axis][coords[axis]].powi(b as i32);
                    }
                    acc += v * mon;
                }
                worst_moment = worst_moment.max(acc.norm() / l1);
            }
        }
    }
    Ok(AtomValidation {
        valid: worst <= 1.0 + 1e-6 && support_leak <= 1e-10 && worst_moment <= 1e-8,
        worst_derivative_excess: worst,
        worst_moment,
        support_leak,
    })
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Construction("singular moment system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Ok((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Build a smooth atom supported in the dilated cube: a tensor bump,
/// corrected by a polynomial so all moments of degree `<= L` vanish (levels
/// `j >= 1`), then rescaled so the worst scaled-derivative ratio lands in
/// `[1/2, 1]`. Deterministic in `(cube, spec, grid)` and exactly translation
/// equivariant.
pub fn make_atom(cube: &DyadicCube, spec: &AtomSpec, grid: &TorusGrid) -> Result<Atom> {
    if cube.j < 0 || (grid.resolution_exponent() as i32 - cube.j) < 4 {
        return Err(Error::Precondition(format!(
            "grid does not resolve the atom: need n - j >= 4, got n={} j={}",
            grid.resolution_exponent(),
            cube.j
        )));
    }
    let d = grid.dim();
    let offsets = normalized_offsets(grid, cube, spec.dilation);
    let total = grid.total_samples();
    let mut base = vec![0.0f64; total];
    for (idx, b) in base.iter_mut().enumerate() {
        let coords = grid.coords(idx);
        let mut v = 1.0;
        for axis in 0..d {
            v *= bump_profile(offsets[axis][coords[axis]]);
            if v == 0.0 {
                break;
            }
        }
        *b = v;
    }
    let mut values = base.clone();
    if spec.moments >= 0 && cube.j >= 1 {
        // a = b * (u_1^(L+1) - correction) with the correction solving the
        // weighted Gram system, so every moment of degree <= L vanishes while
        // the leading monomial keeps the result nonzero
        let betas = multi_indices(d, spec.moments as u32);
        let nb = betas.len();
        let mono = |idx: usize, beta: &[u32]| -> f64 {
            let coords = grid.coords(idx);
            let mut m = 1.0;
            for (axis, &b) in beta.iter().enumerate() {
                m *= offsets[axis][coords[axis]].powi(b as i32);
            }
            m
        };
        let mut lead = vec![0u32; d];
        lead[0] = spec.moments as u32 + 1;
        let mut gram = vec![vec![0.0f64; nb]; nb];
        let mut rhs = vec![0.0f64; nb];
        for idx in 0..total {
            if base[idx] == 0.0 {
                continue;
            }
            let mvals: Vec<f64> = betas.iter().map(|b| mono(idx, b)).collect();
            let mlead = mono(idx, &lead);
            for i in 0..nb {
                for k in 0..nb {
                    gram[i][k] += base[idx] * mvals[i] * mvals[k];
                }
                rhs[i] += base[idx] * mlead * mvals[i];
            }
        }
        let coef = solve_dense(gram, rhs)?;
        for idx in 0..total {
            if base[idx] == 0.0 {
                values[idx] = 0.0;
                continue;
            }
            let mut g = mono(idx, &lead);
            for (i, beta) in betas.iter().enumerate() {
                g -= coef[i] * mono(idx, beta);
            }
            values[idx] = base[idx] * g;
        }
    }
    let sup_b = base.iter().cloned().fold(0.0, f64::max);
    let sup_v = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if sup_v < 1e-12 * sup_b {
        return Err(Error::Construction(
            "moment projection annihilated the bump at this resolution".into(),
        ));
    }
    let field = SampledField::new(
        *grid,
        values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )?;
    let mut atom = Atom {
        cube: cube.clone(),
        values: field,
        spec: *spec,
    };
    let mut worst = 0.0f64;
    for alpha in multi_indices(d, spec.smoothness) {
        let t: u32 = alpha.iter().sum();
        let deriv = spectral_derivative(&atom.values, &alpha)?;
        worst = worst.max((-(cube.j as f64) * t as f64).exp2() * deriv.sup_abs());
    }
    atom.values = atom
        .values
        .scale(Complex64::new(1.0 / (worst * (1.0 + 1e-12)), 0.0));
    Ok(atom)
}

/// Linear synthesis `f = sum lambda_{j,m} a_{j,m}`.
pub fn synthesize(
    lambda: &CoefficientSequence,
    atoms: &BTreeMap<(i32, Vec<i64>), Atom>,
) -> Result<SampledField> {
    let grid = *lambda.grid();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.total_samples()];
    for ((j, m), v) in lambda.iter() {
        let atom = atoms.get(&(*j, m.clone())).ok_or_else(|| {
            Error::Argument(format!(
                "no atom supplied for nonzero coefficient ({j}, {m:?})"
            ))
        })?;
        if atom.values.grid() != &grid {
            return Err(Error::Argument("atom grid mismatch".into()));
        }
        for (o, a) in out.iter_mut().zip(atom.values.values()) {
            *o += v * a;
        }
    }
    SampledField::new(grid, out)
}

/// Dual symbols `upsilon_j = theta_j / sum_k theta_k^2` on the covered band
/// `|xi| <= 2^j_max`, zero beyond it. The denominator stays above 1/2 on the
/// band (at most two overlapping annuli summing to one); anything below 0.1
/// signals a broken resolution.
pub fn calderon_pair(rou: &ResolutionOfUnity) -> Result<Vec<Vec<f64>>> {
    let grid = rou.grid();
    let total = grid.total_samples();
    let band = (rou.j_max() as f64).exp2();
    let mut denom = vec![0.0f64; total];
    for j in 0..=rou.j_max() {
        for (dn, &s) in denom.iter_mut().zip(rou.symbol(j)) {
            *dn += s * s;
        }
    }
    for idx in 0..total {
        if xi_norm(grid, idx) <= band && denom[idx] < 0.1 {
            return Err(Error::Construction(format!(
                "partition denominator {} below 0.1 inside the covered band (|xi| = {})",
                denom[idx],
                xi_norm(grid, idx)
            )));
        }
    }
    let mut out = Vec::with_capacity(rou.j_max() + 1);
    for j in 0..=rou.j_max() {
        let mut sym = vec![0.0f64; total];
        for idx in 0..total {
            if xi_norm(grid, idx) <= band && denom[idx] > 0.0 {
                sym[idx] = rou.symbol(j)[idx] / denom[idx];
            }
        }
        out.push(sym);
    }
    Ok(out)
}

/// Cube levels sit this many levels below the annulus they carry: the
/// level-(j+2) lattice is the coarsest dyadic lattice that resolves the
/// level-j annulus without aliasing.
pub const ANCHOR_OFFSET: i32 = 2;

/// Coefficients and reconstruction from the reproducing formula.
#[derive(Debug)]
pub struct CalderonAnalysis {
    /// Coefficients keyed by `(j + ANCHOR_OFFSET, m)` for annulus `j`.
    pub coefficients: CoefficientSequence,
    pub reconstruction: SampledField,
}

/// Alias sums over the sublattice with `modulus` residues per axis; the
/// folded value depends only on the residue class of the bin.
fn fold_residues(grid: &TorusGrid, spec: &[Complex64], modulus: usize) -> Vec<Complex64> {
    let d = grid.dim();
    let res_count = modulus.pow(d as u32);
    let mut sums = vec![Complex64::new(0.0, 0.0); res_count];
    for (idx, v) in spec.iter().enumerate() {
        let coords = grid.coords(idx);
        let mut r = 0usize;
        for axis in 0..d {
            r = r * modulus + coords[axis] % modulus;
        }
        sums[r] += v;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let coords = grid.coords(idx);
        let mut r = 0usize;
        for axis in 0..d {
            r = r * modulus + coords[axis] % modulus;
        }
        *o = sums[r];
    }
    out
}

fn band_limit_check(f: &SampledField, band: f64) -> Result<Vec<Complex64>> {
    let spec = to_frequency(f);
    let grid = f.grid();
    let sup = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out_band = 0.0f64;
    for (idx, v) in spec.iter().enumerate() {
        if xi_norm(grid, idx) > band {
            out_band = out_band.max(v.norm());
        }
    }
    if sup > 0.0 && out_band > 1e-9 * sup {
        return Err(Error::Precondition(format!(
            "field is not band-limited to |xi| <= {band}: out-of-band spectral peak {:.3e} of {:.3e}",
            out_band, sup
        )));
    }
    Ok(spec)
}

/// Sample the blocks on the anchor lattices and reconstruct:
/// `lambda_{Q_{jc,m}} = 2^{-jc d} block_j(f)(2^{-jc} m)` with
/// `jc = j + ANCHOR_OFFSET`, and
/// `recon = sum_{j,m} lambda_{jc,m} V_j(. - 2^{-jc} m)` with
/// `V_j = 2^{-md} sum_k upsilon_j(xi_k) e^{2 pi i <k, .> / 2^m}`, evaluated
/// by frequency-domain folding. Requires `j_max + ANCHOR_OFFSET <= n`, which
/// the Nyquist bound `j_max <= n - 2` guarantees.
pub fn analyze_calderon(
    f: &SampledField,
    rou: &ResolutionOfUnity,
    upsilon: &[Vec<f64>],
) -> Result<CalderonAnalysis> {
    let grid = f.grid();
    if grid != rou.grid() {
        return Err(Error::Argument("field and resolution grids differ".into()));
    }
    if upsilon.len() != rou.j_max() + 1 {
        return Err(Error::Argument("dual symbol count mismatch".into()));
    }
    let band = (rou.j_max() as f64).exp2();
    let spec = band_limit_check(f, band)?;
    let d = grid.dim();
    let n = grid.resolution_exponent() as i32;
    let mut lambda = CoefficientSequence::new(*grid);
    let mut recon_spec = vec![Complex64::new(0.0, 0.0); spec.len()];
    for j in 0..=rou.j_max() {
        let jc = j as i32 + ANCHOR_OFFSET;
        let block_spec: Vec<Complex64> = spec
            .iter()
            .zip(rou.symbol(j))
            .map(|(v, &s)| v * s)
            .collect();
        let block = to_samples(grid, block_spec.clone())?;
        let per_cubes = cubes_per_axis(grid, jc);
        let step = 1usize << (n - jc);
        let count = per_cubes.pow(d as u32);
        let weight = (-(jc as f64) * d as f64).exp2();
        for flat in 0..count {
            let mut m = vec![0i64; d];
            let mut rest = flat;
            for axis in (0..d).rev() {
                m[axis] = (rest % per_cubes) as i64;
                rest /= per_cubes;
            }
            let cells: Vec<usize> = m.iter().map(|&mi| mi as usize * step).collect();
            let idx = grid.flat(&cells);
            lambda.insert(jc, m, weight * block.values()[idx])?;
        }
        let folded = fold_residues(grid, &block_spec, per_cubes);
        for ((r, fo), &u) in recon_spec.iter_mut().zip(folded).zip(&upsilon[j]) {
            *r += fo * u;
        }
    }
    let reconstruction = to_samples(grid, recon_spec)?;
    Ok(CalderonAnalysis {
        coefficients: lambda,
        reconstruction,
    })
}

/// The outcome of an atomic decomposition.
#[derive(Debug)]
pub struct Decomposition {
    pub atoms: BTreeMap<(i32, Vec<i64>), Atom>,
    /// Smoothed coefficients `r = C (lambda*)_{min(p,q), delta}`.
    pub coefficients: CoefficientSequence,
    /// The power-of-two normalization constant `C`.
    pub c_norm: f64,
}

/// Split a band-limited field into atoms and smoothed coefficients.
///
/// The per-cube contribution `lambda_{j,m} V_j(. - 2^{-j}m) / r_{j,m}`
/// becomes the atom for `Q_{j,m}`; `C` is the smallest power of two making
/// every atom satisfy the scaled-derivative bounds. These atoms inherit the
/// vanishing moments of `V_j` (its symbol vanishes near zero frequency for
/// `j >= 1`) but decay rapidly instead of having hard compact support.
pub fn decompose_atomic(
    f: &SampledField,
    rou: &ResolutionOfUnity,
    upsilon: &[Vec<f64>],
    spec: &AtomSpec,
    params: &SpaceParams,
    delta: f64,
) -> Result<Decomposition> {
    let analysis = analyze_calderon(f, rou, upsilon)?;
    let lambda = analysis.coefficients;
    let grid = f.grid();
    let d = grid.dim();
    let n = grid.resolution_exponent() as i32;
    let r_exp = if params.q.is_finite() {
        params.p.min(params.q)
    } else {
        params.p
    };
    let star = lambda_star(&lambda, r_exp, delta)?;
    if star.is_empty() {
        return Ok(Decomposition {
            atoms: BTreeMap::new(),
            coefficients: CoefficientSequence::new(*grid),
            c_norm: 1.0,
        });
    }
    // kernel fields V_j and their worst scaled-derivative ratios, measured
    // at the anchor level jc = j + ANCHOR_OFFSET the atoms live on
    let kernel_scale = ((n as f64) * d as f64).exp2();
    let mut kernels: Vec<SampledField> = Vec::with_capacity(rou.j_max() + 1);
    let mut kernel_ratio = Vec::with_capacity(rou.j_max() + 1);
    for (j, u) in upsilon.iter().enumerate() {
        let jc = j as i32 + ANCHOR_OFFSET;
        let spec_arr: Vec<Complex64> = u.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let v = to_samples(grid, spec_arr)?.scale(Complex64::new(kernel_scale, 0.0));
        let mut worst = 0.0f64;
        for alpha in multi_indices(d, spec.smoothness) {
            let t: u32 = alpha.iter().sum();
            let deriv = spectral_derivative(&v, &alpha)?;
            worst = worst.max((-(jc as f64) * t as f64).exp2() * deriv.sup_abs());
        }
        kernels.push(v);
        kernel_ratio.push(worst);
    }
    // smallest power of two C with (|lambda| / (C lambda*)) * ratio <= 1
    let mut need = 0.0f64;
    let mut offender = (0i32, vec![0i64; d]);
    for ((jc, m), v) in lambda.iter() {
        let s = star.get(*jc, m).norm();
        if s == 0.0 {
            continue;
        }
        let r = v.norm() / s * kernel_ratio[(*jc - ANCHOR_OFFSET) as usize];
        if r > need {
            need = r;
            offender = (*jc, m.clone());
        }
    }
    let t = need.log2().ceil().max(0.0);
    if t > 20.0 {
        return Err(Error::Decomposition {
            j: offender.0,
            m: offender.1,
            msg: format!("normalization search exceeded 2^20 (needs 2^{t:.0})"),
        });
    }
    let c_norm = t.exp2();
    let mut coefficients = CoefficientSequence::new(*grid);
    let mut atoms = BTreeMap::new();
    for ((jc, m), v) in lambda.iter() {
        let s = star.get(*jc, m).norm();
        if s == 0.0 {
            continue;
        }
        let r_jm = c_norm * s;
        coefficients.insert(*jc, m.clone(), Complex64::new(r_jm, 0.0))?;
        let step = 1usize << (n - *jc);
        let shift_cells: Vec<usize> = m.iter().map(|&mi| mi as usize * step).collect();
        let kernel = &kernels[(*jc - ANCHOR_OFFSET) as usize];
        let total = grid.total_samples();
        let per = grid.samples_per_axis();
        let mut vals = vec![Complex64::new(0.0, 0.0); total];
        for (idx, val) in vals.iter_mut().enumerate() {
            let coords = grid.coords(idx);
            let mut src = 0usize;
            for axis in 0..d {
                src = src * per + (coords[axis] + per - shift_cells[axis] % per) % per;
            }
            *val = kernel.values()[src];
        }
        let scale = v / r_jm;
        let field = SampledField::new(*grid, vals)?.scale(scale);
        atoms.insert(
            (*jc, m.clone()),
            Atom {
                cube: DyadicCube::new(*jc, m.clone()),
                values: field,
                spec: *spec,
            },
        );
    }
    // cubes where lambda vanished but lambda* did not still carry sequence
    // mass; give them zero atoms so synthesis stays total
    for ((j, m), sv) in star.iter() {
        if !atoms.contains_key(&(*j, m.clone())) && sv.norm() > 0.0 {
            coefficients.insert(*j, m.clone(), Complex64::new(c_norm * sv.norm(), 0.0))?;
            atoms.insert(
                (*j, m.clone()),
                Atom {
                    cube: DyadicCube::new(*j, m.clone()),
                    values: SampledField::zero(*grid),
                    spec: *spec,
                },
            );
        }
    }
    Ok(Decomposition {
        atoms,
        coefficients,
        c_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_resolution, pure_mode};
    use crate::phi::PhiSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(d: usize, m: u32, n: u32) -> TorusGrid {
        TorusGrid::new(d, m, n).unwrap()
    }

    fn band_limited(g: TorusGrid, band: f64, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = g.total_samples();
        let mut spec = vec![Complex64::new(0.0, 0.0); total];
        for (idx, v) in spec.iter_mut().enumerate() {
            if xi_norm(&g, idx) <= band {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        to_samples(&g, spec).unwrap()
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 1).len(), 4);
    }

    #[test]
    fn spec_thresholds() {
        let g = grid(1, 0, 6);
        let params = SpaceParams::new(0.5, 0.5, 2.0, PhiSpec::one(1, 0.5), g, 4).unwrap();
        // sigma_p = 1: K = floor(1.5) = 1, L = floor(1 - 0.5) = 0
        let spec = AtomSpec::for_besov(&params);
        assert_eq!(spec.smoothness, 1);
        assert_eq!(spec.moments, 0);
        let params = SpaceParams::new(2.0, 2.0, 2.0, PhiSpec::one(1, 2.0), g, 4).unwrap();
        let spec = AtomSpec::for_besov(&params);
        assert_eq!(spec.smoothness, 3);
        assert_eq!(spec.moments, -1);
    }

    #[test]
    fn zero_field_is_valid_atom() {
        let g = grid(1, 0, 6);
        let atom = Atom {
            cube: DyadicCube::new(1, vec![0]),
            values: SampledField::zero(g),
            spec: AtomSpec::new(2, 1, 1.5).unwrap(),
        };
        let v = validate_atom(&atom).unwrap();
        assert!(v.valid);
        assert_eq!(v.worst_derivative_excess, 0.0);
    }

    #[test]
    fn made_atoms_validate() {
        let g = grid(1, 0, 7);
        for (j, k, l) in [(1i32, 0u32, -1i32), (2, 1, 0), (1, 2, 1), (3, 0, 0)] {
            let spec = AtomSpec::new(k, l, 1.5).unwrap();
            let cube = DyadicCube::new(j, vec![1i64.min((1 << j) - 1)]);
            let atom = make_atom(&cube, &spec, &g).unwrap();
            let v = validate_atom(&atom).unwrap();
            assert!(
                v.valid,
                "j={j} K={k} L={l}: excess={} leak={} moment={}",
                v.worst_derivative_excess, v.support_leak, v.worst_moment
            );
            assert!(v.worst_derivative_excess <= 1.0 + 1e-9);
            assert!(v.worst_derivative_excess >= 0.5);
        }
    }

    #[test]
    fn made_atom_2d_validates() {
        let g = grid(2, 0, 5);
        let spec = AtomSpec::new(1, 0, 1.5).unwrap();
        let atom = make_atom(&DyadicCube::new(1, vec![0, 1]), &spec, &g).unwrap();
        let v = validate_atom(&atom).unwrap();
        assert!(
            v.valid,
            "excess={} moment={}",
            v.worst_derivative_excess, v.worst_moment
        );
    }

    #[test]
    fn overscaled_atom_fails_with_matching_excess() {
        let g = grid(1, 0, 7);
        let spec = AtomSpec::new(1, -1, 1.5).unwrap();
        let mut atom = make_atom(&DyadicCube::new(2, vec![1]), &spec, &g).unwrap();
        let base = validate_atom(&atom).unwrap().worst_derivative_excess;
        atom.values = atom.values.scale(Complex64::new(10.0, 0.0));
        let v = validate_atom(&atom).unwrap();
        assert!(!v.valid);
        assert!((v.worst_derivative_excess - 10.0 * base).abs() < 1e-9);
    }

    #[test]
    fn atom_shrinking_stays_valid() {
        let g = grid(1, 0, 7);
        let spec = AtomSpec::new(1, 0, 1.5).unwrap();
        let atom = make_atom(&DyadicCube::new(2, vec![1]), &spec, &g).unwrap();
        for t in [1.0, 0.5, 0.1] {
            let scaled = Atom {
                cube: atom.cube.clone(),
                values: atom.values.scale(Complex64::new(t, 0.0)),
                spec: atom.spec,
            };
            assert!(validate_atom(&scaled).unwrap().valid, "t={t}");
        }
    }

    #[test]
    fn moment_projection_kills_mean() {
        let g = grid(1, 0, 7);
        let spec = AtomSpec::new(0, 0, 1.5).unwrap();
        let atom = make_atom(&DyadicCube::new(2, vec![2]), &spec, &g).unwrap();
        let sum: Complex64 = atom.values.values().iter().sum();
        let l1: f64 = atom.values.values().iter().map(|v| v.norm()).sum();
        assert!(sum.norm() <= 1e-8 * l1);
    }

    #[test]
    fn translation_equivariance() {
        let g = grid(1, 0, 7);
        let spec = AtomSpec::new(1, 0, 1.5).unwrap();
        let a0 = make_atom(&DyadicCube::new(2, vec![1]), &spec, &g).unwrap();
        let a1 = make_atom(&DyadicCube::new(2, vec![2]), &spec, &g).unwrap();
        let shift = 1usize << (7 - 2);
        let n = g.total_samples();
        for idx in 0..n {
            let want = a0.values.values()[idx];
            let got = a1.values.values()[(idx + shift) % n];
            assert_eq!(want, got, "idx={idx}");
        }
    }

    #[test]
    fn synthesize_linear() {
        let g = grid(1, 0, 7);
        let spec = AtomSpec::new(1, -1, 1.5).unwrap();
        let mut atoms = BTreeMap::new();
        for m in 0..4i64 {
            atoms.insert(
                (2, vec![m]),
                make_atom(&DyadicCube::new(2, vec![m]), &spec, &g).unwrap(),
            );
        }
        let mut lambda = CoefficientSequence::new(g);
        lambda.insert(2, vec![1], Complex64::new(1.0, 0.0)).unwrap();
        let f1 = synthesize(&lambda, &atoms).unwrap();
        assert!(f1.sub(&atoms[&(2, vec![1])].values).unwrap().sup_abs() < 1e-15);
        let doubled = synthesize(&lambda.scale(Complex64::new(2.0, 0.0)), &atoms).unwrap();
        assert!(
            doubled
                .sub(&f1.scale(Complex64::new(2.0, 0.0)))
                .unwrap()
                .sup_abs()
                < 1e-15
        );
        let mut lambda = CoefficientSequence::new(g);
        lambda.insert(2, vec![3], Complex64::new(1.0, 0.0)).unwrap();
        atoms.remove(&(2, vec![3]));
        assert!(synthesize(&lambda, &atoms).is_err());
    }

    #[test]
    fn calderon_pair_identity() {
        let g = grid(1, 0, 7);
        let rou = build_resolution(&g, 5).unwrap();
        let ups = calderon_pair(&rou).unwrap();
        let band = 32.0;
        for idx in 0..g.total_samples() {
            let r = xi_norm(&g, idx);
            let sum: f64 = (0..=5).map(|j| rou.symbol(j)[idx] * ups[j][idx]).sum();
            if r <= band {
                assert!((sum - 1.0).abs() < 1e-12, "|xi|={r}: sum={sum}");
            }
        }
        // single-cover point: theta_1 = 1 at |xi| = 2, so upsilon_1 = 1 there
        assert!((ups[1][2] - 1.0).abs() < 1e-12);
        assert!(ups[0][2].abs() < 1e-12);
    }

    #[test]
    fn analyze_zero_and_linearity() {
        let g = grid(1, 0, 7);
        let rou = build_resolution(&g, 5).unwrap();
        let ups = calderon_pair(&rou).unwrap();
        let zero = SampledField::zero(g);
        let out = analyze_calderon(&zero, &rou, &ups).unwrap();
        assert!(out.coefficients.is_empty());
        assert_eq!(out.reconstruction.sup_abs(), 0.0);
        let f = band_limited(g, 16.0, 3);
        let h = band_limited(g, 16.0, 4);
        let af = analyze_calderon(&f, &rou, &ups).unwrap();
        let ah = analyze_calderon(&h, &rou, &ups).unwrap();
        let sum = f.add(&h).unwrap();
        let asum = analyze_calderon(&sum, &rou, &ups).unwrap();
        for ((j, m), v) in asum.coefficients.iter() {
            let want = af.coefficients.get(*j, m) + ah.coefficients.get(*j, m);
            assert!((v - want).norm() <= 1e-12 * v.norm().max(1.0));
        }
    }

    #[test]
    fn analyze_pure_mode_coefficients() {
        // |xi0| = 2 lives in annulus 1, anchored on level-3 cubes
        let g = grid(1, 0, 7);
        let rou = build_resolution(&g, 5).unwrap();
        let ups = calderon_pair(&rou).unwrap();
        let amp = Complex64::new(0.7, -0.2);
        let f = pure_mode(&g, &[2], amp).unwrap();
        let out = analyze_calderon(&f, &rou, &ups).unwrap();
        let anchor = 1 + ANCHOR_OFFSET;
        for ((j, m), v) in out.coefficients.iter() {
            if *j != anchor {
                assert!(v.norm() < 1e-12, "level {j} should be empty");
                continue;
            }
            // lambda = 2^-anchor * amp * e^{2 pi i * 2 * (m / 2^anchor)}
            let phase = 2.0 * std::f64::consts::PI * 2.0 * (m[0] as f64 / 8.0);
            let want = amp * 0.125 * Complex64::from_polar(1.0, phase);
            assert!((v - want).norm() < 1e-12);
        }
        assert!(out.reconstruction.sub(&f).unwrap().sup_abs() < 1e-10);
    }

    #[test]
    fn calderon_round_trip_random() {
        let g = grid(1, 0, 8);
        let rou = build_resolution(&g, 6).unwrap();
        let ups = calderon_pair(&rou).unwrap();
        for seed in 0..5u64 {
            let f = band_limited(g, 64.0, seed);
            let out = analyze_calderon(&f, &rou, &ups).unwrap();
            let err = out.reconstruction.sub(&f).unwrap().sup_abs();
            let scale = f.sup_abs();
            assert!(err <= 1e-8 * scale, "seed {seed}: rel err {}", err / scale);
        }
    }

    #[test]
    fn band_violation_rejected() {
        let g = grid(1, 0, 7);
        let rou = build_resolution(&g, 4).unwrap();
        let ups = calderon_pair(&rou).unwrap();
        let f = pure_mode(&g, &[40], Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            analyze_calderon(&f, &rou, &ups),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decompose_round_trip_and_bounds() {
        let g = grid(1, 0, 8);
        let rou = build_resolution(&g, 6).unwrap();
        let ups = calderon_pair(&rou).unwrap();
        let params = SpaceParams::new(0.5, 2.0, 2.0, PhiSpec::one(1, 2.0), g, 6).unwrap();
        let spec = AtomSpec::for_besov(&params);
        let f = band_limited(g, 32.0, 11);
        let dec = decompose_atomic(&f, &rou, &ups, &spec, &params, 2.0).unwrap();
        let recon = synthesize(&dec.coefficients, &dec.atoms).unwrap();
        let rel = recon.sub(&f).unwrap().sup_abs() / f.sup_abs();
        assert!(rel < 1e-6, "round trip rel err {rel}");
        for atom in dec.atoms.values() {
            let mut worst = 0.0f64;
            for alpha in multi_indices(1, spec.smoothness) {
                let t: u32 = alpha.iter().sum();
                let deriv = spectral_derivative(&atom.values, &alpha).unwrap();
                worst = worst.max((-(atom.cube.j as f64) * t as f64).exp2() * deriv.sup_abs());
            }
            assert!(worst <= 1.0 + 1e-6, "atom bound violated: {worst}");
        }
        // decomposing a single constructed atom round-trips too, after
        // projecting its (tiny) out-of-band spectral tail away
        let a = make_atom(&DyadicCube::new(2, vec![1]), &spec, &g).unwrap();
        let mut aspec = to_frequency(&a.values);
        for (idx, v) in aspec.iter_mut().enumerate() {
            if xi_norm(&g, idx) > 64.0 {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        let a_band = to_samples(&g, aspec).unwrap();
        let dec = decompose_atomic(&a_band, &rou, &ups, &spec, &params, 2.0).unwrap();
        let recon = synthesize(&dec.coefficients, &dec.atoms).unwrap();
        let rel = recon.sub(&a_band).unwrap().sup_abs() / a_band.sup_abs();
        assert!(rel < 1e-6, "atom round trip rel err {rel}");
        // zero field: empty output
        let dec =
            decompose_atomic(&SampledField::zero(g), &rou, &ups, &spec, &params, 2.0).unwrap();
        assert!(dec.atoms.is_empty());
    }
}
