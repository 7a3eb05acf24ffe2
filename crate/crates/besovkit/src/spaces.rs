//! The quasi-norms: mixed sequence-of-functions norms, function-space norms,
//! sequence-space norms, the lambda-star transform and comparison norms.
//!
//! Every supremum over dyadic cubes runs over the levels `-m ..= j_max` that
//! tile the torus. Inner sums over the block index start at `j_P v 0`, the
//! level of the cube clamped at zero (a debug switch restarts them at zero to
//! reproduce the degenerate behaviour that motivates the clamp).

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{lp_blocks, ResolutionOfUnity};
use crate::error::{Error, Result};
use crate::lattice::{
    cube_flat_index, cubes_at_level, cubes_per_axis, CubeSums, DyadicCube, FieldSequence,
    SampledField, TorusGrid,
};
use crate::phi::{
    check_gp_membership, default_epsilon_candidates, default_grid, find_epsilon, PhiSpec,
};

/// The parameter tuple `(s, p, q, phi)` plus the grid truncation.
///
/// `q = f64::INFINITY` selects the sup modification. Construction verifies
/// that `phi` belongs to `G_p` at `(p, d)`; `new_unchecked` skips the check
/// for negative tests.
#[derive(Clone, Debug)]
pub struct SpaceParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub phi: PhiSpec,
    grid: TorusGrid,
    j_max: usize,
    epsilon: Option<f64>,
    /// Start inner sums at 0 instead of `j_P v 0` (debug switch).
    pub sum_from_zero: bool,
}

impl SpaceParams {
    pub fn new(
        s: f64,
        p: f64,
        q: f64,
        phi: PhiSpec,
        grid: TorusGrid,
        j_max: usize,
    ) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Argument("p must be finite and positive".into()));
        }
        if !(q > 0.0) {
            return Err(Error::Argument("q must be positive (or infinite)".into()));
        }
        let verdict = check_gp_membership(&phi, p, grid.dim() as u32, &default_grid())?;
        if !verdict.member {
            return Err(Error::Precondition(format!(
                "phi is not an admissible weight at p={p}, d={}: it must be nondecreasing with t^(-d/p) phi(t) nonincreasing{}",
                grid.dim(),
                verdict
                    .witness
                    .map(|(t, s)| format!(" (violated between t={t} and t={s})"))
                    .unwrap_or_default()
            )));
        }
        Ok(Self::new_unchecked(s, p, q, phi, grid, j_max))
    }

    /// Build without the membership gate (negative tests, comparison norms).
    pub fn new_unchecked(
        s: f64,
        p: f64,
        q: f64,
        phi: PhiSpec,
        grid: TorusGrid,
        j_max: usize,
    ) -> Self {
        let epsilon = find_epsilon(
            &phi,
            p,
            grid.dim() as u32,
            &default_epsilon_candidates(p, grid.dim() as u32),
        )
        .ok()
        .flatten();
        SpaceParams {
            s,
            p,
            q,
            phi,
            grid,
            j_max,
            epsilon,
            sum_from_zero: false,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// A verified exponent for the epsilon growth condition, if any.
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn d(&self) -> usize {
        self.grid.dim()
    }

    /// `sigma_p = d (1/p - 1)_+`
    pub fn sigma_p(&self) -> f64 {
        self.grid.dim() as f64 * (1.0 / self.p - 1.0).max(0.0)
    }

    /// `sigma_q = d (1/q - 1)_+`
    pub fn sigma_q(&self) -> f64 {
        if self.q.is_infinite() {
            0.0
        } else {
            self.grid.dim() as f64 * (1.0 / self.q - 1.0).max(0.0)
        }
    }

    /// `sigma_{p,q} = max(sigma_p, sigma_q)`
    pub fn sigma_pq(&self) -> f64 {
        self.sigma_p().max(self.sigma_q())
    }

    pub fn with_q(&self, q: f64) -> SpaceParams {
        let mut out = self.clone();
        out.q = q;
        out
    }

    pub fn with_s(&self, s: f64) -> SpaceParams {
        let mut out = self.clone();
        out.s = s;
        out
    }

    fn cube_levels(&self) -> std::ops::RangeInclusive<i32> {
        -(self.grid.domain_exponent() as i32)..=(self.j_max as i32)
    }

    fn sum_start(&self, cube_level: i32) -> usize {
        if self.sum_from_zero {
            0
        } else {
            cube_level.max(0) as usize
        }
    }
}

/// Norm value plus the cube attaining the sup and a per-level profile.
#[derive(Clone, Debug, Serialize)]
pub struct NormDetail {
    pub value: f64,
    pub maximizing_cube: Option<DyadicCube>,
    /// Largest cube value per level, `(level, sup)`.
    pub per_level: Vec<(i32, f64)>,
}

impl NormDetail {
    fn from_level_scan(best: Option<(f64, DyadicCube)>, per_level: Vec<(i32, f64)>) -> NormDetail {
        match best {
            Some((value, cube)) => NormDetail {
                value,
                maximizing_cube: Some(cube),
                per_level,
            },
            None => NormDetail {
                value: 0.0,
                maximizing_cube: None,
                per_level,
            },
        }
    }
}

fn check_sequence(g: &FieldSequence, params: &SpaceParams) -> Result<()> {
    if g.grid() != params.grid() {
        return Err(Error::Argument(
            "sequence grid does not match parameters".into(),
        ));
    }
    if g.j_max() < params.j_max() {
        return Err(Error::Argument(format!(
            "sequence has {} levels but params truncate at j_max={}",
            g.j_max(),
            params.j_max()
        )));
    }
    Ok(())
}

/// `l^q(L^p_phi)` norm of a level-indexed family:
/// `sup_P phi(l(P))^-1 ( sum_{j >= j_P v 0} (int_P |g_j|^p)^{q/p} )^{1/q}`.
pub fn mixed_norm_lq_lp(g: &FieldSequence, params: &SpaceParams) -> Result<NormDetail> {
    check_sequence(g, params)?;
    let grid = params.grid();
    let h_d = grid.cell_volume();
    let jn = params.j_max() + 1;
    let sums: Vec<CubeSums> = (0..jn)
        .map(|j| {
            let cells: Vec<f64> = g
                .field(j)
                .values()
                .iter()
                .map(|v| v.norm().powf(params.p))
                .collect();
            CubeSums::build(grid, &cells, params.j_max() as i32)
        })
        .collect();
    let mut best: Option<(f64, DyadicCube)> = None;
    let mut per_level = Vec::new();
    for level in params.cube_levels() {
        let weight = 1.0 / params.phi.eval((-(level as f64)).exp2())?;
        let start = params.sum_start(level);
        let mut level_sup = 0.0f64;
        for cube in cubes_at_level(grid, level)? {
            let ci = cube_flat_index(grid, &cube);
            let value = if params.q.is_infinite() {
                let mut sup = 0.0f64;
                for j in start..jn {
                    sup = sup.max((h_d * sums[j].sum(level, ci)).powf(1.0 / params.p));
                }
                sup * weight
            } else {
                let mut acc = 0.0f64;
                for j in start..jn {
                    acc += (h_d * sums[j].sum(level, ci)).powf(params.q / params.p);
                }
                acc.powf(1.0 / params.q) * weight
            };
            level_sup = level_sup.max(value);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, cube));
            }
        }
        per_level.push((level, level_sup));
    }
    Ok(NormDetail::from_level_scan(best, per_level))
}

/// `L^p_phi(l^q)` norm of a level-indexed family:
/// `sup_P phi(l(P))^-1 ( int_P ( sum_{j >= j_P v 0} |g_j|^q )^{p/q} )^{1/p}`.
///
/// For finite `q` the weight must satisfy the epsilon growth condition;
/// [`mixed_norm_lp_lq_unchecked`] skips that gate.
pub fn mixed_norm_lp_lq(g: &FieldSequence, params: &SpaceParams) -> Result<NormDetail> {
    if params.q.is_finite() && params.epsilon().is_none() {
        return Err(Error::Precondition(format!(
            "the epsilon growth condition t^(eps - d/p) phi(t) <~ r^(eps - d/p) phi(r) (t >= r) \
             was not verified for this phi at p={}, required when q={} is finite",
            params.p, params.q
        )));
    }
    mixed_norm_lp_lq_unchecked(g, params)
}

/// Same as [`mixed_norm_lp_lq`] without the epsilon gate.
pub fn mixed_norm_lp_lq_unchecked(g: &FieldSequence, params: &SpaceParams) -> Result<NormDetail> {
    check_sequence(g, params)?;
    let grid = params.grid();
    let h_d = grid.cell_volume();
    let total = grid.total_samples();
    let jn = params.j_max() + 1;
    // suffix[k](x) = sum_{j >= k} |g_j(x)|^q  (sup over j for q = infinity)
    let mut suffix = vec![vec![0.0f64; total]; jn + 1];
    for k in (0..jn).rev() {
        let (head, tail) = suffix.split_at_mut(k + 1);
        let cur = &mut head[k];
        let next = &tail[0];
        let vals = g.field(k).values();
        if params.q.is_infinite() {
            for x in 0..total {
                cur[x] = next[x].max(vals[x].norm());
            }
        } else {
            for x in 0..total {
                cur[x] = next[x] + vals[x].norm().powf(params.q);
            }
        }
    }
    let mut best: Option<(f64, DyadicCube)> = None;
    let mut per_level = Vec::new();
    for level in params.cube_levels() {
        let weight = 1.0 / params.phi.eval((-(level as f64)).exp2())?;
        let start = params.sum_start(level).min(jn);
        let integrand: Vec<f64> = suffix[start]
            .iter()
            .map(|&s| {
                if params.q.is_infinite() {
                    s.powf(params.p)
                } else {
                    s.powf(params.p / params.q)
                }
            })
            .collect();
        let sums = CubeSums::build(grid, &integrand, level);
        let mut level_sup = 0.0f64;
        for cube in cubes_at_level(grid, level)? {
            let ci = cube_flat_index(grid, &cube);
            let value = (h_d * sums.sum(level, ci)).powf(1.0 / params.p) * weight;
            level_sup = level_sup.max(value);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, cube));
            }
        }
        per_level.push((level, level_sup));
    }
    Ok(NormDetail::from_level_scan(best, per_level))
}

/// Weighted block sequence `{2^{js} block_j(f)}`.
pub fn weighted_blocks(
    f: &SampledField,
    rou: &ResolutionOfUnity,
    params: &SpaceParams,
) -> Result<FieldSequence> {
    if rou.j_max() < params.j_max() {
        return Err(Error::Argument(
            "resolution has fewer levels than params".into(),
        ));
    }
    let blocks = lp_blocks(f, rou)?;
    let fields: Vec<SampledField> = (0..=params.j_max())
        .map(|j| {
            blocks
                .field(j)
                .scale(Complex64::new((params.s * j as f64).exp2(), 0.0))
        })
        .collect();
    FieldSequence::new(*f.grid(), fields)
}

/// Generalized Besov-type norm: the `l^q(L^p_phi)` norm of the weighted
/// block sequence.
pub fn besov_norm(
    f: &SampledField,
    rou: &ResolutionOfUnity,
    params: &SpaceParams,
) -> Result<NormDetail> {
    mixed_norm_lq_lp(&weighted_blocks(f, rou, params)?, params)
}

/// Generalized Triebel-Lizorkin-type norm: the `L^p_phi(l^q)` norm of the
/// weighted block sequence.
pub fn tl_norm(
    f: &SampledField,
    rou: &ResolutionOfUnity,
    params: &SpaceParams,
) -> Result<NormDetail> {
    mixed_norm_lp_lq(&weighted_blocks(f, rou, params)?, params)
}

/// `L^p_phi` norm: `sup_{|P| >= 1} phi(l(P))^-1 (int_P |f|^p)^{1/p}`.
pub fn lp_phi_norm(f: &SampledField, p: f64, phi: &PhiSpec) -> Result<NormDetail> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Argument("p must be finite and positive".into()));
    }
    let grid = f.grid();
    let h_d = grid.cell_volume();
    let cells: Vec<f64> = f.values().iter().map(|v| v.norm().powf(p)).collect();
    let sums = CubeSums::build(grid, &cells, 0);
    let mut best: Option<(f64, DyadicCube)> = None;
    let mut per_level = Vec::new();
    for level in -(grid.domain_exponent() as i32)..=0 {
        let weight = 1.0 / phi.eval((-(level as f64)).exp2())?;
        let mut level_sup = 0.0f64;
        for cube in cubes_at_level(grid, level)? {
            let ci = cube_flat_index(grid, &cube);
            let value = (h_d * sums.sum(level, ci)).powf(1.0 / p) * weight;
            level_sup = level_sup.max(value);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, cube));
            }
        }
        per_level.push((level, level_sup));
    }
    Ok(NormDetail::from_level_scan(best, per_level))
}

/// Classical `B^s_{inf,inf}` comparison norm: `sup_j 2^{js} max_x |block_j|`.
pub fn besov_infty_norm(f: &SampledField, rou: &ResolutionOfUnity, s: f64) -> Result<f64> {
    let blocks = lp_blocks(f, rou)?;
    let mut sup = 0.0f64;
    for j in 0..=rou.j_max() {
        sup = sup.max((s * j as f64).exp2() * blocks.field(j).sup_abs());
    }
    Ok(sup)
}

/// Sparse coefficient sequence `(j, m) -> lambda_{Q_{j,m}}` with lexicographic
/// key order.
#[derive(Clone, Debug)]
pub struct CoefficientSequence {
    grid: TorusGrid,
    entries: BTreeMap<(i32, Vec<i64>), Complex64>,
}

impl CoefficientSequence {
    pub fn new(grid: TorusGrid) -> Self {
        CoefficientSequence {
            grid,
            entries: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn insert(&mut self, j: i32, m: Vec<i64>, value: Complex64) -> Result<()> {
        if j < 0 {
            return Err(Error::Argument("coefficient level must be >= 0".into()));
        }
        if m.len() != self.grid.dim() {
            return Err(Error::Argument(
                "coefficient offset dimension mismatch".into(),
            ));
        }
        let per = cubes_per_axis(&self.grid, j) as i64;
        if m.iter().any(|&mi| mi < 0 || mi >= per) {
            return Err(Error::Argument(format!(
                "coefficient cube ({j}, {m:?}) outside the domain"
            )));
        }
        if value != Complex64::new(0.0, 0.0) {
            self.entries.insert((j, m), value);
        }
        Ok(())
    }

    pub fn get(&self, j: i32, m: &[i64]) -> Complex64 {
        self.entries
            .get(&(j, m.to_vec()))
            .cloned()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i32, Vec<i64>), &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn levels(&self) -> Vec<i32> {
        let mut ls: Vec<i32> = self.entries.keys().map(|(j, _)| *j).collect();
        ls.sort_unstable();
        ls.dedup();
        ls
    }

    pub fn max_level(&self) -> Option<i32> {
        self.entries.keys().map(|(j, _)| *j).max()
    }

    pub fn scale(&self, c: Complex64) -> CoefficientSequence {
        let mut out = CoefficientSequence::new(self.grid);
        for ((j, m), v) in &self.entries {
            out.entries.insert((*j, m.clone()), v * c);
        }
        out
    }

    /// Serialize to the JSON array of `{"j","m","re","im"}` records.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.entries
                .iter()
                .map(|((j, m), v)| serde_json::json!({"j": j, "m": m, "re": v.re, "im": v.im}))
                .collect(),
        )
    }

    pub fn from_json(grid: TorusGrid, value: &serde_json::Value) -> Result<CoefficientSequence> {
        #[derive(Deserialize)]
        struct Rec {
            j: i32,
            m: Vec<i64>,
            re: f64,
            im: f64,
        }
        let recs: Vec<Rec> = serde_json::from_value(value.clone())
            .map_err(|e| Error::Format(format!("coefficient array: {e}")))?;
        let mut out = CoefficientSequence::new(grid);
        for r in recs {
            out.insert(r.j, r.m, Complex64::new(r.re, r.im))?;
        }
        Ok(out)
    }
}

/// Ancestor cube index at `level <= j` of the level-`j` offset `m`.
fn ancestor_index(grid: &TorusGrid, j: i32, m: &[i64], level: i32) -> usize {
    let shift = (j - level) as u32;
    let per = cubes_per_axis(grid, level);
    let mut idx = 0usize;
    for &mi in m {
        idx = idx * per + (mi as usize >> shift);
    }
    idx
}

fn unflatten_cube(grid: &TorusGrid, level: i32, flat: usize) -> DyadicCube {
    let per = cubes_per_axis(grid, level);
    let mut k = vec![0i64; grid.dim()];
    let mut rest = flat;
    for axis in (0..grid.dim()).rev() {
        k[axis] = (rest % per) as i64;
        rest /= per;
    }
    DyadicCube::new(level, k)
}

/// Sequence-space `b^{s,phi}_{p,q}` norm:
/// `sup_P phi(l(P))^-1 ( sum_j [ sum_{Q_{j,m} in P} (2^{j(s - d/p)} |lambda|)^p ]^{q/p} )^{1/q}`.
pub fn seq_b_norm(lambda: &CoefficientSequence, params: &SpaceParams) -> Result<NormDetail> {
    if lambda.grid() != params.grid() {
        return Err(Error::Argument(
            "coefficient grid does not match parameters".into(),
        ));
    }
    let grid = params.grid();
    let d_over_p = grid.dim() as f64 / params.p;
    let mut best: Option<(f64, DyadicCube)> = None;
    let mut per_level = Vec::new();
    for level in params.cube_levels() {
        let weight = 1.0 / params.phi.eval((-(level as f64)).exp2())?;
        let start = params.sum_start(level) as i32;
        // per (cube, j): sum over contained coefficients of |term|^p
        let mut acc: BTreeMap<(usize, i32), f64> = BTreeMap::new();
        for ((j, m), v) in lambda.iter() {
            if *j < start || *j > params.j_max() as i32 {
                continue;
            }
            let term = ((params.s - d_over_p) * *j as f64).exp2() * v.norm();
            let ci = ancestor_index(grid, *j, m, level);
            *acc.entry((ci, *j)).or_insert(0.0) += term.powf(params.p);
        }
        let mut per_cube: BTreeMap<usize, f64> = BTreeMap::new();
        if params.q.is_infinite() {
            for ((ci, _), v) in acc {
                let e = per_cube.entry(ci).or_insert(0.0);
                let val = v.powf(1.0 / params.p);
                if val > *e {
                    *e = val;
                }
            }
        } else {
            for ((ci, _), v) in acc {
                *per_cube.entry(ci).or_insert(0.0) += v.powf(params.q / params.p);
            }
        }
        let mut level_sup = 0.0f64;
        for (ci, raw) in per_cube {
            let value = if params.q.is_infinite() {
                raw * weight
            } else {
                raw.powf(1.0 / params.q) * weight
            };
            level_sup = level_sup.max(value);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, unflatten_cube(grid, level, ci)));
            }
        }
        per_level.push((level, level_sup));
    }
    Ok(NormDetail::from_level_scan(best, per_level))
}

/// Sequence-space `f^{s,phi}_{p,q}` norm with indicator weights; the integral
/// is exact because the integrand is constant on the finest coefficient mesh.
pub fn seq_f_norm(lambda: &CoefficientSequence, params: &SpaceParams) -> Result<NormDetail> {
    if lambda.grid() != params.grid() {
        return Err(Error::Argument(
            "coefficient grid does not match parameters".into(),
        ));
    }
    if params.q.is_finite() && params.epsilon().is_none() {
        return Err(Error::Precondition(format!(
            "the epsilon growth condition was not verified for this phi at p={}, required when q={} is finite",
            params.p, params.q
        )));
    }
    seq_f_norm_unchecked(lambda, params)
}

/// Same as [`seq_f_norm`] without the epsilon gate.
pub fn seq_f_norm_unchecked(
    lambda: &CoefficientSequence,
    params: &SpaceParams,
) -> Result<NormDetail> {
    let grid = params.grid();
    let j_hi = params.j_max() as i32;
    let d = grid.dim();
    let fine_per = cubes_per_axis(grid, j_hi);
    let fine_count = fine_per.pow(d as u32);
    let fine_vol = (-(j_hi as f64) * d as f64).exp2();
    // 2^{js} |lambda_{j, m_j(x)}| on each finest cell, per level
    let mut level_vals: Vec<Vec<f64>> = vec![vec![0.0; fine_count]; (j_hi + 1) as usize];
    for ((j, m), v) in lambda.iter() {
        if *j > j_hi {
            continue;
        }
        let term = (params.s * *j as f64).exp2() * v.norm();
        let shift = (j_hi - *j) as u32;
        let children_per = 1usize << shift;
        let child_count = children_per.pow(d as u32);
        for local in 0..child_count {
            let mut rest = local;
            let mut idx = 0usize;
            for axis in 0..d {
                let exp = (d - 1 - axis) as u32;
                let step = children_per.pow(exp);
                let c = rest / step;
                rest %= step;
                idx = idx * fine_per + ((m[axis] as usize) << shift) + c;
            }
            level_vals[*j as usize][idx] = term;
        }
    }
    let mut best: Option<(f64, DyadicCube)> = None;
    let mut per_level = Vec::new();
    for level in params.cube_levels() {
        let weight = 1.0 / params.phi.eval((-(level as f64)).exp2())?;
        let start = params.sum_start(level).min(j_hi as usize + 1);
        let mut integrand = vec![0.0f64; fine_count];
        for vals in level_vals.iter().skip(start) {
            if params.q.is_infinite() {
                for (acc, &v) in integrand.iter_mut().zip(vals) {
                    if v > *acc {
                        *acc = v;
                    }
                }
            } else {
                for (acc, &v) in integrand.iter_mut().zip(vals) {
                    if v > 0.0 {
                        *acc += v.powf(params.q);
                    }
                }
            }
        }
        let cells: Vec<f64> = integrand
            .iter()
            .map(|&s| {
                if s == 0.0 {
                    0.0
                } else if params.q.is_infinite() {
                    s.powf(params.p)
                } else {
                    s.powf(params.p / params.q)
                }
            })
            .collect();
        // aggregate finest cells into cubes at `level`
        let shift = (j_hi - level) as u32;
        let per = cubes_per_axis(grid, level);
        let count = per.pow(d as u32);
        let mut cube_acc = vec![0.0f64; count];
        for (idx, &v) in cells.iter().enumerate() {
            let mut coords = vec![0usize; d];
            let mut rest = idx;
            for axis in (0..d).rev() {
                coords[axis] = rest % fine_per;
                rest /= fine_per;
            }
            let mut ci = 0usize;
            for axis in 0..d {
                ci = ci * per + (coords[axis] >> shift);
            }
            cube_acc[ci] += v;
        }
        let mut level_sup = 0.0f64;
        for (ci, &acc) in cube_acc.iter().enumerate() {
            let value = (fine_vol * acc).powf(1.0 / params.p) * weight;
            level_sup = level_sup.max(value);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, unflatten_cube(grid, level, ci)));
            }
        }
        per_level.push((level, level_sup));
    }
    Ok(NormDetail::from_level_scan(best, per_level))
}

/// Same-level smoothing transform: for each level present in `lambda`,
/// `(lambda*_{r,delta})_{Q_{j,m}} = ( sum_k |lambda_{j,k}|^r /
/// (1 + |k - m|_per)^delta )^{1/r}` with the periodic Euclidean offset
/// distance in cube units (lower-corner anchors). `r = inf` takes the sup of
/// the damped terms instead.
pub fn lambda_star(
    lambda: &CoefficientSequence,
    r: f64,
    delta: f64,
) -> Result<CoefficientSequence> {
    if !(r > 0.0) {
        return Err(Error::Argument("r must be positive or infinite".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Argument("delta must be positive".into()));
    }
    let grid = *lambda.grid();
    let d = grid.dim();
    let mut out = CoefficientSequence::new(grid);
    for level in lambda.levels() {
        let per = cubes_per_axis(&grid, level) as i64;
        let count = (per as usize).pow(d as u32);
        let sources: Vec<(&Vec<i64>, f64)> = lambda
            .iter()
            .filter(|((j, _), _)| *j == level)
            .map(|((_, m), v)| (m, v.norm()))
            .collect();
        for flat in 0..count {
            let mut m = vec![0i64; d];
            let mut rest = flat;
            for axis in (0..d).rev() {
                m[axis] = (rest % per as usize) as i64;
                rest /= per as usize;
            }
            let mut acc = 0.0f64;
            let mut sup = 0.0f64;
            for (k, mag) in &sources {
                let mut sq = 0.0f64;
                for axis in 0..d {
                    let mut w = (k[axis] - m[axis]).rem_euclid(per);
                    if w > per / 2 {
                        w -= per;
                    }
                    sq += (w * w) as f64;
                }
                let damp = (1.0 + sq.sqrt()).powf(delta);
                if r.is_infinite() {
                    sup = sup.max(mag / damp);
                } else {
                    acc += mag.powf(r) / damp;
                }
            }
            let value = if r.is_infinite() { sup } else { acc.powf(1.0 / r) };
            if value > 0.0 {
                out.insert(level, m, Complex64::new(value, 0.0))?;
            }
        }
    }
    Ok(out)
}
