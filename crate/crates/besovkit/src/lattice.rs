//! Dyadic cube bookkeeping and sampled-field storage on a periodic torus.
//!
//! The computational domain is `[0, 2^m)^d` with periodic boundary, sampled
//! uniformly with spacing `h = 2^-n` (so `2^(m+n)` samples per axis). Dyadic
//! cubes `Q_{j,k} = 2^-j([0,1)^d + k)` with `-m <= j <= n` tile the domain
//! exactly in grid cells; indexing is row-major with the cube anchored at its
//! lower corner and membership half-open.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic sampling grid for `[0, 2^m)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    d: usize,
    m: u32,
    n: u32,
}

impl TorusGrid {
    pub fn new(d: usize, m: u32, n: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Argument("grid dimension d must be >= 1".into()));
        }
        if n == 0 {
            return Err(Error::Argument("resolution exponent n must be >= 1".into()));
        }
        if (m + n) as usize * d > 50 {
            return Err(Error::Argument(format!(
                "grid with 2^{} total samples is too large",
                (m + n) as usize * d
            )));
        }
        Ok(TorusGrid { d, m, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn domain_exponent(&self) -> u32 {
        self.m
    }

    pub fn resolution_exponent(&self) -> u32 {
        self.n
    }

    /// Number of samples along one axis, `2^(m+n)`.
    pub fn samples_per_axis(&self) -> usize {
        1usize << (self.m + self.n)
    }

    pub fn total_samples(&self) -> usize {
        self.samples_per_axis().pow(self.d as u32)
    }

    /// Sample spacing `h = 2^-n`.
    pub fn spacing(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }

    /// Domain side length `2^m`.
    pub fn extent(&self) -> f64 {
        (self.m as f64).exp2()
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Decompose a flat row-major sample index into per-axis coordinates.
    pub fn coords(&self, idx: usize) -> Vec<usize> {
        let per = self.samples_per_axis();
        let mut c = vec![0usize; self.d];
        let mut rest = idx;
        for axis in (0..self.d).rev() {
            c[axis] = rest % per;
            rest /= per;
        }
        c
    }

    /// Flatten per-axis coordinates into a row-major sample index.
    pub fn flat(&self, coords: &[usize]) -> usize {
        let per = self.samples_per_axis();
        let mut idx = 0usize;
        for &c in coords {
            debug_assert!(c < per);
            idx = idx * per + c;
        }
        idx
    }

    /// Per-axis displacement `delta` cells wrapped to the symmetric range,
    /// returned in length units.
    pub fn wrapped_cell_distance(&self, delta: i64) -> f64 {
        let per = self.samples_per_axis() as i64;
        let mut w = delta.rem_euclid(per);
        if w > per / 2 {
            w -= per;
        }
        w as f64 * self.spacing()
    }

    /// Euclidean torus distance between two flat sample indices.
    pub fn torus_distance(&self, a: usize, b: usize) -> f64 {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let mut acc = 0.0;
        for axis in 0..self.d {
            let w = self.wrapped_cell_distance(ca[axis] as i64 - cb[axis] as i64);
            acc += w * w;
        }
        acc.sqrt()
    }
}

/// A dyadic cube `Q_{j,k} = 2^-j([0,1)^d + k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub j: i32,
    pub k: Vec<i64>,
}

impl DyadicCube {
    pub fn new(j: i32, k: Vec<i64>) -> Self {
        DyadicCube { j, k }
    }

    /// Side length `l(Q) = 2^-j`.
    pub fn side(&self) -> f64 {
        (-(self.j as f64)).exp2()
    }

    /// Volume `|Q| = 2^-jd`.
    pub fn volume(&self, d: usize) -> f64 {
        self.side().powi(d as i32)
    }

    /// `j_Q = -log2 l(Q)`, exact by construction.
    pub fn level(&self) -> i32 {
        self.j
    }

    /// `j_Q v 0 = max(j, 0)`, the level at which norm sums start.
    pub fn level_or_zero(&self) -> i32 {
        self.j.max(0)
    }

    /// Lower corner coordinates `2^-j * k`.
    pub fn lower_corner(&self) -> Vec<f64> {
        self.k.iter().map(|&ki| ki as f64 * self.side()).collect()
    }

    /// Cells per axis this cube spans on `grid`.
    pub fn cells_per_axis(&self, grid: &TorusGrid) -> usize {
        1usize << (grid.resolution_exponent() as i64 - self.j as i64)
    }

    /// Lower-corner cell coordinates on `grid`.
    pub fn corner_cells(&self, grid: &TorusGrid) -> Vec<usize> {
        let w = self.cells_per_axis(grid);
        self.k.iter().map(|&ki| ki as usize * w).collect()
    }

    fn check_on_grid(&self, grid: &TorusGrid) -> Result<()> {
        if self.k.len() != grid.dim() {
            return Err(Error::Argument("cube offset dimension mismatch".into()));
        }
        if self.j < -(grid.domain_exponent() as i32) || self.j > grid.resolution_exponent() as i32 {
            return Err(Error::Argument(format!(
                "cube level {} outside [{}, {}]",
                self.j,
                -(grid.domain_exponent() as i32),
                grid.resolution_exponent()
            )));
        }
        let count = cubes_per_axis(grid, self.j);
        for &ki in &self.k {
            if ki < 0 || ki as usize >= count {
                return Err(Error::Argument(format!(
                    "cube offset {:?} outside domain at level {}",
                    self.k, self.j
                )));
            }
        }
        Ok(())
    }
}

/// Number of level-`j` cubes along one axis: `2^(j+m)`.
pub fn cubes_per_axis(grid: &TorusGrid, j: i32) -> usize {
    1usize << (j + grid.domain_exponent() as i32)
}

/// Total number of level-`j` cubes: `2^((j+m)d)`.
pub fn cubes_at_level_count(grid: &TorusGrid, j: i32) -> usize {
    cubes_per_axis(grid, j).pow(grid.dim() as u32)
}

/// Enumerate the level-`j` cubes tiling the domain, in row-major order of `k`.
pub fn cubes_at_level(grid: &TorusGrid, j: i32) -> Result<Vec<DyadicCube>> {
    if j < -(grid.domain_exponent() as i32) || j > grid.resolution_exponent() as i32 {
        return Err(Error::Argument(format!(
            "level {} outside [{}, {}]",
            j,
            -(grid.domain_exponent() as i32),
            grid.resolution_exponent()
        )));
    }
    let per = cubes_per_axis(grid, j);
    let total = cubes_at_level_count(grid, j);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut k = vec![0i64; grid.dim()];
        let mut rest = flat;
        for axis in (0..grid.dim()).rev() {
            k[axis] = (rest % per) as i64;
            rest /= per;
        }
        out.push(DyadicCube::new(j, k));
    }
    Ok(out)
}

/// Flat index of a cube among `cubes_at_level(grid, j)`.
pub fn cube_flat_index(grid: &TorusGrid, cube: &DyadicCube) -> usize {
    let per = cubes_per_axis(grid, cube.j);
    let mut idx = 0usize;
    for &ki in &cube.k {
        idx = idx * per + ki as usize;
    }
    idx
}

/// Complex samples on a [`TorusGrid`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.total_samples() {
            return Err(Error::Argument(format!(
                "field length {} does not match grid ({} samples)",
                values.len(),
                grid.total_samples()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Argument("field contains non-finite entries".into()));
        }
        Ok(SampledField { grid, values })
    }

    pub fn zero(grid: TorusGrid) -> Self {
        SampledField {
            values: vec![Complex64::new(0.0, 0.0); grid.total_samples()],
            grid,
        }
    }

    pub fn constant(grid: TorusGrid, c: Complex64) -> Self {
        SampledField {
            values: vec![c; grid.total_samples()],
            grid,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> SampledField {
        SampledField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &SampledField) -> Result<SampledField> {
        if self.grid != other.grid {
            return Err(Error::Argument("grid mismatch in field addition".into()));
        }
        Ok(SampledField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &SampledField) -> Result<SampledField> {
        Ok(self.add(&other.scale(Complex64::new(-1.0, 0.0)))?)
    }

    /// Iterator over flat sample indices inside `cube`.
    pub fn cube_cells<'a>(&'a self, cube: &DyadicCube) -> impl Iterator<Item = usize> + 'a {
        cube_cells(&self.grid, cube)
    }
}

/// Flat sample indices covered by `cube`, row-major within the cube.
pub fn cube_cells(grid: &TorusGrid, cube: &DyadicCube) -> impl Iterator<Item = usize> {
    let w = cube.cells_per_axis(grid);
    let corner = cube.corner_cells(grid);
    let d = grid.dim();
    let per = grid.samples_per_axis();
    let count = w.pow(d as u32);
    (0..count).map(move |local| {
        let mut rest = local;
        let mut idx = 0usize;
        for axis in 0..d {
            let shift = (d - 1 - axis) as u32;
            let c = (rest / w.pow(shift)) % w;
            rest %= w.pow(shift).max(1);
            idx = idx * per + corner[axis] + c;
        }
        idx
    })
}

/// Riemann-sum `L^p` norm of `f` over `Q`: `(h^d sum |f|^p)^(1/p)`.
pub fn integrate_p(f: &SampledField, cube: &DyadicCube, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Argument(format!("integration exponent p={p} must be positive and finite")));
    }
    cube.check_on_grid(f.grid())?;
    let mut acc = 0.0f64;
    for idx in cube_cells(f.grid(), cube) {
        acc += f.values()[idx].norm().powf(p);
    }
    Ok((acc * f.grid().cell_volume()).powf(1.0 / p))
}

/// Maximum of `|f|` over the samples in `Q`.
pub fn ell_infinity_on_cube(f: &SampledField, cube: &DyadicCube) -> Result<f64> {
    cube.check_on_grid(f.grid())?;
    let mut acc = 0.0f64;
    for idx in cube_cells(f.grid(), cube) {
        acc = acc.max(f.values()[idx].norm());
    }
    Ok(acc)
}

/// A level-indexed family `{g_j}` for `j = 0..=j_max` on a shared grid.
#[derive(Clone, Debug)]
pub struct FieldSequence {
    grid: TorusGrid,
    fields: Vec<SampledField>,
}

impl FieldSequence {
    pub fn new(grid: TorusGrid, fields: Vec<SampledField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Argument("field sequence must be nonempty".into()));
        }
        if fields.len() - 1 + 2 > grid.resolution_exponent() as usize {
            return Err(Error::Argument(format!(
                "sequence level count {} exceeds Nyquist headroom (j_max <= n-2 = {})",
                fields.len(),
                grid.resolution_exponent() as i64 - 2
            )));
        }
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::Argument("all fields must share the sequence grid".into()));
        }
        Ok(FieldSequence { grid, fields })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn j_max(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn fields(&self) -> &[SampledField] {
        &self.fields
    }

    pub fn field(&self, j: usize) -> &SampledField {
        &self.fields[j]
    }
}

/// Per-level sums of a nonnegative cell array over every dyadic cube.
///
/// Built once per scalar array; `sum(j, cube_index)` returns the plain sample
/// sum over that cube (multiply by `h^d` for the Riemann integral).
pub struct CubeSums {
    grid: TorusGrid,
    deepest: i32,
    /// per_level[i] holds sums at level `deepest - i`.
    per_level: Vec<Vec<f64>>,
}

impl CubeSums {
    /// Aggregate `cells` (one value per grid sample) over cubes at levels
    /// `-m ..= deepest`.
    pub fn build(grid: &TorusGrid, cells: &[f64], deepest: i32) -> CubeSums {
        assert_eq!(cells.len(), grid.total_samples());
        assert!(deepest <= grid.resolution_exponent() as i32);
        assert!(deepest >= -(grid.domain_exponent() as i32));
        let d = grid.dim();
        // Sum each deepest-level cube directly, then aggregate children.
        let count = cubes_at_level_count(grid, deepest);
        let per = cubes_per_axis(grid, deepest);
        let w = 1usize << (grid.resolution_exponent() as i32 - deepest);
        let mut level = vec![0.0f64; count];
        for (idx, &v) in cells.iter().enumerate() {
            let coords = grid.coords(idx);
            let mut c = 0usize;
            for axis in 0..d {
                c = c * per + coords[axis] / w;
            }
            level[c] += v;
        }
        let mut per_level = vec![level];
        let mut j = deepest;
        while j > -(grid.domain_exponent() as i32) {
            let child = per_level.last().unwrap();
            let cper = cubes_per_axis(grid, j);
            let pper = cubes_per_axis(grid, j - 1);
            let pcount = pper.pow(d as u32);
            let mut parent = vec![0.0f64; pcount];
            for (cidx, &v) in child.iter().enumerate() {
                // parent index: halve each axis coordinate
                let mut rest = cidx;
                let mut coords = vec![0usize; d];
                for axis in (0..d).rev() {
                    coords[axis] = rest % cper;
                    rest /= cper;
                }
                let mut pidx = 0usize;
                for axis in 0..d {
                    pidx = pidx * pper + coords[axis] / 2;
                }
                parent[pidx] += v;
            }
            per_level.push(parent);
            j -= 1;
        }
        CubeSums {
            grid: *grid,
            deepest,
            per_level,
        }
    }

    /// Sample sum over the cube with flat index `cube` at level `j`.
    pub fn sum(&self, j: i32, cube: usize) -> f64 {
        let i = (self.deepest - j) as usize;
        self.per_level[i][cube]
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn deepest(&self) -> i32 {
        self.deepest
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, m: u32, n: u32) -> TorusGrid {
        TorusGrid::new(d, m, n).unwrap()
    }

    #[test]
    fn cube_counts_tile_domain() {
        let g = grid(1, 0, 4);
        assert_eq!(cubes_at_level(&g, 0).unwrap().len(), 1);
        let g = grid(1, 2, 4);
        assert_eq!(cubes_at_level(&g, -2).unwrap().len(), 1);
        let g = grid(2, 0, 4);
        assert_eq!(cubes_at_level(&g, 1).unwrap().len(), 4);
        assert!(cubes_at_level(&g, 5).is_err());
    }

    #[test]
    fn cube_identities() {
        let q = DyadicCube::new(3, vec![5]);
        assert_eq!(q.side(), 0.125);
        assert_eq!(q.volume(1), 0.125);
        assert_eq!(q.level(), 3);
        assert_eq!(q.level_or_zero(), 3);
        assert_eq!(DyadicCube::new(-2, vec![0]).level_or_zero(), 0);
        assert_eq!(q.lower_corner(), vec![0.625]);
    }

    #[test]
    fn cube_cells_are_disjoint_cover() {
        let g = grid(2, 1, 3);
        for j in [-1i32, 0, 2] {
            let mut seen = vec![false; g.total_samples()];
            for cube in cubes_at_level(&g, j).unwrap() {
                for idx in cube_cells(&g, &cube) {
                    assert!(!seen[idx], "cell {idx} covered twice at level {j}");
                    seen[idx] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "level {j} does not tile");
        }
    }

    #[test]
    fn integrate_constant_field() {
        let g = grid(1, 0, 4);
        let f = SampledField::constant(g, Complex64::new(-3.0, 0.0));
        let q = DyadicCube::new(2, vec![1]);
        // |c| * l^(d/p) with c=3, l=1/4, p=2
        let got = integrate_p(&f, &q, 2.0).unwrap();
        assert!((got - 3.0 * 0.25f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn integrate_single_cell_indicator() {
        let g = grid(1, 0, 4);
        let mut f = SampledField::zero(g);
        f.values_mut()[5] = Complex64::new(1.0, 0.0);
        let q = DyadicCube::new(0, vec![0]);
        let h = g.spacing();
        let got = integrate_p(&f, &q, 2.0).unwrap();
        assert!((got - h.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn integrate_matches_loop_oracle() {
        let g = grid(2, 0, 3);
        let mut f = SampledField::zero(g);
        for (i, v) in f.values_mut().iter_mut().enumerate() {
            *v = Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        }
        let q = DyadicCube::new(1, vec![1, 0]);
        let p = 1.7;
        // oracle: scan every sample, test membership by coordinates
        let w = q.cells_per_axis(&g);
        let corner = q.corner_cells(&g);
        let mut acc = 0.0;
        for idx in 0..g.total_samples() {
            let c = g.coords(idx);
            if (0..2).all(|a| c[a] >= corner[a] && c[a] < corner[a] + w) {
                acc += f.values()[idx].norm().powf(p);
            }
        }
        let oracle = (acc * g.cell_volume()).powf(1.0 / p);
        let got = integrate_p(&f, &q, p).unwrap();
        assert!((got - oracle).abs() <= 1e-13 * oracle.abs());
    }

    #[test]
    fn ell_infinity_basics() {
        let g = grid(1, 0, 4);
        let f = SampledField::constant(g, Complex64::new(0.0, -2.0));
        let q = DyadicCube::new(1, vec![1]);
        assert_eq!(ell_infinity_on_cube(&f, &q).unwrap(), 2.0);
        let mut f = SampledField::zero(g);
        f.values_mut()[9] = Complex64::new(0.0, 4.0);
        assert_eq!(ell_infinity_on_cube(&f, &DyadicCube::new(0, vec![0])).unwrap(), 4.0);
    }

    #[test]
    fn tiling_partition_of_integral() {
        let g = grid(1, 1, 4);
        let mut f = SampledField::zero(g);
        for (i, v) in f.values_mut().iter_mut().enumerate() {
            *v = Complex64::new((i as f64).sqrt(), -(i as f64 * 0.13).sin());
        }
        let p = 2.3;
        let whole = DyadicCube::new(-1, vec![0]);
        let total = integrate_p(&f, &whole, p).unwrap().powf(p);
        for j in -1..=4 {
            let mut acc = 0.0;
            for cube in cubes_at_level(&g, j).unwrap() {
                acc += integrate_p(&f, &cube, p).unwrap().powf(p);
            }
            assert!((acc - total).abs() <= 1e-12 * total);
        }
    }

    #[test]
    fn nesting_each_child_in_one_parent() {
        let g = grid(2, 0, 3);
        for j in 0..3 {
            let parents = cubes_at_level(&g, j).unwrap();
            for child in cubes_at_level(&g, j + 1).unwrap() {
                let owners = parents
                    .iter()
                    .filter(|p| {
                        child
                            .k
                            .iter()
                            .zip(&p.k)
                            .all(|(&ck, &pk)| ck >> 1 == pk)
                    })
                    .count();
                assert_eq!(owners, 1);
            }
        }
    }

    #[test]
    fn homogeneity_of_integrate_p() {
        let g = grid(1, 0, 5);
        let mut f = SampledField::zero(g);
        for (i, v) in f.values_mut().iter_mut().enumerate() {
            *v = Complex64::new((i as f64 * 0.3).cos(), 0.2);
        }
        let scaled = f.scale(Complex64::new(-2.5, 0.0));
        let q = DyadicCube::new(2, vec![3]);
        let a = integrate_p(&f, &q, 0.8).unwrap();
        let b = integrate_p(&scaled, &q, 0.8).unwrap();
        assert!((b - 2.5 * a).abs() <= 1e-13 * b.abs());
    }

    #[test]
    fn cube_sums_match_direct() {
        let g = grid(2, 1, 3);
        let cells: Vec<f64> = (0..g.total_samples()).map(|i| (i as f64 * 0.7).sin().abs()).collect();
        let sums = CubeSums::build(&g, &cells, 2);
        for j in -1..=2 {
            for cube in cubes_at_level(&g, j).unwrap() {
                let direct: f64 = cube_cells(&g, &cube).map(|i| cells[i]).sum();
                let fast = sums.sum(j, cube_flat_index(&g, &cube));
                assert!((direct - fast).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn field_sequence_invariants() {
        let g = grid(1, 0, 5);
        let fields = vec![SampledField::zero(g); 4];
        assert!(FieldSequence::new(g, fields).is_ok());
        let fields = vec![SampledField::zero(g); 5];
        assert!(FieldSequence::new(g, fields).is_err());
    }
}
