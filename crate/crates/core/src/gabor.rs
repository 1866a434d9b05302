//! Discrete STFT and Gabor analysis, synthesis and frame operators on
//! separable lattices `a Z_N x b Z_N`.
//!
//! Normalization: the STFT carries `N^{-1/2}` (`N` the total number of
//! cells), analysis samples it on the lattice, and synthesis is the plain sum
//! `D c = sum c(j, k) M_{bk} T_{aj} psi`. Hence
//! `<D_phi c, g> = sqrt(N) <c, C_phi g>` (see [`adjoint_scale`]) and the
//! frame operator `S_{phi,psi} = D_psi C_phi` is the identity for a
//! canonical dual pair.
//!
//! The frame operator of a separable lattice only couples cells that agree
//! modulo `L = N / b`, so it splits into `prod L_i` independent Hermitian
//! blocks of size `prod b_i`. Exact frame bounds, the canonical dual and the
//! canonical tight window are computed from these blocks; the conjugate
//! gradient solver and the power iteration work with the operator alone.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, fft_nd, GridSpec, PhaseSpaceSignal, SignalNd};

/// Default threshold below which the lower frame bound counts as zero.
pub const DEFAULT_FRAME_TOL: f64 = 1e-10;

/// `sqrt(N)`: the factor in `<D_phi c, g> = sqrt(N) <c, C_phi g>`.
pub fn adjoint_scale(grid: &GridSpec) -> f64 {
    (grid.len() as f64).sqrt()
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Short-time Fourier transform
/// `V_phi f(x, xi) = N^{-1/2} sum_y f(y) conj(phi(y - x)) e^{-2 pi i <y, xi>/N}`.
pub fn stft(f: &SignalNd, phi: &SignalNd) -> Result<PhaseSpaceSignal> {
    f.ensure_same_grid(phi)?;
    let grid = &f.grid;
    let n = grid.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut data = vec![zero(); n * n];
    let mut column = vec![zero(); n];
    for x in 0..n {
        let xi = grid.unravel(x);
        for (y, slot) in column.iter_mut().enumerate() {
            *slot = f.data[y] * phi.data[shifted_index(grid, y, &xi, false)].conj();
        }
        fft_nd(&mut column, &grid.n, FftDirection::Forward);
        for (dst, v) in data[x * n..(x + 1) * n].iter_mut().zip(&column) {
            *dst = v * scale;
        }
    }
    PhaseSpaceSignal::new(grid.clone(), data)
}

/// Flat index of `y - x` (or `y + x` when `add`) on the torus.
fn shifted_index(grid: &GridSpec, y: usize, x: &[usize], add: bool) -> usize {
    let yi = grid.unravel(y);
    let idx: Vec<usize> = yi
        .iter()
        .zip(x)
        .zip(&grid.n)
        .map(|((&a, &b), &n)| if add { (a + b) % n } else { (a + n - b % n) % n })
        .collect();
    grid.ravel(&idx)
}

/// Separable lattice `a Z_N x b Z_N` given by per-axis steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl LatticeSpec {
    pub fn new(a: &[usize], b: &[usize]) -> Self {
        LatticeSpec {
            a: a.to_vec(),
            b: b.to_vec(),
        }
    }

    pub fn uniform(a: usize, b: usize, d: usize) -> Self {
        LatticeSpec {
            a: vec![a; d],
            b: vec![b; d],
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let d = grid.dim();
        for v in [&self.a, &self.b] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        for (axis, ((&a, &b), &n)) in self.a.iter().zip(&self.b).zip(&grid.n).enumerate() {
            for step in [a, b] {
                if step == 0 || n % step != 0 {
                    return Err(Error::Divisibility { axis, step, len: n });
                }
            }
        }
        Ok(())
    }

    /// `prod N_i / (a_i b_i)`: coefficients per signal sample.
    pub fn redundancy(&self, grid: &GridSpec) -> f64 {
        grid.n
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(&n, (&a, &b))| n as f64 / (a * b) as f64)
            .product()
    }

    /// Number of time positions per axis, `N / a`.
    pub fn time_shape(&self, grid: &GridSpec) -> Vec<usize> {
        grid.n.iter().zip(&self.a).map(|(n, a)| n / a).collect()
    }

    /// Number of frequency positions per axis, `N / b`.
    pub fn freq_shape(&self, grid: &GridSpec) -> Vec<usize> {
        grid.n.iter().zip(&self.b).map(|(n, b)| n / b).collect()
    }

    /// Is the phase-space shift `(u, eta)` (in cells) a lattice point?
    pub fn contains(&self, u: &[i64], eta: &[i64]) -> bool {
        u.iter().zip(&self.a).all(|(&u, &a)| u.rem_euclid(a as i64) == 0)
            && eta.iter().zip(&self.b).all(|(&e, &b)| e.rem_euclid(b as i64) == 0)
    }
}

/// Coefficients indexed by `(j, k)`, time index first.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborCoeffs {
    pub lattice: LatticeSpec,
    pub time_shape: Vec<usize>,
    pub freq_shape: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl GaborCoeffs {
    pub fn zeros(grid: &GridSpec, lattice: &LatticeSpec) -> Result<Self> {
        lattice.validate(grid)?;
        let time_shape = lattice.time_shape(grid);
        let freq_shape = lattice.freq_shape(grid);
        let len = time_shape.iter().product::<usize>() * freq_shape.iter().product::<usize>();
        Ok(GaborCoeffs {
            lattice: lattice.clone(),
            time_shape,
            freq_shape,
            data: vec![zero(); len],
        })
    }

    fn flat(&self, j: &[usize], k: &[usize]) -> usize {
        let nk: usize = self.freq_shape.iter().product();
        grid::ravel(&self.time_shape, j) * nk + grid::ravel(&self.freq_shape, k)
    }

    pub fn at(&self, j: &[usize], k: &[usize]) -> Complex64 {
        self.data[self.flat(j, k)]
    }

    pub fn set(&mut self, j: &[usize], k: &[usize], v: Complex64) {
        let i = self.flat(j, k);
        self.data[i] = v;
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sum c conj(other)`.
    pub fn inner(&self, other: &GaborCoeffs) -> Complex64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Window, lattice and optionally a dual window with cached frame bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemRecord", into = "SystemRecord")]
pub struct GaborSystem {
    pub window: SignalNd,
    pub lattice: LatticeSpec,
    pub dual: Option<SignalNd>,
    pub frame_bounds: Option<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct SystemRecord {
    grid: GridSpec,
    window: Vec<Complex64>,
    lattice: LatticeSpec,
    #[serde(default)]
    dual: Option<Vec<Complex64>>,
    #[serde(default)]
    frame_bounds: Option<(f64, f64)>,
}

impl From<GaborSystem> for SystemRecord {
    fn from(s: GaborSystem) -> Self {
        SystemRecord {
            grid: s.window.grid.clone(),
            window: s.window.data,
            lattice: s.lattice,
            dual: s.dual.map(|d| d.data),
            frame_bounds: s.frame_bounds,
        }
    }
}

impl TryFrom<SystemRecord> for GaborSystem {
    type Error = Error;

    fn try_from(r: SystemRecord) -> Result<Self> {
        let window = SignalNd::new(r.grid.clone(), r.window)?;
        let mut sys = GaborSystem::new(window, r.lattice)?;
        if let Some(d) = r.dual {
            sys.dual = Some(SignalNd::new(r.grid, d)?);
        }
        if let Some((a, b)) = r.frame_bounds {
            if !(a > 0.0 && a <= b && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("frame bounds ({a}, {b})")));
            }
            sys.frame_bounds = Some((a, b));
        }
        Ok(sys)
    }
}

/// Which window a synthesis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Window,
    Dual,
}

impl GaborSystem {
    pub fn new(window: SignalNd, lattice: LatticeSpec) -> Result<Self> {
        lattice.validate(&window.grid)?;
        if window.norm_l2() == 0.0 {
            return Err(Error::InvalidParameter("window is identically zero".into()));
        }
        Ok(GaborSystem {
            window,
            lattice,
            dual: None,
            frame_bounds: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.window.grid
    }

    pub fn redundancy(&self) -> f64 {
        self.lattice.redundancy(self.grid())
    }

    /// Computes frame bounds and the canonical dual (direct block solve).
    pub fn with_canonical_dual(mut self) -> Result<Self> {
        let (a, b) = frame_bounds(&self)?;
        if a <= DEFAULT_FRAME_TOL {
            return Err(Error::NotAFrame {
                lower: a,
                tol: DEFAULT_FRAME_TOL,
            });
        }
        self.frame_bounds = Some((a, b));
        self.dual = Some(canonical_dual_direct(&self)?);
        Ok(self)
    }

    pub fn dual_window(&self) -> Result<&SignalNd> {
        self.dual.as_ref().ok_or(Error::MissingDual)
    }

    fn pick(&self, which: Which) -> Result<&SignalNd> {
        match which {
            Which::Window => Ok(&self.window),
            Which::Dual => self.dual_window(),
        }
    }
}

/// `c(j, k) = V_phi f(a j, b k)`.
pub fn analysis(f: &SignalNd, sys: &GaborSystem) -> Result<GaborCoeffs> {
    analysis_with(f, &sys.window, &sys.lattice)
}

/// Analysis with an arbitrary window.
pub fn analysis_with(f: &SignalNd, phi: &SignalNd, lattice: &LatticeSpec) -> Result<GaborCoeffs> {
    f.ensure_same_grid(phi)?;
    let grid = &f.grid;
    let mut out = GaborCoeffs::zeros(grid, lattice)?;
    let fshape = out.freq_shape.clone();
    let nk: usize = fshape.iter().product();
    let scale = 1.0 / (grid.len() as f64).sqrt();
    let mut folded = vec![zero(); nk];
    for jf in 0..out.time_shape.iter().product() {
        let x: Vec<usize> = grid::unravel(&out.time_shape, jf)
            .iter()
            .zip(&lattice.a)
            .map(|(j, a)| j * a)
            .collect();
        folded.iter_mut().for_each(|z| *z = zero());
        // Fold f(y) conj(phi(y - x)) modulo L; the length-L DFT of the fold
        // samples the full DFT at multiples of b.
        for y in 0..grid.len() {
            let v = f.data[y] * phi.data[shifted_index(grid, y, &x, false)].conj();
            let r: Vec<usize> = grid.unravel(y).iter().zip(&fshape).map(|(a, l)| a % l).collect();
            folded[grid::ravel(&fshape, &r)] += v;
        }
        fft_nd(&mut folded, &fshape, FftDirection::Forward);
        for (dst, v) in out.data[jf * nk..(jf + 1) * nk].iter_mut().zip(&folded) {
            *dst = v * scale;
        }
    }
    Ok(out)
}

/// `D c = sum_{j,k} c(j, k) M_{bk} T_{aj} w` with `w` the window or dual.
pub fn synthesis(c: &GaborCoeffs, sys: &GaborSystem, which: Which) -> Result<SignalNd> {
    synthesis_with(c, sys.pick(which)?, &sys.lattice)
}

/// Synthesis with an arbitrary window.
pub fn synthesis_with(c: &GaborCoeffs, psi: &SignalNd, lattice: &LatticeSpec) -> Result<SignalNd> {
    if &c.lattice != lattice {
        return Err(Error::ShapeMismatch(format!(
            "coefficients on lattice {:?}, system on {:?}",
            c.lattice, lattice
        )));
    }
    let grid = &psi.grid;
    lattice.validate(grid)?;
    if c.time_shape != lattice.time_shape(grid) || c.freq_shape != lattice.freq_shape(grid) {
        return Err(Error::ShapeMismatch("coefficients do not fit the grid".into()));
    }
    let fshape = &c.freq_shape;
    let nk: usize = fshape.iter().product();
    let mut out = SignalNd::zeros(grid);
    let mut h = vec![zero(); nk];
    for jf in 0..c.time_shape.iter().product() {
        let row = &c.data[jf * nk..(jf + 1) * nk];
        if row.iter().all(|z| *z == zero()) {
            continue;
        }
        h.copy_from_slice(row);
        fft_nd(&mut h, fshape, FftDirection::Inverse);
        let x: Vec<usize> = grid::unravel(&c.time_shape, jf)
            .iter()
            .zip(&lattice.a)
            .map(|(j, a)| j * a)
            .collect();
        for y in 0..grid.len() {
            let r: Vec<usize> = grid.unravel(y).iter().zip(fshape).map(|(a, l)| a % l).collect();
            out.data[y] += psi.data[shifted_index(grid, y, &x, false)] * h[grid::ravel(fshape, &r)];
        }
    }
    Ok(out)
}

/// `S_{phi,phi} f = D_phi C_phi f`.
pub fn frame_operator_apply(f: &SignalNd, sys: &GaborSystem) -> Result<SignalNd> {
    frame_operator_pair(f, &sys.window, &sys.window, &sys.lattice)
}

/// `S_{phi,psi} f = D_psi C_phi f`.
pub fn frame_operator_pair(f: &SignalNd, phi: &SignalNd, psi: &SignalNd, lattice: &LatticeSpec) -> Result<SignalNd> {
    synthesis_with(&analysis_with(f, phi, lattice)?, psi, lattice)
}

/// Nonzero part of `S_{phi,psi}`: one dense block per residue class modulo
/// `L = N / b`.
#[derive(Debug, Clone)]
pub struct WalnutBlocks {
    /// `members[r]` are the flat cells congruent to residue `r`.
    pub members: Vec<Vec<usize>>,
    pub blocks: Vec<DMatrix<Complex64>>,
}

/// `S(m, n) = N^{-1/2} prod(L) sum_j psi(m - a j) conj(phi(n - a j))` for
/// `m = n mod L`, and zero otherwise.
pub fn walnut_blocks(phi: &SignalNd, psi: &SignalNd, lattice: &LatticeSpec) -> Result<WalnutBlocks> {
    phi.ensure_same_grid(psi)?;
    let grid = &phi.grid;
    lattice.validate(grid)?;
    let l_shape = lattice.freq_shape(grid);
    let t_shape = lattice.time_shape(grid);
    let l_total: usize = l_shape.iter().product();
    let scale = l_total as f64 / (grid.len() as f64).sqrt();
    let shifts: Vec<Vec<usize>> = (0..t_shape.iter().product())
        .map(|j| grid::unravel(&t_shape, j).iter().zip(&lattice.a).map(|(j, a)| j * a).collect())
        .collect();
    let mut members = Vec::with_capacity(l_total);
    let mut blocks = Vec::with_capacity(l_total);
    for r in 0..l_total {
        let ri = grid::unravel(&l_shape, r);
        let cells: Vec<usize> = (0..lattice.b.iter().product())
            .map(|t| {
                let ti = grid::unravel(&lattice.b, t);
                let idx: Vec<usize> = ri.iter().zip(&ti).zip(&l_shape).map(|((r, t), l)| r + t * l).collect();
                grid.ravel(&idx)
            })
            .collect();
        let m = cells.len();
        let mut block = DMatrix::from_element(m, m, zero());
        for x in &shifts {
            let left: Vec<Complex64> = cells.iter().map(|&c| psi.data[shifted_index(grid, c, x, false)]).collect();
            let right: Vec<Complex64> = cells.iter().map(|&c| phi.data[shifted_index(grid, c, x, false)].conj()).collect();
            for s in 0..m {
                for t in 0..m {
                    block[(s, t)] += left[s] * right[t];
                }
            }
        }
        block *= Complex64::new(scale, 0.0);
        members.push(cells);
        blocks.push(block);
    }
    Ok(WalnutBlocks { members, blocks })
}

impl WalnutBlocks {
    /// Apply `g(S)` for a Hermitian `S` through the eigendecomposition of
    /// every block.
    fn apply_spectral(&self, f: &SignalNd, g: impl Fn(f64) -> Result<f64>) -> Result<SignalNd> {
        let mut out = SignalNd::zeros(&f.grid);
        for (cells, block) in self.members.iter().zip(&self.blocks) {
            let eig = block.clone().symmetric_eigen();
            let v = nalgebra::DVector::from_iterator(cells.len(), cells.iter().map(|&c| f.data[c]));
            let mut coeffs = eig.eigenvectors.adjoint() * v;
            for (c, &lam) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
                *c *= g(lam)?;
            }
            let w = &eig.eigenvectors * coeffs;
            for (&c, z) in cells.iter().zip(w.iter()) {
                out.data[c] = *z;
            }
        }
        Ok(out)
    }

    fn apply(&self, f: &SignalNd) -> SignalNd {
        let mut out = SignalNd::zeros(&f.grid);
        for (cells, block) in self.members.iter().zip(&self.blocks) {
            let v = nalgebra::DVector::from_iterator(cells.len(), cells.iter().map(|&c| f.data[c]));
            let w = block * v;
            for (&c, z) in cells.iter().zip(w.iter()) {
                out.data[c] = *z;
            }
        }
        out
    }

    /// Extreme eigenvalues over all blocks (blocks must be Hermitian).
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for block in &self.blocks {
            for &lam in block.clone().symmetric_eigenvalues().iter() {
                lo = lo.min(lam);
                hi = hi.max(lam);
            }
        }
        (lo, hi)
    }
}

/// `(A, B) = (lambda_min, lambda_max)` of `S_{phi,phi}`, exact up to
/// rounding. `A` may be (numerically) zero when the system is no frame.
pub fn frame_bounds(sys: &GaborSystem) -> Result<(f64, f64)> {
    let blocks = walnut_blocks(&sys.window, &sys.window, &sys.lattice)?;
    let (lo, hi) = blocks.spectrum_bounds();
    Ok((lo.max(0.0), hi))
}

/// Whether the system is a frame by the rule `redundancy >= 1` and
/// `A > tol`.
pub fn is_frame(sys: &GaborSystem, tol: f64) -> Result<bool> {
    Ok(sys.redundancy() >= 1.0 - 1e-12 && frame_bounds(sys)?.0 > tol)
}

/// Outcome of an iterative eigenvalue or linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeBounds {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn normalize(f: &SignalNd) -> SignalNd {
    let n = f.norm_l2();
    f.scale(Complex64::new(1.0 / n, 0.0))
}

/// Power iteration for the largest eigenvalue of a Hermitian PSD operator.
/// Returns `(lambda, iterations, residual)`.
fn power_iteration(
    start: &SignalNd,
    apply: impl Fn(&SignalNd) -> Result<SignalNd>,
    tol: f64,
    max_iter: usize,
    solver: &'static str,
) -> Result<(f64, usize, f64)> {
    let mut x = normalize(start);
    let mut lam = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = apply(&x)?;
        lam = x.inner(&y).re;
        residual = y.sub(&x.scale(Complex64::new(lam, 0.0))).norm_l2();
        if residual <= tol * lam.abs().max(f64::MIN_POSITIVE) {
            return Ok((lam, it, residual));
        }
        let ny = y.norm_l2();
        if ny == 0.0 {
            return Ok((0.0, it, 0.0));
        }
        x = y.scale(Complex64::new(1.0 / ny, 0.0));
    }
    Err(Error::NoConvergence {
        solver,
        iterations: max_iter,
        residual: residual.max(lam * 0.0),
    })
}

/// Frame bounds from the operator alone: power iteration for `B`, then power
/// iteration on `B I - S` for `B - A`. Matches [`frame_bounds`] for
/// systems where the block form is not wanted.
pub fn frame_bounds_iterative(sys: &GaborSystem, seed: u64, tol: f64, max_iter: usize) -> Result<IterativeBounds> {
    let mut rng = crate::rng::seeded(seed);
    let start = SignalNd {
        grid: sys.grid().clone(),
        data: crate::rng::complex_vec(&mut rng, sys.grid().len()),
    };
    let s = |f: &SignalNd| frame_operator_apply(f, sys);
    let (upper, it1, r1) = power_iteration(&start, s, tol, max_iter, "power iteration")?;
    let shifted = |f: &SignalNd| -> Result<SignalNd> {
        Ok(f.scale(Complex64::new(upper, 0.0)).sub(&frame_operator_apply(f, sys)?))
    };
    let (gap, it2, r2) = power_iteration(&start, shifted, tol, max_iter, "inverse-spectrum power iteration")?;
    Ok(IterativeBounds {
        lower: (upper - gap).max(0.0),
        upper,
        iterations: it1 + it2,
        residual: r1.max(r2),
    })
}

/// Result of a canonical-dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub dual: SignalNd,
    pub iterations: usize,
    /// `||S psi - phi|| / ||phi||`.
    pub residual: f64,
}

/// Canonical dual `psi = S^{-1} phi` by conjugate gradients on the positive
/// definite frame operator.
pub fn canonical_dual(sys: &GaborSystem, tol: f64, max_iter: usize) -> Result<DualSolution> {
    if sys.redundancy() < 1.0 - 1e-12 {
        return Err(Error::NotAFrame {
            lower: 0.0,
            tol: DEFAULT_FRAME_TOL,
        });
    }
    let phi = &sys.window;
    let rhs_norm = phi.norm_l2();
    let mut x = SignalNd::zeros(sys.grid());
    let mut r = phi.clone();
    let mut p = r.clone();
    let mut rr = r.norm_l2().powi(2);
    for it in 1..=max_iter {
        let sp = frame_operator_apply(&p, sys)?;
        let curv = p.inner(&sp).re;
        if curv <= 0.0 {
            return Err(Error::NotAFrame {
                lower: curv / p.norm_l2().powi(2),
                tol: DEFAULT_FRAME_TOL,
            });
        }
        let alpha = rr / curv;
        x = x.add(&p.scale(Complex64::new(alpha, 0.0)));
        r = r.sub(&sp.scale(Complex64::new(alpha, 0.0)));
        let rr_new = r.norm_l2().powi(2);
        if rr_new.sqrt() <= tol * rhs_norm {
            // report the true residual, not the recursively updated one
            let residual = frame_operator_apply(&x, sys)?.sub(phi).norm_l2() / rhs_norm;
            if residual <= tol {
                return Ok(DualSolution {
                    dual: x,
                    iterations: it,
                    residual,
                });
            }
            r = phi.sub(&frame_operator_apply(&x, sys)?);
            p = r.clone();
            rr = r.norm_l2().powi(2);
            continue;
        }
        p = r.add(&p.scale(Complex64::new(rr_new / rr, 0.0)));
        rr = rr_new;
    }
    let residual = frame_operator_apply(&x, sys)?.sub(phi).norm_l2() / rhs_norm;
    Err(Error::NoConvergence {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual,
    })
}

fn frame_blocks_checked(sys: &GaborSystem) -> Result<WalnutBlocks> {
    let blocks = walnut_blocks(&sys.window, &sys.window, &sys.lattice)?;
    let (lo, _) = blocks.spectrum_bounds();
    if lo <= DEFAULT_FRAME_TOL {
        return Err(Error::NotAFrame {
            lower: lo,
            tol: DEFAULT_FRAME_TOL,
        });
    }
    Ok(blocks)
}

/// Canonical dual by exact block inversion.
pub fn canonical_dual_direct(sys: &GaborSystem) -> Result<SignalNd> {
    let blocks = frame_blocks_checked(sys)?;
    blocks.apply_spectral(&sys.window, |lam| Ok(1.0 / lam))
}

/// Canonical tight window `S^{-1/2} phi`; the system it generates has
/// `S = Id`.
pub fn canonical_tight_window(sys: &GaborSystem) -> Result<SignalNd> {
    let blocks = frame_blocks_checked(sys)?;
    blocks.apply_spectral(&sys.window, |lam| Ok(1.0 / lam.sqrt()))
}

/// Apply `S_{phi,phi}` through its block form.
pub fn frame_operator_blocks_apply(f: &SignalNd, sys: &GaborSystem) -> Result<SignalNd> {
    f.ensure_same_grid(&sys.window)?;
    Ok(walnut_blocks(&sys.window, &sys.window, &sys.lattice)?.apply(f))
}

/// Both Gabor expansions of `f` and their worst relative residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// `D_psi C_phi f`.
    pub via_dual: SignalNd,
    /// `D_phi C_psi f`.
    pub via_window: SignalNd,
    pub residual: f64,
}

pub fn reconstruct(f: &SignalNd, sys: &GaborSystem) -> Result<Reconstruction> {
    let psi = sys.dual_window()?;
    let via_dual = frame_operator_pair(f, &sys.window, psi, &sys.lattice)?;
    let via_window = frame_operator_pair(f, psi, &sys.window, &sys.lattice)?;
    let norm = f.norm_l2();
    let rel = |g: &SignalNd| {
        let e = g.sub(f).norm_l2();
        if norm == 0.0 {
            e
        } else {
            e / norm
        }
    };
    let residual = rel(&via_dual).max(rel(&via_window));
    Ok(Reconstruction {
        via_dual,
        via_window,
        residual,
    })
}

/// `||S pi(u, eta) f - pi(u, eta) S f|| / ||f||` for a lattice point
/// `(u, eta)` given in cells.
pub fn frame_op_covariance_residual(sys: &GaborSystem, f: &SignalNd, u: &[i64], eta: &[i64]) -> Result<f64> {
    if !sys.lattice.contains(u, eta) {
        return Err(Error::OffLattice(format!("{u:?}, {eta:?}")));
    }
    covariance_residual_any_shift(sys, f, u, eta)
}

/// Same as [`frame_op_covariance_residual`] without the lattice check, for
/// demonstrating that covariance fails off the lattice.
#[doc(hidden)]
pub fn covariance_residual_any_shift(sys: &GaborSystem, f: &SignalNd, u: &[i64], eta: &[i64]) -> Result<f64> {
    let lhs = frame_operator_apply(&grid::tf_shift(f, u, eta)?, sys)?;
    let rhs = grid::tf_shift(&frame_operator_apply(f, sys)?, u, eta)?;
    let norm = f.norm_l2();
    let e = lhs.sub(&rhs).norm_l2();
    Ok(if norm == 0.0 { e } else { e / norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{standard_signal, tf_shift, SignalKind};
    use crate::rng;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(&[n]).unwrap()
    }

    fn random(grid: &GridSpec, seed: u64) -> SignalNd {
        standard_signal(grid, &SignalKind::Random { seed }).unwrap()
    }

    fn gaussian(grid: &GridSpec) -> SignalNd {
        normalize(&standard_signal(grid, &SignalKind::Gaussian { width: None }).unwrap())
    }

    fn system(n: usize, a: usize, b: usize) -> GaborSystem {
        let g = grid1(n);
        GaborSystem::new(gaussian(&g), LatticeSpec::uniform(a, b, 1)).unwrap()
    }

    /// Direct triple sum, independent of the FFT path.
    fn stft_oracle(f: &SignalNd, phi: &SignalNd) -> Vec<Complex64> {
        let g = &f.grid;
        let n = g.len();
        let mut out = Vec::with_capacity(n * n);
        for x in 0..n {
            let xi = g.unravel(x);
            for xi_f in 0..n {
                let k = g.unravel(xi_f);
                let mut acc = zero();
                for y in 0..n {
                    let yi = g.unravel(y);
                    let m: Vec<usize> = yi.iter().zip(&xi).zip(&g.n).map(|((a, b), n)| (a + n - b) % n).collect();
                    let ch = grid::character(&yi, &k, &g.n).conj();
                    acc += f.data[y] * phi.data[g.ravel(&m)].conj() * ch;
                }
                out.push(acc / (n as f64).sqrt());
            }
        }
        out
    }

    #[test]
    fn stft_matches_direct_sum() {
        let g = GridSpec::new(&[4, 6]).unwrap();
        let f = random(&g, 1);
        let phi = random(&g, 2);
        let v = stft(&f, &phi).unwrap();
        for (a, b) in v.data.iter().zip(stft_oracle(&f, &phi)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn moyal() {
        for n in [16, 64, 128] {
            let g = grid1(n);
            let f = random(&g, n as u64);
            let phi = random(&g, 7 * n as u64);
            let v = stft(&f, &phi).unwrap();
            let expected = f.norm_l2() * phi.norm_l2();
            assert!((v.norm_l2() - expected).abs() < 1e-10 * expected);
        }
        let g = grid1(64);
        let f = random(&g, 3);
        let v = stft(&f, &gaussian(&g)).unwrap();
        assert!((v.norm_l2() - f.norm_l2()).abs() < 1e-10 * f.norm_l2());
    }

    #[test]
    fn stft_origin_value() {
        let g = GridSpec::new(&[8, 4]).unwrap();
        let phi = random(&g, 5);
        let v = stft(&phi, &phi).unwrap();
        let z = v.at(&[0, 0], &[0, 0]);
        assert!(z.im.abs() < 1e-14);
        assert!((z.re - phi.norm_l2().powi(2) / 32f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn stft_covariance() {
        let g = grid1(32);
        let f = random(&g, 11);
        let phi = gaussian(&g);
        let (u, eta) = (5usize, 9usize);
        let v = stft(&f, &phi).unwrap();
        let w = stft(&tf_shift(&f, &[u as i64], &[eta as i64]).unwrap(), &phi).unwrap();
        for x in 0..32 {
            for xi in 0..32 {
                let a = w.at(&[x], &[xi]).norm();
                let b = v.at(&[(x + 32 - u) % 32], &[(xi + 32 - eta) % 32]).norm();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stft_rejects_grid_mismatch() {
        assert!(stft(&random(&grid1(8), 1), &random(&grid1(16), 1)).is_err());
    }

    #[test]
    fn analysis_subsamples_stft() {
        let g = GridSpec::new(&[8, 4]).unwrap();
        let f = random(&g, 3);
        let phi = random(&g, 4);
        let lattice = LatticeSpec::new(&[2, 1], &[4, 2]);
        let sys = GaborSystem::new(phi.clone(), lattice).unwrap();
        let c = analysis(&f, &sys).unwrap();
        let v = stft(&f, &phi).unwrap();
        for j0 in 0..4 {
            for j1 in 0..4 {
                for k0 in 0..2 {
                    for k1 in 0..2 {
                        let expected = v.at(&[2 * j0, j1], &[4 * k0, 2 * k1]);
                        assert!((c.at(&[j0, j1], &[k0, k1]) - expected).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn analysis_on_full_lattice_is_the_stft() {
        let g = grid1(16);
        let f = random(&g, 3);
        let sys = system(16, 1, 1);
        let c = analysis(&f, &sys).unwrap();
        let v = stft(&f, &sys.window).unwrap();
        for (a, b) in c.data.iter().zip(&v.data) {
            assert!((a - b).norm() < 1e-12);
        }
        let z = analysis(&SignalNd::zeros(&g), &sys).unwrap();
        assert!(z.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn synthesis_of_deltas() {
        let sys = system(16, 2, 4);
        let g = sys.grid().clone();
        let mut c = GaborCoeffs::zeros(&g, &sys.lattice).unwrap();
        c.set(&[0], &[0], Complex64::new(1.0, 0.0));
        let out = synthesis(&c, &sys, Which::Window).unwrap();
        for (a, b) in out.data.iter().zip(&sys.window.data) {
            assert!((a - b).norm() < 1e-14);
        }
        let mut c = GaborCoeffs::zeros(&g, &sys.lattice).unwrap();
        c.set(&[3], &[2], Complex64::new(1.0, 0.0));
        let out = synthesis(&c, &sys, Which::Window).unwrap();
        let expected = tf_shift(&sys.window, &[6], &[8]).unwrap();
        for (a, b) in out.data.iter().zip(&expected.data) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(matches!(synthesis(&c, &sys, Which::Dual), Err(Error::MissingDual)));
    }

    #[test]
    fn adjointness() {
        let sys = system(16, 2, 2);
        let g = sys.grid().clone();
        let mut r = rng::seeded(9);
        let mut c = GaborCoeffs::zeros(&g, &sys.lattice).unwrap();
        c.data = rng::complex_vec(&mut r, c.data.len());
        let h = random(&g, 10);
        let lhs = synthesis(&c, &sys, Which::Window).unwrap().inner(&h);
        let rhs = c.inner(&analysis(&h, &sys).unwrap()) * adjoint_scale(&g);
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn synthesis_rejects_lattice_mismatch() {
        let sys = system(16, 2, 2);
        let c = GaborCoeffs::zeros(sys.grid(), &LatticeSpec::uniform(4, 2, 1)).unwrap();
        assert!(synthesis(&c, &sys, Which::Window).is_err());
    }

    #[test]
    fn full_lattice_is_tight() {
        let sys = system(16, 1, 1);
        let f = random(sys.grid(), 4);
        let sf = frame_operator_apply(&f, &sys).unwrap();
        let expected = f.scale(Complex64::new(4.0, 0.0)); // sqrt(16) * ||phi||^2
        assert!(sf.sub(&expected).norm_l2() < 1e-10 * f.norm_l2());
        let (a, b) = frame_bounds(&sys).unwrap();
        assert!((a - 4.0).abs() < 1e-10 && (b - 4.0).abs() < 1e-10);
        let z = frame_operator_apply(&SignalNd::zeros(sys.grid()), &sys).unwrap();
        assert_eq!(z.norm_l2(), 0.0);
    }

    #[test]
    fn frame_operator_is_hermitian_psd() {
        let g = GridSpec::new(&[8, 4]).unwrap();
        let sys = GaborSystem::new(random(&g, 1), LatticeSpec::new(&[2, 2], &[2, 1])).unwrap();
        for s in 0..100 {
            let f = random(&g, 100 + s);
            let h = random(&g, 300 + s);
            let sf = frame_operator_apply(&f, &sys).unwrap();
            let sh = frame_operator_apply(&h, &sys).unwrap();
            let q = sf.inner(&f);
            assert!(q.re >= -1e-12 && q.im.abs() < 1e-10 * q.re.max(1.0));
            assert!((sf.inner(&h) - sh.inner(&f).conj()).norm() < 1e-10);
        }
    }

    fn dense_matrix(apply: impl Fn(&SignalNd) -> SignalNd, g: &GridSpec) -> DMatrix<Complex64> {
        let n = g.len();
        let mut m = DMatrix::from_element(n, n, zero());
        for col in 0..n {
            let mut e = SignalNd::zeros(g);
            e.data[col] = Complex64::new(1.0, 0.0);
            let s = apply(&e);
            for row in 0..n {
                m[(row, col)] = s.data[row];
            }
        }
        m
    }

    #[test]
    fn blocks_agree_with_dense_operator() {
        let g = GridSpec::new(&[8, 6]).unwrap();
        let phi = random(&g, 21);
        let psi = random(&g, 22);
        let lattice = LatticeSpec::new(&[2, 3], &[4, 2]);
        let dense = dense_matrix(|e| frame_operator_pair(e, &phi, &psi, &lattice).unwrap(), &g);
        let blocks = walnut_blocks(&phi, &psi, &lattice).unwrap();
        let f = random(&g, 23);
        let via_blocks = blocks.apply(&f);
        let v = nalgebra::DVector::from_vec(f.data.clone());
        let via_dense = &dense * v;
        for (a, b) in via_blocks.data.iter().zip(via_dense.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_bounds_match_dense_eigenvalues() {
        let sys = system(16, 2, 2);
        let dense = dense_matrix(|e| frame_operator_apply(e, &sys).unwrap(), sys.grid());
        let eig = dense.symmetric_eigenvalues();
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (a, b) = frame_bounds(&sys).unwrap();
        assert!((a - lo).abs() < 1e-12 && (b - hi).abs() < 1e-12);
        assert!(a > 0.1);
        // regression values for the unit-norm periodized Gaussian of width 16
        assert!((a - REG_A).abs() < 1e-9, "A = {a:.15}");
        assert!((b - REG_B).abs() < 1e-9, "B = {b:.15}");
    }

    const REG_A: f64 = 0.992544178442774;
    const REG_B: f64 = 1.007483720296074;

    #[test]
    fn frame_bounds_sandwich() {
        let sys = system(16, 2, 4);
        let (a, b) = frame_bounds(&sys).unwrap();
        for s in 0..100 {
            let f = random(sys.grid(), s);
            let q = frame_operator_apply(&f, &sys).unwrap().inner(&f).re;
            let n2 = f.norm_l2().powi(2);
            assert!(a * n2 <= q + 1e-10 && q <= b * n2 + 1e-10);
        }
    }

    #[test]
    fn undersampled_lattice_is_no_frame() {
        let sys = system(16, 8, 4);
        assert!(sys.redundancy() < 1.0);
        let (a, _) = frame_bounds(&sys).unwrap();
        assert!(a <= DEFAULT_FRAME_TOL);
        assert!(!is_frame(&sys, DEFAULT_FRAME_TOL).unwrap());
        assert!(matches!(
            sys.clone().with_canonical_dual(),
            Err(Error::NotAFrame { .. })
        ));
        assert!(canonical_dual(&sys, 1e-12, 100).is_err());
    }

    #[test]
    fn iterative_bounds_match_blocks() {
        let sys = system(16, 2, 2);
        let (a, b) = frame_bounds(&sys).unwrap();
        let it = frame_bounds_iterative(&sys, 5, 1e-10, 20_000).unwrap();
        assert!((it.upper - b).abs() < 1e-8 * b, "{} vs {b}", it.upper);
        assert!((it.lower - a).abs() < 1e-7 * b, "{} vs {a}", it.lower);
        assert!(matches!(
            frame_bounds_iterative(&sys, 5, 1e-15, 2),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn tight_dual_is_a_multiple_of_the_window() {
        let sys = system(16, 1, 1);
        let dual = canonical_dual(&sys, 1e-12, 50).unwrap();
        let expected = sys.window.scale(Complex64::new(0.25, 0.0));
        assert!(dual.dual.sub(&expected).norm_l2() < 1e-10);
        let f = random(sys.grid(), 2);
        let mut sys = sys;
        sys.dual = Some(dual.dual);
        assert!(reconstruct(&f, &sys).unwrap().residual < 1e-10);
    }

    #[test]
    fn gaussian_dual_by_cg() {
        let sys = system(16, 2, 2);
        let sol = canonical_dual(&sys, 1e-12, 200).unwrap();
        assert!(sol.iterations <= 200);
        assert!(sol.residual <= 1e-12);
        let direct = canonical_dual_direct(&sys).unwrap();
        assert!(sol.dual.sub(&direct).norm_l2() < 1e-10 * direct.norm_l2());
        let mut sys = sys;
        sys.dual = Some(sol.dual);
        for s in 0..20 {
            let f = random(sys.grid(), 40 + s);
            let rec = reconstruct(&f, &sys).unwrap();
            assert!(rec.residual < 1e-10, "{}", rec.residual);
        }
    }

    #[test]
    fn dual_of_dual_is_the_window() {
        let sys = system(16, 2, 4).with_canonical_dual().unwrap();
        let psi = sys.dual.clone().unwrap();
        let back = GaborSystem::new(psi, sys.lattice.clone()).unwrap();
        let dd = canonical_dual(&back, 1e-13, 500).unwrap().dual;
        assert!(dd.sub(&sys.window).norm_l2() < 1e-8);
    }

    #[test]
    fn reconstruction_in_two_dimensions() {
        let g = GridSpec::new(&[8, 8]).unwrap();
        let sys = GaborSystem::new(gaussian(&g), LatticeSpec::new(&[2, 2], &[2, 2]))
            .unwrap()
            .with_canonical_dual()
            .unwrap();
        let f = random(&g, 8);
        assert!(reconstruct(&f, &sys).unwrap().residual < 1e-9);
        assert!(matches!(
            reconstruct(&f, &GaborSystem::new(gaussian(&g), sys.lattice.clone()).unwrap()),
            Err(Error::MissingDual)
        ));
    }

    #[test]
    fn reconstruction_is_covariant() {
        let sys = system(16, 2, 2).with_canonical_dual().unwrap();
        let f = random(sys.grid(), 12);
        let base = reconstruct(&f, &sys).unwrap().residual;
        let shifted = reconstruct(&tf_shift(&f, &[4], &[6]).unwrap(), &sys).unwrap().residual;
        assert!((base - shifted).abs() < 1e-10);
    }

    #[test]
    fn tight_window_gives_identity() {
        let sys = system(16, 2, 2);
        let t = canonical_tight_window(&sys).unwrap();
        let tight = GaborSystem::new(t, sys.lattice.clone()).unwrap();
        let (a, b) = frame_bounds(&tight).unwrap();
        assert!((a - 1.0).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
        let f = random(sys.grid(), 1);
        assert!(frame_operator_apply(&f, &tight).unwrap().sub(&f).norm_l2() < 1e-10 * f.norm_l2());
    }

    #[test]
    fn covariance_on_and_off_the_lattice() {
        let sys = system(16, 2, 4);
        let f = random(sys.grid(), 3);
        assert_eq!(frame_op_covariance_residual(&sys, &f, &[0], &[0]).unwrap(), 0.0);
        assert!(frame_op_covariance_residual(&sys, &f, &[6], &[12]).unwrap() < 1e-10);
        assert!(frame_op_covariance_residual(&sys, &f, &[-4], &[4]).unwrap() < 1e-10);
        assert!(matches!(
            frame_op_covariance_residual(&sys, &f, &[1], &[0]),
            Err(Error::OffLattice(_))
        ));
        assert!(covariance_residual_any_shift(&sys, &f, &[1], &[1]).unwrap() > 1e-6);
    }

    #[test]
    fn system_serde_roundtrip() {
        let sys = system(8, 2, 2).with_canonical_dual().unwrap();
        let s = serde_json::to_string(&sys).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["lattice"], serde_json::json!({"a": [2], "b": [2]}));
        let back: GaborSystem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sys);
        let bad = s.replace("\"a\":[2]", "\"a\":[3]");
        assert!(serde_json::from_str::<GaborSystem>(&bad).is_err());
    }

    #[test]
    fn zero_window_is_rejected() {
        let g = grid1(8);
        assert!(GaborSystem::new(SignalNd::zeros(&g), LatticeSpec::uniform(2, 2, 1)).is_err());
        assert!(GaborSystem::new(gaussian(&g), LatticeSpec::uniform(3, 2, 1)).is_err());
    }
}
