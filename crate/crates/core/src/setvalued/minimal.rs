use std::collections::BTreeSet;

use rayon::prelude::*;

use super::SystemRisk;
use crate::error::{Error, Result};

/// Largest number of lattice coordinates enumerated per plane.
const MAX_LATTICE: usize = 20_000_000;

/// Uniform lattice on the planes `E_k = {ℓ ∈ Π[0, w_i] : ℓᵀ1 = k}`.
///
/// Coordinates are integer vectors over an orthonormal basis of `1⊥`
/// (Gram-Schmidt on `e_1−e_2, …, e_1−e_d`). The lattice on `E_k` is anchored
/// at `w − ((Σw − k)/d)·1`, which is `(k/d)·1` for unit weights, so moving
/// between planes translates every lattice point along `1` and the top plane
/// `k = Σw` contains the vertex `w` exactly.
#[derive(Debug, Clone)]
pub struct PlaneLattice {
    d: usize,
    weights: Vec<f64>,
    step: f64,
    basis: Vec<Vec<f64>>,
}

impl PlaneLattice {
    pub fn new(d: usize, weights: Option<&[f64]>, step: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension("at least one institution is required".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("plane grid step must be positive, got {step}")));
        }
        let weights = match weights {
            None => vec![1.0; d],
            Some(w) if w.len() != d => {
                return Err(Error::Dimension(format!("{} weights for {d} institutions", w.len())));
            }
            Some(w) => {
                if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Domain(format!("weights must be positive and finite, got {w:?}")));
                }
                w.to_vec()
            }
        };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d.saturating_sub(1));
        for j in 1..d {
            let mut v = vec![0.0; d];
            v[0] = 1.0;
            v[j] = -1.0;
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        Ok(PlaneLattice { d, weights, step, basis })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `Σw`, the offset of the top plane.
    pub fn k_max(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Lattice point with integer coordinates `coords` at refinement `level`
    /// (step `h/2^level`) on plane `k`, in weighted coordinates `ℓ`.
    pub fn point(&self, k: f64, coords: &[i64], level: u32) -> Vec<f64> {
        let h = self.step / f64::powi(2.0, level as i32);
        let lift = (self.k_max() - k) / self.d as f64;
        let mut p: Vec<f64> = self.weights.iter().map(|w| w - lift).collect();
        for (c, b) in coords.iter().zip(&self.basis) {
            if *c != 0 {
                p.iter_mut().zip(b).for_each(|(x, y)| *x += h * *c as f64 * y);
            }
        }
        p
    }

    /// The point mapped back to `λ = ℓ ⊘ w`, or `None` outside the box.
    pub fn lambda(&self, ell: &[f64]) -> Option<Vec<f64>> {
        const SLACK: f64 = 1e-12;
        if ell.iter().zip(&self.weights).any(|(x, w)| *x < -SLACK || *x > w + SLACK) {
            return None;
        }
        Some(ell.iter().zip(&self.weights).map(|(x, w)| (x / w).clamp(0.0, 1.0)).collect())
    }

    /// Coordinates of every lattice point on `E_k` inside the box.
    pub fn plane_coords(&self, k: f64) -> Result<Vec<Vec<i64>>> {
        let dim = self.d - 1;
        if dim == 0 {
            return Ok(vec![Vec::new()]);
        }
        let radius = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let m = (radius / self.step).ceil() as i64;
        let side = (2 * m + 1) as usize;
        let total = side
            .checked_pow(dim as u32)
            .filter(|t| *t <= MAX_LATTICE)
            .ok_or_else(|| Error::Resolution(format!("plane lattice with {side}^{dim} points is too large")))?;
        Ok((0..total)
            .into_par_iter()
            .filter_map(|mut code| {
                let mut c = vec![0i64; dim];
                for slot in c.iter_mut() {
                    *slot = (code % side) as i64 - m;
                    code /= side;
                }
                self.lambda(&self.point(k, &c, 0)).map(|_| c)
            })
            .collect())
    }
}

/// Outcome of the convexity test between two acceptable planes.
#[derive(Debug, Clone, PartialEq)]
pub enum PruneOutcome {
    /// The premise holds; later planes may be restricted to translates of
    /// these candidates.
    Restrict(Vec<Vec<f64>>),
    /// Some candidate is not a translate of a current member.
    Disabled,
}

/// Checks whether every candidate member on `E_{k−ε}` lies within `tol`
/// (sup-norm) of some current member on `E_k` shifted by `−(ε/d)·1`.
pub fn convex_prune(current: &[Vec<f64>], candidates: &[Vec<f64>], epsilon_shift: f64, tol: f64) -> PruneOutcome {
    let contained = candidates.iter().all(|c| {
        let shift = epsilon_shift / c.len() as f64;
        current.iter().any(|m| m.iter().zip(c).all(|(mi, ci)| (mi - shift - ci).abs() <= tol))
    });
    if contained {
        PruneOutcome::Restrict(candidates.to_vec())
    } else {
        PruneOutcome::Disabled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalPointsOptions {
    pub plane_grid_step: f64,
    pub delta: f64,
    /// Positive weights of the 1-norm, `None` for unit weights.
    pub weights: Option<Vec<f64>>,
    /// Restrict planes by convexity once the premise holds.
    pub prune: bool,
    /// Halve the step around the survivors whenever the search is restricted.
    pub refine: bool,
}

impl MinimalPointsOptions {
    pub fn new(plane_grid_step: f64, delta: f64) -> Self {
        MinimalPointsOptions { plane_grid_step, delta, weights: None, prune: true, refine: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalPointResult {
    /// Offset of the last acceptable plane, `k_b`.
    pub k_min: f64,
    /// Member grid points on `E_{k_min}`, as `λ`.
    pub minimal_points: Vec<Vec<f64>>,
    pub bracket: (f64, f64),
    pub planes_tested: usize,
    pub membership_tests: usize,
    /// Plane offset at which the search was first restricted.
    pub pruned_at: Option<f64>,
}

struct Plane {
    coords: Vec<Vec<i64>>,
    lambdas: Vec<Vec<f64>>,
    ells: Vec<Vec<f64>>,
}

/// Minimal (weighted) 1-norm points of a set given by a membership oracle on
/// `[0,1]^d`, by bisection over the planes `E_k`.
pub fn minimal_points_with<F>(d: usize, opts: &MinimalPointsOptions, is_member: F) -> Result<MinimalPointResult>
where
    F: Fn(&[f64]) -> Result<bool> + Sync,
{
    if !(opts.delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {}", opts.delta)));
    }
    let lattice = PlaneLattice::new(d, opts.weights.as_deref(), opts.plane_grid_step)?;
    let mut tests = 1usize;
    let origin = vec![0.0; d];
    if is_member(&origin)? {
        return Ok(MinimalPointResult {
            k_min: 0.0,
            minimal_points: vec![origin],
            bracket: (0.0, 0.0),
            planes_tested: 0,
            membership_tests: tests,
            pruned_at: None,
        });
    }

    // Member grid points of one plane, restricted to `allowed` when set.
    let scan = |k: f64, allowed: Option<(&[Vec<i64>], u32)>, tests: &mut usize| -> Result<Plane> {
        let (coords, level) = match allowed {
            Some((c, level)) => (c.to_vec(), level),
            None => (lattice.plane_coords(k)?, 0),
        };
        let inside: Vec<(Vec<i64>, Vec<f64>, Vec<f64>)> = coords
            .into_iter()
            .filter_map(|c| {
                let ell = lattice.point(k, &c, level);
                lattice.lambda(&ell).map(|l| (c, l, ell))
            })
            .collect();
        *tests += inside.len();
        let flags: Vec<bool> = inside.par_iter().map(|(_, l, _)| is_member(l)).collect::<Result<_>>()?;
        let mut plane = Plane { coords: Vec::new(), lambdas: Vec::new(), ells: Vec::new() };
        for ((c, l, ell), member) in inside.into_iter().zip(flags) {
            if member {
                plane.coords.push(c);
                plane.lambdas.push(l);
                plane.ells.push(ell);
            }
        }
        Ok(plane)
    };

    let (mut ka, mut kb) = (0.0, lattice.k_max());
    let mut best = scan(kb, None, &mut tests)?;
    let mut planes = 1usize;
    if best.coords.is_empty() {
        return Err(Error::Resolution(format!(
            "no acceptable grid point on the top plane k = {kb}; the all-eligible point is not a member"
        )));
    }
    let mut restriction: Option<(Vec<Vec<i64>>, u32)> = None;
    let mut pruned_at = None;
    while kb - ka >= opts.delta {
        let k = 0.5 * (ka + kb);
        let plane = scan(k, restriction.as_ref().map(|(c, l)| (c.as_slice(), *l)), &mut tests)?;
        planes += 1;
        if plane.coords.is_empty() {
            ka = k;
            continue;
        }
        if opts.prune {
            let level = restriction.as_ref().map_or(0, |r| r.1);
            let tol = 0.5 * lattice.step() / f64::powi(2.0, level as i32);
            match convex_prune(&best.ells, &plane.ells, kb - k, tol) {
                PruneOutcome::Restrict(_) => {
                    pruned_at.get_or_insert(k);
                    restriction = Some(if opts.refine {
                        (refine_coords(&plane.coords), level + 1)
                    } else {
                        (plane.coords.clone(), level)
                    });
                }
                PruneOutcome::Disabled => restriction = None,
            }
        }
        kb = k;
        best = plane;
    }
    if pruned_at.is_some() {
        // the lemma holds for the continuous set only; the reported plane is
        // rescanned on the full lattice so no member is lost to quantization
        let full = scan(kb, None, &mut tests)?;
        planes += 1;
        for l in full.lambdas {
            if !best.lambdas.iter().any(|b| b.iter().zip(&l).all(|(x, y)| (x - y).abs() < 1e-12)) {
                best.lambdas.push(l);
            }
        }
    }
    Ok(MinimalPointResult {
        k_min: kb,
        minimal_points: best.lambdas,
        bracket: (ka, kb),
        planes_tested: planes,
        membership_tests: tests,
        pruned_at,
    })
}

/// Doubles every coordinate and adds the offsets `{−1,0,1}^{d−1}`.
fn refine_coords(coords: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = BTreeSet::new();
    for c in coords {
        let dim = c.len();
        for code in 0..3usize.pow(dim as u32) {
            let mut code = code;
            let v: Vec<i64> = c
                .iter()
                .map(|x| {
                    let o = (code % 3) as i64 - 1;
                    code /= 3;
                    2 * x + o
                })
                .collect();
            out.insert(v);
        }
    }
    out.into_iter().collect()
}

/// Minimal 1-norm points of the intrinsic risk set. Pruning applies only to
/// convex criteria.
pub fn minimal_points(sys: &SystemRisk<'_>, opts: &MinimalPointsOptions) -> Result<MinimalPointResult> {
    let mut opts = opts.clone();
    opts.prune &= sys.criterion().is_convex();
    minimal_points_with(sys.d(), &opts, |l| sys.is_member_intrinsic(l))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_orthogonal_to_one() {
        let lat = PlaneLattice::new(4, None, 0.1).unwrap();
        let b = lat.basis();
        for i in 0..3 {
            assert!(b[i].iter().sum::<f64>().abs() < 1e-14);
            for j in 0..3 {
                let dot: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn planes_have_the_right_offset_and_top_plane_is_the_vertex() {
        let lat = PlaneLattice::new(2, None, 0.05).unwrap();
        assert_eq!(lat.point(2.0, &[0], 0), vec![1.0, 1.0]);
        assert_eq!(lat.plane_coords(2.0).unwrap(), vec![vec![0]]);
        // E_1 on [0,1]^2 is the segment of length √2 through (1/2, 1/2)
        let coords = lat.plane_coords(1.0).unwrap();
        assert_eq!(coords.len(), 2 * 14 + 1);
        for c in coords {
            let p = lat.point(1.0, &c, 0);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let w = PlaneLattice::new(2, Some(&[2.0, 0.5]), 0.1).unwrap();
        assert_eq!(w.point(2.5, &[0], 0), vec![2.0, 0.5]);
        assert!(PlaneLattice::new(2, Some(&[1.0, 0.0]), 0.1).is_err());
    }

    #[test]
    fn prune_premise() {
        assert_eq!(convex_prune(&[vec![0.5, 0.5]], &[], 0.2, 0.01), PruneOutcome::Restrict(vec![]));
        let cur = vec![vec![0.6, 0.6], vec![0.7, 0.5]];
        let cand = vec![vec![0.5, 0.5]];
        assert_eq!(convex_prune(&cur, &cand, 0.2, 0.01), PruneOutcome::Restrict(cand.clone()));
        assert_eq!(convex_prune(&cur, &[vec![0.3, 0.7]], 0.2, 0.01), PruneOutcome::Disabled);
    }

    #[test]
    fn origin_member_gives_zero() {
        let r = minimal_points_with(3, &MinimalPointsOptions::new(0.1, 0.01), |_| Ok(true)).unwrap();
        assert_eq!(r.k_min, 0.0);
        assert_eq!(r.minimal_points, vec![vec![0.0; 3]]);
    }

    #[test]
    fn unreachable_top_plane_is_a_resolution_error() {
        let err = minimal_points_with(2, &MinimalPointsOptions::new(0.1, 0.01), |_| Ok(false)).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    /// Brute force over a 0.01 grid: members of {x : x1 + x2 ≥ c} on the
    /// smallest acceptable lattice plane.
    #[test]
    fn halfspace_pruning_never_removes_a_true_member() {
        for &c in &[0.37, 0.8, 1.0, 1.33, 1.71] {
            let member = |l: &[f64]| Ok(l.iter().sum::<f64>() >= c);
            let brute = (0..=100)
                .flat_map(|i| (0..=100).map(move |j| (i as f64 / 100.0, j as f64 / 100.0)))
                .filter(|(a, b)| a + b >= c)
                .map(|(a, b)| a + b)
                .fold(f64::INFINITY, f64::min);
            let mut opts = MinimalPointsOptions::new(0.01, 1e-4);
            let on = minimal_points_with(2, &opts, member).unwrap();
            opts.prune = false;
            let off = minimal_points_with(2, &opts, member).unwrap();
            assert!(on.k_min >= c && on.k_min - c < 1e-4, "c = {c}: {}", on.k_min);
            assert!((brute - on.k_min).abs() <= 0.01 + 1e-4);
            assert_eq!(on.k_min, off.k_min);
            for p in &off.minimal_points {
                assert!(on.minimal_points.contains(p), "c = {c}: pruning lost {p:?}");
            }
            assert!(on.bracket.1 - on.bracket.0 < 1e-4);
        }
    }

    /// Disk around `1`: the minimal point is on the diagonal.
    #[test]
    fn disk_minimum_on_the_diagonal() {
        let r0 = 0.5;
        let member = |l: &[f64]| Ok(l.iter().map(|x| (x - 1.0) * (x - 1.0)).sum::<f64>().sqrt() <= r0);
        for refine in [false, true] {
            let mut opts = MinimalPointsOptions::new(0.02, 1e-5);
            opts.refine = refine;
            let r = minimal_points_with(2, &opts, member).unwrap();
            let exact = 2.0 - r0 * 2f64.sqrt();
            assert!((r.k_min - exact).abs() < 0.02, "{r:?}");
            for p in &r.minimal_points {
                assert!((p[0] - p[1]).abs() <= 0.02);
                assert!(member(p).unwrap());
                assert!((p.iter().sum::<f64>() - r.k_min).abs() < 1e-9);
            }
            assert!(r.pruned_at.is_some());
        }
    }

    #[test]
    fn weights_rescale_the_search() {
        // {λ : 2λ1 + λ2 ≥ 1}: the weighted minimum is exactly on the boundary
        let member = |l: &[f64]| Ok(2.0 * l[0] + l[1] >= 1.0);
        let mut opts = MinimalPointsOptions::new(0.01, 1e-6);
        opts.weights = Some(vec![2.0, 1.0]);
        let r = minimal_points_with(2, &opts, member).unwrap();
        assert!((r.k_min - 1.0).abs() < 1e-5);
        for p in &r.minimal_points {
            assert!((2.0 * p[0] + p[1] - r.k_min).abs() < 1e-9);
        }
    }

    #[test]
    fn refine_offsets() {
        let r = refine_coords(&[vec![1, 0]]);
        assert_eq!(r.len(), 9);
        assert!(r.contains(&vec![2, 0]) && r.contains(&vec![1, -1]) && r.contains(&vec![3, 1]));
    }
}
