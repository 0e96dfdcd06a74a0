use rayon::prelude::*;

use super::SystemRisk;
use crate::error::{Error, Result};

/// One certified point of a boundary approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    /// Index of the originating grid point in [`face_grid`] order.
    pub origin_index: usize,
    pub origin: Vec<f64>,
    /// Outer bracket end: a verified member.
    pub point: Vec<f64>,
    /// Inner bracket end: not a member (equal to `point` for direct members).
    pub inner: Vec<f64>,
    /// Bisection steps `n`.
    pub n_iter: u32,
    /// `‖point − inner‖ = 2^{-n} ‖target − origin‖`.
    pub bracket_width: f64,
    /// The grid point itself was a member, no bisection ran.
    pub direct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryApproximation {
    pub points: Vec<BoundaryPoint>,
    /// End point of every ray: `1` (intrinsic) or `k_hi·1` (monetary).
    pub target: Vec<f64>,
    pub grid_step: f64,
    pub epsilon: f64,
    /// Whether `target` is a member.
    pub feasible_flag: bool,
}

impl BoundaryApproximation {
    /// `min_i λ̂_iᵀ1` over the recorded points.
    pub fn min_coordinate_sum(&self) -> Option<f64> {
        self.points.iter().map(|p| p.point.iter().sum::<f64>()).reduce(f64::min)
    }
}

/// A grid point of a full-lattice scan.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMember {
    pub index: usize,
    pub point: Vec<f64>,
}

/// Values `lo, lo+h(hi−lo), …, hi` along one axis.
fn axis(lo: f64, hi: f64, grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Domain(format!("grid step must lie in (0, 1], got {grid_step}")));
    }
    let m = (1.0 / grid_step - 1e-9).ceil() as usize;
    Ok((0..=m).map(|i| if i == m { hi } else { lo + (i as f64 * grid_step) * (hi - lo) }).collect())
}

/// Every lattice point of `[lo, hi]^d` in lexicographic order, with a flag
/// telling whether it lies on a face through `lo·1`.
fn lattice(d: usize, lo: f64, hi: f64, grid_step: f64) -> Result<Vec<(Vec<f64>, bool)>> {
    let ax = axis(lo, hi, grid_step)?;
    let m = ax.len();
    let total = m.checked_pow(d as u32).ok_or_else(|| Error::Resolution("grid too large".into()))?;
    Ok((0..total)
        .map(|mut code| {
            let mut idx = vec![0usize; d];
            for slot in idx.iter_mut().rev() {
                *slot = code % m;
                code /= m;
            }
            (idx.iter().map(|&i| ax[i]).collect(), idx.contains(&0))
        })
        .collect())
}

/// Grid points on the `d` faces of `[lo, hi]^d` that contain `lo·1`, in
/// lexicographic order without duplicates.
pub fn face_grid(d: usize, lo: f64, hi: f64, grid_step: f64) -> Result<Vec<Vec<f64>>> {
    Ok(lattice(d, lo, hi, grid_step)?.into_iter().filter(|(_, on_face)| *on_face).map(|(p, _)| p).collect())
}

fn along(origin: &[f64], target: &[f64], t: f64) -> Vec<f64> {
    if t == 1.0 {
        return target.to_vec();
    }
    origin.iter().zip(target).map(|(o, g)| o + t * (g - o)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Bisection from each origin towards `target`, which must be a member.
/// Origins that are members are recorded directly.
pub fn boundary_with<F>(origins: &[Vec<f64>], target: &[f64], epsilon: f64, is_member: F) -> Result<Vec<BoundaryPoint>>
where
    F: Fn(&[f64]) -> Result<bool> + Sync,
{
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    origins
        .par_iter()
        .enumerate()
        .map(|(origin_index, origin)| {
            if is_member(origin)? {
                return Ok(BoundaryPoint {
                    origin_index,
                    origin: origin.clone(),
                    point: origin.clone(),
                    inner: origin.clone(),
                    n_iter: 0,
                    bracket_width: 0.0,
                    direct: true,
                });
            }
            let length = dist(origin, target);
            // the ray parameter halves exactly, so t_b − t_a = 2^{-n}
            let (mut ta, mut tb) = (0.0_f64, 1.0_f64);
            let mut n = 0u32;
            while (tb - ta) * length >= epsilon {
                let tm = 0.5 * (ta + tb);
                if is_member(&along(origin, target, tm))? {
                    tb = tm;
                } else {
                    ta = tm;
                }
                n += 1;
            }
            Ok(BoundaryPoint {
                origin_index,
                origin: origin.clone(),
                point: along(origin, target, tb),
                inner: along(origin, target, ta),
                n_iter: n,
                bracket_width: (tb - ta) * length,
                direct: false,
            })
        })
        .collect()
}

/// Inner approximation of the boundary of `R^int` by bisection along the
/// segments from face grid points to `1`.
///
/// Fails with [`Error::NotFeasible`] when `1` is not a member; use
/// [`full_grid_scan`] in that case.
pub fn boundary_intrinsic(sys: &SystemRisk<'_>, grid_step: f64, epsilon: f64) -> Result<BoundaryApproximation> {
    let d = sys.d();
    let target = vec![1.0; d];
    if !sys.is_member_intrinsic(&target)? {
        return Err(Error::NotFeasible);
    }
    let origins = face_grid(d, 0.0, 1.0, grid_step)?;
    let points = boundary_with(&origins, &target, epsilon, |l| sys.is_member_intrinsic(l))?;
    Ok(BoundaryApproximation { points, target, grid_step, epsilon, feasible_flag: true })
}

/// `[−2 max x0, 2 max x0]`.
pub fn default_monetary_box(x0: &[f64]) -> (f64, f64) {
    let m = x0.iter().copied().fold(0.0, f64::max);
    (-2.0 * m, 2.0 * m)
}

/// Boundary of the monetary measure inside the box `[lo, hi]^d`: bisection
/// from grid points on the faces through `lo·1` towards `hi·1`. The grid step
/// is a fraction of the box side.
pub fn boundary_monetary(
    sys: &SystemRisk<'_>,
    grid_step: f64,
    epsilon: f64,
    bounds: (f64, f64),
) -> Result<BoundaryApproximation> {
    let (lo, hi) = bounds;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Box(format!("invalid box [{lo}, {hi}]")));
    }
    let d = sys.d();
    let target = vec![hi; d];
    if !sys.is_member_monetary(&target)? {
        return Err(Error::Box(format!("the corner {hi}·1 is not acceptable; enlarge the box")));
    }
    let origins = face_grid(d, lo, hi, grid_step)?;
    let points = boundary_with(&origins, &target, epsilon, |k| sys.is_member_monetary(k))?;
    Ok(BoundaryApproximation { points, target, grid_step, epsilon, feasible_flag: true })
}

/// Membership of every lattice point of `[0,1]^d`.
pub fn full_grid_scan(sys: &SystemRisk<'_>, grid_step: f64) -> Result<Vec<GridMember>> {
    let grid = lattice(sys.d(), 0.0, 1.0, grid_step)?;
    let flags: Vec<bool> = grid.par_iter().map(|(p, _)| sys.is_member_intrinsic(p)).collect::<Result<_>>()?;
    Ok(grid
        .into_iter()
        .zip(flags)
        .enumerate()
        .filter(|(_, (_, member))| *member)
        .map(|(index, ((point, _), _))| GridMember { index, point })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_grid_counts() {
        assert_eq!(face_grid(2, 0.0, 1.0, 0.05).unwrap().len(), 41);
        assert_eq!(face_grid(3, 0.0, 1.0, 0.5).unwrap().len(), 27 - 8);
        let g = face_grid(2, -1.0, 1.0, 0.5).unwrap();
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert!(g.iter().all(|p| p.contains(&-1.0)));
        assert!(face_grid(2, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn axis_ends_exactly_at_upper_bound() {
        let ax = axis(0.0, 1.0, 0.3).unwrap();
        assert_eq!(*ax.last().unwrap(), 1.0);
        assert_eq!(ax.len(), 5);
    }

    /// Disk of radius 0.5 around 1: the boundary along each ray is known.
    #[test]
    fn bisection_recovers_known_boundary_with_certificates() {
        let member = |l: &[f64]| Ok(dist(l, &[1.0, 1.0]) <= 0.5);
        let origins = face_grid(2, 0.0, 1.0, 0.1).unwrap();
        let pts = boundary_with(&origins, &[1.0, 1.0], 1e-6, member).unwrap();
        for p in &pts {
            assert!(member(&p.point).unwrap());
            if p.direct {
                assert_eq!(p.n_iter, 0);
                continue;
            }
            assert!(!member(&p.inner).unwrap());
            assert!(p.bracket_width < 1e-6);
            let expect = 2f64.powi(-(p.n_iter as i32)) * dist(&p.origin, &[1.0, 1.0]);
            assert!((dist(&p.point, &p.inner) - expect).abs() <= 1e-12);
            assert!((dist(&p.point, &[1.0, 1.0]) - 0.5).abs() < 1e-6);
            // λ_a ≤ λ̂ ≤ λ_b along the ray towards 1
            assert!(p.inner.iter().zip(&p.point).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn everything_acceptable_records_every_origin_directly() {
        let origins = face_grid(3, 0.0, 1.0, 0.25).unwrap();
        let pts = boundary_with(&origins, &[1.0; 3], 1e-6, |_| Ok(true)).unwrap();
        assert_eq!(pts.len(), origins.len());
        assert!(pts.iter().all(|p| p.direct));
    }
}
