//! Minimal bin-mass deviations reaching a target JS divergence.
//!
//! Problem: given bin masses `b`, find `δ` minimizing `Σ|δᵢ|` subject to
//! `JS(b, b + δ) = φ`, `Σδᵢ = 0` and `ε ≤ bᵢ + δᵢ ≤ 1 − ε`.
//!
//! JS is separable and convex in the perturbed masses, so for a fixed L1
//! budget its maximum sits on a vertex of the feasible polytope: mass
//! drained from a set of donor bins (all but one fully) into a single
//! receiver. The solver walks such transport paths, one per receiver and
//! donor ordering. Along a path the divergence grows monotonically with the
//! transported mass, so the crossing with `φ` is found by bisection; the path
//! crossing at the smallest L1 cost wins.

use crate::error::{Error, Result};
use crate::stats::{js_masses, SizeDistribution};

/// Open-interval slack: every perturbed mass stays within `[ε, 1 − ε]`.
pub const MASS_EPS: f64 = 1e-6;

// Slightly inside the interval so that `b + (q − b)` cannot round outside it.
const FLOOR: f64 = MASS_EPS * (1.0 + 1e-6);
const CEIL: f64 = 1.0 - FLOOR;

pub const DEFAULT_JS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct BinDeviation {
    pub deltas: Vec<f64>,
    pub achieved_js: f64,
}

impl BinDeviation {
    pub fn l1(&self) -> f64 {
        self.deltas.iter().map(|d| d.abs()).sum()
    }

    /// The perturbed distribution `b + δ` on the same edges.
    pub fn apply(&self, dist: &SizeDistribution) -> Result<SizeDistribution> {
        let masses = dist.masses().iter().zip(&self.deltas).map(|(b, d)| b + d).collect();
        dist.with_masses(masses)
    }
}

/// Solves for the bin deviations of `dist` that reach divergence `phi`.
pub fn solve_bin_deviations(dist: &SizeDistribution, phi: f64, tol: f64) -> Result<BinDeviation> {
    solve_mass_deviations(dist.masses(), phi, tol)
}

#[derive(Clone, Copy, PartialEq)]
enum DonorOrder {
    Smallest,
    Largest,
}

pub fn solve_mass_deviations(b: &[f64], phi: f64, tol: f64) -> Result<BinDeviation> {
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::InvalidArgument(format!("target JS {phi} outside [0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let k = b.len();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 bins".into()));
    }
    if b.iter().all(|m| (MASS_EPS..=1.0 - MASS_EPS).contains(m)) && phi == 0.0 {
        return Ok(BinDeviation {
            deltas: vec![0.0; k],
            achieved_js: 0.0,
        });
    }

    let base = lift_into_interval(b);
    let js_base = js_masses(b, &base);
    if js_base > phi + tol {
        return Err(Error::NoSolution {
            target: phi,
            best: js_base,
        });
    }
    if (js_base - phi).abs() <= tol && phi < tol {
        return Ok(finish(b, base));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut best_reach = js_base;
    for receiver in 0..k {
        for order in [DonorOrder::Smallest, DonorOrder::Largest] {
            let path = TransportPath::new(&base, receiver, order);
            let end = path.point(path.max_transfer);
            let reach = js_masses(b, &end);
            best_reach = best_reach.max(reach);
            if reach < phi - tol {
                continue;
            }
            let q = if reach <= phi + tol {
                end
            } else {
                path.point(bisect(|t| js_masses(b, &path.point(t)), phi, tol, path.max_transfer))
            };
            let cost: f64 = q.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            if best.as_ref().is_none_or(|(c, _)| cost < *c - 1e-15) {
                best = Some((cost, q));
            }
        }
    }
    match best {
        Some((_, q)) => Ok(finish(b, q)),
        None => Err(Error::NoSolution {
            target: phi,
            best: best_reach,
        }),
    }
}

fn finish(b: &[f64], q: Vec<f64>) -> BinDeviation {
    let achieved_js = js_masses(b, &q);
    let deltas = q.iter().zip(b).map(|(x, y)| x - y).collect();
    BinDeviation { deltas, achieved_js }
}

/// Raises bins below the floor, funding the lift from the heaviest bins.
fn lift_into_interval(b: &[f64]) -> Vec<f64> {
    let mut q = b.to_vec();
    let mut deficit = 0.0;
    for m in q.iter_mut() {
        if *m < FLOOR {
            deficit += FLOOR - *m;
            *m = FLOOR;
        }
    }
    while deficit > 0.0 {
        let (i, _) = q
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
            .expect("nonempty");
        let take = deficit.min(q[i] - FLOOR);
        q[i] -= take;
        deficit -= take;
        if take <= 0.0 {
            break;
        }
    }
    for m in q.iter_mut() {
        *m = m.min(CEIL);
    }
    q
}

/// Moves mass from donors (drained one after another) into one receiver.
struct TransportPath<'a> {
    base: &'a [f64],
    receiver: usize,
    donors: Vec<usize>,
    max_transfer: f64,
}

impl<'a> TransportPath<'a> {
    fn new(base: &'a [f64], receiver: usize, order: DonorOrder) -> Self {
        let mut donors: Vec<usize> = (0..base.len()).filter(|&i| i != receiver && base[i] > FLOOR).collect();
        donors.sort_by(|&x, &y| {
            let c = base[x].total_cmp(&base[y]);
            let c = if order == DonorOrder::Largest { c.reverse() } else { c };
            c.then(x.cmp(&y))
        });
        let capacity: f64 = donors.iter().map(|&i| base[i] - FLOOR).sum();
        let max_transfer = capacity.min(CEIL - base[receiver]).max(0.0);
        Self {
            base,
            receiver,
            donors,
            max_transfer,
        }
    }

    fn point(&self, t: f64) -> Vec<f64> {
        let mut q = self.base.to_vec();
        let mut remaining = t;
        let mut moved = 0.0;
        for &i in &self.donors {
            if remaining <= 0.0 {
                break;
            }
            let cap = self.base[i] - FLOOR;
            if remaining >= cap {
                q[i] = FLOOR;
                moved += cap;
                remaining -= cap;
            } else {
                q[i] -= remaining;
                moved += remaining;
                remaining = 0.0;
            }
        }
        q[self.receiver] += moved;
        q
    }
}

/// Finds `t ∈ [0, hi]` with `f(t) ≈ target` for nondecreasing `f`.
fn bisect(f: impl Fn(f64) -> f64, target: f64, tol: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    let mut best = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() <= tol * 1e-3 {
            return mid;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
            best = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_constraints(b: &[f64], d: &BinDeviation) {
        assert!(d.deltas.iter().sum::<f64>().abs() <= 1e-9);
        for (m, x) in b.iter().zip(&d.deltas) {
            let q = m + x;
            assert!((MASS_EPS..=1.0 - MASS_EPS).contains(&q), "mass {q} out of interval");
        }
    }

    #[test]
    fn zero_target_is_zero_deviation() {
        let d = solve_mass_deviations(&[0.2, 0.3, 0.5], 0.0, 1e-3).unwrap();
        assert_eq!(d.deltas, vec![0.0; 3]);
    }

    #[test]
    fn two_bin_quarter_shift() {
        let b = [0.5, 0.5];
        let d = solve_mass_deviations(&b, 0.048794, 1e-3).unwrap();
        check_constraints(&b, &d);
        assert!((d.achieved_js - 0.048794).abs() <= 1e-3);
        assert!((d.deltas[0].abs() - 0.25).abs() < 1e-3);
        assert!((d.deltas[0] + d.deltas[1]).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_reports_best() {
        match solve_mass_deviations(&[0.5, 0.5], 0.999, 1e-3) {
            Err(Error::NoSolution { best, .. }) => assert!(best < 0.999 && best > 0.3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_mass_bins_are_lifted() {
        let b = [0.0, 0.6, 0.4, 0.0];
        let d = solve_mass_deviations(&b, 0.2, 1e-3).unwrap();
        check_constraints(&b, &d);
        assert!((d.achieved_js - 0.2).abs() <= 1e-3);
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(solve_mass_deviations(&[0.5, 0.5], 1.0, 1e-3).is_err());
        assert!(solve_mass_deviations(&[0.5, 0.5], -0.1, 1e-3).is_err());
        assert!(solve_mass_deviations(&[1.0], 0.1, 1e-3).is_err());
    }
}
