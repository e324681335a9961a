//! Feasible regions with exact Euclidean projections.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    L2Ball { center: DVector<f64>, radius: f64 },
    Box { lo: DVector<f64>, hi: DVector<f64> },
    AllSpace { dim: usize },
}

impl ConvexSet {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(ConvexSet::L2Ball { center, radius })
    }

    /// Ball of the given radius centred at the origin.
    pub fn origin_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(DVector::zeros(dim), radius)
    }

    pub fn boxed(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidParameter("box requires finite lo <= hi componentwise".into()));
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    pub fn all_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(ConvexSet::AllSpace { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::L2Ball { center, .. } => center.len(),
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::AllSpace { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, ConvexSet::AllSpace { .. })
    }

    pub fn diameter(&self) -> Result<f64> {
        match self {
            ConvexSet::L2Ball { radius, .. } => Ok(2.0 * radius),
            ConvexSet::Box { lo, hi } => Ok((hi - lo).norm()),
            ConvexSet::AllSpace { .. } => Err(Error::UnboundedSet),
        }
    }

    /// Largest Euclidean norm of any point of the set.
    pub fn max_norm(&self) -> f64 {
        match self {
            ConvexSet::L2Ball { center, radius } => center.norm() + radius,
            ConvexSet::Box { lo, hi } => lo
                .iter()
                .zip(hi.iter())
                .map(|(l, h)| {
                    let m = l.abs().max(h.abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
            ConvexSet::AllSpace { .. } => f64::INFINITY,
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConvexSet::L2Ball { center, radius } => (x - center).norm() <= *radius,
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
            ConvexSet::AllSpace { .. } => x.iter().all(|v| v.is_finite()),
        }
    }

    /// Euclidean projection. The result satisfies `contains` exactly, including
    /// after floating-point rounding of the radial rescale.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            ConvexSet::L2Ball { center, radius } => {
                let offset = x - center;
                let norm = offset.norm();
                if norm <= *radius {
                    x.clone()
                } else {
                    let mut scale = radius / norm;
                    let mut p = center + &offset * scale;
                    while (&p - center).norm() > *radius {
                        scale *= 1.0 - f64::EPSILON;
                        p = center + &offset * scale;
                    }
                    p
                }
            }
            ConvexSet::Box { lo, hi } => {
                DVector::from_iterator(x.len(), x.iter().zip(lo.iter().zip(hi.iter())).map(|(v, (l, h))| v.clamp(*l, *h)))
            }
            ConvexSet::AllSpace { .. } => x.clone(),
        })
    }

    /// Draws a point of the set: uniform over a box, uniform over a ball via
    /// a Gaussian direction and an `r·U^{1/d}` radius.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        match self {
            ConvexSet::L2Ball { center, radius } => {
                let d = center.len();
                let dir = loop {
                    let g = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
                    let n: f64 = g.norm();
                    if n > 0.0 {
                        break g / n;
                    }
                };
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / d as f64);
                self.project(&(center + dir * r))
            }
            ConvexSet::Box { lo, hi } => Ok(DVector::from_iterator(
                lo.len(),
                lo.iter().zip(hi.iter()).map(|(l, h)| {
                    if l == h {
                        *l
                    } else {
                        rng.random_range(*l..=*h)
                    }
                }),
            )),
            ConvexSet::AllSpace { .. } => Err(Error::UnboundedSet),
        }
    }
}
