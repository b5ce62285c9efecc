use super::{check_dim, dot, norm, ConeOptions, ConvexBody, Projection, TangentCone};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// All of `R^p`; projection is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct FullSpace {
    pub p: usize,
}

impl ConvexBody for FullSpace {
    fn dim(&self) -> usize {
        self.p
    }

    fn name(&self) -> String {
        "full-space".into()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.p, x)?;
        Ok(Projection::exact(x.to_vec()))
    }

    fn linear_max(&self, _direction: &[f64]) -> Result<Vec<f64>> {
        Err(Error::invalid("linear maximisation over the full space is unbounded"))
    }

    fn contains(&self, x: &[f64], _tol: f64) -> bool {
        x.len() == self.p
    }

    fn tangent_cone(&self, apex: &[f64], _opts: &ConeOptions, _rng: &RngStream) -> Result<TangentCone> {
        check_dim(self.p, apex)?;
        Ok(TangentCone::FullSpace { dim: self.p })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Singleton {
    pub point: Vec<f64>,
}

impl ConvexBody for Singleton {
    fn dim(&self) -> usize {
        self.point.len()
    }

    fn name(&self) -> String {
        "singleton".into()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.dim(), x)?;
        Ok(Projection::exact(self.point.clone()))
    }

    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), direction)?;
        Ok(self.point.clone())
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.point).all(|(a, b)| (a - b).abs() <= tol)
    }

    fn tangent_cone(&self, apex: &[f64], _opts: &ConeOptions, _rng: &RngStream) -> Result<TangentCone> {
        super::cone::check_apex(self, apex)?;
        Ok(TangentCone::Zero { dim: self.dim() })
    }
}

/// Axis-aligned box `[lower, upper]^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBody {
    pub p: usize,
    pub lower: f64,
    pub upper: f64,
}

impl BoxBody {
    pub fn new(p: usize, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::invalid(format!("empty box [{lower}, {upper}]")));
        }
        Ok(BoxBody { p, lower, upper })
    }

    pub fn unit(p: usize) -> Self {
        BoxBody { p, lower: 0.0, upper: 1.0 }
    }
}

impl ConvexBody for BoxBody {
    fn dim(&self) -> usize {
        self.p
    }

    fn name(&self) -> String {
        "hypercube".into()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.p, x)?;
        Ok(Projection::exact(x.iter().map(|v| v.clamp(self.lower, self.upper)).collect()))
    }

    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.p, direction)?;
        Ok(direction
            .iter()
            .map(|&d| if d >= 0.0 { self.upper } else { self.lower })
            .collect())
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.p && x.iter().all(|&v| v >= self.lower - tol && v <= self.upper + tol)
    }

    fn tangent_cone(&self, apex: &[f64], _opts: &ConeOptions, _rng: &RngStream) -> Result<TangentCone> {
        super::cone::check_apex(self, apex)?;
        let scale = (self.upper - self.lower) * 1e-12;
        let signs = apex
            .iter()
            .map(|&v| {
                if v <= self.lower + scale {
                    1
                } else if v >= self.upper - scale {
                    -1
                } else {
                    0
                }
            })
            .collect();
        Ok(TangentCone::Coordinate { signs })
    }
}

/// Euclidean ball of the given radius around the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct L2Ball {
    pub p: usize,
    pub radius: f64,
}

impl ConvexBody for L2Ball {
    fn dim(&self) -> usize {
        self.p
    }

    fn name(&self) -> String {
        "l2-ball".into()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.p, x)?;
        let r = norm(x);
        if r <= self.radius {
            return Ok(Projection::exact(x.to_vec()));
        }
        Ok(Projection::exact(x.iter().map(|v| v * self.radius / r).collect()))
    }

    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.p, direction)?;
        let r = norm(direction);
        if r == 0.0 {
            return Ok(vec![0.0; self.p]);
        }
        Ok(direction.iter().map(|v| v * self.radius / r).collect())
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.p && norm(x) <= self.radius + tol
    }

    fn tangent_cone(&self, apex: &[f64], _opts: &ConeOptions, _rng: &RngStream) -> Result<TangentCone> {
        super::cone::check_apex(self, apex)?;
        let r = norm(apex);
        if r < self.radius * (1.0 - 1e-12) {
            return Ok(TangentCone::FullSpace { dim: self.p });
        }
        let normal: Vec<f64> = apex.iter().map(|v| v / r).collect();
        debug_assert!((dot(&normal, &normal) - 1.0).abs() < 1e-9);
        Ok(TangentCone::Halfspace { normal })
    }
}
