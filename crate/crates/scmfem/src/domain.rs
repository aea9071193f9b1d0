//! Computational domains with one reentrant corner at the origin.
//!
//! A domain is the square `(-1,1)^2` intersected with the sector
//! `0 <= theta <= omega` of opening angle `omega`, so the origin is a boundary
//! vertex with interior angle `omega` and one adjacent side lies on the
//! positive x1-axis.  All singular-function machinery (polar branch, the pair
//! `r^{+-lambda} sin(lambda theta)` with `lambda = pi/omega`) lives here.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Tolerance for clamping angles onto the boundary rays.
const THETA_CLAMP: f64 = 1e-12;

/// Polar coordinates of a point relative to the corner.
///
/// `theta` uses the branch `[0, 2*pi)` with the cut inside the excluded
/// sector; `in_sector` reports whether the point lies in `[0, omega]` after
/// clamping.  Points outside are never silently wrapped.
#[derive(Debug, Clone, Copy)]
pub struct Polar {
    pub r: f64,
    pub theta: f64,
    pub in_sector: bool,
}

/// The square cut to opening angle `omega`, vertices counterclockwise starting
/// at the corner (the origin).
#[derive(Debug, Clone)]
pub struct PolygonalDomain {
    omega: f64,
    lambda: f64,
    vertices: Vec<[f64; 2]>,
}

impl PolygonalDomain {
    /// Builds the domain for an opening angle in `(0, 2*pi)`.
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 2.0 * PI) || !omega.is_finite() {
            return Err(Error::InvalidAngle(omega));
        }
        let mut vertices = vec![[0.0, 0.0], [1.0, 0.0]];
        // Square corners, counterclockwise, kept while strictly inside the sector.
        let corners: [([f64; 2], f64); 4] = [
            ([1.0, 1.0], PI / 4.0),
            ([-1.0, 1.0], 3.0 * PI / 4.0),
            ([-1.0, -1.0], 5.0 * PI / 4.0),
            ([1.0, -1.0], 7.0 * PI / 4.0),
        ];
        for (corner, angle) in corners {
            if angle < omega - THETA_CLAMP {
                vertices.push(corner);
            }
        }
        // Endpoint of the ray theta = omega on the square boundary.
        let (c, s) = (omega.cos(), omega.sin());
        let t = 1.0 / c.abs().max(s.abs());
        let end = [t * c, t * s];
        let last = *vertices.last().unwrap();
        if (end[0] - last[0]).hypot(end[1] - last[1]) > THETA_CLAMP {
            vertices.push(end);
        }
        Ok(Self {
            omega,
            lambda: PI / omega,
            vertices,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// The singular exponent `pi/omega`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Polygon vertices, counterclockwise; index 0 is the corner.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn corner_index(&self) -> usize {
        0
    }

    /// Polar coordinates of `p` on the branch `[0, 2*pi)`.
    ///
    /// Angles within `1e-12` of the rays `theta = 0` and `theta = omega` are
    /// clamped onto them.  The origin reports `(0, 0)` and counts as inside.
    pub fn polar(&self, p: [f64; 2]) -> Polar {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            return Polar {
                r: 0.0,
                theta: 0.0,
                in_sector: true,
            };
        }
        let mut theta = p[1].atan2(p[0]);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        if theta >= 2.0 * PI - THETA_CLAMP || theta <= THETA_CLAMP {
            theta = 0.0;
        } else if (theta - self.omega).abs() <= THETA_CLAMP {
            theta = self.omega;
        }
        Polar {
            r,
            theta,
            in_sector: theta <= self.omega,
        }
    }

    /// Membership in the closed domain, up to `1e-12` slack.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let eps = 1e-12;
        if p[0].abs() > 1.0 + eps || p[1].abs() > 1.0 + eps {
            return false;
        }
        self.polar(p).in_sector
    }

    /// Polygon area by the shoelace formula.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut twice = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            twice += v[i][0] * v[j][1] - v[j][0] * v[i][1];
        }
        0.5 * twice
    }

    pub fn perimeter(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                (v[j][0] - v[i][0]).hypot(v[j][1] - v[i][1])
            })
            .sum()
    }

    /// Gradient of `r^lambda sin(lambda theta)`.
    pub fn primal_singular_gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let Polar { r, theta, .. } = self.polar(p);
        let l = self.lambda;
        let scale = l * r.powf(l - 1.0);
        let (st, ct) = theta.sin_cos();
        let (sl, cl) = (l * theta).sin_cos();
        // e_r = (cos t, sin t), e_theta = (-sin t, cos t)
        [scale * (sl * ct - cl * st), scale * (sl * st + cl * ct)]
    }

    /// Outward normal derivative of `r^lambda sin(lambda theta)` at a boundary
    /// point with outward unit normal `n`.
    pub fn normal_derivative_primal(&self, p: [f64; 2], n: [f64; 2]) -> f64 {
        let g = self.primal_singular_gradient(p);
        g[0] * n[0] + g[1] * n[1]
    }
}

/// Exponent sign of a singular term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularKind {
    /// `r^{+lambda} sin(lambda theta)`, bounded near the corner.
    Primal,
    /// `r^{-lambda} sin(lambda theta)`, unbounded near the corner.
    Dual,
}

impl SingularKind {
    pub fn sign(self) -> f64 {
        match self {
            SingularKind::Primal => 1.0,
            SingularKind::Dual => -1.0,
        }
    }
}

/// A multiple of one of the two harmonic singular functions.
#[derive(Debug, Clone, Copy)]
pub struct SingularTerm {
    pub kind: SingularKind,
    pub coefficient: f64,
}

impl SingularTerm {
    pub fn primal(coefficient: f64) -> Self {
        Self {
            kind: SingularKind::Primal,
            coefficient,
        }
    }

    pub fn dual(coefficient: f64) -> Self {
        Self {
            kind: SingularKind::Dual,
            coefficient,
        }
    }

    /// Evaluates `c * r^{sign*lambda} sin(lambda theta)`.
    ///
    /// The primal term extends continuously by 0 to the corner; the dual term
    /// has no value there, so evaluation at the origin panics.
    pub fn eval(&self, domain: &PolygonalDomain, p: [f64; 2]) -> f64 {
        let Polar { r, theta, .. } = domain.polar(p);
        if r == 0.0 {
            match self.kind {
                SingularKind::Primal => return 0.0,
                SingularKind::Dual => panic!("dual singular term evaluated at the corner"),
            }
        }
        let l = domain.lambda();
        self.coefficient * r.powf(self.kind.sign() * l) * (l * theta).sin()
    }
}
