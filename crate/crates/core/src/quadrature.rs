//! Quadrature on triangles (symmetric Dunavant rules) and segments (Gauss-Legendre).

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Rule on the reference triangle: barycentric points, weights summing to 1
/// (multiply by the physical area).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Smallest tabulated rule exact for polynomials of total degree `degree` (1..=5).
    pub fn with_degree(degree: usize) -> Result<Self> {
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        let mut orbit3 = |a: f64, w: f64| {
            let b = 1.0 - 2.0 * a;
            pts.extend([[b, a, a], [a, b, a], [a, a, b]]);
            wts.extend([w, w, w]);
        };
        let exact = match degree {
            0 | 1 => {
                return Ok(TriangleRule {
                    degree: 1,
                    points: vec![[1.0 / 3.0; 3]],
                    weights: vec![1.0],
                })
            }
            2 => {
                orbit3(1.0 / 6.0, 1.0 / 3.0);
                2
            }
            3 | 4 => {
                orbit3(0.445_948_490_915_965, 0.223_381_589_678_011);
                orbit3(0.091_576_213_509_771, 0.109_951_743_655_322);
                4
            }
            5 => {
                orbit3(0.470_142_064_105_115, 0.132_394_152_788_506);
                orbit3(0.101_286_507_323_456, 0.125_939_180_544_827);
                pts.push([1.0 / 3.0; 3]);
                wts.push(0.225);
                5
            }
            d => {
                return Err(Error::Config(format!(
                    "triangle quadrature degree {d} not tabulated (1..=5)"
                )))
            }
        };
        Ok(TriangleRule {
            degree: exact,
            points: pts,
            weights: wts,
        })
    }

    /// Physical points and weights on the triangle with the given corners and area.
    pub fn map(&self, corners: &[Point; 3], area: f64) -> impl Iterator<Item = (Point, f64)> + '_ {
        let c = *corners;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(l, w)| (c[0] * l[0] + c[1] * l[1] + c[2] * l[2], w * area))
    }
}

/// Gauss-Legendre rule on `[0, 1]`, weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SegmentRule {
    pub fn gauss(n: usize) -> Result<Self> {
        let (x, w): (Vec<f64>, Vec<f64>) = match n {
            1 => (vec![0.0], vec![2.0]),
            2 => {
                let a = 1.0 / 3f64.sqrt();
                (vec![-a, a], vec![1.0, 1.0])
            }
            3 => {
                let a = (0.6f64).sqrt();
                (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            4 => {
                let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
                let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
                let wa = (18.0 + 30f64.sqrt()) / 36.0;
                let wb = (18.0 - 30f64.sqrt()) / 36.0;
                (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
            }
            5 => {
                let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
                let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
                let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
                let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
                (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
            }
            n => {
                return Err(Error::Config(format!(
                    "segment quadrature with {n} points not tabulated (1..=5)"
                )))
            }
        };
        Ok(SegmentRule {
            points: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
        })
    }

    /// Polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        2 * self.points.len() - 1
    }

    /// Parameters in `[0, 1]` and weights scaled by `length`.
    pub fn scaled(&self, length: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&s, &w)| (s, w * length))
    }
}

/// Triangle and segment rules used together by the assembly routines.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub triangle: TriangleRule,
    pub segment: SegmentRule,
}

impl QuadratureRule {
    pub fn new(triangle_degree: usize, segment_points: usize) -> Result<Self> {
        Ok(QuadratureRule {
            triangle: TriangleRule::with_degree(triangle_degree)?,
            segment: SegmentRule::gauss(segment_points)?,
        })
    }
}

impl Default for QuadratureRule {
    /// Degree-4 six-point triangle rule and two-point Gauss on segments.
    fn default() -> Self {
        QuadratureRule::new(4, 2).expect("tabulated")
    }
}
