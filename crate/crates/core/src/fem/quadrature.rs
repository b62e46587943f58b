//! Symmetric quadrature rules on the reference triangle (0,0),(1,0),(0,1).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Cartesian reference coordinates.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to 1/2, the reference area.
    pub weights: Vec<f64>,
    /// Exactness degree.
    pub degree: usize,
}

pub const DEFAULT_QUAD_DEGREE: usize = 6;

struct Builder {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

// Orbits are given in barycentric coordinates with weights normalized to 1.
impl Builder {
    fn new() -> Self {
        Builder {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn push(&mut self, l: [f64; 3], w: f64) {
        // (l1, l2) are the Cartesian coordinates x, y.
        self.points.push([l[1], l[2]]);
        self.weights.push(0.5 * w);
    }

    fn centroid(mut self, w: f64) -> Self {
        let t = 1.0 / 3.0;
        self.push([t, t, t], w);
        self
    }

    fn orbit3(mut self, a: f64, w: f64) -> Self {
        let b = 1.0 - 2.0 * a;
        self.push([b, a, a], w);
        self.push([a, b, a], w);
        self.push([a, a, b], w);
        self
    }

    fn orbit6(mut self, a: f64, b: f64, w: f64) -> Self {
        let c = 1.0 - a - b;
        for l in [[a, b, c], [b, a, c], [c, a, b], [a, c, b], [b, c, a], [c, b, a]] {
            self.push(l, w);
        }
        self
    }

    fn finish(self, degree: usize) -> QuadRule {
        QuadRule {
            points: self.points,
            weights: self.weights,
            degree,
        }
    }
}

/// Smallest tabulated positive-weight rule exact to at least `degree`.
///
/// Requesting degree 3 returns the 6-point degree-4 rule.
pub fn quad_rule(degree: usize) -> Result<QuadRule> {
    let rule = match degree {
        1 => Builder::new().centroid(1.0).finish(1),
        2 => Builder::new().orbit3(1.0 / 6.0, 1.0 / 3.0).finish(2),
        3 | 4 => Builder::new()
            .orbit3(0.445_948_490_915_964_886_318_329_253_883, 0.223_381_589_678_011_465_695_007_008_433)
            .orbit3(0.091_576_213_509_770_743_459_571_463_402_2, 0.109_951_743_655_321_867_638_326_324_900)
            .finish(4),
        5 => Builder::new()
            .centroid(0.225)
            .orbit3(0.470_142_064_105_115_089_770_441_209_513, 0.132_394_152_788_506_180_737_649_387_833)
            .orbit3(0.101_286_507_323_456_338_800_987_361_915, 0.125_939_180_544_827_152_595_683_945_500)
            .finish(5),
        6 => Builder::new()
            .orbit3(0.249_286_745_170_910_421_291_638_553_107, 0.116_786_275_726_379_366_025_289_611_386)
            .orbit3(0.063_089_014_491_502_228_340_331_602_870_8, 0.050_844_906_370_206_816_920_936_809_106_9)
            .orbit6(
                0.053_145_049_844_816_947_353_249_671_631_4,
                0.310_352_451_033_784_405_416_607_733_957,
                0.082_851_075_618_373_575_193_553_456_420_4,
            )
            .finish(6),
        _ => {
            return Err(Error::config(
                "mesh.quad_degree",
                format!("unsupported quadrature degree {degree} (supported: 1..=6)"),
            ))
        }
    };
    Ok(rule)
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}
