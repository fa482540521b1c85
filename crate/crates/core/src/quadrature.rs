//! Symmetric quadrature rules on triangles.

/// Quadrature point in barycentric coordinates with a weight normalised so
/// that the weights of a rule sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Available rules, named by their polynomial degree of exactness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rule {
    /// 6 points.
    #[default]
    Degree4,
    /// 12 points.
    Degree6,
}

impl Rule {
    pub fn points(self) -> Vec<QuadPoint> {
        match self {
            Rule::Degree4 => {
                let mut p = Vec::with_capacity(6);
                orbit3(&mut p, 0.445_948_490_915_965, 0.223_381_589_678_011);
                orbit3(&mut p, 0.091_576_213_509_771, 0.109_951_743_655_322);
                p
            }
            Rule::Degree6 => {
                let mut p = Vec::with_capacity(12);
                orbit3(&mut p, 0.249_286_745_170_910, 0.116_786_275_726_379);
                orbit3(&mut p, 0.063_089_014_491_502, 0.050_844_906_370_207);
                orbit6(
                    &mut p,
                    0.053_145_049_844_817,
                    0.310_352_451_033_784,
                    0.082_851_075_618_374,
                );
                p
            }
        }
    }
}

/// The three points `(a, a, 1−2a)` and permutations.
fn orbit3(out: &mut Vec<QuadPoint>, a: f64, weight: f64) {
    let b = 1.0 - 2.0 * a;
    for bary in [[a, a, b], [a, b, a], [b, a, a]] {
        out.push(QuadPoint { bary, weight });
    }
}

/// The six permutations of `(a, b, 1−a−b)`.
fn orbit6(out: &mut Vec<QuadPoint>, a: f64, b: f64, weight: f64) {
    let c = 1.0 - a - b;
    for bary in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        out.push(QuadPoint { bary, weight });
    }
}

/// Maps barycentric coordinates to a point of the triangle.
pub fn to_physical(p: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}
