//! Built-in benchmark problems on the unit square.

use std::str::FromStr;
use std::sync::Arc;

use super::{
    manufactured, ExactSolution, Poly2, ProblemData, ScalarField, TensorField, VectorField,
};
use crate::error::{Error, Result};
use crate::mesh::Rectangle;
use crate::scalar::{Point, Real};

/// Named benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `A = I`, `u = 0`, `γ = 1`, `c = sin(πx) sin(πy)`.
    PureDiffusion,
    /// `A = εI`, `u = (1, 1)/√2`, `γ = 1`.
    AdvectionDominated { epsilon: f64 },
    /// `A = I` left of `x = 1/2`, `A = 0` right of it, `u = (0, 1)`.
    DegenerateInterface,
    /// `A = I`, `u = (1, 2)`, `γ = 1`, `c` a global polynomial of the degree.
    PolynomialExactness { degree: usize },
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

impl Builtin {
    pub const NAMES: [&'static str; 4] = [
        "pure_diffusion",
        "advection_dominated",
        "degenerate_interface",
        "polynomial_exactness",
    ];

    pub fn problem<T: Real>(&self) -> ProblemData<T> {
        match *self {
            Builtin::PureDiffusion => pure_diffusion(),
            Builtin::AdvectionDominated { epsilon } => advection_dominated(T::lit(epsilon)),
            Builtin::DegenerateInterface => degenerate_interface(),
            Builtin::PolynomialExactness { degree } => polynomial_exactness(degree),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Accepts `name` or `name(arg)`, e.g. `polynomial_exactness(2)` or
    /// `advection_dominated(1e-4)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once('(') {
            Some((n, rest)) => {
                let arg = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidArgument(format!("malformed problem name `{s}`")))?;
                (n.trim().replace('-', "_"), Some(arg.trim().to_string()))
            }
            None => (s.replace('-', "_"), None),
        };
        let bad = |what: &str| Error::InvalidArgument(format!("invalid {what} in `{s}`"));
        match (name.as_str(), arg) {
            ("pure_diffusion", None) => Ok(Builtin::PureDiffusion),
            ("degenerate_interface", None) => Ok(Builtin::DegenerateInterface),
            ("advection_dominated", None) => Ok(Builtin::AdvectionDominated {
                epsilon: DEFAULT_EPSILON,
            }),
            ("advection_dominated", Some(a)) => {
                let epsilon: f64 = a.parse().map_err(|_| bad("epsilon"))?;
                if !(epsilon >= 0.0) {
                    return Err(bad("epsilon"));
                }
                Ok(Builtin::AdvectionDominated { epsilon })
            }
            ("polynomial_exactness", Some(a)) => {
                let degree: usize = a.parse().map_err(|_| bad("degree"))?;
                Ok(Builtin::PolynomialExactness { degree })
            }
            ("polynomial_exactness", None) => Ok(Builtin::PolynomialExactness { degree: 1 }),
            _ => Err(Error::InvalidArgument(format!("unknown problem `{s}`"))),
        }
    }
}

/// Looks a benchmark up by name.
pub fn builtin_problem<T: Real>(name: &str) -> Result<ProblemData<T>> {
    Ok(name.parse::<Builtin>()?.problem())
}

fn near<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() <= T::lit(1e-9)
}

fn pure_diffusion<T: Real>() -> ProblemData<T> {
    let pi = T::PI();
    let exact = ExactSolution {
        value: ScalarField::new(move |x: Point<T>| (pi * x[0]).sin() * (pi * x[1]).sin()),
        gradient: VectorField::new(move |x: Point<T>| {
            [
                pi * (pi * x[0]).cos() * (pi * x[1]).sin(),
                pi * (pi * x[0]).sin() * (pi * x[1]).cos(),
            ]
        }),
        hessian: TensorField::new(move |x: Point<T>| {
            let (sx, cx) = ((pi * x[0]).sin(), (pi * x[0]).cos());
            let (sy, cy) = ((pi * x[1]).sin(), (pi * x[1]).cos());
            let p2 = pi * pi;
            [[-p2 * sx * sy, p2 * cx * cy], [p2 * cx * cy, -p2 * sx * sy]]
        }),
    };
    // Neumann on the top edge, Dirichlet elsewhere.
    manufactured(
        "pure_diffusion",
        Rectangle::unit(),
        None,
        TensorField::isotropic(T::one()),
        VectorField::constant([T::zero(); 2]),
        ScalarField::constant(T::zero()),
        ScalarField::constant(T::one()),
        exact,
        Arc::new(|x: Point<T>, _| !near(x[1], T::one())),
    )
}

fn advection_dominated<T: Real>(epsilon: T) -> ProblemData<T> {
    let pi = T::PI();
    let s = T::FRAC_1_SQRT_2();
    let half = T::half();
    // c = sin(πx) cos(πy) / 2 + x y
    let exact = ExactSolution {
        value: ScalarField::new(move |x: Point<T>| {
            half * (pi * x[0]).sin() * (pi * x[1]).cos() + x[0] * x[1]
        }),
        gradient: VectorField::new(move |x: Point<T>| {
            [
                half * pi * (pi * x[0]).cos() * (pi * x[1]).cos() + x[1],
                -half * pi * (pi * x[0]).sin() * (pi * x[1]).sin() + x[0],
            ]
        }),
        hessian: TensorField::new(move |x: Point<T>| {
            let (sx, cx) = ((pi * x[0]).sin(), (pi * x[0]).cos());
            let (sy, cy) = ((pi * x[1]).sin(), (pi * x[1]).cos());
            let p2 = half * pi * pi;
            let xy = -p2 * cx * sy + T::one();
            [[-p2 * sx * cy, xy], [xy, -p2 * sx * cy]]
        }),
    };
    let mut p = manufactured(
        "advection_dominated",
        Rectangle::unit(),
        None,
        TensorField::isotropic(epsilon),
        VectorField::constant([s, s]),
        ScalarField::constant(T::zero()),
        ScalarField::constant(T::one()),
        exact,
        Arc::new(|_, _| true),
    );
    p.name = format!("advection_dominated({})", epsilon);
    p
}

fn degenerate_interface<T: Real>() -> ProblemData<T> {
    let pi = T::PI();
    let half = T::half();
    let two_pi = T::two() * pi;
    // Left (diffusive) branch: c = 2 + cos(2πx) sin(πy) / 2, whose normal
    // derivative vanishes on x = 1/2.
    let left = ExactSolution {
        value: ScalarField::new(move |x: Point<T>| {
            T::two() + half * (two_pi * x[0]).cos() * (pi * x[1]).sin()
        }),
        gradient: VectorField::new(move |x: Point<T>| {
            [
                -pi * (two_pi * x[0]).sin() * (pi * x[1]).sin(),
                half * pi * (two_pi * x[0]).cos() * (pi * x[1]).cos(),
            ]
        }),
        hessian: TensorField::new(move |x: Point<T>| {
            let (s2, c2) = ((two_pi * x[0]).sin(), (two_pi * x[0]).cos());
            let (sy, cy) = ((pi * x[1]).sin(), (pi * x[1]).cos());
            let p2 = pi * pi;
            let xy = -p2 * s2 * cy;
            [[-T::two() * p2 * c2 * sy, xy], [xy, -half * p2 * c2 * sy]]
        }),
    };
    // Right (hyperbolic) branch: c = (1 + x y) / 2.
    let right = ExactSolution {
        value: ScalarField::new(move |x: Point<T>| half * (T::one() + x[0] * x[1])),
        gradient: VectorField::new(move |x: Point<T>| [half * x[1], half * x[0]]),
        hessian: TensorField::constant([[T::zero(), half], [half, T::zero()]]),
    };
    let exact = ExactSolution {
        value: ScalarField::piecewise(vec![left.value, right.value]),
        gradient: VectorField::piecewise(vec![left.gradient, right.gradient]),
        hessian: TensorField::piecewise(vec![left.hessian, right.hessian]),
    };
    manufactured(
        "degenerate_interface",
        Rectangle::unit(),
        Some(Arc::new(move |x: Point<T>| usize::from(x[0] > half))),
        TensorField::piecewise(vec![TensorField::isotropic(T::one()), TensorField::isotropic(T::zero())]),
        VectorField::constant([T::zero(), T::one()]),
        ScalarField::constant(T::zero()),
        ScalarField::constant(T::one()),
        exact,
        Arc::new(|_, _| true),
    )
}

/// The global polynomial used by `polynomial_exactness(ℓ)`:
/// `1 + x + 2y + Σ_{k=2}^{ℓ} (x^k - 2 x^{k-1} y + y^k) / k`.
pub fn exactness_polynomial<T: Real>(degree: usize) -> Poly2<T> {
    let mut terms = vec![((0, 0), T::one())];
    if degree >= 1 {
        terms.push(((1, 0), T::one()));
        terms.push(((0, 1), T::two()));
    }
    for k in 2..=degree {
        let inv = T::one() / T::from_count(k);
        terms.push(((k, 0), inv));
        terms.push(((k - 1, 1), -T::two() * inv));
        terms.push(((0, k), inv));
    }
    Poly2::new(terms)
}

fn polynomial_exactness<T: Real>(degree: usize) -> ProblemData<T> {
    let poly = Arc::new(exactness_polynomial::<T>(degree));
    let (pv, pg, ph) = (poly.clone(), poly.clone(), poly);
    let exact = ExactSolution {
        value: ScalarField::new(move |x| pv.value(x)),
        gradient: VectorField::new(move |x| pg.gradient(x)),
        hessian: TensorField::new(move |x| ph.hessian(x)),
    };
    // Dirichlet on x = 0 (inflow) and y = 1 (outflow); Neumann on y = 0
    // (inflow) and x = 1 (outflow), so every boundary class occurs.
    let mut p = manufactured(
        "polynomial_exactness",
        Rectangle::unit(),
        None,
        TensorField::isotropic(T::one()),
        VectorField::constant([T::one(), T::two()]),
        ScalarField::constant(T::zero()),
        ScalarField::constant(T::one()),
        exact,
        Arc::new(|x: Point<T>, _| near(x[0], T::zero()) || near(x[1], T::one())),
    );
    p.name = format!("polynomial_exactness({degree})");
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Residual of the PDE applied to the exact solution, with all
    /// derivatives taken by central differences of the value alone.
    fn fd_residual(p: &ProblemData<f64>, x: Point<f64>) -> f64 {
        let h = 1e-4;
        let r = p.region_of(x);
        let c = |y: Point<f64>| p.exact.as_ref().unwrap().value.branch(r)(y);
        let a = p.a_at(x, r);
        let cxx = (c([x[0] + h, x[1]]) - 2.0 * c(x) + c([x[0] - h, x[1]])) / (h * h);
        let cyy = (c([x[0], x[1] + h]) - 2.0 * c(x) + c([x[0], x[1] - h])) / (h * h);
        let cxy = (c([x[0] + h, x[1] + h]) - c([x[0] + h, x[1] - h]) - c([x[0] - h, x[1] + h])
            + c([x[0] - h, x[1] - h]))
            / (4.0 * h * h);
        let cx = (c([x[0] + h, x[1]]) - c([x[0] - h, x[1]])) / (2.0 * h);
        let cy = (c([x[0], x[1] + h]) - c([x[0], x[1] - h])) / (2.0 * h);
        let div_flux = a[0][0] * cxx + 2.0 * a[0][1] * cxy + a[1][1] * cyy;
        let u = p.u_at(x, r);
        -div_flux + u[0] * cx + u[1] * cy + (p.div_u_at(x, r) + p.gamma_at(x, r)) * c(x) - p.g_at(x, r)
    }

    fn all() -> Vec<ProblemData<f64>> {
        vec![
            builtin_problem("pure_diffusion").unwrap(),
            builtin_problem("advection_dominated").unwrap(),
            builtin_problem("degenerate_interface").unwrap(),
            builtin_problem("polynomial_exactness(1)").unwrap(),
            builtin_problem("polynomial_exactness(3)").unwrap(),
        ]
    }

    #[test]
    fn source_matches_finite_difference_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in all() {
            for _ in 0..100 {
                let x: [f64; 2] = [rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)];
                if (x[0] - 0.5).abs() < 1e-3 {
                    continue;
                }
                let res = fd_residual(&p, x);
                assert!(res.abs() < 1e-6, "{}: residual {res:e} at {x:?}", p.name);
            }
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for p in all() {
            for _ in 0..100 {
                let x = [rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)];
                let r = p.region_of(x);
                let u = |y| p.u_at(y, r);
                let div = (u([x[0] + h, x[1]])[0] - u([x[0] - h, x[1]])[0]) / (2.0 * h)
                    + (u([x[0], x[1] + h])[1] - u([x[0], x[1] - h])[1]) / (2.0 * h);
                assert!((div - p.div_u_at(x, r)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pure_diffusion_source() {
        let p: ProblemData<f64> = builtin_problem("pure_diffusion").unwrap();
        let pi = std::f64::consts::PI;
        for x in [[0.3, 0.4], [0.9, 0.1]] {
            let expected = (2.0 * pi * pi + 1.0) * (pi * x[0]).sin() * (pi * x[1]).sin();
            assert!((p.g_at(x, 0) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_exactness_source() {
        let p: ProblemData<f64> = builtin_problem("polynomial_exactness(1)").unwrap();
        for x in [[0.3, 0.4], [0.9, 0.1]] {
            assert!((p.g_at(x, 0) - (6.0 + x[0] + 2.0 * x[1])).abs() < 1e-14);
            assert!((p.exact.as_ref().unwrap().value.branch(0)(x) - (1.0 + x[0] + 2.0 * x[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn interface_velocity_is_tangent() {
        let p: ProblemData<f64> = builtin_problem("degenerate_interface").unwrap();
        for y in [0.0, 0.25, 0.6, 1.0] {
            for r in 0..2 {
                assert_eq!(p.u_at([0.5, y], r)[0], 0.0);
            }
        }
        // Points on the interface belong to the lower region.
        assert_eq!(p.region_of([0.5, 0.3]), 0);
        assert_eq!(p.region_of([0.5 + 1e-12, 0.3]), 1);
        // The diffusive branch has zero normal flux on the interface.
        let grad = p.exact.as_ref().unwrap().gradient.branch(0)([0.5, 0.37]);
        assert!(grad[0].abs() < 1e-14);
    }

    #[test]
    fn parse_names() {
        assert_eq!("pure_diffusion".parse::<Builtin>().unwrap(), Builtin::PureDiffusion);
        assert_eq!(
            "advection_dominated(1e-4)".parse::<Builtin>().unwrap(),
            Builtin::AdvectionDominated { epsilon: 1e-4 }
        );
        assert_eq!(
            "polynomial-exactness(2)".parse::<Builtin>().unwrap(),
            Builtin::PolynomialExactness { degree: 2 }
        );
        assert!(matches!(
            "no_such".parse::<Builtin>(),
            Err(Error::InvalidArgument(_))
        ));
        assert!(builtin_problem::<f64>("advection_dominated(-1)").is_err());
    }
}
