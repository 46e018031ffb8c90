//! Problems defined by expressions.
//!
//! Variables: `x`, `y`, `nx`, `ny` (boundary normal, zero elsewhere), `eps`,
//! `pi`. Functions: `sin cos tan asin acos atan sinh cosh tanh exp ln log10
//! sqrt abs floor ceil`, `pow(a, b)`, `atan2(y, x)`, `min(a, b)`, `max(a, b)`,
//! plus evalexpr's `math::*` builtins. Integer literals use integer
//! arithmetic, so write `0.5` rather than `1/2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use evalexpr::{build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};
use ncfdg::mesh::Rectangle;
use ncfdg::problem::{ExactSolution, FluxField, ProblemData, ScalarField, TensorField, VectorField};
use ncfdg::{Error, Point, Result};

type V = Value<DefaultNumericTypes>;

struct PointContext {
    x: V,
    y: V,
    nx: V,
    ny: V,
    eps: V,
    pi: V,
}

impl PointContext {
    fn new(p: Point<f64>, n: Point<f64>, eps: f64) -> Self {
        Self {
            x: V::Float(p[0]),
            y: V::Float(p[1]),
            nx: V::Float(n[0]),
            ny: V::Float(n[1]),
            eps: V::Float(eps),
            pi: V::Float(std::f64::consts::PI),
        }
    }
}

fn two_args(arg: &V) -> EvalexprResult<(f64, f64), DefaultNumericTypes> {
    let t = arg.as_fixed_len_tuple(2)?;
    Ok((t[0].as_number()?, t[1].as_number()?))
}

impl Context for PointContext {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&V> {
        match identifier {
            "x" => Some(&self.x),
            "y" => Some(&self.y),
            "nx" => Some(&self.nx),
            "ny" => Some(&self.ny),
            "eps" => Some(&self.eps),
            "pi" => Some(&self.pi),
            _ => None,
        }
    }

    fn call_function(&self, identifier: &str, argument: &V) -> EvalexprResult<V, DefaultNumericTypes> {
        let unary: Option<fn(f64) -> f64> = match identifier {
            "sin" => Some(f64::sin),
            "cos" => Some(f64::cos),
            "tan" => Some(f64::tan),
            "asin" => Some(f64::asin),
            "acos" => Some(f64::acos),
            "atan" => Some(f64::atan),
            "sinh" => Some(f64::sinh),
            "cosh" => Some(f64::cosh),
            "tanh" => Some(f64::tanh),
            "exp" => Some(f64::exp),
            "ln" => Some(f64::ln),
            "log10" => Some(f64::log10),
            "sqrt" => Some(f64::sqrt),
            "abs" => Some(f64::abs),
            "floor" => Some(f64::floor),
            "ceil" => Some(f64::ceil),
            _ => None,
        };
        if let Some(f) = unary {
            return Ok(V::Float(f(argument.as_number()?)));
        }
        let binary: Option<fn(f64, f64) -> f64> = match identifier {
            "pow" => Some(f64::powf),
            "atan2" => Some(f64::atan2),
            "min" => Some(f64::min),
            "max" => Some(f64::max),
            _ => None,
        };
        match binary {
            Some(f) => {
                let (a, b) = two_args(argument)?;
                Ok(V::Float(f(a, b)))
            }
            None => Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string())),
        }
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Err(EvalexprError::ContextNotMutable)
    }
}

/// A compiled expression in `x`, `y` (and optionally `nx`, `ny`).
#[derive(Clone)]
pub struct Expr {
    source: String,
    node: Arc<Node<DefaultNumericTypes>>,
    eps: f64,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str, eps: f64) -> Result<Self> {
        let node = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| Error::InvalidArgument(format!("cannot parse `{source}`: {e}")))?;
        let expr = Self {
            source: source.to_string(),
            node: Arc::new(node),
            eps,
        };
        // Catch unknown names and type errors now rather than mid-assembly.
        expr.try_eval([0.3, 0.7], [0.0, 0.0])?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether the value can vary in space.
    pub fn depends_on_position(&self) -> bool {
        self.node.iter_variable_identifiers().any(|v| v == "x" || v == "y")
    }

    pub fn try_eval(&self, p: Point<f64>, n: Point<f64>) -> Result<f64> {
        let ctx = PointContext::new(p, n, self.eps);
        match self.node.eval_with_context(&ctx) {
            Ok(V::Float(v)) => Ok(v),
            Ok(V::Int(v)) => Ok(v as f64),
            Ok(V::Boolean(b)) => Ok(if b { 1.0 } else { 0.0 }),
            Ok(other) => Err(Error::InvalidArgument(format!("`{}` evaluates to {other}, not a number", self.source))),
            Err(e) => Err(Error::InvalidArgument(format!("cannot evaluate `{}`: {e}", self.source))),
        }
    }

    /// Evaluates; expressions are checked at parse time, so failures here
    /// come from data (e.g. a domain error) and yield NaN, which assembly
    /// reports as a non-finite entry.
    pub fn eval(&self, p: Point<f64>) -> f64 {
        self.try_eval(p, [0.0, 0.0]).unwrap_or(f64::NAN)
    }

    pub fn eval_on_boundary(&self, p: Point<f64>, n: Point<f64>) -> f64 {
        self.try_eval(p, n).unwrap_or(f64::NAN)
    }
}

const STEP1: f64 = 1e-5;
const STEP2: f64 = 1e-4;

fn shifted(p: Point<f64>, dx: f64, dy: f64) -> Point<f64> {
    [p[0] + dx, p[1] + dy]
}

/// Central-difference gradient.
pub fn fd_gradient(f: &Expr, p: Point<f64>) -> Point<f64> {
    let h = STEP1;
    [
        (f.eval(shifted(p, h, 0.0)) - f.eval(shifted(p, -h, 0.0))) / (2.0 * h),
        (f.eval(shifted(p, 0.0, h)) - f.eval(shifted(p, 0.0, -h))) / (2.0 * h),
    ]
}

/// Central-difference Hessian.
pub fn fd_hessian(f: &Expr, p: Point<f64>) -> [[f64; 2]; 2] {
    let h = STEP2;
    let c = f.eval(p);
    let xx = (f.eval(shifted(p, h, 0.0)) - 2.0 * c + f.eval(shifted(p, -h, 0.0))) / (h * h);
    let yy = (f.eval(shifted(p, 0.0, h)) - 2.0 * c + f.eval(shifted(p, 0.0, -h))) / (h * h);
    let xy = (f.eval(shifted(p, h, h)) - f.eval(shifted(p, h, -h)) - f.eval(shifted(p, -h, h))
        + f.eval(shifted(p, -h, -h)))
        / (4.0 * h * h);
    [[xx, xy], [xy, yy]]
}

/// Keys understood by [`custom_problem`].
pub const KEYS: [&str; 19] = [
    "a", "a_xx", "a_xy", "a_yy", "u_x", "u_y", "div_u", "gamma", "c", "c_x", "c_y", "c_xx", "c_xy", "c_yy", "g",
    "kappa", "chi_minus", "chi_plus", "dirichlet",
];

struct Exprs<'a> {
    map: &'a BTreeMap<String, String>,
    eps: f64,
}

impl Exprs<'_> {
    fn get(&self, key: &str) -> Result<Option<Expr>> {
        self.map.get(key).map(|s| Expr::parse(s, self.eps)).transpose()
    }

    fn or(&self, key: &str, default: &str) -> Result<Expr> {
        Ok(self.get(key)?.unwrap_or(Expr::parse(default, self.eps)?))
    }
}

/// Builds a problem on the unit square from expressions keyed by [`KEYS`].
///
/// With `c` given, the problem is manufactured from it: `g`, the Dirichlet
/// datum and the Neumann fluxes follow by substitution, and derivatives not
/// supplied as `c_x` ... `c_yy` are taken by central differences. Without
/// `c`, `g` and `kappa` are required and there is no exact solution.
pub fn custom_problem(exprs: &BTreeMap<String, String>, eps: f64) -> Result<ProblemData<f64>> {
    if let Some(k) = exprs.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("unknown expression key `{k}` (known: {})", KEYS.join(", "))));
    }
    let e = Exprs { map: exprs, eps };
    let (axx, axy, ayy) = match e.get("a")? {
        Some(a) => {
            if ["a_xx", "a_xy", "a_yy"].iter().any(|k| exprs.contains_key(*k)) {
                return Err(Error::InvalidArgument("give either `a` or `a_xx`, `a_xy`, `a_yy`".into()));
            }
            (a.clone(), Expr::parse("0.0", eps)?, a)
        }
        None => (e.or("a_xx", "0.0")?, e.or("a_xy", "0.0")?, e.or("a_yy", "0.0")?),
    };
    let ux = e.or("u_x", "0.0")?;
    let uy = e.or("u_y", "0.0")?;
    let gamma = e.or("gamma", "0.0")?;

    let a = {
        let (axx, axy, ayy) = (axx.clone(), axy.clone(), ayy.clone());
        TensorField::new(move |p: Point<f64>| {
            let xy = axy.eval(p);
            [[axx.eval(p), xy], [xy, ayy.eval(p)]]
        })
    };
    let variable_a = [&axx, &axy, &ayy].iter().any(|f| f.depends_on_position());
    let div_a = variable_a.then(|| {
        let (axx, axy, ayy) = (axx.clone(), axy.clone(), ayy.clone());
        VectorField::new(move |p: Point<f64>| {
            let (gxx, gxy, gyy) = (fd_gradient(&axx, p), fd_gradient(&axy, p), fd_gradient(&ayy, p));
            [gxx[0] + gxy[1], gxy[0] + gyy[1]]
        })
    });
    let u = {
        let (ux, uy) = (ux.clone(), uy.clone());
        VectorField::new(move |p: Point<f64>| [ux.eval(p), uy.eval(p)])
    };
    let div_u = match e.get("div_u")? {
        Some(d) => ScalarField::new(move |p: Point<f64>| d.eval(p)),
        None => {
            let (ux, uy) = (ux.clone(), uy.clone());
            ScalarField::new(move |p: Point<f64>| fd_gradient(&ux, p)[0] + fd_gradient(&uy, p)[1])
        }
    };
    let dirichlet = match e.get("dirichlet")? {
        Some(d) => Arc::new(move |p: Point<f64>, n: Point<f64>| d.eval_on_boundary(p, n) != 0.0) as _,
        None => Arc::new(|_: Point<f64>, _: Point<f64>| true) as _,
    };

    let exact = match e.get("c")? {
        Some(c) => {
            let gradient = match (e.get("c_x")?, e.get("c_y")?) {
                (Some(cx), Some(cy)) => VectorField::new(move |p: Point<f64>| [cx.eval(p), cy.eval(p)]),
                (None, None) => {
                    let c = c.clone();
                    VectorField::new(move |p: Point<f64>| fd_gradient(&c, p))
                }
                _ => return Err(Error::InvalidArgument("give both `c_x` and `c_y` or neither".into())),
            };
            let hessian = match (e.get("c_xx")?, e.get("c_xy")?, e.get("c_yy")?) {
                (Some(xx), Some(xy), Some(yy)) => TensorField::new(move |p: Point<f64>| {
                    let m = xy.eval(p);
                    [[xx.eval(p), m], [m, yy.eval(p)]]
                }),
                (None, None, None) => {
                    let c = c.clone();
                    TensorField::new(move |p: Point<f64>| fd_hessian(&c, p))
                }
                _ => return Err(Error::InvalidArgument("give all of `c_xx`, `c_xy`, `c_yy` or none".into())),
            };
            Some(ExactSolution {
                value: ScalarField::new(move |p: Point<f64>| c.eval(p)),
                gradient,
                hessian,
            })
        }
        None => None,
    };

    let (g, kappa, chi_minus, chi_plus) = match &exact {
        Some(ex) => {
            for k in ["g", "kappa", "chi_minus", "chi_plus"] {
                if exprs.contains_key(k) {
                    return Err(Error::InvalidArgument(format!("`{k}` is derived from `c` and cannot be given with it")));
                }
            }
            manufactured_data(ex, &a, div_a.as_ref(), &u, &div_u, &gamma)
        }
        None => {
            let g = e.get("g")?.ok_or_else(|| Error::InvalidArgument("give `c`, or `g` and `kappa`".into()))?;
            let kappa = e.get("kappa")?.ok_or_else(|| Error::InvalidArgument("give `c`, or `g` and `kappa`".into()))?;
            let chi_m = e.or("chi_minus", "0.0")?;
            let chi_p = e.or("chi_plus", "0.0")?;
            (
                ScalarField::new(move |p: Point<f64>| g.eval(p)),
                ScalarField::new(move |p: Point<f64>| kappa.eval(p)),
                FluxField::new(move |p: Point<f64>, n: Point<f64>| chi_m.eval_on_boundary(p, n)),
                FluxField::new(move |p: Point<f64>, n: Point<f64>| chi_p.eval_on_boundary(p, n)),
            )
        }
    };

    Ok(ProblemData {
        name: "custom".into(),
        domain: Rectangle::unit(),
        regions: None,
        a,
        div_a,
        u,
        div_u,
        gamma: ScalarField::new(move |p: Point<f64>| gamma.eval(p)),
        g,
        kappa,
        chi_minus,
        chi_plus,
        dirichlet,
        exact,
    })
}

type Data = (ScalarField<f64>, ScalarField<f64>, FluxField<f64>, FluxField<f64>);

fn manufactured_data(
    ex: &ExactSolution<f64>,
    a: &TensorField<f64>,
    div_a: Option<&VectorField<f64>>,
    u: &VectorField<f64>,
    div_u: &ScalarField<f64>,
    gamma: &Expr,
) -> Data {
    let (c, cg, ch) = (ex.value.branch_arc(0), ex.gradient.branch_arc(0), ex.hessian.branch_arc(0));
    let (af, uf, du) = (a.branch_arc(0), u.branch_arc(0), div_u.branch_arc(0));
    let da = div_a.map(|d| d.branch_arc(0));
    let gm = gamma.clone();
    let g = ScalarField::new(move |p: Point<f64>| {
        let (am, h, grad, uu) = (af(p), ch(p), cg(p), uf(p));
        let mut div_flux = am[0][0] * h[0][0] + 2.0 * am[0][1] * h[0][1] + am[1][1] * h[1][1];
        if let Some(d) = &da {
            let dv = d(p);
            div_flux += dv[0] * grad[0] + dv[1] * grad[1];
        }
        -div_flux + uu[0] * grad[0] + uu[1] * grad[1] + (du(p) + gm.eval(p)) * c(p)
    });
    let (af, uf, c2, cg2) = (a.branch_arc(0), u.branch_arc(0), ex.value.branch_arc(0), ex.gradient.branch_arc(0));
    let chi_minus = FluxField::new(move |p: Point<f64>, n: Point<f64>| {
        let (am, grad, uu, cv) = (af(p), cg2(p), uf(p), c2(p));
        let flux = [am[0][0] * grad[0] + am[0][1] * grad[1], am[1][0] * grad[0] + am[1][1] * grad[1]];
        (uu[0] * cv - flux[0]) * n[0] + (uu[1] * cv - flux[1]) * n[1]
    });
    let (af, cg3) = (a.branch_arc(0), ex.gradient.branch_arc(0));
    let chi_plus = FluxField::new(move |p: Point<f64>, n: Point<f64>| {
        let (am, grad) = (af(p), cg3(p));
        -((am[0][0] * grad[0] + am[0][1] * grad[1]) * n[0] + (am[1][0] * grad[0] + am[1][1] * grad[1]) * n[1])
    });
    (g, ex.value.clone(), chi_minus, chi_plus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn evaluates_with_functions_and_variables() {
        let e = Expr::parse("sin(pi * x) + pow(y, 2.0) + eps + max(nx, 0.5)", 0.25).unwrap();
        let v = e.eval_on_boundary([0.5, 3.0], [1.0, 0.0]);
        assert!((v - (1.0 + 9.0 + 0.25 + 1.0)).abs() < 1e-14);
        assert!(e.depends_on_position());
        assert!(!Expr::parse("2.0 * eps", 1.0).unwrap().depends_on_position());
        assert!((Expr::parse("math::exp(1.0)", 0.0).unwrap().eval([0.0, 0.0]) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_expressions() {
        assert!(Expr::parse("x +", 0.0).is_err());
        assert!(Expr::parse("foo(x)", 0.0).is_err());
        assert!(Expr::parse("z", 0.0).is_err());
        assert!(Expr::parse("\"text\"", 0.0).is_err());
    }

    #[test]
    fn finite_differences_are_accurate() {
        let e = Expr::parse("exp(x) * sin(y)", 0.0).unwrap();
        let p = [0.3, 0.8];
        let g = fd_gradient(&e, p);
        let h = fd_hessian(&e, p);
        let (ex, s, c) = (0.3f64.exp(), 0.8f64.sin(), 0.8f64.cos());
        assert!((g[0] - ex * s).abs() < 1e-9 && (g[1] - ex * c).abs() < 1e-9);
        assert!((h[0][0] - ex * s).abs() < 1e-6 && (h[0][1] - ex * c).abs() < 1e-6 && (h[1][1] + ex * s).abs() < 1e-6);
    }

    #[test]
    fn manufactured_source_matches_hand_computation() {
        // c = x² y, A = (1 + x) I, u = (y, 0), γ = 2:
        // div(A∇c) = ∂x((1+x) 2xy) + ∂y((1+x) x²) = 2y + 4xy
        // g = −(2y + 4xy) + y·2xy + 2 x² y.
        let p = custom_problem(
            &map(&[
                ("a", "1.0 + x"),
                ("u_x", "y"),
                ("gamma", "2.0"),
                ("c", "x * x * y"),
                ("c_x", "2.0 * x * y"),
                ("c_y", "x * x"),
                ("c_xx", "2.0 * y"),
                ("c_xy", "2.0 * x"),
                ("c_yy", "0.0"),
            ]),
            0.0,
        )
        .unwrap();
        let (x, y) = (0.4, 0.7);
        let expected = -(2.0 * y + 4.0 * x * y) + y * 2.0 * x * y + 2.0 * x * x * y;
        assert!((p.g_at([x, y], 0) - expected).abs() < 1e-8);
        assert!(p.div_a.is_some());
        assert_eq!(p.div_u_at([x, y], 0), 0.0);
        assert_eq!(p.kappa_at([x, y], 0), x * x * y);
    }

    #[test]
    fn key_validation() {
        assert!(custom_problem(&map(&[("c", "x"), ("speed", "1.0")]), 0.0).is_err());
        assert!(custom_problem(&map(&[("a", "1.0"), ("a_xx", "1.0"), ("c", "x")]), 0.0).is_err());
        assert!(custom_problem(&map(&[("g", "1.0")]), 0.0).is_err());
        assert!(custom_problem(&map(&[("c", "x"), ("g", "1.0")]), 0.0).is_err());
        let p = custom_problem(&map(&[("g", "1.0"), ("kappa", "0.0"), ("a", "1.0")]), 0.0).unwrap();
        assert!(p.exact.is_none() && p.div_a.is_none());
    }
}
