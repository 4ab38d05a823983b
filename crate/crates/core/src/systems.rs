//! Registry of the benchmark vector fields with analytic Jacobians.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, StateVector};

/// Names accepted by [`lookup_system`].
pub const SYSTEM_NAMES: [&str; 7] = [
    "silnikov",
    "lorenz",
    "circle",
    "vanderpol",
    "nosehoover_new",
    "nosehoover_classic",
    "rosenbrock",
];

#[derive(Clone, Copy, Debug, PartialEq)]
enum Model {
    /// x' = y, y' = z, z' = x³ − a²x − y − bz
    Silnikov { a: f64, b: f64 },
    Lorenz { sigma: f64, beta: f64, rho: f64 },
    /// Planar system whose unit circle is a stable limit cycle.
    Circle,
    VanDerPol { mu: f64 },
    /// Thermostat temperature 1 + ε tanh q.
    NoseHooverNew { epsilon: f64 },
    NoseHooverClassic { temperature: f64 },
    /// Linear time-periodic counterexample to frozen-coefficient stability.
    Rosenbrock,
}

/// An immutable, named vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDefinition {
    name: &'static str,
    model: Model,
    parameters: Vec<(&'static str, f64)>,
}

/// Returns the registered system `name` with `overrides` applied to its defaults.
pub fn lookup_system(name: &str, overrides: &[(String, f64)]) -> Result<SystemDefinition> {
    let (name, defaults): (&'static str, Vec<(&'static str, f64)>) = match name {
        "silnikov" => ("silnikov", vec![("a", 1.0), ("b", 0.8)]),
        "lorenz" => ("lorenz", vec![("sigma", 10.0), ("beta", 8.0 / 3.0), ("rho", 28.0)]),
        "circle" => ("circle", vec![]),
        "vanderpol" => ("vanderpol", vec![("mu", 1.0)]),
        "nosehoover_new" => ("nosehoover_new", vec![("epsilon", 0.42)]),
        "nosehoover_classic" => ("nosehoover_classic", vec![("temperature", 1.0)]),
        "rosenbrock" => ("rosenbrock", vec![]),
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    let mut parameters = defaults;
    for (key, value) in overrides {
        let slot = parameters
            .iter_mut()
            .find(|(k, _)| *k == key.as_str())
            .ok_or_else(|| Error::UnknownParameter { system: name.to_string(), key: key.clone() })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteParameter { key: key.clone(), value: *value });
        }
        slot.1 = *value;
    }
    let p = |k: &str| parameters.iter().find(|(n, _)| *n == k).map(|(_, v)| *v).unwrap();
    let model = match name {
        "silnikov" => Model::Silnikov { a: p("a"), b: p("b") },
        "lorenz" => Model::Lorenz { sigma: p("sigma"), beta: p("beta"), rho: p("rho") },
        "circle" => Model::Circle,
        "vanderpol" => Model::VanDerPol { mu: p("mu") },
        "nosehoover_new" => Model::NoseHooverNew { epsilon: p("epsilon") },
        "nosehoover_classic" => Model::NoseHooverClassic { temperature: p("temperature") },
        _ => Model::Rosenbrock,
    };
    Ok(SystemDefinition { name, model, parameters })
}

impl SystemDefinition {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dimension(&self) -> usize {
        match self.model {
            Model::Circle | Model::VanDerPol { .. } | Model::Rosenbrock => 2,
            _ => 3,
        }
    }

    pub fn autonomous(&self) -> bool {
        !matches!(self.model, Model::Rosenbrock)
    }

    pub fn parameters(&self) -> &[(&'static str, f64)] {
        &self.parameters
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    /// A starting state that lies in the basin the registry's examples use.
    pub fn default_seed(&self) -> StateVector {
        match self.model {
            Model::Silnikov { .. } => StateVector::new3(0.1, 0.0, 0.0),
            Model::Lorenz { .. } => StateVector::new3(1.0, 1.0, 1.0),
            Model::Circle => StateVector::new2(2.0, 0.0),
            Model::VanDerPol { .. } => StateVector::new2(0.1, 0.0),
            Model::NoseHooverNew { .. } | Model::NoseHooverClassic { .. } => {
                StateVector::new3(0.0, 1.0, 0.0)
            }
            Model::Rosenbrock => StateVector::new2(1.0, 0.0),
        }
    }

    fn check_dim(&self, y: &StateVector) -> Result<()> {
        if y.dim() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), got: y.dim() });
        }
        Ok(())
    }

    /// The vector field f(y, t).
    pub fn eval_field(&self, y: &StateVector, t: f64) -> Result<StateVector> {
        self.check_dim(y)?;
        Ok(self.field(y, t))
    }

    /// The analytic Jacobian Df(y, t); for the linear Rosenbrock system this is A(t).
    pub fn eval_jacobian(&self, y: &StateVector, t: f64) -> Result<Matrix> {
        self.check_dim(y)?;
        Ok(self.jacobian(y, t))
    }

    pub fn eval_divergence(&self, y: &StateVector, t: f64) -> Result<f64> {
        Ok(self.eval_jacobian(y, t)?.trace())
    }

    /// Unchecked field evaluation; `y` must have the system's dimension.
    pub fn field(&self, y: &StateVector, t: f64) -> StateVector {
        let mut out = StateVector::zeros(self.dimension());
        self.field_into(y.as_slice(), t, out.as_mut_slice());
        out
    }

    /// Slice form of [`field`](Self::field) used by the integrator.
    pub fn field_into(&self, y: &[f64], t: f64, dy: &mut [f64]) {
        match self.model {
            Model::Silnikov { a, b } => {
                dy[0] = y[1];
                dy[1] = y[2];
                dy[2] = y[0] * y[0] * y[0] - a * a * y[0] - y[1] - b * y[2];
            }
            Model::Lorenz { sigma, beta, rho } => {
                dy[0] = sigma * (y[1] - y[0]);
                dy[1] = rho * y[0] - y[1] - y[0] * y[2];
                dy[2] = y[0] * y[1] - beta * y[2];
            }
            Model::Circle => {
                let g = 1.0 - y[0] * y[0] - y[1] * y[1];
                dy[0] = y[1] + y[0] * g;
                dy[1] = -y[0] + y[1] * g;
            }
            Model::VanDerPol { mu } => {
                dy[0] = y[1];
                dy[1] = -y[0] + mu * y[1] * (1.0 - y[0] * y[0]);
            }
            Model::NoseHooverNew { epsilon } => {
                dy[0] = y[1];
                dy[1] = -y[0] - y[2] * y[1];
                dy[2] = y[1] * y[1] - (1.0 + epsilon * y[0].tanh());
            }
            Model::NoseHooverClassic { temperature } => {
                dy[0] = y[1];
                dy[1] = -y[0] - y[2] * y[1];
                dy[2] = y[1] * y[1] - temperature;
            }
            Model::Rosenbrock => {
                let a = rosenbrock_matrix(t);
                dy[0] = a[0][0] * y[0] + a[0][1] * y[1];
                dy[1] = a[1][0] * y[0] + a[1][1] * y[1];
            }
        }
    }

    /// Unchecked Jacobian evaluation.
    pub fn jacobian(&self, y: &StateVector, t: f64) -> Matrix {
        match self.model {
            Model::Silnikov { a, b } => Matrix::from_array3([
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [3.0 * y[0] * y[0] - a * a, -1.0, -b],
            ]),
            Model::Lorenz { sigma, beta, rho } => Matrix::from_array3([
                [-sigma, sigma, 0.0],
                [rho - y[2], -1.0, -y[0]],
                [y[1], y[0], -beta],
            ]),
            Model::Circle => {
                let (x, v) = (y[0], y[1]);
                let g = 1.0 - x * x - v * v;
                Matrix::from_array2([
                    [g - 2.0 * x * x, 1.0 - 2.0 * x * v],
                    [-1.0 - 2.0 * x * v, g - 2.0 * v * v],
                ])
            }
            Model::VanDerPol { mu } => Matrix::from_array2([
                [0.0, 1.0],
                [-1.0 - 2.0 * mu * y[0] * y[1], mu * (1.0 - y[0] * y[0])],
            ]),
            Model::NoseHooverNew { epsilon } => {
                let sech = 1.0 / y[0].cosh();
                Matrix::from_array3([
                    [0.0, 1.0, 0.0],
                    [-1.0, -y[2], -y[1]],
                    [-epsilon * sech * sech, 2.0 * y[1], 0.0],
                ])
            }
            Model::NoseHooverClassic { .. } => Matrix::from_array3([
                [0.0, 1.0, 0.0],
                [-1.0, -y[2], -y[1]],
                [0.0, 2.0 * y[1], 0.0],
            ]),
            Model::Rosenbrock => Matrix::from_array2(rosenbrock_matrix(t)),
        }
    }
}

/// Coefficient matrix A(t) of the Rosenbrock counterexample.
fn rosenbrock_matrix(t: f64) -> [[f64; 2]; 2] {
    let (s, c) = (6.0 * t).sin_cos();
    [
        [-1.0 - 9.0 * c * c + 12.0 * s * c, 12.0 * c * c + 9.0 * s * c],
        [-12.0 * s * s + 9.0 * s * c, -(1.0 + 9.0 * s * s + 12.0 * s * c)],
    ]
}

impl fmt::Display for SystemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.parameters.is_empty() {
            let ps: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", ps.join(", "))?;
        }
        Ok(())
    }
}

/// Serializable description (name and parameters) of a system.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SystemInfo {
    pub name: String,
    pub parameters: serde_json::Map<String, serde_json::Value>,
}

impl From<&SystemDefinition> for SystemInfo {
    fn from(sys: &SystemDefinition) -> Self {
        let parameters = sys
            .parameters
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
            .collect();
        SystemInfo { name: sys.name.to_string(), parameters }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(name: &str) -> SystemDefinition {
        lookup_system(name, &[]).unwrap()
    }

    fn set(name: &str, kv: &[(&str, f64)]) -> SystemDefinition {
        let o: Vec<(String, f64)> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        lookup_system(name, &o).unwrap()
    }

    #[test]
    fn lookup_defaults_and_overrides() {
        let l = sys("lorenz");
        assert_eq!(l.parameter("sigma"), Some(10.0));
        assert_eq!(l.parameter("beta"), Some(8.0 / 3.0));
        assert_eq!(l.parameter("rho"), Some(28.0));
        let s = set("silnikov", &[("a", 1.0), ("b", 0.8)]);
        assert_eq!(s.dimension(), 3);
        assert!(s.autonomous());
        let r = sys("rosenbrock");
        assert_eq!(r.dimension(), 2);
        assert!(!r.autonomous());
        assert_eq!(sys("nosehoover_new").parameter("epsilon"), Some(0.42));
    }

    #[test]
    fn lookup_errors() {
        assert!(matches!(lookup_system("duffing", &[]), Err(Error::UnknownSystem(_))));
        let bad = vec![("c".to_string(), 1.0)];
        assert!(matches!(lookup_system("silnikov", &bad), Err(Error::UnknownParameter { .. })));
        let nan = vec![("b".to_string(), f64::NAN)];
        assert!(matches!(lookup_system("silnikov", &nan), Err(Error::NonFiniteParameter { .. })));
    }

    #[test]
    fn field_examples() {
        let s = sys("silnikov");
        assert_eq!(s.eval_field(&StateVector::new3(0.0, 0.0, 0.0), 0.0).unwrap().as_slice(), &[0.0; 3]);
        let c = sys("circle");
        assert_eq!(c.eval_field(&StateVector::new2(1.0, 0.0), 0.0).unwrap().as_slice(), &[0.0, -1.0]);
        // σ(y−x) = 0, ρx − y − xz = 28 − 1 − 1, xy − βz = 1 − 8/3
        let l = sys("lorenz");
        let f = l.eval_field(&StateVector::new3(1.0, 1.0, 1.0), 0.0).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 26.0);
        assert_abs_diff_eq!(f[2], 1.0 - 8.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(l.eval_field(&StateVector::new2(1.0, 1.0), 0.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn jacobian_examples() {
        let s = sys("silnikov");
        let j = s.eval_jacobian(&StateVector::new3(0.0, 0.0, 0.0), 0.0).unwrap();
        assert_eq!(j.to_rows(), vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![-1.0, -1.0, -0.8]]);
        let r = sys("rosenbrock").eval_jacobian(&StateVector::new2(0.3, -2.0), 0.0).unwrap();
        assert_eq!(r.to_rows(), vec![vec![-10.0, 12.0], vec![0.0, -1.0]]);
        let v = sys("vanderpol").eval_jacobian(&StateVector::new2(0.0, 2.0), 0.0).unwrap();
        assert_eq!(v.to_rows(), vec![vec![0.0, 1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn divergence_examples() {
        let y = StateVector::new3(0.3, -1.2, 4.0);
        assert_abs_diff_eq!(sys("lorenz").eval_divergence(&y, 0.0).unwrap(), -41.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sys("silnikov").eval_divergence(&y, 0.0).unwrap(), -0.8, epsilon = 1e-15);
        assert_eq!(sys("nosehoover_new").eval_divergence(&y, 0.0).unwrap(), -4.0);
    }

    fn central_difference(sys: &SystemDefinition, y: &StateVector, t: f64, h: f64) -> Matrix {
        let n = sys.dimension();
        let mut m = Matrix::zeros(n);
        for j in 0..n {
            let (mut yp, mut ym) = (*y, *y);
            yp[j] += h;
            ym[j] -= h;
            let (fp, fm) = (sys.field(&yp, t), sys.field(&ym, t));
            for i in 0..n {
                m.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
            }
        }
        m
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in SYSTEM_NAMES {
            let s = sys(name);
            let n = s.dimension();
            for _ in 0..1000 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let y = StateVector::from_slice(&v).unwrap();
                let t = rng.gen_range(0.0..3.0);
                let analytic = s.jacobian(&y, t);
                let fd = central_difference(&s, &y, t, 1e-5);
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (analytic.get(i, j), fd.get(i, j));
                        assert!((a - b).abs() <= 1e-6, "{name} J[{i}][{j}] {a} vs {b} at {y:?}");
                    }
                }
                assert_eq!(s.eval_divergence(&y, t).unwrap(), analytic.trace());
            }
        }
    }

    #[test]
    fn silnikov_is_odd_and_autonomous_fields_ignore_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sys("silnikov");
        for _ in 0..200 {
            let y = StateVector::new3(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            assert_eq!(s.field(&y.scale(-1.0), 0.0), s.field(&y, 0.0).scale(-1.0));
        }
        for name in SYSTEM_NAMES.iter().filter(|n| **n != "rosenbrock") {
            let s = sys(name);
            let y = StateVector::from_slice(&[0.4, -1.3, 2.2][..s.dimension()]).unwrap();
            assert_eq!(s.field(&y, 0.0), s.field(&y, 123.4));
        }
    }
}
