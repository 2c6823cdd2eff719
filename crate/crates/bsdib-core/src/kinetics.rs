//! Reaction kinetics of the morphochemical model.
//!
//! Four fields couple through these terms: two bulk concentrations `b`
//! (adsorbates) and `q` (inhibitors) relax toward their far-field values,
//! while on the growth surface the morphology `eta` and chemistry `theta`
//! react through electrodeposition and adsorption terms. Everything here is
//! pointwise algebra: the functions are pure, safe to call from any thread,
//! and the solver applies them node by node without reductions.
//!
//! The module also carries the spatially homogeneous equilibrium, the
//! diffusion-free Jacobian (closed form for `gamma = 0`, finite differences
//! otherwise), and the linear stability verdict in the two bifurcation
//! parameters `B` and `C`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Finite-difference step for the numeric Jacobian.
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum KineticsError {
    #[error("parameter {name} must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("closed-form Jacobian requires gamma = 0, got {0}; use finite differences")]
    NonzeroGamma(f64),
    #[error("stability conditions are degenerate for k2 <= k3 (k2 = {k2}, k3 = {k3})")]
    DegenerateConditions { k2: f64, k3: f64 },
    #[error("analysis assumes the derived value of D; set `D = auto`")]
    NonDerivedD,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Full constant set of the model.
///
/// `b_coef` and `c_coef` are the two bifurcation parameters (`B`, `C` in the
/// parameter files); everything else is fixed across the standard experiments.
/// `d_coef` balances the desorption term; with `d_is_derived` it is pinned to
/// the unique value that makes `(b0, q0, 0, alpha)` a kinetic fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    /// Bulk diffusion coefficient (applies to `q`; `b` diffuses with 1).
    pub d_omega: f64,
    /// Surface diffusion coefficient (applies to `theta`; `eta` with 1).
    pub d_gamma: f64,
    /// Bulk relaxation rate of `b`.
    pub k_b: f64,
    /// Bulk relaxation rate of `q`.
    pub k_q: f64,
    /// Far-field (and top Dirichlet) value of `b`.
    pub b0: f64,
    /// Far-field (and top Dirichlet) value of `q`.
    pub q0: f64,
    /// Overall surface reaction rate.
    pub rho: f64,
    /// Equilibrium surface coverage, in (0, 1).
    pub alpha: f64,
    /// Coverage saturation strength, in [0, 1).
    pub gamma: f64,
    /// Electrodeposition gain (A1).
    pub a1: f64,
    /// Cubic saturation of the morphology (A2).
    pub a2: f64,
    /// Coverage feedback strength (B, bifurcation parameter).
    pub b_coef: f64,
    /// Adsorption strength (C, bifurcation parameter).
    pub c_coef: f64,
    /// Desorption strength (D, usually derived).
    pub d_coef: f64,
    /// Morphology enhancement of adsorption.
    pub k2: f64,
    /// Morphology enhancement of desorption.
    pub k3: f64,
    /// Bulk-to-surface coupling strength on the `b` flux.
    pub psi_eta: f64,
    /// Bulk-to-surface coupling strength on the `q` flux.
    pub psi_theta: f64,
    /// True while `d_coef` tracks the derived equilibrium value.
    pub d_is_derived: bool,
}

/// Spatially homogeneous fixed point of the kinetics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub b: f64,
    pub q: f64,
    pub eta: f64,
    pub theta: f64,
}

/// How to differentiate the kinetics at the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMethod {
    /// Hand-derived blocks; only valid for `gamma = 0` and derived `D`.
    ClosedForm,
    /// Central differences with step `FD_STEP`; works for any `gamma`.
    FiniteDifference,
}

/// Outcome of the diffusion-free linear stability analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Trace of the 2x2 surface reaction block.
    pub trace_surface: f64,
    /// Determinant of the 2x2 surface reaction block.
    pub det_surface: f64,
    /// All four eigenvalues of the kinetic Jacobian, sorted by (re, im).
    pub eigenvalues: [Complex64; 4],
    /// `b_condition && c_condition`.
    pub stable: bool,
    /// B exceeds its threshold (equivalent to det_surface > 0).
    pub b_condition: bool,
    /// C exceeds its threshold (equivalent to trace_surface < 0).
    pub c_condition: bool,
    /// Threshold a1*b0 / (alpha*(k2 - k3)) that B must exceed.
    pub b_threshold: f64,
    /// Threshold (b0/q0)*a1*alpha*(1 - alpha) that C must exceed.
    pub c_threshold: f64,
}

impl ModelParameters {
    /// The fixed constant set with the two bifurcation parameters free,
    /// `gamma = 0`, coupling off, and `D` derived.
    pub fn baseline(b_coef: f64, c_coef: f64) -> Self {
        let mut params = Self {
            d_omega: 1.0,
            d_gamma: 20.0,
            k_b: 1.0,
            k_q: 1.0,
            b0: 1.0,
            q0: 1.0,
            rho: 1.0,
            alpha: 0.5,
            gamma: 0.0,
            a1: 10.0,
            a2: 1.0,
            b_coef,
            c_coef,
            d_coef: f64::NAN,
            k2: 2.5,
            k3: 1.5,
            psi_eta: 0.0,
            psi_theta: 0.0,
            d_is_derived: true,
        };
        params.d_coef = params.derived_d();
        params
    }

    /// Desorption strength that makes `(b0, q0, 0, alpha)` a fixed point of
    /// `f4`, for the current `q0`, `c_coef`, `alpha`, `gamma`.
    pub fn derived_d(&self) -> f64 {
        // Same factor association as the adsorption term in f4, so the
        // equilibrium residual stays at rounding level.
        self.q0 * self.c_coef * (1.0 - self.alpha) * (1.0 - self.gamma * (1.0 - self.alpha))
            / (self.alpha * (1.0 + self.gamma * self.alpha))
    }

    /// Re-pin `d_coef` to the derived value if the flag says it tracks one.
    /// Call after mutating any parameter the formula depends on.
    pub fn refresh_derived_d(&mut self) {
        if self.d_is_derived {
            self.d_coef = self.derived_d();
        }
    }

    pub fn equilibrium(&self) -> Equilibrium {
        Equilibrium {
            b: self.b0,
            q: self.q0,
            eta: 0.0,
            theta: self.alpha,
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        // Range checks first: a bad alpha or gamma poisons the derived D,
        // and the root cause is the better error.
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(KineticsError::InvalidParameter {
                name: "alpha",
                requirement: "inside (0, 1)",
                value: self.alpha,
            });
        }
        if !(self.gamma.is_finite() && (0.0..1.0).contains(&self.gamma)) {
            return Err(KineticsError::InvalidParameter {
                name: "gamma",
                requirement: "inside [0, 1)",
                value: self.gamma,
            });
        }
        let positive: [(&'static str, f64); 14] = [
            ("d_omega", self.d_omega),
            ("d_gamma", self.d_gamma),
            ("k_b", self.k_b),
            ("k_q", self.k_q),
            ("b0", self.b0),
            ("q0", self.q0),
            ("rho", self.rho),
            ("A1", self.a1),
            ("A2", self.a2),
            ("B", self.b_coef),
            ("C", self.c_coef),
            ("D", self.d_coef),
            ("k2", self.k2),
            ("k3", self.k3),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(KineticsError::InvalidParameter {
                    name,
                    requirement: "a positive finite number",
                    value,
                });
            }
        }
        // Zero coupling is meaningful: it decouples the bulk and must
        // reproduce the surface-only model exactly.
        for (name, value) in [("psi_eta", self.psi_eta), ("psi_theta", self.psi_theta)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(KineticsError::InvalidParameter {
                    name,
                    requirement: "a nonnegative finite number",
                    value,
                });
            }
        }
        Ok(())
    }

    /// Relaxation of the adsorbate concentration toward its far field.
    pub fn f1(&self, b: f64) -> f64 {
        -self.k_b * (b - self.b0)
    }

    /// Relaxation of the inhibitor concentration toward its far field.
    pub fn f2(&self, q: f64) -> f64 {
        -self.k_q * (q - self.q0)
    }

    /// Electrodeposition rate of the surface morphology: growth proportional
    /// to the local adsorbate on uncovered sites, cubic saturation, and a
    /// linear feedback from the coverage excess.
    pub fn f3(&self, b: f64, eta: f64, theta: f64) -> f64 {
        self.rho
            * (self.a1 * b * (1.0 - theta) * eta
                - self.a2 * eta * eta * eta
                - self.b_coef * (theta - self.alpha))
    }

    /// Coverage rate: adsorption of the local inhibitor onto free sites minus
    /// desorption, both modulated by the morphology (`k2`, `k3`) and saturated
    /// by `gamma`. The adsorption gain carries `c_coef` so that with the
    /// derived `d_coef` the two terms balance exactly at `(q0, 0, alpha)`.
    pub fn f4(&self, q: f64, eta: f64, theta: f64) -> f64 {
        let adsorption = self.c_coef
            * q
            * (1.0 + self.k2 * eta)
            * (1.0 - theta)
            * (1.0 - self.gamma * (1.0 - theta));
        let desorption = self.d_coef * (1.0 + self.k3 * eta) * theta * (1.0 + self.gamma * theta);
        self.rho * (adsorption - desorption)
    }

    /// `f1` in the shifted variable `b_t = b - b0`.
    pub fn f1_tilde(&self, b_t: f64) -> f64 {
        self.f1(b_t + self.b0)
    }

    /// `f2` in the shifted variable `q_t = q - q0`.
    pub fn f2_tilde(&self, q_t: f64) -> f64 {
        self.f2(q_t + self.q0)
    }

    /// `f3` with the bulk trace in shifted form.
    pub fn f3_tilde(&self, b_t: f64, eta: f64, theta: f64) -> f64 {
        self.f3(b_t + self.b0, eta, theta)
    }

    /// `f4` with the bulk trace in shifted form.
    pub fn f4_tilde(&self, q_t: f64, eta: f64, theta: f64) -> f64 {
        self.f4(q_t + self.q0, eta, theta)
    }

    /// Jacobian of `(f1, f2, f3, f4)` in the variables `(b, q, eta, theta)`
    /// at the homogeneous equilibrium.
    ///
    /// The closed form assumes `gamma = 0` and derived `D`; the matrix is
    /// block triangular in the (bulk | surface) splitting, so its spectrum is
    /// `{-k_b, -k_q}` together with the eigenvalues of the surface block.
    pub fn jacobian_at_equilibrium(
        &self,
        method: JacobianMethod,
    ) -> Result<DMatrix<f64>, KineticsError> {
        match method {
            JacobianMethod::ClosedForm => {
                if self.gamma != 0.0 {
                    return Err(KineticsError::NonzeroGamma(self.gamma));
                }
                if !self.d_is_derived {
                    return Err(KineticsError::NonDerivedD);
                }
                let mut j = DMatrix::zeros(4, 4);
                j[(0, 0)] = -self.k_b;
                j[(1, 1)] = -self.k_q;
                j[(2, 2)] = self.rho * self.a1 * self.b0 * (1.0 - self.alpha);
                j[(2, 3)] = -self.rho * self.b_coef;
                j[(3, 1)] = self.rho * self.c_coef * (1.0 - self.alpha);
                j[(3, 2)] =
                    self.rho * self.q0 * self.c_coef * (self.k2 - self.k3) * (1.0 - self.alpha);
                j[(3, 3)] = -self.rho * self.q0 * self.c_coef / self.alpha;
                Ok(j)
            }
            JacobianMethod::FiniteDifference => {
                let eq = self.equilibrium();
                let center = [eq.b, eq.q, eq.eta, eq.theta];
                let field = |x: &[f64; 4]| -> [f64; 4] {
                    [
                        self.f1(x[0]),
                        self.f2(x[1]),
                        self.f3(x[0], x[2], x[3]),
                        self.f4(x[1], x[2], x[3]),
                    ]
                };
                let mut j = DMatrix::zeros(4, 4);
                for col in 0..4 {
                    let mut plus = center;
                    let mut minus = center;
                    plus[col] += FD_STEP;
                    minus[col] -= FD_STEP;
                    let fp = field(&plus);
                    let fm = field(&minus);
                    for row in 0..4 {
                        j[(row, col)] = (fp[row] - fm[row]) / (2.0 * FD_STEP);
                    }
                }
                Ok(j)
            }
        }
    }

    /// Diffusion-free stability of the homogeneous equilibrium.
    ///
    /// The equilibrium is linearly stable exactly when the surface block is
    /// Hurwitz, which for `k2 > k3` is equivalent to both thresholds being
    /// exceeded: `det > 0` is the B condition and `trace < 0` is the C
    /// condition. The eigenvalues in the report come from a numeric
    /// eigensolve of the assembled Jacobian, independent of the inequality
    /// algebra, so the two verdicts can be cross-checked.
    pub fn stability_check(&self) -> Result<StabilityReport, KineticsError> {
        if self.gamma != 0.0 {
            return Err(KineticsError::NonzeroGamma(self.gamma));
        }
        if self.k2 <= self.k3 {
            return Err(KineticsError::DegenerateConditions {
                k2: self.k2,
                k3: self.k3,
            });
        }
        let j = self.jacobian_at_equilibrium(JacobianMethod::ClosedForm)?;
        let surface = j.view((2, 2), (2, 2));
        let trace_surface = surface[(0, 0)] + surface[(1, 1)];
        let det_surface = surface[(0, 0)] * surface[(1, 1)] - surface[(0, 1)] * surface[(1, 0)];

        let b_threshold = self.a1 * self.b0 / (self.alpha * (self.k2 - self.k3));
        let c_threshold = (self.b0 / self.q0) * self.a1 * self.alpha * (1.0 - self.alpha);
        let b_condition = self.b_coef > b_threshold;
        let c_condition = self.c_coef > c_threshold;

        let mut eigenvalues: Vec<Complex64> = j.complex_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());

        Ok(StabilityReport {
            trace_surface,
            det_surface,
            eigenvalues: [
                eigenvalues[0],
                eigenvalues[1],
                eigenvalues[2],
                eigenvalues[3],
            ],
            stable: b_condition && c_condition,
            b_condition,
            c_condition,
            b_threshold,
            c_threshold,
        })
    }

    /// Apply one `name = value` assignment. `line` is used in error messages.
    ///
    /// Accepts the model constant names as written in parameter files;
    /// `psi` sets both coupling constants at once, and `D = auto` re-enables
    /// the derived desorption strength. Later assignments override earlier
    /// ones, which is what lets explicit keys refine a preset.
    pub fn set_parameter(
        &mut self,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), KineticsError> {
        let parse = |value: &str| -> Result<f64, KineticsError> {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| KineticsError::Parse {
                    line,
                    message: format!("expected a number for key `{key}`, got `{}`", value.trim()),
                })
        };
        match key {
            "d_omega" => self.d_omega = parse(value)?,
            "d_gamma" => self.d_gamma = parse(value)?,
            "k_b" => self.k_b = parse(value)?,
            "k_q" => self.k_q = parse(value)?,
            "b0" => self.b0 = parse(value)?,
            "q0" => self.q0 = parse(value)?,
            "rho" => self.rho = parse(value)?,
            "alpha" => self.alpha = parse(value)?,
            "gamma" => self.gamma = parse(value)?,
            "A1" => self.a1 = parse(value)?,
            "A2" => self.a2 = parse(value)?,
            "B" => self.b_coef = parse(value)?,
            "C" => self.c_coef = parse(value)?,
            "D" => {
                if value.trim() == "auto" {
                    self.d_is_derived = true;
                } else {
                    self.d_coef = parse(value)?;
                    self.d_is_derived = false;
                }
            }
            "k2" => self.k2 = parse(value)?,
            "k3" => self.k3 = parse(value)?,
            "psi" => {
                let v = parse(value)?;
                self.psi_eta = v;
                self.psi_theta = v;
            }
            "psi_eta" => self.psi_eta = parse(value)?,
            "psi_theta" => self.psi_theta = parse(value)?,
            _ => {
                return Err(KineticsError::Parse {
                    line,
                    message: format!("unknown parameter key `{key}`"),
                })
            }
        }
        Ok(())
    }
}

/// True for keys `set_parameter` understands; lets layered parsers route
/// model keys here and keep their own keys separate.
pub fn is_parameter_key(key: &str) -> bool {
    matches!(
        key,
        "d_omega"
            | "d_gamma"
            | "k_b"
            | "k_q"
            | "b0"
            | "q0"
            | "rho"
            | "alpha"
            | "gamma"
            | "A1"
            | "A2"
            | "B"
            | "C"
            | "D"
            | "k2"
            | "k3"
            | "psi"
            | "psi_eta"
            | "psi_theta"
    )
}

/// Split a parameter-file line into `(key, value)`. Returns `None` for blank
/// lines and `#` comments.
pub fn split_key_value(line: &str, line_no: usize) -> Result<Option<(&str, &str)>, KineticsError> {
    let text = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let text = text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (key, value) = text.split_once('=').ok_or_else(|| KineticsError::Parse {
        line: line_no,
        message: format!("expected `name = value`, got `{text}`"),
    })?;
    Ok(Some((key.trim(), value.trim())))
}

/// Parse a standalone parameter file: baseline constants plus one
/// `name = value` assignment per line. `B` and `C` are required; `D`
/// defaults to the derived value.
pub fn parse_parameters(text: &str) -> Result<ModelParameters, KineticsError> {
    let mut params = ModelParameters::baseline(1.0, 1.0);
    let mut seen_b = false;
    let mut seen_c = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some((key, value)) = split_key_value(raw, line_no)? else {
            continue;
        };
        params.set_parameter(key, value, line_no)?;
        seen_b |= key == "B";
        seen_c |= key == "C";
    }
    if !seen_b || !seen_c {
        return Err(KineticsError::Parse {
            line: text.lines().count() + 1,
            message: "missing required parameter keys B and C".into(),
        });
    }
    params.refresh_derived_d();
    params.validate()?;
    Ok(params)
}
