//! Physical parameters, thermal populations and initial joint states.
//!
//! Basis ordering for the joint qubit–TLS state is `|q, tls⟩` with
//! `|00⟩, |01⟩, |10⟩, |11⟩`; `|0⟩` is the ground state of each subsystem.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States whose smallest eigenvalue lies in `[-POSITIVITY_TOL, 0)` are still
/// accepted as physical, so that `ξ = ξ_max` can be used as an input.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Ground and excited state populations of a two-level system in thermal
/// equilibrium at inverse temperature `beta`.
///
/// `a = e^{βω/2} / (2 cosh(βω/2))`, `b = 1 - a`.
pub fn thermal_populations(omega: f64, beta: f64) -> (f64, f64) {
    // e^{x}/(2cosh x) == 1/(1 + e^{-2x}), which does not overflow.
    let a = 1.0 / (1.0 + (-beta * omega).exp());
    (a, 1.0 - a)
}

/// Thermal occupation and dissipation rates of the TLS bath channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathRates {
    pub n_thermal: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub eta: f64,
}

/// Bath rates for a TLS of frequency `omega_tls` relaxing at rate prefactor
/// `kappa` into a bath at inverse temperature `beta`.
pub fn bath_rates(kappa: f64, omega_tls: f64, beta: f64) -> Result<BathRates> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("beta", format!("must be finite and > 0, got {beta}")));
    }
    if !(omega_tls > 0.0) {
        return Err(invalid("omega_tls", format!("must be > 0, got {omega_tls}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    let n_thermal = 1.0 / (beta * omega_tls).exp_m1();
    let gamma1 = kappa * (n_thermal + 1.0);
    let gamma2 = kappa * n_thermal;
    let gamma = gamma1 + gamma2;
    let eta = if kappa > 0.0 {
        gamma1 / gamma - 0.5
    } else {
        thermal_populations(omega_tls, beta).0 - 0.5
    };
    Ok(BathRates {
        n_thermal,
        gamma1,
        gamma2,
        gamma,
        eta,
    })
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Physical constants of the qubit–TLS–bath model together with the derived
/// bath quantities. All values are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_q: f64,
    pub omega_tls: f64,
    pub beta: f64,
    /// Qubit–TLS coupling strength `J`.
    #[serde(rename = "J")]
    pub coupling: f64,
    pub kappa: f64,
    pub n_thermal: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl ModelParams {
    pub const DEFAULT_OMEGA_Q: f64 = 1.0;
    pub const DEFAULT_OMEGA_TLS: f64 = 3.0;
    pub const DEFAULT_BETA: f64 = 1.0;
    pub const DEFAULT_COUPLING: f64 = 0.1;
    /// Total decay rate used when neither `kappa` nor `gamma` is given
    /// (`γ/J = 2`, a non-Markovian working point).
    pub const DEFAULT_GAMMA: f64 = 0.2;

    pub fn new(omega_q: f64, omega_tls: f64, beta: f64, coupling: f64, kappa: f64) -> Result<Self> {
        if !omega_q.is_finite() || !omega_tls.is_finite() {
            return Err(invalid("omega_q", "frequencies must be finite".into()));
        }
        if !(omega_q < omega_tls) {
            return Err(invalid(
                "omega_q",
                format!("requires omega_q < omega_tls, got {omega_q} >= {omega_tls}"),
            ));
        }
        if !(coupling >= 0.0) || !coupling.is_finite() {
            return Err(invalid("J", format!("must be finite and >= 0, got {coupling}")));
        }
        let rates = bath_rates(kappa, omega_tls, beta)?;
        Ok(Self {
            omega_q,
            omega_tls,
            beta,
            coupling,
            kappa,
            n_thermal: rates.n_thermal,
            gamma1: rates.gamma1,
            gamma2: rates.gamma2,
            gamma: rates.gamma,
            eta: rates.eta,
        })
    }

    /// Builds parameters with `kappa` chosen so that the total rate equals
    /// `gamma` at the given temperature.
    pub fn with_total_rate(omega_q: f64, omega_tls: f64, beta: f64, coupling: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        let n = bath_rates(0.0, omega_tls, beta)?.n_thermal;
        Self::new(omega_q, omega_tls, beta, coupling, gamma / (2.0 * n + 1.0))
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::new(self.omega_q, self.omega_tls, self.beta, coupling, self.kappa)
    }

    /// Same `kappa`, new temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.omega_q, self.omega_tls, beta, self.coupling, self.kappa)
    }

    /// Same temperature, `kappa` rescaled to hit the requested total rate.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::with_total_rate(self.omega_q, self.omega_tls, self.beta, self.coupling, gamma)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.omega_q, self.omega_tls, self.beta, self.coupling, kappa)
    }

    pub fn populations(&self) -> Populations {
        Populations::thermal(self.omega_q, self.omega_tls, self.beta)
    }

    /// Dissipation-free purification time `π/(2J)`.
    pub fn t0(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.coupling
    }

    /// Critical coupling `γ/4` separating the two dynamical regimes.
    pub fn j_min(&self) -> f64 {
        self.gamma / 4.0
    }

    /// Initial TLS purity `1/2 + 2η²`, the ceiling for uncorrelated states.
    pub fn tls_purity(&self) -> f64 {
        0.5 + 2.0 * self.eta * self.eta
    }

    /// Resonant control field `ε = ω_tls − ω_q`.
    pub fn resonant_epsilon(&self) -> f64 {
        self.omega_tls - self.omega_q
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::with_total_rate(
            Self::DEFAULT_OMEGA_Q,
            Self::DEFAULT_OMEGA_TLS,
            Self::DEFAULT_BETA,
            Self::DEFAULT_COUPLING,
            Self::DEFAULT_GAMMA,
        )
        .expect("default parameters are valid")
    }
}

/// Thermal populations of qubit and TLS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub a_q: f64,
    pub b_q: f64,
    pub a_tls: f64,
    pub b_tls: f64,
}

impl Populations {
    /// `beta = 0` is allowed here (infinite temperature).
    pub fn thermal(omega_q: f64, omega_tls: f64, beta: f64) -> Self {
        let (a_q, b_q) = thermal_populations(omega_q, beta);
        let (a_tls, b_tls) = thermal_populations(omega_tls, beta);
        Self { a_q, b_q, a_tls, b_tls }
    }

    /// Half the population gap `(a_tls − a_q)/2`; the S1 radius of the
    /// uncorrelated initial state.
    pub fn half_gap(&self) -> f64 {
        0.5 * (self.a_tls - self.a_q)
    }
}

/// Largest correlation amplitude compatible with positivity when the qubit
/// carries no coherence: `√(a_q a_tls b_q b_tls)`.
pub fn xi_max(pops: &Populations) -> f64 {
    (pops.a_q * pops.a_tls * pops.b_q * pops.b_tls).sqrt()
}

/// Qubit coherences and qubit–TLS correlation added to the thermal product
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub mu_q: f64,
    pub nu_q: f64,
    pub xi: Complex64,
}

impl InitialStateSpec {
    pub fn new(mu_q: f64, nu_q: f64, xi: Complex64) -> Self {
        Self { mu_q, nu_q, xi }
    }

    /// Real correlation, no qubit coherence.
    pub fn correlated(xi: f64) -> Self {
        Self {
            xi: Complex64::new(xi, 0.0),
            ..Self::default()
        }
    }

    /// Assembles `ρ_q ⊗ ρ_tls + ρ_corr` without any positivity check.
    pub fn assemble_unchecked(&self, pops: &Populations) -> DensityState {
        let mut x = [0.0; 16];
        x[0] = pops.a_q * pops.a_tls;
        x[1] = pops.a_q * pops.b_tls;
        x[2] = pops.b_q * pops.a_tls;
        x[3] = pops.b_q * pops.b_tls;
        // ⟨00|ρ|10⟩ and ⟨01|ρ|11⟩ carry the qubit coherence.
        x[6] = self.mu_q * pops.a_tls;
        x[7] = self.nu_q * pops.a_tls;
        x[12] = self.mu_q * pops.b_tls;
        x[13] = self.nu_q * pops.b_tls;
        // ⟨01|ρ|10⟩ = iξ
        let corr = Complex64::i() * self.xi;
        x[10] = corr.re;
        x[11] = corr.im;
        DensityState { x }
    }

    /// Assembles the joint state and rejects it if it is not positive within
    /// [`POSITIVITY_TOL`].
    pub fn assemble(&self, pops: &Populations) -> Result<DensityState> {
        let rho = self.assemble_unchecked(pops);
        let min_eigenvalue = rho.min_eigenvalue();
        if min_eigenvalue < -POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(rho)
    }
}

/// Builds the initial joint state for thermal populations at the model
/// temperature.
pub fn build_initial_state(spec: &InitialStateSpec, params: &ModelParams) -> Result<DensityState> {
    spec.assemble(&params.populations())
}

/// Index pairs `(row, col)` of the upper off-diagonal entries, in the order
/// of the real coordinates `x5 + i x6, x7 + i x8, …, x15 + i x16`.
pub(crate) const OFF_DIAGONAL: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// The 4×4 joint density matrix in its 16 real coordinates `x1..x16`.
///
/// Stored zero-based: `x[0]` is `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityState {
    pub x: [f64; 16],
}

impl DensityState {
    pub fn new(x: [f64; 16]) -> Self {
        Self { x }
    }

    pub fn trace(&self) -> f64 {
        self.x[0] + self.x[1] + self.x[2] + self.x[3]
    }

    pub fn to_matrix(&self) -> Matrix4<Complex64> {
        x_to_matrix(&self.x)
    }

    pub fn from_matrix(m: &Matrix4<Complex64>) -> Self {
        Self { x: matrix_to_x(m) }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self)
    }

    pub fn maximally_mixed() -> Self {
        let mut x = [0.0; 16];
        x[..4].fill(0.25);
        Self { x }
    }
}

pub(crate) fn x_to_matrix(x: &[f64; 16]) -> Matrix4<Complex64> {
    let mut m = Matrix4::<Complex64>::zeros();
    for k in 0..4 {
        m[(k, k)] = Complex64::new(x[k], 0.0);
    }
    for (n, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        let v = Complex64::new(x[4 + 2 * n], x[5 + 2 * n]);
        m[(i, j)] = v;
        m[(j, i)] = v.conj();
    }
    m
}

/// Reads the coordinates from the upper triangle; the lower triangle is
/// assumed to be its conjugate.
pub(crate) fn matrix_to_x(m: &Matrix4<Complex64>) -> [f64; 16] {
    let mut x = [0.0; 16];
    for k in 0..4 {
        x[k] = m[(k, k)].re;
    }
    for (n, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        x[4 + 2 * n] = m[(i, j)].re;
        x[5 + 2 * n] = m[(i, j)].im;
    }
    x
}

/// Smallest eigenvalue of the Hermitian matrix reconstructed from `rho`.
pub fn min_eigenvalue(rho: &DensityState) -> f64 {
    rho.to_matrix()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest real qubit coherence `μ_q ≥ 0` (with `ν_q = 0`) for which the
/// initial state with correlation `xi` stays positive within
/// [`POSITIVITY_TOL`]. Bisection to an absolute precision of `1e-10`.
pub fn mu_max(xi: Complex64, params: &ModelParams) -> f64 {
    mu_max_for(xi, &params.populations())
}

pub fn mu_max_for(xi: Complex64, pops: &Populations) -> f64 {
    let feasible = |mu: f64| {
        let rho = InitialStateSpec::new(mu, 0.0, xi).assemble_unchecked(pops);
        rho.min_eigenvalue() >= -POSITIVITY_TOL
    };
    if !feasible(0.0) {
        debug_assert!(false, "mu_max called with |xi| > xi_max");
        return 0.0;
    }
    // positivity of the reduced qubit state already bounds μ² ≤ a_q b_q
    let mut hi = (pops.a_q * pops.b_q).sqrt() + 1e-6;
    while feasible(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Key-value schema for model parameters and the initial state.
///
/// Either `kappa` or `gamma` (the total decay rate at `beta`) may be given;
/// without either, `gamma` defaults to [`ModelParams::DEFAULT_GAMMA`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub omega_q: f64,
    pub omega_tls: f64,
    pub beta: f64,
    #[serde(rename = "J")]
    pub coupling: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub mu_q: f64,
    pub nu_q: f64,
    pub xi_re: f64,
    pub xi_im: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            omega_q: ModelParams::DEFAULT_OMEGA_Q,
            omega_tls: ModelParams::DEFAULT_OMEGA_TLS,
            beta: ModelParams::DEFAULT_BETA,
            coupling: ModelParams::DEFAULT_COUPLING,
            kappa: None,
            gamma: None,
            mu_q: 0.0,
            nu_q: 0.0,
            xi_re: 0.0,
            xi_im: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        match (self.kappa, self.gamma) {
            (Some(_), Some(_)) => Err(invalid("kappa", "give either kappa or gamma, not both".into())),
            (Some(kappa), None) => ModelParams::new(self.omega_q, self.omega_tls, self.beta, self.coupling, kappa),
            (None, gamma) => ModelParams::with_total_rate(
                self.omega_q,
                self.omega_tls,
                self.beta,
                self.coupling,
                gamma.unwrap_or(ModelParams::DEFAULT_GAMMA),
            ),
        }
    }

    pub fn initial_spec(&self) -> InitialStateSpec {
        InitialStateSpec::new(self.mu_q, self.nu_q, Complex64::new(self.xi_re, self.xi_im))
    }
}
