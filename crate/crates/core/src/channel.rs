//! One-dimensional advection-diffusion channel between transmitter (x = 0)
//! and receiver (x = R).
//!
//! The concentration field is the exact polynomial solution of
//! `∂Φ/∂t + v·∂Φ/∂x = D·∂²Φ/∂x²` that satisfies `Φ(0,0) = A`, `Φ(R,0) = 0`
//! and `Φ(0,τ) = 0`. Reported concentrations are clamped at zero; the
//! finite-difference residual works on the raw polynomial.

use rand::Rng;
use serde::Serialize;

use crate::domain::OdorantSpec;

/// Exponent of the Fuller temperature scaling of gas diffusivity.
pub const FULLER_EXPONENT: f64 = 1.75;

/// Parameters of the closed-form concentration field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelParams {
    /// Concentration emitted at the transmitter, ou/m³.
    pub initial_concentration: f64,
    /// Transmitter-receiver separation, m.
    pub separation: f64,
    /// Airflow speed, m/s.
    pub airflow_speed: f64,
    /// Symbol slot duration, s.
    pub symbol_period: f64,
    /// Diffusion coefficient, m²/s.
    pub diffusion: f64,
}

impl ChannelParams {
    pub fn is_valid(&self) -> bool {
        [
            self.initial_concentration,
            self.separation,
            self.airflow_speed,
            self.symbol_period,
            self.diffusion,
        ]
        .iter()
        .all(|&p| p > 0.0 && p.is_finite())
    }

    /// Time for the airflow to carry molecules from Tx to Rx.
    pub fn transit_time(&self) -> f64 {
        self.separation / self.airflow_speed
    }

    fn denominator(&self) -> f64 {
        let (r, v, tau, d) = (self.separation, self.airflow_speed, self.symbol_period, self.diffusion);
        r * tau * (2.0 * d + r * v + tau * v * v)
    }

    /// Constant second spatial derivative of the raw field.
    pub fn curvature(&self) -> f64 {
        let (a, r, v, tau) = (self.initial_concentration, self.separation, self.airflow_speed, self.symbol_period);
        -2.0 * a * (r + tau * v) / self.denominator()
    }
}

/// Raw (unclamped) field value. May be negative away from the physical
/// region.
///
/// Evaluated in the co-moving coordinate `ξ = x − v·t`, where the field is
/// `(A/R)·[(R − ξ) − (R + vτ)·g(ξ,t)/g(−vτ,τ)]` with `g(ξ,t) = ξ(ξ − R) + 2Dt`.
/// This is the expanded fifteen-term polynomial regrouped so that each of
/// the three boundary conditions cancels exactly instead of through large
/// opposing terms.
pub fn raw_concentration_at(x: f64, t: f64, p: &ChannelParams) -> f64 {
    let (a, r, v, tau, d) = (
        p.initial_concentration,
        p.separation,
        p.airflow_speed,
        p.symbol_period,
        p.diffusion,
    );
    let g = |xi: f64, t: f64| xi * (xi - r) + 2.0 * d * t;
    let xi = x - v * t;
    let slot_end = -(v * tau);
    a * ((r - xi) - (r - slot_end) * g(xi, t) / g(slot_end, tau)) / r
}

/// The field written as the expanded polynomial over `Rτ(2D + Rv + τv²)`.
/// Algebraically equal to [`raw_concentration_at`] but loses digits to
/// cancellation near x = R.
pub fn raw_concentration_expanded(x: f64, t: f64, p: &ChannelParams) -> f64 {
    let (a, r, v, tau, d) = (
        p.initial_concentration,
        p.separation,
        p.airflow_speed,
        p.symbol_period,
        p.diffusion,
    );
    let v2 = v * v;
    let v3 = v2 * v;
    let numerator = -2.0 * a * d * r * t + 2.0 * a * d * r * tau - a * r * r * t * v + a * r * r * tau * v
        - a * r * t * t * v2
        + a * r * tau * tau * v2
        - a * t * t * tau * v3
        + a * t * tau * tau * v3
        + a * r * r * x
        - 2.0 * a * d * tau * x
        + 2.0 * a * r * t * v * x
        + 2.0 * a * t * tau * v2 * x
        - a * tau * tau * v2 * x
        - a * r * x * x
        - a * tau * v * x * x;
    numerator / p.denominator()
}

/// Concentration at position `x` (0 ≤ x ≤ R) and time `t` ≥ 0, clamped
/// to be non-negative.
pub fn concentration_at(x: f64, t: f64, p: &ChannelParams) -> f64 {
    debug_assert!((0.0..=p.separation).contains(&x), "x = {x} outside [0, R]");
    debug_assert!(t >= 0.0, "t = {t} negative");
    raw_concentration_at(x, t, p).max(0.0)
}

/// Concentration seen by the receiver, sampled at x = R when the airflow
/// delivers the emission (t = R/v).
pub fn received_concentration(p: &ChannelParams) -> f64 {
    concentration_at(p.separation, p.transit_time(), p)
}

/// Reduced form of [`received_concentration`]:
/// `A·(vR + τv² − 2DR/(τv)) / (2D + Rv + τv²)`, clamped at zero.
pub fn received_concentration_reduced(p: &ChannelParams) -> f64 {
    let (a, r, v, tau, d) = (
        p.initial_concentration,
        p.separation,
        p.airflow_speed,
        p.symbol_period,
        p.diffusion,
    );
    let raw = a * (v * r + tau * v * v - 2.0 * d * r / (tau * v)) / (2.0 * d + r * v + tau * v * v);
    raw.max(0.0)
}

/// Central finite-difference estimate of `∂Φ/∂t + v·∂Φ/∂x − D·∂²Φ/∂x²` on
/// the raw field, with step `h` in both x and t.
pub fn pde_residual(x: f64, t: f64, p: &ChannelParams, h: f64) -> f64 {
    pde_residual_with_diffusion(x, t, p, h, p.diffusion)
}

/// Same as [`pde_residual`] but the operator uses `pde_diffusion` while the
/// field keeps `p.diffusion`. A mismatch leaves
/// `(p.diffusion − pde_diffusion)·∂²Φ/∂x²` behind.
pub fn pde_residual_with_diffusion(x: f64, t: f64, p: &ChannelParams, h: f64, pde_diffusion: f64) -> f64 {
    let f = |x, t| raw_concentration_at(x, t, p);
    let centre = f(x, t);
    let dt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
    let dx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
    let dxx = (f(x + h, t) - 2.0 * centre + f(x - h, t)) / (h * h);
    dt + p.airflow_speed * dx - pde_diffusion * dxx
}

/// Fuller scaling `D(T) = D(T_ref)·(T/T_ref)^1.75`.
pub fn diffusion_at_temperature(d_ref: f64, temperature: f64, reference_temperature: f64) -> f64 {
    d_ref * (temperature / reference_temperature).powf(FULLER_EXPONENT)
}

/// Diffusion range of the odorant rescaled to `temperature`.
pub fn diffusion_range_at(odorant: &OdorantSpec, temperature: f64) -> (f64, f64) {
    let t_ref = odorant.reference_temperature;
    (
        diffusion_at_temperature(odorant.diffusion_min, temperature, t_ref),
        diffusion_at_temperature(odorant.diffusion_max, temperature, t_ref),
    )
}

/// Draws D uniformly over the odorant's range and rescales it to
/// `temperature`.
pub fn sample_diffusion<R: Rng + ?Sized>(odorant: &OdorantSpec, temperature: f64, rng: &mut R) -> f64 {
    let d_ref = if odorant.diffusion_min < odorant.diffusion_max {
        rng.random_range(odorant.diffusion_min..=odorant.diffusion_max)
    } else {
        odorant.diffusion_min
    };
    if temperature == odorant.reference_temperature {
        d_ref
    } else {
        diffusion_at_temperature(d_ref, temperature, odorant.reference_temperature)
    }
}
