//! Physical constants and model switches.

use crate::dg_core::PenaltyParams;

/// Vertical viscosity or diffusivity profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerticalProfile {
    Constant(f64),
    /// `surface * exp(-depth / scale)` with `depth = eta - z`, floored at `floor`.
    Exponential { surface: f64, scale: f64, floor: f64 },
}

impl VerticalProfile {
    pub fn at(&self, depth: f64) -> f64 {
        match *self {
            VerticalProfile::Constant(k) => k,
            VerticalProfile::Exponential { surface, scale, floor } => (surface * (-depth / scale).exp()).max(floor),
        }
    }

    pub fn max_value(&self) -> f64 {
        match *self {
            VerticalProfile::Constant(k) => k,
            VerticalProfile::Exponential { surface, floor, .. } => surface.max(floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysParams {
    /// Gravity, m/s^2.
    pub g: f64,
    /// Reference density, kg/m^3.
    pub rho0: f64,
    /// Coriolis parameter, 1/s.
    pub f: f64,
    /// Quadratic bottom drag coefficient.
    pub drag: f64,
    /// Wind stress, N/m^2 (divided by `rho0` to get the kinematic stress).
    pub wind: [f64; 2],
    /// Horizontal viscosity, m^2/s.
    pub kappa_h: f64,
    pub kappa_v: VerticalProfile,
    /// Horizontal tracer diffusivity, m^2/s.
    pub nu_h: f64,
    pub nu_v: VerticalProfile,
    /// Thermal EOS coefficient, kg/m^3/K.
    pub alpha: f64,
    /// Haline EOS coefficient, kg/m^3/psu.
    pub beta: f64,
    pub t0: f64,
    pub s0: f64,
    pub penalty: PenaltyParams,
    /// Include momentum advection in the 3D horizontal operator.
    pub momentum_advection: bool,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            g: 9.81,
            rho0: 1025.0,
            f: 0.0,
            drag: 0.0,
            wind: [0.0; 2],
            kappa_h: 0.0,
            kappa_v: VerticalProfile::Constant(0.0),
            nu_h: 0.0,
            nu_v: VerticalProfile::Constant(0.0),
            alpha: 0.2,
            beta: 0.0,
            t0: 10.0,
            s0: 35.0,
            penalty: PenaltyParams::default(),
            momentum_advection: true,
        }
    }
}

impl PhysParams {
    /// Wave celerity `sqrt(g H)`; negative depths are clamped to zero.
    #[inline]
    pub fn celerity(&self, h: f64) -> f64 {
        (self.g * h.max(0.0)).sqrt()
    }

    /// Linear equation of state for the density anomaly.
    #[inline]
    pub fn eos(&self, t: f64, s: f64) -> f64 {
        eos_density(t, s, self)
    }

    pub fn kinematic_wind(&self) -> [f64; 2] {
        [self.wind[0] / self.rho0, self.wind[1] / self.rho0]
    }
}

/// `rho' = -alpha (T - T0) + beta (S - S0)`.
pub fn eos_density(t: f64, s: f64, p: &PhysParams) -> f64 {
    -p.alpha * (t - p.t0) + p.beta * (s - p.s0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eos_reference_state_is_zero() {
        let p = PhysParams::default();
        assert_eq!(eos_density(p.t0, p.s0, &p), 0.0);
    }

    #[test]
    fn eos_linear_law() {
        let p = PhysParams { alpha: 0.2, beta: 0.0, ..Default::default() };
        assert!((eos_density(p.t0 + 1.0, 12.0, &p) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn eos_temperature_derivative() {
        let p = PhysParams { alpha: 0.17, beta: 0.76, ..Default::default() };
        let (t, s, h) = (13.2, 34.1, 1e-4);
        let d = (eos_density(t + h, s, &p) - eos_density(t - h, s, &p)) / (2.0 * h);
        assert!((d + p.alpha).abs() < 1e-8);
    }

    #[test]
    fn profiles() {
        let e = VerticalProfile::Exponential { surface: 1e-2, scale: 5.0, floor: 1e-4 };
        assert!((e.at(0.0) - 1e-2).abs() < 1e-15);
        assert_eq!(e.at(1e3), 1e-4);
        assert_eq!(VerticalProfile::Constant(3.0).at(7.0), 3.0);
    }
}
