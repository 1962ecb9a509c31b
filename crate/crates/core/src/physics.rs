//! Heavy-oil and rock constitutive laws, well and heater source models.
//!
//! Everything is SI internally. The Bennison viscosity correlation works in
//! degrees Fahrenheit and centipoise, and compressibility is commonly quoted
//! per bar; those conversions happen here and nowhere else.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bennison correlation coefficients `A1..A4`.
pub const BENNISON_COEFFS: [f64; 4] = [-0.8021, 23.8765, 0.31458, -9.21592];
/// Density of water at 60 °F, kg/m³.
pub const WATER_DENSITY: f64 = 999.0;
pub const PA_PER_BAR: f64 = 1.0e5;
pub const PA_S_PER_CP: f64 = 1.0e-3;

/// API gravity from specific gravity.
pub fn api_gravity<T: Real>(gamma_sg: T) -> T {
    T::lit(141.5) / gamma_sg - T::lit(131.5)
}

pub fn fahrenheit_from_kelvin<T: Real>(t: T) -> T {
    (t - T::lit(273.15)) * T::lit(1.8) + T::lit(32.0)
}

/// Density, viscosity and their partial derivatives at one (p, T) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidProps<T> {
    pub rho: T,
    pub rho_p: T,
    pub rho_t: T,
    pub mu: T,
    pub mu_t: T,
}

impl<T: Real> FluidProps<T> {
    /// Mobility-like ratio `rho / mu`.
    pub fn lambda(&self) -> T {
        self.rho / self.mu
    }

    pub fn lambda_p(&self) -> T {
        self.rho_p / self.mu
    }

    pub fn lambda_t(&self) -> T {
        self.rho_t / self.mu - self.rho * self.mu_t / (self.mu * self.mu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidModel<T> {
    pub gamma_sg: T,
    pub bennison: [T; 4],
    pub rho0: T,
    pub p0: T,
    pub t0: T,
    /// Compressibility in 1/Pa.
    pub c: T,
    pub beta: T,
    /// Sign applied to `beta` in the density exponent; -1 makes density
    /// decrease with temperature.
    pub beta_sign: T,
    pub c_v: T,
    pub k_tf: T,
}

impl<T: Real> Default for FluidModel<T> {
    fn default() -> Self {
        Self::heavy_oil(T::one())
    }
}

impl<T: Real> FluidModel<T> {
    /// Heavy oil with the given specific gravity and reference values
    /// `p0 = 1.01325 bar`, `T0 = 288.7056 K`, `c = 5.5e-5 / bar`,
    /// `beta = 2.5e-4 / K`.
    pub fn heavy_oil(gamma_sg: T) -> Self {
        FluidModel {
            gamma_sg,
            bennison: BENNISON_COEFFS.map(T::lit),
            rho0: gamma_sg * T::lit(WATER_DENSITY),
            p0: T::lit(1.01325 * PA_PER_BAR),
            t0: T::lit(288.7056),
            c: T::lit(5.5e-5 / PA_PER_BAR),
            beta: T::lit(2.5e-4),
            beta_sign: -T::one(),
            c_v: T::lit(2093.4),
            k_tf: T::lit(0.15),
        }
    }

    /// Sets compressibility from a value quoted per bar.
    pub fn with_compressibility_per_bar(mut self, c_per_bar: T) -> Self {
        self.c = c_per_bar / T::lit(PA_PER_BAR);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.rho0 > T::zero(), "rho0 must be positive"),
            (self.c >= T::zero(), "compressibility must be non-negative"),
            (self.c_v > T::zero(), "c_v must be positive"),
            (self.k_tf > T::zero(), "fluid conductivity must be positive"),
            (self.gamma_sg > T::zero(), "specific gravity must be positive"),
            (
                self.beta_sign == T::one() || self.beta_sign == -T::one(),
                "beta_sign must be +1 or -1",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::OutOfDomain((*msg).to_string())),
            None => Ok(()),
        }
    }

    pub fn api_gravity(&self) -> T {
        api_gravity(self.gamma_sg)
    }

    fn bennison_exponents(&self) -> (T, T) {
        let g = self.api_gravity();
        let [a1, a2, a3, a4] = self.bennison;
        (a1 * g + a2, a3 * g + a4)
    }

    /// Viscosity in Pa·s at temperature `t` (K).
    pub fn viscosity(&self, t: T) -> Result<T> {
        self.viscosity_and_dt(t).map(|(mu, _)| mu)
    }

    pub fn viscosity_dt(&self, t: T) -> Result<T> {
        self.viscosity_and_dt(t).map(|(_, d)| d)
    }

    /// Viscosity (Pa·s) and its temperature derivative (Pa·s/K).
    pub fn viscosity_and_dt(&self, t: T) -> Result<(T, T)> {
        let t_f = fahrenheit_from_kelvin(t);
        if !(t_f > T::zero()) {
            return Err(Error::OutOfDomain(format!(
                "Bennison viscosity needs T_F > 0, got T = {t} K (T_F = {t_f})"
            )));
        }
        let (lead, power) = self.bennison_exponents();
        let mu_cp = T::lit(10.0).powf(lead) * t_f.powf(power);
        let mu = mu_cp * T::lit(PA_S_PER_CP);
        let dmu_dt = mu * power / t_f * T::lit(1.8);
        Ok((mu, dmu_dt))
    }

    pub fn density(&self, p: T, t: T) -> T {
        self.rho0
            * (self.c * (p - self.p0)).exp()
            * (self.beta_sign * self.beta * (t - self.t0)).exp()
    }

    pub fn density_dp(&self, p: T, t: T) -> T {
        self.density(p, t) * self.c
    }

    pub fn density_dt(&self, p: T, t: T) -> T {
        self.density(p, t) * self.beta_sign * self.beta
    }

    pub fn props(&self, p: T, t: T) -> Result<FluidProps<T>> {
        let rho = self.density(p, t);
        let (mu, mu_t) = self.viscosity_and_dt(t)?;
        Ok(FluidProps {
            rho,
            rho_p: rho * self.c,
            rho_t: rho * self.beta_sign * self.beta,
            mu,
            mu_t,
        })
    }
}

/// Rock properties. Permeability is diagonal, `[K_x, K_y, K_z]` per cell;
/// 2D grids ignore `K_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RockModel<T> {
    pub perm: Vec<[T; 3]>,
    pub poro: Vec<T>,
    pub rho_r: T,
    pub c_r: T,
    pub k_tr: T,
}

impl<T: Real> RockModel<T> {
    /// Homogeneous rock with the default thermal properties
    /// (`rho_r = 2500`, `c_r = 920`, `k_tr = 1.7295772056`).
    pub fn uniform(n_cells: usize, perm: [T; 3], poro: T) -> Self {
        RockModel {
            perm: vec![perm; n_cells],
            poro: vec![poro; n_cells],
            rho_r: T::lit(2500.0),
            c_r: T::lit(920.0),
            k_tr: T::lit(1.7295772056),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.poro.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.perm.len() != self.poro.len() {
            return Err(Error::DimensionMismatch {
                expected: self.poro.len(),
                found: self.perm.len(),
                context: "rock permeability",
            });
        }
        if let Some(i) = self
            .perm
            .iter()
            .position(|k| k.iter().any(|&v| !(v > T::zero())))
        {
            return Err(Error::OutOfDomain(format!("non-positive permeability in cell {i}")));
        }
        if let Some(i) = self
            .poro
            .iter()
            .position(|&phi| !(phi > T::zero() && phi < T::one()))
        {
            return Err(Error::OutOfDomain(format!("porosity outside (0, 1) in cell {i}")));
        }
        if !(self.rho_r > T::zero() && self.c_r > T::zero() && self.k_tr > T::zero()) {
            return Err(Error::OutOfDomain("rock density, heat capacity and conductivity must be positive".into()));
        }
        Ok(())
    }

    /// Bulk thermal conductivity `phi k_tr + (1 - phi) k_tf` of a cell.
    pub fn thermal_conductivity(&self, cell: usize, fluid: &FluidModel<T>) -> T {
        let phi = self.poro[cell];
        phi * self.k_tr + (T::one() - phi) * fluid.k_tf
    }
}

/// Fixed well-model lengths; kept independent of the mesh so that the well
/// model does not change under refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellGeometry<T> {
    pub r_w: T,
    pub h: T,
    pub d_x: T,
    pub d_y: T,
}

impl<T: Real> Default for WellGeometry<T> {
    fn default() -> Self {
        WellGeometry {
            r_w: T::lit(0.1),
            h: T::lit(5.0),
            d_x: T::lit(5.0),
            d_y: T::lit(5.0),
        }
    }
}

/// Peaceman equivalent radius for anisotropic permeability.
pub fn equivalent_radius<T: Real>(k_x: T, k_y: T, d_x: T, d_y: T) -> T {
    let ryx = (k_y / k_x).sqrt();
    let rxy = (k_x / k_y).sqrt();
    let num = T::lit(0.14) * (ryx * d_x * d_x + rxy * d_y * d_y).sqrt();
    let den = T::lit(0.5) * (ryx.sqrt() + rxy.sqrt());
    num / den
}

/// Peaceman rate, positive when `p_bh > p`.
pub fn peaceman_rate<T: Real>(k_e: T, mu: T, p_bh: T, p: T, h: T, r_e: T, r_w: T) -> Result<T> {
    if !(r_e > r_w) {
        return Err(Error::IllPosedWell { r_e: r_e.to_f64_lossy(), r_w: r_w.to_f64_lossy() });
    }
    Ok(T::lit(2.0 * std::f64::consts::PI) * h * k_e / (mu * (r_e / r_w).ln()) * (p_bh - p))
}

/// Well index `2 pi h K_e / ln(r_e / r_w)` so that `q = WI / mu (p_bh - p)`.
pub fn well_index<T: Real>(geometry: &WellGeometry<T>, k_x: T, k_y: T) -> Result<T> {
    let r_e = equivalent_radius(k_x, k_y, geometry.d_x, geometry.d_y);
    if !(r_e > geometry.r_w) {
        return Err(Error::IllPosedWell {
            r_e: r_e.to_f64_lossy(),
            r_w: geometry.r_w.to_f64_lossy(),
        });
    }
    let k_e = (k_x * k_y).sqrt();
    Ok(T::lit(2.0 * std::f64::consts::PI) * geometry.h * k_e / (r_e / geometry.r_w).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind<T> {
    Injector { t_inj: T },
    Producer,
    Heater { u: T, t_heater: T },
}

/// How a well's volumetric rate is determined. Heaters ignore it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMode<T> {
    /// Constant target rate (m³/s), independent of the cell state.
    Fixed { q: T },
    /// Peaceman well at fixed bottom-hole pressure, rate clipped to
    /// `[0, q_max]`.
    Peaceman { p_bh: T, q_max: T, geometry: WellGeometry<T> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTerm<T> {
    pub cell: usize,
    pub kind: SourceKind<T>,
    pub rate: RateMode<T>,
}

impl<T: Real> SourceTerm<T> {
    pub fn heater(cell: usize, u: T, t_heater: T) -> Self {
        SourceTerm { cell, kind: SourceKind::Heater { u, t_heater }, rate: RateMode::Fixed { q: T::zero() } }
    }

    pub fn injector(cell: usize, rate: RateMode<T>, t_inj: T) -> Self {
        SourceTerm { cell, kind: SourceKind::Injector { t_inj }, rate }
    }

    pub fn producer(cell: usize, rate: RateMode<T>) -> Self {
        SourceTerm { cell, kind: SourceKind::Producer, rate }
    }

    pub fn is_producer(&self) -> bool {
        matches!(self.kind, SourceKind::Producer)
    }
}

/// Mass (`f`) and energy (`f_t`) source densities in the host cell, per unit
/// volume, with partial derivatives in the host cell's `p` and `T`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SourceEval<T> {
    pub f: T,
    pub f_t: T,
    pub df_dp: T,
    pub df_dt: T,
    pub dft_dp: T,
    pub dft_dt: T,
}

/// Volumetric rate and its derivatives for a well.
fn well_rate<T: Real>(
    rate: &RateMode<T>,
    injecting: bool,
    p: T,
    mu: T,
    mu_t: T,
    perm: [T; 3],
) -> Result<(T, T, T)> {
    match *rate {
        RateMode::Fixed { q } => Ok((q, T::zero(), T::zero())),
        RateMode::Peaceman { p_bh, q_max, geometry } => {
            let wi = well_index(&geometry, perm[0], perm[1])?;
            let drive = if injecting { p_bh - p } else { p - p_bh };
            let dp_sign = if injecting { -T::one() } else { T::one() };
            let raw = wi / mu * drive;
            if raw <= T::zero() {
                Ok((T::zero(), T::zero(), T::zero()))
            } else if raw >= q_max {
                Ok((q_max, T::zero(), T::zero()))
            } else {
                Ok((raw, wi / mu * dp_sign, -raw * mu_t / mu))
            }
        }
    }
}

/// Evaluates one source in its host cell at state `(p, t)`. The point
/// source is spread uniformly over the host cell of volume `cell_volume`.
pub fn source_contributions<T: Real>(
    src: &SourceTerm<T>,
    p: T,
    t: T,
    fluid: &FluidModel<T>,
    perm: [T; 3],
    cell_volume: T,
) -> Result<SourceEval<T>> {
    let inv_vol = T::one() / cell_volume;
    match src.kind {
        SourceKind::Heater { u, t_heater } => Ok(SourceEval {
            f_t: u * (t_heater - t) * inv_vol,
            dft_dt: -u * inv_vol,
            ..SourceEval::default()
        }),
        SourceKind::Injector { t_inj } => {
            let (mu, mu_t) = match src.rate {
                RateMode::Fixed { .. } => (T::one(), T::zero()),
                RateMode::Peaceman { .. } => fluid.viscosity_and_dt(t)?,
            };
            let (q, q_p, q_t) = well_rate(&src.rate, true, p, mu, mu_t, perm)?;
            let rho = fluid.density(p, t_inj);
            let rho_p = fluid.density_dp(p, t_inj);
            let f = q * rho * inv_vol;
            let df_dp = (q_p * rho + q * rho_p) * inv_vol;
            let df_dt = q_t * rho * inv_vol;
            let h = fluid.c_v * t_inj;
            Ok(SourceEval { f, f_t: f * h, df_dp, df_dt, dft_dp: df_dp * h, dft_dt: df_dt * h })
        }
        SourceKind::Producer => {
            let (mu, mu_t) = match src.rate {
                RateMode::Fixed { .. } => (T::one(), T::zero()),
                RateMode::Peaceman { .. } => fluid.viscosity_and_dt(t)?,
            };
            let (q, q_p, q_t) = well_rate(&src.rate, false, p, mu, mu_t, perm)?;
            let rho = fluid.density(p, t);
            let rho_p = fluid.density_dp(p, t);
            let rho_t = fluid.density_dt(p, t);
            let f = -q * rho * inv_vol;
            let df_dp = -(q_p * rho + q * rho_p) * inv_vol;
            let df_dt = -(q_t * rho + q * rho_t) * inv_vol;
            let cv = fluid.c_v;
            Ok(SourceEval {
                f,
                f_t: f * cv * t,
                df_dp,
                df_dt,
                dft_dp: df_dp * cv * t,
                dft_dt: cv * (df_dt * t + f),
            })
        }
    }
}
