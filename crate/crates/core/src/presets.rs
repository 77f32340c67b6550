//! The six reference scenarios.

use std::f64::consts::PI;

use crate::coupled::{InitialPotential, Scenario, TargetTrajectory};
use crate::error::{Error, Result};
use crate::model::HHParameters;
use crate::numerics::Mesh;

pub const PRESET_NAMES: [&str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"];

pub const DEFAULT_HORIZON: f64 = 100.0;
pub const DEFAULT_MAX_X: usize = 25;
pub const DEFAULT_MAX_T: usize = 200;

/// Reduced potassium conductance of the late-firing scenarios.
pub const G_K_LOW: f64 = 3.8229;

/// Angular frequency of the periodic target.
pub const FIG3_FREQUENCY: f64 = 4.0 / PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub scenario: Scenario,
    /// Abscissa of the trace plots.
    pub x_fixed: f64,
}

pub fn preset(name: &str) -> Result<Preset> {
    let mut params = HHParameters::default();
    let mut v0 = InitialPotential::Constant { value: 4.82 };
    let mut target = TargetTrajectory::Constant { value: 0.0 };
    let mut x_fixed = 0.0;
    match name {
        "fig1" => {}
        "fig2" => params.rho = 20.0,
        "fig3" => {
            params.rho = 20.0;
            target = TargetTrajectory::TimeSinusoid {
                amplitude: 0.5,
                frequency: FIG3_FREQUENCY,
                offset: 0.6,
            };
        }
        "fig4" => params.g_k = G_K_LOW,
        "fig5" => {
            params.g_k = G_K_LOW;
            params.rho = 20.0;
        }
        "fig6" => {
            params.delta = 50.0;
            params.rho = 50.0;
            v0 = InitialPotential::SpaceSinusoid {
                amplitude: 0.5,
                wavenumber: 4.0 * PI,
                offset: 0.6,
            };
            x_fixed = 0.5;
        }
        _ => return Err(Error::UnknownPreset(name.to_owned())),
    }
    Ok(Preset {
        name: name.to_owned(),
        scenario: Scenario {
            params,
            mesh: Mesh::new(1.0, DEFAULT_HORIZON, DEFAULT_MAX_X, DEFAULT_MAX_T)?,
            v0,
            n0: 0.45,
            m0: 0.03,
            h0: 0.397,
            target,
        },
        x_fixed,
    })
}
