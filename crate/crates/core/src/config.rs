//! Run configuration: flat `key = value` files, command-line overrides and
//! resolution against a preset.
//!
//! ```text
//! # fig3 with the alternative target frequency
//! preset = fig3
//! target_frequency = 12.566370614359172
//! maxT = 400
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupled::{InitialPotential, IterationSettings, Scenario, TargetTrajectory};
use crate::error::{Error, Result};
use crate::numerics::Mesh;
use crate::presets::{self, Preset};

/// Name recorded for runs that do not start from a preset.
pub const CUSTOM: &str = "custom";

trait ConfigValue: Sized {
    fn parse_value(raw: &str) -> std::result::Result<Self, String>;
}

impl ConfigValue for f64 {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        match f64::from_str(raw) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(format!("`{raw}` is not finite")),
            Err(_) => Err(format!("`{raw}` is not a number")),
        }
    }
}

impl ConfigValue for usize {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        usize::from_str(raw).map_err(|_| format!("`{raw}` is not a nonnegative integer"))
    }
}

impl ConfigValue for bool {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        match raw {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(format!("`{raw}` is not a boolean")),
        }
    }
}

impl ConfigValue for String {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        if raw.is_empty() {
            Err("empty value".into())
        } else {
            Ok(raw.to_owned())
        }
    }
}

impl ConfigValue for Vec<f64> {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        raw.split(',').map(|s| f64::parse_value(s.trim())).collect()
    }
}

macro_rules! overrides {
    ($($field:ident : $ty:ty => $key:literal),* $(,)?) => {
        /// Optional settings layered over a preset. Unset fields keep the
        /// preset's value.
        #[derive(Debug, Clone, Default, PartialEq)]
        pub struct ConfigOverrides {
            $(pub $field: Option<$ty>,)*
        }

        /// Every key accepted in a config file.
        pub const CONFIG_KEYS: &[&str] = &[$($key),*];

        impl ConfigOverrides {
            fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<()> {
                match key {
                    $($key => {
                        if self.$field.is_some() {
                            return Err(Error::Config { line, message: format!("duplicate key `{key}`") });
                        }
                        let value = <$ty>::parse_value(raw)
                            .map_err(|m| Error::Config { line, message: format!("{key}: {m}") })?;
                        self.$field = Some(value);
                    })*
                    _ => {
                        return Err(Error::Config { line, message: format!("unknown key `{key}`") });
                    }
                }
                Ok(())
            }

            /// Fields set in `other` replace those in `self`.
            pub fn merge(&mut self, other: ConfigOverrides) {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            }
        }
    };
}

overrides! {
    preset: String => "preset",
    g_k: f64 => "g_K",
    g_na: f64 => "g_Na",
    g_l: f64 => "g_l",
    v_k: f64 => "V_K",
    v_na: f64 => "V_Na",
    v_l: f64 => "V_l",
    delta: f64 => "delta",
    c_m: f64 => "C_M",
    rho: f64 => "rho",
    epsilon: f64 => "epsilon",
    length: f64 => "L",
    horizon: f64 => "T",
    max_x: usize => "maxX",
    max_t: usize => "maxT",
    n0: f64 => "n0",
    m0: f64 => "m0",
    h0: f64 => "h0",
    v0: f64 => "v0",
    v0_amplitude: f64 => "v0_amplitude",
    v0_wavenumber: f64 => "v0_wavenumber",
    v0_offset: f64 => "v0_offset",
    target: f64 => "target",
    target_amplitude: f64 => "target_amplitude",
    target_frequency: f64 => "target_frequency",
    target_offset: f64 => "target_offset",
    target_profile: Vec<f64> => "target_profile",
    threshold: f64 => "threshold",
    max_iter: usize => "max_iter",
    time_budget: f64 => "time_budget",
    rel_tol: f64 => "rel_tol",
    abs_tol: f64 => "abs_tol",
    max_step: f64 => "max_step",
    x_fixed: f64 => "x_fixed",
    csv: bool => "csv",
    plots: bool => "plots",
}

/// Parses a config file. Blank lines and text after `#` are ignored;
/// unknown and repeated keys are errors.
pub fn parse_config(text: &str) -> Result<ConfigOverrides> {
    let mut out = ConfigOverrides::default();
    for (k, raw_line) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        out.set(key.trim(), value.trim(), line)?;
    }
    Ok(out)
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub scenario: Scenario,
    pub settings: IterationSettings,
    /// Abscissa of the trace plots.
    pub x_fixed: f64,
    pub csv: bool,
    pub plots: bool,
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            name: preset.name,
            scenario: preset.scenario,
            settings: IterationSettings::default(),
            x_fixed: preset.x_fixed,
            csv: true,
            plots: true,
        }
    }

    /// Applies `overrides` on top of the named preset, or on top of the
    /// first preset's baseline when none is named.
    pub fn resolve(overrides: ConfigOverrides) -> Result<Self> {
        let base = match &overrides.preset {
            Some(name) => RunConfig::from_preset(presets::preset(name)?),
            None => {
                let mut c = RunConfig::from_preset(presets::preset("fig1")?);
                c.name = CUSTOM.to_owned();
                c
            }
        };
        base.apply(overrides)
    }

    /// Applies every set field except `preset`.
    pub fn apply(self, overrides: ConfigOverrides) -> Result<Self> {
        let o = overrides;
        let mut cfg = self;
        let p = &mut cfg.scenario.params;
        let scalars = [
            (&mut p.g_k, o.g_k),
            (&mut p.g_na, o.g_na),
            (&mut p.g_l, o.g_l),
            (&mut p.v_k, o.v_k),
            (&mut p.v_na, o.v_na),
            (&mut p.v_l, o.v_l),
            (&mut p.delta, o.delta),
            (&mut p.c_m, o.c_m),
            (&mut p.rho, o.rho),
            (&mut p.epsilon, o.epsilon),
            (&mut cfg.scenario.n0, o.n0),
            (&mut cfg.scenario.m0, o.m0),
            (&mut cfg.scenario.h0, o.h0),
            (&mut cfg.settings.threshold, o.threshold),
            (&mut cfg.settings.time_budget, o.time_budget),
            (&mut cfg.settings.tol.rel_tol, o.rel_tol),
            (&mut cfg.settings.tol.abs_tol, o.abs_tol),
            (&mut cfg.settings.tol.max_step, o.max_step),
            (&mut cfg.x_fixed, o.x_fixed),
        ];
        for (slot, value) in scalars {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(n) = o.max_iter {
            cfg.settings.max_iterations = n;
        }
        if let Some(b) = o.csv {
            cfg.csv = b;
        }
        if let Some(b) = o.plots {
            cfg.plots = b;
        }

        let spec = cfg.scenario.mesh.spec();
        cfg.scenario.mesh = Mesh::new(
            o.length.unwrap_or(spec.length),
            o.horizon.unwrap_or(spec.horizon),
            o.max_x.unwrap_or(spec.max_x),
            o.max_t.unwrap_or(spec.max_t),
        )?;

        cfg.scenario.v0 = resolve_v0(&cfg.scenario.v0, &o)?;
        cfg.scenario.target = resolve_target(&cfg.scenario.target, &o)?;

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.settings.validate()?;
        let length = self.scenario.mesh.length();
        if !(0.0..=length).contains(&self.x_fixed) {
            return Err(Error::domain(format!(
                "x_fixed = {} lies outside [0, {length}]",
                self.x_fixed
            )));
        }
        Ok(())
    }

    /// Mesh column closest to `x_fixed`.
    pub fn x_fixed_index(&self) -> usize {
        let mesh = &self.scenario.mesh;
        let j = (self.x_fixed / mesh.dx()).round() as usize;
        j.min(mesh.max_x() - 1)
    }
}

fn resolve_v0(base: &InitialPotential, o: &ConfigOverrides) -> Result<InitialPotential> {
    let sinusoid = o.v0_amplitude.is_some() || o.v0_wavenumber.is_some() || o.v0_offset.is_some();
    if let Some(value) = o.v0 {
        if sinusoid {
            return Err(Error::domain("`v0` cannot be combined with `v0_amplitude`, `v0_wavenumber` or `v0_offset`"));
        }
        return Ok(InitialPotential::Constant { value });
    }
    if !sinusoid {
        return Ok(base.clone());
    }
    let (a, k, b) = match *base {
        InitialPotential::Constant { value } => (0.0, 0.0, value),
        InitialPotential::SpaceSinusoid {
            amplitude,
            wavenumber,
            offset,
        } => (amplitude, wavenumber, offset),
    };
    Ok(InitialPotential::SpaceSinusoid {
        amplitude: o.v0_amplitude.unwrap_or(a),
        wavenumber: o.v0_wavenumber.unwrap_or(k),
        offset: o.v0_offset.unwrap_or(b),
    })
}

fn resolve_target(base: &TargetTrajectory, o: &ConfigOverrides) -> Result<TargetTrajectory> {
    let sinusoid =
        o.target_amplitude.is_some() || o.target_frequency.is_some() || o.target_offset.is_some();
    let chosen = [o.target.is_some(), sinusoid, o.target_profile.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if chosen > 1 {
        return Err(Error::domain(
            "choose one of `target`, `target_profile` or the `target_amplitude`/`target_frequency`/`target_offset` keys",
        ));
    }
    if let Some(value) = o.target {
        return Ok(TargetTrajectory::Constant { value });
    }
    if let Some(values) = &o.target_profile {
        return Ok(TargetTrajectory::SpaceProfile {
            values: values.clone(),
        });
    }
    if !sinusoid {
        return Ok(base.clone());
    }
    let (a, w, b) = match base {
        TargetTrajectory::TimeSinusoid {
            amplitude,
            frequency,
            offset,
        } => (*amplitude, *frequency, *offset),
        TargetTrajectory::Constant { value } => (0.0, 0.0, *value),
        TargetTrajectory::SpaceProfile { .. } => (0.0, 0.0, 0.0),
    };
    Ok(TargetTrajectory::TimeSinusoid {
        amplitude: o.target_amplitude.unwrap_or(a),
        frequency: o.target_frequency.unwrap_or(w),
        offset: o.target_offset.unwrap_or(b),
    })
}

/// Reads and parses a config file.
pub fn load_config(path: impl Into<PathBuf>) -> Result<ConfigOverrides> {
    let path = path.into();
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_config(&text)
}
