//! Experiment configuration in INI form.
//!
//! ```ini
//! [geometry]
//! x0 = -10
//! xi = 0
//! x1 = 10
//! y0 = 0
//! y1 = 10
//!
//! [experiment]
//! m = 26,51,101,201,401
//! orders = 4,6
//! methods = projection,hybrid
//! interp = traditional,op
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::coupling::{Geometry, Method, Orientation};
use crate::diagnostics::PowerIterationOptions;
use crate::error::{Error, Result};
use crate::experiment::SweepSettings;
use crate::interp::InterpKind;
use crate::sbp::Order;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            other => Err(Error::Parse(format!("profile `{other}`"))),
        }
    }

    pub fn m_list(self) -> Vec<usize> {
        match self {
            Profile::Quick => vec![26, 51, 101, 201, 401],
            Profile::Full => vec![26, 51, 101, 201, 401, 801],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialData {
    Manufactured,
    Gaussian,
    Zero,
}

impl InitialData {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "manufactured" => Ok(InitialData::Manufactured),
            "gaussian" => Ok(InitialData::Gaussian),
            "zero" => Ok(InitialData::Zero),
            other => Err(Error::Parse(format!("initial data `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InitialData::Manufactured => "manufactured",
            InitialData::Gaussian => "gaussian",
            InitialData::Zero => "zero",
        }
    }
}

/// Settings of the `simulate` subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulateConfig {
    pub initial: InitialData,
    pub m: usize,
    pub order: Order,
    pub method: Method,
    pub interp: InterpKind,
    pub snapshots: Vec<f64>,
    pub pulse_x: f64,
    pub pulse_y: f64,
    pub pulse_width: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            initial: InitialData::Gaussian,
            m: 51,
            order: Order::Fourth,
            method: Method::Projection,
            interp: InterpKind::OrderPreserving,
            snapshots: vec![0.0, 1.0, 2.0],
            pulse_x: -2.0,
            pulse_y: 5.0,
            pulse_width: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub m_list: Vec<usize>,
    pub spectrum_m: Vec<usize>,
    pub orders: Vec<Order>,
    pub methods: Vec<Method>,
    pub interp: Vec<InterpKind>,
    pub orientation: Orientation,
    pub op_substitution: bool,
    pub c1: f64,
    pub c2: f64,
    pub safety: f64,
    pub t_final: f64,
    pub seed: u64,
    pub power_tol: f64,
    pub record_time: bool,
    pub simulate: SimulateConfig,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Quick)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_value<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value `{s}` for `{key}`")))
}

fn parse_list<T>(key: &str, s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| f(p).map_err(|e| Error::Parse(format!("`{key}`: {e}"))))
        .collect()
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            geometry: Geometry::default(),
            m_list: profile.m_list(),
            spectrum_m: vec![101],
            orders: vec![Order::Fourth, Order::Sixth],
            methods: Method::ALL.to_vec(),
            interp: InterpKind::ALL.to_vec(),
            orientation: Orientation::Standard,
            op_substitution: true,
            c1: 1.0,
            c2: 0.5,
            safety: 0.1,
            t_final: 2.0,
            seed: 1,
            power_tol: 1e-7,
            record_time: false,
            simulate: SimulateConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            geometry: self.geometry,
            orientation: self.orientation,
            op_substitution: self.op_substitution,
            c1: self.c1,
            c2: self.c2,
            safety: self.safety,
            t_final: self.t_final,
            power: PowerIterationOptions {
                tol: self.power_tol,
                seed: self.seed,
                ..Default::default()
            },
            record_time: self.record_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.x0 < g.xi && g.xi < g.x1 && g.y0 < g.y1) {
            return Err(Error::Parse(
                "geometry must satisfy x0 < xi < x1 and y0 < y1".into(),
            ));
        }
        if self.m_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("m list must be strictly ascending".into()));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Parse(format!(
                "safety {} outside (0, 1]",
                self.safety
            )));
        }
        if !(self.t_final > 0.0) || !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::Parse("t_final, c1 and c2 must be positive".into()));
        }
        Ok(())
    }

    /// Overrides the profile defaults with every key present in `text`.
    pub fn from_ini_str(text: &str, profile: Profile) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut c = Self::for_profile(profile);
        let get = |sec: &str, key: &str| ini.section(Some(sec)).and_then(|s| s.get(key));
        if let Some(v) = get("geometry", "x0") {
            c.geometry.x0 = parse_value("x0", v)?;
        }
        if let Some(v) = get("geometry", "xi") {
            c.geometry.xi = parse_value("xi", v)?;
        }
        if let Some(v) = get("geometry", "x1") {
            c.geometry.x1 = parse_value("x1", v)?;
        }
        if let Some(v) = get("geometry", "y0") {
            c.geometry.y0 = parse_value("y0", v)?;
        }
        if let Some(v) = get("geometry", "y1") {
            c.geometry.y1 = parse_value("y1", v)?;
        }
        let ex = "experiment";
        if let Some(v) = get(ex, "m") {
            c.m_list = parse_list("m", v, |s| parse_value("m", s))?;
        }
        if let Some(v) = get(ex, "spectrum_m") {
            c.spectrum_m = parse_list("spectrum_m", v, |s| parse_value("spectrum_m", s))?;
        }
        if let Some(v) = get(ex, "orders") {
            c.orders = parse_list("orders", v, |s| {
                Order::from_value(parse_value("orders", s)?)
            })?;
        }
        if let Some(v) = get(ex, "methods") {
            c.methods = parse_list("methods", v, Method::parse)?;
        }
        if let Some(v) = get(ex, "interp") {
            c.interp = parse_list("interp", v, InterpKind::parse)?;
        }
        if let Some(v) = get(ex, "orientation") {
            c.orientation = Orientation::parse(v)?;
        }
        if let Some(v) = get(ex, "op_substitution") {
            c.op_substitution = parse_value("op_substitution", v)?;
        }
        if let Some(v) = get(ex, "c1") {
            c.c1 = parse_value("c1", v)?;
        }
        if let Some(v) = get(ex, "c2") {
            c.c2 = parse_value("c2", v)?;
        }
        if let Some(v) = get(ex, "safety") {
            c.safety = parse_value("safety", v)?;
        }
        if let Some(v) = get(ex, "t_final") {
            c.t_final = parse_value("t_final", v)?;
        }
        if let Some(v) = get(ex, "seed") {
            c.seed = parse_value("seed", v)?;
        }
        if let Some(v) = get(ex, "power_tol") {
            c.power_tol = parse_value("power_tol", v)?;
        }
        if let Some(v) = get(ex, "record_time") {
            c.record_time = parse_value("record_time", v)?;
        }
        let sim = "simulate";
        if let Some(v) = get(sim, "initial") {
            c.simulate.initial = InitialData::parse(v)?;
        }
        if let Some(v) = get(sim, "m") {
            c.simulate.m = parse_value("simulate.m", v)?;
        }
        if let Some(v) = get(sim, "order") {
            c.simulate.order = Order::from_value(parse_value("simulate.order", v)?)?;
        }
        if let Some(v) = get(sim, "method") {
            c.simulate.method = Method::parse(v)?;
        }
        if let Some(v) = get(sim, "interp") {
            c.simulate.interp = InterpKind::parse(v)?;
        }
        if let Some(v) = get(sim, "snapshots") {
            c.simulate.snapshots = parse_list("snapshots", v, |s| parse_value("snapshots", s))?;
        }
        if let Some(v) = get(sim, "pulse_x") {
            c.simulate.pulse_x = parse_value("pulse_x", v)?;
        }
        if let Some(v) = get(sim, "pulse_y") {
            c.simulate.pulse_y = parse_value("pulse_y", v)?;
        }
        if let Some(v) = get(sim, "pulse_width") {
            c.simulate.pulse_width = parse_value("pulse_width", v)?;
        }
        if let Some(v) = get("output", "dir") {
            c.out_dir = PathBuf::from(v.trim());
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        Self::from_ini_str(&std::fs::read_to_string(path)?, profile)
    }

    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        let g = &self.geometry;
        ini.with_section(Some("geometry"))
            .set("x0", g.x0.to_string())
            .set("xi", g.xi.to_string())
            .set("x1", g.x1.to_string())
            .set("y0", g.y0.to_string())
            .set("y1", g.y1.to_string());
        ini.with_section(Some("experiment"))
            .set("m", join(&self.m_list))
            .set("spectrum_m", join(&self.spectrum_m))
            .set(
                "orders",
                join(&self.orders.iter().map(|o| o.value()).collect::<Vec<_>>()),
            )
            .set(
                "methods",
                join(&self.methods.iter().map(|m| m.label()).collect::<Vec<_>>()),
            )
            .set(
                "interp",
                join(&self.interp.iter().map(|k| k.label()).collect::<Vec<_>>()),
            )
            .set("orientation", self.orientation.label())
            .set("op_substitution", self.op_substitution.to_string())
            .set("c1", self.c1.to_string())
            .set("c2", self.c2.to_string())
            .set("safety", self.safety.to_string())
            .set("t_final", self.t_final.to_string())
            .set("seed", self.seed.to_string())
            .set("power_tol", self.power_tol.to_string())
            .set("record_time", self.record_time.to_string());
        let s = &self.simulate;
        ini.with_section(Some("simulate"))
            .set("initial", s.initial.label())
            .set("m", s.m.to_string())
            .set("order", s.order.value().to_string())
            .set("method", s.method.label())
            .set("interp", s.interp.label())
            .set("snapshots", join(&s.snapshots))
            .set("pulse_x", s.pulse_x.to_string())
            .set("pulse_y", s.pulse_y.to_string())
            .set("pulse_width", s.pulse_width.to_string());
        ini.with_section(Some("output"))
            .set("dir", self.out_dir.display().to_string());
        let mut buf = Vec::new();
        ini.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ini output is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut c = ExperimentConfig::for_profile(Profile::Full);
        c.c2 = 0.3;
        c.safety = 0.05;
        c.power_tol = 1e-9;
        c.methods = vec![Method::Hybrid];
        c.simulate.snapshots = vec![0.25, 1.0 / 3.0];
        let text = c.to_ini_string();
        let back = ExperimentConfig::from_ini_str(&text, Profile::Quick).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_ini_string(), text);
    }

    #[test]
    fn partial_file_keeps_profile_defaults() {
        let c =
            ExperimentConfig::from_ini_str("[experiment]\nm = 26, 51\n", Profile::Full).unwrap();
        assert_eq!(c.m_list, vec![26, 51]);
        assert_eq!(c.orders, vec![Order::Fourth, Order::Sixth]);
        assert_eq!(c.t_final, 2.0);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(
            ExperimentConfig::from_ini_str("[experiment]\nm = 51,26\n", Profile::Quick).is_err()
        );
        assert!(
            ExperimentConfig::from_ini_str("[experiment]\norders = 8\n", Profile::Quick).is_err()
        );
        assert!(
            ExperimentConfig::from_ini_str("[experiment]\nsafety = abc\n", Profile::Quick).is_err()
        );
        assert!(
            ExperimentConfig::from_ini_str("[experiment]\nmethods = sat\n", Profile::Quick)
                .is_err()
        );
    }

    #[test]
    fn profiles_differ_only_in_largest_m() {
        assert!(!Profile::Quick.m_list().contains(&801));
        assert!(Profile::Full.m_list().contains(&801));
    }
}
