use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::signal::GaussianSourceSpec;
use crate::abc::{AmplitudeReference, AngleConfig};
use crate::fem::PhysParams;
use crate::integrator::SchemeParams;
use crate::mesh::{
    generate_channel, generate_channel_reference, generate_square, generate_square_reference, read_msh, Mesh,
    TagMap,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    /// Channel with a tilted absorbing top; see `generate_channel`.
    Channel {
        width: f64,
        length: f64,
        tilt_deg: f64,
        h: f64,
    },
    /// Square [0, side]² with absorbing edges.
    Square { side: f64, h: f64 },
    /// MSH 2.2 ASCII file; relative paths resolve against the scenario file.
    Msh {
        path: PathBuf,
        #[serde(default)]
        tags: TagMap,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Same channel continued upward by `extension` beyond its highest point.
    /// A zero extension is derived from the run length (c·T/2).
    Channel {
        #[serde(default)]
        extension: f64,
    },
    /// The square padded by `margin` on every side.
    Square { margin: f64 },
    Msh {
        path: PathBuf,
        #[serde(default)]
        tags: TagMap,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default = "default_rho_inf")]
    pub rho_inf: f64,
    /// Either `dt` or `steps_per_period` must be given.
    pub dt: Option<f64>,
    pub steps_per_period: Option<f64>,
    /// Either `n_steps` or `end_time` must be given.
    pub n_steps: Option<usize>,
    pub end_time: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_kappa_max")]
    pub kappa_max: usize,
}

fn default_rho_inf() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    SchemeParams::DEFAULT_TOL
}
fn default_kappa_max() -> usize {
    SchemeParams::DEFAULT_KAPPA_MAX
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcSpec {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_true")]
    pub adaptive: bool,
    #[serde(default)]
    pub fixed_theta: f64,
    #[serde(default = "default_p1")]
    pub p1: f64,
    #[serde(default = "default_p2")]
    pub p2: f64,
}

fn default_sigma() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_p1() -> f64 {
    AngleConfig::DEFAULT_P1
}
fn default_p2() -> f64 {
    AngleConfig::DEFAULT_P2
}

impl Default for AbcSpec {
    fn default() -> Self {
        AbcSpec {
            sigma: default_sigma(),
            adaptive: true,
            fixed_theta: 0.0,
            p1: default_p1(),
            p2: default_p2(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Write a VTK file every this many snapshots (0 disables).
    #[serde(default = "default_vtk_every")]
    pub vtk_every: usize,
}

fn default_stride() -> usize {
    2
}

fn default_vtk_every() -> usize {
    50
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            snapshot_stride: default_stride(),
            vtk_every: default_vtk_every(),
        }
    }
}

/// A complete experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub mesh: MeshSpec,
    pub reference: Option<ReferenceSpec>,
    pub physics: PhysParams,
    pub excitation: Option<ExcitationSpec>,
    pub source: Option<GaussianSourceSpec>,
    pub time: TimeSpec,
    #[serde(default)]
    pub abc: AbcSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory that relative mesh paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.base_dir = base_dir.into();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = &self.excitation {
            if !(e.frequency > 0.0 && e.amplitude.is_finite()) {
                return Err(Error::Config("excitation needs a positive frequency and finite amplitude".into()));
            }
        }
        if let Some(s) = &self.source {
            if !(s.frequency > 0.0) || s.centers.len() != s.weights.len() || !(s.sigma_x > 0.0 && s.sigma_y > 0.0) {
                return Err(Error::Config(
                    "source needs a positive frequency, positive widths, and one weight per center".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.abc.sigma) {
            return Err(Error::Config(format!("abc.sigma = {} outside [0, 1]", self.abc.sigma)));
        }
        if !(self.output.snapshot_stride >= 1) {
            return Err(Error::Config("output.snapshot_stride must be at least 1".into()));
        }
        if let (Some(ReferenceSpec::Channel { .. }), false) =
            (&self.reference, matches!(self.mesh, MeshSpec::Channel { .. }))
        {
            return Err(Error::Config("a channel reference needs a channel mesh".into()));
        }
        if let (Some(ReferenceSpec::Square { .. }), false) =
            (&self.reference, matches!(self.mesh, MeshSpec::Square { .. }))
        {
            return Err(Error::Config("a square reference needs a square mesh".into()));
        }
        self.scheme()?;
        self.angle_config(&Variant::from_abc(&self.abc)?).validate()
    }

    /// Signal frequency, from the excitation or the volumetric source.
    pub fn frequency(&self) -> Option<f64> {
        self.excitation
            .as_ref()
            .map(|e| e.frequency)
            .or_else(|| self.source.as_ref().map(|s| s.frequency))
    }

    pub fn scheme(&self) -> Result<SchemeParams> {
        let t = &self.time;
        let dt = match (t.dt, t.steps_per_period) {
            (Some(dt), None) => dt,
            (None, Some(spp)) => {
                let f = self
                    .frequency()
                    .ok_or_else(|| Error::Config("steps_per_period needs a signal frequency".into()))?;
                if !(spp > 0.0) {
                    return Err(Error::Config("time.steps_per_period must be positive".into()));
                }
                1.0 / (f * spp)
            }
            _ => return Err(Error::Config("give exactly one of time.dt and time.steps_per_period".into())),
        };
        let n_steps = match (t.n_steps, t.end_time) {
            (Some(n), None) => n,
            (None, Some(end)) if end >= 0.0 && dt > 0.0 => (end / dt).round() as usize,
            _ => return Err(Error::Config("give exactly one of time.n_steps and time.end_time".into())),
        };
        let mut s = SchemeParams::new(t.rho_inf, dt, n_steps)?;
        if !(t.tol > 0.0) || t.kappa_max == 0 {
            return Err(Error::Config("time.tol must be positive and time.kappa_max at least 1".into()));
        }
        s.tol = t.tol;
        s.kappa_max = t.kappa_max;
        Ok(s)
    }

    /// Amplitude the p₁ switch compares against.
    pub fn amplitude_reference(&self) -> AmplitudeReference {
        match &self.excitation {
            Some(e) => AmplitudeReference::Fixed(e.amplitude.abs()),
            None => AmplitudeReference::InteriorMax,
        }
    }

    pub fn angle_config(&self, v: &Variant) -> AngleConfig {
        AngleConfig {
            p1: self.abc.p1,
            p2: self.abc.p2,
            reference: self.amplitude_reference(),
            adaptive: matches!(v.angle, AngleMode::Adaptive),
            fixed_theta: match v.angle {
                AngleMode::Adaptive => 0.0,
                AngleMode::Fixed(t) => t,
            },
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.mesh {
            MeshSpec::Channel {
                width,
                length,
                tilt_deg,
                h,
            } => generate_channel(*width, *length, *tilt_deg, *h),
            MeshSpec::Square { side, h } => generate_square(*side, *h),
            MeshSpec::Msh { path, tags } => read_msh(self.resolve(path), tags),
        }
    }

    /// Enlarged-domain mesh, if the scenario defines one.
    pub fn build_reference_mesh(&self) -> Result<Option<Mesh>> {
        let Some(spec) = &self.reference else {
            return Ok(None);
        };
        let mesh = match (spec, &self.mesh) {
            (
                ReferenceSpec::Channel { extension },
                MeshSpec::Channel {
                    width,
                    length,
                    tilt_deg,
                    h,
                },
            ) => {
                let ext = if *extension > 0.0 {
                    *extension
                } else {
                    0.5 * self.physics.c() * self.scheme()?.end_time()
                };
                generate_channel_reference(*width, *length, *tilt_deg, *h, ext)?
            }
            (ReferenceSpec::Square { margin }, MeshSpec::Square { side, h }) => {
                generate_square_reference(*side, *h, *margin)?
            }
            (ReferenceSpec::Msh { path, tags }, _) => read_msh(self.resolve(path), tags)?,
            _ => return Err(Error::Config("reference kind does not match the mesh kind".into())),
        };
        Ok(Some(mesh))
    }
}

/// How the incidence angle is chosen for a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleMode {
    Adaptive,
    /// Fixed angle in degrees.
    Fixed(f64),
}

/// One absorbing-condition variant: σ and the angle mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variant {
    pub sigma: f64,
    pub angle: AngleMode,
}

impl Variant {
    pub fn adaptive(sigma: f64) -> Self {
        Variant {
            sigma,
            angle: AngleMode::Adaptive,
        }
    }

    pub fn fixed(sigma: f64, theta_deg: f64) -> Self {
        Variant {
            sigma,
            angle: AngleMode::Fixed(theta_deg),
        }
    }

    pub fn from_abc(abc: &AbcSpec) -> Result<Self> {
        let v = if abc.adaptive {
            Variant::adaptive(abc.sigma)
        } else {
            Variant::fixed(abc.sigma, abc.fixed_theta)
        };
        v.validate()?;
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Config(format!("sigma = {} outside [0, 1]", self.sigma)));
        }
        if let AngleMode::Fixed(t) = self.angle {
            if !(0.0..=90.0).contains(&t) {
                return Err(Error::Config(format!("angle {t}° outside [0°, 90°]")));
            }
        }
        Ok(())
    }

    /// File-system friendly name, e.g. `sigma-1_2-adaptive` or `sigma-0-theta-50`.
    pub fn label(&self) -> String {
        let sigma = fmt_sigma(self.sigma).replace('/', "_");
        match self.angle {
            AngleMode::Adaptive => format!("sigma-{sigma}-adaptive"),
            AngleMode::Fixed(t) => format!("sigma-{sigma}-theta-{t}"),
        }
    }
}

fn fmt_sigma(s: f64) -> String {
    if s == 0.5 {
        "1/2".into()
    } else {
        format!("{s}")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.angle {
            AngleMode::Adaptive => write!(f, "{}:adaptive", fmt_sigma(self.sigma)),
            AngleMode::Fixed(t) => write!(f, "{}:{t}", fmt_sigma(self.sigma)),
        }
    }
}

/// Parses `<sigma>:<adaptive|degrees>`, where sigma may be a fraction such as `1/2`.
impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad variant {s:?}, expected <sigma>:<adaptive|degrees>"));
        let (sig, ang) = s.split_once(':').ok_or_else(bad)?;
        let sigma = match sig.trim().split_once('/') {
            Some((n, d)) => {
                let n: f64 = n.trim().parse().map_err(|_| bad())?;
                let d: f64 = d.trim().parse().map_err(|_| bad())?;
                n / d
            }
            None => sig.trim().parse().map_err(|_| bad())?,
        };
        let angle = match ang.trim() {
            "adaptive" | "a" => AngleMode::Adaptive,
            deg => AngleMode::Fixed(deg.trim_end_matches("deg").parse().map_err(|_| bad())?),
        };
        let v = Variant { sigma, angle };
        v.validate()?;
        Ok(v)
    }
}
