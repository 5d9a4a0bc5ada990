//! Run configuration: a TOML file with sections, overridden field by field
//! by command-line flags, then resolved against defaults. The resolved form
//! is what every output file embeds.

use std::path::Path;

use diffusim_core::dynamics::{InitialCondition, Params};
use diffusim_core::lattice::{Boundary, Lattice};
use diffusim_core::observables::Mode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub critical: CriticalSection,
    #[serde(default)]
    pub couple: CoupleSection,
    #[serde(default)]
    pub blocks: BlocksSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub bass: BassSection,
}

macro_rules! section {
    ($args:tt $name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Clone, Default, Deserialize, clap::Args)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                #[arg $args]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            /// Fields set in `over` replace those of `self`.
            pub fn overlay(&mut self, over: &Self) {
                $(
                    if over.$field.is_some() {
                        self.$field = over.$field.clone();
                    }
                )*
            }
        }
    };
}

section!((long, global = true) ModelSection { lambda: f64, alpha: f64, gamma: f64, forget: f64 });
section!((long, global = true) LatticeSection { dim: usize, side: usize, boundary: BoundaryArg });
section!((long) RunSection {
    initial: InitialCondition,
    horizon: f64,
    replicates: u64,
    mode: ModeArg,
});
section!((long) SimulateSection { time_step: f64 });
section!((long) SweepSection { lambdas: ListArg, alphas: ListArg, gammas: ListArg });
section!((long) CriticalSection {
    axis: AxisArg,
    low: f64,
    high: f64,
    threshold: f64,
    tolerance: f64,
});
section!((long) CoupleSection {
    mode: CouplingArg,
    seeds: u64,
    alpha_low: f64,
    alpha_high: f64,
});
section!((long) BlocksSection {
    kind: BlockKindArg,
    l: usize,
    t: f64,
    width: usize,
    height: usize,
    sampling: SamplingArg,
    origin: OriginArg,
});
section!((long) OracleSection { times: ListArg, max_states: usize });
section!((long) BassSection { p: f64, q: f64, n: f64, a0: f64, t_max: f64, step: f64 });

/// Values that parse from a flag string and from the matching TOML value.
macro_rules! text_enum {
    ($name:ident : $inner:ty { $($text:literal => $val:expr),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "String")]
        pub struct $name(pub $inner);

        impl std::str::FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok(Self($val)),)*
                    _ => Err(format!("unknown value '{s}', expected one of: {}", [$($text),*].join(", "))),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = String;
            fn try_from(s: String) -> Result<Self, String> {
                s.parse()
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Alpha,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Extinction,
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    FullInterval,
    MinimalSeed,
}

use diffusim_core::estimation::Axis;
use diffusim_core::renormalization::Sampling;

text_enum!(BoundaryArg: Boundary { "torus" => Boundary::Torus, "free" => Boundary::Free });
text_enum!(ModeArg: Mode { "awareness" => Mode::Awareness, "adoption" => Mode::Adoption });
text_enum!(AxisArg: Axis { "lambda" => Axis::Lambda, "alpha" => Axis::Alpha });
text_enum!(CouplingArg: Coupling { "alpha" => Coupling::Alpha, "contact" => Coupling::Contact });
text_enum!(BlockKindArg: BlockKind { "extinction" => BlockKind::Extinction, "survival" => BlockKind::Survival });
text_enum!(SamplingArg: Sampling { "independent" => Sampling::Independent, "shared" => Sampling::Shared });
text_enum!(OriginArg: Origin { "full-interval" => Origin::FullInterval, "minimal-seed" => Origin::MinimalSeed });

/// A list of numbers: a TOML array or a comma-separated flag value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>")]
pub struct ListArg(pub Vec<f64>);

impl From<Vec<f64>> for ListArg {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::str::FromStr for ListArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

pub fn load(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Settings shared by all experiments, after defaults.
#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub seed: u64,
    pub model: Params,
    pub lattice: ResolvedLattice,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedLattice {
    pub dim: usize,
    pub side: usize,
    pub boundary: Boundary,
}

impl ResolvedLattice {
    pub fn build(&self) -> Result<Lattice, String> {
        Lattice::new(self.dim, &vec![self.side; self.dim], self.boundary).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub initial: InitialCondition,
    pub horizon: f64,
    pub replicates: u64,
    pub mode: Mode,
}

pub fn common(cfg: &FileConfig) -> Result<Common, String> {
    let seed = cfg
        .seed
        .ok_or("a seed is required: set `seed` in the config file or pass --seed")?;
    let m = &cfg.model;
    let model = Params {
        lambda: m.lambda.unwrap_or(1.0),
        alpha: m.alpha.unwrap_or(1.0),
        gamma: m.gamma.unwrap_or(0.0),
        forget: m.forget.unwrap_or(1.0),
    };
    model.validate().map_err(|e| e.to_string())?;
    let l = &cfg.lattice;
    let lattice = ResolvedLattice {
        dim: l.dim.unwrap_or(1),
        side: l.side.unwrap_or(100),
        boundary: l.boundary.map_or(Boundary::Torus, |b| b.0),
    };
    lattice.build()?;
    Ok(Common { seed, model, lattice })
}

pub fn run(cfg: &FileConfig) -> Result<ResolvedRun, String> {
    let r = &cfg.run;
    let run = ResolvedRun {
        initial: r.initial.clone().unwrap_or(InitialCondition::SingleAdopterOrigin),
        horizon: r.horizon.unwrap_or(10.0),
        replicates: r.replicates.unwrap_or(100),
        mode: r.mode.map_or(Mode::Awareness, |m| m.0),
    };
    if !(run.horizon.is_finite() && run.horizon >= 0.0) {
        return Err(format!("horizon must be finite and >= 0, got {}", run.horizon));
    }
    if run.replicates == 0 {
        return Err("replicates must be >= 1".into());
    }
    run.initial.validate().map_err(|e| e.to_string())?;
    Ok(run)
}
