//! Algorithm labels such as `GP-R100-Re10-F2` and the knobs they expand to.

use std::fmt;
use std::str::FromStr;

use guided_mapf::search::FocalParams;
use guided_mapf::traffic::FlowAccounting;
use guided_mapf::{CostModel, GuideConfig, LifelongConfig, OneShotConfig};

/// Guidance family named by the first part of a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    /// Plain PIBT without guide paths.
    Pibt,
    /// Guide paths are individual shortest paths.
    Sp,
    Gp,
    Gpv,
    GpNo,
    GpSumOvc,
    GpSumNovc,
}

impl Base {
    /// Longest names first so that prefixes resolve unambiguously.
    const NAMES: [(&'static str, Base); 7] = [
        ("GP-SUM-NOVC", Base::GpSumNovc),
        ("GP-SUM-OVC", Base::GpSumOvc),
        ("GP-NO", Base::GpNo),
        ("GPV", Base::Gpv),
        ("GP", Base::Gp),
        ("SP", Base::Sp),
        ("PIBT", Base::Pibt),
    ];

    pub fn model(self) -> CostModel {
        match self {
            Base::Pibt | Base::Sp => CostModel::FreeFlow,
            Base::Gp => CostModel::TwoPart,
            Base::Gpv => CostModel::VertexOnly,
            Base::GpNo => CostModel::TwoPartNormalized,
            Base::GpSumOvc => CostModel::SumOvc,
            Base::GpSumNovc => CostModel::SumNovc,
        }
    }
}

/// Explicit overrides from flags or the config file. They win over the
/// values encoded in a label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Knobs {
    pub cost_model: Option<CostModel>,
    pub focal_w: Option<f64>,
    pub init_per_step: Option<usize>,
    pub refine_iters: Option<usize>,
    pub refine_subset: Option<usize>,
    pub flow_accounting: Option<FlowAccounting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm {
    pub label: String,
    pub base: Base,
    pub init_per_step: Option<usize>,
    pub refine_iterations: Option<usize>,
    pub focal_w: Option<f64>,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let label = s.trim();
        let upper = label.to_ascii_uppercase();
        let (name, base) = Base::NAMES
            .into_iter()
            .find(|(name, _)| {
                upper.starts_with(name)
                    && (upper.len() == name.len() || upper.as_bytes()[name.len()] == b'-')
            })
            .ok_or_else(|| format!("unknown algorithm label {label:?}"))?;
        let mut alg = Algorithm {
            label: label.to_string(),
            base,
            init_per_step: None,
            refine_iterations: None,
            focal_w: None,
        };
        let rest = &label[name.len()..];
        for part in rest.split('-').skip(1) {
            let bad = || format!("bad segment {part:?} in algorithm label {label:?}");
            let lower = part.to_ascii_lowercase();
            if let Some(n) = lower.strip_prefix("re") {
                alg.refine_iterations = Some(n.parse().map_err(|_| bad())?);
            } else if let Some(n) = lower.strip_prefix('r') {
                alg.init_per_step = Some(n.parse().map_err(|_| bad())?);
            } else if let Some(w) = lower.strip_prefix('f') {
                let w: f64 = w.parse().map_err(|_| bad())?;
                FocalParams::new(w).map_err(|e| e.to_string())?;
                alg.focal_w = Some(w);
            } else {
                return Err(bad());
            }
        }
        if base == Base::Pibt && !rest.is_empty() {
            return Err(format!("PIBT takes no modifiers: {label:?}"));
        }
        Ok(alg)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl Algorithm {
    fn guide(&self, knobs: &Knobs, seed: u64) -> Result<GuideConfig, String> {
        let mut guide = GuideConfig {
            model: knobs.cost_model.unwrap_or(self.base.model()),
            accounting: knobs.flow_accounting.unwrap_or_default(),
            seed,
            ..GuideConfig::default()
        };
        if let Some(w) = knobs.focal_w.or(self.focal_w) {
            guide.focal = Some(FocalParams::new(w).map_err(|e| e.to_string())?);
        }
        if let Some(n) = knobs.refine_subset {
            guide.subset_size = n;
        }
        Ok(guide)
    }

    pub fn lifelong_config(
        &self,
        knobs: &Knobs,
        seed: u64,
        timesteps: usize,
    ) -> Result<LifelongConfig, String> {
        let init_per_step = match self.base {
            Base::Pibt => Some(0),
            _ => knobs.init_per_step.or(self.init_per_step),
        };
        let config = LifelongConfig {
            init_per_step,
            refine_iterations: knobs.refine_iters.or(self.refine_iterations).unwrap_or(0),
            guide: self.guide(knobs, seed)?,
            max_timesteps: timesteps,
            seed,
            ..LifelongConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn oneshot_config(&self, knobs: &Knobs, seed: u64) -> Result<OneShotConfig, String> {
        let defaults = OneShotConfig::default();
        Ok(OneShotConfig {
            guide: match self.base {
                Base::Pibt => None,
                _ => Some(self.guide(knobs, seed)?),
            },
            refine_iterations: knobs
                .refine_iters
                .or(self.refine_iterations)
                .unwrap_or(defaults.refine_iterations),
            ..defaults
        })
    }
}
