//! Experiment configuration: one JSON document per run.

use std::path::Path;

use fekete_core::lfunctional::{Reference, DEFAULT_BUDGET};
use fekete_core::polytope::RationalLit;
use fekete_core::{BundleSpec, LatticePolytope, PolytopeSpec, ToricWeight, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub polytope: PolytopeSpec,
    pub weight: WeightSpec,
    /// Level multiplier `λ`; defaults to the volume normalization.
    #[serde(default)]
    pub scale: Option<RationalLit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub polytope: PolytopeSpec,
    pub weight: WeightSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_certify_tol")]
    pub certify: f64,
    #[serde(default = "default_coupled_tol")]
    pub coupled: f64,
    #[serde(default = "default_fiber_tol")]
    pub fiber: f64,
    #[serde(default = "default_mina_tol")]
    pub mina: f64,
    /// `|coupled_energy − equilibrium_energy|` for a single bundle.
    #[serde(default = "default_collapse_tol")]
    pub collapse: f64,
}

fn default_certify_tol() -> f64 {
    0.1
}
fn default_coupled_tol() -> f64 {
    1e-3
}
fn default_fiber_tol() -> f64 {
    1e-6
}
fn default_mina_tol() -> f64 {
    1e-9
}
fn default_collapse_tol() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            certify: default_certify_tol(),
            coupled: default_coupled_tol(),
            fiber: default_fiber_tol(),
            mina: default_mina_tol(),
            collapse: default_collapse_tol(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentConfig {
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottleneckConfig {
    /// Levels `k` for `R(δ^N(p/k), ν_M)` on the first bundle's polytope.
    pub ks: Vec<u32>,
    /// Atoms of the discretized `ν_P`.
    pub m: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtConfig {
    #[serde(default)]
    pub assignment: Option<AssignmentConfig>,
    #[serde(default)]
    pub bottleneck: Option<BottleneckConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required: there are no unseeded runs.
    pub seed: u64,
    pub bundles: Vec<BundleConfig>,
    /// Target weight of the coupled problem; defaults to the sum of the
    /// bundle weights.
    #[serde(default)]
    pub phi: Option<WeightConfig>,
    /// Half-width `B` of the model box `[−B, B]ⁿ` for the maximizer.
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Grid resolution per axis on each polytope.
    #[serde(default)]
    pub res: Option<usize>,
    #[serde(default = "default_ks")]
    pub ks: Vec<u32>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Monte-Carlo sample count for `lk`; exact evaluation when absent.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_reference")]
    pub reference: Reference,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Real parts `x_i` for the expansion checks; drawn from the seed when
    /// absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub ot: Option<OtConfig>,
    /// Also report the gap between `𝓛_k` and the maximal product.
    #[serde(default)]
    pub gap: bool,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_ks() -> Vec<u32> {
    vec![4, 8, 16, 32]
}
fn default_restarts() -> usize {
    8
}
fn default_reference() -> Reference {
    Reference::Logistic
}
fn default_budget() -> u64 {
    DEFAULT_BUDGET as u64
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Schema(m) => CliError::Schema(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Schema(m));
        if self.bundles.is_empty() {
            return bad("bundles: at least one bundle is required".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("certify", t.certify),
            ("coupled", t.coupled),
            ("fiber", t.fiber),
            ("mina", t.mina),
            ("collapse", t.collapse),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("tolerances.{name}: must be positive, got {v}"));
            }
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("ks: levels must be a nonempty list of positive integers".into());
        }
        if self.restarts == 0 {
            return bad("restarts: must be at least 1".into());
        }
        if let Some(b) = self.half_width {
            if !(b.is_finite() && b > 0.0) {
                return bad(format!("half_width: must be positive, got {b}"));
            }
        }
        if matches!(self.res, Some(r) if r < 2) {
            return bad("res: at least 2 nodes per axis".into());
        }
        if matches!(self.samples, Some(0)) {
            return bad("samples: must be positive".into());
        }
        if self.budget == 0 {
            return bad("budget: must be positive".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        Ok(self.polytopes()?[0].dim())
    }

    pub fn polytopes(&self) -> Result<Vec<LatticePolytope>, CliError> {
        self.bundles
            .iter()
            .enumerate()
            .map(|(j, b)| b.polytope.build().map_err(|e| CliError::core(format!("bundle {j} polytope"), e)))
            .collect()
    }

    pub fn bundle_specs(&self) -> Result<Vec<BundleSpec>, CliError> {
        let polys = self.polytopes()?;
        let dim = polys[0].dim();
        self.bundles
            .iter()
            .zip(polys)
            .enumerate()
            .map(|(j, (b, p))| {
                if p.dim() != dim {
                    return Err(CliError::Schema(format!("bundle {j}: all bundles must share one dimension")));
                }
                let ctx = || format!("bundle {j}");
                let w = b.weight.build(&p).map_err(|e| CliError::core(ctx(), e))?;
                let mut spec = BundleSpec::normalized(w).map_err(|e| CliError::core(ctx(), e))?;
                if let Some(s) = b.scale {
                    spec.scale = s.to_rational().map_err(|e| CliError::core(ctx(), e))?;
                }
                Ok(spec)
            })
            .collect()
    }

    /// The coupled target `φ`.
    pub fn phi(&self) -> Result<ToricWeight, CliError> {
        match &self.phi {
            Some(w) => {
                let p = w.polytope.build().map_err(|e| CliError::core("phi polytope", e))?;
                w.weight.build(&p).map_err(|e| CliError::core("phi", e))
            }
            None => {
                let ws: Vec<ToricWeight> = self.bundle_specs()?.into_iter().map(|b| b.weight).collect();
                if ws.len() == 1 {
                    Ok(ws.into_iter().next().unwrap())
                } else {
                    ToricWeight::sum(ws).map_err(|e| CliError::core("phi", e))
                }
            }
        }
    }

    /// Resolution for energies and equilibrium measures.
    pub fn energy_res(&self) -> Result<usize, CliError> {
        Ok(self.res.unwrap_or(if self.dim()? == 1 { 512 } else { 64 }))
    }

    /// Quadrature nodes of `ν_{P_j}` for the coupled solver.
    pub fn coupled_res(&self) -> Result<usize, CliError> {
        Ok(self.res.unwrap_or(if self.dim()? == 1 { 256 } else { 24 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"seed": 3, "bundles": [{"polytope": {"vertices": [[0], [1]]}, "weight": {"family": "logsumexp"}}]}"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.ks, vec![4, 8, 16, 32]);
        assert_eq!(c.restarts, 8);
        assert_eq!(c.reference, Reference::Logistic);
        let b = c.bundle_specs().unwrap();
        assert!((b[0].weight.value(&[0.4]) - ToricWeight::logistic().value(&[0.4])).abs() < 1e-15);
    }

    #[test]
    fn seed_is_required() {
        let r = ExperimentConfig::parse(r#"{"bundles": []}"#);
        assert!(matches!(r, Err(CliError::Schema(m)) if m.contains("seed")));
    }

    #[test]
    fn negative_tolerance_rejected() {
        let text = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"tolerances\": {\"fiber\": -1e-6}");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Schema(_))));
    }

    #[test]
    fn malformed_json_reports_location() {
        let r = ExperimentConfig::parse("{\"seed\": 3,\n \"bundles\": [}");
        assert!(matches!(r, Err(CliError::Schema(m)) if m.contains("line 2")));
    }
}
