use std::fs;
use std::path::Path;

use choquard_core::solvers::SolveConfig;
use choquard_core::{Grid, ProblemParams};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Run configuration read from a JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub params: ProblemParams,
    pub grid: GridSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub max_iters: usize,
    pub tol_residual: f64,
    pub step0: f64,
    pub backtrack: f64,
    pub seed: u64,
    /// Asymmetry of the starting pair for system and Picard runs.
    pub init_asymmetry: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        let base = SolveConfig::default();
        SolveSection {
            max_iters: base.max_iters,
            tol_residual: base.tol_residual,
            step0: base.step0,
            backtrack: base.backtrack,
            seed: base.seed,
            init_asymmetry: 0.3,
        }
    }
}

impl SolveSection {
    pub fn solver_config(&self) -> SolveConfig {
        SolveConfig {
            max_iters: self.max_iters,
            tol_residual: self.tol_residual,
            step0: self.step0,
            backtrack: self.backtrack,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Relative tolerance for the classification and radial checks.
    pub tolerance: f64,
    pub reflection_tolerance: f64,
    pub monotonicity_floor: f64,
    /// Relative agreement required between the descent and Picard levels.
    pub picard_tolerance: f64,
    /// Number of seeds tried for each solve; the lowest level is kept.
    pub multi_start: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            tolerance: 1e-3,
            reflection_tolerance: 1e-8,
            monotonicity_floor: 1e-6,
            picard_tolerance: 1e-4,
            multi_start: 3,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Failure> {
        self.solve
            .solver_config()
            .validate()
            .map_err(|e| Failure::Usage(format!("solve: {e}")))?;
        let v = &self.verify;
        for (name, value) in [
            ("tolerance", v.tolerance),
            ("reflection_tolerance", v.reflection_tolerance),
            ("monotonicity_floor", v.monotonicity_floor),
            ("picard_tolerance", v.picard_tolerance),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Failure::Usage(format!(
                    "verify.{name} must be a finite nonnegative number"
                )));
            }
        }
        if v.multi_start == 0 {
            return Err(Failure::Usage("verify.multi_start must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, Failure> {
        Grid::new(self.params.dimension(), self.grid.half_width, self.grid.n)
            .map_err(|e| Failure::Usage(format!("grid: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"{
        "params": {"N": 2, "alpha": 1.0, "p": 2.0, "q": 2.0, "tau": 1.0, "eta": 1.0},
        "grid": {"L": 20.0, "n": 128}
    }"#;

    #[test]
    fn defaults_fill_optional_sections() {
        let c: Config = serde_json::from_str(BENCH).unwrap();
        assert_eq!(c.solve.solver_config(), SolveConfig::default());
        assert_eq!(c.verify.multi_start, 3);
        assert_eq!(c.grid().unwrap().points(), 128);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BENCH.replace(r#""n": 128"#, r#""n": 128, "points": 64"#);
        let err = serde_json::from_str::<Config>(&text).unwrap_err();
        assert!(err.to_string().contains("points"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let text = BENCH.replace(r#""alpha": 1.0, "#, "");
        let err = serde_json::from_str::<Config>(&text).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }
}
