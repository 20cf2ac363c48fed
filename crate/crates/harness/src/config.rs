use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specsamp::perf::CostModel;
use specsamp::DecodingMethod;

use crate::error::{io_err, Error, Result};

/// Path of the bundled corpus: the 1769 King James text of Genesis through
/// Ruth, public domain.
pub fn bundled_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("kjv.txt")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub order: usize,
    /// Add-α smoothing constant.
    pub alpha: f64,
}

impl ModelSpec {
    pub fn new(order: usize, alpha: f64) -> Self {
        ModelSpec { order, alpha }
    }
}

/// Bytes streamed per model call; zero disables the emulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBytes {
    pub target: usize,
    pub draft: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub corpus: PathBuf,
    pub target: ModelSpec,
    pub draft: ModelSpec,
    pub method: DecodingMethod,
    pub k: usize,
    pub num_sequences: usize,
    pub prompt_len: usize,
    pub completion_len: usize,
    pub seed: u64,
    /// Costs fed to the analytical speedup model.
    pub cost: CostModel,
    pub weight_bytes: WeightBytes,
    /// Run sequences on one thread so per-loop timings are not disturbed.
    pub wallclock: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            corpus: bundled_corpus(),
            target: ModelSpec::new(4, 0.01),
            draft: ModelSpec::new(2, 0.01),
            method: DecodingMethod::nucleus(0.8),
            k: 4,
            num_sequences: 100,
            prompt_len: 32,
            completion_len: 128,
            seed: 0,
            cost: CostModel::published(),
            weight_bytes: WeightBytes { target: 16 << 20, draft: 1 << 20 },
            wallclock: false,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: BenchConfig = serde_json::from_str(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        BenchConfig::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.num_sequences == 0 {
            return bad("num_sequences must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.completion_len == 0 {
            return bad("completion_len must be >= 1".into());
        }
        for (name, spec) in [("target", self.target), ("draft", self.draft)] {
            if spec.order == 0 {
                return bad(format!("{name} order must be >= 1"));
            }
            if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
                return bad(format!("{name} alpha must be > 0, got {}", spec.alpha));
            }
        }
        if self.draft.order > self.target.order {
            return bad(format!("draft order {} exceeds target order {}", self.draft.order, self.target.order));
        }
        self.method.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        self.cost.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        Ok(())
    }
}
