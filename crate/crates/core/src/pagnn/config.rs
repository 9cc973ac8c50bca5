use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    /// Leaky ReLU with negative slope 0.01.
    LeakyRelu,
}

const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
        }
    }

    /// Derivative at a pre-activation value (0 is treated as the negative side).
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leaky-relu" => Ok(Activation::LeakyRelu),
            other => Err(format!("unknown activation '{other}'")),
        }
    }
}

/// Architecture hyperparameters.
///
/// All hidden blocks share one width, `hidden_dim`. Layer `ℓ` (1-based) runs the
/// format block iff `ℓ <= format_layers` and the content block iff
/// `ℓ <= content_layers`; the regular block always runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagnnConfig {
    pub layers: usize,
    pub format_layers: usize,
    pub content_layers: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Weight of a node's own content representation in the aggregation step.
    pub alpha: f64,
    pub num_format_types: usize,
    pub num_content_types: usize,
    pub num_classes: usize,
    pub activation: Activation,
    pub use_input_projection: bool,
    /// Lower bound applied to both confidences before they gate a block.
    pub confidence_floor: f64,
    pub seed: u64,
}

impl PagnnConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.layers == 0 {
            return fail("layers must be at least 1".into());
        }
        if !(self.format_layers <= self.content_layers && self.content_layers <= self.layers) {
            return fail(format!(
                "need format_layers <= content_layers <= layers, got {} <= {} <= {}",
                self.format_layers, self.content_layers, self.layers
            ));
        }
        if self.hidden_dim == 0 || self.input_dim == 0 {
            return fail("dimensions must be positive".into());
        }
        if !self.use_input_projection && self.input_dim != self.hidden_dim {
            return fail(format!(
                "without an input projection input_dim ({}) must equal hidden_dim ({})",
                self.input_dim, self.hidden_dim
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return fail(format!("alpha must be a non-negative finite number, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.confidence_floor) {
            return fail(format!("confidence_floor must lie in [0, 1], got {}", self.confidence_floor));
        }
        if self.num_format_types == 0 || self.num_content_types == 0 || self.num_classes == 0 {
            return fail("type and class counts must be positive".into());
        }
        Ok(())
    }

    pub fn has_format_block(&self, layer: usize) -> bool {
        layer < self.format_layers
    }

    pub fn has_content_block(&self, layer: usize) -> bool {
        layer < self.content_layers
    }

    /// The same network with both type-conditioned blocks removed.
    pub fn without_type_blocks(&self) -> Self {
        Self {
            format_layers: 0,
            content_layers: 0,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> PagnnConfig {
        PagnnConfig {
            layers: 3,
            format_layers: 1,
            content_layers: 2,
            input_dim: 8,
            hidden_dim: 4,
            alpha: 1.0,
            num_format_types: 2,
            num_content_types: 2,
            num_classes: 3,
            activation: Activation::Relu,
            use_input_projection: true,
            confidence_floor: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn schedule_ordering_is_enforced() {
        assert!(base().validate().is_ok());
        let mut c = base();
        c.format_layers = 3;
        assert!(c.validate().is_err());
        let mut c = base();
        c.content_layers = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn residual_width_requires_projection_or_equal_dims() {
        let mut c = base();
        c.use_input_projection = false;
        assert!(c.validate().is_err());
        c.input_dim = 4;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn leaky_relu_slope() {
        assert_eq!(Activation::LeakyRelu.apply(-2.0), -0.02);
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
    }
}
