use serde::{Deserialize, Serialize};

use super::LayerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Scl,
    Cal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Elu,
    Sigmoid,
}

/// A named variant (`gnn-4l`, `scl-2l`, `cal-4l`, ...) or an explicit
/// layer list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variant {
    Named(String),
    Layers { layers: Vec<LayerKind> },
}

impl Variant {
    /// `gnn-kl` is one SCL followed by `k − 1` CALs; `scl-kl` and `cal-kl`
    /// stack `k` layers of one kind.
    pub fn layer_kinds(&self) -> Result<Vec<LayerKind>, LayerError> {
        match self {
            Variant::Layers { layers } if layers.is_empty() => {
                Err(LayerError::Config("explicit layer list is empty".into()))
            }
            Variant::Layers { layers } => Ok(layers.clone()),
            Variant::Named(name) => {
                let unknown = || LayerError::UnknownVariant(name.clone());
                let (family, order) = name.split_once('-').ok_or_else(unknown)?;
                let order: usize = order
                    .strip_suffix('l')
                    .and_then(|k| k.parse().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(unknown)?;
                match family {
                    "gnn" => {
                        let mut v = vec![LayerKind::Scl];
                        v.extend(std::iter::repeat_n(LayerKind::Cal, order - 1));
                        Ok(v)
                    }
                    "scl" => Ok(vec![LayerKind::Scl; order]),
                    "cal" => Ok(vec![LayerKind::Cal; order]),
                    _ => Err(unknown()),
                }
            }
        }
    }
}

impl Default for Variant {
    fn default() -> Self {
        Variant::Named("gnn-4l".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Embedding width; also the SCL hidden width.
    pub dim: usize,
    pub heads: usize,
    pub scl_sublayers: usize,
    pub structures: Vec<String>,
    pub dropout_first_cal: f64,
    pub attention_slope: f64,
    pub scl_hidden_activation: Activation,
    pub scl_output_activation: Activation,
    pub cal_activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::default(),
            dim: 64,
            heads: 8,
            scl_sublayers: 2,
            structures: ["A-P-C-P-A", "A-P-T-P-A", "A-P-(A|C)-P-A", "A-P-(C|T)-P-A"]
                .map(String::from)
                .to_vec(),
            dropout_first_cal: 0.4,
            attention_slope: 0.2,
            scl_hidden_activation: Activation::Relu,
            scl_output_activation: Activation::Identity,
            cal_activation: Activation::Elu,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), LayerError> {
        let kinds = self.variant.layer_kinds()?;
        let bad = |m: String| Err(LayerError::Config(m));
        if self.dim == 0 || self.heads == 0 {
            return bad("dim and heads must be positive".into());
        }
        if kinds.contains(&LayerKind::Scl) {
            if self.scl_sublayers == 0 {
                return bad("scl_sublayers must be >= 1".into());
            }
            if self.structures.is_empty() {
                return bad("an SCL needs at least one structure".into());
            }
        }
        if !(0.0..1.0).contains(&self.dropout_first_cal) {
            return bad(format!("dropout_first_cal must lie in [0,1), got {}", self.dropout_first_cal));
        }
        if !self.attention_slope.is_finite() || self.attention_slope < 0.0 {
            return bad(format!("attention_slope must be >= 0, got {}", self.attention_slope));
        }
        Ok(())
    }

    /// Dropout rate of every CAL in stack order: the first CAL gets
    /// `dropout_first_cal`, each later one half of its predecessor.
    pub fn cal_dropouts(&self) -> Result<Vec<f64>, LayerError> {
        let n = self
            .variant
            .layer_kinds()?
            .iter()
            .filter(|k| **k == LayerKind::Cal)
            .count();
        Ok((0..n).map(|i| self.dropout_first_cal / f64::powi(2.0, i as i32)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_variants() {
        use LayerKind::*;
        let kinds = |s: &str| Variant::Named(s.into()).layer_kinds();
        assert_eq!(kinds("gnn-4l").unwrap(), vec![Scl, Cal, Cal, Cal]);
        assert_eq!(kinds("gnn-2l").unwrap(), vec![Scl, Cal]);
        assert_eq!(kinds("scl-2l").unwrap(), vec![Scl, Scl]);
        assert_eq!(kinds("cal-4l").unwrap(), vec![Cal; 4]);
        for bad in ["gnn", "gnn-0l", "rnn-2l", "gnn-4", "cal-xl"] {
            assert!(matches!(kinds(bad), Err(LayerError::UnknownVariant(_))), "{bad}");
        }
    }

    #[test]
    fn dropout_schedule() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.cal_dropouts().unwrap(), vec![0.4, 0.2, 0.1]);
        let cfg = ModelConfig {
            variant: Variant::Named("cal-2l".into()),
            ..Default::default()
        };
        assert_eq!(cfg.cal_dropouts().unwrap(), vec![0.4, 0.2]);
    }

    #[test]
    fn json_forms() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"variant": "gnn-2l", "dim": 16}"#).unwrap();
        assert_eq!(cfg.variant, Variant::Named("gnn-2l".into()));
        assert_eq!(cfg.heads, 8);
        let cfg: ModelConfig = serde_json::from_str(r#"{"variant": {"layers": ["cal", "scl"]}}"#).unwrap();
        assert_eq!(cfg.variant.layer_kinds().unwrap(), vec![LayerKind::Cal, LayerKind::Scl]);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"dims": 3}"#).is_err());
        let back: ModelConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
