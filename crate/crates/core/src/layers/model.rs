use super::{CalLayer, GraphInputs, LayerError, LayerKind, ModelConfig, SclLayer};
use crate::autodiff::{xavier_uniform, RngStream, Tensor};
use crate::linalg::Matrix;

#[derive(Debug, Clone)]
pub enum Layer {
    Scl(SclLayer),
    Cal(CalLayer),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Scl(_) => LayerKind::Scl,
            Layer::Cal(_) => LayerKind::Cal,
        }
    }
}

/// Training draws dropout masks from the stream; evaluation is
/// deterministic.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut RngStream),
}

pub struct ForwardOutput {
    pub embeddings: Tensor,
    pub logits: Tensor,
    /// Normalized attention per CAL (outer) and head (inner), recorded only
    /// by [`HaeModel::forward_traced`].
    pub attention: Vec<Vec<Matrix>>,
}

/// A stack of SCL/CAL layers followed by a linear softmax head.
#[derive(Debug, Clone)]
pub struct HaeModel {
    config: ModelConfig,
    d_in: usize,
    classes: usize,
    layers: Vec<Layer>,
    head_w: Tensor,
    head_b: Tensor,
}

impl HaeModel {
    /// Allocates a Xavier-initialized stack for `d_in` input features and
    /// `classes` output classes.
    pub fn build(config: &ModelConfig, d_in: usize, classes: usize, rng: &mut RngStream) -> Result<Self, LayerError> {
        config.validate()?;
        if classes == 0 {
            return Err(LayerError::Config("the head needs at least one class".into()));
        }
        let kinds = config.variant.layer_kinds()?;
        let mut dropouts = config.cal_dropouts()?.into_iter();
        let mut width = d_in;
        let mut layers = Vec::with_capacity(kinds.len());
        for kind in kinds {
            let layer = match kind {
                LayerKind::Scl => {
                    let l = SclLayer::new(
                        config.structures.len(),
                        width,
                        config.dim,
                        config.scl_sublayers,
                        config.scl_hidden_activation,
                        config.scl_output_activation,
                        rng,
                    )?;
                    width = config.dim;
                    Layer::Scl(l)
                }
                LayerKind::Cal => Layer::Cal(CalLayer::new(
                    width,
                    config.heads,
                    dropouts.next().expect("one rate per CAL"),
                    config.attention_slope,
                    config.cal_activation,
                    rng,
                )?),
            };
            layers.push(layer);
        }
        Ok(Self {
            config: config.clone(),
            d_in,
            classes,
            layers,
            head_w: Tensor::param(xavier_uniform(width, classes, rng)),
            head_b: Tensor::param(Matrix::zeros(1, classes)),
        })
    }

    /// Rebuilds a model from saved parameters.
    pub fn from_parameters(
        config: &ModelConfig,
        d_in: usize,
        classes: usize,
        params: &[(String, Matrix)],
    ) -> Result<Self, LayerError> {
        let model = Self::build(config, d_in, classes, &mut RngStream::new(0))?;
        model.restore(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of stacked SCL/CAL layers.
    pub fn order(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn embedding_dim(&self) -> usize {
        self.head_w.shape().0
    }

    /// Learned structure weights of each SCL in stack order.
    pub fn omegas(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Scl(s) => Some(s.omega()),
                Layer::Cal(_) => None,
            })
            .collect()
    }

    /// Every trainable tensor with a stable name, in a fixed order.
    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Scl(s) => {
                    out.push((format!("layer{i}.scl.theta"), s.theta().clone()));
                    for (l, w) in s.weights().iter().enumerate() {
                        out.push((format!("layer{i}.scl.w{l}"), w.clone()));
                    }
                }
                Layer::Cal(c) => {
                    for (h, head) in c.heads().iter().enumerate() {
                        out.push((format!("layer{i}.cal.head{h}.w"), head.w.clone()));
                        out.push((format!("layer{i}.cal.head{h}.a"), head.a.clone()));
                    }
                }
            }
        }
        out.push(("head.w".into(), self.head_w.clone()));
        out.push(("head.b".into(), self.head_b.clone()));
        out
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    pub fn snapshot(&self) -> Vec<(String, Matrix)> {
        self.named_parameters()
            .into_iter()
            .map(|(n, t)| (n, t.value().clone()))
            .collect()
    }

    /// Loads values saved by [`HaeModel::snapshot`]; names and shapes must
    /// match exactly.
    pub fn restore(&self, params: &[(String, Matrix)]) -> Result<(), LayerError> {
        let named = self.named_parameters();
        if named.len() != params.len() {
            return Err(LayerError::Parameters(format!(
                "model has {} parameters, snapshot {}",
                named.len(),
                params.len()
            )));
        }
        for ((name, t), (saved, value)) in named.iter().zip(params) {
            if name != saved || t.shape() != value.shape() {
                return Err(LayerError::Parameters(format!(
                    "expected `{name}` {:?}, found `{saved}` {:?}",
                    t.shape(),
                    value.shape()
                )));
            }
        }
        for ((_, t), (_, value)) in named.iter().zip(params) {
            t.set_value(value.clone());
        }
        Ok(())
    }

    pub fn zero_grad(&self) {
        self.parameters().iter().for_each(Tensor::zero_grad);
    }

    pub fn forward(&self, inputs: &GraphInputs, x: &Tensor, mode: Mode<'_>) -> Result<ForwardOutput, LayerError> {
        self.run(inputs, x, mode, false)
    }

    pub fn forward_traced(&self, inputs: &GraphInputs, x: &Tensor, mode: Mode<'_>) -> Result<ForwardOutput, LayerError> {
        self.run(inputs, x, mode, true)
    }

    /// Evaluation-mode pass over the inputs' own features.
    pub fn forward_eval(&self, inputs: &GraphInputs) -> Result<ForwardOutput, LayerError> {
        self.forward(inputs, &Tensor::constant(inputs.features().clone()), Mode::Eval)
    }

    fn run(&self, inputs: &GraphInputs, x: &Tensor, mode: Mode<'_>, trace: bool) -> Result<ForwardOutput, LayerError> {
        if x.shape() != (inputs.n(), self.d_in) {
            return Err(LayerError::Dimension(format!(
                "features are {:?}, model expects ({}, {})",
                x.shape(),
                inputs.n(),
                self.d_in
            )));
        }
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train(r) => Some(r),
        };
        let mut attention = Vec::new();
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Scl(s) => s.forward(inputs, &h)?,
                Layer::Cal(c) => {
                    let mut heads = Vec::new();
                    let out = c.forward(inputs, &h, rng.as_deref_mut(), trace.then_some(&mut heads))?;
                    if trace {
                        attention.push(heads);
                    }
                    out
                }
            };
        }
        let logits = h.matmul(&self.head_w)?.add_row_broadcast(&self.head_b)?;
        Ok(ForwardOutput {
            embeddings: h,
            logits,
            attention,
        })
    }
}
