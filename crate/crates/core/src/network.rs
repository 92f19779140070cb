//! Fully connected 1D ReLU networks with topology `(1, n_1, ..., n_L, 1)`.
//!
//! Layer indices follow the usual convention: layer `l` in `1..=L` is a
//! hidden layer with pre-activations `W_l x^(l-1) + b_l`, and layer `L + 1`
//! is the affine output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwl::{linear_combine, PwlFunction};
use crate::rng::{normals, ParamKind};

/// Hidden-layer widths; input and output widths are fixed at 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Topology {
    hidden: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Topology {
    type Error = Error;

    fn try_from(hidden: Vec<usize>) -> Result<Self> {
        Topology::new(hidden)
    }
}

impl From<Topology> for Vec<usize> {
    fn from(t: Topology) -> Self {
        t.hidden
    }
}

impl Topology {
    pub fn new(hidden: Vec<usize>) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::InvalidTopology(
                "need at least one hidden layer".into(),
            ));
        }
        if hidden.contains(&0) {
            return Err(Error::InvalidTopology(format!(
                "hidden widths must be positive, got {hidden:?}"
            )));
        }
        Ok(Topology { hidden })
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    /// Width of layer `l` in `0..=L+1`.
    pub fn width(&self, layer: usize) -> usize {
        if layer == 0 || layer == self.hidden.len() + 1 {
            1
        } else {
            self.hidden[layer - 1]
        }
    }

    /// Total hidden neurons, `n_1 + ... + n_L`.
    pub fn total_hidden(&self) -> usize {
        self.hidden.iter().sum()
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(1,{:?},1)", self.hidden)
    }
}

/// Weights (row-major, `rows x cols`) and biases of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        let rows = weights.len();
        let cols = weights.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("layer needs a non-empty weight matrix".into()));
        }
        if weights.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged weight matrix".into()));
        }
        if biases.len() != rows {
            return Err(Error::Shape(format!(
                "{} biases for {rows} rows",
                biases.len()
            )));
        }
        if weights
            .iter()
            .flatten()
            .chain(&biases)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidValue("non-finite parameter".into()));
        }
        Ok(DenseLayer {
            rows,
            cols,
            weights: weights.into_iter().flatten().collect(),
            biases,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

/// Compact, regenerable description of a sampled network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub topology: Topology,
    pub sigma_b: f64,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<NetworkParams> {
        init_network(&self.topology, self.sigma_b, self.seed)
    }
}

/// All parameters of a network. Serializing this type gives the debug dump
/// with every weight; use [`NetworkParams::spec`] for the compact form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkParams {
    topology: Topology,
    sigma_b: f64,
    seed: Option<u64>,
    layers: Vec<DenseLayer>,
}

fn check_sigma(sigma_b: f64) -> Result<()> {
    if sigma_b.is_finite() && sigma_b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma_b))
    }
}

/// Samples `W_l[j][i] ~ N(0, 2 / n_{l-1})` and `b_l[j] ~ N(0, sigma_b^2)`
/// from counter-addressed streams keyed by `(seed, l, kind)`.
pub fn init_network(topology: &Topology, sigma_b: f64, seed: u64) -> Result<NetworkParams> {
    check_sigma(sigma_b)?;
    let depth = topology.depth();
    let layers = (1..=depth + 1)
        .map(|l| {
            let rows = topology.width(l);
            let cols = topology.width(l - 1);
            let scale = (2.0 / cols as f64).sqrt();
            let weights = normals(seed, l, ParamKind::Weight, rows * cols)
                .into_iter()
                .map(|z| z * scale)
                .collect();
            let biases = normals(seed, l, ParamKind::Bias, rows)
                .into_iter()
                .map(|z| z * sigma_b)
                .collect();
            DenseLayer {
                rows,
                cols,
                weights,
                biases,
            }
        })
        .collect();
    Ok(NetworkParams {
        topology: topology.clone(),
        sigma_b,
        seed: Some(seed),
        layers,
    })
}

impl NetworkParams {
    /// Hand-set parameters. Layer shapes must chain from width 1 to width 1.
    pub fn from_layers(layers: Vec<DenseLayer>, sigma_b: f64) -> Result<Self> {
        check_sigma(sigma_b)?;
        if layers.len() < 2 {
            return Err(Error::InvalidTopology(
                "need at least one hidden layer and an output layer".into(),
            ));
        }
        let mut prev = 1;
        for (i, layer) in layers.iter().enumerate() {
            if layer.cols != prev {
                return Err(Error::Shape(format!(
                    "layer {} expects {prev} inputs, has {}",
                    i + 1,
                    layer.cols
                )));
            }
            prev = layer.rows;
        }
        if prev != 1 {
            return Err(Error::Shape(
                "output layer must have a single neuron".into(),
            ));
        }
        let hidden = layers[..layers.len() - 1].iter().map(|l| l.rows).collect();
        Ok(NetworkParams {
            topology: Topology::new(hidden)?,
            sigma_b,
            seed: None,
            layers,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Layer `l` in `1..=L+1`.
    pub fn layer(&self, l: usize) -> &DenseLayer {
        &self.layers[l - 1]
    }

    /// Compact form, available for sampled networks only.
    pub fn spec(&self) -> Option<NetworkSpec> {
        self.seed.map(|seed| NetworkSpec {
            topology: self.topology.clone(),
            sigma_b: self.sigma_b,
            seed,
        })
    }

    fn output_layer(&self) -> usize {
        self.topology.depth() + 1
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.output_layer() {
            return Err(Error::Index(format!(
                "layer {layer} outside [1, {}]",
                self.output_layer()
            )));
        }
        Ok(())
    }

    fn first_layer(&self, count: usize) -> Vec<PwlFunction> {
        let l = &self.layers[0];
        (0..count)
            .map(|j| PwlFunction::affine(l.weight(j, 0), l.biases[j]).expect("finite parameters"))
            .collect()
    }

    fn combine(&self, layer: usize, posts: &[PwlFunction], count: usize) -> Vec<PwlFunction> {
        let l = &self.layers[layer - 1];
        (0..count)
            .map(|j| linear_combine(l.row(j), posts, l.biases[j]).expect("shapes checked"))
            .collect()
    }

    /// Exact pre-activations of the first `count` neurons of `layer`.
    pub fn preactivations_prefix(&self, layer: usize, count: usize) -> Result<Vec<PwlFunction>> {
        self.check_layer(layer)?;
        let width = self.topology.width(layer);
        if count > width {
            return Err(Error::Index(format!(
                "{count} neurons requested from layer {layer} of width {width}"
            )));
        }
        if layer == 1 {
            return Ok(self.first_layer(count));
        }
        let mut pre = self.first_layer(self.topology.width(1));
        for l in 2..layer {
            let posts: Vec<PwlFunction> = pre.iter().map(PwlFunction::relu).collect();
            pre = self.combine(l, &posts, self.topology.width(l));
        }
        let posts: Vec<PwlFunction> = pre.iter().map(PwlFunction::relu).collect();
        Ok(self.combine(layer, &posts, count))
    }

    /// Exact pre-activations of every neuron of `layer`.
    pub fn preactivations(&self, layer: usize) -> Result<Vec<PwlFunction>> {
        self.preactivations_prefix(layer, self.topology.width(layer))
    }

    /// Exact network output together with, for each hidden layer, the
    /// sorted sign-crossing locations that its ReLUs turned into new knots.
    pub fn forward_traced(&self) -> (PwlFunction, Vec<Vec<f64>>) {
        let depth = self.topology.depth();
        let mut pre = self.first_layer(self.topology.width(1));
        let mut created = Vec::with_capacity(depth);
        for l in 1..=depth {
            let mut roots = Vec::new();
            let posts: Vec<PwlFunction> = pre
                .iter()
                .map(|p| {
                    let (post, r) = p.relu_with_roots();
                    roots.extend(r);
                    post
                })
                .collect();
            roots.sort_by(f64::total_cmp);
            created.push(roots);
            pre = self.combine(l + 1, &posts, self.topology.width(l + 1));
        }
        (pre.pop().expect("single output"), created)
    }
}

/// Exact CPWL representation of the network output over the whole line.
pub fn forward_pwl(params: &NetworkParams) -> PwlFunction {
    params.forward_traced().0
}

/// Exact pre-activation `s_j^(l)` as a function of the input.
pub fn preactivation_pwl(
    params: &NetworkParams,
    layer: usize,
    neuron: usize,
) -> Result<PwlFunction> {
    params.check_layer(layer)?;
    let width = params.topology.width(layer);
    if neuron >= width {
        return Err(Error::Index(format!(
            "neuron {neuron} outside layer {layer} of width {width}"
        )));
    }
    let mut v = params.preactivations_prefix(layer, neuron + 1)?;
    Ok(v.pop().expect("non-empty"))
}

/// Number of linear regions of the network output: breakpoints plus one.
pub fn count_regions(params: &NetworkParams) -> usize {
    forward_pwl(params)
        .count_breakpoints()
        .expect("forward output is canonical")
        + 1
}

/// Plain matrix-vector evaluation of the network at one input.
pub fn numeric_forward(params: &NetworkParams, x: f64) -> f64 {
    let mut act = vec![x];
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        let mut next: Vec<f64> = (0..layer.rows)
            .map(|r| {
                layer
                    .row(r)
                    .iter()
                    .zip(&act)
                    .map(|(w, a)| w * a)
                    .sum::<f64>()
                    + layer.biases[r]
            })
            .collect();
        if i < last {
            next.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        act = next;
    }
    act[0]
}
