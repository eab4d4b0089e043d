use rand::Rng as _;

use super::EncoderConfig;
use crate::arraygrad::{NdArray, Scalar};
use crate::error::{ensure, Result};
use crate::rng::{stream_rng, Stream};

/// Name, shape and fan-in of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
}

impl ParamSpec {
    fn new(name: String, shape: Vec<usize>, fan_in: usize) -> Self {
        ParamSpec { name, shape, fan_in }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn conv(specs: &mut Vec<ParamSpec>, prefix: &str, c_out: usize, c_in: usize, k: usize) {
    specs.push(ParamSpec::new(
        format!("{prefix}.weight"),
        vec![c_out, c_in, k],
        c_in * k,
    ));
    specs.push(ParamSpec::new(format!("{prefix}.bias"), vec![c_out], c_in * k));
}

/// Every parameter tensor in the order the forward pass consumes them.
pub fn param_specs(cfg: &EncoderConfig) -> Vec<ParamSpec> {
    let (n, k_hidden) = (cfg.n_features, cfg.hidden_dim);
    let mut specs = vec![
        ParamSpec::new("projection.weight".into(), vec![n, k_hidden], n),
        ParamSpec::new("projection.bias".into(), vec![k_hidden], n),
    ];
    let units = cfg.base_kernels.len();
    for block in 1..=cfg.n_blocks {
        for (u, &k) in cfg.base_kernels.iter().enumerate() {
            let unit = format!("block{block}.unit{}", u + 1);
            conv(&mut specs, &format!("{unit}.conv1"), k_hidden, k_hidden, k);
            conv(&mut specs, &format!("{unit}.conv2"), k_hidden, k_hidden, k);
            if block >= 2 {
                conv(&mut specs, &format!("{unit}.skip"), k_hidden, k_hidden, 1);
            }
        }
        conv(&mut specs, &format!("block{block}.pool"), k_hidden, k_hidden, 1);
        let out = if block == cfg.n_blocks {
            cfg.output_dim
        } else {
            k_hidden
        };
        conv(
            &mut specs,
            &format!("block{block}.aggregator"),
            out,
            (units + 1) * k_hidden,
            1,
        );
    }
    specs
}

/// Number of scalars in the encoder; no dependence on sequence length.
pub fn param_count(cfg: &EncoderConfig) -> usize {
    param_specs(cfg).iter().map(ParamSpec::numel).sum()
}

/// Encoder weights in [`param_specs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<F> {
    specs: Vec<ParamSpec>,
    values: Vec<NdArray<F>>,
}

impl<F: Scalar> EncoderParams<F> {
    /// Assembles parameters from `(name, array)` pairs, which must match the
    /// layout implied by `cfg` exactly.
    pub fn from_named(cfg: &EncoderConfig, named: Vec<(String, NdArray<F>)>) -> Result<Self> {
        let specs = param_specs(cfg);
        ensure!(
            named.len() == specs.len(),
            "expected {} parameter tensors, got {}",
            specs.len(),
            named.len()
        );
        let mut values = Vec::with_capacity(named.len());
        for (spec, (name, value)) in specs.iter().zip(named) {
            ensure!(
                spec.name == name && spec.shape == value.shape(),
                "parameter {name} {:?} does not match expected {} {:?}",
                value.shape(),
                spec.name,
                spec.shape
            );
            values.push(value);
        }
        Ok(EncoderParams { specs, values })
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn values(&self) -> &[NdArray<F>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [NdArray<F>] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&NdArray<F>> {
        self.specs.iter().position(|s| s.name == name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut NdArray<F>> {
        let i = self.specs.iter().position(|s| s.name == name)?;
        Some(&mut self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &NdArray<F>)> {
        self.specs.iter().map(|s| s.name.as_str()).zip(&self.values)
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(NdArray::len).sum()
    }

    pub fn cast<G: Scalar>(&self) -> EncoderParams<G> {
        EncoderParams {
            specs: self.specs.clone(),
            values: self.values.iter().map(NdArray::cast).collect(),
        }
    }

    pub(crate) fn check_config(&self, cfg: &EncoderConfig) -> Result<()> {
        let specs = param_specs(cfg);
        ensure!(specs == self.specs, "encoder parameters do not match the configuration");
        Ok(())
    }
}

/// Uniform `±sqrt(1/fan_in)` initialisation from the `Init` stream.
pub fn init_params<F: Scalar>(cfg: &EncoderConfig, seed: u64) -> Result<EncoderParams<F>> {
    cfg.validate()?;
    let mut rng = stream_rng(seed, Stream::Init);
    let specs = param_specs(cfg);
    let values = specs
        .iter()
        .map(|spec| {
            let bound = (1.0 / spec.fan_in as f64).sqrt();
            NdArray::from_fn(&spec.shape, |_| F::from_f64(rng.random_range(-bound..bound)))
        })
        .collect();
    Ok(EncoderParams { specs, values })
}
