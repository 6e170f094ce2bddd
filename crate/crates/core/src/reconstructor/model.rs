use std::path::Path;

use flowmend_nn::{read_checkpoint, write_checkpoint, Graph, ParamId, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::AEConfig;
use crate::error::{Error, Result};
use crate::flow::FlowField;

/// `(1, 2, h, w)` tensor with `u` then `v`, multiplied by `scale`.
pub fn flow_to_tensor(flow: &FlowField, scale: f64) -> Tensor {
    let data = flow.u().iter().chain(flow.v()).map(|x| x * scale).collect();
    Tensor::new(vec![1, 2, flow.height(), flow.width()], data).expect("flow tensor shape")
}

pub fn flows_to_tensor(flows: &[&FlowField], scale: f64) -> Result<Tensor> {
    let items: Vec<Tensor> = flows.iter().map(|f| flow_to_tensor(f, scale)).collect();
    Ok(Tensor::stack(&items)?)
}

/// Splits an `(n, 2, h, w)` tensor back into flows, dividing by `scale`.
pub fn tensor_to_flows(t: &Tensor, scale: f64) -> Result<Vec<FlowField>> {
    let (n, c, h, w) = t.dims4()?;
    if c != 2 {
        return Err(Error::Dimension(format!("flow tensor has {} channels", c)));
    }
    let hw = h * w;
    (0..n)
        .map(|i| {
            let d = &t.data()[i * 2 * hw..(i + 1) * 2 * hw];
            FlowField::new(w, h, d[..hw].iter().map(|x| x / scale).collect(), d[hw..].iter().map(|x| x / scale).collect())
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct ConvIds {
    w: ParamId,
    b: ParamId,
}

/// Encoder: three conv-ReLU-pool blocks. Decoder, innermost first: upsample,
/// optional concat of the encoder activation at that resolution, conv-ReLU.
/// A final conv maps to 2 channels without activation.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    cfg: AEConfig,
    params: ParamStore,
    enc: [ConvIds; 3],
    dec: [ConvIds; 3],
    out: ConvIds,
}

fn conv(store: &mut ParamStore, name: &str, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> ConvIds {
    let w = store.add_kaiming(format!("{}.w", name), vec![cout, cin, 3, 3], cin * 9, rng);
    let b = store.add(format!("{}.b", name), Tensor::zeros(vec![cout]));
    ConvIds { w, b }
}

impl Autoencoder {
    pub fn new(cfg: &AEConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        let c = cfg.encoder_channels;
        let enc = [
            conv(&mut params, "enc1", 2, c[0], &mut rng),
            conv(&mut params, "enc2", c[0], c[1], &mut rng),
            conv(&mut params, "enc3", c[1], c[2], &mut rng),
        ];
        let dec_in = |level: usize| {
            let up = if level == 3 { c[2] } else { c[level] };
            up + if cfg.skips.contains(level) { c[level - 1] } else { 0 }
        };
        let dec = [
            conv(&mut params, "dec1", dec_in(1), c[0], &mut rng),
            conv(&mut params, "dec2", dec_in(2), c[1], &mut rng),
            conv(&mut params, "dec3", dec_in(3), c[2], &mut rng),
        ];
        let out = conv(&mut params, "out", c[0], 2, &mut rng);
        Ok(Self { cfg: cfg.clone(), params, enc, dec, out })
    }

    pub fn config(&self) -> &AEConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Input channels of the decoder conv at `level` (1 = outermost).
    pub fn decoder_in_channels(&self, level: usize) -> usize {
        self.params.get(self.dec[level - 1].w).shape()[1]
    }

    fn conv_relu(&self, g: &mut Graph, x: Var, ids: ConvIds, relu: bool) -> Result<Var> {
        let w = g.param(&self.params, ids.w);
        let b = g.param(&self.params, ids.b);
        let y = g.conv3x3(x, w, b)?;
        Ok(if relu { g.relu(y) } else { y })
    }

    /// Records the forward pass of an `(n, 2, s, s)` input on `g`.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (_, c, h, w) = g.value(x).dims4()?;
        let s = self.cfg.input_size;
        if c != 2 || h != s || w != s {
            return Err(Error::Dimension(format!("autoencoder expects (n, 2, {s}, {s}), got (n, {c}, {h}, {w})")));
        }
        let mut acts = Vec::with_capacity(3);
        let mut hcur = x;
        for ids in self.enc {
            let a = self.conv_relu(g, hcur, ids, true)?;
            acts.push(a);
            hcur = g.maxpool2(a)?;
        }
        for level in (1..=3).rev() {
            hcur = g.upsample2(hcur)?;
            if self.cfg.skips.contains(level) {
                hcur = g.concat_channels(hcur, acts[level - 1])?;
            }
            hcur = self.conv_relu(g, hcur, self.dec[level - 1], true)?;
        }
        self.conv_relu(g, hcur, self.out, false)
    }

    /// Batched inference on flows of the configured size.
    pub fn run(&self, flows: &[&FlowField]) -> Result<Vec<FlowField>> {
        if flows.is_empty() {
            return Ok(Vec::new());
        }
        let scale = self.cfg.input_scale;
        let mut g = Graph::new();
        let x = g.input(flows_to_tensor(flows, scale)?);
        let y = self.forward(&mut g, x)?;
        tensor_to_flows(g.value(y), scale)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_checkpoint(&self.params, f)?;
        Ok(())
    }

    /// Rebuilds the architecture from `cfg` and loads weights, checking names and shapes.
    pub fn load(cfg: &AEConfig, path: impl AsRef<Path>) -> Result<Self> {
        let mut model = Self::new(cfg)?;
        let f = std::io::BufReader::new(std::fs::File::open(path.as_ref())?);
        let store = read_checkpoint(f)?;
        replace_params(&mut model.params, store, path.as_ref())?;
        Ok(model)
    }
}

pub(crate) fn replace_params(dst: &mut ParamStore, src: ParamStore, path: &Path) -> Result<()> {
    let same = dst.len() == src.len()
        && dst.iter().zip(src.iter()).all(|((na, ta), (nb, tb))| na == nb && ta.shape() == tb.shape());
    if !same {
        return Err(Error::Format { path: path.to_path_buf(), msg: "checkpoint does not match model layout".into() });
    }
    *dst = src;
    Ok(())
}
