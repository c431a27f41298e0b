//! Post-LN transformer encoder over one protein's word sequence, with the
//! reverse pass written out by hand. All parameters live in one flat slice;
//! [`Layout`] records where each tensor starts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    Zeros,
    Ones,
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Glorot(usize, usize),
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub(crate) init: Init,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerOffsets {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub d: usize,
    pub heads: usize,
    pub ff: usize,
    pub hidden: usize,
    pub f: usize,
    cls: usize,
    layers: Vec<LayerOffsets>,
    hw1: usize,
    hb1: usize,
    hw2: usize,
    hb2: usize,
    pub specs: Vec<TensorSpec>,
    pub total: usize,
}

struct Builder {
    specs: Vec<TensorSpec>,
    next: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        let offset = self.next;
        let spec = TensorSpec {
            name,
            shape: shape.to_vec(),
            offset,
            init,
        };
        self.next += spec.len();
        self.specs.push(spec);
        offset
    }
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (d, ff, h, f) = (cfg.embed_dim, cfg.ff_dim, cfg.head_hidden, cfg.n_fragments);
        let mut b = Builder {
            specs: Vec::new(),
            next: 0,
        };
        let cls = b.add("cls".into(), &[d], Init::Uniform(0.1));
        let mut layers = Vec::new();
        for l in 0..cfg.n_layers {
            let n = |s: &str| format!("layer{l}.{s}");
            layers.push(LayerOffsets {
                ln1_g: b.add(n("ln1.gamma"), &[d], Init::Ones),
                ln1_b: b.add(n("ln1.beta"), &[d], Init::Zeros),
                wq: b.add(n("attn.wq"), &[d, d], Init::Glorot(d, d)),
                bq: b.add(n("attn.bq"), &[d], Init::Zeros),
                wk: b.add(n("attn.wk"), &[d, d], Init::Glorot(d, d)),
                bk: b.add(n("attn.bk"), &[d], Init::Zeros),
                wv: b.add(n("attn.wv"), &[d, d], Init::Glorot(d, d)),
                bv: b.add(n("attn.bv"), &[d], Init::Zeros),
                wo: b.add(n("attn.wo"), &[d, d], Init::Glorot(d, d)),
                bo: b.add(n("attn.bo"), &[d], Init::Zeros),
                ln2_g: b.add(n("ln2.gamma"), &[d], Init::Ones),
                ln2_b: b.add(n("ln2.beta"), &[d], Init::Zeros),
                w1: b.add(n("ff.w1"), &[d, ff], Init::Glorot(d, ff)),
                b1: b.add(n("ff.b1"), &[ff], Init::Zeros),
                w2: b.add(n("ff.w2"), &[ff, d], Init::Glorot(ff, d)),
                b2: b.add(n("ff.b2"), &[d], Init::Zeros),
            });
        }
        let hw1 = b.add("head.w1".into(), &[d, h], Init::Glorot(d, h));
        let hb1 = b.add("head.b1".into(), &[h], Init::Zeros);
        let hw2 = b.add("head.w2".into(), &[h, f], Init::Glorot(h, f));
        let hb2 = b.add("head.b2".into(), &[f], Init::Zeros);
        Layout {
            d,
            heads: cfg.n_heads,
            ff,
            hidden: h,
            f,
            cls,
            layers,
            hw1,
            hb1,
            hw2,
            hb2,
            total: b.next,
            specs: b.specs,
        }
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.total];
        for s in &self.specs {
            let slot = &mut p[s.offset..s.offset + s.len()];
            match s.init {
                Init::Zeros => {}
                Init::Ones => slot.fill(1.0),
                Init::Glorot(i, o) => {
                    let a = (6.0 / (i + o) as f64).sqrt();
                    slot.iter_mut().for_each(|v| *v = rng.random_range(-a..a));
                }
                Init::Uniform(a) => slot.iter_mut().for_each(|v| *v = rng.random_range(-a..a)),
            }
        }
        p
    }

    /// Offsets of the output layer weights and bias.
    pub fn head_output(&self) -> (usize, usize) {
        (self.hw2, self.hb2)
    }
}

pub(crate) fn gelu(x: f64) -> f64 {
    const S: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (S * (x + 0.044715 * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    const S: f64 = 0.797_884_560_802_865_4;
    let t = (S * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * S * (1.0 + 3.0 * 0.044715 * x * x)
}

/// `x (rows×n_in) · w (n_in×n_out) + b`.
fn linear(x: &[f64], rows: usize, n_in: usize, w: &[f64], b: &[f64], n_out: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(rows * n_out);
    for r in 0..rows {
        y.extend_from_slice(&b[..n_out]);
        let yr = &mut y[r * n_out..];
        for i in 0..n_in {
            let xi = x[r * n_in + i];
            if xi == 0.0 {
                continue;
            }
            for (yo, wo) in yr[..n_out].iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                *yo += xi * wo;
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients into `grad`; returns dL/dx.
#[allow(clippy::too_many_arguments)]
fn linear_backward(
    x: &[f64],
    dy: &[f64],
    rows: usize,
    n_in: usize,
    n_out: usize,
    w: &[f64],
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * n_in];
    for r in 0..rows {
        let dyr = &dy[r * n_out..(r + 1) * n_out];
        for (gb, d) in grad[b_off..b_off + n_out].iter_mut().zip(dyr) {
            *gb += d;
        }
        for i in 0..n_in {
            let xi = x[r * n_in + i];
            let wrow = &w[i * n_out..(i + 1) * n_out];
            let grow = &mut grad[w_off + i * n_out..w_off + (i + 1) * n_out];
            let mut acc = 0.0;
            for o in 0..n_out {
                grow[o] += xi * dyr[o];
                acc += wrow[o] * dyr[o];
            }
            dx[r * n_in + i] = acc;
        }
    }
    dx
}

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], rows: usize, d: usize, g: &[f64], b: &[f64]) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; rows * d];
    let mut xhat = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for j in 0..d {
            let h = (xr[j] - mean) * is;
            xhat[r * d + j] = h;
            y[r * d + j] = g[j] * h + b[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

#[allow(clippy::too_many_arguments)]
fn layer_norm_backward(
    dy: &[f64],
    c: &LnCache,
    rows: usize,
    d: usize,
    g: &[f64],
    grad: &mut [f64],
    g_off: usize,
    b_off: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * d];
    let mut dxhat = vec![0.0; d];
    for r in 0..rows {
        let (mut m1, mut m2) = (0.0, 0.0);
        for j in 0..d {
            let dyj = dy[r * d + j];
            let h = c.xhat[r * d + j];
            grad[g_off + j] += dyj * h;
            grad[b_off + j] += dyj;
            dxhat[j] = dyj * g[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * h;
        }
        m1 /= d as f64;
        m2 /= d as f64;
        for j in 0..d {
            dx[r * d + j] = c.inv_std[r] * (dxhat[j] - m1 - c.xhat[r * d + j] * m2);
        }
    }
    dx
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Layer input.
    h: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// heads × t × t attention weights.
    probs: Vec<f64>,
    o: Vec<f64>,
    drop1: Option<Vec<f64>>,
    ln1: LnCache,
    /// Output of the first norm, input of the feed-forward block.
    h2: Vec<f64>,
    u: Vec<f64>,
    g: Vec<f64>,
    drop2: Option<Vec<f64>>,
    ln2: LnCache,
}

/// Intermediate values of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub(crate) struct Cache {
    t: usize,
    layers: Vec<LayerCache>,
    c: Vec<f64>,
    z: Vec<f64>,
    gz: Vec<f64>,
}

fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Logits for one protein whose `n` word embeddings are the rows of `words`
/// (n×d, row-major). Dropout is applied to both residual branches when a
/// generator is supplied.
pub(crate) fn forward(
    lay: &Layout,
    p: &[f64],
    words: &[f64],
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (Vec<f64>, Cache) {
    let d = lay.d;
    let t = 1 + words.len() / d;
    let dh = d / lay.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut x = Vec::with_capacity(t * d);
    x.extend_from_slice(&p[lay.cls..lay.cls + d]);
    x.extend_from_slice(words);
    let mut dropout = dropout.filter(|(rate, _)| *rate > 0.0);
    let mut layers = Vec::with_capacity(lay.layers.len());
    for l in &lay.layers {
        let h = x;
        let q = linear(&h, t, d, &p[l.wq..], &p[l.bq..], d);
        let k = linear(&h, t, d, &p[l.wk..], &p[l.bk..], d);
        let v = linear(&h, t, d, &p[l.wv..], &p[l.bv..], d);
        let mut probs = vec![0.0; lay.heads * t * t];
        let mut o = vec![0.0; t * d];
        for hd in 0..lay.heads {
            let c0 = hd * dh;
            for i in 0..t {
                let row = &mut probs[(hd * t + i) * t..(hd * t + i + 1) * t];
                let qi = &q[i * d + c0..i * d + c0 + dh];
                for (j, s) in row.iter_mut().enumerate() {
                    *s = qi
                        .iter()
                        .zip(&k[j * d + c0..j * d + c0 + dh])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        * scale;
                }
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for s in row.iter_mut() {
                    *s = (*s - m).exp();
                    z += *s;
                }
                for (j, s) in row.iter_mut().enumerate() {
                    *s /= z;
                    for c in 0..dh {
                        o[i * d + c0 + c] += *s * v[j * d + c0 + c];
                    }
                }
            }
        }
        let mut a = linear(&o, t, d, &p[l.wo..], &p[l.bo..], d);
        let drop1 = dropout.as_mut().map(|(rate, rng)| dropout_mask(t * d, *rate, rng));
        if let Some(m) = &drop1 {
            a.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let s1: Vec<f64> = h.iter().zip(&a).map(|(u, v)| u + v).collect();
        let (h2, ln1) = layer_norm(&s1, t, d, &p[l.ln1_g..], &p[l.ln1_b..]);
        let u = linear(&h2, t, d, &p[l.w1..], &p[l.b1..], lay.ff);
        let g: Vec<f64> = u.iter().map(|&v| gelu(v)).collect();
        let mut f = linear(&g, t, lay.ff, &p[l.w2..], &p[l.b2..], d);
        let drop2 = dropout.as_mut().map(|(rate, rng)| dropout_mask(t * d, *rate, rng));
        if let Some(m) = &drop2 {
            f.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let s2: Vec<f64> = h2.iter().zip(&f).map(|(u, v)| u + v).collect();
        let (out, ln2) = layer_norm(&s2, t, d, &p[l.ln2_g..], &p[l.ln2_b..]);
        x = out;
        layers.push(LayerCache {
            h,
            q,
            k,
            v,
            probs,
            o,
            drop1,
            ln1,
            h2,
            u,
            g,
            drop2,
            ln2,
        });
    }
    let c = x[..d].to_vec();
    let z = linear(&c, 1, d, &p[lay.hw1..], &p[lay.hb1..], lay.hidden);
    let gz: Vec<f64> = z.iter().map(|&v| gelu(v)).collect();
    let logits = linear(&gz, 1, lay.hidden, &p[lay.hw2..], &p[lay.hb2..], lay.f);
    (logits, Cache { t, layers, c, z, gz })
}

/// Reverse pass for dL/dlogits. Parameter gradients are added into `grad`;
/// the gradient with respect to the word embeddings (n×d) is returned.
pub(crate) fn backward(lay: &Layout, p: &[f64], cache: &Cache, dlogits: &[f64], grad: &mut [f64]) -> Vec<f64> {
    let d = lay.d;
    let t = cache.t;
    let dh = d / lay.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let dgz = linear_backward(
        &cache.gz,
        dlogits,
        1,
        lay.hidden,
        lay.f,
        &p[lay.hw2..],
        grad,
        lay.hw2,
        lay.hb2,
    );
    let dz: Vec<f64> = dgz.iter().zip(&cache.z).map(|(g, &z)| g * gelu_grad(z)).collect();
    let dc = linear_backward(&cache.c, &dz, 1, d, lay.hidden, &p[lay.hw1..], grad, lay.hw1, lay.hb1);
    let mut dx = vec![0.0; t * d];
    dx[..d].copy_from_slice(&dc);

    for (l, lc) in lay.layers.iter().zip(&cache.layers).rev() {
        let ds2 = layer_norm_backward(&dx, &lc.ln2, t, d, &p[l.ln2_g..], grad, l.ln2_g, l.ln2_b);
        let mut df = ds2.clone();
        if let Some(m) = &lc.drop2 {
            df.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let dg = linear_backward(&lc.g, &df, t, lay.ff, d, &p[l.w2..], grad, l.w2, l.b2);
        let du: Vec<f64> = dg.iter().zip(&lc.u).map(|(g, &u)| g * gelu_grad(u)).collect();
        let dff = linear_backward(&lc.h2, &du, t, d, lay.ff, &p[l.w1..], grad, l.w1, l.b1);
        let dh2: Vec<f64> = ds2.iter().zip(&dff).map(|(a, b)| a + b).collect();
        let ds1 = layer_norm_backward(&dh2, &lc.ln1, t, d, &p[l.ln1_g..], grad, l.ln1_g, l.ln1_b);

        let mut da = ds1.clone();
        if let Some(m) = &lc.drop1 {
            da.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let d_o = linear_backward(&lc.o, &da, t, d, d, &p[l.wo..], grad, l.wo, l.bo);
        let mut dq = vec![0.0; t * d];
        let mut dk = vec![0.0; t * d];
        let mut dv = vec![0.0; t * d];
        let mut dprob = vec![0.0; t];
        for hd in 0..lay.heads {
            let c0 = hd * dh;
            for i in 0..t {
                let a = &lc.probs[(hd * t + i) * t..(hd * t + i + 1) * t];
                let doi = &d_o[i * d + c0..i * d + c0 + dh];
                let mut dot = 0.0;
                for j in 0..t {
                    let vj = &lc.v[j * d + c0..j * d + c0 + dh];
                    dprob[j] = doi.iter().zip(vj).map(|(x, y)| x * y).sum();
                    dot += a[j] * dprob[j];
                    for c in 0..dh {
                        dv[j * d + c0 + c] += a[j] * doi[c];
                    }
                }
                for j in 0..t {
                    let ds = a[j] * (dprob[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for c in 0..dh {
                        dq[i * d + c0 + c] += ds * lc.k[j * d + c0 + c];
                        dk[j * d + c0 + c] += ds * lc.q[i * d + c0 + c];
                    }
                }
            }
        }
        let mut dh = linear_backward(&lc.h, &dq, t, d, d, &p[l.wq..], grad, l.wq, l.bq);
        for (src, (w, b)) in [(&dk, (l.wk, l.bk)), (&dv, (l.wv, l.bv))] {
            let part = linear_backward(&lc.h, src, t, d, d, &p[w..], grad, w, b);
            dh.iter_mut().zip(&part).for_each(|(a, b)| *a += b);
        }
        dx = ds1.iter().zip(&dh).map(|(a, b)| a + b).collect();
    }
    for j in 0..d {
        grad[lay.cls + j] += dx[j];
    }
    dx.split_off(d)
}
