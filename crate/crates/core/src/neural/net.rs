use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::context::EpisodeContext;
use super::layout::{Gradients, ParamLayout};
use super::loss::{sample_loss, LossKind, Sample};
use crate::envs::{EnvKind, EnvState};
use crate::error::NeuralError;
use crate::scalar::Scalar;
use crate::term::{Symbol, Term};

/// Nonlinearities between the three predictor layers.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorActivations {
    #[default]
    SigmoidRelu,
    ReluSigmoid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub env: EnvKind,
    /// Internal representation size.
    pub n: usize,
    /// Predictor hidden width.
    pub hidden: usize,
    pub num_actions: usize,
    pub value_head: bool,
    pub activations: PredictorActivations,
}

impl ModelConfig {
    pub fn for_env(env: EnvKind) -> Self {
        ModelConfig {
            env,
            n: if env == EnvKind::Ra { 16 } else { 32 },
            hidden: 64,
            num_actions: env.num_actions(),
            value_head: false,
            activations: PredictorActivations::default(),
        }
    }

    pub fn with_value_head(mut self) -> Self {
        self.value_head = true;
        self
    }
}

/// `n_in -> n (ReLU) -> n` block, addressed by parameter offsets.
#[derive(Copy, Clone, Debug)]
struct Mlp {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    input: usize,
}

#[derive(Copy, Clone, Debug)]
struct Dense {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug)]
struct Arch {
    ops: HashMap<Symbol, Mlp>,
    cursor: Mlp,
    fresh: Option<Mlp>,
    leaves: HashMap<Symbol, usize>,
    p1: Dense,
    p2: Dense,
    p3: Dense,
    value: Option<Dense>,
}

fn build_arch(config: &ModelConfig) -> (ParamLayout, Arch) {
    let n = config.n;
    let h = config.hidden;
    let sig = config.env.signature();
    let mut layout = ParamLayout::default();
    let mlp = |layout: &mut ParamLayout, prefix: &str, input: usize| Mlp {
        w1: layout.push(format!("{prefix}.w1"), vec![n, input], true),
        b1: layout.push(format!("{prefix}.b1"), vec![n], true),
        w2: layout.push(format!("{prefix}.w2"), vec![n, n], true),
        b2: layout.push(format!("{prefix}.b2"), vec![n], true),
        input,
    };
    let ops = sig
        .operators()
        .iter()
        .map(|&s| (s, mlp(&mut layout, &format!("op.{}", s.name()), s.arity() * n)))
        .collect();
    let cursor = mlp(&mut layout, "cursor", n);
    let fresh = sig.allows_fresh().then(|| mlp(&mut layout, "fresh", n));
    let leaves = sig
        .named_leaves()
        .into_iter()
        .map(|s| {
            let frozen = config.env == EnvKind::Ra && s == Symbol::Zero;
            (s, layout.push(format!("leaf.{}", s.name()), vec![n], !frozen))
        })
        .collect();
    let dense = |layout: &mut ParamLayout, prefix: &str, rows: usize, cols: usize| Dense {
        w: layout.push(format!("{prefix}.w"), vec![rows, cols], true),
        b: layout.push(format!("{prefix}.b"), vec![rows], true),
        rows,
        cols,
    };
    let p1 = dense(&mut layout, "pred.l1", h, n);
    let p2 = dense(&mut layout, "pred.l2", h, h);
    let p3 = dense(&mut layout, "pred.l3", config.num_actions, h);
    let value = config.value_head.then(|| dense(&mut layout, "value", 1, h));
    let arch = Arch {
        ops,
        cursor,
        fresh,
        leaves,
        p1,
        p2,
        p3,
        value,
    };
    (layout, arch)
}

/// Tree neural network policy with an optional value head. All tensors
/// live in one flat vector described by [`ParamLayout`].
#[derive(Clone, Debug)]
pub struct TreePolicy<T> {
    config: ModelConfig,
    layout: Arc<ParamLayout>,
    arch: Arc<Arch>,
    params: Vec<T>,
}

/// Masked action distribution and value estimate for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput<T> {
    /// Zero on illegal actions; sums to one over legal ones.
    pub probs: Vec<T>,
    pub logits: Vec<T>,
    pub value: Option<T>,
}

impl<T: Scalar> PolicyOutput<T> {
    /// Most probable action; ties go to the lowest id.
    pub fn greedy(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Copy, Clone, Debug)]
enum Src {
    Leaf(usize),
    Unit(usize),
}

#[derive(Clone, Debug)]
enum Kind {
    Op(Symbol),
    Cursor,
    Fresh,
}

struct Unit<T> {
    kind: Kind,
    inputs: Vec<Src>,
    x: Vec<T>,
    a1: Vec<T>,
    out: Vec<T>,
}

/// Everything the backward pass needs from one forward pass.
struct Tape<T> {
    units: Vec<Unit<T>>,
    root: Src,
    emb: Vec<T>,
    z1: Vec<T>,
    h1: Vec<T>,
    z2: Vec<T>,
    h2: Vec<T>,
}

fn affine<T: Scalar>(p: &[T], d: &Dense, x: &[T]) -> Vec<T> {
    let w = &p[d.w..d.w + d.rows * d.cols];
    let b = &p[d.b..d.b + d.rows];
    (0..d.rows)
        .map(|r| {
            let row = &w[r * d.cols..(r + 1) * d.cols];
            row.iter().zip(x).fold(b[r], |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

/// `g_w += dy x^T`, `g_b += dy`, `dx += W^T dy`.
fn affine_back<T: Scalar>(p: &[T], g: &mut [T], d: &Dense, x: &[T], dy: &[T], dx: Option<&mut [T]>) {
    for r in 0..d.rows {
        if dy[r] == T::zero() {
            continue;
        }
        g[d.b + r] += dy[r];
        let gw = &mut g[d.w + r * d.cols..d.w + (r + 1) * d.cols];
        for (gi, &xi) in gw.iter_mut().zip(x) {
            *gi += dy[r] * xi;
        }
    }
    if let Some(dx) = dx {
        let w = &p[d.w..d.w + d.rows * d.cols];
        for r in 0..d.rows {
            if dy[r] == T::zero() {
                continue;
            }
            let row = &w[r * d.cols..(r + 1) * d.cols];
            for (dxi, &wi) in dx.iter_mut().zip(row) {
                *dxi += wi * dy[r];
            }
        }
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn relu<T: Scalar>(z: T) -> T {
    z.max(T::zero())
}

impl Mlp {
    fn first(&self, n: usize) -> Dense {
        Dense {
            w: self.w1,
            b: self.b1,
            rows: n,
            cols: self.input,
        }
    }

    fn second(&self, n: usize) -> Dense {
        Dense {
            w: self.w2,
            b: self.b2,
            rows: n,
            cols: n,
        }
    }
}

impl<T: Scalar> TreePolicy<T> {
    /// Fan-in scaled uniform weights; standard-normal leaf vectors.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let (layout, arch) = build_arch(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![T::zero(); layout.len()];
        let blocks = layout.blocks();
        for (i, b) in blocks.iter().enumerate() {
            let leaf = b.name.starts_with("leaf.");
            // a bias follows its weight matrix and shares its bound
            let fan_in = match b.shape.len() {
                2 => b.shape[1],
                _ if leaf => 1,
                _ => blocks[i - 1].shape[1],
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut params[b.range()] {
                let x: f64 = if leaf {
                    StandardNormal.sample(&mut rng)
                } else {
                    rng.random_range(-bound..bound)
                };
                *v = T::from_f64_lossy(x);
            }
        }
        TreePolicy {
            config,
            layout: Arc::new(layout),
            arch: Arc::new(arch),
            params,
        }
    }

    /// Replaces the parameters, keeping the architecture.
    pub fn with_params(&self, params: Vec<T>) -> Result<Self, NeuralError> {
        if params.len() != self.params.len() {
            return Err(NeuralError::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        Ok(TreePolicy {
            params,
            ..self.clone()
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn n(&self) -> usize {
        self.config.n
    }

    fn value_of<'a>(&'a self, tape: &'a [Unit<T>], s: Src) -> &'a [T] {
        match s {
            Src::Leaf(off) => &self.params[off..off + self.n()],
            Src::Unit(i) => &tape[i].out,
        }
    }

    fn run_mlp(&self, m: &Mlp, x: Vec<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.n();
        let a1: Vec<T> = affine(&self.params, &m.first(n), &x).into_iter().map(relu).collect();
        let out = affine(&self.params, &m.second(n), &a1);
        (x, a1, out)
    }

    fn push_unit(&self, units: &mut Vec<Unit<T>>, kind: Kind, inputs: Vec<Src>, x: Vec<T>) -> Src {
        let m = self.mlp_of(&kind);
        let (x, a1, out) = self.run_mlp(&m, x);
        units.push(Unit {
            kind,
            inputs,
            x,
            a1,
            out,
        });
        Src::Unit(units.len() - 1)
    }

    fn mlp_of(&self, kind: &Kind) -> Mlp {
        match kind {
            Kind::Op(s) => self.arch.ops[s],
            Kind::Cursor => self.arch.cursor,
            Kind::Fresh => self.arch.fresh.expect("fresh units exist only with a projection net"),
        }
    }

    fn fold(
        &self,
        t: &Term,
        path: &mut Vec<usize>,
        cursor: &[usize],
        ctx: &EpisodeContext<T>,
        units: &mut Vec<Unit<T>>,
    ) -> Result<Src, NeuralError> {
        let sym = t.symbol();
        let src = if let Some(&off) = self.arch.leaves.get(&sym) {
            Src::Leaf(off)
        } else if let Symbol::Fresh(k) = sym {
            if self.arch.fresh.is_none() {
                return Err(NeuralError::UnknownSymbol(sym.name()));
            }
            self.push_unit(units, Kind::Fresh, vec![], ctx.vector(k))
        } else if self.arch.ops.contains_key(&sym) {
            let mut inputs = Vec::with_capacity(t.args().len());
            for (i, a) in t.args().iter().enumerate() {
                path.push(i);
                inputs.push(self.fold(a, path, cursor, ctx, units)?);
                path.pop();
            }
            let mut x = Vec::with_capacity(inputs.len() * self.n());
            for &s in &inputs {
                x.extend_from_slice(self.value_of(units, s));
            }
            self.push_unit(units, Kind::Op(sym), inputs, x)
        } else {
            return Err(NeuralError::UnknownSymbol(sym.name()));
        };
        if path.as_slice() == cursor {
            let x = self.value_of(units, src).to_vec();
            return Ok(self.push_unit(units, Kind::Cursor, vec![src], x));
        }
        Ok(src)
    }

    fn forward_tape(&self, s: &EnvState, ctx: &EpisodeContext<T>) -> Result<(Tape<T>, Vec<T>, Option<T>), NeuralError> {
        if ctx.dim() != self.n() {
            return Err(NeuralError::Shape(format!("context dim {} vs n {}", ctx.dim(), self.n())));
        }
        let mut units = Vec::new();
        let root = self.fold(&s.term, &mut Vec::new(), s.cursor.indices(), ctx, &mut units)?;
        let emb = self.value_of(&units, root).to_vec();
        let a = &self.arch;
        let (act1, act2): (fn(T) -> T, fn(T) -> T) = match self.config.activations {
            PredictorActivations::SigmoidRelu => (sigmoid, relu),
            PredictorActivations::ReluSigmoid => (relu, sigmoid),
        };
        let z1 = affine(&self.params, &a.p1, &emb);
        let h1: Vec<T> = z1.iter().map(|&z| act1(z)).collect();
        let z2 = affine(&self.params, &a.p2, &h1);
        let h2: Vec<T> = z2.iter().map(|&z| act2(z)).collect();
        let logits = affine(&self.params, &a.p3, &h2);
        let value = a.value.as_ref().map(|d| affine(&self.params, d, &h2)[0]);
        Ok((
            Tape {
                units,
                root,
                emb,
                z1,
                h1,
                z2,
                h2,
            },
            logits,
            value,
        ))
    }

    /// Vector for the whole tree with the cursor node wrapped by the cursor
    /// net.
    pub fn embed(&self, s: &EnvState, ctx: &EpisodeContext<T>) -> Result<Vec<T>, NeuralError> {
        let mut units = Vec::new();
        let root = self.fold(&s.term, &mut Vec::new(), s.cursor.indices(), ctx, &mut units)?;
        Ok(self.value_of(&units, root).to_vec())
    }

    /// Softmax over the legal actions; illegal actions get probability 0.
    pub fn forward(&self, s: &EnvState, ctx: &EpisodeContext<T>, mask: &[bool]) -> Result<PolicyOutput<T>, NeuralError> {
        self.check_mask(mask)?;
        let (_, logits, value) = self.forward_tape(s, ctx)?;
        Ok(PolicyOutput {
            probs: masked_softmax(&logits, mask),
            logits,
            value,
        })
    }

    /// Value-head output, independent of any mask.
    pub fn value(&self, s: &EnvState, ctx: &EpisodeContext<T>) -> Result<T, NeuralError> {
        if self.arch.value.is_none() {
            return Err(NeuralError::MissingValueHead);
        }
        let (_, _, value) = self.forward_tape(s, ctx)?;
        Ok(value.expect("value head present"))
    }

    fn check_mask(&self, mask: &[bool]) -> Result<(), NeuralError> {
        if mask.len() != self.config.num_actions {
            return Err(NeuralError::Shape(format!(
                "mask has {} entries, network has {} actions",
                mask.len(),
                self.config.num_actions
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(NeuralError::EmptyMask);
        }
        Ok(())
    }

    /// Mean loss over the batch, without gradients.
    pub fn loss(&self, batch: &[Sample<'_, T>], kind: LossKind) -> Result<T, NeuralError> {
        let mut total = T::zero();
        for smp in batch {
            self.check_mask(smp.mask)?;
            let (_, logits, value) = self.forward_tape(smp.state, smp.ctx)?;
            let probs = masked_softmax(&logits, smp.mask);
            total += sample_loss(kind, &smp.target, &probs, smp.mask, value)?.loss;
        }
        Ok(total / T::from_usize(batch.len().max(1)).expect("batch size"))
    }

    /// Mean loss and its gradient. Frozen tensors get exactly zero.
    pub fn grad(&self, batch: &[Sample<'_, T>], kind: LossKind) -> Result<(T, Gradients<T>), NeuralError> {
        let mut g = Gradients::zeros(self.params.len());
        let mut total = T::zero();
        for smp in batch {
            self.check_mask(smp.mask)?;
            let (tape, logits, value) = self.forward_tape(smp.state, smp.ctx)?;
            let probs = masked_softmax(&logits, smp.mask);
            let l = sample_loss(kind, &smp.target, &probs, smp.mask, value)?;
            total += l.loss;
            self.backward(&tape, &l.dlogits, l.dvalue, &mut g.data);
        }
        let scale = T::one() / T::from_usize(batch.len().max(1)).expect("batch size");
        g.scale(scale);
        for b in self.layout.blocks() {
            if !b.trainable {
                g.data[b.range()].fill(T::zero());
            }
        }
        Ok((total * scale, g))
    }

    fn backward(&self, tape: &Tape<T>, dlogits: &[T], dvalue: T, g: &mut [T]) {
        let a = &self.arch;
        let p = &self.params;
        let mut dh2 = vec![T::zero(); a.p3.cols];
        affine_back(p, g, &a.p3, &tape.h2, dlogits, Some(&mut dh2));
        if let Some(d) = &a.value {
            affine_back(p, g, d, &tape.h2, &[dvalue], Some(&mut dh2));
        }
        let deriv = |z: T, h: T, sig: bool| if sig { h * (T::one() - h) } else if z > T::zero() { T::one() } else { T::zero() };
        let (sig1, sig2) = match self.config.activations {
            PredictorActivations::SigmoidRelu => (true, false),
            PredictorActivations::ReluSigmoid => (false, true),
        };
        let dz2: Vec<T> = (0..dh2.len()).map(|i| dh2[i] * deriv(tape.z2[i], tape.h2[i], sig2)).collect();
        let mut dh1 = vec![T::zero(); a.p2.cols];
        affine_back(p, g, &a.p2, &tape.h1, &dz2, Some(&mut dh1));
        let dz1: Vec<T> = (0..dh1.len()).map(|i| dh1[i] * deriv(tape.z1[i], tape.h1[i], sig1)).collect();
        let mut demb = vec![T::zero(); self.n()];
        affine_back(p, g, &a.p1, &tape.emb, &dz1, Some(&mut demb));

        let n = self.n();
        let mut douts: Vec<Vec<T>> = tape.units.iter().map(|_| vec![T::zero(); n]).collect();
        let route = |src: Src, d: &[T], douts: &mut Vec<Vec<T>>, g: &mut [T]| match src {
            Src::Leaf(off) => {
                for (gi, &di) in g[off..off + n].iter_mut().zip(d) {
                    *gi += di;
                }
            }
            Src::Unit(j) => {
                for (o, &di) in douts[j].iter_mut().zip(d) {
                    *o += di;
                }
            }
        };
        route(tape.root, &demb, &mut douts, g);
        for (i, u) in tape.units.iter().enumerate().rev() {
            let dout = std::mem::take(&mut douts[i]);
            if dout.iter().all(|&d| d == T::zero()) {
                continue;
            }
            let m = self.mlp_of(&u.kind);
            let mut da1 = vec![T::zero(); n];
            affine_back(p, g, &m.second(n), &u.a1, &dout, Some(&mut da1));
            let dz: Vec<T> = da1
                .iter()
                .zip(&u.a1)
                .map(|(&d, &a)| if a > T::zero() { d } else { T::zero() })
                .collect();
            let want_dx = !u.inputs.is_empty();
            let mut dx = vec![T::zero(); if want_dx { m.input } else { 0 }];
            affine_back(p, g, &m.first(n), &u.x, &dz, want_dx.then_some(dx.as_mut_slice()));
            for (k, &src) in u.inputs.iter().enumerate() {
                route(src, &dx[k * n..(k + 1) * n], &mut douts, g);
            }
        }
    }
}

/// Softmax restricted to `mask`; masked entries are exactly zero.
pub fn masked_softmax<T: Scalar>(logits: &[T], mask: &[bool]) -> Vec<T> {
    let m = logits
        .iter()
        .zip(mask)
        .filter(|(_, &ok)| ok)
        .map(|(&l, _)| l)
        .fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &ok)| if ok { (l - m).exp() } else { T::zero() })
        .collect();
    let z: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / z).collect()
}
