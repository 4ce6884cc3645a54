use super::kernels::{self, ScalarWithGrad};
use super::params::NORM_EPS;
use super::{Graph, NormId, NormUpdate, ParamId, ParamStore, Real, Tensor};
use crate::error::{Error, Result};

/// Handle of a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Input,
    Param(ParamId),
    Affine { x: usize, w: usize, b: Option<usize> },
    Norm { x: usize, gamma: usize, beta: usize, xhat: Vec<T>, inv_std: Vec<T>, train: bool },
    Relu { x: usize },
    MaxReduce { x: usize, k: usize, arg: Vec<u32> },
    Gather { x: usize, index: Vec<u32> },
    WeightedGather { x: usize, index: Vec<u32>, weights: Vec<T>, fan: usize },
    Concat { a: usize, b: usize },
    Add { a: usize, b: usize },
    MulConst { x: usize, c: Vec<T> },
    /// Scalar output with the input gradient precomputed during forward.
    Reduce { x: usize, grad: Vec<T> },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Affine { .. } => "affine",
            Op::Norm { .. } => "batch_norm",
            Op::Relu { .. } => "relu",
            Op::MaxReduce { .. } => "max_reduce",
            Op::Gather { .. } => "gather",
            Op::WeightedGather { .. } => "weighted_gather",
            Op::Concat { .. } => "concat",
            Op::Add { .. } => "add",
            Op::MulConst { .. } => "mul_const",
            Op::Reduce { .. } => "reduce",
        }
    }
}

struct Node<T> {
    /// `None` for parameter leaves, which read through the store.
    value: Option<Tensor<T>>,
    op: Op<T>,
}

/// Append-only record of a forward pass.
///
/// Nodes only reference earlier nodes, so index order is a topological order
/// and the reverse sweep visits each node once.
pub struct Tape<'a, T: Real = f32> {
    store: &'a ParamStore<T>,
    nodes: Vec<Node<T>>,
    training: bool,
    norm_updates: Vec<NormUpdate<T>>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    params: Vec<Option<Vec<T>>>,
    shapes: Vec<usize>,
    inputs: Vec<(usize, Vec<T>)>,
}

impl<T: Real> Gradients<T> {
    /// Gradients given directly, one dense vector per parameter in store order.
    pub fn from_dense(grads: Vec<Vec<T>>) -> Self {
        Gradients { shapes: grads.iter().map(Vec::len).collect(), params: grads.into_iter().map(Some).collect(), inputs: Vec::new() }
    }

    /// Gradient of a parameter; `None` when the loss does not reach it.
    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.params.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient of a parameter, zero-filled when unreachable.
    pub fn dense(&self, id: ParamId) -> Vec<T> {
        self.get(id).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); self.shapes[id.0]])
    }

    /// Gradient flowing into an input leaf.
    pub fn wrt_input(&self, v: Var) -> Option<&[T]> {
        self.inputs.iter().find(|(i, _)| *i == v.0).map(|(_, g)| g.as_slice())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Writes every gradient into the matching tensor's grad slot; unreachable parameters get zeros.
    pub fn write_to(&self, store: &mut ParamStore<T>) -> Result<()> {
        for id in store.ids().collect::<Vec<_>>() {
            let g = self.dense(id);
            store.tensor_mut(id).set_grad(g)?;
        }
        Ok(())
    }

    /// Adds `other` into `self` (gradient accumulation across micro-batches).
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            match (dst.as_mut(), src) {
                (Some(d), Some(s)) => d.iter_mut().zip(s).for_each(|(a, &b)| *a = *a + b),
                (None, Some(s)) => *dst = Some(s.clone()),
                _ => {}
            }
        }
    }
}

fn accumulate<T: Real>(slot: &mut Option<Vec<T>>, g: Vec<T>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
        None => *slot = Some(g),
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new(store: &'a ParamStore<T>, training: bool) -> Self {
        Tape { store, nodes: Vec::new(), training, norm_updates: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears every recorded node and pending normalization update.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.norm_updates.clear();
    }

    /// First element of a node's value (the loss, for scalar nodes).
    pub fn value_of(&self, v: Var) -> T {
        self.val(v.0).item()
    }

    /// Operation names in recording order.
    pub fn ops(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.name()).collect()
    }

    /// Batch statistics gathered by training-mode normalization since the last reset.
    pub fn take_norm_updates(&mut self) -> Vec<NormUpdate<T>> {
        std::mem::take(&mut self.norm_updates)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, i: usize) -> &Tensor<T> {
        let node = &self.nodes[i];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(id)) => self.store.tensor(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    fn push_reduce(&mut self, x: usize, r: ScalarWithGrad<T>) -> Var {
        self.push(Tensor::scalar(r.value), Op::Reduce { x, grad: r.grad })
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.val(loss.0);
        if !lv.is_scalar() {
            return Err(Error::Contract(format!("backward needs a scalar loss, got shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);
        let mut params: Vec<Option<Vec<T>>> = vec![None; self.store.len()];
        let mut inputs = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Input => inputs.push((i, dy)),
                Op::Param(id) => accumulate(&mut params[id.0], dy),
                Op::Affine { x, w, b } => {
                    let g = kernels::affine_backward(self.val(*x), self.val(*w), &dy, true);
                    accumulate(&mut grads[*x], g.dx.unwrap());
                    accumulate(&mut grads[*w], g.dw);
                    if let Some(b) = b {
                        accumulate(&mut grads[*b], g.db);
                    }
                }
                Op::Norm { x, gamma, beta, xhat, inv_std, train } => {
                    let g = kernels::batch_norm_backward(&dy, xhat, inv_std, self.val(*gamma).data(), *train);
                    accumulate(&mut grads[*x], g.dx);
                    accumulate(&mut grads[*gamma], g.dgamma);
                    accumulate(&mut grads[*beta], g.dbeta);
                }
                Op::Relu { x } => {
                    let g = kernels::relu_backward(self.val(*x).data(), &dy);
                    accumulate(&mut grads[*x], g);
                }
                Op::MaxReduce { x, k, arg } => {
                    let c = self.val(*x).cols();
                    accumulate(&mut grads[*x], kernels::max_reduce_backward(&dy, arg, *k, c));
                }
                Op::Gather { x, index } => {
                    let xv = self.val(*x);
                    let w = self.val(i).cols();
                    accumulate(&mut grads[*x], kernels::gather_backward(&dy, index, xv.rows(), xv.cols(), w));
                }
                Op::WeightedGather { x, index, weights, fan } => {
                    let xv = self.val(*x);
                    let g = kernels::weighted_gather_backward(&dy, index, weights, *fan, xv.rows(), xv.cols());
                    accumulate(&mut grads[*x], g);
                }
                Op::Concat { a, b } => {
                    let (da, db) = kernels::split_cols(&dy, self.val(*a).cols(), self.val(*b).cols());
                    accumulate(&mut grads[*a], da);
                    accumulate(&mut grads[*b], db);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads[*a], dy.clone());
                    accumulate(&mut grads[*b], dy);
                }
                Op::MulConst { x, c } => {
                    let g = dy.iter().zip(c).map(|(&a, &b)| a * b).collect();
                    accumulate(&mut grads[*x], g);
                }
                Op::Reduce { x, grad } => {
                    let s = dy[0];
                    accumulate(&mut grads[*x], grad.iter().map(|&g| g * s).collect());
                }
            }
        }
        inputs.reverse();
        let shapes = self.store.params().iter().map(|p| p.tensor.len()).collect();
        Ok(Gradients { params, shapes, inputs })
    }
}

impl<'a, T: Real> Graph<T> for Tape<'a, T> {
    type Var = Var;

    fn training(&self) -> bool {
        self.training
    }

    fn store(&self) -> &ParamStore<T> {
        self.store
    }

    fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Input)
    }

    fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { value: None, op: Op::Param(id) });
        Var(self.nodes.len() - 1)
    }

    fn value<'s>(&'s self, v: &'s Var) -> &'s Tensor<T> {
        self.val(v.0)
    }

    fn affine(&mut self, x: &Var, w: &Var, b: Option<&Var>) -> Result<Var> {
        let out = kernels::affine(self.val(x.0), self.val(w.0), b.map(|b| self.val(b.0)))?;
        Ok(self.push(out, Op::Affine { x: x.0, w: w.0, b: b.map(|b| b.0) }))
    }

    fn batch_norm(&mut self, x: &Var, gamma: &Var, beta: &Var, state: NormId) -> Result<Var> {
        let running = if self.training {
            None
        } else {
            let s = self.store.norm(state);
            Some((s.mean.as_slice(), s.var.as_slice()))
        };
        let f = kernels::batch_norm(self.val(x.0), self.val(gamma.0), self.val(beta.0), running, T::of(NORM_EPS))?;
        if let Some((mean, var)) = f.stats {
            self.norm_updates.push(NormUpdate { id: state, mean, var });
        }
        let op = Op::Norm { x: x.0, gamma: gamma.0, beta: beta.0, xhat: f.xhat, inv_std: f.inv_std, train: self.training };
        Ok(self.push(f.out, op))
    }

    fn relu(&mut self, x: &Var) -> Var {
        let out = kernels::relu(self.val(x.0));
        self.push(out, Op::Relu { x: x.0 })
    }

    fn max_reduce(&mut self, x: &Var, k: usize) -> Result<Var> {
        let (out, arg) = kernels::max_reduce(self.val(x.0), k)?;
        Ok(self.push(out, Op::MaxReduce { x: x.0, k, arg }))
    }

    fn gather(&mut self, x: &Var, index: Vec<u32>, extra: Option<Tensor<T>>) -> Result<Var> {
        let out = kernels::gather(self.val(x.0), &index, extra.as_ref())?;
        Ok(self.push(out, Op::Gather { x: x.0, index }))
    }

    fn weighted_gather(&mut self, x: &Var, index: Vec<u32>, weights: Vec<T>, fan: usize) -> Result<Var> {
        let out = kernels::weighted_gather(self.val(x.0), &index, &weights, fan)?;
        Ok(self.push(out, Op::WeightedGather { x: x.0, index, weights, fan }))
    }

    fn concat(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = kernels::concat_cols(self.val(a.0), self.val(b.0))?;
        Ok(self.push(out, Op::Concat { a: a.0, b: b.0 }))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = kernels::add(self.val(a.0), self.val(b.0))?;
        Ok(self.push(out, Op::Add { a: a.0, b: b.0 }))
    }

    fn mul_const(&mut self, x: &Var, c: Vec<T>) -> Result<Var> {
        let out = kernels::mul_const(self.val(x.0), &c)?;
        Ok(self.push(out, Op::MulConst { x: x.0, c }))
    }

    fn cross_entropy(&mut self, logits: &Var, targets: &[usize], eps: T, weights: Option<&[T]>) -> Result<Var> {
        let r = kernels::smoothed_cross_entropy(self.val(logits.0), targets, eps, weights)?;
        Ok(self.push_reduce(logits.0, r))
    }

    fn poly_focal(&mut self, logits: &Var, targets: &[usize], gamma: T, alpha: T, eps1: T, weights: Option<&[T]>) -> Result<Var> {
        let r = kernels::poly_focal(self.val(logits.0), targets, gamma, alpha, eps1, weights)?;
        Ok(self.push_reduce(logits.0, r))
    }

    fn sum_squares(&mut self, x: &Var) -> Var {
        let r = kernels::sum_squares(self.val(x.0));
        self.push_reduce(x.0, r)
    }

    fn dot_const(&mut self, x: &Var, c: Vec<T>) -> Result<Var> {
        let r = kernels::dot_const(self.val(x.0), &c)?;
        Ok(self.push_reduce(x.0, r))
    }
}
