use std::collections::{HashMap, HashSet};

use super::error::{Result, TensorError};
use super::tensor::{nan_check_enabled, with_grad_mode, Tensor};
use crate::scalar::Scalar;

/// Reachable gradient-tracking nodes in post-order (every node after its inputs).
fn topo_order<T: Scalar>(root: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut order = Vec::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<(Tensor<T>, bool)> = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !seen.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        if let Some(gf) = &t.node.grad_fn {
            for inp in gf.inputs.iter().rev() {
                if inp.requires_grad() && !seen.contains(&inp.id()) {
                    stack.push((inp.clone(), false));
                }
            }
        }
    }
    order
}

fn check_finite<T: Scalar>(t: &Tensor<T>, op: &str) -> Result<()> {
    if nan_check_enabled() && !t.all_finite() {
        return Err(TensorError::NonFinite {
            context: format!("gradient with respect to {op} of shape {:?}", t.shape()),
        });
    }
    Ok(())
}

/// Pushes `seed` (d root / d root) through the graph and returns the gradients that
/// reached each node in `keep`.
fn propagate<T: Scalar>(
    root: &Tensor<T>,
    seed: Tensor<T>,
    create_graph: bool,
    keep: &HashSet<u64>,
) -> Result<HashMap<u64, Tensor<T>>> {
    let order = topo_order(root);
    // Nodes with a path to something in `keep`; everything else needs no gradient.
    let mut needed: HashSet<u64> = HashSet::new();
    for node in &order {
        let feeds_keep = node
            .node
            .grad_fn
            .as_ref()
            .is_some_and(|gf| gf.inputs.iter().any(|i| needed.contains(&i.id())));
        if feeds_keep || keep.contains(&node.id()) {
            needed.insert(node.id());
        }
    }
    let mut grads: HashMap<u64, Tensor<T>> = HashMap::new();
    grads.insert(root.id(), seed);
    let mut kept = HashMap::new();
    for node in order.iter().rev() {
        let Some(g) = grads.remove(&node.id()) else {
            continue;
        };
        if !needed.contains(&node.id()) {
            continue;
        }
        if let Some(gf) = &node.node.grad_fn {
            let need: Vec<bool> = gf
                .inputs
                .iter()
                .map(|i| i.requires_grad() && needed.contains(&i.id()))
                .collect();
            let input_grads = with_grad_mode(create_graph, || (gf.backward)(&gf.inputs, &need, &g))?;
            debug_assert_eq!(input_grads.len(), gf.inputs.len());
            for ((inp, ig), &wanted) in gf.inputs.iter().zip(input_grads).zip(&need) {
                let Some(ig) = ig else { continue };
                if !wanted {
                    continue;
                }
                if ig.shape() != inp.shape() {
                    return Err(TensorError::ShapeMismatch {
                        op: gf.name,
                        lhs: inp.shape().to_vec(),
                        rhs: ig.shape().to_vec(),
                    });
                }
                let acc = match grads.remove(&inp.id()) {
                    Some(prev) => with_grad_mode(create_graph, || prev.add(&ig))?,
                    None => ig,
                };
                grads.insert(inp.id(), acc);
            }
        }
        if keep.contains(&node.id()) {
            check_finite(&g, node.op_name().unwrap_or("leaf"))?;
            kept.insert(node.id(), g);
        }
    }
    Ok(kept)
}

impl<T: Scalar> Tensor<T> {
    /// Reverse pass from a one-element loss. Gradients are added into the grad buffers of
    /// every reachable parameter leaf; repeated calls accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape().to_vec(),
            });
        }
        if !self.all_finite() {
            return Err(TensorError::NonFinite {
                context: "loss".into(),
            });
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let leaves: Vec<Tensor<T>> = topo_order(self).into_iter().filter(|t| t.is_leaf()).collect();
        let keep: HashSet<u64> = leaves.iter().map(|t| t.id()).collect();
        let seed = Tensor::constant(vec![T::one()], self.shape().to_vec());
        let grads = propagate(self, seed, false, &keep)?;
        for leaf in leaves {
            if let Some(g) = grads.get(&leaf.id()) {
                let mut slot = leaf.node.grad.borrow_mut();
                match slot.as_mut() {
                    Some(buf) => buf.iter_mut().zip(g.data()).for_each(|(a, &b)| *a += b),
                    None => *slot = Some(g.to_vec()),
                }
            }
        }
        Ok(())
    }
}

/// Gradients of a one-element `output` with respect to `inputs`, without touching any
/// grad buffer. With `create_graph` the returned tensors are themselves differentiable,
/// which is what gradient-norm penalties need.
pub fn grad<T: Scalar>(output: &Tensor<T>, inputs: &[&Tensor<T>], create_graph: bool) -> Result<Vec<Tensor<T>>> {
    if output.numel() != 1 {
        return Err(TensorError::NonScalarLoss {
            shape: output.shape().to_vec(),
        });
    }
    let keep: HashSet<u64> = inputs.iter().map(|t| t.id()).collect();
    let grads = if output.requires_grad() {
        let seed = Tensor::constant(vec![T::one()], output.shape().to_vec());
        propagate(output, seed, create_graph, &keep)?
    } else {
        HashMap::new()
    };
    inputs
        .iter()
        .map(|t| match grads.get(&t.id()) {
            Some(g) => Ok(g.clone()),
            None => Tensor::zeros(t.shape()),
        })
        .collect()
}
