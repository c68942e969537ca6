//! The three loss terms as tape-level scalar nodes.
//!
//! All three use mean (not sum) normalization so the weight scales stay
//! comparable across grid sizes. The data term fits only the infected
//! compartment: the experiments observe the infection curve alone.

use crate::error::{Error, Result};
use crate::net::{TapedNet, I_COMP};
use crate::seir::{residual_with_rates, CollocationGrid, Dataset, RateNodes};
use crate::tape::{NodeId, Tape};

/// The three loss roots built on one shared graph. The trainer builds the
/// losses on independent graphs instead (one backward pass each); this is
/// the compositional surface for callers that want all values at once.
#[derive(Clone, Copy, Debug)]
pub struct LossBundle {
    pub l_data: NodeId,
    pub l_ode: NodeId,
    pub l_logic: NodeId,
}

/// Builds all three losses as roots on the same tape.
pub fn bundle(
    net: &TapedNet,
    tape: &mut Tape,
    dataset: &Dataset,
    grid: &CollocationGrid,
    rates: &RateNodes,
) -> Result<LossBundle> {
    Ok(LossBundle {
        l_data: data_loss(net, tape, dataset)?,
        l_ode: ode_loss(net, tape, grid, rates),
        l_logic: logic_loss(net, tape, grid),
    })
}

/// Mean squared error of the predicted infected fraction on the observations.
pub fn data_loss(net: &TapedNet, tape: &mut Tape, dataset: &Dataset) -> Result<NodeId> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut acc: Option<NodeId> = None;
    for &(t, i_obs) in &dataset.observations {
        let u = net.forward(tape, t);
        let obs = tape.constant(i_obs);
        let diff = tape.sub(u[I_COMP], obs);
        let sq = tape.square(diff);
        acc = Some(match acc {
            Some(a) => tape.add(a, sq),
            None => sq,
        });
    }
    let sum = acc.expect("nonempty dataset");
    let inv_n = tape.constant(1.0 / dataset.len() as f64);
    Ok(tape.mul(sum, inv_n))
}

/// Mean squared residual norm over the collocation grid, using the exact
/// time-tangent of the network.
pub fn ode_loss(
    net: &TapedNet,
    tape: &mut Tape,
    grid: &CollocationGrid,
    rates: &RateNodes,
) -> NodeId {
    let mut acc: Option<NodeId> = None;
    for &t in &grid.points {
        let out = net.forward_with_tangent(tape, t);
        let f = residual_with_rates(tape, &out.u, &out.du_dt, rates);
        for comp in f {
            let sq = tape.square(comp);
            acc = Some(match acc {
                Some(a) => tape.add(a, sq),
                None => sq,
            });
        }
    }
    let sum = acc.expect("grid is never empty by construction");
    let inv_n = tape.constant(1.0 / grid.len() as f64);
    tape.mul(sum, inv_n)
}

/// Non-negativity penalty on every compartment plus a monotonicity penalty
/// on adjacent removed-compartment values; the last grid point contributes
/// only non-negativity terms.
pub fn logic_loss(net: &TapedNet, tape: &mut Tape, grid: &CollocationGrid) -> NodeId {
    let outputs: Vec<[NodeId; 4]> = grid.points.iter().map(|&t| net.forward(tape, t)).collect();
    logic_loss_from_outputs(tape, &outputs)
}

/// The penalty applied to externally supplied per-point outputs. Split out
/// so the formula can be checked against values copied from a trajectory.
pub fn logic_loss_from_outputs(tape: &mut Tape, outputs: &[[NodeId; 4]]) -> NodeId {
    assert!(outputs.len() >= 2, "logic loss needs at least 2 grid points");
    let mut acc: Option<NodeId> = None;
    let push = |tape: &mut Tape, acc: &mut Option<NodeId>, term: NodeId| {
        *acc = Some(match *acc {
            Some(a) => tape.add(a, term),
            None => term,
        });
    };
    for (j, u) in outputs.iter().enumerate() {
        for &comp in u {
            let neg = tape.neg(comp);
            let pen = tape.relu(neg);
            push(tape, &mut acc, pen);
        }
        if j + 1 < outputs.len() {
            let drop = tape.sub(u[3], outputs[j + 1][3]);
            let pen = tape.relu(drop);
            push(tape, &mut acc, pen);
        }
    }
    let sum = acc.expect("at least two points");
    let inv_n = tape.constant(1.0 / outputs.len() as f64);
    tape.mul(sum, inv_n)
}
