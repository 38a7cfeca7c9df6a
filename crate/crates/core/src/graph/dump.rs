use serde_json::{json, Value};

use crate::error::Result;
use crate::scalar::Real;

use super::{Factor, FactorGraph, NodeKey};

fn f<T: Real>(v: T) -> f64 {
    v.to_f64_lossy()
}

pub(super) fn dump<T: Real>(graph: &FactorGraph<T>) -> Result<Value> {
    let poses: Vec<Value> = graph
        .poses()
        .map(|(id, p)| {
            json!({
                "id": id,
                "x": f(p.x), "y": f(p.y), "theta": f(p.theta),
                "fixed": graph.is_fixed(NodeKey::Pose(id)),
            })
        })
        .collect();
    let slots: Vec<Value> = graph
        .slots()
        .map(|(id, s)| {
            json!({
                "id": id,
                "x": f(s.position.x), "y": f(s.position.y),
                "entry": [f(s.entry.x), f(s.entry.y)],
                "fixed": graph.is_fixed(NodeKey::Slot(id)),
            })
        })
        .collect();
    let mut factors = Vec::with_capacity(graph.factors().len());
    for factor in graph.factors() {
        let nodes: Vec<String> = factor.keys().iter().map(|k| k.to_string()).collect();
        let residual: Vec<f64> = graph.residual(factor)?.into_iter().map(f).collect();
        let measurement = match factor {
            Factor::Prior { measured, .. } | Factor::IcpUnary { measured, .. } => {
                json!([f(measured.x), f(measured.y), f(measured.theta)])
            }
            Factor::Odometry { relative, .. } => json!([f(relative.x), f(relative.y), f(relative.theta)]),
            Factor::Registration { obs, .. } => json!([f(obs.x), f(obs.y)]),
            Factor::Adjacent { .. } => Value::Null,
            Factor::GlobalVertical { dir, .. } => json!([f(dir.dir().x), f(dir.dir().y)]),
        };
        factors.push(json!({
            "kind": factor.kind().name(),
            "nodes": nodes,
            "measurement": measurement,
            "residual": residual,
        }));
    }
    Ok(json!({
        "poses": poses,
        "slots": slots,
        "factors": factors,
        "cost": f(graph.total_cost()?),
    }))
}
