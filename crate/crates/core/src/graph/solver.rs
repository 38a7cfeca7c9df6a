//! Levenberg–Marquardt over the stacked residuals with a sparse Cholesky solve.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2, Vec2};
use crate::scalar::Real;
use crate::sparse::{minimum_degree_ordering, Cholesky, CscUpper, SymbolicCholesky};

use super::factors::{self, zero_block, Block, GlobalDirection};
use super::{Factor, FactorGraph, FactorKind, Information, NodeKey, SlotNode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings<T> {
    pub max_iters: usize,
    pub lambda_init: T,
    /// Relative cost decrease below which the solve stops.
    pub cost_tol: T,
    /// Largest update component below which the solve stops.
    pub step_tol: T,
}

impl<T: Real> Default for OptimizerSettings<T> {
    fn default() -> Self {
        Self {
            max_iters: 30,
            lambda_init: T::lit(1e-4),
            cost_tol: T::lit(1e-10),
            step_tol: T::lit(1e-10),
        }
    }
}

impl<T: Real> OptimizerSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.lambda_init > T::zero()
            && self.cost_tol >= T::zero()
            && self.step_tol >= T::zero()
            && self.lambda_init.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("optimizer settings must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KindStats<T> {
    pub count: usize,
    /// Weighted squared error of this kind.
    pub cost: T,
    /// Euclidean norm of the stacked unweighted residuals of this kind.
    pub residual_norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport<T> {
    pub iterations: usize,
    pub initial_cost: T,
    pub final_cost: T,
    pub converged: bool,
    pub per_kind: BTreeMap<FactorKind, KindStats<T>>,
}

const LAMBDA_MAX: f64 = 1e12;
const LAMBDA_MIN: f64 = 1e-12;
const DIAG_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Pose(usize),
    Slot(usize),
}

#[derive(Debug, Clone)]
enum Payload<T> {
    Unary(Pose2<T>),
    Relative(Pose2<T>),
    Registration(Vec2<T>),
    Adjacent,
    Vertical(GlobalDirection<T>),
}

#[derive(Debug, Clone)]
struct Resolved<T> {
    kind: FactorKind,
    vars: [Var; 2],
    arity: usize,
    payload: Payload<T>,
    info: Information<T>,
}

#[derive(Debug, Clone)]
struct Values<T> {
    poses: Vec<Pose2<T>>,
    slots: Vec<SlotNode<T>>,
}

struct Linearized<T> {
    e: [T; 3],
    j: [Block<T>; 2],
}

impl<T: Real> Resolved<T> {
    fn residual(&self, v: &Values<T>) -> [T; 3] {
        let mut out = [T::zero(); 3];
        match &self.payload {
            Payload::Unary(m) => out = factors::unary_residual(&self.pose(v, 0), m),
            Payload::Relative(z) => out = factors::relative_residual(&self.pose(v, 0), &self.pose(v, 1), z),
            Payload::Registration(obs) => {
                let r = factors::registration_residual(&self.pose(v, 0), self.slot(v, 1).position, *obs);
                out[..2].copy_from_slice(&r);
            }
            Payload::Adjacent => {
                let (sk, sp) = (self.slot(v, 0), self.slot(v, 1));
                let r = factors::adjacent_residual(sk.position, sk.entry, sp.position, sp.entry);
                out[..2].copy_from_slice(&r);
            }
            Payload::Vertical(d) => {
                out[0] = factors::vertical_residual(self.slot(v, 0).position, self.slot(v, 1).position, d);
            }
        }
        out
    }

    fn linearize(&self, v: &Values<T>) -> Linearized<T> {
        let mut e = [T::zero(); 3];
        let j = match &self.payload {
            Payload::Unary(m) => {
                let (r, j0) = factors::unary_jacobian(&self.pose(v, 0), m);
                e = r;
                [j0, zero_block()]
            }
            Payload::Relative(z) => {
                let (r, ji, jj) = factors::relative_jacobians(&self.pose(v, 0), &self.pose(v, 1), z);
                e = r;
                [ji, jj]
            }
            Payload::Registration(obs) => {
                let (r, jp, js) = factors::registration_jacobians(&self.pose(v, 0), self.slot(v, 1).position, *obs);
                e[..2].copy_from_slice(&r);
                [jp, js]
            }
            Payload::Adjacent => {
                let (sk, sp) = (self.slot(v, 0), self.slot(v, 1));
                let (r, jk, jp) = factors::adjacent_jacobians(sk.position, sk.entry, sp.position, sp.entry);
                e[..2].copy_from_slice(&r);
                [jk, jp]
            }
            Payload::Vertical(d) => {
                let (r, jk, jp) = factors::vertical_jacobians(self.slot(v, 0).position, self.slot(v, 1).position, d);
                e[0] = r;
                [jk, jp]
            }
        };
        Linearized { e, j }
    }

    fn pose(&self, v: &Values<T>, k: usize) -> Pose2<T> {
        match self.vars[k] {
            Var::Pose(i) => v.poses[i],
            Var::Slot(_) => unreachable!("factor variable kinds are fixed at resolution"),
        }
    }

    fn slot(&self, v: &Values<T>, k: usize) -> SlotNode<T> {
        match self.vars[k] {
            Var::Slot(i) => v.slots[i],
            Var::Pose(_) => unreachable!("factor variable kinds are fixed at resolution"),
        }
    }
}

/// One nonzero of the Hessian contributed by a factor: `H[pos] += (Jᵀ Ω J)[a r][b c]`.
#[derive(Debug, Clone, Copy)]
struct Scatter {
    pos: usize,
    a: u8,
    r: u8,
    b: u8,
    c: u8,
}

struct Problem<T> {
    pose_ids: Vec<u64>,
    slot_ids: Vec<u64>,
    factors: Vec<Resolved<T>>,
    /// Offset of each variable's first scalar, or `None` when fixed.
    pose_offset: Vec<Option<usize>>,
    slot_offset: Vec<Option<usize>>,
    n: usize,
    pattern: CscUpper<T>,
    symbolic: SymbolicCholesky,
    scatter: Vec<Vec<Scatter>>,
    diag_pos: Vec<usize>,
}

fn var_size(v: Var) -> usize {
    match v {
        Var::Pose(_) => 3,
        Var::Slot(_) => 2,
    }
}

impl<T: Real> Problem<T> {
    fn build(graph: &FactorGraph<T>) -> Result<(Self, Values<T>)> {
        let pose_ids: Vec<u64> = graph.poses.keys().copied().collect();
        let slot_ids: Vec<u64> = graph.slots.keys().copied().collect();
        let pose_index: BTreeMap<u64, usize> = pose_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let slot_index: BTreeMap<u64, usize> = slot_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let values = Values {
            poses: graph.poses.values().map(|e| e.value).collect(),
            slots: graph.slots.values().map(|e| e.value).collect(),
        };
        let pv = |id: u64| {
            pose_index
                .get(&id)
                .map(|&i| Var::Pose(i))
                .ok_or_else(|| Error::UnknownNode(NodeKey::Pose(id).to_string()))
        };
        let sv = |id: u64| {
            slot_index
                .get(&id)
                .map(|&i| Var::Slot(i))
                .ok_or_else(|| Error::UnknownNode(NodeKey::Slot(id).to_string()))
        };
        let mut resolved = Vec::with_capacity(graph.factors.len());
        for f in &graph.factors {
            let kind = f.kind();
            let info = *f.info();
            let (vars, arity, payload) = match f {
                Factor::Prior { pose, measured, .. } | Factor::IcpUnary { pose, measured, .. } => {
                    ([pv(*pose)?, Var::Pose(0)], 1, Payload::Unary(*measured))
                }
                Factor::Odometry { from, to, relative, .. } => ([pv(*from)?, pv(*to)?], 2, Payload::Relative(*relative)),
                Factor::Registration { pose, slot, obs, .. } => ([pv(*pose)?, sv(*slot)?], 2, Payload::Registration(*obs)),
                Factor::Adjacent { k, p, .. } => ([sv(*k)?, sv(*p)?], 2, Payload::Adjacent),
                Factor::GlobalVertical { k, p, dir, .. } => ([sv(*k)?, sv(*p)?], 2, Payload::Vertical(*dir)),
            };
            resolved.push(Resolved {
                kind,
                vars,
                arity,
                payload,
                info,
            });
        }

        // block-level ordering over free variables
        let mut block_of_pose = vec![None; pose_ids.len()];
        let mut block_of_slot = vec![None; slot_ids.len()];
        let mut blocks: Vec<Var> = Vec::new();
        for (i, e) in graph.poses.values().enumerate() {
            if !e.fixed {
                block_of_pose[i] = Some(blocks.len());
                blocks.push(Var::Pose(i));
            }
        }
        for (i, e) in graph.slots.values().enumerate() {
            if !e.fixed {
                block_of_slot[i] = Some(blocks.len());
                blocks.push(Var::Slot(i));
            }
        }
        let block_of = |v: Var| match v {
            Var::Pose(i) => block_of_pose[i],
            Var::Slot(i) => block_of_slot[i],
        };
        let mut adjacency = vec![Vec::new(); blocks.len()];
        for f in &resolved {
            if f.arity == 2 {
                if let (Some(a), Some(b)) = (block_of(f.vars[0]), block_of(f.vars[1])) {
                    if a != b {
                        adjacency[a].push(b);
                        adjacency[b].push(a);
                    }
                }
            }
        }
        let perm = minimum_degree_ordering(&adjacency);
        let mut pose_offset = vec![None; pose_ids.len()];
        let mut slot_offset = vec![None; slot_ids.len()];
        let mut n = 0;
        for &b in &perm {
            match blocks[b] {
                Var::Pose(i) => pose_offset[i] = Some(n),
                Var::Slot(i) => slot_offset[i] = Some(n),
            }
            n += var_size(blocks[b]);
        }
        let offset = |v: Var| match v {
            Var::Pose(i) => pose_offset[i],
            Var::Slot(i) => slot_offset[i],
        };

        // scalar pattern, upper triangle stored by column
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            cols[i].push(i);
        }
        for f in &resolved {
            for a in 0..f.arity {
                for b in 0..f.arity {
                    let (Some(oa), Some(ob)) = (offset(f.vars[a]), offset(f.vars[b])) else {
                        continue;
                    };
                    for r in 0..var_size(f.vars[a]) {
                        for c in 0..var_size(f.vars[b]) {
                            let (i, j) = (oa + r, ob + c);
                            if i <= j {
                                cols[j].push(i);
                            }
                        }
                    }
                }
            }
        }
        let mut colptr = vec![0usize; n + 1];
        let mut rowidx = Vec::new();
        for (j, col) in cols.iter_mut().enumerate() {
            col.sort_unstable();
            col.dedup();
            rowidx.extend_from_slice(col);
            colptr[j + 1] = rowidx.len();
        }
        let pattern = CscUpper::with_pattern(n, colptr, rowidx);
        let symbolic = SymbolicCholesky::analyze(&pattern);
        let diag_pos = (0..n).map(|i| pattern.position(i, i).expect("diagonal present")).collect();
        let mut scatter = Vec::with_capacity(resolved.len());
        for f in &resolved {
            let mut s = Vec::new();
            for a in 0..f.arity {
                for b in 0..f.arity {
                    let (Some(oa), Some(ob)) = (offset(f.vars[a]), offset(f.vars[b])) else {
                        continue;
                    };
                    for r in 0..var_size(f.vars[a]) {
                        for c in 0..var_size(f.vars[b]) {
                            let (i, j) = (oa + r, ob + c);
                            if i <= j {
                                let pos = pattern.position(i, j).expect("pattern entry");
                                s.push(Scatter {
                                    pos,
                                    a: a as u8,
                                    r: r as u8,
                                    b: b as u8,
                                    c: c as u8,
                                });
                            }
                        }
                    }
                }
            }
            scatter.push(s);
        }
        Ok((
            Self {
                pose_ids,
                slot_ids,
                factors: resolved,
                pose_offset,
                slot_offset,
                n,
                pattern,
                symbolic,
                scatter,
                diag_pos,
            },
            values,
        ))
    }

    fn offset(&self, v: Var) -> Option<usize> {
        match v {
            Var::Pose(i) => self.pose_offset[i],
            Var::Slot(i) => self.slot_offset[i],
        }
    }

    fn cost(&self, v: &Values<T>) -> T {
        self.factors.iter().map(|f| f.info.quadratic(&f.residual(v))).fold(T::zero(), |a, b| a + b)
    }

    /// Fills the Hessian values and returns the gradient `Jᵀ Ω e`.
    fn assemble(&self, v: &Values<T>, h: &mut CscUpper<T>) -> Vec<T> {
        h.values_mut().iter_mut().for_each(|x| *x = T::zero());
        let mut g = vec![T::zero(); self.n];
        for (f, scatter) in self.factors.iter().zip(&self.scatter) {
            if scatter.is_empty() {
                continue;
            }
            let lin = f.linearize(v);
            let d = f.info.dim();
            // W = Ω J for each variable
            let mut w = [[[T::zero(); 3]; 3]; 2];
            for k in 0..f.arity {
                for r in 0..d {
                    for c in 0..3 {
                        let mut s = T::zero();
                        for m in 0..d {
                            s += f.info.get(r, m) * lin.j[k][m][c];
                        }
                        w[k][r][c] = s;
                    }
                }
            }
            let values = h.values_mut();
            for s in scatter {
                let (a, b) = (s.a as usize, s.b as usize);
                let (r, c) = (s.r as usize, s.c as usize);
                let mut acc = T::zero();
                for m in 0..d {
                    acc += lin.j[a][m][r] * w[b][m][c];
                }
                values[s.pos] += acc;
            }
            // gradient: Jᵀ Ω e
            for k in 0..f.arity {
                let Some(o) = self.offset(f.vars[k]) else { continue };
                for r in 0..var_size(f.vars[k]) {
                    let mut acc = T::zero();
                    for m in 0..d {
                        acc += w[k][m][r] * lin.e[m];
                    }
                    g[o + r] += acc;
                }
            }
        }
        g
    }

    fn apply(&self, v: &Values<T>, dx: &[T]) -> Values<T> {
        let mut out = v.clone();
        for (i, p) in out.poses.iter_mut().enumerate() {
            if let Some(o) = self.pose_offset[i] {
                *p = Pose2::new(p.x + dx[o], p.y + dx[o + 1], wrap_angle(p.theta + dx[o + 2]));
            }
        }
        for (i, s) in out.slots.iter_mut().enumerate() {
            if let Some(o) = self.slot_offset[i] {
                s.position = Vec2::new(s.position.x + dx[o], s.position.y + dx[o + 1]);
            }
        }
        out
    }

    fn kind_stats(&self, v: &Values<T>) -> BTreeMap<FactorKind, KindStats<T>> {
        let mut out: BTreeMap<FactorKind, KindStats<T>> = BTreeMap::new();
        for f in &self.factors {
            let e = f.residual(v);
            let st = out.entry(f.kind).or_default();
            st.count += 1;
            st.cost += f.info.quadratic(&e);
            st.residual_norm += e.iter().take(f.info.dim()).map(|x| *x * *x).fold(T::zero(), |a, b| a + b);
        }
        for st in out.values_mut() {
            st.residual_norm = st.residual_norm.sqrt();
        }
        out
    }
}

pub(super) fn optimize<T: Real>(graph: &mut FactorGraph<T>, settings: &OptimizerSettings<T>) -> Result<OptimizationReport<T>> {
    settings.validate()?;
    if !graph.gauge_anchored() {
        return Err(Error::GaugeDeficient);
    }
    let (problem, mut values) = Problem::build(graph)?;
    let initial_cost = problem.cost(&values);
    if !initial_cost.is_finite() {
        return Err(Error::NonFinite("initial cost"));
    }
    let mut cost = initial_cost;
    let mut lambda = settings.lambda_init;
    let mut h = problem.pattern.clone();
    let mut iterations = 0;
    let mut converged = problem.n == 0 || cost <= T::lit(1e-30);
    let (lmax, lmin, floor) = (T::lit(LAMBDA_MAX), T::lit(LAMBDA_MIN), T::lit(DIAG_FLOOR));

    while !converged && iterations < settings.max_iters {
        iterations += 1;
        let g = problem.assemble(&values, &mut h);
        let diag: Vec<T> = problem.diag_pos.iter().map(|&p| h.values()[p]).collect();
        let mut accepted = false;
        loop {
            let mut damped = h.clone();
            {
                let vals = damped.values_mut();
                for (k, &p) in problem.diag_pos.iter().enumerate() {
                    vals[p] += lambda * diag[k].max(floor);
                }
            }
            let chol = match Cholesky::factor_with(&problem.symbolic, &damped) {
                Ok(c) => c,
                Err(_) => {
                    lambda *= T::lit(10.0);
                    if lambda > lmax {
                        return Err(Error::NotPositiveDefinite {
                            lambda: lambda.to_f64_lossy(),
                        });
                    }
                    continue;
                }
            };
            let mut dx: Vec<T> = g.iter().map(|&x| -x).collect();
            chol.solve_in_place(&mut dx);
            let step = dx.iter().fold(T::zero(), |m, x| m.max(x.abs()));
            if !step.is_finite() {
                return Err(Error::NonFinite("solver step"));
            }
            let trial = problem.apply(&values, &dx);
            let trial_cost = problem.cost(&trial);
            if trial_cost <= cost {
                let decrease = cost - trial_cost;
                values = trial;
                let prev = cost;
                cost = trial_cost;
                lambda = (lambda / T::lit(10.0)).max(lmin);
                accepted = true;
                if step <= settings.step_tol || decrease <= settings.cost_tol * prev || cost <= T::lit(1e-30) {
                    converged = true;
                }
                break;
            }
            lambda *= T::lit(10.0);
            if lambda > lmax || step <= settings.step_tol {
                // no descent available at any damping: a local minimum
                converged = true;
                break;
            }
        }
        if !accepted && converged {
            break;
        }
    }

    let per_kind = problem.kind_stats(&values);
    for (i, &id) in problem.pose_ids.iter().enumerate() {
        graph.poses.get_mut(&id).expect("pose exists").value = values.poses[i];
    }
    for (i, &id) in problem.slot_ids.iter().enumerate() {
        graph.slots.get_mut(&id).expect("slot exists").value.position = values.slots[i].position;
    }
    Ok(OptimizationReport {
        iterations,
        initial_cost,
        final_cost: cost,
        converged,
        per_kind,
    })
}
