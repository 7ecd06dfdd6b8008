//! Minimal probabilistic-program representation: named random choices of
//! declared primitive types wired into a fixed dependency DAG, execution
//! traces over them, and the joint density of the tractable part.
//!
//! Models here have a fixed structure: the set of choices is the same in
//! every execution. Graphs are assembled by a declarative builder that
//! requires parents to be declared before their children, which rules out
//! cycles by construction; insertion order is therefore already a
//! topological order and is used as the deterministic tie-break everywhere.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::geom::Point;
use crate::planner::WaypointTrace;
use crate::rng::Stream;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("duplicate choice id `{0}`")]
    DuplicateChoice(String),
    #[error("choice `{child}` references unknown parent `{parent}` (parents must be declared first)")]
    UnknownParent { child: String, parent: String },
    #[error("unknown choice id `{0}`")]
    UnknownChoice(String),
    #[error("constrained choice `{0}` is neither density-evaluable nor trace-simulable")]
    UnconstrainableChoice(String),
    #[error("graph has no choices")]
    EmptyGraph,
}

/// A value produced by one random choice.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Point(Point),
    Series(Vec<Point>),
}

impl Value {
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            other => panic!("expected Bool value, got {other:?}"),
        }
    }

    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(i) => *i,
            other => panic!("expected Int value, got {other:?}"),
        }
    }

    pub fn as_real(&self) -> f64 {
        match self {
            Value::Real(r) => *r,
            other => panic!("expected Real value, got {other:?}"),
        }
    }

    pub fn as_point(&self) -> Point {
        match self {
            Value::Point(p) => *p,
            other => panic!("expected Point value, got {other:?}"),
        }
    }

    pub fn as_series(&self) -> &[Point] {
        match self {
            Value::Series(s) => s,
            other => panic!("expected Series value, got {other:?}"),
        }
    }
}

/// Record of the internal random choices made inside one execution of a
/// likelihood-free primitive, as far as downstream consumers need them.
#[derive(Debug, Clone, PartialEq)]
pub enum InternalTrace {
    /// Latent index of a discrete simulator (used by test models).
    Discrete(i64),
    /// Waypoint-planner internals.
    Waypoint(WaypointTrace),
}

impl InternalTrace {
    pub fn as_discrete(&self) -> i64 {
        match self {
            InternalTrace::Discrete(u) => *u,
            other => panic!("expected Discrete trace, got {other:?}"),
        }
    }

    pub fn as_waypoint(&self) -> &WaypointTrace {
        match self {
            InternalTrace::Waypoint(w) => w,
            other => panic!("expected Waypoint trace, got {other:?}"),
        }
    }
}

pub type SimulateFn = Box<dyn Fn(&[Value], &mut Stream) -> Value + Send + Sync>;
pub type LogDensityFn = Box<dyn Fn(&Value, &[Value]) -> f64 + Send + Sync>;
pub type TracedSimulateFn =
    Box<dyn Fn(&[Value], &mut Stream) -> (InternalTrace, Value) + Send + Sync>;

/// A kind of random choice: a simulator, an optional tractable output
/// density (absent means the choice is likelihood-free), and an optional
/// simulator that also records the internal trace.
pub struct Primitive {
    pub name: String,
    pub simulate: SimulateFn,
    pub log_density: Option<LogDensityFn>,
    pub traced_simulate: Option<TracedSimulateFn>,
}

impl Primitive {
    pub fn likelihood_free(name: impl Into<String>, simulate: SimulateFn) -> Self {
        Primitive {
            name: name.into(),
            simulate,
            log_density: None,
            traced_simulate: None,
        }
    }

    pub fn with_density(
        name: impl Into<String>,
        simulate: SimulateFn,
        log_density: LogDensityFn,
    ) -> Self {
        Primitive {
            name: name.into(),
            simulate,
            log_density: Some(log_density),
            traced_simulate: None,
        }
    }

    pub fn traced(mut self, traced_simulate: TracedSimulateFn) -> Self {
        self.traced_simulate = Some(traced_simulate);
        self
    }
}

impl std::fmt::Debug for Primitive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Primitive")
            .field("name", &self.name)
            .field("tractable", &self.log_density.is_some())
            .field("traced", &self.traced_simulate.is_some())
            .finish()
    }
}

/// Maps parent values (in declared parent order) to the argument list.
pub type ArgFn = Box<dyn Fn(&[Value]) -> Vec<Value> + Send + Sync>;

struct Node {
    id: String,
    primitive: Arc<Primitive>,
    parents: Vec<usize>,
    arg_fn: ArgFn,
}

/// Fixed DAG of named random choices.
pub struct ModelGraph {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    constraints: Vec<Option<Value>>,
}

pub struct ModelGraphBuilder {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    constraints: Vec<(String, Value)>,
    error: Option<TraceError>,
}

impl Default for ModelGraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelGraphBuilder {
    pub fn new() -> Self {
        ModelGraphBuilder {
            nodes: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
            error: None,
        }
    }

    /// Declare a choice. Parents must already be declared, which keeps the
    /// graph acyclic by construction.
    pub fn choice(
        mut self,
        id: impl Into<String>,
        primitive: Arc<Primitive>,
        parents: &[&str],
        arg_fn: ArgFn,
    ) -> Self {
        if self.error.is_some() {
            return self;
        }
        let id = id.into();
        if self.index.contains_key(&id) {
            self.error = Some(TraceError::DuplicateChoice(id));
            return self;
        }
        let mut parent_idx = Vec::with_capacity(parents.len());
        for p in parents {
            match self.index.get(*p) {
                Some(&i) => parent_idx.push(i),
                None => {
                    self.error = Some(TraceError::UnknownParent {
                        child: id,
                        parent: (*p).to_string(),
                    });
                    return self;
                }
            }
        }
        self.index.insert(id.clone(), self.nodes.len());
        self.nodes.push(Node {
            id,
            primitive,
            parents: parent_idx,
            arg_fn,
        });
        self
    }

    /// Declare a root choice with no parents and no arguments.
    pub fn root(self, id: impl Into<String>, primitive: Arc<Primitive>) -> Self {
        self.choice(id, primitive, &[], Box::new(|_| Vec::new()))
    }

    /// Fix a choice to an observed value.
    pub fn constrain(mut self, id: impl Into<String>, value: Value) -> Self {
        self.constraints.push((id.into(), value));
        self
    }

    pub fn build(self) -> Result<ModelGraph, TraceError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        if self.nodes.is_empty() {
            return Err(TraceError::EmptyGraph);
        }
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                children[p].push(i);
            }
        }
        let mut constraints = vec![None; self.nodes.len()];
        for (id, value) in self.constraints {
            let &i = self
                .index
                .get(&id)
                .ok_or_else(|| TraceError::UnknownChoice(id.clone()))?;
            let node = &self.nodes[i];
            if node.primitive.log_density.is_none() && node.primitive.traced_simulate.is_none() {
                return Err(TraceError::UnconstrainableChoice(id));
            }
            constraints[i] = Some(value);
        }
        Ok(ModelGraph {
            nodes: self.nodes,
            index: self.index,
            children,
            constraints,
        })
    }
}

impl ModelGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node_index(&self, id: &str) -> Result<usize, TraceError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| TraceError::UnknownChoice(id.to_string()))
    }

    pub fn id(&self, i: usize) -> &str {
        &self.nodes[i].id
    }

    pub fn primitive(&self, i: usize) -> &Primitive {
        &self.nodes[i].primitive
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.nodes[i].parents
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Members of F: choices whose output density cannot be evaluated.
    pub fn is_likelihood_free(&self, i: usize) -> bool {
        self.nodes[i].primitive.log_density.is_none()
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constraints[i].is_some()
    }

    pub fn constraint(&self, i: usize) -> Option<&Value> {
        self.constraints[i].as_ref()
    }

    /// Argument list of choice `i` given a full value assignment.
    pub fn args(&self, values: &[Value], i: usize) -> Vec<Value> {
        let node = &self.nodes[i];
        let parent_values: Vec<Value> =
            node.parents.iter().map(|&p| values[p].clone()).collect();
        (node.arg_fn)(&parent_values)
    }

    /// Log output density of choice `i`. Panics on likelihood-free choices;
    /// callers must branch on `is_likelihood_free` first.
    pub fn log_density_of(&self, i: usize, value: &Value, args: &[Value]) -> f64 {
        let d = self.nodes[i]
            .primitive
            .log_density
            .as_ref()
            .unwrap_or_else(|| panic!("choice `{}` is likelihood-free", self.nodes[i].id));
        d(value, args)
    }

    /// Every choice reachable from `frontier` (inclusive), in topological
    /// order. Deterministic: ties resolve by declaration order.
    pub fn topological_order(&self, frontier: &[usize]) -> Vec<usize> {
        let mut reachable = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = frontier.to_vec();
        while let Some(i) = stack.pop() {
            if reachable[i] {
                continue;
            }
            reachable[i] = true;
            stack.extend(self.children[i].iter().copied());
        }
        (0..self.nodes.len()).filter(|&i| reachable[i]).collect()
    }

    /// Forward-simulate every unconstrained choice in topological order;
    /// constrained choices take their observed values.
    pub fn simulate_trace(&self, rng: &mut Stream) -> TraceState {
        let mut values: Vec<Value> = Vec::with_capacity(self.nodes.len());
        for i in 0..self.nodes.len() {
            let value = match &self.constraints[i] {
                Some(v) => v.clone(),
                None => {
                    let args = self.args(&values, i);
                    (self.nodes[i].primitive.simulate)(&args, rng)
                }
            };
            values.push(value);
        }
        TraceState {
            values,
            log_estimates: vec![None; self.nodes.len()],
        }
    }

    /// Product of output densities over the tractable choices, in linear
    /// space.
    pub fn joint_density_tractable(&self, values: &[Value]) -> f64 {
        let mut product = 1.0;
        for i in 0..self.nodes.len() {
            if !self.is_likelihood_free(i) {
                let args = self.args(values, i);
                product *= self.log_density_of(i, &values[i], &args).exp();
            }
        }
        product
    }

    /// Sum of log output densities over the tractable choices.
    pub fn log_joint_tractable(&self, values: &[Value]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nodes.len() {
            if !self.is_likelihood_free(i) {
                let args = self.args(values, i);
                total += self.log_density_of(i, &values[i], &args);
            }
        }
        total
    }
}

impl std::fmt::Debug for ModelGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ids: Vec<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        f.debug_struct("ModelGraph").field("choices", &ids).finish()
    }
}

/// One chain's state: a value for every choice plus the per-choice database
/// of recycled log likelihood estimates used by nested inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub values: Vec<Value>,
    pub log_estimates: Vec<Option<f64>>,
}

impl TraceState {
    pub fn value<'a>(&'a self, graph: &ModelGraph, id: &str) -> &'a Value {
        &self.values[graph.node_index(id).expect("known choice id")]
    }
}
