//! Hierarchical behavior arbitration.
//!
//! A graph is a tree whose leaves are behavior components and whose inner
//! nodes are arbitrators. Every tick the graph is evaluated against a
//! situation and exactly one leaf (or none) is selected to produce the
//! command.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::any::Any;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A leaf of the arbitration graph.
pub trait Behavior<S, C> {
    fn name(&self) -> &str;
    fn invocation(&self, situation: &S) -> bool;
    fn commitment(&self, situation: &S) -> bool;
    /// Only called while this behavior is the selected leaf.
    fn command(&mut self, situation: &S) -> C;
    fn gain_control(&mut self, _situation: &S) {}
    fn lose_control(&mut self, _situation: &S) {}
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

pub type CostFn<S> = Box<dyn Fn(&S) -> f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Priority,
    Cost,
    /// Marks leaves in snapshots.
    Behavior,
}

pub enum Node<S, C> {
    Behavior(Box<dyn Behavior<S, C>>),
    Arbitrator(Arbitrator<S, C>),
}

impl<S, C> Node<S, C> {
    pub fn name(&self) -> &str {
        match self {
            Node::Behavior(b) => b.name(),
            Node::Arbitrator(a) => &a.name,
        }
    }
}

pub struct Arbitrator<S, C> {
    name: String,
    policy: Policy,
    options: Vec<(Node<S, C>, Option<CostFn<S>>)>,
}

impl<S, C> Arbitrator<S, C> {
    pub fn priority(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            policy: Policy::Priority,
            options: Vec::new(),
        }
    }

    pub fn cost(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            policy: Policy::Cost,
            options: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    /// Appends an option of a priority arbitrator.
    pub fn option(mut self, node: Node<S, C>) -> Self {
        assert_eq!(
            self.policy,
            Policy::Priority,
            "cost arbitrator options need a cost function"
        );
        self.options.push((node, None));
        self
    }

    /// Appends an option of a cost arbitrator.
    pub fn costed_option(mut self, node: Node<S, C>, cost: impl Fn(&S) -> f64 + 'static) -> Self {
        assert_eq!(self.policy, Policy::Cost, "priority arbitrator options take no cost");
        self.options.push((node, Some(Box::new(cost))));
        self
    }

    pub fn behavior(self, b: impl Behavior<S, C> + 'static) -> Self {
        self.option(Node::Behavior(Box::new(b)))
    }

    pub fn costed_behavior(self, b: impl Behavior<S, C> + 'static, cost: impl Fn(&S) -> f64 + 'static) -> Self {
        self.costed_option(Node::Behavior(Box::new(b)), cost)
    }

    pub fn into_node(self) -> Node<S, C> {
        Node::Arbitrator(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no applicable option in the arbitration graph")]
pub struct NoApplicableOption;

/// Names from the root to the selected leaf, plus the applicability of
/// every option of each arbitrator along the way.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActivePath {
    pub nodes: Vec<String>,
    pub applicable: Vec<Vec<bool>>,
}

impl ActivePath {
    pub fn leaf(&self) -> Option<&str> {
        self.nodes.last().map(String::as_str)
    }
}

/// Serializable view of the graph after the last evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub name: String,
    pub policy: Policy,
    pub applicable: bool,
    pub active: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<GraphSnapshot>,
}

impl GraphSnapshot {
    /// Name of the active leaf, if any.
    pub fn active_leaf(&self) -> Option<&str> {
        if !self.active {
            return None;
        }
        self.options
            .iter()
            .find_map(|o| o.active_leaf())
            .or(if self.options.is_empty() {
                Some(&self.name)
            } else {
                None
            })
    }
}

/// Applicability of every node, mirroring the tree shape.
struct Applicability {
    applicable: bool,
    options: Vec<Applicability>,
}

pub struct ArbitrationGraph<S, C> {
    root: Arbitrator<S, C>,
    /// Option indices from the root to the active leaf.
    active: Option<Vec<usize>>,
    last: Option<Applicability>,
}

impl<S, C> ArbitrationGraph<S, C> {
    pub fn new(root: Arbitrator<S, C>) -> Self {
        Self {
            root,
            active: None,
            last: None,
        }
    }

    pub fn root(&self) -> &Arbitrator<S, C> {
        &self.root
    }

    pub fn active_leaf(&self) -> Option<&str> {
        let idx = self.active.as_ref()?;
        let mut arb = &self.root;
        for (depth, &i) in idx.iter().enumerate() {
            match &arb.options[i].0 {
                Node::Behavior(b) => {
                    debug_assert_eq!(depth + 1, idx.len());
                    return Some(b.name());
                }
                Node::Arbitrator(a) => arb = a,
            }
        }
        None
    }

    /// Mutable access to a behavior by name, for wiring outside the graph.
    pub fn behavior_mut(&mut self, name: &str) -> Option<&mut dyn Behavior<S, C>> {
        fn find<'a, S, C>(arb: &'a mut Arbitrator<S, C>, name: &str) -> Option<&'a mut dyn Behavior<S, C>> {
            for (node, _) in arb.options.iter_mut() {
                match node {
                    Node::Behavior(b) => {
                        if b.name() == name {
                            return Some(b.as_mut());
                        }
                    }
                    Node::Arbitrator(a) => {
                        if let Some(b) = find(a, name) {
                            return Some(b);
                        }
                    }
                }
            }
            None
        }
        find(&mut self.root, name)
    }

    /// Downcasting form of [`behavior_mut`](Self::behavior_mut).
    pub fn behavior_as<T: 'static>(&mut self, name: &str) -> Option<&mut T> {
        self.behavior_mut(name)?.as_any_mut().downcast_mut::<T>()
    }

    /// Selects the active leaf for this situation and returns its command.
    pub fn evaluate(&mut self, situation: &S) -> Result<(C, ActivePath), NoApplicableOption> {
        let active = self.active.clone();
        let app = applicability(&self.root, situation, active.as_deref());
        let selected = if app.applicable {
            Some(select(&self.root, &app, situation))
        } else {
            None
        };

        if selected != self.active {
            if let Some(old) = &self.active {
                leaf_mut(&mut self.root, old).lose_control(situation);
            }
            if let Some(new) = &selected {
                leaf_mut(&mut self.root, new).gain_control(situation);
            }
        }
        self.active = selected.clone();

        let out = selected.map(|idx| {
            let path = active_path(&self.root, &app, &idx);
            let command = leaf_mut(&mut self.root, &idx).command(situation);
            (command, path)
        });
        self.last = Some(app);
        out.ok_or(NoApplicableOption)
    }

    /// Snapshot of the last evaluation; all flags false before the first.
    pub fn snapshot(&self) -> GraphSnapshot {
        fn node_snap<S, C>(node: &Node<S, C>, app: Option<&Applicability>, active: Option<&[usize]>) -> GraphSnapshot {
            match node {
                Node::Behavior(b) => GraphSnapshot {
                    name: b.name().into(),
                    policy: Policy::Behavior,
                    applicable: app.is_some_and(|a| a.applicable),
                    active: active.is_some(),
                    options: Vec::new(),
                },
                Node::Arbitrator(a) => arb_snap(a, app, active),
            }
        }
        fn arb_snap<S, C>(
            arb: &Arbitrator<S, C>,
            app: Option<&Applicability>,
            active: Option<&[usize]>,
        ) -> GraphSnapshot {
            let options = arb
                .options
                .iter()
                .enumerate()
                .map(|(i, (node, _))| {
                    let child_active = active.and_then(|a| if a.first() == Some(&i) { Some(&a[1..]) } else { None });
                    node_snap(node, app.map(|a| &a.options[i]), child_active)
                })
                .collect();
            GraphSnapshot {
                name: arb.name.clone(),
                policy: arb.policy,
                applicable: app.is_some_and(|a| a.applicable),
                active: active.is_some(),
                options,
            }
        }
        arb_snap(&self.root, self.last.as_ref(), self.active.as_deref())
    }
}

fn option_cost<S>(cost: &Option<CostFn<S>>, situation: &S) -> Option<f64> {
    let c = cost.as_ref().map_or(0.0, |f| f(situation));
    (c.is_finite() && c >= 0.0).then_some(c)
}

fn applicability<S, C>(arb: &Arbitrator<S, C>, situation: &S, active: Option<&[usize]>) -> Applicability {
    let options: Vec<Applicability> = arb
        .options
        .iter()
        .enumerate()
        .map(|(i, (node, cost))| {
            let child_active = active.and_then(|a| if a.first() == Some(&i) { Some(&a[1..]) } else { None });
            let mut app = match node {
                Node::Behavior(b) => Applicability {
                    applicable: b.invocation(situation) || (child_active.is_some() && b.commitment(situation)),
                    options: Vec::new(),
                },
                Node::Arbitrator(a) => applicability(a, situation, child_active),
            };
            if app.applicable && arb.policy == Policy::Cost && option_cost(cost, situation).is_none() {
                app.applicable = false;
            }
            app
        })
        .collect();
    Applicability {
        applicable: options.iter().any(|o| o.applicable),
        options,
    }
}

fn select<S, C>(arb: &Arbitrator<S, C>, app: &Applicability, situation: &S) -> Vec<usize> {
    let choice = match arb.policy {
        Policy::Cost => {
            let mut best: Option<(usize, f64)> = None;
            for (i, (_, cost)) in arb.options.iter().enumerate() {
                if !app.options[i].applicable {
                    continue;
                }
                if let Some(c) = option_cost(cost, situation) {
                    if best.map_or(true, |(_, b)| c < b) {
                        best = Some((i, c));
                    }
                }
            }
            best.map(|b| b.0)
        }
        _ => app.options.iter().position(|o| o.applicable),
    }
    .expect("select called on an inapplicable arbitrator");
    let mut path = alloc::vec![choice];
    if let Node::Arbitrator(child) = &arb.options[choice].0 {
        path.extend(select(child, &app.options[choice], situation));
    }
    path
}

fn active_path<S, C>(root: &Arbitrator<S, C>, app: &Applicability, idx: &[usize]) -> ActivePath {
    let mut out = ActivePath::default();
    let mut arb = root;
    let mut app = app;
    out.nodes.push(arb.name.clone());
    for &i in idx {
        out.applicable.push(app.options.iter().map(|o| o.applicable).collect());
        match &arb.options[i].0 {
            Node::Behavior(b) => out.nodes.push(b.name().into()),
            Node::Arbitrator(a) => {
                out.nodes.push(a.name.clone());
                arb = a;
                app = &app.options[i];
            }
        }
    }
    out
}

fn leaf_mut<'a, S, C>(root: &'a mut Arbitrator<S, C>, idx: &[usize]) -> &'a mut dyn Behavior<S, C> {
    let (first, rest) = idx.split_first().expect("empty leaf path");
    match &mut root.options[*first].0 {
        Node::Behavior(b) => {
            debug_assert!(rest.is_empty());
            b.as_mut()
        }
        Node::Arbitrator(a) => leaf_mut(a, rest),
    }
}

/// Applicability rule for a behavior component.
pub fn is_applicable(invocation: bool, currently_active: bool, commitment: bool) -> bool {
    invocation || (currently_active && commitment)
}
