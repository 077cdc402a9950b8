//! Random arbitration graphs and situations checked against a reference
//! selection. Shared by the property tests and the acceptance target.

use std::any::Any;
use std::cell::RefCell;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teleassist_core::arbitration::{ActivePath, ArbitrationGraph, Arbitrator, Behavior, GraphSnapshot, Node};

/// Tree shape. Every node has an id indexing `Situation::cost`; leaves
/// also index the flag vectors through `leaf`.
#[derive(Debug, Clone)]
enum Shape {
    Leaf {
        id: usize,
        leaf: usize,
    },
    Arb {
        id: usize,
        priority: bool,
        options: Vec<Shape>,
    },
}

impl Shape {
    fn id(&self) -> usize {
        match self {
            Shape::Leaf { id, .. } | Shape::Arb { id, .. } => *id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Situation {
    invocation: Vec<bool>,
    commitment: Vec<bool>,
    cost: Vec<f64>,
}

#[derive(Default)]
struct Probe {
    believes_active: Vec<bool>,
    commanded: usize,
    errors: Vec<String>,
}

struct Leaf {
    leaf: usize,
    name: String,
    probe: Rc<RefCell<Probe>>,
}

impl Behavior<Situation, usize> for Leaf {
    fn name(&self) -> &str {
        &self.name
    }
    fn invocation(&self, s: &Situation) -> bool {
        s.invocation[self.leaf]
    }
    fn commitment(&self, s: &Situation) -> bool {
        s.commitment[self.leaf]
    }
    fn command(&mut self, _: &Situation) -> usize {
        self.probe.borrow_mut().commanded += 1;
        self.leaf
    }
    fn gain_control(&mut self, _: &Situation) {
        let mut p = self.probe.borrow_mut();
        if p.believes_active.iter().any(|a| *a) {
            p.errors
                .push(format!("leaf{} gained control while another leaf held it", self.leaf));
        }
        p.believes_active[self.leaf] = true;
    }
    fn lose_control(&mut self, _: &Situation) {
        let mut p = self.probe.borrow_mut();
        if !p.believes_active[self.leaf] {
            p.errors.push(format!("leaf{} lost control it never gained", self.leaf));
        }
        p.believes_active[self.leaf] = false;
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

struct Gen {
    nodes: usize,
    leaves: usize,
}

impl Gen {
    fn shape(&mut self, rng: &mut ChaCha8Rng, depth: usize, root: bool) -> Shape {
        let id = self.nodes;
        self.nodes += 1;
        if !root && (depth == 0 || rng.random_bool(0.35)) {
            self.leaves += 1;
            return Shape::Leaf {
                id,
                leaf: self.leaves - 1,
            };
        }
        let n = rng.random_range(1..=4);
        let priority = rng.random_bool(0.5);
        let options = (0..n)
            .map(|_| self.shape(rng, depth.saturating_sub(1), false))
            .collect();
        Shape::Arb { id, priority, options }
    }
}

fn build(shape: &Shape, probe: &Rc<RefCell<Probe>>) -> Arbitrator<Situation, usize> {
    let Shape::Arb { id, priority, options } = shape else {
        unreachable!("root is an arbitrator")
    };
    let mut arb = if *priority {
        Arbitrator::priority(format!("arb{id}"))
    } else {
        Arbitrator::cost(format!("arb{id}"))
    };
    for opt in options {
        let node = match opt {
            Shape::Leaf { leaf, .. } => Node::Behavior(Box::new(Leaf {
                leaf: *leaf,
                name: format!("leaf{leaf}"),
                probe: probe.clone(),
            })),
            Shape::Arb { .. } => build(opt, probe).into_node(),
        };
        arb = if *priority {
            arb.option(node)
        } else {
            let cid = opt.id();
            arb.costed_option(node, move |s: &Situation| s.cost[cid])
        };
    }
    arb
}

fn valid_cost(c: f64) -> bool {
    c.is_finite() && c >= 0.0
}

/// Applicability written directly from the rules, independent of the
/// graph implementation.
fn applicable(shape: &Shape, s: &Situation, active: Option<usize>) -> bool {
    match shape {
        Shape::Leaf { leaf, .. } => s.invocation[*leaf] || (active == Some(*leaf) && s.commitment[*leaf]),
        Shape::Arb { priority, options, .. } => options.iter().any(|o| option_ok(o, *priority, s, active)),
    }
}

fn option_ok(o: &Shape, priority: bool, s: &Situation, active: Option<usize>) -> bool {
    applicable(o, s, active) && (priority || valid_cost(s.cost[o.id()]))
}

fn reference_select(shape: &Shape, s: &Situation, active: Option<usize>) -> Option<usize> {
    match shape {
        Shape::Leaf { leaf, .. } => Some(*leaf),
        Shape::Arb { priority, options, .. } => {
            let mut ok = options.iter().filter(|o| option_ok(o, *priority, s, active));
            let chosen = if *priority {
                ok.next()
            } else {
                ok.fold(None, |best: Option<&Shape>, o| match best {
                    Some(b) if s.cost[b.id()] <= s.cost[o.id()] => Some(b),
                    _ => Some(o),
                })
            };
            chosen.and_then(|o| reference_select(o, s, active))
        }
    }
}

/// Option indices from the root to `leaf`.
fn leaf_index(shape: &Shape, leaf: usize) -> Option<Vec<usize>> {
    match shape {
        Shape::Leaf { leaf: l, .. } => (*l == leaf).then(Vec::new),
        Shape::Arb { options, .. } => options.iter().enumerate().find_map(|(i, o)| {
            leaf_index(o, leaf).map(|mut p| {
                p.insert(0, i);
                p
            })
        }),
    }
}

/// Cost arbitrators on the way to `leaf` that reject their option on that
/// path, by depth.
fn vetoes(shape: &Shape, leaf: usize, s: &Situation) -> Vec<usize> {
    let idx = leaf_index(shape, leaf).unwrap();
    let mut node = shape;
    let mut out = Vec::new();
    for (depth, &i) in idx.iter().enumerate() {
        let Shape::Arb { priority, options, .. } = node else {
            unreachable!()
        };
        if !*priority && !valid_cost(s.cost[options[i].id()]) {
            out.push(depth);
        }
        node = &options[i];
    }
    out
}

fn snapshot_at<'a>(snap: &'a GraphSnapshot, idx: &[usize]) -> &'a GraphSnapshot {
    idx.iter().fold(snap, |n, i| &n.options[*i])
}

/// At the arbitrator where the paths to `winner` and `loser` split, the
/// winner's option is preferred by that arbitrator's policy.
fn preferred(shape: &Shape, winner: usize, loser: usize, s: &Situation) -> bool {
    let (pw, pl) = (leaf_index(shape, winner).unwrap(), leaf_index(shape, loser).unwrap());
    let mut node = shape;
    for (a, b) in pw.iter().zip(&pl) {
        let Shape::Arb { priority, options, .. } = node else {
            return false;
        };
        if a != b {
            if *priority {
                return a < b;
            }
            let (ca, cb) = (s.cost[options[*a].id()], s.cost[options[*b].id()]);
            return !valid_cost(cb) || ca < cb || (ca == cb && a < b);
        }
        node = &options[*a];
    }
    false
}

struct Run {
    paths: Vec<Option<ActivePath>>,
    snapshots: Vec<GraphSnapshot>,
    selected: Vec<Option<usize>>,
    errors: Vec<String>,
}

fn run(shape: &Shape, leaves: usize, situations: &[Situation]) -> Run {
    let probe = Rc::new(RefCell::new(Probe {
        believes_active: vec![false; leaves],
        ..Probe::default()
    }));
    let mut graph = ArbitrationGraph::new(build(shape, &probe));
    let mut out = Run {
        paths: Vec::new(),
        snapshots: Vec::new(),
        selected: Vec::new(),
        errors: Vec::new(),
    };
    if graph.snapshot().active || graph.snapshot().applicable {
        out.errors.push("snapshot before the first tick is not blank".into());
    }
    for (t, s) in situations.iter().enumerate() {
        probe.borrow_mut().commanded = 0;
        let result = graph.evaluate(s).ok();
        let p = probe.borrow();
        let believed: Vec<usize> = (0..leaves).filter(|l| p.believes_active[*l]).collect();
        let selected = result.as_ref().map(|r| r.0);
        if believed != selected.into_iter().collect::<Vec<_>>() {
            out.errors
                .push(format!("tick {t}: hooks say {believed:?}, selected {selected:?}"));
        }
        if p.commanded != usize::from(selected.is_some()) {
            out.errors.push(format!("tick {t}: {} leaves commanded", p.commanded));
        }
        if let Some((leaf, path)) = &result {
            if path.leaf() != Some(format!("leaf{leaf}").as_str()) {
                out.errors
                    .push(format!("tick {t}: path {:?} does not end at leaf{leaf}", path.nodes));
            }
            if graph.snapshot().active_leaf() != path.leaf() {
                out.errors.push(format!("tick {t}: snapshot disagrees with path"));
            }
        }
        out.errors.extend(p.errors.iter().map(|e| format!("tick {t}: {e}")));
        drop(p);
        probe.borrow_mut().errors.clear();
        out.selected.push(selected);
        out.paths.push(result.map(|r| r.1));
        out.snapshots.push(graph.snapshot());
    }
    out
}

pub struct CaseOutcome {
    pub single_leaf: Result<(), String>,
    pub priority: Result<(), String>,
    pub commitment: Result<(), String>,
    pub preemption: Result<(), String>,
    pub determinism: Result<(), String>,
}

impl CaseOutcome {
    pub fn all(&self) -> Result<(), String> {
        self.single_leaf.clone()?;
        self.priority.clone()?;
        self.commitment.clone()?;
        self.preemption.clone()?;
        self.determinism.clone()
    }
}

fn first_err(slot: &mut Result<(), String>, msg: impl FnOnce() -> String) {
    if slot.is_ok() {
        *slot = Err(msg());
    }
}

/// Builds a random graph from `seed`, drives it through `ticks` random
/// situations and checks every arbitration property.
pub fn run_case(seed: u64, ticks: usize) -> CaseOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = Gen { nodes: 0, leaves: 0 };
    let depth = rng.random_range(1..=3);
    let shape = gen.shape(&mut rng, depth, true);
    // sticky flags make commitment and preemption situations common
    let mut s = Situation {
        invocation: vec![false; gen.leaves],
        commitment: vec![true; gen.leaves],
        cost: vec![1.0; gen.nodes],
    };
    let mut situations = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        for v in &mut s.invocation {
            if rng.random_bool(0.3) {
                *v = rng.random_bool(0.4);
            }
        }
        for v in &mut s.commitment {
            if rng.random_bool(0.3) {
                *v = rng.random_bool(0.7);
            }
        }
        for c in &mut s.cost {
            if rng.random_bool(0.3) {
                *c = match rng.random_range(0..10) {
                    0 => f64::NAN,
                    1 => f64::INFINITY,
                    2 => -1.0,
                    _ => rng.random_range(0..4) as f64,
                };
            }
        }
        situations.push(s.clone());
    }

    let first = run(&shape, gen.leaves, &situations);
    let mut out = CaseOutcome {
        single_leaf: Ok(()),
        priority: Ok(()),
        commitment: Ok(()),
        preemption: Ok(()),
        determinism: Ok(()),
    };
    if let Some(e) = first.errors.first() {
        first_err(&mut out.single_leaf, || format!("seed {seed}: {e}"));
    }
    let mut prev: Option<usize> = None;
    for (t, s) in situations.iter().enumerate() {
        let got = first.selected[t];
        if applicable(&shape, s, prev) != got.is_some() {
            first_err(&mut out.single_leaf, || {
                format!("seed {seed} tick {t}: selection {got:?} vs applicability")
            });
        }
        let expected = reference_select(&shape, s, prev);
        if got != expected {
            first_err(&mut out.priority, || {
                format!("seed {seed} tick {t}: selected {got:?}, reference {expected:?}")
            });
        }
        if let Some(p) = prev {
            let idx = leaf_index(&shape, p).unwrap();
            let vetoed = vetoes(&shape, p, s);
            if s.commitment[p] && !vetoed.contains(&(idx.len() - 1)) {
                if !snapshot_at(&first.snapshots[t], &idx).applicable {
                    first_err(&mut out.commitment, || {
                        format!("seed {seed} tick {t}: committed leaf{p} inapplicable")
                    });
                }
            }
            if s.commitment[p] && vetoed.is_empty() {
                if let Some(g) = got {
                    if g != p && !preferred(&shape, g, p, s) {
                        first_err(&mut out.preemption, || {
                            format!("seed {seed} tick {t}: leaf{g} displaced committed leaf{p} without preference")
                        });
                    }
                }
            }
        }
        prev = got;
    }

    let second = run(&shape, gen.leaves, &situations);
    if second.paths != first.paths || second.snapshots != first.snapshots {
        out.determinism = Err(format!("seed {seed}: replay differs"));
    }
    out
}
