//! Built-in property suites run by `kagnet selfcheck`: gradient check,
//! path-enumeration oracle, attention degeneracy and normalization,
//! permutation invariance and pruning semantics.
//!
//! Output contains no timings, so reports are byte-for-byte reproducible.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kg::{ConceptId, Direction, KnowledgeGraph};
use crate::kge::{prune, EmbeddingTable, Norm, MIN_PATHS_TO_PRUNE};
use crate::net::{relation_mean, KagNet, ModelShape, NetConfig, Parameters};
use crate::paths::{build_schema_graph_from, find_paths, Path, PathStep};
use crate::synthetic::{random_graph, random_instance, RandomInstance};
use crate::util::{bce_with_logit, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckReport {
    pub suites: Vec<SuiteResult>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{} {:<24} {}",
                if s.passed { "PASS" } else { "FAIL" },
                s.name,
                s.detail
            );
        }
        let _ = writeln!(
            out,
            "{}",
            if self.passed() { "all suites passed" } else { "some suites FAILED" }
        );
        out
    }
}

/// Dimensions small enough for exhaustive finite differences.
pub fn tiny_net_config() -> NetConfig {
    NetConfig {
        gcn_dims: vec![4, 3],
        lstm_hidden: 3,
        t_hidden: 4,
        t_dim: 4,
        score_hidden: 4,
        train_concepts: true,
        ..NetConfig::default()
    }
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst: String,
    pub checked: usize,
}

/// Compares analytic gradients of `bce(logit, label)` with central
/// differences for every parameter entry and the statement vector.
pub fn gradient_check(net: &KagNet, inst: &RandomInstance, label: f64, step: f64, floor: f64) -> Result<GradCheck> {
    let loss = |n: &KagNet, s: &ndarray::Array1<f64>| -> Result<f64> {
        let tr = n.forward(&inst.input, s, &inst.emb, false)?;
        Ok(bce_with_logit(tr.logit, label))
    };
    let tr = net.forward(&inst.input, &inst.statement, &inst.emb, true)?;
    let grads = net.backward(&inst.input, &inst.statement, &tr, sigmoid(tr.logit) - label)?;
    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst: String::new(),
        checked: 0,
    };
    let mut record = |name: String, a: f64, n: f64| {
        let e = relative_error(a, n, floor);
        out.checked += 1;
        if out.worst.is_empty() || e > out.max_rel_err {
            out.max_rel_err = e;
            out.worst = format!("{name}: analytic {a:.3e}, numeric {n:.3e}");
        }
    };
    let analytic: Vec<(String, Vec<f64>)> = grads
        .params
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.data.to_vec()))
        .collect();
    for (k, (name, g)) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let mut plus = net.clone();
            plus.params.tensors_mut()[k].1[i] += step;
            let mut minus = net.clone();
            minus.params.tensors_mut()[k].1[i] -= step;
            let n = (loss(&plus, &inst.statement)? - loss(&minus, &inst.statement)?) / (2.0 * step);
            record(format!("{name}[{i}]"), a, n);
        }
    }
    for i in 0..inst.statement.len() {
        let mut sp = inst.statement.clone();
        sp[i] += step;
        let mut sm = inst.statement.clone();
        sm[i] -= step;
        let n = (loss(net, &sp)? - loss(net, &sm)?) / (2.0 * step);
        record(format!("statement[{i}]"), grads.statement[i], n);
    }
    Ok(out)
}

fn instance_net(seed: u64, inst: &RandomInstance, cfg: NetConfig) -> Result<KagNet> {
    let shape = ModelShape::from_embeddings(&inst.emb, inst.statement.len());
    KagNet::new(cfg, shape, &inst.emb, seed)
}

fn gradient_suite(seed: u64, instances: usize) -> Result<SuiteResult> {
    let cfg = tiny_net_config();
    let mut worst = 0.0f64;
    let mut worst_desc = String::new();
    let mut checked = 0;
    for k in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(k), 3, 3, cfg.path_dim());
        let net = instance_net(seed ^ k, &inst, cfg.clone())?;
        let label = if k % 2 == 0 { 1.0 } else { 0.0 };
        let r = gradient_check(&net, &inst, label, 1e-5, 1e-6)?;
        checked += r.checked;
        if r.max_rel_err >= worst {
            worst = r.max_rel_err;
            worst_desc = r.worst;
        }
    }
    Ok(SuiteResult {
        name: "gradient-check",
        passed: worst < 1e-4,
        detail: format!("{instances} instances, {checked} entries, max rel err {worst:.2e} ({worst_desc})"),
    })
}

/// Every simple path of at most `max_edges` edges, found by extending
/// partial paths with every triple of the graph in both orientations.
pub fn brute_force_paths(kg: &KnowledgeGraph, src: ConceptId, dst: ConceptId, max_edges: usize) -> Vec<Path> {
    let mut found = Vec::new();
    let mut frontier = vec![Path {
        start: src,
        steps: Vec::new(),
    }];
    for _ in 0..max_edges {
        let mut next = Vec::new();
        for p in &frontier {
            let at = p.end();
            for t in kg.triples() {
                for (from, to, reversed) in [(t.head, t.tail, false), (t.tail, t.head, true)] {
                    if from != at {
                        continue;
                    }
                    let mut q = p.clone();
                    q.steps.push(PathStep {
                        rel: t.rel,
                        reversed,
                        next: to,
                    });
                    if !q.is_simple() {
                        continue;
                    }
                    if to == dst {
                        found.push(q);
                    } else {
                        next.push(q);
                    }
                }
            }
        }
        frontier = next;
    }
    found.sort_by_key(|p| p.order_key());
    found.dedup();
    found
}

fn path_suite(seed: u64, graphs: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    let mut paths = 0;
    for g in 0..graphs {
        let n = rng.gen_range(2..=12);
        let kg = random_graph(&mut rng, n, 0.3, 3);
        let src = ConceptId(rng.gen_range(0..n as u32));
        let mut dst = ConceptId(rng.gen_range(0..n as u32));
        if dst == src {
            dst = ConceptId((src.0 + 1) % n as u32);
        }
        let fast = find_paths(&kg, src, dst, 3, usize::MAX)?.paths;
        let slow = brute_force_paths(&kg, src, dst, 3);
        if fast != slow {
            return Ok(SuiteResult {
                name: "path-oracle",
                passed: false,
                detail: format!("graph #{g}: {} paths vs {} from brute force", fast.len(), slow.len()),
            });
        }
        compared += 1;
        paths += slow.len();
    }
    Ok(SuiteResult {
        name: "path-oracle",
        passed: true,
        detail: format!("{compared} graphs, {paths} paths identical"),
    })
}

fn degeneracy_suite(seed: u64, instances: usize) -> Result<SuiteResult> {
    let cfg = tiny_net_config();
    let mut worst = 0.0f64;
    for k in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(1000 + k), 3, 3, cfg.path_dim());
        let mut net = instance_net(k, &inst, cfg.clone())?;
        net.params.w1.fill(0.0);
        net.params.w2.fill(0.0);
        let tr = net.forward(&inst.input, &inst.statement, &inst.emb, false)?;
        let n_pairs = tr.t.len();
        let mut g = ndarray::Array1::zeros(tr.g_hat().len());
        for (p, pair) in inst.input.pairs.iter().enumerate() {
            let r = relation_mean(&tr.path_vectors[p])
                .or_else(|| pair.fallback.clone())
                .expect("pair has paths or a fallback");
            let joined = ndarray::concatenate(ndarray::Axis(0), &[r.view(), tr.t[p].view()])
                .expect("1-d vectors");
            g += &joined;
        }
        g /= n_pairs as f64;
        let diff = (&g - tr.g_hat()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(diff);
    }
    Ok(SuiteResult {
        name: "attention-degeneracy",
        passed: worst <= 1e-9,
        detail: format!("{instances} instances, max |g_hat - mean pool| {worst:.2e}"),
    })
}

fn normalization_suite(seed: u64, instances: usize) -> Result<SuiteResult> {
    let cfg = tiny_net_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut finite = true;
    for k in 0..instances as u64 {
        let mut inst = random_instance(seed.wrapping_add(2000 + k), 3, 3, cfg.path_dim());
        let scale = 10f64.powf(rng.gen_range(0.0..3.0));
        inst.emb.concepts.mapv_inplace(|x| x * scale);
        inst.emb.relations.mapv_inplace(|x| x * scale);
        inst.statement.mapv_inplace(|x| x * scale);
        let mut net = instance_net(k, &inst, cfg.clone())?;
        net.params.w1.mapv_inplace(|x| x * scale);
        net.params.w2.mapv_inplace(|x| x * scale);
        let tr = net.forward(&inst.input, &inst.statement, &inst.emb, false)?;
        for a in tr.alpha().iter().filter(|a| !a.is_empty()) {
            worst = worst.max((a.iter().sum::<f64>() - 1.0).abs());
        }
        worst = worst.max((tr.beta().iter().sum::<f64>() - 1.0).abs());
        finite &= tr.score.is_finite()
            && tr.g_hat().iter().all(|x| x.is_finite())
            && tr.alpha().iter().flatten().chain(tr.beta()).all(|x| x.is_finite());
    }
    Ok(SuiteResult {
        name: "attention-normalization",
        passed: worst <= 1e-6 && finite,
        detail: format!("{instances} instances, max |sum - 1| {worst:.2e}, all finite: {finite}"),
    })
}

fn permutation_suite(seed: u64, instances: usize) -> Result<SuiteResult> {
    let cfg = tiny_net_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(3000 + k), 3, 3, cfg.path_dim());
        let net = instance_net(k, &inst, cfg.clone())?;
        let base = net.forward(&inst.input, &inst.statement, &inst.emb, false)?.score;
        let mut perm: Vec<usize> = (0..inst.input.concepts.len()).collect();
        perm.shuffle(&mut rng);
        let mut permuted = inst.input.permuted(&perm);
        for pair in &mut permuted.pairs {
            pair.paths.shuffle(&mut rng);
        }
        let other = net.forward(&permuted, &inst.statement, &inst.emb, false)?.score;
        worst = worst.max((base - other).abs());
    }
    Ok(SuiteResult {
        name: "permutation-invariance",
        passed: worst < 1e-9,
        detail: format!("{instances} instances, max score change {worst:.2e}"),
    })
}

fn pruning_suite(seed: u64, graphs: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut pairs_checked = 0;
    for g in 0..graphs {
        let n = rng.gen_range(4..=9);
        let kg = random_graph(&mut rng, n, 0.45, 3);
        let emb = EmbeddingTable {
            concepts: Array2::from_shape_simple_fn((n, 3), || rng.gen_range(-1.0..1.0)),
            relations: Array2::from_shape_simple_fn((3, 3), || rng.gen_range(-1.0..1.0)),
            gamma: rng.gen_range(0.5..3.0),
            norm: Norm::L2,
        };
        let mut ids: Vec<ConceptId> = (0..n as u32).map(ConceptId).collect();
        ids.shuffle(&mut rng);
        let Ok(sg) = build_schema_graph_from(&kg, &ids[..2], &ids[2..4], 3, 100) else {
            continue;
        };
        let t_lo = rng.gen_range(0.0..0.3);
        let t_hi = t_lo + rng.gen_range(0.0..0.3);
        let (lo, _) = prune(&sg, &emb, t_lo);
        let (hi, _) = prune(&sg, &emb, t_hi);
        let (zero, _) = prune(&sg, &emb, 0.0);
        if zero != sg {
            violations.push(format!("graph #{g}: threshold 0 changed the schema graph"));
        }
        for (p, pair) in sg.pairs.iter().enumerate() {
            pairs_checked += 1;
            let kept_lo: BTreeSet<&Path> = lo.pairs[p].paths.iter().collect();
            let kept_hi: BTreeSet<&Path> = hi.pairs[p].paths.iter().collect();
            if pair.paths.len() < MIN_PATHS_TO_PRUNE {
                if lo.pairs[p].paths != pair.paths {
                    violations.push(format!("graph #{g} pair {p}: exempt pair was pruned"));
                }
                continue;
            }
            let expected: Vec<&Path> = pair
                .paths
                .iter()
                .filter(|x| emb.path_score(x) >= t_lo)
                .collect();
            let got: Vec<&Path> = lo.pairs[p].paths.iter().collect();
            if !expected.is_empty() && expected != got {
                violations.push(format!("graph #{g} pair {p}: threshold definition violated"));
            }
            if expected.is_empty() && got.len() != 1 {
                violations.push(format!("graph #{g} pair {p}: keep-best floor missing"));
            }
            let floored = hi.pairs[p].paths.len() == 1
                && pair.paths.iter().all(|x| emb.path_score(x) < t_hi);
            if !floored && !kept_hi.is_subset(&kept_lo) {
                violations.push(format!("graph #{g} pair {p}: raising the threshold added paths"));
            }
        }
    }
    Ok(SuiteResult {
        name: "pruning-semantics",
        passed: violations.is_empty(),
        detail: if violations.is_empty() {
            format!("{graphs} graphs, {pairs_checked} pairs")
        } else {
            violations.join("; ")
        },
    })
}

/// Edge-direction sanity for the adjacency index: every stored triple is
/// visible forwards from its head and backwards from its tail.
fn adjacency_suite(seed: u64, graphs: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in 0..graphs {
        let n = rng.gen_range(2..=10);
        let kg = random_graph(&mut rng, n, 0.3, 3);
        for t in kg.triples() {
            let fwd = kg
                .neighbors(t.head)?
                .iter()
                .any(|x| x.concept == t.tail && x.rel == t.rel && x.direction == Direction::Forward);
            let bwd = kg
                .neighbors(t.tail)?
                .iter()
                .any(|x| x.concept == t.head && x.rel == t.rel && x.direction == Direction::Reverse);
            if !fwd || !bwd {
                return Ok(SuiteResult {
                    name: "adjacency-index",
                    passed: false,
                    detail: format!("graph #{g}: triple {}-{}-{} missing", t.head, t.rel, t.tail),
                });
            }
        }
    }
    Ok(SuiteResult {
        name: "adjacency-index",
        passed: true,
        detail: format!("{graphs} graphs"),
    })
}

/// Runs every suite with sizes suitable for a quick command-line check.
pub fn run(seed: u64) -> Result<SelfCheckReport> {
    Ok(SelfCheckReport {
        suites: vec![
            gradient_suite(seed, 5)?,
            path_suite(seed, 200)?,
            degeneracy_suite(seed, 20)?,
            normalization_suite(seed, 20)?,
            permutation_suite(seed, 20)?,
            pruning_suite(seed, 50)?,
            adjacency_suite(seed, 20)?,
        ],
    })
}
