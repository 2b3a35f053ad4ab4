//! Seeded random model generation for the randomized suites.
//!
//! Models are generated as source text so a test can replay the same system
//! with its state blocks in a different order — parsing assigns ids in file
//! order, which makes block order a cheap lever for permutation checks.
//!
//! Tests built here keep success reporting one-shot: a reporting state offers
//! its success action and nothing else. That satisfies both test conditions by
//! construction while leaving branching, probability, and internal moves free.

// Each test binary uses its own slice of these helpers.
#![allow(dead_code)]

use preorderlab_core::parser::{parse_model, validate_test, ModelKind, SourceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generated model as reorderable source text.
pub struct RawModel {
    header: String,
    blocks: Vec<String>,
    init: String,
}

impl RawModel {
    /// Source text with state blocks laid out in generation order.
    pub fn text(&self) -> String {
        let order: Vec<usize> = (0..self.blocks.len()).collect();
        self.text_with_order(&order)
    }

    /// Source text with state blocks permuted; ids shift, behavior must not.
    pub fn text_with_order(&self, order: &[usize]) -> String {
        assert_eq!(order.len(), self.blocks.len());
        let mut out = self.header.clone();
        for &i in order {
            out.push_str(&self.blocks[i]);
        }
        out.push_str(&self.init);
        out
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }
}

/// One random target distribution over `names`: a point mass or a fair split.
fn distribution(rng: &mut ChaCha8Rng, names: &[String]) -> String {
    if names.len() >= 2 && rng.gen_bool(0.4) {
        let a = rng.gen_range(0..names.len());
        let mut b = rng.gen_range(0..names.len() - 1);
        if b >= a {
            b += 1;
        }
        format!("{{ 1/2 {}, 1/2 {} }}", names[a], names[b])
    } else {
        format!("{{ 1 {} }}", names[rng.gen_range(0..names.len())])
    }
}

/// A random process over actions `a`, `b`: 2-4 states, up to two internal moves
/// per state (loops allowed), at most one move per visible action.
pub fn random_process(rng: &mut ChaCha8Rng, name: &str) -> RawModel {
    let n = rng.gen_range(2..=4);
    let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut blocks = Vec::new();
    for s in &names {
        let mut moves = Vec::new();
        for _ in 0..2 {
            if rng.gen_bool(0.4) {
                moves.push(format!("tau -> {}", distribution(rng, &names)));
            }
        }
        for action in ["a", "b"] {
            if rng.gen_bool(0.35) {
                moves.push(format!("{action} -> {}", distribution(rng, &names)));
            }
        }
        blocks.push(format!("state {s} {{ {} }}\n", moves.join("; ")));
    }
    RawModel {
        header: format!("model process {name}\nalphabet a, b\n"),
        blocks,
        init: format!("init main = {{ 1 {} }}\n", names[0]),
    }
}

/// A random test over the same actions with one success action `w1`: branching
/// states as in a process, plus reporting states that only fire the success.
pub fn random_test(rng: &mut ChaCha8Rng, name: &str) -> RawModel {
    let n_branch = rng.gen_range(1..=3);
    let n_report = rng.gen_range(1..=2);
    let branch: Vec<String> = (0..n_branch).map(|i| format!("t{i}")).collect();
    let report: Vec<String> = (0..n_report).map(|i| format!("r{i}")).collect();
    let all: Vec<String> =
        branch.iter().chain(report.iter()).cloned().collect();
    let mut blocks = Vec::new();
    for s in &branch {
        let mut moves = Vec::new();
        if rng.gen_bool(0.3) {
            moves.push(format!("tau -> {}", distribution(rng, &all)));
        }
        for action in ["a", "b"] {
            if rng.gen_bool(0.55) {
                moves.push(format!("{action} -> {}", distribution(rng, &all)));
            }
        }
        blocks.push(format!("state {s} {{ {} }}\n", moves.join("; ")));
    }
    for s in &report {
        blocks.push(format!("state {s} {{ w1 -> {{ 1 sink }} }}\n"));
    }
    blocks.push("state sink { }\n".to_owned());
    RawModel {
        header: format!("model test {name}\nalphabet a, b\nsuccess w1\n"),
        blocks,
        init: format!("init main = {{ 1 {} }}\n", branch[0]),
    }
}

pub fn parse_process(raw: &RawModel) -> SourceModel {
    parse_model(&raw.text(), ModelKind::Process).expect("generated process parses")
}

pub fn parse_test(raw: &RawModel) -> SourceModel {
    let m = parse_model(&raw.text(), ModelKind::Test).expect("generated test parses");
    assert!(validate_test(&m).is_empty(), "generated tests satisfy both shape conditions");
    m
}
