//! Bundled example models with frozen expected results.
//!
//! The corpus is the regression backbone: small systems whose outcomes were
//! worked out by hand, embedded at compile time and re-checked on demand. Each
//! check recomputes something from scratch — an outcome polytope, a preorder
//! verdict, a simulation — and compares it with the pinned value exactly, no
//! tolerances.
//!
//! Setting `PREORDERLAB_CORPUS` to a directory makes files there shadow the
//! embedded ones (same relative paths), so fixtures can be edited and re-pinned
//! without a rebuild.

use crate::compose;
use crate::derivation;
use crate::failsim::{self, FailsimCaps};
use crate::parser::{parse_model, validate_test, ModelKind, SourceModel, TestViolation};
use crate::preorder::{preorder_on_suite, Method, PreorderKind};
use crate::rat;
use crate::resolution::EngineOpts;
use crate::Rational;
use num_traits::Signed;

/// One embedded fixture: a relative path and its source text.
pub struct CorpusEntry {
    pub path: &'static str,
    pub text: &'static str,
}

pub const ENTRIES: &[CorpusEntry] = &[
    CorpusEntry { path: "restart/t1.test", text: include_str!("../corpus/restart/t1.test") },
    CorpusEntry { path: "restart/q1.proc", text: include_str!("../corpus/restart/q1.proc") },
    CorpusEntry { path: "restart/q2.proc", text: include_str!("../corpus/restart/q2.proc") },
    CorpusEntry { path: "restart/q2q1.cand", text: include_str!("../corpus/restart/q2q1.cand") },
    CorpusEntry { path: "single/ta.test", text: include_str!("../corpus/single/ta.test") },
    CorpusEntry { path: "single/a.proc", text: include_str!("../corpus/single/a.proc") },
    CorpusEntry { path: "single/loop.proc", text: include_str!("../corpus/single/loop.proc") },
    CorpusEntry { path: "single/stall.proc", text: include_str!("../corpus/single/stall.proc") },
    CorpusEntry { path: "refine/tdiv.test", text: include_str!("../corpus/refine/tdiv.test") },
    CorpusEntry { path: "refine/tb.test", text: include_str!("../corpus/refine/tb.test") },
    CorpusEntry { path: "refine/divL.proc", text: include_str!("../corpus/refine/divL.proc") },
    CorpusEntry { path: "refine/divC.proc", text: include_str!("../corpus/refine/divC.proc") },
    CorpusEntry { path: "bad/two.test", text: include_str!("../corpus/bad/two.test") },
    CorpusEntry { path: "bad/dropped.test", text: include_str!("../corpus/bad/dropped.test") },
];

/// Fixture text for `path`, honoring the `PREORDERLAB_CORPUS` override.
pub fn text_of(path: &str) -> Option<String> {
    if let Ok(root) = std::env::var("PREORDERLAB_CORPUS") {
        let shadow = std::path::Path::new(&root).join(path);
        if let Ok(text) = std::fs::read_to_string(shadow) {
            return Some(text);
        }
    }
    ENTRIES.iter().find(|e| e.path == path).map(|e| e.text.to_owned())
}

/// Result of one pinned check.
pub struct CorpusCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

struct Models {
    t1: SourceModel,
    q1: SourceModel,
    q2: SourceModel,
    cand_text: String,
    ta: SourceModel,
    one_a: SourceModel,
    diverge: SourceModel,
    stall: SourceModel,
    tdiv: SourceModel,
    tb: SourceModel,
    div_left: SourceModel,
    div_central: SourceModel,
    bad_two: String,
    bad_dropped: String,
}

fn load(path: &str, kind: ModelKind) -> Result<SourceModel, String> {
    let text = text_of(path).ok_or_else(|| format!("no corpus entry `{path}`"))?;
    parse_model(&text, kind).map_err(|e| format!("{path}: {e}"))
}

fn load_all() -> Result<Models, String> {
    let raw = |path: &str| text_of(path).ok_or_else(|| format!("no corpus entry `{path}`"));
    Ok(Models {
        t1: load("restart/t1.test", ModelKind::Test)?,
        q1: load("restart/q1.proc", ModelKind::Process)?,
        q2: load("restart/q2.proc", ModelKind::Process)?,
        cand_text: raw("restart/q2q1.cand")?,
        ta: load("single/ta.test", ModelKind::Test)?,
        one_a: load("single/a.proc", ModelKind::Process)?,
        diverge: load("single/loop.proc", ModelKind::Process)?,
        stall: load("single/stall.proc", ModelKind::Process)?,
        tdiv: load("refine/tdiv.test", ModelKind::Test)?,
        tb: load("refine/tb.test", ModelKind::Test)?,
        div_left: load("refine/divL.proc", ModelKind::Process)?,
        div_central: load("refine/divC.proc", ModelKind::Process)?,
        bad_two: raw("bad/two.test")?,
        bad_dropped: raw("bad/dropped.test")?,
    })
}

fn fmt_points(pts: &[Vec<Rational>]) -> String {
    let inner: Vec<String> = pts
        .iter()
        .map(|v| {
            let cs: Vec<String> = v.iter().map(|r| r.to_string()).collect();
            format!("({})", cs.join(", "))
        })
        .collect();
    format!("{{ {} }}", inner.join(", "))
}

/// Outcome vertices of test applied to process under `method`, sorted.
fn vertices(
    method: Method,
    test: &SourceModel,
    process: &SourceModel,
) -> Result<Vec<Vec<Rational>>, String> {
    let run = crate::preorder::outcomes(method, test, process, &EngineOpts::default())
        .map_err(|e| e.to_string())?;
    Ok(run.polytope.vertices().to_vec())
}

/// Run every pinned check and report one line's worth of data per check.
pub fn run_all() -> Vec<CorpusCheck> {
    let mut out: Vec<CorpusCheck> = Vec::new();
    let m = match load_all() {
        Ok(m) => m,
        Err(e) => {
            out.push(CorpusCheck { name: "corpus-parses", pass: false, detail: e });
            return out;
        }
    };
    let opts = EngineOpts::default();
    let caps = FailsimCaps::default();
    let mut check = |name: &'static str, r: Result<(bool, String), String>| {
        let (pass, detail) = match r {
            Ok(x) => x,
            Err(e) => (false, e),
        };
        out.push(CorpusCheck { name, pass, detail });
    };

    // --- restart: the retry loop against its leaky variant -------------------

    check("restart-outcomes-q1", (|| {
        let r = vertices(Method::Resolution, &m.t1, &m.q1)?;
        let d = vertices(Method::Derivation, &m.t1, &m.q1)?;
        let want = vec![vec![rat(1, 1)]];
        Ok((r == want && d == want, format!("resolution {} derivation {}", fmt_points(&r), fmt_points(&d))))
    })());

    check("restart-outcomes-q2", (|| {
        let r = vertices(Method::Resolution, &m.t1, &m.q2)?;
        let d = vertices(Method::Derivation, &m.t1, &m.q2)?;
        let want = vec![vec![rat(1, 2)], vec![rat(1, 1)]];
        Ok((r == want && d == want, format!("resolution {} derivation {}", fmt_points(&r), fmt_points(&d))))
    })());

    check("restart-scheduler-count", (|| {
        let r1 = crate::preorder::outcomes(Method::Resolution, &m.t1, &m.q1, &opts)
            .map_err(|e| e.to_string())?;
        let r2 = crate::preorder::outcomes(Method::Resolution, &m.t1, &m.q2, &opts)
            .map_err(|e| e.to_string())?;
        Ok((
            r1.schedulers == 1 && r2.schedulers == 2,
            format!("q1 explores {} scheduler(s), q2 explores {}", r1.schedulers, r2.schedulers),
        ))
    })());

    check("restart-may-both-ways", (|| {
        let suite = std::slice::from_ref(&m.t1);
        let ab = preorder_on_suite(PreorderKind::Pmay, &m.q1, &m.q2, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        let ba = preorder_on_suite(PreorderKind::Pmay, &m.q2, &m.q1, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        Ok((ab.holds && ba.holds, format!("q1<=q2 {}, q2<=q1 {}", ab.holds, ba.holds)))
    })());

    check("restart-must-one-way", (|| {
        let suite = std::slice::from_ref(&m.t1);
        let fwd = preorder_on_suite(PreorderKind::Pmust, &m.q2, &m.q1, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        let rev = preorder_on_suite(PreorderKind::Pmust, &m.q1, &m.q2, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        let replay = rev
            .per_test
            .iter()
            .find_map(|(_, v)| v.counterexample.as_ref())
            .map(|cx| cx.left_payoff > cx.right_payoff)
            .unwrap_or(false);
        Ok((
            fwd.holds && !rev.holds && replay,
            format!("q2<=q1 {}, q1<=q2 {} (counterexample replays: {})", fwd.holds, rev.holds, replay),
        ))
    })());

    check("restart-real-reward", (|| {
        let suite = std::slice::from_ref(&m.t1);
        let must = preorder_on_suite(PreorderKind::Rrmust, &m.q2, &m.q1, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        let may = preorder_on_suite(PreorderKind::Rrmay, &m.q2, &m.q1, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        let cx = may.per_test.iter().find_map(|(_, v)| v.counterexample.as_ref());
        let separated = cx.map(|cx| cx.left_payoff > cx.right_payoff).unwrap_or(false);
        Ok((
            must.holds && !may.holds && separated,
            format!(
                "worst-case q2<=q1 {}, best-case q2<=q1 {} ({})",
                must.holds,
                may.holds,
                cx.map(|c| c.to_string()).unwrap_or_default()
            ),
        ))
    })());

    check("restart-failure-simulation", (|| {
        let cand = failsim::parse_candidate(&m.cand_text, &m.q1.plts, &m.q2.plts)
            .map_err(|e| e.to_string())?;
        let violations = failsim::validate_candidate(&m.q1.plts, &m.q2.plts, &cand, &caps)
            .map_err(|e| e.to_string())?;
        let verdict = failsim::fs_leq(&m.q2, &m.q1, &cand, &caps).map_err(|e| e.to_string())?;
        let suite = std::slice::from_ref(&m.t1);
        let must = preorder_on_suite(PreorderKind::Rrmust, &m.q2, &m.q1, suite, Method::Derivation, &opts)
            .map_err(|e| e.to_string())?;
        Ok((
            violations.is_empty() && verdict.holds && must.holds,
            format!(
                "candidate violations {}, simulation holds {}, worst-case agrees {}",
                violations.len(),
                verdict.holds,
                must.holds
            ),
        ))
    })());

    check("restart-simulation-search", (|| {
        let fwd = failsim::bounded_candidate_search(&m.q2, &m.q1, 4, &caps)
            .map_err(|e| e.to_string())?;
        let fwd_holds = match &fwd {
            Some(cand) => failsim::fs_leq(&m.q2, &m.q1, cand, &caps)
                .map_err(|e| e.to_string())?
                .holds,
            None => false,
        };
        let rev = failsim::bounded_candidate_search(&m.q1, &m.q2, 2, &caps)
            .map_err(|e| e.to_string())?;
        Ok((
            fwd_holds && rev.is_none(),
            format!("found for q2<=q1: {}, for q1<=q2: {}", fwd.is_some(), rev.is_some()),
        ))
    })());

    // --- single: success, divergence, and the pruning fixture ----------------

    check("single-outcomes", (|| {
        let mut all = true;
        let mut shown = Vec::new();
        for (proc_, want) in [(&m.one_a, rat(1, 1)), (&m.diverge, rat(0, 1))] {
            for method in [Method::Resolution, Method::Derivation] {
                let v = vertices(method, &m.ta, proc_)?;
                all &= v == vec![vec![want.clone()]];
                shown.push(fmt_points(&v));
            }
        }
        Ok((all, shown.join(" ")))
    })());

    check("single-nonneg-vs-real", (|| {
        let suite = std::slice::from_ref(&m.ta);
        let nonneg =
            preorder_on_suite(PreorderKind::Pmust, &m.diverge, &m.one_a, suite, Method::Derivation, &opts)
                .map_err(|e| e.to_string())?;
        let real =
            preorder_on_suite(PreorderKind::Rrmust, &m.diverge, &m.one_a, suite, Method::Derivation, &opts)
                .map_err(|e| e.to_string())?;
        let cx = real.per_test.iter().find_map(|(_, v)| v.counterexample.as_ref());
        let negative_reward = cx
            .map(|cx| cx.h.values().iter().any(|r| r.is_negative()) && cx.left_payoff > cx.right_payoff)
            .unwrap_or(false);
        Ok((
            nonneg.holds && !real.holds && negative_reward,
            format!(
                "nonnegative worst-case holds {}, real worst-case holds {} ({})",
                nonneg.holds,
                real.holds,
                cx.map(|c| c.to_string()).unwrap_or_default()
            ),
        ))
    })());

    check("single-convergence", (|| {
        let verdict = |mdl: &SourceModel| {
            let (_, init) = mdl.default_init();
            derivation::is_convergent(&mdl.plts, init).is_convergent()
        };
        let (a, d, q) = (verdict(&m.one_a), verdict(&m.diverge), verdict(&m.q1));
        // stall's loop hides behind a visible action: from the start nothing
        // internal reaches it, so the start converges while p1 does not —
        // and composing with ta turns that action internal, exposing the loop
        let s_init = verdict(&m.stall);
        let p1 = crate::subdist::Subdistribution::point(m.stall.plts.state("p1").unwrap());
        let s_p1 = derivation::is_convergent(&m.stall.plts, &p1).is_convergent();
        let c = compose::compose(&m.ta, &m.stall, "main", "main").map_err(|e| e.to_string())?;
        let raw = derivation::is_convergent(&c.plts, &c.init).is_convergent();
        let pruned = compose::prune(&c);
        let cleaned = derivation::is_convergent(&pruned.plts, &pruned.init).is_convergent();
        Ok((
            a && !d && q && s_init && !s_p1 && !raw && cleaned,
            format!(
                "one_a {a}, diverge {d}, q1 {q}, stall from start {s_init} / from p1 {s_p1}, composed raw {raw} / cleaned {cleaned}"
            ),
        ))
    })());

    check("single-pruning-matters", (|| {
        let c = compose::compose(&m.ta, &m.stall, "main", "main").map_err(|e| e.to_string())?;
        let raw_d = derivation::outcomes_by_derivation(&c, &opts).map_err(|e| e.to_string())?;
        let raw_r = crate::resolution::outcomes_by_resolution(&c, &opts).map_err(|e| e.to_string())?;
        let pruned = derivation::outcomes_by_derivation(&compose::prune(&c), &opts)
            .map_err(|e| e.to_string())?;
        let raw_d_v = raw_d.polytope.vertices().to_vec();
        let raw_r_v = raw_r.polytope.vertices().to_vec();
        let pruned_v = pruned.polytope.vertices().to_vec();
        Ok((
            raw_d_v == vec![vec![rat(0, 1)]]
                && pruned_v == vec![vec![rat(1, 1)]]
                && raw_r_v == vec![vec![rat(1, 1)]],
            format!(
                "derivation raw {} pruned {}, resolution raw {}",
                fmt_points(&raw_d_v),
                fmt_points(&pruned_v),
                fmt_points(&raw_r_v)
            ),
        ))
    })());

    // --- refine: a corner only mixed-sign rewards can see --------------------

    check("refine-polytopes", (|| {
        let l = vertices(Method::Derivation, &m.tdiv, &m.div_left)?;
        let c = vertices(Method::Derivation, &m.tdiv, &m.div_central)?;
        let want_l = vec![vec![rat(0, 1), rat(0, 1)], vec![rat(1, 2), rat(1, 2)]];
        let want_c = vec![
            vec![rat(0, 1), rat(0, 1)],
            vec![rat(1, 2), rat(0, 1)],
            vec![rat(1, 2), rat(1, 2)],
        ];
        Ok((l == want_l && c == want_c, format!("left {} central {}", fmt_points(&l), fmt_points(&c))))
    })());

    check("refine-one-sided-blind", (|| {
        let suite = [&m.tdiv, &m.tb].map(Clone::clone);
        let mut all = true;
        let mut shown = Vec::new();
        for kind in [PreorderKind::Nrmay, PreorderKind::Nrmust] {
            for (l, r, tag) in
                [(&m.div_left, &m.div_central, "l<=c"), (&m.div_central, &m.div_left, "c<=l")]
            {
                let v = preorder_on_suite(kind, l, r, &suite, Method::Derivation, &opts)
                    .map_err(|e| e.to_string())?;
                all &= v.holds;
                shown.push(format!("{kind} {tag} {}", v.holds));
            }
        }
        Ok((all, shown.join(", ")))
    })());

    check("refine-real-reward-separates", (|| {
        let suite = [&m.tdiv, &m.tb].map(Clone::clone);
        let fails =
            preorder_on_suite(PreorderKind::Rrmust, &m.div_left, &m.div_central, &suite, Method::Derivation, &opts)
                .map_err(|e| e.to_string())?;
        let holds =
            preorder_on_suite(PreorderKind::Rrmust, &m.div_central, &m.div_left, &suite, Method::Derivation, &opts)
                .map_err(|e| e.to_string())?;
        let cx = fails.per_test.iter().find_map(|(_, v)| v.counterexample.as_ref());
        let mixed = cx
            .map(|cx| {
                cx.h.values().iter().any(|r| r.is_negative())
                    && cx.h.values().iter().any(|r| r.is_positive())
                    && cx.left_payoff > cx.right_payoff
                    && cx.test.as_deref() == Some("tdiv")
            })
            .unwrap_or(false);
        Ok((
            !fails.holds && holds.holds && mixed,
            format!(
                "l<=c {}, c<=l {} ({})",
                fails.holds,
                holds.holds,
                cx.map(|c| c.to_string()).unwrap_or_default()
            ),
        ))
    })());

    check("refine-may-must-duality", (|| {
        let suite = [&m.tdiv, &m.tb].map(Clone::clone);
        let mut pass = true;
        let mut shown = Vec::new();
        for (l, r, tag) in
            [(&m.div_left, &m.div_central, "l,c"), (&m.div_central, &m.div_left, "c,l")]
        {
            let may = preorder_on_suite(PreorderKind::Rrmay, l, r, &suite, Method::Derivation, &opts)
                .map_err(|e| e.to_string())?;
            let must = preorder_on_suite(PreorderKind::Rrmust, r, l, &suite, Method::Derivation, &opts)
                .map_err(|e| e.to_string())?;
            pass &= may.holds == must.holds;
            shown.push(format!("rrmay({tag}) {} = rrmust(rev) {}", may.holds, must.holds));
        }
        Ok((pass, shown.join(", ")))
    })());

    // --- bad: shapes the validator must refuse -------------------------------

    check("bad-tests-rejected", (|| {
        let two = parse_model(&m.bad_two, ModelKind::Test).map_err(|e| e.to_string())?;
        let dropped = parse_model(&m.bad_dropped, ModelKind::Test).map_err(|e| e.to_string())?;
        let v_two = validate_test(&two);
        let v_dropped = validate_test(&dropped);
        let right_kinds = v_two
            .iter()
            .any(|v| matches!(v, TestViolation::MultipleSuccesses { .. }))
            && v_dropped
                .iter()
                .any(|v| matches!(v, TestViolation::SuccessNotInherited { .. }));
        Ok((
            right_kinds,
            format!("two_successes: {} violation(s), dropped_success: {}", v_two.len(), v_dropped.len()),
        ))
    })());

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_pinned_check_passes() {
        let checks = run_all();
        assert!(!checks.is_empty());
        for c in &checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn override_directory_shadows_entries() {
        // not set in the test environment, so the embedded text must come back
        assert!(std::env::var("PREORDERLAB_CORPUS").is_err());
        let text = text_of("restart/t1.test").unwrap();
        assert!(text.contains("model test t1"));
        assert!(text_of("nosuch/path.test").is_none());
    }
}
