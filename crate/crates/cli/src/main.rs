//! Command-line front end for the preorder workbench.
//!
//! Every command prints a report whose lines are fully deterministic down to the
//! `---` separator; only timing goes below it, so two runs on the same inputs
//! can be compared with a plain diff. Inputs are listed with their digests at
//! the top for the same reason.
//!
//! Exit codes: 0 when the command succeeds and any verdict it renders holds,
//! 1 when a verdict comes out negative (preorder fails, divergence found,
//! candidate invalid, pinned check broken), 2 when the inputs themselves are
//! unusable.

use clap::{Parser, Subcommand, ValueEnum};
use preorderlab_core::compose::{compose, is_omega_respecting, prune};
use preorderlab_core::derivation::{
    bounded_weak_derivative, is_convergent, outcomes_by_derivation, weak_derivative_check,
    Convergence, WeakDerivError,
};
use preorderlab_core::failsim::{
    bounded_candidate_search, fs_leq, parse_candidate, serialize_candidate, validate_candidate,
    FailsimCaps, FailsimError,
};
use preorderlab_core::parser::{parse_model, validate_test, ModelKind, SourceModel};
use preorderlab_core::plts::Plts;
use preorderlab_core::preorder::{preorder_on_suite, Method, PreorderKind};
use preorderlab_core::resolution::{outcomes_by_resolution, EngineOpts, EngineRun};
use preorderlab_core::subdist::Subdistribution;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "preorderlab", version, about = "Probabilistic testing preorders, exactly")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Process,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Enumerate memoryless schedulers and solve each induced system.
    Resolution,
    /// Drive extreme derivatives and read rewards off the settled mass.
    Derivation,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Resolution => Method::Resolution,
            MethodArg::Derivation => Method::Derivation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindOfPreorder {
    Pmay,
    Pmust,
    Nrmay,
    Nrmust,
    Rrmay,
    Rrmust,
}

impl From<KindOfPreorder> for PreorderKind {
    fn from(k: KindOfPreorder) -> PreorderKind {
        match k {
            KindOfPreorder::Pmay => PreorderKind::Pmay,
            KindOfPreorder::Pmust => PreorderKind::Pmust,
            KindOfPreorder::Nrmay => PreorderKind::Nrmay,
            KindOfPreorder::Nrmust => PreorderKind::Nrmust,
            KindOfPreorder::Rrmay => PreorderKind::Rrmay,
            KindOfPreorder::Rrmust => PreorderKind::Rrmust,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a model file, validate its shape, and summarize it.
    Parse {
        file: PathBuf,
        /// What the file is expected to declare.
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Compose a test with a process and print the resulting system as is.
    Compose {
        test: PathBuf,
        process: PathBuf,
        #[arg(long)]
        init_test: Option<String>,
        #[arg(long)]
        init_process: Option<String>,
    },
    /// Compose, then clean internal moves out of success states, so reaching
    /// a reporting state actually counts.
    Prune {
        test: PathBuf,
        process: PathBuf,
        #[arg(long)]
        init_test: Option<String>,
        #[arg(long)]
        init_process: Option<String>,
    },
    /// Outcome polytope of a test applied to a process.
    Outcomes {
        test: PathBuf,
        process: PathBuf,
        #[arg(long, value_enum, default_value = "resolution")]
        method: MethodArg,
        #[arg(long)]
        init_test: Option<String>,
        #[arg(long)]
        init_process: Option<String>,
        /// Abort rather than enumerate more schedulers than this.
        #[arg(long, default_value_t = 1 << 20)]
        max_schedulers: u64,
    },
    /// Can the process diverge internally from its initial distribution?
    Converges {
        process: PathBuf,
        #[arg(long)]
        init: Option<String>,
    },
    /// Is one initial distribution weakly derivable from another?
    Derivable {
        process: PathBuf,
        /// Name of the source init (default: the model's first).
        #[arg(long)]
        from: Option<String>,
        /// Name of the target init.
        #[arg(long)]
        to: String,
        /// Require the derivation to be extreme: it may stop only where no
        /// internal move remains.
        #[arg(long)]
        extreme: bool,
        /// Rounds of staged unrolling when divergence rules out the one-shot
        /// check. Inconclusive when exhausted.
        #[arg(long, default_value_t = 64)]
        unroll_depth: usize,
    },
    /// Decide a testing preorder between two processes over a suite of tests.
    Compare {
        left: PathBuf,
        right: PathBuf,
        /// Which preorder to decide.
        #[arg(long, value_enum)]
        kind: KindOfPreorder,
        /// A `.test` file or a directory of them.
        #[arg(long)]
        tests: PathBuf,
        #[arg(long, value_enum, default_value = "resolution")]
        method: MethodArg,
        #[arg(long, default_value_t = 1 << 20)]
        max_schedulers: u64,
    },
    /// Failure-simulation checks between two processes.
    Failsim {
        #[command(subcommand)]
        cmd: FailsimCmd,
    },
    /// The bundled example models and their pinned expectations.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
}

#[derive(Subcommand)]
enum FailsimCmd {
    /// Check a candidate relation's obligations, listing every violation.
    Validate { left: PathBuf, right: PathBuf, candidate: PathBuf },
    /// Validate, then decide left below right through the candidate.
    Check { left: PathBuf, right: PathBuf, candidate: PathBuf },
    /// Search for a witnessing candidate up to a visible-step depth.
    Search {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Re-run every pinned check.
    Run,
}

/// Everything a command needs to render its report: digests up top, then
/// deterministic lines, then (outside the comparable section) timing.
struct Report {
    body: String,
    started: Instant,
}

impl Report {
    fn new(title: &str, inputs: &[(&str, &Path)]) -> Result<Report, String> {
        let mut body = format!("preorderlab {title} (engine {})\n", env!("CARGO_PKG_VERSION"));
        if !inputs.is_empty() {
            body.push_str("inputs:\n");
            for (tag, path) in inputs {
                let bytes = std::fs::read(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                let mut hasher = Sha256::new();
                hasher.update(&bytes);
                let digest = hasher.finalize();
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                let _ = writeln!(body, "  {tag} {} sha256:{hex}", path.display());
            }
        }
        Ok(Report { body, started: Instant::now() })
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.body.push_str(s.as_ref());
        self.body.push('\n');
    }

    fn finish(self) {
        let text = format!("{}---\nelapsed: {:?}\n", self.body, self.started.elapsed());
        write_stdout(&text);
    }
}

/// Write to stdout, dying quietly if the reader went away (`... | head` closes
/// the pipe mid-report; 141 is the shell's code for a SIGPIPE death, and it
/// keeps the semantic exit codes unpolluted).
fn write_stdout(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let outcome = out.write_all(text.as_bytes()).and_then(|()| out.flush());
    if let Err(e) = outcome {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(141);
        }
        eprintln!("error: writing report: {e}");
        std::process::exit(2);
    }
}

fn load(path: &Path, kind: ModelKind) -> Result<SourceModel, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_model(&text, kind).map_err(|e| format!("{}: {e}", path.display()))
}

fn fmt_subdist(p: &Plts, d: &Subdistribution) -> String {
    let entries: Vec<String> =
        d.iter().map(|(s, w)| format!("{} {}", w, p.name(s))).collect();
    format!("{{ {} }}", entries.join(", "))
}

fn print_composite(report: &mut Report, c: &preorderlab_core::compose::ComposedPlts) {
    report.line(format!(
        "success states shielded: {}",
        is_omega_respecting(&c.plts)
    ));
    report.line(format!("init = {}", fmt_subdist(&c.plts, &c.init)));
    for s in c.plts.states() {
        for &i in c.plts.outgoing(s) {
            let tr = c.plts.transition(i);
            report.line(format!(
                "{}: {} -> {}",
                c.plts.name(s),
                tr.label,
                fmt_subdist(&c.plts, &tr.target)
            ));
        }
    }
}

fn print_run(report: &mut Report, run: &EngineRun) {
    report.line(format!("schedulers explored: {}", run.schedulers));
    let omegas = run.polytope.omegas().join(", ");
    report.line(format!("success coordinates: ({omegas})"));
    report.line("vertices:");
    for v in run.polytope.vertices() {
        let cs: Vec<String> = v.iter().map(|r| r.to_string()).collect();
        report.line(format!("  ({})", cs.join(", ")));
    }
}

/// Load every `.test` under `path` (or `path` itself), sorted by file name.
fn load_suite(path: &Path) -> Result<Vec<SourceModel>, String> {
    let mut files: Vec<PathBuf> = if path.is_dir() {
        std::fs::read_dir(path)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "test"))
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    files.sort();
    if files.is_empty() {
        return Err(format!("{}: no .test files", path.display()));
    }
    files.iter().map(|f| load(f, ModelKind::Test)).collect()
}

fn resolve_init<'m>(
    m: &'m SourceModel,
    requested: &'m Option<String>,
) -> Result<(&'m str, &'m Subdistribution), String> {
    match requested {
        None => Ok(m.default_init()),
        Some(name) => m
            .init(name)
            .map(|d| (name.as_str(), d))
            .ok_or_else(|| format!("model `{}` declares no init `{name}`", m.name)),
    }
}

fn run(cli: Cli) -> Result<i32, String> {
    match cli.cmd {
        Cmd::Parse { file, kind } => {
            let kind = match kind {
                KindArg::Process => ModelKind::Process,
                KindArg::Test => ModelKind::Test,
            };
            let m = load(&file, kind)?;
            let mut report = Report::new("parse", &[("model", &file)])?;
            let alphabet: Vec<&str> = m.plts.visible.iter().map(String::as_str).collect();
            report.line(format!(
                "model {} ({}): {} states, {} transitions, alphabet {{{}}}",
                m.name,
                m.kind,
                m.plts.n_states(),
                m.plts.n_transitions(),
                alphabet.join(", ")
            ));
            if !m.plts.successes.is_empty() {
                let ws: Vec<&str> = m.plts.successes.iter().map(String::as_str).collect();
                report.line(format!("success actions: {{{}}}", ws.join(", ")));
            }
            for name in &m.init_order {
                report.line(format!("init {name} = {}", fmt_subdist(&m.plts, &m.inits[name])));
            }
            let mut code = 0;
            if m.kind == ModelKind::Test {
                let violations = validate_test(&m);
                if violations.is_empty() {
                    report.line("test shape: ok");
                } else {
                    code = 1;
                    report.line("test shape: INVALID");
                    for v in &violations {
                        report.line(format!("  {v}"));
                    }
                }
            }
            report.finish();
            Ok(code)
        }

        Cmd::Compose { test, process, init_test, init_process } => {
            let t = load(&test, ModelKind::Test)?;
            let p = load(&process, ModelKind::Process)?;
            let (ti, _) = resolve_init(&t, &init_test)?;
            let (pi, _) = resolve_init(&p, &init_process)?;
            let composed = compose(&t, &p, ti, pi).map_err(|e| e.to_string())?;
            let mut report =
                Report::new("compose", &[("test", &test), ("process", &process)])?;
            report.line(format!(
                "composite of test {} and process {}: {} states, {} transitions",
                t.name,
                p.name,
                composed.plts.n_states(),
                composed.plts.n_transitions()
            ));
            print_composite(&mut report, &composed);
            report.finish();
            Ok(0)
        }

        Cmd::Prune { test, process, init_test, init_process } => {
            let t = load(&test, ModelKind::Test)?;
            let p = load(&process, ModelKind::Process)?;
            let (ti, _) = resolve_init(&t, &init_test)?;
            let (pi, _) = resolve_init(&p, &init_process)?;
            let composed = compose(&t, &p, ti, pi).map_err(|e| e.to_string())?;
            let cleaned = prune(&composed);
            let removed = composed.plts.n_transitions() - cleaned.plts.n_transitions();
            let mut report =
                Report::new("prune", &[("test", &test), ("process", &process)])?;
            report.line(format!(
                "composite of test {} and process {}: {} states, {} transitions \
                 ({removed} internal move(s) cleaned from success states)",
                t.name,
                p.name,
                cleaned.plts.n_states(),
                cleaned.plts.n_transitions()
            ));
            print_composite(&mut report, &cleaned);
            report.finish();
            Ok(0)
        }

        Cmd::Outcomes { test, process, method, init_test, init_process, max_schedulers } => {
            let t = load(&test, ModelKind::Test)?;
            let p = load(&process, ModelKind::Process)?;
            let (ti, _) = resolve_init(&t, &init_test)?;
            let (pi, _) = resolve_init(&p, &init_process)?;
            let opts = EngineOpts { max_schedulers };
            let composed = compose(&t, &p, ti, pi).map_err(|e| e.to_string())?;
            let pruned = prune(&composed);
            let run = match method {
                MethodArg::Resolution => outcomes_by_resolution(&pruned, &opts),
                MethodArg::Derivation => outcomes_by_derivation(&pruned, &opts),
            }
            .map_err(|e| e.to_string())?;
            let mut report =
                Report::new("outcomes", &[("test", &test), ("process", &process)])?;
            report.line(format!(
                "method: {}",
                match method {
                    MethodArg::Resolution => "resolution",
                    MethodArg::Derivation => "derivation",
                }
            ));
            print_run(&mut report, &run);
            report.finish();
            Ok(0)
        }

        Cmd::Converges { process, init } => {
            let p = load(&process, ModelKind::Process)?;
            let (name, dist) = resolve_init(&p, &init)?;
            let mut report = Report::new("converges", &[("process", &process)])?;
            let code = match is_convergent(&p.plts, dist) {
                Convergence::Convergent { order } => {
                    let names: Vec<&str> =
                        order.iter().map(|&s| p.plts.name(s)).collect();
                    report.line(format!(
                        "convergent from init {name} = {}",
                        fmt_subdist(&p.plts, dist)
                    ));
                    report.line(format!("elimination order: {}", names.join(", ")));
                    0
                }
                Convergence::Divergent { core } => {
                    let names: Vec<&str> =
                        core.iter().map(|&s| p.plts.name(s)).collect();
                    report.line(format!(
                        "DIVERGENT from init {name} = {}",
                        fmt_subdist(&p.plts, dist)
                    ));
                    report.line(format!(
                        "internal moves can circulate forever within: {{{}}}",
                        names.join(", ")
                    ));
                    1
                }
            };
            report.finish();
            Ok(code)
        }

        Cmd::Derivable { process, from, to, extreme, unroll_depth } => {
            let p = load(&process, ModelKind::Process)?;
            let (from_name, src) = resolve_init(&p, &from)?;
            let tgt = p
                .init(&to)
                .ok_or_else(|| format!("model `{}` declares no init `{to}`", p.name))?;
            let mut report = Report::new("derivable", &[("process", &process)])?;
            report.line(format!("from {from_name} = {}", fmt_subdist(&p.plts, src)));
            report.line(format!("to   {to} = {}", fmt_subdist(&p.plts, tgt)));
            if extreme {
                report.line("mode: extreme (stopping allowed only where no internal move remains)");
            }
            let code = match weak_derivative_check(&p.plts, src, tgt, extreme) {
                Ok(Some(sol)) => {
                    report.line("derivable: yes (flow witness)");
                    for ((s, i), f) in &sol.flow {
                        report.line(format!(
                            "  traverse {}: tau -> {}  x{}",
                            p.plts.name(*s),
                            fmt_subdist(&p.plts, &p.plts.transition(*i).target),
                            f
                        ));
                    }
                    0
                }
                Ok(None) => {
                    report.line("derivable: no");
                    1
                }
                Err(WeakDerivError::DivergentInput { example }) => {
                    report.line(format!(
                        "divergence at `{example}`; falling back to staged unrolling (depth {unroll_depth})"
                    ));
                    match bounded_weak_derivative(&p.plts, src, tgt, extreme, unroll_depth) {
                        Some(staged) => {
                            report.line(format!(
                                "derivable: yes (within {} round(s))",
                                staged.stages.len()
                            ));
                            0
                        }
                        None => {
                            report.line(format!(
                                "inconclusive: no witness within {unroll_depth} round(s); deeper derivations may exist"
                            ));
                            1
                        }
                    }
                }
            };
            report.finish();
            Ok(code)
        }

        Cmd::Compare { left, right, kind, tests, method, max_schedulers } => {
            let l = load(&left, ModelKind::Process)?;
            let r = load(&right, ModelKind::Process)?;
            let suite = load_suite(&tests)?;
            let kind: PreorderKind = kind.into();
            let opts = EngineOpts { max_schedulers };
            let verdict = preorder_on_suite(kind, &l, &r, &suite, method.into(), &opts)
                .map_err(|e| e.to_string())?;
            let mut report =
                Report::new("compare", &[("left", &left), ("right", &right)])?;
            report.line(format!(
                "{kind}: {} below {} over {} test(s)",
                l.name,
                r.name,
                suite.len()
            ));
            for (test_name, v) in &verdict.per_test {
                if v.holds {
                    report.line(format!("  {test_name}: holds"));
                } else {
                    let cx = v.counterexample.as_ref().expect("failing test carries evidence");
                    report.line(format!("  {test_name}: FAILS — {cx}"));
                }
            }
            report.line(format!("verdict: {}", if verdict.holds { "holds" } else { "FAILS" }));
            report.finish();
            Ok(if verdict.holds { 0 } else { 1 })
        }

        Cmd::Failsim { cmd } => {
            let caps = FailsimCaps::default();
            match cmd {
                FailsimCmd::Validate { left, right, candidate } => {
                    let l = load(&left, ModelKind::Process)?;
                    let r = load(&right, ModelKind::Process)?;
                    let text = std::fs::read_to_string(&candidate)
                        .map_err(|e| format!("{}: {e}", candidate.display()))?;
                    let cand = parse_candidate(&text, &r.plts, &l.plts)
                        .map_err(|e| format!("{}: {e}", candidate.display()))?;
                    let violations = validate_candidate(&r.plts, &l.plts, &cand, &caps)
                        .map_err(|e| e.to_string())?;
                    let mut report = Report::new(
                        "failsim validate",
                        &[("left", &left), ("right", &right), ("candidate", &candidate)],
                    )?;
                    report.line(format!(
                        "candidate pairs {} state(s) of {} with generators over {}",
                        cand.pairs.len(),
                        r.name,
                        l.name
                    ));
                    let code = if violations.is_empty() {
                        report.line("obligations: all hold");
                        0
                    } else {
                        report.line(format!("obligations: {} violation(s)", violations.len()));
                        for v in &violations {
                            report.line(format!("  {v}"));
                        }
                        1
                    };
                    report.finish();
                    Ok(code)
                }
                FailsimCmd::Check { left, right, candidate } => {
                    let l = load(&left, ModelKind::Process)?;
                    let r = load(&right, ModelKind::Process)?;
                    let text = std::fs::read_to_string(&candidate)
                        .map_err(|e| format!("{}: {e}", candidate.display()))?;
                    let cand = parse_candidate(&text, &r.plts, &l.plts)
                        .map_err(|e| format!("{}: {e}", candidate.display()))?;
                    let mut report = Report::new(
                        "failsim check",
                        &[("left", &left), ("right", &right), ("candidate", &candidate)],
                    )?;
                    match fs_leq(&l, &r, &cand, &caps) {
                        Ok(verdict) if verdict.holds => {
                            report.line(format!("{} below {}: holds", l.name, r.name));
                            if let Some(w) = &verdict.witness {
                                report.line(format!(
                                    "start derives to {} inside the prescribed hull",
                                    fmt_subdist(&l.plts, w)
                                ));
                            }
                            report.finish();
                            Ok(0)
                        }
                        Ok(_) => {
                            report.line(format!(
                                "{} below {}: FAILS — candidate is sound but the start obligation is not met",
                                l.name, r.name
                            ));
                            report.finish();
                            Ok(1)
                        }
                        Err(FailsimError::CandidateInvalid { violations }) => {
                            report.line(format!(
                                "{} below {}: FAILS — candidate breaks {} obligation(s)",
                                l.name,
                                r.name,
                                violations.len()
                            ));
                            for v in &violations {
                                report.line(format!("  {v}"));
                            }
                            report.finish();
                            Ok(1)
                        }
                        Err(e) => Err(e.to_string()),
                    }
                }
                FailsimCmd::Search { left, right, depth } => {
                    let l = load(&left, ModelKind::Process)?;
                    let r = load(&right, ModelKind::Process)?;
                    let mut report =
                        Report::new("failsim search", &[("left", &left), ("right", &right)])?;
                    match bounded_candidate_search(&l, &r, depth, &caps)
                        .map_err(|e| e.to_string())?
                    {
                        Some(cand) => {
                            report.line(format!(
                                "{} below {}: witnessed at depth {depth}",
                                l.name, r.name
                            ));
                            report.line("candidate:");
                            for line in serialize_candidate(&cand, &r.plts, &l.plts).lines() {
                                report.line(format!("  {line}"));
                            }
                            report.finish();
                            Ok(0)
                        }
                        None => {
                            report.line(format!(
                                "no witness within depth {depth}; a deeper seed may still find one"
                            ));
                            report.finish();
                            Ok(1)
                        }
                    }
                }
            }
        }

        Cmd::Corpus { cmd: CorpusCmd::Run } => {
            let mut report = Report::new("corpus run", &[])?;
            if let Ok(root) = std::env::var("PREORDERLAB_CORPUS") {
                report.line(format!("fixtures shadowed by: {root}"));
            }
            let checks = preorderlab_core::corpus::run_all();
            let mut failed = 0;
            for c in &checks {
                if c.pass {
                    report.line(format!("PASS {} — {}", c.name, c.detail));
                } else {
                    failed += 1;
                    report.line(format!("FAIL {} — {}", c.name, c.detail));
                }
            }
            report.line(format!("{} check(s), {} failed", checks.len(), failed));
            report.finish();
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(message) => {
            eprintln!("error: {message}");
            std::process::exit(2);
        }
    }
}
