use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ntcf::gaussian::{trace_distance_from_h2, tv_distance, DEFAULT_TABLE_CAP};
use ntcf::ntcf::gen;
use ntcf::oracle::{image_circuit, joint_distribution, residual_after_image};
use ntcf::params::{c_t_for, LayoutKind, NtcfParams};
use ntcf::protocol::{
    run_over_tcp, run_protocol, transcripts_to_text, Challenge, InProcessLink, ProtocolError, SessionConfig,
    SessionReport, DEFAULT_RETRY_CAP,
};
use ntcf::prover::{
    cheat_commit_prover, exact_joint_distribution, exact_residual, image_distribution, joint_with, CheatRandomProver,
    HonestProver, Prover, SampMode,
};
use ntcf::reductions::{end_to_end_recover, LweInstance, ReductionPath};
use ntcf::trapdoor::calibrate_ct;
use ntcf::zq::ZqVector;

const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

/// Proof-of-quantumness toolkit built on κ-to-1 LWE claw-free functions.
#[derive(Parser)]
#[command(name = "ntcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair and print the parameter report.
    Keygen(Common),
    /// Run a multi-round protocol session.
    Protocol(ProtocolArgs),
    /// Exact Hellinger table per branch against the closed-form bounds.
    Stats(Common),
    /// Run an LWE reduction pipeline and recover the planted secret.
    Reduce(ReduceArgs),
    /// Compare the analytic prover with the sparse quantum oracle.
    OracleCompare(OracleArgs),
    /// Estimate the trapdoor constant C_T empirically.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Named preset: tiny-exact, desk-k3 or desk-k2.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    kappa: Option<u32>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, env = "NTCF_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "ntcf-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProverKind {
    Honest,
    CheatCommit,
    CheatRandom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChallengeArg {
    G,
    T,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, value_enum, default_value = "honest")]
    prover: ProverKind,
    /// `inproc` or `tcp:HOST:PORT` (port 0 picks a free one).
    #[arg(long, default_value = "inproc")]
    transport: String,
    /// Keep one key for the whole session.
    #[arg(long)]
    reuse_key: bool,
    /// Force every challenge instead of flipping a coin.
    #[arg(long, value_enum)]
    challenge: Option<ChallengeArg>,
    #[arg(long, default_value_t = DEFAULT_RETRY_CAP)]
    retry_cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Dcp,
    Edcp,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "dcp")]
    path: PathArg,
    /// Replace one state with a shifted copy.
    #[arg(long)]
    corrupt: bool,
    /// Sample exact residuals instead of idealized claws.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Shift branch 1 of the analytic residual by one (fault injection).
    #[arg(long)]
    mis_shift: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// Bisection trials; at least 100 are run.
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

type CmdResult = Result<u8, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keygen(c) => keygen(&c),
        Command::Protocol(a) => protocol(&a),
        Command::Stats(c) => stats(&c),
        Command::Reduce(a) => reduce(&a),
        Command::OracleCompare(a) => oracle_compare(&a),
        Command::Calibrate(a) => calibrate(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn resolve(c: &Common, default_preset: &str) -> Result<NtcfParams, String> {
    let base = NtcfParams::preset(c.preset.as_deref().unwrap_or(default_preset)).map_err(|e| e.to_string())?;
    let mut p = if c.q.is_some() || c.n.is_some() || c.m.is_some() || c.kappa.is_some() {
        let q = match c.q {
            Some(q) => ntcf::zq::Modulus::new(q).map_err(|e| e.to_string())?,
            None => base.q,
        };
        let (n, m, kappa) = (c.n.unwrap_or(base.n), c.m.unwrap_or(base.m), c.kappa.unwrap_or(base.kappa));
        let c_t = c_t_for(q, n, m, kappa, base.b_p);
        let mut p = NtcfParams::new(q, n, m, base.ell, kappa, base.b_l, base.b_v, c_t, base.layout);
        p.lambda = base.lambda;
        p
    } else {
        base
    };
    if let Some(ell) = c.ell {
        p.ell = ell;
    }
    let report = p.validate();
    if !report.is_ok() {
        return Err(format!("invalid parameters\n{report}"));
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

fn rng_pair(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let verifier = ChaCha8Rng::seed_from_u64(seed);
    let mut prover = ChaCha8Rng::seed_from_u64(seed);
    prover.set_stream(1);
    (verifier, prover)
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(path)
}

fn keygen(c: &Common) -> CmdResult {
    let p = resolve(c, "desk-k3")?;
    let (key, td) = gen(&p, &mut ChaCha8Rng::seed_from_u64(c.seed)).map_err(|e| e.to_string())?;
    let key_path = write_out(&c.out, "key.txt", &key.to_text())?;
    let sk_path = write_out(&c.out, "secret.txt", &td.to_text(&key))?;
    let mut w = ntcf::codec::TextWriter::new();
    p.write_text(&mut w);
    print!("{}", w.finish());
    println!("B_P (formula) = {:.6}", ntcf::params::b_p_formula(p.q, p.n, p.m, p.kappa, p.c_t));
    println!("predicted H² bounds 1 − exp(−2π·m·b·B_V/B_P):");
    for b in 0..p.kappa {
        let bound = 1.0 - (-2.0 * std::f64::consts::PI * p.m as f64 * b as f64 * p.b_v / p.b_p).exp();
        println!("  b={b}  {bound:.6}");
    }
    println!("wrote {} and {}", key_path.display(), sk_path.display());
    Ok(0)
}

fn make_prover(kind: ProverKind, rng: ChaCha8Rng) -> Box<dyn Prover + Send> {
    match kind {
        ProverKind::Honest => Box::new(HonestProver::new(rng)),
        ProverKind::CheatCommit => Box::new(cheat_commit_prover(rng)),
        ProverKind::CheatRandom => Box::new(CheatRandomProver::new(rng)),
    }
}

fn protocol(a: &ProtocolArgs) -> CmdResult {
    let p = resolve(&a.common, "desk-k3")?;
    let mut cfg = SessionConfig::new(a.rounds);
    cfg.reuse_key = a.reuse_key;
    cfg.retry_cap = a.retry_cap;
    cfg.challenge = a.challenge.map(|c| match c {
        ChallengeArg::G => Challenge::Generation,
        ChallengeArg::T => Challenge::Test,
    });
    let (vrng, prng) = rng_pair(a.common.seed);
    let prover = make_prover(a.prover, prng);
    let result: Result<SessionReport, ProtocolError> = match a.transport.as_str() {
        "inproc" => run_protocol(&p, vrng, &mut InProcessLink::new(prover), &cfg),
        t => match t.strip_prefix("tcp:") {
            Some(addr) => run_over_tcp(&p, vrng, prover, &cfg, addr),
            None => return Err(format!("unknown transport `{t}`; use inproc or tcp:HOST:PORT")),
        },
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("protocol error: {e}");
            return Ok(e.exit_code() as u8);
        }
    };
    let s = &report.stats;
    write_out(&a.common.out, "stats.txt", &s.to_text())?;
    write_out(&a.common.out, "transcript.txt", &transcripts_to_text(&report.transcripts))?;
    print!("{}", s.to_text());
    println!("accept_rate={:.4}", s.accept_rate());
    println!("p_pre={:.4}\np_eq={:.4}", s.preimage_rate(), s.equation_rate());
    println!("session={}", if report.accepted() { "accept" } else { "reject" });
    Ok(report.exit_code() as u8)
}

fn stats(c: &Common) -> CmdResult {
    let p = resolve(c, "tiny-exact")?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (key, td) = gen(&p, &mut rng).map_err(|e| e.to_string())?;
    let x = ZqVector::random(p.n, p.q, &mut rng);
    println!("{:>3}  {:>14}  {:>12}  {:>12}  {:>12}  pass", "b", "H² exact", "shift bound", "κ bound", "trace ≤");
    let mut all = true;
    for b in 0..p.kappa {
        let h = td
            .hellinger_branch(&key, b, &x, DEFAULT_TABLE_CAP)
            .map_err(|e| format!("{e}; try a smaller preset such as tiny-exact"))?;
        let trace = trace_distance_from_h2(h.exact).map_err(|e| e.to_string())?;
        let pass = h.exact <= h.shift_bound + 1e-10 && h.exact <= h.family_bound + 1e-10;
        all &= pass;
        println!(
            "{:>3}  {:>14.6e}  {:>12.6}  {:>12.6}  {:>12.6}  {}",
            b,
            h.exact,
            h.shift_bound,
            h.family_bound,
            trace,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(if all { 0 } else { EXIT_FAIL })
}

fn reduce(a: &ReduceArgs) -> CmdResult {
    let p = resolve(&a.common, "desk-k3")?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let (inst, planted) = LweInstance::planted(&p, &mut rng).map_err(|e| e.to_string())?;
    let path = match a.path {
        PathArg::Dcp => ReductionPath::Dcp,
        PathArg::Edcp => ReductionPath::Edcp { kappa: p.kappa },
    };
    let mode = if a.exact { SampMode::Exact } else { SampMode::Idealized };
    let report = end_to_end_recover(&inst, path, p.ell.max(1), mode, a.corrupt, &mut rng).map_err(|e| e.to_string())?;
    write_out(&a.common.out, "reduce.txt", &report.to_text())?;
    print!("{}", report.to_text());
    if let Some(s) = &report.candidate {
        println!("recovered={s}\nplanted={planted}\nresidual_norm={:.4}", inst.residual_norm(s));
    }
    Ok(if report.success { 0 } else { EXIT_FAIL })
}

fn oracle_compare(a: &OracleArgs) -> CmdResult {
    let p = resolve(&a.common, "tiny-exact")?;
    let (key, _) = gen(&p, &mut ChaCha8Rng::seed_from_u64(a.common.seed)).map_err(|e| e.to_string())?;
    let oracle = joint_distribution(&key).map_err(|e| e.to_string())?;
    let cap = 1 << 22;
    let analytic = if a.mis_shift {
        joint_with(&key, cap, |key, y| {
            let mut r = exact_residual(key, y)?;
            let mut unit = vec![0i64; key.params.n];
            unit[0] = 1;
            let unit = ZqVector::from_signed(&unit, key.params.q);
            for (b, x, _) in r.support.iter_mut() {
                if *b == 1 {
                    *x = x.add(&unit)?;
                }
            }
            Ok(r)
        })
    } else {
        exact_joint_distribution(&key, cap)
    }
    .map_err(|e| e.to_string())?;
    let tv = tv_distance(&analytic, &oracle);

    let images = image_distribution(&key, cap).map_err(|e| e.to_string())?;
    if let Some(y) = images.mode() {
        let circuit = image_circuit(&key).map_err(|e| e.to_string())?;
        let (_, st) = residual_after_image(&circuit, y).map_err(|e| e.to_string())?;
        let yv = ZqVector::new(y.clone(), p.q).map_err(|e| e.to_string())?;
        let r = exact_residual(&key, &yv).map_err(|e| e.to_string())?;
        println!("most likely image y = {yv}");
        println!("{:>3}  {:>12}  {:>12}  {:>12}", "b", "x", "analytic", "oracle");
        for (b, x, amp) in &r.support {
            let mut label = vec![*b];
            label.extend_from_slice(x.entries());
            println!("{:>3}  {:>12}  {:>12.9}  {:>12.9}", b, x.to_string(), amp, st.amplitude(&label).re);
        }
    }
    println!("joint labels: analytic {} oracle {}", analytic.len(), oracle.len());
    println!("TV = {tv:.3e}");
    let pass = tv <= 1e-9;
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { EXIT_FAIL })
}

fn calibrate(a: &CalibrateArgs) -> CmdResult {
    let p = resolve(&a.common, "desk-k3")?;
    if p.layout != LayoutKind::Gadget {
        return Err("calibration needs a gadget-layout preset".into());
    }
    let cal = calibrate_ct(p.n, p.m, p.q, a.trials, &mut ChaCha8Rng::seed_from_u64(a.common.seed))
        .map_err(|e| e.to_string())?;
    println!("trials={}\nthreshold_norm={:.4}\nc_t={:.6}", cal.trials, cal.threshold_norm, cal.c_t);
    Ok(0)
}
