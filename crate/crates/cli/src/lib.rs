//! Experiment commands behind the `liftlab` binary. Each command returns its
//! output text and a verdict; the binary maps the verdict to the exit code.

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde_json::json;

use liftlab::engine::{EngineError, RectMode, SimulationConfig, Simulator};
use liftlab::gf2::{enumerate_subspaces, gaussian_binomial, MAX_ENUM_DIM};
use liftlab::hitting::{estimate_hitting, gh_default_h, gh_worst_case, hitting_bound, Family};
use liftlab::protocol::NaiveProtocol;
use liftlab::{parse_scalar, Gadget, Rational, Scalar, TruthTable};

/// Text produced by a command and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GadgetKind {
    Ip,
    Gh,
    Ind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeKind {
    Sample,
    Enumerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalarKind {
    Exact,
    F64,
    F32,
}

/// Exact rational from `"3/8"` or `"0.375"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    parse_scalar::<Rational>(text).ok_or_else(|| anyhow!("not a number: {text:?}"))
}

fn ratio_parts(r: &Rational) -> Result<(u64, u64)> {
    let num = r
        .numer()
        .to_u64()
        .ok_or_else(|| anyhow!("{r} must be nonnegative"))?;
    let den = r
        .denom()
        .to_u64()
        .ok_or_else(|| anyhow!("{r} has an oversized denominator"))?;
    Ok((num, den))
}

/// IP_n, GH_{n,γ} (γ defaults to 1/4) or IND with an n-bit pointer.
pub fn build_gadget(kind: GadgetKind, n: usize, gamma: Option<&str>) -> Result<Gadget> {
    Ok(match kind {
        GadgetKind::Ip => Gadget::ip(n)?,
        GadgetKind::Gh => {
            let gamma = parse_rational(gamma.unwrap_or("1/4"))?;
            let (num, den) = ratio_parts(&gamma)?;
            Gadget::gap_hamming_gamma(n, num, den)?
        }
        GadgetKind::Ind => {
            if gamma.is_some() {
                bail!("--gamma only applies to gh");
            }
            Gadget::indexing(n)?
        }
    })
}

fn gadget_name(g: &Gadget) -> &'static str {
    match g {
        Gadget::Ip { .. } => "ip",
        Gadget::Gh { .. } => "gh",
        Gadget::Ind { .. } => "ind",
    }
}

pub const HITTING_HEADER: &str = "gadget,n,c,family,h,trials,misses,miss_rate,bound,pass";

/// One CSV row per (c, family): Monte Carlo miss rate of σ_c against two sets
/// of density 2^{-h}, passing when the rate is within three Wilson
/// half-widths of the promised bound. `h` defaults to ⌊n/4⌋ for IP and
/// round(n/100) for gap-Hamming.
pub fn cmd_hitting(
    g: &Gadget,
    cs: &[bool],
    families: &[Family],
    h: Option<u32>,
    trials: u64,
    seed: u64,
) -> Result<Report> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    let n = g.alice_len();
    let h = match (h, g) {
        (Some(h), _) => h,
        (None, Gadget::Gh { n, .. }) => gh_default_h(*n),
        (None, _) => (n / 4) as u32,
    };
    let bound = hitting_bound(g, h)?;
    let mut text = format!("{HITTING_HEADER}\n");
    let mut ok = true;
    for &c in cs {
        for &family in families {
            let a = family.build(n, h, seed.wrapping_mul(2))?;
            let b = family.build(n, h, seed.wrapping_mul(2).wrapping_add(1))?;
            let est = estimate_hitting(g, c, &a, &b, trials, seed, Some(h))?;
            if est.below_density {
                eprintln!(
                    "warning: {} sets fall below density 2^-{h}",
                    family.as_str()
                );
            }
            let pass = est.within(bound);
            ok &= pass;
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                gadget_name(g),
                n,
                u8::from(c),
                family.as_str(),
                h,
                est.trials,
                est.misses,
                est.misses as f64 / est.trials as f64,
                bound,
                pass
            ));
        }
    }
    Ok(Report { text, ok })
}

fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    (x >> shift).to_f64().unwrap_or(f64::NAN).log2() + shift as f64
}

pub const GH_WORST_HEADER: &str =
    "n,exponent,radius,tail_count,miss_probability,log2_miss,log2_bound,pass,miss_over_half_weight";

/// Exact miss probability of the gap-Hamming distribution against the
/// smallest Hamming ball of size at least 2^{⌈exponent·n⌉}, compared exactly
/// with 2^{-n/100}. The verdict is reported in the row; small n is allowed to
/// fail.
pub fn cmd_gh_worstcase(n: usize, exponent: &str) -> Result<Report> {
    let e = parse_rational(exponent)?;
    if e > Rational::from_integer(1) {
        bail!("density exponent {e} exceeds 1");
    }
    let (num, den) = ratio_parts(&e)?;
    let wc = gh_worst_case(n, num, den)?;
    let text = format!(
        "{GH_WORST_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
        n,
        e,
        wc.radius,
        wc.tail_count,
        wc.miss_probability,
        log2_big(&wc.tail_count) - n as f64,
        -(n as f64) / 100.0,
        wc.within_bound,
        wc.miss_over_half_weight
    );
    Ok(Report { text, ok: true })
}

/// Counts of d-dimensional subspaces of 𝔽₂ⁿ containing v = 0…01 and the
/// pair {0…01, 0…10}, against the closed forms (2^d−1)/(2^n−1) and
/// C(2^d−1,2)/C(2^n−1,2).
pub fn cmd_subspace_check(n: usize, d: usize) -> Result<Report> {
    if n == 0 || n > MAX_ENUM_DIM {
        bail!("n must lie in 1..={MAX_ENUM_DIM}");
    }
    if d > n {
        bail!("d = {d} exceeds n = {n}");
    }
    let spaces = enumerate_subspaces(n, d)?;
    let total = spaces.len() as i128;
    let (v, w) = (1u64, 2u64);
    let contains_v = spaces.iter().filter(|s| s.contains_word(v)).count() as i128;
    let p_v = Rational::new(contains_v, total);
    let pow = |k: usize| (1i128 << k) - 1;
    let p_v_closed = Rational::new(pow(d), pow(n));
    let choose2 = |m: i128| m * (m - 1) / 2;
    let mut report = json!({
        "n": n,
        "d": d,
        "total": total,
        "gaussian_binomial": gaussian_binomial(n, d),
        "contains_v": contains_v,
        "p_v": p_v.to_string(),
        "p_v_closed_form": p_v_closed.to_string(),
    });
    let mut ok = total as u128 == gaussian_binomial(n, d) && p_v == p_v_closed;
    if n >= 2 {
        let contains_vw = spaces
            .iter()
            .filter(|s| s.contains_word(v) && s.contains_word(w))
            .count() as i128;
        let p_vw = Rational::new(contains_vw, total);
        let p_vw_closed = Rational::new(choose2(pow(d)), choose2(pow(n)));
        let below_product = p_vw <= p_v * p_v;
        ok &= p_vw == p_vw_closed && below_product;
        report["contains_vw"] = json!(contains_vw);
        report["p_vw"] = json!(p_vw.to_string());
        report["p_vw_closed_form"] = json!(p_vw_closed.to_string());
        report["p_vw_le_p_v_p_w"] = json!(below_product);
    }
    report["pass"] = json!(ok);
    Ok(Report {
        text: format!("{report}\n"),
        ok,
    })
}

/// Engine parameters as given on the command line. Unset τ and φ fall back
/// to 2^{-h} and 4·2^{-εh}.
#[derive(Debug, Clone)]
pub struct EngineArgs {
    pub eps: String,
    pub delta: String,
    pub h: u32,
    pub tau: Option<String>,
    pub phi: Option<String>,
    pub mode: ModeKind,
    pub max_attempts: u64,
    pub seed: u64,
    pub check_invariants: bool,
    pub require_gain: bool,
    pub strict: bool,
    pub scalar: ScalarKind,
}

impl Default for EngineArgs {
    fn default() -> Self {
        EngineArgs {
            eps: "1/4".into(),
            delta: "1/8".into(),
            h: 16,
            tau: None,
            phi: None,
            mode: ModeKind::Enumerate,
            max_attempts: 1000,
            seed: 0,
            check_invariants: false,
            require_gain: true,
            strict: false,
            scalar: ScalarKind::Exact,
        }
    }
}

fn scalar_arg<S: Scalar>(name: &str, text: &str) -> Result<S> {
    parse_scalar::<S>(text).ok_or_else(|| anyhow!("--{name}: not a number: {text:?}"))
}

impl EngineArgs {
    pub fn config<S: Scalar>(&self) -> Result<SimulationConfig<S>> {
        let mut cfg = SimulationConfig::new(
            scalar_arg("eps", &self.eps)?,
            scalar_arg("delta", &self.delta)?,
            self.h,
        );
        if let Some(t) = &self.tau {
            cfg.tau = scalar_arg("tau", t)?;
        }
        if let Some(p) = &self.phi {
            cfg.phi = scalar_arg("phi", p)?;
        }
        cfg.rect_mode = match self.mode {
            ModeKind::Sample => RectMode::Sample {
                max_attempts: self.max_attempts,
            },
            ModeKind::Enumerate => RectMode::Enumerate,
        };
        cfg.seed = self.seed;
        cfg.check_invariants = self.check_invariants;
        cfg.require_gain = self.require_gain;
        cfg.strict = self.strict;
        Ok(cfg)
    }
}

/// Loads an outer function from a JSON truth table.
pub fn load_table(path: &std::path::Path) -> Result<TruthTable> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TruthTable::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Parses `--z` as a string of 0/1 characters, z₁ first.
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(anyhow!("--z must contain only 0 and 1, got {c:?}")),
        })
        .collect()
}

fn engine_error(e: EngineError) -> anyhow::Error {
    match e {
        EngineError::Stuck(r) => {
            let diag = serde_json::to_string(&r).unwrap_or_default();
            anyhow!("stuck: {r}\n{diag}")
        }
        other => other.into(),
    }
}

macro_rules! with_scalar {
    ($kind:expr, $f:ident($($arg:expr),*)) => {
        match $kind {
            ScalarKind::Exact => $f::<Rational>($($arg),*),
            ScalarKind::F64 => $f::<f64>($($arg),*),
            ScalarKind::F32 => $f::<f32>($($arg),*),
        }
    };
}

fn simulator_parts(f: &TruthTable, g: Gadget) -> Result<NaiveProtocol> {
    Ok(NaiveProtocol::optimal(f, g)?)
}

fn simulate_with<S: Scalar>(
    f: &TruthTable,
    g: Gadget,
    z: &[bool],
    args: &EngineArgs,
) -> Result<Report> {
    let proto = simulator_parts(f, g)?;
    let cfg = args.config::<S>()?;
    let sim = Simulator::new(f, g, &proto, &cfg)?;
    let out = sim.run(z).map_err(engine_error)?;
    let ok = out.witness != Some(false);
    Ok(Report {
        text: out.to_jsonl(),
        ok,
    })
}

/// Runs the simulation on one input z and returns the JSON-lines trace
/// followed by a summary record.
pub fn cmd_simulate(f: &TruthTable, g: Gadget, z: &[bool], args: &EngineArgs) -> Result<Report> {
    if z.len() != f.arity() {
        bail!("--z has {} bits but f has arity {}", z.len(), f.arity());
    }
    with_scalar!(args.scalar, simulate_with(f, g, z, args))
}

fn extract_with<S: Scalar>(f: &TruthTable, g: Gadget, args: &EngineArgs) -> Result<Report> {
    let proto = simulator_parts(f, g)?;
    let cfg = args.config::<S>()?;
    let sim = Simulator::new(f, g, &proto, &cfg)?;
    let out = sim.extract_tree().map_err(engine_error)?;
    let ok = out.tree.stuck_leaves() == 0
        && out
            .tree
            .complete()
            .is_some_and(|t| t.computes(f).unwrap_or(false));
    Ok(Report {
        text: format!("{}\n", out.tree.to_json_value()),
        ok,
    })
}

/// Branches the simulation on every query answer and returns the decision
/// tree as JSON, with stuck branches marked.
pub fn cmd_extract(f: &TruthTable, g: Gadget, args: &EngineArgs) -> Result<Report> {
    with_scalar!(args.scalar, extract_with(f, g, args))
}

fn verify_with<S: Scalar>(f: &TruthTable, g: Gadget, args: &EngineArgs) -> Result<Report> {
    let proto = simulator_parts(f, g)?;
    let cfg = args.config::<S>()?;
    let sim = Simulator::new(f, g, &proto, &cfg)?;
    for w in sim.warnings() {
        eprintln!("warning: {w}");
    }
    let r = sim.verify_all()?;
    let mut text = format!("{}\n", r.headline());
    let bound = match r.query_bound {
        None => "query bound: not applicable".to_string(),
        Some(b) => format!(
            "query bound: {b} ({})",
            if r.max_queries as u64 <= b {
                "pass"
            } else {
                "fail"
            }
        ),
    };
    text.push_str(&format!(
        "{bound}\nstuck: {}\nrelaxed steps: {}\nwitness failures: {}\n",
        r.stuck, r.relaxed_steps, r.witness_failures
    ));
    for failure in &r.failures {
        text.push_str(&format!("failure: {failure}\n"));
    }
    Ok(Report {
        text,
        ok: r.passed(),
    })
}

/// Simulates every z ∈ {0,1}^p and compares the labels with f.
pub fn cmd_verify(f: &TruthTable, g: Gadget, args: &EngineArgs) -> Result<Report> {
    with_scalar!(args.scalar, verify_with(f, g, args))
}
