//! Command-line front end. `run` returns the exit code and both output
//! streams so it can be driven from tests as well as from `main`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::cycles::{cycle_decomposition, max_vertex};
use crate::density::{
    alpha_closed_inv, alpha_prime_s_inv, density_count, density_count_checked, reconcile_relation,
    CountBudget, TernaryFormChoice, TernaryTag, DEFAULT_TABLE_CAP, DEFAULT_WORK_BUDGET,
};
use crate::dot::tube_dot;
use crate::error::Error;
use crate::forms::{diagonalize, realize_anticommuting_pair, BinaryForm, Convention, FormInvariants};
use crate::harness::{run_suite, SuiteConfig, SuiteName, DEFAULT_SEED};
use crate::intersection::{e_p_bruteforce, e_p_closed, gross_keating, ordinary_chart_length};
use crate::lattice::{SpecialEndomorphism, DEFAULT_BALL_CAP};
use crate::padic::{check_prime, PAdicContext, Sign};
use crate::rational::ExactRational;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_REALIZABLE: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "btcycles", version, about = "Special cycles on the Drinfeld upper half plane: intersection numbers and representation densities")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "BTCYCLES_THREADS")]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
    Dot,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Intersection number of two special cycles.
    Ep(EpArgs),
    /// Representation density by one of S, Sprime, Sdp.
    Density(DensityArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Multiplicities of a special cycle over a ball of the tree.
    Tube(TubeArgs),
    /// Intersection multiplicity at a prime of good reduction.
    Gk(GkArgs),
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("form").required(true).args(["t", "inv"]))]
pub struct EpArgs {
    #[arg(long)]
    pub p: u64,
    /// Gram matrix "t11,t12,t22" of the pair (q-convention).
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Invariants "alpha,beta,chi1,chi2".
    #[arg(long, allow_hyphen_values = true)]
    pub inv: Option<String>,
    #[arg(long, value_enum, default_value_t = Routes::All)]
    pub routes: Routes,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Routes {
    Closed,
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    Count,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[arg(long)]
    pub p: u64,
    /// S, Sprime or Sdp.
    #[arg(long = "S")]
    pub s: String,
    /// Binary form "t11,t12,t22" (Q-convention).
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t: String,
    #[arg(long, value_enum, default_value_t = Method::Closed)]
    pub method: Method,
    /// Counting level; default beta + 1.
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
    pub budget: u128,
    /// Skip the recount at level + 1.
    #[arg(long)]
    pub no_check: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Comma-separated primes.
    #[arg(long, default_value = "3,5,7")]
    pub p: String,
    #[arg(long, default_value_t = 6)]
    pub bound: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "3")]
    pub density_p: String,
    #[arg(long, default_value_t = 2)]
    pub density_bound: u32,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
    pub budget: u128,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("endo").required(true).args(["j", "inv"]))]
pub struct TubeArgs {
    #[arg(long)]
    pub p: u64,
    /// Entries "a,b,c" of j = [[a,b],[c,-a]].
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<String>,
    /// "alpha,chi": j with q(j) = eps p^alpha, chi(eps) = chi.
    #[arg(long, allow_hyphen_values = true)]
    pub inv: Option<String>,
    /// Ball radius around the maximizer of the multiplicity.
    #[arg(long)]
    pub radius: Option<u32>,
}

#[derive(Args, Debug)]
pub struct GkArgs {
    #[arg(long)]
    pub p: u64,
    /// "alpha,beta" or "alpha,beta,chi1,chi2" (Q-convention).
    #[arg(long, allow_hyphen_values = true)]
    pub inv: String,
}

/// Exit code and captured output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotRealizable(_) => EXIT_NOT_REALIZABLE,
        Error::Resource { .. } => EXIT_RESOURCE,
        Error::Internal(_) => EXIT_VERIFICATION,
        _ => EXIT_INVALID,
    }
}

fn fail(e: Error) -> Outcome {
    Outcome { code: exit_code(&e), stdout: String::new(), stderr: format!("error: {e}\n") }
}

type CmdResult = std::result::Result<Outcome, Error>;

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    if let Some(n) = cli.threads {
        // a second initialization (repeated calls in one process) is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let res = match &cli.command {
        Command::Ep(a) => cmd_ep(a, cli.format),
        Command::Density(a) => cmd_density(a, cli.format),
        Command::Verify(a) => cmd_verify(a, cli.format),
        Command::Tube(a) => cmd_tube(a, cli.format),
        Command::Gk(a) => cmd_gk(a, cli.format),
    };
    res.unwrap_or_else(fail)
}

fn parse_primes(s: &str) -> Result<Vec<u64>, Error> {
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| Error::Parse(format!("bad prime {t:?}"))))
        .collect()
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn unsupported(fmt: Format, cmd: &str) -> Error {
    Error::Parse(format!("--format {fmt:?} is not available for {cmd}").to_lowercase())
}

/// `e_p` through the density relation: the reconciled coefficients applied
/// to `-T`.
fn density_route(inv: &FormInvariants) -> Result<ExactRational, Error> {
    let rec = reconcile_relation(inv.p, 2)?;
    rec.solved.evaluate(&inv.in_convention(Convention::BigQ))
}

pub fn cmd_ep(a: &EpArgs, fmt: Format) -> CmdResult {
    check_prime(a.p)?;
    let (form, inv) = match (&a.t, &a.inv) {
        (Some(t), None) => {
            let f = BinaryForm::parse(t, Convention::SmallQ)?;
            let inv = diagonalize(a.p, &f)?;
            (f, inv)
        }
        (None, Some(s)) => {
            let inv = FormInvariants::parse(a.p, s, Convention::SmallQ)?;
            (inv.diagonal_form(), inv)
        }
        _ => return Err(Error::Parse("give exactly one of --T and --inv".into())),
    };
    if let Some(why) = inv.obstruction() {
        return Err(Error::NotRealizable(format!("{} at p={}: {why}", inv.label(), a.p)));
    }
    let closed = e_p_closed(&inv)?;
    let mu_negated = inv.negated().mu();
    let mut routes = serde_json::Map::new();
    routes.insert("closed".into(), json!(closed));
    let mut breakdown = None;
    let mut consistent = true;
    if a.routes == Routes::All {
        let (j, jp) = realize_anticommuting_pair(&inv)?;
        let b = e_p_bruteforce(&j, &jp)?;
        let d = density_route(&inv)?;
        consistent &= b.total == closed && d == ExactRational::from(closed);
        routes.insert("bruteforce".into(), json!(b.total));
        routes.insert("density".into(), json!(d.to_string()));
        if inv.alpha == 0 && inv.chi1 == Sign::Minus {
            let chart = ordinary_chart_length(&j, &jp, &max_vertex(&j))? as i64;
            consistent &= chart == closed;
            routes.insert("chart".into(), json!(chart));
        }
        breakdown = Some(b);
    }
    if !consistent {
        return Err(Error::Internal(format!("routes disagree: {}", serde_json::Value::Object(routes))));
    }
    let out = match fmt {
        Format::Json => pretty(&json!({
            "p": a.p,
            "T": form.to_csv(),
            "invariants": inv,
            "mu_negated": mu_negated,
            "e_p": closed,
            "breakdown": breakdown,
            "routes": routes,
        })),
        Format::Csv => {
            let (hh, hv, vh, vv) = breakdown.map_or((String::new(), String::new(), String::new(), String::new()), |b| {
                (b.hh.to_string(), b.hv.to_string(), b.vh.to_string(), b.vv.to_string())
            });
            format!(
                "p,alpha,beta,chi1,chi2,e_p,hh,hv,vh,vv\n{},{},{},{},{},{closed},{hh},{hv},{vh},{vv}\n",
                a.p, inv.alpha, inv.beta, inv.chi1, inv.chi2
            )
        }
        Format::Text => {
            let mut s = format!(
                "p = {}\nT = {}\ninvariants = {}\nrealizable = true\nmu(-T) = {mu_negated}\ne_p = {closed}\n",
                a.p,
                form,
                inv.label()
            );
            if let Some(b) = breakdown {
                s += &format!("breakdown (hh, hv, vh, vv) = ({}, {}, {}, {})\n", b.hh, b.hv, b.vh, b.vv);
            }
            for (k, v) in &routes {
                s += &format!("route {k} = {}\n", v.as_str().map_or_else(|| v.to_string(), str::to_string));
            }
            s
        }
        Format::Dot => return Err(unsupported(fmt, "ep")),
    };
    Ok(Outcome::ok(out))
}

pub fn cmd_density(a: &DensityArgs, fmt: Format) -> CmdResult {
    check_prime(a.p)?;
    let tag: TernaryTag = a.s.parse()?;
    let t = BinaryForm::parse(&a.t, Convention::BigQ)?;
    let inv = diagonalize(a.p, &t)?;
    let choice = TernaryFormChoice::new(tag, a.p)?;
    let budget = CountBudget { max_work: a.budget, max_table: DEFAULT_TABLE_CAP };
    let mut method = a.method;
    let closed = if method == Method::Closed { alpha_closed_inv(tag, &inv)? } else { None };
    let mut record = json!({
        "p": a.p,
        "S": tag.name(),
        "T": t.to_csv(),
        "invariants": inv,
    });
    let value = match closed {
        Some(v) => v,
        None => {
            // no closed form here: count
            method = Method::Count;
            if a.no_check {
                let level = match a.level {
                    Some(l) => l,
                    None => crate::density::auto_level(a.p, &t)?,
                };
                let c = density_count(&choice, &t, level, &budget)?;
                record["level"] = json!(level);
                c.value
            } else {
                let st = density_count_checked(&choice, &t, a.level, &budget)?;
                record["level"] = json!(st.level);
                record["stabilization"] = json!({
                    "check_level": st.check_level,
                    "check_value": st.check_value.to_string(),
                    "stable": st.stable,
                });
                if !st.stable {
                    return Err(Error::Internal(format!(
                        "count not stable: {} at level {}, {} at level {}",
                        st.value, st.level, st.check_value, st.check_level
                    )));
                }
                st.value
            }
        }
    };
    record["method"] = json!(match method {
        Method::Closed => "closed",
        Method::Count => "count",
    });
    record["value"] = json!(value.to_string());
    let out = match fmt {
        Format::Json => pretty(&record),
        Format::Text => format!("{value}\n"),
        Format::Csv => format!(
            "p,S,T,method,level,value\n{},{},\"{}\",{},{},{value}\n",
            a.p,
            tag,
            t.to_csv(),
            record["method"].as_str().unwrap_or(""),
            record.get("level").map_or(String::new(), |l| l.to_string())
        ),
        Format::Dot => return Err(unsupported(fmt, "density")),
    };
    Ok(Outcome::ok(out))
}

pub fn cmd_verify(a: &VerifyArgs, fmt: Format) -> CmdResult {
    let config = SuiteConfig {
        primes: parse_primes(&a.p)?,
        bound: a.bound,
        seed: a.seed,
        density_primes: parse_primes(&a.density_p)?,
        density_bound: a.density_bound,
        level: a.level,
        budget: CountBudget { max_work: a.budget, max_table: DEFAULT_TABLE_CAP },
        ..SuiteConfig::default()
    };
    let suite: SuiteName = a.suite.parse()?;
    let report = run_suite(suite, &config)?;
    let stdout = match fmt {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
        Format::Csv => {
            let mut s = String::from("suite,check,passed,total\n");
            for c in &report.summary {
                s += &format!("{},{},{},{}\n", c.suite, c.check, c.passed, c.total);
            }
            s
        }
        Format::Dot => return Err(unsupported(fmt, "verify")),
    };
    let code = if report.passed {
        EXIT_OK
    } else if report.incomplete && report.failures().next().is_none() {
        EXIT_RESOURCE
    } else {
        EXIT_VERIFICATION
    };
    Ok(Outcome { code, stdout, stderr: String::new() })
}

fn parse_endomorphism(a: &TubeArgs) -> Result<SpecialEndomorphism, Error> {
    match (&a.j, &a.inv) {
        (Some(s), None) => {
            let parts: Vec<ExactRational> = s
                .split(',')
                .map(|x| x.trim().parse::<ExactRational>())
                .collect::<Result<_, _>>()?;
            if parts.len() != 3 {
                return Err(Error::Parse(format!("--j must be \"a,b,c\", got {s:?}")));
            }
            SpecialEndomorphism::new(a.p, parts[0].clone(), parts[1].clone(), parts[2].clone())
        }
        (None, Some(s)) => {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("--inv must be \"alpha,chi\", got {s:?}")));
            }
            let alpha: u32 = parts[0].parse().map_err(|_| Error::Parse(format!("bad alpha {:?}", parts[0])))?;
            let chi: Sign = parts[1].parse()?;
            let ctx = PAdicContext::new(a.p, alpha + 8)?;
            let n = ExactRational::from(ctx.unit_rep(chi)) * ExactRational::prime_power(a.p, alpha as i64);
            SpecialEndomorphism::new(a.p, ExactRational::zero(), n, ExactRational::one())
        }
        _ => Err(Error::Parse("give exactly one of --j and --inv".into())),
    }
}

pub fn cmd_tube(a: &TubeArgs, fmt: Format) -> CmdResult {
    check_prime(a.p)?;
    let j = parse_endomorphism(a)?;
    let center = max_vertex(&j);
    let radius = a.radius.unwrap_or(j.alpha().div_ceil(2) + 1);
    let region = center.ball(radius, DEFAULT_BALL_CAP)?;
    let out = match fmt {
        Format::Dot | Format::Text => tube_dot(&j, &region),
        Format::Json => {
            let dec = cycle_decomposition(&j, &region);
            pretty(&json!({
                "p": a.p,
                "j": j.matrix().to_string(),
                "alpha": j.alpha(),
                "center": center,
                "center_mult": crate::cycles::mult(&j, &center),
                "radius": radius,
                "decomposition": dec,
            }))
        }
        Format::Csv => {
            let mut s = String::from("m,x,mult\n");
            for v in &region {
                s += &format!("{},{},{}\n", v.m(), v.x(), crate::cycles::mult(&j, v));
            }
            s
        }
    };
    Ok(Outcome::ok(out))
}

pub fn cmd_gk(a: &GkArgs, fmt: Format) -> CmdResult {
    check_prime(a.p)?;
    let given = FormInvariants::parse(a.p, &a.inv, Convention::BigQ)?;
    let explicit_chars = a.inv.split(',').count() == 4;
    let value = gross_keating(&given);
    let in_domain = given.alpha % 2 == 1 || given.beta % 2 == 1;
    // the relation is stated where mu = -1; pick such characters if not given
    let witness = if explicit_chars {
        (given.mu() == Sign::Minus).then_some(given)
    } else {
        [Sign::Plus, Sign::Minus]
            .iter()
            .flat_map(|&c1| [Sign::Plus, Sign::Minus].map(|c2| FormInvariants { chi1: c1, chi2: c2, ..given }))
            .find(|i| i.mu() == Sign::Minus)
    };
    let (relation, derivative) = match witness {
        Some(w) => {
            let p = ExactRational::from(a.p as i64);
            let d = alpha_prime_s_inv(&w)?;
            let k = -(&p * &p) / (&p * &p - 1) * &d;
            (if k == value { "pass" } else { "fail" }, Some((w, d)))
        }
        None => ("n/a (mu = +1)", None),
    };
    let out = match fmt {
        Format::Json => pretty(&json!({
            "p": a.p,
            "alpha": given.alpha,
            "beta": given.beta,
            "gross_keating": value.to_string(),
            "in_domain": in_domain,
            "kitaoka_relation": relation,
            "derivative": derivative.as_ref().map(|(w, d)| json!({"invariants": w, "alpha_prime_S": d.to_string()})),
        })),
        Format::Text => {
            let mut s = format!("{value}\nkitaoka_relation: {relation}\n");
            if !in_domain {
                s += "domain: outside (alpha and beta both even)\n";
            }
            s
        }
        Format::Csv => format!("p,alpha,beta,gross_keating,kitaoka_relation\n{},{},{},{value},{relation}\n", a.p, given.alpha, given.beta),
        Format::Dot => return Err(unsupported(fmt, "gk")),
    };
    let code = if relation == "fail" { EXIT_VERIFICATION } else { EXIT_OK };
    Ok(Outcome { code, stdout: out, stderr: String::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn go(args: &str) -> Outcome {
        run(std::iter::once("btcycles").chain(args.split_whitespace()))
    }

    #[test]
    fn ep_examples() {
        let o = go("ep --p 3 --T 2,0,9");
        assert_eq!(o.code, 0, "{}", o.stderr);
        assert!(o.stdout.contains("e_p = 2"));
        assert!(o.stdout.contains("(0, 2, 0, 0)"));
        assert_eq!(go("ep --p 3 --inv 1,1,+1,-1").stdout.lines().find(|l| l.starts_with("e_p")), Some("e_p = 1"));
        let o = go("ep --p 2 --T 1,0,1");
        assert_eq!(o.code, EXIT_INVALID);
        assert!(o.stderr.contains("p=2"));
        assert_eq!(go("ep --p 3 --inv 1,1,+1,+1").code, EXIT_NOT_REALIZABLE);
        assert_eq!(go("ep --p 3 --T 1,1,1").code, EXIT_INVALID);
    }

    #[test]
    fn density_examples() {
        assert_eq!(go("density --p 3 --S S --T -1,0,-1 --method count --level 2").stdout, "8/9\n");
        assert_eq!(go("density --p 3 --S Sprime --T 1,0,3 --method closed").stdout, "8\n");
        assert_eq!(go("density --p 3 --S Sdp --T -1,0,-1 --method closed").stdout, "0\n");
        let o = go("density --p 3 --S S --T -1,0,-1 --method count --level 9");
        assert_eq!(o.code, EXIT_RESOURCE);
    }

    #[test]
    fn gk_example() {
        let o = go("gk --p 3 --inv 2,3");
        assert_eq!(o.stdout, "8\nkitaoka_relation: pass\n");
    }
}
