//! Command-line front end: build codebooks, verify the structural results,
//! run DFR bounds and simulations, and emit the reproduction table.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error.

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;
use torcode::codebook::{
    self, best_4point_code_dmin_sq, decode_gtd8_fast, gamma_star, lookup, minal_dmin_formula,
    Codebook,
};
use torcode::dfr::{dfr_monte_carlo, dfr_union_bound, DfrReport, Method};
use torcode::lattice::LatticeSpec;
use torcode::noise::verify_splitting;
use torcode::pke::Params;
use torcode::torus::TorusVector;

const SCHEMA: &str = "torcode-report-v1";

#[derive(Parser)]
#[command(name = "torcode", version, about = "toroidal-distance codes for lattice PKE")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Codebook construction and distance reports
    Code {
        #[command(subcommand)]
        cmd: CodeCmd,
    },
    /// Decryption failure rate: union bounds and Monte Carlo
    Dfr {
        #[command(subcommand)]
        cmd: DfrCmd,
    },
    /// Structural verification suites
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
    /// Reproduction artifacts
    Report {
        #[command(subcommand)]
        cmd: ReportCmd,
    },
}

#[derive(Subcommand)]
enum CodeCmd {
    /// Build a codebook and print it as JSON
    Build(CodeArgs),
    /// Print the minimum toroidal distance of one or all constructions
    Dmin {
        #[command(flatten)]
        args: CodeArgs,
        /// Evaluate every registered construction
        #[arg(long)]
        all: bool,
    },
    /// Print codewords as a label-indexed table
    Dump(CodeArgs),
}

#[derive(Args)]
struct CodeArgs {
    #[arg(long, default_value_t = 3329)]
    q: i64,
    /// Construction name (baseline, mtd2, minal2/4/8, gtd4, gtd8, mld)
    #[arg(long)]
    construction: Option<String>,
    /// Tailoring parameter for the circulant (minal) family
    #[arg(long)]
    gamma: Option<i64>,
    /// Write output to this path instead of standard output
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum DfrCmd {
    /// Evaluate the union bound
    Bound(BoundArgs),
    /// Monte Carlo simulation of full encrypt/decrypt cycles
    Mc(McArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Parameter preset: kyber512, kyber768, kyber1024, kyber1024-du10, stressed
    #[arg(long, default_value = "kyber1024")]
    preset: String,
    /// Shorthand for --preset stressed
    #[arg(long)]
    stressed: bool,
    #[arg(long)]
    construction: Option<String>,
    #[arg(long)]
    q: Option<i64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eta1: Option<u32>,
    #[arg(long)]
    eta2: Option<u32>,
    #[arg(long)]
    du: Option<u32>,
    #[arg(long)]
    dv: Option<u32>,
}

impl ParamArgs {
    fn build(&self) -> Result<Params, String> {
        let preset = if self.stressed { "stressed" } else { &self.preset };
        let mut p = Params::preset(preset).map_err(|e| e.to_string())?;
        if let Some(q) = self.q {
            p.q = q;
        }
        if let Some(k) = self.k {
            p.k = k;
        }
        if let Some(e) = self.eta1 {
            p.eta1 = e;
        }
        if let Some(e) = self.eta2 {
            p.eta2 = e;
        }
        if let Some(d) = self.du {
            p.d_u = d;
        }
        if let Some(d) = self.dv {
            p.d_v = d;
        }
        let construction = self.construction.as_deref().unwrap_or("baseline");
        let p = Params::new(
            p.n,
            p.q,
            p.k,
            p.eta1,
            p.eta2,
            p.d_u,
            p.d_v,
            lookup(construction)
                .map_err(|e| e.to_string())?
                .build(p.q, None)
                .map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        Ok(p)
    }
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Tail evaluation: exact or chernoff (default: exact for ell <= 4)
    #[arg(long)]
    method: Option<String>,
    /// Prune exponent: masses below 2^-EXP are folded into the bound
    #[arg(long, default_value_t = 400)]
    prune: u32,
    /// Permit the hours-scale exact evaluation for ell = 8
    #[arg(long)]
    allow_long: bool,
    /// Write the full report as JSON to this path
    #[arg(long)]
    json: Option<String>,
    /// Write the one-line CSV record to this path
    #[arg(long)]
    csv: Option<String>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: Option<String>,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Run every suite
    All,
    /// Strided product blocks are identically distributed
    Splitting {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        ell: usize,
        #[arg(long, default_value_t = 17)]
        q: i64,
    },
    /// No 4-point planar code beats the optimized circulant at small q
    Theorem1 {
        #[arg(long, default_value_t = 17)]
        q: i64,
    },
    /// Circulant distance formula vs exhaustive search
    Lemma1,
    /// Lattice point counts and minimum distances
    Lattice,
    /// Fast 8-D decoder equals the exhaustive decoder
    Decoder,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Assemble the distance / DFR / CER reproduction table and plot
    Table2 {
        /// CSV output path
        #[arg(long, default_value = "table2.csv")]
        csv: String,
        /// SVG scatter output path
        #[arg(long, default_value = "table2.svg")]
        svg: String,
        /// Use the exact (hours-scale) method for ell = 2 instead of Chernoff
        #[arg(long)]
        heavy: bool,
        /// Restrict to a comma-separated subset of constructions
        #[arg(long)]
        only: Option<String>,
    },
}

fn main() -> ExitCode {
    if let Ok(w) = std::env::var("TORCODE_WORKERS") {
        if let Ok(n) = w.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Code { cmd } => run_code(cmd),
        Cmd::Dfr { cmd } => run_dfr(cmd),
        Cmd::Verify { cmd } => run_verify(cmd),
        Cmd::Report { cmd } => run_report(cmd),
    }
}

fn build_codebook(args: &CodeArgs) -> Result<Codebook, String> {
    let name = args
        .construction
        .as_deref()
        .ok_or("missing --construction")?;
    // "minal" with an explicit gamma targets the 2-D circulant family
    let name = if name == "minal" { "minal2" } else { name };
    lookup(name)
        .and_then(|c| c.build(args.q, args.gamma))
        .map_err(|e| e.to_string())
}

fn emit(out: &Option<String>, text: &str) -> Result<(), String> {
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| e.to_string()),
    }
}

fn run_code(cmd: CodeCmd) -> Result<ExitCode, String> {
    match cmd {
        CodeCmd::Build(args) => {
            let cb = build_codebook(&args)?;
            let json = serde_json::json!({ "schema": SCHEMA, "codebook": cb });
            emit(&args.out, &serde_json::to_string_pretty(&json).expect("serializable"))?;
            Ok(ExitCode::SUCCESS)
        }
        CodeCmd::Dump(args) => {
            let cb = build_codebook(&args)?;
            let mut text = String::new();
            for (label, cw) in cb.codewords().iter().enumerate() {
                text += &format!("{label:3}  {cw:?}\n");
            }
            emit(&args.out, text.trim_end())?;
            Ok(ExitCode::SUCCESS)
        }
        CodeCmd::Dmin { args, all } => {
            let names: Vec<&str> = if all {
                vec!["baseline", "mtd2", "minal4", "mld", "gtd4", "gtd8"]
            } else {
                vec![args.construction.as_deref().ok_or("missing --construction")?]
            };
            let mut text = String::from("construction,ell,d_min,d_min_over_q\n");
            for name in names {
                let cb = lookup(name)
                    .and_then(|c| c.build(args.q, args.gamma))
                    .map_err(|e| e.to_string())?;
                let d = cb.min_distance();
                text += &format!(
                    "{name},{},{d:.3},{:.5}\n",
                    cb.ell(),
                    d / args.q as f64
                );
            }
            emit(&args.out, text.trim_end())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_dfr(cmd: DfrCmd) -> Result<ExitCode, String> {
    match cmd {
        DfrCmd::Bound(args) => {
            let params = args.params.build()?;
            let method = match args.method.as_deref() {
                Some("exact") => Method::Exact,
                Some("chernoff") => Method::Chernoff,
                Some(other) => return Err(format!("unknown method '{other}'")),
                None => {
                    if params.ell() < 8 {
                        Method::Exact
                    } else {
                        Method::Chernoff
                    }
                }
            };
            if method == Method::Exact && params.ell() == 8 && !args.allow_long {
                return Err(
                    "exact evaluation at ell = 8 runs for hours; pass --allow-long to \
                     proceed, or use --method chernoff"
                        .into(),
                );
            }
            let report = dfr_union_bound(&params, method, Some(-(args.prune as f64)))
                .map_err(|e| e.to_string())?;
            eprintln!(
                "{} ell={} method={}: log2(DFR) = {:.3} ({:.1}s)",
                report.construction,
                report.ell,
                report.method,
                report.log2_dfr,
                report.wall_seconds
            );
            println!("{}", report.csv_row());
            if let Some(path) = &args.json {
                let json = serde_json::json!({ "schema": SCHEMA, "report": report });
                std::fs::write(path, serde_json::to_string_pretty(&json).expect("serializable"))
                    .map_err(|e| e.to_string())?;
            }
            if let Some(path) = &args.csv {
                std::fs::write(
                    path,
                    format!("{}\n{}\n", DfrReport::CSV_HEADER, report.csv_row()),
                )
                .map_err(|e| e.to_string())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        DfrCmd::Mc(args) => {
            let params = args.params.build()?;
            let report =
                dfr_monte_carlo(&params, args.trials, args.seed).map_err(|e| e.to_string())?;
            println!(
                "{} trials={} failures={} rate={:.3e} ci99=[{:.3e}, {:.3e}] ({:.1}s)",
                report.construction,
                report.trials,
                report.failures,
                report.rate,
                report.ci_low,
                report.ci_high,
                report.wall_seconds
            );
            if let Some(path) = &args.json {
                let json = serde_json::json!({ "schema": SCHEMA, "report": report });
                std::fs::write(path, serde_json::to_string_pretty(&json).expect("serializable"))
                    .map_err(|e| e.to_string())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

struct Suite {
    failures: u32,
}

impl Suite {
    fn new() -> Self {
        Suite { failures: 0 }
    }

    fn check(&mut self, name: &str, ok: bool, evidence: &str) {
        let tag = if ok { "pass" } else { "FAIL" };
        println!("[{tag}] {name}: {evidence}");
        if !ok {
            self.failures += 1;
        }
    }

    fn exit(self) -> ExitCode {
        if self.failures == 0 {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        }
    }
}

fn verify_splitting_suite(s: &mut Suite, n: usize, ell: usize, q: i64) -> Result<(), String> {
    let ok = verify_splitting(n, ell, q, &[-1, 0, 1], &[1, 2, 1]).map_err(|e| e.to_string())?;
    s.check(
        "splitting",
        ok,
        &format!("all {} strided blocks of a*b identically distributed (n={n}, q={q})", n / ell),
    );
    Ok(())
}

fn verify_theorem1_suite(s: &mut Suite, q: i64) -> Result<(), String> {
    let best = best_4point_code_dmin_sq(q);
    let mut best_minal = 0u128;
    let mut best_gamma = 0i64;
    for gamma in 0..(q + 1) / 2 {
        if let Ok(cb) = codebook::build_minal(q, 2, gamma) {
            let d = cb.min_distance_sq();
            if d > best_minal {
                best_minal = d;
                best_gamma = gamma;
            }
        }
    }
    s.check(
        "theorem1",
        best == best_minal,
        &format!(
            "exhaustive best 4-point d_min^2 = {best}, circulant gamma={best_gamma} reaches {best_minal} (q={q})"
        ),
    );
    Ok(())
}

fn verify_lemma1_suite(s: &mut Suite) -> Result<(), String> {
    let mut checked = 0u32;
    let mut ok = true;
    let mut witness = String::new();
    for &q in &[17i64, 31, 101] {
        for &ell in &[2usize, 4, 8] {
            let mut best = (0f64, 0i64);
            for gamma in 0..(q + 1) / 2 {
                let formula = minal_dmin_formula(q, ell, gamma).map_err(|e| e.to_string())?;
                match codebook::build_minal(q, ell, gamma) {
                    Ok(cb) => {
                        let exhaustive = cb.min_distance();
                        if (formula - exhaustive).abs() > 1e-9 {
                            ok = false;
                            witness = format!("q={q} ell={ell} gamma={gamma}: {formula} vs {exhaustive}");
                        }
                    }
                    Err(_) => {
                        // degenerate codebook (duplicate words): formula must say 0
                        if formula != 0.0 {
                            ok = false;
                            witness = format!("q={q} ell={ell} gamma={gamma}: degenerate but formula {formula}");
                        }
                    }
                }
                if formula > best.0 {
                    best = (formula, gamma);
                }
                checked += 1;
            }
            let gs = gamma_star(q, ell).map_err(|e| e.to_string())?;
            if (best.1 - gs).abs() > 1 {
                ok = false;
                witness = format!("q={q} ell={ell}: argmax gamma {} vs gamma* {gs}", best.1);
            }
        }
    }
    s.check(
        "lemma1",
        ok,
        &if ok {
            format!("formula = exhaustive d_min on {checked} (q, ell, gamma) cells; argmax within 1 of gamma*")
        } else {
            witness
        },
    );
    Ok(())
}

fn verify_lattice_suite(s: &mut Suite) -> Result<(), String> {
    let d4 = LatticeSpec::d4();
    let d4_count = d4.enumerate_mod_p(6).map_err(|e| e.to_string())?.len();
    s.check("lattice:d4", d4_count == 648, &format!("|D4 ∩ Z_6^4| = {d4_count}"));
    let e8 = LatticeSpec::e8_doubled();
    let pts = e8.enumerate_mod_p(4).map_err(|e| e.to_string())?;
    s.check("lattice:2e8", pts.len() == 256, &format!("|2E8 ∩ Z_4^8| = {}", pts.len()));
    let min_sq = e8.dmin_sq();
    s.check("lattice:2e8-min", min_sq == 8, &format!("shortest 2E8 vector norm^2 = {min_sq}"));
    Ok(())
}

fn verify_decoder_suite(s: &mut Suite) -> Result<(), String> {
    use rand::{Rng, SeedableRng};
    let q = 3329i64;
    let cb = lookup("gtd8")
        .and_then(|c| c.build(q, None))
        .map_err(|e| e.to_string())?;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(17);
    let trials = 100_000;
    let mut mismatches = 0u32;
    for _ in 0..trials {
        let point: Vec<i64> = (0..8).map(|_| rng.gen_range(0..q)).collect();
        let v = TorusVector::new(q, point).map_err(|e| e.to_string())?;
        let fast = decode_gtd8_fast(&cb, &v).map_err(|e| e.to_string())?;
        let slow = cb.decode(&v).map_err(|e| e.to_string())?;
        if fast != slow {
            mismatches += 1;
        }
    }
    s.check(
        "decoder",
        mismatches == 0,
        &format!("fast vs exhaustive 8-D decoding on {trials} random points, {mismatches} mismatches"),
    );
    Ok(())
}

fn run_verify(cmd: VerifyCmd) -> Result<ExitCode, String> {
    let mut s = Suite::new();
    match cmd {
        VerifyCmd::Splitting { n, ell, q } => verify_splitting_suite(&mut s, n, ell, q)?,
        VerifyCmd::Theorem1 { q } => verify_theorem1_suite(&mut s, q)?,
        VerifyCmd::Lemma1 => verify_lemma1_suite(&mut s)?,
        VerifyCmd::Lattice => verify_lattice_suite(&mut s)?,
        VerifyCmd::Decoder => verify_decoder_suite(&mut s)?,
        VerifyCmd::All => {
            verify_splitting_suite(&mut s, 4, 2, 17)?;
            verify_theorem1_suite(&mut s, 17)?;
            verify_lemma1_suite(&mut s)?;
            verify_lattice_suite(&mut s)?;
            verify_decoder_suite(&mut s)?;
        }
    }
    Ok(s.exit())
}

fn run_report(cmd: ReportCmd) -> Result<ExitCode, String> {
    let ReportCmd::Table2 { csv, svg, heavy, only } = cmd;
    let filter: Option<Vec<String>> =
        only.map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let rows = [
        ("mld", Method::Chernoff),
        ("baseline", Method::Exact),
        ("mtd2", if heavy { Method::Exact } else { Method::Chernoff }),
        ("minal4", Method::Chernoff),
        ("gtd4", Method::Chernoff),
        ("gtd8", Method::Chernoff),
    ];
    let mut out =
        String::from("schema,construction,ell,d_u,d_v,d_min_over_q,log2_dfr,method,cer\n");
    let mut points: Vec<(f64, f64, String)> = Vec::new();
    let mut warned = false;
    for preset in ["kyber1024", "kyber1024-du10"] {
        for (name, method) in rows {
            if let Some(f) = &filter {
                if !f.iter().any(|x| x == name) {
                    continue;
                }
            }
            let params = Params::preset(preset)
                .and_then(|p| p.with_construction(name))
                .map_err(|e| e.to_string())?;
            let dmin = params.codebook.min_distance() / params.q as f64;
            match dfr_union_bound(&params, method, Some(-400.0)) {
                Ok(r) => {
                    eprintln!(
                        "{name} d_u={}: log2 DFR {:.2} ({}) in {:.1}s",
                        params.d_u, r.log2_dfr, r.method, r.wall_seconds
                    );
                    out += &format!(
                        "{SCHEMA},{name},{},{},{},{dmin:.5},{:.3},{},{}\n",
                        params.ell(),
                        params.d_u,
                        params.d_v,
                        r.log2_dfr,
                        r.method,
                        params.cer()
                    );
                    if preset == "kyber1024" {
                        points.push((dmin, r.log2_dfr, name.to_string()));
                    }
                }
                Err(e) => {
                    eprintln!("warning: {name} d_u={} cell skipped: {e}", params.d_u);
                    out += &format!(
                        "{SCHEMA},{name},{},{},{},{dmin:.5},,skipped,{}\n",
                        params.ell(),
                        params.d_u,
                        params.d_v,
                        params.cer()
                    );
                    warned = true;
                }
            }
        }
    }
    std::fs::write(&csv, &out).map_err(|e| e.to_string())?;
    std::fs::write(&svg, scatter_svg(&points)).map_err(|e| e.to_string())?;
    eprintln!("wrote {csv} and {svg}{}", if warned { " (with skipped cells)" } else { "" });
    Ok(ExitCode::SUCCESS)
}

/// Minimal static scatter plot: d_min/q on x, log2 DFR on y.
fn scatter_svg(points: &[(f64, f64, String)]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let (x0, x1) = (0.35, 0.75);
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let y0 = ys.iter().cloned().fold(f64::INFINITY, f64::min) - 20.0;
    let y1 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 20.0;
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">minimum toroidal distance / q</text>\n\
         <text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\" font-size=\"13\">log2 DFR bound</text>\n",
        h - m, w - m, h - m, h - m,
        w / 2.0, h - 18.0,
        h / 2.0, h / 2.0
    );
    for (x, y, name) in points {
        s += &format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"steelblue\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{name}</text>\n",
            sx(*x), sy(*y), sx(*x) + 6.0, sy(*y) - 6.0
        );
    }
    s += "</svg>\n";
    s
}
