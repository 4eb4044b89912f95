//! primemagic: construct prime magic squares containing a prescribed prime
//! and run the measurable experiments behind the construction.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 search exhausted,
//! 3 small obstruction (q0 in {2, 3}), 4 resource budget exceeded.

mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use primemagic::{
    algebra::AlgebraError, bdh_variance, compute_w_normalization, core_mass,
    diagonal_direction_check, diagonal_mass_check, discrepancy_sum, enumerate_dilation,
    find_solution, joint_functional, local_density_table, restricted_mass, scan_primes,
    verify_prime_magic, Cutoff, LocalError, MagicSquare, SearchError, SearchStrategy, Star,
    StatsError, WeightKind,
};

use output::Manifest;

#[derive(Parser)]
#[command(name = "primemagic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output path prefix (default: the subcommand name)
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Args, Clone)]
struct CutoffArgs {
    /// Shrink factor s0 of the inner plateau K0
    #[arg(long, default_value_t = 0.6)]
    shrink: f64,
    /// Support factor s1 of K_chi
    #[arg(long, default_value_t = 0.85)]
    support: f64,
}

impl CutoffArgs {
    fn build(&self) -> Result<Cutoff, CliError> {
        Cutoff::new(self.shrink, self.support).map_err(|e| CliError::Invalid(e.to_string()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Find a prime magic square containing q0
    Construct {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value = "lex")]
        strategy: SearchStrategy,
        /// Enumeration slots to try before giving up
        #[arg(long, default_value_t = 100_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
    },
    /// Verify a comma-separated 9-entry square against q0
    Verify {
        #[arg(long)]
        q0: u64,
        /// Nine entries, row-major, comma-separated
        #[arg(long)]
        square: String,
    },
    /// Construct squares for every prime 5 <= q0 <= max
    Scan {
        #[arg(long)]
        max: u64,
        #[arg(long, default_value = "lex")]
        strategy: SearchStrategy,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
    },
    /// Exact local densities and singular-series factors per prime
    Local {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
        /// Largest prime p to tabulate
        #[arg(long, default_value_t = 199)]
        max: u64,
    },
    /// Core mass M1(X) and the joint functional
    Mass {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
        #[arg(long = "X")]
        x: u64,
        #[arg(long, default_value = "theta")]
        weight: WeightKind,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Joint residual functional C_{q0}(X)
    Joint {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
        #[arg(long = "X")]
        x: u64,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Restricted mass A_d for one modulus
    Restricted {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
        #[arg(long = "X")]
        x: u64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value = "1")]
        star: Star,
        #[arg(long, default_value = "theta")]
        weight: WeightKind,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Discrepancy sums A_d - g(d) M1 over d <= X^delta
    Discrepancy {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
        #[arg(long = "X")]
        x: u64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value = "theta")]
        weight: WeightKind,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Smoothed variance of primes in progressions, moduli q <= max
    Bdh {
        #[arg(long = "X")]
        x: u64,
        /// Largest modulus Q
        #[arg(long)]
        max: u64,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Diagonal change of variables: mass conservation and directions
    Diagcheck {
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 7)]
        w: u64,
        #[arg(long = "X")]
        x: u64,
        #[arg(long, default_value = "theta")]
        weight: WeightKind,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Export the NK dilation lattice with chi values as a CSV point cloud
    Region {
        #[arg(long = "X")]
        x: u64,
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Exhausted(u64),
    SmallObstruction(u64),
    Resource(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Io(_) => 1,
            CliError::Exhausted(_) => 2,
            CliError::SmallObstruction(_) => 3,
            CliError::Resource(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            CliError::Exhausted(n) => write!(f, "search exhausted after {n} candidates"),
            CliError::SmallObstruction(q) => {
                write!(f, "q0 = {q} is a structural obstruction: no prime magic square contains it")
            }
            CliError::Resource(m) => write!(f, "resource budget exceeded: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Algebra(AlgebraError::SmallObstruction(q)) => {
                CliError::SmallObstruction(q)
            }
            SearchError::BudgetOverflow(_) => CliError::Resource(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<LocalError> for CliError {
    fn from(e: LocalError) -> Self {
        match e {
            LocalError::Algebra(AlgebraError::SmallObstruction(q)) => {
                CliError::SmallObstruction(q)
            }
            LocalError::TooLarge(_) => CliError::Resource(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Algebra(AlgebraError::SmallObstruction(q)) => {
                CliError::SmallObstruction(q)
            }
            StatsError::Local(LocalError::Algebra(AlgebraError::SmallObstruction(q))) => {
                CliError::SmallObstruction(q)
            }
            StatsError::Resource(x) => CliError::Resource(format!("X = {x}")),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let prefix = cli.out.clone().unwrap_or_else(|| subcommand_name(&cli.command).to_string());
    let mut manifest = Manifest::new(subcommand_name(&cli.command), cli.threads);
    match cli.command {
        Command::Construct { q0, strategy, budget, w } => {
            manifest.set_search_params(q0, w, strategy.to_string(), budget);
            let outcome = find_solution(q0, strategy, budget, w)?;
            match outcome {
                primemagic::SearchOutcome::Found(record) => {
                    println!(
                        "q0={} found (t,u)=({},{}) S={} after {} candidates",
                        q0, record.t, record.u, record.magic_constant, record.candidates_tested
                    );
                    let csv = format!(
                        "schema_version,e11,e12,e13,e21,e22,e23,e31,e32,e33\n1,{}\n",
                        record.square
                    );
                    output::write_atomic(&format!("{prefix}.csv"), &csv)?;
                    output::write_json(&format!("{prefix}.json"), &record)?;
                    manifest.push_output(format!("{prefix}.csv"));
                    manifest.push_output(format!("{prefix}.json"));
                    manifest.write(&prefix)?;
                    Ok(())
                }
                primemagic::SearchOutcome::Exhausted { candidates_tested } => {
                    manifest.write(&prefix)?;
                    Err(CliError::Exhausted(candidates_tested))
                }
            }
        }
        Command::Verify { q0, square } => {
            let sq: MagicSquare = square
                .parse()
                .map_err(CliError::Invalid)?;
            let report = verify_prime_magic(&sq, q0);
            println!("{report}");
            output::write_json(&format!("{prefix}.json"), &report)?;
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            Ok(())
        }
        Command::Scan { max, strategy, budget, w } => {
            manifest.set_search_params(max, w, strategy.to_string(), budget);
            let summary = scan_primes(max, strategy, budget, w)?;
            let mut csv = String::from(
                "schema_version,q0,found,t,u,magic_constant,candidates_tested\n",
            );
            for r in &summary.rows {
                csv.push_str(&format!(
                    "1,{},{},{},{},{},{}\n",
                    r.q0, r.found, r.t, r.u, r.magic_constant, r.candidates_tested
                ));
            }
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            output::write_json(&format!("{prefix}.json"), &summary)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            println!(
                "scan: {}/{} primes 5..{} solved in {} ms",
                summary.found,
                summary.rows.len(),
                max,
                summary.wall_time_ms
            );
            if summary.all_found() {
                Ok(())
            } else {
                Err(CliError::Exhausted(budget))
            }
        }
        Command::Local { q0, w, max } => {
            let table = local_density_table(q0, w, max)?;
            manifest.set_norm(&compute_w_normalization(w, q0)?);
            let mut csv = String::from(
                "schema_version,p,core_count,g1_num,g1_den,g2_num,g2_den,gd_num,gd_den,sigma_p,beta_p\n",
            );
            for r in &table.rows {
                let frac = |g: Option<(u64, u64)>| match g {
                    Some((n, d)) => format!("{n},{d}"),
                    None => ",".to_string(),
                };
                csv.push_str(&format!(
                    "1,{},{},{},{},{},{},{}\n",
                    r.p,
                    r.core_count,
                    frac(r.g1),
                    frac(r.g2),
                    frac(r.g_delta),
                    r.sigma_p,
                    r.beta_p
                ));
            }
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            output::write_json(&format!("{prefix}.json"), &table)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            println!("local: {} rows up to p = {max}", table.rows.len());
            Ok(())
        }
        Command::Mass { q0, w, x, weight, cutoff } => {
            let c = cutoff.build()?;
            let norm = compute_w_normalization(w, q0)?;
            manifest.set_norm(&norm);
            manifest.set_lattice_params(x, weight.to_string(), cutoff.shrink, cutoff.support);
            let rep = core_mass(q0, &norm, &c, x, weight)?;
            let csv = format!(
                "schema_version,X,weight,m1,c_q0,core_prime_pairs,all_eight_prime_pairs,c_pred,m1_over_x2\n1,{},{},{},{},{},{},{},{}\n",
                rep.x, rep.weight, rep.m1, rep.c_q0, rep.core_prime_pairs,
                rep.all_eight_prime_pairs, rep.c_pred, rep.m1_over_x2
            );
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            output::write_json(&format!("{prefix}.json"), &rep)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            println!(
                "mass: M1({x}) = {:.6} ({} core-prime pairs), M1/X^2 = {:.4}",
                rep.m1, rep.core_prime_pairs, rep.m1_over_x2
            );
            Ok(())
        }
        Command::Joint { q0, w, x, cutoff } => {
            let c = cutoff.build()?;
            let norm = compute_w_normalization(w, q0)?;
            manifest.set_norm(&norm);
            manifest.set_lattice_params(x, "theta".into(), cutoff.shrink, cutoff.support);
            let value = joint_functional(q0, &norm, &c, x)?;
            let csv = format!("schema_version,X,c_q0\n1,{x},{value}\n");
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.write(&prefix)?;
            println!("joint: C_q0({x}) = {value:.6}");
            Ok(())
        }
        Command::Restricted { q0, w, x, d, star, weight, cutoff } => {
            let c = cutoff.build()?;
            let norm = compute_w_normalization(w, q0)?;
            manifest.set_norm(&norm);
            manifest.set_lattice_params(x, weight.to_string(), cutoff.shrink, cutoff.support);
            let a_d = restricted_mass(q0, &norm, &c, x, d, star, weight)?;
            let csv = format!("schema_version,X,d,star,a_d\n1,{x},{d},{star},{a_d}\n");
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.write(&prefix)?;
            println!("restricted: A_{d}^({star})({x}) = {a_d:.6}");
            Ok(())
        }
        Command::Discrepancy { q0, w, x, delta, weight, cutoff } => {
            let c = cutoff.build()?;
            let norm = compute_w_normalization(w, q0)?;
            manifest.set_norm(&norm);
            manifest.set_lattice_params(x, weight.to_string(), cutoff.shrink, cutoff.support);
            let rep = discrepancy_sum(q0, &norm, &c, x, delta, weight)?;
            let mut csv = String::from(
                "schema_version,d,moebius,a_d_1,pred_1,err_1,a_d_2,pred_2,err_2,a_d_delta,pred_delta,err_delta\n",
            );
            for r in &rep.rows {
                csv.push_str(&format!(
                    "1,{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.d,
                    r.moebius,
                    r.a_d[0], r.predicted[0], r.error[0],
                    r.a_d[1], r.predicted[1], r.error[1],
                    r.a_d[2], r.predicted[2], r.error[2],
                ));
            }
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            output::write_json(&format!("{prefix}.json"), &rep)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            println!(
                "discrepancy: {} moduli up to {}; sum|err|/M1 = {:.6} (star 1)",
                rep.rows.len(),
                rep.d_max,
                rep.aggregates[0].sum_abs_over_m1
            );
            Ok(())
        }
        Command::Bdh { x, max, cutoff } => {
            let c = cutoff.build()?;
            manifest.set_lattice_params(x, "lambda".into(), cutoff.shrink, cutoff.support);
            let rep = bdh_variance(x, max, &c)?;
            let csv = format!(
                "schema_version,X,Q,variance,xq,log_x_pow5,variance_over_xq\n1,{},{},{},{},{},{}\n",
                rep.x, rep.q_max, rep.variance, rep.xq, rep.log_x_pow5, rep.variance_over_xq
            );
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            output::write_json(&format!("{prefix}.json"), &rep)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            println!(
                "bdh: V = {:.4e}, V/(XQ) = {:.4} (reference (log X)^5 = {:.1})",
                rep.variance, rep.variance_over_xq, rep.log_x_pow5
            );
            Ok(())
        }
        Command::Diagcheck { q0, w, x, weight, cutoff } => {
            let c = cutoff.build()?;
            let norm = compute_w_normalization(w, q0)?;
            manifest.set_norm(&norm);
            manifest.set_lattice_params(x, weight.to_string(), cutoff.shrink, cutoff.support);
            let rep = diagonal_mass_check(q0, &norm, &c, x, weight)?;
            let dirs_ok = diagonal_direction_check(q0);
            let csv = format!(
                "schema_version,X,weight,m1,diagonal_total,abs_diff,rel_diff,directions_ok\n1,{},{},{},{},{},{},{}\n",
                rep.x, rep.weight, rep.m1, rep.diagonal_total, rep.abs_diff, rep.rel_diff, dirs_ok
            );
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            output::write_json(&format!("{prefix}.json"), &rep)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.push_output(format!("{prefix}.json"));
            manifest.write(&prefix)?;
            println!(
                "diagcheck: |sum Sdelta - M1| = {:.3e} (rel {:.3e}), directions {}",
                rep.abs_diff,
                rep.rel_diff,
                if dirs_ok { "ok" } else { "MISMATCH" }
            );
            Ok(())
        }
        Command::Region { x, cutoff } => {
            let c = cutoff.build()?;
            manifest.set_lattice_params(x, "none".into(), cutoff.shrink, cutoff.support);
            let mut csv = String::from("schema_version,t,u,chi\n");
            for (t, u) in enumerate_dilation(x) {
                let chi = c.chi(t as f64 / x as f64, u as f64 / x as f64);
                csv.push_str(&format!("1,{t},{u},{chi}\n"));
            }
            output::write_atomic(&format!("{prefix}.csv"), &csv)?;
            manifest.push_output(format!("{prefix}.csv"));
            manifest.write(&prefix)?;
            println!("region: dilation N = {x} exported");
            Ok(())
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Construct { .. } => "construct",
        Command::Verify { .. } => "verify",
        Command::Scan { .. } => "scan",
        Command::Local { .. } => "local",
        Command::Mass { .. } => "mass",
        Command::Joint { .. } => "joint",
        Command::Restricted { .. } => "restricted",
        Command::Discrepancy { .. } => "discrepancy",
        Command::Bdh { .. } => "bdh",
        Command::Diagcheck { .. } => "diagcheck",
        Command::Region { .. } => "region",
    }
}
