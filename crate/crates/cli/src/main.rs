//! `odenorm`: invariants, normal forms and chains of `y'' = F(x, y, y')`.
//!
//! Exit status is 0 on success, 2 for usage errors (bad flags, malformed
//! expressions) and 3 when the mathematics refuses the input.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod input;

use input::CliError;

#[derive(Parser)]
#[command(
    name = "odenorm",
    version,
    about = "Point-equivalence toolkit for second-order ODEs y'' = F(x, y, u), u = y'"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the single-equation subcommands.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Right-hand side F(x, y, u) as a polynomial with rational coefficients
    #[arg(long)]
    pub ode: String,
    /// Recenter at the 1-jet x,y,u (rationals) before anything else
    #[arg(long, value_name = "X,Y,U")]
    pub at: Option<String>,
    /// Truncation weight W (x, u weigh 1, y weighs 2)
    #[arg(long, default_value_t = 8)]
    pub weight: u32,
    /// Emit a single JSON document instead of text
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tresse relative invariants I1, I2
    Invariants(Common),
    /// Flat, semi-flat or strongly nonflat at the origin
    Classify(Common),
    /// The manifold of solutions y = Φ(x, a, b)
    Solutions(Common),
    /// Normal form of the equation and the normalizing map
    #[command(name = "normal-form")]
    NormalForm {
        #[command(flatten)]
        common: Common,
        /// Initial model automorphism s,t,alpha,beta,r
        #[arg(long, value_name = "S,T,A,B,R")]
        params: Option<String>,
    },
    /// Unique normal form at a strongly nonflat point
    #[command(name = "special-normal-form")]
    SpecialNormalForm {
        #[command(flatten)]
        common: Common,
        /// Decimal digits for the scaling step
        #[arg(long, default_value_t = 40)]
        precision: u64,
    },
    /// Compare two equations at their origins
    Equivalent {
        #[arg(long)]
        ode1: String,
        #[arg(long)]
        ode2: String,
        #[arg(long, value_name = "X,Y,U")]
        at: Option<String>,
        #[arg(long, default_value_t = 8)]
        weight: u32,
        #[arg(long, default_value_t = 40)]
        precision: u64,
        #[arg(long)]
        json: bool,
    },
    /// Transform the equation by a point map
    Transform {
        #[command(flatten)]
        common: Common,
        /// Point map "f ; g" in x, y fixing the origin
        #[arg(long)]
        map: String,
    },
    /// Trace a chain with classical Runge-Kutta steps (CSV b,x,y,u)
    Chain {
        #[arg(long)]
        ode: String,
        /// Starting 1-jet x,y,u
        #[arg(long, value_name = "X,Y,U")]
        at: Option<String>,
        /// Direction label alpha,beta
        #[arg(long, value_name = "A,B")]
        dir: Option<String>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Invariants(c) => commands::invariants(&c),
        Command::Classify(c) => commands::classify(&c),
        Command::Solutions(c) => commands::solutions(&c),
        Command::NormalForm { common, params } => commands::normal_form(&common, params.as_deref()),
        Command::SpecialNormalForm { common, precision } => {
            commands::special_normal_form(&common, precision)
        }
        Command::Equivalent {
            ode1,
            ode2,
            at,
            weight,
            precision,
            json,
        } => commands::equivalent(&ode1, &ode2, at.as_deref(), weight, precision, json),
        Command::Transform { common, map } => commands::transform(&common, &map),
        Command::Chain {
            ode,
            at,
            dir,
            step,
            steps,
            json,
        } => commands::chain(&ode, at.as_deref(), dir.as_deref(), step, steps, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("odenorm: {e}");
            ExitCode::from(e.code())
        }
    }
}
