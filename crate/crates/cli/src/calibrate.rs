use std::path::PathBuf;

use longevity_core::calibrate::{
    calibrate_lambda, empirical_survival_curve, fit_drift, fit_volatility, FitOptions,
    MortalityTable,
};
use longevity_core::io::format_params;
use longevity_core::{MarketParams, ModelParams};

use crate::failure::{read_input, write_output, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// CSV of central death rates with header `age,year,mx`.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the fitted parameters.
    #[arg(long)]
    out: PathBuf,
    /// Ages whose cohort-diagonal variance is matched.
    #[arg(long, value_delimiter = ',', default_value = "60,65,70,75,80,85,90")]
    ages: Vec<u32>,
    /// Survival curves to fit as `age:years`, repeatable.
    #[arg(long = "cohort", value_parser = parse_cohort, default_values = ["65:31", "75:21"])]
    cohorts: Vec<(u32, u32)>,
    /// Seed for the multistart points.
    #[arg(long, default_value_t = 2008)]
    seed: u64,
    /// Number of Nelder-Mead starts per stage.
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Market price of longevity risk to write when not calibrating it.
    #[arg(long, conflicts_with = "calibrate_lambda")]
    lambda: Option<f64>,
    /// Solve for lambda from the longevity bond of age `--bond-x`.
    #[arg(long)]
    calibrate_lambda: bool,
    #[arg(long, default_value_t = 65)]
    bond_x: u32,
    #[arg(long, default_value_t = 25)]
    bond_term: u32,
}

fn parse_cohort(s: &str) -> Result<(u32, u32), String> {
    let (a, h) = s
        .split_once(':')
        .ok_or_else(|| format!("expected age:years, got `{s}`"))?;
    let age = a.trim().parse().map_err(|_| format!("bad age in `{s}`"))?;
    let years = h
        .trim()
        .parse()
        .map_err(|_| format!("bad horizon in `{s}`"))?;
    Ok((age, years))
}

pub fn run(args: Args) -> Result<(), Failure> {
    let text = read_input(&args.data)?;
    let table = MortalityTable::from_csv(text.as_bytes())
        .map_err(|e| Failure::from(e).context(format!("in {}", args.data.display())))?;
    if args.starts == 0 {
        return Err(Failure::usage("--starts must be at least 1"));
    }
    let opts = FitOptions {
        starts: args.starts,
        seed: args.seed,
        ..FitOptions::default()
    };

    let vol = fit_volatility(&table, &args.ages, &opts)?;
    let curves = args
        .cohorts
        .iter()
        .map(|&(x, h)| empirical_survival_curve(&table, x, h))
        .collect::<Result<Vec<_>, _>>()?;
    let drift = fit_drift(&curves, &vol, &opts)?;
    if !vol.converged || !drift.converged {
        log::warn!(
            "optimiser stopped before convergence (volatility {}, drift {})",
            vol.converged,
            drift.converged
        );
    }
    if drift.degenerate {
        log::warn!("drift fit is degenerate: the data carry no usable mortality signal");
    }
    let params = ModelParams::from_fits(&vol, &drift);

    let defaults = MarketParams::default();
    let mut market = MarketParams {
        r: args.r.unwrap_or(defaults.r),
        lambda: args.lambda.unwrap_or(defaults.lambda),
        delta: args.delta.unwrap_or(defaults.delta),
        omega: args.omega.unwrap_or(defaults.omega),
    };
    market.validate()?;
    params.validate(market.omega)?;

    let mut diagnostics = vec![("volatility", vol.sse), ("drift", drift.sse)];
    if args.calibrate_lambda {
        let cal = calibrate_lambda(&params, &market, args.bond_x, args.bond_term, (0.0, 30.0))?;
        if let Some(d) = &cal.diagnostic {
            log::warn!("{d}");
        }
        market.lambda = cal.lambda;
        diagnostics.push(("lambda", cal.gap() * cal.gap()));
        println!(
            "bond target {:.6}  risk-adjusted {:.6}  lambda {:.6}",
            cal.target, cal.price, cal.lambda
        );
    }

    write_output(&args.out, &format_params(&params, &market, &diagnostics))?;
    println!(
        "sigma1 {:e}  sigma {:e}  gamma {:.6}  rho {:.6}  sse {:e}",
        params.sigma1, params.sigma, params.gamma, params.rho, vol.sse
    );
    println!(
        "alpha1 {:.6}  alpha {:.6}  beta {:.6}  y1 {:e}  sse {:e}",
        params.alpha1, params.alpha, params.beta, params.y1, drift.sse
    );
    for (age, y2) in &params.y2_by_age {
        println!("y2_{age} {y2:e}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
