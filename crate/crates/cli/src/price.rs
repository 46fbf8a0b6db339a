use std::path::PathBuf;

use clap::ValueEnum;
use longevity_core::calibrate::longevity_bond_price;
use longevity_core::price::{
    annuity_price, cap_price, caplet_price, floorlet_price, sforward_price, sforward_rate,
    swap_value, CapletSpec, SForwardSpec, Strip, ValuationContext,
};
use longevity_core::sim::{mc_caplet_price, SimConfig};
use longevity_core::{CohortState, Execution, MarketParams, Measure, ModelParams};

use crate::failure::Failure;
use crate::load_params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Instrument {
    Sforward,
    Swap,
    Caplet,
    Cap,
    Floorlet,
    Annuity,
    Bond,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(value_enum)]
    instrument: Instrument,
    /// Parameters file (built-in defaults if omitted).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Cohort age at time 0.
    #[arg(long, default_value_t = 65)]
    x: u32,
    /// Maturity of a single S-forward, caplet or floorlet.
    #[arg(long = "T")]
    maturity: Option<f64>,
    /// Strike (flat across maturities for swaps and caps).
    #[arg(long = "K")]
    strike: Option<f64>,
    /// Last maturity of a swap or cap.
    #[arg(long = "That")]
    t_hat: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    notional: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Valuation time.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Realised survivor index at the valuation time.
    #[arg(long)]
    s_bar: Option<f64>,
    /// Factor values at the valuation time.
    #[arg(long)]
    y1: Option<f64>,
    #[arg(long)]
    y2: Option<f64>,
    /// Strikes at the swap rates (S-forward, swap).
    #[arg(long, conflicts_with = "strike")]
    at_inception: bool,
    /// Cap strikes at the best-estimate survival probabilities.
    #[arg(long, conflicts_with = "strike")]
    best_estimate: bool,
    /// Term of the longevity bond.
    #[arg(long, default_value_t = 25)]
    term: u32,
    /// Add a Monte Carlo estimate (caplet only).
    #[arg(long)]
    mc: bool,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 1.0 / 50.0)]
    dt: f64,
    #[arg(long, default_value_t = 2008)]
    seed: u64,
}

struct Output(Vec<(String, String)>);

impl Output {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:.6}"));
    }

    fn print(&self) {
        let width = self.0.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.0 {
            println!("{k:<width$}  {v}");
        }
    }
}

fn require<T>(v: Option<T>, flag: &str, what: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(format!("{what} needs {flag}")))
}

fn market_from(args: &Args, base: MarketParams) -> Result<MarketParams, Failure> {
    let m = MarketParams {
        r: args.r.unwrap_or(base.r),
        lambda: args.lambda.unwrap_or(base.lambda),
        delta: args.delta.unwrap_or(base.delta),
        omega: args.omega.unwrap_or(base.omega),
    };
    m.validate()?;
    Ok(m)
}

fn context<'a>(
    args: &Args,
    params: &'a ModelParams,
    market: &'a MarketParams,
) -> Result<ValuationContext<'a>, Failure> {
    if args.t == 0.0 {
        if args.s_bar.is_some_and(|s| s != 1.0) {
            return Err(Failure::usage("--s-bar must be 1 at t = 0"));
        }
        let mut state = CohortState::initial(params, args.x)?;
        state.y1 = args.y1.unwrap_or(state.y1);
        state.y2 = args.y2.unwrap_or(state.y2);
        return Ok(ValuationContext::new(1.0, state, params, market)?);
    }
    let what = "valuation after inception";
    let s_bar = require(args.s_bar, "--s-bar", what)?;
    let y1 = require(args.y1, "--y1", what)?;
    let y2 = require(args.y2, "--y2", what)?;
    let state = CohortState::at(args.x, args.t, y1, y2, market.omega)?;
    Ok(ValuationContext::new(s_bar, state, params, market)?)
}

pub fn run(args: Args) -> Result<(), Failure> {
    let (params, base) = load_params(args.params.as_ref())?;
    let market = market_from(&args, base)?;
    params.validate(market.omega)?;
    if args.mc && args.instrument != Instrument::Caplet {
        return Err(Failure::usage("--mc is only available for caplet"));
    }
    if args.mc && args.t != 0.0 {
        return Err(Failure::usage("--mc values at t = 0 only"));
    }
    if args.at_inception && !matches!(args.instrument, Instrument::Sforward | Instrument::Swap) {
        return Err(Failure::usage(
            "--at-inception applies to sforward and swap",
        ));
    }
    if args.best_estimate && args.instrument != Instrument::Cap {
        return Err(Failure::usage("--best-estimate applies to cap"));
    }

    let mut out = Output(Vec::new());
    let name = args
        .instrument
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    out.push("instrument", &name);
    out.push("x", args.x);
    out.push("lambda", market.lambda);
    out.push("r", market.r);
    if args.t != 0.0 {
        out.push("t", args.t);
    }

    match args.instrument {
        Instrument::Sforward => {
            let maturity = require(args.maturity, "--T", "sforward")?;
            let rate = sforward_rate(args.x, maturity, &params, &market)?;
            let strike = if args.at_inception {
                rate
            } else {
                require(args.strike, "--K or --at-inception", "sforward")?
            };
            let ctx = context(&args, &params, &market)?;
            let spec = SForwardSpec::new(args.x, maturity, strike, args.notional)?;
            out.push("T", maturity);
            out.num("K", strike);
            out.num("swap_rate", rate);
            out.num("price", sforward_price(&spec, &ctx)?);
        }
        Instrument::Swap => {
            let t_hat = require(args.t_hat, "--That", "swap")?;
            let spec = if args.at_inception {
                Strip::at_swap_rates(args.x, t_hat, args.notional, &params, &market)?
            } else {
                let k = require(args.strike, "--K or --at-inception", "swap")?;
                Strip::new(args.x, vec![k; t_hat as usize], args.notional)?
            };
            let ctx = context(&args, &params, &market)?;
            out.push("That", t_hat);
            out.num("price", swap_value(&spec, &ctx)?);
        }
        Instrument::Caplet | Instrument::Floorlet => {
            let what = if args.instrument == Instrument::Caplet {
                "caplet"
            } else {
                "floorlet"
            };
            let maturity = require(args.maturity, "--T", what)?;
            let strike = require(args.strike, "--K", what)?;
            let spec = CapletSpec::new(args.x, maturity, strike, args.notional)?;
            let ctx = context(&args, &params, &market)?;
            out.push("T", maturity);
            out.num("K", strike);
            let price = if args.instrument == Instrument::Caplet {
                caplet_price(&spec, &ctx)?
            } else {
                floorlet_price(&spec, &ctx)?
            };
            out.num("price", price);
            if args.mc {
                let sim = SimConfig::with_dt(args.dt);
                let est = mc_caplet_price(
                    &spec,
                    &params,
                    &market,
                    args.paths,
                    &sim,
                    args.seed,
                    Execution::default(),
                )?;
                out.num("mc_price", est.estimate);
                out.num("mc_std_error", est.std_error);
                out.push("mc_ci95", format!("[{:.6}, {:.6}]", est.ci95.0, est.ci95.1));
                out.push("mc_paths", est.num_paths);
            }
        }
        Instrument::Cap => {
            let t_hat = require(args.t_hat, "--That", "cap")?;
            let spec = if args.best_estimate {
                Strip::at_best_estimate(args.x, t_hat, args.notional, &params)?
            } else {
                let k = require(args.strike, "--K or --best-estimate", "cap")?;
                Strip::new(args.x, vec![k; t_hat as usize], args.notional)?
            };
            let ctx = context(&args, &params, &market)?;
            out.push("That", t_hat);
            out.num("price", cap_price(&spec, &ctx)?);
        }
        Instrument::Annuity => {
            if args.t != 0.0 {
                return Err(Failure::usage("annuity values at t = 0 only"));
            }
            out.num(
                "price",
                args.notional * annuity_price(args.x, &params, &market)?,
            );
        }
        Instrument::Bond => {
            if args.t != 0.0 {
                return Err(Failure::usage("bond values at t = 0 only"));
            }
            let real =
                longevity_bond_price(&params, &market, args.x, args.term, Measure::RealWorld)?;
            let adjusted =
                longevity_bond_price(&params, &market, args.x, args.term, market.risk_adjusted())?;
            out.push("term", args.term);
            out.num("real_world", args.notional * real);
            out.num("price", args.notional * adjusted);
        }
    }
    out.print();
    Ok(())
}
