use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COOPEQ_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "coopeq", version, about = "Cooperation equilibria under common and diverse beliefs")]
pub struct Cli {
    /// Directory receiving CSV, JSON and manifest files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Symmetric thresholds under a common belief.
    Common(CommonArgs),
    /// Belief threshold curve under diverse beliefs (uniform losses and beliefs).
    Diverse(DiverseArgs),
    /// Common versus diverse thresholds over beliefs, with the crossing belief.
    Compare(CompareArgs),
    /// Ex-ante cooperation probabilities, for one pair or over a region.
    Exante(ExanteArgs),
    /// Asymmetric common beliefs.
    Asymmetric(AsymmetricArgs),
    /// Cutoffs in the n-partner group game.
    Group(GroupArgs),
    /// Crossing belief as b and m vary.
    Sensitivity(SensitivityArgs),
    /// Monte Carlo check of an equilibrium profile.
    Simulate(SimulateArgs),
    /// Regenerates every plot-ready data set into subdirectories of the output directory.
    ReproduceAll(ReproduceArgs),
    /// Re-runs the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Common(_) => "common",
            Command::Diverse(_) => "diverse",
            Command::Compare(_) => "compare",
            Command::Exante(_) => "exante",
            Command::Asymmetric(_) => "asymmetric",
            Command::Group(_) => "group",
            Command::Sensitivity(_) => "sensitivity",
            Command::Simulate(_) => "simulate",
            Command::ReproduceAll(_) => "reproduce-all",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectArg {
    All,
    Lowest,
    Highest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaBetaArg {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Consistent,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioArg {
    Common,
    Diverse,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 50.0)]
    pub m: f64,
    /// Upper bound of the uniform loss support.
    #[arg(long, default_value_t = 8.0)]
    pub ell_bar: f64,
    /// Single belief; overrides the grid.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Number of beliefs `pi_max * i / N`, `i = 0..N`.
    #[arg(long, default_value_t = 200)]
    pub pi_grid: usize,
    /// Right end of the belief grid (exclusive).
    #[arg(long, default_value_t = 1.0)]
    pub pi_max: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Which roots to report when several coexist.
    #[arg(long, value_enum, default_value_t = SelectArg::All)]
    pub select: SelectArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiverseArgs {
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 8.0)]
    pub m: f64,
    #[arg(long, default_value_t = 1001)]
    pub grid_n: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = AlphaBetaArg::Approx)]
    pub alpha_beta: AlphaBetaArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 8.0)]
    pub m: f64,
    /// Number of beliefs `i / N`, `i = 0..N`.
    #[arg(long, default_value_t = 500)]
    pub pi_grid: usize,
    #[arg(long, value_enum, default_value_t = AlphaBetaArg::Approx)]
    pub alpha_beta: AlphaBetaArg,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExanteArgs {
    /// Single pair mode; requires `--m`.
    #[arg(long, requires = "m", conflicts_with = "b_range")]
    pub b: Option<f64>,
    #[arg(long, requires = "b")]
    pub m: Option<f64>,
    /// Region mode: `LO:HI` for b.
    #[arg(long, value_parser = parse_range)]
    pub b_range: Option<(f64, f64)>,
    /// Region mode: `LO:HI` for m on a fixed product grid. Without it each
    /// row starts just above `b - 1` and runs to `--m-max`.
    #[arg(long, value_parser = parse_range, requires = "b_range")]
    pub m_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 60.0)]
    pub m_max: f64,
    /// Gap between `b - 1` and the first m of each row.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Grid points per axis in region mode.
    #[arg(long, default_value_t = 100)]
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AsymmetricArgs {
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 50.0)]
    pub m: f64,
    #[arg(long, default_value_t = 8.0)]
    pub ell_bar: f64,
    #[arg(long, default_value_t = 0.03)]
    pub pi1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub pi2: f64,
    /// Sweep `pi2` over N points of `[0, --pi2-max]` instead of the single value.
    #[arg(long)]
    pub sweep_pi2: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub pi2_max: f64,
    /// Belief step for the finite-difference derivative.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GroupArgs {
    /// Partner counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 5, 10])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 8.0)]
    pub m: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Consistent)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 101)]
    pub pi_grid: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SensitivityArgs {
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 20.0)]
    pub m: f64,
    /// b values swept at fixed m, `LO:HI`.
    #[arg(long, value_parser = parse_range, default_value = "2:6")]
    pub b_range: (f64, f64),
    /// m values swept at fixed b, `LO:HI`.
    #[arg(long, value_parser = parse_range, default_value = "10:60")]
    pub m_range: (f64, f64),
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Common)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 50.0)]
    pub m: f64,
    /// Loss support for the common and asymmetric scenarios; the diverse
    /// scenario always uses the unit interval.
    #[arg(long, default_value_t = 8.0)]
    pub ell_bar: f64,
    #[arg(long, default_value_t = 0.02)]
    pub pi: f64,
    #[arg(long, default_value_t = 0.03)]
    pub pi1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub pi2: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReproduceArgs {
    /// Samples per Monte Carlo scenario.
    #[arg(long, default_value_t = 1_000_000)]
    pub n_samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("range must satisfy LO < HI (got {lo}:{hi})"));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn range_parser() {
        assert_eq!(parse_range("2:6").unwrap(), (2.0, 6.0));
        assert!(parse_range("6:2").is_err());
        assert!(parse_range("2").is_err());
    }

    #[test]
    fn commands_round_trip_through_json() {
        let cli = Cli::try_parse_from(["coopeq", "group", "--n", "1,3", "--variant", "as-printed"]).unwrap();
        let json = serde_json::to_string(&cli.command).unwrap();
        let back: Command = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cli.command);
    }
}
