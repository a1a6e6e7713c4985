use serde::Serialize;

use coopeq::analysis::{
    cooperation_report, crossing_scan, diversity_region, diversity_region_grid, ex_ante_p_common,
    ex_ante_p_diverse, pi_dagger_sensitivity, regime_bounds, solve_pi_dagger, Method,
    PiDaggerSensitivity, RegimeBounds, RegionGrid, RegionMask, CROSSING_SCAN,
};
use coopeq::common::{closed_form_common_uniform, solve_common_equilibria, Equilibrium, RootKind};
use coopeq::curve::uniform_grid;
use coopeq::diverse::{
    closed_form_diverse_uniform, solve_alpha_beta, solve_diverse_threshold_with, AlphaBeta,
    AlphaBetaMode, DiverseConfig,
};
use coopeq::extensions::asymmetric::{asymmetric_sensitivity, solve_asymmetric};
use coopeq::extensions::group::{solve_group_common, solve_group_diverse, GroupVariant};
use coopeq::montecarlo::{simulate, SimConfig, SimScenario, StrategySource};
use coopeq::{validate_params, Error, GameParams, Uniform};

use crate::args::*;
use crate::output::{json_bytes, num, opt, seal, Artifact, CliError, CliResult, RunOutput, Table};

/// Runs a command and returns its artifacts, manifest included.
pub fn run(command: &Command) -> CliResult<RunOutput> {
    let output = match command {
        Command::Common(a) => common(a)?,
        Command::Diverse(a) => diverse(a)?,
        Command::Compare(a) => compare(a)?,
        Command::Exante(a) => exante(a)?,
        Command::Asymmetric(a) => asymmetric(a)?,
        Command::Group(a) => group(a)?,
        Command::Sensitivity(a) => sensitivity(a)?,
        Command::Simulate(a) => simulate_cmd(a)?,
        Command::ReproduceAll(a) => reproduce_all(a)?,
        Command::Replay(_) => {
            return Err(CliError::Validation("replay cannot be nested".into()));
        }
    };
    seal(command, output)
}

fn ab_mode(a: AlphaBetaArg) -> AlphaBetaMode {
    match a {
        AlphaBetaArg::Exact => AlphaBetaMode::Exact,
        AlphaBetaArg::Approx => AlphaBetaMode::Approximate,
    }
}

fn variant(v: VariantArg) -> GroupVariant {
    match v {
        VariantArg::Consistent => GroupVariant::Consistent,
        VariantArg::AsPrinted => GroupVariant::AsPrinted,
    }
}

/// `n` beliefs `hi * i / n`; the right end is excluded.
fn belief_grid(n: usize, hi: f64) -> CliResult<Vec<f64>> {
    if n == 0 {
        return Err(CliError::Validation("belief grid needs at least one point".into()));
    }
    if !(hi > 0.0 && hi <= 1.0) {
        return Err(CliError::Validation(format!("belief grid end must lie in (0, 1] (got {hi})")));
    }
    Ok((0..n).map(|i| hi * i as f64 / n as f64).collect())
}

fn positive_tol(tol: f64) -> CliResult<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("tolerance must be positive (got {tol})")))
    }
}

fn column(kind: RootKind) -> usize {
    match kind {
        RootKind::InteriorLow | RootKind::CornerZero => 0,
        RootKind::InteriorHigh => 1,
        RootKind::CornerUpper => 2,
    }
}

fn common(a: &CommonArgs) -> CliResult<RunOutput> {
    positive_tol(a.tol)?;
    let params = validate_params(a.b, a.m)?;
    let dist = Uniform::new(a.ell_bar)?;
    let beliefs = match a.pi {
        Some(pi) => vec![pi],
        None => belief_grid(a.pi_grid, a.pi_max)?,
    };
    let mut table = Table::new(&["pi", "regime", "ell_low", "ell_high", "ell_corner"])?;
    for &pi in &beliefs {
        let set = solve_common_equilibria(pi, &params, &dist, a.tol)?;
        let chosen: Vec<&Equilibrium> = match a.select {
            SelectArg::All => set.roots.iter().collect(),
            SelectArg::Lowest => set.roots.first().into_iter().collect(),
            SelectArg::Highest => set.roots.last().into_iter().collect(),
        };
        let mut cols = [None; 3];
        for r in chosen {
            cols[column(r.kind)].get_or_insert(r.threshold);
        }
        table.row([num(pi), set.regime.as_str().into(), opt(cols[0]), opt(cols[1]), opt(cols[2])])?;
    }
    Ok(RunOutput {
        artifacts: vec![table.finish("common.csv")?],
        ..RunOutput::default()
    }
    .grid("pi", beliefs.len())
    .tol("root", a.tol))
}

#[derive(Serialize)]
struct DiverseSummary {
    alpha: f64,
    beta: f64,
    alpha_beta_mode: AlphaBetaMode,
    iterations: usize,
    residual: f64,
    contraction_gamma: f64,
    p_coop: f64,
    damped: bool,
    gamma_bound_exceeded: bool,
    /// Sup distance between the iterated curve and `1 - k / (alpha + beta ell)`.
    closed_form_max_gap: f64,
}

fn diverse(a: &DiverseArgs) -> CliResult<RunOutput> {
    positive_tol(a.tol)?;
    let params = validate_params(a.b, a.m)?;
    let u = Uniform::unit();
    let config = DiverseConfig {
        grid_n: a.grid_n,
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let sol = solve_diverse_threshold_with(&params, &u, &u, &config)?;
    let ab = solve_alpha_beta(&params, ab_mode(a.alpha_beta))?;
    let k = params.net_moral_cost();
    let mut table = Table::new(&["ell", "pi_star_d"])?;
    let mut gap = 0.0f64;
    for (&ell, &p) in sol.threshold.knots().iter().zip(sol.threshold.values()) {
        table.row([num(ell), num(p)])?;
        gap = gap.max((p - (1.0 - k / (ab.alpha + ab.beta * ell))).abs());
    }
    let summary = DiverseSummary {
        alpha: ab.alpha,
        beta: ab.beta,
        alpha_beta_mode: ab.mode,
        iterations: sol.iterations,
        residual: sol.residual,
        contraction_gamma: sol.contraction_gamma,
        p_coop: sol.coop_prob,
        damped: sol.damped,
        gamma_bound_exceeded: sol.gamma_bound_exceeded,
        closed_form_max_gap: gap,
    };
    Ok(RunOutput {
        artifacts: vec![
            table.finish("diverse.csv")?,
            Artifact {
                name: "diverse.json".into(),
                bytes: json_bytes(&summary)?,
            },
        ],
        ..RunOutput::default()
    }
    .grid("ell", a.grid_n)
    .tol("fixed_point", a.tol)
    .grid("max_iter", a.max_iter))
}

#[derive(Serialize)]
struct CompareSummary {
    pi_dagger: f64,
    alpha_beta: AlphaBeta,
    regime_bounds: RegimeBounds,
    /// Sign changes of the threshold gap strictly between the diverse kinks.
    crossings: usize,
}

fn compare(a: &CompareArgs) -> CliResult<RunOutput> {
    positive_tol(a.tol)?;
    let params = validate_params(a.b, a.m)?;
    let ab = solve_alpha_beta(&params, ab_mode(a.alpha_beta))?;
    let beliefs = belief_grid(a.pi_grid, 1.0)?;
    let mut table = Table::new(&["pi", "ell_star_c", "ell_star_d", "diff"])?;
    for &pi in &beliefs {
        let c = closed_form_common_uniform(pi, &params)?;
        let d = closed_form_diverse_uniform(pi, &params, &ab)?;
        table.row([num(pi), num(c), num(d), num(c - d)])?;
    }
    let scan = crossing_scan(&params, &ab, CROSSING_SCAN)?;
    let crossings = scan
        .windows(2)
        .filter(|w| (w[0].gap() > 0.0) != (w[1].gap() > 0.0))
        .count();
    let summary = CompareSummary {
        pi_dagger: solve_pi_dagger(&params, &ab, a.tol)?,
        alpha_beta: ab,
        regime_bounds: regime_bounds(&params, &ab),
        crossings,
    };
    Ok(RunOutput {
        artifacts: vec![
            table.finish("compare.csv")?,
            Artifact {
                name: "compare.json".into(),
                bytes: json_bytes(&summary)?,
            },
        ],
        ..RunOutput::default()
    }
    .grid("pi", beliefs.len())
    .grid("crossing_scan", CROSSING_SCAN)
    .tol("pi_dagger", a.tol))
}

#[derive(Serialize)]
struct RegionSummary {
    cells: usize,
    diverse_wins: usize,
    invalid: usize,
    rows_contiguous: bool,
}

fn exante(a: &ExanteArgs) -> CliResult<RunOutput> {
    match (a.b, a.m, a.b_range) {
        (Some(b), Some(m), None) => exante_pair(b, m),
        (None, None, Some(b_range)) => exante_region(a, b_range),
        _ => Err(CliError::Validation(
            "give either --b and --m, or --b-range".into(),
        )),
    }
}

fn exante_pair(b: f64, m: f64) -> CliResult<RunOutput> {
    let params = validate_params(b, m)?;
    let ab = solve_alpha_beta(&params, AlphaBetaMode::Approximate)?;
    let mut table = Table::new(&["b", "m", "method", "p_c", "p_d", "diverse_wins"])?;
    for (method, label) in [(Method::ClosedForm, "closed-form"), (Method::Quadrature, "quadrature")] {
        let pc = ex_ante_p_common(&params, method)?;
        let pd = ex_ante_p_diverse(&params, &ab, method)?;
        table.row([num(b), num(m), label.into(), num(pc), num(pd), (pd > pc).to_string()])?;
    }
    let report = cooperation_report(&params, AlphaBetaMode::Approximate)?;
    Ok(RunOutput {
        artifacts: vec![
            table.finish("exante.csv")?,
            Artifact {
                name: "exante.json".into(),
                bytes: json_bytes(&report)?,
            },
        ],
        ..RunOutput::default()
    })
}

fn exante_region(a: &ExanteArgs, b_range: (f64, f64)) -> CliResult<RunOutput> {
    let mask: RegionMask = match a.m_range {
        Some((m_lo, m_hi)) => {
            let bs = uniform_grid(b_range.0, b_range.1, a.cells)?;
            let ms = uniform_grid(m_lo, m_hi, a.cells)?;
            diversity_region(&bs, &ms)
        }
        None => diversity_region_grid(&RegionGrid {
            b_range,
            m_max: a.m_max,
            eps: a.eps,
            b_cells: a.cells,
            m_cells: a.cells,
        })?,
    };
    let mut table = Table::new(&["b", "m", "p_c", "p_d", "diverse_wins"])?;
    for c in mask.cells() {
        if c.valid {
            table.row([num(c.b), num(c.m), num(c.p_common), num(c.p_diverse), c.diverse_wins.to_string()])?;
        } else {
            table.row([num(c.b), num(c.m), String::new(), String::new(), String::new()])?;
        }
    }
    let summary = RegionSummary {
        cells: mask.cells().count(),
        diverse_wins: mask.cells().filter(|c| c.valid && c.diverse_wins).count(),
        invalid: mask.invalid_count(),
        rows_contiguous: mask.rows_contiguous(),
    };
    Ok(RunOutput {
        artifacts: vec![
            table.finish("exante.csv")?,
            Artifact {
                name: "exante.json".into(),
                bytes: json_bytes(&summary)?,
            },
        ],
        ..RunOutput::default()
    }
    .grid("b", a.cells)
    .grid("m", a.cells))
}

fn asymmetric(a: &AsymmetricArgs) -> CliResult<RunOutput> {
    positive_tol(a.tol)?;
    let params = validate_params(a.b, a.m)?;
    let dist = Uniform::new(a.ell_bar)?;
    let pi2s = match a.sweep_pi2 {
        Some(n) => uniform_grid(0.0, a.pi2_max, n)?,
        None => vec![a.pi2],
    };
    let mut table = Table::new(&["pi1", "pi2", "ell1_hat", "ell2_hat", "d_ell1_d_pi2"])?;
    for &pi2 in &pi2s {
        let eq = solve_asymmetric(a.pi1, pi2, &params, &dist, a.tol)?;
        // undefined at corners and where the step does not fit
        let slope = match asymmetric_sensitivity(a.pi1, pi2, &params, &dist, a.step) {
            Ok(s) => Some(s.d_ell1_d_pi2),
            Err(Error::CornerSolution(_) | Error::Domain(_)) => None,
            Err(e) => return Err(e.into()),
        };
        table.row([num(eq.pi1), num(eq.pi2), num(eq.ell1_hat), num(eq.ell2_hat), opt(slope)])?;
    }
    Ok(RunOutput {
        artifacts: vec![table.finish("asymmetric.csv")?],
        ..RunOutput::default()
    }
    .grid("pi2", pi2s.len())
    .tol("root", a.tol)
    .tol("derivative_step", a.step))
}

fn group(a: &GroupArgs) -> CliResult<RunOutput> {
    positive_tol(a.tol)?;
    let params = validate_params(a.b, a.m)?;
    let u = Uniform::unit();
    let v = variant(a.variant);
    let beliefs = belief_grid(a.pi_grid, 1.0)?;
    let mut table = Table::new(&["n", "pi", "ell_n_common", "ell_n_diverse"])?;
    for &n in &a.n {
        let div = solve_group_diverse(n, &params, &u, &u, v, a.tol)?;
        for &pi in &beliefs {
            let c = solve_group_common(n, pi, &params, &u, v, a.tol)?;
            table.row([n.to_string(), num(pi), num(c.threshold), num(div.curve.eval(pi)?)])?;
        }
    }
    Ok(RunOutput {
        artifacts: vec![table.finish("group.csv")?],
        ..RunOutput::default()
    }
    .grid("pi", beliefs.len())
    .tol("root", a.tol))
}

#[derive(Serialize)]
struct SensitivitySummary {
    b: f64,
    m: f64,
    pi_dagger: f64,
    derivatives: PiDaggerSensitivity,
}

/// Crossing belief, or `None` where the comparison is undefined.
fn pi_dagger_at(b: f64, m: f64, tol: f64) -> CliResult<Option<f64>> {
    let params = match GameParams::new(b, m) {
        Ok(p) if b >= 2.0 => p,
        _ => return Ok(None),
    };
    let ab = solve_alpha_beta(&params, AlphaBetaMode::Approximate)?;
    Ok(Some(solve_pi_dagger(&params, &ab, tol)?))
}

fn sensitivity(a: &SensitivityArgs) -> CliResult<RunOutput> {
    positive_tol(a.tol)?;
    let params = validate_params(a.b, a.m)?;
    let mut table = Table::new(&["axis", "b", "m", "pi_dagger"])?;
    for b in uniform_grid(a.b_range.0, a.b_range.1, a.points)? {
        table.row(["b".into(), num(b), num(a.m), opt(pi_dagger_at(b, a.m, a.tol)?)])?;
    }
    for m in uniform_grid(a.m_range.0, a.m_range.1, a.points)? {
        table.row(["m".into(), num(a.b), num(m), opt(pi_dagger_at(a.b, m, a.tol)?)])?;
    }
    let ab = solve_alpha_beta(&params, AlphaBetaMode::Approximate)?;
    let summary = SensitivitySummary {
        b: a.b,
        m: a.m,
        pi_dagger: solve_pi_dagger(&params, &ab, a.tol)?,
        derivatives: pi_dagger_sensitivity(&params, SENSITIVITY_STEP)?,
    };
    Ok(RunOutput {
        artifacts: vec![
            table.finish("sensitivity.csv")?,
            Artifact {
                name: "sensitivity.json".into(),
                bytes: json_bytes(&summary)?,
            },
        ],
        ..RunOutput::default()
    }
    .grid("points", a.points)
    .tol("pi_dagger", a.tol)
    .tol("relative_step", SENSITIVITY_STEP))
}

const SENSITIVITY_STEP: f64 = 1e-4;

fn simulate_cmd(a: &SimulateArgs) -> CliResult<RunOutput> {
    let params = validate_params(a.b, a.m)?;
    let (scenario, loss) = match a.scenario {
        ScenarioArg::Common => (SimScenario::Common { pi: a.pi }, Uniform::new(a.ell_bar)?),
        ScenarioArg::Diverse => (SimScenario::Diverse, Uniform::unit()),
        ScenarioArg::Asymmetric => (
            SimScenario::Asymmetric { pi1: a.pi1, pi2: a.pi2 },
            Uniform::new(a.ell_bar)?,
        ),
    };
    let config = SimConfig {
        n_samples: a.n_samples,
        seed: a.seed,
        scenario,
        strategy_source: StrategySource::Analytic,
    };
    let report = simulate(&config, &params, &loss, &Uniform::unit())?;
    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: "simulate.json".into(),
            bytes: json_bytes(&report)?,
        }],
        seed: Some(a.seed),
        ..RunOutput::default()
    }
    .grid("n_samples", a.n_samples as usize))
}

/// Every plot-ready data set, each in its own subdirectory.
pub fn reproduce_plan(a: &ReproduceArgs) -> Vec<(&'static str, Command)> {
    let sim = |scenario, b, m, pi| SimulateArgs {
        scenario,
        n_samples: a.n_samples,
        seed: a.seed,
        b,
        m,
        ell_bar: 8.0,
        pi,
        pi1: 0.03,
        pi2: 0.05,
    };
    vec![
        (
            "regimes-common",
            Command::Common(CommonArgs {
                b: 3.0,
                m: 50.0,
                ell_bar: 8.0,
                pi: None,
                pi_grid: 400,
                pi_max: 0.1,
                tol: 1e-12,
                select: SelectArg::All,
            }),
        ),
        (
            "thresholds-common",
            Command::Common(CommonArgs {
                b: 2.0,
                m: 8.0,
                ell_bar: 1.0,
                pi: None,
                pi_grid: 500,
                pi_max: 1.0,
                tol: 1e-12,
                select: SelectArg::All,
            }),
        ),
        (
            "thresholds-diverse",
            Command::Diverse(DiverseArgs {
                b: 2.0,
                m: 8.0,
                grid_n: 1001,
                tol: 1e-10,
                max_iter: 10_000,
                alpha_beta: AlphaBetaArg::Approx,
            }),
        ),
        (
            "thresholds-compare",
            Command::Compare(CompareArgs {
                b: 2.0,
                m: 8.0,
                pi_grid: 500,
                alpha_beta: AlphaBetaArg::Approx,
                tol: 1e-13,
            }),
        ),
        (
            "asymmetric-sweep",
            Command::Asymmetric(AsymmetricArgs {
                b: 3.0,
                m: 50.0,
                ell_bar: 8.0,
                pi1: 0.03,
                pi2: 0.05,
                sweep_pi2: Some(101),
                pi2_max: 0.2,
                step: 1e-5,
                tol: 1e-13,
            }),
        ),
        (
            "crossing-sensitivity",
            Command::Sensitivity(SensitivityArgs {
                b: 3.0,
                m: 20.0,
                b_range: (2.0, 6.0),
                m_range: (10.0, 60.0),
                points: 101,
                tol: 1e-13,
            }),
        ),
        (
            "exante-region",
            Command::Exante(ExanteArgs {
                b: None,
                m: None,
                b_range: Some((2.0, 6.0)),
                m_range: None,
                m_max: 60.0,
                eps: 0.01,
                cells: 100,
            }),
        ),
        (
            "group",
            Command::Group(GroupArgs {
                n: vec![1, 2, 5, 10],
                b: 2.0,
                m: 8.0,
                variant: VariantArg::Consistent,
                pi_grid: 101,
                tol: 1e-12,
            }),
        ),
        ("simulate-common", Command::Simulate(sim(ScenarioArg::Common, 3.0, 50.0, 0.02))),
        ("simulate-diverse", Command::Simulate(sim(ScenarioArg::Diverse, 2.0, 8.0, 0.02))),
    ]
}

fn reproduce_all(a: &ReproduceArgs) -> CliResult<RunOutput> {
    let mut out = RunOutput {
        seed: Some(a.seed),
        ..RunOutput::default()
    };
    for (dir, command) in reproduce_plan(a) {
        let sub = run(&command)?;
        out.artifacts.extend(sub.artifacts.into_iter().map(|art| Artifact {
            name: format!("{dir}/{}", art.name),
            bytes: art.bytes,
        }));
    }
    Ok(out.grid("n_samples", a.n_samples as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(out: &RunOutput, name: &str) -> String {
        let a = out.artifacts.iter().find(|a| a.name == name).unwrap();
        String::from_utf8(a.bytes.clone()).unwrap()
    }

    fn common_args(b: f64, m: f64, ell_bar: f64) -> CommonArgs {
        CommonArgs {
            b,
            m,
            ell_bar,
            pi: None,
            pi_grid: 200,
            pi_max: 1.0,
            tol: 1e-12,
            select: SelectArg::All,
        }
    }

    #[test]
    fn common_triple_row() {
        let cmd = Command::Common(CommonArgs {
            pi: Some(0.05),
            ..common_args(3.0, 50.0, 8.0)
        });
        let out = run(&cmd).unwrap();
        let csv = text(&out, "common.csv");
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 2);
        let fields: Vec<&str> = rows[1].split(',').collect();
        assert_eq!(fields[1], "triple");
        assert!(fields[2..].iter().all(|f| !f.is_empty()));
        assert!(out.artifacts.iter().any(|a| a.name == "common.manifest.json"));
    }

    #[test]
    fn lowest_selection_drops_other_roots() {
        let cmd = Command::Common(CommonArgs {
            pi: Some(0.05),
            select: SelectArg::Lowest,
            ..common_args(3.0, 50.0, 8.0)
        });
        let csv = text(&run(&cmd).unwrap(), "common.csv");
        let fields: Vec<String> = csv.lines().nth(1).unwrap().split(',').map(String::from).collect();
        assert!(!fields[2].is_empty() && fields[3].is_empty() && fields[4].is_empty());
    }

    #[test]
    fn belief_grid_excludes_right_end() {
        let g = belief_grid(4, 1.0).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75]);
        assert!(belief_grid(0, 1.0).is_err());
        assert!(belief_grid(3, 1.5).is_err());
    }

    #[test]
    fn exante_requires_a_mode() {
        let args = ExanteArgs {
            b: None,
            m: None,
            b_range: None,
            m_range: None,
            m_max: 60.0,
            eps: 0.01,
            cells: 10,
        };
        let err = run(&Command::Exante(args)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn reproduce_plan_covers_every_data_set() {
        let plan = reproduce_plan(&ReproduceArgs {
            n_samples: 10,
            seed: 1,
        });
        for prefix in ["regimes", "thresholds", "asymmetric", "crossing", "exante", "group", "simulate"] {
            assert!(plan.iter().any(|(d, _)| d.starts_with(prefix)), "{prefix}");
        }
    }
}
