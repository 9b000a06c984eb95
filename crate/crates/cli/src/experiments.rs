//! Experiment drivers: one function per experiment, each turning a sweep
//! point into table rows.

use std::time::{SystemTime, UNIX_EPOCH};

use autoqec_core::analysis::{
    adiabatic_elimination_compare, gamma_grid, jump_action_check, r_squared_residual, Direction, JumpBasis, Sign,
};
use autoqec_core::code::{logical_error_rates, CatCode, HybridCode, LogicalRates};
use autoqec_core::concat::{concat_from_rates, CodeKind, RepetitionSpec};
use autoqec_core::liouville::BathParams;
use autoqec_core::metrology::{
    idle_then_qcrb, ramsey_closed_form, ramsey_final_state, ramsey_snr, RamseyConfig, SensingScenario, SQL,
};
use autoqec_core::qspace::{pauli, PauliAxis, SPIN};

use crate::config::{Experiment, Plan, Point};
use crate::pool::map_ordered;
use crate::table::{ResultTable, Value};
use crate::CliError;

const IDENTITY_TOL: f64 = 1e-8;
const R_SQUARED_TOL: f64 = 1e-12;

#[derive(Default)]
struct PointOut {
    rows: Vec<Vec<Value>>,
    warnings: Vec<String>,
    failures: Vec<String>,
}

impl PointOut {
    fn rows(rows: Vec<Vec<Value>>) -> Self {
        PointOut {
            rows,
            ..Default::default()
        }
    }
}

fn columns(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::GammaGrid => &["beta_r", "sx", "gamma"],
        Experiment::ErrorRates => &[
            "alpha",
            "gamma_x",
            "gamma_z",
            "gamma_z_decoded",
            "residual_x",
            "residual_z",
            "t_end",
            "max_trace_deviation",
            "min_eigenvalue",
            "restart_deviation",
        ],
        Experiment::DecodedRates => &["alpha", "t", "raw_error", "decoded_error"],
        Experiment::CatCompare => &["alpha", "hybrid_gamma_x", "hybrid_gamma_z", "cat_gamma_x", "cat_gamma_z"],
        Experiment::Concat => &["alpha", "d", "t_corr", "gamma_x", "gamma_z", "q_x", "q_z", "p_x", "p_z"],
        Experiment::BathCheck => &["alpha", "g", "gamma_b", "kappa_r", "t", "trace_distance"],
        Experiment::MetrologyQcrb => &["alpha", "t_window", "recovery_on", "qfi", "qcrb", "below_sql"],
        Experiment::MetrologySnr => &["alpha", "beta", "snr", "tan_4ab", "fidelity"],
        Experiment::VerifyAppendixB => &["alpha", "identity", "sign", "n", "residual", "pass"],
    }
}

/// Runs every sweep point of `plan` and assembles the table.
pub fn run_plan(plan: &Plan, workers: usize) -> Result<ResultTable, CliError> {
    let points = plan.points();
    let results = map_ordered(&points, workers, |p| run_point(plan, p));

    let base = columns(plan.experiment);
    // The swept parameter gets its own leading column unless already present.
    let extra = plan
        .sweep
        .as_ref()
        .map(|(axis, _)| axis.name())
        .filter(|name| !base.contains(name));
    let mut cols: Vec<&str> = extra.into_iter().collect();
    cols.extend_from_slice(base);
    let mut table = ResultTable::new(&cols);
    table.metadata = metadata(plan);

    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let out = r?;
        let lead = plan.sweep.as_ref().filter(|_| extra.is_some()).map(|(_, v)| v[i]);
        for row in out.rows {
            let mut full: Vec<Value> = lead.map(Value::Real).into_iter().collect();
            full.extend(row);
            table.push(full);
        }
        table.metadata.extend(out.warnings.into_iter().map(|w| format!("warning: {w}")));
        failures.extend(out.failures);
    }
    if !failures.is_empty() {
        table.failure = Some(failures.join("; "));
    }
    Ok(table)
}

fn metadata(plan: &Plan) -> Vec<String> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut m = vec![
        format!("autoqec {}", env!("CARGO_PKG_VERSION")),
        format!("experiment: {}", plan.experiment),
        format!("generated: {stamp}"),
        "units: rates in rad/s, times in s".to_string(),
        "config:".to_string(),
    ];
    m.extend(plan.echo().lines().map(|l| format!("  {l}")));
    m
}

fn run_point(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    match plan.experiment {
        Experiment::GammaGrid => gamma_grid_rows(plan, p),
        Experiment::ErrorRates => error_rate_rows(plan, p),
        Experiment::DecodedRates => decoded_rows(plan, p),
        Experiment::CatCompare => cat_compare_rows(plan, p),
        Experiment::Concat => concat_rows(plan, p),
        Experiment::BathCheck => bath_rows(plan, p),
        Experiment::MetrologyQcrb => qcrb_rows(plan, p),
        Experiment::MetrologySnr => snr_rows(p),
        Experiment::VerifyAppendixB => appendix_rows(plan, p),
    }
}

fn hybrid(plan: &Plan, alpha: f64) -> Result<HybridCode, CliError> {
    Ok(match plan.fock_truncation {
        Some(n) => HybridCode::with_truncation(alpha, n)?,
        None => HybridCode::new(alpha)?,
    })
}

fn rates(plan: &Plan, p: &Point, kind: CodeKind) -> Result<LogicalRates, CliError> {
    Ok(match kind {
        CodeKind::Hybrid => logical_error_rates(&hybrid(plan, p.alpha)?, &p.noise, &plan.rates)?,
        CodeKind::Cat => {
            let code = match plan.fock_truncation {
                Some(n) => CatCode::with_truncation(p.alpha, n)?,
                None => CatCode::new(p.alpha)?,
            };
            logical_error_rates(&code, &p.noise, &plan.rates)?
        }
    })
}

fn gamma_grid_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let g = &plan.config.grid;
    let grid = gamma_grid(p.alpha, (g.beta_min, g.beta_max), (g.sx_min, g.sx_max), g.resolution)?;
    let mut rows = Vec::new();
    for (i, &b) in grid.betas.iter().enumerate() {
        for (j, &sx) in grid.sxs.iter().enumerate() {
            rows.push(vec![b.into(), sx.into(), grid.values[i][j].into()]);
        }
    }
    Ok(PointOut::rows(rows))
}

fn error_rate_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let r = rates(plan, p, plan.kind)?;
    let t_end = r.x_series.times().last().copied().unwrap_or(0.0);
    Ok(PointOut::rows(vec![vec![
        p.alpha.into(),
        r.gamma_x.gamma.into(),
        r.gamma_z.gamma.into(),
        r.gamma_z_decoded.map_or(f64::NAN, |f| f.gamma).into(),
        r.gamma_x.residual.into(),
        r.gamma_z.residual.into(),
        t_end.into(),
        r.conservation.max_trace_deviation.into(),
        r.conservation.min_eigenvalue.into(),
        r.restart.map_or(f64::NAN, |c| c.deviation).into(),
    ]]))
}

fn decoded_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let r = rates(plan, p, CodeKind::Hybrid)?;
    let raw = r.x_series.real_column("raw_error").unwrap_or_default();
    let dec = r.x_series.real_column("decoded_error").unwrap_or_default();
    let rows = r
        .x_series
        .times()
        .iter()
        .zip(raw.iter().zip(&dec))
        .map(|(&t, (&a, &b))| vec![p.alpha.into(), t.into(), a.into(), b.into()])
        .collect();
    Ok(PointOut::rows(rows))
}

fn cat_compare_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let h = rates(plan, p, CodeKind::Hybrid)?;
    let c = rates(plan, p, CodeKind::Cat)?;
    Ok(PointOut::rows(vec![vec![
        p.alpha.into(),
        h.gamma_x.gamma.into(),
        h.gamma_z.gamma.into(),
        c.gamma_x.gamma.into(),
        c.gamma_z.gamma.into(),
    ]]))
}

fn concat_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let rep = RepetitionSpec::new(p.d, p.t_corr)?;
    let r = rates(plan, p, plan.kind)?;
    let row = concat_from_rates(p.alpha, r.gamma_x.gamma, r.gamma_z.gamma, &rep, r.conservation)?;
    Ok(PointOut::rows(vec![vec![
        row.alpha.into(),
        p.d.into(),
        p.t_corr.into(),
        row.gamma_x.into(),
        row.gamma_z.into(),
        row.q_x.into(),
        row.q_z.into(),
        row.p_x.into(),
        row.p_z.into(),
    ]]))
}

fn bath_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let code = hybrid(plan, p.alpha)?;
    let rho0 = match plan.initial.as_str() {
        "plus" => code.logical_plus().projector(),
        "minus" => code.logical_minus().projector(),
        "zero" => code.logical_zero().projector(),
        "one" => code.logical_one().projector(),
        _ => {
            let sz = pauli(PauliAxis::Z).lift(code.space(), SPIN)?;
            code.logical_plus().projector().conjugate_by(&sz)?
        }
    };
    let bath = BathParams::new(p.g, p.gamma_b, plan.config.bath.levels)?;
    let kappa_r = bath.effective_kappa_r();
    let t = plan.config.bath.duration.unwrap_or(5.0 / kappa_r);
    let c = adiabatic_elimination_compare(p.alpha, &bath, &rho0, t, plan.config.bath.samples, &plan.evolve)?;
    let dist = c.series.real_column("trace_distance").unwrap_or_default();
    let rows = c
        .series
        .times()
        .iter()
        .zip(&dist)
        .map(|(&t, &d)| vec![p.alpha.into(), p.g.into(), p.gamma_b.into(), kappa_r.into(), t.into(), d.into()])
        .collect();
    Ok(PointOut {
        rows,
        warnings: c.warning.into_iter().collect(),
        failures: Vec::new(),
    })
}

fn qcrb_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let mut rows = Vec::new();
    for &on in &plan.recovery {
        let s = SensingScenario {
            t_window: p.t_window,
            recovery_on: on,
            noise: p.noise,
            beta: 0.0,
        };
        let r = idle_then_qcrb(p.alpha, &s, &plan.evolve)?;
        rows.push(vec![
            p.alpha.into(),
            p.t_window.into(),
            on.into(),
            r.qfi.into(),
            r.qcrb.into(),
            (r.qcrb < SQL).into(),
        ]);
    }
    Ok(PointOut::rows(rows))
}

fn snr_rows(p: &Point) -> Result<PointOut, CliError> {
    let cfg = RamseyConfig::from_alpha(p.alpha);
    let mut rows = Vec::new();
    for &beta in &p.betas {
        let snr = ramsey_snr(&cfg, beta)?;
        let psi = ramsey_final_state(&cfg, beta)?;
        let fid = psi.fidelity(&ramsey_closed_form(p.alpha, beta, cfg.levels(beta))?)?;
        rows.push(vec![
            p.alpha.into(),
            beta.into(),
            snr.into(),
            (4.0 * p.alpha * beta).tan().into(),
            fid.into(),
        ]);
    }
    Ok(PointOut::rows(rows))
}

fn appendix_rows(plan: &Plan, p: &Point) -> Result<PointOut, CliError> {
    let n_max = plan.config.appendix.n_max;
    let report = jump_action_check(p.alpha, n_max)?;
    let mut out = PointOut::default();
    let add = |out: &mut PointOut, name: &str, sign: &str, n: usize, residual: f64, tol: f64| {
        let pass = residual <= tol;
        if !pass {
            out.failures
                .push(format!("α={}: {name} ({sign}, n={n}) residual {residual:e}", p.alpha));
        }
        out.rows.push(vec![
            p.alpha.into(),
            name.into(),
            sign.into(),
            n.into(),
            residual.into(),
            pass.into(),
        ]);
    };
    for c in &report.checks {
        let sign = match c.sign {
            Sign::Plus => "+",
            Sign::Minus => "-",
        };
        add(&mut out, &c.name, sign, c.n, c.residual, IDENTITY_TOL);
    }
    add(
        &mut out,
        "R²=α²−a²",
        "",
        n_max,
        r_squared_residual(p.alpha, report.levels)?,
        R_SQUARED_TOL,
    );
    let basis = JumpBasis::new(p.alpha, report.levels)?;
    for (dir, tag) in [(Direction::Forward, "fwd"), (Direction::Backward, "bwd")] {
        add(
            &mut out,
            &format!("gram:{tag}"),
            "",
            n_max,
            basis.gram_residual(dir, n_max)?,
            IDENTITY_TOL,
        );
        add(
            &mut out,
            &format!("completeness:{tag}"),
            "",
            n_max,
            basis.completeness_residual(dir)?,
            IDENTITY_TOL,
        );
    }
    Ok(out)
}
