//! Python bindings for the hysteretic-lattice switching laboratory.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rattling::admissibility::{
    admissibility_pipeline, assemble_constants, find_n0, AssemblyOptions, Verdict,
};
use rattling::analysis::{candidate_step, extract_qn, CandidateState};
use rattling::green::{eval_green, eval_green_bessel, eval_ydot_bessel, GreenMethod};
use rattling::kernels::{eval_kernel, integral_i, IntegralForm, KernelId, ProfileId};
use rattling::rate::solve_a;
use rattling::sim::{eval_grad_u, eval_u, ode_oracle, simulate, Params, DEFAULT_ROOT_TOL};

fn value_err(msg: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(msg.to_string())
}

fn runtime_err(msg: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(msg.to_string())
}

fn build_params(c: f64, h1: f64, h2: f64, tau0: f64) -> PyResult<Params> {
    Params::new(c, h1, h2, tau0).map_err(value_err)
}

fn kernel_id(name: &str) -> PyResult<KernelId> {
    Ok(match name {
        "h" => KernelId::H,
        "f" => KernelId::F,
        "g" => KernelId::G,
        "ftilde" => KernelId::Ftilde,
        "h1" | "h'" => KernelId::HDeriv(1),
        "h2" | "h''" => KernelId::HDeriv(2),
        "h3" | "h'''" => KernelId::HDeriv(3),
        "h4" | "h''''" => KernelId::HDeriv(4),
        _ => return Err(value_err(format!("unknown kernel {name:?}"))),
    })
}

fn profile_id(name: &str) -> PyResult<ProfileId> {
    Ok(match name {
        "F" => ProfileId::F,
        "G" => ProfileId::G,
        "H" => ProfileId::H,
        "H1" => ProfileId::H1,
        "Ftilde" => ProfileId::Ftilde,
        _ => return Err(value_err(format!("unknown profile {name:?}"))),
    })
}

/// kernel(name, x): one of h, f, g, ftilde, h1..h4 (derivatives of h).
#[pyfunction]
fn kernel(name: &str, x: f64) -> PyResult<f64> {
    eval_kernel(kernel_id(name)?, x).map_err(value_err)
}

/// integral(profile, a, form="substituted", tol=1e-12): I_F, I_G or I_H.
#[pyfunction]
#[pyo3(signature = (profile, a, form = "substituted", tol = 1e-12))]
fn integral(profile: &str, a: f64, form: &str, tol: f64) -> PyResult<f64> {
    let form = match form {
        "original" => IntegralForm::Original,
        "substituted" => IntegralForm::Substituted,
        _ => return Err(value_err("form must be 'original' or 'substituted'")),
    };
    Ok(integral_i(profile_id(profile)?, a, form, tol)
        .map_err(value_err)?
        .value)
}

/// rate(c, h1, tol=1e-12) -> dict with a and the three equation residuals.
#[pyfunction]
#[pyo3(signature = (c, h1, tol = 1e-12))]
fn rate(py: Python<'_>, c: f64, h1: f64, tol: f64) -> PyResult<PyObject> {
    let params = build_params(c, h1, 0.0, 1.0)?;
    let sol = solve_a(&params, tol).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("a", sol.a)?;
    d.set_item("residual_f", sol.residual_f)?;
    d.set_item("residual_g", sol.residual_g)?;
    d.set_item("residual_h", sol.residual_h)?;
    d.set_item("iterations", sol.iterations)?;
    Ok(d.into())
}

/// green(n, t, tol=1e-12, method="fourier") -> dict of the six values.
#[pyfunction]
#[pyo3(signature = (n, t, tol = 1e-12, method = "fourier"))]
fn green(py: Python<'_>, n: i64, t: f64, tol: f64, method: &str) -> PyResult<PyObject> {
    let e = match method {
        "fourier" => eval_green(n, t, tol).map_err(runtime_err)?,
        "bessel" => eval_green_bessel(n, t).map_err(runtime_err)?,
        _ => return Err(value_err("method must be 'fourier' or 'bessel'")),
    };
    let d = PyDict::new(py);
    d.set_item("n", e.n)?;
    d.set_item("t", e.t)?;
    d.set_item("y", e.y)?;
    d.set_item("ydot", e.ydot)?;
    d.set_item("yddot", e.yddot)?;
    d.set_item("grad_y", e.grad_y)?;
    d.set_item("grad_ydot", e.grad_ydot)?;
    d.set_item("grad_yddot", e.grad_yddot)?;
    d.set_item(
        "method",
        match e.method {
            GreenMethod::Fourier => "fourier",
            GreenMethod::Bessel => "bessel",
        },
    )?;
    d.set_item("quad_points", e.quad_points)?;
    Ok(d.into())
}

/// ydot_bessel(n, t): e^{-2t} I_n(2t), the independent oracle for green()["ydot"].
#[pyfunction]
fn ydot_bessel(n: i64, t: f64) -> f64 {
    eval_ydot_bessel(n, t)
}

fn history_to_py(py: Python<'_>, hist: &rattling::sim::SwitchHistory) -> PyResult<PyObject> {
    let d = PyDict::new(py);
    d.set_item("a", hist.a)?;
    d.set_item("c", hist.params.c)?;
    d.set_item("h1", hist.params.h1)?;
    d.set_item("h2", hist.params.h2)?;
    d.set_item("horizon", hist.horizon)?;
    d.set_item("warnings", hist.warnings.clone())?;
    let records: Vec<PyObject> = hist
        .records
        .iter()
        .map(|r| {
            let rd = PyDict::new(py);
            rd.set_item("n", r.n).unwrap();
            rd.set_item("t", r.t).unwrap();
            rd.set_item("q", r.q).unwrap();
            rd.set_item("grad", r.grad).unwrap();
            rd.into()
        })
        .collect();
    d.set_item("records", records)?;
    d.set_item("non_switchers", hist.non_switchers.clone())?;
    Ok(d.into())
}

/// run_simulation(c, h1, n_max, h2=0.0, tau0=1.0, root_tol=1e-10) -> history dict.
#[pyfunction]
#[pyo3(signature = (c, h1, n_max, h2 = 0.0, tau0 = 1.0, root_tol = DEFAULT_ROOT_TOL))]
fn run_simulation(
    py: Python<'_>,
    c: f64,
    h1: f64,
    n_max: u32,
    h2: f64,
    tau0: f64,
    root_tol: f64,
) -> PyResult<PyObject> {
    let params = build_params(c, h1, h2, tau0)?;
    let hist = simulate(&params, n_max, root_tol).map_err(runtime_err)?;
    history_to_py(py, &hist)
}

/// run_ode_oracle(c, h1, radius, t_end, dt, ...) -> history dict from the
/// truncated direct integrator.
#[pyfunction]
#[pyo3(signature = (c, h1, radius, t_end, dt, h2 = 0.0, tau0 = 1.0))]
fn run_ode_oracle(
    py: Python<'_>,
    c: f64,
    h1: f64,
    radius: u32,
    t_end: f64,
    dt: f64,
    h2: f64,
    tau0: f64,
) -> PyResult<PyObject> {
    let params = build_params(c, h1, h2, tau0)?;
    let hist = ode_oracle(&params, radius, t_end, dt).map_err(runtime_err)?;
    history_to_py(py, &hist)
}

/// solution_value(c, h1, n, t, switch_times): exact u_n(t) given the recorded
/// switching times t_0 < t_1 < ... (list indexed by node).
#[pyfunction]
#[pyo3(signature = (c, h1, n, t, switch_times, h2 = 0.0))]
fn solution_value(c: f64, h1: f64, n: i64, t: f64, switch_times: Vec<f64>, h2: f64) -> PyResult<f64> {
    let params = build_params(c, h1, h2, 1.0)?;
    let hist = times_to_history(&params, &switch_times)?;
    Ok(eval_u(n, t, &hist, &params))
}

/// gradient_value(c, h1, n, t, switch_times): u_{n+1}(t) - u_n(t).
#[pyfunction]
#[pyo3(signature = (c, h1, n, t, switch_times, h2 = 0.0))]
fn gradient_value(c: f64, h1: f64, n: i64, t: f64, switch_times: Vec<f64>, h2: f64) -> PyResult<f64> {
    let params = build_params(c, h1, h2, 1.0)?;
    let hist = times_to_history(&params, &switch_times)?;
    Ok(eval_grad_u(n, t, &hist, &params))
}

fn times_to_history(params: &Params, times: &[f64]) -> PyResult<rattling::sim::SwitchHistory> {
    if times.is_empty() {
        return Err(value_err("switch_times must contain at least t_0 = 0"));
    }
    let a = solve_a(params, 1e-12).map_err(value_err)?.a;
    let records = times
        .iter()
        .enumerate()
        .map(|(n, &t)| rattling::sim::SwitchRecord {
            n: n as u32,
            t,
            q: t - a * (n as f64) * (n as f64),
            grad: 0.0,
        })
        .collect();
    Ok(rattling::sim::SwitchHistory {
        params: *params,
        a,
        root_tol: DEFAULT_ROOT_TOL,
        records,
        non_switchers: Vec::new(),
        horizon: None,
        warnings: Vec::new(),
    })
}

/// qn_series(c, h1, n_max) -> list of (n, q_n, q_n/sqrt(n)).
#[pyfunction]
#[pyo3(signature = (c, h1, n_max, root_tol = DEFAULT_ROOT_TOL))]
fn qn_series(c: f64, h1: f64, n_max: u32, root_tol: f64) -> PyResult<Vec<(u32, f64, f64)>> {
    let params = build_params(c, h1, 0.0, 1.0)?;
    let hist = simulate(&params, n_max, root_tol).map_err(runtime_err)?;
    Ok(extract_qn(&hist, hist.a).map_err(runtime_err)?.entries)
}

/// candidate_q(c, h1, qs, e): fixed-point solve for q_{n+1} given q_0..q_n.
#[pyfunction]
fn candidate_q(py: Python<'_>, c: f64, h1: f64, qs: Vec<f64>, e: f64) -> PyResult<PyObject> {
    let params = build_params(c, h1, 0.0, 1.0)?;
    let a = solve_a(&params, 1e-12).map_err(value_err)?.a;
    let state = CandidateState::new(qs);
    let step = candidate_step(&state, e, a, &params).map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("q_next", step.q_next)?;
    d.set_item("c_next", step.c_next)?;
    d.set_item("d_next", step.d_next)?;
    d.set_item("j_min", step.j_min)?;
    d.set_item("iterations", step.iterations)?;
    Ok(d.into())
}

/// constants_table(c, h1, tau0=1.0, eta=None, n_scan_max=1500) -> JSON string
/// of the full table manifest.
#[pyfunction]
#[pyo3(signature = (c, h1, tau0 = 1.0, eta = None, n_scan_max = 1500))]
fn constants_table(c: f64, h1: f64, tau0: f64, eta: Option<f64>, n_scan_max: u32) -> PyResult<String> {
    let params = build_params(c, h1, 0.0, tau0)?;
    let mut opts = AssemblyOptions::default();
    opts.eta = eta;
    opts.grids.n_scan_max = n_scan_max;
    let table = assemble_constants(&params, None, &opts).map_err(runtime_err)?;
    serde_json::to_string(&table).map_err(runtime_err)
}

/// admissibility(c, h1, tau0=1.0, ...) -> dict: E, n0, verdict, violations.
#[pyfunction]
#[pyo3(signature = (c, h1, tau0 = 1.0, n_search_max = 4000, n_sim_cap = 2000, e_steps = 6))]
fn admissibility(
    py: Python<'_>,
    c: f64,
    h1: f64,
    tau0: f64,
    n_search_max: u32,
    n_sim_cap: u32,
    e_steps: u32,
) -> PyResult<PyObject> {
    let params = build_params(c, h1, 0.0, tau0)?;
    let table =
        assemble_constants(&params, None, &AssemblyOptions::default()).map_err(runtime_err)?;
    let (outcome, _, report) = admissibility_pipeline(
        &params,
        &table,
        n_search_max,
        n_sim_cap,
        e_steps,
        DEFAULT_ROOT_TOL,
    )
    .map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("e", outcome.e)?;
    d.set_item("e0", table.e0)?;
    d.set_item("n0", outcome.n0)?;
    d.set_item(
        "verdict",
        match outcome.verdict {
            Verdict::Admissible => "admissible",
            Verdict::NotAdmissible => "not-admissible",
            Verdict::Undetermined => "undetermined",
        },
    )?;
    d.set_item("violations", outcome.violations.clone())?;
    d.set_item("n_scan_hi", report.n_scan_hi)?;
    Ok(d.into())
}

/// find_n0_for(c, h1, e, n_search_max=4000) -> n0 or None.
#[pyfunction]
#[pyo3(signature = (c, h1, e, n_search_max = 4000))]
fn find_n0_for(c: f64, h1: f64, e: f64, n_search_max: u32) -> PyResult<Option<u32>> {
    let params = build_params(c, h1, 0.0, 1.0)?;
    let table =
        assemble_constants(&params, Some(e), &AssemblyOptions::default()).map_err(runtime_err)?;
    Ok(find_n0(&table, n_search_max).n0)
}

#[pymodule]
fn rattling_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(integral, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(ydot_bessel, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(run_ode_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(solution_value, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_value, m)?)?;
    m.add_function(wrap_pyfunction!(qn_series, m)?)?;
    m.add_function(wrap_pyfunction!(candidate_q, m)?)?;
    m.add_function(wrap_pyfunction!(constants_table, m)?)?;
    m.add_function(wrap_pyfunction!(admissibility, m)?)?;
    m.add_function(wrap_pyfunction!(find_n0_for, m)?)?;
    Ok(())
}
