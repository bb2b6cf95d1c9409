"""End-to-end acceptance checks.

Each test covers one acceptance criterion and prints a single PASS/FAIL
line (run with ``pytest -s`` or ``nldd check`` to see them).  Experiment
runs are shared through module-scoped fixtures so the suite stays fast.
"""

import time

import numpy as np
import pytest

from nldd import (
    Dirichlet,
    Neumann,
    NewtonConfig,
    ProblemSpec,
    assemble_jacobian_1d,
    assemble_residual_1d,
    dtn_eval,
    g_map_eval,
    kirchhoff_exact,
    linear_ramp,
    monodomain_mesh,
    ntd_eval,
    read_history_csv,
    run_experiment,
    sine_forcing,
    solve_monodomain,
    split_problem,
    zero_forcing,
)


def _report(name, ok, detail=""):
    line = f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def _timed(name, overrides=None, out_dir=None):
    t0 = time.perf_counter()
    result = run_experiment(name, overrides, out_dir=out_dir)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return str(tmp_path_factory.mktemp("acceptance"))


@pytest.fixture(scope="module")
def toy_result():
    return _timed("nilpotent-toy")


@pytest.fixture(scope="module")
def quadratic_result():
    return _timed("quadratic-theta")


@pytest.fixture(scope="module")
def mesh1d_result():
    return _timed("mesh-independence-1d")


@pytest.fixture(scope="module")
def mesh2d_result():
    return _timed("mesh-independence-2d")


@pytest.fixture(scope="module")
def compare_result(out_root):
    return _timed("dnpen-compare", out_dir=out_root)


@pytest.fixture(scope="module")
def theta_result(out_root):
    return _timed("dnpen-theta", out_dir=out_root)


# -- 1. one-step convergence, linear symmetric split ------------------------

def test_01_linear_symmetric_one_step():
    spec = ProblemSpec(alpha=0.0, forcing=zero_forcing(), g_left=0.0,
                       g_right=0.0)
    psi1, psi2 = split_problem(spec, 0.5, 1e-2)
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = max(abs(g_map_eval(lam0, psi1, psi2, 0.5))
                for lam0 in rng.uniform(-10.0, 10.0, 10))
    elapsed = time.perf_counter() - t0
    _report("linear symmetric split converges in one step",
            worst <= 1e-12 and elapsed < 1.0,
            f"worst |lam1| = {worst:.2e}, {elapsed:.2f}s")


# -- 2. one-step convergence, general split with theta = a -------------------

def test_02_linear_general_split_one_step():
    spec = ProblemSpec(alpha=0.0, forcing=zero_forcing(), g_left=0.0,
                       g_right=0.0)
    rng = np.random.default_rng(11)
    worst = 0.0
    for a in (0.3, 0.5, 0.7):
        psi1, psi2 = split_problem(spec, a, 1e-2)
        for lam0 in rng.uniform(-10.0, 10.0, 10):
            worst = max(worst, abs(g_map_eval(lam0, psi1, psi2, a)))
    _report("linear split at a converges in one step with theta=a",
            worst <= 1e-12, f"worst |lam1| = {worst:.2e}")


# -- 3. nonlinear antisymmetric toy: one-step to 1e-8 ------------------------

def test_03_nonlinear_toy_one_step(toy_result):
    result, _ = toy_result
    worst = 0.0
    for lam0 in (-1.0, 0.0, 3.0):
        errs = toy_result[0].histories[f"dn_lam0_{lam0:g}"].errors
        e1 = errs[1] if errs.size > 1 else errs[0]
        worst = max(worst, e1)
    _report("antisymmetric toy problem converges in one step",
            worst <= 1e-8, f"worst |lam1 - lam_ref| = {worst:.2e}")


# -- 4. quadratic convergence with the derived optimal relaxation ------------

def test_04_quadratic_relaxation(quadratic_result):
    result, elapsed = quadratic_result
    half = result.histories["dn_asymmetric_half"].errors
    quad = result.histories["dn_asymmetric_thetaq"].errors

    ratios = half[4:9] / half[3:8]
    linear_ok = bool(np.all((ratios >= 0.1) & (ratios <= 0.95)))

    # successive-error log-log slope while the error is still above the
    # relative convergence tolerance
    e0 = quad[0]
    keep = [(quad[n], quad[n + 1]) for n in range(quad.size - 1)
            if quad[n] > 1e-12 * e0 and quad[n + 1] > 0]
    xs = np.log([p[0] for p in keep])
    ys = np.log([p[1] for p in keep])
    slope = float(np.polyfit(xs, ys, 1)[0])

    _report("derived relaxation turns linear contraction quadratic",
            linear_ok and slope >= 1.9 and elapsed < 10.0,
            f"theta=1/2 ratios in [{ratios.min():.2f}, {ratios.max():.2f}], "
            f"theta_q slope = {slope:.2f}, {elapsed:.1f}s")


# -- 5. interface operators are exact inverses at the discrete level ---------

def test_05_interface_operator_round_trip():
    catalog = [
        (ProblemSpec(alpha=0.0, g_left=0.0, g_right=0.0), 0.5),
        (ProblemSpec(alpha=1.0, g_left=0.0, g_right=20.0), 0.5),
        (ProblemSpec(alpha=1.0, forcing=linear_ramp(100.0), g_left=0.0,
                     g_right=-20.0), 0.3),
        (ProblemSpec(alpha=1.0, forcing=sine_forcing(10), g_left=0.0,
                     g_right=10.0), 0.5),
        (ProblemSpec(alpha=1.0, forcing=sine_forcing(10), g_left=0.0,
                     g_right=10.0), 0.3),
    ]
    rng = np.random.default_rng(2025)
    worst = 0.0
    for spec, gamma in catalog:
        psis = split_problem(spec, gamma, 1e-4)
        for j, lam in enumerate(rng.uniform(-20.0, 20.0, 20)):
            psi = psis[j % 2]
            back = ntd_eval(dtn_eval(lam, psi), psi)
            worst = max(worst, abs(back - lam) / max(1.0, abs(lam)))
    _report("flux/trace interface operators invert each other",
            worst <= 1e-10, f"worst relative deviation = {worst:.2e}")


# -- 6. mesh-independent outer iteration counts, 1D --------------------------

def test_06_mesh_independence_1d(mesh1d_result):
    result, elapsed = mesh1d_result
    counts = {key: hist.n_iterations
              for key, hist in sorted(result.histories.items())}
    spread = max(counts.values()) - min(counts.values())
    converged = all(h.converged for h in result.histories.values())
    _report("outer iteration count is mesh independent (1D, 10 subdomains)",
            converged and spread <= 1 and elapsed < 60.0,
            f"counts = {counts}, {elapsed:.1f}s")


# -- 7. mesh-independent outer iteration counts, 2D --------------------------

def test_07_mesh_independence_2d(mesh2d_result):
    result, elapsed = mesh2d_result
    counts = {key: hist.n_iterations
              for key, hist in sorted(result.histories.items())}
    spread = max(counts.values()) - min(counts.values())
    converged = all(h.converged for h in result.histories.values())
    _report("outer iteration count is mesh independent (2D, 4 strips)",
            converged and spread <= 1 and elapsed < 120.0,
            f"counts = {counts}, {elapsed:.1f}s")


# -- 8. preconditioned Newton is relaxation independent ----------------------

def _canonical_rows(path):
    """CSV rows with the theta metadata column blanked and data values
    rounded to 10 significant digits."""
    rows = []
    for rec in read_history_csv(path):
        rows.append(f"{rec.method},THETA,{rec.h:.10g},{rec.subdomains},"
                    f"{rec.iteration},{rec.error_inf:.10g},"
                    f"{rec.residual_inf:.10g},{rec.inner_newton_total}")
    return rows


def test_08_preconditioned_newton_theta_independence(theta_result):
    result, _ = theta_result
    paths = [result.csv_paths[f"dnpen_symmetric_theta_{t:g}"]
             for t in (0.1, 0.5, 0.9)]
    histories = [result.histories[f"dnpen_symmetric_theta_{t:g}"]
                 for t in (0.1, 0.5, 0.9)]

    errs = [h.errors for h in histories]
    same_len = len({e.size for e in errs}) == 1
    worst = 0.0
    if same_len:
        for other in errs[1:]:
            dev = np.abs(other - errs[0]) / np.maximum(np.abs(errs[0]), 1e-300)
            nz = errs[0] > 0
            worst = max(worst, float(dev[nz].max()) if nz.any() else 0.0)
    rows = [_canonical_rows(p) for p in paths]
    bytes_equal = rows[0] == rows[1] == rows[2]

    _report("preconditioned Newton history is independent of theta",
            same_len and worst <= 1e-10 and bytes_equal,
            f"worst per-iteration relative deviation = {worst:.2e}, "
            f"canonical CSVs identical = {bytes_equal}")


# -- 9. iteration-count ordering of the methods ------------------------------

def test_09_method_ordering(compare_result):
    result, _ = compare_result
    ok = True
    details = []
    for tag in ("symmetric", "asymmetric"):
        dnpen = next(h for k, h in result.histories.items()
                     if k.startswith(f"dnpen_{tag}_"))
        raspen = result.histories[f"raspen_{tag}"]
        newton = result.histories[f"newton_{tag}"]
        dn_slow = result.histories[f"dn_{tag}_theta_0.1"]
        counts = (dnpen.n_iterations, raspen.n_iterations,
                  newton.n_iterations, dn_slow.n_iterations)
        ok = ok and counts[0] <= counts[1] <= counts[2] <= counts[3]
        details.append(f"{tag}: dnpen {counts[0]} <= raspen {counts[1]} "
                       f"<= newton {counts[2]} <= dn(0.1) {counts[3]}")
    _report("method iteration counts are ordered", ok, "; ".join(details))


# -- 10. second-order accuracy of the discretization -------------------------

def test_10_discretization_order():
    spec = ProblemSpec(alpha=1.0, forcing=zero_forcing(), g_left=0.0,
                       g_right=2.0)
    errors = []
    for h in (1 / 100, 1 / 200, 1 / 400):
        mesh = monodomain_mesh(spec, h)
        sol = solve_monodomain(spec, mesh)
        exact = kirchhoff_exact(spec, mesh.nodes)
        errors.append(float(np.abs(sol.values - exact).max()))
    ratios = [errors[i] / errors[i + 1] for i in range(2)]
    ok = all(3.2 <= r <= 4.8 for r in ratios)
    _report("discretization error shrinks at second order", ok,
            f"halving ratios = {[f'{r:.2f}' for r in ratios]}")


# -- 11. analytic Jacobian matches finite differences -------------------------

def test_11_jacobian_consistency():
    rng = np.random.default_rng(314)
    bc_choices = [
        lambda gl, gr, p: (Dirichlet(gl), Dirichlet(gr)),
        lambda gl, gr, p: (Neumann(p), Dirichlet(gr)),
        lambda gl, gr, p: (Dirichlet(gl), Neumann(p)),
    ]
    forcings = [zero_forcing(), linear_ramp(50.0), sine_forcing(3, c=10.0)]
    worst = 0.0
    for k in range(50):
        n_cells = int(rng.integers(8, 32))
        spec = ProblemSpec(alpha=float(rng.uniform(0.0, 4.0)),
                           forcing=forcings[k % 3])
        mesh = monodomain_mesh(spec, 1.0 / n_cells)
        bc = bc_choices[k % 3](float(rng.uniform(-5, 5)),
                               float(rng.uniform(-5, 5)),
                               float(rng.uniform(-50, 50)))
        u = rng.uniform(-5.0, 5.0, mesh.n_nodes)
        jac = assemble_jacobian_1d(u, spec, mesh, bc).to_dense()
        fd = np.zeros_like(jac)
        for j in range(u.size):
            eps = 1e-6 * max(1.0, abs(u[j]))
            up, um = u.copy(), u.copy()
            up[j] += eps
            um[j] -= eps
            fd[:, j] = (assemble_residual_1d(up, spec, mesh, bc)
                        - assemble_residual_1d(um, spec, mesh, bc)) / (2 * eps)
        worst = max(worst, float(np.abs(jac - fd).max()
                                 / np.abs(jac).max()))
    _report("analytic Jacobian matches finite differences",
            worst <= 1e-6, f"worst relative deviation = {worst:.2e}")


# -- 12. plot pipeline renders every experiment output ------------------------

def test_12_plot_pipeline(out_root, toy_result, quadratic_result,
                          mesh1d_result, compare_result, theta_result):
    from plots.render import FigureSpec, render_convergence_figure

    result, _ = theta_result
    pair = [result.csv_paths[f"dnpen_symmetric_theta_{t:g}"]
            for t in (0.1, 0.9)]
    a, b = (read_history_csv(p) for p in pair)
    counts_ok = len(a) == len(b)
    values_ok = counts_ok and all(
        ra.iteration == rb.iteration and ra.error_inf == rb.error_inf
        for ra, rb in zip(a, b))
    spec = FigureSpec(tuple(pair), ("theta = 0.1", "theta = 0.9"),
                      f"{out_root}/theta_pair.png")
    render_convergence_figure(spec)

    rendered = 0
    for k, (result, _) in enumerate((toy_result, quadratic_result,
                                     mesh1d_result, compare_result,
                                     theta_result)):
        out = f"{out_root}/exp{k}"
        result.write(out)
        paths = tuple(sorted(result.csv_paths.values()))
        labels = tuple(k.replace("_", " ") for k in sorted(result.csv_paths))
        render_convergence_figure(
            FigureSpec(paths, labels, f"{out}/figure.png", result.name))
        rendered += 1

    _report("plot pipeline renders every experiment output",
            counts_ok and values_ok and rendered == 5,
            f"paired series equal = {values_ok}, figures rendered = {rendered}")
