"""Run orchestration: CSV emission, analytic-vs-numeric comparison, sweeps.

The CSV column order is fixed:

    t, eps_t, mean_n, P_e1, P_e2, P_e1e2, P_g1e2, var_Xp, var_Xm,
    norm_err, parity_leak, trunc_tail [, analytic_* mirrors]

A header comment block records every parameter and the code version so a
figure data file is self-describing and reproducible.  Quadrature columns
refer to the frame rotating at half the modulation frequency, in which the
squeezing axes are stationary.
"""

import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .config import RunSpec, SweepSpec
from .evolve import EvolverError, Trajectory, evolve
from .model import build_basis, init_state
from .observables import ObservableRecord
from .regimes import (
    RegimeDescriptor,
    RegimeId,
    dispersive_observables,
    double_excitation_probability,
    equal_coupling_flow,
    mixed_regime_observables,
    reconstruct_state_from_flow,
    resonance_catalog,
    second_atom_dispersive_amplitudes,
    two_photon_amplitudes,
)
from .observables import excitation_probabilities, mean_photon, quadrature_variances

NUMERIC_COLUMNS = (
    "t", "eps_t", "mean_n", "P_e1", "P_e2", "P_e1e2", "P_g1e2",
    "var_Xp", "var_Xm", "norm_err", "parity_leak", "trunc_tail",
)
ANALYTIC_COLUMNS = (
    "analytic_mean_n", "analytic_P_e1", "analytic_P_e2", "analytic_P_e1e2",
    "analytic_var_Xp", "analytic_var_Xm",
)
# record attribute backing each CSV column
_RECORD_ATTR = {
    "var_Xp": "var_Xplus", "var_Xm": "var_Xminus",
    "norm_err": "norm_error", "parity_leak": "parity_leakage",
    "trunc_tail": "truncation_tail",
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_WARN = 2
EXIT_HEALTH = 3


@dataclass
class RunResult:
    spec: RunSpec
    trajectory: Trajectory | None
    csv_text: str
    summary: dict
    exit_code: int


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.17g}"


def _header_lines(spec: RunSpec) -> list[str]:
    p = spec.params
    lines = [
        f"# dceqed {__version__}",
        f"# epsilon = {_fmt(p.epsilon)}",
        f"# x = {_fmt(p.x)}",
        f"# eta = {_fmt(p.eta)}",
        f"# q = {_fmt(p.q)}",
        f"# g1 = {_fmt(p.g1)}",
        f"# g2 = {_fmt(p.g2)}",
        f"# Delta1 = {_fmt(p.Delta1)}",
        f"# Delta2 = {_fmt(p.Delta2)}",
        f"# n_max = {spec.n_max}",
        f"# initial_state = {''.join(map(str, spec.initial_state))}",
        f"# t_final = {_fmt(spec.t_final)}",
        f"# comparison = {spec.comparison}",
    ]
    for f_ in fields(spec.evolver):
        lines.append(f"# evolver.{f_.name} = {getattr(spec.evolver, f_.name)}")
    if spec.regime_descriptor is not None:
        d = spec.regime_descriptor
        lines.append(
            f"# regime = {d.regime.value}"
            + (f" branch = {d.branch}" if d.branch else "")
            + f" verdict = {d.verdict}"
        )
    return lines


class _AnalyticModel:
    """Per-regime analytic observable columns evaluated at arbitrary times."""

    def __init__(self, spec: RunSpec):
        self.spec = spec
        self.descriptor = spec.regime_descriptor
        self._flow = None
        self._propagator = None

    @property
    def available(self) -> bool:
        return self.descriptor is not None

    def row(self, t: float) -> dict[str, float]:
        nan = float("nan")
        out = dict.fromkeys(ANALYTIC_COLUMNS, nan)
        if self.descriptor is None:
            return out
        p = self.spec.params
        regime = self.descriptor.regime
        if regime == RegimeId.EMPTY_CAVITY:
            s = 2.0 * p.q * t
            out["analytic_mean_n"] = math.sinh(s) ** 2
            out["analytic_P_e1"] = 0.0
            out["analytic_P_e2"] = 0.0
            out["analytic_P_e1e2"] = 0.0
            out["analytic_var_Xp"] = 0.5 * math.exp(2.0 * s)
            out["analytic_var_Xm"] = 0.5 * math.exp(-2.0 * s)
        elif regime == RegimeId.EQUAL_COUPLING_X0:
            table = self._flow_table(t)
            probs = excitation_probabilities(table)
            out["analytic_mean_n"] = mean_photon(table)
            out["analytic_P_e1"] = probs["P_e1"]
            out["analytic_P_e2"] = probs["P_e2"]
            out["analytic_P_e1e2"] = probs["P_e1e2"]
        elif regime == RegimeId.TWO_PHOTON_RESONANT:
            alpha = +1 if self.descriptor.branch[0] == "+" else -1
            beta = +1 if self.descriptor.branch[1] == "+" else -1
            table = two_photon_amplitudes(t, p, alpha, beta).table
            self._table_row(table, out)
        elif regime == RegimeId.SECOND_ATOM_DISPERSIVE:
            branch = +1 if self.descriptor.branch == "+" else -1
            table = second_atom_dispersive_amplitudes(t, p, branch).table
            self._table_row(table, out)
        elif regime == RegimeId.DISPERSIVE_SQUEEZING:
            obs = dispersive_observables(t, p)
            out["analytic_mean_n"] = obs.mean_n
            out["analytic_P_e1"] = obs.P_e1
            out["analytic_P_e2"] = obs.P_e2
            out["analytic_var_Xp"] = obs.var_Xplus
            out["analytic_var_Xm"] = obs.var_Xminus
        elif regime == RegimeId.DOUBLE_EXCITATION:
            res = double_excitation_probability(t, p)
            out["analytic_P_e1e2"] = res.p_e1e2
        elif regime == RegimeId.MIXED_RESONANT_DISPERSIVE:
            obs = mixed_regime_observables(t, p)
            out["analytic_mean_n"] = obs.mean_n
            out["analytic_P_e1"] = 1.0 - obs.P_g1
            out["analytic_P_e2"] = obs.P_e2
            out["analytic_var_Xp"] = obs.var_Xplus
            out["analytic_var_Xm"] = obs.var_Xminus
        elif regime == RegimeId.DOUBLE_WEAK:
            self._propagated_row(t, out)
        return out

    def _table_row(self, table, out):
        probs = excitation_probabilities(table)
        quads = quadrature_variances(table)
        out["analytic_mean_n"] = mean_photon(table)
        out["analytic_P_e1"] = probs["P_e1"]
        out["analytic_P_e2"] = probs["P_e2"]
        out["analytic_P_e1e2"] = probs["P_e1e2"]
        out["analytic_var_Xp"] = quads["var_Xplus"]
        out["analytic_var_Xm"] = quads["var_Xminus"]

    def _flow_table(self, t: float):
        if self._flow is None or self._flow.times[-1] < t:
            horizon = max(t, self.spec.t_final)
            m_max = 40
            while True:
                try:
                    self._flow = equal_coupling_flow(
                        horizon, abs(self.spec.params.q), m_max,
                        r=1.0 if self.spec.params.g1 * self.spec.params.g2 >= 0 else -1.0,
                        n_samples=2000,
                    )
                    break
                except Exception:
                    m_max *= 2
                    if m_max > 4096:
                        raise
        i = int(np.argmin(np.abs(self._flow.times - t)))
        return reconstruct_state_from_flow(self._flow.state_at(i))

    def _propagated_row(self, t: float, out):
        # eigendecomposition of the weak-coupling effective generator, reused
        # across samples
        from .model import build_basis, build_operators
        from .regimes import double_weak_effective_hamiltonian

        if self._propagator is None:
            basis = build_basis(self.spec.n_max)
            ops = build_operators(basis)
            H = double_weak_effective_hamiltonian(self.spec.params, ops).toarray()
            w, V = np.linalg.eigh(H)
            psi0 = init_state(*self.spec.initial_state, basis).data
            self._propagator = (w, V, V.conj().T @ psi0, basis)
        w, V, c0, basis = self._propagator
        psi = V @ (np.exp(-1j * w * t) * c0)
        from .model import StateVector

        state = StateVector(psi, basis, "interaction")
        probs = excitation_probabilities(state)
        quads = quadrature_variances(state)
        out["analytic_mean_n"] = mean_photon(state)
        out["analytic_P_e1"] = probs["P_e1"]
        out["analytic_P_e2"] = probs["P_e2"]
        out["analytic_P_e1e2"] = probs["P_e1e2"]
        out["analytic_var_Xp"] = quads["var_Xplus"]
        out["analytic_var_Xm"] = quads["var_Xminus"]


def _record_row(rec: ObservableRecord) -> dict[str, float]:
    row = {}
    for col in NUMERIC_COLUMNS:
        row[col] = getattr(rec, _RECORD_ATTR.get(col, col))
    return row


def run(spec: RunSpec, csv_path: str | None = None) -> RunResult:
    """Execute one run and render its CSV; returns results and exit code."""
    csv_path = csv_path or spec.out
    analytic = _AnalyticModel(spec)
    want_analytic = spec.comparison in ("analytic", "both")
    want_numeric = spec.comparison in ("numeric", "both")
    if want_analytic and not analytic.available:
        raise EvolverError(
            "comparison requires a regime: set [model] regime or an x that "
            "matches a catalog resonance"
        )

    traj = None
    health_exit = EXIT_OK
    rows: list[dict[str, float]] = []
    if want_numeric:
        basis = build_basis(spec.n_max)
        state0 = init_state(*spec.initial_state, basis)
        traj = evolve(state0, spec.params, spec.t_final, spec.evolver)
        for rec in traj.records:
            rows.append(_record_row(rec))
        tails = traj.column("truncation_tail")
        if np.any(tails > spec.evolver.tail_fail):
            health_exit = EXIT_HEALTH
        elif traj.warnings:
            health_exit = EXIT_WARN
    else:
        n = max(2, int(round(abs(spec.params.epsilon * spec.t_final)
                             / spec.evolver.sample_eps_dt)))
        for t in np.linspace(0.0, spec.t_final, n + 1):
            rows.append({
                "t": float(t), "eps_t": float(spec.params.epsilon * t),
                **dict.fromkeys(NUMERIC_COLUMNS[2:], float("nan")),
            })

    if want_analytic:
        for row in rows:
            row.update(analytic.row(row["t"]))

    summary = {"samples": len(rows)}
    deviation_line = None
    if spec.comparison == "both":
        mean_n = np.array([r["mean_n"] for r in rows])
        an = np.array([r["analytic_mean_n"] for r in rows])
        mask = (mean_n > 0.1) & np.isfinite(an)
        if np.any(mask):
            dev = float(np.max(np.abs(an[mask] - mean_n[mask]) / mean_n[mask]))
            summary["max_rel_deviation_mean_n"] = dev
            deviation_line = f"# max_rel_deviation_mean_n = {_fmt(dev)}"
        else:
            summary["max_rel_deviation_mean_n"] = None
            deviation_line = "# max_rel_deviation_mean_n = n/a (no samples with mean_n > 0.1)"

    columns = list(NUMERIC_COLUMNS) + (list(ANALYTIC_COLUMNS) if want_analytic else [])
    buf = []
    buf.extend(_header_lines(spec))
    if traj is not None and traj.warnings:
        for w in traj.warnings:
            buf.append(f"# warning: {w}")
    buf.append(",".join(columns))
    for row in rows:
        buf.append(",".join(_fmt(row[c]) for c in columns))
    if deviation_line is not None:
        buf.append(deviation_line)
    csv_text = "\n".join(buf) + "\n"
    if csv_path:
        with open(csv_path, "w") as f:
            f.write(csv_text)

    descriptor = spec.regime_descriptor
    exit_code = health_exit
    if exit_code == EXIT_OK and descriptor is not None and descriptor.verdict != "pass":
        exit_code = EXIT_WARN
    summary["exit_code"] = exit_code
    if descriptor is not None:
        summary["regime"] = descriptor.regime.value
        summary["regime_verdict"] = descriptor.verdict
    return RunResult(
        spec=spec, trajectory=traj, csv_text=csv_text,
        summary=summary, exit_code=exit_code,
    )


def _sweep_point(args):
    index, spec, overrides = args
    from .config import _match_descriptor_by_x

    params = spec.params.replace(**overrides)
    # re-resolve the resonance shift if the run was regime-driven
    if spec.regime is not None and "x" not in overrides:
        catalog = resonance_catalog(params.replace(x=0.0))
        matches = catalog.find(RegimeId(spec.regime), spec.branch)
        if matches:
            params = params.replace(x=matches[0].x)
    point_spec = replace(spec, params=params, out=None, comparison="numeric",
                         regime_descriptor=_match_descriptor_by_x(params))
    result = run(point_spec, csv_path=None)
    final = result.trajectory.records[-1]
    row = dict(overrides)
    row.update(_record_row(final))
    return index, row, result.exit_code


def sweep(spec: SweepSpec, csv_path: str | None = None) -> RunResult:
    """Run every grid point and emit one final-time observable row each.

    Points execute in a process pool; rows are merged in grid order.  If a
    time budget is configured and exceeded, remaining points are skipped and
    the output is marked partial (exit code 2).
    """
    points = spec.points()
    names = list(spec.grid)
    budget = spec.budget_seconds
    workers = spec.workers or min(4, os.cpu_count() or 1)
    t0 = time.monotonic()
    results: dict[int, dict] = {}
    exit_code = EXIT_OK
    partial = False

    tasks = [(i, spec.base, pt) for i, pt in enumerate(points)]
    if workers <= 1 or len(points) == 1:
        for task in tasks:
            if budget is not None and time.monotonic() - t0 > budget:
                partial = True
                break
            i, row, code = _sweep_point(task)
            results[i] = row
            exit_code = max(exit_code, code)
    else:
        from concurrent.futures import FIRST_COMPLETED, wait

        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending = set()
            it = iter(tasks)
            exhausted = False
            while pending or not exhausted:
                while not exhausted and len(pending) < workers:
                    if budget is not None and time.monotonic() - t0 > budget:
                        partial = True
                        exhausted = True
                        break
                    try:
                        task = next(it)
                    except StopIteration:
                        exhausted = True
                        break
                    pending.add(pool.submit(_sweep_point, task))
                if not pending:
                    break
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    i, row, code = fut.result()
                    results[i] = row
                    exit_code = max(exit_code, code)

    if partial:
        exit_code = max(exit_code, EXIT_WARN)

    columns = names + [c for c in NUMERIC_COLUMNS]
    buf = _header_lines(spec.base)
    buf.append(f"# sweep over: {', '.join(names)} ({len(points)} points)")
    if partial:
        buf.append(f"# warning: budget exceeded, {len(results)}/{len(points)} points completed")
        print(
            f"warning: sweep budget exceeded after {len(results)}/{len(points)} points",
            file=sys.stderr,
        )
    buf.append(",".join(columns))
    for i in sorted(results):
        row = results[i]
        buf.append(",".join(_fmt(row[c]) for c in columns))
    csv_text = "\n".join(buf) + "\n"
    if csv_path or spec.base.out:
        with open(csv_path or spec.base.out, "w") as f:
            f.write(csv_text)
    return RunResult(
        spec=spec.base, trajectory=None, csv_text=csv_text,
        summary={"points": len(results), "partial": partial, "exit_code": exit_code},
        exit_code=exit_code,
    )


def list_resonances(params, out=None) -> str:
    """Human-readable resonance table for one parameter set."""
    catalog = resonance_catalog(params)
    lines = [
        f"# dceqed {__version__} resonance catalog",
        f"# epsilon = {_fmt(params.epsilon)} g1 = {_fmt(params.g1)} "
        f"g2 = {_fmt(params.g2)} Delta1 = {_fmt(params.Delta1)} "
        f"Delta2 = {_fmt(params.Delta2)}",
        "regime,branch,x,verdict,rate,behavior,checks",
    ]
    for d in catalog.descriptors:
        checks = ";".join(f"{c.name}={c.verdict}(ratio {c.ratio:.3g})" for c in d.checks)
        lines.append(
            f"{d.regime.value},{d.branch or '-'},{_fmt(d.x)},{d.verdict},"
            f"{_fmt(d.rate) if d.rate is not None else 'nan'},{d.behavior},{checks}"
        )
    for o in catalog.omitted:
        lines.append(f"# omitted {o.regime.value} {o.branch or '-'}: {o.reason}")
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as f:
            f.write(text)
    return text
