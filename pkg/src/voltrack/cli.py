"""Batch front end: config-driven runs of the three synthesis routes.

Subcommands: simulate | synthesize | compare | convergence | verify.
Configs are JSON (nested key/value sections, matrices as row-major
lists); outputs are tab-delimited text with one header line and 17
significant digits, so identical configs give byte-identical files.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import fredholm, qp, riccati
from .errors import BlowUpError, ConfigurationError, SingularSystemError
from .model import (
    ControlSignal,
    InitialState,
    ReferenceSignal,
    SystemSpec,
    TimeGrid,
    cost,
    exponential_kernel,
    extend_state,
    fundamental_matrix,
    simulate,
    voc_solution,
    zero_kernel,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# config ingestion
# ---------------------------------------------------------------------------


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigurationError(f"config field '{key}' is missing")
    return cfg[key]


def _matrix(cfg: dict, key: str, rows: int, cols: int) -> np.ndarray:
    raw = _require(cfg, key)
    if not isinstance(raw, list) or not all(isinstance(v, (int, float)) for v in raw):
        raise ConfigurationError(f"field '{key}': expected a flat list of numbers")
    if len(raw) != rows * cols:
        raise ConfigurationError(
            f"field '{key}': expected {rows * cols} numbers (row-major {rows}x{cols}), "
            f"got {len(raw)}"
        )
    return np.asarray(raw, dtype=float).reshape(rows, cols)


def _poly_values(coeffs, t: np.ndarray, key: str) -> np.ndarray:
    if not isinstance(coeffs, list) or not coeffs:
        raise ConfigurationError(f"field '{key}': expected per-channel coefficient lists")
    cols = []
    for ch in coeffs:
        if not isinstance(ch, list):
            raise ConfigurationError(f"field '{key}': each channel needs a list")
        acc = np.zeros_like(t)
        for q, c in enumerate(ch):
            acc += float(c) * t**q
        cols.append(acc)
    return np.stack(cols, axis=1)


def _table_values(raw, rows: int, cols: int, key: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (rows, cols):
        raise ConfigurationError(
            f"field '{key}': expected a {rows}x{cols} node table, got {arr.shape}"
        )
    return arr


class Instance:
    """A fully built run: grid, plant, signals, initial state, options."""

    def __init__(self, cfg: dict, n_override: int | None, checkpoint: int | None):
        dims = _require(cfg, "dims")
        self.d = int(_require(dims, "d"))
        self.m = int(_require(dims, "m"))
        self.p = int(_require(dims, "p"))
        if min(self.d, self.m, self.p) < 1:
            raise ConfigurationError("dims must be positive")
        steps = int(n_override if n_override is not None else _require(cfg, "steps"))
        self.grid = TimeGrid(float(_require(cfg, "horizon")), steps)
        A = _matrix(cfg, "A", self.d, self.d)
        B = _matrix(cfg, "B", self.d, self.m)
        C = _matrix(cfg, "C", self.p, self.d)
        self.sys = SystemSpec(A, B, C, self._kernel(cfg))
        self.reference = ReferenceSignal(self._signal(cfg.get("reference"), "reference"))
        self.state = self._initial_state(cfg.get("initial_state"))
        self.cfg = cfg
        tol = cfg.get("tolerances", {})
        self.blowup = float(tol.get("blowup", 1e8))
        self.threeway_tol = float(tol.get("threeway", 5e-2))
        self.checkpoint_every = int(
            checkpoint
            if checkpoint is not None
            else cfg.get("checkpoint_every", max(1, steps // 20))
        )

    def _kernel(self, cfg: dict) -> np.ndarray:
        spec = cfg.get("kernel", {"type": "zero"})
        kind = spec.get("type", "zero")
        if kind == "zero":
            return zero_kernel(self.grid, self.d)
        if kind == "exponential":
            terms = []
            for q, term in enumerate(_require(spec, "terms")):
                G = _matrix(term, "matrix", self.d, self.d)
                rate = float(_require(term, "rate"))
                if rate < 0:
                    raise ConfigurationError(f"kernel term {q}: rate must be >= 0")
                terms.append((G, rate))
            return exponential_kernel(self.grid, terms)
        if kind == "table":
            raw = _require(spec, "values")
            flat = _table_values(raw, self.grid.steps + 1, self.d * self.d, "kernel.values")
            return flat.reshape(-1, self.d, self.d)
        raise ConfigurationError(f"kernel type '{kind}' is not one of zero|exponential|table")

    def _signal(self, spec, key: str) -> np.ndarray:
        t = self.grid.nodes
        if spec is None or spec.get("type", "zero") == "zero":
            return np.zeros((t.size, self.p))
        kind = spec["type"]
        if kind == "polynomial":
            vals = _poly_values(_require(spec, "coefficients"), t, f"{key}.coefficients")
            if vals.shape[1] != self.p:
                raise ConfigurationError(f"field '{key}': needs {self.p} channels")
            return vals
        if kind == "table":
            return _table_values(_require(spec, "values"), t.size, self.p, f"{key}.values")
        raise ConfigurationError(f"{key} type '{kind}' is not one of zero|polynomial|table")

    def _initial_state(self, spec) -> InitialState:
        if spec is None:
            return InitialState(0, np.zeros(self.d))
        k = int(spec.get("tau_index", 0))
        if not 0 <= k < self.grid.steps:
            raise ConfigurationError("initial_state.tau_index must lie inside the grid")
        head = np.asarray(_require(spec, "head"), dtype=float)
        if head.shape != (self.d,):
            raise ConfigurationError(f"initial_state.head must have {self.d} entries")
        tail_spec = spec.get("tail")
        if tail_spec is None or k == 0:
            return InitialState(k, head)
        kind = tail_spec.get("type", "zero")
        t = self.grid.nodes[: k + 1]
        if kind == "zero":
            tail = np.zeros((k + 1, self.d))
        elif kind == "polynomial":
            tail = _poly_values(
                _require(tail_spec, "coefficients"), t, "initial_state.tail.coefficients"
            )
            if tail.shape[1] != self.d:
                raise ConfigurationError("initial_state.tail needs d channels")
        elif kind == "table":
            tail = _table_values(
                _require(tail_spec, "values"), k + 1, self.d, "initial_state.tail.values"
            )
        else:
            raise ConfigurationError(
                f"tail type '{kind}' is not one of zero|polynomial|table"
            )
        return InitialState(k, head, tail)

    def control(self) -> ControlSignal:
        spec = self.cfg.get("control", {"type": "zero"})
        k = self.state.tau_index
        count = self.grid.steps + 1 - k
        kind = spec.get("type", "zero")
        if kind == "zero":
            return ControlSignal.zero(self.grid, self.m, k)
        if kind == "table":
            return ControlSignal(
                k, _table_values(_require(spec, "values"), count, self.m, "control.values")
            )
        raise ConfigurationError(f"control type '{kind}' is not one of zero|table")


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("config root must be an object")
    return cfg


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _write_rows(path: Path, header: list[str], rows) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_FMT % v for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_trajectory(path: Path, inst: Instance, w, u: ControlSignal) -> None:
    k = u.start_index
    header = (
        ["t"]
        + [f"w_{i+1}" for i in range(inst.d)]
        + [f"u_{i+1}" for i in range(inst.m)]
    )
    ufull = np.zeros((inst.grid.steps + 1, inst.m))
    ufull[k:] = u.values
    rows = np.column_stack([inst.grid.nodes, w.values, ufull])
    _write_rows(path, header, rows)


def _write_control(path: Path, inst: Instance, u: ControlSignal) -> None:
    header = ["t"] + [f"u_{i+1}" for i in range(inst.m)]
    rows = np.column_stack([inst.grid.nodes[u.start_index :], u.values])
    _write_rows(path, header, rows)


def _write_long_field(path: Path, nodes, field: np.ndarray, name: str) -> None:
    """Lower-triangular field in long format: s, tau, indices, value."""
    if field.ndim == 3:  # vector field (s, tau, i)
        header = ["s", "tau", "i", name]
        rows = []
        for j in range(field.shape[1]):
            for i in range(j + 1):
                for a in range(field.shape[2]):
                    rows.append((nodes[i], nodes[j], float(a + 1), field[i, j, a]))
    else:  # matrix field (s, tau, i, j)
        header = ["s", "tau", "i", "j", name]
        rows = []
        for j in range(field.shape[1]):
            for i in range(j + 1):
                for a in range(field.shape[2]):
                    for b in range(field.shape[3]):
                        rows.append(
                            (nodes[i], nodes[j], float(a + 1), float(b + 1), field[i, j, a, b])
                        )
    _write_rows(path, header, rows)


def _check_finite(arr: np.ndarray, limit: float, what: str) -> None:
    if not np.all(np.isfinite(arr)) or np.abs(arr).max() > limit:
        raise BlowUpError(f"{what} exceeded the blow-up bound {limit:g}")


# ---------------------------------------------------------------------------
# routes
# ---------------------------------------------------------------------------


def _route_fredholm(inst: Instance):
    Z = fundamental_matrix(inst.sys, inst.grid)
    k = inst.state.tau_index
    kernel = fredholm.build_kernel(inst.sys, Z, inst.grid, k)
    forcing = fredholm.build_forcing(inst.sys, Z, inst.grid, inst.state, inst.reference)
    p = fredholm.solve_fredholm(kernel, forcing, inst.grid)
    u = fredholm.optimal_control_fredholm(p, inst.sys.B)
    # report the plant response to the synthesized control so costs are
    # comparable across routes on the shared integrator
    w = simulate(inst.sys, inst.grid, inst.state, u)
    return u, w, cost(inst.sys, inst.grid, w, u, inst.reference)


def _route_riccati(inst: Instance, fields: dict | None = None):
    ric = riccati.solve_riccati(
        inst.sys, inst.grid, inst.checkpoint_every, blowup_limit=inst.blowup
    )
    trk = riccati.solve_tracking(inst.sys, inst.grid, ric, inst.reference)
    u, w = riccati.closed_loop(inst.sys, inst.grid, ric, trk, inst.state)
    if fields is not None:
        fields["ric"] = ric
        fields["trk"] = trk
    return u, w, cost(inst.sys, inst.grid, w, u, inst.reference)


def _route_oracle(inst: Instance):
    dmap = qp.build_affine_map(inst.sys, inst.grid, inst.state)
    u = qp.solve_qp(dmap, inst.reference)
    w = simulate(inst.sys, inst.grid, inst.state, u)
    return u, w, cost(inst.sys, inst.grid, w, u, inst.reference)


_ROUTES = {"fredholm": _route_fredholm, "riccati": _route_riccati, "oracle": _route_oracle}


def _rel_l2(grid: TimeGrid, k: int, a: np.ndarray, b: np.ndarray) -> float:
    w = grid.weights(k)
    num = math.sqrt(float(w @ ((a - b) ** 2).sum(axis=1)))
    den = math.sqrt(float(w @ (b**2).sum(axis=1)))
    return num / den if den > 0 else num


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_simulate(inst: Instance, outdir: Path) -> int:
    u = inst.control()
    w = simulate(inst.sys, inst.grid, inst.state, u)
    _check_finite(w.values, inst.blowup, "trajectory")
    _write_trajectory(outdir / "trajectory.tsv", inst, w, u)
    return EXIT_OK


def run_synthesize(inst: Instance, outdir: Path, route: str) -> int:
    if route not in _ROUTES:
        raise ConfigurationError(f"route '{route}' is not one of fredholm|riccati|oracle")
    fields: dict = {}
    if route == "riccati":
        u, w, J = _route_riccati(inst, fields)
    else:
        u, w, J = _ROUTES[route](inst)
    _check_finite(w.values, inst.blowup, "trajectory")
    _write_control(outdir / "control.tsv", inst, u)
    _write_trajectory(outdir / "trajectory.tsv", inst, w, u)
    (outdir / "cost.txt").write_text((_FMT % J) + "\n")
    if route == "riccati":
        ric, trk = fields["ric"], fields["trk"]
        nodes = inst.grid.nodes
        d = inst.d
        header = ["t"] + [f"p0_{a+1}{b+1}" for a in range(d) for b in range(d)]
        _write_rows(
            outdir / "p0.tsv", header, np.column_stack([nodes, ric.p0.reshape(-1, d * d)])
        )
        _write_rows(
            outdir / "d1.tsv",
            ["t"] + [f"d1_{a+1}" for a in range(d)],
            np.column_stack([nodes, trk.d1]),
        )
        _write_rows(outdir / "m.tsv", ["t", "m"], np.column_stack([nodes, trk.m]))
        _write_long_field(outdir / "p1.tsv", nodes, ric.p1, "p1")
        _write_long_field(outdir / "d2.tsv", nodes, trk.d2, "d2")
    return EXIT_OK


def run_compare(inst: Instance, outdir: Path) -> int:
    fields: dict = {}
    uF, wF, jF = _route_fredholm(inst)
    uR, wR, jR = _route_riccati(inst, fields)
    uO, wO, jO = _route_oracle(inst)
    ric, trk = fields["ric"], fields["trk"]
    k = inst.state.tau_index
    grid = inst.grid
    W = riccati.value_function(ric, trk, k, inst.state)
    report = riccati.di_residual(inst.sys, grid, ric, trk, wR, uR, inst.reference)
    Z = fundamental_matrix(inst.sys, grid)
    kernel = fredholm.build_kernel(inst.sys, Z, grid, k)
    forcing = fredholm.build_forcing(inst.sys, Z, grid, inst.state, inst.reference)
    p = fredholm.solve_fredholm(kernel, forcing, grid)
    res = fredholm.resolvent(kernel, grid)
    checks = [
        ("P0(T) = 0", float(np.abs(ric.p0[-1]).max())),
        ("P1(.,T) = 0", float(np.abs(ric.p1[:, -1]).max())),
        ("d1(T) = 0", float(np.abs(trk.d1[-1]).max())),
        ("d2(.,T) = 0", float(np.abs(trk.d2[:, -1]).max())),
        ("M(T) = 0", abs(float(trk.m[-1]))),
        ("p(T) = 0", float(np.abs(p.values[-1]).max())),
        ("K(T,.) = 0", float(np.abs(kernel.ktilde[-1]).max())),
        ("K(.,T) = 0", float(np.abs(kernel.ktilde[:, -1]).max())),
        ("R(T,.) = 0", float(np.abs(res.values[-1]).max())),
        ("R(.,T) = 0", float(np.abs(res.values[:, -1]).max())),
    ]
    lines = ["tracking synthesis comparison report", ""]
    lines.append("cost_fredholm\t" + _FMT % jF)
    lines.append("cost_riccati\t" + _FMT % jR)
    lines.append("cost_oracle\t" + _FMT % jO)
    lines.append("value_function\t" + _FMT % W)
    lines.append(
        "value_vs_cost_rel\t" + _FMT % (abs(W - jR) / (1.0 + abs(W)))
    )
    lines.append(
        "discrepancy_fredholm_riccati\t" + _FMT % _rel_l2(grid, k, uF.values, uR.values)
    )
    lines.append(
        "discrepancy_fredholm_oracle\t" + _FMT % _rel_l2(grid, k, uF.values, uO.values)
    )
    lines.append(
        "discrepancy_riccati_oracle\t" + _FMT % _rel_l2(grid, k, uR.values, uO.values)
    )
    lines.append("di_slack_min\t" + _FMT % report.min_slack)
    lines.append("di_slack_max\t" + _FMT % report.max_slack)
    lines.append("")
    for name, val in checks:
        status = "pass" if val == 0.0 else "FAIL"
        lines.append(f"check\t{name}\t{status}\t" + _FMT % val)
    (outdir / "report.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def run_convergence(inst_cfg: dict, outdir: Path, grids: list[int], checkpoint) -> int:
    if len(grids) < 2:
        raise ConfigurationError("convergence needs at least two grid sizes")
    rows = []
    errs_three, errs_voc = [], []
    for n in grids:
        inst = Instance(inst_cfg, n, checkpoint)
        uF, _, _ = _route_fredholm(inst)
        uR, _, _ = _route_riccati(inst)
        uO, _, _ = _route_oracle(inst)
        k = inst.state.tau_index
        three = max(
            _rel_l2(inst.grid, k, uF.values, uR.values),
            _rel_l2(inst.grid, k, uF.values, uO.values),
            _rel_l2(inst.grid, k, uR.values, uO.values),
        )
        Z = fundamental_matrix(inst.sys, inst.grid)
        u = inst.control()
        ws = simulate(inst.sys, inst.grid, inst.state, u)
        wv = voc_solution(inst.sys, inst.grid, Z, inst.state, u)
        voc_err = float(np.abs(ws.values - wv.values).max())
        errs_three.append(three)
        errs_voc.append(voc_err)
        rows.append([float(n), inst.grid.h, three, math.nan, voc_err, math.nan])
    for q in range(1, len(grids)):
        ratio = math.log(grids[q] / grids[q - 1])
        if errs_three[q] > 0:
            rows[q][3] = math.log(errs_three[q - 1] / errs_three[q]) / ratio
        if errs_voc[q] > 0:
            rows[q][5] = math.log(errs_voc[q - 1] / errs_voc[q]) / ratio
    _write_rows(
        outdir / "convergence.tsv",
        ["n", "h", "err_threeway", "order_threeway", "err_sim_voc", "order_sim_voc"],
        rows,
    )
    return EXIT_OK


def run_verify(inst: Instance, outdir: Path) -> int:
    results: list[tuple[str, bool, float]] = []

    def check(name: str, value: float, tol: float):
        results.append((name, value <= tol, value))

    grid, sysm, k = inst.grid, inst.sys, inst.state.tau_index
    h = grid.h
    Z = fundamental_matrix(sysm, grid)
    kernel = fredholm.build_kernel(sysm, Z, grid, k)
    forcing = fredholm.build_forcing(sysm, Z, grid, inst.state, inst.reference)
    p = fredholm.solve_fredholm(kernel, forcing, grid)
    uF = fredholm.optimal_control_fredholm(p, sysm.B)
    res = fredholm.resolvent(kernel, grid)
    kern = fredholm.synthesis_kernels(sysm, Z, res, grid)
    uQH, _ = fredholm.apply_synthesis(kern, inst.state, inst.reference)
    ric = riccati.solve_riccati(sysm, grid, inst.checkpoint_every, blowup_limit=inst.blowup)
    trk = riccati.solve_tracking(sysm, grid, ric, inst.reference)
    uR, wR = riccati.closed_loop(sysm, grid, ric, trk, inst.state)
    dmap = qp.build_affine_map(sysm, grid, inst.state)
    uO = qp.solve_qp(dmap, inst.reference)
    wO = simulate(sysm, grid, inst.state, uO)
    jR = cost(sysm, grid, wR, uR, inst.reference)
    jO = cost(sysm, grid, wO, uO, inst.reference)
    jF = cost(sysm, grid, simulate(sysm, grid, inst.state, uF), uF, inst.reference)

    final_max = max(
        float(np.abs(ric.p0[-1]).max()),
        float(np.abs(ric.p1[:, -1]).max()),
        float(np.abs(trk.d1[-1]).max()),
        float(np.abs(trk.d2[:, -1]).max()),
        abs(float(trk.m[-1])),
        float(np.abs(p.values[-1]).max()),
        float(np.abs(kernel.ktilde[-1]).max()),
        float(np.abs(kernel.ktilde[:, -1]).max()),
        float(np.abs(res.values[-1]).max()),
        float(np.abs(res.values[:, -1]).max()),
    )
    check("final_conditions_zero", final_max, 0.0)
    check(
        "kernel_symmetry",
        float(np.abs(kernel.ktilde - np.transpose(kernel.ktilde, (1, 0, 3, 2))).max()),
        1e-10,
    )
    sym = max(float(np.abs(ric.p0[j] - ric.p0[j].T).max()) for j in range(grid.steps + 1))
    check("p0_symmetry", sym, 1e-12)
    den = max(float(np.abs(uF.values).max()), 1e-30)
    check("qh_route_matches_costate", float(np.abs(uQH.values - uF.values).max()) / den, 1e-8)
    three = max(
        _rel_l2(grid, k, uF.values, uR.values),
        _rel_l2(grid, k, uF.values, uO.values),
        _rel_l2(grid, k, uR.values, uO.values),
    )
    check("threeway_agreement", three, inst.threeway_tol)
    W = riccati.value_function(ric, trk, k, inst.state)
    check("value_vs_cost", abs(W - jR) / (1.0 + abs(W)), 1e-2)
    check(
        "qp_gradient",
        qp.gradient_check(dmap, inst.reference, uO, 1e-5),
        1e-6 * (1.0 + abs(jO)),
    )
    check("qp_discrete_optimality", max(jO - jF, jO - jR), 1e-12 * (1.0 + abs(jO)))
    rep = riccati.di_residual(inst.sys, grid, ric, trk, wR, uR, inst.reference)
    check("di_optimal_slack", max(rep.max_slack, -rep.min_slack), 5.0 * h)
    rng = np.random.default_rng(20260810)
    worst = 0.0
    for _ in range(10):
        du = 0.5 * rng.standard_normal(uR.values.shape)
        up = ControlSignal(k, uR.values + du)
        wp = simulate(sysm, grid, inst.state, up)
        repp = riccati.di_residual(inst.sys, grid, ric, trk, wp, up, inst.reference)
        worst = max(worst, -repp.min_slack)
    check("di_perturbed_direction", worst, 1e-8)
    mid = (k + grid.steps) // 2
    u2, _ = riccati.closed_loop(sysm, grid, ric, trk, extend_state(wR, mid))
    check(
        "restart_reproducibility",
        float(np.abs(u2.values - uR.values[mid - k :]).max()),
        1e-8,
    )
    base = None
    worst_ratio = 0.0
    for kk in range(k, grid.steps):
        rk = fredholm.resolvent(kernel.restrict(kk), grid)
        nrm = rk.max_norm
        if base is None:
            base = max(nrm, 1e-30)
        worst_ratio = max(worst_ratio, nrm / base)
    check("resolvent_uniform_bound", worst_ratio, 2.0)

    lines = []
    ok = True
    for name, passed, value in results:
        ok = ok and passed
        lines.append(f"{'PASS' if passed else 'FAIL'}\t{name}\t" + _FMT % value)
    text = "\n".join(lines) + "\n"
    print(text, end="")
    (outdir / "verify.txt").write_text(text)
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voltrack",
        description="Quadratic tracking for linear plants with persistent memory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "synthesize", "compare", "convergence", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON instance config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--n", type=int, default=None, help="override grid steps")
        sp.add_argument(
            "--checkpoint", type=int, default=None, help="override checkpoint spacing"
        )
        if name == "synthesize":
            sp.add_argument("--route", choices=("fredholm", "riccati", "oracle"))
        if name == "convergence":
            sp.add_argument(
                "--grids", default=None, help="comma-separated list of grid sizes"
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        outdir = Path(args.out if args.out is not None else cfg.get("output_dir", "."))
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "convergence":
            if args.grids is not None:
                grids = [int(v) for v in args.grids.split(",") if v]
            else:
                grids = [int(v) for v in cfg.get("grids", [])]
            return run_convergence(cfg, outdir, grids, args.checkpoint)
        inst = Instance(cfg, args.n, args.checkpoint)
        if args.command == "simulate":
            return run_simulate(inst, outdir)
        if args.command == "synthesize":
            route = args.route or cfg.get("route")
            if route is None:
                raise ConfigurationError("synthesize needs --route or a config 'route'")
            return run_synthesize(inst, outdir, route)
        if args.command == "compare":
            return run_compare(inst, outdir)
        return run_verify(inst, outdir)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INVALID
    except (BlowUpError, SingularSystemError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
