"""Scenario files, Monte-Carlo recovery runs and RMSE sweeps.

A scenario is a JSON document::

    {
      "graph":     {"type": "plate", "width": 2.0, "height": 1.0, "nx": 16, "ny": 8,
                    "cavity": [0.625, 0.25, 1.375, 0.75]}
                 | {"type": "mesh", "path": "plate.json"}
                 | {"type": "graph", "path": "graph.json"},
      "grid":      {"delta": 0.16, "count": 10, "start_index": 0},
      "selection": {"policy": "greedy", "k": 32, "objective": "max_min_singular"}
                 | {"policy": "random", "k": 32, "seed": 7}
                 | {"policy": "explicit", "vertices": [1, 5, 9]},
      "sources":   {"x0": {"type": "sparse", "entries": [[67, 100.0], [68, 80.0]]},
                    "q":  {"type": "bandlimited", "bandwidth": 5, "coefficients": [...]}},
      "mode":      "auto" | "initial" | "input" | "joint",
      "noise":     {"type": "none"} | {"type": "gaussian", "variance": 1e-5},
      "trials":    1000,
      "seed":      20190512
    }

Vertex indices in scenario files are 1-based; relative paths resolve
against the scenario file's directory. Mesh sources use the cotangent
Laplacian, graph files the combinatorial one.

Normalized RMSE of a cell is ``sqrt(mean_trials ||est - true||^2) / ||true||``.
Its standard error comes from the delta method applied to the mean
squared error. Noise is i.i.d. Gaussian on every entry of the observed
matrix ``Y``; the generator for trial ``j`` of a cell with ``K`` sensors
and ``T`` samples is Philox seeded by ``SeedSequence(seed, spawn_key=(0, K, T, j))``,
so a cell's result does not depend on which other cells run with it.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .diffusion import SourceConfig, TimeGrid, simulate_field
from .graph import build_laplacian, eigendecompose, read_graph
from .recovery import recover, solve_least_squares
from .sampling import (
    MAX_MIN_SINGULAR,
    IdentifiabilityError,
    VertexSelection,
    build_case1_operator,
    build_case2_operator,
    build_joint_operator,
    conditioning_report,
    greedy_sensor_order,
    random_selection,
    vec,
)

RMSE_DEFINITION = "sqrt(mean over trials of ||est - true||_2^2) / ||true||_2"
REPORT_COLUMNS = ("k", "t", "rmse_mean", "rmse_stderr", "condition_number", "status")


@dataclass(frozen=True)
class GraphSource:
    kind: str  # plate | mesh | graph
    path: str | None = None
    width: float = 2.0
    height: float = 1.0
    nx: int = 16
    ny: int = 8
    cavity: tuple | None = (0.625, 0.25, 1.375, 0.75)

    @classmethod
    def from_dict(cls, d, base_dir="."):
        kind = d.get("type")
        if kind == "plate":
            cavity = d.get("cavity", cls.cavity)
            return cls(
                "plate",
                width=float(d.get("width", cls.width)),
                height=float(d.get("height", cls.height)),
                nx=int(d.get("nx", cls.nx)),
                ny=int(d.get("ny", cls.ny)),
                cavity=None if cavity is None else tuple(float(c) for c in cavity),
            )
        if kind in ("mesh", "graph"):
            if "path" not in d:
                raise ValueError(f"{kind} source needs a 'path'")
            return cls(kind, path=str(Path(base_dir, d["path"])))
        raise ValueError(f"unknown graph source type {kind!r}")

    def to_dict(self):
        if self.kind == "plate":
            return {
                "type": "plate",
                "width": self.width,
                "height": self.height,
                "nx": self.nx,
                "ny": self.ny,
                "cavity": None if self.cavity is None else list(self.cavity),
            }
        return {"type": self.kind, "path": self.path}


@lru_cache(maxsize=16)
def load_spectrum(source):
    """Laplacian spectrum of a graph source (cached per source)."""
    if source.kind == "plate":
        m = meshmod.generate_plate_with_cavity(
            source.width, source.height, source.nx, source.ny, source.cavity
        )
        L = meshmod.cotan_laplacian(m)
    elif source.kind == "mesh":
        L = meshmod.cotan_laplacian(meshmod.load_mesh(source.path))
    else:
        L = build_laplacian(read_graph(source.path))
    return eigendecompose(L)


@dataclass(frozen=True)
class SelectionPolicy:
    policy: str  # explicit | greedy | random
    k: int | None = None
    vertices: tuple | None = None  # 0-based
    seed: int | None = None
    objective: str = MAX_MIN_SINGULAR

    @classmethod
    def from_dict(cls, d):
        policy = d.get("policy")
        if policy == "explicit":
            verts = tuple(int(v) - 1 for v in d["vertices"])
            return cls("explicit", k=len(verts), vertices=verts)
        if policy in ("greedy", "random"):
            return cls(
                policy,
                k=int(d["k"]),
                seed=d.get("seed"),
                objective=d.get("objective", MAX_MIN_SINGULAR),
            )
        raise ValueError(f"unknown selection policy {policy!r}")

    def to_dict(self):
        if self.policy == "explicit":
            return {"policy": "explicit", "vertices": [v + 1 for v in self.vertices]}
        d = {"policy": self.policy, "k": self.k}
        if self.policy == "greedy":
            d["objective"] = self.objective
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass(frozen=True)
class SignalSpec:
    kind: str  # zero | sparse | bandlimited | vector
    entries: tuple = ()  # (0-based vertex, value) pairs
    bandwidth: int | None = None
    coefficients: tuple = ()
    values: tuple = ()

    @classmethod
    def from_dict(cls, d):
        kind = d.get("type", "zero") if d is not None else "zero"
        if kind == "zero":
            return cls("zero")
        if kind == "sparse":
            return cls("sparse", entries=tuple((int(i) - 1, float(v)) for i, v in d["entries"]))
        if kind == "bandlimited":
            coeffs = tuple(float(c) for c in d["coefficients"])
            p = int(d.get("bandwidth", len(coeffs)))
            if len(coeffs) != p:
                raise ValueError(f"bandlimited signal has {len(coeffs)} coefficients for bandwidth {p}")
            return cls("bandlimited", bandwidth=p, coefficients=coeffs)
        if kind == "vector":
            return cls("vector", values=tuple(float(v) for v in d["values"]))
        raise ValueError(f"unknown signal type {kind!r}")

    def to_dict(self):
        if self.kind == "sparse":
            return {"type": "sparse", "entries": [[i + 1, v] for i, v in self.entries]}
        if self.kind == "bandlimited":
            return {"type": "bandlimited", "bandwidth": self.bandwidth, "coefficients": list(self.coefficients)}
        if self.kind == "vector":
            return {"type": "vector", "values": list(self.values)}
        return {"type": "zero"}

    def realize(self, spectrum):
        n = spectrum.n
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "sparse":
            x = np.zeros(n)
            for i, v in self.entries:
                if not 0 <= i < n:
                    raise ValueError(f"sparse entry at vertex {i + 1} outside [1, {n}]")
                x[i] = v
            return x
        if self.kind == "bandlimited":
            return spectrum.lowpass_basis(self.bandwidth) @ np.array(self.coefficients)
        x = np.array(self.values)
        if x.shape != (n,):
            raise ValueError(f"signal has {x.size} values for {n} vertices")
        return x

    @property
    def is_zero(self):
        return self.kind == "zero"


@dataclass(frozen=True)
class Scenario:
    graph: GraphSource
    grid: TimeGrid
    selection: SelectionPolicy
    x0: SignalSpec = field(default_factory=lambda: SignalSpec("zero"))
    q: SignalSpec = field(default_factory=lambda: SignalSpec("zero"))
    mode: str = "auto"
    noise_variance: float = 0.0
    trials: int = 1
    seed: int = 0
    bandwidth: int | None = None  # joint recovery; defaults to q's bandwidth

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.noise_variance >= 0:
            raise ValueError("noise variance must be nonnegative")
        if self.mode not in ("auto", "initial", "input", "joint"):
            raise ValueError(f"unknown recovery mode {self.mode!r}")

    @classmethod
    def from_dict(cls, d, base_dir="."):
        noise = d.get("noise", {"type": "none"})
        if noise.get("type", "none") == "none":
            variance = 0.0
        elif noise["type"] == "gaussian":
            variance = float(noise["variance"])
        else:
            raise ValueError(f"unknown noise type {noise['type']!r}")
        g = d["grid"]
        sources = d.get("sources", {})
        return cls(
            graph=GraphSource.from_dict(d["graph"], base_dir),
            grid=TimeGrid(float(g["delta"]), int(g["count"]), int(g.get("start_index", 1))),
            selection=SelectionPolicy.from_dict(d["selection"]),
            x0=SignalSpec.from_dict(sources.get("x0")),
            q=SignalSpec.from_dict(sources.get("q")),
            mode=d.get("mode", "auto"),
            noise_variance=variance,
            trials=int(d.get("trials", 1)),
            seed=int(d.get("seed", 0)),
            bandwidth=d.get("bandwidth"),
        )

    def to_dict(self):
        d = {
            "graph": self.graph.to_dict(),
            "grid": {"delta": self.grid.delta, "count": self.grid.count, "start_index": self.grid.start_index},
            "selection": self.selection.to_dict(),
            "sources": {"x0": self.x0.to_dict(), "q": self.q.to_dict()},
            "mode": self.mode,
            "noise": (
                {"type": "gaussian", "variance": self.noise_variance}
                if self.noise_variance > 0
                else {"type": "none"}
            ),
            "trials": self.trials,
            "seed": self.seed,
        }
        if self.bandwidth is not None:
            d["bandwidth"] = self.bandwidth
        return d

    def recovery_mode(self):
        if self.mode != "auto":
            return self.mode
        if self.q.is_zero:
            return "initial"
        if self.x0.is_zero:
            return "input"
        return "joint"

    def joint_bandwidth(self):
        if self.bandwidth is not None:
            return int(self.bandwidth)
        if self.q.kind == "bandlimited":
            return self.q.bandwidth
        raise ValueError("joint recovery needs a bandwidth (set 'bandwidth' or use a bandlimited q)")


def load_scenario(path):
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    return Scenario.from_dict(data, base_dir=path.parent)


def default_scenario_path():
    return Path(__file__).with_name("data") / "plate_scenario.json"


def _noise_rng(seed, k, t, trial):
    ss = np.random.SeedSequence(seed, spawn_key=(0, k, t, trial))
    return np.random.Generator(np.random.Philox(ss))


def choose_sensors(scenario, spectrum, grid, k=None):
    sel = scenario.selection
    k = sel.k if k is None else k
    if sel.policy == "explicit":
        if k != len(sel.vertices):
            raise ValueError(f"explicit selection has {len(sel.vertices)} vertices, asked for {k}")
        return VertexSelection.of(sel.vertices, spectrum.n)
    if sel.policy == "random":
        seed = scenario.seed if sel.seed is None else sel.seed
        return random_selection(spectrum.n, k, np.random.SeedSequence(seed, spawn_key=(1, k)))
    if not 1 <= k <= spectrum.n:
        raise ValueError(f"need 1 <= k <= {spectrum.n}, got {k}")
    return VertexSelection.of(greedy_sensor_order(spectrum, grid, k, sel.objective), spectrum.n)


def build_operator(scenario, spectrum, grid, selection):
    mode = scenario.recovery_mode()
    if mode == "initial":
        return build_case1_operator(spectrum, grid, selection)
    if mode == "input":
        return build_case2_operator(spectrum, grid, selection)
    return build_joint_operator(spectrum, grid, selection, scenario.joint_bandwidth())


def _unknowns(scenario, spectrum):
    if scenario.recovery_mode() == "joint":
        return spectrum.n + scenario.joint_bandwidth()
    return spectrum.n


def _target(scenario):
    return "q" if scenario.recovery_mode() == "input" else "x0"


@dataclass
class SweepCell:
    k: int
    t: int
    rmse_mean: float = math.nan
    rmse_stderr: float = math.nan
    condition_number: float = math.nan
    status: str = "ok"

    def row(self):
        return (self.k, self.t, self.rmse_mean, self.rmse_stderr, self.condition_number, self.status)


@dataclass
class SweepReport:
    k_values: list
    t_values: list
    cells: list
    metadata: dict = field(default_factory=dict)

    def cell(self, k, t):
        for c in self.cells:
            if c.k == k and c.t == t:
                return c
        raise KeyError((k, t))

    def to_dict(self):
        def num(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return {
            "metadata": self.metadata,
            "k_values": list(self.k_values),
            "t_values": list(self.t_values),
            "columns": list(REPORT_COLUMNS),
            "rows": [[num(v) for v in c.row()] for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d):
        def num(v):
            return math.nan if v is None else v

        cells = [
            SweepCell(int(k), int(t), num(r), num(se), num(cn), st)
            for k, t, r, se, cn, st in d["rows"]
        ]
        return cls(list(d["k_values"]), list(d["t_values"]), cells, dict(d.get("metadata", {})))


def _errors(estimates, truth):
    # estimates: (N, trials)
    return np.sum((estimates - truth[:, None]) ** 2, axis=0)


def _rmse(sq_errors, truth_norm):
    n = sq_errors.size
    mse = float(np.mean(sq_errors))
    rmse = math.sqrt(mse)
    if n > 1 and rmse > 0:
        se_mse = float(np.std(sq_errors, ddof=1)) / math.sqrt(n)
        se = se_mse / (2.0 * rmse)
    else:
        se = 0.0
    if truth_norm == 0:
        return rmse, se
    return rmse / float(truth_norm), se / float(truth_norm)


@dataclass
class CellRun:
    cell: SweepCell
    result: object = None  # RecoveryResult of trial 0
    errors: dict = field(default_factory=dict)  # relative errors of trial 0
    selection: VertexSelection | None = None


def _run_cell(scenario, spectrum, k, t, selection=None):
    cell = SweepCell(k, t)
    grid = replace(scenario.grid, count=t)
    if k * t < _unknowns(scenario, spectrum):
        cell.status = "infeasible"
        return CellRun(cell)
    try:
        if selection is None:
            selection = choose_sensors(scenario, spectrum, grid, k)
        op = build_operator(scenario, spectrum, grid, selection)
        report = conditioning_report(op)
        cell.condition_number = float(report.condition_number)
        if not report.full_column_rank:
            raise IdentifiabilityError(f"numerical rank {report.rank} < {op.shape[1]}")
    except IdentifiabilityError:
        cell.status = "infeasible"
        return CellRun(cell, selection=selection)

    x0 = scenario.x0.realize(spectrum)
    q = scenario.q.realize(spectrum)
    X = simulate_field(spectrum, SourceConfig(x0, q), grid)
    Y = selection.observe(X)
    trials = scenario.trials if scenario.noise_variance > 0 else 1
    Ys = np.repeat(vec(Y)[:, None], trials, axis=1)
    if scenario.noise_variance > 0:
        sd = math.sqrt(scenario.noise_variance)
        for j in range(trials):
            Ys[:, j] += _noise_rng(scenario.seed, k, t, j).normal(0.0, sd, size=Ys.shape[0])

    theta = solve_least_squares(op, Ys)
    N = spectrum.n
    U = spectrum.eigenvectors
    est = {}
    mode = scenario.recovery_mode()
    if mode == "initial":
        est["x0"] = U @ theta
    elif mode == "input":
        est["q"] = U @ theta
    else:
        est["x0"] = U @ theta[:N]
        est["q"] = spectrum.lowpass_basis(op.bandwidth) @ theta[N:]
    truth = {"x0": x0, "q": q}

    target = _target(scenario)
    cell.rmse_mean, cell.rmse_stderr = _rmse(_errors(est[target], truth[target]), np.linalg.norm(truth[target]))

    Y0 = Ys[:, 0].reshape(Y.shape, order="F")
    result = recover(Y0, op, spectrum)
    errors = {}
    for name, e in est.items():
        ref = np.linalg.norm(truth[name])
        diff = np.linalg.norm(e[:, 0] - truth[name])
        errors[name] = diff / ref if ref > 0 else diff
    return CellRun(cell, result, errors, selection)


def _metadata(scenario, spectrum):
    return {
        "rmse_definition": RMSE_DEFINITION,
        "rmse_target": _target(scenario),
        "mode": scenario.recovery_mode(),
        "n_vertices": spectrum.n,
        "delta": scenario.grid.delta,
        "start_index": scenario.grid.start_index,
        "noise_variance": scenario.noise_variance,
        "trials": scenario.trials if scenario.noise_variance > 0 else 1,
        "seed": scenario.seed,
        "selection_policy": scenario.selection.policy,
    }


@dataclass
class ScenarioOutcome:
    result: object  # RecoveryResult, None when infeasible
    errors: dict
    report: SweepReport
    selection: VertexSelection | None

    def to_dict(self):
        return {
            "report": self.report.to_dict(),
            "recovery": None if self.result is None else self.result.to_dict(),
            "relative_errors": self.errors,
            "selection": None if self.selection is None else [v + 1 for v in self.selection.vertices],
        }


def run_scenario(scenario):
    """Simulate, observe, add noise and recover for one scenario.

    The returned :class:`RecoveryResult` belongs to the first trial; the
    one-cell report aggregates all trials. Raises
    :class:`IdentifiabilityError` when the configuration cannot be solved.
    """
    spectrum = load_spectrum(scenario.graph)
    k = scenario.selection.k
    t = scenario.grid.count
    run = _run_cell(scenario, spectrum, k, t)
    if run.cell.status != "ok":
        raise IdentifiabilityError(
            f"scenario with K={k}, T={t} is not identifiable "
            f"({k * t} observations, {_unknowns(scenario, spectrum)} unknowns)"
        )
    report = SweepReport([k], [t], [run.cell], _metadata(scenario, spectrum))
    return ScenarioOutcome(run.result, run.errors, report, run.selection)


def rmse_sweep(scenario, k_values, t_values, workers=None):
    """Normalized RMSE over a grid of sensor counts and sample counts.

    Cells run on a thread pool; the report lists them in ``k``-major order
    whatever the completion order. Cells with fewer observations than
    unknowns, or whose operator is rank deficient, are marked infeasible.
    """
    spectrum = load_spectrum(scenario.graph)
    k_values = [int(k) for k in k_values]
    t_values = [int(t) for t in t_values]

    # greedy picks are prefix-stable, so one run per T serves every K
    orders = {}
    if scenario.selection.policy == "greedy" and k_values:
        kmax = min(max(k_values), spectrum.n)

        def order_for(t):
            grid = replace(scenario.grid, count=t)
            return greedy_sensor_order(spectrum, grid, kmax, scenario.selection.objective)

        with ThreadPoolExecutor(max_workers=workers or os.cpu_count()) as pool:
            orders = dict(zip(t_values, pool.map(order_for, t_values)))

    def job(kt):
        k, t = kt
        selection = None
        if k in range(1, spectrum.n + 1) and t in orders:
            selection = VertexSelection.of(orders[t][:k], spectrum.n)
        return _run_cell(scenario, spectrum, k, t, selection).cell

    pairs = [(k, t) for k in k_values for t in t_values]
    with ThreadPoolExecutor(max_workers=workers or os.cpu_count()) as pool:
        cells = list(pool.map(job, pairs))
    return SweepReport(k_values, t_values, cells, _metadata(scenario, spectrum))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def report_to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for c in report.cells:
        writer.writerow([_fmt(v) for v in c.row()])
    return buf.getvalue()


def emit_report(report, fmt, path):
    """Write ``report`` as ``csv`` or ``json`` to ``path``."""
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)


def read_report(path):
    """Read a report written by :func:`emit_report` (format from the extension)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return SweepReport.from_dict(json.loads(text))
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != REPORT_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header")
    cells = [
        SweepCell(int(k), int(t), float(r), float(se), float(cn), st) for k, t, r, se, cn, st in rows[1:]
    ]
    ks = list(dict.fromkeys(c.k for c in cells))
    ts = list(dict.fromkeys(c.t for c in cells))
    return SweepReport(ks, ts, cells)
