"""Parallel (gamma, omega) grids, EP contour tracing, and persistence.

Grid cells are independent pure-function evaluations, so a sweep is
farmed out to a process pool in column tasks and reassembled by index;
the output is bit-identical for any worker count.  Per-cell numerical
failures become NaN sentinels and are logged; more than 1% failures
aborts the sweep.
"""

from __future__ import annotations

import datetime
import json
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .berry import berry_phase_loop
from .floquet import max_im_quasienergy
from .model import PresetTemplate
from .propagator import (
    EPKind,
    ep_indicator,
    monodromy,
    quasienergy_from_trace,
    segment_hamiltonians,
    _segment_product,
)

log = logging.getLogger(__name__)

ENGINES = ("floquet", "monodromy-piecewise", "monodromy-integrate")

INSTABILITY_THRESHOLD = 1e-8  # max Im eps above this counts as unstable

DEFAULT_FAILURE_BUDGET = 0.01


class FailureBudgetExceeded(RuntimeError):
    """Too many grid cells failed numerically."""


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (gamma, omega) grid plus the evaluation engine."""

    gamma_min: float
    gamma_max: float
    gamma_count: int
    omega_min: float
    omega_max: float
    omega_count: int
    engine: str = "monodromy-piecewise"

    def __post_init__(self):
        if self.gamma_count < 2 or self.omega_count < 2:
            raise ValueError("grid counts must be >= 2")
        if not self.omega_min > 0:
            raise ValueError("omega_min must be > 0")
        if self.gamma_min < 0:
            raise ValueError("gamma_min must be >= 0")
        if self.gamma_max < self.gamma_min or self.omega_max < self.omega_min:
            raise ValueError("grid ranges must be ordered")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; known: {', '.join(ENGINES)}")

    @property
    def gammas(self) -> np.ndarray:
        return np.linspace(self.gamma_min, self.gamma_max, self.gamma_count)

    @property
    def omegas(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.omega_count)


@dataclass(eq=False)
class PhaseDiagram:
    """Row-major stability map: ``values[j, i] = max Im eps`` at
    ``(omegas[j], gammas[i])``."""

    grid: GridSpec
    values: np.ndarray
    metadata: dict


class ContourPoint(NamedTuple):
    omega: float
    gamma: float
    kind: str


@dataclass(eq=False)
class EPContourSet:
    """Degeneracy roots linked into polylines.

    Exceptional points are chained across neighbouring frequency columns;
    diabolic roots stay as singleton contours so they never pollute the
    EP polylines.
    """

    contours: tuple  # tuple of tuples of ContourPoint
    tolerance: float
    metadata: dict


@dataclass(eq=False)
class BerrySweep:
    """Geometric phase of both bands across a gamma range."""

    gammas: np.ndarray
    thetas: np.ndarray  # (n, 2) complex
    flags: tuple        # per gamma: tuple of flagged loop positions
    metadata: dict


def _cell_half_trace(template: PresetTemplate, gamma, omega, engine, steps):
    if engine == "monodromy-piecewise":
        model = template.instantiate(float(gamma), float(omega))
        g00, _, _, g11 = _segment_product(segment_hamiltonians(model))
        return 0.5 * (g00 + g11)
    if engine == "monodromy-integrate":
        model = template.instantiate(float(gamma), float(omega))
        return monodromy(model, engine="integrate", steps_per_period=steps).half_trace
    raise ValueError(f"engine {engine!r} has no half-trace route")


def _cell_max_im(template: PresetTemplate, gamma, omega, engine, cutoff, steps) -> float:
    if engine == "floquet":
        model = template.instantiate(float(gamma), float(omega))
        return max_im_quasienergy(model, cutoff)
    c = _cell_half_trace(template, gamma, omega, engine, steps)
    eps = quasienergy_from_trace(c, 2.0 * math.pi / float(omega))
    return abs(eps.imag)


def _column_task(args):
    j, omega, template, gammas, engine, cutoff, steps = args
    vals = np.empty(len(gammas))
    errors = []
    for i, g in enumerate(gammas):
        try:
            vals[i] = _cell_max_im(template, g, omega, engine, cutoff, steps)
        except Exception as exc:  # recorded as NaN sentinel, budget-checked later
            vals[i] = np.nan
            errors.append((j, i, f"{type(exc).__name__}: {exc}"))
    return j, vals, errors


def _engine_family_check(template: PresetTemplate, engine: str):
    if engine == "floquet" and template.family != "smooth":
        raise ValueError("the floquet engine needs a smooth-family model")
    if engine == "monodromy-piecewise" and template.family != "square":
        raise ValueError("the piecewise engine needs a square-family model")


def phase_diagram(
    template: PresetTemplate,
    grid: GridSpec,
    threads: int = 1,
    cutoff: int = 20,
    steps_per_period: int = 200_000,
    failure_budget: float = DEFAULT_FAILURE_BUDGET,
) -> PhaseDiagram:
    """Evaluate ``max Im eps`` on every grid node.

    Cells are independent; with ``threads > 1`` the frequency columns are
    distributed over a process pool and written back into pre-assigned
    rows, so the result does not depend on the worker count.
    """
    _engine_family_check(template, grid.engine)
    gammas = grid.gammas
    tasks = [
        (j, float(w), template, gammas, grid.engine, cutoff, steps_per_period)
        for j, w in enumerate(grid.omegas)
    ]
    if threads > 1:
        with Pool(processes=threads) as pool:
            results = pool.map(_column_task, tasks, chunksize=1)
    else:
        results = [_column_task(t) for t in tasks]

    values = np.empty((grid.omega_count, grid.gamma_count))
    errors = []
    for j, vals, errs in results:
        values[j] = vals
        errors.extend(errs)
    for j, i, msg in errors:
        log.warning("cell (omega index %d, gamma index %d) failed: %s", j, i, msg)
    n_bad = int(np.sum(~np.isfinite(values)))
    if n_bad > failure_budget * values.size:
        raise FailureBudgetExceeded(
            f"{n_bad} of {values.size} cells failed (> {failure_budget:.0%} budget)"
        )
    metadata = {
        "model": template.label,
        "engine": grid.engine,
        "cutoff": cutoff,
        "steps_per_period": steps_per_period,
        "failed_cells": n_bad,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    return PhaseDiagram(grid=grid, values=values, metadata=metadata)


def instability_window(diagram: PhaseDiagram, gamma: float) -> list[tuple[float, float]]:
    """Maximal contiguous frequency intervals that are unstable at ``gamma``.

    ``gamma`` is matched to the nearest grid row; each returned interval
    spans the first to last contiguous node with
    ``max Im eps > 1e-8``.
    """
    gammas = diagram.grid.gammas
    if not (gammas[0] - 1e-12 <= gamma <= gammas[-1] + 1e-12):
        raise ValueError(f"gamma {gamma} outside grid range [{gammas[0]}, {gammas[-1]}]")
    i = int(np.argmin(np.abs(gammas - gamma)))
    row = diagram.values[:, i]
    omegas = diagram.grid.omegas
    unstable = row > INSTABILITY_THRESHOLD
    windows = []
    start = None
    for j, flag in enumerate(unstable):
        if flag and start is None:
            start = j
        elif not flag and start is not None:
            windows.append((float(omegas[start]), float(omegas[j - 1])))
            start = None
    if start is not None:
        windows.append((float(omegas[start]), float(omegas[-1])))
    return windows


def _ep_f_value(c: complex, im_tol: float = 1e-9) -> float:
    if abs(c.imag) < im_tol:
        return abs(c.real) - 1.0
    return abs(c.imag)


def _classify_root(template, gamma, omega, engine, steps, f_tol):
    model = template.instantiate(float(gamma), float(omega))
    eng = "piecewise" if engine == "monodromy-piecewise" else "integrate"
    res = monodromy(model, engine=eng, steps_per_period=steps)
    f, kind = ep_indicator(res, root_tol=f_tol)
    return f, kind


def trace_ep_contours(
    template: PresetTemplate,
    grid: GridSpec,
    f_tol: float = 1e-6,
    steps_per_period: int = 200_000,
    max_iter: int = 200,
) -> EPContourSet:
    """Locate and link degeneracy roots of the half-trace indicator.

    Each frequency column is scanned in gamma for sign changes of the
    indicator ``f``; every bracket is bisected until both the bracket
    width and ``|f|`` at the root fall below ``f_tol``.  Roots that
    cannot be pinned down (indicator discontinuity) are dropped and
    logged.  Exceptional points in neighbouring columns are linked by
    nearest-gamma matching within 3 grid cells.
    """
    if grid.engine == "floquet":
        raise ValueError("EP contour tracing needs a monodromy engine")
    _engine_family_check(template, grid.engine)
    gammas = grid.gammas
    omegas = grid.omegas
    dgamma = float(gammas[1] - gammas[0])

    def f_at(g, w):
        return _ep_f_value(_cell_half_trace(template, g, w, grid.engine, steps_per_period))

    open_lines: list[list[ContourPoint]] = []
    open_last_col: list[int] = []
    closed_lines: list[list[ContourPoint]] = []
    singletons: list[list[ContourPoint]] = []

    for j, w in enumerate(omegas):
        fs = np.array([f_at(g, w) for g in gammas])
        roots: list[tuple[float, EPKind]] = []
        for i in range(len(gammas)):
            if abs(fs[i]) <= f_tol:
                # root on a node (tangency roots never change sign)
                if roots and abs(roots[-1][0] - gammas[i]) < 0.5 * dgamma:
                    continue
                _, kind = _classify_root(
                    template, gammas[i], w, grid.engine, steps_per_period, f_tol
                )
                roots.append((float(gammas[i]), kind))
        for i in range(len(gammas) - 1):
            f0, f1 = fs[i], fs[i + 1]
            if abs(f0) <= f_tol or abs(f1) <= f_tol or f0 * f1 > 0:
                continue
            lo, hi, flo = float(gammas[i]), float(gammas[i + 1]), f0
            fmid, mid = f0, lo
            it = 0
            while it < max_iter:
                mid = 0.5 * (lo + hi)
                fmid = f_at(mid, w)
                if hi - lo < 1e-6 and abs(fmid) <= f_tol:
                    break
                if fmid == 0.0:
                    break
                if (fmid > 0) == (flo > 0):
                    lo, flo = mid, fmid
                else:
                    hi = mid
                it += 1
            if it >= max_iter:
                log.warning(
                    "EP root lost during bisection at omega=%.6g, gamma in [%.6g, %.6g]",
                    w, gammas[i], gammas[i + 1],
                )
                continue
            _, kind = _classify_root(template, mid, w, grid.engine, steps_per_period, f_tol)
            roots.append((float(mid), kind))

        roots.sort(key=lambda r: r[0])
        ep_roots = [g for g, kind in roots if kind is EPKind.EP]
        for g, kind in roots:
            if kind is EPKind.DIABOLIC:
                singletons.append([ContourPoint(float(w), g, kind.value)])

        # link EP roots to polylines ending in the previous column
        still_open: list[list[ContourPoint]] = []
        still_cols: list[int] = []
        candidates = [
            (li, line) for li, (line, col) in enumerate(zip(open_lines, open_last_col))
            if col == j - 1
        ]
        used = set()
        assigned: dict[int, int] = {}
        pairs = sorted(
            (
                (abs(line[-1].gamma - g), li, ri)
                for li, line in candidates
                for ri, g in enumerate(ep_roots)
            ),
        )
        for dist, li, ri in pairs:
            if dist > 3.0 * dgamma or li in used or ri in assigned:
                continue
            used.add(li)
            assigned[ri] = li
        for ri, g in enumerate(ep_roots):
            if ri in assigned:
                line = open_lines[assigned[ri]]
                line.append(ContourPoint(float(w), g, EPKind.EP.value))
            else:
                open_lines.append([ContourPoint(float(w), g, EPKind.EP.value)])
                open_last_col.append(j)
        for li, (line, col) in enumerate(zip(open_lines, open_last_col)):
            if li in used:
                still_open.append(line)
                still_cols.append(j)
            elif col == j:  # just created
                still_open.append(line)
                still_cols.append(j)
            elif col <= j - 1:
                closed_lines.append(line)
            else:
                still_open.append(line)
                still_cols.append(col)
        open_lines, open_last_col = still_open, still_cols

    closed_lines.extend(open_lines)
    closed_lines.extend(singletons)
    closed_lines.sort(key=lambda line: (line[0].omega, line[0].gamma))
    metadata = {
        "model": template.label,
        "engine": grid.engine,
        "tolerance": f_tol,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    return EPContourSet(
        contours=tuple(tuple(line) for line in closed_lines),
        tolerance=f_tol,
        metadata=metadata,
    )


def _berry_task(args):
    idx, gamma, template, omega, steps, richardson, on_ep = args
    model = template.instantiate(float(gamma), float(omega))
    res = berry_phase_loop(model, steps=steps, richardson=richardson, on_ep=on_ep)
    return idx, res.theta, res.degeneracy_flags, res.step_delta, res.certified


def berry_gamma_sweep(
    template: PresetTemplate,
    gammas,
    omega: float = 1.0,
    steps: int = 8192,
    richardson: bool = True,
    on_ep: str = "flag",
    threads: int = 1,
) -> BerrySweep:
    """Geometric phase of both bands for each gamma (deterministic order).

    ``on_ep='flag'`` by default so a sweep can cross drive strengths whose
    loop grazes an exceptional point without aborting the whole curve.
    """
    gammas = np.asarray(gammas, dtype=float)
    tasks = [
        (i, float(g), template, omega, steps, richardson, on_ep)
        for i, g in enumerate(gammas)
    ]
    if threads > 1:
        with Pool(processes=threads) as pool:
            results = pool.map(_berry_task, tasks, chunksize=1)
    else:
        results = [_berry_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    thetas = np.array([r[1] for r in results])
    flags = tuple(tuple(r[2]) for r in results)
    deltas = [r[3] for r in results if r[3] is not None and r[4]]
    uncertified = [float(gammas[r[0]]) for r in results if not r[4]]
    metadata = {
        "model": template.label,
        "omega": omega,
        "steps": steps,
        "richardson": richardson,
        "max_step_delta": max(deltas) if deltas else None,
        "all_certified": not uncertified,
        "uncertified_gammas": uncertified,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    return BerrySweep(gammas=gammas, thetas=thetas, flags=flags, metadata=metadata)


# ----------------------------------------------------------------------
# persistence

_SCHEMA_VERSION = 1

_DIAGRAM_HEADER = "omega,gamma,max_im_eps"
_CONTOUR_HEADER = "contour_id,omega,gamma,kind"
_BERRY_HEADER = "gamma,band,re_theta,im_theta,flags"


def _fmt(x: float) -> str:
    return f"{float(x):.12e}"


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _write_meta(path: Path, fmt: str, payload: dict):
    doc = {"schema_version": _SCHEMA_VERSION, "format": fmt}
    doc.update(payload)
    with open(_meta_path(path), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_meta(path: Path, expected_fmt: str) -> dict:
    mp = _meta_path(path)
    if not mp.exists():
        raise FileNotFoundError(f"missing metadata sidecar {mp}")
    with open(mp) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != _SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema version {doc.get('schema_version')!r} in {mp}"
        )
    if doc.get("format") != expected_fmt:
        raise ValueError(f"expected format {expected_fmt!r}, found {doc.get('format')!r}")
    return doc


def persist(result, path) -> Path:
    """Write a result to ``path`` (CSV plus a JSON metadata sidecar)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(result, PhaseDiagram):
        _save_diagram(result, path)
    elif isinstance(result, EPContourSet):
        _save_contours(result, path)
    elif isinstance(result, BerrySweep):
        _save_berry(result, path)
    else:
        raise TypeError(f"cannot persist {type(result).__name__}")
    return path


def load(path):
    """Inverse of :func:`persist`; dispatches on the CSV header."""
    path = Path(path)
    with open(path, newline="\n") as fh:
        header = fh.readline().strip()
    if header == _DIAGRAM_HEADER:
        return _load_diagram(path)
    if header == _CONTOUR_HEADER:
        return _load_contours(path)
    if header == _BERRY_HEADER:
        return _load_berry(path)
    raise ValueError(f"unrecognized file header {header!r} in {path}")


def _save_diagram(diagram: PhaseDiagram, path: Path):
    gammas = diagram.grid.gammas
    omegas = diagram.grid.omegas
    lines = [_DIAGRAM_HEADER]
    for j, w in enumerate(omegas):
        for i, g in enumerate(gammas):
            lines.append(f"{_fmt(w)},{_fmt(g)},{_fmt(diagram.values[j, i])}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    grid = diagram.grid
    _write_meta(
        path,
        "phase-diagram",
        {
            "grid": {
                "gamma_min": grid.gamma_min,
                "gamma_max": grid.gamma_max,
                "gamma_count": grid.gamma_count,
                "omega_min": grid.omega_min,
                "omega_max": grid.omega_max,
                "omega_count": grid.omega_count,
                "engine": grid.engine,
            },
            "metadata": diagram.metadata,
        },
    )


def _load_diagram(path: Path) -> PhaseDiagram:
    doc = _read_meta(path, "phase-diagram")
    grid = GridSpec(**doc["grid"])
    values = np.full((grid.omega_count, grid.gamma_count), np.nan)
    with open(path, newline="\n") as fh:
        header = fh.readline().strip()
        if header != _DIAGRAM_HEADER:
            raise ValueError(f"malformed phase-diagram file {path}")
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"malformed row in {path}: {line!r}")
            j, i = divmod(count, grid.gamma_count)
            if j >= grid.omega_count:
                raise ValueError(f"too many rows in {path}")
            values[j, i] = float(parts[2])
            count += 1
    if count != grid.omega_count * grid.gamma_count:
        raise ValueError(
            f"row count {count} does not match grid "
            f"{grid.omega_count}x{grid.gamma_count} in {path}"
        )
    return PhaseDiagram(grid=grid, values=values, metadata=doc["metadata"])


def _save_contours(contours: EPContourSet, path: Path):
    lines = [_CONTOUR_HEADER]
    for cid, line in enumerate(contours.contours):
        for pt in line:
            lines.append(f"{cid},{_fmt(pt.omega)},{_fmt(pt.gamma)},{pt.kind}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_meta(
        path,
        "ep-contours",
        {"tolerance": contours.tolerance, "metadata": contours.metadata},
    )


def _load_contours(path: Path) -> EPContourSet:
    doc = _read_meta(path, "ep-contours")
    lines: dict[int, list[ContourPoint]] = {}
    with open(path, newline="\n") as fh:
        header = fh.readline().strip()
        if header != _CONTOUR_HEADER:
            raise ValueError(f"malformed contour file {path}")
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            cid_s, w_s, g_s, kind = raw.split(",")
            lines.setdefault(int(cid_s), []).append(
                ContourPoint(float(w_s), float(g_s), kind)
            )
    contours = tuple(tuple(lines[k]) for k in sorted(lines))
    return EPContourSet(
        contours=contours, tolerance=doc["tolerance"], metadata=doc["metadata"]
    )


def _save_berry(sweep: BerrySweep, path: Path):
    lines = [_BERRY_HEADER]
    for i, g in enumerate(sweep.gammas):
        flag_s = ";".join(_fmt(v) for v in sweep.flags[i])
        for b in (0, 1):
            th = sweep.thetas[i, b]
            lines.append(f"{_fmt(g)},{b},{_fmt(th.real)},{_fmt(th.imag)},{flag_s}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_meta(path, "berry", {"metadata": sweep.metadata})


def _load_berry(path: Path) -> BerrySweep:
    doc = _read_meta(path, "berry")
    gammas: list[float] = []
    flags: list[tuple] = []
    rows: list[list[complex]] = []
    with open(path, newline="\n") as fh:
        header = fh.readline().strip()
        if header != _BERRY_HEADER:
            raise ValueError(f"malformed berry file {path}")
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            g_s, b_s, re_s, im_s, flag_s = raw.split(",")
            band = int(b_s)
            if band == 0:
                gammas.append(float(g_s))
                flags.append(
                    tuple(float(v) for v in flag_s.split(";")) if flag_s else ()
                )
                rows.append([0.0j, 0.0j])
            rows[-1][band] = complex(float(re_s), float(im_s))
    return BerrySweep(
        gammas=np.array(gammas),
        thetas=np.array(rows),
        flags=tuple(flags),
        metadata=doc["metadata"],
    )
