"""Experiment orchestration: configs, mesh ladders, EoC tables, fine references, outputs."""
import hashlib
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .pipeline import RunSettings, Simulation, l1_distance


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# ---------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    name: str
    segments: list
    T: float
    ladder: tuple = (400, 800, 1600, 3200)
    model: str = "burgers"
    eps: float = 0.5
    delta: float = None
    report_times: tuple = ()
    fine_mult: int = 8
    level_set: str = "abort"
    plot_window: tuple = (0.0, 1.0)
    cfl: float = 0.45

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("at least one segment is required")
        if self.T <= 0.0:
            raise ConfigError("T must be positive")
        if len(self.ladder) == 0 or any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("ladder must be strictly increasing")
        if any(c <= 0 for c in self.ladder):
            raise ConfigError("cell counts must be positive")
        if self.fine_mult < 1:
            raise ConfigError("fine multiplier must be at least 1")
        if self.level_set not in ("abort", "record"):
            raise ConfigError("level_set must be 'abort' or 'record'")
        if self.delta is not None and self.delta <= 0.0:
            raise ConfigError("delta must be positive")
        if self.eps <= 0.0:
            raise ConfigError("eps must be positive")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl must lie in (0, 1]")

    def settings(self, cells, estimate=True, check=True):
        return RunSettings(
            cells,
            self.T,
            eps=self.eps,
            delta=self.delta,
            model=self.model,
            cfl=self.cfl,
            report_times=tuple(self.report_times),
            estimate=estimate,
            check=check,
            level_set=self.level_set,
            plot_window=tuple(self.plot_window),
        )

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _number(tok):
    t = tok.strip().lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    try:
        return float(t)
    except ValueError as exc:
        raise ConfigError(f"not a number: {tok!r}") from exc


_SCALAR = {"name", "model", "T", "eps", "delta", "fine_mult", "level_set", "cfl"}
_LIST = {"ladder", "report_times", "plot_window"}


def parse_config(text):
    """Parse the key = value grammar; 'segment' may repeat, '#' starts a comment."""
    vals = {}
    segs = []
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        toks = val.split()
        if key == "segment":
            if len(toks) < 4:
                raise ConfigError(f"line {num}: segment needs a, b, kind and coefficients")
            a, b, kind = _number(toks[0]), _number(toks[1]), toks[2]
            coeffs = [_number(c) for c in toks[3:]]
            need = {"const": 1, "affine": 2}.get(kind)
            if need is None:
                raise ConfigError(f"line {num}: unknown segment kind {kind!r}")
            if len(coeffs) != need:
                raise ConfigError(f"line {num}: {kind} takes {need} coefficient(s)")
            segs.append((a, b, kind, coeffs))
        elif key in _SCALAR:
            if key in vals:
                raise ConfigError(f"line {num}: duplicate key {key!r}")
            vals[key] = val
        elif key in _LIST:
            vals[key] = toks
        else:
            raise ConfigError(f"line {num}: unknown key {key!r}")
    if "T" not in vals:
        raise ConfigError("missing key 'T'")
    kw = {"name": vals.get("name", "experiment"), "segments": segs, "T": _number(vals["T"])}
    if "model" in vals:
        kw["model"] = vals["model"]
    if "eps" in vals:
        kw["eps"] = _number(vals["eps"])
    if "delta" in vals:
        kw["delta"] = None if vals["delta"] == "sqrt_h" else _number(vals["delta"])
    if "fine_mult" in vals:
        try:
            kw["fine_mult"] = int(vals["fine_mult"])
        except ValueError as exc:
            raise ConfigError("fine_mult must be an integer") from exc
    if "level_set" in vals:
        kw["level_set"] = vals["level_set"]
    if "cfl" in vals:
        kw["cfl"] = _number(vals["cfl"])
    if "ladder" in vals:
        try:
            kw["ladder"] = tuple(int(c) for c in vals["ladder"])
        except ValueError as exc:
            raise ConfigError("ladder entries must be integers") from exc
    if "report_times" in vals:
        kw["report_times"] = tuple(_number(c) for c in vals["report_times"])
    if "plot_window" in vals:
        if len(vals["plot_window"]) != 2:
            raise ConfigError("plot_window takes two numbers")
        kw["plot_window"] = tuple(_number(c) for c in vals["plot_window"])
    return ExperimentConfig(**kw)


def bundled_configs():
    return sorted(
        p.name[:-4] for p in resources.files("shockcert.configs").iterdir() if p.name.endswith(".cfg")
    )


def load_config(path_or_name):
    """Read a config file, or a bundled one by name ('exp1', 'exp2')."""
    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            return parse_config(fh.read())
    if path_or_name in bundled_configs():
        text = resources.files("shockcert.configs").joinpath(path_or_name + ".cfg").read_text()
        return parse_config(text)
    raise ConfigError(f"no such config: {path_or_name}")


# ---------------------------------------------------------------- runs


def run_rung(cfg, cells, estimate=True, check=True):
    try:
        return Simulation(cfg.segments, cfg.settings(cells, estimate, check)).run()
    except (ValueError, AssertionError, RuntimeError, FloatingPointError) as exc:
        if isinstance(exc, ConfigError):
            raise
        exc.args = (f"[{cfg.name} @ {cells} cells] " + (str(exc.args[0]) if exc.args else ""),) + exc.args[1:]
        raise


def run_experiment(cfg, ladder=None, progress=None):
    """Run every rung in turn; returns a list of (cells, RunResult)."""
    out = []
    for cells in ladder or cfg.ladder:
        res = run_rung(cfg, cells)
        out.append((cells, res))
        if progress:
            progress(cells, res)
    return out


def fine_reference_compare(cfg, cells, mult=None, coarse=None):
    """L1 distance at T between the glued solutions at cells and mult x cells."""
    mult = cfg.fine_mult if mult is None else int(mult)
    if mult < 1:
        raise ConfigError("fine multiplier must be at least 1")
    if coarse is None:
        coarse = run_rung(cfg, cells, estimate=False, check=False)
    if mult == 1:
        return 0.0
    fine = run_rung(cfg, cells * mult, estimate=False, check=False)
    return l1_distance(coarse.snapshot, fine.snapshot)


# ---------------------------------------------------------------- EoC


def eoc(values, widths):
    """Experimental orders log(E_k / E_{k+1}) / log(h_k / h_{k+1}); None where undefined."""
    if len(values) != len(widths):
        raise ValueError("values and widths need equal lengths")
    if len(values) < 2:
        raise ValueError("need at least two rungs")
    out = [None]
    for (e0, h0), (e1, h1) in zip(zip(values, widths), zip(values[1:], widths[1:])):
        ok = all(v is not None and math.isfinite(v) and v > 0 for v in (e0, e1, h0, h1)) and h0 != h1
        out.append(math.log(e0 / e1) / math.log(h0 / h1) if ok else None)
    return out


@dataclass
class EocTable:
    cells: list
    columns: dict = field(default_factory=dict)

    @property
    def widths(self):
        return [1.0 / c for c in self.cells]

    def add(self, name, values):
        if len(values) != len(self.cells):
            raise ValueError("column length must match the ladder")
        self.columns[name] = [None if v is None else float(v) for v in values]

    def rates(self, name):
        return eoc(self.columns[name], self.widths)

    def header(self):
        head = ["cells"]
        for name in self.columns:
            head += [name, name + "_eoc"]
        return head

    def rows(self):
        rates = {n: self.rates(n) for n in self.columns} if len(self.cells) > 1 else {}
        out = []
        for r, cells in enumerate(self.cells):
            row = [cells]
            for name, vals in self.columns.items():
                row += [vals[r], rates[name][r] if rates else None]
            out.append(row)
        return out

    def to_csv(self):
        lines = [",".join(self.header())]
        for row in self.rows():
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def render(self):
        head = self.header()
        rows = [[_fmt(v, 4) for v in row] for row in self.rows()]
        wid = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(head)]
        lines = ["  ".join(h.rjust(w) for h, w in zip(head, wid))]
        lines += ["  ".join(c.rjust(w) for c, w in zip(r, wid)) for r in rows]
        return "\n".join(lines)


def _fmt(v, digits=6):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.{digits}g}"


def table_quantities(result):
    """Final-time quantities reported in the EoC table of one rung."""
    row = result.final
    if "upsilon" in row:
        keys = ("upsilon", "gamma", "delta_inner", "l2", "l1")
    else:
        keys = ("max_delta", "l2", "l1")
    return {k: row.get(k) for k in keys}


def summary_quantities(result):
    """Table quantities plus diagnostics kept in summary.json."""
    q = table_quantities(result)
    row = result.final
    if "upsilon" in row:
        q.update(max_delta=row["max_delta"], l2_fine=row["l2_fine"], worst=row["worst"])
    q["ambiguity_time"] = result.info.get("ambiguity_time")
    return q


def eoc_table(results, fine=None):
    cells = [c for c, _ in results]
    tab = EocTable(cells)
    per = [table_quantities(r) for _, r in results]
    for name in per[0]:
        tab.add(name, [p.get(name) for p in per])
    if fine is not None:
        tab.add("fine_l1", [fine.get(c) for c in cells])
    return tab


# ---------------------------------------------------------------- outputs


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_csv(result):
    """One row per output time: t, R, L2, L1, then one Delta column per curve."""
    rows = result.rows
    if not rows or "l1" not in rows[0]:
        return "t\n" + "".join(_fmt(r["t"]) + "\n" for r in rows)
    ncurves = len(rows[0]["deltas"])
    head = ["t", "R", "l2", "l1"] + [f"delta_{i}" for i in range(ncurves)]
    lines = [",".join(head)]
    for r in rows:
        vals = [r["t"], r["R"], r["l2"], r["l1"]] + list(r["deltas"])
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_snapshots(outdir, cells, result):
    """Plot data: (x, u) per output time and one (t, curve, x, delta) file per rung."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    curves = ["t first last x delta"]
    for plot in result.plots:
        path = os.path.join(outdir, f"snap_{cells}_t{plot['requested']:.6f}.dat")
        body = "\n".join(f"{x:.10g} {u:.10g}" for x, u in zip(plot["x"], plot["u"]))
        _write(path, f"# t = {plot['t']:.10g}\n# x u\n" + body + "\n")
        paths.append(path)
        deltas = plot.get("deltas")
        for first, last, x in plot["curves"]:
            d = max(deltas[first : last + 1]) if deltas else float("nan")
            curves.append(f"{plot['t']:.10g} {first} {last} {x:.10g} {d:.10g}")
    path = os.path.join(outdir, f"curves_{cells}.dat")
    _write(path, "\n".join(curves) + "\n")
    paths.append(path)
    return paths


def write_manifest(outdir, cfg, status, wall, rungs=(), error=None):
    from . import _kernels

    man = {
        "config": _plain(asdict(cfg)) if cfg is not None else None,
        "config_hash": cfg.digest() if cfg is not None else None,
        "status": status,
        "error": error,
        "wall_time": wall,
        "rungs": list(rungs),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "numba": _version("numba"),
            "shockcert": _version("shockcert"),
        },
        "numba_kernels": _kernels.USE_NUMBA,
    }
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "manifest.json")
    _write(path, json.dumps(man, indent=2, sort_keys=True) + "\n")
    return path


def _version(dist):
    try:
        return version(dist)
    except PackageNotFoundError:
        return None


def emit_outputs(outdir, cfg, results, fine=None, wall=None):
    """Write per-rung CSV and JSON, plot data, the EoC table and the manifest."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    for cells, res in results:
        p = os.path.join(outdir, f"report_{cells}.csv")
        _write(p, report_csv(res))
        written.append(p)
        events = {
            "merges": _plain(res.events),
            "certificates": _plain(res.certificates),
            "level_set": _plain(asdict(res.level_set)) if res.level_set is not None else None,
            "audits": _plain(res.audits),
            "info": _plain(res.info),
            "rows": _plain(res.rows),
        }
        p = os.path.join(outdir, f"events_{cells}.json")
        _write(p, json.dumps(events, indent=1, sort_keys=True) + "\n")
        written.append(p)
        written += write_snapshots(os.path.join(outdir, "plots"), cells, res)
    if len(results) >= 2:
        tab = eoc_table(results, fine)
        p = os.path.join(outdir, "table.csv")
        _write(p, tab.to_csv())
        written.append(p)
    if results:
        summary = {str(c): _plain(summary_quantities(r)) for c, r in results}
        if fine:
            for c, v in fine.items():
                summary[str(c)]["fine_l1"] = v
        p = os.path.join(outdir, "summary.json")
        _write(p, json.dumps(summary, indent=1, sort_keys=True) + "\n")
        written.append(p)
    written.append(write_manifest(outdir, cfg, "ok", wall, [c for c, _ in results]))
    return written


def table_from_summary(path):
    """Rebuild the EoC table from a summary.json written by emit_outputs."""
    with open(path) as fh:
        summary = json.load(fh)
    cells = sorted(int(c) for c in summary)
    tab = EocTable(cells)
    names = list(summary[str(cells[0])])
    for name in names:
        vals = []
        for c in cells:
            v = summary[str(c)].get(name)
            vals.append(float(v) if isinstance(v, (int, float, str)) and v is not None else None)
        tab.add(name, vals)
    return tab


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0
