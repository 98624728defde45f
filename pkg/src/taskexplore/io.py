"""Scenario files, trace and summary CSVs, field snapshots and graymap export."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
from pathlib import Path

import numpy as np

from taskexplore.engine import Scenario, ScenarioError, ScenarioTrace

# section -> Scenario fields stored there
SECTIONS = {
    "map": ("map_file", "map_width", "map_height", "density", "noise"),
    "actor": ("actor_start", "actor_goal", "actor_window"),
    "sensors": ("n_sensors", "sensor_starts", "sensor_window", "horizon", "codebook",
                "square_side", "square_direction"),
    "params": ("a", "eps", "v", "gamma", "beta", "c_lambda", "ell", "n_m", "n_a", "prior"),
    "run": ("mode", "selector_location", "variance_included", "seed", "max_steps"),
}
FIELDS = ("xhat", "h", "W", "R")


def _types():
    return {f.name: f for f in dataclasses.fields(Scenario)}


def _parse_cell(text: str) -> tuple:
    parts = [p for p in text.replace("(", " ").replace(")", " ").replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ScenarioError(f"expected 'row, col', got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_value(name: str, text: str):
    text = text.strip()
    if name in ("map_file", "codebook", "max_steps") and text.lower() in ("", "none"):
        return None
    if name in ("actor_start", "actor_goal"):
        return _parse_cell(text)
    if name == "sensor_starts":
        if text.lower() in ("", "none", "random"):
            return None
        return tuple(_parse_cell(p) for p in text.split(";") if p.strip())
    if name == "variance_included":
        low = text.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ScenarioError(f"variance_included must be a boolean, got {text!r}")
        return low in ("true", "yes", "1")
    default = getattr(Scenario(), name)
    if isinstance(default, bool):
        return text.lower() in ("true", "yes", "1")
    if isinstance(default, int) or name == "max_steps":
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_scenario(text: str) -> Scenario:
    """Scenario from INI-style text; omitted keys keep their defaults."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"unreadable scenario: {exc}") from None
    known = _types()
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ScenarioError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SECTIONS[section] or key not in known:
                raise ScenarioError(f"unknown key {key!r} in [{section}]")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ScenarioError(f"bad value for {key}: {exc}") from None
    sc = Scenario(**values)
    sc.validate()
    return sc


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"unreadable scenario {path}: {exc.strerror}") from None
    return parse_scenario(text)


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return "; ".join(f"{r}, {c}" for r, c in value)
    if isinstance(value, tuple):
        return f"{value[0]}, {value[1]}"
    return str(value)


def format_scenario(sc: Scenario) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for section, names in SECTIONS.items():
        cp[section] = {name: _format_value(getattr(sc, name)) for name in names}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(format_scenario(sc))


# ---------------------------------------------------------------- traces


def _num(x: float) -> str:
    return repr(float(x))


def trace_header(n_sensors: int) -> list:
    cols = ["t", "actor_row", "actor_col"]
    for i in range(n_sensors):
        cols += [f"s{i}_row", f"s{i}_col", f"s{i}_theta", f"s{i}_bits"]
    return cols + ["path_len", "cost_so_far"]


def trace_rows(trace: ScenarioTrace) -> list:
    rows = []
    for rec in trace.steps:
        row = [rec.t, rec.actor[0], rec.actor[1]]
        for s in rec.sensors:
            row += list(s)
        row += [rec.path_len, _num(rec.cost_so_far)]
        rows.append(row)
    return rows


def write_trace_csv(trace: ScenarioTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(len(trace.bits)))
        w.writerows(trace_rows(trace))


def read_trace_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def fields_path(trace_csv) -> Path:
    """Sidecar holding the per-step xhat, h, W and R grids of a trace CSV."""
    return Path(trace_csv).with_suffix(".npz")


def write_fields(trace: ScenarioTrace, path) -> None:
    if trace.fields is None:
        raise ValueError("trace was recorded without fields")
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **{k: trace.fields[k] for k in FIELDS})


def load_field(trace_csv, name: str, t: int) -> np.ndarray:
    if name not in FIELDS:
        raise ValueError(f"unknown field {name!r}; choose from {FIELDS}")
    side = fields_path(trace_csv)
    if not side.exists():
        raise FileNotFoundError(f"no field snapshots next to {trace_csv} (expected {side})")
    with np.load(side) as data:
        arr = data[name]
    if not 0 <= t < arr.shape[0]:
        raise IndexError(f"timestep {t} outside trace of {arr.shape[0]} steps")
    return arr[t]


SUMMARY_HEADER = ["seed", "label", "mode", "cost", "bits", "steps", "reached_goal", "r_cost",
                  "r_bits"]


def write_summary_csv(report, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in sorted(report.runs, key=lambda r: (r.seed, report.labels().index(r.label))):
            w.writerow([r.seed, r.label, r.mode, _num(r.cost), r.bits, r.steps,
                        int(r.reached_goal), _num(r.r_cost), _num(r.r_bits)])


# ---------------------------------------------------------------- images


def write_pgm(values, path, vmax: float | None = None) -> None:
    """8-bit binary graymap, 0 black .. vmax white (vmax defaults to 1)."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("graymap needs a 2-D field")
    top = 1.0 if vmax is None else float(vmax)
    scaled = np.clip(arr / top if top > 0 else np.zeros_like(arr), 0.0, 1.0)
    data = np.rint(scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError("not a binary graymap")
    w, h, top = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    return data.reshape(h, w).astype(float) / top
