"""Experiment configuration, orchestration and report serialization."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from . import __version__
from .exceptions import ConfigError, DesignError, SingularWeightsError
from .fnn import InputSequence, WeightState, output_sequence
from .input_design import (
    DEFAULT_MAGNITUDE_RANGE,
    DesignTemplate,
    canonical_B,
    design_input,
    design_with_template,
    is_valid_T,
    sample_B,
    sample_T,
)
from .neighborhood import DEFAULT_FLOOR, DEFAULT_SPREAD, Neighborhood, generate_neighborhood
from .observability import numerical_rank, rank_condition
from .oracle import SweepGrid, example1_oracle

PAPER_W = [[0.67, 0.07, 0.15], [0.90, 0.42, 0.09], [0.72, 0.91, 0.51]]
PAPER_T = [[0, 1, 0], [1, 1, 1], [0, 0, 1]]

# salts for seeds derived from the master seed
_SALT_W, _SALT_T, _SALT_B = 1, 2, 3

DISTINGUISH_DELTA = 1e-6
DISTINGUISH_L1 = 1e-9


@dataclass
class ExperimentConfig:
    n: int = 3
    W: Any = field(default_factory=lambda: [r[:] for r in PAPER_W])
    T: Any = field(default_factory=lambda: [r[:] for r in PAPER_T])
    B: str = "sampled"
    U: Any = None
    neighbor_count: int = 1000
    spread: float = DEFAULT_SPREAD
    floor: float = DEFAULT_FLOOR
    sampler: str = "consistent"
    max_attempts: int | None = None
    master_seed: int = 0
    rank_tol: float | None = 1e-9
    output_path: str | None = None
    output_format: str = "csv"
    weights: Any = field(default_factory=lambda: [1.0, 2.0, 3.0])
    witness: Any = None
    grid_range: Any = field(default_factory=lambda: [-2.0, 2.0])
    grid_resolution: int = 401

    def to_dict(self) -> dict:
        """Config echo; where the output goes is not part of the experiment."""
        d = dataclasses.asdict(self)
        d.pop("output_path")
        return d


FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}

_RANDOM_RE = re.compile(r"^random(?:\((\s*-?\d+\s*)\))?$")
_SAMPLED_RE = re.compile(r"^sampled(?:\(([^)]*)\))?$")


def _key_lines(text: str) -> dict:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: cannot parse config: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping of key: value pairs")
    lines = _key_lines(text)
    for key in data:
        if key not in FIELDS:
            where = f"line {lines[key]}" if key in lines else "unknown line"
            raise ConfigError(f"{source}: {where}: unknown field {key!r}")
    return data


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Config file values, then overrides (flags win), validated."""
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text, str(path)))
    for key, val in (overrides or {}).items():
        if key not in FIELDS:
            raise ConfigError(f"unknown field {key!r} in command-line override")
        values[key] = val
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def _matrix(value, name, shape=None, integral=False):
    try:
        a = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r}: not a numeric matrix ({exc})") from exc
    if a.ndim != 2:
        raise ConfigError(f"field {name!r}: expected a 2-D matrix, got {a.ndim}-D")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"field {name!r}: entries must be finite")
    if shape is not None and a.shape != shape:
        raise ConfigError(f"field {name!r}: expected shape {shape}, got {a.shape}")
    if integral and not np.all((a == 0) | (a == 1)):
        raise ConfigError(f"field {name!r}: entries must be 0 or 1")
    return a


def _parse_sampled(spec: str):
    m = _SAMPLED_RE.match(spec.replace(" ", ""))
    if not m:
        return None
    if not m.group(1):
        return DEFAULT_MAGNITUDE_RANGE, None
    parts = m.group(1).split(",")
    if len(parts) not in (2, 3):
        raise ConfigError(f"field 'B': expected sampled(lo,hi) or sampled(lo,hi,seed), got {spec!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        seed = int(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise ConfigError(f"field 'B': {exc}") from exc
    if not 0 < lo < hi:
        raise ConfigError(f"field 'B': need 0 < lo < hi, got ({lo}, {hi})")
    return (lo, hi), seed


def _random_seed(value, name):
    m = _RANDOM_RE.match(value.strip())
    if not m:
        raise ConfigError(f"field {name!r}: expected a matrix, 'random' or 'random(seed)', got {value!r}")
    return int(m.group(1)) if m.group(1) else None


def validate_config(cfg: ExperimentConfig) -> None:
    if not isinstance(cfg.n, int) or cfg.n < 1:
        raise ConfigError(f"field 'n': positive integer required, got {cfg.n!r}")
    if isinstance(cfg.W, str):
        _random_seed(cfg.W, "W")
    else:
        W = _matrix(cfg.W, "W")
        if W.shape[1] != cfg.n:
            raise ConfigError(f"field 'W': expected {cfg.n} columns (n), got shape {W.shape}")
    if isinstance(cfg.T, str):
        _random_seed(cfg.T, "T")
    else:
        if not is_valid_T(_matrix(cfg.T, "T", (cfg.n, cfg.n), integral=True)):
            raise ConfigError("field 'T': pattern matrix is singular")
    if not isinstance(cfg.B, str) or (cfg.B != "canonical" and _parse_sampled(cfg.B) is None):
        raise ConfigError(f"field 'B': expected 'canonical' or 'sampled(lo,hi[,seed])', got {cfg.B!r}")
    if cfg.U is not None:
        _matrix(cfg.U, "U")
    if not isinstance(cfg.neighbor_count, int) or cfg.neighbor_count < 0:
        raise ConfigError(f"field 'neighbor_count': non-negative integer required, got {cfg.neighbor_count!r}")
    for name in ("spread", "floor"):
        v = getattr(cfg, name)
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"field {name!r}: positive number required, got {v!r}")
    if cfg.sampler not in ("consistent", "iid"):
        raise ConfigError(f"field 'sampler': 'consistent' or 'iid', got {cfg.sampler!r}")
    if not isinstance(cfg.master_seed, int) or cfg.master_seed < 0:
        raise ConfigError(f"field 'master_seed': non-negative integer required, got {cfg.master_seed!r}")
    if cfg.rank_tol is not None and not (isinstance(cfg.rank_tol, (int, float)) and cfg.rank_tol > 0):
        raise ConfigError(f"field 'rank_tol': positive number or null, got {cfg.rank_tol!r}")
    if cfg.max_attempts is not None and (not isinstance(cfg.max_attempts, int) or cfg.max_attempts < 1):
        raise ConfigError(f"field 'max_attempts': positive integer or null, got {cfg.max_attempts!r}")
    if cfg.output_format not in ("csv", "json"):
        raise ConfigError(f"field 'output_format': 'csv' or 'json', got {cfg.output_format!r}")
    if not isinstance(cfg.grid_resolution, int) or cfg.grid_resolution < 2:
        raise ConfigError(f"field 'grid_resolution': integer >= 2 required, got {cfg.grid_resolution!r}")
    try:
        lo, hi = (float(v) for v in cfg.grid_range)
    except (TypeError, ValueError):
        raise ConfigError(f"field 'grid_range': expected [lo, hi], got {cfg.grid_range!r}") from None
    if not lo < hi:
        raise ConfigError(f"field 'grid_range': need lo < hi, got {cfg.grid_range!r}")


# ---------------------------------------------------------------------------
# resolution of config sources


def _derived(cfg, explicit, salt):
    return explicit if explicit is not None else [cfg.master_seed, salt]


def random_weights(n: int, seed=None, max_cond: float = 1e6) -> np.ndarray:
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        W = rng.standard_normal((n, n))
        if np.linalg.cond(W) < max_cond:
            return W
    raise DesignError(f"no well-conditioned random {n}x{n} weight matrix found")


def resolve_state(cfg: ExperimentConfig) -> WeightState:
    if isinstance(cfg.W, str):
        seed = _derived(cfg, _random_seed(cfg.W, "W"), _SALT_W)
        return WeightState(random_weights(cfg.n, seed))
    return WeightState(_matrix(cfg.W, "W"))


def resolve_template(cfg: ExperimentConfig) -> DesignTemplate:
    if cfg.B == "canonical":
        return canonical_B(cfg.n)
    if isinstance(cfg.T, str):
        T = sample_T(cfg.n, _derived(cfg, _random_seed(cfg.T, "T"), _SALT_T))
    else:
        T = _matrix(cfg.T, "T", (cfg.n, cfg.n), integral=True).astype(np.int64)
    magnitudes, seed = _parse_sampled(cfg.B)
    return sample_B(T, magnitudes, _derived(cfg, seed, _SALT_B))


def design(cfg: ExperimentConfig):
    state = resolve_state(cfg)
    inputs, tpl = design_with_template(state, resolve_template(cfg), rel_tol=cfg.rank_tol)
    return state, tpl, inputs


# ---------------------------------------------------------------------------
# commands (library side; the CLI wraps these)


def check_rank(cfg: ExperimentConfig) -> dict:
    state = resolve_state(cfg)
    if cfg.U is not None:
        inputs = InputSequence(_matrix(cfg.U, "U"))
        source = "supplied"
    else:
        sv = np.linalg.svd(state.W, compute_uv=False)
        r = numerical_rank(sv, max(state.W.shape) * np.finfo(float).eps)
        if state.m != state.n or r < state.n:
            raise SingularWeightsError(
                f"input design refused: W has shape {state.W.shape} and numerical rank {r} "
                f"(singular values {sv.tolist()})"
            )
        inputs = design_input(state, resolve_template(cfg), rel_tol=cfg.rank_tol)
        source = "designed"
    holds, bundle = rank_condition(state, inputs, rel_tol=cfg.rank_tol)
    required = state.m * state.n
    notes = []
    if inputs.N < required:
        notes.append(f"insufficient rows: N={inputs.N} < m*n={required}, full column rank is impossible")
    return {
        "holds": bool(holds),
        "numerical_rank": bundle.numerical_rank,
        "required_rank": required,
        "rel_tol": bundle.rel_tol,
        "N": inputs.N,
        "input_source": source,
        "singular_values": bundle.singular_values.tolist(),
        "notes": notes,
    }


def design_report(cfg: ExperimentConfig) -> dict:
    _, tpl, inputs = design(cfg)
    return {"U": inputs.U.tolist(), "T": tpl.T.tolist(), "B": tpl.B.tolist()}


def neighbor_record(sample, state, inputs) -> dict:
    """Per-neighbor row; the l1 output gap is recomputed from the two states."""
    y = output_sequence(state, inputs)
    y_prime = output_sequence(sample.W_prime, inputs)
    return {
        "index": sample.index,
        "delta_max": sample.delta_max,
        "l1_error": float(np.abs(y_prime - y).sum()),
        "residual": sample.residual,
        "rank": sample.rank,
        "rank_ok": sample.rank_ok,
        "verified": sample.verified,
        "first_node": sample.W_prime[:, 0].tolist(),
        "W_prime": sample.W_prime.tolist(),
    }


@dataclass
class ExperimentReport:
    config: dict
    version: str
    master_seed: int
    U: list
    T: list
    B: list
    W: list
    rank_holds: bool
    numerical_rank: int
    singular_values: list
    records: list
    requested: int
    attempts: int
    acceptance_rate: float
    rejections: dict
    exhausted: bool
    checks: dict

    def summary(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("records")
        d["verified_neighbors"] = len(self.records)
        d["reference_first_node"] = [row[0] for row in self.W]
        return d

    def to_dict(self) -> dict:
        d = self.summary()
        d["records"] = self.records
        return d


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    state, tpl, inputs = design(cfg)
    holds, bundle = rank_condition(state, inputs, rel_tol=cfg.rank_tol)
    hood: Neighborhood = generate_neighborhood(
        inputs, state, cfg.neighbor_count, spread=cfg.spread, seed=cfg.master_seed,
        sampler=cfg.sampler, floor=cfg.floor, rel_tol=cfg.rank_tol,
        max_attempts=cfg.max_attempts,
    )
    records = [neighbor_record(s, state, inputs) for s in hood.samples]
    checks = {
        "rank_at_W": bool(holds),
        "rank_at_all_neighbors": all(r["rank_ok"] for r in records),
        "all_distinguishable": all(
            r["l1_error"] > DISTINGUISH_L1 for r in records if r["delta_max"] > DISTINGUISH_DELTA
        ),
    }
    return ExperimentReport(
        config=cfg.to_dict(),
        version=__version__,
        master_seed=cfg.master_seed,
        U=inputs.U.tolist(),
        T=tpl.T.tolist(),
        B=tpl.B.tolist(),
        W=state.W.tolist(),
        rank_holds=bool(holds),
        numerical_rank=bundle.numerical_rank,
        singular_values=bundle.singular_values.tolist(),
        records=records,
        requested=hood.requested,
        attempts=hood.attempts,
        acceptance_rate=hood.acceptance_rate,
        rejections=dict(hood.rejections),
        exhausted=hood.exhausted,
        checks=checks,
    )


def oracle_report(cfg: ExperimentConfig) -> dict:
    w = np.asarray(cfg.weights, dtype=np.float64).reshape(-1)
    if w.size != 3:
        raise ConfigError(f"field 'weights': three weights (m=1, n=3) required, got {w.size}")
    if np.any(w == 0):
        raise ConfigError("field 'weights': all weights must be nonzero")
    lo, hi = (float(v) for v in cfg.grid_range)
    grid = SweepGrid(((lo, hi),), cfg.grid_resolution)
    res = example1_oracle(*w, grid=grid, witness=cfg.witness)
    return {
        "weights": res.weights.tolist(),
        "witness": res.witness.tolist(),
        "sign_case": res.sign_case,
        "verdict": "indistinguishable" if res.indistinguishable else "distinguishable",
        "max_abs_diff": res.sweep.max_abs_diff,
        "differ_at": None if res.sweep.u is None else res.sweep.u.tolist(),
        "grid_points": res.sweep.points_checked,
        "refines_breakpoints": res.refines_breakpoints,
        "certificate": "conclusive (m=1, grid straddles the only breakpoint u=0)"
        if res.conclusive else "grid certificate only, not a proof",
    }


# ---------------------------------------------------------------------------
# serialization


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def matrix_csv(M, prefix: str) -> str:
    M = np.asarray(M)
    header = [f"{prefix}_{j + 1}" for j in range(M.shape[1])]
    return _csv_text(header, M.tolist())


def records_csv(records, m: int) -> str:
    header = ["index", "delta_max", "l1_error", "residual", "rank", "rank_ok", "verified"]
    header += [f"w_{i + 1}_1" for i in range(m)]
    rows = [
        [r["index"], r["delta_max"], r["l1_error"], r["residual"], r["rank"], r["rank_ok"],
         r["verified"], *r["first_node"]]
        for r in records
    ]
    return _csv_text(header, rows)


def key_value_csv(d: dict) -> str:
    rows = []
    for k, v in d.items():
        if isinstance(v, list):
            rows.extend([f"{k}_{i + 1}", x] for i, x in enumerate(v))
        elif v is not None:
            rows.append([k, v])
    return _csv_text(["quantity", "value"], rows)
