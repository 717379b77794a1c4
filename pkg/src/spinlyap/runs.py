"""Batch commands: resolved run configuration, per-command tables and manifests.

Every command turns a :class:`RunConfig` into a list of :class:`~spinlyap.io.Table`
objects. :func:`run` writes them together with ``manifest.json``, which holds
the complete resolved configuration; feeding the manifest back through
``--config`` reproduces the same files byte for byte.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .classical_phase import (
    classify_region,
    effective_potential,
    find_fixed_points,
    fit_max_lyapunov_line,
    h2_boundary,
    local_lyapunov,
    lyapunov_exponent,
    lyapunov_map,
)
from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import ConfigError, NumericalInvariantError, RegionError
from .io import Table, file_digest, write_json, write_table
from .local_analytics import (
    analytic_antisqueezing,
    local_expansion_at_hyperbolic,
    ln_analytic_antisqueezing,
    optimal_angle_flow,
)
from .quantum_dynamics import (
    gain_curve,
    husimi_disk,
    infidelity_curve,
    matched_lambda_comparison,
    separatrix,
)
from .spin_core import ModelParams

__all__ = [
    "COMMANDS",
    "ParamSet",
    "RunConfig",
    "RunResult",
    "build_tables",
    "run",
    "write_outputs",
]

COMMANDS = (
    "phase-map",
    "potential",
    "fixed-points",
    "lyapunov",
    "gain",
    "infidelity",
    "husimi",
    "covariance",
    "matched-lambda",
    "fit-maxline",
)

OPTION_DEFAULTS: dict[str, dict] = {
    "phase-map": {"h_range": [0.0, 6.0], "K_range": [0.0, 4.0], "resolution": 300},
    "fit-maxline": {"h_range": [2.0, 6.0], "K_range": [0.3, 4.0], "resolution": 300},
    "potential": {"q_points": 801},
    "fixed-points": {},
    "lyapunov": {},
    "gain": {"alpha_policy": "optimal"},
    "infidelity": {"Jt": 0.25, "delta_phi_min": 1e-5, "delta_phi_max": 1e-1, "delta_phi_points": 50, "alpha": None},
    "husimi": {"times": [0.0, 0.25, 0.5], "resolution": 201, "separatrix_resolution": 401},
    "covariance": {},
    "matched-lambda": {"lambda_target": 2.0, "K_over_J": 1.5},
}

# the two parameter sets of the growth/infidelity comparison; Husimi snapshots use N=300
_FIG2_SETS = (("lmg", 1.0, 1.0, 0.0), ("quartic", 3.265, 1.0, 1.5))
_LABEL_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")


@dataclass(frozen=True)
class ParamSet:
    label: str
    params: ModelParams

    def to_dict(self) -> dict:
        return {"label": self.label, **self.params.to_dict()}


def default_sets(command: str) -> tuple[ParamSet, ...]:
    N = 300 if command == "husimi" else 500
    if command in ("phase-map", "fit-maxline", "matched-lambda"):
        return (ParamSet("base", ModelParams(h=1.0, J=1.0, K=0.0, N=N)),)
    return tuple(ParamSet(lab, ModelParams(h=h, J=J, K=K, N=N)) for lab, h, J, K in _FIG2_SETS)


@dataclass
class RunConfig:
    command: str
    sets: tuple[ParamSet, ...]
    t_max: float = 1.0
    t_steps: int = 201
    out: str = "spinlyap_out"
    format: str = "csv"
    workers: int = 1
    options: dict = field(default_factory=dict)
    tolerances: Tolerances = DEFAULT_TOLERANCES

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "sets": [s.to_dict() for s in self.sets],
            "t_max": self.t_max,
            "t_steps": self.t_steps,
            "out": self.out,
            "format": self.format,
            "workers": self.workers,
            "options": dict(self.options),
            "tolerances": self.tolerances.to_dict(),
        }

    @property
    def Jt_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.t_steps)


def _number(value, name: str, kind=float, minimum=None, exclusive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config field {name!r} must be a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"config field {name!r} must be an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"config field {name!r} must be finite, got {value!r}")
    if minimum is not None and (value <= minimum if exclusive else value < minimum):
        op = ">" if exclusive else ">="
        raise ConfigError(f"config field {name!r} must be {op} {minimum}, got {value!r}")
    return value


def _parse_set(raw, idx: int) -> ParamSet:
    where = f"sets[{idx}]"
    if not isinstance(raw, dict):
        raise ConfigError(f"config field {where!r} must be an object")
    unknown = set(raw) - {"label", "h", "J", "K", "N"}
    if unknown:
        raise ConfigError(f"config field {where!r} has unknown keys {sorted(unknown)}")
    label = raw.get("label", f"set{idx}")
    if not isinstance(label, str) or not _LABEL_RE.match(label):
        raise ConfigError(f"config field '{where}.label' must match {_LABEL_RE.pattern}, got {label!r}")
    try:
        params = ModelParams(
            h=_number(raw.get("h", 1.0), f"{where}.h"),
            J=_number(raw.get("J", 1.0), f"{where}.J", minimum=0.0, exclusive=True),
            K=_number(raw.get("K", 0.0), f"{where}.K", minimum=0.0),
            N=_number(raw.get("N", 500), f"{where}.N", kind=int, minimum=1),
        )
    except ValueError as exc:
        raise ConfigError(f"config field {where!r}: {exc}") from exc
    return ParamSet(label, params)


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _check_options(command: str, options: dict) -> dict:
    defaults = OPTION_DEFAULTS[command]
    unknown = set(options) - set(defaults)
    if unknown:
        raise ConfigError(f"config field 'options' has keys {sorted(unknown)} not used by {command!r}")
    merged = {**defaults, **options}
    for key in ("h_range", "K_range"):
        if key in merged:
            rng = merged[key]
            if not isinstance(rng, (list, tuple)) or len(rng) != 2:
                raise ConfigError(f"config field 'options.{key}' must be a [min, max] pair")
            lo = _number(rng[0], f"options.{key}[0]")
            hi = _number(rng[1], f"options.{key}[1]")
            if not hi > lo:
                raise ConfigError(f"config field 'options.{key}' must be increasing, got {rng!r}")
            merged[key] = [lo, hi]
    for key, minimum in (("resolution", 2), ("q_points", 2), ("delta_phi_points", 1), ("separatrix_resolution", 3)):
        if key in merged:
            merged[key] = _number(merged[key], f"options.{key}", kind=int, minimum=minimum)
    for key in ("Jt", "delta_phi_min", "delta_phi_max", "lambda_target", "K_over_J"):
        if key in merged:
            merged[key] = _number(merged[key], f"options.{key}", minimum=0.0, exclusive=key != "Jt")
    if "delta_phi_min" in merged and not merged["delta_phi_max"] > merged["delta_phi_min"]:
        raise ConfigError("config field 'options.delta_phi_max' must exceed 'options.delta_phi_min'")
    if merged.get("alpha") is not None:
        merged["alpha"] = _number(merged["alpha"], "options.alpha")
    if "times" in merged:
        if not isinstance(merged["times"], (list, tuple)) or not merged["times"]:
            raise ConfigError("config field 'options.times' must be a non-empty list")
        merged["times"] = [_number(t, "options.times[]", minimum=0.0) for t in merged["times"]]
    if "alpha_policy" in merged:
        pol = merged["alpha_policy"]
        if isinstance(pol, str) and pol.startswith("fixed"):
            inner = pol[5:].strip("():= ")
            pol = float(inner) if _is_float(inner) else (math.pi / 4 if not inner else pol)
        if pol != "optimal":
            merged["alpha_policy"] = _number(pol, "options.alpha_policy")
    return merged


def resolve_config(command: str, base: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge a config mapping with flag overrides (flags win) and validate every field.

    ``overrides`` may hold ``h, J, K, N`` (applied to every parameter set, or
    forming a single ``custom`` set when the config defines none), ``t_max``,
    ``t_steps``, ``out``, ``format``, ``workers`` and ``options``.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    base = dict(base or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "config" in base and isinstance(base["config"], dict):  # a manifest
        base = dict(base["config"])
    known = {"command", "sets", "t_max", "t_steps", "out", "format", "workers", "options", "tolerances"}
    unknown = set(base) - known
    if unknown:
        raise ConfigError(f"config has unknown fields {sorted(unknown)}")
    if base.get("command", command) != command:
        raise ConfigError(f"config field 'command' is {base['command']!r} but {command!r} was requested")

    param_flags = {k: overrides.pop(k) for k in ("h", "J", "K", "N") if k in overrides}
    if "sets" in base:
        if not isinstance(base["sets"], list) or not base["sets"]:
            raise ConfigError("config field 'sets' must be a non-empty list")
        raw_sets = [dict(s) if isinstance(s, dict) else s for s in base["sets"]]
    elif param_flags:
        raw_sets = [{"label": "custom", "h": 1.0, "J": 1.0, "K": 0.0, "N": 500}]
    else:
        raw_sets = [s.to_dict() for s in default_sets(command)]
    for s in raw_sets:
        if isinstance(s, dict):
            s.update(param_flags)
    sets = tuple(_parse_set(s, i) for i, s in enumerate(raw_sets))
    labels = [s.label for s in sets]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"config field 'sets' has duplicate labels {labels}")

    merged = {**base, **overrides}
    options = dict(base.get("options") or {})
    options.update(overrides.get("options") or {})
    t_max = _number(merged.get("t_max", 1.0), "t_max", minimum=0.0, exclusive=True)
    t_steps = _number(merged.get("t_steps", 201), "t_steps", kind=int, minimum=2)
    workers = _number(merged.get("workers", 1), "workers", kind=int, minimum=1)
    fmt = merged.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"config field 'format' must be 'csv' or 'json', got {fmt!r}")
    out = merged.get("out", "spinlyap_out")
    if not isinstance(out, str) or not out:
        raise ConfigError("config field 'out' must be a non-empty path string")
    tol_raw = merged.get("tolerances") or {}
    if not isinstance(tol_raw, dict):
        raise ConfigError("config field 'tolerances' must be an object")
    tolerances = DEFAULT_TOLERANCES.updated(tol_raw)
    return RunConfig(
        command=command,
        sets=sets,
        t_max=t_max,
        t_steps=t_steps,
        out=out,
        format=fmt,
        workers=workers,
        options=_check_options(command, options),
        tolerances=tolerances,
    )


# ---------------------------------------------------------------------------
# command bodies


def _map_sets(cfg: RunConfig, fn):
    """Apply ``fn`` to every parameter set; output order follows the input order."""
    if cfg.workers == 1 or len(cfg.sets) == 1:
        return [fn(s) for s in cfg.sets]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, cfg.sets))


def _require_J(cfg: RunConfig) -> float:
    Js = {s.params.J for s in cfg.sets}
    if len(Js) != 1:
        raise ConfigError(f"{cfg.command} uses a single J; sets give {sorted(Js)}")
    return Js.pop()


def _phase_map(cfg: RunConfig) -> list[Table]:
    opt = cfg.options
    lmap = lyapunov_map(opt["h_range"], opt["K_range"], opt["resolution"], J=_require_J(cfg),
                       workers=cfg.workers, tol=cfg.tolerances)
    if not np.all(np.isfinite(lmap.lam)) or np.any(lmap.lam < 0):
        raise NumericalInvariantError("phase map produced a negative or non-finite exponent")
    H, K = np.meshgrid(lmap.h_over_J, lmap.K_over_J, indexing="ij")
    tables = [
        Table(
            "phase_map",
            {"h_over_J": H.ravel(), "K_over_J": K.ravel(), "lambda": lmap.lam.ravel(), "region": lmap.region.ravel()},
            {"h_over_J": "1", "K_over_J": "1", "lambda": "J", "region": "code(0=boundary,1=I,2=II,3=III)"},
            {"backend": lmap.backend},
        )
    ]
    k = lmap.K_over_J
    h2 = np.array([h2_boundary(x) if x > 0.25 else math.nan for x in k])
    tables.append(
        Table(
            "phase_boundaries",
            {"K_over_J": k, "h1_over_J": np.full(k.size, 2.0), "h2_over_J": h2},
            {"K_over_J": "1", "h1_over_J": "1", "h2_over_J": "1"},
        )
    )
    return tables


def _fit_maxline(cfg: RunConfig) -> list[Table]:
    opt = cfg.options
    lmap = lyapunov_map(opt["h_range"], opt["K_range"], opt["resolution"], J=_require_J(cfg),
                       workers=cfg.workers, tol=cfg.tolerances)
    line = fit_max_lyapunov_line(lmap)
    return [
        Table("maxline_points", {"K_over_J": line.K_points, "h_over_J": line.h_points}, {"K_over_J": "1", "h_over_J": "1"}),
        Table(
            "maxline_fit",
            {
                "slope": [line.slope],
                "intercept": [line.intercept],
                "rms_residual": [line.rms_residual],
                "n_points": [len(line.h_points)],
            },
            {"slope": "1", "intercept": "1", "rms_residual": "1", "n_points": "count"},
            {"model": "K/J = slope * h/J + intercept"},
        ),
    ]


def _potential(cfg: RunConfig) -> list[Table]:
    q = np.linspace(-2.0, 2.0, cfg.options["q_points"])
    series, Q, V = [], [], []
    for s in cfg.sets:
        series += [s.label] * q.size
        Q.append(q)
        V.append(effective_potential(q, s.params))
    return [
        Table(
            "potential",
            {"series": series, "Q": np.concatenate(Q), "V": np.concatenate(V)},
            {"series": "label", "Q": "1", "V": "J*S"},
        )
    ]


def _fixed_points(cfg: RunConfig) -> list[Table]:
    cols = {k: [] for k in ("series", "region", "Q", "P", "theta", "phi", "stability", "u", "v", "lambda")}
    for s in cfg.sets:
        region = classify_region(s.params, cfg.tolerances).label
        for fp in find_fixed_points(s.params, cfg.tolerances):
            lam = lyapunov_exponent(fp, s.params, cfg.tolerances)
            for key, val in (
                ("series", s.label), ("region", region), ("Q", fp.Q), ("P", fp.P), ("theta", fp.bloch_theta),
                ("phi", fp.bloch_phi), ("stability", fp.stability), ("u", fp.u), ("v", fp.v),
                ("lambda", math.nan if lam is None else lam),
            ):
                cols[key].append(val)
    units = {"series": "label", "region": "label", "Q": "1", "P": "1", "theta": "rad", "phi": "rad",
             "stability": "label", "u": "J", "v": "J", "lambda": "J"}
    return [Table("fixed_points", cols, units)]


def _lyapunov(cfg: RunConfig) -> list[Table]:
    cols = {k: [] for k in ("series", "h_over_J", "K_over_J", "region", "Q_hyp", "lambda", "mu", "nu", "kappa",
                             "kappa_over_lambda")}
    for s in cfg.sets:
        p = s.params
        region = classify_region(p, cfg.tolerances).label
        try:
            exp = local_expansion_at_hyperbolic(p)
            q, mu, nu, kappa = exp.Q_hyp, exp.mu, exp.nu, exp.kappa
            ratio = kappa / exp.lam if exp.lam > 0 else math.inf
        except RegionError:
            q = mu = nu = kappa = ratio = math.nan
        for key, val in (("series", s.label), ("h_over_J", p.h_over_J), ("K_over_J", p.K_over_J),
                         ("region", region), ("Q_hyp", q), ("lambda", local_lyapunov(p, cfg.tolerances)),
                         ("mu", mu), ("nu", nu), ("kappa", kappa),
                         ("kappa_over_lambda", ratio)):
            cols[key].append(val)
    units = {"series": "label", "h_over_J": "1", "K_over_J": "1", "region": "label", "Q_hyp": "1",
             "lambda": "J", "mu": "J", "nu": "J", "kappa": "J", "kappa_over_lambda": "1"}
    return [Table("lyapunov", cols, units)]


def gain_table(name: str, curve, J: float) -> Table:
    return Table(
        name,
        {"Jt": curve.times * J, "ln_G2": curve.ln_gain_sq, "alpha_max": curve.alpha_max},
        {"Jt": "1", "ln_G2": "1", "alpha_max": "rad"},
        {"alpha_policy": curve.alpha_policy},
    )


def _gain(cfg: RunConfig) -> list[Table]:
    Jt = cfg.Jt_grid
    tol = cfg.tolerances

    def one(s: ParamSet):
        curve = gain_curve(s.params, Jt / s.params.J, cfg.options["alpha_policy"])
        if np.any(~np.isfinite(curve.gain_sq)) or np.any(curve.gain_sq <= 0):
            raise NumericalInvariantError(f"{s.label}: gain curve is not finite and positive")
        if Jt[0] == 0 and abs(curve.gain_sq[0] - 1.0) > tol.gain_origin:
            raise NumericalInvariantError(f"{s.label}: G^2(0) = {curve.gain_sq[0]!r} differs from 1")
        return gain_table(f"gain_{s.label}", curve, s.params.J)

    return _map_sets(cfg, one)


def _infidelity(cfg: RunConfig) -> list[Table]:
    opt = cfg.options
    dphi = np.logspace(math.log10(opt["delta_phi_min"]), math.log10(opt["delta_phi_max"]), opt["delta_phi_points"])

    def one(s: ParamSet):
        _, inf = infidelity_curve(s.params, opt["Jt"] / s.params.J, dphi, opt["alpha"])
        if np.any(inf < -cfg.tolerances.echo_identity) or np.any(inf > 1 + cfg.tolerances.echo_identity):
            raise NumericalInvariantError(f"{s.label}: infidelity outside [0, 1]")
        return Table(f"infidelity_{s.label}", {"delta_phi": dphi, "one_minus_F": inf},
                     {"delta_phi": "rad", "one_minus_F": "1"}, {"Jt": opt["Jt"]})

    return _map_sets(cfg, one)


def _husimi(cfg: RunConfig) -> list[Table]:
    from .quantum_dynamics import build_propagator, evolve, hyperbolic_initial_state

    opt = cfg.options

    def one(s: ParamSet):
        init = hyperbolic_initial_state(s.params)
        prop = build_propagator(s.params)
        cols = {"Jt": [], "Q": [], "P": [], "value": []}
        for jt in opt["times"]:
            field_ = husimi_disk(evolve(init.state, prop, jt / s.params.J), opt["resolution"])
            if np.any(field_.values < 0) or np.any(field_.values > 1):
                raise NumericalInvariantError(f"{s.label}: normalized Husimi values outside [0, 1]")
            cols["Jt"].append(np.full(field_.Q.size, jt))
            cols["Q"].append(field_.Q)
            cols["P"].append(field_.P)
            cols["value"].append(field_.values)
        husimi_tab = Table(f"husimi_{s.label}", {k: np.concatenate(v) for k, v in cols.items()},
                           {"Jt": "1", "Q": "1", "P": "1", "value": "max-normalized"})
        branch, Q, P = [], [], []
        for b, line in enumerate(separatrix(s.params, opt["separatrix_resolution"])):
            branch += [b] * len(line)
            Q.append(line[:, 0])
            P.append(line[:, 1])
        sep_tab = Table(
            f"separatrix_{s.label}",
            {"branch": branch, "Q": np.concatenate(Q) if Q else [], "P": np.concatenate(P) if P else []},
            {"branch": "index", "Q": "1", "P": "1"},
        )
        return [husimi_tab, sep_tab]

    return [t for pair in _map_sets(cfg, one) for t in pair]


def covariance_table(name: str, params: ModelParams, Jt: np.ndarray) -> Table:
    exp = local_expansion_at_hyperbolic(params)
    t = Jt / params.J
    return Table(
        name,
        {
            "Jt": Jt,
            "xi_c_sq": analytic_antisqueezing(exp, t),
            "ln_xi_c_sq": ln_analytic_antisqueezing(exp, t),
            "alpha_max": optimal_angle_flow(exp, t),
        },
        {"Jt": "1", "xi_c_sq": "1", "ln_xi_c_sq": "1", "alpha_max": "rad"},
        {"lambda": exp.lam, "kappa": exp.kappa, "mu": exp.mu, "nu": exp.nu},
    )


def _covariance(cfg: RunConfig) -> list[Table]:
    return _map_sets(cfg, lambda s: covariance_table(f"covariance_{s.label}", s.params, cfg.Jt_grid))


def matched_table(pair, name: str = "matched_lambda") -> Table:
    rows = (("lmg", pair.lmg, pair.lambda_lmg), ("quartic", pair.quartic, pair.lambda_quartic))
    return Table(
        name,
        {
            "model": [r[0] for r in rows],
            "h_over_J": [r[1].h_over_J for r in rows],
            "K_over_J": [r[1].K_over_J for r in rows],
            "N": [r[1].N for r in rows],
            "lambda": [r[2] for r in rows],
        },
        {"model": "label", "h_over_J": "1", "K_over_J": "1", "N": "count", "lambda": "J"},
    )


def _matched_lambda(cfg: RunConfig) -> list[Table]:
    base = cfg.sets[0].params
    opt = cfg.options
    pair = matched_lambda_comparison(opt["lambda_target"] * base.J, J=base.J, K_over_J=opt["K_over_J"], N=base.N)
    return [matched_table(pair)]


_DISPATCH = {
    "phase-map": _phase_map,
    "fit-maxline": _fit_maxline,
    "potential": _potential,
    "fixed-points": _fixed_points,
    "lyapunov": _lyapunov,
    "gain": _gain,
    "infidelity": _infidelity,
    "husimi": _husimi,
    "covariance": _covariance,
    "matched-lambda": _matched_lambda,
}


def build_tables(cfg: RunConfig) -> list[Table]:
    return _DISPATCH[cfg.command](cfg)


@dataclass
class RunResult:
    tables: list[Table]
    files: list[Path]
    manifest: Path


def write_outputs(tables: list[Table], out: Path, fmt: str, manifest_body: dict) -> RunResult:
    out = Path(out)
    files = [write_table(t, out, fmt) for t in tables]
    manifest = {
        "tool": "spinlyap",
        "version": __version__,
        "backend": kernels.BACKEND,
        **manifest_body,
        "outputs": [{"file": f.name, "sha256": file_digest(f)} for f in files],
    }
    path = write_json(out / "manifest.json", manifest)
    return RunResult(tables, files, path)


def run(cfg: RunConfig) -> RunResult:
    """Execute one command and write its tables plus ``manifest.json`` into ``cfg.out``."""
    tables = build_tables(cfg)
    return write_outputs(tables, Path(cfg.out), cfg.format, {"config": cfg.to_dict()})
