"""Data bundles behind each figure id.

Each bundle is a list of tables whose series labels encode the model
parameters (``lmg_h1_K0_N500``, ``quartic_h3.265_K1.5_N500``...). Only series
with explicitly known parameters are produced; other parameter sets can be
run through the regular commands with a ``sets`` list.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError
from .io import Table
from .local_analytics import local_expansion_at_hyperbolic, optimal_angle_flow
from .quantum_dynamics import gain_curve, infidelity_curve, matched_lambda_comparison, separatrix
from .runs import ParamSet, covariance_table, matched_table, resolve_config, build_tables, gain_table
from .spin_core import ModelParams

__all__ = ["FIGURES", "reproduce_figure"]

FIGURES = ("fig1", "fig2b", "fig2c", "fig3", "figS2", "figS3")

GAIN_JT = np.linspace(0.0, 1.0, 201)
INFIDELITY_JT = 0.25
DELTA_PHI = np.logspace(-5.0, -1.0, 50)


def _label(kind: str, p: ModelParams) -> str:
    return f"{kind}_h{p.h_over_J:g}_K{p.K_over_J:g}_N{p.N}"


def _fig2_sets(N: int = 500) -> list[ParamSet]:
    lmg = ModelParams(h=1.0, J=1.0, K=0.0, N=N)
    quartic = ModelParams(h=3.265, J=1.0, K=1.5, N=N)
    return [ParamSet(_label("lmg", lmg), lmg), ParamSet(_label("quartic", quartic), quartic)]


def _pmap(workers: int, fn, items):
    """Ordered map over ``items`` with at most ``workers`` threads."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _lyapunov_lines(sets, name: str) -> Table:
    lam = [local_expansion_at_hyperbolic(s.params).lam for s in sets]
    return Table(
        name,
        {"series": [s.label for s in sets], "lambda": lam, "two_lambda": [2 * x for x in lam]},
        {"series": "label", "lambda": "J", "two_lambda": "J"},
        {"reference": "ln G^2 = two_lambda * Jt"},
    )


def _fig1(workers: int) -> list[Table]:
    cfg = resolve_config("phase-map", overrides={"workers": workers})
    tables = build_tables(cfg)
    reps = [
        ParamSet("region_I_h1_K1.5", ModelParams(h=1.0, J=1.0, K=1.5, N=500)),
        ParamSet("region_II_h3.265_K1.5", ModelParams(h=3.265, J=1.0, K=1.5, N=500)),
        ParamSet("region_III_h5_K1.5", ModelParams(h=5.0, J=1.0, K=1.5, N=500)),
    ]
    fp_cfg = resolve_config("fixed-points", {"sets": [s.to_dict() for s in reps]})
    tables += build_tables(fp_cfg)
    for s in reps:
        branch, Q, P = [], [], []
        for b, line in enumerate(separatrix(s.params)):
            branch += [b] * len(line)
            Q.append(line[:, 0])
            P.append(line[:, 1])
        tables.append(
            Table(
                f"separatrix_{s.label}",
                {"branch": branch, "Q": np.concatenate(Q) if Q else [], "P": np.concatenate(P) if P else []},
                {"branch": "index", "Q": "1", "P": "1"},
            )
        )
    return tables


def _fig2b(workers: int) -> list[Table]:
    sets = _fig2_sets()
    tables = _pmap(workers, lambda s: gain_table(f"gain_{s.label}", gain_curve(s.params, GAIN_JT), 1.0), sets)
    tables.append(_lyapunov_lines(sets, "lyapunov_reference"))
    return tables


def _infidelity_table(s: ParamSet) -> Table:
    _, inf = infidelity_curve(s.params, INFIDELITY_JT / s.params.J, DELTA_PHI)
    return Table(f"infidelity_{s.label}", {"delta_phi": DELTA_PHI, "one_minus_F": inf},
                 {"delta_phi": "rad", "one_minus_F": "1"}, {"Jt": INFIDELITY_JT})


def _fig2c(workers: int) -> list[Table]:
    return _pmap(workers, _infidelity_table, _fig2_sets())


def _fig3(workers: int) -> list[Table]:
    pair = matched_lambda_comparison(2.0)
    sets = [ParamSet(_label("lmg", pair.lmg), pair.lmg), ParamSet(_label("quartic", pair.quartic), pair.quartic)]

    def per_set(s):
        return [
            gain_table(f"gain_{s.label}", gain_curve(s.params, GAIN_JT), 1.0),
            covariance_table(f"covariance_{s.label}", s.params, GAIN_JT),
            _infidelity_table(s),
        ]

    tables = [matched_table(pair)] + [t for group in _pmap(workers, per_set, sets) for t in group]
    tables.append(_lyapunov_lines(sets, "lyapunov_reference"))
    return tables


def _figS2(workers: int) -> list[Table]:
    cfg = resolve_config("fit-maxline", overrides={"workers": workers})
    map_cfg = resolve_config("phase-map", overrides={"workers": workers, "options": dict(cfg.options)})
    tables = [t for t in build_tables(map_cfg) if t.name == "phase_map"]
    return tables + build_tables(cfg)


def _figS3(workers: int) -> list[Table]:
    def per_set(s):
        opt = gain_curve(s.params, GAIN_JT)
        fixed = gain_curve(s.params, GAIN_JT, alpha_policy=math.pi / 4)
        exp = local_expansion_at_hyperbolic(s.params)
        alpha = Table(
            f"alpha_{s.label}",
            {"Jt": GAIN_JT, "alpha_max": opt.alpha_max, "alpha_max_classical": optimal_angle_flow(exp, GAIN_JT)},
            {"Jt": "1", "alpha_max": "rad", "alpha_max_classical": "rad"},
        )
        return [alpha, gain_table(f"gain_fixed_alpha_{s.label}", fixed, 1.0)]

    return [t for group in _pmap(workers, per_set, _fig2_sets()) for t in group]


_BUILDERS = {"fig1": _fig1, "fig2b": _fig2b, "fig2c": _fig2c, "fig3": _fig3, "figS2": _figS2, "figS3": _figS3}


def reproduce_figure(figure_id: str, workers: int = 1) -> list[Table]:
    """Tables needed to replot ``figure_id`` (one of :data:`FIGURES`)."""
    if figure_id not in _BUILDERS:
        raise ConfigError(f"unknown figure {figure_id!r}; expected one of {', '.join(FIGURES)}")
    return _BUILDERS[figure_id](workers)

