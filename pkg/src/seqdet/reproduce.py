"""Canned experiments producing desk-scale CSV data sets, one bundle per figure id.

Each builder returns ``{file_name: (header, rows)}``.  ``full`` switches to
denser grids and more trials.
"""

from __future__ import annotations

import math

from . import analysis
from .config import build_experiment
from .detection import Hypothesis
from .sim import delay_at_error, prepare, run_monte_carlo, sweep_operating_characteristic

FIGURES = ("fig2", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9")
CONVENTIONAL = ("channel-aware", "conventional-bsc", "conventional-ideal")

RICIAN_0DB = {"kind": "rician", "snr_db": 0.0}


def _experiment(channel: dict, mode: str, seed: int, signaling: dict | None = None, prep_trials: int = 50_000):
    raw = {"seed": seed, "prep_trials": prep_trials, "channel": channel, "fusion": {"mode": mode}}
    if signaling is not None:
        raw["signaling"] = signaling
    return build_experiment(raw)[0]


def fig2(full=False, **_):
    return {"fig2_bec_bsc.csv": analysis.bec_bsc_grid(50)}


def fig4(full=False, **_):
    return {"fig4_rayleigh_rho.csv": analysis.rayleigh_rho_grid(n=201 if full else 101)}


def fig5(full=False, seed=0, **_):
    return {"fig5_rician_levels.csv": analysis.rician_level_grid(n=21, trials=10 ** 6 if full else 200_000, seed=seed)}


def fig6(full=False, **_):
    return {"fig6_rician_antipodal.csv": analysis.rician_antipodal_grid()}


def fig7(full=False, seed=0, workers=1, trials=None, **_):
    n = trials or (20_000 if full else 2_000)
    rows = []
    for snr in (-10.0, -5.0, 0.0, 5.0, 10.0):
        for mode in CONVENTIONAL:
            prep = prepare(_experiment({"kind": "rician", "snr_db": snr}, mode, seed))
            for hyp in (Hypothesis.H0, Hypothesis.H1):
                s = run_monte_carlo(prep, hyp, n, workers)[0]
                ok = s.error_rate <= 0.01 + 3 * s.error_se
                rows.append([snr, mode, hyp.name, s.error_rate, s.error_se, s.mean_delay, s.delay_se,
                             s.truncation_rate, s.trials, int(ok)])
    header = ["snr_db", "mode", "hypothesis", "achieved_error", "error_se", "mean_delay", "delay_se",
              "truncation_rate", "trials", "within_bound"]
    return {"fig7_error_bounds.csv": (header, rows)}


FIG8_GRIDS = {
    "channel-aware": [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
    "conventional-bsc": [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
    "conventional-ideal": [5.0, 10.0, 15.0, 20.0, 25.0],
}


def oc_curve(prep, grid, trials, workers):
    """OC points with errors and delays averaged over the two hypotheses."""
    out = []
    for p in sweep_operating_characteristic(prep, threshold_grid=[(g, g) for g in grid], trials=trials,
                                            workers=workers):
        err = 0.5 * (p.h1.error_rate + p.h0.error_rate)
        err_se = 0.5 * math.hypot(p.h1.error_se, p.h0.error_se)
        d = 0.5 * (p.h1.mean_delay + p.h0.mean_delay)
        d_se = 0.5 * math.hypot(p.h1.delay_se, p.h0.delay_se)
        out.append((p.threshold_up, err, err_se, d, d_se))
    return out


def fig8(full=False, seed=0, workers=1, trials=None, target=1e-2, **_):
    n = trials or (20_000 if full else 4_000)
    rows, matched = [], []
    for mode, grid in FIG8_GRIDS.items():
        prep = prepare(_experiment(RICIAN_0DB, mode, seed))
        pts = oc_curve(prep, grid, n, workers)
        rows += [[mode, *p] for p in pts]
        try:
            d, se = delay_at_error([p[1] for p in pts], [p[3] for p in pts], target, [p[4] for p in pts])
        except ValueError:
            d, se = math.nan, math.nan
        matched.append([mode, target, d, se])
    return {"fig8_rician_oc.csv": (["mode", "threshold", "achieved_error", "error_se", "mean_delay", "delay_se"], rows),
            "fig8_matched.csv": (["mode", "target_error", "mean_delay", "delay_se"], matched)}


FIG9_CHANNELS = {
    "awgn": ({"kind": "awgn", "snr_db": 0.0}, {"kind": "antipodal", "P": 20.0}),
    "rician": ({"kind": "rician", "snr_db": 0.0}, {"kind": "antipodal", "P": 20.0}),
    "rayleigh": ({"kind": "rayleigh", "snr_db": 0.0}, {"kind": "ook", "P": 100.0, "Q": 20.0}),
}


def fig9(full=False, seed=0, workers=1, trials=None, **_):
    n = trials or (20_000 if full else 2_000)
    alphas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] if full else [1e-1, 1e-2, 1e-3, 1e-4]
    grid = [abs(math.log(a)) for a in alphas]
    rows = []
    for name, (ch, sig) in FIG9_CHANNELS.items():
        for mode in ("channel-aware", "unreliable-timing"):
            prep = prepare(_experiment(ch, mode, seed, sig))
            rows += [[name, mode, *p] for p in oc_curve(prep, grid, n, workers)]
    header = ["channel", "mode", "threshold", "achieved_error", "error_se", "mean_delay", "delay_se"]
    return {"fig9_continuous.csv": (header, rows)}


BUILDERS = {"fig2": fig2, "fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7, "fig8": fig8, "fig9": fig9}


def reproduce(figure: str, **kw):
    if figure not in BUILDERS:
        raise KeyError(figure)
    return BUILDERS[figure](**kw)
