"""Default numerical tolerances, kept in one table.

Every tolerance can be overridden from a run configuration by name.

=================  =========  ==================================================
name               default    meaning
=================  =========  ==================================================
tol_mass           1e-6       allowed deviation of total mass from one
tol_neg            1e-9       negative values above -tol_neg are clamped to zero
tol_ineq           1e-7       relative slack for inequality reports
tol_ineq_abs       1e-10      absolute slack for inequality reports
tol_edge           1e-8       largest allowed |f| near the edges of a t-grid
density_floor      1e-300     nodes with p at or below this are skipped
score_cutoff       1e-12      relative density level below which the
                              asymptotic stable score is used
tail_fraction      0.1        share of the window used to fit tail constants
fit_residual       0.05       largest rms residual accepted by calibration
alpha_snap         0.02       distance within which a fitted alpha is
                              replaced by the source's known exponent
=================  =========  ==================================================
"""
from __future__ import annotations

DEFAULT_TOLERANCES: dict[str, float] = {
    "tol_mass": 1e-6,
    "tol_neg": 1e-9,
    "tol_ineq": 1e-7,
    "tol_ineq_abs": 1e-10,
    "tol_edge": 1e-8,
    "density_floor": 1e-300,
    "score_cutoff": 1e-12,
    "tail_fraction": 0.1,
    "fit_residual": 0.05,
    "alpha_snap": 0.02,
}

DENSITY_FLOOR = DEFAULT_TOLERANCES["density_floor"]


def merged(overrides: dict[str, float] | None = None) -> dict[str, float]:
    """Return the default table updated with ``overrides``.

    Unknown names raise KeyError so that typos do not pass silently.
    """
    out = dict(DEFAULT_TOLERANCES)
    for key, value in (overrides or {}).items():
        if key not in out:
            raise KeyError(f"unknown tolerance {key!r}")
        out[key] = float(value)
    return out
