"""Breslow baseline hazard increments for relative-risk models."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError


def breslow_baseline(
    time: np.ndarray,
    event: np.ndarray,
    log_risk,
    knots: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Baseline hazard increments d_i / sum_{j in risk set} exp(g_j).

    ``log_risk`` is either an (n,) array of time-constant log risks, or a
    callable ``log_risk(tau) -> (n,)`` for time-varying relative risks, in
    which case ``knots`` (a strictly increasing subset of event times whose
    last entry is >= the largest event time) is required: every distinct event
    time is assigned to the smallest knot at or above it and the log risks for
    its risk-set denominator are evaluated at that knot.

    Returns ``(times, increments)`` where ``times`` are the distinct event
    times (or the knots, for the time-varying form) carrying positive mass.
    """
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event)
    if event.sum() < 1:
        raise TrainingError("Breslow baseline needs at least one event")

    order = np.argsort(time, kind="stable")
    t_sorted = time[order]
    e_sorted = event[order]

    event_times, counts = np.unique(t_sorted[e_sorted == 1], return_counts=True)
    # index of the first at-risk row for each distinct event time
    first_at_risk = np.searchsorted(t_sorted, event_times, side="left")

    if callable(log_risk):
        if knots is None:
            raise ValueError("time-varying log_risk requires knots")
        knots = np.asarray(knots, dtype=np.float64)
        if knots[-1] < event_times[-1]:
            raise ValueError("last knot must cover the largest event time")
        knot_of = np.searchsorted(knots, event_times, side="left")
        increments = np.zeros(knots.size)
        for k in np.unique(knot_of):
            g = np.asarray(log_risk(knots[k]), dtype=np.float64)[order]
            gmax = g.max()
            suffix = np.cumsum(np.exp(g - gmax)[::-1])[::-1]
            for m in np.nonzero(knot_of == k)[0]:
                increments[k] += counts[m] * np.exp(-gmax) / suffix[first_at_risk[m]]
        return knots, increments

    g = np.asarray(log_risk, dtype=np.float64)[order]
    gmax = g.max()
    suffix = np.cumsum(np.exp(g - gmax)[::-1])[::-1]
    increments = counts * np.exp(-gmax) / suffix[first_at_risk]
    return event_times, increments


def step_cumulative(times: np.ndarray, increments: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Right-continuous step cumulative sum: sum of increments with time <= at."""
    cum = np.concatenate([[0.0], np.cumsum(increments)])
    return cum[np.searchsorted(times, at, side="right")]
