import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from assurance.intervals import IntervalVector
from core.defs import DEFAULT_SEGMENT
from core.exceptions import ConfigMalformedExc

TimeSignal = Callable[[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """
    Piecewise-linear interpolation of knot values spaced by `segment`.

    values has shape (..., knots, n_w); leading axes are independent signals
    evaluated together.
    """
    values: np.ndarray
    segment: float
    lower: np.ndarray
    upper: np.ndarray

    @property
    def knots(self) -> int:
        return self.values.shape[-2]

    def __call__(self, t: float) -> np.ndarray:
        span = self.segment * (self.knots - 1)
        t = min(max(float(t), 0.0), span)
        i = min(int(t // self.segment), self.knots - 2)
        frac = (t - i * self.segment) / self.segment
        w = self.values[..., i, :] * (1.0 - frac) + self.values[..., i + 1, :] * frac
        return np.clip(w, self.lower, self.upper)


def _knot_count(horizon: float, segment: float) -> int:
    return max(2, int(math.ceil(horizon / segment - 1e-9)) + 1)


def disturbance_signal(
        seed: int,
        W: IntervalVector,
        horizon: float,
        segment: float = DEFAULT_SEGMENT,
) -> DisturbanceSignal:
    if segment <= 0:
        raise ValueError(f"Segment length must be positive, got {segment}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(W.lower, W.upper, size=(_knot_count(horizon, segment), W.n))
    return DisturbanceSignal(values, segment, W.lower, W.upper)


def disturbance_batch(
        seed: int,
        W: IntervalVector,
        horizon: float,
        count: int,
        segment: float = DEFAULT_SEGMENT,
) -> DisturbanceSignal:
    """`count` signals, sample i drawn from the stream seeded by (seed, i)."""
    if segment <= 0:
        raise ValueError(f"Segment length must be positive, got {segment}")
    knots = _knot_count(horizon, segment)
    values = np.stack([
        np.random.default_rng([seed, index]).uniform(W.lower, W.upper, size=(knots, W.n))
        for index in range(count)
    ]) if count else np.empty((0, knots, W.n))
    return DisturbanceSignal(values, segment, W.lower, W.upper)


def _sinusoid(amplitudes, frequencies, phases) -> TimeSignal:
    amplitudes = np.asarray(amplitudes, dtype=float)
    frequencies = np.asarray(frequencies, dtype=float)
    phases = np.asarray(phases, dtype=float)

    def signal(t: float) -> np.ndarray:
        return amplitudes * np.sin(frequencies * t + phases)

    return signal


# -0.3 sin(pi t / 4), 0.2 cos(pi t / 2)
REFERENCE_SINUSOID = {
    "amplitudes": [-0.3, 0.2],
    "frequencies": [math.pi / 4, math.pi / 2],
    "phases": [0.0, math.pi / 2],
}

DESIRED_INPUT_KEYS = {
    "reference": set(),
    "zero": set(),
    "constant": {"value"},
    "sinusoid": {"amplitudes", "frequencies", "phases"},
}


def desired_input_signal(entry: Optional[Dict[str, Any]], m: int) -> TimeSignal:
    """Open-loop desired input t -> u_d(t) built from a named config entry."""
    entry = dict(entry or {"name": "reference"})
    name = entry.pop("name", None)
    if name not in DESIRED_INPUT_KEYS:
        raise ConfigMalformedExc(f"Unknown desired input '{name}', expected one of {sorted(DESIRED_INPUT_KEYS)}")
    unknown = set(entry) - DESIRED_INPUT_KEYS[name]
    if unknown:
        raise ConfigMalformedExc(f"Unknown keys for desired input '{name}': {sorted(unknown)}")

    if name == "zero":
        zero = np.zeros(m)
        return lambda t: zero.copy()
    if name == "constant":
        value = np.asarray(entry.get("value", np.zeros(m)), dtype=float).reshape(-1)
        if value.size != m:
            raise ConfigMalformedExc(f"Constant desired input has {value.size} entries, expected {m}")
        return lambda t: value.copy()
    params = REFERENCE_SINUSOID if name == "reference" else entry
    try:
        sizes = {len(params[key]) for key in ("amplitudes", "frequencies", "phases")}
    except (KeyError, TypeError) as e:
        raise ConfigMalformedExc(f"Sinusoid desired input needs amplitudes, frequencies and phases ({e})")
    if sizes != {m}:
        raise ConfigMalformedExc(f"Sinusoid desired input must have {m} channels")
    return _sinusoid(params["amplitudes"], params["frequencies"], params["phases"])
